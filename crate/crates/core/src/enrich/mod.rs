//! Functional enrichment of DE results: hypergeometric over-representation,
//! preranked GSEA, and cross-group recurrence of enriched terms.

mod gsea;
mod ora;
mod recurrence;

pub use gsea::{
    enrichment_score, gsea_preranked, gsea_table, running_sum, term_seed, EnrichmentScore, GseaParams,
    GseaRecord,
};
pub use ora::{hypergeom_upper_tail, ora, ora_table, OraParams, OraRecord};
pub use recurrence::{recurrence, RecurrenceMatrix, RecurrenceRow, MAX_NEG_LOG10_Q};
