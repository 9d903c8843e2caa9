//! Analysis of pooled TF-overexpression single-cell screens: count matrix
//! handling, QC, barcode demultiplexing, differential expression with shared
//! background subtraction, enrichment, validation against published rankings,
//! a synthetic screen generator and a resumable pipeline.

pub mod de;
pub mod demux;
pub mod enrich;
pub mod error;
pub mod io;
pub mod matrix;
pub mod pipeline;
pub mod qc;
pub mod sim;
pub mod stats;
pub mod validate;

pub use error::{Error, Result};
