//! TF identity assignment from a precomputed barcode map.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use regex::Regex;

use crate::error::{Error, Result};
use crate::io::{Field, Table};

pub const BARCODE_LEN: usize = 16;

/// Label a TF map assigns to one droplet barcode.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TfLabel {
    Tf { gene: String, isoform: Option<String> },
    /// `AMB`: the barcode matched several ORFs.
    Ambiguous,
    /// `NA`: no ORF barcode detected.
    Undetected,
}

impl TfLabel {
    pub fn tf(&self) -> Option<&str> {
        match self {
            TfLabel::Tf { gene, .. } => Some(gene),
            _ => None,
        }
    }
}

/// Barcode to label lookup. Barcodes are 16 bases over `ACGT`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TfMap {
    entries: BTreeMap<String, TfLabel>,
}

impl TfMap {
    pub fn from_entries(entries: impl IntoIterator<Item = (String, TfLabel)>) -> Self {
        Self {
            entries: entries.into_iter().collect(),
        }
    }

    pub fn get(&self, barcode: &str) -> Option<&TfLabel> {
        self.entries.get(barcode)
    }

    pub fn insert(&mut self, barcode: String, label: TfLabel) {
        self.entries.insert(barcode, label);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in barcode order.
    pub fn iter(&self) -> impl Iterator<Item = (&String, &TfLabel)> {
        self.entries.iter()
    }
}

fn is_barcode(s: &str) -> bool {
    s.len() == BARCODE_LEN && s.bytes().all(|b| matches!(b, b'A' | b'C' | b'G' | b'T'))
}

/// Strips a trailing `-<digits>` GEM-well suffix and validates the result.
pub fn normalize_barcode(raw: &str) -> Option<String> {
    let core = match raw.rsplit_once('-') {
        Some((head, tail)) if !tail.is_empty() && tail.bytes().all(|b| b.is_ascii_digit()) => head,
        _ => raw,
    };
    is_barcode(core).then(|| core.to_string())
}

/// Recovers the raw droplet barcode from a merged cell id such as
/// `pool_r1_AAACCTGAGAAACCAT-1`.
#[derive(Debug, Clone)]
pub struct BarcodeExtractor {
    prefix: Option<Regex>,
    suffix: Option<Regex>,
}

impl Default for BarcodeExtractor {
    fn default() -> Self {
        Self::new(Some("^.*_"), Some(r"-\d+$")).expect("default patterns compile")
    }
}

impl BarcodeExtractor {
    pub fn new(prefix: Option<&str>, suffix: Option<&str>) -> Result<Self> {
        let compile = |p: &str| {
            Regex::new(p).map_err(|e| Error::Config(format!("barcode pattern `{p}`: {e}")))
        };
        Ok(Self {
            prefix: prefix.map(compile).transpose()?,
            suffix: suffix.map(compile).transpose()?,
        })
    }

    pub fn extract(&self, cell_id: &str) -> String {
        let mut s = cell_id.to_string();
        if let Some(re) = &self.prefix {
            s = re.replace(&s, "").into_owned();
        }
        if let Some(re) = &self.suffix {
            s = re.replace(&s, "").into_owned();
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DemuxStatus {
    Assigned,
    Ambiguous,
    Undetected,
    NotInMap,
}

impl DemuxStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            DemuxStatus::Assigned => "assigned",
            DemuxStatus::Ambiguous => "ambiguous",
            DemuxStatus::Undetected => "undetected",
            DemuxStatus::NotInMap => "not_in_map",
        }
    }
}

impl fmt::Display for DemuxStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DemuxStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "assigned" => DemuxStatus::Assigned,
            "ambiguous" => DemuxStatus::Ambiguous,
            "undetected" => DemuxStatus::Undetected,
            "not_in_map" => DemuxStatus::NotInMap,
            other => return Err(Error::InvalidArgument(format!("unknown demux status `{other}`"))),
        })
    }
}

/// Per-cell demultiplexing outcome, aligned with the input cell list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DemuxResult {
    pub cells: Vec<String>,
    pub status: Vec<DemuxStatus>,
    /// Gene symbol of the assigned TF; `Some` iff status is `Assigned`.
    pub tf: Vec<Option<String>>,
}

impl DemuxResult {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Assigned cells grouped by TF, in TF order.
    pub fn cells_by_tf(&self) -> BTreeMap<&str, Vec<&str>> {
        let mut out: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for (cell, tf) in self.cells.iter().zip(&self.tf) {
            if let Some(tf) = tf {
                out.entry(tf).or_default().push(cell);
            }
        }
        out
    }
}

pub fn assign_identities(
    cells: &[String],
    tfmap: &TfMap,
    extractor: &BarcodeExtractor,
) -> Result<DemuxResult> {
    let mut result = DemuxResult {
        cells: cells.to_vec(),
        status: Vec::with_capacity(cells.len()),
        tf: Vec::with_capacity(cells.len()),
    };
    for cell in cells {
        let barcode = extractor.extract(cell);
        if !is_barcode(&barcode) {
            return Err(Error::MalformedBarcode {
                cell: cell.clone(),
                barcode,
            });
        }
        let (status, tf) = match tfmap.get(&barcode) {
            Some(TfLabel::Tf { gene, .. }) => (DemuxStatus::Assigned, Some(gene.clone())),
            Some(TfLabel::Ambiguous) => (DemuxStatus::Ambiguous, None),
            Some(TfLabel::Undetected) => (DemuxStatus::Undetected, None),
            None => (DemuxStatus::NotInMap, None),
        };
        result.status.push(status);
        result.tf.push(tf);
    }
    Ok(result)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateSummary {
    pub replicate: String,
    pub n_cells: usize,
    pub n_assigned: usize,
    pub n_ambiguous: usize,
    pub n_undetected: usize,
    pub n_not_in_map: usize,
    pub assignment_rate: f64,
}

impl ReplicateSummary {
    fn new(replicate: &str) -> Self {
        Self {
            replicate: replicate.to_string(),
            n_cells: 0,
            n_assigned: 0,
            n_ambiguous: 0,
            n_undetected: 0,
            n_not_in_map: 0,
            assignment_rate: 0.0,
        }
    }

    fn add(&mut self, status: DemuxStatus) {
        self.n_cells += 1;
        match status {
            DemuxStatus::Assigned => self.n_assigned += 1,
            DemuxStatus::Ambiguous => self.n_ambiguous += 1,
            DemuxStatus::Undetected => self.n_undetected += 1,
            DemuxStatus::NotInMap => self.n_not_in_map += 1,
        }
    }

    fn finish(&mut self) {
        self.assignment_rate = if self.n_cells == 0 {
            0.0
        } else {
            self.n_assigned as f64 / self.n_cells as f64
        };
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemuxSummary {
    /// Sorted by replicate name.
    pub replicates: Vec<ReplicateSummary>,
    pub overall: ReplicateSummary,
}

/// Label of the pooled row in [`DemuxSummary::to_table`].
pub const OVERALL: &str = "all";

/// `replicate_of` is aligned with `r.cells`.
pub fn demux_summary(r: &DemuxResult, replicate_of: &[String]) -> Result<DemuxSummary> {
    if replicate_of.len() != r.len() {
        return Err(Error::LabelLengthMismatch {
            labels: replicate_of.len(),
            cells: r.len(),
        });
    }
    let mut per: BTreeMap<&str, ReplicateSummary> = BTreeMap::new();
    let mut overall = ReplicateSummary::new(OVERALL);
    for (&status, rep) in r.status.iter().zip(replicate_of) {
        per.entry(rep)
            .or_insert_with(|| ReplicateSummary::new(rep))
            .add(status);
        overall.add(status);
    }
    overall.finish();
    let replicates = per
        .into_values()
        .map(|mut s| {
            s.finish();
            s
        })
        .collect();
    Ok(DemuxSummary {
        replicates,
        overall,
    })
}

impl DemuxSummary {
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&[
            "replicate",
            "n_cells",
            "n_assigned",
            "n_ambiguous",
            "n_undetected",
            "n_not_in_map",
            "assignment_rate",
        ]);
        for s in self.replicates.iter().chain(std::iter::once(&self.overall)) {
            t.push(vec![
                Field::from(&s.replicate),
                s.n_cells.into(),
                s.n_assigned.into(),
                s.n_ambiguous.into(),
                s.n_undetected.into(),
                s.n_not_in_map.into(),
                s.assignment_rate.into(),
            ]);
        }
        t
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TfCount {
    pub tf: String,
    pub n_cells: usize,
    pub eligible: bool,
}

/// Assigned-cell counts per TF, sorted by count descending then name.
pub fn tf_cell_counts(r: &DemuxResult, min_cells: usize) -> Vec<TfCount> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for tf in r.tf.iter().flatten() {
        *counts.entry(tf).or_default() += 1;
    }
    let mut out: Vec<TfCount> = counts
        .into_iter()
        .map(|(tf, n)| TfCount {
            tf: tf.to_string(),
            n_cells: n,
            eligible: n >= min_cells,
        })
        .collect();
    out.sort_by(|a, b| b.n_cells.cmp(&a.n_cells).then_with(|| a.tf.cmp(&b.tf)));
    out
}

pub fn tf_counts_table(counts: &[TfCount]) -> Table {
    let mut t = Table::new(&["tf", "n_cells", "eligible"]);
    for c in counts {
        t.push(vec![Field::from(&c.tf), c.n_cells.into(), c.eligible.into()]);
    }
    t
}
