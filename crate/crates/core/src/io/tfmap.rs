//! Barcode to TF-label tables.

use std::collections::BTreeMap;
use std::path::Path;

use crate::demux::{normalize_barcode, TfLabel, TfMap};
use crate::error::{Error, Result};

use super::table::{read_sniffed, Table};
use super::write_table;

/// Column names and label encoding of a TF map file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TfMapFormat {
    pub barcode_column: String,
    pub label_column: String,
    /// Separates gene name from isoform in TF labels, e.g. `HES5|NM_001010926`.
    pub isoform_delimiter: char,
}

impl Default for TfMapFormat {
    fn default() -> Self {
        Self {
            barcode_column: "barcode".into(),
            label_column: "tf".into(),
            isoform_delimiter: '|',
        }
    }
}

impl TfMapFormat {
    pub fn parse_label(&self, label: &str) -> Option<TfLabel> {
        match label {
            "AMB" => Some(TfLabel::Ambiguous),
            "NA" => Some(TfLabel::Undetected),
            "" => None,
            other => {
                let (gene, isoform) = match other.split_once(self.isoform_delimiter) {
                    Some((g, i)) => (g, Some(i.to_string())),
                    None => (other, None),
                };
                if gene.is_empty() {
                    return None;
                }
                Some(TfLabel::Tf {
                    gene: gene.to_string(),
                    isoform: isoform.filter(|i| !i.is_empty()),
                })
            }
        }
    }

    pub fn render_label(&self, label: &TfLabel) -> String {
        match label {
            TfLabel::Ambiguous => "AMB".into(),
            TfLabel::Undetected => "NA".into(),
            TfLabel::Tf { gene, isoform: Some(iso) } => format!("{gene}{}{iso}", self.isoform_delimiter),
            TfLabel::Tf { gene, isoform: None } => gene.clone(),
        }
    }
}

pub fn read_tfmap(path: &Path, format: &TfMapFormat) -> Result<TfMap> {
    let raw = read_sniffed(path)?;
    let bc_col = raw.require(&format.barcode_column, path)?;
    let label_col = raw.require(&format.label_column, path)?;
    let mut entries: BTreeMap<String, (TfLabel, String)> = BTreeMap::new();
    for (i, row) in raw.rows().iter().enumerate() {
        let lineno = i + 2;
        let raw_bc = row[bc_col].trim();
        let barcode = normalize_barcode(raw_bc)
            .ok_or_else(|| Error::parse(path, lineno, format!("malformed barcode `{raw_bc}`")))?;
        let text = row[label_col].trim();
        let label = format
            .parse_label(text)
            .ok_or_else(|| Error::parse(path, lineno, format!("unparseable label `{text}`")))?;
        match entries.get(&barcode) {
            Some((existing, first)) if *existing != label => {
                return Err(Error::ConflictingLabel {
                    path: path.to_path_buf(),
                    barcode,
                    first: first.clone(),
                    second: text.to_string(),
                });
            }
            Some(_) => {}
            None => {
                entries.insert(barcode, (label, text.to_string()));
            }
        }
    }
    Ok(TfMap::from_entries(entries.into_iter().map(|(k, (l, _))| (k, l))))
}

/// Writes the map sorted by barcode.
pub fn write_tfmap(path: &Path, map: &TfMap, format: &TfMapFormat) -> Result<()> {
    let mut t = Table::new(&[&format.barcode_column, &format.label_column]);
    for (bc, label) in map.iter() {
        t.push(vec![bc.into(), format.render_label(label).into()]);
    }
    write_table(&t, path)
}
