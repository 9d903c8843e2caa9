use std::collections::{BTreeMap, BTreeSet};

use crate::io::{Field, Table};

use super::OraRecord;

/// Upper clip for `-log10(q)` entries.
pub const MAX_NEG_LOG10_Q: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct RecurrenceRow {
    pub term: String,
    /// Number of groups in which the term is significant.
    pub recurrence: usize,
    /// `-log10(q)` per group (column order of [`RecurrenceMatrix::groups`]),
    /// 0 where not significant.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RecurrenceMatrix {
    pub groups: Vec<String>,
    /// Sorted by recurrence descending, then term.
    pub rows: Vec<RecurrenceRow>,
}

/// Term x group matrix of clipped `-log10(q)` over terms significant
/// (`q < q_threshold`) in at least one group. Terms are keyed by name; when
/// the same name is significant in two libraries the smaller q wins.
pub fn recurrence(per_group: &BTreeMap<String, Vec<OraRecord>>, q_threshold: f64) -> RecurrenceMatrix {
    let groups: Vec<String> = per_group.keys().cloned().collect();
    let mut best: BTreeMap<&str, BTreeMap<usize, f64>> = BTreeMap::new();
    for (col, records) in per_group.values().enumerate() {
        for r in records.iter().filter(|r| r.q < q_threshold) {
            let cell = best.entry(&r.term).or_default().entry(col).or_insert(r.q);
            *cell = cell.min(r.q);
        }
    }
    let mut rows: Vec<RecurrenceRow> = best
        .into_iter()
        .map(|(term, cols)| {
            let mut values = vec![0.0; groups.len()];
            for (&c, &q) in &cols {
                values[c] = (-q.log10()).min(MAX_NEG_LOG10_Q).max(0.0);
            }
            RecurrenceRow {
                term: term.to_string(),
                recurrence: values.iter().filter(|&&v| v > 0.0).count(),
                values,
            }
        })
        .collect();
    rows.sort_by(|a, b| b.recurrence.cmp(&a.recurrence).then_with(|| a.term.cmp(&b.term)));
    RecurrenceMatrix { groups, rows }
}

impl RecurrenceMatrix {
    pub fn to_table(&self) -> Table {
        let mut cols = vec!["term".to_string(), "recurrence".to_string()];
        cols.extend(self.groups.iter().cloned());
        let mut t = Table::new(&cols);
        for r in &self.rows {
            let mut row = vec![Field::from(&r.term), r.recurrence.into()];
            row.extend(r.values.iter().map(|&v| Field::from(v)));
            t.push(row);
        }
        t
    }

    pub fn terms(&self) -> BTreeSet<&str> {
        self.rows.iter().map(|r| r.term.as_str()).collect()
    }
}
