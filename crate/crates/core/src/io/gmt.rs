//! GMT gene-set libraries: `term<TAB>description<TAB>gene<TAB>gene...`.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;
use std::path::Path;

use crate::error::{Error, Result};

use super::{open_text, write_bytes};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneSetLibrary {
    pub name: String,
    pub sets: BTreeMap<String, BTreeSet<String>>,
}

impl GeneSetLibrary {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            sets: BTreeMap::new(),
        }
    }
}

/// Library name derived from a path: the file name without `.gz`/`.gmt`.
fn library_name(path: &Path) -> String {
    let mut name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    for ext in [".gz", ".gmt", ".txt"] {
        if let Some(stripped) = name.strip_suffix(ext) {
            name = stripped.to_string();
        }
    }
    name
}

pub fn read_gmt(path: &Path) -> Result<GeneSetLibrary> {
    let mut lib = GeneSetLibrary::new(library_name(path));
    for (i, line) in open_text(path)?.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 3 {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected at least 3 tab-separated fields, found {}", fields.len()),
            ));
        }
        let term = fields[0].trim().to_string();
        if term.is_empty() {
            return Err(Error::parse(path, lineno, "empty term name"));
        }
        let mut genes = BTreeSet::new();
        let mut dups = 0usize;
        // trailing tabs are common in published libraries
        for g in fields[2..].iter().map(|g| g.trim()).filter(|g| !g.is_empty()) {
            if !genes.insert(g.to_string()) {
                dups += 1;
            }
        }
        if dups > 0 {
            log::warn!(
                "{}:{lineno}: term `{term}` lists {dups} duplicate gene(s); deduplicated",
                path.display()
            );
        }
        if genes.is_empty() {
            return Err(Error::parse(path, lineno, format!("term `{term}` has no genes")));
        }
        if lib.sets.insert(term.clone(), genes).is_some() {
            return Err(Error::parse(path, lineno, format!("duplicate term `{term}`")));
        }
    }
    Ok(lib)
}

/// Writes a library with an empty description column, terms sorted.
pub fn write_gmt(path: &Path, lib: &GeneSetLibrary) -> Result<()> {
    let mut s = String::new();
    for (term, genes) in &lib.sets {
        s.push_str(term);
        s.push('\t');
        for g in genes {
            s.push('\t');
            s.push_str(g);
        }
        s.push('\n');
    }
    write_bytes(path, s.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(body: &str) -> Result<GeneSetLibrary> {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("GO_BP.gmt");
        std::fs::write(&p, body).unwrap();
        read_gmt(&p)
    }

    #[test]
    fn basic_and_dedup() {
        let lib = parse("T1\tdesc\tA\tB\n").unwrap();
        assert_eq!(lib.name, "GO_BP");
        assert_eq!(lib.sets["T1"], ["A", "B"].iter().map(|s| s.to_string()).collect());
        let lib = parse("T1\tdesc\tA\tA\n").unwrap();
        assert_eq!(lib.sets["T1"].len(), 1);
        let lib = parse("T1\t\tA\tB\t\n\n").unwrap();
        assert_eq!(lib.sets["T1"].len(), 2);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse("T1\tdesc\tA\nT2\tdesc\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse("T1\tdesc\tA\nT1\tdesc\tB\n").unwrap_err();
        assert!(err.to_string().contains("duplicate term"));
    }

    #[test]
    fn write_then_read() {
        let dir = tempfile::tempdir().unwrap();
        let mut lib = GeneSetLibrary::new("lib");
        lib.sets.insert("X".into(), ["g1".to_string(), "g2".to_string()].into());
        lib.sets.insert("Y".into(), ["g3".to_string()].into());
        let p = dir.path().join("lib.gmt");
        write_gmt(&p, &lib).unwrap();
        assert_eq!(read_gmt(&p).unwrap(), lib);
    }
}
