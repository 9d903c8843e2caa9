use std::fs;
use std::io::Write;

use proptest::prelude::*;
use tfscreen::demux::{TfLabel, TfMap};
use tfscreen::io::{
    read_gmt, read_mtx, read_rank_table, read_table, read_tfmap, write_gmt, write_mtx, write_rank_table, write_table,
    GeneSetLibrary, RankRow, RankTable, Table, TfMapFormat,
};
use tfscreen::matrix::CountMatrix;
use tfscreen::Error;

fn matrix(rows: &[Vec<u32>]) -> CountMatrix {
    let cells = (0..rows.len()).map(|i| format!("cell{i}-1")).collect();
    let genes = (0..rows.first().map_or(0, |r| r.len())).map(|i| format!("GENE{i}")).collect();
    CountMatrix::from_dense(cells, genes, rows).unwrap()
}

fn read_dir(dir: &std::path::Path) -> tfscreen::Result<CountMatrix> {
    read_mtx(&dir.join("matrix.mtx"), &dir.join("barcodes.tsv"), &dir.join("features.tsv"))
}

proptest! {
    #[test]
    fn mtx_round_trip(rows in (1usize..6, 1usize..6).prop_flat_map(|(r, c)| {
        proptest::collection::vec(proptest::collection::vec(0u32..1000, c), r)
    })) {
        let tmp = tempfile::tempdir().unwrap();
        let m = matrix(&rows);
        write_mtx(tmp.path(), &m).unwrap();
        prop_assert_eq!(read_dir(tmp.path()).unwrap(), m);
    }

    #[test]
    fn table_round_trip(cells in proptest::collection::vec(proptest::collection::vec("[a-z ,\"]{0,6}", 3), 0..6)) {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("t.csv");
        let mut t = Table::new(&["a", "b", "c"]);
        for row in &cells {
            t.push(row.iter().map(|s| s.as_str().into()).collect());
        }
        write_table(&t, &path).unwrap();
        let back = read_table(&path).unwrap();
        prop_assert_eq!(back.columns(), t.columns());
        prop_assert_eq!(back.rows(), t.rows());
    }
}

#[test]
fn gzipped_mtx_reads_like_plain() {
    let tmp = tempfile::tempdir().unwrap();
    let m = matrix(&[vec![0, 3, 1], vec![2, 0, 0]]);
    write_mtx(tmp.path(), &m).unwrap();
    for name in ["matrix.mtx", "barcodes.tsv", "features.tsv"] {
        let plain = fs::read(tmp.path().join(name)).unwrap();
        let f = fs::File::create(tmp.path().join(format!("{name}.gz"))).unwrap();
        let mut gz = flate2::write::GzEncoder::new(f, flate2::Compression::default());
        gz.write_all(&plain).unwrap();
        gz.finish().unwrap();
    }
    let p = |n: &str| tmp.path().join(n);
    let back = read_mtx(&p("matrix.mtx.gz"), &p("barcodes.tsv.gz"), &p("features.tsv.gz")).unwrap();
    assert_eq!(back, m);
}

#[test]
fn malformed_mtx_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    write_mtx(tmp.path(), &matrix(&[vec![1, 2]])).unwrap();
    let mtx = tmp.path().join("matrix.mtx");
    let header = "%%MatrixMarket matrix coordinate integer general\n";
    for body in ["2 1 1\n3 1 5\n", "2 1 1\n1 1 1.5\n", "2 1 2\n1 1 1\n1 1 2\n", "2 1 1\n1 1 -4\n", "3 1 0\n"] {
        fs::write(&mtx, format!("{header}{body}")).unwrap();
        assert!(read_dir(tmp.path()).is_err(), "accepted {body:?}");
    }
}

#[test]
fn gmt_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("lib.gmt");
    let mut lib = GeneSetLibrary::new("lib");
    lib.sets.insert("A".into(), ["X", "Y"].iter().map(|s| s.to_string()).collect());
    lib.sets.insert("B".into(), ["Z"].iter().map(|s| s.to_string()).collect());
    write_gmt(&path, &lib).unwrap();
    assert_eq!(read_gmt(&path).unwrap(), lib);
}

#[test]
fn tfmap_round_trip_and_conflicts() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("map.csv");
    let format = TfMapFormat::default();
    let map = TfMap::from_entries([
        ("AAAACCCCGGGGTTTT".to_string(), TfLabel::Tf { gene: "HES5".into(), isoform: Some("NM_1".into()) }),
        ("ACGTACGTACGTACGT".to_string(), TfLabel::Ambiguous),
        ("TTTTGGGGCCCCAAAA".to_string(), TfLabel::Undetected),
    ]);
    tfscreen::io::write_tfmap(&path, &map, &format).unwrap();
    assert_eq!(read_tfmap(&path, &format).unwrap(), map);

    fs::write(&path, "barcode,tf\nAAAACCCCGGGGTTTT,HES5|NM_1\nAAAACCCCGGGGTTTT,AMB\n").unwrap();
    assert!(matches!(read_tfmap(&path, &format), Err(Error::ConflictingLabel { .. })));
}

#[test]
fn rank_table_round_trip_keeps_blanks() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("ranks.csv");
    let t = RankTable {
        columns: vec!["scrna_rank".into(), "avg_rank".into()],
        rows: vec![
            RankRow { tf: "A".into(), ranks: vec![Some(1.0), None] },
            RankRow { tf: "B".into(), ranks: vec![Some(2.5), Some(3.0)] },
        ],
    };
    write_rank_table(&path, &t).unwrap();
    assert_eq!(read_rank_table(&path).unwrap(), t);
}
