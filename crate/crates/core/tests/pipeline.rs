use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use tfscreen::io::read_table;
use tfscreen::pipeline::{list_files, run, PipelineConfig, RunOptions, RunSummary, Step, StepStatus};
use tfscreen::sim::{simulate_screen, PerTf, SimConfig};
use tfscreen::Error;

fn small_sim() -> SimConfig {
    SimConfig {
        n_tfs: 6,
        cells_per_tf: PerTf::All(40),
        n_control_cells: 120,
        n_genes: 400,
        n_specific_per_tf: PerTf::All(12),
        n_artifact_genes: 40,
        ..SimConfig::default()
    }
}

fn dataset(sim: &SimConfig, extra: &str) -> (tempfile::TempDir, PathBuf) {
    let tmp = tempfile::tempdir().unwrap();
    simulate_screen(sim).unwrap().write_dataset(tmp.path()).unwrap();
    let conf = tmp.path().join("pipeline.toml");
    let mut text = fs::read_to_string(&conf).unwrap();
    text.push_str("min_genes = 50\n");
    text.push_str(extra);
    fs::write(&conf, text).unwrap();
    (tmp, conf)
}

fn load(conf: &Path) -> PipelineConfig {
    PipelineConfig::from_file(conf).unwrap()
}

fn run_all(cfg: &PipelineConfig) -> RunSummary {
    run(cfg, &RunOptions::default()).unwrap()
}

fn column(path: &Path, name: &str) -> Vec<String> {
    let t = read_table(path).unwrap();
    let i = t.column(name).unwrap();
    t.rows().iter().map(|r| r[i].clone()).collect()
}

fn snapshot(out: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    list_files(out)
        .unwrap()
        .into_iter()
        .filter(|p| !p.starts_with("logs"))
        .map(|p| {
            let bytes = fs::read(out.join(&p)).unwrap();
            (p, bytes)
        })
        .collect()
}

#[test]
fn full_run_recovers_truth_and_is_idempotent() {
    let (tmp, conf) = dataset(&small_sim(), "");
    let cfg = load(&conf);
    let first = run_all(&cfg);
    assert_eq!(first.executed(), Step::ALL.to_vec());
    let out = cfg.out_dir();

    // demux agrees with the simulated identities for every retained cell
    let truth = tmp.path().join("truth/cells.csv");
    let truth_label: BTreeMap<String, (String, String)> = column(&truth, "cell")
        .into_iter()
        .zip(column(&truth, "label").into_iter().zip(column(&truth, "true_tf")))
        .collect();
    let assignments = out.join("demux/assignments.csv");
    let cells = column(&assignments, "cell");
    let status = column(&assignments, "status");
    let tf = column(&assignments, "tf");
    assert!(!cells.is_empty());
    for i in 0..cells.len() {
        let (label, true_tf) = &truth_label[&cells[i]];
        let expected = match label.as_str() {
            "control" => "not_in_map",
            "tf" => "assigned",
            other => other,
        };
        assert_eq!(status[i], expected, "cell {}", cells[i]);
        if expected == "assigned" {
            assert_eq!(&tf[i], true_tf);
        }
    }

    // the planted artifact is what background subtraction removes
    let genes = tmp.path().join("truth/genes.csv");
    let artifact: BTreeSet<String> = column(&genes, "gene")
        .into_iter()
        .zip(column(&genes, "role"))
        .filter(|(_, r)| r == "artifact")
        .map(|(g, _)| g)
        .collect();
    let background: BTreeSet<String> = column(&out.join("background/background.csv"), "gene").into_iter().collect();
    let overlap = background.intersection(&artifact).count() as f64;
    assert!(overlap / artifact.len() as f64 >= 0.9, "recall {overlap}/{}", artifact.len());
    assert!(overlap / background.len() as f64 >= 0.9, "precision {overlap}/{}", background.len());

    let before = snapshot(&out);
    let second = run_all(&cfg);
    assert_eq!(second.skipped(), Step::ALL.to_vec());
    assert_eq!(snapshot(&out), before);
}

#[test]
fn parameter_change_reruns_only_dependents() {
    let (_tmp, conf) = dataset(&small_sim(), "");
    let cfg = load(&conf);
    run_all(&cfg);
    let text = fs::read_to_string(&conf).unwrap() + "background_fraction = 0.5\n";
    fs::write(&conf, text).unwrap();
    let summary = run_all(&load(&conf));
    assert_eq!(
        summary.executed(),
        vec![Step::Background, Step::Enrich, Step::Validate, Step::Report]
    );
    let info = cfg.out_dir().join("background/info.csv");
    let at = column(&info, "key").iter().position(|k| k == "fraction").unwrap();
    assert_eq!(column(&info, "value")[at], "0.5");
}

#[test]
fn strict_mode_reports_stale_steps() {
    let (_tmp, conf) = dataset(&small_sim(), "strict = true\n");
    run_all(&load(&conf));
    let text = fs::read_to_string(&conf).unwrap() + "alpha = 0.01\n";
    fs::write(&conf, text).unwrap();
    match run(&load(&conf), &RunOptions::default()) {
        Err(Error::Stale { step, .. }) => assert_eq!(step, "de-condition"),
        other => panic!("expected a stale error, got {other:?}"),
    }
}

#[test]
fn missing_upstream_is_named() {
    let (_tmp, conf) = dataset(&small_sim(), "");
    let cfg = load(&conf);
    let only = |steps: Vec<Step>| RunOptions { steps: Some(steps), force: false };
    run(&cfg, &only(vec![Step::Qc, Step::Merge, Step::Demux])).unwrap();
    let err = run(&cfg, &only(vec![Step::Validate])).unwrap_err();
    assert!(matches!(&err, Error::MissingUpstream { upstream, .. } if upstream == "de-pertf"));
    assert!(err.to_string().contains("de-pertf"));
}

#[test]
fn outputs_edited_by_hand_trigger_a_rerun() {
    let (_tmp, conf) = dataset(&small_sim(), "");
    let cfg = load(&conf);
    let only = RunOptions { steps: Some(vec![Step::Qc]), force: false };
    run(&cfg, &only).unwrap();
    let summary = cfg.out_dir().join("qc/qc_summary.csv");
    let original = fs::read(&summary).unwrap();
    fs::write(&summary, "tampered\n").unwrap();
    let again = run(&cfg, &only).unwrap();
    assert_eq!(again.outcomes[0].status, StepStatus::Executed);
    assert_eq!(fs::read(&summary).unwrap(), original);
}

#[test]
fn concurrent_runs_are_refused() {
    let (_tmp, conf) = dataset(&small_sim(), "");
    let cfg = load(&conf);
    fs::create_dir_all(cfg.out_dir()).unwrap();
    fs::write(cfg.out_dir().join(".lock"), "").unwrap();
    assert!(matches!(run(&cfg, &RunOptions::default()), Err(Error::Locked(_))));
}

#[test]
fn optional_steps_are_disabled_without_inputs() {
    let (_tmp, conf) = dataset(&small_sim(), "");
    let mut cfg = load(&conf);
    cfg.gmt.clear();
    cfg.rank_table = None;
    let summary = run_all(&cfg);
    let disabled: Vec<Step> = summary
        .outcomes
        .iter()
        .filter(|o| o.status == StepStatus::Disabled)
        .map(|o| o.step)
        .collect();
    assert_eq!(disabled, vec![Step::Enrich, Step::Gsea, Step::Validate]);
    let explicit = run(&cfg, &RunOptions { steps: Some(vec![Step::Gsea]), force: false });
    assert!(explicit.unwrap_err().to_string().contains("gmt"));
}

#[test]
fn null_screen_yields_few_specific_degs() {
    let sim = SimConfig {
        effect_fold: PerTf::All(1.0),
        artifact_fold: 1.0,
        ..small_sim()
    };
    let (_tmp, conf) = dataset(&sim, "");
    let cfg = load(&conf);
    run_all(&cfg);
    let counts: Vec<usize> = column(&cfg.out_dir().join("background/de_summary.csv"), "n_specific_degs")
        .iter()
        .map(|s| s.parse().unwrap())
        .collect();
    let total: usize = counts.iter().sum();
    // 6 TFs x 400 genes tested; alpha-level noise would be far above this
    assert!(total <= 12, "{counts:?}");
    let background = column(&cfg.out_dir().join("background/background.csv"), "gene");
    assert!(background.is_empty(), "{background:?}");
}

#[test]
fn stronger_tfs_rank_higher_in_validation() {
    let sim = SimConfig {
        n_tfs: 12,
        cells_per_tf: PerTf::Each(vec![20, 25, 30, 35, 40, 45, 50, 55, 60, 65, 70, 75]),
        n_specific_per_tf: PerTf::Each(vec![4, 6, 8, 10, 12, 14, 16, 18, 20, 22, 24, 26]),
        effect_fold: PerTf::Each(vec![1.5, 1.7, 1.9, 2.1, 2.3, 2.5, 2.7, 2.9, 3.1, 3.3, 3.5, 3.7]),
        ..small_sim()
    };
    let (_tmp, conf) = dataset(&sim, "");
    let cfg = load(&conf);
    run_all(&cfg);
    let v = cfg.out_dir().join("validate/validation.csv");
    let cols = column(&v, "rank_column");
    let row = cols.iter().position(|c| c == "scrna_rank").unwrap();
    let rho: f64 = column(&v, "rho")[row].parse().unwrap();
    let p: f64 = column(&v, "pval")[row].parse().unwrap();
    // rank 1 is the strongest, so more DEGs means a smaller rank
    assert!(rho < 0.0 && p < 0.05, "rho {rho} p {p}");
}

#[test]
fn seed_changes_the_simulation() {
    let a = simulate_screen(&small_sim()).unwrap();
    let b = simulate_screen(&SimConfig { seed: 7, ..small_sim() }).unwrap();
    assert_ne!(a.counts, b.counts);
    assert_eq!(a, simulate_screen(&small_sim()).unwrap());
}
