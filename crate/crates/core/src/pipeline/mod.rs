//! Resumable end-to-end pipeline.
//!
//! Each step writes into its own directory under the output directory and
//! then records a marker in `.markers/<step>.json` holding a digest of
//! everything it read (raw input bytes, upstream output directories, its own
//! parameters) and a digest of what it wrote. A later run skips the step when
//! both digests still match. Every step logs one `step=<name> status=<...>`
//! line for harnesses to parse.

mod config;
mod marker;
mod report;
mod steps;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};

pub use config::PipelineConfig;
pub use marker::{dir_digest, list_files, Digester, Marker};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MARKER_DIR: &str = ".markers";
pub const LOG_DIR: &str = "logs";
pub const MANIFEST: &str = "run_manifest.json";
const STAGING_DIR: &str = ".staging";
const LOCK_FILE: &str = ".lock";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Step {
    Qc,
    Merge,
    Demux,
    DeCondition,
    DePertf,
    Background,
    Enrich,
    Gsea,
    Validate,
    Report,
}

impl Step {
    /// Dependency order.
    pub const ALL: [Step; 10] = [
        Step::Qc,
        Step::Merge,
        Step::Demux,
        Step::DeCondition,
        Step::DePertf,
        Step::Background,
        Step::Enrich,
        Step::Gsea,
        Step::Validate,
        Step::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Step::Qc => "qc",
            Step::Merge => "merge",
            Step::Demux => "demux",
            Step::DeCondition => "de-condition",
            Step::DePertf => "de-pertf",
            Step::Background => "background",
            Step::Enrich => "enrich",
            Step::Gsea => "gsea",
            Step::Validate => "validate",
            Step::Report => "report",
        }
    }

    /// Output directory name, relative to the pipeline output directory.
    pub fn dir(self) -> &'static str {
        match self {
            Step::DeCondition => "de_condition",
            Step::DePertf => "de_pertf",
            other => other.name(),
        }
    }

    /// Steps whose outputs this step reads. The report step reads whatever
    /// has completed and so has no hard requirements.
    pub fn upstream(self) -> &'static [Step] {
        match self {
            Step::Qc | Step::Report => &[],
            Step::Merge => &[Step::Qc],
            Step::Demux | Step::DeCondition => &[Step::Merge],
            Step::DePertf => &[Step::Merge, Step::Demux],
            Step::Background => &[Step::DePertf],
            Step::Enrich => &[Step::Background, Step::DeCondition],
            Step::Gsea => &[Step::DeCondition],
            Step::Validate => &[Step::DePertf, Step::Background],
        }
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Step {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Step::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Step::ALL.iter().map(|s| s.name()).collect();
                Error::InvalidArgument(format!("unknown step `{s}` (expected one of {})", names.join(", ")))
            })
    }
}

/// Parses a comma-separated step list; `all` selects every step.
pub fn parse_steps(list: &str) -> Result<Vec<Step>> {
    let mut out = Vec::new();
    for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if item == "all" {
            out.extend(Step::ALL);
        } else {
            out.push(item.parse()?);
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidArgument("empty step list".into()));
    }
    out.sort();
    out.dedup();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StepStatus {
    Executed,
    Skipped,
    Disabled,
}

impl StepStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            StepStatus::Executed => "executed",
            StepStatus::Skipped => "skipped",
            StepStatus::Disabled => "disabled",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepOutcome {
    pub step: Step,
    pub status: StepStatus,
    pub reason: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct RunSummary {
    pub outcomes: Vec<StepOutcome>,
}

impl RunSummary {
    pub fn executed(&self) -> Vec<Step> {
        self.with_status(StepStatus::Executed)
    }

    pub fn skipped(&self) -> Vec<Step> {
        self.with_status(StepStatus::Skipped)
    }

    fn with_status(&self, status: StepStatus) -> Vec<Step> {
        self.outcomes.iter().filter(|o| o.status == status).map(|o| o.step).collect()
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// `None` runs every step.
    pub steps: Option<Vec<Step>>,
    pub force: bool,
}

struct Lock(PathBuf);

impl Lock {
    fn acquire(out: &Path) -> Result<Lock> {
        let path = out.join(LOCK_FILE);
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(Lock(path)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Locked(out.to_path_buf())),
            Err(e) => Err(Error::io(&path, e)),
        }
    }
}

impl Drop for Lock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

fn marker_path(out: &Path, step: Step) -> PathBuf {
    out.join(MARKER_DIR).join(format!("{}.json", step.name()))
}

/// Whether `step` has a marker whose recorded outputs are still on disk.
pub fn is_complete(out: &Path, step: Step) -> Result<bool> {
    Ok(match Marker::read(&marker_path(out, step))? {
        Some(m) => m.output_digest == dir_digest(&out.join(step.dir()))?,
        None => false,
    })
}

fn input_digest(cfg: &PipelineConfig, out: &Path, step: Step) -> Result<String> {
    let mut d = Digester::new();
    d.bytes("step", step.name().as_bytes());
    d.bytes("version", VERSION.as_bytes());
    let params = serde_json::to_vec(&steps::params(cfg, step)).expect("params serialize");
    d.bytes("params", &params);
    for (label, path) in steps::raw_inputs(cfg, step)? {
        d.file(&format!("input:{label}"), &path)?;
    }
    let upstream: Vec<Step> = if step == Step::Report {
        let mut done = Vec::new();
        for s in Step::ALL.into_iter().filter(|&s| s != Step::Report) {
            if is_complete(out, s)? {
                done.push(s);
            }
        }
        done
    } else {
        step.upstream().to_vec()
    };
    for u in upstream {
        d.dir(&format!("step:{}", u.name()), &out.join(u.dir()))?;
    }
    Ok(d.finish())
}

fn fail(step: Step, e: Error) -> Error {
    match e {
        e @ (Error::MissingInput { .. } | Error::MissingUpstream { .. } | Error::Stale { .. } | Error::StepFailed { .. }) => e,
        other => Error::StepFailed {
            step: step.name().to_string(),
            source: Box::new(other),
        },
    }
}

fn run_step(cfg: &PipelineConfig, out: &Path, step: Step, force: bool) -> Result<StepOutcome> {
    let start = Instant::now();
    for &u in step.upstream() {
        if !is_complete(out, u)? {
            return Err(Error::MissingUpstream {
                step: step.name().into(),
                upstream: u.name().into(),
            });
        }
    }
    let digest = input_digest(cfg, out, step)?;
    let step_dir = out.join(step.dir());
    let marker = Marker::read(&marker_path(out, step))?;
    let reason = match &marker {
        _ if force => "forced",
        None => "no marker",
        Some(m) if m.input_digest != digest || m.version != VERSION => {
            if cfg.strict {
                return Err(Error::Stale {
                    step: step.name().into(),
                    msg: "inputs or parameters changed since the last completed run; rerun with --force".into(),
                });
            }
            "inputs changed"
        }
        Some(m) if m.output_digest != dir_digest(&step_dir)? => "outputs modified",
        Some(_) => {
            return Ok(StepOutcome {
                step,
                status: StepStatus::Skipped,
                reason: "up to date".into(),
                seconds: start.elapsed().as_secs_f64(),
            })
        }
    };

    let stage = out.join(STAGING_DIR).join(step.dir());
    if stage.exists() {
        fs::remove_dir_all(&stage).map_err(|e| Error::io(&stage, e))?;
    }
    fs::create_dir_all(&stage).map_err(|e| Error::io(&stage, e))?;
    steps::execute(cfg, out, step, &stage)?;
    if step_dir.exists() {
        fs::remove_dir_all(&step_dir).map_err(|e| Error::io(&step_dir, e))?;
    }
    fs::rename(&stage, &step_dir).map_err(|e| Error::io(&step_dir, e))?;
    Marker {
        step: step.name().into(),
        version: VERSION.into(),
        input_digest: digest,
        output_digest: dir_digest(&step_dir)?,
    }
    .write(&marker_path(out, step))?;
    Ok(StepOutcome {
        step,
        status: StepStatus::Executed,
        reason: reason.into(),
        seconds: start.elapsed().as_secs_f64(),
    })
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'a str,
    threads: usize,
    force: bool,
    config: &'a PipelineConfig,
    steps: &'a [StepOutcome],
    error: Option<String>,
}

fn write_manifest(cfg: &PipelineConfig, out: &Path, force: bool, summary: &RunSummary, error: Option<&Error>) -> Result<()> {
    let manifest = Manifest {
        version: VERSION,
        threads: rayon::current_num_threads(),
        force,
        config: cfg,
        steps: &summary.outcomes,
        error: error.map(|e| e.to_string()),
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    bytes.push(b'\n');
    crate::io::write_bytes(&out.join(LOG_DIR).join(MANIFEST), &bytes)
}

/// Runs the requested steps in dependency order. Steps whose optional input
/// is not configured (gene-set libraries, rank table) are reported as
/// disabled when running everything and rejected when named explicitly.
pub fn run(cfg: &PipelineConfig, opts: &RunOptions) -> Result<RunSummary> {
    cfg.validate()?;
    let out = cfg.out_dir();
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let _lock = Lock::acquire(&out)?;
    let explicit = opts.steps.is_some();
    let requested = match &opts.steps {
        Some(list) => {
            let mut v = list.clone();
            v.sort();
            v.dedup();
            v
        }
        None => Step::ALL.to_vec(),
    };

    let mut summary = RunSummary::default();
    let mut result = Ok(());
    for step in requested {
        if let Some(key) = steps::disabled_by(cfg, step) {
            if explicit {
                result = Err(Error::StepFailed {
                    step: step.name().into(),
                    source: Box::new(Error::Config(format!("`{key}` is not configured"))),
                });
                break;
            }
            log::info!("step={} status=disabled reason=\"{key} not configured\"", step.name());
            summary.outcomes.push(StepOutcome {
                step,
                status: StepStatus::Disabled,
                reason: format!("{key} not configured"),
                seconds: 0.0,
            });
            continue;
        }
        match run_step(cfg, &out, step, opts.force).map_err(|e| fail(step, e)) {
            Ok(o) => {
                log::info!(
                    "step={} status={} reason=\"{}\" seconds={:.3}",
                    step.name(),
                    o.status.as_str(),
                    o.reason,
                    o.seconds
                );
                summary.outcomes.push(o);
            }
            Err(e) => {
                log::error!("step={} status=failed error=\"{e}\"", step.name());
                result = Err(e);
                break;
            }
        }
    }
    let staging = out.join(STAGING_DIR);
    if staging.exists() {
        let _ = fs::remove_dir_all(&staging);
    }
    write_manifest(cfg, &out, opts.force, &summary, result.as_ref().err())?;
    result.map(|_| summary)
}
