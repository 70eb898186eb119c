//! Stage runners behind the command line: fit, layout, train, sample, audit.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::audit::{run_audit, AuditOptions, AuditReport};
use crate::codec::{decode_grids, dump_grids, fingerprint, fit_codec, CodecSpec, DecodeOptions, GRID_HEIGHT, GRID_WIDTH};
use crate::diffusion::{loss_log_csv, sample, train, Checkpoint, SampleOptions, TrainConfig, TrainError};
use crate::error::{Error, Result};
use crate::layout::{
    association, baseline_layout, clustered_layout, manual_layout, Layout, LayoutStrategy,
    PlacementPlan,
};
use crate::schema::Schema;
use crate::table::{load_table, CleaningPolicy, Table};

pub const SYNTHETIC_CSV: &str = "synthetic.csv";
pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const LOSS_LOG: &str = "loss_log.csv";
pub const LAYOUT_TSV: &str = "layout.tsv";
pub const AUDIT_JSON: &str = "audit.json";
pub const AUDIT_MD: &str = "audit.md";
pub const CODEC_JSON: &str = "codec.json";
pub const GRID_DUMP: &str = "grids.txt";
pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub schema: PathBuf,
    pub train_csv: PathBuf,
    pub test_csv: Option<PathBuf>,
    pub strategy: LayoutStrategy,
    pub plan: Option<PathBuf>,
    pub train: TrainConfig,
    pub rows: usize,
    pub clamp: bool,
    pub has_header: bool,
    pub disclosure: bool,
    pub out: PathBuf,
    pub force: bool,
}

impl RunConfig {
    pub fn new(schema: PathBuf, train_csv: PathBuf, out: PathBuf, seed: u64) -> Self {
        let train = TrainConfig::new(seed);
        RunConfig {
            schema,
            train_csv,
            test_csv: None,
            strategy: LayoutStrategy::Baseline,
            plan: None,
            rows: train.sample_count,
            train,
            clamp: true,
            has_header: true,
            disclosure: true,
            out,
            force: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.strategy == LayoutStrategy::Manual && self.plan.is_none() {
            return Err(Error::Config("the manual layout needs --plan".into()));
        }
        if self.rows == 0 {
            return Err(Error::Config("--rows must be at least 1".into()));
        }
        self.train.validate()
    }

    pub fn policy(&self) -> CleaningPolicy {
        CleaningPolicy {
            has_header: self.has_header,
            ..CleaningPolicy::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub seconds: f64,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config: RunConfig,
    pub inputs: Vec<Artifact>,
    pub stages: Vec<StageRecord>,
    pub artifacts: Vec<Artifact>,
    pub failed_stage: Option<String>,
    pub error: Option<String>,
    /// Optimizer settings, echoed because they stand in for unstated defaults.
    pub optimizer: String,
}

pub fn hash_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(format!("hashing {}", path.display()), e))?;
    Ok(fingerprint(&bytes))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Create `out`, refusing to replace any of `files` unless `force`.
pub fn prepare_out(out: &Path, files: &[&str], force: bool) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(format!("creating {}", out.display()), e))?;
    if !force {
        if let Some(f) = files.iter().find(|f| out.join(f).exists()) {
            return Err(Error::Config(format!(
                "{} already exists; pass --force to overwrite",
                out.join(f).display()
            )));
        }
    }
    Ok(())
}

pub fn load_inputs(schema: &Path, csv: &Path, policy: &CleaningPolicy) -> Result<(Schema, Table)> {
    let schema = Schema::from_path(schema)?;
    let table = load_table(csv, &schema, policy)?;
    Ok((schema, table))
}

pub fn build_layout(
    strategy: LayoutStrategy,
    spec: &CodecSpec,
    table: &Table,
    plan: Option<&Path>,
) -> Result<Layout> {
    match strategy {
        LayoutStrategy::Baseline => baseline_layout(spec, GRID_HEIGHT, GRID_WIDTH),
        LayoutStrategy::Clustered => {
            clustered_layout(spec, &association(table)?, GRID_HEIGHT, GRID_WIDTH)
        }
        LayoutStrategy::Manual => {
            let path = plan.ok_or_else(|| Error::Config("the manual layout needs --plan".into()))?;
            manual_layout(spec, &PlacementPlan::from_path(path)?, GRID_HEIGHT, GRID_WIDTH)
        }
    }
}

pub fn optimizer_echo(cfg: &TrainConfig) -> String {
    format!(
        "AdamW lr={} weight_decay={} batch={} (stand-ins for unstated defaults); epochs={} timesteps={} channels={} seed={}",
        cfg.learning_rate, cfg.weight_decay, cfg.batch_size, cfg.epochs, cfg.timesteps,
        cfg.base_channels, cfg.seed
    )
}

/// Train, writing the checkpoint and loss log at every sampling boundary.
pub fn run_training(
    table: &Table,
    layout: &Layout,
    spec: &CodecSpec,
    cfg: &TrainConfig,
    out: &Path,
) -> Result<Checkpoint> {
    log::info!("{}", optimizer_echo(cfg));
    let ckpt_path = out.join(CHECKPOINT_FILE);
    let log_path = out.join(LOSS_LOG);
    let mut save = |c: &Checkpoint, losses: &[crate::diffusion::EpochLoss]| {
        c.save(&ckpt_path)?;
        write(&log_path, loss_log_csv(losses).as_bytes())
    };
    match train(table, layout, spec, cfg, &mut save) {
        Ok(o) => Ok(o.checkpoint),
        Err(TrainError::Diverged { epoch, batch, last_good, losses }) => {
            last_good.save(&ckpt_path)?;
            write(&log_path, loss_log_csv(&losses).as_bytes())?;
            Err(Error::Numeric(format!(
                "training diverged at epoch {} batch {batch}; last good checkpoint (epoch {}) kept at {}",
                epoch + 1,
                last_good.header.epochs_completed,
                ckpt_path.display()
            )))
        }
        Err(TrainError::Setup(e)) => Err(e),
    }
}

/// Sample `rows` grids and decode them; `clamp = false` skips both clamps.
pub fn run_sampling(ckpt: &Checkpoint, rows: usize, seed: u64, clamp: bool) -> Result<(Table, Vec<crate::codec::Grid>)> {
    let grids = sample(ckpt, rows, SampleOptions { seed, clamp })?;
    let table = decode_grids(&grids, &ckpt.header.layout, &ckpt.header.codec, DecodeOptions { clamp })?;
    Ok((table, grids))
}

pub fn write_audit(report: &AuditReport, out: &Path) -> Result<()> {
    write(&out.join(AUDIT_JSON), report.to_json().as_bytes())?;
    write(&out.join(AUDIT_MD), report.to_markdown().as_bytes())
}

struct Stages {
    records: Vec<StageRecord>,
}

impl Stages {
    fn run<T>(&mut self, name: &str, f: impl FnOnce() -> Result<T>) -> std::result::Result<T, (String, Error)> {
        let start = Instant::now();
        let r = f();
        self.records.push(StageRecord {
            stage: name.to_string(),
            seconds: start.elapsed().as_secs_f64(),
            ok: r.is_ok(),
        });
        r.map_err(|e| (name.to_string(), e))
    }
}

pub const PIPELINE_ARTIFACTS: [&str; 6] =
    [SYNTHETIC_CSV, CHECKPOINT_FILE, LOSS_LOG, LAYOUT_TSV, AUDIT_JSON, AUDIT_MD];

/// fit → layout → train → sample → decode → audit, writing six artifacts and
/// a manifest. A failing stage still leaves a manifest behind.
pub fn cmd_pipeline(cfg: &RunConfig) -> Result<RunManifest> {
    cfg.validate()?;
    let mut files: Vec<&str> = PIPELINE_ARTIFACTS.to_vec();
    files.push(MANIFEST);
    prepare_out(&cfg.out, &files, cfg.force)?;
    let mut inputs = Vec::new();
    for p in [Some(&cfg.schema), Some(&cfg.train_csv), cfg.test_csv.as_ref(), cfg.plan.as_ref()]
        .into_iter()
        .flatten()
    {
        inputs.push(Artifact {
            path: p.display().to_string(),
            sha256: hash_file(p)?,
        });
    }
    let mut stages = Stages { records: Vec::new() };
    let result = pipeline_stages(cfg, &mut stages);
    let mut manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        inputs,
        stages: stages.records,
        artifacts: Vec::new(),
        failed_stage: None,
        error: None,
        optimizer: optimizer_echo(&cfg.train),
    };
    for f in PIPELINE_ARTIFACTS {
        let p = cfg.out.join(f);
        if p.exists() {
            manifest.artifacts.push(Artifact {
                path: f.to_string(),
                sha256: hash_file(&p)?,
            });
        }
    }
    let outcome = match result {
        Ok(()) => Ok(()),
        Err((stage, e)) => {
            log::error!("stage `{stage}` failed: {e}");
            manifest.failed_stage = Some(stage);
            manifest.error = Some(e.to_string());
            Err(e)
        }
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    write(&cfg.out.join(MANIFEST), json.as_bytes())?;
    outcome.map(|_| manifest)
}

fn pipeline_stages(cfg: &RunConfig, st: &mut Stages) -> std::result::Result<(), (String, Error)> {
    let policy = cfg.policy();
    let (schema, table) = st.run("ingest", || load_inputs(&cfg.schema, &cfg.train_csv, &policy))?;
    let test = st.run("ingest-test", || {
        cfg.test_csv.as_ref().map(|p| load_table(p, &schema, &policy)).transpose()
    })?;
    let spec = st.run("fit", || fit_codec(&table))?;
    log::info!(
        "encoded width {} on a {}x{} grid ({} padding cells)",
        spec.encoded_width(),
        GRID_HEIGHT,
        GRID_WIDTH,
        GRID_HEIGHT * GRID_WIDTH - spec.encoded_width()
    );
    let layout = st.run("layout", || {
        let l = build_layout(cfg.strategy, &spec, &table, cfg.plan.as_deref())?;
        write(&cfg.out.join(LAYOUT_TSV), l.export(&spec).as_bytes())?;
        Ok(l)
    })?;
    let ckpt = st.run("train", || run_training(&table, &layout, &spec, &cfg.train, &cfg.out))?;
    let synth = st.run("sample", || {
        let (synth, _) = run_sampling(&ckpt, cfg.rows, cfg.train.seed, cfg.clamp)?;
        synth.write_csv_path(&cfg.out.join(SYNTHETIC_CSV))?;
        Ok(synth)
    })?;
    st.run("audit", || {
        let opts = AuditOptions {
            strategy: Some(cfg.strategy),
            seed: cfg.train.seed,
            disclosure: cfg.disclosure,
        };
        let report = run_audit(&table, &synth, test.as_ref(), &opts)?;
        write_audit(&report, &cfg.out)
    })?;
    Ok(())
}

pub fn cmd_fit(schema: &Path, train_csv: &Path, policy: &CleaningPolicy, out: &Path, force: bool) -> Result<CodecSpec> {
    prepare_out(out, &[CODEC_JSON], force)?;
    let (_, table) = load_inputs(schema, train_csv, policy)?;
    let spec = fit_codec(&table)?;
    let json = serde_json::to_string_pretty(&spec).expect("codec serializes") + "\n";
    write(&out.join(CODEC_JSON), json.as_bytes())?;
    Ok(spec)
}

pub fn cmd_layout(
    schema: &Path,
    train_csv: &Path,
    policy: &CleaningPolicy,
    strategy: LayoutStrategy,
    plan: Option<&Path>,
    out: &Path,
    force: bool,
) -> Result<Layout> {
    prepare_out(out, &[LAYOUT_TSV], force)?;
    let (_, table) = load_inputs(schema, train_csv, policy)?;
    let spec = fit_codec(&table)?;
    let layout = build_layout(strategy, &spec, &table, plan)?;
    write(&out.join(LAYOUT_TSV), layout.export(&spec).as_bytes())?;
    Ok(layout)
}

pub fn cmd_train(cfg: &RunConfig) -> Result<Checkpoint> {
    cfg.validate()?;
    prepare_out(&cfg.out, &[CHECKPOINT_FILE, LOSS_LOG, LAYOUT_TSV], cfg.force)?;
    let (_, table) = load_inputs(&cfg.schema, &cfg.train_csv, &cfg.policy())?;
    let spec = fit_codec(&table)?;
    let layout = build_layout(cfg.strategy, &spec, &table, cfg.plan.as_deref())?;
    write(&cfg.out.join(LAYOUT_TSV), layout.export(&spec).as_bytes())?;
    run_training(&table, &layout, &spec, &cfg.train, &cfg.out)
}

/// Read `out/model.ckpt`, write `out/synthetic.csv` and optionally a grid dump.
pub fn cmd_sample(out: &Path, rows: usize, seed: u64, clamp: bool, dump: bool, force: bool) -> Result<Table> {
    let mut files = vec![SYNTHETIC_CSV];
    if dump {
        files.push(GRID_DUMP);
    }
    prepare_out(out, &files, force)?;
    let ckpt = Checkpoint::load(&out.join(CHECKPOINT_FILE))?;
    let (table, grids) = run_sampling(&ckpt, rows, seed, clamp)?;
    table.write_csv_path(&out.join(SYNTHETIC_CSV))?;
    if dump {
        write(&out.join(GRID_DUMP), dump_grids(&grids).as_bytes())?;
    }
    Ok(table)
}

pub struct AuditInputs<'a> {
    pub schema: &'a Path,
    pub real_csv: &'a Path,
    pub synth_csv: &'a Path,
    pub test_csv: Option<&'a Path>,
    pub policy: CleaningPolicy,
    pub seed: u64,
    pub strategy: Option<LayoutStrategy>,
    pub disclosure: bool,
}

/// Standalone audit of a synthetic CSV against real data; no training.
pub fn cmd_audit(inputs: &AuditInputs, out: &Path, force: bool) -> Result<AuditReport> {
    prepare_out(out, &[AUDIT_JSON, AUDIT_MD], force)?;
    let (schema, real) = load_inputs(inputs.schema, inputs.real_csv, &inputs.policy)?;
    let synth_policy = CleaningPolicy {
        has_header: true,
        ..inputs.policy.clone()
    };
    let synth = load_table(inputs.synth_csv, real.schema(), &CleaningPolicy {
        extend_vocabulary: false,
        ..synth_policy
    })?;
    let test = inputs
        .test_csv
        .map(|p| load_table(p, &schema, &inputs.policy))
        .transpose()?;
    let opts = AuditOptions {
        strategy: inputs.strategy,
        seed: inputs.seed,
        disclosure: inputs.disclosure,
    };
    let report = run_audit(&real, &synth, test.as_ref(), &opts)?;
    write_audit(&report, out)?;
    Ok(report)
}
