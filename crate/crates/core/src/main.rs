use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gridtab::diffusion::{fixture, grad_check, grad_check_with_fault, GradCheckOptions, NetConfig, TrainConfig};
use gridtab::pipeline::{self, AuditInputs, RunConfig};
use gridtab::{CleaningPolicy, Error, LayoutStrategy, Result};

#[derive(Parser)]
#[command(name = "gridtab", version, about = "Tabular rows as pseudo-images: train, sample and audit a grid diffusion model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the codec on the training table and write codec.json.
    Fit(DataArgs),
    /// Build a layout and write layout.tsv.
    Layout {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        layout: LayoutArgs,
    },
    /// Train the denoiser and write model.ckpt and loss_log.csv.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        layout: LayoutArgs,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Sample rows from <out>/model.ckpt into <out>/synthetic.csv.
    Sample {
        #[command(flatten)]
        sample: SampleArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
        /// Also write the raw grids to grids.txt.
        #[arg(long)]
        dump: bool,
    },
    /// Audit a synthetic CSV against the real table.
    Audit {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        synth_csv: PathBuf,
        #[arg(long)]
        test_csv: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Label the report with a strategy's reference values.
        #[arg(long)]
        layout: Option<LayoutStrategy>,
        #[arg(long)]
        no_disclosure: bool,
    },
    /// Run every stage end to end.
    Pipeline {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        test_csv: Option<PathBuf>,
        #[command(flatten)]
        layout: LayoutArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        sample: SampleArgs,
        #[arg(long)]
        no_disclosure: bool,
    },
    /// Compare backprop against finite differences on the fixture net.
    Gradcheck {
        #[arg(long, default_value_t = 256)]
        params: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    train_csv: PathBuf,
    /// Read columns positionally in schema order.
    #[arg(long)]
    no_header: bool,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

impl DataArgs {
    fn policy(&self) -> CleaningPolicy {
        CleaningPolicy {
            has_header: !self.no_header,
            ..CleaningPolicy::default()
        }
    }
}

#[derive(Args)]
struct LayoutArgs {
    #[arg(long, default_value = "baseline")]
    layout: LayoutStrategy,
    #[arg(long)]
    plan: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 1000)]
    timesteps: usize,
    /// Run seed; every random draw derives from it.
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = gridtab::diffusion::DEFAULT_BASE_CHANNELS)]
    channels: usize,
    #[arg(long, default_value_t = gridtab::diffusion::DEFAULT_BATCH_SIZE)]
    batch_size: usize,
    #[arg(long, default_value_t = gridtab::diffusion::DEFAULT_LEARNING_RATE)]
    learning_rate: f64,
    #[arg(long, default_value_t = 5)]
    sample_every: usize,
}

impl TrainArgs {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            timesteps: self.timesteps,
            base_channels: self.channels,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            sample_every: self.sample_every,
            ..TrainConfig::new(self.seed)
        }
    }
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long, default_value_t = 5000)]
    rows: usize,
    /// Keep out-of-range samples: no clamp after sampling or before decoding.
    #[arg(long)]
    no_clamp: bool,
    #[arg(long = "sample-seed")]
    sample_seed: Option<u64>,
}

fn run_config(data: &DataArgs, layout: &LayoutArgs, train: &TrainArgs) -> RunConfig {
    let mut cfg = RunConfig::new(data.schema.clone(), data.train_csv.clone(), data.out.clone(), train.seed);
    cfg.train = train.config();
    cfg.strategy = layout.layout;
    cfg.plan = layout.plan.clone();
    cfg.has_header = !data.no_header;
    cfg.force = data.force;
    cfg
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit(d) => {
            let spec = pipeline::cmd_fit(&d.schema, &d.train_csv, &d.policy(), &d.out, d.force)?;
            println!("encoded width {}", spec.encoded_width());
        }
        Command::Layout { data, layout } => {
            let l = pipeline::cmd_layout(
                &data.schema,
                &data.train_csv,
                &data.policy(),
                layout.layout,
                layout.plan.as_deref(),
                &data.out,
                data.force,
            )?;
            println!("{} layout: {}", l.strategy().name(), l.column_order().join(", "));
        }
        Command::Train { data, layout, train } => {
            let ckpt = pipeline::cmd_train(&run_config(&data, &layout, &train))?;
            println!("trained {} epochs", ckpt.header.epochs_completed);
        }
        Command::Sample { sample, out, force, dump } => {
            let t = pipeline::cmd_sample(&out, sample.rows, sample.sample_seed.unwrap_or(0), !sample.no_clamp, dump, force)?;
            println!("wrote {} rows", t.len());
        }
        Command::Audit { data, synth_csv, test_csv, seed, layout, no_disclosure } => {
            let inputs = AuditInputs {
                schema: &data.schema,
                real_csv: &data.train_csv,
                synth_csv: &synth_csv,
                test_csv: test_csv.as_deref(),
                policy: data.policy(),
                seed,
                strategy: layout,
                disclosure: !no_disclosure,
            };
            let r = pipeline::cmd_audit(&inputs, &data.out, data.force)?;
            println!("overall fidelity {:.4}", r.fidelity.overall);
        }
        Command::Pipeline { data, test_csv, layout, train, sample, no_disclosure } => {
            let mut cfg = run_config(&data, &layout, &train);
            cfg.test_csv = test_csv;
            cfg.rows = sample.rows;
            cfg.clamp = !sample.no_clamp;
            cfg.disclosure = !no_disclosure;
            let m = pipeline::cmd_pipeline(&cfg)?;
            for a in &m.artifacts {
                println!("{}  {}", a.sha256, a.path);
            }
        }
        Command::Gradcheck { params, seed, inject_fault } => {
            let (net, batch) = fixture(NetConfig::tiny(10, 11), seed)?;
            let opts = GradCheckOptions { params, seed, ..Default::default() };
            let report = if inject_fault {
                grad_check_with_fault(&net, &batch, &opts, &|g| g.iter_mut().for_each(|v| *v *= 1.5))?
            } else {
                grad_check(&net, &batch, &opts)?
            };
            println!(
                "max relative error {:e} over {} parameters (worst {})",
                report.max_relative_error, report.checked, report.worst_parameter
            );
            if !report.passed() {
                return Err(Error::Numeric("gradient check failed".into()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
