//! Pipeline driver: generate toy data, pre-train the base VAE, train the
//! latent energy model on top of it, sample either way, evaluate, and plot.
//! Every run writes a fully resolved `config.resolved` next to its outputs;
//! re-running any command from that echo reproduces the outputs bit for bit.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ltebm::config::RunConfig;
use ltebm::datasets::{self, DatasetKind};
use ltebm::dynamics::{langevin_latent, trajectory_csv, trajectory_from_csv, ReplayBuffer};
use ltebm::error::{Error, Result};
use ltebm::evaluation::{high_quality_fraction, histogram_divergence, modes_captured, HistogramSpec};
use ltebm::io::atomic_write;
use ltebm::models::checkpoint::{
    energy_from_checkpoint, energy_to_checkpoint, vae_from_checkpoint, vae_to_checkpoint, Checkpoint,
};
use ltebm::models::{BaseGenerator, EnergyNetwork};
use ltebm::plot::{plot_svg, PlotContent, PlotStyle};
use ltebm::rng::{streams, SeedRng};
use ltebm::training::{
    decode_prior_samples, sample_latent_ebm, train_latent_ebm, train_pixel_ebm, train_vae,
};
use ltebm::verify::{run_oracle_suite, VerifyOptions, ORACLE_SUITE_SIZE};

#[derive(Parser)]
#[command(name = "ltebm", version, about = "Latent-space energy-based tilting of a pre-trained generator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a toy dataset CSV (25-Gaussians grid or Swiss roll)
    GenData(GenDataArgs),
    /// Train the base VAE on a dataset CSV
    TrainVae(TrainVaeArgs),
    /// Train a latent energy model on top of a frozen VAE checkpoint
    TrainEbm(TrainEbmArgs),
    /// Train the observation-space baseline with a replay buffer
    TrainPixelEbm(TrainEbmArgs),
    /// Decode samples from the base prior, or from the latent energy model
    Sample(SampleArgs),
    /// Compute sample-quality metrics for a samples CSV
    Eval(EvalArgs),
    /// Render samples, mode centers, and trajectories as SVG
    Plot(PlotArgs),
    /// Run the oracle-agreement self-test suite
    VerifyOracles,
}

#[derive(Args)]
struct Common {
    /// key = value configuration file; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run seed (fallback: LTEBM_SEED environment variable)
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (config.resolved, checkpoints/, samples/, metrics.csv, figures/)
    #[arg(long)]
    outdir: PathBuf,
}

impl Common {
    fn resolve(&self, apply: impl FnOnce(&mut RunConfig) -> Result<()>) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Ok(env_seed) = std::env::var("LTEBM_SEED") {
            cfg.seed = env_seed
                .parse()
                .map_err(|_| Error::Config(format!("LTEBM_SEED: bad integer '{env_seed}'")))?;
        }
        if let Some(path) = &self.config {
            cfg.merge_file(path)?;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        apply(&mut cfg)?;
        Ok(cfg)
    }

    fn echo(&self, cfg: &RunConfig) -> Result<()> {
        cfg.save_resolved(self.outdir.join("config.resolved"))
    }
}

#[derive(Args)]
struct GenDataArgs {
    #[command(flatten)]
    common: Common,
    /// gaussians25 | swiss_roll
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    /// Per-mode sigma for gaussians25
    #[arg(long)]
    sigma: Option<f64>,
    /// Additive noise for swiss_roll
    #[arg(long)]
    noise: Option<f64>,
}

#[derive(Args)]
struct TrainVaeArgs {
    #[command(flatten)]
    common: Common,
    /// Training data CSV
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Hidden layer widths, comma separated
    #[arg(long)]
    hidden: Option<String>,
    #[arg(long)]
    latent_dim: Option<usize>,
    #[arg(long)]
    obs_noise_sigma: Option<f64>,
}

#[derive(Args)]
struct TrainEbmArgs {
    #[command(flatten)]
    common: Common,
    /// Base VAE checkpoint (frozen; unused by train-pixel-ebm)
    #[arg(long)]
    base: Option<PathBuf>,
    /// Training data CSV
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Energy regularization coefficient
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    eval_every: Option<u64>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    eval_samples: Option<usize>,
    /// Langevin steps per training chain
    #[arg(long)]
    chain_steps: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    common: Common,
    /// Base VAE checkpoint
    #[arg(long)]
    base: Option<PathBuf>,
    /// Energy checkpoint; omit to decode prior draws (the untilted baseline)
    #[arg(long)]
    ebm: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    /// Langevin steps for the sampling chain
    #[arg(long)]
    steps: Option<usize>,
    /// Also record one chain's latent trajectory to samples/trajectory.csv
    #[arg(long)]
    trajectory: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    /// Samples CSV to score
    #[arg(long)]
    samples: PathBuf,
    /// Reference CSV for the histogram divergence
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Metric geometry: gaussians25 | swiss_roll
    #[arg(long)]
    kind: Option<String>,
}

#[derive(Args)]
struct PlotArgs {
    #[command(flatten)]
    common: Common,
    /// Samples CSV to draw
    #[arg(long)]
    samples: Option<PathBuf>,
    /// Overlay mode centers: gaussians25 | swiss_roll
    #[arg(long)]
    centers: Option<String>,
    /// Trajectory CSV to overlay as a polyline
    #[arg(long)]
    trajectory: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code: u8 = if e.use_stderr() { 1 } else { 0 };
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

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData(args) => cmd_gen_data(args),
        Command::TrainVae(args) => cmd_train_vae(args),
        Command::TrainEbm(args) => cmd_train_ebm(args, false),
        Command::TrainPixelEbm(args) => cmd_train_ebm(args, true),
        Command::Sample(args) => cmd_sample(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Plot(args) => cmd_plot(args),
        Command::VerifyOracles => cmd_verify_oracles(),
    }
}

fn load_base(path: &Path) -> Result<BaseGenerator> {
    let vae = vae_from_checkpoint(&Checkpoint::load(path)?)?;
    Ok(BaseGenerator::from_vae(&vae))
}

fn cmd_gen_data(args: GenDataArgs) -> Result<()> {
    let cfg = args.common.resolve(|cfg| {
        if let Some(kind) = &args.kind {
            cfg.data_kind = DatasetKind::parse(kind)?;
        }
        if let Some(n) = args.n {
            cfg.data_n = n;
        }
        if let Some(s) = args.sigma {
            cfg.data_sigma = s;
        }
        if let Some(s) = args.noise {
            cfg.data_noise = s;
        }
        cfg.data_path = Some(PathBuf::from("samples/data.csv"));
        Ok(())
    })?;
    args.common.echo(&cfg)?;
    let spread = match cfg.data_kind {
        DatasetKind::Gaussians25 => cfg.data_sigma,
        DatasetKind::SwissRoll => cfg.data_noise,
    };
    let ds = datasets::generate(cfg.data_kind, cfg.data_n, spread, cfg.seed)?;
    let out = args.common.outdir.join("samples/data.csv");
    ds.save(&out)?;
    println!("wrote {} points to {}", ds.len(), out.display());
    Ok(())
}

fn cmd_train_vae(args: TrainVaeArgs) -> Result<()> {
    let cfg = args.common.resolve(|cfg| {
        if let Some(p) = &args.data {
            cfg.data_path = Some(p.clone());
        }
        if let Some(v) = args.epochs {
            cfg.vae_epochs = v;
        }
        if let Some(v) = args.batch_size {
            cfg.vae_batch_size = v;
        }
        if let Some(v) = args.lr {
            cfg.vae_lr = v;
        }
        if let Some(v) = &args.hidden {
            cfg.apply_kv("arch.hidden", v)?;
        }
        if let Some(v) = args.latent_dim {
            cfg.arch_latent_dim = v;
        }
        if let Some(v) = args.obs_noise_sigma {
            cfg.vae_obs_noise_sigma = v;
        }
        Ok(())
    })?;
    let data_path = cfg
        .data_path
        .clone()
        .ok_or_else(|| Error::InvalidParameter("no training data: pass --data".into()))?;
    args.common.echo(&cfg)?;
    let points = datasets::read_points_csv(&data_path)?;
    let (model, log) = train_vae(&points, &cfg.vae_train_config())?;
    let meta = vec![
        ("steps".to_string(), log.records.len().to_string()),
        ("seed".to_string(), cfg.seed.to_string()),
        ("config".to_string(), cfg.to_resolved_string()),
    ];
    let ckpt_path = args.common.outdir.join("checkpoints/vae.ckpt");
    vae_to_checkpoint(&model, &meta).save(&ckpt_path)?;
    log.save_csv(args.common.outdir.join("metrics.csv"))?;
    let last = log.last_record().map(|r| r.e_pos).unwrap_or(f64::NAN);
    println!(
        "trained VAE for {} steps (final loss {last:.4}); checkpoint at {}",
        log.records.len(),
        ckpt_path.display()
    );
    Ok(())
}

fn cmd_train_ebm(args: TrainEbmArgs, pixel_space: bool) -> Result<()> {
    let cfg = args.common.resolve(|cfg| {
        if let Some(p) = &args.base {
            cfg.ebm_base = Some(p.clone());
        }
        if let Some(p) = &args.data {
            cfg.data_path = Some(p.clone());
        }
        if let Some(v) = args.steps {
            cfg.ebm_steps = v;
        }
        if let Some(v) = args.batch_size {
            cfg.ebm_batch_size = v;
        }
        if let Some(v) = args.lr {
            cfg.ebm_lr = v;
        }
        if let Some(v) = args.alpha {
            cfg.ebm_alpha = v;
        }
        if let Some(v) = args.eval_every {
            cfg.ebm_eval_every = v;
        }
        if let Some(v) = args.patience {
            cfg.ebm_patience = v;
        }
        if let Some(v) = args.eval_samples {
            cfg.ebm_eval_samples = v;
        }
        if let Some(v) = args.chain_steps {
            cfg.langevin_train_steps = v;
        }
        if let Some(v) = args.epsilon {
            cfg.langevin_epsilon = v;
        }
        Ok(())
    })?;
    let data_path = cfg
        .data_path
        .clone()
        .ok_or_else(|| Error::InvalidParameter("no training data: pass --data".into()))?;
    args.common.echo(&cfg)?;
    let points = datasets::read_points_csv(&data_path)?;
    let spec = cfg.mode_spec()?;
    let ebm_cfg = cfg.ebm_train_config();
    let mut erng = SeedRng::stream(cfg.seed, streams::ENERGY_INIT);
    let energy = EnergyNetwork::new(2, &cfg.arch_hidden, &mut erng)?;

    let (energy, log) = if pixel_space {
        let mut buffer = ReplayBuffer::new(
            ltebm::dynamics::replay::DEFAULT_BUFFER_CAPACITY,
            ltebm::dynamics::replay::DEFAULT_REINIT_PROB,
            2,
        )?;
        train_pixel_ebm(energy, &points, &ebm_cfg, &mut buffer, &spec)?
    } else {
        let base = load_base(
            cfg.ebm_base
                .as_ref()
                .ok_or_else(|| Error::InvalidParameter("no base checkpoint: pass --base".into()))?,
        )?;
        train_latent_ebm(energy, &base, &points, &ebm_cfg, &spec)?
    };

    let meta = vec![
        ("steps".to_string(), log.records.len().to_string()),
        ("seed".to_string(), cfg.seed.to_string()),
        ("best_step".to_string(), log.best_step.map(|s| s.to_string()).unwrap_or_default()),
        ("config".to_string(), cfg.to_resolved_string()),
    ];
    let ckpt_path = args.common.outdir.join("checkpoints/ebm.ckpt");
    energy_to_checkpoint(&energy, &meta).save(&ckpt_path)?;
    log.save_csv(args.common.outdir.join("metrics.csv"))?;
    let best = log.evals().into_iter().map(|(_, m)| m).fold(f64::NAN, f64::max);
    println!(
        "trained {} energy model for {} steps (best metric {best:.4} at step {:?}); checkpoint at {}",
        if pixel_space { "observation-space" } else { "latent" },
        log.records.len(),
        log.best_step,
        ckpt_path.display()
    );
    Ok(())
}

fn cmd_sample(args: SampleArgs) -> Result<()> {
    let cfg = args.common.resolve(|cfg| {
        if let Some(p) = &args.base {
            cfg.ebm_base = Some(p.clone());
        }
        if let Some(p) = &args.ebm {
            cfg.ebm_checkpoint = Some(p.clone());
        }
        if let Some(v) = args.n {
            cfg.sample_n = v;
        }
        if let Some(v) = args.steps {
            cfg.langevin_sample_steps = v;
        }
        Ok(())
    })?;
    args.common.echo(&cfg)?;
    let base = load_base(
        cfg.ebm_base
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("no base checkpoint: pass --base".into()))?,
    )?;
    let mut rng = SeedRng::stream(cfg.seed, streams::SAMPLER);
    let samples = match &cfg.ebm_checkpoint {
        Some(path) => {
            let energy = energy_from_checkpoint(&Checkpoint::load(path)?)?;
            let chain_cfg = cfg.sample_langevin();
            let xs = sample_latent_ebm(&base, &energy, cfg.sample_n, &chain_cfg, &mut rng)?;
            if args.trajectory {
                let mut traj_cfg = chain_cfg;
                traj_cfg.record_trajectory = true;
                let z0 = base.sample_prior(1, &mut rng)?;
                let chain = langevin_latent(&base, &energy, &z0, &traj_cfg, &mut rng)?;
                let csv = trajectory_csv(chain.trajectory.as_deref().unwrap_or_default(), 0)?;
                atomic_write(args.common.outdir.join("samples/trajectory.csv"), csv.as_bytes())?;
            }
            xs
        }
        None => decode_prior_samples(&base, cfg.sample_n, &mut rng)?,
    };
    let out = args.common.outdir.join("samples/samples.csv");
    datasets::write_points_csv(&samples.to_points()?, &out)?;
    println!("wrote {} samples to {}", cfg.sample_n, out.display());
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let cfg = args.common.resolve(|cfg| {
        if let Some(kind) = &args.kind {
            cfg.data_kind = DatasetKind::parse(kind)?;
        }
        Ok(())
    })?;
    args.common.echo(&cfg)?;
    let samples = datasets::read_points_csv(&args.samples)?;
    let spec = cfg.mode_spec()?;
    let hqf = high_quality_fraction(&samples, &spec)?;
    let modes = modes_captured(&samples, &spec)?;

    let mut rows = vec![
        ("n_samples".to_string(), samples.len().to_string()),
        ("high_quality_fraction".to_string(), format!("{hqf}")),
        ("modes_captured".to_string(), modes.to_string()),
    ];
    println!("== sample quality: {} ==", args.samples.display());
    println!("n_samples             {}", samples.len());
    println!("high_quality_fraction {hqf:.4}");
    println!("modes_captured        {modes} / {}", spec.centers.len());
    if let Some(ref_path) = &args.reference {
        let reference = datasets::read_points_csv(ref_path)?;
        let div = histogram_divergence(&samples, &reference, &HistogramSpec::default())?;
        println!("histogram_divergence  {div:.4}  (vs {})", ref_path.display());
        rows.push(("histogram_divergence".to_string(), format!("{div}")));
    }
    let mut csv = String::from("metric,value\n");
    for (k, v) in &rows {
        csv.push_str(&format!("{k},{v}\n"));
    }
    atomic_write(args.common.outdir.join("metrics.csv"), csv.as_bytes())?;
    Ok(())
}

fn cmd_plot(args: PlotArgs) -> Result<()> {
    let cfg = args.common.resolve(|_| Ok(()))?;
    args.common.echo(&cfg)?;
    let samples = match &args.samples {
        Some(p) => datasets::read_points_csv(p)?,
        None => Vec::new(),
    };
    let centers = match args.centers.as_deref() {
        Some(kind) => Some(match DatasetKind::parse(kind)? {
            DatasetKind::Gaussians25 => datasets::gaussian_mode_centers(),
            DatasetKind::SwissRoll => {
                ltebm::evaluation::ModeSpec::swiss_roll(cfg.metric_sigma)?.centers
            }
        }),
        None => None,
    };
    let trajectories = match &args.trajectory {
        Some(p) => Some(vec![trajectory_from_csv(&ltebm::io::read_to_string(p)?)?]),
        None => None,
    };
    let out = args.common.outdir.join("figures/plot.svg");
    plot_svg(
        &PlotContent {
            samples: &samples,
            centers: centers.as_deref(),
            trajectories: trajectories.as_deref(),
        },
        &PlotStyle::default(),
        &out,
    )?;
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_verify_oracles() -> Result<()> {
    let results = run_oracle_suite(&VerifyOptions::default());
    let mut failed = Vec::new();
    for r in &results {
        println!(
            "{:<6} {:<46} measured {:+.6e}  expected {:+.6e}  tolerance {:.1e}",
            if r.pass { "PASS" } else { "FAIL" },
            r.name,
            r.measured,
            r.expected,
            r.tolerance
        );
        if !r.pass {
            failed.push(r.name);
        }
    }
    println!("{}/{} checks passed", results.len() - failed.len(), ORACLE_SUITE_SIZE);
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::NonFiniteEval(format!("failing oracle checks: {}", failed.join(", "))))
    }
}
