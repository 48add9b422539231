use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mimo_fp::harness::{
    collect_fingerprints, load_fingerprints, run_experiment, save_fingerprints, seeds, sweep_csv, sweep_knn,
    ChannelSetup, ExperimentConfig, LayoutVariant,
};
use mimo_fp::{build_scenario, fit, knn_locate, Error, GprModel, RssVector};

#[derive(Parser)]
#[command(name = "mimo-fp", version, about = "RSS fingerprint positioning for distributed massive MIMO")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML experiment configuration.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration: desk or full.
    #[arg(long)]
    preset: Option<String>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn load(&self) -> mimo_fp::Result<ExperimentConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(name)) => ExperimentConfig::preset(name)?,
            (None, None) => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.master_seed = seed;
        }
        Ok(cfg)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Layout {
    Spread,
    Compact,
}

#[derive(Clone, Copy, ValueEnum)]
enum Estimator {
    Gpr,
    Knn,
}

#[derive(Subcommand)]
enum Command {
    /// Build a scenario and draw one set of fingerprints.
    Generate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_enum, default_value = "spread")]
        layout: Layout,
        #[arg(long, default_value_t = 36)]
        antennas: usize,
        #[arg(long, default_value_t = 400)]
        fingerprints: usize,
        /// Output directory for scenario.json, fingerprints.csv and config.toml.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a GPR model to a fingerprint CSV.
    Fit {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        fingerprints: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Search on the full set instead of the configured subset.
        #[arg(long)]
        full_search: bool,
    },
    /// Locate one RSS vector and print the estimate as JSON.
    Locate {
        #[arg(long, value_enum, default_value = "gpr")]
        estimator: Estimator,
        /// Model file (gpr).
        #[arg(long, required_if_eq("estimator", "gpr"))]
        model: Option<PathBuf>,
        /// Fingerprint CSV (knn).
        #[arg(long, required_if_eq("estimator", "knn"))]
        fingerprints: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        kappa: usize,
        /// Comma-separated RSS values in dB.
        #[arg(long, allow_hyphen_values = true, required_unless_present = "rss_file")]
        rss: Option<String>,
        /// File holding the comma-separated RSS values.
        #[arg(long, conflicts_with = "rss")]
        rss_file: Option<PathBuf>,
    },
    /// Run the Monte-Carlo grid and write a results CSV plus manifest.
    Experiment {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (0 = one per core).
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Override the number of Monte-Carlo runs.
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Validation sweep of kNN over kappa = 1..=kappa-max.
    SweepKnn {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        kappa_max: usize,
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[arg(long)]
        runs: Option<usize>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 3,
        Error::Parse { .. } => 4,
        Error::Io { .. } => 5,
        Error::InvalidArgument(_) => 6,
        Error::DimensionMismatch { .. } => 7,
        Error::DegenerateGeometry(_) => 8,
        Error::IllConditionedKernel { .. } => 9,
        Error::Numerical(_) => 10,
        Error::ExperimentAborted(_) => 11,
    }
}

fn write(path: &Path, text: &str) -> mimo_fp::Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
}

fn parse_rss(text: &str, origin: &Path) -> mimo_fp::Result<RssVector> {
    let values = text
        .split(',')
        .map(|s| {
            s.trim().parse::<f64>().map_err(|_| Error::Parse {
                path: origin.to_path_buf(),
                message: format!("{:?} is not a number", s.trim()),
            })
        })
        .collect::<mimo_fp::Result<Vec<f64>>>()?;
    RssVector::new(values)
}

fn run(cli: Cli) -> mimo_fp::Result<()> {
    match cli.command {
        Command::Generate { cfg, layout, antennas, fingerprints, out } => {
            let mut cfg = cfg.load()?;
            let layout = match layout {
                Layout::Spread => LayoutVariant::Spread,
                Layout::Compact => LayoutVariant::Compact,
            };
            cfg.antenna_counts = vec![antennas];
            cfg.fingerprint_counts = vec![fingerprints];
            cfg.deployment.layouts = vec![layout];
            cfg.validate()?;
            let scenario = build_scenario(&cfg.deployment.spec(layout, antennas, fingerprints), cfg.master_seed)?;
            std::fs::create_dir_all(&out).map_err(|e| Error::Io { path: out.clone(), source: e })?;
            let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(cfg.master_seed, &[seeds::GENERATE]));
            let collected = collect_fingerprints(&scenario, &ChannelSetup::from_config(&cfg), &mut rng)?;
            scenario.save(&out.join("scenario.json"))?;
            save_fingerprints(&collected.train, &out.join("fingerprints.csv"))?;
            write(&out.join("config.toml"), &cfg.to_toml())?;
            log::info!(
                "event=generate out={} fingerprints={} skipped={}",
                out.display(),
                collected.train.len(),
                collected.skipped_sites
            );
        }
        Command::Fit { cfg, fingerprints, out, full_search } => {
            let cfg = cfg.load()?;
            let train = load_fingerprints(&fingerprints)?;
            let mut fit_cfg = cfg.fit.clone();
            fit_cfg.seed = seeds::derive(cfg.master_seed, &[seeds::PILOT_FIT]);
            if full_search {
                fit_cfg.search_points = None;
            }
            let model = fit(&train, &fit_cfg)?;
            model.save(&out)?;
            log::info!("event=fit out={} evals={}", out.display(), model.diagnostics.objective_evals);
        }
        Command::Locate { estimator, model, fingerprints, kappa, rss, rss_file } => {
            let rss = match (rss, rss_file) {
                (Some(text), _) => parse_rss(&text, Path::new("--rss"))?,
                (None, Some(path)) => {
                    let text =
                        std::fs::read_to_string(&path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
                    parse_rss(text.trim(), &path)?
                }
                (None, None) => unreachable!("clap requires one of --rss / --rss-file"),
            };
            let line = match estimator {
                Estimator::Gpr => {
                    let model = GprModel::load(model.as_deref().expect("required by clap"))?;
                    let p = model.predict(&rss)?;
                    serde_json::json!({
                        "x1": p.mean.x1,
                        "x2": p.mean.x2,
                        "var_x1": p.var_x1,
                        "var_x2": p.var_x2,
                        "post_std": p.radial_std(),
                    })
                }
                Estimator::Knn => {
                    let train = load_fingerprints(fingerprints.as_deref().expect("required by clap"))?;
                    let p = knn_locate(&train, &rss, &mimo_fp::KnnConfig::default().with_kappa(kappa))?;
                    serde_json::json!({ "x1": p.x1, "x2": p.x2 })
                }
            };
            println!("{line}");
        }
        Command::Experiment { cfg, out, workers, runs } => {
            let mut cfg = cfg.load()?;
            if let Some(r) = runs {
                cfg.num_mc_runs = r;
            }
            let output = run_experiment(&cfg, workers)?;
            let manifest = output.write(&cfg, &out)?;
            log::info!("event=experiment_done csv={} manifest={}", out.display(), manifest.display());
        }
        Command::SweepKnn { cfg, out, kappa_max, workers, runs } => {
            let mut cfg = cfg.load()?;
            if let Some(r) = runs {
                cfg.num_mc_runs = r;
            }
            // the sweep chooses kappa itself
            cfg.knn.kappa = 1;
            let kappas: Vec<usize> = (1..=kappa_max).collect();
            let rows = sweep_knn(&cfg, &kappas, workers)?;
            write(&out, &sweep_csv(&rows))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: kind={} msg={msg:?}", e.class());
            ExitCode::from(exit_code(&e))
        }
    }
}
