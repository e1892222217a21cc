use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;

use prodenv::counterfactual::Question;
use prodenv::estimation::FitOptions;
use prodenv::pipeline::{self, Artifact, FitOutput, PbarSpec, PipelineConfig, ReportInputs};
use prodenv::profit_id::IdentifyConfig;
use prodenv::proxy::ProxyModel;
use prodenv::technology::{Dataset, TechnologySpec};
use prodenv::{Error, Result};

#[derive(Parser)]
#[command(name = "prodenv", version, about = "Production sets from profit data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Include the hidden type column.
        #[arg(long)]
        debug: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recover type-specific profits from a dataset.
    Identify {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Noise width, overriding the config.
        #[arg(long)]
        noise_width: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recover price functions of unobserved goods.
    Proxies {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        profits: Option<PathBuf>,
        /// Dataset for aggregate recovery.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bound counterfactual profits or quantities.
    Bounds {
        #[arg(long)]
        profits: PathBuf,
        /// Config holding the question; `--price` asks for profit instead.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated counterfactual price.
        #[arg(long, value_delimiter = ',')]
        price: Option<Vec<f64>>,
        #[arg(long)]
        proxies: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        restricted: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit Diewert profit functions.
    Estimate {
        #[arg(long)]
        profits: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        proxies: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        restricted: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the fit with the true technology.
    Duality {
        #[arg(long)]
        fit: PathBuf,
        /// Technology spec, or a pipeline config with a simulate section.
        #[arg(long)]
        truth: PathBuf,
        /// `arc:lo:hi:n` or `ratio_box:lo:hi:n`.
        #[arg(long)]
        pbar: String,
        #[arg(long, default_value_t = 2000)]
        oracle_points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a text report from the artifacts in a directory.
    Report {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every stage listed in a pipeline config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => pipeline::write_atomic(p, bytes),
        None => Ok(std::io::stdout().write_all(bytes)?),
    }
}

fn is_pipeline(path: &Path) -> Result<bool> {
    let text = fs::read_to_string(path)?;
    Ok(toml::from_str::<toml::Table>(&text).is_ok_and(|t| t.contains_key("stages")))
}

/// A section from a pipeline config, or the whole file as that section.
fn section<T: DeserializeOwned>(path: &Path, name: &str, from: impl Fn(PipelineConfig) -> Option<T>) -> Result<T> {
    if is_pipeline(path)? {
        from(PipelineConfig::load(path)?).ok_or_else(|| Error::Config(format!("config has no [{name}] section")))
    } else {
        pipeline::load_section(path, name)
    }
}

fn read_proxies(path: Option<&PathBuf>) -> Result<Option<ProxyModel>> {
    path.map(|p| ProxyModel::from_json(&fs::read_to_string(p)?)).transpose()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            config,
            seed,
            debug,
            out,
        } => {
            let mut cfg = section(&config, "simulate", |c| c.simulate)?;
            if let Some(s) = seed {
                cfg.market.seed = s;
            }
            let data = pipeline::simulate(&cfg)?;
            let mut buf = Vec::new();
            data.write_csv(&mut buf, debug || cfg.debug_columns)?;
            emit(out.as_deref(), &buf)
        }
        Command::Identify {
            data,
            config,
            noise_width,
            out,
        } => {
            let mut cfg = match &config {
                Some(p) => section(p, "identify", |c| c.identify)?.identify,
                None => IdentifyConfig::default(),
            };
            if let Some(k) = noise_width {
                cfg.noise_width = k;
            }
            let dataset = Dataset::read_csv(fs::File::open(&data)?)?;
            let table = pipeline::identify(&dataset, &cfg)?;
            emit(out.as_deref(), table.to_json()?.as_bytes())
        }
        Command::Proxies {
            config,
            profits,
            data,
            out,
        } => {
            let mut cfg = section(&config, "proxies", |c| c.proxies)?;
            if profits.is_some() {
                cfg.profits = profits;
            }
            let table = cfg.profits.as_deref().map(pipeline::read_profit_table).transpose()?;
            let dataset = data
                .map(|p| Ok::<_, Error>(Dataset::read_csv(fs::File::open(p)?)?))
                .transpose()?;
            let model = pipeline::proxies(table.as_ref(), dataset.as_ref(), &cfg)?;
            emit(out.as_deref(), model.to_json()?.as_bytes())
        }
        Command::Bounds {
            profits,
            config,
            price,
            proxies,
            restricted,
            out,
        } => {
            let (question, restricted, nonpositive) = match (price, &config) {
                (Some(price), _) => (Question::Profit { price }, restricted, Vec::new()),
                (None, Some(p)) => {
                    let c = section(p, "bounds", |c| c.bounds)?;
                    let r = if restricted.is_empty() { c.restricted } else { restricted };
                    (c.question, r, c.nonpositive)
                }
                (None, None) => return Err(Error::Argument("give --price or --config".into())),
            };
            let table = pipeline::read_profit_table(&profits)?;
            let model = read_proxies(proxies.as_ref())?;
            let data = pipeline::profit_data(&table, &restricted, &nonpositive, model.as_ref())?;
            let reports = pipeline::bounds(&data, &question)?;
            emit(out.as_deref(), Artifact::new(reports).to_json()?.as_bytes())
        }
        Command::Estimate {
            profits,
            config,
            proxies,
            restricted,
            out,
        } => {
            let (opts, restricted) = match &config {
                Some(p) => {
                    let c = section(p, "estimate", |c| c.estimate)?;
                    (c.fit, if restricted.is_empty() { c.restricted } else { restricted })
                }
                None => (FitOptions::default(), restricted),
            };
            let table = pipeline::read_profit_table(&profits)?;
            let model = read_proxies(proxies.as_ref())?;
            let data = pipeline::profit_data(&table, &restricted, &[], model.as_ref())?;
            let fit = FitOutput {
                fit: pipeline::estimate(&data, &opts)?,
                restricted,
            };
            emit(out.as_deref(), Artifact::new(fit).to_json()?.as_bytes())
        }
        Command::Duality {
            fit,
            truth,
            pbar,
            oracle_points,
            out,
        } => {
            let truth: TechnologySpec = if is_pipeline(&truth)? {
                let c = PipelineConfig::load(&truth)?;
                c.duality
                    .and_then(|d| d.truth)
                    .or(c.simulate.map(|s| s.technology))
                    .ok_or_else(|| Error::Config("config has no true technology".into()))?
            } else {
                pipeline::load_section(&truth, "technology")?
            };
            let fit = pipeline::read_fit(&fit)?;
            let reports = pipeline::duality(&truth, &fit, &PbarSpec::parse_inline(&pbar)?, oracle_points)?;
            emit(out.as_deref(), Artifact::new(reports).to_json()?.as_bytes())
        }
        Command::Report { dir, out } => {
            let text = pipeline::render_report(&ReportInputs::load(&dir)?);
            emit(out.as_deref(), text.as_bytes())
        }
        Command::Run {
            config,
            seed,
            output_dir,
        } => {
            let mut cfg = PipelineConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
                if let Some(sim) = cfg.simulate.as_mut() {
                    sim.market.seed = s;
                }
            }
            if let Some(dir) = output_dir {
                cfg.output_dir = dir;
            }
            let manifest = pipeline::run_pipeline(&cfg)?;
            for s in &manifest.stages {
                eprintln!("{:<9} {:>7} ms  {}", s.stage.name(), s.wall_ms, s.artifact);
            }
            eprintln!("wrote {}", cfg.output_dir.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("PRODENV_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // Ignored if a pool already exists.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
