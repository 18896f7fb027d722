use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dplp_core::accountant::Method;
use dplp_core::harness::{self, GridSpec, RunConfig};
use dplp_core::synth::SyntheticSpec;
use dplp_core::Error;

#[derive(Parser)]
#[command(name = "dplp", version, about = "Differentially private linear probes on fixed features")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert an (ε, δ) budget into the noise multiplier of a method.
    Calibrate {
        #[arg(long, value_parser = parse_epsilon)]
        epsilon: f64,
        #[arg(long, default_value_t = harness::DEFAULT_DELTA)]
        delta: f64,
        #[arg(long)]
        method: Method,
        /// Iterations (= epochs in full batch).
        #[arg(long, default_value_t = 1)]
        iters: usize,
        #[arg(long)]
        json: bool,
    },
    /// Train one model and report accuracy and privacy spent.
    Train {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        json: bool,
    },
    /// Accuracy over a cross-product of methods, budgets and seeds.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',', value_parser = parse_epsilon, required = true)]
        epsilons: Vec<f64>,
        /// Noise seeds; defaults to the config seed.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        /// Methods to compare; defaults to the config method.
        #[arg(long, value_delimiter = ',')]
        methods: Vec<Method>,
        #[arg(long)]
        json: bool,
    },
    /// Grid search over η × λ × α on a held-out part of the training data.
    Grid {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',')]
        etas: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        lambdas: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        alphas: Vec<f64>,
        /// Log-uniform λ grid over [1e-8, 1e8] with this many points,
        /// used when --lambdas is absent.
        #[arg(long)]
        lambda_points: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        #[arg(long, default_value_t = 0.2)]
        validation: f64,
        #[arg(long)]
        json: bool,
    },
    /// Generate a Gaussian-mixture dataset in the binary formats.
    Synth {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 5.0)]
        margin: f64,
        #[arg(long, default_value_t = 1.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.8)]
        train_fraction: f64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

/// Flags layered over the JSON run config.
#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Budget ε; `inf` turns all sanitization off.
    #[arg(long, value_parser = parse_epsilon, conflicts_with = "sigma")]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Explicit noise multiplier instead of a budget.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_epsilon(s: &str) -> Result<f64, String> {
    match s.to_ascii_lowercase().as_str() {
        "inf" | "infinity" => Ok(f64::INFINITY),
        other => other.parse::<f64>().map_err(|e| e.to_string()),
    }
}

impl RunArgs {
    fn load(&self) -> Result<RunConfig, Error> {
        let mut c = RunConfig::from_file(&self.config)?;
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(e) = self.epsilon {
            c.epsilon = Some(e);
            c.sigma = None;
        }
        if let Some(s) = self.sigma {
            c.sigma = Some(s);
            c.epsilon = None;
        }
        if let Some(d) = self.delta {
            c.delta = d;
        }
        if let Some(m) = self.method {
            c = c.for_method(m);
        }
        if let Some(t) = self.iters {
            c.iters = t;
        }
        if self.out.is_some() {
            c.out.clone_from(&self.out);
        }
        Ok(c)
    }
}

fn emit<T: serde::Serialize>(value: &T, json: bool, text: impl FnOnce() -> String) -> Result<(), Error> {
    if json {
        println!("{}", serde_json::to_string_pretty(value)?);
    } else {
        print!("{}", text());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Calibrate {
            epsilon,
            delta,
            method,
            iters,
            json,
        } => {
            let c = harness::cmd_calibrate(epsilon, delta, method, iters)?;
            emit(&c, json, || c.render())
        }
        Command::Train { run, json } => {
            let c = run.load()?;
            let out = harness::cmd_train(&c)?;
            emit(&out, json, || out.render())
        }
        Command::Sweep {
            run,
            epsilons,
            seeds,
            methods,
            json,
        } => {
            let c = run.load()?;
            let seeds = if seeds.is_empty() { vec![c.seed] } else { seeds };
            let methods = if methods.is_empty() { vec![c.method] } else { methods };
            let r = harness::cmd_sweep(&c, &epsilons, &seeds, &methods)?;
            if let Some(out) = &c.out {
                std::fs::write(out, r.to_json()?).map_err(|source| dplp_core::DataError::Io {
                    path: out.clone(),
                    source,
                })?;
            }
            if json {
                print!("{}", r.to_json()?);
                Ok(())
            } else {
                print!("{}", r.render());
                Ok(())
            }
        }
        Command::Grid {
            run,
            etas,
            lambdas,
            alphas,
            lambda_points,
            seeds,
            validation,
            json,
        } => {
            let c = run.load()?;
            let or_base = |v: Vec<f64>, base: f64| if v.is_empty() { vec![base] } else { v };
            let lambdas = match (lambdas.is_empty(), lambda_points) {
                (true, Some(p)) => harness::log_grid(1e-8, 1e8, p)?,
                _ => or_base(lambdas, c.lambda),
            };
            let grid = GridSpec {
                etas: or_base(etas, c.eta),
                lambdas,
                alphas: or_base(alphas, c.alpha),
            };
            let seeds = if seeds.is_empty() { vec![c.seed] } else { seeds };
            let r = harness::cmd_grid(&c, &grid, &seeds, validation)?;
            if let Some(out) = &c.out {
                harness::write_json(out, &r)?;
            }
            emit(&r, json, || r.render())
        }
        Command::Synth {
            n,
            d,
            m,
            margin,
            noise,
            seed,
            train_fraction,
            out,
            json,
        } => {
            let mut spec = SyntheticSpec::new(n, d, m, margin, noise, seed);
            spec.train_fraction = train_fraction;
            let r = harness::cmd_synth(&spec, &out)?;
            emit(&r, json, || {
                format!(
                    "wrote {} training and {} test examples to {}\n",
                    r.n_train,
                    r.n_test,
                    out.display()
                )
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
