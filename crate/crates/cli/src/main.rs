use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use arlasso::ar_process::default_burn_in;
use arlasso::experiments::{emit_report, McConfig, WeightScheme};
use arlasso::io::{read_json, read_model, read_series, write_cv_csv, write_json, write_path_csv, write_series, FitRecord};
use arlasso::lasso::{geometric_grid, DEFAULT_GRID_SIZE, DEFAULT_LAMBDA_MIN_RATIO};
use arlasso::selection::{cross_validate_with, FoldScheme, DEFAULT_FOLDS};
use arlasso::theory::{condition_report, Family};
use arlasso::{
    build_design_with, fit, lambda_max, run_monte_carlo, selected_support, simulate,
    solution_path, yule_walker, DesignMode, Error, LagDesign, PenaltyConfig, SolverOptions, TimeSeries,
};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "arlasso", version, about = "Sparse autoregression with the weighted lasso")]
struct Cli {
    /// Print progress and summaries to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a series from a model JSON file.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        n: u64,
        /// Number of pre-sample values to emit ahead of the n observations.
        #[arg(long, default_value_t = 0)]
        p: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        burn_in: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the weighted lasso at one penalty level.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, allow_hyphen_values = true)]
        lambda: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solution path over a geometric penalty grid.
    Path {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-validate the penalty level and fit the chosen model.
    Cv {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value_t = DEFAULT_FOLDS)]
        folds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Score forward-chaining blocks instead of random row folds.
        #[arg(long)]
        rolling_cv: bool,
        /// Output directory for cv.csv, path.csv and fit.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Yule-Walker fits with AIC order selection.
    Yw {
        #[arg(long)]
        series: PathBuf,
        /// Largest order considered.
        #[arg(long, default_value_t = 30)]
        p: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate the theoretical conditions for a model, sample size and penalty.
    Check {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        n: usize,
        /// Maximal lag; defaults to the model order.
        #[arg(long)]
        p: Option<usize>,
        #[arg(long, allow_hyphen_values = true)]
        lambda: f64,
        #[arg(long)]
        weights: Option<String>,
        #[arg(long, requires_all = ["l", "big_l"])]
        rho: Option<f64>,
        #[arg(long, requires_all = ["rho", "big_l"])]
        l: Option<f64>,
        #[arg(long = "big-l", requires_all = ["rho", "l"])]
        big_l: Option<f64>,
        /// Also write the full report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte-Carlo selection study.
    Mc {
        /// Study configuration JSON; flags override its values.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        p: Option<usize>,
        #[arg(long)]
        replications: Option<usize>,
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long)]
        grid_size: Option<usize>,
        #[arg(long)]
        lambda_min_ratio: Option<f64>,
        #[arg(long)]
        weights: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        rolling_cv: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    series: PathBuf,
    #[arg(long)]
    p: usize,
    /// Comma-separated per-lag weights, or "unit".
    #[arg(long)]
    weights: Option<String>,
    /// Drop the first p observations instead of requiring pre-sample values.
    #[arg(long)]
    trim_presample: bool,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long, default_value_t = DEFAULT_GRID_SIZE)]
    grid_size: usize,
    #[arg(long, default_value_t = DEFAULT_LAMBDA_MIN_RATIO)]
    lambda_min_ratio: f64,
}

/// Failure with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_validation() { 2 } else { 1 },
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

fn parse_weights(spec: Option<&str>, p: usize) -> Result<Vec<f64>, Failure> {
    let Some(spec) = spec.map(str::trim) else {
        return Ok(vec![1.0; p]);
    };
    if spec.eq_ignore_ascii_case("unit") {
        return Ok(vec![1.0; p]);
    }
    let w = spec
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| usage(format!("--weights: {e}")))?;
    if w.len() != p {
        return Err(usage(format!("--weights: expected {p} values, got {}", w.len())));
    }
    if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(usage("--weights: every weight must be finite and nonnegative"));
    }
    Ok(w)
}

fn check_positive(flag: &str, v: f64) -> Result<(), Failure> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(usage(format!("{flag} must be positive and finite, got {v}")))
    }
}

fn check_grid(g: &GridArgs) -> Result<(), Failure> {
    if g.grid_size < 2 {
        return Err(usage(format!("--grid-size must be at least 2, got {}", g.grid_size)));
    }
    if !(g.lambda_min_ratio > 0.0 && g.lambda_min_ratio < 1.0) {
        return Err(usage(format!(
            "--lambda-min-ratio must lie in (0, 1), got {}",
            g.lambda_min_ratio
        )));
    }
    Ok(())
}

fn load_design(a: &DataArgs) -> Result<(TimeSeries, LagDesign, Vec<f64>), Failure> {
    if a.p == 0 {
        return Err(usage("--p must be at least 1"));
    }
    let weights = parse_weights(a.weights.as_deref(), a.p)?;
    let series = read_series(&a.series)?;
    let mode = if a.trim_presample {
        DesignMode::Trim
    } else {
        DesignMode::PreSample
    };
    let design = build_design_with(&series, a.p, mode).map_err(|e| {
        let mut f = Failure::from(e);
        if !a.trim_presample {
            f.message.push_str(" (pass --trim-presample to drop the first p observations)");
        }
        f
    })?;
    Ok((series, design, weights))
}

fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure {
        code: 1,
        message: format!("{}: {e}", dir.display()),
    })
}

fn run(cli: Cli) -> Result<(), Failure> {
    let verbose = cli.verbose;
    let opts = SolverOptions::default();
    match cli.command {
        Command::Simulate { model, n, p, seed, burn_in, out } => {
            let model = read_model(&model)?;
            let burn = burn_in.unwrap_or_else(|| default_burn_in(p.max(model.order())));
            let s = simulate(&model, n as usize, p, burn, seed)?;
            write_series(&out, &s)?;
            if verbose {
                eprintln!("wrote {} values to {}", s.values().len(), out.display());
            }
        }
        Command::Fit { data, lambda, out } => {
            check_positive("--lambda", lambda)?;
            let (_, design, weights) = load_design(&data)?;
            let f = fit(&design, &PenaltyConfig::new(lambda, weights)?, opts)?;
            write_json(&out, &FitRecord::from(&f))?;
            if verbose {
                eprintln!("support {:?}, kkt residual {:.2e}", f.support, f.kkt_residual);
            }
        }
        Command::Path { data, grid, out } => {
            check_grid(&grid)?;
            let (_, design, weights) = load_design(&data)?;
            let path = solution_path(&design, &weights, grid.grid_size, grid.lambda_min_ratio, opts)?;
            write_path_csv(&out, &path)?;
            if verbose {
                eprintln!("first entrants {:?}", path.first_entrants(5));
            }
        }
        Command::Cv { data, grid, folds, seed, rolling_cv, out } => {
            check_grid(&grid)?;
            if folds < 2 {
                return Err(usage(format!("--folds must be at least 2, got {folds}")));
            }
            let (_, design, weights) = load_design(&data)?;
            let lmax = lambda_max(&design, &weights)?;
            let lambdas = geometric_grid(lmax, grid.grid_size, grid.lambda_min_ratio)?;
            let scheme = if rolling_cv {
                FoldScheme::RollingOrigin
            } else {
                FoldScheme::Random
            };
            let cv = cross_validate_with(&design, &weights, &lambdas, folds, seed, scheme, opts)?;
            let path = arlasso::lasso::solution_path_on_grid(
                &arlasso::design::moments(&design, None),
                &weights,
                &lambdas,
                opts,
            )?;
            let f = fit(&design, &PenaltyConfig::new(cv.chosen_lambda, weights)?, opts)?;
            ensure_dir(&out)?;
            write_cv_csv(&out.join("cv.csv"), &cv)?;
            write_path_csv(&out.join("path.csv"), &path)?;
            write_json(&out.join("fit.json"), &FitRecord::from(&f))?;
            if verbose {
                eprintln!(
                    "chosen lambda {:.4e}, support {:?}",
                    cv.chosen_lambda,
                    selected_support(&path, cv.chosen_lambda)?
                );
            }
        }
        Command::Yw { series, p, out } => {
            let s = read_series(&series)?;
            let yw = yule_walker(&s, p)?;
            write_json(&out, &yw)?;
            if verbose {
                eprintln!("chosen order {}", yw.chosen_order);
            }
        }
        Command::Check { model, n, p, lambda, weights, rho, l, big_l, out } => {
            check_positive("--lambda", lambda)?;
            if n == 0 {
                return Err(usage("--n must be at least 1"));
            }
            let model = read_model(&model)?;
            let p = p.unwrap_or(model.order());
            if p == 0 {
                return Err(usage("--p must be at least 1"));
            }
            let w = parse_weights(weights.as_deref(), p)?;
            let family = match (rho, l, big_l) {
                (Some(rho), Some(l), Some(big_l)) => Some(Family { rho, l, big_l }),
                _ => None,
            };
            let rep = condition_report(&model, n, &PenaltyConfig::new(lambda, w)?, family)?;
            let width = rep.rows.iter().map(|r| r.name.len()).max().unwrap_or(0);
            println!("{:<width$}  {:>12}  status", "condition", "value");
            for r in &rep.rows {
                let v = r.value.map_or_else(|| "-".to_string(), |v| format!("{v:.4e}"));
                println!("{:<width$}  {v:>12}  {}", r.name, r.status);
            }
            if let Some(out) = out {
                write_json(&out, &rep)?;
            }
        }
        Command::Mc {
            config,
            model,
            n,
            p,
            replications,
            folds,
            grid_size,
            lambda_min_ratio,
            weights,
            seed,
            rolling_cv,
            out,
        } => {
            let mut cfg = match config {
                Some(path) => read_json::<McConfig>(&path)?,
                None => McConfig::paper(arlasso::experiments::DEFAULT_REPLICATIONS, 0),
            };
            if let Some(m) = model {
                cfg.model = read_model(&m)?;
            }
            if let Some(v) = n {
                cfg.n = v;
            }
            if let Some(v) = p {
                cfg.p = v;
            }
            if let Some(v) = replications {
                cfg.replications = v;
            }
            if let Some(v) = folds {
                cfg.cv_folds = v;
            }
            if let Some(v) = grid_size {
                cfg.grid_size = v;
            }
            if let Some(v) = lambda_min_ratio {
                cfg.lambda_min_ratio = v;
            }
            if let Some(w) = weights {
                cfg.weight_scheme = WeightScheme::User(parse_weights(Some(&w), cfg.p)?);
            }
            if let Some(s) = seed {
                cfg.base_seed = s;
            }
            cfg.rolling_cv |= rolling_cv;
            cfg.validate()?;
            if verbose {
                eprintln!(
                    "running {} replications (n = {}, p = {})",
                    cfg.replications, cfg.n, cfg.p
                );
            }
            let report = run_monte_carlo(&cfg)?;
            ensure_dir(&out)?;
            let files = emit_report(&report, &out)?;
            if verbose {
                for f in files {
                    eprintln!("wrote {}", f.display());
                }
                eprintln!(
                    "selected per replication: mean {:.2}, median {}",
                    report.summary.mean, report.summary.median
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
