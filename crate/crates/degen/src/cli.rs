use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use degen_core::curvature::curvature_sup;
use degen_core::deformation::{dbar_w_norm_sq, dbar_w_norm_sq_fiber, wp_integrand};
use degen_core::experiments::{normalized_volume, DEFAULT_MAX_FIT_RESIDUAL};
use degen_core::geometry::{frame_metric, grad_phi_frame, metric_determinant, phi, phi_bounds, volume_density};
use degen_core::{
    exact_volume_n1, make_point, run_bounds_scan, run_flow_check, run_sweep, run_volume, run_wp_ratio, McSettings,
    ModelConfig, SweepQuantity,
};

use crate::record::{RecordConfig, RecordError, RunRecord};
use crate::runner::RayonRunner;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Model(#[from] degen_core::Error),
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot start worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

impl CliError {
    /// 2 when a checked identity or bound failed, 1 for bad input or IO.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Model(e) if e.is_check_failure() => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "degen", version, about = "Numerical experiments on the degenerating fibers z_0 z_1 ... z_n = t")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Quantity {
    Ratio,
    Volume,
}

#[derive(Debug, Args)]
struct Common {
    /// Fiber dimension
    #[arg(long)]
    n: usize,
    /// log c^2 for the polydisk radius c
    #[arg(long, default_value_t = -2.0, allow_negative_numbers = true)]
    c_log2: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the record here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: one per core); results do not depend on it
    #[arg(long, value_parser = clap::value_parser!(u16).range(1..))]
    threads: Option<u16>,
    /// Independent RNG streams; results depend on it
    #[arg(long, default_value_t = degen_core::quadrature::DEFAULT_SHARDS, value_parser = parse_shards)]
    shards: usize,
    /// Record wall time (makes output non-reproducible)
    #[arg(long)]
    timing: bool,
}

fn parse_shards(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(k) if k >= 1 => Ok(k),
        _ => Err(format!("expected a positive integer, got {s}")),
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Volume of the fiber inside the polydisk of radius c
    Volume {
        #[command(flatten)]
        common: Common,
        /// log|t|^2
        #[arg(long, allow_negative_numbers = true)]
        log_t2: f64,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
    },
    /// Weil-Petersson ratio against its predicted asymptotic value
    WpRatio {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_negative_numbers = true)]
        log_t2: f64,
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
    },
    /// Power-law fit of the ratio (or volume) across fibers
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated log|t|^2 values
        #[arg(long, allow_hyphen_values = true, value_delimiter = ',', required = true)]
        log_t2_list: Vec<f64>,
        #[arg(long, default_value_t = 200_000)]
        samples: u64,
        #[arg(long, value_enum, default_value_t = Quantity::Ratio)]
        quantity: Quantity,
        /// Largest accepted |log value - fit|
        #[arg(long, default_value_t = DEFAULT_MAX_FIT_RESIDUAL)]
        max_residual: f64,
    },
    /// Extremes of phi, its frame gradient, the frame spectrum and curvature on uniform points
    BoundsScan {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_negative_numbers = true)]
        log_t2: f64,
        #[arg(long, default_value_t = 10_000)]
        samples: u64,
    },
    /// Conservation and composition checks for the flow of W
    FlowCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_negative_numbers = true)]
        log_t2: f64,
        #[arg(long, default_value_t = 1000)]
        samples: u64,
        #[arg(long, default_value_t = 5.0)]
        sigma_max: f64,
    },
    /// Pointwise quantities at one point given by b_k = a_k / |log|t|^2|, k = 1..n
    PointEval {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_negative_numbers = true)]
        log_t2: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        b: Vec<f64>,
        /// Angles of z_1..z_n (default all zero)
        #[arg(long, allow_hyphen_values = true, value_delimiter = ',')]
        theta: Vec<f64>,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Volume { common, .. }
            | Command::WpRatio { common, .. }
            | Command::Sweep { common, .. }
            | Command::BoundsScan { common, .. }
            | Command::FlowCheck { common, .. }
            | Command::PointEval { common, .. } => common,
        }
    }
}

fn single(common: &Common, lt: f64) -> Result<(ModelConfig, RecordConfig), CliError> {
    let config = ModelConfig::new(common.n, lt, common.c_log2)?;
    let rc = RecordConfig {
        n: common.n,
        log_t2: vec![lt],
        c_log2: common.c_log2,
    };
    Ok((config, rc))
}

fn point_count(samples: u64) -> Result<usize, CliError> {
    usize::try_from(samples).map_err(|_| CliError::Usage(format!("--samples {samples} is too large")))
}

fn execute(command: &Command, log: &mut dyn Write) -> Result<RunRecord, CliError> {
    let common = command.common();
    let runner = RayonRunner::new(common.threads.map(usize::from))?;
    let mc = |samples: u64| McSettings {
        samples,
        seed: common.seed,
        shards: common.shards,
    };
    let estimator = format!(
        "importance-sampled Monte Carlo over b_k = a_k/|log|t|^2|, {} ChaCha8 streams",
        common.shards
    );
    let mut record = match command {
        Command::Volume { log_t2, samples, .. } => {
            let (config, rc) = single(common, *log_t2)?;
            let v = run_volume(&config, &mc(*samples), &runner)?;
            let mut r = RunRecord::new("volume", rc, common.seed, *samples);
            r.push("volume", v.value, v.std_error);
            r.push(
                "normalized_volume",
                normalized_volume(&config, v.value),
                normalized_volume(&config, v.std_error),
            );
            r.exact("eps", config.eps());
            if config.n == 1 {
                r.exact("exact_volume", exact_volume_n1(&config)?);
            }
            r.note("volume", "integral of omega_t^n over the fiber inside the radius-c polydisk");
            r.note("normalized_volume", "volume * |log c^2|^n / ((n+1)! 2^n), tends to 1 as eps -> 0");
            r.note("eps", "log c^2 / log|t|^2");
            r.note("estimator", estimator);
            let _ = writeln!(log, "volume = {:e} +- {:e}", v.value, v.std_error);
            r
        }
        Command::WpRatio { log_t2, samples, .. } => {
            let (config, rc) = single(common, *log_t2)?;
            let w = run_wp_ratio(&config, &mc(*samples), &runner)?;
            let mut r = RunRecord::new("wp-ratio", rc, common.seed, *samples);
            r.push("ratio", w.ratio, w.ratio_std_error);
            r.exact("predicted", w.predicted);
            r.push("rel_dev", w.rel_dev, w.ratio_std_error / w.predicted);
            r.push("volume", w.volume.value, w.volume.std_error);
            r.push("wp_integral", w.wp_integral.value, w.wp_integral.std_error);
            r.exact("matches_prediction", f64::from(u8::from(w.matches_prediction())));
            r.exact("eps", config.eps());
            r.note("ratio", "integral of |dbar W|^2 omega_t^n divided by the volume");
            r.note("predicted", "2 n |log c^2| (1 + pi/2) / |log|t|^2|^3");
            r.note("rel_dev", "(ratio - predicted) / predicted");
            r.note("matches_prediction", "1 if |ratio - predicted| <= 5% predicted + 3 std_error");
            r.note("estimator", estimator);
            let _ = writeln!(
                log,
                "ratio = {:e} +- {:e}, predicted {:e}, ratio/predicted = {:.4}",
                w.ratio,
                w.ratio_std_error,
                w.predicted,
                w.ratio / w.predicted
            );
            r
        }
        Command::Sweep {
            log_t2_list,
            samples,
            quantity,
            max_residual,
            ..
        } => {
            let first = *log_t2_list.first().ok_or_else(|| CliError::Usage("--log-t2-list is empty".into()))?;
            let base = ModelConfig::new(common.n, first, common.c_log2)?;
            let q = match quantity {
                Quantity::Ratio => SweepQuantity::WpRatio,
                Quantity::Volume => SweepQuantity::Volume,
            };
            let rep = run_sweep(&base, log_t2_list, q, &mc(*samples), &runner, *max_residual)?;
            let rc = RecordConfig {
                n: common.n,
                log_t2: log_t2_list.clone(),
                c_log2: common.c_log2,
            };
            let mut r = RunRecord::new("sweep", rc, common.seed, *samples);
            for (i, row) in rep.rows.iter().enumerate() {
                r.exact(format!("row.{i}.log_t2"), row.lt);
                r.push(format!("row.{i}.value"), row.value, row.std_error);
                if let Some(c) = row.log_implied_constant {
                    r.push(format!("row.{i}.log_implied_constant"), c, row.std_error / row.value);
                }
            }
            r.push("fitted_exponent", rep.fitted_exponent, rep.exponent_std_error);
            r.exact("fit_residual", rep.fit_residual);
            if let Some(s) = rep.implied_constant_spread {
                r.exact("implied_constant_spread", s);
            }
            let what = match q {
                SweepQuantity::WpRatio => "Weil-Petersson ratio",
                SweepQuantity::Volume => "volume",
            };
            r.note("row.value", what);
            r.note("fitted_exponent", "weighted least-squares slope of log value against log|log|t|^2|");
            r.note("fit_residual", "largest |log value - fit| over the rows");
            r.note(
                "row.log_implied_constant",
                "log(ratio * volume) + 3 log(|log|t|^2| / 2): log C in C |t|^-2 |log|t||^-3, |t| cancelled",
            );
            r.note("estimator", estimator);
            let _ = writeln!(
                log,
                "fitted exponent = {} +- {} (residual {})",
                rep.fitted_exponent, rep.exponent_std_error, rep.fit_residual
            );
            r
        }
        Command::BoundsScan { log_t2, samples, .. } => {
            let (config, rc) = single(common, *log_t2)?;
            let rep = run_bounds_scan(&config, point_count(*samples)?, common.seed)?;
            let n = config.n as f64;
            let (lo, hi) = phi_bounds(config.n);
            let mut r = RunRecord::new("bounds-scan", rc, common.seed, *samples);
            r.exact("phi_min", rep.phi_range.0);
            r.exact("phi_max", rep.phi_range.1);
            r.exact("phi_lower_bound", lo);
            r.exact("phi_upper_bound", hi);
            r.exact("grad_phi_max", rep.grad_phi_max);
            r.exact("grad_phi_bound", 4.0 * (n + 1.0));
            r.exact("frame_eigen_min", rep.frame_eigen_range.0);
            r.exact("frame_eigen_max", rep.frame_eigen_range.1);
            r.exact("curvature_sup", rep.curvature_sup);
            r.note("sampling", "uniform on the open b-simplex with uniform angles, dominant chart");
            r.note("curvature_sup", "largest |R_{i jbar k lbar}| in the g^{-1/2} orthonormal frame");
            let _ = writeln!(log, "all bounds hold at {} points", rep.samples);
            r
        }
        Command::FlowCheck { log_t2, samples, sigma_max, .. } => {
            let (config, rc) = single(common, *log_t2)?;
            let rep = run_flow_check(&config, point_count(*samples)?, *sigma_max, common.seed)?;
            let mut r = RunRecord::new("flow-check", rc, common.seed, *samples);
            r.exact("sigma_max", rep.sigma_max);
            r.exact("max_sum_error", rep.max_sum_error);
            r.exact("max_composition_error", rep.max_composition_error);
            r.exact("tolerance", rep.tolerance);
            r.note("max_sum_error", "largest |sum a_k - (log|t|^2 + 2 sigma)| along the flow");
            r.note("integrator", "classical RK4 in a_k, angles fixed");
            let _ = writeln!(log, "flow identities hold at {} points", rep.samples);
            r
        }
        Command::PointEval { log_t2, b, theta, .. } => {
            let (config, rc) = single(common, *log_t2)?;
            let theta = if theta.is_empty() { vec![0.0; config.n] } else { theta.clone() };
            let p = make_point(b, &theta, &config)?;
            let q = p.dominant_chart();
            let mut r = RunRecord::new("point-eval", rc, common.seed, 0);
            for (k, a) in p.a().iter().enumerate() {
                r.exact(format!("a.{k}"), *a);
            }
            r.exact("phi", phi(&p));
            r.exact("volume_density", volume_density(&p));
            r.exact("metric_determinant", metric_determinant(&p)?);
            r.exact("dbar_w_norm_sq", dbar_w_norm_sq(&p)?);
            r.exact("dbar_w_norm_sq_fiber", dbar_w_norm_sq_fiber(&p));
            r.exact("wp_integrand", wp_integrand(&p));
            r.exact("dominant_index", p.dominant_index() as f64);
            let ev = frame_metric(&q)?.eigenvalues();
            r.exact("frame_eigen_min", ev[0]);
            r.exact("frame_eigen_max", ev[ev.len() - 1]);
            for (i, g) in grad_phi_frame(&q)?.iter().enumerate() {
                r.exact(format!("grad_phi.{}", i + 1), *g);
            }
            r.exact("curvature_sup", curvature_sup(&q)?);
            r.note("a", "log|z_k|^2");
            r.note("frame", "frame quantities are evaluated after moving the dominant |a_k| to slot 0");
            r
        }
    };
    record.note("shards", common.shards.to_string());
    Ok(record)
}

fn emit(record: &RunRecord, format: Format, out: Option<&PathBuf>, stdout: &mut dyn Write) -> Result<(), CliError> {
    let mut bytes = Vec::new();
    match format {
        Format::Json => bytes.extend_from_slice(record.to_json()?.as_bytes()),
        Format::Csv => record.write_csv(&mut bytes)?,
    }
    match out {
        Some(path) => {
            let io = |source| CliError::Io {
                path: path.display().to_string(),
                source,
            };
            let mut w = BufWriter::new(File::create(path).map_err(io)?);
            w.write_all(&bytes).map_err(io)?;
            w.flush().map_err(io)
        }
        None => stdout.write_all(&bytes).map_err(|source| CliError::Io {
            path: "stdout".into(),
            source,
        }),
    }
}

/// Parses `args` (program name first), runs the command and writes the record.
/// Returns the process exit code: 0 success, 1 bad input or IO, 2 failed check.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = stdout.write_all(text.as_bytes());
                    0
                }
                _ => {
                    let _ = stderr.write_all(text.as_bytes());
                    1
                }
            };
        }
    };
    let common = cli.command.common();
    let started = Instant::now();
    let result = execute(&cli.command, stderr).and_then(|mut record| {
        if common.timing {
            record.wall_time_ms = Some(started.elapsed().as_millis() as u64);
        }
        emit(&record, common.format, common.out.as_ref(), stdout)
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "degen: {e}");
            e.exit_code()
        }
    }
}
