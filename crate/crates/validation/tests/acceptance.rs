//! Acceptance criteria. Each prints one PASS/FAIL line; the binary exits
//! non-zero if any criterion fails or runs past its time budget.

use std::f64::consts::PI;
use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use degen::RayonRunner;
use degen_core::curvature::{curvature_tensor, curvature_tensor_fd, fd_tolerance, FD_STEP};
use degen_core::deformation::{ambient_metric, dbar_w_components, dbar_w_norm_sq_closed};
use degen_core::experiments::{sample_uniform_point, DEFAULT_MAX_FIT_RESIDUAL};
use degen_core::geometry::{metric_determinant_closed, metric_determinant_dense};
use degen_core::{
    exact_volume_n1, run_bounds_scan, run_flow_check, run_sweep, run_volume, run_wp_ratio, BoundsReport, LogPoint,
    McSettings, ModelConfig, SweepQuantity,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

struct Criterion {
    id: u32,
    title: &'static str,
    budget: Duration,
    check: fn() -> Outcome,
}

const LTS: [f64; 4] = [-20.0, -200.0, -2000.0, -20000.0];

fn config(n: usize, lt: f64) -> ModelConfig {
    ModelConfig::new(n, lt, -2.0).expect("valid configuration")
}

/// Random points on fibers with `|lt|` log-uniform in `[20, 20000]`, in the
/// dominant chart. Off-chart, `1/a_0^2` swamps `1/a_j^2` in the stored metric
/// entries and no dense routine can recover the lost digits.
fn random_points(n: usize, count: usize, seed: u64) -> Vec<LogPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let lt = -(10f64.powf(rng.random_range(1.3..4.3)));
            sample_uniform_point(&mut rng, lt, n).dominant_chart()
        })
        .collect()
}

fn determinant_identity() -> Outcome {
    let mut worst = 0.0f64;
    for n in 1..=3 {
        for p in random_points(n, 10_000, n as u64) {
            let closed = metric_determinant_closed(&p);
            let dense = metric_determinant_dense(&p);
            worst = worst.max((closed - dense).abs() / closed.abs());
        }
    }
    let detail = format!("max relative gap {worst:.2e} (limit 1e-10)");
    if worst <= 1e-10 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn dbar_norm_identity() -> Outcome {
    let mut worst = 0.0f64;
    for n in 1..=3 {
        for p in random_points(n, 10_000, 10 + n as u64) {
            let closed = dbar_w_norm_sq_closed(&p);
            let contracted = dbar_w_components(&p)
                .norm_sq(&ambient_metric(&p))
                .map_err(|e| e.to_string())?;
            worst = worst.max((closed - contracted).abs() / closed.abs());
        }
    }
    let detail = format!("max relative gap {worst:.2e} (limit 1e-8)");
    if worst <= 1e-8 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn scans(m: usize) -> Result<Vec<(usize, Vec<BoundsReport>)>, String> {
    (1..=2)
        .map(|n| {
            let reps = LTS
                .iter()
                .map(|&lt| run_bounds_scan(&config(n, lt), m, 100 + n as u64).map_err(|e| e.to_string()))
                .collect::<Result<Vec<_>, _>>()?;
            Ok((n, reps))
        })
        .collect()
}

fn phi_bounded() -> Outcome {
    let mut lines = Vec::new();
    for (n, reps) in scans(10_000)? {
        let nf = n as f64;
        let fact: f64 = (1..=n).map(|k| k as f64).product();
        let (lo, hi) = ((PI.powi(n as i32) / fact).ln(), (PI.powi(n as i32) * (nf + 1.0) / fact).ln());
        let first = reps[0].phi_range;
        for r in &reps {
            if r.phi_range.0 < lo || r.phi_range.1 > hi {
                return Err(format!("n={n} lt={}: phi range {:?} outside [{lo}, {hi}]", r.lt, r.phi_range));
            }
            let drift = (r.phi_range.0 - first.0).abs().max((r.phi_range.1 - first.1).abs());
            if drift > 1e-12 {
                return Err(format!("n={n} lt={}: phi range moved by {drift:e} from lt=-20", r.lt));
            }
        }
        lines.push(format!("n={n}: phi in [{:.6}, {:.6}] within [{lo:.6}, {hi:.6}]", first.0, first.1));
    }
    Ok(lines.join("; "))
}

fn frame_bounds() -> Outcome {
    let mut lines = Vec::new();
    for (n, reps) in scans(10_000)? {
        let nf = n as f64;
        let (elo, ehi) = (1.0 / PI, (nf + 1.0) / PI);
        let mut eig = (f64::INFINITY, f64::NEG_INFINITY);
        let mut grad = 0.0f64;
        for r in &reps {
            eig = (eig.0.min(r.frame_eigen_range.0), eig.1.max(r.frame_eigen_range.1));
            grad = grad.max(r.grad_phi_max);
        }
        if eig.0 < elo - 1e-12 || eig.1 > ehi + 1e-12 {
            return Err(format!("n={n}: frame spectrum {eig:?} outside [{elo}, {ehi}]"));
        }
        if grad > 4.0 * (nf + 1.0) {
            return Err(format!("n={n}: |W phi| reaches {grad} > {}", 4.0 * (nf + 1.0)));
        }
        lines.push(format!(
            "n={n}: eigenvalues in [{:.6}, {:.6}], max |W phi| = {grad:.6} <= {}",
            eig.0,
            eig.1,
            4 * (n + 1)
        ));
    }
    Ok(lines.join("; "))
}

fn curvature_stable() -> Outcome {
    let mut lines = Vec::new();
    for (n, reps) in scans(1000)? {
        let sups: Vec<f64> = reps.iter().map(|r| r.curvature_sup).collect();
        let max = sups.iter().copied().fold(0.0, f64::max);
        let min = sups.iter().copied().fold(f64::INFINITY, f64::min);
        let ratio = max / min;
        if ratio.is_nan() || ratio >= 2.0 {
            return Err(format!("n={n}: curvature sup varies by {:.3} across lt: {sups:?}", max / min));
        }
        lines.push(format!("n={n}: sup |R| in [{min:.4}, {max:.4}]"));
    }
    let mut worst = 0.0f64;
    for n in 1..=3 {
        for p in random_points(n, 34, 20 + n as u64) {
            let exact = curvature_tensor(&p);
            let gap = exact.max_abs_diff(&curvature_tensor_fd(&p, FD_STEP));
            let tol = fd_tolerance(FD_STEP, exact.sup_norm());
            if gap > tol {
                return Err(format!("finite differences disagree by {gap:e} > {tol:e} at b = {:?}", p.b()));
            }
            worst = worst.max(gap / tol);
        }
    }
    lines.push(format!("FD gap at most {worst:.3} of tolerance over 102 points"));
    let cusp = LogPoint::from_log_moduli(vec![-1e6, -10.0], vec![0.0]).map_err(|e| e.to_string())?;
    let k = curvature_tensor(&cusp).sup_norm();
    let rel = (k / (4.0 * PI) - 1.0).abs();
    lines.push(format!("cusp |K| = {k:.6} vs 4 pi ({:.2e} rel)", rel));
    if rel >= 0.01 {
        return Err(lines.join("; "));
    }
    Ok(lines.join("; "))
}

fn volume_n1() -> Outcome {
    let cfg = config(1, -20.0);
    let runner = RayonRunner::new(None).map_err(|e| e.to_string())?;
    let v = run_volume(&cfg, &McSettings::new(100_000, 7), &runner).map_err(|e| e.to_string())?;
    let exact = exact_volume_n1(&cfg).map_err(|e| e.to_string())?;
    let detail = format!("MC {} +- {:.1e}, exact {exact}", v.value, v.std_error);
    if (v.value - exact).abs() <= 3.0 * v.std_error && (exact - 1.77778).abs() < 5e-6 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn wp_ratio_constant() -> Outcome {
    let runner = RayonRunner::new(None).map_err(|e| e.to_string())?;
    let mut lines = Vec::new();
    let mut ok = true;
    for (n, lt, reference) in [(1, -921.034, 1.31626e-8), (2, -2000.0, 2.57080e-9)] {
        let r = run_wp_ratio(&config(n, lt), &McSettings::new(1_000_000, 7), &runner).map_err(|e| e.to_string())?;
        ok &= r.matches_prediction() && (r.predicted / reference - 1.0).abs() < 1e-4;
        lines.push(format!(
            "n={n} lt={lt}: ratio {:.5e} +- {:.1e}, predicted {:.5e}, ratio/predicted {:.4}",
            r.ratio,
            r.ratio_std_error,
            r.predicted,
            r.ratio / r.predicted
        ));
    }
    if ok {
        Ok(lines.join("; "))
    } else {
        Err(lines.join("; "))
    }
}

fn incompleteness_scaling() -> Outcome {
    let runner = RayonRunner::new(None).map_err(|e| e.to_string())?;
    let rep = run_sweep(
        &config(1, -100.0),
        &[-100.0, -300.0, -1000.0, -3000.0, -10000.0],
        SweepQuantity::WpRatio,
        &McSettings::new(200_000, 7),
        &runner,
        DEFAULT_MAX_FIT_RESIDUAL,
    )
    .map_err(|e| e.to_string())?;
    let detail = format!(
        "exponent {:.4} +- {:.4}, residual {:.2e}, implied log C spread {:.3}",
        rep.fitted_exponent,
        rep.exponent_std_error,
        rep.fit_residual,
        rep.implied_constant_spread.unwrap_or(f64::NAN)
    );
    if (rep.fitted_exponent + 3.0).abs() <= 0.05 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn flow_conservation() -> Outcome {
    let rep = run_flow_check(&config(2, -500.0), 1000, 5.0, 9).map_err(|e| e.to_string())?;
    Ok(format!(
        "sum error {:.1e}, composition error {:.1e}, tolerance {:.1e}",
        rep.max_sum_error, rep.max_composition_error, rep.tolerance
    ))
}

fn cli_once(args: &[&str]) -> Result<Vec<u8>, String> {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = degen::run(std::iter::once("degen").chain(args.iter().copied()), &mut out, &mut err);
    if code != 0 {
        return Err(format!("{args:?} exited {code}: {}", String::from_utf8_lossy(&err)));
    }
    Ok(out)
}

fn deterministic_cli() -> Outcome {
    let commands: [&[&str]; 6] = [
        &["volume", "--n", "2", "--log-t2", "-200", "--samples", "50000", "--seed", "3"],
        &["wp-ratio", "--n", "1", "--log-t2", "-921.034", "--samples", "100000", "--seed", "7"],
        &["sweep", "--n", "1", "--log-t2-list", "-100,-300,-1000,-3000,-10000", "--samples", "20000", "--seed", "1"],
        &["bounds-scan", "--n", "2", "--log-t2", "-300", "--samples", "1000", "--seed", "4"],
        &["flow-check", "--n", "2", "--log-t2", "-300", "--samples", "200", "--seed", "5"],
        &["point-eval", "--n", "2", "--log-t2", "-30", "--b", "0.2,0.3", "--theta", "0.5,-1"],
    ];
    for args in commands {
        let first = cli_once(args)?;
        let again = cli_once(args)?;
        let mut threaded = args.to_vec();
        threaded.extend(["--threads", "3"]);
        let other = cli_once(&threaded)?;
        if first != again || first != other {
            return Err(format!("{} output differs between identical runs", args[0]));
        }
    }
    Ok("6 commands byte-identical across reruns and thread counts".into())
}

fn main() {
    let criteria = [
        Criterion { id: 1, title: "determinant identity", budget: Duration::from_secs(5), check: determinant_identity },
        Criterion { id: 2, title: "dbar W norm identity", budget: Duration::from_secs(10), check: dbar_norm_identity },
        Criterion { id: 3, title: "phi uniform bounds", budget: Duration::from_secs(10), check: phi_bounded },
        Criterion { id: 4, title: "proper-frame bounds", budget: Duration::from_secs(10), check: frame_bounds },
        Criterion { id: 5, title: "curvature stability", budget: Duration::from_secs(60), check: curvature_stable },
        Criterion { id: 6, title: "n=1 volume", budget: Duration::from_secs(5), check: volume_n1 },
        Criterion { id: 7, title: "WP ratio constant", budget: Duration::from_secs(120), check: wp_ratio_constant },
        Criterion { id: 8, title: "incompleteness scaling", budget: Duration::from_secs(300), check: incompleteness_scaling },
        Criterion { id: 9, title: "flow conservation", budget: Duration::from_secs(5), check: flow_conservation },
        Criterion { id: 10, title: "CLI determinism", budget: Duration::from_secs(120), check: deterministic_cli },
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for c in &criteria {
        let started = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(c.check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = started.elapsed();
        let (pass, detail) = match outcome {
            Ok(d) if elapsed <= c.budget => (true, d),
            Ok(d) => (false, format!("{d}; over the {:?} budget", c.budget)),
            Err(d) => (false, d),
        };
        failed += usize::from(!pass);
        println!(
            "criterion {:>2} {} {} ({:.2?}): {detail}",
            c.id,
            if pass { "PASS" } else { "FAIL" },
            c.title,
            elapsed
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
