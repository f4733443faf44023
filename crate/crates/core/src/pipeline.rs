//! Unseen-cycle evaluation, error metrics, speedup benchmark and exports.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acquisition::{generate_trajectories, simulate, static_equilibrium, Excitation, Generator, Trajectory};
use crate::error::{Error, Result};
use crate::seeds::with_pool;
use crate::slide::scale;
use crate::surrogate::Network;

pub const EVAL_DURATION: f64 = 10.0;
/// Initial angle range of the evaluation cycle, chosen so the scripted
/// motion stays inside the stroke.
const EVAL_THETA_DEG: (f64, f64) = (0.0, 15.0);

/// Scripted valve profile: rest, raise, rest, lower, rest, oscillate, rest.
pub fn eval_control(duration: f64, dt: f64) -> Vec<f64> {
    let n = (duration / dt).round() as usize;
    // breakpoints for the 10 s profile, stretched to the requested duration
    let k = duration / EVAL_DURATION;
    let ramp = |t: f64, t0: f64, t1: f64, a: f64, b: f64| a + (b - a) * (t - t0) / (t1 - t0);
    (0..n)
        .map(|i| {
            let t = i as f64 * dt / k;
            match t {
                t if t < 0.5 => 0.0,
                t if t < 1.5 => ramp(t, 0.5, 1.5, 0.0, 0.6),
                t if t < 2.5 => 0.6,
                t if t < 3.0 => ramp(t, 2.5, 3.0, 0.6, 0.0),
                t if t < 4.0 => 0.0,
                t if t < 5.0 => ramp(t, 4.0, 5.0, 0.0, -0.6),
                t if t < 6.0 => -0.6,
                t if t < 6.5 => ramp(t, 6.0, 6.5, -0.6, 0.0),
                t if t < 7.0 => 0.0,
                t if t < 9.5 => 0.5 * (2.0 * std::f64::consts::PI * (t - 7.0)).sin(),
                _ => 0.0,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalCycle {
    pub duration: f64,
    pub control: Vec<f64>,
    pub payload: f64,
    pub seed: u64,
}

impl EvalCycle {
    pub fn new(duration: f64, dt: f64, payload: f64, seed: u64) -> Self {
        Self {
            duration,
            control: eval_control(duration, dt),
            payload,
            seed,
        }
    }

    /// Reference simulation from a seeded equilibrium start.
    pub fn simulate(&self, generator: &Generator) -> Result<Trajectory> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let (lo, hi) = EVAL_THETA_DEG;
        let theta = rng.random_range(lo..hi).to_radians();
        let eq = static_equilibrium(theta, &generator.system)?;
        let (channels, flags, _) = simulate(eq.state(), &self.control, &generator.system, &generator.integrator)?;
        if flags.actuator_limit || flags.angle_bound {
            log::warn!("evaluation cycle left the working range (flags {:#06b})", flags.bits());
        }
        Ok(Trajectory {
            dt: generator.integrator.dt as f32,
            payload: self.payload,
            theta_in: theta,
            seed: self.seed,
            flags: flags.bits(),
            channels,
        })
    }
}

/// Scaled input windows of a trajectory for a network, one row per offset.
pub fn window_inputs(net: &Network, traj: &Trajectory) -> Result<(Vec<f32>, usize)> {
    let m = &net.meta;
    let cols: Vec<&[f32]> = m
        .sensors
        .iter()
        .map(|s| {
            traj.channel(s)
                .ok_or_else(|| Error::Schema(format!("trajectory has no '{s}' channel")))
        })
        .collect::<Result<_>>()?;
    let n = traj.n_steps();
    if n <= m.t_d + m.k {
        return Err(Error::InsufficientHorizon {
            n_steps: n,
            needed: m.t_d + m.k + 1,
        });
    }
    if cols.len() * m.t_d != net.in_dim() {
        return Err(Error::Schema("network input width does not match its window metadata".into()));
    }
    let count = n - m.t_d - m.k;
    let mut x = Vec::with_capacity(count * net.in_dim());
    for i in 0..count {
        for (c, &s) in cols.iter().zip(&m.scale_x) {
            x.extend(c[i..i + m.t_d].iter().map(|&v| scale(v, s)));
        }
    }
    Ok((x, count))
}

/// Estimates in meters: row `i` holds the predictions for steps `i + t_d ..= i + t_d + k`.
pub fn sliding_inference(net: &Network, traj: &Trajectory) -> Result<Vec<Vec<f64>>> {
    let (x, _) = window_inputs(net, traj)?;
    let out = net.forward(&x)?;
    Ok(out
        .chunks(net.out_dim())
        .map(|row| row.iter().map(|&v| v as f64 * net.meta.scale_y).collect())
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Percent.
    pub mape: f64,
    /// Meters.
    pub mae: f64,
    pub max_abs_err: f64,
    pub t_d_used: usize,
    pub n_points: usize,
    #[serde(skip)]
    pub abs_err: Vec<f64>,
}

/// MAPE with the denominator floored at 1% of the deflection scale, and MAE.
pub fn compute_metrics(estimate: &[f64], reference: &[f64], scale_y: f64) -> Result<Metrics> {
    if estimate.len() != reference.len() || estimate.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "series lengths {} and {} must match and be non-empty",
            estimate.len(),
            reference.len()
        )));
    }
    let floor = 0.01 * scale_y;
    let n = estimate.len() as f64;
    let abs_err: Vec<f64> = estimate.iter().zip(reference).map(|(a, b)| (a - b).abs()).collect();
    let mae = abs_err.iter().sum::<f64>() / n;
    let mape = 100.0 / n * abs_err.iter().zip(reference).map(|(e, r)| e / r.abs().max(floor)).sum::<f64>();
    Ok(Metrics {
        mape,
        mae,
        max_abs_err: abs_err.iter().copied().fold(0.0, f64::max),
        t_d_used: 0,
        n_points: abs_err.len(),
        abs_err,
    })
}

/// `(t_sim / t_nn) * (n_out / n_in)`: simulated runs in, estimated steps out.
pub fn speedup(t_sim: f64, t_nn: f64, n_in: usize, n_out: usize) -> Result<f64> {
    if !(t_sim > 0.0 && t_nn > 0.0) || n_in == 0 || n_out == 0 {
        return Err(Error::InvalidArgument("speedup needs positive times and counts".into()));
    }
    Ok(t_sim / t_nn * n_out as f64 / n_in as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub metrics: Metrics,
    pub trajectory: Trajectory,
    /// `(t, reference, estimate)` for every estimated step.
    pub series: Vec<(f64, f64, f64)>,
}

/// Simulates the cycle, estimates the deflection and compares.
pub fn evaluate(net: &Network, cycle: &EvalCycle, generator: &Generator) -> Result<EvalReport> {
    let traj = cycle.simulate(generator)?;
    let est = sliding_inference(net, &traj)?;
    let t_d = net.meta.t_d;
    let dt = traj.dt as f64;
    let delta = &traj.channels[5];
    let series: Vec<(f64, f64, f64)> = est
        .iter()
        .enumerate()
        .map(|(i, row)| ((i + t_d) as f64 * dt, delta[i + t_d] as f64, row[0]))
        .collect();
    let (hat, reference): (Vec<f64>, Vec<f64>) = series.iter().map(|&(_, r, e)| (e, r)).unzip();
    let mut metrics = compute_metrics(&hat, &reference, net.meta.scale_y)?;
    metrics.t_d_used = t_d;
    Ok(EvalReport {
        metrics,
        trajectory: traj,
        series,
    })
}

/// `evaluate` plus `eval.csv`, `metrics.json` and `eval.svg` in `dir`.
pub fn run_eval(net: &Network, cycle: &EvalCycle, generator: &Generator, dir: &Path) -> Result<Metrics> {
    let report = evaluate(net, cycle, generator)?;
    std::fs::create_dir_all(dir)?;
    let mut csv = String::from("t,delta_ref,delta_hat,abs_err\n");
    for (&(t, r, e), err) in report.series.iter().zip(&report.metrics.abs_err) {
        let _ = writeln!(csv, "{t:.6},{r:e},{e:e},{err:e}");
    }
    std::fs::write(dir.join("eval.csv"), csv)?;
    let json = serde_json::to_string_pretty(&report.metrics).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(dir.join("metrics.json"), json + "\n")?;
    std::fs::write(dir.join("eval.svg"), overlay_svg(&report.series))?;
    Ok(report.metrics)
}

/// Reference, estimate and absolute error over time, in millimeters.
pub fn overlay_svg(series: &[(f64, f64, f64)]) -> String {
    let (w, h, pad) = (900.0, 420.0, 50.0);
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    );
    if series.is_empty() {
        svg.push_str("</svg>\n");
        return svg;
    }
    let t0 = series[0].0;
    let t1 = series[series.len() - 1].0.max(t0 + 1e-9);
    let ys = series.iter().flat_map(|&(_, r, e)| [r, e, (r - e).abs()]);
    let (lo, hi) = ys.fold((f64::MAX, f64::MIN), |(a, b), v| (a.min(v * 1e3), b.max(v * 1e3)));
    let (lo, hi) = if hi - lo < 1e-9 { (lo - 1.0, hi + 1.0) } else { (lo, hi) };
    let px = |t: f64| pad + (t - t0) / (t1 - t0) * (w - 2.0 * pad);
    let py = |v: f64| h - pad - (v * 1e3 - lo) / (hi - lo) * (h - 2.0 * pad);
    let _ = writeln!(
        svg,
        "<line x1=\"{pad}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n\
         <line x1=\"{pad}\" y1=\"{pad}\" x2=\"{pad}\" y2=\"{}\" stroke=\"black\"/>",
        h - pad,
        w - pad,
        h - pad,
        h - pad
    );
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">t [s] ({t0:.2} to {t1:.2})</text>\n\
         <text x=\"12\" y=\"{}\" font-size=\"12\" transform=\"rotate(-90 12 {})\" text-anchor=\"middle\">delta_y [mm] ({lo:.3} to {hi:.3})</text>",
        w / 2.0,
        h - 15.0,
        h / 2.0,
        h / 2.0
    );
    let curves: [(&str, &str, fn(&(f64, f64, f64)) -> f64); 3] = [
        ("reference", "#1f77b4", |p| p.1),
        ("estimate", "#d62728", |p| p.2),
        ("abs error", "#7f7f7f", |p| (p.1 - p.2).abs()),
    ];
    for (i, (name, color, f)) in curves.iter().enumerate() {
        svg.push_str("<polyline fill=\"none\" stroke-width=\"1.2\" stroke=\"");
        svg.push_str(color);
        svg.push_str("\" points=\"");
        for p in series {
            let _ = write!(svg, "{:.2},{:.2} ", px(p.0), py(f(p)));
        }
        svg.push_str("\"/>\n");
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{color}\">{name}</text>",
            w - pad - 90.0,
            pad + 15.0 * i as f64
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub batch: usize,
    pub t_sim_s: f64,
    pub t_nn_s: f64,
    pub speedup: f64,
}

pub const BENCH_REPEATS: usize = 5;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    v[v.len() / 2]
}

/// Wall time of simulating each batch on one worker against the time the
/// network takes to produce every window estimate of that batch. Repetitions
/// are interleaved across batch sizes so slow phases of the host hit all sizes.
pub fn benchmark(net: &Network, generator: &Generator, batches: &[usize], seed: u64) -> Result<Vec<BenchRow>> {
    if batches.iter().any(|&n| n == 0) {
        return Err(Error::InvalidArgument("batch sizes must be positive".into()));
    }
    let mut t_sim = vec![Vec::with_capacity(BENCH_REPEATS); batches.len()];
    let mut t_nn = vec![Vec::with_capacity(BENCH_REPEATS); batches.len()];
    let mut n_out = vec![0; batches.len()];
    for _ in 0..BENCH_REPEATS {
        for (b, &n) in batches.iter().enumerate() {
            let start = Instant::now();
            let trajectories = with_pool(Some(1), || generate_trajectories(n, seed, generator, Excitation::Random))?;
            t_sim[b].push(start.elapsed().as_secs_f64());
            let start = Instant::now();
            let mut count = 0;
            for traj in &trajectories {
                count += sliding_inference(net, traj)?.len() * net.out_dim();
            }
            t_nn[b].push(start.elapsed().as_secs_f64());
            n_out[b] = count;
        }
    }
    batches
        .iter()
        .enumerate()
        .map(|(b, &n)| {
            let (ts, tn) = (median(t_sim[b].clone()), median(t_nn[b].clone()));
            Ok(BenchRow {
                batch: n,
                t_sim_s: ts,
                t_nn_s: tn,
                speedup: speedup(ts, tn, n, n_out[b])?,
            })
        })
        .collect()
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("batch,t_sim_s,t_nn_s,speedup\n");
    for r in rows {
        let _ = writeln!(out, "{},{:e},{:e},{:e}", r.batch, r.t_sim_s, r.t_nn_s, r.speedup);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::slide::S_DELTA;
    use proptest::prelude::*;

    #[test]
    fn control_profile_is_scripted_and_bounded() {
        let u = eval_control(10.0, 5e-3);
        assert_eq!(u.len(), 2000);
        assert!(u.iter().all(|v| v.abs() <= 0.6 + 1e-12));
        assert_eq!(u[0], 0.0);
        assert!((u[400] - 0.6).abs() < 1e-12);
        assert!((u[1100] + 0.6).abs() < 1e-12);
        assert_eq!(u[1999], 0.0);
        assert_eq!(u, eval_control(10.0, 5e-3));
    }

    #[test]
    fn perfect_estimate_scores_zero() {
        let d = [1e-3, -2e-3, 0.0, 5e-4];
        let m = compute_metrics(&d, &d, S_DELTA).unwrap();
        assert_eq!((m.mape, m.mae), (0.0, 0.0));
    }

    #[test]
    fn constant_offset_is_the_mae() {
        let d = [1e-3, -2e-3, 0.0, 5e-4];
        let e: Vec<f64> = d.iter().map(|v| v + 2e-4).collect();
        let m = compute_metrics(&e, &d, S_DELTA).unwrap();
        assert!((m.mae - 2e-4).abs() < 1e-15);
        // |d| floored at 0.3 mm for the zero sample
        let expected = 25.0 * (0.2 + 0.1 + 2.0 / 3.0 + 0.4);
        assert!((m.mape - expected).abs() < 1e-9, "{}", m.mape);
        assert_eq!(m.n_points, 4);
        assert!(compute_metrics(&e[..3], &d, S_DELTA).is_err());
    }

    proptest! {
        #[test]
        fn metrics_are_symmetric_and_sign_invariant(v in prop::collection::vec((-0.02f64..0.02, -0.02f64..0.02), 1..50)) {
            let (a, b): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
            let ab = compute_metrics(&a, &b, S_DELTA).unwrap();
            let ba = compute_metrics(&b, &a, S_DELTA).unwrap();
            prop_assert!((ab.mae - ba.mae).abs() <= 1e-15);
            let na: Vec<f64> = a.iter().map(|x| -x).collect();
            let nb: Vec<f64> = b.iter().map(|x| -x).collect();
            let flipped = compute_metrics(&na, &nb, S_DELTA).unwrap();
            prop_assert_eq!(flipped.mae, ab.mae);
            prop_assert_eq!(flipped.mape, ab.mape);
            prop_assert!(ab.mape >= 0.0);
        }
    }

    #[test]
    fn speedup_formula() {
        assert_eq!(speedup(2.0, 2.0, 7, 7).unwrap(), 1.0);
        let s = speedup(100.0, 1e-3, 80, 11200).unwrap();
        assert!((s - 1.4e7).abs() < 1e-3);
        assert!(speedup(1.0, 0.0, 1, 1).is_err());
        assert!(speedup(1.0, 1.0, 0, 1).is_err());
    }

    #[test]
    fn svg_has_three_curves() {
        let s: Vec<(f64, f64, f64)> = (0..10).map(|i| (i as f64 * 0.1, 1e-3 * i as f64, 9e-4 * i as f64)).collect();
        let svg = overlay_svg(&s);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 3);
        assert!(overlay_svg(&[]).contains("</svg>"));
    }

    #[test]
    fn bench_csv_layout() {
        let csv = bench_csv(&[BenchRow {
            batch: 80,
            t_sim_s: 1.0,
            t_nn_s: 1e-3,
            speedup: 1.4e5,
        }]);
        assert_eq!(csv.lines().next().unwrap(), "batch,t_sim_s,t_nn_s,speedup");
        assert!(csv.lines().nth(1).unwrap().starts_with("80,"));
    }
}
