use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::diagnostics::{decay_horizon, spacetime_norm};
use crate::error::{Error, Result};
use crate::evolve::{evolve_from, SnapshotStream};
use crate::field::{Profile, RadialField};
use crate::grid::RadialGrid;
use crate::linear::{linear_flow, PropagatorPlan};
use crate::spectral::Dst;

/// Interaction-picture pull-back `U(-t) u(t)`; the result carries time 0
/// (the "0-picture"), where J and H reduce to `i grad` and `x` and the Sigma
/// norm is the plain one.
pub fn pullback(plan: &PropagatorPlan, field: &RadialField) -> Result<RadialField> {
    let t = field.time();
    let mut back = linear_flow(plan, field, -t, 1.0)?;
    back.set_time(0.0);
    Ok(back)
}

/// Cauchy trace of the interaction-picture states at increasing sample
/// times: `d_k = || U(-t_{k+1}) u(t_{k+1}) - U(-t_k) u(t_k) ||_Sigma`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CauchyTrace {
    /// `(t_{k+1}, d_k)` pairs.
    pub entries: Vec<(f64, f64)>,
    /// Differences at or below this are rounding noise for this stream.
    pub floor: f64,
    pub converged: bool,
}

/// Ratio threshold for the geometric-decay test on the trace tail.
pub const CAUCHY_RATIO: f64 = 0.9;

pub fn cauchy_trace(
    plan: &PropagatorPlan,
    stream: &SnapshotStream,
    sample_times: &[f64],
) -> Result<CauchyTrace> {
    if sample_times.len() < 3 {
        return Err(Error::Window(
            "cauchy trace needs at least 3 sample times".into(),
        ));
    }
    let dst = plan.dst();
    let mut states = Vec::with_capacity(sample_times.len());
    for &t in sample_times {
        let snap = nearest_snapshot(stream, t)?;
        states.push(pullback(plan, snap)?);
    }
    let scale = dst.sigma_norm(&states[0]).max(f64::MIN_POSITIVE);
    let floor = 1e-8 * scale;
    let mut entries = Vec::with_capacity(states.len() - 1);
    for k in 0..states.len() - 1 {
        let diff = states[k + 1].sub(&states[k]);
        let d = dst.sigma_norm(&diff);
        entries.push((sample_times[k + 1], d));
    }
    let converged = trace_converged(&entries, floor);
    Ok(CauchyTrace {
        entries,
        floor,
        converged,
    })
}

fn trace_converged(entries: &[(f64, f64)], floor: f64) -> bool {
    let last = entries.last().expect("nonempty").1;
    if last <= floor {
        return true;
    }
    // monotone decay with a hair of slack, then geometric-ratio tail
    let monotone = entries
        .windows(2)
        .all(|w| w[1].1 <= w[0].1 * (1.0 + 1e-9) || w[1].1 <= floor);
    let tail = entries.len().saturating_sub(5);
    let ratio_ok = entries[tail..].windows(2).all(|w| {
        let (prev, next) = (w[0].1, w[1].1);
        next <= floor || next / prev < CAUCHY_RATIO
    });
    monotone && ratio_ok
}

fn nearest_snapshot(stream: &SnapshotStream, t: f64) -> Result<&RadialField> {
    stream
        .snapshots()
        .iter()
        .min_by(|a, b| {
            (a.time() - t)
                .abs()
                .partial_cmp(&(b.time() - t).abs())
                .expect("finite times")
        })
        .filter(|s| (s.time() - t).abs() <= stream.dt().abs() * stream.stride() as f64)
        .ok_or_else(|| Error::Window(format!("no snapshot near t = {t}")))
}

/// The extracted scattering state and its Sigma residual.
#[derive(Debug)]
pub struct ScatteringState {
    pub u_plus: RadialField,
    pub residual: f64,
    pub trace: CauchyTrace,
    /// Exact snapshot time the pull-back started from.
    pub horizon_time: f64,
}

/// Returns the last pull-back state as the `u_+` candidate once the Cauchy
/// trace has converged; the final `d_k` is its residual.
pub fn extract_uplus(
    plan: &PropagatorPlan,
    stream: &SnapshotStream,
    sample_times: &[f64],
) -> Result<ScatteringState> {
    let trace = cauchy_trace(plan, stream, sample_times)?;
    if !trace.converged {
        return Err(Error::Resolution(
            "no scattering detected: cauchy trace did not converge".into(),
        ));
    }
    let last_t = *sample_times.last().expect("nonempty");
    let snap = nearest_snapshot(stream, last_t)?;
    let horizon_time = snap.time();
    let u_plus = pullback(plan, snap)?;
    let residual = trace.entries.last().expect("nonempty").1;
    Ok(ScatteringState {
        u_plus,
        residual,
        trace,
        horizon_time,
    })
}

/// Backward-time analogue (`u_-` from a backward stream).
pub fn extract_uminus(
    plan: &PropagatorPlan,
    stream: &SnapshotStream,
    sample_times: &[f64],
) -> Result<ScatteringState> {
    extract_uplus(plan, stream, sample_times)
}

/// First Duhamel correction `-i integral U(-s) |u|^4 u(s) ds` accumulated by
/// trapezoid over pull-backs at `spacing`-separated snapshot times.
pub fn first_duhamel_correction(
    plan: &PropagatorPlan,
    stream: &SnapshotStream,
    spacing: f64,
) -> Result<RadialField> {
    let grid = plan.grid();
    let r = grid.r();
    let mut samples = Vec::new();
    let t_last = stream.last().time();
    let mut t = stream.first().time();
    while t <= t_last + 1e-12 {
        let snap = nearest_snapshot(stream, t)?;
        // |u|^4 u in the w representation: |w/r|^4 w
        let quintic: Vec<num_complex::Complex64> = snap
            .w()
            .iter()
            .zip(r)
            .map(|(w, &r)| {
                let u2 = w.norm_sqr() / (r * r);
                w * (u2 * u2)
            })
            .collect();
        let quintic = RadialField::from_samples(grid.clone(), quintic, snap.time())?;
        samples.push(pullback(plan, &quintic)?);
        t += spacing;
    }
    if samples.len() < 2 {
        return Err(Error::Window(
            "duhamel quadrature needs >= 2 samples".into(),
        ));
    }
    let mut acc = RadialField::zero(grid, 0.0);
    for (i, s) in samples.iter().enumerate() {
        let weight = if i == 0 || i + 1 == samples.len() {
            0.5
        } else {
            1.0
        };
        for (a, v) in acc.w_mut().iter_mut().zip(s.w()) {
            *a += v * weight * spacing;
        }
    }
    let minus_i = num_complex::Complex64::new(0.0, -1.0);
    for a in acc.w_mut() {
        *a *= minus_i;
    }
    Ok(acc)
}

/// One row of the small-data experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmallDataRow {
    pub eps: f64,
    pub amplitude: f64,
    pub t0_horizon: f64,
    pub t_end: f64,
    /// Global space-time `L^10` norm of the run.
    pub l10_global: f64,
    /// Final Sigma residual of the Cauchy trace.
    pub sigma_residual: f64,
    pub converged: bool,
}

/// Small-data scaling report across an epsilon grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmallDataReport {
    pub rows: Vec<SmallDataRow>,
    /// Least-squares slope of `ln L10` against `ln eps` (linear scaling
    /// predicts 1).
    pub fit_exponent: f64,
}

/// Grid for scattering-era runs: the repulsive potential spreads states at
/// rate `e^t`, so the box is larger than the conservation-era default.
pub fn scattering_config(eps: f64, t_end_pad: f64) -> RunConfig {
    let mut cfg = RunConfig::default_with(
        Profile::Gaussian {
            amplitude: eps,
            width: 1.0,
        },
        0.0,
    );
    cfg.r_max = 64.0;
    cfg.n = 4096;
    cfg.tail_threshold = 1e-5;
    cfg.eps_small = 0.3;
    cfg.t_end = t_end_pad;
    cfg
}

/// Runs the epsilon grid: amplitudes are scaled so `||grad u0||_2 = eps`,
/// each run lasts to `decay_horizon + 2`, and the report records the global
/// `L^10` norm, its scaling exponent across the grid, and the scattering
/// residuals.
pub fn small_data_experiment(eps_grid: &[f64]) -> Result<SmallDataReport> {
    let base = scattering_config(1.0, 0.0);
    let grid = RadialGrid::new(base.r_max, base.n)?;
    let dst = Dst::new(&grid);
    let unit = RadialField::sample(
        &Profile::Gaussian {
            amplitude: 1.0,
            width: 1.0,
        },
        &grid,
        base.tail_threshold,
    )?;
    let grad_unit = dst.gradient_norm_sq(&unit).sqrt();
    let plan = PropagatorPlan::new(&dst, base.dt);
    let mut rows = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        if eps == 0.0 {
            rows.push(SmallDataRow {
                eps,
                amplitude: 0.0,
                t0_horizon: 0.0,
                t_end: 2.0,
                l10_global: 0.0,
                sigma_residual: 0.0,
                converged: true,
            });
            continue;
        }
        let amplitude = eps / grad_unit;
        let mut cfg = scattering_config(amplitude, 0.0);
        let u0 = RadialField::sample(&cfg.profile, &grid, cfg.tail_threshold)?;
        let e1_0 = 0.5 * dst.gradient_norm_sq(&u0) + u0.pot6() / 3.0;
        let t0 = decay_horizon(e1_0, cfg.eps_small);
        cfg.t_end = t0 + 2.0;
        let stream = evolve_from(&dst, u0, &cfg, cfg.dt)?;
        let l10 = spacetime_norm(&stream, (0.0, cfg.t_end), 10.0, 10.0)?;
        let sample_times = trace_times(t0, cfg.t_end);
        let trace = cauchy_trace(&plan, &stream, &sample_times)?;
        rows.push(SmallDataRow {
            eps,
            amplitude,
            t0_horizon: t0,
            t_end: cfg.t_end,
            l10_global: l10,
            sigma_residual: trace.entries.last().expect("nonempty").1,
            converged: trace.converged,
        });
    }
    let fit_exponent = fit_slope(
        rows.iter()
            .filter(|r| r.eps > 0.0 && r.l10_global > 0.0)
            .map(|r| (r.eps.ln(), r.l10_global.ln())),
    );
    Ok(SmallDataReport { rows, fit_exponent })
}

/// Six sample times spanning the post-horizon stretch of a run.
pub fn trace_times(t0: f64, t_end: f64) -> Vec<f64> {
    let start = t0.max(t_end - 1.25);
    (0..6)
        .map(|i| start + (t_end - start) * i as f64 / 5.0)
        .collect()
}

fn fit_slope(points: impl Iterator<Item = (f64, f64)>) -> f64 {
    let pts: Vec<(f64, f64)> = points.collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let (sx, sy): (f64, f64) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mx, my) = (sx / n, sy / n);
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in pts {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}

/// Wave-operator round trip: rebuild the state at the horizon from the
/// asymptote `u_+` with the linear flow, solve the full equation backward to
/// t = 0, and report the Sigma distance to the original data.
pub fn wave_operator_round_trip(
    plan: &PropagatorPlan,
    cfg: &RunConfig,
    u0: &RadialField,
    state: &ScatteringState,
) -> Result<f64> {
    let dst = plan.dst();
    let horizon_t = state.horizon_time;
    let at_horizon = linear_flow(plan, &state.u_plus, horizon_t, cfg.tail_threshold)?;
    let mut back_cfg = cfg.clone();
    back_cfg.t_end = horizon_t;
    let mut start = at_horizon;
    start.set_time(horizon_t);
    let back = evolve_from(dst, start, &back_cfg, -cfg.dt)?;
    let recovered = back.last();
    Ok(dst.sigma_norm(&recovered.sub(u0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn small_setup() -> (Arc<RadialGrid>, Arc<Dst>, PropagatorPlan) {
        let grid = RadialGrid::new(16.0, 512).unwrap();
        let dst = Dst::new(&grid);
        let plan = PropagatorPlan::new(&dst, 1e-3);
        (grid, dst, plan)
    }

    fn mini_cfg(amplitude: f64, t_end: f64) -> RunConfig {
        let mut cfg = RunConfig::default_with(
            Profile::Gaussian {
                amplitude,
                width: 1.0,
            },
            t_end,
        );
        cfg.n = 512;
        cfg.tail_threshold = 1e-2;
        cfg
    }

    #[test]
    fn pullback_inverts_the_linear_flow() {
        let (grid, dst, plan) = small_setup();
        let f = RadialField::sample(
            &Profile::Gaussian {
                amplitude: 1.0,
                width: 1.0,
            },
            &grid,
            1e-6,
        )
        .unwrap();
        let fwd = linear_flow(&plan, &f, 0.8, 1.0).unwrap();
        let back = pullback(&plan, &fwd).unwrap();
        assert!(back.l2_distance(&f) < 1e-8);
        assert_eq!(back.time(), 0.0);
        // sigma norm returns to the initial value on linear runs
        let s0 = dst.sigma_norm(&f);
        assert!((dst.sigma_norm(&back) - s0).abs() / s0 < 1e-6);
        // zero field stays zero
        let z = RadialField::zero(&grid, 0.5);
        assert_eq!(pullback(&plan, &z).unwrap().mass_sq(), 0.0);
    }

    #[test]
    fn linear_run_has_null_trace() {
        let (grid, dst, plan) = small_setup();
        let cfg = mini_cfg(1e-7, 1.0);
        let u0 = RadialField::sample(&cfg.profile, &grid, cfg.tail_threshold).unwrap();
        let stream = evolve_from(&dst, u0, &cfg, cfg.dt).unwrap();
        let times: Vec<f64> = (0..6).map(|i| 0.5 + 0.1 * i as f64).collect();
        let trace = cauchy_trace(&plan, &stream, &times).unwrap();
        assert!(trace.converged);
        let s0 = dst.sigma_norm(stream.first());
        for (t, d) in &trace.entries {
            assert!(*d <= 1e-8 * s0, "t = {t}: d = {d}");
        }
        // u_plus equals u0 for the linear run
        let state = extract_uplus(&plan, &stream, &times).unwrap();
        let diff = state.u_plus.sub(stream.first());
        assert!(dst.sigma_norm(&diff) <= 1e-8 * s0);
        assert!(state.residual <= 1e-8 * s0);
    }

    #[test]
    fn trace_rejects_too_few_samples() {
        let (grid, dst, plan) = small_setup();
        let cfg = mini_cfg(1e-7, 0.2);
        let u0 = RadialField::sample(&cfg.profile, &grid, cfg.tail_threshold).unwrap();
        let stream = evolve_from(&dst, u0, &cfg, cfg.dt).unwrap();
        assert!(cauchy_trace(&plan, &stream, &[0.0, 0.1]).is_err());
    }

    #[test]
    fn trace_is_phase_invariant() {
        let (grid, dst, plan) = small_setup();
        let cfg = mini_cfg(0.05, 1.0);
        let u0 = RadialField::sample(&cfg.profile, &grid, cfg.tail_threshold).unwrap();
        let stream = evolve_from(&dst, u0.clone(), &cfg, cfg.dt).unwrap();
        let rotated = u0.scaled(num_complex::Complex64::from_polar(1.0, 0.77));
        let stream_rot = evolve_from(&dst, rotated, &cfg, cfg.dt).unwrap();
        let times: Vec<f64> = (0..6).map(|i| 0.4 + 0.12 * i as f64).collect();
        let t1 = cauchy_trace(&plan, &stream, &times).unwrap();
        let t2 = cauchy_trace(&plan, &stream_rot, &times).unwrap();
        for (a, b) in t1.entries.iter().zip(&t2.entries) {
            // the quintic phase sees |u| only; the traces agree up to the
            // rounding the rotated data accumulates over the run
            assert!(
                (a.1 - b.1).abs() <= 1e-6 * a.1.max(1e-300),
                "{} vs {}",
                a.1,
                b.1
            );
        }
    }

    #[test]
    fn nonconvergent_trace_yields_no_scattering() {
        let entries = vec![(0.1, 1.0), (0.2, 2.0), (0.3, 4.0)];
        assert!(!trace_converged(&entries, 1e-12));
        let entries = vec![(0.1, 1.0), (0.2, 0.5), (0.3, 0.25)];
        assert!(trace_converged(&entries, 1e-12));
        let entries = vec![(0.1, 1.0), (0.2, 0.99), (0.3, 0.98)];
        // monotone but not geometric
        assert!(!trace_converged(&entries, 1e-12));
    }

    #[test]
    fn fit_slope_recovers_linear_scaling() {
        let pts = [
            (0.02f64.ln(), (3.0 * 0.02f64).ln()),
            (0.04f64.ln(), (3.0 * 0.04f64).ln()),
            (0.08f64.ln(), (3.0 * 0.08f64).ln()),
        ];
        let slope = fit_slope(pts.iter().copied());
        assert!((slope - 1.0).abs() < 1e-12);
    }

    #[test]
    fn residual_decreases_with_longer_runs() {
        let (grid, dst, plan) = small_setup();
        let mut residuals = Vec::new();
        for t_end in [0.8, 1.6] {
            let cfg = mini_cfg(0.05, t_end);
            let u0 = RadialField::sample(&cfg.profile, &grid, cfg.tail_threshold).unwrap();
            let stream = evolve_from(&dst, u0, &cfg, cfg.dt).unwrap();
            let times: Vec<f64> = (0..6).map(|i| t_end - 0.5 + 0.5 * i as f64 / 5.0).collect();
            let state = extract_uplus(&plan, &stream, &times).unwrap();
            residuals.push(state.residual);
        }
        assert!(
            residuals[1] < residuals[0],
            "doubling the window should shrink the residual: {residuals:?}"
        );
    }

    #[test]
    fn mini_small_data_run_scatters() {
        // one desk-size run exercising the full pipeline end to end
        let (grid, dst, plan) = small_setup();
        let cfg = mini_cfg(0.02, 1.5);
        let u0 = RadialField::sample(&cfg.profile, &grid, cfg.tail_threshold).unwrap();
        let stream = evolve_from(&dst, u0.clone(), &cfg, cfg.dt).unwrap();
        let times: Vec<f64> = (0..6).map(|i| 0.25 + 0.25 * i as f64).collect();
        let state = extract_uplus(&plan, &stream, &times).unwrap();
        assert!(state.trace.converged);
        // mass of u_plus matches mass of u0 (unitarity + conservation)
        let m0 = u0.mass_sq().sqrt();
        assert!((state.u_plus.mass_sq().sqrt() - m0).abs() / m0 < 1e-6);
        // the asymptote differs from u0 by a genuine Duhamel correction
        let diff = dst.sigma_norm(&state.u_plus.sub(&u0));
        assert!(diff > 0.0 && diff < 1e-4, "sigma diff {diff}");
        let duhamel = first_duhamel_correction(&plan, &stream, 0.1).unwrap();
        let d_norm = dst.sigma_norm(&duhamel);
        let mismatch = dst.sigma_norm(&state.u_plus.sub(&u0).sub(&duhamel));
        assert!(
            mismatch <= 0.2 * d_norm,
            "duhamel {d_norm}, mismatch {mismatch}"
        );
    }
}
