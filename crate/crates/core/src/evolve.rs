use std::sync::Arc;

use num_complex::Complex64;

use crate::config::{RunConfig, DT_SAFETY};
use crate::error::{Error, Result};
use crate::field::RadialField;
use crate::grid::RadialGrid;
use crate::spectral::Dst;

/// Ordered trajectory samples of one evolution, with the step metadata the
/// time-integrated diagnostics need.
#[derive(Debug, Clone)]
pub struct SnapshotStream {
    snapshots: Vec<RadialField>,
    dt: f64,
    stride: usize,
    step_count: u64,
    tail_trace: Vec<f64>,
}

impl SnapshotStream {
    pub fn snapshots(&self) -> &[RadialField] {
        &self.snapshots
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn tail_trace(&self) -> &[f64] {
        &self.tail_trace
    }

    pub fn first(&self) -> &RadialField {
        &self.snapshots[0]
    }

    pub fn last(&self) -> &RadialField {
        self.snapshots.last().expect("stream is never empty")
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.snapshots.iter().map(|s| s.time())
    }

    /// Snapshots with `a <= t <= b` (inclusive, with rounding slack).
    pub fn window(&self, a: f64, b: f64) -> Result<&[RadialField]> {
        let eps = 0.5 * self.dt * self.stride as f64;
        let lo = self
            .snapshots
            .iter()
            .position(|s| s.time() >= a - eps)
            .ok_or_else(|| Error::Window(format!("window [{a}, {b}] outside stream")))?;
        let hi = self
            .snapshots
            .iter()
            .rposition(|s| s.time() <= b + eps)
            .ok_or_else(|| Error::Window(format!("window [{a}, {b}] outside stream")))?;
        if hi < lo {
            return Err(Error::Window(format!(
                "window [{a}, {b}] holds no snapshots"
            )));
        }
        Ok(&self.snapshots[lo..=hi])
    }

    /// Builds a stream from preassembled fields (synthetic test inputs).
    pub fn synthetic(snapshots: Vec<RadialField>, dt: f64, stride: usize) -> Self {
        let tail_trace = snapshots.iter().map(|s| s.tail_fraction()).collect();
        let step_count = snapshots.len().saturating_sub(1) as u64 * stride as u64;
        Self {
            snapshots,
            dt,
            stride,
            step_count,
            tail_trace,
        }
    }
}

/// Cached phase machinery for repeated Strang steps at one `dt`.
struct Stepper {
    dst: Arc<Dst>,
    kinetic: Vec<Complex64>,
    dt: f64,
}

impl Stepper {
    fn new(dst: &Arc<Dst>, dt: f64) -> Self {
        let kinetic = dst
            .grid()
            .wavenumbers()
            .iter()
            .map(|&k| Complex64::from_polar(1.0, -k * k * dt / 2.0))
            .collect();
        Self {
            dst: dst.clone(),
            kinetic,
            dt,
        }
    }

    /// Half-step physical phase `w -> exp(i dt/2 (r^2/2 - |u|^4)) w`.
    ///
    /// Potential and quintic phases commute pointwise, so the physical
    /// substep is exact and the splitting error sits entirely in the
    /// kinetic/physical non-commutation.
    fn half_physical(&self, field: &mut RadialField) {
        let r = self.dst.grid().r();
        for (w, &r) in field.w_mut().iter_mut().zip(r) {
            let u2 = w.norm_sqr() / (r * r);
            let theta = self.dt / 2.0 * (r * r / 2.0 - u2 * u2);
            *w *= Complex64::from_polar(1.0, theta);
        }
    }

    fn step(&self, field: &mut RadialField) {
        self.half_physical(field);
        let mut coeffs = self.dst.forward(field);
        for (c, ph) in coeffs.iter_mut().zip(&self.kinetic) {
            *c *= ph;
        }
        let t = field.time();
        *field = self
            .dst
            .backward(&coeffs, t)
            .expect("coefficient length matches grid");
        self.half_physical(field);
    }
}

/// One Strang step of the full equation; exactly mass-preserving.
pub fn step(dst: &Arc<Dst>, field: &RadialField, dt: f64) -> Result<RadialField> {
    let dr = dst.grid().dr();
    if dt.abs() > DT_SAFETY * dr * dr {
        return Err(Error::Config(format!(
            "dt = {dt} exceeds dt_max = {:.3e} for this grid",
            DT_SAFETY * dr * dr
        )));
    }
    let stepper = Stepper::new(dst, dt);
    let mut out = field.clone();
    stepper.step(&mut out);
    out.set_time(field.time() + dt);
    Ok(out)
}

/// Evolves the configured profile from t = 0 to `t_end` (or to `-t_end`
/// when `backward` is set), snapshotting every `snapshot_stride` steps.
pub fn evolve_signed(config: &RunConfig, backward: bool) -> Result<SnapshotStream> {
    config.validate()?;
    let grid = RadialGrid::new(config.r_max, config.n)?;
    let dst = Dst::new(&grid);
    let u0 = RadialField::sample(&config.profile, &grid, config.tail_threshold)?;
    evolve_from(
        &dst,
        u0,
        config,
        if backward { -config.dt } else { config.dt },
    )
}

/// Forward evolution per the config.
pub fn evolve(config: &RunConfig) -> Result<SnapshotStream> {
    evolve_signed(config, false)
}

/// Evolves an explicit initial state (need not come from a profile).
pub fn evolve_from(
    dst: &Arc<Dst>,
    u0: RadialField,
    config: &RunConfig,
    signed_dt: f64,
) -> Result<SnapshotStream> {
    let steps = (config.t_end / config.dt).round() as u64;
    let stepper = Stepper::new(dst, signed_dt);
    let t0 = u0.time();
    let mut state = u0;
    let mut snapshots = Vec::with_capacity(steps as usize / config.snapshot_stride + 2);
    let mut tail_trace = Vec::with_capacity(snapshots.capacity());
    tail_trace.push(state.tail_fraction());
    snapshots.push(state.clone());
    for i in 1..=steps {
        stepper.step(&mut state);
        state.set_time(t0 + i as f64 * signed_dt);
        let tail = state.tail_fraction();
        if tail > config.tail_threshold {
            return Err(Error::Truncation {
                time: state.time(),
                tail,
                threshold: config.tail_threshold,
            });
        }
        if i % config.snapshot_stride as u64 == 0 || i == steps {
            tail_trace.push(tail);
            snapshots.push(state.clone());
        }
    }
    Ok(SnapshotStream {
        snapshots,
        dt: signed_dt,
        stride: config.snapshot_stride,
        step_count: steps,
        tail_trace,
    })
}

/// Richardson order estimate `log2(||u_h - u_{h/2}|| / ||u_{h/2} - u_{h/4}||)`
/// at `t_end` from three runs sharing grid and window.
pub fn convergence_order(config: &RunConfig) -> Result<f64> {
    let run = |dt: f64| -> Result<RadialField> {
        let mut cfg = config.clone();
        cfg.dt = dt;
        Ok(evolve(&cfg)?.last().clone())
    };
    let u_h = run(config.dt)?;
    let u_h2 = run(config.dt / 2.0)?;
    let u_h4 = run(config.dt / 4.0)?;
    if !(u_h.is_finite() && u_h2.is_finite() && u_h4.is_finite()) {
        return Err(Error::Resolution(
            "non-finite fields in order estimate".into(),
        ));
    }
    let coarse = u_h.l2_distance(&u_h2);
    let fine = u_h2.l2_distance(&u_h4);
    if coarse == 0.0 || fine == 0.0 {
        return Err(Error::UndefinedRatio(
            "degenerate (zero-difference) order estimate".into(),
        ));
    }
    Ok((coarse / fine).log2())
}
