use crate::error::{Error, Result};
use crate::evolve::SnapshotStream;
use crate::field::RadialField;
use crate::linear::{galilean_apply, Galilean, GalileanMethod};
use crate::spectral::{smooth_cutoff, Dst};

/// Conserved and monotone scalar quantities of one field at one time.
///
/// `energy = e1 - e2` throughout; the pseudo-energies `cal_e1`, `cal_e2` are
/// the Galilean-twisted halves that decay monotonically in |t| and coincide
/// with `e1`, `e2` at t = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyLedger {
    pub time: f64,
    /// `|| u ||_2`
    pub mass: f64,
    /// `(1/2)||grad u||^2 - (1/2)||x u||^2 + (1/3)||u||_6^6`
    pub energy: f64,
    /// `(1/2)||grad u||^2 + (1/3)||u||_6^6`
    pub e1: f64,
    /// `(1/2)||x u||^2`
    pub e2: f64,
    /// `(1/2)||J(t) u||^2 + (1/3) cosh^2 t ||u||_6^6`
    pub cal_e1: f64,
    /// `(1/2)||H(t) u||^2 + (1/3) sinh^2 t ||u||_6^6`
    pub cal_e2: f64,
    /// `||u||_6^6`
    pub pot6: f64,
}

/// Computes the full ledger for one field.
pub fn ledger(dst: &Dst, field: &RadialField) -> EnergyLedger {
    let t = field.time();
    let pot6 = field.pot6();
    let grad_sq = dst.gradient_norm_sq(field);
    let x_sq = field.xnorm_sq();
    let e1 = 0.5 * grad_sq + pot6 / 3.0;
    let e2 = 0.5 * x_sq;
    let ju = galilean_apply(dst, field, t, Galilean::J, GalileanMethod::Direct)
        .expect("direct galilean cannot fail");
    let hu = galilean_apply(dst, field, t, Galilean::H, GalileanMethod::Direct)
        .expect("direct galilean cannot fail");
    let ch = t.cosh();
    let sh = t.sinh();
    EnergyLedger {
        time: t,
        mass: field.mass_sq().sqrt(),
        energy: e1 - e2,
        e1,
        e2,
        cal_e1: 0.5 * ju.mass_sq() + ch * ch * pot6 / 3.0,
        cal_e2: 0.5 * hu.mass_sq() + sh * sh * pot6 / 3.0,
        pot6,
    }
}

/// Per-snapshot ledgers of a stream.
pub fn ledger_series(dst: &Dst, stream: &SnapshotStream) -> Vec<EnergyLedger> {
    stream.snapshots().iter().map(|s| ledger(dst, s)).collect()
}

/// Potential-energy decay margins `3 E1(0) cosh^{-6} t - ||u(t)||_6^6`
/// per snapshot; all must stay above `-tol` on forward runs.
pub fn decay_margin(ledgers: &[EnergyLedger]) -> Result<Vec<(f64, f64)>> {
    let first = ledgers
        .first()
        .ok_or_else(|| Error::Window("empty stream".into()))?;
    let e1_0 = first.e1;
    Ok(ledgers
        .iter()
        .map(|l| (l.time, 3.0 * e1_0 / l.time.cosh().powi(6) - l.pot6))
        .collect())
}

/// Residuals and monotonicity checks for the pseudo-energy identity
/// `d cal_e1/dt = d cal_e2/dt = -(2/3) sinh(2t) ||u||_6^6`.
#[derive(Debug, Clone)]
pub struct EnergyIdentityReport {
    /// `(t_i, residual)` of the centered finite difference of `cal_e1`
    /// against the exact right side, normalized by `E1(0)`.
    pub residuals: Vec<(f64, f64)>,
    pub max_abs_residual: f64,
    /// Worst per-step increase of `cal_e1` (positive means non-monotone).
    pub cal_e1_worst_increase: f64,
    pub cal_e2_worst_increase: f64,
    /// `max_t ||H(t) u||_2 / ||x u_0||_2 - 1`.
    pub h_bound_excess: f64,
}

pub fn energy_identity_residual(ledgers: &[EnergyLedger]) -> Result<EnergyIdentityReport> {
    if ledgers.len() < 3 {
        return Err(Error::Window("need at least 3 snapshots".into()));
    }
    let e1_0 = ledgers[0].e1.max(f64::MIN_POSITIVE);
    let mut residuals = Vec::with_capacity(ledgers.len() - 2);
    let mut max_abs: f64 = 0.0;
    for w in ledgers.windows(3) {
        let (a, b, c) = (&w[0], &w[1], &w[2]);
        let fd = (c.cal_e1 - a.cal_e1) / (c.time - a.time);
        let rhs = -2.0 / 3.0 * (2.0 * b.time).sinh() * b.pot6;
        let res = (fd - rhs) / e1_0;
        residuals.push((b.time, res));
        max_abs = max_abs.max(res.abs());
    }
    let mut e1_inc: f64 = f64::NEG_INFINITY;
    let mut e2_inc: f64 = f64::NEG_INFINITY;
    for w in ledgers.windows(2) {
        // cal_e decays in |t|, and |t| grows along the run order for both
        // forward and backward runs started at t = 0
        e1_inc = e1_inc.max(w[1].cal_e1 - w[0].cal_e1);
        e2_inc = e2_inc.max(w[1].cal_e2 - w[0].cal_e2);
    }
    let x0 = (2.0 * ledgers[0].e2).sqrt();
    let h_excess = ledgers
        .iter()
        .map(|l| {
            let h_norm_sq = (2.0 * (l.cal_e2 - l.time.sinh().powi(2) * l.pot6 / 3.0)).max(0.0);
            if x0 == 0.0 {
                0.0
            } else {
                h_norm_sq.sqrt() / x0 - 1.0
            }
        })
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(EnergyIdentityReport {
        residuals,
        max_abs_residual: max_abs,
        cal_e1_worst_increase: e1_inc,
        cal_e2_worst_increase: e2_inc,
        h_bound_excess: h_excess,
    })
}

/// Smooth local-mass cutoff: 1 on `s <= 1/2`, 0 on `s >= 1`.
pub fn chi_local_mass(s: f64) -> f64 {
    smooth_cutoff(2.0 * s)
}

/// Windowed mass `(integral chi^2(|x|/R) |u|^2 dx)^{1/2}` centered at the
/// origin (radial data concentrates there or nowhere).
pub fn local_mass(field: &RadialField, radius: f64) -> Result<f64> {
    let grid = field.grid();
    if !(radius > 0.0 && radius <= grid.r_max() / 2.0) {
        return Err(Error::Window(format!(
            "local-mass radius {radius} outside (0, r_max/2]"
        )));
    }
    let integral = grid.trapezoid(
        0.0,
        field.w().iter().zip(grid.r()).map(|(w, &r)| {
            let chi = chi_local_mass(r / radius);
            chi * chi * w.norm_sqr()
        }),
    );
    Ok((4.0 * std::f64::consts::PI * integral).sqrt())
}

/// Morawetz functional over a window: the weighted space-time integral, its
/// envelope, and their ratio (the empirical constant of the inequality).
#[derive(Debug, Clone, Copy)]
pub struct MorawetzReport {
    /// `integral_I integral_{|x| <= A |I|^{1/2}} |u|^6 / |x| dx dt`
    pub lhs: f64,
    /// `A |I|^{1/2} sup_I (||grad u||^2 + ||x u||^2 + ||u||_6^6)`
    pub envelope: f64,
    pub ratio: f64,
}

pub fn morawetz(
    dst: &Dst,
    stream: &SnapshotStream,
    window: (f64, f64),
    a_factor: f64,
) -> Result<MorawetzReport> {
    if a_factor < 1.0 {
        return Err(Error::Window("Morawetz requires A >= 1".into()));
    }
    let snaps = stream.window(window.0, window.1)?;
    if snaps.len() < 2 {
        return Err(Error::Window("Morawetz window needs >= 2 snapshots".into()));
    }
    let length = window.1 - window.0;
    let radius = a_factor * length.abs().sqrt();
    let grid = snaps[0].grid();
    if radius > grid.r_max() {
        return Err(Error::Window(format!(
            "ball radius {radius} exceeds grid r_max {}",
            grid.r_max()
        )));
    }
    // spatial integrand |u|^6/|x| reduces to 4 pi |w|^6 r^{-5}
    let spatial: Vec<f64> = snaps
        .iter()
        .map(|s| {
            4.0 * std::f64::consts::PI
                * grid.trapezoid_ball(
                    0.0,
                    radius,
                    s.w()
                        .iter()
                        .zip(grid.r())
                        .map(|(w, &r)| w.norm_sqr().powi(3) / r.powi(5)),
                )
        })
        .collect();
    let lhs = time_trapezoid(snaps, &spatial);
    let sup = snaps
        .iter()
        .map(|s| dst.gradient_norm_sq(s) + s.xnorm_sq() + s.pot6())
        .fold(0.0_f64, f64::max);
    let envelope = radius * sup;
    Ok(MorawetzReport {
        lhs,
        envelope,
        ratio: if envelope == 0.0 { 0.0 } else { lhs / envelope },
    })
}

fn time_trapezoid(snaps: &[RadialField], values: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 1..snaps.len() {
        let dt = snaps[i].time() - snaps[i - 1].time();
        acc += 0.5 * (values[i] + values[i - 1]) * dt;
    }
    acc
}

/// Space-time Lebesgue norm `( integral_I ||u(t)||_r^q dt )^{1/q}` by
/// trapezoid over the snapshots inside the window.
pub fn spacetime_norm(stream: &SnapshotStream, window: (f64, f64), q: f64, r: f64) -> Result<f64> {
    let snaps = stream.window(window.0, window.1)?;
    if snaps.is_empty() {
        return Err(Error::Window("empty window".into()));
    }
    if snaps.len() == 1 {
        return Ok(0.0);
    }
    let values: Vec<f64> = snaps.iter().map(|s| s.lp_norm(r).powf(q)).collect();
    Ok(time_trapezoid(snaps, &values).powf(1.0 / q))
}

/// One interval of a partition with its space-time L10 norm.
#[derive(Debug, Clone, Copy)]
pub struct PartitionInterval {
    pub a: f64,
    pub b: f64,
    pub l10: f64,
    /// Set when a single snapshot step pushed the norm past `2 eta1`.
    pub overshoot: bool,
}

/// Greedy left-to-right subdivision of a window into intervals whose
/// `L^10(I; L^10)` norms land in `[eta1, 2 eta1]` at snapshot granularity.
#[derive(Debug, Clone)]
pub struct IntervalPartition {
    pub eta1: f64,
    pub intervals: Vec<PartitionInterval>,
    /// The whole window never reached `eta1`; one flagged interval results.
    pub sub_threshold: bool,
}

pub fn partition_intervals(
    stream: &SnapshotStream,
    window: (f64, f64),
    eta1: f64,
) -> Result<IntervalPartition> {
    if !(eta1 > 0.0 && eta1 < 1.0) {
        return Err(Error::Window("eta1 must lie in (0,1)".into()));
    }
    let snaps = stream.window(window.0, window.1)?;
    if snaps.len() < 2 {
        return Err(Error::Window("partition needs >= 2 snapshots".into()));
    }
    let tenth: Vec<f64> = snaps.iter().map(|s| s.lp_norm(10.0).powi(10)).collect();
    let target = eta1.powi(10);
    let cap = (2.0 * eta1).powi(10);
    let mut intervals = Vec::new();
    let mut start = 0usize;
    let mut acc = 0.0;
    for i in 1..snaps.len() {
        let inc = 0.5 * (tenth[i] + tenth[i - 1]) * (snaps[i].time() - snaps[i - 1].time());
        acc += inc;
        if acc >= target {
            intervals.push(PartitionInterval {
                a: snaps[start].time(),
                b: snaps[i].time(),
                l10: acc.powf(0.1),
                overshoot: acc > cap,
            });
            start = i;
            acc = 0.0;
        }
    }
    let sub_threshold = intervals.is_empty();
    if start + 1 < snaps.len() || sub_threshold {
        // trailing (or sole) interval below eta1
        intervals.push(PartitionInterval {
            a: snaps[start].time(),
            b: snaps[snaps.len() - 1].time(),
            l10: acc.powf(0.1),
            overshoot: false,
        });
    }
    Ok(IntervalPartition {
        eta1,
        intervals,
        sub_threshold,
    })
}

/// `sum_j |I_j|^{1/2}` over a partition and its ratio to `|I|^{1/2}`,
/// the empirical interval-sum constant.
pub fn morawetz_interval_sum(partition: &IntervalPartition, window: (f64, f64)) -> (f64, f64) {
    let sum: f64 = partition
        .intervals
        .iter()
        .map(|iv| (iv.b - iv.a).abs().sqrt())
        .sum();
    let denom = (window.1 - window.0).abs().sqrt();
    (sum, if denom == 0.0 { f64::NAN } else { sum / denom })
}

/// Horizon `T0` past which the decay law caps `||u(t)||_6` by `eps`:
/// `3 E1(0) cosh^{-6} T0 = eps^6`.
pub fn decay_horizon(e1_0: f64, eps: f64) -> f64 {
    assert!(eps > 0.0, "decay horizon needs eps > 0");
    if e1_0 <= 0.0 {
        return 0.0;
    }
    let c = (3.0 * e1_0 / eps.powi(6)).powf(1.0 / 6.0);
    c.max(1.0).acosh()
}
