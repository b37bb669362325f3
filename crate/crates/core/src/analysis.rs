use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::SnapshotStream;
use crate::field::RadialField;
use crate::spectral::{smooth_cutoff, Dst, MultiplierBank};

/// Default detection constant `c_det` in the threshold `c_det * eta1^{3/2}`.
pub const C_DET_DEFAULT: f64 = 0.1;

/// Default windowed-mass persistence radius constant `C(eta1, eta2)`.
pub const C_ETA12_DEFAULT: f64 = 8.0;

/// Solitonlike (bubble scale comparable to the interval scale) versus
/// concentrating (bubble strictly smaller).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Solitonlike,
    Concentrating,
}

/// Where and how a high-frequency bubble sits inside one interval.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BubbleReport {
    /// The interval `[a_j, b_j]` scanned.
    pub interval: (f64, f64),
    /// Snapshot time of the maximizing projection.
    pub t_j: f64,
    /// Maximizing dyadic level.
    pub n_j: f64,
    /// Radius maximizing `|P_{N_j} u|`; the radial analogue of the bubble
    /// center, asserted below `C_eta1 / N_j` and then recentered at 0.
    pub x_j: f64,
    /// `sigma_max = N_j^{1/2} ||P_{N_j} u(t_j)||_inf`.
    pub sigma_max: f64,
    /// Frequency floor `|I_j|^{-1/2} eta1^5`.
    pub n_j0: f64,
    /// Ball-restricted `L^6` norm at radius `C_eta1 / N_j` (from
    /// `verify_concentration`, zero until then).
    pub conc6: f64,
    /// Ball-restricted gradient `L^2` norm.
    pub conc_grad: f64,
    /// Ball-restricted `L^2` norm.
    pub conc2: f64,
    pub classification: Option<Classification>,
}

/// Detection outcome; sub-threshold peaks are a result, not an error.
#[derive(Debug, Clone)]
pub enum Detection {
    Bubble(BubbleReport),
    NoBubble { sigma_max: f64, n_j0: f64 },
}

impl Detection {
    pub fn report(&self) -> Option<&BubbleReport> {
        match self {
            Detection::Bubble(r) => Some(r),
            Detection::NoBubble { .. } => None,
        }
    }
}

/// Scans the snapshots of `interval` over every resolvable dyadic level at or
/// above the floor `N_{j0} = |I|^{-1/2} eta1^5`, maximizing
/// `sigma_N = N^{1/2} ||P_N u||_inf`.
///
/// Ties keep the earliest snapshot, then the lowest level; within one
/// projection the smallest radius wins (the on-axis value counts as r = 0).
pub fn detect_bubble(
    dst: &Dst,
    bank: &MultiplierBank,
    stream: &SnapshotStream,
    interval: (f64, f64),
    eta1: f64,
    c_det: f64,
) -> Result<Detection> {
    let snaps = stream.window(interval.0, interval.1)?;
    if snaps.is_empty() {
        return Err(Error::Window("interval holds no snapshots".into()));
    }
    let length = (interval.1 - interval.0).abs();
    if length == 0.0 {
        return Err(Error::Window("interval has zero length".into()));
    }
    let n_j0 = eta1.powi(5) / length.sqrt();
    let levels: Vec<f64> = bank
        .levels()
        .iter()
        .copied()
        .filter(|&l| l >= n_j0)
        .collect();
    if levels.is_empty() {
        return Err(Error::Resolution(format!(
            "no dyadic level at or above the floor {n_j0:.3e}"
        )));
    }
    let grid = dst.grid();
    let n = grid.n();
    let mut best: Option<(f64, f64, f64, f64)> = None; // (sigma, t, level, radius)
    for snap in snaps {
        let coeffs = dst.forward(snap);
        for &level in &levels {
            let mut proj = coeffs.clone();
            let idx = bank
                .levels()
                .iter()
                .position(|&l| l == level)
                .expect("level from the bank");
            for (c, &m) in proj.iter_mut().zip(bank.table(idx)) {
                *c *= m;
            }
            // on-axis value u(0) = w'(0) from the projected coefficients
            let u0 = proj
                .iter()
                .zip(grid.wavenumbers())
                .take(n - 1)
                .map(|(c, &k)| c * k)
                .sum::<num_complex::Complex64>()
                / n as f64;
            let projected = dst.backward(&proj, snap.time())?;
            let mut sup = u0.norm();
            let mut radius = 0.0;
            for (w, &r) in projected.w().iter().zip(grid.r()) {
                let v = w.norm() / r;
                if v > sup {
                    sup = v;
                    radius = r;
                }
            }
            let sigma = level.sqrt() * sup;
            let better = match &best {
                None => true,
                Some((s, ..)) => sigma > *s,
            };
            if better {
                best = Some((sigma, snap.time(), level, radius));
            }
        }
    }
    let (sigma_max, t_j, n_j, x_j) = best.expect("levels and snapshots nonempty");
    if sigma_max < c_det * eta1.powf(1.5) {
        return Ok(Detection::NoBubble { sigma_max, n_j0 });
    }
    Ok(Detection::Bubble(BubbleReport {
        interval,
        t_j,
        n_j,
        x_j,
        sigma_max,
        n_j0,
        conc6: 0.0,
        conc_grad: 0.0,
        conc2: 0.0,
        classification: None,
    }))
}

/// Ball-restricted concentration norms at radius `C_eta1 / N_j` around the
/// origin; returns the three pass flags against the detection thresholds and
/// stores the measured norms in the report.
pub fn verify_concentration(
    dst: &Dst,
    field: &RadialField,
    report: &mut BubbleReport,
    eta1: f64,
    c_eta1: f64,
    c_det: f64,
) -> Result<[bool; 3]> {
    let grid = dst.grid();
    let radius = c_eta1 / report.n_j;
    if radius > grid.r_max() {
        return Err(Error::Window(format!(
            "concentration ball radius {radius} exceeds the grid"
        )));
    }
    let r = grid.r();
    // L6 over the ball: 4 pi int |w|^6 r^{-4} dr
    let l6 = (4.0
        * std::f64::consts::PI
        * grid.trapezoid_ball(
            0.0,
            radius,
            field
                .w()
                .iter()
                .zip(r)
                .map(|(w, &r)| w.norm_sqr().powi(3) / r.powi(4)),
        ))
    .powf(1.0 / 6.0);
    // gradient L2 over the ball: 4 pi int |u_r|^2 r^2 dr, u_r = (w_r - w/r)/r
    let (w_r, _) = dst.derivative(field);
    let grad = (4.0
        * std::f64::consts::PI
        * grid.trapezoid_ball(
            0.0,
            radius,
            field
                .w()
                .iter()
                .zip(&w_r)
                .zip(r)
                .map(|((w, w_r), &r)| (w_r - w / r).norm_sqr()),
        ))
    .sqrt();
    // L2 over the ball
    let l2 = (4.0
        * std::f64::consts::PI
        * grid.trapezoid_ball(0.0, radius, field.w().iter().map(|w| w.norm_sqr())))
    .sqrt();
    report.conc6 = l6;
    report.conc_grad = grad;
    report.conc2 = l2;
    let threshold = c_det * eta1.powf(1.5);
    Ok([
        l6 >= threshold,
        grad >= threshold,
        l2 >= threshold / report.n_j,
    ])
}

/// Solitonlike iff `N_j <= (C_eta1 / eta2) |I_j|^{-1/2}` (inclusive).
///
/// A concentrating verdict also measures the gradient mass inside
/// `|x| < eta2 |I_j|^{1/2} / sqrt(2)` and compares it with the detection
/// threshold, echoing the blow-up-side concentration bound.
pub fn classify(
    dst: &Dst,
    field_at_tj: &RadialField,
    report: &mut BubbleReport,
    eta1: f64,
    eta2: f64,
    c_eta1: f64,
    c_det: f64,
) -> Result<Classification> {
    let length = (report.interval.1 - report.interval.0).abs();
    let threshold = c_eta1 / eta2 / length.sqrt();
    let class = if report.n_j <= threshold {
        Classification::Solitonlike
    } else {
        let radius = eta2 * length.sqrt() / 2f64.sqrt();
        let grid = dst.grid();
        let (w_r, _) = dst.derivative(field_at_tj);
        let grad_mass = (4.0
            * std::f64::consts::PI
            * grid.trapezoid_ball(
                0.0,
                radius,
                field_at_tj
                    .w()
                    .iter()
                    .zip(&w_r)
                    .zip(grid.r())
                    .map(|((w, w_r), &r)| (w_r - w / r).norm_sqr()),
            ))
        .sqrt();
        if grad_mass < c_det * eta1.powf(1.5) {
            return Err(Error::Resolution(format!(
                "concentrating verdict without gradient mass: {grad_mass:.3e} inside radius {radius:.3e}"
            )));
        }
        Classification::Concentrating
    };
    report.classification = Some(class);
    Ok(class)
}

/// Checks that the windowed mass `||u(t)||_{L^2(|x| <= C_eta12 |I|^{1/2})}`
/// stays above `c_pers |I|^{1/2}` at every snapshot of the interval, with
/// `c_pers = 0.05 eta1^{3/2} eta2` by default.
pub fn mass_persistence(
    stream: &SnapshotStream,
    interval: (f64, f64),
    eta1: f64,
    eta2: f64,
    c_eta12: f64,
) -> Result<bool> {
    let snaps = stream.window(interval.0, interval.1)?;
    let length = (interval.1 - interval.0).abs();
    let radius = c_eta12 * length.sqrt();
    let floor = 0.05 * eta1.powf(1.5) * eta2 * length.sqrt();
    for snap in snaps {
        let grid = snap.grid();
        let reach = radius.min(grid.r_max());
        let mass = (4.0
            * std::f64::consts::PI
            * grid.trapezoid_ball(0.0, reach, snap.w().iter().map(|w| w.norm_sqr())))
        .sqrt();
        if mass < floor {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Output of a bubble removal: the kept inner piece `v = phi u`, the cut
/// outer piece `w = u - v`, and the measured energy movements.
#[derive(Debug)]
pub struct BubbleRemoval {
    /// `v = phi u` (the bubble).
    pub kept: RadialField,
    /// `w = u - v`; reassembles with `kept` to `u` bitwise.
    pub cut: RadialField,
    /// `E1(u) - E1(w)`, the energy the removal frees.
    pub e1_drop: f64,
    /// `E2(w) - E2(u)`.
    pub e2_shift: f64,
    /// Index `N'` of the quiet annulus the cut radius came from.
    pub annulus: usize,
    /// `chi` transition starts here: `phi = chi(r / cut_radius)`.
    pub cut_radius: f64,
    /// Set when the drop is below 10% of `E1(u)` (no real concentration).
    pub flagged_small_drop: bool,
}

/// Removes the bubble behind a concentrating report: scans the annuli
/// `N' eta2 |I|^{1/2} <= r <= 2 N' eta2 |I|^{1/2}` for the first with
/// `||u||_{L^6(annulus)} <= eta1^4`, cuts there with the smooth `chi`, and
/// measures the energy drop.
pub fn remove_bubble(
    dst: &Dst,
    field: &RadialField,
    eta1: f64,
    eta2: f64,
    interval_len: f64,
) -> Result<BubbleRemoval> {
    let grid = dst.grid();
    let base = eta2 * interval_len.abs().sqrt();
    if base <= 0.0 {
        return Err(Error::Window("cut radius scale must be positive".into()));
    }
    let threshold = eta1.powi(4);
    let mut chosen = None;
    let mut n_prime = 1usize;
    while 2.0 * n_prime as f64 * base <= grid.r_max() {
        let lo = n_prime as f64 * base;
        let hi = 2.0 * lo;
        let l6 = (4.0
            * std::f64::consts::PI
            * grid.trapezoid(
                0.0,
                field.w().iter().zip(grid.r()).map(|(w, &r)| {
                    if r >= lo && r <= hi {
                        w.norm_sqr().powi(3) / r.powi(4)
                    } else {
                        0.0
                    }
                }),
            ))
        .powf(1.0 / 6.0);
        if l6 <= threshold {
            chosen = Some(n_prime);
            break;
        }
        n_prime += 1;
    }
    let annulus = chosen.ok_or(Error::AnnulusSearch { threshold })?;
    let cut_radius = annulus as f64 * base;
    Ok(remove_bubble_at(dst, field, cut_radius, annulus))
}

/// Cuts at an explicit radius (radius 0 degenerates to `v = 0`, `w = u`).
pub fn remove_bubble_at(
    dst: &Dst,
    field: &RadialField,
    cut_radius: f64,
    annulus: usize,
) -> BubbleRemoval {
    let grid = dst.grid();
    let phi: Vec<f64> = grid
        .r()
        .iter()
        .map(|&r| {
            if cut_radius == 0.0 {
                0.0
            } else {
                smooth_cutoff(r / cut_radius)
            }
        })
        .collect();
    let kept_w: Vec<num_complex::Complex64> =
        field.w().iter().zip(&phi).map(|(w, &p)| w * p).collect();
    // w = u - v keeps v + w = u exact in floating point
    let cut_w: Vec<num_complex::Complex64> =
        field.w().iter().zip(&kept_w).map(|(u, v)| u - v).collect();
    let kept = RadialField::from_samples(grid.clone(), kept_w, field.time())
        .expect("windowed samples stay finite");
    let cut = RadialField::from_samples(grid.clone(), cut_w, field.time())
        .expect("windowed samples stay finite");
    let e1 = |f: &RadialField| 0.5 * dst.gradient_norm_sq(f) + f.pot6() / 3.0;
    let e1_u = e1(field);
    let e1_drop = e1_u - e1(&cut);
    let e2_shift = 0.5 * (cut.xnorm_sq() - field.xnorm_sq());
    BubbleRemoval {
        flagged_small_drop: e1_drop < 0.1 * e1_u,
        kept,
        cut,
        e1_drop,
        e2_shift,
        annulus,
        cut_radius,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Profile;
    use crate::grid::RadialGrid;
    use num_complex::Complex64;
    use std::sync::Arc;

    fn setup() -> (Arc<RadialGrid>, Arc<Dst>, MultiplierBank) {
        let grid = RadialGrid::new(16.0, 1024).unwrap();
        let dst = Dst::new(&grid);
        let bank = MultiplierBank::new(&grid);
        (grid, dst, bank)
    }

    fn frozen_stream(field: &RadialField, t0: f64, t1: f64, count: usize) -> SnapshotStream {
        let mut snaps = Vec::with_capacity(count);
        for i in 0..count {
            let mut s = field.clone();
            s.set_time(t0 + (t1 - t0) * i as f64 / (count - 1) as f64);
            snaps.push(s);
        }
        SnapshotStream::synthetic(snaps, (t1 - t0) / (count - 1) as f64, 1)
    }

    fn concentrate(grid: &Arc<RadialGrid>, scale: f64) -> RadialField {
        RadialField::sample(&Profile::Concentrate { scale }, grid, 1e-6).unwrap()
    }

    #[test]
    fn detects_injected_bubble_within_one_dyadic() {
        let (grid, dst, bank) = setup();
        let f = concentrate(&grid, 16.0);
        let stream = frozen_stream(&f, 0.0, 16.0, 33);
        let det = detect_bubble(&dst, &bank, &stream, (0.0, 16.0), 0.5, C_DET_DEFAULT).unwrap();
        let rep = det.report().expect("bubble detected");
        assert!(
            [8.0, 16.0, 32.0].contains(&rep.n_j),
            "level {} not within one dyadic of 16",
            rep.n_j
        );
        assert!(rep.x_j < 2.0 / 16.0, "x_j = {}", rep.x_j);
        assert!(rep.sigma_max >= 0.1 * 0.5f64.powf(1.5));
        assert!(rep.n_j >= rep.n_j0);
    }

    #[test]
    fn zero_stream_has_no_bubble() {
        let (grid, dst, bank) = setup();
        let z = RadialField::zero(&grid, 0.0);
        let stream = frozen_stream(&z, 0.0, 1.0, 5);
        let det = detect_bubble(&dst, &bank, &stream, (0.0, 1.0), 0.5, C_DET_DEFAULT).unwrap();
        assert!(matches!(det, Detection::NoBubble { sigma_max, .. } if sigma_max == 0.0));
    }

    #[test]
    fn low_frequency_mode_below_floor_has_no_bubble() {
        let (grid, dst, bank) = setup();
        // single mode at k_1 ~ 0.196, below every annulus at or above N = 1
        let k1 = grid.wavenumbers()[0];
        let w: Vec<Complex64> = grid
            .r()
            .iter()
            .map(|&r| Complex64::new((k1 * r).sin(), 0.0))
            .collect();
        let f = RadialField::from_samples(grid.clone(), w, 0.0).unwrap();
        let stream = frozen_stream(&f, 0.0, 1.0, 5);
        // eta1 = 0.9 puts the floor at 0.9^5 = 0.59, so levels >= 1 are scanned
        let det = detect_bubble(&dst, &bank, &stream, (0.0, 1.0), 0.9, C_DET_DEFAULT).unwrap();
        match det {
            Detection::NoBubble { sigma_max, .. } => {
                assert!(sigma_max < 1e-10, "sigma {sigma_max}")
            }
            Detection::Bubble(r) => panic!("unexpected bubble: {r:?}"),
        }
    }

    #[test]
    fn unresolvable_floor_is_a_resolution_error() {
        let (grid, dst, bank) = setup();
        // eta1 = 0.9 and a 1e-6 window push the floor to ~590, above every level
        let f = concentrate(&grid, 16.0);
        let mut snaps = Vec::new();
        for i in 0..3 {
            let mut s = f.clone();
            s.set_time(i as f64 * 5e-7);
            snaps.push(s);
        }
        let stream = SnapshotStream::synthetic(snaps, 5e-7, 1);
        assert!(matches!(
            detect_bubble(&dst, &bank, &stream, (0.0, 1e-6), 0.9, C_DET_DEFAULT),
            Err(Error::Resolution(_))
        ));
    }

    #[test]
    fn oversized_concentration_ball_is_rejected() {
        let (grid, dst, _) = setup();
        let f = concentrate(&grid, 16.0);
        let mut rep = BubbleReport {
            interval: (0.0, 1.0),
            t_j: 0.0,
            n_j: 0.1, // ball radius C_eta1/N_j = 40 exceeds r_max = 16
            x_j: 0.0,
            sigma_max: 1.0,
            n_j0: 0.01,
            conc6: 0.0,
            conc_grad: 0.0,
            conc2: 0.0,
            classification: None,
        };
        assert!(verify_concentration(&dst, &f, &mut rep, 0.5, 4.0, C_DET_DEFAULT).is_err());
    }

    #[test]
    fn detection_is_scale_consistent() {
        let (grid, dst, bank) = setup();
        let mut found = Vec::new();
        for scale in [8.0, 16.0] {
            let f = concentrate(&grid, scale);
            let stream = frozen_stream(&f, 0.0, 16.0, 9);
            let det = detect_bubble(&dst, &bank, &stream, (0.0, 16.0), 0.5, C_DET_DEFAULT).unwrap();
            found.push(det.report().unwrap().n_j);
        }
        let ratio = found[1] / found[0];
        assert!(
            [1.0, 2.0, 4.0].contains(&ratio),
            "levels {found:?} ratio {ratio}"
        );
    }

    #[test]
    fn detection_is_phase_invariant() {
        let (grid, dst, bank) = setup();
        let f = concentrate(&grid, 16.0);
        let rotated = f.scaled(Complex64::from_polar(1.0, 1.234));
        let s1 = frozen_stream(&f, 0.0, 16.0, 5);
        let s2 = frozen_stream(&rotated, 0.0, 16.0, 5);
        let d1 = detect_bubble(&dst, &bank, &s1, (0.0, 16.0), 0.5, C_DET_DEFAULT).unwrap();
        let d2 = detect_bubble(&dst, &bank, &s2, (0.0, 16.0), 0.5, C_DET_DEFAULT).unwrap();
        let (r1, r2) = (d1.report().unwrap(), d2.report().unwrap());
        assert_eq!(r1.n_j, r2.n_j);
        assert_eq!(r1.x_j, r2.x_j);
        assert!((r1.sigma_max - r2.sigma_max).abs() < 1e-12 * r1.sigma_max);
    }

    #[test]
    fn concentration_norms_pass_on_synthetic() {
        let (grid, dst, bank) = setup();
        let f = concentrate(&grid, 16.0);
        let stream = frozen_stream(&f, 0.0, 16.0, 5);
        let det = detect_bubble(&dst, &bank, &stream, (0.0, 16.0), 0.5, C_DET_DEFAULT).unwrap();
        let mut rep = det.report().unwrap().clone();
        let flags = verify_concentration(&dst, &f, &mut rep, 0.5, 4.0, C_DET_DEFAULT).unwrap();
        assert_eq!(flags, [true, true, true], "norms: {rep:?}");
    }

    #[test]
    fn broad_field_fails_concentration_at_forced_high_level() {
        let (grid, dst, _) = setup();
        let mut rep = BubbleReport {
            interval: (0.0, 1.0),
            t_j: 0.0,
            n_j: 32.0,
            x_j: 0.0,
            sigma_max: 0.0,
            n_j0: 0.0,
            conc6: 0.0,
            conc_grad: 0.0,
            conc2: 0.0,
            classification: None,
        };
        // unit-amplitude smooth gaussian: no high-frequency gradient content,
        // so the gradient flag fails inside the tiny ball C_eta1/32 = 0.125
        // (the scale-critical L6 and the N_j-weighted L2 stay order one)
        let f = RadialField::sample(
            &Profile::Gaussian {
                amplitude: 1.0,
                width: 1.0,
            },
            &grid,
            1e-6,
        )
        .unwrap();
        let flags = verify_concentration(&dst, &f, &mut rep, 0.5, 4.0, C_DET_DEFAULT).unwrap();
        assert!(!flags[1], "gradient norm {}", rep.conc_grad);
        // a dim gaussian (which no detection would ever flag) fails all three
        let dim = f.scaled(Complex64::new(0.01, 0.0));
        let flags = verify_concentration(&dst, &dim, &mut rep, 0.5, 4.0, C_DET_DEFAULT).unwrap();
        assert_eq!(flags, [false, false, false]);
        // zero field: all false
        let z = RadialField::zero(&grid, 0.0);
        let flags = verify_concentration(&dst, &z, &mut rep, 0.5, 4.0, C_DET_DEFAULT).unwrap();
        assert_eq!(flags, [false, false, false]);
    }

    #[test]
    fn classification_flips_across_the_frequency_threshold() {
        let (grid, dst, bank) = setup();
        let (eta1, eta2, c_eta1) = (0.5, 0.0625, 4.0);
        // |I| = 16: threshold (C_eta1/eta2)|I|^{-1/2} = 64/4 = 16
        let mut verdicts = Vec::new();
        for scale in [4.0, 32.0] {
            let f = concentrate(&grid, scale);
            let stream = frozen_stream(&f, 0.0, 16.0, 5);
            let det =
                detect_bubble(&dst, &bank, &stream, (0.0, 16.0), eta1, C_DET_DEFAULT).unwrap();
            let mut rep = det.report().unwrap().clone();
            let class = classify(&dst, &f, &mut rep, eta1, eta2, c_eta1, C_DET_DEFAULT).unwrap();
            verdicts.push(class);
        }
        assert_eq!(verdicts[0], Classification::Solitonlike);
        assert_eq!(verdicts[1], Classification::Concentrating);
    }

    #[test]
    fn boundary_level_is_solitonlike() {
        let (grid, dst, _) = setup();
        let f = concentrate(&grid, 16.0);
        let mut rep = BubbleReport {
            interval: (0.0, 16.0),
            t_j: 0.0,
            n_j: 16.0, // exactly (C_eta1/eta2) |I|^{-1/2} with the defaults below
            x_j: 0.0,
            sigma_max: 1.0,
            n_j0: 0.01,
            conc6: 0.0,
            conc_grad: 0.0,
            conc2: 0.0,
            classification: None,
        };
        let class = classify(&dst, &f, &mut rep, 0.5, 0.0625, 4.0, C_DET_DEFAULT).unwrap();
        assert_eq!(class, Classification::Solitonlike);
    }

    #[test]
    fn floor_level_is_solitonlike_for_defaults() {
        // N_j = N_j0 = eta1^5 |I|^{-1/2} vs threshold (C_eta1/eta2)|I|^{-1/2}:
        // solitonlike whenever eta1^5 <= C_eta1/eta2
        let (eta1, eta2, c_eta1): (f64, f64, f64) = (0.5, 0.0625, 4.0);
        assert!(eta1.powi(5) <= c_eta1 / eta2);
    }

    #[test]
    fn mass_persists_for_standing_bump_but_not_escaping_one() {
        let (grid, _, _) = setup();
        let f = RadialField::sample(
            &Profile::Bump {
                amplitude: 1.0,
                width: 0.5,
                center: 1.0,
            },
            &grid,
            1e-6,
        )
        .unwrap();
        let standing = frozen_stream(&f, 0.0, 1.0, 11);
        assert!(mass_persistence(&standing, (0.0, 1.0), 0.5, 0.0625, C_ETA12_DEFAULT).unwrap());

        // bump walks out of the persistence window radius 8
        let mut snaps = Vec::new();
        for i in 0..11 {
            let center = 1.0 + 13.0 * i as f64 / 10.0;
            let mut s = RadialField::sample(
                &Profile::Bump {
                    amplitude: 1.0,
                    width: 0.3,
                    center,
                },
                &grid,
                1.0,
            )
            .unwrap();
            s.set_time(i as f64 * 0.1);
            snaps.push(s);
        }
        let escaping = SnapshotStream::synthetic(snaps, 0.1, 1);
        assert!(!mass_persistence(&escaping, (0.0, 1.0), 0.5, 0.0625, C_ETA12_DEFAULT).unwrap());

        // zero stream: false
        let z = frozen_stream(&RadialField::zero(&grid, 0.0), 0.0, 1.0, 3);
        assert!(!mass_persistence(&z, (0.0, 1.0), 0.5, 0.0625, C_ETA12_DEFAULT).unwrap());
    }

    fn composite(grid: &Arc<RadialGrid>) -> (RadialField, RadialField) {
        // broad low background plus a sharp concentrate(32) bubble
        let bubble = concentrate(grid, 32.0);
        let broad = RadialField::sample(
            &Profile::Gaussian {
                amplitude: 0.1,
                width: 1.0,
            },
            grid,
            1e-6,
        )
        .unwrap();
        let w: Vec<Complex64> = bubble
            .w()
            .iter()
            .zip(broad.w())
            .map(|(a, b)| a + b)
            .collect();
        (
            RadialField::from_samples(grid.clone(), w, 0.0).unwrap(),
            bubble,
        )
    }

    #[test]
    fn removal_reassembles_and_frees_bubble_energy() {
        let (grid, dst, _) = setup();
        let (u, bubble) = composite(&grid);
        let removal = remove_bubble(&dst, &u, 0.5, 0.0625, 16.0).unwrap();
        // pieces reassemble at machine precision (w := u - v leaves at most
        // one rounding per sample in v + w)
        let mut sum = removal.kept.clone();
        for (s, w) in sum.w_mut().iter_mut().zip(removal.cut.w()) {
            *s += w;
        }
        assert!(sum.l2_distance(&u) <= 1e-15 * u.mass_sq().sqrt());
        // the freed energy covers at least half the isolated bubble's E1
        let e1_bubble = 0.5 * dst.gradient_norm_sq(&bubble) + bubble.pot6() / 3.0;
        assert!(
            removal.e1_drop >= 0.5 * e1_bubble,
            "drop {} vs bubble E1 {}",
            removal.e1_drop,
            e1_bubble
        );
        assert!(!removal.flagged_small_drop);
        assert!(removal.cut_radius >= eta_cut_floor());
    }

    fn eta_cut_floor() -> f64 {
        0.0625 * 16f64.sqrt() // one annulus width at the test constants
    }

    #[test]
    fn degenerate_radius_keeps_everything() {
        let (grid, dst, _) = setup();
        let (u, _) = composite(&grid);
        let removal = remove_bubble_at(&dst, &u, 0.0, 0);
        assert_eq!(removal.e1_drop, 0.0);
        assert_eq!(removal.e2_shift, 0.0);
        assert!(removal.cut.l2_distance(&u) == 0.0);
        assert_eq!(removal.kept.mass_sq(), 0.0);
    }

    #[test]
    fn smooth_gaussian_removal_is_flagged() {
        let (grid, dst, _) = setup();
        let f = RadialField::sample(
            &Profile::Gaussian {
                amplitude: 0.05,
                width: 1.0,
            },
            &grid,
            1e-6,
        )
        .unwrap();
        let removal = remove_bubble(&dst, &f, 0.5, 0.0625, 16.0).unwrap();
        assert!(removal.flagged_small_drop, "drop {}", removal.e1_drop);
        assert!(removal.e1_drop < 0.1 * (0.5 * dst.gradient_norm_sq(&f) + f.pot6() / 3.0));
    }

    #[test]
    fn energy_superadditivity_audit() {
        let (grid, dst, _) = setup();
        let (u, _) = composite(&grid);
        let removal = remove_bubble(&dst, &u, 0.5, 0.0625, 16.0).unwrap();
        let e1 = |f: &RadialField| 0.5 * dst.gradient_norm_sq(f) + f.pot6() / 3.0;
        // cross-term bound from the annulus L6 smallness and the total gradient
        let annulus_l6 = 0.5f64.powi(4); // the search guarantees <= eta1^4
        let grad_u = dst.gradient_norm_sq(&u).sqrt();
        let cross = 4.0 * (annulus_l6 * annulus_l6 + annulus_l6 * grad_u);
        assert!(
            e1(&removal.kept) + e1(&removal.cut) <= e1(&u) + cross,
            "superadditivity: {} + {} vs {} + {}",
            e1(&removal.kept),
            e1(&removal.cut),
            e1(&u),
            cross
        );
        // measured drop clears the concentration mass minus the cross terms
        let mut rep = BubbleReport {
            interval: (0.0, 16.0),
            t_j: 0.0,
            n_j: 32.0,
            x_j: 0.0,
            sigma_max: 1.0,
            n_j0: 0.01,
            conc6: 0.0,
            conc_grad: 0.0,
            conc2: 0.0,
            classification: None,
        };
        verify_concentration(&dst, &u, &mut rep, 0.5, 4.0, C_DET_DEFAULT).unwrap();
        assert!(removal.e1_drop >= 0.5 * rep.conc_grad.powi(2) - cross);
    }

    #[test]
    fn annulus_search_fails_when_nothing_is_quiet() {
        let (grid, dst, _) = setup();
        // large constant-amplitude field: every annulus is loud
        let w: Vec<Complex64> = grid
            .r()
            .iter()
            .map(|&r| Complex64::new(r * 2.0, 0.0))
            .collect();
        let f = RadialField::from_samples(grid.clone(), w, 0.0).unwrap();
        assert!(matches!(
            remove_bubble(&dst, &f, 0.5, 0.0625, 16.0),
            Err(Error::AnnulusSearch { .. })
        ));
    }
}
