use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::field::RadialField;
use crate::grid::RadialGrid;

/// Sine-spectral transform layer for one grid.
///
/// The forward transform is a DST-I realized through an odd-extension
/// complex FFT of length `2n`:
///
///   c_m = 2 * sum_{j=1}^{n-1} w_j sin(pi m j / n),   m = 1..=n
///
/// and the backward transform reconstructs `w_j = (1/n) sum_m c_m sin(pi m j / n)`.
/// With this pairing, Parseval reads `sum_j |w_j|^2 = (1/(2n)) sum_m |c_m|^2`.
/// The coefficient at m = n is identically zero (its mode vanishes at every
/// grid point), and the sample at `r_max` is pinned to the Dirichlet value by
/// every round trip.
pub struct Dst {
    grid: Arc<RadialGrid>,
    fft: Arc<dyn Fft<f64>>,
}

impl Dst {
    pub fn new(grid: &Arc<RadialGrid>) -> Arc<Self> {
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(2 * grid.n());
        Arc::new(Self {
            grid: grid.clone(),
            fft,
        })
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    /// Core sine sum `s_m = sum_{j=1}^{n-1} x_j sin(pi m j / n)` for m = 1..=n.
    /// Scratch is allocated per call so concurrent invocations are safe.
    fn sine_sum(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.grid.n();
        debug_assert_eq!(x.len(), n);
        let mut buf = vec![Complex64::ZERO; 2 * n];
        for j in 1..n {
            buf[j] = x[j - 1];
            buf[2 * n - j] = -x[j - 1];
        }
        let mut scratch = vec![Complex64::ZERO; self.fft.get_inplace_scratch_len()];
        self.fft.process_with_scratch(&mut buf, &mut scratch);
        let half_i = Complex64::new(0.0, 0.5);
        (1..=n).map(|m| half_i * buf[m]).collect()
    }

    /// Cosine evaluation `C_j = sum_{m=1}^{n-1} a_m cos(pi m j / n)` for j = 1..=n.
    fn cosine_sum(&self, a: &[Complex64]) -> Vec<Complex64> {
        let n = self.grid.n();
        debug_assert_eq!(a.len(), n);
        let mut buf = vec![Complex64::ZERO; 2 * n];
        for m in 1..n {
            buf[m] = a[m - 1];
            buf[2 * n - m] = a[m - 1];
        }
        let mut scratch = vec![Complex64::ZERO; self.fft.get_inplace_scratch_len()];
        self.fft.process_with_scratch(&mut buf, &mut scratch);
        (1..=n).map(|j| 0.5 * buf[j]).collect()
    }

    /// Forward sine coefficients of a field.
    pub fn forward(&self, field: &RadialField) -> Vec<Complex64> {
        assert!(field.grid().same_as(&self.grid), "grid mismatch");
        self.sine_sum(field.w())
            .into_iter()
            .map(|s| 2.0 * s)
            .collect()
    }

    /// Inverse transform back to physical samples.
    pub fn backward(&self, coeffs: &[Complex64], time: f64) -> Result<RadialField> {
        let n = self.grid.n();
        if coeffs.len() != n {
            return Err(Error::Config(format!(
                "coefficient length {} does not match grid n = {n}",
                coeffs.len()
            )));
        }
        let scale = 1.0 / n as f64;
        let w: Vec<Complex64> = self
            .sine_sum(coeffs)
            .into_iter()
            .map(|s| scale * s)
            .collect();
        RadialField::from_samples(self.grid.clone(), w, time)
    }

    /// Spectral samples of `w_r(r_j)`, plus the value `w_r(0)` used for the
    /// on-axis reconstruction `u(0) = w'(0)`.
    pub fn derivative(&self, field: &RadialField) -> (Vec<Complex64>, Complex64) {
        let n = self.grid.n();
        let coeffs = self.forward(field);
        let k = self.grid.wavenumbers();
        let a: Vec<Complex64> = coeffs.iter().zip(k).map(|(c, &k)| c * k).collect();
        let at_zero = a.iter().take(n - 1).sum::<Complex64>() / n as f64;
        let scale = 1.0 / n as f64;
        let w_r = self.cosine_sum(&a).into_iter().map(|c| scale * c).collect();
        (w_r, at_zero)
    }

    /// On-axis value `u(0) = w'(0)` estimated spectrally.
    pub fn u_at_zero(&self, field: &RadialField) -> Complex64 {
        let coeffs = self.forward(field);
        let k = self.grid.wavenumbers();
        coeffs
            .iter()
            .zip(k)
            .take(self.grid.n() - 1)
            .map(|(c, &k)| c * k)
            .sum::<Complex64>()
            / self.grid.n() as f64
    }

    /// `|| grad u ||_2^2 = 4 pi * (r_max / (2 n^2)) * sum_m k_m^2 |c_m|^2`,
    /// the exact Dirichlet-form of the sine interpolant.
    pub fn gradient_norm_sq(&self, field: &RadialField) -> f64 {
        let coeffs = self.forward(field);
        let k = self.grid.wavenumbers();
        let sum: f64 = coeffs
            .iter()
            .zip(k)
            .map(|(c, &k)| k * k * c.norm_sqr())
            .sum();
        let n = self.grid.n() as f64;
        4.0 * std::f64::consts::PI * self.grid.r_max() / (2.0 * n * n) * sum
    }

    /// `sup |u| = max(max_i |w_i|/r_i, |u(0)|)`.
    pub fn linf_norm(&self, field: &RadialField) -> f64 {
        let r = self.grid.r();
        let on_grid = field
            .w()
            .iter()
            .zip(r)
            .map(|(w, &r)| w.norm() / r)
            .fold(0.0_f64, f64::max);
        on_grid.max(self.u_at_zero(field).norm())
    }

    /// Sigma norm `||u||_{H^1} + ||x u||_2` with
    /// `||u||_{H^1} = (||u||_2^2 + ||grad u||_2^2)^{1/2}`.
    pub fn sigma_norm(&self, field: &RadialField) -> f64 {
        let h1 = (field.mass_sq() + self.gradient_norm_sq(field)).sqrt();
        h1 + field.xnorm_sq().sqrt()
    }
}

/// Smooth cutoff: 1 on `[0, 1]`, 0 on `[2, inf)`, exp-mollifier bridge between.
pub fn smooth_cutoff(x: f64) -> f64 {
    if x <= 1.0 {
        1.0
    } else if x >= 2.0 {
        0.0
    } else {
        let s = x - 1.0;
        let f = |t: f64| (-1.0 / t).exp();
        f(1.0 - s) / (f(1.0 - s) + f(s))
    }
}

/// Littlewood-Paley multiplier tables on the dyadic levels a grid can resolve.
///
/// `phi_N(k) = psi(k/N) - psi(2k/N)` with `psi` the cutoff above, so each
/// annulus is supported in `[N/2, 2N]` and the family telescopes to an exact
/// partition of unity on the covered band. Levels run from `4 k_1` up to
/// `k_max / 4`, keeping every annulus inside the grid's resolvable band.
pub struct MultiplierBank {
    grid: Arc<RadialGrid>,
    levels: Vec<f64>,
    tables: Vec<Vec<f64>>,
}

impl MultiplierBank {
    pub fn new(grid: &Arc<RadialGrid>) -> Self {
        let k1 = grid.wavenumbers()[0];
        let lo = 4.0 * k1;
        let hi = grid.k_max() / 4.0;
        let mut levels = Vec::new();
        let mut j = lo.log2().ceil() as i32;
        while 2f64.powi(j) <= hi {
            levels.push(2f64.powi(j));
            j += 1;
        }
        let tables = levels
            .iter()
            .map(|&n_level| {
                grid.wavenumbers()
                    .iter()
                    .map(|&k| smooth_cutoff(k / n_level) - smooth_cutoff(2.0 * k / n_level))
                    .collect()
            })
            .collect();
        Self {
            grid: grid.clone(),
            levels,
            tables,
        }
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn min_level(&self) -> f64 {
        self.levels[0]
    }

    pub fn max_level(&self) -> f64 {
        *self.levels.last().unwrap()
    }

    /// Multiplier table of the level at `idx` (parallel to `levels()`).
    pub fn table(&self, idx: usize) -> &[f64] {
        &self.tables[idx]
    }

    fn level_index(&self, level: f64) -> Result<usize> {
        self.levels
            .iter()
            .position(|&l| l == level)
            .ok_or(Error::DyadicRange {
                level,
                min: self.min_level(),
                max: self.max_level(),
            })
    }

    /// Annulus projection `P_N f`.
    pub fn project(&self, dst: &Dst, field: &RadialField, level: f64) -> Result<RadialField> {
        let idx = self.level_index(level)?;
        let table = &self.tables[idx];
        let mut coeffs = dst.forward(field);
        for (c, &m) in coeffs.iter_mut().zip(table) {
            *c *= m;
        }
        dst.backward(&coeffs, field.time())
    }

    /// Low-pass projection `P_{<=N}`, the telescoped multiplier `psi(k/N)`.
    pub fn project_low(&self, dst: &Dst, field: &RadialField, level: f64) -> Result<RadialField> {
        self.level_index(level)?;
        let mut coeffs = dst.forward(field);
        for (c, &k) in coeffs.iter_mut().zip(self.grid.wavenumbers()) {
            *c *= smooth_cutoff(k / level);
        }
        dst.backward(&coeffs, field.time())
    }

    /// High-pass remainder `P_{>N} = I - P_{<=N}`.
    pub fn project_high(&self, dst: &Dst, field: &RadialField, level: f64) -> Result<RadialField> {
        self.level_index(level)?;
        let mut coeffs = dst.forward(field);
        for (c, &k) in coeffs.iter_mut().zip(self.grid.wavenumbers()) {
            *c *= 1.0 - smooth_cutoff(k / level);
        }
        dst.backward(&coeffs, field.time())
    }

    /// Partition-of-unity defect `|sum_j phi_j(k) - 1|` maximized over the
    /// covered band `(2 N_min, N_max / 2)`.
    pub fn partition_defect(&self) -> f64 {
        let lo = 2.0 * self.min_level();
        let hi = self.max_level() / 2.0;
        self.grid
            .wavenumbers()
            .iter()
            .enumerate()
            .filter(|(_, &k)| k > lo && k < hi)
            .map(|(i, _)| {
                let total: f64 = self.tables.iter().map(|t| t[i]).sum();
                (total - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Bernstein-type audit ratio `||P_N f||_p / (N^{3(1/q - 1/p)} ||P_N f||_q)`,
/// with `p = inf` handled through the sup norm. Used as a bounded-ratio
/// diagnostic across a field corpus, never as an absolute inequality.
pub fn bernstein_ratio(
    dst: &Dst,
    bank: &MultiplierBank,
    field: &RadialField,
    level: f64,
    p: f64,
    q: f64,
) -> Result<f64> {
    assert!(q >= 1.0 && (p >= q || p.is_infinite()), "need 1 <= q <= p");
    let projected = bank.project(dst, field, level)?;
    let denom_norm = if q.is_infinite() {
        dst.linf_norm(&projected)
    } else {
        projected.lp_norm(q)
    };
    if denom_norm == 0.0 {
        return Err(Error::UndefinedRatio(format!(
            "projection at level {level} vanishes"
        )));
    }
    let p_norm = if p.is_infinite() {
        dst.linf_norm(&projected)
    } else {
        projected.lp_norm(p)
    };
    let inv_p = if p.is_infinite() { 0.0 } else { 1.0 / p };
    let inv_q = if q.is_infinite() { 0.0 } else { 1.0 / q };
    let scale = level.powf(3.0 * (inv_q - inv_p));
    Ok(p_norm / (scale * denom_norm))
}
