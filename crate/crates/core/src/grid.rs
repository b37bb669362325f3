use std::sync::Arc;

use crate::error::{Error, Result};

/// Uniform half-line discretization of the radial variable with its dual
/// sine-wavenumber grid.
///
/// Stored points are `r_i = i*dr` for `i = 1..=n`; `r = 0` is the implicit
/// Dirichlet point and is never stored. The wavenumbers `k_m = pi*m/r_max`
/// for `m = 1..=n` are the sine modes resolvable on this grid.
#[derive(Debug, Clone)]
pub struct RadialGrid {
    r_max: f64,
    n: usize,
    dr: f64,
    r: Vec<f64>,
    wavenumbers: Vec<f64>,
}

impl RadialGrid {
    /// Builds a grid with truncation radius `r_max` and `n` points.
    ///
    /// `n` must be a power of two (the transforms use an odd-extension FFT
    /// of length `2n`) and at least 8.
    pub fn new(r_max: f64, n: usize) -> Result<Arc<Self>> {
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::Config(format!(
                "grid size n = {n} must be a power of two >= 8"
            )));
        }
        if r_max.is_nan() || r_max <= 0.0 || !r_max.is_finite() {
            return Err(Error::Config(format!(
                "r_max = {r_max} must be positive and finite"
            )));
        }
        let dr = r_max / n as f64;
        let r: Vec<f64> = (1..=n).map(|i| i as f64 * dr).collect();
        let wavenumbers: Vec<f64> = (1..=n)
            .map(|m| std::f64::consts::PI * m as f64 / r_max)
            .collect();
        Ok(Arc::new(Self {
            r_max,
            n,
            dr,
            r,
            wavenumbers,
        }))
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dr(&self) -> f64 {
        self.dr
    }

    /// Grid points `r_1..r_n` (excludes the Dirichlet point r = 0).
    pub fn r(&self) -> &[f64] {
        &self.r
    }

    /// Sine wavenumbers `k_1..k_n`, strictly increasing.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// Largest wavenumber `pi/dr`.
    pub fn k_max(&self) -> f64 {
        self.wavenumbers[self.n - 1]
    }

    /// Trapezoid rule over `[0, r_max]` for an integrand sampled at the grid
    /// points, with the value at r = 0 supplied explicitly.
    ///
    /// The endpoint at `r_max` (index n-1) carries half weight; everything a
    /// field-backed integrand produces there is negligible under tail
    /// control, but the weighting keeps the rule an honest trapezoid.
    pub fn trapezoid(&self, at_zero: f64, values: impl Iterator<Item = f64>) -> f64 {
        let mut acc = 0.5 * at_zero;
        let mut last = 0.0;
        for (i, v) in values.enumerate() {
            debug_assert!(i < self.n);
            if i + 1 == self.n {
                last = v;
            } else {
                acc += v;
            }
        }
        (acc + 0.5 * last) * self.dr
    }

    /// Same rule restricted to points with `r <= radius` (integrand assumed
    /// zero beyond it, as with ball-restricted norms).
    pub fn trapezoid_ball(
        &self,
        at_zero: f64,
        radius: f64,
        values: impl Iterator<Item = f64>,
    ) -> f64 {
        let mut acc = 0.5 * at_zero;
        for (i, v) in values.enumerate() {
            if self.r[i] <= radius {
                acc += v;
            }
        }
        acc * self.dr
    }

    /// True when two fields/grids may be mixed in one expression.
    pub fn same_as(&self, other: &Self) -> bool {
        self.n == other.n && self.r_max == other.r_max
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_spacing_and_wavenumbers() {
        let g = RadialGrid::new(16.0, 1024).unwrap();
        assert_eq!(g.dr(), 0.015625);
        assert!((g.wavenumbers()[0] - std::f64::consts::PI / 16.0).abs() < 1e-15);
        assert_eq!(g.dr() * g.n() as f64, 16.0);
        assert!(g.wavenumbers().windows(2).all(|p| p[1] > p[0]));

        let g = RadialGrid::new(32.0, 2048).unwrap();
        assert_eq!(g.dr(), 0.015625);
        assert!((g.k_max() - 64.0 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(RadialGrid::new(16.0, 1000).is_err());
        assert!(RadialGrid::new(16.0, 4).is_err());
        assert!(RadialGrid::new(0.0, 1024).is_err());
        assert!(RadialGrid::new(-1.0, 1024).is_err());
    }

    #[test]
    fn trapezoid_with_zero_endpoint_matches_closed_form() {
        // integral of r^2 e^{-r^2} over [0, 16] ~ sqrt(pi)/4
        let g = RadialGrid::new(16.0, 1024).unwrap();
        let q = g.trapezoid(0.0, g.r().iter().map(|&r| r * r * (-r * r).exp()));
        assert!((q - std::f64::consts::PI.sqrt() / 4.0).abs() < 1e-12);
    }
}
