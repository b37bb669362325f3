use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::RadialGrid;

/// Complex samples of `w(r) = r * u(r)` at one solution time.
///
/// `w` is the reduced radial representation: the radial Laplacian acts on it
/// as a plain second derivative, and `w(0) = 0`, `w(r_max) = 0` hold as
/// Dirichlet boundary values. The sample at `r_max` is stored but pinned to
/// the boundary value by every transform round trip.
#[derive(Debug, Clone)]
pub struct RadialField {
    grid: Arc<RadialGrid>,
    w: Vec<Complex64>,
    time: f64,
}

/// Initial-profile specification; all profiles are sampled as `w = r * u`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    /// `u(r) = a * exp(-r^2 / (2 sigma^2))`
    Gaussian {
        amplitude: f64,
        width: f64,
    },
    /// Radial shell `u(r) = a * (exp(-(r-r0)^2/(2 sigma^2)) + exp(-(r+r0)^2/(2 sigma^2)))`;
    /// the mirror term keeps the odd extension of `w` smooth through r = 0.
    Bump {
        amplitude: f64,
        width: f64,
        center: f64,
    },
    /// Concentration family `u(r) = N^{1/2} g(N r)` with the fixed bump
    /// `g(s) = exp(-s^2/2)`; the family is invariant in the homogeneous
    /// Sobolev norm `|| grad u ||_2`.
    Concentrate {
        scale: f64,
    },
    Zero,
}

impl RadialField {
    /// Wraps raw samples; lengths must match and all samples must be finite.
    pub fn from_samples(grid: Arc<RadialGrid>, w: Vec<Complex64>, time: f64) -> Result<Self> {
        if w.len() != grid.n() {
            return Err(Error::Config(format!(
                "field length {} does not match grid n = {}",
                w.len(),
                grid.n()
            )));
        }
        if w.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Config("field contains non-finite samples".into()));
        }
        Ok(Self { grid, w, time })
    }

    /// Samples a named profile at time 0 and checks the truncation budget.
    pub fn sample(profile: &Profile, grid: &Arc<RadialGrid>, tail_threshold: f64) -> Result<Self> {
        let u = |r: f64| -> f64 {
            match profile {
                Profile::Gaussian { amplitude, width } => {
                    amplitude * (-r * r / (2.0 * width * width)).exp()
                }
                Profile::Bump {
                    amplitude,
                    width,
                    center,
                } => {
                    let d1 = r - center;
                    let d2 = r + center;
                    amplitude
                        * ((-d1 * d1 / (2.0 * width * width)).exp()
                            + (-d2 * d2 / (2.0 * width * width)).exp())
                }
                Profile::Concentrate { scale } => {
                    let s = scale * r;
                    scale.sqrt() * (-s * s / 2.0).exp()
                }
                Profile::Zero => 0.0,
            }
        };
        let w: Vec<Complex64> = grid
            .r()
            .iter()
            .map(|&r| Complex64::new(r * u(r), 0.0))
            .collect();
        let field = Self {
            grid: grid.clone(),
            w,
            time: 0.0,
        };
        if !matches!(profile, Profile::Zero) {
            let tail = field.tail_fraction();
            if tail > tail_threshold {
                return Err(Error::Truncation {
                    time: 0.0,
                    tail,
                    threshold: tail_threshold,
                });
            }
        }
        Ok(field)
    }

    pub fn zero(grid: &Arc<RadialGrid>, time: f64) -> Self {
        Self {
            grid: grid.clone(),
            w: vec![Complex64::ZERO; grid.n()],
            time,
        }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn w(&self) -> &[Complex64] {
        &self.w
    }

    pub fn w_mut(&mut self) -> &mut [Complex64] {
        &mut self.w
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.w
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn set_time(&mut self, t: f64) {
        self.time = t;
    }

    pub fn is_finite(&self) -> bool {
        self.w.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// `u(r_i) = w(r_i)/r_i` at stored points.
    pub fn u_at(&self, i: usize) -> Complex64 {
        self.w[i] / self.grid.r()[i]
    }

    /// `L^p` norm over R^3 for finite `p >= 1`:
    /// `(4 pi * integral |w|^p r^{2-p} dr)^{1/p}`.
    pub fn lp_norm(&self, p: f64) -> f64 {
        assert!(p >= 1.0 && p.is_finite(), "lp_norm requires finite p >= 1");
        let r = self.grid.r();
        let integral = self.grid.trapezoid(
            0.0,
            self.w
                .iter()
                .zip(r)
                .map(|(w, &r)| w.norm().powf(p) * r.powf(2.0 - p)),
        );
        (4.0 * std::f64::consts::PI * integral).powf(1.0 / p)
    }

    /// `|| u ||_2^2` by quadrature: `4 pi * integral |w|^2 dr`.
    pub fn mass_sq(&self) -> f64 {
        let integral = self
            .grid
            .trapezoid(0.0, self.w.iter().map(|w| w.norm_sqr()));
        4.0 * std::f64::consts::PI * integral
    }

    /// `|| x u ||_2^2 = 4 pi * integral |w|^2 r^2 dr`.
    pub fn xnorm_sq(&self) -> f64 {
        let r = self.grid.r();
        let integral = self.grid.trapezoid(
            0.0,
            self.w.iter().zip(r).map(|(w, &r)| w.norm_sqr() * r * r),
        );
        4.0 * std::f64::consts::PI * integral
    }

    /// `|| u ||_6^6 = 4 pi * integral |w|^6 r^{-4} dr`.
    pub fn pot6(&self) -> f64 {
        let r = self.grid.r();
        let integral = self.grid.trapezoid(
            0.0,
            self.w
                .iter()
                .zip(r)
                .map(|(w, &r)| w.norm_sqr().powi(3) / r.powi(4)),
        );
        4.0 * std::f64::consts::PI * integral
    }

    /// Mass fraction held in `r > 0.9 r_max`; the run-validity monitor.
    pub fn tail_fraction(&self) -> f64 {
        let r = self.grid.r();
        let cut = 0.9 * self.grid.r_max();
        let mut tail = 0.0;
        let mut total = 0.0;
        for (w, &r) in self.w.iter().zip(r) {
            let m = w.norm_sqr();
            total += m;
            if r > cut {
                tail += m;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            tail / total
        }
    }

    /// Pointwise scale by a complex constant.
    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            grid: self.grid.clone(),
            w: self.w.iter().map(|w| w * c).collect(),
            time: self.time,
        }
    }

    /// Pointwise difference; grids must match.
    pub fn sub(&self, other: &Self) -> Self {
        assert!(self.grid.same_as(other.grid()), "grid mismatch");
        Self {
            grid: self.grid.clone(),
            w: self.w.iter().zip(&other.w).map(|(a, b)| a - b).collect(),
            time: self.time,
        }
    }

    /// `L^2` distance over R^3.
    pub fn l2_distance(&self, other: &Self) -> f64 {
        self.sub(other).mass_sq().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Arc<RadialGrid> {
        RadialGrid::new(16.0, 1024).unwrap()
    }

    #[test]
    fn gaussian_closed_forms() {
        let g = grid();
        let f = RadialField::sample(
            &Profile::Gaussian {
                amplitude: 1.0,
                width: 1.0,
            },
            &g,
            1e-6,
        )
        .unwrap();
        let pi = std::f64::consts::PI;
        // ||u||_2^2 = pi^{3/2}
        assert!((f.mass_sq() - pi.powf(1.5)).abs() / pi.powf(1.5) < 1e-6);
        // ||u||_2 = pi^{3/4}
        assert!((f.lp_norm(2.0) - pi.powf(0.75)).abs() / pi.powf(0.75) < 1e-6);
        // ||u||_6^6 = (pi/3)^{3/2}
        let u6 = f.lp_norm(6.0).powi(6);
        let exact = (pi / 3.0).powf(1.5);
        assert!((u6 - exact).abs() / exact < 1e-6);
        // ||x u||_2^2 = (3/2) pi^{3/2}
        let exact = 1.5 * pi.powf(1.5);
        assert!((f.xnorm_sq() - exact).abs() / exact < 1e-6);
    }

    #[test]
    fn zero_profile_is_zero() {
        let g = grid();
        let f = RadialField::sample(&Profile::Zero, &g, 1e-6).unwrap();
        assert_eq!(f.lp_norm(2.0), 0.0);
        assert_eq!(f.lp_norm(6.0), 0.0);
        assert_eq!(f.mass_sq(), 0.0);
    }

    #[test]
    fn concentrate_l6_mass_localizes() {
        let g = grid();
        let n = 8.0;
        let f = RadialField::sample(&Profile::Concentrate { scale: n }, &g, 1e-6).unwrap();
        let r = g.r();
        let inner: f64 = f
            .w()
            .iter()
            .zip(r)
            .filter(|(_, &r)| r < 1.0 / n)
            .map(|(w, &r)| w.norm_sqr().powi(3) / r.powi(4))
            .sum::<f64>();
        let total: f64 = f
            .w()
            .iter()
            .zip(r)
            .map(|(w, &r)| w.norm_sqr().powi(3) / r.powi(4))
            .sum::<f64>();
        assert!(inner > 0.5 * total, "inner {inner} vs total {total}");
    }

    #[test]
    fn oversized_profile_breaches_tail() {
        let g = grid();
        let err = RadialField::sample(
            &Profile::Gaussian {
                amplitude: 1.0,
                width: 12.0,
            },
            &g,
            1e-6,
        );
        assert!(matches!(err, Err(Error::Truncation { .. })));
    }

    #[test]
    fn scaling_is_homogeneous() {
        let g = grid();
        let f = RadialField::sample(
            &Profile::Gaussian {
                amplitude: 1.0,
                width: 1.0,
            },
            &g,
            1e-6,
        )
        .unwrap();
        let c = Complex64::new(-2.5, 1.3);
        let scaled = f.scaled(c);
        for p in [1.0, 2.0, 6.0, 10.0] {
            let lhs = scaled.lp_norm(p);
            let rhs = c.norm() * f.lp_norm(p);
            assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1.0));
        }
    }
}
