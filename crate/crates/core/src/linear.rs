use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::RadialField;
use crate::grid::RadialGrid;
use crate::spectral::Dst;

/// Below this |t| the Mehler kernel's chirp rate exceeds what the default
/// grids resolve; the quadrature refuses instead of aliasing silently.
pub const T_MIN_KERNEL: f64 = 0.05;

/// Phase tables for one Strang substep of the linear flow
/// `i u_t = -(1/2) Lap u - (1/2) r^2 u`.
///
/// Both tables are pure phases, so every substep is exactly unitary on the
/// discrete field.
pub struct PropagatorPlan {
    grid: Arc<RadialGrid>,
    dst: Arc<Dst>,
    /// `exp(-i k^2 dt / 2)` per wavenumber.
    kinetic: Vec<Complex64>,
    /// `exp(+i r^2 dt / 4)` per grid point (half of the potential step).
    potential_half: Vec<Complex64>,
    dt: f64,
}

impl PropagatorPlan {
    pub fn new(dst: &Arc<Dst>, dt: f64) -> Self {
        let grid = dst.grid().clone();
        let kinetic = kinetic_phases(&grid, dt);
        let potential_half = potential_half_phases(&grid, dt);
        Self {
            grid,
            dst: dst.clone(),
            kinetic,
            potential_half,
            dt,
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn dst(&self) -> &Arc<Dst> {
        &self.dst
    }

    /// Largest deviation of any phase-table entry from unit modulus.
    pub fn phase_defect(&self) -> f64 {
        self.kinetic
            .iter()
            .chain(&self.potential_half)
            .map(|z| (z.norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// One Strang step of the potential-only linear flow.
    fn step_linear(&self, field: &mut RadialField) {
        for (w, p) in field.w_mut().iter_mut().zip(&self.potential_half) {
            *w *= p;
        }
        let mut coeffs = self.dst.forward(field);
        for (c, ph) in coeffs.iter_mut().zip(&self.kinetic) {
            *c *= ph;
        }
        let t = field.time();
        *field = self
            .dst
            .backward(&coeffs, t)
            .expect("coefficient length matches grid");
        for (w, p) in field.w_mut().iter_mut().zip(&self.potential_half) {
            *w *= p;
        }
    }
}

fn kinetic_phases(grid: &RadialGrid, dt: f64) -> Vec<Complex64> {
    grid.wavenumbers()
        .iter()
        .map(|&k| Complex64::from_polar(1.0, -k * k * dt / 2.0))
        .collect()
}

fn potential_half_phases(grid: &RadialGrid, dt: f64) -> Vec<Complex64> {
    grid.r()
        .iter()
        .map(|&r| Complex64::from_polar(1.0, r * r * dt / 4.0))
        .collect()
}

/// Exact linear flow `U(t)` by direct quadrature of the inverted-oscillator
/// Mehler kernel, odd-extended to realize the radial 3D propagator:
///
///   w_out(r) = integral_0^{r_max} [K_t(r,s) - K_t(r,-s)] w(s) ds,
///   K_t(x,y) = e^{-i pi/4 sgn t} |2 pi sinh t|^{-1/2}
///              exp(i [(x^2+y^2) cosh t - 2 x y] / (2 sinh t)).
///
/// O(n^2); exists as the oracle the split-step path is checked against.
pub fn mehler_apply(dst: &Dst, field: &RadialField, t: f64) -> Result<RadialField> {
    check_kernel_time(t)?;
    let grid = dst.grid();
    let n = grid.n();
    let r = grid.r();
    let sh = t.sinh();
    let ch = t.cosh();
    let amp = Complex64::from_polar(
        1.0 / (2.0 * std::f64::consts::PI * sh).abs().sqrt(),
        -std::f64::consts::FRAC_PI_4 * t.signum(),
    );
    // K(r,s) - K(r,-s) = amp * P(r) P(s) * (-2i) sin(r s / sinh t),
    // P(x) = exp(i x^2 cosh t / (2 sinh t))
    let chirp: Vec<Complex64> = r
        .iter()
        .map(|&x| Complex64::from_polar(1.0, x * x * ch / (2.0 * sh)))
        .collect();
    let weighted: Vec<Complex64> = field
        .w()
        .iter()
        .zip(&chirp)
        .enumerate()
        .map(|(j, (w, p))| {
            let trap = if j + 1 == n { 0.5 } else { 1.0 };
            w * p * trap
        })
        .collect();
    let minus_2i = Complex64::new(0.0, -2.0);
    let dr = grid.dr();
    let w_out: Vec<Complex64> = (0..n)
        .map(|i| {
            let ri = r[i];
            let mut acc = Complex64::ZERO;
            for (j, wv) in weighted.iter().enumerate() {
                acc += wv * (ri * r[j] / sh).sin();
            }
            amp * chirp[i] * minus_2i * acc * dr
        })
        .collect();
    RadialField::from_samples(grid.clone(), w_out, field.time() + t)
}

/// Mehler flow on the l = 1 (vector-radial) sector.
///
/// A field `V = f(r) x-hat` is stored through `v = r f`. The 3D kernel
/// reduces on this sector to a spherical-Bessel kernel,
///
///   v_out(r) = c_t (-4 pi i) sinh t * integral e^{i (r^2+s^2) cosh t/(2 sinh t)}
///              [sin(z)/z - cos(z)] v(s) ds,   z = r s / sinh t,
///
/// with `c_t` the 3D Mehler amplitude. Scalar (l = 0) machinery cannot evolve
/// these fields; this oracle backs the Heisenberg-commutation checks, where
/// `i grad u0` and `x u0` are vector-radial.
pub fn mehler_apply_l1(dst: &Dst, v: &RadialField, t: f64) -> Result<RadialField> {
    check_kernel_time(t)?;
    let grid = dst.grid();
    let n = grid.n();
    let r = grid.r();
    let sh = t.sinh();
    let ch = t.cosh();
    let c3 = Complex64::from_polar(
        (2.0 * std::f64::consts::PI * sh.abs()).powf(-1.5),
        -3.0 * std::f64::consts::FRAC_PI_4 * t.signum(),
    );
    let prefactor = c3 * Complex64::new(0.0, -4.0 * std::f64::consts::PI) * sh;
    let chirp: Vec<Complex64> = r
        .iter()
        .map(|&x| Complex64::from_polar(1.0, x * x * ch / (2.0 * sh)))
        .collect();
    let weighted: Vec<Complex64> = v
        .w()
        .iter()
        .zip(&chirp)
        .enumerate()
        .map(|(j, (w, p))| {
            let trap = if j + 1 == n { 0.5 } else { 1.0 };
            w * p * trap
        })
        .collect();
    let dr = grid.dr();
    let v_out: Vec<Complex64> = (0..n)
        .map(|i| {
            let ri = r[i];
            let mut acc = Complex64::ZERO;
            for (j, wv) in weighted.iter().enumerate() {
                acc += wv * bessel_j1_weight(ri * r[j] / sh);
            }
            prefactor * chirp[i] * acc * dr
        })
        .collect();
    RadialField::from_samples(grid.clone(), v_out, v.time() + t)
}

/// `z j_1(z) = sin(z)/z - cos(z)`, series-stabilized near zero.
fn bessel_j1_weight(z: f64) -> f64 {
    if z.abs() < 1e-2 {
        let z2 = z * z;
        z2 / 3.0 * (1.0 - z2 / 10.0 * (1.0 - z2 / 28.0))
    } else {
        z.sin() / z - z.cos()
    }
}

fn check_kernel_time(t: f64) -> Result<()> {
    if t.abs() < T_MIN_KERNEL {
        Err(Error::KernelResolution {
            t_abs: t.abs(),
            t_min: T_MIN_KERNEL,
        })
    } else {
        Ok(())
    }
}

/// Strang split-step realization of `U(t)` with only the quadratic potential
/// active. Exactly norm-preserving; second order against `mehler_apply`.
///
/// `t` may be negative (backward flow); a last partial step is taken when
/// `dt` does not divide `|t|`. `tail_threshold` aborts the flow when mass
/// reaches the truncation region.
pub fn linear_flow(
    plan: &PropagatorPlan,
    field: &RadialField,
    t: f64,
    tail_threshold: f64,
) -> Result<RadialField> {
    assert!(plan.dt() > 0.0, "plan dt must be positive");
    if t == 0.0 {
        return Ok(field.clone());
    }
    let dt = plan.dt() * t.signum();
    let n_full = (t / dt).floor() as u64;
    let remainder = t - n_full as f64 * dt;
    let mut state = field.clone();
    let signed_plan;
    let plan_ref = if t > 0.0 {
        plan
    } else {
        signed_plan = PropagatorPlan::new(plan.dst(), dt);
        &signed_plan
    };
    for step in 0..n_full {
        plan_ref.step_linear(&mut state);
        state.set_time(field.time() + (step + 1) as f64 * dt);
        let tail = state.tail_fraction();
        if tail > tail_threshold {
            return Err(Error::Truncation {
                time: state.time(),
                tail,
                threshold: tail_threshold,
            });
        }
    }
    if remainder.abs() > 1e-15 * t.abs() {
        let partial = PropagatorPlan::new(plan.dst(), remainder);
        partial.step_linear(&mut state);
    }
    state.set_time(field.time() + t);
    Ok(state)
}

/// Which Galilean operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Galilean {
    /// `J(t) = x sinh t + i cosh t grad`
    J,
    /// `H(t) = x cosh t + i sinh t grad`
    H,
}

/// Which evaluation route for a Galilean operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GalileanMethod {
    /// Combine `u` and the spectral radial derivative directly.
    Direct,
    /// Conjugate by the quadratic chirp and differentiate the twisted field.
    Factorized,
}

/// Applies `J(t)` or `H(t)` to a radial field.
///
/// The result is the vector-radial field `g(r) x-hat` stored through
/// `r g(r)`, so its `L^2` norm over R^3 equals `||A(t) u||_2`.
pub fn galilean_apply(
    dst: &Dst,
    field: &RadialField,
    t: f64,
    which: Galilean,
    method: GalileanMethod,
) -> Result<RadialField> {
    let grid = dst.grid();
    let r = grid.r();
    match method {
        GalileanMethod::Direct => {
            let (w_r, _) = dst.derivative(field);
            let (space, deriv) = match which {
                Galilean::J => (t.sinh(), t.cosh()),
                Galilean::H => (t.cosh(), t.sinh()),
            };
            let i = Complex64::i();
            // r g = r^2 space * u + i deriv * r u_r = r space * w + i deriv (w_r - w/r)
            let out: Vec<Complex64> = field
                .w()
                .iter()
                .zip(&w_r)
                .zip(r)
                .map(|((w, w_r), &r)| r * space * w + i * deriv * (w_r - w / r))
                .collect();
            RadialField::from_samples(grid.clone(), out, field.time())
        }
        GalileanMethod::Factorized => {
            // J(t) = i cosh t e^{i theta} grad (e^{-i theta} .), theta = r^2 tanh t / 2
            // H(t) = i sinh t e^{i theta'} grad (e^{-i theta'} .), theta' = r^2 coth t / 2
            let (rate, front) = match which {
                Galilean::J => (t.tanh(), Complex64::i() * t.cosh()),
                Galilean::H => {
                    if t == 0.0 {
                        return Err(Error::Config(
                            "factorized H(t) is singular at t = 0 (coth t)".into(),
                        ));
                    }
                    (1.0 / t.tanh(), Complex64::i() * t.sinh())
                }
            };
            let twisted: Vec<Complex64> = field
                .w()
                .iter()
                .zip(r)
                .map(|(w, &r)| w * Complex64::from_polar(1.0, -r * r * rate / 2.0))
                .collect();
            let twisted = RadialField::from_samples(grid.clone(), twisted, field.time())?;
            let (tw_r, _) = dst.derivative(&twisted);
            // u~_r = (w~_r - w~/r)/r; r g = front * e^{i theta} * r u~_r
            let out: Vec<Complex64> = twisted
                .w()
                .iter()
                .zip(&tw_r)
                .zip(r)
                .map(|((tw, tw_r), &r)| {
                    let untwist = Complex64::from_polar(1.0, r * r * rate / 2.0);
                    front * untwist * (tw_r - tw / r)
                })
                .collect();
            RadialField::from_samples(grid.clone(), out, field.time())
        }
    }
}

/// Relative residual of the Heisenberg commutation `A(t) U(t) = U(t) A(0)`
/// for `A = J` (with `A(0) = i grad`) or `A = H` (with `A(0) = x`).
///
/// The scalar side runs through `linear_flow`; the vector-radial side
/// `U(t) A(0) u0` runs through the l = 1 Mehler oracle.
pub fn heisenberg_residual(
    plan: &PropagatorPlan,
    u0: &RadialField,
    t: f64,
    which: Galilean,
) -> Result<f64> {
    let dst = plan.dst();
    let a0 = apply_a0(dst, u0, which)?;
    let norm = a0.mass_sq().sqrt();
    if norm == 0.0 {
        return Err(Error::UndefinedRatio("zero initial field".into()));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let evolved = linear_flow(plan, u0, t, 1.0)?;
    let lhs = galilean_apply(dst, &evolved, t, which, GalileanMethod::Direct)?;
    let rhs = mehler_apply_l1(dst, &a0, t)?;
    Ok(lhs.l2_distance(&rhs) / norm)
}

/// `A(0) u0` in the vector-radial representation `r g`.
fn apply_a0(dst: &Dst, u0: &RadialField, which: Galilean) -> Result<RadialField> {
    let grid = dst.grid();
    let r = grid.r();
    let out: Vec<Complex64> = match which {
        Galilean::J => {
            // i grad u0: g = i u0_r, r g = i (w_r - w/r)
            let (w_r, _) = dst.derivative(u0);
            u0.w()
                .iter()
                .zip(&w_r)
                .zip(r)
                .map(|((w, w_r), &r)| Complex64::i() * (w_r - w / r))
                .collect()
        }
        // x u0: g = r u0 = w, r g = r w
        Galilean::H => u0.w().iter().zip(r).map(|(w, &r)| w * r).collect(),
    };
    RadialField::from_samples(grid.clone(), out, u0.time())
}

/// Decay-law audit for `||U(t) u0||_inf against Eq.-(7)-type kernel bounds.
///
/// Returns `(plain, sinh_form)` where `plain = ||U(t)u0||_inf |t|^{3/2} / ||u0||_1`
/// and `sinh_form` uses the exact kernel amplitude `|2 pi sinh t|^{3/2}`.
pub fn dispersive_ratio(dst: &Dst, u0: &RadialField, t: f64) -> Result<(f64, f64)> {
    let l1 = u0.lp_norm(1.0);
    if l1 == 0.0 {
        return Err(Error::UndefinedRatio("zero input field".into()));
    }
    let evolved = mehler_apply(dst, u0, t)?;
    let sup = dst.linf_norm(&evolved);
    let plain = sup * t.abs().powf(1.5) / l1;
    let sinh_form = sup * (2.0 * std::f64::consts::PI * t.sinh()).abs().powf(1.5) / l1;
    Ok((plain, sinh_form))
}

/// Embedding audit `||f||_{p_out} / ||J(t) f||_{p_in}`; bounded over the
/// corpus, never asserted against the paper's unquantified constant.
pub fn embedding_ratio(
    dst: &Dst,
    field: &RadialField,
    t: f64,
    p_out: f64,
    p_in: f64,
) -> Result<f64> {
    let jf = galilean_apply(dst, field, t, Galilean::J, GalileanMethod::Direct)?;
    let denom = jf.lp_norm(p_in);
    if denom == 0.0 {
        return Err(Error::UndefinedRatio("J(t) f vanishes".into()));
    }
    Ok(field.lp_norm(p_out) / denom)
}
