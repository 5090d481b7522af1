//! The transcendental spectral functions whose real zeros in x give the
//! regular spectrum: G_±(x) for the symmetric model, the generalized
//! G_±(x; z) = φ₂(−z) − φ₁(z), and G_ε(x) for the broken-symmetry model,
//! plus numerical residues at the poles x ∈ ℕ (resp. x ∈ {n ∓ ε}).
//!
//! Everything funnels through one kernel: with u = (z+g)/g, v = (g−z)/g and
//! κ_n = K_n gⁿ,
//!
//! ```text
//! G(x; z) = Σ_n κ_n [ e^{gz} vⁿ − e^{−gz} uⁿ Δ±/(x−n) ],
//! ```
//!
//! so that z = 0 (u = v = 1 exactly) reproduces the plain series
//! Σ κ_n (1 ∓ Δ/(x−n)) bit for bit, and the negative-parity function is the
//! positive-parity one with Δ → −Δ operating on the same coefficients.
//!
//! The series in z converges only inside D₀ = D₁ ∩ D₂; outside, the partial
//! sum at fixed order is still reported (with `converged = false`) because
//! the x-positions of its zeros remain meaningful.

use crate::numeric::{ComplexDd, NeumaierC};
use crate::params::{CoreError, ModelParams, Parity, Precision, Result};
use crate::series::{
    compute_k_eps, compute_k_eps_dd, compute_k_fixed, compute_k_fixed_dd, compute_k_for_eval,
    compute_k_for_eval_dd, EpsBranch, SeriesExpansion, SeriesExpansionDd, DEFAULT_N_MAX,
    DEFAULT_TAIL_TOL,
};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

/// Which spectral function a value belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GKind {
    Parity(Parity),
    Eps,
}

/// Value of a G-function at (x, z) with convergence diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct GEvaluation {
    pub value: Complex64,
    pub x: f64,
    /// Evaluation point in the Bargmann plane; 0 for the plain functions.
    pub z: Complex64,
    pub kind: GKind,
    /// Truncation order actually summed.
    pub order_used: usize,
    /// Tail criterion met and, for z ≠ 0, z inside D₀.
    pub converged: bool,
}

/// The analyticity disks of the two local solutions: D₁ is centered at −g,
/// D₂ at +g, both with radius 2g; D₀ = D₁ ∩ D₂ contains the origin for any
/// g > 0.
#[derive(Debug, Clone, Copy)]
pub struct DiskDomain {
    pub g: f64,
}

impl DiskDomain {
    pub fn new(g: f64) -> Self {
        Self { g }
    }

    pub fn contains_d1(&self, z: Complex64) -> bool {
        (z + Complex64::new(self.g, 0.0)).norm() < 2.0 * self.g
    }

    pub fn contains_d2(&self, z: Complex64) -> bool {
        (z - Complex64::new(self.g, 0.0)).norm() < 2.0 * self.g
    }

    pub fn contains_d0(&self, z: Complex64) -> bool {
        self.contains_d1(z) && self.contains_d2(z)
    }
}

/// Knobs shared by every evaluator.
#[derive(Debug, Clone, Copy)]
pub struct EvalOptions {
    /// Tail tolerance handed to the coefficient recurrence.
    pub tail_tol: f64,
    /// Hard cap on the expansion order.
    pub n_max: usize,
    /// Floating-point backend selection.
    pub precision: Precision,
    /// Evaluate at exactly this order instead of the adaptive criterion.
    pub trunc: Option<usize>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            tail_tol: DEFAULT_TAIL_TOL,
            n_max: DEFAULT_N_MAX,
            precision: Precision::Auto,
            trunc: None,
        }
    }
}

impl EvalOptions {
    pub fn with_precision(mut self, precision: Precision) -> Self {
        self.precision = precision;
        self
    }

    pub fn with_trunc(mut self, order: usize) -> Self {
        self.trunc = Some(order);
        self
    }

    fn series(&self, params: &ModelParams, x: f64, radius: f64) -> Result<SeriesExpansion> {
        match self.trunc {
            Some(order) => compute_k_fixed(params, x, order, self.tail_tol),
            None => compute_k_for_eval(params, x, radius, self.tail_tol, self.n_max),
        }
    }

    fn series_dd(&self, params: &ModelParams, x: f64, radius: f64) -> Result<SeriesExpansionDd> {
        match self.trunc {
            Some(order) => compute_k_fixed_dd(params, x, order, self.tail_tol),
            None => compute_k_for_eval_dd(params, x, radius, self.tail_tol, self.n_max),
        }
    }
}

/// Term-growth radius of the two sums of G(x; z): the u-series runs at
/// |z+g|/g, the v-series at |g−z|/g.
fn eval_radius(z: Complex64, g: f64) -> f64 {
    let u = (z + Complex64::new(g, 0.0)).norm() / g;
    let v = (Complex64::new(g, 0.0) - z).norm() / g;
    u.max(v)
}

fn check_not_singular(z: Complex64, g: f64) -> Result<()> {
    if (z - Complex64::new(g, 0.0)).norm() == 0.0 || (z + Complex64::new(g, 0.0)).norm() == 0.0 {
        return Err(CoreError::SingularPoint { z });
    }
    Ok(())
}

fn general_sum_f64(
    series: &SeriesExpansion,
    signed_delta: f64,
    x: f64,
    z: Complex64,
    g: f64,
) -> Complex64 {
    let u = (z + Complex64::new(g, 0.0)) / g;
    let v = (Complex64::new(g, 0.0) - z) / g;
    let ep = (z * g).exp();
    let em = (-z * g).exp();

    let mut acc = NeumaierC::new();
    let mut u_pow = Complex64::new(1.0, 0.0);
    let mut v_pow = Complex64::new(1.0, 0.0);
    for (n, &k) in series.scaled.iter().enumerate() {
        let pole = signed_delta / (x - n as f64);
        acc.add(k * (ep * v_pow - em * u_pow * pole));
        u_pow *= u;
        v_pow *= v;
    }
    acc.total()
}

fn general_sum_dd(
    series: &SeriesExpansionDd,
    signed_delta: f64,
    x: f64,
    z: Complex64,
    g: f64,
) -> Complex64 {
    let g_dd = TwoFloat::from(g);
    let u = ComplexDd::from_c64(z)
        .add(ComplexDd::from_re(g_dd))
        .div_real(g_dd);
    let v = ComplexDd::from_re(g_dd)
        .sub(ComplexDd::from_c64(z))
        .div_real(g_dd);
    // The exponential prefactors carry no x-dependence, so the accuracy of
    // the zero positions in x is insensitive to their last-bit rounding.
    let ep = ComplexDd::from_c64((z * g).exp());
    let em = ComplexDd::from_c64((-z * g).exp());
    let sd = TwoFloat::from(signed_delta);
    let x_dd = TwoFloat::from(x);

    let mut acc = ComplexDd::zero();
    let mut u_pow = ComplexDd::from_re(TwoFloat::from(1.0));
    let mut v_pow = ComplexDd::from_re(TwoFloat::from(1.0));
    for (n, &k) in series.scaled.iter().enumerate() {
        let pole = sd / (x_dd - TwoFloat::from(n as f64));
        let term = ep.mul(v_pow).sub(em.mul(u_pow).scale(pole)).scale(k);
        acc = acc.add(term);
        u_pow = u_pow.mul(u);
        v_pow = v_pow.mul(v);
    }
    acc.to_c64()
}

/// Generalized G-function G_±(x; z) = φ₂(−z) − φ₁(z) at fixed truncation.
///
/// No convergence demand is placed on z: outside D₀ the fixed-order partial
/// sum is returned with `converged = false`. The truncation order comes from
/// the tail criterion at z = 0 unless overridden via [`EvalOptions::trunc`].
pub fn eval_g_general(
    params: &ModelParams,
    parity: Parity,
    x: f64,
    z: Complex64,
    opts: &EvalOptions,
) -> Result<GEvaluation> {
    check_not_singular(z, params.g)?;
    let signed_delta = parity.signed_delta(params.delta);
    let use_dd = opts.precision.use_extended(x);

    let radius = eval_radius(z, params.g);
    let (value, order, tail_ok) = if use_dd {
        let series = opts.series_dd(params, x, radius)?;
        let v = general_sum_dd(&series, signed_delta, x, z, params.g);
        (v, series.order, series.converged)
    } else {
        let series = opts.series(params, x, radius)?;
        let v = general_sum_f64(&series, signed_delta, x, z, params.g);
        (v, series.order, series.converged)
    };

    Ok(GEvaluation {
        value,
        x,
        z,
        kind: GKind::Parity(parity),
        order_used: order,
        converged: tail_ok && DiskDomain::new(params.g).contains_d0(z),
    })
}

/// Plain G_±(x) = Σ K_n (1 ∓ Δ/(x−n)) gⁿ.
///
/// Evaluated through the generalized kernel at z = 0, which reduces to the
/// plain series term by term, so the two agree bit for bit at equal
/// truncation.
pub fn eval_g(
    params: &ModelParams,
    parity: Parity,
    x: f64,
    opts: &EvalOptions,
) -> Result<GEvaluation> {
    eval_g_general(params, parity, x, Complex64::new(0.0, 0.0), opts)
}

impl SeriesExpansion {
    /// R = Σ κ_n (plain) over the stored terms.
    fn plain_sum(&self) -> f64 {
        let mut acc = crate::numeric::Neumaier::new();
        for &k in &self.scaled {
            acc.add(k);
        }
        acc.total()
    }

    /// R̄ = Σ κ_n / (x + shift − n).
    fn weighted_sum(&self, x: f64) -> f64 {
        let mut acc = crate::numeric::Neumaier::new();
        for (n, &k) in self.scaled.iter().enumerate() {
            acc.add(k / (x + self.pole_shift - n as f64));
        }
        acc.total()
    }
}

fn eps_sums_dd(series: &SeriesExpansionDd, x: f64) -> (TwoFloat, TwoFloat) {
    let x_dd = TwoFloat::from(x) + TwoFloat::from(series.pole_shift);
    let mut plain = TwoFloat::from(0.0);
    let mut weighted = TwoFloat::from(0.0);
    for (n, &k) in series.scaled.iter().enumerate() {
        plain += k;
        weighted += k / (x_dd - TwoFloat::from(n as f64));
    }
    (plain, weighted)
}

/// G-function of the broken-symmetry model,
/// G_ε(x) = Δ² R̄⁺(x) R̄⁻(x) − R⁺(x) R⁻(x),
/// with R^± = Σ K_n^± gⁿ and R̄^± = Σ K_n^± gⁿ/(x − n ± ε).
///
/// At ε = 0 this reduces to −G₊(x)·G₋(x).
pub fn eval_g_eps(params: &ModelParams, x: f64, opts: &EvalOptions) -> Result<GEvaluation> {
    let d2 = params.delta * params.delta;
    let use_dd = opts.precision.use_extended(x);

    let (value, order, tail_ok) = if use_dd {
        let plus = compute_k_eps_dd(params, x, EpsBranch::Plus, opts.tail_tol, opts.n_max)?;
        let minus = compute_k_eps_dd(params, x, EpsBranch::Minus, opts.tail_tol, opts.n_max)?;
        let (r_p, rb_p) = eps_sums_dd(&plus, x);
        let (r_m, rb_m) = eps_sums_dd(&minus, x);
        let v = TwoFloat::from(d2) * rb_p * rb_m - r_p * r_m;
        (
            Complex64::new(v.into(), 0.0),
            plus.order.max(minus.order),
            plus.converged && minus.converged,
        )
    } else {
        let plus = compute_k_eps(params, x, EpsBranch::Plus, opts.tail_tol, opts.n_max)?;
        let minus = compute_k_eps(params, x, EpsBranch::Minus, opts.tail_tol, opts.n_max)?;
        let v = d2 * plus.weighted_sum(x) * minus.weighted_sum(x)
            - plus.plain_sum() * minus.plain_sum();
        (
            Complex64::new(v, 0.0),
            plus.order.max(minus.order),
            plus.converged && minus.converged,
        )
    };

    Ok(GEvaluation {
        value,
        x,
        z: Complex64::new(0.0, 0.0),
        kind: GKind::Eps,
        order_used: order,
        converged: tail_ok,
    })
}

/// The two R-sums of the ε model, exposed for the matching-condition checks
/// (the constant c of the embedding is recovered from their ratios).
pub fn eps_r_sums(params: &ModelParams, x: f64, opts: &EvalOptions) -> Result<EpsRSums> {
    let plus = compute_k_eps(params, x, EpsBranch::Plus, opts.tail_tol, opts.n_max)?;
    let minus = compute_k_eps(params, x, EpsBranch::Minus, opts.tail_tol, opts.n_max)?;
    Ok(EpsRSums {
        r_plus: plus.plain_sum(),
        r_minus: minus.plain_sum(),
        rbar_plus: plus.weighted_sum(x),
        rbar_minus: minus.weighted_sum(x),
    })
}

/// R^± and R̄^± evaluated at one x.
#[derive(Debug, Clone, Copy)]
pub struct EpsRSums {
    pub r_plus: f64,
    pub r_minus: f64,
    pub rbar_plus: f64,
    pub rbar_minus: f64,
}

impl EpsRSums {
    /// c from the first matching condition: c R⁺ = Δ R̄⁻.
    pub fn c_from_first(&self, delta: f64) -> f64 {
        delta * self.rbar_minus / self.r_plus
    }

    /// c from the second matching condition: R⁻ = c Δ R̄⁺.
    pub fn c_from_second(&self, delta: f64) -> f64 {
        self.r_minus / (delta * self.rbar_plus)
    }
}

/// Family of poles for the residue computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResidueBranch {
    /// Plain G_± with poles at x = n.
    Parity(Parity),
    /// ε-model pole family x = n − ε (carried by the K⁺ sums).
    EpsUpper,
    /// ε-model pole family x = n + ε (carried by the K⁻ sums).
    EpsLower,
}

impl ResidueBranch {
    fn pole_position(self, n: usize, epsilon: f64) -> f64 {
        match self {
            ResidueBranch::Parity(_) => n as f64,
            ResidueBranch::EpsUpper => n as f64 - epsilon,
            ResidueBranch::EpsLower => n as f64 + epsilon,
        }
    }
}

/// Numerical residue of the chosen G-function at its n-th pole, as the
/// Richardson-extrapolated limit of (x − x_pole)·G over the two-sided
/// sequence x_pole ± δ_k, δ_k = 10⁻²·2⁻ᵏ.
///
/// A closed form would need the pole parts of every K_m with m > n; the
/// two-sided average cancels the odd analytic terms, so the extrapolation
/// table converges in δ².
pub fn residue_at_pole(
    params: &ModelParams,
    branch: ResidueBranch,
    n: usize,
    opts: &EvalOptions,
) -> Result<f64> {
    let pole = branch.pole_position(n, params.epsilon);
    let eval = |x: f64| -> Result<f64> {
        let e = match branch {
            ResidueBranch::Parity(p) => eval_g(params, p, x, opts)?,
            ResidueBranch::EpsUpper | ResidueBranch::EpsLower => eval_g_eps(params, x, opts)?,
        };
        Ok(e.value.re)
    };

    const LEVELS: usize = 7;
    let mut table = [[0.0f64; LEVELS]; LEVELS];
    for k in 0..LEVELS {
        let delta = 1e-2 * 0.5f64.powi(k as i32);
        let plus = eval(pole + delta)?;
        let minus = eval(pole - delta)?;
        table[k][0] = 0.5 * (delta * plus - delta * minus);
        for j in 1..=k {
            let factor = 4.0f64.powi(j as i32);
            table[k][j] = (factor * table[k][j - 1] - table[k - 1][j - 1]) / (factor - 1.0);
        }
    }

    let best = table[LEVELS - 1][LEVELS - 1];
    let prev = table[LEVELS - 2][LEVELS - 2];
    let spread = (best - prev).abs();
    if spread > (1e-6 * best.abs()).max(1e-9) {
        return Err(CoreError::ResidueNoConvergence { spread });
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> EvalOptions {
        EvalOptions::default()
    }

    #[test]
    fn small_g_limit_of_plain_g() {
        // g → 0: the series truncates at n = 0 and G₊ = 1 − Δ/x vanishes at x = Δ.
        let p = ModelParams::new(1e-10, 0.7);
        let e = eval_g(&p, Parity::Plus, 0.7, &opts()).unwrap();
        assert!(e.value.norm() < 1e-6, "G = {}", e.value);
        assert_eq!(e.value.im, 0.0);
    }

    #[test]
    fn z_zero_matches_plain_bit_for_bit() {
        let p = ModelParams::new(1.0, 0.7);
        for &x in &[0.31, 2.6, 7.45] {
            let plain = eval_g(&p, Parity::Plus, x, &opts()).unwrap();
            let general =
                eval_g_general(&p, Parity::Plus, x, Complex64::new(0.0, 0.0), &opts()).unwrap();
            assert_eq!(plain.value.re.to_bits(), general.value.re.to_bits());
            assert_eq!(plain.value.im.to_bits(), general.value.im.to_bits());
        }
    }

    #[test]
    fn plain_g_is_real_for_real_x() {
        let p = ModelParams::new(0.7, 1.5);
        for &x in &[0.4, 3.3, 9.6] {
            let e = eval_g(&p, Parity::Minus, x, &opts()).unwrap();
            assert_eq!(e.value.im, 0.0, "x = {x}");
        }
    }

    #[test]
    fn parity_reflection_is_exact() {
        let x = 4.42;
        let a = eval_g(&ModelParams::new(1.0, 0.7), Parity::Minus, x, &opts()).unwrap();
        let b = eval_g(&ModelParams::new(1.0, -0.7), Parity::Plus, x, &opts()).unwrap();
        assert_eq!(a.value, b.value);
    }

    #[test]
    fn conjugate_symmetry() {
        let p = ModelParams::new(1.0, 0.7);
        let z = Complex64::new(0.2, 0.5);
        let a = eval_g_general(&p, Parity::Plus, 3.4, z, &opts()).unwrap();
        let b = eval_g_general(&p, Parity::Plus, 3.4, z.conj(), &opts()).unwrap();
        assert_eq!(a.value.conj(), b.value);
    }

    #[test]
    fn outside_d0_is_flagged_not_rejected() {
        let p = ModelParams::new(1.0, 0.7);
        let e = eval_g_general(&p, Parity::Plus, 3.4, Complex64::new(0.0, 5.0), &opts()).unwrap();
        assert!(!e.converged);
        assert!(e.order_used > 0);
    }

    #[test]
    fn singular_point_rejected() {
        let p = ModelParams::new(1.0, 0.7);
        let err = eval_g_general(&p, Parity::Plus, 3.4, Complex64::new(1.0, 0.0), &opts());
        assert!(matches!(err, Err(CoreError::SingularPoint { .. })));
    }

    #[test]
    fn reduction_identity_at_eps_zero() {
        let p = ModelParams::with_epsilon(0.7, 0.4, 0.0);
        for &x in &[0.45, 1.42, 3.38, 6.6] {
            let ge = eval_g_eps(&p, x, &opts()).unwrap().value.re;
            let gp = eval_g(&p, Parity::Plus, x, &opts()).unwrap().value.re;
            let gm = eval_g(&p, Parity::Minus, x, &opts()).unwrap().value.re;
            let denom = (gp * gm).abs().max(1.0);
            assert!(
                (ge + gp * gm).abs() / denom < 1e-12,
                "x = {x}: G_eps = {ge}, G+G- = {}",
                gp * gm
            );
        }
    }

    #[test]
    fn residue_vanishes_for_delta_zero() {
        let p = ModelParams::new(0.9, 0.0);
        let r = residue_at_pole(&p, ResidueBranch::Parity(Parity::Plus), 1, &opts()).unwrap();
        assert!(r.abs() < 1e-12, "residue {r:e}");
    }

    #[test]
    fn residue_generic_parameters_nonzero() {
        let p = ModelParams::new(1.0, 0.7);
        let r = residue_at_pole(&p, ResidueBranch::Parity(Parity::Plus), 1, &opts()).unwrap();
        assert!(r.abs() > 1e-3, "residue {r:e}");
    }

    #[test]
    fn extended_and_double_agree_at_moderate_x() {
        let p = ModelParams::new(1.0, 0.7);
        let x = 8.37;
        let a = eval_g(&p, Parity::Plus, x, &opts().with_precision(Precision::Double)).unwrap();
        let b = eval_g(&p, Parity::Plus, x, &opts().with_precision(Precision::Extended)).unwrap();
        assert!(
            (a.value.re - b.value.re).abs() <= 1e-11 * b.value.re.abs().max(1.0),
            "double {} vs extended {}",
            a.value.re,
            b.value.re
        );
    }
}
