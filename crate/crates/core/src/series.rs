//! Coefficient sequences K_n(x) of the local Frobenius-type solutions around
//! z = −g, for the symmetric model and for the broken-symmetry embedding.
//!
//! Both families obey a three-term recurrence
//!
//! ```text
//! (n+1) K_{n+1} = f_n(x) K_n − K_{n−1},      K_0 = 1, K_1 = f_0(x),
//! f_n(x) = 2g + (n − x + s·ε + Δ²/(x + s·ε − n)) / (2g),
//! ```
//!
//! with s = 0 for the symmetric model and s = ±1 for the two coefficient
//! families of the ε model. The recurrence is obtained by inserting the
//! power-series ansatz into the first-order system; it is not taken on
//! faith: [`ode_residual`] reconstructs the vector solution from the
//! coefficients and measures how well it satisfies the system on a grid
//! inside the convergence disk D1.
//!
//! Internally the recurrence is run on the scaled terms κ_n = K_n gⁿ, which
//! stay O(1)-bounded for every admissible parameter combination (the raw K_n
//! overflow for very small g). The scaled recurrence reads
//! `(n+1) κ_{n+1} = (f_n g) κ_n − g² κ_{n−1}`.

use crate::params::{CoreError, ModelParams, Result};
use num_complex::Complex64;
use twofloat::TwoFloat;

/// Exclusion half-width around each pole of the coefficient functions.
pub const DELTA_POLE: f64 = 1e-4;
/// Default absolute tolerance on the weighted tail term.
pub const DEFAULT_TAIL_TOL: f64 = 1e-12;
/// Default hard cap on the expansion order.
pub const DEFAULT_N_MAX: usize = 500;
/// Number of consecutive sub-tolerance terms required to stop.
const TAIL_RUN: usize = 5;

/// Coefficient family of the ε-model embedding. `Plus` carries the
/// denominators (x + ε − n), `Minus` the denominators (x − ε − n); at ε = 0
/// both collapse onto the symmetric-model coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpsBranch {
    Plus,
    Minus,
}

impl EpsBranch {
    /// Shift s·ε entering the recurrence and the pole set {n − s·ε}.
    pub fn shift(self, epsilon: f64) -> f64 {
        match self {
            EpsBranch::Plus => epsilon,
            EpsBranch::Minus => -epsilon,
        }
    }
}

/// Truncated coefficient sequence of one local solution.
#[derive(Debug, Clone)]
pub struct SeriesExpansion {
    /// Raw coefficients K_0..K_N. May overflow to ±inf for extreme g; every
    /// evaluator works on [`scaled`](Self::scaled) instead.
    pub coeffs: Vec<f64>,
    /// Scaled terms κ_n = K_n gⁿ.
    pub scaled: Vec<f64>,
    /// Expansion order N (= coeffs.len() − 1).
    pub order: usize,
    /// Geometric estimate of the truncation remainder of Σ |κ_n| including
    /// the pole-proximity weight.
    pub tail_bound: f64,
    /// Whether the tail criterion was met within the order cap.
    pub converged: bool,
    /// Pole shift s·ε this expansion was built with (0 for the symmetric model).
    pub pole_shift: f64,
}

/// Extended-precision twin of [`SeriesExpansion`]; only the scaled terms are
/// kept since the evaluators never touch the raw coefficients.
#[derive(Debug, Clone)]
pub(crate) struct SeriesExpansionDd {
    pub scaled: Vec<TwoFloat>,
    pub order: usize,
    pub converged: bool,
    pub pole_shift: f64,
}

/// Distance from y to the nearest integer in [0, n_max].
fn pole_distance(y: f64, n_max: usize) -> (f64, f64) {
    let nearest = y.round().clamp(0.0, n_max as f64);
    ((y - nearest).abs(), nearest)
}

fn check_pole(x: f64, shift: f64, n_max: usize) -> Result<()> {
    let (dist, nearest) = pole_distance(x + shift, n_max);
    if dist < DELTA_POLE {
        return Err(CoreError::PoleProximity {
            x,
            pole: nearest - shift,
            dist,
            window: DELTA_POLE,
        });
    }
    Ok(())
}

/// Recurrence coefficient f_n(x) for pole shift s·ε.
#[inline]
fn f_coef(params: &ModelParams, x: f64, shift: f64, n: usize) -> f64 {
    let g = params.g;
    let d2 = params.delta * params.delta;
    let n = n as f64;
    2.0 * g + (n - x + shift + d2 / (x + shift - n)) / (2.0 * g)
}

#[inline]
fn f_coef_dd(params: &ModelParams, x: f64, shift: f64, n: usize) -> TwoFloat {
    let g = TwoFloat::from(params.g);
    let delta = TwoFloat::from(params.delta);
    let x = TwoFloat::from(x);
    let shift = TwoFloat::from(shift);
    let n = TwoFloat::from(n as f64);
    let two_g = g * 2.0;
    two_g + (n - x + shift + delta * delta / (x + shift - n)) / two_g
}

enum StopRule {
    /// Adaptive: stop after TAIL_RUN consecutive weighted terms below tol.
    /// `radius` rescales the tail test to |κ_n| radiusⁿ for evaluations at
    /// |z+g| = radius·g; the contract criterion uses radius 1.
    Tail { tol: f64, n_max: usize, radius: f64 },
    /// Like `Tail`, but when the criterion cannot be met (the series
    /// diverges at this radius) the expansion is cut at the optimal
    /// truncation point — the term-envelope minimum after its global
    /// maximum — and flagged unconverged instead of erroring out.
    TailOrBest { tol: f64, n_max: usize, radius: f64 },
    /// Run to exactly this order, recording whether the tail criterion was
    /// also met along the way.
    FixedOrder { order: usize, tol: f64 },
}

impl StopRule {
    fn unpack(&self) -> (usize, f64, f64) {
        match *self {
            StopRule::Tail { tol, n_max, radius } | StopRule::TailOrBest { tol, n_max, radius } => {
                (n_max, tol, radius)
            }
            StopRule::FixedOrder { order, tol } => (order, tol, 1.0),
        }
    }

    fn is_adaptive(&self) -> bool {
        !matches!(self, StopRule::FixedOrder { .. })
    }
}

/// Optimal truncation of a divergent tail: the term-envelope minimum (the
/// "dip") between the transient peak and the regrowth of the divergent
/// terms. Envelopes here rise to a peak near n ≈ x, fall superexponentially
/// while the coefficients track the minimal recurrence solution, and rise
/// again once the dominant solution (or its rounding-noise image) takes
/// over, so the walk looks for peak → dip → regrowth with a 5-e-fold swing
/// threshold.
fn optimal_cut(log_terms: &[f64]) -> usize {
    const SWING: f64 = 6.0;
    const RISE_RUN: usize = 4;
    // Window-max smoothing: the coefficients alternate in sign and an
    // isolated near-zero term must not masquerade as the envelope dip.
    let n = log_terms.len();
    let smooth: Vec<f64> = (0..n)
        .map(|i| {
            log_terms[i..(i + 3).min(n)]
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();

    let mut running_max = f64::NEG_INFINITY;
    let mut past_peak = false;
    let mut best = f64::INFINITY;
    let mut best_i = 0usize;
    let mut rise = 0usize;
    for (i, &v) in smooth.iter().enumerate() {
        if v == f64::NEG_INFINITY {
            // Underflowed region: nothing after it can improve the sum.
            if past_peak {
                return i.max(1);
            }
            continue;
        }
        if !v.is_finite() {
            continue;
        }
        running_max = running_max.max(v);
        if !past_peak && v < running_max - SWING {
            past_peak = true;
        }
        if past_peak {
            if v < best {
                best = v;
                best_i = i;
                rise = 0;
            } else if v > best + SWING {
                rise += 1;
                if rise >= RISE_RUN {
                    break;
                }
            }
        }
    }
    if best_i == 0 {
        // No peak-dip structure: the terms grow from the start, so the
        // least-bad truncation is the global envelope minimum.
        let mut m = 0usize;
        let mut m_val = f64::INFINITY;
        for (i, &v) in smooth.iter().enumerate() {
            if v.is_finite() && v < m_val {
                m_val = v;
                m = i;
            }
        }
        return m.max(1);
    }
    best_i.max(1)
}

fn expand(
    params: &ModelParams,
    x: f64,
    shift: f64,
    rule: StopRule,
) -> Result<SeriesExpansion> {
    params.validate()?;
    let (cap, tol, radius) = rule.unpack();
    check_pole(x, shift, cap)?;
    if tol <= 0.0 {
        return Err(CoreError::InvalidParameter(format!(
            "tail tolerance must be positive, got {tol}"
        )));
    }

    let g = params.g;
    let g2 = g * g;
    let (dist, _) = pole_distance(x + shift, cap);
    let weight = 1.0 + params.delta.abs() / dist;
    let log_radius = radius.ln();

    let mut scaled = Vec::with_capacity(64);
    scaled.push(1.0);
    scaled.push(f_coef(params, x, shift, 0) * g);

    let mut run = 0usize;
    let mut stop_at: Option<usize> = None;
    let mut n = 1usize;
    let mut radius_pow = radius;
    while n < cap {
        let next = (f_coef(params, x, shift, n) * g * scaled[n] - g2 * scaled[n - 1])
            / (n as f64 + 1.0);
        scaled.push(next);
        n += 1;
        radius_pow *= radius;
        if next.abs() * radius_pow * weight < tol {
            run += 1;
            if run >= TAIL_RUN {
                stop_at = Some(n);
                if matches!(rule, StopRule::Tail { .. } | StopRule::TailOrBest { .. }) {
                    break;
                }
            }
        } else {
            run = 0;
            if rule.is_adaptive() {
                stop_at = None;
            }
        }
    }

    let mut converged = stop_at.is_some();
    if !converged {
        match rule {
            StopRule::Tail { n_max, .. } => {
                return Err(CoreError::NoConvergence {
                    n_max,
                    tail: scaled.last().map(|k| k.abs() * weight).unwrap_or(f64::NAN),
                });
            }
            StopRule::TailOrBest { .. } => {
                let log_terms: Vec<f64> = scaled
                    .iter()
                    .enumerate()
                    .map(|(i, k)| k.abs().ln() + i as f64 * log_radius)
                    .collect();
                scaled.truncate(optimal_cut(&log_terms) + 1);
                converged = false;
            }
            StopRule::FixedOrder { .. } => {}
        }
    }

    let order = scaled.len() - 1;
    // Geometric remainder estimate: the term ratio tends to 1/2.
    let tail_bound = 2.0 * weight * scaled[order].abs();

    // Raw coefficients for reporting; guarded against g^{-n} overflow.
    let mut coeffs = Vec::with_capacity(scaled.len());
    let inv_g = 1.0 / g;
    let mut inv_pow = 1.0f64;
    for &k in &scaled {
        let raw = k * inv_pow;
        coeffs.push(if raw.is_finite() { raw } else { f64::INFINITY.copysign(raw) });
        inv_pow *= inv_g;
        if !inv_pow.is_finite() {
            inv_pow = f64::MAX;
        }
    }

    Ok(SeriesExpansion {
        coeffs,
        scaled,
        order,
        tail_bound,
        converged,
        pole_shift: shift,
    })
}

fn expand_dd(
    params: &ModelParams,
    x: f64,
    shift: f64,
    rule: StopRule,
) -> Result<SeriesExpansionDd> {
    params.validate()?;
    let (cap, tol, radius) = rule.unpack();
    check_pole(x, shift, cap)?;

    let g = TwoFloat::from(params.g);
    let g2 = g * g;
    let (dist, _) = pole_distance(x + shift, cap);
    let weight = 1.0 + params.delta.abs() / dist;
    let log_radius = radius.ln();

    let mut scaled: Vec<TwoFloat> = Vec::with_capacity(64);
    scaled.push(TwoFloat::from(1.0));
    scaled.push(f_coef_dd(params, x, shift, 0) * g);

    let mut run = 0usize;
    let mut stop_at: Option<usize> = None;
    let mut n = 1usize;
    let mut radius_pow = radius;
    while n < cap {
        let next = (f_coef_dd(params, x, shift, n) * g * scaled[n] - g2 * scaled[n - 1])
            / TwoFloat::from(n as f64 + 1.0);
        scaled.push(next);
        n += 1;
        radius_pow *= radius;
        let mag: f64 = next.abs().into();
        if mag * radius_pow * weight < tol {
            run += 1;
            if run >= TAIL_RUN {
                stop_at = Some(n);
                if matches!(rule, StopRule::Tail { .. } | StopRule::TailOrBest { .. }) {
                    break;
                }
            }
        } else {
            run = 0;
            if rule.is_adaptive() {
                stop_at = None;
            }
        }
    }

    let mut converged = stop_at.is_some();
    if !converged {
        match rule {
            StopRule::Tail { n_max, .. } => {
                let tail: f64 = scaled.last().map(|k| k.abs().into()).unwrap_or(f64::NAN);
                return Err(CoreError::NoConvergence {
                    n_max,
                    tail: tail * weight,
                });
            }
            StopRule::TailOrBest { .. } => {
                let log_terms: Vec<f64> = scaled
                    .iter()
                    .enumerate()
                    .map(|(i, k)| {
                        let mag: f64 = k.abs().into();
                        mag.ln() + i as f64 * log_radius
                    })
                    .collect();
                scaled.truncate(optimal_cut(&log_terms) + 1);
                converged = false;
            }
            StopRule::FixedOrder { .. } => {}
        }
    }

    Ok(SeriesExpansionDd {
        order: scaled.len() - 1,
        scaled,
        converged,
        pole_shift: shift,
    })
}

/// Coefficients K_n(x) of the symmetric model, truncated adaptively.
///
/// Stops at the smallest N where |K_n gⁿ| (1 + |Δ|/dist(x, ℕ)) stays below
/// `tol_tail` for five consecutive terms.
pub fn compute_k(
    params: &ModelParams,
    x: f64,
    tol_tail: f64,
    n_max: usize,
) -> Result<SeriesExpansion> {
    expand(params, x, 0.0, StopRule::Tail { tol: tol_tail, n_max, radius: 1.0 })
}

/// Like [`compute_k`] but runs to exactly `order` terms; `converged` records
/// whether the tail criterion was also met. Used for z-sweeps at fixed
/// truncation and for the truncation-override path.
pub fn compute_k_fixed(
    params: &ModelParams,
    x: f64,
    order: usize,
    tol_tail: f64,
) -> Result<SeriesExpansion> {
    expand(params, x, 0.0, StopRule::FixedOrder { order, tol: tol_tail })
}

/// Coefficients K_n^±(x) of the ε-model embedding.
///
/// The `Plus` family has poles where x + ε ∈ ℕ, the `Minus` family where
/// x − ε ∈ ℕ. At ε = 0 both reproduce [`compute_k`] exactly (bit for bit,
/// same code path).
pub fn compute_k_eps(
    params: &ModelParams,
    x: f64,
    branch: EpsBranch,
    tol_tail: f64,
    n_max: usize,
) -> Result<SeriesExpansion> {
    expand(
        params,
        x,
        branch.shift(params.epsilon),
        StopRule::Tail { tol: tol_tail, n_max, radius: 1.0 },
    )
}

/// Like [`compute_k`] but with the tail criterion tightened for evaluation
/// at |z + g| = `radius`·g, where the terms grow like |κ_n| radiusⁿ. Needed
/// whenever the reconstructed solution is evaluated away from z = 0 (the
/// plain criterion is calibrated for radius 1).
pub fn compute_k_at_radius(
    params: &ModelParams,
    x: f64,
    radius: f64,
    tol_tail: f64,
    n_max: usize,
) -> Result<SeriesExpansion> {
    expand(
        params,
        x,
        0.0,
        StopRule::Tail { tol: tol_tail, n_max, radius: radius.max(1.0) },
    )
}

/// Truncation for a G evaluation at radius r = max(|z+g|, |g−z|)/g: the
/// adaptive tail criterion at that radius when it can be met, otherwise the
/// optimal truncation of the divergent tail with `converged = false`.
/// Radius 1 (z = 0) is exactly [`compute_k`].
pub fn compute_k_for_eval(
    params: &ModelParams,
    x: f64,
    radius: f64,
    tol_tail: f64,
    n_max: usize,
) -> Result<SeriesExpansion> {
    expand(
        params,
        x,
        0.0,
        StopRule::TailOrBest { tol: tol_tail, n_max, radius: radius.max(1.0) },
    )
}

pub(crate) fn compute_k_for_eval_dd(
    params: &ModelParams,
    x: f64,
    radius: f64,
    tol_tail: f64,
    n_max: usize,
) -> Result<SeriesExpansionDd> {
    expand_dd(
        params,
        x,
        0.0,
        StopRule::TailOrBest { tol: tol_tail, n_max, radius: radius.max(1.0) },
    )
}

/// Fixed-order variant of [`compute_k_eps`].
pub fn compute_k_eps_fixed(
    params: &ModelParams,
    x: f64,
    branch: EpsBranch,
    order: usize,
    tol_tail: f64,
) -> Result<SeriesExpansion> {
    expand(
        params,
        x,
        branch.shift(params.epsilon),
        StopRule::FixedOrder { order, tol: tol_tail },
    )
}

pub(crate) fn compute_k_fixed_dd(
    params: &ModelParams,
    x: f64,
    order: usize,
    tol_tail: f64,
) -> Result<SeriesExpansionDd> {
    expand_dd(params, x, 0.0, StopRule::FixedOrder { order, tol: tol_tail })
}

pub(crate) fn compute_k_eps_dd(
    params: &ModelParams,
    x: f64,
    branch: EpsBranch,
    tol_tail: f64,
    n_max: usize,
) -> Result<SeriesExpansionDd> {
    expand_dd(
        params,
        x,
        branch.shift(params.epsilon),
        StopRule::Tail { tol: tol_tail, n_max, radius: 1.0 },
    )
}

impl SeriesExpansion {
    /// Σ κ_n uⁿ and d/dw Σ K_n wⁿ = (1/g) Σ n κ_n uⁿ⁻¹ at u = (z+g)/g.
    fn sum_and_derivative(&self, u: Complex64, g: f64) -> (Complex64, Complex64) {
        let mut s = Complex64::new(0.0, 0.0);
        let mut ds = Complex64::new(0.0, 0.0);
        let mut u_prev = Complex64::new(0.0, 0.0);
        let mut u_pow = Complex64::new(1.0, 0.0);
        for (n, &k) in self.scaled.iter().enumerate() {
            s += k * u_pow;
            ds += k * (n as f64) * u_prev;
            u_prev = u_pow;
            u_pow *= u;
        }
        (s, ds / g)
    }

    /// Same sums with every term divided by (x + shift − n).
    fn weighted_sum_and_derivative(
        &self,
        u: Complex64,
        g: f64,
        x: f64,
    ) -> (Complex64, Complex64) {
        let mut s = Complex64::new(0.0, 0.0);
        let mut ds = Complex64::new(0.0, 0.0);
        let mut u_prev = Complex64::new(0.0, 0.0);
        let mut u_pow = Complex64::new(1.0, 0.0);
        for (n, &k) in self.scaled.iter().enumerate() {
            let w = k / (x + self.pole_shift - n as f64);
            s += w * u_pow;
            ds += w * (n as f64) * u_prev;
            u_prev = u_pow;
            u_pow *= u;
        }
        (s, ds / g)
    }
}

/// Validates a grid point for [`ode_residual`]: strictly inside D1 and away
/// from both regular singular points z = ±g.
fn check_grid_point(z: Complex64, g: f64) -> Result<()> {
    let w = z + Complex64::new(g, 0.0);
    let to_plus_g = (z - Complex64::new(g, 0.0)).norm();
    if w.norm() >= 2.0 * g * (1.0 - 1e-9) {
        return Err(CoreError::GridOutsideDomain { z });
    }
    if w.norm() < 1e-3 * g || to_plus_g < 1e-3 * g {
        return Err(CoreError::GridOutsideDomain { z });
    }
    Ok(())
}

/// Default residual grid: 20 points on two rings |z+g| = 0.85g and 0.45g.
/// The outer radius keeps the truncation remainder of a default-tolerance
/// series far below the 1e-10 residual contract while still probing a
/// substantial part of D1; both rings stay clear of z = ±g.
pub fn residual_grid(g: f64) -> Vec<Complex64> {
    let mut pts = Vec::with_capacity(20);
    let center = Complex64::new(-g, 0.0);
    for j in 0..12 {
        let th = 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / 12.0;
        pts.push(center + Complex64::from_polar(0.85 * g, th));
    }
    for j in 0..8 {
        let th = 2.0 * std::f64::consts::PI * (j as f64 + 0.25) / 8.0;
        pts.push(center + Complex64::from_polar(0.45 * g, th));
    }
    pts
}

/// Independent correctness oracle for [`compute_k`]: reconstructs
/// Ψ = (φ₁, φ₂) from the coefficients, differentiates the series term by
/// term and returns the maximum normalized residual of the first-order
/// system over the grid.
///
/// The common factor e^{−gz} cancels in the normalized residual and is not
/// applied.
pub fn ode_residual(
    params: &ModelParams,
    x: f64,
    series: &SeriesExpansion,
    grid: &[Complex64],
) -> Result<f64> {
    let g = params.g;
    let delta = params.delta;
    let energy = params.energy_of(x);
    let mut worst = 0.0f64;

    for &z in grid {
        check_grid_point(z, g)?;
        let u = (z + Complex64::new(g, 0.0)) / g;
        // φ₂ ∝ S, φ₁ ∝ T = Δ Σ K_n wⁿ/(x−n); primes are w-derivatives.
        let (s, ds) = series.sum_and_derivative(u, g);
        let (t_raw, dt_raw) = series.weighted_sum_and_derivative(u, g, x);
        let t = delta * t_raw;
        let dt = delta * dt_raw;

        let phi1 = t;
        let phi2 = s;
        let dphi1 = dt - g * t;
        let dphi2 = ds - g * s;

        let zp = z + Complex64::new(g, 0.0);
        let zm = z - Complex64::new(g, 0.0);
        let r1 = dphi1 - ((energy - g * z) * phi1 - delta * phi2) / zp;
        let r2 = dphi2 - (-delta * phi1 + (energy + g * z) * phi2) / zm;

        let norm = (phi1.norm_sqr() + phi2.norm_sqr()).sqrt().max(f64::MIN_POSITIVE);
        let res = (r1.norm_sqr() + r2.norm_sqr()).sqrt() / norm;
        worst = worst.max(res);
    }
    Ok(worst)
}

/// Four-component residual oracle for the ε-model embedding. The constant c
/// linking the two halves of the embedded system scales whole sub-blocks and
/// cancels from the normalized residual, so it is set to 1 here.
pub fn ode_residual_eps(
    params: &ModelParams,
    x: f64,
    plus: &SeriesExpansion,
    minus: &SeriesExpansion,
    grid: &[Complex64],
) -> Result<f64> {
    let g = params.g;
    let delta = params.delta;
    let eps = params.epsilon;
    let energy = params.energy_of(x);
    let mut worst = 0.0f64;

    for &z in grid {
        check_grid_point(z, g)?;
        let u = (z + Complex64::new(g, 0.0)) / g;

        let (s_p, ds_p) = plus.sum_and_derivative(u, g);
        let (s_m, ds_m) = minus.sum_and_derivative(u, g);
        let (t_p_raw, dt_p_raw) = plus.weighted_sum_and_derivative(u, g, x);
        let (t_m_raw, dt_m_raw) = minus.weighted_sum_and_derivative(u, g, x);

        // Component layout (c = 1): φ₁ = T⁻, φ₂ = T⁺, φ̄₁ = S⁺, φ̄₂ = S⁻,
        // with T^± = Δ Σ K_n^± wⁿ/(x ± ε − n).
        let phi1 = delta * t_m_raw;
        let phi2 = delta * t_p_raw;
        let phib1 = s_p;
        let phib2 = s_m;
        let dphi1 = delta * dt_m_raw - g * phi1;
        let dphi2 = delta * dt_p_raw - g * phi2;
        let dphib1 = ds_p - g * phib1;
        let dphib2 = ds_m - g * phib2;

        let zp = z + Complex64::new(g, 0.0);
        let zm = z - Complex64::new(g, 0.0);
        let r1 = dphi1 - ((energy - eps - g * z) * phi1 - delta * phib2) / zp;
        let r2 = dphi2 - ((energy + eps - g * z) * phi2 - delta * phib1) / zp;
        let r3 = dphib1 - (-delta * phi2 + (energy - eps + g * z) * phib1) / zm;
        let r4 = dphib2 - (-delta * phi1 + (energy + eps + g * z) * phib2) / zm;

        let norm = (phi1.norm_sqr() + phi2.norm_sqr() + phib1.norm_sqr() + phib2.norm_sqr())
            .sqrt()
            .max(f64::MIN_POSITIVE);
        let res = (r1.norm_sqr() + r2.norm_sqr() + r3.norm_sqr() + r4.norm_sqr()).sqrt() / norm;
        worst = worst.max(res);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(g: f64) -> Vec<Complex64> {
        residual_grid(g)
    }

    #[test]
    fn k0_is_one_and_k1_matches_f0() {
        // g=1, Δ=0.7, x=0.5: f_0 = 2 + (−0.5 + 0.49/0.5)/2 = 2.24
        let p = ModelParams::new(1.0, 0.7);
        let s = compute_k(&p, 0.5, DEFAULT_TAIL_TOL, DEFAULT_N_MAX).unwrap();
        assert_eq!(s.coeffs[0], 1.0);
        assert!((s.coeffs[1] - 2.24).abs() < 1e-14, "K_1 = {}", s.coeffs[1]);
    }

    #[test]
    fn k1_delta_zero() {
        // g=1, Δ=0, x=0.5: f_0 = 2 − 0.25 = 1.75
        let p = ModelParams::new(1.0, 0.0);
        let s = compute_k(&p, 0.5, DEFAULT_TAIL_TOL, DEFAULT_N_MAX).unwrap();
        assert!((s.coeffs[1] - 1.75).abs() < 1e-14);
    }

    #[test]
    fn residual_oracle_accepts_correct_series() {
        let p = ModelParams::new(1.0, 0.7);
        for &x in &[0.5, 1.37, 3.81, 7.2] {
            let s = compute_k(&p, x, DEFAULT_TAIL_TOL, DEFAULT_N_MAX).unwrap();
            let r = ode_residual(&p, x, &s, &grid(p.g)).unwrap();
            assert!(r < 1e-10, "x = {x}: residual {r:.3e}");
        }
    }

    #[test]
    fn residual_oracle_rejects_corrupted_k3() {
        let p = ModelParams::new(1.0, 0.7);
        let mut s = compute_k(&p, 0.5, DEFAULT_TAIL_TOL, DEFAULT_N_MAX).unwrap();
        s.scaled[3] *= 1.01;
        let r = ode_residual(&p, 0.5, &s, &grid(p.g)).unwrap();
        assert!(r > 1e-4, "corrupted residual only {r:.3e}");
    }

    #[test]
    fn residual_delta_zero_is_tiny() {
        // Δ=0 decouples the system; the series is the exact solution of a
        // first-order scalar equation.
        let p = ModelParams::new(1.0, 0.0);
        let s = compute_k(&p, 0.77, DEFAULT_TAIL_TOL, DEFAULT_N_MAX).unwrap();
        let r = ode_residual(&p, 0.77, &s, &grid(p.g)).unwrap();
        assert!(r < 1e-12, "residual {r:.3e}");
    }

    #[test]
    fn eps_branches_reduce_to_symmetric_at_eps_zero() {
        let p = ModelParams::with_epsilon(0.7, 0.4, 0.0);
        let base = compute_k(&p, 0.35, DEFAULT_TAIL_TOL, DEFAULT_N_MAX).unwrap();
        for branch in [EpsBranch::Plus, EpsBranch::Minus] {
            let s = compute_k_eps(&p, 0.35, branch, DEFAULT_TAIL_TOL, DEFAULT_N_MAX).unwrap();
            assert_eq!(s.scaled.len(), base.scaled.len());
            for (a, b) in s.scaled.iter().zip(base.scaled.iter()) {
                assert_eq!(a, b, "ε=0 reduction must be bit-exact");
            }
        }
    }

    #[test]
    fn eps_residual_small_for_generic_point() {
        let p = ModelParams::with_epsilon(0.7, 0.4, 0.3);
        let x = 1.2;
        let plus = compute_k_eps(&p, x, EpsBranch::Plus, DEFAULT_TAIL_TOL, DEFAULT_N_MAX).unwrap();
        let minus =
            compute_k_eps(&p, x, EpsBranch::Minus, DEFAULT_TAIL_TOL, DEFAULT_N_MAX).unwrap();
        let r = ode_residual_eps(&p, x, &plus, &minus, &grid(p.g)).unwrap();
        assert!(r < 1e-10, "ε-model residual {r:.3e}");
    }

    #[test]
    fn pole_proximity_rejected() {
        let p = ModelParams::new(1.0, 0.7);
        let err = compute_k(&p, 3.0 + 0.3 * DELTA_POLE, DEFAULT_TAIL_TOL, DEFAULT_N_MAX);
        assert!(matches!(err, Err(CoreError::PoleProximity { .. })));
    }

    #[test]
    fn delta_sign_does_not_change_coefficients() {
        let a = compute_k(&ModelParams::new(0.7, 0.4), 2.3, DEFAULT_TAIL_TOL, DEFAULT_N_MAX)
            .unwrap();
        let b = compute_k(&ModelParams::new(0.7, -0.4), 2.3, DEFAULT_TAIL_TOL, DEFAULT_N_MAX)
            .unwrap();
        assert_eq!(a.scaled, b.scaled);
    }

    #[test]
    fn truncation_prefix_is_stable() {
        let p = ModelParams::new(0.7, 1.5);
        let short = compute_k_fixed(&p, 4.4, 40, DEFAULT_TAIL_TOL).unwrap();
        let long = compute_k_fixed(&p, 4.4, 120, DEFAULT_TAIL_TOL).unwrap();
        for n in 0..=short.order {
            assert_eq!(short.scaled[n], long.scaled[n], "prefix changed at n = {n}");
        }
    }

    #[test]
    fn tiny_g_truncates_early_without_overflow() {
        let p = ModelParams::new(1e-4, 0.7);
        let s = compute_k(&p, 1.31, DEFAULT_TAIL_TOL, DEFAULT_N_MAX).unwrap();
        assert!(s.order < 80, "order {}", s.order);
        assert!(s.scaled.iter().all(|k| k.is_finite()));
    }

    #[test]
    fn dd_path_agrees_with_f64_at_moderate_x() {
        let p = ModelParams::new(1.0, 0.7);
        let a = compute_k(&p, 5.3, DEFAULT_TAIL_TOL, DEFAULT_N_MAX).unwrap();
        let b = compute_k_for_eval_dd(&p, 5.3, 1.0, DEFAULT_TAIL_TOL, DEFAULT_N_MAX).unwrap();
        assert_eq!(a.order, b.order);
        for n in 0..=a.order {
            let hi: f64 = b.scaled[n].into();
            let scale = a.scaled[n].abs().max(1e-300);
            assert!(
                (a.scaled[n] - hi).abs() / scale < 1e-12,
                "n = {n}: f64 {} vs dd {hi}",
                a.scaled[n]
            );
        }
    }
}
