//! Turns G-function evaluations into a labeled spectrum.
//!
//! The real line is cut into segments delimited by the poles of the chosen
//! G-function (integers for the symmetric model, {m ± ε} for the ε model),
//! each segment is sampled on a sign grid, and every sign change is refined
//! by bisection. Bisection is deliberate: evaluations are cheap and the
//! poles at the segment ends make derivative-based refiners fragile.
//!
//! For x beyond [`DELEGATE_ABOVE`] the plain series at z = 0 cancels too
//! deeply in double precision, so scanning delegates to the joint Re/Im
//! zero of the generalized G-function on the imaginary axis, where the
//! zero positions stay stable.

use crate::gfunction::{eval_g, eval_g_eps, eval_g_general, EvalOptions};
use crate::params::{CoreError, ModelParams, Parity, Result};
use crate::series::DELTA_POLE;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Above this x, scan_regular switches from the plain to the joint-zero path.
pub const DELEGATE_ABOVE: f64 = 30.0;
/// Default relative threshold of the joint-zero imaginary-part test.
pub const TOL_JOINT: f64 = 1e-6;
/// Default bisection width target.
pub const DEFAULT_TOL_X: f64 = 1e-10;
/// Default samples per unit x-interval.
pub const DEFAULT_GRID: usize = 40;

/// Which spectral condition a scan runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanTarget {
    /// G_± of the symmetric model.
    Parity(Parity),
    /// G_ε of the broken-symmetry model.
    Eps,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LevelKind {
    Regular,
    ExceptionalCandidate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    GZero,
    GGeneralZero,
    Oracle,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::GZero => "G_zero",
            Method::GGeneralZero => "G_general_zero",
            Method::Oracle => "oracle",
        }
    }
}

/// One spectral level located by the solver.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SpectrumLevel {
    pub x: f64,
    /// E = x − g².
    pub energy: f64,
    /// Parity sector; `None` for the ε model.
    pub parity: Option<Parity>,
    pub kind: LevelKind,
    pub method: Method,
    /// |G| at the located root.
    pub residual: f64,
    pub bracket: (f64, f64),
}

/// Sign-change bracketing on a sampled closure, honoring exact zeros.
fn brackets_on_grid(xs: &[f64], fs: &[f64]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..xs.len() - 1 {
        if fs[i] == 0.0 {
            out.push((i, i));
        } else if fs[i].signum() != fs[i + 1].signum() && fs[i + 1] != 0.0 {
            out.push((i, i + 1));
        }
    }
    if let Some(&last) = fs.last() {
        if last == 0.0 {
            out.push((xs.len() - 1, xs.len() - 1));
        }
    }
    out
}

/// Plain bisection to |hi − lo| < tol_x. `f` must have opposite signs at the
/// ends (or an exact zero, which is returned as-is).
fn bisect<F>(mut f: F, mut lo: f64, mut hi: f64, mut f_lo: f64, tol_x: f64) -> Result<(f64, (f64, f64))>
where
    F: FnMut(f64) -> Result<f64>,
{
    if f_lo == 0.0 {
        return Ok((lo, (lo, hi)));
    }
    for _ in 0..240 {
        if hi - lo < tol_x {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid)?;
        if f_mid == 0.0 {
            return Ok((mid, (lo, hi)));
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi), (lo, hi)))
}

/// Pole positions of the scan target within (lo, hi).
fn poles_in(target: ScanTarget, params: &ModelParams, lo: f64, hi: f64) -> Vec<f64> {
    let mut poles = Vec::new();
    let push = |poles: &mut Vec<f64>, p: f64| {
        if p > lo && p < hi {
            poles.push(p);
        }
    };
    let n_hi = hi.ceil().max(0.0) as i64 + 1;
    match target {
        ScanTarget::Parity(_) => {
            for n in 0..=n_hi {
                push(&mut poles, n as f64);
            }
        }
        ScanTarget::Eps => {
            for n in 0..=n_hi {
                push(&mut poles, n as f64 - params.epsilon);
                push(&mut poles, n as f64 + params.epsilon);
            }
        }
    }
    poles.sort_by(f64::total_cmp);
    poles.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    poles
}

/// Cuts (x_min, x_max) into pole-free segments, each shrunk by the
/// pole-exclusion window.
fn segments(target: ScanTarget, params: &ModelParams, x_min: f64, x_max: f64) -> Vec<(f64, f64)> {
    let poles = poles_in(target, params, x_min - 1.0, x_max + 1.0);
    let mut cuts = vec![x_min];
    for &p in &poles {
        if p > x_min && p < x_max {
            cuts.push(p);
        }
    }
    cuts.push(x_max);
    // Slightly wider than the exclusion window so segment endpoints can
    // never trip the pole guard by a rounding ulp.
    let margin = DELTA_POLE * 1.000001;
    let mut out = Vec::new();
    for pair in cuts.windows(2) {
        let mut lo = pair[0];
        let mut hi = pair[1];
        if let Some(&p) = poles.iter().find(|&&p| (p - lo).abs() < margin) {
            lo = p + margin;
        }
        if let Some(&p) = poles.iter().find(|&&p| (p - hi).abs() < margin) {
            hi = p - margin;
        }
        if hi - lo > 4.0 * DELTA_POLE {
            out.push((lo, hi));
        }
    }
    out
}

fn grid_points(lo: f64, hi: f64, per_unit: usize) -> Vec<f64> {
    let n = ((hi - lo) * per_unit as f64).ceil() as usize;
    let n = n.max(8);
    (0..=n)
        .map(|i| lo + (hi - lo) * i as f64 / n as f64)
        .collect()
}

fn real_value(target: ScanTarget, params: &ModelParams, x: f64, opts: &EvalOptions) -> Result<f64> {
    match target {
        ScanTarget::Parity(p) => Ok(eval_g(params, p, x, opts)?.value.re),
        ScanTarget::Eps => Ok(eval_g_eps(params, x, opts)?.value.re),
    }
}

fn level_from_root(
    target: ScanTarget,
    params: &ModelParams,
    x: f64,
    bracket: (f64, f64),
    residual: f64,
    method: Method,
) -> SpectrumLevel {
    SpectrumLevel {
        x,
        energy: params.energy_of(x),
        parity: match target {
            ScanTarget::Parity(p) => Some(p),
            ScanTarget::Eps => None,
        },
        kind: LevelKind::Regular,
        method,
        residual,
        bracket,
    }
}

fn scan_segment_plain(
    target: ScanTarget,
    params: &ModelParams,
    seg: (f64, f64),
    per_unit: usize,
    tol_x: f64,
    opts: &EvalOptions,
) -> Result<Vec<SpectrumLevel>> {
    let xs = grid_points(seg.0, seg.1, per_unit);
    let mut fs = Vec::with_capacity(xs.len());
    for &x in &xs {
        fs.push(real_value(target, params, x, opts)?);
    }
    let mut levels = Vec::new();
    for (i, j) in brackets_on_grid(&xs, &fs) {
        let (root, bracket) = if i == j {
            (xs[i], (xs[i], xs[i]))
        } else {
            bisect(
                |x| real_value(target, params, x, opts),
                xs[i],
                xs[j],
                fs[i],
                tol_x,
            )?
        };
        let residual = real_value(target, params, root, opts)?.abs();
        levels.push(level_from_root(target, params, root, bracket, residual, Method::GZero));
    }
    Ok(levels)
}

/// Scans for regular levels: zeros of the chosen G-function between its
/// poles, refined to |x_hi − x_lo| < tol_x, sorted by x.
///
/// Segments are scanned concurrently; the merged output is deterministic.
pub fn scan_regular(
    params: &ModelParams,
    target: ScanTarget,
    x_min: f64,
    x_max: f64,
    grid_per_interval: usize,
    tol_x: f64,
    opts: &EvalOptions,
) -> Result<Vec<SpectrumLevel>> {
    params.validate()?;
    if !(0.0 <= x_min && x_min < x_max) {
        return Err(CoreError::InvalidParameter(format!(
            "need 0 <= x_min < x_max, got ({x_min}, {x_max})"
        )));
    }
    if grid_per_interval < 8 {
        return Err(CoreError::InvalidParameter(
            "grid_per_interval must be at least 8".into(),
        ));
    }
    if matches!(target, ScanTarget::Parity(_)) && !params.is_symmetric() {
        return Err(CoreError::InvalidParameter(
            "parity sectors only exist for the symmetric model (ε = 0)".into(),
        ));
    }

    let segs = segments(target, params, x_min, x_max);
    let results: Vec<Result<Vec<SpectrumLevel>>> = segs
        .par_iter()
        .map(|&seg| match target {
            ScanTarget::Parity(parity) if seg.0 >= DELEGATE_ABOVE => {
                // Far out on the imaginary axis the optimally truncated
                // series swings through its zeros steeply; mildly imaginary
                // z0 leaves high-x levels as features too narrow to bracket.
                let z0 = Complex64::new(0.0, 5.0 * params.g);
                scan_joint_segment(params, parity, z0, seg, grid_per_interval.max(64), tol_x, TOL_JOINT, opts)
                    .map(|scan| scan.levels)
            }
            _ => scan_segment_plain(target, params, seg, grid_per_interval, tol_x, opts),
        })
        .collect();

    let mut levels = Vec::new();
    for r in results {
        levels.extend(r?);
    }
    levels.sort_by(|a, b| a.x.total_cmp(&b.x));
    levels.dedup_by(|a, b| (a.x - b.x).abs() < tol_x);
    Ok(levels)
}

/// A Re-zero of the generalized G-function that failed the joint test.
#[derive(Debug, Clone, Copy)]
pub struct RejectedZero {
    pub x: f64,
    /// |Im G| at the Re-zero.
    pub im_magnitude: f64,
    /// The threshold it had to beat.
    pub threshold: f64,
}

/// Outcome of a joint-zero scan: accepted levels plus diagnostics for the
/// Re-only zeros (which are never levels).
#[derive(Debug, Clone, Default)]
pub struct JointScan {
    pub levels: Vec<SpectrumLevel>,
    pub rejected: Vec<RejectedZero>,
}

/// Truncation order for a fixed-order x-sweep at one z0, chosen by a single
/// evaluation at the reference point (nudged off any pole) so the whole
/// trace is summed at one comparable order.
fn reference_order(
    params: &ModelParams,
    parity: Parity,
    z0: Complex64,
    x_ref: f64,
    opts: &EvalOptions,
) -> Result<usize> {
    if let Some(order) = opts.trunc {
        return Ok(order);
    }
    let mut x = x_ref;
    for _ in 0..8 {
        match eval_g_general(params, parity, x, z0, opts) {
            Ok(e) => return Ok(e.order_used),
            Err(CoreError::PoleProximity { .. }) => x += 3.0 * DELTA_POLE,
            Err(e) => return Err(e),
        }
    }
    Err(CoreError::InvalidParameter(format!(
        "could not pick a reference order near x = {x_ref}"
    )))
}

fn scan_joint_segment(
    params: &ModelParams,
    parity: Parity,
    z0: Complex64,
    seg: (f64, f64),
    per_unit: usize,
    tol_x: f64,
    tol_joint: f64,
    opts: &EvalOptions,
) -> Result<JointScan> {
    let order = reference_order(params, parity, z0, 0.5 * (seg.0 + seg.1), opts)?;
    let fixed = EvalOptions { trunc: Some(order), ..*opts };
    let eval = |x: f64| eval_g_general(params, parity, x, z0, &fixed);

    let xs = grid_points(seg.0, seg.1, per_unit);
    let mut re = Vec::with_capacity(xs.len());
    let mut im_abs = Vec::with_capacity(xs.len());
    for &x in &xs {
        let v = eval(x)?.value;
        re.push(v.re);
        im_abs.push(v.im.abs());
    }
    let mut sorted_im = im_abs.clone();
    sorted_im.sort_by(f64::total_cmp);
    let local_scale = sorted_im[sorted_im.len() / 2];
    let threshold = tol_joint * local_scale + f64::MIN_POSITIVE;

    let mut out = JointScan::default();
    for (i, j) in brackets_on_grid(&xs, &re) {
        let (root, bracket) = if i == j {
            (xs[i], (xs[i], xs[i]))
        } else {
            bisect(|x| Ok(eval(x)?.value.re), xs[i], xs[j], re[i], tol_x)?
        };
        let v = eval(root)?.value;
        if v.im.abs() <= threshold {
            let mut level =
                level_from_root(ScanTarget::Parity(parity), params, root, bracket, v.norm(), Method::GGeneralZero);
            level.residual = v.norm();
            out.levels.push(level);
        } else {
            out.rejected.push(RejectedZero {
                x: root,
                im_magnitude: v.im.abs(),
                threshold,
            });
        }
    }
    Ok(out)
}

/// Joint-zero scan of Re and Im of G_±(x; z0) over (x_min, x_max).
///
/// For purely real z0 the function is real on the real x-axis, the joint
/// test degenerates and every Re-zero is returned; cross-checking those
/// against the oracle is what exposes the unphysical zeros at real z0 ≠ 0.
pub fn scan_joint(
    params: &ModelParams,
    parity: Parity,
    z0: Complex64,
    x_min: f64,
    x_max: f64,
    grid_per_interval: usize,
    tol_x: f64,
    opts: &EvalOptions,
) -> Result<JointScan> {
    params.validate()?;
    let mut out = JointScan::default();
    for seg in segments(ScanTarget::Parity(parity), params, x_min, x_max) {
        let part = scan_joint_segment(params, parity, z0, seg, grid_per_interval, tol_x, TOL_JOINT, opts)?;
        out.levels.extend(part.levels);
        out.rejected.extend(part.rejected);
    }
    out.levels.sort_by(|a, b| a.x.total_cmp(&b.x));
    out.levels.dedup_by(|a, b| (a.x - b.x).abs() < tol_x);
    out.rejected.sort_by(|a, b| a.x.total_cmp(&b.x));
    Ok(out)
}

/// Locates the zero of Re G_±(x; z0) inside `bracket` by bisection, then
/// demands that |Im G| at the root is small against the median |Im G| over
/// the bracket. A Re-zero failing that test is not a level ([`CoreError::NoJointZero`]).
pub fn find_joint_zero(
    params: &ModelParams,
    parity: Parity,
    z0: Complex64,
    bracket: (f64, f64),
    opts: &EvalOptions,
) -> Result<SpectrumLevel> {
    find_joint_zero_with(params, parity, z0, bracket, 256, DEFAULT_TOL_X, TOL_JOINT, opts)
}

/// Full-control variant of [`find_joint_zero`].
#[allow(clippy::too_many_arguments)]
pub fn find_joint_zero_with(
    params: &ModelParams,
    parity: Parity,
    z0: Complex64,
    bracket: (f64, f64),
    grid_per_unit: usize,
    tol_x: f64,
    tol_joint: f64,
    opts: &EvalOptions,
) -> Result<SpectrumLevel> {
    params.validate()?;
    let (lo, hi) = bracket;
    if !(lo < hi) {
        return Err(CoreError::InvalidParameter(format!(
            "empty bracket ({lo}, {hi})"
        )));
    }
    let mut best_rejection: Option<RejectedZero> = None;
    let mut segs = segments(ScanTarget::Parity(Parity::Plus), params, lo, hi);
    if segs.is_empty() {
        segs.push((lo, hi));
    }
    // Scale the per-segment grid so narrow brackets still get enough samples.
    let per_unit = ((grid_per_unit as f64 / (hi - lo).min(1.0)).ceil() as usize).max(grid_per_unit);
    for seg in segs {
        let scan = scan_joint_segment(params, parity, z0, seg, per_unit, tol_x, tol_joint, opts)?;
        if let Some(level) = scan.levels.into_iter().next() {
            return Ok(level);
        }
        if let Some(rej) = scan.rejected.into_iter().min_by(|a, b| {
            (a.im_magnitude / a.threshold).total_cmp(&(b.im_magnitude / b.threshold))
        }) {
            let better = match &best_rejection {
                Some(b) => rej.im_magnitude / rej.threshold < b.im_magnitude / b.threshold,
                None => true,
            };
            if better {
                best_rejection = Some(rej);
            }
        }
    }
    match best_rejection {
        Some(r) => Err(CoreError::NoJointZero {
            lo,
            hi,
            im: r.im_magnitude,
            allowed: r.threshold,
        }),
        None => Err(CoreError::NoJointZero {
            lo,
            hi,
            im: f64::NAN,
            allowed: f64::NAN,
        }),
    }
}

/// Which model parameter an exceptional-point scan varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanParam {
    Delta,
    Coupling,
}

/// A confirmed doubly degenerate (Juddian) point.
#[derive(Debug, Clone, Copy)]
pub struct ExceptionalPoint {
    /// Value of the scanned parameter at the degeneracy.
    pub param: f64,
    /// Oracle parity gap at x = n there.
    pub gap: f64,
    /// Residue of G₊ at the pole x = n there.
    pub residue: f64,
}

/// Scans `scan` over `range` looking for parameter values at which the
/// oracle shows a doubly degenerate pair at x = n; each sign change of the
/// parity-resolved gap is refined by bisection and confirmed by a vanishing
/// G-function residue at the pole.
///
/// The oracle is the ground truth here; no closed-form degeneracy condition
/// is assumed.
pub fn find_exceptional(
    base: &ModelParams,
    n: usize,
    scan: ScanParam,
    range: (f64, f64),
    samples: usize,
    n_fock: usize,
    opts: &EvalOptions,
) -> Result<Vec<ExceptionalPoint>> {
    if n == 0 {
        return Err(CoreError::InvalidParameter(
            "exceptional levels sit at x = n >= 1".into(),
        ));
    }
    let with_param = |v: f64| -> ModelParams {
        match scan {
            ScanParam::Delta => ModelParams { delta: v, ..*base },
            ScanParam::Coupling => ModelParams { g: v, ..*base },
        }
    };
    let gap_at = |v: f64| -> Result<f64> {
        crate::oracle::degeneracy_gap(&with_param(v), n, n_fock)
    };

    let samples = samples.max(8);
    let mut vs = Vec::with_capacity(samples + 1);
    let mut gaps = Vec::with_capacity(samples + 1);
    for i in 0..=samples {
        let v = range.0 + (range.1 - range.0) * i as f64 / samples as f64;
        vs.push(v);
        gaps.push(gap_at(v)?);
    }

    let mut found = Vec::new();
    for (i, j) in brackets_on_grid(&vs, &gaps) {
        let (p_star, _) = if i == j {
            (vs[i], (vs[i], vs[i]))
        } else {
            bisect(gap_at, vs[i], vs[j], gaps[i], 1e-11)?
        };
        let gap = gap_at(p_star)?;
        if gap.abs() >= 1e-8 {
            continue;
        }
        let residue = crate::gfunction::residue_at_pole(
            &with_param(p_star),
            crate::gfunction::ResidueBranch::Parity(Parity::Plus),
            n,
            opts,
        )?;
        found.push(ExceptionalPoint {
            param: p_star,
            gap,
            residue,
        });
    }
    if found.is_empty() {
        return Err(CoreError::NotFound);
    }
    Ok(found)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segments_avoid_integer_poles() {
        let p = ModelParams::new(1.0, 0.7);
        let segs = segments(ScanTarget::Parity(Parity::Plus), &p, 0.0, 3.0);
        assert_eq!(segs.len(), 3);
        for (lo, hi) in segs {
            assert!(lo.fract().abs() > 0.0);
            for n in 0..=3 {
                let n = n as f64;
                assert!(!(lo <= n && n <= hi), "segment ({lo}, {hi}) contains {n}");
                assert!((lo - n).abs() >= DELTA_POLE * 0.999);
                assert!((hi - n).abs() >= DELTA_POLE * 0.999);
            }
        }
    }

    #[test]
    fn eps_segments_cut_at_shifted_poles() {
        let p = ModelParams::with_epsilon(0.7, 0.4, 0.3);
        let segs = segments(ScanTarget::Eps, &p, 0.0, 2.0);
        // Breakpoints in (0,2): 0.3, 0.7, 1.3, 1.7.
        assert_eq!(segs.len(), 5);
    }

    #[test]
    fn bisect_finds_simple_root() {
        let f = |x: f64| Ok(x * x - 2.0);
        let (root, _) = bisect(f, 1.0, 2.0, -1.0, 1e-12).unwrap();
        assert!((root - std::f64::consts::SQRT_2).abs() < 1e-11);
    }

    #[test]
    fn monotone_refinement() {
        // Halving tol_x moves the root by at most the previous tol_x.
        let f = |x: f64| Ok((x - 2.3456789).tanh());
        let mut prev_tol = 1e-3;
        let (mut prev_root, _) = bisect(f, 2.0, 3.0, f(2.0).unwrap(), prev_tol).unwrap();
        for _ in 0..18 {
            let tol = prev_tol / 2.0;
            let (root, _) = bisect(f, 2.0, 3.0, f(2.0).unwrap(), tol).unwrap();
            assert!(
                (root - prev_root).abs() <= prev_tol,
                "tol {tol:e}: moved {}",
                (root - prev_root).abs()
            );
            prev_root = root;
            prev_tol = tol;
        }
    }

    #[test]
    fn delta_zero_has_no_regular_zeros() {
        // Δ=0: the entire spectrum is exceptional (x = n); off the integers
        // G never vanishes.
        let p = ModelParams::new(1.0, 0.0);
        let levels = scan_regular(
            &p,
            ScanTarget::Parity(Parity::Plus),
            0.0,
            12.0,
            DEFAULT_GRID,
            DEFAULT_TOL_X,
            &EvalOptions::default(),
        )
        .unwrap();
        assert!(levels.is_empty(), "found {} fake levels", levels.len());
    }

    #[test]
    fn invalid_ranges_rejected() {
        let p = ModelParams::new(1.0, 0.7);
        assert!(scan_regular(
            &p,
            ScanTarget::Parity(Parity::Plus),
            3.0,
            1.0,
            DEFAULT_GRID,
            DEFAULT_TOL_X,
            &EvalOptions::default()
        )
        .is_err());
        assert!(scan_regular(
            &p,
            ScanTarget::Parity(Parity::Plus),
            0.0,
            1.0,
            4,
            DEFAULT_TOL_X,
            &EvalOptions::default()
        )
        .is_err());
    }
}
