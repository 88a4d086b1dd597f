//! Lyapunov exponents of the equilibrium measure from the derivative
//! cocycle, and stable-direction diagnostics.
//!
//! Forward orbits of points on the small Julia set leave it at the rate of
//! the largest exponent, so cocycles are accumulated along backward orbits
//! instead: for a cloud point `x₀` a random backward orbit `x₋ₘ, …, x₀` is
//! drawn and the forward product is taken from `x₋ₘ` to `x₀`. Each factor
//! is expressed in Fubini–Study orthonormal frames, so norms and
//! determinants do not depend on the charts.

use std::io::Write;

use nalgebra::{Matrix2, Vector2};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::invbranch::{backward_orbit_with, BackwardOrbit, InvBranchError};
use crate::measures::PointCloudMeasure;
use crate::numeric::batch_means;
use crate::projspace::{chart_tangent, fs_frame, line_distance, weakest_direction, HomPoint, HomPolyMap, ProjError};
use crate::{rng, C64};

/// Minimum accumulation length for exponent estimates.
pub const MIN_ORBIT_LEN: usize = 20;
/// Steps discarded before accumulation so that the orthonormal frame aligns
/// with the Oseledets splitting.
pub const BURN_IN: usize = 10;
/// Determinants below this count as hitting the critical set.
pub const CRITICAL_DET: f64 = 1e-300;
/// Maximum fraction of dropped samples.
pub const MAX_DROP_FRACTION: f64 = 0.005;
pub const DEFAULT_ORBIT_LEN: usize = 40;
pub const DEFAULT_CLOUD_SIZE: usize = 20_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LyapunovError {
    #[error("{dropped} of {total} samples hit the critical set")]
    CriticalHit { dropped: usize, total: usize },
    #[error("inconsistent cocycle: λ₁+λ₂ = {sum_qr} but ∫Log|det| = {sum_det} (tolerance {tol:e})")]
    InconsistentCocycle { sum_qr: f64, sum_det: f64, tol: f64 },
    #[error("no splitting: λ₁ − λ₂ = {gap} is within {threshold} of zero")]
    NoSplitting { gap: f64, threshold: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Orbit(#[from] InvBranchError),
    #[error(transparent)]
    Proj(#[from] ProjError),
}

/// Mean with batch-means standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    pub lambda1: f64,
    pub lambda2: f64,
    pub orbit_len: usize,
    pub sample_count: usize,
    pub se1: f64,
    pub se2: f64,
    pub sum_via_det: f64,
    pub se_det: f64,
    pub dropped: usize,
    /// `λ₂ + 3·se₂ ≥ ½·Log d`.
    pub floor_ok: bool,
}

/// Finite-time exponents of one sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointExponents {
    pub lambda1: f64,
    pub lambda2: f64,
}

/// Options shared by the cocycle estimators.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CocycleOptions {
    pub seed: u64,
    /// Force every frame through this chart where it is valid.
    pub chart: Option<usize>,
    pub burn_in: usize,
}

impl CocycleOptions {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            chart: None,
            burn_in: BURN_IN,
        }
    }
}

fn det2(m: &Matrix2<C64>) -> C64 {
    m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]
}

fn orbit_for(
    f: &HomPolyMap,
    x0: &HomPoint,
    len: usize,
    opts: &CocycleOptions,
    index: usize,
) -> Result<BackwardOrbit, LyapunovError> {
    let orbit = backward_orbit_with(f, x0, len, rng::derive_seed(opts.seed, 0x4C59), index as u64, usize::MAX)?;
    Ok(match opts.chart {
        Some(c) => orbit.in_chart(f, c)?,
        None => orbit,
    })
}

/// Fubini–Study factors along an orbit in forward time order, `x₋ₘ` first.
fn forward_factors(orbit: &BackwardOrbit) -> Vec<Matrix2<C64>> {
    orbit.cocycle.iter().rev().map(|t| t.fubini_study()).collect()
}

/// Orthonormal Fubini–Study frame at the start of an orbit spanned by the
/// projections of two fixed vectors of `ℂ³` onto `x^⊥`. Frames taken in
/// different charts differ by a unitary, so the QR growth rates do not
/// depend on the chart.
fn initial_frame(orbit: &BackwardOrbit) -> Matrix2<C64> {
    let first = orbit.cocycle.last().expect("nonempty orbit");
    let chart = first.chart;
    let x = first.base.representative_in(chart).expect("orbit chart is valid");
    let zeta = first.base.affine_in(chart).expect("orbit chart is valid");
    let xx: f64 = x.iter().map(|v| v.norm_sqr()).sum();
    let s = fs_frame(zeta);
    let column = |e: [C64; 3]| {
        let dot: C64 = x.iter().zip(&e).map(|(a, b)| a.conj() * b).sum();
        let h = [0, 1, 2].map(|i| e[i] - x[i] * (dot / xx));
        s * Vector2::from(chart_tangent(&x, &h, chart))
    };
    let m = Matrix2::from_columns(&[column(START_A), column(START_B)]);
    let qr = m.qr();
    if qr.r()[(1, 1)].norm() > 1e-6 * m.norm() {
        qr.q()
    } else {
        Matrix2::identity()
    }
}

const START_A: [C64; 3] = [C64::new(0.31, 0.72), C64::new(-0.55, 0.18), C64::new(0.24, -0.63)];
const START_B: [C64; 3] = [C64::new(-0.47, 0.05), C64::new(0.36, -0.81), C64::new(0.66, 0.29)];

/// Finite-time exponents by QR re-orthonormalization at every step,
/// skipping the first `burn_in` factors.
fn qr_exponents(factors: &[Matrix2<C64>], start: Matrix2<C64>, burn_in: usize) -> Option<PointExponents> {
    let mut q = start;
    let (mut s1, mut s2) = (0.0, 0.0);
    let n = factors.len() - burn_in;
    for (k, a) in factors.iter().enumerate() {
        let m = a * q;
        let qr = m.qr();
        let r = qr.r();
        let (r11, r22) = (r[(0, 0)].norm(), r[(1, 1)].norm());
        if !(r11 > 0.0 && r22 > 0.0) {
            return None;
        }
        q = qr.q();
        if k >= burn_in {
            s1 += r11.ln();
            s2 += r22.ln();
        }
    }
    Some(PointExponents {
        lambda1: s1 / n as f64,
        lambda2: s2 / n as f64,
    })
}

/// Per-point finite-time exponents over orbits of accumulation length `n`.
/// Samples hitting the critical set are returned as `None`.
pub fn point_exponents(
    f: &HomPolyMap,
    cloud: &PointCloudMeasure,
    n: usize,
    opts: &CocycleOptions,
) -> Result<Vec<Option<PointExponents>>, LyapunovError> {
    if n < MIN_ORBIT_LEN {
        return Err(LyapunovError::InvalidParameter(format!("orbit length {n} < {MIN_ORBIT_LEN}")));
    }
    cloud
        .points
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let orbit = orbit_for(f, x, n + opts.burn_in, opts, i)?;
            let factors = forward_factors(&orbit);
            if factors.iter().any(|a| det2(a).norm() < CRITICAL_DET) {
                return Ok(None);
            }
            Ok(qr_exponents(&factors, initial_frame(&orbit), opts.burn_in))
        })
        .collect()
}

fn check_drops(dropped: usize, total: usize) -> Result<(), LyapunovError> {
    if dropped as f64 > MAX_DROP_FRACTION * total as f64 {
        Err(LyapunovError::CriticalHit { dropped, total })
    } else {
        Ok(())
    }
}

/// `∫ Log|det df| dμ` with the determinant taken in Fubini–Study frames.
pub fn sum_exponents(f: &HomPolyMap, cloud: &PointCloudMeasure) -> Result<Estimate, LyapunovError> {
    sum_exponents_in(f, cloud, None)
}

pub fn sum_exponents_in(
    f: &HomPolyMap,
    cloud: &PointCloudMeasure,
    chart: Option<usize>,
) -> Result<Estimate, LyapunovError> {
    let values: Vec<Option<f64>> = cloud
        .points
        .par_iter()
        .map(|x| {
            let img = f.eval_map(x)?;
            let src = chart.filter(|&c| x.coords()[c].norm() > 1e-3).unwrap_or(x.chart());
            let dst = chart.filter(|&c| img.coords()[c].norm() > 1e-3).unwrap_or(img.chart());
            let t = f.tangent_map_in(x, src, dst)?;
            let det = det2(&t.fubini_study()).norm();
            Ok((det >= CRITICAL_DET).then(|| det.ln()))
        })
        .collect::<Result<_, ProjError>>()?;
    let kept: Vec<f64> = values.iter().flatten().copied().collect();
    check_drops(values.len() - kept.len(), values.len())?;
    let (value, se) = batch_means(&kept);
    Ok(Estimate { value, se })
}

/// `λ₁` as the mean first QR growth rate.
pub fn top_exponent(f: &HomPolyMap, cloud: &PointCloudMeasure, n: usize, seed: u64) -> Result<Estimate, LyapunovError> {
    let pts = point_exponents(f, cloud, n, &CocycleOptions::new(seed))?;
    let kept: Vec<f64> = pts.iter().flatten().map(|p| p.lambda1).collect();
    check_drops(pts.len() - kept.len(), pts.len())?;
    let (value, se) = batch_means(&kept);
    Ok(Estimate { value, se })
}

pub fn exponent_pair(f: &HomPolyMap, cloud: &PointCloudMeasure, n: usize, seed: u64) -> Result<LyapunovEstimate, LyapunovError> {
    exponent_pair_with(f, cloud, n, &CocycleOptions::new(seed))
}

/// Both exponents with the consistency checks: `λ₁ ≥ λ₂` by construction,
/// `|λ₁ + λ₂ − ∫Log|det df||` within three standard errors, and the floor
/// `λ₂ ≥ ½·Log d` flagged.
pub fn exponent_pair_with(
    f: &HomPolyMap,
    cloud: &PointCloudMeasure,
    n: usize,
    opts: &CocycleOptions,
) -> Result<LyapunovEstimate, LyapunovError> {
    let pts = point_exponents(f, cloud, n, opts)?;
    summarize_exponents(f, cloud, n, &pts, opts)
}

/// [`exponent_pair_with`] from per-point exponents already computed by
/// [`point_exponents`] with the same options.
pub fn summarize_exponents(
    f: &HomPolyMap,
    cloud: &PointCloudMeasure,
    n: usize,
    pts: &[Option<PointExponents>],
    opts: &CocycleOptions,
) -> Result<LyapunovEstimate, LyapunovError> {
    let kept: Vec<PointExponents> = pts.iter().flatten().copied().collect();
    let dropped = pts.len() - kept.len();
    check_drops(dropped, pts.len())?;
    let l1: Vec<f64> = kept.iter().map(|p| p.lambda1).collect();
    let l2: Vec<f64> = kept.iter().map(|p| p.lambda2).collect();
    let (lambda1, se1) = batch_means(&l1);
    let (lambda2, se2) = batch_means(&l2);
    let det = sum_exponents_in(f, cloud, opts.chart)?;
    // The floor covers rounding when every sample gives the same exponents.
    let tol = 3.0 * (se1 + se2 + det.se) + 1e-12 * det.value.abs().max(1.0);
    if (lambda1 + lambda2 - det.value).abs() > tol {
        return Err(LyapunovError::InconsistentCocycle {
            sum_qr: lambda1 + lambda2,
            sum_det: det.value,
            tol,
        });
    }
    let half_log_d = 0.5 * (f.degree() as f64).ln();
    Ok(LyapunovEstimate {
        lambda1,
        lambda2,
        orbit_len: n,
        sample_count: kept.len(),
        se1,
        se2,
        sum_via_det: det.value,
        se_det: det.se,
        dropped,
        floor_ok: lambda2 + 3.0 * se2 >= half_log_d,
    })
}

/// `(1/n)·Log‖dfⁿ v‖` for a random unit vector `v` per sample, after the
/// same burn-in as the exponent estimators.
pub fn random_vector_growth(
    f: &HomPolyMap,
    cloud: &PointCloudMeasure,
    n: usize,
    seed: u64,
) -> Result<Estimate, LyapunovError> {
    let opts = CocycleOptions::new(seed);
    let values: Vec<Option<f64>> = cloud
        .points
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let orbit = orbit_for(f, x, n + opts.burn_in, &opts, i)?;
            let mut r = rng::stream(rng::derive_seed(seed, 0x5EC7), i as u64, 0);
            let mut v = Vector2::new(
                C64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)),
                C64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)),
            );
            v /= C64::new(v.norm(), 0.0);
            let mut growth = 0.0;
            for (k, a) in forward_factors(&orbit).iter().enumerate() {
                v = a * v;
                let norm = v.norm();
                if norm == 0.0 {
                    return Ok(None);
                }
                v /= C64::new(norm, 0.0);
                if k >= opts.burn_in {
                    growth += norm.ln();
                }
            }
            Ok(Some(growth / n as f64))
        })
        .collect::<Result<_, LyapunovError>>()?;
    let kept: Vec<f64> = values.iter().flatten().copied().collect();
    check_drops(values.len() - kept.len(), values.len())?;
    let (value, se) = batch_means(&kept);
    Ok(Estimate { value, se })
}

/// Weakest direction at the start of an orbit segment, with diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StableDirection {
    pub point: HomPoint,
    /// Unit vector in the Fubini–Study frame of `point`'s chart.
    pub vector: [C64; 2],
    /// Distance in `ℙ¹` between `[df(v_s(x))]` and `v_s(f(x))`.
    pub equivariance_defect: f64,
    /// Angle between `v_s` and the fiber of the projection `[z:w:t] ↦ [z:w]`,
    /// when the map is fibered.
    pub fiber_angle: Option<f64>,
}

fn product(factors: &[Matrix2<C64>]) -> Matrix2<C64> {
    let mut m = Matrix2::<C64>::identity();
    for a in factors {
        m = a * m;
        let s = m.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if s > 0.0 {
            m /= C64::new(s, 0.0);
        }
    }
    m
}

/// Angle between the complex lines spanned by two nonzero vectors.
pub fn line_angle(a: [C64; 2], b: [C64; 2]) -> f64 {
    let inner = a[0].conj() * b[0] + a[1].conj() * b[1];
    let na = (a[0].norm_sqr() + a[1].norm_sqr()).sqrt();
    let nb = (b[0].norm_sqr() + b[1].norm_sqr()).sqrt();
    (inner.norm() / (na * nb)).clamp(0.0, 1.0).acos()
}

/// Weakest right-singular direction of the `n`-step cocycle at `x₋ₙ₋₁` of a
/// random backward orbit of `x0`, i.e. at the start of a genuine forward
/// orbit segment ending at `x0`. The equivariance defect compares
/// `df(x₋ₙ₋₁)·v_s(x₋ₙ₋₁)` with the direction computed independently at
/// `x₋ₙ` from its own `n`-step cocycle.
pub fn stable_direction_along(
    f: &HomPolyMap,
    x0: &HomPoint,
    n: usize,
    seed: u64,
    walk: u64,
) -> Result<StableDirection, LyapunovError> {
    let orbit = backward_orbit_with(f, x0, n + 1, seed, walk, usize::MAX)?;
    let factors = forward_factors(&orbit);
    let start = orbit.points[n + 1];
    let vs_start = weakest_direction(&product(&factors[..n]));
    let vs_next = weakest_direction(&product(&factors[1..=n]));
    let pushed = factors[0] * Vector2::new(vs_start[0], vs_start[1]);
    let equivariance_defect = line_distance([pushed[0], pushed[1]], vs_next);
    let fiber_angle = f.is_fibered().then(|| {
        let chart = orbit.cocycle[n].chart;
        let x = start.representative_in(chart).expect("orbit chart is valid");
        let zero = C64::new(0.0, 0.0);
        let h = [zero, zero, C64::new(1.0, 0.0)];
        let tangent = chart_tangent(&x, &h, chart);
        let zeta = start.affine_in(chart).expect("orbit chart is valid");
        let fiber = fs_frame(zeta) * Vector2::new(tangent[0], tangent[1]);
        line_angle([fiber[0], fiber[1]], vs_start)
    });
    Ok(StableDirection {
        point: start,
        vector: vs_start,
        equivariance_defect,
        fiber_angle,
    })
}

/// Stable direction with the splitting precondition `λ₁ − λ₂ > 5(se₁+se₂)`.
pub fn stable_direction(
    f: &HomPolyMap,
    estimate: &LyapunovEstimate,
    x0: &HomPoint,
    n: usize,
    seed: u64,
) -> Result<StableDirection, LyapunovError> {
    let gap = estimate.lambda1 - estimate.lambda2;
    let threshold = 5.0 * (estimate.se1 + estimate.se2);
    if gap <= threshold {
        return Err(LyapunovError::NoSplitting { gap, threshold });
    }
    stable_direction_along(f, x0, n, seed, 0)
}

/// CSV with columns `index,lambda1,lambda2` (dropped samples omitted).
pub fn write_point_exponents_csv<W: Write>(pts: &[Option<PointExponents>], mut out: W) -> std::io::Result<()> {
    writeln!(out, "index,lambda1,lambda2")?;
    for (i, p) in pts.iter().enumerate() {
        if let Some(p) = p {
            writeln!(out, "{i},{},{}", p.lambda1, p.lambda2)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps;
    use crate::measures::sample_equilibrium;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn start() -> HomPoint {
        HomPoint::new(c(0.6, 0.8), c(-0.28, 0.96), c(1.0, 0.0)).unwrap()
    }

    #[test]
    fn power_map_exponents() {
        let f = maps::power(2);
        let cloud = sample_equilibrium(&f, &start(), 12, 2000, 1).unwrap();
        let est = exponent_pair(&f, &cloud, 20, 2).unwrap();
        let l2 = 2f64.ln();
        assert!((est.lambda1 - l2).abs() < 1e-9, "{est:?}");
        assert!((est.lambda2 - l2).abs() < 1e-9);
        assert!((est.sum_via_det - 2.0 * l2).abs() < 1e-9);
        assert!(est.floor_ok);
        assert!(matches!(
            stable_direction(&f, &est, &start(), 20, 3),
            Err(LyapunovError::NoSplitting { .. })
        ));
    }

    #[test]
    fn degree_scaling_of_the_determinant_sum() {
        let s2 = sum_exponents(&maps::power(2), &sample_equilibrium(&maps::power(2), &start(), 12, 1000, 4).unwrap()).unwrap();
        let s4 = sum_exponents(&maps::power(4), &sample_equilibrium(&maps::power(4), &start(), 12, 1000, 4).unwrap()).unwrap();
        assert!((s4.value / s2.value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn short_orbits_are_rejected() {
        let f = maps::power(2);
        let cloud = sample_equilibrium(&f, &start(), 12, 1000, 1).unwrap();
        assert!(matches!(exponent_pair(&f, &cloud, 10, 0), Err(LyapunovError::InvalidParameter(_))));
    }

    #[test]
    fn line_angles() {
        let a = [c(1.0, 0.0), c(0.0, 0.0)];
        assert!(line_angle(a, [c(0.0, 1.0), c(0.0, 0.0)]).abs() < 1e-7);
        assert!((line_angle(a, [c(0.0, 0.0), c(2.0, 0.0)]) - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }
}
