//! Backward orbits along Newton-refined inverse branches and the
//! contraction statistics of the derivative cocycle along them.
//!
//! The inverse branch `f⁻ⁿ` along a backward orbit is the inverse of the
//! forward cocycle `dfⁿ(x₋ₙ)`, so its Lipschitz constants are read off the
//! reciprocal singular values of the forward product: `1/s_min` controls
//! the weakest contraction and `1/s_max` the strongest.

use std::io::Write;

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measures::{preimages_fibered, random_preimage, MeasureError};
use crate::numeric::{fit_line, quantile, LineFit};
use crate::projspace::{singular_values, HomPoint, HomPolyMap, ProjError, TangentFrame};
use crate::{rng, C64};

/// Newton stops once a step is shorter than this.
pub const NEWTON_STEP_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 30;
/// Forward residual required of a refined preimage.
pub const NEWTON_RESIDUAL: f64 = 1e-10;
/// Jacobians with smaller determinant are treated as singular.
pub const NEWTON_DET_FLOOR: f64 = 1e-12;
pub const MAX_ORBIT_LEN: usize = 60;
/// Fits and bands skip the transient `n < FIT_START`.
pub const FIT_START: usize = 10;
/// Minimum number of profiles for [`decay_diagnostics`].
pub const MIN_PROFILES: usize = 50;
/// Rate slack used by the contraction floor.
pub const EPSILON: f64 = 0.1;
/// Relative tolerance of the resonance classification.
pub const RESONANCE_TOL: f64 = 0.05;

const MAX_RESAMPLES: u64 = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InvBranchError {
    #[error("Newton refinement stalled: residual {residual:e} after {iterations} iterations")]
    NewtonStall { residual: f64, iterations: usize },
    #[error("root failure: {0}")]
    RootFailure(String),
    #[error("two preimages coincide at step {step} after {attempts} resamplings")]
    CriticalCollision { step: usize, attempts: u64 },
    #[error("insufficient data: {got} profiles, need {need}")]
    InsufficientData { got: usize, need: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("backward orbit check failed: {0}")]
    InvalidOrbit(String),
    #[error(transparent)]
    Proj(#[from] ProjError),
}

impl From<MeasureError> for InvBranchError {
    fn from(e: MeasureError) -> Self {
        match e {
            MeasureError::Proj(p) => Self::Proj(p),
            other => Self::RootFailure(other.to_string()),
        }
    }
}

/// Newton iteration on `ζ ↦ F(ζ) − target` in the chart of `approx`
/// (source) and of `target` (image).
pub fn refine_preimage_newton(
    f: &HomPolyMap,
    target: &HomPoint,
    approx: &HomPoint,
) -> Result<HomPoint, InvBranchError> {
    let src = approx.chart();
    let dst = target.chart();
    let goal = target.affine();
    let mut zeta = approx.affine();
    let mut p = *approx;
    let mut iterations = 0;
    while iterations < NEWTON_MAX_ITER {
        let frame = match f.tangent_map_in(&p, src, dst) {
            Ok(t) => t,
            Err(_) => break,
        };
        let m = frame.matrix;
        let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
        if det.norm() < NEWTON_DET_FLOOR {
            break;
        }
        let img = frame.image.affine_in(dst).ok_or(ProjError::InvalidChart(dst))?;
        let r = Vector2::new(img[0] - goal[0], img[1] - goal[1]);
        let step = m.try_inverse().map(|inv| inv * r).unwrap_or_else(|| Vector2::zeros());
        zeta = [zeta[0] - step[0], zeta[1] - step[1]];
        p = HomPoint::from_affine(src, zeta)?;
        iterations += 1;
        if step.norm() < NEWTON_STEP_TOL {
            break;
        }
    }
    let residual = f.eval_map(&p)?.chordal_distance(target);
    if residual <= NEWTON_RESIDUAL {
        Ok(p)
    } else {
        Err(InvBranchError::NewtonStall { residual, iterations })
    }
}

/// Finite backward orbit `x₀, x₋₁, …, x₋ₙ` with the differential of `f` at
/// every backward point.
#[derive(Clone, Debug, PartialEq)]
pub struct BackwardOrbit {
    /// `points[k] = x₋ₖ`.
    pub points: Vec<HomPoint>,
    /// `cocycle[k − 1]` is `d f(x₋ₖ)` from the chart of `x₋ₖ` to the chart of
    /// `x₋ₖ₊₁`.
    pub cocycle: Vec<TangentFrame>,
    pub seed: u64,
    pub walk: u64,
    /// Steps redrawn because the chosen branch collided with another one.
    pub resampled: usize,
}

fn frame_at(f: &HomPolyMap, x: &HomPoint, next: &HomPoint) -> Result<TangentFrame, InvBranchError> {
    Ok(f.tangent_map_in(x, x.chart(), next.chart())?)
}

/// Random backward orbit of length `n` from `x0`, walk `0` of `seed`.
pub fn backward_orbit(f: &HomPolyMap, x0: &HomPoint, n: usize, seed: u64) -> Result<BackwardOrbit, InvBranchError> {
    backward_orbit_walk(f, x0, n, seed, 0)
}

/// Random backward orbit keyed by `(seed, walk)`. Every step picks one of
/// the `d²` preimages uniformly; a step whose branch collides with another
/// preimage, or whose forward residual exceeds [`NEWTON_RESIDUAL`], is
/// redrawn from an independent stream.
pub fn backward_orbit_walk(
    f: &HomPolyMap,
    x0: &HomPoint,
    n: usize,
    seed: u64,
    walk: u64,
) -> Result<BackwardOrbit, InvBranchError> {
    backward_orbit_with(f, x0, n, seed, walk, MAX_ORBIT_LEN)
}

pub(crate) fn backward_orbit_with(
    f: &HomPolyMap,
    x0: &HomPoint,
    n: usize,
    seed: u64,
    walk: u64,
    max_len: usize,
) -> Result<BackwardOrbit, InvBranchError> {
    if n > max_len {
        return Err(InvBranchError::InvalidParameter(format!("orbit length {n} > {max_len}")));
    }
    let mut points = Vec::with_capacity(n + 1);
    let mut cocycle = Vec::with_capacity(n);
    let mut resampled = 0;
    points.push(*x0);
    for step in 0..n {
        let x = points[step];
        let mut attempt = 0;
        let next = loop {
            let mut r = rng::stream(seed, walk, step as u64 | (attempt << 32));
            let pre = random_preimage(f, &x, &mut r)?;
            let ok = !pre.collision && f.eval_map(&pre.point)?.chordal_distance(&x) <= NEWTON_RESIDUAL;
            if ok {
                break pre.point;
            }
            attempt += 1;
            resampled += 1;
            if attempt >= MAX_RESAMPLES {
                return Err(InvBranchError::CriticalCollision { step, attempts: attempt });
            }
        };
        cocycle.push(frame_at(f, &next, &x)?);
        points.push(next);
    }
    Ok(BackwardOrbit {
        points,
        cocycle,
        seed,
        walk,
        resampled,
    })
}

impl BackwardOrbit {
    pub fn len(&self) -> usize {
        self.cocycle.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cocycle.is_empty()
    }

    /// Checks the forward residual of every step and recomputes every
    /// stored frame.
    pub fn verify(&self, f: &HomPolyMap) -> Result<(), InvBranchError> {
        for k in 0..self.len() {
            let x = &self.points[k + 1];
            let target = &self.points[k];
            let r = f.eval_map(x)?.chordal_distance(target);
            if r > NEWTON_RESIDUAL {
                return Err(InvBranchError::InvalidOrbit(format!("step {k}: forward residual {r:e}")));
            }
            let frame = frame_at(f, x, target)?;
            let stored = &self.cocycle[k].matrix;
            let diff = (frame.matrix - stored).norm();
            if diff > 1e-10 * stored.norm().max(1.0) {
                return Err(InvBranchError::InvalidOrbit(format!("step {k}: frame differs by {diff:e}")));
            }
        }
        Ok(())
    }

    /// Forward cocycle `dfⁿ(x₋ₙ)` in Fubini–Study frames for `n = 1..=len`,
    /// returned as `(Log s_max, Log s_min)` per `n`.
    pub fn log_singular_values(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.len());
        let mut m = Matrix2::<C64>::identity();
        let mut log_scale = 0.0;
        let mut log_det = 0.0;
        for frame in &self.cocycle {
            let a = frame.fubini_study();
            let det = (a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)]).norm();
            log_det += det.ln();
            // dfⁿ(x₋ₙ) = dfⁿ⁻¹(x₋ₙ₊₁) · df(x₋ₙ).
            m *= a;
            let s = m.iter().map(|c| c.norm()).fold(0.0, f64::max);
            if s > 0.0 {
                m /= C64::new(s, 0.0);
                log_scale += s.ln();
            }
            let (smax, _) = singular_values(&m);
            let log_max = smax.ln() + log_scale;
            out.push((log_max, log_det - log_max));
        }
        out
    }

    /// Projection `[z:w]` of the orbit, a backward orbit of the base map.
    pub fn base_orbit(&self) -> Vec<[C64; 2]> {
        self.points.iter().map(|p| [p.coords()[0], p.coords()[1]]).collect()
    }

    /// Same orbit with frames recomputed in the given charts wherever the
    /// charts are valid (falls back to the stored chart otherwise).
    pub fn in_chart(&self, f: &HomPolyMap, chart: usize) -> Result<Self, InvBranchError> {
        let usable = |p: &HomPoint| p.coords()[chart].norm() > 1e-3;
        let mut cocycle = Vec::with_capacity(self.len());
        for k in 0..self.len() {
            let x = &self.points[k + 1];
            let y = &self.points[k];
            let src = if usable(x) { chart } else { x.chart() };
            let dst = if usable(y) { chart } else { y.chart() };
            cocycle.push(f.tangent_map_in(x, src, dst)?);
        }
        // Consecutive frames must share the chart at the common point.
        for k in 1..cocycle.len() {
            if cocycle[k].image_chart != cocycle[k - 1].chart {
                let x = &self.points[k + 1];
                cocycle[k] = f.tangent_map_in(x, cocycle[k].chart, cocycle[k - 1].chart)?;
            }
        }
        Ok(Self {
            cocycle,
            ..self.clone()
        })
    }
}

/// All `d²` preimages of `x` with the refined forward residuals.
pub fn inverse_branches(f: &HomPolyMap, x: &HomPoint) -> Result<Vec<HomPoint>, InvBranchError> {
    Ok(preimages_fibered(f, x)?.points)
}

/// Growth of the forward cocycle along one backward orbit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionProfile {
    pub n_values: Vec<usize>,
    pub log_s_min: Vec<f64>,
    pub log_s_max: Vec<f64>,
    /// Fit of `Log s_min(n)` over `n ∈ [FIT_START, N]`.
    pub fit_min: LineFit,
    /// Fit of `Log s_max(n)` over `n ∈ [FIT_START, N]`.
    pub fit_max: LineFit,
}

impl ContractionProfile {
    pub fn s_min(&self, n: usize) -> f64 {
        self.log_s_min[n - 1].exp()
    }

    pub fn s_max(&self, n: usize) -> f64 {
        self.log_s_max[n - 1].exp()
    }

    pub fn max_n(&self) -> usize {
        self.n_values.len()
    }

    /// `(n, Log s)` pairs inside the fit window.
    fn window(&self, values: &[f64]) -> (Vec<f64>, Vec<f64>) {
        self.n_values
            .iter()
            .zip(values)
            .filter(|(n, _)| **n >= FIT_START)
            .map(|(n, v)| (*n as f64, *v))
            .unzip()
    }
}

pub fn contraction_profile(orbit: &BackwardOrbit) -> Result<ContractionProfile, InvBranchError> {
    if orbit.len() < 2 * FIT_START {
        return Err(InvBranchError::InvalidParameter(format!(
            "orbit length {} < {}",
            orbit.len(),
            2 * FIT_START
        )));
    }
    let (log_s_max, log_s_min): (Vec<f64>, Vec<f64>) = orbit.log_singular_values().into_iter().unzip();
    let n_values: Vec<usize> = (1..=orbit.len()).collect();
    let mut p = ContractionProfile {
        n_values,
        log_s_min,
        log_s_max,
        fit_min: LineFit { slope: 0.0, intercept: 0.0 },
        fit_max: LineFit { slope: 0.0, intercept: 0.0 },
    };
    let (x, y) = p.window(&p.log_s_min);
    p.fit_min = fit_line(&x, &y);
    let (x, y) = p.window(&p.log_s_max);
    p.fit_max = fit_line(&x, &y);
    Ok(p)
}

/// CSV with columns `orbit,n,s_min,s_max`.
pub fn write_profiles_csv<W: Write>(profiles: &[ContractionProfile], mut out: W) -> std::io::Result<()> {
    writeln!(out, "orbit,n,s_min,s_max")?;
    for (id, p) in profiles.iter().enumerate() {
        for (k, n) in p.n_values.iter().enumerate() {
            writeln!(out, "{id},{n},{:e},{:e}", p.log_s_min[k].exp(), p.log_s_max[k].exp())?;
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "k", rename_all = "snake_case")]
pub enum Resonance {
    Equal,
    Resonant(u32),
    Nonresonant,
}

/// Classifies `λ₁/λ₂`: the nearest integer `k` when within
/// [`RESONANCE_TOL`] relative, `k = 1` meaning equal exponents.
pub fn classify_resonance(lambda1: f64, lambda2: f64) -> Resonance {
    let ratio = lambda1 / lambda2;
    if !ratio.is_finite() || ratio < 0.5 {
        return Resonance::Nonresonant;
    }
    let k = ratio.round().max(1.0);
    if (ratio / k - 1.0).abs() <= RESONANCE_TOL {
        if k == 1.0 {
            Resonance::Equal
        } else {
            Resonance::Resonant(k as u32)
        }
    } else {
        Resonance::Nonresonant
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub degree: usize,
    pub profiles: usize,
    /// Slope in `n` of the mean of `Log(dⁿ/(s_min·s_max))`.
    pub prefactor_slope: f64,
    /// `Log d − λ₁ − λ₂` from the fitted growth rates.
    pub prefactor_expected: f64,
    pub prefactor_decays: bool,
    /// `C = exp(max |mean Log(dⁿ/s_min²)|)` over the band window.
    pub band_constant: f64,
    /// Median over orbits of `exp(max |yₙ − ȳ|)` with
    /// `yₙ = Log(dⁿ/s_min(n)²)`: the spread of each orbit around its own
    /// limit.
    pub band_oscillation_median: f64,
    /// Fraction of orbits with `exp(max |yₙ|) ≤ band_limit` over the window.
    pub band_orbit_fraction: f64,
    pub band_window: [usize; 2],
    pub band_limit: f64,
    pub band_ok: bool,
    pub lambda1: f64,
    pub lambda2: f64,
    pub ratio: f64,
    pub resonance: Resonance,
}

/// Default band limit and window for the boundedness verdict.
pub const BAND_LIMIT: f64 = 10.0;
pub const BAND_WINDOW: [usize; 2] = [10, 40];

pub fn decay_diagnostics(profiles: &[ContractionProfile], d: usize) -> Result<DecayReport, InvBranchError> {
    decay_diagnostics_with(profiles, d, BAND_WINDOW, BAND_LIMIT)
}

pub fn decay_diagnostics_with(
    profiles: &[ContractionProfile],
    d: usize,
    window: [usize; 2],
    limit: f64,
) -> Result<DecayReport, InvBranchError> {
    if profiles.len() < MIN_PROFILES {
        return Err(InvBranchError::InsufficientData {
            got: profiles.len(),
            need: MIN_PROFILES,
        });
    }
    let n_max = profiles.iter().map(|p| p.max_n()).min().unwrap_or(0);
    if n_max < window[0] + 2 {
        return Err(InvBranchError::InvalidParameter(format!("profiles of length {n_max} too short")));
    }
    let hi = window[1].min(n_max);
    let ld = (d as f64).ln();
    let count = profiles.len() as f64;
    let mean_of = |g: &dyn Fn(&ContractionProfile) -> f64| {
        let v: Vec<f64> = profiles.iter().map(g).collect();
        crate::numeric::pairwise_sum(&v) / count
    };
    let ns: Vec<usize> = (FIT_START..=n_max).collect();
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let pref: Vec<f64> = ns
        .iter()
        .map(|&n| mean_of(&|p| n as f64 * ld - p.log_s_min[n - 1] - p.log_s_max[n - 1]))
        .collect();
    let mins: Vec<f64> = ns.iter().map(|&n| mean_of(&|p| p.log_s_min[n - 1])).collect();
    let maxs: Vec<f64> = ns.iter().map(|&n| mean_of(&|p| p.log_s_max[n - 1])).collect();
    let prefactor_slope = fit_line(&xs, &pref).slope;
    let lambda2 = fit_line(&xs, &mins).slope;
    let lambda1 = fit_line(&xs, &maxs).slope;

    let oscillation = |p: &ContractionProfile| {
        let y: Vec<f64> = (window[0]..=hi).map(|n| n as f64 * ld - 2.0 * p.log_s_min[n - 1]).collect();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        y.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max)
    };
    let band_mean = (window[0]..=hi)
        .map(|n| mean_of(&|p| n as f64 * ld - 2.0 * p.log_s_min[n - 1]).abs())
        .fold(0.0, f64::max);
    let per_orbit: Vec<f64> = profiles.iter().map(oscillation).collect();
    let inside = profiles
        .iter()
        .filter(|p| (window[0]..=hi).all(|n| (n as f64 * ld - 2.0 * p.log_s_min[n - 1]).abs() <= limit.ln()))
        .count();
    let band_constant = band_mean.exp();
    Ok(DecayReport {
        degree: d,
        profiles: profiles.len(),
        prefactor_slope,
        prefactor_expected: ld - lambda1 - lambda2,
        prefactor_decays: prefactor_slope < 0.0,
        band_constant,
        band_oscillation_median: quantile(&per_orbit, 0.5).exp(),
        band_orbit_fraction: inside as f64 / count,
        band_window: [window[0], hi],
        band_limit: limit,
        band_ok: band_constant <= limit,
        lambda1,
        lambda2,
        ratio: lambda1 / lambda2,
        resonance: classify_resonance(lambda1, lambda2),
    })
}

/// Per-orbit verdict of the floor `s_min(n) ≥ c·e^{n(λ₂ − 2ε)}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloorFit {
    /// `c = min_n s_min(n)·e^{−n(λ₂ − 2ε)}` over the fit window.
    pub constant: f64,
    /// Slope of `Log s_min(n) − n(λ₂ − 2ε)` over the fit window.
    pub excess_slope: f64,
    pub holds: bool,
}

/// The floor holds on an orbit when the fitted constant is positive and
/// finite and the excess rate over `λ₂ − 2ε` is nonnegative, so that the
/// constant does not degrade with `n`.
pub fn contraction_floor(p: &ContractionProfile, lambda2: f64, eps: f64) -> FloorFit {
    let rate = lambda2 - 2.0 * eps;
    let (xs, ys) = p.window(&p.log_s_min);
    let excess: Vec<f64> = xs.iter().zip(&ys).map(|(n, y)| y - n * rate).collect();
    let log_c = excess.iter().copied().fold(f64::INFINITY, f64::min);
    let excess_slope = fit_line(&xs, &excess).slope;
    let constant = log_c.exp();
    FloorFit {
        constant,
        excess_slope,
        holds: constant > 0.0 && constant.is_finite() && excess_slope >= 0.0,
    }
}

/// Fraction of profiles on which [`contraction_floor`] holds.
pub fn floor_fraction(profiles: &[ContractionProfile], lambda2: f64, eps: f64) -> f64 {
    let ok = profiles.iter().filter(|p| contraction_floor(p, lambda2, eps).holds).count();
    ok as f64 / profiles.len().max(1) as f64
}
