//! Green functions of homogeneous lifts and tabulated local potentials of
//! the Green current.
//!
//! For a lift `F` of degree `d` the Green function is
//! `G(x) = lim d⁻ⁿ Log‖Fⁿ(x)‖` in the sup-norm. Writing `x̂ₖ` for the
//! sup-normalized iterates,
//!
//! ```text
//! G(x) = Log‖x‖ + Σₖ d^{-(k+1)} Log‖F(x̂ₖ)‖
//! ```
//!
//! and every term lies in `[L, U]`, where `U = Log maxᶜ Σ|coeffs|` and `L` is
//! the logarithm of the sampled minimum of `‖F‖` on the unit sup-sphere. The
//! tail after `n` terms is therefore at most `max(|L|,|U|)·d⁻ⁿ/(d−1)`.

mod grid;

pub use grid::{potential_grid, GridBox, PotentialGrid};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::projspace::{other_indices, sup_norm, HomPoint, HomPolyMap, NONDEGENERACY_FLOOR};
use crate::C64;

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GreenError {
    #[error("input triple is zero")]
    ZeroVector,
    #[error("iterate hit a common zero of the lift")]
    Indeterminate,
    #[error("Green value did not reach tolerance {tol:e}: residual {residual:e} after {iterations} iterations")]
    NoConvergence {
        value: f64,
        residual: f64,
        iterations: usize,
        tol: f64,
    },
    #[error("potential grid rejected: {flagged} of {total} nodes did not converge")]
    GridRejected { flagged: usize, total: usize },
    #[error("grid format error: {0}")]
    Format(String),
}

/// Value of the Green function with its a posteriori truncation bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreenEval {
    pub value: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// A map together with the per-term bound used for truncation control.
#[derive(Clone, Debug)]
pub struct GreenFunction<'a> {
    map: &'a HomPolyMap,
    term_bound: f64,
}

impl<'a> GreenFunction<'a> {
    pub fn new(map: &'a HomPolyMap) -> Self {
        let upper = map
            .components()
            .iter()
            .map(|cs| cs.iter().map(|c| c.norm()).sum::<f64>())
            .fold(0.0, f64::max)
            .ln();
        let lower = map
            .check_nondegenerate(256, 0x6EE7, NONDEGENERACY_FLOOR)
            .map(|r| r.min_ratio.min(1.0))
            .unwrap_or(NONDEGENERACY_FLOOR)
            .max(NONDEGENERACY_FLOOR)
            .ln();
        Self {
            map,
            term_bound: upper.abs().max(lower.abs()),
        }
    }

    pub fn map(&self) -> &HomPolyMap {
        self.map
    }

    /// Uniform bound on `|Log‖F(x̂)‖|` over the unit sup-sphere.
    pub fn term_bound(&self) -> f64 {
        self.term_bound
    }

    pub fn eval(&self, x: &[C64; 3], tol: f64, max_iter: usize) -> Result<GreenEval, GreenError> {
        let start = HomPoint::normalize(*x).map_err(|_| GreenError::ZeroVector)?;
        let d = self.map.degree() as f64;
        let mut value = sup_norm(x).ln();
        let mut xk = start.coords();
        let mut bound = self.term_bound;
        let mut weight = 1.0 / d;
        let mut iterations = 0;
        let mut residual = f64::INFINITY;
        while iterations < max_iter.max(1) {
            let y = self.map.eval_lift(&xk);
            let next = HomPoint::normalize(y).map_err(|_| GreenError::Indeterminate)?;
            let term = sup_norm(&y).ln();
            bound = bound.max(term.abs());
            value += weight * term;
            iterations += 1;
            // Remaining terms carry weights d^{-(k+1)} for k ≥ iterations.
            residual = bound * weight / (d - 1.0);
            weight /= d;
            xk = next.coords();
            if residual < tol {
                break;
            }
        }
        let eval = GreenEval {
            value,
            iterations,
            residual,
        };
        if residual > tol {
            return Err(GreenError::NoConvergence {
                value,
                residual,
                iterations,
                tol,
            });
        }
        Ok(eval)
    }

    /// `|G(F(x)) − d·G(x)|`.
    pub fn invariance_residual(&self, x: &[C64; 3], tol: f64) -> Result<f64, GreenError> {
        let fx = self.map.eval_lift(x);
        let a = self.eval(&fx, tol, DEFAULT_MAX_ITER)?;
        let b = self.eval(x, tol, DEFAULT_MAX_ITER)?;
        Ok((a.value - self.map.degree() as f64 * b.value).abs())
    }

    /// Potential of the Green current on the affine chart `chart`: the Green
    /// value of the section whose `chart` coordinate is one. For a fibered
    /// map on the chart `t = 1` this is `max{G_θ, 0}`.
    pub fn local_potential(&self, chart: usize, p: [C64; 2], tol: f64) -> Result<f64, GreenError> {
        Ok(self.eval(&section(chart, p), tol, DEFAULT_MAX_ITER)?.value)
    }
}

/// The lift `(…, 1, …)` of affine coordinates `p` in chart `chart`.
pub fn section(chart: usize, p: [C64; 2]) -> [C64; 3] {
    let mut x = [C64::new(1.0, 0.0); 3];
    let o = other_indices(chart);
    x[o[0]] = p[0];
    x[o[1]] = p[1];
    x
}

pub fn green_value(
    f: &HomPolyMap,
    x: &[C64; 3],
    tol: f64,
    max_iter: usize,
) -> Result<GreenEval, GreenError> {
    GreenFunction::new(f).eval(x, tol, max_iter)
}

pub fn invariance_residual(f: &HomPolyMap, x: &[C64; 3], tol: f64) -> Result<f64, GreenError> {
    GreenFunction::new(f).invariance_residual(x, tol)
}

pub fn local_potential(f: &HomPolyMap, chart: usize, p: [C64; 2]) -> Result<f64, GreenError> {
    GreenFunction::new(f).local_potential(chart, p, DEFAULT_TOL)
}

/// Whether the forward orbit of `(z, w)` under the polynomial map `(P, Q)` of
/// a fibered map stays bounded, i.e. `(z, w)` lies in the closed basin of
/// the origin. Decided by escape of the sup-norm past `radius`.
pub fn bounded_orbit(f: &HomPolyMap, p: [C64; 2], radius: f64, iterations: usize) -> bool {
    let base = f.base().expect("bounded_orbit needs a fibered map");
    let (mut z, mut w) = (p[0], p[1]);
    for _ in 0..iterations {
        if z.norm().max(w.norm()) > radius {
            return false;
        }
        if z.norm().max(w.norm()) < 1e-30 {
            return true;
        }
        [z, w] = base.eval(z, w);
    }
    z.norm().max(w.norm()) <= radius
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps;
    use rand::Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn power_map_is_exact_after_one_term() {
        let f = maps::power(2);
        let g = green_value(&f, &[c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)], DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(g.value, 2f64.ln());
        assert_eq!(g.iterations, 1);
        assert!(g.residual < 1e-12);
        let g = green_value(&f, &[c(1.0, 0.0); 3], DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(g.value, 0.0);
    }

    #[test]
    fn power_map_local_potential() {
        let f = maps::power(2);
        let e = std::f64::consts::E;
        assert!((local_potential(&f, 2, [c(e, 0.0), c(1.0, 0.0)]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(local_potential(&f, 2, [c(0.5, 0.0), c(0.5, 0.0)]).unwrap(), 0.0);
    }

    #[test]
    fn invariance_residuals_are_small() {
        let f = maps::lattes4_suspension();
        let gf = GreenFunction::new(&f);
        let mut rng = crate::rng::stream(11, 0, 0);
        for k in 0..1000 {
            let mut x = [(); 3].map(|_| c(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)));
            if k % 10 == 0 {
                x[k / 10 % 3] = c(0.0, 0.0);
            }
            let r = gf.invariance_residual(&x, 1e-9).unwrap();
            assert!(r < 1e-7, "residual {r} at {x:?}");
        }
        let p = maps::power(2);
        let gp = GreenFunction::new(&p);
        let r = gp.invariance_residual(&[c(0.3, 1.7), c(-2.0, 0.1), c(0.5, 0.0)], 1e-9).unwrap();
        assert!(r < 1e-12);
    }

    #[test]
    fn basin_points_have_zero_potential() {
        let f = maps::lattes4_suspension();
        let p = [c(0.05, 0.02), c(-0.03, 0.04)];
        assert!(bounded_orbit(&f, p, 1e3, 200));
        assert_eq!(local_potential(&f, 2, p).unwrap(), 0.0);
    }

    #[test]
    fn scaling_law() {
        let f = maps::lattes4_suspension();
        let gf = GreenFunction::new(&f);
        let mut rng = crate::rng::stream(12, 0, 0);
        for _ in 0..200 {
            let x = [(); 3].map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let lambda = C64::from_polar(rng.random_range(0.1f64..10.0), rng.random_range(0.0..std::f64::consts::TAU));
            let a = gf.eval(&x, 1e-12, 400).unwrap().value;
            let b = gf.eval(&x.map(|v| v * lambda), 1e-12, 400).unwrap().value;
            assert!((b - a - lambda.norm().ln()).abs() < 1e-10);
        }
    }

    #[test]
    fn potential_decreases_towards_basin_boundary() {
        let f = maps::lattes4_suspension();
        let gf = GreenFunction::new(&f);
        let dir = [c(0.6, 0.1), c(-0.3, 0.5)];
        // Bisection on the ray for the boundary of the basin.
        let (mut lo, mut hi) = (0.0, 10.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if bounded_orbit(&f, [dir[0] * mid, dir[1] * mid], 1e6, 400) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut prev = f64::INFINITY;
        for k in 1..=8 {
            let s = hi * (1.0 + 0.5f64.powi(k));
            let g = gf.local_potential(2, [dir[0] * s, dir[1] * s], 1e-12).unwrap();
            assert!(g > 0.0 && g < prev, "g = {g}");
            prev = g;
        }
        assert!(prev < 0.01);
    }
}
