//! Preimages under fibered maps `[P:Q:c·tᵈ]`.
//!
//! For a target `[a:b:c']` the base preimages solve `b·P − a·Q = 0` (a
//! homogeneous polynomial of degree `d`, dehomogenized in whichever of the
//! charts `z/w`, `w/z` has the larger leading coefficient) and the fiber
//! coordinate solves `c·tᵈ = λ·c'` where `(P, Q)(z₀, w₀) = λ·(a, b)`.

use rand::Rng;

use super::roots::roots_univariate;
use super::MeasureError;
use crate::invbranch::refine_preimage_newton;
use crate::projspace::{HomPoint, HomPolyMap};
use crate::C64;

/// Forward residual guaranteed for every returned preimage.
pub const PREIMAGE_RESIDUAL: f64 = 1e-8;

/// Points closer than this are reported as colliding branches.
pub const COLLISION_TOL: f64 = 1e-8;

/// All `d²` preimages of a point.
#[derive(Clone, Debug)]
pub struct Preimages {
    pub points: Vec<HomPoint>,
    /// Number of unordered pairs of preimages closer than [`COLLISION_TOL`].
    pub collisions: usize,
}

/// Base roots `[z₀:w₀]`, sup-normalized.
pub(crate) fn base_roots(f: &HomPolyMap, target: &HomPoint) -> Result<Vec<[C64; 2]>, MeasureError> {
    let base = f.base().ok_or(MeasureError::NotFibered)?;
    let [a, b, _] = target.coords();
    if a.norm() < 1e-300 && b.norm() < 1e-300 {
        return Err(MeasureError::DegenerateFiber);
    }
    let d = base.degree();
    // r_i multiplies z^i w^(d-i).
    let r: Vec<C64> = (0..=d)
        .map(|i| b * base.coeffs(0)[i] - a * base.coeffs(1)[i])
        .collect();
    let use_zeta = r[d].norm() >= r[0].norm();
    // Ascending coefficients in the chosen chart variable.
    let mut poly: Vec<C64> = if use_zeta { r.clone() } else { r.iter().rev().copied().collect() };
    let mut at_infinity = 0;
    while poly.len() > 1 && poly.last().is_some_and(|c| c.norm() == 0.0) {
        poly.pop();
        at_infinity += 1;
    }
    if poly.len() == 1 && poly[0].norm() == 0.0 {
        return Err(MeasureError::DegenerateFiber);
    }
    let roots = roots_univariate(&poly)?;
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    let mut out: Vec<[C64; 2]> = roots
        .into_iter()
        .map(|x| {
            let (z, w) = if use_zeta { (x, one) } else { (one, x) };
            let m = z.norm().max(w.norm());
            if m > 1.0 {
                let p = if z.norm() >= w.norm() { z } else { w };
                [z / p, w / p]
            } else {
                [z, w]
            }
        })
        .collect();
    for _ in 0..at_infinity {
        out.push(if use_zeta { [one, zero] } else { [zero, one] });
    }
    Ok(out)
}

/// Fiber coordinates over the base preimage `[z₀:w₀]` of `target`.
pub(crate) fn fiber_roots(f: &HomPolyMap, target: &HomPoint, root: [C64; 2]) -> Vec<C64> {
    let base = f.base().expect("fibered");
    let [a, b, c] = target.coords();
    let [p, q] = base.eval(root[0], root[1]);
    let lambda = if a.norm() >= b.norm() { p / a } else { q / b };
    let rhs = lambda * c / f.fiber_coefficient();
    let d = f.degree();
    if rhs.norm() == 0.0 {
        return vec![C64::new(0.0, 0.0); d];
    }
    let r = rhs.norm().powf(1.0 / d as f64);
    let arg = rhs.arg() / d as f64;
    (0..d)
        .map(|k| C64::from_polar(r, arg + std::f64::consts::TAU * k as f64 / d as f64))
        .collect()
}

fn assemble(f: &HomPolyMap, target: &HomPoint, root: [C64; 2], t: C64) -> Result<HomPoint, MeasureError> {
    let approx = HomPoint::normalize([root[0], root[1], t]).map_err(|_| MeasureError::DegenerateFiber)?;
    let fwd = f.eval_map(&approx)?;
    if fwd.chordal_distance(target) <= 1e-14 {
        return Ok(approx);
    }
    match refine_preimage_newton(f, target, &approx) {
        Ok(q) => Ok(q),
        // Near critical points Newton may stall although the algebraic
        // preimage is already accurate enough.
        Err(_) if fwd.chordal_distance(target) <= PREIMAGE_RESIDUAL => Ok(approx),
        Err(e) => Err(MeasureError::RootFailure(e.to_string())),
    }
}

/// All `d²` preimages of `p` under a fibered map, with multiplicity.
pub fn preimages_fibered(f: &HomPolyMap, p: &HomPoint) -> Result<Preimages, MeasureError> {
    let roots = base_roots(f, p)?;
    let mut points = Vec::with_capacity(roots.len() * f.degree());
    for root in &roots {
        for t in fiber_roots(f, p, *root) {
            points.push(assemble(f, p, *root, t)?);
        }
    }
    let mut collisions = 0;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            if points[i].chordal_distance(&points[j]) < COLLISION_TOL {
                collisions += 1;
            }
        }
    }
    Ok(Preimages { points, collisions })
}

/// One preimage chosen uniformly among the `d²` branches.
#[derive(Clone, Copy, Debug)]
pub struct RandomPreimage {
    pub point: HomPoint,
    /// The chosen branch coincides with another one within [`COLLISION_TOL`].
    pub collision: bool,
}

pub fn random_preimage<R: Rng>(
    f: &HomPolyMap,
    p: &HomPoint,
    rng: &mut R,
) -> Result<RandomPreimage, MeasureError> {
    let roots = base_roots(f, p)?;
    let d = f.degree();
    let bi = rng.random_range(0..roots.len());
    let ti = rng.random_range(0..d);
    let root = roots[bi];
    let ts = fiber_roots(f, p, root);
    let base_collision = roots.iter().enumerate().any(|(j, r)| {
        j != bi && crate::projspace::line_distance(*r, root) < COLLISION_TOL
    });
    let fiber_collision = ts[ti].norm() < COLLISION_TOL;
    let point = assemble(f, p, root, ts[ti])?;
    Ok(RandomPreimage {
        point,
        collision: base_collision || fiber_collision,
    })
}
