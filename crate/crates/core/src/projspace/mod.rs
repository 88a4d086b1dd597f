//! Homogeneous coordinates on the projective plane, polynomial endomorphisms,
//! their differentials in affine charts, and the Fubini–Study metric.

mod map;
pub mod mapfile;
mod point;

pub use map::{
    monomial_count, monomial_index, monomials, BaseMap, HomPolyMap, NondegeneracyReport,
    TangentFrame, MAX_DEGREE, NONDEGENERACY_FLOOR,
};
pub(crate) use map::sup_norm;
pub use point::{chordal, line_distance, other_indices, HomPoint, DEGENERACY_THRESHOLD, POINT_TOL};

use nalgebra::{Matrix2, Vector2};
use thiserror::Error;

use crate::C64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProjError {
    #[error("all homogeneous coordinates vanish")]
    ZeroVector,
    #[error("image of the point is indeterminate (F(p) = 0)")]
    Indeterminate,
    #[error("map has a common zero away from the origin")]
    DegenerateMap,
    #[error("degree {0} is outside the supported range 2..=8")]
    UnsupportedDegree(usize),
    #[error("invalid map: {0}")]
    InvalidMap(String),
    #[error("map is not fibered: {0}")]
    NotFibered(String),
    #[error("chart {0} is not valid at this point")]
    InvalidChart(usize),
}

/// Square root of the Fubini–Study metric tensor in affine coordinates `ζ`:
/// `S = (1+|ζ|²)^{-1/2} (I − P) + (1+|ζ|²)^{-1} P`, with `P` the orthogonal
/// projection on `ζ`. `‖S v‖` is the Fubini–Study length of `v`.
pub fn fs_frame(zeta: [C64; 2]) -> Matrix2<C64> {
    let r2 = zeta[0].norm_sqr() + zeta[1].norm_sqr();
    fs_frame_pow(zeta, r2, 1.0)
}

/// Inverse of [`fs_frame`].
pub fn fs_frame_inv(zeta: [C64; 2]) -> Matrix2<C64> {
    let r2 = zeta[0].norm_sqr() + zeta[1].norm_sqr();
    fs_frame_pow(zeta, r2, -1.0)
}

fn fs_frame_pow(zeta: [C64; 2], r2: f64, sign: f64) -> Matrix2<C64> {
    let perp = (1.0 + r2).powf(-0.5 * sign);
    let along = (1.0 + r2).powf(-sign);
    let id = Matrix2::<C64>::identity();
    if r2 == 0.0 {
        return id * C64::new(perp, 0.0);
    }
    let v = Vector2::new(zeta[0], zeta[1]);
    let proj = (v * v.adjoint()) / C64::new(r2, 0.0);
    (id - proj) * C64::new(perp, 0.0) + proj * C64::new(along, 0.0)
}

impl TangentFrame {
    /// The differential expressed in Fubini–Study orthonormal frames at the
    /// base point and at its image. Singular values and the modulus of the
    /// determinant of this matrix do not depend on the charts used.
    pub fn fubini_study(&self) -> Matrix2<C64> {
        let src = self
            .base
            .affine_in(self.chart)
            .expect("tangent frame source chart is valid");
        let dst = self
            .image
            .affine_in(self.image_chart)
            .expect("tangent frame image chart is valid");
        fs_frame(dst) * self.matrix * fs_frame_inv(src)
    }
}

/// Chart coordinates of the homogeneous tangent vector `h` at `x`, where
/// `x[chart]` is nonzero.
pub fn chart_tangent(x: &[C64; 3], h: &[C64; 3], chart: usize) -> [C64; 2] {
    let xc = x[chart];
    let o = other_indices(chart);
    o.map(|a| (h[a] * xc - x[a] * h[chart]) / (xc * xc))
}

/// Singular values `(s_max, s_min)` of a 2×2 complex matrix, with `s_min`
/// computed as `|det| / s_max` for accuracy on ill-conditioned products.
pub fn singular_values(m: &Matrix2<C64>) -> (f64, f64) {
    let fro: f64 = m.iter().map(|c| c.norm_sqr()).sum();
    let det = (m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]).norm();
    let disc = (fro * fro - 4.0 * det * det).max(0.0).sqrt();
    let smax = ((fro + disc) / 2.0).sqrt();
    let smin = if smax > 0.0 { det / smax } else { 0.0 };
    (smax, smin)
}

/// Unit right-singular vector of `m` for its smallest singular value.
pub fn weakest_direction(m: &Matrix2<C64>) -> [C64; 2] {
    // Eigenvector of the Hermitian matrix H = m* m for its smallest eigenvalue.
    let h = m.adjoint() * m;
    let a = h[(0, 0)].re;
    let d = h[(1, 1)].re;
    let b = h[(0, 1)];
    let mean = 0.5 * (a + d);
    let rad = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
    let lmin = mean - rad;
    // (H - lmin) v = 0; pick the better-conditioned row.
    let v = if (a - lmin).abs() >= (d - lmin).abs() {
        [-b, C64::new(a - lmin, 0.0)]
    } else {
        [C64::new(d - lmin, 0.0), -b.conj()]
    };
    let n = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    if n == 0.0 {
        return [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
    }
    [v[0] / n, v[1] / n]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn arb_c64() -> impl Strategy<Value = C64> {
        (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, b)| C64::new(a, b))
    }

    fn arb_point() -> impl Strategy<Value = HomPoint> {
        (arb_c64(), arb_c64(), arb_c64())
            .prop_filter("nonzero", |(a, b, c)| a.norm() + b.norm() + c.norm() > 1e-3)
            .prop_map(|(a, b, c)| HomPoint::new(a, b, c).unwrap())
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(p in arb_point()) {
            let q = HomPoint::normalize(p.coords()).unwrap();
            prop_assert_eq!(q.coords(), p.coords());
            prop_assert_eq!(q.chart(), p.chart());
        }

        #[test]
        fn eval_commutes_with_scaling(p in arb_point(), lr in -2.0f64..2.0, la in 0.0f64..std::f64::consts::TAU) {
            let f = maps::lattes4_suspension();
            let lambda = C64::from_polar(lr.exp(), la);
            let scaled = p.coords().map(|x| x * lambda);
            let a = f.eval_map(&p).unwrap();
            let b = HomPoint::normalize(f.eval_lift(&scaled)).unwrap();
            prop_assert!(a.chordal_distance(&b) < 1e-12);
        }

        #[test]
        fn chordal_is_chart_independent(p in arb_point(), q in arb_point(), k in 0usize..3, l in 0usize..3) {
            let base = p.chordal_distance(&q);
            if let (Some(a), Some(b)) = (p.representative_in(k), q.representative_in(l)) {
                if a.iter().chain(b.iter()).all(|c| c.norm() < 1e6) {
                    prop_assert!((chordal(&a, &b) - base).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn tangent_matches_finite_differences(p in arb_point()) {
            let f = maps::lattes4_suspension();
            let frame = f.tangent_map(&p).unwrap();
            if frame.matrix.determinant().norm() > 1e-3 {
                let fd = finite_difference_jacobian(&f, &p, frame.image_chart, 1e-5);
                let scale = frame.matrix.norm().max(1.0);
                prop_assert!((fd - frame.matrix).norm() / scale < 1e-6,
                    "fd {:?} vs {:?}", fd, frame.matrix);
            }
        }
    }

    /// Central differences of the dehomogenized map in the point's chart.
    fn finite_difference_jacobian(
        f: &HomPolyMap,
        p: &HomPoint,
        dst: usize,
        h: f64,
    ) -> Matrix2<C64> {
        let src = p.chart();
        let zeta = p.affine();
        let chart_image = |z: [C64; 2]| -> [C64; 2] {
            let mut x = [c(1.0, 0.0); 3];
            let o = other_indices(src);
            x[o[0]] = z[0];
            x[o[1]] = z[1];
            let y = f.eval_lift(&x);
            let od = other_indices(dst);
            [y[od[0]] / y[dst], y[od[1]] / y[dst]]
        };
        let mut m = Matrix2::zeros();
        for col in 0..2 {
            // Holomorphic: derivative along the real direction suffices.
            let mut zp = zeta;
            let mut zm = zeta;
            zp[col] += h;
            zm[col] -= h;
            let a = chart_image(zp);
            let b = chart_image(zm);
            for row in 0..2 {
                m[(row, col)] = (a[row] - b[row]) / (2.0 * h);
            }
        }
        m
    }

    #[test]
    fn chain_rule_matches_finite_difference_of_iterate() {
        let f = maps::lattes4_suspension();
        let p = HomPoint::new(c(0.31, -0.12), c(0.44, 0.27), c(1.0, 0.0)).unwrap();
        let t1 = f.tangent_map(&p).unwrap();
        let t2 = f.tangent_map(&t1.image).unwrap();
        let product = t2.matrix * t1.matrix;
        let q = t2.image;
        // Finite differences of F∘F from chart(p) to chart(q).
        let h = 1e-6;
        let src = p.chart();
        let dst = q.chart();
        let ff = |z: [C64; 2]| -> [C64; 2] {
            let mut x = [c(1.0, 0.0); 3];
            let o = other_indices(src);
            x[o[0]] = z[0];
            x[o[1]] = z[1];
            let y = f.eval_lift(&f.eval_lift(&x));
            let od = other_indices(dst);
            [y[od[0]] / y[dst], y[od[1]] / y[dst]]
        };
        let zeta = p.affine();
        for col in 0..2 {
            let mut zp = zeta;
            let mut zm = zeta;
            zp[col] += h;
            zm[col] -= h;
            let a = ff(zp);
            let b = ff(zm);
            for row in 0..2 {
                let fd = (a[row] - b[row]) / (2.0 * h);
                let rel = (fd - product[(row, col)]).norm() / product.norm();
                assert!(rel < 1e-8, "rel {rel}");
            }
        }
    }

    #[test]
    fn triangle_inequality_on_random_triples() {
        use rand::Rng;
        let mut rng = crate::rng::stream(5, 0, 0);
        let mut pt = || {
            HomPoint::normalize([(); 3].map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))))
                .unwrap()
        };
        for _ in 0..1000 {
            let (a, b, cc) = (pt(), pt(), pt());
            assert!(a.chordal_distance(&cc) <= a.chordal_distance(&b) + b.chordal_distance(&cc) + 1e-15);
            assert!((a.chordal_distance(&b) - b.chordal_distance(&a)).abs() < 1e-15);
        }
    }

    #[test]
    fn fubini_study_frame_is_chart_independent() {
        let f = maps::lattes4_suspension();
        let p = HomPoint::new(c(0.7, -0.2), c(0.5, 0.4), c(0.9, 0.1)).unwrap();
        let mut reference = None;
        for src in 0..3 {
            for dst in 0..3 {
                let t = f.tangent_map_in(&p, src, dst).unwrap();
                let m = t.fubini_study();
                let (smax, smin) = singular_values(&m);
                match reference {
                    None => reference = Some((smax, smin)),
                    Some((a, b)) => {
                        assert!((smax - a).abs() < 1e-12 * a);
                        assert!((smin - b).abs() < 1e-12 * a);
                    }
                }
            }
        }
    }

    #[test]
    fn singular_values_of_diagonal() {
        let m = Matrix2::new(c(3.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, -0.5));
        let (a, b) = singular_values(&m);
        assert!((a - 3.0).abs() < 1e-15 && (b - 0.5).abs() < 1e-15);
        let v = weakest_direction(&m);
        assert!((v[1].norm() - 1.0).abs() < 1e-15);
    }
}
