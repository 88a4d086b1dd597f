use serde::{Deserialize, Serialize};

use super::ProjError;
use crate::C64;

/// Coordinates below this modulus are treated as zero.
pub const DEGENERACY_THRESHOLD: f64 = 1e-300;

/// Default chordal tolerance for point equality.
pub const POINT_TOL: f64 = 1e-12;

/// A point of the projective plane stored as a normalized homogeneous triple.
///
/// The coordinate of maximal modulus (lowest index on ties) is exactly `1`
/// and all moduli are at most `1`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct HomPoint {
    coords: [C64; 3],
    chart: usize,
}

impl HomPoint {
    /// Divides `raw` by its coordinate of maximal modulus.
    pub fn normalize(raw: [C64; 3]) -> Result<Self, ProjError> {
        let mut chart = 0;
        let mut best = raw[0].norm();
        for (i, c) in raw.iter().enumerate().skip(1) {
            let m = c.norm();
            if m > best {
                best = m;
                chart = i;
            }
        }
        if !(best >= DEGENERACY_THRESHOLD) {
            return Err(ProjError::ZeroVector);
        }
        let pivot = raw[chart];
        let mut coords = raw.map(|c| c / pivot);
        coords[chart] = C64::new(1.0, 0.0);
        // Rounding in the division can push a modulus to (or past) 1. Shrink
        // such entries so that re-normalizing selects the same chart.
        for (j, c) in coords.iter_mut().enumerate() {
            if j == chart {
                continue;
            }
            while c.norm() > 1.0 || (j < chart && c.norm() >= 1.0) {
                *c *= 1.0 - 4.0 * f64::EPSILON;
            }
        }
        Ok(Self { coords, chart })
    }

    pub fn new(x: C64, y: C64, z: C64) -> Result<Self, ProjError> {
        Self::normalize([x, y, z])
    }

    /// Point with the given affine coordinates in chart `chart`.
    pub fn from_affine(chart: usize, affine: [C64; 2]) -> Result<Self, ProjError> {
        let mut raw = [C64::new(1.0, 0.0); 3];
        let others = other_indices(chart);
        raw[others[0]] = affine[0];
        raw[others[1]] = affine[1];
        Self::normalize(raw)
    }

    pub fn coords(&self) -> [C64; 3] {
        self.coords
    }

    /// Index of the coordinate equal to one.
    pub fn chart(&self) -> usize {
        self.chart
    }

    /// Affine coordinates in the point's own chart.
    pub fn affine(&self) -> [C64; 2] {
        let o = other_indices(self.chart);
        [self.coords[o[0]], self.coords[o[1]]]
    }

    /// Representative whose `chart` coordinate equals one, if that coordinate
    /// does not vanish.
    pub fn representative_in(&self, chart: usize) -> Option<[C64; 3]> {
        let pivot = self.coords[chart];
        if pivot.norm() < DEGENERACY_THRESHOLD {
            return None;
        }
        let mut r = self.coords.map(|c| c / pivot);
        r[chart] = C64::new(1.0, 0.0);
        Some(r)
    }

    /// Affine coordinates in an arbitrary chart.
    pub fn affine_in(&self, chart: usize) -> Option<[C64; 2]> {
        let r = self.representative_in(chart)?;
        let o = other_indices(chart);
        Some([r[o[0]], r[o[1]]])
    }

    /// Fubini–Study chordal distance, the sine of the angle between the two
    /// complex lines. Lies in `[0, 1]`.
    pub fn chordal_distance(&self, other: &HomPoint) -> f64 {
        chordal(&self.coords, &other.coords)
    }

    /// Equality up to scalars within a chordal tolerance.
    pub fn approx_eq(&self, other: &HomPoint, tol: f64) -> bool {
        self.chordal_distance(other) <= tol
    }
}

impl PartialEq for HomPoint {
    fn eq(&self, other: &Self) -> bool {
        self.approx_eq(other, POINT_TOL)
    }
}

/// The two indices different from `chart`, in increasing order.
pub fn other_indices(chart: usize) -> [usize; 2] {
    match chart {
        0 => [1, 2],
        1 => [0, 2],
        2 => [0, 1],
        _ => panic!("chart index out of range: {chart}"),
    }
}

/// `|p ∧ q| / (|p| |q|)` computed from the 2×2 minors, which keeps full
/// relative accuracy for nearby points.
pub fn chordal(p: &[C64; 3], q: &[C64; 3]) -> f64 {
    let np: f64 = p.iter().map(|c| c.norm_sqr()).sum();
    let nq: f64 = q.iter().map(|c| c.norm_sqr()).sum();
    let mut wedge = 0.0;
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        wedge += (p[i] * q[j] - p[j] * q[i]).norm_sqr();
    }
    (wedge / (np * nq)).sqrt().min(1.0)
}

/// Chordal distance between two complex lines of `C²`.
pub fn line_distance(a: [C64; 2], b: [C64; 2]) -> f64 {
    let na = a[0].norm_sqr() + a[1].norm_sqr();
    let nb = b[0].norm_sqr() + b[1].norm_sqr();
    let wedge = (a[0] * b[1] - a[1] * b[0]).norm_sqr();
    (wedge / (na * nb)).sqrt().min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn normalize_scalar_multiple() {
        let p = HomPoint::normalize([c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert_eq!(p.chart(), 0);
        assert_eq!(p.coords(), [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
    }

    #[test]
    fn normalize_divides_by_first_maximal_coordinate() {
        let p = HomPoint::normalize([c(1.0, 1.0), c(1.0, -1.0), c(0.0, 0.0)]).unwrap();
        assert_eq!(p.chart(), 0);
        let q = p.coords();
        assert!((q[1] - c(0.0, -1.0)).norm() < 1e-15);
        assert_eq!(q[2], c(0.0, 0.0));
    }

    #[test]
    fn normalize_rejects_zero() {
        assert!(matches!(
            HomPoint::normalize([c(0.0, 0.0); 3]),
            Err(ProjError::ZeroVector)
        ));
        assert!(matches!(
            HomPoint::normalize([c(1e-301, 0.0), c(0.0, 0.0), c(0.0, 0.0)]),
            Err(ProjError::ZeroVector)
        ));
    }

    #[test]
    fn chordal_orthogonal_and_identity() {
        let p = HomPoint::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)).unwrap();
        let q = HomPoint::new(c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)).unwrap();
        assert!((p.chordal_distance(&q) - 1.0).abs() < 1e-15);
        assert_eq!(p.chordal_distance(&p), 0.0);
    }

    #[test]
    fn affine_round_trip() {
        let p = HomPoint::new(c(0.3, 0.1), c(-0.2, 0.7), c(1.0, 0.0)).unwrap();
        for chart in 0..3 {
            let a = p.affine_in(chart).unwrap();
            let q = HomPoint::from_affine(chart, a).unwrap();
            assert!(p.approx_eq(&q, 1e-15));
        }
    }
}
