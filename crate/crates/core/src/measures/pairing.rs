//! Slice and trace pairings of a tabulated potential against test functions.
//!
//! With `T = dd^c g` on the chart, the slice `T ∧ dd^c|W|²` pairs with `φ`
//! as `∫ g·φ_zz̄ dLeb` and `T ∧ dd^c|Z|²` as `∫ g·φ_ww̄ dLeb` (flat
//! normalization, so that `g = |z|²` gives `∫ φ dLeb`).

use serde::{Deserialize, Serialize};

use super::{MeasureError, TestFn};
use crate::greenfn::PotentialGrid;
use crate::numeric::par_sum;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    /// `T ∧ dd^c|Z|²`, paired against `φ_ww̄`.
    Z,
    /// `T ∧ dd^c|W|²`, paired against `φ_zz̄`.
    W,
}

/// Quadrature value with a refinement error estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairingValue {
    pub value: f64,
    pub error: f64,
}

fn check_support(grid: &PotentialGrid, phi: &TestFn) -> Result<(), MeasureError> {
    let s = phi
        .support()
        .ok_or_else(|| MeasureError::SupportViolation("test function has unbounded support".into()))?;
    for a in 0..4 {
        let [lo, hi] = grid.bbox.0[a];
        if !(s[a][0] > lo && s[a][1] < hi) {
            return Err(MeasureError::SupportViolation(format!(
                "axis {a}: support [{}, {}] not inside [{lo}, {hi}]",
                s[a][0], s[a][1]
            )));
        }
    }
    Ok(())
}

/// Midpoint sum over the nodes whose multi-index is a multiple of `stride`
/// on every axis, scaled by the corresponding cell volume.
fn midpoint_sum(grid: &PotentialGrid, phi: &TestFn, dir: Direction, stride: usize) -> f64 {
    let h = grid.spacing();
    let vol: f64 = h.iter().map(|x| x * stride as f64).product();
    let sub: [usize; 4] = grid.resolution.map(|r| r.div_ceil(stride));
    let n: usize = sub.iter().product();
    let full = grid.resolution;
    let sum = par_sum(n, |k| {
        let mut rem = k;
        let mut flat = 0;
        let mut mult = 1;
        let mut idx = [0; 4];
        for a in (0..4).rev() {
            idx[a] = (rem % sub[a]) * stride;
            rem /= sub[a];
        }
        for a in (0..4).rev() {
            flat += idx[a] * mult;
            mult *= full[a];
        }
        let g = grid.values[flat];
        if g == 0.0 {
            return 0.0;
        }
        let (z, w) = grid.node(flat);
        let (_, zz, ww) = phi.eval_all(z, w);
        g * match dir {
            Direction::W => zz,
            Direction::Z => ww,
        }
    });
    sum * vol
}

/// `⟨T ∧ dd^c|W|², φ⟩` (direction `W`) or `⟨T ∧ dd^c|Z|², φ⟩` (direction
/// `Z`) by tensor-midpoint quadrature. The error estimate compares with the
/// rule on every other node (spacing `2h`) and applies the second-order
/// Richardson factor.
pub fn slice_pairing(grid: &PotentialGrid, phi: &TestFn, dir: Direction) -> Result<PairingValue, MeasureError> {
    check_support(grid, phi)?;
    let fine = midpoint_sum(grid, phi, dir, 1);
    let coarse = midpoint_sum(grid, phi, dir, 2);
    Ok(PairingValue {
        value: fine,
        error: (fine - coarse).abs() / 3.0,
    })
}

/// Sum of the two slice pairings.
pub fn trace_pairing(grid: &PotentialGrid, phi: &TestFn) -> Result<PairingValue, MeasureError> {
    let a = slice_pairing(grid, phi, Direction::W)?;
    let b = slice_pairing(grid, phi, Direction::Z)?;
    Ok(PairingValue {
        value: a.value + b.value,
        error: a.error + b.error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::greenfn::GridBox;
    use crate::C64;

    /// `∫ φ dLeb` for a product bump: each factor integrates to `r·32/35`.
    fn bump_integral(radius: [f64; 4]) -> f64 {
        radius.iter().map(|r| r * 32.0 / 35.0).product()
    }

    #[test]
    fn flat_potential_integrates_the_test_function() {
        let radius = [0.5, 0.4, 0.45, 0.5];
        let phi = TestFn::Bump {
            center: [0.1, -0.05, 0.0, 0.1],
            radius,
        };
        let grid = PotentialGrid::tabulate(2, GridBox::cube(-1.0, 1.0), [64; 4], |z, _| z.norm_sqr());
        let got = slice_pairing(&grid, &phi, Direction::W).unwrap();
        let exact = bump_integral(radius);
        assert!((got.value - exact).abs() < 0.02 * exact, "{} vs {exact}", got.value);

        let grid = PotentialGrid::tabulate(2, GridBox::cube(-1.0, 1.0), [64; 4], |z, w| z.norm_sqr() + w.norm_sqr());
        let got = trace_pairing(&grid, &phi).unwrap();
        assert!((got.value - 2.0 * exact).abs() < 0.04 * exact);
    }

    #[test]
    fn zero_potential_pairs_to_zero() {
        let phi = TestFn::bump([0.0; 4], 0.5);
        let grid = PotentialGrid::tabulate(2, GridBox::cube(-1.0, 1.0), [16; 4], |_, _| 0.0);
        assert_eq!(slice_pairing(&grid, &phi, Direction::W).unwrap().value, 0.0);
        assert_eq!(trace_pairing(&grid, &phi).unwrap().value, 0.0);
    }

    #[test]
    fn support_must_stay_inside_the_box() {
        let grid = PotentialGrid::tabulate(2, GridBox::cube(-1.0, 1.0), [16; 4], |_, _| 1.0);
        let phi = TestFn::bump([0.6, 0.0, 0.0, 0.0], 0.4);
        assert!(matches!(
            slice_pairing(&grid, &phi, Direction::W),
            Err(MeasureError::SupportViolation(_))
        ));
        assert!(slice_pairing(&grid, &TestFn::Constant(1.0), Direction::Z).is_err());
    }

    #[test]
    fn linear_in_potential_and_test_function() {
        let bbox = GridBox::cube(-1.0, 1.0);
        let res = [20; 4];
        let g1 = |z: C64, w: C64| (z.re + w.norm_sqr()).max(0.0);
        let g2 = |z: C64, w: C64| (z.im * w.re).sin();
        let a = PotentialGrid::tabulate(2, bbox, res, g1);
        let b = PotentialGrid::tabulate(2, bbox, res, g2);
        let ab = PotentialGrid::tabulate(2, bbox, res, |z, w| 2.0 * g1(z, w) - 3.0 * g2(z, w));
        let p = TestFn::bump([0.1, 0.0, 0.1, 0.0], 0.6);
        let q = TestFn::bump([-0.1, 0.2, 0.0, -0.1], 0.5);
        let pq = TestFn::Combo(vec![(1.5, p.clone()), (0.5, q.clone())]);
        for dir in [Direction::W, Direction::Z] {
            let v = |g: &PotentialGrid, f: &TestFn| slice_pairing(g, f, dir).unwrap().value;
            let lin_g = 2.0 * v(&a, &p) - 3.0 * v(&b, &p);
            assert!((v(&ab, &p) - lin_g).abs() <= 1e-10 * lin_g.abs().max(1e-3));
            let lin_f = 1.5 * v(&a, &p) + 0.5 * v(&a, &q);
            assert!((v(&a, &pq) - lin_f).abs() <= 1e-10 * lin_f.abs().max(1e-3));
        }
    }
}
