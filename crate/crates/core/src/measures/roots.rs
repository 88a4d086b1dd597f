use nalgebra::DMatrix;

use super::MeasureError;
use crate::C64;

pub const MAX_ROOT_DEGREE: usize = 16;

/// Residual bound relative to `Σ |cᵢ| |r|ⁱ`.
pub const ROOT_RESIDUAL: f64 = 1e-8;

/// `Σ cᵢ zⁱ` and its derivative, coefficients in ascending order.
pub fn horner(coeffs: &[C64], z: C64) -> (C64, C64) {
    let mut p = C64::new(0.0, 0.0);
    let mut dp = C64::new(0.0, 0.0);
    for c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

fn magnitude(coeffs: &[C64], z: C64) -> f64 {
    let r = z.norm();
    coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c.norm())
}

/// All complex roots, with multiplicity, of `Σ cᵢ zⁱ` (ascending
/// coefficients, nonzero leading coefficient): eigenvalues of the companion
/// matrix followed by one Newton step per root.
pub fn roots_univariate(coeffs: &[C64]) -> Result<Vec<C64>, MeasureError> {
    let deg = coeffs.len().saturating_sub(1);
    if deg == 0 {
        return Ok(Vec::new());
    }
    if deg > MAX_ROOT_DEGREE {
        return Err(MeasureError::IllConditioned(format!("degree {deg} exceeds {MAX_ROOT_DEGREE}")));
    }
    let lead = coeffs[deg];
    if lead.norm() == 0.0 {
        return Err(MeasureError::IllConditioned("leading coefficient vanishes".into()));
    }
    let roots = if deg == 1 {
        vec![-coeffs[0] / lead]
    } else {
        let mut m = DMatrix::<C64>::zeros(deg, deg);
        for i in 1..deg {
            m[(i, i - 1)] = C64::new(1.0, 0.0);
        }
        for i in 0..deg {
            m[(i, deg - 1)] = -coeffs[i] / lead;
        }
        let schur = nalgebra::Schur::try_new(m, f64::EPSILON, 10_000)
            .ok_or_else(|| MeasureError::IllConditioned("companion eigenvalues did not converge".into()))?;
        let (_, t) = schur.unpack();
        (0..deg).map(|i| t[(i, i)]).collect()
    };
    roots
        .into_iter()
        .map(|r| {
            let polished = polish(coeffs, r);
            let (p, _) = horner(coeffs, polished);
            if p.norm() <= ROOT_RESIDUAL * magnitude(coeffs, polished) {
                Ok(polished)
            } else {
                Err(MeasureError::IllConditioned(format!(
                    "root {polished} leaves residual {:e}",
                    p.norm()
                )))
            }
        })
        .collect()
}

/// One Newton step, kept only if it lowers the residual.
fn polish(coeffs: &[C64], r: C64) -> C64 {
    let (p, dp) = horner(coeffs, r);
    if dp.norm() == 0.0 || !dp.re.is_finite() {
        return r;
    }
    let cand = r - p / dp;
    if horner(coeffs, cand).0.norm() <= p.norm() {
        cand
    } else {
        r
    }
}
