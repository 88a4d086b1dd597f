use nalgebra::Matrix2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::point::{other_indices, HomPoint};
use super::ProjError;
use crate::C64;

/// Highest supported degree.
pub const MAX_DEGREE: usize = 8;

/// Default floor for `min ‖F(p)‖ / ‖p‖ᵈ` in [`HomPolyMap::check_nondegenerate`].
pub const NONDEGENERACY_FLOOR: f64 = 1e-6;

/// Number of monomials of degree `d` in three variables.
pub fn monomial_count(d: usize) -> usize {
    (d + 1) * (d + 2) / 2
}

/// Position of `z^i w^j t^(d-i-j)` in a dense coefficient table.
pub fn monomial_index(d: usize, i: usize, j: usize) -> usize {
    debug_assert!(i + j <= d);
    i * (d + 1) - i * (i.saturating_sub(1)) / 2 + j
}

/// Exponent triples in table order.
pub fn monomials(d: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::with_capacity(monomial_count(d));
    for i in 0..=d {
        for j in 0..=(d - i) {
            out.push([i, j, d - i - j]);
        }
    }
    out
}

/// Homogeneous map `[P:Q]` of the projective line, coefficients of
/// `z^i w^(d-i)` indexed by `i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaseMap {
    degree: usize,
    comps: [Vec<C64>; 2],
}

impl BaseMap {
    pub fn new(degree: usize, p: Vec<C64>, q: Vec<C64>) -> Result<Self, ProjError> {
        if !(2..=MAX_DEGREE).contains(&degree) {
            return Err(ProjError::UnsupportedDegree(degree));
        }
        if p.len() != degree + 1 || q.len() != degree + 1 {
            return Err(ProjError::InvalidMap(format!(
                "base components need {} coefficients",
                degree + 1
            )));
        }
        Ok(Self {
            degree,
            comps: [p, q],
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Coefficients of component `c` (0 = P, 1 = Q) by power of `z`.
    pub fn coeffs(&self, c: usize) -> &[C64] {
        &self.comps[c]
    }

    pub fn eval(&self, z: C64, w: C64) -> [C64; 2] {
        let d = self.degree;
        let mut wp = [C64::new(1.0, 0.0); MAX_DEGREE + 1];
        for e in 1..=d {
            wp[e] = wp[e - 1] * w;
        }
        self.comps.each_ref().map(|cs| {
            let mut acc = cs[d];
            for i in (0..d).rev() {
                acc = acc * z + cs[i] * wp[d - i];
            }
            acc
        })
    }

    /// The suspension `[P:Q:tᵈ]`.
    pub fn suspension(&self) -> HomPolyMap {
        let d = self.degree;
        let n = monomial_count(d);
        let mut comps = [vec![C64::new(0.0, 0.0); n], vec![C64::new(0.0, 0.0); n], vec![C64::new(0.0, 0.0); n]];
        for c in 0..2 {
            for i in 0..=d {
                comps[c][monomial_index(d, i, d - i)] = self.comps[c][i];
            }
        }
        comps[2][monomial_index(d, 0, 0)] = C64::new(1.0, 0.0);
        HomPolyMap {
            degree: d,
            comps,
            base: Some(self.clone()),
        }
    }
}

/// A degree-`d` endomorphism of the projective plane given by three
/// homogeneous polynomials with dense coefficient tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomPolyMap {
    degree: usize,
    comps: [Vec<C64>; 3],
    base: Option<BaseMap>,
}

/// Differential of a map in the affine charts of source and image.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TangentFrame {
    pub base: HomPoint,
    /// Source chart.
    pub chart: usize,
    pub image: HomPoint,
    pub image_chart: usize,
    pub matrix: Matrix2<C64>,
}

/// Outcome of [`HomPolyMap::check_nondegenerate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NondegeneracyReport {
    pub passed: bool,
    pub min_ratio: f64,
    pub floor: f64,
    pub trials: usize,
}

impl HomPolyMap {
    /// Builds a map from dense coefficient tables (see [`monomial_index`]).
    pub fn new(degree: usize, comps: [Vec<C64>; 3]) -> Result<Self, ProjError> {
        if !(2..=MAX_DEGREE).contains(&degree) {
            return Err(ProjError::UnsupportedDegree(degree));
        }
        let n = monomial_count(degree);
        if comps.iter().any(|c| c.len() != n) {
            return Err(ProjError::InvalidMap(format!(
                "each component needs {n} coefficients for degree {degree}"
            )));
        }
        if comps
            .iter()
            .any(|c| c.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()))
        {
            return Err(ProjError::InvalidMap("non-finite coefficient".into()));
        }
        if comps.iter().any(|c| c.iter().all(|x| x.norm() == 0.0)) {
            return Err(ProjError::InvalidMap("identically zero component".into()));
        }
        Ok(Self {
            degree,
            comps,
            base: None,
        })
    }

    /// Marks the map as fibered over `π[z:w:t] = [z:w]`, checking that the
    /// first two components only involve `z, w` and the third is `c·tᵈ`.
    pub fn into_fibered(mut self) -> Result<Self, ProjError> {
        let d = self.degree;
        let t_only = monomial_index(d, 0, 0);
        let mut base = [vec![C64::new(0.0, 0.0); d + 1], vec![C64::new(0.0, 0.0); d + 1]];
        for (idx, [i, j, k]) in monomials(d).into_iter().enumerate() {
            for c in 0..2 {
                let v = self.comps[c][idx];
                if k > 0 && v.norm() != 0.0 {
                    return Err(ProjError::NotFibered(format!(
                        "component {c} involves t through z^{i} w^{j} t^{k}"
                    )));
                }
                if k == 0 {
                    base[c][i] = v;
                }
            }
            if idx != t_only && self.comps[2][idx].norm() != 0.0 {
                return Err(ProjError::NotFibered(
                    "third component must be c·t^d".into(),
                ));
            }
        }
        if self.comps[2][t_only].norm() == 0.0 {
            return Err(ProjError::NotFibered("coefficient of t^d vanishes".into()));
        }
        let [p, q] = base;
        self.base = Some(BaseMap::new(d, p, q)?);
        Ok(self)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn components(&self) -> &[Vec<C64>; 3] {
        &self.comps
    }

    pub fn coefficient(&self, comp: usize, exps: [usize; 3]) -> C64 {
        self.comps[comp][monomial_index(self.degree, exps[0], exps[1])]
    }

    pub fn is_fibered(&self) -> bool {
        self.base.is_some()
    }

    /// The base map `θ = [P:Q]` of a fibered map.
    pub fn base(&self) -> Option<&BaseMap> {
        self.base.as_ref()
    }

    /// Coefficient `c` of `tᵈ` in the third component of a fibered map.
    pub fn fiber_coefficient(&self) -> C64 {
        self.comps[2][monomial_index(self.degree, 0, 0)]
    }

    /// The homogeneous lift evaluated on a raw triple.
    pub fn eval_lift(&self, x: &[C64; 3]) -> [C64; 3] {
        let d = self.degree;
        let pw = powers(x, d);
        let mut out = [C64::new(0.0, 0.0); 3];
        for (c, o) in out.iter_mut().enumerate() {
            let cs = &self.comps[c];
            // Horner in z over rows of fixed i.
            let mut acc = C64::new(0.0, 0.0);
            for i in (0..=d).rev() {
                let mut row = C64::new(0.0, 0.0);
                let base = monomial_index(d, i, 0);
                for j in 0..=(d - i) {
                    let k = d - i - j;
                    row += cs[base + j] * pw[1][j] * pw[2][k];
                }
                acc = acc * x[0] + row;
            }
            *o = acc;
        }
        out
    }

    /// Lift values together with the gradients `∂F_c/∂x_i` (row `c`, column `i`).
    pub fn eval_lift_grad(&self, x: &[C64; 3]) -> ([C64; 3], [[C64; 3]; 3]) {
        let d = self.degree;
        let pw = powers(x, d);
        let zero = C64::new(0.0, 0.0);
        let mut val = [zero; 3];
        let mut grad = [[zero; 3]; 3];
        for (idx, [i, j, k]) in monomials(d).into_iter().enumerate() {
            let m = pw[0][i] * pw[1][j] * pw[2][k];
            let dz = if i > 0 { pw[0][i - 1] * pw[1][j] * pw[2][k] * i as f64 } else { zero };
            let dw = if j > 0 { pw[0][i] * pw[1][j - 1] * pw[2][k] * j as f64 } else { zero };
            let dt = if k > 0 { pw[0][i] * pw[1][j] * pw[2][k - 1] * k as f64 } else { zero };
            for c in 0..3 {
                let a = self.comps[c][idx];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                val[c] += a * m;
                grad[c][0] += a * dz;
                grad[c][1] += a * dw;
                grad[c][2] += a * dt;
            }
        }
        (val, grad)
    }

    /// `normalize(F(p))`.
    pub fn eval_map(&self, p: &HomPoint) -> Result<HomPoint, ProjError> {
        HomPoint::normalize(self.eval_lift(&p.coords())).map_err(|_| ProjError::Indeterminate)
    }

    /// Differential in the charts `chart(p)` and `chart(F(p))`.
    pub fn tangent_map(&self, p: &HomPoint) -> Result<TangentFrame, ProjError> {
        let image = self.eval_map(p)?;
        self.tangent_map_in(p, p.chart(), image.chart())
    }

    /// Differential with explicitly chosen source and image charts.
    pub fn tangent_map_in(
        &self,
        p: &HomPoint,
        src: usize,
        dst: usize,
    ) -> Result<TangentFrame, ProjError> {
        let x = p.representative_in(src).ok_or(ProjError::InvalidChart(src))?;
        let (f, g) = self.eval_lift_grad(&x);
        let image = HomPoint::normalize(f).map_err(|_| ProjError::Indeterminate)?;
        let fd = f[dst];
        if fd.norm() < 1e-300 {
            return Err(ProjError::InvalidChart(dst));
        }
        let rows = other_indices(dst);
        let cols = other_indices(src);
        let mut m = Matrix2::zeros();
        for (r, &j) in rows.iter().enumerate() {
            for (c, &i) in cols.iter().enumerate() {
                m[(r, c)] = (g[j][i] * fd - f[j] * g[dst][i]) / (fd * fd);
            }
        }
        Ok(TangentFrame {
            base: *p,
            chart: src,
            image,
            image_chart: dst,
            matrix: m,
        })
    }

    /// Probabilistic nondegeneracy check: random points, each followed by a
    /// short Gauss–Newton descent of `‖F‖` in its chart, must keep
    /// `‖F(p)‖ / ‖p‖ᵈ` (sup-norms) above `floor`.
    pub fn check_nondegenerate(
        &self,
        trials: usize,
        seed: u64,
        floor: f64,
    ) -> Result<NondegeneracyReport, ProjError> {
        let trials = trials.max(100);
        let mut rng = crate::rng::stream(seed, 0, 0);
        let mut min_ratio = f64::INFINITY;
        for _ in 0..trials {
            let raw = [(); 3].map(|_| random_disc_point(&mut rng));
            let p = match HomPoint::normalize(raw) {
                Ok(p) => p,
                Err(_) => continue,
            };
            let r = self.descend_ratio(&p)?;
            min_ratio = min_ratio.min(r);
        }
        Ok(NondegeneracyReport {
            passed: min_ratio > floor,
            min_ratio,
            floor,
            trials,
        })
    }

    fn ratio(&self, x: &[C64; 3]) -> Result<f64, ProjError> {
        let f = self.eval_lift(x);
        if f.iter().all(|c| c.norm() < 1e-300) {
            return Err(ProjError::DegenerateMap);
        }
        Ok(sup_norm(&f) / sup_norm(x).powi(self.degree as i32))
    }

    fn descend_ratio(&self, p: &HomPoint) -> Result<f64, ProjError> {
        let chart = p.chart();
        let cols = other_indices(chart);
        let mut x = p.coords();
        let mut best = self.ratio(&x)?;
        for _ in 0..12 {
            let (f, g) = self.eval_lift_grad(&x);
            // Least squares step for J δ = -F, J = ∂F/∂(x_cols) (3×2).
            let mut jhj = Matrix2::<C64>::zeros();
            let mut jhf = nalgebra::Vector2::<C64>::zeros();
            for c in 0..3 {
                for a in 0..2 {
                    jhf[a] += g[c][cols[a]].conj() * f[c];
                    for b in 0..2 {
                        jhj[(a, b)] += g[c][cols[a]].conj() * g[c][cols[b]];
                    }
                }
            }
            let Some(inv) = jhj.try_inverse() else { break };
            let step = -(inv * jhf);
            let mut accepted = false;
            let mut damp = 1.0;
            for _ in 0..6 {
                let mut y = x;
                y[cols[0]] += step[0] * damp;
                y[cols[1]] += step[1] * damp;
                let r = self.ratio(&y)?;
                if r.is_finite() && r < best {
                    best = r;
                    x = y;
                    accepted = true;
                    break;
                }
                damp *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        Ok(best)
    }
}

fn powers(x: &[C64; 3], d: usize) -> [[C64; MAX_DEGREE + 1]; 3] {
    let mut pw = [[C64::new(1.0, 0.0); MAX_DEGREE + 1]; 3];
    for v in 0..3 {
        for e in 1..=d {
            pw[v][e] = pw[v][e - 1] * x[v];
        }
    }
    pw
}

pub(crate) fn sup_norm(x: &[C64]) -> f64 {
    x.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

pub(crate) fn random_disc_point<R: Rng>(rng: &mut R) -> C64 {
    let r = rng.random::<f64>().sqrt();
    let a = rng.random::<f64>() * std::f64::consts::TAU;
    C64::from_polar(r, a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn monomial_index_enumerates_table_order() {
        for d in 2..=MAX_DEGREE {
            for (idx, [i, j, _]) in monomials(d).into_iter().enumerate() {
                assert_eq!(monomial_index(d, i, j), idx);
            }
            assert_eq!(monomials(d).len(), monomial_count(d));
        }
    }

    #[test]
    fn power_map_values() {
        let f = maps::power(2);
        let p = HomPoint::new(c(1.0, 0.0), c(0.0, 1.0), c(0.0, 0.0)).unwrap();
        let q = f.eval_map(&p).unwrap();
        assert_eq!(q.coords(), [c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0)]);
        let one = HomPoint::new(c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)).unwrap();
        assert!(f.eval_map(&one).unwrap().approx_eq(&one, 0.0));
    }

    #[test]
    fn power_map_tangent() {
        let f = maps::power(2);
        let one = HomPoint::new(c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)).unwrap();
        let t = f.tangent_map_in(&one, 2, 2).unwrap();
        assert_eq!(t.matrix, Matrix2::new(c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(2.0, 0.0)));
        let origin = HomPoint::new(c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)).unwrap();
        let t = f.tangent_map(&origin).unwrap();
        assert_eq!(t.matrix, Matrix2::zeros());
    }

    #[test]
    fn nondegeneracy() {
        assert!(maps::power(2).check_nondegenerate(200, 1, NONDEGENERACY_FLOOR).unwrap().passed);
        assert!(maps::lattes4_suspension()
            .check_nondegenerate(200, 1, NONDEGENERACY_FLOOR)
            .unwrap()
            .passed);
        // [z² : zw : zt] vanishes on the line z = 0.
        let d = 2;
        let n = monomial_count(d);
        let mut comps = [vec![c(0.0, 0.0); n], vec![c(0.0, 0.0); n], vec![c(0.0, 0.0); n]];
        comps[0][monomial_index(d, 2, 0)] = c(1.0, 0.0);
        comps[1][monomial_index(d, 1, 1)] = c(1.0, 0.0);
        comps[2][monomial_index(d, 1, 0)] = c(1.0, 0.0);
        let bad = HomPolyMap::new(d, comps).unwrap();
        match bad.check_nondegenerate(200, 1, NONDEGENERACY_FLOOR) {
            Ok(r) => assert!(!r.passed, "min ratio {}", r.min_ratio),
            Err(e) => assert!(matches!(e, ProjError::DegenerateMap)),
        }
    }

    #[test]
    fn fibered_validation() {
        assert!(maps::power(2).into_fibered().is_ok());
        let d = 2;
        let n = monomial_count(d);
        let mut comps = [vec![c(0.0, 0.0); n], vec![c(0.0, 0.0); n], vec![c(0.0, 0.0); n]];
        comps[0][monomial_index(d, 1, 0)] = c(1.0, 0.0); // z t
        comps[1][monomial_index(d, 0, 2)] = c(1.0, 0.0);
        comps[2][monomial_index(d, 0, 0)] = c(1.0, 0.0);
        let f = HomPolyMap::new(d, comps).unwrap();
        assert!(matches!(f.into_fibered(), Err(ProjError::NotFibered(_))));
    }
}
