//! Compactly supported test functions on an affine chart with closed-form
//! second derivatives.
//!
//! Coordinates are `(z, w)` with `z = x₀ + i x₁`, `w = x₂ + i x₃`. The
//! operators are `φ_zz̄ = ¼(∂²₀ + ∂²₁)φ` and `φ_ww̄ = ¼(∂²₂ + ∂²₃)φ`.

use serde::{Deserialize, Serialize};

use crate::C64;

/// Closed box `[lo, hi]` in each of the four real coordinates.
pub type Support = [[f64; 2]; 4];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TestFn {
    /// `Π (1 − sₐ²)³` with `sₐ = (xₐ − centerₐ)/radiusₐ`, zero for `|sₐ| ≥ 1`.
    Bump { center: [f64; 4], radius: [f64; 4] },
    /// Bump in `z` times `(1 − |w|²/R²)³`, a function of `|w|²` only.
    RadialW {
        center_z: [f64; 2],
        radius_z: [f64; 2],
        radius_w: f64,
    },
    /// Constant function; unbounded support, for diagnostics only.
    Constant(f64),
    /// Linear combination.
    Combo(Vec<(f64, TestFn)>),
}

/// Profile `(1 − s²)³` and its first two derivatives in `s`.
fn profile(s: f64) -> (f64, f64, f64) {
    if s.abs() >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let q = 1.0 - s * s;
    (q * q * q, -6.0 * s * q * q, q * (30.0 * s * s - 6.0))
}

/// One-dimensional factor in physical coordinates.
fn factor(x: f64, c: f64, r: f64) -> (f64, f64, f64) {
    let (b, db, ddb) = profile((x - c) / r);
    (b, db / r, ddb / (r * r))
}

fn coords(z: C64, w: C64) -> [f64; 4] {
    [z.re, z.im, w.re, w.im]
}

impl TestFn {
    /// Centered bump of half-width `r` in every coordinate.
    pub fn bump(center: [f64; 4], r: f64) -> Self {
        Self::Bump {
            center,
            radius: [r; 4],
        }
    }

    /// Returns `(φ, φ_zz̄, φ_ww̄)`.
    pub fn eval_all(&self, z: C64, w: C64) -> (f64, f64, f64) {
        match self {
            Self::Bump { center, radius } => {
                let x = coords(z, w);
                let f: [(f64, f64, f64); 4] = std::array::from_fn(|a| factor(x[a], center[a], radius[a]));
                let v = f[0].0 * f[1].0 * f[2].0 * f[3].0;
                if v == 0.0 && f.iter().any(|t| t.0 == 0.0 && t.2 == 0.0) {
                    return (0.0, 0.0, 0.0);
                }
                let zz = 0.25 * (f[0].2 * f[1].0 + f[0].0 * f[1].2) * f[2].0 * f[3].0;
                let ww = 0.25 * f[0].0 * f[1].0 * (f[2].2 * f[3].0 + f[2].0 * f[3].2);
                (v, zz, ww)
            }
            Self::RadialW {
                center_z,
                radius_z,
                radius_w,
            } => {
                let a = factor(z.re, center_z[0], radius_z[0]);
                let b = factor(z.im, center_z[1], radius_z[1]);
                let q = w.norm_sqr();
                let r2 = radius_w * radius_w;
                let (g, dg, ddg) = if q >= r2 {
                    (0.0, 0.0, 0.0)
                } else {
                    let m = 1.0 - q / r2;
                    (m * m * m, -3.0 * m * m / r2, 6.0 * m / (r2 * r2))
                };
                let ab = a.0 * b.0;
                (ab * g, 0.25 * (a.2 * b.0 + a.0 * b.2) * g, ab * (dg + q * ddg))
            }
            Self::Constant(c) => (*c, 0.0, 0.0),
            Self::Combo(terms) => terms.iter().fold((0.0, 0.0, 0.0), |acc, (c, f)| {
                let (v, zz, ww) = f.eval_all(z, w);
                (acc.0 + c * v, acc.1 + c * zz, acc.2 + c * ww)
            }),
        }
    }

    pub fn value(&self, z: C64, w: C64) -> f64 {
        self.eval_all(z, w).0
    }

    pub fn d_zzbar(&self, z: C64, w: C64) -> f64 {
        self.eval_all(z, w).1
    }

    pub fn d_wwbar(&self, z: C64, w: C64) -> f64 {
        self.eval_all(z, w).2
    }

    /// Bounding box of the support, `None` if unbounded.
    pub fn support(&self) -> Option<Support> {
        match self {
            Self::Bump { center, radius } => Some(std::array::from_fn(|a| {
                [center[a] - radius[a], center[a] + radius[a]]
            })),
            Self::RadialW {
                center_z,
                radius_z,
                radius_w,
            } => Some([
                [center_z[0] - radius_z[0], center_z[0] + radius_z[0]],
                [center_z[1] - radius_z[1], center_z[1] + radius_z[1]],
                [-radius_w, *radius_w],
                [-radius_w, *radius_w],
            ]),
            Self::Constant(c) if *c == 0.0 => Some([[0.0; 2]; 4]),
            Self::Constant(_) => None,
            Self::Combo(terms) => {
                let mut acc: Option<Support> = None;
                for (c, f) in terms {
                    if *c == 0.0 {
                        continue;
                    }
                    let s = f.support()?;
                    acc = Some(match acc {
                        None => s,
                        Some(a) => std::array::from_fn(|k| [a[k][0].min(s[k][0]), a[k][1].max(s[k][1])]),
                    });
                }
                Some(acc.unwrap_or([[0.0; 2]; 4]))
            }
        }
    }

    /// `c·φ`.
    pub fn scaled(&self, c: f64) -> Self {
        Self::Combo(vec![(c, self.clone())])
    }

    /// Whether the support lies in the product of `]−1,1[²` and the open
    /// unit disc in `w`.
    pub fn inside_local_domain(&self) -> bool {
        let Some(s) = self.support() else {
            return false;
        };
        let w_corner = s[2][0].abs().max(s[2][1].abs()).hypot(s[3][0].abs().max(s[3][1].abs()));
        let w_ok = match self {
            Self::RadialW { radius_w, .. } => *radius_w < 1.0,
            _ => w_corner < 1.0,
        };
        s[0][0] > -1.0 && s[0][1] < 1.0 && s[1][0] > -1.0 && s[1][1] < 1.0 && w_ok
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fd_laplacians(f: &TestFn, x: [f64; 4]) -> (f64, f64) {
        let h = 1e-4;
        let at = |d: [f64; 4]| {
            f.value(C64::new(x[0] + d[0], x[1] + d[1]), C64::new(x[2] + d[2], x[3] + d[3]))
        };
        let c = at([0.0; 4]);
        let mut lap = [0.0; 4];
        for (a, l) in lap.iter_mut().enumerate() {
            let mut e = [0.0; 4];
            e[a] = h;
            let p = at(e);
            e[a] = -h;
            let m = at(e);
            *l = (p - 2.0 * c + m) / (h * h);
        }
        (0.25 * (lap[0] + lap[1]), 0.25 * (lap[2] + lap[3]))
    }

    proptest! {
        #[test]
        fn derivatives_match_finite_differences(
            x in prop::array::uniform4(-0.9f64..0.9),
            cx in prop::array::uniform4(-0.3f64..0.3),
            r in 0.3f64..0.7,
        ) {
            for f in [
                TestFn::Bump { center: cx, radius: [r, 0.8 * r, 0.9 * r, 1.1 * r] },
                TestFn::RadialW { center_z: [cx[0], cx[1]], radius_z: [r, r], radius_w: 0.8 },
            ] {
                let (_, zz, ww) = f.eval_all(C64::new(x[0], x[1]), C64::new(x[2], x[3]));
                let (fzz, fww) = fd_laplacians(&f, x);
                prop_assert!((zz - fzz).abs() < 1e-6 * (1.0 + zz.abs() * 1e3), "{zz} vs {fzz}");
                prop_assert!((ww - fww).abs() < 1e-6 * (1.0 + ww.abs() * 1e3), "{ww} vs {fww}");
            }
        }
    }

    #[test]
    fn vanishes_outside_support() {
        let f = TestFn::bump([0.1, 0.0, 0.0, 0.2], 0.3);
        assert_eq!(f.eval_all(C64::new(0.41, 0.0), C64::new(0.0, 0.2)), (0.0, 0.0, 0.0));
        assert!(f.value(C64::new(0.1, 0.0), C64::new(0.0, 0.2)) == 1.0);
    }

    #[test]
    fn combo_is_linear() {
        let a = TestFn::bump([0.0; 4], 0.5);
        let b = TestFn::bump([0.1, -0.1, 0.2, 0.0], 0.4);
        let c = TestFn::Combo(vec![(2.0, a.clone()), (-0.5, b.clone())]);
        let (z, w) = (C64::new(0.05, 0.1), C64::new(0.15, -0.05));
        let (va, za, wa) = a.eval_all(z, w);
        let (vb, zb, wb) = b.eval_all(z, w);
        let (vc, zc, wc) = c.eval_all(z, w);
        assert!((vc - (2.0 * va - 0.5 * vb)).abs() < 1e-15);
        assert!((zc - (2.0 * za - 0.5 * zb)).abs() < 1e-12);
        assert!((wc - (2.0 * wa - 0.5 * wb)).abs() < 1e-12);
        assert_eq!(c.support().unwrap()[0], [-0.5, 0.5]);
    }

    #[test]
    fn local_domain_membership() {
        assert!(TestFn::bump([0.0; 4], 0.5).inside_local_domain());
        assert!(!TestFn::bump([0.0, 0.0, 0.5, 0.5], 0.4).inside_local_domain());
        assert!(!TestFn::Constant(1.0).inside_local_domain());
    }
}
