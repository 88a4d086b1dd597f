//! The local model `G₀(z, w) = Re z + |w|²` on `D = ]−1,1[² × 𝔻`.
//!
//! `Ω = {G₀ > 0} ∩ D`, `M₀ = {G₀ = 0} ∩ D`, parametrized by
//! `Φ(u, v, θ) = (u + iv, √(−u)·e^{iθ})` on `]−1,0] × ]−1,1[ × ]0,2π[`, and
//! `Leb_{M₀}` is the pushforward of parameter Lebesgue measure under `Φ`.
//! With `T₀ = dd^c max{G₀, 0}` the pairings checked here are
//!
//! ```text
//! ⟨T₁₁, φ⟩ = ∫_Ω G₀ φ_zz̄ = ⅛ ∫ φ dLeb_{M₀}
//! ⟨T₂₂, φ⟩ = ∫_Ω G₀ φ_ww̄ = ∫_Ω φ + ∫ (|w|²/2) φ dLeb_{M₀}
//! μ₀ = ⅛ Leb_{M₀} = T₀ ∧ dd^c|w|²,   ψ₀ = 1/(1 + 4|w|²)
//! ```
//!
//! and, on the slice `z = u + iv`,
//!
//! ```text
//! ∫ G₀ φ_ww̄ dLeb(w) = ∫_𝔻 φ                              (u ≥ 0)
//!                   = ∫_{√−u<|w|<1} φ − (u/2) ∫ φ(z, √−u e^{iθ}) dθ   (u < 0)
//! ```

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measures::TestFn;
use crate::numeric::par_sum;
use crate::C64;

pub const DEFAULT_RES_4D: usize = 48;
pub const DEFAULT_RES_3D: usize = 96;
/// Relative slack added to every verdict.
pub const REL_TOL: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LocalModelError {
    #[error("point ({z}, {w}) outside the local domain")]
    OutOfDomain { z: C64, w: C64 },
    #[error("test function support is not inside the local domain")]
    SupportViolation,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// `Re z + |w|²` on `D`.
pub fn g0_eval(z: C64, w: C64) -> Result<f64, LocalModelError> {
    if !in_domain(z, w) {
        return Err(LocalModelError::OutOfDomain { z, w });
    }
    Ok(g0(z, w))
}

#[inline]
pub fn g0(z: C64, w: C64) -> f64 {
    z.re + w.norm_sqr()
}

pub fn in_domain(z: C64, w: C64) -> bool {
    z.re.abs() < 1.0 && z.im.abs() < 1.0 && w.norm_sqr() < 1.0
}

pub fn in_omega(z: C64, w: C64) -> bool {
    in_domain(z, w) && g0(z, w) > 0.0
}

/// `Φ(u, v, θ)`.
pub fn phi_param(u: f64, v: f64, theta: f64) -> (C64, C64) {
    (C64::new(u, v), C64::from_polar((-u).max(0.0).sqrt(), theta))
}

/// Radon–Nikodym density `1/(1 + 4|w|²)` of `μ₀` against `T₀ ∧ ω₀` on `M₀`.
pub fn psi0(w: C64) -> f64 {
    1.0 / (1.0 + 4.0 * w.norm_sqr())
}

/// Quadrature value with a Richardson error estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quad {
    pub value: f64,
    pub error: f64,
}

impl std::ops::Add for Quad {
    type Output = Quad;
    fn add(self, o: Quad) -> Quad {
        Quad {
            value: self.value + o.value,
            error: self.error + o.error,
        }
    }
}

impl std::ops::Mul<Quad> for f64 {
    type Output = Quad;
    fn mul(self, q: Quad) -> Quad {
        Quad {
            value: self * q.value,
            error: self.abs() * q.error,
        }
    }
}

/// `(res, res/2)` midpoint pair with the second-order Richardson estimate.
fn richardson<F: Fn(usize) -> f64>(res: usize, rule: F) -> Quad {
    let fine = rule(res);
    let coarse = rule((res / 2).max(1));
    Quad {
        value: fine,
        error: (fine - coarse).abs() / 3.0,
    }
}

fn mid(lo: f64, hi: f64, n: usize, i: usize) -> f64 {
    lo + (hi - lo) * (i as f64 + 0.5) / n as f64
}

/// Part of `D` carrying an integrand: `Re z ∈ u`, `Im z ∈ v`,
/// `|w| ∈ r`. Quadratures only sample this region.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub u: [f64; 2],
    pub v: [f64; 2],
    pub r: [f64; 2],
}

impl Region {
    pub const FULL: Region = Region {
        u: [-1.0, 1.0],
        v: [-1.0, 1.0],
        r: [0.0, 1.0],
    };

    /// Region covering the support of `phi`, clipped to `D`.
    pub fn of(phi: &TestFn) -> Self {
        let Some(s) = phi.support() else {
            return Self::FULL;
        };
        let clip = |[lo, hi]: [f64; 2]| [lo.max(-1.0), hi.min(1.0)];
        let near = |[lo, hi]: [f64; 2]| if lo <= 0.0 && hi >= 0.0 { 0.0 } else { lo.abs().min(hi.abs()) };
        let far = |[lo, hi]: [f64; 2]| lo.abs().max(hi.abs());
        let r = match phi {
            TestFn::RadialW { radius_w, .. } => [0.0, radius_w.min(1.0)],
            _ => [near(s[2]).hypot(near(s[3])).min(1.0), far(s[2]).hypot(far(s[3])).min(1.0)],
        };
        Self {
            u: clip(s[0]),
            v: clip(s[1]),
            r,
        }
    }
}

/// Midpoint rule over `Ω ∩ region` in coordinates fitted to `Ω`:
/// `w = r e^{iα}`, `Re z = a(r) + s(b − a(r))` with `a(r) = max(−r², u₀)`,
/// `Im z = v`, Jacobian `r(b − a(r))`. The integrand is never evaluated on
/// `M₀`.
fn omega_rule<F: Fn(C64, C64) -> f64 + Sync>(integrand: &F, reg: &Region, n: usize) -> f64 {
    let [r0, r1] = reg.r;
    let [v0, v1] = reg.v;
    let h = ((r1 - r0) / n as f64) * (TAU / n as f64) * (1.0 / n as f64) * ((v1 - v0) / n as f64);
    let n3 = n * n * n;
    h * par_sum(n * n3, |k| {
        let (ir, rest) = (k / n3, k % n3);
        let (ia, rest) = (rest / (n * n), rest % (n * n));
        let (is, iv) = (rest / n, rest % n);
        let r = mid(r0, r1, n, ir);
        let lo = (-r * r).max(reg.u[0]);
        let width = reg.u[1] - lo;
        if width <= 0.0 {
            return 0.0;
        }
        let a = mid(0.0, TAU, n, ia);
        let z = C64::new(lo + mid(0.0, 1.0, n, is) * width, mid(v0, v1, n, iv));
        integrand(z, C64::from_polar(r, a)) * r * width
    })
}

/// `∫_Ω integrand dLeb` by 4D tensor-midpoint quadrature with `res` nodes
/// per axis.
pub fn quad_omega<F: Fn(C64, C64) -> f64 + Sync>(integrand: F, res: usize) -> Quad {
    quad_omega_in(integrand, &Region::FULL, res)
}

/// [`quad_omega`] for an integrand vanishing outside `region`.
pub fn quad_omega_in<F: Fn(C64, C64) -> f64 + Sync>(integrand: F, region: &Region, res: usize) -> Quad {
    richardson(res, |n| omega_rule(&integrand, region, n))
}

/// Midpoint rule for `Leb_{M₀}` with `u = −ρ²` (weight `2ρ`), which removes
/// the square-root singularity of `Φ` at `u = 0`.
fn m0_rule<F: Fn(C64, C64) -> f64 + Sync>(integrand: &F, reg: &Region, n: usize) -> f64 {
    // ρ = |w| = √(−u) restricted by both the u- and the r-range.
    let p0 = reg.r[0].max((-reg.u[1]).max(0.0).sqrt());
    let p1 = reg.r[1].min((-reg.u[0]).max(0.0).sqrt());
    if p1 <= p0 {
        return 0.0;
    }
    let [v0, v1] = reg.v;
    let h = ((p1 - p0) / n as f64) * ((v1 - v0) / n as f64) * (TAU / n as f64);
    h * par_sum(n * n * n, |k| {
        let (ir, rest) = (k / (n * n), k % (n * n));
        let (iv, it) = (rest / n, rest % n);
        let rho = mid(p0, p1, n, ir);
        let (z, w) = phi_param(-rho * rho, mid(v0, v1, n, iv), mid(0.0, TAU, n, it));
        integrand(z, w) * 2.0 * rho
    })
}

/// `∫ integrand dLeb_{M₀}`: quadrature over the parameter box of `Φ`.
pub fn quad_m0<F: Fn(C64, C64) -> f64 + Sync>(integrand: F, res: usize) -> Quad {
    quad_m0_in(integrand, &Region::FULL, res)
}

/// [`quad_m0`] for an integrand vanishing outside `region`.
pub fn quad_m0_in<F: Fn(C64, C64) -> f64 + Sync>(integrand: F, region: &Region, res: usize) -> Quad {
    richardson(res, |n| m0_rule(&integrand, region, n))
}

/// Outcome of comparing two quadratures of the same quantity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub lhs: f64,
    pub rhs: f64,
    pub lhs_error: f64,
    pub rhs_error: f64,
    pub pass: bool,
}

impl Verdict {
    /// Pass iff `|lhs − rhs| ≤ lhs_error + rhs_error + REL_TOL·max(|lhs|, |rhs|)`.
    pub fn new(lhs: Quad, rhs: Quad) -> Self {
        let slack = lhs.error + rhs.error + REL_TOL * lhs.value.abs().max(rhs.value.abs());
        Self {
            lhs: lhs.value,
            rhs: rhs.value,
            lhs_error: lhs.error,
            rhs_error: rhs.error,
            pass: (lhs.value - rhs.value).abs() <= slack,
        }
    }

    pub fn discrepancy(&self) -> f64 {
        (self.lhs - self.rhs).abs()
    }
}

fn require_support(phi: &TestFn) -> Result<(), LocalModelError> {
    if phi.inside_local_domain() {
        Ok(())
    } else {
        Err(LocalModelError::SupportViolation)
    }
}

/// Leaves of a linear combination with their accumulated coefficients.
fn terms(phi: &TestFn) -> Vec<(f64, &TestFn)> {
    match phi {
        TestFn::Combo(parts) => parts
            .iter()
            .flat_map(|(c, f)| terms(f).into_iter().map(move |(k, g)| (c * k, g)))
            .filter(|(c, _)| *c != 0.0)
            .collect(),
        other => vec![(1.0, other)],
    }
}

/// `Σ cₖ·quad(φₖ)` over the leaves of `phi`, each integrated over its own
/// support so that no support boundary falls inside a quadrature cell.
fn by_terms<F: Fn(&TestFn, &Region) -> Quad>(phi: &TestFn, quad: F) -> Quad {
    terms(phi)
        .into_iter()
        .map(|(c, f)| c * quad(f, &Region::of(f)))
        .fold(Quad { value: 0.0, error: 0.0 }, |a, b| a + b)
}

/// `∫_Ω G₀ φ_zz̄` against `⅛ ∫ φ dLeb_{M₀}`.
pub fn pair_t11(phi: &TestFn, res: usize) -> Result<Verdict, LocalModelError> {
    require_support(phi)?;
    Ok(Verdict::new(t11_lhs(phi, res), t11_rhs(phi, 2 * res)))
}

fn t11_lhs(phi: &TestFn, res: usize) -> Quad {
    by_terms(phi, |f, reg| quad_omega_in(|z, w| g0(z, w) * f.d_zzbar(z, w), reg, res))
}

fn t11_rhs(phi: &TestFn, res: usize) -> Quad {
    0.125 * by_terms(phi, |f, reg| quad_m0_in(|z, w| f.value(z, w), reg, res))
}

/// `∫_Ω G₀ φ_ww̄` against `∫_Ω φ + ∫ (|w|²/2) φ dLeb_{M₀}`.
pub fn pair_t22(phi: &TestFn, res: usize) -> Result<Verdict, LocalModelError> {
    require_support(phi)?;
    let lhs = by_terms(phi, |f, reg| quad_omega_in(|z, w| g0(z, w) * f.d_wwbar(z, w), reg, res));
    let rhs = by_terms(phi, |f, reg| {
        quad_omega_in(|z, w| f.value(z, w), reg, res)
            + quad_m0_in(|z, w| 0.5 * w.norm_sqr() * f.value(z, w), reg, 2 * res)
    });
    Ok(Verdict::new(lhs, rhs))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mu0Check {
    /// `⅛ ∫ φ dLeb_{M₀}` against `⟨T₀ ∧ dd^c|w|², φ⟩ = ∫_Ω G₀ φ_zz̄`.
    pub measure: Verdict,
    /// `∫ ψ₀ (⅛ + |w|²/2) φ dLeb_{M₀}` against `⅛ ∫ φ dLeb_{M₀}`.
    pub psi: Verdict,
    pub pass: bool,
}

pub fn pair_mu0(phi: &TestFn, res: usize) -> Result<Mu0Check, LocalModelError> {
    require_support(phi)?;
    let mu_lhs = t11_rhs(phi, 2 * res);
    let mu_rhs = t11_lhs(phi, res);
    let measure = Verdict::new(mu_lhs, mu_rhs);
    let psi_lhs = by_terms(phi, |f, reg| {
        quad_m0_in(|z, w| psi0(w) * (0.125 + 0.5 * w.norm_sqr()) * f.value(z, w), reg, 2 * res)
    });
    let psi = Verdict::new(psi_lhs, mu_lhs);
    let psi = Verdict {
        pass: psi.discrepancy() <= 1e-12 * psi.lhs.abs().max(psi.rhs.abs()).max(1e-300),
        ..psi
    };
    Ok(Mu0Check {
        measure,
        psi,
        pass: measure.pass && psi.pass,
    })
}

/// `(⅛ + s/2)/(1 + 4s) − ⅛`, identically zero.
pub fn psi_identity_defect(s: f64) -> f64 {
    (0.125 + 0.5 * s) / (1.0 + 4.0 * s) - 0.125
}

/// Polar midpoint rule on the annulus `r₀ < |w| < 1`.
fn annulus_rule<F: Fn(C64) -> f64 + Sync>(integrand: &F, r0: f64, r1: f64, n: usize) -> f64 {
    if r1 <= r0 {
        return 0.0;
    }
    let h = ((r1 - r0) / n as f64) * (TAU / n as f64);
    h * par_sum(n * n, |k| {
        let r = mid(r0, r1, n, k / n);
        let a = mid(0.0, TAU, n, k % n);
        integrand(C64::from_polar(r, a)) * r
    })
}

/// Direct slice integral against the closed form on the slice `z = u + iv`.
pub fn lemma_coupe_check(u: f64, v: f64, phi: &TestFn, res: usize) -> Result<Verdict, LocalModelError> {
    if !(u.abs() < 1.0 && v.abs() < 1.0) {
        return Err(LocalModelError::InvalidParameter(format!("(u, v) = ({u}, {v}) outside ]−1,1[²")));
    }
    let z = C64::new(u, v);
    let r0 = if u < 0.0 { (-u).sqrt() } else { 0.0 };
    let direct = by_terms(phi, |f, reg| {
        richardson(res, |n| annulus_rule(&|w| g0(z, w) * f.d_wwbar(z, w), r0.max(reg.r[0]), reg.r[1], n))
    });
    let mut closed = by_terms(phi, |f, reg| {
        richardson(res, |n| annulus_rule(&|w| f.value(z, w), r0.max(reg.r[0]), reg.r[1], n))
    });
    if u < 0.0 {
        let circle = richardson(4 * res, |n| {
            (TAU / n as f64) * (0..n).map(|k| phi.value(z, C64::from_polar(r0, mid(0.0, TAU, n, k)))).sum::<f64>()
        });
        closed = closed + (-u / 2.0) * circle;
    }
    Ok(Verdict::new(direct, closed))
}

/// Test functions used by the verification suite: bumps of varied centers,
/// widths and `w`-anisotropy, a `w`-radial function and a signed
/// combination, all supported in `D` and meeting `M₀`.
pub fn standard_test_functions() -> Vec<(&'static str, TestFn)> {
    vec![
        (
            "bump-centered",
            TestFn::Bump {
                center: [-0.1, 0.05, 0.1, -0.05],
                radius: [0.6, 0.5, 0.5, 0.55],
            },
        ),
        ("bump-offset", TestFn::bump([-0.2, 0.0, 0.3, 0.2], 0.45)),
        (
            "bump-wide",
            TestFn::Bump {
                center: [0.1, -0.2, -0.1, 0.1],
                radius: [0.7, 0.6, 0.5, 0.5],
            },
        ),
        (
            "radial-w",
            TestFn::RadialW {
                center_z: [-0.15, 0.1],
                radius_z: [0.6, 0.5],
                radius_w: 0.8,
            },
        ),
        (
            "signed-combo",
            TestFn::Combo(vec![
                (1.0, TestFn::bump([-0.3, 0.1, 0.0, 0.4], 0.4)),
                (-0.5, TestFn::bump([0.2, -0.1, -0.1, 0.0], 0.45)),
            ]),
        ),
    ]
}

/// Slices `z = u + iv` for the slice lemma: five with `u ≥ 0` and five with
/// `u < 0`, each meeting the supports of the first three standard test
/// functions.
pub const STANDARD_SLICES: [(f64, f64); 10] = [
    (0.0, 0.0),
    (0.05, -0.05),
    (0.1, -0.2),
    (0.2, 0.1),
    (0.15, 0.3),
    (-0.05, 0.0),
    (-0.1, 0.1),
    (-0.2, -0.1),
    (-0.35, 0.2),
    (-0.5, -0.2),
];

/// Volume of `Ω`: `∫_𝔻 2(1 + |w|²) dLeb(w) = 3π`.
pub const OMEGA_VOLUME: f64 = 3.0 * PI;
