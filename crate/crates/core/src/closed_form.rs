//! Exact homogeneous global solutions and their derived constants.
//!
//! In the plane the only degree-one homogeneous global solutions are
//!
//! ```text
//! v_S = a+ (x2 - gamma x1)^+ - a- (x2 - gamma x1)^-
//! v_L = a+ (x2 + gamma x1)^+ - a- (x2 + gamma x1)^-
//! gamma = sqrt(Lambda / (a+^2 - a-^2) - 1)
//! ```
//!
//! Everything here is closed-form arithmetic; the other modules use it as
//! their oracle layer.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Point;

/// Relative window inside which `Lambda` and `a+^2 - a-^2` count as equal.
const TANGENTIAL_RTOL: f64 = 1e-12;

/// Problem constants together with the derived `Lambda`, `gamma`, `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub alpha_plus: f64,
    pub alpha_minus: f64,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    /// `C` in `g(x) = C |x|^{1+kappa}`.
    pub g_coeff: f64,
    /// `kappa` in `g(x) = C |x|^{1+kappa}`.
    pub g_exponent: f64,
    /// `lambda_plus^2 - lambda_minus^2`.
    pub big_lambda: f64,
    /// Slope of the free-boundary rays; `None` when no free boundary forms.
    pub gamma: Option<f64>,
    /// Touch angle with the fixed boundary, `cot(theta) = gamma`, in `(0, pi/2]`.
    pub theta: Option<f64>,
    /// `Lambda <= a+^2 - a-^2`: the homogeneous solutions carry no free boundary.
    pub no_free_boundary: bool,
    /// `gamma == 0`: both rays lie along the fixed boundary direction.
    pub degenerate_tangential: bool,
}

/// Builds a [`ProblemSpec`], deriving `Lambda`, `gamma` and `theta`.
pub fn derive_params(
    alpha_plus: f64,
    alpha_minus: f64,
    lambda_plus: f64,
    lambda_minus: f64,
    g_coeff: f64,
    g_exponent: f64,
) -> Result<ProblemSpec> {
    let finite = [alpha_plus, alpha_minus, lambda_plus, lambda_minus, g_coeff, g_exponent]
        .iter()
        .all(|v| v.is_finite());
    if !finite {
        return Err(Error::InvalidParameter("non-finite problem constant".into()));
    }
    if lambda_minus < 0.0 || lambda_plus <= lambda_minus {
        return Err(Error::NonPositiveLambda { lambda_plus, lambda_minus });
    }
    if alpha_plus < 0.0 || alpha_minus < 0.0 || alpha_plus + alpha_minus <= 0.0 {
        return Err(Error::DegenerateData);
    }
    if alpha_minus > alpha_plus {
        return Err(Error::TwoPhaseOrderError { alpha_plus, alpha_minus });
    }
    if g_coeff < 0.0 || g_exponent <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "perturbation needs g_coeff >= 0 and g_exponent > 0, got ({g_coeff}, {g_exponent})"
        )));
    }

    let big_lambda = lambda_plus * lambda_plus - lambda_minus * lambda_minus;
    let jump = alpha_plus * alpha_plus - alpha_minus * alpha_minus;

    let (gamma, theta, no_free_boundary, degenerate_tangential) = if jump <= 0.0 {
        // a+ == a-: the ray would be the x1-axis itself; gamma is infinite.
        (None, None, false, false)
    } else {
        let ratio = big_lambda / jump;
        if (ratio - 1.0).abs() <= TANGENTIAL_RTOL {
            (Some(0.0), Some(PI / 2.0), true, true)
        } else if ratio < 1.0 {
            (None, None, true, false)
        } else {
            let gamma = (ratio - 1.0).sqrt();
            // theta = arccot(gamma), kept in (0, pi/2]
            (Some(gamma), Some((1.0f64).atan2(gamma)), false, false)
        }
    };

    Ok(ProblemSpec {
        alpha_plus,
        alpha_minus,
        lambda_plus,
        lambda_minus,
        g_coeff,
        g_exponent,
        big_lambda,
        gamma,
        theta,
        no_free_boundary,
        degenerate_tangential,
    })
}

impl ProblemSpec {
    /// The default laboratory spec: `a+ = 1, a- = 0, Lambda = 2`, so `gamma = 1`.
    pub fn default_one_phase() -> Self {
        derive_params(1.0, 0.0, 2f64.sqrt(), 0.0, 0.0, 1.0).expect("valid default spec")
    }

    pub fn gamma(&self) -> Result<f64> {
        self.gamma.ok_or(Error::GammaAbsent)
    }

    pub fn theta(&self) -> Result<f64> {
        self.theta.ok_or(Error::GammaAbsent)
    }

    pub fn is_one_phase(&self) -> bool {
        self.alpha_minus == 0.0
    }

    /// Perturbation `g(x) = C |x|^{1+kappa}`.
    pub fn g(&self, x: Point) -> f64 {
        if self.g_coeff == 0.0 {
            return 0.0;
        }
        self.g_coeff * (x[0].hypot(x[1])).powf(1.0 + self.g_exponent)
    }

    /// Laplacian of `g` in two dimensions: `C (1+kappa)^2 |x|^{kappa-1}`.
    pub fn laplacian_g(&self, x: Point) -> f64 {
        if self.g_coeff == 0.0 {
            return 0.0;
        }
        let k = self.g_exponent;
        self.g_coeff * (1.0 + k) * (1.0 + k) * (x[0].hypot(x[1])).powf(k - 1.0)
    }

    /// Fixed-boundary datum `a+ x2^+ - a- x2^- + g(x)`.
    pub fn fixed_datum(&self, x: Point) -> f64 {
        two_phase(self.alpha_plus, self.alpha_minus, x[1]) + self.g(x)
    }

    /// Same spec with the perturbation removed.
    pub fn without_g(&self) -> Self {
        let mut s = *self;
        s.g_coeff = 0.0;
        s
    }
}

#[inline]
pub(crate) fn two_phase(alpha_plus: f64, alpha_minus: f64, s: f64) -> f64 {
    if s > 0.0 {
        alpha_plus * s
    } else {
        alpha_minus * s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    Small,
    Large,
}

/// One of the two homogeneous global solutions for a given spec.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalSolution {
    pub variant: Variant,
    pub spec: ProblemSpec,
}

/// Which phase a one-sided gradient query refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseSide {
    Positive,
    Negative,
}

impl GlobalSolution {
    pub fn new(variant: Variant, spec: ProblemSpec) -> Self {
        Self { variant, spec }
    }

    pub fn small(spec: ProblemSpec) -> Self {
        Self::new(Variant::Small, spec)
    }

    pub fn large(spec: ProblemSpec) -> Self {
        Self::new(Variant::Large, spec)
    }

    fn sign(&self) -> f64 {
        match self.variant {
            Variant::Small => -1.0,
            Variant::Large => 1.0,
        }
    }

    /// The linear argument `x2 -/+ gamma x1`.
    fn argument(&self, x: Point) -> Result<f64> {
        let gamma = self.spec.gamma()?;
        Ok(x[1] + self.sign() * gamma * x[0])
    }
}

/// Points within rounding of the ray (relative `1e-13`) evaluate to exactly 0,
/// so interpolants vanish on mesh nodes placed on the ray.
pub fn eval_global(sol: &GlobalSolution, x: Point) -> Result<f64> {
    let s = sol.argument(x)?;
    let s = if s.abs() <= 1e-13 * x[0].hypot(x[1]) { 0.0 } else { s };
    Ok(two_phase(sol.spec.alpha_plus, sol.spec.alpha_minus, s))
}

/// Gradient of the active linear piece; rejects points on the ray (up to
/// rounding in `gamma`).
pub fn grad_global(sol: &GlobalSolution, x: Point) -> Result<[f64; 2]> {
    let s = sol.argument(x)?;
    if s.abs() <= 1e-13 * x[0].hypot(x[1]) {
        return Err(Error::OnFreeBoundary(x[0], x[1]));
    }
    let side = if s > 0.0 { PhaseSide::Positive } else { PhaseSide::Negative };
    grad_global_side(sol, side)
}

/// One-sided gradient, valid also on the free-boundary ray.
pub fn grad_global_side(sol: &GlobalSolution, side: PhaseSide) -> Result<[f64; 2]> {
    let gamma = sol.spec.gamma()?;
    let a = match side {
        PhaseSide::Positive => sol.spec.alpha_plus,
        PhaseSide::Negative => sol.spec.alpha_minus,
    };
    Ok([a * sol.sign() * gamma, a])
}

/// `| |grad v+|^2 - |grad v-|^2 - Lambda |`, zero by construction of gamma.
pub fn jump_defect(spec: &ProblemSpec) -> Result<f64> {
    let gamma = spec.gamma()?;
    let scale = 1.0 + gamma * gamma;
    let plus = spec.alpha_plus * spec.alpha_plus * scale;
    let minus = spec.alpha_minus * spec.alpha_minus * scale;
    Ok((plus - minus - spec.big_lambda).abs())
}

/// Terms of `W(1, v, 0)` for a homogeneous solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeissTerms {
    /// `int_{B_1'} v dv/dnu` with `nu = -e1`.
    pub boundary: f64,
    /// Angular measure of `{v > 0}` in the half-disc, measured from `+x2`.
    pub positive_angle: f64,
    /// `Lambda * |B_1^+ cap {v > 0}|`.
    pub phase: f64,
    pub total: f64,
}

/// Closed-form Weiss energy `W(1, v, 0)` of a homogeneous solution.
///
/// Green's formula reduces the Dirichlet and sphere terms to a boundary
/// integral over the flat part, `int_{-1}^{1} v (-d v/d x1) dx2`, which is
/// `+/- gamma (a+^2 - a-^2) / 2`. The positivity set is the sector between
/// `+x2` and the free-boundary ray: angle `theta` for `v_S`, `pi - theta`
/// for `v_L`.
pub fn weiss_terms(sol: &GlobalSolution) -> Result<WeissTerms> {
    let spec = &sol.spec;
    let gamma = spec.gamma()?;
    let theta = spec.theta()?;
    let ap2 = spec.alpha_plus * spec.alpha_plus;
    let am2 = spec.alpha_minus * spec.alpha_minus;
    // -d v/d x1 = -sign * gamma * a on each half of the flat boundary;
    // int_0^1 x2 dx2 = 1/2 and int_{-1}^0 x2 dx2 = -1/2.
    let boundary = -sol.sign() * gamma * (ap2 - am2) * 0.5;
    let positive_angle = match sol.variant {
        Variant::Small => theta,
        Variant::Large => PI - theta,
    };
    let phase = spec.big_lambda * 0.5 * positive_angle;
    Ok(WeissTerms { boundary, positive_angle, phase, total: boundary + phase })
}

pub fn weiss_closed_form(sol: &GlobalSolution) -> Result<f64> {
    Ok(weiss_terms(sol)?.total)
}

/// `W(1, v_S, 0) - W(1, v_L, 0)`.
pub fn weiss_gap(spec: &ProblemSpec) -> Result<f64> {
    Ok(weiss_closed_form(&GlobalSolution::small(*spec))?
        - weiss_closed_form(&GlobalSolution::large(*spec))?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ConeKind {
    /// `{x1 > delta |x2 - apex2|}`.
    NonTangential { delta: f64 },
    /// Cone around the `v_S` ray in the upper quadrant.
    SigmaPlus { sigma: f64 },
    /// Mirror of `SigmaPlus` in `x2`.
    SigmaMinus { sigma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cone {
    pub kind: ConeKind,
    pub apex: Point,
    /// Ray slope for the sigma cones; unused by the non-tangential cone.
    pub gamma: f64,
}

impl Cone {
    pub fn non_tangential(delta: f64, apex: Point) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::BadConeParam(format!("delta must be positive, got {delta}")));
        }
        Ok(Self { kind: ConeKind::NonTangential { delta }, apex, gamma: 0.0 })
    }

    pub fn sigma_plus(gamma: f64, sigma: f64) -> Result<Self> {
        Self::check_sigma(gamma, sigma)?;
        Ok(Self { kind: ConeKind::SigmaPlus { sigma }, apex: [0.0, 0.0], gamma })
    }

    pub fn sigma_minus(gamma: f64, sigma: f64) -> Result<Self> {
        Self::check_sigma(gamma, sigma)?;
        Ok(Self { kind: ConeKind::SigmaMinus { sigma }, apex: [0.0, 0.0], gamma })
    }

    fn check_sigma(gamma: f64, sigma: f64) -> Result<()> {
        if !(sigma > 0.0) || sigma >= gamma {
            return Err(Error::BadConeParam(format!(
                "need 0 < sigma < gamma, got sigma = {sigma}, gamma = {gamma}"
            )));
        }
        Ok(())
    }
}

/// Strict membership test for a cone.
pub fn cone_contains(cone: &Cone, x: Point) -> bool {
    let y = [x[0] - cone.apex[0], x[1] - cone.apex[1]];
    match cone.kind {
        ConeKind::NonTangential { delta } => y[0] > delta * y[1].abs(),
        ConeKind::SigmaPlus { sigma } => {
            y[0] > 0.0
                && y[1] > 0.0
                && y[1] / (cone.gamma + sigma) < y[0]
                && y[0] < y[1] / (cone.gamma - sigma)
        }
        ConeKind::SigmaMinus { sigma } => {
            y[0] > 0.0
                && y[1] < 0.0
                && -y[1] / (cone.gamma + sigma) < y[0]
                && y[0] < -y[1] / (cone.gamma - sigma)
        }
    }
}

/// Unit direction of the free-boundary ray and its touch angle with `{x1 = 0}`.
pub fn free_boundary_ray(sol: &GlobalSolution) -> Result<(Point, f64)> {
    let gamma = sol.spec.gamma()?;
    let theta = sol.spec.theta()?;
    let norm = (1.0 + gamma * gamma).sqrt();
    let dir = match sol.variant {
        Variant::Small => [1.0 / norm, gamma / norm],
        Variant::Large => [1.0 / norm, -gamma / norm],
    };
    Ok((dir, theta))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(ap: f64, am: f64, lp: f64, lm: f64) -> ProblemSpec {
        derive_params(ap, am, lp, lm, 0.0, 1.0).unwrap()
    }

    #[test]
    fn derive_default_spec() {
        let s = spec(1.0, 0.0, 2f64.sqrt(), 0.0);
        assert!((s.big_lambda - 2.0).abs() < 1e-14);
        assert!((s.gamma.unwrap() - 1.0).abs() < 1e-14);
        assert!((s.theta.unwrap() - PI / 4.0).abs() < 1e-14);
        assert!(!s.no_free_boundary);
    }

    #[test]
    fn derive_no_free_boundary() {
        let s = spec(2.0, 0.0, 2f64.sqrt(), 0.0);
        assert!(s.no_free_boundary);
        assert!(s.gamma.is_none());
        assert_eq!(eval_global(&GlobalSolution::small(s), [0.5, 0.5]), Err(Error::GammaAbsent));
    }

    #[test]
    fn derive_gamma_sqrt3() {
        let s = spec(1.0, 0.0, 5f64.sqrt(), 1.0);
        assert!((s.big_lambda - 4.0).abs() < 1e-14);
        assert!((s.gamma.unwrap() - 3f64.sqrt()).abs() < 1e-14);
        assert!((s.theta.unwrap() - PI / 6.0).abs() < 1e-14);
    }

    #[test]
    fn derive_errors() {
        assert!(matches!(
            derive_params(1.0, 0.0, 1.0, 1.0, 0.0, 1.0),
            Err(Error::NonPositiveLambda { .. })
        ));
        assert_eq!(derive_params(0.0, 0.0, 2.0, 0.0, 0.0, 1.0), Err(Error::DegenerateData));
        assert!(matches!(
            derive_params(0.5, 1.0, 2.0, 0.0, 0.0, 1.0),
            Err(Error::TwoPhaseOrderError { .. })
        ));
    }

    #[test]
    fn tangential_limit_is_flagged() {
        let s = spec(1.0, 0.0, 1.0, 0.0);
        assert_eq!(s.gamma, Some(0.0));
        assert!(s.degenerate_tangential);
        assert!((s.theta.unwrap() - PI / 2.0).abs() < 1e-15);
        assert!(weiss_gap(&s).unwrap().abs() < 1e-14);
    }

    #[test]
    fn eval_examples() {
        let s = ProblemSpec::default_one_phase();
        let small = GlobalSolution::small(s);
        let large = GlobalSolution::large(s);
        assert!(eval_global(&small, [1.0, 1.0]).unwrap().abs() < 1e-14);
        assert!((eval_global(&small, [0.0, 1.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((eval_global(&large, [1.0, 1.0]).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn grad_examples() {
        let s = ProblemSpec::default_one_phase();
        let small = GlobalSolution::small(s);
        let g = grad_global(&small, [0.1, 1.0]).unwrap();
        assert!((g[0] + 1.0).abs() < 1e-14 && (g[1] - 1.0).abs() < 1e-15);
        assert_eq!(grad_global(&small, [1.0, 0.1]).unwrap(), [0.0, 0.0]);
        let n2 = g[0] * g[0] + g[1] * g[1];
        assert!((n2 - s.big_lambda).abs() < 1e-13);
        assert!(matches!(grad_global(&small, [0.5, 0.5]), Err(Error::OnFreeBoundary(..))));
    }

    #[test]
    fn jump_defect_vanishes() {
        for (ap, am, lp, lm) in [(1.0, 0.0, 2f64.sqrt(), 0.0), (1.0, 0.5, 2f64.sqrt(), 0.0), (1.0, 0.0, 5f64.sqrt(), 1.0)] {
            assert!(jump_defect(&spec(ap, am, lp, lm)).unwrap() < 1e-14);
        }
    }

    #[test]
    fn weiss_default_values() {
        let s = ProblemSpec::default_one_phase();
        let ws = weiss_closed_form(&GlobalSolution::small(s)).unwrap();
        let wl = weiss_closed_form(&GlobalSolution::large(s)).unwrap();
        assert!((ws - (0.5 + PI / 4.0)).abs() < 1e-13);
        assert!((wl - (3.0 * PI / 4.0 - 0.5)).abs() < 1e-13);
        assert!((weiss_gap(&s).unwrap() - (1.0 - PI / 2.0)).abs() < 1e-13);
    }

    #[test]
    fn weiss_gap_matches_sine_formula() {
        for (ap, am, lp) in [(1.0, 0.0, 2.0), (1.0, 0.5, 1.6), (0.7, 0.2, 3.0)] {
            let s = spec(ap, am, lp, 0.0);
            let th = s.theta.unwrap();
            let expected = 0.5 * s.big_lambda * ((2.0 * th).sin() + 2.0 * th - PI);
            assert!((weiss_gap(&s).unwrap() - expected).abs() < 1e-12);
            assert!(weiss_gap(&s).unwrap() < 0.0);
        }
    }

    #[test]
    fn cone_examples() {
        let c = Cone::sigma_plus(1.0, 0.1).unwrap();
        assert!(cone_contains(&c, [1.0, 1.05]));
        assert!(!cone_contains(&c, [1.0, 2.0]));
        let nt = Cone::non_tangential(0.5, [0.0, 0.0]).unwrap();
        for t in [1e-6, 0.3, 1.0, 7.0] {
            assert!(cone_contains(&nt, [t, t]));
        }
        assert!(matches!(Cone::sigma_plus(1.0, 1.0), Err(Error::BadConeParam(_))));
        let m = Cone::sigma_minus(1.0, 0.1).unwrap();
        assert!(cone_contains(&m, [1.0, -1.05]));
    }

    #[test]
    fn ray_examples() {
        let s = ProblemSpec::default_one_phase();
        let (d, a) = free_boundary_ray(&GlobalSolution::small(s)).unwrap();
        let r = 0.5f64.sqrt();
        assert!((d[0] - r).abs() < 1e-15 && (d[1] - r).abs() < 1e-15);
        assert!((a - PI / 4.0).abs() < 1e-15);
        let (d, _) = free_boundary_ray(&GlobalSolution::large(s)).unwrap();
        assert!((d[0] - r).abs() < 1e-15 && (d[1] + r).abs() < 1e-15);
        let s3 = spec(1.0, 0.0, 5f64.sqrt(), 1.0);
        let (_, a) = free_boundary_ray(&GlobalSolution::small(s3)).unwrap();
        assert!((a - PI / 6.0).abs() < 1e-14);
    }
}
