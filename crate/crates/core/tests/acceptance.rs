//! Acceptance suite: one line per criterion, in order, on the default
//! problem (a+ = 1, a- = 0, l+ = sqrt 2, l- = 0) and the default mesh
//! (q = 0.5, 12 rings, 64 angular segments) with its refinement.
//!
//! Solves are shared between criteria. The process exits non-zero when any
//! criterion fails; every criterion is still evaluated and printed.

use std::f64::consts::PI;
use std::time::Instant;

use bernoulli_core::blowup::{curve_segments, fb_hausdorff, ray_segment};
use bernoulli_core::closed_form::{cone_contains, eval_global, jump_defect, Cone};
use bernoulli_core::config::{ArcDatum, Config, DatumName, Scenario};
use bernoulli_core::experiments::{refined, run_instability_e, Lab};
use bernoulli_core::freeboundary::{
    angle_profile, extract_field, gradbound_report, growth_report, nondegeneracy_report, FreeBoundaryCurve,
};
use bernoulli_core::functional::triangle_energy;
use bernoulli_core::mesh::MeshParams;
use bernoulli_core::minimize::{combine_max, combine_min, Init, SolveReport};
use bernoulli_core::weiss::{corrected_weiss_profile, subtract_g, weiss_energy, weiss_profile, weiss_tolerance};
use bernoulli_core::{derive_params, GlobalSolution, ProblemSpec, ScalarField, Variant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ORIGIN: [f64; 2] = [0.0, 0.0];
const WEISS_RADII: [f64; 5] = [1.0, 0.5, 0.25, 0.125, 0.0625];
const ANGLE_RADII: [f64; 3] = [0.25, 0.125, 0.0625];
const NONDEG_RADII: [f64; 2] = [0.1, 0.05];

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

/// Minimizer for the trace of a homogeneous solution on one mesh.
struct TraceSolve {
    variant: Variant,
    h: f64,
    report: SolveReport,
    curve: FreeBoundaryCurve,
}

/// Solves shared by several criteria.
struct Shared {
    base: Scenario,
    /// Traces of `v_S` and `v_L` without `g`, at `h` then `h/2`.
    traces: Vec<TraceSolve>,
    /// Trace of `v_S` plus `0.2 |x|^1.5`, at `h` then `h/2`.
    angle: Vec<(f64, SolveReport)>,
}

fn scenario(overrides: &[&str]) -> Scenario {
    let overrides: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    Config::from_toml_with("", &overrides).unwrap().scenario().unwrap()
}

fn meshes(base: &MeshParams) -> [MeshParams; 2] {
    [*base, refined(base)]
}

fn random_spec(rng: &mut ChaCha8Rng) -> ProblemSpec {
    let ap = rng.random_range(0.2..2.0);
    let am = ap * rng.random_range(0.0..0.9);
    let gamma: f64 = rng.random_range(0.05..3.0);
    let lm = rng.random_range(0.0..1.0);
    let big_lambda = (ap * ap - am * am) * (1.0 + gamma * gamma);
    derive_params(ap, am, (big_lambda + lm * lm).sqrt(), lm, 0.0, 1.0).unwrap()
}

fn quadrature_gap(lab: &Lab, spec: &ProblemSpec) -> f64 {
    let w = |sol: GlobalSolution| {
        let u = ScalarField::interpolate_global(lab.mesh.clone(), &sol).unwrap();
        weiss_energy(&u, spec, 1.0, ORIGIN).unwrap()
    };
    w(GlobalSolution::small(*spec)) - w(GlobalSolution::large(*spec))
}

fn criterion_1() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_jump = 0.0f64;
    let mut worst_hom = 0.0f64;
    for _ in 0..20 {
        let spec = random_spec(&mut rng);
        worst_jump = worst_jump.max(jump_defect(&spec).unwrap() / spec.big_lambda.max(1.0));
        for sol in [GlobalSolution::small(spec), GlobalSolution::large(spec)] {
            for _ in 0..50 {
                let (r, phi, t) = (rng.random_range(0.01..1.0), rng.random_range(0.0..PI), rng.random_range(0.01..100.0));
                let x = [r * phi.sin(), r * phi.cos()];
                let a = eval_global(&sol, [t * x[0], t * x[1]]).unwrap();
                let b = t * eval_global(&sol, x).unwrap();
                worst_hom = worst_hom.max((a - b).abs() / (1.0 + b.abs()));
            }
        }
    }
    Verdict::new(
        worst_jump <= 1e-12 && worst_hom <= 1e-12,
        format!("20 specs: max jump defect {worst_jump:.2e}, max homogeneity error {worst_hom:.2e} (tol 1e-12)"),
    )
}

fn criterion_2(base: &Scenario) -> Verdict {
    let lab = Lab::new(base.mesh).unwrap();
    let spec = base.spec.without_g();
    let gap = quadrature_gap(&lab, &spec);
    let oracle = spec.gamma.unwrap() * spec.alpha_plus.powi(2);
    let rel = (gap - oracle).abs() / oracle;
    let oracle_ok = rel <= 1e-3;

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let positive = (0..10).filter(|_| quadrature_gap(&lab, &random_spec(&mut rng)) > 0.0).count();

    // Lambda -> a+^2 with a+ = 1: l+ -> 1
    let trend: Vec<f64> = [1.2f64, 1.1, 1.02]
        .iter()
        .map(|&lp| quadrature_gap(&lab, &derive_params(1.0, 0.0, lp, 0.0, 0.0, 1.0).unwrap()).abs())
        .collect();
    let trend_ok = trend.windows(2).all(|w| w[1] < w[0]);
    Verdict::new(
        oracle_ok && positive == 10 && trend_ok,
        format!(
            "gap W(1,v_S)-W(1,v_L) = {gap:.6} vs oracle {oracle} (rel {rel:.3e}, tol 1e-3); positive for {positive}/10 random specs; |gap| along Lambda -> a+^2: {:.4} {:.4} {:.4}",
            trend[0], trend[1], trend[2]
        ),
    )
}

fn criterion_3(shared: &Shared) -> Verdict {
    let spec = shared.base.spec.without_g();
    let mut parts = Vec::new();
    let mut pass = true;
    for variant in [Variant::Small, Variant::Large] {
        let sol = GlobalSolution::new(variant, spec);
        let mut errs = Vec::new();
        for t in shared.traces.iter().filter(|t| t.variant == variant) {
            let exact = ScalarField::interpolate_global(t.report.field.mesh().clone(), &sol).unwrap();
            let err = t.report.field.max_abs_diff(&exact).unwrap();
            let ray = ray_segment(&sol, 1.0).unwrap();
            let haus = fb_hausdorff(&curve_segments(&t.curve), &[ray], [0.0, 1.0]).unwrap_or(f64::INFINITY);
            let tol = 5.0 * t.h;
            pass &= err <= tol && haus <= tol && t.report.converged;
            parts.push(format!("{variant:?} h={:.4}: err {err:.2e} fb {haus:.2e} (tol {tol:.3})", t.h));
            errs.push(err);
        }
        let ratio = errs[0] / errs[1];
        pass &= (1.5..=3.0).contains(&ratio);
        parts.push(format!("{variant:?} error ratio {ratio:.3} (window [1.5, 3])"));
    }
    Verdict::new(pass, parts.join("; "))
}

/// `v_S` plus a bump in the annulus `[1/64, 1/32]` vanishing on the boundary.
fn bumped_small(lab: &Lab, spec: &ProblemSpec) -> ScalarField {
    let sol = GlobalSolution::small(*spec);
    let (a, b) = (1.0 / 64.0, 1.0 / 32.0);
    ScalarField::from_fn(lab.mesh.clone(), |x| {
        let r = x[0].hypot(x[1]);
        let bump = if r > a && r < b { (PI * (r - a) / (b - a)).sin().powi(2) * x[0] / r } else { 0.0 };
        eval_global(&sol, x).unwrap() + 0.3 * bump
    })
    .unwrap()
}

fn criterion_4(shared: &Shared) -> Verdict {
    let spec = shared.base.spec.without_g();
    let mut parts = Vec::new();
    let mut pass = true;
    for t in &shared.traces {
        let mesh = t.report.field.mesh();
        let tol = weiss_tolerance(mesh, &WEISS_RADII);
        let p = weiss_profile(&t.report.field, &spec, ORIGIN, &WEISS_RADII).unwrap();
        pass &= p.monotonicity_defect <= tol;
        parts.push(format!("{:?} h={:.4}: defect {:.2e} (tol {tol:.3})", t.variant, t.h, p.monotonicity_defect));
    }

    let lab = Lab::new(shared.base.mesh).unwrap();
    let tol = weiss_tolerance(&lab.mesh, &WEISS_RADII);
    let control = weiss_profile(&bumped_small(&lab, &spec), &spec, ORIGIN, &WEISS_RADII).unwrap();
    let control_ok = control.monotonicity_defect > 10.0 * tol;
    pass &= control_ok;
    parts.push(format!("bumped control defect {:.3} (must exceed {:.3})", control.monotonicity_defect, 10.0 * tol));

    let gspec = ProblemSpec { g_coeff: 0.1, g_exponent: 0.5, ..spec };
    let report = lab.solve(&gspec, DatumName::Small, &shared.base.solve.clone().with_init(Init::SmallSolution)).unwrap();
    let v = subtract_g(&report.field, &gspec).unwrap();
    let corrected = corrected_weiss_profile(&v, &gspec, &WEISS_RADII, None).unwrap();
    pass &= corrected.monotonicity_defect <= tol && report.converged;
    parts.push(format!("corrected profile with g=0.1|x|^1.5: defect {:.2e} (tol {tol:.3})", corrected.monotonicity_defect));
    Verdict::new(pass, parts.join("; "))
}

fn criterion_5(shared: &Shared) -> Verdict {
    let spec = ProblemSpec { g_coeff: 0.2, g_exponent: 0.5, ..shared.base.spec };
    let gamma = spec.gamma.unwrap();
    let theta = spec.theta.unwrap();
    let mut parts = Vec::new();
    let mut verdict = None;
    for (k, (h, report)) in shared.angle.iter().enumerate() {
        let curve = extract_field(&report.field);
        let profile = angle_profile(&curve, &spec, &ANGLE_RADII).unwrap();
        let sig = profile.sigmas();
        let strict = sig.windows(2).all(|w| w[1] < w[0]);
        let fine = profile.annuli.last().unwrap();
        let dev = (fine.phi_mean - theta).abs().to_degrees();
        let sigma = profile.annuli[0].slope_sigma;
        let outside = match Cone::sigma_plus(gamma, sigma) {
            Ok(cone) => curve
                .points()
                .filter(|p| !p.contact && p.r >= fine.r && p.r <= 2.0 * fine.r && p.x[1] > 0.0)
                .filter(|p| !cone_contains(&cone, p.x))
                .count(),
            Err(_) => usize::MAX,
        };
        let ok = strict && dev <= 6.0 && outside == 0 && report.converged;
        parts.push(format!(
            "h={h:.4}: sigma {:.3} {:.3} {:.3}, finest mean angle {:.2} deg ({dev:.2} deg off, tol 6), {outside} points outside the cone",
            sig[0],
            sig[1],
            sig[2],
            fine.phi_mean.to_degrees()
        ));
        // judged on the default mesh; the refined mesh is reported alongside
        if k == 0 {
            verdict = Some(ok);
        }
    }
    Verdict::new(verdict.unwrap_or(false), parts.join("; "))
}

fn criterion_6(shared: &Shared) -> Verdict {
    let levels = shared.base.params.growth_levels;
    let reports: Vec<_> = shared.angle.iter().map(|(_, r)| growth_report(&r.field, levels).unwrap()).collect();
    let ratio = reports[0].c_fit / reports[1].c_fit;
    let pass = reports.iter().all(|g| g.recursion_ok) && (0.5..=2.0).contains(&ratio);
    Verdict::new(
        pass,
        format!(
            "recursion ok {} / {}; c_fit {:.4} at h, {:.4} at h/2 (ratio {ratio:.3}, window [0.5, 2])",
            reports[0].recursion_ok, reports[1].recursion_ok, reports[0].c_fit, reports[1].c_fit
        ),
    )
}

fn criterion_7(base: &Scenario) -> Verdict {
    let spec = base.spec.without_g();
    let mut defects = Vec::new();
    let mut exact_off_change = true;
    let mut parts = Vec::new();
    for params in meshes(&base.mesh) {
        let lab = Lab::new(params).unwrap();
        let h = lab.mesh.h();
        let vs = ScalarField::interpolate_global(lab.mesh.clone(), &GlobalSolution::small(spec)).unwrap();
        let vl = ScalarField::interpolate_global(lab.mesh.clone(), &GlobalSolution::large(spec)).unwrap();
        let hi = combine_max(&vs, &vl, &spec).unwrap();
        let lo = combine_min(&vs, &vl, &spec).unwrap();
        for t in 0..lab.mesh.triangle_count() {
            if hi.order_change_triangles.binary_search(&t).is_ok() {
                continue;
            }
            let lhs = triangle_energy(&lab.mesh, hi.field.values(), t, spec.big_lambda)
                + triangle_energy(&lab.mesh, lo.field.values(), t, spec.big_lambda);
            let rhs = triangle_energy(&lab.mesh, vs.values(), t, spec.big_lambda)
                + triangle_energy(&lab.mesh, vl.values(), t, spec.big_lambda);
            exact_off_change &= (lhs - rhs).abs() <= 1e-14 * rhs.abs().max(1.0);
        }
        parts.push(format!("h={h:.4}: defect {:.3e}, {} order-change triangles", hi.defect, hi.order_change_triangles.len()));
        defects.push((h, hi.defect));
    }
    // C = Lambda times the length of the two rays in the unit half disc
    let c = 2.0 * spec.big_lambda;
    let bounded = defects.iter().all(|&(h, d)| d <= c * h);
    // halving within 30%: d(h/2) in [0.35, 0.65] d(h), up to summation round-off
    let (d0, d1) = (defects[0].1, defects[1].1);
    let roundoff = 64.0 * f64::EPSILON * 10.0;
    let halves = d1 >= 0.35 * d0 - roundoff && d1 <= 0.65 * d0 + roundoff;
    parts.push(format!("bound C*h with C = {c}; halves {halves}; per-triangle identity exact off order changes {exact_off_change}"));
    Verdict::new(bounded && halves && exact_off_change, parts.join("; "))
}

fn criterion_8() -> (Verdict, Vec<(String, f64)>) {
    let s = scenario(&["scenario.instability_arc=large_ray"]);
    assert_eq!(s.params.instability_arc, ArcDatum::LargeRay);
    let result = run_instability_e(&s).unwrap();
    let mut parts = Vec::new();
    let mut pass = true;
    let mut grads = Vec::new();
    for c in &result.checks {
        if c.name.starts_with("grad_exceeds_lambda") {
            grads.push((c.name.clone(), c.value));
            continue;
        }
        if c.gating {
            pass &= c.passed;
        }
        parts.push(format!("{} {} ({:.4})", c.name, if c.passed { "ok" } else { "FAILED" }, c.value));
    }
    pass &= result.solves.iter().all(|s| s.converged);
    (Verdict::new(pass, parts.join("; ")), grads)
}

fn criterion_9(shared: &Shared) -> Verdict {
    let alpha = shared.base.spec.alpha_plus;
    let mut parts = Vec::new();
    let mut pass = true;
    for variant in [Variant::Small, Variant::Large] {
        let c: Vec<f64> = shared
            .traces
            .iter()
            .filter(|t| t.variant == variant)
            .map(|t| nondegeneracy_report(&t.report.field, &t.curve, &NONDEG_RADII).unwrap().c_emp)
            .collect();
        let stable = c[1] / c[0];
        pass &= c.iter().all(|&x| x >= 0.2 * alpha) && (0.5..=1.5).contains(&stable);
        parts.push(format!("{variant:?}: c_emp {:.3} at h, {:.3} at h/2 (min {:.2}, ratio {stable:.3})", c[0], c[1], 0.2 * alpha));
    }
    Verdict::new(pass, parts.join("; "))
}

fn criterion_10(shared: &Shared, instability: &[(String, f64)]) -> Verdict {
    let spec = shared.base.spec.without_g();
    let mut parts = Vec::new();
    let mut pass = true;
    for t in &shared.traces {
        let g = gradbound_report(&t.report.field, &spec);
        pass &= g.max_grad2 <= 1.1 * spec.big_lambda;
        parts.push(format!("{:?} h={:.4}: max |grad u|^2 {:.4}", t.variant, t.h, g.max_grad2));
    }
    parts.push(format!("bound 1.1 Lambda = {:.2}", 1.1 * spec.big_lambda));
    // recorded only: the instability minimizers are expected to exceed Lambda
    for (name, g2) in instability {
        let eps = name.rsplit('=').next().unwrap_or("");
        parts.push(format!("instability eps={eps}: max {g2:.4}, exceeds Lambda {}", *g2 > spec.big_lambda));
    }
    Verdict::new(pass, parts.join("; "))
}

fn main() {
    let start = Instant::now();
    let base = scenario(&[]);
    let spec = base.spec.without_g();

    let mut traces = Vec::new();
    for params in meshes(&base.mesh) {
        let lab = Lab::new(params).unwrap();
        for (variant, datum, init) in [
            (Variant::Small, DatumName::Small, Init::SmallSolution),
            (Variant::Large, DatumName::Large, Init::LargeSolution),
        ] {
            let report = lab.solve(&spec, datum, &base.solve.clone().with_init(init)).unwrap();
            let curve = extract_field(&report.field);
            traces.push(TraceSolve { variant, h: lab.mesh.h(), report, curve });
        }
    }
    let gspec = ProblemSpec { g_coeff: 0.2, g_exponent: 0.5, ..spec };
    let angle = meshes(&base.mesh)
        .into_iter()
        .map(|params| {
            let lab = Lab::new(params).unwrap();
            (lab.mesh.h(), lab.solve(&gspec, DatumName::Small, &base.solve).unwrap())
        })
        .collect();
    let shared = Shared { base, traces, angle };

    let (c8, grads) = criterion_8();
    let verdicts = [
        ("closed-form identities", criterion_1()),
        ("Weiss ordering", criterion_2(&shared.base)),
        ("consistency", criterion_3(&shared)),
        ("Weiss monotonicity", criterion_4(&shared)),
        ("touch angle", criterion_5(&shared)),
        ("linear growth", criterion_6(&shared)),
        ("min/max identity", criterion_7(&shared.base)),
        ("instability", c8),
        ("nondegeneracy", criterion_9(&shared)),
        ("gradient bound", criterion_10(&shared, &grads)),
    ];
    let mut failed = 0;
    for (k, (name, v)) in verdicts.iter().enumerate() {
        println!("criterion {:>2} {:<24} {}  {}", k + 1, name, if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed += usize::from(!v.pass);
    }
    println!("acceptance: {} passed, {failed} failed in {:.0} s", verdicts.len() - failed, start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
