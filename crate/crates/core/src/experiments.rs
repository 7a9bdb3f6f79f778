//! Scenario runners tying the solver and the diagnostics into complete
//! experiments: growth, blow-up classification, touch angle, instability,
//! Weiss ordering and consistency.
//!
//! Every runner returns an [`ExperimentResult`] holding named checks, each
//! with the value it measured and the tolerance it used, plus CSV tables
//! and figures for the command-line front end to write out.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::blowup::{blowup_sequence, curve_segments, fb_hausdorff, ray_segment, Verdict};
use crate::closed_form::{cone_contains, derive_params, weiss_closed_form, Cone, GlobalSolution, ProblemSpec, Variant};
use crate::config::{ArcDatum, Config, DatumName, Scenario, ScenarioName};
use crate::error::{Error, Result};
use crate::freeboundary::{
    angle_profile, extract_field, gradbound_report, growth_report, jump_report, nondegeneracy_report, nt_check,
    FreeBoundaryCurve, NtMode, Side,
};
use crate::io::{field_table, Table};
use crate::mesh::{boundary_trace, build_mesh_with, BoundaryData, HalfDiscMesh, MeshParams, OuterDatum, ScalarField};
use crate::minimize::{smallest_minimizer, Init, SolveConfig, SolveReport, Solver};
use crate::weiss::{corrected_weiss_profile, subtract_g, weiss_energy, weiss_profile, weiss_tolerance, WeissProfile};

/// Version of the JSON report layout.
pub const SCHEMA_VERSION: u32 = 1;

/// Max-norm and free-boundary tolerance in units of the mesh size.
pub const CONSISTENCY_FACTOR: f64 = 5.0;
/// Accepted range of the error ratio between a mesh and its refinement.
pub const RATE_WINDOW: [f64; 2] = [1.5, 3.0];
/// Jump-condition tolerance relative to `Lambda`.
pub const JUMP_RTOL: f64 = 0.25;
/// Gradient bound slack relative to `Lambda`.
pub const GRAD_RTOL: f64 = 0.1;
/// Touch-angle tolerance of the finest annulus, degrees.
pub const ANGLE_TOL_DEG: f64 = 6.0;
/// Relative agreement required of the Weiss gap with its oracle.
pub const GAP_RTOL: f64 = 1e-3;
/// Nondegeneracy constant required relative to `alpha_plus`.
pub const NONDEG_FACTOR: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Fail,
    Inconclusive,
}

/// One measured quantity compared against a stated tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    #[serde(with = "crate::io::json_f64")]
    pub value: f64,
    #[serde(with = "crate::io::json_f64")]
    pub tolerance: f64,
    /// Counts towards the verdict; other checks are recorded only.
    pub gating: bool,
    pub note: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, value: f64, tolerance: f64, note: impl Into<String>) -> Self {
        Self { name: name.into(), passed, value, tolerance, gating: true, note: note.into() }
    }

    fn info(mut self) -> Self {
        self.gating = false;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub label: String,
    #[serde(with = "crate::io::json_f64")]
    pub energy: f64,
    pub converged: bool,
    pub outer_iters: usize,
    pub polish_sweeps: usize,
}

impl SolveSummary {
    fn of(label: impl Into<String>, r: &SolveReport) -> Self {
        Self {
            label: label.into(),
            energy: r.energy.total,
            converged: r.converged,
            outer_iters: r.outer_iters,
            polish_sweeps: r.polish_sweeps_run,
        }
    }
}

/// A picture to render: an optional colour-mapped field, a free-boundary
/// curve, reference rays and cones.
#[derive(Debug, Clone)]
pub struct Figure {
    pub name: String,
    pub field: Option<ScalarField>,
    pub curve: FreeBoundaryCurve,
    pub rays: Vec<(Variant, ProblemSpec)>,
    pub cones: Vec<Cone>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub scenario: ScenarioName,
    pub outcome: Outcome,
    pub checks: Vec<Check>,
    pub solves: Vec<SolveSummary>,
    /// A classification came out undecided.
    pub undecided: bool,
    /// File name to table.
    pub tables: BTreeMap<String, Table>,
    pub figures: Vec<Figure>,
}

impl ExperimentResult {
    fn new(scenario: ScenarioName) -> Self {
        Self {
            scenario,
            outcome: Outcome::Inconclusive,
            checks: Vec::new(),
            solves: Vec::new(),
            undecided: false,
            tables: BTreeMap::new(),
            figures: Vec::new(),
        }
    }

    fn finish(mut self) -> Self {
        let converged = self.solves.iter().all(|s| s.converged);
        let failed = self.checks.iter().any(|c| c.gating && !c.passed);
        self.outcome = if !converged || self.undecided {
            Outcome::Inconclusive
        } else if failed {
            Outcome::Fail
        } else {
            Outcome::Pass
        };
        self
    }

    /// Result of a plain solve: no checks, outcome from convergence only.
    pub fn from_solve(summary: SolveSummary) -> Self {
        let mut r = Self::new(ScenarioName::Consistency);
        r.solves.push(summary);
        r.finish()
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Appends the checks, solves and outputs of another run.
    pub fn merge(mut self, other: ExperimentResult) -> Self {
        self.checks.extend(other.checks);
        self.solves.extend(other.solves);
        self.undecided |= other.undecided;
        self.tables.extend(other.tables);
        self.figures.extend(other.figures);
        self.finish()
    }
}

/// Report written next to the outputs; wall time goes to a separate file
/// so that identical inputs give byte-identical manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    pub config: Config,
    pub versions: BTreeMap<String, String>,
    pub outcome: Outcome,
    pub checks: Vec<Check>,
    pub solves: Vec<SolveSummary>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, config: &Config, result: &ExperimentResult, outputs: Vec<String>) -> Self {
        let mut versions = BTreeMap::new();
        versions.insert("bernoulli-core".to_string(), env!("CARGO_PKG_VERSION").to_string());
        Self {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            config: config.clone(),
            versions,
            outcome: result.outcome,
            checks: result.checks.clone(),
            solves: result.solves.clone(),
            outputs,
        }
    }
}

/// A mesh and its assembled solver.
pub struct Lab {
    pub mesh: Arc<HalfDiscMesh>,
    pub solver: Solver,
}

impl Lab {
    pub fn new(params: MeshParams) -> Result<Self> {
        let mesh = Arc::new(build_mesh_with(params)?);
        let solver = Solver::new(mesh.clone())?;
        Ok(Self { mesh, solver })
    }

    /// Trace of the chosen datum with `g` included; zero data is zero everywhere.
    pub fn boundary(&self, spec: &ProblemSpec, datum: DatumName) -> Result<BoundaryData> {
        match datum {
            DatumName::Small => boundary_trace(&self.mesh, spec, &OuterDatum::SmallTrace),
            DatumName::Large => boundary_trace(&self.mesh, spec, &OuterDatum::LargeTrace),
            DatumName::Zero => Ok(BoundaryData::zeros(&self.mesh)),
        }
    }

    pub fn solve(&self, spec: &ProblemSpec, datum: DatumName, config: &SolveConfig) -> Result<SolveReport> {
        let boundary = self.boundary(spec, datum)?;
        self.solver.solve(spec, &boundary, config)
    }
}

fn datum_init(datum: DatumName) -> Init {
    match datum {
        DatumName::Small => Init::SmallSolution,
        DatumName::Large => Init::LargeSolution,
        DatumName::Zero => Init::Zero,
    }
}

fn variant_of(datum: DatumName) -> Option<Variant> {
    match datum {
        DatumName::Small => Some(Variant::Small),
        DatumName::Large => Some(Variant::Large),
        DatumName::Zero => None,
    }
}

fn label(v: Variant) -> &'static str {
    match v {
        Variant::Small => "small",
        Variant::Large => "large",
    }
}

/// Dispatches on the scenario name.
pub fn run(s: &Scenario) -> Result<ExperimentResult> {
    match s.params.name {
        ScenarioName::GrowthA => run_growth_a(s),
        ScenarioName::ClassifyC => run_classify_c(s),
        ScenarioName::AngleD => run_angle_d(s),
        ScenarioName::InstabilityE => run_instability_e(s),
        ScenarioName::WeissGap => run_weiss_gap(s),
        ScenarioName::Consistency => run_consistency(s),
    }
}

/// Mesh parameters with the angular count doubled, so every length scale halves.
pub fn refined(params: &MeshParams) -> MeshParams {
    MeshParams { angular_n: 2 * params.angular_n, ..*params }
}

/// Solves with the traces of `v_S` and `v_L` on a mesh and its refinement and
/// compares against the exact solutions.
pub fn run_consistency(s: &Scenario) -> Result<ExperimentResult> {
    let spec = s.spec.without_g();
    spec.gamma()?;
    let mut out = ExperimentResult::new(ScenarioName::Consistency);
    let mut table = Table::new(&["variant", "angular_n", "h", "max_error", "fb_hausdorff"]);
    let mut errors: BTreeMap<&str, Vec<(f64, f64)>> = BTreeMap::new();
    for params in [s.mesh, refined(&s.mesh)] {
        let lab = Lab::new(params)?;
        let h = lab.mesh.h();
        for (variant, datum) in [(Variant::Small, DatumName::Small), (Variant::Large, DatumName::Large)] {
            let sol = GlobalSolution::new(variant, spec);
            let report = lab.solve(&spec, datum, &s.solve.clone().with_init(datum_init(datum)))?;
            let exact = ScalarField::interpolate_global(lab.mesh.clone(), &sol)?;
            let err = report.field.max_abs_diff(&exact)?;
            let curve = extract_field(&report.field);
            let ray = ray_segment(&sol, lab.mesh.outer_radius())?;
            let haus = fb_hausdorff(&curve_segments(&curve), &[ray], [0.0, lab.mesh.outer_radius()])
                .unwrap_or(f64::INFINITY);
            let tag = format!("{}/n{}", label(variant), params.angular_n);
            let tol = CONSISTENCY_FACTOR * h;
            out.solves.push(SolveSummary::of(&tag, &report));
            out.checks.push(Check::new(format!("max_error/{tag}"), err <= tol, err, tol, "max-norm distance to the exact solution"));
            out.checks.push(Check::new(format!("fb_hausdorff/{tag}"), haus <= tol, haus, tol, "free boundary vs exact ray"));
            table.push(vec![if variant == Variant::Small { 0.0 } else { 1.0 }, params.angular_n as f64, h, err, haus]);
            errors.entry(label(variant)).or_default().push((err, haus));
            if params == s.mesh {
                out.figures.push(Figure {
                    name: format!("fb_{}", label(variant)),
                    field: Some(report.field.clone()),
                    curve,
                    rays: vec![(variant, spec)],
                    cones: Vec::new(),
                });
            }
        }
    }
    for (name, e) in &errors {
        let ratio = e[0].0 / e[1].0;
        let ok = (RATE_WINDOW[0]..=RATE_WINDOW[1]).contains(&ratio);
        out.checks.push(Check::new(format!("error_ratio/{name}"), ok, ratio, RATE_WINDOW[0], "accepted window [1.5, 3]"));
        let hr = e[0].1 / e[1].1;
        out.checks.push(Check::new(format!("fb_ratio/{name}"), hr.is_finite(), hr, RATE_WINDOW[0], "recorded").info());
    }
    out.tables.insert("consistency.csv".into(), table);
    Ok(out.finish())
}

/// Linear growth at the contact point, with the non-tangentiality of the
/// data checked alongside.
pub fn run_growth_a(s: &Scenario) -> Result<ExperimentResult> {
    let spec = s.spec;
    let p = &s.params;
    let lab = Lab::new(s.mesh)?;
    let report = lab.solve(&spec, p.datum, &s.solve)?;
    let field = &report.field;
    let mut out = ExperimentResult::new(ScenarioName::GrowthA);
    out.solves.push(SolveSummary::of("growth", &report));

    let growth = growth_report(field, p.growth_levels)?;
    let mut table = Table::new(&["level", "radius", "sup_abs"]);
    for (j, s_val) in growth.s_values.iter().enumerate() {
        table.push(vec![j as f64, 0.5f64.powi(j as i32), *s_val]);
    }
    out.tables.insert("growth.csv".into(), table);
    let curve = extract_field(field);
    match p.datum {
        DatumName::Zero => {
            let max = growth.s_values.iter().copied().fold(0.0, f64::max);
            out.checks.push(Check::new("zero_growth", max == 0.0, max, 0.0, "zero data gives S = 0"));
        }
        _ => {
            out.checks.push(Check::new(
                "recursion",
                growth.recursion_ok,
                growth.first_failure.map(|f| f as f64).unwrap_or(-1.0),
                1e-12,
                "first failing level, -1 if none; relative slack 1e-12",
            ));
            let nt = nt_check(&curve, field, p.delta, NtMode::Strong)?;
            let failing = nt.annuli.iter().filter(|a| !a.1).count();
            out.checks.push(Check::new("non_tangential", nt.verdict, failing as f64, p.delta, "failing annuli; tolerance is delta"));
        }
    }
    out.checks.push(Check::new("c_fit", growth.c_fit.is_finite(), growth.c_fit, f64::INFINITY, "fitted linear constant").info());
    if spec.is_one_phase() && !curve.empty {
        let nd = nondegeneracy_report(field, &curve, &p.nondegeneracy_radii)?;
        let tol = NONDEG_FACTOR * spec.alpha_plus;
        out.checks.push(Check::new("nondegeneracy", nd.c_emp >= tol, nd.c_emp, tol, "recorded").info());
    }
    out.figures.push(Figure { name: "fb".into(), field: Some(field.clone()), curve, rays: rays_for(&spec), cones: Vec::new() });
    Ok(out.finish())
}

fn rays_for(spec: &ProblemSpec) -> Vec<(Variant, ProblemSpec)> {
    if spec.gamma.is_some() {
        vec![(Variant::Small, *spec), (Variant::Large, *spec)]
    } else {
        Vec::new()
    }
}

/// Blow-ups of the minimizers with the traces of `v_S` and `v_L` classify
/// to the matching homogeneous solution.
pub fn run_classify_c(s: &Scenario) -> Result<ExperimentResult> {
    let spec = s.spec.without_g();
    let p = &s.params;
    let lab = Lab::new(s.mesh)?;
    let mut out = ExperimentResult::new(ScenarioName::ClassifyC);

    if spec.gamma.is_none() {
        // no homogeneous free boundary: extend the flat datum to the arc
        let (ap, am) = (spec.alpha_plus, spec.alpha_minus);
        let datum = OuterDatum::Custom(Arc::new(move |x| if x[1] > 0.0 { ap * x[1] } else { am * x[1] }));
        let boundary = boundary_trace(&lab.mesh, &spec, &datum)?;
        let report = lab.solver.solve(&spec, &boundary, &s.solve.clone().with_init(Init::HarmonicLift))?;
        let curve = extract_field(&report.field);
        out.solves.push(SolveSummary::of("no_free_boundary", &report));
        out.checks.push(Check::new("free_boundary_empty", curve.empty, curve.segments.len() as f64, 0.0, "segments found"));
        out.figures.push(Figure { name: "fb".into(), field: Some(report.field), curve, rays: Vec::new(), cones: Vec::new() });
        return Ok(out.finish());
    }

    let mut table = Table::new(&["variant", "scale", "residual_small", "residual_large"]);
    for (variant, datum) in [(Variant::Small, DatumName::Small), (Variant::Large, DatumName::Large)] {
        let name = label(variant);
        let report = lab.solve(&spec, datum, &s.solve.clone().with_init(datum_init(datum)))?;
        out.solves.push(SolveSummary::of(name, &report));
        let field = &report.field;
        let seq = blowup_sequence(field, &spec, p.blowup_scales, None)?;
        for k in 0..seq.scales.len() {
            table.push(vec![if variant == Variant::Small { 0.0 } else { 1.0 }, seq.scales[k], seq.residuals_small[k], seq.residuals_large[k]]);
        }
        let want = if variant == Variant::Small { Verdict::Small } else { Verdict::Large };
        out.undecided |= seq.verdict == Verdict::Undecided;
        let own = if variant == Variant::Small { &seq.residuals_small } else { &seq.residuals_large };
        out.checks.push(Check::new(
            format!("classify/{name}"),
            seq.verdict == want,
            *own.last().unwrap_or(&f64::NAN),
            seq.tol_class,
            format!("verdict {:?}", seq.verdict),
        ));
        let curve = extract_field(field);
        match jump_report(field, &curve, &spec) {
            Ok(j) => {
                let tol = JUMP_RTOL * spec.big_lambda;
                out.checks.push(Check::new(format!("jump/{name}"), j.median_defect <= tol, j.median_defect, tol, "median jump defect"));
            }
            Err(e) => out.checks.push(Check::new(format!("jump/{name}"), false, f64::NAN, 0.0, e.to_string())),
        }
        if spec.is_one_phase() {
            let g = gradbound_report(field, &spec);
            let tol = spec.big_lambda * (1.0 + GRAD_RTOL);
            let ok = g.triangles_checked > 0 && g.max_grad2 <= tol;
            out.checks.push(Check::new(format!("gradbound/{name}"), ok, g.max_grad2, tol, format!("{} triangles", g.triangles_checked)));
        }
        out.figures.push(Figure { name: format!("fb_{name}"), field: Some(field.clone()), curve, rays: vec![(variant, spec)], cones: Vec::new() });
    }
    out.tables.insert("blowup.csv".into(), table);
    Ok(out.finish())
}

/// Touch angle of the free boundary in dyadic annuli.
pub fn run_angle_d(s: &Scenario) -> Result<ExperimentResult> {
    let spec = s.spec;
    let p = &s.params;
    let variant = variant_of(p.datum).ok_or_else(|| Error::Config("angle scenario needs datum small or large".into()))?;
    let gamma = spec.gamma()?;
    let theta = spec.theta()?;
    let lab = Lab::new(s.mesh)?;
    let report = lab.solve(&spec, p.datum, &s.solve)?;
    let mut out = ExperimentResult::new(ScenarioName::AngleD);
    out.solves.push(SolveSummary::of("angle", &report));
    let curve = extract_field(&report.field);
    let profile = angle_profile(&curve, &spec, &p.radii)?;

    let mut table = Table::new(&["radius", "count", "phi_min", "phi_max", "phi_mean", "sigma", "slope_sigma"]);
    for a in &profile.annuli {
        table.push(vec![a.r, a.count as f64, a.phi_min, a.phi_max, a.phi_mean, a.sigma, a.slope_sigma]);
    }
    out.tables.insert("angle_profile.csv".into(), table);

    let want = if variant == Variant::Small { Side::SmallSide } else { Side::LargeSide };
    out.checks.push(Check::new("side", profile.side == want, 0.0, 0.0, format!("{:?}", profile.side)));
    let empty = profile.annuli.iter().filter(|a| a.empty).count();
    out.checks.push(Check::new("annuli_populated", empty == 0, empty as f64, 0.0, "annuli without points"));

    // Extraction error of a straight ray is at most 2h/r in each annulus.
    let h = lab.mesh.h();
    let extraction = |r: f64| 2.0 * h / r;
    let sig = profile.sigmas();
    let excess = profile
        .annuli
        .windows(2)
        .zip(sig.windows(2))
        .map(|(a, w)| w[1] - w[0] - extraction(a[1].r))
        .fold(f64::NEG_INFINITY, f64::max);
    let strict = sig.windows(2).all(|w| w[1] < w[0]);
    out.checks.push(Check::new(
        "sigma_decreasing",
        excess <= 0.0,
        excess,
        0.0,
        "largest sigma(r_small) - sigma(r_big) - 2h/r_small",
    ));
    out.checks.push(
        Check::new("sigma_strictly_decreasing", strict, if strict { 0.0 } else { 1.0 }, 0.0, "strict decrease at every step")
            .info(),
    );

    let target = if variant == Variant::Small { theta } else { PI - theta };
    if let Some(fine) = profile.annuli.last() {
        let dev = (fine.phi_mean - target).abs().to_degrees();
        out.checks.push(Check::new("finest_mean_angle", dev <= ANGLE_TOL_DEG, dev, ANGLE_TOL_DEG, "degrees from the ray"));
    }

    let mut cones = Vec::new();
    if let (Some(coarse), Some(fine)) = (profile.annuli.first(), profile.annuli.last()) {
        let sigma = p.sigma.unwrap_or((1.05 * coarse.slope_sigma).max(extraction(coarse.r)));
        let cone = if variant == Variant::Small { Cone::sigma_plus(gamma, sigma) } else { Cone::sigma_minus(gamma, sigma) };
        match cone {
            Ok(cone) => {
                let outside = curve
                    .points()
                    .filter(|q| !q.contact && q.r >= fine.r && q.r <= 2.0 * fine.r)
                    .filter(|q| (variant == Variant::Small) == (q.x[1] > 0.0))
                    .filter(|q| !cone_contains(&cone, q.x))
                    .count();
                out.checks.push(Check::new("finest_in_cone", outside == 0, outside as f64, sigma, "points outside; tolerance is the slope half-width"));
                cones.push(cone);
            }
            Err(e) => out.checks.push(Check::new("finest_in_cone", false, sigma, gamma, e.to_string())),
        }
    }
    out.figures.push(Figure { name: "fb".into(), field: Some(report.field), curve, rays: vec![(variant, spec)], cones });
    Ok(out.finish())
}

/// Where the free boundary of the smallest minimizer crosses `{x2 = 0, x1 > 0}`.
pub fn axis_crossing(curve: &FreeBoundaryCurve) -> Option<f64> {
    curve
        .segments
        .iter()
        .filter_map(|s| {
            let (a, b) = (s.a, s.b);
            if (a[1] > 0.0 && b[1] > 0.0) || (a[1] < 0.0 && b[1] < 0.0) || (a[1] == b[1]) {
                return None;
            }
            let t = a[1] / (a[1] - b[1]);
            let x1 = a[0] + t * (b[0] - a[0]);
            (x1 > 0.0).then_some(x1)
        })
        .fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.min(x))))
}

/// Smallest radius of a free-boundary point in `{x2 < 0}`.
pub fn nearest_lower_point(curve: &FreeBoundaryCurve) -> f64 {
    curve.points().filter(|p| p.x[1] < 0.0).map(|p| p.r).fold(f64::INFINITY, f64::min)
}

/// Datum `(a+ - eps) x2^+` on the flat boundary with an arc datum of the
/// chosen shape; the free boundary must leave the origin on the small side
/// and cross to the large side at a radius shrinking with `eps`.
pub fn run_instability_e(s: &Scenario) -> Result<ExperimentResult> {
    let base = s.spec.without_g();
    if !base.is_one_phase() {
        return Err(Error::Config("instability scenario needs a one-phase spec".into()));
    }
    let gamma = base.gamma()?;
    let p = &s.params;
    let mut eps_list = p.eps_list.clone();
    eps_list.sort_by(|a, b| b.total_cmp(a));
    let lab = Lab::new(s.mesh)?;
    let n = lab.mesh.params().map(|q| q.angular_n).unwrap_or(s.mesh.angular_n) as f64;
    let mut out = ExperimentResult::new(ScenarioName::InstabilityE);
    let mut table = Table::new(&["eps", "r_eps", "nearest_lower_r", "max_grad2"]);

    // control: exact small-solution data keeps the free boundary on the ray
    {
        let sol = GlobalSolution::small(base);
        let report = lab.solve(&base, DatumName::Small, &s.solve.clone().with_init(Init::SmallSolution))?;
        out.solves.push(SolveSummary::of("eps=0", &report));
        let curve = extract_field(&report.field);
        let ray = ray_segment(&sol, lab.mesh.outer_radius())?;
        let tol = CONSISTENCY_FACTOR * lab.mesh.h();
        let haus = fb_hausdorff(&curve_segments(&curve), &[ray], [0.0, lab.mesh.outer_radius()]).unwrap_or(f64::INFINITY);
        out.checks.push(Check::new("control/fb_on_ray", haus <= tol, haus, tol, "Hausdorff distance to the small ray"));
        let crossing = axis_crossing(&curve);
        out.checks.push(Check::new("control/no_crossing", crossing.is_none(), crossing.unwrap_or(0.0), 0.0, "crossing radius, 0 if none"));
        table.push(vec![0.0, crossing.unwrap_or(f64::NAN), nearest_lower_point(&curve), gradbound_report(&report.field, &base).max_grad2]);
    }

    let mut radii = Vec::new();
    for &eps in &eps_list {
        let a = base.alpha_plus - eps;
        let spec = derive_params(a, 0.0, base.lambda_plus, base.lambda_minus, 0.0, base.g_exponent)?;
        let slope = match p.instability_arc {
            ArcDatum::SmallRay => -gamma,
            ArcDatum::LargeRay => gamma,
        };
        let datum = OuterDatum::Custom(Arc::new(move |x| a * (x[1] + slope * x[0]).max(0.0)));
        let boundary = boundary_trace(&lab.mesh, &spec, &datum)?;
        let ordered = smallest_minimizer_on(&lab, &spec, &boundary, &s.solve)?;
        let field = &ordered.field;
        out.solves.push(SolveSummary::of(format!("eps={eps}"), &ordered));
        let curve = extract_field(field);
        let crossing = axis_crossing(&curve);
        let lower = nearest_lower_point(&curve);
        let g2 = gradbound_report(field, &spec).max_grad2;
        table.push(vec![eps, crossing.unwrap_or(f64::NAN), lower, g2]);
        out.checks.push(Check::new(format!("detached/eps={eps}"), lower >= p.detach_radius, lower, p.detach_radius, "nearest free-boundary point in {x2 < 0}"));
        out.checks.push(Check::new(format!("crossing/eps={eps}"), crossing.is_some(), crossing.unwrap_or(f64::NAN), 0.0, "radius where the free boundary crosses {x2 = 0}"));
        out.checks.push(Check::new(format!("grad_exceeds_lambda/eps={eps}"), g2 > spec.big_lambda, g2, spec.big_lambda, "recorded").info());
        radii.push((eps, crossing));
        if Some(&eps) == eps_list.last() {
            out.figures.push(Figure { name: "fb".into(), field: Some(field.clone()), curve, rays: rays_for(&spec), cones: Vec::new() });
        }
    }
    for w in radii.windows(2) {
        if let ((e0, Some(r0)), (e1, Some(r1))) = (w[0], w[1]) {
            // one angular cell at that radius
            let tol = r0 * PI / n;
            out.checks.push(Check::new(format!("monotone/eps={e0}->{e1}"), r1 <= r0 + tol, r1 - r0, tol, "change of r_eps"));
        }
    }
    out.tables.insert("instability.csv".into(), table);
    Ok(out.finish())
}

fn smallest_minimizer_on(lab: &Lab, spec: &ProblemSpec, boundary: &BoundaryData, config: &SolveConfig) -> Result<SolveReport> {
    Ok(smallest_minimizer(lab.mesh.clone(), spec, boundary, config)?.report)
}

/// `W(1, .)` of the homogeneous solutions and of the computed minimizers
/// with their traces.
pub fn run_weiss_gap(s: &Scenario) -> Result<ExperimentResult> {
    let spec = s.spec.without_g();
    let mut out = ExperimentResult::new(ScenarioName::WeissGap);
    let gamma = spec.gamma()?;
    if spec.degenerate_tangential {
        let gap = crate::closed_form::weiss_gap(&spec)?;
        out.checks.push(Check::new("degenerate_gap", gap.abs() <= 1e-12, gap, 1e-12, "degenerate-tangential: both rays coincide"));
        return Ok(out.finish());
    }
    let lab = Lab::new(s.mesh)?;
    let tol_w = weiss_tolerance(&lab.mesh, &[1.0]);
    let origin = [0.0, 0.0];
    let small = GlobalSolution::small(spec);
    let large = GlobalSolution::large(spec);
    let ws = weiss_energy(&ScalarField::interpolate_global(lab.mesh.clone(), &small)?, &spec, 1.0, origin)?;
    let wl = weiss_energy(&ScalarField::interpolate_global(lab.mesh.clone(), &large)?, &spec, 1.0, origin)?;
    let gap = ws - wl;
    let closed = weiss_closed_form(&small)? - weiss_closed_form(&large)?;
    let oracle = gamma * (spec.alpha_plus.powi(2) - spec.alpha_minus.powi(2));

    out.checks.push(Check::new("ordering/closed_forms", gap > tol_w, gap, tol_w, "W(1,v_S) - W(1,v_L) by quadrature"));
    if spec.is_one_phase() {
        let rel = (gap - oracle).abs() / oracle.abs();
        out.checks.push(Check::new("gap_vs_boundary_oracle", rel <= GAP_RTOL, rel, GAP_RTOL, format!("oracle gamma a+^2 = {oracle}")));
    }
    let rel_closed = (gap - closed).abs() / closed.abs().max(1e-300);
    out.checks.push(Check::new("gap_vs_sector_formula", rel_closed <= GAP_RTOL, rel_closed, GAP_RTOL, format!("sector formula {closed}")).info());

    let mut table = Table::new(&["which", "w_small", "w_large", "gap"]);
    table.push(vec![0.0, ws, wl, gap]);
    let mut wmin = [0.0; 2];
    for (k, datum) in [DatumName::Small, DatumName::Large].into_iter().enumerate() {
        let report = lab.solve(&spec, datum, &s.solve.clone().with_init(datum_init(datum)))?;
        out.solves.push(SolveSummary::of(if k == 0 { "small" } else { "large" }, &report));
        wmin[k] = weiss_energy(&report.field, &spec, 1.0, origin)?;
    }
    table.push(vec![1.0, wmin[0], wmin[1], wmin[0] - wmin[1]]);
    out.checks.push(Check::new("ordering/minimizers", wmin[0] - wmin[1] > tol_w, wmin[0] - wmin[1], tol_w, "W(1) of the computed minimizers"));
    table.push(vec![2.0, weiss_closed_form(&small)?, weiss_closed_form(&large)?, closed]);
    out.tables.insert("weiss_gap.csv".into(), table);
    Ok(out.finish())
}

/// Weiss profile of the minimizer for the configured datum; corrected when
/// `g` is set.
pub fn run_weiss_profile(s: &Scenario) -> Result<(ExperimentResult, WeissProfile)> {
    let spec = s.spec;
    let lab = Lab::new(s.mesh)?;
    let report = lab.solve(&spec, s.params.datum, &s.solve)?;
    let mut out = ExperimentResult::new(ScenarioName::WeissGap);
    out.solves.push(SolveSummary::of("weiss", &report));
    let radii = &s.params.weiss_radii;
    let profile = if spec.g_coeff > 0.0 {
        corrected_weiss_profile(&subtract_g(&report.field, &spec)?, &spec, radii, None)?
    } else {
        weiss_profile(&report.field, &spec, [0.0, 0.0], radii)?
    };
    let tol = weiss_tolerance(&lab.mesh, &profile.radii);
    out.checks.push(Check::new("weiss_monotone", profile.monotonicity_defect <= tol, profile.monotonicity_defect, tol, "largest increase of W towards smaller radii"));
    let mut table = Table::new(&["radius", "W", "defect", "corrected_term"]);
    for k in 0..profile.radii.len() {
        table.push(vec![profile.radii[k], profile.w_values[k], profile.homogeneity_defects[k], profile.kappa_term.get(k).copied().unwrap_or(0.0)]);
    }
    out.tables.insert("weiss_profile.csv".into(), table);
    out.tables.insert("field.csv".into(), field_table(&report.field));
    Ok((out.finish(), profile))
}
