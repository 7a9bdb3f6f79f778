//! Run configuration: a TOML document with sections `[spec]`, `[mesh]`,
//! `[solve]` and `[scenario]`. Every key is optional; unknown keys are
//! rejected.
//!
//! ```toml
//! [spec]
//! alpha_plus = 1.0        # slope of the datum on {x1 = 0, x2 > 0}
//! alpha_minus = 0.0       # slope of the datum on {x1 = 0, x2 < 0}
//! lambda_plus = 1.4142135623730951
//! lambda_minus = 0.0
//! g_coeff = 0.0           # g = g_coeff |x|^(1 + g_exponent)
//! g_exponent = 0.5
//!
//! [mesh]
//! rings = 12              # radii q^k, k = 0..rings-1
//! ratio = 0.5             # q
//! angular_n = 64
//! max_triangles = 4000000
//!
//! [solve]
//! max_outer = 2000
//! grad_tol = 1e-9
//! polish_sweeps = 400
//! seed = 0
//! init = "datum"          # datum | zero | small | large | harmonic
//! eps_list = [1.0, 0.5]   # smoothing widths relative to the triangle diameter
//!
//! [scenario]
//! name = "angle_d"        # growth_a | classify_c | angle_d | instability_e | weiss_gap | consistency
//! datum = "small"         # small | large | zero: trace on the arc
//! radii = [0.25, 0.125, 0.0625]
//! weiss_radii = [1.0, 0.5, 0.25, 0.125, 0.0625]
//! growth_levels = 5
//! blowup_scales = 5
//! delta = 0.5
//! sigma = 0.3             # cone half-width in slope units; default from the profile
//! eps_list = [0.2, 0.1, 0.05]
//! instability_arc = "small_ray"    # small_ray | large_ray
//! detach_radius = 0.05
//! nondegeneracy_radii = [0.1, 0.05]
//! ```

use serde::{Deserialize, Serialize};

use crate::closed_form::{derive_params, ProblemSpec};
use crate::error::{Error, Result};
use crate::functional::SmoothingSchedule;
use crate::mesh::MeshParams;
use crate::minimize::{Init, SolveConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpecSection {
    pub alpha_plus: f64,
    pub alpha_minus: f64,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub g_coeff: f64,
    pub g_exponent: f64,
}

impl Default for SpecSection {
    fn default() -> Self {
        Self { alpha_plus: 1.0, alpha_minus: 0.0, lambda_plus: 2f64.sqrt(), lambda_minus: 0.0, g_coeff: 0.0, g_exponent: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshSection {
    pub rings: usize,
    pub ratio: f64,
    pub angular_n: usize,
    pub max_triangles: usize,
}

impl Default for MeshSection {
    fn default() -> Self {
        let p = MeshParams::default();
        Self { rings: p.rings, ratio: p.ratio, angular_n: p.angular_n, max_triangles: p.max_triangles }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitName {
    /// The homogeneous solution whose trace is imposed on the arc.
    Datum,
    Zero,
    Small,
    Large,
    Harmonic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveSection {
    pub max_outer: usize,
    pub grad_tol: f64,
    pub polish_sweeps: usize,
    pub seed: u64,
    pub init: InitName,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_list: Option<Vec<f64>>,
}

impl Default for SolveSection {
    fn default() -> Self {
        let c = SolveConfig::default();
        Self {
            max_outer: c.max_outer,
            grad_tol: c.grad_tol,
            polish_sweeps: c.polish_sweeps,
            seed: c.seed,
            init: InitName::Datum,
            eps_list: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioName {
    GrowthA,
    ClassifyC,
    AngleD,
    InstabilityE,
    WeissGap,
    Consistency,
}

/// Outer datum on the unit arc.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatumName {
    Small,
    Large,
    Zero,
}

/// Arc datum of the instability experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArcDatum {
    /// `(a+ - eps)(x2 - gamma x1)^+`: zero below the unperturbed small ray.
    SmallRay,
    /// `(a+ - eps)(x2 + gamma x1)^+`: zero below the unperturbed large ray.
    LargeRay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    pub name: ScenarioName,
    pub datum: DatumName,
    pub radii: Vec<f64>,
    pub weiss_radii: Vec<f64>,
    pub growth_levels: usize,
    pub blowup_scales: usize,
    pub delta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    pub eps_list: Vec<f64>,
    pub instability_arc: ArcDatum,
    pub detach_radius: f64,
    pub nondegeneracy_radii: Vec<f64>,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            name: ScenarioName::Consistency,
            datum: DatumName::Small,
            radii: vec![0.25, 0.125, 0.0625],
            weiss_radii: vec![1.0, 0.5, 0.25, 0.125, 0.0625],
            growth_levels: 5,
            blowup_scales: 5,
            delta: 0.5,
            sigma: None,
            eps_list: vec![0.2, 0.1, 0.05],
            instability_arc: ArcDatum::SmallRay,
            detach_radius: 0.05,
            nondegeneracy_radii: vec![0.1, 0.05],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub spec: SpecSection,
    pub mesh: MeshSection,
    pub solve: SolveSection,
    pub scenario: ScenarioSection,
}

/// Validated inputs of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub spec: ProblemSpec,
    pub mesh: MeshParams,
    pub solve: SolveConfig,
    pub params: ScenarioSection,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    /// Parses `text` after applying `key.path=value` overrides.
    pub fn from_toml_with(text: &str, overrides: &[String]) -> Result<Self> {
        let mut doc: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        Self::deserialize(doc).map_err(|e| Error::Config(e.message().to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn problem_spec(&self) -> Result<ProblemSpec> {
        let s = &self.spec;
        derive_params(s.alpha_plus, s.alpha_minus, s.lambda_plus, s.lambda_minus, s.g_coeff, s.g_exponent)
    }

    pub fn mesh_params(&self) -> MeshParams {
        let m = &self.mesh;
        MeshParams { rings: m.rings, ratio: m.ratio, angular_n: m.angular_n, max_triangles: m.max_triangles }
    }

    pub fn solve_config(&self) -> Result<SolveConfig> {
        let s = &self.solve;
        let schedule = match &s.eps_list {
            Some(list) => SmoothingSchedule::new(list.clone())?,
            None => SmoothingSchedule::default(),
        };
        let init = match s.init {
            InitName::Datum => match self.scenario.datum {
                DatumName::Small => Init::SmallSolution,
                DatumName::Large => Init::LargeSolution,
                DatumName::Zero => Init::Zero,
            },
            InitName::Zero => Init::Zero,
            InitName::Small => Init::SmallSolution,
            InitName::Large => Init::LargeSolution,
            InitName::Harmonic => Init::HarmonicLift,
        };
        Ok(SolveConfig {
            schedule,
            max_outer: s.max_outer,
            grad_tol: s.grad_tol,
            polish_sweeps: s.polish_sweeps,
            init,
            seed: s.seed,
        })
    }

    pub fn scenario(&self) -> Result<Scenario> {
        let p = &self.scenario;
        let positive = |name: &str, v: &[f64]| -> Result<()> {
            if v.iter().all(|&x| x > 0.0 && x.is_finite()) {
                Ok(())
            } else {
                Err(Error::Config(format!("scenario.{name} must hold positive numbers")))
            }
        };
        positive("radii", &p.radii)?;
        positive("weiss_radii", &p.weiss_radii)?;
        positive("eps_list", &p.eps_list)?;
        positive("nondegeneracy_radii", &p.nondegeneracy_radii)?;
        if !(p.delta > 0.0) || !(p.detach_radius > 0.0) || p.sigma.is_some_and(|s| !(s > 0.0)) {
            return Err(Error::Config("scenario.delta, sigma and detach_radius must be positive".into()));
        }
        Ok(Scenario { spec: self.problem_spec()?, mesh: self.mesh_params(), solve: self.solve_config()?, params: p.clone() })
    }
}

fn apply_override(doc: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("bad override key `{key}`")));
    }
    let raw = raw.trim();
    // bare words are strings; everything else goes through the TOML parser
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let mut table = doc;
    for part in &path[..path.len() - 1] {
        table = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("`{part}` in `{key}` is not a section")))?;
    }
    table.insert(path[path.len() - 1].to_string(), value);
    Ok(())
}
