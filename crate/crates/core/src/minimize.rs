//! Discrete minimizers of `J` under Dirichlet data.
//!
//! A solve runs in two stages. The continuation stage minimizes the smoothed
//! energy for each width of the schedule by preconditioned gradient descent
//! (the preconditioner is the free-node stiffness matrix, so steps are taken
//! in the `H^1` metric) with an Armijo backtracking search. The polish stage
//! then runs Gauss-Seidel sweeps on the exact energy, moving one node at a
//! time to the minimizer of the exact one-dimensional restriction.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::closed_form::{GlobalSolution, ProblemSpec};
use crate::error::{Error, Result};
use crate::functional::{energy_and_gradient, energy_values, positive_area_triangle, EnergyBreakdown, PhaseModel, SmoothingSchedule};
use crate::linalg::{harmonic_extension, FreeSolver, Stiffness};
use crate::mesh::{BoundaryData, HalfDiscMesh, ScalarField};

const ARMIJO_C: f64 = 1e-4;
const BACKTRACK: f64 = 0.5;
const MIN_STEP: f64 = 1e-12;
const POLISH_GRID: usize = 16;
const GOLDEN_ITERS: usize = 48;
/// Thresholds of the film-removal step, in units of the last smoothing width.
const SNAP_FACTORS: [f64; 5] = [0.25, 1.0, 4.0, 16.0, 64.0];
/// Absolute thresholds of the film-removal step: `max u * 2^-k`, `k = 1..=SNAP_LEVELS`.
const SNAP_LEVELS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Init {
    Zero,
    SmallSolution,
    LargeSolution,
    HarmonicLift,
    Field(Vec<f64>),
}

impl Init {
    pub fn label(&self) -> &'static str {
        match self {
            Init::Zero => "zero",
            Init::SmallSolution => "small",
            Init::LargeSolution => "large",
            Init::HarmonicLift => "harmonic",
            Init::Field(_) => "field",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub schedule: SmoothingSchedule,
    /// Gradient steps allowed per smoothing width.
    pub max_outer: usize,
    pub grad_tol: f64,
    pub polish_sweeps: usize,
    pub init: Init,
    /// 0 keeps the natural sweep order; any other value shuffles it.
    pub seed: u64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self { schedule: SmoothingSchedule::default(), max_outer: 2000, grad_tol: 1e-9, polish_sweeps: 400, init: Init::Zero, seed: 0 }
    }
}

impl SolveConfig {
    pub fn with_init(mut self, init: Init) -> Self {
        self.init = init;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.grad_tol > 0.0) {
            return Err(Error::InvalidParameter(format!("grad_tol must be positive, got {}", self.grad_tol)));
        }
        if self.max_outer < 1 {
            return Err(Error::InvalidParameter("max_outer must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub field: ScalarField,
    pub energy: EnergyBreakdown,
    /// Gradient steps taken over the whole schedule.
    pub outer_iters: usize,
    pub polish_moves_accepted: usize,
    pub polish_sweeps_run: usize,
    /// Both stages reached their tolerances.
    pub converged: bool,
    /// `H^1`-dual norm of the final energy gradient; its square is the
    /// decrease predicted by a full preconditioned step.
    pub stationarity: f64,
    /// Exact energy after the continuation stage and after every sweep.
    pub energy_trace: Vec<f64>,
}

/// Assembled operators for one mesh, reusable across solves.
pub struct Solver {
    mesh: Arc<HalfDiscMesh>,
    stiffness: Stiffness,
    free: FreeSolver,
}

impl Solver {
    pub fn new(mesh: Arc<HalfDiscMesh>) -> Result<Self> {
        let stiffness = Stiffness::assemble(&mesh);
        let free = FreeSolver::new(&mesh, &stiffness)?;
        Ok(Self { mesh, stiffness, free })
    }

    pub fn mesh(&self) -> &Arc<HalfDiscMesh> {
        &self.mesh
    }

    fn check_boundary(&self, boundary: &BoundaryData) -> Result<()> {
        if boundary.values.len() != self.mesh.node_count() {
            return Err(Error::InconsistentBoundary(format!(
                "{} values for {} nodes",
                boundary.values.len(),
                self.mesh.node_count()
            )));
        }
        if let Some(i) = boundary.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InconsistentBoundary(format!("non-finite value at node {i}")));
        }
        Ok(())
    }

    fn with_boundary(&self, mut values: Vec<f64>, boundary: &BoundaryData) -> Vec<f64> {
        for (i, v) in values.iter_mut().enumerate() {
            if self.mesh.class(i).is_boundary() {
                *v = boundary.values[i];
            }
        }
        values
    }

    pub fn harmonic_lift(&self, boundary: &BoundaryData) -> Result<ScalarField> {
        self.check_boundary(boundary)?;
        let mut u = self.with_boundary(vec![0.0; self.mesh.node_count()], boundary);
        harmonic_extension(&self.stiffness, &self.free, &mut u)?;
        ScalarField::new(self.mesh.clone(), u)
    }

    fn initial_values(&self, spec: &ProblemSpec, boundary: &BoundaryData, init: &Init) -> Result<Vec<f64>> {
        let n = self.mesh.node_count();
        let global = |sol: GlobalSolution| -> Result<Vec<f64>> {
            if spec.gamma.is_none() {
                return Ok(self.harmonic_lift(boundary)?.into_values());
            }
            let v = ScalarField::interpolate_global(self.mesh.clone(), &sol)?;
            // g is added off the zero phase only: a positive layer over the whole
            // disc is a local trap for the exact phase term.
            Ok(v.values().iter().zip(self.mesh.nodes()).map(|(&a, &x)| if a == 0.0 { 0.0 } else { a + spec.g(x) }).collect())
        };
        let raw = match init {
            Init::Zero => vec![0.0; n],
            Init::SmallSolution => global(GlobalSolution::small(*spec))?,
            Init::LargeSolution => global(GlobalSolution::large(*spec))?,
            Init::HarmonicLift => return Ok(self.harmonic_lift(boundary)?.into_values()),
            Init::Field(v) => {
                if v.len() != n || v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::InvalidParameter("initial field does not match the mesh".into()));
                }
                v.clone()
            }
        };
        Ok(self.with_boundary(raw, boundary))
    }

    pub fn solve(&self, spec: &ProblemSpec, boundary: &BoundaryData, config: &SolveConfig) -> Result<SolveReport> {
        config.validate()?;
        self.check_boundary(boundary)?;
        config.schedule.check_against(&self.mesh)?;
        let mut u = self.initial_values(spec, boundary, &config.init)?;
        let lambda = spec.big_lambda;

        let mut outer_iters = 0;
        let mut stationarity = f64::INFINITY;
        let mut stage_one_ok = true;
        for &s in &config.schedule.eps_list {
            let (iters, stat, ok) = self.descend(&mut u, lambda, PhaseModel::Relative(s), config);
            outer_iters += iters;
            stationarity = stat;
            // wider widths only warm-start the next one
            stage_one_ok = ok;
        }
        let last = config.schedule.eps_list.last().copied().unwrap_or(0.0);
        self.snap_small_positive(&mut u, lambda, last);
        // The exact energy has kinks where a node meets the zero phase, so a
        // stalled line search here is expected; polish decides convergence.
        let (iters, _, _) = self.descend(&mut u, lambda, PhaseModel::Exact, config);
        outer_iters += iters;

        let polish = self.polish(&mut u, lambda, config);
        let field = ScalarField::new(self.mesh.clone(), u)?;
        let energy = energy_values(&self.mesh, field.values(), lambda);
        Ok(SolveReport {
            field,
            energy,
            outer_iters,
            polish_moves_accepted: polish.moves,
            polish_sweeps_run: polish.sweeps,
            converged: stage_one_ok && polish.quiet,
            stationarity,
            energy_trace: polish.trace,
        })
    }

    /// Preconditioned gradient descent. Returns the number of steps, the
    /// final stationarity and whether the predicted decrease fell below
    /// `grad_tol` or the line search stalled at rounding level.
    fn descend(&self, u: &mut Vec<f64>, lambda: f64, model: PhaseModel, config: &SolveConfig) -> (usize, f64, bool) {
        let free = self.free.free();
        let (mut f, mut grad) = energy_and_gradient(&self.mesh, u, lambda, model);
        let mut step = 1.0f64;
        let mut stationarity = f64::INFINITY;
        let band: Option<Vec<f64>> = match model {
            PhaseModel::Relative(s) => Some((0..u.len()).map(|i| s * self.node_diameter(i)).collect()),
            _ => None,
        };
        for it in 0..config.max_outer {
            let g: Vec<f64> = free.iter().map(|&i| grad[i]).collect();
            let d: Vec<f64> = self.free.solve(&g).into_iter().map(|x| -0.5 * x).collect();
            let slope: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
            stationarity = (-slope).max(0.0).sqrt();
            if -slope <= config.grad_tol {
                return (it, stationarity, true);
            }
            let mut t = (2.0 * step).min(1.0);
            // On a smoothed stage a node at or below its ramp band rises by at
            // most one band width per step; otherwise a full step lands the
            // zero phase on the flat top of the ramp, where nothing pulls it back.
            if let Some(w) = &band {
                for (a, &i) in free.iter().enumerate() {
                    if d[a] > 0.0 && u[i] < w[i] && t * d[a] > w[i] {
                        t = w[i] / d[a];
                    }
                }
            }
            let mut trial = u.clone();
            loop {
                for (a, &i) in free.iter().enumerate() {
                    trial[i] = u[i] + t * d[a];
                }
                let (ft, gt) = energy_and_gradient(&self.mesh, &trial, lambda, model);
                if ft <= f + ARMIJO_C * t * slope {
                    debug_assert!(ft <= f);
                    std::mem::swap(u, &mut trial);
                    let gain = f - ft;
                    f = ft;
                    grad = gt;
                    step = t;
                    if gain <= config.grad_tol {
                        return (it + 1, stationarity, true);
                    }
                    break;
                }
                t *= BACKTRACK;
                if t < MIN_STEP {
                    // no representable decrease left along the descent direction
                    let stalled = -slope <= 1e-10 * f.abs().max(1e-300);
                    return (it, stationarity, stalled);
                }
            }
        }
        (config.max_outer, stationarity, false)
    }

    /// Descent on the smoothed energy can settle in a state where a region
    /// that should be in the zero phase carries a positive film, which the
    /// exact energy cannot shed node by node. Tries zeroing every free node
    /// below a threshold, for thresholds tied to the smoothing width and to
    /// fractions of the largest value, and keeps the best candidate when it
    /// lowers the exact energy.
    fn snap_small_positive(&self, u: &mut [f64], lambda: f64, scale: f64) -> bool {
        let top = u.iter().copied().fold(0.0, f64::max);
        if top <= 0.0 {
            return false;
        }
        let diam: Vec<f64> = (0..u.len()).map(|i| self.node_diameter(i)).collect();
        let relative = SNAP_FACTORS.iter().map(|&c| (c * scale, 0.0));
        let absolute = (1..=SNAP_LEVELS).map(|k| (0.0, top * 0.5f64.powi(k as i32)));
        let mut best = energy_values(&self.mesh, u, lambda).total;
        let mut chosen: Option<Vec<f64>> = None;
        for (per_diam, level) in relative.chain(absolute) {
            let mut trial = u.to_vec();
            let mut changed = false;
            for &i in self.free.free() {
                if trial[i] > 0.0 && trial[i] < per_diam * diam[i] + level {
                    trial[i] = 0.0;
                    changed = true;
                }
            }
            if !changed {
                continue;
            }
            let e = energy_values(&self.mesh, &trial, lambda).total;
            if e < best {
                best = e;
                chosen = Some(trial);
            }
        }
        match chosen {
            Some(v) => {
                u.copy_from_slice(&v);
                true
            }
            None => false,
        }
    }

    /// Largest diameter among the triangles at node `i`.
    fn node_diameter(&self, i: usize) -> f64 {
        self.mesh.triangles_of_node(i).iter().map(|&t| self.mesh.diameter(t)).fold(0.0, f64::max)
    }

    fn polish(&self, u: &mut [f64], lambda: f64, config: &SolveConfig) -> PolishOutcome {
        let mut order = self.free.free().to_vec();
        if config.seed != 0 {
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(config.seed));
        }
        let mut trace = vec![energy_values(&self.mesh, u, lambda).total];
        let mut moves = 0;
        for sweep in 0..config.polish_sweeps {
            let mut max_gain = 0.0f64;
            for &i in &order {
                if let Some((t, gain)) = self.best_node_value(u, i, lambda) {
                    u[i] = t;
                    moves += 1;
                    max_gain = max_gain.max(gain);
                }
            }
            let e = energy_values(&self.mesh, u, lambda).total;
            let last = *trace.last().expect("non-empty");
            assert!(e <= last, "polish sweep increased the energy: {last} -> {e}");
            trace.push(e);
            if max_gain <= config.grad_tol {
                return PolishOutcome { moves, sweeps: sweep + 1, quiet: true, trace };
            }
        }
        PolishOutcome { moves, sweeps: config.polish_sweeps, quiet: config.polish_sweeps == 0, trace }
    }

    /// Exact minimizer of the energy restricted to node `i`, when it improves
    /// on the current value.
    fn best_node_value(&self, u: &mut [f64], i: usize, lambda: f64) -> Option<(f64, f64)> {
        let a = self.stiffness.diag(i);
        let b = 2.0 * self.stiffness.off_diagonal_dot(i, u);
        let current = u[i];
        let tris = self.mesh.triangles_of_node(i);
        let mesh = &self.mesh;
        let mut all_pos = true;
        let mut all_nonpos = true;
        for &tr in tris {
            for v in mesh.triangles()[tr] {
                if v != i {
                    all_pos &= u[v] > 0.0;
                    all_nonpos &= u[v] <= 0.0;
                }
            }
        }
        let phase = |u: &mut [f64], t: f64| -> f64 {
            u[i] = t;
            let mut p = 0.0;
            for &tr in tris {
                let [x, y, z] = mesh.triangles()[tr];
                p += positive_area_triangle((u[x], u[y], u[z]), mesh.area(tr));
            }
            p
        };
        let mut f = |t: f64| -> f64 {
            let p = phase(u, t);
            a * t * t + b * t + lambda * p
        };
        let t_star = -b / (2.0 * a);

        let f_cur = f(current);
        let p_star = f(t_star) - a * t_star * t_star - b * t_star;
        let lo = t_star - (lambda * p_star.max(0.0) / a).sqrt();

        let best = if (all_nonpos && t_star <= 0.0) || (all_pos && lo > 0.0) || p_star <= 0.0 {
            (t_star, f(t_star))
        } else {
            let mut cands: Vec<f64> = (0..=POLISH_GRID).map(|k| lo + (t_star - lo) * k as f64 / POLISH_GRID as f64).collect();
            cands.extend([current, 0.0].iter().filter(|&&t| t >= lo && t <= t_star));
            let mut best = (current, f_cur);
            for &t in &cands {
                let v = f(t);
                if v < best.1 {
                    best = (t, v);
                }
            }
            // refine inside the smooth piece around the best sample
            let h = (t_star - lo) / POLISH_GRID as f64;
            let (mut l, mut r) = ((best.0 - h).max(lo), (best.0 + h).min(t_star));
            if best.0 > 0.0 {
                l = l.max(0.0);
            } else if best.0 < 0.0 {
                r = r.min(0.0);
            }
            if r > l {
                let g = 0.5 * (5f64.sqrt() - 1.0);
                let (mut x1, mut x2) = (r - g * (r - l), l + g * (r - l));
                let (mut f1, mut f2) = (f(x1), f(x2));
                for _ in 0..GOLDEN_ITERS {
                    if f1 <= f2 {
                        r = x2;
                        x2 = x1;
                        f2 = f1;
                        x1 = r - g * (r - l);
                        f1 = f(x1);
                    } else {
                        l = x1;
                        x1 = x2;
                        f1 = f2;
                        x2 = l + g * (r - l);
                        f2 = f(x2);
                    }
                }
                for (t, v) in [(x1, f1), (x2, f2)] {
                    if v < best.1 {
                        best = (t, v);
                    }
                }
            }
            best
        };
        u[i] = current;
        if best.1 < f_cur && best.0 != current {
            Some((best.0, f_cur - best.1))
        } else {
            None
        }
    }

    /// Polish only, starting from `values`.
    pub fn repolish(&self, spec: &ProblemSpec, values: Vec<f64>, config: &SolveConfig) -> Result<SolveReport> {
        let mut u = values;
        let polish = self.polish(&mut u, spec.big_lambda, config);
        let field = ScalarField::new(self.mesh.clone(), u)?;
        let energy = energy_values(&self.mesh, field.values(), spec.big_lambda);
        Ok(SolveReport {
            field,
            energy,
            outer_iters: 0,
            polish_moves_accepted: polish.moves,
            polish_sweeps_run: polish.sweeps,
            converged: polish.quiet,
            stationarity: f64::NAN,
            energy_trace: polish.trace,
        })
    }
}

struct PolishOutcome {
    moves: usize,
    sweeps: usize,
    quiet: bool,
    trace: Vec<f64>,
}

/// Discrete harmonic function with the given boundary values.
pub fn harmonic_lift(mesh: Arc<HalfDiscMesh>, boundary: &BoundaryData) -> Result<ScalarField> {
    Solver::new(mesh)?.harmonic_lift(boundary)
}

pub fn solve(
    mesh: Arc<HalfDiscMesh>,
    spec: &ProblemSpec,
    boundary: &BoundaryData,
    config: &SolveConfig,
) -> Result<SolveReport> {
    Solver::new(mesh)?.solve(spec, boundary, config)
}

/// Nodal max or min of two fields with the energy-identity defect.
#[derive(Debug, Clone)]
pub struct Combination {
    pub field: ScalarField,
    /// `|J(max) + J(min) - J(v1) - J(v2)|`.
    pub defect: f64,
    /// Triangles on which `v1 - v2` changes sign.
    pub order_change_triangles: Vec<usize>,
}

fn combine(v1: &ScalarField, v2: &ScalarField, spec: &ProblemSpec, take_max: bool) -> Result<Combination> {
    if !v1.same_mesh(v2) {
        return Err(Error::MeshMismatch);
    }
    let mesh = v1.mesh();
    let (a, b) = (v1.values(), v2.values());
    let hi: Vec<f64> = a.iter().zip(b).map(|(x, y)| x.max(*y)).collect();
    let lo: Vec<f64> = a.iter().zip(b).map(|(x, y)| x.min(*y)).collect();
    let lambda = spec.big_lambda;
    let defect = (energy_values(mesh, &hi, lambda).total + energy_values(mesh, &lo, lambda).total
        - energy_values(mesh, a, lambda).total
        - energy_values(mesh, b, lambda).total)
        .abs();
    let order_change_triangles = mesh
        .triangles()
        .iter()
        .enumerate()
        .filter(|(_, t)| {
            let d = t.map(|i| a[i] - b[i]);
            d.iter().any(|&x| x > 0.0) && d.iter().any(|&x| x < 0.0)
        })
        .map(|(k, _)| k)
        .collect();
    let field = ScalarField::new(mesh.clone(), if take_max { hi } else { lo })?;
    Ok(Combination { field, defect, order_change_triangles })
}

pub fn combine_max(v1: &ScalarField, v2: &ScalarField, spec: &ProblemSpec) -> Result<Combination> {
    combine(v1, v2, spec, true)
}

pub fn combine_min(v1: &ScalarField, v2: &ScalarField, spec: &ProblemSpec) -> Result<Combination> {
    combine(v1, v2, spec, false)
}

/// Outcome of the multi-start search for an extremal minimizer.
#[derive(Debug, Clone)]
pub struct OrderedMinimizer {
    pub report: SolveReport,
    /// `(init label, exact energy, converged)` of every run.
    pub runs: Vec<(String, f64, bool)>,
    /// Runs ended in states whose energies differ by more than `grad_tol`.
    pub multiple_basins: bool,
    /// The re-polished envelope was rejected in favour of the best run.
    pub envelope_rejected: bool,
}

fn extremal_minimizer(
    solver: &Solver,
    spec: &ProblemSpec,
    boundary: &BoundaryData,
    config: &SolveConfig,
    smallest: bool,
) -> Result<OrderedMinimizer> {
    let primary = if smallest { Init::SmallSolution } else { Init::LargeSolution };
    let mut reports = Vec::new();
    for init in [primary, Init::Zero, Init::HarmonicLift] {
        let report = solver.solve(spec, boundary, &config.clone().with_init(init.clone()))?;
        reports.push((init.label().to_string(), report));
    }
    let runs: Vec<(String, f64, bool)> =
        reports.iter().map(|(l, r)| (l.clone(), r.energy.total, r.converged)).collect();
    let energies: Vec<f64> = runs.iter().map(|r| r.1).collect();
    let best_energy = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let worst_energy = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let multiple_basins = worst_energy - best_energy > config.grad_tol;

    let pool: Vec<&SolveReport> = {
        let converged: Vec<&SolveReport> = reports.iter().map(|r| &r.1).filter(|r| r.converged).collect();
        if converged.is_empty() {
            reports.iter().map(|r| &r.1).collect()
        } else {
            converged
        }
    };
    let mut envelope = pool[0].field.values().to_vec();
    for r in &pool[1..] {
        for (e, v) in envelope.iter_mut().zip(r.field.values()) {
            *e = if smallest { e.min(*v) } else { e.max(*v) };
        }
    }
    let polished = solver.repolish(spec, envelope, config)?;
    let all_converged = reports.iter().all(|r| r.1.converged);
    if polished.energy.total <= best_energy + config.grad_tol {
        let mut report = polished;
        report.converged = report.converged && all_converged;
        Ok(OrderedMinimizer { report, runs, multiple_basins, envelope_rejected: false })
    } else {
        let best = reports
            .into_iter()
            .map(|r| r.1)
            .min_by(|a, b| a.energy.total.total_cmp(&b.energy.total))
            .expect("three runs");
        Ok(OrderedMinimizer { report: best, runs, multiple_basins, envelope_rejected: true })
    }
}

/// Approximates the smallest minimizer by a multi-start nodal minimum.
pub fn smallest_minimizer(
    mesh: Arc<HalfDiscMesh>,
    spec: &ProblemSpec,
    boundary: &BoundaryData,
    config: &SolveConfig,
) -> Result<OrderedMinimizer> {
    extremal_minimizer(&Solver::new(mesh)?, spec, boundary, config, true)
}

/// Approximates the largest minimizer by a multi-start nodal maximum.
pub fn largest_minimizer(
    mesh: Arc<HalfDiscMesh>,
    spec: &ProblemSpec,
    boundary: &BoundaryData,
    config: &SolveConfig,
) -> Result<OrderedMinimizer> {
    extremal_minimizer(&Solver::new(mesh)?, spec, boundary, config, false)
}

/// Both extremal minimizers sharing one assembled solver.
pub fn ordered_minimizers(
    solver: &Solver,
    spec: &ProblemSpec,
    boundary: &BoundaryData,
    config: &SolveConfig,
) -> Result<(OrderedMinimizer, OrderedMinimizer)> {
    Ok((
        extremal_minimizer(solver, spec, boundary, config, true)?,
        extremal_minimizer(solver, spec, boundary, config, false)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{boundary_trace, build_mesh, OuterDatum};

    #[test]
    fn lift_reproduces_linear_data() {
        let mesh = Arc::new(build_mesh(4, 0.5, 16).unwrap());
        let data = BoundaryData::from_fn(&mesh, |p| p[1]);
        let lift = harmonic_lift(mesh.clone(), &data).unwrap();
        for (v, p) in lift.values().iter().zip(mesh.nodes()) {
            assert!((v - p[1]).abs() < 1e-12);
        }
        let zero = harmonic_lift(mesh.clone(), &BoundaryData::zeros(&mesh)).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_data_gives_zero() {
        let mesh = Arc::new(build_mesh(3, 0.5, 12).unwrap());
        let spec = ProblemSpec::default_one_phase();
        let r = solve(mesh.clone(), &spec, &BoundaryData::zeros(&mesh), &SolveConfig::default()).unwrap();
        assert!(r.field.values().iter().all(|&v| v == 0.0));
        assert_eq!(r.energy.total, 0.0);
        assert!(r.converged);
    }

    #[test]
    fn small_trace_recovers_small_solution() {
        let mesh = Arc::new(build_mesh(4, 0.5, 24).unwrap());
        let spec = ProblemSpec::default_one_phase();
        let data = boundary_trace(&mesh, &spec, &OuterDatum::SmallTrace).unwrap();
        let r = solve(mesh.clone(), &spec, &data, &SolveConfig::default()).unwrap();
        let vs = ScalarField::interpolate_global(mesh.clone(), &GlobalSolution::small(spec)).unwrap();
        let err = r.field.max_abs_diff(&vs).unwrap();
        assert!(err <= 5.0 * mesh.h(), "error {err}, h {}", mesh.h());
        assert!(r.energy_trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn combine_examples() {
        let mesh = Arc::new(build_mesh(3, 0.5, 16).unwrap());
        let spec = ProblemSpec::default_one_phase();
        let vs = ScalarField::interpolate_global(mesh.clone(), &GlobalSolution::small(spec)).unwrap();
        let vl = ScalarField::interpolate_global(mesh.clone(), &GlobalSolution::large(spec)).unwrap();
        let same = combine_max(&vs, &vs, &spec).unwrap();
        assert_eq!(same.defect, 0.0);
        assert_eq!(same.field.values(), vs.values());
        let c = combine_max(&vs, &vl, &spec).unwrap();
        assert_eq!(c.field.values(), vl.values());
        let other = ScalarField::zeros(Arc::new(build_mesh(3, 0.5, 12).unwrap()));
        assert!(matches!(combine_min(&vs, &other, &spec), Err(Error::MeshMismatch)));
    }
}
