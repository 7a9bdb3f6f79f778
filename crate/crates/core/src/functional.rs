//! Exact and smoothed evaluation of `J(u) = int |grad u|^2 + Lambda chi{u > 0}`
//! for piecewise-linear fields.
//!
//! Every reduction over triangles runs in the mesh's canonical order through
//! a pairwise tree, so results do not depend on node numbering, triangle
//! numbering or thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closed_form::ProblemSpec;
use crate::error::{Error, Result};
use crate::mesh::{restrict_to_ball, HalfDiscMesh, ScalarField};
use crate::Point;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub dirichlet: f64,
    pub phase_area_pos: f64,
    /// `Lambda * phase_area_pos`.
    pub phase_term: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    fn new(dirichlet: f64, phase_area_pos: f64, big_lambda: f64) -> Self {
        let phase_term = big_lambda * phase_area_pos;
        Self { dirichlet, phase_area_pos, phase_term, total: dirichlet + phase_term }
    }
}

/// Decreasing smoothing widths for the continuation stage, as fractions of
/// the local triangle diameter: on triangle `T` the ramp width is
/// `eps * diam(T)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothingSchedule {
    pub eps_list: Vec<f64>,
}

impl Default for SmoothingSchedule {
    /// `0.5^k`, `k = 0..=6`.
    fn default() -> Self {
        Self::geometric(1.0, 0.5, 7).expect("valid default schedule")
    }
}

impl SmoothingSchedule {
    pub fn new(eps_list: Vec<f64>) -> Result<Self> {
        if eps_list.is_empty() {
            return Err(Error::InvalidParameter("empty smoothing schedule".into()));
        }
        if eps_list.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(Error::InvalidParameter("smoothing widths must be positive".into()));
        }
        if eps_list.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidParameter("smoothing widths must strictly decrease".into()));
        }
        Ok(Self { eps_list })
    }

    /// `start * ratio^k` for `k = 0..count`.
    pub fn geometric(start: f64, ratio: f64, count: usize) -> Result<Self> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::InvalidParameter(format!("schedule ratio {ratio} outside (0, 1)")));
        }
        Self::new((0..count).map(|k| start * ratio.powi(k as i32)).collect())
    }

    /// Checks that no local width drops below `1e-6 * h_min`.
    pub fn check_against(&self, mesh: &HalfDiscMesh) -> Result<()> {
        let last = *self.eps_list.last().expect("non-empty");
        let h_min = mesh.h_min();
        let narrowest = (0..mesh.triangle_count()).map(|t| mesh.diameter(t)).fold(f64::INFINITY, f64::min);
        if last * narrowest < 1e-6 * h_min {
            return Err(Error::InvalidParameter(format!("smoothing width {last:e} below 1e-6 h_min")));
        }
        Ok(())
    }
}

/// Cubic C^1 ramp: 0 below 0, 1 above `eps`.
pub fn ramp(s: f64, eps: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s >= eps {
        1.0
    } else {
        let t = s / eps;
        t * t * (3.0 - 2.0 * t)
    }
}

/// Derivative of [`ramp`].
pub fn ramp_derivative(s: f64, eps: f64) -> f64 {
    if s <= 0.0 || s >= eps {
        0.0
    } else {
        let t = s / eps;
        6.0 * t * (1.0 - t) / eps
    }
}

/// Pairwise (tree) sum.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 8 {
        let mut s = 0.0;
        for v in values {
            s += v;
        }
        s
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}

/// Area of `{l > 0}` for the linear interpolant `l` of `(a, b, c)` on a
/// triangle of area `area`. Vertex values equal to 0 count as non-positive.
pub fn positive_area_triangle(vals: (f64, f64, f64), area: f64) -> f64 {
    let v = [vals.0, vals.1, vals.2];
    let pos: Vec<usize> = (0..3).filter(|&i| v[i] > 0.0).collect();
    match pos.len() {
        0 => 0.0,
        3 => area,
        1 => {
            let p = v[pos[0]];
            let others: Vec<f64> = (0..3).filter(|&i| i != pos[0]).map(|i| v[i]).collect();
            area * p * p / ((p - others[0]) * (p - others[1]))
        }
        _ => {
            let k = (0..3).find(|&i| v[i] <= 0.0).expect("one non-positive vertex");
            let n = v[k];
            if n == 0.0 {
                return area;
            }
            let (p1, p2) = (v[pos[0]], v[pos[1]]);
            area - area * n * n / ((n - p1) * (n - p2))
        }
    }
}

fn dirichlet_triangle(mesh: &HalfDiscMesh, values: &[f64], t: usize) -> f64 {
    let g = mesh.gradient(t, values);
    (g[0] * g[0] + g[1] * g[1]) * mesh.area(t)
}

fn tri_values(mesh: &HalfDiscMesh, values: &[f64], t: usize) -> (f64, f64, f64) {
    let [i, j, k] = mesh.triangles()[t];
    (values[i], values[j], values[k])
}

/// Sums `f(t)` over all triangles in canonical order.
pub(crate) fn canonical_sum(mesh: &HalfDiscMesh, f: impl Fn(usize) -> f64 + Sync) -> f64 {
    let parts: Vec<f64> = mesh.canonical_order().par_iter().map(|&t| f(t)).collect();
    pairwise_sum(&parts)
}

/// Energy of the triangle `t` alone.
pub fn triangle_energy(mesh: &HalfDiscMesh, values: &[f64], t: usize, big_lambda: f64) -> f64 {
    dirichlet_triangle(mesh, values, t)
        + big_lambda * positive_area_triangle(tri_values(mesh, values, t), mesh.area(t))
}

/// `J(u, B_r^+)`; `region` must match a ring radius when given.
pub fn energy_exact(field: &ScalarField, spec: &ProblemSpec, region: Option<f64>) -> Result<EnergyBreakdown> {
    match region {
        Some(r) if r != field.mesh().outer_radius() => {
            let sub = restrict_to_ball(field, r).map_err(|_| Error::RegionUnaligned(r))?;
            Ok(energy_values(sub.mesh(), sub.values(), spec.big_lambda))
        }
        _ => Ok(energy_values(field.mesh(), field.values(), spec.big_lambda)),
    }
}

/// Exact energy of raw nodal values.
pub fn energy_values(mesh: &HalfDiscMesh, values: &[f64], big_lambda: f64) -> EnergyBreakdown {
    let dirichlet = canonical_sum(mesh, |t| dirichlet_triangle(mesh, values, t));
    let area = canonical_sum(mesh, |t| positive_area_triangle(tri_values(mesh, values, t), mesh.area(t)));
    EnergyBreakdown::new(dirichlet, area, big_lambda)
}

/// `int |grad v|^2 + eps_j^2 Lambda chi{v > 0}`.
pub fn scaled_energy(field: &ScalarField, spec: &ProblemSpec, eps_j: f64) -> Result<f64> {
    if !(eps_j >= 0.0) {
        return Err(Error::InvalidParameter(format!("eps_j must be >= 0, got {eps_j}")));
    }
    let e = energy_values(field.mesh(), field.values(), spec.big_lambda);
    Ok(e.dirichlet + eps_j * eps_j * spec.big_lambda * e.phase_area_pos)
}

// Degree-5 seven-point rule on the reference triangle: (barycentric, weight), weights sum to 1.
pub(crate) const QUAD7: [([f64; 3], f64); 7] = {
    const A1: f64 = 0.059_715_871_789_769_82;
    const B1: f64 = 0.470_142_064_105_115_1;
    const A2: f64 = 0.797_426_985_353_087_3;
    const B2: f64 = 0.101_286_507_323_456_35;
    const W1: f64 = 0.132_394_152_788_506_2;
    const W2: f64 = 0.125_939_180_544_827_15;
    [
        ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
        ([A1, B1, B1], W1),
        ([B1, A1, B1], W1),
        ([B1, B1, A1], W1),
        ([A2, B2, B2], W2),
        ([B2, A2, B2], W2),
        ([B2, B2, A2], W2),
    ]
};

#[derive(Clone, Copy)]
struct PolyVertex {
    x: Point,
    /// barycentric coordinates in the parent triangle
    bary: [f64; 3],
    u: f64,
}

fn lerp(a: &PolyVertex, b: &PolyVertex, s: f64) -> PolyVertex {
    PolyVertex {
        x: [a.x[0] + s * (b.x[0] - a.x[0]), a.x[1] + s * (b.x[1] - a.x[1])],
        bary: [0, 1, 2].map(|k| a.bary[k] + s * (b.bary[k] - a.bary[k])),
        u: a.u + s * (b.u - a.u),
    }
}

/// Keeps the part of a convex polygon where `sign * (u - level) >= 0`.
fn clip(poly: &[PolyVertex], level: f64, sign: f64) -> Vec<PolyVertex> {
    let mut out = Vec::with_capacity(poly.len() + 1);
    for k in 0..poly.len() {
        let (a, b) = (&poly[k], &poly[(k + 1) % poly.len()]);
        let (da, db) = (sign * (a.u - level), sign * (b.u - level));
        if da >= 0.0 {
            out.push(*a);
        }
        if (da >= 0.0) != (db >= 0.0) {
            out.push(lerp(a, b, da / (da - db)));
        }
    }
    out
}

/// Vertices of `{u > 0}` within triangle `t` (empty when it has no area).
pub(crate) fn positive_polygon(mesh: &HalfDiscMesh, values: &[f64], t: usize) -> Vec<Point> {
    let tri = mesh.triangles()[t];
    let corners = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let poly: Vec<PolyVertex> =
        (0..3).map(|k| PolyVertex { x: mesh.node(tri[k]), bary: corners[k], u: values[tri[k]] }).collect();
    if poly.iter().all(|v| v.u > 0.0) {
        return poly.iter().map(|v| v.x).collect();
    }
    if poly.iter().all(|v| v.u <= 0.0) {
        return Vec::new();
    }
    let out = clip(&poly, 0.0, 1.0);
    if out.len() < 3 {
        Vec::new()
    } else {
        out.iter().map(|v| v.x).collect()
    }
}

fn poly_area(poly: &[PolyVertex]) -> f64 {
    let mut s = 0.0;
    for k in 0..poly.len() {
        let (a, b) = (poly[k].x, poly[(k + 1) % poly.len()].x);
        s += a[0] * b[1] - b[0] * a[1];
    }
    0.5 * s.abs()
}

/// `int_T H_eps(u)` and `int_T H_eps'(u) phi_i` for the three hats.
fn smoothed_phase_triangle(mesh: &HalfDiscMesh, values: &[f64], t: usize, eps: f64) -> (f64, [f64; 3]) {
    let tri = mesh.triangles()[t];
    let u = tri.map(|i| values[i]);
    let (lo, hi) = (u[0].min(u[1]).min(u[2]), u[0].max(u[1]).max(u[2]));
    let area = mesh.area(t);
    if hi <= 0.0 {
        return (0.0, [0.0; 3]);
    }
    if lo >= eps {
        return (area, [0.0; 3]);
    }
    let corners = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let poly: Vec<PolyVertex> =
        (0..3).map(|k| PolyVertex { x: mesh.node(tri[k]), bary: corners[k], u: u[k] }).collect();
    let above = clip(&poly, eps, 1.0);
    let band = clip(&clip(&poly, 0.0, 1.0), eps, -1.0);
    let mut value = if above.len() >= 3 { poly_area(&above) } else { 0.0 };
    let mut grad = [0.0; 3];
    if band.len() >= 3 {
        for k in 1..band.len() - 1 {
            let sub = [band[0], band[k], band[k + 1]];
            let a = poly_area(&sub);
            if a == 0.0 {
                continue;
            }
            for (l, w) in QUAD7.iter() {
                let su = l[0] * sub[0].u + l[1] * sub[1].u + l[2] * sub[2].u;
                let bary = [0, 1, 2].map(|c| l[0] * sub[0].bary[c] + l[1] * sub[1].bary[c] + l[2] * sub[2].bary[c]);
                value += w * a * ramp(su, eps);
                let d = w * a * ramp_derivative(su, eps);
                for c in 0..3 {
                    grad[c] += d * bary[c];
                }
            }
        }
    }
    (value, grad)
}

/// Smoothed energy `int |grad u|^2 + Lambda int H_eps(u)` and its gradient
/// with respect to all nodal values.
pub fn energy_smoothed(field: &ScalarField, spec: &ProblemSpec, eps: f64) -> (f64, Vec<f64>) {
    smoothed_values(field.mesh(), field.values(), spec.big_lambda, eps)
}

pub fn smoothed_values(mesh: &HalfDiscMesh, values: &[f64], big_lambda: f64, eps: f64) -> (f64, Vec<f64>) {
    energy_and_gradient(mesh, values, big_lambda, PhaseModel::Uniform(eps))
}

/// How the phase indicator is treated by [`energy_and_gradient`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhaseModel {
    /// Ramp of fixed width.
    Uniform(f64),
    /// Ramp of width `scale * diam(T)` on each triangle `T`.
    Relative(f64),
    /// The indicator itself; its integral is C^1 in the nodal values
    /// away from triangles with two zero vertices.
    Exact,
}

/// Partial derivatives of [`positive_area_triangle`].
pub fn positive_area_gradient(vals: (f64, f64, f64), area: f64) -> [f64; 3] {
    let v = [vals.0, vals.1, vals.2];
    let pos = v.iter().filter(|&&x| x > 0.0).count();
    // derivative of A x^2 / ((x - y)(x - z)) with x the lone vertex
    let lone = |k: usize| -> [f64; 3] {
        let (x, y, z) = (v[k], v[(k + 1) % 3], v[(k + 2) % 3]);
        let (dy, dz) = (x - y, x - z);
        let f = area * x * x / (dy * dz);
        let mut g = [0.0; 3];
        g[k] = 2.0 * area * x / (dy * dz) - f / dy - f / dz;
        g[(k + 1) % 3] = f / dy;
        g[(k + 2) % 3] = f / dz;
        g
    };
    match pos {
        1 => lone((0..3).find(|&k| v[k] > 0.0).expect("one positive vertex")),
        2 => {
            let k = (0..3).find(|&k| v[k] <= 0.0).expect("one non-positive vertex");
            if v[k] == 0.0 {
                return [0.0; 3];
            }
            lone(k).map(|x| -x)
        }
        _ => [0.0; 3],
    }
}

/// Energy and gradient under the chosen phase model.
pub fn energy_and_gradient(mesh: &HalfDiscMesh, values: &[f64], big_lambda: f64, model: PhaseModel) -> (f64, Vec<f64>) {
    let n_tri = mesh.triangle_count();
    let per: Vec<(f64, [f64; 3])> = (0..n_tri)
        .into_par_iter()
        .map(|t| {
            let g = mesh.gradient(t, values);
            let sg = mesh.shape_gradients(t);
            let a = mesh.area(t);
            let (phase, dphase) = match model {
                PhaseModel::Uniform(eps) => smoothed_phase_triangle(mesh, values, t, eps),
                PhaseModel::Relative(s) => smoothed_phase_triangle(mesh, values, t, s * mesh.diameter(t)),
                PhaseModel::Exact => {
                    let tv = tri_values(mesh, values, t);
                    (positive_area_triangle(tv, a), positive_area_gradient(tv, a))
                }
            };
            let value = (g[0] * g[0] + g[1] * g[1]) * a + big_lambda * phase;
            let grad = [0, 1, 2].map(|c| 2.0 * a * (g[0] * sg[c][0] + g[1] * sg[c][1]) + big_lambda * dphase[c]);
            (value, grad)
        })
        .collect();
    let ordered: Vec<f64> = mesh.canonical_order().iter().map(|&t| per[t].0).collect();
    let mut grad = vec![0.0; mesh.node_count()];
    for (t, (_, g)) in per.iter().enumerate() {
        let tri = mesh.triangles()[t];
        for c in 0..3 {
            grad[tri[c]] += g[c];
        }
    }
    (pairwise_sum(&ordered), grad)
}

/// Terms of the corrected functional for `v = u - g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectedBreakdown {
    pub dirichlet: f64,
    /// `int v (2 Delta g)`.
    pub correction: f64,
    /// `area{v > -g}`.
    pub phase_area: f64,
    /// `dirichlet - correction + Lambda * phase_area`.
    pub total: f64,
}

/// `int_{B_r^+} |grad v|^2 - v (2 Delta g) + Lambda chi{v > -g}`.
pub fn corrected_energy(field: &ScalarField, spec: &ProblemSpec, region: f64) -> Result<f64> {
    Ok(corrected_energy_terms(field, spec, region)?.total)
}

pub fn corrected_energy_terms(field: &ScalarField, spec: &ProblemSpec, region: f64) -> Result<CorrectedBreakdown> {
    if spec.g_coeff == 0.0 {
        return Err(Error::GNotSet);
    }
    let sub = if region == field.mesh().outer_radius() {
        field.clone()
    } else {
        restrict_to_ball(field, region).map_err(|_| Error::RegionUnaligned(region))?
    };
    let mesh = sub.mesh();
    let v = sub.values();
    let dirichlet = canonical_sum(mesh, |t| dirichlet_triangle(mesh, v, t));
    let shifted: Vec<f64> = mesh.nodes().iter().zip(v).map(|(&x, &vi)| vi + spec.g(x)).collect();
    let phase_area = canonical_sum(mesh, |t| positive_area_triangle(tri_values(mesh, &shifted, t), mesh.area(t)));
    let correction = pairwise_sum(&lumped_weights(mesh)
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let x = mesh.node(i);
            let r = x[0].hypot(x[1]);
            let mass = if r == 0.0 {
                // exact integral of Delta g over the half-disc of area w
                let rho = (2.0 * w / std::f64::consts::PI).sqrt();
                let k = spec.g_exponent;
                spec.g_coeff * std::f64::consts::PI * (1.0 + k) * rho.powf(1.0 + k)
            } else {
                w * spec.laplacian_g(x)
            };
            2.0 * v[i] * mass
        })
        .collect::<Vec<_>>());
    let total = dirichlet - correction + spec.big_lambda * phase_area;
    Ok(CorrectedBreakdown { dirichlet, correction, phase_area, total })
}

/// Lumped mass: a third of the area of every adjacent triangle.
pub fn lumped_weights(mesh: &HalfDiscMesh) -> Vec<f64> {
    (0..mesh.node_count())
        .map(|i| mesh.triangles_of_node(i).iter().map(|&t| mesh.area(t) / 3.0).sum())
        .collect()
}
