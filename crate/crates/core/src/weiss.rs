//! Weiss energies
//! `W(R, u, x0) = R^-2 (int_{B_R^+(x0)} |grad u|^2 + Lambda chi{u > 0}) - R^-3 int_{S_R^+(x0)} u^2`
//! and their profiles over decreasing radii.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::closed_form::ProblemSpec;
use crate::error::{Error, Result};
use crate::functional::{energy_values, pairwise_sum, positive_polygon, QUAD7};
use crate::mesh::{restrict_to_ball, HalfDiscMesh, ScalarField, RING_RTOL};
use crate::Point;

const ARC_SAMPLES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeissTerms {
    /// `int_{B_R^+} |grad u|^2 + Lambda chi{u > 0}`.
    pub bulk: f64,
    /// `int_{S_R^+} u^2`.
    pub sphere: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeissProfile {
    pub center: Point,
    /// Decreasing.
    pub radii: Vec<f64>,
    pub w_values: Vec<f64>,
    /// `int (grad u . nu - u / |x|)^2` over the shell below each radius.
    pub homogeneity_defects: Vec<f64>,
    /// `max (W(r_small) - W(r_big))^+` over consecutive radii.
    pub monotonicity_defect: f64,
    pub corrected: bool,
    /// `C1 / kappa * t^kappa` per radius; empty unless corrected.
    pub kappa_term: Vec<f64>,
    /// Scale-free mesh size used by [`weiss_tolerance`].
    pub h_rel: f64,
}

impl WeissProfile {
    /// CSV with columns `radius,W,defect,corrected_term`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["radius", "W", "defect", "corrected_term"]).map_err(io)?;
        for k in 0..self.radii.len() {
            let term = self.kappa_term.get(k).copied().unwrap_or(0.0);
            w.serialize((self.radii[k], self.w_values[k], self.homogeneity_defects[k], term)).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }
}

/// `10 h`, with `h` the largest ratio of shortest ring edge to ring radius
/// over the given radii.
pub fn weiss_tolerance(mesh: &HalfDiscMesh, radii: &[f64]) -> f64 {
    10.0 * relative_ring_h(mesh, radii)
}

fn relative_ring_h(mesh: &HalfDiscMesh, radii: &[f64]) -> f64 {
    radii
        .iter()
        .filter_map(|&r| mesh.ring_index(r).map(|k| mesh.ring_h_min(k) / r))
        .fold(0.0, f64::max)
}

pub fn weiss_energy(field: &ScalarField, spec: &ProblemSpec, r: f64, x0: Point) -> Result<f64> {
    Ok(weiss_terms(field, spec, r, x0)?.value)
}

pub fn weiss_terms(field: &ScalarField, spec: &ProblemSpec, r: f64, x0: Point) -> Result<WeissTerms> {
    let mesh = field.mesh();
    let outer = mesh.outer_radius();
    if x0[0] < 0.0 || x0[0].hypot(x0[1]) > outer * (1.0 + RING_RTOL) {
        return Err(Error::CenterOutside(x0[0], x0[1]));
    }
    if !(r > 0.0) {
        return Err(Error::RegionUnaligned(r));
    }
    let (bulk, sphere) = if x0 == [0.0, 0.0] {
        centered_terms(field, spec, r)?
    } else {
        if x0[0].hypot(x0[1]) + r > outer * (1.0 + RING_RTOL) {
            return Err(Error::RegionUnaligned(r));
        }
        offset_terms(field, spec, r, x0)
    };
    Ok(WeissTerms { bulk, sphere, value: bulk / (r * r) - sphere / (r * r * r) })
}

fn centered_terms(field: &ScalarField, spec: &ProblemSpec, r: f64) -> Result<(f64, f64)> {
    let sub = if (r - field.mesh().outer_radius()).abs() <= RING_RTOL * r {
        field.clone()
    } else {
        restrict_to_ball(field, r).map_err(|_| Error::RegionUnaligned(r))?
    };
    let mesh = sub.mesh();
    let e = energy_values(mesh, sub.values(), spec.big_lambda);
    let ring = mesh.rings()[0];
    let u = sub.values();
    let edges: Vec<f64> = (ring.first_node..ring.first_node + ring.node_count - 1)
        .map(|i| {
            let (a, b) = (u[i], u[i + 1]);
            mesh.edge_length(i, i + 1) * (a * a + a * b + b * b) / 3.0
        })
        .collect();
    Ok((e.total, pairwise_sum(&edges)))
}

/// Signed area of the intersection of the disc `|x| <= r` with the
/// triangle `(0, a, b)`.
fn disc_triangle_area(a: Point, b: Point, r: f64) -> f64 {
    let cross = |p: Point, q: Point| p[0] * q[1] - p[1] * q[0];
    let dot = |p: Point, q: Point| p[0] * q[0] + p[1] * q[1];
    let d = [b[0] - a[0], b[1] - a[1]];
    let (qa, qb, qc) = (dot(d, d), 2.0 * dot(a, d), dot(a, a) - r * r);
    let mut ts = vec![0.0];
    if qa > 0.0 {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc > 0.0 {
            let s = disc.sqrt();
            for t in [(-qb - s) / (2.0 * qa), (-qb + s) / (2.0 * qa)] {
                if t > 0.0 && t < 1.0 {
                    ts.push(t);
                }
            }
        }
    }
    ts.push(1.0);
    let at = |t: f64| [a[0] + t * d[0], a[1] + t * d[1]];
    let mut area = 0.0;
    for w in ts.windows(2) {
        let (p, q) = (at(w[0]), at(w[1]));
        let m = at(0.5 * (w[0] + w[1]));
        if dot(m, m) < r * r {
            area += 0.5 * cross(p, q);
        } else {
            area += 0.5 * r * r * cross(p, q).atan2(dot(p, q));
        }
    }
    area
}

/// Area of a polygon intersected with the disc `B_r(c)`.
fn disc_polygon_area(poly: &[Point], c: Point, r: f64) -> f64 {
    let rel: Vec<Point> = poly.iter().map(|p| [p[0] - c[0], p[1] - c[1]]).collect();
    let mut s = 0.0;
    for k in 0..rel.len() {
        s += disc_triangle_area(rel[k], rel[(k + 1) % rel.len()], r);
    }
    s.abs()
}

fn offset_terms(field: &ScalarField, spec: &ProblemSpec, r: f64, x0: Point) -> (f64, f64) {
    let mesh = field.mesh();
    let u = field.values();
    let near: Vec<usize> = (0..mesh.triangle_count())
        .filter(|&t| {
            mesh.triangles()[t].iter().any(|&i| {
                let x = mesh.node(i);
                (x[0] - x0[0]).hypot(x[1] - x0[1]) <= r + mesh.diameter(t)
            })
        })
        .collect();
    let bulk: Vec<f64> = near
        .iter()
        .map(|&t| {
            let tri: Vec<Point> = mesh.triangles()[t].iter().map(|&i| mesh.node(i)).collect();
            let g = mesh.gradient(t, u);
            let dir = (g[0] * g[0] + g[1] * g[1]) * disc_polygon_area(&tri, x0, r);
            let pos = positive_polygon(mesh, u, t);
            let phase = if pos.is_empty() { 0.0 } else { disc_polygon_area(&pos, x0, r) };
            dir + spec.big_lambda * phase
        })
        .collect();

    // circle part inside {x1 >= 0}
    let w_max = if x0[0] >= r { PI } else { (-x0[0] / r).acos() };
    let dw = 2.0 * w_max / ARC_SAMPLES as f64;
    let sphere: Vec<f64> = (0..ARC_SAMPLES)
        .map(|k| {
            let w = -w_max + (k as f64 + 0.5) * dw;
            let x = [x0[0] + r * w.cos(), x0[1] + r * w.sin()];
            let v = locate_in(mesh, u, &near, x).unwrap_or(0.0);
            v * v * r * dw
        })
        .collect();
    (pairwise_sum(&bulk), pairwise_sum(&sphere))
}

fn locate_in(mesh: &HalfDiscMesh, u: &[f64], candidates: &[usize], x: Point) -> Option<f64> {
    const TOL: f64 = 1e-12;
    for &t in candidates {
        let tri = mesh.triangles()[t];
        let [a, b, c] = tri.map(|i| mesh.node(i));
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let l1 = ((x[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (x[1] - a[1])) / det;
        let l2 = ((b[0] - a[0]) * (x[1] - a[1]) - (x[0] - a[0]) * (b[1] - a[1])) / det;
        let l0 = 1.0 - l1 - l2;
        if l0 >= -TOL && l1 >= -TOL && l2 >= -TOL {
            return Some(l0 * u[tri[0]] + l1 * u[tri[1]] + l2 * u[tri[2]]);
        }
    }
    None
}

/// `int (grad u . x/|x| - u/|x|)^2` over the triangles between two rings.
fn shell_defect(mesh: &HalfDiscMesh, u: &[f64], outer_ring: usize, inner_ring: Option<usize>) -> f64 {
    let start = mesh.rings()[outer_ring].first_inner_triangle;
    let end = inner_ring.map(|k| mesh.rings()[k].first_inner_triangle).unwrap_or(mesh.triangle_count());
    let parts: Vec<f64> = (start..end)
        .map(|t| {
            let tri = mesh.triangles()[t];
            let p = tri.map(|i| mesh.node(i));
            let g = mesh.gradient(t, u);
            let a = mesh.area(t);
            QUAD7
                .iter()
                .map(|(l, w)| {
                    let x = [0, 1].map(|c| l[0] * p[0][c] + l[1] * p[1][c] + l[2] * p[2][c]);
                    let r = x[0].hypot(x[1]);
                    if r == 0.0 {
                        return 0.0;
                    }
                    let v = l[0] * u[tri[0]] + l[1] * u[tri[1]] + l[2] * u[tri[2]];
                    let d = (g[0] * x[0] + g[1] * x[1]) / r - v / r;
                    w * a * d * d
                })
                .sum()
        })
        .collect();
    pairwise_sum(&parts)
}

fn sorted_radii(radii: &[f64]) -> Result<Vec<f64>> {
    if radii.is_empty() {
        return Err(Error::InvalidParameter("empty radius list".into()));
    }
    let mut r = radii.to_vec();
    r.sort_by(|a, b| b.total_cmp(a));
    r.dedup();
    Ok(r)
}

fn monotonicity_defect(values: &[f64]) -> f64 {
    values.windows(2).map(|w| (w[1] - w[0]).max(0.0)).fold(0.0, f64::max)
}

fn homogeneity_defects(field: &ScalarField, radii: &[f64], x0: Point) -> Vec<f64> {
    let mesh = field.mesh();
    if x0 != [0.0, 0.0] {
        return vec![f64::NAN; radii.len()];
    }
    radii
        .iter()
        .enumerate()
        .map(|(k, &r)| {
            let Some(outer) = mesh.ring_index(r) else { return f64::NAN };
            let inner = match radii.get(k + 1) {
                Some(&next) => mesh.ring_index(next),
                None => mesh.ring_index(r / 2.0),
            };
            shell_defect(mesh, field.values(), outer, inner)
        })
        .collect()
}

/// Weiss energies at decreasing radii around `x0`.
pub fn weiss_profile(field: &ScalarField, spec: &ProblemSpec, x0: Point, radii: &[f64]) -> Result<WeissProfile> {
    let radii = sorted_radii(radii)?;
    let w_values = radii.iter().map(|&r| weiss_energy(field, spec, r, x0)).collect::<Result<Vec<_>>>()?;
    Ok(WeissProfile {
        center: x0,
        homogeneity_defects: homogeneity_defects(field, &radii, x0),
        monotonicity_defect: monotonicity_defect(&w_values),
        h_rel: relative_ring_h(field.mesh(), &radii),
        radii,
        w_values,
        corrected: false,
        kappa_term: Vec::new(),
    })
}

/// `max |v(x)| / |x|` over the nodes away from the origin.
pub fn linear_growth_constant(field: &ScalarField) -> f64 {
    field
        .mesh()
        .nodes()
        .iter()
        .zip(field.values())
        .filter(|(x, _)| x[0] != 0.0 || x[1] != 0.0)
        .map(|(x, v)| v.abs() / x[0].hypot(x[1]))
        .fold(0.0, f64::max)
}

/// `2 C_lin C_g (1 + kappa)^2 pi / (kappa + 2)`.
pub fn correction_constant(spec: &ProblemSpec, c_lin: f64) -> f64 {
    let k = spec.g_exponent;
    2.0 * c_lin * spec.g_coeff * (1.0 + k).powi(2) * PI / (k + 2.0)
}

/// `v = u - g` at the nodes.
pub fn subtract_g(field: &ScalarField, spec: &ProblemSpec) -> Result<ScalarField> {
    let values = field.values().iter().zip(field.mesh().nodes()).map(|(u, &x)| u - spec.g(x)).collect();
    ScalarField::new(Arc::clone(field.mesh()), values)
}

/// Corrected profile
/// `t^-2 (int |grad v|^2 + Lambda chi{v > -g}) - t^-3 int v^2 + C1/kappa t^kappa`
/// for `v = u - g`, centered at the origin. `c_lin` defaults to
/// [`linear_growth_constant`] of `v`.
pub fn corrected_weiss_profile(
    v: &ScalarField,
    spec: &ProblemSpec,
    radii: &[f64],
    c_lin: Option<f64>,
) -> Result<WeissProfile> {
    if spec.g_coeff == 0.0 {
        return Err(Error::GNotSet);
    }
    let radii = sorted_radii(radii)?;
    let mesh = v.mesh();
    let shifted: Vec<f64> = v.values().iter().zip(mesh.nodes()).map(|(a, &x)| a + spec.g(x)).collect();
    let c1 = correction_constant(spec, c_lin.unwrap_or_else(|| linear_growth_constant(v)));
    let kappa = spec.g_exponent;
    let mut w_values = Vec::with_capacity(radii.len());
    let mut kappa_term = Vec::with_capacity(radii.len());
    for &t in &radii {
        let k = if (t - mesh.outer_radius()).abs() <= RING_RTOL * t {
            0
        } else {
            mesh.ring_index(t).ok_or(Error::RegionUnaligned(t))?
        };
        let (sub, offset) = if k == 0 { (mesh.as_ref().clone(), 0) } else { mesh.tail(k)? };
        let vv = &v.values()[offset..];
        let dirichlet = energy_values(&sub, vv, 0.0).dirichlet;
        let phase = energy_values(&sub, &shifted[offset..], 1.0).phase_area_pos;
        let ring = sub.rings()[0];
        let edges: Vec<f64> = (ring.first_node..ring.first_node + ring.node_count - 1)
            .map(|i| {
                let (a, b) = (vv[i], vv[i + 1]);
                sub.edge_length(i, i + 1) * (a * a + a * b + b * b) / 3.0
            })
            .collect();
        let sphere = pairwise_sum(&edges);
        let term = c1 / kappa * t.powf(kappa);
        kappa_term.push(term);
        w_values.push((dirichlet + spec.big_lambda * phase) / (t * t) - sphere / (t * t * t) + term);
    }
    Ok(WeissProfile {
        center: [0.0, 0.0],
        homogeneity_defects: homogeneity_defects(v, &radii, [0.0, 0.0]),
        monotonicity_defect: monotonicity_defect(&w_values),
        h_rel: relative_ring_h(mesh, &radii),
        radii,
        w_values,
        corrected: true,
        kappa_term,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::{weiss_closed_form, GlobalSolution};
    use crate::mesh::build_mesh;

    #[test]
    fn disc_area_of_square() {
        let sq = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];
        assert!((disc_polygon_area(&sq, [0.0, 0.0], 1.0) - PI).abs() < 1e-12);
        assert!((disc_polygon_area(&sq, [0.0, 0.0], 0.5) - PI / 4.0).abs() < 1e-12);
        assert!((disc_polygon_area(&sq, [1.0, 1.0], 1.0) - PI / 4.0).abs() < 1e-12);
        assert!((disc_polygon_area(&sq, [0.0, 0.0], 3.0) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn homogeneous_fields_have_flat_profiles() {
        let mesh = Arc::new(build_mesh(6, 0.5, 64).unwrap());
        let spec = ProblemSpec::default_one_phase();
        for sol in [GlobalSolution::small(spec), GlobalSolution::large(spec)] {
            let v = ScalarField::interpolate_global(mesh.clone(), &sol).unwrap();
            let radii = [1.0, 0.5, 0.25, 0.125];
            let p = weiss_profile(&v, &spec, [0.0, 0.0], &radii).unwrap();
            let spread = p.w_values.iter().fold(0.0f64, |m, w| m.max((w - p.w_values[0]).abs()));
            assert!(spread < 1e-12, "{p:?}");
            // the polygonal domain misses O(n^-2) of the disc
            assert!((p.w_values[0] - weiss_closed_form(&sol).unwrap()).abs() < 1e-3, "{p:?}");
            let h = mesh.h();
            assert!(p.homogeneity_defects.iter().all(|&d| d <= 4.0 * h * h), "{p:?}");
        }
    }

    #[test]
    fn zero_field_profile_vanishes() {
        let mesh = Arc::new(build_mesh(4, 0.5, 16).unwrap());
        let spec = ProblemSpec::default_one_phase();
        let p = weiss_profile(&ScalarField::zeros(mesh), &spec, [0.0, 0.0], &[1.0, 0.5, 0.25]).unwrap();
        assert!(p.w_values.iter().all(|&w| w == 0.0));
    }

    #[test]
    fn offset_center_agrees_with_centered_formula() {
        let mesh = Arc::new(build_mesh(5, 0.5, 48).unwrap());
        let spec = ProblemSpec::default_one_phase();
        let v = ScalarField::interpolate_global(mesh, &GlobalSolution::small(spec)).unwrap();
        // a tiny offset moves the energy only slightly
        let a = weiss_energy(&v, &spec, 0.5, [0.0, 0.0]).unwrap();
        let b = weiss_energy(&v, &spec, 0.5, [0.0, 1e-9]).unwrap();
        assert!((a - b).abs() < 1e-3, "{a} {b}");
    }

    #[test]
    fn errors() {
        let mesh = Arc::new(build_mesh(4, 0.5, 16).unwrap());
        let spec = ProblemSpec::default_one_phase();
        let v = ScalarField::zeros(mesh);
        assert!(matches!(weiss_energy(&v, &spec, 0.3, [0.0, 0.0]), Err(Error::RegionUnaligned(_))));
        assert!(matches!(weiss_energy(&v, &spec, 0.3, [-0.1, 0.0]), Err(Error::CenterOutside(..))));
        assert!(matches!(corrected_weiss_profile(&v, &spec, &[1.0], None), Err(Error::GNotSet)));
    }
}
