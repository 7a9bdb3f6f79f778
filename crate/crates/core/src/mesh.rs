//! Graded conforming triangulations of the upper half-disc.
//!
//! Nodes are laid out ring by ring from the unit arc inwards. The rings of
//! the self-similar stack have radii `q^(j/m)` (with `m` sub-layers per
//! factor `q`, so every `q^k` is a ring), all with the same angular count;
//! polar angles are measured from `+x2` towards `+x1`, node `i` sitting at
//! `phi = i pi / n`. Inside the last stack ring a few coarsening layers
//! halve the angular count before a fan closes the mesh at the origin,
//! which is always the last node.
//!
//! Because node and triangle indices are ring-major, the part of the mesh
//! inside any ring is a contiguous tail of both arrays. Restriction to a
//! ball and exact rescaling by `q^k` are index shifts.

use std::cmp::Ordering;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::closed_form::{eval_global, GlobalSolution, ProblemSpec};
use crate::error::{Error, Result};
use crate::Point;

/// Relative tolerance used when matching a radius against a ring.
pub const RING_RTOL: f64 = 1e-12;
const MIN_ASPECT: f64 = 0.55;
const FAN_MAX_SEGMENTS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeClass {
    Interior,
    /// On the flat boundary `{x1 = 0}`.
    FixedBoundary,
    /// On the unit arc.
    Arc,
    /// `(0, +1)` or `(0, -1)`.
    Corner,
}

impl NodeClass {
    pub fn is_boundary(self) -> bool {
        self != NodeClass::Interior
    }

    fn token(self) -> &'static str {
        match self {
            NodeClass::Interior => "interior",
            NodeClass::FixedBoundary => "fixed",
            NodeClass::Arc => "arc",
            NodeClass::Corner => "corner",
        }
    }

    fn from_token(s: &str) -> Result<Self> {
        Ok(match s {
            "interior" => NodeClass::Interior,
            "fixed" => NodeClass::FixedBoundary,
            "arc" => NodeClass::Arc,
            "corner" => NodeClass::Corner,
            other => return Err(Error::Parse(format!("unknown node class `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshParams {
    /// Number of radii `q^k, k = 0..rings-1` carried by the stack.
    pub rings: usize,
    /// Grading ratio `q`.
    pub ratio: f64,
    /// Requested number of angular segments per ring.
    pub angular_n: usize,
    /// Cap on the triangle count.
    pub max_triangles: usize,
}

impl Default for MeshParams {
    fn default() -> Self {
        Self { rings: 12, ratio: 0.5, angular_n: 64, max_triangles: 4_000_000 }
    }
}

impl MeshParams {
    pub fn new(rings: usize, ratio: f64, angular_n: usize) -> Self {
        Self { rings, ratio, angular_n, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if self.rings < 3 {
            return Err(Error::InvalidParameter(format!("rings must be >= 3, got {}", self.rings)));
        }
        if !(self.ratio > 0.3 && self.ratio < 0.9) {
            return Err(Error::InvalidParameter(format!(
                "ratio must lie in (0.3, 0.9), got {}",
                self.ratio
            )));
        }
        if self.angular_n < 8 {
            return Err(Error::InvalidParameter(format!(
                "angular_n must be >= 8, got {}",
                self.angular_n
            )));
        }
        Ok(())
    }

    /// Sub-layers per grading factor and the angular count actually used.
    ///
    /// The angular count grows past `angular_n` only when a single layer
    /// per factor `q` would be too thin for the requested arc spacing.
    pub fn layer_plan(&self) -> (usize, usize) {
        let log_inv_q = (1.0 / self.ratio).ln();
        let n = self.angular_n;
        let m = ((n as f64 * log_inv_q / PI).round() as usize).max(1);
        let gap = 1.0 - self.ratio.powf(1.0 / m as f64);
        let aspect = gap * n as f64 / PI;
        let n_eff = if aspect < MIN_ASPECT { (MIN_ASPECT * PI / gap).ceil() as usize } else { n };
        (m, n_eff)
    }
}

/// A circle of nodes; node indices `first_node..first_node + node_count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ring {
    pub radius: f64,
    pub first_node: usize,
    pub node_count: usize,
    /// Every triangle with index `>= first_inner_triangle` lies inside the ring.
    pub first_inner_triangle: usize,
    /// Part of the geometric stack (same angular count, constant ratio).
    pub self_similar: bool,
}

#[derive(Debug, Clone)]
pub struct HalfDiscMesh {
    nodes: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    node_class: Vec<NodeClass>,
    rings: Vec<Ring>,
    params: Option<MeshParams>,
    sub_layers: Option<usize>,
    areas: Vec<f64>,
    canonical: Vec<usize>,
    node_tri_start: Vec<usize>,
    node_tri: Vec<usize>,
}

/// Builds the graded mesh for `(rings, q, angular_n)` with the default cap.
pub fn build_mesh(rings: usize, ratio: f64, angular_n: usize) -> Result<HalfDiscMesh> {
    build_mesh_with(MeshParams::new(rings, ratio, angular_n))
}

pub fn build_mesh_with(params: MeshParams) -> Result<HalfDiscMesh> {
    params.validate()?;
    let (m, n) = params.layer_plan();
    let expected = expected_triangle_count(&params);
    if expected > params.max_triangles {
        return Err(Error::BudgetExceeded { count: expected, cap: params.max_triangles });
    }

    let q = params.ratio;
    let stack = (params.rings - 1) * m + 1;
    let mut nodes: Vec<Point> = Vec::new();
    let mut class = Vec::new();
    let mut triangles: Vec<[usize; 3]> = Vec::new();

    let mut ring_starts = Vec::with_capacity(stack);
    for j in 0..stack {
        let (k, s) = (j / m, j % m);
        let radius = q.powi(k as i32) * if s == 0 { 1.0 } else { q.powf(s as f64 / m as f64) };
        ring_starts.push(nodes.len());
        push_ring(&mut nodes, &mut class, radius, n, j == 0);
    }
    for j in 0..stack - 1 {
        let (outer, inner) = (ring_starts[j], ring_starts[j + 1]);
        for i in 0..n {
            let (a0, a1, b0, b1) = (outer + i, outer + i + 1, inner + i, inner + i + 1);
            if 2 * i < n {
                triangles.push([a0, b1, a1]);
                triangles.push([a0, b0, b1]);
            } else {
                triangles.push([a0, b0, a1]);
                triangles.push([a1, b0, b1]);
            }
        }
    }

    // coarsening layers down to a fan at the origin
    let mut radius = q.powi(params.rings as i32 - 1);
    let mut count = n;
    let mut start = ring_starts[stack - 1];
    while count > FAN_MAX_SEGMENTS {
        let next = count.div_ceil(2);
        let shrink = (1.0 - PI / (2.0 * count as f64)) / (1.0 + PI / (2.0 * next as f64));
        let next_radius = radius * shrink;
        let next_start = nodes.len();
        push_ring(&mut nodes, &mut class, next_radius, next, false);
        stitch(&mut triangles, start, count, next_start, next);
        radius = next_radius;
        count = next;
        start = next_start;
    }
    let origin = nodes.len();
    nodes.push([0.0, 0.0]);
    class.push(NodeClass::FixedBoundary);
    for i in 0..count {
        triangles.push([origin, start + i + 1, start + i]);
    }

    for t in triangles.iter_mut() {
        if signed_area(&nodes, *t) < 0.0 {
            t.swap(1, 2);
        }
    }

    let mut mesh = HalfDiscMesh::from_parts(nodes, triangles, class)?;
    mesh.params = Some(params);
    mesh.sub_layers = Some(m);
    Ok(mesh)
}

/// Triangle count that [`build_mesh_with`] produces for `params`.
pub fn expected_triangle_count(params: &MeshParams) -> usize {
    let (m, n) = params.layer_plan();
    let stack = (params.rings.max(1) - 1) * m + 1;
    let mut total = 2 * n * (stack - 1);
    let mut count = n;
    while count > FAN_MAX_SEGMENTS {
        let next = count.div_ceil(2);
        total += count + next;
        count = next;
    }
    total + count
}

fn push_ring(nodes: &mut Vec<Point>, class: &mut Vec<NodeClass>, radius: f64, n: usize, outer: bool) {
    for i in 0..=n {
        let point = if i == 0 {
            [0.0, radius]
        } else if i == n {
            [0.0, -radius]
        } else if 2 * i == n {
            [radius, 0.0]
        } else {
            let phi = i as f64 * PI / n as f64;
            [radius * phi.sin(), radius * phi.cos()]
        };
        nodes.push(point);
        let on_flat = i == 0 || i == n;
        class.push(match (outer, on_flat) {
            (true, true) => NodeClass::Corner,
            (true, false) => NodeClass::Arc,
            (false, true) => NodeClass::FixedBoundary,
            (false, false) => NodeClass::Interior,
        });
    }
}

/// Strip triangulation between two rings with different angular counts.
fn stitch(triangles: &mut Vec<[usize; 3]>, outer: usize, n_out: usize, inner: usize, n_in: usize) {
    let (mut i, mut j) = (0usize, 0usize);
    while i < n_out || j < n_in {
        let advance_outer = if j == n_in {
            true
        } else if i == n_out {
            false
        } else {
            // compare the angular positions of the next nodes: (i+1)/n_out vs (j+1)/n_in
            (i + 1) * n_in <= (j + 1) * n_out
        };
        if advance_outer {
            triangles.push([outer + i, inner + j, outer + i + 1]);
            i += 1;
        } else {
            triangles.push([outer + i, inner + j, inner + j + 1]);
            j += 1;
        }
    }
}

fn signed_area(nodes: &[Point], t: [usize; 3]) -> f64 {
    let [a, b, c] = t.map(|i| nodes[i]);
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn cmp_points(a: &Point, b: &Point) -> Ordering {
    a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1]))
}

impl HalfDiscMesh {
    /// Assembles a mesh from raw arrays, inferring the ring structure when
    /// nodes are stored ring by ring.
    pub fn from_parts(
        nodes: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        node_class: Vec<NodeClass>,
    ) -> Result<Self> {
        if nodes.len() != node_class.len() {
            return Err(Error::Parse("node and class counts differ".into()));
        }
        if nodes.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(Error::Parse("non-finite node coordinate".into()));
        }
        let mut areas = Vec::with_capacity(triangles.len());
        for t in &triangles {
            if t.iter().any(|&i| i >= nodes.len()) {
                return Err(Error::Parse(format!("triangle {t:?} references a missing node")));
            }
            let a = signed_area(&nodes, *t);
            if !(a > 0.0) {
                return Err(Error::Parse(format!("triangle {t:?} is not positively oriented")));
            }
            areas.push(a);
        }

        let mut canonical: Vec<usize> = (0..triangles.len()).collect();
        let keys: Vec<[Point; 3]> = triangles
            .iter()
            .map(|t| {
                let mut k = t.map(|i| nodes[i]);
                k.sort_by(cmp_points);
                k
            })
            .collect();
        canonical.sort_by(|&a, &b| {
            let (ka, kb) = (&keys[a], &keys[b]);
            cmp_points(&ka[0], &kb[0])
                .then(cmp_points(&ka[1], &kb[1]))
                .then(cmp_points(&ka[2], &kb[2]))
        });

        let mut counts = vec![0usize; nodes.len() + 1];
        for t in &triangles {
            for &v in t {
                counts[v + 1] += 1;
            }
        }
        for i in 0..nodes.len() {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut node_tri = vec![0usize; counts[nodes.len()]];
        for (ti, t) in triangles.iter().enumerate() {
            for &v in t {
                node_tri[fill[v]] = ti;
                fill[v] += 1;
            }
        }

        let rings = infer_rings(&nodes, &triangles);
        Ok(Self {
            nodes,
            triangles,
            node_class,
            rings,
            params: None,
            sub_layers: None,
            areas,
            canonical,
            node_tri_start: counts,
            node_tri,
        })
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> Point {
        self.nodes[i]
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn node_classes(&self) -> &[NodeClass] {
        &self.node_class
    }

    pub fn class(&self, i: usize) -> NodeClass {
        self.node_class[i]
    }

    pub fn rings(&self) -> &[Ring] {
        &self.rings
    }

    pub fn params(&self) -> Option<&MeshParams> {
        self.params.as_ref()
    }

    /// Stack sub-layers per grading factor, when the mesh was built here.
    pub fn sub_layers(&self) -> Option<usize> {
        self.sub_layers
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn area(&self, t: usize) -> f64 {
        self.areas[t]
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn total_area(&self) -> f64 {
        crate::functional::pairwise_sum(&self.canonical.iter().map(|&t| self.areas[t]).collect::<Vec<_>>())
    }

    /// Triangle indices sorted by their vertex coordinates.
    pub fn canonical_order(&self) -> &[usize] {
        &self.canonical
    }

    pub fn triangles_of_node(&self, i: usize) -> &[usize] {
        &self.node_tri[self.node_tri_start[i]..self.node_tri_start[i + 1]]
    }

    pub fn origin_index(&self) -> Option<usize> {
        self.nodes.iter().rposition(|p| p[0] == 0.0 && p[1] == 0.0)
    }

    pub fn free_nodes(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| !self.node_class[i].is_boundary()).collect()
    }

    /// Radius of the outer boundary arc.
    pub fn outer_radius(&self) -> f64 {
        self.rings.first().map(|r| r.radius).unwrap_or_else(|| {
            self.nodes.iter().map(|p| p[0].hypot(p[1])).fold(0.0, f64::max)
        })
    }

    /// Unique undirected edges, sorted.
    pub fn edges(&self) -> Vec<[usize; 2]> {
        let mut edges: Vec<[usize; 2]> = self
            .triangles
            .iter()
            .flat_map(|t| [[t[0], t[1]], [t[1], t[2]], [t[2], t[0]]])
            .map(|[a, b]| if a < b { [a, b] } else { [b, a] })
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    pub fn edge_length(&self, a: usize, b: usize) -> f64 {
        let (p, q) = (self.nodes[a], self.nodes[b]);
        (p[0] - q[0]).hypot(p[1] - q[1])
    }

    /// Longest edge of triangle `t`.
    pub fn diameter(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        self.edge_length(a, b).max(self.edge_length(b, c)).max(self.edge_length(c, a))
    }

    /// Mesh size: the longest edge in the mesh.
    pub fn h(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.diameter(t)).fold(0.0, f64::max)
    }

    /// Shortest edge in the mesh.
    pub fn h_min(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.triangles[t];
                self.edge_length(a, b).min(self.edge_length(b, c)).min(self.edge_length(c, a))
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Shortest edge touching ring `k`.
    pub fn ring_h_min(&self, k: usize) -> f64 {
        let ring = &self.rings[k];
        let range = ring.first_node..ring.first_node + ring.node_count;
        let mut h = f64::INFINITY;
        for i in range.clone() {
            for &t in self.triangles_of_node(i) {
                let tri = self.triangles[t];
                for e in 0..3 {
                    let (a, b) = (tri[e], tri[(e + 1) % 3]);
                    if a == i || b == i {
                        h = h.min(self.edge_length(a, b));
                    }
                }
            }
        }
        h
    }

    /// Smallest interior angle over all triangles, in degrees.
    pub fn min_angle_deg(&self) -> f64 {
        let mut min = f64::INFINITY;
        for t in &self.triangles {
            let p = t.map(|i| self.nodes[i]);
            for k in 0..3 {
                let (a, b, c) = (p[k], p[(k + 1) % 3], p[(k + 2) % 3]);
                let u = [b[0] - a[0], b[1] - a[1]];
                let v = [c[0] - a[0], c[1] - a[1]];
                let cos = (u[0] * v[0] + u[1] * v[1]) / (u[0].hypot(u[1]) * v[0].hypot(v[1]));
                min = min.min(cos.clamp(-1.0, 1.0).acos().to_degrees());
            }
        }
        min
    }

    /// Gradient of the linear interpolant of `values` on triangle `t`.
    pub fn gradient(&self, t: usize, values: &[f64]) -> [f64; 2] {
        let [i, j, k] = self.triangles[t];
        let (a, b, c) = (self.nodes[i], self.nodes[j], self.nodes[k]);
        let two_area = 2.0 * self.areas[t];
        let (u0, u1, u2) = (values[i], values[j], values[k]);
        let gx = (u0 * (b[1] - c[1]) + u1 * (c[1] - a[1]) + u2 * (a[1] - b[1])) / two_area;
        let gy = (u0 * (c[0] - b[0]) + u1 * (a[0] - c[0]) + u2 * (b[0] - a[0])) / two_area;
        [gx, gy]
    }

    /// Gradients of the three hat functions of triangle `t`.
    pub fn shape_gradients(&self, t: usize) -> [[f64; 2]; 3] {
        let [i, j, k] = self.triangles[t];
        let (a, b, c) = (self.nodes[i], self.nodes[j], self.nodes[k]);
        let two_area = 2.0 * self.areas[t];
        [
            [(b[1] - c[1]) / two_area, (c[0] - b[0]) / two_area],
            [(c[1] - a[1]) / two_area, (a[0] - c[0]) / two_area],
            [(a[1] - b[1]) / two_area, (b[0] - a[0]) / two_area],
        ]
    }

    /// Index of the ring whose radius matches `r`.
    pub fn ring_index(&self, r: f64) -> Option<usize> {
        self.rings.iter().position(|ring| (ring.radius - r).abs() <= RING_RTOL * r.abs().max(1.0))
    }

    /// Barycentric location of `x`; `None` outside the mesh.
    pub fn locate(&self, x: Point) -> Option<(usize, [f64; 3])> {
        const TOL: f64 = 1e-12;
        for (t, tri) in self.triangles.iter().enumerate() {
            let [a, b, c] = tri.map(|i| self.nodes[i]);
            let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
            let l1 = ((x[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (x[1] - a[1])) / det;
            let l2 = ((b[0] - a[0]) * (x[1] - a[1]) - (x[0] - a[0]) * (b[1] - a[1])) / det;
            let l0 = 1.0 - l1 - l2;
            if l0 >= -TOL && l1 >= -TOL && l2 >= -TOL {
                return Some((t, [l0, l1, l2]));
            }
        }
        None
    }

    /// The part of the mesh inside ring `k`, plus the node offset.
    pub fn tail(&self, k: usize) -> Result<(HalfDiscMesh, usize)> {
        let ring = *self.rings.get(k).ok_or(Error::UnalignedRadius(f64::NAN))?;
        let offset = ring.first_node;
        let nodes = self.nodes[offset..].to_vec();
        let triangles: Vec<[usize; 3]> = self.triangles[ring.first_inner_triangle..]
            .iter()
            .map(|t| t.map(|i| i - offset))
            .collect();
        let last_ring = ring.node_count - 1;
        let class = (0..nodes.len())
            .map(|i| {
                let old = self.node_class[i + offset];
                if i < ring.node_count {
                    if i == 0 || i == last_ring {
                        NodeClass::Corner
                    } else {
                        NodeClass::Arc
                    }
                } else if old == NodeClass::Interior {
                    NodeClass::Interior
                } else {
                    NodeClass::FixedBoundary
                }
            })
            .collect();
        let mut sub = HalfDiscMesh::from_parts(nodes, triangles, class)?;
        sub.sub_layers = self.sub_layers;
        Ok((sub, offset))
    }

    /// Mesh with every coordinate multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Result<HalfDiscMesh> {
        let nodes = self.nodes.iter().map(|p| [p[0] * s, p[1] * s]).collect();
        let mut out = HalfDiscMesh::from_parts(nodes, self.triangles.clone(), self.node_class.clone())?;
        out.sub_layers = self.sub_layers;
        Ok(out)
    }

    /// Writes the `halfdisc-mesh v1` text format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("halfdisc-mesh v1\n");
        let _ = writeln!(out, "nodes {}", self.nodes.len());
        for (p, c) in self.nodes.iter().zip(&self.node_class) {
            let _ = writeln!(out, "{:.16e} {:.16e} {}", p[0], p[1], c.token());
        }
        let _ = writeln!(out, "tris {}", self.triangles.len());
        for t in &self.triangles {
            let _ = writeln!(out, "{} {} {}", t[0], t[1], t[2]);
        }
        out
    }

    /// Parses the `halfdisc-mesh v1` text format.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let mut next = |what: &str| lines.next().ok_or_else(|| Error::Parse(format!("missing {what}")));
        if next("header")?.trim() != "halfdisc-mesh v1" {
            return Err(Error::Parse("expected header `halfdisc-mesh v1`".into()));
        }
        let count = |line: &str, key: &str| -> Result<usize> {
            let mut it = line.split_whitespace();
            match (it.next(), it.next(), it.next()) {
                (Some(k), Some(n), None) if k == key => {
                    n.parse().map_err(|_| Error::Parse(format!("bad {key} count `{n}`")))
                }
                _ => Err(Error::Parse(format!("expected `{key} <count>`, got `{line}`"))),
            }
        };
        let n_nodes = count(next("node count")?, "nodes")?;
        let mut nodes = Vec::with_capacity(n_nodes);
        let mut classes = Vec::with_capacity(n_nodes);
        for _ in 0..n_nodes {
            let line = next("node line")?;
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(Error::Parse(format!("bad node line `{line}`")));
            }
            let x: f64 = parts[0].parse().map_err(|_| Error::Parse(format!("bad coordinate `{}`", parts[0])))?;
            let y: f64 = parts[1].parse().map_err(|_| Error::Parse(format!("bad coordinate `{}`", parts[1])))?;
            nodes.push([x, y]);
            classes.push(NodeClass::from_token(parts[2])?);
        }
        let n_tris = count(next("triangle count")?, "tris")?;
        let mut tris = Vec::with_capacity(n_tris);
        for _ in 0..n_tris {
            let line = next("triangle line")?;
            let idx: Vec<usize> = line
                .split_whitespace()
                .map(|s| s.parse().map_err(|_| Error::Parse(format!("bad index `{s}`"))))
                .collect::<Result<_>>()?;
            if idx.len() != 3 {
                return Err(Error::Parse(format!("bad triangle line `{line}`")));
            }
            tris.push([idx[0], idx[1], idx[2]]);
        }
        HalfDiscMesh::from_parts(nodes, tris, classes)
    }
}

fn infer_rings(nodes: &[Point], triangles: &[[usize; 3]]) -> Vec<Ring> {
    if nodes.len() < 2 {
        return Vec::new();
    }
    let last = nodes.len() - 1;
    if nodes[last] != [0.0, 0.0] {
        return Vec::new();
    }
    let radius = |p: &Point| p[0].hypot(p[1]);
    let mut groups: Vec<(usize, usize, f64)> = Vec::new();
    let mut i = 0;
    while i < last {
        let r = radius(&nodes[i]);
        let start = i;
        while i < last && (radius(&nodes[i]) - r).abs() <= 1e-12 * r {
            i += 1;
        }
        if let Some(prev) = groups.last() {
            if !(r < prev.2) {
                return Vec::new();
            }
        }
        // first node of a ring sits at (0, r)
        if nodes[start][0] != 0.0 {
            return Vec::new();
        }
        groups.push((start, i - start, r));
    }

    let mut suffix_min = vec![usize::MAX; triangles.len() + 1];
    for t in (0..triangles.len()).rev() {
        let m = triangles[t].iter().copied().min().unwrap_or(usize::MAX);
        suffix_min[t] = suffix_min[t + 1].min(m);
    }

    let base_count = groups[0].1;
    let base_ratio = groups.get(1).map(|g| g.2 / groups[0].2);
    let mut similar = true;
    groups
        .iter()
        .enumerate()
        .map(|(k, &(first_node, node_count, radius))| {
            let first_inner_triangle =
                suffix_min.iter().position(|&m| m >= first_node).unwrap_or(triangles.len());
            if k > 0 {
                let ratio = radius / groups[k - 1].2;
                let same_ratio = base_ratio.map(|b| (ratio - b).abs() <= 1e-9).unwrap_or(false);
                similar = similar && node_count == base_count && same_ratio;
            }
            Ring { radius, first_node, node_count, first_inner_triangle, self_similar: similar }
        })
        .collect()
}

/// Nodal values of a piecewise-linear function on a mesh.
#[derive(Debug, Clone)]
pub struct ScalarField {
    mesh: Arc<HalfDiscMesh>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(mesh: Arc<HalfDiscMesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.node_count() {
            return Err(Error::InvalidParameter(format!(
                "field has {} values for {} nodes",
                values.len(),
                mesh.node_count()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite value at node {i}")));
        }
        Ok(Self { mesh, values })
    }

    pub fn zeros(mesh: Arc<HalfDiscMesh>) -> Self {
        let n = mesh.node_count();
        Self { mesh, values: vec![0.0; n] }
    }

    pub fn from_fn(mesh: Arc<HalfDiscMesh>, f: impl Fn(Point) -> f64) -> Result<Self> {
        let values = mesh.nodes().iter().map(|&p| f(p)).collect();
        Self::new(mesh, values)
    }

    /// Nodal interpolant of `v_S` or `v_L`.
    pub fn interpolate_global(mesh: Arc<HalfDiscMesh>, sol: &GlobalSolution) -> Result<Self> {
        let values = mesh.nodes().iter().map(|&p| eval_global(sol, p)).collect::<Result<Vec<_>>>()?;
        Self::new(mesh, values)
    }

    pub fn mesh(&self) -> &Arc<HalfDiscMesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn same_mesh(&self, other: &ScalarField) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh)
            || (self.mesh.nodes == other.mesh.nodes && self.mesh.triangles == other.mesh.triangles)
    }

    /// Value of the piecewise-linear interpolant at `x`.
    pub fn eval(&self, x: Point) -> Option<f64> {
        let (t, l) = self.mesh.locate(x)?;
        let tri = self.mesh.triangles()[t];
        Some(l[0] * self.values[tri[0]] + l[1] * self.values[tri[1]] + l[2] * self.values[tri[2]])
    }

    pub fn max_abs_diff(&self, other: &ScalarField) -> Result<f64> {
        if !self.same_mesh(other) {
            return Err(Error::MeshMismatch);
        }
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }
}

/// Restricts a field to `B_r^+`, `r` matching a ring radius.
pub fn restrict_to_ball(field: &ScalarField, r: f64) -> Result<ScalarField> {
    let mesh = field.mesh();
    let k = mesh.ring_index(r).ok_or(Error::UnalignedRadius(r))?;
    if k == 0 {
        return Ok(field.clone());
    }
    let (sub, offset) = mesh.tail(k)?;
    ScalarField::new(Arc::new(sub), field.values[offset..].to_vec())
}

/// Datum imposed on the unit arc.
#[derive(Clone)]
pub enum OuterDatum {
    /// `v_S + g`.
    SmallTrace,
    /// `v_L + g`.
    LargeTrace,
    Custom(Arc<dyn Fn(Point) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for OuterDatum {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OuterDatum::SmallTrace => f.write_str("SmallTrace"),
            OuterDatum::LargeTrace => f.write_str("LargeTrace"),
            OuterDatum::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// Dirichlet values on every boundary node; entries at interior nodes are 0.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    pub values: Vec<f64>,
}

impl BoundaryData {
    /// Boundary data `f` on all boundary nodes, no consistency checks.
    pub fn from_fn(mesh: &HalfDiscMesh, f: impl Fn(Point) -> f64) -> Self {
        let values = (0..mesh.node_count())
            .map(|i| if mesh.class(i).is_boundary() { f(mesh.node(i)) } else { 0.0 })
            .collect();
        Self { values }
    }

    pub fn zeros(mesh: &HalfDiscMesh) -> Self {
        Self { values: vec![0.0; mesh.node_count()] }
    }
}

/// Corner agreement tolerance for [`boundary_trace`].
pub const CORNER_TOL: f64 = 1e-12;

/// Fixed-boundary datum on `{x1 = 0}` and the chosen outer datum on the arc.
pub fn boundary_trace(mesh: &HalfDiscMesh, spec: &ProblemSpec, outer: &OuterDatum) -> Result<BoundaryData> {
    let outer_value = |x: Point| -> Result<f64> {
        Ok(match outer {
            OuterDatum::SmallTrace => eval_global(&GlobalSolution::small(*spec), x)? + spec.g(x),
            OuterDatum::LargeTrace => eval_global(&GlobalSolution::large(*spec), x)? + spec.g(x),
            OuterDatum::Custom(f) => f(x),
        })
    };
    let mut values = vec![0.0; mesh.node_count()];
    for (i, value) in values.iter_mut().enumerate() {
        let x = mesh.node(i);
        *value = match mesh.class(i) {
            NodeClass::Interior => 0.0,
            NodeClass::FixedBoundary => spec.fixed_datum(x),
            NodeClass::Arc => outer_value(x)?,
            NodeClass::Corner => {
                let fixed = spec.fixed_datum(x);
                let arc = outer_value(x)?;
                let mismatch = (fixed - arc).abs();
                if mismatch > CORNER_TOL {
                    return Err(Error::TraceMismatch { x1: x[0], x2: x[1], mismatch });
                }
                fixed
            }
        };
    }
    Ok(BoundaryData { values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::derive_params;

    #[test]
    fn small_mesh_rings_and_origin() {
        let mesh = build_mesh(3, 0.5, 8).unwrap();
        for r in [1.0, 0.5, 0.25] {
            assert!(mesh.ring_index(r).is_some(), "missing ring {r}");
        }
        assert_eq!(mesh.origin_index(), Some(mesh.node_count() - 1));
        assert_eq!(mesh.class(mesh.node_count() - 1), NodeClass::FixedBoundary);
        let corners: Vec<Point> = (0..mesh.node_count())
            .filter(|&i| mesh.class(i) == NodeClass::Corner)
            .map(|i| mesh.node(i))
            .collect();
        assert_eq!(corners, vec![[0.0, 1.0], [0.0, -1.0]]);
        assert_eq!(mesh.triangle_count(), expected_triangle_count(&MeshParams::new(3, 0.5, 8)));
    }

    #[test]
    fn boundary_nodes_exact() {
        let mesh = build_mesh(4, 0.5, 16).unwrap();
        for i in 0..mesh.node_count() {
            let p = mesh.node(i);
            match mesh.class(i) {
                NodeClass::FixedBoundary | NodeClass::Corner => assert_eq!(p[0], 0.0),
                NodeClass::Arc => assert!((p[0].hypot(p[1]) - 1.0).abs() <= 2.0 * f64::EPSILON),
                NodeClass::Interior => assert!(p[0] > 0.0),
            }
        }
    }

    #[test]
    fn deterministic_build() {
        let a = build_mesh(5, 0.6, 12).unwrap();
        let b = build_mesh(5, 0.6, 12).unwrap();
        let bits = |m: &HalfDiscMesh| m.nodes().iter().flat_map(|p| [p[0].to_bits(), p[1].to_bits()]).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert_eq!(a.triangles(), b.triangles());
    }

    #[test]
    fn budget_cap() {
        let params = MeshParams { max_triangles: 100, ..MeshParams::new(6, 0.5, 64) };
        assert!(matches!(build_mesh_with(params), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn rejects_bad_params() {
        assert!(build_mesh(2, 0.5, 16).is_err());
        assert!(build_mesh(4, 0.95, 16).is_err());
        assert!(build_mesh(4, 0.5, 6).is_err());
    }

    #[test]
    fn euler_characteristic_is_one() {
        for (r, q, n) in [(3, 0.5, 8), (6, 0.4, 20), (4, 0.85, 9)] {
            let mesh = build_mesh(r, q, n).unwrap();
            let v = mesh.node_count() as i64;
            let e = mesh.edges().len() as i64;
            let f = mesh.triangle_count() as i64;
            assert_eq!(v - e + f, 1, "params {r} {q} {n}");
        }
    }

    #[test]
    fn flat_edges_join_flat_nodes() {
        let mesh = build_mesh(5, 0.5, 16).unwrap();
        for [a, b] in mesh.edges() {
            let (p, q) = (mesh.node(a), mesh.node(b));
            if p[0] == 0.0 && q[0] == 0.0 {
                for i in [a, b] {
                    assert!(matches!(mesh.class(i), NodeClass::FixedBoundary | NodeClass::Corner));
                }
            }
        }
    }

    #[test]
    fn area_converges_to_half_disc() {
        for n in [16, 32, 64] {
            let mesh = build_mesh(4, 0.5, n).unwrap();
            let inscribed = 0.5 * n as f64 * (PI / n as f64).sin();
            assert!((mesh.total_area() - inscribed).abs() < 1e-12);
            let err = PI / 2.0 - mesh.total_area();
            assert!(err > 0.0 && err <= PI.powi(3) / (12.0 * (n * n) as f64));
        }
    }

    #[test]
    fn conforming_interior_edges() {
        let mesh = build_mesh(5, 0.5, 16).unwrap();
        let mut count = std::collections::HashMap::new();
        for t in mesh.triangles() {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *count.entry(if a < b { (a, b) } else { (b, a) }).or_insert(0) += 1;
            }
        }
        for (&(a, b), &c) in &count {
            let boundary_edge = (mesh.class(a).is_boundary() && mesh.class(b).is_boundary())
                && (mesh.node(a)[0] == 0.0 && mesh.node(b)[0] == 0.0
                    || matches!(mesh.class(a), NodeClass::Arc | NodeClass::Corner)
                        && matches!(mesh.class(b), NodeClass::Arc | NodeClass::Corner));
            assert_eq!(c, if boundary_edge { 1 } else { 2 }, "edge ({a},{b})");
        }
    }

    #[test]
    fn restrict_examples() {
        let mesh = Arc::new(build_mesh(4, 0.5, 16).unwrap());
        let field = ScalarField::from_fn(mesh.clone(), |p| p[0] + 2.0 * p[1]).unwrap();
        let same = restrict_to_ball(&field, 1.0).unwrap();
        assert_eq!(same.values(), field.values());
        let sub = restrict_to_ball(&field, 0.5).unwrap();
        assert!(sub.mesh().triangle_count() < mesh.triangle_count());
        for (i, p) in sub.mesh().nodes().iter().enumerate() {
            assert_eq!(sub.values()[i], p[0] + 2.0 * p[1]);
            assert!(p[0].hypot(p[1]) <= 0.5 * (1.0 + 1e-12));
        }
        assert!(matches!(restrict_to_ball(&field, 0.3), Err(Error::UnalignedRadius(_))));
    }

    #[test]
    fn text_roundtrip_is_bit_exact() {
        let mesh = build_mesh(4, 0.55, 12).unwrap();
        let text = mesh.to_text();
        assert!(text.starts_with("halfdisc-mesh v1\nnodes "));
        let back = HalfDiscMesh::from_text(&text).unwrap();
        assert_eq!(back.triangles(), mesh.triangles());
        assert_eq!(back.node_classes(), mesh.node_classes());
        for (a, b) in back.nodes().iter().zip(mesh.nodes()) {
            assert_eq!(a[0].to_bits(), b[0].to_bits());
            assert_eq!(a[1].to_bits(), b[1].to_bits());
        }
        assert_eq!(back.rings(), mesh.rings());
        assert!(HalfDiscMesh::from_text("halfdisc-mesh v2\n").is_err());
    }

    #[test]
    fn trace_examples() {
        let mesh = build_mesh(4, 0.5, 16).unwrap();
        let spec = ProblemSpec::default_one_phase();
        let data = boundary_trace(&mesh, &spec, &OuterDatum::SmallTrace).unwrap();
        let at = |x: Point| mesh.nodes().iter().position(|&p| (p[0] - x[0]).abs() < 1e-14 && (p[1] - x[1]).abs() < 1e-14).unwrap();
        assert_eq!(data.values[at([0.0, 1.0])], 1.0);
        assert_eq!(data.values[at([0.0, -1.0])], 0.0);

        let g_spec = derive_params(1.0, 0.0, 2f64.sqrt(), 0.0, 0.1, 0.5).unwrap();
        let data = boundary_trace(&mesh, &g_spec, &OuterDatum::SmallTrace).unwrap();
        let expected = 0.25 + 0.1 * 0.25f64.powf(1.5);
        assert!((data.values[at([0.0, 0.25])] - expected).abs() < 1e-15);

        let data = boundary_trace(&mesh, &spec, &OuterDatum::LargeTrace).unwrap();
        let diag = mesh
            .nodes()
            .iter()
            .position(|p| (p[0] - 0.5f64.sqrt()).abs() < 1e-12 && (p[1] - 0.5f64.sqrt()).abs() < 1e-12)
            .unwrap();
        assert!((data.values[diag] - 2f64.sqrt()).abs() < 1e-12);

        let bad = OuterDatum::Custom(Arc::new(|_| 5.0));
        assert!(matches!(boundary_trace(&mesh, &spec, &bad), Err(Error::TraceMismatch { .. })));
    }

    #[test]
    fn locate_and_eval() {
        let mesh = Arc::new(build_mesh(4, 0.5, 16).unwrap());
        let field = ScalarField::from_fn(mesh, |p| 3.0 * p[0] - p[1] + 0.5).unwrap();
        for x in [[0.3, 0.2], [0.01, -0.6], [0.7, 0.0]] {
            let v = field.eval(x).unwrap();
            assert!((v - (3.0 * x[0] - x[1] + 0.5)).abs() < 1e-12);
        }
        assert!(field.eval([2.0, 0.0]).is_none());
    }
}
