//! The free boundary `d{u > 0}` of a piecewise-linear field and the
//! geometric diagnostics computed from it.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::closed_form::{cone_contains, Cone, ProblemSpec};
use crate::error::{Error, Result};
use crate::mesh::{HalfDiscMesh, NodeClass, ScalarField, RING_RTOL};
use crate::Point;

/// Polar angle measured from `+x2` towards `+x1`, in `[0, pi]`.
pub fn polar_angle(x: Point) -> f64 {
    x[0].atan2(x[1])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FbPoint {
    pub x: Point,
    pub r: f64,
    pub phi: f64,
    /// On the flat boundary `{x1 = 0}`.
    pub contact: bool,
}

impl FbPoint {
    fn new(x: Point) -> Self {
        Self { x, r: x[0].hypot(x[1]), phi: polar_angle(x), contact: x[0] == 0.0 }
    }
}

/// One straight piece of the free boundary, cut out of a single triangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: Point,
    pub b: Point,
    pub triangle: usize,
    pub component: usize,
}

impl Segment {
    pub fn length(&self) -> f64 {
        (self.b[0] - self.a[0]).hypot(self.b[1] - self.a[1])
    }

    pub fn midpoint(&self) -> Point {
        [0.5 * (self.a[0] + self.b[0]), 0.5 * (self.a[1] + self.b[1])]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    /// Polyline vertices, starting at the end nearer the origin.
    pub points: Vec<FbPoint>,
    pub length: f64,
    pub closed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeBoundaryCurve {
    /// Sorted by decreasing length.
    pub components: Vec<Component>,
    pub segments: Vec<Segment>,
    /// Sign changes located on `{x1 = 0}`.
    pub contact_points: Vec<Point>,
    /// No free boundary inside the domain.
    pub empty: bool,
    /// More than one component, or a branching point.
    pub multi_component: bool,
}

impl FreeBoundaryCurve {
    pub fn points(&self) -> impl Iterator<Item = &FbPoint> {
        self.components.iter().flat_map(|c| c.points.iter())
    }

    pub fn length(&self) -> f64 {
        self.components.iter().map(|c| c.length).sum()
    }

    /// Distance from `x` to the nearest segment.
    pub fn distance(&self, x: Point) -> f64 {
        self.segments.iter().map(|s| point_segment_distance(x, s.a, s.b)).fold(f64::INFINITY, f64::min)
    }

    /// CSV with columns `component,index,x1,x2,r,phi`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["component", "index", "x1", "x2", "r", "phi"]).map_err(io)?;
        for (c, comp) in self.components.iter().enumerate() {
            for (i, p) in comp.points.iter().enumerate() {
                w.serialize((c, i, p.x[0], p.x[1], p.r, p.phi)).map_err(io)?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }
}

pub fn point_segment_distance(x: Point, a: Point, b: Point) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 == 0.0 { 0.0 } else { (((x[0] - a[0]) * d[0] + (x[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0) };
    (x[0] - a[0] - t * d[0]).hypot(x[1] - a[1] - t * d[1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Key {
    Vertex(usize),
    Edge(usize, usize),
}

fn on_arc(class: NodeClass) -> bool {
    matches!(class, NodeClass::Arc | NodeClass::Corner)
}

/// Free boundary of `field`: the boundary of `{u > 0}` inside the domain.
pub fn extract(field: &ScalarField, _spec: &ProblemSpec) -> FreeBoundaryCurve {
    extract_field(field)
}

pub fn extract_field(field: &ScalarField) -> FreeBoundaryCurve {
    let mesh = field.mesh();
    let u = field.values();
    let pos = |i: usize| u[i] > 0.0;

    let key_point = |k: Key| -> Point {
        match k {
            Key::Vertex(i) => mesh.node(i),
            Key::Edge(a, b) => {
                let (pa, pb) = (mesh.node(a), mesh.node(b));
                let s = u[a] / (u[a] - u[b]);
                [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])]
            }
        }
    };
    let key_on_flat = |k: Key| match k {
        Key::Vertex(i) => mesh.node(i)[0] == 0.0,
        Key::Edge(a, b) => mesh.node(a)[0] == 0.0 && mesh.node(b)[0] == 0.0,
    };
    let key_on_arc = |k: Key| match k {
        Key::Vertex(i) => on_arc(mesh.class(i)),
        Key::Edge(a, b) => on_arc(mesh.class(a)) && on_arc(mesh.class(b)),
    };

    let mut raw: Vec<(Key, Key, usize)> = Vec::new();
    let mut contact: BTreeMap<Key, Point> = BTreeMap::new();
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let signs = tri.map(pos);
        if signs.iter().all(|&s| s) || signs.iter().all(|&s| !s) {
            continue;
        }
        let mut keys = Vec::with_capacity(2);
        for e in 0..3 {
            let (a, b) = (tri[e], tri[(e + 1) % 3]);
            if signs[e] == signs[(e + 1) % 3] {
                continue;
            }
            let neg = if signs[e] { b } else { a };
            let key = if u[neg] == 0.0 { Key::Vertex(neg) } else { Key::Edge(a.min(b), a.max(b)) };
            if key_on_flat(key) {
                contact.insert(key, key_point(key));
            }
            keys.push(key);
        }
        let (k0, k1) = (keys[0], keys[1]);
        if k0 == k1 {
            continue;
        }
        let (p0, p1) = (key_point(k0), key_point(k1));
        if p0 == p1 || (key_on_flat(k0) && key_on_flat(k1)) || (key_on_arc(k0) && key_on_arc(k1)) {
            continue;
        }
        raw.push((k0.min(k1), k0.max(k1), t));
    }
    raw.sort();
    raw.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);

    // chain segments into polylines
    let mut adj: HashMap<Key, Vec<usize>> = HashMap::new();
    for (s, &(a, b, _)) in raw.iter().enumerate() {
        adj.entry(a).or_default().push(s);
        adj.entry(b).or_default().push(s);
    }
    let branching = adj.values().any(|v| v.len() > 2);
    let mut used = vec![false; raw.len()];
    let mut chains: Vec<(Vec<Key>, Vec<usize>, bool)> = Vec::new();
    let mut starts: Vec<Key> = adj.iter().filter(|(_, v)| v.len() == 1).map(|(k, _)| *k).collect();
    starts.sort();
    let all_keys: Vec<Key> = {
        let mut k: Vec<Key> = adj.keys().copied().collect();
        k.sort();
        k
    };
    for start in starts.into_iter().chain(all_keys) {
        while let Some(&s0) = adj[&start].iter().find(|&&s| !used[s]) {
            let mut keys = vec![start];
            let mut segs = Vec::new();
            let mut cur = start;
            let mut next_seg = Some(s0);
            while let Some(s) = next_seg {
                used[s] = true;
                segs.push(s);
                let (a, b, _) = raw[s];
                cur = if a == cur { b } else { a };
                keys.push(cur);
                next_seg = adj[&cur].iter().copied().find(|&s| !used[s]);
            }
            let closed = keys.len() > 2 && keys.first() == keys.last();
            chains.push((keys, segs, closed));
        }
    }

    let mut components: Vec<(Component, Vec<usize>)> = chains
        .into_iter()
        .map(|(keys, segs, closed)| {
            let mut points: Vec<FbPoint> = keys.iter().map(|&k| FbPoint::new(key_point(k))).collect();
            let mut segs = segs;
            if points.last().map(|p| p.r).unwrap_or(0.0) < points[0].r {
                points.reverse();
                segs.reverse();
            }
            let length = points.windows(2).map(|w| (w[1].x[0] - w[0].x[0]).hypot(w[1].x[1] - w[0].x[1])).sum();
            (Component { points, length, closed }, segs)
        })
        .collect();
    components.sort_by(|a, b| {
        b.0.length.total_cmp(&a.0.length).then_with(|| a.0.points[0].x[0].total_cmp(&b.0.points[0].x[0]))
    });

    let mut segments = Vec::with_capacity(raw.len());
    for (c, (_, segs)) in components.iter().enumerate() {
        for &s in segs {
            let (a, b, t) = raw[s];
            segments.push(Segment { a: key_point(a), b: key_point(b), triangle: t, component: c });
        }
    }
    let components: Vec<Component> = components.into_iter().map(|c| c.0).collect();
    FreeBoundaryCurve {
        empty: components.is_empty(),
        multi_component: components.len() > 1 || branching,
        components,
        segments,
        contact_points: contact.into_values().collect(),
    }
}

/// Radii `2^-k` of the dyadic annuli `[rho, 2 rho]` covered by the mesh rings.
pub fn dyadic_radii(mesh: &HalfDiscMesh) -> Vec<f64> {
    let smallest = mesh.rings().last().map(|r| r.radius).unwrap_or(1.0);
    let mut out = Vec::new();
    let mut rho = 0.5 * mesh.outer_radius();
    while rho >= smallest * (1.0 - RING_RTOL) {
        out.push(rho);
        rho *= 0.5;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NtMode {
    /// The free boundary meets the cone in every annulus.
    Strong,
    /// Some node in the cone and annulus has `|u| <= C rho`.
    Weak(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NtReport {
    /// `(rho, passed)` for each annulus `[rho, 2 rho]`.
    pub annuli: Vec<(f64, bool)>,
    pub verdict: bool,
}

/// Non-tangentiality test with the cone `{x1 > delta |x2|}`.
pub fn nt_check(curve: &FreeBoundaryCurve, field: &ScalarField, delta: f64, mode: NtMode) -> Result<NtReport> {
    let cone = Cone::non_tangential(delta, [0.0, 0.0])?;
    let mesh = field.mesh();
    let annuli: Vec<(f64, bool)> = dyadic_radii(mesh)
        .into_iter()
        .map(|rho| {
            let inside = |x: Point| {
                let r = x[0].hypot(x[1]);
                r >= rho && r <= 2.0 * rho && cone_contains(&cone, x)
            };
            let hit = match mode {
                NtMode::Strong => curve.segments.iter().any(|s| inside(s.a) || inside(s.b) || inside(s.midpoint())),
                NtMode::Weak(c) => mesh
                    .nodes()
                    .iter()
                    .zip(field.values())
                    .any(|(&x, &v)| inside(x) && v.abs() <= c * rho),
            };
            (rho, hit)
        })
        .collect();
    let verdict = annuli.iter().all(|a| a.1);
    Ok(NtReport { annuli, verdict })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    /// Near the ray of `v_S`, in `{x2 > 0}`.
    SmallSide,
    /// Near the ray of `v_L`, in `{x2 < 0}`.
    LargeSide,
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnulusAngles {
    pub r: f64,
    pub count: usize,
    pub phi_min: f64,
    pub phi_max: f64,
    pub phi_mean: f64,
    /// Largest angular deviation from the reference ray.
    pub sigma: f64,
    /// Largest deviation of the slope `|x2| / x1` from `gamma`.
    pub slope_sigma: f64,
    /// No free-boundary points of the decided side in the annulus.
    pub empty: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleProfile {
    pub side: Side,
    pub theta: f64,
    pub gamma: f64,
    /// Decreasing radii `r`, one per annulus `[r, 2r]`.
    pub annuli: Vec<AnnulusAngles>,
}

impl AngleProfile {
    pub fn radii(&self) -> Vec<f64> {
        self.annuli.iter().map(|a| a.r).collect()
    }

    pub fn sigmas(&self) -> Vec<f64> {
        self.annuli.iter().map(|a| a.sigma).collect()
    }
}

/// Touch-angle statistics of the free boundary in the annuli `[r, 2r]`.
///
/// The side is the ray (of `v_S` at `phi = theta`, or of `v_L` at
/// `phi = pi - theta`) closest in angle to some free-boundary point in the
/// requested annuli. Statistics then use the points of that half-plane only.
pub fn angle_profile(curve: &FreeBoundaryCurve, spec: &ProblemSpec, radii: &[f64]) -> Result<AngleProfile> {
    let gamma = spec.gamma()?;
    let theta = spec.theta()?;
    let mut radii = radii.to_vec();
    radii.sort_by(|a, b| b.total_cmp(a));
    radii.dedup();
    let in_annulus = |p: &FbPoint, r: f64| p.r >= r && p.r <= 2.0 * r;
    let interior: Vec<&FbPoint> = curve.points().filter(|p| !p.contact).collect();
    let candidates: Vec<&&FbPoint> = interior.iter().filter(|p| radii.iter().any(|&r| in_annulus(p, r))).collect();
    let d_small = candidates.iter().map(|p| (p.phi - theta).abs()).fold(f64::INFINITY, f64::min);
    let d_large = candidates.iter().map(|p| (p.phi - (PI - theta)).abs()).fold(f64::INFINITY, f64::min);
    let side = if d_small < d_large {
        Side::SmallSide
    } else if d_large < d_small {
        Side::LargeSide
    } else {
        Side::Mixed
    };

    let annuli = radii
        .iter()
        .map(|&r| {
            let pts: Vec<&&FbPoint> = interior
                .iter()
                .filter(|p| in_annulus(p, r))
                .filter(|p| match side {
                    Side::SmallSide => p.x[1] > 0.0,
                    Side::LargeSide => p.x[1] < 0.0,
                    Side::Mixed => true,
                })
                .collect();
            if pts.is_empty() {
                return AnnulusAngles {
                    r,
                    count: 0,
                    phi_min: f64::NAN,
                    phi_max: f64::NAN,
                    phi_mean: f64::NAN,
                    sigma: f64::NAN,
                    slope_sigma: f64::NAN,
                    empty: true,
                };
            }
            let phis: Vec<f64> = pts.iter().map(|p| p.phi).collect();
            let deviation = |p: &FbPoint| match side {
                Side::SmallSide => (p.phi - theta).abs(),
                Side::LargeSide => (p.phi - (PI - theta)).abs(),
                Side::Mixed => (p.phi - theta).abs().min((p.phi - (PI - theta)).abs()),
            };
            let slope_dev = |p: &FbPoint| {
                if p.x[0] > 0.0 {
                    (p.x[1].abs() / p.x[0] - gamma).abs()
                } else {
                    f64::INFINITY
                }
            };
            AnnulusAngles {
                r,
                count: pts.len(),
                phi_min: phis.iter().copied().fold(f64::INFINITY, f64::min),
                phi_max: phis.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                phi_mean: phis.iter().sum::<f64>() / phis.len() as f64,
                sigma: pts.iter().map(|p| deviation(p)).fold(0.0, f64::max),
                slope_sigma: pts.iter().map(|p| slope_dev(p)).fold(0.0, f64::max),
                empty: false,
            }
        })
        .collect();
    Ok(AngleProfile { side, theta, gamma, annuli })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub levels: Vec<usize>,
    /// `S(j) = max |u|` over the nodes of `B_{2^-j}^+`.
    pub s_values: Vec<f64>,
    /// Least-squares constant in `S(j) ~ c 2^-j`.
    pub c_fit: f64,
    pub recursion_ok: bool,
    /// First level `j + 1` at which the recursion fails.
    pub first_failure: Option<usize>,
}

/// Dyadic sup sequence of `|u|` and the discrete linear-growth recursion.
pub fn growth_report(field: &ScalarField, levels: usize) -> Result<GrowthReport> {
    let mesh = field.mesh();
    let radii: Vec<f64> = (0..=levels).map(|j| 0.5f64.powi(j as i32)).collect();
    let missing: Vec<f64> = radii.iter().copied().filter(|&r| mesh.ring_index(r).is_none()).collect();
    if !missing.is_empty() {
        return Err(Error::RadiiUnaligned(missing));
    }
    let s_values: Vec<f64> = radii
        .iter()
        .map(|&r| {
            let k = mesh.ring_index(r).expect("checked");
            let first = mesh.rings()[k].first_node;
            field.values()[first..].iter().map(|v| v.abs()).fold(0.0, f64::max)
        })
        .collect();
    let num: f64 = s_values.iter().zip(&radii).map(|(s, r)| s * r).sum();
    let den: f64 = radii.iter().map(|r| r * r).sum();
    let c_fit = num / den;
    let mut first_failure = None;
    for j in 0..levels {
        let bound = (0..=j)
            .map(|i| s_values[j - i] / 2f64.powi(i as i32 + 1))
            .fold(c_fit * radii[j] / 2.0, f64::max);
        if s_values[j + 1] > bound * (1.0 + 1e-12) {
            first_failure = Some(j + 1);
            break;
        }
    }
    Ok(GrowthReport {
        levels: (0..=levels).collect(),
        s_values,
        c_fit,
        recursion_ok: first_failure.is_none(),
        first_failure,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NondegeneracySample {
    pub center: Point,
    pub r: f64,
    /// `sup_{B_r(x)} u / r` over the mesh nodes.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NondegeneracyReport {
    pub samples: Vec<NondegeneracySample>,
    pub c_emp: f64,
    pub degenerate: bool,
}

const NONDEG_MAX_CENTERS: usize = 64;

/// `sup_{B_r^+(x)} u / r` over centers `x` on the free boundary (and the
/// origin when `u(0) <= 0`).
pub fn nondegeneracy_report(field: &ScalarField, curve: &FreeBoundaryCurve, radii: &[f64]) -> Result<NondegeneracyReport> {
    let mesh = field.mesh();
    let mut centers: Vec<Point> = Vec::new();
    if let Some(o) = mesh.origin_index() {
        if field.values()[o] <= 0.0 {
            centers.push([0.0, 0.0]);
        }
    }
    let pts: Vec<Point> = curve.points().map(|p| p.x).collect();
    let stride = (pts.len() / NONDEG_MAX_CENTERS).max(1);
    centers.extend(pts.iter().step_by(stride).copied());
    nondegeneracy_at(field, &centers, radii)
}

/// Nondegeneracy ratios at explicit centers.
pub fn nondegeneracy_at(field: &ScalarField, centers: &[Point], radii: &[f64]) -> Result<NondegeneracyReport> {
    let outer = field.mesh().outer_radius();
    let mut samples = Vec::new();
    for &c in centers {
        if c[0] < 0.0 || c[0].hypot(c[1]) > outer * (1.0 + RING_RTOL) {
            return Err(Error::CenterOutside(c[0], c[1]));
        }
        for &r in radii {
            if !(r > 0.0) {
                return Err(Error::InvalidParameter(format!("radius must be positive, got {r}")));
            }
            let sup = field
                .mesh()
                .nodes()
                .iter()
                .zip(field.values())
                .filter(|(x, _)| (x[0] - c[0]).hypot(x[1] - c[1]) <= r * (1.0 + 1e-12))
                .map(|(_, &v)| v)
                .fold(0.0, f64::max);
            samples.push(NondegeneracySample { center: c, r, ratio: sup / r });
        }
    }
    let c_emp = samples.iter().map(|s| s.ratio).fold(f64::INFINITY, f64::min);
    let c_emp = if c_emp.is_finite() { c_emp } else { 0.0 };
    Ok(NondegeneracyReport { samples, c_emp, degenerate: c_emp <= 0.0 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpSample {
    pub midpoint: Point,
    pub grad_pos2: f64,
    pub grad_neg2: f64,
    pub defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpReport {
    pub samples: Vec<JumpSample>,
    pub median_defect: f64,
    pub max_defect: f64,
}

fn centroid(mesh: &HalfDiscMesh, t: usize) -> Point {
    let [a, b, c] = mesh.triangles()[t].map(|i| mesh.node(i));
    [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
}

/// Triangles whose centroids lie within `radius` of segment `s`, found by
/// walking outwards from the segment's triangle.
fn triangles_near(mesh: &HalfDiscMesh, s: &Segment, radius: f64) -> Vec<usize> {
    let mut seen = vec![s.triangle];
    let mut out = Vec::new();
    let mut stack = vec![s.triangle];
    let mut visited = std::collections::HashSet::new();
    visited.insert(s.triangle);
    while let Some(t) = stack.pop() {
        out.push(t);
        for v in mesh.triangles()[t] {
            for &n in mesh.triangles_of_node(v) {
                if visited.insert(n) && point_segment_distance(centroid(mesh, n), s.a, s.b) <= radius {
                    stack.push(n);
                    seen.push(n);
                }
            }
        }
    }
    out
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// One-sided squared gradients across each interior free-boundary segment.
pub fn jump_report(field: &ScalarField, curve: &FreeBoundaryCurve, spec: &ProblemSpec) -> Result<JumpReport> {
    let mesh = field.mesh();
    let u = field.values();
    let mut samples = Vec::new();
    for s in &curve.segments {
        let h = mesh.diameter(s.triangle);
        let mid = s.midpoint();
        if mid[0] <= 5.0 * h || mid[0].hypot(mid[1]) >= mesh.outer_radius() - 5.0 * h {
            continue;
        }
        let mut acc = [[0.0f64; 3]; 2];
        for t in triangles_near(mesh, s, 3.0 * h) {
            let d = point_segment_distance(centroid(mesh, t), s.a, s.b);
            if d < h {
                continue;
            }
            let tri = mesh.triangles()[t];
            let side = if tri.iter().all(|&i| u[i] > 0.0) {
                0
            } else if tri.iter().all(|&i| u[i] <= 0.0) {
                1
            } else {
                continue;
            };
            let g = mesh.gradient(t, u);
            let a = mesh.area(t);
            acc[side][0] += a * g[0];
            acc[side][1] += a * g[1];
            acc[side][2] += a;
        }
        if acc[0][2] == 0.0 || acc[1][2] == 0.0 {
            continue;
        }
        let sq = |k: usize| (acc[k][0] / acc[k][2]).powi(2) + (acc[k][1] / acc[k][2]).powi(2);
        let (gp, gn) = (sq(0), sq(1));
        samples.push(JumpSample { midpoint: mid, grad_pos2: gp, grad_neg2: gn, defect: ((gp - gn) - spec.big_lambda).abs() });
    }
    if samples.is_empty() {
        return Err(Error::CurveTooShort);
    }
    let mut defects: Vec<f64> = samples.iter().map(|s| s.defect).collect();
    let max_defect = defects.iter().copied().fold(0.0, f64::max);
    let median_defect = median(&mut defects);
    Ok(JumpReport { samples, median_defect, max_defect })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradBoundReport {
    pub max_grad2: f64,
    pub location: Point,
    pub triangles_checked: usize,
    /// `max_grad2 / Lambda`.
    pub ratio: f64,
}

/// Largest `|grad u|^2` on positive triangles away from the free boundary
/// and from `{x1 = 0}` (three local diameters).
pub fn gradbound_report(field: &ScalarField, spec: &ProblemSpec) -> GradBoundReport {
    let mesh = field.mesh();
    let u = field.values();
    let curve = extract_field(field);
    let index = SegmentIndex::new(&curve.segments);
    let mut best = (0.0, [f64::NAN, f64::NAN]);
    let mut checked = 0;
    for (t, tri) in mesh.triangles().iter().enumerate() {
        if !tri.iter().all(|&i| u[i] > 0.0) {
            continue;
        }
        let h = mesh.diameter(t);
        let c = centroid(mesh, t);
        if c[0] < 3.0 * h || index.within(c, 3.0 * h) {
            continue;
        }
        checked += 1;
        let g = mesh.gradient(t, u);
        let g2 = g[0] * g[0] + g[1] * g[1];
        if g2 > best.0 {
            best = (g2, c);
        }
    }
    GradBoundReport { max_grad2: best.0, location: best.1, triangles_checked: checked, ratio: best.0 / spec.big_lambda }
}

/// Segments bucketed by their radial extent, for distance queries on graded
/// meshes.
pub struct SegmentIndex<'a> {
    segments: &'a [Segment],
    /// `(r_min, index)` sorted by `r_min`.
    order: Vec<(f64, usize)>,
    max_span: f64,
}

impl<'a> SegmentIndex<'a> {
    pub fn new(segments: &'a [Segment]) -> Self {
        let r = |p: Point| p[0].hypot(p[1]);
        let mut order: Vec<(f64, usize)> = segments.iter().enumerate().map(|(i, s)| (r(s.a).min(r(s.b)), i)).collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0));
        let max_span = segments.iter().map(|s| s.length()).fold(0.0, f64::max);
        Self { segments, order, max_span }
    }

    /// Distance from `x` to the nearest segment.
    pub fn distance(&self, x: Point) -> f64 {
        let rx = x[0].hypot(x[1]);
        let mut best = f64::INFINITY;
        // scan outwards from the radial position of x, both directions
        let start = self.order.partition_point(|e| e.0 < rx);
        for &(rmin, i) in &self.order[start..] {
            if rmin - rx > best {
                break;
            }
            let s = &self.segments[i];
            best = best.min(point_segment_distance(x, s.a, s.b));
        }
        for &(rmin, i) in self.order[..start].iter().rev() {
            if rx - rmin - self.max_span > best {
                break;
            }
            let s = &self.segments[i];
            best = best.min(point_segment_distance(x, s.a, s.b));
        }
        best
    }

    pub fn within(&self, x: Point, d: f64) -> bool {
        self.distance(x) <= d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::GlobalSolution;
    use crate::mesh::build_mesh;
    use std::sync::Arc;

    fn setup(n: usize) -> (Arc<HalfDiscMesh>, ProblemSpec) {
        (Arc::new(build_mesh(6, 0.5, n).unwrap()), ProblemSpec::default_one_phase())
    }

    #[test]
    fn small_solution_curve_follows_ray() {
        let (mesh, spec) = setup(32);
        let vs = ScalarField::interpolate_global(mesh.clone(), &GlobalSolution::small(spec)).unwrap();
        let curve = extract(&vs, &spec);
        assert!(!curve.empty);
        assert!(!curve.multi_component, "{}", curve.components.len());
        let h = mesh.h();
        for p in curve.points() {
            assert!((p.x[0] - p.x[1]).abs() / 2f64.sqrt() <= h);
        }
        let c = &curve.components[0];
        assert!(c.points[0].r < 1e-12);
        assert!((c.length - 1.0).abs() < 1e-9);
    }

    #[test]
    fn positive_field_has_no_free_boundary() {
        let (mesh, spec) = setup(16);
        let f = ScalarField::from_fn(mesh, |_| 1.0).unwrap();
        let curve = extract(&f, &spec);
        assert!(curve.empty && curve.segments.is_empty());
    }

    #[test]
    fn nt_examples() {
        let (mesh, spec) = setup(32);
        let vs = ScalarField::interpolate_global(mesh, &GlobalSolution::small(spec)).unwrap();
        let curve = extract(&vs, &spec);
        assert!(nt_check(&curve, &vs, 0.5, NtMode::Strong).unwrap().verdict);
        assert!(!nt_check(&curve, &vs, 2.0, NtMode::Strong).unwrap().verdict);
        assert!(nt_check(&curve, &vs, 0.5, NtMode::Weak(2.0)).unwrap().verdict);
        assert!(nt_check(&curve, &vs, 0.0, NtMode::Strong).is_err());
    }

    #[test]
    fn angle_examples() {
        let (mesh, spec) = setup(32);
        let vs = ScalarField::interpolate_global(mesh.clone(), &GlobalSolution::small(spec)).unwrap();
        let p = angle_profile(&extract(&vs, &spec), &spec, &[0.5, 0.25]).unwrap();
        assert_eq!(p.side, Side::SmallSide);
        for a in &p.annuli {
            assert!(a.sigma <= 2.0 * mesh.h() / a.r, "{a:?}");
        }
        let vl = ScalarField::interpolate_global(mesh.clone(), &GlobalSolution::large(spec)).unwrap();
        let p = angle_profile(&extract(&vl, &spec), &spec, &[0.5, 0.25]).unwrap();
        assert_eq!(p.side, Side::LargeSide);
        assert!(p.annuli.iter().all(|a| a.sigma <= 2.0 * mesh.h() / a.r));
    }

    #[test]
    fn growth_examples() {
        let (mesh, spec) = setup(16);
        let vs = ScalarField::interpolate_global(mesh.clone(), &GlobalSolution::small(spec)).unwrap();
        let g = growth_report(&vs, 5).unwrap();
        for (j, s) in g.s_values.iter().enumerate() {
            assert!((s - 0.5f64.powi(j as i32)).abs() < 1e-15);
        }
        assert!(g.recursion_ok);
        let z = growth_report(&ScalarField::zeros(mesh.clone()), 5).unwrap();
        assert!(z.s_values.iter().all(|&s| s == 0.0) && z.recursion_ok);
        let other = Arc::new(build_mesh(4, 0.6, 16).unwrap());
        assert!(matches!(growth_report(&ScalarField::zeros(other), 2), Err(Error::RadiiUnaligned(_))));
    }

    #[test]
    fn nondegeneracy_examples() {
        let (mesh, spec) = setup(16);
        let vs = ScalarField::interpolate_global(mesh.clone(), &GlobalSolution::small(spec)).unwrap();
        let r = nondegeneracy_at(&vs, &[[0.0, 0.0]], &[0.5]).unwrap();
        assert!((r.c_emp - 1.0).abs() < 1e-12);
        let zero = ScalarField::zeros(mesh);
        let r = nondegeneracy_report(&zero, &extract(&zero, &spec), &[0.5]).unwrap();
        assert_eq!(r.c_emp, 0.0);
        assert!(r.degenerate);
        assert!(matches!(nondegeneracy_at(&vs, &[[-0.1, 0.0]], &[0.5]), Err(Error::CenterOutside(..))));
    }

    #[test]
    fn jump_and_gradient_on_exact_solutions() {
        let (mesh, spec) = setup(64);
        for sol in [GlobalSolution::small(spec), GlobalSolution::large(spec)] {
            let v = ScalarField::interpolate_global(mesh.clone(), &sol).unwrap();
            let j = jump_report(&v, &extract(&v, &spec), &spec).unwrap();
            assert!(j.median_defect <= 1e-10, "{}", j.median_defect);
            let g = gradbound_report(&v, &spec);
            assert!(g.triangles_checked > 0);
            assert!((g.max_grad2 - spec.big_lambda).abs() < 1e-10, "{g:?}");
        }
    }

    #[test]
    fn curve_csv_header() {
        let (mesh, spec) = setup(16);
        let vs = ScalarField::interpolate_global(mesh, &GlobalSolution::small(spec)).unwrap();
        let csv = extract(&vs, &spec).to_csv().unwrap();
        assert!(csv.starts_with("component,index,x1,x2,r,phi\n"));
    }
}
