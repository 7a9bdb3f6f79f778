//! Blow-up sequences `u(r x) / r` along mesh-aligned scales and their
//! classification against the two homogeneous solutions.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closed_form::{eval_global, GlobalSolution, ProblemSpec};
use crate::error::{Error, Result};
use crate::freeboundary::{point_segment_distance, FreeBoundaryCurve};
use crate::mesh::{ScalarField, RING_RTOL};
use crate::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Small,
    Large,
    Undecided,
}

#[derive(Debug, Clone)]
pub struct BlowupSequence {
    pub base: ScalarField,
    /// `q^j`, decreasing from 1.
    pub scales: Vec<f64>,
    /// Each rescaled field lives on its own copy of the inner rings,
    /// scaled back to the unit half disc.
    pub fields: Vec<ScalarField>,
    /// Max-norm distance to the small solution on `q <= |x| <= 1`.
    pub residuals_small: Vec<f64>,
    pub residuals_large: Vec<f64>,
    /// Longest edge met in the residual shell, over all scales.
    pub h_shell: f64,
    pub verdict: Verdict,
    pub tol_class: f64,
}

/// `x -> u(r x) / r` with `r = q^m`, exact on the nodes of the inner rings.
pub fn rescale(field: &ScalarField, r: f64) -> Result<ScalarField> {
    let mesh = field.mesh();
    if (r - 1.0).abs() <= RING_RTOL {
        return Ok(field.clone());
    }
    let outer = mesh.outer_radius();
    let k = mesh.ring_index(r * outer).ok_or(Error::UnalignedScale(r))?;
    let (sub, offset) = mesh.tail(k)?;
    let sub = sub.scaled(1.0 / r)?;
    let values = field.values()[offset..].iter().map(|v| v / r).collect();
    ScalarField::new(Arc::new(sub), values)
}

fn shell_residual(field: &ScalarField, sol: &GlobalSolution, inner: f64) -> Result<f64> {
    let mut worst = 0.0f64;
    for (x, v) in field.mesh().nodes().iter().zip(field.values()) {
        if x[0].hypot(x[1]) >= inner * (1.0 - RING_RTOL) {
            worst = worst.max((v - eval_global(sol, *x)?).abs());
        }
    }
    Ok(worst)
}

fn shell_h(field: &ScalarField, inner: f64) -> f64 {
    let mesh = field.mesh();
    mesh.edges()
        .iter()
        .filter(|e| e.iter().all(|&i| {
            let x = mesh.node(i);
            x[0].hypot(x[1]) >= inner * (1.0 - RING_RTOL)
        }))
        .map(|e| mesh.edge_length(e[0], e[1]))
        .fold(0.0, f64::max)
}

/// Rescales by `q^j` for `j = 0..count`, computes residuals, and classifies
/// with `tol_class` (default `10 h` with `h` the shell mesh size).
pub fn blowup_sequence(
    field: &ScalarField,
    spec: &ProblemSpec,
    count: usize,
    tol_class: Option<f64>,
) -> Result<BlowupSequence> {
    let mesh = field.mesh();
    // rings include the sub-layers between consecutive powers of q
    let m = mesh.sub_layers().unwrap_or(1);
    let levels = (mesh.rings().len() - 1) / m;
    if count < 3 || count > levels {
        return Err(Error::TooFewScales { needed: count.max(3), got: levels });
    }
    let outer = mesh.outer_radius();
    let q = mesh.rings()[m].radius / outer;
    let scales: Vec<f64> = (0..count).map(|j| mesh.rings()[j * m].radius / outer).collect();
    let small = GlobalSolution::small(*spec);
    let large = GlobalSolution::large(*spec);
    let rows = scales
        .par_iter()
        .map(|&r| {
            let f = rescale(field, r)?;
            let rs = shell_residual(&f, &small, q)?;
            let rl = shell_residual(&f, &large, q)?;
            let h = shell_h(&f, q);
            Ok((f, rs, rl, h))
        })
        .collect::<Result<Vec<_>>>()?;
    let h_shell = rows.iter().map(|r| r.3).fold(0.0, f64::max);
    let tol = tol_class.unwrap_or(10.0 * h_shell);
    let mut seq = BlowupSequence {
        base: field.clone(),
        scales,
        residuals_small: rows.iter().map(|r| r.1).collect(),
        residuals_large: rows.iter().map(|r| r.2).collect(),
        fields: rows.into_iter().map(|r| r.0).collect(),
        h_shell,
        verdict: Verdict::Undecided,
        tol_class: tol,
    };
    seq.verdict = classify(&seq, tol)?;
    Ok(seq)
}

/// The finest two residuals lie within `tol_class` and the residuals do
/// not grow from the coarsest to the finest scale. Undecided otherwise.
pub fn classify(seq: &BlowupSequence, tol_class: f64) -> Result<Verdict> {
    let n = seq.scales.len();
    if n < 3 {
        return Err(Error::TooFewScales { needed: 3, got: n });
    }
    let settles = |res: &[f64]| res[n - 2..].iter().all(|&e| e <= tol_class) && res[n - 1] <= res[0] + tol_class;
    Ok(match (settles(&seq.residuals_small), settles(&seq.residuals_large)) {
        (true, false) => Verdict::Small,
        (false, true) => Verdict::Large,
        _ => Verdict::Undecided,
    })
}

/// Segments of `curve` as point pairs.
pub fn curve_segments(curve: &FreeBoundaryCurve) -> Vec<[Point; 2]> {
    curve.segments.iter().map(|s| [s.a, s.b]).collect()
}

/// The free-boundary ray of `sol` from the origin to radius `r`.
pub fn ray_segment(sol: &GlobalSolution, r: f64) -> Result<[Point; 2]> {
    let (dir, _) = crate::closed_form::free_boundary_ray(sol)?;
    Ok([[0.0, 0.0], [r * dir[0], r * dir[1]]])
}

/// Pieces of a segment inside `a <= |x| <= b`.
fn clip_to_annulus(s: [Point; 2], a: f64, b: f64) -> Vec<[Point; 2]> {
    let d = [s[1][0] - s[0][0], s[1][1] - s[0][1]];
    let at = |t: f64| [s[0][0] + t * d[0], s[0][1] + t * d[1]];
    let qa = d[0] * d[0] + d[1] * d[1];
    if qa == 0.0 {
        let r = s[0][0].hypot(s[0][1]);
        return if r >= a && r <= b { vec![s] } else { Vec::new() };
    }
    let qb = 2.0 * (s[0][0] * d[0] + s[0][1] * d[1]);
    let qc0 = s[0][0] * s[0][0] + s[0][1] * s[0][1];
    let mut ts = vec![0.0, 1.0];
    for rad in [a, b] {
        let disc = qb * qb - 4.0 * qa * (qc0 - rad * rad);
        if disc >= 0.0 {
            let sq = disc.sqrt();
            ts.extend([(-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa)].into_iter().filter(|t| *t > 0.0 && *t < 1.0));
        }
    }
    ts.sort_by(f64::total_cmp);
    ts.windows(2)
        .filter(|w| w[1] > w[0])
        .filter_map(|w| {
            let m = at(0.5 * (w[0] + w[1]));
            let r = m[0].hypot(m[1]);
            (r >= a && r <= b).then(|| [at(w[0]), at(w[1])])
        })
        .collect()
}

fn directed_hausdorff(from: &[[Point; 2]], to: &[[Point; 2]], step: f64) -> f64 {
    let dist = |x: Point| to.iter().map(|s| point_segment_distance(x, s[0], s[1])).fold(f64::INFINITY, f64::min);
    from.par_iter()
        .map(|s| {
            let len = (s[1][0] - s[0][0]).hypot(s[1][1] - s[0][1]);
            let n = ((len / step).ceil() as usize).max(1);
            (0..=n)
                .map(|k| {
                    let t = k as f64 / n as f64;
                    dist([s[0][0] + t * (s[1][0] - s[0][0]), s[0][1] + t * (s[1][1] - s[0][1])])
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

/// Symmetric Hausdorff distance between two polyline sets restricted to
/// the annulus `a <= |x| <= b`.
pub fn fb_hausdorff(curve1: &[[Point; 2]], curve2: &[[Point; 2]], annulus: [f64; 2]) -> Result<f64> {
    let [a, b] = annulus;
    let c1: Vec<[Point; 2]> = curve1.iter().flat_map(|&s| clip_to_annulus(s, a, b)).collect();
    let c2: Vec<[Point; 2]> = curve2.iter().flat_map(|&s| clip_to_annulus(s, a, b)).collect();
    if c1.is_empty() || c2.is_empty() {
        return Err(Error::EmptyInAnnulus(a, b));
    }
    // sampling step well below any tolerance used on the result
    let step = (b - a).max(b * 1e-3) * 1e-4;
    Ok(directed_hausdorff(&c1, &c2, step).max(directed_hausdorff(&c2, &c1, step)))
}
