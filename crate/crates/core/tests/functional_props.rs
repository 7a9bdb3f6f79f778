//! Energy evaluation checked against independent geometry and finite differences.

use std::sync::Arc;

use bernoulli_core::functional::{
    energy_and_gradient, energy_exact, energy_values, positive_area_triangle, ramp, scaled_energy, smoothed_values,
    triangle_energy, PhaseModel,
};
use bernoulli_core::minimize::{combine_max, combine_min};
use bernoulli_core::{build_mesh, GlobalSolution, HalfDiscMesh, ProblemSpec, ScalarField};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Area of `{l > 0}` on a triangle by clipping the polygon against the half plane.
fn clipped_area(p: [[f64; 2]; 3], v: [f64; 3]) -> f64 {
    let mut poly: Vec<[f64; 2]> = Vec::new();
    for k in 0..3 {
        let (a, b) = (k, (k + 1) % 3);
        if v[a] > 0.0 {
            poly.push(p[a]);
        }
        if (v[a] > 0.0) != (v[b] > 0.0) {
            let t = v[a] / (v[a] - v[b]);
            poly.push([p[a][0] + t * (p[b][0] - p[a][0]), p[a][1] + t * (p[b][1] - p[a][1])]);
        }
    }
    let n = poly.len();
    (0..n).map(|i| {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        a[0] * b[1] - a[1] * b[0]
    })
    .sum::<f64>()
        / 2.0
}

fn small_mesh() -> Arc<HalfDiscMesh> {
    Arc::new(build_mesh(5, 0.5, 16).unwrap())
}

fn random_values(mesh: &HalfDiscMesh, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..mesh.node_count()).map(|_| rng.random_range(-1.0..1.0)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn positive_area_matches_polygon_clipping(
        v in prop::array::uniform3(-1.0f64..1.0),
        p in prop::array::uniform3(prop::array::uniform2(-1.0f64..1.0)),
    ) {
        let signed = 0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[1][1] - p[0][1]) * (p[2][0] - p[0][0]));
        prop_assume!(signed.abs() > 1e-3);
        let (p, v) = if signed > 0.0 { (p, v) } else { ([p[0], p[2], p[1]], [v[0], v[2], v[1]]) };
        let area = signed.abs();
        let fast = positive_area_triangle((v[0], v[1], v[2]), area);
        prop_assert!((fast - clipped_area(p, v)).abs() <= 1e-9 * area.max(1.0), "{fast} vs {}", clipped_area(p, v));
    }

    #[test]
    fn positive_and_negative_areas_fill_the_triangle(v in prop::array::uniform3(-1.0f64..1.0), area in 0.01f64..2.0) {
        let pos = positive_area_triangle((v[0], v[1], v[2]), area);
        let neg = positive_area_triangle((-v[0], -v[1], -v[2]), area);
        prop_assert!((pos + neg - area).abs() <= 1e-12 * area);
        prop_assert!((0.0..=area).contains(&pos));
    }

    #[test]
    fn ramp_is_a_monotone_c1_step(s in -1.0f64..2.0, eps in 0.01f64..1.0) {
        let r = ramp(s, eps);
        prop_assert!((0.0..=1.0).contains(&r));
        prop_assert!(ramp(s + 1e-3, eps) >= r);
        // slope bounded by 3 / (2 eps)
        prop_assert!((ramp(s + 1e-7, eps) - r).abs() <= 1.5 / eps * 1e-7 + 1e-15);
    }

    #[test]
    fn smoothed_energy_is_exact_up_to_the_band(seed in any::<u64>(), eps in 1e-4f64..0.3) {
        let mesh = small_mesh();
        let values = random_values(&mesh, seed);
        let exact = energy_values(&mesh, &values, 2.0).total;
        let (smooth, _) = smoothed_values(&mesh, &values, 2.0, eps);
        // the band area is at most the area of triangles with a vertex in (0, eps] or a sign change
        let band: f64 = (0..mesh.triangle_count())
            .filter(|&t| {
                let v = mesh.triangles()[t].map(|i| values[i]);
                v.iter().any(|&x| x > 0.0 && x < eps) || (v.iter().any(|&x| x > 0.0) && v.iter().any(|&x| x <= 0.0))
            })
            .map(|t| mesh.area(t))
            .sum();
        prop_assert!(smooth <= exact + 1e-12);
        prop_assert!(exact - smooth <= 2.0 * band + 1e-12);
    }

    #[test]
    fn gradients_match_finite_differences(seed in any::<u64>()) {
        let mesh = small_mesh();
        let values = random_values(&mesh, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        for model in [PhaseModel::Uniform(0.2), PhaseModel::Relative(0.5)] {
            let (_, grad) = energy_and_gradient(&mesh, &values, 2.0, model);
            for _ in 0..8 {
                let i = rng.random_range(0..mesh.node_count());
                let h = 1e-6;
                let mut up = values.clone();
                up[i] += h;
                let mut down = values.clone();
                down[i] -= h;
                let fd = (energy_and_gradient(&mesh, &up, 2.0, model).0 - energy_and_gradient(&mesh, &down, 2.0, model).0) / (2.0 * h);
                prop_assert!((fd - grad[i]).abs() <= 1e-5 * grad[i].abs().max(1.0), "{model:?} node {i}: fd {fd} grad {}", grad[i]);
            }
        }
    }

    #[test]
    fn energy_is_invariant_under_relabelling(seed in any::<u64>()) {
        let mesh = small_mesh();
        let values = random_values(&mesh, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut perm: Vec<usize> = (0..mesh.node_count()).collect();
        perm.shuffle(&mut rng);
        let mut nodes = vec![[0.0; 2]; perm.len()];
        let mut classes = mesh.node_classes().to_vec();
        let mut moved = vec![0.0; perm.len()];
        for (old, &new) in perm.iter().enumerate() {
            nodes[new] = mesh.node(old);
            classes[new] = mesh.class(old);
            moved[new] = values[old];
        }
        let mut tris: Vec<[usize; 3]> = mesh.triangles().iter().map(|t| t.map(|i| perm[i])).collect();
        tris.shuffle(&mut rng);
        let other = HalfDiscMesh::from_parts(nodes, tris, classes).unwrap();
        let a = energy_values(&mesh, &values, 2.0);
        let b = energy_values(&other, &moved, 2.0);
        prop_assert_eq!(a.total.to_bits(), b.total.to_bits());
        prop_assert_eq!(a.dirichlet.to_bits(), b.dirichlet.to_bits());
    }

    #[test]
    fn max_min_identity_holds_off_order_change_triangles(s1 in any::<u64>(), s2 in any::<u64>()) {
        let mesh = small_mesh();
        let spec = ProblemSpec::default_one_phase();
        let v1 = ScalarField::new(mesh.clone(), random_values(&mesh, s1)).unwrap();
        let v2 = ScalarField::new(mesh.clone(), random_values(&mesh, s2)).unwrap();
        let hi = combine_max(&v1, &v2, &spec).unwrap();
        let lo = combine_min(&v1, &v2, &spec).unwrap();
        let lambda = spec.big_lambda;
        let mut off_change = 0.0;
        for t in 0..mesh.triangle_count() {
            if hi.order_change_triangles.contains(&t) {
                continue;
            }
            let lhs = triangle_energy(&mesh, hi.field.values(), t, lambda) + triangle_energy(&mesh, lo.field.values(), t, lambda);
            let rhs = triangle_energy(&mesh, v1.values(), t, lambda) + triangle_energy(&mesh, v2.values(), t, lambda);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
            off_change += 1.0;
        }
        prop_assert!(off_change > 0.0 || !hi.order_change_triangles.is_empty());
        prop_assert_eq!(hi.defect.to_bits(), lo.defect.to_bits());
    }
}

#[test]
fn positive_area_examples() {
    assert_eq!(positive_area_triangle((1.0, 1.0, 1.0), 0.5), 0.5);
    assert_eq!(positive_area_triangle((0.0, 0.0, 0.0), 0.5), 0.0);
    assert!((positive_area_triangle((-1.0, 1.0, 1.0), 0.5) - 3.0 / 8.0).abs() < 1e-15);
}

#[test]
fn energy_of_the_small_solution_is_the_sector_area() {
    let spec = ProblemSpec::default_one_phase();
    let theta = spec.theta.unwrap();
    let mut errors = Vec::new();
    for n in [32, 64, 128] {
        let mesh = Arc::new(build_mesh(8, 0.5, n).unwrap());
        let field = ScalarField::interpolate_global(mesh.clone(), &GlobalSolution::small(spec)).unwrap();
        let e = energy_exact(&field, &spec, None).unwrap();
        // |grad v_S|^2 = Lambda on the positive sector of angle theta, so J = 2 Lambda theta / 2
        errors.push((e.total - spec.big_lambda * theta).abs());
        assert!(e.phase_area_pos <= mesh.total_area());
        assert!((e.total - e.dirichlet - spec.big_lambda * e.phase_area_pos).abs() < 1e-12);
    }
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
    assert!(errors[2] < 1e-2);
}

#[test]
fn scaled_energy_endpoints_and_rescaling() {
    let mesh = small_mesh();
    let spec = ProblemSpec::default_one_phase();
    let field = ScalarField::new(mesh.clone(), random_values(&mesh, 7)).unwrap();
    let e = energy_exact(&field, &spec, None).unwrap();
    assert_eq!(scaled_energy(&field, &spec, 1.0).unwrap(), e.total);
    assert_eq!(scaled_energy(&field, &spec, 0.0).unwrap(), e.dirichlet);
    assert!(scaled_energy(&field, &spec, -1.0).is_err());

    // v(x) = u(r x) / r on the rescaled tail: J(v, B_1) = r^-2 J(u, B_r)
    let r = 0.25;
    let v = bernoulli_core::blowup::rescale(&field, r).unwrap();
    let lhs = scaled_energy(&v, &spec, 1.0).unwrap();
    let rhs = energy_exact(&field, &spec, Some(r)).unwrap().total / (r * r);
    assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs(), "{lhs} vs {rhs}");
}

#[test]
fn zero_field_and_linear_field() {
    let mesh = small_mesh();
    let spec = ProblemSpec::default_one_phase();
    let zero = ScalarField::zeros(mesh.clone());
    assert_eq!(energy_exact(&zero, &spec, None).unwrap().total, 0.0);
    let x2 = ScalarField::from_fn(mesh.clone(), |x| x[1]).unwrap();
    let e = energy_exact(&x2, &spec, None).unwrap();
    assert!((e.dirichlet - mesh.total_area()).abs() < 1e-12);
}
