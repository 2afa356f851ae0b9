use std::collections::HashMap;

use gelrom::mesh::{build_layout, build_mesh, Discretization, ScenarioId, ScenarioSpec};
use proptest::prelude::*;

fn scenario() -> impl Strategy<Value = ScenarioSpec> {
    (prop_oneof![Just(ScenarioId::Square), Just(ScenarioId::Bar), Just(ScenarioId::Manufactured)], 1usize..24)
        .prop_map(|(id, n)| ScenarioSpec::from_id(id, n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn triangle_areas_sum_to_domain_area(spec in scenario()) {
        let mesh = build_mesh(&spec).unwrap();
        let total: f64 = (0..mesh.triangles.len()).map(|t| mesh.signed_area(t)).sum();
        prop_assert!((total - spec.area()).abs() < 1e-12 * spec.area().max(1.0), "{total} vs {}", spec.area());
    }

    #[test]
    fn interior_edges_shared_twice_boundary_edges_once(spec in scenario()) {
        let mesh = build_mesh(&spec).unwrap();
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &mesh.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let boundary: Vec<(usize, usize)> =
            mesh.boundary_edges.iter().map(|e| (e.vertices[0].min(e.vertices[1]), e.vertices[0].max(e.vertices[1]))).collect();
        for e in &boundary {
            prop_assert_eq!(count.get(e), Some(&1));
        }
        let n_boundary = count.values().filter(|&&c| c == 1).count();
        prop_assert_eq!(n_boundary, boundary.len());
        prop_assert!(count.values().all(|&c| c == 1 || c == 2));
    }

    #[test]
    fn layout_is_reproducible(spec in scenario()) {
        let (m1, m2) = (build_mesh(&spec).unwrap(), build_mesh(&spec).unwrap());
        let (l1, l2) = (build_layout(&m1, &spec).unwrap(), build_layout(&m2, &spec).unwrap());
        prop_assert_eq!(&l1.nodes, &l2.nodes);
        prop_assert_eq!(&l1.tri_nodes, &l2.tri_nodes);
        prop_assert_eq!(&l1.vertex_mu_dof, &l2.vertex_mu_dof);
        prop_assert_eq!(l1.dirichlet.len(), l2.dirichlet.len());
        prop_assert_eq!(l1.n_u, 2 * l1.nodes.len());
    }
}

#[test]
fn benchmark_mesh_counts() {
    let d = Discretization::new(&ScenarioSpec::square(50)).unwrap();
    assert_eq!(d.mesh.triangles.len(), 5000);
    assert_eq!(d.layout.n_mu, 51 * 51);
    assert_eq!(d.layout.n_u, 2 * 101 * 101);
}
