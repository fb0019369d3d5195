mod common;

use elastic_eig::basis::AffineMap;
use elastic_eig::mesh::{build_lshape, build_unit_square, DirichletSpec, Mesh};
use proptest::prelude::*;

fn domain(lshape: bool, n: usize) -> Mesh {
    if lshape {
        build_lshape(n).unwrap()
    } else {
        build_unit_square(n, DirichletSpec::Bottom).unwrap()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn refinement_preserves_area_and_euler(lshape in any::<bool>(), n in 1usize..5, levels in 0usize..3) {
        let coarse = domain(lshape, n);
        let fine = coarse.refine_nested(levels);
        let (a, b) = (coarse.total_area(), fine.total_area());
        prop_assert!((a - b).abs() <= 1e-12 * a);
        let euler = fine.num_vertices() as i64 - fine.num_edges() as i64 + fine.num_triangles() as i64;
        prop_assert_eq!(euler, 1);
        prop_assert!((fine.h() - coarse.h() / f64::from(1 << levels)).abs() < 1e-12);
    }

    #[test]
    fn fine_points_pull_back_into_their_ancestor(seed in 0u64..1000, n in 1usize..4, levels in 1usize..3) {
        let coarse = common::perturbed_square(n + 1, 0.3, seed, DirichletSpec::All);
        let fine = coarse.refine_nested(levels);
        let parent = fine.parent().unwrap();
        let quad = common::ref_quadrature(3);
        for t in 0..fine.num_triangles() {
            let fmap = AffineMap::new(&fine.triangle_points(t)).unwrap();
            let cmap = AffineMap::new(&coarse.triangle_points(parent[t])).unwrap();
            for &(p, _) in &quad {
                let r = cmap.pullback(fmap.map(p));
                for bary in [1.0 - r[0] - r[1], r[0], r[1]] {
                    prop_assert!((-1e-12..=1.0 + 1e-12).contains(&bary));
                }
            }
        }
    }

    #[test]
    fn text_format_round_trips(lshape in any::<bool>(), n in 1usize..4) {
        let m = domain(lshape, n);
        let text = m.to_text();
        let back = Mesh::from_text(&text).unwrap();
        prop_assert_eq!(back.to_text(), text);
        prop_assert_eq!(back.num_triangles(), m.num_triangles());
    }
}

#[test]
fn lshape_reports_cell_size() {
    let m = build_lshape(16).unwrap();
    assert_eq!(m.cell_size(), 1.0 / 16.0);
    assert_eq!(m.num_triangles(), 3 * 16 * 16 * 2);
}

#[test]
fn every_edge_has_one_or_two_triangles() {
    let m = build_lshape(3).unwrap().refine_uniform();
    for e in m.edges() {
        assert_eq!(e.triangles.len(), if e.is_boundary() { 1 } else { 2 });
    }
}
