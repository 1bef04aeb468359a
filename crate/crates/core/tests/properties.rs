use formation_core::potential::{psi_global, BodyFrames};
use formation_core::rigidity::{is_infinitesimally_rigid, Framework, Graph, DEFAULT_RANK_TOL};
use formation_core::FormationSpec64;
use proptest::prelude::*;

fn rank(graph: &Graph, dim: usize, p: &[f64]) -> usize {
    let fw = Framework::new(graph.clone(), dim, p.to_vec()).unwrap();
    is_infinitesimally_rigid(&fw, DEFAULT_RANK_TOL).unwrap().rank_g
}

/// Rotation by `theta` in the plane, then shift.
fn planar_motion(p: &[f64], theta: f64, shift: (f64, f64)) -> Vec<f64> {
    let (s, c) = theta.sin_cos();
    p.chunks(2).flat_map(|x| [c * x[0] - s * x[1] + shift.0, s * x[0] + c * x[1] + shift.1]).collect()
}

fn positions(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0..5.0f64, 2 * n)
}

fn all_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rank_invariant_under_congruence(p in positions(5), theta in -3.2..3.2f64, a in -10.0..10.0f64, b in -10.0..10.0f64) {
        let g = Graph::complete_without(5, &[(0, 1), (2, 4)]).unwrap();
        prop_assert_eq!(rank(&g, 2, &p), rank(&g, 2, &planar_motion(&p, theta, (a, b))));
    }

    #[test]
    fn rank_invariant_under_scaling(p in positions(5), k in 0.1..10.0f64) {
        let g = Graph::complete_without(5, &[(1, 3)]).unwrap();
        let scaled: Vec<f64> = p.iter().map(|x| k * x).collect();
        prop_assert_eq!(rank(&g, 2, &p), rank(&g, 2, &scaled));
    }

    #[test]
    fn adding_an_edge_never_lowers_rank(p in positions(5), keep in prop::collection::vec(any::<bool>(), 10), extra in 0usize..10) {
        let pairs = all_pairs(5);
        let mut edges: Vec<(usize, usize)> = pairs.iter().zip(&keep).filter(|(_, &k)| k).map(|(&e, _)| e).collect();
        if edges.is_empty() {
            edges.push(pairs[0]);
        }
        let g = Graph::new(5, edges.clone()).unwrap();
        let before = rank(&g, 2, &p);
        if !edges.contains(&pairs[extra]) {
            edges.push(pairs[extra]);
        }
        let after = rank(&Graph::new(5, edges).unwrap(), 2, &p);
        prop_assert!(after >= before && after <= before + 1);
    }

    #[test]
    fn potential_invariant_under_isometry(p in positions(4), d in prop::collection::vec(0.5..4.0f64, 6), theta in -3.2..3.2f64, a in -5.0..5.0f64) {
        let edges: Vec<(usize, usize, f64)> = all_pairs(4).into_iter().zip(d).map(|((i, j), d)| (i, j, d)).collect();
        let spec = FormationSpec64::from_edges(4, 2, &edges).unwrap();
        let moved = planar_motion(&p, theta, (a, -a));
        let (x, y) = (psi_global(&spec, &p), psi_global(&spec, &moved));
        prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()));
        // mirror image too
        let mirrored: Vec<f64> = p.chunks(2).flat_map(|q| [-q[0], q[1]]).collect();
        prop_assert!((x - psi_global(&spec, &mirrored)).abs() <= 1e-9 * (1.0 + x.abs()));
    }

    #[test]
    fn random_frames_satisfy_parseval(seed in any::<u64>(), v in prop::collection::vec(-10.0..10.0f64, 3)) {
        let frames = BodyFrames::<f64>::random(3, 3, seed);
        prop_assert!(frames.orthonormality_defect() < 1e-12);
        for agent in 0..3 {
            let energy: f64 = (0..3)
                .map(|k| frames.vector(agent, k).iter().zip(&v).map(|(b, x)| b * x).sum::<f64>().powi(2))
                .sum();
            let norm: f64 = v.iter().map(|x| x * x).sum();
            prop_assert!((energy - norm).abs() <= 1e-10 * (1.0 + norm));
        }
    }
}
