use std::sync::Arc;

use moment_rep::reconstruct::{power_sums_to_multiset, strip_zeros};
use moment_rep::{exponent_basis, pool, reconstruct, MomentBasis, PointSet, ReconstructConfig, SortedPaddedMatrix};
use proptest::prelude::*;

fn basis(i: usize, j: usize) -> Arc<MomentBasis> {
    Arc::new(exponent_basis(i, j).unwrap())
}

/// `(I, J, points)` with `1 ≤ |X| ≤ J`, coordinates in `[0.1, 10]`.
fn point_sets() -> impl Strategy<Value = (usize, usize, Vec<Vec<f64>>)> {
    (1usize..=3, 1usize..=5).prop_flat_map(|(i, j)| {
        let pts = prop::collection::vec(prop::collection::vec(0.1f64..10.0, i), 1..=j);
        (Just(i), Just(j), pts)
    })
}

/// Same as [`point_sets`] but with the first point repeated.
fn with_duplicates() -> impl Strategy<Value = (usize, usize, Vec<Vec<f64>>)> {
    (1usize..=3, 2usize..=5).prop_flat_map(|(i, j)| {
        let pts = prop::collection::vec(prop::collection::vec(0.1f64..10.0, i), 1..j);
        (Just(i), Just(j), pts, 2usize..=j)
    })
    .prop_map(|(i, j, mut pts, copies)| {
        let first = pts[0].clone();
        while pts.len() < copies.min(j) {
            pts.push(first.clone());
        }
        pts.truncate(j);
        if pts.len() == 1 || pts[1] != first {
            let last = pts.len() - 1;
            if pts.len() < j {
                pts.push(first);
            } else {
                pts[last] = first;
            }
        }
        (i, j, pts)
    })
}

/// Distinct points at least `gap` apart in sup norm. Tighter clusters around
/// a repeated point are below what double-precision power sums resolve.
fn separated(pts: &[Vec<f64>], gap: f64) -> bool {
    pts.iter().enumerate().all(|(a, p)| {
        pts[a + 1..].iter().all(|q| {
            let d = p.iter().zip(q).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            d == 0.0 || d >= gap
        })
    })
}

fn roundtrip_error(i: usize, j: usize, pts: &[Vec<f64>], seed: u64) -> f64 {
    let b = basis(i, j);
    let m = pool(&PointSet::new(i, pts.to_vec()).unwrap(), &b).unwrap();
    let rep = reconstruct(&m, &ReconstructConfig::with_seed(seed)).unwrap();
    let expected = SortedPaddedMatrix::from_points(i, j, pts.to_vec()).unwrap();
    rep.matrix.max_abs_diff(&expected)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn roundtrip((i, j, pts) in point_sets()) {
        let err = roundtrip_error(i, j, &pts, 0);
        prop_assert!(err <= 1e-6, "error {err}");
    }

    #[test]
    fn roundtrip_duplicates((i, j, pts) in with_duplicates().prop_filter("separated", |(_, _, p)| separated(p, 1e-2))) {
        let err = roundtrip_error(i, j, &pts, 7);
        prop_assert!(err <= 1e-6, "error {err}");
    }

    #[test]
    fn seed_independent((i, j, pts) in point_sets(), s1 in 0u64..1000, s2 in 0u64..1000) {
        let b = basis(i, j);
        let m = pool(&PointSet::new(i, pts).unwrap(), &b).unwrap();
        let a = reconstruct(&m, &ReconstructConfig::with_seed(s1)).unwrap();
        let c = reconstruct(&m, &ReconstructConfig::with_seed(s2)).unwrap();
        prop_assert!(a.matrix.max_abs_diff(&c.matrix) <= 1e-8);
    }

    #[test]
    fn distinct_multisets_have_distinct_moments((i, j, a) in point_sets(), shift in 1e-3f64..1.0) {
        let mut b = a.clone();
        b[0][0] += shift;
        let basis = basis(i, j);
        let ma = pool(&PointSet::new(i, a).unwrap(), &basis).unwrap();
        let mb = pool(&PointSet::new(i, b).unwrap(), &basis).unwrap();
        prop_assert!(ma.max_abs_diff(&mb) > 1e-9);
    }

    #[test]
    fn residual_within_tolerance((i, j, pts) in point_sets()) {
        let b = basis(i, j);
        let m = pool(&PointSet::new(i, pts.clone()).unwrap(), &b).unwrap();
        let cfg = ReconstructConfig::default();
        let rep = reconstruct(&m, &cfg).unwrap();
        prop_assert!(rep.residual <= cfg.residual_tol);
        prop_assert_eq!(strip_zeros(&rep.matrix, 1e-9).len(), pts.len());
    }

    #[test]
    fn scalar_roots_roundtrip(mut xs in prop::collection::vec(0.1f64..10.0, 1..=5)
        .prop_filter("separated", |x| separated(&x.iter().map(|&v| vec![v]).collect::<Vec<_>>(), 1e-2))) {
        let p: Vec<f64> = (1..=xs.len() as i32).map(|q| xs.iter().map(|x| x.powi(q)).sum()).collect();
        let roots = power_sums_to_multiset(&p, 1e-8).unwrap();
        xs.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (r, x) in roots.iter().zip(&xs) {
            prop_assert!((r - x).abs() <= 1e-6 * (1.0 + x), "{roots:?} vs {xs:?}");
        }
    }
}
