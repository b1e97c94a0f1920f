use std::collections::BTreeMap;

use num_traits::ToPrimitive;
use proptest::prelude::*;

use treeplication::augmentation::{apply, augment, survival_after_losses, Policy};
use treeplication::health::{cover_survival_ratio, principal_cover};
use treeplication::oracle;
use treeplication::recovery::{plan_recovery, recovery_cost};
use treeplication::tree::{decode, encode};
use treeplication::{Error, Multiset, Subset, TreeShape, VertexId};

fn subset_strategy(max_d: u32) -> impl Strategy<Value = Subset> {
    (1..=max_d).prop_flat_map(|d| {
        let shape = TreeShape::new(d).unwrap();
        let m = shape.vertex_count();
        any::<u64>().prop_map(move |bits| Subset::from_mask(shape, bits & ((1u64 << m) - 1)))
    })
}

fn multiset_strategy(max_d: u32, max_w: u64) -> impl Strategy<Value = Multiset> {
    (1..=max_d).prop_flat_map(move |d| {
        let shape = TreeShape::new(d).unwrap();
        prop::collection::vec(0..=max_w, shape.vertex_count()).prop_map(move |ws| {
            let mut ms = Multiset::empty(shape);
            for (h, w) in ws.into_iter().enumerate() {
                ms.set_weight(shape.vertex(h + 1), w);
            }
            ms
        })
    })
}

proptest! {
    #[test]
    fn decodability_matches_rank(s in subset_strategy(6)) {
        prop_assert_eq!(s.is_decodable(), oracle::rank_oracle_decodable(&s));
    }

    #[test]
    fn adding_vertices_keeps_decodability(s in subset_strategy(6), extra in any::<u64>()) {
        let shape = s.shape();
        let mut bigger = s.clone();
        for h in 1..=shape.vertex_count() {
            if extra >> (h % 64) & 1 == 1 {
                bigger.insert(shape.vertex(h));
            }
        }
        prop_assert!(!s.is_decodable() || bigger.is_decodable());
    }

    #[test]
    fn decode_recovers_data(s in subset_strategy(5), seed in any::<u8>()) {
        let shape = s.shape();
        let data: Vec<Vec<u8>> = (0..shape.leaves())
            .map(|j| (0..6).map(|b| seed.wrapping_mul(j as u8 + 3).wrapping_add(b)).collect())
            .collect();
        let cw = encode(&data, shape).unwrap();
        let available: BTreeMap<VertexId, Vec<u8>> = cw.restrict(&s);
        match decode(shape, &available) {
            Ok(out) => {
                prop_assert!(s.is_decodable());
                prop_assert_eq!(out, data);
            }
            Err(Error::NonDecodable) => prop_assert!(!s.is_decodable()),
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn recovery_cost_is_bounded(s in subset_strategy(6)) {
        let k = s.shape().leaves();
        match plan_recovery(&s) {
            Ok(plan) => {
                prop_assert!(plan.total_cost() < k.max(2));
                prop_assert_eq!(recovery_cost(&s), Some(plan.total_cost()));
                let missing = (1..=k as u32).filter(|&j| !s.contains(VertexId::leaf(j))).count();
                prop_assert_eq!(plan.assignments.len(), missing);
            }
            Err(_) => prop_assert_eq!(recovery_cost(&s), None),
        }
    }

    #[test]
    fn principal_cover_partitions_the_tree(ms in multiset_strategy(6, 4)) {
        let cover = principal_cover(&ms);
        prop_assert!(cover.is_valid(ms.shape()));
        prop_assert_eq!(cover.weight_profile().iter().sum::<u64>(), ms.total());
    }

    #[test]
    fn cover_survival_matches_enumeration(profile in prop::collection::vec(0u64..=3, 1..=4), l in 0u64..=12) {
        let n: u64 = profile.iter().sum();
        prop_assume!(l <= n);
        prop_assert_eq!(
            cover_survival_ratio(&profile, n, l).unwrap(),
            oracle::cover_survival_by_enumeration(&profile, l)
        );
    }

    #[test]
    fn loss_survival_matches_enumeration(ms in multiset_strategy(3, 2), l in 0u64..=6) {
        prop_assume!(l <= ms.total());
        let s = survival_after_losses(&ms, l).unwrap();
        prop_assert!(s.exact);
        let want = oracle::survival_by_enumeration(&ms, l).to_f64().unwrap();
        prop_assert!((s.prob - want).abs() < 1e-9, "{} vs {}", s.prob, want);
    }

    #[test]
    fn augmentation_adds_one_element(ms in multiset_strategy(5, 3), pick in any::<usize>(), sibling in any::<bool>()) {
        let shape = ms.shape();
        let held: Vec<VertexId> = shape.vertices().filter(|&v| ms.weight(v) > 0).collect();
        prop_assume!(!held.is_empty());
        let z = held[pick % held.len()];
        let policy = if sibling { Policy::Sibling } else { Policy::Replicate };
        let decision = augment(&ms, z, policy).unwrap();
        let mut after = ms.clone();
        apply(&mut after, &decision);
        prop_assert_eq!(after.total(), ms.total() + 1);
        prop_assert!(after.support().is_superset_of(&ms.support()));
    }
}
