//! Search for the per-layer selection distribution maximizing `Q_d`.
//!
//! Only non-squashing distributions (`n_i >= sum_{j>i} n_j`) are visited:
//! layers are filled bottom-up, layer `j` keeping `B - b` of the remaining
//! budget `B` and passing `b <= B/2` on to the layers above.

use serde::{Deserialize, Serialize};

use crate::combinatorics::{self, count_decodable};
use crate::nonuniform::{decode_prob_q, SelectionDistribution};
use crate::tree::TreeShape;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SearchResult {
    pub best: SelectionDistribution,
    pub q_star: f64,
    /// Number of candidate distributions whose `Q_d` was evaluated.
    pub explored: u64,
}

struct Search {
    d: usize,
    counts: Vec<u64>,
    best: Vec<u64>,
    q_star: f64,
    explored: u64,
}

impl Search {
    fn distribute(&mut self, j: usize, budget: u64) {
        if budget == 0 || j >= self.d {
            self.explored += 1;
            let dist =
                SelectionDistribution::new(self.counts.clone()).expect("d already validated");
            let q = decode_prob_q(&dist.probs());
            if q > self.q_star {
                self.q_star = q;
                self.best.copy_from_slice(&self.counts);
            }
            return;
        }
        for b in 0..=budget / 2 {
            self.counts[j] = budget - b;
            self.distribute(j + 1, b);
        }
        self.counts[j] = 0;
    }
}

/// Best selection distribution with `sum n_i = n` for a `d`-layer tree.
///
/// Ties keep the first maximum in enumeration order.
pub fn optimal_distribution(d: u32, n: u64) -> Result<SearchResult> {
    let shape = TreeShape::new(d)?;
    let k = shape.leaves() as u64;
    if n < k {
        return Err(Error::BudgetTooSmall { n, k });
    }
    let mut search = Search {
        d: d as usize,
        counts: vec![0; d as usize],
        best: vec![0; d as usize],
        q_star: 0.0,
        explored: 0,
    };
    search.distribute(0, n);
    Ok(SearchResult {
        best: SelectionDistribution::new(search.best)?,
        q_star: search.q_star,
        explored: search.explored,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Uniform i.i.d. selection over all tree vertices.
    Uniform,
    /// Optimal per-layer selection.
    Nonuniform,
    /// Uncoded replication of the `k` data fragments.
    Replication,
}

/// Decoding probability of `scheme` with `n` stored fragments on a `d`-layer tree.
pub fn scheme_probability(d: u32, n: u64, scheme: Scheme) -> Result<f64> {
    let k = TreeShape::new(d)?.leaves() as u64;
    Ok(match scheme {
        Scheme::Uniform => combinatorics::uniform_decode_prob(d, n),
        Scheme::Replication => combinatorics::replication_decode_prob(k, n),
        Scheme::Nonuniform => {
            if n < k {
                0.0
            } else {
                optimal_distribution(d, n)?.q_star
            }
        }
    })
}

/// Smallest `n` whose decoding probability under `scheme` reaches `target`.
///
/// Scans upward from `n = k`; monotonicity in `n` is not assumed.
pub fn min_n_for_target(d: u32, target: f64, scheme: Scheme) -> Result<u64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::invalid(format!(
            "target must be in (0, 1), got {target}"
        )));
    }
    let shape = TreeShape::new(d)?;
    let k = shape.leaves() as u64;
    let counts = (scheme == Scheme::Uniform).then(|| count_decodable(d));
    let mut n = k;
    loop {
        let p = match (&counts, scheme) {
            (Some(c), _) => {
                use num_traits::ToPrimitive;
                combinatorics::uniform_decode_ratio_with(c, n)
                    .to_f64()
                    .unwrap_or(0.0)
            }
            _ => scheme_probability(d, n, scheme)?,
        };
        if p >= target {
            return Ok(n);
        }
        n += 1;
    }
}

/// Necessary conditions for optimality that a distribution can be checked against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct OptimalityChecks {
    /// `p_i <= p_{i-1}` for every layer above the leaves.
    pub probs_nonincreasing: bool,
    /// `n_{i-1} >= 2 n_i` for every layer above the leaves.
    pub counts_halving: bool,
    /// `n_i >= sum_{j>i} n_j` for every layer below the root.
    pub non_squashing: bool,
}

impl OptimalityChecks {
    pub fn all(&self) -> bool {
        self.probs_nonincreasing && self.counts_halving && self.non_squashing
    }
}

pub fn optimality_checks(dist: &SelectionDistribution) -> OptimalityChecks {
    let n = dist.counts();
    let p = dist.probs();
    let p = p.as_slice();
    let d = n.len();
    OptimalityChecks {
        probs_nonincreasing: (1..d).all(|i| p[i] <= p[i - 1]),
        counts_halving: (1..d).all(|i| n[i - 1] >= 2 * n[i]),
        non_squashing: (0..d).all(|i| n[i] >= n[i + 1..].iter().sum::<u64>()),
    }
}

/// True when `dist` passes every check in [`OptimalityChecks`].
pub fn verify_optimality_properties(dist: &SelectionDistribution) -> bool {
    optimality_checks(dist).all()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;

    #[test]
    fn single_layer_takes_everything() {
        let r = optimal_distribution(1, 3).unwrap();
        assert_eq!(r.best.counts(), &[3]);
        assert_eq!(r.q_star, 1.0);
    }

    #[test]
    fn eight_leaves_twenty_fragments() {
        let r = optimal_distribution(4, 20).unwrap();
        assert_eq!(r.best.counts(), &[16, 2, 1, 1]);
        assert!(r.q_star >= 0.9);
    }

    #[test]
    fn two_layers_four_fragments() {
        let r = optimal_distribution(2, 4).unwrap();
        let candidates = [[4u64, 0], [3, 1], [2, 2]];
        let best = candidates
            .iter()
            .map(|c| {
                (
                    SelectionDistribution::new(c.to_vec())
                        .unwrap()
                        .decode_prob(),
                    c,
                )
            })
            .fold((f64::MIN, &candidates[0]), |acc, x| {
                if x.0 > acc.0 {
                    x
                } else {
                    acc
                }
            });
        assert_eq!(r.best.counts(), best.1);
        assert_eq!(r.best.counts(), &[3, 1]);
    }

    #[test]
    fn budget_too_small() {
        assert!(matches!(
            optimal_distribution(3, 3),
            Err(Error::BudgetTooSmall { n: 3, k: 4 })
        ));
    }

    #[test]
    fn pruned_search_against_all_compositions() {
        // The pruned search is exact except for two budgets where the best
        // split leaves the middle layer empty: (3, 0, 1) and (4, 0, 1).
        let misses = [(3, 4u64), (3, 5)];
        for d in 1..=3 {
            let k = 1u64 << (d - 1);
            for n in k..=20 {
                let pruned = optimal_distribution(d, n).unwrap();
                let brute = oracle::best_composition(d, n);
                assert_eq!(pruned.best.total(), n);
                assert!(pruned.q_star <= brute + 1e-12);
                if misses.contains(&(d, n)) {
                    assert!(brute - pruned.q_star > 1e-3, "d={d} n={n}");
                } else {
                    assert!((pruned.q_star - brute).abs() < 1e-12, "d={d} n={n}");
                }
            }
        }
        let skipped = SelectionDistribution::new(vec![3, 0, 1]).unwrap();
        assert!((skipped.decode_prob() - oracle::best_composition(3, 4)).abs() < 1e-15);
    }

    #[test]
    fn small_table_rows() {
        assert_eq!(min_n_for_target(2, 0.9, Scheme::Replication).unwrap(), 5);
        assert_eq!(min_n_for_target(2, 0.9, Scheme::Uniform).unwrap(), 4);
        assert_eq!(min_n_for_target(2, 0.9, Scheme::Nonuniform).unwrap(), 3);
        assert_eq!(min_n_for_target(4, 0.9, Scheme::Nonuniform).unwrap(), 20);
        assert!(min_n_for_target(4, 1.0, Scheme::Uniform).is_err());
    }

    #[test]
    fn optimality_checks_examples() {
        let bad = SelectionDistribution::new(vec![1, 2, 0, 0]).unwrap();
        assert!(!optimality_checks(&bad).counts_halving);
        assert!(!verify_optimality_properties(&bad));
        let good = SelectionDistribution::new(vec![16, 4, 1, 0]).unwrap();
        assert!(verify_optimality_properties(&good));
    }

    #[test]
    fn reported_optimum_breaks_the_monotone_checks() {
        // p = (0.88, 0.44, 0.5, 1): the two top layers are saturated by a
        // single draw each.
        let dist = optimal_distribution(4, 20).unwrap().best;
        let checks = optimality_checks(&dist);
        assert!(checks.non_squashing);
        assert!(!checks.probs_nonincreasing);
        assert!(!checks.counts_halving);
    }

    #[test]
    fn returned_optima_are_non_squashing() {
        for d in 1..=4 {
            let k = 1u64 << (d - 1);
            for n in k..=40 {
                let r = optimal_distribution(d, n).unwrap();
                assert!(optimality_checks(&r.best).non_squashing, "d={d} n={n}");
            }
        }
    }
}
