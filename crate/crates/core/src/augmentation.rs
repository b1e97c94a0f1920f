//! Choosing which fragment a newly joining node should store, using only the
//! nodes that hold a picked vertex, its parent and its sibling.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::tree::{Multiset, VertexId};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Copy the fragment from a node that already stores it.
    Replicate,
    /// XOR the parent's fragment with the picked vertex's fragment.
    GenerateFromParent,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Sibling,
    Replicate,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AugmentationDecision {
    pub new_vertex: VertexId,
    /// Vertices whose holders were consulted.
    pub accessible: Vec<VertexId>,
    pub method: Method,
    /// Set when the sibling rule did not apply and plain replication was used instead.
    pub fallback: Option<String>,
}

fn check_picked(ms: &Multiset, z: VertexId) -> Result<()> {
    ms.shape().check(z)?;
    if ms.weight(z) == 0 {
        return Err(Error::invalid(format!("vertex {z} has no holder to pick")));
    }
    Ok(())
}

/// Replicate the picked vertex.
pub fn augment_replicate(ms: &Multiset, z: VertexId) -> Result<AugmentationDecision> {
    check_picked(ms, z)?;
    Ok(AugmentationDecision {
        new_vertex: z,
        accessible: vec![z],
        method: Method::Replicate,
        fallback: None,
    })
}

/// Strengthen the lighter of the picked vertex and its sibling.
///
/// The root has no parent or sibling; picking it falls back to replication.
pub fn augment_sibling(ms: &Multiset, z: VertexId) -> Result<AugmentationDecision> {
    check_picked(ms, z)?;
    let shape = ms.shape();
    let (Some(parent), Some(sibling)) = (shape.parent(z), shape.sibling(z)) else {
        let mut d = augment_replicate(ms, z)?;
        d.fallback = Some("root picked; replicated".into());
        return Ok(d);
    };
    let accessible = vec![z, parent, sibling];
    let (wz, wp, ws) = (ms.weight(z), ms.weight(parent), ms.weight(sibling));
    if wp == 0 && ws == 0 {
        return Ok(AugmentationDecision {
            new_vertex: z,
            accessible,
            method: Method::Replicate,
            fallback: None,
        });
    }
    let lighter = match wz.cmp(&ws) {
        std::cmp::Ordering::Less => z,
        std::cmp::Ordering::Greater => sibling,
        std::cmp::Ordering::Equal => z.min(sibling),
    };
    let method = if ms.weight(lighter) > 0 {
        Method::Replicate
    } else {
        Method::GenerateFromParent
    };
    Ok(AugmentationDecision {
        new_vertex: lighter,
        accessible,
        method,
        fallback: None,
    })
}

pub fn augment(ms: &Multiset, z: VertexId, policy: Policy) -> Result<AugmentationDecision> {
    match policy {
        Policy::Sibling => augment_sibling(ms, z),
        Policy::Replicate => augment_replicate(ms, z),
    }
}

/// Adds the decided fragment to the multiset.
pub fn apply(ms: &mut Multiset, decision: &AugmentationDecision) {
    ms.add(decision.new_vertex);
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Survival {
    pub prob: f64,
    /// `None` for exact results.
    pub std_err: Option<f64>,
    pub exact: bool,
}

/// Loss vectors beyond this count switch evaluation to sampling.
pub const EXACT_LIMIT: u64 = 1_000_000;
pub const SAMPLED_TRIALS: u64 = 100_000;

/// Number of loss count vectors `c` with `c_v <= w_v` and `sum c_v = l`, saturating at `cap + 1`.
fn loss_vector_count(weights: &[u64], l: u64, cap: u64) -> u64 {
    let l = l as usize;
    let mut ways = vec![0u64; l + 1];
    ways[0] = 1;
    for &w in weights {
        let mut next = vec![0u64; l + 1];
        for (s, &c) in ways.iter().enumerate() {
            if c == 0 {
                continue;
            }
            for take in 0..=(w as usize).min(l - s) {
                next[s + take] = (next[s + take] + c).min(cap + 1);
            }
        }
        ways = next;
    }
    ways[l]
}

fn ln_binomial(ln_fact: &[f64], n: u64, r: u64) -> f64 {
    ln_fact[n as usize] - ln_fact[r as usize] - ln_fact[(n - r) as usize]
}

/// Probability that the support stays decodable after losing `l` elements
/// chosen uniformly without replacement.
///
/// Exact over loss count vectors when there are at most [`EXACT_LIMIT`] of
/// them, otherwise sampled with [`SAMPLED_TRIALS`] trials.
pub fn survival_after_losses(ms: &Multiset, l: u64) -> Result<Survival> {
    survival_with(ms, l, EXACT_LIMIT, SAMPLED_TRIALS, 0)
}

/// As [`survival_after_losses`] with explicit limits and sampling seed.
pub fn survival_with(
    ms: &Multiset,
    l: u64,
    exact_limit: u64,
    trials: u64,
    seed: u64,
) -> Result<Survival> {
    let n = ms.total();
    if l > n {
        return Err(Error::InvalidLoss { l, n });
    }
    let shape = ms.shape();
    let support: Vec<usize> = (1..=shape.vertex_count())
        .filter(|&h| ms.weight_heap(h) > 0)
        .collect();
    let weights: Vec<u64> = support.iter().map(|&h| ms.weight_heap(h)).collect();
    if loss_vector_count(&weights, l, exact_limit) <= exact_limit {
        let mut ln_fact = vec![0.0f64; n as usize + 1];
        for i in 1..=n as usize {
            ln_fact[i] = ln_fact[i - 1] + (i as f64).ln();
        }
        let ln_total = ln_binomial(&ln_fact, n, l);
        let mut survivors = ms.support();
        let mut prob = 0.0;
        exact_walk(
            &weights,
            &support,
            0,
            l,
            0.0,
            &mut survivors,
            &mut |ln_w, s| {
                if s.is_decodable() {
                    prob += (ln_w - ln_total).exp();
                }
            },
            &ln_fact,
        );
        return Ok(Survival {
            prob: prob.min(1.0),
            std_err: None,
            exact: true,
        });
    }
    survival_sampled(ms, l, trials, seed)
}

#[allow(clippy::too_many_arguments)]
fn exact_walk(
    weights: &[u64],
    heaps: &[usize],
    i: usize,
    left: u64,
    ln_w: f64,
    survivors: &mut crate::tree::Subset,
    visit: &mut dyn FnMut(f64, &crate::tree::Subset),
    ln_fact: &[f64],
) {
    if i == weights.len() {
        if left == 0 {
            visit(ln_w, survivors);
        }
        return;
    }
    let rest: u64 = weights[i + 1..].iter().sum();
    let lo = left.saturating_sub(rest);
    for c in lo..=weights[i].min(left) {
        let gone = c == weights[i];
        if gone {
            survivors.set_heap(heaps[i], false);
        }
        let w = ln_w + ln_binomial(ln_fact, weights[i], c);
        exact_walk(
            weights,
            heaps,
            i + 1,
            left - c,
            w,
            survivors,
            visit,
            ln_fact,
        );
        if gone {
            survivors.set_heap(heaps[i], true);
        }
    }
}

/// Sampled survival probability with its standard error.
pub fn survival_sampled(ms: &Multiset, l: u64, trials: u64, seed: u64) -> Result<Survival> {
    let n = ms.total();
    if l > n {
        return Err(Error::InvalidLoss { l, n });
    }
    if trials == 0 {
        return Err(Error::invalid("need at least one trial"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0u64;
    for _ in 0..trials {
        let mut left = ms.clone();
        for rank in index::sample(&mut rng, n as usize, l as usize) {
            let h = ms.element_heap(rank as u64);
            let v = ms.shape().vertex(h);
            left.remove(v);
        }
        if left.support().is_decodable() {
            hits += 1;
        }
    }
    let p = hits as f64 / trials as f64;
    let sd = if trials > 1 {
        (p * (1.0 - p) * trials as f64 / (trials - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(Survival {
        prob: p,
        std_err: Some(sd / (trials as f64).sqrt()),
        exact: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ms(rows: &[&[u64]]) -> Multiset {
        Multiset::from_layers(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    const L: VertexId = VertexId::leaf(1);
    const R: VertexId = VertexId::leaf(2);

    #[test]
    fn lighter_sibling_is_replicated() {
        let d = augment_sibling(&ms(&[&[4, 1], &[2]]), L).unwrap();
        assert_eq!(d.new_vertex, R);
        assert_eq!(d.method, Method::Replicate);
        assert_eq!(d.accessible, vec![L, VertexId::new(2, 1), R]);
    }

    #[test]
    fn missing_sibling_is_generated() {
        let d = augment_sibling(&ms(&[&[3, 0], &[1]]), L).unwrap();
        assert_eq!(d.new_vertex, R);
        assert_eq!(d.method, Method::GenerateFromParent);
    }

    #[test]
    fn lone_vertex_is_replicated() {
        let d = augment_sibling(&ms(&[&[2, 0], &[0]]), L).unwrap();
        assert_eq!(d.new_vertex, L);
        assert_eq!(d.method, Method::Replicate);
    }

    #[test]
    fn ties_prefer_left() {
        let d = augment_sibling(&ms(&[&[2, 2], &[1]]), R).unwrap();
        assert_eq!(d.new_vertex, L);
    }

    #[test]
    fn root_falls_back() {
        let m = ms(&[&[1, 1], &[1]]);
        let d = augment_sibling(&m, VertexId::new(2, 1)).unwrap();
        assert_eq!(d.new_vertex, VertexId::new(2, 1));
        assert!(d.fallback.is_some());
    }

    #[test]
    fn picked_vertex_needs_a_holder() {
        assert!(augment_sibling(&ms(&[&[0, 1], &[1]]), L).is_err());
        assert!(augment_replicate(&ms(&[&[0, 1], &[1]]), L).is_err());
    }

    #[test]
    fn replicate_round_trip() {
        let original = ms(&[&[1, 2, 0, 1], &[1, 0], &[1]]);
        let mut m = original.clone();
        let d = augment_replicate(&m, L).unwrap();
        apply(&mut m, &d);
        assert_eq!(m.weight(L), 2);
        assert!(m.remove(L));
        assert_eq!(m, original);
    }

    #[test]
    fn survival_examples() {
        let m = ms(&[&[1, 1], &[1]]);
        assert_eq!(survival_after_losses(&m, 0).unwrap().prob, 1.0);
        let one = survival_after_losses(&m, 1).unwrap();
        assert!(one.exact);
        assert!((one.prob - 1.0).abs() < 1e-12);
        assert!(matches!(
            survival_after_losses(&m, 4),
            Err(Error::InvalidLoss { .. })
        ));
    }

    #[test]
    fn survival_pair_losses() {
        // Six equally likely loss pairs from {L, L, R, root}; only losing R
        // together with the root breaks decoding.
        let m = ms(&[&[2, 1], &[1]]);
        let s = survival_after_losses(&m, 2).unwrap();
        assert!((s.prob - 5.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn sampled_path_agrees() {
        let m = ms(&[&[2, 1, 0, 3], &[1, 2], &[1]]);
        let exact = survival_after_losses(&m, 3).unwrap();
        let sampled = survival_with(&m, 3, 0, 50_000, 9).unwrap();
        assert!(!sampled.exact);
        let se = sampled.std_err.unwrap();
        assert!((exact.prob - sampled.prob).abs() < 4.0 * se + 1e-9);
    }

    #[test]
    fn vector_count() {
        assert_eq!(loss_vector_count(&[2, 1, 1], 2, 100), 4);
        assert_eq!(loss_vector_count(&[5; 10], 20, 10), 11);
    }
}
