//! Per-layer selection model.
//!
//! A selection distribution draws `n_i` fragments uniformly (with
//! replacement) from layer `i`. For analysis each layer-`i` vertex is treated
//! as included independently with probability `p_i = 1 - (1 - 2^-(d-i))^n_i`.

use serde::{Deserialize, Serialize};

use crate::tree::TreeShape;
use crate::{Error, Result};

/// Inclusion probability of a layer-`layer` vertex after `n_i` draws from that layer.
pub fn n_to_p(n_i: u64, layer: u32, d: u32) -> f64 {
    assert!((1..=d).contains(&layer), "layer {layer} outside 1..={d}");
    if n_i == 0 {
        return 0.0;
    }
    let width = (1u64 << (d - layer)) as f64;
    let miss = 1.0 - 1.0 / width;
    1.0 - miss.powf(n_i as f64)
}

/// Per-layer inclusion probabilities `p_1..p_d` (leaves first).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LayerProbs(Vec<f64>);

impl LayerProbs {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::invalid("need at least one layer probability"));
        }
        if let Some(bad) = p.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::invalid(format!("probability {bad} outside [0, 1]")));
        }
        TreeShape::new(p.len() as u32)?;
        Ok(LayerProbs(p))
    }

    pub fn uniform(d: u32, p: f64) -> Result<Self> {
        LayerProbs::new(vec![p; d as usize])
    }

    pub fn layers(&self) -> u32 {
        self.0.len() as u32
    }

    /// `p_i` for 1-based layer `i`.
    pub fn get(&self, layer: u32) -> f64 {
        self.0[layer as usize - 1]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Probabilities of the bottom `layers` layers, i.e. of a subtree.
    pub fn prefix(&self, layers: u32) -> LayerProbs {
        LayerProbs(self.0[..layers as usize].to_vec())
    }
}

impl TryFrom<Vec<f64>> for LayerProbs {
    type Error = Error;

    fn try_from(p: Vec<f64>) -> Result<Self> {
        LayerProbs::new(p)
    }
}

impl From<LayerProbs> for Vec<f64> {
    fn from(p: LayerProbs) -> Self {
        p.0
    }
}

/// Per-layer draw counts `n_1..n_d` (leaves first).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SelectionDistribution {
    counts: Vec<u64>,
}

impl SelectionDistribution {
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        TreeShape::new(counts.len() as u32)?;
        Ok(SelectionDistribution { counts })
    }

    pub fn shape(&self) -> TreeShape {
        TreeShape::new(self.counts.len() as u32).expect("validated on construction")
    }

    pub fn layers(&self) -> u32 {
        self.counts.len() as u32
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// `n_i` for 1-based layer `i`.
    pub fn count(&self, layer: u32) -> u64 {
        self.counts[layer as usize - 1]
    }

    /// Multiset size `n = sum n_i`.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn probs(&self) -> LayerProbs {
        let d = self.layers();
        LayerProbs(
            self.counts
                .iter()
                .enumerate()
                .map(|(i, &n)| n_to_p(n, i as u32 + 1, d))
                .collect(),
        )
    }

    /// Decoding probability `Q_d` of the induced layer probabilities.
    pub fn decode_prob(&self) -> f64 {
        decode_prob_q(&self.probs())
    }
}

/// Decoding probabilities of every bottom subtree under a [`LayerProbs`].
#[derive(Clone, Debug, PartialEq)]
pub struct DecodeProbs {
    q: Vec<f64>,
    b: Vec<f64>,
}

impl DecodeProbs {
    /// `Q_i`: probability that an `i`-layer subtree decodes on its own.
    pub fn q(&self, layers: u32) -> f64 {
        self.q[layers as usize - 1]
    }

    /// `B_i`: probability that an `i`-layer subtree decodes if and only if its
    /// root is supplied from outside.
    pub fn b(&self, layers: u32) -> f64 {
        self.b[layers as usize - 1]
    }

    pub fn all_q(&self) -> &[f64] {
        &self.q
    }
}

/// Computes `Q_1..Q_d` and `B_1..B_d` bottom-up in `O(d)`.
pub fn decode_probs(p: &LayerProbs) -> DecodeProbs {
    let d = p.layers() as usize;
    let mut q = Vec::with_capacity(d);
    let mut b = Vec::with_capacity(d);
    q.push(p.0[0]);
    b.push(1.0 - p.0[0]);
    // Running product of (1 - p_i) Q_i over the layers below.
    let mut prod = (1.0 - p.0[0]) * p.0[0];
    for i in 1..d {
        let pi = p.0[i];
        let weight = (1u64 << i) as f64;
        let qi = q[i - 1] * q[i - 1] + weight * pi * prod;
        b.push(2.0 * (1.0 - pi) * q[i - 1] * b[i - 1]);
        q.push(qi);
        prod *= (1.0 - pi) * qi;
    }
    DecodeProbs { q, b }
}

/// `Q_d`, the probability that the full tree decodes.
pub fn decode_prob_q(p: &LayerProbs) -> f64 {
    let probs = decode_probs(p);
    probs.q[probs.q.len() - 1]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;

    #[test]
    fn n_to_p_examples() {
        assert_eq!(n_to_p(0, 1, 4), 0.0);
        assert_eq!(n_to_p(0, 4, 4), 0.0);
        assert_eq!(n_to_p(1, 4, 4), 1.0);
        assert_eq!(n_to_p(7, 4, 4), 1.0);
        let expected = 1.0 - (7.0f64 / 8.0).powi(8);
        assert!((n_to_p(8, 1, 4) - expected).abs() < 1e-15);
        assert!((n_to_p(8, 1, 4) - 0.656_391).abs() < 1e-6);
    }

    #[test]
    fn n_to_p_matches_draw_simulation() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let trials = 200_000;
        let hits = (0..trials)
            .filter(|_| (0..8).any(|_| rng.gen_range(0..8) == 0))
            .count();
        let p = n_to_p(8, 1, 4);
        let se = (p * (1.0 - p) / trials as f64).sqrt();
        assert!((hits as f64 / trials as f64 - p).abs() < 4.0 * se);
    }

    #[test]
    fn full_inclusion_always_decodes() {
        for d in 1..=8 {
            assert_eq!(decode_prob_q(&LayerProbs::uniform(d, 1.0).unwrap()), 1.0);
            assert_eq!(decode_prob_q(&LayerProbs::uniform(d, 0.0).unwrap()), 0.0);
        }
    }

    #[test]
    fn two_layer_half_probabilities() {
        let p = LayerProbs::new(vec![0.5, 0.5]).unwrap();
        assert!((decode_prob_q(&p) - 0.5).abs() < 1e-15);
        let probs = decode_probs(&p);
        assert_eq!(probs.b(1), 0.5);
    }

    #[test]
    fn q_matches_pattern_enumeration() {
        let cases = [
            vec![0.5, 0.5],
            vec![0.3, 0.9],
            vec![0.7, 0.2, 0.6],
            vec![0.95, 0.4, 0.1],
            vec![0.0, 1.0, 1.0],
        ];
        for p in cases {
            let lp = LayerProbs::new(p.clone()).unwrap();
            let exact = oracle::bernoulli_decode_prob(&lp);
            assert!((decode_prob_q(&lp) - exact).abs() < 1e-12, "{p:?}");
        }
    }

    #[test]
    fn b_matches_definition() {
        // B_i: not decodable alone, decodable with the root supplied.
        let lp = LayerProbs::new(vec![0.6, 0.3, 0.8]).unwrap();
        let probs = decode_probs(&lp);
        for layers in 1..=3 {
            let exact = oracle::bernoulli_needs_root_prob(&lp.prefix(layers));
            assert!((probs.b(layers) - exact).abs() < 1e-12, "B_{layers}");
        }
    }

    #[test]
    fn rejects_bad_probabilities() {
        assert!(LayerProbs::new(vec![0.5, 1.5]).is_err());
        assert!(LayerProbs::new(vec![]).is_err());
        assert!(LayerProbs::try_from(vec![0.1, 0.2]).is_ok());
    }

    #[test]
    fn distribution_probs() {
        let dist = SelectionDistribution::new(vec![16, 2, 1, 1]).unwrap();
        assert_eq!(dist.total(), 20);
        let p = dist.probs();
        assert_eq!(p.get(4), 1.0);
        assert_eq!(p.get(3), 0.5);
        assert!(dist.decode_prob() >= 0.9);
    }
}
