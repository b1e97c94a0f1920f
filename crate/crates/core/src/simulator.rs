//! Seeded Monte-Carlo experiments.
//!
//! Trial `t` of a run seeded with `s` draws from `ChaCha8Rng::seed_from_u64(s)`
//! switched to stream `t`, so results do not depend on how trials are
//! scheduled across threads.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augmentation::{apply, augment, Policy};
use crate::nonuniform::{LayerProbs, SelectionDistribution};
use crate::optimizer::optimal_distribution;
use crate::recovery::recovery_cost;
use crate::tree::{Multiset, TreeShape};
use crate::{Error, Result};

/// RNG for trial `trial` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Runs `f` once per trial index and returns the results in trial order.
pub fn run_trials<T, F>(trials: u64, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, &mut ChaCha8Rng) -> T + Sync,
{
    (0..trials)
        .into_par_iter()
        .map(|t| f(t, &mut trial_rng(seed, t)))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum SamplingModel {
    /// `n` i.i.d. draws over all `2^d - 1` vertices.
    UniformDraw { layers: u32, n: u64 },
    /// `n_i` i.i.d. draws within layer `i`.
    LayerDraw { counts: Vec<u64> },
    /// Each layer-`i` vertex present independently with probability `p_i`.
    Bernoulli { p: Vec<f64> },
}

impl SamplingModel {
    /// Uncoded replication: all draws land on the leaves.
    pub fn replication(layers: u32, n: u64) -> Self {
        let mut counts = vec![0; layers as usize];
        counts[0] = n;
        SamplingModel::LayerDraw { counts }
    }

    pub fn layer_draw(dist: &SelectionDistribution) -> Self {
        SamplingModel::LayerDraw {
            counts: dist.counts().to_vec(),
        }
    }

    pub fn shape(&self) -> Result<TreeShape> {
        match self {
            SamplingModel::UniformDraw { layers, .. } => TreeShape::new(*layers),
            SamplingModel::LayerDraw { counts } => TreeShape::new(counts.len() as u32),
            SamplingModel::Bernoulli { p } => {
                LayerProbs::new(p.clone())?;
                TreeShape::new(p.len() as u32)
            }
        }
    }
}

pub fn sample_multiset<R: Rng + ?Sized>(model: &SamplingModel, rng: &mut R) -> Result<Multiset> {
    let shape = model.shape()?;
    let mut ms = Multiset::empty(shape);
    match model {
        SamplingModel::UniformDraw { n, .. } => {
            let m = shape.vertex_count();
            for _ in 0..*n {
                ms.add_heap(rng.gen_range(1..=m));
            }
        }
        SamplingModel::LayerDraw { counts } => {
            for (i, &c) in counts.iter().enumerate() {
                let heaps = shape.layer_heaps(i as u32 + 1);
                for _ in 0..c {
                    ms.add_heap(rng.gen_range(heaps.clone()));
                }
            }
        }
        SamplingModel::Bernoulli { p } => {
            for h in 1..=shape.vertex_count() {
                if rng.gen_bool(p[shape.heap_layer(h) as usize - 1]) {
                    ms.add_heap(h);
                }
            }
        }
    }
    Ok(ms)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RunStats {
    pub trials: u64,
    /// Trials contributing to `mean` (decodable instances, or survived runs).
    pub successes: u64,
    pub mean: f64,
    /// Sample standard deviation over the contributing trials, divided by the square root of their count.
    pub std_err: f64,
    /// Counts of each integer outcome among the contributing trials.
    pub histogram: BTreeMap<u64, u64>,
}

impl RunStats {
    fn from_samples(trials: u64, samples: &[f64]) -> Self {
        let count = samples.len();
        let mean = if count == 0 {
            0.0
        } else {
            samples.iter().sum::<f64>() / count as f64
        };
        let std_err = if count > 1 {
            let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (count - 1) as f64;
            (var / count as f64).sqrt()
        } else {
            0.0
        };
        let mut histogram = BTreeMap::new();
        for &x in samples {
            *histogram.entry(x as u64).or_insert(0) += 1;
        }
        RunStats {
            trials,
            successes: count as u64,
            mean,
            std_err,
            histogram,
        }
    }

    /// Normal-approximation 95% confidence interval for the mean.
    pub fn ci95(&self) -> (f64, f64) {
        (
            self.mean - 1.96 * self.std_err,
            self.mean + 1.96 * self.std_err,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Decodable,
    NonDecodable,
    DataLoss,
    Capped,
}

/// One line of per-trial output.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub outcome: Outcome,
    /// Recovery cost or generations survived, when meaningful.
    pub value: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Run {
    pub stats: RunStats,
    #[serde(skip)]
    pub records: Vec<TrialRecord>,
}

fn check_trials(trials: u64) -> Result<()> {
    if trials == 0 {
        return Err(Error::invalid("need at least one trial"));
    }
    Ok(())
}

/// Fraction of sampled supports that decode.
pub fn mc_decodability(model: &SamplingModel, trials: u64, seed: u64) -> Result<Run> {
    check_trials(trials)?;
    model.shape()?;
    let records = run_trials(trials, seed, |t, rng| {
        let ms = sample_multiset(model, rng).expect("model validated");
        let ok = ms.support().is_decodable();
        TrialRecord {
            trial: t,
            outcome: if ok {
                Outcome::Decodable
            } else {
                Outcome::NonDecodable
            },
            value: Some(if ok { 1.0 } else { 0.0 }),
        }
    });
    let samples: Vec<f64> = records.iter().map(|r| r.value.unwrap_or(0.0)).collect();
    let mut stats = RunStats::from_samples(trials, &samples);
    stats.successes = records
        .iter()
        .filter(|r| r.outcome == Outcome::Decodable)
        .count() as u64;
    Ok(Run { stats, records })
}

fn cost_run(trials: u64, records: Vec<TrialRecord>) -> Run {
    let samples: Vec<f64> = records.iter().filter_map(|r| r.value).collect();
    Run {
        stats: RunStats::from_samples(trials, &samples),
        records,
    }
}

/// Mean recovery cost over the decodable sampled instances.
pub fn mc_comm_cost(model: &SamplingModel, trials: u64, seed: u64) -> Result<Run> {
    check_trials(trials)?;
    model.shape()?;
    let records = run_trials(trials, seed, |t, rng| {
        let ms = sample_multiset(model, rng).expect("model validated");
        match recovery_cost(&ms.support()) {
            Some(c) => TrialRecord {
                trial: t,
                outcome: Outcome::Decodable,
                value: Some(c as f64),
            },
            None => TrialRecord {
                trial: t,
                outcome: Outcome::NonDecodable,
                value: None,
            },
        }
    });
    Ok(cost_run(trials, records))
}

/// Mean recovery cost of a systematic MDS code of length `2k - 1` over `n`
/// uniform symbol draws: each absent systematic symbol costs `k - 1`.
pub fn mc_mds_cost(k: u64, n: u64, trials: u64, seed: u64) -> Result<Run> {
    check_trials(trials)?;
    if k == 0 {
        return Err(Error::invalid("k must be positive"));
    }
    let symbols = (2 * k - 1) as usize;
    let records = run_trials(trials, seed, |t, rng| {
        let mut seen = vec![false; symbols];
        for _ in 0..n {
            seen[rng.gen_range(0..symbols)] = true;
        }
        let distinct = seen.iter().filter(|&&s| s).count() as u64;
        if distinct < k {
            return TrialRecord {
                trial: t,
                outcome: Outcome::NonDecodable,
                value: None,
            };
        }
        let missing = seen[..k as usize].iter().filter(|&&s| !s).count() as u64;
        TrialRecord {
            trial: t,
            outcome: Outcome::Decodable,
            value: Some(((k - 1) * missing) as f64),
        }
    });
    Ok(cost_run(trials, records))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodeScheme {
    Treeplication,
    Replication,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BirthDeathConfig {
    pub k: u64,
    /// Initial per-layer draw counts; defaults to the optimal distribution
    /// for `n = 3k` (tree) or `3k` leaf draws (replication).
    #[serde(default)]
    pub initial: Option<Vec<u64>>,
    pub augmentation: Policy,
    pub code: CodeScheme,
    #[serde(default = "default_birth_prob")]
    pub birth_prob: f64,
    #[serde(default = "default_max_generations")]
    pub max_generations: u64,
    #[serde(default)]
    pub seed: u64,
}

fn default_birth_prob() -> f64 {
    0.5
}

fn default_max_generations() -> u64 {
    100_000
}

impl BirthDeathConfig {
    pub fn new(k: u64, code: CodeScheme, augmentation: Policy, seed: u64) -> Self {
        BirthDeathConfig {
            k,
            initial: None,
            augmentation,
            code,
            birth_prob: default_birth_prob(),
            max_generations: default_max_generations(),
            seed,
        }
    }

    /// Checks the configuration and resolves the initial distribution.
    pub fn resolve(&self) -> Result<ResolvedBirthDeath> {
        let shape = TreeShape::from_leaves(self.k)?;
        if !(0.0..=1.0).contains(&self.birth_prob) {
            return Err(Error::invalid("birth probability outside [0, 1]"));
        }
        if self.code == CodeScheme::Replication && self.augmentation == Policy::Sibling {
            return Err(Error::invalid("sibling augmentation needs the tree code"));
        }
        let d = shape.layers();
        let counts = match (&self.initial, self.code) {
            (Some(c), _) => {
                if c.len() != d as usize {
                    return Err(Error::invalid(format!(
                        "initial distribution needs {d} layers"
                    )));
                }
                c.clone()
            }
            (None, CodeScheme::Treeplication) => {
                optimal_distribution(d, 3 * self.k)?.best.counts().to_vec()
            }
            (None, CodeScheme::Replication) => {
                let mut c = vec![0; d as usize];
                c[0] = 3 * self.k;
                c
            }
        };
        if self.code == CodeScheme::Replication && counts[1..].iter().any(|&c| c > 0) {
            return Err(Error::invalid("replication stores leaves only"));
        }
        if counts.iter().sum::<u64>() < self.k {
            return Err(Error::BudgetTooSmall {
                n: counts.iter().sum(),
                k: self.k,
            });
        }
        Ok(ResolvedBirthDeath {
            config: self.clone(),
            model: SamplingModel::LayerDraw { counts },
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResolvedBirthDeath {
    config: BirthDeathConfig,
    model: SamplingModel,
}

impl ResolvedBirthDeath {
    pub fn initial_model(&self) -> &SamplingModel {
        &self.model
    }

    pub fn config(&self) -> &BirthDeathConfig {
        &self.config
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct BirthDeathOutcome {
    /// Instants completed before data loss, or the cap.
    pub generations: u64,
    pub capped: bool,
    /// Initial multisets rejected as non-decodable.
    pub rejects: u64,
}

/// Maximum initial resamples before giving up on an initial distribution.
const MAX_REJECTS: u64 = 1_000_000;

/// One birth-death trajectory on the RNG stream of run `run`.
pub fn birth_death_run(resolved: &ResolvedBirthDeath, run: u64) -> Result<BirthDeathOutcome> {
    let cfg = &resolved.config;
    let mut rng = trial_rng(cfg.seed, run);
    let mut rejects = 0;
    let mut ms = loop {
        let ms = sample_multiset(&resolved.model, &mut rng)?;
        if ms.support().is_decodable() {
            break ms;
        }
        rejects += 1;
        if rejects >= MAX_REJECTS {
            return Err(Error::DegenerateModel);
        }
    };
    let shape = ms.shape();
    for t in 0..cfg.max_generations {
        if rng.gen_bool(cfg.birth_prob) {
            let h = ms.element_heap(rng.gen_range(0..ms.total()));
            let decision = augment(&ms, shape.vertex(h), cfg.augmentation)?;
            apply(&mut ms, &decision);
        } else {
            let h = ms.element_heap(rng.gen_range(0..ms.total()));
            let v = shape.vertex(h);
            ms.remove(v);
            if ms.weight(v) == 0 && !ms.support().is_decodable() {
                return Ok(BirthDeathOutcome {
                    generations: t,
                    capped: false,
                    rejects,
                });
            }
        }
    }
    Ok(BirthDeathOutcome {
        generations: cfg.max_generations,
        capped: true,
        rejects,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BirthDeathSummary {
    pub config: BirthDeathConfig,
    pub runs: u64,
    /// Generations over all runs, capped runs counted at the cap.
    pub stats: RunStats,
    pub capped: u64,
    pub rejects: u64,
    #[serde(skip)]
    pub records: Vec<TrialRecord>,
}

/// `runs` independent trajectories.
pub fn birth_death_batch(config: &BirthDeathConfig, runs: u64) -> Result<BirthDeathSummary> {
    check_trials(runs)?;
    let resolved = config.resolve()?;
    let outcomes: Vec<BirthDeathOutcome> = (0..runs)
        .into_par_iter()
        .map(|r| birth_death_run(&resolved, r))
        .collect::<Result<_>>()?;
    let samples: Vec<f64> = outcomes.iter().map(|o| o.generations as f64).collect();
    let records = outcomes
        .iter()
        .enumerate()
        .map(|(i, o)| TrialRecord {
            trial: i as u64,
            outcome: if o.capped {
                Outcome::Capped
            } else {
                Outcome::DataLoss
            },
            value: Some(o.generations as f64),
        })
        .collect();
    Ok(BirthDeathSummary {
        config: config.clone(),
        runs,
        stats: RunStats::from_samples(runs, &samples),
        capped: outcomes.iter().filter(|o| o.capped).count() as u64,
        rejects: outcomes.iter().map(|o| o.rejects).sum(),
        records,
    })
}
