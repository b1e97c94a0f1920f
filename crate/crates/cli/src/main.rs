mod output;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use treeplication::augmentation::{self, Policy};
use treeplication::combinatorics;
use treeplication::cost::expected_cost;
use treeplication::health::{principal_cover, principal_l_health};
use treeplication::nonuniform::{LayerProbs, SelectionDistribution};
use treeplication::optimizer::{min_n_for_target, optimal_distribution, optimality_checks, Scheme};
use treeplication::recovery::plan_recovery;
use treeplication::report::{self, TableId};
use treeplication::simulator::{
    birth_death_batch, mc_comm_cost, mc_decodability, mc_mds_cost, BirthDeathConfig, SamplingModel,
    TrialRecord,
};
use treeplication::tree::{decode_bytes, encode_bytes, parse_vertex_list};
use treeplication::{codec, Error, Multiset, Subset, TreeShape, VertexId};

use output::{Document, Format};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Core(Error::Io {
            path: path.display().to_string(),
            source,
        })
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_domain() => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

type CliResult<T> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// XOR binary-tree erasure code: encoding, analysis and simulation.
#[derive(Debug, Parser)]
#[command(name = "treeplication", version)]
struct Cli {
    /// Seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte-Carlo trials or runs; each command has its own default.
    #[arg(long, global = true)]
    trials: Option<u64>,
    #[arg(long, global = true, value_enum, default_value = "json")]
    format: Format,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Encode a file into a codeword file.
    Encode {
        input: PathBuf,
        /// Number of data fragments (a power of two).
        #[arg(long)]
        k: u64,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Rebuild the original file from a subset of a codeword's fragments.
    Decode {
        input: PathBuf,
        /// JSON file listing available vertices as [[layer, index], ...].
        /// Without --manifest or --subset every fragment is used.
        #[arg(long, conflicts_with = "subset")]
        manifest: Option<PathBuf>,
        /// Available vertices as layer:index pairs, e.g. "3:1,1:2".
        #[arg(long)]
        subset: Option<String>,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Best per-layer selection distribution for a budget.
    Optimize {
        #[arg(long)]
        k: u64,
        #[arg(long)]
        n: u64,
    },
    /// Decoding probabilities of the three storage schemes.
    Analyze {
        #[arg(long)]
        k: u64,
        #[arg(long)]
        n: Option<u64>,
        /// Also report the smallest n reaching this decoding probability.
        #[arg(long)]
        target: Option<f64>,
    },
    /// Minimal-communication recovery schedule for a subset.
    Plan {
        #[arg(long)]
        k: u64,
        #[arg(long)]
        subset: String,
    },
    /// Expected recovery cost under a selection distribution.
    Cost {
        /// Per-layer counts "n1,n2,..." (leaves first) or JSON {"p": [p1, ...]}.
        #[arg(long)]
        dist: String,
    },
    /// Principal cover and loss survival of a multiset.
    Health {
        /// Per-layer weights as JSON rows, leaves first: [[1,0,2,1],[0,1],[1]].
        #[arg(long)]
        multiset: String,
        /// Number of lost elements.
        #[arg(long)]
        l: u64,
    },
    /// Add one fragment to a multiset after picking a holder.
    Augment {
        #[arg(long)]
        multiset: String,
        #[arg(long, alias = "scheme", value_enum)]
        policy: PolicyArg,
        /// Vertex of the picked holder, layer:index.
        #[arg(long)]
        z: String,
    },
    /// Monte-Carlo experiments.
    Simulate {
        #[arg(long, value_enum)]
        experiment: Experiment,
        /// Experiment configuration as inline JSON or a path to a JSON file.
        #[arg(long)]
        config: String,
        /// Write one CSV line per trial here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Reproduction table with reference values and pass flags.
    Report {
        #[arg(long)]
        table: String,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PolicyArg {
    Sibling,
    Replicate,
}

impl From<PolicyArg> for Policy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Sibling => Policy::Sibling,
            PolicyArg::Replicate => Policy::Replicate,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Experiment {
    Decodability,
    Cost,
    Mds,
    Birthdeath,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct MdsConfig {
    k: u64,
    n: u64,
}

const DEFAULT_SEED: u64 = 0;
const DEFAULT_TRIALS: u64 = 100_000;

struct Globals {
    seed: Option<u64>,
    trials: Option<u64>,
}

impl Globals {
    fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    fn trials_or(&self, default: u64) -> u64 {
        self.trials.unwrap_or(default)
    }
}

fn shape_for_k(k: u64) -> CliResult<TreeShape> {
    Ok(TreeShape::from_leaves(k)?)
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("result types serialize to JSON")
}

fn parse_json<T: serde::de::DeserializeOwned>(text: &str, what: &str) -> CliResult<T> {
    serde_json::from_str(text).map_err(|e| usage(format!("bad {what}: {e}")))
}

fn read_file(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn parse_multiset(text: &str) -> CliResult<Multiset> {
    let rows: Vec<Vec<u64>> = parse_json(text, "multiset")?;
    Ok(Multiset::from_layers(&rows)?)
}

fn read_manifest(path: &Path) -> CliResult<Vec<VertexId>> {
    let text = String::from_utf8(read_file(path)?).map_err(|_| usage("manifest is not UTF-8"))?;
    let pairs: Vec<(u32, u32)> = parse_json(&text, "manifest")?;
    Ok(pairs
        .into_iter()
        .map(|(l, i)| VertexId::new(l, i))
        .collect())
}

fn vertex_labels(vs: impl IntoIterator<Item = VertexId>) -> Vec<String> {
    vs.into_iter().map(|v| v.to_string()).collect()
}

fn encode(input: &Path, k: u64, output: &Path) -> CliResult<Document> {
    let shape = shape_for_k(k)?;
    let data = read_file(input)?;
    let cw = encode_bytes(&data, shape)?;
    codec::save(&cw, output)?;
    Ok(Document {
        command: "encode",
        config: json!({"input": input, "k": k, "output": output}),
        result: json!({
            "layers": shape.layers(),
            "fragments": shape.vertex_count(),
            "fragment_len": cw.fragment_len(),
            "original_len": cw.original_len(),
        }),
        report: None,
    })
}

fn decode(
    input: &Path,
    manifest: Option<&Path>,
    subset: Option<&str>,
    output: &Path,
) -> CliResult<Document> {
    let cw = codec::load(input)?;
    let shape = cw.shape();
    let vertices = match (manifest, subset) {
        (Some(m), None) => read_manifest(m)?,
        (None, Some(s)) => parse_vertex_list(s)?,
        (None, None) => shape.vertices().collect(),
        (Some(_), Some(_)) => return Err(usage("give either --manifest or --subset")),
    };
    let available = Subset::from_vertices(shape, vertices)?;
    let schedule = plan_recovery(&available)?;
    let bytes = decode_bytes(shape, cw.original_len(), &cw.restrict(&available))?;
    write_file(output, &bytes)?;
    Ok(Document {
        command: "decode",
        config: json!({
            "input": input,
            "manifest": manifest,
            "subset": vertex_labels(available.iter()),
            "output": output,
        }),
        result: json!({
            "bytes": bytes.len(),
            "xor_chains": schedule.assignments.len(),
            "fragments_communicated": schedule.total_cost(),
        }),
        report: None,
    })
}

fn optimize(k: u64, n: u64) -> CliResult<Document> {
    let shape = shape_for_k(k)?;
    let r = optimal_distribution(shape.layers(), n)?;
    Ok(Document {
        command: "optimize",
        config: json!({"k": k, "n": n, "layers": shape.layers()}),
        result: json!({
            "counts": r.best.counts(),
            "probs": r.best.probs(),
            "q_star": r.q_star,
            "explored": r.explored,
            "checks": optimality_checks(&r.best),
        }),
        report: None,
    })
}

fn analyze(k: u64, n: Option<u64>, target: Option<f64>) -> CliResult<Document> {
    if n.is_none() && target.is_none() {
        return Err(usage("analyze needs --n, --target or both"));
    }
    let shape = shape_for_k(k)?;
    let d = shape.layers();
    let mut result = serde_json::Map::new();
    if let Some(n) = n {
        let uniform = combinatorics::uniform_decode_ratio(d, n);
        let replication = combinatorics::replication_decode_ratio(k, n);
        let nonuniform = if n >= k {
            let r = optimal_distribution(d, n)?;
            json!({"prob": r.q_star, "counts": r.best.counts()})
        } else {
            json!({"prob": 0.0, "counts": Value::Null})
        };
        result.insert(
            "at_n".into(),
            json!({
                "uniform": {"prob": combinatorics::uniform_decode_prob(d, n), "exact": uniform.to_string()},
                "replication": {"prob": combinatorics::replication_decode_prob(k, n), "exact": replication.to_string()},
                "nonuniform": nonuniform,
            }),
        );
    }
    if let Some(t) = target {
        let mut mins = serde_json::Map::new();
        for (name, scheme) in [
            ("replication", Scheme::Replication),
            ("uniform", Scheme::Uniform),
            ("nonuniform", Scheme::Nonuniform),
        ] {
            mins.insert(name.into(), json!(min_n_for_target(d, t, scheme)?));
        }
        result.insert("min_n".into(), Value::Object(mins));
    }
    Ok(Document {
        command: "analyze",
        config: json!({"k": k, "n": n, "target": target, "layers": d}),
        result: Value::Object(result),
        report: None,
    })
}

fn plan(k: u64, subset: &str) -> CliResult<Document> {
    let shape = shape_for_k(k)?;
    let s = Subset::from_vertices(shape, parse_vertex_list(subset)?)?;
    let schedule = plan_recovery(&s)?;
    Ok(Document {
        command: "plan",
        config: json!({"k": k, "subset": vertex_labels(s.iter())}),
        result: json!({
            "cost": schedule.total_cost(),
            "assignments": schedule
                .assignments
                .iter()
                .map(|(leaf, x)| (leaf.to_string(), x.to_string()))
                .collect::<BTreeMap<_, _>>(),
            "transfers": schedule
                .transfers
                .iter()
                .map(|t| json!({"from": t.from.to_string(), "to": t.to.to_string()}))
                .collect::<Vec<_>>(),
            "discarded": vertex_labels(schedule.discarded.iter().copied()),
        }),
        report: None,
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProbsArg {
    p: LayerProbs,
}

fn cost(dist: &str) -> CliResult<Document> {
    let (probs, counts) = if dist.trim_start().starts_with('{') {
        (parse_json::<ProbsArg>(dist, "distribution")?.p, None)
    } else {
        let counts = dist
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<u64>()
                    .map_err(|_| usage(format!("bad layer count {t:?}")))
            })
            .collect::<CliResult<Vec<_>>>()?;
        let sel = SelectionDistribution::new(counts)?;
        (sel.probs(), Some(sel))
    };
    let summary = expected_cost(&probs)?;
    Ok(Document {
        command: "cost",
        config: json!({"counts": counts.as_ref().map(|c| c.counts()), "p": probs}),
        result: to_value(&summary),
        report: None,
    })
}

fn health(multiset: &str, l: u64, g: &Globals) -> CliResult<Document> {
    let ms = parse_multiset(multiset)?;
    let cover = principal_cover(&ms);
    let trials = g.trials_or(augmentation::SAMPLED_TRIALS);
    let survival =
        augmentation::survival_with(&ms, l, augmentation::EXACT_LIMIT, trials, g.seed())?;
    Ok(Document {
        command: "health",
        config: json!({"multiset": ms.to_layers(), "l": l, "seed": g.seed(), "trials": trials}),
        result: json!({
            "principal_cover": cover
                .diagonals
                .iter()
                .map(|dg| json!({"vertices": vertex_labels(dg.vertices.iter().copied()), "weight": dg.weight}))
                .collect::<Vec<_>>(),
            "weight_profile": cover.weight_profile(),
            "principal_health": principal_l_health(&ms, l)?,
            "decodable": ms.support().is_decodable(),
            "survival": survival,
        }),
        report: None,
    })
}

fn augment(multiset: &str, policy: Policy, z: &str) -> CliResult<Document> {
    let mut ms = parse_multiset(multiset)?;
    let z: VertexId = z.parse()?;
    let before = ms.to_layers();
    let decision = augmentation::augment(&ms, z, policy)?;
    augmentation::apply(&mut ms, &decision);
    Ok(Document {
        command: "augment",
        config: json!({"multiset": before, "policy": policy, "z": z.to_string()}),
        result: json!({
            "new_vertex": decision.new_vertex.to_string(),
            "accessible": vertex_labels(decision.accessible.iter().copied()),
            "method": decision.method,
            "fallback": decision.fallback,
            "multiset": ms.to_layers(),
        }),
        report: None,
    })
}

fn config_text(config: &str) -> CliResult<String> {
    if config.trim_start().starts_with('{') {
        Ok(config.to_string())
    } else {
        let path = Path::new(config);
        String::from_utf8(read_file(path)?).map_err(|_| usage(format!("{config}: not UTF-8")))
    }
}

fn write_records(path: &Path, records: &[TrialRecord]) -> CliResult<()> {
    let file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let res: csv::Result<()> = records
        .iter()
        .try_for_each(|r| w.serialize(r))
        .and_then(|_| w.flush().map_err(Into::into));
    res.map_err(|e| CliError::io(path, std::io::Error::other(e)))
}

fn simulate(
    experiment: Experiment,
    config: &str,
    csv_path: Option<&Path>,
    g: &Globals,
) -> CliResult<Document> {
    let text = config_text(config)?;
    let trials = g.trials_or(match experiment {
        Experiment::Birthdeath => 3000,
        _ => DEFAULT_TRIALS,
    });
    let (resolved, result, records) = match experiment {
        Experiment::Decodability | Experiment::Cost => {
            let model: SamplingModel = parse_json(&text, "sampling model")?;
            let run = match experiment {
                Experiment::Decodability => mc_decodability(&model, trials, g.seed())?,
                _ => mc_comm_cost(&model, trials, g.seed())?,
            };
            let (lo, hi) = run.stats.ci95();
            (
                json!({"model": model, "seed": g.seed(), "trials": trials}),
                json!({"stats": run.stats, "ci95": [lo, hi]}),
                run.records,
            )
        }
        Experiment::Mds => {
            let cfg: MdsConfig = parse_json(&text, "mds config")?;
            let run = mc_mds_cost(cfg.k, cfg.n, trials, g.seed())?;
            let (lo, hi) = run.stats.ci95();
            (
                json!({"model": cfg, "seed": g.seed(), "trials": trials}),
                json!({"stats": run.stats, "ci95": [lo, hi]}),
                run.records,
            )
        }
        Experiment::Birthdeath => {
            let mut cfg: BirthDeathConfig = parse_json(&text, "birth-death config")?;
            if let Some(seed) = g.seed {
                cfg.seed = seed;
            }
            let summary = birth_death_batch(&cfg, trials)?;
            let (lo, hi) = summary.stats.ci95();
            let initial = cfg.resolve()?.initial_model().clone();
            (
                json!({"model": summary.config, "initial_model": initial, "seed": cfg.seed, "trials": trials}),
                json!({
                    "stats": summary.stats,
                    "ci95": [lo, hi],
                    "capped": summary.capped,
                    "rejects": summary.rejects,
                }),
                summary.records,
            )
        }
    };
    if let Some(p) = csv_path {
        write_records(p, &records)?;
    }
    let mut config = resolved;
    config["experiment"] = to_value(&experiment);
    Ok(Document {
        command: "simulate",
        config,
        result,
        report: None,
    })
}

fn run_report(table: &str, g: &Globals) -> CliResult<Document> {
    let id: TableId = table.parse().map_err(|e: Error| usage(e.to_string()))?;
    let seed = g.seed();
    let report = match id {
        TableId::Table1 => report::table1()?,
        TableId::Table2 => report::table2(g.trials_or(DEFAULT_TRIALS), seed)?,
        TableId::Table4 => report::table4()?,
        TableId::HealthHist => report::health_hist(g.trials_or(DEFAULT_TRIALS), seed)?,
        TableId::Birthdeath => report::birthdeath(&[8, 32], g.trials_or(3000), seed)?,
    };
    Ok(Document {
        command: "report",
        config: json!({"table": id, "seed": report.seed, "trials": report.trials}),
        result: json!({"passed": report.passed(), "cells": report.cells}),
        report: Some(report),
    })
}

fn configure_threads() -> CliResult<()> {
    if let Ok(v) = std::env::var("TRPL_THREADS") {
        let n: usize = v.parse().map_err(|_| {
            usage(format!(
                "TRPL_THREADS must be a positive integer, got {v:?}"
            ))
        })?;
        if n == 0 {
            return Err(usage("TRPL_THREADS must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| usage(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    let g = Globals {
        seed: cli.seed,
        trials: cli.trials,
    };
    let doc = match &cli.command {
        Command::Encode { input, k, output } => encode(input, *k, output)?,
        Command::Decode {
            input,
            manifest,
            subset,
            output,
        } => decode(input, manifest.as_deref(), subset.as_deref(), output)?,
        Command::Optimize { k, n } => optimize(*k, *n)?,
        Command::Analyze { k, n, target } => analyze(*k, *n, *target)?,
        Command::Plan { k, subset } => plan(*k, subset)?,
        Command::Cost { dist } => cost(dist)?,
        Command::Health { multiset, l } => health(multiset, *l, &g)?,
        Command::Augment {
            multiset,
            policy,
            z,
        } => augment(multiset, (*policy).into(), z)?,
        Command::Simulate {
            experiment,
            config,
            csv,
        } => simulate(*experiment, config, csv.as_deref(), &g)?,
        Command::Report { table } => run_report(table, &g)?,
    };
    output::emit(&doc, cli.format, cli.out.as_deref())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
