//! Batch command-line surface: `simulate`, `enumerate`, `evaluate`.
//!
//! Exit codes: 0 success (an empty solution set is a success), 1 usage
//! error, 2 input/parse error, 3 internal error.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};

use crate::ancestry::AncestryGraph;
use crate::cna::{self, CnaInstance, CnaInstanceData};
use crate::enumerate::{enumerate, noisy_enumerate, SolutionPayload, SolutionSet};
use crate::io::{
    self, CharacterMeta, GroundTruth, SolutionsFile, TensorData, TensorFile,
};
use crate::metrics;
use crate::model::{FrequencyIntervalTensor, FrequencyTensor, StateTree, StateTreeSet};
use crate::rational::Rational;
use crate::sim::{self, SimulationConfig};
use num_traits::Zero;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug)]
enum CliError {
    Usage(String),
    Input(String),
    Internal(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Input(_) => EXIT_INPUT,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Input(m) | CliError::Internal(m) => m,
        }
    }
}

fn input_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Input(e.to_string())
}

fn internal_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Internal(e.to_string())
}

#[derive(Parser, Debug)]
#[command(name = "phylomix", disable_help_subcommand = true)]
/// Reconstruct multi-state perfect phylogenies and mixing proportions from
/// character-state frequency mixtures.
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a ground-truth instance and its measurement files.
    Simulate(SimulateArgs),
    /// Enumerate solution trees from measurements or a tensor file.
    Enumerate(EnumerateArgs),
    /// Score enumerated solutions against a ground truth.
    Evaluate(EvaluateArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Number of characters (loci).
    #[arg(long)]
    n: usize,
    /// Number of samples.
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Expected reads per locus; omit for error-free data.
    #[arg(long)]
    coverage: Option<f64>,
    /// Confidence level for VAF intervals.
    #[arg(long, default_value_t = 0.95)]
    confidence: f64,
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct EnumerateArgs {
    /// Measurement TSV or tensor JSON.
    #[arg(long, value_name = "FILE")]
    input: PathBuf,
    /// exact | noisy
    #[arg(long, default_value = "exact")]
    mode: String,
    /// Stop after this many solutions per instance and flag truncation.
    #[arg(long)]
    max_solutions: Option<usize>,
    /// Keep only trees of maximum vertex count across all combinations.
    #[arg(long, default_value_t = false)]
    largest_only: bool,
    /// Worker threads across state-tree combinations (default from
    /// PHYLOMIX_JOBS, else 1).
    #[arg(long)]
    jobs: Option<usize>,
    /// Also write the ancestry graph of each instance as DOT.
    #[arg(long, default_value_t = false)]
    dot: bool,
    /// Drop zero-frequency leaf states before enumeration (tensor input,
    /// exact mode only).
    #[arg(long, default_value_t = false)]
    prune_zero_states: bool,
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long, value_name = "FILE")]
    truth: PathBuf,
    #[arg(long, value_name = "FILE")]
    solutions: PathBuf,
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,
}

/// Entry point used by both `main` and the integration tests.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            // Help/version requests are not errors.
            use clap::error::ErrorKind;
            let kind = e.kind();
            let _ = e.print();
            return if matches!(kind, ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                EXIT_OK
            } else {
                EXIT_USAGE
            };
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Enumerate(a) => cmd_enumerate(a),
        Command::Evaluate(a) => cmd_evaluate(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(input_err)?;
    }
    fs::write(path, contents).map_err(input_err)
}

fn character_meta(inst: &sim::SimulatedInstance) -> Vec<CharacterMeta> {
    inst.catalog_ids
        .iter()
        .enumerate()
        .map(|(c, &id)| {
            let t = inst.state_trees.tree(c).unwrap();
            CharacterMeta {
                name: format!("c{c}"),
                states: t.state_count(),
                state_tree_parent: t.parent_slice().to_vec(),
                catalog_tree: Some(id),
            }
        })
        .collect()
}

fn cmd_simulate(a: SimulateArgs) -> Result<(), CliError> {
    let mut cfg = SimulationConfig::new(a.n, a.m, a.seed)
        .map_err(|e| CliError::Usage(e.to_string()))?
        .with_confidence(a.confidence)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(cov) = a.coverage {
        cfg = cfg.with_coverage(cov).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let inst = sim::simulate_instance(&cfg).map_err(internal_err)?;
    let loci = sim::measurements(&inst).map_err(internal_err)?;
    let names = sim::sample_names(a.m);

    let characters = character_meta(&inst);
    let truth = GroundTruth {
        seed: a.seed,
        coverage: a.coverage,
        confidence: a.confidence,
        characters: characters.clone(),
        tree: inst.tree.clone(),
        usage: inst.usage.clone(),
        tensor: inst.tensor.clone(),
    };
    write_file(&a.out_dir.join("ground_truth.json"), &truth.to_json())?;
    write_file(
        &a.out_dir.join("measurements.tsv"),
        &cna::write_measurements_tsv(&loci, &names),
    )?;
    if a.coverage.is_none() {
        let tf = TensorFile {
            characters,
            state_trees: inst.state_trees.clone(),
            data: TensorData::Exact(inst.tensor.clone()),
        };
        write_file(&a.out_dir.join("tensor.json"), &io::write_tensor_file(&tf))?;
    }
    println!(
        "simulated n={} m={} seed={} -> {}",
        a.n,
        a.m,
        a.seed,
        a.out_dir.display()
    );
    Ok(())
}

/// One unit of enumeration work: an instance plus its output name.
struct Job {
    label: String,
    combination: Option<Vec<usize>>,
    characters: Vec<CharacterMeta>,
    state_trees: StateTreeSet,
    data: JobData,
}

enum JobData {
    Exact(FrequencyTensor),
    Noisy(FrequencyIntervalTensor),
}

fn jobs_from_instances(instances: Vec<CnaInstance>) -> Vec<Job> {
    instances
        .into_iter()
        .map(|inst| {
            let label = format!(
                "combo_{}",
                inst.combination
                    .iter()
                    .map(|id| id.to_string())
                    .collect::<Vec<_>>()
                    .join("_")
            );
            let characters = inst
                .characters
                .iter()
                .enumerate()
                .map(|(c, name)| {
                    let t = inst.state_trees.tree(c).unwrap();
                    CharacterMeta {
                        name: name.clone(),
                        states: t.state_count(),
                        state_tree_parent: t.parent_slice().to_vec(),
                        catalog_tree: Some(inst.combination[c]),
                    }
                })
                .collect();
            let data = match inst.data {
                CnaInstanceData::Exact(t) => JobData::Exact(t),
                CnaInstanceData::Noisy(i) => JobData::Noisy(i),
            };
            Job {
                label,
                combination: Some(inst.combination),
                characters,
                state_trees: inst.state_trees,
                data,
            }
        })
        .collect()
}

/// Repeatedly drop zero-frequency leaf states from every character's state
/// tree (internal states stay: removing them would disconnect the tree).
fn prune_zero_states(
    f: &FrequencyTensor,
    s: &StateTreeSet,
    characters: &mut [CharacterMeta],
) -> Result<(FrequencyTensor, StateTreeSet), CliError> {
    let mut counts = s.state_counts();
    let mut parents: Vec<Vec<Option<usize>>> =
        s.trees().iter().map(|t| t.parent_slice().to_vec()).collect();
    let mut rows: Vec<Vec<Vec<Rational>>> = f.rows().to_vec();
    loop {
        let mut pruned_any = false;
        for c in 0..counts.len() {
            let k = counts[c];
            for state in (1..k).rev() {
                let is_leaf = !parents[c].iter().any(|p| *p == Some(state));
                let zero = rows.iter().all(|row| row[c][state].is_zero());
                if is_leaf && zero {
                    // Remove the state and renumber the ones above it.
                    parents[c].remove(state);
                    for p in parents[c].iter_mut() {
                        if let Some(x) = p {
                            if *x > state {
                                *x -= 1;
                            }
                        }
                    }
                    for row in rows.iter_mut() {
                        row[c].remove(state);
                    }
                    counts[c] -= 1;
                    pruned_any = true;
                }
            }
        }
        if !pruned_any {
            break;
        }
    }
    for (c, meta) in characters.iter_mut().enumerate() {
        meta.states = counts[c];
        meta.state_tree_parent = parents[c].clone();
    }
    let trees = StateTreeSet::new(
        parents
            .into_iter()
            .enumerate()
            .map(|(c, p)| StateTree::new(c, p))
            .collect::<Result<Vec<_>, _>>()
            .map_err(internal_err)?,
    )
    .map_err(internal_err)?;
    let tensor = FrequencyTensor::new(counts, rows).map_err(internal_err)?;
    Ok((tensor, trees))
}

fn cmd_enumerate(a: EnumerateArgs) -> Result<(), CliError> {
    if a.mode != "exact" && a.mode != "noisy" {
        return Err(CliError::Usage(format!("unknown mode `{}`", a.mode)));
    }
    let noisy = a.mode == "noisy";
    let text = fs::read_to_string(&a.input).map_err(input_err)?;
    let is_json = a.input.extension().map(|e| e == "json").unwrap_or(false);

    let jobs: Vec<Job> = if is_json {
        let tf = io::parse_tensor_file(&text).map_err(input_err)?;
        let mut characters = tf.characters;
        let job = match (noisy, tf.data) {
            (false, TensorData::Exact(f)) => {
                let (f, s) = if a.prune_zero_states {
                    prune_zero_states(&f, &tf.state_trees, &mut characters)?
                } else {
                    (f, tf.state_trees)
                };
                Job {
                    label: "single".into(),
                    combination: None,
                    characters,
                    state_trees: s,
                    data: JobData::Exact(f),
                }
            }
            (true, TensorData::Intervals(i)) => Job {
                label: "single".into(),
                combination: None,
                characters,
                state_trees: tf.state_trees,
                data: JobData::Noisy(i),
            },
            (true, TensorData::Exact(f)) => Job {
                label: "single".into(),
                combination: None,
                characters,
                state_trees: tf.state_trees,
                data: JobData::Noisy(FrequencyIntervalTensor::from_point(&f)),
            },
            (false, TensorData::Intervals(_)) => {
                return Err(CliError::Input(
                    "exact mode needs point frequencies, found intervals".into(),
                ))
            }
        };
        vec![job]
    } else {
        if a.prune_zero_states {
            return Err(CliError::Usage(
                "--prune-zero-states applies to tensor JSON input only".into(),
            ));
        }
        let (loci, _names) = cna::parse_measurements_tsv(&text).map_err(input_err)?;
        let (instances, dropped) = cna::combinations(&loci, noisy).map_err(input_err)?;
        for d in &dropped {
            eprintln!("warning: locus {d} is incompatible with all state trees; dropped");
        }
        jobs_from_instances(instances)
    };

    let jobs_n = a
        .jobs
        .or_else(|| std::env::var("PHYLOMIX_JOBS").ok().and_then(|v| v.parse().ok()))
        .unwrap_or(1)
        .max(1);

    // Fan instances out over a small worker pool; results are collected and
    // re-sorted by label so output never depends on scheduling.
    let queue = Mutex::new(jobs.into_iter().enumerate().collect::<Vec<_>>());
    let results: Mutex<Vec<(usize, Result<(Job, SolutionSet, String), String>)>> =
        Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..jobs_n {
            scope.spawn(|| loop {
                let item = queue.lock().unwrap().pop();
                let Some((idx, job)) = item else { break };
                let outcome = run_job(&job, a.max_solutions, a.dot)
                    .map(|(set, dot)| (job, set, dot))
                    .map_err(|e| e.message().to_string());
                results.lock().unwrap().push((idx, outcome));
            });
        }
    });
    let mut results = results.into_inner().unwrap();
    results.sort_by_key(|(idx, _)| *idx);

    let mut all: Vec<(Job, SolutionSet, String)> = Vec::new();
    for (_, r) in results {
        all.push(r.map_err(CliError::Internal)?);
    }

    // --largest-only keeps only trees of maximum vertex count anywhere.
    if a.largest_only {
        let max_v = all
            .iter()
            .flat_map(|(_, set, _)| set.solutions.iter().map(|s| s.tree.vertex_count()))
            .max()
            .unwrap_or(0);
        for (_, set, _) in all.iter_mut() {
            set.solutions.retain(|s| s.tree.vertex_count() == max_v);
        }
    }

    let mut total = 0usize;
    let mut merged_counts: std::collections::BTreeMap<(String, String), usize> =
        std::collections::BTreeMap::new();
    for (job, set, dot) in &all {
        let dir = a.out_dir.join(&job.label);
        let file = SolutionsFile {
            mode: a.mode.clone(),
            combination: job.combination.clone(),
            characters: job.characters.clone(),
            set: set.clone(),
        };
        write_file(&dir.join("solutions.json"), &file.to_json())?;
        if !dot.is_empty() {
            write_file(&dir.join("ancestry.dot"), dot)?;
        }
        if !set.is_empty() {
            let summary = metrics::summarize(set).map_err(internal_err)?;
            write_file(&dir.join("summary.dot"), &summary.to_dot(None))?;
            let mut usage_tsv = String::new();
            for (i, sol) in set.solutions.iter().enumerate() {
                if let SolutionPayload::Usage(u) = &sol.payload {
                    usage_tsv.push_str(&format!("# solution {i}\n"));
                    usage_tsv.push_str(&u.to_tsv());
                }
            }
            if !usage_tsv.is_empty() {
                write_file(&dir.join("usage.tsv"), &usage_tsv)?;
            }
        }
        let names: Vec<String> = job.characters.iter().map(|c| c.name.clone()).collect();
        for sol in &set.solutions {
            for (x, y) in sol.tree.edges() {
                let lab = |v: &crate::model::Vertex| match v.pair() {
                    None => "*".to_string(),
                    Some(p) => format!("{}:{}", names[p.character], p.state),
                };
                *merged_counts.entry((lab(&x), lab(&y))).or_insert(0) += 1;
            }
        }
        total += set.len();
    }
    if !merged_counts.is_empty() {
        let mut dot = String::from("digraph merged {\n  rankdir=TB;\n");
        let mut seen: Vec<&String> = Vec::new();
        for (a_, b_) in merged_counts.keys() {
            for v in [a_, b_] {
                if !seen.contains(&v) {
                    seen.push(v);
                }
            }
        }
        for (i, v) in seen.iter().enumerate() {
            dot.push_str(&format!("  v{i} [label=\"{v}\"];\n"));
        }
        for ((x, y), count) in &merged_counts {
            let xi = seen.iter().position(|v| *v == x).unwrap();
            let yi = seen.iter().position(|v| *v == y).unwrap();
            dot.push_str(&format!("  v{xi} -> v{yi} [label=\"{count}\"];\n"));
        }
        dot.push_str("}\n");
        write_file(&a.out_dir.join("summary.dot"), &dot)?;
    }
    println!(
        "{} instance(s), {} solution(s) -> {}",
        all.len(),
        total,
        a.out_dir.display()
    );
    Ok(())
}

fn run_job(
    job: &Job,
    limit: Option<usize>,
    want_dot: bool,
) -> Result<(SolutionSet, String), CliError> {
    match &job.data {
        JobData::Exact(f) => {
            let g = AncestryGraph::cladistic(f, &job.state_trees).map_err(input_err)?;
            let dot = if want_dot { g.to_dot() } else { String::new() };
            let set = enumerate(&g, f, &job.state_trees, limit).map_err(internal_err)?;
            Ok((set, dot))
        }
        JobData::Noisy(i) => {
            let g = AncestryGraph::noisy(i, &job.state_trees).map_err(input_err)?;
            let dot = if want_dot { g.to_dot() } else { String::new() };
            let set = noisy_enumerate(&g, i, &job.state_trees, limit).map_err(internal_err)?;
            Ok((set, dot))
        }
    }
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<(), CliError> {
    let truth_text = fs::read_to_string(&a.truth).map_err(input_err)?;
    let truth = GroundTruth::from_json(&truth_text).map_err(input_err)?;
    let sols_text = fs::read_to_string(&a.solutions).map_err(input_err)?;
    let sols = SolutionsFile::from_json(&sols_text).map_err(input_err)?;

    // The universes must agree: same character names and state counts.
    let tchars: Vec<(&str, usize)> =
        truth.characters.iter().map(|c| (c.name.as_str(), c.states)).collect();
    let schars: Vec<(&str, usize)> =
        sols.characters.iter().map(|c| (c.name.as_str(), c.states)).collect();
    if tchars != schars {
        return Err(CliError::Input(format!(
            "mismatched universes: truth has {tchars:?}, solutions have {schars:?}"
        )));
    }

    let names: Vec<String> = truth.characters.iter().map(|c| c.name.clone()).collect();
    if sols.set.is_empty() {
        println!("0 solutions; nothing to evaluate");
        write_file(
            &a.out_dir.join("concordance.tsv"),
            "solution\tconcordance\tconcordance_exact\n",
        )?;
        return Ok(());
    }

    let tsv = metrics::concordance_tsv(&truth.tree, &sols.set);
    write_file(&a.out_dir.join("concordance.tsv"), &tsv)?;
    let summary = metrics::summarize(&sols.set).map_err(internal_err)?;
    write_file(&a.out_dir.join("summary.dot"), &summary.to_dot(Some(&truth.tree)))?;
    let rep = metrics::representative(&sols.set).map_err(internal_err)?;
    write_file(&a.out_dir.join("representative.dot"), &io::tree_to_dot(rep, &names))?;

    let best = sols
        .set
        .solutions
        .iter()
        .map(|s| metrics::concordance(&truth.tree, &s.tree))
        .max()
        .unwrap();
    println!(
        "{} solutions; max concordance {}",
        sols.set.len(),
        crate::rational::format_exact(&best)
    );
    Ok(())
}
