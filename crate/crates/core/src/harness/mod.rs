//! End-to-end experiment runs.
//!
//! A run ingests the dataset, splits it, draws the cohort, then for every
//! (user, strategy, scope) samples one profile, renders the twelve
//! condition prompts, completes and resolves them, and scores each sensitive
//! list against the neutral one. Every stage's output is written under
//! `<out>/<run_id>/`.

mod report;

pub use report::{emit_report, heatmap_rows, render_table_csv, render_text_tables, ReportFormat};

use crate::dataset::{
    load_dataset, select_cohort, split_chronological, Cohort, CohortParams, DataError, SplitFractions,
    RELEVANCE_THRESHOLD,
};
use crate::gateway::{BiasConfig, Gateway, GatewayError, LiveClient, ModelParams, RawResponse, ResponseCache};
use crate::metrics::{compare_lists, fairness_cells, EmptyPolicy, FairnessCell, MetricError, PairResult, RankedList};
use crate::profiler::{build_passion_summary, sample_profile, Strategy, SWEEP_SCOPES};
use crate::prompts::{render_all_conditions, Condition, PromptError, PromptInstruction, RenderOptions, Template};
use crate::resolver::{extract_candidates, CatalogIndex, RecommendationList, DEFAULT_THRESHOLD};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{mpsc, Arc};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackendConfig {
    Live {
        /// Defaults to `<out>/cache`.
        #[serde(default)]
        cache_dir: Option<PathBuf>,
        #[serde(default = "default_rpm")]
        requests_per_minute: usize,
    },
    Mock(BiasConfig),
}

fn default_rpm() -> usize {
    60
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Directory holding `movies.dat`, `ratings.dat` and `users.dat`.
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    pub cohort_size: usize,
    pub seed: u64,
    pub strategies: Vec<Strategy>,
    pub scopes: Vec<usize>,
    pub k: usize,
    pub backend: BackendConfig,
    pub model: ModelParams,
    pub resolver_threshold: f64,
    pub relevance_threshold: u8,
    pub min_test_relevant: usize,
    pub split: SplitFractions,
    pub template: Template,
    pub format_clause: bool,
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            data_dir: PathBuf::from("data/ml-1m"),
            out_dir: PathBuf::from("runs"),
            cohort_size: 150,
            seed: 42,
            strategies: Strategy::ALL.to_vec(),
            scopes: vec![10],
            k: 10,
            backend: BackendConfig::Mock(BiasConfig::default()),
            model: ModelParams::default(),
            resolver_threshold: DEFAULT_THRESHOLD,
            relevance_threshold: RELEVANCE_THRESHOLD,
            min_test_relevant: 3,
            split: SplitFractions::default(),
            template: Template::Detailed,
            format_clause: true,
            workers: 4,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        if self.strategies.is_empty() {
            return bad("at least one strategy is required");
        }
        if self.scopes.is_empty() || self.scopes.contains(&0) {
            return bad("scopes must be a non-empty list of positive sizes");
        }
        if self.k == 0 {
            return bad("k must be at least 1");
        }
        if self.cohort_size == 0 {
            return bad("cohort_size must be at least 1");
        }
        if !(self.resolver_threshold > 0.0 && self.resolver_threshold <= 1.0) {
            return bad("resolver_threshold must lie in (0, 1]");
        }
        if !(1..=5).contains(&self.relevance_threshold) {
            return bad("relevance_threshold must lie in 1..=5");
        }
        if self.workers == 0 {
            return bad("workers must be at least 1");
        }
        self.split.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        if let BackendConfig::Live { .. } = self.backend {
            self.model.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        if let BackendConfig::Mock(b) = &self.backend {
            if !(0.0..=1.0).contains(&b.bias_strength) {
                return bad("bias strength must lie in [0, 1]");
            }
        }
        Ok(())
    }

    /// Content hash of the configuration, ignoring the output directory.
    pub fn run_id(&self) -> String {
        let mut c = self.clone();
        c.out_dir = PathBuf::new();
        let json = serde_json::to_vec(&c).expect("config serializes");
        let digest = Sha256::digest(&json);
        format!("run-{}", &hex::encode(digest)[..12])
    }

    pub fn render_options(&self) -> RenderOptions {
        RenderOptions {
            k: self.k,
            template: self.template,
            format_clause: self.format_clause,
            restate_attribute: false,
            model: self.model.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Ingest,
    Split,
    Cohort,
    Prompt,
    Complete,
    Metrics,
    Write,
    Report,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::Split => "split",
            Stage::Cohort => "cohort",
            Stage::Prompt => "prompt",
            Stage::Complete => "complete",
            Stage::Metrics => "metrics",
            Stage::Write => "write",
            Stage::Report => "report",
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("{stage}: {source}")]
    Data { stage: Stage, source: DataError },
    #[error("{stage}: {source}")]
    Gateway { stage: Stage, source: GatewayError },
    #[error("{stage}: {source}")]
    Prompt { stage: Stage, source: PromptError },
    #[error("{stage}: {source}")]
    Metric { stage: Stage, source: MetricError },
    #[error("{stage}: {}: {source}", path.display())]
    Io { stage: Stage, path: PathBuf, source: std::io::Error },
    #[error("report: missing artifact {}", .0.display())]
    MissingArtifact(PathBuf),
    #[error("report: no results to report")]
    EmptyResults,
}

impl HarnessError {
    pub fn stage(&self) -> Stage {
        match self {
            HarnessError::Config(_) => Stage::Config,
            HarnessError::Data { stage, .. }
            | HarnessError::Gateway { stage, .. }
            | HarnessError::Prompt { stage, .. }
            | HarnessError::Metric { stage, .. }
            | HarnessError::Io { stage, .. } => *stage,
            HarnessError::MissingArtifact(_) | HarnessError::EmptyResults => Stage::Report,
        }
    }

    /// Process exit code: 2 config, 3 data, 4 transport, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Gateway { source: GatewayError::Config(_), .. } => 2,
            HarnessError::Data { .. } | HarnessError::MissingArtifact(_) | HarnessError::EmptyResults => 3,
            HarnessError::Gateway { .. } => 4,
            _ => 1,
        }
    }
}

pub(crate) fn io_err(stage: Stage, path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { stage, path: path.to_path_buf(), source }
}

/// Resolution outcome of one response, as persisted in `resolution.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionRecord {
    pub user_id: u32,
    pub condition: Condition,
    pub strategy: Strategy,
    pub n_profile: usize,
    #[serde(flatten)]
    pub list: RecommendationList,
}

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub run_id: String,
    pub dir: PathBuf,
    pub config: ExperimentConfig,
    pub cohort: Cohort,
    /// Sorted by (user, strategy, scope, condition).
    pub prompts: Vec<PromptInstruction>,
    /// Parallel to `prompts`.
    pub responses: Vec<RawResponse>,
    pub resolutions: Vec<ResolutionRecord>,
    /// Sorted by (strategy, scope, mode, user, condition).
    pub pairs: Vec<PairResult>,
    pub cells: Vec<FairnessCell>,
    /// Preference-aligned cells with both-empty pairs left out.
    pub cells_nonempty: Vec<FairnessCell>,
}

fn make_gateway(config: &ExperimentConfig, catalog: &Arc<crate::dataset::Catalog>) -> Result<Gateway, HarnessError> {
    let stage = Stage::Config;
    match &config.backend {
        BackendConfig::Mock(bias) => {
            Gateway::mock(catalog.clone(), bias.clone(), config.seed).map_err(|source| HarnessError::Gateway { stage, source })
        }
        BackendConfig::Live { cache_dir, requests_per_minute } => {
            let client = LiveClient::from_env()
                .map_err(|source| HarnessError::Gateway { stage, source })?
                .with_limits(*requests_per_minute, config.workers);
            let dir = cache_dir.clone().unwrap_or_else(|| config.out_dir.join("cache"));
            Gateway::live(client, config.model.clone(), Some(ResponseCache::new(dir)))
                .map_err(|source| HarnessError::Gateway { stage, source })
        }
    }
}

/// Runs the full pipeline and writes every artifact.
///
/// Configuration and credential problems are reported before anything is
/// written. A later failure leaves a `FAILED` file, naming the stage, next to
/// whatever was already written.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunArtifacts, HarnessError> {
    config.validate()?;
    if let BackendConfig::Live { .. } = config.backend {
        LiveClient::from_env().map_err(|source| HarnessError::Gateway { stage: Stage::Config, source })?;
    }
    let run_id = config.run_id();
    let dir = config.out_dir.join(&run_id);
    std::fs::create_dir_all(&dir).map_err(io_err(Stage::Write, &dir))?;
    let _ = std::fs::remove_file(dir.join("FAILED"));
    let result = run_in(config, &run_id, &dir);
    if let Err(e) = &result {
        let _ = std::fs::write(dir.join("FAILED"), format!("stage: {}\nerror: {e}\n", e.stage()));
    }
    result
}

fn run_in(config: &ExperimentConfig, run_id: &str, dir: &Path) -> Result<RunArtifacts, HarnessError> {
    write_json(&dir.join("config.json"), config)?;

    let data = load_dataset(&config.data_dir).map_err(|source| HarnessError::Data { stage: Stage::Ingest, source })?;
    if data.interactions.is_empty() {
        return Err(HarnessError::Data { stage: Stage::Ingest, source: DataError::Empty });
    }
    let split = split_chronological(&data.interactions, config.split)
        .map_err(|source| HarnessError::Data { stage: Stage::Split, source })?;
    let params = CohortParams {
        cohort_size: config.cohort_size,
        seed: config.seed,
        min_test_relevant: config.min_test_relevant,
        min_train: *config.scopes.iter().max().expect("validated"),
    };
    let cohort = select_cohort(&data.users, &split, &params)
        .map_err(|source| HarnessError::Data { stage: Stage::Cohort, source })?;
    write_json(&dir.join("cohort.json"), &cohort)?;

    let catalog = Arc::new(data.catalog);
    let gateway = make_gateway(config, &catalog)?;
    let opts = config.render_options();

    let mut prompts = Vec::new();
    for &user in &cohort.user_ids {
        for &strategy in &config.strategies {
            for &n in &config.scopes {
                let profile = sample_profile(split.train_of(user), &catalog, strategy, n, config.seed);
                let passion = build_passion_summary(&profile)
                    .ok_or(HarnessError::Prompt { stage: Stage::Prompt, source: PromptError::EmptyProfile })?;
                let rendered = render_all_conditions(&profile, &passion, &opts)
                    .map_err(|source| HarnessError::Prompt { stage: Stage::Prompt, source })?;
                prompts.extend(rendered);
            }
        }
    }
    write_jsonl(&dir.join("prompts.jsonl"), &prompts)?;

    let index = CatalogIndex::new(&catalog);
    let completed = complete_all(&gateway, &index, &prompts, config)?;
    let (responses, lists): (Vec<RawResponse>, Vec<RecommendationList>) = completed.into_iter().unzip();
    write_jsonl(&dir.join("responses.jsonl"), &responses)?;
    let resolutions: Vec<ResolutionRecord> = prompts
        .iter()
        .zip(&lists)
        .map(|(p, l)| ResolutionRecord {
            user_id: p.user_id,
            condition: p.condition,
            strategy: p.strategy,
            n_profile: p.n_profile,
            list: l.clone(),
        })
        .collect();
    write_jsonl(&dir.join("resolution.jsonl"), &resolutions)?;

    let relevant: BTreeMap<u32, HashSet<u32>> = cohort
        .user_ids
        .iter()
        .map(|&u| {
            let rel = split
                .test_of(u)
                .iter()
                .filter(|i| i.rating >= config.relevance_threshold)
                .map(|i| i.item_id)
                .collect();
            (u, rel)
        })
        .collect();
    let pairs = score_pairs(&prompts, &lists, &relevant, config.k)?;
    write_jsonl(&dir.join("pairs.jsonl"), &pairs)?;

    let cells = fairness_cells(&pairs, EmptyPolicy::Zero).map_err(|source| HarnessError::Metric { stage: Stage::Metrics, source })?;
    let cells_nonempty =
        fairness_cells(&pairs, EmptyPolicy::Skip).map_err(|source| HarnessError::Metric { stage: Stage::Metrics, source })?;
    report::write_tables(dir, &cells, &cells_nonempty)?;
    report::write_heatmap(dir, &cells)?;

    Ok(RunArtifacts {
        run_id: run_id.to_string(),
        dir: dir.to_path_buf(),
        config: config.clone(),
        cohort,
        prompts,
        responses,
        resolutions,
        pairs,
        cells,
        cells_nonempty,
    })
}

/// Completes and resolves every prompt on a bounded worker pool. Results come
/// back over a channel in arbitrary order and are put back in prompt order.
fn complete_all(
    gateway: &Gateway,
    index: &CatalogIndex,
    prompts: &[PromptInstruction],
    config: &ExperimentConfig,
) -> Result<Vec<(RawResponse, RecommendationList)>, HarnessError> {
    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let (tx, rx) = mpsc::channel();
    std::thread::scope(|s| {
        for _ in 0..config.workers.min(prompts.len().max(1)) {
            let tx = tx.clone();
            let (next, stop) = (&next, &stop);
            s.spawn(move || loop {
                if stop.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(p) = prompts.get(i) else { break };
                let out = gateway.complete(p).map(|resp| {
                    let mut list = index.resolve(&p.fingerprint, &extract_candidates(&resp.text), config.resolver_threshold);
                    list.resolved.truncate(config.k);
                    (resp, list)
                });
                if out.is_err() {
                    stop.store(true, Ordering::SeqCst);
                }
                if tx.send((i, out)).is_err() {
                    break;
                }
            });
        }
    });
    drop(tx);
    let mut slots: Vec<Option<(RawResponse, RecommendationList)>> = vec![None; prompts.len()];
    let mut first_err: Option<(usize, GatewayError)> = None;
    for (i, out) in rx {
        match out {
            Ok(v) => slots[i] = Some(v),
            Err(e) => {
                if first_err.as_ref().is_none_or(|(j, _)| i < *j) {
                    first_err = Some((i, e));
                }
            }
        }
    }
    if let Some((_, source)) = first_err {
        return Err(HarnessError::Gateway { stage: Stage::Complete, source });
    }
    Ok(slots.into_iter().map(|s| s.expect("every prompt completed")).collect())
}

fn score_pairs(
    prompts: &[PromptInstruction],
    lists: &[RecommendationList],
    relevant: &BTreeMap<u32, HashSet<u32>>,
    k: usize,
) -> Result<Vec<PairResult>, HarnessError> {
    let metric_err = |source| HarnessError::Metric { stage: Stage::Metrics, source };
    let mut by_key: BTreeMap<(u32, Strategy, usize), BTreeMap<Condition, RankedList>> = BTreeMap::new();
    for (p, l) in prompts.iter().zip(lists) {
        let ranked = RankedList::new(l.item_ids()).map_err(metric_err)?;
        by_key.entry((p.user_id, p.strategy, p.n_profile)).or_default().insert(p.condition, ranked);
    }
    let empty = HashSet::new();
    let mut pairs = Vec::new();
    for ((user, strategy, n), lists) in &by_key {
        let Some(neutral) = lists.get(&Condition::Neutral) else { continue };
        let rel = relevant.get(user).unwrap_or(&empty);
        for (&cond, sensitive) in lists.iter().filter(|(c, _)| !c.is_neutral()) {
            pairs.extend(compare_lists(*user, cond, *strategy, *n, neutral, sensitive, rel, k).map_err(metric_err)?);
        }
    }
    pairs.sort_by(|a, b| {
        (a.strategy, a.n_profile, a.mode, a.user_id, a.condition).cmp(&(b.strategy, b.n_profile, b.mode, b.user_id, b.condition))
    });
    Ok(pairs)
}

/// Runs once over `ns` profile sizes with one shared cohort (eligible for
/// the largest size) and writes the heatmap grids.
pub fn sweep_scope(config: &ExperimentConfig, ns: &[usize]) -> Result<RunArtifacts, HarnessError> {
    let mut c = config.clone();
    c.scopes = if ns.is_empty() { SWEEP_SCOPES.to_vec() } else { ns.to_vec() };
    c.scopes.sort_unstable();
    c.scopes.dedup();
    run_experiment(&c)
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let mut body = serde_json::to_vec_pretty(value).expect("artifact serializes");
    body.push(b'\n');
    std::fs::write(path, body).map_err(io_err(Stage::Write, path))
}

pub(crate) fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), HarnessError> {
    let mut body = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut body, r).expect("artifact serializes");
        body.push(b'\n');
    }
    std::fs::write(path, body).map_err(io_err(Stage::Write, path))
}

pub fn read_pairs(path: &Path) -> Result<Vec<PairResult>, HarnessError> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(HarnessError::MissingArtifact(path.to_path_buf())),
        Err(e) => return Err(io_err(Stage::Report, path)(e)),
    };
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            serde_json::from_str(l).map_err(|e| HarnessError::Io {
                stage: Stage::Report,
                path: path.to_path_buf(),
                source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
            })
        })
        .collect()
}
