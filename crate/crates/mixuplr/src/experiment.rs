//! Experiment harness: flat key-value config files, the named commands
//! (train, ablate-zeta, attack, audit, plot), and their CSV/JSON artifacts.
//!
//! Identical config and seeds reproduce byte-identical artifacts, with one
//! carve-out: the `wall_ms` column of the per-run metrics CSV records real
//! elapsed time.

use std::path::{Path, PathBuf};

use crate::attack::{attack_eval, AttackReport};
use crate::checkpoint::{read_checkpoint, save_checkpoint};
use crate::datasets::{
    make_blobs, make_circles, make_two_moons, save_indices, Dataset, SslSplit, split_ssl,
};
use crate::error::{Error, Result};
use crate::format::{fmt_g6, JsonWriter};
use crate::lipschitz::{
    estimate_function_lipschitz, estimate_gradient_lipschitz, prop1_audit, DomainSampler,
    DyKind, MlpFunction,
};
use crate::net::Activation;
use crate::optim::OptimizerKind;
use crate::plot::{write_decision_grid, write_scatter_svg};
use crate::rng::RngState;
use crate::trainer::{
    train, EvalTarget, MetricsRecord, TrainConfig, TrainMode, TrainOutcome, TrainView,
};

// Seed-derived stream ids for experiment-level randomness.
const STREAM_DATASET: u64 = 100;
const STREAM_SPLIT: u64 = 101;
const STREAM_AUDIT_KHAT: u64 = 200;
const STREAM_AUDIT_LHAT: u64 = 201;
const STREAM_AUDIT_PROP1: u64 = 202;

/// Checkpoints kept for the trailing-median evaluation protocol.
pub const MEDIAN_WINDOW: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    TwoMoons,
    Circles,
    Blobs,
}

impl DatasetKind {
    pub fn name(self) -> &'static str {
        match self {
            DatasetKind::TwoMoons => "two-moons",
            DatasetKind::Circles => "circles",
            DatasetKind::Blobs => "blobs",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "two-moons" => Ok(DatasetKind::TwoMoons),
            "circles" => Ok(DatasetKind::Circles),
            "blobs" => Ok(DatasetKind::Blobs),
            other => Err(Error::Config(format!("unknown dataset kind `{other}`"))),
        }
    }
}

/// Everything a command needs: dataset recipe, training hyperparameters,
/// seeds, sweep lists, audit sizes, and the output directory.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub dataset: DatasetKind,
    pub n: usize,
    pub noise: f64,
    /// Inner-radius ratio (circles only).
    pub factor: f64,
    pub m_labeled: usize,
    pub balanced: bool,
    pub holdout_fraction: f64,
    pub train: TrainConfig,
    pub repeat_seeds: Vec<u64>,
    pub out_dir: PathBuf,
    pub attack_eps: Vec<f64>,
    pub ablate_zetas: Vec<f64>,
    pub audit_pairs: usize,
    pub audit_triples: usize,
    pub audit_safety: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetKind::TwoMoons,
            n: 2000,
            noise: 0.1,
            factor: 0.5,
            m_labeled: 6,
            balanced: true,
            holdout_fraction: 0.25,
            train: TrainConfig::default(),
            repeat_seeds: vec![0, 1, 2, 3, 4],
            out_dir: PathBuf::from("out"),
            attack_eps: vec![0.007, 0.07],
            ablate_zetas: vec![0.0, 1.0, 2.0, 3.0],
            audit_pairs: 100_000,
            audit_triples: 10_000,
            audit_safety: 1.05,
        }
    }
}

// --- flat key-value parsing -----------------------------------------------

#[derive(Debug, Clone)]
enum ConfigValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    List(Vec<ConfigValue>),
}

impl ConfigValue {
    fn type_name(&self) -> &'static str {
        match self {
            ConfigValue::Bool(_) => "bool",
            ConfigValue::Int(_) => "integer",
            ConfigValue::Float(_) => "float",
            ConfigValue::Str(_) => "string",
            ConfigValue::List(_) => "list",
        }
    }

    fn as_f64(&self, key: &str) -> Result<f64> {
        match self {
            ConfigValue::Int(v) => Ok(*v as f64),
            ConfigValue::Float(v) => Ok(*v),
            other => Err(Error::Config(format!("{key}: expected number, got {}", other.type_name()))),
        }
    }

    fn as_usize(&self, key: &str) -> Result<usize> {
        match self {
            ConfigValue::Int(v) if *v >= 0 => Ok(*v as usize),
            other => Err(Error::Config(format!(
                "{key}: expected nonnegative integer, got {}",
                other.type_name()
            ))),
        }
    }

    fn as_bool(&self, key: &str) -> Result<bool> {
        match self {
            ConfigValue::Bool(v) => Ok(*v),
            other => Err(Error::Config(format!("{key}: expected bool, got {}", other.type_name()))),
        }
    }

    fn as_str(&self, key: &str) -> Result<&str> {
        match self {
            ConfigValue::Str(v) => Ok(v),
            other => Err(Error::Config(format!("{key}: expected string, got {}", other.type_name()))),
        }
    }

    fn as_f64_list(&self, key: &str) -> Result<Vec<f64>> {
        match self {
            ConfigValue::List(items) => items.iter().map(|v| v.as_f64(key)).collect(),
            other => Err(Error::Config(format!("{key}: expected list, got {}", other.type_name()))),
        }
    }

    fn as_usize_list(&self, key: &str) -> Result<Vec<usize>> {
        match self {
            ConfigValue::List(items) => items.iter().map(|v| v.as_usize(key)).collect(),
            other => Err(Error::Config(format!("{key}: expected list, got {}", other.type_name()))),
        }
    }

    fn as_u64_list(&self, key: &str) -> Result<Vec<u64>> {
        Ok(self.as_usize_list(key)?.into_iter().map(|v| v as u64).collect())
    }
}

fn parse_scalar(raw: &str, line_no: usize) -> Result<ConfigValue> {
    let raw = raw.trim();
    if raw == "true" {
        return Ok(ConfigValue::Bool(true));
    }
    if raw == "false" {
        return Ok(ConfigValue::Bool(false));
    }
    if raw.starts_with('"') && raw.ends_with('"') && raw.len() >= 2 {
        return Ok(ConfigValue::Str(raw[1..raw.len() - 1].to_string()));
    }
    if let Ok(v) = raw.parse::<i64>() {
        return Ok(ConfigValue::Int(v));
    }
    if let Ok(v) = raw.parse::<f64>() {
        if v.is_finite() {
            return Ok(ConfigValue::Float(v));
        }
    }
    Err(Error::Config(format!("line {line_no}: cannot parse value `{raw}`")))
}

fn parse_value(raw: &str, line_no: usize) -> Result<ConfigValue> {
    let raw = raw.trim();
    if let Some(inner) = raw.strip_prefix('[') {
        let inner = inner
            .strip_suffix(']')
            .ok_or_else(|| Error::Config(format!("line {line_no}: unterminated list")))?;
        let items = inner
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| parse_scalar(s, line_no))
            .collect::<Result<Vec<_>>>()?;
        return Ok(ConfigValue::List(items));
    }
    parse_scalar(raw, line_no)
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Parses the flat `key = value` format. Unknown keys are rejected.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut seen: Vec<String> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = match line.find('#') {
                // a # inside quotes would be a comment by this rule; string
                // values here never contain one
                Some(pos) => &line[..pos],
                None => line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, raw) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {line_no}: expected key = value")))?;
            let key = key.trim();
            if seen.iter().any(|k| k == key) {
                return Err(Error::Config(format!("line {line_no}: duplicate key `{key}`")));
            }
            seen.push(key.to_string());
            let value = parse_value(raw, line_no)?;
            cfg.apply(key, &value).map_err(|e| match e {
                Error::Config(msg) => Error::Config(format!("line {line_no}: {msg}")),
                other => Error::Config(format!("line {line_no}: {other}")),
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, key: &str, value: &ConfigValue) -> Result<()> {
        match key {
            "dataset" => self.dataset = DatasetKind::from_name(value.as_str(key)?)?,
            "n" => self.n = value.as_usize(key)?,
            "noise" => self.noise = value.as_f64(key)?,
            "factor" => self.factor = value.as_f64(key)?,
            "m_labeled" => self.m_labeled = value.as_usize(key)?,
            "balanced" => self.balanced = value.as_bool(key)?,
            "holdout_fraction" => self.holdout_fraction = value.as_f64(key)?,
            "mode" => self.train.mode = TrainMode::from_name(value.as_str(key)?)?,
            "hidden" => self.train.hidden = value.as_usize_list(key)?,
            "activation" => self.train.activation = Activation::from_name(value.as_str(key)?)?,
            "alpha" => self.train.alpha = value.as_f64(key)?,
            "tau" => self.train.tau = value.as_f64(key)?,
            "p_augment" => self.train.p_augment = value.as_usize(key)?,
            "lambda_u_max" => self.train.lambda_u_max = value.as_f64(key)?,
            "ramp_steps" => self.train.ramp_steps = value.as_usize(key)?,
            "zeta" => self.train.zeta = value.as_f64(key)?,
            "eps_r" => self.train.alp.eps_r = value.as_f64(key)?,
            "xi" => self.train.alp.xi = value.as_f64(key)?,
            "k_iters" => self.train.alp.k_iters = value.as_usize(key)?,
            "gamma" => self.train.alp.gamma = value.as_f64(key)?,
            "d_y" => self.train.alp.d_y_kind = DyKind::from_name(value.as_str(key)?)?,
            "squared_penalty" => self.train.alp.squared = value.as_bool(key)?,
            "alp_on_mixed" => self.train.alp_on_mixed = value.as_bool(key)?,
            "jitter_sigma" => self.train.augment.jitter_sigma = value.as_f64(key)?,
            "rotate_max_deg" => {
                self.train.augment.rotate_max_radians = value.as_f64(key)?.to_radians()
            }
            "optimizer" => self.train.optimizer.kind = OptimizerKind::from_name(value.as_str(key)?)?,
            "learning_rate" => self.train.optimizer.learning_rate = value.as_f64(key)?,
            "beta1" => self.train.optimizer.beta1 = value.as_f64(key)?,
            "beta2" => self.train.optimizer.beta2 = value.as_f64(key)?,
            "adam_eps" => self.train.optimizer.eps = value.as_f64(key)?,
            "batch_size" => self.train.batch_size = value.as_usize(key)?,
            "total_steps" => self.train.total_steps = value.as_usize(key)?,
            "eval_every" => self.train.eval_every = value.as_usize(key)?,
            "khat_pairs" => self.train.khat_pairs = value.as_usize(key)?,
            "eval_target" => self.train.eval_target = EvalTarget::from_name(value.as_str(key)?)?,
            "repeat_seeds" => self.repeat_seeds = value.as_u64_list(key)?,
            "out_dir" => self.out_dir = PathBuf::from(value.as_str(key)?),
            "attack_eps" => self.attack_eps = value.as_f64_list(key)?,
            "ablate_zetas" => self.ablate_zetas = value.as_f64_list(key)?,
            "audit_pairs" => self.audit_pairs = value.as_usize(key)?,
            "audit_triples" => self.audit_triples = value.as_usize(key)?,
            "audit_safety" => self.audit_safety = value.as_f64(key)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Config(format!("n must be >= 2, got {}", self.n)));
        }
        if !(self.noise >= 0.0) {
            return Err(Error::Config("noise must be >= 0".into()));
        }
        if self.dataset == DatasetKind::Circles && !(self.factor > 0.0 && self.factor < 1.0) {
            return Err(Error::Config(format!("factor must be in (0,1), got {}", self.factor)));
        }
        if self.m_labeled == 0 {
            return Err(Error::Config("m_labeled must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return Err(Error::Config(format!(
                "holdout_fraction must be in [0,1), got {}",
                self.holdout_fraction
            )));
        }
        if self.repeat_seeds.is_empty() {
            return Err(Error::Config("repeat_seeds must not be empty".into()));
        }
        if self.attack_eps.iter().any(|&e| e < 0.0) {
            return Err(Error::Config("attack_eps entries must be >= 0".into()));
        }
        if self.ablate_zetas.iter().any(|&z| z < 0.0) {
            return Err(Error::Config("ablate_zetas entries must be >= 0".into()));
        }
        if self.audit_pairs == 0 || self.audit_triples == 0 {
            return Err(Error::Config("audit_pairs and audit_triples must be >= 1".into()));
        }
        if !(self.audit_safety >= 1.0) {
            return Err(Error::Config("audit_safety must be >= 1".into()));
        }
        self.train
            .validate()
            .map_err(|e| Error::Config(format!("training config: {e}")))
    }

    /// Dataset for one seed; the whole pipeline reseeds per run.
    pub fn build_dataset(&self, seed: u64) -> Result<Dataset> {
        let mut rng = RngState::new(seed).child(STREAM_DATASET);
        match self.dataset {
            DatasetKind::TwoMoons => make_two_moons(self.n, self.noise, &mut rng),
            DatasetKind::Circles => make_circles(self.n, self.noise, self.factor, &mut rng),
            DatasetKind::Blobs => {
                make_blobs(self.n, &[(-1.5, 0.0), (1.5, 0.0)], self.noise, &mut rng)
            }
        }
    }

    pub fn build_split(&self, dataset: &Dataset, seed: u64) -> Result<SslSplit> {
        let mut rng = RngState::new(seed).child(STREAM_SPLIT);
        split_ssl(dataset, self.m_labeled, self.balanced, &mut rng, self.holdout_fraction)
    }

    fn train_config_for_seed(&self, seed: u64) -> TrainConfig {
        TrainConfig { seed, ..self.train.clone() }.normalized()
    }

    /// Full config echo, emitted inside summary JSON files.
    fn write_echo(&self, w: &mut JsonWriter) {
        w.key("dataset").string(self.dataset.name());
        w.key("n").uint(self.n as u64);
        w.key("noise").float(self.noise);
        if self.dataset == DatasetKind::Circles {
            w.key("factor").float(self.factor);
        }
        w.key("m_labeled").uint(self.m_labeled as u64);
        w.key("balanced").boolean(self.balanced);
        w.key("holdout_fraction").float(self.holdout_fraction);
        w.key("mode").string(self.train.mode.name());
        w.key("hidden").begin_array();
        for &h in &self.train.hidden {
            w.uint(h as u64);
        }
        w.end_array();
        w.key("activation").string(self.train.activation.name());
        w.key("alpha").float(self.train.alpha);
        w.key("tau").float(self.train.tau);
        w.key("p_augment").uint(self.train.p_augment as u64);
        w.key("lambda_u_max").float(self.train.lambda_u_max);
        w.key("ramp_steps").uint(self.train.ramp_steps as u64);
        w.key("zeta").float(self.train.zeta);
        w.key("eps_r").float(self.train.alp.eps_r);
        w.key("xi").float(self.train.alp.xi);
        w.key("k_iters").uint(self.train.alp.k_iters as u64);
        w.key("gamma").float(self.train.alp.gamma);
        w.key("d_y").string(self.train.alp.d_y_kind.name());
        w.key("squared_penalty").boolean(self.train.alp.squared);
        w.key("alp_on_mixed").boolean(self.train.alp_on_mixed);
        w.key("jitter_sigma").float(self.train.augment.jitter_sigma);
        w.key("rotate_max_deg").float(self.train.augment.rotate_max_radians.to_degrees());
        w.key("optimizer").string(self.train.optimizer.kind.name());
        w.key("learning_rate").float(self.train.optimizer.learning_rate);
        w.key("beta1").float(self.train.optimizer.beta1);
        w.key("beta2").float(self.train.optimizer.beta2);
        w.key("adam_eps").float(self.train.optimizer.eps);
        w.key("batch_size").uint(self.train.batch_size as u64);
        w.key("total_steps").uint(self.train.total_steps as u64);
        w.key("eval_every").uint(self.train.eval_every as u64);
        w.key("khat_pairs").uint(self.train.khat_pairs as u64);
        w.key("eval_target").string(self.train.eval_target.name());
    }
}

// --- per-seed runs ---------------------------------------------------------

/// One trained seed plus its summary numbers.
pub struct SeedRun {
    pub seed: u64,
    pub outcome: TrainOutcome,
    pub median_error: f64,
    pub final_error: f64,
}

fn run_one_seed(cfg: &ExperimentConfig, seed: u64) -> Result<SeedRun> {
    let dataset = cfg.build_dataset(seed)?;
    let split = cfg.build_split(&dataset, seed)?;
    let view = TrainView::new(&dataset, &split, cfg.train.eval_target)?;
    let outcome = train(&cfg.train_config_for_seed(seed), &view)?;
    let median_error = outcome.median_error_last(MEDIAN_WINDOW)?;
    let final_error = outcome.metrics.last().map(|m| m.error_rate).unwrap_or(1.0);
    Ok(SeedRun { seed, outcome, median_error, final_error })
}

fn thread_cap(n_jobs: usize) -> usize {
    let from_env = std::env::var("MIXUPLR_THREADS").ok().and_then(|v| v.parse::<usize>().ok());
    let hw = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    from_env.unwrap_or(hw).max(1).min(n_jobs.max(1))
}

/// Trains every seed, possibly in parallel waves; results come back in seed
/// list order regardless of scheduling.
pub fn run_seeds(cfg: &ExperimentConfig) -> Result<Vec<SeedRun>> {
    let seeds = cfg.repeat_seeds.clone();
    let cap = thread_cap(seeds.len());
    if cap == 1 {
        return seeds.iter().map(|&s| run_one_seed(cfg, s)).collect();
    }
    let mut results: Vec<Option<Result<SeedRun>>> = Vec::new();
    results.resize_with(seeds.len(), || None);
    for wave in seeds.chunks(cap).enumerate().map(|(w, c)| (w * cap, c)) {
        let (base, chunk) = wave;
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for (k, &seed) in chunk.iter().enumerate() {
                handles.push((base + k, scope.spawn(move || run_one_seed(cfg, seed))));
            }
            for (slot, handle) in handles {
                results[slot] = Some(handle.join().expect("seed worker panicked"));
            }
        });
    }
    results.into_iter().map(|r| r.expect("all slots filled")).collect()
}

fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

// --- artifact writers ------------------------------------------------------

/// Pinned metrics schema; `wall_ms` is real time and exempt from the
/// byte-identity contract.
pub const METRICS_HEADER: &str = "step,loss_x,loss_u,loss_alp,total,lambda_u,error_rate,wall_ms";

fn write_metrics_csv(path: &Path, metrics: &[MetricsRecord]) -> Result<()> {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for m in metrics {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            m.step,
            fmt_g6(m.loss_x),
            fmt_g6(m.loss_u),
            fmt_g6(m.loss_alp),
            fmt_g6(m.total_loss),
            fmt_g6(m.lambda_u),
            fmt_g6(m.error_rate),
            m.wall_ms
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn checkpoint_path(out_dir: &Path, seed: u64) -> PathBuf {
    out_dir.join(format!("model_seed{seed}.ckpt"))
}

pub fn metrics_path(out_dir: &Path, seed: u64) -> PathBuf {
    out_dir.join(format!("metrics_seed{seed}.csv"))
}

/// Aggregate of a multi-seed training command.
pub struct TrainAggregate {
    pub per_seed: Vec<(u64, f64, f64)>, // (seed, median_error, final_error)
    pub mean_error: f64,
    pub std_error: f64,
}

/// `train`: one run per seed, metrics CSV + checkpoint + split files per
/// seed, and an aggregate summary JSON.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<TrainAggregate> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let runs = run_seeds(cfg)?;
    for run in &runs {
        write_metrics_csv(&metrics_path(&cfg.out_dir, run.seed), &run.outcome.metrics)?;
        save_checkpoint(
            &checkpoint_path(&cfg.out_dir, run.seed),
            &run.outcome.spec,
            &run.outcome.params,
        )?;
        let split = cfg.build_split(&cfg.build_dataset(run.seed)?, run.seed)?;
        save_indices(&cfg.out_dir.join(format!("labeled_seed{}.idx", run.seed)), &split.labeled_idx)?;
        save_indices(
            &cfg.out_dir.join(format!("unlabeled_seed{}.idx", run.seed)),
            &split.unlabeled_idx,
        )?;
        save_indices(&cfg.out_dir.join(format!("holdout_seed{}.idx", run.seed)), &split.holdout_idx)?;
    }
    let medians: Vec<f64> = runs.iter().map(|r| r.median_error).collect();
    let (mean_error, std_error) = mean_and_std(&medians);

    let mut w = JsonWriter::new();
    w.begin_object();
    w.key("command").string("train");
    w.key("seeds").begin_array();
    for r in &runs {
        w.uint(r.seed);
    }
    w.end_array();
    w.key("per_seed").begin_array();
    for r in &runs {
        w.begin_object();
        w.key("seed").uint(r.seed);
        w.key("median_error_last20").float(r.median_error);
        w.key("final_error").float(r.final_error);
        w.key("checkpoint").string(&format!("model_seed{}.ckpt", r.seed));
        w.end_object();
    }
    w.end_array();
    w.key("mean_error").float(mean_error);
    w.key("std_error").float(std_error);
    w.key("config").begin_object();
    cfg.write_echo(&mut w);
    w.end_object();
    w.end_object();
    std::fs::write(cfg.out_dir.join("summary.json"), w.finish())?;

    Ok(TrainAggregate {
        per_seed: runs.iter().map(|r| (r.seed, r.median_error, r.final_error)).collect(),
        mean_error,
        std_error,
    })
}

/// `ablate-zeta`: one multi-seed train per zeta; rows `zeta,mean_err,std_err`.
pub fn cmd_ablate_zeta(cfg: &ExperimentConfig, zetas: &[f64]) -> Result<()> {
    cfg.validate()?;
    if zetas.is_empty() {
        return Err(Error::Config("ablate_zetas must not be empty".into()));
    }
    std::fs::create_dir_all(&cfg.out_dir)?;
    let mut out = String::from("zeta,mean_err,std_err\n");
    for &zeta in zetas {
        let mut sub = cfg.clone();
        sub.train.zeta = zeta;
        let runs = run_seeds(&sub)?;
        let medians: Vec<f64> = runs.iter().map(|r| r.median_error).collect();
        let (mean, std) = mean_and_std(&medians);
        out.push_str(&format!("{},{},{}\n", fmt_g6(zeta), fmt_g6(mean), fmt_g6(std)));
    }
    std::fs::write(cfg.out_dir.join("ablate_zeta.csv"), out)?;
    Ok(())
}

fn report_json(report: &AttackReport, mode: TrainMode) -> String {
    let mut w = JsonWriter::new();
    w.begin_object();
    w.key("epsilon").float(report.epsilon);
    w.key("clean_accuracy").float(report.clean_accuracy);
    w.key("adversarial_accuracy").float(report.adversarial_accuracy);
    w.key("percent_drop").float(report.percent_drop);
    w.key("n_examples").uint(report.n_examples as u64);
    w.key("seed").uint(report.seed);
    w.key("mode").string(mode.name());
    w.end_object();
    w.finish()
}

/// `attack`: loads each seed's checkpoint and evaluates FGSM at each epsilon
/// on the configured evaluation split. Appends to the sweep CSV and writes
/// one JSON per report.
pub fn cmd_attack(cfg: &ExperimentConfig, eps_list: &[f64]) -> Result<Vec<AttackReport>> {
    cfg.validate()?;
    if eps_list.is_empty() {
        return Err(Error::Config("attack_eps must not be empty".into()));
    }
    std::fs::create_dir_all(&cfg.out_dir)?;
    let mut rows = String::from("epsilon,clean,adv,drop,seed,mode\n");
    let mut reports = Vec::new();
    for &eps in eps_list {
        for &seed in &cfg.repeat_seeds {
            let ckpt = checkpoint_path(&cfg.out_dir, seed);
            if !ckpt.exists() {
                return Err(Error::Checkpoint(format!(
                    "missing checkpoint {} (run the train command first)",
                    ckpt.display()
                )));
            }
            let (spec, params) = read_checkpoint(&ckpt)?;
            let dataset = cfg.build_dataset(seed)?;
            let split = cfg.build_split(&dataset, seed)?;
            let view = TrainView::new(&dataset, &split, cfg.train.eval_target)?;
            let report = attack_eval(&spec, &params, &view.eval_x, &view.eval_y, eps, seed)?;
            rows.push_str(&format!(
                "{},{},{},{},{},{}\n",
                fmt_g6(report.epsilon),
                fmt_g6(report.clean_accuracy),
                fmt_g6(report.adversarial_accuracy),
                fmt_g6(report.percent_drop),
                seed,
                cfg.train.mode.name()
            ));
            let json_path = cfg
                .out_dir
                .join(format!("attack_eps{}_seed{}.json", fmt_g6(eps), seed));
            std::fs::write(json_path, report_json(&report, cfg.train.mode))?;
            reports.push(report);
        }
    }
    std::fs::write(cfg.out_dir.join("attack_sweep.csv"), rows)?;
    Ok(reports)
}

/// `audit`: sampled Lipschitz estimates plus the smoothness-bound check on
/// each seed's checkpoint. Emits one JSON per seed.
pub fn cmd_audit(cfg: &ExperimentConfig) -> Result<()> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    for &seed in &cfg.repeat_seeds {
        let ckpt = checkpoint_path(&cfg.out_dir, seed);
        if !ckpt.exists() {
            return Err(Error::Checkpoint(format!(
                "missing checkpoint {} (run the train command first)",
                ckpt.display()
            )));
        }
        let (spec, params) = read_checkpoint(&ckpt)?;
        let dataset = cfg.build_dataset(seed)?;
        let split = cfg.build_split(&dataset, seed)?;
        let train_idx: Vec<usize> =
            split.labeled_idx.iter().chain(&split.unlabeled_idx).copied().collect();
        let sampler = DomainSampler::from_data(&dataset.features.select_rows(&train_idx))?;
        let f = MlpFunction { spec: &spec, params: &params };

        let root = RngState::new(seed);
        let mut khat_rng = root.child(STREAM_AUDIT_KHAT);
        let estimate = estimate_function_lipschitz(
            &f,
            &sampler,
            cfg.train.alp.d_y_kind,
            cfg.audit_pairs,
            &mut khat_rng,
        )?;
        let mut lhat_rng = root.child(STREAM_AUDIT_LHAT);
        let l_hat = estimate_gradient_lipschitz(&f, &sampler, cfg.audit_pairs, &mut lhat_rng)?;
        let mut prop_rng = root.child(STREAM_AUDIT_PROP1);
        let prop1 = prop1_audit(
            &f,
            &sampler,
            l_hat * cfg.audit_safety,
            cfg.audit_triples,
            &mut prop_rng,
        )?;

        let mut w = JsonWriter::new();
        w.begin_object();
        w.key("k_hat").float(estimate.k_hat);
        w.key("l_hat").float(l_hat);
        w.key("n_pairs").uint(cfg.audit_pairs as u64);
        w.key("n_triples").uint(prop1.n_triples as u64);
        w.key("violation_rate").float(prop1.violation_rate);
        w.key("worst_margin").float(prop1.worst_margin);
        w.key("seed").uint(seed);
        w.end_object();
        std::fs::write(cfg.out_dir.join(format!("audit_seed{seed}.json")), w.finish())?;
    }
    Ok(())
}

/// `plot`: decision grid CSV plus an SVG scatter for the first seed.
pub fn cmd_plot(cfg: &ExperimentConfig) -> Result<()> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let seed = cfg.repeat_seeds[0];
    let ckpt = checkpoint_path(&cfg.out_dir, seed);
    if !ckpt.exists() {
        return Err(Error::Checkpoint(format!(
            "missing checkpoint {} (run the train command first)",
            ckpt.display()
        )));
    }
    let (spec, params) = read_checkpoint(&ckpt)?;
    let dataset = cfg.build_dataset(seed)?;
    let split = cfg.build_split(&dataset, seed)?;
    write_decision_grid(&cfg.out_dir.join(format!("grid_seed{seed}.csv")), &spec, &params, &dataset)?;
    write_scatter_svg(
        &cfg.out_dir.join(format!("scatter_seed{seed}.svg")),
        &dataset,
        &split.labeled_idx,
    )?;
    Ok(())
}
