//! Mini-batch training loop: sample a batch, estimate the gradient, take an
//! Adam step under a step-decay learning-rate schedule; log the batch loss
//! (and optionally the relative L2 error on fresh samples), checkpoint at the
//! end. A non-finite loss or gradient aborts the run with the last good
//! state preserved instead of updating parameters.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::relative_l2_error;
use crate::gradnet::{batch_loss_and_grad, FlatGradient, MlpParams};
use crate::problems::{make_problem, sample_batch, BatchStreams, ProblemSpec};
use crate::sampling::{stream_id, RngStream};

/// Run configuration. The nesting mirrors the JSON config schema:
/// `problem.*`, `network.*`, `train.*`, `eval.*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub problem: ProblemSection,
    pub network: NetworkSection,
    pub train: TrainSection,
    #[serde(default)]
    pub eval: EvalSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSection {
    pub id: String,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSection {
    pub layer_sizes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSection {
    pub iterations: usize,
    pub batch_size: usize,
    pub lr_initial: f64,
    pub lr_decay_factor: f64,
    pub lr_decay_every: usize,
    pub penalty_beta: f64,
    pub seed: u64,
    #[serde(default)]
    pub deterministic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSection {
    /// Log cadence in iterations.
    pub every: usize,
    /// Fresh samples per relative-L2 evaluation; 0 disables the metric.
    pub samples: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self { every: 100, samples: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let t = &self.train;
        if t.iterations == 0 {
            return Err(Error::InvalidConfig("train.iterations must be >= 1".into()));
        }
        if t.batch_size == 0 {
            return Err(Error::InvalidConfig("train.batch_size must be >= 1".into()));
        }
        if !(t.lr_initial > 0.0) || !t.lr_initial.is_finite() {
            return Err(Error::InvalidConfig("train.lr_initial must be > 0".into()));
        }
        if !(t.lr_decay_factor > 0.0 && t.lr_decay_factor <= 1.0) {
            return Err(Error::InvalidConfig("train.lr_decay_factor must be in (0, 1]".into()));
        }
        if t.lr_decay_every == 0 {
            return Err(Error::InvalidConfig("train.lr_decay_every must be >= 1".into()));
        }
        if !(t.penalty_beta >= 0.0) {
            return Err(Error::InvalidConfig("train.penalty_beta must be >= 0".into()));
        }
        if self.eval.every == 0 {
            return Err(Error::InvalidConfig("eval.every must be >= 1".into()));
        }
        Ok(())
    }

    /// Build the configured problem with the configured penalty weight.
    pub fn build_problem(&self) -> Result<ProblemSpec> {
        let mut problem = make_problem(&self.problem.id, self.problem.dim)?;
        if problem.has_boundary_term() {
            problem.set_penalty_beta(self.train.penalty_beta)?;
        } else if self.train.penalty_beta != 0.0 {
            return Err(Error::InvalidConfig(format!(
                "problem {} has no boundary term; train.penalty_beta must be 0",
                self.problem.id
            )));
        }
        Ok(problem)
    }
}

/// Step-decay schedule: lr_initial * factor^floor(n / every).
pub fn lr_schedule(n: usize, cfg: &TrainConfig) -> f64 {
    let steps = (n / cfg.train.lr_decay_every) as i32;
    cfg.train.lr_initial * cfg.train.lr_decay_factor.powi(steps)
}

/// Adam optimizer state (bias-corrected first/second moments).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(param_count: usize) -> Self {
        Self {
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One bias-corrected Adam update. A non-finite gradient aborts before any
/// state is touched, leaving parameters and moments unchanged.
pub fn adam_step(
    params: &mut MlpParams,
    state: &mut AdamState,
    grad: &FlatGradient,
    lr: f64,
) -> Result<()> {
    if grad.len() != state.m.len() || grad.len() != params.param_count() {
        return Err(Error::DimensionMismatch {
            context: "gradient length",
            expected: params.param_count(),
            got: grad.len(),
        });
    }
    if !grad.is_finite() {
        return Err(Error::NonFinite { what: "gradient", sample: None });
    }
    if !lr.is_finite() || lr < 0.0 {
        return Err(Error::InvalidInput(format!("learning rate {lr}")));
    }
    state.t += 1;
    let b1 = state.beta1;
    let b2 = state.beta2;
    for ((m, v), &g) in state.m.iter_mut().zip(state.v.iter_mut()).zip(&grad.values) {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
    }
    let bc1 = 1.0 - b1.powi(state.t as i32);
    let bc2 = 1.0 - b2.powi(state.t as i32);
    let (m, v, eps) = (&state.m, &state.v, state.epsilon);
    params.apply_update(|i| -lr * (m[i] / bc1) / ((v[i] / bc2).sqrt() + eps));
    Ok(())
}

/// One logged point of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub iteration: usize,
    /// Mini-batch loss estimate at this iteration's parameters.
    pub loss: f64,
    pub lr: f64,
    /// Relative L2 mean error on fresh samples, when enabled.
    pub rel_l2_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct LossHistory {
    pub records: Vec<LossRecord>,
}

impl LossHistory {
    /// CSV with the stable header `iteration,loss,lr,rel_l2_error`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,loss,lr,rel_l2_error\n");
        for r in &self.records {
            let rel = r.rel_l2_error.map(|e| e.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{},{}\n", r.iteration, r.loss, r.lr, rel));
        }
        out
    }
}

/// Persisted run state: network, optimizer moments, and provenance.
///
/// Serialized as JSON with shortest round-trip float encoding, so reloading
/// reproduces parameters bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub layer_sizes: Vec<usize>,
    pub activation: String,
    /// Row-major weight matrices, one per affine layer.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub iteration: usize,
    pub adam_m: Vec<f64>,
    pub adam_v: Vec<f64>,
    pub seed: u64,
    pub problem_id: String,
    /// Test fixture marker: evaluate the problem's exact solution instead of
    /// the stored network. Absent from real checkpoints.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub exact_solution: bool,
}

impl Checkpoint {
    pub fn from_state(
        params: &MlpParams,
        adam: &AdamState,
        iteration: usize,
        seed: u64,
        problem_id: &str,
    ) -> Self {
        Self {
            layer_sizes: params.layer_sizes().to_vec(),
            activation: "tanh".into(),
            weights: params.weights().to_vec(),
            biases: params.biases().to_vec(),
            iteration,
            adam_m: adam.m.clone(),
            adam_v: adam.v.clone(),
            seed,
            problem_id: problem_id.into(),
            exact_solution: false,
        }
    }

    pub fn params(&self) -> Result<MlpParams> {
        MlpParams::new(self.layer_sizes.clone(), self.weights.clone(), self.biases.clone())
    }

    pub fn adam(&self) -> Result<AdamState> {
        let params = self.params()?;
        if self.adam_m.len() != params.param_count() || self.adam_v.len() != params.param_count() {
            return Err(Error::DimensionMismatch {
                context: "adam state length",
                expected: params.param_count(),
                got: self.adam_m.len(),
            });
        }
        let mut state = AdamState::new(params.param_count());
        state.m = self.adam_m.clone();
        state.v = self.adam_v.clone();
        state.t = self.iteration as u64;
        Ok(state)
    }

    /// Recover the spatial dimension from the problem id and input width.
    pub fn spatial_dim(&self) -> Result<usize> {
        let n0 = *self.layer_sizes.first().ok_or_else(|| {
            Error::InvalidConfig("checkpoint has empty layer_sizes".into())
        })?;
        let d = match self.problem_id.as_str() {
            "p1_1d_lognormal" => 1,
            "p3_dirichlet" => 2,
            "p2_neumann" => {
                if n0 % 2 != 0 {
                    return Err(Error::InvalidConfig(format!(
                        "p2 checkpoint input width {n0} is not 2d"
                    )));
                }
                n0 / 2
            }
            "p4_langevin" => n0 - 1,
            other => return Err(Error::UnknownProblem(other.to_string())),
        };
        Ok(d)
    }

    pub fn build_problem(&self) -> Result<ProblemSpec> {
        make_problem(&self.problem_id, self.spatial_dim()?)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let cp: Self = serde_json::from_reader(std::io::BufReader::new(file))?;
        if !cp.exact_solution {
            cp.params()?;
        }
        Ok(cp)
    }
}

/// Successful training run.
#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub checkpoint: Checkpoint,
    pub history: LossHistory,
}

/// Failure modes of [`train`].
#[derive(Debug)]
pub enum TrainError {
    /// Configuration or setup problem; nothing was trained.
    Invalid(Error),
    /// Numerical failure mid-run. Parameters were not updated by the failing
    /// step; `last_good` holds the state reached before it.
    Aborted {
        iteration: usize,
        source: Error,
        last_good: Box<Checkpoint>,
        history: LossHistory,
    },
}

impl fmt::Display for TrainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Invalid(e) => write!(f, "invalid training setup: {e}"),
            Self::Aborted { iteration, source, .. } => {
                write!(f, "training aborted at iteration {iteration}: {source}")
            }
        }
    }
}

impl std::error::Error for TrainError {}

impl From<Error> for TrainError {
    fn from(e: Error) -> Self {
        Self::Invalid(e)
    }
}

/// Observer hooks for streaming output; all methods default to no-ops.
pub trait TrainObserver {
    fn on_log(&mut self, _record: &LossRecord) {}
    fn on_periodic_checkpoint(&mut self, _checkpoint: &Checkpoint) {}
}

/// Ignores all events.
pub struct NoopObserver;

impl TrainObserver for NoopObserver {}

/// Train on the configured built-in problem.
pub fn train(cfg: &TrainConfig) -> std::result::Result<TrainOutput, TrainError> {
    let problem = cfg.build_problem()?;
    train_with(&problem, cfg, 0, &mut NoopObserver)
}

/// Train on an explicit problem (the extension point for custom problems).
///
/// `checkpoint_every` > 0 additionally reports a checkpoint to the observer
/// every that many iterations.
pub fn train_with(
    problem: &ProblemSpec,
    cfg: &TrainConfig,
    checkpoint_every: usize,
    observer: &mut dyn TrainObserver,
) -> std::result::Result<TrainOutput, TrainError> {
    cfg.validate()?;
    let seed = cfg.train.seed;
    let mut params = MlpParams::init(cfg.network.layer_sizes.clone(), seed)?;
    if params.input_dim() != problem.input_dim() {
        return Err(TrainError::Invalid(Error::InvalidConfig(format!(
            "network input width {} does not match problem d + K = {}",
            params.input_dim(),
            problem.input_dim()
        ))));
    }
    let mut adam = AdamState::new(params.param_count());
    let mut streams = BatchStreams::from_seed(seed);
    let mut eval_rng = RngStream::new(seed, stream_id::EVAL);
    let mut history = LossHistory::default();

    let iterations = cfg.train.iterations;
    for n in 0..iterations {
        let step = (|| -> Result<(f64, FlatGradient)> {
            let batch = sample_batch(problem, cfg.train.batch_size, &mut streams)?;
            batch_loss_and_grad(problem, &params, &batch)
        })();
        let (loss, grad) = match step {
            Ok(v) => v,
            Err(source) => {
                return Err(abort(source, n, &params, &adam, seed, problem, history));
            }
        };
        let lr = lr_schedule(n, cfg);

        if n % cfg.eval.every == 0 || n + 1 == iterations {
            let rel = if cfg.eval.samples > 0 {
                match relative_l2_error(problem, &params, cfg.eval.samples, &mut eval_rng) {
                    Ok(report) => Some(report.rel_l2_error),
                    Err(source) => {
                        return Err(abort(source, n, &params, &adam, seed, problem, history));
                    }
                }
            } else {
                None
            };
            let record = LossRecord { iteration: n, loss, lr, rel_l2_error: rel };
            observer.on_log(&record);
            history.records.push(record);
        }

        if let Err(source) = adam_step(&mut params, &mut adam, &grad, lr) {
            return Err(abort(source, n, &params, &adam, seed, problem, history));
        }

        if checkpoint_every > 0 && (n + 1) % checkpoint_every == 0 && n + 1 != iterations {
            observer.on_periodic_checkpoint(&Checkpoint::from_state(
                &params,
                &adam,
                n + 1,
                seed,
                &problem.id,
            ));
        }
    }

    Ok(TrainOutput {
        checkpoint: Checkpoint::from_state(&params, &adam, iterations, seed, &problem.id),
        history,
    })
}

fn abort(
    source: Error,
    iteration: usize,
    params: &MlpParams,
    adam: &AdamState,
    seed: u64,
    problem: &ProblemSpec,
    history: LossHistory,
) -> TrainError {
    TrainError::Aborted {
        iteration,
        source,
        last_good: Box::new(Checkpoint::from_state(params, adam, iteration, seed, &problem.id)),
        history,
    }
}

/// Desk-scale configuration for a built-in problem: small widths and short
/// schedules sized for a single CPU.
pub fn desk_config(problem_id: &str, dim: usize) -> Result<TrainConfig> {
    let problem = make_problem(problem_id, dim)?;
    let (width, depth, iterations, lr_decay_every) = match problem_id {
        "p2_neumann" => (32, 5, 30_000, 10_000),
        "p3_dirichlet" => (64, 5, 30_000, 10_000),
        _ => (64, 5, 30_000, 10_000),
    };
    let mut layer_sizes = vec![problem.input_dim()];
    layer_sizes.extend(std::iter::repeat(width).take(depth - 1));
    layer_sizes.push(1);
    Ok(TrainConfig {
        problem: ProblemSection { id: problem_id.into(), dim },
        network: NetworkSection { layer_sizes },
        train: TrainSection {
            iterations,
            batch_size: 256,
            lr_initial: 1e-3,
            lr_decay_factor: 0.1,
            lr_decay_every,
            penalty_beta: problem.penalty_beta(),
            seed: 1,
            deterministic: true,
        },
        eval: EvalSection { every: 250, samples: 2000 },
    })
}

/// Full-scale configuration mirroring the published experiments (hours of
/// compute; not exercised by the test suite).
pub fn paper_config(problem_id: &str, dim: usize) -> Result<TrainConfig> {
    let problem = make_problem(problem_id, dim)?;
    let (width, iterations, lr_initial) = match (problem_id, dim) {
        ("p1_1d_lognormal", _) => (256, 400_000, 1e-3),
        ("p2_neumann", d) if d >= 10 => (32, 300_000, 1e-5),
        ("p2_neumann", _) => (32, 300_000, 1e-4),
        ("p3_dirichlet", _) => (256, 400_000, 1e-3),
        _ => (256, 300_000, 1e-3),
    };
    let mut layer_sizes = vec![problem.input_dim()];
    layer_sizes.extend(std::iter::repeat(width).take(4));
    layer_sizes.push(1);
    Ok(TrainConfig {
        problem: ProblemSection { id: problem_id.into(), dim },
        network: NetworkSection { layer_sizes },
        train: TrainSection {
            iterations,
            batch_size: 2560,
            lr_initial,
            lr_decay_factor: 0.1,
            lr_decay_every: 100_000,
            penalty_beta: problem.penalty_beta(),
            seed: 1,
            deterministic: true,
        },
        eval: EvalSection { every: 1000, samples: 10_000 },
    })
}

#[cfg(test)]
mod tests {
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    use super::*;
    use crate::problems::Lagrangian;

    fn tiny_config() -> TrainConfig {
        TrainConfig {
            problem: ProblemSection { id: "p3_dirichlet".into(), dim: 2 },
            network: NetworkSection { layer_sizes: vec![4, 8, 8, 1] },
            train: TrainSection {
                iterations: 5,
                batch_size: 16,
                lr_initial: 1e-3,
                lr_decay_factor: 0.1,
                lr_decay_every: 2,
                penalty_beta: 500.0,
                seed: 42,
                deterministic: true,
            },
            eval: EvalSection { every: 2, samples: 0 },
        }
    }

    #[test]
    fn lr_schedule_staircase() {
        let mut cfg = tiny_config();
        cfg.train.lr_initial = 1e-3;
        cfg.train.lr_decay_factor = 0.1;
        cfg.train.lr_decay_every = 100_000;
        assert_eq!(lr_schedule(0, &cfg), 1e-3);
        assert_eq!(lr_schedule(99_999, &cfg), 1e-3);
        assert_eq!(lr_schedule(100_000, &cfg), 1e-4);
        // Two decays accumulate one rounding step of 0.1 * 0.1.
        assert!((lr_schedule(250_000, &cfg) - 1e-5).abs() <= 1e-19);
        cfg.train.lr_decay_factor = 1.0;
        assert_eq!(lr_schedule(3_000_000, &cfg), 1e-3);
    }

    #[test]
    fn adam_zero_gradient_is_identity() {
        let mut params = MlpParams::init(vec![3, 4, 1], 0).unwrap();
        let before = params.clone();
        let mut state = AdamState::new(params.param_count());
        let grad = FlatGradient::zeros(params.param_count());
        adam_step(&mut params, &mut state, &grad, 0.1).unwrap();
        assert_eq!(params, before);
        assert_eq!(state.t, 1);
    }

    #[test]
    fn adam_first_step_matches_hand_computation() {
        // With g = 1 the bias-corrected moments are both exactly 1 at t = 1,
        // so the step is lr / (1 + eps).
        let mut params = MlpParams::zeros(vec![1, 1, 1]).unwrap();
        let count = params.param_count();
        let before = params.flatten();
        let mut state = AdamState::new(count);
        let grad = FlatGradient { values: vec![1.0; count] };
        adam_step(&mut params, &mut state, &grad, 0.1).unwrap();
        let expected_step = 0.1 / (1.0 + 1e-8);
        for (b, a) in before.iter().zip(params.flatten()) {
            assert!(((b - a) - expected_step).abs() <= 1e-12, "step {}", b - a);
        }
    }

    #[test]
    fn adam_is_deterministic() {
        let grad = FlatGradient { values: vec![0.3, -0.7, 0.01, 2.0, -0.2, 0.9, 0.0, 1.1, -1.0] };
        let run = || {
            let mut params = MlpParams::init(vec![2, 2, 1], 5).unwrap();
            let mut state = AdamState::new(params.param_count());
            adam_step(&mut params, &mut state, &grad, 0.05).unwrap();
            adam_step(&mut params, &mut state, &grad, 0.05).unwrap();
            (params, state)
        };
        let (p1, s1) = run();
        let (p2, s2) = run();
        assert_eq!(p1, p2);
        assert_eq!(s1, s2);
    }

    #[test]
    fn adam_rejects_non_finite_gradient_without_mutation() {
        let mut params = MlpParams::init(vec![3, 4, 1], 0).unwrap();
        let before = params.clone();
        let mut state = AdamState::new(params.param_count());
        let mut values = vec![0.1; params.param_count()];
        values[3] = f64::NAN;
        let err = adam_step(&mut params, &mut state, &FlatGradient { values }, 0.1);
        assert!(matches!(err, Err(Error::NonFinite { .. })));
        assert_eq!(params, before);
        assert_eq!(state.t, 0);
    }

    #[test]
    fn zero_iterations_rejected_one_iteration_updates_once() {
        let mut cfg = tiny_config();
        cfg.train.iterations = 0;
        assert!(matches!(train(&cfg), Err(TrainError::Invalid(_))));

        cfg.train.iterations = 1;
        let out = train(&cfg).unwrap();
        assert_eq!(out.checkpoint.iteration, 1);
        let init = MlpParams::init(vec![4, 8, 8, 1], cfg.train.seed).unwrap();
        assert_ne!(out.checkpoint.params().unwrap(), init);
    }

    #[test]
    fn deterministic_runs_are_bit_identical() {
        let cfg = tiny_config();
        let a = train(&cfg).unwrap();
        let b = train(&cfg).unwrap();
        assert_eq!(a.checkpoint, b.checkpoint);
        assert_eq!(a.history, b.history);
        assert_eq!(a.history.to_csv(), b.history.to_csv());
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let cfg = tiny_config();
        let out = train(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("checkpoint.json");
        out.checkpoint.save(&path).unwrap();
        let loaded = Checkpoint::load(&path).unwrap();
        assert_eq!(out.checkpoint, loaded);

        let p = out.checkpoint.params().unwrap();
        let q = loaded.params().unwrap();
        let mut rng = RngStream::new(99, 0);
        for _ in 0..1000 {
            let x: Vec<f64> = (0..4).map(|_| rng.uniform_open(-1.0, 1.0)).collect();
            assert_eq!(p.forward(&x).unwrap(), q.forward(&x).unwrap());
        }
    }

    #[test]
    fn spatial_dim_recovery() {
        let cp = |id: &str, n0: usize| Checkpoint {
            layer_sizes: vec![n0, 8, 1],
            activation: "tanh".into(),
            weights: vec![],
            biases: vec![],
            iteration: 0,
            adam_m: vec![],
            adam_v: vec![],
            seed: 0,
            problem_id: id.into(),
            exact_solution: true,
        };
        assert_eq!(cp("p1_1d_lognormal", 11).spatial_dim().unwrap(), 1);
        assert_eq!(cp("p2_neumann", 20).spatial_dim().unwrap(), 10);
        assert_eq!(cp("p3_dirichlet", 4).spatial_dim().unwrap(), 2);
        assert_eq!(cp("p4_langevin", 5).spatial_dim().unwrap(), 4);
        assert!(cp("p2_neumann", 5).spatial_dim().is_err());
    }

    /// Explodes after a fixed number of value() calls, to trigger the abort
    /// path at a known iteration.
    struct FusedLagrangian {
        inner: Arc<dyn Lagrangian>,
        calls: AtomicUsize,
        explode_after: usize,
    }

    impl Lagrangian for FusedLagrangian {
        fn value(&self, x: &[f64], z: &[f64], u: f64, g: &[f64]) -> f64 {
            let n = self.calls.fetch_add(1, Ordering::Relaxed);
            if n >= self.explode_after {
                f64::NAN
            } else {
                self.inner.value(x, z, u, g)
            }
        }
        fn partials(&self, x: &[f64], z: &[f64], u: f64, g: &[f64], d: &mut [f64]) -> f64 {
            self.inner.partials(x, z, u, g, d)
        }
    }

    #[test]
    fn abort_preserves_pre_step_parameters() {
        let cfg = tiny_config();
        let batch = cfg.train.batch_size;

        // Reference: train 3 clean iterations.
        let mut short = cfg.clone();
        short.train.iterations = 3;
        let clean = train(&short).unwrap();

        // Same run, exploding during iteration 3 (0-based).
        let mut problem = make_problem("p3_dirichlet", 2).unwrap();
        problem.set_penalty_beta(cfg.train.penalty_beta).unwrap();
        problem.lagrangian = Arc::new(FusedLagrangian {
            inner: problem.lagrangian.clone(),
            calls: AtomicUsize::new(0),
            explode_after: 3 * batch,
        });
        match train_with(&problem, &cfg, 0, &mut NoopObserver) {
            Err(TrainError::Aborted { iteration, last_good, .. }) => {
                assert_eq!(iteration, 3);
                assert_eq!(last_good.weights, clean.checkpoint.weights);
                assert_eq!(last_good.biases, clean.checkpoint.biases);
                assert_eq!(last_good.adam_m, clean.checkpoint.adam_m);
            }
            other => panic!("expected abort, got {:?}", other.map(|o| o.checkpoint.iteration)),
        }
    }

    #[test]
    fn history_logs_on_schedule() {
        let mut cfg = tiny_config();
        cfg.train.iterations = 7;
        cfg.eval.every = 3;
        cfg.eval.samples = 0;
        let out = train(&cfg).unwrap();
        let iters: Vec<usize> = out.history.records.iter().map(|r| r.iteration).collect();
        assert_eq!(iters, vec![0, 3, 6]);
        assert!(iters.windows(2).all(|w| w[0] < w[1]));
        let csv = out.history.to_csv();
        assert!(csv.starts_with("iteration,loss,lr,rel_l2_error\n"));
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = desk_config("p3_dirichlet", 2).unwrap();
        let json = serde_json::to_string_pretty(&cfg).unwrap();
        let back: TrainConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(cfg, back);
    }
}
