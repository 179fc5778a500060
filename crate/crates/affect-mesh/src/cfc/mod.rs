//! Closed-form continuous-time recurrent cells and the listener model
//! built from them.
//!
//! A cell holds per-neuron time constants and updates its state for an
//! arbitrary elapsed interval in one step:
//!
//! ```text
//! h(t + Δt) = h(t) ⊙ exp(−Δt/τ) + (1 − exp(−Δt/τ)) ⊙ f_θ([x, h(t)])
//! ```
//!
//! where `f_θ` is a small tanh MLP producing the steady-state target. The
//! update is a per-neuron convex interpolation between the current state
//! and that target, so `Δt = 0` is the exact identity and growing `Δt`
//! decays the state monotonically toward the target. Layer normalization
//! sits on the *output path only*: the recurrent state is never normalized,
//! which is precisely what keeps the zero-interval identity exact.
//!
//! The listener model stacks an input encoder, two cells, and four output
//! heads (trajectory, pattern, prediction, intent). All math is plain `f64`
//! so a state update is bit-for-bit reproducible across platforms.

pub mod store;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

/// Trajectory head width: emotion, energy, their velocities, stability,
/// confidence.
pub const TRAJ_DIM: usize = 6;
/// Pattern head width (independent sigmoid detectors).
pub const PATTERN_DIM: usize = 9;
/// Prediction head width: next emotion, next energy, exploration.
pub const PRED_DIM: usize = 3;
/// Intent head width (class logits).
pub const INTENT_DIM: usize = 6;

/// Intent class names in logit order.
pub const INTENT_CLASSES: [&str; INTENT_DIM] =
    ["maintain", "energize", "calm", "focus", "explore", "social"];

const LN_EPS: f64 = 1e-5;

/// Model shape and time-constant initialization range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CfcConfig {
    pub input_dim: usize,
    pub encoder_dim: usize,
    pub hidden_dim: usize,
    pub num_cells: usize,
    /// Hidden widths of the steady-state MLP; its output width is always
    /// `hidden_dim`.
    pub mlp_hidden: [usize; 2],
    /// Time constants are drawn log-uniformly from `[tau_min, tau_max]`
    /// seconds.
    pub tau_min: f64,
    pub tau_max: f64,
}

impl Default for CfcConfig {
    /// The listener model: 80-d event input, 64-d encoder, two 64-wide
    /// cells, τ spanning half a second to five minutes.
    fn default() -> Self {
        Self {
            input_dim: 80,
            encoder_dim: 64,
            hidden_dim: 64,
            num_cells: 2,
            mlp_hidden: [64, 128],
            tau_min: 0.5,
            tau_max: 300.0,
        }
    }
}

impl CfcConfig {
    /// Small configuration used by gradient checking and toy training.
    pub fn toy() -> Self {
        Self {
            input_dim: 8,
            encoder_dim: 8,
            hidden_dim: 8,
            num_cells: 1,
            mlp_hidden: [8, 8],
            tau_min: 0.5,
            tau_max: 300.0,
        }
    }

    /// The mesh-runtime model: a 16-d fused-signal input and a single
    /// 32-wide cell. Built with the split τ population (half the neurons
    /// under five seconds, half above thirty) so the room integrator has
    /// both reflexes and memory.
    pub fn mesh() -> Self {
        Self {
            input_dim: 16,
            encoder_dim: 16,
            hidden_dim: 32,
            num_cells: 1,
            mlp_hidden: [32, 32],
            tau_min: 0.5,
            tau_max: 300.0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("input_dim", self.input_dim),
            ("encoder_dim", self.encoder_dim),
            ("hidden_dim", self.hidden_dim),
            ("num_cells", self.num_cells),
            ("mlp_hidden[0]", self.mlp_hidden[0]),
            ("mlp_hidden[1]", self.mlp_hidden[1]),
        ] {
            if v == 0 {
                return Err(format!("{name} must be positive"));
            }
        }
        if !(self.tau_min > 0.0 && self.tau_min < self.tau_max) {
            return Err(format!(
                "tau range [{}, {}] must be positive and ordered",
                self.tau_min, self.tau_max
            ));
        }
        Ok(())
    }
}

/// Elapsed time passed to a state update was negative (or not a number).
/// Clocks never run backwards; the caller must treat this as a bug.
#[derive(Debug, thiserror::Error)]
#[error("clock regression: Δt = {dt} must be ≥ 0")]
pub struct ClockError {
    pub dt: f64,
}

/// A dense affine layer, row-major `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub in_dim: usize,
    pub out_dim: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Linear {
    fn init(in_dim: usize, out_dim: usize, rng: &mut ChaCha20Rng) -> Linear {
        let scale = 1.0 / (in_dim as f64).sqrt();
        Linear {
            in_dim,
            out_dim,
            w: (0..in_dim * out_dim)
                .map(|_| rng.gen_range(-scale..scale))
                .collect(),
            b: vec![0.0; out_dim],
        }
    }

    fn zeros(in_dim: usize, out_dim: usize) -> Linear {
        Linear {
            in_dim,
            out_dim,
            w: vec![0.0; in_dim * out_dim],
            b: vec![0.0; out_dim],
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.in_dim);
        let mut out = self.b.clone();
        for (o, out_v) in out.iter_mut().enumerate() {
            let row = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
            *out_v += row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>();
        }
        out
    }

    /// `x` gradient of `forward`: `wᵀ · dz`.
    pub fn backward_input(&self, dz: &[f64]) -> Vec<f64> {
        let mut dx = vec![0.0; self.in_dim];
        for (o, dz_v) in dz.iter().enumerate() {
            let row = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
            for (dx_v, w) in dx.iter_mut().zip(row) {
                *dx_v += w * dz_v;
            }
        }
        dx
    }

    /// Accumulates parameter gradients for `forward(x) = z`.
    pub fn accumulate_grads(&mut self, dz: &[f64], x: &[f64]) {
        for (o, dz_v) in dz.iter().enumerate() {
            let row = &mut self.w[o * self.in_dim..(o + 1) * self.in_dim];
            for (w, x_v) in row.iter_mut().zip(x) {
                *w += dz_v * x_v;
            }
            self.b[o] += dz_v;
        }
    }

    fn param_count(&self) -> usize {
        self.w.len() + self.b.len()
    }
}

/// One continuous-time cell: per-neuron log time constants, the
/// steady-state MLP, and output-path layer-norm parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct CellParams {
    pub log_tau: Vec<f64>,
    pub l1: Linear,
    pub l2: Linear,
    pub l3: Linear,
    pub ln_gain: Vec<f64>,
    pub ln_bias: Vec<f64>,
}

/// Everything a cell step computes, kept for backpropagation. Inference
/// callers read `h_new` and `out` and drop the rest.
#[derive(Debug, Clone)]
pub struct CellStep {
    pub z1: Vec<f64>,
    pub a1: Vec<f64>,
    pub z2: Vec<f64>,
    pub a2: Vec<f64>,
    pub target: Vec<f64>,
    pub gate: Vec<f64>,
    pub h_new: Vec<f64>,
    pub ln_mean: f64,
    pub ln_rstd: f64,
    pub xhat: Vec<f64>,
    pub out: Vec<f64>,
}

impl CellParams {
    fn init(input_dim: usize, hidden_dim: usize, mlp_hidden: [usize; 2], rng: &mut ChaCha20Rng) -> CellParams {
        CellParams {
            log_tau: Vec::new(), // filled by the caller, which owns the τ scheme
            l1: Linear::init(input_dim + hidden_dim, mlp_hidden[0], rng),
            l2: Linear::init(mlp_hidden[0], mlp_hidden[1], rng),
            l3: Linear::init(mlp_hidden[1], hidden_dim, rng),
            ln_gain: vec![1.0; hidden_dim],
            ln_bias: vec![0.0; hidden_dim],
        }
    }

    fn zeros(input_dim: usize, hidden_dim: usize, mlp_hidden: [usize; 2]) -> CellParams {
        CellParams {
            log_tau: vec![0.0; hidden_dim],
            l1: Linear::zeros(input_dim + hidden_dim, mlp_hidden[0]),
            l2: Linear::zeros(mlp_hidden[0], mlp_hidden[1]),
            l3: Linear::zeros(mlp_hidden[1], hidden_dim),
            ln_gain: vec![0.0; hidden_dim],
            ln_bias: vec![0.0; hidden_dim],
        }
    }

    /// The steady-state target `f_θ([x, h])`: a tanh MLP, tanh-bounded on
    /// its output so the recurrent state stays inside the unit box.
    pub fn steady_target(&self, x: &[f64], h: &[f64]) -> Vec<f64> {
        let mut xh = Vec::with_capacity(x.len() + h.len());
        xh.extend_from_slice(x);
        xh.extend_from_slice(h);
        let a1: Vec<f64> = self.l1.forward(&xh).iter().map(|v| v.tanh()).collect();
        let a2: Vec<f64> = self.l2.forward(&a1).iter().map(|v| v.tanh()).collect();
        self.l3.forward(&a2).iter().map(|v| v.tanh()).collect()
    }

    /// Advances the cell state by `dt` seconds. The returned `h_new` is the
    /// next recurrent state (not normalized); `out` is the layer-normed
    /// output-path value.
    pub fn step(&self, x: &[f64], h: &[f64], dt: f64) -> CellStep {
        let mut xh = Vec::with_capacity(x.len() + h.len());
        xh.extend_from_slice(x);
        xh.extend_from_slice(h);
        let z1 = self.l1.forward(&xh);
        let a1: Vec<f64> = z1.iter().map(|v| v.tanh()).collect();
        let z2 = self.l2.forward(&a1);
        let a2: Vec<f64> = z2.iter().map(|v| v.tanh()).collect();
        let z3 = self.l3.forward(&a2);
        let target: Vec<f64> = z3.iter().map(|v| v.tanh()).collect();
        let gate: Vec<f64> = self
            .log_tau
            .iter()
            .map(|lt| (-dt / lt.exp()).exp())
            .collect();
        let h_new: Vec<f64> = h
            .iter()
            .zip(&gate)
            .zip(&target)
            .map(|((h_i, g), f_i)| g * h_i + (1.0 - g) * f_i)
            .collect();

        let n = h_new.len() as f64;
        let ln_mean = h_new.iter().sum::<f64>() / n;
        let var = h_new.iter().map(|v| (v - ln_mean).powi(2)).sum::<f64>() / n;
        let ln_rstd = 1.0 / (var + LN_EPS).sqrt();
        let xhat: Vec<f64> = h_new.iter().map(|v| (v - ln_mean) * ln_rstd).collect();
        let out: Vec<f64> = xhat
            .iter()
            .zip(&self.ln_gain)
            .zip(&self.ln_bias)
            .map(|((x, g), b)| x * g + b)
            .collect();
        CellStep {
            z1,
            a1,
            z2,
            a2,
            target,
            gate,
            h_new,
            ln_mean,
            ln_rstd,
            xhat,
            out,
        }
    }

    fn param_count(&self) -> usize {
        self.log_tau.len()
            + self.l1.param_count()
            + self.l2.param_count()
            + self.l3.param_count()
            + self.ln_gain.len()
            + self.ln_bias.len()
    }
}

/// Raw head pre-activations for one step.
#[derive(Debug, Clone)]
pub struct HeadZ {
    pub traj: Vec<f64>,
    pub pattern: Vec<f64>,
    pub pred: Vec<f64>,
    pub intent: Vec<f64>,
}

/// Full step record for backpropagation through time.
#[derive(Debug, Clone)]
pub struct StepTrace {
    pub input: Vec<f64>,
    pub dt: f64,
    pub enc_z: Vec<f64>,
    pub enc_a: Vec<f64>,
    /// Per cell: the input `x` it saw, the previous state, and the step.
    pub cells: Vec<(Vec<f64>, Vec<f64>, CellStep)>,
    pub head_z: HeadZ,
}

/// Recurrent state of a model instance plus its event clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CfcState {
    /// Un-normalized hidden state per cell.
    pub h: Vec<Vec<f64>>,
    /// Scenario-clock time of the last observed event.
    pub last_event_time: f64,
}

impl CfcState {
    pub fn fresh(config: &CfcConfig, now: f64) -> CfcState {
        CfcState {
            h: vec![vec![0.0; config.hidden_dim]; config.num_cells],
            last_event_time: now,
        }
    }
}

/// The stacked model: encoder, cells, and the four heads.
#[derive(Debug, Clone, PartialEq)]
pub struct CfcModel {
    pub config: CfcConfig,
    pub encoder: Linear,
    pub cells: Vec<CellParams>,
    pub head_traj: Linear,
    pub head_pattern: Linear,
    pub head_pred: Linear,
    pub head_intent: Linear,
}

impl CfcModel {
    /// Seeded initialization: fan-in-scaled uniform weights, zero biases,
    /// log-uniform time constants over `[tau_min, tau_max]`.
    pub fn new(config: &CfcConfig, seed: u64) -> CfcModel {
        config.validate().expect("valid cfc config");
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut model = Self::build(config, &mut rng);
        let (lo, hi) = (config.tau_min.ln(), config.tau_max.ln());
        for cell in &mut model.cells {
            cell.log_tau = (0..config.hidden_dim)
                .map(|_| rng.gen_range(lo..hi))
                .collect();
        }
        model
    }

    /// Seeded initialization with a split τ population: the first half of
    /// each cell's neurons draw from `fast` seconds (half-open `[lo, hi)`),
    /// the second half from `slow` seconds (half-open `(lo, hi]`). Used by
    /// the mesh-side model, which needs both second-scale reactivity and
    /// minute-scale context in fixed proportion.
    pub fn new_with_tau_split(
        config: &CfcConfig,
        seed: u64,
        fast: (f64, f64),
        slow: (f64, f64),
    ) -> CfcModel {
        config.validate().expect("valid cfc config");
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut model = Self::build(config, &mut rng);
        let half = config.hidden_dim / 2;
        for cell in &mut model.cells {
            cell.log_tau = (0..config.hidden_dim)
                .map(|i| {
                    if i < half {
                        let u: f64 = rng.gen(); // [0, 1) → τ ∈ [lo, hi)
                        fast.0.ln() + u * (fast.1.ln() - fast.0.ln())
                    } else {
                        let u: f64 = rng.gen(); // 1−u ∈ (0, 1] → τ ∈ (lo, hi]
                        slow.0.ln() + (1.0 - u) * (slow.1.ln() - slow.0.ln())
                    }
                })
                .collect();
        }
        model
    }

    fn build(config: &CfcConfig, rng: &mut ChaCha20Rng) -> CfcModel {
        let encoder = Linear::init(config.input_dim, config.encoder_dim, rng);
        let mut cells = Vec::with_capacity(config.num_cells);
        for k in 0..config.num_cells {
            let in_dim = if k == 0 {
                config.encoder_dim
            } else {
                config.hidden_dim
            };
            cells.push(CellParams::init(
                in_dim,
                config.hidden_dim,
                config.mlp_hidden,
                rng,
            ));
        }
        CfcModel {
            encoder,
            cells,
            head_traj: Linear::init(config.hidden_dim, TRAJ_DIM, rng),
            head_pattern: Linear::init(config.hidden_dim, PATTERN_DIM, rng),
            head_pred: Linear::init(config.hidden_dim, PRED_DIM, rng),
            head_intent: Linear::init(config.hidden_dim, INTENT_DIM, rng),
            config: config.clone(),
        }
    }

    /// A same-shape model with every parameter zero; used as a gradient
    /// accumulator.
    pub fn zeros_like(config: &CfcConfig) -> CfcModel {
        let mut cells = Vec::with_capacity(config.num_cells);
        for k in 0..config.num_cells {
            let in_dim = if k == 0 {
                config.encoder_dim
            } else {
                config.hidden_dim
            };
            cells.push(CellParams::zeros(
                in_dim,
                config.hidden_dim,
                config.mlp_hidden,
            ));
        }
        CfcModel {
            encoder: Linear::zeros(config.input_dim, config.encoder_dim),
            cells,
            head_traj: Linear::zeros(config.hidden_dim, TRAJ_DIM),
            head_pattern: Linear::zeros(config.hidden_dim, PATTERN_DIM),
            head_pred: Linear::zeros(config.hidden_dim, PRED_DIM),
            head_intent: Linear::zeros(config.hidden_dim, INTENT_DIM),
            config: config.clone(),
        }
    }

    /// Advances the state by `dt` with `input` and returns head
    /// pre-activations plus the full trace.
    pub fn forward(
        &self,
        state: &mut CfcState,
        input: &[f64],
        dt: f64,
    ) -> Result<StepTrace, ClockError> {
        if dt.is_nan() || dt < 0.0 {
            return Err(ClockError { dt });
        }
        assert_eq!(input.len(), self.config.input_dim, "input width mismatch");
        let enc_z = self.encoder.forward(input);
        let enc_a: Vec<f64> = enc_z.iter().map(|v| v.tanh()).collect();
        let mut x = enc_a.clone();
        let mut cells = Vec::with_capacity(self.cells.len());
        for (k, cell) in self.cells.iter().enumerate() {
            let h_prev = state.h[k].clone();
            let step = cell.step(&x, &h_prev, dt);
            state.h[k] = step.h_new.clone();
            let next_x = step.out.clone();
            cells.push((x, h_prev, step));
            x = next_x;
        }
        let head_z = HeadZ {
            traj: self.head_traj.forward(&x),
            pattern: self.head_pattern.forward(&x),
            pred: self.head_pred.forward(&x),
            intent: self.head_intent.forward(&x),
        };
        Ok(StepTrace {
            input: input.to_vec(),
            dt,
            enc_z,
            enc_a,
            cells,
            head_z,
        })
    }

    /// Total number of scalar parameters.
    pub fn param_count(&self) -> usize {
        self.encoder.param_count()
            + self.cells.iter().map(CellParams::param_count).sum::<usize>()
            + self.head_traj.param_count()
            + self.head_pattern.param_count()
            + self.head_pred.param_count()
            + self.head_intent.param_count()
    }

    /// Named per-tensor sizes, for the parameter report.
    pub fn param_breakdown(&self) -> Vec<(String, usize)> {
        let mut rows = vec![
            ("encoder.w".to_string(), self.encoder.w.len()),
            ("encoder.b".to_string(), self.encoder.b.len()),
        ];
        for (k, c) in self.cells.iter().enumerate() {
            rows.push((format!("cells.{k}.log_tau"), c.log_tau.len()));
            for (n, l) in [("l1", &c.l1), ("l2", &c.l2), ("l3", &c.l3)] {
                rows.push((format!("cells.{k}.{n}.w"), l.w.len()));
                rows.push((format!("cells.{k}.{n}.b"), l.b.len()));
            }
            rows.push((format!("cells.{k}.ln_gain"), c.ln_gain.len()));
            rows.push((format!("cells.{k}.ln_bias"), c.ln_bias.len()));
        }
        for (n, l) in [
            ("head_traj", &self.head_traj),
            ("head_pattern", &self.head_pattern),
            ("head_pred", &self.head_pred),
            ("head_intent", &self.head_intent),
        ] {
            rows.push((format!("{n}.w"), l.w.len()));
            rows.push((format!("{n}.b"), l.b.len()));
        }
        rows
    }

    fn visit_tensors<'a>(&'a self) -> Vec<(&'static str, TensorRef<'a>)> {
        let mut v: Vec<(&'static str, TensorRef<'a>)> = vec![
            ("enc.w", TensorRef(&self.encoder.w)),
            ("enc.b", TensorRef(&self.encoder.b)),
        ];
        for c in &self.cells {
            v.push(("log_tau", TensorRef(&c.log_tau)));
            v.push(("l1.w", TensorRef(&c.l1.w)));
            v.push(("l1.b", TensorRef(&c.l1.b)));
            v.push(("l2.w", TensorRef(&c.l2.w)));
            v.push(("l2.b", TensorRef(&c.l2.b)));
            v.push(("l3.w", TensorRef(&c.l3.w)));
            v.push(("l3.b", TensorRef(&c.l3.b)));
            v.push(("ln_gain", TensorRef(&c.ln_gain)));
            v.push(("ln_bias", TensorRef(&c.ln_bias)));
        }
        for l in [
            &self.head_traj,
            &self.head_pattern,
            &self.head_pred,
            &self.head_intent,
        ] {
            v.push(("head.w", TensorRef(&l.w)));
            v.push(("head.b", TensorRef(&l.b)));
        }
        v
    }

    fn visit_tensors_mut(&mut self) -> Vec<(&'static str, &mut Vec<f64>)> {
        let mut v: Vec<(&'static str, &mut Vec<f64>)> = vec![
            ("enc.w", &mut self.encoder.w),
            ("enc.b", &mut self.encoder.b),
        ];
        for c in &mut self.cells {
            v.push(("log_tau", &mut c.log_tau));
            v.push(("l1.w", &mut c.l1.w));
            v.push(("l1.b", &mut c.l1.b));
            v.push(("l2.w", &mut c.l2.w));
            v.push(("l2.b", &mut c.l2.b));
            v.push(("l3.w", &mut c.l3.w));
            v.push(("l3.b", &mut c.l3.b));
            v.push(("ln_gain", &mut c.ln_gain));
            v.push(("ln_bias", &mut c.ln_bias));
        }
        for l in [
            &mut self.head_traj,
            &mut self.head_pattern,
            &mut self.head_pred,
            &mut self.head_intent,
        ] {
            v.push(("head.w", &mut l.w));
            v.push(("head.b", &mut l.b));
        }
        v
    }

    /// Flat parameter vector in a fixed traversal order.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.param_count());
        for (_, t) in self.visit_tensors() {
            flat.extend_from_slice(t.0);
        }
        flat
    }

    /// Loads a flat vector produced by [`CfcModel::to_flat`] on a
    /// same-shaped model.
    pub fn from_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count(), "flat size mismatch");
        let mut offset = 0;
        for (_, t) in self.visit_tensors_mut() {
            let n = t.len();
            t.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
    }

    /// True per flat index for parameters that take weight decay (weight
    /// matrices only — biases, time constants, and norm parameters are
    /// exempt).
    pub fn decay_mask(&self) -> Vec<bool> {
        let mut mask = Vec::with_capacity(self.param_count());
        for (name, t) in self.visit_tensors() {
            let decays = name.ends_with(".w");
            mask.extend(std::iter::repeat_n(decays, t.0.len()));
        }
        mask
    }
}

struct TensorRef<'a>(&'a [f64]);

/// Policy-facing trajectory estimate on the legacy scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryOutput {
    /// Current emotion estimate, legacy `[0, 99]`.
    pub emotion: f64,
    /// Current energy estimate, legacy `[0, 99]`.
    pub energy: f64,
    /// Legacy units per second, bounded to `±0.5`.
    pub emotion_velocity: f64,
    pub energy_velocity: f64,
    /// Trajectory stability in `[0, 1]`.
    pub stability: f64,
    /// Model confidence in `[0, 1]`; the curation policy gates on this.
    pub confidence: f64,
}

impl TrajectoryOutput {
    pub fn from_raw(z: &[f64]) -> TrajectoryOutput {
        debug_assert_eq!(z.len(), TRAJ_DIM);
        TrajectoryOutput {
            emotion: sigmoid(z[0]) * 99.0,
            energy: sigmoid(z[1]) * 99.0,
            emotion_velocity: 0.5 * z[2].tanh(),
            energy_velocity: 0.5 * z[3].tanh(),
            stability: sigmoid(z[4]),
            confidence: sigmoid(z[5]),
        }
    }
}

/// Prediction-head output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionOutput {
    pub next_emotion: f64,
    pub next_energy: f64,
    /// Exploration appetite in `[0, 1]`; above the policy's exploration
    /// gate, target noise is injected.
    pub exploration: f64,
}

impl PredictionOutput {
    pub fn from_raw(z: &[f64]) -> PredictionOutput {
        debug_assert_eq!(z.len(), PRED_DIM);
        PredictionOutput {
            next_emotion: sigmoid(z[0]) * 99.0,
            next_energy: sigmoid(z[1]) * 99.0,
            exploration: sigmoid(z[2]),
        }
    }
}

/// Index of the winning intent class (lowest index wins ties).
pub fn intent_from_logits(z: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in z.iter().enumerate() {
        if *v > z[best] {
            best = i;
        }
    }
    best
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
