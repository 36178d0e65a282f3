//! Surrogate learning pipeline: sample uniformly random joint policies, fit
//! one network per sender to its exact ex-ante utility, climb the surrogates
//! with extra-gradient on SoftMax logits, and verify candidates against the
//! true utilities.

use ndarray::{s, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::equilibria::{
    local_ne_verify_with_samples, local_sample_count, EquilibriumReport, Verdict,
};
use crate::error::{Error, Result};
use crate::game::{ex_ante_utilities_any, GameInstance, JointPolicy, SignalingPolicy, TieRule};
use crate::matrix::Matrix;
use crate::neural::{ArchKind, Architecture, Network};
use crate::rng;

/// Training loss above which a run is declared divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

/// Flattened joint policies (sender-major, then row-major `|Ω|×|S|`) and the
/// exact ex-ante utility of every sender.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityDataset {
    pub inputs: Array2<f64>,
    pub labels: Array2<f64>,
    pub seed: u64,
}

impl UtilityDataset {
    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.nrows() == 0
    }

    /// Joint policy stored in row `i`.
    pub fn policy(&self, game: &GameInstance, i: usize) -> Result<JointPolicy> {
        unflatten(
            game,
            self.inputs.row(i).as_slice().expect("standard layout"),
        )
    }
}

/// Rebuilds a joint policy from its flattened form.
pub fn unflatten(game: &GameInstance, flat: &[f64]) -> Result<JointPolicy> {
    let block = game.states() * game.signals();
    if flat.len() != block * game.n_senders() {
        return Err(Error::arg(format!(
            "flattened policy has {} entries, expected {}",
            flat.len(),
            block * game.n_senders()
        )));
    }
    let policies = flat
        .chunks(block)
        .map(|c| {
            SignalingPolicy::new(Matrix::from_row_major(
                game.states(),
                game.signals(),
                c.to_vec(),
            )?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(JointPolicy::new(policies))
}

/// Policy whose rows are uniform on the simplex (normalized exponentials).
pub fn random_policy(states: usize, signals: usize, rng: &mut impl Rng) -> SignalingPolicy {
    let mut m = Matrix::zeros(states, signals);
    for ω in 0..states {
        let row = m.row_mut(ω);
        let mut total = 0.0;
        for v in row.iter_mut() {
            // Exp1 is never exactly 0, so rows cannot vanish
            *v = Exp1.sample(rng);
            total += *v;
        }
        row.iter_mut().for_each(|v| *v /= total);
    }
    SignalingPolicy::new(m).expect("normalized rows are stochastic")
}

pub fn sample_dataset(
    game: &GameInstance,
    count: usize,
    tie: &TieRule,
    seed: u64,
) -> Result<UtilityDataset> {
    if count == 0 {
        return Err(Error::arg("dataset size must be at least 1"));
    }
    let n = game.n_senders();
    let width = n * game.states() * game.signals();
    let mut inputs = Array2::zeros((count, width));
    let mut labels = Array2::zeros((count, n));
    let mut r = rng::stream(seed, "dataset");
    for i in 0..count {
        let policy = JointPolicy::new(
            (0..n)
                .map(|_| random_policy(game.states(), game.signals(), &mut r))
                .collect(),
        );
        let u = ex_ante_utilities_any(game, &policy, tie)?;
        for (k, v) in policy.flatten().into_iter().enumerate() {
            inputs[[i, k]] = v;
        }
        for j in 0..n {
            labels[[i, j]] = u.senders[j];
        }
    }
    Ok(UtilityDataset {
        inputs,
        labels,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Cosine-anneal the step size to this value over the run. `None` keeps
    /// it constant.
    #[serde(default)]
    pub final_learning_rate: Option<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
    /// Fraction held out for the reported validation MSE.
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 128,
            learning_rate: 0.01,
            final_learning_rate: None,
            beta1: 0.9,
            beta2: 0.999,
            eps_adam: 1e-8,
            validation_fraction: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::arg("epochs and batch size must be positive"));
        }
        let positive = [self.learning_rate, self.eps_adam];
        if positive.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::arg(
                "learning rate and Adam epsilon must be positive",
            ));
        }
        if let Some(f) = self.final_learning_rate {
            if !(f >= 0.0) || f > self.learning_rate {
                return Err(Error::arg(
                    "final learning rate must lie in [0, learning rate]",
                ));
            }
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::arg("Adam betas must lie in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::arg("validation fraction must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Adam state over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(len: usize, beta1: f64, beta2: f64, eps: f64) -> Self {
        Adam {
            beta1,
            beta2,
            eps,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    /// Updates the moments with `grad` and returns the bias-corrected step
    /// direction (to be scaled by the learning rate).
    pub fn direction(&mut self, grad: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; grad.len()];
        self.step(&mut out, grad, -1.0);
        out
    }

    /// In-place update `params -= lr · direction(grad)`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        for (((p, m), v), &g) in params
            .iter_mut()
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
            .zip(grad)
        {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub network: Network,
    /// Mean training MSE of each epoch.
    pub loss_history: Vec<f64>,
    /// MSE on the held-out split (training MSE when nothing is held out).
    pub validation_mse: f64,
}

fn mse(net: &Network, x: ArrayView2<f64>, y: ArrayView2<f64>) -> Result<f64> {
    let mut total = 0.0;
    let chunk = 1024;
    let mut start = 0;
    while start < x.nrows() {
        let end = (start + chunk).min(x.nrows());
        let (out, _) = net.forward_batch(x.slice(s![start..end, ..]))?;
        total += (&out - &y.slice(s![start..end, ..])).mapv(|d| d * d).sum();
        start = end;
    }
    Ok(total / (x.nrows() * y.ncols()) as f64)
}

/// Fits `arch` to sender `sender`'s labels with minibatch Adam on MSE.
pub fn train(
    arch: Architecture,
    data: &UtilityDataset,
    sender: usize,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::arg("dataset is empty"));
    }
    if sender >= data.labels.ncols() {
        return Err(Error::arg(format!("sender {sender} has no labels")));
    }
    if arch.output() != 1 {
        return Err(Error::arg("surrogates must have a scalar output"));
    }
    let mut net = Network::init(arch, &mut rng::stream(cfg.seed, "init"))?;

    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rng::stream(cfg.seed, "split"));
    let held = ((data.len() as f64) * cfg.validation_fraction).floor() as usize;
    let held = if held == data.len() { 0 } else { held };
    let (valid_idx, train_idx) = order.split_at(held);
    let x_train = data.inputs.select(Axis(0), train_idx);
    let y_train = data
        .labels
        .slice(s![.., sender..sender + 1])
        .select(Axis(0), train_idx);
    let x_valid = data.inputs.select(Axis(0), valid_idx);
    let y_valid = data
        .labels
        .slice(s![.., sender..sender + 1])
        .select(Axis(0), valid_idx);

    let mut adam = Adam::new(net.param_count(), cfg.beta1, cfg.beta2, cfg.eps_adam);
    let mut shuffle = rng::stream(cfg.seed, "epochs");
    let mut idx: Vec<usize> = (0..x_train.nrows()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let total_steps = (cfg.epochs * x_train.nrows().div_ceil(cfg.batch_size)) as f64;
    let mut step = 0usize;
    for epoch in 0..cfg.epochs {
        idx.shuffle(&mut shuffle);
        let mut epoch_loss = 0.0;
        for batch in idx.chunks(cfg.batch_size) {
            let xb = x_train.select(Axis(0), batch);
            let yb = y_train.select(Axis(0), batch);
            let (out, tape) = net.forward_batch(xb.view())?;
            let diff = &out - &yb;
            let loss = diff.mapv(|d| d * d).sum();
            epoch_loss += loss;
            let d_out = diff * (2.0 / batch.len() as f64);
            let (grad, _) = net.backward_batch(&tape, d_out, false);
            let lr = match cfg.final_learning_rate {
                None => cfg.learning_rate,
                Some(end) => {
                    let t = step as f64 / total_steps;
                    end + (cfg.learning_rate - end) * 0.5 * (1.0 + (std::f64::consts::PI * t).cos())
                }
            };
            step += 1;
            adam.step(net.params_mut(), &grad, lr);
        }
        let epoch_loss = epoch_loss / x_train.nrows() as f64;
        if !epoch_loss.is_finite() || epoch_loss > DIVERGENCE_LIMIT {
            return Err(Error::Numerical(format!(
                "training diverged at epoch {epoch}: loss {epoch_loss:e}"
            )));
        }
        history.push(epoch_loss);
    }
    let validation_mse = if held > 0 {
        mse(&net, x_valid.view(), y_valid.view())?
    } else {
        mse(&net, x_train.view(), y_train.view())?
    };
    Ok(TrainOutcome {
        network: net,
        loss_history: history,
        validation_mse,
    })
}

/// A differentiable utility estimate over flattened joint policies.
pub trait Surrogate {
    fn input_dim(&self) -> usize;
    fn value_and_grad(&self, input: &[f64]) -> Result<(f64, Vec<f64>)>;
}

impl Surrogate for Network {
    fn input_dim(&self) -> usize {
        self.architecture().input()
    }

    fn value_and_grad(&self, input: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.value_and_input_grad(input)
    }
}

/// Unconstrained per-sender logits; policies are their row-wise SoftMax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyLogits(pub Vec<Matrix>);

impl PolicyLogits {
    pub fn zeros(game: &GameInstance) -> Self {
        PolicyLogits(vec![
            Matrix::zeros(game.states(), game.signals());
            game.n_senders()
        ])
    }

    pub fn random_normal(game: &GameInstance, rng: &mut impl Rng) -> Self {
        PolicyLogits(
            (0..game.n_senders())
                .map(|_| {
                    let mut m = Matrix::zeros(game.states(), game.signals());
                    m.as_mut_slice()
                        .iter_mut()
                        .for_each(|v| *v = rng.sample(StandardNormal));
                    m
                })
                .collect(),
        )
    }

    /// Logits that reproduce `policy` where it is interior; zero entries map
    /// to a large negative logit.
    pub fn from_policy(policy: &JointPolicy) -> Self {
        PolicyLogits(
            policy
                .iter()
                .map(|p| {
                    let mut m = p.matrix().clone();
                    m.as_mut_slice()
                        .iter_mut()
                        .for_each(|v| *v = if *v > 0.0 { v.ln() } else { -50.0 });
                    m
                })
                .collect(),
        )
    }

    pub fn policy(&self) -> JointPolicy {
        JointPolicy::new(self.0.iter().map(softmax_rows).collect())
    }
}

pub fn softmax_rows(logits: &Matrix) -> SignalingPolicy {
    let mut m = logits.clone();
    for ω in 0..m.rows() {
        let row = m.row_mut(ω);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        row.iter_mut().for_each(|v| *v /= total);
    }
    SignalingPolicy::new(m).expect("softmax rows are stochastic")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EgOptimizer {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgConfig {
    pub steps: usize,
    pub learning_rate: f64,
    pub restarts: usize,
    pub optimizer: EgOptimizer,
    pub seed: u64,
}

impl Default for EgConfig {
    fn default() -> Self {
        EgConfig {
            steps: 20,
            learning_rate: 0.1,
            restarts: 300,
            optimizer: EgOptimizer::Adam,
            seed: 0,
        }
    }
}

impl EgConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.restarts == 0 {
            return Err(Error::arg("steps and restarts must be positive"));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::arg("extra-gradient learning rate must be positive"));
        }
        Ok(())
    }
}

/// Ascent direction of each sender's surrogate w.r.t. its own logits, taken
/// through the row SoftMax.
pub fn logit_gradients<S: Surrogate>(
    surrogates: &[S],
    logits: &PolicyLogits,
) -> Result<Vec<Matrix>> {
    if surrogates.len() != logits.0.len() {
        return Err(Error::arg(format!(
            "{} surrogates for {} senders",
            surrogates.len(),
            logits.0.len()
        )));
    }
    let policy = logits.policy();
    let input = policy.flatten();
    let mut out = Vec::with_capacity(surrogates.len());
    let mut offset = 0;
    for (j, sur) in surrogates.iter().enumerate() {
        if sur.input_dim() != input.len() {
            return Err(Error::arg(format!(
                "surrogate {j} expects {} inputs, joint policy has {}",
                sur.input_dim(),
                input.len()
            )));
        }
        let (_, g) = sur.value_and_grad(&input)?;
        let p = policy.sender(j).matrix();
        let mut m = Matrix::zeros(p.rows(), p.cols());
        for ω in 0..p.rows() {
            let base = offset + ω * p.cols();
            let gr = &g[base..base + p.cols()];
            let pr = p.row(ω);
            let mean: f64 = pr.iter().zip(gr).map(|(a, b)| a * b).sum();
            for (k, v) in m.row_mut(ω).iter_mut().enumerate() {
                *v = pr[k] * (gr[k] - mean);
            }
        }
        if m.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite surrogate gradient for sender {j}"
            )));
        }
        offset += p.rows() * p.cols();
        out.push(m);
    }
    Ok(out)
}

/// Extra-gradient ascent: extrapolate from `φ` with the gradient at `φ`, then
/// step from `φ` with the gradient at the extrapolated point.
pub fn extragradient<S: Surrogate>(
    surrogates: &[S],
    init: &PolicyLogits,
    cfg: &EgConfig,
) -> Result<PolicyLogits> {
    cfg.validate()?;
    let mut phi = init.clone();
    let sizes: Vec<usize> = phi.0.iter().map(|m| m.as_slice().len()).collect();
    let mut adams: Vec<Adam> = sizes
        .iter()
        .map(|&n| Adam::new(n, 0.9, 0.999, 1e-8))
        .collect();
    let direction = |adams: &mut Vec<Adam>, grads: Vec<Matrix>| -> Vec<Vec<f64>> {
        grads
            .into_iter()
            .zip(adams.iter_mut())
            .map(|(g, a)| match cfg.optimizer {
                EgOptimizer::Sgd => g.into_vec(),
                EgOptimizer::Adam => a.direction(g.as_slice()),
            })
            .collect()
    };
    let apply = |base: &PolicyLogits, dirs: &[Vec<f64>]| -> PolicyLogits {
        PolicyLogits(
            base.0
                .iter()
                .zip(dirs)
                .map(|(m, d)| {
                    let mut m = m.clone();
                    for (v, dv) in m.as_mut_slice().iter_mut().zip(d) {
                        *v += cfg.learning_rate * dv;
                    }
                    m
                })
                .collect(),
        )
    };
    for _ in 0..cfg.steps {
        let d_half = direction(&mut adams, logit_gradients(surrogates, &phi)?);
        let half = apply(&phi, &d_half);
        let d_full = direction(&mut adams, logit_gradients(surrogates, &half)?);
        phi = apply(&phi, &d_full);
    }
    Ok(phi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub arch: ArchKind,
    pub dataset_size: usize,
    pub train: TrainConfig,
    pub eg: EgConfig,
    pub eps: f64,
    /// Deviations sampled per sender; `None` uses the size-based default.
    pub local_samples: Option<usize>,
    /// Worker threads for the restarts; results do not depend on it.
    #[serde(default = "one")]
    pub threads: usize,
}

fn one() -> usize {
    1
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            arch: ArchKind::Dnl,
            dataset_size: 50_000,
            train: TrainConfig::default(),
            eg: EgConfig::default(),
            eps: 0.005,
            local_samples: None,
            threads: 1,
        }
    }
}

impl PipelineConfig {
    /// Seed of the shared dataset.
    pub fn dataset_seed(&self) -> u64 {
        rng::derive_seed(self.train.seed, "dataset")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartRecord {
    pub restart: usize,
    pub verified: bool,
    pub welfare: f64,
    pub utilities: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub report: EquilibriumReport,
    pub policy: JointPolicy,
    /// False when no restart verified and the best unverified candidate was
    /// returned instead.
    pub verified: bool,
    pub restarts: Vec<RestartRecord>,
    pub surrogates: Vec<TrainOutcome>,
}

/// Trains one surrogate per sender on `data`.
pub fn train_surrogates(
    game: &GameInstance,
    data: &UtilityDataset,
    arch: ArchKind,
    train_cfg: &TrainConfig,
) -> Result<Vec<TrainOutcome>> {
    let input = game.n_senders() * game.states() * game.signals();
    (0..game.n_senders())
        .map(|j| {
            let tc = TrainConfig {
                seed: rng::derive_seed(train_cfg.seed, &format!("train:{j}")),
                ..train_cfg.clone()
            };
            train(Architecture::standard(arch, input), data, j, &tc)
        })
        .collect()
}

/// Full pipeline: sample, train, run restarts, verify every candidate on the
/// true utilities and keep the verified one with the highest welfare.
/// `init`, when given, replaces the first restart's random start.
pub fn find_local_ne(
    game: &GameInstance,
    tie: &TieRule,
    cfg: &PipelineConfig,
    init: Option<&PolicyLogits>,
) -> Result<PipelineOutcome> {
    let data = sample_dataset(game, cfg.dataset_size, tie, cfg.dataset_seed())?;
    let surrogates = train_surrogates(game, &data, cfg.arch, &cfg.train)?;
    search_local_ne(game, tie, cfg, surrogates, init)
}

struct Candidate {
    restart: usize,
    policy: JointPolicy,
    report: EquilibriumReport,
}

fn run_restart(
    game: &GameInstance,
    tie: &TieRule,
    cfg: &PipelineConfig,
    nets: &[Network],
    init: Option<&PolicyLogits>,
    samples: usize,
    r: usize,
) -> Result<Candidate> {
    let start = match (r, init) {
        (0, Some(l)) => l.clone(),
        _ => PolicyLogits::random_normal(
            game,
            &mut rng::stream(cfg.eg.seed, &format!("init:restart:{r}")),
        ),
    };
    let policy = extragradient(nets, &start, &cfg.eg)?.policy();
    let report = local_ne_verify_with_samples(
        game,
        &policy,
        tie,
        cfg.eps,
        rng::derive_seed(cfg.eg.seed, &format!("verify:{r}")),
        samples,
    )?;
    Ok(Candidate {
        restart: r,
        policy,
        report,
    })
}

/// The restart and verification half of [`find_local_ne`], for callers that
/// already hold trained surrogates.
pub fn search_local_ne(
    game: &GameInstance,
    tie: &TieRule,
    cfg: &PipelineConfig,
    surrogates: Vec<TrainOutcome>,
    init: Option<&PolicyLogits>,
) -> Result<PipelineOutcome> {
    cfg.eg.validate()?;
    if surrogates.len() != game.n_senders() {
        return Err(Error::arg("one surrogate per sender is required"));
    }
    if cfg.threads == 0 {
        return Err(Error::arg("thread count must be at least 1"));
    }
    let nets: Vec<Network> = surrogates.iter().map(|t| t.network.clone()).collect();
    let samples = cfg
        .local_samples
        .unwrap_or_else(|| local_sample_count(game));
    let restarts = cfg.eg.restarts;
    let candidates: Vec<Candidate> = if cfg.threads == 1 {
        (0..restarts)
            .map(|r| run_restart(game, tie, cfg, &nets, init, samples, r))
            .collect::<Result<_>>()?
    } else {
        // restart r goes to worker r mod threads; results are re-sorted
        let mut all: Vec<Candidate> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..cfg.threads.min(restarts))
                .map(|w| {
                    let nets = &nets;
                    scope.spawn(move || {
                        (w..restarts)
                            .step_by(cfg.threads)
                            .map(|r| run_restart(game, tie, cfg, nets, init, samples, r))
                            .collect::<Result<Vec<_>>>()
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("restart worker panicked"))
                .collect::<Result<Vec<_>>>()
        })?
        .into_iter()
        .flatten()
        .collect();
        all.sort_by_key(|c| c.restart);
        all
    };

    let records = candidates
        .iter()
        .map(|c| RestartRecord {
            restart: c.restart,
            verified: c.report.verdict != Verdict::Refuted,
            welfare: c.report.welfare(),
            utilities: c.report.utilities.clone(),
        })
        .collect::<Vec<_>>();
    // highest welfare wins; ties keep the lower restart index
    let pick = |verified: bool| {
        candidates
            .iter()
            .filter(|c| (c.report.verdict != Verdict::Refuted) == verified)
            .fold(None::<&Candidate>, |best, c| match best {
                Some(b) if b.report.welfare() >= c.report.welfare() => Some(b),
                _ => Some(c),
            })
    };
    let (best, verified) = match pick(true) {
        Some(c) => (c, true),
        None => (pick(false).expect("at least one restart ran"), false),
    };
    Ok(PipelineOutcome {
        report: best.report.clone(),
        policy: best.policy.clone(),
        verified,
        restarts: records,
        surrogates,
    })
}
