//! Exact representation and evaluation of multi-sender persuasion games.
//!
//! A game has `n` senders that observe a common state `ω ~ μ0` and each send
//! a signal drawn independently from their own row-stochastic policy. The
//! receiver sees the joint signal, forms a Bayes posterior and plays a best
//! response; ties are resolved by a [`TieRule`].
//!
//! Joint signals are indexed in mixed radix with sender 0 as the most
//! significant digit: `index = Σ_j s_j · |S|^(n-1-j)`. All state, signal and
//! action indices are 0-based.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Tolerance on normalized expected utilities below which two actions tie.
pub const TIE_TOLERANCE: f64 = 1e-9;
/// Default cap on `|Ω|·|S|^n` for exact enumeration.
pub const DEFAULT_TERM_CAP: u128 = 10_000_000;

const PRIOR_TOLERANCE: f64 = 1e-12;
const ROW_TOLERANCE: f64 = 1e-9;

/// Full description of a persuasion game.
#[derive(Debug, Clone, PartialEq)]
pub struct GameInstance {
    n_senders: usize,
    signals: usize,
    prior: Vec<f64>,
    receiver_utility: Matrix,
    sender_utilities: Vec<Matrix>,
}

impl GameInstance {
    pub fn new(
        prior: Vec<f64>,
        signals: usize,
        receiver_utility: Matrix,
        sender_utilities: Vec<Matrix>,
    ) -> Result<Self> {
        let states = prior.len();
        if states == 0 {
            return Err(Error::arg("game needs at least one state"));
        }
        if signals == 0 {
            return Err(Error::arg("game needs at least one signal"));
        }
        if sender_utilities.is_empty() {
            return Err(Error::arg("game needs at least one sender"));
        }
        if prior.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::arg("prior entries must be finite and non-negative"));
        }
        let total: f64 = prior.iter().sum();
        if (total - 1.0).abs() > PRIOR_TOLERANCE {
            return Err(Error::arg(format!("prior sums to {total}, expected 1")));
        }
        let actions = receiver_utility.cols();
        if receiver_utility.rows() != states || actions == 0 {
            return Err(Error::arg(format!(
                "receiver utility must be {states}x|A| with |A| >= 1, got {}x{}",
                receiver_utility.rows(),
                actions
            )));
        }
        for (j, u) in sender_utilities.iter().enumerate() {
            if u.rows() != states || u.cols() != actions {
                return Err(Error::arg(format!(
                    "sender {j} utility must be {states}x{actions}, got {}x{}",
                    u.rows(),
                    u.cols()
                )));
            }
        }
        let finite = |m: &Matrix| m.as_slice().iter().all(|v| v.is_finite());
        if !finite(&receiver_utility) || !sender_utilities.iter().all(finite) {
            return Err(Error::arg("utilities must be finite"));
        }
        Ok(GameInstance {
            n_senders: sender_utilities.len(),
            signals,
            prior,
            receiver_utility,
            sender_utilities,
        })
    }

    pub fn n_senders(&self) -> usize {
        self.n_senders
    }

    pub fn states(&self) -> usize {
        self.prior.len()
    }

    pub fn signals(&self) -> usize {
        self.signals
    }

    pub fn actions(&self) -> usize {
        self.receiver_utility.cols()
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn receiver_utility(&self) -> &Matrix {
        &self.receiver_utility
    }

    pub fn sender_utility(&self, j: usize) -> &Matrix {
        &self.sender_utilities[j]
    }

    pub fn sender_utilities(&self) -> &[Matrix] {
        &self.sender_utilities
    }

    /// Number of joint signals `|S|^n`, or `None` on overflow.
    pub fn joint_signal_count(&self) -> Option<usize> {
        (0..self.n_senders).try_fold(1usize, |acc, _| acc.checked_mul(self.signals))
    }

    /// `|Ω|·|S|^n` as a wide integer, used for the enumeration cap.
    pub fn term_count(&self) -> u128 {
        let mut t = self.states() as u128;
        for _ in 0..self.n_senders {
            t = t.saturating_mul(self.signals as u128);
        }
        t
    }

    pub(crate) fn check_term_cap(&self, cap: u128) -> Result<usize> {
        let needed = self.term_count();
        if needed > cap {
            return Err(Error::size(
                "exact enumeration terms |Ω|·|S|^n",
                needed,
                cap,
            ));
        }
        self.joint_signal_count()
            .ok_or_else(|| Error::size("joint signal count", u128::MAX, cap))
    }

    /// Receiver-optimal actions at each state (within [`TIE_TOLERANCE`]).
    pub fn optimal_actions(&self, state: usize) -> Vec<usize> {
        let row = self.receiver_utility.row(state);
        let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (0..row.len())
            .filter(|&a| row[a] >= best - TIE_TOLERANCE)
            .collect()
    }

    /// Decodes a joint-signal index into per-sender signals.
    pub fn decode_joint(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.n_senders];
        for slot in out.iter_mut().rev() {
            *slot = index % self.signals;
            index /= self.signals;
        }
        out
    }

    pub fn encode_joint(&self, signal: &[usize]) -> Result<usize> {
        if signal.len() != self.n_senders {
            return Err(Error::arg(format!(
                "joint signal has {} components, game has {} senders",
                signal.len(),
                self.n_senders
            )));
        }
        let mut index = 0usize;
        for &s in signal {
            if s >= self.signals {
                return Err(Error::arg(format!(
                    "signal {s} out of range 0..{}",
                    self.signals
                )));
            }
            index = index * self.signals + s;
        }
        Ok(index)
    }

    fn check_state(&self, state: usize) -> Result<()> {
        if state >= self.states() {
            return Err(Error::arg(format!(
                "state {state} out of range 0..{}",
                self.states()
            )));
        }
        Ok(())
    }

    /// Validates that `policy` has the right shape for this game.
    pub fn check_policy(&self, policy: &JointPolicy) -> Result<()> {
        if policy.len() != self.n_senders {
            return Err(Error::arg(format!(
                "joint policy has {} senders, game has {}",
                policy.len(),
                self.n_senders
            )));
        }
        for (j, p) in policy.iter().enumerate() {
            if p.states() != self.states() || p.signals() != self.signals {
                return Err(Error::arg(format!(
                    "policy of sender {j} is {}x{}, expected {}x{}",
                    p.states(),
                    p.signals(),
                    self.states(),
                    self.signals
                )));
            }
        }
        Ok(())
    }
}

/// One sender's row-stochastic signaling matrix `π_j(s|ω)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalingPolicy(Matrix);

impl SignalingPolicy {
    pub fn new(matrix: Matrix) -> Result<Self> {
        for r in 0..matrix.rows() {
            let row = matrix.row(r);
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(Error::arg(format!(
                    "policy row {r} has entries outside [0,1]"
                )));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > ROW_TOLERANCE {
                return Err(Error::arg(format!("policy row {r} sums to {total}")));
            }
        }
        Ok(SignalingPolicy(matrix))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        SignalingPolicy::new(Matrix::from_rows(rows)?)
    }

    /// Every state sends every signal with equal probability.
    pub fn uniform(states: usize, signals: usize) -> Self {
        SignalingPolicy(Matrix::filled(states, signals, 1.0 / signals as f64))
    }

    /// Deterministic policy sending `signal_of[ω]` at state `ω`.
    pub fn deterministic(signal_of: &[usize], signals: usize) -> Result<Self> {
        let mut m = Matrix::zeros(signal_of.len(), signals);
        for (w, &s) in signal_of.iter().enumerate() {
            if s >= signals {
                return Err(Error::arg(format!("signal {s} out of range 0..{signals}")));
            }
            m[(w, s)] = 1.0;
        }
        Ok(SignalingPolicy(m))
    }

    /// Rescales each row onto the simplex after clamping to `[0,1]`.
    pub fn from_unnormalized(mut matrix: Matrix) -> Result<Self> {
        for r in 0..matrix.rows() {
            let row = matrix.row_mut(r);
            for v in row.iter_mut() {
                *v = v.clamp(0.0, 1.0);
            }
            let total: f64 = row.iter().sum();
            if total <= 0.0 || !total.is_finite() {
                return Err(Error::Numerical(format!(
                    "row {r} has no mass to normalize"
                )));
            }
            row.iter_mut().for_each(|v| *v /= total);
        }
        Ok(SignalingPolicy(matrix))
    }

    pub fn states(&self) -> usize {
        self.0.rows()
    }

    pub fn signals(&self) -> usize {
        self.0.cols()
    }

    #[inline]
    pub fn prob(&self, state: usize, signal: usize) -> f64 {
        self.0[(state, signal)]
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    /// Returns the policy with signal columns reordered: new column `c` is
    /// old column `perm[c]`.
    pub fn permute_signals(&self, perm: &[usize]) -> Self {
        let mut m = Matrix::zeros(self.states(), self.signals());
        for w in 0..self.states() {
            for (c, &src) in perm.iter().enumerate() {
                m[(w, c)] = self.0[(w, src)];
            }
        }
        SignalingPolicy(m)
    }
}

/// One signaling policy per sender.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPolicy(Vec<SignalingPolicy>);

impl JointPolicy {
    pub fn new(policies: Vec<SignalingPolicy>) -> Self {
        JointPolicy(policies)
    }

    pub fn uniform(game: &GameInstance) -> Self {
        JointPolicy(
            (0..game.n_senders())
                .map(|_| SignalingPolicy::uniform(game.states(), game.signals()))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, SignalingPolicy> {
        self.0.iter()
    }

    pub fn sender(&self, j: usize) -> &SignalingPolicy {
        &self.0[j]
    }

    pub fn policies(&self) -> &[SignalingPolicy] {
        &self.0
    }

    /// Replaces sender `j`'s policy, as in a unilateral deviation.
    pub fn with_sender(&self, j: usize, policy: SignalingPolicy) -> Self {
        let mut out = self.0.clone();
        out[j] = policy;
        JointPolicy(out)
    }

    /// Concatenates all policies row-major, sender by sender.
    pub fn flatten(&self) -> Vec<f64> {
        self.0
            .iter()
            .flat_map(|p| p.matrix().as_slice().iter().copied())
            .collect()
    }

    pub fn max_abs_diff(&self, other: &JointPolicy) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.matrix().max_abs_diff(b.matrix()))
            .fold(0.0, f64::max)
    }
}

/// Explicit joint-signal → action table `α(s)`, indexed by joint index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedMap {
    pub table: Vec<usize>,
}

impl FixedMap {
    pub fn validate(&self, game: &GameInstance) -> Result<()> {
        let joint = game
            .joint_signal_count()
            .ok_or_else(|| Error::arg("joint signal space overflows"))?;
        if self.table.len() != joint {
            return Err(Error::arg(format!(
                "fixed interpretation covers {} joint signals, game has {joint}",
                self.table.len()
            )));
        }
        if let Some(&a) = self.table.iter().find(|&&a| a >= game.actions()) {
            return Err(Error::arg(format!(
                "fixed interpretation uses action {a} out of range"
            )));
        }
        Ok(())
    }

    pub fn action(&self, joint_index: usize) -> usize {
        self.table[joint_index]
    }
}

/// How the receiver picks among (near-)optimal actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TieRule {
    /// Lowest action index among maximizers.
    Lexicographic,
    /// Tied actions are scored by `Σ_j w_j·E_μ[u_j(ω,a)]`; remaining ties go
    /// to the action most likely to be ex-post optimal, then the lowest index.
    SenderFavoring { weights: Vec<f64> },
    /// Receiver follows a committed interpretation, ignoring posteriors.
    FixedMap(FixedMap),
}

impl TieRule {
    pub fn sender_favoring(n_senders: usize) -> Self {
        TieRule::SenderFavoring {
            weights: vec![1.0; n_senders],
        }
    }
}

/// Ordered scoring levels that define the receiver's choice: an action wins if
/// it is lexicographically maximal over the levels (each with
/// [`TIE_TOLERANCE`]), with the lowest index breaking exact ties. Level 0 is
/// always the receiver's own utility.
#[derive(Debug, Clone)]
pub(crate) struct ChoiceLevels {
    pub levels: Vec<Matrix>,
}

impl ChoiceLevels {
    pub fn new(game: &GameInstance, tie: &TieRule) -> Result<Self> {
        let mut levels = vec![game.receiver_utility().clone()];
        match tie {
            TieRule::Lexicographic => {}
            TieRule::SenderFavoring { weights } => {
                if weights.len() != game.n_senders() {
                    return Err(Error::arg(format!(
                        "sender-favoring weights have length {}, game has {} senders",
                        weights.len(),
                        game.n_senders()
                    )));
                }
                let mut score = Matrix::zeros(game.states(), game.actions());
                for (w, u) in weights.iter().zip(game.sender_utilities()) {
                    for (dst, src) in score.as_mut_slice().iter_mut().zip(u.as_slice()) {
                        *dst += w * src;
                    }
                }
                let mut ex_post = Matrix::zeros(game.states(), game.actions());
                for state in 0..game.states() {
                    for a in game.optimal_actions(state) {
                        ex_post[(state, a)] = 1.0;
                    }
                }
                levels.push(score);
                levels.push(ex_post);
            }
            TieRule::FixedMap(_) => return Err(Error::Contract(
                "a fixed interpretation bypasses posteriors; use the fixed-interpretation paths"
                    .into(),
            )),
        }
        Ok(ChoiceLevels { levels })
    }

    /// Picks the action for a normalized belief.
    pub fn choose(&self, belief: &[f64]) -> usize {
        let actions = self.levels[0].cols();
        let mut candidates: Vec<usize> = (0..actions).collect();
        let mut scores = vec![0.0; actions];
        for level in &self.levels {
            if candidates.len() == 1 {
                break;
            }
            let mut best = f64::NEG_INFINITY;
            for &a in &candidates {
                let v: f64 = belief
                    .iter()
                    .enumerate()
                    .map(|(w, &p)| p * level[(w, a)])
                    .sum();
                scores[a] = v;
                best = best.max(v);
            }
            candidates.retain(|&a| scores[a] >= best - TIE_TOLERANCE);
        }
        candidates[0]
    }
}

/// Bayes posterior induced by a joint signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    /// `μ_s(ω)`; all zeros when the signal has probability zero.
    pub belief: Vec<f64>,
    /// `𝛑(s) = Σ_ω μ0(ω)𝛑(s|ω)`.
    pub marginal: f64,
    pub zero_probability: bool,
}

impl Posterior {
    pub fn from_unnormalized(weights: Vec<f64>) -> Self {
        let marginal: f64 = weights.iter().sum();
        if marginal > 0.0 {
            let belief = weights.into_iter().map(|q| q / marginal).collect();
            Posterior {
                belief,
                marginal,
                zero_probability: false,
            }
        } else {
            Posterior {
                belief: vec![0.0; weights.len()],
                marginal: 0.0,
                zero_probability: true,
            }
        }
    }
}

/// Sender (and receiver) ex-ante utilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExAnte {
    pub senders: Vec<f64>,
    pub receiver: f64,
}

impl ExAnte {
    pub fn welfare(&self) -> f64 {
        self.senders.iter().sum()
    }
}

/// One simulated round of the game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Playthrough {
    pub state: usize,
    pub signal: Vec<usize>,
    pub action: usize,
    pub receiver_payoff: f64,
    pub sender_payoffs: Vec<f64>,
}

/// `𝛑(s|ω) = Π_j π_j(s_j|ω)`.
pub fn joint_signal_prob(
    game: &GameInstance,
    policy: &JointPolicy,
    state: usize,
    signal: &[usize],
) -> Result<f64> {
    game.check_policy(policy)?;
    game.check_state(state)?;
    game.encode_joint(signal)?;
    Ok(policy
        .iter()
        .zip(signal)
        .map(|(p, &s)| p.prob(state, s))
        .product())
}

fn unnormalized_posterior(game: &GameInstance, policy: &JointPolicy, signal: &[usize]) -> Vec<f64> {
    (0..game.states())
        .map(|w| {
            game.prior()[w]
                * policy
                    .iter()
                    .zip(signal)
                    .map(|(p, &s)| p.prob(w, s))
                    .product::<f64>()
        })
        .collect()
}

pub fn posterior(game: &GameInstance, policy: &JointPolicy, signal: &[usize]) -> Result<Posterior> {
    game.check_policy(policy)?;
    game.encode_joint(signal)?;
    Ok(Posterior::from_unnormalized(unnormalized_posterior(
        game, policy, signal,
    )))
}

pub fn receiver_best_action(
    game: &GameInstance,
    posterior: &Posterior,
    tie: &TieRule,
) -> Result<usize> {
    if posterior.belief.len() != game.states() {
        return Err(Error::arg(
            "posterior length does not match the state count",
        ));
    }
    if posterior.zero_probability {
        return Err(Error::arg(
            "posterior of a zero-probability signal has no best action",
        ));
    }
    Ok(ChoiceLevels::new(game, tie)?.choose(&posterior.belief))
}

/// Walks every joint signal with positive marginal, handing the callback the
/// joint index, the unnormalized posterior `μ0(ω)𝛑(s|ω)` and the marginal.
pub(crate) fn for_each_joint_signal(
    game: &GameInstance,
    policy: &JointPolicy,
    cap: u128,
    mut f: impl FnMut(usize, &[f64], f64),
) -> Result<()> {
    game.check_policy(policy)?;
    let joint = game.check_term_cap(cap)?;
    let n = game.n_senders();
    let states = game.states();
    let signals = game.signals();
    let mut digits = vec![0usize; n];
    // partial[k][ω] = μ0(ω) Π_{j<k} π_j(s_j|ω); partial[0] = prior
    let mut partial = vec![vec![0.0; states]; n + 1];
    partial[0].copy_from_slice(game.prior());
    let mut valid_prefix = 0;
    for index in 0..joint {
        for k in valid_prefix..n {
            let (head, tail) = partial.split_at_mut(k + 1);
            let p = policy.sender(k);
            for w in 0..states {
                tail[0][w] = head[k][w] * p.prob(w, digits[k]);
            }
        }
        let q = &partial[n];
        let marginal: f64 = q.iter().sum();
        if marginal > 0.0 {
            f(index, q, marginal);
        }
        // advance the odometer; digits from `k` on change
        let mut k = n;
        while k > 0 {
            k -= 1;
            digits[k] += 1;
            if digits[k] < signals {
                break;
            }
            digits[k] = 0;
        }
        valid_prefix = k;
    }
    Ok(())
}

fn accumulate(game: &GameInstance, q: &[f64], action: usize, out: &mut ExAnte) {
    for (w, &mass) in q.iter().enumerate() {
        if mass == 0.0 {
            continue;
        }
        for (j, u) in game.sender_utilities().iter().enumerate() {
            out.senders[j] += mass * u[(w, action)];
        }
        out.receiver += mass * game.receiver_utility()[(w, action)];
    }
}

/// Exact ex-ante utilities `ū_j(𝛑)` under a posterior-based tie rule.
pub fn ex_ante_utilities(
    game: &GameInstance,
    policy: &JointPolicy,
    tie: &TieRule,
) -> Result<ExAnte> {
    ex_ante_utilities_capped(game, policy, tie, DEFAULT_TERM_CAP)
}

pub fn ex_ante_utilities_capped(
    game: &GameInstance,
    policy: &JointPolicy,
    tie: &TieRule,
    cap: u128,
) -> Result<ExAnte> {
    let choice = ChoiceLevels::new(game, tie)?;
    let mut out = ExAnte {
        senders: vec![0.0; game.n_senders()],
        receiver: 0.0,
    };
    let mut belief = vec![0.0; game.states()];
    for_each_joint_signal(game, policy, cap, |_, q, marginal| {
        for (b, &m) in belief.iter_mut().zip(q) {
            *b = m / marginal;
        }
        let action = choice.choose(&belief);
        accumulate(game, q, action, &mut out);
    })?;
    Ok(out)
}

/// Ex-ante utilities when the receiver follows a fixed interpretation `α`.
pub fn ex_ante_utilities_fixed_interpretation(
    game: &GameInstance,
    policy: &JointPolicy,
    interp: &FixedMap,
) -> Result<ExAnte> {
    interp.validate(game)?;
    let mut out = ExAnte {
        senders: vec![0.0; game.n_senders()],
        receiver: 0.0,
    };
    for_each_joint_signal(game, policy, DEFAULT_TERM_CAP, |index, q, _| {
        accumulate(game, q, interp.action(index), &mut out);
    })?;
    Ok(out)
}

/// Dispatches on the tie rule: fixed interpretations go through `α`.
pub fn ex_ante_utilities_any(
    game: &GameInstance,
    policy: &JointPolicy,
    tie: &TieRule,
) -> Result<ExAnte> {
    match tie {
        TieRule::FixedMap(map) => ex_ante_utilities_fixed_interpretation(game, policy, map),
        _ => ex_ante_utilities(game, policy, tie),
    }
}

fn sample_index(rng: &mut impl Rng, probs: impl IntoIterator<Item = f64>) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in probs.into_iter().enumerate() {
        if p > 0.0 {
            last = i;
        }
        acc += p;
        if u < acc {
            return i;
        }
    }
    last
}

/// Draws one playthrough using the supplied RNG.
pub fn sample_playthrough_with(
    game: &GameInstance,
    policy: &JointPolicy,
    tie: &TieRule,
    rng: &mut impl Rng,
) -> Result<Playthrough> {
    game.check_policy(policy)?;
    let state = sample_index(rng, game.prior().iter().copied());
    let signal: Vec<usize> = policy
        .iter()
        .map(|p| sample_index(rng, (0..game.signals()).map(|s| p.prob(state, s))))
        .collect();
    let action = match tie {
        TieRule::FixedMap(map) => {
            map.validate(game)?;
            map.action(game.encode_joint(&signal)?)
        }
        _ => {
            let post = Posterior::from_unnormalized(unnormalized_posterior(game, policy, &signal));
            receiver_best_action(game, &post, tie)?
        }
    };
    Ok(Playthrough {
        state,
        action,
        receiver_payoff: game.receiver_utility()[(state, action)],
        sender_payoffs: game
            .sender_utilities()
            .iter()
            .map(|u| u[(state, action)])
            .collect(),
        signal,
    })
}

/// Draws one playthrough deterministically from `seed`.
pub fn sample_playthrough(
    game: &GameInstance,
    policy: &JointPolicy,
    tie: &TieRule,
    seed: u64,
) -> Result<Playthrough> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_playthrough_with(game, policy, tie, &mut rng)
}
