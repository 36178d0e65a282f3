//! Instance builders for two hardness constructions: public persuasion with
//! many receivers embedded as a two-sender best-response problem, and 0/1
//! bimatrix games embedded as persuasion games with a fixed interpretation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{FixedMap, GameInstance, SignalingPolicy, TieRule};
use crate::matrix::Matrix;

const PUBLIC_TIE_TOL: f64 = 1e-12;

/// One sender signaling publicly to `k` receivers with binary actions `±`.
/// Matrices are `|Ω|×k`, column `j` belonging to receiver `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublicPersuasionInstance {
    pub prior: Vec<f64>,
    /// `v_j(ω) = v_j(ω,+) − v_j(ω,−) ∈ [−1, 1]`.
    pub gap: Matrix,
    /// Sender utility `u_j(ω,+) ∈ [0,1]`.
    pub sender_plus: Matrix,
    /// Sender utility `u_j(ω,−) ∈ [0,1]`.
    pub sender_minus: Matrix,
}

impl PublicPersuasionInstance {
    pub fn new(
        prior: Vec<f64>,
        gap: Matrix,
        sender_plus: Matrix,
        sender_minus: Matrix,
    ) -> Result<Self> {
        let inst = PublicPersuasionInstance {
            prior,
            gap,
            sender_plus,
            sender_minus,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn receivers(&self) -> usize {
        self.gap.cols()
    }

    pub fn states(&self) -> usize {
        self.prior.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (n, k) = (self.states(), self.receivers());
        if n == 0 || k == 0 {
            return Err(Error::arg("public persuasion needs states and receivers"));
        }
        if self.prior.iter().any(|&p| !(p >= 0.0))
            || (self.prior.iter().sum::<f64>() - 1.0).abs() > 1e-12
        {
            return Err(Error::arg("public persuasion prior must be a distribution"));
        }
        for (name, m, lo) in [
            ("gap", &self.gap, -1.0),
            ("sender_plus", &self.sender_plus, 0.0),
            ("sender_minus", &self.sender_minus, 0.0),
        ] {
            if m.rows() != n || m.cols() != k {
                return Err(Error::arg(format!("{name} must be {n}x{k}")));
            }
            if m.as_slice().iter().any(|&v| !(lo..=1.0).contains(&v)) {
                return Err(Error::arg(format!("{name} entries must lie in [{lo}, 1]")));
            }
        }
        Ok(())
    }
}

/// Constants `C`, `N`, `M` of the best-response construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReductionParams {
    pub c: f64,
    pub n: f64,
    pub m: f64,
}

impl ReductionParams {
    /// `C = k⁵`, `N = k⁴`, `M = N/(N−1)`. For `k = 1`, `N` is raised to 2 so
    /// that `N > 1` holds.
    pub fn for_size(k: usize) -> Self {
        let k = k as f64;
        let n = k.powi(4).max(2.0);
        ReductionParams {
            c: k.powi(5),
            n,
            m: n / (n - 1.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) || !(self.n > 1.0) {
            return Err(Error::arg("reduction needs C > 0 and N > 1"));
        }
        if self.m < self.n / (self.n - 1.0) {
            return Err(Error::arg(format!(
                "reduction needs M ≥ N/(N−1) = {}",
                self.n / (self.n - 1.0)
            )));
        }
        Ok(())
    }
}

/// Column of action `a_{j+}` in the enlarged game (0-based `j`).
pub fn plus_action(j: usize) -> usize {
    2 * j
}

/// Column of action `a_{j−}`.
pub fn minus_action(j: usize) -> usize {
    2 * j + 1
}

/// Column of `a_∞`.
pub fn infinity_action(k: usize) -> usize {
    2 * k
}

/// Row of the extra state `ω̄_j` in the enlarged game.
pub fn extra_state(pub_: &PublicPersuasionInstance, j: usize) -> usize {
    pub_.states() + j
}

/// Builds the two-sender game whose sender-1 best response against the
/// returned sender-2 policy encodes the public persuasion instance. Both
/// senders get `k` signals; sender 2's utilities are zero.
pub fn public_to_best_response(
    pub_: &PublicPersuasionInstance,
    params: &ReductionParams,
) -> Result<(GameInstance, SignalingPolicy)> {
    pub_.validate()?;
    params.validate()?;
    let k = pub_.receivers();
    let base = pub_.states();
    let states = base + k;
    let actions = 2 * k + 1;
    let inf = infinity_action(k);

    let mut prior: Vec<f64> = pub_.prior.iter().map(|p| p / 2.0).collect();
    prior.extend(std::iter::repeat_n(1.0 / (2.0 * k as f64), k));

    let mut v = Matrix::zeros(states, actions);
    let mut u1 = Matrix::zeros(states, actions);
    for ω in 0..base {
        for j in 0..k {
            v[(ω, plus_action(j))] = pub_.gap[(ω, j)];
            u1[(ω, plus_action(j))] = pub_.sender_plus[(ω, j)];
            u1[(ω, minus_action(j))] = pub_.sender_minus[(ω, j)];
        }
        v[(ω, inf)] = params.n;
        u1[(ω, inf)] = -params.c;
    }
    for j in 0..k {
        let row = base + j;
        for l in 0..k {
            if l != j {
                v[(row, plus_action(l))] = -params.m;
                v[(row, minus_action(l))] = -params.m;
            }
        }
        v[(row, inf)] = -params.n;
        u1[(row, inf)] = -params.c;
    }

    let mut pi2 = Matrix::zeros(states, k);
    for ω in 0..base {
        pi2.row_mut(ω).fill(1.0 / k as f64);
    }
    for j in 0..k {
        pi2[(base + j, j)] = 1.0;
    }
    let game = GameInstance::new(prior, k, v, vec![u1, Matrix::zeros(states, actions)])?;
    Ok((game, SignalingPolicy::new(pi2)?))
}

/// Closed forms for the receiver's (unnormalized) expected utility of each
/// action given belief `x` over the enlarged states and sender 2's signal
/// `t_j`. Action `a_{ℓ−}` for `ℓ ≠ j` is worth `−M·x(ω̄_j)`, since state `ω̄_j`
/// penalizes every action outside `a_{j±}`.
pub fn receiver_value_closed_form(
    pub_: &PublicPersuasionInstance,
    params: &ReductionParams,
    x: &[f64],
    j: usize,
    action: usize,
) -> f64 {
    let k = pub_.receivers();
    let kf = k as f64;
    let base = pub_.states();
    let x_bar = x[base + j];
    let weighted = |l: usize| (0..base).map(|ω| x[ω] * pub_.gap[(ω, l)]).sum::<f64>() / kf;
    if action == infinity_action(k) {
        return params.n * (x[..base].iter().sum::<f64>() / kf - x_bar);
    }
    let l = action / 2;
    let plus = action.is_multiple_of(2);
    match (l == j, plus) {
        (true, true) => weighted(j),
        (true, false) => 0.0,
        (false, true) => weighted(l) - x_bar * params.m,
        (false, false) => -x_bar * params.m,
    }
}

/// `Σ_ω x(ω) π₂(t_j|ω) v(ω, a)` evaluated directly on a built game.
pub fn receiver_value_direct(
    game: &GameInstance,
    pi2: &SignalingPolicy,
    x: &[f64],
    j: usize,
    action: usize,
) -> f64 {
    (0..game.states())
        .map(|ω| x[ω] * pi2.prob(ω, j) * game.receiver_utility()[(ω, action)])
        .sum()
}

/// Sender's utility in the public persuasion problem under `scheme`
/// (`|Ω|×|S'|`, any number of signals). Receivers take `+` on ties.
pub fn pub_sender_utility(
    pub_: &PublicPersuasionInstance,
    scheme: &SignalingPolicy,
) -> Result<f64> {
    pub_.validate()?;
    if scheme.states() != pub_.states() {
        return Err(Error::arg(
            "scheme rows must match the public instance's states",
        ));
    }
    let k = pub_.receivers();
    let mut total = 0.0;
    for s in 0..scheme.signals() {
        let joint: Vec<f64> = (0..pub_.states())
            .map(|ω| pub_.prior[ω] * scheme.prob(ω, s))
            .collect();
        let marginal: f64 = joint.iter().sum();
        if marginal <= 0.0 {
            continue;
        }
        for j in 0..k {
            let score: f64 = joint
                .iter()
                .enumerate()
                .map(|(ω, q)| q * pub_.gap[(ω, j)])
                .sum::<f64>()
                / marginal;
            let pay = if score >= -PUBLIC_TIE_TOL {
                &pub_.sender_plus
            } else {
                &pub_.sender_minus
            };
            total += joint
                .iter()
                .enumerate()
                .map(|(ω, q)| q * pay[(ω, j)])
                .sum::<f64>();
        }
    }
    Ok(total / k as f64)
}

/// Two-player game with 0/1 payoffs; `u1[(s1, s2)]` is player 1's payoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BimatrixGame {
    pub u1: Matrix,
    pub u2: Matrix,
}

impl BimatrixGame {
    pub fn new(u1: Matrix, u2: Matrix) -> Result<Self> {
        let g = BimatrixGame { u1, u2 };
        g.validate()?;
        Ok(g)
    }

    pub fn size(&self) -> usize {
        self.u1.rows()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.u1.rows();
        for (name, u) in [("u1", &self.u1), ("u2", &self.u2)] {
            if u.rows() != m || u.cols() != m || m == 0 {
                return Err(Error::arg(format!(
                    "{name} must be a nonempty {m}x{m} matrix"
                )));
            }
            if u.as_slice().iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::arg(format!("{name} must have 0/1 entries")));
            }
        }
        Ok(())
    }

    /// Expected payoff of player `i` (0 or 1) under mixed strategies.
    pub fn expected(&self, i: usize, x1: &[f64], x2: &[f64]) -> f64 {
        let u = if i == 0 { &self.u1 } else { &self.u2 };
        let mut total = 0.0;
        for (a, p) in x1.iter().enumerate() {
            for (b, q) in x2.iter().enumerate() {
                total += p * q * u[(a, b)];
            }
        }
        total
    }
}

/// Receiver action `a_{xy}` for payoffs `(û₁, û₂) = (x, y)`.
pub fn bimatrix_action(u1: f64, u2: f64) -> usize {
    2 * (u1 as usize) + u2 as usize
}

/// Embeds a 0/1 bimatrix game: two equally likely states, four receiver
/// actions `[a00, a01, a10, a11]`, indifferent receiver, and an interpretation
/// that plays `a_{û₁(s)û₂(s)}` at joint signal `s`. Sender `i` is paid `û_i`
/// encoded in the action at state 1 and nothing at state 0.
pub fn bimatrix_to_persuasion(bg: &BimatrixGame) -> Result<(GameInstance, TieRule)> {
    bg.validate()?;
    let m = bg.size();
    let mut table = Vec::with_capacity(m * m);
    let mut used = [false; 4];
    for s1 in 0..m {
        for s2 in 0..m {
            let a = bimatrix_action(bg.u1[(s1, s2)], bg.u2[(s1, s2)]);
            used[a] = true;
            table.push(a);
        }
    }
    let mut u1 = Matrix::zeros(2, 4);
    let mut u2 = Matrix::zeros(2, 4);
    for a in 0..4 {
        if used[a] {
            u1[(1, a)] = (a / 2) as f64;
            u2[(1, a)] = (a % 2) as f64;
        }
    }
    let game = GameInstance::new(vec![0.5, 0.5], m, Matrix::zeros(2, 4), vec![u1, u2])?;
    Ok((game, TieRule::FixedMap(FixedMap { table })))
}
