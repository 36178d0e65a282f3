//! Exact best responses, Nash verification, the full-revelation equilibrium
//! and sampled ε-local equilibrium checks.
//!
//! # Best response
//!
//! Fix the other senders' policies. For each joint signal `s_{-i}` of the
//! others, sender `i`'s column `c = π_i(s_i|·)` induces the unnormalized
//! posterior `w_{s_{-i}} ⊙ c`, where `w_{s_{-i}}(ω) = μ0(ω)𝛑_{-i}(s_{-i}|ω)`.
//! A *type* assigns one receiver action to every `s_{-i}`. The set of
//! columns realizing a type under the receiver's tie rule is a convex cone
//! described by homogeneous linear constraints, and columns only interact
//! through the row sums `Σ_s π_i(s|ω) = 1`. Two columns of the same type can be
//! merged, so a best response uses at most `|S|` distinct types; each choice of
//! types is a linear program over the cones' closures.
//!
//! Reported utilities are suprema: the receiver's tie rule can make the
//! optimum unattainable (e.g. when a tie is resolved against the sender), in
//! which case nearby policies get arbitrarily close. A realized witness near
//! the optimum is evaluated exactly and returned alongside.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{
    ex_ante_utilities, ex_ante_utilities_any, ex_ante_utilities_fixed_interpretation, ChoiceLevels,
    ExAnte, FixedMap, GameInstance, JointPolicy, SignalingPolicy, TieRule,
};
use crate::lp::{solve_lp, LinearProgram, LpStatus, MAX_ROWS, MAX_VARIABLES};
use crate::matrix::Matrix;
use crate::rng;

/// Cap on action maps (type combinations) explored by the exact best response.
pub const DEFAULT_MAP_CAP: u128 = 1_000_000;
/// Default tolerance for exact Nash verdicts.
pub const DEFAULT_NASH_TOL: f64 = 1e-7;
/// Improvement threshold for sampled local checks.
pub const LOCAL_IMPROVEMENT_TOL: f64 = 1e-9;

const FORM_EPS: f64 = 1e-9;
const ZERO_FORM: f64 = 1e-14;

/// Joint-signal → action table of a best response.
pub type ActionMap = FixedMap;

#[derive(Debug, Clone, PartialEq)]
pub struct BestResponseResult {
    /// Optimal policy of the closure program.
    pub policy: SignalingPolicy,
    /// Supremum of the sender's ex-ante utility over deviations.
    pub utility: f64,
    pub action_map: ActionMap,
    /// Number of feasible action maps whose program was solved.
    pub maps_explored: u64,
    /// A policy near `policy` whose exact utility is `realized_utility`.
    pub realized_policy: SignalingPolicy,
    pub realized_utility: f64,
}

/// Outcome of a best response against a fixed interpretation.
#[derive(Debug, Clone, PartialEq)]
pub enum FixedResponse {
    Optimal(BestResponseResult),
    /// No policy of the sender makes the interpretation incentive compatible.
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Exact,
    EpsilonLocal,
    Refuted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub sender: usize,
    pub policy: Matrix,
    /// Exact utility gain of `policy` over the incumbent.
    pub improvement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub verdict: Verdict,
    pub utilities: Vec<f64>,
    /// Largest improvement found (a supremum for exact checks).
    pub max_improvement: f64,
    pub witness: Option<Deviation>,
    /// Deviations sampled per sender; 0 for exact checks.
    pub samples: usize,
    /// Radius of the sampled neighborhood; `None` for exact checks.
    pub eps: Option<f64>,
}

impl EquilibriumReport {
    pub fn welfare(&self) -> f64 {
        self.utilities.iter().sum()
    }
}

/// Distance-2 code and codeword assignment behind the full-revelation profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevelationCertificate {
    /// All codewords `{s : Σ_j s_j ≡ 0 mod |S|}` in joint-index order.
    pub codewords: Vec<Vec<usize>>,
    /// `(codeword index, action)` for every receiver-optimal action used.
    pub assignment: Vec<(usize, usize)>,
    /// Unique receiver-optimal action per state.
    pub state_action: Vec<usize>,
    /// Whether `|S|^(n-1) ≥ min(|Ω|, |A|)` also holds. The construction only
    /// needs `|S|^(n-1) ≥` the number of distinct optimal actions.
    pub strict_capacity_met: bool,
}

impl RevelationCertificate {
    /// An interpretation consistent with the profile: codewords map to their
    /// assigned action and every other joint signal to the first used action.
    pub fn interpretation(&self, game: &GameInstance) -> Result<FixedMap> {
        let joint = game
            .joint_signal_count()
            .ok_or_else(|| Error::arg("joint signal space overflows"))?;
        let mut table = vec![self.assignment[0].1; joint];
        for &(k, a) in &self.assignment {
            table[game.encode_joint(&self.codewords[k])?] = a;
        }
        Ok(FixedMap { table })
    }
}

fn others_count(game: &GameInstance) -> Result<usize> {
    (1..game.n_senders())
        .try_fold(1usize, |acc, _| acc.checked_mul(game.signals()))
        .ok_or_else(|| Error::size("joint signals of other senders", u128::MAX, DEFAULT_MAP_CAP))
}

/// Sender `i`'s view of the others: weights `w_{s_{-i}}` and joint indices.
struct Response<'a> {
    game: &'a GameInstance,
    sender: usize,
    /// `w[s][ω] = μ0(ω)Π_{j≠i}π_j(s_j|ω)` for each joint signal `s` of the others.
    weights: Vec<Vec<f64>>,
    /// `joint[s_i][s]` = joint index of `(s_i, s_{-i} = s)`.
    joint: Vec<Vec<usize>>,
}

impl<'a> Response<'a> {
    fn new(game: &'a GameInstance, sender: usize, others: &JointPolicy) -> Result<Self> {
        if sender >= game.n_senders() {
            return Err(Error::arg(format!(
                "sender {sender} out of range 0..{}",
                game.n_senders()
            )));
        }
        game.check_policy(others)?;
        game.check_term_cap(crate::game::DEFAULT_TERM_CAP)?;
        let n = game.n_senders();
        let m = others_count(game)?;
        let states = game.states();
        let mut weights = Vec::with_capacity(m);
        let mut joint = vec![Vec::with_capacity(m); game.signals()];
        let mut digits = vec![0usize; n];
        for s in 0..m {
            // decode s over senders j ≠ i, most significant first
            let mut rest = s;
            for j in (0..n).rev() {
                if j == sender {
                    continue;
                }
                digits[j] = rest % game.signals();
                rest /= game.signals();
            }
            let w: Vec<f64> = (0..states)
                .map(|ω| {
                    let mut p = game.prior()[ω];
                    for (j, &d) in digits.iter().enumerate() {
                        if j != sender {
                            p *= others.sender(j).prob(ω, d);
                        }
                    }
                    p
                })
                .collect();
            weights.push(w);
            for (si, slot) in joint.iter_mut().enumerate() {
                digits[sender] = si;
                slot.push(game.encode_joint(&digits)?);
            }
        }
        Ok(Response {
            game,
            sender,
            weights,
            joint,
        })
    }

    fn reachable(&self, s: usize) -> bool {
        self.weights[s].iter().any(|&w| w > 0.0)
    }

    /// Actions weakly receiver-optimal at some belief supported on the
    /// states reachable under `s_{-i}`.
    fn candidates(&self, s: usize) -> Result<Vec<usize>> {
        let support: Vec<usize> = (0..self.game.states())
            .filter(|&ω| self.weights[s][ω] > 0.0)
            .collect();
        if support.is_empty() {
            return Ok(vec![0]);
        }
        let v = self.game.receiver_utility();
        let actions = self.game.actions();
        let mut out = Vec::new();
        for a in 0..actions {
            let mut lp = LinearProgram::new(support.len());
            lp.add_eq(vec![1.0; support.len()], 1.0);
            for b in 0..actions {
                if b != a {
                    let row: Vec<f64> = support.iter().map(|&ω| v[(ω, a)] - v[(ω, b)]).collect();
                    if row.iter().any(|&x| x != 0.0) {
                        lp.add_ge(row, 0.0);
                    }
                }
            }
            if solve_lp(&lp)?.is_optimal() {
                out.push(a);
            }
        }
        if out.is_empty() {
            return Err(Error::Internal(
                "no receiver-optimal action at a reachable belief".into(),
            ));
        }
        Ok(out)
    }

    fn gain(&self, actions: &[usize]) -> Vec<f64> {
        let u = self.game.sender_utility(self.sender);
        (0..self.game.states())
            .map(|ω| {
                actions
                    .iter()
                    .enumerate()
                    .map(|(s, &a)| self.weights[s][ω] * u[(ω, a)])
                    .sum()
            })
            .collect()
    }
}

/// `w / max(w)`, so the zero threshold on forms is relative to the signal's
/// own probability. Priors can be far below it.
fn unit_scaled(w: &[f64]) -> Vec<f64> {
    let top = w.iter().fold(0.0, |m: f64, &v| m.max(v));
    if top > 0.0 {
        w.iter().map(|v| v / top).collect()
    } else {
        w.to_vec()
    }
}

fn normalized(mut row: Vec<f64>) -> Option<Vec<f64>> {
    let scale = row.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if scale <= ZERO_FORM {
        return None;
    }
    row.iter_mut().for_each(|v| *v /= scale);
    Some(row)
}

/// Closure of the cone of columns realizing one type.
#[derive(Debug, Clone)]
struct TypeRegion {
    actions: Vec<usize>,
    ge_rows: Vec<Vec<f64>>,
    eq_rows: Vec<Vec<f64>>,
    gain: Vec<f64>,
}

struct Pair {
    /// Nonzero normalized forms, one per tie level that distinguishes the pair.
    forms: Vec<Vec<f64>>,
    /// Whether the preferred action also wins the final index comparison.
    wins_by_index: bool,
    marginal: Vec<f64>,
    level: usize,
}

fn analyze_type(
    resp: &Response,
    levels: &ChoiceLevels,
    actions: Vec<usize>,
) -> Result<Option<TypeRegion>> {
    let states = resp.game.states();
    let mut pairs = Vec::new();
    for (s, &a) in actions.iter().enumerate() {
        if !resp.reachable(s) {
            continue;
        }
        let w = unit_scaled(&resp.weights[s]);
        for b in 0..resp.game.actions() {
            if b == a {
                continue;
            }
            let forms = levels
                .levels
                .iter()
                .filter_map(|l| {
                    normalized(
                        (0..states)
                            .map(|ω| w[ω] * (l[(ω, a)] - l[(ω, b)]))
                            .collect(),
                    )
                })
                .collect();
            pairs.push(Pair {
                forms,
                wins_by_index: a < b,
                marginal: w.clone(),
                level: 0,
            });
        }
    }

    loop {
        let mut eq_rows: Vec<Vec<f64>> = Vec::new();
        let mut active: Vec<usize> = Vec::new();
        for (k, p) in pairs.iter().enumerate() {
            eq_rows.extend(p.forms[..p.level.min(p.forms.len())].iter().cloned());
            if p.level < p.forms.len() {
                active.push(k);
            } else if !p.wins_by_index {
                eq_rows.push(p.marginal.clone());
            }
        }
        // max τ s.t. every active form ≥ τ on the normalized cone
        let mut lp = LinearProgram::new(states + 1);
        lp.objective[states] = 1.0;
        let mut simplex = vec![1.0; states + 1];
        simplex[states] = 0.0;
        lp.add_eq(simplex.clone(), 1.0);
        let mut tau_cap = vec![0.0; states + 1];
        tau_cap[states] = 1.0;
        lp.add_le(tau_cap, 1.0);
        for row in &eq_rows {
            let mut r = row.clone();
            r.push(0.0);
            lp.add_eq(r, 0.0);
        }
        for &k in &active {
            let mut r: Vec<f64> = pairs[k].forms[pairs[k].level].iter().map(|v| -v).collect();
            r.push(1.0);
            lp.add_le(r, 0.0);
        }
        let strict = solve_lp(&lp)?;
        if strict.status == LpStatus::Infeasible {
            return Ok(None);
        }
        let weak_ge: Vec<Vec<f64>> = active
            .iter()
            .map(|&k| pairs[k].forms[pairs[k].level].clone())
            .collect();
        if strict.value > FORM_EPS || active.is_empty() {
            return Ok(Some(TypeRegion {
                gain: resp.gain(&actions),
                actions,
                ge_rows: weak_ge,
                eq_rows,
            }));
        }
        // some active form vanishes on the whole weak region: move it a level down
        let mut advanced = false;
        for &k in &active {
            let mut lp = LinearProgram::maximize(pairs[k].forms[pairs[k].level].clone());
            lp.add_eq(vec![1.0; states], 1.0);
            for row in &eq_rows {
                lp.add_eq(row.clone(), 0.0);
            }
            for row in &weak_ge {
                lp.add_ge(row.clone(), 0.0);
            }
            let r = solve_lp(&lp)?;
            if r.is_optimal() && r.value <= FORM_EPS {
                pairs[k].level += 1;
                advanced = true;
            }
        }
        if !advanced {
            return Ok(Some(TypeRegion {
                gain: resp.gain(&actions),
                actions,
                ge_rows: weak_ge,
                eq_rows,
            }));
        }
    }
}

/// Program over a set of types: one nonnegative column per type, columns sum
/// to the all-ones vector, each column in its type's closed cone.
fn subset_program(regions: &[&TypeRegion], states: usize) -> LinearProgram {
    let nvars = regions.len() * states;
    let mut lp = LinearProgram::maximize(
        regions
            .iter()
            .flat_map(|r| r.gain.iter().copied())
            .collect(),
    );
    for ω in 0..states {
        let mut row = vec![0.0; nvars];
        for t in 0..regions.len() {
            row[t * states + ω] = 1.0;
        }
        lp.add_eq(row, 1.0);
    }
    for (t, region) in regions.iter().enumerate() {
        let embed = |src: &[f64]| {
            let mut row = vec![0.0; nvars];
            row[t * states..(t + 1) * states].copy_from_slice(src);
            row
        };
        for row in &region.eq_rows {
            lp.add_eq(embed(row), 0.0);
        }
        for row in &region.ge_rows {
            lp.add_ge(embed(row), 0.0);
        }
    }
    lp
}

fn program_fits(regions: &[&TypeRegion], states: usize) -> bool {
    let rows: usize = states
        + regions
            .iter()
            .map(|r| r.eq_rows.len() + r.ge_rows.len())
            .sum::<usize>();
    regions.len() * states <= MAX_VARIABLES && rows <= MAX_ROWS
}

fn binomial_sum(n: u128, kmax: u128) -> u128 {
    let mut total: u128 = 0;
    let mut c: u128 = 1;
    for k in 1..=kmax.min(n) {
        c = c.saturating_mul(n + 1 - k) / k;
        total = total.saturating_add(c);
    }
    total
}

/// Next k-subset of `0..n` in lexicographic order.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn columns_to_policy(
    columns: &[Vec<f64>],
    states: usize,
    signals: usize,
) -> Result<SignalingPolicy> {
    let mut m = Matrix::zeros(states, signals);
    for (s, col) in columns.iter().enumerate() {
        for ω in 0..states {
            m[(ω, s)] = col[ω].max(0.0);
        }
    }
    for ω in 0..states {
        if m.row(ω).iter().sum::<f64>() <= 0.0 {
            m[(ω, 0)] = 1.0;
        }
    }
    SignalingPolicy::from_unnormalized(m)
}

/// Exact best response of sender `i` to the others' policies in `others`
/// (sender `i`'s own entry is ignored), under the game's tie rule.
pub fn best_response_exact(
    game: &GameInstance,
    i: usize,
    others: &JointPolicy,
    tie: &TieRule,
) -> Result<BestResponseResult> {
    best_response_exact_capped(game, i, others, tie, DEFAULT_MAP_CAP)
}

pub fn best_response_exact_capped(
    game: &GameInstance,
    i: usize,
    others: &JointPolicy,
    tie: &TieRule,
    cap: u128,
) -> Result<BestResponseResult> {
    let levels = ChoiceLevels::new(game, tie)?;
    let resp = Response::new(game, i, others)?;
    let states = game.states();
    let m = resp.weights.len();

    let candidates: Vec<Vec<usize>> = (0..m).map(|s| resp.candidates(s)).collect::<Result<_>>()?;
    let type_count = candidates
        .iter()
        .fold(1u128, |acc, c| acc.saturating_mul(c.len() as u128));
    if type_count > cap {
        return Err(Error::size("action maps", type_count, cap));
    }

    let mut regions = Vec::new();
    let mut digits = vec![0usize; m];
    loop {
        let actions: Vec<usize> = digits
            .iter()
            .enumerate()
            .map(|(s, &d)| candidates[s][d])
            .collect();
        if let Some(region) = analyze_type(&resp, &levels, actions)? {
            regions.push(region);
        }
        let mut k = m;
        let mut done = true;
        while k > 0 {
            k -= 1;
            digits[k] += 1;
            if digits[k] < candidates[k].len() {
                done = false;
                break;
            }
            digits[k] = 0;
        }
        if done {
            break;
        }
    }
    if regions.is_empty() {
        return Err(Error::Internal("no action map is realizable".into()));
    }

    let signals = game.signals();
    let kmax = signals.min(regions.len());
    let subsets = binomial_sum(regions.len() as u128, kmax as u128);
    if subsets > cap {
        return Err(Error::size("action maps", subsets, cap));
    }

    // Relaxation over all types: an upper bound, and exact when its optimum
    // happens to use at most |S| types.
    let all: Vec<&TypeRegion> = regions.iter().collect();
    let mut bound = f64::INFINITY;
    let mut best: Option<(f64, Vec<usize>, Vec<f64>)> = None;
    let mut explored: u64 = 0;
    if program_fits(&all, states) {
        let r = solve_lp(&subset_program(&all, states))?;
        if r.is_optimal() {
            bound = r.value;
            let used: Vec<usize> = (0..all.len())
                .filter(|&t| r.x[t * states..(t + 1) * states].iter().sum::<f64>() > 1e-12)
                .collect();
            if used.len() <= signals {
                explored = 1;
                let x = used
                    .iter()
                    .flat_map(|&t| r.x[t * states..(t + 1) * states].iter().copied())
                    .collect();
                best = Some((r.value, used, x));
            }
        }
    }

    if best.is_none() {
        'sizes: for k in 1..=kmax {
            let mut idx: Vec<usize> = (0..k).collect();
            loop {
                let chosen: Vec<&TypeRegion> = idx.iter().map(|&t| &regions[t]).collect();
                let r = solve_lp(&subset_program(&chosen, states))?;
                if r.is_optimal() {
                    explored += 1;
                    if best.as_ref().is_none_or(|b| r.value > b.0 + 1e-12) {
                        best = Some((r.value, idx.clone(), r.x));
                        if r.value >= bound - 1e-9 {
                            break 'sizes;
                        }
                    }
                }
                if !next_combination(&mut idx, regions.len()) {
                    break;
                }
            }
        }
    }
    let (value, used, x) =
        best.ok_or_else(|| Error::Internal("every action map program is infeasible".into()))?;

    let columns: Vec<Vec<f64>> = (0..used.len())
        .map(|t| x[t * states..(t + 1) * states].to_vec())
        .collect();
    let policy = columns_to_policy(&columns, states, signals)?;
    let joint = game.joint_signal_count().expect("checked by term cap");
    let mut table = vec![0; joint];
    for si in 0..signals {
        let region = &regions[used[si.min(used.len() - 1)]];
        for s in 0..m {
            table[resp.joint[si][s]] = region.actions[s];
        }
    }
    let action_map = FixedMap { table };
    let (realized_policy, realized_utility) = realize(game, i, others, tie, &policy)?;
    Ok(BestResponseResult {
        policy,
        utility: value,
        action_map,
        maps_explored: explored,
        realized_policy,
        realized_utility,
    })
}

/// Evaluates the closure optimum and small pulls toward the uniform policy,
/// returning the best exactly evaluated candidate.
fn realize(
    game: &GameInstance,
    i: usize,
    others: &JointPolicy,
    tie: &TieRule,
    policy: &SignalingPolicy,
) -> Result<(SignalingPolicy, f64)> {
    let evaluate = |p: &SignalingPolicy| -> Result<f64> {
        Ok(ex_ante_utilities(game, &others.with_sender(i, p.clone()), tie)?.senders[i])
    };
    let mut best = (policy.clone(), evaluate(policy)?);
    let states = game.states();
    let signals = game.signals();
    let used: Vec<usize> = (0..signals)
        .filter(|&s| (0..states).any(|ω| policy.prob(ω, s) > 0.0))
        .collect();
    for exp in 1..=7 {
        let theta = 10f64.powi(-exp);
        // spread θ of each row's mass evenly over the used signals
        let mut m = policy.matrix().clone();
        for ω in 0..states {
            for &s in &used {
                m[(ω, s)] = (1.0 - theta) * m[(ω, s)] + theta / used.len() as f64;
            }
        }
        let candidate = SignalingPolicy::from_unnormalized(m)?;
        let u = evaluate(&candidate)?;
        if u > best.1 {
            best = (candidate, u);
        }
    }
    Ok(best)
}

/// Best response when the receiver follows the committed interpretation
/// `interp`, subject to it being incentive compatible at every induced
/// posterior.
pub fn best_response_fixed_interpretation(
    game: &GameInstance,
    i: usize,
    others: &JointPolicy,
    interp: &FixedMap,
) -> Result<FixedResponse> {
    interp.validate(game)?;
    let resp = Response::new(game, i, others)?;
    let states = game.states();
    let signals = game.signals();
    let nvars = states * signals;
    if nvars > MAX_VARIABLES {
        return Err(Error::size(
            "LP variables |Ω|·|S|",
            nvars as u128,
            MAX_VARIABLES as u128,
        ));
    }
    let u = game.sender_utility(i);
    let v = game.receiver_utility();
    let var = |ω: usize, s: usize| ω * signals + s;
    let mut objective = vec![0.0; nvars];
    let mut ic_rows = Vec::new();
    for si in 0..signals {
        for (s, w) in resp.weights.iter().enumerate() {
            let a = interp.action(resp.joint[si][s]);
            for ω in 0..states {
                objective[var(ω, si)] += w[ω] * u[(ω, a)];
            }
            let w = unit_scaled(w);
            for b in 0..game.actions() {
                if b == a {
                    continue;
                }
                let mut row = vec![0.0; nvars];
                for ω in 0..states {
                    row[var(ω, si)] = w[ω] * (v[(ω, a)] - v[(ω, b)]);
                }
                if let Some(row) = normalized(row) {
                    ic_rows.push(row);
                }
            }
        }
    }
    let mut lp = LinearProgram::maximize(objective);
    for ω in 0..states {
        let mut row = vec![0.0; nvars];
        for s in 0..signals {
            row[var(ω, s)] = 1.0;
        }
        lp.add_eq(row, 1.0);
    }
    for row in ic_rows {
        lp.add_ge(row, 0.0);
    }
    let r = solve_lp(&lp)?;
    match r.status {
        LpStatus::Infeasible => Ok(FixedResponse::Infeasible),
        LpStatus::Unbounded => Err(Error::Internal("bounded program reported unbounded".into())),
        LpStatus::Optimal => {
            let policy =
                SignalingPolicy::from_unnormalized(Matrix::from_row_major(states, signals, r.x)?)?;
            let realized = ex_ante_utilities_fixed_interpretation(
                game,
                &others.with_sender(i, policy.clone()),
                interp,
            )?
            .senders[i];
            Ok(FixedResponse::Optimal(BestResponseResult {
                realized_policy: policy.clone(),
                realized_utility: realized,
                policy,
                utility: r.value,
                action_map: interp.clone(),
                maps_explored: 1,
            }))
        }
    }
}

/// Checks every sender's exact best response against the incumbent profile.
pub fn verify_nash(
    game: &GameInstance,
    policy: &JointPolicy,
    tie: &TieRule,
    tol: f64,
) -> Result<EquilibriumReport> {
    game.check_policy(policy)?;
    let incumbent = ex_ante_utilities_any(game, policy, tie)?;
    let mut max_improvement = f64::NEG_INFINITY;
    let mut witness: Option<Deviation> = None;
    for j in 0..game.n_senders() {
        let (sup, realized_policy, realized) = match tie {
            TieRule::FixedMap(map) => {
                match best_response_fixed_interpretation(game, j, policy, map)? {
                    FixedResponse::Optimal(br) => {
                        (br.utility, br.realized_policy, br.realized_utility)
                    }
                    FixedResponse::Infeasible => continue,
                }
            }
            _ => {
                let br = best_response_exact(game, j, policy, tie)?;
                (br.utility, br.realized_policy, br.realized_utility)
            }
        };
        let improvement = sup - incumbent.senders[j];
        if improvement > max_improvement {
            max_improvement = improvement;
            if improvement > tol {
                witness = Some(Deviation {
                    sender: j,
                    policy: realized_policy.into_matrix(),
                    improvement: realized - incumbent.senders[j],
                });
            }
        }
    }
    Ok(EquilibriumReport {
        verdict: if witness.is_some() {
            Verdict::Refuted
        } else {
            Verdict::Exact
        },
        utilities: incumbent.senders,
        max_improvement: max_improvement.max(0.0),
        witness,
        samples: 0,
        eps: None,
    })
}

/// Builds the full-revelation equilibrium: every state's receiver-optimal
/// action is announced through a codeword of a distance-2 code, so that any
/// `n-1` senders already determine it.
pub fn full_revelation_profile(
    game: &GameInstance,
) -> Result<(JointPolicy, RevelationCertificate)> {
    let n = game.n_senders();
    let signals = game.signals();
    let mut state_action = Vec::with_capacity(game.states());
    for ω in 0..game.states() {
        let opt = game.optimal_actions(ω);
        if opt.len() != 1 {
            return Err(Error::Precondition(format!(
                "state {ω} has {} receiver-optimal actions {:?}; a unique one is required",
                opt.len(),
                opt
            )));
        }
        state_action.push(opt[0]);
    }
    let mut used = state_action.clone();
    used.sort_unstable();
    used.dedup();

    let capacity = (1..n)
        .try_fold(1u128, |acc, _| acc.checked_mul(signals as u128))
        .unwrap_or(u128::MAX);
    if capacity < used.len() as u128 {
        return Err(Error::Precondition(format!(
            "|S|^(n-1) = {capacity} codewords cannot encode {} distinct optimal actions",
            used.len()
        )));
    }
    let strict_capacity_met = capacity >= game.states().min(game.actions()) as u128;

    game.check_term_cap(crate::game::DEFAULT_TERM_CAP)?;
    let mut codewords = Vec::new();
    let mut digits = vec![0usize; n];
    loop {
        if digits.iter().sum::<usize>() % signals == 0 {
            codewords.push(digits.clone());
        }
        let mut k = n;
        let mut done = true;
        while k > 0 {
            k -= 1;
            digits[k] += 1;
            if digits[k] < signals {
                done = false;
                break;
            }
            digits[k] = 0;
        }
        if done {
            break;
        }
    }
    let assignment: Vec<(usize, usize)> = used.iter().enumerate().map(|(k, &a)| (k, a)).collect();
    let codeword_of = |a: usize| {
        let k = used.binary_search(&a).expect("action is used");
        &codewords[k]
    };
    let policies = (0..n)
        .map(|j| {
            let signal_of: Vec<usize> = state_action.iter().map(|&a| codeword_of(a)[j]).collect();
            SignalingPolicy::deterministic(&signal_of, signals)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((
        JointPolicy::new(policies),
        RevelationCertificate {
            codewords,
            assignment,
            state_action,
            strict_capacity_met,
        },
    ))
}

/// Deviations sampled per sender: `min{10000, 1000(n-1)(|Ω|-1)(|S|-1)(|A|-1)}`.
pub fn local_sample_count(game: &GameInstance) -> usize {
    let k = 1000u128
        * (game.n_senders() as u128 - 1)
        * (game.states() as u128 - 1)
        * (game.signals() as u128 - 1)
        * (game.actions() as u128 - 1);
    k.min(10_000) as usize
}

/// Perturbs every entry uniformly within `±eps`, clamps to `[0,1]` and
/// renormalizes rows.
pub fn perturb_policy(
    policy: &SignalingPolicy,
    eps: f64,
    rng: &mut impl Rng,
) -> Result<SignalingPolicy> {
    let mut m = policy.matrix().clone();
    for v in m.as_mut_slice() {
        *v = (*v + rng.random_range(-eps..=eps)).clamp(0.0, 1.0);
    }
    for ω in 0..m.rows() {
        if m.row(ω).iter().sum::<f64>() <= 0.0 {
            // every entry clamped to zero: keep the original row
            m.row_mut(ω).copy_from_slice(policy.matrix().row(ω));
        }
    }
    SignalingPolicy::from_unnormalized(m)
}

/// Samples deviations in the `eps`-ball of each sender's policy and evaluates
/// them exactly. Stops at the first improving deviation.
pub fn local_ne_verify(
    game: &GameInstance,
    policy: &JointPolicy,
    tie: &TieRule,
    eps: f64,
    seed: u64,
) -> Result<EquilibriumReport> {
    local_ne_verify_with_samples(game, policy, tie, eps, seed, local_sample_count(game))
}

pub fn local_ne_verify_with_samples(
    game: &GameInstance,
    policy: &JointPolicy,
    tie: &TieRule,
    eps: f64,
    seed: u64,
    samples: usize,
) -> Result<EquilibriumReport> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::arg(format!(
            "neighborhood radius must be positive, got {eps}"
        )));
    }
    game.check_policy(policy)?;
    let incumbent: ExAnte = ex_ante_utilities_any(game, policy, tie)?;
    let mut max_improvement = f64::NEG_INFINITY;
    for j in 0..game.n_senders() {
        let mut r = rng::stream(seed, &format!("deviation:{j}"));
        for _ in 0..samples {
            let candidate = perturb_policy(policy.sender(j), eps, &mut r)?;
            let deviated = policy.with_sender(j, candidate.clone());
            let u = ex_ante_utilities_any(game, &deviated, tie)?.senders[j];
            let improvement = u - incumbent.senders[j];
            max_improvement = max_improvement.max(improvement);
            if improvement > LOCAL_IMPROVEMENT_TOL {
                return Ok(EquilibriumReport {
                    verdict: Verdict::Refuted,
                    utilities: incumbent.senders,
                    max_improvement: improvement,
                    witness: Some(Deviation {
                        sender: j,
                        policy: candidate.into_matrix(),
                        improvement,
                    }),
                    samples,
                    eps: Some(eps),
                });
            }
        }
    }
    Ok(EquilibriumReport {
        verdict: Verdict::EpsilonLocal,
        utilities: incumbent.senders,
        max_improvement: max_improvement.max(0.0),
        witness: None,
        samples,
        eps: Some(eps),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn binomial_sums() {
        assert_eq!(binomial_sum(16, 4), 16 + 120 + 560 + 1820);
        assert_eq!(binomial_sum(3, 5), 7);
    }

    #[test]
    fn combinations_in_order() {
        let mut idx = vec![0, 1];
        let mut seen = vec![idx.clone()];
        while next_combination(&mut idx, 4) {
            seen.push(idx.clone());
        }
        assert_eq!(
            seen,
            vec![
                vec![0, 1],
                vec![0, 2],
                vec![0, 3],
                vec![1, 2],
                vec![1, 3],
                vec![2, 3]
            ]
        );
    }

    #[test]
    fn reference_profile_is_exact_equilibrium() {
        let (game, policy) = fixtures::nonunique_equilibrium_game();
        let tie = TieRule::sender_favoring(2);
        let report = verify_nash(&game, &policy, &tie, DEFAULT_NASH_TOL).unwrap();
        assert_eq!(report.verdict, Verdict::Exact, "{report:?}");
        assert!((report.utilities[0] - 0.3).abs() < 1e-9);
        for j in 0..2 {
            let br = best_response_exact(&game, j, &policy, &tie).unwrap();
            assert!(
                (br.utility - 0.3).abs() < 1e-7,
                "sender {j}: {}",
                br.utility
            );
        }
    }

    #[test]
    fn reference_full_revelation() {
        let (game, _) = fixtures::nonunique_equilibrium_game();
        let tie = TieRule::sender_favoring(2);
        let (profile, cert) = full_revelation_profile(&game).unwrap();
        assert_eq!(cert.codewords.len(), 4);
        let u = ex_ante_utilities(&game, &profile, &tie).unwrap();
        assert!((u.senders[0] - 0.15).abs() < 1e-9);
        assert!((u.senders[1] - 0.15).abs() < 1e-9);
        let report = verify_nash(&game, &profile, &tie, DEFAULT_NASH_TOL).unwrap();
        assert_eq!(report.verdict, Verdict::Exact);
    }

    #[test]
    fn perturbed_reference_profile_is_refuted() {
        let (game, policy) = fixtures::nonunique_equilibrium_game();
        let tie = TieRule::sender_favoring(2);
        let mut m = policy.sender(0).matrix().clone();
        // state 0 moves 0.2 of its signal-1 mass to signal 2
        m[(0, 1)] = 0.8;
        m[(0, 2)] = 0.2;
        let p = policy.with_sender(0, SignalingPolicy::new(m).unwrap());
        let report = verify_nash(&game, &p, &tie, DEFAULT_NASH_TOL).unwrap();
        assert_eq!(report.verdict, Verdict::Refuted);
        let w = report.witness.unwrap();
        assert!(w.improvement > DEFAULT_NASH_TOL, "{w:?}");
    }

    #[test]
    fn constant_utility_best_response() {
        let base = fixtures::didactic_game();
        let game = GameInstance::new(
            base.prior().to_vec(),
            2,
            base.receiver_utility().clone(),
            vec![Matrix::filled(2, 2, 1.75), base.sender_utility(1).clone()],
        )
        .unwrap();
        let br = best_response_exact(
            &game,
            0,
            &JointPolicy::uniform(&game),
            &TieRule::Lexicographic,
        )
        .unwrap();
        assert!((br.utility - 1.75).abs() < 1e-12);
        assert!((br.realized_utility - 1.75).abs() < 1e-12);
    }

    #[test]
    fn action_map_reproduces_utility() {
        let (game, policy) = fixtures::nonunique_equilibrium_game();
        let tie = TieRule::sender_favoring(2);
        for j in 0..2 {
            let br = best_response_exact(&game, j, &policy, &tie).unwrap();
            let p = policy.with_sender(j, br.policy.clone());
            let u = ex_ante_utilities_fixed_interpretation(&game, &p, &br.action_map).unwrap();
            assert!((u.senders[j] - br.utility).abs() < 1e-9);
        }
    }

    #[test]
    fn fixed_interpretation_infeasible_when_demanding_dominated_action() {
        // the receiver is told to play 1 everywhere; with V = I that needs
        // every posterior to favor state 1, impossible under prior (0.7, 0.3)
        let game = GameInstance::new(
            vec![0.7, 0.3],
            2,
            Matrix::identity(2),
            vec![Matrix::zeros(2, 2)],
        )
        .unwrap();
        let r = best_response_fixed_interpretation(
            &game,
            0,
            &JointPolicy::uniform(&game),
            &FixedMap { table: vec![1, 1] },
        )
        .unwrap();
        assert_eq!(r, FixedResponse::Infeasible);
    }

    #[test]
    fn full_revelation_interpretation_gives_revelation_utility() {
        let game = GameInstance::new(
            vec![0.2, 0.3, 0.5],
            2,
            Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![2.0, 0.0]]).unwrap(),
            vec![
                Matrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 1.0], vec![0.0, 1.0]]).unwrap(),
                Matrix::from_rows(&[vec![1.0, 0.0], vec![0.5, 0.0], vec![0.0, 2.0]]).unwrap(),
            ],
        )
        .unwrap();
        let (profile, cert) = full_revelation_profile(&game).unwrap();
        let interp = cert.interpretation(&game).unwrap();
        let reveal = ex_ante_utilities(&game, &profile, &TieRule::Lexicographic).unwrap();
        for j in 0..2 {
            match best_response_fixed_interpretation(&game, j, &profile, &interp).unwrap() {
                FixedResponse::Optimal(br) => {
                    assert!((br.utility - reveal.senders[j]).abs() < 1e-9)
                }
                FixedResponse::Infeasible => panic!("revelation interpretation must be feasible"),
            }
        }
    }

    #[test]
    fn checksum_code_sizes() {
        let game = GameInstance::new(
            vec![1.0 / 3.0; 3],
            3,
            Matrix::identity(3),
            vec![Matrix::zeros(3, 3); 3],
        )
        .unwrap();
        let (_, cert) = full_revelation_profile(&game).unwrap();
        assert_eq!(cert.codewords.len(), 9);
        for a in &cert.codewords {
            assert_eq!(a.iter().sum::<usize>() % 3, 0);
        }
    }

    #[test]
    fn tied_state_rejected() {
        let game = GameInstance::new(
            vec![0.5, 0.5],
            2,
            Matrix::filled(2, 2, 1.0),
            vec![Matrix::zeros(2, 2); 2],
        )
        .unwrap();
        match full_revelation_profile(&game) {
            Err(Error::Precondition(msg)) => assert!(msg.contains("state 0")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sample_count_formula() {
        let game = fixtures::didactic_game();
        assert_eq!(local_sample_count(&game), 1000);
        let (big, _) = fixtures::nonunique_equilibrium_game();
        assert_eq!(local_sample_count(&big), 10_000);
    }

    #[test]
    fn local_check_rejects_nonpositive_radius() {
        let game = fixtures::didactic_game();
        let p = JointPolicy::uniform(&game);
        assert!(local_ne_verify(&game, &p, &TieRule::Lexicographic, 0.0, 1).is_err());
    }

    #[test]
    fn exact_equilibrium_is_local() {
        let (game, _) = fixtures::nonunique_equilibrium_game();
        let tie = TieRule::sender_favoring(2);
        let (profile, _) = full_revelation_profile(&game).unwrap();
        for eps in [0.005, 0.01] {
            let r = local_ne_verify_with_samples(&game, &profile, &tie, eps, 3, 500).unwrap();
            assert_eq!(r.verdict, Verdict::EpsilonLocal);
        }
    }
}
