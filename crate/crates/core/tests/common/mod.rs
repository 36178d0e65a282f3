//! Independent oracles shared by the integration tests. Nothing here calls
//! into the solver paths it is used to check.
#![allow(dead_code)]

use persuade::learning::random_policy;
use persuade::lp::LinearProgram;
use persuade::{GameInstance, JointPolicy, Matrix, SignalingPolicy};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Game with utilities drawn uniformly from `[0, 1]` and a random prior.
pub fn uniform_game(
    r: &mut impl Rng,
    n: usize,
    states: usize,
    signals: usize,
    actions: usize,
) -> GameInstance {
    let mut draw = |rows, cols| {
        let mut m = Matrix::zeros(rows, cols);
        m.as_mut_slice()
            .iter_mut()
            .for_each(|v| *v = r.random::<f64>());
        m
    };
    let v = draw(states, actions);
    let senders = (0..n).map(|_| draw(states, actions)).collect();
    let raw = draw(1, states);
    let total: f64 = raw.as_slice().iter().map(|x| x + 0.1).sum();
    let prior = raw.as_slice().iter().map(|x| (x + 0.1) / total).collect();
    GameInstance::new(prior, signals, v, senders).unwrap()
}

pub fn random_joint(game: &GameInstance, r: &mut impl Rng) -> JointPolicy {
    JointPolicy::new(
        (0..game.n_senders())
            .map(|_| random_policy(game.states(), game.signals(), r))
            .collect(),
    )
}

/// Ex-ante utilities by brute force, lowest-index tie-breaking at 1e-9.
/// Returns sender utilities followed by the receiver's.
pub fn brute_ex_ante(game: &GameInstance, policies: &[&Matrix]) -> Vec<f64> {
    let n = policies.len();
    let (states, signals, actions) = (game.states(), game.signals(), game.actions());
    let mut out = vec![0.0; n + 1];
    let total = signals.pow(n as u32);
    let mut joint = vec![0.0; states];
    for idx in 0..total {
        let mut rest = idx;
        let mut sig = vec![0; n];
        for k in (0..n).rev() {
            sig[k] = rest % signals;
            rest /= signals;
        }
        for (w, q) in joint.iter_mut().enumerate() {
            *q = game.prior()[w] * (0..n).map(|j| policies[j][(w, sig[j])]).product::<f64>();
        }
        let mass: f64 = joint.iter().sum();
        if mass <= 0.0 {
            continue;
        }
        let value = |a: usize| {
            (0..states)
                .map(|w| joint[w] * game.receiver_utility()[(w, a)])
                .sum::<f64>()
                / mass
        };
        let mut best = 0;
        let mut best_v = value(0);
        for a in 1..actions {
            let v = value(a);
            if v > best_v + 1e-9 {
                best = a;
                best_v = v;
            }
        }
        for j in 0..n {
            out[j] += (0..states)
                .map(|w| joint[w] * game.sender_utility(j)[(w, best)])
                .sum::<f64>();
        }
        out[n] += (0..states)
            .map(|w| joint[w] * game.receiver_utility()[(w, best)])
            .sum::<f64>();
    }
    out
}

/// Best utility of `sender` over a grid of step `1/steps` on each row of its
/// policy, the other senders fixed. Only two-signal games.
pub fn grid_best_response(
    game: &GameInstance,
    sender: usize,
    others: &JointPolicy,
    steps: usize,
) -> f64 {
    assert_eq!(game.signals(), 2, "grid oracle handles two signals");
    let states = game.states();
    let mut counters = vec![0usize; states];
    let mut own = Matrix::zeros(states, 2);
    let mut best = f64::NEG_INFINITY;
    loop {
        for (w, &c) in counters.iter().enumerate() {
            let p = c as f64 / steps as f64;
            own[(w, 0)] = p;
            own[(w, 1)] = 1.0 - p;
        }
        let mats: Vec<&Matrix> = (0..game.n_senders())
            .map(|j| {
                if j == sender {
                    &own
                } else {
                    others.sender(j).matrix()
                }
            })
            .collect();
        best = best.max(brute_ex_ante(game, &mats)[sender]);
        // odometer over the grid
        let mut k = 0;
        loop {
            if k == states {
                return best;
            }
            counters[k] += 1;
            if counters[k] <= steps {
                break;
            }
            counters[k] = 0;
            k += 1;
        }
    }
}

/// Optimal value of an LP by enumerating every basic solution. `None` when
/// the program has no feasible vertex.
pub fn vertex_enumeration(lp: &LinearProgram) -> Option<f64> {
    let n = lp.variables();
    // every constraint as (row, rhs); x ≥ 0 rows appended
    let mut rows: Vec<(Vec<f64>, f64)> = lp
        .ub_rows
        .iter()
        .cloned()
        .zip(lp.ub_rhs.iter().copied())
        .collect();
    rows.extend(lp.eq_rows.iter().cloned().zip(lp.eq_rhs.iter().copied()));
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        rows.push((e, 0.0));
    }
    let mut best: Option<f64> = None;
    let mut pick = Vec::with_capacity(n);
    subsets(rows.len(), n, 0, &mut pick, &mut |chosen| {
        let a: Vec<Vec<f64>> = chosen.iter().map(|&i| rows[i].0.clone()).collect();
        let b: Vec<f64> = chosen.iter().map(|&i| rows[i].1).collect();
        if let Some(x) = solve_square(a, b) {
            if lp.max_violation(&x) <= 1e-9 {
                let v: f64 = lp.objective.iter().zip(&x).map(|(c, x)| c * x).sum();
                best = Some(best.map_or(v, |b: f64| b.max(v)));
            }
        }
    });
    best
}

fn subsets(
    total: usize,
    k: usize,
    start: usize,
    pick: &mut Vec<usize>,
    f: &mut impl FnMut(&[usize]),
) {
    if pick.len() == k {
        f(pick);
        return;
    }
    for i in start..total {
        if total - i < k - pick.len() {
            return;
        }
        pick.push(i);
        subsets(total, k, i + 1, pick, f);
        pick.pop();
    }
}

/// Gaussian elimination with partial pivoting; `None` if singular.
pub fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..n {
                        a[r][c] -= f * a[col][c];
                    }
                    b[r] -= f * b[col];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// Small random LP with a bounding row so that feasible programs are bounded.
/// Integer coefficients make degenerate vertices common.
pub fn random_lp(r: &mut impl Rng) -> LinearProgram {
    let n = r.random_range(1..=6);
    let mut lp = LinearProgram::maximize((0..n).map(|_| r.random_range(-5..=5) as f64).collect());
    lp.add_le(vec![1.0; n], r.random_range(1..=10) as f64);
    let eqs = r.random_range(0..=2usize).min(n);
    let ubs = r.random_range(0..=(7 - eqs));
    for _ in 0..ubs {
        let row = (0..n).map(|_| r.random_range(-3..=3) as f64).collect();
        lp.add_le(row, r.random_range(-2..=6) as f64);
    }
    for _ in 0..eqs {
        let row = (0..n).map(|_| r.random_range(0..=3) as f64).collect();
        lp.add_eq(row, r.random_range(0..=4) as f64);
    }
    lp
}

/// Nash equilibria of a 2×2 bimatrix game by support enumeration. Only
/// isolated equilibria are returned: pure ones and fully mixed ones with a
/// unique indifference solution.
pub fn support_enumeration_2x2(u1: &Matrix, u2: &Matrix) -> Vec<([f64; 2], [f64; 2])> {
    let mut out = Vec::new();
    for a in 0..2 {
        for b in 0..2 {
            let br1 = u1[(a, b)] >= u1[(1 - a, b)];
            let br2 = u2[(a, b)] >= u2[(a, 1 - b)];
            if br1 && br2 {
                let mut x = [0.0; 2];
                let mut y = [0.0; 2];
                x[a] = 1.0;
                y[b] = 1.0;
                out.push((x, y));
            }
        }
    }
    // player 2 mixes q on column 0 to make player 1 indifferent
    let d1 = (u1[(0, 0)] - u1[(1, 0)]) - (u1[(0, 1)] - u1[(1, 1)]);
    let d2 = (u2[(0, 0)] - u2[(0, 1)]) - (u2[(1, 0)] - u2[(1, 1)]);
    if d1 != 0.0 && d2 != 0.0 {
        let q = -(u1[(0, 1)] - u1[(1, 1)]) / d1;
        let p = -(u2[(1, 0)] - u2[(1, 1)]) / d2;
        if p > 0.0 && p < 1.0 && q > 0.0 && q < 1.0 {
            out.push(([p, 1.0 - p], [q, 1.0 - q]));
        }
    }
    out
}

/// Policy that plays `x` at state 1 and uniform noise at state 0.
pub fn bimatrix_policy(x: &[f64]) -> SignalingPolicy {
    let m = x.len();
    let mut rows = vec![vec![1.0 / m as f64; m]];
    rows.push(x.to_vec());
    SignalingPolicy::from_rows(&rows).unwrap()
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}
