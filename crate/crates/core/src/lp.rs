//! Dense two-phase tableau simplex for small linear programs.
//!
//! Solves `max c·x` subject to `A x ≤ b`, `E x = e`, `x ≥ 0`. Bland's rule is
//! used in both phases, so degenerate programs cannot cycle.

use crate::error::{Error, Result};

/// Largest supported variable count.
pub const MAX_VARIABLES: usize = 200;
/// Largest supported constraint count (inequalities plus equalities).
pub const MAX_ROWS: usize = 500;
/// Pivot budget across both phases.
pub const MAX_PIVOTS: usize = 1_000_000;

const PIVOT_TOL: f64 = 1e-9;
const PHASE_ONE_TOL: f64 = 1e-9;
const CERTIFY_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub ub_rows: Vec<Vec<f64>>,
    pub ub_rhs: Vec<f64>,
    pub eq_rows: Vec<Vec<f64>>,
    pub eq_rhs: Vec<f64>,
}

impl LinearProgram {
    /// An empty program over `n` variables with a zero objective.
    pub fn new(n: usize) -> Self {
        LinearProgram {
            objective: vec![0.0; n],
            ..Default::default()
        }
    }

    pub fn maximize(objective: Vec<f64>) -> Self {
        LinearProgram {
            objective,
            ..Default::default()
        }
    }

    pub fn variables(&self) -> usize {
        self.objective.len()
    }

    pub fn add_le(&mut self, row: Vec<f64>, rhs: f64) {
        self.ub_rows.push(row);
        self.ub_rhs.push(rhs);
    }

    pub fn add_ge(&mut self, row: Vec<f64>, rhs: f64) {
        self.ub_rows.push(row.into_iter().map(|v| -v).collect());
        self.ub_rhs.push(-rhs);
    }

    pub fn add_eq(&mut self, row: Vec<f64>, rhs: f64) {
        self.eq_rows.push(row);
        self.eq_rhs.push(rhs);
    }

    fn validate(&self) -> Result<()> {
        let n = self.variables();
        if n == 0 {
            return Err(Error::arg("linear program has no variables"));
        }
        if n > MAX_VARIABLES {
            return Err(Error::size(
                "LP variables",
                n as u128,
                MAX_VARIABLES as u128,
            ));
        }
        let rows = self.ub_rows.len() + self.eq_rows.len();
        if rows > MAX_ROWS {
            return Err(Error::size("LP rows", rows as u128, MAX_ROWS as u128));
        }
        if self.ub_rows.len() != self.ub_rhs.len() || self.eq_rows.len() != self.eq_rhs.len() {
            return Err(Error::arg(
                "constraint rows and right-hand sides differ in count",
            ));
        }
        let all_rows = self.ub_rows.iter().chain(&self.eq_rows);
        for row in all_rows {
            if row.len() != n {
                return Err(Error::arg(format!(
                    "constraint row has {} coefficients, expected {n}",
                    row.len()
                )));
            }
        }
        let finite = self
            .objective
            .iter()
            .chain(self.ub_rows.iter().flatten())
            .chain(self.eq_rows.iter().flatten())
            .chain(&self.ub_rhs)
            .chain(&self.eq_rhs)
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::arg("linear program has non-finite entries"));
        }
        Ok(())
    }

    /// Largest violation of the constraints (including `x ≥ 0`) at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let dot = |row: &[f64]| row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        let ub = self
            .ub_rows
            .iter()
            .zip(&self.ub_rhs)
            .map(|(r, &b)| dot(r) - b);
        let eq = self
            .eq_rows
            .iter()
            .zip(&self.eq_rhs)
            .map(|(r, &e)| (dot(r) - e).abs());
        let nonneg = x.iter().map(|v| -v);
        ub.chain(eq).chain(nonneg).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpResult {
    pub status: LpStatus,
    /// Primal solution; empty unless `Optimal`.
    pub x: Vec<f64>,
    pub value: f64,
    /// Dual multipliers of the `≤` rows (non-negative) from the final basis.
    pub duals_ub: Vec<f64>,
    /// Dual multipliers of the equality rows (free sign).
    pub duals_eq: Vec<f64>,
}

impl LpResult {
    fn status_only(status: LpStatus) -> Self {
        LpResult {
            status,
            x: Vec::new(),
            value: match status {
                LpStatus::Unbounded => f64::INFINITY,
                _ => f64::NEG_INFINITY,
            },
            duals_ub: Vec::new(),
            duals_eq: Vec::new(),
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

struct Tableau {
    width: usize,
    /// `rows` constraint rows followed by the objective row; last column is the rhs.
    data: Vec<f64>,
    rows: usize,
    basis: Vec<usize>,
    pivots: usize,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width + c]
    }

    fn rhs_col(&self) -> usize {
        self.width - 1
    }

    fn pivot(&mut self, pr: usize, pc: usize) -> Result<()> {
        self.pivots += 1;
        if self.pivots > MAX_PIVOTS {
            return Err(Error::Solver(format!("pivot limit {MAX_PIVOTS} reached")));
        }
        let w = self.width;
        let inv = 1.0 / self.at(pr, pc);
        {
            let row = &mut self.data[pr * w..(pr + 1) * w];
            row.iter_mut().for_each(|v| *v *= inv);
            row[pc] = 1.0;
        }
        let pivot_row: Vec<f64> = self.data[pr * w..(pr + 1) * w].to_vec();
        for r in 0..=self.rows {
            if r == pr {
                continue;
            }
            let factor = self.data[r * w + pc];
            if factor == 0.0 {
                continue;
            }
            let row = &mut self.data[r * w..(r + 1) * w];
            for (v, p) in row.iter_mut().zip(&pivot_row) {
                *v -= factor * p;
            }
            row[pc] = 0.0;
        }
        self.basis[pr] = pc;
        Ok(())
    }

    /// Runs Bland's-rule simplex on the current objective row over columns
    /// `0..enterable`. Returns `false` if the program is unbounded.
    fn optimize(&mut self, enterable: usize) -> Result<bool> {
        let obj = self.rows;
        let rhs = self.rhs_col();
        loop {
            let entering = (0..enterable).find(|&c| self.at(obj, c) < -PIVOT_TOL);
            let Some(pc) = entering else {
                return Ok(true);
            };
            let mut best: Option<(f64, usize, usize)> = None;
            for r in 0..self.rows {
                let a = self.at(r, pc);
                if a > PIVOT_TOL {
                    let ratio = self.at(r, rhs).max(0.0) / a;
                    let better = match best {
                        None => true,
                        Some((br, _, bb)) => {
                            ratio < br - 1e-12 || (ratio <= br + 1e-12 && self.basis[r] < bb)
                        }
                    };
                    if better {
                        best = Some((ratio, r, self.basis[r]));
                    }
                }
            }
            match best {
                None => return Ok(false),
                Some((_, pr, _)) => self.pivot(pr, pc)?,
            }
        }
    }

    fn set_objective(&mut self, costs: &[f64]) {
        // objective row holds z_j - c_j with z = c_B B^{-1} A
        let w = self.width;
        let obj = self.rows;
        for c in 0..w {
            let mut z = 0.0;
            for r in 0..self.rows {
                let cb = costs.get(self.basis[r]).copied().unwrap_or(0.0);
                if cb != 0.0 {
                    z += cb * self.at(r, c);
                }
            }
            let cj = if c < costs.len() { costs[c] } else { 0.0 };
            self.data[obj * w + c] = z - cj;
        }
    }
}

/// Solves `lp` and certifies the optimum against the original constraints.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpResult> {
    lp.validate()?;
    let n = lp.variables();
    let m_ub = lp.ub_rows.len();
    let m = m_ub + lp.eq_rows.len();
    if m == 0 {
        if lp.objective.iter().any(|&c| c > 0.0) {
            return Ok(LpResult::status_only(LpStatus::Unbounded));
        }
        return Ok(LpResult {
            status: LpStatus::Optimal,
            x: vec![0.0; n],
            value: 0.0,
            duals_ub: Vec::new(),
            duals_eq: Vec::new(),
        });
    }

    // columns: x (n), slacks (m_ub), artificials (m), rhs
    let art0 = n + m_ub;
    let width = art0 + m + 1;
    let mut data = vec![0.0; (m + 1) * width];
    let mut row_factor = vec![0.0; m];
    for i in 0..m {
        let (coeffs, rhs) = if i < m_ub {
            (&lp.ub_rows[i], lp.ub_rhs[i])
        } else {
            (&lp.eq_rows[i - m_ub], lp.eq_rhs[i - m_ub])
        };
        let scale = coeffs
            .iter()
            .map(|v| v.abs())
            .fold(if i < m_ub { 1.0 } else { 0.0 }, f64::max);
        let scale = if scale > 0.0 { scale } else { 1.0 };
        let sign = if rhs < 0.0 { -1.0 } else { 1.0 };
        let f = sign / scale;
        row_factor[i] = f;
        let row = &mut data[i * width..(i + 1) * width];
        for (dst, &src) in row.iter_mut().zip(coeffs) {
            *dst = src * f;
        }
        if i < m_ub {
            row[n + i] = f;
        }
        row[art0 + i] = 1.0;
        row[width - 1] = rhs * f;
    }
    let mut t = Tableau {
        width,
        data,
        rows: m,
        basis: (art0..art0 + m).collect(),
        pivots: 0,
    };

    // phase one: maximize -Σ artificials
    let mut phase_one = vec![0.0; art0 + m];
    phase_one[art0..].iter_mut().for_each(|c| *c = -1.0);
    t.set_objective(&phase_one);
    t.optimize(art0)?;
    let infeasibility = -t.at(m, width - 1);
    if infeasibility > PHASE_ONE_TOL {
        return Ok(LpResult::status_only(LpStatus::Infeasible));
    }
    // drive zero-level artificials out of the basis where possible
    for r in 0..m {
        if t.basis[r] >= art0 {
            if let Some(c) = (0..art0).find(|&c| t.at(r, c).abs() > PIVOT_TOL) {
                t.pivot(r, c)?;
            }
        }
    }

    // phase two with a normalized objective
    let obj_scale = lp.objective.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let obj_scale = if obj_scale > 0.0 { obj_scale } else { 1.0 };
    let mut costs = vec![0.0; art0 + m];
    for (c, &v) in costs.iter_mut().zip(&lp.objective) {
        *c = v / obj_scale;
    }
    t.set_objective(&costs);
    if !t.optimize(art0)? {
        return Ok(LpResult::status_only(LpStatus::Unbounded));
    }

    let mut x = vec![0.0; n];
    for r in 0..m {
        let b = t.basis[r];
        if b < n {
            x[b] = t.at(r, width - 1).max(0.0);
        }
    }
    let violation = lp.max_violation(&x);
    if violation > CERTIFY_TOL {
        return Err(Error::Solver(format!(
            "optimal basis violates constraints by {violation:.3e}"
        )));
    }
    let value = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    // y_i = (z - c) of the row's artificial column, mapped back through the
    // row transform and objective scaling
    let dual = |i: usize| t.at(m, art0 + i) * row_factor[i] * obj_scale;
    let duals_ub = (0..m_ub).map(|i| dual(i).max(0.0)).collect();
    let duals_eq = (m_ub..m).map(dual).collect();
    Ok(LpResult {
        status: LpStatus::Optimal,
        x,
        value,
        duals_ub,
        duals_eq,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_bound() {
        let mut lp = LinearProgram::maximize(vec![1.0]);
        lp.add_le(vec![1.0], 1.0);
        let r = solve_lp(&lp).unwrap();
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.x[0] - 1.0).abs() < 1e-12);
        assert!((r.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_face() {
        let mut lp = LinearProgram::maximize(vec![1.0, 1.0]);
        lp.add_le(vec![1.0, 1.0], 1.0);
        let r = solve_lp(&lp).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
        assert!((r.x[0] + r.x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_detected() {
        let mut lp = LinearProgram::maximize(vec![1.0]);
        lp.add_le(vec![1.0], 1.0);
        lp.add_ge(vec![1.0], 2.0);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_detected() {
        let mut lp = LinearProgram::maximize(vec![1.0, 0.0]);
        lp.add_le(vec![-1.0, 1.0], 1.0);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn equality_and_negative_rhs() {
        // max x - y  s.t. x + y = 2, -x ≤ -0.5, y ≥ 0.25
        let mut lp = LinearProgram::maximize(vec![1.0, -1.0]);
        lp.add_eq(vec![1.0, 1.0], 2.0);
        lp.add_le(vec![-1.0, 0.0], -0.5);
        lp.add_ge(vec![0.0, 1.0], 0.25);
        let r = solve_lp(&lp).unwrap();
        assert!((r.value - 1.5).abs() < 1e-12);
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::maximize(vec![1.0, 2.0]);
        lp.add_eq(vec![1.0, 1.0], 1.0);
        lp.add_eq(vec![2.0, 2.0], 2.0);
        lp.add_eq(vec![0.0, 0.0], 0.0);
        let r = solve_lp(&lp).unwrap();
        assert!((r.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn classic_degenerate_cycling_example() {
        // Beale's example cycles under the textbook largest-coefficient rule.
        let mut lp = LinearProgram::maximize(vec![0.75, -150.0, 0.02, -6.0]);
        lp.add_le(vec![0.25, -60.0, -0.04, 9.0], 0.0);
        lp.add_le(vec![0.5, -90.0, -0.02, 3.0], 0.0);
        lp.add_le(vec![0.0, 0.0, 1.0, 0.0], 1.0);
        let r = solve_lp(&lp).unwrap();
        assert!((r.value - 0.05).abs() < 1e-9);
    }

    #[test]
    fn dimension_errors() {
        let mut lp = LinearProgram::maximize(vec![1.0, 1.0]);
        lp.add_le(vec![1.0], 1.0);
        assert!(matches!(solve_lp(&lp), Err(Error::Argument(_))));
        let lp = LinearProgram::maximize(vec![1.0; MAX_VARIABLES + 1]);
        assert!(matches!(solve_lp(&lp), Err(Error::Size { .. })));
    }

    #[test]
    fn duals_certify_random_programs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let n = rng.random_range(1..=6);
            let m = rng.random_range(1..=8);
            let mut lp =
                LinearProgram::maximize((0..n).map(|_| rng.random_range(-1.0..1.0)).collect());
            for _ in 0..m {
                lp.add_le(
                    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
                    rng.random_range(0.0..2.0),
                );
            }
            lp.add_le(vec![1.0; n], 5.0);
            if rng.random_bool(0.5) {
                let row: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
                lp.add_eq(row, 0.5);
            }
            let r = solve_lp(&lp).unwrap();
            if r.status != LpStatus::Optimal {
                continue;
            }
            // dual feasibility: Aᵀy ≥ c, and weak duality b·y ≥ value
            for j in 0..n {
                let lhs: f64 = lp
                    .ub_rows
                    .iter()
                    .zip(&r.duals_ub)
                    .map(|(row, y)| row[j] * y)
                    .sum::<f64>()
                    + lp.eq_rows
                        .iter()
                        .zip(&r.duals_eq)
                        .map(|(row, y)| row[j] * y)
                        .sum::<f64>();
                assert!(
                    lhs >= lp.objective[j] - 1e-6,
                    "dual infeasible: {lhs} < {}",
                    lp.objective[j]
                );
            }
            let dual_value: f64 = lp
                .ub_rhs
                .iter()
                .zip(&r.duals_ub)
                .map(|(b, y)| b * y)
                .sum::<f64>()
                + lp.eq_rhs
                    .iter()
                    .zip(&r.duals_eq)
                    .map(|(b, y)| b * y)
                    .sum::<f64>();
            assert!(r.value <= dual_value + 1e-6);
            assert!(
                (r.value - dual_value).abs() < 1e-6,
                "gap {} vs {}",
                r.value,
                dual_value
            );
        }
    }
}
