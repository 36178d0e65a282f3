mod common;

use persuade::lp::{solve_lp, LinearProgram, LpStatus};

#[test]
fn single_variable_bound() {
    let mut lp = LinearProgram::maximize(vec![1.0]);
    lp.add_le(vec![1.0], 1.0);
    let res = solve_lp(&lp).unwrap();
    assert_eq!(res.status, LpStatus::Optimal);
    assert!((res.x[0] - 1.0).abs() < 1e-12 && (res.value - 1.0).abs() < 1e-12);
}

#[test]
fn degenerate_face_returns_a_vertex() {
    let mut lp = LinearProgram::maximize(vec![1.0, 1.0]);
    lp.add_le(vec![1.0, 1.0], 1.0);
    let res = solve_lp(&lp).unwrap();
    assert!((res.value - 1.0).abs() < 1e-12);
    assert!(lp.max_violation(&res.x) <= 1e-9);
}

#[test]
fn matches_vertex_enumeration() {
    let mut r = common::rng(51);
    for _ in 0..100 {
        let lp = common::random_lp(&mut r);
        let res = solve_lp(&lp).unwrap();
        match common::vertex_enumeration(&lp) {
            Some(v) => {
                assert_eq!(res.status, LpStatus::Optimal);
                assert!((res.value - v).abs() <= 1e-7, "{} vs {v}", res.value);
                assert!(lp.max_violation(&res.x) <= 1e-7);
            }
            None => assert_eq!(res.status, LpStatus::Infeasible),
        }
    }
}

#[test]
fn final_basis_duals_bound_the_optimum() {
    let mut r = common::rng(52);
    let mut checked = 0;
    for _ in 0..200 {
        let lp = common::random_lp(&mut r);
        let res = solve_lp(&lp).unwrap();
        if !res.is_optimal() {
            continue;
        }
        let n = lp.variables();
        assert!(res.duals_ub.iter().all(|&y| y >= -1e-9));
        // dual feasibility: Aᵀy + Eᵀz ≥ c
        for i in 0..n {
            let col: f64 = lp
                .ub_rows
                .iter()
                .zip(&res.duals_ub)
                .map(|(row, y)| row[i] * y)
                .sum::<f64>()
                + lp.eq_rows
                    .iter()
                    .zip(&res.duals_eq)
                    .map(|(row, z)| row[i] * z)
                    .sum::<f64>();
            assert!(
                col >= lp.objective[i] - 1e-7,
                "reduced cost {} < {}",
                col,
                lp.objective[i]
            );
        }
        let dual: f64 = lp
            .ub_rhs
            .iter()
            .zip(&res.duals_ub)
            .map(|(b, y)| b * y)
            .sum::<f64>()
            + lp.eq_rhs
                .iter()
                .zip(&res.duals_eq)
                .map(|(e, z)| e * z)
                .sum::<f64>();
        assert!(
            res.value <= dual + 1e-6,
            "primal {} exceeds dual {dual}",
            res.value
        );
        checked += 1;
    }
    assert!(checked >= 100);
}

#[test]
fn infeasible_and_unbounded() {
    let mut lp = LinearProgram::maximize(vec![1.0, 0.0]);
    lp.add_le(vec![1.0, 1.0], 1.0);
    lp.add_ge(vec![1.0, 1.0], 2.0);
    assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Infeasible);

    let mut lp = LinearProgram::maximize(vec![1.0, 1.0]);
    lp.add_le(vec![1.0, -1.0], 1.0);
    assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Unbounded);
}

#[test]
fn malformed_programs_are_rejected() {
    let mut lp = LinearProgram::maximize(vec![1.0, 1.0]);
    lp.add_le(vec![1.0], 1.0);
    assert!(solve_lp(&lp).is_err());
    assert!(solve_lp(&LinearProgram::maximize(vec![f64::NAN])).is_err());
    assert!(solve_lp(&LinearProgram::new(201)).is_err());
}
