use gridrisk_core::lpsolve::{dual_bound, solve, warm_hint, LpProblem, LpStatus, Sense};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-6;

fn random_lp(rng: &mut ChaCha8Rng) -> LpProblem {
    let n = rng.random_range(2..=3);
    let m = rng.random_range(1..=3);
    let mut lp = LpProblem::new();
    for _ in 0..n {
        let lo = rng.random_range(-5..=0) as f64;
        let hi = lo + rng.random_range(1..=8) as f64;
        lp.add_var(rng.random_range(-5..=5) as f64, lo, hi);
    }
    for _ in 0..m {
        let coeffs = (0..n).map(|j| (j, rng.random_range(-4..=4) as f64)).collect();
        let sense = match rng.random_range(0..6) {
            0 => Sense::Eq,
            1 | 2 => Sense::Ge,
            _ => Sense::Le,
        };
        lp.add_row(coeffs, sense, rng.random_range(-8..=8) as f64);
    }
    lp
}

fn dense_row(lp: &LpProblem, i: usize) -> Vec<f64> {
    let mut a = vec![0.0; lp.n_vars()];
    for &(j, v) in &lp.rows[i].coeffs {
        a[j] += v;
    }
    a
}

/// Gaussian elimination with partial pivoting; `None` if singular.
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

fn feasible(lp: &LpProblem, x: &[f64]) -> bool {
    let in_box = x
        .iter()
        .enumerate()
        .all(|(j, &v)| v >= lp.lower[j] - TOL && v <= lp.upper[j] + TOL);
    in_box
        && (0..lp.n_rows()).all(|i| {
            let lhs: f64 = dense_row(lp, i).iter().zip(x).map(|(a, v)| a * v).sum();
            let rhs = lp.rows[i].rhs;
            match lp.rows[i].sense {
                Sense::Le => lhs <= rhs + TOL,
                Sense::Ge => lhs >= rhs - TOL,
                Sense::Eq => (lhs - rhs).abs() <= TOL,
            }
        })
}

/// Brute force over every basic solution of a boxed LP. The feasible set is a
/// polytope, so it is empty or its minimum sits on a vertex.
fn vertex_optimum(lp: &LpProblem) -> Option<f64> {
    let n = lp.n_vars();
    // candidate hyperplanes: rows, then lower bounds, then upper bounds
    let mut planes: Vec<(Vec<f64>, f64)> = (0..lp.n_rows())
        .map(|i| (dense_row(lp, i), lp.rows[i].rhs))
        .collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e.clone(), lp.lower[j]));
        planes.push((e, lp.upper[j]));
    }
    let mut best: Option<f64> = None;
    let k = planes.len();
    let mut pick = vec![0usize; n];
    fn next_combo(pick: &mut [usize], k: usize) -> bool {
        let n = pick.len();
        for i in (0..n).rev() {
            if pick[i] < k - n + i {
                pick[i] += 1;
                for j in i + 1..n {
                    pick[j] = pick[j - 1] + 1;
                }
                return true;
            }
        }
        false
    }
    for (i, p) in pick.iter_mut().enumerate() {
        *p = i;
    }
    loop {
        let a = pick.iter().map(|&i| planes[i].0.clone()).collect();
        let b = pick.iter().map(|&i| planes[i].1).collect();
        if let Some(x) = solve_square(a, b) {
            if feasible(lp, &x) {
                let obj: f64 = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
                best = Some(best.map_or(obj, |b: f64| b.min(obj)));
            }
        }
        if !next_combo(&mut pick, k) {
            break;
        }
    }
    best
}

#[test]
fn simplex_matches_vertex_enumeration_on_random_lps() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let (mut optimal, mut infeasible) = (0, 0);
    for case in 0..100 {
        let lp = random_lp(&mut rng);
        let sol = solve(&lp).unwrap();
        match vertex_optimum(&lp) {
            Some(best) => {
                optimal += 1;
                assert_eq!(sol.status, LpStatus::Optimal, "case {case}\n{}", lp.dump());
                assert!(
                    (sol.objective_value - best).abs() <= TOL * (1.0 + best.abs()),
                    "case {case}: simplex {} vs vertices {best}",
                    sol.objective_value
                );
                assert!(feasible(&lp, &sol.primal), "case {case}: infeasible primal");
            }
            None => {
                infeasible += 1;
                assert_eq!(sol.status, LpStatus::Infeasible, "case {case}\n{}", lp.dump());
            }
        }
    }
    // the generator should exercise both outcomes
    assert!(optimal > 50 && infeasible > 0, "{optimal} optimal, {infeasible} infeasible");
}

#[test]
fn duals_close_the_gap_at_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..100 {
        let lp = random_lp(&mut rng);
        let sol = solve(&lp).unwrap();
        if sol.status != LpStatus::Optimal {
            continue;
        }
        let bound = dual_bound(&lp, &sol.duals, 1e-9).expect("optimal duals give a finite bound");
        assert!((bound - sol.objective_value).abs() <= TOL * (1.0 + bound.abs()));
    }
}

fn arb_lp() -> impl Strategy<Value = LpProblem> {
    any::<u64>().prop_map(|s| random_lp(&mut ChaCha8Rng::seed_from_u64(s)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    // Any multiplier vector yields a lower bound on the optimum.
    #[test]
    fn weak_duality(lp in arb_lp(), ys in prop::collection::vec(-10.0f64..10.0, 3)) {
        let sol = solve(&lp).unwrap();
        prop_assume!(sol.status == LpStatus::Optimal);
        if let Some(bound) = dual_bound(&lp, &ys[..lp.n_rows()], 0.0) {
            prop_assert!(bound <= sol.objective_value + TOL * (1.0 + bound.abs()));
        }
    }

    #[test]
    fn warm_start_agrees_with_cold_after_rhs_change(lp in arb_lp(), shift in -2.0f64..2.0, row in 0usize..3) {
        let first = solve(&lp).unwrap();
        prop_assume!(first.status == LpStatus::Optimal && first.basis.is_some());
        let mut moved = lp.clone();
        let row = row % moved.n_rows();
        moved.rows[row].rhs += shift;
        let cold = solve(&moved).unwrap();
        let warm = warm_hint(&moved, first.basis.as_ref().unwrap()).unwrap();
        prop_assert_eq!(warm.status, cold.status);
        if cold.status == LpStatus::Optimal {
            prop_assert!((warm.objective_value - cold.objective_value).abs() <= TOL * (1.0 + cold.objective_value.abs()));
        }
    }
}
