//! Exact phase-one simplex for `A v = c, v ≥ 0`.
//!
//! Bland's rule on a dense rational tableau. Either a feasible point comes
//! back, or a Farkas vector `y` with `yᵀA ≥ 0` and `yᵀc < 0`.

use num::{Signed, Zero};

use crate::rational::Rational;

#[derive(Clone, Debug, PartialEq)]
pub enum Feasibility {
    Feasible(Vec<Rational>),
    Infeasible(Vec<Rational>),
}

/// `rows[i]` lists the nonzero `(column, coefficient)` entries of row `i`.
pub fn solve(rows: &[Vec<(usize, Rational)>], rhs: &[Rational], vars: usize) -> Feasibility {
    let m = rows.len();
    assert_eq!(rhs.len(), m);
    let width = vars + m + 1;
    let mut sign = vec![Rational::from_integer(1.into()); m];
    let mut t = vec![vec![Rational::zero(); width]; m];
    for (i, row) in rows.iter().enumerate() {
        if rhs[i].is_negative() {
            sign[i] = -sign[i].clone();
        }
        for (j, a) in row {
            t[i][*j] += &sign[i] * a;
        }
        t[i][vars + i] = Rational::from_integer(1.into());
        t[i][width - 1] = &sign[i] * &rhs[i];
    }
    // reduced costs of the phase-one objective (sum of artificials)
    let mut cost = vec![Rational::zero(); width];
    for row in &t {
        for j in 0..vars {
            cost[j] -= &row[j];
        }
        cost[width - 1] -= &row[width - 1];
    }
    let mut basis: Vec<usize> = (vars..vars + m).collect();

    while let Some(enter) = (0..width - 1).find(|&j| cost[j].is_negative()) {
        let mut leave: Option<(usize, Rational)> = None;
        for i in 0..m {
            if !t[i][enter].is_positive() {
                continue;
            }
            let ratio = &t[i][width - 1] / &t[i][enter];
            let better = match &leave {
                None => true,
                Some((l, r)) => ratio < *r || (ratio == *r && basis[i] < basis[*l]),
            };
            if better {
                leave = Some((i, ratio));
            }
        }
        // phase one is bounded below by zero, so some row always qualifies
        let (r, _) = leave.expect("phase-one objective is bounded");
        pivot(&mut t, &mut cost, r, enter);
        basis[r] = enter;
    }

    let objective = -cost[width - 1].clone();
    if objective.is_zero() {
        let mut x = vec![Rational::zero(); vars];
        for (i, &b) in basis.iter().enumerate() {
            if b < vars {
                x[b] = t[i][width - 1].clone();
            }
        }
        Feasibility::Feasible(x)
    } else {
        // artificial reduced cost is 1 − y_i
        let one = Rational::from_integer(1.into());
        let y = (0..m).map(|i| -(&sign[i] * (&one - &cost[vars + i]))).collect();
        Feasibility::Infeasible(y)
    }
}

fn pivot(t: &mut [Vec<Rational>], cost: &mut [Rational], r: usize, c: usize) {
    let p = t[r][c].clone();
    for v in t[r].iter_mut() {
        *v /= &p;
    }
    let pivot_row = t[r].clone();
    let nz: Vec<usize> = (0..pivot_row.len()).filter(|&j| !pivot_row[j].is_zero()).collect();
    for (i, row) in t.iter_mut().enumerate() {
        if i == r || row[c].is_zero() {
            continue;
        }
        let f = row[c].clone();
        for &j in &nz {
            row[j] -= &f * &pivot_row[j];
        }
    }
    if !cost[c].is_zero() {
        let f = cost[c].clone();
        for &j in &nz {
            cost[j] -= &f * &pivot_row[j];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{frac, int};

    fn check(rows: &[Vec<(usize, Rational)>], rhs: &[Rational], vars: usize) -> bool {
        match solve(rows, rhs, vars) {
            Feasibility::Feasible(x) => {
                assert!(x.iter().all(|v| !v.is_negative()));
                for (row, c) in rows.iter().zip(rhs) {
                    let lhs: Rational = row.iter().map(|(j, a)| a * &x[*j]).sum();
                    assert_eq!(&lhs, c);
                }
                true
            }
            Feasibility::Infeasible(y) => {
                let mut ya = vec![Rational::zero(); vars];
                for (row, yi) in rows.iter().zip(&y) {
                    for (j, a) in row {
                        ya[*j] += a * yi;
                    }
                }
                assert!(ya.iter().all(|v| !v.is_negative()));
                let yc: Rational = y.iter().zip(rhs).map(|(a, b)| a * b).sum();
                assert!(yc.is_negative());
                false
            }
        }
    }

    #[test]
    fn small_systems() {
        // v0 + v1 = 1, v0 − v1 = 1/2
        let rows = vec![vec![(0, int(1)), (1, int(1))], vec![(0, int(1)), (1, int(-1))]];
        assert!(check(&rows, &[int(1), frac(1, 2)], 2));
        // v0 + v1 = 1, v0 + v1 = 2
        let rows = vec![vec![(0, int(1)), (1, int(1))], vec![(0, int(1)), (1, int(1))]];
        assert!(!check(&rows, &[int(1), int(2)], 2));
        // v0 = −1
        assert!(!check(&[vec![(0, int(1))]], &[int(-1)], 1));
        // empty row with zero and nonzero right-hand side
        assert!(check(&[vec![]], &[int(0)], 0));
        assert!(!check(&[vec![]], &[int(3)], 0));
        // degenerate: redundant equalities
        let rows = vec![
            vec![(0, int(1)), (1, int(2))],
            vec![(0, int(2)), (1, int(4))],
            vec![(2, int(1))],
        ];
        assert!(check(&rows, &[int(2), int(4), int(0)], 3));
    }
}
