//! Dense two-phase simplex for the small linear programs behind the exact
//! constrained-MDP solvers.
//!
//! Solves `min c·x  s.t.  A x = b, x ≥ 0` (callers add their own slack
//! variables for inequality rows). Entering and leaving variables follow
//! Bland's smallest-index rule, which cannot cycle and makes every pivot
//! sequence — hence every solution — deterministic. Problem sizes here are a
//! few dozen rows and ~100 columns, so a dense tableau is the simplest thing
//! that works.

/// Result of a successful solve.
#[derive(Clone, Debug)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

/// Solver failures. `Infeasible.residual` is the phase-1 objective: the
/// minimal total constraint violation (l1) achievable with x ≥ 0.
#[derive(Clone, Debug, PartialEq)]
pub enum LpError {
    Infeasible { residual: f64 },
    Unbounded,
}

impl std::fmt::Display for LpError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LpError::Infeasible { residual } => {
                write!(f, "linear program infeasible (residual {residual})")
            }
            LpError::Unbounded => write!(f, "linear program unbounded"),
        }
    }
}

impl std::error::Error for LpError {}

/// A pivot element must exceed this in absolute value.
const PIVOT_EPS: f64 = 1e-10;
/// Reduced costs within this of zero count as optimal.
const COST_EPS: f64 = 1e-9;
/// Phase-1 objectives above this mean "infeasible".
const FEAS_EPS: f64 = 1e-8;
/// Ratios within this of each other tie in the leaving-variable test.
const RATIO_TIE: f64 = 1e-12;

/// Minimizes `c·x` over `A x = b, x ≥ 0`.
///
/// `a` is row-major (each inner Vec one constraint), `b` the right-hand side.
pub fn solve(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<LpSolution, LpError> {
    let m = a.len();
    let n = c.len();
    assert_eq!(b.len(), m, "rhs length must match row count");
    for (i, row) in a.iter().enumerate() {
        assert_eq!(row.len(), n, "constraint row {i} has wrong width");
    }

    // Phase-1 tableau [A | I | b] with b ≥ 0 and artificial basis n..n+m.
    let width = n + m + 1;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    for i in 0..m {
        let flip = if b[i] < 0.0 { -1.0 } else { 1.0 };
        let mut row = vec![0.0; width];
        for j in 0..n {
            row[j] = flip * a[i][j];
        }
        row[n + i] = 1.0;
        row[width - 1] = flip * b[i];
        rows.push(row);
    }
    // Reduced costs for c1 = (0,…,0,1,…,1): eliminate the basic (artificial)
    // columns by subtracting every constraint row.
    let mut obj = vec![0.0; width];
    for j in n..n + m {
        obj[j] = 1.0;
    }
    for i in 0..m {
        for j in 0..width {
            obj[j] -= rows[i][j];
        }
    }
    rows.push(obj);
    let mut basis: Vec<usize> = (n..n + m).collect();

    // Phase 1; artificial columns never (re-)enter.
    run_phase(&mut rows, &mut basis, n, width)?;
    let phase1 = -rows[rows.len() - 1][width - 1];
    if phase1 > FEAS_EPS {
        return Err(LpError::Infeasible {
            residual: phase1.max(0.0),
        });
    }

    // Any artificial still basic sits at zero: pivot it out on a real column,
    // or drop the (redundant) row if none is available.
    let mut i = 0;
    while i < basis.len() {
        if basis[i] >= n {
            match (0..n).find(|&j| rows[i][j].abs() > PIVOT_EPS) {
                Some(j) => pivot(&mut rows, &mut basis, i, j, width),
                None => {
                    rows.remove(i);
                    basis.remove(i);
                    continue;
                }
            }
        }
        i += 1;
    }
    let m2 = basis.len();

    // Strip artificial columns; rebuild the reduced-cost row for c.
    let width2 = n + 1;
    for row in rows.iter_mut() {
        let rhs = row[width - 1];
        row.truncate(n);
        row.push(rhs);
    }
    let mut obj = vec![0.0; width2];
    obj[..n].copy_from_slice(c);
    for i in 0..m2 {
        let cb = c[basis[i]];
        if cb != 0.0 {
            for j in 0..width2 {
                obj[j] -= cb * rows[i][j];
            }
        }
    }
    rows[m2] = obj;
    rows.truncate(m2 + 1);

    run_phase(&mut rows, &mut basis, n, width2)?;

    let mut x = vec![0.0; n];
    for (i, &bj) in basis.iter().enumerate() {
        x[bj] = rows[i][width2 - 1].max(0.0);
    }
    let objective: f64 = c.iter().zip(x.iter()).map(|(ci, xi)| ci * xi).sum();
    Ok(LpSolution { x, objective })
}

/// Runs Bland-rule pivoting until optimal or unbounded. Only columns below
/// `n_enter` may enter the basis. The last row of `rows` is the reduced-cost
/// row; `width-1` is the rhs column.
fn run_phase(
    rows: &mut [Vec<f64>],
    basis: &mut Vec<usize>,
    n_enter: usize,
    width: usize,
) -> Result<(), LpError> {
    let m = basis.len();
    let rhs = width - 1;
    loop {
        let obj_row = m; // reduced-cost row index
        let Some(enter) = (0..n_enter).find(|&j| rows[obj_row][j] < -COST_EPS) else {
            return Ok(());
        };
        let mut leave: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for i in 0..m {
            let aij = rows[i][enter];
            if aij <= PIVOT_EPS {
                continue;
            }
            let ratio = rows[i][rhs] / aij;
            let take = match leave {
                None => true,
                Some(l) => {
                    ratio < best_ratio - RATIO_TIE
                        || (ratio <= best_ratio + RATIO_TIE && basis[i] < basis[l])
                }
            };
            if take {
                if ratio < best_ratio {
                    best_ratio = ratio;
                }
                leave = Some(i);
            }
        }
        let Some(leave) = leave else {
            return Err(LpError::Unbounded);
        };
        pivot(rows, basis, leave, enter, width);
    }
}

fn pivot(rows: &mut [Vec<f64>], basis: &mut [usize], row: usize, col: usize, width: usize) {
    let inv = 1.0 / rows[row][col];
    for v in rows[row].iter_mut() {
        *v *= inv;
    }
    rows[row][col] = 1.0;
    let pivot_row = rows[row].clone();
    for (i, r) in rows.iter_mut().enumerate() {
        if i == row {
            continue;
        }
        let factor = r[col];
        if factor == 0.0 {
            continue;
        }
        for j in 0..width {
            r[j] -= factor * pivot_row[j];
        }
        r[col] = 0.0;
    }
    basis[row] = col;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    #[test]
    fn textbook_maximization() {
        // max x + 2y s.t. x + y ≤ 4, x ≤ 2  (slacks s1, s2)
        // -> min -x - 2y; optimum at (x, y) = (0, 4), objective -8.
        let c = vec![-1.0, -2.0, 0.0, 0.0];
        let a = vec![
            vec![1.0, 1.0, 1.0, 0.0],
            vec![1.0, 0.0, 0.0, 1.0],
        ];
        let b = vec![4.0, 2.0];
        let sol = solve(&c, &a, &b).unwrap();
        assert!((sol.objective + 8.0).abs() < 1e-9);
        assert!((sol.x[1] - 4.0).abs() < 1e-9);
    }

    #[test]
    fn detects_infeasible_system() {
        // x + y = 1 and x + y = 2 cannot both hold.
        let c = vec![0.0, 0.0];
        let a = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        let b = vec![1.0, 2.0];
        match solve(&c, &a, &b) {
            Err(LpError::Infeasible { residual }) => {
                assert!((residual - 1.0).abs() < 1e-6, "residual {residual}");
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn detects_unbounded_direction() {
        // min -x s.t. x - y = 0: x = y can grow without bound.
        let c = vec![-1.0, 0.0];
        let a = vec![vec![1.0, -1.0]];
        let b = vec![0.0];
        assert!(matches!(solve(&c, &a, &b), Err(LpError::Unbounded)));
    }

    #[test]
    fn beale_degenerate_instance_terminates() {
        // Beale's classic degenerate LP (cycles under naive pivoting rules):
        // min -3/4 a + 150 b - 1/50 c + 6 d
        // s.t. 1/4 a - 60 b - 1/25 c + 9 d ≤ 0
        //      1/2 a - 90 b - 1/50 c + 3 d ≤ 0
        //      c ≤ 1.       Optimal value -1/20.
        let c = vec![-0.75, 150.0, -0.02, 6.0, 0.0, 0.0, 0.0];
        let a = vec![
            vec![0.25, -60.0, -1.0 / 25.0, 9.0, 1.0, 0.0, 0.0],
            vec![0.5, -90.0, -1.0 / 50.0, 3.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        ];
        let b = vec![0.0, 0.0, 1.0];
        let sol = solve(&c, &a, &b).unwrap();
        assert!((sol.objective + 0.05).abs() < 1e-9, "obj {}", sol.objective);
    }

    #[test]
    fn redundant_rows_are_dropped() {
        // Duplicate constraint: x + y = 1 twice; min -x -> x = 1.
        let c = vec![-1.0, 0.0];
        let a = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        let b = vec![1.0, 1.0];
        let sol = solve(&c, &a, &b).unwrap();
        assert!((sol.x[0] - 1.0).abs() < 1e-9);
        assert!((sol.objective + 1.0).abs() < 1e-9);
    }

    /// Independent oracle: enumerate every basis (column subset of size m),
    /// solve the square system, keep feasible vertices, take the best.
    fn brute_force_min(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Option<f64> {
        let m = a.len();
        let n = c.len();
        let mut best: Option<f64> = None;
        let mut idx: Vec<usize> = (0..m).collect();
        loop {
            // Solve A_B x_B = b via Gaussian elimination.
            let mut mat: Vec<Vec<f64>> = (0..m)
                .map(|i| idx.iter().map(|&j| a[i][j]).collect())
                .collect();
            let mut rhs: Vec<f64> = b.to_vec();
            let mut ok = true;
            for col in 0..m {
                let piv = (col..m).max_by(|&p, &q| {
                    mat[p][col].abs().partial_cmp(&mat[q][col].abs()).unwrap()
                });
                let piv = piv.unwrap();
                if mat[piv][col].abs() < 1e-9 {
                    ok = false;
                    break;
                }
                mat.swap(col, piv);
                rhs.swap(col, piv);
                for r in 0..m {
                    if r != col {
                        let f = mat[r][col] / mat[col][col];
                        for k in col..m {
                            mat[r][k] -= f * mat[col][k];
                        }
                        rhs[r] -= f * rhs[col];
                    }
                }
            }
            if ok {
                let xb: Vec<f64> = (0..m).map(|i| rhs[i] / mat[i][i]).collect();
                if xb.iter().all(|&v| v >= -1e-9) {
                    let obj: f64 = xb.iter().zip(idx.iter()).map(|(&x, &j)| x * c[j]).sum();
                    best = Some(best.map_or(obj, |cur: f64| cur.min(obj)));
                }
            }
            // next combination
            let mut i = m;
            loop {
                if i == 0 {
                    return best;
                }
                i -= 1;
                if idx[i] + (m - i) < n {
                    idx[i] += 1;
                    for k in i + 1..m {
                        idx[k] = idx[k - 1] + 1;
                    }
                    break;
                }
            }
        }
    }

    #[test]
    fn random_instances_match_vertex_enumeration() {
        let mut rng = SplitMix64::new(314);
        let mut solved = 0;
        for _ in 0..60 {
            let m = 2 + rng.below(2); // 2..=3 rows
            let n = m + 1 + rng.below(3); // up to 3 extra columns
            let c: Vec<f64> = (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let a: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect())
                .collect();
            // Build a feasible rhs from a random non-negative point so the
            // instance is feasible by construction.
            let x0: Vec<f64> = (0..n).map(|_| rng.uniform(0.0, 1.0)).collect();
            let b: Vec<f64> = (0..m)
                .map(|i| (0..n).map(|j| a[i][j] * x0[j]).sum())
                .collect();
            match solve(&c, &a, &b) {
                Ok(sol) => {
                    let oracle = brute_force_min(&c, &a, &b)
                        .expect("oracle must find a vertex when simplex does");
                    assert!(
                        (sol.objective - oracle).abs() < 1e-6,
                        "simplex {} vs enumeration {}",
                        sol.objective,
                        oracle
                    );
                    solved += 1;
                }
                Err(LpError::Unbounded) => {
                    // Fine: random objectives over an unbounded polyhedron.
                }
                Err(e) => panic!("feasible-by-construction instance failed: {e}"),
            }
        }
        assert!(solved > 10, "need a meaningful number of solved instances");
    }

    #[test]
    fn solution_satisfies_constraints() {
        let mut rng = SplitMix64::new(2718);
        for _ in 0..40 {
            let m = 2;
            let n = 4;
            let c: Vec<f64> = (0..n).map(|_| rng.uniform(0.0, 1.0)).collect();
            let a: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..n).map(|_| rng.uniform(0.0, 1.0)).collect())
                .collect();
            let x0: Vec<f64> = (0..n).map(|_| rng.uniform(0.0, 1.0)).collect();
            let b: Vec<f64> = (0..m)
                .map(|i| (0..n).map(|j| a[i][j] * x0[j]).sum())
                .collect();
            let sol = solve(&c, &a, &b).unwrap();
            for i in 0..m {
                let lhs: f64 = (0..n).map(|j| a[i][j] * sol.x[j]).sum();
                assert!((lhs - b[i]).abs() < 1e-7);
            }
            assert!(sol.x.iter().all(|&v| v >= -1e-9));
        }
    }
}
