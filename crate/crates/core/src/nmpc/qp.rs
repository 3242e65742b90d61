//! Dense strictly convex QP with box constraints, solved by a primal active-set
//! method.
//!
//! minimize ½ xᵀHx + gᵀx subject to lb ≤ x ≤ ub.
//!
//! The iteration keeps a feasible primal point. Each step solves the
//! equality-constrained subproblem on the free variables (Cholesky), takes the
//! longest feasible step toward its minimizer and adds a blocking bound when
//! one is hit. At a subproblem minimizer the bound multipliers are checked, and
//! the lowest-index bound with a negative multiplier is released. Ties in the
//! ratio test also go to the lowest index, so the iteration is deterministic
//! and cannot cycle.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundState {
    #[default]
    Free,
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    MaxIterations,
    /// Hessian block not positive definite.
    NotConvex,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub working_set: Vec<BoundState>,
    pub iterations: usize,
    pub status: QpStatus,
    /// Largest violation of the first-order optimality conditions.
    pub kkt_residual: f64,
}

impl QpSolution {
    pub fn active_count(&self) -> usize {
        self.working_set
            .iter()
            .filter(|s| **s != BoundState::Free)
            .count()
    }
}

const TOL: f64 = 1e-12;

fn solve_free(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    x: &DVector<f64>,
    ws: &[BoundState],
) -> Option<DVector<f64>> {
    let free: Vec<usize> = (0..ws.len()).filter(|&i| ws[i] == BoundState::Free).collect();
    let mut target = x.clone();
    if free.is_empty() {
        return Some(target);
    }
    let nf = free.len();
    let mut hff = DMatrix::zeros(nf, nf);
    let mut rhs = DVector::zeros(nf);
    for (a, &i) in free.iter().enumerate() {
        let mut s = -g[i];
        for j in 0..ws.len() {
            if ws[j] != BoundState::Free {
                s -= h[(i, j)] * x[j];
            }
        }
        rhs[a] = s;
        for (b, &j) in free.iter().enumerate() {
            hff[(a, b)] = h[(i, j)];
        }
    }
    let chol = hff.cholesky()?;
    let sol = chol.solve(&rhs);
    for (a, &i) in free.iter().enumerate() {
        target[i] = sol[a];
    }
    Some(target)
}

fn kkt_residual(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    x: &DVector<f64>,
    ws: &[BoundState],
) -> f64 {
    let grad = h * x + g;
    let mut worst = 0.0f64;
    for i in 0..ws.len() {
        let v = match ws[i] {
            BoundState::Free => grad[i].abs(),
            BoundState::Lower => (-grad[i]).max(0.0),
            BoundState::Upper => grad[i].max(0.0),
        };
        worst = worst.max(v);
    }
    worst
}

/// Solves the box QP. `warm` optionally seeds the working set; entries whose
/// bound is inconsistent with the problem are ignored.
pub fn solve_box_qp(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    lb: &DVector<f64>,
    ub: &DVector<f64>,
    warm: Option<&[BoundState]>,
    max_iter: usize,
) -> QpSolution {
    let n = g.len();
    assert_eq!(h.nrows(), n);
    assert_eq!(lb.len(), n);
    assert_eq!(ub.len(), n);
    let mut ws = vec![BoundState::Free; n];
    let mut x = DVector::zeros(n);
    for i in 0..n {
        // equal bounds pin the variable
        if ub[i] - lb[i] <= TOL {
            ws[i] = BoundState::Lower;
        } else if let Some(w) = warm.and_then(|w| w.get(i)) {
            ws[i] = *w;
        }
        x[i] = match ws[i] {
            BoundState::Free => 0.0f64.clamp(lb[i], ub[i]),
            BoundState::Lower => lb[i],
            BoundState::Upper => ub[i],
        };
    }

    let mut iterations = 0;
    let mut status = QpStatus::MaxIterations;
    while iterations < max_iter {
        iterations += 1;
        let Some(target) = solve_free(h, g, &x, &ws) else {
            status = QpStatus::NotConvex;
            break;
        };
        let d = &target - &x;
        // ratio test over free variables
        let mut alpha = 1.0;
        let mut blocking: Option<(usize, BoundState)> = None;
        for i in 0..n {
            if ws[i] != BoundState::Free {
                continue;
            }
            let (limit, side) = if d[i] < -TOL {
                ((lb[i] - x[i]) / d[i], BoundState::Lower)
            } else if d[i] > TOL {
                ((ub[i] - x[i]) / d[i], BoundState::Upper)
            } else {
                continue;
            };
            if limit < alpha {
                alpha = limit.max(0.0);
                blocking = Some((i, side));
            }
        }
        if let Some((i, side)) = blocking {
            x += d * alpha;
            ws[i] = side;
            x[i] = if side == BoundState::Lower { lb[i] } else { ub[i] };
            continue;
        }
        x = target;
        for i in 0..n {
            x[i] = x[i].clamp(lb[i], ub[i]);
        }
        // multipliers of the working bounds
        let grad = h * &x + g;
        let release = (0..n).find(|&i| {
            if ub[i] - lb[i] <= TOL {
                return false;
            }
            match ws[i] {
                BoundState::Free => false,
                BoundState::Lower => grad[i] < -1e-10 * (1.0 + grad[i].abs()),
                BoundState::Upper => grad[i] > 1e-10 * (1.0 + grad[i].abs()),
            }
        });
        match release {
            Some(i) => ws[i] = BoundState::Free,
            None => {
                status = QpStatus::Optimal;
                break;
            }
        }
    }
    let kkt = kkt_residual(h, g, &x, &ws);
    QpSolution {
        x,
        working_set: ws,
        iterations,
        status,
        kkt_residual: kkt,
    }
}
