//! Least squares on the probability simplex.
//!
//! Minimizes `|A x - b|²` subject to `x ≥ 0`, `Σ x = 1` with a primal
//! active-set method. Each face subproblem is solved in an orthonormal basis
//! of the sum-zero subspace by a rank-revealing SVD, so the conditioning is
//! that of `A`, not of `AᵀA`.

use nalgebra::{DMatrix, DVector};

/// Multipliers below `-ADD_TOL * scale` bring a variable back into the face.
const ADD_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexSolution {
    pub x: Vec<f64>,
    /// `|A x - b|²`.
    pub cost: f64,
    /// Largest violation of the first-order optimality conditions.
    pub kkt_residual: f64,
    /// The minimizer is not unique: `A` is rank deficient on the final face.
    pub flat_directions: bool,
    pub iterations: usize,
}

/// Gradient `2 Aᵀ(A x - b)`.
pub fn gradient(a: &DMatrix<f64>, b: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
    (a.transpose() * (a * x - b)) * 2.0
}

/// KKT violation at a feasible `x`: stationarity on the free set `{x_i > 0}`
/// and sign of the multipliers on the rest, with the equality multiplier
/// chosen as the negative mean free gradient.
pub fn kkt_residual(grad: &[f64], x: &[f64]) -> f64 {
    let free: Vec<usize> = (0..x.len()).filter(|&i| x[i] > 0.0).collect();
    if free.is_empty() {
        return f64::INFINITY;
    }
    let nu = -free.iter().map(|&i| grad[i]).sum::<f64>() / free.len() as f64;
    (0..x.len())
        .map(|i| {
            let mu = grad[i] + nu;
            if x[i] > 0.0 {
                mu.abs()
            } else {
                (-mu).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Orthonormal basis of `{d ∈ R^k : Σ d = 0}` as the last `k-1` columns of
/// the Householder reflector mapping `1/√k` to `e₁`.
fn sum_zero_basis(k: usize) -> DMatrix<f64> {
    let u = 1.0 / (k as f64).sqrt();
    let mut w = DVector::from_element(k, u);
    w[0] -= 1.0;
    let wn = w.norm_squared();
    let h = DMatrix::identity(k, k) - (&w * w.transpose()) * (2.0 / wn);
    h.columns(1, k - 1).into_owned()
}

struct FaceStep {
    d: DVector<f64>,
    rank_deficient: bool,
}

/// Least-squares step from `x` within the face spanned by `free`.
fn face_step(a: &DMatrix<f64>, b: &DVector<f64>, x: &DVector<f64>, free: &[usize]) -> FaceStep {
    let n = x.len();
    let k = free.len();
    let mut d = DVector::zeros(n);
    if k < 2 {
        return FaceStep {
            d,
            rank_deficient: false,
        };
    }
    let r = b - a * x;
    let z = sum_zero_basis(k);
    let af = a.select_columns(free);
    let bmat = &af * &z;
    let svd = bmat.svd(true, true);
    let smax = svd.singular_values.max();
    let tol = (a.nrows().max(k) as f64) * f64::EPSILON * smax;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    let y = if smax > 0.0 {
        svd.solve(&r, tol).expect("SVD computed with both factors")
    } else {
        DVector::zeros(k - 1)
    };
    let df = z * y;
    for (pos, &i) in free.iter().enumerate() {
        d[i] = df[pos];
    }
    FaceStep {
        d,
        rank_deficient: rank < k - 1,
    }
}

fn cost(a: &DMatrix<f64>, b: &DVector<f64>, x: &DVector<f64>) -> f64 {
    (a * x - b).norm_squared()
}

/// Minimizes `|A x - b|²` over the simplex in `R^n`, `n = A.ncols() ≥ 1`.
pub fn solve_simplex_lsq(a: &DMatrix<f64>, b: &DVector<f64>) -> SimplexSolution {
    let n = a.ncols();
    assert!(n > 0, "empty problem");
    assert_eq!(a.nrows(), b.len(), "A and b disagree in length");

    // start at the best vertex, lowest index on ties
    let mut best = 0;
    let mut best_cost = f64::INFINITY;
    for i in 0..n {
        let c = (a.column(i) - b).norm_squared();
        if c < best_cost {
            best = i;
            best_cost = c;
        }
    }
    let mut x = DVector::zeros(n);
    x[best] = 1.0;
    let mut free = vec![best];
    let mut face_done = false;
    let mut refined = false;
    let mut rejected: Vec<usize> = Vec::new();
    let mut flat = false;
    let max_iter = 100 + 50 * n;
    let mut iterations = 0;

    while iterations < max_iter {
        iterations += 1;
        if !face_done {
            let step = face_step(a, b, &x, &free);
            flat = step.rank_deficient;
            let d = step.d;
            // ratio test, alpha <= 1
            let mut alpha = 1.0;
            let mut blocking: Vec<usize> = Vec::new();
            for &i in &free {
                if d[i] < 0.0 {
                    let ai = x[i] / -d[i];
                    if ai < alpha {
                        alpha = ai;
                        blocking.clear();
                        blocking.push(i);
                    } else if ai == alpha && alpha < 1.0 {
                        blocking.push(i);
                    }
                }
            }
            if alpha > 0.0 {
                x += &d * alpha;
                rejected.clear();
            }
            if !blocking.is_empty() {
                for &i in &blocking {
                    x[i] = 0.0;
                }
                free.retain(|i| !blocking.contains(i));
                refined = false;
                continue;
            }
            // one refinement pass on the same face, then it is optimal
            if refined {
                face_done = true;
            } else {
                refined = true;
            }
            continue;
        }

        let g = gradient(a, b, &x);
        let nu = -free.iter().map(|&i| g[i]).sum::<f64>() / free.len() as f64;
        let scale = g.amax().max(f64::MIN_POSITIVE);
        let entering = (0..n)
            .filter(|i| !free.contains(i) && !rejected.contains(i))
            .map(|i| (i, g[i] + nu))
            .filter(|&(_, mu)| mu < -ADD_TOL * scale)
            .min_by(|p, q| p.1.total_cmp(&q.1).then(p.0.cmp(&q.0)));
        let Some((j, _)) = entering else { break };
        // a variable whose addition does not move x is not retried until x moves
        rejected.push(j);
        free.push(j);
        free.sort_unstable();
        face_done = false;
        refined = false;
    }
    if iterations >= max_iter {
        log::warn!("simplex least squares stopped at the iteration limit ({max_iter})");
    }

    for v in x.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let s = x.sum();
    x /= s;
    let g = gradient(a, b, &x);
    SimplexSolution {
        cost: cost(a, b, &x),
        kkt_residual: kkt_residual(g.as_slice(), x.as_slice()),
        flat_directions: flat,
        iterations,
        x: x.as_slice().to_vec(),
    }
}
