//! Least squares over the probability simplex.
//!
//! Every solver here minimizes `|| sum_j w_j p_j ||^2` subject to `w >= 0`,
//! `sum(w) = 1`, where the `p_j` are points in `R^k` stored column-major.
//! With `p_j = donor_j - target` this is the distance from the target to the
//! convex hull of the donors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inner solver selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerMethod {
    /// Wolfe's minimum-norm-point algorithm (fully corrective Frank-Wolfe).
    MinNormPoint,
    /// Accelerated projected gradient with adaptive restart.
    ProjectedGradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InnerConfig {
    pub method: InnerMethod,
    pub max_iter: usize,
    /// Convergence threshold on the objective (duality gap for
    /// `MinNormPoint`, successive change for `ProjectedGradient`).
    pub tol: f64,
}

impl Default for InnerConfig {
    fn default() -> Self {
        Self { method: InnerMethod::MinNormPoint, max_iter: 10_000, tol: 1e-10 }
    }
}

/// Column-major point set: `n` points of dimension `dim`.
#[derive(Debug, Clone, Copy)]
pub struct Points<'a> {
    data: &'a [f64],
    dim: usize,
}

impl<'a> Points<'a> {
    pub fn new(data: &'a [f64], dim: usize) -> Self {
        assert!(dim > 0 && data.len().is_multiple_of(dim), "point data must be a whole number of columns");
        Self { data, dim }
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, j: usize) -> &'a [f64] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    /// `sum_j w_j p_j`
    pub fn combine(&self, w: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.dim];
        for (j, &wj) in w.iter().enumerate() {
            if wj != 0.0 {
                for (xi, pi) in x.iter_mut().zip(self.point(j)) {
                    *xi += wj * pi;
                }
            }
        }
        x
    }

    pub fn objective(&self, w: &[f64]) -> f64 {
        norm2(&self.combine(w))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexSolution {
    pub weights: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

/// Minimize `||P w||^2` over the simplex with the configured method.
pub fn solve(points: Points<'_>, cfg: &InnerConfig) -> Result<SimplexSolution> {
    match points.len() {
        0 => Err(Error::SolverFailure("no points".into())),
        1 => Ok(SimplexSolution { weights: vec![1.0], objective: norm2(points.point(0)), iterations: 0 }),
        _ => match cfg.method {
            InnerMethod::MinNormPoint => min_norm_point(points, cfg),
            InnerMethod::ProjectedGradient => projected_gradient(points, cfg),
        },
    }
}

/// Affine minimizer of the corral: `min ||P_S a||^2` s.t. `sum(a) = 1`,
/// from `(P_S' P_S + 1 1') mu = 1`, `a = mu / sum(mu)`.
fn affine_minimizer(points: Points<'_>, corral: &[usize]) -> Option<Vec<f64>> {
    let m = corral.len();
    let mut a = vec![0.0; m * m];
    for r in 0..m {
        for c in 0..=r {
            let v = dot(points.point(corral[r]), points.point(corral[c])) + 1.0;
            a[r * m + c] = v;
            a[c * m + r] = v;
        }
    }
    let mu = cholesky_solve(&mut a, m, vec![1.0; m])?;
    let total: f64 = mu.iter().sum();
    if !total.is_finite() || total.abs() < f64::MIN_POSITIVE {
        return None;
    }
    Some(mu.into_iter().map(|x| x / total).collect())
}

/// Solve `A x = b` for symmetric positive definite `A` (overwritten).
fn cholesky_solve(a: &mut [f64], n: usize, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let scale = (0..n).map(|i| a[i * n + i]).fold(0.0f64, f64::max);
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if d <= 1e-14 * scale {
            return None;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i * n + k] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= a[k * n + i] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
    Some(b)
}

/// Wolfe's minimum-norm-point algorithm.
///
/// Starts from the lowest-norm point (lowest index on ties) and grows an
/// affinely independent corral; ties in the Frank-Wolfe vertex choice go to
/// the lowest index, so among equal-objective solutions the lowest-index
/// donors are preferred.
fn min_norm_point(points: Points<'_>, cfg: &InnerConfig) -> Result<SimplexSolution> {
    let n = points.len();
    let norms: Vec<f64> = (0..n).map(|j| norm2(points.point(j))).collect();
    let max_norm = norms.iter().copied().fold(0.0f64, f64::max);
    let gap_tol = cfg.tol.max(1e-14 * max_norm);
    const ZERO: f64 = 1e-15;

    let first = (0..n).fold(0, |best, j| if norms[j] < norms[best] { j } else { best });
    let mut corral = vec![first];
    let mut lambda = vec![1.0];
    let mut x = points.point(first).to_vec();

    let mut iterations = 0;
    loop {
        let xx = norm2(&x);
        let (vertex, xp) = (0..n)
            .map(|j| (j, dot(&x, points.point(j))))
            .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
        if xx - xp <= gap_tol || corral.contains(&vertex) {
            break;
        }
        if iterations >= cfg.max_iter {
            return Err(Error::SolverFailure(format!("min-norm-point did not converge in {} iterations", cfg.max_iter)));
        }
        iterations += 1;
        corral.push(vertex);
        lambda.push(0.0);

        let mut stalled = false;
        loop {
            let Some(alpha) = affine_minimizer(points, &corral) else {
                // Numerically dependent corral: drop the newest vertex and stop here.
                if corral.last() == Some(&vertex) && lambda.last() == Some(&0.0) {
                    corral.pop();
                    lambda.pop();
                    stalled = true;
                    break;
                }
                return Err(Error::SolverFailure("singular corral in min-norm-point".into()));
            };
            if alpha.iter().all(|&a| a > ZERO) {
                lambda = alpha;
                break;
            }
            // Move from lambda toward alpha until a coordinate hits zero.
            let mut theta = f64::INFINITY;
            let mut leaving = usize::MAX;
            for (i, (&l, &a)) in lambda.iter().zip(&alpha).enumerate() {
                if a <= ZERO && l - a > 0.0 {
                    let t = l / (l - a);
                    if t < theta {
                        theta = t;
                        leaving = i;
                    }
                }
            }
            if leaving == usize::MAX {
                lambda = alpha.into_iter().map(|a| a.max(0.0)).collect();
                break;
            }
            for (l, a) in lambda.iter_mut().zip(&alpha) {
                *l = (1.0 - theta) * *l + theta * a;
            }
            lambda[leaving] = 0.0;
            let mut keep = Vec::with_capacity(corral.len());
            let mut kept_lambda = Vec::with_capacity(corral.len());
            for (i, (&c, &l)) in corral.iter().zip(&lambda).enumerate() {
                if i != leaving && l > ZERO {
                    keep.push(c);
                    kept_lambda.push(l);
                }
            }
            let total: f64 = kept_lambda.iter().sum();
            corral = keep;
            lambda = kept_lambda.into_iter().map(|l| l / total).collect();
            if corral.len() == 1 {
                lambda = vec![1.0];
                break;
            }
        }
        if stalled {
            break;
        }

        x = vec![0.0; points.dim()];
        for (&c, &l) in corral.iter().zip(&lambda) {
            for (xi, pi) in x.iter_mut().zip(points.point(c)) {
                *xi += l * pi;
            }
        }
    }

    let mut weights = vec![0.0; n];
    for (&c, &l) in corral.iter().zip(&lambda) {
        weights[c] = l;
    }
    Ok(SimplexSolution { objective: points.objective(&weights), weights, iterations })
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let t = (cumulative - 1.0) / (i + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// FISTA with function-value restart, from uniform weights.
fn projected_gradient(points: Points<'_>, cfg: &InnerConfig) -> Result<SimplexSolution> {
    let n = points.len();
    let mut gram = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..=r {
            let v = dot(points.point(r), points.point(c));
            gram[r * n + c] = v;
            gram[c * n + r] = v;
        }
    }
    let quad = |w: &[f64]| -> f64 {
        let mut total = 0.0;
        for r in 0..n {
            total += w[r] * dot(&gram[r * n..(r + 1) * n], w);
        }
        total
    };
    // Frobenius norm bounds the top eigenvalue of the Gram matrix.
    let lipschitz = 2.0 * gram.iter().map(|g| g * g).sum::<f64>().sqrt();
    let mut w = vec![1.0 / n as f64; n];
    if lipschitz == 0.0 {
        return Ok(SimplexSolution { objective: 0.0, weights: w, iterations: 0 });
    }
    let step = 1.0 / lipschitz;
    let mut y = w.clone();
    let mut t = 1.0f64;
    let mut f_prev = quad(&w);
    let mut grad = vec![0.0; n];
    for iteration in 1..=cfg.max_iter {
        for r in 0..n {
            grad[r] = 2.0 * dot(&gram[r * n..(r + 1) * n], &y);
        }
        let trial: Vec<f64> = y.iter().zip(&grad).map(|(yi, gi)| yi - step * gi).collect();
        let next = project_simplex(&trial);
        let f_next = quad(&next);
        if f_next > f_prev {
            // Momentum overshot: restart from the last accepted iterate.
            if t == 1.0 {
                return Err(Error::SolverFailure("projected gradient step increased the objective".into()));
            }
            t = 1.0;
            y.clone_from(&w);
            continue;
        }
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let momentum = (t - 1.0) / t_next;
        for i in 0..n {
            y[i] = next[i] + momentum * (next[i] - w[i]);
        }
        let change = f_prev - f_next;
        w = next;
        f_prev = f_next;
        t = t_next;
        if change < cfg.tol {
            return Ok(SimplexSolution { objective: points.objective(&w), weights: w, iterations: iteration });
        }
    }
    Err(Error::SolverFailure(format!("projected gradient did not converge in {} iterations", cfg.max_iter)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(method: InnerMethod) -> InnerConfig {
        InnerConfig { method, ..InnerConfig::default() }
    }

    const METHODS: [InnerMethod; 2] = [InnerMethod::MinNormPoint, InnerMethod::ProjectedGradient];

    #[test]
    fn single_point_gets_all_weight() {
        let data = [0.3, -0.2];
        for m in METHODS {
            let sol = solve(Points::new(&data, 2), &cfg(m)).unwrap();
            assert_eq!(sol.weights, vec![1.0]);
        }
    }

    #[test]
    fn midpoint_of_two_points() {
        // target halfway between donors at +1 and -1
        let data = [1.0, 2.0, -1.0, -2.0];
        for m in METHODS {
            let sol = solve(Points::new(&data, 2), &cfg(m)).unwrap();
            assert!((sol.weights[0] - 0.5).abs() < 1e-6, "{m:?} {:?}", sol.weights);
            assert!(sol.objective < 1e-6);
        }
    }

    #[test]
    fn vertex_solution() {
        // hull is a segment not containing the origin; nearest point is p0
        let data = [1.0, 0.0, 2.0, 1.0];
        for m in METHODS {
            let sol = solve(Points::new(&data, 2), &cfg(m)).unwrap();
            assert!((sol.weights[0] - 1.0).abs() < 1e-6);
            assert!((sol.objective - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn duplicate_points_prefer_lowest_index() {
        let data = [1.0, 1.0, 1.0, 1.0, 3.0, 3.0];
        let sol = solve(Points::new(&data, 2), &cfg(InnerMethod::MinNormPoint)).unwrap();
        assert_eq!(sol.weights, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn interior_triangle() {
        // origin = 0.2 a + 0.3 b + 0.5 c
        let a = [1.0, 0.0];
        let b = [0.0, 1.0];
        let c = [-0.4, -0.6];
        let data: Vec<f64> = [a, b, c].concat();
        for m in METHODS {
            let sol = solve(Points::new(&data, 2), &cfg(m)).unwrap();
            for (got, want) in sol.weights.iter().zip([0.2, 0.3, 0.5]) {
                assert!((got - want).abs() < 1e-4, "{m:?} {:?}", sol.weights);
            }
        }
    }

    #[test]
    fn projection_lands_on_simplex() {
        let p = project_simplex(&[0.5, 2.0, -1.0]);
        assert_eq!(p, vec![0.0, 1.0, 0.0]);
        let p = project_simplex(&[0.2, 0.2, 0.2]);
        assert!(p.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-12));
    }

    #[test]
    fn min_norm_respects_iteration_budget() {
        let data = [1.0, 0.0, 0.0, 1.0, -0.4, -0.6];
        let tight = InnerConfig { max_iter: 1, ..InnerConfig::default() };
        assert!(matches!(solve(Points::new(&data, 2), &tight), Err(Error::SolverFailure(_))));
    }
}
