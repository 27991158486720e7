//! Nelder-Mead simplex search with dimension-adaptive coefficients.

use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Minimize `f` starting from `x0`.
///
/// The initial simplex is `x0` plus `step` along each axis. Stops when the
/// spread of function values across the simplex is at most `tol`, or after
/// `max_evals` evaluations (returning the best vertex, `converged = false`).
/// Coefficients follow the Gao-Han adaptive scheme, which keeps the search
/// from stalling in higher dimensions.
pub fn minimize<F>(mut f: F, x0: &[f64], step: f64, max_evals: usize, tol: f64) -> Result<NelderMeadResult>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let n = x0.len();
    let mut evaluations = 0;
    let mut eval = |x: &[f64], evaluations: &mut usize| -> Result<f64> {
        *evaluations += 1;
        let v = f(x)?;
        Ok(if v.is_nan() { f64::INFINITY } else { v })
    };

    if n == 0 {
        let value = eval(x0, &mut evaluations)?;
        return Ok(NelderMeadResult { x: Vec::new(), value, evaluations, converged: true });
    }

    let nf = n as f64;
    // reflection, expansion, contraction, shrink
    let (alpha, beta, gamma, delta) = (1.0, 1.0 + 2.0 / nf, 0.75 - 1.0 / (2.0 * nf), 1.0 - 1.0 / nf);
    let gamma = gamma.max(0.25);
    let delta = delta.max(0.5);

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let v0 = eval(x0, &mut evaluations)?;
    simplex.push((x0.to_vec(), v0));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        let v = eval(&x, &mut evaluations)?;
        simplex.push((x, v));
    }

    let mut converged = false;
    loop {
        // Stable sort keeps earlier vertices first on ties.
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if (worst - best).abs() <= tol {
            converged = true;
            break;
        }
        if evaluations >= max_evals {
            break;
        }

        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / nf;
            }
        }
        let toward = |coef: f64, from: &[f64]| -> Vec<f64> {
            centroid.iter().zip(from).map(|(c, w)| c + coef * (c - w)).collect()
        };

        let worst_x = simplex[n].0.clone();
        let reflected = toward(alpha, &worst_x);
        let fr = eval(&reflected, &mut evaluations)?;
        let second_worst = simplex[n - 1].1;

        if fr < best {
            let expanded = toward(alpha * beta, &worst_x);
            let fe = eval(&expanded, &mut evaluations)?;
            simplex[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
            continue;
        }
        if fr < second_worst {
            simplex[n] = (reflected, fr);
            continue;
        }
        let (contracted, fc) = if fr < worst {
            let x = toward(alpha * gamma, &worst_x);
            let v = eval(&x, &mut evaluations)?;
            (x, v)
        } else {
            let x = toward(-gamma, &worst_x);
            let v = eval(&x, &mut evaluations)?;
            (x, v)
        };
        if fc < fr.min(worst) {
            simplex[n] = (contracted, fc);
            continue;
        }

        let anchor = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x: Vec<f64> = anchor.iter().zip(&vertex.0).map(|(a, xi)| a + delta * (xi - a)).collect();
            let v = eval(&x, &mut evaluations)?;
            *vertex = (x, v);
        }
    }

    let (x, value) = simplex.swap_remove(0);
    Ok(NelderMeadResult { x, value, evaluations, converged })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let r = minimize(|x| Ok((x[0] - 1.0).powi(2) + 2.0 * (x[1] + 0.5).powi(2)), &[0.0, 0.0], 0.5, 2000, 1e-14)
            .unwrap();
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-5 && (r.x[1] + 0.5).abs() < 1e-5, "{:?}", r.x);
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| Ok(100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2));
        let r = minimize(f, &[-1.2, 1.0], 0.5, 5000, 1e-16).unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-3 && (r.x[1] - 1.0).abs() < 1e-3, "{:?}", r.x);
    }

    #[test]
    fn budget_stops_search() {
        let r = minimize(|x| Ok(x.iter().map(|v| (v - 3.0).powi(2)).sum()), &[0.0; 5], 1.0, 20, 0.0).unwrap();
        assert!(!r.converged);
        assert!(r.evaluations <= 20 + 5 + 2);
    }

    #[test]
    fn deterministic() {
        let f = |x: &[f64]| Ok(x.iter().enumerate().map(|(i, v)| (i as f64 + 1.0) * v.abs()).sum());
        let a = minimize(f, &[1.0, -2.0, 0.5], 0.3, 300, 1e-12).unwrap();
        let b = minimize(f, &[1.0, -2.0, 0.5], 0.3, 300, 1e-12).unwrap();
        assert_eq!(a, b);
    }
}
