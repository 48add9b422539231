//! Nelder-Mead simplex minimizer used for evidence maximization.
//!
//! Non-finite objective values are treated as +inf, so infeasible regions
//! (box violations, failed factorizations) simply repel the simplex.

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    pub max_evals: usize,
    /// Stop once the spread of function values across the simplex falls below this.
    pub f_tol: f64,
    /// ...and the simplex diameter falls below this.
    pub x_tol: f64,
    /// Initial edge length along each axis.
    pub step: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions { max_evals: 400, f_tol: 1e-7, x_tol: 1e-5, step: 1.0 }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
}

pub fn minimize<F>(mut f: F, x0: &[f64], opts: &SimplexOptions) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += opts.step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| eval(x, &mut evals)).collect();
    let mut converged = false;

    while evals < opts.max_evals {
        // stable sort: ties keep their previous order, which keeps runs reproducible
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = values[n] - values[0];
        let diameter = simplex[1..]
            .iter()
            .map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if values[0].is_finite() && spread <= opts.f_tol && diameter <= opts.x_tol {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..n).map(|d| simplex[..n].iter().map(|v| v[d]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&simplex[n]).map(|(c, w)| c + t * (c - w)).collect() };

        let reflected = along(1.0);
        let f_r = eval(&reflected, &mut evals);
        if f_r < values[0] {
            let expanded = along(2.0);
            let f_e = eval(&expanded, &mut evals);
            if f_e < f_r {
                simplex[n] = expanded;
                values[n] = f_e;
            } else {
                simplex[n] = reflected;
                values[n] = f_r;
            }
            continue;
        }
        if f_r < values[n - 1] {
            simplex[n] = reflected;
            values[n] = f_r;
            continue;
        }
        let (contracted, f_c) = if f_r < values[n] {
            let c = along(0.5);
            let fc = eval(&c, &mut evals);
            (c, fc)
        } else {
            let c = along(-0.5);
            let fc = eval(&c, &mut evals);
            (c, fc)
        };
        if f_c < values[n].min(f_r) {
            simplex[n] = contracted;
            values[n] = f_c;
            continue;
        }
        // shrink toward the best vertex
        for i in 1..=n {
            let shrunk: Vec<f64> = simplex[i].iter().zip(&simplex[0]).map(|(x, b)| b + 0.5 * (x - b)).collect();
            values[i] = eval(&shrunk, &mut evals);
            simplex[i] = shrunk;
        }
    }

    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    Minimum { x: simplex[best].clone(), value: values[best], evals, converged }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let m = minimize(
            |x| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 2.0).powi(2) + 0.5 * (x[2] - 0.3).powi(2),
            &[0.0, 0.0, 0.0],
            &SimplexOptions { max_evals: 2000, f_tol: 1e-14, x_tol: 1e-8, step: 0.5 },
        );
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-5 && (m.x[1] + 2.0).abs() < 1e-5 && (m.x[2] - 0.3).abs() < 1e-5);
    }

    #[test]
    fn rosenbrock() {
        let m = minimize(
            |x| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2),
            &[-1.2, 1.0],
            &SimplexOptions { max_evals: 5000, f_tol: 1e-16, x_tol: 1e-10, step: 0.5 },
        );
        assert!((m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] - 1.0).abs() < 1e-4, "{:?}", m.x);
    }

    #[test]
    fn infeasible_region_repels() {
        // minimum at x = -1 but everything below 0 is infeasible
        let m = minimize(
            |x| if x[0] < 0.0 { f64::NAN } else { (x[0] + 1.0).powi(2) },
            &[2.0],
            &SimplexOptions { max_evals: 500, ..Default::default() },
        );
        assert!(m.value.is_finite());
        assert!(m.x[0] >= 0.0 && m.x[0] < 1e-3);
    }

    #[test]
    fn respects_eval_budget() {
        let mut calls = 0;
        let m = minimize(
            |x| {
                calls += 1;
                x[0].sin() + x[1].cos()
            },
            &[0.0, 0.0],
            &SimplexOptions { max_evals: 30, f_tol: 0.0, x_tol: 0.0, step: 1.0 },
        );
        // one iteration may overshoot by at most n evaluations (shrink)
        assert!(m.evals <= 32);
        assert_eq!(m.evals, calls);
    }
}
