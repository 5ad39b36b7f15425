//! Derivative-free simplex minimization.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    pub max_iterations: usize,
    /// Spread of objective values across the simplex that counts as converged.
    pub f_tolerance: f64,
    /// Initial simplex offsets, relative to each starting coordinate.
    pub relative_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { max_iterations: 500, f_tolerance: 1e-4, relative_step: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    /// Best objective value after each iteration.
    pub history: Vec<(Vec<f64>, f64)>,
}

/// Minimizes `objective` from `x0` with the standard reflection (1),
/// expansion (2), contraction (1/2) and shrink (1/2) coefficients.
///
/// Non-finite objective values are treated as +infinity, which lets callers
/// encode box constraints. On hitting the iteration cap the best vertex is
/// returned inside [`Error::NotConverged`].
pub fn minimize<F>(mut objective: F, x0: &[f64], options: &NelderMeadOptions) -> Result<NelderMeadResult>
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = x0.len();
    if dim == 0 {
        return Err(Error::Domain("cannot minimize over zero parameters".into()));
    }
    let mut evaluations = 0;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        let v = objective(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    simplex.push((x0.to_vec(), eval(x0)));
    for i in 0..dim {
        let mut x = x0.to_vec();
        let step = if x[i] != 0.0 { options.relative_step * x[i] } else { options.relative_step };
        x[i] += step;
        let f = eval(&x);
        simplex.push((x, f));
    }

    let order = |s: &mut Vec<(Vec<f64>, f64)>| {
        // ties broken lexicographically so results do not depend on insertion order
        s.sort_by(|a, b| {
            a.1.total_cmp(&b.1).then_with(|| {
                a.0.iter()
                    .zip(&b.0)
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
        })
    };

    let mut history = Vec::new();
    order(&mut simplex);
    for iteration in 1..=options.max_iterations {
        let best = simplex[0].1;
        let worst = simplex[dim].1;
        if (worst - best).abs() <= options.f_tolerance && worst.is_finite() {
            history.push(simplex[0].clone());
            let (x, f) = simplex.swap_remove(0);
            return Ok(NelderMeadResult { x, f, iterations: iteration - 1, evaluations, history });
        }

        let centroid: Vec<f64> = (0..dim)
            .map(|j| simplex[..dim].iter().map(|(x, _)| x[j]).sum::<f64>() / dim as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&simplex[dim].0).map(|(c, w)| c + t * (c - w)).collect()
        };

        let xr = along(1.0);
        let fr = eval(&xr);
        if fr < simplex[0].1 {
            let xe = along(2.0);
            let fe = eval(&xe);
            simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[dim - 1].1 {
            simplex[dim] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[dim].1 {
                let xc = along(0.5);
                let fc = eval(&xc);
                (xc, fc)
            } else {
                let xc = along(-0.5);
                let fc = eval(&xc);
                (xc, fc)
            };
            if fc < simplex[dim].1.min(fr) {
                simplex[dim] = (xc, fc);
            } else {
                let x_best = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    let x: Vec<f64> = x_best.iter().zip(&vertex.0).map(|(b, v)| b + 0.5 * (v - b)).collect();
                    let f = eval(&x);
                    *vertex = (x, f);
                }
            }
        }
        order(&mut simplex);
        history.push(simplex[0].clone());
    }
    let (x, f) = simplex.swap_remove(0);
    Err(Error::NotConverged {
        what: "Nelder-Mead",
        iterations: options.max_iterations,
        best_objective: f,
        best_point: x,
    })
}
