//! Backtracking gradient ascent.

use crate::error::Result;

/// Settings for one ascent run.
#[derive(Clone, Copy, Debug)]
pub struct AscentSettings {
    pub max_iters: usize,
    pub step_size: f64,
    pub tol_conv: f64,
    /// Successive small-improvement iterations before stopping.
    pub patience: usize,
}

#[derive(Clone, Debug)]
pub struct AscentOutcome {
    pub theta: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after each accepted step, starting with the initial point.
    pub trace: Vec<f64>,
}

const MAX_HALVINGS: usize = 40;
const MIN_STEP: f64 = 1e-14;

/// Maximizes `f` from `theta`. `f(θ, want_grad)` returns the objective and,
/// when requested, its gradient. A step that does not raise the objective is retried
/// at half length; an accepted step lets the next one grow by a factor 2 (up
/// to the base step times 64). `on_accept` sees every accepted point.
pub fn ascend<F, C>(f: F, theta: Vec<f64>, s: &AscentSettings, mut on_accept: C) -> Result<AscentOutcome>
where
    F: Fn(&[f64], bool) -> Result<(f64, Option<Vec<f64>>)>,
    C: FnMut(&[f64]),
{
    let mut theta = theta;
    let (mut obj, mut grad) = f(&theta, true)?;
    on_accept(&theta);
    let mut trace = vec![obj];
    let mut step = s.step_size;
    let max_step = s.step_size * 64.0;
    let mut quiet = 0usize;
    let mut iterations = 0usize;
    let mut converged = false;
    while iterations < s.max_iters {
        iterations += 1;
        let g = grad.take().expect("gradient requested");
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = theta.iter().zip(&g).map(|(t, gi)| t + step * gi).collect();
            match f(&trial, true) {
                Ok((val, gr)) if val > obj => {
                    accepted = Some((trial, val, gr));
                    break;
                }
                _ => {
                    step *= 0.5;
                    if step < MIN_STEP {
                        break;
                    }
                }
            }
        }
        let Some((t, val, gr)) = accepted else {
            converged = true;
            break;
        };
        let gain = val - obj;
        theta = t;
        obj = val;
        grad = gr;
        on_accept(&theta);
        trace.push(obj);
        step = (step * 2.0).min(max_step);
        if gain < s.tol_conv {
            quiet += 1;
            if quiet >= s.patience {
                converged = true;
                break;
            }
        } else {
            quiet = 0;
        }
    }
    Ok(AscentOutcome {
        theta,
        objective: obj,
        iterations,
        converged,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maximizes_concave_quadratic() {
        let f = |t: &[f64], _: bool| -> Result<(f64, Option<Vec<f64>>)> {
            let v = -(t[0] - 1.0).powi(2) - 4.0 * (t[1] + 2.0).powi(2);
            Ok((v, Some(vec![-2.0 * (t[0] - 1.0), -8.0 * (t[1] + 2.0)])))
        };
        let s = AscentSettings {
            max_iters: 5000,
            step_size: 0.5,
            tol_conv: 1e-14,
            patience: 25,
        };
        let out = ascend(f, vec![0.0, 0.0], &s, |_| {}).unwrap();
        assert!((out.theta[0] - 1.0).abs() < 1e-5);
        assert!((out.theta[1] + 2.0).abs() < 1e-5);
        assert!(out.trace.windows(2).all(|w| w[1] >= w[0]));
    }
}
