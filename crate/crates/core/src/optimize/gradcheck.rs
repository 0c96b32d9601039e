//! Finite-difference verification of the objective gradient.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::objective::{Layout, Objective};
use super::OptimizerConfig;
use crate::error::Result;
use crate::game::Game;
use crate::operator::CMatrix;
use crate::sample::gaussian_matrix;

pub const FD_STEP: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckFailure {
    pub point: usize,
    pub coordinate: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub points: usize,
    /// Worst `‖g − g_fd‖ / max(‖g‖, ‖g_fd‖)` over points.
    pub max_rel_error: f64,
    pub failures: Vec<GradCheckFailure>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.max_rel_error <= REL_TOL
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Compares the analytic gradient of the penalized objective with central
/// differences at `points` seeded random parameter points on a single space.
pub fn gradient_check(g: &Game, cfg: &OptimizerConfig, points: usize) -> Result<GradCheckReport> {
    cfg.validate()?;
    let layout = Layout {
        n: g.n(),
        k: g.k(),
        dim: cfg.dims.single()?,
    };
    let obj = Objective {
        game: g,
        layout,
        mode: cfg.mode,
        delta: cfg.delta_f64(),
        penalty: cfg.penalty,
        margin: cfg.margin,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut max_rel: f64 = 0.0;
    let mut failures = Vec::new();
    for p in 0..points {
        let d = layout.dim;
        let mats: Vec<CMatrix> = (0..layout.matrices())
            .map(|_| gaussian_matrix(&mut rng, d, d, 1.0 / (d as f64).sqrt()))
            .collect();
        let theta = layout.pack(&mats);
        let analytic = obj.evaluate(&theta, true)?.gradient.expect("requested");
        let mut numeric = vec![0.0; theta.len()];
        let mut probe = theta.clone();
        for (i, slot) in numeric.iter_mut().enumerate() {
            probe[i] = theta[i] + FD_STEP;
            let up = obj.evaluate(&probe, false)?.objective;
            probe[i] = theta[i] - FD_STEP;
            let down = obj.evaluate(&probe, false)?.objective;
            probe[i] = theta[i];
            *slot = (up - down) / (2.0 * FD_STEP);
        }
        let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, b)| a - b).collect();
        let scale = norm(&analytic).max(norm(&numeric));
        let rel = if scale == 0.0 { 0.0 } else { norm(&diff) / scale };
        max_rel = max_rel.max(rel);
        if rel > REL_TOL {
            for (i, dv) in diff.iter().enumerate() {
                if dv.abs() > REL_TOL * scale {
                    failures.push(GradCheckFailure {
                        point: p,
                        coordinate: i,
                        analytic: analytic[i],
                        numeric: numeric[i],
                    });
                }
            }
        }
    }
    Ok(GradCheckReport {
        points,
        max_rel_error: max_rel,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::make_chsh;
    use crate::optimize::{Dims, Mode};
    use crate::strategy::{maximally_entangled, qubit_observable, Povm};
    use num::BigRational;

    fn cfg(mode: Mode, d: usize) -> OptimizerConfig {
        OptimizerConfig {
            dims: Dims::Single(d),
            delta: BigRational::new(1.into(), 10.into()),
            mode,
            penalty: 10.0,
            seed: 7,
            ..Default::default()
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let g = make_chsh();
        for (mode, d) in [(Mode::Op, 2), (Mode::St, 3), (Mode::Unconstrained, 2)] {
            let rep = gradient_check(&g, &cfg(mode, d), 10).unwrap();
            assert!(rep.passed(), "{mode:?}: {} {:?}", rep.max_rel_error, rep.failures);
        }
    }

    #[test]
    fn penalty_gradient_vanishes_at_commuting_point() {
        let g = make_chsh();
        let layout = Layout { n: 2, k: 2, dim: 4 };
        let i2 = CMatrix::identity(2, 2);
        let mut mats = Vec::new();
        for (left, angles) in [(true, [0.0, 1.5]), (false, [0.7, -0.7])] {
            for t in angles {
                let p = Povm::from_observable(&qubit_observable(t)).unwrap();
                for e in p.effects() {
                    let r = crate::operator::sqrt_psd(e).unwrap().into_inner();
                    mats.push(if left { r.kronecker(&i2) } else { i2.kronecker(&r) });
                }
            }
        }
        mats.push(maximally_entangled(2).rho().as_matrix().clone() + CMatrix::identity(4, 4).scale(0.1));
        let theta = layout.pack(&mats);
        let with = Objective {
            game: &g,
            layout,
            mode: Mode::Op,
            delta: 0.1,
            penalty: 1e4,
            margin: 0.05,
        };
        let without = Objective {
            penalty: 0.0,
            ..with.clone()
        };
        let a = with.evaluate(&theta, true).unwrap();
        let b = without.evaluate(&theta, true).unwrap();
        assert!(a.defect_max < 1e-12);
        assert_eq!(a.gradient, b.gradient);
    }

    #[test]
    fn zero_direction_predicts_no_change() {
        let g = make_chsh();
        let layout = Layout { n: 2, k: 2, dim: 2 };
        let obj = Objective {
            game: &g,
            layout,
            mode: Mode::Op,
            delta: 0.1,
            penalty: 10.0,
            margin: 0.05,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mats: Vec<CMatrix> = (0..layout.matrices())
            .map(|_| gaussian_matrix(&mut rng, 2, 2, 0.7))
            .collect();
        let theta = layout.pack(&mats);
        let grad = obj.evaluate(&theta, true).unwrap().gradient.unwrap();
        let predicted: f64 = grad.iter().map(|gi| gi * 0.0).sum();
        assert_eq!(predicted, 0.0);
        assert_eq!(
            obj.evaluate(&theta, false).unwrap().objective,
            obj.evaluate(&theta, false).unwrap().objective
        );
    }
}
