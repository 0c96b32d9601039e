//! Penalized search for δ-almost-commuting strategies on one space.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ascent::ascend;
use super::objective::{Layout, Mode, Objective};
use super::{classical_optimum, pick_best, pool_map, BoundReport, OptimizerConfig};
use crate::error::{Error, Result};
use crate::game::Game;
use crate::operator::CMatrix;
use crate::sample::gaussian_matrix;
use crate::strategy::{defects, game_value, DefectReport};

/// Parameters of the classical optimum embedded as scalar projections: the
/// chosen answer gets `M = I`, the others `M = 0`; the state is `I/d`.
fn classical_start(g: &Game, layout: &Layout) -> Result<Vec<f64>> {
    let opt = classical_optimum(g)?;
    let d = layout.dim;
    let mut mats = Vec::with_capacity(layout.matrices());
    for answers in [&opt.alice, &opt.bob] {
        for &chosen in answers.iter() {
            for a in 0..layout.k {
                mats.push(if a == chosen {
                    CMatrix::identity(d, d)
                } else {
                    CMatrix::zeros(d, d)
                });
            }
        }
    }
    mats.push(CMatrix::identity(d, d));
    Ok(layout.pack(&mats))
}

fn random_start(layout: &Layout, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let d = layout.dim;
    let mats: Vec<CMatrix> = (0..layout.matrices())
        .map(|_| gaussian_matrix(rng, d, d, 1.0 / (d as f64).sqrt()))
        .collect();
    layout.pack(&mats)
}

fn is_feasible(mode: Mode, rep: &DefectReport, delta: f64) -> bool {
    match mode {
        Mode::St => rep.is_delta_st(delta),
        Mode::Op | Mode::Unconstrained => rep.is_delta_op(delta),
    }
}

fn run_restart(g: &Game, cfg: &OptimizerConfig, restart: usize) -> Result<BoundReport> {
    let d = cfg.dims.single()?;
    let layout = Layout {
        n: g.n(),
        k: g.k(),
        dim: d,
    };
    let delta = cfg.delta_f64();
    let obj = Objective {
        game: g,
        layout,
        mode: cfg.mode,
        delta,
        penalty: cfg.penalty,
        margin: cfg.margin,
    };
    let start = if restart == 0 && (g.k() as f64).powf(2.0 * g.n() as f64) <= super::CLASSICAL_BUDGET as f64 {
        classical_start(g, &layout)?
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(restart as u64);
        random_start(&layout, &mut rng)
    };

    let mut best: Option<(f64, Vec<f64>)> = None;
    let f = |theta: &[f64], grad: bool| -> Result<(f64, Option<Vec<f64>>)> {
        let ev = obj.evaluate(theta, grad)?;
        Ok((ev.objective, ev.gradient))
    };
    let out = ascend(f, start, &cfg.ascent(cfg.max_iters), |theta| {
        if let Ok(ev) = obj.evaluate(theta, false) {
            let fits = cfg.mode == Mode::Unconstrained || ev.defect_max < delta;
            if fits && best.as_ref().is_none_or(|(v, _)| ev.value > *v) {
                best = Some((ev.value, theta.to_vec()));
            }
        }
    })?;

    let chosen = best.map(|(_, t)| t).unwrap_or_else(|| out.theta.clone());
    let strategy = obj.strategy(&chosen)?;
    let rep = defects(&strategy);
    Ok(BoundReport {
        value: game_value(g, &strategy)?,
        feasible: is_feasible(cfg.mode, &rep, delta),
        defects: rep,
        strategy,
        trace: out.trace,
        restarts_used: 1,
        iterations: out.iterations,
        converged: out.converged,
    })
}

/// Maximizes the game value over strategies on one space of dimension `d`
/// subject, through a quadratic penalty, to the selected defect staying below
/// `δ`. The reported strategy is the best iterate whose penalized defect was
/// below `δ`, re-validated from scratch; `feasible` reflects that check.
pub fn optimize_delta(g: &Game, cfg: &OptimizerConfig) -> Result<BoundReport> {
    cfg.validate()?;
    let d = cfg.dims.single()?;
    if d < 1 {
        return Err(Error::Config("dimension must be at least 1".into()));
    }
    let runs = pool_map(cfg.restarts, |r| run_restart(g, cfg, r));
    let mut results = Vec::with_capacity(runs.len());
    let mut iterations = 0;
    for (i, run) in runs.into_iter().enumerate() {
        let rep = run?;
        iterations += rep.iterations;
        results.push((i, rep));
    }
    let mut best = pick_best(results).expect("restarts ≥ 1");
    best.restarts_used = cfg.restarts;
    best.iterations = iterations;
    Ok(best)
}
