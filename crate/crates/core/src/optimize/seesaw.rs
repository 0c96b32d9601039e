//! See-saw over commuting tensor strategies `A ⊗ I`, `I ⊗ B`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ascent::ascend;
use super::objective::{povm_backward, povm_forward, Layout};
use super::{optimal_state, pick_best, pool_map, BoundReport, OptimizerConfig};
use crate::error::Result;
use crate::game::Game;
use crate::operator::{real_inner, CMatrix, HermMatrix, State};
use crate::sample::gaussian_matrix;
use crate::strategy::{defects, game_value, tensor_commuting_strategy, MeasurementFamily, Povm, Strategy};

fn family(params: &[CMatrix], n: usize, k: usize) -> Result<MeasurementFamily> {
    let povms = (0..n)
        .map(|x| {
            let f = povm_forward(&params[x * k..(x + 1) * k])?;
            Povm::new(f.effects.into_iter().map(HermMatrix::symmetrize).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    MeasurementFamily::new(povms)
}

/// `tr_B((I ⊗ B) ρ)` for `left`, `tr_A((A ⊗ I) ρ)` otherwise.
fn partial_against(rho: &CMatrix, other: &CMatrix, da: usize, db: usize, left: bool) -> CMatrix {
    if left {
        CMatrix::from_fn(da, da, |i, i2| {
            let mut s = num_complex::Complex64::new(0.0, 0.0);
            for j in 0..db {
                for j2 in 0..db {
                    s += other[(j, j2)] * rho[(i * db + j2, i2 * db + j)];
                }
            }
            s
        })
    } else {
        CMatrix::from_fn(db, db, |j, j2| {
            let mut s = num_complex::Complex64::new(0.0, 0.0);
            for i in 0..da {
                for i2 in 0..da {
                    s += other[(i, i2)] * rho[(i2 * db + j, i * db + j2)];
                }
            }
            s
        })
    }
}

/// Local linear operators `Ĝ^x_a` whose pairing with one player's effects is
/// the game value, with the other player and the state held fixed.
fn local_operators(
    g: &Game,
    rho: &CMatrix,
    other: &MeasurementFamily,
    da: usize,
    db: usize,
    alice_side: bool,
) -> Vec<Vec<CMatrix>> {
    let (n, k) = (g.n(), g.k());
    let dim = if alice_side { da } else { db };
    let partials: Vec<Vec<CMatrix>> = (0..n)
        .map(|q| {
            (0..k)
                .map(|c| partial_against(rho, other.effect(q, c).as_matrix(), da, db, alice_side))
                .collect()
        })
        .collect();
    let mut out = vec![vec![CMatrix::zeros(dim, dim); k]; n];
    for (q, row) in out.iter_mut().enumerate() {
        for (c, acc) in row.iter_mut().enumerate() {
            for q2 in 0..n {
                let (x, y) = if alice_side { (q, q2) } else { (q2, q) };
                let w = g.pi_f64(x, y);
                if w == 0.0 {
                    continue;
                }
                for c2 in 0..k {
                    let (a, b) = if alice_side { (c, c2) } else { (c2, c) };
                    if g.wins(x, y, a, b) {
                        *acc += partials[q2][c2].scale(w);
                    }
                }
            }
        }
    }
    out
}

/// Maximizes `Σ_{q,c} ⟨Ĝ^q_c, A^q_c⟩` over one player's parameters.
fn player_step(
    params: Vec<CMatrix>,
    targets: &[Vec<CMatrix>],
    n: usize,
    k: usize,
    dim: usize,
    cfg: &OptimizerConfig,
) -> Result<Vec<CMatrix>> {
    let layout = Layout { n, k, dim };
    let f = |theta: &[f64], _: bool| -> Result<(f64, Option<Vec<f64>>)> {
        let ms = layout.unpack(theta);
        let mut val = 0.0;
        let mut grads = Vec::with_capacity(n * k);
        for q in 0..n {
            let m = &ms[q * k..(q + 1) * k];
            let fwd = povm_forward(m)?;
            for (e, t) in fwd.effects.iter().zip(&targets[q]) {
                val += real_inner(e, t);
            }
            grads.extend(povm_backward(&fwd, m, &targets[q]));
        }
        Ok((val, Some(layout.pack(&grads))))
    };
    let out = ascend(f, layout.pack(&params), &cfg.ascent(cfg.inner_iters), |_| {})?;
    Ok(layout.unpack(&out.theta))
}

fn run_restart(g: &Game, cfg: &OptimizerConfig, restart: usize) -> Result<BoundReport> {
    let (n, k) = (g.n(), g.k());
    let (da, db) = cfg.dims.pair();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(restart as u64);
    let mut pa: Vec<CMatrix> = (0..n * k)
        .map(|_| gaussian_matrix(&mut rng, da, da, 1.0 / (da as f64).sqrt()))
        .collect();
    let mut pb: Vec<CMatrix> = (0..n * k)
        .map(|_| gaussian_matrix(&mut rng, db, db, 1.0 / (db as f64).sqrt()))
        .collect();

    // Lifts the local families and pairs them with their optimal state.
    let lifted = |pa: &[CMatrix], pb: &[CMatrix]| -> Result<(Strategy, f64)> {
        let (a, b) = (family(pa, n, k)?, family(pb, n, k)?);
        let probe = tensor_commuting_strategy(&a, &b, State::maximally_mixed(da * db))?;
        let phi = optimal_state(g, probe.alice(), probe.bob())?.0;
        let s = probe.with_state(phi)?;
        let v = game_value(g, &s)?;
        Ok((s, v))
    };

    let (mut strat, mut value) = lifted(&pa, &pb)?;
    let mut trace = vec![value];
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < cfg.sweeps {
        sweeps += 1;
        let rho = strat.phi().rho().as_matrix().clone();
        let targets = local_operators(g, &rho, &family(&pb, n, k)?, da, db, true);
        pa = player_step(pa, &targets, n, k, da, cfg)?;
        let targets = local_operators(g, &rho, &family(&pa, n, k)?, da, db, false);
        pb = player_step(pb, &targets, n, k, db, cfg)?;
        let (s, v) = lifted(&pa, &pb)?;
        let gain = v - value;
        strat = s;
        value = v.max(value);
        trace.push(v);
        if gain < cfg.tol_conv {
            converged = true;
            break;
        }
    }
    Ok(BoundReport {
        value: game_value(g, &strat)?,
        defects: defects(&strat),
        feasible: false,
        strategy: strat,
        trace,
        restarts_used: 1,
        iterations: sweeps,
        converged,
    })
}

/// Best commuting tensor strategy over `cfg.restarts` seeded restarts on
/// `C^{d_A} ⊗ C^{d_B}`.
pub fn seesaw_commuting(g: &Game, cfg: &OptimizerConfig) -> Result<BoundReport> {
    cfg.validate()?;
    let delta = cfg.delta_f64();
    let runs = pool_map(cfg.restarts, |r| run_restart(g, cfg, r));
    let mut results = Vec::with_capacity(runs.len());
    let mut iterations = 0;
    for (i, run) in runs.into_iter().enumerate() {
        let mut rep = run?;
        rep.feasible = rep.defects.is_delta_op(delta);
        iterations += rep.iterations;
        results.push((i, rep));
    }
    let mut best = pick_best(results).expect("restarts ≥ 1");
    best.restarts_used = cfg.restarts;
    best.iterations = iterations;
    Ok(best)
}
