//! Lower bounds on game values: exact classical values, optimal states,
//! see-saw over commuting tensor strategies, and penalized search for
//! δ-almost-commuting strategies on a single space.

mod ascent;
mod constrained;
mod gradcheck;
mod objective;
mod seesaw;

use num::{BigRational, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::game::Game;
use crate::operator::{eig_herm, CVector, State};
use crate::strategy::{game_operator, DefectReport, MeasurementFamily, Strategy};
use crate::textfmt::{format_rational_pq, format_sig};

pub use ascent::{ascend, AscentOutcome, AscentSettings};
pub use constrained::optimize_delta;
pub use gradcheck::{gradient_check, GradCheckFailure, GradCheckReport};
pub use objective::{Evaluation, Layout, Mode, Objective, PARAM_RIDGE};
pub use seesaw::seesaw_commuting;

/// Largest `k^(2n)` the classical enumeration accepts.
pub const CLASSICAL_BUDGET: u64 = 10_000_000;

/// Hilbert-space dimensions of a search.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dims {
    Single(usize),
    Pair(usize, usize),
}

impl Dims {
    pub fn single(&self) -> Result<usize> {
        match *self {
            Dims::Single(d) => Ok(d),
            Dims::Pair(a, b) if a == b => Ok(a),
            Dims::Pair(..) => Err(Error::Config("expected a single dimension".into())),
        }
    }

    pub fn pair(&self) -> (usize, usize) {
        match *self {
            Dims::Single(d) => (d, d),
            Dims::Pair(a, b) => (a, b),
        }
    }
}

impl std::str::FromStr for Dims {
    type Err = Error;

    /// `d` or `dA,dB` (also `dAxdB`).
    fn from_str(s: &str) -> Result<Self> {
        let parse = |t: &str| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("bad dimension `{t}`")))
        };
        match s.split_once([',', 'x']) {
            Some((a, b)) => Ok(Dims::Pair(parse(a)?, parse(b)?)),
            None => Ok(Dims::Single(parse(s)?)),
        }
    }
}

#[derive(Clone, Debug)]
pub struct OptimizerConfig {
    pub seed: u64,
    pub restarts: usize,
    pub max_iters: usize,
    /// Base step of the backtracking ascent.
    pub step_size: f64,
    /// Penalty weight `λ_pen`.
    pub penalty: f64,
    pub dims: Dims,
    pub delta: BigRational,
    pub mode: Mode,
    pub tol_conv: f64,
    /// The penalty targets `δ(1 − margin)`.
    pub margin: f64,
    /// Ascent iterations per player step in see-saw sweeps.
    pub inner_iters: usize,
    /// See-saw sweeps per restart.
    pub sweeps: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            seed: 0,
            restarts: 4,
            max_iters: 2000,
            step_size: 0.05,
            penalty: 1e4,
            dims: Dims::Single(2),
            delta: BigRational::zero(),
            mode: Mode::Op,
            tol_conv: 1e-9,
            margin: 0.05,
            inner_iters: 200,
            sweeps: 50,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::Config("restarts must be at least 1".into()));
        }
        if self.delta < BigRational::zero() {
            return Err(Error::Config("delta must be nonnegative".into()));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::Config("step size must be positive".into()));
        }
        if !(self.penalty >= 0.0 && (0.0..1.0).contains(&self.margin)) {
            return Err(Error::Config("penalty must be nonnegative and margin in [0, 1)".into()));
        }
        let (a, b) = self.dims.pair();
        if a == 0 || b == 0 {
            return Err(Error::Config("dimensions must be at least 1".into()));
        }
        Ok(())
    }

    pub fn delta_f64(&self) -> f64 {
        self.delta.to_f64().unwrap_or(f64::INFINITY)
    }

    pub(crate) fn ascent(&self, max_iters: usize) -> AscentSettings {
        AscentSettings {
            max_iters,
            step_size: self.step_size,
            tol_conv: self.tol_conv,
            patience: 25,
        }
    }
}

/// Best strategy found by a search.
#[derive(Clone, Debug)]
pub struct BoundReport {
    pub value: f64,
    pub strategy: Strategy,
    pub defects: DefectReport,
    /// Best value after each sweep or accepted step of the winning restart.
    pub trace: Vec<f64>,
    pub feasible: bool,
    pub restarts_used: usize,
    pub iterations: usize,
    pub converged: bool,
}

impl BoundReport {
    /// Line-oriented `key = value` summary.
    pub fn to_report(&self, delta: &BigRational, mode: Mode) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        kv("value", format_sig(self.value));
        kv("feasible", self.feasible.to_string());
        kv("delta", format_rational_pq(delta));
        kv("mode", mode.as_str().to_string());
        kv("defect_op_max", format_sig(self.defects.op_max));
        kv("defect_st_max", format_sig(self.defects.st_max));
        kv("restarts_used", self.restarts_used.to_string());
        kv("iterations", self.iterations.to_string());
        kv("converged", self.converged.to_string());
        out
    }
}

/// Deterministic answer functions achieving the classical value.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalOptimum {
    pub value: BigRational,
    pub alice: Vec<usize>,
    pub bob: Vec<usize>,
}

/// Exact classical value: Alice's answer functions are enumerated and Bob
/// best-responds question by question.
pub fn classical_value(g: &Game) -> Result<BigRational> {
    Ok(classical_optimum(g)?.value)
}

pub fn classical_optimum(g: &Game) -> Result<ClassicalOptimum> {
    let (n, k) = (g.n(), g.k());
    let size = (k as f64).powf(2.0 * n as f64);
    if size > CLASSICAL_BUDGET as f64 {
        return Err(Error::Budget(format!(
            "k^(2n) = {k}^{} exceeds {CLASSICAL_BUDGET}",
            2 * n
        )));
    }
    let mut f = vec![0usize; n];
    let mut best: Option<ClassicalOptimum> = None;
    loop {
        let mut total = BigRational::zero();
        let mut bob = Vec::with_capacity(n);
        for y in 0..n {
            let mut best_b = (BigRational::zero(), 0);
            for b in 0..k {
                let mut s = BigRational::zero();
                for (x, &a) in f.iter().enumerate() {
                    if g.wins(x, y, a, b) {
                        s += g.pi(x, y);
                    }
                }
                if b == 0 || s > best_b.0 {
                    best_b = (s, b);
                }
            }
            total += best_b.0;
            bob.push(best_b.1);
        }
        if best.as_ref().is_none_or(|o| total > o.value) {
            best = Some(ClassicalOptimum {
                value: total,
                alice: f.clone(),
                bob,
            });
        }
        // next answer function in lexicographic order
        let mut i = 0;
        while i < n {
            f[i] += 1;
            if f[i] < k {
                break;
            }
            f[i] = 0;
            i += 1;
        }
        if i == n {
            break;
        }
    }
    Ok(best.expect("at least one answer function"))
}

/// Top eigenvector of `𝔊(A, B)` as a pure state, with `λ_max(𝔊(A, B))`.
pub fn optimal_state(g: &Game, a: &MeasurementFamily, b: &MeasurementFamily) -> Result<(State, f64)> {
    let op = game_operator(g, a, b)?;
    let e = eig_herm(&op)?;
    let v: CVector = e.eigenvectors.column(0).into_owned();
    Ok((State::pure(&v)?, e.max_eigenvalue().clamp(0.0, 1.0)))
}

/// Merges per-restart results: the strictly feasible ones first, then the
/// higher value, then the lower restart index.
pub(crate) fn pick_best(results: Vec<(usize, BoundReport)>) -> Option<BoundReport> {
    results
        .into_iter()
        .min_by(|(i, a), (j, b)| {
            b.feasible
                .cmp(&a.feasible)
                .then(b.value.total_cmp(&a.value))
                .then(i.cmp(j))
        })
        .map(|(_, r)| r)
}

pub(crate) fn pool_map<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..count).into_par_iter().map(f).collect()
}
