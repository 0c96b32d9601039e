//! Smooth parametrization of strategies and the penalized objective with its
//! reverse-mode gradient.
//!
//! A POVM is parametrized by unconstrained matrices `M_a`:
//! `A_a = S^{-1/2}(M_a*M_a + (ε/k) I) S^{-1/2}` with `S = Σ_a M_a*M_a + ε I`,
//! which is PSD and exactly complete for every parameter point. A state is
//! `ρ = V*V / tr(V*V)`.
//!
//! Gradients use the convention `dL = Re tr(G* dX)`; for a complex
//! coordinate `z = u + iv` this gives `∂L/∂u = Re G`, `∂L/∂v = Im G`.

use num_complex::Complex64;

use crate::error::Result;
use crate::game::Game;
use crate::operator::{commutator_raw, eig_herm, herm_part, trace_product, CMatrix, HermMatrix, SpectralDecomp, State};
use crate::strategy::{MeasurementFamily, Povm, Strategy};

/// Ridge of the POVM parametrization.
pub const PARAM_RIDGE: f64 = 1e-8;
/// Eigenvalue floor inside the square-root derivative.
const SQRT_FLOOR: f64 = 1e-12;

/// Which commutation defect is penalized.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Op,
    St,
    Unconstrained,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Op => "op",
            Mode::St => "st",
            Mode::Unconstrained => "unconstrained",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "op" => Ok(Mode::Op),
            "st" => Ok(Mode::St),
            "unconstrained" | "none" => Ok(Mode::Unconstrained),
            other => Err(crate::Error::Config(format!("unknown mode `{other}`"))),
        }
    }
}

/// Forward pass of the POVM parametrization for one question.
pub(crate) struct PovmForward {
    s_eig: SpectralDecomp,
    t: CMatrix,
    shifted: Vec<CMatrix>,
    pub(crate) effects: Vec<CMatrix>,
}

pub(crate) fn povm_forward(ms: &[CMatrix]) -> Result<PovmForward> {
    let dim = ms[0].ncols();
    let k = ms.len() as f64;
    let id = CMatrix::identity(dim, dim);
    let grams: Vec<CMatrix> = ms.iter().map(|m| herm_part(&(m.adjoint() * m))).collect();
    let mut s = id.scale(PARAM_RIDGE);
    for g in &grams {
        s += g;
    }
    let s_eig = eig_herm(&HermMatrix::symmetrize(s))?;
    let t = s_eig.apply(|l| 1.0 / l.max(SQRT_FLOOR).sqrt()).into_inner();
    let shift = id.scale(PARAM_RIDGE / k);
    let shifted: Vec<CMatrix> = grams.iter().map(|g| g + &shift).collect();
    let effects = shifted.iter().map(|kk| herm_part(&(&t * kk * &t))).collect();
    Ok(PovmForward {
        s_eig,
        t,
        shifted,
        effects,
    })
}

/// Pulls gradients with respect to the effects back to the `M_a`.
pub(crate) fn povm_backward(fwd: &PovmForward, ms: &[CMatrix], grad_effects: &[CMatrix]) -> Vec<CMatrix> {
    let t = &fwd.t;
    let dim = t.nrows();
    let mut grad_t = CMatrix::zeros(dim, dim);
    let mut grad_k = Vec::with_capacity(ms.len());
    for (h, kk) in grad_effects.iter().zip(&fwd.shifted) {
        let h = herm_part(h);
        grad_t += &h * t * kk + kk * t * &h;
        grad_k.push(t * &h * t);
    }
    let grad_s = herm_part(&fwd.s_eig.loewner_pullback(
        |l| 1.0 / l.max(SQRT_FLOOR).sqrt(),
        |l| -0.5 * l.max(SQRT_FLOOR).powf(-1.5),
        &grad_t,
    ));
    ms.iter()
        .zip(grad_k)
        .map(|(m, gk)| {
            let gn = herm_part(&(gk + &grad_s));
            (m * gn).scale(2.0)
        })
        .collect()
}

/// `ρ = V*V / tr(V*V)`.
pub(crate) fn state_forward(v: &CMatrix) -> (CMatrix, f64) {
    let w = herm_part(&(v.adjoint() * v));
    let tr = w.trace().re;
    (w.unscale(tr), tr)
}

/// Pulls a gradient with respect to `ρ` back to `V`.
pub(crate) fn state_backward(v: &CMatrix, rho: &CMatrix, tr: f64, grad_rho: &CMatrix) -> CMatrix {
    let g = herm_part(grad_rho);
    let dim = g.nrows();
    let inner = crate::operator::real_inner(&g, rho);
    let gw = (g - CMatrix::identity(dim, dim).scale(inner)).unscale(tr);
    (v * gw).scale(2.0)
}

/// Dimensions of a flattened parameter vector over one shared space of dim `d`:
/// Alice's `M[x][a]`, then Bob's, then `V`, each `d×d` complex in row-major
/// order with interleaved real and imaginary parts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layout {
    pub n: usize,
    pub k: usize,
    pub dim: usize,
}

impl Layout {
    pub fn matrices(&self) -> usize {
        2 * self.n * self.k + 1
    }

    pub fn len(&self) -> usize {
        self.matrices() * self.dim * self.dim * 2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn unpack(&self, theta: &[f64]) -> Vec<CMatrix> {
        let d = self.dim;
        theta
            .chunks(2 * d * d)
            .map(|c| CMatrix::from_row_iterator(d, d, c.chunks(2).map(|p| Complex64::new(p[0], p[1]))))
            .collect()
    }

    pub fn pack(&self, mats: &[CMatrix]) -> Vec<f64> {
        let d = self.dim;
        let mut out = Vec::with_capacity(self.len());
        for m in mats {
            for i in 0..d {
                for j in 0..d {
                    out.push(m[(i, j)].re);
                    out.push(m[(i, j)].im);
                }
            }
        }
        out
    }
}

/// Penalized objective `val − λ·max(0, D − δ(1 − margin))²` on one shared space.
#[derive(Clone, Debug)]
pub struct Objective<'g> {
    pub game: &'g Game,
    pub layout: Layout,
    pub mode: Mode,
    pub delta: f64,
    pub penalty: f64,
    pub margin: f64,
}

/// Result of one objective evaluation.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub objective: f64,
    pub value: f64,
    /// Maximum over question pairs of the penalized defect (op or st); for
    /// unconstrained mode, the op defect.
    pub defect_max: f64,
    pub gradient: Option<Vec<f64>>,
}

struct Forward {
    alice: Vec<PovmForward>,
    bob: Vec<PovmForward>,
    alice_roots: Vec<Vec<(SpectralDecomp, CMatrix)>>,
    bob_roots: Vec<Vec<(SpectralDecomp, CMatrix)>>,
    rho: CMatrix,
    rho_tr: f64,
    game_op: CMatrix,
}

fn sqrt_decomp(m: &CMatrix) -> Result<(SpectralDecomp, CMatrix)> {
    let e = eig_herm(&HermMatrix::symmetrize(m.clone()))?;
    let r = e.apply(|l| l.max(0.0).sqrt()).into_inner();
    Ok((e, r))
}

fn sqrt_pullback(e: &SpectralDecomp, g: &CMatrix) -> CMatrix {
    e.loewner_pullback(|l| l.max(0.0).sqrt(), |l| 0.5 / l.max(SQRT_FLOOR).sqrt(), g)
}

/// Largest-modulus eigenpair of the Hermitian `iC`: `(‖C‖, ∂‖C‖/∂C)`.
fn commutator_norm_grad(c: &CMatrix) -> Result<(f64, CMatrix)> {
    let i = Complex64::new(0.0, 1.0);
    let h = HermMatrix::symmetrize(c * i);
    let e = eig_herm(&h)?;
    let (top, bottom) = (e.max_eigenvalue(), e.min_eigenvalue());
    let (lam, col) = if top.abs() >= bottom.abs() {
        (top, 0)
    } else {
        (bottom, e.dim() - 1)
    };
    let w = e.eigenvectors.column(col).into_owned();
    let sign = if lam >= 0.0 { 1.0 } else { -1.0 };
    // d|λ| = sign·Re(w* i dC w)  ⇒  G = −i·sign·w w*
    let g = (&w * w.adjoint()) * (-i * sign);
    Ok((lam.abs(), g))
}

impl<'g> Objective<'g> {
    fn forward(&self, mats: &[CMatrix]) -> Result<Forward> {
        let (n, k) = (self.layout.n, self.layout.k);
        let alice = (0..n)
            .map(|x| povm_forward(&mats[x * k..(x + 1) * k]))
            .collect::<Result<Vec<_>>>()?;
        let bob = (0..n)
            .map(|y| povm_forward(&mats[(n + y) * k..(n + y + 1) * k]))
            .collect::<Result<Vec<_>>>()?;
        let roots = |fams: &[PovmForward]| -> Result<Vec<Vec<(SpectralDecomp, CMatrix)>>> {
            fams.iter()
                .map(|f| f.effects.iter().map(sqrt_decomp).collect())
                .collect()
        };
        let alice_roots = roots(&alice)?;
        let bob_roots = roots(&bob)?;
        let (rho, rho_tr) = state_forward(&mats[2 * n * k]);
        let d = self.layout.dim;
        let mut game_op = CMatrix::zeros(d, d);
        for x in 0..n {
            for y in 0..n {
                let w = self.game.pi_f64(x, y);
                if w == 0.0 {
                    continue;
                }
                for a in 0..k {
                    for b in 0..k {
                        if !self.game.wins(x, y, a, b) {
                            continue;
                        }
                        let (ea, ra) = (&alice[x].effects[a], &alice_roots[x][a].1);
                        let (eb, rb) = (&bob[y].effects[b], &bob_roots[y][b].1);
                        game_op += (ra * eb * ra + rb * ea * rb).scale(0.5 * w);
                    }
                }
            }
        }
        Ok(Forward {
            alice,
            bob,
            alice_roots,
            bob_roots,
            rho,
            rho_tr,
            game_op,
        })
    }

    /// Worst defect over question pairs and, optionally, its gradient with
    /// respect to that pair's effects and `ρ`.
    fn defect(&self, fwd: &Forward, with_grad: bool) -> Result<(f64, Option<DefectGrad>)> {
        let (n, k) = (self.layout.n, self.layout.k);
        let use_state = self.mode == Mode::St;
        let mut worst = (f64::NEG_INFINITY, 0, 0);
        for x in 0..n {
            for y in 0..n {
                let mut total = 0.0;
                for a in 0..k {
                    for b in 0..k {
                        let c = commutator_raw(&fwd.alice[x].effects[a], &fwd.bob[y].effects[b]);
                        total += if use_state {
                            trace_product(&fwd.rho, &c).norm()
                        } else {
                            crate::strategy::skew_norm(&c)
                        };
                    }
                }
                if total > worst.0 {
                    worst = (total, x, y);
                }
            }
        }
        if !with_grad {
            return Ok((worst.0, None));
        }
        let (_, x, y) = worst;
        let d = self.layout.dim;
        let mut g = DefectGrad {
            x,
            y,
            alice: vec![CMatrix::zeros(d, d); k],
            bob: vec![CMatrix::zeros(d, d); k],
            rho: CMatrix::zeros(d, d),
        };
        for a in 0..k {
            for b in 0..k {
                let ea = &fwd.alice[x].effects[a];
                let eb = &fwd.bob[y].effects[b];
                let c = commutator_raw(ea, eb);
                let gc = if use_state {
                    let z = trace_product(&fwd.rho, &c);
                    let modulus = z.norm();
                    if modulus == 0.0 {
                        continue;
                    }
                    let u = z.conj() / modulus;
                    // d|z| = Re(u tr(ρ dC) + u tr(C dρ))
                    g.rho += herm_part(&(c.adjoint() * u.conj()));
                    fwd.rho.clone() * u.conj()
                } else {
                    commutator_norm_grad(&c)?.1
                };
                g.alice[a] += herm_part(&(&gc * eb - eb * &gc));
                g.bob[b] += herm_part(&(ea * &gc - &gc * ea));
            }
        }
        Ok((worst.0, Some(g)))
    }

    /// Evaluates the objective; the gradient is over the packed parameters.
    pub fn evaluate(&self, theta: &[f64], with_grad: bool) -> Result<Evaluation> {
        let mats = self.layout.unpack(theta);
        let fwd = self.forward(&mats)?;
        let value = trace_product(&fwd.rho, &fwd.game_op).re;
        let constrained = self.mode != Mode::Unconstrained;
        let threshold = self.delta * (1.0 - self.margin);
        let (defect_max, dgrad) = if constrained {
            self.defect(&fwd, with_grad)?
        } else {
            let probe = Objective {
                mode: Mode::Op,
                ..self.clone()
            };
            (probe.defect(&fwd, false)?.0, None)
        };
        let hinge = if constrained {
            (defect_max - threshold).max(0.0)
        } else {
            0.0
        };
        let objective = value - self.penalty * hinge * hinge;
        if !with_grad {
            return Ok(Evaluation {
                objective,
                value,
                defect_max,
                gradient: None,
            });
        }

        let (n, k, d) = (self.layout.n, self.layout.k, self.layout.dim);
        let mut ga = vec![vec![CMatrix::zeros(d, d); k]; n];
        let mut gb = vec![vec![CMatrix::zeros(d, d); k]; n];
        let mut g_rho = fwd.game_op.clone();
        let mut g_ra = vec![vec![CMatrix::zeros(d, d); k]; n];
        let mut g_rb = vec![vec![CMatrix::zeros(d, d); k]; n];
        for x in 0..n {
            for y in 0..n {
                let w = self.game.pi_f64(x, y);
                if w == 0.0 {
                    continue;
                }
                let h = fwd.rho.scale(0.5 * w);
                for a in 0..k {
                    for b in 0..k {
                        if !self.game.wins(x, y, a, b) {
                            continue;
                        }
                        let (ea, ra) = (&fwd.alice[x].effects[a], &fwd.alice_roots[x][a].1);
                        let (eb, rb) = (&fwd.bob[y].effects[b], &fwd.bob_roots[y][b].1);
                        // ra eb ra
                        g_ra[x][a] += &h * ra * eb + eb * ra * &h;
                        gb[y][b] += ra * &h * ra;
                        // rb ea rb
                        g_rb[y][b] += &h * rb * ea + ea * rb * &h;
                        ga[x][a] += rb * &h * rb;
                    }
                }
            }
        }
        if let Some(dg) = dgrad {
            if hinge > 0.0 {
                let s = -2.0 * self.penalty * hinge;
                for a in 0..k {
                    ga[dg.x][a] += dg.alice[a].scale(s);
                    gb[dg.y][a] += dg.bob[a].scale(s);
                }
                g_rho += dg.rho.scale(s);
            }
        }
        for x in 0..n {
            for a in 0..k {
                ga[x][a] += sqrt_pullback(&fwd.alice_roots[x][a].0, &g_ra[x][a]);
                gb[x][a] += sqrt_pullback(&fwd.bob_roots[x][a].0, &g_rb[x][a]);
            }
        }
        let mut grads: Vec<CMatrix> = Vec::with_capacity(self.layout.matrices());
        for x in 0..n {
            grads.extend(povm_backward(&fwd.alice[x], &mats[x * k..(x + 1) * k], &ga[x]));
        }
        for y in 0..n {
            grads.extend(povm_backward(&fwd.bob[y], &mats[(n + y) * k..(n + y + 1) * k], &gb[y]));
        }
        grads.push(state_backward(&mats[2 * n * k], &fwd.rho, fwd.rho_tr, &g_rho));
        Ok(Evaluation {
            objective,
            value,
            defect_max,
            gradient: Some(self.layout.pack(&grads)),
        })
    }

    /// Materializes the strategy at a parameter point.
    pub fn strategy(&self, theta: &[f64]) -> Result<Strategy> {
        let mats = self.layout.unpack(theta);
        let (n, k) = (self.layout.n, self.layout.k);
        let fam = |offset: usize| -> Result<MeasurementFamily> {
            let povms = (0..n)
                .map(|x| {
                    let f = povm_forward(&mats[(offset + x) * k..(offset + x + 1) * k])?;
                    Povm::new(f.effects.into_iter().map(HermMatrix::symmetrize).collect())
                })
                .collect::<Result<Vec<_>>>()?;
            MeasurementFamily::new(povms)
        };
        let (rho, _) = state_forward(&mats[2 * n * k]);
        Strategy::new(fam(0)?, fam(n)?, State::new(rho)?)
    }
}

struct DefectGrad {
    x: usize,
    y: usize,
    alice: Vec<CMatrix>,
    bob: Vec<CMatrix>,
    rho: CMatrix,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::make_chsh;
    use crate::sample::gaussian_matrix;
    use crate::strategy::{defects, game_value};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_theta(layout: &Layout, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mats: Vec<CMatrix> = (0..layout.matrices())
            .map(|_| gaussian_matrix(&mut rng, layout.dim, layout.dim, 1.0 / (layout.dim as f64).sqrt()))
            .collect();
        layout.pack(&mats)
    }

    #[test]
    fn parametrization_is_exactly_complete() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        for d in 1..6 {
            let ms: Vec<CMatrix> = (0..3).map(|_| gaussian_matrix(&mut rng, d, d, 1.0)).collect();
            let f = povm_forward(&ms).unwrap();
            let mut total = CMatrix::zeros(d, d);
            for e in &f.effects {
                total += e;
                let lmin = eig_herm(&HermMatrix::symmetrize(e.clone())).unwrap().min_eigenvalue();
                assert!(lmin >= -1e-14);
            }
            assert!((total - CMatrix::identity(d, d)).norm() < 1e-12);
        }
    }

    #[test]
    fn objective_value_matches_strategy_evaluation() {
        let g = make_chsh();
        let layout = Layout { n: 2, k: 2, dim: 3 };
        let obj = Objective {
            game: &g,
            layout,
            mode: Mode::Op,
            delta: 0.5,
            penalty: 10.0,
            margin: 0.05,
        };
        let theta = random_theta(&layout, 21);
        let ev = obj.evaluate(&theta, false).unwrap();
        let s = obj.strategy(&theta).unwrap();
        assert!((ev.value - game_value(&g, &s).unwrap()).abs() < 1e-10);
        assert!((ev.defect_max - defects(&s).op_max).abs() < 1e-10);
    }

    #[test]
    fn packing_round_trips() {
        let layout = Layout { n: 2, k: 3, dim: 2 };
        let theta = random_theta(&layout, 22);
        assert_eq!(layout.pack(&layout.unpack(&theta)), theta);
        assert_eq!(theta.len(), layout.len());
    }
}
