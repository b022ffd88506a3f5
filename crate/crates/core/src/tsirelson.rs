//! Seesaw estimation of `C(I, d, t)`: the largest value over local POVMs in
//! dimension `d` of the sum of the `t` largest Bell-operator eigenvalues.
//! `t = 1` is the dimension-restricted Tsirelson bound.
//!
//! Each restart alternates three monotone steps. With the assemblages fixed,
//! the best rank-`t` projector `P` is the span of the top `t` eigenvectors
//! of `H`. With `P` and Bob fixed, `tr(PH)` is linear in each of Alice's
//! POVMs, and likewise for Bob. The objective therefore never decreases, and
//! the result is a lower estimate of the true maximum.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bell::{bell_operator, BellExpression, MeasurementAssemblage};
use crate::error::{Error, Result};
use crate::numerics::sample::{random_measurement, rng_from_seed};
use crate::numerics::{eigen_hermitian, eigen_hermitian_fast, ComplexMatrix, C64};

/// Largest local dimension the optimizer accepts.
pub const MAX_DIM: usize = 6;

/// Smallest eigenvalue of the shifted objectives, relative to their spread.
const SHIFT_MARGIN: f64 = 0.05;

/// Accepted-step decreases larger than this abort a restart.
const MONOTONE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeesawConfig {
    pub restarts: usize,
    pub max_iters: usize,
    /// Stop a restart once one seesaw round gains less than this.
    pub tol: f64,
    /// Cap on fixed-point iterations of each POVM update.
    pub inner_iters: usize,
    pub seed: u64,
}

impl Default for SeesawConfig {
    fn default() -> Self {
        Self {
            restarts: 50,
            max_iters: 500,
            tol: 1e-9,
            inner_iters: 200,
            seed: 0,
        }
    }
}

impl SeesawConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::InvalidArgument("restarts must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tol must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

/// Best value found, with the assemblages that reach it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TsirelsonEstimate {
    pub expression: String,
    pub value: f64,
    pub t: usize,
    pub dim: usize,
    pub best_alice: MeasurementAssemblage,
    pub best_bob: MeasurementAssemblage,
    /// Full spectrum of the best Bell operator, descending.
    pub top_eigenvalues: Vec<f64>,
    pub per_restart_values: Vec<f64>,
    pub converged: bool,
    /// Always "heuristic lower estimate": seesaw cannot certify optimality.
    pub kind: String,
    /// Objective after every accepted round, per restart.
    #[serde(skip)]
    pub traces: Vec<Vec<f64>>,
}

/// Sum of the `t` largest eigenvalues and the projector onto their span.
#[derive(Debug, Clone)]
pub struct KyFan {
    pub value: f64,
    pub projector: ComplexMatrix,
    pub vectors: Vec<Vec<C64>>,
}

pub fn ky_fan_value(h: &ComplexMatrix, t: usize) -> Result<KyFan> {
    let n = h.rows();
    if t == 0 || t > n {
        return Err(Error::BadRank { t, n });
    }
    let spec = eigen_hermitian(h)?;
    let vectors: Vec<Vec<C64>> = (0..t).map(|i| spec.vector(i)).collect();
    let mut projector = ComplexMatrix::zeros(n, n);
    for v in &vectors {
        projector += &ComplexMatrix::projector(v);
    }
    Ok(KyFan {
        value: spec.eigenvalues[..t].iter().sum(),
        projector,
        vectors,
    })
}

/// Result of one per-setting POVM optimization.
#[derive(Debug, Clone)]
pub struct PovmUpdate {
    pub povm: Vec<ComplexMatrix>,
    /// `Σ_a tr(M_a K_a)` for the returned POVM.
    pub objective: f64,
    /// Same quantity for the starting POVM.
    pub start_objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn linear_objective(k: &[ComplexMatrix], m: &[ComplexMatrix]) -> f64 {
    k.iter().zip(m).map(|(k, m)| m.trace_product(k).re).sum()
}

/// Increases `Σ_a tr(M_a K_a)` over POVMs starting from `start`.
///
/// Shifting every `K_a` by the same `c·I` changes the objective by the
/// constant `c·dim`, so `G_a = K_a + cI` is made positive definite and the
/// fixed-point map `M_a ← Λ^{-1/2} G_a M_a G_a Λ^{-1/2}`, `Λ = Σ_a G_a M_a G_a`,
/// is iterated. For positive `G_a` the objective is convex in the square-root
/// factors of the POVM and each step maximizes its linearization, so the
/// objective cannot decrease; steps that do (rounding) are rejected.
pub fn optimal_povm_update(k: &[ComplexMatrix], start: &[ComplexMatrix], inner_iters: usize, tol: f64) -> Result<PovmUpdate> {
    if k.is_empty() || k.len() != start.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} objective operators for {} POVM elements",
            k.len(),
            start.len()
        )));
    }
    let dim = k[0].rows();
    if k.iter().chain(start).any(|m| m.rows() != dim || m.cols() != dim) {
        return Err(Error::DimensionMismatch("objective and POVM sizes differ".into()));
    }
    let (mut low, mut high) = (f64::INFINITY, f64::NEG_INFINITY);
    for ka in k {
        if !ka.is_hermitian(1e-9 * ka.max_abs().max(1.0)) {
            return Err(Error::NonHermitian(ka.hermitian_defect()));
        }
        let ev = eigen_hermitian(ka)?.eigenvalues;
        high = high.max(ev[0]);
        low = low.min(ev[dim - 1]);
    }
    // A small margin would make G nearly singular, and rounding in Λ^{-1/2}
    // then grows like cond(G)²; a large one slows the iteration down.
    let spread = high - low;
    let shift = -low + if spread > 0.0 { SHIFT_MARGIN * spread } else { 1.0 };
    let g: Vec<ComplexMatrix> = k.iter().map(|ka| ka.add_identity(shift).hermitize()).collect();

    let start_objective = linear_objective(k, start);
    // The fixed point map preserves ranks and can idle near saddle points,
    // so a run from the maximally mixed POVM competes with the warm start.
    let mixed = vec![ComplexMatrix::identity(dim).scale_real(1.0 / k.len() as f64); k.len()];
    let warm = fixed_point(k, &g, start.to_vec(), inner_iters, tol)?;
    let cold = fixed_point(k, &g, mixed, inner_iters, tol)?;
    let (m, value, iterations, converged) = if cold.1 > warm.1 { cold } else { warm };
    Ok(PovmUpdate {
        povm: m,
        objective: value,
        start_objective,
        iterations,
        converged,
    })
}

type FixedPoint = (Vec<ComplexMatrix>, f64, usize, bool);

fn fixed_point(k: &[ComplexMatrix], g: &[ComplexMatrix], mut m: Vec<ComplexMatrix>, inner_iters: usize, tol: f64) -> Result<FixedPoint> {
    let dim = g[0].rows();
    let mut value = linear_objective(k, &m);
    let mut converged = false;
    let mut iterations = 0;
    let slack = 1e-13 * (1.0 + value.abs());
    while iterations < inner_iters {
        iterations += 1;
        let w: Vec<ComplexMatrix> = g.iter().zip(&m).map(|(ga, ma)| &(ga * ma) * ga).collect();
        let mut lambda = ComplexMatrix::zeros(dim, dim);
        for wa in &w {
            lambda += wa;
        }
        let spec = eigen_hermitian(&lambda.hermitize())?;
        let top = spec.eigenvalues[0];
        let bottom = spec.eigenvalues[dim - 1];
        if !(bottom > 1e-14 * top) {
            break;
        }
        let inv_sqrt = spec.reassemble(|l| 1.0 / l.sqrt());
        let next: Vec<ComplexMatrix> = w.iter().map(|wa| (&(&inv_sqrt * wa) * &inv_sqrt).hermitize()).collect();
        let next_value = linear_objective(k, &next);
        if next_value < value - slack {
            converged = true;
            break;
        }
        let gain = next_value - value;
        m = next;
        value = next_value.max(value);
        if gain <= tol {
            converged = true;
            break;
        }
    }
    Ok((m, value, iterations, converged))
}

/// `Tr_B[(I ⊗ N) P]` for `P = Σ_k |ψ_k⟩⟨ψ_k|`, i.e. `Σ_k Ψ_k Nᵀ Ψ_k†` with
/// `Ψ_k` the `dA × dB` coefficient matrix of `ψ_k`.
pub(crate) fn alice_conditional(psis: &[ComplexMatrix], n: &ComplexMatrix) -> ComplexMatrix {
    let nt = n.transpose();
    let mut out = ComplexMatrix::zeros(psis[0].rows(), psis[0].rows());
    for psi in psis {
        out += &(&(psi * &nt) * &psi.adjoint());
    }
    out.hermitize()
}

/// `Tr_A[(M ⊗ I) P] = Σ_k Ψ_kᵀ Mᵀ conj(Ψ_k)`.
pub(crate) fn bob_conditional(psis: &[ComplexMatrix], m: &ComplexMatrix) -> ComplexMatrix {
    let mt = m.transpose();
    let mut out = ComplexMatrix::zeros(psis[0].cols(), psis[0].cols());
    for psi in psis {
        out += &(&(&psi.transpose() * &mt) * &psi.conj());
    }
    out.hermitize()
}

#[derive(Debug, Clone)]
pub(crate) struct RestartOutcome {
    pub value: f64,
    pub alice: MeasurementAssemblage,
    pub bob: MeasurementAssemblage,
    pub spectrum: Vec<f64>,
    pub trace: Vec<f64>,
    pub converged: bool,
}

fn top_vectors(expr: &BellExpression, alice: &MeasurementAssemblage, bob: &MeasurementAssemblage, t: usize) -> Result<(f64, Vec<ComplexMatrix>)> {
    let h = bell_operator(expr, alice, bob)?;
    let spec = eigen_hermitian_fast(&h.matrix)?;
    let value = spec.eigenvalues[..t].iter().sum();
    let psis = (0..t)
        .map(|k| ComplexMatrix::from_vec(alice.dim(), bob.dim(), spec.vector(k)).expect("dA·dB entries"))
        .collect();
    Ok((value, psis))
}

/// Runs the seesaw from given assemblages until the gain drops below `tol`.
pub(crate) fn refine(
    expr: &BellExpression,
    t: usize,
    mut alice: MeasurementAssemblage,
    mut bob: MeasurementAssemblage,
    cfg: &SeesawConfig,
) -> Result<RestartOutcome> {
    let s = expr.scenario();
    let (mut value, mut psis) = top_vectors(expr, &alice, &bob, t)?;
    let mut trace = vec![value];
    let mut converged = false;
    let inner_tol = cfg.tol * 1e-2;
    for _ in 0..cfg.max_iters {
        let (prev_alice, prev_bob) = (alice.clone(), bob.clone());

        let bob_cond: Vec<Vec<ComplexMatrix>> = (0..s.ny)
            .map(|y| (0..s.nb).map(|b| alice_conditional(&psis, bob.element(y, b))).collect())
            .collect();
        for x in 0..s.nx {
            let k: Vec<ComplexMatrix> = (0..s.na)
                .map(|a| {
                    let mut acc = ComplexMatrix::zeros(alice.dim(), alice.dim());
                    for y in 0..s.ny {
                        for b in 0..s.nb {
                            let c = expr.coeff(x, y, a, b);
                            if c != 0.0 {
                                acc.add_scaled(&bob_cond[y][b], C64::new(c, 0.0));
                            }
                        }
                    }
                    acc
                })
                .collect();
            let upd = optimal_povm_update(&k, &alice.povms()[x], cfg.inner_iters, inner_tol)?;
            alice.set_setting(x, upd.povm);
        }

        let alice_cond: Vec<Vec<ComplexMatrix>> = (0..s.nx)
            .map(|x| (0..s.na).map(|a| bob_conditional(&psis, alice.element(x, a))).collect())
            .collect();
        for y in 0..s.ny {
            let k: Vec<ComplexMatrix> = (0..s.nb)
                .map(|b| {
                    let mut acc = ComplexMatrix::zeros(bob.dim(), bob.dim());
                    for x in 0..s.nx {
                        for a in 0..s.na {
                            let c = expr.coeff(x, y, a, b);
                            if c != 0.0 {
                                acc.add_scaled(&alice_cond[x][a], C64::new(c, 0.0));
                            }
                        }
                    }
                    acc
                })
                .collect();
            let upd = optimal_povm_update(&k, &bob.povms()[y], cfg.inner_iters, inner_tol)?;
            bob.set_setting(y, upd.povm);
        }

        let (next, next_psis) = top_vectors(expr, &alice, &bob, t)?;
        if next < value - MONOTONE_SLACK * (1.0 + value.abs()) {
            // rounding pushed the objective down: keep the previous iterate
            alice = prev_alice;
            bob = prev_bob;
            converged = true;
            break;
        }
        let gain = next - value;
        value = next;
        psis = next_psis;
        trace.push(value);
        if gain < cfg.tol {
            converged = true;
            break;
        }
    }
    // report the value on the reference eigensolver
    let h = bell_operator(expr, &alice, &bob)?;
    let spectrum = eigen_hermitian(&h.matrix)?.eigenvalues;
    Ok(RestartOutcome {
        value: spectrum[..t].iter().sum(),
        alice,
        bob,
        spectrum,
        trace,
        converged,
    })
}

pub(crate) fn random_assemblages(expr: &BellExpression, d: usize, seed: u64) -> Result<(MeasurementAssemblage, MeasurementAssemblage)> {
    let s = expr.scenario();
    let mut rng = rng_from_seed(seed);
    let alice = (0..s.nx).map(|_| random_measurement(d, s.na, &mut rng)).collect();
    let bob = (0..s.ny).map(|_| random_measurement(d, s.nb, &mut rng)).collect();
    Ok((MeasurementAssemblage::from_parts(d, alice)?, MeasurementAssemblage::from_parts(d, bob)?))
}

fn check_args(d: usize, t: usize, cfg: &SeesawConfig) -> Result<()> {
    cfg.validate()?;
    if d == 0 || d > MAX_DIM {
        return Err(Error::InvalidArgument(format!("dimension {d} outside 1..={MAX_DIM}")));
    }
    if t == 0 || t > d * d {
        return Err(Error::BadRank { t, n: d * d });
    }
    Ok(())
}

/// Seesaw estimate of `C(I, d, t)`; restart `r` is seeded with `seed + r`.
pub fn seesaw(expr: &BellExpression, d: usize, t: usize, cfg: &SeesawConfig) -> Result<TsirelsonEstimate> {
    check_args(d, t, cfg)?;
    let outcomes: Vec<RestartOutcome> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let (alice, bob) = random_assemblages(expr, d, cfg.seed.wrapping_add(r as u64))?;
            refine(expr, t, alice, bob, cfg)
        })
        .collect::<Result<_>>()?;
    Ok(assemble(expr, d, t, outcomes))
}

/// Seesaw started from given assemblages only.
pub fn seesaw_from(
    expr: &BellExpression,
    t: usize,
    alice: MeasurementAssemblage,
    bob: MeasurementAssemblage,
    cfg: &SeesawConfig,
) -> Result<TsirelsonEstimate> {
    let d = alice.dim();
    check_args(d, t, cfg)?;
    let out = refine(expr, t, alice, bob, cfg)?;
    Ok(assemble(expr, d, t, vec![out]))
}

/// Merges restarts; ties keep the lowest restart index.
pub(crate) fn assemble(expr: &BellExpression, d: usize, t: usize, outcomes: Vec<RestartOutcome>) -> TsirelsonEstimate {
    let per_restart_values: Vec<f64> = outcomes.iter().map(|o| o.value).collect();
    let best = outcomes
        .iter()
        .enumerate()
        .fold(0, |best, (i, o)| if o.value > outcomes[best].value { i } else { best });
    let traces = outcomes.iter().map(|o| o.trace.clone()).collect();
    let b = &outcomes[best];
    TsirelsonEstimate {
        expression: expr.name().to_string(),
        value: b.value,
        t,
        dim: d,
        best_alice: b.alice.clone(),
        best_bob: b.bob.clone(),
        top_eigenvalues: b.spectrum.clone(),
        per_restart_values,
        converged: b.converged,
        kind: "heuristic lower estimate".into(),
        traces,
    }
}

impl TsirelsonEstimate {
    /// Bell operator of the best assemblages.
    pub fn operator(&self, expr: &BellExpression) -> Result<crate::bell::BellOperator> {
        bell_operator(expr, &self.best_alice, &self.best_bob)
    }
}
