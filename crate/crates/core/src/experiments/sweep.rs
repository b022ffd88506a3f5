//! Noise sweeps: certified lower bound against the true coherent information.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bell::{check_state, BellExpression};
use crate::entanglement::{certify_entanglement, shannon_bits};
use crate::error::Result;
use crate::nondegeneracy::NondegeneracyCertificate;
use crate::numerics::{eigen_hermitian, partial_trace, ComplexMatrix, Party};
use crate::tsirelson::SeesawConfig;

use super::simulate::{SimulationSpec, Simulator};

pub const SWEEP_HEADER: &str = "w,violation,gap,eps1,eps2,purity_lower,s_upper,gamma_a,s_lower,ic_lower,ic_true";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub w: f64,
    pub violation: f64,
    /// `c_q − violation`
    pub gap: f64,
    pub eps1: f64,
    pub eps2: Option<f64>,
    pub purity_lower: Option<f64>,
    pub s_upper: Option<f64>,
    pub gamma_a: f64,
    pub s_lower: f64,
    pub ic_lower: Option<f64>,
    pub ic_true: f64,
}

/// Von Neumann entropy in bits.
pub fn von_neumann_bits(rho: &ComplexMatrix) -> Result<f64> {
    Ok(shannon_bits(&eigen_hermitian(rho)?.eigenvalues))
}

/// Exact `S(ρ_A) − S(ρ)` in bits for a state on `C^d ⊗ C^d`.
pub fn reference_coherent_info(rho: &ComplexMatrix, d: usize) -> Result<f64> {
    check_state(rho, d * d)?;
    let rho_a = partial_trace(rho, d, d, Party::A)?;
    Ok(von_neumann_bits(&rho_a.hermitize())? - von_neumann_bits(&rho.hermitize())?)
}

/// One row per noise weight, sorted by gap. Row `i` draws its noise and
/// shots from `template.seed + 1 + i`, so scheduling does not matter.
pub fn perturbation_sweep(
    expr: &BellExpression,
    d: usize,
    cert: &NondegeneracyCertificate,
    w_grid: &[f64],
    template: &SimulationSpec,
    cfg: &SeesawConfig,
) -> Result<Vec<SweepRow>> {
    let sim = Simulator::new(template, expr, d, cfg)?;
    sweep_with(&sim, cert, w_grid)
}

/// Sweep over a prepared simulator.
pub fn sweep_with(sim: &Simulator, cert: &NondegeneracyCertificate, w_grid: &[f64]) -> Result<Vec<SweepRow>> {
    let mut rows: Vec<SweepRow> = w_grid
        .par_iter()
        .enumerate()
        .map(|(i, &w)| {
            let rec = sim.run(w, sim.spec.seed.wrapping_add(1 + i as u64))?;
            let ent = certify_entanglement(&rec.correlation, &sim.expr, cert, sim.d)?;
            Ok(SweepRow {
                w,
                violation: rec.violation,
                gap: cert.c_q - rec.violation,
                eps1: ent.eps1,
                eps2: ent.eps2,
                purity_lower: ent.purity_lower,
                s_upper: ent.s_upper_bits,
                gamma_a: ent.gamma_a,
                s_lower: ent.s_lower_bits,
                ic_lower: ent.ic_lower_ebits,
                ic_true: reference_coherent_info(&rec.state, sim.d)?,
            })
        })
        .collect::<Result<_>>()?;
    rows.sort_by(|a, b| a.gap.total_cmp(&b.gap).then(a.w.total_cmp(&b.w)));
    Ok(rows)
}

/// Largest gap up to which every row certifies a positive bound.
pub fn positivity_threshold(rows: &[SweepRow]) -> Option<f64> {
    rows.iter()
        .take_while(|r| r.ic_lower.is_some_and(|v| v > 0.0))
        .map(|r| r.gap)
        .last()
}

/// `n + 1` evenly spaced weights from 0 to `w_max`.
pub fn linear_grid(w_max: f64, n: usize) -> Vec<f64> {
    if n == 0 {
        return vec![0.0];
    }
    (0..=n).map(|i| w_max * i as f64 / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::sample::maximally_entangled;

    #[test]
    fn coherent_info_examples() {
        let phi = ComplexMatrix::projector(&maximally_entangled(3));
        assert!((reference_coherent_info(&phi, 3).unwrap() - 3f64.log2()).abs() < 1e-10);
        let mixed = ComplexMatrix::identity(9).scale_real(1.0 / 9.0);
        assert!((reference_coherent_info(&mixed, 3).unwrap() + 3f64.log2()).abs() < 1e-10);
        assert!(reference_coherent_info(&ComplexMatrix::identity(9), 3).is_err());
    }

    #[test]
    fn threshold_stops_at_first_failure() {
        let row = |gap: f64, ic: Option<f64>| SweepRow {
            w: gap,
            violation: 0.0,
            gap,
            eps1: gap,
            eps2: None,
            purity_lower: None,
            s_upper: None,
            gamma_a: 0.0,
            s_lower: 0.0,
            ic_lower: ic,
            ic_true: 0.0,
        };
        let rows = vec![row(0.0, Some(1.0)), row(0.01, Some(0.2)), row(0.02, Some(-0.1)), row(0.03, Some(0.1))];
        assert_eq!(positivity_threshold(&rows), Some(0.01));
        assert_eq!(positivity_threshold(&rows[2..3]), None);
        assert_eq!(linear_grid(0.2, 4), vec![0.0, 0.05, 0.1, 0.15000000000000002, 0.2]);
    }
}
