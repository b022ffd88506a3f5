//! Nondegeneracy of a Bell expression at fixed local dimension.
//!
//! An expression is nondegenerate at dimension `d` when no two orthogonal
//! states can both come close to `C_q = C(I, d, 1)` with the same
//! measurements. This holds iff `C(I, d, 2) < 2 C_q`, and then for any
//! `ε₁ < C_q − C(I,d,2)/2` every state orthogonal to one reaching `C_q − ε₁`
//! stays below `C_q − ε₂` with `ε₂ = 2C_q − C(I,d,2) − ε₁`.

use serde::{Deserialize, Serialize};

use crate::bell::{classical_bound, BellExpression};
use crate::error::{Error, Result};
use crate::numerics::{eig_general, inverse, matricize, normalize, singular_values, C64, ONE, RANK_TOL};
use crate::tsirelson::{seesaw, seesaw_from, SeesawConfig, TsirelsonEstimate};

/// `c2` must sit this far below `2 c_q` to count as nondegenerate.
pub const STRICTNESS_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Lemma1,
    Theorem1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NondegeneracyCertificate {
    pub name: String,
    pub d: usize,
    pub c_q: f64,
    pub c2: f64,
    pub c_prev: Option<f64>,
    pub nondegenerate: bool,
    pub eps1_max: f64,
    pub method: Method,
    /// Set whenever `c_q` and `c2` are optimizer estimates rather than proven values.
    pub heuristic_caveat: bool,
}

impl NondegeneracyCertificate {
    /// Certificate from given values of `C(I,d,1)` and `C(I,d,2)`.
    pub fn from_estimates(name: &str, d: usize, c_q: f64, c2: f64, c_prev: Option<f64>, heuristic: bool) -> Self {
        Self {
            name: name.to_string(),
            d,
            c_q,
            c2,
            c_prev,
            nondegenerate: c2 < 2.0 * c_q - STRICTNESS_MARGIN,
            eps1_max: c_q - c2 / 2.0,
            method: Method::Lemma1,
            heuristic_caveat: heuristic,
        }
    }

    /// Invariant violations, empty for a consistent certificate.
    pub fn defects(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.c_q.is_finite() && self.c2.is_finite()) {
            out.push("c_q and c2 must be finite".to_string());
            return out;
        }
        if (self.eps1_max - (self.c_q - self.c2 / 2.0)).abs() > 1e-12 * (1.0 + self.c_q.abs()) {
            out.push(format!("eps1_max {} differs from c_q - c2/2 = {}", self.eps1_max, self.c_q - self.c2 / 2.0));
        }
        if self.nondegenerate && self.c2 >= 2.0 * self.c_q {
            out.push(format!("marked nondegenerate but c2 {} >= 2 c_q {}", self.c2, 2.0 * self.c_q));
        }
        if self.d == 0 {
            out.push("d must be positive".to_string());
        }
        out
    }
}

/// Runs the seesaw at `t = 1` and `t = 2` and applies the `c2 < 2 c_q` test.
///
/// The `t = 2` value is the better of an independent run and a refinement
/// started from the `t = 1` optimum, so it is never below `λ₁ + λ₂` there.
pub fn certify_nondegeneracy(expr: &BellExpression, d: usize, cfg: &SeesawConfig) -> Result<NondegeneracyCertificate> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("nondegeneracy needs d >= 2, got {d}")));
    }
    let (one, two) = rayon::join(|| seesaw(expr, d, 1, cfg), || seesaw(expr, d, 2, cfg));
    let (one, two) = (one?, two?);
    let warm = seesaw_from(expr, 2, one.best_alice.clone(), one.best_bob.clone(), cfg)?;
    let c2 = two.value.max(warm.value);
    Ok(NondegeneracyCertificate::from_estimates(expr.name(), d, one.value, c2, None, true))
}

/// `ε₂ = 2c_q − c2 − ε₁`, capped at `c_q`.
pub fn epsilon2_for(cert: &NondegeneracyCertificate, eps1: f64) -> Result<f64> {
    if !(eps1 >= 0.0 && eps1 < cert.eps1_max) || !cert.nondegenerate {
        return Err(Error::Eps1OutOfRange {
            eps1,
            eps1_max: cert.eps1_max,
        });
    }
    // Capping only shrinks ε₂, which keeps the separation claim true.
    Ok((2.0 * cert.c_q - cert.c2 - eps1).min(cert.c_q))
}

/// Comparison of `C(I,d,1)` with `C(I,d−1,1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub name: String,
    pub d: usize,
    pub c_d: f64,
    pub c_prev: f64,
    /// `c_d > c_prev` by more than the strictness margin.
    pub strictly_increasing: bool,
    /// Upper bound `C(I,d,2) ≤ C(I,d,1) + C(I,d−1,1)`.
    pub c2_upper: f64,
    pub implies_nondegenerate: bool,
}

/// Tsirelson values at `d` and `d − 1`. At `d − 1 = 1` the measurements are
/// scalars, so that value is the deterministic maximum.
pub fn dimension_monotonicity_check(expr: &BellExpression, d: usize, cfg: &SeesawConfig) -> Result<MonotonicityReport> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("monotonicity check needs d >= 2, got {d}")));
    }
    let c_d = seesaw(expr, d, 1, cfg)?.value;
    let c_prev = if d == 2 {
        classical_bound(expr)?.value
    } else {
        seesaw(expr, d - 1, 1, cfg)?.value
    };
    let strictly_increasing = c_d > c_prev + STRICTNESS_MARGIN;
    Ok(MonotonicityReport {
        name: expr.name().to_string(),
        d,
        c_d,
        c_prev,
        strictly_increasing,
        c2_upper: c_d + c_prev,
        implies_nondegenerate: strictly_increasing,
    })
}

/// Number of singular values of the matricized state above `tol · σ_max`.
pub fn schmidt_number(state: &[C64], dim_a: usize, dim_b: usize, tol: f64) -> Result<usize> {
    if state.len() != dim_a * dim_b {
        return Err(Error::DimensionMismatch(format!(
            "state of length {} in a {dim_a}x{dim_b} system",
            state.len()
        )));
    }
    let sv = singular_values(&matricize(state, dim_a, dim_b)?);
    let top = sv.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return Ok(0);
    }
    Ok(sv.iter().filter(|&&s| s > tol * top).count())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchmidtReduction {
    pub alpha: C64,
    pub beta: C64,
    /// Normalized `αψ + βφ`.
    pub combined: Vec<C64>,
    pub achieved_schmidt_number: usize,
}

/// Finds `α, β` with `αψ + βφ` of Schmidt number at most `d − 1`.
///
/// With `A`, `B` the coefficient matrices, `B − λA = A(A⁻¹B − λ)` is singular
/// for any eigenvalue `λ` of `A⁻¹B`. The largest `|λ|` is taken.
pub fn schmidt_reduce(psi: &[C64], phi: &[C64], d: usize) -> Result<SchmidtReduction> {
    for s in [psi, phi] {
        let found = schmidt_number(s, d, d, RANK_TOL)?;
        if found != d {
            return Err(Error::NotFullSchmidtRank { expected: d, found });
        }
    }
    let a = matricize(psi, d, d)?;
    let b = matricize(phi, d, d)?;
    let c = &inverse(&a)? * &b;
    let lambda = eig_general(&c)?
        .into_iter()
        .fold(C64::new(0.0, 0.0), |best, l| if l.norm() > best.norm() { l } else { best });
    let alpha = -lambda;
    let beta = ONE;
    let raw: Vec<C64> = psi.iter().zip(phi).map(|(p, f)| alpha * p + beta * f).collect();
    let scale = alpha.norm() + 1.0;
    let raw_norm = crate::numerics::norm(&raw);
    if raw_norm <= 1e-10 * scale {
        return Err(Error::ProportionalStates);
    }
    let combined = normalize(&raw).ok_or(Error::ProportionalStates)?;
    let achieved_schmidt_number = schmidt_number(&combined, d, d, RANK_TOL)?;
    Ok(SchmidtReduction {
        alpha,
        beta,
        combined,
        achieved_schmidt_number,
    })
}

/// Values of the top two eigenstates of the estimate's Bell operator.
pub fn top_pair_values(expr: &BellExpression, est: &TsirelsonEstimate) -> Result<(f64, f64)> {
    let h = est.operator(expr)?;
    let spec = crate::numerics::eigen_hermitian(&h.matrix)?;
    if spec.dim() < 2 {
        return Err(Error::BadRank { t: 2, n: spec.dim() });
    }
    Ok((h.expectation(&spec.vector(0)), h.expectation(&spec.vector(1))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bell::{builtin_expression, BellScenario};
    use crate::numerics::sample::{maximally_entangled, random_pure_state, rng_from_seed};
    use crate::numerics::ZERO;

    fn cfg(restarts: usize) -> SeesawConfig {
        SeesawConfig {
            restarts,
            ..SeesawConfig::default()
        }
    }

    fn zero_expression() -> BellExpression {
        BellExpression::from_fn("zero", BellScenario::new(2, 2, 2, 2).unwrap(), |_, _, _, _| 0.0)
    }

    fn reference_like() -> NondegeneracyCertificate {
        NondegeneracyCertificate::from_estimates("cglmp3", 3, 3.3050, 6.2071, None, false)
    }

    #[test]
    fn from_estimates_arithmetic() {
        let c = reference_like();
        assert!(c.nondegenerate);
        assert!((c.eps1_max - 0.20145).abs() < 1e-12);
        assert!(c.defects().is_empty());
        let flat = NondegeneracyCertificate::from_estimates("x", 2, 1.0, 2.0, None, true);
        assert!(!flat.nondegenerate);
    }

    #[test]
    fn epsilon2_examples() {
        let c = reference_like();
        assert!((epsilon2_for(&c, 0.05).unwrap() - 0.3529).abs() < 1e-12);
        assert!((epsilon2_for(&c, 0.0).unwrap() - (2.0 * 3.3050 - 6.2071)).abs() < 1e-12);
        assert!(matches!(epsilon2_for(&c, c.eps1_max), Err(Error::Eps1OutOfRange { .. })));
        assert!(epsilon2_for(&c, -0.01).is_err());
    }

    #[test]
    fn epsilon2_grid_separates() {
        for c in [reference_like(), NondegeneracyCertificate::from_estimates("lo", 3, 3.0, 3.2, None, true)] {
            for i in 0..100 {
                let eps1 = c.eps1_max * i as f64 / 100.0;
                let eps2 = epsilon2_for(&c, eps1).unwrap();
                assert!(eps1 < eps2 && eps2 <= c.c_q, "{eps1} {eps2}");
            }
        }
    }

    #[test]
    fn clamps_to_c_q() {
        // c2 barely above c_q pushes 2c_q - c2 above c_q
        let c = NondegeneracyCertificate::from_estimates("lo", 3, 3.0, 2.5, None, true);
        assert_eq!(epsilon2_for(&c, 0.0).unwrap(), 3.0);
        assert!((epsilon2_for(&c, 0.6).unwrap() - 2.9).abs() < 1e-12);
    }

    #[test]
    fn zero_expression_is_degenerate() {
        let cert = certify_nondegeneracy(&zero_expression(), 2, &cfg(2)).unwrap();
        assert_eq!(cert.c_q, 0.0);
        assert_eq!(cert.c2, 0.0);
        assert!(!cert.nondegenerate);
        let rep = dimension_monotonicity_check(&zero_expression(), 2, &cfg(2)).unwrap();
        assert!(!rep.implies_nondegenerate);
    }

    #[test]
    fn chsh_certificate_and_monotonicity() {
        let e = builtin_expression("chsh").unwrap();
        let cert = certify_nondegeneracy(&e, 2, &cfg(5)).unwrap();
        assert!(cert.nondegenerate, "{cert:?}");
        assert!(cert.heuristic_caveat);
        assert!(cert.c2 >= cert.c_q - 1e-9);
        let rep = dimension_monotonicity_check(&e, 2, &cfg(5)).unwrap();
        assert_eq!(rep.c_prev, 2.0);
        assert!((rep.c_d - 2.0 * std::f64::consts::SQRT_2).abs() < 1e-6);
        assert!(rep.implies_nondegenerate);
        assert!(cert.c2 <= rep.c2_upper + 1e-6);
    }

    #[test]
    fn cglmp_top_pair_sums_to_c2() {
        let e = builtin_expression("cglmp3").unwrap();
        let est = seesaw(&e, 3, 2, &cfg(4)).unwrap();
        let (i1, i2) = top_pair_values(&e, &est).unwrap();
        assert!((i1 + i2 - est.value).abs() < 1e-8);
        let c_q = seesaw(&e, 3, 1, &cfg(4)).unwrap().value;
        let cert = NondegeneracyCertificate::from_estimates("cglmp3", 3, c_q, est.value, None, true);
        assert!(cert.nondegenerate);
        // the better state sits within eps1 of c_q; the other must then stay below c_q - eps2
        let eps1 = cert.c_q - i1.max(i2);
        assert!(eps1 >= 0.0 && eps1 < cert.eps1_max);
        let eps2 = epsilon2_for(&cert, eps1).unwrap();
        assert!(i1.min(i2) <= cert.c_q - eps2 + 1e-6);
    }

    #[test]
    fn schmidt_number_examples() {
        let mut prod = vec![ZERO; 9];
        prod[0] = ONE;
        assert_eq!(schmidt_number(&prod, 3, 3, RANK_TOL).unwrap(), 1);
        assert_eq!(schmidt_number(&maximally_entangled(3), 3, 3, RANK_TOL).unwrap(), 3);
        assert!(schmidt_number(&prod, 2, 3, RANK_TOL).is_err());
    }

    fn diag_state(entries: &[f64]) -> Vec<C64> {
        let d = entries.len();
        let mut v = vec![ZERO; d * d];
        for (k, &e) in entries.iter().enumerate() {
            v[k * d + k] = C64::new(e, 0.0);
        }
        v
    }

    #[test]
    fn schmidt_reduce_diagonal() {
        let psi = normalize(&diag_state(&[1.0, 1.0, 1.0])).unwrap();
        let phi = normalize(&diag_state(&[1.0, 2.0, 3.0])).unwrap();
        let red = schmidt_reduce(&psi, &phi, 3).unwrap();
        assert_eq!(red.achieved_schmidt_number, 2);
        assert!((red.alpha * red.beta).norm() > 0.0);
        // the largest ratio is 3, so the third entry cancels
        let m = matricize(&red.combined, 3, 3).unwrap();
        assert!(m[(2, 2)].norm() < 1e-12);
    }

    #[test]
    fn schmidt_reduce_errors() {
        let psi = normalize(&diag_state(&[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(schmidt_reduce(&psi, &psi, 3).unwrap_err(), Error::ProportionalStates);
        let mut prod = vec![ZERO; 9];
        prod[0] = ONE;
        assert_eq!(
            schmidt_reduce(&prod, &psi, 3).unwrap_err(),
            Error::NotFullSchmidtRank { expected: 3, found: 1 }
        );
    }

    #[test]
    fn schmidt_reduce_random_pairs() {
        let mut rng = rng_from_seed(41);
        for d in 3..=6 {
            for _ in 0..25 {
                let psi = random_pure_state(d * d, &mut rng);
                let phi = random_pure_state(d * d, &mut rng);
                let red = schmidt_reduce(&psi, &phi, d).unwrap();
                let sv = singular_values(&matricize(&red.combined, d, d).unwrap());
                assert!(sv[d - 1] <= 1e-8 * sv[0], "d={d} {sv:?}");
                assert!(red.achieved_schmidt_number < d);
            }
        }
    }
}
