//! Entanglement lower bounds from an observed Bell violation.
//!
//! A violation within `ε₁` of `C_q` forces the state's spectrum to carry a
//! weight of at least `1 − ε₁/ε₂`, which bounds its purity from below and
//! its entropy from above. The correlation itself bounds the marginal purity
//! from above and hence the marginal entropy from below. The difference
//! lower-bounds the coherent information `S(ρ_A) − S(ρ)`, and so `E_D` and `E_f`.

use serde::{Deserialize, Serialize};

use crate::bell::{evaluate_bell, BellExpression, Correlation};
use crate::error::{Error, Result};
use crate::nondegeneracy::{epsilon2_for, NondegeneracyCertificate};

/// Violations this far above `c_q` are treated as sampling noise.
pub const VIOLATION_SLACK: f64 = 1e-6;

/// Shannon entropy in bits, with `0 log 0 = 0`. Tiny negative entries from
/// eigensolvers are ignored.
pub fn shannon_bits(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.log2()).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationAnalysis {
    pub violation: f64,
    pub eps1: f64,
    /// Absent when the gap is outside the certificate's range.
    pub eps2: Option<f64>,
    pub a1_lower: Option<f64>,
    pub purity_lower: Option<f64>,
}

impl ViolationAnalysis {
    pub fn has_bound(&self) -> bool {
        self.purity_lower.is_some()
    }
}

/// Purity bound from the principal weight.
///
/// Some eigenvector of `ρ` has weight at least `a1_lower`, and any weight `a`
/// gives `Tr ρ² ≥ a² + (1−a)²/(n−1)`, which increases for `a ≥ 1/n`.
pub fn violation_analysis(v: f64, cert: &NondegeneracyCertificate, d: usize) -> Result<ViolationAnalysis> {
    if d == 0 {
        return Err(Error::InvalidArgument("d must be positive".into()));
    }
    if !v.is_finite() {
        return Err(Error::InvalidArgument(format!("violation {v} is not finite")));
    }
    if v > cert.c_q + VIOLATION_SLACK {
        return Err(Error::ViolationAboveBound { violation: v, c_q: cert.c_q });
    }
    let eps1 = (cert.c_q - v).max(0.0);
    let none = ViolationAnalysis {
        violation: v,
        eps1,
        eps2: None,
        a1_lower: None,
        purity_lower: None,
    };
    let eps2 = match epsilon2_for(cert, eps1) {
        Ok(e) => e,
        Err(Error::Eps1OutOfRange { .. }) => return Ok(none),
        Err(e) => return Err(e),
    };
    let a1 = (1.0 - eps1 / eps2).clamp(0.0, 1.0);
    let n = (d * d) as f64;
    let purity = if d == 1 {
        1.0
    } else {
        let a = a1.max(1.0 / n);
        (a * a + (1.0 - a) * (1.0 - a) / (n - 1.0)).clamp(1.0 / n, 1.0)
    };
    Ok(ViolationAnalysis {
        violation: v,
        eps1,
        eps2: Some(eps2),
        a1_lower: Some(a1),
        purity_lower: Some(purity),
    })
}

fn check_gamma(gamma: f64, n: usize) -> Result<()> {
    let lo = 1.0 / n as f64;
    if n == 0 || !(gamma >= lo - 1e-12 && gamma <= 1.0 + 1e-12) {
        return Err(Error::GammaOutOfRange { gamma, n });
    }
    Ok(())
}

/// Every distribution with `k` entries `u` and `m − k` entries `v` (the
/// rest zero) whose purity is `gamma`. Extremal entropies at fixed purity are
/// attained in this family, so scanning it gives both extremes exactly.
fn two_valued_entropies(gamma: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::new();
    let first = ((1.0 / gamma) - 1e-9).ceil().max(1.0) as usize;
    for m in first..=n {
        let mf = m as f64;
        let excess = mf * gamma - 1.0;
        if excess.abs() <= 1e-12 {
            out.push(mf.log2());
            continue;
        }
        if excess < 0.0 {
            continue;
        }
        for k in 1..m {
            let (kf, rest) = (k as f64, (m - k) as f64);
            let root = (rest * excess / kf).sqrt();
            for sign in [1.0, -1.0] {
                let u = (1.0 + sign * root) / mf;
                let v = (1.0 - kf * u) / rest;
                if u < -1e-12 || v < -1e-12 {
                    continue;
                }
                let (u, v) = (u.max(0.0), v.max(0.0));
                out.push(0.0 - kf * xlog2x(u) - rest * xlog2x(v));
            }
        }
    }
    out
}

fn xlog2x(x: f64) -> f64 {
    if x > 0.0 {
        x * x.log2()
    } else {
        0.0
    }
}

/// Largest entropy (bits) of a length-`n` distribution with purity `gamma`.
pub fn max_entropy_for_purity(gamma: f64, n: usize) -> Result<f64> {
    check_gamma(gamma, n)?;
    let g = gamma.clamp(1.0 / n as f64, 1.0);
    Ok(two_valued_entropies(g, n).into_iter().fold(0.0, f64::max))
}

/// Smallest entropy (bits) of a length-`n` distribution with purity `gamma`.
pub fn min_entropy_for_purity(gamma: f64, n: usize) -> Result<f64> {
    check_gamma(gamma, n)?;
    let g = gamma.clamp(1.0 / n as f64, 1.0);
    Ok(two_valued_entropies(g, n).into_iter().fold((n as f64).log2(), f64::min).max(0.0))
}

/// `−Σ c_i log₂ c_i` for `c_1 = 1/n − ((n−1)/n)·√((n γ − 1)/(n−1))` and the
/// other `n − 1` entries equal, the smaller root of the one-plus-rest
/// family. Absent when `c_1` would be negative.
pub fn single_small_entropy(gamma: f64, n: usize) -> Option<f64> {
    if n < 2 || gamma < 1.0 / n as f64 {
        return None;
    }
    let nf = n as f64;
    let c1 = 1.0 / nf - (1.0 / nf) * ((nf - 1.0) * (nf * gamma - 1.0)).sqrt();
    if c1 < 0.0 {
        return None;
    }
    let rest = (1.0 - c1) / (nf - 1.0);
    Some(-xlog2x(c1) - (nf - 1.0) * xlog2x(rest))
}

/// `f1`, `f2` and their minimum `gamma_a`, upper bounds on `Tr ρ_A²`.
///
/// For Bob settings `y₁ ≠ y₂`, Alice's conditional states `σ_{b|y}` satisfy
/// `Tr ρ_A² = Σ_{b₁b₂} tr(σ_{b₁|y₁} σ_{b₂|y₂})`, and each term is at most the
/// squared fidelity, which no measurement `x` can exceed classically.
/// Scenarios with a single setting on a side give 1 for that side.
pub fn marginal_purity_upper_bound(c: &Correlation) -> (f64, f64, f64) {
    let s = c.scenario();
    let mut f1 = 1.0f64;
    for y1 in 0..s.ny {
        for y2 in 0..s.ny {
            if y1 == y2 {
                continue;
            }
            let mut sum = 0.0;
            for b1 in 0..s.nb {
                for b2 in 0..s.nb {
                    let best = (0..s.nx)
                        .map(|x| {
                            let f: f64 = (0..s.na).map(|a| (c.prob(x, y1, a, b1) * c.prob(x, y2, a, b2)).sqrt()).sum();
                            f * f
                        })
                        .fold(f64::INFINITY, f64::min);
                    sum += best;
                }
            }
            f1 = f1.min(sum);
        }
    }
    let mut f2 = 1.0f64;
    for x1 in 0..s.nx {
        for x2 in 0..s.nx {
            if x1 == x2 {
                continue;
            }
            let mut sum = 0.0;
            for a1 in 0..s.na {
                for a2 in 0..s.na {
                    let best = (0..s.ny)
                        .map(|y| {
                            let f: f64 = (0..s.nb).map(|b| (c.prob(x1, y, a1, b) * c.prob(x2, y, a2, b)).sqrt()).sum();
                            f * f
                        })
                        .fold(f64::INFINITY, f64::min);
                    sum += best;
                }
            }
            f2 = f2.min(sum);
        }
    }
    (f1, f2, f1.min(f2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntanglementCertificate {
    pub violation: f64,
    pub eps1: f64,
    pub eps2: Option<f64>,
    pub a1_lower: Option<f64>,
    pub purity_lower: Option<f64>,
    pub s_upper_bits: Option<f64>,
    pub f1: f64,
    pub f2: f64,
    pub gamma_a: f64,
    pub s_lower_bits: f64,
    /// `s_lower − s_upper`; a lower bound on `I_C ≤ E_D ≤ E_f`.
    pub ic_lower_ebits: Option<f64>,
    /// `ic_lower` is present and positive.
    pub certified: bool,
    pub caveats: Vec<String>,
}

impl EntanglementCertificate {
    pub fn analysis(&self) -> ViolationAnalysis {
        ViolationAnalysis {
            violation: self.violation,
            eps1: self.eps1,
            eps2: self.eps2,
            a1_lower: self.a1_lower,
            purity_lower: self.purity_lower,
        }
    }

    /// Invariant violations, empty for a consistent certificate.
    pub fn defects(&self) -> Vec<String> {
        let mut out = Vec::new();
        match (self.ic_lower_ebits, self.s_upper_bits) {
            (Some(ic), Some(su)) => {
                if ic != self.s_lower_bits - su {
                    out.push(format!("ic_lower {ic} differs from s_lower - s_upper"));
                }
                if su < 0.0 {
                    out.push(format!("s_upper {su} is negative"));
                }
            }
            (None, _) => {
                if self.certified {
                    out.push("certified without an ic_lower value".into());
                }
            }
            (Some(_), None) => out.push("ic_lower present without s_upper".into()),
        }
        if self.s_lower_bits < 0.0 {
            out.push(format!("s_lower {} is negative", self.s_lower_bits));
        }
        if self.certified != self.ic_lower_ebits.is_some_and(|v| v > 0.0) {
            out.push("certified flag disagrees with ic_lower".into());
        }
        if self.purity_lower.is_some_and(|p| !(0.0..=1.0).contains(&p)) {
            out.push("purity_lower outside [0, 1]".into());
        }
        out
    }
}

/// Full pipeline from a correlation to a coherent-information lower bound.
pub fn certify_entanglement(
    c: &Correlation,
    expr: &BellExpression,
    cert: &NondegeneracyCertificate,
    d: usize,
) -> Result<EntanglementCertificate> {
    if c.scenario() != expr.scenario() {
        return Err(Error::ShapeMismatch(format!(
            "correlation scenario {:?} does not match expression scenario {:?}",
            c.scenario(),
            expr.scenario()
        )));
    }
    if cert.d != d {
        return Err(Error::InvalidArgument(format!(
            "certificate is for d = {}, bound requested for d = {d}",
            cert.d
        )));
    }
    let v = evaluate_bell(expr, c)?;
    let analysis = violation_analysis(v, cert, d)?;
    let mut caveats = Vec::new();
    if cert.heuristic_caveat {
        caveats.push("c_q and C(I,d,2) are seesaw lower estimates; an underestimated C(I,d,2) makes the bound optimistic".to_string());
    }
    if cert.name != expr.name() {
        caveats.push(format!("certificate computed for '{}', expression is '{}'", cert.name, expr.name()));
    }
    if v > cert.c_q {
        caveats.push("violation above c_q within slack, treated as c_q".to_string());
    }
    let s_upper = match analysis.purity_lower {
        Some(p) => Some(max_entropy_for_purity(p, d * d)?),
        None => {
            caveats.push(if cert.nondegenerate {
                format!("gap {} is not below eps1_max {}: no bound", analysis.eps1, cert.eps1_max)
            } else {
                "certificate is not nondegenerate: no bound".to_string()
            });
            None
        }
    };
    let (f1, f2, gamma_a) = marginal_purity_upper_bound(c);
    let lo = 1.0 / d as f64;
    if gamma_a < lo || gamma_a > 1.0 {
        caveats.push(format!("gamma_a {gamma_a} clamped into [1/d, 1]"));
    }
    let s_lower = min_entropy_for_purity(gamma_a.clamp(lo, 1.0), d)?;
    let ic_lower = s_upper.map(|su| s_lower - su);
    Ok(EntanglementCertificate {
        violation: v,
        eps1: analysis.eps1,
        eps2: analysis.eps2,
        a1_lower: analysis.a1_lower,
        purity_lower: analysis.purity_lower,
        s_upper_bits: s_upper,
        f1,
        f2,
        gamma_a,
        s_lower_bits: s_lower,
        ic_lower_ebits: ic_lower,
        certified: ic_lower.is_some_and(|v| v > 0.0),
        caveats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bell::{BellScenario, Correlation};
    use proptest::prelude::*;

    fn reference_cert() -> NondegeneracyCertificate {
        NondegeneracyCertificate::from_estimates("cglmp3", 3, 3.3050, 6.2071, None, false)
    }

    #[test]
    fn analysis_at_maximum() {
        let a = violation_analysis(3.3050, &reference_cert(), 3).unwrap();
        assert_eq!(a.eps1, 0.0);
        assert_eq!(a.a1_lower, Some(1.0));
        assert_eq!(a.purity_lower, Some(1.0));
    }

    #[test]
    fn analysis_gap_005() {
        let a = violation_analysis(3.2550, &reference_cert(), 3).unwrap();
        assert!((a.eps2.unwrap() - 0.3529).abs() < 1e-9);
        let a1 = 1.0 - 0.05 / 0.3529;
        assert!((a.a1_lower.unwrap() - a1).abs() < 1e-9);
        assert!((a.a1_lower.unwrap() - 0.85832).abs() < 1e-5);
        let p = a1 * a1 + (1.0 - a1) * (1.0 - a1) / 8.0;
        assert!((a.purity_lower.unwrap() - p).abs() < 1e-12);
        assert!((p - 0.7392).abs() < 1e-4);
    }

    #[test]
    fn analysis_out_of_range() {
        let a = violation_analysis(3.0, &reference_cert(), 3).unwrap();
        assert!(!a.has_bound());
        assert!((a.eps1 - 0.3050).abs() < 1e-12);
        assert!(matches!(
            violation_analysis(3.4, &reference_cert(), 3),
            Err(Error::ViolationAboveBound { .. })
        ));
        // within slack: clamped
        let a = violation_analysis(3.3050 + 5e-7, &reference_cert(), 3).unwrap();
        assert_eq!(a.purity_lower, Some(1.0));
    }

    #[test]
    fn analysis_monotone_in_eps1() {
        let cert = reference_cert();
        let mut prev = (f64::INFINITY, f64::INFINITY);
        for i in 0..200 {
            let eps1 = cert.eps1_max * i as f64 / 200.0;
            let a = violation_analysis(cert.c_q - eps1, &cert, 3).unwrap();
            let (a1, p) = (a.a1_lower.unwrap(), a.purity_lower.unwrap());
            assert!(a1 <= prev.0 + 1e-15 && p <= prev.1 + 1e-15);
            assert!((1.0 / 9.0..=1.0).contains(&p));
            assert_eq!(p == 1.0, i == 0);
            prev = (a1, p);
        }
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(max_entropy_for_purity(1.0, 9).unwrap(), 0.0);
        assert_eq!(min_entropy_for_purity(1.0, 4).unwrap(), 0.0);
        assert!((max_entropy_for_purity(1.0 / 9.0, 9).unwrap() - 9f64.log2()).abs() < 1e-10);
        assert!((min_entropy_for_purity(1.0 / 9.0, 9).unwrap() - 9f64.log2()).abs() < 1e-10);
        assert!((min_entropy_for_purity(1.0 / 3.0, 3).unwrap() - 3f64.log2()).abs() < 1e-10);
        assert!(matches!(max_entropy_for_purity(0.05, 9), Err(Error::GammaOutOfRange { .. })));
        assert!(min_entropy_for_purity(1.5, 3).is_err());
    }

    #[test]
    fn small_root_family_is_not_the_maximum() {
        let family = single_small_entropy(0.12, 9).unwrap();
        let c1 = 1.0 / 9.0 - (2.0 / 3.0) * (2.0f64 * (0.12 - 1.0 / 9.0)).sqrt();
        let rest = (1.0 - c1) / 8.0;
        let direct = -c1 * c1.log2() - 8.0 * rest * rest.log2();
        assert!((family - direct).abs() < 1e-12);
        assert!((c1 - 0.02222).abs() < 1e-5 && (rest - 0.12222).abs() < 1e-5);
        assert!((family - 3.0871).abs() < 1e-4);
        assert!(max_entropy_for_purity(0.12, 9).unwrap() > family + 1e-4);
        assert!(single_small_entropy(0.2, 9).is_none());
    }

    #[test]
    fn min_entropy_matches_three_level_family() {
        let gamma = 0.4f64;
        let alpha = 1.0 / 3.0 - (2.0 / 3.0 * (gamma - 1.0 / 3.0)).sqrt();
        assert!((alpha - 0.12251).abs() < 1e-5);
        let h = shannon_bits(&[alpha, (1.0 - alpha) / 2.0, (1.0 - alpha) / 2.0]);
        assert!((min_entropy_for_purity(gamma, 3).unwrap() - h).abs() < 1e-9);
        assert!((h - 1.414).abs() < 1e-3);
    }

    #[test]
    fn uniform_marginals_give_no_constraint() {
        let s = BellScenario::new(2, 2, 3, 3).unwrap();
        let (f1, f2, g) = marginal_purity_upper_bound(&Correlation::uniform(s));
        assert!((f1 - 1.0).abs() < 1e-12 && (f2 - 1.0).abs() < 1e-12 && (g - 1.0).abs() < 1e-12);
        let det = Correlation::from_fn(s, |_, _, a, b| if a == 0 && b == 0 { 1.0 } else { 0.0 }).unwrap();
        let (f1, f2, _) = marginal_purity_upper_bound(&det);
        assert_eq!((f1, f2), (1.0, 1.0));
    }

    proptest! {
        #[test]
        fn entropy_extremes_ordered_and_monotone(n in 2usize..=9, t in 0.0f64..1.0, dt in 0.0f64..0.1) {
            let lo = 1.0 / n as f64;
            let g = lo + t * (1.0 - lo);
            let g2 = (g + dt).min(1.0);
            let (mx, mn) = (max_entropy_for_purity(g, n).unwrap(), min_entropy_for_purity(g, n).unwrap());
            prop_assert!(mn <= mx + 1e-12);
            prop_assert!(mn >= 0.0 && mx <= (n as f64).log2() + 1e-12);
            prop_assert!(max_entropy_for_purity(g2, n).unwrap() <= mx + 1e-10);
            prop_assert!(min_entropy_for_purity(g2, n).unwrap() <= mn + 1e-10);
        }
    }
}
