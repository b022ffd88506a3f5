//! Bell scenarios, expressions, correlations and measurements.
//!
//! Settings and outcomes are 0-based everywhere. Coefficients are stored in
//! probability form: an expression is `I = Σ s[x][y][a][b] · p(ab|xy)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{eigen_hermitian, kron, ComplexMatrix, C64};
use crate::numerics::matrix::kron_add_into;

/// Probabilities below this are treated as invalid rather than float dust.
pub const NEGATIVE_PROBABILITY_TOL: f64 = 1e-12;
/// Allowed deviation of each `(x, y)` slice sum from one.
pub const NORMALIZATION_TOL: f64 = 1e-9;
/// PSD tolerance for POVM elements.
pub const POVM_PSD_TOL: f64 = 1e-10;
/// Completeness tolerance `‖Σ_a M_a − I‖_max`.
pub const POVM_COMPLETENESS_TOL: f64 = 1e-9;
/// Upper limit on `na^nx · nb^ny` for [`classical_bound`].
pub const MAX_DETERMINISTIC_STRATEGIES: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BellScenario {
    pub nx: usize,
    pub ny: usize,
    pub na: usize,
    pub nb: usize,
}

impl BellScenario {
    pub fn new(nx: usize, ny: usize, na: usize, nb: usize) -> Result<Self> {
        let s = Self { nx, ny, na, nb };
        s.check()?;
        Ok(s)
    }

    fn check(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 || self.na == 0 || self.nb == 0 {
            return Err(Error::InvalidArgument(format!("scenario counts must be positive: {self:?}")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.na * self.nb
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, a: usize, b: usize) -> usize {
        ((x * self.ny + y) * self.na + a) * self.nb + b
    }

    /// Iterates `(x, y, a, b)` in storage order.
    pub fn indices(&self) -> impl Iterator<Item = (usize, usize, usize, usize)> + '_ {
        let s = *self;
        (0..s.nx).flat_map(move |x| {
            (0..s.ny).flat_map(move |y| (0..s.na).flat_map(move |a| (0..s.nb).map(move |b| (x, y, a, b))))
        })
    }
}

fn nest(s: &BellScenario, flat: &[f64]) -> Vec<Vec<Vec<Vec<f64>>>> {
    (0..s.nx)
        .map(|x| {
            (0..s.ny)
                .map(|y| {
                    (0..s.na)
                        .map(|a| (0..s.nb).map(|b| flat[s.index(x, y, a, b)]).collect())
                        .collect()
                })
                .collect()
        })
        .collect()
}

fn flatten(s: &BellScenario, nested: &[Vec<Vec<Vec<f64>>>], what: &str) -> Result<Vec<f64>> {
    let bad = || Error::ShapeMismatch(format!("{what} tensor does not match scenario {s:?}"));
    if nested.len() != s.nx {
        return Err(bad());
    }
    let mut out = Vec::with_capacity(s.len());
    for xs in nested {
        if xs.len() != s.ny {
            return Err(bad());
        }
        for ys in xs {
            if ys.len() != s.na {
                return Err(bad());
            }
            for row in ys {
                if row.len() != s.nb {
                    return Err(bad());
                }
                out.extend_from_slice(row);
            }
        }
    }
    Ok(out)
}

/// A linear Bell expression in probability form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ExpressionRepr", into = "ExpressionRepr")]
pub struct BellExpression {
    name: Option<String>,
    scenario: BellScenario,
    coeffs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct ExpressionRepr {
    #[serde(default)]
    name: Option<String>,
    scenario: BellScenario,
    coeffs: Vec<Vec<Vec<Vec<f64>>>>,
}

impl TryFrom<ExpressionRepr> for BellExpression {
    type Error = Error;
    fn try_from(r: ExpressionRepr) -> Result<Self> {
        r.scenario.check()?;
        let coeffs = flatten(&r.scenario, &r.coeffs, "coefficient")?;
        BellExpression::new(r.name, r.scenario, coeffs)
    }
}

impl From<BellExpression> for ExpressionRepr {
    fn from(e: BellExpression) -> Self {
        ExpressionRepr {
            coeffs: nest(&e.scenario, &e.coeffs),
            name: e.name,
            scenario: e.scenario,
        }
    }
}

impl BellExpression {
    pub fn new(name: Option<String>, scenario: BellScenario, coeffs: Vec<f64>) -> Result<Self> {
        scenario.check()?;
        if coeffs.len() != scenario.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} coefficients for scenario {scenario:?}",
                coeffs.len()
            )));
        }
        if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::Validation(vec![format!("coefficient {i} is not finite")]));
        }
        Ok(Self { name, scenario, coeffs })
    }

    pub fn from_fn(name: &str, scenario: BellScenario, f: impl Fn(usize, usize, usize, usize) -> f64) -> Self {
        let coeffs = scenario.indices().map(|(x, y, a, b)| f(x, y, a, b)).collect();
        Self {
            name: Some(name.to_string()),
            scenario,
            coeffs,
        }
    }

    pub fn name(&self) -> &str {
        self.name.as_deref().unwrap_or("unnamed")
    }

    pub fn scenario(&self) -> BellScenario {
        self.scenario
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    #[inline]
    pub fn coeff(&self, x: usize, y: usize, a: usize, b: usize) -> f64 {
        self.coeffs[self.scenario.index(x, y, a, b)]
    }

    pub fn nonzero_count(&self) -> usize {
        self.coeffs.iter().filter(|&&c| c != 0.0).count()
    }
}

/// A table of conditional probabilities `p(ab|xy)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CorrelationRepr", into = "CorrelationRepr")]
pub struct Correlation {
    scenario: BellScenario,
    p: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct CorrelationRepr {
    scenario: BellScenario,
    p: Vec<Vec<Vec<Vec<f64>>>>,
}

impl TryFrom<CorrelationRepr> for Correlation {
    type Error = Error;
    fn try_from(r: CorrelationRepr) -> Result<Self> {
        r.scenario.check()?;
        let p = flatten(&r.scenario, &r.p, "probability")?;
        Correlation::new(r.scenario, p)
    }
}

impl From<Correlation> for CorrelationRepr {
    fn from(c: Correlation) -> Self {
        CorrelationRepr {
            p: nest(&c.scenario, &c.p),
            scenario: c.scenario,
        }
    }
}

/// Outcome of [`validate_correlation`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    /// `(x, y, slice sum)` for every slice off by more than the tolerance.
    pub normalization_errors: Vec<(usize, usize, f64)>,
    /// `((x, y, a, b), value)` for entries below `-1e-12`.
    pub negative_entries: Vec<((usize, usize, usize, usize), f64)>,
    /// Largest change of a one-party marginal under the other party's setting.
    pub no_signaling_defect: Option<f64>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.normalization_errors.is_empty() && self.negative_entries.is_empty()
    }

    pub fn messages(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .negative_entries
            .iter()
            .map(|((x, y, a, b), v)| format!("p[{x}][{y}][{a}][{b}] = {v} is negative"))
            .collect();
        out.extend(
            self.normalization_errors
                .iter()
                .map(|(x, y, s)| format!("slice p[{x}][{y}] sums to {s}, not 1")),
        );
        out
    }
}

impl Correlation {
    /// Validates and stores a correlation, clamping `[-1e-12, 0)` to zero.
    pub fn new(scenario: BellScenario, p: Vec<f64>) -> Result<Self> {
        let c = Self::from_raw(scenario, p)?;
        let report = validate_correlation(&c, false)?;
        if !report.is_valid() {
            return Err(Error::Validation(report.messages()));
        }
        Ok(c.clamped())
    }

    /// Stores a tensor with only a shape check.
    pub fn from_raw(scenario: BellScenario, p: Vec<f64>) -> Result<Self> {
        scenario.check()?;
        if p.len() != scenario.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} probabilities for scenario {scenario:?}",
                p.len()
            )));
        }
        Ok(Self { scenario, p })
    }

    pub fn from_fn(scenario: BellScenario, f: impl Fn(usize, usize, usize, usize) -> f64) -> Result<Self> {
        let p = scenario.indices().map(|(x, y, a, b)| f(x, y, a, b)).collect();
        Self::new(scenario, p)
    }

    pub fn uniform(scenario: BellScenario) -> Self {
        let v = 1.0 / (scenario.na * scenario.nb) as f64;
        Self {
            scenario,
            p: vec![v; scenario.len()],
        }
    }

    fn clamped(mut self) -> Self {
        for v in self.p.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        self
    }

    pub fn scenario(&self) -> BellScenario {
        self.scenario
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    #[inline]
    pub fn prob(&self, x: usize, y: usize, a: usize, b: usize) -> f64 {
        self.p[self.scenario.index(x, y, a, b)]
    }

    /// `w·self + (1−w)·other`
    pub fn mix(&self, other: &Self, w: f64) -> Result<Self> {
        if self.scenario != other.scenario {
            return Err(Error::ShapeMismatch("mixing correlations of different scenarios".into()));
        }
        let p = self.p.iter().zip(&other.p).map(|(a, b)| w * a + (1.0 - w) * b).collect();
        Ok(Self {
            scenario: self.scenario,
            p,
        })
    }
}

/// Checks normalization and sign, and optionally measures signalling.
///
/// Signalling is reported, never rejected: finite-shot data breaks
/// no-signalling slightly.
pub fn validate_correlation(c: &Correlation, check_no_signaling: bool) -> Result<ValidationReport> {
    let s = c.scenario;
    if c.p.len() != s.len() {
        return Err(Error::ShapeMismatch(format!("{} entries for {s:?}", c.p.len())));
    }
    let mut report = ValidationReport {
        normalization_errors: vec![],
        negative_entries: vec![],
        no_signaling_defect: None,
    };
    for (x, y, a, b) in s.indices() {
        let v = c.prob(x, y, a, b);
        if v < -NEGATIVE_PROBABILITY_TOL || !v.is_finite() {
            report.negative_entries.push(((x, y, a, b), v));
        }
    }
    for x in 0..s.nx {
        for y in 0..s.ny {
            let sum: f64 = (0..s.na).flat_map(|a| (0..s.nb).map(move |b| (a, b))).map(|(a, b)| c.prob(x, y, a, b)).sum();
            if (sum - 1.0).abs() > NORMALIZATION_TOL || !sum.is_finite() {
                report.normalization_errors.push((x, y, sum));
            }
        }
    }
    if check_no_signaling {
        let mut defect = 0.0f64;
        for x in 0..s.nx {
            for a in 0..s.na {
                let marg: Vec<f64> = (0..s.ny).map(|y| (0..s.nb).map(|b| c.prob(x, y, a, b)).sum()).collect();
                for m in &marg {
                    defect = defect.max((m - marg[0]).abs());
                }
            }
        }
        for y in 0..s.ny {
            for b in 0..s.nb {
                let marg: Vec<f64> = (0..s.nx).map(|x| (0..s.na).map(|a| c.prob(x, y, a, b)).sum()).collect();
                for m in &marg {
                    defect = defect.max((m - marg[0]).abs());
                }
            }
        }
        report.no_signaling_defect = Some(defect);
    }
    Ok(report)
}

/// `Σ s·p`
pub fn evaluate_bell(expr: &BellExpression, c: &Correlation) -> Result<f64> {
    if expr.scenario != c.scenario {
        return Err(Error::ShapeMismatch(format!(
            "expression scenario {:?} vs correlation scenario {:?}",
            expr.scenario, c.scenario
        )));
    }
    Ok(expr.coeffs.iter().zip(&c.p).map(|(s, p)| s * p).sum())
}

/// Per-setting POVMs of one party on `C^dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementAssemblage {
    dim: usize,
    /// `povms[x][a]`
    povms: Vec<Vec<ComplexMatrix>>,
}

impl MeasurementAssemblage {
    /// Validates positivity and completeness of every setting.
    pub fn new(dim: usize, povms: Vec<Vec<ComplexMatrix>>) -> Result<Self> {
        let m = Self::from_parts(dim, povms)?;
        let problems = m.defects();
        if !problems.is_empty() {
            return Err(Error::Validation(problems));
        }
        Ok(m)
    }

    /// Shape checks only; the optimizer builds POVMs it knows are valid.
    pub(crate) fn from_parts(dim: usize, povms: Vec<Vec<ComplexMatrix>>) -> Result<Self> {
        if dim == 0 || povms.is_empty() || povms.iter().any(|s| s.is_empty()) {
            return Err(Error::InvalidArgument("assemblage needs dim ≥ 1 and nonempty settings".into()));
        }
        for (x, setting) in povms.iter().enumerate() {
            if let Some(a) = setting.iter().position(|m| m.rows() != dim || m.cols() != dim) {
                return Err(Error::DimensionMismatch(format!("element [{x}][{a}] is not {dim}x{dim}")));
            }
        }
        Ok(Self { dim, povms })
    }

    /// Invariant violations, empty when valid.
    pub fn defects(&self) -> Vec<String> {
        let mut out = vec![];
        let id = ComplexMatrix::identity(self.dim);
        for (x, setting) in self.povms.iter().enumerate() {
            let mut sum = ComplexMatrix::zeros(self.dim, self.dim);
            for (a, m) in setting.iter().enumerate() {
                sum += m;
                match eigen_hermitian(m) {
                    Ok(s) => {
                        let low = s.eigenvalues.last().copied().unwrap_or(0.0);
                        if low < -POVM_PSD_TOL {
                            out.push(format!("element [{x}][{a}] has eigenvalue {low}"));
                        }
                    }
                    Err(e) => out.push(format!("element [{x}][{a}]: {e}")),
                }
            }
            let err = (&sum - &id).max_abs();
            if err > POVM_COMPLETENESS_TOL {
                out.push(format!("setting {x} sums to identity only within {err:.3e}"));
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn settings(&self) -> usize {
        self.povms.len()
    }

    pub fn outcomes(&self) -> usize {
        self.povms[0].len()
    }

    pub fn povms(&self) -> &[Vec<ComplexMatrix>] {
        &self.povms
    }

    pub fn element(&self, x: usize, a: usize) -> &ComplexMatrix {
        &self.povms[x][a]
    }

    pub(crate) fn set_setting(&mut self, x: usize, povm: Vec<ComplexMatrix>) {
        self.povms[x] = povm;
    }

    /// Applies `U · M · U†` to every element.
    pub fn rotated(&self, u: &ComplexMatrix) -> Self {
        let ud = u.adjoint();
        let povms = self
            .povms
            .iter()
            .map(|s| s.iter().map(|m| (&(u * m) * &ud).hermitize()).collect())
            .collect();
        Self { dim: self.dim, povms }
    }

    fn fits(&self, settings: usize, outcomes: usize) -> bool {
        self.povms.len() == settings && self.povms.iter().all(|s| s.len() == outcomes)
    }
}

/// `H = Σ s_abxy M_x^a ⊗ M_y^b`, acting on `C^dA ⊗ C^dB`.
#[derive(Debug, Clone)]
pub struct BellOperator {
    pub matrix: ComplexMatrix,
    pub dim_a: usize,
    pub dim_b: usize,
}

impl BellOperator {
    /// `⟨ψ|H|ψ⟩`
    pub fn expectation(&self, psi: &[C64]) -> f64 {
        self.matrix.sandwich(psi, psi).re
    }

    /// `tr(ρH)`
    pub fn expectation_mixed(&self, rho: &ComplexMatrix) -> f64 {
        rho.trace_product(&self.matrix).re
    }
}

fn check_assemblages(expr: &BellExpression, alice: &MeasurementAssemblage, bob: &MeasurementAssemblage) -> Result<()> {
    let s = expr.scenario;
    if !alice.fits(s.nx, s.na) || !bob.fits(s.ny, s.nb) {
        return Err(Error::DimensionMismatch(format!(
            "assemblages ({}x{}, {}x{}) do not fit scenario {s:?}",
            alice.settings(),
            alice.outcomes(),
            bob.settings(),
            bob.outcomes()
        )));
    }
    Ok(())
}

pub fn bell_operator(expr: &BellExpression, alice: &MeasurementAssemblage, bob: &MeasurementAssemblage) -> Result<BellOperator> {
    check_assemblages(expr, alice, bob)?;
    let s = expr.scenario;
    let (da, db) = (alice.dim, bob.dim);
    let mut h = ComplexMatrix::zeros(da * db, da * db);
    // Σ_a M_x^a ⊗ (Σ_b s M_y^b): one Kronecker product per (x, y, a).
    for x in 0..s.nx {
        for y in 0..s.ny {
            for a in 0..s.na {
                let mut bob_part = ComplexMatrix::zeros(db, db);
                let mut any = false;
                for b in 0..s.nb {
                    let c = expr.coeff(x, y, a, b);
                    if c != 0.0 {
                        bob_part.add_scaled(&bob.povms[y][b], C64::new(c, 0.0));
                        any = true;
                    }
                }
                if any {
                    kron_add_into(&mut h, &alice.povms[x][a], &bob_part, 1.0);
                }
            }
        }
    }
    Ok(BellOperator {
        matrix: h.hermitize(),
        dim_a: da,
        dim_b: db,
    })
}

/// Checks that `rho` is a density matrix on `n` dimensions.
pub fn check_state(rho: &ComplexMatrix, n: usize) -> Result<()> {
    if rho.rows() != n || rho.cols() != n {
        return Err(Error::DimensionMismatch(format!("state is {}x{}, expected {n}x{n}", rho.rows(), rho.cols())));
    }
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > 1e-9 || tr.im.abs() > 1e-9 {
        return Err(Error::NotAState(format!("trace {tr}")));
    }
    let spec = eigen_hermitian(rho).map_err(|e| Error::NotAState(e.to_string()))?;
    let low = spec.eigenvalues.last().copied().unwrap_or(0.0);
    if low < -1e-9 {
        return Err(Error::NotAState(format!("eigenvalue {low}")));
    }
    Ok(())
}

/// Born-rule correlation `p(ab|xy) = tr(ρ (M_x^a ⊗ M_y^b))`.
pub fn born_correlation(rho: &ComplexMatrix, alice: &MeasurementAssemblage, bob: &MeasurementAssemblage) -> Result<Correlation> {
    let (da, db) = (alice.dim, bob.dim);
    check_state(rho, da * db)?;
    let scenario = BellScenario::new(alice.settings(), bob.settings(), alice.outcomes(), bob.outcomes())?;
    if !alice.fits(scenario.nx, scenario.na) || !bob.fits(scenario.ny, scenario.nb) {
        return Err(Error::DimensionMismatch("ragged assemblage".into()));
    }
    let mut p = vec![0.0; scenario.len()];
    for (x, y, a, b) in scenario.indices() {
        let op = kron(&alice.povms[x][a], &bob.povms[y][b]);
        p[scenario.index(x, y, a, b)] = rho.trace_product(&op).re;
    }
    for v in p.iter_mut() {
        if *v < 0.0 && *v > -1e-10 {
            *v = 0.0;
        }
    }
    Correlation::new(scenario, p)
}

/// The best deterministic local strategy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassicalBound {
    pub value: f64,
    /// Alice's outcome for each setting.
    pub alice: Vec<usize>,
    /// Bob's outcome for each setting.
    pub bob: Vec<usize>,
}

/// Exact local bound by enumerating every deterministic assignment.
pub fn classical_bound(expr: &BellExpression) -> Result<ClassicalBound> {
    let s = expr.scenario;
    let count = (s.na as f64).powi(s.nx as i32) * (s.nb as f64).powi(s.ny as i32);
    if count > MAX_DETERMINISTIC_STRATEGIES {
        return Err(Error::TooLargeToEnumerate(count));
    }
    let alice_strategies = strategies(s.nx, s.na);
    let bob_strategies = strategies(s.ny, s.nb);
    let mut best: Option<ClassicalBound> = None;
    for al in &alice_strategies {
        for bo in &bob_strategies {
            let mut v = 0.0;
            for x in 0..s.nx {
                for y in 0..s.ny {
                    v += expr.coeff(x, y, al[x], bo[y]);
                }
            }
            if best.as_ref().map_or(true, |b| v > b.value) {
                best = Some(ClassicalBound {
                    value: v,
                    alice: al.clone(),
                    bob: bo.clone(),
                });
            }
        }
    }
    Ok(best.expect("at least one strategy"))
}

/// Value of a single deterministic strategy.
pub fn deterministic_value(expr: &BellExpression, alice: &[usize], bob: &[usize]) -> f64 {
    let s = expr.scenario;
    let mut v = 0.0;
    for x in 0..s.nx {
        for y in 0..s.ny {
            v += expr.coeff(x, y, alice[x], bob[y]);
        }
    }
    v
}

/// All maps `settings → outcomes`, as outcome vectors.
pub(crate) fn strategies(settings: usize, outcomes: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..settings {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..outcomes).map(move |o| {
                    let mut p = prefix.clone();
                    p.push(o);
                    p
                })
            })
            .collect();
    }
    out
}

/// Names accepted by [`builtin_expression`].
pub const BUILTIN_NAMES: [&str; 2] = ["cglmp3", "chsh"];

/// Builtin expressions: `cglmp3` and `chsh`.
pub fn builtin_expression(name: &str) -> Result<BellExpression> {
    match name.to_ascii_lowercase().as_str() {
        "cglmp3" | "cglmp" => Ok(cglmp3()),
        "chsh" => Ok(chsh()),
        other => Err(Error::UnknownName(other.to_string())),
    }
}

/// CGLMP for qutrits in the form
/// `P(A2 ≥ B2) + P(B2 ≥ A1) + P(A1 ≥ B1) + P(B1 > A2) ≤ 3`
/// with 1-based settings `A1, A2, B1, B2` stored as 0 and 1.
fn cglmp3() -> BellExpression {
    let scenario = BellScenario { nx: 2, ny: 2, na: 3, nb: 3 };
    BellExpression::from_fn("cglmp3", scenario, |x, y, a, b| {
        let on = match (x, y) {
            (1, 1) => a >= b,
            (0, 1) => b >= a,
            (0, 0) => a >= b,
            (1, 0) => b > a,
            _ => false,
        };
        if on {
            1.0
        } else {
            0.0
        }
    })
}

/// CHSH `E11 + E12 + E21 − E22` with correlators `E = Σ (−1)^{a+b} p(ab|xy)`.
fn chsh() -> BellExpression {
    let scenario = BellScenario { nx: 2, ny: 2, na: 2, nb: 2 };
    BellExpression::from_fn("chsh", scenario, |x, y, a, b| {
        let parity = if (a + b) % 2 == 0 { 1.0 } else { -1.0 };
        let sign = if x == 1 && y == 1 { -1.0 } else { 1.0 };
        parity * sign
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::sample::{random_density_matrix, random_measurement, random_pure_state, rng_from_seed};
    use crate::numerics::ComplexMatrix;
    use rand::Rng;

    fn random_assemblage<R: Rng>(dim: usize, settings: usize, outcomes: usize, rng: &mut R) -> MeasurementAssemblage {
        let povms = (0..settings).map(|_| random_measurement(dim, outcomes, rng)).collect();
        MeasurementAssemblage::new(dim, povms).unwrap()
    }

    #[test]
    fn cglmp_layout() {
        let e = builtin_expression("cglmp3").unwrap();
        assert_eq!(e.nonzero_count(), 21);
        assert_eq!(e.coeff(1, 1, 2, 0), 1.0);
        assert_eq!(e.coeff(1, 1, 0, 2), 0.0);
        assert_eq!(e.coeff(1, 0, 1, 1), 0.0);
        assert_eq!(e.coeff(1, 0, 1, 2), 1.0);
        assert_eq!(e.coeff(0, 1, 1, 1), 1.0);
    }

    #[test]
    fn unknown_builtin() {
        assert_eq!(builtin_expression("i3322"), Err(Error::UnknownName("i3322".into())));
    }

    #[test]
    fn cglmp_on_deterministic_and_uniform() {
        let e = builtin_expression("cglmp3").unwrap();
        let det = Correlation::from_fn(e.scenario(), |_, _, a, b| if a == 0 && b == 0 { 1.0 } else { 0.0 }).unwrap();
        assert_eq!(evaluate_bell(&e, &det).unwrap(), 3.0);
        // by enumeration: a ≥ b holds on 6 of 9 pairs, b > a on 3 of 9
        let uni = Correlation::uniform(e.scenario());
        let expect = 3.0 * 6.0 / 9.0 + 3.0 / 9.0;
        assert!((evaluate_bell(&e, &uni).unwrap() - expect).abs() < 1e-15);
        assert!((expect - 7.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn classical_bounds() {
        let cb = classical_bound(&builtin_expression("cglmp3").unwrap()).unwrap();
        assert_eq!(cb.value, 3.0);
        assert_eq!(deterministic_value(&builtin_expression("cglmp3").unwrap(), &cb.alice, &cb.bob), 3.0);
        let chsh = builtin_expression("chsh").unwrap();
        assert_eq!(classical_bound(&chsh).unwrap().value, 2.0);
        let zero = BellExpression::from_fn("zero", chsh.scenario(), |_, _, _, _| 0.0);
        assert_eq!(classical_bound(&zero).unwrap().value, 0.0);
    }

    #[test]
    fn classical_bound_guard() {
        let big = BellScenario::new(20, 20, 3, 3).unwrap();
        let e = BellExpression::from_fn("big", big, |_, _, _, _| 1.0);
        assert!(matches!(classical_bound(&e), Err(Error::TooLargeToEnumerate(_))));
    }

    #[test]
    fn validation_reports() {
        let s = BellScenario::new(2, 2, 3, 3).unwrap();
        let uni = Correlation::uniform(s);
        let r = validate_correlation(&uni, true).unwrap();
        assert!(r.is_valid());
        assert!(r.no_signaling_defect.unwrap() < 1e-15);

        let mut p = uni.probabilities().to_vec();
        for v in p.iter_mut().take(9) {
            *v *= 0.9;
        }
        let bad = Correlation::from_raw(s, p.clone()).unwrap();
        let r = validate_correlation(&bad, false).unwrap();
        assert_eq!(r.normalization_errors.len(), 1);
        assert!((r.normalization_errors[0].2 - 0.9).abs() < 1e-12);
        assert!(matches!(Correlation::new(s, p), Err(Error::Validation(_))));

        let mut p = uni.probabilities().to_vec();
        p[0] -= 1e-13;
        p[1] += 1e-13;
        let c = Correlation::new(s, p).unwrap();
        assert!(c.probabilities().iter().all(|&v| v >= 0.0));

        assert!(matches!(Correlation::from_raw(s, vec![0.0; 3]), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn born_rule_products() {
        let mut rng = rng_from_seed(21);
        let alice = random_assemblage(3, 2, 3, &mut rng);
        let bob = random_assemblage(3, 2, 3, &mut rng);
        let mixed = ComplexMatrix::identity(9).scale_real(1.0 / 9.0);
        let c = born_correlation(&mixed, &alice, &bob).unwrap();
        for (x, y, a, b) in c.scenario().indices() {
            let want = alice.element(x, a).trace().re * bob.element(y, b).trace().re / 9.0;
            assert!((c.prob(x, y, a, b) - want).abs() < 1e-12);
        }
        let ra = random_density_matrix(3, &mut rng);
        let rb = random_density_matrix(3, &mut rng);
        let c = born_correlation(&kron(&ra, &rb), &alice, &bob).unwrap();
        for (x, y, a, b) in c.scenario().indices() {
            let pa = alice.element(x, a).trace_product(&ra).re;
            let pb = bob.element(y, b).trace_product(&rb).re;
            assert!((c.prob(x, y, a, b) - pa * pb).abs() < 1e-10);
        }
    }

    #[test]
    fn born_rule_rejects_non_states() {
        let mut rng = rng_from_seed(22);
        let alice = random_assemblage(2, 2, 2, &mut rng);
        let bob = random_assemblage(2, 2, 2, &mut rng);
        let not_state = ComplexMatrix::identity(4);
        assert!(matches!(born_correlation(&not_state, &alice, &bob), Err(Error::NotAState(_))));
        let wrong = ComplexMatrix::identity(3).scale_real(1.0 / 3.0);
        assert!(matches!(born_correlation(&wrong, &alice, &bob), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn operator_single_term() {
        let mut rng = rng_from_seed(23);
        let alice = random_assemblage(2, 2, 2, &mut rng);
        let bob = random_assemblage(2, 2, 2, &mut rng);
        let s = BellScenario::new(2, 2, 2, 2).unwrap();
        let e = BellExpression::from_fn("one", s, |x, y, a, b| if (x, y, a, b) == (1, 0, 1, 1) { 1.0 } else { 0.0 });
        let h = bell_operator(&e, &alice, &bob).unwrap();
        let want = kron(alice.element(1, 1), bob.element(0, 1));
        assert!((&h.matrix - &want).max_abs() < 1e-15);
    }

    #[test]
    fn operator_and_correlation_agree() {
        let mut rng = rng_from_seed(24);
        for name in BUILTIN_NAMES {
            let e = builtin_expression(name).unwrap();
            let s = e.scenario();
            for d in [2usize, 3] {
                for _ in 0..10 {
                    let alice = random_assemblage(d, s.nx, s.na, &mut rng);
                    let bob = random_assemblage(d, s.ny, s.nb, &mut rng);
                    let h = bell_operator(&e, &alice, &bob).unwrap();
                    assert!(h.matrix.is_hermitian(1e-10));
                    let psi = random_pure_state(d * d, &mut rng);
                    let c = born_correlation(&ComplexMatrix::projector(&psi), &alice, &bob).unwrap();
                    let r = validate_correlation(&c, true).unwrap();
                    assert!(r.is_valid());
                    assert!(r.no_signaling_defect.unwrap() <= 1e-9);
                    assert!((h.expectation(&psi) - evaluate_bell(&e, &c).unwrap()).abs() <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn assemblage_validation() {
        let bad = vec![vec![ComplexMatrix::identity(2), ComplexMatrix::identity(2)]];
        assert!(matches!(MeasurementAssemblage::new(2, bad), Err(Error::Validation(_))));
        let neg = vec![vec![
            ComplexMatrix::from_real_diag(&[1.5, 0.0]),
            ComplexMatrix::from_real_diag(&[-0.5, 1.0]),
        ]];
        let err = MeasurementAssemblage::new(2, neg).unwrap_err();
        assert!(err.to_string().contains("eigenvalue"));
        let wrong = vec![vec![ComplexMatrix::identity(3)]];
        assert!(matches!(MeasurementAssemblage::new(2, wrong), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn json_roundtrip() {
        let e = builtin_expression("cglmp3").unwrap();
        let s = serde_json::to_string(&e).unwrap();
        assert!(s.contains("\"scenario\":{\"nx\":2,\"ny\":2,\"na\":3,\"nb\":3}"));
        let back: BellExpression = serde_json::from_str(&s).unwrap();
        assert_eq!(back, e);
        let bad = r#"{"scenario":{"nx":1,"ny":1,"na":2,"nb":2},"coeffs":[[[[1,0]]]]}"#;
        assert!(serde_json::from_str::<BellExpression>(bad).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn evaluation_is_linear(seed in 0u64..10_000, w in 0.0f64..=1.0) {
                let mut rng = rng_from_seed(seed);
                let e = builtin_expression("cglmp3").unwrap();
                let alice = random_assemblage(3, 2, 3, &mut rng);
                let bob = random_assemblage(3, 2, 3, &mut rng);
                let c1 = born_correlation(&random_density_matrix(9, &mut rng), &alice, &bob).unwrap();
                let c2 = born_correlation(&random_density_matrix(9, &mut rng), &alice, &bob).unwrap();
                let mix = c1.mix(&c2, w).unwrap();
                let lhs = evaluate_bell(&e, &mix).unwrap();
                let rhs = w * evaluate_bell(&e, &c1).unwrap() + (1.0 - w) * evaluate_bell(&e, &c2).unwrap();
                prop_assert!((lhs - rhs).abs() < 1e-12);
            }

            #[test]
            fn no_deterministic_strategy_beats_three(al in proptest::collection::vec(0usize..3, 2), bo in proptest::collection::vec(0usize..3, 2)) {
                let e = builtin_expression("cglmp3").unwrap();
                prop_assert!(deterministic_value(&e, &al, &bo) <= 3.0);
            }
        }
    }
}
