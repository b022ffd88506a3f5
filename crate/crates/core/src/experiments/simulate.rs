//! Synthetic correlations from known states and measurements.

use std::path::PathBuf;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::bell::{born_correlation, check_state, evaluate_bell, BellExpression, Correlation, MeasurementAssemblage};
use crate::error::{Error, Result};
use crate::numerics::sample::{maximally_entangled, random_density_matrix, random_measurement, random_pure_state, rng_from_seed};
use crate::numerics::{eigen_hermitian, matricize, ComplexMatrix, C64, ZERO};
use crate::tsirelson::{seesaw, SeesawConfig};

use super::io::{read_text, to_json};

/// Schmidt coefficient ratio of the qutrit state that maximizes the CGLMP value.
pub fn optimal_cglmp_gamma() -> f64 {
    (11f64.sqrt() - 3f64.sqrt()) / 2.0
}

/// `(|00⟩ + γ|11⟩ + |22⟩)/√(2 + γ²)`
pub fn optimal_cglmp_state() -> Vec<C64> {
    let g = optimal_cglmp_gamma();
    let n = (2.0 + g * g).sqrt();
    let mut v = vec![ZERO; 9];
    v[0] = C64::new(1.0 / n, 0.0);
    v[4] = C64::new(g / n, 0.0);
    v[8] = C64::new(1.0 / n, 0.0);
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateSource {
    OptimalCglmp,
    MaximallyEntangled,
    RandomPure,
    RandomMixed,
    /// JSON matrix: a `d²×1` pure state or a `d²×d²` density matrix.
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// Mix with `I/d²`.
    #[default]
    White,
    /// Mix with a random density matrix.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementSource {
    /// Best seesaw measurements at `t = 1`.
    Optimal,
    Random,
    /// JSON `{"alice": assemblage, "bob": assemblage}`.
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shots {
    Exact,
    Finite(u64),
}

impl Serialize for Shots {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Shots::Exact => s.serialize_str("exact"),
            Shots::Finite(n) => s.serialize_u64(*n),
        }
    }
}

impl<'de> Deserialize<'de> for Shots {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Word(String),
            Count(u64),
        }
        match Repr::deserialize(d)? {
            Repr::Word(w) if w == "exact" => Ok(Shots::Exact),
            Repr::Word(w) => Err(serde::de::Error::custom(format!("shots must be \"exact\" or a count, got \"{w}\""))),
            Repr::Count(n) => Ok(Shots::Finite(n)),
        }
    }
}

impl std::str::FromStr for Shots {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "exact" {
            return Ok(Shots::Exact);
        }
        s.parse::<u64>()
            .map(Shots::Finite)
            .map_err(|_| Error::BadSpec(format!("shots must be \"exact\" or a count, got \"{s}\"")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub state: StateSource,
    pub noise_w: f64,
    #[serde(default)]
    pub noise: NoiseKind,
    pub measurement_source: MeasurementSource,
    pub shots: Shots,
    pub seed: u64,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        Self {
            state: StateSource::OptimalCglmp,
            noise_w: 0.0,
            noise: NoiseKind::White,
            measurement_source: MeasurementSource::Optimal,
            shots: Shots::Exact,
            seed: 0,
        }
    }
}

impl SimulationSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.noise_w) {
            return Err(Error::BadSpec(format!("noise_w {} outside [0, 1]", self.noise_w)));
        }
        if self.shots == Shots::Finite(0) {
            return Err(Error::BadSpec("shots must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssemblagePair {
    pub alice: MeasurementAssemblage,
    pub bob: MeasurementAssemblage,
}

/// A simulated correlation with the state and measurements behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRecord {
    pub correlation: Correlation,
    pub violation: f64,
    pub state: ComplexMatrix,
    pub alice: MeasurementAssemblage,
    pub bob: MeasurementAssemblage,
}

impl SimulationRecord {
    pub fn to_json(&self) -> Result<String> {
        to_json(self)
    }
}

/// Base state and measurements, prepared once and reused across noise levels.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub spec: SimulationSpec,
    pub expr: BellExpression,
    pub d: usize,
    pub base: ComplexMatrix,
    pub alice: MeasurementAssemblage,
    pub bob: MeasurementAssemblage,
    /// Largest Schmidt-coefficient mismatch between the seesaw optimum and
    /// the closed-form optimal state, when the two were aligned.
    pub alignment_defect: Option<f64>,
}

fn load_state(path: &std::path::Path, d: usize) -> Result<ComplexMatrix> {
    let m: ComplexMatrix = serde_json::from_str(&read_text(path)?).map_err(|e| Error::BadSpec(format!("{}: {e}", path.display())))?;
    let n = d * d;
    if m.rows() == n && m.cols() == 1 {
        let v = crate::numerics::normalize(m.as_slice()).ok_or_else(|| Error::BadSpec("state vector is zero".into()))?;
        Ok(ComplexMatrix::projector(&v))
    } else if m.rows() == n && m.cols() == n {
        check_state(&m, n)?;
        Ok(m)
    } else {
        Err(Error::BadSpec(format!("state file holds a {}x{} matrix, expected {n}x1 or {n}x{n}", m.rows(), m.cols())))
    }
}

/// Local unitaries taking the closed-form optimal state to `psi`, as long
/// as `psi` has the same Schmidt coefficients.
fn align_to_optimal(psi: &[C64]) -> Result<(ComplexMatrix, ComplexMatrix, f64)> {
    let m = matricize(psi, 3, 3)?;
    let spec = eigen_hermitian(&(&m * &m.adjoint()))?;
    let target = optimal_cglmp_state();
    // closed form has coefficients (1, γ, 1)/N; descending Schmidt order is (1, 1, γ)/N
    let order = [0usize, 2, 1];
    let mut ua = ComplexMatrix::zeros(3, 3);
    let mut ub = ComplexMatrix::zeros(3, 3);
    let mut defect = 0.0f64;
    for (i, &k) in order.iter().enumerate() {
        let s = spec.eigenvalues[k].max(0.0).sqrt();
        defect = defect.max((s - target[i * 3 + i].re).abs());
        let u = spec.vector(k);
        let uc: Vec<C64> = u.iter().map(|z| z.conj()).collect();
        let v: Vec<C64> = m.transpose().mat_vec(&uc).iter().map(|z| z / s).collect();
        ua.set_column(i, &u);
        ub.set_column(i, &v);
    }
    Ok((ua, ub, defect))
}

impl Simulator {
    pub fn new(spec: &SimulationSpec, expr: &BellExpression, d: usize, cfg: &SeesawConfig) -> Result<Self> {
        spec.validate()?;
        if d == 0 {
            return Err(Error::BadSpec("d must be positive".into()));
        }
        let s = expr.scenario();
        let n = d * d;
        let mut rng = rng_from_seed(spec.seed);
        let base = match &spec.state {
            StateSource::OptimalCglmp => {
                if d != 3 || (s.na, s.nb) != (3, 3) {
                    return Err(Error::BadSpec("optimal_cglmp needs d = 3 and three outcomes per party".into()));
                }
                ComplexMatrix::projector(&optimal_cglmp_state())
            }
            StateSource::MaximallyEntangled => ComplexMatrix::projector(&maximally_entangled(d)),
            StateSource::RandomPure => ComplexMatrix::projector(&random_pure_state(n, &mut rng)),
            StateSource::RandomMixed => random_density_matrix(n, &mut rng),
            StateSource::File(p) => load_state(p, d)?,
        };
        let mut alignment_defect = None;
        let (alice, bob) = match &spec.measurement_source {
            MeasurementSource::Random => {
                let al = (0..s.nx).map(|_| random_measurement(d, s.na, &mut rng)).collect();
                let bo = (0..s.ny).map(|_| random_measurement(d, s.nb, &mut rng)).collect();
                (MeasurementAssemblage::new(d, al)?, MeasurementAssemblage::new(d, bo)?)
            }
            MeasurementSource::File(p) => {
                let pair: AssemblagePair =
                    serde_json::from_str(&read_text(p)?).map_err(|e| Error::BadSpec(format!("{}: {e}", p.display())))?;
                let al = MeasurementAssemblage::new(pair.alice.dim(), pair.alice.povms().to_vec())?;
                let bo = MeasurementAssemblage::new(pair.bob.dim(), pair.bob.povms().to_vec())?;
                if al.dim() != d || bo.dim() != d {
                    return Err(Error::BadSpec(format!("measurement file is for dimension {}, not {d}", al.dim())));
                }
                (al, bo)
            }
            MeasurementSource::Optimal => {
                let est = seesaw(expr, d, 1, cfg)?;
                if spec.state == StateSource::OptimalCglmp {
                    let h = est.operator(expr)?;
                    let top = eigen_hermitian(&h.matrix)?.vector(0);
                    let (ua, ub, defect) = align_to_optimal(&top)?;
                    alignment_defect = Some(defect);
                    (est.best_alice.rotated(&ua.adjoint()), est.best_bob.rotated(&ub.adjoint()))
                } else {
                    (est.best_alice, est.best_bob)
                }
            }
        };
        Ok(Self {
            spec: spec.clone(),
            expr: expr.clone(),
            d,
            base,
            alice,
            bob,
            alignment_defect,
        })
    }

    /// Correlation at noise weight `w`; `seed` drives the noise state and shots.
    pub fn run(&self, w: f64, seed: u64) -> Result<SimulationRecord> {
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::BadSpec(format!("noise weight {w} outside [0, 1]")));
        }
        let n = self.d * self.d;
        let mut rng = rng_from_seed(seed);
        rng.set_stream(1);
        let noise = match self.spec.noise {
            NoiseKind::White => ComplexMatrix::identity(n).scale_real(1.0 / n as f64),
            NoiseKind::Random => random_density_matrix(n, &mut rng),
        };
        let mut state = self.base.scale_real(1.0 - w);
        state.add_scaled(&noise, C64::new(w, 0.0));
        let state = state.hermitize();
        let mut correlation = born_correlation(&state, &self.alice, &self.bob)?;
        if let Shots::Finite(shots) = self.spec.shots {
            correlation = sample_frequencies(&correlation, shots, &mut rng)?;
        }
        let violation = evaluate_bell(&self.expr, &correlation)?;
        Ok(SimulationRecord {
            correlation,
            violation,
            state,
            alice: self.alice.clone(),
            bob: self.bob.clone(),
        })
    }
}

/// Multinomial frequencies per setting pair, drawn as successive binomials.
pub fn sample_frequencies(c: &Correlation, shots: u64, rng: &mut ChaCha8Rng) -> Result<Correlation> {
    let s = c.scenario();
    let mut p = Vec::with_capacity(s.len());
    for x in 0..s.nx {
        for y in 0..s.ny {
            let mut left = shots;
            let mut mass = 1.0;
            let cells = s.na * s.nb;
            for (i, (a, b)) in (0..s.na).flat_map(|a| (0..s.nb).map(move |b| (a, b))).enumerate() {
                let q = c.prob(x, y, a, b).max(0.0);
                let k = if i + 1 == cells {
                    left
                } else if left == 0 || q <= 0.0 {
                    0
                } else {
                    let prob = (q / mass).clamp(0.0, 1.0);
                    Binomial::new(left, prob)
                        .map_err(|e| Error::BadSpec(e.to_string()))?
                        .sample(rng)
                };
                left -= k;
                mass -= q;
                p.push(k as f64 / shots as f64);
            }
        }
    }
    Correlation::new(s, p)
}

/// One-shot convenience: prepare and run at the spec's own noise weight.
pub fn simulate_correlation(spec: &SimulationSpec, expr: &BellExpression, d: usize, cfg: &SeesawConfig) -> Result<SimulationRecord> {
    Simulator::new(spec, expr, d, cfg)?.run(spec.noise_w, spec.seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bell::builtin_expression;

    fn cfg() -> SeesawConfig {
        SeesawConfig {
            restarts: 5,
            ..SeesawConfig::default()
        }
    }

    #[test]
    fn optimal_state_reaches_tsirelson() {
        let e = builtin_expression("cglmp3").unwrap();
        let sim = Simulator::new(&SimulationSpec::default(), &e, 3, &cfg()).unwrap();
        // value tolerance 1e-9 leaves the optimal vector accurate to about its square root
        assert!(sim.alignment_defect.unwrap() < 1e-4, "{:?}", sim.alignment_defect);
        let rec = sim.run(0.0, 0).unwrap();
        assert!((rec.violation - 3.3050).abs() < 1e-3, "{}", rec.violation);
        let full = sim.run(1.0, 0).unwrap();
        assert!((full.violation - 7.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn finite_shots_concentrate() {
        let e = builtin_expression("cglmp3").unwrap();
        let spec = SimulationSpec {
            shots: Shots::Finite(1_000_000),
            seed: 9,
            ..SimulationSpec::default()
        };
        let sim = Simulator::new(&spec, &e, 3, &cfg()).unwrap();
        let exact = born_correlation(&sim.base, &sim.alice, &sim.bob).unwrap();
        let rec = sim.run(0.0, 9).unwrap();
        let s = e.scenario();
        for x in 0..2 {
            for y in 0..2 {
                let sum: f64 = (0..3).flat_map(|a| (0..3).map(move |b| (a, b))).map(|(a, b)| rec.correlation.prob(x, y, a, b)).sum();
                assert!((sum - 1.0).abs() < 1e-12);
            }
        }
        let dev = s
            .indices()
            .map(|(x, y, a, b)| (rec.correlation.prob(x, y, a, b) - exact.prob(x, y, a, b)).abs())
            .fold(0.0, f64::max);
        assert!(dev < 5e-3, "{dev}");
        assert_eq!(rec, sim.run(0.0, 9).unwrap());
    }

    #[test]
    fn spec_json_shape() {
        let spec = SimulationSpec {
            state: StateSource::File("s.json".into()),
            shots: Shots::Finite(100),
            ..SimulationSpec::default()
        };
        let v = serde_json::to_value(&spec).unwrap();
        assert_eq!(v["state"]["file"], "s.json");
        assert_eq!(v["shots"], 100);
        assert_eq!(v["measurement_source"], "optimal");
        let back: SimulationSpec = serde_json::from_value(v).unwrap();
        assert_eq!(back, spec);
        let exact: Shots = serde_json::from_str("\"exact\"").unwrap();
        assert_eq!(exact, Shots::Exact);
        assert!(serde_json::from_str::<Shots>("\"many\"").is_err());
    }

    #[test]
    fn bad_specs() {
        let e = builtin_expression("chsh").unwrap();
        let spec = SimulationSpec::default();
        assert!(matches!(Simulator::new(&spec, &e, 2, &cfg()), Err(Error::BadSpec(_))));
        let spec = SimulationSpec { noise_w: 1.5, ..SimulationSpec::default() };
        assert!(spec.validate().is_err());
    }
}
