//! Error models: deterministic single-gate injection and stochastic
//! per-gate noise sampled as quantum trajectories.
//!
//! Each trajectory evolves one pure state. After every gate in the list the
//! qubits that gate touched independently suffer a random Pauli with
//! probability `p_gate`, then every qubit of the register (idle or not)
//! takes one amplitude-damping step with strength `gamma`. The state is
//! measured once at the end.
//!
//! Trajectories keep only nonzero amplitudes, sorted by basis index when
//! sampled. Encoded GHZ circuits never hold more than a handful of them, so
//! a 25-qubit shot costs about as much as a 5-qubit one.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{NaedError, Result};
use crate::logical::{u3_from_matrix, PhysicalCircuit, PhysicalGate};
use crate::rng::{derive_seed, stream_rng};
use crate::statevec::{gates, sample_support, BitString, Matrix2, C64, UNITARY_TOL};

/// `exp(i phi) diag(1, exp(i theta))`, the diagonal family the bit-flip
/// code cannot see.
pub fn phase_error(theta: f64, phi: f64) -> Matrix2 {
    let zero = C64::new(0.0, 0.0);
    let g = C64::from_polar(1.0, phi);
    [[g, zero], [zero, g * C64::from_polar(1.0, theta)]]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InjectedError {
    X,
    Y,
    Z,
    Phase { theta: f64, phi: f64 },
    Custom(Matrix2),
}

impl InjectedError {
    pub fn matrix(&self) -> Matrix2 {
        match *self {
            InjectedError::X => gates::pauli_x(),
            InjectedError::Y => gates::pauli_y(),
            InjectedError::Z => gates::pauli_z(),
            InjectedError::Phase { theta, phi } => phase_error(theta, phi),
            InjectedError::Custom(m) => m,
        }
    }

    pub fn identity() -> Self {
        InjectedError::Phase { theta: 0.0, phi: 0.0 }
    }
}

impl FromStr for InjectedError {
    type Err = NaedError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "X" => Ok(InjectedError::X),
            "Y" => Ok(InjectedError::Y),
            "Z" => Ok(InjectedError::Z),
            other => Err(NaedError::validation(format!("unknown error kind {other:?}, expected X, Y or Z"))),
        }
    }
}

impl fmt::Display for InjectedError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InjectedError::X => f.write_str("X"),
            InjectedError::Y => f.write_str("Y"),
            InjectedError::Z => f.write_str("Z"),
            InjectedError::Phase { .. } => f.write_str("PHASE"),
            InjectedError::Custom(_) => f.write_str("CUSTOM"),
        }
    }
}

/// One error gate placed after gate `site` (`-1`: before the first gate).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InjectionRecord", into = "InjectionRecord")]
pub struct InjectionSpec {
    pub site: isize,
    pub qubit: usize,
    pub error: InjectedError,
}

#[derive(Serialize, Deserialize)]
struct InjectionRecord {
    site: isize,
    qubit: usize,
    error: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    phi: Option<f64>,
    /// Row-major `[re, im]` pairs, only for `CUSTOM`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    matrix: Option<[[f64; 2]; 4]>,
}

impl TryFrom<InjectionRecord> for InjectionSpec {
    type Error = NaedError;

    fn try_from(r: InjectionRecord) -> Result<Self> {
        let error = match r.error.as_str() {
            "PHASE" => InjectedError::Phase { theta: r.theta.unwrap_or(0.0), phi: r.phi.unwrap_or(0.0) },
            "CUSTOM" => {
                let m = r.matrix.ok_or_else(|| NaedError::validation("CUSTOM error needs a matrix"))?;
                let c = |k: usize| C64::new(m[k][0], m[k][1]);
                InjectedError::Custom([[c(0), c(1)], [c(2), c(3)]])
            }
            other => other.parse()?,
        };
        Ok(InjectionSpec { site: r.site, qubit: r.qubit, error })
    }
}

impl From<InjectionSpec> for InjectionRecord {
    fn from(s: InjectionSpec) -> Self {
        let (theta, phi, matrix) = match s.error {
            InjectedError::Phase { theta, phi } => (Some(theta), Some(phi), None),
            InjectedError::Custom(m) => {
                let flat = [m[0][0], m[0][1], m[1][0], m[1][1]].map(|c| [c.re, c.im]);
                (None, None, Some(flat))
            }
            _ => (None, None, None),
        };
        InjectionRecord { site: s.site, qubit: s.qubit, error: s.error.to_string(), theta, phi, matrix }
    }
}

/// Inserts the error gate: X as itself, anything else as the equivalent U3
/// with its global phase dropped.
pub fn inject(circuit: &PhysicalCircuit, spec: &InjectionSpec) -> Result<PhysicalCircuit> {
    let len = circuit.len() as isize;
    if spec.site < -1 || spec.site > len - 1 {
        return Err(NaedError::validation(format!(
            "injection site {} outside -1..{} for a {len}-gate circuit",
            spec.site,
            len - 1
        )));
    }
    if spec.qubit >= circuit.n_qubits() {
        return Err(NaedError::Index { index: spec.qubit, len: circuit.n_qubits() });
    }
    let m = spec.error.matrix();
    let defect = gates::unitarity_defect(&m);
    if !(defect <= UNITARY_TOL) {
        return Err(NaedError::validation(format!("injected error is not unitary (defect {defect:.3e})")));
    }
    let gate = match spec.error {
        InjectedError::X => PhysicalGate::x(spec.qubit),
        _ => {
            let (theta, phi, lambda, _) = u3_from_matrix(&m);
            PhysicalGate::u3(spec.qubit, theta, phi, lambda)
        }
    };
    let mut out = circuit.clone();
    out.insert((spec.site + 1) as usize, gate)?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Y,
    Z,
}

/// Which Paulis the stochastic channel draws from (uniformly).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PauliSet(Vec<Pauli>);

impl PauliSet {
    pub fn all() -> Self {
        PauliSet(vec![Pauli::X, Pauli::Y, Pauli::Z])
    }

    pub fn only(p: Pauli) -> Self {
        PauliSet(vec![p])
    }

    pub fn members(&self) -> &[Pauli] {
        &self.0
    }

    fn is_all(&self) -> bool {
        *self == PauliSet::all()
    }
}

impl Default for PauliSet {
    fn default() -> Self {
        PauliSet::all()
    }
}

impl FromStr for PauliSet {
    type Err = NaedError;

    fn from_str(s: &str) -> Result<Self> {
        let mut out = Vec::new();
        for ch in s.chars() {
            let p = match ch.to_ascii_uppercase() {
                'X' => Pauli::X,
                'Y' => Pauli::Y,
                'Z' => Pauli::Z,
                other => return Err(NaedError::validation(format!("unknown Pauli {other:?}"))),
            };
            if !out.contains(&p) {
                out.push(p);
            }
        }
        if out.is_empty() {
            return Err(NaedError::validation("empty Pauli set"));
        }
        Ok(PauliSet(out))
    }
}

impl fmt::Display for PauliSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.0 {
            write!(f, "{p:?}")?;
        }
        Ok(())
    }
}

impl Serialize for PauliSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PauliSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticModel {
    pub p_gate: f64,
    pub gamma: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "PauliSet::is_all")]
    pub paulis: PauliSet,
}

impl StochasticModel {
    pub fn new(p_gate: f64, gamma: f64, seed: u64) -> Result<Self> {
        let m = StochasticModel { p_gate, gamma, seed, paulis: PauliSet::all() };
        m.validate()?;
        Ok(m)
    }

    pub fn noiseless() -> Self {
        StochasticModel { p_gate: 0.0, gamma: 0.0, seed: 0, paulis: PauliSet::all() }
    }

    pub fn with_paulis(mut self, paulis: PauliSet) -> Self {
        self.paulis = paulis;
        self
    }

    pub fn is_noiseless(&self) -> bool {
        self.p_gate == 0.0 && self.gamma == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("p_gate", self.p_gate), ("gamma", self.gamma)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(NaedError::validation(format!("{name} = {v} not in [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Pure state as nonzero `(basis index, amplitude)` pairs.
#[derive(Debug, Clone)]
pub(crate) struct SparseState {
    n_qubits: usize,
    entries: Vec<(u64, C64)>,
    scratch: Vec<(u64, C64)>,
}

impl SparseState {
    pub(crate) fn new(n_qubits: usize) -> Self {
        SparseState { n_qubits, entries: vec![(0, C64::new(1.0, 0.0))], scratch: Vec::new() }
    }

    fn reset(&mut self) {
        self.entries.clear();
        self.entries.push((0, C64::new(1.0, 0.0)));
    }

    fn mask(&self, q: usize) -> u64 {
        1 << (self.n_qubits - 1 - q)
    }

    fn apply_1q(&mut self, u: &Matrix2, q: usize) {
        let m = self.mask(q);
        let zero = C64::new(0.0, 0.0);
        self.scratch.clear();
        for &(i, a) in &self.entries {
            let b = usize::from(i & m != 0);
            let base = i & !m;
            if u[0][b] != zero {
                self.scratch.push((base, u[0][b] * a));
            }
            if u[1][b] != zero {
                self.scratch.push((base | m, u[1][b] * a));
            }
        }
        self.scratch.sort_unstable_by_key(|e| e.0);
        self.entries.clear();
        for &(i, a) in &self.scratch {
            match self.entries.last_mut() {
                Some(last) if last.0 == i => last.1 += a,
                _ => self.entries.push((i, a)),
            }
        }
        self.entries.retain(|e| e.1 != zero);
    }

    fn apply_x(&mut self, q: usize) {
        let m = self.mask(q);
        self.entries.iter_mut().for_each(|e| e.0 ^= m);
    }

    fn apply_cx(&mut self, control: usize, target: usize) {
        let (c, t) = (self.mask(control), self.mask(target));
        self.entries.iter_mut().filter(|e| e.0 & c != 0).for_each(|e| e.0 ^= t);
    }

    fn apply_pauli(&mut self, p: Pauli, q: usize) {
        let m = self.mask(q);
        match p {
            Pauli::X => self.apply_x(q),
            Pauli::Z => self.entries.iter_mut().filter(|e| e.0 & m != 0).for_each(|e| e.1 = -e.1),
            Pauli::Y => self.entries.iter_mut().for_each(|e| {
                // Y|0> = i|1>, Y|1> = -i|0>
                e.1 *= if e.0 & m != 0 { C64::new(0.0, -1.0) } else { C64::new(0.0, 1.0) };
                e.0 ^= m;
            }),
        }
    }

    pub(crate) fn apply_gate(&mut self, g: &PhysicalGate) {
        match *g {
            PhysicalGate::U3 { qubit, theta, phi, lambda } => self.apply_1q(&gates::u3(theta, phi, lambda), qubit),
            PhysicalGate::Cx { control, target } => self.apply_cx(control, target),
            PhysicalGate::X { qubit } => self.apply_x(qubit),
        }
    }

    /// One amplitude-damping trajectory step: jump `|1> -> |0>` with
    /// probability `gamma * P(q = 1)`, otherwise the no-jump Kraus operator
    /// `diag(1, sqrt(1 - gamma))`; renormalized either way.
    fn damp(&mut self, q: usize, gamma: f64, rng: &mut ChaCha8Rng) {
        let m = self.mask(q);
        let p1: f64 = self.entries.iter().filter(|e| e.0 & m != 0).map(|e| e.1.norm_sqr()).sum();
        if p1 == 0.0 {
            return;
        }
        if rng.random::<f64>() < gamma * p1 {
            self.entries.retain(|e| e.0 & m != 0);
            let scale = 1.0 / p1.sqrt();
            self.entries.iter_mut().for_each(|e| {
                e.0 ^= m;
                e.1 *= scale;
            });
        } else {
            let keep = (1.0 - gamma).sqrt();
            let scale = 1.0 / (1.0 - gamma * p1).sqrt();
            self.entries.iter_mut().for_each(|e| e.1 *= if e.0 & m != 0 { keep * scale } else { scale });
            self.entries.retain(|e| e.1 != C64::new(0.0, 0.0));
        }
    }

    fn measure(&mut self, rng: &mut ChaCha8Rng) -> u64 {
        self.entries.sort_unstable_by_key(|e| e.0);
        let total: f64 = self.entries.iter().map(|e| e.1.norm_sqr()).sum();
        let u = rng.random::<f64>() * total;
        let mut cumulative = 0.0;
        for &(i, a) in &self.entries {
            cumulative += a.norm_sqr();
            if u < cumulative {
                return i;
            }
        }
        self.entries.last().expect("state never empties").0
    }

    /// Nonzero `(index, probability)` pairs in ascending index order.
    pub(crate) fn support(&mut self) -> Vec<(u64, f64)> {
        self.entries.sort_unstable_by_key(|e| e.0);
        self.entries.iter().map(|&(i, a)| (i, a.norm_sqr())).collect()
    }
}

/// Final noiseless state of `circuit`, as `(index, probability)` pairs.
pub(crate) fn noiseless_support(circuit: &PhysicalCircuit) -> Vec<(u64, f64)> {
    let mut state = SparseState::new(circuit.n_qubits());
    circuit.gates().iter().for_each(|g| state.apply_gate(g));
    state.support()
}

/// Integer shot counts closest to `shots` times the exact noiseless
/// distribution (largest-remainder apportionment, ties to the lower index).
pub fn expected_counts(circuit: &PhysicalCircuit, shots: usize) -> Result<Vec<(BitString, u64)>> {
    if shots == 0 {
        return Err(NaedError::validation("shots must be at least 1"));
    }
    let support = noiseless_support(circuit);
    let total: f64 = support.iter().map(|(_, p)| p).sum();
    let mut counts: Vec<(u64, u64, f64)> = support
        .iter()
        .map(|&(i, p)| {
            let x = p / total * shots as f64;
            (i, x.floor() as u64, x - x.floor())
        })
        .collect();
    let assigned: u64 = counts.iter().map(|c| c.1).sum();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| counts[b].2.total_cmp(&counts[a].2).then(counts[a].0.cmp(&counts[b].0)));
    for &k in order.iter().take((shots as u64).saturating_sub(assigned) as usize) {
        counts[k].1 += 1;
    }
    let n = circuit.n_qubits();
    Ok(counts.into_iter().filter(|c| c.1 > 0).map(|(i, c, _)| (BitString::from_index(i, n), c)).collect())
}

fn run_trajectory(circuit: &PhysicalCircuit, model: &StochasticModel, state: &mut SparseState, rng: &mut ChaCha8Rng) -> u64 {
    state.reset();
    let n = circuit.n_qubits();
    let paulis = model.paulis.members();
    for g in circuit.gates() {
        state.apply_gate(g);
        if model.p_gate > 0.0 {
            for q in g.qubits() {
                if rng.random::<f64>() < model.p_gate {
                    let p = paulis[rng.random_range(0..paulis.len())];
                    state.apply_pauli(p, q);
                }
            }
        }
        if model.gamma > 0.0 {
            for q in 0..n {
                state.damp(q, model.gamma, rng);
            }
        }
    }
    state.measure(rng)
}

/// One trajectory per shot. Shot `k` draws from its own stream keyed by
/// `(model.seed, seed, k)`, so the output does not depend on thread count.
/// A noiseless model samples the exact final state and matches
/// [`crate::statevec::StateVector::sample`] with the same `seed`.
pub fn simulate_noisy(circuit: &PhysicalCircuit, model: &StochasticModel, shots: usize, seed: u64) -> Result<Vec<BitString>> {
    model.validate()?;
    if shots == 0 {
        return Err(NaedError::validation("shots must be positive"));
    }
    let n = circuit.n_qubits();
    if model.is_noiseless() {
        let support = noiseless_support(circuit);
        return sample_support(support.into_iter(), n, shots, seed);
    }
    let key = derive_seed(&[model.seed, seed]);
    let out = (0..shots)
        .into_par_iter()
        .map_init(
            || SparseState::new(n),
            |state, k| {
                let mut rng = stream_rng(key, k as u64);
                BitString::from_index(run_trajectory(circuit, model, state, &mut rng), n)
            },
        )
        .collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::build_ghz;
    use crate::statevec::simulate;
    use std::collections::BTreeMap;
    use std::f64::consts::PI;

    #[test]
    fn phase_error_examples() {
        let close = |a: Matrix2, b: Matrix2| (0..4).all(|k| (a[k / 2][k % 2] - b[k / 2][k % 2]).norm() < 1e-14);
        assert!(close(phase_error(0.0, 0.0), gates::identity()));
        assert!(close(phase_error(PI, 0.0), gates::pauli_z()));
        let iz = gates::pauli_z().map(|r| r.map(|c| c * C64::new(0.0, 1.0)));
        assert!(close(phase_error(PI, PI / 2.0), iz));
    }

    #[test]
    fn inject_places_gate_and_validates() {
        let c = build_ghz(2, 2).unwrap();
        let spec = InjectionSpec { site: -1, qubit: 0, error: InjectedError::X };
        let out = inject(&c, &spec).unwrap();
        assert_eq!(out.len(), c.len() + 1);
        assert_eq!(out.gates()[0], PhysicalGate::x(0));
        let spec = InjectionSpec { site: c.len() as isize - 1, qubit: 3, error: InjectedError::Z };
        assert_eq!(inject(&c, &spec).unwrap().len(), c.len() + 1);
        let bad = InjectionSpec { site: c.len() as isize, qubit: 0, error: InjectedError::X };
        assert!(inject(&c, &bad).is_err());
        let bad = InjectionSpec { site: 0, qubit: 4, error: InjectedError::X };
        assert!(inject(&c, &bad).is_err());
        let mut m = gates::identity();
        m[0][1] = C64::new(0.5, 0.0);
        let bad = InjectionSpec { site: 0, qubit: 0, error: InjectedError::Custom(m) };
        assert!(inject(&c, &bad).is_err());
    }

    #[test]
    fn identity_injection_changes_nothing() {
        let c = build_ghz(3, 2).unwrap();
        let base = simulate(&c).unwrap().probabilities();
        for site in -1..c.len() as isize {
            let spec = InjectionSpec { site, qubit: 1, error: InjectedError::identity() };
            let p = simulate(&inject(&c, &spec).unwrap()).unwrap().probabilities();
            assert_eq!(p.keys().collect::<Vec<_>>(), base.keys().collect::<Vec<_>>());
            assert!(p.iter().all(|(k, v)| (v - base[k]).abs() < 1e-12));
        }
    }

    #[test]
    fn injection_json_form() {
        let spec = InjectionSpec { site: 3, qubit: 1, error: InjectedError::Phase { theta: 0.5, phi: 0.25 } };
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(json, r#"{"site":3,"qubit":1,"error":"PHASE","theta":0.5,"phi":0.25}"#);
        assert_eq!(serde_json::from_str::<InjectionSpec>(&json).unwrap(), spec);
        let x: InjectionSpec = serde_json::from_str(r#"{"site":-1,"qubit":0,"error":"X"}"#).unwrap();
        assert_eq!(x.error, InjectedError::X);
        let m = gates::hadamard();
        let spec = InjectionSpec { site: 0, qubit: 0, error: InjectedError::Custom(m) };
        let back: InjectionSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn model_json_form() {
        let m = StochasticModel::new(0.02, 0.01, 7).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(json, r#"{"p_gate":0.02,"gamma":0.01,"seed":7}"#);
        assert_eq!(serde_json::from_str::<StochasticModel>(&json).unwrap(), m);
        let z = m.clone().with_paulis(PauliSet::only(Pauli::Z));
        let json = serde_json::to_string(&z).unwrap();
        assert_eq!(serde_json::from_str::<StochasticModel>(&json).unwrap(), z);
    }

    #[test]
    fn invalid_probabilities_rejected() {
        assert!(StochasticModel::new(1.5, 0.0, 0).is_err());
        assert!(StochasticModel::new(0.0, -0.1, 0).is_err());
        assert!(StochasticModel::new(f64::NAN, 0.0, 0).is_err());
        let bad = StochasticModel { p_gate: 2.0, ..StochasticModel::noiseless() };
        assert!(simulate_noisy(&build_ghz(2, 1).unwrap(), &bad, 10, 0).is_err());
    }

    #[test]
    fn noiseless_model_matches_dense_sampling() {
        for (n, q) in [(2, 1), (2, 2), (3, 3), (4, 2)] {
            let c = build_ghz(n, q).unwrap();
            let dense = simulate(&c).unwrap().sample(4096, 99).unwrap();
            let traj = simulate_noisy(&c, &StochasticModel::noiseless(), 4096, 99).unwrap();
            assert_eq!(dense, traj);
        }
    }

    #[test]
    fn z_only_noise_keeps_every_shot_valid() {
        use crate::analysis::tally;
        use crate::circuits::ghz_code;
        let model = StochasticModel::new(1.0, 0.0, 3).unwrap().with_paulis(PauliSet::only(Pauli::Z));
        for (n, q) in [(2, 2), (3, 3), (4, 2)] {
            let shots = simulate_noisy(&build_ghz(n, q).unwrap(), &model, 2000, 5).unwrap();
            let t = tally(&shots, &ghz_code(q).unwrap(), n).unwrap();
            assert_eq!(t.rb, 0);
        }
    }

    #[test]
    fn full_damping_collapses_to_zero() {
        let c = PhysicalCircuit::from_gates(2, vec![PhysicalGate::x(0), PhysicalGate::x(1)]).unwrap();
        let model = StochasticModel::new(0.0, 1.0, 1).unwrap();
        let shots = simulate_noisy(&c, &model, 500, 2).unwrap();
        assert!(shots.iter().all(|s| s.value() == 0));
    }

    #[test]
    fn trajectories_are_deterministic() {
        let c = build_ghz(3, 2).unwrap();
        let model = StochasticModel::new(0.05, 0.02, 11).unwrap();
        let a = simulate_noisy(&c, &model, 3000, 1).unwrap();
        assert_eq!(a, simulate_noisy(&c, &model, 3000, 1).unwrap());
        assert_ne!(a, simulate_noisy(&c, &model, 3000, 2).unwrap());
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        assert_eq!(a, pool.install(|| simulate_noisy(&c, &model, 3000, 1).unwrap()));
    }

    // Exact density-matrix evolution of the same channel on <= 3 qubits.
    mod oracle {
        use super::*;

        pub type Dm = Vec<Vec<C64>>;

        fn embed(u: &Matrix2, q: usize, n: usize) -> Dm {
            let d = 1 << n;
            let bit = n - 1 - q;
            let mut m = vec![vec![C64::new(0.0, 0.0); d]; d];
            for (r, row) in m.iter_mut().enumerate() {
                for (c, cell) in row.iter_mut().enumerate() {
                    if (r ^ c) & !(1 << bit) == 0 {
                        *cell = u[(r >> bit) & 1][(c >> bit) & 1];
                    }
                }
            }
            m
        }

        fn matmul(a: &Dm, b: &Dm) -> Dm {
            let d = a.len();
            let mut out = vec![vec![C64::new(0.0, 0.0); d]; d];
            for i in 0..d {
                for k in 0..d {
                    if a[i][k] == C64::new(0.0, 0.0) {
                        continue;
                    }
                    for j in 0..d {
                        out[i][j] += a[i][k] * b[k][j];
                    }
                }
            }
            out
        }

        fn dagger(a: &Dm) -> Dm {
            let d = a.len();
            (0..d).map(|i| (0..d).map(|j| a[j][i].conj()).collect()).collect()
        }

        fn conj(k: &Dm, rho: &Dm) -> Dm {
            matmul(&matmul(k, rho), &dagger(k))
        }

        fn add(a: &Dm, b: &Dm, wa: f64, wb: f64) -> Dm {
            a.iter()
                .zip(b)
                .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x * wa + y * wb).collect())
                .collect()
        }

        fn gate_matrix(g: &PhysicalGate, n: usize) -> Dm {
            match *g {
                PhysicalGate::U3 { qubit, theta, phi, lambda } => embed(&gates::u3(theta, phi, lambda), qubit, n),
                PhysicalGate::X { qubit } => embed(&gates::pauli_x(), qubit, n),
                PhysicalGate::Cx { control, target } => {
                    let d = 1 << n;
                    let (cm, tm) = (1 << (n - 1 - control), 1 << (n - 1 - target));
                    let mut m = vec![vec![C64::new(0.0, 0.0); d]; d];
                    for c in 0..d {
                        let r = if c & cm != 0 { c ^ tm } else { c };
                        m[r][c] = C64::new(1.0, 0.0);
                    }
                    m
                }
            }
        }

        pub fn distribution(circuit: &PhysicalCircuit, p: f64, gamma: f64) -> Vec<f64> {
            let n = circuit.n_qubits();
            let d = 1 << n;
            let mut rho = vec![vec![C64::new(0.0, 0.0); d]; d];
            rho[0][0] = C64::new(1.0, 0.0);
            let paulis = [gates::pauli_x(), gates::pauli_y(), gates::pauli_z()];
            let zero = C64::new(0.0, 0.0);
            let k0 = [[C64::new(1.0, 0.0), zero], [zero, C64::new((1.0 - gamma).sqrt(), 0.0)]];
            let k1 = [[zero, C64::new(gamma.sqrt(), 0.0)], [zero, zero]];
            for g in circuit.gates() {
                rho = conj(&gate_matrix(g, n), &rho);
                for q in g.qubits() {
                    let mut mixed = rho.iter().map(|r| r.iter().map(|c| c * (1.0 - p)).collect()).collect();
                    for pm in &paulis {
                        mixed = add(&mixed, &conj(&embed(pm, q, n), &rho), 1.0, p / 3.0);
                    }
                    rho = mixed;
                }
                for q in 0..n {
                    rho = add(&conj(&embed(&k0, q, n), &rho), &conj(&embed(&k1, q, n), &rho), 1.0, 1.0);
                }
            }
            (0..d).map(|i| rho[i][i].re).collect()
        }
    }

    #[test]
    fn trajectory_frequencies_match_density_matrix() {
        let circuit = PhysicalCircuit::from_gates(
            2,
            vec![
                PhysicalGate::u3(0, PI / 2.0, 0.0, PI),
                PhysicalGate::cx(0, 1),
                PhysicalGate::u3(1, 0.7, 0.3, -0.4),
                PhysicalGate::x(0),
            ],
        )
        .unwrap();
        let shots = 100_000;
        for (p, gamma) in [(0.01, 0.0), (0.05, 0.0), (0.01, 0.02), (0.05, 0.05)] {
            let exact = oracle::distribution(&circuit, p, gamma);
            assert!((exact.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let model = StochasticModel::new(p, gamma, 17).unwrap();
            let samples = simulate_noisy(&circuit, &model, shots, 4).unwrap();
            let mut counts = BTreeMap::new();
            samples.iter().for_each(|s| *counts.entry(s.value()).or_insert(0usize) += 1);
            for (i, &pi) in exact.iter().enumerate() {
                let c = *counts.get(&(i as u64)).unwrap_or(&0) as f64;
                let sigma = (shots as f64 * pi * (1.0 - pi)).sqrt();
                assert!(
                    (c - shots as f64 * pi).abs() <= 5.0 * sigma + 1e-9,
                    "p={p} gamma={gamma} outcome {i}: {c} vs {}",
                    shots as f64 * pi
                );
            }
        }
    }
}
