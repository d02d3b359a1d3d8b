//! Brute-force oracle: dense unitaries built from explicit tensor products,
//! and numerical checks of the logical-gate constructions against them.
//!
//! Nothing here shares code with the in-place kernels in [`crate::statevec`].

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::code::BitFlipCode;
use crate::error::{NaedError, Result};
use crate::logical::{logical_cx, logical_u3, PhysicalCircuit, PhysicalGate};
use crate::rng::{derive_seed, stream_rng};
use crate::statevec::{gates, simulate, Matrix2, C64};

pub const MAX_ORACLE_QUBITS: usize = 12;

const IDENTITY_TOL: f64 = 1e-12;
const THEOREM_TOL: f64 = 1e-10;

/// Row-major `2^n x 2^n` complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseUnitary {
    n_qubits: usize,
    dim: usize,
    data: Vec<C64>,
}

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

fn one() -> C64 {
    C64::new(1.0, 0.0)
}

impl DenseUnitary {
    pub fn identity(n_qubits: usize) -> Result<Self> {
        if n_qubits > MAX_ORACLE_QUBITS {
            return Err(NaedError::Capacity(format!(
                "oracle supports at most {MAX_ORACLE_QUBITS} qubits, got {n_qubits}"
            )));
        }
        let dim = 1usize << n_qubits;
        let mut data = vec![zero(); dim * dim];
        (0..dim).for_each(|i| data[i * dim + i] = one());
        Ok(DenseUnitary { n_qubits, dim, data })
    }

    fn from_small(m: &Matrix2) -> Self {
        DenseUnitary { n_qubits: 1, dim: 2, data: vec![m[0][0], m[0][1], m[1][0], m[1][1]] }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[row * self.dim + col]
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    /// `self ⊗ other`, with `self` on the leading (most significant) qubits.
    pub fn kron(&self, other: &DenseUnitary) -> DenseUnitary {
        let dim = self.dim * other.dim;
        let mut data = vec![zero(); dim * dim];
        for i in 0..self.dim {
            for j in 0..self.dim {
                let a = self.get(i, j);
                for k in 0..other.dim {
                    for l in 0..other.dim {
                        data[(i * other.dim + k) * dim + j * other.dim + l] = a * other.get(k, l);
                    }
                }
            }
        }
        DenseUnitary { n_qubits: self.n_qubits + other.n_qubits, dim, data }
    }

    /// Matrix product `self * other`.
    pub fn mul(&self, other: &DenseUnitary) -> DenseUnitary {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        let d = self.dim;
        let mut data = vec![zero(); d * d];
        for i in 0..d {
            for k in 0..d {
                let a = self.data[i * d + k];
                if a == zero() {
                    continue;
                }
                for j in 0..d {
                    data[i * d + j] += a * other.data[k * d + j];
                }
            }
        }
        DenseUnitary { n_qubits: self.n_qubits, dim: d, data }
    }

    pub fn add(&self, other: &DenseUnitary) -> DenseUnitary {
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        DenseUnitary { n_qubits: self.n_qubits, dim: self.dim, data }
    }

    pub fn adjoint(&self) -> DenseUnitary {
        let d = self.dim;
        let mut data = vec![zero(); d * d];
        for i in 0..d {
            for j in 0..d {
                data[j * d + i] = self.data[i * d + j].conj();
            }
        }
        DenseUnitary { n_qubits: self.n_qubits, dim: d, data }
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.dim, "dimension mismatch");
        (0..self.dim).map(|i| (0..self.dim).map(|j| self.get(i, j) * v[j]).sum()).collect()
    }

    /// `‖U†U − I‖_max`.
    pub fn unitarity_defect(&self) -> f64 {
        let p = self.adjoint().mul(self);
        let id = DenseUnitary::identity(self.n_qubits).expect("same size as self");
        max_abs_diff(&p.data, &id.data)
    }

    pub fn max_abs_diff(&self, other: &DenseUnitary) -> f64 {
        max_abs_diff(&self.data, &other.data)
    }
}

fn kron_all(factors: &[DenseUnitary]) -> DenseUnitary {
    let mut it = factors.iter();
    let first = it.next().expect("at least one factor").clone();
    it.fold(first, |acc, f| acc.kron(f))
}

fn place(n: usize, at: &[(usize, Matrix2)]) -> DenseUnitary {
    let factors: Vec<DenseUnitary> = (0..n)
        .map(|q| {
            let m = at.iter().find(|(p, _)| *p == q).map(|(_, m)| *m).unwrap_or_else(gates::identity);
            DenseUnitary::from_small(&m)
        })
        .collect();
    kron_all(&factors)
}

/// Full matrix of one gate on `n` qubits. CX is `P0 ⊗ I + P1 ⊗ X`.
pub fn gate_unitary(gate: &PhysicalGate, n: usize) -> Result<DenseUnitary> {
    DenseUnitary::identity(n)?;
    gate.validate(n)?;
    Ok(match *gate {
        PhysicalGate::U3 { qubit, theta, phi, lambda } => place(n, &[(qubit, gates::u3(theta, phi, lambda))]),
        PhysicalGate::X { qubit } => place(n, &[(qubit, gates::pauli_x())]),
        PhysicalGate::Cx { control, target } => {
            let p0 = [[one(), zero()], [zero(), zero()]];
            let p1 = [[zero(), zero()], [zero(), one()]];
            place(n, &[(control, p0)]).add(&place(n, &[(control, p1), (target, gates::pauli_x())]))
        }
    })
}

/// Time-ordered product `G_k ⋯ G_2 G_1` of the circuit's gate matrices.
pub fn unitary_of(circuit: &PhysicalCircuit) -> Result<DenseUnitary> {
    let n = circuit.n_qubits();
    let mut u = DenseUnitary::identity(n)?;
    for g in circuit.gates() {
        u = gate_unitary(g, n)?.mul(&u);
    }
    Ok(u)
}

fn max_abs_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Max-norm deviation after removing the global phase of each side, taken at
/// the largest-magnitude component of `a`.
pub fn aligned_deviation(a: &[C64], b: &[C64]) -> f64 {
    assert_eq!(a.len(), b.len(), "length mismatch");
    let k = (0..a.len()).max_by(|&i, &j| a[i].norm().total_cmp(&a[j].norm())).unwrap_or(0);
    if a.is_empty() || a[k].norm() == 0.0 || b[k].norm() == 0.0 {
        return max_abs_diff(a, b);
    }
    let pa = (a[k] / a[k].norm()).conj();
    let pb = (b[k] / b[k].norm()).conj();
    a.iter().zip(b).map(|(x, y)| (x * pa - y * pb).norm()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub max_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckReport {
    fn new(name: impl Into<String>, max_residual: f64, tolerance: f64) -> Self {
        let passed = max_residual.is_finite() && max_residual <= tolerance;
        CheckReport { name: name.into(), max_residual, tolerance, passed }
    }
}

fn random_amplitudes(rng: &mut impl Rng, k: usize) -> Vec<C64> {
    loop {
        let v: Vec<C64> =
            (0..k).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-3 {
            return v.into_iter().map(|z| z / norm).collect();
        }
    }
}

fn random_angles(rng: &mut impl Rng) -> (f64, f64, f64) {
    let tau = std::f64::consts::TAU;
    (rng.random_range(0.0..tau), rng.random_range(0.0..tau), rng.random_range(0.0..tau))
}

fn basis_vector(dim: usize, terms: &[(u64, C64)]) -> Vec<C64> {
    let mut v = vec![zero(); dim];
    terms.iter().for_each(|&(i, a)| v[i as usize] += a);
    v
}

fn circuit(n: usize, gates: Vec<PhysicalGate>) -> Result<PhysicalCircuit> {
    PhysicalCircuit::from_gates(n, gates)
}

fn encoding_matrix(code: &BitFlipCode) -> Result<DenseUnitary> {
    let xs = code.set().iter().map(|&i| PhysicalGate::x(i)).collect();
    unitary_of(&circuit(code.q(), xs)?)
}

fn code_label(code: &BitFlipCode) -> String {
    format!("Q={} S={:?}", code.q(), code.set())
}

fn parallel_max<F>(samples: usize, f: F) -> Result<f64>
where
    F: Fn(usize) -> Result<f64> + Sync + Send,
{
    (0..samples).into_par_iter().map(f).try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

/// The four code identities and the encoding-matrix facts the proofs use.
pub fn check_identities(code: &BitFlipCode, samples: usize, seed: u64) -> Result<CheckReport> {
    let q = code.q();
    if q > 6 {
        return Err(NaedError::validation(format!("identity check needs Q <= 6, got {q}")));
    }
    let mut worst: f64 = 0.0;

    // 2-qubit forms.
    let cx = unitary_of(&circuit(2, vec![PhysicalGate::cx(0, 1)])?)?;
    let x0 = place(2, &[(0, gates::pauli_x())]);
    let x1 = place(2, &[(1, gates::pauli_x())]);
    worst = worst.max(x1.mul(&cx).max_abs_diff(&cx.mul(&x1)));
    worst = worst.max(x0.mul(&cx).mul(&x0).max_abs_diff(&x1.mul(&cx)));

    // Per-CX forms inside a block.
    for i in 1..q {
        let cx = unitary_of(&circuit(q, vec![PhysicalGate::cx(0, i)])?)?;
        let xi = place(q, &[(i, gates::pauli_x())]);
        let x0 = place(q, &[(0, gates::pauli_x())]);
        worst = worst.max(xi.mul(&cx).max_abs_diff(&cx.mul(&xi)));
        worst = worst.max(x0.mul(&cx).mul(&x0).max_abs_diff(&xi.mul(&cx)));
    }

    let m = encoding_matrix(code)?;
    let id = DenseUnitary::identity(q)?;
    worst = worst.max(m.mul(&m).max_abs_diff(&id));
    worst = worst.max(m.max_abs_diff(&m.adjoint()));

    let dim = 1usize << q;
    let ones = (dim - 1) as u64;
    let (x, y) = (code.codeword(false).value(), code.codeword(true).value());
    let states = parallel_max(samples, |k| {
        let mut rng = stream_rng(seed, k as u64);
        let ab = random_amplitudes(&mut rng, 2);
        let plain = basis_vector(dim, &[(0, ab[0]), (ones, ab[1])]);
        let encoded = basis_vector(dim, &[(x, ab[0]), (y, ab[1])]);
        Ok(max_abs_diff(&m.apply(&plain), &encoded).max(max_abs_diff(&m.apply(&encoded), &plain)))
    })?;
    worst = worst.max(states);

    // L_∅(U3) commutes with M when 0 ∉ S; otherwise L_∅(XUX) M = M L_∅(U).
    let empty = BitFlipCode::new(q, &[])?;
    let zero_in_s = code.set().contains(&0);
    let commutant = parallel_max(samples.min(20), |k| {
        let mut rng = stream_rng(derive_seed(&[seed, 1]), k as u64);
        let (t, p, l) = random_angles(&mut rng);
        let plain = unitary_of(&circuit(q, logical_u3(&empty, t, p, l, 0))?)?;
        let lhs = if zero_in_s { unitary_of(&literal_conjugated_u3(q, t, p, l)?)? } else { plain.clone() };
        Ok(lhs.mul(&m).max_abs_diff(&m.mul(&plain)))
    })?;
    worst = worst.max(commutant);

    Ok(CheckReport::new(format!("identities {}", code_label(code)), worst, IDENTITY_TOL))
}

/// `L_∅(σx U3 σx)` with the conjugating X gates written out on qubit 0.
fn literal_conjugated_u3(q: usize, theta: f64, phi: f64, lambda: f64) -> Result<PhysicalCircuit> {
    let mut g: Vec<PhysicalGate> = (1..q).map(|i| PhysicalGate::cx(0, i)).collect();
    g.extend([PhysicalGate::x(0), PhysicalGate::u3(0, theta, phi, lambda), PhysicalGate::x(0)]);
    g.extend((1..q).map(|i| PhysicalGate::cx(0, q - i)));
    circuit(q, g)
}

/// Logical action of `logical_u3` on random encoded states, plus agreement of
/// the angle-remapped construction with the literal conjugated one.
pub fn check_logical_u3(code: &BitFlipCode, samples: usize, seed: u64) -> Result<CheckReport> {
    let q = code.q();
    if q > 5 {
        return Err(NaedError::validation(format!("logical U3 check needs Q <= 5, got {q}")));
    }
    let dim = 1usize << q;
    let (x, y) = (code.codeword(false).value(), code.codeword(true).value());
    let zero_in_s = code.set().contains(&0);
    let empty = BitFlipCode::new(q, &[])?;
    let worst = parallel_max(samples, |k| {
        let mut rng = stream_rng(seed, k as u64);
        let (t, p, l) = random_angles(&mut rng);
        let ab = random_amplitudes(&mut rng, 2);
        let u = gates::u3(t, p, l);
        let tau = u[0][0] * ab[0] + u[0][1] * ab[1];
        let delta = u[1][0] * ab[0] + u[1][1] * ab[1];

        let implemented = unitary_of(&circuit(q, logical_u3(code, t, p, l, 0))?)?;
        let input = basis_vector(dim, &[(x, ab[0]), (y, ab[1])]);
        let expected = basis_vector(dim, &[(x, tau), (y, delta)]);
        let action = aligned_deviation(&expected, &implemented.apply(&input));

        let literal = if zero_in_s {
            unitary_of(&literal_conjugated_u3(q, t, p, l)?)?
        } else {
            unitary_of(&circuit(q, logical_u3(&empty, t, p, l, 0))?)?
        };
        Ok(action.max(aligned_deviation(literal.data(), implemented.data())))
    })?;
    Ok(CheckReport::new(format!("logical u3 {}", code_label(code)), worst, THEOREM_TOL))
}

/// Logical action of `logical_cx` in both block orders, plus its equality with
/// `(M⊗M) L_∅(Cx) (M⊗M)`.
pub fn check_logical_cx(code: &BitFlipCode, samples: usize, seed: u64) -> Result<CheckReport> {
    let q = code.q();
    if 2 * q > MAX_ORACLE_QUBITS {
        return Err(NaedError::validation(format!("logical CX check needs 2Q <= {MAX_ORACLE_QUBITS}, got Q={q}")));
    }
    let n = 2 * q;
    let dim = 1usize << n;
    let forward = unitary_of(&circuit(n, logical_cx(code, 0, q)?)?)?;
    let backward = unitary_of(&circuit(n, logical_cx(code, q, 0)?)?)?;

    let m = encoding_matrix(code)?;
    let mm = m.kron(&m);
    let plain = unitary_of(&circuit(n, (0..q).map(|i| PhysicalGate::cx(i, q + i)).collect())?)?;
    let mut worst = mm.mul(&plain).mul(&mm).max_abs_diff(&forward);

    let word = |bit: bool| code.codeword(bit).value();
    let pair = |hi: bool, lo: bool| (word(hi) << q) | word(lo);
    let states = parallel_max(samples, |k| {
        let mut rng = stream_rng(seed, k as u64);
        let a = random_amplitudes(&mut rng, 4);
        let input = basis_vector(
            dim,
            &[(pair(false, false), a[0]), (pair(false, true), a[1]), (pair(true, false), a[2]), (pair(true, true), a[3])],
        );
        // Control on the leading block: |10> and |11> swap.
        let fwd = basis_vector(
            dim,
            &[(pair(false, false), a[0]), (pair(false, true), a[1]), (pair(true, false), a[3]), (pair(true, true), a[2])],
        );
        // Control on the trailing block: |01> and |11> swap.
        let bwd = basis_vector(
            dim,
            &[(pair(false, false), a[0]), (pair(false, true), a[3]), (pair(true, false), a[2]), (pair(true, true), a[1])],
        );
        Ok(aligned_deviation(&fwd, &forward.apply(&input)).max(aligned_deviation(&bwd, &backward.apply(&input))))
    })?;
    worst = worst.max(states);
    Ok(CheckReport::new(format!("logical cx {}", code_label(code)), worst, THEOREM_TOL))
}

/// Single-qubit errors on an Euler-angle grid with step π/8, applied to each
/// qubit of an encoded block. The invalid-pattern weight of `E·ψ` must vanish
/// exactly when `E` is diagonal, and equals `sin²(θ/2)` in general.
pub fn check_detectability(code: &BitFlipCode, seed: u64) -> Result<CheckReport> {
    let q = code.q();
    if q < 2 {
        return Err(NaedError::validation("detectability needs Q >= 2"));
    }
    let dim = 1usize << q;
    let (x, y) = (code.codeword(false).value(), code.codeword(true).value());
    let step = std::f64::consts::PI / 8.0;
    let mut rng = stream_rng(seed, 0);
    let ab = random_amplitudes(&mut rng, 2);
    let psi = basis_vector(dim, &[(x, ab[0]), (y, ab[1])]);
    let mut worst: f64 = 0.0;
    for ti in 0..=8 {
        for pi in 0..16 {
            for li in 0..16 {
                let (t, p, l) = (ti as f64 * step, pi as f64 * step, li as f64 * step);
                let e = gates::u3(t, p, l);
                let diagonal = e[0][1].norm() < 1e-15 && e[1][0].norm() < 1e-15;
                for qubit in 0..q {
                    let out = place(q, &[(qubit, e)]).apply(&psi);
                    let invalid: f64 = (0..dim as u64)
                        .filter(|&i| i != x && i != y)
                        .map(|i| out[i as usize].norm_sqr())
                        .sum();
                    let expected = (t / 2.0).sin().powi(2);
                    worst = worst.max((invalid - expected).abs());
                    if diagonal != (invalid <= IDENTITY_TOL) {
                        return Ok(CheckReport::new(format!("detectability {}", code_label(code)), f64::INFINITY, IDENTITY_TOL));
                    }
                }
            }
        }
    }
    Ok(CheckReport::new(format!("detectability {}", code_label(code)), worst, IDENTITY_TOL))
}

pub fn random_circuit(n: usize, n_gates: usize, rng: &mut impl Rng) -> Result<PhysicalCircuit> {
    let mut gates = Vec::with_capacity(n_gates);
    for _ in 0..n_gates {
        let kind = if n < 2 { rng.random_range(0..2) } else { rng.random_range(0..3) };
        let qubit = rng.random_range(0..n);
        gates.push(match kind {
            0 => {
                let (t, p, l) = random_angles(rng);
                PhysicalGate::u3(qubit, t, p, l)
            }
            1 => PhysicalGate::x(qubit),
            _ => {
                let other = (qubit + rng.random_range(1..n)) % n;
                PhysicalGate::cx(qubit, other)
            }
        });
    }
    circuit(n, gates)
}

/// In-place engine against the dense oracle on random circuits of 1..=5
/// qubits and up to 30 gates.
pub fn check_engine(circuits: usize, seed: u64) -> Result<CheckReport> {
    let worst = parallel_max(circuits, |k| {
        let mut rng = stream_rng(seed, k as u64);
        let n = rng.random_range(1..=5);
        let len = rng.random_range(0..=30);
        let c = random_circuit(n, len, &mut rng)?;
        let oracle = unitary_of(&c)?;
        let column: Vec<C64> = (0..oracle.dim()).map(|i| oracle.get(i, 0)).collect();
        Ok(aligned_deviation(&column, simulate(&c)?.amplitudes()))
    })?;
    Ok(CheckReport::new("engine vs oracle", worst, THEOREM_TOL))
}

/// `count` subsets of `0..q`, evenly spaced over all subsets ordered by size,
/// so the empty and the full set are always included.
pub fn sample_sets(q: usize, count: usize) -> Vec<Vec<usize>> {
    let mut all: Vec<Vec<usize>> = (0u32..1 << q)
        .map(|mask| (0..q).filter(|i| mask >> i & 1 == 1).collect())
        .collect();
    all.sort_by_key(|s| (s.len(), s.clone()));
    let k = count.min(all.len());
    if k <= 1 {
        return all.into_iter().take(k).collect();
    }
    (0..k).map(|i| all[i * (all.len() - 1) / (k - 1)].clone()).collect()
}

/// The full battery behind the `verify` subcommand.
pub fn run_all(seed: u64) -> Result<Vec<CheckReport>> {
    let mut reports = Vec::new();
    for q in 1..=4 {
        for s in sample_sets(q, 8) {
            reports.push(check_logical_u3(&BitFlipCode::new(q, &s)?, 100, derive_seed(&[seed, 1, q as u64]))?);
        }
    }
    for q in 1..=3 {
        for s in sample_sets(q, 8) {
            reports.push(check_logical_cx(&BitFlipCode::new(q, &s)?, 50, derive_seed(&[seed, 2, q as u64]))?);
        }
    }
    for q in 1usize..=5 {
        let sizes = [0, 1, q.div_ceil(2), q];
        for s in sample_sets(q, 1 << q).into_iter().filter(|s| sizes.contains(&s.len())) {
            reports.push(check_identities(&BitFlipCode::new(q, &s)?, 100, derive_seed(&[seed, 3, q as u64]))?);
        }
    }
    for q in 2..=4 {
        reports.push(check_detectability(&BitFlipCode::new(q, &crate::code::default_experiment_set(q))?, seed)?);
    }
    reports.push(check_engine(200, derive_seed(&[seed, 4]))?);
    Ok(reports)
}
