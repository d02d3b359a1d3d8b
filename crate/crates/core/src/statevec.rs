//! Dense state-vector engine.
//!
//! Qubit convention: physical qubit `q` of an `n`-qubit register is the
//! `q`-th tensor factor from the left, so it is bit `n - 1 - q` of a basis
//! index. Bitstrings are written with qubit 0 as the leftmost character,
//! which makes the rendered string the ordinary binary form of the index.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{NaedError, Result};
use crate::logical::{PhysicalCircuit, PhysicalGate};
use crate::rng::stream_rng;

pub type C64 = Complex64;

/// Row-major 2x2 complex matrix.
pub type Matrix2 = [[C64; 2]; 2];

/// Largest register the dense engine accepts.
pub const MAX_QUBITS: usize = 25;

/// Unitarity tolerance for user-supplied single-qubit gates.
pub const UNITARY_TOL: f64 = 1e-10;

const PAR_MIN_DIM: usize = 1 << 14;

/// Sparse probability distribution; absent keys have probability 0.
pub type Pdf<K> = BTreeMap<K, f64>;

pub mod gates {
    use super::{Matrix2, C64};

    const ZERO: C64 = C64::new(0.0, 0.0);
    const ONE: C64 = C64::new(1.0, 0.0);

    pub fn identity() -> Matrix2 {
        [[ONE, ZERO], [ZERO, ONE]]
    }

    pub fn pauli_x() -> Matrix2 {
        [[ZERO, ONE], [ONE, ZERO]]
    }

    pub fn pauli_y() -> Matrix2 {
        [[ZERO, C64::new(0.0, -1.0)], [C64::new(0.0, 1.0), ZERO]]
    }

    pub fn pauli_z() -> Matrix2 {
        [[ONE, ZERO], [ZERO, -ONE]]
    }

    pub fn hadamard() -> Matrix2 {
        let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        [[h, h], [h, -h]]
    }

    /// Standard three-angle unitary; `u3(pi/2, 0, pi)` is the Hadamard gate.
    pub fn u3(theta: f64, phi: f64, lambda: f64) -> Matrix2 {
        let (s, c) = (theta / 2.0).sin_cos();
        [
            [C64::new(c, 0.0), -C64::from_polar(s, lambda)],
            [C64::from_polar(s, phi), C64::from_polar(c, phi + lambda)],
        ]
    }

    pub fn mul(a: &Matrix2, b: &Matrix2) -> Matrix2 {
        let mut out = [[ZERO; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        out
    }

    pub fn adjoint(a: &Matrix2) -> Matrix2 {
        [[a[0][0].conj(), a[1][0].conj()], [a[0][1].conj(), a[1][1].conj()]]
    }

    /// `max |(U^dagger U - I)_ij|`.
    pub fn unitarity_defect(u: &Matrix2) -> f64 {
        let p = mul(&adjoint(u), u);
        let id = identity();
        let mut worst: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max((p[i][j] - id[i][j]).norm());
            }
        }
        worst
    }
}

/// Measured outcome of `len` qubits, stored as the basis index (qubit 0 is
/// the most significant bit).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString {
    len: u32,
    value: u64,
}

impl BitString {
    pub fn new(value: u64, len: usize) -> Result<Self> {
        if len == 0 || len > 64 {
            return Err(NaedError::validation(format!("bitstring length {len} not in 1..=64")));
        }
        if len < 64 && value >> len != 0 {
            return Err(NaedError::validation(format!("value {value} does not fit in {len} bits")));
        }
        Ok(BitString { len: len as u32, value })
    }

    pub(crate) fn from_index(value: u64, len: usize) -> Self {
        debug_assert!(len < 64 && value >> len == 0);
        BitString { len: len as u32, value }
    }

    /// Basis index.
    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Bit of qubit `q` (qubit 0 is leftmost).
    pub fn bit(&self, q: usize) -> bool {
        assert!(q < self.len(), "qubit {q} out of range");
        (self.value >> (self.len() - 1 - q)) & 1 == 1
    }

    /// `width` consecutive qubits starting at `start`, as a basis index of
    /// that sub-register.
    pub fn slice(&self, start: usize, width: usize) -> u64 {
        assert!(start + width <= self.len());
        let shift = self.len() - start - width;
        (self.value >> shift) & low_mask(width)
    }

    pub fn concat(&self, other: &BitString) -> Result<BitString> {
        let len = self.len() + other.len();
        if len > 64 {
            return Err(NaedError::validation("concatenated bitstring exceeds 64 bits"));
        }
        BitString::new((self.value << other.len()) | other.value, len)
    }
}

pub(crate) fn low_mask(width: usize) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:0width$b}", self.value, width = self.len())
    }
}

impl FromStr for BitString {
    type Err = NaedError;

    fn from_str(s: &str) -> Result<Self> {
        let mut value = 0u64;
        for (i, ch) in s.chars().enumerate() {
            let bit = match ch {
                '0' => 0,
                '1' => 1,
                other => {
                    return Err(NaedError::validation(format!(
                        "invalid character {other:?} at position {i} in bitstring"
                    )))
                }
            };
            value = value.checked_shl(1).unwrap_or(0) | bit;
        }
        BitString::new(value, s.chars().count())
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Dense amplitudes over `n_qubits` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<C64>,
}

impl StateVector {
    /// `|00...0>` on `n_qubits` qubits.
    pub fn new(n_qubits: usize) -> Result<Self> {
        check_width(n_qubits)?;
        let mut amplitudes = vec![C64::new(0.0, 0.0); 1 << n_qubits];
        amplitudes[0] = C64::new(1.0, 0.0);
        Ok(StateVector { n_qubits, amplitudes })
    }

    /// Wraps explicit amplitudes. The vector must have length `2^n` and unit norm.
    pub fn from_amplitudes(amplitudes: Vec<C64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(NaedError::validation(format!("amplitude count {len} is not 2^n with n >= 1")));
        }
        let n_qubits = len.trailing_zeros() as usize;
        check_width(n_qubits)?;
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(NaedError::validation(format!("state has squared norm {norm}, expected 1")));
        }
        Ok(StateVector { n_qubits, amplitudes })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    fn stride(&self, q: usize) -> usize {
        1 << (self.n_qubits - 1 - q)
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.n_qubits {
            return Err(NaedError::Index { index: q, len: self.n_qubits });
        }
        Ok(())
    }

    /// Applies `u` to qubit `q`. Rejects matrices that are not unitary to 1e-10.
    pub fn apply_1q(&mut self, u: &Matrix2, q: usize) -> Result<()> {
        self.check_qubit(q)?;
        let defect = gates::unitarity_defect(u);
        if !(defect <= UNITARY_TOL) {
            return Err(NaedError::validation(format!("gate is not unitary (defect {defect:.3e})")));
        }
        self.apply_1q_unchecked(u, q);
        Ok(())
    }

    pub(crate) fn apply_1q_unchecked(&mut self, u: &Matrix2, q: usize) {
        let u = *u;
        let stride = self.stride(q);
        for_each_pair(&mut self.amplitudes, stride, move |_, a0, a1| {
            let (b0, b1) = (*a0, *a1);
            *a0 = u[0][0] * b0 + u[0][1] * b1;
            *a1 = u[1][0] * b0 + u[1][1] * b1;
        });
    }

    pub fn apply_x(&mut self, q: usize) -> Result<()> {
        self.check_qubit(q)?;
        let stride = self.stride(q);
        for_each_pair(&mut self.amplitudes, stride, |_, a0, a1| std::mem::swap(a0, a1));
        Ok(())
    }

    pub fn apply_cx(&mut self, control: usize, target: usize) -> Result<()> {
        self.check_qubit(control)?;
        self.check_qubit(target)?;
        if control == target {
            return Err(NaedError::validation(format!("cx control and target are both qubit {control}")));
        }
        let cmask = self.stride(control);
        let stride = self.stride(target);
        for_each_pair(&mut self.amplitudes, stride, move |i, a0, a1| {
            if i & cmask != 0 {
                std::mem::swap(a0, a1);
            }
        });
        Ok(())
    }

    pub fn apply_gate(&mut self, gate: &PhysicalGate) -> Result<()> {
        match *gate {
            PhysicalGate::U3 { qubit, theta, phi, lambda } => {
                self.check_qubit(qubit)?;
                self.apply_1q_unchecked(&gates::u3(theta, phi, lambda), qubit);
                Ok(())
            }
            PhysicalGate::Cx { control, target } => self.apply_cx(control, target),
            PhysicalGate::X { qubit } => self.apply_x(qubit),
        }
    }

    pub fn apply_circuit(&mut self, circuit: &PhysicalCircuit) -> Result<()> {
        if circuit.n_qubits() != self.n_qubits {
            return Err(NaedError::validation(format!(
                "circuit has {} qubits, state has {}",
                circuit.n_qubits(),
                self.n_qubits
            )));
        }
        circuit.gates().iter().try_for_each(|g| self.apply_gate(g))
    }

    /// Nonzero outcome probabilities, keyed by bitstring.
    pub fn probabilities(&self) -> Pdf<BitString> {
        self.support()
            .map(|(i, p)| (BitString::from_index(i, self.n_qubits), p))
            .collect()
    }

    fn support(&self) -> impl Iterator<Item = (u64, f64)> + Clone + '_ {
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(i, a)| (i as u64, a.norm_sqr()))
            .filter(|&(_, p)| p > 0.0)
    }

    /// `shots` independent computational-basis measurements. Identical
    /// `(state, shots, seed)` always yields the identical sequence.
    pub fn sample(&self, shots: usize, seed: u64) -> Result<Vec<BitString>> {
        sample_support(self.support(), self.n_qubits, shots, seed)
    }
}

fn check_width(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 || n_qubits > MAX_QUBITS {
        return Err(NaedError::Capacity(format!(
            "{n_qubits} qubits requested, engine supports 1..={MAX_QUBITS}"
        )));
    }
    Ok(())
}

/// Simulates `circuit` from `|0...0>`.
pub fn simulate(circuit: &PhysicalCircuit) -> Result<StateVector> {
    let mut state = StateVector::new(circuit.n_qubits())?;
    state.apply_circuit(circuit)?;
    Ok(state)
}

/// Calls `f(index_of_lo, lo, hi)` for every amplitude pair differing only in
/// the bit with value `stride`.
fn for_each_pair<F>(data: &mut [C64], stride: usize, f: F)
where
    F: Fn(usize, &mut C64, &mut C64) + Sync + Send,
{
    let block = 2 * stride;
    if data.len() < PAR_MIN_DIM {
        for (k, chunk) in data.chunks_mut(block).enumerate() {
            let (lo, hi) = chunk.split_at_mut(stride);
            for (j, (a0, a1)) in lo.iter_mut().zip(hi.iter_mut()).enumerate() {
                f(k * block + j, a0, a1);
            }
        }
    } else if data.len() / block >= 64 {
        data.par_chunks_mut(block).enumerate().for_each(|(k, chunk)| {
            let (lo, hi) = chunk.split_at_mut(stride);
            for (j, (a0, a1)) in lo.iter_mut().zip(hi.iter_mut()).enumerate() {
                f(k * block + j, a0, a1);
            }
        });
    } else {
        for (k, chunk) in data.chunks_mut(block).enumerate() {
            let (lo, hi) = chunk.split_at_mut(stride);
            lo.par_iter_mut()
                .zip(hi.par_iter_mut())
                .enumerate()
                .for_each(|(j, (a0, a1))| f(k * block + j, a0, a1));
        }
    }
}

/// Inverse-CDF sampling over `(index, probability)` pairs in ascending index
/// order. Draws are sorted once so the distribution is swept a single time.
pub(crate) fn sample_support<I>(support: I, n_qubits: usize, shots: usize, seed: u64) -> Result<Vec<BitString>>
where
    I: Iterator<Item = (u64, f64)> + Clone,
{
    if shots == 0 {
        return Err(NaedError::validation("shots must be positive"));
    }
    let total: f64 = support.clone().map(|(_, p)| p).sum();
    if !(total > 0.0) {
        return Err(NaedError::validation("cannot sample from a zero state"));
    }
    let mut rng = stream_rng(seed, 0);
    let draws: Vec<f64> = (0..shots).map(|_| rng.random::<f64>() * total).collect();
    let mut order: Vec<usize> = (0..shots).collect();
    order.sort_unstable_by(|&a, &b| draws[a].total_cmp(&draws[b]));

    let mut out = vec![BitString::from_index(0, n_qubits); shots];
    let mut iter = support.peekable();
    let mut cumulative = 0.0;
    let mut current = None;
    for k in order {
        let u = draws[k];
        while current.is_none() || cumulative <= u {
            match iter.next() {
                Some((i, p)) => {
                    cumulative += p;
                    current = Some(i);
                }
                None => break,
            }
        }
        out[k] = BitString::from_index(current.expect("nonempty support"), n_qubits);
    }
    Ok(out)
}
