//! Bit-flip encodings and measurement classification.
//!
//! A code on `Q` physical qubits is picked by a set `S` of block-local qubit
//! indices. The logical zero codeword has physical qubit `i` set exactly when
//! `i` is in `S`, i.e. the integer `x = sum(2^i for i in S)`, and logical one
//! is its bitwise complement `y = 2^Q - 1 - x`. Every other block pattern is
//! outside the code space and flags an error.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{NaedError, Result};
use crate::statevec::{low_mask, BitString, MAX_QUBITS};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "CodeRecord", into = "CodeRecord")]
pub struct BitFlipCode {
    q: usize,
    set: Vec<usize>,
    x: u64,
    y: u64,
}

#[derive(Serialize, Deserialize)]
struct CodeRecord {
    #[serde(rename = "Q")]
    q: usize,
    #[serde(rename = "S")]
    s: Vec<usize>,
}

impl TryFrom<CodeRecord> for BitFlipCode {
    type Error = NaedError;

    fn try_from(r: CodeRecord) -> Result<Self> {
        BitFlipCode::new(r.q, &r.s)
    }
}

impl From<BitFlipCode> for CodeRecord {
    fn from(c: BitFlipCode) -> Self {
        CodeRecord { q: c.q, s: c.set }
    }
}

/// Decoded value of one `Q`-qubit block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockOutcome {
    Zero,
    One,
    Invalid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShotClassification {
    /// Every block held a codeword; carries the decoded logical string.
    Accept(BitString),
    Reject,
}

impl BitFlipCode {
    pub fn new(q: usize, set: &[usize]) -> Result<Self> {
        if q == 0 || q > MAX_QUBITS {
            return Err(NaedError::validation(format!("Q = {q} not in 1..={MAX_QUBITS}")));
        }
        if let Some(&bad) = set.iter().find(|&&i| i >= q) {
            return Err(NaedError::validation(format!("S contains {bad}, outside 0..{q}")));
        }
        let set: Vec<usize> = set.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
        let x = set.iter().map(|&i| 1u64 << i).sum::<u64>();
        let y = low_mask(q) - x;
        Ok(BitFlipCode { q, set, x, y })
    }

    /// The unencoded identity code, Q = 1 and S empty.
    pub fn trivial() -> Self {
        BitFlipCode::new(1, &[]).expect("trivial code is valid")
    }

    /// Physical qubits per logical qubit.
    pub fn q(&self) -> usize {
        self.q
    }

    /// Sorted members of `S`.
    pub fn set(&self) -> &[usize] {
        &self.set
    }

    /// Integer codeword of logical zero (bit `i` is block qubit `i`).
    pub fn x(&self) -> u64 {
        self.x
    }

    /// Integer codeword of logical one.
    pub fn y(&self) -> u64 {
        self.y
    }

    /// The code for the complementary set; swaps the two codewords.
    pub fn complement(&self) -> BitFlipCode {
        let rest: Vec<usize> = (0..self.q).filter(|i| !self.set.contains(i)).collect();
        BitFlipCode::new(self.q, &rest).expect("complement stays in range")
    }

    // Codeword integers put qubit i at bit i, block slices put qubit 0 at the
    // top bit, so convert by bit reversal within Q bits.
    fn to_block_index(&self, codeword: u64) -> u64 {
        codeword.reverse_bits() >> (64 - self.q)
    }

    /// Block slice value (qubit 0 most significant) of a logical codeword.
    pub fn block_pattern(&self, logical_one: bool) -> u64 {
        self.to_block_index(if logical_one { self.y } else { self.x })
    }

    /// Codeword as a `Q`-character string, qubit 0 leftmost.
    pub fn codeword(&self, logical_one: bool) -> BitString {
        BitString::new(self.block_pattern(logical_one), self.q).expect("Q <= 25")
    }

    pub(crate) fn classify_pattern(&self, pattern: u64) -> BlockOutcome {
        if pattern == self.block_pattern(false) {
            BlockOutcome::Zero
        } else if pattern == self.block_pattern(true) {
            BlockOutcome::One
        } else {
            BlockOutcome::Invalid
        }
    }

    pub fn classify_block(&self, block: &BitString) -> Result<BlockOutcome> {
        if block.len() != self.q {
            return Err(NaedError::validation(format!(
                "block has {} bits, code has Q = {}",
                block.len(),
                self.q
            )));
        }
        Ok(self.classify_pattern(block.value()))
    }

    /// Splits `bits` into `n_logical` consecutive blocks (logical qubit 0
    /// leftmost) and decodes each.
    pub fn classify_shot(&self, n_logical: usize, bits: &BitString) -> Result<ShotClassification> {
        if n_logical == 0 || bits.len() != n_logical * self.q {
            return Err(NaedError::validation(format!(
                "shot has {} bits, expected N*Q = {}*{}",
                bits.len(),
                n_logical,
                self.q
            )));
        }
        let mut logical = 0u64;
        for k in 0..n_logical {
            let bit = match self.classify_pattern(bits.slice(k * self.q, self.q)) {
                BlockOutcome::Zero => 0,
                BlockOutcome::One => 1,
                BlockOutcome::Invalid => return Ok(ShotClassification::Reject),
            };
            logical = (logical << 1) | bit;
        }
        Ok(ShotClassification::Accept(BitString::new(logical, n_logical)?))
    }

    /// Block-by-block encoding of a logical string.
    pub fn encode(&self, logical: &BitString) -> Result<BitString> {
        let n = logical.len();
        if n * self.q > 64 {
            return Err(NaedError::validation("encoded string exceeds 64 bits"));
        }
        let value = (0..n).fold(0u64, |acc, k| (acc << self.q) | self.block_pattern(logical.bit(k)));
        BitString::new(value, n * self.q)
    }
}

/// Codeword set used by the GHZ experiments: `{0, ..., ceil(Q/2) - 1}`,
/// which splits each codeword as evenly as possible between 0s and 1s.
pub fn default_experiment_set(q: usize) -> Vec<usize> {
    (0..q.div_ceil(2)).collect()
}
