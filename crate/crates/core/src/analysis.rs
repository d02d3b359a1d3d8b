//! Post-selection tallies and similarity metrics.
//!
//! All metrics are on a 0-100 scale. Tallies keep exact integer counts and
//! defer division to metric evaluation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::code::{BitFlipCode, ShotClassification};
use crate::error::{NaedError, Result};
use crate::statevec::{BitString, Pdf};

const NORM_TOL: f64 = 1e-9;

/// `100 - 50 * sum_i |A_i - B_i|` over the union of both supports.
pub fn similarity<K: Ord>(a: &Pdf<K>, b: &Pdf<K>) -> Result<f64> {
    for (name, pdf) in [("first", a), ("second", b)] {
        let total: f64 = pdf.values().sum();
        if (total - 1.0).abs() > NORM_TOL || pdf.values().any(|&p| p < 0.0 || !p.is_finite()) {
            return Err(NaedError::validation(format!("{name} distribution sums to {total}, expected 1")));
        }
    }
    let mut l1 = 0.0;
    for (k, &pa) in a {
        l1 += (pa - b.get(k).copied().unwrap_or(0.0)).abs();
    }
    for (k, &pb) in b {
        if !a.contains_key(k) {
            l1 += pb;
        }
    }
    Ok((100.0 - 50.0 * l1).clamp(0.0, 100.0))
}

/// Relative frequencies of a shot multiset.
pub fn empirical_pdf<K: Ord + Clone>(shots: &[K]) -> Pdf<K> {
    let mut counts: BTreeMap<K, u64> = BTreeMap::new();
    shots.iter().for_each(|s| *counts.entry(s.clone()).or_default() += 1);
    normalize(&counts)
}

fn normalize<K: Ord + Clone>(counts: &BTreeMap<K, u64>) -> Pdf<K> {
    let total: u64 = counts.values().sum();
    counts.iter().map(|(k, &c)| (k.clone(), c as f64 / total as f64)).collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    #[serde(rename = "T")]
    pub t: u64,
    /// Logical all-zeros.
    pub r0: u64,
    /// Logical all-ones.
    pub r1: u64,
    /// Accepted, but some other logical string (undetected error).
    pub ra: u64,
    /// Rejected (detected error).
    pub rb: u64,
    pub accepted_hist: BTreeMap<BitString, u64>,
}

impl Tally {
    pub fn accepted(&self) -> u64 {
        self.r0 + self.r1 + self.ra
    }

    pub fn is_consistent(&self) -> bool {
        self.t == self.r0 + self.r1 + self.ra + self.rb && self.accepted() == self.accepted_hist.values().sum::<u64>()
    }

    /// Field-wise sum; associative and commutative.
    pub fn merge(&mut self, other: &Tally) {
        self.t += other.t;
        self.r0 += other.r0;
        self.r1 += other.r1;
        self.ra += other.ra;
        self.rb += other.rb;
        for (k, &v) in &other.accepted_hist {
            *self.accepted_hist.entry(*k).or_default() += v;
        }
    }

    /// Tally from bare counts; the `ra` mass sits on one logical string.
    pub fn from_counts(n_logical: usize, r0: u64, r1: u64, ra: u64, rb: u64) -> Result<Tally> {
        if n_logical < 2 && ra > 0 {
            return Err(NaedError::validation("ra > 0 needs at least two logical qubits"));
        }
        let mut hist = BTreeMap::new();
        if r0 > 0 {
            hist.insert(BitString::new(0, n_logical)?, r0);
        }
        if r1 > 0 {
            hist.insert(BitString::new((1 << n_logical) - 1, n_logical)?, r1);
        }
        if ra > 0 {
            hist.insert(BitString::new(1, n_logical)?, ra);
        }
        Ok(Tally { t: r0 + r1 + ra + rb, r0, r1, ra, rb, accepted_hist: hist })
    }
}

/// Classifies every shot against `code` with `n_logical` blocks.
pub fn tally(shots: &[BitString], code: &BitFlipCode, n_logical: usize) -> Result<Tally> {
    tally_counts(shots.iter().map(|s| (*s, 1)), code, n_logical)
}

/// Like [`tally`], for a histogram of `(outcome, count)` pairs.
pub fn tally_counts(
    counts: impl IntoIterator<Item = (BitString, u64)>,
    code: &BitFlipCode,
    n_logical: usize,
) -> Result<Tally> {
    let all_ones = if n_logical < 64 { (1u64 << n_logical) - 1 } else { u64::MAX };
    let mut t = Tally::default();
    for (s, c) in counts {
        t.t += c;
        match code.classify_shot(n_logical, &s)? {
            ShotClassification::Reject => t.rb += c,
            ShotClassification::Accept(logical) => {
                match logical.value() {
                    0 => t.r0 += c,
                    v if v == all_ones => t.r1 += c,
                    _ => t.ra += c,
                }
                *t.accepted_hist.entry(logical).or_default() += c;
            }
        }
    }
    Ok(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mu_full: f64,
    /// Absent when every shot was rejected.
    pub mu_naed: Option<f64>,
    pub p_kept: f64,
}

/// Similarity metrics of a GHZ tally.
///
/// `mu_full` compares the full physical distribution with the ideal half/half
/// split on the two GHZ codeword strings. Only the two ideal strings carry
/// reference mass, so it reduces to the counts:
/// `100 * (1 - (|1/2 - r0/T| + |1/2 - r1/T| + ra/T + rb/T) / 2)`.
/// `mu_naed` renormalizes the accepted histogram over logical strings and
/// compares it with half/half on logical all-zeros and all-ones.
pub fn metrics(t: &Tally) -> Result<Metrics> {
    if t.t == 0 {
        return Err(NaedError::validation("tally has no shots"));
    }
    if !t.is_consistent() {
        return Err(NaedError::validation("tally counts are inconsistent"));
    }
    let total = t.t as f64;
    let p_kept = 100.0 * (1.0 - t.rb as f64 / total);
    let deviation = (0.5 - t.r0 as f64 / total).abs() + (0.5 - t.r1 as f64 / total).abs() + (t.ra + t.rb) as f64 / total;
    let mu_full = 100.0 - 50.0 * deviation;
    let mu_naed = match t.accepted_hist.keys().next() {
        None => None,
        Some(first) => {
            let n = first.len();
            let ideal: Pdf<BitString> =
                [(BitString::new(0, n)?, 0.5), (BitString::new((1 << n) - 1, n)?, 0.5)].into_iter().collect();
            Some(similarity(&normalize(&t.accepted_hist), &ideal)?)
        }
    };
    Ok(Metrics { mu_full, mu_naed, p_kept })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IdentityCheck {
    /// `r0 > T/2` or `r1 > T/2`: the absolute values in `mu_full` do not drop
    /// out and the identity does not apply.
    pub clipping_active: bool,
    /// `4T * (mu_full/100 - (p_kept/100 - ra/T))`, an exact integer.
    pub residual_numerator: i128,
    pub denominator: u128,
}

impl IdentityCheck {
    pub fn holds(&self) -> bool {
        !self.clipping_active && self.residual_numerator == 0
    }

    pub fn residual(&self) -> f64 {
        self.residual_numerator as f64 / self.denominator as f64
    }
}

/// Checks `mu_full = p_kept - 100 ra / T` in exact integer arithmetic.
pub fn identity_check(t: &Tally) -> IdentityCheck {
    let (tt, r0, r1, ra, rb) = (t.t as i128, t.r0 as i128, t.r1 as i128, t.ra as i128, t.rb as i128);
    let clipping_active = 2 * r0 > tt || 2 * r1 > tt;
    // Over the common denominator 4T.
    let mu_full = 4 * tt - ((tt - 2 * r0).abs() + (tt - 2 * r1).abs() + 2 * ra + 2 * rb);
    let rhs = 4 * (tt - rb - ra);
    IdentityCheck { clipping_active, residual_numerator: mu_full - rhs, denominator: 4 * t.t as u128 }
}

/// Exact probability split of a distribution under post-selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcceptanceSplit {
    pub zeros: f64,
    pub ones: f64,
    pub other: f64,
    pub rejected: f64,
}

pub fn acceptance_split(pdf: &Pdf<BitString>, code: &BitFlipCode, n_logical: usize) -> Result<AcceptanceSplit> {
    let all_ones = (1u64 << n_logical) - 1;
    let mut s = AcceptanceSplit { zeros: 0.0, ones: 0.0, other: 0.0, rejected: 0.0 };
    for (bits, &p) in pdf {
        match code.classify_shot(n_logical, bits)? {
            ShotClassification::Reject => s.rejected += p,
            ShotClassification::Accept(l) if l.value() == 0 => s.zeros += p,
            ShotClassification::Accept(l) if l.value() == all_ones => s.ones += p,
            ShotClassification::Accept(_) => s.other += p,
        }
    }
    Ok(s)
}
