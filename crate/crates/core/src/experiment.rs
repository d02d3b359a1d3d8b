//! GHZ(N, Q) sweeps over a grid of widths and block sizes, injection studies
//! and heatmap reshaping.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{acceptance_split, metrics, tally, tally_counts};
use crate::circuits::{build_ghz, ghz_code, ghz_logical, MAX_GHZ_QUBITS};
use crate::code::{BitFlipCode, ShotClassification};
use crate::error::{NaedError, Result};
use crate::logical::{lower_annotated, PhysicalCircuit};
use crate::noise::{expected_counts, inject, simulate_noisy, InjectedError, InjectionSpec, StochasticModel};
use crate::rng::derive_seed;
use crate::statevec::{simulate, BitString, MAX_QUBITS};

/// JSON schema for [`SweepResult`].
pub const SWEEP_SCHEMA: &str = include_str!("../schema/sweep.schema.json");

pub const CSV_COLUMNS: [&str; 12] =
    ["N", "Q", "rep", "seed", "T", "r0", "r1", "ra", "rb", "mu_full", "mu_naed", "p_kept"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub n_list: Vec<usize>,
    pub q_list: Vec<usize>,
    pub shots: usize,
    pub reps: usize,
    /// `None` tallies the exact noiseless distribution instead of sampling.
    pub noise: Option<StochasticModel>,
    pub master_seed: u64,
    /// Apply `simplify` to the lowered circuits.
    #[serde(default = "yes")]
    pub simplify: bool,
}

fn yes() -> bool {
    true
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            n_list: vec![2, 3, 4, 5],
            q_list: vec![1, 2, 3, 4, 5],
            shots: 8192,
            reps: 225,
            noise: None,
            master_seed: 0,
            simplify: true,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_list.is_empty() || self.q_list.is_empty() {
            return Err(NaedError::Config("empty N or Q list".into()));
        }
        if self.reps == 0 || self.shots == 0 {
            return Err(NaedError::Config("reps and shots must be at least 1".into()));
        }
        if let Some(n) = self.n_list.iter().find(|n| !(2..=MAX_GHZ_QUBITS).contains(n)) {
            return Err(NaedError::Config(format!("N = {n} not in 2..={MAX_GHZ_QUBITS}")));
        }
        if self.q_list.contains(&0) {
            return Err(NaedError::Config("Q must be at least 1".into()));
        }
        let too_big: Vec<String> = self
            .cells()
            .filter(|(n, q)| n * q > MAX_QUBITS)
            .map(|(n, q)| format!("({n},{q})"))
            .collect();
        if !too_big.is_empty() {
            return Err(NaedError::Config(format!(
                "cells exceed {MAX_QUBITS} physical qubits: {}",
                too_big.join(" ")
            )));
        }
        if let Some(m) = &self.noise {
            m.validate().map_err(|e| NaedError::Config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.n_list.iter().flat_map(move |&n| self.q_list.iter().map(move |&q| (n, q)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "Q")]
    pub q: usize,
    /// Repetition index, or `mean` on aggregate rows.
    pub rep: String,
    pub seed: u64,
    #[serde(rename = "T")]
    pub t: u64,
    pub r0: u64,
    pub r1: u64,
    pub ra: u64,
    pub rb: u64,
    pub mu_full: f64,
    pub mu_naed: Option<f64>,
    pub p_kept: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub config: SweepConfig,
    pub rows: Vec<SweepRow>,
    pub aggregates: Vec<SweepRow>,
}

impl SweepResult {
    pub fn aggregate(&self, n: usize, q: usize) -> Option<&SweepRow> {
        self.aggregates.iter().find(|r| r.n == n && r.q == q)
    }

    /// Per-rep rows then aggregates, one header.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in self.rows.iter().chain(&self.aggregates) {
            w.serialize(row)?;
        }
        let bytes = w.into_inner().map_err(|e| NaedError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is ascii"))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Reads rows written by [`SweepResult::to_csv`].
pub fn read_csv_rows(text: &str) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != CSV_COLUMNS {
        return Err(NaedError::validation(format!("unexpected CSV header {}", header.join(","))));
    }
    r.deserialize().map(|row| row.map_err(NaedError::from)).collect()
}

pub fn rep_seed(master: u64, n: usize, q: usize, rep: usize) -> u64 {
    derive_seed(&[master, n as u64, q as u64, rep as u64])
}

fn ghz_circuit(n: usize, q: usize, simplified: bool) -> Result<PhysicalCircuit> {
    if simplified {
        build_ghz(n, q)
    } else {
        Ok(lower_annotated(&ghz_logical(n)?, &ghz_code(q)?)?.circuit)
    }
}

/// One repetition of one cell.
pub fn run_rep(config: &SweepConfig, n: usize, q: usize, rep: usize) -> Result<SweepRow> {
    let circuit = ghz_circuit(n, q, config.simplify)?;
    let seed = rep_seed(config.master_seed, n, q, rep);
    let code = ghz_code(q)?;
    let t = match &config.noise {
        Some(model) => tally(&simulate_noisy(&circuit, model, config.shots, seed)?, &code, n)?,
        None => tally_counts(expected_counts(&circuit, config.shots)?, &code, n)?,
    };
    let m = metrics(&t)?;
    Ok(SweepRow {
        n,
        q,
        rep: rep.to_string(),
        seed,
        t: t.t,
        r0: t.r0,
        r1: t.r1,
        ra: t.ra,
        rb: t.rb,
        mu_full: m.mu_full,
        mu_naed: m.mu_naed,
        p_kept: m.p_kept,
    })
}

/// Runs every `(N, Q, rep)` in the work pool. Row order is `(N, Q, rep)`
/// regardless of completion order.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepResult> {
    config.validate()?;
    let jobs: Vec<(usize, usize, usize)> =
        config.cells().flat_map(|(n, q)| (0..config.reps).map(move |r| (n, q, r))).collect();
    let rows: Vec<SweepRow> = jobs.par_iter().map(|&(n, q, r)| run_rep(config, n, q, r)).collect::<Result<_>>()?;
    let aggregates = config
        .cells()
        .map(|(n, q)| aggregate(config.master_seed, n, q, rows.iter().filter(|r| r.n == n && r.q == q)))
        .collect();
    Ok(SweepResult { config: config.clone(), rows, aggregates })
}

/// Mean metrics over the reps; counts are summed. `mu_naed` averages the reps
/// where it exists.
fn aggregate<'a>(master: u64, n: usize, q: usize, rows: impl Iterator<Item = &'a SweepRow>) -> SweepRow {
    let rows: Vec<&SweepRow> = rows.collect();
    let k = rows.len() as f64;
    let naed: Vec<f64> = rows.iter().filter_map(|r| r.mu_naed).collect();
    SweepRow {
        n,
        q,
        rep: "mean".into(),
        seed: master,
        t: rows.iter().map(|r| r.t).sum(),
        r0: rows.iter().map(|r| r.r0).sum(),
        r1: rows.iter().map(|r| r.r1).sum(),
        ra: rows.iter().map(|r| r.ra).sum(),
        rb: rows.iter().map(|r| r.rb).sum(),
        mu_full: rows.iter().map(|r| r.mu_full).sum::<f64>() / k,
        mu_naed: (!naed.is_empty()).then(|| naed.iter().sum::<f64>() / naed.len() as f64),
        p_kept: rows.iter().map(|r| r.p_kept).sum::<f64>() / k,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    MuFull,
    MuNaed,
    PKept,
}

impl std::str::FromStr for Metric {
    type Err = NaedError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mu_full" => Ok(Metric::MuFull),
            "mu_naed" => Ok(Metric::MuNaed),
            "p_kept" => Ok(Metric::PKept),
            _ => Err(NaedError::validation(format!("unknown metric {s:?}; expected mu_full, mu_naed or p_kept"))),
        }
    }
}

impl Metric {
    pub fn of(&self, row: &SweepRow) -> Option<f64> {
        match self {
            Metric::MuFull => Some(row.mu_full),
            Metric::MuNaed => row.mu_naed,
            Metric::PKept => Some(row.p_kept),
        }
    }
}

/// Heatmap matrix from aggregate rows: one line per N, one column per Q.
/// Missing cells are left empty.
pub fn plot_matrix(rows: &[SweepRow], metric: Metric) -> String {
    let cells: BTreeMap<(usize, usize), Option<f64>> =
        rows.iter().filter(|r| r.rep == "mean").map(|r| ((r.n, r.q), metric.of(r))).collect();
    let ns: Vec<usize> = cells.keys().map(|k| k.0).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    let qs: Vec<usize> = cells.keys().map(|k| k.1).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    let mut out = String::from("N\\Q");
    qs.iter().for_each(|q| write!(out, ",{q}").unwrap());
    out.push('\n');
    for n in &ns {
        write!(out, "{n}").unwrap();
        for q in &qs {
            match cells.get(&(*n, *q)).copied().flatten() {
                Some(v) => write!(out, ",{v}").unwrap(),
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionRow {
    pub site: isize,
    pub qubit: usize,
    /// Exact probability that the output is rejected.
    pub rejection: f64,
    /// Total probability on accepted strings.
    pub accepted: f64,
    /// Probability of a wrong logical string given acceptance.
    pub corruption: Option<f64>,
    /// Max difference between this run's accepted logical distribution
    /// (unnormalized) and the error-free one.
    pub accepted_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionReport {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "Q")]
    pub q: usize,
    pub error: String,
    pub baseline_rejection: f64,
    pub rows: Vec<InjectionRow>,
}

impl InjectionReport {
    pub fn max_rejection(&self) -> f64 {
        self.rows.iter().map(|r| r.rejection).fold(0.0, f64::max)
    }

    pub fn min_rejection(&self) -> f64 {
        self.rows.iter().map(|r| r.rejection).fold(f64::INFINITY, f64::min)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row)?;
        }
        let bytes = w.into_inner().map_err(|e| NaedError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is ascii"))
    }
}

fn accepted_logical(circuit: &PhysicalCircuit, code: &BitFlipCode, n: usize) -> Result<(BTreeMap<BitString, f64>, f64)> {
    let pdf = simulate(circuit)?.probabilities();
    let split = acceptance_split(&pdf, code, n)?;
    let mut accepted = BTreeMap::new();
    for (bits, p) in &pdf {
        if let ShotClassification::Accept(l) = code.classify_shot(n, bits)? {
            *accepted.entry(l).or_insert(0.0) += p;
        }
    }
    Ok((accepted, split.rejected))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteSweep {
    /// Between logical gates, where every block holds a codeword superposition.
    Boundaries,
    /// After every physical gate.
    All,
}

/// Puts `error` at each site on every physical qubit of the unsimplified
/// GHZ(N, Q) circuit and evaluates the exact output distribution.
pub fn inject_study(n: usize, q: usize, error: InjectedError, sweep: SiteSweep) -> Result<InjectionReport> {
    let code = ghz_code(q)?;
    let lowered = lower_annotated(&ghz_logical(n)?, &code)?;
    let (base, baseline_rejection) = accepted_logical(&lowered.circuit, &code, n)?;
    let n_phys = lowered.circuit.n_qubits();
    let site_list: Vec<isize> = match sweep {
        SiteSweep::Boundaries => lowered.boundaries.clone(),
        SiteSweep::All => (-1..lowered.circuit.len() as isize).collect(),
    };
    let sites: Vec<(isize, usize)> = site_list.iter().flat_map(|&s| (0..n_phys).map(move |qb| (s, qb))).collect();
    let rows = sites
        .par_iter()
        .map(|&(site, qubit)| {
            let c = inject(&lowered.circuit, &InjectionSpec { site, qubit, error })?;
            let (acc, rejection) = accepted_logical(&c, &code, n)?;
            let kept: f64 = acc.values().sum();
            let ones = BitString::new((1u64 << n) - 1, n)?;
            let zeros = BitString::new(0, n)?;
            let wrong: f64 = acc.iter().filter(|(k, _)| **k != ones && **k != zeros).map(|(_, p)| p).sum();
            let corruption = (kept > 1e-12).then(|| wrong / kept);
            let deviation = base
                .keys()
                .chain(acc.keys())
                .map(|k| (base.get(k).unwrap_or(&0.0) - acc.get(k).unwrap_or(&0.0)).abs())
                .fold(0.0, f64::max);
            Ok(InjectionRow { site, qubit, rejection, accepted: kept, corruption, accepted_deviation: deviation })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(InjectionReport { n, q, error: error.to_string(), baseline_rejection, rows })
}
