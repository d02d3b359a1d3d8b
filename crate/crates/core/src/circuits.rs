//! Logical circuits: GHZ builders and the text DSL.
//!
//! ```text
//! # comments run to end of line
//! qubits 3
//! h q0
//! u3 1.5707963267948966 0 3.141592653589793 q1
//! x q2
//! cx q0 q1
//! ```

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::code::{default_experiment_set, BitFlipCode};
use crate::error::{NaedError, Result};
use crate::logical::{lower, simplify, PhysicalCircuit};
use crate::statevec::{BitString, Pdf, MAX_QUBITS};

pub const MAX_GHZ_QUBITS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LogicalGate {
    U3 { qubit: usize, theta: f64, phi: f64, lambda: f64 },
    Cx { control: usize, target: usize },
}

impl LogicalGate {
    pub fn h(qubit: usize) -> Self {
        LogicalGate::U3 { qubit, theta: PI / 2.0, phi: 0.0, lambda: PI }
    }

    pub fn x(qubit: usize) -> Self {
        LogicalGate::U3 { qubit, theta: PI, phi: 0.0, lambda: PI }
    }

    pub fn u3(qubit: usize, theta: f64, phi: f64, lambda: f64) -> Self {
        LogicalGate::U3 { qubit, theta, phi, lambda }
    }

    pub fn cx(control: usize, target: usize) -> Self {
        LogicalGate::Cx { control, target }
    }
}

impl fmt::Display for LogicalGate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            g if g == LogicalGate::h(qubit_of(&g)) => write!(f, "h q{}", qubit_of(&g)),
            g if g == LogicalGate::x(qubit_of(&g)) => write!(f, "x q{}", qubit_of(&g)),
            LogicalGate::U3 { qubit, theta, phi, lambda } => write!(f, "u3 {theta} {phi} {lambda} q{qubit}"),
            LogicalGate::Cx { control, target } => write!(f, "cx q{control} q{target}"),
        }
    }
}

fn qubit_of(g: &LogicalGate) -> usize {
    match *g {
        LogicalGate::U3 { qubit, .. } => qubit,
        LogicalGate::Cx { control, .. } => control,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogicalCircuit {
    n_qubits: usize,
    gates: Vec<LogicalGate>,
}

impl LogicalCircuit {
    pub fn new(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(NaedError::validation(format!("logical width {n_qubits} not in 1..={MAX_QUBITS}")));
        }
        Ok(LogicalCircuit { n_qubits, gates: Vec::new() })
    }

    pub fn push(&mut self, gate: LogicalGate) -> Result<()> {
        match gate {
            LogicalGate::U3 { qubit, theta, phi, lambda } => {
                if qubit >= self.n_qubits {
                    return Err(NaedError::Index { index: qubit, len: self.n_qubits });
                }
                if !(theta.is_finite() && phi.is_finite() && lambda.is_finite()) {
                    return Err(NaedError::validation("u3 angles must be finite"));
                }
            }
            LogicalGate::Cx { control, target } => {
                let top = control.max(target);
                if top >= self.n_qubits {
                    return Err(NaedError::Index { index: top, len: self.n_qubits });
                }
                if control == target {
                    return Err(NaedError::validation("cx control and target must differ"));
                }
            }
        }
        self.gates.push(gate);
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[LogicalGate] {
        &self.gates
    }

    pub fn cx_count(&self) -> usize {
        self.gates.iter().filter(|g| matches!(g, LogicalGate::Cx { .. })).count()
    }
}

/// Canonical DSL text.
impl fmt::Display for LogicalCircuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "qubits {}", self.n_qubits)?;
        for g in &self.gates {
            writeln!(f, "{g}")?;
        }
        Ok(())
    }
}

impl FromStr for LogicalCircuit {
    type Err = NaedError;

    fn from_str(text: &str) -> Result<Self> {
        parse_dsl(text)
    }
}

/// Hadamard on logical qubit 0 followed by the CX chain `(i, i+1)`,
/// `i = 0..N-2`: `N - 1` CX gates.
pub fn ghz_logical(n: usize) -> Result<LogicalCircuit> {
    if !(2..=MAX_GHZ_QUBITS).contains(&n) {
        return Err(NaedError::validation(format!("GHZ width {n} not in 2..={MAX_GHZ_QUBITS}")));
    }
    let mut c = LogicalCircuit::new(n)?;
    c.push(LogicalGate::h(0))?;
    for i in 0..n - 1 {
        c.push(LogicalGate::cx(i, i + 1))?;
    }
    Ok(c)
}

/// Code used by the GHZ(N, Q) experiments. Q = 1 stays unencoded.
pub fn ghz_code(q: usize) -> Result<BitFlipCode> {
    if q == 1 {
        Ok(BitFlipCode::trivial())
    } else {
        BitFlipCode::new(q, &default_experiment_set(q))
    }
}

fn check_register(n: usize, q: usize) -> Result<()> {
    if n.checked_mul(q).is_none_or(|w| w > MAX_QUBITS) {
        return Err(NaedError::Capacity(format!("N*Q = {n}*{q} exceeds {MAX_QUBITS} physical qubits")));
    }
    Ok(())
}

/// Simplified encoded GHZ circuit with the experiment code for `q`.
pub fn build_ghz(n: usize, q: usize) -> Result<PhysicalCircuit> {
    check_register(n, q)?;
    build_ghz_with(n, &ghz_code(q)?)
}

pub fn build_ghz_with(n: usize, code: &BitFlipCode) -> Result<PhysicalCircuit> {
    check_register(n, code.q())?;
    Ok(simplify(&lower(&ghz_logical(n)?, code)?))
}

/// Noiseless GHZ(N, Q) distribution: half on the encoding of logical
/// all-zeros, half on logical all-ones.
pub fn ideal_pdf(n: usize, q: usize) -> Result<Pdf<BitString>> {
    check_register(n, q)?;
    ideal_pdf_with(n, &ghz_code(q)?)
}

pub fn ideal_pdf_with(n: usize, code: &BitFlipCode) -> Result<Pdf<BitString>> {
    check_register(n, code.q())?;
    let zeros = code.encode(&BitString::new(0, n)?)?;
    let ones = code.encode(&BitString::new((1u64 << n) - 1, n)?)?;
    Ok([(zeros, 0.5), (ones, 0.5)].into_iter().collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Op {
    H,
    X,
    U3(f64, f64, f64),
    Cx,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Statement {
    pub op: Op,
    pub qubits: Vec<usize>,
}

pub(crate) struct Program {
    pub n_qubits: usize,
    pub statements: Vec<Statement>,
}

struct Token<'a> {
    text: &'a str,
    column: usize,
}

fn tokens(line: &str) -> Vec<Token<'_>> {
    let code = line.split('#').next().unwrap_or("");
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in code.char_indices() {
        match (ch.is_whitespace(), start) {
            (false, None) => start = Some(i),
            (true, Some(s)) => {
                out.push(Token { text: &code[s..i], column: s + 1 });
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(Token { text: &code[s..], column: s + 1 });
    }
    out
}

pub(crate) fn parse_program(text: &str, max_qubits: usize) -> Result<Program> {
    let mut n_qubits = None;
    let mut statements = Vec::new();
    let mut last_line = 0;
    for (idx, line) in text.lines().enumerate() {
        let ln = idx + 1;
        last_line = ln;
        let toks = tokens(line);
        let Some(head) = toks.first() else { continue };
        let args = &toks[1..];
        if head.text == "qubits" {
            if n_qubits.is_some() {
                return Err(NaedError::parse(ln, head.column, "duplicate qubits declaration"));
            }
            let [arg] = args else {
                return Err(NaedError::parse(ln, head.column, "expected `qubits <N>`"));
            };
            let n: usize = arg
                .text
                .parse()
                .map_err(|_| NaedError::parse(ln, arg.column, format!("invalid qubit count {:?}", arg.text)))?;
            if n == 0 || n > max_qubits {
                return Err(NaedError::parse(ln, arg.column, format!("qubit count {n} not in 1..={max_qubits}")));
            }
            n_qubits = Some(n);
            continue;
        }
        let Some(width) = n_qubits else {
            return Err(NaedError::parse(ln, head.column, "gate before `qubits` declaration"));
        };
        let (n_angles, n_wires) = match head.text {
            "h" | "x" => (0, 1),
            "u3" => (3, 1),
            "cx" => (0, 2),
            other => return Err(NaedError::parse(ln, head.column, format!("unknown mnemonic {other:?}"))),
        };
        if args.len() != n_angles + n_wires {
            return Err(NaedError::parse(
                ln,
                head.column,
                format!("`{}` takes {} arguments, found {}", head.text, n_angles + n_wires, args.len()),
            ));
        }
        let mut angles = [0.0; 3];
        for (slot, tok) in angles.iter_mut().zip(&args[..n_angles]) {
            *slot = parse_angle(tok).map_err(|m| NaedError::parse(ln, tok.column, m))?;
        }
        let mut qubits = Vec::with_capacity(n_wires);
        for tok in &args[n_angles..] {
            let q = parse_qubit(tok.text).ok_or_else(|| {
                NaedError::parse(ln, tok.column, format!("expected qubit like `q0`, found {:?}", tok.text))
            })?;
            if q >= width {
                return Err(NaedError::parse(
                    ln,
                    tok.column,
                    format!("index out of range: q{q} with {width} qubits declared"),
                ));
            }
            qubits.push(q);
        }
        if n_wires == 2 && qubits[0] == qubits[1] {
            return Err(NaedError::parse(ln, args[1].column, "cx control and target must differ"));
        }
        let op = match head.text {
            "h" => Op::H,
            "x" => Op::X,
            "u3" => Op::U3(angles[0], angles[1], angles[2]),
            _ => Op::Cx,
        };
        statements.push(Statement { op, qubits });
    }
    let n_qubits = n_qubits.ok_or_else(|| NaedError::parse(last_line.max(1), 1, "missing `qubits <N>` declaration"))?;
    Ok(Program { n_qubits, statements })
}

fn parse_angle(tok: &Token<'_>) -> std::result::Result<f64, String> {
    let t = tok.text;
    let decimal = t.chars().all(|c| c.is_ascii_digit() || matches!(c, '+' | '-' | '.' | 'e' | 'E'));
    match t.parse::<f64>() {
        Ok(v) if decimal && v.is_finite() => Ok(v),
        _ => Err(format!("invalid angle {t:?}")),
    }
}

fn parse_qubit(t: &str) -> Option<usize> {
    let digits = t.strip_prefix('q')?;
    if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

/// Parses DSL text into a logical circuit. `h` and `x` become the
/// corresponding U3 gates.
pub fn parse_dsl(text: &str) -> Result<LogicalCircuit> {
    let program = parse_program(text, MAX_QUBITS)?;
    let mut c = LogicalCircuit::new(program.n_qubits)?;
    for st in program.statements {
        let gate = match (st.op, st.qubits.as_slice()) {
            (Op::H, &[q]) => LogicalGate::h(q),
            (Op::X, &[q]) => LogicalGate::x(q),
            (Op::U3(t, p, l), &[q]) => LogicalGate::u3(q, t, p, l),
            (Op::Cx, &[a, b]) => LogicalGate::cx(a, b),
            _ => unreachable!("arity checked by the parser"),
        };
        c.push(gate)?;
    }
    Ok(c)
}
