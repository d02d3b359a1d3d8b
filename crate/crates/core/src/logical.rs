//! Physical circuit IR and synthesis of encoded (logical) gates.
//!
//! Gate lists run in time order: the first gate in the list acts first.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::circuits::{self, LogicalCircuit, LogicalGate, Op};
use crate::code::BitFlipCode;
use crate::error::{NaedError, Result};
use crate::statevec::{Matrix2, MAX_QUBITS};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhysicalGate {
    U3 { qubit: usize, theta: f64, phi: f64, lambda: f64 },
    Cx { control: usize, target: usize },
    X { qubit: usize },
}

impl PhysicalGate {
    pub fn u3(qubit: usize, theta: f64, phi: f64, lambda: f64) -> Self {
        PhysicalGate::U3 { qubit, theta, phi, lambda }
    }

    pub fn cx(control: usize, target: usize) -> Self {
        PhysicalGate::Cx { control, target }
    }

    pub fn x(qubit: usize) -> Self {
        PhysicalGate::X { qubit }
    }

    pub fn is_cx(&self) -> bool {
        matches!(self, PhysicalGate::Cx { .. })
    }

    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            PhysicalGate::U3 { qubit, .. } | PhysicalGate::X { qubit } => vec![qubit],
            PhysicalGate::Cx { control, target } => vec![control, target],
        }
    }

    pub fn touches(&self, q: usize) -> bool {
        match *self {
            PhysicalGate::U3 { qubit, .. } | PhysicalGate::X { qubit } => qubit == q,
            PhysicalGate::Cx { control, target } => control == q || target == q,
        }
    }

    fn max_qubit(&self) -> usize {
        self.qubits().into_iter().max().unwrap_or(0)
    }

    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        let top = self.max_qubit();
        if top >= n_qubits {
            return Err(NaedError::Index { index: top, len: n_qubits });
        }
        match *self {
            PhysicalGate::Cx { control, target } if control == target => Err(NaedError::validation(format!(
                "cx control and target are both qubit {control}"
            ))),
            PhysicalGate::U3 { theta, phi, lambda, .. } if !(theta.is_finite() && phi.is_finite() && lambda.is_finite()) => {
                Err(NaedError::validation("u3 angles must be finite"))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for PhysicalGate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            PhysicalGate::U3 { qubit, theta, phi, lambda } => write!(f, "u3 {theta} {phi} {lambda} q{qubit}"),
            PhysicalGate::Cx { control, target } => write!(f, "cx q{control} q{target}"),
            PhysicalGate::X { qubit } => write!(f, "x q{qubit}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalCircuit {
    n_qubits: usize,
    gates: Vec<PhysicalGate>,
}

impl PhysicalCircuit {
    pub fn new(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(NaedError::Capacity(format!(
                "{n_qubits} physical qubits requested, limit is {MAX_QUBITS}"
            )));
        }
        Ok(PhysicalCircuit { n_qubits, gates: Vec::new() })
    }

    pub fn from_gates(n_qubits: usize, gates: Vec<PhysicalGate>) -> Result<Self> {
        let mut c = PhysicalCircuit::new(n_qubits)?;
        c.extend(gates)?;
        Ok(c)
    }

    pub fn push(&mut self, gate: PhysicalGate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        self.gates.push(gate);
        Ok(())
    }

    pub fn extend(&mut self, gates: impl IntoIterator<Item = PhysicalGate>) -> Result<()> {
        gates.into_iter().try_for_each(|g| self.push(g))
    }

    pub fn insert(&mut self, index: usize, gate: PhysicalGate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        if index > self.gates.len() {
            return Err(NaedError::validation(format!("insert position {index} past end of circuit")));
        }
        self.gates.insert(index, gate);
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[PhysicalGate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn cx_count(&self) -> usize {
        self.gates.iter().filter(|g| g.is_cx()).count()
    }
}

/// Line-oriented text form: a `qubits <n>` header, then one gate per line.
impl fmt::Display for PhysicalCircuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "qubits {}", self.n_qubits)?;
        for g in &self.gates {
            writeln!(f, "{g}")?;
        }
        Ok(())
    }
}

impl FromStr for PhysicalCircuit {
    type Err = NaedError;

    fn from_str(text: &str) -> Result<Self> {
        let program = circuits::parse_program(text, MAX_QUBITS)?;
        let gates = program
            .statements
            .into_iter()
            .map(|st| match (st.op, st.qubits.as_slice()) {
                (Op::X, &[q]) => PhysicalGate::x(q),
                (Op::H, &[q]) => PhysicalGate::u3(q, PI / 2.0, 0.0, PI),
                (Op::U3(t, p, l), &[q]) => PhysicalGate::u3(q, t, p, l),
                (Op::Cx, &[c, t]) => PhysicalGate::cx(c, t),
                _ => unreachable!("arity checked by the parser"),
            })
            .collect();
        PhysicalCircuit::from_gates(program.n_qubits, gates)
    }
}

/// X gates that prepare the logical-zero codeword of a block starting at
/// physical qubit `offset`.
pub fn encoding_ops(code: &BitFlipCode, offset: usize) -> Vec<PhysicalGate> {
    code.set().iter().map(|&i| PhysicalGate::x(offset + i)).collect()
}

/// Angles of `X U3(theta, phi, lambda) X`, which equals
/// `exp(i(phi + lambda)) U3(theta, pi - phi, pi - lambda)`.
pub fn x_conjugated_angles(theta: f64, phi: f64, lambda: f64) -> (f64, f64, f64) {
    (theta, PI - phi, PI - lambda)
}

/// Logical U3 on the block at `offset`: fan-in CXs from block qubit 0, the
/// U3 on qubit 0, then the fan-out in reverse order. Uses `2(Q-1)` CXs. When
/// block qubit 0 belongs to `S` the U3 is conjugated by X through its angles.
pub fn logical_u3(code: &BitFlipCode, theta: f64, phi: f64, lambda: f64, offset: usize) -> Vec<PhysicalGate> {
    let q = code.q();
    let (t, p, l) = if code.set().contains(&0) {
        x_conjugated_angles(theta, phi, lambda)
    } else {
        (theta, phi, lambda)
    };
    let mut gates = Vec::with_capacity(2 * q - 1);
    gates.extend((1..q).map(|i| PhysicalGate::cx(offset, offset + i)));
    gates.push(PhysicalGate::u3(offset, t, p, l));
    gates.extend((1..q).rev().map(|i| PhysicalGate::cx(offset, offset + i)));
    gates
}

/// Logical CX between blocks at `ctrl_offset` and `tgt_offset`: X-encode the
/// target block, then pairwise CXs between corresponding block qubits.
pub fn logical_cx(code: &BitFlipCode, ctrl_offset: usize, tgt_offset: usize) -> Result<Vec<PhysicalGate>> {
    let q = code.q();
    if ctrl_offset.abs_diff(tgt_offset) < q {
        return Err(NaedError::validation(format!(
            "blocks at {ctrl_offset} and {tgt_offset} overlap for Q = {q}"
        )));
    }
    let mut gates = encoding_ops(code, tgt_offset);
    gates.extend((0..q).map(|i| PhysicalGate::cx(ctrl_offset + i, tgt_offset + i)));
    Ok(gates)
}

/// A lowered circuit together with the gate-list positions between logical
/// operations. A boundary `b` means "after gate `b`"; `-1` is before the first gate.
#[derive(Debug, Clone, PartialEq)]
pub struct Lowered {
    pub circuit: PhysicalCircuit,
    pub boundaries: Vec<isize>,
}

/// Replaces every logical gate by its encoded equivalent, after encoding each
/// logical qubit into its own contiguous block of `Q` physical qubits.
pub fn lower(logical: &LogicalCircuit, code: &BitFlipCode) -> Result<PhysicalCircuit> {
    lower_annotated(logical, code).map(|l| l.circuit)
}

pub fn lower_annotated(logical: &LogicalCircuit, code: &BitFlipCode) -> Result<Lowered> {
    let q = code.q();
    let n = logical.n_qubits() * q;
    if n > MAX_QUBITS {
        return Err(NaedError::Capacity(format!(
            "N*Q = {}*{} = {n} physical qubits exceeds {MAX_QUBITS}",
            logical.n_qubits(),
            q
        )));
    }
    let mut circuit = PhysicalCircuit::new(n)?;
    for k in 0..logical.n_qubits() {
        circuit.extend(encoding_ops(code, k * q))?;
    }
    let mut boundaries = vec![circuit.len() as isize - 1];
    for gate in logical.gates() {
        match *gate {
            LogicalGate::U3 { qubit, theta, phi, lambda } => {
                circuit.extend(logical_u3(code, theta, phi, lambda, qubit * q))?
            }
            LogicalGate::Cx { control, target } => {
                if control == target {
                    return Err(NaedError::validation(format!("logical cx on a single qubit {control}")));
                }
                circuit.extend(logical_cx(code, control * q, target * q)?)?
            }
        }
        boundaries.push(circuit.len() as isize - 1);
    }
    Ok(Lowered { circuit, boundaries })
}

/// Removes gates that are redundant for the all-zeros input state, to a
/// fixpoint:
/// - adjacent identical X or CX pairs on the same wires cancel;
/// - CX gates whose control is known to be `|0>` are dropped;
/// - X pairs on one qubit cancel across gates that touch it only as a CX target.
///
/// The output state from `|0...0>` is unchanged.
pub fn simplify(circuit: &PhysicalCircuit) -> PhysicalCircuit {
    let mut gates = circuit.gates().to_vec();
    loop {
        let before = gates.len();
        gates = drop_dead_controls(&gates, circuit.n_qubits());
        gates = cancel_pairs(&gates);
        if gates.len() == before {
            break;
        }
    }
    PhysicalCircuit { n_qubits: circuit.n_qubits(), gates }
}

fn drop_dead_controls(gates: &[PhysicalGate], n_qubits: usize) -> Vec<PhysicalGate> {
    // None once a qubit may be in superposition.
    let mut known: Vec<Option<bool>> = vec![Some(false); n_qubits];
    let mut out = Vec::with_capacity(gates.len());
    for g in gates {
        match *g {
            PhysicalGate::X { qubit } => known[qubit] = known[qubit].map(|b| !b),
            PhysicalGate::U3 { qubit, .. } => known[qubit] = None,
            PhysicalGate::Cx { control, target } => match known[control] {
                Some(false) => continue,
                Some(true) => known[target] = known[target].map(|b| !b),
                None => known[target] = None,
            },
        }
        out.push(*g);
    }
    out
}

fn cancel_pairs(gates: &[PhysicalGate]) -> Vec<PhysicalGate> {
    let mut removed = vec![false; gates.len()];
    for i in 0..gates.len() {
        if removed[i] {
            continue;
        }
        let partner = match gates[i] {
            PhysicalGate::X { qubit } => (i + 1..gates.len()).filter(|&j| !removed[j]).find_map(|j| match gates[j] {
                PhysicalGate::X { qubit: other } if other == qubit => Some(Some(j)),
                PhysicalGate::Cx { control, target } if target == qubit && control != qubit => None,
                g if g.touches(qubit) => Some(None),
                _ => None,
            }),
            PhysicalGate::Cx { control, target } => (i + 1..gates.len()).filter(|&j| !removed[j]).find_map(|j| {
                let g = gates[j];
                if g == gates[i] {
                    Some(Some(j))
                } else if g.touches(control) || g.touches(target) {
                    Some(None)
                } else {
                    None
                }
            }),
            PhysicalGate::U3 { .. } => None,
        };
        if let Some(Some(j)) = partner {
            removed[i] = true;
            removed[j] = true;
        }
    }
    gates
        .iter()
        .zip(removed)
        .filter_map(|(g, r)| (!r).then_some(*g))
        .collect()
}

/// Decomposes a 2x2 unitary as `exp(i alpha) U3(theta, phi, lambda)`;
/// returns `(theta, phi, lambda, alpha)`.
pub fn u3_from_matrix(m: &Matrix2) -> (f64, f64, f64, f64) {
    const EPS: f64 = 1e-14;
    let c = m[0][0].norm();
    let s = m[1][0].norm();
    let theta = 2.0 * s.atan2(c);
    if c > EPS {
        let alpha = m[0][0].arg();
        if s > EPS {
            let phi = m[1][0].arg() - alpha;
            let lambda = (-m[0][1]).arg() - alpha;
            (theta, phi, lambda, alpha)
        } else {
            (theta, 0.0, m[1][1].arg() - alpha, alpha)
        }
    } else {
        let alpha = m[1][0].arg();
        (theta, 0.0, (-m[0][1]).arg() - alpha, alpha)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statevec::{gates, simulate, C64};

    fn bell_lowered() -> PhysicalCircuit {
        let code = BitFlipCode::new(2, &[1]).unwrap();
        lower(&circuits::ghz_logical(2).unwrap(), &code).unwrap()
    }

    fn text(c: &PhysicalCircuit) -> Vec<String> {
        c.gates().iter().map(|g| g.to_string()).collect()
    }

    #[test]
    fn encoding_examples() {
        let c = BitFlipCode::new(2, &[1]).unwrap();
        assert_eq!(encoding_ops(&c, 0), vec![PhysicalGate::x(1)]);
        assert!(encoding_ops(&BitFlipCode::new(3, &[]).unwrap(), 0).is_empty());
        let c = BitFlipCode::new(3, &[0, 1, 2]).unwrap();
        assert_eq!(c.x(), 7);
        let circ = PhysicalCircuit::from_gates(3, encoding_ops(&c, 0)).unwrap();
        let s = simulate(&circ).unwrap();
        assert_eq!(s.probabilities().keys().next().unwrap().to_string(), "111");

        // Fig. 1 block: |00> becomes the logical-zero codeword "01".
        let c = BitFlipCode::new(2, &[1]).unwrap();
        let s = simulate(&PhysicalCircuit::from_gates(2, encoding_ops(&c, 0)).unwrap()).unwrap();
        assert_eq!(*s.probabilities().keys().next().unwrap(), c.codeword(false));
    }

    #[test]
    fn logical_u3_shapes() {
        let g = logical_u3(&BitFlipCode::trivial(), 0.1, 0.2, 0.3, 0);
        assert_eq!(g, vec![PhysicalGate::u3(0, 0.1, 0.2, 0.3)]);

        let g = logical_u3(&BitFlipCode::new(3, &[]).unwrap(), 0.1, 0.2, 0.3, 0);
        assert_eq!(g.iter().filter(|g| g.is_cx()).count(), 4);
        assert_eq!(
            g,
            vec![
                PhysicalGate::cx(0, 1),
                PhysicalGate::cx(0, 2),
                PhysicalGate::u3(0, 0.1, 0.2, 0.3),
                PhysicalGate::cx(0, 2),
                PhysicalGate::cx(0, 1),
            ]
        );

        let g = logical_u3(&BitFlipCode::new(2, &[1]).unwrap(), PI / 2.0, 0.0, PI, 0);
        assert_eq!(g, vec![PhysicalGate::cx(0, 1), PhysicalGate::u3(0, PI / 2.0, 0.0, PI), PhysicalGate::cx(0, 1)]);

        let g = logical_u3(&BitFlipCode::new(2, &[0]).unwrap(), 0.4, 0.5, 0.6, 2);
        assert_eq!(g[1], PhysicalGate::u3(2, 0.4, PI - 0.5, PI - 0.6));
    }

    #[test]
    fn x_conjugation_matches_matrix_product() {
        let (t, p, l) = (0.7, -1.3, 2.2);
        let x = gates::pauli_x();
        let lit = gates::mul(&x, &gates::mul(&gates::u3(t, p, l), &x));
        let (t2, p2, l2) = x_conjugated_angles(t, p, l);
        let remap = gates::u3(t2, p2, l2);
        let phase = C64::from_polar(1.0, p + l);
        for i in 0..2 {
            for j in 0..2 {
                assert!((lit[i][j] - phase * remap[i][j]).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn logical_cx_shapes() {
        let c = BitFlipCode::new(2, &[1]).unwrap();
        assert_eq!(
            logical_cx(&c, 0, 2).unwrap(),
            vec![PhysicalGate::x(3), PhysicalGate::cx(0, 2), PhysicalGate::cx(1, 3)]
        );
        assert_eq!(logical_cx(&BitFlipCode::trivial(), 0, 1).unwrap(), vec![PhysicalGate::cx(0, 1)]);
        for mask in 0..8u32 {
            let s: Vec<usize> = (0..3).filter(|i| mask >> i & 1 == 1).collect();
            let c = BitFlipCode::new(3, &s).unwrap();
            let g = logical_cx(&c, 0, 3).unwrap();
            assert_eq!(g.iter().filter(|g| g.is_cx()).count(), 3);
            assert_eq!(g.len(), 3 + s.len());
        }
        assert!(logical_cx(&c, 0, 1).is_err());
    }

    #[test]
    fn bell_lowering() {
        assert_eq!(
            text(&bell_lowered()),
            vec![
                "x q1",
                "x q3",
                "cx q0 q1",
                "u3 1.5707963267948966 0 3.141592653589793 q0",
                "cx q0 q1",
                "x q3",
                "cx q0 q2",
                "cx q1 q3",
            ]
        );
    }

    #[test]
    fn bell_simplification() {
        let simplified = simplify(&bell_lowered());
        assert_eq!(
            text(&simplified),
            vec!["x q1", "u3 1.5707963267948966 0 3.141592653589793 q0", "cx q0 q1", "cx q0 q2", "cx q1 q3"]
        );
        assert_eq!(bell_lowered().len() - simplified.len(), 3);
        let p = simulate(&simplified).unwrap().probabilities();
        let keys: Vec<String> = p.keys().map(|k| k.to_string()).collect();
        assert_eq!(keys, vec!["0101", "1010"]);
    }

    #[test]
    fn simplify_fixpoint_and_pairs() {
        let minimal = simplify(&bell_lowered());
        assert_eq!(simplify(&minimal), minimal);
        let xx = PhysicalCircuit::from_gates(1, vec![PhysicalGate::x(0), PhysicalGate::x(0)]).unwrap();
        assert!(simplify(&xx).is_empty());
        // X on a CX target commutes through it.
        let c = PhysicalCircuit::from_gates(
            2,
            vec![PhysicalGate::u3(0, 1.0, 0.0, 0.0), PhysicalGate::x(1), PhysicalGate::cx(0, 1), PhysicalGate::x(1)],
        )
        .unwrap();
        assert_eq!(simplify(&c).len(), 2);
        // but not through a CX control.
        let c = PhysicalCircuit::from_gates(
            2,
            vec![PhysicalGate::u3(1, 1.0, 0.0, 0.0), PhysicalGate::x(0), PhysicalGate::cx(0, 1), PhysicalGate::x(0)],
        )
        .unwrap();
        assert_eq!(simplify(&c), c);
    }

    #[test]
    fn lowering_with_unencoded_code_is_identity() {
        let lc: LogicalCircuit = "qubits 3\nh q0\nu3 0.1 0.2 0.3 q2\ncx q0 q1\ncx q2 q1".parse().unwrap();
        let pc = lower(&lc, &BitFlipCode::trivial()).unwrap();
        let expected: Vec<PhysicalGate> = lc
            .gates()
            .iter()
            .map(|g| match *g {
                LogicalGate::U3 { qubit, theta, phi, lambda } => PhysicalGate::u3(qubit, theta, phi, lambda),
                LogicalGate::Cx { control, target } => PhysicalGate::cx(control, target),
            })
            .collect();
        assert_eq!(pc.gates(), expected.as_slice());
    }

    #[test]
    fn lower_rejects_oversized_register() {
        let lc = circuits::ghz_logical(6).unwrap();
        let code = BitFlipCode::new(5, &[0]).unwrap();
        assert!(matches!(lower(&lc, &code), Err(NaedError::Capacity(_))));
    }

    #[test]
    fn boundaries_follow_logical_gates() {
        let code = BitFlipCode::new(2, &[1]).unwrap();
        let l = lower_annotated(&circuits::ghz_logical(2).unwrap(), &code).unwrap();
        assert_eq!(l.boundaries, vec![1, 4, 7]);
        let l = lower_annotated(&circuits::ghz_logical(2).unwrap(), &BitFlipCode::trivial()).unwrap();
        assert_eq!(l.boundaries, vec![-1, 0, 1]);
    }

    #[test]
    fn text_form_round_trips() {
        let c = bell_lowered();
        let back: PhysicalCircuit = c.to_string().parse().unwrap();
        assert_eq!(back, c);
        assert!("qubits 2\ncx q0 q0".parse::<PhysicalCircuit>().is_err());
    }

    #[test]
    fn u3_decomposition_recovers_matrix() {
        let samples = [
            gates::pauli_x(),
            gates::pauli_y(),
            gates::pauli_z(),
            gates::hadamard(),
            gates::u3(1.2, -0.4, 2.5),
            [[C64::new(0.0, 1.0), C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), C64::from_polar(1.0, 0.3)]],
        ];
        for m in samples {
            let (t, p, l, a) = u3_from_matrix(&m);
            let r = gates::u3(t, p, l);
            let phase = C64::from_polar(1.0, a);
            for i in 0..2 {
                for j in 0..2 {
                    assert!((m[i][j] - phase * r[i][j]).norm() < 1e-12, "{m:?}");
                }
            }
        }
    }
}
