"""Smoke test for the `naed` extension module.

Build first with `maturin develop -m crates/python/Cargo.toml` (or
`pip install --no-build-isolation ./crates/python`), then run this file.
"""

import json
import math

import naed


def close(a, b, tol=1e-12):
    return abs(a - b) <= tol


def main():
    code = naed.BitFlipCode(2, [1])
    assert code.codeword(False) == "01" and code.codeword(True) == "10"
    assert code.encode("10") == "1001"
    assert code.classify_shot(2, "1010") == "11"
    assert code.classify_shot(2, "1100") is None

    bell = naed.LogicalCircuit.parse("qubits 2\nh q0\ncx q0 q1\n")
    lowered = bell.lower(code)
    assert str(lowered).splitlines()[1:] == [
        "x q1",
        f"u3 {math.pi / 2!r} 0 {math.pi!r} q0",
        "cx q0 q1",
        "cx q0 q2",
        "cx q1 q3",
    ]
    probs = lowered.probabilities()
    assert set(probs) == {"0101", "1010"}
    amps = lowered.amplitudes()
    assert close(sum(abs(a) ** 2 for a in amps), 1.0)

    circuit = naed.build_ghz(3, 2)
    assert close(naed.similarity(circuit.probabilities(), naed.ideal_pdf(3, 2)), 100.0)

    shots = circuit.sample(2000, seed=4, p_gate=0.05)
    assert shots == circuit.sample(2000, seed=4, p_gate=0.05)
    tally = naed.Tally.from_shots(shots, naed.BitFlipCode.ghz(2), 3)
    assert tally.T == 2000 and tally.r0 + tally.r1 + tally.ra + tally.rb == 2000
    m = tally.metrics()
    assert 0 < m["p_kept"] < 100 and m["mu_naed"] >= m["mu_full"]

    worked = naed.Tally.from_counts(2, 3, 2, 1, 4).metrics()
    assert close(worked["mu_full"], 50.0) and close(worked["mu_naed"], 250 / 3)
    assert close(worked["p_kept"], 60.0)

    result = naed.run_sweep(n_list=[2, 3], q_list=[1, 2], shots=512, reps=2)
    assert all(r["mu_full"] == 100.0 for r in result.rows)
    assert result.aggregate(3, 2)["T"] == 1024
    header = result.to_csv().splitlines()[0].split(",")
    assert header == naed.CSV_COLUMNS

    noisy = naed.run_sweep(n_list=[2], q_list=[2], shots=256, reps=2, gamma=0.05, seed=1)
    try:
        import jsonschema
    except ImportError:
        jsonschema = None
    if jsonschema is not None:
        jsonschema.validate(json.loads(noisy.to_json()), json.loads(naed.SWEEP_SCHEMA))

    rows = naed.inject_study(2, 2, "X")
    assert rows and all(r["accepted"] == 0.0 for r in rows)
    phase = naed.inject_study(2, 2, "phase", theta=0.9, all_sites=True)
    assert max(r["rejection"] for r in phase) < 1e-12

    checks = naed.run_checks()
    assert checks and all(passed for *_, passed in checks)

    try:
        naed.LogicalCircuit.parse("qubits 2\nh q9\n")
    except naed.NaedError as e:
        assert "parse error at" in str(e)
    else:
        raise AssertionError("expected a parse error")

    print(f"naed smoke test ok ({len(checks)} oracle checks)")


if __name__ == "__main__":
    main()
