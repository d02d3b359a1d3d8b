use naed_core::analysis::{metrics, tally, tally_counts};
use naed_core::circuits::{build_ghz, build_ghz_with, ghz_code, ideal_pdf, ideal_pdf_with};
use naed_core::code::BitFlipCode;
use naed_core::noise::{expected_counts, simulate_noisy, StochasticModel};
use naed_core::statevec::simulate;

#[test]
fn grid_matches_ideal_distribution() {
    for n in 2..=5 {
        for q in 1..=4 {
            let circuit = build_ghz(n, q).unwrap();
            let probs = simulate(&circuit).unwrap().probabilities();
            let ideal = ideal_pdf(n, q).unwrap();
            assert_eq!(probs.len(), 2, "({n},{q})");
            for (k, p) in &ideal {
                assert!((probs[k] - p).abs() < 1e-12, "({n},{q}) {k}");
            }
        }
    }
}

#[test]
fn every_code_gives_a_clean_ghz() {
    for q in 2..=4 {
        for mask in 0u32..1 << q {
            let set: Vec<usize> = (0..q).filter(|i| mask >> i & 1 == 1).collect();
            let code = BitFlipCode::new(q, &set).unwrap();
            let probs = simulate(&build_ghz_with(3, &code).unwrap()).unwrap().probabilities();
            assert_eq!(probs.keys().collect::<Vec<_>>(), ideal_pdf_with(3, &code).unwrap().keys().collect::<Vec<_>>());
        }
    }
}

#[test]
fn expected_counts_apportion_exactly() {
    let c = build_ghz(3, 2).unwrap();
    for shots in [1, 2, 7, 8192] {
        let counts = expected_counts(&c, shots).unwrap();
        assert_eq!(counts.iter().map(|c| c.1).sum::<u64>(), shots as u64);
        assert!(counts.iter().all(|&(_, k)| k >= (shots as u64) / 2));
    }
    let t = tally_counts(expected_counts(&c, 8192).unwrap(), &ghz_code(2).unwrap(), 3).unwrap();
    assert_eq!((t.r0, t.r1, t.ra, t.rb), (4096, 4096, 0, 0));
    assert!(expected_counts(&c, 0).is_err());
}

#[test]
fn sampled_noiseless_shots_are_all_kept() {
    for (n, q) in [(2, 2), (4, 3), (5, 4)] {
        let c = build_ghz(n, q).unwrap();
        let shots = simulate_noisy(&c, &StochasticModel::noiseless(), 4096, 3).unwrap();
        let t = tally(&shots, &ghz_code(q).unwrap(), n).unwrap();
        assert_eq!((t.ra, t.rb), (0, 0));
        let m = metrics(&t).unwrap();
        assert_eq!(m.p_kept, 100.0);
        assert_eq!(m.mu_full, m.mu_naed.unwrap());
        // Binomial spread of r0 around T/2 at 5 sigma.
        assert!((t.r0 as f64 - 2048.0).abs() < 5.0 * 32.0);
    }
}
