use std::path::PathBuf;

use filtrate::{
    build_dilation, build_povm, parse_problem, run_simulation, solve, validate_povm,
    verify_dilation, Regime,
};

fn load(name: &str) -> filtrate::FilteringProblem {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name);
    parse_problem(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn sample_files_run_end_to_end() {
    for name in ["three_state.json", "qubit_pair.json"] {
        let problem = load(name);
        let sol = solve(&problem).unwrap();
        let povm = build_povm(&problem, &sol).unwrap();
        assert!(validate_povm(&povm, &problem, &sol).passed, "{name}");
        let dil = build_dilation(&problem, &sol).unwrap();
        let report = verify_dilation(&dil, &problem, &povm);
        assert!(report.passed, "{name}: {:?}", report.violations);
        let sim = run_simulation(&problem, &povm, 200_000, 9).unwrap();
        assert_eq!(sim.conclusive_errors, 0);
        assert!(
            (sim.empirical_q - sol.q_opt).abs() < 5.0 * sim.standard_error,
            "{name}"
        );
    }
}

#[test]
fn qubit_pair_sits_at_the_symmetric_optimum() {
    // Two states with |⟨ψ₁|ψ₂⟩| = 0.6 at equal priors: the optimum is the overlap itself.
    let sol = solve(&load("qubit_pair.json")).unwrap();
    assert_eq!(sol.regime, Regime::Povm);
    assert!((sol.q_opt - 0.6).abs() < 1e-12);
    assert!((sol.q_alpha - 0.6).abs() < 1e-12);
}

#[test]
fn amplitude_spellings_are_equivalent() {
    let long =
        parse_problem(r#"{"states": [[[1,0],[0,0]], [[0.6,0],[0.8,0]]], "priors": [0.3, 0.7]}"#)
            .unwrap();
    let short =
        parse_problem(r#"{"states": [[1, [0]], [[0.6], 0.8]], "priors": [0.3, 0.7]}"#).unwrap();
    assert_eq!(long, short);
}
