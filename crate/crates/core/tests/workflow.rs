use bop2te::boundary::{interim_decision, Decision, InterimCounts, StopReason};
use bop2te::design::{merge_schedule, AlphaTargets, DesignSpec, Hypothesis};
use bop2te::oc::{brute_force_claim_probability, claim_probability, evaluate_design, theorem1_residual};
use bop2te::optimizer::{optimize_with, GridVariant, OptimizeOptions};
use bop2te::prob::OutcomeProbabilities;
use bop2te::sim::{estimate_oc, simulate_multidose, DoseOptimizationSpec, SimulationConfig};

fn scenario4() -> DesignSpec {
    DesignSpec::new(0.6, 0.3, 0.2, 0.4, AlphaTargets::new(0.025, 0.10, 0.10), merge_schedule(&[18, 36], &[9, 18, 36]))
}

#[test]
fn settings_to_decisions() {
    let spec = scenario4();
    let design = bop2te::optimizer::optimize(&spec).unwrap();
    assert_eq!(design.boundaries.efficacy_bounds(), vec![5, 14]);
    assert_eq!(design.boundaries.toxicity_bounds(), vec![4, 7, 11]);

    // stored OC agree with a fresh evaluation
    let oc = evaluate_design(&design.boundaries, &spec, spec.design_phi).unwrap();
    assert_eq!(oc, design.oc);
    assert!(theorem1_residual(&design.boundaries, &spec).unwrap().abs() < 1e-12);

    let decide = |n, x_e, x_t| {
        interim_decision(&spec, &design.boundaries, design.q.as_ref(), InterimCounts { n, x_e, x_t }).unwrap()
    };
    assert_eq!(decide(9, 0, 3).decision, Decision::Go);
    assert_eq!(decide(9, 0, 4).reasons, vec![StopReason::Toxicity]);
    assert_eq!(decide(18, 6, 5).decision, Decision::Go);
    assert_eq!(decide(18, 5, 5).reasons, vec![StopReason::Futility]);
    let last = decide(36, 15, 10);
    assert_eq!(last.decision, Decision::Go);
    assert!(last.final_look);
}

#[test]
fn compact_grid_is_smaller_and_no_more_powerful() {
    let spec = scenario4();
    let literal = optimize_with(&spec, &OptimizeOptions { grid: GridVariant::Literal }).unwrap();
    let compact = optimize_with(&spec, &OptimizeOptions { grid: GridVariant::Compact29 }).unwrap();
    assert_eq!(literal.candidates_evaluated, 32 * 32 * 21);
    assert_eq!(compact.candidates_evaluated, 29 * 29 * 21);
    assert!(compact.power() <= literal.power() + 1e-12);
}

#[test]
fn exact_recursion_matches_enumeration_with_correlation() {
    let spec =
        DesignSpec::new(0.6, 0.3, 0.2, 0.4, AlphaTargets::new(0.05, 0.2, 0.2), merge_schedule(&[4, 8], &[2, 4, 8]));
    let design = bop2te::optimizer::optimize(&spec).unwrap();
    for phi in [0.3, 1.0, 5.0] {
        for h in Hypothesis::ALL {
            let p = spec.hypothesis_outcome(h, phi).unwrap();
            let fast = claim_probability(&design.boundaries, &p).unwrap();
            let slow = brute_force_claim_probability(&design.boundaries, &p).unwrap();
            assert!((fast - slow).abs() < 1e-12, "{h:?} φ={phi}: {fast} vs {slow}");
        }
    }
}

#[test]
fn simulation_is_seed_deterministic() {
    let spec = scenario4();
    let design = bop2te::optimizer::optimize(&spec).unwrap();
    let truth = OutcomeProbabilities::with_odds_ratio(0.5, 0.3, 3.0).unwrap();
    let a = estimate_oc(&design.boundaries, &truth, &SimulationConfig::new(1_000, 5).unwrap()).unwrap();
    let b = estimate_oc(&design.boundaries, &truth, &SimulationConfig::new(1_000, 5).unwrap()).unwrap();
    let c = estimate_oc(&design.boundaries, &truth, &SimulationConfig::new(1_000, 6).unwrap()).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);

    let per_arm = DesignSpec::new(
        0.56,
        0.24,
        0.18,
        0.42,
        AlphaTargets::new(0.025, 0.10, 0.10),
        merge_schedule(&[12, 24], &[12, 24]),
    );
    let dspec = DoseOptimizationSpec::new(vec!["1".into(), "2".into(), "3".into()], per_arm);
    let truth: Vec<_> = [(0.2, 0.1), (0.5, 0.15), (0.6, 0.45)]
        .iter()
        .map(|&(e, t)| OutcomeProbabilities::independent(e, t).unwrap())
        .collect();
    let cfg = SimulationConfig::new(500, 3).unwrap();
    let r = simulate_multidose(&dspec, &truth, &cfg).unwrap();
    assert_eq!(r, simulate_multidose(&dspec, &truth, &cfg).unwrap());
    // the toxic top dose is rarely chosen; the middle dose is the usual pick
    assert!(r.arms[1].selection_pct > r.arms[2].selection_pct);
    assert!(r.arms.iter().all(|a| a.average_n <= 24.0));
}
