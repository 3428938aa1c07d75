mod support;

use approx::assert_relative_eq;
use perspective_cea::config::ModelSpec;
use perspective_cea::markov::{run_cohort, run_model, run_strategy, TransitionMatrix};

fn two_state(extra: &str) -> ModelSpec {
    let yaml = format!(
        "states:
  - name: Well
    utility: 0.8
    cost_direct_medical: 100
    cost_productivity: 50
    cost_out_of_pocket: 10
  - name: Dead
    is_absorbing: true
strategies:
  - name: A
    is_comparator: true
    transition_matrix:
      Well: [0.9, 0.1]
      Dead: [0, 1]
  - name: B
    one_time_cost: 500
    transition_matrix:
      Well: [0.95, 0.05]
      Dead: [0, 1]
initial_distribution: [1, 0]
horizon_cycles: 3
wtp_threshold: 20000
{extra}"
    );
    ModelSpec::from_yaml_validated(&yaml, "two-state").unwrap()
}

#[test]
fn trace_follows_hand_multiplication() {
    let m = TransitionMatrix::new(vec![vec![0.9, 0.1], vec![0.0, 1.0]]).unwrap();
    let trace = run_cohort(&m, &[1.0, 0.0], 2).unwrap();
    assert_eq!(trace.horizon(), 2);
    assert_relative_eq!(trace.at(1)[0], 0.9, epsilon = 1e-15);
    assert_relative_eq!(trace.at(2)[0], 0.81, epsilon = 1e-15);
    assert_relative_eq!(trace.at(2)[1], 0.19, epsilon = 1e-15);
}

#[test]
fn matrix_rejects_bad_rows() {
    assert!(TransitionMatrix::new(vec![vec![0.9, 0.05], vec![0.0, 1.0]]).is_err());
    assert!(TransitionMatrix::new(vec![vec![1.1, -0.1], vec![0.0, 1.0]]).is_err());
    assert!(TransitionMatrix::new(vec![vec![1.0], vec![0.0, 1.0]]).is_err());
}

#[test]
fn cohort_rejects_bad_initial_distribution() {
    let m = TransitionMatrix::identity(2);
    assert!(run_cohort(&m, &[0.5, 0.4], 3).is_err());
    assert!(run_cohort(&m, &[1.0], 3).is_err());
    assert!(run_cohort(&m, &[1.0, 0.0], 0).is_err());
}

#[test]
fn undiscounted_ledger_sums_occupancy_times_values() {
    let spec = two_state("discount:\n  costs: 0\n  effects: 0\n");
    let (_, ledger) = run_strategy(&spec, "A").unwrap();
    // Well occupancy at t = 0, 1, 2
    let occ = 1.0 + 0.9 + 0.81;
    assert_relative_eq!(ledger.qalys(), 0.8 * occ, epsilon = 1e-12);
    assert_relative_eq!(ledger.cost_direct_medical(), 100.0 * occ, epsilon = 1e-10);
    assert_relative_eq!(ledger.cost_productivity(), 50.0 * occ, epsilon = 1e-10);
    assert_relative_eq!(ledger.cost_out_of_pocket(), 10.0 * occ, epsilon = 1e-10);
    assert_eq!(ledger.discounted, ledger.undiscounted);
    assert_eq!(ledger.per_cycle.as_ref().map(Vec::len), Some(3));
}

#[test]
fn one_time_cost_lands_undiscounted_in_first_cycle() {
    let spec = two_state("");
    let (_, a) = run_strategy(&spec, "A").unwrap();
    let (_, b) = run_strategy(&spec, "B").unwrap();
    let per_cycle = b.per_cycle.as_ref().unwrap();
    assert_relative_eq!(per_cycle[0].direct_medical, 600.0, epsilon = 1e-12);
    assert!(b.cost_direct_medical() > a.cost_direct_medical() + 500.0 - 1e-9);
}

#[test]
fn discounting_uses_start_of_cycle_time() {
    let spec = support::single_state_spec(100.0, 0.05, 4);
    let (_, ledger) = run_strategy(&spec, "Only").unwrap();
    let want: f64 = (0..4).map(|t| 100.0 / 1.05f64.powi(t)).sum();
    assert_relative_eq!(ledger.cost_direct_medical(), want, epsilon = 1e-9);
    assert_relative_eq!(ledger.undiscounted.direct_medical, 400.0, epsilon = 1e-12);
}

#[test]
fn shorter_cycles_scale_flows_and_discount_exponent() {
    let mut spec = support::single_state_spec(100.0, 0.03, 4);
    spec.cycle_length_years = 0.5;
    let (_, ledger) = run_strategy(&spec, "Only").unwrap();
    let want: f64 = (0..4).map(|t| 50.0 * 1.03f64.powf(-0.5 * t as f64)).sum();
    assert_relative_eq!(ledger.cost_direct_medical(), want, epsilon = 1e-9);
}

#[test]
fn half_cycle_averages_adjacent_occupancy() {
    let spec = two_state("half_cycle: true\ndiscount:\n  costs: 0\n  effects: 0\n");
    let (_, ledger) = run_strategy(&spec, "A").unwrap();
    let occ = 0.5 * (1.0 + 0.9) + 0.5 * (0.9 + 0.81) + 0.5 * (0.81 + 0.729);
    assert_relative_eq!(ledger.qalys(), 0.8 * occ, epsilon = 1e-12);
}

#[test]
fn absorbing_state_values_need_override() {
    let yaml = "states:
  - name: Alive
    utility: 1
  - name: Dead
    is_absorbing: true
    cost_direct_medical: 1000
    utility: 0
strategies:
  - name: A
    is_comparator: true
    transition_matrix:
      Alive: [0, 1]
      Dead: [0, 1]
initial_distribution: [1, 0]
horizon_cycles: 3
discount:
  costs: 0
  effects: 0
wtp_threshold: 1
";
    let spec = ModelSpec::from_yaml_str(yaml, "absorbing").unwrap();
    let (_, plain) = run_strategy(&spec, "A").unwrap();
    assert_eq!(plain.cost_direct_medical(), 0.0);

    let overridden = ModelSpec::from_yaml_str(&yaml.replace("is_absorbing: true", "is_absorbing: true\n    absorbing_override: true"), "absorbing").unwrap();
    let (_, with) = run_strategy(&overridden, "A").unwrap();
    // Dead occupied at t = 1 and t = 2
    assert_relative_eq!(with.cost_direct_medical(), 2000.0, epsilon = 1e-12);
}

#[test]
fn friction_period_caps_productivity_of_absorbing_entrants() {
    let yaml = |method: &str| {
        format!(
            "states:
  - name: Working
    utility: 1
  - name: Gone
    is_absorbing: true
    absorbing_override: true
    cost_productivity: 1000
strategies:
  - name: A
    is_comparator: true
    transition_matrix:
      Working: [0.5, 0.5]
      Gone: [0, 1]
initial_distribution: [1, 0]
horizon_cycles: 4
discount:
  costs: 0
  effects: 0
wtp_threshold: 1
{method}"
        )
    };
    let human = ModelSpec::from_yaml_str(&yaml(""), "hc").unwrap();
    let friction = ModelSpec::from_yaml_str(
        &yaml("productivity_method: friction-cost\nfriction_period_years: 1\n"),
        "fc",
    )
    .unwrap();
    let (_, h) = run_strategy(&human, "A").unwrap();
    let (_, f) = run_strategy(&friction, "A").unwrap();
    // Gone occupancy 0, .5, .75, .875; entrants 0, .5, .25, .125
    assert_relative_eq!(h.cost_productivity(), 1000.0 * (0.5 + 0.75 + 0.875), epsilon = 1e-9);
    assert_relative_eq!(f.cost_productivity(), 1000.0 * (0.5 + 0.25 + 0.125), epsilon = 1e-9);
}

#[test]
fn population_ledger_is_share_weighted() {
    let spec = support::demo_spec();
    let run = run_model(&spec).unwrap();
    for strategy in &run.strategies {
        let pop = run.population_ledger(strategy).unwrap();
        let mut q = 0.0;
        let mut c = 0.0;
        for g in &run.subgroups {
            let s = g.strategies.iter().find(|s| &s.strategy == strategy).unwrap();
            q += g.share * s.ledger.qalys();
            c += g.share * s.ledger.cost_societal();
        }
        assert_relative_eq!(pop.qalys(), q, max_relative = 1e-12);
        assert_relative_eq!(pop.cost_societal(), c, max_relative = 1e-12);
    }
}
