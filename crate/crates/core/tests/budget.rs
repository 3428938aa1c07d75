mod support;

use approx::assert_relative_eq;
use perspective_cea::bia::{budget_impact, budget_impact_from_increments, cost_of_illness};
use perspective_cea::cea::Perspective;
use perspective_cea::config::Uptake;
use perspective_cea::markov::run_model;
use perspective_cea::Error;

/// Health-system cost in year `t` for a strategy, rebuilt from the
/// subgroup traces and state costs.
fn payer_cost_in_cycle(spec: &perspective_cea::config::ModelSpec, strategy: usize, t: usize) -> f64 {
    let run = run_model(spec).unwrap();
    let mut total = 0.0;
    for g in &run.subgroups {
        let occ = g.strategies[strategy].trace.at(t);
        let flow: f64 = occ.iter().zip(&spec.states).map(|(p, s)| p * s.cost_direct_medical).sum();
        total += g.share * flow;
    }
    if t == 0 {
        total += spec.strategies[strategy].one_time_cost;
    }
    total
}

#[test]
fn demo_budget_impact_follows_traces() {
    let spec = support::demo_spec();
    let bia = spec.bia.clone().unwrap();
    let table = budget_impact(&spec, &bia, Perspective::HealthSystem).unwrap();
    assert_eq!(table.rows.len(), 5);
    let mut cumulative = 0.0;
    for (k, row) in table.rows.iter().enumerate() {
        let delta = payer_cost_in_cycle(&spec, 1, k) - payer_cost_in_cycle(&spec, 0, k);
        let want = delta * 0.5 * 10_000.0;
        assert_relative_eq!(row.bi_year, want, max_relative = 1e-9);
        cumulative += want;
        assert_relative_eq!(row.bi_cumulative, cumulative, max_relative = 1e-9);
    }
    // the up-front cost dominates year one
    assert!(table.rows[0].bi_year > 100_000_000.0);
}

#[test]
fn budget_impact_is_linear_in_population() {
    let spec = support::demo_spec();
    let mut bia = spec.bia.clone().unwrap();
    let base = budget_impact(&spec, &bia, Perspective::HealthSystem).unwrap().total;
    for k in [0.5, 3.0, 7.0] {
        bia.eligible_population = 10_000.0 * k;
        let scaled = budget_impact(&spec, &bia, Perspective::HealthSystem).unwrap().total;
        assert_relative_eq!(scaled, k * base, max_relative = 1e-12);
    }
}

#[test]
fn discounting_divides_by_year_factor() {
    let t = budget_impact_from_increments(&[100.0; 3], &Uptake::Flat(1.0), 10.0, Some(0.05), Perspective::Societal)
        .unwrap();
    for (k, row) in t.rows.iter().enumerate() {
        assert_relative_eq!(row.bi_year, 1000.0 / 1.05f64.powi(k as i32 + 1), max_relative = 1e-12);
    }
}

#[test]
fn uptake_schedule_is_applied_per_year() {
    let t = budget_impact_from_increments(
        &[100.0, 100.0, 100.0],
        &Uptake::Schedule(vec![0.1, 0.3, 0.6]),
        1000.0,
        None,
        Perspective::HealthSystem,
    )
    .unwrap();
    let years: Vec<f64> = t.rows.iter().map(|r| r.bi_year).collect();
    assert_eq!(years, vec![10_000.0, 30_000.0, 60_000.0]);
    assert!(budget_impact_from_increments(&[1.0], &Uptake::Schedule(vec![0.1, 0.2]), 1.0, None, Perspective::HealthSystem)
        .is_err());
}

#[test]
fn horizon_longer_than_model_is_rejected() {
    let mut spec = support::demo_spec();
    spec.horizon_cycles = 3;
    let bia = spec.bia.clone().unwrap();
    assert!(matches!(
        budget_impact(&spec, &bia, Perspective::HealthSystem),
        Err(Error::BiaHorizon { years: 5, .. })
    ));
}

#[test]
fn half_year_cycles_are_grouped_into_years() {
    let mut spec = support::demo_spec();
    spec.cycle_length_years = 0.5;
    spec.horizon_cycles = 40;
    let bia = spec.bia.clone().unwrap();
    let table = budget_impact(&spec, &bia, Perspective::HealthSystem).unwrap();
    let delta = |k: usize| payer_cost_in_cycle(&spec, 1, k) - payer_cost_in_cycle(&spec, 0, k);
    // per-cycle flows are scaled by the cycle length except the one-off cost
    let year_two = 0.5 * (delta(2) + delta(3));
    assert_relative_eq!(table.rows[1].incremental_cost_per_person, year_two, max_relative = 1e-9);
}

#[test]
fn cost_of_illness_in_steady_state() {
    let spec = support::single_state_spec(50.0, 0.03, 10);
    let coi = cost_of_illness(&spec).unwrap();
    assert_eq!(coi.strategy, "Only");
    assert_relative_eq!(coi.row("direct_medical").unwrap().per_capita_annual, 50.0, epsilon = 1e-12);
    assert_relative_eq!(coi.row("societal").unwrap().per_capita_annual, 50.0, epsilon = 1e-12);
    assert_relative_eq!(coi.row("societal").unwrap().per_capita_cumulative, 500.0, epsilon = 1e-9);

    let mut half = support::single_state_spec(50.0, 0.03, 20);
    half.cycle_length_years = 0.5;
    let coi = cost_of_illness(&half).unwrap();
    assert_relative_eq!(coi.row("societal").unwrap().per_capita_annual, 50.0, epsilon = 1e-12);
}

#[test]
fn cost_of_illness_scales_with_eligible_population() {
    let spec = support::demo_spec();
    let coi = cost_of_illness(&spec).unwrap();
    assert_eq!(coi.population, Some(10_000.0));
    for r in &coi.rows {
        assert_relative_eq!(r.population_annual, 10_000.0 * r.per_capita_annual, max_relative = 1e-12);
    }
    let parts: f64 = coi.rows.iter().filter(|r| r.component != "societal").map(|r| r.cumulative).sum();
    assert_relative_eq!(coi.row("societal").unwrap().cumulative, parts, max_relative = 1e-12);
}
