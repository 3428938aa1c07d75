mod support;

use perspective_cea::config::{load_model_spec, ModelSpec, ParamValue, ParameterPath, Severity};
use perspective_cea::pipeline::{DEMO_CONFIG, REFERENCE_CONFIG};
use perspective_cea::Error;

fn validation_messages(text: &str) -> Vec<String> {
    match ModelSpec::from_yaml_validated(text, "test.yaml") {
        Err(Error::Validation(report)) => report.errors().map(|d| d.to_string()).collect(),
        other => panic!("expected a validation error, got {other:?}"),
    }
}

#[test]
fn bundled_configs_validate() {
    for (name, text) in [("reference", REFERENCE_CONFIG), ("demo", DEMO_CONFIG)] {
        let spec = ModelSpec::from_yaml_validated(text, name).unwrap();
        assert!(spec.comparator_index().is_some(), "{name}");
    }
}

#[test]
fn yaml_round_trip_preserves_spec_and_digest() {
    let spec = support::demo_spec();
    let again = ModelSpec::from_yaml_str(&spec.to_yaml(), "round-trip").unwrap();
    assert_eq!(spec, again);
    assert_eq!(spec.digest(), again.digest());
}

#[test]
fn digest_changes_with_content() {
    let spec = support::demo_spec();
    let mut other = spec.clone();
    other.wtp_threshold += 1.0;
    assert_ne!(spec.digest(), other.digest());
    assert_eq!(spec.digest().len(), 64);
}

#[test]
fn row_sum_error_names_the_row() {
    let text = DEMO_CONFIG.replace("Healthy: [0.88, 0.10, 0.02]", "Healthy: [0.88, 0.05, 0.02]");
    let msgs = validation_messages(&text);
    assert!(
        msgs.iter().any(|m| m.contains("strategies.StandardCare.transition_matrix.Healthy") && m.contains("row sums to 0.95")),
        "{msgs:?}"
    );
}

#[test]
fn negative_aversion_is_rejected() {
    let text = DEMO_CONFIG.replace("inequality_aversion: 0.5", "inequality_aversion: -1");
    let msgs = validation_messages(&text);
    assert!(msgs.iter().any(|m| m.contains("inequality_aversion must be ≥ 0")), "{msgs:?}");
}

#[test]
fn all_errors_are_reported_together() {
    let text = DEMO_CONFIG
        .replace("inequality_aversion: 0.5", "inequality_aversion: -1")
        .replace("wtp_threshold: 20000", "wtp_threshold: -5")
        .replace("utility: 0.9", "utility: 1.4");
    let msgs = validation_messages(&text);
    assert!(msgs.len() >= 3, "{msgs:?}");
}

#[test]
fn shares_must_sum_to_one() {
    let text = DEMO_CONFIG.replace("population_share: 0.4", "population_share: 0.3");
    let msgs = validation_messages(&text);
    assert!(msgs.iter().any(|m| m.contains("population shares sum to 0.9")), "{msgs:?}");
}

#[test]
fn comparator_must_be_unique() {
    let text = DEMO_CONFIG.replace("  - name: Intervention\n", "  - name: Intervention\n    is_comparator: true\n");
    let msgs = validation_messages(&text);
    assert!(msgs.iter().any(|m| m.contains("exactly one strategy")), "{msgs:?}");
}

#[test]
fn unknown_keys_are_parse_errors() {
    let text = DEMO_CONFIG.replace("horizon_cycles: 20", "horizon_cycles: 20\nhorizon_years: 20");
    match ModelSpec::from_yaml_str(&text, "typo.yaml") {
        Err(Error::Parse { path, message }) => {
            assert_eq!(path, "typo.yaml");
            assert!(message.contains("horizon_years"), "{message}");
        }
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn unresolved_override_path_is_reported() {
    let text = DEMO_CONFIG.replace(
        "strategies.Intervention.transition_matrix.Healthy:",
        "strategies.Intervention.transition_matrix.Unwell:",
    );
    let msgs = validation_messages(&text);
    assert!(msgs.iter().any(|m| m.contains("Unwell")), "{msgs:?}");
}

#[test]
fn absorbing_values_without_override_are_errors_and_with_override_warnings() {
    let bad = DEMO_CONFIG.replace(
        "    cost_productivity: 0\n    cost_out_of_pocket: 0\n    is_absorbing: true",
        "    cost_productivity: 10\n    cost_out_of_pocket: 0\n    is_absorbing: true",
    );
    assert!(ModelSpec::from_yaml_validated(&bad, "bad").is_err());
    let ok = bad.replace("is_absorbing: true", "is_absorbing: true\n    absorbing_override: true");
    let spec = ModelSpec::from_yaml_validated(&ok, "ok").unwrap();
    let report = spec.validate();
    assert!(report.warnings().any(|d| d.severity == Severity::Warning && d.path.contains("Dead")));
}

#[test]
fn missing_file_error_names_path() {
    let err = load_model_spec("/nonexistent/model.yaml").unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
    assert!(err.to_string().contains("/nonexistent/model.yaml"));
}

#[test]
fn parameter_paths_read_and_write() {
    let mut spec = support::demo_spec();
    let p = ParameterPath::parse("states.Sick.cost_productivity", &spec).unwrap();
    assert_eq!(p.get(&spec).unwrap(), ParamValue::Scalar(15000.0));
    p.set(&mut spec, ParamValue::Scalar(1.0)).unwrap();
    assert_eq!(spec.states[1].cost_productivity, 1.0);
    assert!(p.set(&mut spec, ParamValue::Row(vec![1.0])).is_err());

    let row = ParameterPath::parse("strategies.Intervention.transition_matrix.Sick", &spec).unwrap();
    assert_eq!(row.get(&spec).unwrap().as_row().unwrap(), &[0.20, 0.72, 0.08]);
    assert!(row.set(&mut spec, ParamValue::Row(vec![1.0, 0.0])).is_err());

    for bad in ["states.Nope.utility", "states.Sick.colour", "strategies.X.one_time_cost", "discount"] {
        assert!(matches!(ParameterPath::parse(bad, &spec), Err(Error::UnresolvedPath(_))), "{bad}");
    }
}

#[test]
fn subgroup_overrides_apply_only_to_their_view() {
    let spec = support::demo_spec();
    let deprived = spec.resolve_subgroup(&spec.subgroups[1]).unwrap();
    let least = spec.resolve_subgroup(&spec.subgroups[0]).unwrap();
    let row = |s: &ModelSpec| s.strategies[0].transition_matrix["Healthy"].clone();
    assert_eq!(row(&deprived), vec![0.84, 0.14, 0.02]);
    assert_eq!(row(&least), vec![0.88, 0.10, 0.02]);
}

#[test]
fn missing_subgroups_mean_one_total_population() {
    let mut spec = support::demo_spec();
    spec.subgroups.clear();
    let groups = spec.effective_subgroups();
    assert_eq!(groups.len(), 1);
    assert_eq!(groups[0].population_share, 1.0);
}
