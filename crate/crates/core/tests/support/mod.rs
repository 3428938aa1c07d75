#![allow(dead_code)]

use std::path::Path;

use perspective_cea::config::ModelSpec;
use perspective_cea::markov::Components;
use perspective_cea::pipeline::DEMO_CONFIG;
use perspective_cea::psa::{PsaBundle, SubgroupInfo};

pub fn demo_spec() -> ModelSpec {
    ModelSpec::from_yaml_validated(DEMO_CONFIG, "demo_discordance.yaml").expect("demo config is valid")
}

pub fn demo_with_wtp(wtp: f64) -> ModelSpec {
    let mut spec = demo_spec();
    spec.wtp_threshold = wtp;
    spec
}

/// One non-absorbing state costing `cost` per cycle, cohort stays put;
/// two identical strategies.
pub fn single_state_spec(cost: f64, rate: f64, horizon: usize) -> ModelSpec {
    let yaml = format!(
        "states:
  - name: Alive
    cost_direct_medical: {cost}
    utility: 1
strategies:
  - name: Only
    is_comparator: true
    transition_matrix:
      Alive: [1.0]
  - name: Same
    transition_matrix:
      Alive: [1.0]
initial_distribution: [1]
horizon_cycles: {horizon}
discount:
  costs: {rate}
  effects: {rate}
wtp_threshold: 20000
"
    );
    ModelSpec::from_yaml_str(&yaml, "single-state").expect("single-state spec parses")
}

fn one_group() -> Vec<SubgroupInfo> {
    vec![SubgroupInfo {
        name: "all".into(),
        population_share: 1.0,
        baseline_health: 1.0,
    }]
}

/// Two-strategy bundle in which the intervention's NMB over the comparator
/// is `increments[i]` at any threshold (it saves that much and gains no
/// QALYs).
pub fn increment_bundle(names: &[&str], samples: Vec<Vec<f64>>, increments: &[f64]) -> PsaBundle {
    let outcomes = increments
        .iter()
        .map(|d| {
            vec![
                vec![Components::default()],
                vec![Components {
                    direct_medical: -d,
                    ..Components::default()
                }],
            ]
        })
        .collect();
    PsaBundle::from_parts(
        vec!["Comparator".into(), "New".into()],
        0,
        one_group(),
        names.iter().map(|s| s.to_string()).collect(),
        samples,
        outcomes,
    )
    .expect("well-formed synthetic bundle")
}

/// Every file under `dir`, relative path and bytes, sorted by path.
pub fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).expect("readable dir") {
            let path = entry.expect("dir entry").path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&path).expect("readable file")));
            }
        }
    }
    out.sort();
    out
}

/// `results.json` text with the generation timestamp blanked out.
pub fn without_timestamp(text: &str) -> String {
    let mut v: serde_json::Value = serde_json::from_str(text).expect("valid JSON");
    v["manifest"]["generated_at"] = serde_json::Value::Null;
    serde_json::to_string_pretty(&v).unwrap()
}
