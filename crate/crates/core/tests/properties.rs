mod support;

use perspective_cea::cea::{choose, Perspective};
use perspective_cea::config::{ModelSpec, ReferenceHealth};
use perspective_cea::dcea::{atkinson_weights, equity_weighted_nmb, unweighted_nmb, SubgroupIncrement};
use perspective_cea::markov::{run_cohort, run_strategy, TransitionMatrix};
use perspective_cea::pipeline::DEMO_CONFIG;
use perspective_cea::psa::SubgroupInfo;
use proptest::prelude::*;

/// Row-stochastic matrix with the last state absorbing, plus an initial
/// distribution and horizon.
fn markov_case() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>, usize)> {
    (2usize..=7).prop_flat_map(|n| {
        let row = prop::collection::vec(0.0f64..1.0, n);
        (
            prop::collection::vec(row.clone(), n - 1),
            row,
            1usize..=50,
        )
            .prop_map(move |(rows, init, t)| {
                let normalize = |r: Vec<f64>| {
                    let s: f64 = r.iter().sum();
                    if s == 0.0 {
                        let mut e = vec![0.0; r.len()];
                        e[0] = 1.0;
                        e
                    } else {
                        r.iter().map(|v| v / s).collect()
                    }
                };
                let mut m: Vec<Vec<f64>> = rows.into_iter().map(normalize).collect();
                let mut last = vec![0.0; n];
                last[n - 1] = 1.0;
                m.push(last);
                (m, normalize(init), t)
            })
    })
}

fn increments() -> impl Strategy<Value = Vec<SubgroupIncrement>> {
    prop::collection::vec((0.05f64..1.0, -2.0f64..2.0, -50_000.0f64..50_000.0), 1..6).prop_map(|gs| {
        let total: f64 = gs.iter().map(|g| g.0).sum();
        gs.into_iter()
            .enumerate()
            .map(|(i, (share, dq, dc))| SubgroupIncrement {
                name: format!("g{i}"),
                population_share: share / total,
                delta_qalys: dq,
                delta_cost: dc,
            })
            .collect()
    })
}

fn infos(incs: &[SubgroupIncrement], health: &[f64]) -> Vec<SubgroupInfo> {
    incs.iter()
        .zip(health.iter().cycle())
        .map(|(g, h)| SubgroupInfo {
            name: g.name.clone(),
            population_share: g.population_share,
            baseline_health: *h,
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn traces_stay_normalized_and_absorbing_mass_grows((m, init, t) in markov_case()) {
        let n = m.len();
        let matrix = TransitionMatrix::new(m).unwrap();
        let trace = run_cohort(&matrix, &init, t).unwrap();
        for k in 0..=t {
            let sum: f64 = trace.at(k).iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12, "cycle {k} sums to {sum}");
            prop_assert!(trace.at(k).iter().all(|p| *p >= 0.0));
            if k > 0 {
                prop_assert!(trace.at(k)[n - 1] >= trace.at(k - 1)[n - 1]);
            }
        }
    }
}

proptest! {
    #[test]
    fn equity_nmb_is_affine_in_threshold(
        incs in increments(),
        health in prop::collection::vec(0.3f64..1.0, 1..6),
        eps in 0.0f64..5.0,
        a in 0.0f64..100_000.0,
        b in 0.0f64..100_000.0,
    ) {
        let w = atkinson_weights(&infos(&incs, &health), eps, ReferenceHealth::PopulationMean).unwrap();
        let f = |l: f64| equity_weighted_nmb(&incs, &w, l).unwrap();
        let mid = f(0.5 * (a + b));
        let scale = f(a).abs() + f(b).abs() + 1.0;
        prop_assert!((0.5 * (f(a) + f(b)) - mid).abs() <= 1e-9 * scale);
    }

    #[test]
    fn equity_nmb_scales_with_increments(
        incs in increments(),
        health in prop::collection::vec(0.3f64..1.0, 1..6),
        eps in 0.0f64..5.0,
        k in 0.1f64..10.0,
    ) {
        let w = atkinson_weights(&infos(&incs, &health), eps, ReferenceHealth::PopulationMean).unwrap();
        let scaled: Vec<SubgroupIncrement> = incs
            .iter()
            .map(|g| SubgroupIncrement { delta_qalys: k * g.delta_qalys, delta_cost: k * g.delta_cost, ..g.clone() })
            .collect();
        let base = equity_weighted_nmb(&incs, &w, 20_000.0).unwrap();
        let got = equity_weighted_nmb(&scaled, &w, 20_000.0).unwrap();
        prop_assert!((got - k * base).abs() <= 1e-9 * (k * base.abs() + 1.0));
    }

    #[test]
    fn zero_aversion_is_exactly_unweighted(incs in increments(), health in prop::collection::vec(0.3f64..1.0, 1..6), wtp in 0.0f64..100_000.0) {
        let w = atkinson_weights(&infos(&incs, &health), 0.0, ReferenceHealth::PopulationMean).unwrap();
        prop_assert_eq!(equity_weighted_nmb(&incs, &w, wtp).unwrap().to_bits(), unweighted_nmb(&incs, wtp).to_bits());
    }

    #[test]
    fn weights_fall_with_health_and_spread_with_aversion(
        h1 in 0.1f64..1.0,
        h2 in 0.1f64..1.0,
        e1 in 0.0f64..5.0,
        e2 in 0.0f64..5.0,
    ) {
        let g = |h: f64, name: &str| SubgroupInfo { name: name.into(), population_share: 0.5, baseline_health: h };
        let groups = [g(h1, "a"), g(h2, "b")];
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let wl = atkinson_weights(&groups, lo, ReferenceHealth::Value(1.0)).unwrap();
        let wh = atkinson_weights(&groups, hi, ReferenceHealth::Value(1.0)).unwrap();
        let (a, b) = (wh.get("a").unwrap(), wh.get("b").unwrap());
        if h1 < h2 {
            prop_assert!(a >= b);
        } else {
            prop_assert!(a <= b);
        }
        // every subgroup below the reference gains weight as aversion rises
        for (name, h) in [("a", h1), ("b", h2)] {
            prop_assert!(h >= 1.0 || wh.get(name).unwrap() >= wl.get(name).unwrap());
        }
    }

    #[test]
    fn higher_discount_rate_never_raises_present_value(
        cost in 0.0f64..10_000.0,
        r1 in 0.0f64..0.2,
        r2 in 0.0f64..0.2,
        t in 1usize..40,
    ) {
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        let pv = |r: f64| run_strategy(&support::single_state_spec(cost, r, t), "Only").unwrap().1;
        let (a, b) = (pv(lo), pv(hi));
        prop_assert!(b.cost_direct_medical() <= a.cost_direct_medical() + 1e-9);
        prop_assert!(b.qalys() <= a.qalys() + 1e-12);
        prop_assert!(a.cost_direct_medical() <= cost * t as f64 + 1e-9);
    }

    #[test]
    fn yaml_round_trip(wtp in 0.0f64..1e6, eps in 0.0f64..10.0, horizon in 5usize..60, seed in any::<u64>(), share in 0.05f64..0.95) {
        let mut spec = support::demo_spec();
        spec.wtp_threshold = wtp;
        spec.inequality_aversion = eps;
        spec.horizon_cycles = horizon;
        spec.psa.seed = seed;
        spec.subgroups[0].population_share = share;
        spec.subgroups[1].population_share = 1.0 - share;
        let back = ModelSpec::from_yaml_str(&spec.to_yaml(), "round-trip").unwrap();
        prop_assert_eq!(&back, &spec);
        prop_assert_eq!(back.digest(), spec.digest());
    }

    #[test]
    fn every_injected_error_is_reported(mask in 1u8..32) {
        let faults: [(&str, &str); 5] = [
            ("wtp_threshold: 20000", "wtp_threshold: -1"),
            ("inequality_aversion: 0.5", "inequality_aversion: -0.5"),
            ("horizon_cycles: 20", "horizon_cycles: 0"),
            ("    utility: 0.9\n", "    utility: 1.5\n"),
            ("  iterations: 1000", "  iterations: 0"),
        ];
        let mut text = DEMO_CONFIG.to_string();
        let mut injected = 0;
        for (k, (from, to)) in faults.iter().enumerate() {
            if mask & (1 << k) != 0 {
                text = text.replacen(from, to, 1);
                injected += 1;
            }
        }
        let spec = ModelSpec::from_yaml_str(&text, "faulty").unwrap();
        prop_assert_eq!(spec.validate().error_count(), injected);
    }

    #[test]
    fn ties_go_to_the_comparator(base in -1e6f64..1e6, others in prop::collection::vec(-1e6f64..1e6, 1..5), comparator_pos in 0usize..5) {
        let mut nmb = others.clone();
        let c = comparator_pos % (nmb.len() + 1);
        nmb.insert(c, base);
        let chosen = choose(&nmb, c);
        let best = nmb.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(nmb[chosen] >= best - 1e-9);
        if (best - base).abs() < 1e-9 {
            prop_assert_eq!(chosen, c);
        }
    }
}

#[test]
fn perspective_costs_nest() {
    let spec = support::demo_spec();
    let (_, l) = run_strategy(&spec, "Intervention").unwrap();
    assert!(l.cost(Perspective::Societal) >= l.cost(Perspective::HealthSystem));
}
