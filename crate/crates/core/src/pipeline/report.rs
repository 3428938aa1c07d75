use std::fmt::Write as _;

use super::ResultsBundle;
use crate::cea::{icer, IcerClass, IcerResult, Perspective};

/// Whole-currency amount with thousands separators: `-$8,696`, `$0`.
pub fn format_money(v: f64) -> String {
    let rounded = v.round();
    if rounded == 0.0 || !rounded.is_finite() {
        return if v.is_finite() { "$0".into() } else { v.to_string() };
    }
    let digits = format!("{}", rounded.abs() as u64);
    let mut grouped = String::new();
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            grouped.push(',');
        }
        grouped.push(ch);
    }
    if rounded < 0.0 {
        format!("-${grouped}")
    } else {
        format!("${grouped}")
    }
}

fn icer_cell(r: &IcerResult) -> String {
    match r.classification {
        IcerClass::Icer { value } => format_money(value),
        IcerClass::Dominant => match r.display_ratio() {
            Some(ratio) => format!("{} (dominant)", format_money(ratio)),
            None => "Dominant".into(),
        },
        IcerClass::Dominated => "Dominated".into(),
        IcerClass::ExtendedTie => "Equal effects".into(),
    }
}

fn verdict(accepts: bool) -> &'static str {
    if accepts {
        "Accept"
    } else {
        "Reject"
    }
}

/// Markdown summary of a run. Contains no timestamp, so it is as
/// reproducible as the numbers in it.
pub fn render_report(b: &ResultsBundle) -> String {
    let mut out = String::new();
    let m = &b.manifest;
    let d = &b.deterministic;
    let intervention = m
        .strategies
        .iter()
        .find(|s| **s != m.comparator)
        .cloned()
        .unwrap_or_default();
    let wtp = format_money(m.wtp);

    let _ = writeln!(out, "# Cost-effectiveness report\n");
    let _ = writeln!(
        out,
        "Produced by {} {} from configuration `{}` with seed {} and {} PSA iterations.\n",
        m.tool,
        m.tool_version,
        &m.spec_digest[..m.spec_digest.len().min(12)],
        m.master_seed,
        m.iterations
    );

    let _ = writeln!(out, "## Model summary\n");
    let _ = writeln!(out, "- Comparator: {}", m.comparator);
    let _ = writeln!(out, "- Intervention: {intervention}");
    let _ = writeln!(out, "- Willingness to pay: {wtp} per QALY");
    let _ = writeln!(out, "- Inequality aversion: {}", m.epsilon);
    let _ = writeln!(
        out,
        "- Perspectives reported: {}",
        m.perspectives.iter().map(|p| p.label()).collect::<Vec<_>>().join(", ")
    );
    let _ = writeln!(out, "\n| Subgroup | Population share | Baseline health |");
    let _ = writeln!(out, "|---|---:|---:|");
    for g in &m.subgroups {
        let _ = writeln!(out, "| {} | {} | {} |", g.name, g.population_share, g.baseline_health);
    }

    // both perspectives always appear here: the value of perspective is a
    // comparison between them
    let old = &d.population[&m.comparator];
    let new = &d.population[&intervention];
    let hs = icer(old, new, Perspective::HealthSystem);
    let soc = icer(old, new, Perspective::Societal);
    let nmb = |l: &crate::markov::OutcomeLedger, p| crate::cea::nmb(l, m.wtp, p);
    let accepts = |p| nmb(new, p) - nmb(old, p) >= crate::cea::TIE_TOLERANCE;
    let vop = format_money(d.deterministic_vop);

    let _ = writeln!(out, "\n## Deterministic results\n");
    let _ = writeln!(out, "| Intervention | Health System ICER | Societal ICER | VoP (Per Person) |");
    let _ = writeln!(out, "|---|---:|---:|---:|");
    let _ = writeln!(out, "| {intervention} | {} | {} | {vop} |", icer_cell(&hs), icer_cell(&soc));

    let _ = writeln!(out, "\n| Intervention | Health System Decision | Societal Decision | VoP (Per Person) |");
    let _ = writeln!(out, "|---|---|---|---:|");
    let _ = writeln!(
        out,
        "| {intervention} | {} | {} | {vop} |",
        verdict(accepts(Perspective::HealthSystem)),
        verdict(accepts(Perspective::Societal))
    );
    let _ = writeln!(out, "\n*Decisions use a willingness-to-pay threshold of {wtp} per QALY.*\n");

    let _ = writeln!(out, "| Perspective | Incremental cost | Incremental QALYs | Chosen strategy | Decision |");
    let _ = writeln!(out, "|---|---:|---:|---|---|");
    for r in &d.perspectives {
        let _ = writeln!(
            out,
            "| {} | {} | {:.4} | {} | {} |",
            r.perspective.label(),
            format_money(r.icer.delta_cost),
            r.icer.delta_effect,
            r.decision.chosen_strategy,
            r.decision.verdict()
        );
    }
    let _ = writeln!(out);
    if d.discordant {
        let _ = writeln!(
            out,
            "The perspectives disagree: the health system would {} {intervention} while society would \
             {} it. Following the health-system decision forgoes {vop} of societal net monetary \
             benefit per person.",
            verdict(accepts(Perspective::HealthSystem)).to_lowercase(),
            verdict(accepts(Perspective::Societal)).to_lowercase()
        );
    } else {
        let _ = writeln!(
            out,
            "Both perspectives reach the same decision, so the value of perspective is {vop}."
        );
    }

    let v = &b.voi;
    let _ = writeln!(out, "\n## Uncertainty\n");
    let _ = writeln!(out, "| Measure | Value |");
    let _ = writeln!(out, "|---|---:|");
    let _ = writeln!(out, "| Deterministic value of perspective | {} |", format_money(v.vop.deterministic_loss));
    let _ = writeln!(out, "| Expected value of perspective | {} |", format_money(v.vop.evop));
    let _ = writeln!(out, "| Probability the decisions differ | {:.3} |", v.vop.discordance_probability);
    for e in &v.evpi {
        let _ = writeln!(out, "| EVPI per person ({}) | {} |", e.perspective.label(), format_money(e.evpi_per_person));
        let _ = writeln!(out, "| Population EVPI ({}) | {} |", e.perspective.label(), format_money(e.population_evpi));
    }
    let dn = &b.psa.delta_nmb;
    let _ = writeln!(
        out,
        "\nSocietal minus health-system NMB per iteration: mean {}, 95% interval {} to {}.",
        format_money(dn.mean),
        format_money(dn.quantiles[0]),
        format_money(dn.quantiles[4])
    );

    if v.evpi.iter().any(|e| !e.evppi_by_parameter_set.is_empty()) {
        let _ = write!(out, "\n| Parameters |");
        for e in &v.evpi {
            let _ = write!(out, " EVPPI ({}) |", e.perspective.label());
        }
        let _ = write!(out, "\n|---|");
        for _ in &v.evpi {
            let _ = write!(out, "---:|");
        }
        let _ = writeln!(out);
        for name in v.evpi[0].evppi_by_parameter_set.keys() {
            let _ = write!(out, "| {name} |");
            for e in &v.evpi {
                let cell = e.evppi_by_parameter_set.get(name).map_or("n/a".into(), |x| format_money(*x));
                let _ = write!(out, " {cell} |");
            }
            let _ = writeln!(out);
        }
    }

    let _ = writeln!(out, "\n### Acceptability of {intervention}\n");
    let _ = write!(out, "| WTP |");
    for t in &b.psa.ceac {
        let _ = write!(out, " {} |", t.perspective.label());
    }
    let _ = write!(out, "\n|---:|");
    for _ in &b.psa.ceac {
        let _ = write!(out, "---:|");
    }
    let _ = writeln!(out);
    if let Some(first) = b.psa.ceac.first() {
        for (k, w) in first.wtp.iter().enumerate() {
            let _ = write!(out, "| {} |", format_money(*w));
            for t in &b.psa.ceac {
                let _ = write!(out, " {:.3} |", t.probability(k, &intervention).unwrap_or(0.0));
            }
            let _ = writeln!(out);
        }
    }

    let q = &b.dcea;
    let _ = writeln!(out, "\n## Equity\n");
    let _ = writeln!(out, "Reference health {:.4}; weights at aversion {}:\n", q.weights.reference_health, q.epsilon);
    let _ = writeln!(out, "| Subgroup | Weight |");
    let _ = writeln!(out, "|---|---:|");
    for (g, w) in &q.weights.weights {
        let _ = writeln!(out, "| {g} | {w:.6} |");
    }
    let _ = writeln!(out, "\n| Aversion | Perspective | Equity-weighted NMB | Unweighted NMB |");
    let _ = writeln!(out, "|---:|---|---:|---:|");
    for p in &q.nmb_eq {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} |",
            p.epsilon,
            p.perspective.label(),
            format_money(p.equity_weighted_nmb),
            format_money(p.unweighted_nmb)
        );
    }
    if let Some(plane) = &q.equity_plane {
        let _ = writeln!(
            out,
            "\nEquity impact plane ({}): mean net health benefit {:.4} QALYs, mean equity impact {:.6}, \
             {:.1}% of iterations improve both.",
            q.equity_plane_perspective.label(),
            plane.mean_net_health_benefit,
            plane.mean_equity_impact,
            100.0 * plane.win_win
        );
    }

    let s = &b.sensitivity;
    if !s.tornado.is_empty() || s.sobol.is_some() {
        let _ = writeln!(out, "\n## Sensitivity ({})\n", s.perspective.label());
    }
    if !s.tornado.is_empty() {
        let _ = writeln!(out, "| Parameter | Low | High | NMB at low | NMB at high |");
        let _ = writeln!(out, "|---|---:|---:|---:|---:|");
        for e in &s.tornado {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} |",
                e.parameter,
                e.low_value,
                e.high_value,
                format_money(e.outcome_at_low),
                format_money(e.outcome_at_high)
            );
        }
        let _ = writeln!(out);
    }
    if let Some(sobol) = &s.sobol {
        let _ = writeln!(out, "| Parameter | First order | Total order | Bootstrap SE |");
        let _ = writeln!(out, "|---|---:|---:|---:|");
        for i in &sobol.indices {
            let _ = writeln!(
                out,
                "| {} | {:.3} | {:.3} | {:.3} |",
                i.parameter,
                i.first_order,
                i.total_order,
                i.noise()
            );
        }
    }

    if let Some(bia) = &b.bia {
        let _ = writeln!(out, "\n## Budget impact ({})\n", bia.perspective.label());
        let _ = writeln!(out, "| Year | Incremental cost per person | Uptake | Budget impact | Cumulative |");
        let _ = writeln!(out, "|---:|---:|---:|---:|---:|");
        for r in &bia.rows {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} |",
                r.year,
                format_money(r.incremental_cost_per_person),
                r.uptake,
                format_money(r.bi_year),
                format_money(r.bi_cumulative)
            );
        }
    }

    let coi = &b.coi;
    let _ = writeln!(out, "\n## Cost of illness under {}\n", coi.strategy);
    let _ = writeln!(out, "| Component | Per person per year | Population per year | Cumulative |");
    let _ = writeln!(out, "|---|---:|---:|---:|");
    for r in &coi.rows {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} |",
            r.component,
            format_money(r.per_capita_annual),
            format_money(r.population_annual),
            format_money(r.cumulative)
        );
    }
    out
}
