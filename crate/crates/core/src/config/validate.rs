use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{
    fmt_num, Distribution, Domain, ModelSpec, ParameterPath, ProductivityMethod,
    ReferenceHealth, Uptake, STOCHASTIC_TOL,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    /// Dotted location in the configuration.
    pub path: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{tag}: [{}] {}", self.path, self.message)
    }
}

/// Every diagnostic found in one validation pass.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub diagnostics: Vec<Diagnostic>,
}

impl ValidationReport {
    pub fn errors(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics
            .iter()
            .filter(|d| d.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics
            .iter()
            .filter(|d| d.severity == Severity::Warning)
    }

    pub fn error_count(&self) -> usize {
        self.errors().count()
    }

    pub fn has_errors(&self) -> bool {
        self.errors().next().is_some()
    }

    fn error(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.diagnostics.push(Diagnostic {
            severity: Severity::Error,
            path: path.into(),
            message: message.into(),
        });
    }

    fn warning(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.diagnostics.push(Diagnostic {
            severity: Severity::Warning,
            path: path.into(),
            message: message.into(),
        });
    }

    pub(crate) fn prefixed(mut self, prefix: &str) -> Self {
        for d in &mut self.diagnostics {
            d.path = format!("{prefix}: {}", d.path);
        }
        self
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.diagnostics.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "  {d}")?;
        }
        Ok(())
    }
}

fn check_name(name: &str, path: &str, report: &mut ValidationReport) {
    if name.is_empty() || name.contains('.') || name.contains(',') || name.trim() != name {
        report.error(
            path,
            format!("name `{name}` must be non-empty without dots, commas or surrounding spaces"),
        );
    }
}

fn check_unique<'a>(names: impl Iterator<Item = &'a str>, what: &str, report: &mut ValidationReport) {
    let mut seen = HashSet::new();
    for n in names {
        if !seen.insert(n) {
            report.error(what, format!("duplicate name `{n}`"));
        }
    }
}

pub(crate) fn check_states(spec: &ModelSpec, report: &mut ValidationReport) {
    if spec.states.is_empty() {
        report.error("states", "at least one state is required");
    }
    check_unique(spec.states.iter().map(|s| s.name.as_str()), "states", report);
    for s in &spec.states {
        let p = format!("states.{}", s.name);
        check_name(&s.name, &p, report);
        if !(0.0..=1.0).contains(&s.utility) {
            report.error(
                format!("{p}.utility"),
                format!("utility must be in [0, 1], got {}", fmt_num(s.utility)),
            );
        }
        for (field, v) in [
            ("cost_direct_medical", s.cost_direct_medical),
            ("cost_productivity", s.cost_productivity),
            ("cost_out_of_pocket", s.cost_out_of_pocket),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                report.error(
                    format!("{p}.{field}"),
                    format!("{field} must be >= 0, got {}", fmt_num(v)),
                );
            }
        }
        if s.is_absorbing && s.has_nonzero_values() {
            if s.absorbing_override {
                report.warning(
                    &p,
                    "absorbing state carries nonzero utility or costs (absorbing_override set)",
                );
            } else {
                report.error(
                    &p,
                    "absorbing state must have zero utility and costs unless absorbing_override is set",
                );
            }
        }
    }
}

pub(crate) fn check_strategies(spec: &ModelSpec, report: &mut ValidationReport) {
    if spec.strategies.len() < 2 {
        report.error(
            "strategies",
            format!(
                "at least two strategies are required, got {}",
                spec.strategies.len()
            ),
        );
    }
    check_unique(
        spec.strategies.iter().map(|s| s.name.as_str()),
        "strategies",
        report,
    );
    let comparators = spec.strategies.iter().filter(|s| s.is_comparator).count();
    if comparators != 1 && !spec.strategies.is_empty() {
        report.error(
            "strategies",
            format!("exactly one strategy must have is_comparator: true, found {comparators}"),
        );
    }
    let n = spec.states.len();
    for strat in &spec.strategies {
        let p = format!("strategies.{}", strat.name);
        check_name(&strat.name, &p, report);
        if !(strat.one_time_cost >= 0.0 && strat.one_time_cost.is_finite()) {
            report.error(
                format!("{p}.one_time_cost"),
                format!("one_time_cost must be >= 0, got {}", fmt_num(strat.one_time_cost)),
            );
        }
        for state in &spec.states {
            if !strat.transition_matrix.contains_key(&state.name) {
                report.error(
                    format!("{p}.transition_matrix"),
                    format!("missing row for state `{}`", state.name),
                );
            }
        }
        for (from, row) in &strat.transition_matrix {
            let rp = format!("{p}.transition_matrix.{from}");
            let Some(from_idx) = spec.state_index(from) else {
                report.error(&rp, format!("row for unknown state `{from}`"));
                continue;
            };
            if row.len() != n {
                report.error(&rp, format!("row has {} entries, expected {n}", row.len()));
                continue;
            }
            check_row(row, &rp, report);
            if spec.states[from_idx].is_absorbing && (row[from_idx] - 1.0).abs() > STOCHASTIC_TOL {
                report.error(
                    &rp,
                    format!(
                        "absorbing state `{from}` must have self-transition probability 1, got {}",
                        fmt_num(row[from_idx])
                    ),
                );
            }
        }
    }
}

fn check_row(row: &[f64], path: &str, report: &mut ValidationReport) {
    if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
        report.error(path, "row entries must lie in [0, 1]");
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > STOCHASTIC_TOL {
        report.error(path, format!("row sums to {}", fmt_num(sum)));
    }
}

fn check_subgroups(spec: &ModelSpec, report: &mut ValidationReport) {
    if spec.subgroups.is_empty() {
        return;
    }
    check_unique(
        spec.subgroups.iter().map(|g| g.name.as_str()),
        "subgroups",
        report,
    );
    let total: f64 = spec.subgroups.iter().map(|g| g.population_share).sum();
    if (total - 1.0).abs() > STOCHASTIC_TOL {
        report.error(
            "subgroups",
            format!("population shares sum to {}, expected 1", fmt_num(total)),
        );
    }

    // errors already present in the base spec are not repeated per subgroup
    let mut base = ValidationReport::default();
    check_states(spec, &mut base);
    check_strategies(spec, &mut base);
    let base_errors: HashSet<(String, String)> = base
        .errors()
        .map(|d| (d.path.clone(), d.message.clone()))
        .collect();

    for g in &spec.subgroups {
        let p = format!("subgroups.{}", g.name);
        check_name(&g.name, &p, report);
        if !(0.0..=1.0).contains(&g.population_share) {
            report.error(
                format!("{p}.population_share"),
                format!(
                    "population_share must be in [0, 1], got {}",
                    fmt_num(g.population_share)
                ),
            );
        }
        if !(g.baseline_health > 0.0 && g.baseline_health.is_finite()) {
            report.error(
                format!("{p}.baseline_health"),
                format!(
                    "baseline_health must be > 0, got {}",
                    fmt_num(g.baseline_health)
                ),
            );
        }
        let mut view = spec.clone();
        for (raw, value) in &g.parameter_overrides {
            let op = format!("{p}.parameter_overrides.{raw}");
            let path = match ParameterPath::parse(raw, spec) {
                Ok(path) => path,
                Err(_) => {
                    report.error(op, format!("unresolved parameter path `{raw}`"));
                    continue;
                }
            };
            if let Err(e) = path.set(&mut view, value.clone()) {
                report.error(op, e.to_string());
            }
        }
        let mut merged = ValidationReport::default();
        check_states(&view, &mut merged);
        check_strategies(&view, &mut merged);
        for d in merged.errors() {
            if !base_errors.contains(&(d.path.clone(), d.message.clone())) {
                report.error(format!("{p}: {}", d.path), d.message.clone());
            }
        }
    }
}

fn check_distributions(spec: &ModelSpec, report: &mut ValidationReport) {
    if spec.psa.iterations < 1 {
        report.error("psa.iterations", "iterations must be >= 1");
    }
    let mut seen = HashSet::new();
    for (i, d) in spec.psa.distributions.iter().enumerate() {
        let p = format!("psa.distributions[{i}]");
        if !seen.insert(d.target.as_str()) {
            report.error(&p, format!("duplicate distribution target `{}`", d.target));
        }
        let path = match ParameterPath::parse(&d.target, spec) {
            Ok(path) => path,
            Err(_) => {
                report.error(&p, format!("unresolved parameter path `{}`", d.target));
                continue;
            }
        };
        let domain = path.domain();
        let compatible = match d.distribution {
            Distribution::Beta { .. } => matches!(domain, Domain::Unit | Domain::Rate),
            Distribution::Gamma { .. } | Distribution::Lognormal { .. } => {
                domain == Domain::NonNegative
            }
            Distribution::Normal { .. } | Distribution::Uniform { .. } => domain.is_scalar(),
            Distribution::DirichletRow { .. } => domain == Domain::StochasticRow,
        };
        if !compatible {
            report.error(
                &p,
                format!(
                    "{} distribution cannot target `{}`",
                    d.distribution.kind(),
                    d.target
                ),
            );
        }
        let params_ok = match d.distribution {
            Distribution::Beta { alpha, beta } => alpha > 0.0 && beta > 0.0,
            Distribution::Gamma { shape, scale } => shape > 0.0 && scale > 0.0,
            Distribution::Normal { mean, sd } => mean.is_finite() && sd >= 0.0 && sd.is_finite(),
            Distribution::Lognormal { meanlog, sdlog } => {
                meanlog.is_finite() && sdlog >= 0.0 && sdlog.is_finite()
            }
            Distribution::Uniform { low, high } => {
                low <= high && (!compatible || (domain.contains(low) && domain.contains(high)))
            }
            Distribution::DirichletRow { precision } => precision > 0.0 && precision.is_finite(),
        };
        if !params_ok {
            report.error(
                &p,
                format!(
                    "invalid parameters for {} distribution on `{}`",
                    d.distribution.kind(),
                    d.target
                ),
            );
        }
        if let Some(state) = path.state() {
            let s = &spec.states[spec.state_index(state).expect("resolved path")];
            if s.is_absorbing && !s.absorbing_override {
                report.error(
                    &p,
                    format!("`{}` perturbs absorbing state `{state}` without absorbing_override", d.target),
                );
            }
        }
    }
}

fn check_scalars(spec: &ModelSpec, report: &mut ValidationReport) {
    let n = spec.states.len();
    if spec.initial_distribution.len() != n {
        report.error(
            "initial_distribution",
            format!(
                "expected {n} entries, got {}",
                spec.initial_distribution.len()
            ),
        );
    } else {
        check_row(&spec.initial_distribution, "initial_distribution", report);
    }
    if spec.horizon_cycles < 1 {
        report.error("horizon_cycles", "horizon_cycles must be >= 1");
    }
    if !(spec.cycle_length_years > 0.0 && spec.cycle_length_years.is_finite()) {
        report.error("cycle_length_years", "cycle_length_years must be > 0");
    }
    for (key, r) in [
        ("discount.costs", spec.discount.costs),
        ("discount.effects", spec.discount.effects),
    ] {
        if !(0.0..1.0).contains(&r) {
            report.error(key, format!("discount rate must be in [0, 1), got {}", fmt_num(r)));
        }
    }
    if !(spec.wtp_threshold >= 0.0 && spec.wtp_threshold.is_finite()) {
        report.error("wtp_threshold", "wtp_threshold must be >= 0");
    }
    if !(spec.inequality_aversion >= 0.0 && spec.inequality_aversion.is_finite()) {
        report.error("inequality_aversion", "inequality_aversion must be ≥ 0");
    }
    if let ReferenceHealth::Value(h) = spec.reference_health {
        if !(h > 0.0 && h.is_finite()) {
            report.error("reference_health", "reference_health must be > 0");
        }
    }
    match (spec.productivity_method, spec.friction_period_years) {
        (ProductivityMethod::FrictionCost, None) => report.error(
            "friction_period_years",
            "friction_period_years is required with productivity_method: friction-cost",
        ),
        (ProductivityMethod::FrictionCost, Some(f)) if !(f > 0.0) => {
            report.error("friction_period_years", "friction_period_years must be > 0")
        }
        _ => {}
    }
}

fn check_bia(spec: &ModelSpec, report: &mut ValidationReport) {
    let Some(bia) = &spec.bia else { return };
    if !(bia.eligible_population >= 0.0 && bia.eligible_population.is_finite()) {
        report.error("bia.eligible_population", "eligible_population must be >= 0");
    }
    if !(1..=5).contains(&bia.horizon_years) {
        report.error("bia.horizon_years", "horizon_years must be between 1 and 5");
    }
    match &bia.uptake {
        Uptake::Flat(u) => {
            if !(0.0..=1.0).contains(u) {
                report.error("bia.uptake", "uptake must be in [0, 1]");
            }
        }
        Uptake::Schedule(s) => {
            if s.len() != bia.horizon_years as usize {
                report.error(
                    "bia.uptake",
                    format!(
                        "uptake schedule has {} entries, expected horizon_years = {}",
                        s.len(),
                        bia.horizon_years
                    ),
                );
            }
            if s.iter().any(|u| !(0.0..=1.0).contains(u)) {
                report.error("bia.uptake", "uptake must be in [0, 1]");
            }
        }
    }
}

fn check_settings(spec: &ModelSpec, report: &mut ValidationReport) {
    for (raw, [low, high]) in &spec.sensitivity.tornado_ranges {
        let p = format!("sensitivity.tornado_ranges.{raw}");
        match ParameterPath::parse(raw, spec) {
            Ok(path) if path.domain().is_scalar() => {
                if low > high {
                    report.error(&p, "low must be <= high");
                }
                if !(path.domain().contains(*low) && path.domain().contains(*high)) {
                    report.error(&p, "range lies outside the parameter's valid domain");
                }
            }
            Ok(_) => report.error(&p, "tornado ranges apply to scalar parameters only"),
            Err(_) => report.error(&p, format!("unresolved parameter path `{raw}`")),
        }
    }
    if spec.sensitivity.sobol_base_samples < 64 {
        report.error("sensitivity.sobol_base_samples", "sobol_base_samples must be >= 64");
    }
    if spec.sensitivity.sobol_bootstrap < 100 {
        report.error("sensitivity.sobol_bootstrap", "sobol_bootstrap must be >= 100");
    }
    let a = &spec.analysis;
    if !(a.ceac_max_wtp >= 0.0) || a.ceac_points < 2 {
        report.error(
            "analysis",
            "ceac_max_wtp must be >= 0 and ceac_points >= 2",
        );
    }
    if a.epsilon_grid.iter().any(|e| !(*e >= 0.0)) {
        report.error("analysis.epsilon_grid", "epsilon values must be >= 0");
    }
    if let Some(p) = a.evpi_population {
        if !(p >= 0.0) {
            report.error("analysis.evpi_population", "evpi_population must be >= 0");
        }
    }
}

pub(crate) fn validate(spec: &ModelSpec) -> ValidationReport {
    let mut report = ValidationReport::default();
    check_states(spec, &mut report);
    check_strategies(spec, &mut report);
    check_subgroups(spec, &mut report);
    check_scalars(spec, &mut report);
    check_distributions(spec, &mut report);
    check_bia(spec, &mut report);
    check_settings(spec, &mut report);
    report
}
