//! Time-homogeneous Markov cohort engine.
//!
//! The cohort distribution evolves as `P(t+1) = P(t) · M`. Costs and QALYs
//! accrue over cycles `t = 0 .. T-1` from the occupancy at the start of each
//! cycle (optionally averaged with the end of the cycle when `half_cycle` is
//! set), discounted by `(1 + r)^(-t · cycle_length)`. Three cost ledgers are
//! tracked in parallel so that any perspective can be read off one run.

use std::io::Write;
use std::ops::{Add, Mul};

use serde::{Deserialize, Serialize};

use crate::cea::Perspective;
use crate::config::{
    CostComponent, HealthState, ModelSpec, ProductivityMethod, Strategy, STOCHASTIC_TOL,
};
use crate::error::{Error, Result};

/// Square row-stochastic matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    size: usize,
    data: Vec<f64>,
}

impl TransitionMatrix {
    /// Checks squareness, entry bounds and row sums (within 1e-9).
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let size = rows.len();
        let mut data = Vec::with_capacity(size * size);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != size {
                return Err(Error::Dimension(format!(
                    "row {i} has {} entries in a {size}x{size} matrix",
                    row.len()
                )));
            }
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::InvalidInput(format!("row {i} has entries outside [0, 1]")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::InvalidInput(format!("row {i} sums to {sum}")));
            }
            data.extend(row);
        }
        Ok(TransitionMatrix { size, data })
    }

    pub fn identity(size: usize) -> Self {
        let mut data = vec![0.0; size * size];
        for i in 0..size {
            data[i * size + i] = 1.0;
        }
        TransitionMatrix { size, data }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.size..(i + 1) * self.size]
    }

    /// `p · M`
    pub fn step(&self, p: &[f64]) -> Vec<f64> {
        let n = self.size;
        let mut next = vec![0.0; n];
        for (i, &pi) in p.iter().enumerate() {
            if pi == 0.0 {
                continue;
            }
            for (nj, mij) in next.iter_mut().zip(self.row(i)) {
                *nj += pi * mij;
            }
        }
        next
    }
}

/// State occupancy per cycle: `(T+1) x S`, row `t` is `P(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortTrace {
    pub occupancy: Vec<Vec<f64>>,
}

impl CohortTrace {
    /// Number of cycles `T` (one less than the number of rows).
    pub fn horizon(&self) -> usize {
        self.occupancy.len() - 1
    }

    pub fn num_states(&self) -> usize {
        self.occupancy.first().map_or(0, Vec::len)
    }

    pub fn at(&self, t: usize) -> &[f64] {
        &self.occupancy[t]
    }

    /// CSV with columns `cycle, <state_1>, ..., <state_S>`.
    pub fn write_csv<W: Write>(&self, state_names: &[String], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["cycle".to_string()];
        header.extend(state_names.iter().cloned());
        w.write_record(&header)?;
        for (t, row) in self.occupancy.iter().enumerate() {
            let mut rec = vec![t.to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("trace csv", e))?;
        Ok(())
    }
}

/// Runs the cohort forward `horizon` cycles from `initial`.
pub fn run_cohort(
    matrix: &TransitionMatrix,
    initial: &[f64],
    horizon: usize,
) -> Result<CohortTrace> {
    if initial.len() != matrix.size() {
        return Err(Error::Dimension(format!(
            "initial distribution has {} entries for a {}-state matrix",
            initial.len(),
            matrix.size()
        )));
    }
    if horizon < 1 {
        return Err(Error::InvalidInput("horizon must be >= 1".into()));
    }
    let sum: f64 = initial.iter().sum();
    if (sum - 1.0).abs() > STOCHASTIC_TOL || initial.iter().any(|p| *p < 0.0) {
        return Err(Error::InvalidInput(format!(
            "initial distribution must be a probability vector (sums to {sum})"
        )));
    }
    let mut occupancy = Vec::with_capacity(horizon + 1);
    occupancy.push(initial.to_vec());
    for t in 0..horizon {
        let next = matrix.step(&occupancy[t]);
        occupancy.push(next);
    }
    Ok(CohortTrace { occupancy })
}

/// Three cost components plus QALYs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Components {
    pub direct_medical: f64,
    pub productivity: f64,
    pub out_of_pocket: f64,
    pub qalys: f64,
}

impl Components {
    /// `C_Soc = C_HS + C_Prod + C_OOP`.
    pub fn cost_societal(&self) -> f64 {
        self.direct_medical + self.productivity + self.out_of_pocket
    }

    pub fn cost_health_system(&self) -> f64 {
        self.direct_medical
    }

    pub fn cost(&self, perspective: Perspective) -> f64 {
        match perspective {
            Perspective::HealthSystem => self.cost_health_system(),
            Perspective::Societal => self.cost_societal(),
        }
    }

    pub fn component(&self, c: CostComponent) -> f64 {
        match c {
            CostComponent::DirectMedical => self.direct_medical,
            CostComponent::Productivity => self.productivity,
            CostComponent::OutOfPocket => self.out_of_pocket,
        }
    }

    fn component_mut(&mut self, c: CostComponent) -> &mut f64 {
        match c {
            CostComponent::DirectMedical => &mut self.direct_medical,
            CostComponent::Productivity => &mut self.productivity,
            CostComponent::OutOfPocket => &mut self.out_of_pocket,
        }
    }

    pub fn sub(&self, other: &Components) -> Components {
        Components {
            direct_medical: self.direct_medical - other.direct_medical,
            productivity: self.productivity - other.productivity,
            out_of_pocket: self.out_of_pocket - other.out_of_pocket,
            qalys: self.qalys - other.qalys,
        }
    }
}

impl Add for Components {
    type Output = Components;

    fn add(self, o: Components) -> Components {
        Components {
            direct_medical: self.direct_medical + o.direct_medical,
            productivity: self.productivity + o.productivity,
            out_of_pocket: self.out_of_pocket + o.out_of_pocket,
            qalys: self.qalys + o.qalys,
        }
    }
}

impl Mul<f64> for Components {
    type Output = Components;

    fn mul(self, k: f64) -> Components {
        Components {
            direct_medical: self.direct_medical * k,
            productivity: self.productivity * k,
            out_of_pocket: self.out_of_pocket * k,
            qalys: self.qalys * k,
        }
    }
}

/// Per-person outcomes of one strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeLedger {
    pub discounted: Components,
    pub undiscounted: Components,
    /// Undiscounted flow of each accumulated cycle `0 .. T-1`, one-time
    /// cost included at cycle 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_cycle: Option<Vec<Components>>,
}

impl OutcomeLedger {
    pub fn cost_direct_medical(&self) -> f64 {
        self.discounted.direct_medical
    }

    pub fn cost_productivity(&self) -> f64 {
        self.discounted.productivity
    }

    pub fn cost_out_of_pocket(&self) -> f64 {
        self.discounted.out_of_pocket
    }

    pub fn qalys(&self) -> f64 {
        self.discounted.qalys
    }

    pub fn cost_societal(&self) -> f64 {
        self.discounted.cost_societal()
    }

    pub fn cost(&self, perspective: Perspective) -> f64 {
        self.discounted.cost(perspective)
    }

    /// Share-weighted sum of ledgers, e.g. subgroups into a population.
    pub fn weighted_sum<'a>(parts: impl IntoIterator<Item = (f64, &'a OutcomeLedger)>) -> Self {
        let mut discounted = Components::default();
        let mut undiscounted = Components::default();
        let mut per_cycle: Option<Vec<Components>> = None;
        let mut all_have_cycles = true;
        for (w, l) in parts {
            discounted = discounted + l.discounted * w;
            undiscounted = undiscounted + l.undiscounted * w;
            match (&mut per_cycle, &l.per_cycle) {
                (_, None) => all_have_cycles = false,
                (None, Some(c)) => per_cycle = Some(c.iter().map(|x| *x * w).collect()),
                (Some(acc), Some(c)) if acc.len() == c.len() => {
                    for (a, x) in acc.iter_mut().zip(c) {
                        *a = *a + *x * w;
                    }
                }
                (Some(_), Some(_)) => all_have_cycles = false,
            }
        }
        OutcomeLedger {
            discounted,
            undiscounted,
            per_cycle: per_cycle.filter(|_| all_have_cycles),
        }
    }
}

/// Settings that shape how a trace is turned into a ledger.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccumulationOptions {
    pub discount_costs: f64,
    pub discount_effects: f64,
    pub cycle_length: f64,
    pub half_cycle: bool,
    pub productivity: ProductivityMethod,
    pub friction_period_years: Option<f64>,
    pub keep_per_cycle: bool,
}

impl AccumulationOptions {
    pub fn from_spec(spec: &ModelSpec) -> Self {
        AccumulationOptions {
            discount_costs: spec.discount.costs,
            discount_effects: spec.discount.effects,
            cycle_length: spec.cycle_length_years,
            half_cycle: spec.half_cycle,
            productivity: spec.productivity_method,
            friction_period_years: spec.friction_period_years,
            keep_per_cycle: true,
        }
    }

    /// Plain discounting, no half-cycle, human capital.
    pub fn simple(discount_costs: f64, discount_effects: f64, cycle_length: f64) -> Self {
        AccumulationOptions {
            discount_costs,
            discount_effects,
            cycle_length,
            half_cycle: false,
            productivity: ProductivityMethod::HumanCapital,
            friction_period_years: None,
            keep_per_cycle: true,
        }
    }
}

/// Productivity-bearing occupancy of absorbing states under the friction
/// cost method: each cycle's entrants count for at most the friction period.
fn friction_occupancy(trace: &CohortTrace, state: usize, friction: f64, cycle_length: f64) -> Vec<f64> {
    let rows = trace.occupancy.len();
    let inflow: Vec<f64> = (0..rows)
        .map(|e| {
            if e == 0 {
                trace.occupancy[0][state]
            } else {
                (trace.occupancy[e][state] - trace.occupancy[e - 1][state]).max(0.0)
            }
        })
        .collect();
    let fraction = |age: usize| ((friction - age as f64 * cycle_length) / cycle_length).clamp(0.0, 1.0);
    (0..rows)
        .map(|t| (0..=t).map(|e| inflow[e] * fraction(t - e)).sum())
        .collect()
}

/// Turns a trace into discounted and undiscounted per-person outcomes.
pub fn accumulate_outcomes(
    trace: &CohortTrace,
    states: &[HealthState],
    strategy: &Strategy,
    options: &AccumulationOptions,
) -> Result<OutcomeLedger> {
    let s = states.len();
    if trace.num_states() != s {
        return Err(Error::Dimension(format!(
            "trace has {} states, model has {s}",
            trace.num_states()
        )));
    }
    // absorbing states carry nothing unless explicitly overridden
    let value = |j: usize, f: fn(&HealthState) -> f64| {
        let st = &states[j];
        if st.is_absorbing && !st.absorbing_override {
            0.0
        } else {
            f(st)
        }
    };
    let utility: Vec<f64> = (0..s).map(|j| value(j, |x| x.utility)).collect();
    let direct: Vec<f64> = (0..s).map(|j| value(j, |x| x.cost_direct_medical)).collect();
    let prod: Vec<f64> = (0..s).map(|j| value(j, |x| x.cost_productivity)).collect();
    let oop: Vec<f64> = (0..s).map(|j| value(j, |x| x.cost_out_of_pocket)).collect();

    // occupancy used for productivity; differs from the trace only under
    // the friction cost method, for absorbing states
    let mut prod_occupancy = trace.occupancy.clone();
    if options.productivity == ProductivityMethod::FrictionCost {
        let friction = options.friction_period_years.ok_or_else(|| {
            Error::InvalidInput("friction-cost method needs friction_period_years".into())
        })?;
        for j in (0..s).filter(|&j| states[j].is_absorbing) {
            let occ = friction_occupancy(trace, j, friction, options.cycle_length);
            for (row, v) in prod_occupancy.iter_mut().zip(occ) {
                row[j] = v;
            }
        }
    }

    let horizon = trace.horizon();
    let len = options.cycle_length;
    let occupancy_at = |rows: &[Vec<f64>], t: usize, j: usize| {
        if options.half_cycle {
            0.5 * (rows[t][j] + rows[t + 1][j])
        } else {
            rows[t][j]
        }
    };
    let mut discounted = Components::default();
    let mut undiscounted = Components::default();
    let mut per_cycle = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let mut flow = Components::default();
        for j in 0..s {
            let p = occupancy_at(&trace.occupancy, t, j);
            let pp = occupancy_at(&prod_occupancy, t, j);
            flow.direct_medical += p * direct[j];
            flow.productivity += pp * prod[j];
            flow.out_of_pocket += p * oop[j];
            flow.qalys += p * utility[j];
        }
        flow = flow * len;
        if t == 0 {
            *flow.component_mut(strategy.one_time_cost_component) += strategy.one_time_cost;
        }
        let dc = (1.0 + options.discount_costs).powf(-(t as f64) * len);
        let de = (1.0 + options.discount_effects).powf(-(t as f64) * len);
        discounted.direct_medical += dc * flow.direct_medical;
        discounted.productivity += dc * flow.productivity;
        discounted.out_of_pocket += dc * flow.out_of_pocket;
        discounted.qalys += de * flow.qalys;
        undiscounted = undiscounted + flow;
        per_cycle.push(flow);
    }
    Ok(OutcomeLedger {
        discounted,
        undiscounted,
        per_cycle: options.keep_per_cycle.then_some(per_cycle),
    })
}

/// Transition matrix of `strategy` in the order of `spec.states`.
pub fn strategy_matrix(spec: &ModelSpec, strategy: &Strategy) -> Result<TransitionMatrix> {
    let rows = strategy.ordered_rows(&spec.states).ok_or_else(|| {
        Error::Dimension(format!(
            "strategy `{}` lacks a row for some state",
            strategy.name
        ))
    })?;
    TransitionMatrix::new(rows)
}

/// Cohort run plus ledger for one strategy of a (subgroup-resolved) spec.
pub fn run_strategy(spec: &ModelSpec, strategy: &str) -> Result<(CohortTrace, OutcomeLedger)> {
    run_strategy_with(spec, strategy, &AccumulationOptions::from_spec(spec))
}

pub(crate) fn run_strategy_with(
    spec: &ModelSpec,
    strategy: &str,
    options: &AccumulationOptions,
) -> Result<(CohortTrace, OutcomeLedger)> {
    let strat = spec
        .strategy(strategy)
        .ok_or_else(|| Error::InvalidInput(format!("unknown strategy `{strategy}`")))?;
    let matrix = strategy_matrix(spec, strat)?;
    let trace = run_cohort(&matrix, &spec.initial_distribution, spec.horizon_cycles)?;
    let ledger = accumulate_outcomes(&trace, &spec.states, strat, options)?;
    Ok((trace, ledger))
}

#[derive(Debug, Clone)]
pub struct StrategyRun {
    pub strategy: String,
    pub trace: CohortTrace,
    pub ledger: OutcomeLedger,
}

#[derive(Debug, Clone)]
pub struct SubgroupRun {
    pub name: String,
    pub share: f64,
    pub baseline_health: f64,
    pub strategies: Vec<StrategyRun>,
}

/// Every strategy in every subgroup, plus the share-weighted population.
#[derive(Debug, Clone)]
pub struct ModelRun {
    pub strategies: Vec<String>,
    pub comparator: usize,
    pub subgroups: Vec<SubgroupRun>,
    pub population: Vec<OutcomeLedger>,
}

impl ModelRun {
    pub fn population_ledger(&self, strategy: &str) -> Option<&OutcomeLedger> {
        self.strategies
            .iter()
            .position(|s| s == strategy)
            .map(|i| &self.population[i])
    }
}

/// Deterministic evaluation of `spec` at its current parameter values.
pub fn run_model(spec: &ModelSpec) -> Result<ModelRun> {
    run_model_with(spec, true)
}

pub(crate) fn run_model_with(spec: &ModelSpec, keep_detail: bool) -> Result<ModelRun> {
    let comparator = spec
        .comparator_index()
        .ok_or_else(|| Error::InvalidInput("model has no comparator strategy".into()))?;
    let strategies: Vec<String> = spec.strategies.iter().map(|s| s.name.clone()).collect();
    let mut subgroups = Vec::new();
    for g in spec.effective_subgroups() {
        let view = spec.resolve_subgroup(&g)?;
        let mut options = AccumulationOptions::from_spec(&view);
        options.keep_per_cycle = keep_detail;
        let runs = strategies
            .iter()
            .map(|name| {
                let (trace, ledger) = run_strategy_with(&view, name, &options)?;
                Ok(StrategyRun {
                    strategy: name.clone(),
                    trace,
                    ledger,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        subgroups.push(SubgroupRun {
            name: g.name.clone(),
            share: g.population_share,
            baseline_health: g.baseline_health,
            strategies: runs,
        });
    }
    let population = (0..strategies.len())
        .map(|k| {
            OutcomeLedger::weighted_sum(
                subgroups
                    .iter()
                    .map(|g| (g.share, &g.strategies[k].ledger)),
            )
        })
        .collect();
    Ok(ModelRun {
        strategies,
        comparator,
        subgroups,
        population,
    })
}
