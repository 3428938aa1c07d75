//! Budget impact of adopting the intervention and the cost of illness under
//! the comparator.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::cea::Perspective;
use crate::config::{BudgetImpactSpec, CostComponent, ModelSpec, Uptake};
use crate::error::{Error, Result};
use crate::markov::{run_model, Components};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetImpactRow {
    pub year: usize,
    pub incremental_cost_per_person: f64,
    pub uptake: f64,
    pub population: f64,
    pub bi_year: f64,
    pub bi_cumulative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetImpactTable {
    pub perspective: Perspective,
    /// Cost discount rate applied to each year, when discounting is on.
    pub discount_rate: Option<f64>,
    pub rows: Vec<BudgetImpactRow>,
    pub total: f64,
}

/// `BI_t = ΔC(t) · uptake_t · N_pop`, optionally divided by `(1 + r)^t`,
/// for years `t = 1 ..= increments.len()`.
pub fn budget_impact_from_increments(
    increments: &[f64],
    uptake: &Uptake,
    population: f64,
    discount_rate: Option<f64>,
    perspective: Perspective,
) -> Result<BudgetImpactTable> {
    if let Uptake::Schedule(s) = uptake {
        if s.len() != increments.len() {
            return Err(Error::InvalidInput(format!(
                "uptake schedule has {} entries for {} years",
                s.len(),
                increments.len()
            )));
        }
    }
    let mut rows = Vec::with_capacity(increments.len());
    let mut cumulative = 0.0;
    for (k, &delta) in increments.iter().enumerate() {
        let year = k + 1;
        let u = uptake.in_year(year);
        let mut bi = delta * u * population;
        if let Some(r) = discount_rate {
            bi /= (1.0 + r).powi(year as i32);
        }
        cumulative += bi;
        rows.push(BudgetImpactRow {
            year,
            incremental_cost_per_person: delta,
            uptake: u,
            population,
            bi_year: bi,
            bi_cumulative: cumulative,
        });
    }
    Ok(BudgetImpactTable {
        perspective,
        discount_rate,
        rows,
        total: cumulative,
    })
}

/// Sums per-cycle flows into model years (cycle `t` falls in year
/// `floor(t · L) + 1`); needs cycles no longer than a year.
fn yearly(per_cycle: &[Components], cycle_length: f64, years: usize) -> Result<Vec<Components>> {
    if cycle_length > 1.0 + 1e-12 {
        return Err(Error::Unsupported(format!(
            "budget impact needs cycles of at most one year, got {cycle_length}"
        )));
    }
    let mut out = vec![Components::default(); years];
    for (t, flow) in per_cycle.iter().enumerate() {
        let year = (t as f64 * cycle_length + 1e-9).floor() as usize;
        if year < years {
            out[year] = out[year] + *flow;
        }
    }
    Ok(out)
}

/// Budget impact of the intervention over `bia.horizon_years`, from the
/// population's undiscounted per-cycle costs.
pub fn budget_impact(spec: &ModelSpec, bia: &BudgetImpactSpec, perspective: Perspective) -> Result<BudgetImpactTable> {
    let model_years = spec.horizon_cycles as f64 * spec.cycle_length_years;
    if bia.horizon_years as f64 > model_years + 1e-9 {
        return Err(Error::BiaHorizon {
            years: bia.horizon_years,
            model_years,
        });
    }
    let run = run_model(spec)?;
    if run.strategies.len() != 2 {
        return Err(Error::NotPairwise(run.strategies.len()));
    }
    let years = bia.horizon_years as usize;
    let cycles = |s: usize| {
        run.population[s]
            .per_cycle
            .clone()
            .ok_or_else(|| Error::InvalidInput("per-cycle breakdown missing".into()))
    };
    let new = yearly(&cycles(1 - run.comparator)?, spec.cycle_length_years, years)?;
    let old = yearly(&cycles(run.comparator)?, spec.cycle_length_years, years)?;
    let increments: Vec<f64> = new
        .iter()
        .zip(&old)
        .map(|(n, o)| n.cost(perspective) - o.cost(perspective))
        .collect();
    budget_impact_from_increments(
        &increments,
        &bia.uptake,
        bia.eligible_population,
        bia.discounting.then_some(spec.discount.costs),
        perspective,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoiRow {
    /// Payer component, or `societal` for the total.
    pub component: String,
    pub per_capita_annual: f64,
    pub per_capita_cumulative: f64,
    pub population_annual: f64,
    pub cumulative: f64,
}

/// Burden of the disease under the comparator, by payer component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoiTable {
    pub strategy: String,
    pub years: f64,
    /// Eligible population used for scaling; per-capita figures otherwise.
    pub population: Option<f64>,
    pub rows: Vec<CoiRow>,
}

impl CoiTable {
    pub fn row(&self, component: &str) -> Option<&CoiRow> {
        self.rows.iter().find(|r| r.component == component)
    }
}

/// Undiscounted comparator-arm costs over the model horizon; annual values
/// are the cumulative total divided by the horizon in years.
pub fn cost_of_illness(spec: &ModelSpec) -> Result<CoiTable> {
    let run = run_model(spec)?;
    let ledger = &run.population[run.comparator];
    let years = spec.horizon_cycles as f64 * spec.cycle_length_years;
    let population = spec.bia.as_ref().map(|b| b.eligible_population);
    let scale = population.unwrap_or(1.0);
    let row = |component: &str, cumulative: f64| CoiRow {
        component: component.to_string(),
        per_capita_annual: cumulative / years,
        per_capita_cumulative: cumulative,
        population_annual: cumulative / years * scale,
        cumulative: cumulative * scale,
    };
    let mut rows: Vec<CoiRow> = CostComponent::ALL
        .iter()
        .map(|&c| row(c.name(), ledger.undiscounted.component(c)))
        .collect();
    let sum = |f: fn(&CoiRow) -> f64| rows.iter().map(f).fold(0.0, |a, b| a + b);
    let societal = CoiRow {
        component: Perspective::Societal.name().to_string(),
        per_capita_annual: sum(|r| r.per_capita_annual),
        per_capita_cumulative: sum(|r| r.per_capita_cumulative),
        population_annual: sum(|r| r.population_annual),
        cumulative: sum(|r| r.cumulative),
    };
    rows.push(societal);
    Ok(CoiTable {
        strategy: run.strategies[run.comparator].clone(),
        years,
        population,
        rows,
    })
}

/// Writes `bia.csv`.
pub fn write_bia_csv<W: Write>(table: &BudgetImpactTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "year",
        "incremental_cost_per_person",
        "uptake",
        "population",
        "bi_year",
        "bi_cumulative",
    ])?;
    for r in &table.rows {
        w.write_record([
            r.year.to_string(),
            r.incremental_cost_per_person.to_string(),
            r.uptake.to_string(),
            r.population.to_string(),
            r.bi_year.to_string(),
            r.bi_cumulative.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("bia.csv", e))?;
    Ok(())
}

/// Writes `coi.csv`.
pub fn write_coi_csv<W: Write>(table: &CoiTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["component", "per_capita_annual", "population_annual", "cumulative"])?;
    for r in &table.rows {
        w.write_record([
            r.component.clone(),
            r.per_capita_annual.to_string(),
            r.population_annual.to_string(),
            r.cumulative.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("coi.csv", e))?;
    Ok(())
}
