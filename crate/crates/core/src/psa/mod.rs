//! Probabilistic sensitivity analysis: joint parameter draws, per-iteration
//! model runs and the [`PsaBundle`] every downstream analysis reads.

mod analysis;
mod sampling;

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cea::{choose, Perspective};
use crate::config::ModelSpec;
use crate::error::{Error, Result};
use crate::markov::{run_model_with, Components};

pub use analysis::{
    ce_plane, ceac, delta_nmb_distribution, quantile, CePlane, CePoint, CeacTable, CloudSummary,
    DeltaNmbSummary, QUANTILE_LEVELS,
};
pub use sampling::{
    iteration_rng, parameter_columns, sample_distribution, sample_parameters, ParameterAssignment,
};

/// Subgroup identity as recorded in a bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupInfo {
    pub name: String,
    pub population_share: f64,
    pub baseline_health: f64,
}

/// Sampled-parameter columns produced by one distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterGroup {
    pub target: String,
    pub columns: Vec<String>,
}

/// Everything a PSA run produced.
///
/// `outcomes[i][s][g]` holds the discounted per-person totals of strategy
/// `s` in subgroup `g` at iteration `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsaBundle {
    pub master_seed: u64,
    pub spec_digest: String,
    pub strategies: Vec<String>,
    pub comparator: usize,
    pub subgroups: Vec<SubgroupInfo>,
    pub parameter_groups: Vec<ParameterGroup>,
    pub parameter_names: Vec<String>,
    pub samples: Vec<Vec<f64>>,
    pub outcomes: Vec<Vec<Vec<Components>>>,
}

impl PsaBundle {
    /// Assembles a bundle from precomputed parts, checking shapes. Handy for
    /// synthetic bundles in tests and external post-processing.
    pub fn from_parts(
        strategies: Vec<String>,
        comparator: usize,
        subgroups: Vec<SubgroupInfo>,
        parameter_names: Vec<String>,
        samples: Vec<Vec<f64>>,
        outcomes: Vec<Vec<Vec<Components>>>,
    ) -> Result<PsaBundle> {
        if comparator >= strategies.len() {
            return Err(Error::Dimension(format!(
                "comparator index {comparator} with {} strategies",
                strategies.len()
            )));
        }
        if samples.len() != outcomes.len() {
            return Err(Error::Dimension(format!(
                "{} sample rows but {} outcome rows",
                samples.len(),
                outcomes.len()
            )));
        }
        for (i, (row, out)) in samples.iter().zip(&outcomes).enumerate() {
            if row.len() != parameter_names.len() {
                return Err(Error::Dimension(format!(
                    "iteration {i}: {} parameters, expected {}",
                    row.len(),
                    parameter_names.len()
                )));
            }
            if out.len() != strategies.len() || out.iter().any(|s| s.len() != subgroups.len()) {
                return Err(Error::Dimension(format!(
                    "iteration {i}: outcome block is not {} strategies × {} subgroups",
                    strategies.len(),
                    subgroups.len()
                )));
            }
        }
        let parameter_groups = parameter_names
            .iter()
            .map(|n| ParameterGroup {
                target: n.clone(),
                columns: vec![n.clone()],
            })
            .collect();
        Ok(PsaBundle {
            master_seed: 0,
            spec_digest: String::new(),
            strategies,
            comparator,
            subgroups,
            parameter_groups,
            parameter_names,
            samples,
            outcomes,
        })
    }

    pub fn iterations(&self) -> usize {
        self.outcomes.len()
    }

    /// Share-weighted population outcome of strategy `s` at iteration `i`.
    pub fn population(&self, i: usize, s: usize) -> Components {
        self.subgroups
            .iter()
            .zip(&self.outcomes[i][s])
            .fold(Components::default(), |acc, (g, c)| acc + *c * g.population_share)
    }

    /// Population NMB of every strategy at iteration `i`.
    pub fn nmb_row(&self, i: usize, wtp: f64, perspective: Perspective) -> Vec<f64> {
        (0..self.strategies.len())
            .map(|s| {
                let c = self.population(i, s);
                c.qalys * wtp - c.cost(perspective)
            })
            .collect()
    }

    /// `N × strategies` NMB matrix.
    pub fn nmb_matrix(&self, wtp: f64, perspective: Perspective) -> Vec<Vec<f64>> {
        (0..self.iterations())
            .map(|i| self.nmb_row(i, wtp, perspective))
            .collect()
    }

    /// Strategy chosen at iteration `i` under the shared tie rule.
    pub fn chosen(&self, i: usize, wtp: f64, perspective: Perspective) -> usize {
        choose(&self.nmb_row(i, wtp, perspective), self.comparator)
    }

    /// Index of the single non-comparator strategy.
    pub fn intervention(&self) -> Result<usize> {
        if self.strategies.len() != 2 {
            return Err(Error::NotPairwise(self.strategies.len()));
        }
        Ok(1 - self.comparator)
    }

    /// Population increment (intervention minus comparator) at iteration `i`.
    pub fn increment(&self, i: usize) -> Result<Components> {
        let new = self.intervention()?;
        Ok(self.population(i, new).sub(&self.population(i, self.comparator)))
    }

    /// Per-subgroup increments at iteration `i`, in subgroup order.
    pub fn subgroup_increments(&self, i: usize) -> Result<Vec<Components>> {
        let new = self.intervention()?;
        Ok(self.outcomes[i][new]
            .iter()
            .zip(&self.outcomes[i][self.comparator])
            .map(|(n, c)| n.sub(c))
            .collect())
    }

    /// Sampled values of one named column.
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let k = self
            .parameter_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))?;
        Ok(self.samples.iter().map(|row| row[k]).collect())
    }

    /// Column names for a distribution target: the target itself, or its
    /// expanded row columns.
    pub fn columns_for(&self, name: &str) -> Result<Vec<String>> {
        if let Some(g) = self.parameter_groups.iter().find(|g| g.target == name) {
            return Ok(g.columns.clone());
        }
        if self.parameter_names.iter().any(|n| n == name) {
            return Ok(vec![name.to_string()]);
        }
        Err(Error::UnknownParameter(name.to_string()))
    }

    /// Header of the per-iteration CSV.
    pub fn csv_header(&self) -> Vec<String> {
        let mut header = vec!["iteration".to_string()];
        header.extend(self.parameter_names.iter().cloned());
        for s in &self.strategies {
            for g in &self.subgroups {
                for field in ["cost_direct", "cost_prod", "cost_oop", "qalys"] {
                    header.push(format!("{s}.{}.{field}", g.name));
                }
            }
        }
        header
    }

    /// Writes `psa_samples.csv`: iteration, sampled parameters, then four
    /// outcome columns per strategy × subgroup.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.csv_header())?;
        for (i, (row, block)) in self.samples.iter().zip(&self.outcomes).enumerate() {
            let mut rec = vec![i.to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            for strat in block {
                for c in strat {
                    for v in [c.direct_medical, c.productivity, c.out_of_pocket, c.qalys] {
                        rec.push(v.to_string());
                    }
                }
            }
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("psa_samples.csv", e))?;
        Ok(())
    }
}

/// Sampled values plus `[strategy][subgroup]` outcomes of one iteration.
pub fn simulate_iteration(spec: &ModelSpec, index: usize) -> Result<(Vec<f64>, Vec<Vec<Components>>)> {
    let assignment = sample_parameters(spec, index)?;
    let drawn = assignment.apply(spec)?;
    let run = run_model_with(&drawn, false)?;
    let outcomes = (0..run.strategies.len())
        .map(|s| {
            run.subgroups
                .iter()
                .map(|g| g.strategies[s].ledger.discounted)
                .collect()
        })
        .collect();
    Ok((assignment.flatten(), outcomes))
}

/// Runs every PSA iteration of `spec`. Iterations run in parallel; each one
/// draws from its own stream, so the bundle is identical to a serial run.
pub fn run_psa(spec: &ModelSpec) -> Result<PsaBundle> {
    let n = spec.psa.iterations;
    if n == 0 {
        return Err(Error::InvalidInput("PSA needs at least one iteration".into()));
    }
    let comparator = spec
        .comparator_index()
        .ok_or_else(|| Error::InvalidInput("model has no comparator strategy".into()))?;
    let groups = parameter_columns(spec)?;
    let results: Vec<(Vec<f64>, Vec<Vec<Components>>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            simulate_iteration(spec, i).map_err(|e| Error::Iteration {
                index: i,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    let (samples, outcomes) = results.into_iter().unzip();
    Ok(PsaBundle {
        master_seed: spec.psa.seed,
        spec_digest: spec.digest(),
        strategies: spec.strategies.iter().map(|s| s.name.clone()).collect(),
        comparator,
        subgroups: spec
            .effective_subgroups()
            .into_iter()
            .map(|g| SubgroupInfo {
                name: g.name,
                population_share: g.population_share,
                baseline_health: g.baseline_health,
            })
            .collect(),
        parameter_names: groups.iter().flat_map(|(_, c)| c.iter().cloned()).collect(),
        parameter_groups: groups
            .into_iter()
            .map(|(target, columns)| ParameterGroup { target, columns })
            .collect(),
        samples,
        outcomes,
    })
}
