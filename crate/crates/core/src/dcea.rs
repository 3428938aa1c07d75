//! Distributional cost-effectiveness: Atkinson equity weights, the
//! equity-weighted NMB and the equity-impact plane.

use std::io::Write;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::cea::Perspective;
use crate::config::ReferenceHealth;
use crate::error::{Error, Result};
use crate::markov::ModelRun;
use crate::psa::{PsaBundle, SubgroupInfo};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquityWeights {
    pub epsilon: f64,
    pub reference_health: f64,
    pub weights: IndexMap<String, f64>,
}

impl EquityWeights {
    pub fn get(&self, subgroup: &str) -> Option<f64> {
        self.weights.get(subgroup).copied()
    }
}

/// `w_g = (H_ref / H_g)^ε` for every subgroup.
pub fn atkinson_weights(
    subgroups: &[SubgroupInfo],
    epsilon: f64,
    reference: ReferenceHealth,
) -> Result<EquityWeights> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "inequality aversion must be a finite value ≥ 0, got {epsilon}"
        )));
    }
    if let Some(g) = subgroups.iter().find(|g| !(g.baseline_health > 0.0)) {
        return Err(Error::NonPositiveHealth(g.name.clone()));
    }
    let reference_health = match reference {
        ReferenceHealth::PopulationMean => subgroups
            .iter()
            .map(|g| g.population_share * g.baseline_health)
            .sum(),
        ReferenceHealth::Value(h) => h,
    };
    if !(reference_health > 0.0) {
        return Err(Error::InvalidInput(format!(
            "reference health must be positive, got {reference_health}"
        )));
    }
    let weights = subgroups
        .iter()
        .map(|g| (g.name.clone(), (reference_health / g.baseline_health).powf(epsilon)))
        .collect();
    Ok(EquityWeights {
        epsilon,
        reference_health,
        weights,
    })
}

/// Per-capita increment within one subgroup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupIncrement {
    pub name: String,
    pub population_share: f64,
    pub delta_qalys: f64,
    pub delta_cost: f64,
}

impl SubgroupIncrement {
    fn share_nmb(&self, wtp: f64) -> f64 {
        self.population_share * (self.delta_qalys * wtp - self.delta_cost)
    }
}

/// `Σ_g w_g · share_g · (ΔQ_g · λ − ΔC_g)`.
pub fn equity_weighted_nmb(increments: &[SubgroupIncrement], weights: &EquityWeights, wtp: f64) -> Result<f64> {
    let mut total = 0.0;
    for inc in increments {
        let w = weights
            .get(&inc.name)
            .ok_or_else(|| Error::MissingWeight(inc.name.clone()))?;
        total += w * inc.share_nmb(wtp);
    }
    Ok(total)
}

/// Share-weighted ΔNMB without equity weights, summed in the same order as
/// [`equity_weighted_nmb`] so that ε = 0 reproduces it bit for bit.
pub fn unweighted_nmb(increments: &[SubgroupIncrement], wtp: f64) -> f64 {
    let mut total = 0.0;
    for inc in increments {
        total += inc.share_nmb(wtp);
    }
    total
}

/// Deterministic per-subgroup increments (intervention minus comparator).
pub fn run_increments(run: &ModelRun, perspective: Perspective) -> Result<Vec<SubgroupIncrement>> {
    if run.strategies.len() != 2 {
        return Err(Error::NotPairwise(run.strategies.len()));
    }
    let new = 1 - run.comparator;
    Ok(run
        .subgroups
        .iter()
        .map(|g| {
            let d = g.strategies[new]
                .ledger
                .discounted
                .sub(&g.strategies[run.comparator].ledger.discounted);
            SubgroupIncrement {
                name: g.name.clone(),
                population_share: g.share,
                delta_qalys: d.qalys,
                delta_cost: d.cost(perspective),
            }
        })
        .collect())
}

/// Per-subgroup increments of one PSA iteration.
pub fn bundle_increments(bundle: &PsaBundle, iteration: usize, perspective: Perspective) -> Result<Vec<SubgroupIncrement>> {
    Ok(bundle
        .subgroup_increments(iteration)?
        .into_iter()
        .zip(&bundle.subgroups)
        .map(|(d, g)| SubgroupIncrement {
            name: g.name.clone(),
            population_share: g.population_share,
            delta_qalys: d.qalys,
            delta_cost: d.cost(perspective),
        })
        .collect())
}

/// Atkinson inequality index `1 − EDE/μ` of positive `levels` with
/// population `shares` at aversion `epsilon`.
pub fn atkinson_index(levels: &[f64], shares: &[f64], epsilon: f64) -> Result<f64> {
    if levels.len() != shares.len() || levels.is_empty() {
        return Err(Error::Dimension(format!(
            "{} levels with {} shares",
            levels.len(),
            shares.len()
        )));
    }
    if levels.iter().any(|h| !(*h > 0.0)) {
        return Err(Error::InvalidInput(
            "Atkinson index needs positive health levels".into(),
        ));
    }
    let total: f64 = shares.iter().sum();
    let mean = levels.iter().zip(shares).map(|(h, s)| s * h).sum::<f64>() / total;
    let ede = if (epsilon - 1.0).abs() < 1e-12 {
        (levels.iter().zip(shares).map(|(h, s)| s * h.ln()).sum::<f64>() / total).exp()
    } else {
        let k = 1.0 - epsilon;
        (levels.iter().zip(shares).map(|(h, s)| s * h.powf(k)).sum::<f64>() / total).powf(1.0 / k)
    };
    Ok(1.0 - ede / mean)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquityPlanePoint {
    pub net_health_benefit: f64,
    pub equity_impact: f64,
}

/// Equity impact and net health benefit for one set of subgroup outcomes.
///
/// Health levels are the subgroups' discounted QALYs under each arm; the
/// impact is the comparator-arm Atkinson index minus the intervention-arm
/// index, so positive values mean inequality fell.
pub fn equity_point(
    comparator_qalys: &[f64],
    intervention_qalys: &[f64],
    increments: &[SubgroupIncrement],
    wtp: f64,
    epsilon: f64,
) -> Result<EquityPlanePoint> {
    let shares: Vec<f64> = increments.iter().map(|g| g.population_share).collect();
    let before = atkinson_index(comparator_qalys, &shares, epsilon)?;
    let after = atkinson_index(intervention_qalys, &shares, epsilon)?;
    let net_health_benefit = increments
        .iter()
        .map(|g| g.population_share * (g.delta_qalys - g.delta_cost / wtp))
        .sum();
    Ok(EquityPlanePoint {
        net_health_benefit,
        equity_impact: before - after,
    })
}

/// One equity-plane point per PSA iteration.
pub fn equity_plane(
    bundle: &PsaBundle,
    wtp: f64,
    epsilon: f64,
    perspective: Perspective,
) -> Result<Vec<EquityPlanePoint>> {
    if bundle.subgroups.len() < 2 {
        return Err(Error::SingleSubgroup);
    }
    if !(wtp > 0.0) {
        return Err(Error::InvalidInput(
            "net health benefit needs a positive willingness to pay".into(),
        ));
    }
    let new = bundle.intervention()?;
    (0..bundle.iterations())
        .map(|i| {
            let qalys = |s: usize| -> Vec<f64> { bundle.outcomes[i][s].iter().map(|c| c.qalys).collect() };
            let inc = bundle_increments(bundle, i, perspective)?;
            equity_point(&qalys(bundle.comparator), &qalys(new), &inc, wtp, epsilon)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquityPlaneSummary {
    pub mean_net_health_benefit: f64,
    pub mean_equity_impact: f64,
    /// Share of points with both coordinates positive.
    pub win_win: f64,
    pub points: usize,
}

impl EquityPlaneSummary {
    pub fn of(points: &[EquityPlanePoint]) -> Self {
        let n = points.len().max(1) as f64;
        EquityPlaneSummary {
            mean_net_health_benefit: points.iter().map(|p| p.net_health_benefit).sum::<f64>() / n,
            mean_equity_impact: points.iter().map(|p| p.equity_impact).sum::<f64>() / n,
            win_win: points
                .iter()
                .filter(|p| p.net_health_benefit > 0.0 && p.equity_impact > 0.0)
                .count() as f64
                / n,
            points: points.len(),
        }
    }
}

/// Writes `equity_plane.csv`.
pub fn write_equity_plane_csv<W: Write>(points: &[EquityPlanePoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iteration", "net_health_benefit", "equity_impact"])?;
    for (i, p) in points.iter().enumerate() {
        w.write_record([
            i.to_string(),
            p.net_health_benefit.to_string(),
            p.equity_impact.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("equity_plane.csv", e))?;
    Ok(())
}
