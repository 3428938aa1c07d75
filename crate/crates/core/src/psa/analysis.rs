use serde::{Deserialize, Serialize};

use super::PsaBundle;
use crate::cea::{choose, Perspective};
use crate::error::{Error, Result};

/// Quantile levels reported for the ΔNMB distribution.
pub const QUANTILE_LEVELS: [f64; 5] = [0.025, 0.25, 0.5, 0.75, 0.975];

/// Probability of each strategy being optimal, per λ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CeacTable {
    pub perspective: Perspective,
    pub strategies: Vec<String>,
    pub wtp: Vec<f64>,
    /// `probabilities[k][s]` at `wtp[k]`.
    pub probabilities: Vec<Vec<f64>>,
}

impl CeacTable {
    pub fn probability(&self, k: usize, strategy: &str) -> Option<f64> {
        let s = self.strategies.iter().position(|n| n == strategy)?;
        self.probabilities.get(k).map(|row| row[s])
    }
}

/// Acceptability curve over `grid` using the shared tie rule.
pub fn ceac(bundle: &PsaBundle, perspective: Perspective, grid: &[f64]) -> Result<CeacTable> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("CEAC grid is empty".into()));
    }
    let n = bundle.iterations();
    if n == 0 {
        return Err(Error::InvalidInput("bundle has no iterations".into()));
    }
    let probabilities = grid
        .iter()
        .map(|&wtp| {
            let mut counts = vec![0usize; bundle.strategies.len()];
            for i in 0..n {
                counts[choose(&bundle.nmb_row(i, wtp, perspective), bundle.comparator)] += 1;
            }
            counts.iter().map(|&c| c as f64 / n as f64).collect()
        })
        .collect();
    Ok(CeacTable {
        perspective,
        strategies: bundle.strategies.clone(),
        wtp: grid.to_vec(),
        probabilities,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CePoint {
    pub delta_effect: f64,
    pub delta_cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CloudSummary {
    pub mean_delta_effect: f64,
    pub mean_delta_cost: f64,
    pub sd_delta_effect: f64,
    pub sd_delta_cost: f64,
    /// Share of points with ΔE > 0 and ΔC > 0 (north-east), etc.
    pub quadrant_ne: f64,
    pub quadrant_nw: f64,
    pub quadrant_se: f64,
    pub quadrant_sw: f64,
}

impl CloudSummary {
    pub fn of(points: &[CePoint]) -> CloudSummary {
        let n = points.len().max(1) as f64;
        let me = points.iter().map(|p| p.delta_effect).sum::<f64>() / n;
        let mc = points.iter().map(|p| p.delta_cost).sum::<f64>() / n;
        let sd = |f: fn(&CePoint) -> f64, m: f64| {
            if points.len() < 2 {
                0.0
            } else {
                (points.iter().map(|p| (f(p) - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            }
        };
        let share = |pred: fn(&CePoint) -> bool| points.iter().filter(|p| pred(p)).count() as f64 / n;
        CloudSummary {
            mean_delta_effect: me,
            mean_delta_cost: mc,
            sd_delta_effect: sd(|p| p.delta_effect, me),
            sd_delta_cost: sd(|p| p.delta_cost, mc),
            quadrant_ne: share(|p| p.delta_effect > 0.0 && p.delta_cost > 0.0),
            quadrant_nw: share(|p| p.delta_effect <= 0.0 && p.delta_cost > 0.0),
            quadrant_se: share(|p| p.delta_effect > 0.0 && p.delta_cost <= 0.0),
            quadrant_sw: share(|p| p.delta_effect <= 0.0 && p.delta_cost <= 0.0),
        }
    }
}

/// Incremental points for one perspective plus the societal-minus-health-
/// system difference cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CePlane {
    pub perspective: Perspective,
    pub points: Vec<CePoint>,
    pub delta_cloud: Vec<CePoint>,
}

pub fn ce_plane(bundle: &PsaBundle, perspective: Perspective) -> Result<CePlane> {
    let mut points = Vec::with_capacity(bundle.iterations());
    let mut delta_cloud = Vec::with_capacity(bundle.iterations());
    for i in 0..bundle.iterations() {
        let d = bundle.increment(i)?;
        points.push(CePoint {
            delta_effect: d.qalys,
            delta_cost: d.cost(perspective),
        });
        // QALYs do not depend on the perspective, so the effect gap is zero
        delta_cloud.push(CePoint {
            delta_effect: 0.0,
            delta_cost: d.cost(Perspective::Societal) - d.cost(Perspective::HealthSystem),
        });
    }
    Ok(CePlane {
        perspective,
        points,
        delta_cloud,
    })
}

/// Type-7 (linear interpolation) sample quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaNmbSummary {
    pub wtp: f64,
    #[serde(skip)]
    pub values: Vec<f64>,
    pub mean: f64,
    /// Values at [`QUANTILE_LEVELS`].
    pub quantiles: Vec<f64>,
}

/// Per-iteration `NMB_soc − NMB_HS` of the intervention increment.
pub fn delta_nmb_distribution(bundle: &PsaBundle, wtp: f64) -> Result<DeltaNmbSummary> {
    let values = (0..bundle.iterations())
        .map(|i| {
            let d = bundle.increment(i)?;
            let soc = d.qalys * wtp - d.cost(Perspective::Societal);
            let hs = d.qalys * wtp - d.cost(Perspective::HealthSystem);
            Ok(soc - hs)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean = values.iter().sum::<f64>() / values.len().max(1) as f64;
    let mut sorted = values.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(DeltaNmbSummary {
        wtp,
        mean,
        quantiles: QUANTILE_LEVELS.iter().map(|&q| quantile(&sorted, q)).collect(),
        values,
    })
}
