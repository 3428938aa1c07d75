//! ICER with dominance classification, net monetary benefit and the
//! per-perspective decision rule.

use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::config::CostComponent;
use crate::error::{Error, Result};
use crate::markov::OutcomeLedger;

/// NMB differences below this (currency units) are ties.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// |ΔE| below this makes the ICER undefined.
pub const EFFECT_TOLERANCE: f64 = 1e-12;

/// Accounting boundary of an analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Perspective {
    HealthSystem,
    Societal,
}

impl Perspective {
    pub const BOTH: [Perspective; 2] = [Perspective::HealthSystem, Perspective::Societal];

    pub fn included_components(self) -> &'static [CostComponent] {
        match self {
            Perspective::HealthSystem => &[CostComponent::DirectMedical],
            Perspective::Societal => &CostComponent::ALL,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Perspective::HealthSystem => "health_system",
            Perspective::Societal => "societal",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Perspective::HealthSystem => "Health System",
            Perspective::Societal => "Societal",
        }
    }
}

impl fmt::Display for Perspective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Perspective {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "health_system" | "hs" => Ok(Perspective::HealthSystem),
            "societal" => Ok(Perspective::Societal),
            _ => Err(format!("unknown perspective `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IcerClass {
    Icer { value: f64 },
    Dominant,
    Dominated,
    ExtendedTie,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcerResult {
    pub delta_cost: f64,
    pub delta_effect: f64,
    pub classification: IcerClass,
}

impl IcerResult {
    pub fn icer_value(&self) -> Option<f64> {
        match self.classification {
            IcerClass::Icer { value } => Some(value),
            _ => None,
        }
    }

    /// Raw ΔC/ΔE whenever ΔE is nonzero, including dominance cases. Only
    /// meant for display; the classification is authoritative.
    pub fn display_ratio(&self) -> Option<f64> {
        (self.delta_effect.abs() >= EFFECT_TOLERANCE).then(|| self.delta_cost / self.delta_effect)
    }
}

/// Classifies an increment (ΔC, ΔE).
pub fn classify(delta_cost: f64, delta_effect: f64) -> IcerResult {
    // a vanishing ΔE is a tie whatever the sign of ΔC
    let classification = if delta_effect.abs() < EFFECT_TOLERANCE {
        IcerClass::ExtendedTie
    } else if delta_cost <= 0.0 && delta_effect > 0.0 {
        IcerClass::Dominant
    } else if delta_cost >= 0.0 && delta_effect < 0.0 {
        IcerClass::Dominated
    } else {
        IcerClass::Icer {
            value: delta_cost / delta_effect,
        }
    };
    IcerResult {
        delta_cost,
        delta_effect,
        classification,
    }
}

/// Incremental cost-effectiveness of `new` against `comparator`.
pub fn icer(comparator: &OutcomeLedger, new: &OutcomeLedger, perspective: Perspective) -> IcerResult {
    classify(
        new.cost(perspective) - comparator.cost(perspective),
        new.qalys() - comparator.qalys(),
    )
}

/// `E · λ − C` with the perspective's cost.
pub fn nmb(ledger: &OutcomeLedger, wtp: f64, perspective: Perspective) -> f64 {
    ledger.qalys() * wtp - ledger.cost(perspective)
}

/// Index of the NMB-maximizing option; anything within
/// [`TIE_TOLERANCE`] of the comparator loses to the comparator.
pub fn choose(nmbs: &[f64], comparator: usize) -> usize {
    let mut best = comparator;
    for (i, v) in nmbs.iter().enumerate() {
        if *v > nmbs[best] {
            best = i;
        }
    }
    if (nmbs[best] - nmbs[comparator]).abs() < TIE_TOLERANCE {
        comparator
    } else {
        best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub wtp: f64,
    pub perspective: Perspective,
    pub chosen_strategy: String,
    /// True when the chosen strategy is not the comparator.
    pub accepts_intervention: bool,
    pub nmb_per_strategy: IndexMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discordant_with: Option<Perspective>,
}

impl DecisionRecord {
    pub fn verdict(&self) -> &'static str {
        if self.accepts_intervention {
            "Accept"
        } else {
            "Reject"
        }
    }
}

/// Chooses the strategy with the highest NMB under `perspective`.
pub fn decide(
    ledgers: &IndexMap<String, OutcomeLedger>,
    comparator: &str,
    wtp: f64,
    perspective: Perspective,
) -> Result<DecisionRecord> {
    if ledgers.len() < 2 {
        return Err(Error::InvalidInput(
            "a decision needs at least two strategies".into(),
        ));
    }
    let comparator_idx = ledgers
        .get_index_of(comparator)
        .ok_or_else(|| Error::InvalidInput(format!("comparator `{comparator}` not among ledgers")))?;
    let nmb_per_strategy: IndexMap<String, f64> = ledgers
        .iter()
        .map(|(k, l)| (k.clone(), nmb(l, wtp, perspective)))
        .collect();
    let values: Vec<f64> = nmb_per_strategy.values().copied().collect();
    let chosen = choose(&values, comparator_idx);
    Ok(DecisionRecord {
        wtp,
        perspective,
        chosen_strategy: ledgers.get_index(chosen).expect("index in range").0.clone(),
        accepts_intervention: chosen != comparator_idx,
        nmb_per_strategy,
        discordant_with: None,
    })
}

/// Decides under both perspectives and marks discordance on each record.
pub fn decide_both(
    ledgers: &IndexMap<String, OutcomeLedger>,
    comparator: &str,
    wtp: f64,
) -> Result<(DecisionRecord, DecisionRecord)> {
    let mut hs = decide(ledgers, comparator, wtp, Perspective::HealthSystem)?;
    let mut soc = decide(ledgers, comparator, wtp, Perspective::Societal)?;
    if hs.chosen_strategy != soc.chosen_strategy {
        hs.discordant_with = Some(Perspective::Societal);
        soc.discordant_with = Some(Perspective::HealthSystem);
    }
    Ok((hs, soc))
}
