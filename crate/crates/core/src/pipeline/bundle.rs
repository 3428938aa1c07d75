use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::bia::{BudgetImpactTable, CoiTable};
use crate::cea::{DecisionRecord, IcerResult, Perspective};
use crate::dcea::{EquityPlaneSummary, EquityWeights};
use crate::markov::OutcomeLedger;
use crate::psa::{CeacTable, CloudSummary, DeltaNmbSummary, SubgroupInfo};
use crate::sensitivity::{SobolResult, TornadoEntry};
use crate::voi::{EvpiResult, VopResult};

/// Version of the `results.json` layout. Bumped on incompatible changes.
pub const SCHEMA_VERSION: &str = "1.0.0";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub tool_version: String,
    pub spec_digest: String,
    pub master_seed: u64,
    /// The only run-dependent field; everything else is a function of the
    /// configuration and seed.
    pub generated_at: String,
    pub wtp: f64,
    pub epsilon: f64,
    pub iterations: usize,
    pub perspectives: Vec<Perspective>,
    pub strategies: Vec<String>,
    pub comparator: String,
    pub subgroups: Vec<SubgroupInfo>,
    /// Files written next to `results.json`, relative to it.
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerspectiveResult {
    pub perspective: Perspective,
    pub icer: IcerResult,
    pub decision: DecisionRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeterministicSection {
    /// Share-weighted per-person outcomes by strategy.
    pub population: IndexMap<String, OutcomeLedger>,
    /// Per-person outcomes by subgroup, then strategy.
    pub subgroups: IndexMap<String, IndexMap<String, OutcomeLedger>>,
    pub perspectives: Vec<PerspectiveResult>,
    pub deterministic_vop: f64,
    pub discordant: bool,
}

impl DeterministicSection {
    pub fn for_perspective(&self, p: Perspective) -> Option<&PerspectiveResult> {
        self.perspectives.iter().find(|r| r.perspective == p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CePlaneSummary {
    pub perspective: Perspective,
    pub summary: CloudSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsaSection {
    pub iterations: usize,
    pub ceac: Vec<CeacTable>,
    pub ce_plane: Vec<CePlaneSummary>,
    /// Societal minus health-system cost increments.
    pub delta_cloud: CloudSummary,
    pub delta_nmb: DeltaNmbSummary,
    /// Per-iteration detail, relative to `results.json`.
    pub samples_csv: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmbEqPoint {
    pub epsilon: f64,
    pub perspective: Perspective,
    pub equity_weighted_nmb: f64,
    pub unweighted_nmb: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DceaSection {
    pub epsilon: f64,
    pub weights: EquityWeights,
    pub nmb_eq: Vec<NmbEqPoint>,
    pub equity_plane_perspective: Perspective,
    /// Absent when the model has a single subgroup.
    pub equity_plane: Option<EquityPlaneSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoiSection {
    pub evpi: Vec<EvpiResult>,
    pub vop: VopResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivitySection {
    pub perspective: Perspective,
    pub tornado: Vec<TornadoEntry>,
    /// Absent when the model has no PSA distributions.
    pub sobol: Option<SobolResult>,
}

/// Machine-readable result of one pipeline run (`results.json`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsBundle {
    pub schema_version: String,
    pub manifest: Manifest,
    pub deterministic: DeterministicSection,
    pub psa: PsaSection,
    pub dcea: DceaSection,
    pub voi: VoiSection,
    pub sensitivity: SensitivitySection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bia: Option<BudgetImpactTable>,
    pub coi: CoiTable,
}

impl ResultsBundle {
    pub fn from_json(text: &str) -> crate::Result<ResultsBundle> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("bundle serializes");
        s.push('\n');
        s
    }
}
