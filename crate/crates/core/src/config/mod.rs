//! Declarative model definition.
//!
//! A [`ModelSpec`] is read from YAML, validated as a whole (every violated
//! constraint is reported, not just the first) and is immutable afterwards.
//! Parameter paths (`states.Sick.utility`,
//! `strategies.New.transition_matrix.Healthy`, ...) address the scalar and
//! row-valued quantities that subgroups override and PSA distributions perturb.

mod path;
mod validate;

use std::fmt;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::cea::Perspective;
use crate::error::{Error, Result};

pub use path::{Domain, ParameterPath, StateField};
pub use validate::{Diagnostic, Severity, ValidationReport};

/// Tolerance for probability vectors and population shares.
pub const STOCHASTIC_TOL: f64 = 1e-9;

fn default_one() -> f64 {
    1.0
}

fn default_discount_rate() -> f64 {
    0.03
}

fn default_epsilon() -> f64 {
    0.5
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HealthState {
    pub name: String,
    #[serde(default)]
    pub utility: f64,
    #[serde(default)]
    pub cost_direct_medical: f64,
    #[serde(default)]
    pub cost_productivity: f64,
    #[serde(default)]
    pub cost_out_of_pocket: f64,
    #[serde(default)]
    pub is_absorbing: bool,
    /// Allows an absorbing state to carry nonzero utility or costs
    /// (e.g. a one-off death cost). Reported as a validation warning.
    #[serde(default, skip_serializing_if = "is_false")]
    pub absorbing_override: bool,
}

impl HealthState {
    pub fn field(&self, field: StateField) -> f64 {
        match field {
            StateField::Utility => self.utility,
            StateField::CostDirectMedical => self.cost_direct_medical,
            StateField::CostProductivity => self.cost_productivity,
            StateField::CostOutOfPocket => self.cost_out_of_pocket,
        }
    }

    pub fn field_mut(&mut self, field: StateField) -> &mut f64 {
        match field {
            StateField::Utility => &mut self.utility,
            StateField::CostDirectMedical => &mut self.cost_direct_medical,
            StateField::CostProductivity => &mut self.cost_productivity,
            StateField::CostOutOfPocket => &mut self.cost_out_of_pocket,
        }
    }

    pub(crate) fn has_nonzero_values(&self) -> bool {
        self.utility != 0.0
            || self.cost_direct_medical != 0.0
            || self.cost_productivity != 0.0
            || self.cost_out_of_pocket != 0.0
    }
}

/// Payer component a cost is booked to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostComponent {
    #[default]
    DirectMedical,
    Productivity,
    OutOfPocket,
}

impl CostComponent {
    pub const ALL: [CostComponent; 3] = [
        CostComponent::DirectMedical,
        CostComponent::Productivity,
        CostComponent::OutOfPocket,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CostComponent::DirectMedical => "direct_medical",
            CostComponent::Productivity => "productivity",
            CostComponent::OutOfPocket => "out_of_pocket",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Strategy {
    pub name: String,
    #[serde(default)]
    pub is_comparator: bool,
    #[serde(default)]
    pub one_time_cost: f64,
    #[serde(default)]
    pub one_time_cost_component: CostComponent,
    /// One row per origin state, keyed by state name, entries in state order.
    pub transition_matrix: IndexMap<String, Vec<f64>>,
}

impl Strategy {
    /// Rows in the order of `states`. Missing rows come back as `None`.
    pub fn ordered_rows(&self, states: &[HealthState]) -> Option<Vec<Vec<f64>>> {
        states
            .iter()
            .map(|s| self.transition_matrix.get(&s.name).cloned())
            .collect()
    }
}

/// A scalar or row-valued parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Scalar(f64),
    Row(Vec<f64>),
}

impl ParamValue {
    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            ParamValue::Scalar(v) => Some(*v),
            ParamValue::Row(_) => None,
        }
    }

    pub fn as_row(&self) -> Option<&[f64]> {
        match self {
            ParamValue::Scalar(_) => None,
            ParamValue::Row(r) => Some(r),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Subgroup {
    pub name: String,
    pub population_share: f64,
    pub baseline_health: f64,
    #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
    pub parameter_overrides: IndexMap<String, ParamValue>,
}

/// Name of the subgroup used when a config declares none.
pub const TOTAL_POPULATION: &str = "total";

/// Parameter distribution families available for PSA.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Distribution {
    Beta { alpha: f64, beta: f64 },
    Gamma { shape: f64, scale: f64 },
    Normal { mean: f64, sd: f64 },
    Lognormal { meanlog: f64, sdlog: f64 },
    Uniform { low: f64, high: f64 },
    /// Concentration = base row x `precision`.
    DirichletRow { precision: f64 },
}

impl Distribution {
    pub fn kind(&self) -> &'static str {
        match self {
            Distribution::Beta { .. } => "beta",
            Distribution::Gamma { .. } => "gamma",
            Distribution::Normal { .. } => "normal",
            Distribution::Lognormal { .. } => "lognormal",
            Distribution::Uniform { .. } => "uniform",
            Distribution::DirichletRow { .. } => "dirichlet-row",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    pub target: String,
    #[serde(flatten)]
    pub distribution: Distribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Discount {
    #[serde(default = "default_discount_rate")]
    pub costs: f64,
    #[serde(default = "default_discount_rate")]
    pub effects: f64,
}

impl Default for Discount {
    fn default() -> Self {
        Discount {
            costs: 0.03,
            effects: 0.03,
        }
    }
}

/// `H_ref` for the equity weights: a fixed level or the share-weighted
/// mean of subgroup baseline health.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "ReferenceRepr", into = "ReferenceRepr")]
pub enum ReferenceHealth {
    #[default]
    PopulationMean,
    Value(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ReferenceRepr {
    Value(f64),
    Keyword(String),
}

impl TryFrom<ReferenceRepr> for ReferenceHealth {
    type Error = String;

    fn try_from(r: ReferenceRepr) -> std::result::Result<Self, String> {
        match r {
            ReferenceRepr::Value(v) => Ok(ReferenceHealth::Value(v)),
            ReferenceRepr::Keyword(k) if k == "population-mean" => {
                Ok(ReferenceHealth::PopulationMean)
            }
            ReferenceRepr::Keyword(k) => Err(format!(
                "reference_health must be a number or \"population-mean\", got \"{k}\""
            )),
        }
    }
}

impl From<ReferenceHealth> for ReferenceRepr {
    fn from(r: ReferenceHealth) -> Self {
        match r {
            ReferenceHealth::PopulationMean => ReferenceRepr::Keyword("population-mean".into()),
            ReferenceHealth::Value(v) => ReferenceRepr::Value(v),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProductivityMethod {
    #[default]
    HumanCapital,
    FrictionCost,
}

fn default_iterations() -> usize {
    1000
}

fn default_seed() -> u64 {
    20_240_601
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsaSettings {
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub distributions: Vec<DistributionSpec>,
}

impl Default for PsaSettings {
    fn default() -> Self {
        PsaSettings {
            iterations: default_iterations(),
            seed: default_seed(),
            distributions: Vec::new(),
        }
    }
}

/// Uptake as a flat fraction or a per-year schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Uptake {
    Flat(f64),
    Schedule(Vec<f64>),
}

impl Uptake {
    /// Uptake applied in `year` (1-based).
    pub fn in_year(&self, year: usize) -> f64 {
        match self {
            Uptake::Flat(u) => *u,
            Uptake::Schedule(s) => s[year - 1],
        }
    }
}

fn default_bia_years() -> u32 {
    5
}

fn default_bia_perspective() -> Perspective {
    Perspective::HealthSystem
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetImpactSpec {
    pub eligible_population: f64,
    pub uptake: Uptake,
    #[serde(default = "default_bia_years")]
    pub horizon_years: u32,
    #[serde(default)]
    pub discounting: bool,
    #[serde(default = "default_bia_perspective")]
    pub perspective: Perspective,
}

fn default_sobol_samples() -> usize {
    512
}

fn default_bootstrap() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensitivitySettings {
    /// Explicit one-way ranges `path: [low, high]`. When empty, every scalar
    /// PSA target is varied by +/-20% of its base value.
    #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
    pub tornado_ranges: IndexMap<String, [f64; 2]>,
    #[serde(default = "default_sobol_samples")]
    pub sobol_base_samples: usize,
    #[serde(default = "default_bootstrap")]
    pub sobol_bootstrap: usize,
}

impl Default for SensitivitySettings {
    fn default() -> Self {
        SensitivitySettings {
            tornado_ranges: IndexMap::new(),
            sobol_base_samples: default_sobol_samples(),
            sobol_bootstrap: default_bootstrap(),
        }
    }
}

/// How `d_HS` is chosen inside the expected value of perspective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvopMode {
    /// Health-system decision recomputed in every iteration.
    #[default]
    PerIteration,
    /// Health-system decision fixed at its base-case value.
    FixedDecision,
}

fn default_ceac_max() -> f64 {
    150_000.0
}

fn default_ceac_points() -> usize {
    31
}

fn default_epsilon_grid() -> Vec<f64> {
    vec![0.0, 0.25, 0.5, 1.0, 2.0, 5.0, 10.9]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSettings {
    #[serde(default = "default_ceac_max")]
    pub ceac_max_wtp: f64,
    #[serde(default = "default_ceac_points")]
    pub ceac_points: usize,
    #[serde(default = "default_epsilon_grid")]
    pub epsilon_grid: Vec<f64>,
    #[serde(default)]
    pub evop_mode: EvopMode,
    /// Affected population for population EVPI. Falls back to the BIA
    /// eligible population, then to 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evpi_population: Option<f64>,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        AnalysisSettings {
            ceac_max_wtp: default_ceac_max(),
            ceac_points: default_ceac_points(),
            epsilon_grid: default_epsilon_grid(),
            evop_mode: EvopMode::default(),
            evpi_population: None,
        }
    }
}

impl AnalysisSettings {
    /// Evenly spaced WTP grid from 0 to `ceac_max_wtp`.
    pub fn ceac_grid(&self) -> Vec<f64> {
        let n = self.ceac_points.max(1);
        if n == 1 {
            return vec![0.0];
        }
        (0..n)
            .map(|i| self.ceac_max_wtp * i as f64 / (n - 1) as f64)
            .collect()
    }
}

/// Complete model definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub states: Vec<HealthState>,
    pub strategies: Vec<Strategy>,
    #[serde(default)]
    pub subgroups: Vec<Subgroup>,
    pub initial_distribution: Vec<f64>,
    pub horizon_cycles: usize,
    #[serde(default = "default_one")]
    pub cycle_length_years: f64,
    #[serde(default)]
    pub discount: Discount,
    pub wtp_threshold: f64,
    #[serde(default = "default_epsilon")]
    pub inequality_aversion: f64,
    #[serde(default)]
    pub reference_health: ReferenceHealth,
    #[serde(default)]
    pub productivity_method: ProductivityMethod,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub friction_period_years: Option<f64>,
    #[serde(default)]
    pub half_cycle: bool,
    #[serde(default)]
    pub psa: PsaSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bia: Option<BudgetImpactSpec>,
    #[serde(default)]
    pub sensitivity: SensitivitySettings,
    #[serde(default)]
    pub analysis: AnalysisSettings,
}

impl ModelSpec {
    /// Parses YAML without validating.
    pub fn from_yaml_str(text: &str, origin: &str) -> Result<ModelSpec> {
        let de = serde_yaml::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            let inner = e.into_inner();
            let message = if key.is_empty() || key == "." {
                inner.to_string()
            } else {
                format!("at key `{key}`: {inner}")
            };
            Error::Parse {
                path: origin.to_string(),
                message,
            }
        })
    }

    /// Parses and validates; warnings are logged, errors abort.
    pub fn from_yaml_validated(text: &str, origin: &str) -> Result<ModelSpec> {
        let spec = ModelSpec::from_yaml_str(text, origin)?;
        spec.check()?;
        Ok(spec)
    }

    pub fn to_yaml(&self) -> String {
        serde_yaml::to_string(self).expect("ModelSpec serializes to YAML")
    }

    /// Runs validation and converts errors into [`Error::Validation`].
    pub fn check(&self) -> Result<ValidationReport> {
        let report = self.validate();
        for w in report.warnings() {
            log::warn!("{w}");
        }
        if report.has_errors() {
            Err(Error::Validation(report))
        } else {
            Ok(report)
        }
    }

    pub fn validate(&self) -> ValidationReport {
        validate::validate(self)
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s.name == name)
    }

    pub fn strategy_index(&self, name: &str) -> Option<usize> {
        self.strategies.iter().position(|s| s.name == name)
    }

    pub fn strategy(&self, name: &str) -> Option<&Strategy> {
        self.strategies.iter().find(|s| s.name == name)
    }

    pub fn comparator_index(&self) -> Option<usize> {
        self.strategies.iter().position(|s| s.is_comparator)
    }

    pub fn state_names(&self) -> Vec<String> {
        self.states.iter().map(|s| s.name.clone()).collect()
    }

    /// Declared subgroups, or a single implicit whole-population group.
    pub fn effective_subgroups(&self) -> Vec<Subgroup> {
        if self.subgroups.is_empty() {
            vec![Subgroup {
                name: TOTAL_POPULATION.to_string(),
                population_share: 1.0,
                baseline_health: 1.0,
                parameter_overrides: IndexMap::new(),
            }]
        } else {
            self.subgroups.clone()
        }
    }

    pub fn get_param(&self, path: &ParameterPath) -> Result<ParamValue> {
        path.get(self)
    }

    pub fn set_param(&mut self, path: &ParameterPath, value: ParamValue) -> Result<()> {
        path.set(self, value)
    }

    /// Effective parameters for `subgroup`: the spec with the subgroup's
    /// overrides applied. `self` is left untouched.
    pub fn resolve_subgroup(&self, subgroup: &Subgroup) -> Result<ModelSpec> {
        let mut view = self.clone();
        for (raw, value) in &subgroup.parameter_overrides {
            let path = ParameterPath::parse(raw, self)?;
            path.set(&mut view, value.clone())?;
        }
        if let Some(diag) = subgroup_view_errors(&view, subgroup) {
            return Err(Error::Validation(diag));
        }
        Ok(view)
    }

    /// Content hash of the canonical JSON serialization.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let bytes = serde_json::to_vec(self).expect("ModelSpec serializes to JSON");
        hex::encode(Sha256::digest(bytes))
    }
}

/// Re-runs matrix and state validation on a merged subgroup view.
fn subgroup_view_errors(view: &ModelSpec, subgroup: &Subgroup) -> Option<ValidationReport> {
    let mut report = ValidationReport::default();
    validate::check_states(view, &mut report);
    validate::check_strategies(view, &mut report);
    if report.has_errors() {
        let prefix = format!("subgroups.{}", subgroup.name);
        Some(report.prefixed(&prefix))
    } else {
        None
    }
}

/// Reads, parses and validates a model configuration file.
pub fn load_model_spec(path: impl AsRef<Path>) -> Result<ModelSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ModelSpec::from_yaml_validated(&text, &path.display().to_string())
}

/// Free-function form of [`ModelSpec::resolve_subgroup`].
pub fn resolve_subgroup_spec(spec: &ModelSpec, subgroup: &Subgroup) -> Result<ModelSpec> {
    spec.resolve_subgroup(subgroup)
}

/// Formats a number without float noise: `0.9500000000000001` -> `0.95`.
pub(crate) fn fmt_num(v: f64) -> String {
    let s = format!("{:.10}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} states, {} strategies, {} subgroups, {} cycles",
            self.states.len(),
            self.strategies.len(),
            self.effective_subgroups().len(),
            self.horizon_cycles
        )
    }
}
