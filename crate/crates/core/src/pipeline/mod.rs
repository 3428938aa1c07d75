//! Stage orchestration, result files and the Markdown report.

mod bundle;
mod init;
mod report;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::bia::{budget_impact, cost_of_illness, write_bia_csv, write_coi_csv};
use crate::cea::{decide, icer, Perspective};
use crate::config::{load_model_spec, ModelSpec};
use crate::dcea::{
    atkinson_weights, equity_plane, equity_weighted_nmb, run_increments, unweighted_nmb,
    write_equity_plane_csv, EquityPlaneSummary,
};
use crate::error::{Error, Result};
use crate::markov::{run_model, ModelRun, OutcomeLedger};
use crate::psa::{ce_plane, ceac, delta_nmb_distribution, run_psa, CloudSummary, PsaBundle, SubgroupInfo};
use crate::sensitivity::{default_ranges, sobol_indices, tornado, write_sobol_csv, write_tornado_csv};
use crate::voi::{deterministic_vop, evop, evpi_summary, EvpiResult};

pub use bundle::{
    CePlaneSummary, DceaSection, DeterministicSection, Manifest, NmbEqPoint, PerspectiveResult,
    PsaSection, ResultsBundle, SensitivitySection, VoiSection, SCHEMA_VERSION,
};
pub use init::{init_project, DEMO_CONFIG, REFERENCE_CONFIG};
pub use report::{format_money, render_report};

/// Partial outputs live here until every stage has succeeded.
pub const QUARANTINE_DIR: &str = "quarantine";

pub const RESULTS_FILE: &str = "results.json";
pub const SAMPLES_FILE: &str = "psa_samples.csv";

/// The five pipeline stages, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ingestion,
    Simulation,
    Aggregation,
    Analysis,
    Reporting,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Ingestion => "ingestion",
            Stage::Simulation => "simulation",
            Stage::Aggregation => "aggregation",
            Stage::Analysis => "analysis",
            Stage::Reporting => "reporting",
        })
    }
}

fn in_stage<T>(stage: Stage, f: impl FnOnce() -> Result<T>) -> Result<T> {
    log::info!("{stage} stage");
    f().map_err(|e| Error::Stage {
        stage,
        source: Box::new(e),
    })
}

/// Which perspectives the per-perspective sections cover.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PerspectiveSelection {
    HealthSystem,
    Societal,
    #[default]
    Both,
}

impl PerspectiveSelection {
    pub fn perspectives(self) -> Vec<Perspective> {
        match self {
            PerspectiveSelection::HealthSystem => vec![Perspective::HealthSystem],
            PerspectiveSelection::Societal => vec![Perspective::Societal],
            PerspectiveSelection::Both => Perspective::BOTH.to_vec(),
        }
    }

    /// Perspective used for single-perspective analyses (equity plane,
    /// sensitivity): societal unless only the health system is selected.
    pub fn primary(self) -> Perspective {
        match self {
            PerspectiveSelection::HealthSystem => Perspective::HealthSystem,
            _ => Perspective::Societal,
        }
    }
}

impl FromStr for PerspectiveSelection {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "hs" | "health_system" => Ok(PerspectiveSelection::HealthSystem),
            "societal" => Ok(PerspectiveSelection::Societal),
            "both" => Ok(PerspectiveSelection::Both),
            _ => Err(format!("expected hs, societal or both, got `{s}`")),
        }
    }
}

/// Which files a run emits. `Json` writes `results.json`, `voi.json` and
/// the per-iteration samples it references; `Csv` writes every CSV table;
/// `All` writes both. `report.md` is always written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    Json,
    Csv,
    #[default]
    All,
}

impl OutputFormat {
    fn json(self) -> bool {
        matches!(self, OutputFormat::Json | OutputFormat::All)
    }

    fn csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::All)
    }
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            "all" => Ok(OutputFormat::All),
            _ => Err(format!("expected json, csv or all, got `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub perspectives: PerspectiveSelection,
    pub format: OutputFormat,
}

/// Command-line style overrides applied on top of a configuration.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SpecOverrides {
    pub iterations: Option<usize>,
    pub seed: Option<u64>,
    pub wtp: Option<f64>,
    pub epsilon: Option<f64>,
}

impl SpecOverrides {
    /// Applies the overrides and re-validates the result.
    pub fn apply(&self, spec: &mut ModelSpec) -> Result<()> {
        if let Some(n) = self.iterations {
            spec.psa.iterations = n;
        }
        if let Some(s) = self.seed {
            spec.psa.seed = s;
        }
        if let Some(w) = self.wtp {
            spec.wtp_threshold = w;
        }
        if let Some(e) = self.epsilon {
            spec.inequality_aversion = e;
        }
        spec.check().map(|_| ())
    }
}

/// Collects output files in the quarantine directory.
struct Staging {
    dir: PathBuf,
    files: Vec<String>,
}

impl Staging {
    fn create(&mut self, name: &str) -> Result<fs::File> {
        let path = self.dir.join(name);
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        self.files.push(name.to_string());
        Ok(file)
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn promote(self, output_dir: &Path) -> Result<()> {
        for name in &self.files {
            let to = output_dir.join(name);
            fs::rename(self.dir.join(name), &to).map_err(|e| Error::io(&to, e))?;
        }
        fs::remove_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))
    }
}

/// Loads `config`, applies `overrides` and runs the pipeline.
pub fn run_config_file(
    config: &Path,
    overrides: &SpecOverrides,
    output_dir: &Path,
    options: &RunOptions,
) -> Result<ResultsBundle> {
    let spec = in_stage(Stage::Ingestion, || {
        let mut spec = load_model_spec(config)?;
        overrides.apply(&mut spec)?;
        Ok(spec)
    })?;
    run_pipeline_with(&spec, output_dir, options)
}

/// Runs every stage with default options and writes all outputs.
pub fn run_analysis_pipeline(spec: &ModelSpec, output_dir: &Path) -> Result<ResultsBundle> {
    run_pipeline_with(spec, output_dir, &RunOptions::default())
}

/// Ingestion, simulation, aggregation, analysis and reporting, in order.
///
/// Files are staged in `output_dir/quarantine` and moved into `output_dir`
/// only when every stage succeeded; on failure the partial outputs stay in
/// quarantine and the error names the stage.
pub fn run_pipeline_with(spec: &ModelSpec, output_dir: &Path, options: &RunOptions) -> Result<ResultsBundle> {
    in_stage(Stage::Ingestion, || spec.check().map(|_| ()))?;
    let mut staging = in_stage(Stage::Ingestion, || {
        let dir = output_dir.join(QUARANTINE_DIR);
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Staging { dir, files: Vec::new() })
    })?;
    let perspectives = options.perspectives.perspectives();
    let primary = options.perspectives.primary();
    let wtp = spec.wtp_threshold;

    let (run, psa) = in_stage(Stage::Simulation, || {
        let run = run_model(spec)?;
        if run.strategies.len() != 2 {
            return Err(Error::NotPairwise(run.strategies.len()));
        }
        let psa = run_psa(spec)?;
        if options.format.csv() {
            for (k, name) in run.strategies.iter().enumerate() {
                let file = staging.create(&format!("trace_{}.csv", file_stem(name)))?;
                write_population_trace(spec, &run, k, file)?;
            }
        }
        if options.format.csv() || options.format.json() {
            psa.write_csv(staging.create(SAMPLES_FILE)?)?;
        }
        Ok((run, psa))
    })?;

    let (deterministic, psa_section) = in_stage(Stage::Aggregation, || {
        let deterministic = deterministic_section(spec, &run, &perspectives)?;
        let grid = spec.analysis.ceac_grid();
        let ceacs = perspectives
            .iter()
            .map(|&p| ceac(&psa, p, &grid))
            .collect::<Result<Vec<_>>>()?;
        if options.format.csv() {
            let mut w = csv::Writer::from_writer(staging.create("ceac.csv")?);
            let mut header = vec!["perspective".to_string(), "wtp".to_string()];
            header.extend(psa.strategies.iter().cloned());
            w.write_record(&header)?;
            for t in &ceacs {
                for (k, wtp) in t.wtp.iter().enumerate() {
                    let mut rec = vec![t.perspective.name().to_string(), wtp.to_string()];
                    rec.extend(t.probabilities[k].iter().map(|p| p.to_string()));
                    w.write_record(&rec)?;
                }
            }
            w.flush().map_err(|e| Error::io("ceac.csv", e))?;
        }
        let planes = perspectives
            .iter()
            .map(|&p| {
                Ok(CePlaneSummary {
                    perspective: p,
                    summary: CloudSummary::of(&ce_plane(&psa, p)?.points),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let delta_cloud = CloudSummary::of(&ce_plane(&psa, Perspective::Societal)?.delta_cloud);
        let section = PsaSection {
            iterations: psa.iterations(),
            ceac: ceacs,
            ce_plane: planes,
            delta_cloud,
            delta_nmb: delta_nmb_distribution(&psa, wtp)?,
            samples_csv: SAMPLES_FILE.to_string(),
        };
        Ok((deterministic, section))
    })?;

    let (dcea, voi, sensitivity, bia, coi) = in_stage(Stage::Analysis, || {
        let dcea = dcea_section(spec, &run, &psa, &perspectives, primary, options, &mut staging)?;
        let voi = voi_section(spec, &run, &psa, &perspectives)?;
        let sensitivity = sensitivity_section(spec, primary, options, &mut staging)?;
        let bia = spec
            .bia
            .as_ref()
            .map(|b| budget_impact(spec, b, b.perspective))
            .transpose()?;
        let coi = cost_of_illness(spec)?;
        if options.format.csv() {
            if let Some(t) = &bia {
                write_bia_csv(t, staging.create("bia.csv")?)?;
            }
            write_coi_csv(&coi, staging.create("coi.csv")?)?;
        }
        Ok((dcea, voi, sensitivity, bia, coi))
    })?;

    let bundle = in_stage(Stage::Reporting, || {
        let mut files = staging.files.clone();
        if options.format.json() {
            files.push(RESULTS_FILE.to_string());
            files.push("voi.json".to_string());
        }
        files.push("report.md".to_string());
        let bundle = ResultsBundle {
            schema_version: SCHEMA_VERSION.to_string(),
            manifest: Manifest {
                tool: env!("CARGO_PKG_NAME").to_string(),
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                spec_digest: spec.digest(),
                master_seed: spec.psa.seed,
                generated_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
                wtp,
                epsilon: spec.inequality_aversion,
                iterations: spec.psa.iterations,
                perspectives: perspectives.clone(),
                strategies: run.strategies.clone(),
                comparator: run.strategies[run.comparator].clone(),
                subgroups: psa.subgroups.clone(),
                files,
            },
            deterministic,
            psa: psa_section,
            dcea,
            voi,
            sensitivity,
            bia,
            coi,
        };
        if options.format.json() {
            staging.write(RESULTS_FILE, &bundle.to_json())?;
            staging.write("voi.json", &voi_json(&bundle))?;
        }
        staging.write("report.md", &render_report(&bundle))?;
        Ok(bundle)
    })?;
    in_stage(Stage::Reporting, || staging.promote(output_dir))?;
    Ok(bundle)
}

/// Strategy name made safe for a file name.
fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Share-weighted occupancy per cycle plus the undiscounted flows of the
/// accumulated cycles (`cycle, <states>, cost_direct_medical, ...`).
fn write_population_trace(spec: &ModelSpec, run: &ModelRun, k: usize, out: fs::File) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["cycle".to_string()];
    header.extend(spec.state_names());
    header.extend(
        ["cost_direct_medical", "cost_productivity", "cost_out_of_pocket", "qalys"]
            .iter()
            .map(|s| s.to_string()),
    );
    w.write_record(&header)?;
    let rows = spec.horizon_cycles + 1;
    let flows = run.population[k].per_cycle.as_deref().unwrap_or(&[]);
    for t in 0..rows {
        let mut rec = vec![t.to_string()];
        for j in 0..spec.states.len() {
            let occ: f64 = run
                .subgroups
                .iter()
                .map(|g| g.share * g.strategies[k].trace.at(t)[j])
                .sum();
            rec.push(occ.to_string());
        }
        match flows.get(t) {
            Some(c) => rec.extend(
                [c.direct_medical, c.productivity, c.out_of_pocket, c.qalys]
                    .iter()
                    .map(|v| v.to_string()),
            ),
            None => rec.extend(std::iter::repeat_n(String::new(), 4)),
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("trace", e))?;
    Ok(())
}

fn summary_ledger(l: &OutcomeLedger) -> OutcomeLedger {
    OutcomeLedger {
        discounted: l.discounted,
        undiscounted: l.undiscounted,
        per_cycle: None,
    }
}

fn deterministic_section(spec: &ModelSpec, run: &ModelRun, perspectives: &[Perspective]) -> Result<DeterministicSection> {
    let population: IndexMap<String, OutcomeLedger> = run
        .strategies
        .iter()
        .zip(&run.population)
        .map(|(s, l)| (s.clone(), summary_ledger(l)))
        .collect();
    let subgroups = run
        .subgroups
        .iter()
        .map(|g| {
            let by_strategy = g
                .strategies
                .iter()
                .map(|s| (s.strategy.clone(), summary_ledger(&s.ledger)))
                .collect();
            (g.name.clone(), by_strategy)
        })
        .collect();
    let comparator = &run.strategies[run.comparator];
    let new = 1 - run.comparator;
    let mut results = Vec::new();
    for &p in perspectives {
        results.push(PerspectiveResult {
            perspective: p,
            icer: icer(&run.population[run.comparator], &run.population[new], p),
            decision: decide(&population, comparator, spec.wtp_threshold, p)?,
        });
    }
    let hs = decide(&population, comparator, spec.wtp_threshold, Perspective::HealthSystem)?;
    let soc = decide(&population, comparator, spec.wtp_threshold, Perspective::Societal)?;
    let discordant = hs.chosen_strategy != soc.chosen_strategy;
    if discordant && results.len() == 2 {
        results[0].decision.discordant_with = Some(Perspective::Societal);
        results[1].decision.discordant_with = Some(Perspective::HealthSystem);
    }
    Ok(DeterministicSection {
        deterministic_vop: deterministic_vop(&population, comparator, spec.wtp_threshold)?,
        population,
        subgroups,
        perspectives: results,
        discordant,
    })
}

fn subgroup_infos(spec: &ModelSpec) -> Vec<SubgroupInfo> {
    spec.effective_subgroups()
        .into_iter()
        .map(|g| SubgroupInfo {
            name: g.name,
            population_share: g.population_share,
            baseline_health: g.baseline_health,
        })
        .collect()
}

fn dcea_section(
    spec: &ModelSpec,
    run: &ModelRun,
    psa: &PsaBundle,
    perspectives: &[Perspective],
    primary: Perspective,
    options: &RunOptions,
    staging: &mut Staging,
) -> Result<DceaSection> {
    let groups = subgroup_infos(spec);
    let epsilon = spec.inequality_aversion;
    let weights = atkinson_weights(&groups, epsilon, spec.reference_health)?;
    let mut grid = spec.analysis.epsilon_grid.clone();
    if !grid.contains(&epsilon) {
        grid.push(epsilon);
        grid.sort_by(f64::total_cmp);
    }
    let mut nmb_eq = Vec::new();
    for &p in perspectives {
        let increments = run_increments(run, p)?;
        for &e in &grid {
            let w = atkinson_weights(&groups, e, spec.reference_health)?;
            nmb_eq.push(NmbEqPoint {
                epsilon: e,
                perspective: p,
                equity_weighted_nmb: equity_weighted_nmb(&increments, &w, spec.wtp_threshold)?,
                unweighted_nmb: unweighted_nmb(&increments, spec.wtp_threshold),
            });
        }
    }
    let equity_plane = if groups.len() >= 2 && spec.wtp_threshold > 0.0 {
        let points = equity_plane(psa, spec.wtp_threshold, epsilon, primary)?;
        if options.format.csv() {
            write_equity_plane_csv(&points, staging.create("equity_plane.csv")?)?;
        }
        Some(EquityPlaneSummary::of(&points))
    } else {
        None
    };
    Ok(DceaSection {
        epsilon,
        weights,
        nmb_eq,
        equity_plane_perspective: primary,
        equity_plane,
    })
}

/// EVPPI parameter sets: each distribution target alone, plus all of them
/// together when there are several.
fn evppi_sets(spec: &ModelSpec) -> IndexMap<String, Vec<String>> {
    let targets: Vec<String> = spec.psa.distributions.iter().map(|d| d.target.clone()).collect();
    let mut sets: IndexMap<String, Vec<String>> =
        targets.iter().map(|t| (t.clone(), vec![t.clone()])).collect();
    if targets.len() > 1 {
        sets.insert("all".to_string(), targets);
    }
    sets
}

fn voi_section(spec: &ModelSpec, run: &ModelRun, psa: &PsaBundle, perspectives: &[Perspective]) -> Result<VoiSection> {
    let population = spec
        .analysis
        .evpi_population
        .or(spec.bia.as_ref().map(|b| b.eligible_population))
        .unwrap_or(0.0);
    let mut sets = evppi_sets(spec);
    let mut evpi = Vec::new();
    for &p in perspectives {
        // drop sets the sample is too small to support rather than failing
        sets.retain(|label, names| {
            match crate::voi::evppi(psa, names, spec.wtp_threshold, p) {
                Err(Error::RankDeficient { rows, columns, .. }) => {
                    log::warn!("EVPPI for `{label}` skipped: {columns} basis columns with {rows} iterations");
                    false
                }
                _ => true,
            }
        });
        let r: EvpiResult = evpi_summary(psa, spec.wtp_threshold, p, population, &sets)?;
        evpi.push(r);
    }
    let population_ledgers: IndexMap<String, OutcomeLedger> = run
        .strategies
        .iter()
        .cloned()
        .zip(run.population.iter().cloned())
        .collect();
    let comparator = &run.strategies[run.comparator];
    let loss = deterministic_vop(&population_ledgers, comparator, spec.wtp_threshold)?;
    let hs = decide(&population_ledgers, comparator, spec.wtp_threshold, Perspective::HealthSystem)?;
    let base_hs = run
        .strategies
        .iter()
        .position(|s| *s == hs.chosen_strategy)
        .expect("chosen strategy exists");
    let vop = evop(psa, spec.wtp_threshold, spec.analysis.evop_mode, base_hs, loss)?;
    Ok(VoiSection { evpi, vop })
}

fn sensitivity_section(
    spec: &ModelSpec,
    perspective: Perspective,
    options: &RunOptions,
    staging: &mut Staging,
) -> Result<SensitivitySection> {
    let ranges = if spec.sensitivity.tornado_ranges.is_empty() {
        default_ranges(spec)?
    } else {
        spec.sensitivity.tornado_ranges.clone()
    };
    let entries = tornado(spec, &ranges, spec.wtp_threshold, perspective)?;
    let sobol = if spec.psa.distributions.is_empty() {
        None
    } else {
        Some(sobol_indices(
            spec,
            spec.sensitivity.sobol_base_samples,
            spec.sensitivity.sobol_bootstrap,
            spec.wtp_threshold,
            perspective,
        )?)
    };
    if options.format.csv() {
        write_tornado_csv(&entries, staging.create("tornado.csv")?)?;
        if let Some(s) = &sobol {
            write_sobol_csv(s, staging.create("sobol.csv")?)?;
        }
    }
    Ok(SensitivitySection {
        perspective,
        tornado: entries,
        sobol,
    })
}

/// `voi.json`: the value-of-information headline numbers, keyed by
/// perspective where they depend on one.
fn voi_json(bundle: &ResultsBundle) -> String {
    let by_perspective = |f: &dyn Fn(&EvpiResult) -> serde_json::Value| -> serde_json::Value {
        bundle
            .voi
            .evpi
            .iter()
            .map(|r| (r.perspective.name().to_string(), f(r)))
            .collect::<serde_json::Map<_, _>>()
            .into()
    };
    let value = serde_json::json!({
        "wtp": bundle.manifest.wtp,
        "evpi_per_person": by_perspective(&|r| r.evpi_per_person.into()),
        "population_evpi": by_perspective(&|r| r.population_evpi.into()),
        "population_size": bundle.voi.evpi.first().map_or(0.0, |r| r.population_size),
        "evppi": by_perspective(&|r| serde_json::to_value(&r.evppi_by_parameter_set).expect("map serializes")),
        "evop": bundle.voi.vop.evop,
        "evop_mode": bundle.voi.vop.mode,
        "deterministic_vop": bundle.voi.vop.deterministic_loss,
        "discordance_probability": bundle.voi.vop.discordance_probability,
    });
    let mut s = serde_json::to_string_pretty(&value).expect("json serializes");
    s.push('\n');
    s
}
