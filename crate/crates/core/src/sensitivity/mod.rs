//! One-way (tornado) and variance-based (Sobol) sensitivity of the
//! deterministic incremental NMB.

mod sobol;
mod tornado;

use crate::cea::Perspective;
use crate::config::ModelSpec;
use crate::error::{Error, Result};
use crate::markov::run_model_with;

pub use sobol::{saltelli, sobol_indices, write_sobol_csv, SobolIndex, SobolResult};
pub use tornado::{default_ranges, tornado, write_tornado_csv, TornadoEntry, DEFAULT_RELATIVE_RANGE};

/// Population NMB of the intervention minus the comparator at the spec's
/// current parameter values.
pub fn incremental_nmb(spec: &ModelSpec, wtp: f64, perspective: Perspective) -> Result<f64> {
    let run = run_model_with(spec, false)?;
    if run.strategies.len() != 2 {
        return Err(Error::NotPairwise(run.strategies.len()));
    }
    let new = &run.population[1 - run.comparator];
    let old = &run.population[run.comparator];
    Ok((new.qalys() - old.qalys()) * wtp - (new.cost(perspective) - old.cost(perspective)))
}
