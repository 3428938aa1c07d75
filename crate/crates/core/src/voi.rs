//! Value of information (EVPI, population EVPI, EVPPI) and the value of
//! perspective (deterministic discordance loss and its expectation).

use indexmap::IndexMap;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cea::{choose, decide, nmb, Perspective};
use crate::config::EvopMode;
use crate::error::{Error, Result};
use crate::markov::OutcomeLedger;
use crate::psa::PsaBundle;

/// `E[max_d NMB] − max_d E[NMB]` over the rows of an `N × strategies`
/// matrix, with the shared tie rule; never negative.
pub fn evpi_from_matrix(nmb: &[Vec<f64>], comparator: usize) -> Result<f64> {
    let n = nmb.len();
    if n == 0 {
        return Err(Error::InvalidInput("EVPI needs at least one iteration".into()));
    }
    let strategies = nmb[0].len();
    let mut means = vec![0.0; strategies];
    let mut perfect = 0.0;
    for row in nmb {
        perfect += row[choose(row, comparator)];
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    perfect /= n as f64;
    for m in &mut means {
        *m /= n as f64;
    }
    let current = means[choose(&means, comparator)];
    Ok((perfect - current).max(0.0))
}

pub fn evpi(bundle: &PsaBundle, wtp: f64, perspective: Perspective) -> Result<f64> {
    evpi_from_matrix(&bundle.nmb_matrix(wtp, perspective), bundle.comparator)
}

pub fn population_evpi(evpi_per_person: f64, population: f64) -> f64 {
    evpi_per_person * population
}

/// Degree-2 polynomial basis with interactions over standardized columns:
/// intercept, `z_j`, and `z_j · z_k` for `j ≤ k`. Constant columns are
/// dropped first.
pub fn quadratic_basis(columns: &[Vec<f64>]) -> DMatrix<f64> {
    let n = columns.first().map_or(0, Vec::len);
    let z: Vec<Vec<f64>> = columns
        .iter()
        .filter_map(|c| {
            let mean = c.iter().sum::<f64>() / n as f64;
            let sd = (c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
            (sd > 0.0 && sd.is_finite()).then(|| c.iter().map(|v| (v - mean) / sd).collect())
        })
        .collect();
    let k = z.len();
    let p = 1 + k + k * (k + 1) / 2;
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        x[(i, 0)] = 1.0;
        let mut col = 1;
        for zj in &z {
            x[(i, col)] = zj[i];
            col += 1;
        }
        for j in 0..k {
            for l in j..k {
                x[(i, col)] = z[j][i] * z[l][i];
                col += 1;
            }
        }
    }
    x
}

/// Least-squares fitted values of `y` on `x`; a rank-deficient design is an
/// error rather than a silent pseudo-inverse.
pub fn fitted_values(x: &DMatrix<f64>, y: &[f64]) -> Result<Vec<f64>> {
    let (rows, columns) = x.shape();
    let svd = x.clone().svd(true, true);
    let largest = svd.singular_values.max();
    let tol = rows.max(columns) as f64 * f64::EPSILON * largest;
    let rank = svd.rank(tol);
    if rank < columns {
        return Err(Error::RankDeficient { rows, columns, rank });
    }
    let beta = svd
        .solve(&DVector::from_column_slice(y), tol)
        .map_err(|e| Error::InvalidInput(format!("regression solve failed: {e}")))?;
    Ok((x * beta).iter().copied().collect())
}

/// Single-loop regression EVPPI: each strategy's NMB increment over the
/// comparator is regressed on the basis built from `columns` (`P` vectors of
/// length `N`); the fitted increments replace the raw ones in the EVPI
/// formula. Clamped at 0.
pub fn evppi_from_matrix(nmb: &[Vec<f64>], comparator: usize, columns: &[Vec<f64>]) -> Result<f64> {
    let n = nmb.len();
    if n == 0 || columns.is_empty() {
        return Err(Error::InvalidInput(
            "EVPPI needs iterations and a nonempty parameter subset".into(),
        ));
    }
    if columns.iter().any(|c| c.len() != n) {
        return Err(Error::Dimension("parameter columns and NMB rows differ in length".into()));
    }
    let x = quadratic_basis(columns);
    let strategies = nmb[0].len();
    let mut fitted = vec![vec![0.0; strategies]; n];
    for s in (0..strategies).filter(|&s| s != comparator) {
        let y: Vec<f64> = nmb.iter().map(|row| row[s] - row[comparator]).collect();
        for (row, v) in fitted.iter_mut().zip(fitted_values(&x, &y)?) {
            row[s] = v;
        }
    }
    evpi_from_matrix(&fitted, comparator)
}

/// Columns of the named parameters. A distribution target stands for its
/// whole group; for transition rows the last varying entry is left out
/// because the entries sum to one.
pub fn subset_columns(bundle: &PsaBundle, names: &[String]) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::new();
    for name in names {
        let mut cols = bundle
            .columns_for(name)?
            .iter()
            .map(|c| bundle.column(c))
            .collect::<Result<Vec<_>>>()?;
        if cols.len() > 1 {
            if let Some(last) = cols.iter().rposition(|c| c.iter().any(|v| *v != c[0])) {
                cols.remove(last);
            }
        }
        out.extend(cols);
    }
    Ok(out)
}

pub fn evppi(bundle: &PsaBundle, subset: &[String], wtp: f64, perspective: Perspective) -> Result<f64> {
    let columns = subset_columns(bundle, subset)?;
    evppi_from_matrix(&bundle.nmb_matrix(wtp, perspective), bundle.comparator, &columns)
}

/// Rough upper bound on the EVPPI a parameter without influence picks up
/// from overfitting: `sd(ΔNMB) · sqrt(p / N)` for a basis of `p` columns.
pub fn evppi_noise_floor(incremental_nmb_sd: f64, iterations: usize, basis_columns: usize) -> f64 {
    incremental_nmb_sd * (basis_columns as f64 / iterations as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvpiResult {
    pub wtp: f64,
    pub perspective: Perspective,
    pub evpi_per_person: f64,
    pub population_size: f64,
    pub population_evpi: f64,
    pub evppi_by_parameter_set: IndexMap<String, f64>,
}

/// EVPI plus EVPPI for each named parameter set.
pub fn evpi_summary(
    bundle: &PsaBundle,
    wtp: f64,
    perspective: Perspective,
    population: f64,
    parameter_sets: &IndexMap<String, Vec<String>>,
) -> Result<EvpiResult> {
    let per_person = evpi(bundle, wtp, perspective)?;
    let evppi_by_parameter_set = parameter_sets
        .iter()
        .map(|(label, names)| Ok((label.clone(), evppi(bundle, names, wtp, perspective)?)))
        .collect::<Result<_>>()?;
    Ok(EvpiResult {
        wtp,
        perspective,
        evpi_per_person: per_person,
        population_size: population,
        population_evpi: population_evpi(per_person, population),
        evppi_by_parameter_set,
    })
}

/// `max(0, NMB_soc(d*) − NMB_soc(d_HS))` with both decisions from
/// [`decide`] on one deterministic evaluation.
pub fn deterministic_vop(ledgers: &IndexMap<String, OutcomeLedger>, comparator: &str, wtp: f64) -> Result<f64> {
    let hs = decide(ledgers, comparator, wtp, Perspective::HealthSystem)?;
    let soc = decide(ledgers, comparator, wtp, Perspective::Societal)?;
    let at = |name: &str| nmb(&ledgers[name], wtp, Perspective::Societal);
    Ok((at(&soc.chosen_strategy) - at(&hs.chosen_strategy)).max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VopResult {
    pub wtp: f64,
    pub mode: EvopMode,
    pub deterministic_loss: f64,
    pub evop: f64,
    pub discordance_probability: f64,
    #[serde(skip)]
    pub per_iteration_losses: Vec<f64>,
}

/// Expected value of perspective. In per-iteration mode the health-system
/// decision is re-made for each draw; in fixed-decision mode it is the
/// base-case choice `base_hs_choice` throughout.
pub fn evop(
    bundle: &PsaBundle,
    wtp: f64,
    mode: EvopMode,
    base_hs_choice: usize,
    deterministic_loss: f64,
) -> Result<VopResult> {
    let n = bundle.iterations();
    if n == 0 {
        return Err(Error::InvalidInput("EVoP needs at least one iteration".into()));
    }
    let mut losses = Vec::with_capacity(n);
    let mut discordant = 0usize;
    for i in 0..n {
        let soc = bundle.nmb_row(i, wtp, Perspective::Societal);
        let best = choose(&soc, bundle.comparator);
        let hs = match mode {
            EvopMode::PerIteration => bundle.chosen(i, wtp, Perspective::HealthSystem),
            EvopMode::FixedDecision => base_hs_choice,
        };
        if hs != best {
            discordant += 1;
        }
        losses.push((soc[best] - soc[hs]).max(0.0));
    }
    Ok(VopResult {
        wtp,
        mode,
        deterministic_loss,
        evop: losses.iter().sum::<f64>() / n as f64,
        discordance_probability: discordant as f64 / n as f64,
        per_iteration_losses: losses,
    })
}
