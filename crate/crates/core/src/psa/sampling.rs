use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Beta, Distribution as _, Gamma, LogNormal, Normal, Uniform};

use crate::config::{Distribution, Domain, ModelSpec, ParamValue, ParameterPath};
use crate::error::{Error, Result};

/// Random stream for iteration `index`: a ChaCha20 generator keyed by
/// `master_seed` and positioned on stream `index`. Every iteration owns a
/// disjoint stream, so results do not depend on evaluation order.
pub fn iteration_rng(master_seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

fn invalid(kind: &str) -> Error {
    Error::InvalidInput(format!("invalid {kind} distribution parameters"))
}

/// One draw of `dist` for a parameter whose base value is `base`.
///
/// Scalar draws are clamped to `domain` (only normal draws can leave it).
/// Dirichlet rows use concentration `base · precision`; zero entries stay
/// zero and the row is renormalized so it sums to one.
pub fn sample_distribution<R: Rng + ?Sized>(
    dist: &Distribution,
    base: &ParamValue,
    domain: Domain,
    rng: &mut R,
) -> Result<ParamValue> {
    let scalar = match *dist {
        Distribution::Beta { alpha, beta } => Beta::new(alpha, beta)
            .map_err(|_| invalid("beta"))?
            .sample(rng),
        Distribution::Gamma { shape, scale } => Gamma::new(shape, scale)
            .map_err(|_| invalid("gamma"))?
            .sample(rng),
        Distribution::Normal { mean, sd } => Normal::new(mean, sd)
            .map_err(|_| invalid("normal"))?
            .sample(rng),
        Distribution::Lognormal { meanlog, sdlog } => LogNormal::new(meanlog, sdlog)
            .map_err(|_| invalid("lognormal"))?
            .sample(rng),
        Distribution::Uniform { low, high } => Uniform::new_inclusive(low, high)
            .map_err(|_| invalid("uniform"))?
            .sample(rng),
        Distribution::DirichletRow { precision } => {
            let row = base
                .as_row()
                .ok_or_else(|| Error::InvalidInput("dirichlet-row needs a row target".into()))?;
            return sample_dirichlet_row(row, precision, rng).map(ParamValue::Row);
        }
    };
    if !domain.is_scalar() {
        return Err(Error::InvalidInput(format!(
            "{} distribution cannot produce a transition row",
            dist.kind()
        )));
    }
    Ok(ParamValue::Scalar(domain.clamp(scalar)))
}

fn sample_dirichlet_row<R: Rng + ?Sized>(base: &[f64], precision: f64, rng: &mut R) -> Result<Vec<f64>> {
    let mut draws = Vec::with_capacity(base.len());
    for &p in base {
        let alpha = p * precision;
        if alpha > 0.0 {
            let g = Gamma::new(alpha, 1.0).map_err(|_| invalid("dirichlet-row"))?;
            draws.push(g.sample(rng));
        } else {
            draws.push(0.0);
        }
    }
    let total: f64 = draws.iter().sum();
    let mut row: Vec<f64> = draws.iter().map(|g| g / total).collect();
    // push the rounding residual into the largest entry so the sum is 1
    if let Some((largest, _)) = row
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
    {
        let rest: f64 = row
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != largest)
            .map(|(_, v)| v)
            .sum();
        row[largest] = 1.0 - rest;
    }
    let sum: f64 = row.iter().sum();
    if !total.is_finite()
        || total <= 0.0
        || row.iter().any(|p| !(0.0..=1.0).contains(p))
        || (sum - 1.0).abs() > 1e-12
    {
        return Err(Error::DegenerateRow {
            path: String::new(),
            detail: format!("draw {row:?} (concentration total {total})"),
        });
    }
    Ok(row)
}

/// Sampled values for every PSA distribution of a spec, in declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterAssignment {
    pub values: Vec<(ParameterPath, ParamValue)>,
}

impl ParameterAssignment {
    /// Copy of `spec` with the sampled values written in.
    pub fn apply(&self, spec: &ModelSpec) -> Result<ModelSpec> {
        let mut out = spec.clone();
        for (path, value) in &self.values {
            path.set(&mut out, value.clone())?;
        }
        Ok(out)
    }

    /// Values laid out like [`parameter_columns`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (_, v) in &self.values {
            match v {
                ParamValue::Scalar(x) => out.push(*x),
                ParamValue::Row(r) => out.extend(r),
            }
        }
        out
    }
}

/// Resolved PSA targets with their base values.
pub(crate) fn resolved_targets(spec: &ModelSpec) -> Result<Vec<(ParameterPath, ParamValue, &Distribution)>> {
    spec.psa
        .distributions
        .iter()
        .map(|d| {
            let path = ParameterPath::parse(&d.target, spec)?;
            let base = path.get(spec)?;
            Ok((path, base, &d.distribution))
        })
        .collect()
}

/// Column names of the sampled-parameter matrix: one per scalar target and
/// one per destination state for row targets (`<target>.<to_state>`).
pub fn parameter_columns(spec: &ModelSpec) -> Result<Vec<(String, Vec<String>)>> {
    spec.psa
        .distributions
        .iter()
        .map(|d| {
            let path = ParameterPath::parse(&d.target, spec)?;
            let cols = if path.domain().is_scalar() {
                vec![d.target.clone()]
            } else {
                spec.states
                    .iter()
                    .map(|s| format!("{}.{}", d.target, s.name))
                    .collect()
            };
            Ok((d.target.clone(), cols))
        })
        .collect()
}

/// One joint draw of all PSA distributions for `iteration_index`.
pub fn sample_parameters(spec: &ModelSpec, iteration_index: usize) -> Result<ParameterAssignment> {
    if iteration_index >= spec.psa.iterations {
        return Err(Error::InvalidInput(format!(
            "iteration index {iteration_index} outside [0, {})",
            spec.psa.iterations
        )));
    }
    let mut rng = iteration_rng(spec.psa.seed, iteration_index as u64);
    let mut values = Vec::new();
    for (path, base, dist) in resolved_targets(spec)? {
        let v = sample_distribution(dist, &base, path.domain(), &mut rng).map_err(|e| match e {
            Error::DegenerateRow { detail, .. } => Error::DegenerateRow {
                path: path.to_string(),
                detail,
            },
            other => other,
        })?;
        values.push((path, v));
    }
    Ok(ParameterAssignment { values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_mean_and_support() {
        let dist = Distribution::Beta {
            alpha: 2.0,
            beta: 2.0,
        };
        let mut rng = iteration_rng(7, 0);
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let v = sample_distribution(&dist, &ParamValue::Scalar(0.5), Domain::Unit, &mut rng)
                .unwrap()
                .as_scalar()
                .unwrap();
            assert!((0.0..=1.0).contains(&v));
            sum += v;
        }
        assert!((sum / n as f64 - 0.5).abs() < 0.005);
    }

    #[test]
    fn dirichlet_rows_sum_to_one_and_keep_zeros() {
        let dist = Distribution::DirichletRow { precision: 50.0 };
        let base = ParamValue::Row(vec![0.7, 0.0, 0.3]);
        let mut rng = iteration_rng(1, 3);
        for _ in 0..1000 {
            let ParamValue::Row(row) =
                sample_distribution(&dist, &base, Domain::StochasticRow, &mut rng).unwrap()
            else {
                panic!("expected a row")
            };
            assert_eq!(row[1], 0.0);
            assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn dirichlet_mean_follows_base_row() {
        let dist = Distribution::DirichletRow { precision: 200.0 };
        let base = ParamValue::Row(vec![0.6, 0.3, 0.1]);
        let mut rng = iteration_rng(11, 0);
        let n = 20_000;
        let mut acc = [0.0; 3];
        for _ in 0..n {
            let v = sample_distribution(&dist, &base, Domain::StochasticRow, &mut rng).unwrap();
            for (a, x) in acc.iter_mut().zip(v.as_row().unwrap()) {
                *a += x;
            }
        }
        for (a, b) in acc.iter().zip([0.6, 0.3, 0.1]) {
            assert!((a / n as f64 - b).abs() < 0.003);
        }
    }

    #[test]
    fn normal_draws_are_clamped_to_domain() {
        let dist = Distribution::Normal { mean: 0.0, sd: 10.0 };
        let mut rng = iteration_rng(5, 5);
        for _ in 0..200 {
            let v = sample_distribution(&dist, &ParamValue::Scalar(0.0), Domain::NonNegative, &mut rng)
                .unwrap()
                .as_scalar()
                .unwrap();
            assert!(v >= 0.0);
        }
    }

    #[test]
    fn vanishing_concentration_is_degenerate() {
        let dist = Distribution::DirichletRow { precision: 1e-300 };
        let base = ParamValue::Row(vec![0.5, 0.5]);
        let mut rng = iteration_rng(0, 0);
        let err = (0..50)
            .find_map(|_| sample_distribution(&dist, &base, Domain::StochasticRow, &mut rng).err());
        assert!(matches!(err, Some(Error::DegenerateRow { .. })));
    }

    #[test]
    fn streams_are_independent_of_order() {
        let a: Vec<u64> = (0..4).map(|i| iteration_rng(9, i).random()).collect();
        let b: Vec<u64> = (0..4).rev().map(|i| iteration_rng(9, i).random()).collect();
        assert_eq!(a, b.into_iter().rev().collect::<Vec<_>>());
        assert_ne!(a[0], a[1]);
    }
}
