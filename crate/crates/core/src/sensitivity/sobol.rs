use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::incremental_nmb;
use crate::cea::Perspective;
use crate::config::{ModelSpec, ParamValue, ParameterPath};
use crate::error::{Error, Result};
use crate::psa::{iteration_rng, sample_distribution};

/// Reported indices are clamped to this band; raw values are kept.
const REPORT_BAND: (f64, f64) = (-0.05, 1.05);

/// Stream reserved for bootstrap resampling.
const BOOTSTRAP_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolIndex {
    pub parameter: String,
    pub first_order: f64,
    pub total_order: f64,
    pub first_order_raw: f64,
    pub total_order_raw: f64,
    /// Bootstrap standard errors.
    pub first_order_noise: f64,
    pub total_order_noise: f64,
    /// Raw estimate fell outside `[0, 1]`: treat it as noise.
    pub out_of_range: bool,
}

impl SobolIndex {
    /// Larger of the two bootstrap standard errors.
    pub fn noise(&self) -> f64 {
        self.first_order_noise.max(self.total_order_noise)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolResult {
    pub sample_size: usize,
    pub bootstrap: usize,
    pub output_variance: f64,
    pub indices: Vec<SobolIndex>,
}

fn estimates(f_a: &[f64], f_b: &[f64], f_ab: &[Vec<f64>], rows: &[usize]) -> Vec<(f64, f64)> {
    let n = rows.len() as f64;
    let all = rows.iter().flat_map(|&j| [f_a[j], f_b[j]]);
    let mean = all.clone().sum::<f64>() / (2.0 * n);
    let var = all.map(|v| (v - mean).powi(2)).sum::<f64>() / (2.0 * n);
    f_ab.iter()
        .map(|f_i| {
            if var <= 0.0 {
                return (0.0, 0.0);
            }
            let cross: f64 = rows.iter().map(|&j| (f_b[j] - f_i[j]).powi(2)).sum();
            let own: f64 = rows.iter().map(|&j| (f_a[j] - f_i[j]).powi(2)).sum();
            ((var - cross / (2.0 * n)) / var, own / (2.0 * n) / var)
        })
        .collect()
}

fn std_dev(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Saltelli design with Jansen estimators.
///
/// `draw(k, rng)` samples factor `k`; `model` maps one full factor vector to
/// the output. Rows of the two base matrices use their own random streams,
/// so the design depends only on `seed`. First order is
/// `(V − Σ(f_B − f_ABi)² / 2N) / V`, total order `Σ(f_A − f_ABi)² / 2N / V`,
/// with `V` the variance of the pooled `f_A` and `f_B` outputs.
pub fn saltelli<T, D, M>(
    names: &[String],
    base_samples: usize,
    bootstrap: usize,
    seed: u64,
    draw: D,
    model: M,
) -> Result<SobolResult>
where
    T: Clone + Send + Sync,
    D: Fn(usize, &mut ChaCha20Rng) -> Result<T>,
    M: Fn(&[T]) -> Result<f64> + Sync,
{
    let k = names.len();
    if k == 0 {
        return Err(Error::InvalidInput(
            "Sobol analysis needs at least one uncertain parameter".into(),
        ));
    }
    if base_samples < 2 {
        return Err(Error::InvalidInput("Sobol analysis needs at least two base samples".into()));
    }
    let draw_row = |stream: u64| -> Result<Vec<T>> {
        let mut rng = iteration_rng(seed, stream);
        (0..k).map(|f| draw(f, &mut rng)).collect()
    };
    let mut a = Vec::with_capacity(base_samples);
    let mut b = Vec::with_capacity(base_samples);
    for j in 0..base_samples as u64 {
        a.push(draw_row(2 * j)?);
        b.push(draw_row(2 * j + 1)?);
    }
    let eval = |rows: &[Vec<T>], label: &str| -> Result<Vec<f64>> {
        rows.par_iter()
            .enumerate()
            .map(|(j, x)| {
                let y = model(x)?;
                if y.is_finite() {
                    Ok(y)
                } else {
                    Err(Error::NonFinite {
                        sample: j,
                        context: format!("{label} produced {y}"),
                    })
                }
            })
            .collect()
    };
    let f_a = eval(&a, "matrix A")?;
    let f_b = eval(&b, "matrix B")?;
    let f_ab = (0..k)
        .map(|i| {
            let mixed: Vec<Vec<T>> = a
                .iter()
                .zip(&b)
                .map(|(ra, rb)| {
                    let mut r = ra.clone();
                    r[i] = rb[i].clone();
                    r
                })
                .collect();
            eval(&mixed, &format!("matrix A with column `{}` from B", names[i]))
        })
        .collect::<Result<Vec<_>>>()?;

    let all_rows: Vec<usize> = (0..base_samples).collect();
    let point = estimates(&f_a, &f_b, &f_ab, &all_rows);
    let mut rng = iteration_rng(seed, BOOTSTRAP_STREAM);
    let mut boot: Vec<Vec<(f64, f64)>> = Vec::with_capacity(bootstrap);
    for _ in 0..bootstrap {
        let rows: Vec<usize> = (0..base_samples)
            .map(|_| rng.random_range(0..base_samples))
            .collect();
        boot.push(estimates(&f_a, &f_b, &f_ab, &rows));
    }
    let pooled: Vec<f64> = f_a.iter().chain(&f_b).copied().collect();
    let mean = pooled.iter().sum::<f64>() / pooled.len() as f64;
    let output_variance = pooled.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / pooled.len() as f64;
    let indices = names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let (s1, st) = point[i];
            let s1_boot: Vec<f64> = boot.iter().map(|e| e[i].0).collect();
            let st_boot: Vec<f64> = boot.iter().map(|e| e[i].1).collect();
            SobolIndex {
                parameter: name.clone(),
                first_order: s1.clamp(REPORT_BAND.0, REPORT_BAND.1),
                total_order: st.clamp(REPORT_BAND.0, REPORT_BAND.1),
                first_order_raw: s1,
                total_order_raw: st,
                first_order_noise: std_dev(&s1_boot),
                total_order_noise: std_dev(&st_boot),
                out_of_range: !(0.0..=1.0).contains(&s1) || !(0.0..=1.0).contains(&st),
            }
        })
        .collect();
    Ok(SobolResult {
        sample_size: base_samples,
        bootstrap,
        output_variance,
        indices,
    })
}

/// Sobol indices of the deterministic incremental NMB with respect to the
/// spec's PSA distributions; each distribution is one factor.
pub fn sobol_indices(
    spec: &ModelSpec,
    base_samples: usize,
    bootstrap: usize,
    wtp: f64,
    perspective: Perspective,
) -> Result<SobolResult> {
    let targets = spec
        .psa
        .distributions
        .iter()
        .map(|d| {
            let path = ParameterPath::parse(&d.target, spec)?;
            let base = path.get(spec)?;
            Ok((path, base, d.distribution.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    let names: Vec<String> = spec.psa.distributions.iter().map(|d| d.target.clone()).collect();
    saltelli(
        &names,
        base_samples,
        bootstrap,
        spec.psa.seed,
        |k, rng| {
            let (path, base, dist) = &targets[k];
            sample_distribution(dist, base, path.domain(), rng)
        },
        |values: &[ParamValue]| {
            let mut s = spec.clone();
            for ((path, _, _), v) in targets.iter().zip(values) {
                path.set(&mut s, v.clone())?;
            }
            incremental_nmb(&s, wtp, perspective)
        },
    )
}

/// Writes `sobol.csv`; `noise` is the larger bootstrap standard error.
pub fn write_sobol_csv<W: Write>(result: &SobolResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["parameter", "first_order", "total_order", "noise"])?;
    for i in &result.indices {
        w.write_record([
            i.parameter.clone(),
            i.first_order.to_string(),
            i.total_order.to_string(),
            i.noise().to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("sobol.csv", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(_: usize, rng: &mut ChaCha20Rng) -> Result<f64> {
        Ok(rng.random::<f64>())
    }

    fn names(k: usize) -> Vec<String> {
        (1..=k).map(|i| format!("x{i}")).collect()
    }

    #[test]
    fn single_input_takes_all_variance() {
        let r = saltelli(&names(1), 1024, 100, 3, uniform, |x: &[f64]| Ok(3.0 * x[0])).unwrap();
        let i = &r.indices[0];
        assert!((i.first_order - 1.0).abs() < 0.05, "{i:?}");
        assert!((i.total_order - 1.0).abs() < 0.05, "{i:?}");
    }

    #[test]
    fn constant_model_has_zero_indices() {
        let r = saltelli(&names(2), 64, 10, 3, uniform, |_: &[f64]| Ok(1.0)).unwrap();
        assert!(r.indices.iter().all(|i| i.first_order == 0.0 && i.total_order == 0.0));
    }

    #[test]
    fn non_finite_output_reports_sample() {
        let err = saltelli(&names(1), 64, 10, 3, uniform, |x: &[f64]| {
            Ok(if x[0] > 0.5 { f64::NAN } else { x[0] })
        })
        .unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
    }

    #[test]
    fn deterministic_for_a_seed() {
        let f = |x: &[f64]| Ok(x[0] * x[1] + x[0]);
        let a = saltelli(&names(2), 128, 20, 9, uniform, f).unwrap();
        let b = saltelli(&names(2), 128, 20, 9, uniform, f).unwrap();
        assert_eq!(a, b);
    }
}
