//! Poisson deconvolution of diffusion-battery counts into a particle-size
//! distribution.
//!
//! The complete data is an m×J array `Z_ij` of independent Poisson counts of
//! size-class-`j` particles exiting port `i`, with `E(Z_ij) = P_0 w_ij f_j`.
//! Only the row totals `P_i` (plus the zero-port total `P_0`) are observed.
//! The E-step splits each row total multinomially across size classes; the
//! M-step rescales the column totals by the class weights
//! `W_j = Σ_i w_ij`, giving `f_j = N_j / (P_0 · W_j)`. The `f_j` stay
//! non-negative by construction, which is what defeats ordinary least squares
//! on this problem.

use crate::em::{run_em, EmConfig, EmModel, EmResult};
use crate::error::EmError;
use crate::simplex::SimplexVector;

/// Size classes with a column weight below this cannot be told apart from
/// absent classes and are rejected when the model is built.
pub const MIN_COLUMN_WEIGHT: f64 = 1e-12;

/// Observed port counts and the penetration kernel of the instrument.
#[derive(Debug, Clone, PartialEq)]
pub struct BatteryMeasurement {
    zero_port: u64,
    ports: Vec<u64>,
    kernel: Vec<Vec<f64>>,
}

impl BatteryMeasurement {
    /// Builds a measurement: `zero_port` is the unfiltered total count,
    /// `ports` the per-port counts `P_1..P_m`, and `kernel` the m×J matrix
    /// with `w_ij = P(size-j particle exits at port i)`.
    pub fn new(zero_port: u64, ports: Vec<u64>, kernel: Vec<Vec<f64>>) -> Result<Self, EmError> {
        if zero_port == 0 {
            return Err(EmError::DegenerateInput(
                "zero-port count must be positive".into(),
            ));
        }
        if ports.is_empty() {
            return Err(EmError::DegenerateInput("no port counts".into()));
        }
        if kernel.len() != ports.len() {
            return Err(EmError::ConstraintViolation(format!(
                "kernel has {} rows but there are {} port counts",
                kernel.len(),
                ports.len()
            )));
        }
        let n_classes = kernel[0].len();
        if n_classes == 0 {
            return Err(EmError::ConstraintViolation(
                "kernel has no size classes".into(),
            ));
        }
        for (i, row) in kernel.iter().enumerate() {
            if row.len() != n_classes {
                return Err(EmError::ConstraintViolation(format!(
                    "kernel row {} has {} entries, expected {}",
                    i + 1,
                    row.len(),
                    n_classes
                )));
            }
            for (j, &w) in row.iter().enumerate() {
                if !w.is_finite() || !(0.0..=1.0).contains(&w) {
                    return Err(EmError::ConstraintViolation(format!(
                        "kernel entry ({},{}) must lie in [0,1], got {w}",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        let meas = Self {
            zero_port,
            ports,
            kernel,
        };
        for (j, w) in meas.column_weights().iter().enumerate() {
            if *w <= 0.0 {
                return Err(EmError::ConstraintViolation(format!(
                    "size class {} has zero column weight; no port can see it",
                    j + 1
                )));
            }
        }
        Ok(meas)
    }

    pub fn zero_port(&self) -> u64 {
        self.zero_port
    }

    pub fn ports(&self) -> &[u64] {
        &self.ports
    }

    pub fn kernel(&self) -> &[Vec<f64>] {
        &self.kernel
    }

    pub fn n_ports(&self) -> usize {
        self.ports.len()
    }

    pub fn n_classes(&self) -> usize {
        self.kernel[0].len()
    }

    /// Column weights `W_j = Σ_i w_ij`: the probability that a size-`j`
    /// particle is counted at any port.
    pub fn column_weights(&self) -> Vec<f64> {
        let mut weights = vec![0.0; self.n_classes()];
        for row in &self.kernel {
            for (j, &w) in row.iter().enumerate() {
                weights[j] += w;
            }
        }
        weights
    }

    /// Total count over the filtered ports.
    pub fn total_port_count(&self) -> u64 {
        self.ports.iter().sum()
    }
}

/// Non-negative size-class frequencies. Not normalized during iteration;
/// [`normalize`] turns the result into proportions for reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeDistribution {
    f: Vec<f64>,
}

impl SizeDistribution {
    pub fn new(f: Vec<f64>) -> Result<Self, EmError> {
        if f.is_empty() {
            return Err(EmError::ConstraintViolation(
                "size distribution is empty".into(),
            ));
        }
        for (j, &v) in f.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(EmError::ConstraintViolation(format!(
                    "size class {} has an invalid frequency: {v}",
                    j + 1
                )));
            }
        }
        Ok(Self { f })
    }

    pub fn values(&self) -> &[f64] {
        &self.f
    }

    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }
}

/// Expected complete-data counts: the m×J array and its column totals.
#[derive(Debug, Clone, PartialEq)]
pub struct CompleteCountArray {
    z: Vec<Vec<f64>>,
    column_totals: Vec<f64>,
}

impl CompleteCountArray {
    pub fn z(&self) -> &[Vec<f64>] {
        &self.z
    }

    /// Column totals `N_j = Σ_i Z_ij`.
    pub fn column_totals(&self) -> &[f64] {
        &self.column_totals
    }
}

/// E-step: conditional on its observed row total, each port's counts split
/// multinomially, `Z_ij = P_i · w_ij f_j / Σ_k w_ik f_k`. Rows with `P_i = 0`
/// are zero; a positive row total with zero denominator is impossible data.
pub fn e_step(
    f: &SizeDistribution,
    meas: &BatteryMeasurement,
) -> Result<CompleteCountArray, EmError> {
    if f.len() != meas.n_classes() {
        return Err(EmError::ConstraintViolation(format!(
            "distribution has {} classes but kernel has {}",
            f.len(),
            meas.n_classes()
        )));
    }
    let n_classes = meas.n_classes();
    let mut z = Vec::with_capacity(meas.n_ports());
    let mut column_totals = vec![0.0; n_classes];
    for (i, (&count, row)) in meas.ports.iter().zip(&meas.kernel).enumerate() {
        let mut out = vec![0.0; n_classes];
        if count > 0 {
            let weighted: Vec<f64> = row.iter().zip(f.values()).map(|(w, fj)| w * fj).collect();
            let denom: f64 = weighted.iter().sum();
            if denom <= 0.0 {
                return Err(EmError::ImpossibleData(format!(
                    "port {} recorded {count} particles but has zero expected flux",
                    i + 1
                )));
            }
            for j in 0..n_classes {
                // Ratio first: a single-class row then splits exactly.
                out[j] = count as f64 * (weighted[j] / denom);
                column_totals[j] += out[j];
            }
        }
        z.push(out);
    }
    Ok(CompleteCountArray { z, column_totals })
}

/// M-step: `f_j = N_j / (P_0 · W_j)`, down-weighting classes the battery
/// filters more strongly.
pub fn m_step(
    column_totals: &[f64],
    zero_port: u64,
    column_weights: &[f64],
) -> Result<SizeDistribution, EmError> {
    if zero_port == 0 {
        return Err(EmError::DegenerateInput(
            "zero-port count must be positive".into(),
        ));
    }
    if column_totals.len() != column_weights.len() {
        return Err(EmError::ConstraintViolation(format!(
            "{} column totals but {} column weights",
            column_totals.len(),
            column_weights.len()
        )));
    }
    let p0 = zero_port as f64;
    SizeDistribution::new(
        column_totals
            .iter()
            .zip(column_weights)
            .map(|(n, w)| n / (p0 * w))
            .collect(),
    )
}

/// Poisson log-likelihood of the observed port counts,
/// `Σ_i [P_i ln μ_i − μ_i]` with `μ_i = P_0 Σ_j w_ij f_j`, omitting the
/// `ln P_i!` terms. A zero-count port contributes `−μ_i`; a positive count on
/// a zero-mean port yields `-inf`.
pub fn log_likelihood(f: &SizeDistribution, meas: &BatteryMeasurement) -> f64 {
    let mut total = 0.0;
    for (&count, mu) in meas.ports.iter().zip(fitted_means(f, meas)) {
        if count == 0 {
            total -= mu;
        } else if mu <= 0.0 {
            return f64::NEG_INFINITY;
        } else {
            total += count as f64 * mu.ln() - mu;
        }
    }
    total
}

/// Expected port counts `μ_i = P_0 Σ_j w_ij f_j` under `f`.
pub fn fitted_means(f: &SizeDistribution, meas: &BatteryMeasurement) -> Vec<f64> {
    let p0 = meas.zero_port as f64;
    meas.kernel
        .iter()
        .map(|row| p0 * row.iter().zip(f.values()).map(|(w, fj)| w * fj).sum::<f64>())
        .collect()
}

/// Rescales a raw frequency vector to proportions, returning the simplex
/// vector and the raw total mass. Zero total mass is degenerate.
pub fn normalize(f: &SizeDistribution) -> Result<(SimplexVector, f64), EmError> {
    let total: f64 = f.values().iter().sum();
    let normalized = SimplexVector::from_unnormalized(f.values())?;
    Ok((normalized, total))
}

/// Uniform starting point satisfying the flux identity at iteration zero:
/// `f_j = Σ_i P_i / (P_0 Σ_j W_j)` for every class.
pub fn uniform_init(meas: &BatteryMeasurement) -> SizeDistribution {
    let total_weight: f64 = meas.column_weights().iter().sum();
    let value = meas.total_port_count() as f64 / (meas.zero_port as f64 * total_weight);
    SizeDistribution {
        f: vec![value; meas.n_classes()],
    }
}

/// Deconvolution model plugged into the generic EM driver. Construction
/// rejects size classes with a column weight below [`MIN_COLUMN_WEIGHT`];
/// such classes are unidentifiable.
#[derive(Debug, Clone)]
pub struct DeconvModel {
    zero_port: u64,
    column_weights: Vec<f64>,
}

impl DeconvModel {
    pub fn new(meas: &BatteryMeasurement) -> Result<Self, EmError> {
        let column_weights = meas.column_weights();
        for (j, &w) in column_weights.iter().enumerate() {
            if w < MIN_COLUMN_WEIGHT {
                return Err(EmError::ConstraintViolation(format!(
                    "size class {} is unidentifiable: column weight {w:e} is below {MIN_COLUMN_WEIGHT:e}",
                    j + 1
                )));
            }
        }
        Ok(Self {
            zero_port: meas.zero_port,
            column_weights,
        })
    }
}

impl EmModel for DeconvModel {
    type Params = SizeDistribution;
    type Data = BatteryMeasurement;
    type Stats = Vec<f64>;

    fn check_params(&self, params: &SizeDistribution) -> Result<(), EmError> {
        if params.len() != self.column_weights.len() {
            return Err(EmError::ConstraintViolation(format!(
                "distribution has {} classes, model has {}",
                params.len(),
                self.column_weights.len()
            )));
        }
        for (j, &v) in params.values().iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(EmError::ConstraintViolation(format!(
                    "size class {} left the non-negative orthant: {v}",
                    j + 1
                )));
            }
        }
        Ok(())
    }

    fn e_step(
        &self,
        params: &SizeDistribution,
        data: &BatteryMeasurement,
    ) -> Result<Vec<f64>, EmError> {
        Ok(e_step(params, data)?.column_totals)
    }

    fn m_step(&self, stats: &Vec<f64>) -> Result<SizeDistribution, EmError> {
        m_step(stats, self.zero_port, &self.column_weights)
    }

    fn log_likelihood(&self, params: &SizeDistribution, data: &BatteryMeasurement) -> f64 {
        log_likelihood(params, data)
    }

    fn is_degenerate(&self, data: &BatteryMeasurement) -> bool {
        // All filtered ports empty: the first M-step would zero out f and no
        // later iteration could leave it.
        data.ports.iter().all(|&p| p == 0)
    }
}

/// Runs the full deconvolution EM from the uniform starting point.
pub fn fit(
    meas: &BatteryMeasurement,
    config: &EmConfig,
) -> Result<EmResult<SizeDistribution>, EmError> {
    let model = DeconvModel::new(meas)?;
    run_em(&model, meas, uniform_init(meas), config)
}

/// Synthetic penetration kernel for tests and demos: monotone exponential
/// penetration curves, decaying faster for small size classes (low `j`) the
/// way screens trap fast-diffusing particles first. Not derived from any
/// instrument's physics; real analyses must supply a measured kernel.
pub fn synthetic_kernel(n_ports: usize, n_classes: usize) -> Vec<Vec<f64>> {
    assert!(n_ports > 0 && n_classes > 0);
    let rate_max: f64 = 1.2;
    let rate_min: f64 = 0.05;
    let rates: Vec<f64> = (0..n_classes)
        .map(|j| {
            if n_classes == 1 {
                rate_min
            } else {
                let t = j as f64 / (n_classes - 1) as f64;
                rate_max * (rate_min / rate_max).powf(t)
            }
        })
        .collect();
    (0..n_ports)
        .map(|i| {
            let stages = (i + 1) as f64;
            rates.iter().map(|r| (-stages * r).exp()).collect()
        })
        .collect()
}
