//! Generic fixed-point EM driver.
//!
//! The driver alternates a model-supplied E-step and M-step until the
//! observed-data log-likelihood stabilises, recording every iterate. EM never
//! decreases the log-likelihood, so the driver audits the climb and aborts if
//! an iteration loses more than the configured slack: that is a bug in a model
//! step, not a property of the data.

use crate::error::EmError;

/// Capability bundle a concrete model supplies to [`run_em`].
///
/// Implementations must be side-effect free; the driver assumes identical
/// inputs produce identical outputs, which makes independent runs safe to
/// execute concurrently.
pub trait EmModel {
    /// Parameter point of the model.
    type Params: Clone;
    /// Dataset the model is fitted to.
    type Data: ?Sized;
    /// Expected complete-data sufficient statistics produced by the E-step.
    /// Must carry everything the M-step needs.
    type Stats;

    /// Validates a parameter point against the model's constraint set.
    fn check_params(&self, params: &Self::Params) -> Result<(), EmError>;

    /// E-step: expected complete-data sufficient statistics under `params`.
    fn e_step(&self, params: &Self::Params, data: &Self::Data) -> Result<Self::Stats, EmError>;

    /// M-step: complete-data maximum likelihood point for the statistics.
    fn m_step(&self, stats: &Self::Stats) -> Result<Self::Params, EmError>;

    /// The objective the M-step ascends: the observed-data log-likelihood up
    /// to an additive constant, plus any smoothing prior the M-step bakes in.
    /// Must never decrease across an E/M cycle. May return
    /// `f64::NEG_INFINITY` when the data has probability zero.
    fn log_likelihood(&self, params: &Self::Params, data: &Self::Data) -> f64;

    /// Models may flag datasets on which no EM iteration can move the
    /// parameters; the driver then records the initial point and stops with
    /// [`StopReason::DegenerateInput`].
    fn is_degenerate(&self, _data: &Self::Data) -> bool {
        false
    }
}

/// Stopping configuration for [`run_em`].
#[derive(Debug, Clone, PartialEq)]
pub struct EmConfig {
    /// Hard cap on the number of EM iterations.
    pub max_iterations: usize,
    /// Stop when |Δ log-likelihood| < `rel_tol` · |previous log-likelihood|.
    pub rel_tol: f64,
    /// Stop when |Δ log-likelihood| < `abs_tol`.
    pub abs_tol: f64,
    /// Largest tolerated log-likelihood decrease before the run aborts.
    pub monotonicity_slack: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            max_iterations: 10_000,
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            monotonicity_slack: 1e-10,
        }
    }
}

impl EmConfig {
    fn validate(&self) -> Result<(), EmError> {
        if self.max_iterations == 0 {
            return Err(EmError::ConstraintViolation(
                "max_iterations must be at least 1".into(),
            ));
        }
        for (name, value) in [
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("monotonicity_slack", self.monotonicity_slack),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(EmError::ConstraintViolation(format!(
                    "{name} must be strictly positive, got {value}"
                )));
            }
        }
        Ok(())
    }
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// The log-likelihood change fell below the configured tolerances.
    ToleranceMet,
    /// The iteration cap was reached first.
    MaxIterations,
    /// The model flagged the dataset as degenerate; only the initial point
    /// was recorded.
    DegenerateInput,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::ToleranceMet => "tolerance_met",
            StopReason::MaxIterations => "max_iterations",
            StopReason::DegenerateInput => "degenerate_input",
        }
    }
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One recorded iterate: the parameter snapshot after `iteration` EM updates
/// and its observed-data log-likelihood. Iteration 0 is the initial point.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry<P> {
    pub iteration: usize,
    pub params: P,
    pub log_likelihood: f64,
}

/// Per-iteration record of a run, for convergence and monotonicity auditing.
#[derive(Debug, Clone, PartialEq)]
pub struct EmTrace<P> {
    pub entries: Vec<TraceEntry<P>>,
    pub converged: bool,
    pub stop_reason: StopReason,
}

impl<P> EmTrace<P> {
    /// Log-likelihood values in iteration order.
    pub fn log_likelihoods(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.log_likelihood).collect()
    }

    /// Number of EM iterations performed (trace entries minus the initial point).
    pub fn iterations(&self) -> usize {
        self.entries.len().saturating_sub(1)
    }

    /// True iff every successive log-likelihood difference is at least
    /// `-slack`.
    pub fn is_monotone(&self, slack: f64) -> bool {
        is_monotone(&self.log_likelihoods(), slack)
    }
}

/// True iff every successive difference in `log_likelihoods` is ≥ `-slack`.
pub fn is_monotone(log_likelihoods: &[f64], slack: f64) -> bool {
    log_likelihoods
        .windows(2)
        .all(|w| w[1] - w[0] >= -slack)
}

/// Outcome of a run: the final parameter point plus the full trace. The final
/// point always equals the last trace snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct EmResult<P> {
    pub final_params: P,
    pub trace: EmTrace<P>,
}

/// Runs EM to convergence from `init`.
///
/// The log-likelihood is evaluated once at the initial point and once per
/// iteration at the post-M-step point. Stops when the change falls below
/// either tolerance or the iteration cap is reached. Errors out on an initial
/// point violating the model constraints, on a non-finite log-likelihood
/// (with the offending iteration index), or on a log-likelihood decrease
/// beyond `monotonicity_slack`.
pub fn run_em<M: EmModel>(
    model: &M,
    data: &M::Data,
    init: M::Params,
    config: &EmConfig,
) -> Result<EmResult<M::Params>, EmError> {
    config.validate()?;
    model.check_params(&init)?;

    let ll_init = model.log_likelihood(&init, data);
    if !ll_init.is_finite() {
        return Err(EmError::NumericalFailure {
            iteration: 0,
            value: ll_init,
        });
    }

    let mut entries = vec![TraceEntry {
        iteration: 0,
        params: init.clone(),
        log_likelihood: ll_init,
    }];

    if model.is_degenerate(data) {
        return Ok(EmResult {
            final_params: init,
            trace: EmTrace {
                entries,
                converged: false,
                stop_reason: StopReason::DegenerateInput,
            },
        });
    }

    let mut params = init;
    let mut ll_prev = ll_init;
    let mut converged = false;
    let mut stop_reason = StopReason::MaxIterations;

    for iteration in 1..=config.max_iterations {
        let stats = model.e_step(&params, data)?;
        params = model.m_step(&stats)?;
        model.check_params(&params)?;

        let ll = model.log_likelihood(&params, data);
        if !ll.is_finite() {
            return Err(EmError::NumericalFailure {
                iteration,
                value: ll,
            });
        }
        let delta = ll - ll_prev;
        if delta < -config.monotonicity_slack {
            return Err(EmError::MonotonicityViolation {
                iteration,
                decrease: -delta,
            });
        }
        entries.push(TraceEntry {
            iteration,
            params: params.clone(),
            log_likelihood: ll,
        });

        if delta.abs() < config.abs_tol || delta.abs() < config.rel_tol * ll_prev.abs() {
            converged = true;
            stop_reason = StopReason::ToleranceMet;
            break;
        }
        ll_prev = ll;
    }

    Ok(EmResult {
        final_params: params,
        trace: EmTrace {
            entries,
            converged,
            stop_reason,
        },
    })
}
