//! Motif discovery under the one-occurrence-per-sequence model.
//!
//! Every input sequence contains exactly one instance of a width-`W` motif at
//! an unknown start. Letters inside the motif window follow a per-position
//! probability column; letters outside follow a single background
//! distribution. The E-step weighs every candidate start per sequence (all
//! starts equally likely a priori), and the M-step re-estimates the columns
//! and the background from expected letter counts. All likelihood work is
//! done in log space to avoid underflow on long sequences.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::em::{run_em, EmConfig, EmModel, EmResult};
use crate::error::EmError;
use crate::simplex::check_simplex;

/// Alphabet in index order; ties in consensus extraction resolve to the
/// earliest letter.
pub const BASES: [char; 4] = ['A', 'C', 'G', 'T'];

/// Maps an uppercase DNA letter to its alphabet index.
pub fn base_index(letter: char) -> Option<usize> {
    match letter {
        'A' => Some(0),
        'C' => Some(1),
        'G' => Some(2),
        'T' => Some(3),
        _ => None,
    }
}

/// Sequences over {A, C, G, T} with a fixed motif width.
#[derive(Debug, Clone, PartialEq)]
pub struct MotifDataset {
    sequences: Vec<Vec<u8>>,
    width: usize,
}

impl MotifDataset {
    pub fn new<S: AsRef<str>>(sequences: &[S], width: usize) -> Result<Self, EmError> {
        if width == 0 {
            return Err(EmError::ConstraintViolation(
                "motif width must be at least 1".into(),
            ));
        }
        if sequences.is_empty() {
            return Err(EmError::DegenerateInput("no sequences".into()));
        }
        let mut encoded = Vec::with_capacity(sequences.len());
        for (i, seq) in sequences.iter().enumerate() {
            let seq = seq.as_ref();
            if seq.chars().count() < width {
                return Err(EmError::ConstraintViolation(format!(
                    "sequence {} is shorter ({}) than the motif width {width}",
                    i + 1,
                    seq.chars().count()
                )));
            }
            let mut row = Vec::with_capacity(seq.len());
            for c in seq.chars() {
                match base_index(c) {
                    Some(b) => row.push(b as u8),
                    None => {
                        return Err(EmError::ConstraintViolation(format!(
                            "sequence {} contains a letter outside ACGT: {c:?}",
                            i + 1
                        )))
                    }
                }
            }
            encoded.push(row);
        }
        Ok(Self {
            sequences: encoded,
            width,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn n_sequences(&self) -> usize {
        self.sequences.len()
    }

    /// Sequences as alphabet indices.
    pub fn sequences(&self) -> &[Vec<u8>] {
        &self.sequences
    }

    /// Number of candidate starts in sequence `i`: `L_i - W + 1`.
    pub fn n_starts(&self, i: usize) -> usize {
        self.sequences[i].len() - self.width + 1
    }
}

/// Motif probability columns, background letter distribution and pseudocount.
#[derive(Debug, Clone, PartialEq)]
pub struct MotifModel {
    columns: Vec<[f64; 4]>,
    background: [f64; 4],
    pseudocount: f64,
}

impl MotifModel {
    pub fn new(
        columns: Vec<[f64; 4]>,
        background: [f64; 4],
        pseudocount: f64,
    ) -> Result<Self, EmError> {
        if columns.is_empty() {
            return Err(EmError::ConstraintViolation(
                "motif must have at least one column".into(),
            ));
        }
        for (p, col) in columns.iter().enumerate() {
            check_simplex(col).map_err(|e| {
                EmError::ConstraintViolation(format!("motif column {p}: {e}"))
            })?;
        }
        check_simplex(&background)
            .map_err(|e| EmError::ConstraintViolation(format!("background: {e}")))?;
        if !pseudocount.is_finite() || pseudocount < 0.0 {
            return Err(EmError::ConstraintViolation(format!(
                "pseudocount must be a non-negative finite value, got {pseudocount}"
            )));
        }
        Ok(Self {
            columns,
            background,
            pseudocount,
        })
    }

    /// Uniform columns and background: the model cannot distinguish starts.
    pub fn uniform(width: usize, pseudocount: f64) -> Self {
        Self {
            columns: vec![[0.25; 4]; width],
            background: [0.25; 4],
            pseudocount,
        }
    }

    /// Seeds the motif from one width-`W` window of the data, giving the
    /// observed letter weight 0.7 and the others 0.1 each; the background
    /// starts uniform.
    pub fn from_window(
        data: &MotifDataset,
        sequence: usize,
        start: usize,
        pseudocount: f64,
    ) -> Self {
        let seq = &data.sequences[sequence];
        let columns = (0..data.width)
            .map(|p| {
                let observed = seq[start + p] as usize;
                let mut col = [0.1; 4];
                col[observed] = 0.7;
                col
            })
            .collect();
        Self {
            columns,
            background: [0.25; 4],
            pseudocount,
        }
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    /// Per-position letter probability columns, indexed `[position][base]`.
    pub fn columns(&self) -> &[[f64; 4]] {
        &self.columns
    }

    pub fn background(&self) -> &[f64; 4] {
        &self.background
    }

    pub fn pseudocount(&self) -> f64 {
        self.pseudocount
    }

    /// Position-wise most probable letter; ties break to the earliest letter
    /// in A < C < G < T order.
    pub fn consensus(&self) -> String {
        self.columns
            .iter()
            .map(|col| {
                let mut best = 0;
                for b in 1..4 {
                    if col[b] > col[best] {
                        best = b;
                    }
                }
                BASES[best]
            })
            .collect()
    }
}

/// Per-sequence posterior distributions over candidate motif starts.
#[derive(Debug, Clone, PartialEq)]
pub struct StartPosteriors {
    rows: Vec<Vec<f64>>,
}

impl StartPosteriors {
    /// Wraps externally supplied posteriors, checking normalization.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, EmError> {
        for (i, row) in rows.iter().enumerate() {
            if row.is_empty() {
                return Err(EmError::ConstraintViolation(format!(
                    "sequence {i} has no start posteriors"
                )));
            }
            if row.iter().any(|&v| !v.is_finite() || v < 0.0) {
                return Err(EmError::ConstraintViolation(format!(
                    "sequence {i} has an invalid posterior value"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(EmError::ConstraintViolation(format!(
                    "sequence {i} posteriors sum to {sum}"
                )));
            }
        }
        Ok(Self { rows })
    }

    /// The uniform posterior over starts for every sequence.
    pub fn uniform(data: &MotifDataset) -> Self {
        let rows = (0..data.n_sequences())
            .map(|i| {
                let s = data.n_starts(i);
                vec![1.0 / s as f64; s]
            })
            .collect();
        Self { rows }
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

/// Log-probability of the whole sequence for each candidate start: window
/// letters under the motif columns, all other letters under the background.
/// Uses only additions of logs, so zero probabilities saturate to `-inf`
/// without producing NaN.
fn window_log_probs(model: &MotifModel, seq: &[u8]) -> Vec<f64> {
    let w = model.width();
    let log_bg: [f64; 4] = std::array::from_fn(|b| model.background[b].ln());
    let log_cols: Vec<[f64; 4]> = model
        .columns
        .iter()
        .map(|col| std::array::from_fn(|b| col[b].ln()))
        .collect();

    let len = seq.len();
    let mut prefix = vec![0.0; len + 1];
    for j in 0..len {
        prefix[j + 1] = prefix[j] + log_bg[seq[j] as usize];
    }
    let mut suffix = vec![0.0; len + 1];
    for j in (0..len).rev() {
        suffix[j] = suffix[j + 1] + log_bg[seq[j] as usize];
    }

    (0..=len - w)
        .map(|k| {
            let mut v = prefix[k] + suffix[k + w];
            for p in 0..w {
                v += log_cols[p][seq[k + p] as usize];
            }
            v
        })
        .collect()
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// E-step: posterior probability of each candidate start per sequence, with
/// a uniform prior over starts. Fails with `ImpossibleData` when every start
/// of some sequence has probability zero.
pub fn e_step(model: &MotifModel, data: &MotifDataset) -> Result<StartPosteriors, EmError> {
    if model.width() != data.width() {
        return Err(EmError::ConstraintViolation(format!(
            "model width {} does not match dataset width {}",
            model.width(),
            data.width()
        )));
    }
    let mut rows = Vec::with_capacity(data.n_sequences());
    for (i, seq) in data.sequences.iter().enumerate() {
        let log_probs = window_log_probs(model, seq);
        let max = log_probs
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(EmError::ImpossibleData(format!(
                "sequence {} has zero probability at every start",
                i + 1
            )));
        }
        let mut row: Vec<f64> = log_probs.iter().map(|&v| (v - max).exp()).collect();
        let total: f64 = row.iter().sum();
        for v in &mut row {
            *v /= total;
        }
        rows.push(row);
    }
    Ok(StartPosteriors { rows })
}

/// Expected letter counts implied by start posteriors: per motif position
/// inside the window, and pooled for the background outside it. These are the
/// sufficient statistics the M-step normalizes.
#[derive(Debug, Clone, PartialEq)]
pub struct MotifStats {
    pub window_counts: Vec<[f64; 4]>,
    pub background_counts: [f64; 4],
}

/// Accumulates expected letter counts from posteriors, without pseudocounts.
pub fn expected_counts(z: &StartPosteriors, data: &MotifDataset) -> MotifStats {
    let w = data.width();
    let mut window_counts = vec![[0.0f64; 4]; w];
    let mut background_counts = [0.0f64; 4];

    for (seq, row) in data.sequences.iter().zip(&z.rows) {
        let mut totals = [0.0f64; 4];
        for &b in seq {
            totals[b as usize] += 1.0;
        }
        let mut inside = [0.0f64; 4];
        for (k, &weight) in row.iter().enumerate() {
            for p in 0..w {
                let b = seq[k + p] as usize;
                window_counts[p][b] += weight;
                inside[b] += weight;
            }
        }
        for b in 0..4 {
            // Expected outside count; clamp the tiny negatives rounding can
            // leave behind.
            background_counts[b] += (totals[b] - inside[b]).max(0.0);
        }
    }
    MotifStats {
        window_counts,
        background_counts,
    }
}

fn model_from_counts(stats: &MotifStats, pseudocount: f64) -> Result<MotifModel, EmError> {
    if !pseudocount.is_finite() || pseudocount < 0.0 {
        return Err(EmError::ConstraintViolation(format!(
            "pseudocount must be a non-negative finite value, got {pseudocount}"
        )));
    }
    let columns = stats
        .window_counts
        .iter()
        .map(|counts| {
            let smoothed: [f64; 4] = std::array::from_fn(|b| counts[b] + pseudocount);
            let total: f64 = smoothed.iter().sum();
            std::array::from_fn(|b| smoothed[b] / total)
        })
        .collect();
    let smoothed_bg: [f64; 4] =
        std::array::from_fn(|b| stats.background_counts[b] + pseudocount);
    let bg_total: f64 = smoothed_bg.iter().sum();
    let background = if bg_total > 0.0 {
        std::array::from_fn(|b| smoothed_bg[b] / bg_total)
    } else {
        // No letters outside the window and no smoothing: the background is
        // unconstrained by the likelihood, so keep it uniform.
        [0.25; 4]
    };
    MotifModel::new(columns, background, pseudocount)
}

/// M-step: expected letter counts plus `pseudocount`, normalized per motif
/// position and for the background.
pub fn m_step(
    z: &StartPosteriors,
    data: &MotifDataset,
    pseudocount: f64,
) -> Result<MotifModel, EmError> {
    model_from_counts(&expected_counts(z, data), pseudocount)
}

/// Dirichlet smoothing term implied by the pseudocount: `λ Σ ln θ` over all
/// motif column entries and the background. The pseudocount M-step maximizes
/// the expected complete-data log-likelihood *plus this term*, so it is what
/// the EM driver must audit for monotonicity; the raw OOPS likelihood alone
/// may dip when `λ > 0`. Zero when `λ = 0`.
pub fn smoothing_penalty(model: &MotifModel) -> f64 {
    if model.pseudocount == 0.0 {
        return 0.0;
    }
    let mut total = 0.0;
    for col in &model.columns {
        for &v in col {
            total += v.ln();
        }
    }
    for &v in &model.background {
        total += v.ln();
    }
    model.pseudocount * total
}

/// Observed-data log-likelihood of the mixture over starts:
/// `Σ_i log( (1/(L_i-W+1)) Σ_k P(s_i | start=k) )`.
pub fn log_likelihood(model: &MotifModel, data: &MotifDataset) -> f64 {
    let mut total = 0.0;
    for (i, seq) in data.sequences.iter().enumerate() {
        let log_probs = window_log_probs(model, seq);
        let lse = log_sum_exp(&log_probs);
        if lse == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        total += lse - (data.n_starts(i) as f64).ln();
    }
    total
}

/// Most probable start per sequence with its posterior probability; starts
/// are 0-based, ties resolve to the leftmost.
pub fn best_starts(
    model: &MotifModel,
    data: &MotifDataset,
) -> Result<Vec<(usize, f64)>, EmError> {
    let z = e_step(model, data)?;
    Ok(z
        .rows
        .iter()
        .map(|row| {
            let mut best = 0;
            for (k, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = k;
                }
            }
            (best, row[best])
        })
        .collect())
}

/// OOPS model plugged into the generic EM driver. The statistics carry the
/// expected letter counts, so the M-step needs no second look at the data.
///
/// With a positive pseudocount the driver's objective is the smoothed
/// log-likelihood ([`log_likelihood`] plus [`smoothing_penalty`]); that is the
/// quantity the pseudocount M-step provably never decreases. Reports should
/// quote [`log_likelihood`] directly.
#[derive(Debug, Clone, Copy)]
pub struct MotifEm {
    pseudocount: f64,
}

impl MotifEm {
    pub fn new(pseudocount: f64) -> Result<Self, EmError> {
        if !pseudocount.is_finite() || pseudocount < 0.0 {
            return Err(EmError::ConstraintViolation(format!(
                "pseudocount must be a non-negative finite value, got {pseudocount}"
            )));
        }
        Ok(Self { pseudocount })
    }
}

impl EmModel for MotifEm {
    type Params = MotifModel;
    type Data = MotifDataset;
    type Stats = MotifStats;

    fn check_params(&self, params: &MotifModel) -> Result<(), EmError> {
        for col in params.columns() {
            check_simplex(col)?;
        }
        check_simplex(params.background())
    }

    fn e_step(&self, params: &MotifModel, data: &MotifDataset) -> Result<MotifStats, EmError> {
        let z = e_step(params, data)?;
        Ok(expected_counts(&z, data))
    }

    fn m_step(&self, stats: &MotifStats) -> Result<MotifModel, EmError> {
        model_from_counts(stats, self.pseudocount)
    }

    fn log_likelihood(&self, params: &MotifModel, data: &MotifDataset) -> f64 {
        log_likelihood(params, data) + smoothing_penalty(params)
    }
}

/// One restart of the OOPS EM.
#[derive(Debug, Clone)]
pub struct MotifRestart {
    pub restart: usize,
    pub seed_sequence: usize,
    pub seed_start: usize,
    pub result: EmResult<MotifModel>,
    /// Raw observed-data log-likelihood of the final model, without the
    /// smoothing term the driver traces.
    pub log_likelihood: f64,
}

/// All restarts of a multi-start fit plus the index of the winner.
#[derive(Debug, Clone)]
pub struct MotifFit {
    pub selected: usize,
    pub restarts: Vec<MotifRestart>,
}

impl MotifFit {
    /// The winning run: highest final observed-data log-likelihood, ties
    /// broken by the lowest restart index.
    pub fn best(&self) -> &EmResult<MotifModel> {
        &self.restarts[self.selected].result
    }
}

/// Runs `n_restarts` independent EM fits, each seeded from a randomly chosen
/// data window (0.7/0.1 letter weighting), and keeps the run with the highest
/// final observed-data log-likelihood. The restart schedule is drawn from a
/// seeded deterministic generator, so identical inputs reproduce identical
/// fits.
pub fn fit_with_restarts(
    data: &MotifDataset,
    pseudocount: f64,
    n_restarts: usize,
    seed: u64,
    config: &EmConfig,
) -> Result<MotifFit, EmError> {
    if n_restarts == 0 {
        return Err(EmError::ConstraintViolation(
            "at least one restart is required".into(),
        ));
    }
    let model = MotifEm::new(pseudocount)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let windows: Vec<(usize, usize)> = (0..n_restarts)
        .map(|_| {
            let i = rng.random_range(0..data.n_sequences());
            let k = rng.random_range(0..data.n_starts(i));
            (i, k)
        })
        .collect();

    let mut restarts = Vec::with_capacity(n_restarts);
    for (restart, (i, k)) in windows.into_iter().enumerate() {
        let init = MotifModel::from_window(data, i, k, pseudocount);
        let result = run_em(&model, data, init, config)?;
        let log_likelihood = log_likelihood(&result.final_params, data);
        restarts.push(MotifRestart {
            restart,
            seed_sequence: i,
            seed_start: k,
            result,
            log_likelihood,
        });
    }

    // Winner: highest raw observed-data log-likelihood, lowest index on ties.
    let mut selected = 0;
    for (r, run) in restarts.iter().enumerate() {
        if run.log_likelihood > restarts[selected].log_likelihood {
            selected = r;
        }
    }
    Ok(MotifFit { selected, restarts })
}
