//! ABO allele-frequency estimation by gene counting.
//!
//! Blood types A and B are ambiguous about genotype (AA vs AO, BB vs BO);
//! types AB and O identify it uniquely. The E-step splits the ambiguous
//! phenotype counts into expected genotype counts under Hardy–Weinberg
//! equilibrium, and the M-step counts alleles: each of the `n` subjects
//! carries two, so every estimated frequency has denominator `2n`.

use crate::em::{run_em, EmConfig, EmModel, EmResult};
use crate::error::EmError;
use crate::simplex::check_simplex;

/// Observed subject counts per blood type.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BloodTypeCounts {
    t_a: u64,
    t_b: u64,
    t_ab: u64,
    t_o: u64,
}

impl BloodTypeCounts {
    pub fn new(t_a: u64, t_b: u64, t_ab: u64, t_o: u64) -> Result<Self, EmError> {
        if t_a + t_b + t_ab + t_o == 0 {
            return Err(EmError::DegenerateInput(
                "blood type counts are all zero".into(),
            ));
        }
        Ok(Self { t_a, t_b, t_ab, t_o })
    }

    pub fn t_a(&self) -> u64 {
        self.t_a
    }

    pub fn t_b(&self) -> u64 {
        self.t_b
    }

    pub fn t_ab(&self) -> u64 {
        self.t_ab
    }

    pub fn t_o(&self) -> u64 {
        self.t_o
    }

    /// Total number of subjects.
    pub fn n(&self) -> u64 {
        self.t_a + self.t_b + self.t_ab + self.t_o
    }
}

/// Population frequencies of the A, B and O alleles; a point on the 3-simplex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlleleFrequencies {
    p_a: f64,
    p_b: f64,
    p_o: f64,
}

impl AlleleFrequencies {
    pub fn new(p_a: f64, p_b: f64, p_o: f64) -> Result<Self, EmError> {
        check_simplex(&[p_a, p_b, p_o])?;
        Ok(Self { p_a, p_b, p_o })
    }

    /// The conventional starting point: all three frequencies equal.
    pub fn uniform() -> Self {
        Self {
            p_a: 1.0 / 3.0,
            p_b: 1.0 / 3.0,
            p_o: 1.0 / 3.0,
        }
    }

    pub fn p_a(&self) -> f64 {
        self.p_a
    }

    pub fn p_b(&self) -> f64 {
        self.p_b
    }

    pub fn p_o(&self) -> f64 {
        self.p_o
    }

    /// Phenotype probabilities (A, B, AB, O) under Hardy–Weinberg equilibrium.
    pub fn phenotype_probs(&self) -> [f64; 4] {
        let Self { p_a, p_b, p_o } = *self;
        [
            p_a * p_a + 2.0 * p_a * p_o,
            p_b * p_b + 2.0 * p_b * p_o,
            2.0 * p_a * p_b,
            p_o * p_o,
        ]
    }
}

/// Expected number of subjects with each genotype, given frequencies and
/// observed phenotype counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedGenotypeCounts {
    pub g_aa: f64,
    pub g_ao: f64,
    pub g_bb: f64,
    pub g_bo: f64,
    pub g_ab: f64,
    pub g_oo: f64,
}

/// E-step: splits the ambiguous A and B phenotype counts into homozygote and
/// heterozygote parts. Under Hardy–Weinberg, P(AA | type A) =
/// p_A²/(p_A² + 2 p_A p_O), which reduces to p_A/(p_A + 2 p_O); AB and O
/// carry over unchanged.
///
/// Fails with `ImpossibleData` when a phenotype was observed but has
/// probability zero under `freqs`. A zero phenotype count splits to (0, 0)
/// regardless of the frequencies.
pub fn e_step(
    freqs: &AlleleFrequencies,
    counts: &BloodTypeCounts,
) -> Result<ExpectedGenotypeCounts, EmError> {
    let split = |t: u64, p: f64, label: &str| -> Result<(f64, f64), EmError> {
        if t == 0 {
            return Ok((0.0, 0.0));
        }
        if p == 0.0 {
            return Err(EmError::ImpossibleData(format!(
                "blood type {label} observed but allele {label} has frequency zero"
            )));
        }
        let homozygote_share = p / (p + 2.0 * freqs.p_o);
        let g_hom = t as f64 * homozygote_share;
        let g_het = t as f64 * (1.0 - homozygote_share);
        Ok((g_hom, g_het))
    };

    let (g_aa, g_ao) = split(counts.t_a, freqs.p_a, "A")?;
    let (g_bb, g_bo) = split(counts.t_b, freqs.p_b, "B")?;
    Ok(ExpectedGenotypeCounts {
        g_aa,
        g_ao,
        g_bb,
        g_bo,
        g_ab: counts.t_ab as f64,
        g_oo: counts.t_o as f64,
    })
}

/// M-step: gene counting. Each genotype contributes its alleles to the
/// numerators; the denominator is `2n` alleles.
pub fn m_step(g: &ExpectedGenotypeCounts, n: u64) -> Result<AlleleFrequencies, EmError> {
    if n == 0 {
        return Err(EmError::DegenerateInput("zero subjects".into()));
    }
    let denom = 2.0 * n as f64;
    AlleleFrequencies::new(
        (2.0 * g.g_aa + g.g_ao + g.g_ab) / denom,
        (2.0 * g.g_bb + g.g_bo + g.g_ab) / denom,
        (2.0 * g.g_oo + g.g_ao + g.g_bo) / denom,
    )
}

/// Observed-data multinomial log-likelihood of the phenotype counts, up to
/// the additive multinomial coefficient. Zero-count categories contribute
/// nothing even at probability zero; a positive count on a zero-probability
/// category yields `-inf`.
pub fn log_likelihood(freqs: &AlleleFrequencies, counts: &BloodTypeCounts) -> f64 {
    let probs = freqs.phenotype_probs();
    let observed = [counts.t_a, counts.t_b, counts.t_ab, counts.t_o];
    let mut total = 0.0;
    for (&t, &p) in observed.iter().zip(probs.iter()) {
        if t == 0 {
            continue;
        }
        if p <= 0.0 {
            return f64::NEG_INFINITY;
        }
        total += t as f64 * p.ln();
    }
    total
}

/// E-step output together with the subject total the M-step divides by.
#[derive(Debug, Clone, Copy)]
pub struct AboStats {
    pub genotypes: ExpectedGenotypeCounts,
    pub n: u64,
}

/// Gene-counting model plugged into the generic EM driver.
#[derive(Debug, Clone, Copy, Default)]
pub struct AboModel;

impl EmModel for AboModel {
    type Params = AlleleFrequencies;
    type Data = BloodTypeCounts;
    type Stats = AboStats;

    fn check_params(&self, params: &AlleleFrequencies) -> Result<(), EmError> {
        check_simplex(&[params.p_a, params.p_b, params.p_o])
    }

    fn e_step(
        &self,
        params: &AlleleFrequencies,
        data: &BloodTypeCounts,
    ) -> Result<AboStats, EmError> {
        Ok(AboStats {
            genotypes: e_step(params, data)?,
            n: data.n(),
        })
    }

    fn m_step(&self, stats: &AboStats) -> Result<AlleleFrequencies, EmError> {
        m_step(&stats.genotypes, stats.n)
    }

    fn log_likelihood(&self, params: &AlleleFrequencies, data: &BloodTypeCounts) -> f64 {
        log_likelihood(params, data)
    }
}

/// Runs the full gene-counting EM from `init`.
pub fn fit(
    counts: &BloodTypeCounts,
    init: AlleleFrequencies,
    config: &EmConfig,
) -> Result<EmResult<AlleleFrequencies>, EmError> {
    run_em(&AboModel, counts, init, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn e_step_splits_equal_frequencies_one_third() {
        let freqs = AlleleFrequencies::uniform();
        let counts = BloodTypeCounts::new(300, 0, 0, 0).unwrap();
        let g = e_step(&freqs, &counts).unwrap();
        assert!(close(g.g_aa, 100.0, 1e-9));
        assert!(close(g.g_ao, 200.0, 1e-9));
    }

    #[test]
    fn e_step_without_o_allele_is_all_homozygote() {
        let freqs = AlleleFrequencies::new(1.0, 0.0, 0.0).unwrap();
        let counts = BloodTypeCounts::new(10, 0, 0, 0).unwrap();
        let g = e_step(&freqs, &counts).unwrap();
        assert_eq!(g.g_aa, 10.0);
        assert_eq!(g.g_ao, 0.0);
    }

    #[test]
    fn e_step_matches_closed_form() {
        // At (0.3, 0.1, 0.6): A homozygote share = 0.09/0.45 = 0.2,
        // B homozygote share = 0.01/0.13 = 1/13.
        let freqs = AlleleFrequencies::new(0.3, 0.1, 0.6).unwrap();
        let counts = BloodTypeCounts::new(186, 38, 36, 284).unwrap();
        let g = e_step(&freqs, &counts).unwrap();
        assert!(close(g.g_aa, 37.2, 1e-12));
        assert!(close(g.g_ao, 148.8, 1e-12));
        assert!(close(g.g_bb, 38.0 / 13.0, 1e-12));
        assert!(close(g.g_bo, 456.0 / 13.0, 1e-12));
        assert_eq!(g.g_ab, 36.0);
        assert_eq!(g.g_oo, 284.0);
        // Phenotype-group conservation.
        assert!(close(g.g_aa + g.g_ao, 186.0, 1e-9));
        assert!(close(g.g_bb + g.g_bo, 38.0, 1e-9));
    }

    #[test]
    fn e_step_rejects_observed_type_with_zero_frequency() {
        let freqs = AlleleFrequencies::new(0.0, 0.4, 0.6).unwrap();
        let counts = BloodTypeCounts::new(5, 0, 0, 10).unwrap();
        assert!(matches!(
            e_step(&freqs, &counts),
            Err(EmError::ImpossibleData(_))
        ));
        // A zero count for the same type is fine.
        let counts = BloodTypeCounts::new(0, 5, 0, 10).unwrap();
        assert!(e_step(&freqs, &counts).is_ok());
    }

    #[test]
    fn m_step_all_ab_gives_half_half() {
        let g = ExpectedGenotypeCounts {
            g_aa: 0.0,
            g_ao: 0.0,
            g_bb: 0.0,
            g_bo: 0.0,
            g_ab: 40.0,
            g_oo: 0.0,
        };
        let freqs = m_step(&g, 40).unwrap();
        assert_eq!(freqs.p_a(), 0.5);
        assert_eq!(freqs.p_b(), 0.5);
        assert_eq!(freqs.p_o(), 0.0);
    }

    #[test]
    fn m_step_all_o() {
        let g = ExpectedGenotypeCounts {
            g_aa: 0.0,
            g_ao: 0.0,
            g_bb: 0.0,
            g_bo: 0.0,
            g_ab: 0.0,
            g_oo: 25.0,
        };
        let freqs = m_step(&g, 25).unwrap();
        assert_eq!((freqs.p_a(), freqs.p_b(), freqs.p_o()), (0.0, 0.0, 1.0));
    }

    #[test]
    fn m_step_rejects_zero_subjects() {
        let g = ExpectedGenotypeCounts {
            g_aa: 0.0,
            g_ao: 0.0,
            g_bb: 0.0,
            g_bo: 0.0,
            g_ab: 0.0,
            g_oo: 0.0,
        };
        assert!(matches!(m_step(&g, 0), Err(EmError::DegenerateInput(_))));
    }

    #[test]
    fn one_hand_computed_iteration() {
        // From (1/3, 1/3, 1/3) on counts (186, 38, 36, 284) the E-step gives
        // g_AA=62, g_AO=124, g_BB=38/3, g_BO=76/3, and the M-step lands on
        // (284/1088, 260/3264, 2152/3264).
        let counts = BloodTypeCounts::new(186, 38, 36, 284).unwrap();
        let g = e_step(&AlleleFrequencies::uniform(), &counts).unwrap();
        let next = m_step(&g, counts.n()).unwrap();
        assert!(close(next.p_a(), 284.0 / 1088.0, 1e-12));
        assert!(close(next.p_b(), 260.0 / 3264.0, 1e-12));
        assert!(close(next.p_o(), 2152.0 / 3264.0, 1e-12));
    }

    #[test]
    fn log_likelihood_saturated_cases() {
        let all_o = BloodTypeCounts::new(0, 0, 0, 100).unwrap();
        let freqs = AlleleFrequencies::new(0.0, 0.0, 1.0).unwrap();
        assert_eq!(log_likelihood(&freqs, &all_o), 0.0);

        let all_ab = BloodTypeCounts::new(0, 0, 10, 0).unwrap();
        let freqs = AlleleFrequencies::new(0.5, 0.5, 0.0).unwrap();
        assert!(close(log_likelihood(&freqs, &all_ab), 10.0 * 0.5f64.ln(), 1e-12));
    }

    #[test]
    fn log_likelihood_is_neg_infinite_for_impossible_counts() {
        let counts = BloodTypeCounts::new(5, 0, 0, 0).unwrap();
        let freqs = AlleleFrequencies::new(0.0, 0.0, 1.0).unwrap();
        assert_eq!(log_likelihood(&freqs, &counts), f64::NEG_INFINITY);
    }

    #[test]
    fn full_run_is_monotone_and_converges() {
        let counts = BloodTypeCounts::new(186, 38, 36, 284).unwrap();
        let result = fit(&counts, AlleleFrequencies::uniform(), &EmConfig::default()).unwrap();
        assert!(result.trace.converged);
        assert!(result.trace.is_monotone(1e-10));
        // Strictly climbing until the last step.
        let lls = result.trace.log_likelihoods();
        for w in lls.windows(2).take(lls.len().saturating_sub(2)) {
            assert!(w[1] > w[0]);
        }
        let f = result.final_params;
        assert!(close(f.p_a() + f.p_b() + f.p_o(), 1.0, 1e-12));
    }

    #[test]
    fn converges_within_fifty_iterations_from_uniform_start() {
        for (t_a, t_b, t_ab, t_o) in [(186, 38, 36, 284), (10, 10, 10, 10), (500, 3, 2, 100)] {
            let counts = BloodTypeCounts::new(t_a, t_b, t_ab, t_o).unwrap();
            let result = fit(&counts, AlleleFrequencies::uniform(), &EmConfig::default()).unwrap();
            assert!(result.trace.converged);
            assert!(
                result.trace.iterations() <= 50,
                "took {} iterations on ({t_a},{t_b},{t_ab},{t_o})",
                result.trace.iterations()
            );
        }
    }

    #[test]
    fn e_step_conserves_phenotype_totals() {
        let freqs = AlleleFrequencies::new(0.21, 0.07, 0.72).unwrap();
        let counts = BloodTypeCounts::new(421, 97, 33, 449).unwrap();
        let g = e_step(&freqs, &counts).unwrap();
        assert!(close(g.g_aa + g.g_ao, 421.0, 1e-9));
        assert!(close(g.g_bb + g.g_bo, 97.0, 1e-9));
        assert_eq!(g.g_ab, 33.0);
        assert_eq!(g.g_oo, 449.0);
    }
}
