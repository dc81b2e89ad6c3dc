//! IBD-sharing estimation for affected sib pairs.
//!
//! A pair of siblings shares 0, 1 or 2 marker alleles identical by descent
//! with null probabilities (1/4, 1/2, 1/4). Marker genotypes do not always
//! reveal the IBD count, so the per-pair likelihood kernels
//! `L_j = P(sib genotypes | parents, IBD = j)` are computed by enumerating all
//! 16 equiprobable transmission patterns: each parent sends one of its two
//! allele *copies* to each sib. Copies are tracked by position, not label,
//! which handles homozygous parents correctly.

use crate::em::{run_em, EmConfig, EmModel, EmResult};
use crate::error::EmError;
use crate::simplex::check_simplex;

/// An unordered pair of allele labels at one marker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Genotype {
    a1: u32,
    a2: u32,
}

impl Genotype {
    /// Builds a genotype; the pair is unordered, so `(a, b)` equals `(b, a)`.
    pub fn new(a: u32, b: u32) -> Self {
        if a <= b {
            Self { a1: a, a2: b }
        } else {
            Self { a1: b, a2: a }
        }
    }

    /// Allele copy by position (0 or 1). Positions distinguish the two copies
    /// of a homozygous genotype even though their labels coincide.
    fn copy(&self, position: usize) -> u32 {
        if position == 0 {
            self.a1
        } else {
            self.a2
        }
    }

    pub fn alleles(&self) -> (u32, u32) {
        (self.a1, self.a2)
    }
}

impl std::fmt::Display for Genotype {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.a1, self.a2)
    }
}

/// Marker genotypes for both parents and two typed offspring.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SibPairObservation {
    father: Genotype,
    mother: Genotype,
    sib1: Genotype,
    sib2: Genotype,
}

/// Matching transmission patterns per IBD count, out of the 16 total
/// (4 with IBD 0, 8 with IBD 1, 4 with IBD 2).
fn pattern_matches(
    father: Genotype,
    mother: Genotype,
    sib1: Genotype,
    sib2: Genotype,
) -> [u32; 3] {
    let mut matches = [0u32; 3];
    for f1 in 0..2usize {
        for f2 in 0..2usize {
            for m1 in 0..2usize {
                for m2 in 0..2usize {
                    let ibd = usize::from(f1 == f2) + usize::from(m1 == m2);
                    let child1 = Genotype::new(father.copy(f1), mother.copy(m1));
                    let child2 = Genotype::new(father.copy(f2), mother.copy(m2));
                    if child1 == sib1 && child2 == sib2 {
                        matches[ibd] += 1;
                    }
                }
            }
        }
    }
    matches
}

impl SibPairObservation {
    /// Builds an observation, rejecting sib genotypes no transmission pattern
    /// can produce from the stated parents.
    pub fn new(
        father: Genotype,
        mother: Genotype,
        sib1: Genotype,
        sib2: Genotype,
    ) -> Result<Self, EmError> {
        let obs = Self {
            father,
            mother,
            sib1,
            sib2,
        };
        if pattern_matches(father, mother, sib1, sib2) == [0, 0, 0] {
            return Err(EmError::MendelianViolation(format!(
                "sib genotypes {sib1} and {sib2} are incompatible with parents {father} x {mother}"
            )));
        }
        Ok(obs)
    }

    pub fn father(&self) -> Genotype {
        self.father
    }

    pub fn mother(&self) -> Genotype {
        self.mother
    }

    pub fn sib1(&self) -> Genotype {
        self.sib1
    }

    pub fn sib2(&self) -> Genotype {
        self.sib2
    }
}

/// Probabilities of sharing 0, 1 or 2 alleles IBD; a point on the 3-simplex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IbdProbabilities {
    pi: [f64; 3],
}

impl IbdProbabilities {
    pub fn new(pi_0: f64, pi_1: f64, pi_2: f64) -> Result<Self, EmError> {
        check_simplex(&[pi_0, pi_1, pi_2])?;
        Ok(Self {
            pi: [pi_0, pi_1, pi_2],
        })
    }

    /// Sharing probabilities under no linkage: (1/4, 1/2, 1/4).
    pub fn null() -> Self {
        Self {
            pi: [0.25, 0.5, 0.25],
        }
    }

    pub fn values(&self) -> [f64; 3] {
        self.pi
    }
}

/// Per-pair likelihood kernel: `L_j = P(sib genotype pair | parents, IBD=j)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IbdKernel {
    l: [f64; 3],
}

impl IbdKernel {
    pub fn values(&self) -> [f64; 3] {
        self.l
    }

    /// True when the kernel is flat: the genotypes say nothing about IBD and
    /// the pair cannot move the estimate.
    pub fn is_uninformative(&self) -> bool {
        self.l[0] == self.l[1] && self.l[1] == self.l[2]
    }
}

/// Computes the likelihood kernel for one observation by exhaustive
/// transmission enumeration. Out of the 16 patterns, 4 have IBD 0, 8 have
/// IBD 1 and 4 have IBD 2, so `L_j` is the matching count divided by
/// (4, 8, 4); all values are exact in floating point.
pub fn kernel(obs: &SibPairObservation) -> IbdKernel {
    let matches = pattern_matches(obs.father, obs.mother, obs.sib1, obs.sib2);
    IbdKernel {
        l: [
            matches[0] as f64 / 4.0,
            matches[1] as f64 / 8.0,
            matches[2] as f64 / 4.0,
        ],
    }
}

/// Expected complete-data IBD counts; sums to the number of pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedIbdCounts {
    pub z: [f64; 3],
}

/// E-step: Bayes rule per pair, posterior_j ∝ π_j L_j, then summed over
/// pairs in input order. Fails with `ImpossibleData` when some pair has zero
/// probability under every IBD state weighted by `pi`.
pub fn e_step(pi: &IbdProbabilities, kernels: &[IbdKernel]) -> Result<ExpectedIbdCounts, EmError> {
    let mut z = [0.0f64; 3];
    for (index, k) in kernels.iter().enumerate() {
        let weighted = [
            pi.pi[0] * k.l[0],
            pi.pi[1] * k.l[1],
            pi.pi[2] * k.l[2],
        ];
        let total = weighted[0] + weighted[1] + weighted[2];
        if total <= 0.0 {
            return Err(EmError::ImpossibleData(format!(
                "sib pair {index} has zero probability under the current sharing probabilities"
            )));
        }
        for j in 0..3 {
            z[j] += weighted[j] / total;
        }
    }
    Ok(ExpectedIbdCounts { z })
}

/// M-step: the multinomial proportions `π_j = Z_j / n_pairs`.
pub fn m_step(z: &ExpectedIbdCounts, n_pairs: usize) -> Result<IbdProbabilities, EmError> {
    if n_pairs == 0 {
        return Err(EmError::DegenerateInput("no sib pairs".into()));
    }
    let n = n_pairs as f64;
    IbdProbabilities::new(z.z[0] / n, z.z[1] / n, z.z[2] / n)
}

/// Observed-data log-likelihood: per-pair mixture of kernels over IBD states,
/// `Σ log(Σ_j π_j L_j)`, up to a π-independent constant. Returns `-inf` when
/// any pair has zero mixture probability.
pub fn log_likelihood(pi: &IbdProbabilities, kernels: &[IbdKernel]) -> f64 {
    let mut total = 0.0;
    for k in kernels {
        let mixture = pi.pi[0] * k.l[0] + pi.pi[1] * k.l[1] + pi.pi[2] * k.l[2];
        if mixture <= 0.0 {
            return f64::NEG_INFINITY;
        }
        total += mixture.ln();
    }
    total
}

/// A batch of sib pairs reduced to their likelihood kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct IbdDataset {
    kernels: Vec<IbdKernel>,
    n_uninformative: usize,
}

impl IbdDataset {
    pub fn from_observations(observations: &[SibPairObservation]) -> Result<Self, EmError> {
        Self::from_kernels(observations.iter().map(kernel).collect())
    }

    pub fn from_kernels(kernels: Vec<IbdKernel>) -> Result<Self, EmError> {
        if kernels.is_empty() {
            return Err(EmError::DegenerateInput("no sib pairs".into()));
        }
        let n_uninformative = kernels.iter().filter(|k| k.is_uninformative()).count();
        Ok(Self {
            kernels,
            n_uninformative,
        })
    }

    pub fn kernels(&self) -> &[IbdKernel] {
        &self.kernels
    }

    pub fn n_pairs(&self) -> usize {
        self.kernels.len()
    }

    /// Pairs whose kernel is flat; they contribute nothing to the estimate.
    pub fn n_uninformative(&self) -> usize {
        self.n_uninformative
    }
}

/// E-step output together with the pair total the M-step divides by.
#[derive(Debug, Clone, Copy)]
pub struct IbdStats {
    pub counts: ExpectedIbdCounts,
    pub n_pairs: usize,
}

/// Sib-pair sharing model plugged into the generic EM driver.
#[derive(Debug, Clone, Copy, Default)]
pub struct IbdModel;

impl EmModel for IbdModel {
    type Params = IbdProbabilities;
    type Data = IbdDataset;
    type Stats = IbdStats;

    fn check_params(&self, params: &IbdProbabilities) -> Result<(), EmError> {
        check_simplex(&params.pi)
    }

    fn e_step(&self, params: &IbdProbabilities, data: &IbdDataset) -> Result<IbdStats, EmError> {
        Ok(IbdStats {
            counts: e_step(params, &data.kernels)?,
            n_pairs: data.n_pairs(),
        })
    }

    fn m_step(&self, stats: &IbdStats) -> Result<IbdProbabilities, EmError> {
        m_step(&stats.counts, stats.n_pairs)
    }

    fn log_likelihood(&self, params: &IbdProbabilities, data: &IbdDataset) -> f64 {
        log_likelihood(params, &data.kernels)
    }
}

/// Runs the full sharing EM from the null point (1/4, 1/2, 1/4).
pub fn fit(data: &IbdDataset, config: &EmConfig) -> Result<EmResult<IbdProbabilities>, EmError> {
    run_em(&IbdModel, data, IbdProbabilities::null(), config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(f: (u32, u32), m: (u32, u32), s1: (u32, u32), s2: (u32, u32)) -> SibPairObservation {
        SibPairObservation::new(
            Genotype::new(f.0, f.1),
            Genotype::new(m.0, m.1),
            Genotype::new(s1.0, s1.1),
            Genotype::new(s2.0, s2.1),
        )
        .unwrap()
    }

    #[test]
    fn genotype_comparison_is_order_insensitive() {
        assert_eq!(Genotype::new(3, 1), Genotype::new(1, 3));
        assert_eq!(Genotype::new(2, 2).alleles(), (2, 2));
    }

    #[test]
    fn four_distinct_alleles_identical_sibs_force_ibd_two() {
        // One of the four IBD-2 patterns matches, no others: the kernel is
        // supported on IBD 2 alone and the posterior deduces it outright.
        let k = kernel(&obs((1, 2), (3, 4), (1, 3), (1, 3)));
        assert_eq!(k.values(), [0.0, 0.0, 0.25]);
        let z = e_step(&IbdProbabilities::null(), &[k]).unwrap();
        assert_eq!(z.z, [0.0, 0.0, 1.0]);
    }

    #[test]
    fn four_distinct_alleles_disjoint_sibs_force_ibd_zero() {
        let k = kernel(&obs((1, 2), (3, 4), (1, 3), (2, 4)));
        assert_eq!(k.values(), [0.25, 0.0, 0.0]);
        let z = e_step(&IbdProbabilities::null(), &[k]).unwrap();
        assert_eq!(z.z, [1.0, 0.0, 0.0]);
    }

    #[test]
    fn fully_homozygous_family_is_uninformative() {
        let k = kernel(&obs((1, 1), (1, 1), (1, 1), (1, 1)));
        assert_eq!(k.values(), [1.0, 1.0, 1.0]);
        assert!(k.is_uninformative());
    }

    #[test]
    fn rejects_mendelian_incompatible_sib() {
        let result = SibPairObservation::new(
            Genotype::new(1, 1),
            Genotype::new(1, 1),
            Genotype::new(1, 2),
            Genotype::new(1, 1),
        );
        assert!(matches!(result, Err(EmError::MendelianViolation(_))));
    }

    #[test]
    fn kernel_mixture_equals_unconditional_enumeration() {
        // Σ_j P(IBD=j) L_j must equal the raw 16-pattern probability.
        let cases = [
            obs((1, 2), (3, 4), (1, 3), (1, 3)),
            obs((1, 2), (1, 2), (1, 1), (1, 2)),
            obs((1, 1), (1, 2), (1, 1), (1, 2)),
            obs((2, 3), (2, 3), (2, 2), (3, 3)),
        ];
        for o in cases {
            let k = kernel(&o);
            let matches = pattern_matches(o.father, o.mother, o.sib1, o.sib2);
            let unconditional = (matches[0] + matches[1] + matches[2]) as f64 / 16.0;
            let mixture = 0.25 * k.values()[0] + 0.5 * k.values()[1] + 0.25 * k.values()[2];
            assert!((mixture - unconditional).abs() <= 1e-12);
        }
    }

    #[test]
    fn e_step_forced_kernel_forces_posterior() {
        let pi = IbdProbabilities::null();
        let k = kernel(&obs((1, 2), (3, 4), (1, 3), (1, 3)));
        let z = e_step(&pi, &[k]).unwrap();
        assert_eq!(z.z, [0.0, 0.0, 1.0]);
    }

    #[test]
    fn e_step_flat_kernel_returns_prior() {
        let pi = IbdProbabilities::null();
        let k = kernel(&obs((1, 1), (1, 1), (1, 1), (1, 1)));
        let z = e_step(&pi, &[k]).unwrap();
        assert_eq!(z.z, [0.25, 0.5, 0.25]);
    }

    #[test]
    fn e_step_matches_direct_bayes_on_mixed_pairs() {
        // 50 pairs cycling through informative and partially informative
        // configurations; recompute each posterior directly and sum.
        let configs = [
            obs((1, 2), (3, 4), (1, 3), (1, 3)),
            obs((1, 2), (3, 4), (1, 3), (2, 4)),
            obs((1, 2), (1, 2), (1, 1), (1, 2)),
            obs((1, 1), (1, 2), (1, 1), (1, 1)),
            obs((1, 2), (3, 4), (1, 3), (1, 4)),
        ];
        let kernels: Vec<IbdKernel> = (0..50).map(|i| kernel(&configs[i % 5])).collect();
        let pi = IbdProbabilities::new(0.2, 0.5, 0.3).unwrap();
        let z = e_step(&pi, &kernels).unwrap();

        let mut expected = [0.0f64; 3];
        for k in &kernels {
            let l = k.values();
            let w = [0.2 * l[0], 0.5 * l[1], 0.3 * l[2]];
            let t = w[0] + w[1] + w[2];
            for j in 0..3 {
                expected[j] += w[j] / t;
            }
        }
        for j in 0..3 {
            assert!((z.z[j] - expected[j]).abs() <= 1e-12);
        }
        assert!((z.z.iter().sum::<f64>() - 50.0).abs() <= 1e-9);
    }

    #[test]
    fn e_step_rejects_zero_probability_pair() {
        let pi = IbdProbabilities::new(1.0, 0.0, 0.0).unwrap();
        let k = kernel(&obs((1, 2), (3, 4), (1, 3), (1, 3)));
        assert!(matches!(
            e_step(&pi, &[k]),
            Err(EmError::ImpossibleData(_))
        ));
    }

    #[test]
    fn m_step_normalizes_counts() {
        let z = ExpectedIbdCounts { z: [0.0, 0.0, 10.0] };
        assert_eq!(m_step(&z, 10).unwrap().values(), [0.0, 0.0, 1.0]);

        let z = ExpectedIbdCounts {
            z: [2.5, 5.0, 2.5],
        };
        assert_eq!(m_step(&z, 10).unwrap().values(), [0.25, 0.5, 0.25]);

        assert!(matches!(
            m_step(&ExpectedIbdCounts { z: [0.0; 3] }, 0),
            Err(EmError::DegenerateInput(_))
        ));
    }

    #[test]
    fn log_likelihood_prefers_certainty_on_forced_data() {
        // Kernels are fixed, so the log-likelihood is defined up to the
        // constant Σ ln L_2; π = (0,0,1) attains it and anything else is
        // strictly worse.
        let kernels = vec![kernel(&obs((1, 2), (3, 4), (1, 3), (1, 3))); 4];
        let certain = IbdProbabilities::new(0.0, 0.0, 1.0).unwrap();
        let at_max = log_likelihood(&certain, &kernels);
        assert_eq!(at_max, 4.0 * 0.25f64.ln());
        for hedged in [
            IbdProbabilities::new(0.1, 0.2, 0.7).unwrap(),
            IbdProbabilities::null(),
            IbdProbabilities::new(0.0, 0.01, 0.99).unwrap(),
        ] {
            assert!(log_likelihood(&hedged, &kernels) < at_max);
        }
    }

    #[test]
    fn log_likelihood_is_flat_for_uninformative_pair() {
        let kernels = vec![kernel(&obs((1, 1), (1, 1), (1, 1), (1, 1)))];
        let a = log_likelihood(&IbdProbabilities::null(), &kernels);
        let b = log_likelihood(&IbdProbabilities::new(0.9, 0.05, 0.05).unwrap(), &kernels);
        assert_eq!(a, b);
        assert_eq!(a, 0.0);
    }

    #[test]
    fn fully_informative_pairs_converge_in_one_iteration() {
        // 3 pairs with IBD 2, 1 with IBD 0: empirical proportions (1/4, 0, 3/4).
        let mut observations = vec![obs((1, 2), (3, 4), (1, 3), (1, 3)); 3];
        observations.push(obs((1, 2), (3, 4), (1, 3), (2, 4)));
        let data = IbdDataset::from_observations(&observations).unwrap();
        let result = fit(&data, &EmConfig::default()).unwrap();
        let first = result.trace.entries[1].params;
        assert_eq!(first.values(), [0.25, 0.0, 0.75]);
        assert_eq!(result.final_params.values(), [0.25, 0.0, 0.75]);
        assert!(result.trace.converged);
    }

    #[test]
    fn uninformative_pairs_are_counted() {
        let observations = vec![
            obs((1, 1), (1, 1), (1, 1), (1, 1)),
            obs((1, 2), (3, 4), (1, 3), (1, 3)),
        ];
        let data = IbdDataset::from_observations(&observations).unwrap();
        assert_eq!(data.n_uninformative(), 1);
        assert_eq!(data.n_pairs(), 2);
    }

    #[test]
    fn empty_dataset_is_rejected() {
        assert!(matches!(
            IbdDataset::from_kernels(vec![]),
            Err(EmError::DegenerateInput(_))
        ));
    }
}
