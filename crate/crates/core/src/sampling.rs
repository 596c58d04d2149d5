//! Budgeted selection of monolingual sentences.
//!
//! The main strategy samples without replacement from the distribution
//! p(x) ∝ [alpha(U) * U]^beta, where alpha penalizes uncertainty above a
//! threshold U_max taken from the bitext score distribution. Baselines
//! (uniform random, top word-rarity, lowest LM cross-entropy) live behind
//! the same [`SelectionStrategy`] trait and are picked by name at runtime.
//!
//! Sampling is one-pass and mergeable: each line gets an exponential key
//! u^(1/w) from a counter-based generator keyed on (seed, line_index), and
//! the budget-many largest keys win. Because keys depend only on the seed
//! and the line index, the selection is identical across thread counts and
//! shardings.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::uncertainty::ScoredSentence;

/// Nearest-rank percentile of the bitext uncertainty distribution: the
/// smallest score with at least R% of scores at or below it.
pub fn compute_umax(bitext_scores: &[f64], r: f64) -> Result<f64> {
    if bitext_scores.is_empty() {
        return Err(Error::EmptyInput {
            context: "compute_umax on empty score list".into(),
        });
    }
    if !(r > 0.0 && r <= 100.0) {
        return Err(Error::Usage(format!("R must be in (0,100], got {r}")));
    }
    let mut sorted = bitext_scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let rank = (r / 100.0 * n as f64).ceil() as usize;
    Ok(sorted[rank.clamp(1, n) - 1])
}

/// Penalty factor for excessive uncertainty: 1 up to U_max, then the
/// linear decay max(2*U_max/U - 1, 0). Continuous and non-increasing.
pub fn alpha(u: f64, u_max: f64) -> f64 {
    debug_assert!(u >= 0.0 && u_max > 0.0);
    if u <= u_max {
        1.0
    } else {
        (2.0 * u_max / u - 1.0).max(0.0)
    }
}

/// Unnormalized sampling weight (alpha * U)^beta. The normalizing constant
/// is never materialized; the reservoir works with relative weights.
pub fn weight(u: f64, u_max: f64, beta: f64) -> f64 {
    (alpha(u, u_max) * u).powf(beta)
}

/// Sampler configuration. `u_max` must be resolved (from a percentile over
/// bitext scores, or given explicitly) before uncertainty sampling runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub budget: usize,
    pub beta: f64,
    pub u_max: Option<f64>,
    pub seed: u64,
}

impl SamplerConfig {
    pub fn new(budget: usize, beta: f64, u_max: Option<f64>, seed: u64) -> Self {
        SamplerConfig {
            budget,
            beta,
            u_max,
            seed,
        }
    }
}

/// One selected line with the weight it was drawn under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedItem {
    pub line_index: usize,
    pub weight: f64,
}

/// Result of a selection run. `selected` is sorted by line index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleResult {
    pub strategy: String,
    pub selected: Vec<SelectedItem>,
    pub effective_umax: Option<f64>,
    pub seed: u64,
    pub total_lines: usize,
    pub eligible_lines: usize,
    /// true when fewer eligible lines than the budget existed
    pub exhausted: bool,
}

impl SampleResult {
    pub fn indices(&self) -> Vec<usize> {
        self.selected.iter().map(|s| s.line_index).collect()
    }
}

// splitmix64: a counter-based generator, one value per (seed, index)
fn mix64(seed: u64, counter: u64) -> u64 {
    let mut z = seed
        .wrapping_add(counter.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform draw in (0,1] for a given line, independent of processing order.
pub fn line_uniform(seed: u64, line_index: usize) -> f64 {
    let bits = mix64(seed, line_index as u64) >> 11;
    (bits + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[derive(Debug, Clone, Copy)]
struct Keyed {
    key: f64,
    line_index: usize,
    weight: f64,
}

impl Keyed {
    // larger key wins; ties go to the smaller line index
    fn beats(&self, other: &Keyed) -> bool {
        match self.key.total_cmp(&other.key) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => self.line_index < other.line_index,
        }
    }
}

/// Keep the `capacity` best-keyed items seen so far. Merging two reservoirs
/// is associative and commutative, so sharded runs agree with serial ones.
struct TopKeys {
    capacity: usize,
    items: Vec<Keyed>,
}

impl TopKeys {
    fn new(capacity: usize) -> Self {
        TopKeys {
            capacity,
            items: Vec::new(),
        }
    }

    fn push(&mut self, item: Keyed) {
        self.items.push(item);
        if self.items.len() > self.capacity * 2 + 16 {
            self.shrink();
        }
    }

    fn shrink(&mut self) {
        self.items
            .sort_by(|a, b| if a.beats(b) { Ordering::Less } else { Ordering::Greater });
        self.items.truncate(self.capacity);
    }

    fn merge(mut self, other: TopKeys) -> TopKeys {
        self.items.extend(other.items);
        self.shrink();
        self
    }

    fn into_sorted_by_line(mut self) -> Vec<Keyed> {
        self.shrink();
        self.items.sort_by_key(|k| k.line_index);
        self.items
    }
}

fn reservoir_select(
    weighted: impl ParallelIterator<Item = Keyed>,
    budget: usize,
) -> Vec<Keyed> {
    weighted
        .fold(
            || TopKeys::new(budget),
            |mut acc, item| {
                acc.push(item);
                acc
            },
        )
        .reduce(|| TopKeys::new(budget), TopKeys::merge)
        .into_sorted_by_line()
}

/// Weighted sampling without replacement via exponential keys. Zero-weight
/// and unscorable lines are ineligible. If fewer eligible lines than the
/// budget exist, all of them are returned and `exhausted` is set.
pub fn sample_weighted(scores: &[ScoredSentence], config: &SamplerConfig) -> Result<SampleResult> {
    let u_max = config.u_max.ok_or_else(|| {
        Error::Usage("uncertainty sampling requires U_max (percentile or explicit)".into())
    })?;
    if u_max <= 0.0 {
        return Err(Error::Usage(format!("U_max must be > 0, got {u_max}")));
    }
    if config.budget == 0 {
        return Err(Error::Usage("budget must be >= 1".into()));
    }

    let beta = config.beta;
    let eligible: Vec<(usize, f64)> = scores
        .par_iter()
        .filter_map(|s| {
            let u = s.uncertainty?;
            let w = weight(u, u_max, beta);
            if w > 0.0 {
                Some((s.line_index, w))
            } else {
                None
            }
        })
        .collect();
    let eligible_count = eligible.len();
    if eligible_count == 0 {
        return Err(Error::NoEligibleItems);
    }

    let seed = config.seed;
    let picked = reservoir_select(
        eligible.into_par_iter().map(|(line_index, w)| {
            let u = line_uniform(seed, line_index);
            Keyed {
                key: u.powf(1.0 / w),
                line_index,
                weight: w,
            }
        }),
        config.budget,
    );

    Ok(SampleResult {
        strategy: "uncsamp".into(),
        selected: picked
            .into_iter()
            .map(|k| SelectedItem {
                line_index: k.line_index,
                weight: k.weight,
            })
            .collect(),
        effective_umax: Some(u_max),
        seed: config.seed,
        total_lines: scores.len(),
        eligible_lines: eligible_count,
        exhausted: eligible_count < config.budget,
    })
}

/// Uniform sampling without replacement: the same reservoir with w = 1.
/// Unscorable lines are eligible here.
pub fn sample_random(scores: &[ScoredSentence], config: &SamplerConfig) -> Result<SampleResult> {
    if config.budget == 0 {
        return Err(Error::Usage("budget must be >= 1".into()));
    }
    if scores.is_empty() {
        return Err(Error::NoEligibleItems);
    }
    let seed = config.seed;
    let picked = reservoir_select(
        scores.par_iter().map(|s| Keyed {
            key: line_uniform(seed, s.line_index),
            line_index: s.line_index,
            weight: 1.0,
        }),
        config.budget,
    );
    Ok(SampleResult {
        strategy: "random".into(),
        selected: picked
            .into_iter()
            .map(|k| SelectedItem {
                line_index: k.line_index,
                weight: 1.0,
            })
            .collect(),
        effective_umax: None,
        seed: config.seed,
        total_lines: scores.len(),
        eligible_lines: scores.len(),
        exhausted: scores.len() < config.budget,
    })
}

/// Top-budget lines by word rarity, descending; ties by line index.
pub fn select_top_rarity(scores: &[ScoredSentence], budget: usize) -> Result<SampleResult> {
    let mut eligible: Vec<(usize, f64)> = scores
        .iter()
        .filter_map(|s| s.word_rarity.map(|wr| (s.line_index, wr)))
        .collect();
    if eligible.is_empty() {
        return Err(Error::NoEligibleItems);
    }
    eligible.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let exhausted = eligible.len() < budget;
    eligible.truncate(budget);
    eligible.sort_by_key(|&(idx, _)| idx);
    Ok(SampleResult {
        strategy: "dwf".into(),
        selected: eligible
            .into_iter()
            .map(|(line_index, wr)| SelectedItem {
                line_index,
                weight: wr,
            })
            .collect(),
        effective_umax: None,
        seed: 0,
        total_lines: scores.len(),
        eligible_lines: scores.len(),
        exhausted,
    })
}

/// Bottom-budget lines by cross-entropy, ascending; ties by line index.
/// The per-line score is carried in the `uncertainty` field of the record.
pub fn select_lowest_xent(scores: &[ScoredSentence], budget: usize) -> Result<SampleResult> {
    let mut eligible: Vec<(usize, f64)> = scores
        .iter()
        .filter_map(|s| s.uncertainty.map(|x| (s.line_index, x)))
        .collect();
    if eligible.is_empty() {
        return Err(Error::NoEligibleItems);
    }
    eligible.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let exhausted = eligible.len() < budget;
    eligible.truncate(budget);
    eligible.sort_by_key(|&(idx, _)| idx);
    Ok(SampleResult {
        strategy: "srclm".into(),
        selected: eligible
            .into_iter()
            .map(|(line_index, x)| SelectedItem {
                line_index,
                weight: x,
            })
            .collect(),
        effective_umax: None,
        seed: 0,
        total_lines: scores.len(),
        eligible_lines: scores.len(),
        exhausted,
    })
}

/// Split scorable lines into k contiguous groups by ascending uncertainty.
/// Earlier bins take the remainder, so sizes differ by at most one.
/// Bin 0 holds the lowest-uncertainty lines.
pub fn rank_bins(scores: &[ScoredSentence], k: usize) -> Result<Vec<Vec<usize>>> {
    if k == 0 {
        return Err(Error::Usage("k must be >= 1".into()));
    }
    let mut scorable: Vec<(usize, f64)> = scores
        .iter()
        .filter_map(|s| s.uncertainty.map(|u| (s.line_index, u)))
        .collect();
    let n = scorable.len();
    if n < k {
        return Err(Error::TooFewItems { n, k });
    }
    scorable.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));

    let base = n / k;
    let extra = n % k;
    let mut bins = Vec::with_capacity(k);
    let mut offset = 0;
    for bin in 0..k {
        let size = base + usize::from(bin < extra);
        bins.push(
            scorable[offset..offset + size]
                .iter()
                .map(|&(idx, _)| idx)
                .collect(),
        );
        offset += size;
    }
    Ok(bins)
}

pub const TERCILE_LABELS: [&str; 3] = ["Low", "Medium", "High"];

/// Three equal-sized uncertainty groups, labeled Low/Medium/High.
pub fn group_terciles(scores: &[ScoredSentence]) -> Result<Vec<(&'static str, Vec<usize>)>> {
    let bins = rank_bins(scores, 3)?;
    Ok(TERCILE_LABELS.iter().copied().zip(bins).collect())
}

/// A named selection algorithm. All variants consume the same score
/// records and produce the same result shape, so they are interchangeable
/// behind the registry.
pub trait SelectionStrategy: Sync {
    fn name(&self) -> &'static str;
    /// Whether the strategy draws randomness (and thus requires a seed).
    fn randomized(&self) -> bool;
    fn select(&self, scores: &[ScoredSentence], config: &SamplerConfig) -> Result<SampleResult>;
}

struct UncertaintySampling;

impl SelectionStrategy for UncertaintySampling {
    fn name(&self) -> &'static str {
        "uncsamp"
    }
    fn randomized(&self) -> bool {
        true
    }
    fn select(&self, scores: &[ScoredSentence], config: &SamplerConfig) -> Result<SampleResult> {
        sample_weighted(scores, config)
    }
}

struct RandomSampling;

impl SelectionStrategy for RandomSampling {
    fn name(&self) -> &'static str {
        "random"
    }
    fn randomized(&self) -> bool {
        true
    }
    fn select(&self, scores: &[ScoredSentence], config: &SamplerConfig) -> Result<SampleResult> {
        sample_random(scores, config)
    }
}

struct TopRarity;

impl SelectionStrategy for TopRarity {
    fn name(&self) -> &'static str {
        "dwf"
    }
    fn randomized(&self) -> bool {
        false
    }
    fn select(&self, scores: &[ScoredSentence], config: &SamplerConfig) -> Result<SampleResult> {
        select_top_rarity(scores, config.budget)
    }
}

struct LowestCrossEntropy;

impl SelectionStrategy for LowestCrossEntropy {
    fn name(&self) -> &'static str {
        "srclm"
    }
    fn randomized(&self) -> bool {
        false
    }
    fn select(&self, scores: &[ScoredSentence], config: &SamplerConfig) -> Result<SampleResult> {
        select_lowest_xent(scores, config.budget)
    }
}

static STRATEGIES: [&dyn SelectionStrategy; 4] = [
    &UncertaintySampling,
    &RandomSampling,
    &TopRarity,
    &LowestCrossEntropy,
];

pub fn registry() -> &'static [&'static dyn SelectionStrategy] {
    &STRATEGIES
}

pub fn strategy_by_name(name: &str) -> Result<&'static dyn SelectionStrategy> {
    registry()
        .iter()
        .copied()
        .find(|s| s.name() == name)
        .ok_or_else(|| {
            let known: Vec<&str> = registry().iter().map(|s| s.name()).collect();
            Error::Usage(format!(
                "unknown strategy '{name}', expected one of {}",
                known.join("|")
            ))
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scored(items: &[(usize, Option<f64>)]) -> Vec<ScoredSentence> {
        items
            .iter()
            .map(|&(line_index, uncertainty)| ScoredSentence {
                line_index,
                uncertainty,
                token_count: 1,
                oov_count: 0,
                word_rarity: None,
                coverage: None,
            })
            .collect()
    }

    #[test]
    fn umax_nearest_rank() {
        let scores: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert_eq!(compute_umax(&scores, 90.0).unwrap(), 90.0);
        assert_eq!(compute_umax(&scores, 100.0).unwrap(), 100.0);
        assert_eq!(compute_umax(&scores, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn umax_empty_errors() {
        assert!(compute_umax(&[], 90.0).is_err());
    }

    #[test]
    fn umax_matches_brute_force() {
        // smallest value with >= R% of values at or below it
        let scores = [0.4, 0.1, 0.9, 0.5, 0.5, 0.2, 0.7];
        for r in [50.0, 80.0, 90.0, 100.0] {
            let got = compute_umax(&scores, r).unwrap();
            let mut sorted = scores.to_vec();
            sorted.sort_by(f64::total_cmp);
            let expected = *sorted
                .iter()
                .find(|&&c| {
                    let at_or_below = scores.iter().filter(|&&x| x <= c).count();
                    at_or_below as f64 / scores.len() as f64 >= r / 100.0
                })
                .unwrap();
            assert_eq!(got, expected, "R={r}");
        }
    }

    #[test]
    fn alpha_boundary_values() {
        assert_eq!(alpha(1.0, 1.0), 1.0);
        assert_eq!(alpha(2.0, 1.0), 0.0);
        assert!((alpha(1.5, 1.0) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(alpha(0.5, 1.0), 1.0);
        assert_eq!(alpha(10.0, 1.0), 0.0);
    }

    #[test]
    fn alpha_non_increasing() {
        let u_max = 2.3;
        let mut prev = alpha(0.0, u_max);
        for i in 1..1000 {
            let u = i as f64 * 0.01;
            let a = alpha(u, u_max);
            assert!(a <= prev + 1e-15);
            prev = a;
        }
    }

    #[test]
    fn weight_zero_uncertainty() {
        assert_eq!(weight(0.0, 1.0, 1.0), 0.0);
        assert_eq!(weight(0.0, 1.0, 2.0), 0.0);
    }

    #[test]
    fn weight_relative_values() {
        // U in {1,2,3}, U_max=10, beta=1 -> weights proportional to 1:2:3
        let w: Vec<f64> = [1.0, 2.0, 3.0].iter().map(|&u| weight(u, 10.0, 1.0)).collect();
        let total: f64 = w.iter().sum();
        assert!((w[0] / total - 1.0 / 6.0).abs() < 1e-12);
        assert!((w[1] / total - 2.0 / 6.0).abs() < 1e-12);
        assert!((w[2] / total - 3.0 / 6.0).abs() < 1e-12);
        // beta=2 -> 1:4:9
        let w2: Vec<f64> = [1.0, 2.0, 3.0].iter().map(|&u| weight(u, 10.0, 2.0)).collect();
        let total2: f64 = w2.iter().sum();
        assert!((w2[0] / total2 - 1.0 / 14.0).abs() < 1e-12);
        assert!((w2[2] / total2 - 9.0 / 14.0).abs() < 1e-12);
    }

    #[test]
    fn sample_exhausts_when_budget_large() {
        let scores = scored(&[(0, Some(1.0)), (1, Some(2.0)), (2, Some(0.0)), (3, None)]);
        let cfg = SamplerConfig::new(10, 1.0, Some(5.0), 42);
        let result = sample_weighted(&scores, &cfg).unwrap();
        // zero-weight line 2 and unscorable line 3 are ineligible
        assert_eq!(result.indices(), vec![0, 1]);
        assert!(result.exhausted);
    }

    #[test]
    fn sample_deterministic_and_thread_independent() {
        let scores: Vec<ScoredSentence> =
            scored(&(0..1000).map(|i| (i, Some(0.1 + (i % 37) as f64 * 0.05))).collect::<Vec<_>>());
        let cfg = SamplerConfig::new(50, 2.0, Some(1.5), 7);
        let a = sample_weighted(&scores, &cfg).unwrap();
        let b = sample_weighted(&scores, &cfg).unwrap();
        assert_eq!(a.indices(), b.indices());

        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let c = pool.install(|| sample_weighted(&scores, &cfg).unwrap());
        assert_eq!(a.indices(), c.indices());
    }

    #[test]
    fn sample_never_selects_zero_weight() {
        let scores = scored(&[(0, Some(0.0)), (1, Some(1.0)), (2, Some(0.0))]);
        let cfg = SamplerConfig::new(2, 1.0, Some(2.0), 1);
        let result = sample_weighted(&scores, &cfg).unwrap();
        assert_eq!(result.indices(), vec![1]);
    }

    #[test]
    fn sample_no_eligible_errors() {
        let scores = scored(&[(0, Some(0.0)), (1, None)]);
        let cfg = SamplerConfig::new(1, 1.0, Some(2.0), 1);
        assert!(matches!(
            sample_weighted(&scores, &cfg),
            Err(Error::NoEligibleItems)
        ));
    }

    #[test]
    fn sample_output_sorted_unique() {
        let scores: Vec<ScoredSentence> =
            scored(&(0..500).map(|i| (i, Some(1.0))).collect::<Vec<_>>());
        let cfg = SamplerConfig::new(100, 1.0, Some(2.0), 3);
        let result = sample_weighted(&scores, &cfg).unwrap();
        let idx = result.indices();
        assert_eq!(idx.len(), 100);
        for w in idx.windows(2) {
            assert!(w[0] < w[1]);
        }
    }

    #[test]
    fn scale_invariance_of_selection() {
        // scaling U and U_max by c scales weights by c^beta, which cancels
        let scores = scored(&(0..200).map(|i| (i, Some(0.2 + (i % 11) as f64 * 0.3))).collect::<Vec<_>>());
        let scaled: Vec<ScoredSentence> = scores
            .iter()
            .map(|s| ScoredSentence {
                uncertainty: s.uncertainty.map(|u| u * 7.0),
                ..s.clone()
            })
            .collect();
        let cfg1 = SamplerConfig::new(30, 2.0, Some(1.7), 99);
        let cfg2 = SamplerConfig::new(30, 2.0, Some(1.7 * 7.0), 99);
        let a = sample_weighted(&scores, &cfg1).unwrap();
        let b = sample_weighted(&scaled, &cfg2).unwrap();
        assert_eq!(a.indices(), b.indices());
    }

    #[test]
    fn random_uniform_and_deterministic() {
        let scores = scored(&(0..100).map(|i| (i, if i % 3 == 0 { None } else { Some(1.0) })).collect::<Vec<_>>());
        let cfg = SamplerConfig::new(10, 0.0, None, 5);
        let a = sample_random(&scores, &cfg).unwrap();
        let b = sample_random(&scores, &cfg).unwrap();
        assert_eq!(a.indices(), b.indices());
        assert_eq!(a.selected.len(), 10);
        // unscorable lines are eligible for the random baseline
        assert_eq!(a.eligible_lines, 100);
    }

    #[test]
    fn random_exhaustive_small() {
        let scores = scored(&[(0, Some(1.0)), (1, None)]);
        let cfg = SamplerConfig::new(5, 0.0, None, 5);
        let r = sample_random(&scores, &cfg).unwrap();
        assert_eq!(r.indices(), vec![0, 1]);
    }

    #[test]
    fn dwf_top_rarity() {
        let mut scores = scored(&[(0, Some(1.0)), (1, Some(1.0)), (2, Some(1.0))]);
        scores[0].word_rarity = Some(0.1);
        scores[1].word_rarity = Some(0.9);
        scores[2].word_rarity = Some(0.5);
        let r = select_top_rarity(&scores, 2).unwrap();
        assert_eq!(r.indices(), vec![1, 2]);
    }

    #[test]
    fn dwf_ties_by_line_index() {
        let mut scores = scored(&[(0, None), (1, None), (2, None)]);
        for s in &mut scores {
            s.word_rarity = Some(0.5);
        }
        let r = select_top_rarity(&scores, 2).unwrap();
        assert_eq!(r.indices(), vec![0, 1]);
    }

    #[test]
    fn srclm_lowest_xent() {
        let scores = scored(&[(0, Some(3.0)), (1, Some(1.0)), (2, Some(2.0))]);
        let r = select_lowest_xent(&scores, 2).unwrap();
        assert_eq!(r.indices(), vec![1, 2]);
    }

    #[test]
    fn bins_even_split() {
        let scores = scored(&(0..10).map(|i| (i, Some(i as f64))).collect::<Vec<_>>());
        let bins = rank_bins(&scores, 5).unwrap();
        let sizes: Vec<usize> = bins.iter().map(|b| b.len()).collect();
        assert_eq!(sizes, vec![2, 2, 2, 2, 2]);
        assert_eq!(bins[0], vec![0, 1]);
        assert_eq!(bins[4], vec![8, 9]);
    }

    #[test]
    fn bins_remainder_to_early_bins() {
        let scores = scored(&(0..11).map(|i| (i, Some(i as f64))).collect::<Vec<_>>());
        let bins = rank_bins(&scores, 5).unwrap();
        let sizes: Vec<usize> = bins.iter().map(|b| b.len()).collect();
        assert_eq!(sizes, vec![3, 2, 2, 2, 2]);
    }

    #[test]
    fn bins_mean_non_decreasing() {
        let scores = scored(
            &(0..57)
                .map(|i| (i, Some(((i * 31) % 57) as f64 * 0.1)))
                .collect::<Vec<_>>(),
        );
        let bins = rank_bins(&scores, 5).unwrap();
        let by_index: std::collections::HashMap<usize, f64> = scores
            .iter()
            .map(|s| (s.line_index, s.uncertainty.unwrap()))
            .collect();
        let means: Vec<f64> = bins
            .iter()
            .map(|b| b.iter().map(|i| by_index[i]).sum::<f64>() / b.len() as f64)
            .collect();
        for w in means.windows(2) {
            assert!(w[1] >= w[0] - 1e-12);
        }
    }

    #[test]
    fn bins_too_few_items() {
        let scores = scored(&[(0, Some(1.0)), (1, Some(2.0))]);
        assert!(matches!(
            rank_bins(&scores, 5),
            Err(Error::TooFewItems { n: 2, k: 5 })
        ));
    }

    #[test]
    fn terciles_labeled() {
        let scores = scored(&(0..9).map(|i| (i, Some(i as f64))).collect::<Vec<_>>());
        let groups = group_terciles(&scores).unwrap();
        assert_eq!(groups.len(), 3);
        assert_eq!(groups[0].0, "Low");
        assert_eq!(groups[2].0, "High");
        assert_eq!(groups[0].1, vec![0, 1, 2]);
        assert_eq!(groups[2].1, vec![6, 7, 8]);
    }

    #[test]
    fn registry_lookup() {
        for name in ["uncsamp", "random", "dwf", "srclm"] {
            assert_eq!(strategy_by_name(name).unwrap().name(), name);
        }
        assert!(matches!(strategy_by_name("nope"), Err(Error::Usage(_))));
    }

    #[test]
    fn empirical_rates_match_marginal() {
        // N_s=1 with weights 1:2:3 -> inclusion probabilities 1/6, 2/6, 3/6
        let scores = scored(&[(0, Some(1.0)), (1, Some(2.0)), (2, Some(3.0))]);
        let trials = 30_000;
        let mut counts = [0usize; 3];
        for t in 0..trials {
            let cfg = SamplerConfig::new(1, 1.0, Some(10.0), t as u64);
            let r = sample_weighted(&scores, &cfg).unwrap();
            counts[r.indices()[0]] += 1;
        }
        let expected = [1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0];
        for i in 0..3 {
            let rate = counts[i] as f64 / trials as f64;
            assert!(
                (rate - expected[i]).abs() < 0.015,
                "item {i}: rate {rate} vs expected {}",
                expected[i]
            );
        }
    }

    proptest::proptest! {
        #[test]
        fn alpha_properties(u in 0.0f64..100.0, u_max in 1e-6f64..50.0) {
            let a = alpha(u, u_max);
            proptest::prop_assert!((0.0..=1.0).contains(&a));
            if u <= u_max {
                proptest::prop_assert_eq!(a, 1.0);
            }
            if u >= 2.0 * u_max {
                proptest::prop_assert_eq!(a, 0.0);
            }
            // non-increasing
            let a2 = alpha(u + 0.1, u_max);
            proptest::prop_assert!(a2 <= a + 1e-15);
        }

        #[test]
        fn umax_oracle_random(scores in proptest::collection::vec(0.0f64..10.0, 1..50),
                              r in 1.0f64..100.0) {
            let got = compute_umax(&scores, r).unwrap();
            let at_or_below = scores.iter().filter(|&&x| x <= got).count();
            proptest::prop_assert!(at_or_below as f64 / scores.len() as f64 >= r / 100.0 - 1e-12);
        }
    }
}
