//! Evaluation harnesses: plain and robust accuracy, greedy bit-flip attacks,
//! and trapdoor-free baselines.
//!
//! The attacks measure how well a classifier survives bounded Hamming
//! perturbations (a greedy attack upper-bounds robust accuracy; an exhaustive
//! mode is exact at tiny budgets). The baselines are deliberately cheap
//! learners — positional frequency, serial correlation, block chi-square, and
//! a logistic linear unit — that demonstrate, not prove, that the task resists
//! learning without the trapdoor: every threshold is fit on a training split
//! and scored on a held-out split.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::bits::BitString;
use crate::classify::{ball_size, for_each_combination, CandidateSet};
use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::task::{Dataset, LabeledSample};

/// Held-out accuracy with a 95% binomial confidence radius.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    pub per_class_accuracy: [f64; 2],
    pub n_samples: usize,
    pub confidence_radius: f64,
}

/// Outcome of one perturbation attack on one record.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttackResult {
    pub success: bool,
    pub perturbed: BitString,
    pub flips_used: usize,
}

/// Stream of the dataset seed reserved for the train/test split shuffle.
const SPLIT_STREAM: u64 = u64::MAX;
/// Base stream for per-epoch training shuffles (stream = base + epoch).
const TRAIN_SHUFFLE_STREAM: u64 = u64::MAX - (1 << 20);
/// Largest Hamming ball the exhaustive attack mode will enumerate.
const EXACT_ATTACK_CAP: u128 = 1 << 20;

impl EvalReport {
    fn from_tallies(correct: [usize; 2], total: [usize; 2]) -> Result<EvalReport> {
        let n_samples = total[0] + total[1];
        if n_samples == 0 {
            return Err(Error::param("cannot evaluate on an empty dataset"));
        }
        let hits = correct[0] + correct[1];
        let per_class = [0, 1].map(|c| {
            if total[c] == 0 {
                f64::NAN
            } else {
                correct[c] as f64 / total[c] as f64
            }
        });
        Ok(EvalReport {
            accuracy: hits as f64 / n_samples as f64,
            per_class_accuracy: per_class,
            n_samples,
            confidence_radius: confidence_radius_95(hits, n_samples),
        })
    }

    /// Machine-readable `field=value` lines; `prefix` namespaces the fields.
    pub fn flat(&self, prefix: &str) -> String {
        let dot = if prefix.is_empty() { "" } else { "." };
        format!(
            "{p}{dot}accuracy={:.6}\n{p}{dot}class0_accuracy={:.6}\n{p}{dot}class1_accuracy={:.6}\n{p}{dot}n_samples={}\n{p}{dot}ci95={:.6}\n",
            self.accuracy,
            self.per_class_accuracy[0],
            self.per_class_accuracy[1],
            self.n_samples,
            self.confidence_radius,
            p = prefix,
        )
    }
}

impl std::fmt::Display for EvalReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "accuracy {:.4} +- {:.4} (class 0: {:.4}, class 1: {:.4}, n={})",
            self.accuracy,
            self.confidence_radius,
            self.per_class_accuracy[0],
            self.per_class_accuracy[1],
            self.n_samples
        )
    }
}

/// Fraction of samples the classifier labels correctly, overall and per class.
pub fn eval_accuracy<C>(classifier: C, dataset: &Dataset) -> Result<EvalReport>
where
    C: Fn(&BitString) -> Result<u8> + Sync,
{
    let tallies = dataset
        .samples
        .par_iter()
        .map(|sample| -> Result<([usize; 2], [usize; 2])> {
            let predicted = classifier(&sample.record)?;
            let class = usize::from(sample.label);
            let mut correct = [0usize; 2];
            let mut total = [0usize; 2];
            total[class] = 1;
            correct[class] = usize::from(predicted == sample.label);
            Ok((correct, total))
        })
        .try_reduce(
            || ([0; 2], [0; 2]),
            |a, b| Ok(([a.0[0] + b.0[0], a.0[1] + b.0[1]], [a.1[0] + b.1[0], a.1[1] + b.1[1]])),
        )?;
    EvalReport::from_tallies(tallies.0, tallies.1)
}

/// Greedily flip up to `budget` bits to push the classifier off `true_label`.
///
/// Each step tries the not-yet-flipped positions in index order and keeps the
/// first flip that misclassifies; if none does, it keeps the first position as
/// a stepping stone. Success means the final label differs from `true_label`.
pub fn greedy_flip_attack<C>(
    classifier: C,
    record: &BitString,
    true_label: u8,
    budget: usize,
) -> Result<AttackResult>
where
    C: Fn(&BitString) -> Result<u8>,
{
    let all_positions: Vec<usize> = (0..record.len()).collect();
    greedy_flip_attack_over(classifier, record, true_label, budget, &all_positions)
}

/// [`greedy_flip_attack`] restricted to a set of flippable positions.
pub fn greedy_flip_attack_over<C>(
    classifier: C,
    record: &BitString,
    true_label: u8,
    budget: usize,
    allowed: &[usize],
) -> Result<AttackResult>
where
    C: Fn(&BitString) -> Result<u8>,
{
    let mut perturbed = record.clone();
    if classifier(&perturbed)? != true_label {
        return Ok(AttackResult {
            success: true,
            perturbed,
            flips_used: 0,
        });
    }
    let mut used = vec![false; record.len()];
    let mut flips_used = 0;
    for _ in 0..budget {
        let mut found_hit = false;
        let mut fallback = None;
        for &pos in allowed.iter().filter(|&&p| !used[p]) {
            perturbed.flip(pos);
            if classifier(&perturbed)? != true_label {
                used[pos] = true;
                flips_used += 1;
                found_hit = true;
                break;
            }
            perturbed.flip(pos);
            if fallback.is_none() {
                fallback = Some(pos);
            }
        }
        if found_hit {
            return Ok(AttackResult {
                success: true,
                perturbed,
                flips_used,
            });
        }
        match fallback {
            Some(pos) => {
                perturbed.flip(pos);
                used[pos] = true;
                flips_used += 1;
            }
            None => break, // every allowed position already flipped
        }
    }
    let success = classifier(&perturbed)? != true_label;
    Ok(AttackResult {
        success,
        perturbed,
        flips_used,
    })
}

/// Suffix-only greedy attack against a radius/tolerance classifier, driven by
/// a prebuilt [`CandidateSet`] so each probe is a few XOR/popcount passes
/// instead of a generator walk. Semantics match [`greedy_flip_attack_over`]
/// on the suffix position mask, with the classifier "candidate distance <=
/// tolerance".
pub fn greedy_packed_suffix_attack(
    candidates: &CandidateSet,
    record: &BitString,
    seed_len: usize,
    tolerance: usize,
    true_label: u8,
    budget: usize,
) -> AttackResult {
    let suffix_len = record.len() - seed_len;
    let mut packed = record.slice(seed_len, record.len()).pack();
    let classify = |p: &crate::bits::PackedBits| u8::from(candidates.within_tolerance(p, tolerance));

    let rebuild = |flips: &[usize], record: &BitString| {
        let mut out = record.clone();
        for &pos in flips {
            out.flip(seed_len + pos);
        }
        out
    };

    if classify(&packed) != true_label {
        return AttackResult {
            success: true,
            perturbed: record.clone(),
            flips_used: 0,
        };
    }
    let mut used = vec![false; suffix_len];
    let mut flips: Vec<usize> = Vec::new();
    for _ in 0..budget {
        let mut found_hit = false;
        let mut fallback = None;
        for pos in (0..suffix_len).filter(|&p| !used[p]) {
            packed.flip(pos);
            if classify(&packed) != true_label {
                used[pos] = true;
                flips.push(pos);
                found_hit = true;
                break;
            }
            packed.flip(pos);
            if fallback.is_none() {
                fallback = Some(pos);
            }
        }
        if found_hit {
            return AttackResult {
                success: true,
                perturbed: rebuild(&flips, record),
                flips_used: flips.len(),
            };
        }
        match fallback {
            Some(pos) => {
                packed.flip(pos);
                used[pos] = true;
                flips.push(pos);
            }
            None => break,
        }
    }
    AttackResult {
        success: classify(&packed) != true_label,
        perturbed: rebuild(&flips, record),
        flips_used: flips.len(),
    }
}

/// Fraction of samples on which the greedy attack fails. An upper-bound
/// estimate of robust accuracy: greedy is not exhaustive, so true robust
/// accuracy can only be lower.
pub fn eval_robust_accuracy<C>(classifier: C, dataset: &Dataset, budget: usize) -> Result<EvalReport>
where
    C: Fn(&BitString) -> Result<u8> + Sync,
{
    eval_per_sample(dataset, |sample| {
        let attack = greedy_flip_attack(&classifier, &sample.record, sample.label, budget)?;
        Ok(!attack.success)
    })
}

/// Exact robust accuracy by enumerating the entire Hamming ball of radius
/// `budget` around every record. Only feasible for tiny budgets and records;
/// the candidate count is capped.
pub fn eval_robust_accuracy_exact<C>(
    classifier: C,
    dataset: &Dataset,
    budget: usize,
) -> Result<EvalReport>
where
    C: Fn(&BitString) -> Result<u8> + Sync,
{
    let record_len = dataset
        .samples
        .first()
        .map(|s| s.record.len())
        .unwrap_or_default();
    let count = ball_size(record_len, budget);
    if count > EXACT_ATTACK_CAP {
        return Err(Error::CapacityExceeded(format!(
            "exhaustive ball has {count} points (cap {EXACT_ATTACK_CAP}); use the greedy mode"
        )));
    }
    eval_per_sample(dataset, |sample| {
        for flips in 0..=budget {
            let mut misclassified = false;
            let mut err = None;
            for_each_combination(sample.record.len(), flips, |positions| {
                if misclassified || err.is_some() {
                    return;
                }
                let mut candidate = sample.record.clone();
                for &p in positions {
                    candidate.flip(p);
                }
                match classifier(&candidate) {
                    Ok(label) => misclassified = label != sample.label,
                    Err(e) => err = Some(e),
                }
            });
            if let Some(e) = err {
                return Err(e);
            }
            if misclassified {
                return Ok(false);
            }
        }
        Ok(true)
    })
}

/// Tally an arbitrary per-sample pass/fail judgment into an [`EvalReport`].
/// The building block behind the accuracy evaluators; exposed for callers
/// that drive their own attack or classification loop per sample.
pub fn eval_per_sample<F>(dataset: &Dataset, correct_fn: F) -> Result<EvalReport>
where
    F: Fn(&LabeledSample) -> Result<bool> + Sync,
{
    let tallies = dataset
        .samples
        .par_iter()
        .map(|sample| -> Result<([usize; 2], [usize; 2])> {
            let class = usize::from(sample.label);
            let mut correct = [0usize; 2];
            let mut total = [0usize; 2];
            total[class] = 1;
            correct[class] = usize::from(correct_fn(sample)?);
            Ok((correct, total))
        })
        .try_reduce(
            || ([0; 2], [0; 2]),
            |a, b| Ok(([a.0[0] + b.0[0], a.0[1] + b.0[1]], [a.1[0] + b.1[0], a.1[1] + b.1[1]])),
        )?;
    EvalReport::from_tallies(tallies.0, tallies.1)
}

/// Deterministic 50/50 class-stratified split driven by the dataset seed.
pub fn stratified_split(dataset: &Dataset) -> Result<(Dataset, Dataset)> {
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, sample) in dataset.samples.iter().enumerate() {
        by_class[usize::from(sample.label)].push(i);
    }
    if by_class.iter().any(|c| c.len() < 2) {
        return Err(Error::param(
            "stratified split needs at least 2 samples of each class",
        ));
    }
    let mut rng = stream_rng(dataset.rng_seed, SPLIT_STREAM);
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for class in &mut by_class {
        class.shuffle(&mut rng);
        let half = class.len() / 2;
        train_idx.extend_from_slice(&class[..half]);
        test_idx.extend_from_slice(&class[half..]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    let subset = |idx: &[usize]| Dataset {
        params: dataset.params.clone(),
        modulus: dataset.modulus.clone(),
        samples: idx.iter().map(|&i| dataset.samples[i].clone()).collect(),
        rng_seed: dataset.rng_seed,
    };
    Ok((subset(&train_idx), subset(&test_idx)))
}

/// One named baseline's held-out performance.
#[derive(Clone, Debug)]
pub struct BaselineOutcome {
    pub name: &'static str,
    pub report: EvalReport,
}

/// Run every trapdoor-free statistical baseline: fit on a training split,
/// score on the held-out split. Chance-level results are the expected
/// behavior on the real task.
pub fn baseline_stat_distinguishers(dataset: &Dataset) -> Result<Vec<BaselineOutcome>> {
    let (train, test) = stratified_split(dataset)?;
    Ok(vec![
        BaselineOutcome {
            name: "position_frequency",
            report: position_frequency_baseline(&train, &test)?,
        },
        BaselineOutcome {
            name: "serial_correlation",
            report: statistic_baseline(&train, &test, best_lag_statistic(&train))?,
        },
        BaselineOutcome {
            name: "block_chi_square",
            report: statistic_baseline(&train, &test, chi_square_statistic)?,
        },
    ])
}

/// Single-position stump: pick the (position, polarity) with the best
/// training accuracy, then read that bit.
fn position_frequency_baseline(train: &Dataset, test: &Dataset) -> Result<EvalReport> {
    let len = train.samples[0].record.len();
    let mut best = (0usize, false, 0usize); // (position, polarity, train hits)
    for pos in 0..len {
        let mut hits = 0;
        for s in &train.samples {
            hits += usize::from(u8::from(s.record.bit(pos)) == s.label);
        }
        // polarity false: predict bit as label; true: predict 1 - bit
        for (polarity, h) in [(false, hits), (true, train.samples.len() - hits)] {
            if h > best.2 {
                best = (pos, polarity, h);
            }
        }
    }
    let (pos, polarity, _) = best;
    let classify = move |record: &BitString| -> Result<u8> {
        let bit = u8::from(record.bit(pos));
        Ok(if polarity { 1 - bit } else { bit })
    };
    eval_accuracy(classify, test)
}

/// Serial correlation at one lag, as a scalar record statistic.
fn serial_correlation(record: &BitString, lag: usize) -> f64 {
    if record.len() <= lag {
        return 0.0;
    }
    let n = record.len() - lag;
    let mut acc = 0.0;
    for i in 0..n {
        let a = if record.bit(i) { 0.5 } else { -0.5 };
        let b = if record.bit(i + lag) { 0.5 } else { -0.5 };
        acc += a * b;
    }
    acc / n as f64
}

/// Choose the lag in 1..=8 whose stump separates the training split best.
fn best_lag_statistic(train: &Dataset) -> impl Fn(&BitString) -> f64 {
    let mut best = (1usize, 0usize);
    for lag in 1..=8 {
        let stats: Vec<(f64, u8)> = train
            .samples
            .iter()
            .map(|s| (serial_correlation(&s.record, lag), s.label))
            .collect();
        let (threshold, polarity) = fit_stump(&stats);
        let hits = stats
            .iter()
            .filter(|(v, label)| stump_predict(*v, threshold, polarity) == *label)
            .count();
        if hits > best.1 {
            best = (lag, hits);
        }
    }
    let lag = best.0;
    move |record: &BitString| serial_correlation(record, lag)
}

/// Chi-square of non-overlapping 8-bit block counts against uniform.
fn chi_square_statistic(record: &BitString) -> f64 {
    let blocks = record.len() / 8;
    if blocks == 0 {
        return 0.0;
    }
    let mut counts = [0u32; 256];
    for b in 0..blocks {
        let mut value = 0usize;
        for i in 0..8 {
            value = (value << 1) | usize::from(record.bit(b * 8 + i));
        }
        counts[value] += 1;
    }
    let expected = blocks as f64 / 256.0;
    counts
        .iter()
        .map(|&c| {
            let d = f64::from(c) - expected;
            d * d / expected
        })
        .sum()
}

/// Fit a threshold stump on scalar statistics, score it on the test split.
fn statistic_baseline(
    train: &Dataset,
    test: &Dataset,
    statistic: impl Fn(&BitString) -> f64,
) -> Result<EvalReport> {
    let stats: Vec<(f64, u8)> = train
        .samples
        .iter()
        .map(|s| (statistic(&s.record), s.label))
        .collect();
    let (threshold, polarity) = fit_stump(&stats);
    let classify =
        move |record: &BitString| -> Result<u8> { Ok(stump_predict(statistic(record), threshold, polarity)) };
    // statistic closures are not Sync-bound; evaluate serially
    let mut correct = [0usize; 2];
    let mut total = [0usize; 2];
    for sample in &test.samples {
        let class = usize::from(sample.label);
        total[class] += 1;
        correct[class] += usize::from(classify(&sample.record)? == sample.label);
    }
    EvalReport::from_tallies(correct, total)
}

/// Best (threshold, polarity) on training pairs, deterministic under ties:
/// the lowest threshold wins, polarity false before true. Polarity false
/// predicts label 1 above the threshold.
fn fit_stump(stats: &[(f64, u8)]) -> (f64, bool) {
    let mut values: Vec<f64> = stats.iter().map(|(v, _)| *v).collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let mut candidates = vec![f64::NEG_INFINITY];
    for pair in values.windows(2) {
        candidates.push(0.5 * (pair[0] + pair[1]));
    }
    if let Some(last) = values.last() {
        candidates.push(last + 1.0);
    }
    let mut best = (f64::NEG_INFINITY, false, 0usize);
    for &threshold in &candidates {
        for polarity in [false, true] {
            let hits = stats
                .iter()
                .filter(|(v, label)| stump_predict(*v, threshold, polarity) == *label)
                .count();
            if hits > best.2 {
                best = (threshold, polarity, hits);
            }
        }
    }
    (best.0, best.1)
}

fn stump_predict(value: f64, threshold: f64, polarity: bool) -> u8 {
    let above = value > threshold;
    u8::from(above != polarity)
}

/// Train a logistic linear threshold unit on bits encoded as -1/+1 and report
/// held-out accuracy. Weights start at zero; each epoch visits the training
/// samples in a freshly shuffled order derived from the dataset seed, so
/// training is exactly reproducible.
pub fn train_linear_baseline(
    train: &Dataset,
    test: &Dataset,
    epochs: usize,
    step_size: f64,
) -> Result<EvalReport> {
    if train.samples.is_empty() || test.samples.is_empty() {
        return Err(Error::param("linear baseline needs nonempty train and test sets"));
    }
    let dim = train.samples[0].record.len();
    if test.samples.iter().any(|s| s.record.len() != dim)
        || train.samples.iter().any(|s| s.record.len() != dim)
    {
        return Err(Error::param("train and test records must share one length"));
    }

    let encode = |record: &BitString| -> Vec<f64> {
        record.iter().map(|b| if b { 1.0 } else { -1.0 }).collect()
    };
    let features: Vec<(Vec<f64>, f64)> = train
        .samples
        .iter()
        .map(|s| (encode(&s.record), if s.label == 1 { 1.0 } else { -1.0 }))
        .collect();

    let mut weights = vec![0.0f64; dim];
    let mut bias = 0.0f64;
    let mut order: Vec<usize> = (0..features.len()).collect();
    for epoch in 0..epochs {
        order.shuffle(&mut stream_rng(train.rng_seed, TRAIN_SHUFFLE_STREAM + epoch as u64));
        for &i in &order {
            let (x, y) = &features[i];
            let score: f64 = weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + bias;
            let pull = y / (1.0 + (y * score).exp()); // d(logistic loss)/d(score), negated
            for (w, v) in weights.iter_mut().zip(x) {
                *w += step_size * pull * v;
            }
            bias += step_size * pull;
        }
    }

    let mut correct = [0usize; 2];
    let mut total = [0usize; 2];
    for sample in &test.samples {
        let x = encode(&sample.record);
        let score: f64 = weights.iter().zip(&x).map(|(w, v)| w * v).sum::<f64>() + bias;
        let predicted = u8::from(score > 0.0);
        let class = usize::from(sample.label);
        total[class] += 1;
        correct[class] += usize::from(predicted == sample.label);
    }
    EvalReport::from_tallies(correct, total)
}

/// 95% confidence radius for a binomial proportion: normal approximation,
/// switching to Clopper-Pearson when either count is small.
fn confidence_radius_95(successes: usize, n: usize) -> f64 {
    debug_assert!(n > 0);
    let p = successes as f64 / n as f64;
    if successes.min(n - successes) >= 5 {
        return 1.96 * (p * (1.0 - p) / n as f64).sqrt();
    }
    let (lo, hi) = clopper_pearson_95(successes, n);
    (p - lo).max(hi - p)
}

fn clopper_pearson_95(successes: usize, n: usize) -> (f64, f64) {
    const HALF_ALPHA: f64 = 0.025;
    // lower limit: the p with P(X >= successes | p) = alpha/2 (increasing in p)
    let lo = if successes == 0 {
        0.0
    } else {
        bisect(|p| binom_upper_tail(successes, n, p) - HALF_ALPHA)
    };
    // upper limit: the p with P(X <= successes | p) = alpha/2 (decreasing in p)
    let hi = if successes == n {
        1.0
    } else {
        bisect(|p| HALF_ALPHA - binom_lower_tail(successes, n, p))
    };
    (lo, hi)
}

/// Root of an increasing function on [0, 1].
fn bisect(f: impl Fn(f64) -> f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// P(X <= k) for X ~ Binomial(n, p), summing whichever tail is shorter.
fn binom_lower_tail(k: usize, n: usize, p: f64) -> f64 {
    if p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return if k >= n { 1.0 } else { 0.0 };
    }
    if k >= n {
        return 1.0;
    }
    if k < n - k {
        (0..=k).map(|i| binom_pmf(n, i, p)).sum()
    } else {
        1.0 - (k + 1..=n).map(|i| binom_pmf(n, i, p)).sum::<f64>()
    }
}

/// P(X >= k) for X ~ Binomial(n, p).
fn binom_upper_tail(k: usize, n: usize, p: f64) -> f64 {
    if k == 0 {
        1.0
    } else {
        1.0 - binom_lower_tail(k - 1, n, p)
    }
}

fn binom_pmf(n: usize, i: usize, p: f64) -> f64 {
    (ln_binomial(n, i) + i as f64 * p.ln() + (n - i) as f64 * (1.0 - p).ln()).exp()
}

fn ln_binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k)
        .map(|j| (((n - j) as f64) / ((j + 1) as f64)).ln())
        .sum()
}
