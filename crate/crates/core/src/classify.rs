//! Classification with the trapdoor.
//!
//! A prefix-mode record carries its own seed in the first `n` bits, so a key
//! holder can regenerate the suffix that seed would produce and compare. The
//! plain classifier tolerates up to `t` suffix mismatches; the robust variant
//! additionally searches all seeds within Hamming radius `r` of the observed
//! prefix, deciding membership in the (r, t)-decomposed Hamming ball around
//! the generator's support.
//!
//! For toy parameters an exhaustive oracle enumerates every seed and gives
//! exact distances; an analytic volume bound covers what no enumeration can
//! reach. Only bounded-radius robustness is implemented: efficient decoding at
//! arbitrary radius is an open gap, and the oracle is the honest substitute at
//! scales where it runs.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::bbs::{generate, sample_record};
use crate::bits::{BitString, PackedBits};
use crate::error::{Error, Result};
use crate::numtheory::TrapdoorKey;
use crate::task::TaskParams;

/// Knobs of the robust classifier: how many suffix mismatches to tolerate and
/// how far from the observed prefix to search for a matching seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClassifierConfig {
    pub suffix_tolerance: usize,
    pub prefix_radius: usize,
}

/// Exact distance from a record to the generator's support, with the seed
/// that achieves it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SupportDistance {
    pub distance: usize,
    pub witness_seed: BitString,
}

/// Hard cap on candidate seeds enumerated by the robust classifier.
const ROBUST_CANDIDATE_CAP: u128 = 1 << 20;

/// Seed-enumeration limit for the exhaustive oracles.
const ORACLE_MAX_SEED_LEN: usize = 20;

/// The default suffix tolerance `(record_len - seed_len) / 4`: a uniform
/// suffix mismatches the regenerated one in about half its positions, so a
/// quarter is far below chance yet a generous error budget.
pub fn default_tolerance(params: &TaskParams) -> usize {
    params.record_len.saturating_sub(params.seed_len) / 4
}

/// Label a record by regenerating the suffix its prefix determines: 1 when
/// the observed suffix is within `tolerance` mismatches of the regeneration.
pub fn trapdoor_classify(
    key: &TrapdoorKey,
    params: &TaskParams,
    record: &BitString,
    tolerance: usize,
) -> Result<u8> {
    let (prefix, suffix) = split_record(params, record)?;
    let regenerated = generate(&prefix, key, suffix.len())?;
    Ok(u8::from(suffix.hamming(&regenerated) <= tolerance))
}

/// Label a record 1 when any seed within `prefix_radius` of the observed
/// prefix regenerates a suffix within `suffix_tolerance` of the observed one.
pub fn robust_classify(
    key: &TrapdoorKey,
    params: &TaskParams,
    record: &BitString,
    cfg: &ClassifierConfig,
) -> Result<u8> {
    let (prefix, suffix) = split_record(params, record)?;
    let candidates = CandidateSet::build(key, params, &prefix, cfg.prefix_radius)?;
    Ok(u8::from(candidates.min_distance(&suffix) <= cfg.suffix_tolerance))
}

/// Regenerated suffixes of every seed within a Hamming ball of one prefix,
/// packed for fast repeated matching.
///
/// Building the set costs one generator walk per candidate seed; afterwards
/// each query is a handful of XOR/popcount passes. Evaluation loops that probe
/// many perturbations of the same record should build this once and query it.
pub struct CandidateSet {
    suffixes: Vec<PackedBits>,
}

impl CandidateSet {
    pub fn build(
        key: &TrapdoorKey,
        params: &TaskParams,
        prefix: &BitString,
        radius: usize,
    ) -> Result<Self> {
        if prefix.len() != params.seed_len {
            return Err(Error::param(format!(
                "prefix has {} bits, expected seed length {}",
                prefix.len(),
                params.seed_len
            )));
        }
        if radius > params.seed_len {
            return Err(Error::param(format!(
                "prefix radius {radius} exceeds seed length {}",
                params.seed_len
            )));
        }
        let count = ball_size(params.seed_len, radius);
        if count > ROBUST_CANDIDATE_CAP {
            return Err(Error::CapacityExceeded(format!(
                "radius {radius} needs {count} candidate seeds (cap {ROBUST_CANDIDATE_CAP})"
            )));
        }
        let seeds = ball_around(prefix, radius);
        let suffix_len = params.record_len - params.seed_len;
        let suffixes = seeds
            .par_iter()
            .map(|seed| Ok(generate(seed, key, suffix_len)?.pack()))
            .collect::<Result<Vec<_>>>()?;
        Ok(CandidateSet { suffixes })
    }

    /// Minimum Hamming distance from `suffix` to any candidate regeneration.
    pub fn min_distance(&self, suffix: &BitString) -> usize {
        self.min_distance_packed(&suffix.pack())
    }

    /// As [`min_distance`](Self::min_distance), without the packing step —
    /// for callers that mutate a packed suffix in place between queries.
    pub fn min_distance_packed(&self, suffix: &PackedBits) -> usize {
        self.suffixes
            .iter()
            .map(|candidate| candidate.hamming(suffix))
            .min()
            .expect("the ball always contains its center")
    }

    /// Whether any candidate lies within `tolerance` of `suffix`. Same
    /// decision as thresholding [`min_distance_packed`](Self::min_distance_packed)
    /// but exits on the first hit.
    pub fn within_tolerance(&self, suffix: &PackedBits, tolerance: usize) -> bool {
        self.suffixes
            .iter()
            .any(|candidate| candidate.hamming(suffix) <= tolerance)
    }
}

/// Exact minimum Hamming distance from a record to the full support
/// `{sample_record(s) : s}`, by enumerating all `2^seed_len` seeds.
/// Ties break toward the smallest seed value.
pub fn distance_to_support_oracle(
    key: &TrapdoorKey,
    params: &TaskParams,
    record: &BitString,
) -> Result<SupportDistance> {
    oracle_capacity_check(params)?;
    if record.len() != params.record_len {
        return Err(Error::param(format!(
            "record has {} bits, expected {}",
            record.len(),
            params.record_len
        )));
    }
    let n = params.seed_len;
    let (distance, witness) = (0u64..1 << n)
        .into_par_iter()
        .map(|value| -> Result<(usize, u64)> {
            let seed = BitString::from_uint(value, n);
            let candidate =
                sample_record(&seed, key, params.record_len, params.include_seed_prefix)?;
            Ok((record.hamming(&candidate), value))
        })
        .try_reduce(
            || (usize::MAX, u64::MAX),
            |a, b| Ok(if (b.0, b.1) < (a.0, a.1) { b } else { a }),
        )?;
    Ok(SupportDistance {
        distance,
        witness_seed: BitString::from_uint(witness, n),
    })
}

/// Ground truth for the robust classifier at toy scale: enumerate every seed
/// and test the (r, t) decomposition directly.
pub fn exhaustive_robust_classify(
    key: &TrapdoorKey,
    params: &TaskParams,
    record: &BitString,
    cfg: &ClassifierConfig,
) -> Result<u8> {
    oracle_capacity_check(params)?;
    let (prefix, suffix) = split_record(params, record)?;
    let n = params.seed_len;
    let hit = (0u64..1 << n)
        .into_par_iter()
        .map(|value| -> Result<bool> {
            let seed = BitString::from_uint(value, n);
            if seed.hamming(&prefix) > cfg.prefix_radius {
                return Ok(false);
            }
            let regenerated = generate(&seed, key, suffix.len())?;
            Ok(regenerated.hamming(&suffix) <= cfg.suffix_tolerance)
        })
        .try_reduce(|| false, |a, b| Ok(a || b))?;
    Ok(u8::from(hit))
}

/// Upper bound on the chance that a uniform record lands within Hamming
/// distance `d` of the generator's support: `min(1, 2^n * V(record_len, d) /
/// 2^record_len)` where `V` is the Hamming-ball volume. Exact integer
/// arithmetic throughout; only the final ratio is rounded.
pub fn margin_bound(seed_len: usize, record_len: usize, d: usize) -> Result<f64> {
    if d > record_len {
        return Err(Error::param(format!(
            "distance {d} exceeds record length {record_len}"
        )));
    }
    let mut ball = BigUint::zero();
    for i in 0..=d {
        ball += binomial(record_len, i);
    }
    let numerator = ball << seed_len;
    let denominator = BigUint::one() << record_len;
    if numerator >= denominator {
        return Ok(1.0);
    }
    Ok(ratio_to_f64(&numerator, &denominator))
}

/// The dummy-coordinate shortcut: the label is the last bit.
pub fn trivial_dummy_classify(record: &BitString) -> Result<u8> {
    if record.is_empty() {
        return Err(Error::param("cannot classify an empty record"));
    }
    Ok(u8::from(record.bit(record.len() - 1)))
}

fn split_record(params: &TaskParams, record: &BitString) -> Result<(BitString, BitString)> {
    if !params.include_seed_prefix {
        return Err(Error::UnsupportedMode(
            "records without a seed prefix cannot be classified with the trapdoor; \
             the prefix is what the classifier replays"
                .to_string(),
        ));
    }
    if record.len() != params.record_len {
        return Err(Error::param(format!(
            "record has {} bits, expected {}",
            record.len(),
            params.record_len
        )));
    }
    Ok((
        record.slice(0, params.seed_len),
        record.slice(params.seed_len, params.record_len),
    ))
}

fn oracle_capacity_check(params: &TaskParams) -> Result<()> {
    if params.seed_len > ORACLE_MAX_SEED_LEN {
        return Err(Error::CapacityExceeded(format!(
            "exhaustive oracle enumerates 2^seed_len seeds; seed length {} exceeds {}",
            params.seed_len, ORACLE_MAX_SEED_LEN
        )));
    }
    Ok(())
}

/// All bit strings within Hamming distance `radius` of `center`, the center
/// first, then by flip count and position order.
fn ball_around(center: &BitString, radius: usize) -> Vec<BitString> {
    let mut out = Vec::new();
    for flips in 0..=radius {
        for_each_combination(center.len(), flips, |positions| {
            let mut candidate = center.clone();
            for &p in positions {
                candidate.flip(p);
            }
            out.push(candidate);
        });
    }
    out
}

/// Number of points in a Hamming ball, saturating far above any usable cap.
pub(crate) fn ball_size(n: usize, radius: usize) -> u128 {
    let mut total = 0u128;
    for i in 0..=radius.min(n) {
        let c = binomial(n, i);
        total = total.saturating_add(c.to_u128().unwrap_or(u128::MAX));
        if total >= u128::MAX / 2 {
            return u128::MAX;
        }
    }
    total
}

/// Visit every k-subset of {0..n} in lexicographic order.
pub(crate) fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + (i - 1) {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// `num / den` as f64 for `num < den`, accurate to f64 precision even when
/// the ratio is far below `2^-64`.
fn ratio_to_f64(num: &BigUint, den: &BigUint) -> f64 {
    if num.is_zero() {
        return 0.0;
    }
    let shift = den.bits() - num.bits() + 64;
    let scaled = (num << shift) / den;
    scaled.to_f64().unwrap_or(f64::MAX) * (-(shift as f64)).exp2()
}
