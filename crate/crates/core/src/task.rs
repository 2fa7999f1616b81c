//! The two-class learning task and its on-disk artifacts.
//!
//! Class 0 records are uniform random bits; class 1 records come from the
//! backward squaring generator (optionally prefixed by their own seed, and
//! optionally augmented with a dummy coordinate equal to the label). Keys and
//! datasets serialize to versioned line-oriented text so runs are exactly
//! reproducible from files alone.

use std::path::Path;

use num_bigint::BigUint;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::bbs::sample_record;
use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::numtheory::{gen_blum_prime, TrapdoorKey};
use crate::rng::{seeded_rng, stream_rng};

/// Geometry of one task instance.
///
/// `record_len` controls how much generator output a record exposes relative
/// to the seed; any value above `seed_len` exercises the construction, with
/// `4 * seed_len` as the default. `modulus_bits` below 16 is a toy scale that
/// exists for exhaustive cross-checking.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaskParams {
    pub modulus_bits: u64,
    pub seed_len: usize,
    pub record_len: usize,
    pub include_seed_prefix: bool,
    pub dummy_coordinate: bool,
}

impl TaskParams {
    /// Default geometry for a modulus size: seed slack of 64 bits over the
    /// modulus (so folding seeds into the residue group is near-uniform) and
    /// records four times the seed length.
    pub fn with_defaults(modulus_bits: u64) -> TaskParams {
        let seed_len = modulus_bits as usize + 64;
        TaskParams {
            modulus_bits,
            seed_len,
            record_len: 4 * seed_len,
            include_seed_prefix: true,
            dummy_coordinate: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.modulus_bits < 6 {
            return Err(Error::param("modulus must have at least 6 bits"));
        }
        if self.record_len == 0 {
            return Err(Error::param("record length must be at least 1"));
        }
        if self.include_seed_prefix && self.record_len <= self.seed_len {
            return Err(Error::param(format!(
                "record length {} must exceed seed length {} when records include the seed prefix",
                self.record_len, self.seed_len
            )));
        }
        Ok(())
    }

    /// Record length after optional dummy augmentation.
    pub fn stored_record_len(&self) -> usize {
        self.record_len + usize::from(self.dummy_coordinate)
    }
}

/// One record with its class label (0 = uniform, 1 = generator).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledSample {
    pub record: BitString,
    pub label: u8,
}

/// A full sampled dataset plus everything needed to regenerate it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    pub params: TaskParams,
    pub modulus: BigUint,
    pub samples: Vec<LabeledSample>,
    pub rng_seed: u64,
}

/// Generate a trapdoor key for the requested modulus size.
///
/// Both factors get `modulus_bits / 2` bits. At toy sizes (below 16 bits) a
/// width may hold a unique Blum prime, so after repeated collisions the second
/// factor is widened by a bit to guarantee distinctness.
pub fn keygen<R: Rng + ?Sized>(
    params: &TaskParams,
    rng: &mut R,
) -> Result<(TrapdoorKey, BigUint)> {
    params.validate()?;
    if !params.modulus_bits.is_multiple_of(2) {
        return Err(Error::param(
            "modulus size must be even so both factors get equal widths",
        ));
    }
    let half = params.modulus_bits / 2;
    let p = gen_blum_prime(half, rng)?;
    let mut q_bits = half;
    let mut collisions = 0;
    let q = loop {
        let candidate = gen_blum_prime(q_bits, rng)?;
        if candidate != p {
            break candidate;
        }
        collisions += 1;
        if params.modulus_bits < 16 && collisions % 8 == 0 {
            q_bits += 1;
        }
    };
    let key = TrapdoorKey::new(p, q)?;
    let modulus = key.modulus().clone();
    Ok((key, modulus))
}

/// One class-0 record: `record_len` independent fair bits.
pub fn sample_d0<R: Rng + ?Sized>(params: &TaskParams, rng: &mut R) -> BitString {
    BitString::random(params.record_len, rng)
}

/// One class-1 record: a uniform seed expanded through the generator.
pub fn sample_d1<R: Rng + ?Sized>(
    key: &TrapdoorKey,
    params: &TaskParams,
    rng: &mut R,
) -> Result<BitString> {
    let seed = BitString::random(params.seed_len, rng);
    sample_record(&seed, key, params.record_len, params.include_seed_prefix)
}

/// Append the label as a final dummy coordinate.
pub fn augment_dummy(record: &BitString, label: u8) -> BitString {
    debug_assert!(label <= 1);
    let mut out = record.clone();
    out.push(label == 1);
    out
}

/// Sample a balanced, shuffled dataset.
///
/// Each sample's randomness comes from an independent stream of `rng_seed`
/// keyed by sample index, so generation parallelizes without affecting the
/// result; stream 0 drives the final shuffle.
pub fn make_dataset(
    key: &TrapdoorKey,
    params: &TaskParams,
    count_per_class: usize,
    rng_seed: u64,
) -> Result<Dataset> {
    params.validate()?;
    if count_per_class == 0 {
        return Err(Error::param("count_per_class must be at least 1"));
    }
    let total = 2 * count_per_class;
    let mut samples = (0..total)
        .into_par_iter()
        .map(|index| {
            let mut rng = stream_rng(rng_seed, 1 + index as u64);
            let label = u8::from(index >= count_per_class);
            let record = if label == 0 {
                sample_d0(params, &mut rng)
            } else {
                sample_d1(key, params, &mut rng)?
            };
            let record = if params.dummy_coordinate {
                augment_dummy(&record, label)
            } else {
                record
            };
            Ok(LabeledSample { record, label })
        })
        .collect::<Result<Vec<_>>>()?;
    samples.shuffle(&mut stream_rng(rng_seed, 0));
    Ok(Dataset {
        params: params.clone(),
        modulus: key.modulus().clone(),
        samples,
        rng_seed,
    })
}

// --- persistence ---
//
// Key file: one `field=value` per line, in fixed order, hex for big integers:
//
//   version=1
//   p=<hex> / q=<hex> / N=<hex>
//   seed_len=<dec> / record_len=<dec>
//   include_seed_prefix=<0|1> / dummy_coordinate=<0|1>
//
// Dataset file: a header line
//
//   v1 N=<hex> n=<int> len=<int> prefix=<0|1> dummy=<0|1> seed=<int>
//
// then one `<label><space><bitstring>` line per sample, bit 0 leftmost.
// ASCII throughout, `\n` newlines. The modulus width in reconstructed params
// is the bit length of N.

const KEY_FORMAT_VERSION: &str = "1";
const DATASET_FORMAT_VERSION: &str = "v1";

/// Render a key and its task geometry in the key file format.
pub fn encode_key(key: &TrapdoorKey, params: &TaskParams) -> String {
    format!(
        "version={}\np={:x}\nq={:x}\nN={:x}\nseed_len={}\nrecord_len={}\ninclude_seed_prefix={}\ndummy_coordinate={}\n",
        KEY_FORMAT_VERSION,
        key.p(),
        key.q(),
        key.modulus(),
        params.seed_len,
        params.record_len,
        u8::from(params.include_seed_prefix),
        u8::from(params.dummy_coordinate),
    )
}

/// Parse the key file format, re-validating the factors and their product.
pub fn decode_key(text: &str) -> Result<(TrapdoorKey, TaskParams)> {
    let mut reader = FieldReader::new(text);
    let version = reader.next_field("version")?;
    if version != KEY_FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            expected: KEY_FORMAT_VERSION.to_string(),
            found: version.to_string(),
        });
    }
    let p = reader.next_hex("p")?;
    let q = reader.next_hex("q")?;
    let n = reader.next_hex("N")?;
    let n_line = reader.line_no;
    let seed_len = reader.next_count("seed_len")?;
    let record_len = reader.next_count("record_len")?;
    let include_seed_prefix = reader.next_flag("include_seed_prefix")?;
    let dummy_coordinate = reader.next_flag("dummy_coordinate")?;
    reader.expect_end()?;

    // Key files are trusted only after the arithmetic checks out.
    let key = TrapdoorKey::from_parts(p, q, &mut seeded_rng(0x7e57))?;
    if key.modulus() != &n {
        return Err(Error::parse(n_line, "N does not equal p*q"));
    }
    let params = TaskParams {
        modulus_bits: n.bits(),
        seed_len,
        record_len,
        include_seed_prefix,
        dummy_coordinate,
    };
    params.validate()?;
    Ok((key, params))
}

/// Render a dataset in the dataset file format.
pub fn encode_dataset(dataset: &Dataset) -> String {
    let mut out = format!(
        "{} N={:x} n={} len={} prefix={} dummy={} seed={}\n",
        DATASET_FORMAT_VERSION,
        dataset.modulus,
        dataset.params.seed_len,
        dataset.params.record_len,
        u8::from(dataset.params.include_seed_prefix),
        u8::from(dataset.params.dummy_coordinate),
        dataset.rng_seed,
    );
    for sample in &dataset.samples {
        out.push_str(&format!("{} {}\n", sample.label, sample.record));
    }
    out
}

/// Parse the dataset file format, validating labels and record lengths.
pub fn decode_dataset(text: &str) -> Result<Dataset> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "empty file, expected dataset header"))?;

    let mut tokens = header.split(' ');
    let version = tokens.next().unwrap_or_default();
    if version != DATASET_FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            expected: DATASET_FORMAT_VERSION.to_string(),
            found: version.to_string(),
        });
    }
    let mut header_value = |name: &str| -> Result<&str> {
        let token = tokens
            .next()
            .ok_or_else(|| Error::parse(1, format!("header is missing `{name}=`")))?;
        token
            .strip_prefix(name)
            .and_then(|rest| rest.strip_prefix('='))
            .ok_or_else(|| Error::parse(1, format!("expected header field `{name}=`, found `{token}`")))
    };
    let modulus = parse_hex(1, "N", header_value("N")?)?;
    let seed_len = parse_count(1, "n", header_value("n")?)?;
    let record_len = parse_count(1, "len", header_value("len")?)?;
    let include_seed_prefix = parse_flag(1, "prefix", header_value("prefix")?)?;
    let dummy_coordinate = parse_flag(1, "dummy", header_value("dummy")?)?;
    let rng_seed = parse_count(1, "seed", header_value("seed")?)? as u64;
    if let Some(extra) = tokens.next() {
        return Err(Error::parse(1, format!("unexpected trailing header token `{extra}`")));
    }

    let params = TaskParams {
        modulus_bits: modulus.bits(),
        seed_len,
        record_len,
        include_seed_prefix,
        dummy_coordinate,
    };
    params.validate()?;

    let expected_len = params.stored_record_len();
    let mut samples = Vec::new();
    for (index, line) in lines {
        let line_no = index + 1;
        let (label_str, bits_str) = line
            .split_once(' ')
            .ok_or_else(|| Error::parse(line_no, "expected `<label> <bits>`"))?;
        let label = match label_str {
            "0" => 0u8,
            "1" => 1u8,
            other => {
                return Err(Error::parse(line_no, format!("label must be 0 or 1, found `{other}`")))
            }
        };
        let record = BitString::parse(bits_str)
            .map_err(|e| Error::parse(line_no, e.to_string()))?;
        if record.len() != expected_len {
            return Err(Error::parse(
                line_no,
                format!("record has {} bits, expected {expected_len}", record.len()),
            ));
        }
        samples.push(LabeledSample { record, label });
    }
    Ok(Dataset {
        params,
        modulus,
        samples,
        rng_seed,
    })
}

pub fn write_key(path: &Path, key: &TrapdoorKey, params: &TaskParams) -> Result<()> {
    Ok(std::fs::write(path, encode_key(key, params))?)
}

pub fn read_key(path: &Path) -> Result<(TrapdoorKey, TaskParams)> {
    decode_key(&std::fs::read_to_string(path)?)
}

pub fn write_dataset(path: &Path, dataset: &Dataset) -> Result<()> {
    Ok(std::fs::write(path, encode_dataset(dataset))?)
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    decode_dataset(&std::fs::read_to_string(path)?)
}

/// Line-by-line `field=value` reader that reports precise locations.
struct FieldReader<'a> {
    lines: std::str::Lines<'a>,
    line_no: usize,
}

impl<'a> FieldReader<'a> {
    fn new(text: &'a str) -> Self {
        FieldReader {
            lines: text.lines(),
            line_no: 0,
        }
    }

    fn next_field(&mut self, name: &str) -> Result<&'a str> {
        let line = self.lines.next().ok_or_else(|| {
            Error::parse(self.line_no + 1, format!("file ends before field `{name}`"))
        })?;
        self.line_no += 1;
        line.strip_prefix(name)
            .and_then(|rest| rest.strip_prefix('='))
            .ok_or_else(|| {
                Error::parse(self.line_no, format!("expected field `{name}`, found `{line}`"))
            })
    }

    fn next_hex(&mut self, name: &str) -> Result<BigUint> {
        let value = self.next_field(name)?;
        parse_hex(self.line_no, name, value)
    }

    fn next_count(&mut self, name: &str) -> Result<usize> {
        let value = self.next_field(name)?;
        parse_count(self.line_no, name, value)
    }

    fn next_flag(&mut self, name: &str) -> Result<bool> {
        let value = self.next_field(name)?;
        parse_flag(self.line_no, name, value)
    }

    fn expect_end(&mut self) -> Result<()> {
        match self.lines.next() {
            None => Ok(()),
            Some(line) => Err(Error::parse(
                self.line_no + 1,
                format!("unexpected trailing content `{line}`"),
            )),
        }
    }
}

fn parse_hex(line_no: usize, name: &str, value: &str) -> Result<BigUint> {
    if value.is_empty() || !value.bytes().all(|b| b.is_ascii_hexdigit()) {
        return Err(Error::parse(
            line_no,
            format!("field `{name}` is not lowercase hexadecimal: `{value}`"),
        ));
    }
    BigUint::parse_bytes(value.as_bytes(), 16)
        .ok_or_else(|| Error::parse(line_no, format!("field `{name}` is not hexadecimal: `{value}`")))
}

fn parse_count(line_no: usize, name: &str, value: &str) -> Result<usize> {
    value
        .parse::<usize>()
        .map_err(|_| Error::parse(line_no, format!("field `{name}` is not a count: `{value}`")))
}

fn parse_flag(line_no: usize, name: &str, value: &str) -> Result<bool> {
    match value {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(Error::parse(
            line_no,
            format!("field `{name}` must be 0 or 1, found `{other}`"),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::ToPrimitive;
    use proptest::prelude::*;

    fn big(v: u64) -> BigUint {
        BigUint::from(v)
    }

    fn key_7_11() -> TrapdoorKey {
        TrapdoorKey::from_parts(big(7), big(11), &mut seeded_rng(1)).unwrap()
    }

    fn toy_params() -> TaskParams {
        TaskParams {
            modulus_bits: 7,
            seed_len: 4,
            record_len: 7,
            include_seed_prefix: true,
            dummy_coordinate: false,
        }
    }

    // --- params & keygen ---

    #[test]
    fn default_geometry_tracks_modulus_width() {
        let p = TaskParams::with_defaults(128);
        assert_eq!(p.seed_len, 192);
        assert_eq!(p.record_len, 768);
        assert!(p.include_seed_prefix);
        assert!(!p.dummy_coordinate);
        assert!(p.validate().is_ok());
    }

    #[test]
    fn params_validation_catches_bad_geometry() {
        let mut p = TaskParams::with_defaults(16);
        p.record_len = 0;
        assert!(p.validate().is_err());
        let mut p = TaskParams::with_defaults(16);
        p.record_len = p.seed_len;
        assert!(p.validate().is_err());
        p.include_seed_prefix = false;
        assert!(p.validate().is_ok());
        let mut p = TaskParams::with_defaults(16);
        p.modulus_bits = 4;
        assert!(p.validate().is_err());
    }

    #[test]
    fn toy_keygen_widens_past_the_unique_3_bit_prime() {
        let mut p = TaskParams::with_defaults(6);
        p.seed_len = 4;
        p.record_len = 16;
        let (key, n) = keygen(&p, &mut seeded_rng(9)).unwrap();
        assert_eq!(n, big(77));
        let factors = [key.p().to_u64().unwrap(), key.q().to_u64().unwrap()];
        let mut sorted = factors;
        sorted.sort();
        assert_eq!(sorted, [7, 11]);
    }

    #[test]
    fn keygen_rejects_odd_or_narrow_widths() {
        let mut p = TaskParams::with_defaults(5);
        p.seed_len = 4;
        p.record_len = 16;
        assert!(keygen(&p, &mut seeded_rng(0)).is_err()); // odd
        p.modulus_bits = 4;
        assert!(keygen(&p, &mut seeded_rng(0)).is_err()); // below toy floor
    }

    #[test]
    fn keygen_splits_real_widths_evenly() {
        for bits in [16u64, 32, 128] {
            let params = TaskParams::with_defaults(bits);
            let (key, n) = keygen(&params, &mut seeded_rng(bits)).unwrap();
            assert_eq!(key.p().bits(), bits / 2);
            assert_eq!(key.q().bits(), bits / 2);
            assert_ne!(key.p(), key.q());
            assert!(n.bits() == bits || n.bits() == bits - 1, "got {} bits", n.bits());
        }
    }

    // --- sampling ---

    #[test]
    fn class0_records_are_reproducible_fair_bits() {
        let params = toy_params();
        let a = sample_d0(&params, &mut seeded_rng(42));
        let b = sample_d0(&params, &mut seeded_rng(42));
        assert_eq!(a, b);
        assert_eq!(a.len(), 7);

        let empty = TaskParams { record_len: 0, ..toy_params() };
        assert!(sample_d0(&empty, &mut seeded_rng(0)).is_empty());
    }

    #[test]
    fn class0_marginals_are_centred() {
        let params = TaskParams { record_len: 8, ..toy_params() };
        let draws = 100_000u32;
        let mut ones = [0u32; 8];
        let mut rng = seeded_rng(7);
        for _ in 0..draws {
            let r = sample_d0(&params, &mut rng);
            for (i, count) in ones.iter_mut().enumerate() {
                *count += u32::from(r.bit(i));
            }
        }
        // 5 sigma of a fair binomial over 1e5 draws
        let tolerance = 5.0 * 0.5 / (draws as f64).sqrt();
        for (i, count) in ones.iter().enumerate() {
            let mean = f64::from(*count) / f64::from(draws);
            assert!((mean - 0.5).abs() < tolerance, "position {i} mean {mean}");
        }
    }

    #[test]
    fn class1_records_replay_the_known_walk() {
        let key = key_7_11();
        let params = toy_params();
        // find a stream whose first four bits are 0000, i.e. seed value u = 0
        let chosen = (0..10_000u64)
            .find(|s| BitString::random(4, &mut seeded_rng(*s)).to_biguint() == big(0))
            .expect("a zero-prefix stream exists");
        let record = sample_d1(&key, &params, &mut seeded_rng(chosen)).unwrap();
        assert_eq!(record, BitString::parse("0000110").unwrap());

        let no_prefix = TaskParams {
            include_seed_prefix: false,
            record_len: 3,
            ..toy_params()
        };
        let record = sample_d1(&key, &no_prefix, &mut seeded_rng(chosen)).unwrap();
        assert_eq!(record, BitString::parse("110").unwrap());
    }

    #[test]
    fn class1_sampling_is_deterministic() {
        let key = key_7_11();
        let params = toy_params();
        assert_eq!(
            sample_d1(&key, &params, &mut seeded_rng(3)).unwrap(),
            sample_d1(&key, &params, &mut seeded_rng(3)).unwrap()
        );
    }

    #[test]
    fn dummy_augmentation_appends_the_label() {
        let r = BitString::parse("0000110").unwrap();
        assert_eq!(augment_dummy(&r, 1), BitString::parse("00001101").unwrap());
        assert_eq!(augment_dummy(&BitString::new(), 0), BitString::parse("0").unwrap());
        assert_eq!(augment_dummy(&r, 0).len(), r.len() + 1);
    }

    // --- datasets ---

    #[test]
    fn datasets_are_balanced_and_deterministic() {
        let key = key_7_11();
        let params = toy_params();
        let ds = make_dataset(&key, &params, 10, 99).unwrap();
        assert_eq!(ds.samples.len(), 20);
        let ones: usize = ds.samples.iter().map(|s| usize::from(s.label)).sum();
        assert_eq!(ones, 10);
        let again = make_dataset(&key, &params, 10, 99).unwrap();
        assert_eq!(ds, again);
        assert_eq!(encode_dataset(&ds), encode_dataset(&again));
        // a different seed actually reshuffles/resamples
        let other = make_dataset(&key, &params, 10, 100).unwrap();
        assert_ne!(encode_dataset(&ds), encode_dataset(&other));
    }

    #[test]
    fn generator_records_match_their_own_prefix() {
        let key = key_7_11();
        let params = toy_params();
        let ds = make_dataset(&key, &params, 25, 5).unwrap();
        for sample in ds.samples.iter().filter(|s| s.label == 1) {
            let seed = sample.record.slice(0, params.seed_len);
            let replay = sample_record(&seed, &key, params.record_len, true).unwrap();
            assert_eq!(replay, sample.record);
        }
    }

    #[test]
    fn dummy_datasets_end_every_record_with_its_label() {
        let key = key_7_11();
        let params = TaskParams { dummy_coordinate: true, ..toy_params() };
        let ds = make_dataset(&key, &params, 8, 3).unwrap();
        for sample in &ds.samples {
            assert_eq!(sample.record.len(), 8);
            assert_eq!(u8::from(sample.record.bit(7)), sample.label);
        }
    }

    #[test]
    fn empty_datasets_are_rejected() {
        let key = key_7_11();
        assert!(make_dataset(&key, &toy_params(), 0, 1).is_err());
    }

    // --- persistence ---

    #[test]
    fn key_files_round_trip() {
        let params = TaskParams {
            modulus_bits: 7, // realized width of N = 77
            seed_len: 4,
            record_len: 16,
            include_seed_prefix: true,
            dummy_coordinate: false,
        };
        let key = key_7_11();
        let encoded = encode_key(&key, &params);
        let (key2, params2) = decode_key(&encoded).unwrap();
        assert_eq!(key, key2);
        assert_eq!(params, params2);
        assert_eq!(encode_key(&key2, &params2), encoded);
    }

    #[test]
    fn key_files_round_trip_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("toy.key");
        let params = TaskParams { modulus_bits: 7, ..toy_params() };
        let key = key_7_11();
        write_key(&path, &key, &params).unwrap();
        let (key2, params2) = read_key(&path).unwrap();
        assert_eq!((key, params), (key2, params2));
    }

    #[test]
    fn key_file_rejects_tampering() {
        let params = TaskParams { modulus_bits: 7, ..toy_params() };
        let encoded = encode_key(&key_7_11(), &params);

        let wrong_version = encoded.replace("version=1", "version=9");
        assert!(matches!(
            decode_key(&wrong_version),
            Err(Error::VersionMismatch { .. })
        ));

        // N inconsistent with p*q names the N line
        let wrong_n = encoded.replace("N=4d", "N=4f");
        match decode_key(&wrong_n) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected parse error, got {other:?}"),
        }

        // composite p is caught by revalidation
        let wrong_p = encoded.replace("p=7", "p=f");
        assert!(decode_key(&wrong_p).is_err());

        let truncated = encoded.lines().take(3).collect::<Vec<_>>().join("\n");
        match decode_key(&truncated) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn dataset_files_round_trip() {
        let key = key_7_11();
        let params = TaskParams { modulus_bits: 7, ..toy_params() };
        let ds = make_dataset(&key, &params, 10, 21).unwrap();
        let encoded = encode_dataset(&ds);
        let ds2 = decode_dataset(&encoded).unwrap();
        assert_eq!(ds, ds2);
        assert_eq!(encode_dataset(&ds2), encoded);
    }

    #[test]
    fn dataset_files_round_trip_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("toy.ds");
        let key = key_7_11();
        let params = TaskParams {
            modulus_bits: 7,
            dummy_coordinate: true,
            ..toy_params()
        };
        let ds = make_dataset(&key, &params, 5, 8).unwrap();
        write_dataset(&path, &ds).unwrap();
        assert_eq!(read_dataset(&path).unwrap(), ds);
    }

    #[test]
    fn dataset_parse_errors_name_the_line() {
        let key = key_7_11();
        let params = TaskParams { modulus_bits: 7, ..toy_params() };
        let ds = make_dataset(&key, &params, 3, 4).unwrap();
        let encoded = encode_dataset(&ds);

        // cut the final record mid-bits
        let truncated = &encoded[..encoded.len() - 3];
        match decode_dataset(truncated) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 7),
            other => panic!("expected parse error, got {other:?}"),
        }

        let bad_label = encoded.replacen("\n1 ", "\n2 ", 1);
        assert!(matches!(decode_dataset(&bad_label), Err(Error::Parse { .. })));

        let bad_bit = encoded.replacen("0000", "00x0", 1);
        assert!(matches!(decode_dataset(&bad_bit), Err(Error::Parse { .. })));

        let wrong_version = encoded.replacen("v1 ", "v2 ", 1);
        assert!(matches!(
            decode_dataset(&wrong_version),
            Err(Error::VersionMismatch { .. })
        ));

        assert!(matches!(decode_dataset(""), Err(Error::Parse { line: 1, .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        // Any dataset the sampler can produce survives a file round trip.
        #[test]
        fn sampled_datasets_round_trip(
            count in 1usize..5,
            rng_seed in any::<u64>(),
            prefix in any::<bool>(),
            dummy in any::<bool>(),
        ) {
            let key = key_7_11();
            let params = TaskParams {
                modulus_bits: 7,
                seed_len: 4,
                record_len: 9,
                include_seed_prefix: prefix,
                dummy_coordinate: dummy,
            };
            let ds = make_dataset(&key, &params, count, rng_seed).unwrap();
            let ds2 = decode_dataset(&encode_dataset(&ds)).unwrap();
            prop_assert_eq!(ds, ds2);
        }
    }

    #[test]
    fn parallel_generation_matches_serial_streams() {
        // the rayon path must agree with a hand-rolled serial derivation
        let key = key_7_11();
        let params = toy_params();
        let count = 6usize;
        let ds = make_dataset(&key, &params, count, 17).unwrap();

        let mut serial = Vec::new();
        for index in 0..2 * count {
            let mut rng = stream_rng(17, 1 + index as u64);
            let label = u8::from(index >= count);
            let record = if label == 0 {
                sample_d0(&params, &mut rng)
            } else {
                sample_d1(&key, &params, &mut rng).unwrap()
            };
            serial.push(LabeledSample { record, label });
        }
        serial.shuffle(&mut stream_rng(17, 0));
        assert_eq!(ds.samples, serial);
    }
}
