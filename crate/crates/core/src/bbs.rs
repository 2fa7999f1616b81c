//! Backward Blum-Blum-Shub generation.
//!
//! The classic squaring generator walks *forward*: x -> x^2 mod N. Squaring
//! permutes the quadratic residues of a Blum integer, so the walk can also be
//! run *backward* by repeatedly taking the unique square root that is itself a
//! quadratic residue. Running backward requires the factorization of N; the
//! output bit stream is the parity of each state along the backward walk.
//!
//! Anyone holding the trapdoor can replay the walk from a seed and check a
//! candidate bit stream cheaply. Without the trapdoor, even one backward step
//! is as hard as breaking the underlying squaring assumption.

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::numtheory::{sqrt_qr_mod_blum, TrapdoorKey};

/// Map a seed to the starting quadratic residue of its walk.
///
/// The seed's big-endian value is folded into `[2, N-2]`, nudged up past any
/// value sharing a factor with `N`, and squared. Every seed therefore lands on
/// a quadratic residue in the coprime group, where backward steps are defined.
pub fn seed_to_qr(seed: &BitString, key: &TrapdoorKey) -> BigUint {
    let n = key.modulus();
    let folded = seed.to_biguint() % (n - 3u8);
    let mut y = folded + 2u8;
    while !y.gcd(n).is_one() {
        y += 1u8;
    }
    &y * &y % n
}

/// One backward step: the unique square-root of `x` that is a quadratic
/// residue mod `N`. Requires the trapdoor.
pub fn backward_step(x: &BigUint, key: &TrapdoorKey) -> Result<BigUint> {
    sqrt_qr_mod_blum(x, key)
}

/// One forward step: `x^2 mod n`. Needs no trapdoor.
pub fn forward_step(x: &BigUint, n: &BigUint) -> BigUint {
    x * x % n
}

/// The output bit contributed by a state: its parity.
pub fn parity_bit(x: &BigUint) -> bool {
    x.bit(0)
}

/// Generate `output_len` bits by walking backward from the seed's starting
/// residue. Bit `i` is the parity of the state after `i + 1` backward steps;
/// the starting residue itself contributes no output.
pub fn generate(seed: &BitString, key: &TrapdoorKey, output_len: usize) -> Result<BitString> {
    let start = seed_to_qr(seed, key);

    // Word-sized factors admit a machine-arithmetic walk. The chain stays
    // inside the unit quadratic residues (the starting state is one, and each
    // backward step returns one), so the per-step residue checks that
    // backward_step performs are invariants here, not error paths.
    if let Some(small) = key.small() {
        let mut r_p = (&start % key.p()).to_u64().expect("residue below a u64 prime");
        let mut r_q = (&start % key.q()).to_u64().expect("residue below a u64 prime");
        let mut out = BitString::new();
        for _ in 0..output_len {
            (r_p, r_q) = small.backward_residues(r_p, r_q);
            out.push(small.combine(r_p, r_q) & 1 == 1);
        }
        return Ok(out);
    }

    let mut state = start;
    let mut out = BitString::new();
    for _ in 0..output_len {
        state = backward_step(&state, key)?;
        out.push(parity_bit(&state));
    }
    Ok(out)
}

/// Assemble a full record of `record_len` bits from a seed.
///
/// With `include_prefix` the record is the seed followed by generated bits,
/// so the whole record is determined by (and reveals) its own prefix. Without
/// it the record is generated bits only.
pub fn sample_record(
    seed: &BitString,
    key: &TrapdoorKey,
    record_len: usize,
    include_prefix: bool,
) -> Result<BitString> {
    if !include_prefix {
        return generate(seed, key, record_len);
    }
    if record_len <= seed.len() {
        return Err(Error::param(format!(
            "record length {record_len} leaves no room for generated bits after a {}-bit seed prefix",
            seed.len()
        )));
    }
    let suffix = generate(seed, key, record_len - seed.len())?;
    Ok(seed.concat(&suffix))
}
