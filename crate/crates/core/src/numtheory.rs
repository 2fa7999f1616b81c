//! Arbitrary-precision number theory over Blum primes and Blum integers:
//! modular exponentiation, Jacobi symbols, Miller-Rabin, prime generation,
//! CRT, and quadratic-residue square roots.
//!
//! All operations are pure functions of their inputs; randomness is always an
//! explicit parameter. Inputs that share a factor with a modulus are reported,
//! never silently fixed.

use num_bigint::{BigInt, BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;

use crate::error::{Error, Result};

/// Miller-Rabin rounds used for key generation (error at most 4^-40).
pub const KEYGEN_MR_ROUNDS: u32 = 40;

/// A prime congruent to 3 mod 4. Squaring permutes its quadratic residues and
/// the inverse permutation is `a -> a^((p+1)/4)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlumPrime {
    value: BigUint,
}

impl BlumPrime {
    /// Validate that `value` is prime (at the configured confidence) and is 3 mod 4.
    pub fn new<R: Rng + ?Sized>(value: BigUint, rng: &mut R) -> Result<Self> {
        if (&value % 4u8) != BigUint::from(3u8) {
            return Err(Error::param(format!("{value} is not congruent to 3 mod 4")));
        }
        if !miller_rabin(&value, KEYGEN_MR_ROUNDS, rng) {
            return Err(Error::param(format!("{value} is composite")));
        }
        Ok(BlumPrime { value })
    }

    pub fn value(&self) -> &BigUint {
        &self.value
    }

    pub fn bits(&self) -> u64 {
        self.value.bits()
    }

    /// The exponent `(p+1)/4` that extracts quadratic-residue square roots.
    pub fn sqrt_exponent(&self) -> BigUint {
        (&self.value + 1u8) >> 2
    }
}

/// The secret factorization `(p, q)` of a Blum integer `N = pq`, with
/// precomputed values for the square-root hot path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrapdoorKey {
    p: BlumPrime,
    q: BlumPrime,
    modulus: BigUint,
    sqrt_exp_p: BigUint,
    sqrt_exp_q: BigUint,
    p_inv_mod_q: BigUint,
    small: Option<SmallKey>,
}

/// Word-sized mirror of a key whose factors fit in u64. Lets the generator
/// walk run entirely in machine arithmetic.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct SmallKey {
    pub p: u64,
    pub q: u64,
    pub sqrt_exp_p: u64,
    pub sqrt_exp_q: u64,
    pub p_inv_mod_q: u64,
}

impl SmallKey {
    /// One backward step on a state given by its residues mod p and mod q.
    /// Caller guarantees the state is a unit quadratic residue.
    pub fn backward_residues(&self, r_p: u64, r_q: u64) -> (u64, u64) {
        (
            modpow_u64_exp(r_p, self.sqrt_exp_p, self.p),
            modpow_u64_exp(r_q, self.sqrt_exp_q, self.q),
        )
    }

    /// Recombine residues into the full state value.
    pub fn combine(&self, r_p: u64, r_q: u64) -> u128 {
        let q = self.q as u128;
        let diff = (r_q as u128 + q - (r_p % self.q) as u128) % q;
        let k = diff * self.p_inv_mod_q as u128 % q;
        r_p as u128 + self.p as u128 * k
    }
}

impl TrapdoorKey {
    pub fn new(p: BlumPrime, q: BlumPrime) -> Result<Self> {
        if p == q {
            return Err(Error::param("the two prime factors must be distinct"));
        }
        let modulus = p.value() * q.value();
        let sqrt_exp_p = p.sqrt_exponent();
        let sqrt_exp_q = q.sqrt_exponent();
        let p_inv_mod_q = mod_inverse(p.value(), q.value())
            .expect("distinct primes are coprime, so the inverse exists");
        let small = match (
            p.value().to_u64(),
            q.value().to_u64(),
            sqrt_exp_p.to_u64(),
            sqrt_exp_q.to_u64(),
            p_inv_mod_q.to_u64(),
        ) {
            (Some(p), Some(q), Some(sqrt_exp_p), Some(sqrt_exp_q), Some(p_inv_mod_q)) => {
                Some(SmallKey {
                    p,
                    q,
                    sqrt_exp_p,
                    sqrt_exp_q,
                    p_inv_mod_q,
                })
            }
            _ => None,
        };
        Ok(TrapdoorKey {
            p,
            q,
            modulus,
            sqrt_exp_p,
            sqrt_exp_q,
            p_inv_mod_q,
            small,
        })
    }

    /// Validate raw factors and assemble a key.
    pub fn from_parts<R: Rng + ?Sized>(p: BigUint, q: BigUint, rng: &mut R) -> Result<Self> {
        let p = BlumPrime::new(p, rng)?;
        let q = BlumPrime::new(q, rng)?;
        TrapdoorKey::new(p, q)
    }

    pub fn p(&self) -> &BigUint {
        self.p.value()
    }

    pub fn q(&self) -> &BigUint {
        self.q.value()
    }

    pub fn modulus(&self) -> &BigUint {
        &self.modulus
    }

    pub(crate) fn small(&self) -> Option<&SmallKey> {
        self.small.as_ref()
    }
}

/// `base^exponent mod modulus`. The modulus must be at least 2.
pub fn mod_pow(base: &BigUint, exponent: &BigUint, modulus: &BigUint) -> Result<BigUint> {
    if *modulus < BigUint::from(2u8) {
        return Err(Error::param("modulus must be at least 2"));
    }
    // Word-sized moduli dominate the generator hot path.
    if let Some(m) = modulus.to_u64() {
        let b = (base % modulus).to_u64().expect("reduced below a u64 modulus");
        return Ok(BigUint::from(modpow_u64(b, exponent, m)));
    }
    Ok(base.modpow(exponent, modulus))
}

fn modpow_u64(base: u64, exponent: &BigUint, modulus: u64) -> u64 {
    let m = modulus as u128;
    let mut b = base as u128 % m;
    let mut acc = 1u128 % m;
    for i in 0..exponent.bits() {
        if exponent.bit(i) {
            acc = acc * b % m;
        }
        b = b * b % m;
    }
    acc as u64
}

fn modpow_u64_exp(base: u64, mut exponent: u64, modulus: u64) -> u64 {
    let m = modulus as u128;
    let mut b = base as u128 % m;
    let mut acc = 1u128 % m;
    while exponent != 0 {
        if exponent & 1 == 1 {
            acc = acc * b % m;
        }
        b = b * b % m;
        exponent >>= 1;
    }
    acc as u64
}

/// The Jacobi symbol `(a/n)` for odd `n >= 3`. For prime `n` this is the
/// Legendre symbol: +1 exactly when `a` is a nonzero quadratic residue.
pub fn jacobi(a: &BigUint, n: &BigUint) -> Result<i8> {
    if n.is_even() || *n < BigUint::from(3u8) {
        return Err(Error::param("Jacobi symbol requires an odd modulus >= 3"));
    }
    if let Some(n64) = n.to_u64() {
        let a64 = (a % n).to_u64().expect("reduced below a u64 modulus");
        return Ok(jacobi_u64(a64, n64));
    }

    let mut a = a % n;
    let mut n = n.clone();
    let mut acc = 1i8;
    while !a.is_zero() {
        let twos = a.trailing_zeros().unwrap_or(0);
        if twos > 0 {
            a >>= twos;
            // (2/n) = -1 iff n = 3 or 5 mod 8
            if twos % 2 == 1 && (n.bit(1) ^ n.bit(2)) {
                acc = -acc;
            }
        }
        // quadratic reciprocity; both are odd here
        if a.bit(1) && n.bit(1) {
            acc = -acc;
        }
        std::mem::swap(&mut a, &mut n);
        a %= &n;
    }
    Ok(if n.is_one() { acc } else { 0 })
}

fn jacobi_u64(mut a: u64, mut n: u64) -> i8 {
    a %= n;
    let mut acc = 1i8;
    while a != 0 {
        let twos = a.trailing_zeros();
        a >>= twos;
        let n_mod_8 = n & 7;
        if twos % 2 == 1 && (n_mod_8 == 3 || n_mod_8 == 5) {
            acc = -acc;
        }
        if a & 3 == 3 && n & 3 == 3 {
            acc = -acc;
        }
        std::mem::swap(&mut a, &mut n);
        a %= n;
    }
    if n == 1 {
        acc
    } else {
        0
    }
}

/// Probabilistic primality test. `false` means certainly composite; `true`
/// means prime except with probability at most `4^-rounds`.
pub fn miller_rabin<R: Rng + ?Sized>(n: &BigUint, rounds: u32, rng: &mut R) -> bool {
    assert!(rounds >= 1, "at least one round is required");
    if let Some(n64) = n.to_u64() {
        return miller_rabin_u64(n64, rounds, rng);
    }
    if n.is_even() {
        return false;
    }

    let one = BigUint::one();
    let two = BigUint::from(2u8);
    let n_minus_1 = n - &one;
    let s = n_minus_1.trailing_zeros().expect("n - 1 > 0");
    let d = &n_minus_1 >> s;

    'rounds: for _ in 0..rounds {
        let base = rng.gen_biguint_range(&two, &n_minus_1);
        let mut x = base.modpow(&d, n);
        if x.is_one() || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n_minus_1 {
                continue 'rounds;
            }
        }
        return false;
    }
    true
}

fn miller_rabin_u64<R: Rng + ?Sized>(n: u64, rounds: u32, rng: &mut R) -> bool {
    match n {
        0 | 1 => return false,
        2 | 3 => return true,
        _ if n.is_multiple_of(2) => return false,
        _ => {}
    }
    let n_minus_1 = n - 1;
    let s = n_minus_1.trailing_zeros();
    let d = n_minus_1 >> s;

    'rounds: for _ in 0..rounds {
        let base = rng.gen_range(2..=n - 2);
        let mut x = modpow_u64_exp(base, d, n);
        if x == 1 || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = (x as u128 * x as u128 % n as u128) as u64;
            if x == n_minus_1 {
                continue 'rounds;
            }
        }
        return false;
    }
    true
}

/// Generate a Blum prime with exactly `bits` bits. Samples odd candidates with
/// the top bit forced and the low bits set to 3 mod 4, retrying on composites.
pub fn gen_blum_prime<R: Rng + ?Sized>(bits: u64, rng: &mut R) -> Result<BlumPrime> {
    if bits < 2 {
        return Err(Error::param("a Blum prime needs at least 2 bits"));
    }
    loop {
        let mut candidate = rng.gen_biguint(bits);
        candidate.set_bit(bits - 1, true);
        candidate.set_bit(0, true);
        candidate.set_bit(1, true);
        if miller_rabin(&candidate, KEYGEN_MR_ROUNDS, rng) {
            return Ok(BlumPrime { value: candidate });
        }
    }
}

/// The unique `x < pq` with `x = r_p mod p` and `x = r_q mod q`.
pub fn crt_pair(r_p: &BigUint, r_q: &BigUint, p: &BigUint, q: &BigUint) -> Result<BigUint> {
    if p == q {
        return Err(Error::param("CRT requires distinct moduli"));
    }
    if r_p >= p || r_q >= q {
        return Err(Error::param("CRT residues must be reduced below their moduli"));
    }
    let p_inv = mod_inverse(p, q)
        .ok_or_else(|| Error::param("CRT moduli must be coprime"))?;
    Ok(crt_with_inverse(r_p, r_q, p, q, &p_inv))
}

/// CRT recombination with a precomputed `p^-1 mod q`.
fn crt_with_inverse(
    r_p: &BigUint,
    r_q: &BigUint,
    p: &BigUint,
    q: &BigUint,
    p_inv_mod_q: &BigUint,
) -> BigUint {
    // x = r_p + p * ((r_q - r_p) * p^-1 mod q)
    let diff = ((r_q + q) - (r_p % q)) % q;
    let k = diff * p_inv_mod_q % q;
    r_p + p * k
}

fn mod_inverse(a: &BigUint, m: &BigUint) -> Option<BigUint> {
    let a = BigInt::from(a % m);
    let m = BigInt::from(m.clone());
    let ext = a.extended_gcd(&m);
    if !ext.gcd.is_one() {
        return None;
    }
    ext.x.mod_floor(&m).to_biguint()
}

/// Square root of a quadratic residue modulo a Blum prime: `a^((p+1)/4) mod p`.
/// The result is itself a quadratic residue mod `p`.
pub fn sqrt_qr_mod_prime(a: &BigUint, p: &BlumPrime) -> Result<BigUint> {
    let reduced = a % p.value();
    if jacobi(&reduced, p.value())? != 1 {
        return Err(Error::NotQuadraticResidue {
            value: a.clone(),
            modulus: p.value().clone(),
        });
    }
    mod_pow(&reduced, &p.sqrt_exponent(), p.value())
}

/// The unique square root of `x` mod `N = pq` that is itself a quadratic
/// residue. Exists and is unique for Blum integers; requires the trapdoor.
pub fn sqrt_qr_mod_blum(x: &BigUint, key: &TrapdoorKey) -> Result<BigUint> {
    let r_p = x % key.p();
    let r_q = x % key.q();
    if r_p.is_zero() || r_q.is_zero() {
        return Err(Error::SharedFactor {
            value: x.clone(),
            modulus: key.modulus().clone(),
        });
    }
    if jacobi(&r_p, key.p())? != 1 || jacobi(&r_q, key.q())? != 1 {
        return Err(Error::NotQuadraticResidue {
            value: x.clone(),
            modulus: key.modulus().clone(),
        });
    }
    let root_p = mod_pow(&r_p, &key.sqrt_exp_p, key.p())?;
    let root_q = mod_pow(&r_q, &key.sqrt_exp_q, key.q())?;
    Ok(crt_with_inverse(
        &root_p,
        &root_q,
        key.p(),
        key.q(),
        &key.p_inv_mod_q,
    ))
}

/// Whether `x` is a quadratic residue mod `N`, decided via the factorization.
pub fn is_qr_mod_blum(x: &BigUint, key: &TrapdoorKey) -> Result<bool> {
    let r_p = x % key.p();
    let r_q = x % key.q();
    if r_p.is_zero() || r_q.is_zero() {
        return Err(Error::SharedFactor {
            value: x.clone(),
            modulus: key.modulus().clone(),
        });
    }
    Ok(jacobi(&r_p, key.p())? == 1 && jacobi(&r_q, key.q())? == 1)
}
