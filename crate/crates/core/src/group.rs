//! Prime-order subgroup arithmetic modulo a prime.
//!
//! Every value that the key setup and the aggregation scheme exchange lives
//! in the order-`q` subgroup of `Z_p^*` generated by `g`. Exponents are
//! [`Scalar`]s reduced modulo `q`.

use std::fmt;

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Identifier of the hash used by [`GroupParams::hash_to_scalar`].
pub const HASH_TO_SCALAR_ID: &str = "sha256-ctr/fedsecure-h2s-v1";

const HASH_DOMAIN: &[u8] = b"fedsecure/hash-to-scalar/v1";

/// Size of the subgroup order used when generating groups of 512 bits or more.
const LARGE_GROUP_ORDER_BITS: u64 = 256;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GroupError {
    #[error("modulus p is not prime")]
    CompositeModulus,
    #[error("subgroup order q is not prime")]
    CompositeOrder,
    #[error("q does not divide p - 1")]
    OrderDoesNotDivide,
    #[error("g does not generate the order-q subgroup")]
    BadGenerator,
    #[error("bit length {0} is too small (need at least 16)")]
    BitLengthTooSmall(u64),
    #[error("value is not an element of the order-q subgroup")]
    NotInSubgroup,
    #[error("could not find a group of {0} bits")]
    GenerationFailed(u64),
}

/// An exponent in `Z_q`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Scalar(BigUint);

impl Scalar {
    pub fn value(&self) -> &BigUint {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn to_u64(&self) -> Option<u64> {
        self.0.to_u64()
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Scalar({})", self.0)
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// An element of the order-`q` subgroup, stored as its residue mod `p`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroupElement(BigUint);

impl GroupElement {
    pub fn value(&self) -> &BigUint {
        &self.0
    }

    pub fn is_identity(&self) -> bool {
        self.0.is_one()
    }
}

impl fmt::Debug for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GroupElement({})", self.0)
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Public parameters `(p, q, g)` of the cyclic group.
#[derive(Clone, PartialEq, Eq)]
pub struct GroupParams {
    p: BigUint,
    q: BigUint,
    g: BigUint,
}

impl fmt::Debug for GroupParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GroupParams")
            .field("p_bits", &self.p.bits())
            .field("q_bits", &self.q.bits())
            .field("p", &self.p.to_string())
            .field("q", &self.q.to_string())
            .field("g", &self.g.to_string())
            .finish()
    }
}

impl GroupParams {
    /// Validates an explicit `(p, q, g)` triple.
    pub fn new(p: BigUint, q: BigUint, g: BigUint) -> Result<Self, GroupError> {
        if !is_probable_prime(&p) {
            return Err(GroupError::CompositeModulus);
        }
        if !is_probable_prime(&q) {
            return Err(GroupError::CompositeOrder);
        }
        let p_minus_one = &p - 1u32;
        if !p_minus_one.is_multiple_of(&q) {
            return Err(GroupError::OrderDoesNotDivide);
        }
        if g <= BigUint::one() || g >= p || !g.modpow(&q, &p).is_one() {
            return Err(GroupError::BadGenerator);
        }
        Ok(Self { p, q, g })
    }

    /// Convenience constructor for small test groups.
    pub fn from_u64(p: u64, q: u64, g: u64) -> Result<Self, GroupError> {
        Self::new(BigUint::from(p), BigUint::from(q), BigUint::from(g))
    }

    /// Parses decimal strings, as stored in scenario files.
    pub fn from_decimal(p: &str, q: &str, g: &str) -> Option<Result<Self, GroupError>> {
        let parse = |s: &str| BigUint::parse_bytes(s.trim().as_bytes(), 10);
        Some(Self::new(parse(p)?, parse(q)?, parse(g)?))
    }

    /// Deterministically generates a Schnorr group with a `bits`-bit modulus.
    ///
    /// Up to 64 bits `q` is four bits shorter than `p`, so tests can enumerate
    /// exponents exhaustively. Below 512 bits `q` has half the bits of `p`;
    /// from 512 bits on it is 256 bits.
    pub fn generate(bits: u64, seed: u64) -> Result<Self, GroupError> {
        if bits < 16 {
            return Err(GroupError::BitLengthTooSmall(bits));
        }
        let q_bits = if bits >= 512 {
            LARGE_GROUP_ORDER_BITS
        } else if bits > 64 {
            bits / 2
        } else {
            bits - 4
        };
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let one = BigUint::one();
        let p_low = &one << (bits - 1);
        let p_high = &one << bits;
        for _ in 0..10_000 {
            let mut q = rng.gen_biguint(q_bits);
            q.set_bit(q_bits - 1, true);
            q.set_bit(0, true);
            if !is_probable_prime(&q) {
                continue;
            }
            // p = k*q + 1 with k even, p in [2^(bits-1), 2^bits).
            let k_low = (&p_low - 1u32).div_ceil(&q);
            let k_high = (&p_high - 2u32) / &q;
            if k_high <= k_low {
                continue;
            }
            let tries = if bits > 64 { 100_000 } else { 64 };
            for _ in 0..tries {
                let mut k = rng.gen_biguint_range(&k_low, &(&k_high + 1u32));
                k.set_bit(0, false);
                if k < k_low || k.is_zero() {
                    continue;
                }
                let p = &k * &q + 1u32;
                if p.bits() != bits || !is_probable_prime(&p) {
                    continue;
                }
                let two = BigUint::from(2u32);
                loop {
                    let h = rng.gen_biguint_range(&two, &(&p - 1u32));
                    let g = h.modpow(&k, &p);
                    if !g.is_one() {
                        return Self::new(p, q, g);
                    }
                }
            }
        }
        Err(GroupError::GenerationFailed(bits))
    }

    pub fn p(&self) -> &BigUint {
        &self.p
    }

    pub fn q(&self) -> &BigUint {
        &self.q
    }

    pub fn generator(&self) -> GroupElement {
        GroupElement(self.g.clone())
    }

    pub fn identity(&self) -> GroupElement {
        GroupElement(BigUint::one())
    }

    pub fn modulus_bits(&self) -> u64 {
        self.p.bits()
    }

    /// Fixed serialized width of one group element: `ceil(bits(p) / 8)`.
    pub fn element_width(&self) -> usize {
        self.p.bits().div_ceil(8) as usize
    }

    /// Wraps a residue, checking subgroup membership.
    pub fn element(&self, value: BigUint) -> Result<GroupElement, GroupError> {
        if value.is_zero() || value >= self.p || !value.modpow(&self.q, &self.p).is_one() {
            return Err(GroupError::NotInSubgroup);
        }
        Ok(GroupElement(value))
    }

    pub fn scalar(&self, value: BigUint) -> Scalar {
        Scalar(value % &self.q)
    }

    pub fn scalar_u64(&self, value: u64) -> Scalar {
        self.scalar(BigUint::from(value))
    }

    /// `value mod q` for a signed integer.
    pub fn scalar_i64(&self, value: i64) -> Scalar {
        let magnitude = self.scalar(BigUint::from(value.unsigned_abs()));
        if value < 0 {
            self.scalar_neg(&magnitude)
        } else {
            magnitude
        }
    }

    pub fn random_scalar<R: Rng + ?Sized>(&self, rng: &mut R) -> Scalar {
        Scalar(rng.gen_biguint_below(&self.q))
    }

    pub fn scalar_add(&self, a: &Scalar, b: &Scalar) -> Scalar {
        Scalar((&a.0 + &b.0) % &self.q)
    }

    pub fn scalar_mul(&self, a: &Scalar, b: &Scalar) -> Scalar {
        Scalar((&a.0 * &b.0) % &self.q)
    }

    pub fn scalar_neg(&self, a: &Scalar) -> Scalar {
        if a.0.is_zero() {
            a.clone()
        } else {
            Scalar(&self.q - &a.0)
        }
    }

    /// `base^k mod p`.
    pub fn exp(&self, base: &GroupElement, k: &Scalar) -> GroupElement {
        GroupElement(base.0.modpow(&k.0, &self.p))
    }

    /// `base^k` for a small non-negative exponent, reduced mod `q` first.
    pub fn exp_u64(&self, base: &GroupElement, k: u64) -> GroupElement {
        let k = BigUint::from(k) % &self.q;
        GroupElement(base.0.modpow(&k, &self.p))
    }

    pub fn exp_g(&self, k: &Scalar) -> GroupElement {
        GroupElement(self.g.modpow(&k.0, &self.p))
    }

    pub fn mul(&self, a: &GroupElement, b: &GroupElement) -> GroupElement {
        GroupElement((&a.0 * &b.0) % &self.p)
    }

    /// Inverse via `a^(q-1)`, valid because `a` has order dividing `q`.
    pub fn inv(&self, a: &GroupElement) -> GroupElement {
        let e = &self.q - 1u32;
        GroupElement(a.0.modpow(&e, &self.p))
    }

    pub fn div(&self, a: &GroupElement, b: &GroupElement) -> GroupElement {
        self.mul(a, &self.inv(b))
    }

    pub fn product<'a, I>(&self, items: I) -> GroupElement
    where
        I: IntoIterator<Item = &'a GroupElement>,
    {
        items.into_iter().fold(self.identity(), |acc, x| self.mul(&acc, x))
    }

    /// Full-domain hash onto `Z_q`.
    ///
    /// SHA-256 in counter mode is expanded to at least `bits(q) + 64` bits and
    /// the big-endian result is reduced modulo `q`.
    pub fn hash_to_scalar(&self, label: &[u8]) -> Scalar {
        let needed_bytes = (self.q.bits() + 64).div_ceil(8) as usize;
        let mut out = Vec::with_capacity(needed_bytes + 32);
        let mut counter: u32 = 0;
        while out.len() < needed_bytes {
            let mut h = Sha256::new();
            h.update(HASH_DOMAIN);
            h.update(counter.to_be_bytes());
            h.update((label.len() as u64).to_be_bytes());
            h.update(label);
            out.extend_from_slice(&h.finalize());
            counter += 1;
        }
        out.truncate(needed_bytes);
        Scalar(BigUint::from_bytes_be(&out) % &self.q)
    }

    /// Big-endian, zero-padded to [`element_width`](Self::element_width).
    pub fn encode_element(&self, e: &GroupElement, out: &mut Vec<u8>) {
        let width = self.element_width();
        let bytes = e.0.to_bytes_be();
        out.extend(std::iter::repeat_n(0u8, width - bytes.len()));
        out.extend_from_slice(&bytes);
    }

    pub fn decode_element(&self, bytes: &[u8]) -> Result<GroupElement, GroupError> {
        self.element(BigUint::from_bytes_be(bytes))
    }
}

const SMALL_PRIMES: [u32; 24] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
];

/// Miller-Rabin with trial division.
///
/// The first twelve prime bases are deterministic below 3.3e24; larger inputs
/// add bases derived from the candidate itself, so results are reproducible.
pub fn is_probable_prime(n: &BigUint) -> bool {
    let two = BigUint::from(2u32);
    if *n < two {
        return false;
    }
    for &sp in &SMALL_PRIMES {
        if *n == BigUint::from(sp) {
            return true;
        }
        if (n % sp).is_zero() {
            return false;
        }
    }
    for sp in (97u32..2000).step_by(2) {
        if (n % sp).is_zero() {
            return *n == BigUint::from(sp);
        }
    }

    let n_minus_one = n - 1u32;
    let s = n_minus_one.trailing_zeros().unwrap_or(0);
    let d = &n_minus_one >> s;

    let witness = |a: &BigUint| -> bool {
        let mut x = a.modpow(&d, n);
        if x.is_one() || x == n_minus_one {
            return true;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n_minus_one {
                return true;
            }
            if x.is_one() {
                return false;
            }
        }
        false
    };

    for &a in &SMALL_PRIMES[..12] {
        if !witness(&BigUint::from(a)) {
            return false;
        }
    }
    if n.bits() <= 80 {
        return true;
    }
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&Sha256::digest(n.to_bytes_be()));
    let mut rng = ChaCha20Rng::from_seed(seed);
    let upper = n - 2u32;
    (0..16).all(|_| witness(&rng.gen_biguint_range(&two, &upper)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy() -> GroupParams {
        GroupParams::from_u64(23, 11, 4).unwrap()
    }

    #[test]
    fn explicit_toy_group_is_accepted() {
        let g = toy();
        assert_eq!(BigUint::from(4u32).modpow(&BigUint::from(11u32), g.p()), BigUint::one());
    }

    #[test]
    fn rejects_bad_triples() {
        assert_eq!(GroupParams::from_u64(23, 11, 1), Err(GroupError::BadGenerator));
        assert_eq!(GroupParams::from_u64(24, 11, 4), Err(GroupError::CompositeModulus));
        assert_eq!(GroupParams::from_u64(23, 9, 4), Err(GroupError::CompositeOrder));
        assert_eq!(GroupParams::from_u64(23, 7, 4), Err(GroupError::OrderDoesNotDivide));
        // 5 has order 22 mod 23
        assert_eq!(GroupParams::from_u64(23, 11, 5), Err(GroupError::BadGenerator));
    }

    #[test]
    fn toy_exponentiation() {
        let g = toy();
        let gen = g.generator();
        assert_eq!(g.exp(&gen, &g.scalar_u64(2)).value(), &BigUint::from(16u32));
        assert!(g.exp(&gen, &g.scalar_u64(0)).is_identity());
        assert!(g.exp_u64(&gen, 11).is_identity());
    }

    #[test]
    fn toy_mul_and_inverse() {
        let g = toy();
        let a = g.element(BigUint::from(16u32)).unwrap();
        let b = g.element(BigUint::from(4u32)).unwrap();
        assert_eq!(g.mul(&a, &b).value(), &BigUint::from(18u32));
        assert_eq!(g.mul(&a, &g.identity()), a);
        let six = g.element(BigUint::from(6u32)).unwrap();
        assert_eq!(g.inv(&six).value(), &BigUint::from(4u32));
        assert!(g.mul(&six, &g.inv(&six)).is_identity());
    }

    #[test]
    fn element_rejects_non_members() {
        let g = toy();
        // 5 is a generator of the full group, not the order-11 subgroup
        assert_eq!(g.element(BigUint::from(5u32)), Err(GroupError::NotInSubgroup));
        assert_eq!(g.element(BigUint::zero()), Err(GroupError::NotInSubgroup));
        assert_eq!(g.element(BigUint::from(23u32)), Err(GroupError::NotInSubgroup));
    }

    #[test]
    fn generation_is_deterministic_and_valid() {
        for bits in [16u64, 24, 32, 48, 64, 128] {
            let a = GroupParams::generate(bits, 7).unwrap();
            let b = GroupParams::generate(bits, 7).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.modulus_bits(), bits);
            assert!(GroupParams::new(a.p().clone(), a.q().clone(), a.generator().value().clone()).is_ok());
        }
        assert_eq!(GroupParams::generate(8, 1), Err(GroupError::BitLengthTooSmall(8)));
    }

    #[test]
    fn primality_matches_trial_division() {
        fn naive(n: u64) -> bool {
            n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| !n.is_multiple_of(d))
        }
        for n in 0..20_000u64 {
            assert_eq!(is_probable_prime(&BigUint::from(n)), naive(n), "n = {n}");
        }
        // Carmichael numbers
        for n in [561u64, 1105, 1729, 2465, 2821, 6601, 8911, 3_215_031_751] {
            assert!(!is_probable_prime(&BigUint::from(n)));
        }
        assert!(is_probable_prime(&BigUint::from(18_446_744_073_709_551_557u64)));
    }

    #[test]
    fn hash_to_scalar_is_deterministic_and_in_range() {
        let g = GroupParams::generate(32, 3).unwrap();
        assert_eq!(g.hash_to_scalar(b"round:1"), g.hash_to_scalar(b"round:1"));
        let mut seen = std::collections::HashSet::new();
        for i in 0..10_000u32 {
            let label = format!("round:{i}");
            let s = g.hash_to_scalar(label.as_bytes());
            assert!(s.value() < g.q());
            seen.insert(s);
        }
        // q is ~2^28 here; 10^4 draws collide with probability ~0.2, so
        // only require that almost all values are distinct.
        assert!(seen.len() >= 9_990);

        let big = GroupParams::generate(128, 3).unwrap();
        let mut seen = std::collections::HashSet::new();
        for i in 0..10_000u32 {
            assert!(seen.insert(big.hash_to_scalar(format!("round:{i}").as_bytes())));
        }
    }

    #[test]
    fn element_encoding_is_fixed_width() {
        let g = GroupParams::generate(40, 1).unwrap();
        let e = g.identity();
        let mut buf = Vec::new();
        g.encode_element(&e, &mut buf);
        assert_eq!(buf.len(), 5);
        assert_eq!(g.decode_element(&buf).unwrap(), e);
    }

    proptest! {
        #[test]
        fn exponent_homomorphism(k1 in any::<u64>(), k2 in any::<u64>()) {
            let g = GroupParams::generate(64, 11).unwrap();
            let gen = g.generator();
            let a = g.scalar_u64(k1);
            let b = g.scalar_u64(k2);
            let lhs = g.mul(&g.exp(&gen, &a), &g.exp(&gen, &b));
            let rhs = g.exp(&gen, &g.scalar_add(&a, &b));
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn inverse_cancels(k in 1u64..u64::MAX) {
            let g = GroupParams::generate(48, 5).unwrap();
            let a = g.exp_u64(&g.generator(), k);
            prop_assert!(g.mul(&a, &g.inv(&a)).is_identity());
        }
    }
}
