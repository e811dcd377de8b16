//! Prime-field arithmetic with a runtime-configurable modulus.
//!
//! Elements are stored in Montgomery form over four 64-bit limbs, which covers
//! any odd prime below 2^256 (the BN254 scalar field included). A modulus is
//! interned once and handed out as a cheap `Copy` handle, so field elements are
//! plain values that can be shared freely between threads.

mod limbs;
mod prime;

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Mutex;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::Rng;
use serde::{Serialize, Serializer};
use thiserror::Error;

use limbs::Limbs;

/// Moduli must have at least this many bits: characters are encoded as field
/// elements and byte differences must never wrap.
pub const MIN_MODULUS_BITS: u64 = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FieldError {
    #[error("field modulus mismatch: {left} vs {right}")]
    ModulusMismatch { left: String, right: String },
    #[error("inversion of zero")]
    InverseOfZero,
    #[error("modulus {0} is not prime")]
    NotPrime(String),
    #[error("modulus {0} is narrower than 16 bits")]
    TooSmall(String),
    #[error("modulus {0} does not fit in 256 bits")]
    TooLarge(String),
    #[error("invalid field element literal {0:?}")]
    Parse(String),
}

#[derive(Debug)]
struct ModulusParams {
    name: String,
    p: Limbs,
    p_big: BigUint,
    /// 2^256 mod p, i.e. one in Montgomery form.
    r: Limbs,
    /// 2^512 mod p, used to enter Montgomery form.
    r2: Limbs,
    inv: u64,
    p_minus_2: Limbs,
}

static REGISTRY: Mutex<Vec<&'static ModulusParams>> = Mutex::new(Vec::new());

/// Handle to an interned prime modulus. Equal primes share one handle, so
/// equality is a pointer comparison.
#[derive(Clone, Copy)]
pub struct FieldModulus(&'static ModulusParams);

impl PartialEq for FieldModulus {
    fn eq(&self, other: &Self) -> bool {
        std::ptr::eq(self.0, other.0)
    }
}

impl Eq for FieldModulus {}

impl fmt::Debug for FieldModulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FieldModulus({}: {})", self.0.name, self.0.p_big)
    }
}

fn big_to_limbs(v: &BigUint) -> Limbs {
    let mut out = [0u64; 4];
    for (i, d) in v.iter_u64_digits().enumerate().take(4) {
        out[i] = d;
    }
    out
}

fn limbs_to_big(v: &Limbs) -> BigUint {
    let mut bytes = Vec::with_capacity(32);
    for limb in v {
        bytes.extend_from_slice(&limb.to_le_bytes());
    }
    BigUint::from_bytes_le(&bytes)
}

/// Scalar field of the BN254 curve, the default modulus.
pub const BN254_MODULUS: &str =
    "21888242871839275222246405745257275088548364400416034343698204186575808495617";

impl FieldModulus {
    pub fn bn254() -> Self {
        Self::from_decimal(BN254_MODULUS, "bn254").expect("BN254 modulus is prime")
    }

    /// Validates `p` (size bounds, 64 Miller-Rabin rounds) and interns it.
    pub fn new(p: &BigUint, name: &str) -> Result<Self, FieldError> {
        if p.bits() > 256 {
            return Err(FieldError::TooLarge(p.to_string()));
        }
        if p.bits() < MIN_MODULUS_BITS {
            return Err(FieldError::TooSmall(p.to_string()));
        }
        let mut registry = REGISTRY.lock().expect("modulus registry poisoned");
        if let Some(found) = registry.iter().find(|m| &m.p_big == p) {
            return Ok(FieldModulus(found));
        }
        if !prime::is_probable_prime(p, prime::MILLER_RABIN_ROUNDS) {
            return Err(FieldError::NotPrime(p.to_string()));
        }
        let limbs = big_to_limbs(p);
        let r = (BigUint::one() << 256u32) % p;
        let r2 = (&r * &r) % p;
        let params = ModulusParams {
            name: name.to_string(),
            p: limbs,
            p_big: p.clone(),
            r: big_to_limbs(&r),
            r2: big_to_limbs(&r2),
            inv: limbs::mont_inv(limbs[0]),
            p_minus_2: big_to_limbs(&(p - 2u32)),
        };
        let leaked: &'static ModulusParams = Box::leak(Box::new(params));
        registry.push(leaked);
        Ok(FieldModulus(leaked))
    }

    pub fn from_decimal(p: &str, name: &str) -> Result<Self, FieldError> {
        let big = p
            .trim()
            .parse::<BigUint>()
            .map_err(|_| FieldError::Parse(p.to_string()))?;
        Self::new(&big, name)
    }

    pub fn name(&self) -> &str {
        &self.0.name
    }

    pub fn p(&self) -> &BigUint {
        &self.0.p_big
    }

    pub fn zero(&self) -> FieldElement {
        FieldElement { repr: limbs::ZERO, modulus: *self }
    }

    pub fn one(&self) -> FieldElement {
        FieldElement { repr: self.0.r, modulus: *self }
    }

    fn from_canonical(&self, v: Limbs) -> FieldElement {
        let repr = limbs::mont_mul(&v, &self.0.r2, &self.0.p, self.0.inv);
        FieldElement { repr, modulus: *self }
    }

    pub fn from_u64(&self, v: u64) -> FieldElement {
        if self.0.p_big.bits() > 64 || v < self.0.p[0] {
            self.from_canonical(limbs::from_u64(v))
        } else {
            self.from_canonical(limbs::from_u64(v % self.0.p[0]))
        }
    }

    pub fn from_i64(&self, v: i64) -> FieldElement {
        let magnitude = self.from_u64(v.unsigned_abs());
        if v < 0 {
            -magnitude
        } else {
            magnitude
        }
    }

    pub fn from_biguint(&self, v: &BigUint) -> FieldElement {
        let reduced = v % &self.0.p_big;
        self.from_canonical(big_to_limbs(&reduced))
    }

    /// Parses a decimal literal, optionally negative; values are reduced mod p.
    pub fn parse(&self, s: &str) -> Result<FieldElement, FieldError> {
        let t = s.trim();
        let (neg, digits) = match t.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, t),
        };
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(FieldError::Parse(s.to_string()));
        }
        let big = digits
            .parse::<BigUint>()
            .map_err(|_| FieldError::Parse(s.to_string()))?;
        let v = self.from_biguint(&big);
        Ok(if neg { -v } else { v })
    }

    /// Uniform element of the field.
    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> FieldElement {
        let nbits = limbs::bits(&self.0.p);
        loop {
            let mut v = [0u64; 4];
            for (i, limb) in v.iter_mut().enumerate() {
                let lo = 64 * i;
                if lo >= nbits {
                    break;
                }
                let mut word: u64 = rng.gen();
                let width = nbits - lo;
                if width < 64 {
                    word &= (1u64 << width) - 1;
                }
                *limb = word;
            }
            if !limbs::geq(&v, &self.0.p) {
                return self.from_canonical(v);
            }
        }
    }
}

/// An element of a prime field, always canonically reduced.
#[derive(Clone, Copy)]
pub struct FieldElement {
    repr: Limbs,
    modulus: FieldModulus,
}

impl PartialEq for FieldElement {
    fn eq(&self, other: &Self) -> bool {
        self.modulus == other.modulus && self.repr == other.repr
    }
}

impl Eq for FieldElement {}

impl std::hash::Hash for FieldElement {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.repr.hash(state);
    }
}

/// Binary field operation selector for [`fe_arith`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldOp {
    Add,
    Sub,
    Mul,
}

/// Checked binary arithmetic; fails only when the operands live in different fields.
pub fn fe_arith(op: FieldOp, a: FieldElement, b: FieldElement) -> Result<FieldElement, FieldError> {
    match op {
        FieldOp::Add => a.try_add(&b),
        FieldOp::Sub => a.try_sub(&b),
        FieldOp::Mul => a.try_mul(&b),
    }
}

/// Total division: `(a / b, false)` for nonzero `b`, `(0, true)` otherwise.
pub fn fe_div(a: FieldElement, b: FieldElement) -> Result<(FieldElement, bool), FieldError> {
    a.check_same(&b)?;
    if b.is_zero() {
        return Ok((a.modulus.zero(), true));
    }
    let inv = b.inverse()?;
    Ok((a * inv, false))
}

impl FieldElement {
    pub fn modulus(&self) -> FieldModulus {
        self.modulus
    }

    pub fn is_zero(&self) -> bool {
        limbs::is_zero(&self.repr)
    }

    pub fn is_one(&self) -> bool {
        self.repr == self.modulus.0.r
    }

    fn check_same(&self, other: &Self) -> Result<(), FieldError> {
        if self.modulus != other.modulus {
            return Err(FieldError::ModulusMismatch {
                left: self.modulus.0.p_big.to_string(),
                right: other.modulus.0.p_big.to_string(),
            });
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Self) -> Result<Self, FieldError> {
        self.check_same(other)?;
        Ok(self.add_unchecked(other))
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self, FieldError> {
        self.check_same(other)?;
        Ok(self.sub_unchecked(other))
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self, FieldError> {
        self.check_same(other)?;
        Ok(self.mul_unchecked(other))
    }

    #[inline]
    fn add_unchecked(&self, other: &Self) -> Self {
        let m = self.modulus.0;
        FieldElement { repr: limbs::add_mod(&self.repr, &other.repr, &m.p), modulus: self.modulus }
    }

    #[inline]
    fn sub_unchecked(&self, other: &Self) -> Self {
        let m = self.modulus.0;
        FieldElement { repr: limbs::sub_mod(&self.repr, &other.repr, &m.p), modulus: self.modulus }
    }

    #[inline]
    fn mul_unchecked(&self, other: &Self) -> Self {
        let m = self.modulus.0;
        FieldElement {
            repr: limbs::mont_mul(&self.repr, &other.repr, &m.p, m.inv),
            modulus: self.modulus,
        }
    }

    pub fn square(&self) -> Self {
        self.mul_unchecked(self)
    }

    fn pow_limbs(&self, exp: &Limbs) -> Self {
        let mut acc = self.modulus.one();
        for i in (0..limbs::bits(exp)).rev() {
            acc = acc.square();
            if limbs::bit(exp, i) {
                acc = acc.mul_unchecked(self);
            }
        }
        acc
    }

    pub fn pow(&self, exp: &BigUint) -> Self {
        self.pow_limbs(&big_to_limbs(exp))
    }

    /// Multiplicative inverse via Fermat's little theorem.
    pub fn inverse(&self) -> Result<Self, FieldError> {
        if self.is_zero() {
            return Err(FieldError::InverseOfZero);
        }
        Ok(self.pow_limbs(&self.modulus.0.p_minus_2))
    }

    fn canonical(&self) -> Limbs {
        let m = self.modulus.0;
        limbs::mont_mul(&self.repr, &limbs::from_u64(1), &m.p, m.inv)
    }

    pub fn to_biguint(&self) -> BigUint {
        limbs_to_big(&self.canonical())
    }

    /// The canonical value if it fits in a `u64`.
    pub fn to_u64(&self) -> Option<u64> {
        let c = self.canonical();
        if c[1] == 0 && c[2] == 0 && c[3] == 0 {
            Some(c[0])
        } else {
            None
        }
    }

    pub fn to_decimal(&self) -> String {
        self.to_biguint().to_string()
    }
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_decimal())
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_decimal())
    }
}

impl Serialize for FieldElement {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_decimal())
    }
}

// Operator forms panic on a modulus mismatch; use `fe_arith` / `try_*` where the
// operands are not already known to share a field.
fn assert_same(a: &FieldElement, b: &FieldElement) {
    if let Err(e) = a.check_same(b) {
        panic!("{e}");
    }
}

impl Add for FieldElement {
    type Output = FieldElement;
    fn add(self, rhs: Self) -> Self {
        assert_same(&self, &rhs);
        self.add_unchecked(&rhs)
    }
}

impl Sub for FieldElement {
    type Output = FieldElement;
    fn sub(self, rhs: Self) -> Self {
        assert_same(&self, &rhs);
        self.sub_unchecked(&rhs)
    }
}

impl Mul for FieldElement {
    type Output = FieldElement;
    fn mul(self, rhs: Self) -> Self {
        assert_same(&self, &rhs);
        self.mul_unchecked(&rhs)
    }
}

impl Neg for FieldElement {
    type Output = FieldElement;
    fn neg(self) -> Self {
        let m = self.modulus.0;
        FieldElement { repr: limbs::neg_mod(&self.repr, &m.p), modulus: self.modulus }
    }
}

impl std::iter::Sum for FieldElement {
    fn sum<I: Iterator<Item = Self>>(mut iter: I) -> Self {
        let first = iter.next().expect("sum of an empty field-element iterator");
        iter.fold(first, |acc, x| acc + x)
    }
}

/// Useful when a caller holds a `BigUint` but needs the "is it zero mod p" test.
pub fn is_zero_mod(v: &BigUint, m: FieldModulus) -> bool {
    (v % m.p()).is_zero()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;

    const BN254: &str =
        "21888242871839275222246405745257275088548364400416034343698204186575808495617";

    fn small() -> FieldModulus {
        FieldModulus::from_decimal("65521", "p65521").unwrap()
    }

    fn bn254() -> FieldModulus {
        FieldModulus::from_decimal(BN254, "bn254").unwrap()
    }

    #[test]
    fn interned_moduli_compare_equal() {
        assert_eq!(small(), small());
        assert_ne!(small(), bn254());
    }

    #[test]
    fn rejects_composite_and_tiny_moduli() {
        assert!(matches!(
            FieldModulus::from_decimal("65535", "x"),
            Err(FieldError::NotPrime(_))
        ));
        assert!(matches!(FieldModulus::from_decimal("65521", "x"), Ok(_)));
        assert!(matches!(FieldModulus::from_decimal("251", "x"), Err(FieldError::TooSmall(_))));
        assert!(FieldModulus::from_decimal("65537", "f4").is_ok());
        assert!(matches!(FieldModulus::from_decimal("32749", "x"), Err(FieldError::TooSmall(_))));
        let too_big = (BigUint::one() << 256u32) + 297u32;
        assert!(matches!(FieldModulus::new(&too_big, "x"), Err(FieldError::TooLarge(_))));
    }

    #[test]
    fn arithmetic_examples() {
        for m in [small(), bn254()] {
            let p_minus_1 = -m.one();
            assert!(fe_arith(FieldOp::Add, p_minus_1, m.one()).unwrap().is_zero());
            let x = m.from_u64(12345);
            assert!(fe_arith(FieldOp::Mul, m.zero(), x).unwrap().is_zero());
            let d = fe_arith(FieldOp::Sub, m.from_u64(3), m.from_u64(5)).unwrap();
            assert_eq!(d.to_biguint(), m.p() - 2u32);
        }
    }

    #[test]
    fn inverse_examples() {
        for m in [small(), bn254()] {
            assert_eq!(m.one().inverse().unwrap(), m.one());
            let minus_one = -m.one();
            assert_eq!(minus_one.inverse().unwrap(), minus_one);
            assert_eq!(m.zero().inverse(), Err(FieldError::InverseOfZero));
        }
    }

    #[test]
    fn division_examples() {
        for m in [small(), bn254()] {
            assert_eq!(fe_div(m.zero(), m.zero()).unwrap(), (m.zero(), true));
            assert_eq!(fe_div(m.from_u64(6), m.from_u64(3)).unwrap(), (m.from_u64(2), false));
            let (half, flag) = fe_div(m.one(), m.from_u64(2)).unwrap();
            assert!(!flag);
            assert_eq!(half.to_biguint(), (m.p() + 1u32) / 2u32);
            assert_eq!(half * m.from_u64(2), m.one());
        }
    }

    #[test]
    fn mixing_moduli_is_an_error() {
        let a = small().one();
        let b = bn254().one();
        assert!(matches!(
            fe_arith(FieldOp::Add, a, b),
            Err(FieldError::ModulusMismatch { .. })
        ));
        assert!(fe_div(a, b).is_err());
    }

    #[test]
    #[should_panic(expected = "modulus mismatch")]
    fn operator_mixing_panics() {
        let _ = small().one() + bn254().one();
    }

    #[test]
    fn parse_and_print() {
        let m = bn254();
        assert_eq!(m.parse("-1").unwrap(), -m.one());
        assert_eq!(m.parse(BN254).unwrap(), m.zero());
        assert_eq!(m.parse("42").unwrap().to_decimal(), "42");
        assert!(m.parse("4x2").is_err());
        assert!(m.parse("").is_err());
        assert_eq!(m.from_i64(-7).to_biguint(), m.p() - 7u32);
        assert_eq!(m.from_u64(9).to_u64(), Some(9));
    }

    fn arb_pair(m: FieldModulus) -> impl Strategy<Value = (FieldElement, FieldElement, FieldElement)> {
        any::<u64>().prop_map(move |seed| {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            (m.random(&mut rng), m.random(&mut rng), m.random(&mut rng))
        })
    }

    proptest! {
        #[test]
        fn algebraic_laws_bn254((a, b, c) in arb_pair(bn254())) {
            prop_assert_eq!(a + b, b + a);
            prop_assert_eq!(a * b, b * a);
            prop_assert_eq!(a * (b + c), a * b + a * c);
            if !a.is_zero() {
                let inv = a.inverse().unwrap();
                prop_assert_eq!(a * inv, a.modulus().one());
                prop_assert_eq!(inv.inverse().unwrap(), a);
            }
            if !b.is_zero() {
                prop_assert_eq!(fe_div(a, b).unwrap().0, a * b.inverse().unwrap());
            }
        }

        #[test]
        fn matches_bigint_oracle((a, b, _c) in arb_pair(bn254())) {
            let p = a.modulus().p().clone();
            let (x, y) = (a.to_biguint(), b.to_biguint());
            prop_assert_eq!((a * b).to_biguint(), (&x * &y) % &p);
            prop_assert_eq!((a + b).to_biguint(), (&x + &y) % &p);
            prop_assert_eq!((a - b).to_biguint(), (&x + &p - &y) % &p);
        }

        #[test]
        fn algebraic_laws_small_field(x in 0u64..65521, y in 0u64..65521) {
            let m = small();
            let (a, b) = (m.from_u64(x), m.from_u64(y));
            prop_assert_eq!((a * b).to_u64().unwrap(), x * y % 65521);
            prop_assert_eq!((a + b).to_u64().unwrap(), (x + y) % 65521);
            if x != 0 {
                prop_assert_eq!(a * a.inverse().unwrap(), m.one());
            }
        }
    }
}
