//! Fixed-width 256-bit limb arithmetic used by the Montgomery field backend.
//!
//! Limbs are little-endian `u64` words. Nothing here knows about primality;
//! callers guarantee `p` is odd and every operand is already reduced.

pub(crate) type Limbs = [u64; 4];

pub(crate) const ZERO: Limbs = [0; 4];

#[inline(always)]
fn adc(a: u64, b: u64, carry: u64) -> (u64, u64) {
    let t = a as u128 + b as u128 + carry as u128;
    (t as u64, (t >> 64) as u64)
}

#[inline(always)]
fn sbb(a: u64, b: u64, borrow: u64) -> (u64, u64) {
    let t = (a as u128).wrapping_sub(b as u128 + borrow as u128);
    (t as u64, ((t >> 64) as u64) & 1)
}

/// `a + b * c + carry`, returned as (low, high).
#[inline(always)]
fn mac(a: u64, b: u64, c: u64, carry: u64) -> (u64, u64) {
    let t = a as u128 + (b as u128) * (c as u128) + carry as u128;
    (t as u64, (t >> 64) as u64)
}

#[inline(always)]
pub(crate) fn geq(a: &Limbs, b: &Limbs) -> bool {
    for i in (0..4).rev() {
        if a[i] != b[i] {
            return a[i] > b[i];
        }
    }
    true
}

#[inline(always)]
fn sub_raw(a: &Limbs, b: &Limbs) -> (Limbs, u64) {
    let mut out = ZERO;
    let mut borrow = 0;
    for i in 0..4 {
        let (d, br) = sbb(a[i], b[i], borrow);
        out[i] = d;
        borrow = br;
    }
    (out, borrow)
}

#[inline(always)]
fn add_raw(a: &Limbs, b: &Limbs) -> (Limbs, u64) {
    let mut out = ZERO;
    let mut carry = 0;
    for i in 0..4 {
        let (s, c) = adc(a[i], b[i], carry);
        out[i] = s;
        carry = c;
    }
    (out, carry)
}

#[inline]
pub(crate) fn add_mod(a: &Limbs, b: &Limbs, p: &Limbs) -> Limbs {
    let (s, carry) = add_raw(a, b);
    if carry != 0 || geq(&s, p) {
        sub_raw(&s, p).0
    } else {
        s
    }
}

#[inline]
pub(crate) fn sub_mod(a: &Limbs, b: &Limbs, p: &Limbs) -> Limbs {
    let (d, borrow) = sub_raw(a, b);
    if borrow != 0 {
        add_raw(&d, p).0
    } else {
        d
    }
}

#[inline]
pub(crate) fn neg_mod(a: &Limbs, p: &Limbs) -> Limbs {
    if *a == ZERO {
        ZERO
    } else {
        sub_raw(p, a).0
    }
}

/// Montgomery product `a * b * 2^-256 mod p` (CIOS, one spare word for p close to 2^256).
#[inline]
pub(crate) fn mont_mul(a: &Limbs, b: &Limbs, p: &Limbs, inv: u64) -> Limbs {
    let mut t = [0u64; 6];
    for i in 0..4 {
        let mut carry = 0;
        for j in 0..4 {
            let (lo, hi) = mac(t[j], a[j], b[i], carry);
            t[j] = lo;
            carry = hi;
        }
        let (s, c) = adc(t[4], carry, 0);
        t[4] = s;
        t[5] = c;

        let m = t[0].wrapping_mul(inv);
        let (_, mut carry) = mac(t[0], m, p[0], 0);
        for j in 1..4 {
            let (lo, hi) = mac(t[j], m, p[j], carry);
            t[j - 1] = lo;
            carry = hi;
        }
        let (s, c) = adc(t[4], carry, 0);
        t[3] = s;
        t[4] = t[5] + c;
    }
    let r = [t[0], t[1], t[2], t[3]];
    if t[4] != 0 || geq(&r, p) {
        sub_raw(&r, p).0
    } else {
        r
    }
}

/// `-p^-1 mod 2^64` for odd `p0`.
pub(crate) fn mont_inv(p0: u64) -> u64 {
    let mut inv: u64 = 1;
    for _ in 0..6 {
        inv = inv.wrapping_mul(2u64.wrapping_sub(p0.wrapping_mul(inv)));
    }
    inv.wrapping_neg()
}

pub(crate) fn is_zero(a: &Limbs) -> bool {
    *a == ZERO
}

pub(crate) fn bit(a: &Limbs, i: usize) -> bool {
    (a[i / 64] >> (i % 64)) & 1 == 1
}

pub(crate) fn bits(a: &Limbs) -> usize {
    for i in (0..4).rev() {
        if a[i] != 0 {
            return 64 * i + 64 - a[i].leading_zeros() as usize;
        }
    }
    0
}

pub(crate) fn from_u64(v: u64) -> Limbs {
    [v, 0, 0, 0]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mont_inv_is_negated_inverse() {
        for p0 in [1u64, 3, 65521, 0x43e1f593f0000001, u64::MAX] {
            let inv = mont_inv(p0);
            assert_eq!(p0.wrapping_mul(inv), u64::MAX, "p0 = {p0}");
        }
    }

    #[test]
    fn add_and_sub_wrap_at_modulus() {
        let p = from_u64(65521);
        assert_eq!(add_mod(&from_u64(65520), &from_u64(1), &p), ZERO);
        assert_eq!(sub_mod(&from_u64(3), &from_u64(5), &p), from_u64(65519));
        assert_eq!(neg_mod(&ZERO, &p), ZERO);
    }
}
