use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) const MILLER_RABIN_ROUNDS: usize = 64;

const SMALL_PRIMES: [u32; 15] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47];

/// Miller-Rabin with `rounds` random bases. The base stream is seeded from `n`
/// itself, so the verdict for a given candidate never changes between runs.
pub(crate) fn is_probable_prime(n: &BigUint, rounds: usize) -> bool {
    let two = BigUint::from(2u32);
    if *n < two {
        return false;
    }
    for sp in SMALL_PRIMES {
        let sp = BigUint::from(sp);
        if *n == sp {
            return true;
        }
        if (n % &sp).is_zero() {
            return false;
        }
    }

    let n_minus_1 = n - 1u32;
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;

    let mut seed = [0u8; 32];
    for (i, b) in n.to_bytes_le().iter().enumerate() {
        seed[i % 32] ^= *b;
    }
    let mut rng = ChaCha8Rng::from_seed(seed);

    'witness: for _ in 0..rounds {
        let a = rng.gen_biguint_range(&two, &n_minus_1);
        let mut x = a.modpow(&d, n);
        if x.is_one() || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = (&x * &x) % n;
            if x == n_minus_1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force_prime(n: u64) -> bool {
        n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| n % d != 0)
    }

    #[test]
    fn agrees_with_trial_division() {
        for n in (0u64..3000).chain(65_500..65_600) {
            assert_eq!(
                is_probable_prime(&BigUint::from(n), 16),
                brute_force_prime(n),
                "n = {n}"
            );
        }
    }

    #[test]
    fn carmichael_numbers_are_composite() {
        for n in [561u64, 1105, 1729, 2465, 2821, 6601, 8911, 41041, 825265] {
            assert!(!is_probable_prime(&BigUint::from(n), MILLER_RABIN_ROUNDS));
        }
    }
}
