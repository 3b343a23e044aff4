//! Big-integer helpers shared by the cryptographic modules.

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::RngCore;

/// Samples a unit of `Z*_n` by rejection from `[2, n-1]`.
///
/// Panics if `n < 4`, since no such unit exists.
pub fn random_unit<R: RngCore + ?Sized>(n: &BigUint, rng: &mut R) -> BigUint {
    assert!(*n >= BigUint::from(4u32), "modulus too small to sample units");
    let low = BigUint::from(2u32);
    loop {
        let candidate = rng.gen_biguint_range(&low, n);
        if candidate.gcd(n).is_one() {
            return candidate;
        }
    }
}

pub fn is_unit(value: &BigUint, n: &BigUint) -> bool {
    !value.is_zero() && value < n && value.gcd(n).is_one()
}

/// Same answer as checking each value with [`is_unit`], with a single gcd:
/// a prime factor of `n` shared with any value divides the product mod `n`.
pub fn all_units<'a>(values: impl IntoIterator<Item = &'a BigUint>, n: &BigUint) -> bool {
    let mut product = BigUint::one();
    for value in values {
        if value.is_zero() || value >= n {
            return false;
        }
        product = product * value % n;
    }
    product.gcd(n).is_one()
}

/// `count` draws of [`random_unit`]. Candidates are tested in one batch and
/// only rechecked one by one when the batch fails.
pub fn random_units<R: RngCore + ?Sized>(n: &BigUint, count: usize, rng: &mut R) -> Vec<BigUint> {
    assert!(*n >= BigUint::from(4u32), "modulus too small to sample units");
    let low = BigUint::from(2u32);
    let mut out: Vec<BigUint> = (0..count).map(|_| rng.gen_biguint_range(&low, n)).collect();
    if !all_units(&out, n) {
        for value in &mut out {
            if !value.gcd(n).is_one() {
                *value = random_unit(n, rng);
            }
        }
    }
    out
}

/// `base^e mod n` by plain square-and-multiply. For the short exponents
/// used by Benaloh (`r`, plaintexts) this beats a Montgomery setup.
pub fn pow_small(base: &BigUint, e: u64, n: &BigUint) -> BigUint {
    if e == 0 {
        return BigUint::one() % n;
    }
    let mut acc = base % n;
    let base = acc.clone();
    for bit in (0..63 - e.leading_zeros()).rev() {
        acc = &acc * &acc % n;
        if (e >> bit) & 1 == 1 {
            acc = acc * &base % n;
        }
    }
    acc
}

/// Inverses of all `values` mod `n` with one modular inversion. `None` if
/// any value is not invertible.
pub fn batch_inverse(values: &[&BigUint], n: &BigUint) -> Option<Vec<BigUint>> {
    let mut prefix = Vec::with_capacity(values.len());
    let mut acc = BigUint::one() % n;
    for value in values {
        prefix.push(acc.clone());
        acc = acc * *value % n;
    }
    let mut inv = mod_inverse(&acc, n)?;
    let mut out = vec![BigUint::default(); values.len()];
    for i in (0..values.len()).rev() {
        out[i] = &inv * &prefix[i] % n;
        inv = inv * values[i] % n;
    }
    Some(out)
}

pub fn mod_inverse(value: &BigUint, n: &BigUint) -> Option<BigUint> {
    value.modinv(n)
}

pub fn is_probable_prime(value: &BigUint) -> bool {
    num_prime::nt_funcs::is_prime(value, None).probably()
}

pub fn is_prime_u64(value: u64) -> bool {
    num_prime::nt_funcs::is_prime64(value)
}

/// Smallest odd prime strictly greater than `floor`.
pub fn next_odd_prime(floor: u64) -> u64 {
    let mut candidate = floor.max(2) + 1;
    loop {
        if candidate % 2 == 1 && is_prime_u64(candidate) {
            return candidate;
        }
        candidate += 1;
    }
}

/// Smallest prime strictly greater than `floor`.
pub fn next_prime(floor: &BigUint) -> BigUint {
    let mut candidate = floor + 1u32;
    if candidate.is_even() && candidate > BigUint::from(2u32) {
        candidate += 1u32;
    }
    while !is_probable_prime(&candidate) {
        candidate += 2u32;
    }
    candidate
}

/// Random `bits`-bit value with its two top bits set, so that the product of
/// two such values has exactly the sum of their bit lengths.
pub fn random_with_top_bits<R: RngCore + ?Sized>(bits: u64, rng: &mut R) -> BigUint {
    let mut value = rng.gen_biguint(bits);
    value.set_bit(bits - 1, true);
    if bits >= 2 {
        value.set_bit(bits - 2, true);
    }
    value
}

pub fn byte_width(bits: u64) -> usize {
    bits.div_ceil(8) as usize
}

/// Big-endian encoding left-padded to exactly `width` bytes.
///
/// Panics if the value does not fit.
pub fn to_fixed_bytes(value: &BigUint, width: usize) -> Vec<u8> {
    let raw = value.to_bytes_be();
    let raw: &[u8] = if value.is_zero() { &[] } else { &raw };
    assert!(raw.len() <= width, "value wider than {width} bytes");
    let mut out = vec![0u8; width - raw.len()];
    out.extend_from_slice(raw);
    out
}

pub fn from_bytes(bytes: &[u8]) -> BigUint {
    BigUint::from_bytes_be(bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn fixed_width_pads_and_roundtrips() {
        let v = BigUint::from(0x0102u32);
        assert_eq!(to_fixed_bytes(&v, 4), vec![0, 0, 1, 2]);
        assert_eq!(from_bytes(&to_fixed_bytes(&v, 4)), v);
        assert_eq!(to_fixed_bytes(&BigUint::zero(), 2), vec![0, 0]);
    }

    #[test]
    #[should_panic]
    fn fixed_width_rejects_overflow() {
        to_fixed_bytes(&BigUint::from(0x10000u32), 2);
    }

    #[test]
    fn odd_primes() {
        assert_eq!(next_odd_prime(1), 3);
        assert_eq!(next_odd_prime(2), 3);
        assert_eq!(next_odd_prime(5), 7);
        assert_eq!(next_odd_prime(12), 13);
        assert_eq!(next_prime(&BigUint::from(256u32)), BigUint::from(257u32));
    }

    #[test]
    fn units_are_coprime() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let n = BigUint::from(35u32);
        for _ in 0..200 {
            let u = random_unit(&n, &mut rng);
            assert!(is_unit(&u, &n));
            assert!(u >= BigUint::from(2u32));
        }
    }

    #[test]
    fn top_bits_fix_product_length() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        for _ in 0..50 {
            let a = random_with_top_bits(32, &mut rng);
            let b = random_with_top_bits(32, &mut rng);
            assert_eq!((a * b).bits(), 64);
        }
    }

    #[test]
    fn pow_small_matches_modpow() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let n = rng.gen_biguint(256) | BigUint::one();
        for e in [0u64, 1, 2, 3, 13, 1009, u64::MAX] {
            let x = rng.gen_biguint_below(&n);
            assert_eq!(pow_small(&x, e, &n), x.modpow(&BigUint::from(e), &n), "e = {e}");
        }
    }

    #[test]
    fn batch_inverse_matches_single() {
        let mut rng = ChaCha20Rng::seed_from_u64(10);
        let n = BigUint::from(1009u32 * 1013);
        let values: Vec<BigUint> = (0..12).map(|_| random_unit(&n, &mut rng)).collect();
        let refs: Vec<&BigUint> = values.iter().collect();
        let inv = batch_inverse(&refs, &n).unwrap();
        for (v, i) in values.iter().zip(&inv) {
            assert_eq!(Some(i.clone()), mod_inverse(v, &n));
        }
        let bad = BigUint::from(1009u32 * 3);
        assert!(batch_inverse(&[&values[0], &bad], &n).is_none());
        assert!(all_units(&values, &n));
        assert!(!all_units(values.iter().chain([&bad]), &n));
    }

}
