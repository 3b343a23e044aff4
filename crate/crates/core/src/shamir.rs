//! (k, n) Shamir secret sharing over a prime field.
//!
//! Used to escrow the Benaloh factor `p` across the check-ins of a cycle.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Mutex;

use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, Zero};
use rand::RngCore;
use thiserror::Error;

use crate::arith;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ShareError {
    #[error("invalid sharing parameters: {0}")]
    Parameter(String),
    #[error("need {needed} shares, got {got}")]
    InsufficientShares { needed: usize, got: usize },
    #[error("duplicate share index {0}")]
    DuplicateIndex(u32),
    #[error("malformed share encoding")]
    Encoding,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShareParams {
    threshold: usize,
    total: usize,
    field_prime: BigUint,
}

impl ShareParams {
    pub fn new(threshold: usize, total: usize, field_prime: BigUint) -> Result<Self, ShareError> {
        if threshold == 0 || threshold > total {
            return Err(ShareError::Parameter(format!(
                "threshold {threshold} must lie in [1, {total}]"
            )));
        }
        if total > u32::MAX as usize {
            return Err(ShareError::Parameter("too many shares".into()));
        }
        if field_prime <= BigUint::from(total) || !arith::is_probable_prime(&field_prime) {
            return Err(ShareError::Parameter("field modulus must be a prime above n".into()));
        }
        Ok(Self { threshold, total, field_prime })
    }

    /// Parameters for escrowing the factor of a `modulus_bits`-bit Benaloh
    /// modulus: the field prime is the smallest prime above
    /// `2^(modulus_bits / 2)`.
    pub fn for_modulus(threshold: usize, total: usize, modulus_bits: u64) -> Result<Self, ShareError> {
        // the prime depends on the size alone and every cycle asks for it
        static PRIMES: Mutex<BTreeMap<u64, BigUint>> = Mutex::new(BTreeMap::new());
        let prime = PRIMES
            .lock()
            .expect("prime cache")
            .entry(modulus_bits / 2)
            .or_insert_with(|| arith::next_prime(&(BigUint::one() << (modulus_bits / 2))))
            .clone();
        Self::new(threshold, total, prime)
    }

    pub fn threshold(&self) -> usize {
        self.threshold
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn field_prime(&self) -> &BigUint {
        &self.field_prime
    }

    pub fn value_len(&self) -> usize {
        arith::byte_width(self.field_prime.bits())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Share {
    pub index: u32,
    pub value: BigUint,
}

impl Share {
    /// `index` as 4-byte big-endian, then the value at field width.
    pub fn to_bytes(&self, params: &ShareParams) -> Vec<u8> {
        let mut out = self.index.to_be_bytes().to_vec();
        out.extend(arith::to_fixed_bytes(&self.value, params.value_len()));
        out
    }

    pub fn from_bytes(bytes: &[u8], params: &ShareParams) -> Result<Self, ShareError> {
        if bytes.len() != 4 + params.value_len() {
            return Err(ShareError::Encoding);
        }
        let index = u32::from_be_bytes(bytes[..4].try_into().expect("four bytes"));
        let value = arith::from_bytes(&bytes[4..]);
        if index == 0 || value >= params.field_prime {
            return Err(ShareError::Encoding);
        }
        Ok(Self { index, value })
    }
}

/// Random polynomial of degree `k - 1` with constant term `secret`,
/// evaluated at `x = 1..=n`.
pub fn split<R: RngCore + ?Sized>(
    secret: &BigUint,
    params: &ShareParams,
    rng: &mut R,
) -> Result<Vec<Share>, ShareError> {
    let prime = &params.field_prime;
    if secret >= prime {
        return Err(ShareError::Parameter("secret does not fit in the field".into()));
    }
    let mut coefficients = vec![secret.clone()];
    for _ in 1..params.threshold {
        coefficients.push(rng.gen_biguint_below(prime));
    }
    Ok(split_with_coefficients(&coefficients, params))
}

pub(crate) fn split_with_coefficients(coefficients: &[BigUint], params: &ShareParams) -> Vec<Share> {
    (1..=params.total as u32)
        .map(|index| Share {
            index,
            value: evaluate(coefficients, &BigUint::from(index), &params.field_prime),
        })
        .collect()
}

fn evaluate(coefficients: &[BigUint], x: &BigUint, prime: &BigUint) -> BigUint {
    coefficients
        .iter()
        .rev()
        .fold(BigUint::zero(), |acc, c| (acc * x + c) % prime)
}

/// Lagrange interpolation at zero over the first `k` shares.
pub fn reconstruct(shares: &[Share], params: &ShareParams) -> Result<BigUint, ShareError> {
    let mut seen = BTreeSet::new();
    for share in shares {
        if share.index == 0 || share.value >= params.field_prime {
            return Err(ShareError::Encoding);
        }
        if !seen.insert(share.index) {
            return Err(ShareError::DuplicateIndex(share.index));
        }
    }
    if shares.len() < params.threshold {
        return Err(ShareError::InsufficientShares {
            needed: params.threshold,
            got: shares.len(),
        });
    }
    Ok(interpolate_at(&shares[..params.threshold], &BigUint::zero(), &params.field_prime))
}

/// Value at `x` of the unique polynomial of degree `< shares.len()` through
/// the given points.
pub(crate) fn interpolate_at(shares: &[Share], x: &BigUint, prime: &BigUint) -> BigUint {
    let mut total = BigUint::zero();
    for (i, share_i) in shares.iter().enumerate() {
        let xi = BigUint::from(share_i.index);
        let mut numerator = BigUint::one();
        let mut denominator = BigUint::one();
        for (j, share_j) in shares.iter().enumerate() {
            if i == j {
                continue;
            }
            let xj = BigUint::from(share_j.index);
            numerator = numerator * ((x + prime - &xj) % prime) % prime;
            denominator = denominator * ((&xi + prime - &xj) % prime) % prime;
        }
        let inverse = denominator
            .modinv(prime)
            .expect("distinct indices give an invertible denominator");
        total = (total + &share_i.value * numerator % prime * inverse) % prime;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn big(v: u64) -> BigUint {
        BigUint::from(v)
    }

    fn small_params(k: usize, n: usize) -> ShareParams {
        ShareParams::new(k, n, big(257)).unwrap()
    }

    #[test]
    fn fixed_polynomial_vectors() {
        // 5 + 3x over GF(257)
        let params = small_params(2, 3);
        let shares = split_with_coefficients(&[big(5), big(3)], &params);
        let points: Vec<_> = shares.iter().map(|s| (s.index, s.value.clone())).collect();
        assert_eq!(points, vec![(1, big(8)), (2, big(11)), (3, big(14))]);
        let subset = [shares[0].clone(), shares[2].clone()];
        assert_eq!(reconstruct(&subset, &params).unwrap(), big(5));
        assert_eq!(reconstruct(&shares, &params).unwrap(), big(5));
    }

    #[test]
    fn threshold_one_copies_secret() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let params = small_params(1, 4);
        let shares = split(&big(42), &params, &mut rng).unwrap();
        assert!(shares.iter().all(|s| s.value == big(42)));
    }

    #[test]
    fn parameter_and_input_errors() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        assert!(matches!(ShareParams::new(4, 3, big(257)), Err(ShareError::Parameter(_))));
        assert!(matches!(ShareParams::new(0, 3, big(257)), Err(ShareError::Parameter(_))));
        assert!(matches!(ShareParams::new(2, 3, big(256)), Err(ShareError::Parameter(_))));
        let params = small_params(2, 3);
        assert!(matches!(split(&big(300), &params, &mut rng), Err(ShareError::Parameter(_))));
        let shares = split(&big(9), &params, &mut rng).unwrap();
        assert_eq!(
            reconstruct(&shares[..1], &params),
            Err(ShareError::InsufficientShares { needed: 2, got: 1 })
        );
        let dup = [shares[1].clone(), shares[1].clone()];
        assert_eq!(reconstruct(&dup, &params), Err(ShareError::DuplicateIndex(2)));
    }

    #[test]
    fn modulus_field_prime_exceeds_factor_range() {
        let params = ShareParams::for_modulus(3, 3, 64).unwrap();
        assert!(params.field_prime() > &(BigUint::one() << 32));
        assert_eq!(params.field_prime(), &big((1u64 << 32) + 15));
    }

    #[test]
    fn share_encoding() {
        let params = ShareParams::for_modulus(2, 2, 128).unwrap();
        let share = Share { index: 2, value: big(77) };
        let bytes = share.to_bytes(&params);
        assert_eq!(bytes.len(), 4 + 9);
        assert_eq!(&bytes[..4], &[0, 0, 0, 2]);
        assert_eq!(Share::from_bytes(&bytes, &params).unwrap(), share);
        assert!(Share::from_bytes(&bytes[1..], &params).is_err());
    }

    #[test]
    fn fewer_than_k_shares_fit_every_candidate_secret() {
        // Any k-1 shares plus an arbitrary point (0, s') determine a
        // degree-(k-1) polynomial that agrees with all of them.
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let params = ShareParams::new(4, 6, big(7919)).unwrap();
        let shares = split(&big(1234), &params, &mut rng).unwrap();
        let partial = &shares[1..4];
        for candidate in [0u64, 1, 1234, 5000, 7918] {
            let mut points = partial.to_vec();
            let anchor = Share { index: 0, value: big(candidate) };
            // solve through (0, s') and the k-1 shares, then re-evaluate
            let mut with_anchor = points.clone();
            with_anchor.push(anchor);
            let prime = params.field_prime();
            let through_anchor = |x: u64| {
                let mut total = BigUint::zero();
                for (i, si) in with_anchor.iter().enumerate() {
                    let xi = BigUint::from(si.index);
                    let mut num = BigUint::one();
                    let mut den = BigUint::one();
                    for (j, sj) in with_anchor.iter().enumerate() {
                        if i != j {
                            let xj = BigUint::from(sj.index);
                            num = num * ((big(x) + prime - &xj) % prime) % prime;
                            den = den * ((&xi + prime - &xj) % prime) % prime;
                        }
                    }
                    total = (total + &si.value * num % prime * den.modinv(prime).unwrap()) % prime;
                }
                total
            };
            assert_eq!(through_anchor(0), big(candidate));
            for share in points.drain(..) {
                assert_eq!(through_anchor(u64::from(share.index)), share.value);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn any_k_subset_reconstructs(
            secret in 0u64..1_000_000,
            k in 1usize..=6,
            extra in 0usize..=4,
            seed in any::<u64>(),
            pick in any::<u64>(),
        ) {
            let n = (k + extra).min(10);
            let params = ShareParams::new(k, n, big(1_000_003)).unwrap();
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let shares = split(&big(secret), &params, &mut rng).unwrap();
            let mut indices: Vec<usize> = (0..n).collect();
            let mut pick_rng = ChaCha20Rng::seed_from_u64(pick);
            rand::seq::SliceRandom::shuffle(indices.as_mut_slice(), &mut pick_rng);
            let subset: Vec<Share> = indices[..k].iter().map(|&i| shares[i].clone()).collect();
            prop_assert_eq!(reconstruct(&subset, &params).unwrap(), big(secret));
        }
    }
}
