//! Benaloh's additively homomorphic cryptosystem.
//!
//! A ciphertext of `m` in `Z_r` is `y^m * u^r mod n`. Multiplying ciphertexts
//! adds plaintexts, multiplying by `v^r` re-randomizes without changing the
//! plaintext, and multiplying by `y` adds one.

use std::collections::HashMap;
use std::fmt;

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::RngCore;
use thiserror::Error;

use crate::arith;

/// Smallest modulus accepted by [`keygen`].
pub const MIN_MODULUS_BITS: u64 = 64;
/// Largest modulus accepted by [`keygen`].
pub const MAX_MODULUS_BITS: u64 = 4096;

const PUBLIC_TAG: &[u8; 4] = b"BPK1";
const SECRET_TAG: &[u8; 4] = b"BSK1";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BenalohError {
    #[error("invalid parameters: {0}")]
    Parameter(String),
    #[error("plaintext {m} outside Z_{r}")]
    PlaintextRange { m: u64, r: u64 },
    #[error("value is not a unit modulo n")]
    NotUnit,
    #[error("ciphertext does not decrypt under this key")]
    Decryption,
    #[error("malformed key encoding: {0}")]
    Encoding(String),
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BenalohPublicKey {
    n: BigUint,
    y: BigUint,
    r: u64,
}

impl fmt::Debug for BenalohPublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BenalohPublicKey")
            .field("bits", &self.n.bits())
            .field("r", &self.r)
            .finish()
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Ciphertext(BigUint);

impl fmt::Debug for Ciphertext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Ciphertext({:x})", self.0)
    }
}

impl Ciphertext {
    pub fn value(&self) -> &BigUint {
        &self.0
    }

    pub fn into_value(self) -> BigUint {
        self.0
    }

    /// Fixed-width big-endian encoding, `ceil(modulus_bits / 8)` bytes.
    pub fn to_bytes(&self, pk: &BenalohPublicKey) -> Vec<u8> {
        arith::to_fixed_bytes(&self.0, pk.ciphertext_len())
    }

    pub fn from_bytes(pk: &BenalohPublicKey, bytes: &[u8]) -> Result<Self, BenalohError> {
        if bytes.len() != pk.ciphertext_len() {
            return Err(BenalohError::Encoding(format!(
                "ciphertext is {} bytes, expected {}",
                bytes.len(),
                pk.ciphertext_len()
            )));
        }
        pk.ciphertext(arith::from_bytes(bytes))
    }
}

impl BenalohPublicKey {
    pub fn modulus(&self) -> &BigUint {
        &self.n
    }

    pub fn generator(&self) -> &BigUint {
        &self.y
    }

    /// Plaintext space size `r`.
    pub fn block_size(&self) -> u64 {
        self.r
    }

    pub fn modulus_bits(&self) -> u64 {
        self.n.bits()
    }

    pub fn ciphertext_len(&self) -> usize {
        arith::byte_width(self.modulus_bits())
    }

    /// Wraps a raw value after checking it lies in `Z*_n`.
    pub fn ciphertext(&self, value: BigUint) -> Result<Ciphertext, BenalohError> {
        if arith::is_unit(&value, &self.n) {
            Ok(Ciphertext(value))
        } else {
            Err(BenalohError::NotUnit)
        }
    }

    /// Batch form of [`Self::ciphertext`].
    pub fn ciphertexts(&self, values: Vec<BigUint>) -> Result<Vec<Ciphertext>, BenalohError> {
        if arith::all_units(&values, &self.n) {
            Ok(values.into_iter().map(Ciphertext).collect())
        } else {
            Err(BenalohError::NotUnit)
        }
    }

    pub fn random_unit<R: RngCore + ?Sized>(&self, rng: &mut R) -> BigUint {
        arith::random_unit(&self.n, rng)
    }

    pub fn check_unit(&self, value: &BigUint) -> Result<(), BenalohError> {
        if arith::is_unit(value, &self.n) {
            Ok(())
        } else {
            Err(BenalohError::NotUnit)
        }
    }

    /// `y^m * u^r mod n`.
    pub fn encrypt(&self, m: u64, u: &BigUint) -> Result<Ciphertext, BenalohError> {
        if m >= self.r {
            return Err(BenalohError::PlaintextRange { m, r: self.r });
        }
        self.check_unit(u)?;
        let ym = arith::pow_small(&self.y, m, &self.n);
        let ur = self.power_r(u);
        Ok(Ciphertext(ym * ur % &self.n))
    }

    pub fn encrypt_random<R: RngCore + ?Sized>(
        &self,
        m: u64,
        rng: &mut R,
    ) -> Result<Ciphertext, BenalohError> {
        let u = self.random_unit(rng);
        self.encrypt(m, &u)
    }

    /// `z * v^r mod n`; same plaintext, fresh randomness.
    pub fn reencrypt(&self, z: &Ciphertext, v: &BigUint) -> Result<Ciphertext, BenalohError> {
        self.check_unit(v)?;
        Ok(self.reencrypt_unchecked(z, v))
    }

    pub(crate) fn reencrypt_unchecked(&self, z: &Ciphertext, v: &BigUint) -> Ciphertext {
        Ciphertext(&z.0 * self.power_r(v) % &self.n)
    }

    pub fn add(&self, z1: &Ciphertext, z2: &Ciphertext) -> Ciphertext {
        Ciphertext(&z1.0 * &z2.0 % &self.n)
    }

    /// Adds one to the plaintext by multiplying with `y`.
    pub fn increment(&self, z: &Ciphertext) -> Ciphertext {
        Ciphertext(&z.0 * &self.y % &self.n)
    }

    /// Multiplies by an arbitrary unit. Used for multiplicative blinding.
    pub fn scale(&self, z: &Ciphertext, factor: &BigUint) -> Ciphertext {
        Ciphertext(&z.0 * factor % &self.n)
    }

    /// True iff `z2 = z1 * w^r mod n`, i.e. `w` opens the two ciphertexts as
    /// encryptions of the same plaintext.
    pub fn open_equality(&self, z1: &Ciphertext, z2: &Ciphertext, w: &BigUint) -> bool {
        arith::is_unit(w, &self.n) && self.reencrypt_unchecked(z1, w) == *z2
    }

    pub(crate) fn power_r(&self, v: &BigUint) -> BigUint {
        arith::pow_small(v, self.r, &self.n)
    }

    /// Tagged envelope: `"BPK1" || len(n) || n || len(y) || y || len(r) || r`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = PUBLIC_TAG.to_vec();
        for value in [&self.n, &self.y, &BigUint::from(self.r)] {
            put_integer(&mut out, value);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, BenalohError> {
        let mut fields = read_envelope(bytes, PUBLIC_TAG, 3)?;
        let r = integer_to_u64(&fields.pop().expect("three fields"))?;
        let y = fields.pop().expect("three fields");
        let n = fields.pop().expect("three fields");
        if n < BigUint::from(4u32) || !arith::is_unit(&y, &n) || r < 3 {
            return Err(BenalohError::Encoding("inconsistent public key".into()));
        }
        Ok(Self { n, y, r })
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_bytes())
    }

    pub fn from_hex(text: &str) -> Result<Self, BenalohError> {
        let bytes =
            hex::decode(text.trim()).map_err(|e| BenalohError::Encoding(e.to_string()))?;
        Self::from_bytes(&bytes)
    }
}

/// Private factors plus a precomputed discrete-log table for the order-`r`
/// subgroup used by decryption.
#[derive(Clone)]
pub struct BenalohSecretKey {
    public: BenalohPublicKey,
    p: BigUint,
    q: BigUint,
    phi_over_r: BigUint,
    table: HashMap<BigUint, u64>,
}

impl fmt::Debug for BenalohSecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BenalohSecretKey").finish_non_exhaustive()
    }
}

impl PartialEq for BenalohSecretKey {
    fn eq(&self, other: &Self) -> bool {
        self.public == other.public && self.p == other.p && self.q == other.q
    }
}

impl BenalohSecretKey {
    /// Rebuilds a secret key from its factors, checking every key-generation
    /// condition against `public`. `p` is the factor with `r | p - 1`.
    pub fn from_factors(
        public: &BenalohPublicKey,
        p: BigUint,
        q: BigUint,
    ) -> Result<Self, BenalohError> {
        let r = BigUint::from(public.r);
        let one = BigUint::one();
        if &p * &q != public.n || p == q {
            return Err(BenalohError::Parameter("p * q does not equal n".into()));
        }
        let p1 = &p - &one;
        let q1 = &q - &one;
        if !(&p1 % &r).is_zero() {
            return Err(BenalohError::Parameter("r does not divide p - 1".into()));
        }
        if !(&p1 / &r).gcd(&r).is_one() || !q1.gcd(&r).is_one() {
            return Err(BenalohError::Parameter("r shares a factor with (p-1)/r or q-1".into()));
        }
        let phi_over_r = &p1 * &q1 / &r;
        let g = public.y.modpow(&phi_over_r, &public.n);
        if g.is_one() {
            return Err(BenalohError::Parameter("y^(phi/r) = 1".into()));
        }
        let mut table = HashMap::with_capacity(public.r as usize);
        let mut acc = BigUint::one();
        for m in 0..public.r {
            table.insert(acc.clone(), m);
            acc = acc * &g % &public.n;
        }
        Ok(Self { public: public.clone(), p, q, phi_over_r, table })
    }

    pub fn public(&self) -> &BenalohPublicKey {
        &self.public
    }

    pub fn p(&self) -> &BigUint {
        &self.p
    }

    pub fn q(&self) -> &BigUint {
        &self.q
    }

    /// Returns the unique `m` in `Z_r` with `(y^-m z)^(phi/r) = 1 mod n`.
    ///
    /// `(y^-m z)^(phi/r) = z^(phi/r) * g^-m` with `g = y^(phi/r)`, so the scan
    /// over `m` reduces to one exponentiation and a table lookup.
    pub fn decrypt(&self, z: &Ciphertext) -> Result<u64, BenalohError> {
        self.public.check_unit(&z.0)?;
        let x = z.0.modpow(&self.phi_over_r, &self.public.n);
        self.table.get(&x).copied().ok_or(BenalohError::Decryption)
    }

    /// Tagged envelope: `"BSK1" || p || q || y || r`, each length-prefixed.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = SECRET_TAG.to_vec();
        for value in [&self.p, &self.q, &self.public.y, &BigUint::from(self.public.r)] {
            put_integer(&mut out, value);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, BenalohError> {
        let mut fields = read_envelope(bytes, SECRET_TAG, 4)?;
        let r = integer_to_u64(&fields.pop().expect("four fields"))?;
        let y = fields.pop().expect("four fields");
        let q = fields.pop().expect("four fields");
        let p = fields.pop().expect("four fields");
        let public = BenalohPublicKey { n: &p * &q, y, r };
        Self::from_factors(&public, p, q)
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_bytes())
    }

    pub fn from_hex(text: &str) -> Result<Self, BenalohError> {
        let bytes =
            hex::decode(text.trim()).map_err(|e| BenalohError::Encoding(e.to_string()))?;
        Self::from_bytes(&bytes)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenalohKeyPair {
    pub public: BenalohPublicKey,
    pub secret: BenalohSecretKey,
}

/// Builds a key pair from explicit factors and generator, validating every
/// key-generation condition.
pub fn key_from_parts(
    p: BigUint,
    q: BigUint,
    y: BigUint,
    r: u64,
) -> Result<BenalohKeyPair, BenalohError> {
    check_block_size(r)?;
    let n = &p * &q;
    if !arith::is_unit(&y, &n) {
        return Err(BenalohError::Parameter("y is not a unit modulo n".into()));
    }
    let public = BenalohPublicKey { n, y, r };
    let secret = BenalohSecretKey::from_factors(&public, p, q)?;
    Ok(BenalohKeyPair { public, secret })
}

fn check_block_size(r: u64) -> Result<(), BenalohError> {
    if r < 3 || r % 2 == 0 || !arith::is_prime_u64(r) {
        return Err(BenalohError::Parameter(format!("block size {r} is not an odd prime")));
    }
    Ok(())
}

/// Generates a key pair with plaintext space `Z_r` and an exactly
/// `modulus_bits`-bit modulus.
pub fn keygen<R: RngCore + ?Sized>(
    r: u64,
    modulus_bits: u64,
    rng: &mut R,
) -> Result<BenalohKeyPair, BenalohError> {
    check_block_size(r)?;
    if !(MIN_MODULUS_BITS..=MAX_MODULUS_BITS).contains(&modulus_bits) {
        return Err(BenalohError::Parameter(format!(
            "modulus size {modulus_bits} outside [{MIN_MODULUS_BITS}, {MAX_MODULUS_BITS}]"
        )));
    }
    let p_bits = modulus_bits / 2;
    let q_bits = modulus_bits - p_bits;
    let rb = BigUint::from(r);
    let one = BigUint::one();

    // p = r*t + 1 with p in [2^(b-1) + 2^(b-2), 2^b), t even and coprime to r.
    let p_low = (BigUint::one() << (p_bits - 1)) + (BigUint::one() << (p_bits - 2));
    let p_high = BigUint::one() << p_bits;
    let t_low = (&p_low - &one).div_ceil(&rb);
    let t_high = (&p_high - 2u32) / &rb;
    // the window must hold many even candidates for the prime search to make sense
    if t_high <= &t_low + 1024u32 {
        return Err(BenalohError::Parameter(format!(
            "modulus of {modulus_bits} bits cannot host a prime p with {r} | p - 1"
        )));
    }
    let p = loop {
        let mut t = rng.gen_biguint_range(&t_low, &t_high);
        if t.is_odd() {
            t += 1u32;
        }
        if (&t % &rb).is_zero() {
            continue;
        }
        let candidate = &rb * &t + &one;
        if arith::is_probable_prime(&candidate) {
            break candidate;
        }
    };
    let q = loop {
        let mut candidate = arith::random_with_top_bits(q_bits, rng);
        candidate.set_bit(0, true);
        if candidate == p || !(&candidate - &one).gcd(&rb).is_one() {
            continue;
        }
        if arith::is_probable_prime(&candidate) {
            break candidate;
        }
    };
    let n = &p * &q;
    let phi_over_r = (&p - &one) * (&q - &one) / &rb;
    let y = loop {
        let candidate = arith::random_unit(&n, rng);
        if !candidate.modpow(&phi_over_r, &n).is_one() {
            break candidate;
        }
    };
    key_from_parts(p, q, y, r)
}

fn put_integer(out: &mut Vec<u8>, value: &BigUint) {
    let bytes = value.to_bytes_be();
    out.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
    out.extend_from_slice(&bytes);
}

fn read_envelope(
    bytes: &[u8],
    tag: &[u8; 4],
    count: usize,
) -> Result<Vec<BigUint>, BenalohError> {
    let body = bytes
        .strip_prefix(&tag[..])
        .ok_or_else(|| BenalohError::Encoding("missing envelope tag".into()))?;
    let mut rest = body;
    let mut fields = Vec::with_capacity(count);
    for _ in 0..count {
        if rest.len() < 4 {
            return Err(BenalohError::Encoding("truncated length prefix".into()));
        }
        let (len, tail) = rest.split_at(4);
        let len = u32::from_be_bytes(len.try_into().expect("four bytes")) as usize;
        if tail.len() < len {
            return Err(BenalohError::Encoding("truncated integer".into()));
        }
        let (value, tail) = tail.split_at(len);
        fields.push(BigUint::from_bytes_be(value));
        rest = tail;
    }
    if !rest.is_empty() {
        return Err(BenalohError::Encoding("trailing bytes".into()));
    }
    Ok(fields)
}

fn integer_to_u64(value: &BigUint) -> Result<u64, BenalohError> {
    u64::try_from(value).map_err(|_| BenalohError::Encoding("block size overflows u64".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn big(v: u64) -> BigUint {
        BigUint::from(v)
    }

    fn toy() -> BenalohKeyPair {
        key_from_parts(big(7), big(5), big(2), 3).unwrap()
    }

    #[test]
    fn toy_key_generator_is_valid() {
        // 2^((7-1)(5-1)/3) = 2^8 = 256 = 11 mod 35
        assert_eq!(big(2).modpow(&big(8), &big(35)), big(11));
        toy();
        // y = 4 = 2^2 is still a non-residue; y = 8 has 8^8 mod 35 = 1
        assert!(key_from_parts(big(7), big(5), big(8), 3).is_err());
    }

    #[test]
    fn toy_vectors() {
        let key = toy();
        let pk = &key.public;
        let z = pk.encrypt(1, &big(2)).unwrap();
        assert_eq!(z.value(), &big(16));
        assert_eq!(key.secret.decrypt(&z).unwrap(), 1);
        assert_eq!(pk.encrypt(0, &big(1)).unwrap().value(), &big(1));
        assert_eq!(key.secret.decrypt(&pk.encrypt(0, &big(1)).unwrap()).unwrap(), 0);

        let re = pk.reencrypt(&z, &big(3)).unwrap();
        assert_eq!(re.value(), &big(12));
        assert_eq!(key.secret.decrypt(&re).unwrap(), 1);

        let sum = pk.add(&z, &z);
        assert_eq!(sum.value(), &big(11));
        assert_eq!(key.secret.decrypt(&sum).unwrap(), 2);
    }

    #[test]
    fn plaintext_and_unit_domain_errors() {
        let key = toy();
        assert_eq!(
            key.public.encrypt(3, &big(2)),
            Err(BenalohError::PlaintextRange { m: 3, r: 3 })
        );
        assert_eq!(key.public.encrypt(1, &big(7)), Err(BenalohError::NotUnit));
        let z = key.public.encrypt(1, &big(2)).unwrap();
        assert_eq!(key.public.reencrypt(&z, &big(5)), Err(BenalohError::NotUnit));
        assert_eq!(key.public.reencrypt(&z, &big(1)).unwrap(), z);
    }

    #[test]
    fn keygen_rejects_bad_parameters() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        assert!(matches!(keygen(2, 64, &mut rng), Err(BenalohError::Parameter(_))));
        assert!(matches!(keygen(9, 64, &mut rng), Err(BenalohError::Parameter(_))));
        assert!(matches!(keygen(3, 32, &mut rng), Err(BenalohError::Parameter(_))));
        // r too large for 32-bit p
        assert!(matches!(keygen(4_294_967_291, 64, &mut rng), Err(BenalohError::Parameter(_))));
    }

    #[test]
    fn keygen_satisfies_key_conditions() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        for (r, bits) in [(3, 64), (13, 128), (1009, 256)] {
            let key = keygen(r, bits, &mut rng).unwrap();
            let (p, q) = (key.secret.p(), key.secret.q());
            let rb = big(r);
            let one = BigUint::one();
            assert_eq!(key.public.modulus_bits(), bits);
            assert!(((p - &one) % &rb).is_zero());
            assert!(((p - &one) / &rb).gcd(&rb).is_one());
            assert!((q - &one).gcd(&rb).is_one());
            let phi = (p - &one) * (q - &one);
            assert!(!key.public.generator().modpow(&(phi / &rb), key.public.modulus()).is_one());
        }
    }

    #[test]
    fn wraparound_and_identity() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let key = keygen(5, 64, &mut rng).unwrap();
        let pk = &key.public;
        let one = pk.encrypt_random(1, &mut rng).unwrap();
        let mut acc = pk.encrypt_random(0, &mut rng).unwrap();
        for _ in 0..5 {
            acc = pk.add(&acc, &one);
        }
        assert_eq!(key.secret.decrypt(&acc).unwrap(), 0);
        let z = pk.encrypt_random(3, &mut rng).unwrap();
        let zero = pk.encrypt(0, &BigUint::one()).unwrap();
        assert_eq!(key.secret.decrypt(&pk.add(&z, &zero)).unwrap(), 3);
        assert_eq!(key.secret.decrypt(&pk.increment(&z)).unwrap(), 4);
    }

    #[test]
    fn equality_opening() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let key = keygen(7, 128, &mut rng).unwrap();
        let pk = &key.public;
        let u = pk.random_unit(&mut rng);
        let v = pk.random_unit(&mut rng);
        let z1 = pk.encrypt(4, &u).unwrap();
        let z2 = pk.encrypt(4, &(&u * &v % pk.modulus())).unwrap();
        assert!(pk.open_equality(&z1, &z2, &v));
        assert!(pk.open_equality(&z1, &z1, &BigUint::one()));
        let mut false_hits = 0;
        for _ in 0..100 {
            let a = pk.encrypt_random(rng.next_u64() % 7, &mut rng).unwrap();
            let b = pk.encrypt_random(rng.next_u64() % 7, &mut rng).unwrap();
            let w = pk.random_unit(&mut rng);
            // oracle: recompute a * w^7 mod n directly
            let direct = a.value() * w.modpow(&big(7), pk.modulus()) % pk.modulus();
            assert_eq!(pk.open_equality(&a, &b, &w), &direct == b.value());
            false_hits += usize::from(pk.open_equality(&a, &b, &w));
        }
        assert_eq!(false_hits, 0);
    }

    #[test]
    fn envelopes_roundtrip() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let key = keygen(11, 128, &mut rng).unwrap();
        let pk = BenalohPublicKey::from_hex(&key.public.to_hex()).unwrap();
        assert_eq!(pk, key.public);
        let sk = BenalohSecretKey::from_hex(&key.secret.to_hex()).unwrap();
        assert_eq!(sk, key.secret);
        assert!(BenalohPublicKey::from_bytes(b"XXXX").is_err());
        let mut bytes = key.public.to_bytes();
        bytes.push(0);
        assert!(BenalohPublicKey::from_bytes(&bytes).is_err());

        let z = pk.encrypt_random(3, &mut rng).unwrap();
        let raw = z.to_bytes(&pk);
        assert_eq!(raw.len(), 16);
        assert_eq!(Ciphertext::from_bytes(&pk, &raw).unwrap(), z);
        assert!(Ciphertext::from_bytes(&pk, &raw[1..]).is_err());
    }

    fn shared_key() -> &'static BenalohKeyPair {
        static KEY: std::sync::OnceLock<BenalohKeyPair> = std::sync::OnceLock::new();
        KEY.get_or_init(|| keygen(13, 256, &mut ChaCha20Rng::seed_from_u64(77)).unwrap())
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn roundtrip_homomorphism_reencryption(
                m1 in 0u64..13, m2 in 0u64..13, seed in any::<u64>()
            ) {
                let key = shared_key();
                let pk = &key.public;
                let mut rng = ChaCha20Rng::seed_from_u64(seed);
                let z1 = pk.encrypt_random(m1, &mut rng).unwrap();
                let z2 = pk.encrypt_random(m2, &mut rng).unwrap();
                prop_assert_eq!(key.secret.decrypt(&z1).unwrap(), m1);
                prop_assert_eq!(key.secret.decrypt(&pk.add(&z1, &z2)).unwrap(), (m1 + m2) % 13);
                let v = pk.random_unit(&mut rng);
                let re = pk.reencrypt(&z1, &v).unwrap();
                prop_assert_ne!(&re, &z1);
                prop_assert_eq!(key.secret.decrypt(&re).unwrap(), m1);
                prop_assert_eq!(key.secret.decrypt(&pk.increment(&z1)).unwrap(), (m1 + 1) % 13);
            }
        }
    }
}
