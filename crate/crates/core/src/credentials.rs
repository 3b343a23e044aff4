//! Provider and venue signatures, blind-signed epoch pseudonyms and
//! single-use presence tokens.
//!
//! Signatures are RSA over a full-domain hash; the blind variant is classic
//! blind RSA, so an unblinded signature is an ordinary FDH signature.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::One;
use rand::RngCore;
use sha2::{Digest, Sha512};
use thiserror::Error;

use crate::arith;

pub const DEFAULT_RSA_BITS: u64 = 1024;
const PUBLIC_EXPONENT: u32 = 65_537;
const FDH_DOMAIN: &[u8] = b"profilr-fdh-v1";
const KEY_TAG: &[u8; 4] = b"RPK1";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CredentialError {
    #[error("malformed key: {0}")]
    MalformedKey(String),
    #[error("blinding factor is not invertible modulo the signing modulus")]
    NonInvertibleFactor,
    #[error("a pseudonym was already signed for this user in epoch {0}")]
    AlreadyIssued(u64),
    #[error("malformed {0} encoding")]
    Encoding(&'static str),
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct VerifyingKey {
    n: BigUint,
    e: BigUint,
}

impl fmt::Debug for VerifyingKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VerifyingKey({} bits)", self.n.bits())
    }
}

#[derive(Clone)]
pub struct SigningKey {
    public: VerifyingKey,
    d: BigUint,
    p: BigUint,
    q: BigUint,
    dp: BigUint,
    dq: BigUint,
    q_inv: BigUint,
}

impl fmt::Debug for SigningKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SigningKey").field("public", &self.public).finish_non_exhaustive()
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Signature(BigUint);

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({:x})", self.0)
    }
}

impl Signature {
    pub fn value(&self) -> &BigUint {
        &self.0
    }

    pub fn to_bytes(&self, key: &VerifyingKey) -> Vec<u8> {
        arith::to_fixed_bytes(&self.0, key.signature_len())
    }

    pub fn from_bytes(bytes: &[u8]) -> Self {
        Self(arith::from_bytes(bytes))
    }
}

/// What the signer sees during blind issuance.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BlindedMessage(pub BigUint);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlindSignature(pub BigUint);

impl VerifyingKey {
    pub fn modulus(&self) -> &BigUint {
        &self.n
    }

    pub fn signature_len(&self) -> usize {
        arith::byte_width(self.n.bits())
    }

    pub fn verify(&self, message: &[u8], signature: &Signature) -> bool {
        if signature.0 >= self.n {
            return false;
        }
        signature.0.modpow(&self.e, &self.n) == self.hash_to_domain(message)
    }

    /// SHA-512 in counter mode, expanded 16 bytes past the modulus width and
    /// reduced modulo `n`.
    pub fn hash_to_domain(&self, message: &[u8]) -> BigUint {
        let want = self.signature_len() + 16;
        let mut stream = Vec::with_capacity(want + 64);
        let mut counter = 0u32;
        while stream.len() < want {
            let mut hasher = Sha512::new();
            hasher.update(FDH_DOMAIN);
            hasher.update(counter.to_be_bytes());
            hasher.update((message.len() as u64).to_be_bytes());
            hasher.update(message);
            stream.extend_from_slice(&hasher.finalize());
            counter += 1;
        }
        arith::from_bytes(&stream[..want]) % &self.n
    }

    /// Tagged envelope: `"RPK1" || len(n) || n || len(e) || e`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = KEY_TAG.to_vec();
        for value in [&self.n, &self.e] {
            let bytes = value.to_bytes_be();
            out.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
            out.extend_from_slice(&bytes);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CredentialError> {
        let mut rest = bytes
            .strip_prefix(&KEY_TAG[..])
            .ok_or_else(|| CredentialError::MalformedKey("missing tag".into()))?;
        let mut fields = Vec::with_capacity(2);
        for _ in 0..2 {
            if rest.len() < 4 {
                return Err(CredentialError::MalformedKey("truncated".into()));
            }
            let len = u32::from_be_bytes(rest[..4].try_into().expect("four bytes")) as usize;
            rest = &rest[4..];
            if rest.len() < len {
                return Err(CredentialError::MalformedKey("truncated".into()));
            }
            fields.push(arith::from_bytes(&rest[..len]));
            rest = &rest[len..];
        }
        if !rest.is_empty() {
            return Err(CredentialError::MalformedKey("trailing bytes".into()));
        }
        let e = fields.pop().expect("two fields");
        let n = fields.pop().expect("two fields");
        Self::from_parts(n, e)
    }

    pub fn from_parts(n: BigUint, e: BigUint) -> Result<Self, CredentialError> {
        if n.bits() < 64 || n.is_even() {
            return Err(CredentialError::MalformedKey("modulus must be odd and at least 64 bits".into()));
        }
        if e < BigUint::from(3u32) || e.is_even() || e >= n {
            return Err(CredentialError::MalformedKey("bad public exponent".into()));
        }
        Ok(Self { n, e })
    }
}

impl SigningKey {
    pub fn generate<R: RngCore + ?Sized>(bits: u64, rng: &mut R) -> Result<Self, CredentialError> {
        if !(128..=8192).contains(&bits) {
            return Err(CredentialError::MalformedKey(format!("unsupported RSA size {bits}")));
        }
        let e = BigUint::from(PUBLIC_EXPONENT);
        let one = BigUint::one();
        let p_bits = bits / 2;
        let q_bits = bits - p_bits;
        let mut prime = |size: u64, avoid: Option<&BigUint>| loop {
            let mut candidate = arith::random_with_top_bits(size, rng);
            candidate.set_bit(0, true);
            if Some(&candidate) == avoid || !(&candidate - &one).gcd(&e).is_one() {
                continue;
            }
            if arith::is_probable_prime(&candidate) {
                return candidate;
            }
        };
        let p = prime(p_bits, None);
        let q = prime(q_bits, Some(&p));
        Self::from_primes(p, q)
    }

    pub fn from_primes(p: BigUint, q: BigUint) -> Result<Self, CredentialError> {
        let one = BigUint::one();
        let e = BigUint::from(PUBLIC_EXPONENT);
        let lambda = (&p - &one).lcm(&(&q - &one));
        let d = e
            .modinv(&lambda)
            .ok_or_else(|| CredentialError::MalformedKey("e not invertible".into()))?;
        let q_inv = q
            .modinv(&p)
            .ok_or_else(|| CredentialError::MalformedKey("p and q not coprime".into()))?;
        let dp = &d % (&p - &one);
        let dq = &d % (&q - &one);
        let public = VerifyingKey::from_parts(&p * &q, e)?;
        Ok(Self { public, d, p, q, dp, dq, q_inv })
    }

    pub fn verifying_key(&self) -> &VerifyingKey {
        &self.public
    }

    pub fn private_exponent(&self) -> &BigUint {
        &self.d
    }

    pub fn sign(&self, message: &[u8]) -> Signature {
        Signature(self.private_op(&self.public.hash_to_domain(message)))
    }

    /// Signs a blinded value without learning the message behind it.
    pub fn blind_sign(&self, blinded: &BlindedMessage) -> BlindSignature {
        BlindSignature(self.private_op(&(&blinded.0 % &self.public.n)))
    }

    fn private_op(&self, x: &BigUint) -> BigUint {
        // CRT: combine x^dp mod p and x^dq mod q
        let m1 = x.modpow(&self.dp, &self.p);
        let m2 = x.modpow(&self.dq, &self.q);
        let diff = (&m1 + &self.p - (&m2 % &self.p)) % &self.p;
        let h = &self.q_inv * diff % &self.p;
        m2 + h * &self.q
    }
}

/// `H(token) * factor^e mod N`.
pub fn blind(
    key: &VerifyingKey,
    message: &[u8],
    factor: &BigUint,
) -> Result<BlindedMessage, CredentialError> {
    if !arith::is_unit(factor, &key.n) {
        return Err(CredentialError::NonInvertibleFactor);
    }
    let masked = key.hash_to_domain(message) * factor.modpow(&key.e, &key.n) % &key.n;
    Ok(BlindedMessage(masked))
}

/// `signature * factor^-1 mod N`.
pub fn unblind(
    key: &VerifyingKey,
    signature: &BlindSignature,
    factor: &BigUint,
) -> Result<Signature, CredentialError> {
    let inverse = arith::mod_inverse(factor, &key.n).ok_or(CredentialError::NonInvertibleFactor)?;
    Ok(Signature(&signature.0 * inverse % &key.n))
}

pub fn random_blinding_factor<R: RngCore + ?Sized>(key: &VerifyingKey, rng: &mut R) -> BigUint {
    arith::random_unit(&key.n, rng)
}

/// Provider-side blind signer that signs at most one pseudonym per user and
/// epoch.
#[derive(Debug)]
pub struct PseudonymIssuer {
    key: SigningKey,
    issued: BTreeSet<(String, u64)>,
}

impl PseudonymIssuer {
    pub fn new(key: SigningKey) -> Self {
        Self { key, issued: BTreeSet::new() }
    }

    pub fn verifying_key(&self) -> &VerifyingKey {
        self.key.verifying_key()
    }

    pub fn issue(
        &mut self,
        user: &str,
        epoch: u64,
        blinded: &BlindedMessage,
    ) -> Result<BlindSignature, CredentialError> {
        if !self.issued.insert((user.to_owned(), epoch)) {
            return Err(CredentialError::AlreadyIssued(epoch));
        }
        Ok(self.key.blind_sign(blinded))
    }
}

pub const PSEUDONYM_TOKEN_LEN: usize = 32;

/// Epoch-bound anonymous identity: a random value carrying the provider's
/// (blind) signature over `epoch || value`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Pseudonym {
    pub epoch: u64,
    pub token: [u8; PSEUDONYM_TOKEN_LEN],
    pub signature: Signature,
}

impl Pseudonym {
    pub fn signed_bytes(epoch: u64, token: &[u8; PSEUDONYM_TOKEN_LEN]) -> Vec<u8> {
        let mut out = epoch.to_be_bytes().to_vec();
        out.extend_from_slice(token);
        out
    }

    pub fn verify(&self, provider: &VerifyingKey) -> bool {
        provider.verify(&Self::signed_bytes(self.epoch, &self.token), &self.signature)
    }

    /// Short printable handle used as the sender label on anonymous links.
    pub fn label(&self) -> String {
        hex::encode(&self.token[..8])
    }
}

/// Client half of pseudonym issuance: holds the blinding factor between the
/// request and the provider's reply.
#[derive(Debug, Clone)]
pub struct PseudonymRequest {
    pub epoch: u64,
    pub token: [u8; PSEUDONYM_TOKEN_LEN],
    factor: BigUint,
    pub blinded: BlindedMessage,
}

impl PseudonymRequest {
    pub fn new<R: RngCore + ?Sized>(
        provider: &VerifyingKey,
        epoch: u64,
        rng: &mut R,
    ) -> Self {
        let mut token = [0u8; PSEUDONYM_TOKEN_LEN];
        rng.fill_bytes(&mut token);
        let factor = random_blinding_factor(provider, rng);
        let blinded = blind(provider, &Pseudonym::signed_bytes(epoch, &token), &factor)
            .expect("sampled factor is a unit");
        Self { epoch, token, factor, blinded }
    }

    pub fn finish(
        self,
        provider: &VerifyingKey,
        reply: &BlindSignature,
    ) -> Result<Pseudonym, CredentialError> {
        let signature = unblind(provider, reply, &self.factor)?;
        Ok(Pseudonym { epoch: self.epoch, token: self.token, signature })
    }
}

pub const PRESENCE_TOKEN_LEN: usize = 8 + 8 + 8 + 32;

/// Venue-signed proof of presence. The random part doubles as the session
/// nonce binding a Spoter run to the following CheckIn.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PresenceToken {
    pub venue_id: u64,
    pub epoch: u64,
    pub timestamp: u64,
    pub nonce: [u8; 32],
}

impl PresenceToken {
    /// `venue_id || epoch || timestamp || random`, all big-endian.
    pub fn to_bytes(&self) -> [u8; PRESENCE_TOKEN_LEN] {
        let mut out = [0u8; PRESENCE_TOKEN_LEN];
        out[..8].copy_from_slice(&self.venue_id.to_be_bytes());
        out[8..16].copy_from_slice(&self.epoch.to_be_bytes());
        out[16..24].copy_from_slice(&self.timestamp.to_be_bytes());
        out[24..].copy_from_slice(&self.nonce);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CredentialError> {
        if bytes.len() != PRESENCE_TOKEN_LEN {
            return Err(CredentialError::Encoding("presence token"));
        }
        let word = |i: usize| u64::from_be_bytes(bytes[i..i + 8].try_into().expect("eight bytes"));
        Ok(Self {
            venue_id: word(0),
            epoch: word(8),
            timestamp: word(16),
            nonce: bytes[24..].try_into().expect("32 bytes"),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignedPresenceToken {
    pub token: PresenceToken,
    pub signature: Signature,
}

impl SignedPresenceToken {
    pub fn sign(token: PresenceToken, venue_key: &SigningKey) -> Self {
        let signature = venue_key.sign(&token.to_bytes());
        Self { token, signature }
    }

    pub fn verify(&self, venue_key: &VerifyingKey) -> bool {
        venue_key.verify(&self.token.to_bytes(), &self.signature)
    }
}

/// Venue-side record of pseudonyms that already checked in, per epoch.
#[derive(Debug, Default, Clone)]
pub struct PseudonymLedger {
    used: BTreeMap<u64, BTreeSet<[u8; PSEUDONYM_TOKEN_LEN]>>,
}

impl PseudonymLedger {
    /// True on first use of `pseudonym` in `epoch`; records the use.
    pub fn check_fresh(&mut self, pseudonym: &Pseudonym, epoch: u64) -> bool {
        self.used.entry(epoch).or_default().insert(pseudonym.token)
    }

    pub fn is_spent(&self, pseudonym: &Pseudonym, epoch: u64) -> bool {
        self.used.get(&epoch).is_some_and(|set| set.contains(&pseudonym.token))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn key(seed: u64) -> SigningKey {
        SigningKey::generate(512, &mut ChaCha20Rng::seed_from_u64(seed)).unwrap()
    }

    #[test]
    fn sign_verify() {
        let sk = key(1);
        let pk = sk.verifying_key();
        let sig = sk.sign(b"share p_3");
        assert!(pk.verify(b"share p_3", &sig));
        assert!(!pk.verify(b"share p_4", &sig));
        assert!(!key(2).verifying_key().verify(b"share p_3", &sig));
        assert_eq!(pk.modulus().bits(), 512);
        let back = Signature::from_bytes(&sig.to_bytes(pk));
        assert!(pk.verify(b"share p_3", &back));
    }

    #[test]
    fn crt_matches_plain_exponentiation() {
        let sk = key(11);
        let x = sk.public.hash_to_domain(b"crt");
        assert_eq!(sk.private_op(&x), x.modpow(&sk.d, &sk.public.n));
    }

    #[test]
    fn malformed_keys() {
        assert!(matches!(
            VerifyingKey::from_parts(BigUint::from(35u32), BigUint::from(3u32)),
            Err(CredentialError::MalformedKey(_))
        ));
        assert!(VerifyingKey::from_bytes(b"RPK1\0\0").is_err());
        let sk = key(3);
        let encoded = sk.verifying_key().to_bytes();
        assert_eq!(&VerifyingKey::from_bytes(&encoded).unwrap(), sk.verifying_key());
        assert!(SigningKey::generate(64, &mut ChaCha20Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn blind_signature_identity() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let sk = key(4);
        let pk = sk.verifying_key();
        let token = b"epoch-7 token";
        let factor = random_blinding_factor(pk, &mut rng);
        let blinded = blind(pk, token, &factor).unwrap();
        assert_ne!(blinded.0, pk.hash_to_domain(token));
        let sig = unblind(pk, &sk.blind_sign(&blinded), &factor).unwrap();
        assert!(pk.verify(token, &sig));
        assert_eq!(sig, sk.sign(token));
    }

    #[test]
    fn non_invertible_factor() {
        let sk = SigningKey::generate(128, &mut ChaCha20Rng::seed_from_u64(9)).unwrap();
        let pk = sk.verifying_key();
        let bad = sk.p.clone();
        assert_eq!(blind(pk, b"x", &bad), Err(CredentialError::NonInvertibleFactor));
        assert_eq!(
            unblind(pk, &BlindSignature(BigUint::one()), &bad),
            Err(CredentialError::NonInvertibleFactor)
        );
    }

    #[test]
    fn blinded_views_are_pairwise_distinct() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let sk = key(5);
        let pk = sk.verifying_key();
        let views: BTreeSet<Vec<u8>> = (0..100)
            .map(|_| {
                let f = random_blinding_factor(pk, &mut rng);
                blind(pk, b"fixed token", &f).unwrap().0.to_bytes_be()
            })
            .collect();
        assert_eq!(views.len(), 100);
    }

    #[test]
    fn one_pseudonym_per_user_and_epoch() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let mut issuer = PseudonymIssuer::new(key(6));
        let pk = issuer.verifying_key().clone();
        let request = PseudonymRequest::new(&pk, 3, &mut rng);
        let reply = issuer.issue("alice", 3, &request.blinded).unwrap();
        let pseudonym = request.finish(&pk, &reply).unwrap();
        assert!(pseudonym.verify(&pk));

        let again = PseudonymRequest::new(&pk, 3, &mut rng);
        assert_eq!(issuer.issue("alice", 3, &again.blinded), Err(CredentialError::AlreadyIssued(3)));
        assert!(issuer.issue("alice", 4, &again.blinded).is_ok());
        assert!(issuer.issue("bob", 3, &again.blinded).is_ok());

        // the same random value presented for the next epoch fails verification
        let replayed = Pseudonym { epoch: 4, ..pseudonym.clone() };
        assert!(!replayed.verify(&pk));
    }

    #[test]
    fn venue_accepts_one_checkin_per_epoch() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let issuer_key = key(7);
        let pk = issuer_key.verifying_key().clone();
        let request = PseudonymRequest::new(&pk, 0, &mut rng);
        let reply = issuer_key.blind_sign(&request.blinded);
        let pseudonym = request.finish(&pk, &reply).unwrap();
        let mut ledger = PseudonymLedger::default();
        assert!(ledger.check_fresh(&pseudonym, 0));
        assert!(ledger.is_spent(&pseudonym, 0));
        assert!(!ledger.check_fresh(&pseudonym, 0));
        assert!(ledger.check_fresh(&pseudonym, 1));
    }

    #[test]
    fn presence_token_layout() {
        let sk = key(8);
        let token = PresenceToken { venue_id: 1, epoch: 2, timestamp: 3, nonce: [9; 32] };
        let bytes = token.to_bytes();
        assert_eq!(bytes.len(), 56);
        assert_eq!(&bytes[..8], &1u64.to_be_bytes());
        assert_eq!(&bytes[16..24], &3u64.to_be_bytes());
        assert_eq!(PresenceToken::from_bytes(&bytes).unwrap(), token);
        let signed = SignedPresenceToken::sign(token.clone(), &sk);
        assert!(signed.verify(sk.verifying_key()));
        let forged = SignedPresenceToken { token: PresenceToken { timestamp: 4, ..token }, ..signed };
        assert!(!forged.verify(sk.verifying_key()));
    }
}
