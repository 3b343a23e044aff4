//! ZK-CTR: an interactive cut-and-choose proof that a counter set `C_i` is a
//! re-encryption of `C_{i-1}` with exactly one count incremented.
//!
//! Each round the prover commits to two shuffled re-encryptions
//! `P_prev = pi{RE(t_l, C_prev[l])}` and `P_next = pi{RE(w_l, C_next[l])}`
//! under one secret permutation `pi`. On challenge 0 it opens the `t` and `w`
//! randomness and the verifier checks both sets as multisets. On challenge 1
//! it reveals `o_l = v_l w_l / t_l` per position plus the permuted position of
//! the increment, and the verifier checks `P_next` against `P_prev`
//! position by position. A prover without a valid update can prepare for
//! only one of the two challenges per round.
//!
//! In snapshot mode `C_next` additionally carries the prover's blinding share
//! on every component. The challenge-1 reveal then includes
//! `M = mu^r * R_i` for a fresh `mu`, and the verifier multiplies every
//! expected record by `M`; `R_i` itself never leaves the prover.

use std::fmt;

use num_bigint::BigUint;
use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::arith;
use crate::benaloh::BenalohPublicKey;
use crate::lcp::{apply_update, fresh_randoms, CounterSet, EncryptedCounter, UpdateWitness};

pub const DEFAULT_ROUNDS: u32 = 30;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ZkError {
    #[error("at least one proof round is required")]
    NoRounds,
    #[error("witness does not relate the two counter sets")]
    WitnessMismatch,
    #[error("respond called before commit")]
    NoCommitment,
    #[error("round already answered")]
    AlreadyAnswered,
    #[error("counter sets have different lengths")]
    LengthMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Challenge {
    /// `a = 0`: open the commitment randomness.
    Open,
    /// `a = 1`: link the two committed sets.
    Link,
}

impl Challenge {
    pub fn from_bit(bit: bool) -> Self {
        if bit {
            Challenge::Link
        } else {
            Challenge::Open
        }
    }

    pub fn bit(self) -> u8 {
        match self {
            Challenge::Open => 0,
            Challenge::Link => 1,
        }
    }

    pub fn random<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        Self::from_bit(rng.gen::<bool>())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Commitment {
    pub prev: Vec<EncryptedCounter>,
    pub next: Vec<EncryptedCounter>,
}

#[derive(Clone, PartialEq, Eq)]
pub enum Reveal {
    /// Randomness `(t_l, t'_l)` and `(w_l, w'_l)` in original record order.
    Openings {
        prev: Vec<(BigUint, BigUint)>,
        next: Vec<(BigUint, BigUint)>,
    },
    /// Linking factors `(o_l, o'_l)` in committed (permuted) order, the
    /// committed position of the increment, and in snapshot mode the masked
    /// blinding factor.
    Links {
        factors: Vec<(BigUint, BigUint)>,
        position: u32,
        blinding: Option<BigUint>,
    },
}

impl fmt::Debug for Reveal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reveal::Openings { prev, .. } => write!(f, "Openings({} records)", prev.len()),
            Reveal::Links { factors, position, blinding } => write!(
                f,
                "Links({} records, position {position}, blinded: {})",
                factors.len(),
                blinding.is_some()
            ),
        }
    }
}

impl Reveal {
    pub fn answers(&self) -> Challenge {
        match self {
            Reveal::Openings { .. } => Challenge::Open,
            Reveal::Links { .. } => Challenge::Link,
        }
    }
}

/// Public input of one ZK-CTR instance.
#[derive(Debug, Clone)]
pub struct Statement {
    pub pk: BenalohPublicKey,
    pub prev: CounterSet,
    pub next: CounterSet,
    pub snapshot: bool,
}

impl Statement {
    pub fn new(pk: BenalohPublicKey, prev: CounterSet, next: CounterSet, snapshot: bool) -> Result<Self, ZkError> {
        if prev.len() != next.len() || prev.is_empty() {
            return Err(ZkError::LengthMismatch);
        }
        Ok(Self { pk, prev, next, snapshot })
    }

    pub fn len(&self) -> usize {
        self.prev.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prev.is_empty()
    }
}

/// Prover side of one protocol run.
pub trait Prover {
    fn commit(&mut self, rng: &mut dyn RngCore) -> Result<Commitment, ZkError>;
    fn respond(&mut self, challenge: Challenge) -> Result<Reveal, ZkError>;
}

fn random_permutation<R: RngCore + ?Sized>(len: usize, rng: &mut R) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..len).collect();
    perm.shuffle(rng);
    perm
}

/// Places `records[l]` at position `perm[l]`.
fn permute(records: Vec<EncryptedCounter>, perm: &[usize]) -> Vec<EncryptedCounter> {
    let mut slots: Vec<Option<EncryptedCounter>> = vec![None; records.len()];
    for (record, &target) in records.into_iter().zip(perm) {
        slots[target] = Some(record);
    }
    slots.into_iter().map(|s| s.expect("permutation is a bijection")).collect()
}

fn reencrypt_all(
    pk: &BenalohPublicKey,
    records: &[EncryptedCounter],
    randoms: &[(BigUint, BigUint)],
) -> Vec<EncryptedCounter> {
    records.iter().zip(randoms).map(|(r, v)| r.reencrypt(pk, v)).collect()
}

struct RoundSecrets {
    t: Vec<(BigUint, BigUint)>,
    w: Vec<(BigUint, BigUint)>,
    perm: Vec<usize>,
    answered: bool,
}

/// Prover holding a genuine [`UpdateWitness`].
pub struct HonestProver {
    statement: Statement,
    witness: UpdateWitness,
    round: Option<RoundSecrets>,
    mask_rng_seed: u64,
}

impl HonestProver {
    /// Checks that `witness` really maps `prev` to `next` before accepting it.
    pub fn new(statement: Statement, witness: UpdateWitness) -> Result<Self, ZkError> {
        let b = statement.len();
        if witness.randoms.len() != b || witness.position >= b || witness.blinding.is_some() != statement.snapshot {
            return Err(ZkError::WitnessMismatch);
        }
        let mut increments = vec![0; b];
        increments[witness.position] = 1;
        let rebuilt = apply_update(&statement.pk, &statement.prev, &increments, &witness.randoms, witness.blinding.as_ref());
        if rebuilt.records != statement.next.records {
            return Err(ZkError::WitnessMismatch);
        }
        Ok(Self { statement, witness, round: None, mask_rng_seed: 0 })
    }

    /// Commitments for a fresh round. Both sets share one permutation.
    pub fn prove_round<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> Commitment {
        let pk = &self.statement.pk;
        let b = self.statement.len();
        let t = fresh_randoms(pk, b, rng);
        let w = fresh_randoms(pk, b, rng);
        let perm = random_permutation(b, rng);
        let prev = permute(reencrypt_all(pk, &self.statement.prev.records, &t), &perm);
        let next = permute(reencrypt_all(pk, &self.statement.next.records, &w), &perm);
        self.mask_rng_seed = rng.next_u64();
        self.round = Some(RoundSecrets { t, w, perm, answered: false });
        Commitment { prev, next }
    }
}

/// `v * w / t` for every record, permuted into commitment order.
fn link_factors(
    n: &BigUint,
    randoms: &[(BigUint, BigUint)],
    t: &[(BigUint, BigUint)],
    w: &[(BigUint, BigUint)],
    perm: &[usize],
    mask_inv: Option<&BigUint>,
) -> Vec<(BigUint, BigUint)> {
    let flat: Vec<&BigUint> = t.iter().flat_map(|(a, b)| [a, b]).collect();
    let t_inv = arith::batch_inverse(&flat, n).expect("commitment randomness is a unit");
    let one = |v: &BigUint, w: &BigUint, t_inv: &BigUint| {
        let o = v * w % n * t_inv % n;
        match mask_inv {
            Some(mask) => o * mask % n,
            None => o,
        }
    };
    let mut factors = vec![(BigUint::default(), BigUint::default()); randoms.len()];
    for (l, v) in randoms.iter().enumerate() {
        factors[perm[l]] = (one(&v.0, &w[l].0, &t_inv[2 * l]), one(&v.1, &w[l].1, &t_inv[2 * l + 1]));
    }
    factors
}

impl Prover for HonestProver {
    fn commit(&mut self, rng: &mut dyn RngCore) -> Result<Commitment, ZkError> {
        Ok(self.prove_round(rng))
    }

    fn respond(&mut self, challenge: Challenge) -> Result<Reveal, ZkError> {
        let round = self.round.as_mut().ok_or(ZkError::NoCommitment)?;
        if round.answered {
            return Err(ZkError::AlreadyAnswered);
        }
        round.answered = true;
        match challenge {
            Challenge::Open => Ok(Reveal::Openings { prev: round.t.clone(), next: round.w.clone() }),
            Challenge::Link => {
                let pk = &self.statement.pk;
                let n = pk.modulus();
                let (mask_inv, blinding) = match &self.witness.blinding {
                    Some(share) => {
                        let mut mask_rng = ChaCha20Rng::seed_from_u64(self.mask_rng_seed);
                        let mu = pk.random_unit(&mut mask_rng);
                        let masked = pk.power_r(&mu) * share % n;
                        (Some(arith::mod_inverse(&mu, n).expect("unit")), Some(masked))
                    }
                    None => (None, None),
                };
                let factors = link_factors(n, &self.witness.randoms, &round.t, &round.w, &round.perm, mask_inv.as_ref());
                Ok(Reveal::Links {
                    factors,
                    position: round.perm[self.witness.position] as u32,
                    blinding,
                })
            }
        }
    }
}

fn sorted_encodings(pk: &BenalohPublicKey, records: &[EncryptedCounter]) -> Vec<Vec<u8>> {
    let mut encoded: Vec<Vec<u8>> = records.iter().map(|r| r.to_bytes(pk)).collect();
    encoded.sort_unstable();
    encoded
}

fn all_units(pk: &BenalohPublicKey, pairs: &[(BigUint, BigUint)]) -> bool {
    let n = pk.modulus();
    arith::all_units(pairs.iter().flat_map(|(a, b)| [a, b]), n)
}

fn well_formed(pk: &BenalohPublicKey, records: &[EncryptedCounter]) -> bool {
    let n = pk.modulus();
    arith::all_units(records.iter().flat_map(|r| [r.count.value(), r.index.value()]), n)
}

/// Checks one round. Never panics on adversarial input; any mismatch is
/// `false`.
pub fn verify_round(
    statement: &Statement,
    commitment: &Commitment,
    challenge: Challenge,
    reveal: &Reveal,
) -> bool {
    let pk = &statement.pk;
    let b = statement.len();
    if commitment.prev.len() != b || commitment.next.len() != b {
        return false;
    }
    if !well_formed(pk, &commitment.prev) || !well_formed(pk, &commitment.next) {
        return false;
    }
    match (challenge, reveal) {
        (Challenge::Open, Reveal::Openings { prev, next }) => {
            if prev.len() != b || next.len() != b || !all_units(pk, prev) || !all_units(pk, next) {
                return false;
            }
            let rebuilt_prev = reencrypt_all(pk, &statement.prev.records, prev);
            let rebuilt_next = reencrypt_all(pk, &statement.next.records, next);
            sorted_encodings(pk, &rebuilt_prev) == sorted_encodings(pk, &commitment.prev)
                && sorted_encodings(pk, &rebuilt_next) == sorted_encodings(pk, &commitment.next)
        }
        (Challenge::Link, Reveal::Links { factors, position, blinding }) => {
            let position = *position as usize;
            if factors.len() != b || position >= b || !all_units(pk, factors) {
                return false;
            }
            let mask = match (statement.snapshot, blinding) {
                (true, Some(m)) if arith::is_unit(m, pk.modulus()) => Some(m),
                (false, None) => None,
                _ => return false,
            };
            (0..b).all(|q| {
                let mut base = commitment.prev[q].clone();
                if q == position {
                    base = base.increment(pk);
                }
                let mut expected = base.reencrypt(pk, &factors[q]);
                if let Some(m) = mask {
                    expected = expected.scale(pk, m);
                }
                expected == commitment.next[q]
            })
        }
        _ => false,
    }
}

/// Verifier state for one protocol instance: at most one open round.
#[derive(Debug)]
pub struct Verifier {
    statement: Statement,
    pending: Option<(Commitment, Challenge)>,
    passed: u32,
}

impl Verifier {
    pub fn new(statement: Statement) -> Self {
        Self { statement, pending: None, passed: 0 }
    }

    pub fn statement(&self) -> &Statement {
        &self.statement
    }

    pub fn rounds_passed(&self) -> u32 {
        self.passed
    }

    pub fn challenge<R: RngCore + ?Sized>(&mut self, commitment: Commitment, rng: &mut R) -> Challenge {
        let challenge = Challenge::random(rng);
        self.pending = Some((commitment, challenge));
        challenge
    }

    /// Checks the reveal for the open round and closes it.
    pub fn check(&mut self, reveal: &Reveal) -> bool {
        let Some((commitment, challenge)) = self.pending.take() else {
            return false;
        };
        let ok = verify_round(&self.statement, &commitment, challenge, reveal);
        if ok {
            self.passed += 1;
        }
        ok
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Accept,
    /// Verification failed in the given (0-based) round.
    Reject { round: u32 },
    /// The prover side errored out.
    Abort(String),
}

impl Verdict {
    pub fn accepted(&self) -> bool {
        matches!(self, Verdict::Accept)
    }
}

#[derive(Debug, Clone)]
pub struct RoundRecord {
    pub commitment: Commitment,
    pub challenge: Challenge,
    pub reveal: Option<Reveal>,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct ZkTranscript {
    pub rounds: Vec<RoundRecord>,
    pub verdict: Verdict,
}

/// Runs up to `rounds` rounds, stopping at the first failure.
pub fn run_protocol(
    prover: &mut dyn Prover,
    verifier: &mut Verifier,
    rounds: u32,
    prover_rng: &mut dyn RngCore,
    verifier_rng: &mut dyn RngCore,
) -> Result<ZkTranscript, ZkError> {
    if rounds == 0 {
        return Err(ZkError::NoRounds);
    }
    let mut records = Vec::with_capacity(rounds as usize);
    for round in 0..rounds {
        let commitment = match prover.commit(prover_rng) {
            Ok(c) => c,
            Err(e) => return Ok(ZkTranscript { rounds: records, verdict: Verdict::Abort(e.to_string()) }),
        };
        let challenge = verifier.challenge(commitment.clone(), verifier_rng);
        let reveal = match prover.respond(challenge) {
            Ok(r) => r,
            Err(e) => {
                records.push(RoundRecord { commitment, challenge, reveal: None, passed: false });
                return Ok(ZkTranscript { rounds: records, verdict: Verdict::Abort(e.to_string()) });
            }
        };
        let passed = verifier.check(&reveal);
        records.push(RoundRecord { commitment, challenge, reveal: Some(reveal), passed });
        if !passed {
            return Ok(ZkTranscript { rounds: records, verdict: Verdict::Reject { round } });
        }
    }
    Ok(ZkTranscript { rounds: records, verdict: Verdict::Accept })
}

/// Produces a verifying round from the public statement alone, given the
/// challenge in advance. Its existence is what makes the transcript carry
/// no knowledge of the witness.
pub fn simulate_round<R: RngCore + ?Sized>(
    statement: &Statement,
    challenge: Challenge,
    rng: &mut R,
) -> (Commitment, Reveal) {
    let pk = &statement.pk;
    let b = statement.len();
    let t = fresh_randoms(pk, b, rng);
    let perm = random_permutation(b, rng);
    let prev = permute(reencrypt_all(pk, &statement.prev.records, &t), &perm);
    match challenge {
        Challenge::Open => {
            let w = fresh_randoms(pk, b, rng);
            let next = permute(reencrypt_all(pk, &statement.next.records, &w), &perm);
            (Commitment { prev, next }, Reveal::Openings { prev: t, next: w })
        }
        Challenge::Link => {
            let (factors, position, blinding, next) = fake_link(pk, &prev, statement.snapshot, rng);
            (Commitment { prev, next }, Reveal::Links { factors, position, blinding })
        }
    }
}

type FakeLink = (Vec<(BigUint, BigUint)>, u32, Option<BigUint>, Vec<EncryptedCounter>);

/// A `P_next` that links to `prev` by construction, with no relation to
/// the real `C_next`.
fn fake_link<R: RngCore + ?Sized>(
    pk: &BenalohPublicKey,
    prev: &[EncryptedCounter],
    snapshot: bool,
    rng: &mut R,
) -> FakeLink {
    let b = prev.len();
    let factors = fresh_randoms(pk, b, rng);
    let position = rng.gen_range(0..b);
    let blinding = snapshot.then(|| pk.random_unit(rng));
    let next = (0..b)
        .map(|q| {
            let mut base = prev[q].clone();
            if q == position {
                base = base.increment(pk);
            }
            let linked = base.reencrypt(pk, &factors[q]);
            match &blinding {
                Some(m) => linked.scale(pk, m),
                None => linked,
            }
        })
        .collect();
    (factors, position as u32, blinding, next)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CheatStrategy {
    /// Two counts incremented (or one count twice when `b = 1`).
    DoubleIncrement,
    /// Re-encryption only; nothing incremented.
    ZeroIncrement,
    /// Honest update, then one count replaced by an unrelated ciphertext.
    CorruptCounter,
}

impl CheatStrategy {
    pub const ALL: [CheatStrategy; 3] =
        [CheatStrategy::DoubleIncrement, CheatStrategy::ZeroIncrement, CheatStrategy::CorruptCounter];

    pub fn name(self) -> &'static str {
        match self {
            CheatStrategy::DoubleIncrement => "double_increment",
            CheatStrategy::ZeroIncrement => "zero_increment",
            CheatStrategy::CorruptCounter => "corrupt_counter",
        }
    }
}

/// A malformed update together with what its author knows about it.
#[derive(Debug, Clone)]
pub struct ForgedUpdate {
    pub next: CounterSet,
    pub randoms: Vec<(BigUint, BigUint)>,
    /// Increment applied per record, as the cheater built it.
    pub increments: Vec<u64>,
    /// Record whose count was replaced by a fresh encryption of this value.
    pub overwrite: Option<(usize, u64)>,
    /// Position the cheater will claim when asked to link.
    pub claimed: usize,
    pub blinding: Option<BigUint>,
}

pub fn forge_update<R: RngCore + ?Sized>(
    pk: &BenalohPublicKey,
    prev: &CounterSet,
    strategy: CheatStrategy,
    claimed: usize,
    blinding: Option<&BigUint>,
    rng: &mut R,
) -> ForgedUpdate {
    let b = prev.len();
    let claimed = claimed.min(b - 1);
    let randoms = fresh_randoms(pk, b, rng);
    let mut increments = vec![0u64; b];
    match strategy {
        CheatStrategy::DoubleIncrement => {
            increments[claimed] += 1;
            increments[(claimed + 1) % b] += 1;
        }
        CheatStrategy::ZeroIncrement => {}
        CheatStrategy::CorruptCounter => increments[claimed] = 1,
    }
    let mut next = apply_update(pk, prev, &increments, &randoms, blinding);
    let mut overwrite = None;
    if strategy == CheatStrategy::CorruptCounter {
        let victim = (claimed + 1) % b;
        let value = rng.gen_range(0..pk.block_size());
        let mut count = pk.encrypt_random(value, rng).expect("in range");
        if let Some(factor) = blinding {
            count = pk.scale(&count, factor);
        }
        next.records[victim].count = count;
        overwrite = Some((victim, value));
    }
    ForgedUpdate { next, randoms, increments, overwrite, claimed, blinding: blinding.cloned() }
}

struct CheatRound {
    guess: Challenge,
    t: Vec<(BigUint, BigUint)>,
    w: Vec<(BigUint, BigUint)>,
    perm: Vec<usize>,
    link: Option<FakeLink>,
    answered: bool,
}

/// Prover for a [`ForgedUpdate`]. Each round it guesses the challenge
/// uniformly at random and prepares commitments that survive only that
/// challenge; the other branch is answered from its forged randomness.
pub struct CheatingProver {
    statement: Statement,
    forged: ForgedUpdate,
    round: Option<CheatRound>,
}

impl CheatingProver {
    pub fn new(pk: BenalohPublicKey, prev: CounterSet, forged: ForgedUpdate, snapshot: bool) -> Self {
        let statement = Statement { pk, prev, next: forged.next.clone(), snapshot };
        Self { statement, forged, round: None }
    }

    pub fn statement(&self) -> &Statement {
        &self.statement
    }
}

impl Prover for CheatingProver {
    fn commit(&mut self, rng: &mut dyn RngCore) -> Result<Commitment, ZkError> {
        let pk = &self.statement.pk;
        let b = self.statement.len();
        let guess = Challenge::random(rng);
        let t = fresh_randoms(pk, b, rng);
        let w = fresh_randoms(pk, b, rng);
        let perm = random_permutation(b, rng);
        let prev = permute(reencrypt_all(pk, &self.statement.prev.records, &t), &perm);
        let (next, link) = match guess {
            Challenge::Open => (permute(reencrypt_all(pk, &self.statement.next.records, &w), &perm), None),
            Challenge::Link => {
                let link = fake_link(pk, &prev, self.statement.snapshot, rng);
                (link.3.clone(), Some(link))
            }
        };
        self.round = Some(CheatRound { guess, t, w, perm, link, answered: false });
        Ok(Commitment { prev, next })
    }

    fn respond(&mut self, challenge: Challenge) -> Result<Reveal, ZkError> {
        let round = self.round.as_mut().ok_or(ZkError::NoCommitment)?;
        if round.answered {
            return Err(ZkError::AlreadyAnswered);
        }
        round.answered = true;
        match (challenge, &round.link) {
            (Challenge::Open, _) => Ok(Reveal::Openings { prev: round.t.clone(), next: round.w.clone() }),
            (Challenge::Link, Some((factors, position, blinding, _))) => Ok(Reveal::Links {
                factors: factors.clone(),
                position: *position,
                blinding: blinding.clone(),
            }),
            (Challenge::Link, None) => {
                debug_assert_eq!(round.guess, Challenge::Open);
                // best effort from the forged update: correct wherever the
                // record really is a single-step re-encryption
                let pk = &self.statement.pk;
                let n = pk.modulus();
                let factors = link_factors(n, &self.forged.randoms, &round.t, &round.w, &round.perm, None);
                Ok(Reveal::Links {
                    factors,
                    position: round.perm[self.forged.claimed] as u32,
                    blinding: self.forged.blinding.clone(),
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benaloh::{keygen, BenalohKeyPair};
    use crate::lcp::{init_counters, reencrypt_and_increment, update_with_blinding, DimensionSpec, SubRange};

    fn key() -> &'static BenalohKeyPair {
        static KEY: std::sync::OnceLock<BenalohKeyPair> = std::sync::OnceLock::new();
        KEY.get_or_init(|| keygen(11, 128, &mut ChaCha20Rng::seed_from_u64(10)).unwrap())
    }

    fn counters(b: usize, rng: &mut ChaCha20Rng) -> CounterSet {
        let spec = DimensionSpec::interval("d", (0..=b).map(|x| x as f64).collect()).unwrap();
        init_counters(&key().public, 0, &spec, rng).unwrap()
    }

    fn honest(b: usize, j: usize, rng: &mut ChaCha20Rng) -> HonestProver {
        let prev = counters(b, rng);
        let (next, witness) = reencrypt_and_increment(&key().public, &prev, SubRange(j), rng).unwrap();
        let statement = Statement::new(key().public.clone(), prev, next, false).unwrap();
        HonestProver::new(statement, witness).unwrap()
    }

    #[test]
    fn commitments_decrypt_to_permuted_plaintexts() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let mut prover = honest(4, 3, &mut rng);
        let commitment = prover.prove_round(&mut rng);
        let sk = &key().secret;
        let mut prev: Vec<_> = commitment
            .prev
            .iter()
            .map(|r| (sk.decrypt(&r.index).unwrap(), sk.decrypt(&r.count).unwrap()))
            .collect();
        prev.sort();
        assert_eq!(prev, vec![(1, 0), (2, 0), (3, 0), (4, 0)]);
        let mut next: Vec<_> = commitment
            .next
            .iter()
            .map(|r| (sk.decrypt(&r.index).unwrap(), sk.decrypt(&r.count).unwrap()))
            .collect();
        next.sort();
        assert_eq!(next, vec![(1, 0), (2, 0), (3, 1), (4, 0)]);
    }

    #[test]
    fn single_record_identity_permutation() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let mut prover = honest(1, 1, &mut rng);
        let commitment = prover.prove_round(&mut rng);
        let sk = &key().secret;
        assert_eq!(sk.decrypt(&commitment.next[0].count).unwrap(), sk.decrypt(&commitment.prev[0].count).unwrap() + 1);
        let reveal = prover.respond(Challenge::Link).unwrap();
        assert!(matches!(reveal, Reveal::Links { position: 0, .. }));
        assert!(verify_round(&prover.statement, &commitment, Challenge::Link, &reveal));
    }

    #[test]
    fn both_branches_verify_for_honest_prover() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for b in 1..=8 {
            for challenge in [Challenge::Open, Challenge::Link] {
                let mut prover = honest(b, 1 + (b * 7) % b, &mut rng);
                let commitment = prover.prove_round(&mut rng);
                let reveal = prover.respond(challenge).unwrap();
                assert!(verify_round(&prover.statement, &commitment, challenge, &reveal), "b={b} {challenge:?}");
                assert!(!verify_round(&prover.statement, &commitment, challenge, &flip(&reveal)));
            }
        }
    }

    /// The same material presented as an answer to the other challenge.
    fn flip(reveal: &Reveal) -> Reveal {
        match reveal.clone() {
            Reveal::Openings { prev, .. } => Reveal::Links { factors: prev, position: 0, blinding: None },
            Reveal::Links { factors, .. } => Reveal::Openings { prev: factors.clone(), next: factors },
        }
    }

    #[test]
    fn open_reveal_rebuilds_commitment() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let mut prover = honest(5, 2, &mut rng);
        let commitment = prover.prove_round(&mut rng);
        let Reveal::Openings { prev, .. } = prover.respond(Challenge::Open).unwrap() else { panic!() };
        let pk = &key().public;
        for (l, t) in prev.iter().enumerate() {
            let rebuilt = prover.statement.prev.records[l].reencrypt(pk, t);
            assert_eq!(commitment.prev.iter().filter(|r| **r == rebuilt).count(), 1);
        }
    }

    #[test]
    fn tampered_link_factor_fails() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let mut prover = honest(4, 4, &mut rng);
        let commitment = prover.prove_round(&mut rng);
        let Reveal::Links { mut factors, position, blinding } = prover.respond(Challenge::Link).unwrap() else {
            panic!()
        };
        let pk = &key().public;
        // the incremented record itself links with y applied
        let p = position as usize;
        let expected = commitment.prev[p].increment(pk).reencrypt(pk, &factors[p]);
        assert_eq!(expected, commitment.next[p]);
        factors[p].0 = factors[p].0.clone() * 2u32 % pk.modulus();
        let tampered = Reveal::Links { factors, position, blinding };
        assert!(!verify_round(&prover.statement, &commitment, Challenge::Link, &tampered));
    }

    #[test]
    fn replay_and_order_guards() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let mut prover = honest(3, 1, &mut rng);
        assert_eq!(prover.respond(Challenge::Open), Err(ZkError::NoCommitment));
        prover.prove_round(&mut rng);
        prover.respond(Challenge::Open).unwrap();
        assert_eq!(prover.respond(Challenge::Link), Err(ZkError::AlreadyAnswered));
    }

    #[test]
    fn witness_must_match() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let prev = counters(3, &mut rng);
        let (next, mut witness) = reencrypt_and_increment(&key().public, &prev, SubRange(2), &mut rng).unwrap();
        witness.position = 0;
        let statement = Statement::new(key().public.clone(), prev, next, false).unwrap();
        assert_eq!(HonestProver::new(statement, witness).err(), Some(ZkError::WitnessMismatch));
    }

    #[test]
    fn zero_rounds_rejected() {
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let mut prover = honest(2, 1, &mut rng);
        let mut verifier = Verifier::new(prover.statement.clone());
        let mut vrng = ChaCha20Rng::seed_from_u64(9);
        assert_eq!(
            run_protocol(&mut prover, &mut verifier, 0, &mut rng, &mut vrng).err(),
            Some(ZkError::NoRounds)
        );
    }

    #[test]
    fn honest_run_accepts() {
        let mut rng = ChaCha20Rng::seed_from_u64(10);
        let mut prover = honest(5, 2, &mut rng);
        let mut verifier = Verifier::new(prover.statement.clone());
        let mut vrng = ChaCha20Rng::seed_from_u64(11);
        let transcript = run_protocol(&mut prover, &mut verifier, 30, &mut rng, &mut vrng).unwrap();
        assert_eq!(transcript.verdict, Verdict::Accept);
        assert_eq!(transcript.rounds.len(), 30);
        assert_eq!(verifier.rounds_passed(), 30);
    }

    #[test]
    fn cheaters_fail_the_unprepared_branch() {
        // exhaustive over guess x challenge for each strategy
        let mut rng = ChaCha20Rng::seed_from_u64(12);
        let pk = key().public.clone();
        for strategy in CheatStrategy::ALL {
            let prev = counters(4, &mut rng);
            let forged = forge_update(&pk, &prev, strategy, 1, None, &mut rng);
            let mut prover = CheatingProver::new(pk.clone(), prev, forged, false);
            let mut outcomes = std::collections::BTreeSet::new();
            for _ in 0..64 {
                let commitment = prover.commit(&mut rng).unwrap();
                let guess = prover.round.as_ref().unwrap().guess;
                for challenge in [Challenge::Open, Challenge::Link] {
                    prover.round.as_mut().unwrap().answered = false;
                    let reveal = prover.respond(challenge).unwrap();
                    let ok = verify_round(prover.statement(), &commitment, challenge, &reveal);
                    assert_eq!(ok, guess == challenge, "{strategy:?} guess {guess:?} challenge {challenge:?}");
                    outcomes.insert((guess.bit(), challenge.bit()));
                }
            }
            assert_eq!(outcomes.len(), 4);
        }
    }

    #[test]
    fn unrelated_next_set_fails_open_check() {
        let mut rng = ChaCha20Rng::seed_from_u64(13);
        let mut prover = honest(3, 1, &mut rng);
        let mut commitment = prover.prove_round(&mut rng);
        let other = counters(3, &mut rng);
        commitment.next = other.records;
        let reveal = prover.respond(Challenge::Open).unwrap();
        assert!(!verify_round(&prover.statement, &commitment, Challenge::Open, &reveal));
    }

    #[test]
    fn simulator_output_verifies() {
        let mut rng = ChaCha20Rng::seed_from_u64(14);
        for snapshot in [false, true] {
            let prev = counters(4, &mut rng);
            let share = key().public.random_unit(&mut rng);
            let blinding = snapshot.then_some(&share);
            let (next, _) = update_with_blinding(&key().public, &prev, SubRange(3), blinding, &mut rng).unwrap();
            let statement = Statement::new(key().public.clone(), prev, next, snapshot).unwrap();
            for challenge in [Challenge::Open, Challenge::Link] {
                let (commitment, reveal) = simulate_round(&statement, challenge, &mut rng);
                assert!(verify_round(&statement, &commitment, challenge, &reveal));
            }
        }
    }

    #[test]
    fn snapshot_mode_round_trip() {
        let mut rng = ChaCha20Rng::seed_from_u64(15);
        let pk = &key().public;
        let prev = counters(4, &mut rng);
        let share = pk.random_unit(&mut rng);
        let (next, witness) = update_with_blinding(pk, &prev, SubRange(2), Some(&share), &mut rng).unwrap();
        let statement = Statement::new(pk.clone(), prev, next, true).unwrap();
        let mut prover = HonestProver::new(statement.clone(), witness).unwrap();
        let mut verifier = Verifier::new(statement.clone());
        let mut vrng = ChaCha20Rng::seed_from_u64(16);
        let transcript = run_protocol(&mut prover, &mut verifier, 20, &mut rng, &mut vrng).unwrap();
        assert!(transcript.verdict.accepted());
        for round in &transcript.rounds {
            if let Some(Reveal::Links { blinding: Some(m), .. }) = &round.reveal {
                assert_ne!(m, &share);
            }
        }
        // a reveal without the masked share does not verify in snapshot mode
        let commitment = prover.prove_round(&mut rng);
        let Reveal::Links { factors, position, .. } = prover.respond(Challenge::Link).unwrap() else { panic!() };
        let stripped = Reveal::Links { factors, position, blinding: None };
        assert!(!verify_round(&statement, &commitment, Challenge::Link, &stripped));
    }
}
