//! Snapshot LCPs: one user (the aggregator) collects the profile of `k`
//! co-located participants without any venue or provider.
//!
//! Each participant holds a private blinding share `R_i` with
//! `R_1 ... R_k = R mod n`. Every contribution re-encrypts the counters,
//! increments one count and multiplies both components of every record by
//! `R_i`, proven with the snapshot flavor of ZK-CTR. Only after all `k`
//! contributions does multiplying by `K = R^-1` cancel the blinding.
//!
//! Shares come from a ring: the first participant starts the product with a
//! private mask, each participant multiplies in its share, and the first
//! participant strips the mask and hands `R` to the aggregator.

use std::collections::BTreeSet;

use num_bigint::BigUint;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::arith;
use crate::benaloh::{keygen, BenalohKeyPair, BenalohPublicKey};
use crate::lcp::{decrypt_histogram, init_counters, update_with_blinding, CounterSet, DimensionSpec, LcpError, ProfileValue};
use crate::wire;
use crate::zk::{forge_update, CheatStrategy, CheatingProver, HonestProver, Prover, Statement, Verifier};

/// Block size used when none is given. Large enough that decrypting a
/// still-blinded record hits the right value only about once in a thousand.
pub const DEFAULT_SNAPSHOT_BLOCK_SIZE: u64 = 1009;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("invalid parameters: {0}")]
    Parameter(String),
    #[error("participant {0} dropped out during setup")]
    Dropout(u32),
    #[error("participant {0} is not part of this snapshot")]
    UnknownParticipant(u32),
    #[error("participant {0} already contributed")]
    AlreadyContributed(u32),
    #[error("participant {label} failed the proof: {verdict}")]
    ZkRejected { label: u32, verdict: String },
    #[error("decryption failed: {0}")]
    Decryption(#[from] LcpError),
    #[error("{got} of {needed} contributions applied")]
    Incomplete { got: usize, needed: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotParams {
    pub rounds: u32,
    pub block_size: u64,
    pub modulus_bits: u64,
}

impl Default for SnapshotParams {
    fn default() -> Self {
        Self { rounds: crate::zk::DEFAULT_ROUNDS, block_size: DEFAULT_SNAPSHOT_BLOCK_SIZE, modulus_bits: 512 }
    }
}

/// A participant's multiplicative blinding share.
#[derive(Clone, PartialEq, Eq)]
pub struct BlindingShare {
    pub holder: u32,
    value: BigUint,
}

impl std::fmt::Debug for BlindingShare {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BlindingShare").field("holder", &self.holder).finish_non_exhaustive()
    }
}

impl BlindingShare {
    pub fn value(&self) -> &BigUint {
        &self.value
    }
}

/// One co-located user taking part in a snapshot.
pub struct Participant {
    pub label: u32,
    pub profile: Vec<ProfileValue>,
    /// Cheats on the first dimension when set.
    pub cheat: Option<CheatStrategy>,
    /// Whether it answers during share setup.
    pub online: bool,
    share: Option<BlindingShare>,
    rng: ChaCha20Rng,
}

impl std::fmt::Debug for Participant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Participant").field("label", &self.label).field("profile", &self.profile).finish_non_exhaustive()
    }
}

impl Participant {
    pub fn new(label: u32, profile: Vec<ProfileValue>, seed: [u8; 32]) -> Self {
        Self { label, profile, cheat: None, online: true, share: None, rng: ChaCha20Rng::from_seed(seed) }
    }

    pub fn share(&self) -> Option<&BlindingShare> {
        self.share.as_ref()
    }
}

/// Everything the aggregator holds.
#[derive(Debug, Clone)]
pub struct SnapshotState {
    pub keys: BenalohKeyPair,
    pub dims: Vec<DimensionSpec>,
    pub labels: Vec<u32>,
    pub counters: Vec<CounterSet>,
    /// Public product of all shares.
    pub blinding: BigUint,
    /// `R^-1 mod n`.
    pub unblinding: BigUint,
    pub contributed: BTreeSet<u32>,
    pub flagged: Vec<u32>,
    pub rounds: u32,
    /// Every group element the aggregator received from participants.
    pub received: Vec<BigUint>,
    /// Encoded bytes of all proof frames exchanged.
    pub proof_bytes: usize,
}

impl SnapshotState {
    pub fn public_key(&self) -> &BenalohPublicKey {
        &self.keys.public
    }

    pub fn k(&self) -> usize {
        self.labels.len()
    }

    pub fn contributions(&self) -> usize {
        self.contributed.len()
    }
}

/// Ring-masked product over the participants' shares. Returns `R` together
/// with the masked partial products that travelled around the ring.
fn ring_product(pk: &BenalohPublicKey, participants: &mut [Participant]) -> Result<(BigUint, Vec<BigUint>), SnapshotError> {
    let n = pk.modulus().clone();
    for p in participants.iter_mut() {
        if !p.online {
            return Err(SnapshotError::Dropout(p.label));
        }
        let value = pk.random_unit(&mut p.rng);
        p.share = Some(BlindingShare { holder: p.label, value });
    }
    let (first, rest) = participants.split_first_mut().expect("at least one participant");
    let mask = pk.random_unit(&mut first.rng);
    let mut running = &mask * first.share.as_ref().expect("assigned").value() % &n;
    let mut hops = vec![running.clone()];
    for p in rest.iter() {
        running = running * p.share.as_ref().expect("assigned").value() % &n;
        hops.push(running.clone());
    }
    let mask_inv = arith::mod_inverse(&mask, &n).expect("mask is a unit");
    Ok((running * mask_inv % &n, hops))
}

/// Generates the aggregator's key pair, establishes the blinding shares and
/// initializes one counter set per dimension. Any participant that does
/// not answer aborts the whole setup.
pub fn snapshot_setup<R: RngCore + ?Sized>(
    params: &SnapshotParams,
    dims: Vec<DimensionSpec>,
    participants: &mut [Participant],
    rng: &mut R,
) -> Result<SnapshotState, SnapshotError> {
    let k = participants.len();
    if k == 0 {
        return Err(SnapshotError::Parameter("no participants".into()));
    }
    if params.rounds == 0 {
        return Err(SnapshotError::Parameter("proofs need at least one round".into()));
    }
    if dims.is_empty() {
        return Err(SnapshotError::Parameter("no dimensions".into()));
    }
    if params.block_size <= k as u64 {
        return Err(SnapshotError::Parameter(format!("block size {} must exceed k = {k}", params.block_size)));
    }
    let labels: Vec<u32> = participants.iter().map(|p| p.label).collect();
    if labels.iter().collect::<BTreeSet<_>>().len() != k {
        return Err(SnapshotError::Parameter("participant labels must be unique".into()));
    }
    for spec in &dims {
        spec.validate()?;
        if spec.sub_ranges() as u64 >= params.block_size {
            return Err(SnapshotError::Parameter(format!("block size must exceed b = {}", spec.sub_ranges())));
        }
    }
    for p in participants.iter() {
        if p.profile.len() != dims.len() {
            return Err(SnapshotError::Parameter(format!("participant {} has a wrong profile length", p.label)));
        }
        for (spec, value) in dims.iter().zip(&p.profile) {
            spec.classify(value)?;
        }
    }
    let keys = keygen(params.block_size, params.modulus_bits, rng).map_err(|e| SnapshotError::Parameter(e.to_string()))?;
    let (blinding, _hops) = ring_product(&keys.public, participants)?;
    let unblinding = arith::mod_inverse(&blinding, keys.public.modulus()).expect("product of units");
    let counters = dims
        .iter()
        .enumerate()
        .map(|(d, spec)| init_counters(&keys.public, d as u16, spec, rng))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SnapshotState {
        keys,
        dims,
        labels,
        counters,
        received: vec![blinding.clone()],
        blinding,
        unblinding,
        contributed: BTreeSet::new(),
        flagged: Vec::new(),
        rounds: params.rounds,
        proof_bytes: 0,
    })
}

/// Runs one proof over encoded frames with the snapshot flag set.
fn prove_over_wire(
    state: &mut SnapshotState,
    dim: u16,
    prover: &mut dyn Prover,
    statement: Statement,
    prover_rng: &mut ChaCha20Rng,
    verifier_rng: &mut dyn RngCore,
) -> Result<(), String> {
    let pk = statement.pk.clone();
    let mut verifier = Verifier::new(statement);
    for round in 0..state.rounds {
        let r = round as u16;
        let commitment = prover.commit(prover_rng).map_err(|e| format!("abort: {e}"))?;
        let frame = wire::encode_commit(&pk, dim, r, true, &commitment);
        state.proof_bytes += frame.len();
        let commitment = wire::decode_commit(&pk, &frame).map_err(|e| e.to_string())?;
        let challenge = verifier.challenge(commitment, verifier_rng);
        let frame = wire::encode_challenge(dim, r, true, challenge);
        state.proof_bytes += frame.len();
        let challenge = wire::decode_challenge(&frame).map_err(|e| e.to_string())?;
        let reveal = prover.respond(challenge).map_err(|e| format!("abort: {e}"))?;
        let frame = wire::encode_reveal(&pk, dim, r, true, &reveal);
        state.proof_bytes += frame.len();
        let reveal = wire::decode_reveal(&pk, &frame).map_err(|e| e.to_string())?;
        if let crate::zk::Reveal::Links { blinding: Some(masked), .. } = &reveal {
            state.received.push(masked.clone());
        }
        if !verifier.check(&reveal) {
            return Err(format!("rejected in round {round}"));
        }
    }
    Ok(())
}

/// LCPGen for one participant. On success the aggregator's counter sets are
/// replaced; on a failed proof the contribution is discarded and the
/// participant flagged.
pub fn lcp_gen<R: RngCore + ?Sized>(
    state: &mut SnapshotState,
    participant: &mut Participant,
    rng: &mut R,
) -> Result<(), SnapshotError> {
    let label = participant.label;
    if !state.labels.contains(&label) {
        return Err(SnapshotError::UnknownParticipant(label));
    }
    if state.contributed.contains(&label) {
        return Err(SnapshotError::AlreadyContributed(label));
    }
    let share = participant.share.clone().ok_or(SnapshotError::UnknownParticipant(label))?;
    let pk = state.keys.public.clone();
    let mut next_sets = Vec::with_capacity(state.counters.len());
    let mut provers: Vec<(Box<dyn Prover>, Statement)> = Vec::new();
    for (d, (spec, prev)) in state.dims.iter().zip(&state.counters).enumerate() {
        let j = spec.classify(&participant.profile[d])?;
        match participant.cheat.filter(|_| d == 0) {
            None => {
                let (next, witness) = update_with_blinding(&pk, prev, j, Some(share.value()), &mut participant.rng)?;
                let statement = Statement::new(pk.clone(), prev.clone(), next.clone(), true)
                    .map_err(|e| SnapshotError::Parameter(e.to_string()))?;
                let prover = HonestProver::new(statement.clone(), witness)
                    .map_err(|e| SnapshotError::Parameter(e.to_string()))?;
                provers.push((Box::new(prover), statement));
                next_sets.push(next);
            }
            Some(strategy) => {
                let forged = forge_update(&pk, prev, strategy, j.position(), Some(share.value()), &mut participant.rng);
                let prover = CheatingProver::new(pk.clone(), prev.clone(), forged.clone(), true);
                let statement = prover.statement().clone();
                provers.push((Box::new(prover), statement));
                next_sets.push(forged.next);
            }
        }
    }
    let mut verifier_rng = ChaCha20Rng::seed_from_u64(rng.next_u64());
    for (d, (mut prover, statement)) in provers.into_iter().enumerate() {
        if let Err(verdict) =
            prove_over_wire(state, d as u16, prover.as_mut(), statement, &mut participant.rng, &mut verifier_rng)
        {
            state.flagged.push(label);
            return Err(SnapshotError::ZkRejected { label, verdict });
        }
    }
    state.counters = next_sets;
    state.contributed.insert(label);
    Ok(())
}

fn unblinded(state: &SnapshotState, set: &CounterSet) -> CounterSet {
    let pk = &state.keys.public;
    let records = set.records.iter().map(|r| r.scale(pk, &state.unblinding)).collect();
    CounterSet { dimension: set.dimension, check_ins: set.check_ins, records }
}

/// Multiplies every record by `K` and decrypts. Fails while any share is
/// still missing from the records, since the residual blinding scrambles
/// the plaintexts.
pub fn snapshot_pub_stats(state: &SnapshotState) -> Result<Vec<Vec<u64>>, SnapshotError> {
    let histograms = state
        .counters
        .iter()
        .map(|set| decrypt_histogram(&state.keys.secret, &unblinded(state, set)))
        .collect::<Result<Vec<_>, _>>()?;
    if state.contributions() != state.k() {
        return Err(SnapshotError::Incomplete { got: state.contributions(), needed: state.k() });
    }
    Ok(histograms)
}

/// Decrypts the current records as they are, without unblinding.
pub fn decrypt_without_unblinding(state: &SnapshotState) -> Result<Vec<Vec<u64>>, LcpError> {
    state.counters.iter().map(|set| decrypt_histogram(&state.keys.secret, set)).collect()
}

/// Plaintext histogram of the given profiles.
pub fn plaintext_histogram(dims: &[DimensionSpec], profiles: &[&[ProfileValue]]) -> Result<Vec<Vec<u64>>, LcpError> {
    let mut out: Vec<Vec<u64>> = dims.iter().map(|d| vec![0; d.sub_ranges()]).collect();
    for profile in profiles {
        for (d, spec) in dims.iter().enumerate() {
            out[d][spec.classify(&profile[d])?.position()] += 1;
        }
    }
    Ok(out)
}

/// Result of one complete snapshot run.
#[derive(Debug, Clone)]
pub struct SnapshotRun {
    pub histograms: Vec<Vec<u64>>,
    pub expected: Vec<Vec<u64>>,
    pub state: SnapshotState,
}

/// Setup, every participant's LCPGen in label order, then PubStats.
pub fn run_snapshot(
    params: &SnapshotParams,
    dims: Vec<DimensionSpec>,
    participants: &mut [Participant],
    seed: u64,
) -> Result<SnapshotRun, SnapshotError> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut state = snapshot_setup(params, dims, participants, &mut rng)?;
    for p in participants.iter_mut() {
        lcp_gen(&mut state, p, &mut rng)?;
    }
    let histograms = snapshot_pub_stats(&state)?;
    let profiles: Vec<&[ProfileValue]> = participants.iter().map(|p| p.profile.as_slice()).collect();
    let expected = plaintext_histogram(&state.dims, &profiles)?;
    Ok(SnapshotRun { histograms, expected, state })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims(b: usize) -> Vec<DimensionSpec> {
        vec![DimensionSpec::interval("d", (0..=b).map(|x| x as f64).collect()).unwrap()]
    }

    fn params() -> SnapshotParams {
        SnapshotParams { rounds: 6, block_size: 17, modulus_bits: 256 }
    }

    fn crowd(values: &[f64]) -> Vec<Participant> {
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| Participant::new(i as u32 + 1, vec![ProfileValue::Number(v)], [i as u8 + 1; 32]))
            .collect()
    }

    #[test]
    fn three_users_two_ranges() {
        // ranges (2, 2, 3) of b = 4
        let mut users = crowd(&[1.5, 1.2, 2.7]);
        let run = run_snapshot(&params(), dims(4), &mut users, 1).unwrap();
        assert_eq!(run.histograms, vec![vec![0, 2, 1, 0]]);
        assert_eq!(run.histograms, run.expected);
        assert!(run.state.proof_bytes > 0);
    }

    #[test]
    fn shares_multiply_to_public_product() {
        let mut users = crowd(&[0.5, 1.5, 2.5, 3.5]);
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let state = snapshot_setup(&params(), dims(4), &mut users, &mut rng).unwrap();
        let n = state.public_key().modulus();
        let product = users.iter().fold(BigUint::from(1u32), |acc, u| acc * u.share().unwrap().value() % n);
        assert_eq!(product, state.blinding);
        assert_eq!(&state.blinding * &state.unblinding % n, BigUint::from(1u32));
        // the aggregator never sees an individual share
        for u in &users {
            assert!(!state.received.contains(u.share().unwrap().value()));
        }
    }

    #[test]
    fn single_participant_share_is_the_product() {
        let mut users = crowd(&[0.5]);
        let run = run_snapshot(&params(), dims(2), &mut users, 3).unwrap();
        assert_eq!(users[0].share().unwrap().value(), &run.state.blinding);
        assert_eq!(run.histograms, vec![vec![1, 0]]);
    }

    #[test]
    fn dropout_aborts_setup() {
        let mut users = crowd(&[0.5, 1.5, 2.5]);
        users[1].online = false;
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        assert!(matches!(snapshot_setup(&params(), dims(3), &mut users, &mut rng), Err(SnapshotError::Dropout(2))));
    }

    #[test]
    fn early_pub_stats_fails() {
        let mut users = crowd(&[0.5, 1.5, 2.5]);
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let mut state = snapshot_setup(&params(), dims(3), &mut users, &mut rng).unwrap();
        for u in users.iter_mut().take(2) {
            lcp_gen(&mut state, u, &mut rng).unwrap();
        }
        assert!(snapshot_pub_stats(&state).is_err());
        lcp_gen(&mut state, &mut users[2], &mut rng).unwrap();
        assert_eq!(snapshot_pub_stats(&state).unwrap(), vec![vec![1, 1, 1]]);
        assert!(matches!(lcp_gen(&mut state, &mut users[2], &mut rng), Err(SnapshotError::AlreadyContributed(3))));
    }

    #[test]
    fn cheating_participant_is_flagged() {
        let mut users = crowd(&[0.5, 1.5]);
        users[0].cheat = Some(CheatStrategy::DoubleIncrement);
        let mut p = params();
        p.rounds = 20;
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let mut state = snapshot_setup(&p, dims(3), &mut users, &mut rng).unwrap();
        let before = state.counters.clone();
        assert!(matches!(lcp_gen(&mut state, &mut users[0], &mut rng), Err(SnapshotError::ZkRejected { label: 1, .. })));
        assert_eq!(state.flagged, vec![1]);
        assert_eq!(state.counters, before);
    }

    #[test]
    fn setup_validation() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        assert!(snapshot_setup(&params(), dims(3), &mut [], &mut rng).is_err());
        let mut same = crowd(&[0.5, 1.5]);
        same[1].label = 1;
        assert!(snapshot_setup(&params(), dims(3), &mut same, &mut rng).is_err());
        let mut many = crowd(&[0.5; 17]);
        assert!(snapshot_setup(&params(), dims(3), &mut many, &mut rng).is_err());
        let mut out_of_range = crowd(&[9.0]);
        assert!(snapshot_setup(&params(), dims(3), &mut out_of_range, &mut rng).is_err());
    }
}
