//! The venue-centric protocol: Setup, Spoter, CheckIn and PubStats, as
//! message-driven state machines for the provider, a venue and a user.
//!
//! Parties never call each other. Each one consumes a [`Frame`] from a
//! [`Peer`] and returns the frames it wants sent, so the same code runs
//! under the discrete-event simulator and in direct unit tests. Every party
//! owns a seeded RNG; simulated time is passed in as microseconds.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha512};
use thiserror::Error;

use crate::arith;
use crate::benaloh::{key_from_parts, keygen, BenalohKeyPair, BenalohPublicKey};
use crate::credentials::{
    BlindSignature, BlindedMessage, Pseudonym, PseudonymIssuer, PseudonymLedger, PseudonymRequest, PresenceToken,
    Signature, SignedPresenceToken, SigningKey, VerifyingKey, PRESENCE_TOKEN_LEN, PSEUDONYM_TOKEN_LEN,
};
use crate::lcp::{
    decrypt_histogram, init_counters, reencrypt_and_increment, CounterSet, DimensionSpec, ProfileValue, SubRange,
};
use crate::shamir::{self, Share, ShareParams};
use crate::wire::{self, Frame, Reader, Tag, WireError, Writer};
use crate::zk::{
    forge_update, CheatStrategy, CheatingProver, HonestProver, Prover, Statement, Verifier,
};

pub const SPOTER_NONCE_LEN: usize = 32;

/// Protocol parameters shared by every party of a deployment. Times are in
/// simulated microseconds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolParams {
    /// Cycle size: check-ins per key pair.
    pub k: usize,
    /// ZK-CTR rounds per dimension.
    pub rounds: u32,
    /// Benaloh block size r.
    pub block_size: u64,
    pub modulus_bits: u64,
    pub rsa_bits: u64,
    /// Spoter latency threshold.
    pub delta_us: u64,
    /// Validity of a presence token (the challenge's expiration interval).
    pub token_ttl_us: u64,
    pub epoch_us: u64,
    pub device_hash_us: u64,
    pub venue_hash_us: u64,
}

impl ProtocolParams {
    pub fn new(k: usize, dims: &[DimensionSpec]) -> Self {
        Self {
            k,
            rounds: crate::zk::DEFAULT_ROUNDS,
            block_size: Self::default_block_size(k, dims),
            modulus_bits: 512,
            rsa_bits: crate::credentials::DEFAULT_RSA_BITS,
            delta_us: 10_000,
            token_ttl_us: 60_000_000,
            epoch_us: 3_600_000_000,
            device_hash_us: 600,
            venue_hash_us: 3,
        }
    }

    /// Smallest odd prime above both the cycle size and every dimension's
    /// sub-range count.
    pub fn default_block_size(k: usize, dims: &[DimensionSpec]) -> u64 {
        let widest = dims.iter().map(DimensionSpec::sub_ranges).max().unwrap_or(1);
        arith::next_odd_prime(k.max(widest) as u64)
    }

    pub fn validate(&self, dims: &[DimensionSpec]) -> Result<(), ProtocolError> {
        if self.k == 0 {
            return Err(ProtocolError::Parameter("cycle size k must be at least 1".into()));
        }
        if self.k as u64 >= self.block_size {
            return Err(ProtocolError::Parameter(format!(
                "cycle size {} must be below the block size {}",
                self.k, self.block_size
            )));
        }
        if self.rounds == 0 || self.rounds > u32::from(u16::MAX) {
            return Err(ProtocolError::Parameter("ZK rounds must lie in [1, 65535]".into()));
        }
        if dims.is_empty() {
            return Err(ProtocolError::Parameter("at least one dimension is required".into()));
        }
        for spec in dims {
            spec.validate().map_err(|e| ProtocolError::Parameter(e.to_string()))?;
            if spec.sub_ranges() as u64 >= self.block_size {
                return Err(ProtocolError::Parameter(format!(
                    "dimension {} has {} sub-ranges, block size is {}",
                    spec.name,
                    spec.sub_ranges(),
                    self.block_size
                )));
            }
        }
        Ok(())
    }

    pub fn share_params(&self) -> ShareParams {
        ShareParams::for_modulus(self.k, self.k, self.modulus_bits).expect("validated cycle size")
    }

    pub fn epoch_at(&self, now_us: u64) -> u64 {
        now_us / self.epoch_us.max(1)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("invalid parameters: {0}")]
    Parameter(String),
    #[error("response after {elapsed_us} us exceeds the {limit_us} us threshold")]
    TimingViolation { elapsed_us: u64, limit_us: u64 },
    #[error("challenge response hash mismatch")]
    BadHash,
    #[error("unknown or closed session")]
    UnknownSession,
    #[error("presence token expired")]
    StaleToken,
    #[error("presence token already redeemed")]
    DuplicateToken,
    #[error("presence token signature invalid")]
    BadTokenSignature,
    #[error("unknown venue {0}")]
    UnknownVenue(u64),
    #[error("share signature invalid")]
    BadShareSignature,
    #[error("share not bound to this session")]
    SessionMismatch,
    #[error("pseudonym already checked in this epoch")]
    PseudonymSpent,
    #[error("pseudonym not valid for this epoch")]
    BadPseudonym,
    #[error("ZK-CTR rejected in dimension {dimension} round {round}")]
    ZkRejected { dimension: u16, round: u16 },
    #[error("pseudonym already issued for epoch {0}")]
    AlreadyIssued(u64),
    #[error("unexpected message")]
    OutOfOrder,
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("cycle {0} already closed")]
    StaleCycle(u64),
    #[error("counter sets rejected: {0}")]
    BadCounters(String),
}

impl From<WireError> for ProtocolError {
    fn from(e: WireError) -> Self {
        ProtocolError::Malformed(e.to_string())
    }
}

impl ProtocolError {
    pub fn code(&self) -> u8 {
        match self {
            ProtocolError::Parameter(_) => 1,
            ProtocolError::TimingViolation { .. } => 2,
            ProtocolError::BadHash => 3,
            ProtocolError::UnknownSession => 4,
            ProtocolError::StaleToken => 5,
            ProtocolError::DuplicateToken => 6,
            ProtocolError::BadTokenSignature => 7,
            ProtocolError::UnknownVenue(_) => 8,
            ProtocolError::BadShareSignature => 9,
            ProtocolError::SessionMismatch => 10,
            ProtocolError::PseudonymSpent => 11,
            ProtocolError::BadPseudonym => 12,
            ProtocolError::ZkRejected { .. } => 13,
            ProtocolError::AlreadyIssued(_) => 14,
            ProtocolError::OutOfOrder => 15,
            ProtocolError::Malformed(_) => 16,
            ProtocolError::StaleCycle(_) => 17,
            ProtocolError::BadCounters(_) => 18,
        }
    }

    pub fn kind(&self) -> &'static str {
        kind_for_code(self.code())
    }
}

pub fn kind_for_code(code: u8) -> &'static str {
    match code {
        1 => "parameter",
        2 => "timing_violation",
        3 => "bad_hash",
        4 => "unknown_session",
        5 => "stale_token",
        6 => "duplicate_token",
        7 => "bad_token_signature",
        8 => "unknown_venue",
        9 => "bad_share_signature",
        10 => "session_mismatch",
        11 => "pseudonym_spent",
        12 => "bad_pseudonym",
        13 => "zk_rejected",
        14 => "already_issued",
        15 => "out_of_order",
        16 => "malformed",
        17 => "stale_cycle",
        18 => "bad_counters",
        _ => "unknown",
    }
}

/// Who a frame comes from or goes to, as far as the receiving party can
/// tell.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Peer {
    Provider,
    Venue(u64),
    /// Authenticated direct channel (pseudonym issuance only).
    User(String),
    /// Local anonymous link, known only by the pseudonym label it uses.
    Link(String),
    /// Reply handle handed out by the mix.
    Handle(u64),
    Mix,
}

impl fmt::Display for Peer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Peer::Provider => write!(f, "provider"),
            Peer::Venue(id) => write!(f, "venue:{id}"),
            Peer::User(id) => write!(f, "user:{id}"),
            Peer::Link(label) => write!(f, "link:{label}"),
            Peer::Handle(h) => write!(f, "handle:{h}"),
            Peer::Mix => write!(f, "mix"),
        }
    }
}

/// A frame a party wants delivered, after `delay_us` of local processing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outbound {
    pub to: Peer,
    pub frame: Frame,
    pub delay_us: u64,
}

impl Outbound {
    fn now(to: Peer, frame: Frame) -> Self {
        Self { to, frame, delay_us: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpoterChallenge {
    pub session: u64,
    pub sampled_time: u64,
    pub expiry: u64,
    pub nonce: [u8; SPOTER_NONCE_LEN],
}

/// `SHA-512(T || dT || R)` with both times as 8-byte big-endian.
pub fn spoter_digest(challenge: &SpoterChallenge) -> [u8; 64] {
    let mut hasher = Sha512::new();
    hasher.update(challenge.sampled_time.to_be_bytes());
    hasher.update(challenge.expiry.to_be_bytes());
    hasher.update(challenge.nonce);
    hasher.finalize().into()
}

/// A key share signed by the provider and bound to one Spoter session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignedShare {
    pub venue_id: u64,
    pub cycle: u64,
    pub share: Share,
    pub nonce: [u8; SPOTER_NONCE_LEN],
    pub signature: Signature,
}

impl SignedShare {
    pub fn signed_bytes(venue_id: u64, cycle: u64, share: &Share, nonce: &[u8; SPOTER_NONCE_LEN]) -> Vec<u8> {
        let mut w = Writer::new();
        w.raw(b"share").u64(venue_id).u64(cycle).u32(share.index).big(&share.value).raw(nonce);
        w.finish()
    }

    pub fn verify(&self, provider: &VerifyingKey) -> bool {
        provider.verify(&Self::signed_bytes(self.venue_id, self.cycle, &self.share, &self.nonce), &self.signature)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DimensionHistogram {
    pub name: String,
    pub labels: Vec<String>,
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PubOutcome {
    Published(Vec<DimensionHistogram>),
    Aborted { shares: usize, needed: usize },
    IntegrityAlarm(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Publication {
    pub venue_id: u64,
    pub cycle: u64,
    pub outcome: PubOutcome,
}

impl Publication {
    /// One line per (dimension, sub-range label, count).
    pub fn lines(&self) -> Vec<String> {
        match &self.outcome {
            PubOutcome::Published(dims) => dims
                .iter()
                .flat_map(|d| {
                    d.labels.iter().zip(&d.counts).map(move |(label, count)| {
                        format!("venue={} cycle={} dim={} range={} count={}", self.venue_id, self.cycle, d.name, label, count)
                    })
                })
                .collect(),
            PubOutcome::Aborted { shares, needed } => vec![format!(
                "venue={} cycle={} abort shares={}/{}",
                self.venue_id, self.cycle, shares, needed
            )],
            PubOutcome::IntegrityAlarm(why) => {
                vec![format!("venue={} cycle={} integrity-alarm {}", self.venue_id, self.cycle, why)]
            }
        }
    }

    pub fn histograms(&self) -> Option<Vec<Vec<u64>>> {
        match &self.outcome {
            PubOutcome::Published(dims) => Some(dims.iter().map(|d| d.counts.clone()).collect()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    pub code: u8,
    pub session: u64,
    pub detail: String,
}

impl Rejection {
    pub fn kind(&self) -> &'static str {
        kind_for_code(self.code)
    }
}

/// Messages whose encoding does not depend on a Benaloh key. Counter and
/// proof frames are built by [`encode_submit`] and the `wire` helpers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Message {
    Setup { venue_id: u64, cycle: u64, public_key: BenalohPublicKey },
    PseudonymRequest { epoch: u64, blinded: BigUint },
    PseudonymGrant { epoch: u64, signature: BigUint },
    SpoterHello { pseudonym: Pseudonym },
    SpoterChallenge(SpoterChallenge),
    SpoterResponse { session: u64, digest: [u8; 64] },
    Token { session: u64, token: SignedPresenceToken },
    TokenRedeem { token: SignedPresenceToken },
    Share { share: SignedShare },
    CheckInRequest { session: u64, share: SignedShare },
    Counters { session: u64, cycle: u64, public_key: BenalohPublicKey, sets: Vec<CounterSet> },
    CheckInResult { session: u64, cycle: u64, accepted: bool, chain_position: u32 },
    Publish(Publication),
    Reject(Rejection),
}

fn put_pseudonym(w: &mut Writer, p: &Pseudonym) {
    w.u64(p.epoch).raw(&p.token).big(p.signature.value());
}

fn take_pseudonym(r: &mut Reader<'_>) -> Result<Pseudonym, WireError> {
    let epoch = r.u64()?;
    let token = r.array::<PSEUDONYM_TOKEN_LEN>()?;
    let signature = Signature::from_bytes(r.bytes()?);
    Ok(Pseudonym { epoch, token, signature })
}

fn put_token(w: &mut Writer, t: &SignedPresenceToken) {
    w.raw(&t.token.to_bytes()).big(t.signature.value());
}

fn take_token(r: &mut Reader<'_>) -> Result<SignedPresenceToken, WireError> {
    let token = PresenceToken::from_bytes(r.raw(PRESENCE_TOKEN_LEN)?).map_err(|_| WireError::Malformed("token"))?;
    let signature = Signature::from_bytes(r.bytes()?);
    Ok(SignedPresenceToken { token, signature })
}

fn put_share(w: &mut Writer, s: &SignedShare) {
    w.u64(s.venue_id)
        .u64(s.cycle)
        .u32(s.share.index)
        .big(&s.share.value)
        .raw(&s.nonce)
        .big(s.signature.value());
}

fn take_share(r: &mut Reader<'_>) -> Result<SignedShare, WireError> {
    let venue_id = r.u64()?;
    let cycle = r.u64()?;
    let index = r.u32()?;
    let value = r.big()?;
    let nonce = r.array::<SPOTER_NONCE_LEN>()?;
    let signature = Signature::from_bytes(r.bytes()?);
    Ok(SignedShare { venue_id, cycle, share: Share { index, value }, nonce, signature })
}

fn take_public_key(r: &mut Reader<'_>) -> Result<BenalohPublicKey, WireError> {
    BenalohPublicKey::from_bytes(r.bytes()?).map_err(|_| WireError::Malformed("public key"))
}

fn put_publication(w: &mut Writer, p: &Publication) {
    w.u64(p.venue_id).u64(p.cycle);
    match &p.outcome {
        PubOutcome::Published(dims) => {
            w.u8(0).u16(dims.len() as u16);
            for d in dims {
                w.str(&d.name).u16(d.counts.len() as u16);
                for (label, count) in d.labels.iter().zip(&d.counts) {
                    w.str(label).u64(*count);
                }
            }
        }
        PubOutcome::Aborted { shares, needed } => {
            w.u8(1).u32(*shares as u32).u32(*needed as u32);
        }
        PubOutcome::IntegrityAlarm(why) => {
            w.u8(2).str(why);
        }
    }
}

fn take_publication(r: &mut Reader<'_>) -> Result<Publication, WireError> {
    let venue_id = r.u64()?;
    let cycle = r.u64()?;
    let outcome = match r.u8()? {
        0 => {
            let dims = r.u16()?;
            let mut out = Vec::with_capacity(dims as usize);
            for _ in 0..dims {
                let name = r.str()?;
                let b = r.u16()?;
                let mut labels = Vec::with_capacity(b as usize);
                let mut counts = Vec::with_capacity(b as usize);
                for _ in 0..b {
                    labels.push(r.str()?);
                    counts.push(r.u64()?);
                }
                out.push(DimensionHistogram { name, labels, counts });
            }
            PubOutcome::Published(out)
        }
        1 => PubOutcome::Aborted { shares: r.u32()? as usize, needed: r.u32()? as usize },
        2 => PubOutcome::IntegrityAlarm(r.str()?),
        _ => return Err(WireError::Malformed("publication")),
    };
    Ok(Publication { venue_id, cycle, outcome })
}

impl Message {
    pub fn tag(&self) -> Tag {
        match self {
            Message::Setup { .. } => Tag::Setup,
            Message::PseudonymRequest { .. } => Tag::PseudonymRequest,
            Message::PseudonymGrant { .. } => Tag::PseudonymGrant,
            Message::SpoterHello { .. } => Tag::SpoterHello,
            Message::SpoterChallenge(_) => Tag::SpoterChallenge,
            Message::SpoterResponse { .. } => Tag::SpoterResponse,
            Message::Token { .. } => Tag::Token,
            Message::TokenRedeem { .. } => Tag::TokenRedeem,
            Message::Share { .. } => Tag::Share,
            Message::CheckInRequest { .. } => Tag::CheckInRequest,
            Message::Counters { .. } => Tag::Counters,
            Message::CheckInResult { .. } => Tag::CheckInResult,
            Message::Publish(_) => Tag::Publish,
            Message::Reject(_) => Tag::Reject,
        }
    }

    pub fn encode(&self) -> Frame {
        let mut w = Writer::new();
        match self {
            Message::Setup { venue_id, cycle, public_key } => {
                w.u64(*venue_id).u64(*cycle).bytes(&public_key.to_bytes());
            }
            Message::PseudonymRequest { epoch, blinded } => {
                w.u64(*epoch).big(blinded);
            }
            Message::PseudonymGrant { epoch, signature } => {
                w.u64(*epoch).big(signature);
            }
            Message::SpoterHello { pseudonym } => put_pseudonym(&mut w, pseudonym),
            Message::SpoterChallenge(c) => {
                w.u64(c.session).u64(c.sampled_time).u64(c.expiry).raw(&c.nonce);
            }
            Message::SpoterResponse { session, digest } => {
                w.u64(*session).raw(digest);
            }
            Message::Token { session, token } => {
                w.u64(*session);
                put_token(&mut w, token);
            }
            Message::TokenRedeem { token } => put_token(&mut w, token),
            Message::Share { share } => put_share(&mut w, share),
            Message::CheckInRequest { session, share } => {
                w.u64(*session);
                put_share(&mut w, share);
            }
            Message::Counters { session, cycle, public_key, sets } => {
                w.u64(*session).u64(*cycle).bytes(&public_key.to_bytes());
                wire::put_counter_sets(&mut w, public_key, sets);
            }
            Message::CheckInResult { session, cycle, accepted, chain_position } => {
                w.u64(*session).u64(*cycle).u8(u8::from(*accepted)).u32(*chain_position);
            }
            Message::Publish(p) => put_publication(&mut w, p),
            Message::Reject(rej) => {
                w.u8(rej.code).u64(rej.session).str(&rej.detail);
            }
        }
        Frame::new(self.tag(), w.finish())
    }

    pub fn decode(frame: &Frame) -> Result<Self, WireError> {
        let mut r = Reader::new(&frame.payload);
        let message = match frame.tag {
            Tag::Setup => Message::Setup { venue_id: r.u64()?, cycle: r.u64()?, public_key: take_public_key(&mut r)? },
            Tag::PseudonymRequest => Message::PseudonymRequest { epoch: r.u64()?, blinded: r.big()? },
            Tag::PseudonymGrant => Message::PseudonymGrant { epoch: r.u64()?, signature: r.big()? },
            Tag::SpoterHello => Message::SpoterHello { pseudonym: take_pseudonym(&mut r)? },
            Tag::SpoterChallenge => Message::SpoterChallenge(SpoterChallenge {
                session: r.u64()?,
                sampled_time: r.u64()?,
                expiry: r.u64()?,
                nonce: r.array()?,
            }),
            Tag::SpoterResponse => Message::SpoterResponse { session: r.u64()?, digest: r.array()? },
            Tag::Token => Message::Token { session: r.u64()?, token: take_token(&mut r)? },
            Tag::TokenRedeem => Message::TokenRedeem { token: take_token(&mut r)? },
            Tag::Share => Message::Share { share: take_share(&mut r)? },
            Tag::CheckInRequest => Message::CheckInRequest { session: r.u64()?, share: take_share(&mut r)? },
            Tag::Counters => {
                let session = r.u64()?;
                let cycle = r.u64()?;
                let public_key = take_public_key(&mut r)?;
                let sets = wire::take_counter_sets(&mut r, &public_key)?;
                Message::Counters { session, cycle, public_key, sets }
            }
            Tag::CheckInResult => Message::CheckInResult {
                session: r.u64()?,
                cycle: r.u64()?,
                accepted: r.u8()? != 0,
                chain_position: r.u32()?,
            },
            Tag::Publish => Message::Publish(take_publication(&mut r)?),
            Tag::Reject => Message::Reject(Rejection { code: r.u8()?, session: r.u64()?, detail: r.str()? }),
            other => return Err(WireError::Unexpected(other)),
        };
        r.done()?;
        Ok(message)
    }
}

/// `CHECKIN_SUBMIT`: the session and the new counter sets.
pub fn encode_submit(pk: &BenalohPublicKey, session: u64, sets: &[CounterSet]) -> Frame {
    let mut w = Writer::new();
    w.u64(session);
    wire::put_counter_sets(&mut w, pk, sets);
    Frame::new(Tag::CheckInSubmit, w.finish())
}

pub fn decode_submit(pk: &BenalohPublicKey, frame: &Frame) -> Result<(u64, Vec<CounterSet>), WireError> {
    let mut r = frame.expect(Tag::CheckInSubmit)?;
    let session = r.u64()?;
    let sets = wire::take_counter_sets(&mut r, pk)?;
    r.done()?;
    Ok((session, sets))
}

fn reject(to: Peer, session: u64, err: &ProtocolError) -> Outbound {
    Outbound::now(
        to,
        Message::Reject(Rejection { code: err.code(), session, detail: err.to_string() }).encode(),
    )
}

fn seeded(seed: [u8; 32]) -> ChaCha20Rng {
    ChaCha20Rng::from_seed(seed)
}

// ---------------------------------------------------------------- provider

#[derive(Debug)]
struct ProviderCycle {
    cycle: u64,
    keys: BenalohKeyPair,
    shares: Vec<Share>,
    issued: usize,
}

#[derive(Debug)]
struct ProviderVenue {
    key: VerifyingKey,
    current: ProviderCycle,
}

/// The GSN provider: generates cycle keys, issues pseudonyms blindly and
/// trades presence tokens for signed key shares.
pub struct Provider {
    params: ProtocolParams,
    rng: ChaCha20Rng,
    share_signer: SigningKey,
    issuer: PseudonymIssuer,
    venues: BTreeMap<u64, ProviderVenue>,
    retired: BTreeMap<(u64, u64), BenalohKeyPair>,
    spent_tokens: BTreeSet<[u8; SPOTER_NONCE_LEN]>,
    publications: Vec<Publication>,
    notes: Vec<String>,
}

impl Provider {
    pub fn new(params: ProtocolParams, seed: [u8; 32]) -> Result<Self, ProtocolError> {
        let mut rng = seeded(seed);
        let share_signer =
            SigningKey::generate(params.rsa_bits, &mut rng).map_err(|e| ProtocolError::Parameter(e.to_string()))?;
        let issuer_key =
            SigningKey::generate(params.rsa_bits, &mut rng).map_err(|e| ProtocolError::Parameter(e.to_string()))?;
        Ok(Self {
            params,
            rng,
            share_signer,
            issuer: PseudonymIssuer::new(issuer_key),
            venues: BTreeMap::new(),
            retired: BTreeMap::new(),
            spent_tokens: BTreeSet::new(),
            publications: Vec::new(),
            notes: Vec::new(),
        })
    }

    pub fn share_key(&self) -> &VerifyingKey {
        self.share_signer.verifying_key()
    }

    pub fn pseudonym_key(&self) -> &VerifyingKey {
        self.issuer.verifying_key()
    }

    pub fn publications(&self) -> &[Publication] {
        &self.publications
    }

    pub fn drain_notes(&mut self) -> Vec<String> {
        std::mem::take(&mut self.notes)
    }

    /// Current cycle keys of a venue (inspection only).
    pub fn cycle_keys(&self, venue_id: u64, cycle: u64) -> Option<&BenalohKeyPair> {
        match self.venues.get(&venue_id) {
            Some(v) if v.current.cycle == cycle => Some(&v.current.keys),
            _ => self.retired.get(&(venue_id, cycle)),
        }
    }

    /// Number of live cycles holding a secret key.
    pub fn live_cycles(&self) -> usize {
        self.venues.len()
    }

    fn fresh_cycle(&mut self, cycle: u64) -> Result<ProviderCycle, ProtocolError> {
        let keys = keygen(self.params.block_size, self.params.modulus_bits, &mut self.rng)
            .map_err(|e| ProtocolError::Parameter(e.to_string()))?;
        let shares = shamir::split(keys.secret.p(), &self.params.share_params(), &mut self.rng)
            .map_err(|e| ProtocolError::Parameter(e.to_string()))?;
        Ok(ProviderCycle { cycle, keys, shares, issued: 0 })
    }

    fn setup_frame(venue_id: u64, cycle: &ProviderCycle) -> Outbound {
        Outbound::now(
            Peer::Venue(venue_id),
            Message::Setup { venue_id, cycle: cycle.cycle, public_key: cycle.keys.public.clone() }.encode(),
        )
    }

    /// Setup for a new venue: registers its token key and starts cycle 0.
    pub fn register_venue(&mut self, venue_id: u64, key: VerifyingKey) -> Result<Outbound, ProtocolError> {
        let current = self.fresh_cycle(0)?;
        let out = Self::setup_frame(venue_id, &current);
        self.notes.push(format!("setup venue={venue_id} cycle=0"));
        self.venues.insert(venue_id, ProviderVenue { key, current });
        Ok(out)
    }

    pub fn handle(&mut self, from: &Peer, frame: &Frame, now: u64) -> Vec<Outbound> {
        let message = match Message::decode(frame) {
            Ok(m) => m,
            Err(e) => return vec![reject(from.clone(), 0, &e.into())],
        };
        match (from, message) {
            (Peer::User(user), Message::PseudonymRequest { epoch, blinded }) => {
                match self.issuer.issue(user, epoch, &BlindedMessage(blinded)) {
                    Ok(BlindSignature(signature)) => {
                        self.notes.push(format!("pseudonym issued epoch={epoch}"));
                        vec![Outbound::now(from.clone(), Message::PseudonymGrant { epoch, signature }.encode())]
                    }
                    Err(_) => {
                        self.notes.push(format!("pseudonym refused epoch={epoch}"));
                        vec![reject(from.clone(), 0, &ProtocolError::AlreadyIssued(epoch))]
                    }
                }
            }
            (Peer::Handle(_), Message::TokenRedeem { token }) => match self.redeem(&token, now) {
                Ok(out) => out.into_iter().map(|o| if o.to == Peer::Mix { Outbound { to: from.clone(), ..o } } else { o }).collect(),
                Err(e) => {
                    self.notes.push(format!("token rejected: {}", e.kind()));
                    vec![reject(from.clone(), 0, &e)]
                }
            },
            (Peer::Venue(id), Message::Publish(p)) if p.venue_id == *id => {
                self.notes.push(format!("publication venue={} cycle={}", p.venue_id, p.cycle));
                self.publications.push(p);
                Vec::new()
            }
            _ => vec![reject(from.clone(), 0, &ProtocolError::OutOfOrder)],
        }
    }

    /// Verifies a presence token and returns the share frame (addressed to
    /// `Peer::Mix`, i.e. back along the reply path), preceded by a Setup
    /// frame when the token opens a new cycle.
    fn redeem(&mut self, token: &SignedPresenceToken, now: u64) -> Result<Vec<Outbound>, ProtocolError> {
        let t = &token.token;
        let venue = self.venues.get(&t.venue_id).ok_or(ProtocolError::UnknownVenue(t.venue_id))?;
        if !token.verify(&venue.key) {
            return Err(ProtocolError::BadTokenSignature);
        }
        if now < t.timestamp || now - t.timestamp > self.params.token_ttl_us {
            return Err(ProtocolError::StaleToken);
        }
        if !self.spent_tokens.insert(t.nonce) {
            return Err(ProtocolError::DuplicateToken);
        }
        let mut out = Vec::new();
        if self.venues[&t.venue_id].current.issued >= self.params.k {
            let next = self.venues[&t.venue_id].current.cycle + 1;
            let fresh = self.fresh_cycle(next)?;
            out.push(Self::setup_frame(t.venue_id, &fresh));
            self.notes.push(format!("setup venue={} cycle={next}", t.venue_id));
            let venue = self.venues.get_mut(&t.venue_id).expect("present");
            let old = std::mem::replace(&mut venue.current, fresh);
            self.retired.insert((t.venue_id, old.cycle), old.keys);
        }
        let venue = self.venues.get_mut(&t.venue_id).expect("present");
        let cycle = &mut venue.current;
        let share = cycle.shares[cycle.issued].clone();
        cycle.issued += 1;
        let signed = SignedShare {
            venue_id: t.venue_id,
            cycle: cycle.cycle,
            signature: self
                .share_signer
                .sign(&SignedShare::signed_bytes(t.venue_id, cycle.cycle, &share, &t.nonce)),
            share,
            nonce: t.nonce,
        };
        self.notes.push(format!("share issued venue={} cycle={} ordinal={}", t.venue_id, signed.cycle, signed.share.index));
        out.push(Outbound::now(Peer::Mix, Message::Share { share: signed }.encode()));
        Ok(out)
    }
}

// ------------------------------------------------------------------- venue

#[derive(Debug, Clone)]
pub struct VenueCycle {
    pub cycle: u64,
    pub public_key: BenalohPublicKey,
    pub counters: Vec<CounterSet>,
    pub shares: Vec<Share>,
}

#[derive(Debug)]
enum SessionState {
    Challenged { challenge: SpoterChallenge, issued_at: u64 },
    TokenIssued { nonce: [u8; SPOTER_NONCE_LEN] },
    Queued { share: SignedShare },
    AwaitingSubmit { share: SignedShare },
    Proving { share: SignedShare, sets: Vec<CounterSet>, verifiers: Vec<Verifier>, dim: usize, round: u32, committed: bool },
    Closed,
}

#[derive(Debug)]
struct VenueSession {
    label: String,
    pseudonym: Pseudonym,
    state: SessionState,
}

/// Timing record of one Spoter run as seen by the venue.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpoterTiming {
    pub session: u64,
    pub elapsed_us: u64,
    pub accepted: bool,
}

/// Spotr_V: runs Spoter, verifies CheckIns and publishes statistics.
pub struct Venue {
    id: u64,
    params: ProtocolParams,
    dims: Vec<DimensionSpec>,
    rng: ChaCha20Rng,
    signer: SigningKey,
    share_key: VerifyingKey,
    pseudonym_key: VerifyingKey,
    cycles: BTreeMap<u64, VenueCycle>,
    closed: BTreeSet<u64>,
    sessions: BTreeMap<u64, VenueSession>,
    next_session: u64,
    ledger: PseudonymLedger,
    active: Option<u64>,
    queue: VecDeque<u64>,
    publications: Vec<Publication>,
    timings: Vec<SpoterTiming>,
    notes: Vec<String>,
}

impl Venue {
    pub fn new(
        id: u64,
        params: ProtocolParams,
        dims: Vec<DimensionSpec>,
        share_key: VerifyingKey,
        pseudonym_key: VerifyingKey,
        seed: [u8; 32],
    ) -> Result<Self, ProtocolError> {
        params.validate(&dims)?;
        let mut rng = seeded(seed);
        let signer =
            SigningKey::generate(params.rsa_bits, &mut rng).map_err(|e| ProtocolError::Parameter(e.to_string()))?;
        Ok(Self {
            id,
            params,
            dims,
            rng,
            signer,
            share_key,
            pseudonym_key,
            cycles: BTreeMap::new(),
            closed: BTreeSet::new(),
            sessions: BTreeMap::new(),
            next_session: 1,
            ledger: PseudonymLedger::default(),
            active: None,
            queue: VecDeque::new(),
            publications: Vec::new(),
            timings: Vec::new(),
            notes: Vec::new(),
        })
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn token_key(&self) -> &VerifyingKey {
        self.signer.verifying_key()
    }

    pub fn dimensions(&self) -> &[DimensionSpec] {
        &self.dims
    }

    pub fn cycle(&self, cycle: u64) -> Option<&VenueCycle> {
        self.cycles.get(&cycle)
    }

    pub fn open_cycles(&self) -> impl Iterator<Item = &VenueCycle> {
        self.cycles.values().filter(|c| !self.closed.contains(&c.cycle))
    }

    pub fn publications(&self) -> &[Publication] {
        &self.publications
    }

    pub fn spoter_timings(&self) -> &[SpoterTiming] {
        &self.timings
    }

    pub fn drain_notes(&mut self) -> Vec<String> {
        std::mem::take(&mut self.notes)
    }

    /// Largest number of key shares held for any cycle that has not been
    /// published.
    pub fn max_open_shares(&self) -> usize {
        self.open_cycles().map(|c| c.shares.len()).max().unwrap_or(0)
    }

    pub fn handle(&mut self, from: &Peer, frame: &Frame, now: u64) -> Vec<Outbound> {
        let result = match frame.tag {
            Tag::ZkCommit | Tag::ZkReveal | Tag::CheckInSubmit => self.on_proof_frame(from, frame),
            _ => match Message::decode(frame) {
                Ok(message) => self.on_message(from, message, now),
                Err(e) => Err((0, e.into())),
            },
        };
        match result {
            Ok(out) => out,
            Err((session, e)) => {
                self.notes.push(format!("reject session={session} {}", e.kind()));
                let mut out = vec![reject(from.clone(), session, &e)];
                if let Some(s) = self.sessions.get_mut(&session) {
                    s.state = SessionState::Closed;
                }
                if self.active == Some(session) {
                    self.active = None;
                    out.extend(self.pump());
                }
                out
            }
        }
    }

    fn session_for(&self, from: &Peer, session: u64) -> Result<&VenueSession, (u64, ProtocolError)> {
        match (self.sessions.get(&session), from) {
            (Some(s), Peer::Link(label)) if &s.label == label => Ok(s),
            // never attribute a stranger's frame to someone else's session
            _ => Err((0, ProtocolError::UnknownSession)),
        }
    }

    fn on_message(&mut self, from: &Peer, message: Message, now: u64) -> Result<Vec<Outbound>, (u64, ProtocolError)> {
        match message {
            Message::Setup { venue_id, cycle, public_key } if *from == Peer::Provider && venue_id == self.id => {
                self.install(cycle, public_key).map_err(|e| (0, e))?;
                Ok(self.pump())
            }
            Message::SpoterHello { pseudonym } => {
                let Peer::Link(label) = from else { return Err((0, ProtocolError::OutOfOrder)) };
                let epoch = self.params.epoch_at(now);
                if pseudonym.epoch != epoch || !pseudonym.verify(&self.pseudonym_key) {
                    return Err((0, ProtocolError::BadPseudonym));
                }
                if self.ledger.is_spent(&pseudonym, epoch) {
                    return Err((0, ProtocolError::PseudonymSpent));
                }
                let session = self.next_session;
                self.next_session += 1;
                let mut nonce = [0u8; SPOTER_NONCE_LEN];
                self.rng.fill_bytes(&mut nonce);
                let challenge =
                    SpoterChallenge { session, sampled_time: now, expiry: self.params.token_ttl_us, nonce };
                let frame = Message::SpoterChallenge(challenge.clone()).encode();
                self.sessions.insert(
                    session,
                    VenueSession {
                        label: label.clone(),
                        pseudonym,
                        state: SessionState::Challenged { challenge, issued_at: now },
                    },
                );
                self.notes.push(format!("spoter challenge session={session}"));
                Ok(vec![Outbound::now(from.clone(), frame)])
            }
            Message::SpoterResponse { session, digest } => {
                let s = self.session_for(from, session)?;
                let SessionState::Challenged { challenge, issued_at } = &s.state else {
                    return Err((session, ProtocolError::OutOfOrder));
                };
                let (challenge, issued_at) = (challenge.clone(), *issued_at);
                let elapsed_us = now - issued_at;
                let timing_ok = elapsed_us <= self.params.delta_us;
                self.timings.push(SpoterTiming { session, elapsed_us, accepted: timing_ok });
                self.notes.push(format!("spoter response session={session} elapsed_us={elapsed_us}"));
                if !timing_ok {
                    return Err((session, ProtocolError::TimingViolation { elapsed_us, limit_us: self.params.delta_us }));
                }
                if digest != spoter_digest(&challenge) {
                    if let Some(t) = self.timings.last_mut() {
                        t.accepted = false;
                    }
                    return Err((session, ProtocolError::BadHash));
                }
                let token = PresenceToken {
                    venue_id: self.id,
                    epoch: self.params.epoch_at(challenge.sampled_time),
                    timestamp: challenge.sampled_time,
                    nonce: challenge.nonce,
                };
                let nonce = token.nonce;
                let signed = SignedPresenceToken::sign(token, &self.signer);
                self.sessions.get_mut(&session).expect("checked").state = SessionState::TokenIssued { nonce };
                Ok(vec![Outbound {
                    to: from.clone(),
                    frame: Message::Token { session, token: signed }.encode(),
                    delay_us: self.params.venue_hash_us,
                }])
            }
            Message::CheckInRequest { session, share } => {
                let s = self.session_for(from, session)?;
                let SessionState::TokenIssued { nonce } = &s.state else {
                    return Err((session, ProtocolError::OutOfOrder));
                };
                if share.venue_id != self.id || !share.verify(&self.share_key) {
                    return Err((session, ProtocolError::BadShareSignature));
                }
                if &share.nonce != nonce {
                    return Err((session, ProtocolError::SessionMismatch));
                }
                if self.closed.contains(&share.cycle) {
                    return Err((session, ProtocolError::StaleCycle(share.cycle)));
                }
                let epoch = s.pseudonym.epoch;
                let pseudonym = s.pseudonym.clone();
                if !self.ledger.check_fresh(&pseudonym, epoch) {
                    return Err((session, ProtocolError::PseudonymSpent));
                }
                self.notes.push(format!("checkin queued session={session} cycle={}", share.cycle));
                self.sessions.get_mut(&session).expect("checked").state = SessionState::Queued { share };
                self.queue.push_back(session);
                Ok(self.pump())
            }
            _ => Err((0, ProtocolError::OutOfOrder)),
        }
    }

    fn install(&mut self, cycle: u64, public_key: BenalohPublicKey) -> Result<(), ProtocolError> {
        if self.cycles.contains_key(&cycle) || self.closed.contains(&cycle) {
            return Err(ProtocolError::StaleCycle(cycle));
        }
        if public_key.block_size() != self.params.block_size {
            return Err(ProtocolError::Parameter("setup key has the wrong block size".into()));
        }
        let counters = self
            .dims
            .iter()
            .enumerate()
            .map(|(d, spec)| init_counters(&public_key, d as u16, spec, &mut self.rng))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| ProtocolError::Parameter(e.to_string()))?;
        self.notes.push(format!("cycle installed cycle={cycle}"));
        self.cycles.insert(cycle, VenueCycle { cycle, public_key, counters, shares: Vec::new() });
        Ok(())
    }

    /// Starts the next queued check-in whose cycle is installed.
    fn pump(&mut self) -> Vec<Outbound> {
        if self.active.is_some() {
            return Vec::new();
        }
        let ready = self.queue.iter().position(|id| match &self.sessions[id].state {
            SessionState::Queued { share } => self.cycles.contains_key(&share.cycle),
            _ => false,
        });
        let Some(pos) = ready else { return Vec::new() };
        let session = self.queue.remove(pos).expect("index from position");
        let entry = self.sessions.get_mut(&session).expect("queued sessions exist");
        let SessionState::Queued { share } = std::mem::replace(&mut entry.state, SessionState::Closed) else {
            unreachable!("filtered above")
        };
        let cycle = &self.cycles[&share.cycle];
        let frame = Message::Counters {
            session,
            cycle: cycle.cycle,
            public_key: cycle.public_key.clone(),
            sets: cycle.counters.clone(),
        }
        .encode();
        entry.state = SessionState::AwaitingSubmit { share };
        self.active = Some(session);
        vec![Outbound::now(Peer::Link(entry.label.clone()), frame)]
    }

    fn on_proof_frame(&mut self, from: &Peer, frame: &Frame) -> Result<Vec<Outbound>, (u64, ProtocolError)> {
        let session = self.active.ok_or((0, ProtocolError::OutOfOrder))?;
        self.session_for(from, session)?;
        let rounds = self.params.rounds;
        let entry = self.sessions.get_mut(&session).expect("active session exists");
        match (&mut entry.state, frame.tag) {
            (SessionState::AwaitingSubmit { share }, Tag::CheckInSubmit) => {
                let cycle = &self.cycles[&share.cycle];
                let (claimed, sets) = decode_submit(&cycle.public_key, frame).map_err(|e| (session, e.into()))?;
                if claimed != session {
                    return Err((session, ProtocolError::UnknownSession));
                }
                if sets.len() != cycle.counters.len() {
                    return Err((session, ProtocolError::BadCounters("dimension count".into())));
                }
                let mut verifiers = Vec::with_capacity(sets.len());
                for (prev, next) in cycle.counters.iter().zip(&sets) {
                    if next.dimension != prev.dimension || next.check_ins != prev.check_ins + 1 {
                        return Err((session, ProtocolError::BadCounters("header".into())));
                    }
                    let statement = Statement::new(cycle.public_key.clone(), prev.clone(), next.clone(), false)
                        .map_err(|e| (session, ProtocolError::BadCounters(e.to_string())))?;
                    verifiers.push(Verifier::new(statement));
                }
                let share = share.clone();
                entry.state = SessionState::Proving { share, sets, verifiers, dim: 0, round: 0, committed: false };
                Ok(Vec::new())
            }
            (SessionState::Proving { share, verifiers, dim, round, committed, .. }, Tag::ZkCommit) => {
                let (d, r) = wire::split_zk_context(frame.context);
                if *committed || usize::from(d) != *dim || u32::from(r) != *round {
                    return Err((session, ProtocolError::OutOfOrder));
                }
                let pk = &self.cycles[&share.cycle].public_key;
                let commitment = wire::decode_commit(pk, frame).map_err(|e| (session, e.into()))?;
                let challenge = verifiers[*dim].challenge(commitment, &mut self.rng);
                *committed = true;
                Ok(vec![Outbound::now(from.clone(), wire::encode_challenge(d, r, false, challenge))])
            }
            (SessionState::Proving { share, verifiers, dim, round, committed, .. }, Tag::ZkReveal) => {
                let (d, r) = wire::split_zk_context(frame.context);
                if !*committed || usize::from(d) != *dim || u32::from(r) != *round {
                    return Err((session, ProtocolError::OutOfOrder));
                }
                let pk = &self.cycles[&share.cycle].public_key;
                let reveal = wire::decode_reveal(pk, frame).map_err(|e| (session, e.into()))?;
                if !verifiers[*dim].check(&reveal) {
                    self.notes.push(format!("zk rejected session={session} dim={d} round={r}"));
                    return Err((session, ProtocolError::ZkRejected { dimension: d, round: r }));
                }
                *committed = false;
                *round += 1;
                if *round < rounds {
                    return Ok(Vec::new());
                }
                *round = 0;
                *dim += 1;
                if *dim < verifiers.len() {
                    return Ok(Vec::new());
                }
                Ok(self.accept(session, from))
            }
            _ => Err((session, ProtocolError::OutOfOrder)),
        }
    }

    fn accept(&mut self, session: u64, from: &Peer) -> Vec<Outbound> {
        let entry = self.sessions.get_mut(&session).expect("active session exists");
        let SessionState::Proving { share, sets, .. } = std::mem::replace(&mut entry.state, SessionState::Closed)
        else {
            unreachable!("called from the proving state")
        };
        let cycle = self.cycles.get_mut(&share.cycle).expect("installed");
        cycle.counters = sets;
        cycle.shares.push(share.share);
        let chain_position = cycle.shares.len() as u32;
        let cycle_id = cycle.cycle;
        self.active = None;
        self.notes.push(format!("checkin accepted session={session} cycle={cycle_id} position={chain_position}"));
        let mut out = vec![Outbound::now(
            from.clone(),
            Message::CheckInResult { session, cycle: cycle_id, accepted: true, chain_position }.encode(),
        )];
        if chain_position as usize == self.params.k {
            let publication = self.pub_stats(cycle_id);
            out.push(Outbound::now(Peer::Provider, Message::Publish(publication).encode()));
        }
        out.extend(self.pump());
        out
    }

    /// PubStats: reconstructs `p` from the cycle's shares, decrypts every
    /// counter set and closes the cycle. With fewer than `k` shares nothing
    /// is decrypted.
    pub fn pub_stats(&mut self, cycle_id: u64) -> Publication {
        let outcome = match self.cycles.get(&cycle_id) {
            None => PubOutcome::Aborted { shares: 0, needed: self.params.k },
            Some(cycle) if cycle.shares.len() < self.params.k => {
                PubOutcome::Aborted { shares: cycle.shares.len(), needed: self.params.k }
            }
            Some(cycle) => self.decrypt_cycle(cycle),
        };
        self.closed.insert(cycle_id);
        let publication = Publication { venue_id: self.id, cycle: cycle_id, outcome };
        self.notes.push(publication.lines().join("; "));
        self.publications.push(publication.clone());
        publication
    }

    fn decrypt_cycle(&self, cycle: &VenueCycle) -> PubOutcome {
        let pk = &cycle.public_key;
        let p = match shamir::reconstruct(&cycle.shares, &self.params.share_params()) {
            Ok(p) => p,
            Err(e) => return PubOutcome::IntegrityAlarm(e.to_string()),
        };
        let n = pk.modulus();
        if p.is_zero() || p.is_one() || &p >= n || !(n % &p).is_zero() {
            return PubOutcome::IntegrityAlarm("reconstructed factor does not divide the modulus".into());
        }
        let q = n / &p;
        if &(&p * &q) != n {
            return PubOutcome::IntegrityAlarm("p * (n / p) != n".into());
        }
        let pair = match key_from_parts(p, q, pk.generator().clone(), pk.block_size()) {
            Ok(pair) => pair,
            Err(e) => return PubOutcome::IntegrityAlarm(e.to_string()),
        };
        let mut dims = Vec::with_capacity(cycle.counters.len());
        for (spec, set) in self.dims.iter().zip(&cycle.counters) {
            match decrypt_histogram(&pair.secret, set) {
                Ok(counts) => dims.push(DimensionHistogram {
                    name: spec.name.clone(),
                    labels: (1..=spec.sub_ranges()).map(|j| spec.label(SubRange(j))).collect(),
                    counts,
                }),
                Err(e) => return PubOutcome::IntegrityAlarm(e.to_string()),
            }
        }
        PubOutcome::Published(dims)
    }

    /// End of run: every open cycle runs PubStats (and aborts unless full).
    pub fn close_open_cycles(&mut self) -> Vec<Publication> {
        let open: Vec<u64> = self.open_cycles().map(|c| c.cycle).collect();
        open.into_iter().map(|c| self.pub_stats(c)).collect()
    }
}

// -------------------------------------------------------------------- user

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Behavior {
    Honest,
    Cheat(CheatStrategy),
    /// Presents a share whose value was altered after signing.
    ForgeShare,
    /// Redeems its presence token twice.
    ReplayToken,
    /// Asks for a second pseudonym and re-runs Spoter with a spent one.
    SybilCheckIn,
}

/// Plaintext effect of an accepted check-in on one dimension, recorded by
/// the user for the simulator's oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Effect {
    Add(usize),
    Set(usize, u64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckInOutcome {
    pub venue_id: u64,
    pub cycle: Option<u64>,
    pub accepted: bool,
    pub chain_position: Option<u32>,
    /// Per dimension, the changes this user's counter update made.
    pub effects: Vec<Vec<Effect>>,
    pub rejection: Option<Rejection>,
    pub got_share: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserConfig {
    pub id: String,
    pub venue_id: u64,
    pub profile: BTreeMap<String, ProfileValue>,
    pub behavior: Behavior,
    pub epoch: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Idle,
    AwaitPseudonym,
    AwaitChallenge,
    AwaitToken,
    AwaitShare,
    AwaitCounters,
    Proving,
    AwaitResult,
    Done,
}

/// A client device. Honest unless configured with an adversarial
/// [`Behavior`].
pub struct User {
    config: UserConfig,
    params: ProtocolParams,
    dims: Vec<DimensionSpec>,
    pseudonym_key: VerifyingKey,
    rng: ChaCha20Rng,
    phase: Phase,
    request: Option<PseudonymRequest>,
    pseudonym: Option<Pseudonym>,
    session: Option<u64>,
    share: Option<SignedShare>,
    public_key: Option<BenalohPublicKey>,
    cycle: Option<u64>,
    provers: Vec<Box<dyn Prover>>,
    effects: Vec<Vec<Effect>>,
    dim: usize,
    round: u32,
    outcomes: Vec<CheckInOutcome>,
    rejections: Vec<Rejection>,
    attempts: u32,
    notes: Vec<String>,
}

impl fmt::Debug for User {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("User").field("id", &self.config.id).field("phase", &self.phase).finish_non_exhaustive()
    }
}

impl User {
    pub fn new(
        config: UserConfig,
        params: ProtocolParams,
        dims: Vec<DimensionSpec>,
        pseudonym_key: VerifyingKey,
        seed: [u8; 32],
    ) -> Self {
        Self {
            config,
            params,
            dims,
            pseudonym_key,
            rng: seeded(seed),
            phase: Phase::Idle,
            request: None,
            pseudonym: None,
            session: None,
            share: None,
            public_key: None,
            cycle: None,
            provers: Vec::new(),
            effects: Vec::new(),
            dim: 0,
            round: 0,
            outcomes: Vec::new(),
            rejections: Vec::new(),
            attempts: 0,
            notes: Vec::new(),
        }
    }

    pub fn id(&self) -> &str {
        &self.config.id
    }

    pub fn config(&self) -> &UserConfig {
        &self.config
    }

    pub fn outcomes(&self) -> &[CheckInOutcome] {
        &self.outcomes
    }

    pub fn rejections(&self) -> &[Rejection] {
        &self.rejections
    }

    pub fn is_done(&self) -> bool {
        self.phase == Phase::Done
    }

    pub fn phase(&self) -> &'static str {
        match self.phase {
            Phase::Idle => "idle",
            Phase::AwaitPseudonym => "await-pseudonym",
            Phase::AwaitChallenge => "await-challenge",
            Phase::AwaitToken => "await-token",
            Phase::AwaitShare => "await-share",
            Phase::AwaitCounters => "await-counters",
            Phase::Proving => "proving",
            Phase::AwaitResult => "await-result",
            Phase::Done => "done",
        }
    }

    /// The label this user's anonymous local link carries.
    pub fn link_label(&self) -> Option<String> {
        self.pseudonym.as_ref().map(Pseudonym::label)
    }

    pub fn pseudonym(&self) -> Option<&Pseudonym> {
        self.pseudonym.as_ref()
    }

    /// Key shares currently held (at most one, for the session in flight).
    pub fn held_shares(&self) -> usize {
        usize::from(self.share.is_some())
    }

    pub fn drain_notes(&mut self) -> Vec<String> {
        std::mem::take(&mut self.notes)
    }

    pub fn start(&mut self) -> Vec<Outbound> {
        let request = PseudonymRequest::new(&self.pseudonym_key, self.config.epoch, &mut self.rng);
        let frame = Message::PseudonymRequest { epoch: request.epoch, blinded: request.blinded.0.clone() }.encode();
        self.request = Some(request);
        self.phase = Phase::AwaitPseudonym;
        vec![Outbound::now(Peer::Provider, frame)]
    }

    fn hello(&mut self) -> Vec<Outbound> {
        let pseudonym = self.pseudonym.clone().expect("hello after issuance");
        self.phase = Phase::AwaitChallenge;
        self.attempts += 1;
        vec![Outbound::now(Peer::Venue(self.config.venue_id), Message::SpoterHello { pseudonym }.encode())]
    }

    fn finish(&mut self, accepted: bool, chain_position: Option<u32>, rejection: Option<Rejection>) -> Vec<Outbound> {
        self.outcomes.push(CheckInOutcome {
            venue_id: self.config.venue_id,
            cycle: self.cycle,
            accepted,
            chain_position,
            effects: std::mem::take(&mut self.effects),
            rejection,
            got_share: self.share.is_some(),
        });
        self.share = None;
        self.provers.clear();
        self.session = None;
        self.cycle = None;
        if self.config.behavior == Behavior::SybilCheckIn && self.attempts < 2 {
            self.notes.push("re-running spoter with the same pseudonym".into());
            return self.hello();
        }
        self.phase = Phase::Done;
        Vec::new()
    }

    pub fn handle(&mut self, from: &Peer, frame: &Frame, _now: u64) -> Vec<Outbound> {
        match frame.tag {
            Tag::ZkChallenge => return self.on_challenge(frame),
            Tag::Reject => {
                let Ok(Message::Reject(rejection)) = Message::decode(frame) else { return Vec::new() };
                return self.on_reject(rejection);
            }
            _ => {}
        }
        let Ok(message) = Message::decode(frame) else {
            self.notes.push(format!("undecodable frame from {from}"));
            return Vec::new();
        };
        match (self.phase, message) {
            (Phase::AwaitPseudonym, Message::PseudonymGrant { epoch, signature }) => {
                let request = self.request.take().expect("request pending");
                match request.finish(&self.pseudonym_key, &BlindSignature(signature)) {
                    Ok(p) if p.epoch == epoch && p.verify(&self.pseudonym_key) => {
                        self.pseudonym = Some(p);
                        let mut out = Vec::new();
                        if self.config.behavior == Behavior::SybilCheckIn {
                            let extra = PseudonymRequest::new(&self.pseudonym_key, epoch, &mut self.rng);
                            out.push(Outbound::now(
                                Peer::Provider,
                                Message::PseudonymRequest { epoch, blinded: extra.blinded.0 }.encode(),
                            ));
                        }
                        out.extend(self.hello());
                        out
                    }
                    _ => {
                        self.notes.push("pseudonym grant failed to verify".into());
                        self.phase = Phase::Done;
                        Vec::new()
                    }
                }
            }
            (Phase::AwaitChallenge, Message::SpoterChallenge(challenge)) => {
                self.session = Some(challenge.session);
                self.phase = Phase::AwaitToken;
                let digest = spoter_digest(&challenge);
                vec![Outbound {
                    to: Peer::Venue(self.config.venue_id),
                    frame: Message::SpoterResponse { session: challenge.session, digest }.encode(),
                    delay_us: self.params.device_hash_us,
                }]
            }
            (Phase::AwaitToken, Message::Token { session, token }) if Some(session) == self.session => {
                self.phase = Phase::AwaitShare;
                let frame = Message::TokenRedeem { token }.encode();
                let mut out = vec![Outbound::now(Peer::Mix, frame.clone())];
                if self.config.behavior == Behavior::ReplayToken {
                    out.push(Outbound::now(Peer::Mix, frame));
                }
                out
            }
            (Phase::AwaitShare, Message::Share { share }) => {
                let session = self.session.expect("session open");
                let mut presented = share.clone();
                if self.config.behavior == Behavior::ForgeShare {
                    presented.share.value += 1u32;
                }
                self.share = Some(share);
                self.phase = Phase::AwaitCounters;
                vec![Outbound::now(
                    Peer::Venue(self.config.venue_id),
                    Message::CheckInRequest { session, share: presented }.encode(),
                )]
            }
            (Phase::AwaitCounters, Message::Counters { session, cycle, public_key, sets })
                if Some(session) == self.session =>
            {
                self.cycle = Some(cycle);
                match self.prepare(&public_key, sets) {
                    Ok(out) => out,
                    Err(e) => {
                        self.notes.push(format!("cannot build update: {e}"));
                        self.finish(false, None, None)
                    }
                }
            }
            (Phase::AwaitResult | Phase::Proving, Message::CheckInResult { session, cycle, accepted, chain_position })
                if Some(session) == self.session =>
            {
                self.cycle = Some(cycle);
                self.finish(accepted, Some(chain_position), None)
            }
            (phase, message) => {
                self.notes.push(format!("ignored {:?} in phase {phase:?}", message.tag()));
                Vec::new()
            }
        }
    }

    fn on_reject(&mut self, rejection: Rejection) -> Vec<Outbound> {
        self.notes.push(format!("rejected: {} ({})", rejection.kind(), rejection.detail));
        self.rejections.push(rejection.clone());
        let expected_noise = matches!(
            (self.config.behavior, rejection.code),
            (Behavior::ReplayToken, 6) | (Behavior::SybilCheckIn, 14)
        );
        if expected_noise || self.phase == Phase::Done {
            return Vec::new();
        }
        self.finish(false, None, Some(rejection))
    }

    /// Classifies the profile, builds the updated counter sets and the
    /// provers, and sends the sets with the first commitment.
    fn prepare(&mut self, pk: &BenalohPublicKey, sets: Vec<CounterSet>) -> Result<Vec<Outbound>, ProtocolError> {
        if sets.len() != self.dims.len() {
            return Err(ProtocolError::BadCounters("dimension count".into()));
        }
        let session = self.session.expect("session open");
        let mut next_sets = Vec::with_capacity(sets.len());
        self.provers.clear();
        self.effects.clear();
        for (d, (spec, prev)) in self.dims.iter().zip(sets).enumerate() {
            let value = self
                .config
                .profile
                .get(&spec.name)
                .ok_or_else(|| ProtocolError::Parameter(format!("profile lacks dimension {}", spec.name)))?;
            let j = spec.classify(value).map_err(|e| ProtocolError::Parameter(e.to_string()))?;
            let cheat = match self.config.behavior {
                Behavior::Cheat(strategy) if d == 0 => Some(strategy),
                _ => None,
            };
            match cheat {
                None => {
                    let (next, witness) = reencrypt_and_increment(pk, &prev, j, &mut self.rng)
                        .map_err(|e| ProtocolError::BadCounters(e.to_string()))?;
                    let statement = Statement::new(pk.clone(), prev, next.clone(), false)
                        .map_err(|e| ProtocolError::BadCounters(e.to_string()))?;
                    let prover =
                        HonestProver::new(statement, witness).map_err(|e| ProtocolError::BadCounters(e.to_string()))?;
                    self.provers.push(Box::new(prover));
                    self.effects.push(vec![Effect::Add(j.position())]);
                    next_sets.push(next);
                }
                Some(strategy) => {
                    let forged = forge_update(pk, &prev, strategy, j.position(), None, &mut self.rng);
                    let mut effects: Vec<Effect> = forged
                        .increments
                        .iter()
                        .enumerate()
                        .flat_map(|(l, &times)| std::iter::repeat(Effect::Add(l)).take(times as usize))
                        .collect();
                    if let Some((victim, value)) = forged.overwrite {
                        effects.push(Effect::Set(victim, value));
                    }
                    self.effects.push(effects);
                    next_sets.push(forged.next.clone());
                    self.provers.push(Box::new(CheatingProver::new(pk.clone(), prev, forged, false)));
                }
            }
        }
        self.public_key = Some(pk.clone());
        self.dim = 0;
        self.round = 0;
        self.phase = Phase::Proving;
        let mut out = vec![Outbound::now(Peer::Venue(self.config.venue_id), encode_submit(pk, session, &next_sets))];
        out.push(self.commit_frame()?);
        Ok(out)
    }

    fn commit_frame(&mut self) -> Result<Outbound, ProtocolError> {
        let pk = self.public_key.as_ref().expect("proving");
        let commitment = self.provers[self.dim]
            .commit(&mut self.rng)
            .map_err(|e| ProtocolError::BadCounters(e.to_string()))?;
        let frame = wire::encode_commit(pk, self.dim as u16, self.round as u16, false, &commitment);
        Ok(Outbound::now(Peer::Venue(self.config.venue_id), frame))
    }

    fn on_challenge(&mut self, frame: &Frame) -> Vec<Outbound> {
        if self.phase != Phase::Proving {
            return Vec::new();
        }
        let (d, r) = wire::split_zk_context(frame.context);
        let Ok(challenge) = wire::decode_challenge(frame) else { return Vec::new() };
        if usize::from(d) != self.dim || u32::from(r) != self.round {
            return Vec::new();
        }
        let pk = self.public_key.clone().expect("proving");
        let reveal = match self.provers[self.dim].respond(challenge) {
            Ok(reveal) => reveal,
            Err(e) => {
                self.notes.push(format!("prover error: {e}"));
                return self.finish(false, None, None);
            }
        };
        let mut out = vec![Outbound::now(
            Peer::Venue(self.config.venue_id),
            wire::encode_reveal(&pk, d, r, false, &reveal),
        )];
        self.round += 1;
        if self.round == self.params.rounds {
            self.round = 0;
            self.dim += 1;
        }
        if self.dim < self.provers.len() {
            match self.commit_frame() {
                Ok(o) => out.push(o),
                Err(e) => self.notes.push(format!("prover error: {e}")),
            }
        } else {
            self.phase = Phase::AwaitResult;
        }
        out
    }
}
