//! Deterministic discrete-event simulation of a venue deployment.
//!
//! Actors (provider, venues, users, mix) exchange encoded frames over
//! latency-modeled channels in simulated microseconds. Events are ordered by
//! `(time, insertion sequence)` and every actor draws from its own seeded
//! RNG, so a scenario and seed always produce the same trace bytes.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::lcp::{DimensionSpec, ProfileValue};
use crate::protocol::{
    Behavior, CheckInOutcome, Effect, Outbound, Peer, ProtocolError, ProtocolParams, Provider, PubOutcome,
    Publication, SpoterTiming, User, UserConfig, Venue,
};
use crate::safety::user_label_from_blocks;
use crate::wire::Frame;
use crate::zk::CheatStrategy;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

fn default_rounds() -> u32 {
    crate::zk::DEFAULT_ROUNDS
}
fn default_modulus_bits() -> u64 {
    512
}
fn default_rsa_bits() -> u64 {
    crate::credentials::DEFAULT_RSA_BITS
}
fn default_delta_ms() -> f64 {
    10.0
}
fn default_epoch_ms() -> f64 {
    3_600_000.0
}
fn default_mix_window_ms() -> f64 {
    50.0
}
fn default_token_ttl_ms() -> f64 {
    60_000.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub k: usize,
    #[serde(default = "default_rounds")]
    pub s: u32,
    /// Benaloh block size; derived from `k` and the dimensions when absent.
    #[serde(default)]
    pub r: Option<u64>,
    #[serde(default = "default_modulus_bits")]
    pub modulus_bits: u64,
    #[serde(default = "default_rsa_bits")]
    pub rsa_bits: u64,
    #[serde(default = "default_delta_ms")]
    pub delta_ms: f64,
    #[serde(default = "default_epoch_ms")]
    pub epoch_ms: f64,
    #[serde(default = "default_mix_window_ms")]
    pub mix_window_ms: f64,
    #[serde(default = "default_token_ttl_ms")]
    pub token_ttl_ms: f64,
}

impl ScenarioParams {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            s: default_rounds(),
            r: None,
            modulus_bits: default_modulus_bits(),
            rsa_bits: default_rsa_bits(),
            delta_ms: default_delta_ms(),
            epoch_ms: default_epoch_ms(),
            mix_window_ms: default_mix_window_ms(),
            token_ttl_ms: default_token_ttl_ms(),
        }
    }
}

/// One-way latency in milliseconds: a bare number, `{"fixed": x}` or
/// `{"uniform": [lo, hi]}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Latency {
    Ms(f64),
    Dist(LatencyDist),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatencyDist {
    Fixed(f64),
    Uniform([f64; 2]),
}

impl Latency {
    pub fn fixed(ms: f64) -> Self {
        Latency::Dist(LatencyDist::Fixed(ms))
    }

    fn validate(&self) -> Result<(), SimError> {
        let ok = match self {
            Latency::Ms(v) | Latency::Dist(LatencyDist::Fixed(v)) => v.is_finite() && *v >= 0.0,
            Latency::Dist(LatencyDist::Uniform([lo, hi])) => lo.is_finite() && hi.is_finite() && *lo >= 0.0 && lo <= hi,
        };
        if ok {
            Ok(())
        } else {
            Err(SimError::Invalid(format!("bad latency {self:?}")))
        }
    }

    fn sample_us(&self, rng: &mut ChaCha20Rng) -> u64 {
        match *self {
            Latency::Ms(v) | Latency::Dist(LatencyDist::Fixed(v)) => ms_to_us(v),
            Latency::Dist(LatencyDist::Uniform([lo, hi])) => {
                let (lo, hi) = (ms_to_us(lo), ms_to_us(hi));
                if lo == hi {
                    lo
                } else {
                    rng.gen_range(lo..=hi)
                }
            }
        }
    }
}

pub fn ms_to_us(ms: f64) -> u64 {
    (ms * 1000.0).round().max(0.0) as u64
}

fn default_local() -> Latency {
    Latency::fixed(1.5)
}
fn default_backbone() -> Latency {
    Latency::fixed(10.0)
}
fn default_wired() -> f64 {
    19.0
}
fn default_device_hash() -> f64 {
    0.6
}
fn default_venue_hash() -> f64 {
    0.003
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    /// User device to venue device, one way (ad hoc Wi-Fi).
    #[serde(default = "default_local")]
    pub local: Latency,
    /// Every wide-area hop: user, venue, mix and provider.
    #[serde(default = "default_backbone")]
    pub backbone: Latency,
    /// Extra one-way latency between two colluding wormhole endpoints.
    #[serde(default = "default_wired")]
    pub wired_one_way_ms: f64,
    #[serde(default = "default_device_hash")]
    pub device_hash_ms: f64,
    #[serde(default = "default_venue_hash")]
    pub venue_hash_ms: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            local: default_local(),
            backbone: default_backbone(),
            wired_one_way_ms: default_wired(),
            device_hash_ms: default_device_hash(),
            venue_hash_ms: default_venue_hash(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VenueSpec {
    pub id: u64,
}

/// A profile value, or a safety label given as visited blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileInput {
    Value(ProfileValue),
    Blocks { blocks: Vec<f64>, frequencies: Vec<f64> },
}

impl ProfileInput {
    pub fn resolve(&self) -> Result<ProfileValue, SimError> {
        match self {
            ProfileInput::Value(v) => Ok(v.clone()),
            ProfileInput::Blocks { blocks, frequencies } => user_label_from_blocks(blocks, frequencies)
                .map(ProfileValue::Number)
                .map_err(|e| SimError::Invalid(e.to_string())),
        }
    }
}

/// Either one value (for single-dimension venues) or one per dimension name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileSpec {
    Single(ProfileInput),
    PerDimension(BTreeMap<String, ProfileInput>),
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserSpec {
    pub id: String,
    pub venue: u64,
    #[serde(default)]
    pub arrive_ms: f64,
    pub profile: ProfileSpec,
    /// Seeds the device RNG independently of the user's name.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub epoch: Option<u64>,
    /// Whether the device can reach the venue's Spotr device at all.
    #[serde(default = "default_true")]
    pub local_link: bool,
}

impl UserSpec {
    pub fn new(id: impl Into<String>, venue: u64, value: ProfileValue) -> Self {
        Self {
            id: id.into(),
            venue,
            arrive_ms: 0.0,
            profile: ProfileSpec::Single(ProfileInput::Value(value)),
            seed: None,
            epoch: None,
            local_link: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Actors {
    pub venues: Vec<VenueSpec>,
    pub users: Vec<UserSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversaryBehavior {
    DoubleIncrement,
    CorruptCounter,
    ForgeShare,
    ReplayToken,
    WormholeRelay,
    SybilCheckin,
}

impl AdversaryBehavior {
    pub const ALL: [AdversaryBehavior; 6] = [
        AdversaryBehavior::DoubleIncrement,
        AdversaryBehavior::CorruptCounter,
        AdversaryBehavior::ForgeShare,
        AdversaryBehavior::ReplayToken,
        AdversaryBehavior::WormholeRelay,
        AdversaryBehavior::SybilCheckin,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AdversaryBehavior::DoubleIncrement => "double_increment",
            AdversaryBehavior::CorruptCounter => "corrupt_counter",
            AdversaryBehavior::ForgeShare => "forge_share",
            AdversaryBehavior::ReplayToken => "replay_token",
            AdversaryBehavior::WormholeRelay => "wormhole_relay",
            AdversaryBehavior::SybilCheckin => "sybil_checkin",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversaryConfig {
    pub actor: String,
    pub behavior: AdversaryBehavior,
    #[serde(default)]
    pub params: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub params: ScenarioParams,
    pub dimensions: Vec<DimensionSpec>,
    #[serde(default)]
    pub channels: ChannelConfig,
    pub actors: Actors,
    #[serde(default)]
    pub adversaries: Vec<AdversaryConfig>,
}

impl Scenario {
    pub fn new(name: impl Into<String>, params: ScenarioParams, dimensions: Vec<DimensionSpec>) -> Self {
        Self {
            name: name.into(),
            params,
            dimensions,
            channels: ChannelConfig::default(),
            actors: Actors::default(),
            adversaries: Vec::new(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let scenario: Scenario = serde_json::from_str(text).map_err(|e| SimError::Parse(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn protocol_params(&self) -> ProtocolParams {
        let p = &self.params;
        let mut params = ProtocolParams::new(p.k, &self.dimensions);
        if let Some(r) = p.r {
            params.block_size = r;
        }
        params.rounds = p.s;
        params.modulus_bits = p.modulus_bits;
        params.rsa_bits = p.rsa_bits;
        params.delta_us = ms_to_us(p.delta_ms);
        params.epoch_us = ms_to_us(p.epoch_ms).max(1);
        params.token_ttl_us = ms_to_us(p.token_ttl_ms);
        params.device_hash_us = ms_to_us(self.channels.device_hash_ms);
        params.venue_hash_us = ms_to_us(self.channels.venue_hash_ms);
        params
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.protocol_params().validate(&self.dimensions)?;
        self.channels.local.validate()?;
        self.channels.backbone.validate()?;
        for (what, v) in [
            ("delta_ms", self.params.delta_ms),
            ("mix_window_ms", self.params.mix_window_ms),
            ("wired_one_way_ms", self.channels.wired_one_way_ms),
            ("device_hash_ms", self.channels.device_hash_ms),
            ("venue_hash_ms", self.channels.venue_hash_ms),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(SimError::Invalid(format!("{what} must be a non-negative number")));
            }
        }
        let venues: BTreeSet<u64> = self.actors.venues.iter().map(|v| v.id).collect();
        if venues.len() != self.actors.venues.len() {
            return Err(SimError::Invalid("duplicate venue id".into()));
        }
        let mut ids = BTreeSet::new();
        for user in &self.actors.users {
            if !ids.insert(user.id.as_str()) {
                return Err(SimError::Invalid(format!("duplicate user id {}", user.id)));
            }
            if !venues.contains(&user.venue) {
                return Err(SimError::Invalid(format!("user {} targets unknown venue {}", user.id, user.venue)));
            }
            if !user.arrive_ms.is_finite() || user.arrive_ms < 0.0 {
                return Err(SimError::Invalid(format!("user {} has a bad arrival time", user.id)));
            }
            self.resolve_profile(user)?;
        }
        let mut seen = BTreeSet::new();
        for adversary in &self.adversaries {
            if !ids.contains(adversary.actor.as_str()) {
                return Err(SimError::Invalid(format!("adversary targets unknown user {}", adversary.actor)));
            }
            if !seen.insert(adversary.actor.as_str()) {
                return Err(SimError::Invalid(format!("user {} has two adversary roles", adversary.actor)));
            }
        }
        Ok(())
    }

    /// The user's value for every dimension, by name.
    pub fn resolve_profile(&self, user: &UserSpec) -> Result<BTreeMap<String, ProfileValue>, SimError> {
        let mut out = BTreeMap::new();
        match &user.profile {
            ProfileSpec::Single(input) => {
                if self.dimensions.len() != 1 {
                    return Err(SimError::Invalid(format!(
                        "user {} gives one value for {} dimensions",
                        user.id,
                        self.dimensions.len()
                    )));
                }
                out.insert(self.dimensions[0].name.clone(), input.resolve()?);
            }
            ProfileSpec::PerDimension(map) => {
                for spec in &self.dimensions {
                    let input = map
                        .get(&spec.name)
                        .ok_or_else(|| SimError::Invalid(format!("user {} lacks dimension {}", user.id, spec.name)))?;
                    out.insert(spec.name.clone(), input.resolve()?);
                }
            }
        }
        for spec in &self.dimensions {
            spec.classify(&out[&spec.name]).map_err(|e| SimError::Invalid(format!("user {}: {e}", user.id)))?;
        }
        Ok(out)
    }
}

/// Turns a designated user into the cheating variant named by `config`.
pub fn inject_adversary(scenario: &mut Scenario, config: AdversaryConfig) -> Result<(), SimError> {
    if !scenario.actors.users.iter().any(|u| u.id == config.actor) {
        return Err(SimError::Invalid(format!("adversary targets unknown user {}", config.actor)));
    }
    scenario.adversaries.retain(|a| a.actor != config.actor);
    scenario.adversaries.push(config);
    Ok(())
}

/// Parses a behavior name from the closed list.
pub fn parse_behavior(name: &str) -> Result<AdversaryBehavior, SimError> {
    AdversaryBehavior::ALL
        .into_iter()
        .find(|b| b.name() == name)
        .ok_or_else(|| SimError::Invalid(format!("unknown adversary behavior {name}")))
}

/// 32-byte seed from a base seed and a role path.
pub fn derive_seed(base: u64, parts: &[&[u8]]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(b"profilr-sim-seed");
    hasher.update(base.to_be_bytes());
    for part in parts {
        hasher.update((part.len() as u32).to_be_bytes());
        hasher.update(part);
    }
    hasher.finalize().into()
}


/// A message entering the mix, tagged with its true sender.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MixEnvelope<S> {
    pub sender: S,
    pub frame: Frame,
}

/// A message leaving the mix: the sender is replaced by a fresh reply
/// handle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MixDelivery {
    pub handle: u64,
    pub frame: Frame,
}

/// One mix batch: seeded permutation, senders stripped. Returns deliveries
/// in output order and the handle table the mix keeps for replies.
pub fn mix_forward<S>(
    batch: Vec<MixEnvelope<S>>,
    first_handle: u64,
    rng: &mut ChaCha20Rng,
) -> (Vec<MixDelivery>, BTreeMap<u64, S>) {
    let mut batch = batch;
    batch.shuffle(rng);
    let mut handles = BTreeMap::new();
    let deliveries = batch
        .into_iter()
        .enumerate()
        .map(|(i, env)| {
            let handle = first_handle + i as u64;
            handles.insert(handle, env.sender);
            MixDelivery { handle, frame: env.frame }
        })
        .collect();
    (deliveries, handles)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Node {
    Provider,
    Venue(u64),
    User(usize),
    Mix,
}

#[derive(Debug, Clone)]
enum EventKind {
    Start(usize),
    Deliver { from: Node, to: Node, seen_as: Peer, reply_handle: Option<u64>, frame: Frame },
    MixFlush,
}

#[derive(Debug, Clone)]
struct QueuedEvent {
    time: u64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for QueuedEvent {
    fn eq(&self, other: &Self) -> bool {
        (self.time, self.seq) == (other.time, other.seq)
    }
}
impl Eq for QueuedEvent {}
impl PartialOrd for QueuedEvent {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for QueuedEvent {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.time, self.seq).cmp(&(other.time, other.seq))
    }
}

/// A delivered frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delivery {
    pub time: u64,
    pub from: Node,
    pub to: Node,
    /// What the receiver learns about the sender.
    pub seen_as: Peer,
    pub frame: Frame,
}

#[derive(Debug, Clone, Default)]
pub struct Trace {
    /// Line-delimited JSON records.
    pub lines: Vec<String>,
    pub deliveries: Vec<Delivery>,
}

impl Trace {
    pub fn to_jsonl(&self) -> String {
        let mut out = self.lines.join("\n");
        out.push('\n');
        out
    }

    /// Frames a user exchanged over anonymous paths (local link and mix),
    /// in delivery order, as `(time, encoded frame)`.
    pub fn anonymous_transcript(&self, user: usize) -> Vec<(u64, Vec<u8>)> {
        self.deliveries
            .iter()
            .filter(|d| match (d.from, d.to) {
                (Node::User(u), Node::Venue(_) | Node::Mix) | (Node::Venue(_) | Node::Mix, Node::User(u)) => u == user,
                _ => false,
            })
            .map(|d| (d.time, d.frame.to_bytes()))
            .collect()
    }

    /// Total encoded bytes of frames between two nodes, both directions.
    pub fn bytes_between(&self, a: Node, b: Node) -> usize {
        self.deliveries
            .iter()
            .filter(|d| (d.from, d.to) == (a, b) || (d.from, d.to) == (b, a))
            .map(|d| d.frame.payload.len() + crate::wire::HEADER_LEN)
            .sum()
    }
}

/// What the accepted check-ins of one cycle should publish.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpectedCycle {
    pub venue_id: u64,
    pub cycle: u64,
    pub accepted: usize,
    /// Present when the cycle filled up.
    pub histograms: Option<Vec<Vec<u64>>>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub scenario: String,
    pub seed: u64,
    pub trace: Trace,
    /// Every PubStats run, by venue then cycle.
    pub publications: Vec<Publication>,
    pub expected: Vec<ExpectedCycle>,
    pub users: Vec<(String, Vec<CheckInOutcome>)>,
    pub spoter_timings: BTreeMap<u64, Vec<SpoterTiming>>,
    pub diagnostics: Vec<String>,
    pub violations: Vec<String>,
    pub end_time_us: u64,
}

impl RunOutcome {
    /// Publications that disagree with the plaintext oracle.
    pub fn oracle_mismatches(&self) -> Vec<String> {
        let mut problems = Vec::new();
        let published: BTreeMap<(u64, u64), &Publication> =
            self.publications.iter().map(|p| ((p.venue_id, p.cycle), p)).collect();
        for expected in &self.expected {
            let key = (expected.venue_id, expected.cycle);
            let Some(publication) = published.get(&key) else {
                problems.push(format!("venue {} cycle {} never ran PubStats", key.0, key.1));
                continue;
            };
            match (&expected.histograms, &publication.outcome) {
                (Some(want), PubOutcome::Published(_)) => {
                    let got = publication.histograms().expect("published");
                    if &got != want {
                        problems.push(format!("venue {} cycle {}: published {got:?}, oracle {want:?}", key.0, key.1));
                    }
                }
                (None, PubOutcome::Aborted { shares, .. }) if *shares == expected.accepted => {}
                (_, outcome) => problems.push(format!(
                    "venue {} cycle {}: {outcome:?} after {} accepted check-ins",
                    key.0, key.1, expected.accepted
                )),
            }
        }
        for (key, publication) in &published {
            let known = self.expected.iter().any(|e| (e.venue_id, e.cycle) == *key);
            if !known && !matches!(publication.outcome, PubOutcome::Aborted { shares: 0, .. }) {
                problems.push(format!("venue {} cycle {} published without check-ins", key.0, key.1));
            }
        }
        problems
    }

    pub fn outcomes_of(&self, user: &str) -> &[CheckInOutcome] {
        self.users.iter().find(|(id, _)| id == user).map(|(_, o)| o.as_slice()).unwrap_or(&[])
    }

    pub fn accepted_check_ins(&self) -> usize {
        self.users.iter().flat_map(|(_, o)| o).filter(|o| o.accepted).count()
    }

    pub fn published(&self) -> impl Iterator<Item = &Publication> {
        self.publications.iter().filter(|p| matches!(p.outcome, PubOutcome::Published(_)))
    }

    pub fn publication_lines(&self) -> Vec<String> {
        self.publications.iter().flat_map(Publication::lines).collect()
    }

    /// True when the run is clean: no invariant violation, no oracle
    /// mismatch and no stuck actor.
    pub fn is_consistent(&self) -> bool {
        self.violations.is_empty() && self.diagnostics.is_empty() && self.oracle_mismatches().is_empty()
    }
}

/// Hard stop for runaway scenarios.
pub const MAX_EVENTS: u64 = 5_000_000;

struct MixState {
    rng: ChaCha20Rng,
    window_us: u64,
    pending: Vec<MixEnvelope<usize>>,
    flush_scheduled: bool,
    next_handle: u64,
    handles: BTreeMap<u64, usize>,
}

pub struct Simulation {
    params: ProtocolParams,
    dims: Vec<DimensionSpec>,
    channels: ChannelConfig,
    provider: Provider,
    venues: BTreeMap<u64, Venue>,
    users: Vec<User>,
    specs: Vec<UserSpec>,
    wormhole_us: BTreeMap<usize, u64>,
    links: BTreeMap<String, usize>,
    mix: MixState,
    jitter: ChaCha20Rng,
    queue: BinaryHeap<Reverse<QueuedEvent>>,
    seq: u64,
    now: u64,
    events: u64,
    fifo: BTreeMap<(Node, Node), u64>,
    trace: Trace,
    violations: Vec<String>,
    diagnostics: Vec<String>,
    name: String,
    seed: u64,
    started: bool,
}

impl fmt::Debug for Simulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Simulation").field("now", &self.now).field("queued", &self.queue.len()).finish_non_exhaustive()
    }
}

fn behavior_for(adversary: Option<&AdversaryConfig>) -> Behavior {
    match adversary.map(|a| a.behavior) {
        None | Some(AdversaryBehavior::WormholeRelay) => Behavior::Honest,
        Some(AdversaryBehavior::DoubleIncrement) => Behavior::Cheat(CheatStrategy::DoubleIncrement),
        Some(AdversaryBehavior::CorruptCounter) => Behavior::Cheat(CheatStrategy::CorruptCounter),
        Some(AdversaryBehavior::ForgeShare) => Behavior::ForgeShare,
        Some(AdversaryBehavior::ReplayToken) => Behavior::ReplayToken,
        Some(AdversaryBehavior::SybilCheckin) => Behavior::SybilCheckIn,
    }
}

impl Simulation {
    pub fn new(scenario: &Scenario, seed: u64) -> Result<Self, SimError> {
        scenario.validate()?;
        let params = scenario.protocol_params();
        let dims = scenario.dimensions.clone();
        let provider = Provider::new(params.clone(), derive_seed(seed, &[b"provider"]))?;
        let mut venues = BTreeMap::new();
        for spec in &scenario.actors.venues {
            let venue = Venue::new(
                spec.id,
                params.clone(),
                dims.clone(),
                provider.share_key().clone(),
                provider.pseudonym_key().clone(),
                derive_seed(seed, &[b"venue", &spec.id.to_be_bytes()]),
            )?;
            venues.insert(spec.id, venue);
        }
        let mut users = Vec::new();
        let mut wormhole_us = BTreeMap::new();
        for (i, spec) in scenario.actors.users.iter().enumerate() {
            let adversary = scenario.adversaries.iter().find(|a| a.actor == spec.id);
            if let Some(a) = adversary.filter(|a| a.behavior == AdversaryBehavior::WormholeRelay) {
                let ms = a.params.get("wired_one_way_ms").and_then(|v| v.as_f64()).unwrap_or(scenario.channels.wired_one_way_ms);
                wormhole_us.insert(i, ms_to_us(ms));
            }
            let user_seed = match spec.seed {
                Some(s) => derive_seed(s, &[b"user"]),
                None => derive_seed(seed, &[b"user", &(i as u64).to_be_bytes()]),
            };
            let arrive = ms_to_us(spec.arrive_ms);
            let config = UserConfig {
                id: spec.id.clone(),
                venue_id: spec.venue,
                profile: scenario.resolve_profile(spec)?,
                behavior: behavior_for(adversary),
                epoch: spec.epoch.unwrap_or_else(|| params.epoch_at(arrive)),
            };
            users.push(User::new(config, params.clone(), dims.clone(), provider.pseudonym_key().clone(), user_seed));
        }
        Ok(Self {
            mix: MixState {
                rng: ChaCha20Rng::from_seed(derive_seed(seed, &[b"mix"])),
                window_us: ms_to_us(scenario.params.mix_window_ms),
                pending: Vec::new(),
                flush_scheduled: false,
                next_handle: 1,
                handles: BTreeMap::new(),
            },
            jitter: ChaCha20Rng::from_seed(derive_seed(seed, &[b"jitter"])),
            params,
            dims,
            channels: scenario.channels.clone(),
            provider,
            venues,
            users,
            specs: scenario.actors.users.clone(),
            wormhole_us,
            links: BTreeMap::new(),
            queue: BinaryHeap::new(),
            seq: 0,
            now: 0,
            events: 0,
            fifo: BTreeMap::new(),
            trace: Trace::default(),
            violations: Vec::new(),
            diagnostics: Vec::new(),
            name: scenario.name.clone(),
            seed,
            started: false,
        })
    }

    pub fn provider(&self) -> &Provider {
        &self.provider
    }

    pub fn venue(&self, id: u64) -> Option<&Venue> {
        self.venues.get(&id)
    }

    pub fn user(&self, index: usize) -> Option<&User> {
        self.users.get(index)
    }

    pub fn now_us(&self) -> u64 {
        self.now
    }

    fn push(&mut self, time: u64, kind: EventKind) {
        self.seq += 1;
        self.queue.push(Reverse(QueuedEvent { time, seq: self.seq, kind }));
    }

    fn node_name(&self, node: Node) -> String {
        match node {
            Node::Provider => "provider".into(),
            Node::Venue(id) => format!("venue:{id}"),
            Node::User(i) => format!("user:{}", self.specs[i].id),
            Node::Mix => "mix".into(),
        }
    }

    fn note(&mut self, actor: Node, note: String) {
        let actor = self.node_name(actor);
        self.trace.lines.push(json!({"t": self.now, "ev": "note", "actor": actor, "note": note}).to_string());
    }

    /// Queues a frame on the `from -> to` link, keeping each link FIFO.
    #[allow(clippy::too_many_arguments)]
    fn route(&mut self, from: Node, to: Node, seen_as: Peer, latency: Latency, extra_us: u64, delay_us: u64, reply_handle: Option<u64>, frame: Frame) {
        let lat = latency.sample_us(&mut self.jitter) + extra_us;
        let last = self.fifo.entry((from, to)).or_insert(0);
        let at = (self.now + delay_us + lat).max(*last);
        *last = at;
        self.push(at, EventKind::Deliver { from, to, seen_as, reply_handle, frame });
    }

    fn send(&mut self, from: Node, out: Outbound) {
        let backbone = self.channels.backbone;
        let local = self.channels.local;
        let Outbound { to, frame, delay_us } = out;
        match (from, to) {
            (Node::User(i), Peer::Provider) => {
                let seen = Peer::User(self.specs[i].id.clone());
                self.route(from, Node::Provider, seen, backbone, 0, delay_us, None, frame);
            }
            (Node::User(i), Peer::Venue(v)) => {
                if !self.specs[i].local_link {
                    self.note(from, format!("no local link to venue:{v}, frame dropped"));
                    return;
                }
                let Some(label) = self.users[i].link_label() else {
                    self.note(from, "no pseudonym for the local link".into());
                    return;
                };
                self.links.insert(label.clone(), i);
                let extra = self.wormhole_us.get(&i).copied().unwrap_or(0);
                self.route(from, Node::Venue(v), Peer::Link(label), local, extra, delay_us, None, frame);
            }
            (Node::User(i), Peer::Mix) => {
                let seen = Peer::User(self.specs[i].id.clone());
                self.route(from, Node::Mix, seen, backbone, 0, delay_us, None, frame);
            }
            (Node::Provider, Peer::User(id)) => match self.specs.iter().position(|s| s.id == id) {
                Some(i) => self.route(from, Node::User(i), Peer::Provider, backbone, 0, delay_us, None, frame),
                None => self.note(from, format!("no such user {id}")),
            },
            (Node::Provider, Peer::Handle(h)) => {
                self.route(from, Node::Mix, Peer::Provider, backbone, 0, delay_us, Some(h), frame);
            }
            (Node::Provider, Peer::Venue(v)) => {
                self.route(from, Node::Venue(v), Peer::Provider, backbone, 0, delay_us, None, frame);
            }
            (Node::Venue(v), Peer::Link(label)) => match self.links.get(&label).copied() {
                Some(i) => {
                    let extra = self.wormhole_us.get(&i).copied().unwrap_or(0);
                    self.route(from, Node::User(i), Peer::Venue(v), local, extra, delay_us, None, frame);
                }
                None => self.note(from, format!("no local link {label}")),
            },
            (Node::Venue(v), Peer::Provider) => {
                self.route(from, Node::Provider, Peer::Venue(v), backbone, 0, delay_us, None, frame);
            }
            (from, to) => self.note(from, format!("unroutable frame to {to}")),
        }
    }

    fn start(&mut self) -> Result<(), SimError> {
        if self.started {
            return Ok(());
        }
        self.started = true;
        let ids: Vec<u64> = self.venues.keys().copied().collect();
        for id in ids {
            let key = self.venues[&id].token_key().clone();
            let out = self.provider.register_venue(id, key)?;
            self.send(Node::Provider, out);
        }
        for i in 0..self.specs.len() {
            let at = ms_to_us(self.specs[i].arrive_ms);
            self.push(at, EventKind::Start(i));
        }
        self.drain_notes(Node::Provider);
        Ok(())
    }

    fn drain_notes(&mut self, node: Node) {
        let notes = match node {
            Node::Provider => self.provider.drain_notes(),
            Node::Venue(id) => self.venues.get_mut(&id).map(Venue::drain_notes).unwrap_or_default(),
            Node::User(i) => self.users[i].drain_notes(),
            Node::Mix => Vec::new(),
        };
        for note in notes {
            self.note(node, note);
        }
    }

    fn dispatch(&mut self, kind: EventKind) {
        match kind {
            EventKind::Start(i) => {
                let outs = self.users[i].start();
                for out in outs {
                    self.send(Node::User(i), out);
                }
            }
            EventKind::MixFlush => {
                self.mix.flush_scheduled = false;
                let batch = std::mem::take(&mut self.mix.pending);
                let size = batch.len() as u64;
                let (deliveries, handles) = mix_forward(batch, self.mix.next_handle, &mut self.mix.rng);
                self.mix.next_handle += size;
                self.mix.handles.extend(handles);
                self.trace.lines.push(json!({"t": self.now, "ev": "mix_flush", "batch": size}).to_string());
                for d in deliveries {
                    let backbone = self.channels.backbone;
                    self.route(Node::Mix, Node::Provider, Peer::Handle(d.handle), backbone, 0, 0, None, d.frame);
                }
            }
            EventKind::Deliver { from, to, seen_as, reply_handle, frame } => {
                self.trace.lines.push(
                    json!({
                        "t": self.now,
                        "ev": "deliver",
                        "from": self.node_name(from),
                        "to": self.node_name(to),
                        "seen_as": seen_as.to_string(),
                        "tag": format!("{:?}", frame.tag),
                        "context": frame.context,
                        "bytes": frame.len(),
                    })
                    .to_string(),
                );
                self.trace.deliveries.push(Delivery { time: self.now, from, to, seen_as: seen_as.clone(), frame: frame.clone() });
                let now = self.now;
                let outs = match to {
                    Node::Provider => self.provider.handle(&seen_as, &frame, now),
                    Node::Venue(id) => match self.venues.get_mut(&id) {
                        Some(venue) => venue.handle(&seen_as, &frame, now),
                        None => Vec::new(),
                    },
                    Node::User(i) => self.users[i].handle(&seen_as, &frame, now),
                    Node::Mix => {
                        match (from, reply_handle) {
                            (Node::User(i), _) => {
                                self.mix.pending.push(MixEnvelope { sender: i, frame });
                                if !self.mix.flush_scheduled {
                                    self.mix.flush_scheduled = true;
                                    self.push(now + self.mix.window_us, EventKind::MixFlush);
                                }
                            }
                            (_, Some(h)) => match self.mix.handles.remove(&h) {
                                Some(i) => {
                                    let backbone = self.channels.backbone;
                                    self.route(Node::Mix, Node::User(i), Peer::Mix, backbone, 0, 0, None, frame);
                                }
                                None => self.note(Node::Mix, format!("unknown reply handle {h}")),
                            },
                            _ => self.note(Node::Mix, "frame without a reply handle".into()),
                        }
                        Vec::new()
                    }
                };
                for out in outs {
                    self.send(to, out);
                }
                self.drain_notes(to);
            }
        }
    }

    fn check_invariants(&mut self) {
        let k = self.params.k;
        let mut found = Vec::new();
        for (id, venue) in &self.venues {
            for cycle in venue.open_cycles() {
                if cycle.shares.len() >= k {
                    found.push(format!("venue {id} holds {} shares of open cycle {}", cycle.shares.len(), cycle.cycle));
                }
            }
        }
        for user in &self.users {
            if user.held_shares() > 1 {
                found.push(format!("user {} holds {} shares", user.id(), user.held_shares()));
            }
        }
        if self.provider.live_cycles() != self.venues.len() {
            found.push(format!("provider holds {} live cycles for {} venues", self.provider.live_cycles(), self.venues.len()));
        }
        for v in found {
            self.violations.push(format!("t={} {v}", self.now));
        }
    }

    /// Processes a single event. Returns false once the queue is empty.
    pub fn step(&mut self) -> Result<bool, SimError> {
        self.start()?;
        let Some(Reverse(event)) = self.queue.pop() else { return Ok(false) };
        self.now = event.time;
        self.events += 1;
        self.dispatch(event.kind);
        self.check_invariants();
        Ok(true)
    }

    /// Runs to quiescence, closes every open cycle and compares the
    /// publications with the plaintext oracle.
    pub fn run(&mut self) -> Result<RunOutcome, SimError> {
        while self.step()? {
            if self.events >= MAX_EVENTS {
                self.diagnostics.push(format!("event limit {MAX_EVENTS} reached at t={}", self.now));
                break;
            }
        }
        let ids: Vec<u64> = self.venues.keys().copied().collect();
        for id in &ids {
            let venue = self.venues.get_mut(id).expect("listed");
            venue.close_open_cycles();
            self.drain_notes(Node::Venue(*id));
        }
        for (i, user) in self.users.iter().enumerate() {
            if !user.is_done() {
                let hint = if self.specs[i].local_link { "" } else { " (no local link to the venue)" };
                self.diagnostics.push(format!("user {} stuck in phase {}{hint}", user.id(), user.phase()));
            }
        }
        let mut publications: Vec<Publication> =
            self.venues.values().flat_map(|v| v.publications().iter().cloned()).collect();
        publications.sort_by_key(|p| (p.venue_id, p.cycle));
        Ok(RunOutcome {
            scenario: self.name.clone(),
            seed: self.seed,
            trace: self.trace.clone(),
            publications,
            expected: self.expected(),
            users: self.users.iter().map(|u| (u.id().to_string(), u.outcomes().to_vec())).collect(),
            spoter_timings: self.venues.iter().map(|(id, v)| (*id, v.spoter_timings().to_vec())).collect(),
            diagnostics: self.diagnostics.clone(),
            violations: self.violations.clone(),
            end_time_us: self.now,
        })
    }

    /// Replays the users' own records of their accepted updates in chain
    /// order over plaintext counters.
    fn expected(&self) -> Vec<ExpectedCycle> {
        let mut cycles: BTreeMap<(u64, u64), Vec<(u32, &CheckInOutcome)>> = BTreeMap::new();
        for outcome in self.users.iter().flat_map(User::outcomes) {
            if let (true, Some(cycle), Some(pos)) = (outcome.accepted, outcome.cycle, outcome.chain_position) {
                cycles.entry((outcome.venue_id, cycle)).or_default().push((pos, outcome));
            }
        }
        let r = self.params.block_size;
        cycles
            .into_iter()
            .map(|((venue_id, cycle), mut accepted)| {
                accepted.sort_by_key(|(pos, _)| *pos);
                let histograms = (accepted.len() == self.params.k).then(|| {
                    let mut counts: Vec<Vec<u64>> = self.dims.iter().map(|d| vec![0; d.sub_ranges()]).collect();
                    for (_, outcome) in &accepted {
                        for (dim, effects) in counts.iter_mut().zip(&outcome.effects) {
                            for effect in effects {
                                match *effect {
                                    Effect::Add(l) => dim[l] = (dim[l] + 1) % r,
                                    Effect::Set(l, v) => dim[l] = v % r,
                                }
                            }
                        }
                    }
                    counts
                });
                ExpectedCycle { venue_id, cycle, accepted: accepted.len(), histograms }
            })
            .collect()
    }
}

pub fn run_scenario(scenario: &Scenario, seed: u64) -> Result<RunOutcome, SimError> {
    Simulation::new(scenario, seed)?.run()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(k: usize, users: usize) -> Scenario {
        let mut params = ScenarioParams::new(k);
        params.s = 8;
        params.modulus_bits = 256;
        params.rsa_bits = 512;
        let mut scenario = Scenario::new("small", params, vec![DimensionSpec::interval("age", vec![0.0, 30.0, 60.0, 120.0]).unwrap()]);
        scenario.actors.venues.push(VenueSpec { id: 7 });
        for i in 0..users {
            let mut user = UserSpec::new(format!("u{i}"), 7, ProfileValue::Number(10.0 + 25.0 * i as f64));
            user.arrive_ms = 5.0 * i as f64;
            scenario.actors.users.push(user);
        }
        scenario
    }

    fn with_adversary(mut scenario: Scenario, actor: &str, behavior: AdversaryBehavior) -> Scenario {
        inject_adversary(&mut scenario, AdversaryConfig { actor: actor.into(), behavior, params: serde_json::Value::Null })
            .unwrap();
        scenario
    }

    fn rejection_kind(outcome: &RunOutcome, user: &str) -> Option<&'static str> {
        outcome.outcomes_of(user).first().and_then(|o| o.rejection.as_ref()).map(|r| r.kind())
    }

    #[test]
    fn full_cycle_publishes_oracle_histogram() {
        let outcome = run_scenario(&small(3, 3), 1).unwrap();
        assert!(outcome.is_consistent(), "{:?} {:?} {:?}", outcome.violations, outcome.diagnostics, outcome.oracle_mismatches());
        let published: Vec<_> = outcome.published().collect();
        assert_eq!(published.len(), 1);
        assert_eq!(published[0].histograms().unwrap(), vec![vec![1, 1, 1]]);
        assert_eq!(outcome.accepted_check_ins(), 3);
    }

    #[test]
    fn short_cycle_aborts() {
        let outcome = run_scenario(&small(3, 2), 1).unwrap();
        assert!(outcome.is_consistent());
        assert_eq!(outcome.published().count(), 0);
        assert!(matches!(outcome.publications[0].outcome, PubOutcome::Aborted { shares: 2, needed: 3 }));
    }

    #[test]
    fn overflow_opens_next_cycle() {
        let outcome = run_scenario(&small(2, 3), 4).unwrap();
        assert!(outcome.is_consistent(), "{:?}", outcome.oracle_mismatches());
        assert_eq!(outcome.publications.len(), 2);
        assert!(matches!(outcome.publications[0].outcome, PubOutcome::Published(_)));
        assert!(matches!(outcome.publications[1].outcome, PubOutcome::Aborted { shares: 1, .. }));
    }

    #[test]
    fn runs_are_deterministic() {
        let scenario = small(2, 2);
        let a = run_scenario(&scenario, 9).unwrap();
        let b = run_scenario(&scenario, 9).unwrap();
        assert_eq!(a.trace.to_jsonl(), b.trace.to_jsonl());
        assert_eq!(a.publication_lines(), b.publication_lines());
        let c = run_scenario(&scenario, 10).unwrap();
        assert_ne!(a.trace.deliveries, c.trace.deliveries);
    }

    #[test]
    fn honest_spoter_timing() {
        let outcome = run_scenario(&small(2, 2), 3).unwrap();
        let timings = &outcome.spoter_timings[&7];
        assert_eq!(timings.len(), 2);
        assert!(timings.iter().all(|t| t.accepted && t.elapsed_us == 3_600));
    }

    #[test]
    fn wormhole_relay_fails_timing() {
        let scenario = with_adversary(small(2, 2), "u1", AdversaryBehavior::WormholeRelay);
        let outcome = run_scenario(&scenario, 3).unwrap();
        assert_eq!(rejection_kind(&outcome, "u1"), Some("timing_violation"));
        assert!(!outcome.outcomes_of("u1")[0].got_share);
        let slow = outcome.spoter_timings[&7].iter().find(|t| !t.accepted).unwrap();
        assert_eq!(slow.elapsed_us, 41_600);
        assert!(outcome.oracle_mismatches().is_empty());
    }

    #[test]
    fn cheaters_are_rejected() {
        for behavior in [AdversaryBehavior::DoubleIncrement, AdversaryBehavior::CorruptCounter] {
            let scenario = with_adversary(small(2, 3), "u0", behavior);
            let outcome = run_scenario(&scenario, 5).unwrap();
            assert_eq!(rejection_kind(&outcome, "u0"), Some("zk_rejected"), "{behavior:?}");
            assert!(outcome.oracle_mismatches().is_empty());
            assert!(outcome.violations.is_empty());
        }
    }

    #[test]
    fn forged_share_is_rejected() {
        let scenario = with_adversary(small(2, 2), "u0", AdversaryBehavior::ForgeShare);
        let outcome = run_scenario(&scenario, 5).unwrap();
        assert_eq!(rejection_kind(&outcome, "u0"), Some("bad_share_signature"));
        assert!(outcome.outcomes_of("u1")[0].accepted);
    }

    #[test]
    fn replayed_token_is_refused() {
        let scenario = with_adversary(small(2, 2), "u0", AdversaryBehavior::ReplayToken);
        let outcome = run_scenario(&scenario, 5).unwrap();
        let lines = outcome.trace.to_jsonl();
        assert!(lines.contains("token rejected: duplicate_token"));
        assert!(outcome.outcomes_of("u0")[0].accepted);
        assert!(outcome.is_consistent());
    }

    #[test]
    fn sybil_second_check_in_is_refused() {
        let scenario = with_adversary(small(2, 2), "u0", AdversaryBehavior::SybilCheckin);
        let outcome = run_scenario(&scenario, 5).unwrap();
        let attempts = outcome.outcomes_of("u0");
        assert_eq!(attempts.len(), 2);
        assert!(attempts[0].accepted);
        assert_eq!(attempts[1].rejection.as_ref().map(|r| r.kind()), Some("pseudonym_spent"));
        assert!(outcome.trace.to_jsonl().contains("pseudonym refused"));
    }

    #[test]
    fn no_local_link_means_no_share() {
        let mut scenario = small(2, 2);
        scenario.actors.users[1].local_link = false;
        let outcome = run_scenario(&scenario, 2).unwrap();
        assert!(outcome.outcomes_of("u1").is_empty());
        assert!(outcome.diagnostics.iter().any(|d| d.contains("u1") && d.contains("no local link")));
        assert!(!outcome.trace.deliveries.iter().any(|d| d.to == Node::User(1) && d.frame.tag == crate::wire::Tag::Share));
    }

    #[test]
    fn transcripts_do_not_depend_on_user_names() {
        let mut a = small(2, 2);
        a.actors.users[0].seed = Some(77);
        let mut b = a.clone();
        b.actors.users[0].id = "someone-else".into();
        let ta = run_scenario(&a, 8).unwrap().trace.anonymous_transcript(0);
        let tb = run_scenario(&b, 8).unwrap().trace.anonymous_transcript(0);
        assert!(!ta.is_empty());
        assert_eq!(ta, tb);
    }

    #[test]
    fn mix_strips_senders_and_permutes() {
        let batch: Vec<_> = (0..20)
            .map(|i| MixEnvelope { sender: i, frame: Frame::new(crate::wire::Tag::TokenRedeem, vec![i as u8]) })
            .collect();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let (out, handles) = mix_forward(batch.clone(), 100, &mut rng);
        assert_eq!(out.len(), 20);
        assert_eq!(handles.len(), 20);
        for d in &out {
            assert_eq!(handles[&d.handle], usize::from(d.frame.payload[0]));
        }
        let order: Vec<u8> = out.iter().map(|d| d.frame.payload[0]).collect();
        assert_ne!(order, (0..20).collect::<Vec<u8>>());
        let (again, _) = mix_forward(batch, 100, &mut ChaCha20Rng::seed_from_u64(1));
        assert_eq!(out, again);
    }

    #[test]
    fn scenario_json_forms() {
        let text = r#"{
            "name": "json",
            "params": {"k": 2, "s": 4, "modulus_bits": 256, "rsa_bits": 512},
            "dimensions": [
                {"name": "safety", "type": "interval", "boundaries": [0, 0.5, 1], "closed_upper": true},
                {"name": "job", "type": "discrete", "values": ["a", "b"]}
            ],
            "channels": {"local": {"uniform": [1, 2]}, "backbone": 5},
            "actors": {
                "venues": [{"id": 1}],
                "users": [
                    {"id": "x", "venue": 1, "profile": {"safety": {"blocks": [0.8, 0.4], "frequencies": [3, 1]}, "job": "a"}},
                    {"id": "y", "venue": 1, "arrive_ms": 3, "profile": {"safety": 0.1, "job": "b"}}
                ]
            },
            "adversaries": [{"actor": "y", "behavior": "replay_token"}]
        }"#;
        let scenario = Scenario::from_json(text).unwrap();
        assert_eq!(scenario.channels.backbone, Latency::Ms(5.0));
        let profile = scenario.resolve_profile(&scenario.actors.users[0]).unwrap();
        let ProfileValue::Number(safety) = profile["safety"] else { panic!("numeric label") };
        assert!((safety - 0.7).abs() < 1e-12);
        let back = Scenario::from_json(&scenario.to_json()).unwrap();
        assert_eq!(back, scenario);
        let outcome = run_scenario(&scenario, 1).unwrap();
        assert!(outcome.is_consistent(), "{:?}", outcome.diagnostics);
        assert_eq!(outcome.published().next().unwrap().histograms().unwrap(), vec![vec![1, 1], vec![1, 1]]);
    }

    #[test]
    fn invalid_scenarios() {
        let mut s = small(2, 1);
        s.actors.users[0].venue = 99;
        assert!(s.validate().is_err());
        let mut s = small(2, 1);
        s.actors.users.push(s.actors.users[0].clone());
        assert!(s.validate().is_err());
        let mut s = small(2, 1);
        assert!(inject_adversary(&mut s, AdversaryConfig { actor: "nobody".into(), behavior: AdversaryBehavior::ForgeShare, params: serde_json::Value::Null }).is_err());
        assert!(parse_behavior("teleport").is_err());
        assert_eq!(parse_behavior("sybil_checkin").unwrap(), AdversaryBehavior::SybilCheckin);
        assert!(Scenario::from_json("{").is_err());
    }
}
