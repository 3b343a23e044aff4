//! Communication and storage accounting from real frames, plus wall-clock
//! sweeps over modulus size and proof rounds.

use std::fmt::Write as _;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::benaloh::{keygen, BenalohKeyPair};
use crate::lcp::{init_counters, reencrypt_and_increment, CounterSet, DimensionSpec, SubRange};
use crate::protocol::ProtocolParams;
use crate::shamir::{self, ShareParams};
use crate::sim::{run_scenario, Node, Scenario, ScenarioParams, UserSpec, VenueSpec};
use crate::wire::{self, Tag};
use crate::zk::{run_protocol, Challenge, HonestProver, Prover, Statement, Verdict, Verifier};
use crate::lcp::ProfileValue;

/// Expected bits per ZK-CTR round: `4BN` of commitments plus on average
/// `3BN` of reveal.
pub fn comm_bits(b: u64, n: u64) -> u64 {
    7 * b * n
}

/// Bits a venue stores per dimension: `b` records of two ciphertexts.
pub fn storage_bits(b: u64, n: u64) -> u64 {
    2 * b * n
}

fn dimension(b: usize) -> DimensionSpec {
    DimensionSpec::interval("d", (0..=b).map(|x| x as f64).collect()).expect("increasing boundaries")
}

/// Benaloh block size used by the benches.
fn bench_block_size(b: usize) -> u64 {
    ProtocolParams::default_block_size(5, &[dimension(b)])
}

/// A key, a counter set and an honest update to prove.
pub struct ProofFixture {
    pub keys: BenalohKeyPair,
    pub prev: CounterSet,
    pub next: CounterSet,
    statement: Statement,
    witness: crate::lcp::UpdateWitness,
}

impl ProofFixture {
    pub fn new(b: usize, modulus_bits: u64, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let keys = keygen(bench_block_size(b), modulus_bits, &mut rng).expect("bench key");
        let prev = init_counters(&keys.public, 0, &dimension(b), &mut rng).expect("counters");
        let (next, witness) = reencrypt_and_increment(&keys.public, &prev, SubRange(b.div_ceil(2)), &mut rng).expect("update");
        let statement = Statement::new(keys.public.clone(), prev.clone(), next.clone(), false).expect("statement");
        Self { keys, prev, next, statement, witness }
    }

    pub fn prover(&self) -> HonestProver {
        HonestProver::new(self.statement.clone(), self.witness.clone()).expect("fixture witness")
    }

    pub fn verifier(&self) -> Verifier {
        Verifier::new(self.statement.clone())
    }
}

/// Payload bytes of one encoded round (headers excluded).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RoundBytes {
    pub commit: usize,
    pub challenge: usize,
    pub reveal: usize,
}

impl RoundBytes {
    pub fn total(&self) -> usize {
        self.commit + self.challenge + self.reveal
    }
}

/// Runs one round with a forced challenge and measures the encoded frames.
pub fn measure_round(fixture: &ProofFixture, challenge: Challenge, rng: &mut ChaCha20Rng) -> RoundBytes {
    let pk = &fixture.keys.public;
    let mut prover = fixture.prover();
    let commitment = prover.commit(rng).expect("honest commit");
    let commit = wire::encode_commit(pk, 0, 0, false, &commitment);
    let ask = wire::encode_challenge(0, 0, false, challenge);
    let reveal = prover.respond(challenge).expect("answer");
    let answer = wire::encode_reveal(pk, 0, 0, false, &reveal);
    RoundBytes { commit: commit.payload.len(), challenge: ask.payload.len(), reveal: answer.payload.len() }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccountingRow {
    pub b: usize,
    pub n: u64,
    pub formula_comm_bytes: f64,
    /// Mean of the two challenge branches, both measured from frames.
    pub measured_comm_bytes: f64,
    pub open_round_bytes: usize,
    pub link_round_bytes: usize,
    pub formula_storage_bytes: u64,
    pub measured_storage_bytes: usize,
}

impl AccountingRow {
    pub fn comm_rel_error(&self) -> f64 {
        (self.measured_comm_bytes - self.formula_comm_bytes).abs() / self.formula_comm_bytes
    }
}

pub fn accounting(b: usize, n: u64, seed: u64) -> AccountingRow {
    let fixture = ProofFixture::new(b, n, seed);
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x5eed);
    let open = measure_round(&fixture, Challenge::Open, &mut rng).total();
    let link = measure_round(&fixture, Challenge::Link, &mut rng).total();
    AccountingRow {
        b,
        n,
        formula_comm_bytes: comm_bits(b as u64, n) as f64 / 8.0,
        measured_comm_bytes: (open + link) as f64 / 2.0,
        open_round_bytes: open,
        link_round_bytes: link,
        formula_storage_bytes: storage_bits(b as u64, n) / 8,
        measured_storage_bytes: fixture.next.to_bytes(&fixture.keys.public).len(),
    }
}

/// Mean payload bytes per round over `rounds` rounds with random challenges.
pub fn empirical_round_bytes(b: usize, n: u64, rounds: u32, seed: u64) -> f64 {
    let fixture = ProofFixture::new(b, n, seed);
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0xc0117);
    let total: usize = (0..rounds).map(|_| measure_round(&fixture, Challenge::random(&mut rng), &mut rng).total()).sum();
    total as f64 / f64::from(rounds)
}

pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(|a, b| a.total_cmp(b));
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        (values[mid - 1] + values[mid]) / 2.0
    }
}

/// Coefficient of determination of the least-squares line through the
/// points.
pub fn r_squared(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy * sxy / (sxx * syy)
}

pub fn strictly_increasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[0] < w[1])
}

fn time_ms(f: impl FnOnce()) -> f64 {
    let start = Instant::now();
    f();
    start.elapsed().as_secs_f64() * 1e3
}

/// Provider Setup for one cycle: key pair, `k` shares of `p`, fresh
/// counters.
pub fn setup_once(b: usize, n: u64, k: usize, seed: u64) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let keys = keygen(bench_block_size(b), n, &mut rng).expect("bench key");
    let params = ShareParams::for_modulus(k, k, n).expect("share params");
    shamir::split(keys.secret.p(), &params, &mut rng).expect("split");
    init_counters(&keys.public, 0, &dimension(b), &mut rng).expect("counters");
}

/// One full proof of `rounds` rounds; panics unless accepted.
pub fn prove_once(fixture: &ProofFixture, rounds: u32, seed: u64) {
    let mut prover = fixture.prover();
    let mut verifier = fixture.verifier();
    let mut p_rng = ChaCha20Rng::seed_from_u64(seed);
    let mut v_rng = ChaCha20Rng::seed_from_u64(seed.wrapping_add(1));
    let transcript = run_protocol(&mut prover, &mut verifier, rounds, &mut p_rng, &mut v_rng).expect("rounds > 0");
    assert_eq!(transcript.verdict, Verdict::Accept);
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub suite: String,
    pub point: String,
    pub metric: String,
    pub value: f64,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Environment {
    pub os: String,
    pub arch: String,
    pub cpus: usize,
    pub optimized: bool,
    pub version: String,
}

impl Environment {
    pub fn current() -> Self {
        Self {
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
            cpus: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            optimized: !cfg!(debug_assertions),
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub environment: Environment,
    pub rows: Vec<BenchRow>,
    pub notes: Vec<String>,
}

impl BenchReport {
    pub fn new() -> Self {
        Self { environment: Environment::current(), rows: Vec::new(), notes: Vec::new() }
    }

    pub fn push(&mut self, suite: &str, point: impl Into<String>, metric: &str, value: f64, unit: &str) {
        self.rows.push(BenchRow { suite: suite.into(), point: point.into(), metric: metric.into(), value, unit: unit.into() });
    }

    pub fn merge(&mut self, other: BenchReport) {
        self.rows.extend(other.rows);
        self.notes.extend(other.notes);
    }

    pub fn values(&self, suite: &str, metric: &str) -> Vec<f64> {
        self.rows.iter().filter(|r| r.suite == suite && r.metric == metric).map(|r| r.value).collect()
    }

    pub fn to_text(&self) -> String {
        let e = &self.environment;
        let mut out = format!(
            "# {} {} cpus={} optimized={} version={}\n",
            e.os, e.arch, e.cpus, e.optimized, e.version
        );
        let _ = writeln!(out, "{:<10} {:<18} {:<22} {:>16} unit", "suite", "point", "metric", "value");
        for r in &self.rows {
            let _ = writeln!(out, "{:<10} {:<18} {:<22} {:>16.4} {}", r.suite, r.point, r.metric, r.value, r.unit);
        }
        for note in &self.notes {
            let _ = writeln!(out, "note: {note}");
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("suite,point,metric,value,unit\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{},{}", r.suite, r.point.replace(',', ";"), r.metric, r.value, r.unit);
        }
        out
    }
}

impl Default for BenchReport {
    fn default() -> Self {
        Self::new()
    }
}

pub const MODULUS_SWEEP: [u64; 5] = [64, 128, 256, 512, 1024];
pub const ROUNDS_SWEEP: [u32; 4] = [5, 10, 20, 30];
pub const DEFAULT_RUNS: usize = 11;

/// Setup time against modulus size.
pub fn bench_setup(sizes: &[u64], runs: usize) -> BenchReport {
    let mut report = BenchReport::new();
    let mut medians = Vec::new();
    for &n in sizes {
        let mut samples: Vec<f64> = (0..runs).map(|i| time_ms(|| setup_once(5, n, 5, 1000 * n + i as u64))).collect();
        let m = median(&mut samples);
        medians.push(m);
        report.push("setup", format!("N={n}"), "median_ms", m, "ms");
    }
    report.notes.push(format!("setup median strictly increasing in N: {}", strictly_increasing(&medians)));
    report
}

/// Per-round ZK-CTR time against modulus size, and total proof time
/// against the number of rounds.
pub fn bench_zkctr(sizes: &[u64], rounds: &[u32], runs: usize) -> BenchReport {
    let mut report = BenchReport::new();
    let per_round_s = 10;
    let mut per_round = Vec::new();
    for &n in sizes {
        let fixture = ProofFixture::new(5, n, n);
        let mut samples: Vec<f64> =
            (0..runs).map(|i| time_ms(|| prove_once(&fixture, per_round_s, i as u64)) / f64::from(per_round_s)).collect();
        let m = median(&mut samples);
        per_round.push(m);
        report.push("zkctr", format!("N={n}"), "round_median_ms", m, "ms");
    }
    if !sizes.is_empty() {
        report.notes.push(format!("per-round median strictly increasing in N: {}", strictly_increasing(&per_round)));
    }
    if !rounds.is_empty() {
        let fixture = ProofFixture::new(5, 256, 7);
        // round-robin over s so that background load spreads over every point
        let mut samples = vec![Vec::with_capacity(runs); rounds.len()];
        for i in 0..runs {
            for (slot, &s) in samples.iter_mut().zip(rounds) {
                slot.push(time_ms(|| prove_once(&fixture, s, i as u64)));
            }
        }
        let mut totals = Vec::new();
        for (mut slot, &s) in samples.into_iter().zip(rounds) {
            let m = median(&mut slot);
            totals.push(m);
            report.push("zkctr", format!("s={s}"), "total_median_ms", m, "ms");
        }
        let xs: Vec<f64> = rounds.iter().map(|&s| f64::from(s)).collect();
        let r2 = r_squared(&xs, &totals);
        report.push("zkctr", "N=256", "rounds_r_squared", r2, "");
        report.notes.push(format!("total proof time linear in s: R^2 = {r2:.4}"));
    }
    report
}

/// Communication and storage accounting.
pub fn bench_accounting(points: &[(usize, u64)]) -> BenchReport {
    let mut report = BenchReport::new();
    for &(b, n) in points {
        let row = accounting(b, n, 42);
        let point = format!("B={b} N={n}");
        report.push("comm", point.clone(), "formula_bytes", row.formula_comm_bytes, "B");
        report.push("comm", point.clone(), "measured_bytes", row.measured_comm_bytes, "B");
        report.push("comm", point.clone(), "relative_error", row.comm_rel_error(), "");
        report.push("storage", point.clone(), "formula_bytes", row.formula_storage_bytes as f64, "B");
        report.push("storage", point, "measured_bytes", row.measured_storage_bytes as f64, "B");
    }
    report
}

/// A single-venue scenario where `k` users fill one cycle.
pub fn cycle_scenario(k: usize, rounds: u32, modulus_bits: u64) -> Scenario {
    let mut params = ScenarioParams::new(k);
    params.s = rounds;
    params.modulus_bits = modulus_bits;
    params.rsa_bits = 512;
    let dims = vec![crate::safety::SafetyBuckets::equal(5, Default::default()).expect("five buckets").dimension("safety")];
    let mut scenario = Scenario::new(format!("cycle-k{k}"), params, dims);
    scenario.actors.venues.push(VenueSpec { id: 1 });
    for i in 0..k {
        let mut user = UserSpec::new(format!("user{i}"), 1, ProfileValue::Number((i % 5) as f64 / 5.0 + 0.1));
        user.arrive_ms = 20.0 * i as f64;
        scenario.actors.users.push(user);
    }
    scenario
}

fn phase_of(tag: Tag) -> &'static str {
    match tag {
        Tag::Setup => "setup",
        Tag::PseudonymRequest | Tag::PseudonymGrant => "pseudonym",
        Tag::SpoterHello | Tag::SpoterChallenge | Tag::SpoterResponse | Tag::Token | Tag::TokenRedeem | Tag::Share => {
            "spoter"
        }
        Tag::Publish => "pubstats",
        Tag::Reject => "reject",
        _ => "checkin",
    }
}

/// Full cycle through the simulator: wall-clock median and per-phase
/// frame counts and bytes.
pub fn bench_end2end(k: usize, rounds: u32, modulus_bits: u64, runs: usize) -> BenchReport {
    let mut report = BenchReport::new();
    let scenario = cycle_scenario(k, rounds, modulus_bits);
    let mut samples = Vec::new();
    let mut last = None;
    for i in 0..runs.max(1) {
        let start = Instant::now();
        let outcome = run_scenario(&scenario, i as u64).expect("valid scenario");
        samples.push(start.elapsed().as_secs_f64() * 1e3);
        last = Some(outcome);
    }
    let outcome = last.expect("at least one run");
    let point = format!("k={k} s={rounds} N={modulus_bits}");
    report.push("end2end", point.clone(), "median_ms", median(&mut samples), "ms");
    report.push("end2end", point.clone(), "simulated_ms", outcome.end_time_us as f64 / 1e3, "ms");
    let mut phases: std::collections::BTreeMap<&str, (usize, usize)> = Default::default();
    for d in &outcome.trace.deliveries {
        if d.to == Node::Mix && d.from == Node::Provider {
            continue;
        }
        let entry = phases.entry(phase_of(d.frame.tag)).or_default();
        entry.0 += 1;
        entry.1 += d.frame.len();
    }
    for (phase, (frames, bytes)) in phases {
        report.push("end2end", format!("{point} {phase}"), "frames", frames as f64, "");
        report.push("end2end", format!("{point} {phase}"), "bytes", bytes as f64, "B");
    }
    report.notes.push(format!(
        "end2end cycle published: {} (oracle mismatches: {})",
        outcome.published().count() == 1,
        outcome.oracle_mismatches().len()
    ));
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formulas() {
        assert_eq!(comm_bits(20, 1024), 143_360);
        assert_eq!(comm_bits(20, 1024) / 8, 17_920);
        assert_eq!(comm_bits(1, 64), 448);
        assert_eq!(storage_bits(20, 1024) / 8, 5_120);
        assert_eq!(storage_bits(5, 512), 5_120);
    }

    #[test]
    fn measured_sizes_follow_frame_layout() {
        let row = accounting(3, 128, 1);
        let w = 16;
        assert_eq!(row.open_round_bytes, 4 * 3 * w + 1 + 4 * 3 * w);
        assert_eq!(row.link_round_bytes, 4 * 3 * w + 1 + 2 * 3 * w + 4);
        assert_eq!(row.measured_storage_bytes, 2 * 3 * w);
    }

    #[test]
    fn empirical_average_near_formula() {
        let mean = empirical_round_bytes(1, 256, 2000, 3);
        let formula = comm_bits(1, 256) as f64 / 8.0;
        assert!((mean - formula).abs() / formula < 0.02, "{mean} vs {formula}");
    }

    #[test]
    fn regression_helpers() {
        assert!((r_squared(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]) - 1.0).abs() < 1e-12);
        assert!(r_squared(&[1.0, 2.0, 3.0], &[1.0, 3.0, 1.0]) < 0.1);
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(strictly_increasing(&[1.0, 2.0, 3.0]));
        assert!(!strictly_increasing(&[1.0, 1.0]));
    }

    #[test]
    fn report_formats() {
        let mut report = bench_accounting(&[(2, 128)]);
        report.merge(bench_end2end(2, 2, 128, 1));
        let csv = report.to_csv();
        assert!(csv.starts_with("suite,point,metric,value,unit\n"));
        assert!(csv.contains("storage,B=2 N=128,measured_bytes,64,B"));
        assert!(report.to_text().contains("end2end cycle published: true"));
    }
}
