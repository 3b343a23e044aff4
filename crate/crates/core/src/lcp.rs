//! Location-centric profile model: dimensions discretized into sub-ranges,
//! and the encrypted counter sets a venue keeps for each dimension.
//!
//! Record `l` of a counter set is the pair `[E(c_l), E(l)]`. A check-in
//! re-encrypts every record and multiplies exactly one count by `y`.

use std::fmt;

use num_bigint::BigUint;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith;
use crate::benaloh::{BenalohError, BenalohPublicKey, BenalohSecretKey, Ciphertext};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LcpError {
    #[error("invalid dimension `{name}`: {reason}")]
    InvalidSpec { name: String, reason: String },
    #[error("{count} sub-ranges do not fit in plaintext space Z_{block_size}")]
    TooManySubRanges { count: usize, block_size: u64 },
    #[error("value {value} lies outside dimension `{name}`")]
    OutOfRange { name: String, value: String },
    #[error("sub-range {index} out of bounds for {count} sub-ranges")]
    IndexOutOfBounds { index: usize, count: usize },
    #[error("malformed counter set: {0}")]
    Malformed(String),
    #[error(transparent)]
    Crypto(#[from] BenalohError),
}

/// 1-based sub-range index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SubRange(pub usize);

impl SubRange {
    pub fn position(self) -> usize {
        self.0 - 1
    }
}

impl fmt::Display for SubRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum DimensionKind {
    /// Half-open intervals `[b_0, b_1), [b_1, b_2), ...`; with
    /// `closed_upper` the last interval also contains its upper bound.
    Interval {
        boundaries: Vec<f64>,
        #[serde(default)]
        closed_upper: bool,
    },
    Discrete {
        #[serde(alias = "values")]
        boundaries: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: DimensionKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileValue {
    Number(f64),
    Label(String),
}

impl fmt::Display for ProfileValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProfileValue::Number(v) => write!(f, "{v}"),
            ProfileValue::Label(s) => f.write_str(s),
        }
    }
}

impl DimensionSpec {
    pub fn interval(name: impl Into<String>, boundaries: Vec<f64>) -> Result<Self, LcpError> {
        let spec = Self {
            name: name.into(),
            kind: DimensionKind::Interval { boundaries, closed_upper: false },
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn discrete(name: impl Into<String>, values: Vec<String>) -> Result<Self, LcpError> {
        let spec = Self { name: name.into(), kind: DimensionKind::Discrete { boundaries: values } };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), LcpError> {
        let invalid = |reason: &str| LcpError::InvalidSpec {
            name: self.name.clone(),
            reason: reason.to_owned(),
        };
        match &self.kind {
            DimensionKind::Interval { boundaries, .. } => {
                if boundaries.len() < 2 {
                    return Err(invalid("need at least two boundaries"));
                }
                if boundaries.iter().any(|b| !b.is_finite()) {
                    return Err(invalid("boundaries must be finite"));
                }
                if boundaries.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(invalid("boundaries must be strictly increasing"));
                }
            }
            DimensionKind::Discrete { boundaries } => {
                if boundaries.is_empty() {
                    return Err(invalid("need at least one value"));
                }
                let mut sorted = boundaries.clone();
                sorted.sort();
                sorted.dedup();
                if sorted.len() != boundaries.len() {
                    return Err(invalid("values must be distinct"));
                }
            }
        }
        Ok(())
    }

    /// Number of sub-ranges `b`.
    pub fn sub_ranges(&self) -> usize {
        match &self.kind {
            DimensionKind::Interval { boundaries, .. } => boundaries.len() - 1,
            DimensionKind::Discrete { boundaries } => boundaries.len(),
        }
    }

    pub fn label(&self, index: SubRange) -> String {
        match &self.kind {
            DimensionKind::Interval { boundaries, closed_upper } => {
                let j = index.position();
                let close = if *closed_upper && j + 2 == boundaries.len() { ']' } else { ')' };
                format!("[{},{}{}", boundaries[j], boundaries[j + 1], close)
            }
            DimensionKind::Discrete { boundaries } => boundaries[index.position()].clone(),
        }
    }

    /// The unique sub-range containing `value`.
    pub fn classify(&self, value: &ProfileValue) -> Result<SubRange, LcpError> {
        let out_of_range = || LcpError::OutOfRange { name: self.name.clone(), value: value.to_string() };
        match (&self.kind, value) {
            (DimensionKind::Interval { boundaries, closed_upper }, ProfileValue::Number(v)) => {
                let last = boundaries.len() - 1;
                if *closed_upper && *v == boundaries[last] {
                    return Ok(SubRange(last));
                }
                boundaries
                    .windows(2)
                    .position(|w| w[0] <= *v && *v < w[1])
                    .map(|p| SubRange(p + 1))
                    .ok_or_else(out_of_range)
            }
            (DimensionKind::Discrete { boundaries }, ProfileValue::Label(label)) => boundaries
                .iter()
                .position(|b| b == label)
                .map(|p| SubRange(p + 1))
                .ok_or_else(out_of_range),
            _ => Err(out_of_range()),
        }
    }
}

/// `[E(count), E(index)]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EncryptedCounter {
    pub count: Ciphertext,
    pub index: Ciphertext,
}

impl EncryptedCounter {
    pub fn to_bytes(&self, pk: &BenalohPublicKey) -> Vec<u8> {
        let mut out = self.count.to_bytes(pk);
        out.extend(self.index.to_bytes(pk));
        out
    }

    pub fn from_bytes(pk: &BenalohPublicKey, bytes: &[u8]) -> Result<Self, BenalohError> {
        let width = pk.ciphertext_len();
        if bytes.len() != 2 * width {
            return Err(BenalohError::Encoding("record width".into()));
        }
        let mut pair = pk.ciphertexts(vec![arith::from_bytes(&bytes[..width]), arith::from_bytes(&bytes[width..])])?;
        let index = pair.pop().expect("two values");
        let count = pair.pop().expect("two values");
        Ok(Self { count, index })
    }

    pub fn reencrypt(&self, pk: &BenalohPublicKey, v: &(BigUint, BigUint)) -> Self {
        Self {
            count: pk.reencrypt_unchecked(&self.count, &v.0),
            index: pk.reencrypt_unchecked(&self.index, &v.1),
        }
    }

    /// Count multiplied by `y`; index untouched.
    pub fn increment(&self, pk: &BenalohPublicKey) -> Self {
        Self { count: pk.increment(&self.count), index: self.index.clone() }
    }

    /// Both components multiplied by `factor`.
    pub fn scale(&self, pk: &BenalohPublicKey, factor: &BigUint) -> Self {
        Self { count: pk.scale(&self.count, factor), index: pk.scale(&self.index, factor) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CounterSet {
    pub dimension: u16,
    pub check_ins: u32,
    pub records: Vec<EncryptedCounter>,
}

/// Randomness and increment position behind one counter-set update; the
/// prover's private input to ZK-CTR.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UpdateWitness {
    pub randoms: Vec<(BigUint, BigUint)>,
    pub position: usize,
    /// Multiplicative blinding share applied to every component, if any.
    pub blinding: Option<BigUint>,
}

impl CounterSet {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Concatenated records: exactly `2 * b * ceil(N/8)` bytes.
    pub fn to_bytes(&self, pk: &BenalohPublicKey) -> Vec<u8> {
        self.records.iter().flat_map(|r| r.to_bytes(pk)).collect()
    }

    pub fn from_bytes(
        pk: &BenalohPublicKey,
        dimension: u16,
        check_ins: u32,
        bytes: &[u8],
    ) -> Result<Self, LcpError> {
        let record = 2 * pk.ciphertext_len();
        if bytes.is_empty() || bytes.len() % record != 0 {
            return Err(LcpError::Malformed(format!("{} bytes is not a whole number of records", bytes.len())));
        }
        let values = bytes.chunks(record / 2).map(arith::from_bytes).collect();
        let mut cts = pk.ciphertexts(values)?.into_iter();
        let records = std::iter::from_fn(|| Some(EncryptedCounter { count: cts.next()?, index: cts.next()? })).collect();
        Ok(Self { dimension, check_ins, records })
    }
}

/// Fresh encryptions of count 0 and index `l` for `l = 1..=b`.
pub fn init_counters<R: RngCore + ?Sized>(
    pk: &BenalohPublicKey,
    dimension: u16,
    spec: &DimensionSpec,
    rng: &mut R,
) -> Result<CounterSet, LcpError> {
    spec.validate()?;
    let b = spec.sub_ranges();
    if b as u64 >= pk.block_size() {
        return Err(LcpError::TooManySubRanges { count: b, block_size: pk.block_size() });
    }
    let records = (1..=b as u64)
        .map(|l| {
            Ok(EncryptedCounter {
                count: pk.encrypt_random(0, rng)?,
                index: pk.encrypt_random(l, rng)?,
            })
        })
        .collect::<Result<_, BenalohError>>()?;
    Ok(CounterSet { dimension, check_ins: 0, records })
}

pub fn fresh_randoms<R: RngCore + ?Sized>(
    pk: &BenalohPublicKey,
    count: usize,
    rng: &mut R,
) -> Vec<(BigUint, BigUint)> {
    let mut units = arith::random_units(pk.modulus(), 2 * count, rng).into_iter();
    (0..count).map(|_| (units.next().expect("two per record"), units.next().expect("two per record"))).collect()
}

/// Applies an arbitrary update: record `l` is re-encrypted with `randoms[l]`,
/// its count multiplied by `y^increments[l]`, and both components scaled by
/// `blinding`. Honest clients use exactly one unit increment; the cheating
/// strategies in the proof tests use others.
pub fn apply_update(
    pk: &BenalohPublicKey,
    prev: &CounterSet,
    increments: &[u64],
    randoms: &[(BigUint, BigUint)],
    blinding: Option<&BigUint>,
) -> CounterSet {
    assert_eq!(increments.len(), prev.len());
    assert_eq!(randoms.len(), prev.len());
    let records = prev
        .records
        .iter()
        .zip(increments.iter().zip(randoms))
        .map(|(record, (&times, v))| {
            let mut next = record.clone();
            for _ in 0..times {
                next = next.increment(pk);
            }
            let mut next = next.reencrypt(pk, v);
            if let Some(factor) = blinding {
                next = next.scale(pk, factor);
            }
            next
        })
        .collect();
    CounterSet { dimension: prev.dimension, check_ins: prev.check_ins + 1, records }
}

/// Re-encrypts every record with fresh randomness and increments the count
/// of sub-range `j`, preserving record order.
pub fn reencrypt_and_increment<R: RngCore + ?Sized>(
    pk: &BenalohPublicKey,
    prev: &CounterSet,
    j: SubRange,
    rng: &mut R,
) -> Result<(CounterSet, UpdateWitness), LcpError> {
    update_with_blinding(pk, prev, j, None, rng)
}

/// As [`reencrypt_and_increment`], additionally scaling every component by
/// a blinding share.
pub fn update_with_blinding<R: RngCore + ?Sized>(
    pk: &BenalohPublicKey,
    prev: &CounterSet,
    j: SubRange,
    blinding: Option<&BigUint>,
    rng: &mut R,
) -> Result<(CounterSet, UpdateWitness), LcpError> {
    if j.0 == 0 || j.0 > prev.len() {
        return Err(LcpError::IndexOutOfBounds { index: j.0, count: prev.len() });
    }
    if let Some(factor) = blinding {
        pk.check_unit(factor)?;
    }
    let randoms = fresh_randoms(pk, prev.len(), rng);
    let mut increments = vec![0; prev.len()];
    increments[j.position()] = 1;
    let next = apply_update(pk, prev, &increments, &randoms, blinding);
    let witness = UpdateWitness { randoms, position: j.position(), blinding: blinding.cloned() };
    Ok((next, witness))
}

/// Decrypts every record to `(index, count)` in record order. Fails unless
/// the decrypted indices are exactly `1..=b`.
pub fn decrypt_counters(
    sk: &BenalohSecretKey,
    set: &CounterSet,
) -> Result<Vec<(u64, u64)>, LcpError> {
    let mut pairs = Vec::with_capacity(set.len());
    for record in &set.records {
        let index = sk.decrypt(&record.index)?;
        let count = sk.decrypt(&record.count)?;
        pairs.push((index, count));
    }
    let mut indices: Vec<u64> = pairs.iter().map(|(i, _)| *i).collect();
    indices.sort_unstable();
    if indices != (1..=set.len() as u64).collect::<Vec<_>>() {
        return Err(LcpError::Malformed(format!("decrypted indices {indices:?} are not 1..={}", set.len())));
    }
    Ok(pairs)
}

/// Counts ordered by sub-range index.
pub fn decrypt_histogram(sk: &BenalohSecretKey, set: &CounterSet) -> Result<Vec<u64>, LcpError> {
    let mut histogram = vec![0; set.len()];
    for (index, count) in decrypt_counters(sk, set)? {
        histogram[index as usize - 1] = count;
    }
    Ok(histogram)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benaloh::{keygen, BenalohKeyPair};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn key() -> &'static BenalohKeyPair {
        static KEY: std::sync::OnceLock<BenalohKeyPair> = std::sync::OnceLock::new();
        KEY.get_or_init(|| keygen(17, 128, &mut ChaCha20Rng::seed_from_u64(1)).unwrap())
    }

    fn age() -> DimensionSpec {
        DimensionSpec::interval("age", vec![0.0, 18.0, 40.0, 120.0]).unwrap()
    }

    fn spec(b: usize) -> DimensionSpec {
        DimensionSpec::interval("d", (0..=b).map(|x| x as f64).collect()).unwrap()
    }

    #[test]
    fn classification() {
        let spec = age();
        assert_eq!(spec.classify(&ProfileValue::Number(34.0)).unwrap(), SubRange(2));
        assert_eq!(spec.classify(&ProfileValue::Number(18.0)).unwrap(), SubRange(2));
        assert_eq!(spec.classify(&ProfileValue::Number(0.0)).unwrap(), SubRange(1));
        assert!(matches!(spec.classify(&ProfileValue::Number(200.0)), Err(LcpError::OutOfRange { .. })));
        assert!(matches!(spec.classify(&ProfileValue::Number(120.0)), Err(LcpError::OutOfRange { .. })));
        assert!(spec.classify(&ProfileValue::Label("x".into())).is_err());

        let closed = DimensionSpec {
            name: "safety".into(),
            kind: DimensionKind::Interval { boundaries: vec![0.0, 0.5, 1.0], closed_upper: true },
        };
        assert_eq!(closed.classify(&ProfileValue::Number(1.0)).unwrap(), SubRange(2));
        assert_eq!(closed.label(SubRange(2)), "[0.5,1]");
        assert_eq!(age().label(SubRange(1)), "[0,18)");

        let gender = DimensionSpec::discrete("gender", vec!["f".into(), "m".into(), "x".into()]).unwrap();
        assert_eq!(gender.classify(&ProfileValue::Label("m".into())).unwrap(), SubRange(2));
        assert_eq!(gender.sub_ranges(), 3);
    }

    #[test]
    fn spec_validation() {
        assert!(DimensionSpec::interval("a", vec![1.0]).is_err());
        assert!(DimensionSpec::interval("a", vec![1.0, 1.0]).is_err());
        assert!(DimensionSpec::discrete("a", vec![]).is_err());
        assert!(DimensionSpec::discrete("a", vec!["x".into(), "x".into()]).is_err());
        let json = r#"{"name":"age","type":"interval","boundaries":[0,18,40]}"#;
        let parsed: DimensionSpec = serde_json::from_str(json).unwrap();
        assert_eq!(parsed.sub_ranges(), 2);
        let json = r#"{"name":"g","type":"discrete","boundaries":["a","b"]}"#;
        let parsed: DimensionSpec = serde_json::from_str(json).unwrap();
        assert_eq!(parsed.sub_ranges(), 2);
    }

    #[test]
    fn init_decrypts_to_zero_with_ordered_indices() {
        let key = key();
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let set = init_counters(&key.public, 0, &spec(5), &mut rng).unwrap();
        assert_eq!(
            decrypt_counters(&key.secret, &set).unwrap(),
            vec![(1, 0), (2, 0), (3, 0), (4, 0), (5, 0)]
        );
        let single = init_counters(&key.public, 0, &spec(1), &mut rng).unwrap();
        assert_eq!(decrypt_counters(&key.secret, &single).unwrap(), vec![(1, 0)]);

        let other = init_counters(&key.public, 0, &spec(5), &mut ChaCha20Rng::seed_from_u64(3)).unwrap();
        assert_ne!(other.records, set.records);
        assert_eq!(decrypt_histogram(&key.secret, &other).unwrap(), vec![0; 5]);

        assert!(matches!(
            init_counters(&key.public, 0, &spec(17), &mut rng),
            Err(LcpError::TooManySubRanges { .. })
        ));
    }

    #[test]
    fn increments_accumulate() {
        let key = key();
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let mut set = init_counters(&key.public, 0, &spec(4), &mut rng).unwrap();
        for _ in 0..5 {
            let (next, witness) = reencrypt_and_increment(&key.public, &set, SubRange(1), &mut rng).unwrap();
            assert_eq!(witness.position, 0);
            assert!(next.records.iter().zip(&set.records).all(|(a, b)| a != b));
            set = next;
        }
        assert_eq!(decrypt_histogram(&key.secret, &set).unwrap(), vec![5, 0, 0, 0]);
        assert_eq!(set.check_ins, 5);
        assert!(matches!(
            reencrypt_and_increment(&key.public, &set, SubRange(5), &mut rng),
            Err(LcpError::IndexOutOfBounds { index: 5, count: 4 })
        ));
        assert!(reencrypt_and_increment(&key.public, &set, SubRange(0), &mut rng).is_err());
    }

    #[test]
    fn non_residue_record_is_rejected() {
        let key = key();
        let pk = &key.public;
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let mut set = init_counters(pk, 0, &spec(4), &mut rng).unwrap();
        let non_residue = loop {
            let candidate = pk.random_unit(&mut rng);
            if key.secret.decrypt(&pk.ciphertext(candidate.clone()).unwrap()).unwrap() != 0 {
                break candidate;
            }
        };
        set.records[2] = set.records[2].scale(pk, &non_residue);
        assert!(matches!(decrypt_counters(&key.secret, &set), Err(LcpError::Malformed(_))));
    }

    #[test]
    fn serialized_size_is_two_ciphertexts_per_record() {
        let key = key();
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let set = init_counters(&key.public, 3, &spec(5), &mut rng).unwrap();
        let bytes = set.to_bytes(&key.public);
        assert_eq!(bytes.len() * 8, 2 * 5 * 128);
        let back = CounterSet::from_bytes(&key.public, 3, 0, &bytes).unwrap();
        assert_eq!(back, set);
        assert!(CounterSet::from_bytes(&key.public, 3, 0, &bytes[1..]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn histogram_matches_plaintext_oracle(seed in any::<u64>(), b in 1usize..=6, steps in 0usize..=12) {
            let key = key();
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let mut set = init_counters(&key.public, 0, &spec(b), &mut rng).unwrap();
            let mut oracle = vec![0u64; b];
            for _ in 0..steps {
                let j = rng.gen_range(1..=b);
                oracle[j - 1] += 1;
                set = reencrypt_and_increment(&key.public, &set, SubRange(j), &mut rng).unwrap().0;
            }
            let pairs = decrypt_counters(&key.secret, &set).unwrap();
            // record l keeps index l across re-encryptions
            for (l, (index, _)) in pairs.iter().enumerate() {
                prop_assert_eq!(*index, l as u64 + 1);
            }
            let counts: Vec<u64> = pairs.iter().map(|(_, c)| *c).collect();
            prop_assert_eq!(counts.iter().sum::<u64>(), steps as u64);
            prop_assert_eq!(counts, oracle);
        }
    }
}
