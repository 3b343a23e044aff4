//! Binary frames exchanged between simulated actors.
//!
//! A frame is a 10-byte header (`tag`, `flags`, 32-bit `context`, 32-bit
//! payload length, big-endian) followed by the payload. ZK-CTR frames put
//! the dimension and round number in `context`, so their payload holds only
//! ciphertext material plus the revealed position and the challenge byte.

use num_bigint::BigUint;
use thiserror::Error;

use crate::arith;
use crate::benaloh::BenalohPublicKey;
use crate::lcp::{CounterSet, EncryptedCounter};
use crate::zk::{Challenge, Commitment, Reveal};

pub const HEADER_LEN: usize = 10;

pub const FLAG_SNAPSHOT: u8 = 0b01;
pub const FLAG_LINK: u8 = 0b10;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("frame truncated")]
    Truncated,
    #[error("unknown frame tag {0:#04x}")]
    UnknownTag(u8),
    #[error("unexpected frame {0:?}")]
    Unexpected(Tag),
    #[error("malformed {0} payload")]
    Malformed(&'static str),
}

macro_rules! tags {
    ($($name:ident = $value:expr),* $(,)?) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        #[repr(u8)]
        pub enum Tag {
            $($name = $value),*
        }

        impl Tag {
            pub fn from_u8(value: u8) -> Result<Self, WireError> {
                match value {
                    $($value => Ok(Tag::$name),)*
                    other => Err(WireError::UnknownTag(other)),
                }
            }
        }
    };
}

tags! {
    Setup = 0x01,
    PseudonymRequest = 0x02,
    PseudonymGrant = 0x03,
    SpoterHello = 0x10,
    SpoterChallenge = 0x11,
    SpoterResponse = 0x12,
    Token = 0x13,
    TokenRedeem = 0x14,
    Share = 0x15,
    CheckInRequest = 0x20,
    Counters = 0x21,
    CheckInSubmit = 0x22,
    ZkCommit = 0x23,
    ZkChallenge = 0x24,
    ZkReveal = 0x25,
    CheckInResult = 0x26,
    Publish = 0x30,
    Reject = 0x3f,
}

impl Tag {
    pub fn is_zk(self) -> bool {
        matches!(self, Tag::ZkCommit | Tag::ZkChallenge | Tag::ZkReveal)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Frame {
    pub tag: Tag,
    pub flags: u8,
    pub context: u32,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(tag: Tag, payload: Vec<u8>) -> Self {
        Self { tag, flags: 0, context: 0, payload }
    }

    pub fn len(&self) -> usize {
        HEADER_LEN + self.payload.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.len());
        out.push(self.tag as u8);
        out.push(self.flags);
        out.extend_from_slice(&self.context.to_be_bytes());
        out.extend_from_slice(&(self.payload.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, WireError> {
        if bytes.len() < HEADER_LEN {
            return Err(WireError::Truncated);
        }
        let tag = Tag::from_u8(bytes[0])?;
        let flags = bytes[1];
        let context = u32::from_be_bytes(bytes[2..6].try_into().expect("four bytes"));
        let len = u32::from_be_bytes(bytes[6..10].try_into().expect("four bytes")) as usize;
        if bytes.len() != HEADER_LEN + len {
            return Err(WireError::Truncated);
        }
        Ok(Self { tag, flags, context, payload: bytes[HEADER_LEN..].to_vec() })
    }

    pub fn expect(&self, tag: Tag) -> Result<Reader<'_>, WireError> {
        if self.tag != tag {
            return Err(WireError::Unexpected(self.tag));
        }
        Ok(Reader::new(&self.payload))
    }
}

/// Append-only payload builder.
#[derive(Debug, Default)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.buf.push(v);
        self
    }

    pub fn u16(&mut self, v: u16) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn raw(&mut self, bytes: &[u8]) -> &mut Self {
        self.buf.extend_from_slice(bytes);
        self
    }

    /// 32-bit length prefix, then the bytes.
    pub fn bytes(&mut self, bytes: &[u8]) -> &mut Self {
        self.u32(bytes.len() as u32);
        self.raw(bytes)
    }

    pub fn str(&mut self, s: &str) -> &mut Self {
        self.bytes(s.as_bytes())
    }

    /// Minimal big-endian bytes with a length prefix.
    pub fn big(&mut self, v: &BigUint) -> &mut Self {
        self.bytes(&v.to_bytes_be())
    }

    pub fn fixed(&mut self, v: &BigUint, width: usize) -> &mut Self {
        self.raw(&arith::to_fixed_bytes(v, width))
    }

    pub fn finish(&mut self) -> Vec<u8> {
        std::mem::take(&mut self.buf)
    }
}

/// Cursor over a payload; every read is bounds-checked.
#[derive(Debug)]
pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn raw(&mut self, len: usize) -> Result<&'a [u8], WireError> {
        if self.remaining() < len {
            return Err(WireError::Truncated);
        }
        let out = &self.buf[self.pos..self.pos + len];
        self.pos += len;
        Ok(out)
    }

    pub fn array<const N: usize>(&mut self) -> Result<[u8; N], WireError> {
        Ok(self.raw(N)?.try_into().expect("length checked"))
    }

    pub fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.raw(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16, WireError> {
        Ok(u16::from_be_bytes(self.array()?))
    }

    pub fn u32(&mut self) -> Result<u32, WireError> {
        Ok(u32::from_be_bytes(self.array()?))
    }

    pub fn u64(&mut self) -> Result<u64, WireError> {
        Ok(u64::from_be_bytes(self.array()?))
    }

    pub fn bytes(&mut self) -> Result<&'a [u8], WireError> {
        let len = self.u32()? as usize;
        self.raw(len)
    }

    pub fn str(&mut self) -> Result<String, WireError> {
        String::from_utf8(self.bytes()?.to_vec()).map_err(|_| WireError::Malformed("string"))
    }

    pub fn big(&mut self) -> Result<BigUint, WireError> {
        Ok(BigUint::from_bytes_be(self.bytes()?))
    }

    pub fn fixed(&mut self, width: usize) -> Result<BigUint, WireError> {
        Ok(arith::from_bytes(self.raw(width)?))
    }

    /// Fails unless the whole payload was consumed.
    pub fn done(&self) -> Result<(), WireError> {
        if self.remaining() == 0 {
            Ok(())
        } else {
            Err(WireError::Malformed("trailing bytes"))
        }
    }
}

pub fn zk_context(dimension: u16, round: u16) -> u32 {
    (u32::from(dimension) << 16) | u32::from(round)
}

pub fn split_zk_context(context: u32) -> (u16, u16) {
    ((context >> 16) as u16, context as u16)
}

fn put_records(w: &mut Writer, records: &[EncryptedCounter], width: usize) {
    for record in records {
        w.fixed(record.count.value(), width).fixed(record.index.value(), width);
    }
}

fn put_pairs(w: &mut Writer, pairs: &[(BigUint, BigUint)], width: usize) {
    for (a, b) in pairs {
        w.fixed(a, width).fixed(b, width);
    }
}

fn take_records(
    r: &mut Reader<'_>,
    pk: &BenalohPublicKey,
    count: usize,
) -> Result<Vec<EncryptedCounter>, WireError> {
    let width = pk.ciphertext_len();
    let values = (0..2 * count).map(|_| r.raw(width).map(arith::from_bytes)).collect::<Result<Vec<_>, _>>()?;
    let mut cts = pk.ciphertexts(values).map_err(|_| WireError::Malformed("ciphertext"))?.into_iter();
    Ok(std::iter::from_fn(|| Some(EncryptedCounter { count: cts.next()?, index: cts.next()? })).collect())
}

fn take_pairs(r: &mut Reader<'_>, count: usize, width: usize) -> Result<Vec<(BigUint, BigUint)>, WireError> {
    (0..count).map(|_| Ok((r.fixed(width)?, r.fixed(width)?))).collect()
}

fn zk_frame(tag: Tag, dimension: u16, round: u16, snapshot: bool, payload: Vec<u8>) -> Frame {
    Frame {
        tag,
        flags: if snapshot { FLAG_SNAPSHOT } else { 0 },
        context: zk_context(dimension, round),
        payload,
    }
}

/// `P_prev || P_next`: exactly `4 b W` payload bytes.
pub fn encode_commit(pk: &BenalohPublicKey, dimension: u16, round: u16, snapshot: bool, c: &Commitment) -> Frame {
    let width = pk.ciphertext_len();
    let mut w = Writer::new();
    put_records(&mut w, &c.prev, width);
    put_records(&mut w, &c.next, width);
    zk_frame(Tag::ZkCommit, dimension, round, snapshot, w.finish())
}

pub fn decode_commit(pk: &BenalohPublicKey, frame: &Frame) -> Result<Commitment, WireError> {
    let mut r = frame.expect(Tag::ZkCommit)?;
    let quarter = 4 * pk.ciphertext_len();
    if frame.payload.is_empty() || frame.payload.len() % quarter != 0 {
        return Err(WireError::Malformed("commitment"));
    }
    let b = frame.payload.len() / quarter;
    let prev = take_records(&mut r, pk, b)?;
    let next = take_records(&mut r, pk, b)?;
    r.done()?;
    Ok(Commitment { prev, next })
}

/// One byte: the challenge bit.
pub fn encode_challenge(dimension: u16, round: u16, snapshot: bool, challenge: Challenge) -> Frame {
    let mut frame = zk_frame(Tag::ZkChallenge, dimension, round, snapshot, vec![challenge.bit()]);
    if challenge == Challenge::Link {
        frame.flags |= FLAG_LINK;
    }
    frame
}

pub fn decode_challenge(frame: &Frame) -> Result<Challenge, WireError> {
    let mut r = frame.expect(Tag::ZkChallenge)?;
    let challenge = match r.u8()? {
        0 => Challenge::Open,
        1 => Challenge::Link,
        _ => return Err(WireError::Malformed("challenge")),
    };
    r.done()?;
    Ok(challenge)
}

/// Challenge 0: `t || w`, `4 b W` bytes. Challenge 1: 4-byte position, the
/// `2 b W` linking factors, and in snapshot mode one more `W`-byte masked
/// blinding factor.
pub fn encode_reveal(pk: &BenalohPublicKey, dimension: u16, round: u16, snapshot: bool, reveal: &Reveal) -> Frame {
    let width = pk.ciphertext_len();
    let mut w = Writer::new();
    let mut link = false;
    match reveal {
        Reveal::Openings { prev, next } => {
            put_pairs(&mut w, prev, width);
            put_pairs(&mut w, next, width);
        }
        Reveal::Links { factors, position, blinding } => {
            link = true;
            w.u32(*position);
            put_pairs(&mut w, factors, width);
            if let Some(m) = blinding {
                w.fixed(m, width);
            }
        }
    }
    let mut frame = zk_frame(Tag::ZkReveal, dimension, round, snapshot, w.finish());
    if link {
        frame.flags |= FLAG_LINK;
    }
    frame
}

pub fn decode_reveal(pk: &BenalohPublicKey, frame: &Frame) -> Result<Reveal, WireError> {
    let mut r = frame.expect(Tag::ZkReveal)?;
    let width = pk.ciphertext_len();
    let len = frame.payload.len();
    if frame.flags & FLAG_LINK == 0 {
        if len == 0 || len % (4 * width) != 0 {
            return Err(WireError::Malformed("opening"));
        }
        let b = len / (4 * width);
        let prev = take_pairs(&mut r, b, width)?;
        let next = take_pairs(&mut r, b, width)?;
        r.done()?;
        return Ok(Reveal::Openings { prev, next });
    }
    let extra = if frame.flags & FLAG_SNAPSHOT != 0 { width } else { 0 };
    let body = len.checked_sub(4 + extra).ok_or(WireError::Malformed("link"))?;
    if body == 0 || body % (2 * width) != 0 {
        return Err(WireError::Malformed("link"));
    }
    let position = r.u32()?;
    let factors = take_pairs(&mut r, body / (2 * width), width)?;
    let blinding = if extra > 0 { Some(r.fixed(width)?) } else { None };
    r.done()?;
    Ok(Reveal::Links { factors, position, blinding })
}

/// Dimension count, then per set: dimension id, check-in count, record
/// count, then the `2 b W` bytes of [`CounterSet::to_bytes`].
pub fn put_counter_sets(w: &mut Writer, pk: &BenalohPublicKey, sets: &[CounterSet]) {
    w.u16(sets.len() as u16);
    for set in sets {
        w.u16(set.dimension).u32(set.check_ins).u16(set.len() as u16);
        w.raw(&set.to_bytes(pk));
    }
}

pub fn take_counter_sets(r: &mut Reader<'_>, pk: &BenalohPublicKey) -> Result<Vec<CounterSet>, WireError> {
    let dims = r.u16()? as usize;
    let width = pk.ciphertext_len();
    (0..dims)
        .map(|_| {
            let dimension = r.u16()?;
            let check_ins = r.u32()?;
            let b = r.u16()? as usize;
            let bytes = r.raw(2 * b * width)?;
            CounterSet::from_bytes(pk, dimension, check_ins, bytes).map_err(|_| WireError::Malformed("counter set"))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benaloh::keygen;
    use crate::lcp::{init_counters, reencrypt_and_increment, DimensionSpec, SubRange};
    use crate::zk::{HonestProver, Prover, Statement};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn header_layout() {
        let frame = Frame { tag: Tag::Token, flags: 3, context: 0x01020304, payload: vec![9, 8] };
        let bytes = frame.to_bytes();
        assert_eq!(bytes, vec![0x13, 3, 1, 2, 3, 4, 0, 0, 0, 2, 9, 8]);
        assert_eq!(Frame::from_bytes(&bytes).unwrap(), frame);
        assert_eq!(Frame::from_bytes(&bytes[..11]), Err(WireError::Truncated));
        assert_eq!(Frame::from_bytes(&[0x77; 10]), Err(WireError::UnknownTag(0x77)));
    }

    #[test]
    fn reader_bounds() {
        let mut w = Writer::new();
        w.u16(7).str("abc").big(&BigUint::from(300u32));
        let bytes = w.finish();
        let mut r = Reader::new(&bytes);
        assert_eq!(r.u16().unwrap(), 7);
        assert_eq!(r.str().unwrap(), "abc");
        assert_eq!(r.big().unwrap(), BigUint::from(300u32));
        r.done().unwrap();
        assert_eq!(r.u8(), Err(WireError::Truncated));
        let mut short = Reader::new(&[0, 0, 0, 9, 1]);
        assert_eq!(short.bytes(), Err(WireError::Truncated));
    }

    #[test]
    fn zk_frames_round_trip_with_exact_sizes() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let pair = keygen(7, 128, &mut rng).unwrap();
        let pk = &pair.public;
        let width = pk.ciphertext_len();
        let b = 5;
        let spec = DimensionSpec::interval("x", (0..=b).map(|v| v as f64).collect()).unwrap();
        let prev = init_counters(pk, 0, &spec, &mut rng).unwrap();
        let (next, witness) = reencrypt_and_increment(pk, &prev, SubRange(2), &mut rng).unwrap();
        let statement = Statement::new(pk.clone(), prev, next, false).unwrap();
        let mut prover = HonestProver::new(statement, witness).unwrap();
        for challenge in [Challenge::Open, Challenge::Link] {
            let commitment = prover.commit(&mut rng).unwrap();
            let frame = encode_commit(pk, 3, 9, false, &commitment);
            assert_eq!(frame.payload.len(), 4 * b * width);
            assert_eq!(split_zk_context(frame.context), (3, 9));
            assert_eq!(decode_commit(pk, &Frame::from_bytes(&frame.to_bytes()).unwrap()).unwrap(), commitment);

            let cframe = encode_challenge(3, 9, false, challenge);
            assert_eq!(cframe.payload.len(), 1);
            assert_eq!(decode_challenge(&cframe).unwrap(), challenge);

            let reveal = prover.respond(challenge).unwrap();
            let rframe = encode_reveal(pk, 3, 9, false, &reveal);
            let expected = match challenge {
                Challenge::Open => 4 * b * width,
                Challenge::Link => 2 * b * width + 4,
            };
            assert_eq!(rframe.payload.len(), expected);
            assert_eq!(decode_reveal(pk, &rframe).unwrap(), reveal);
        }
    }

    #[test]
    fn snapshot_link_reveal_carries_blinding() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let pair = keygen(7, 128, &mut rng).unwrap();
        let pk = &pair.public;
        let reveal = Reveal::Links {
            factors: vec![(BigUint::from(3u32), BigUint::from(5u32)); 2],
            position: 1,
            blinding: Some(BigUint::from(11u32)),
        };
        let frame = encode_reveal(pk, 0, 0, true, &reveal);
        assert_eq!(frame.flags, FLAG_SNAPSHOT | FLAG_LINK);
        assert_eq!(frame.payload.len(), 4 + 4 * pk.ciphertext_len() + pk.ciphertext_len());
        assert_eq!(decode_reveal(pk, &frame).unwrap(), reveal);
    }

    #[test]
    fn malformed_zk_payloads() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let pair = keygen(7, 128, &mut rng).unwrap();
        let pk = &pair.public;
        let bad = Frame::new(Tag::ZkCommit, vec![1; 7]);
        assert!(decode_commit(pk, &bad).is_err());
        assert!(decode_challenge(&Frame::new(Tag::ZkChallenge, vec![2])).is_err());
        assert!(decode_reveal(pk, &Frame::new(Tag::ZkCommit, vec![])).is_err());
    }
}
