//! Random linear network coding over the m data blocks of each source, as
//! used in the star network: encoding, synchronized coefficient streams,
//! bitwise superposition, and per-source receivers that strip their own
//! contribution and decode by rank.
//!
//! Binary/q-ary views: bit `t*l + i` of a block is bit `i` of q-ary symbol `t`.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::galois::{Element, GaloisField, IncrementalSolver};

/// A binary block of `len` bits packed into 64-bit words, bit `i` of the
/// block at bit `i % 64` of word `i / 64`. Bits past `len` are zero.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitBlock {
    len: usize,
    words: Vec<u64>,
}

impl BitBlock {
    pub fn zeros(len: usize) -> Self {
        Self { len, words: vec![0; len.div_ceil(64)] }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut b = Self::zeros(bits.len());
        for (i, &bit) in bits.iter().enumerate() {
            b.set(i, bit);
        }
        b
    }

    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        let mut b = Self::zeros(len);
        for w in &mut b.words {
            *w = rng.next_u64();
        }
        b.clear_tail();
        b
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub(crate) fn words_mut(&mut self) -> &mut [u64] {
        &mut self.words
    }

    pub fn get(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, bit: bool) {
        let mask = 1u64 << (i % 64);
        if bit {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn xor_assign(&mut self, other: &BitBlock) -> Result<()> {
        if self.len != other.len {
            return Err(Error::Dimension(format!(
                "blocks of {} and {} bits",
                self.len, other.len
            )));
        }
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
        Ok(())
    }

    pub(crate) fn clear_tail(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    /// q-ary view: `len / l` symbols of `l` bits each.
    pub fn to_symbols(&self, degree: u32) -> Result<Vec<Element>> {
        let l = degree as usize;
        if l == 0 || l > 16 || self.len % l != 0 {
            return Err(Error::Dimension(format!(
                "{} bits do not split into {l}-bit symbols",
                self.len
            )));
        }
        Ok((0..self.len / l)
            .map(|t| (0..l).fold(0, |s, i| s | (Element::from(self.get(t * l + i)) << i)))
            .collect())
    }

    /// Binary view of `l`-bit symbols.
    pub fn from_symbols(symbols: &[Element], degree: u32) -> Result<Self> {
        let l = degree as usize;
        if l == 0 || l > 16 {
            return Err(Error::Config(format!("symbol width {l} out of range")));
        }
        if let Some(bad) = symbols.iter().find(|&&s| l < 16 && usize::from(s) >> l != 0) {
            return Err(Error::Dimension(format!("symbol {bad} wider than {l} bits")));
        }
        let mut b = Self::zeros(symbols.len() * l);
        for (t, &s) in symbols.iter().enumerate() {
            for i in 0..l {
                b.set(t * l + i, s >> i & 1 == 1);
            }
        }
        Ok(b)
    }
}

/// Modulo-2 sum of equal-length binary blocks.
pub fn superpose(blocks: &[BitBlock]) -> Result<BitBlock> {
    let first = blocks
        .first()
        .ok_or_else(|| Error::Dimension("nothing to superpose".into()))?;
    let mut out = first.clone();
    for b in &blocks[1..] {
        out.xor_assign(b)?;
    }
    Ok(out)
}

/// A source's K-bit message split into m data blocks of K/(m l) symbols.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceMessage {
    source_id: usize,
    degree: u32,
    blocks: Vec<Vec<Element>>,
}

impl SourceMessage {
    /// Splits `bits` into `m` blocks. Requires `m * l` to divide the message length.
    pub fn from_bits(source_id: usize, bits: &BitBlock, m: usize, field: &GaloisField) -> Result<Self> {
        let l = field.degree() as usize;
        if m == 0 || bits.len() % (m * l) != 0 {
            return Err(Error::Config(format!(
                "message of {} bits is not divisible into {m} blocks of {l}-bit symbols",
                bits.len()
            )));
        }
        let symbols = bits.to_symbols(field.degree())?;
        let per_block = symbols.len() / m;
        let blocks = symbols.chunks(per_block.max(1)).take(m).map(<[Element]>::to_vec).collect();
        Ok(Self { source_id, degree: field.degree(), blocks })
    }

    pub fn from_blocks(source_id: usize, blocks: Vec<Vec<Element>>, field: &GaloisField) -> Result<Self> {
        let len = blocks.first().map_or(0, Vec::len);
        if blocks.is_empty() || blocks.iter().any(|b| b.len() != len) {
            return Err(Error::Dimension("data blocks must be non-empty and equal length".into()));
        }
        if blocks.iter().flatten().any(|&s| !field.contains(s)) {
            return Err(Error::Dimension("symbol outside the field".into()));
        }
        Ok(Self { source_id, degree: field.degree(), blocks })
    }

    pub fn random<R: Rng + ?Sized>(
        source_id: usize,
        m: usize,
        symbols_per_block: usize,
        field: &GaloisField,
        rng: &mut R,
    ) -> Self {
        let q = field.size();
        let blocks = (0..m)
            .map(|_| (0..symbols_per_block).map(|_| rng.gen_range(0..q) as Element).collect())
            .collect();
        Self { source_id, degree: field.degree(), blocks }
    }

    pub fn source_id(&self) -> usize {
        self.source_id
    }

    pub fn blocks(&self) -> &[Vec<Element>] {
        &self.blocks
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn symbols_per_block(&self) -> usize {
        self.blocks[0].len()
    }

    /// The message bits, blocks in order.
    pub fn to_bits(&self) -> BitBlock {
        BitBlock::from_symbols(&self.blocks.concat(), self.degree).expect("symbols fit the field")
    }
}

/// Network-coded block `sum_j coeffs[j] * block_j`.
pub fn encode_block(field: &GaloisField, msg: &SourceMessage, coeffs: &[Element]) -> Result<Vec<Element>> {
    if coeffs.len() != msg.block_count() {
        return Err(Error::Dimension(format!(
            "{} coefficients for {} data blocks",
            coeffs.len(),
            msg.block_count()
        )));
    }
    let mut out = vec![0; msg.symbols_per_block()];
    for (block, &c) in msg.blocks().iter().zip(coeffs) {
        field.mul_add_slice(&mut out, block, c);
    }
    Ok(out)
}

/// Pseudo-random coefficient vectors of one source, addressed by block index.
///
/// The generator is keyed by `(seed, block index)`, so any party holding the
/// seed reproduces the vector for block `b` without replaying earlier ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoefficientStream {
    source_id: usize,
    seed: u64,
    degree: u32,
    m: usize,
}

impl CoefficientStream {
    pub fn new(source_id: usize, seed: u64, field: &GaloisField, m: usize) -> Self {
        Self { source_id, seed, degree: field.degree(), m }
    }

    pub fn source_id(&self) -> usize {
        self.source_id
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    /// Writes the coefficient vector of block `b` into `out` (length m).
    pub fn fill(&self, b: u64, out: &mut [Element]) {
        debug_assert_eq!(out.len(), self.m);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(b);
        let mask = ((1u32 << self.degree) - 1) as Element;
        let mut i = 0;
        while i < out.len() {
            let word = rng.next_u64();
            for k in 0..4 {
                if i == out.len() {
                    break;
                }
                out[i] = (word >> (16 * k)) as Element & mask;
                i += 1;
            }
        }
    }

    pub fn coefficients(&self, b: u64) -> Vec<Element> {
        let mut v = vec![0; self.m];
        self.fill(b, &mut v);
        v
    }
}

/// Outcome of handing one received block to a [`ReceiverState`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ingest {
    /// The block raised the rank.
    Innovative,
    /// The block was stored but was linearly dependent.
    Redundant,
    /// The block index had already been ingested; nothing changed.
    Duplicate,
    /// The receiver was already able to decode; the block was discarded.
    AlreadyDecodable,
}

/// Decoder state of one source: the perceived generator matrix restricted to
/// the (Y-1)m blocks of the other sources, and the matching received symbols.
///
/// Each stored block is one equation `coeffs . unknowns = symbols`, where the
/// unknowns are the other sources' data blocks ordered by source id, then
/// block index.
#[derive(Debug, Clone)]
pub struct ReceiverState {
    field: Arc<GaloisField>,
    owner: usize,
    sources: usize,
    m: usize,
    solver: IncrementalSolver,
    seen: BTreeSet<u64>,
    stored: usize,
    duplicates: usize,
    coeff_buf: Vec<Element>,
}

impl ReceiverState {
    /// `owner` indexes the sources `0..sources`. `symbols_per_block` may be 0
    /// for rank-only tracking.
    pub fn new(field: Arc<GaloisField>, owner: usize, sources: usize, m: usize, symbols_per_block: usize) -> Result<Self> {
        if owner >= sources {
            return Err(Error::Config(format!("owner {owner} not among {sources} sources")));
        }
        if m == 0 {
            return Err(Error::Config("m must be at least 1".into()));
        }
        let unknowns = (sources - 1) * m;
        Ok(Self {
            field,
            owner,
            sources,
            m,
            solver: IncrementalSolver::new(unknowns, symbols_per_block),
            seen: BTreeSet::new(),
            stored: 0,
            duplicates: 0,
            coeff_buf: vec![0; unknowns],
        })
    }

    pub fn owner(&self) -> usize {
        self.owner
    }

    /// m' = (Y-1) m.
    pub fn unknowns(&self) -> usize {
        self.solver.unknowns()
    }

    pub fn rank(&self) -> usize {
        self.solver.rank()
    }

    /// Number of stored (correctly received, non-duplicate) blocks.
    pub fn stored(&self) -> usize {
        self.stored
    }

    pub fn duplicates(&self) -> usize {
        self.duplicates
    }

    pub fn is_decodable(&self) -> bool {
        self.solver.is_full_rank()
    }

    /// Ingests the superposition of all sources' coded blocks for block index `b`.
    ///
    /// `streams[i]` must be source `i`'s coefficient stream and `own` the
    /// owner's message.
    pub fn ingest(
        &mut self,
        b: u64,
        superposed: &[Element],
        streams: &[CoefficientStream],
        own: &SourceMessage,
    ) -> Result<Ingest> {
        if streams.len() != self.sources {
            return Err(Error::Dimension(format!(
                "{} coefficient streams for {} sources",
                streams.len(),
                self.sources
            )));
        }
        if superposed.len() != self.solver.payload_len() {
            return Err(Error::Dimension(format!(
                "block has {} symbols, expected {}",
                superposed.len(),
                self.solver.payload_len()
            )));
        }
        if let Some(early) = self.precheck(b) {
            return Ok(early);
        }
        let own_coeffs = streams[self.owner].coefficients(b);
        let mut residual = superposed.to_vec();
        let own_part = encode_block(&self.field, own, &own_coeffs)?;
        for (r, o) in residual.iter_mut().zip(&own_part) {
            *r ^= o;
        }
        self.gather_coefficients(b, streams);
        self.store(b, residual)
    }

    /// Rank-only ingestion: same bookkeeping as [`ReceiverState::ingest`] with no payload.
    pub fn ingest_coefficients(&mut self, b: u64, streams: &[CoefficientStream]) -> Result<Ingest> {
        if streams.len() != self.sources {
            return Err(Error::Dimension(format!(
                "{} coefficient streams for {} sources",
                streams.len(),
                self.sources
            )));
        }
        if let Some(early) = self.precheck(b) {
            return Ok(early);
        }
        self.gather_coefficients(b, streams);
        self.store(b, Vec::new())
    }

    /// Ingests an explicit coefficient vector over the (Y-1)m unknowns.
    pub fn ingest_column(&mut self, b: u64, coeffs: &[Element], symbols: &[Element]) -> Result<Ingest> {
        if coeffs.len() != self.unknowns() {
            return Err(Error::Dimension(format!(
                "{} coefficients for {} unknowns",
                coeffs.len(),
                self.unknowns()
            )));
        }
        if let Some(early) = self.precheck(b) {
            return Ok(early);
        }
        self.coeff_buf.copy_from_slice(coeffs);
        self.store(b, symbols.to_vec())
    }

    fn precheck(&mut self, b: u64) -> Option<Ingest> {
        if self.seen.contains(&b) {
            self.duplicates += 1;
            log::warn!("receiver {} ignored duplicate block {b}", self.owner);
            return Some(Ingest::Duplicate);
        }
        if self.is_decodable() {
            return Some(Ingest::AlreadyDecodable);
        }
        None
    }

    fn gather_coefficients(&mut self, b: u64, streams: &[CoefficientStream]) {
        let m = self.m;
        let mut slot = 0;
        for (i, s) in streams.iter().enumerate() {
            if i == self.owner {
                continue;
            }
            s.fill(b, &mut self.coeff_buf[slot * m..(slot + 1) * m]);
            slot += 1;
        }
    }

    fn store(&mut self, b: u64, payload: Vec<Element>) -> Result<Ingest> {
        let grew = self.solver.insert(&self.field, &self.coeff_buf, &payload)?;
        self.seen.insert(b);
        self.stored += 1;
        Ok(if grew { Ingest::Innovative } else { Ingest::Redundant })
    }

    /// Recovers the other sources' data blocks, as `(source index, blocks)`
    /// pairs in source order.
    pub fn decode(&self) -> Result<Vec<(usize, Vec<Vec<Element>>)>> {
        if !self.is_decodable() {
            return Err(Error::State(format!(
                "receiver {} has rank {} of {}",
                self.owner,
                self.rank(),
                self.unknowns()
            )));
        }
        let mut unknowns = self.solver.solve(&self.field)?.into_iter();
        Ok((0..self.sources)
            .filter(|&i| i != self.owner)
            .map(|i| (i, unknowns.by_ref().take(self.m).collect()))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(l: u32) -> Arc<GaloisField> {
        Arc::new(GaloisField::new(l).unwrap())
    }

    #[test]
    fn encode_unit_and_zero_vectors() {
        let f = field(4);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let msg = SourceMessage::random(0, 3, 5, &f, &mut rng);
        for j in 0..3 {
            let mut e = vec![0; 3];
            e[j] = 1;
            assert_eq!(encode_block(&f, &msg, &e).unwrap(), msg.blocks()[j]);
        }
        assert_eq!(encode_block(&f, &msg, &[0, 0, 0]).unwrap(), vec![0; 5]);
        assert!(encode_block(&f, &msg, &[1, 0]).is_err());
    }

    #[test]
    fn encode_gf4_hand_evaluation() {
        // GF(4) table: 2*1 = 2, 3*3 = 2, 2*2 = 3, 3*1 = 3.
        let f = field(2);
        let msg = SourceMessage::from_blocks(0, vec![vec![1, 2], vec![3, 1]], &f).unwrap();
        let out = encode_block(&f, &msg, &[2, 3]).unwrap();
        assert_eq!(out, vec![2 ^ 2, 3 ^ 3]);
        assert_eq!(out, vec![0, 0]);
        let out = encode_block(&f, &msg, &[1, 2]).unwrap();
        // 1*1 + 2*3 = 1 + 1 = 0; 1*2 + 2*1 = 2 + 2 = 0
        assert_eq!(out, vec![0, 0]);
        let out = encode_block(&f, &msg, &[3, 1]).unwrap();
        // 3*1 + 1*3 = 0; 3*2 + 1*1 = 1 + 1 = 0
        assert_eq!(out, vec![0, 0]);
        let out = encode_block(&f, &msg, &[1, 1]).unwrap();
        assert_eq!(out, vec![1 ^ 3, 2 ^ 1]);
    }

    #[test]
    fn superpose_basics() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = BitBlock::random(100, &mut rng);
        assert_eq!(superpose(&[x.clone(), x.clone()]).unwrap(), BitBlock::zeros(100));
        assert_eq!(superpose(std::slice::from_ref(&x)).unwrap(), x);
        assert!(superpose(&[x.clone(), BitBlock::zeros(99)]).is_err());
        assert!(superpose(&[]).is_err());

        let blocks: Vec<BitBlock> = (0..3).map(|_| BitBlock::random(64, &mut rng)).collect();
        let s = superpose(&blocks).unwrap();
        for i in 0..64 {
            let sum: u32 = blocks.iter().map(|b| u32::from(b.get(i))).sum();
            assert_eq!(s.get(i), sum % 2 == 1);
        }
        let mut reversed = blocks.clone();
        reversed.reverse();
        assert_eq!(superpose(&reversed).unwrap(), s);
    }

    #[test]
    fn binary_and_symbol_views_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for l in 1..=16u32 {
            let bits = BitBlock::random(l as usize * 37, &mut rng);
            let symbols = bits.to_symbols(l).unwrap();
            assert_eq!(symbols.len(), 37);
            assert_eq!(BitBlock::from_symbols(&symbols, l).unwrap(), bits);
        }
        assert!(BitBlock::zeros(10).to_symbols(3).is_err());
        assert!(BitBlock::from_symbols(&[4], 2).is_err());
    }

    #[test]
    fn message_requires_divisibility() {
        let f = field(2);
        let bits = BitBlock::zeros(12);
        assert!(SourceMessage::from_bits(0, &bits, 3, &f).is_ok());
        assert!(SourceMessage::from_bits(0, &bits, 4, &f).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let bits = BitBlock::random(48, &mut rng);
        let msg = SourceMessage::from_bits(1, &bits, 4, &f).unwrap();
        assert_eq!(msg.symbols_per_block(), 6);
        assert_eq!(msg.to_bits(), bits);
    }

    #[test]
    fn coefficient_stream_is_order_independent() {
        let f = field(6);
        let s = CoefficientStream::new(0, 99, &f, 7);
        let forward: Vec<_> = (0..50).map(|b| s.coefficients(b)).collect();
        let backward: Vec<_> = (0..50).rev().map(|b| s.coefficients(b)).collect();
        for (b, v) in forward.iter().enumerate() {
            assert_eq!(v, &backward[49 - b]);
            assert!(v.iter().all(|&c| f.contains(c)));
        }
        let other = CoefficientStream::new(1, 100, &f, 7);
        assert_ne!(s.coefficients(3), other.coefficients(3));
    }

    #[test]
    fn coefficient_stream_is_uniform() {
        // Pearson chi-square over GF(16) symbols; 15 degrees of freedom,
        // 99.9% quantile is 37.70.
        let f = field(4);
        let s = CoefficientStream::new(0, 7, &f, 4);
        let mut counts = [0u64; 16];
        let blocks = 25_000u64;
        for b in 0..blocks {
            for c in s.coefficients(b) {
                counts[c as usize] += 1;
            }
        }
        let expected = (blocks * 4) as f64 / 16.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        assert!(chi2 < 37.70, "chi2 = {chi2}");
    }

    #[test]
    fn identity_columns_make_receiver_decodable() {
        let f = field(4);
        let mut rx = ReceiverState::new(f.clone(), 0, 3, 2, 0).unwrap();
        assert_eq!(rx.unknowns(), 4);
        for i in 0..4 {
            let mut e = vec![0; 4];
            e[i] = 1;
            assert!(!rx.is_decodable());
            assert_eq!(rx.ingest_column(i as u64, &e, &[]).unwrap(), Ingest::Innovative);
        }
        assert!(rx.is_decodable());
        assert_eq!(rx.ingest_column(9, &[1, 1, 1, 1], &[]).unwrap(), Ingest::AlreadyDecodable);
    }

    #[test]
    fn dependent_and_duplicate_columns_leave_rank_unchanged() {
        let f = field(2);
        let mut rx = ReceiverState::new(f, 1, 2, 3, 0).unwrap();
        rx.ingest_column(0, &[1, 2, 3], &[]).unwrap();
        assert_eq!(rx.ingest_column(1, &[2, 3, 1], &[]).unwrap(), Ingest::Redundant);
        assert_eq!(rx.rank(), 1);
        assert_eq!(rx.stored(), 2);
        assert_eq!(rx.ingest_column(1, &[0, 0, 1], &[]).unwrap(), Ingest::Duplicate);
        assert_eq!(rx.rank(), 1);
        assert_eq!(rx.duplicates(), 1);
        assert!(matches!(rx.decode(), Err(Error::State(_))));
    }

    /// Runs one noiseless exchange among `y` sources and returns whether
    /// every receiver recovered every other source exactly.
    fn round_trip(y: usize, m: usize, l: u32, symbols: usize, seed: u64) -> bool {
        let f = field(l);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let msgs: Vec<_> = (0..y).map(|i| SourceMessage::random(i, m, symbols, &f, &mut rng)).collect();
        let streams: Vec<_> = (0..y).map(|i| CoefficientStream::new(i, rng.next_u64(), &f, m)).collect();
        let mut rxs: Vec<_> = (0..y).map(|i| ReceiverState::new(f.clone(), i, y, m, symbols).unwrap()).collect();
        let mut b = 0u64;
        while !rxs.iter().all(ReceiverState::is_decodable) {
            let coded: Vec<BitBlock> = msgs
                .iter()
                .zip(&streams)
                .map(|(msg, s)| {
                    let sym = encode_block(&f, msg, &s.coefficients(b)).unwrap();
                    BitBlock::from_symbols(&sym, l).unwrap()
                })
                .collect();
            let sup = superpose(&coded).unwrap().to_symbols(l).unwrap();
            for (i, rx) in rxs.iter_mut().enumerate() {
                rx.ingest(b, &sup, &streams, &msgs[i]).unwrap();
            }
            b += 1;
        }
        rxs.iter().all(|rx| {
            rx.decode()
                .unwrap()
                .into_iter()
                .all(|(src, blocks)| blocks == msgs[src].blocks())
        })
    }

    #[test]
    fn noiseless_round_trip_two_sources() {
        assert!(round_trip(2, 3, 4, 8, 20));
    }

    #[test]
    fn round_trip_many_messages() {
        let failures = (0..1000).filter(|&s| !round_trip(3, 2, 2, 4, 1000 + s)).count();
        assert_eq!(failures, 0);
    }

    #[test]
    fn decode_reproduces_stored_symbols() {
        let f = field(8);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (y, m, sym) = (3, 2, 5);
        let mut rx = ReceiverState::new(f.clone(), 2, y, m, sym).unwrap();
        let mut stored = Vec::new();
        while !rx.is_decodable() {
            let col: Vec<Element> = (0..4).map(|_| rng.gen_range(0..256) as Element).collect();
            let pay: Vec<Element> = (0..sym).map(|_| rng.gen_range(0..256) as Element).collect();
            if rx.ingest_column(stored.len() as u64, &col, &pay).unwrap() == Ingest::Innovative {
                stored.push((col, pay));
            }
        }
        let decoded: Vec<Vec<Element>> = rx.decode().unwrap().into_iter().flat_map(|(_, b)| b).collect();
        for (col, pay) in stored {
            let mut re = vec![0; sym];
            for (j, &c) in col.iter().enumerate() {
                f.mul_add_slice(&mut re, &decoded[j], c);
            }
            assert_eq!(re, pay);
        }
    }

    #[test]
    fn receiver_rejects_bad_configuration() {
        let f = field(2);
        assert!(ReceiverState::new(f.clone(), 3, 3, 1, 0).is_err());
        assert!(ReceiverState::new(f.clone(), 0, 3, 0, 0).is_err());
        let mut rx = ReceiverState::new(f.clone(), 0, 2, 1, 2).unwrap();
        let streams = vec![CoefficientStream::new(0, 1, &f, 1)];
        let own = SourceMessage::from_blocks(0, vec![vec![0, 0]], &f).unwrap();
        assert!(rx.ingest(0, &[0, 0], &streams, &own).is_err());
    }
}
