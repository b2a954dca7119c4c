//! Byte-oriented rANS entropy coder driven by integer CDF tables.
//!
//! 32-bit state, 16-bit probability precision, 8-bit renormalization and a
//! 4-byte state flush. The encoder walks the symbol stream in reverse and
//! reverses its output, so the decoder consumes symbols and payload bytes
//! strictly forward: order-in equals order-out. Everything is integer
//! arithmetic, so identical (symbols, tables) produce identical payload
//! bytes on every platform. Per-channel tables are rebuilt from transmitted
//! (mu, sigma) on the decode side and never serialized.

use crate::error::{Error, Result};
use crate::gaussian::CdfTable;
use crate::tensor::Tensor;

/// Lower bound of the coder's normalization interval.
const RANS_L: u32 = 1 << 23;

/// Bytes appended by the final state flush.
pub const FLUSH_BYTES: usize = 4;

struct RansEncoder {
    state: u32,
    // Bytes in emission order; reversed once at the end.
    out: Vec<u8>,
}

impl RansEncoder {
    fn new(capacity: usize) -> Self {
        RansEncoder {
            state: RANS_L,
            out: Vec::with_capacity(capacity + FLUSH_BYTES),
        }
    }

    #[inline]
    fn put(&mut self, start: u32, freq: u32) {
        debug_assert!(freq > 0);
        let x_max = ((RANS_L >> CdfTable::SCALE_BITS) << 8) * freq;
        while self.state >= x_max {
            self.out.push((self.state & 0xFF) as u8);
            self.state >>= 8;
        }
        self.state = ((self.state / freq) << CdfTable::SCALE_BITS) + (self.state % freq) + start;
    }

    fn finish(mut self) -> Vec<u8> {
        self.out.push((self.state >> 24) as u8);
        self.out.push((self.state >> 16) as u8);
        self.out.push((self.state >> 8) as u8);
        self.out.push(self.state as u8);
        self.out.reverse();
        self.out
    }
}

struct RansDecoder<'a> {
    state: u32,
    input: &'a [u8],
    pos: usize,
}

impl<'a> RansDecoder<'a> {
    fn new(payload: &'a [u8]) -> Result<Self> {
        if payload.len() < FLUSH_BYTES {
            return Err(Error::corrupt(format!(
                "payload of {} bytes is shorter than the state flush",
                payload.len()
            )));
        }
        let state = u32::from_le_bytes([payload[0], payload[1], payload[2], payload[3]]);
        if state < RANS_L {
            return Err(Error::corrupt("initial coder state below normalization interval"));
        }
        Ok(RansDecoder {
            state,
            input: payload,
            pos: FLUSH_BYTES,
        })
    }

    #[inline]
    fn get(&mut self, table: &CdfTable) -> Result<u16> {
        let mask = CdfTable::TOTAL - 1;
        let slot = self.state & mask;
        let symbol = table.lookup(slot);
        let start = table.cum(symbol);
        let freq = table.freq(symbol);
        self.state = freq * (self.state >> CdfTable::SCALE_BITS) + slot - start;
        while self.state < RANS_L {
            if self.pos >= self.input.len() {
                return Err(Error::corrupt("payload exhausted mid-stream"));
            }
            self.state = (self.state << 8) | self.input[self.pos] as u32;
            self.pos += 1;
        }
        Ok(symbol)
    }

    /// The stream must land back on the initial encoder state with every
    /// byte consumed, otherwise payload and tables were out of sync.
    fn finish(self) -> Result<()> {
        if self.state != RANS_L || self.pos != self.input.len() {
            return Err(Error::corrupt("coder state desynchronized from tables"));
        }
        Ok(())
    }
}

fn check_symbol(symbol: u16, table: &CdfTable) -> Result<()> {
    if symbol as usize >= table.alphabet_size() {
        return Err(Error::domain(format!(
            "symbol {symbol} outside table alphabet of {}",
            table.alphabet_size()
        )));
    }
    Ok(())
}

/// Encode a flat symbol slice against one table.
pub fn rans_encode_slice(symbols: &[u16], table: &CdfTable) -> Result<Vec<u8>> {
    for &s in symbols {
        check_symbol(s, table)?;
    }
    let mut enc = RansEncoder::new(symbols.len() / 2);
    for &s in symbols.iter().rev() {
        enc.put(table.cum(s), table.freq(s));
    }
    Ok(enc.finish())
}

/// Decode `count` symbols against one table.
pub fn rans_decode_slice(payload: &[u8], table: &CdfTable, count: usize) -> Result<Vec<u16>> {
    let mut dec = RansDecoder::new(payload)?;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        out.push(dec.get(table)?);
    }
    dec.finish()?;
    Ok(out)
}

/// Encode a symbol tensor channel-major, channel `c` using `tables[c]`.
pub fn rans_encode(symbols: &Tensor<u16>, tables: &[CdfTable]) -> Result<Vec<u8>> {
    if tables.len() != symbols.channels() {
        return Err(Error::shape(format!(
            "{} tables for {} channels",
            tables.len(),
            symbols.channels()
        )));
    }
    for c in 0..symbols.channels() {
        for &s in symbols.channel(c) {
            check_symbol(s, &tables[c])?;
        }
    }
    let plane = symbols.height() * symbols.width();
    let mut enc = RansEncoder::new(symbols.len() / 2);
    for (i, &s) in symbols.data().iter().enumerate().rev() {
        let table = &tables[i / plane];
        enc.put(table.cum(s), table.freq(s));
    }
    Ok(enc.finish())
}

/// Decode a payload produced by [`rans_encode`] with the same tables.
pub fn rans_decode(payload: &[u8], tables: &[CdfTable], dims: (usize, usize, usize)) -> Result<Tensor<u16>> {
    let (c, h, w) = dims;
    if tables.len() != c {
        return Err(Error::shape(format!("{} tables for {c} channels", tables.len())));
    }
    let mut dec = RansDecoder::new(payload)?;
    let mut data = Vec::with_capacity(c * h * w);
    for table in tables {
        for _ in 0..h * w {
            data.push(dec.get(table)?);
        }
    }
    dec.finish()?;
    Tensor::new(dims, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{symbol_distribution, ChannelGaussian};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_table(rng: &mut ChaCha8Rng, q: u8) -> CdfTable {
        let size = 1usize << q;
        let mut freqs: Vec<u32> = (0..size).map(|_| rng.random_range(1..200u32)).collect();
        let sum: u64 = freqs.iter().map(|&f| f as u64).sum();
        // scale roughly, then fix the first entry to land exactly on TOTAL
        let mut total = 0u64;
        for f in freqs.iter_mut() {
            *f = ((*f as u64 * (CdfTable::TOTAL as u64 - size as u64) / sum) + 1) as u32;
            total += *f as u64;
        }
        let diff = CdfTable::TOTAL as u64 - total;
        freqs[0] += diff as u32;
        CdfTable::from_frequencies(&freqs).unwrap()
    }

    #[test]
    fn empty_stream_is_flush_only() {
        let table = CdfTable::from_gaussian(2.0, 1.0, 2).unwrap();
        let payload = rans_encode_slice(&[], &table).unwrap();
        assert_eq!(payload.len(), FLUSH_BYTES);
        assert_eq!(rans_decode_slice(&payload, &table, 0).unwrap(), Vec::<u16>::new());
    }

    #[test]
    fn single_symbol_round_trip() {
        let table = CdfTable::from_gaussian(1.0, 0.5, 2).unwrap();
        for s in 0..4u16 {
            let payload = rans_encode_slice(&[s], &table).unwrap();
            assert_eq!(rans_decode_slice(&payload, &table, 1).unwrap(), vec![s]);
        }
    }

    #[test]
    fn slice_round_trip_randomized() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..100 {
            let q = rng.random_range(2..=8u8);
            let table = random_table(&mut rng, q);
            let n = rng.random_range(0..500usize);
            let symbols: Vec<u16> = (0..n).map(|_| rng.random_range(0..(1u16 << q))).collect();
            let payload = rans_encode_slice(&symbols, &table).unwrap();
            assert_eq!(rans_decode_slice(&payload, &table, n).unwrap(), symbols);
        }
    }

    #[test]
    fn tensor_round_trip_with_per_channel_tables() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..30 {
            let dims = (
                rng.random_range(1..5usize),
                rng.random_range(1..8usize),
                rng.random_range(1..8usize),
            );
            let q = 6u8;
            let tables: Vec<CdfTable> = (0..dims.0).map(|_| random_table(&mut rng, q)).collect();
            let n = dims.0 * dims.1 * dims.2;
            let t = Tensor::new(dims, (0..n).map(|_| rng.random_range(0..(1u16 << q))).collect()).unwrap();
            let payload = rans_encode(&t, &tables).unwrap();
            assert_eq!(rans_decode(&payload, &tables, dims).unwrap(), t);
        }
    }

    #[test]
    fn payload_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let table = random_table(&mut rng, 8);
        let symbols: Vec<u16> = (0..1000).map(|_| rng.random_range(0..256u16)).collect();
        let a = rans_encode_slice(&symbols, &table).unwrap();
        let b = rans_encode_slice(&symbols, &table).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn known_payload_frozen() {
        // Uniform 4-symbol table, a fixed 8-symbol stream: freezing the exact
        // payload pins the coder's normalization/flush conventions.
        let table = CdfTable::from_frequencies(&[16384, 16384, 16384, 16384]).unwrap();
        let payload = rans_encode_slice(&[0, 1, 2, 3, 3, 2, 1, 0], &table).unwrap();
        assert_eq!(payload, vec![0x41, 0x3E, 0x80, 0x00, 0x80, 0x00]);
        assert_eq!(rans_decode_slice(&payload, &table, 8).unwrap(), vec![0, 1, 2, 3, 3, 2, 1, 0]);
    }

    #[test]
    fn symbol_outside_alphabet_is_domain_error() {
        let table = CdfTable::from_gaussian(1.0, 1.0, 2).unwrap();
        assert!(matches!(rans_encode_slice(&[4], &table), Err(Error::Domain(_))));
    }

    #[test]
    fn truncated_payload_is_corruption() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let table = random_table(&mut rng, 8);
        let symbols: Vec<u16> = (0..4000).map(|_| rng.random_range(0..256u16)).collect();
        let payload = rans_encode_slice(&symbols, &table).unwrap();
        let truncated = &payload[..payload.len() - 2];
        assert!(rans_decode_slice(truncated, &table, symbols.len()).is_err());
        assert!(matches!(rans_decode_slice(&payload[..2], &table, 1), Err(Error::Corrupt(_))));
    }

    #[test]
    fn leftover_bytes_are_desynchronization() {
        let table = CdfTable::from_frequencies(&[32768, 32768]).unwrap();
        let symbols = vec![0u16, 1, 0, 1];
        let mut payload = rans_encode_slice(&symbols, &table).unwrap();
        payload.push(0xAB);
        assert!(matches!(
            rans_decode_slice(&payload, &table, symbols.len()),
            Err(Error::Corrupt(_))
        ));
    }

    #[test]
    fn payload_tracks_table_cross_entropy() {
        // Model-matched data: payload within 1% + flush of the table's
        // information content, and under the loose granularity bound.
        let (mu, sigma, q) = (128.0f32, 20.0f32, 8u8);
        let probs = symbol_distribution(mu, sigma, q);
        let mut cdf = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for &p in &probs {
            acc += p;
            cdf.push(acc);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        let n = 100_000usize;
        let symbols: Vec<u16> = (0..n)
            .map(|_| {
                let u: f64 = rng.random();
                cdf.partition_point(|&c| c <= u).min(probs.len() - 1) as u16
            })
            .collect();
        let table = CdfTable::from_gaussian(mu, sigma, q).unwrap();
        let payload = rans_encode_slice(&symbols, &table).unwrap();
        let payload_bits = payload.len() as f64 * 8.0;

        let table_bits: f64 = symbols.iter().map(|&s| -table.probability(s).log2()).sum();
        assert!(
            payload_bits <= table_bits * 1.01 + (FLUSH_BYTES * 8) as f64,
            "payload {payload_bits} vs table cross-entropy {table_bits}"
        );
        // worst-case granularity bound against the true model probabilities
        let model = ChannelGaussian::new(vec![mu], vec![sigma]).unwrap();
        let t = Tensor::new((1, 1, n), symbols).unwrap();
        let model_bits = crate::gaussian::estimate_bits_gaussian(&t, &model, q).unwrap();
        assert!(payload_bits <= model_bits + n as f64 + (FLUSH_BYTES * 8) as f64);
    }
}
