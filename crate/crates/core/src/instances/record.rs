//! Length-prefixed, checksummed record files.
//!
//! Each record is framed as
//!
//! ```text
//! u64 LE payload length
//! u32 LE masked CRC32C of the 8 length bytes
//! payload
//! u32 LE masked CRC32C of the payload
//! ```
//!
//! The payload lists named `i32` features: a `u32` feature count, then for each
//! feature a `u8` name length, the name, a `u32` value count and the values.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crc::{Crc, CRC_32_ISCSI};
use thiserror::Error;

use super::PretrainInstance;

const CASTAGNOLI: Crc<u32> = Crc::<u32>::new(&CRC_32_ISCSI);
const MASK_DELTA: u32 = 0xa282_ead8;

pub const FEATURE_NAMES: [&str; 7] = [
    "input_ids",
    "attention_mask",
    "segment_ids",
    "masked_positions",
    "masked_label_ids",
    "masked_weights",
    "next_sentence_label",
];

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("corrupt record {index} at byte {offset}: {reason}")]
    CorruptRecord {
        index: usize,
        offset: u64,
        reason: String,
    },
}

pub fn masked_crc(bytes: &[u8]) -> u32 {
    let crc = CASTAGNOLI.checksum(bytes);
    ((crc >> 15) | (crc << 17)).wrapping_add(MASK_DELTA)
}

fn encode_payload(inst: &PretrainInstance) -> Vec<u8> {
    let label = [inst.next_sentence_label as i32];
    let widen = |xs: &[u8]| xs.iter().map(|&x| x as i32).collect::<Vec<_>>();
    let ids = |xs: &[u32]| xs.iter().map(|&x| x as i32).collect::<Vec<_>>();
    let features: [Vec<i32>; 7] = [
        ids(&inst.input_ids),
        widen(&inst.attention_mask),
        widen(&inst.segment_ids),
        ids(&inst.masked_positions),
        ids(&inst.masked_label_ids),
        widen(&inst.masked_weights),
        label.to_vec(),
    ];
    let mut out = Vec::new();
    out.extend_from_slice(&(features.len() as u32).to_le_bytes());
    for (name, values) in FEATURE_NAMES.iter().zip(&features) {
        out.push(name.len() as u8);
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(values.len() as u32).to_le_bytes());
        for v in values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn decode_payload(bytes: &[u8]) -> Result<PretrainInstance, String> {
    let mut pos = 0usize;
    let mut take = |n: usize| -> Result<&[u8], String> {
        let end = pos.checked_add(n).filter(|&e| e <= bytes.len());
        let end = end.ok_or("payload truncated")?;
        let s = &bytes[pos..end];
        pos = end;
        Ok(s)
    };
    let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().unwrap());
    let count = u32_at(take(4)?) as usize;
    if count != FEATURE_NAMES.len() {
        return Err(format!("expected {} features, found {count}", FEATURE_NAMES.len()));
    }
    let mut features: Vec<Vec<i32>> = Vec::with_capacity(count);
    for expected in FEATURE_NAMES {
        let name_len = take(1)?[0] as usize;
        let name = take(name_len)?;
        if name != expected.as_bytes() {
            return Err(format!(
                "expected feature {expected}, found {}",
                String::from_utf8_lossy(name)
            ));
        }
        let n = u32_at(take(4)?) as usize;
        let raw = take(n.checked_mul(4).ok_or("feature length overflow")?)?;
        features.push(
            raw.chunks_exact(4)
                .map(|c| i32::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        );
    }
    if pos != bytes.len() {
        return Err("trailing bytes after last feature".into());
    }
    let unsigned = |xs: &[i32]| -> Result<Vec<u32>, String> {
        xs.iter()
            .map(|&x| u32::try_from(x).map_err(|_| "negative id".to_string()))
            .collect()
    };
    let narrow = |xs: &[i32]| -> Result<Vec<u8>, String> {
        xs.iter()
            .map(|&x| u8::try_from(x).map_err(|_| "flag out of range".to_string()))
            .collect()
    };
    let label = match features[6].as_slice() {
        [l] => u8::try_from(*l).map_err(|_| "label out of range")?,
        _ => return Err("next_sentence_label must hold one value".into()),
    };
    Ok(PretrainInstance {
        input_ids: unsigned(&features[0])?,
        attention_mask: narrow(&features[1])?,
        segment_ids: narrow(&features[2])?,
        masked_positions: unsigned(&features[3])?,
        masked_label_ids: unsigned(&features[4])?,
        masked_weights: narrow(&features[5])?,
        next_sentence_label: label,
    })
}

pub struct RecordWriter<W: Write> {
    inner: W,
    written: usize,
}

impl<W: Write> RecordWriter<W> {
    pub fn new(inner: W) -> Self {
        RecordWriter { inner, written: 0 }
    }

    pub fn write(&mut self, inst: &PretrainInstance) -> io::Result<()> {
        let payload = encode_payload(inst);
        let len = (payload.len() as u64).to_le_bytes();
        self.inner.write_all(&len)?;
        self.inner.write_all(&masked_crc(&len).to_le_bytes())?;
        self.inner.write_all(&payload)?;
        self.inner.write_all(&masked_crc(&payload).to_le_bytes())?;
        self.written += 1;
        Ok(())
    }

    pub fn written(&self) -> usize {
        self.written
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.inner.flush()?;
        Ok(self.inner)
    }
}

/// Iterates over the records of a stream, stopping at the first error.
pub struct RecordReader<R: Read> {
    inner: R,
    index: usize,
    offset: u64,
    failed: bool,
}

impl<R: Read> RecordReader<R> {
    pub fn new(inner: R) -> Self {
        RecordReader {
            inner,
            index: 0,
            offset: 0,
            failed: false,
        }
    }

    fn corrupt(&mut self, reason: impl Into<String>) -> RecordError {
        self.failed = true;
        RecordError::CorruptRecord {
            index: self.index,
            offset: self.offset,
            reason: reason.into(),
        }
    }

    /// Fills `buf` completely; `Ok(false)` means a clean end of stream before
    /// any byte was read.
    fn fill(&mut self, buf: &mut [u8]) -> Result<bool, RecordError> {
        let mut got = 0;
        while got < buf.len() {
            match self.inner.read(&mut buf[got..]) {
                Ok(0) => break,
                Ok(n) => got += n,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => {
                    self.failed = true;
                    return Err(e.into());
                }
            }
        }
        if got == 0 {
            return Ok(false);
        }
        if got < buf.len() {
            return Err(self.corrupt("unexpected end of file"));
        }
        Ok(true)
    }

    fn next_record(&mut self) -> Result<Option<PretrainInstance>, RecordError> {
        let mut header = [0u8; 12];
        if !self.fill(&mut header)? {
            return Ok(None);
        }
        let len_bytes: [u8; 8] = header[..8].try_into().unwrap();
        let len_crc = u32::from_le_bytes(header[8..].try_into().unwrap());
        if masked_crc(&len_bytes) != len_crc {
            return Err(self.corrupt("length checksum mismatch"));
        }
        let len = u64::from_le_bytes(len_bytes);
        if len > 1 << 30 {
            return Err(self.corrupt(format!("implausible payload length {len}")));
        }
        let mut payload = vec![0u8; len as usize + 4];
        if !self.fill(&mut payload)? {
            return Err(self.corrupt("unexpected end of file"));
        }
        let crc = u32::from_le_bytes(payload[len as usize..].try_into().unwrap());
        payload.truncate(len as usize);
        if masked_crc(&payload) != crc {
            return Err(self.corrupt("payload checksum mismatch"));
        }
        let inst = decode_payload(&payload).map_err(|r| self.corrupt(r))?;
        inst.check().map_err(|r| self.corrupt(r))?;
        self.index += 1;
        self.offset += 16 + len;
        Ok(Some(inst))
    }
}

impl<R: Read> Iterator for RecordReader<R> {
    type Item = Result<PretrainInstance, RecordError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        self.next_record().transpose()
    }
}

pub fn write_records(path: &Path, instances: &[PretrainInstance]) -> Result<(), RecordError> {
    let mut w = RecordWriter::new(BufWriter::new(File::create(path)?));
    for inst in instances {
        w.write(inst)?;
    }
    w.finish()?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<PretrainInstance>, RecordError> {
    RecordReader::new(BufReader::new(File::open(path)?)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{apply_masking, MaskingConfig, SentencePair};
    use crate::seed;

    /// Bitwise reflected CRC-32C.
    fn crc32c_oracle(bytes: &[u8]) -> u32 {
        let mut crc = !0u32;
        for &b in bytes {
            crc ^= b as u32;
            for _ in 0..8 {
                crc = if crc & 1 == 1 { (crc >> 1) ^ 0x82F6_3B78 } else { crc >> 1 };
            }
        }
        !crc
    }

    fn sample(n: usize) -> Vec<PretrainInstance> {
        let v = crate::instances::tests::test_vocab(200);
        (0..n)
            .map(|i| {
                let pair = SentencePair {
                    a: (0..10 + i as u32).map(|t| 5 + t % 200).collect(),
                    b: (0..7).map(|t| 6 + t).collect(),
                    next_sentence_label: (i % 2) as u8,
                };
                let mut rng = seed::rng(4, &[i as u64]);
                apply_masking(&pair, &v, &MaskingConfig::default(), 64, &mut rng)
            })
            .collect()
    }

    #[test]
    fn crc_matches_oracle() {
        assert_eq!(CASTAGNOLI.checksum(b"123456789"), 0xE306_9283);
        for data in [&b""[..], b"a", b"hello world", &[0u8; 33], &[0xffu8; 7]] {
            let crc = crc32c_oracle(data);
            assert_eq!(CASTAGNOLI.checksum(data), crc);
            let masked = ((crc >> 15) | (crc << 17)).wrapping_add(0xa282ead8);
            assert_eq!(masked_crc(data), masked);
        }
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.rec");
        let insts = sample(25);
        write_records(&path, &insts).unwrap();
        assert_eq!(read_records(&path).unwrap(), insts);
    }

    #[test]
    fn empty_file_has_no_records() {
        let r: Vec<_> = RecordReader::new(&[][..]).collect();
        assert!(r.is_empty());
    }

    #[test]
    fn flipped_byte_is_reported_with_position() {
        let insts = sample(3);
        let mut w = RecordWriter::new(Vec::new());
        for i in &insts {
            w.write(i).unwrap();
        }
        let mut bytes = w.finish().unwrap();
        let first_len = 16 + u64::from_le_bytes(bytes[..8].try_into().unwrap());
        bytes[first_len as usize + 40] ^= 0x10;
        let out: Vec<_> = RecordReader::new(&bytes[..]).collect();
        assert_eq!(out.len(), 2);
        assert!(out[0].is_ok());
        match &out[1] {
            Err(RecordError::CorruptRecord { index, offset, .. }) => {
                assert_eq!(*index, 1);
                assert_eq!(*offset, first_len);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let mut w = RecordWriter::new(Vec::new());
        w.write(&sample(1)[0]).unwrap();
        let bytes = w.finish().unwrap();
        let out: Vec<_> = RecordReader::new(&bytes[..bytes.len() - 3]).collect();
        assert!(matches!(out[0], Err(RecordError::CorruptRecord { index: 0, .. })));
    }
}
