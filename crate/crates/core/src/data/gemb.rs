//! GEMB embedding files.
//!
//! Little-endian. A 32-byte header:
//! magic `b"GEMB"`, `u32` version (1), `u64` record count, `u32` d_img,
//! `u32` d_txt (0 = no text embeddings), `u32` n_styles, `u32` flags
//! (bit 0 set iff text embeddings are present; other bits reserved).
//! Then fixed-width records: `u64` record_id, `u64` content_id, `i32`
//! style_id, `i32` genre_id, `i32` content_cluster, `d_img` f32, `d_txt` f32.

use super::record::{Dataset, EmbeddingRecord};
use crate::binio::{put_f32s, put_i32, put_u32, put_u64, ByteReader};
use crate::error::{Error, Result};
use std::path::Path;

pub const GEMB_MAGIC: &[u8; 4] = b"GEMB";
pub const GEMB_VERSION: u32 = 1;
pub const FLAG_HAS_TEXT: u32 = 1;
pub const HEADER_BYTES: usize = 32;
const RECORD_FIXED_BYTES: usize = 8 + 8 + 4 + 4 + 4;

/// Parsed header fields.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DatasetHeader {
    pub version: u32,
    pub count: u64,
    pub d_img: u32,
    pub d_txt: u32,
    pub n_styles: u32,
    pub flags: u32,
}

impl DatasetHeader {
    pub fn record_bytes(&self) -> u64 {
        RECORD_FIXED_BYTES as u64 + 4 * (self.d_img as u64 + self.d_txt as u64)
    }
}

pub fn encode_dataset(ds: &Dataset) -> Result<Vec<u8>> {
    ds.validate()?;
    let d_img = u32::try_from(ds.d_img).map_err(|_| Error::InvalidArgument("d_img too large".into()))?;
    let d_txt = u32::try_from(ds.d_txt).map_err(|_| Error::InvalidArgument("d_txt too large".into()))?;
    let header = DatasetHeader {
        version: GEMB_VERSION,
        count: ds.len() as u64,
        d_img,
        d_txt,
        n_styles: ds.n_styles,
        flags: if d_txt > 0 { FLAG_HAS_TEXT } else { 0 },
    };
    let mut out = Vec::with_capacity(HEADER_BYTES + (header.record_bytes() * header.count) as usize);
    out.extend_from_slice(GEMB_MAGIC);
    put_u32(&mut out, header.version);
    put_u64(&mut out, header.count);
    put_u32(&mut out, header.d_img);
    put_u32(&mut out, header.d_txt);
    put_u32(&mut out, header.n_styles);
    put_u32(&mut out, header.flags);
    for r in &ds.records {
        put_u64(&mut out, r.record_id);
        put_u64(&mut out, r.content_id);
        put_i32(&mut out, r.style_id);
        put_i32(&mut out, r.genre_id);
        put_i32(&mut out, r.content_cluster);
        put_f32s(&mut out, &r.image_embedding);
        if let Some(t) = &r.text_embedding {
            put_f32s(&mut out, t);
        }
    }
    Ok(out)
}

pub fn read_header(buf: &[u8]) -> Result<DatasetHeader> {
    let mut r = ByteReader::new(buf);
    if r.bytes(4, "magic")? != GEMB_MAGIC {
        return Err(Error::format(0, "bad magic, expected GEMB"));
    }
    let version = r.u32("version")?;
    if version != GEMB_VERSION {
        return Err(Error::format(4, format!("unsupported version {version}")));
    }
    let header = DatasetHeader {
        version,
        count: r.u64("record count")?,
        d_img: r.u32("d_img")?,
        d_txt: r.u32("d_txt")?,
        n_styles: r.u32("n_styles")?,
        flags: r.u32("flags")?,
    };
    if header.flags & !FLAG_HAS_TEXT != 0 {
        return Err(Error::format(28, format!("reserved flag bits set: {:#x}", header.flags)));
    }
    if (header.flags & FLAG_HAS_TEXT != 0) != (header.d_txt > 0) {
        return Err(Error::format(28, "text flag disagrees with d_txt"));
    }
    if header.d_img == 0 {
        return Err(Error::format(16, "d_img must be positive"));
    }
    Ok(header)
}

pub fn decode_dataset(buf: &[u8]) -> Result<Dataset> {
    let header = read_header(buf)?;
    let payload = (buf.len() - HEADER_BYTES) as u64;
    let expected = header.count.checked_mul(header.record_bytes());
    if expected != Some(payload) {
        return Err(Error::format(
            HEADER_BYTES as u64,
            format!(
                "payload is {payload} bytes, header promises {} records of {} bytes",
                header.count,
                header.record_bytes()
            ),
        ));
    }
    let mut r = ByteReader::new(buf);
    r.bytes(HEADER_BYTES, "header")?;
    let d_img = header.d_img as usize;
    let d_txt = header.d_txt as usize;
    let mut records = Vec::with_capacity(header.count as usize);
    for _ in 0..header.count {
        let record_id = r.u64("record_id")?;
        let content_id = r.u64("content_id")?;
        let style_id = r.i32("style_id")?;
        let genre_id = r.i32("genre_id")?;
        let content_cluster = r.i32("content_cluster")?;
        let image_embedding = r.f32s(d_img, "image embedding")?;
        let text_embedding = if d_txt > 0 {
            Some(r.f32s(d_txt, "text embedding")?)
        } else {
            None
        };
        records.push(EmbeddingRecord {
            record_id,
            image_embedding,
            text_embedding,
            style_id,
            content_id,
            genre_id,
            content_cluster,
        });
    }
    r.expect_end()?;
    let ds = Dataset {
        n_styles: header.n_styles,
        d_img,
        d_txt,
        records,
    };
    ds.validate().map_err(|e| Error::format(HEADER_BYTES as u64, format!("invalid record: {e}")))?;
    Ok(ds)
}

pub fn write_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_dataset(ds)?)?;
    Ok(())
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    decode_dataset(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: u64, text: bool) -> EmbeddingRecord {
        EmbeddingRecord {
            record_id: id,
            image_embedding: vec![id as f32 + 0.5, -1.25, 3.0],
            text_embedding: text.then(|| vec![0.25, id as f32 + 1.0]),
            style_id: (id % 3) as i32,
            content_id: id * 10,
            genre_id: -1,
            content_cluster: 2,
        }
    }

    #[test]
    fn round_trip_without_text() {
        let ds = Dataset::from_records(3, (0..4).map(|i| rec(i, false)).collect()).unwrap();
        let bytes = encode_dataset(&ds).unwrap();
        let back = decode_dataset(&bytes).unwrap();
        assert_eq!(back, ds);
        assert_eq!(back.d_txt, 0);
        assert!(back.records.iter().all(|r| r.text_embedding.is_none()));
    }

    #[test]
    fn truncated_payload_returns_no_records() {
        let ds = Dataset::from_records(3, (0..4).map(|i| rec(i, true)).collect()).unwrap();
        let bytes = encode_dataset(&ds).unwrap();
        for cut in [1, 7, 30, 50] {
            let err = decode_dataset(&bytes[..bytes.len() - cut]).unwrap_err();
            assert!(matches!(err, Error::Format { .. }), "{err}");
        }
    }

    #[test]
    fn header_problems() {
        let ds = Dataset::from_records(3, vec![rec(1, true)]).unwrap();
        let bytes = encode_dataset(&ds).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_dataset(&bad), Err(Error::Format { offset: 0, .. })));
        let mut bad = bytes.clone();
        bad[4] = 2;
        assert!(matches!(decode_dataset(&bad), Err(Error::Format { offset: 4, .. })));
        let mut bad = bytes.clone();
        bad[28] = 0; // clear text flag
        assert!(decode_dataset(&bad).is_err());
    }

    #[test]
    fn nan_and_bad_style_rejected() {
        let ds = Dataset::from_records(3, vec![rec(1, true)]).unwrap();
        let mut bytes = encode_dataset(&ds).unwrap();
        let img_at = HEADER_BYTES + RECORD_FIXED_BYTES;
        bytes[img_at..img_at + 4].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(decode_dataset(&bytes).is_err());
        let mut r = rec(2, false);
        r.style_id = 3;
        assert!(Dataset::from_records(3, vec![r]).is_err());
    }

    #[test]
    fn zero_embedding_rejected() {
        let mut r = rec(1, false);
        r.image_embedding = vec![0.0; 3];
        assert!(matches!(Dataset::from_records(3, vec![r]), Err(Error::DegenerateInput(_))));
    }
}
