//! Binary library snapshots.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "ECLP" | version u8 = 1 | payload_len u64 | payload
//! payload  = next_id u64 | bucket_count u32 | bucket*
//! bucket   = key str | template_count u32 | (template vector)*
//! template = id u64 | match_count u64 | token_count u32 | (token str | stats)*
//! stats    = 0u8 | 1u8 entry_count u32 (token str | count u64)*
//! vector   = 39 x u32 counts | length u32
//! str      = byte_len u32 | utf-8 bytes
//! ```
//!
//! Buckets are written in key order, templates in bucket order.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::library::TemplateLibrary;
use crate::template::{PositionStats, Template};
use crate::vecindex::{PunctuationVector, FEATURES};

pub const MAGIC: &[u8; 4] = b"ECLP";
pub const VERSION: u8 = 0x01;
const HEADER_LEN: usize = 4 + 1 + 8;

pub fn snapshot(lib: &TemplateLibrary) -> Vec<u8> {
    let mut w = Vec::new();
    put_u64(&mut w, lib.next_id);
    let keys = lib.keys();
    put_u32(&mut w, keys.len() as u32);
    for key in keys {
        let bucket = &lib.buckets[key];
        put_str(&mut w, key);
        put_u32(&mut w, bucket.templates.len() as u32);
        for (t, (_, v)) in bucket.templates.iter().zip(bucket.index.entries()) {
            put_u64(&mut w, t.id);
            put_u64(&mut w, t.match_count);
            put_u32(&mut w, t.tokens.len() as u32);
            for (token, stats) in t.tokens.iter().zip(&t.stats) {
                put_str(&mut w, token);
                match stats {
                    None => w.push(0),
                    Some(s) => {
                        w.push(1);
                        put_u32(&mut w, s.counts().len() as u32);
                        for (tok, &c) in s.counts() {
                            put_str(&mut w, tok);
                            put_u64(&mut w, c);
                        }
                    }
                }
            }
            for &c in &v.counts {
                put_u32(&mut w, c);
            }
            put_u32(&mut w, v.length);
        }
    }
    let mut out = Vec::with_capacity(HEADER_LEN + w.len());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    put_u64(&mut out, w.len() as u64);
    out.extend_from_slice(&w);
    out
}

pub fn restore(bytes: &[u8]) -> Result<TemplateLibrary> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4)?;
    if magic != MAGIC {
        return Err(r.error_at(0, "bad magic"));
    }
    let version = r.u8()?;
    if version != VERSION {
        return Err(r.error_at(4, &format!("unsupported version {version}")));
    }
    let payload_len = r.u64()? as usize;
    if bytes.len() - HEADER_LEN != payload_len {
        return Err(r.error_at(
            5,
            &format!(
                "payload length {payload_len} but {} bytes follow the header",
                bytes.len() - HEADER_LEN
            ),
        ));
    }

    let next_id = r.u64()?;
    let bucket_count = r.u32()?;
    let mut buckets = Vec::new();
    for _ in 0..bucket_count {
        let key = r.string()?;
        let template_count = r.u32()?;
        let mut entries = Vec::new();
        for _ in 0..template_count {
            let id = r.u64()?;
            let match_count = r.u64()?;
            let token_count = r.u32()? as usize;
            let mut tokens = Vec::new();
            let mut stats = Vec::new();
            for _ in 0..token_count {
                tokens.push(r.string()?);
                let flag_at = r.pos;
                stats.push(match r.u8()? {
                    0 => None,
                    1 => {
                        let n = r.u32()?;
                        let mut counts = BTreeMap::new();
                        for _ in 0..n {
                            let tok = r.string()?;
                            counts.insert(tok, r.u64()?);
                        }
                        Some(PositionStats::from_counts(counts))
                    }
                    other => return Err(r.error_at(flag_at, &format!("bad stats flag {other}"))),
                });
            }
            let mut counts = [0u32; FEATURES];
            for c in counts.iter_mut() {
                *c = r.u32()?;
            }
            let length = r.u32()?;
            let template = Template {
                id,
                tokens,
                symbols: Vec::new(),
                constant_bag: Vec::new(),
                stats,
                match_count,
                keyword_key: key.clone(),
            };
            entries.push((template, PunctuationVector { counts, length }));
        }
        buckets.push((key, entries));
    }
    if r.pos != bytes.len() {
        return Err(r.error_at(r.pos, "trailing bytes"));
    }
    let end = r.pos;
    TemplateLibrary::from_parts(next_id, buckets).map_err(|reason| Error::Snapshot {
        offset: end,
        reason,
    })
}

fn put_u32(w: &mut Vec<u8>, v: u32) {
    w.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(w: &mut Vec<u8>, v: u64) {
    w.extend_from_slice(&v.to_le_bytes());
}

fn put_str(w: &mut Vec<u8>, s: &str) {
    put_u32(w, s.len() as u32);
    w.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn error_at(&self, offset: usize, reason: &str) -> Error {
        Error::Snapshot {
            offset,
            reason: reason.to_string(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.error_at(
                self.pos,
                &format!("truncated: need {n} bytes, {} left", self.bytes.len() - self.pos),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let at = self.pos;
        let len = self.u32()? as usize;
        let raw = self.take(len)?;
        String::from_utf8(raw.to_vec()).map_err(|_| self.error_at(at, "invalid utf-8 string"))
    }
}
