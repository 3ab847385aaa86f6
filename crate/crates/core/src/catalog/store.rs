//! GEMB: the binary embedding store.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic    4 bytes  "GEMB"
//! version  u16      1
//! flags    u16      0
//! dim      u32
//! count    u64
//! count × { id_len u16, id UTF-8 bytes, dim × f32 }
//! crc      u32      CRC-32 (IEEE) of every byte between magic and crc
//! ```

use std::collections::HashMap;
use std::io::{self, Read, Write};

use super::{validate_id, Catalog, CatalogError, ImageRecord};

pub const MAGIC: [u8; 4] = *b"GEMB";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 2 + 4 + 8;
const CRC_LEN: usize = 4;

/// Writer adapter that checksums and counts what passes through it.
struct CrcWriter<W> {
    inner: W,
    hasher: crc32fast::Hasher,
    written: u64,
}

impl<W: Write> CrcWriter<W> {
    fn put(&mut self, bytes: &[u8]) -> io::Result<()> {
        self.inner.write_all(bytes)?;
        self.hasher.update(bytes);
        self.written += bytes.len() as u64;
        Ok(())
    }
}

/// Serializes `catalog` to `sink`, returning the number of bytes written.
/// Output is a pure function of the catalog's ids and vectors.
pub fn write_store(catalog: &Catalog, sink: impl Write) -> Result<u64, CatalogError> {
    let mut sink = io::BufWriter::new(sink);
    sink.write_all(&MAGIC).map_err(CatalogError::SinkFailure)?;
    let mut w = CrcWriter {
        inner: &mut sink,
        hasher: crc32fast::Hasher::new(),
        written: MAGIC.len() as u64,
    };
    let dim = u32::try_from(catalog.dim())
        .map_err(|_| CatalogError::MalformedStore("dim exceeds u32".into()))?;
    let body = (|| -> io::Result<()> {
        w.put(&VERSION.to_le_bytes())?;
        w.put(&0u16.to_le_bytes())?;
        w.put(&dim.to_le_bytes())?;
        w.put(&(catalog.len() as u64).to_le_bytes())?;
        let mut row_bytes = Vec::with_capacity(catalog.dim() * 4);
        for (pos, record) in catalog.records().iter().enumerate() {
            let id = record.id.as_bytes();
            // Ids are validated to fit in u16 on catalog construction.
            w.put(&(id.len() as u16).to_le_bytes())?;
            w.put(id)?;
            row_bytes.clear();
            for v in catalog.row(pos) {
                row_bytes.extend_from_slice(&v.to_le_bytes());
            }
            w.put(&row_bytes)?;
        }
        Ok(())
    })();
    body.map_err(CatalogError::SinkFailure)?;
    let crc = w.hasher.finalize();
    let written = w.written + CRC_LEN as u64;
    sink.write_all(&crc.to_le_bytes())
        .and_then(|_| sink.flush())
        .map_err(CatalogError::SinkFailure)?;
    Ok(written)
}

/// Raw decoded contents of a store: ids and a flat row-major vector array.
#[derive(Debug, Clone, PartialEq)]
pub struct StoreContents {
    pub dim: usize,
    pub ids: Vec<String>,
    pub vectors: Vec<f32>,
}

struct Cursor<'a> {
    buf: &'a [u8],
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CatalogError> {
        if self.buf.len() < n {
            return Err(CatalogError::MalformedStore("unexpected end of data".into()));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u16(&mut self) -> Result<u16, CatalogError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, CatalogError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CatalogError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Decodes and verifies a store image.
///
/// Checks run in order: magic, checksum, version, flags, structure. A
/// truncated file therefore reports `BadMagic` when the magic itself is
/// cut, and `CrcMismatch` otherwise.
pub fn read_store(bytes: &[u8]) -> Result<StoreContents, CatalogError> {
    if bytes.len() < MAGIC.len() || bytes[..4] != MAGIC {
        return Err(CatalogError::BadMagic);
    }
    if bytes.len() < MAGIC.len() + CRC_LEN {
        return Err(CatalogError::CrcMismatch);
    }
    let (covered, crc_bytes) = bytes[4..].split_at(bytes.len() - 4 - CRC_LEN);
    let stored = u32::from_le_bytes(crc_bytes.try_into().unwrap());
    if crc32fast::hash(covered) != stored {
        return Err(CatalogError::CrcMismatch);
    }
    if bytes.len() < HEADER_LEN + CRC_LEN {
        return Err(CatalogError::MalformedStore("header too short".into()));
    }

    let mut cur = Cursor { buf: covered };
    let version = cur.u16()?;
    if version != VERSION {
        return Err(CatalogError::UnsupportedVersion(version));
    }
    let flags = cur.u16()?;
    if flags != 0 {
        return Err(CatalogError::UnsupportedFlags(flags));
    }
    let dim = cur.u32()? as usize;
    if dim == 0 {
        return Err(CatalogError::MalformedStore("dim is 0".into()));
    }
    let count = cur.u64()?;
    // Every record needs at least 2 + 1 + 4*dim bytes; bound before allocating.
    let min_record = 3u64 + 4 * dim as u64;
    if count
        .checked_mul(min_record)
        .is_none_or(|need| need > cur.buf.len() as u64)
    {
        return Err(CatalogError::MalformedStore(format!(
            "count {count} does not fit in {} remaining bytes",
            cur.buf.len()
        )));
    }
    let count = count as usize;
    let mut ids = Vec::with_capacity(count);
    let mut vectors = Vec::with_capacity(count * dim);
    for _ in 0..count {
        let len = cur.u16()? as usize;
        let id = std::str::from_utf8(cur.take(len)?)
            .map_err(|e| CatalogError::MalformedStore(format!("id is not UTF-8: {e}")))?;
        validate_id(id).map_err(|e| CatalogError::MalformedStore(e.to_string()))?;
        ids.push(id.to_owned());
        for chunk in cur.take(dim * 4)?.chunks_exact(4) {
            vectors.push(f32::from_le_bytes(chunk.try_into().unwrap()));
        }
    }
    if !cur.buf.is_empty() {
        return Err(CatalogError::MalformedStore(format!(
            "{} trailing bytes after records",
            cur.buf.len()
        )));
    }
    Ok(StoreContents { dim, ids, vectors })
}

/// Loads a store and joins it with manifest metadata.
///
/// Record order follows the store. Manifest entries for ids absent from the
/// store are ignored.
pub fn load_store(
    mut source: impl Read,
    manifest: impl IntoIterator<Item = ImageRecord>,
) -> Result<Catalog, CatalogError> {
    let mut bytes = Vec::new();
    source
        .read_to_end(&mut bytes)
        .map_err(CatalogError::SourceFailure)?;
    let contents = read_store(&bytes)?;
    drop(bytes);

    let mut meta: HashMap<String, ImageRecord> = HashMap::new();
    for record in manifest {
        if meta.contains_key(&record.id) {
            return Err(CatalogError::DuplicateId(record.id));
        }
        meta.insert(record.id.clone(), record);
    }
    let mut records = Vec::with_capacity(contents.ids.len());
    for id in contents.ids {
        match meta.remove(&id) {
            Some(r) => records.push(r),
            None if records.iter().any(|r: &ImageRecord| r.id == id) => {
                return Err(CatalogError::DuplicateId(id))
            }
            None => return Err(CatalogError::MissingMetadata(id)),
        }
    }
    Catalog::from_rows(contents.dim, records, contents.vectors)
}
