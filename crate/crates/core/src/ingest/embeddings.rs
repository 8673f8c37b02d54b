//! Dense embedding matrices and the `PAEM` file format.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! b"PAEM"
//! u32 rows
//! u32 dims
//! rows * dims f32
//! u32 id_count
//! id_count * (u32 key_len, key_len bytes UTF-8, u32 row)
//! ```

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"PAEM";

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("bad magic at byte 0")]
    BadMagic,
    #[error("truncated data at byte {offset}: need {needed} more bytes")]
    Truncated { offset: usize, needed: usize },
    #[error("non-finite value at row {row}, col {col} (byte {offset})")]
    NonFinite { row: usize, col: usize, offset: usize },
    #[error("id-map key at byte {offset} is not valid UTF-8")]
    BadKey { offset: usize },
    #[error("id-map entry {key:?} at byte {offset} points at row {row} >= {rows}")]
    RowOutOfRange { key: String, row: usize, rows: usize, offset: usize },
    #[error("duplicate id-map key {key:?} at byte {offset}")]
    DuplicateKey { key: String, offset: usize },
    #[error("{extra} trailing bytes after id map (byte {offset})")]
    TrailingBytes { offset: usize, extra: usize },
    #[error("data length {len} does not equal rows {rows} x dims {dims}")]
    Shape { rows: usize, dims: usize, len: usize },
    #[error("row {row} out of range (rows = {rows})")]
    NoSuchRow { row: usize, rows: usize },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Row-major `f32` matrix. Immutable once constructed.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    dims: usize,
    data: Vec<f32>,
    id_map: BTreeMap<String, usize>,
}

impl EmbeddingMatrix {
    pub fn new(
        rows: usize,
        dims: usize,
        data: Vec<f32>,
        id_map: BTreeMap<String, usize>,
    ) -> Result<Self, EmbeddingError> {
        if data.len() != rows * dims {
            return Err(EmbeddingError::Shape { rows, dims, len: data.len() });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            let (row, col) = (i / dims.max(1), i % dims.max(1));
            return Err(EmbeddingError::NonFinite { row, col, offset: 12 + 4 * i });
        }
        if let Some((key, &row)) = id_map.iter().find(|(_, &r)| r >= rows) {
            return Err(EmbeddingError::RowOutOfRange { key: key.clone(), row, rows, offset: 0 });
        }
        Ok(EmbeddingMatrix { rows, dims, data, id_map })
    }

    /// Build from a list of equal-length rows, with no id map.
    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self, EmbeddingError> {
        let dims = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * dims);
        for r in rows {
            if r.len() != dims {
                return Err(EmbeddingError::Shape { rows: rows.len(), dims, len: r.len() });
            }
            data.extend_from_slice(r);
        }
        EmbeddingMatrix::new(rows.len(), dims, data, BTreeMap::new())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn id_map(&self) -> &BTreeMap<String, usize> {
        &self.id_map
    }

    pub fn row(&self, i: usize) -> Result<&[f32], EmbeddingError> {
        if i >= self.rows {
            return Err(EmbeddingError::NoSuchRow { row: i, rows: self.rows });
        }
        Ok(&self.data[i * self.dims..(i + 1) * self.dims])
    }

    pub fn row_for_key(&self, key: &str) -> Option<&[f32]> {
        self.id_map.get(key).and_then(|&r| self.row(r).ok())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.data.len() * 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.rows as u32).to_le_bytes());
        out.extend_from_slice(&(self.dims as u32).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&(self.id_map.len() as u32).to_le_bytes());
        for (k, &r) in &self.id_map {
            out.extend_from_slice(&(k.len() as u32).to_le_bytes());
            out.extend_from_slice(k.as_bytes());
            out.extend_from_slice(&(r as u32).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EmbeddingError> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(4).map_err(|_| EmbeddingError::BadMagic)? != MAGIC {
            return Err(EmbeddingError::BadMagic);
        }
        let rows = cur.u32()? as usize;
        let dims = cur.u32()? as usize;
        let mut data = Vec::with_capacity(rows.saturating_mul(dims).min(1 << 28));
        for row in 0..rows {
            for col in 0..dims {
                let offset = cur.pos;
                let v = f32::from_le_bytes(cur.take(4)?.try_into().unwrap());
                if !v.is_finite() {
                    return Err(EmbeddingError::NonFinite { row, col, offset });
                }
                data.push(v);
            }
        }
        let count = cur.u32()? as usize;
        let mut id_map = BTreeMap::new();
        for _ in 0..count {
            let offset = cur.pos;
            let len = cur.u32()? as usize;
            let key = std::str::from_utf8(cur.take(len)?)
                .map_err(|_| EmbeddingError::BadKey { offset })?
                .to_string();
            let row = cur.u32()? as usize;
            if row >= rows {
                return Err(EmbeddingError::RowOutOfRange { key, row, rows, offset });
            }
            if id_map.insert(key.clone(), row).is_some() {
                return Err(EmbeddingError::DuplicateKey { key, offset });
            }
        }
        if cur.pos != bytes.len() {
            return Err(EmbeddingError::TrailingBytes { offset: cur.pos, extra: bytes.len() - cur.pos });
        }
        Ok(EmbeddingMatrix { rows, dims, data, id_map })
    }

    pub fn write_to(&self, path: &Path) -> Result<(), EmbeddingError> {
        let io = |source| EmbeddingError::Io { path: path.display().to_string(), source };
        let mut f = std::fs::File::create(path).map_err(io)?;
        f.write_all(&self.to_bytes()).map_err(io)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], EmbeddingError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(EmbeddingError::Truncated {
                offset: self.pos,
                needed: n - (self.bytes.len() - self.pos),
            }),
        }
    }

    fn u32(&mut self) -> Result<u32, EmbeddingError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Read and validate an embedding file.
pub fn load_embeddings(path: &Path) -> Result<EmbeddingMatrix, EmbeddingError> {
    let bytes = std::fs::read(path)
        .map_err(|source| EmbeddingError::Io { path: path.display().to_string(), source })?;
    EmbeddingMatrix::from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(rows: u32, dims: u32) -> Vec<u8> {
        let mut b = MAGIC.to_vec();
        b.extend_from_slice(&rows.to_le_bytes());
        b.extend_from_slice(&dims.to_le_bytes());
        b
    }

    #[test]
    fn reads_two_by_three() {
        let mut b = header(2, 3);
        for v in [1.0f32, 2.0, 3.0, 4.0, 5.0, 6.0] {
            b.extend_from_slice(&v.to_le_bytes());
        }
        b.extend_from_slice(&0u32.to_le_bytes());
        let m = EmbeddingMatrix::from_bytes(&b).unwrap();
        assert_eq!((m.rows(), m.dims()), (2, 3));
        assert_eq!(m.row(1).unwrap(), &[4.0, 5.0, 6.0]);
    }

    #[test]
    fn five_floats_for_two_by_three_is_truncated() {
        let mut b = header(2, 3);
        for v in [1.0f32, 2.0, 3.0, 4.0, 5.0] {
            b.extend_from_slice(&v.to_le_bytes());
        }
        match EmbeddingMatrix::from_bytes(&b) {
            Err(EmbeddingError::Truncated { offset, .. }) => assert_eq!(offset, 32),
            other => panic!("expected truncation, got {other:?}"),
        }
    }

    #[test]
    fn nan_reports_row_and_col() {
        let mut b = header(2, 2);
        for v in [1.0f32, 2.0, 3.0, f32::NAN] {
            b.extend_from_slice(&v.to_le_bytes());
        }
        b.extend_from_slice(&0u32.to_le_bytes());
        match EmbeddingMatrix::from_bytes(&b) {
            Err(EmbeddingError::NonFinite { row, col, offset }) => {
                assert_eq!((row, col, offset), (1, 1, 24));
            }
            other => panic!("expected non-finite, got {other:?}"),
        }
    }

    #[test]
    fn bad_magic_rejected() {
        assert!(matches!(
            EmbeddingMatrix::from_bytes(b"NOPE\0\0\0\0"),
            Err(EmbeddingError::BadMagic)
        ));
        assert!(matches!(EmbeddingMatrix::from_bytes(b"PA"), Err(EmbeddingError::BadMagic)));
    }

    #[test]
    fn id_map_round_trip_and_bounds() {
        let mut ids = BTreeMap::new();
        ids.insert("a1".to_string(), 0);
        ids.insert("a1/face0".to_string(), 1);
        let m = EmbeddingMatrix::new(2, 2, vec![1.0, 0.0, 0.0, 1.0], ids).unwrap();
        let back = EmbeddingMatrix::from_bytes(&m.to_bytes()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.row_for_key("a1/face0"), Some(&[0.0f32, 1.0][..]));

        let mut bad = BTreeMap::new();
        bad.insert("z".to_string(), 2);
        assert!(matches!(
            EmbeddingMatrix::new(2, 2, vec![0.0; 4], bad),
            Err(EmbeddingError::RowOutOfRange { .. })
        ));
    }
}
