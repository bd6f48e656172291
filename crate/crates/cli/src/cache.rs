//! On-disk store of zero-order kernel blocks.
//!
//! One file per (config hash, mesh node). Layout, all integers little-endian:
//!
//! ```text
//! magic "LEVIKC01" | endian tag u8 (1 = LE) | config hash [32]
//! node u32 | rows u32 | cols u32 | row indices u32 × rows
//! values f64 × rows·cols | crc32 of everything above
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use crate::error::CliError;

const MAGIC: &[u8; 8] = b"LEVIKC01";
const LITTLE_ENDIAN: u8 = 1;

/// Environment variable overriding the default cache directory.
pub const CACHE_ENV: &str = "LEVI_CACHE_DIR";

#[derive(Debug, Clone)]
pub struct KernelCache {
    root: PathBuf,
    hash: [u8; 32],
    hash_hex: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CacheEntry {
    pub node: usize,
    pub rows: Vec<usize>,
    pub values: Array2<f64>,
}

fn decode_hex(hex: &str) -> Option<[u8; 32]> {
    if hex.len() != 64 {
        return None;
    }
    let mut out = [0u8; 32];
    for (i, b) in out.iter_mut().enumerate() {
        *b = u8::from_str_radix(&hex[2 * i..2 * i + 2], 16).ok()?;
    }
    Some(out)
}

impl KernelCache {
    /// `config_hash` is the 64-digit hex digest of the experiment config.
    pub fn new(dir: &Path, config_hash: &str) -> Result<Self, CliError> {
        let hash = decode_hex(config_hash).ok_or_else(|| CliError::Config {
            path: "config hash".into(),
            reason: format!("not a SHA-256 hex digest: {config_hash}"),
        })?;
        Ok(Self {
            root: dir.join(config_hash),
            hash,
            hash_hex: config_hash.to_string(),
        })
    }

    pub fn path(&self, node: usize) -> PathBuf {
        self.root.join(format!("p0-{node:05}.bin"))
    }

    fn encode(&self, entry: &CacheEntry) -> Vec<u8> {
        let (r, c) = entry.values.dim();
        let mut buf = Vec::with_capacity(64 + 4 * r + 8 * r * c);
        buf.extend_from_slice(MAGIC);
        buf.push(LITTLE_ENDIAN);
        buf.extend_from_slice(&self.hash);
        for v in [entry.node, r, c] {
            buf.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for i in &entry.rows {
            buf.extend_from_slice(&(*i as u32).to_le_bytes());
        }
        for v in entry.values.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        let crc = crc32fast::hash(&buf);
        buf.extend_from_slice(&crc.to_le_bytes());
        buf
    }

    /// Writes through a temporary file and a rename.
    pub fn store(&self, entry: &CacheEntry) -> Result<(), CliError> {
        fs::create_dir_all(&self.root).map_err(CliError::io(&self.root))?;
        let path = self.path(entry.node);
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        let mut f = fs::File::create(&tmp).map_err(CliError::io(&tmp))?;
        f.write_all(&self.encode(entry)).map_err(CliError::io(&tmp))?;
        f.sync_all().map_err(CliError::io(&tmp))?;
        fs::rename(&tmp, &path).map_err(CliError::io(&path))
    }

    /// `Ok(None)` when there is no entry or it belongs to another config.
    pub fn load(&self, node: usize, rows: &[usize]) -> Result<Option<CacheEntry>, CliError> {
        let path = self.path(node);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(CliError::Io { file: path, source: e }),
        };
        let corrupt = |reason: &str| CliError::CacheCorrupt {
            file: path.clone(),
            reason: reason.to_string(),
        };
        let head = MAGIC.len() + 1 + 32 + 12;
        if bytes.len() < head + 4 || &bytes[..8] != MAGIC {
            return Err(corrupt("bad header"));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        if crc32fast::hash(body) != u32::from_le_bytes(tail.try_into().expect("4 bytes")) {
            return Err(corrupt("checksum mismatch"));
        }
        if body[8] != LITTLE_ENDIAN {
            return Err(corrupt("unsupported endianness tag"));
        }
        if body[9..41] != self.hash {
            return Ok(None);
        }
        let u32_at = |o: usize| u32::from_le_bytes(body[o..o + 4].try_into().expect("4 bytes")) as usize;
        let (n, r, c) = (u32_at(41), u32_at(45), u32_at(49));
        if n != node || body.len() != head + 4 * r + 8 * r * c {
            return Err(corrupt("inconsistent dimensions"));
        }
        let stored_rows: Vec<usize> = (0..r).map(|i| u32_at(head + 4 * i)).collect();
        if stored_rows != rows {
            return Ok(None);
        }
        let off = head + 4 * r;
        let values: Vec<f64> = (0..r * c)
            .map(|i| f64::from_le_bytes(body[off + 8 * i..off + 8 * i + 8].try_into().expect("8 bytes")))
            .collect();
        let values = Array2::from_shape_vec((r, c), values).expect("sized above");
        Ok(Some(CacheEntry {
            node,
            rows: stored_rows,
            values,
        }))
    }

    pub fn config_hash(&self) -> &str {
        &self.hash_hex
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HASH: &str = "00112233445566778899aabbccddeeff00112233445566778899aabbccddeeff";

    fn entry() -> CacheEntry {
        let values = Array2::from_shape_fn((3, 4), |(i, j)| (i as f64 + 0.1) / (j as f64 + 0.7));
        CacheEntry {
            node: 7,
            rows: vec![4, 9, 11],
            values,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let cache = KernelCache::new(dir.path(), HASH).unwrap();
        let e = entry();
        cache.store(&e).unwrap();
        let back = cache.load(7, &e.rows).unwrap().unwrap();
        assert_eq!(back, e);
        assert!(cache.load(8, &e.rows).unwrap().is_none());
        assert!(cache.load(7, &[4, 9]).unwrap().is_none());
    }

    #[test]
    fn flipped_byte_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let cache = KernelCache::new(dir.path(), HASH).unwrap();
        cache.store(&entry()).unwrap();
        let path = cache.path(7);
        let mut bytes = fs::read(&path).unwrap();
        bytes[70] ^= 0x40;
        fs::write(&path, bytes).unwrap();
        assert!(matches!(cache.load(7, &[4, 9, 11]), Err(CliError::CacheCorrupt { .. })));
    }

    #[test]
    fn other_config_is_never_served() {
        let dir = tempfile::tempdir().unwrap();
        let a = KernelCache::new(dir.path(), HASH).unwrap();
        a.store(&entry()).unwrap();
        let other = HASH.replace("00", "ff");
        let b = KernelCache::new(dir.path(), &other).unwrap();
        // same file name under a different directory
        fs::create_dir_all(b.path(7).parent().unwrap()).unwrap();
        fs::copy(a.path(7), b.path(7)).unwrap();
        assert!(b.load(7, &[4, 9, 11]).unwrap().is_none());
    }
}
