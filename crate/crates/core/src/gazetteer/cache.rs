//! Binary store cache.
//!
//! Layout: 8-byte magic, little-endian `u32` version, then a bincode payload
//! holding the allowlist, the source checksum and every entry in geoname-id
//! order. Indexes are rebuilt on read. Output is byte-identical for identical
//! inputs.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Bm25Params, CodeClass, CodeClassMap, GazetteerEntry, GazetteerStore};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"HUMGEO\0S";
pub const CACHE_VERSION: u32 = 1;

/// What a cache was built from. A cache is only valid for the same key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheKey {
    pub allowlist: BTreeSet<CodeClass>,
    /// Hex SHA-256 over the dumps and the code-class table.
    pub checksum: String,
}

#[derive(Serialize, Deserialize)]
struct Payload {
    key: CacheKey,
    entries: Vec<GazetteerEntry>,
}

fn hash_file(hasher: &mut Sha256, path: &Path) -> Result<()> {
    let mut reader = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    let mut buf = vec![0u8; 1 << 16];
    let mut total: u64 = 0;
    loop {
        let n = reader.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        total += n as u64;
        hasher.update(&buf[..n]);
    }
    hasher.update(total.to_le_bytes());
    Ok(())
}

pub fn dump_checksum(
    main_dump: &Path,
    alternate_names_dump: Option<&Path>,
    codes: &CodeClassMap,
) -> Result<String> {
    let mut hasher = Sha256::new();
    hash_file(&mut hasher, main_dump)?;
    match alternate_names_dump {
        Some(path) => {
            hasher.update([1u8]);
            hash_file(&mut hasher, path)?;
        }
        None => hasher.update([0u8]),
    }
    hasher.update(codes.source().as_bytes());
    Ok(hex::encode(hasher.finalize()))
}

impl GazetteerStore {
    pub fn write_cache(&self, path: &Path, key: &CacheKey) -> Result<()> {
        let payload = Payload {
            key: key.clone(),
            entries: self.entries().cloned().collect(),
        };
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        out.write_all(MAGIC).map_err(|e| Error::io(path, e))?;
        out.write_all(&CACHE_VERSION.to_le_bytes())
            .map_err(|e| Error::io(path, e))?;
        bincode::serialize_into(&mut out, &payload).map_err(|e| Error::Cache(e.to_string()))?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    /// Read a cache, rejecting it when it does not match `expected`.
    pub fn read_cache(
        path: &Path,
        expected: Option<&CacheKey>,
        params: Bm25Params,
    ) -> Result<(GazetteerStore, CacheKey)> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = BufReader::new(file);
        let mut header = [0u8; 12];
        reader
            .read_exact(&mut header)
            .map_err(|_| Error::Cache(format!("{} is too short", path.display())))?;
        if &header[..8] != MAGIC {
            return Err(Error::Cache(format!("{} is not a store cache", path.display())));
        }
        let version = u32::from_le_bytes(header[8..12].try_into().expect("4 bytes"));
        if version != CACHE_VERSION {
            return Err(Error::StaleCache(format!(
                "cache version {version}, expected {CACHE_VERSION}"
            )));
        }
        let payload: Payload =
            bincode::deserialize_from(reader).map_err(|e| Error::Cache(e.to_string()))?;
        if let Some(expected) = expected {
            if expected.allowlist != payload.key.allowlist {
                return Err(Error::StaleCache("allowlist differs".into()));
            }
            if expected.checksum != payload.key.checksum {
                return Err(Error::StaleCache("dump checksum differs".into()));
            }
        }
        let store = GazetteerStore::with_params(
            payload.entries,
            payload.key.allowlist.clone(),
            params,
        );
        Ok((store, payload.key))
    }
}
