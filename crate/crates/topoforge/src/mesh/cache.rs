//! On-disk binary mesh cache keyed by a content hash of the description
//! that produced the mesh.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::Mesh;
use crate::error::{Error, Result};

/// Bumped whenever the generators change output for the same description.
const GENERATOR_VERSION: u32 = 1;

#[derive(Clone, Debug)]
pub struct MeshCache {
    dir: PathBuf,
}

/// Hex SHA-256 of a JSON-serialisable description (plus generator version).
pub fn description_hash<K: Serialize>(kind: &str, key: &K) -> Result<String> {
    let json = serde_json::to_vec(key).map_err(|e| Error::InvalidInput(format!("unserialisable mesh description: {e}")))?;
    let mut h = Sha256::new();
    h.update(GENERATOR_VERSION.to_le_bytes());
    h.update(kind.as_bytes());
    h.update([0]);
    h.update(&json);
    Ok(hex::encode(h.finalize()))
}

impl MeshCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        MeshCache { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, hash: &str) -> PathBuf {
        self.dir.join(format!("{hash}.mesh"))
    }

    /// Cached mesh for `key`, building and storing it on a miss. Corrupt
    /// entries are rebuilt.
    pub fn get_or_build<K: Serialize>(&self, kind: &str, key: &K, build: impl FnOnce() -> Result<Mesh>) -> Result<Mesh> {
        let hash = description_hash(kind, key)?;
        let path = self.path(&hash);
        if let Ok(bytes) = std::fs::read(&path) {
            if let Ok(mesh) = bincode::deserialize::<Mesh>(&bytes) {
                if mesh.validate().is_ok() {
                    return Ok(mesh);
                }
            }
        }
        let mesh = build()?;
        std::fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        let bytes = bincode::serialize(&mesh).map_err(|e| Error::Format { path: path.clone(), message: e.to_string() })?;
        // Write then rename so concurrent readers never see partial files.
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
        Ok(mesh)
    }
}
