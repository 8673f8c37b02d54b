use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ClientError, RequestKey, Service};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureMeta {
    pub service: String,
    pub key: String,
    /// Seconds since the Unix epoch.
    pub fetched_at: u64,
    pub status: u16,
}

/// Content-addressed response store: `<dir>/<service>/<sha256(key)>.bin`
/// with a sibling `.meta.json`.
#[derive(Debug, Clone)]
pub struct FixtureStore {
    root: PathBuf,
}

fn store_err(path: &Path, source: std::io::Error) -> ClientError {
    ClientError::Store {
        path: path.display().to_string(),
        source,
    }
}

impl FixtureStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        FixtureStore { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_for(&self, key: &RequestKey) -> PathBuf {
        let digest = hex::encode(Sha256::digest(key.canonical.as_bytes()));
        self.root.join(key.service.name()).join(format!("{digest}.bin"))
    }

    fn meta_path(bin: &Path) -> PathBuf {
        bin.with_extension("meta.json")
    }

    pub fn get(&self, key: &RequestKey) -> Result<Option<Vec<u8>>, ClientError> {
        let path = self.path_for(key);
        match std::fs::read(&path) {
            Ok(b) => Ok(Some(b)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(store_err(&path, e)),
        }
    }

    pub fn meta(&self, key: &RequestKey) -> Result<Option<FixtureMeta>, ClientError> {
        let path = Self::meta_path(&self.path_for(key));
        match std::fs::read(&path) {
            Ok(b) => serde_json::from_slice(&b)
                .map(Some)
                .map_err(|e| store_err(&path, std::io::Error::other(e))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(store_err(&path, e)),
        }
    }

    pub fn contains(&self, key: &RequestKey) -> bool {
        self.path_for(key).is_file()
    }

    /// Store a response. The first writer for a key wins; later writes are
    /// discarded and `Ok(false)` is returned.
    pub fn put(&self, key: &RequestKey, body: &[u8], status: u16, fetched_at: u64) -> Result<bool, ClientError> {
        let path = self.path_for(key);
        let dir = path.parent().expect("fixture path has a parent");
        std::fs::create_dir_all(dir).map_err(|e| store_err(dir, e))?;
        let meta = FixtureMeta {
            service: key.service.name().to_string(),
            key: key.canonical.clone(),
            fetched_at,
            status,
        };
        let meta_path = Self::meta_path(&path);
        let meta_json = serde_json::to_vec_pretty(&meta).expect("meta serialises");
        let meta_tmp = tmp_name(&meta_path);
        std::fs::write(&meta_tmp, &meta_json).map_err(|e| store_err(&meta_path, e))?;

        let tmp = tmp_name(&path);
        let mut f = std::fs::File::create(&tmp).map_err(|e| store_err(&tmp, e))?;
        f.write_all(body).and_then(|_| f.sync_all()).map_err(|e| store_err(&tmp, e))?;
        drop(f);
        // hard_link fails if the target exists, giving an atomic first-wins.
        let won = match std::fs::hard_link(&tmp, &path) {
            Ok(()) => true,
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => false,
            Err(e) => return Err(store_err(&path, e)),
        };
        let _ = std::fs::remove_file(&tmp);
        if won {
            std::fs::rename(&meta_tmp, &meta_path).map_err(|e| store_err(&meta_path, e))?;
        } else {
            let _ = std::fs::remove_file(&meta_tmp);
        }
        Ok(won)
    }

    /// SHA-256 over every stored response, in path order. Identifies the
    /// fixture corpus a report was produced from.
    pub fn digest(&self) -> Result<String, ClientError> {
        let mut files = Vec::new();
        for svc in Service::ALL {
            let dir = self.root.join(svc.name());
            let entries = match std::fs::read_dir(&dir) {
                Ok(e) => e,
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => continue,
                Err(e) => return Err(store_err(&dir, e)),
            };
            for entry in entries {
                let p = entry.map_err(|e| store_err(&dir, e))?.path();
                if p.extension().is_some_and(|x| x == "bin") {
                    files.push((format!("{}/{}", svc.name(), p.file_name().unwrap().to_string_lossy()), p));
                }
            }
        }
        files.sort();
        let mut h = Sha256::new();
        for (name, p) in files {
            let body = std::fs::read(&p).map_err(|e| store_err(&p, e))?;
            h.update(name.as_bytes());
            h.update((body.len() as u64).to_le_bytes());
            h.update(&body);
        }
        Ok(hex::encode(h.finalize()))
    }
}

fn tmp_name(path: &Path) -> PathBuf {
    static SEQ: std::sync::atomic::AtomicU64 = std::sync::atomic::AtomicU64::new(0);
    let n = SEQ.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
    let mut s = path.as_os_str().to_owned();
    s.push(format!(".tmp.{}.{n}", std::process::id()));
    PathBuf::from(s)
}
