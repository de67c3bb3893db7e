//! Artifact directory keyed by config hash. Files are never overwritten: a
//! rerun whose output differs lands in `name.vN.ext`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

const MAGIC: &str = "# timeds artifact=";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Header {
    pub kind: String,
    pub config_hash: String,
    pub seed: u64,
}

impl Header {
    pub fn line(&self) -> String {
        format!("{MAGIC}{} config_hash={} seed={}", self.kind, self.config_hash, self.seed)
    }

    pub fn parse(line: &str) -> Option<Header> {
        let rest = line.strip_prefix(MAGIC)?;
        let mut parts = rest.split_whitespace();
        let kind = parts.next()?.to_string();
        let config_hash = parts.next()?.strip_prefix("config_hash=")?.to_string();
        let seed = parts.next()?.strip_prefix("seed=")?.parse().ok()?;
        Some(Header { kind, config_hash, seed })
    }
}

/// `stem.ext` for version 1, `stem.vN.ext` after that.
pub fn versioned(name: &str, version: usize) -> String {
    if version <= 1 {
        return name.to_string();
    }
    match name.rsplit_once('.') {
        Some((stem, ext)) => format!("{stem}.v{version}.{ext}"),
        None => format!("{name}.v{version}"),
    }
}

#[derive(Debug, Clone)]
pub struct Store {
    dir: PathBuf,
    hash: String,
    seed: u64,
}

impl Store {
    pub fn open(out: &Path, hash: &str, seed: u64) -> Result<Store> {
        let dir = out.join(hash);
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Store {
            dir,
            hash: hash.to_string(),
            seed,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    fn header(&self, kind: &str) -> Header {
        Header {
            kind: kind.to_string(),
            config_hash: self.hash.clone(),
            seed: self.seed,
        }
    }

    /// Path of the newest version of `name`, if any exists.
    pub fn latest(&self, name: &str) -> Option<PathBuf> {
        let mut found = None;
        for v in 1.. {
            let p = self.dir.join(versioned(name, v));
            if !p.exists() {
                break;
            }
            found = Some(p);
        }
        found
    }

    /// Writes `body` under a header line. Identical content already present
    /// as the newest version is left alone; otherwise the next version is created.
    pub fn write(&self, name: &str, kind: &str, body: &str) -> Result<PathBuf> {
        let content = format!("{}\n{body}", self.header(kind).line());
        let mut version = 1;
        if let Some(p) = self.latest(name) {
            if fs::read_to_string(&p).is_ok_and(|old| old == content) {
                return Ok(p);
            }
            while self.dir.join(versioned(name, version)).exists() {
                version += 1;
            }
        }
        let path = self.dir.join(versioned(name, version));
        fs::write(&path, content).with_context(|| format!("writing {}", path.display()))?;
        log::info!("wrote {}", path.display());
        Ok(path)
    }

    /// Newest version of `name`. A missing file names the subcommand that
    /// produces it; a header from another config is refused.
    pub fn read(&self, name: &str, producer: &str) -> Result<String> {
        let Some(path) = self.latest(name) else {
            bail!(
                "missing artifact `{name}` in {}; run `timeds {producer}` first",
                self.dir.display()
            );
        };
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let first = text.lines().next().unwrap_or("");
        match Header::parse(first) {
            Some(h) if h.config_hash == self.hash => Ok(text),
            Some(h) => bail!(
                "artifact {} was produced by config {} but the current config is {}",
                path.display(),
                h.config_hash,
                self.hash
            ),
            None => bail!("artifact {} has no timeds header", path.display()),
        }
    }

    /// Headers of every artifact in the directory, newest versions included.
    pub fn headers(&self) -> Result<Vec<(PathBuf, Option<Header>)>> {
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.dir)? {
            let path = entry?.path();
            if !path.is_file() {
                continue;
            }
            let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            out.push((path, text.lines().next().and_then(Header::parse)));
        }
        out.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_round_trip() {
        let h = Header {
            kind: "manifest".into(),
            config_hash: "ab12".into(),
            seed: 9,
        };
        assert_eq!(Header::parse(&h.line()), Some(h));
        assert_eq!(Header::parse("# something else"), None);
    }

    #[test]
    fn versions_instead_of_overwrites() {
        let tmp = tempfile::tempdir().unwrap();
        let s = Store::open(tmp.path(), "h", 1).unwrap();
        let a = s.write("m.tsv", "manifest", "x\n").unwrap();
        assert_eq!(s.write("m.tsv", "manifest", "x\n").unwrap(), a);
        let b = s.write("m.tsv", "manifest", "y\n").unwrap();
        assert!(b.ends_with("m.v2.tsv"));
        assert!(s.read("m.tsv", "align").unwrap().ends_with("y\n"));
        assert_eq!(fs::read_to_string(a).unwrap().lines().nth(1), Some("x"));
    }

    #[test]
    fn missing_and_foreign_artifacts() {
        let tmp = tempfile::tempdir().unwrap();
        let s = Store::open(tmp.path(), "h", 1).unwrap();
        let e = s.read("series.tsv", "popularity").unwrap_err().to_string();
        assert!(e.contains("timeds popularity"), "{e}");
        fs::write(s.dir().join("k.tsv"), "# timeds artifact=k config_hash=other seed=1\n").unwrap();
        assert!(s.read("k.tsv", "knowledge").unwrap_err().to_string().contains("other"));
    }
}
