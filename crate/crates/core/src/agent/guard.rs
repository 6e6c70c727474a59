use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};

/// Outcome of resolving a model-supplied path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum PathVerdict {
    Allowed { resolved: PathBuf },
    Denied { path: String, reason: String },
}

impl PathVerdict {
    pub fn is_allowed(&self) -> bool {
        matches!(self, PathVerdict::Allowed { .. })
    }
}

/// Confines tool file access to the data directory and one run directory.
///
/// Model paths are virtual: `data/...` maps onto the data directory and
/// `output/...` onto the output directory; absolute paths are taken as-is.
/// The mapped path is resolved with symlinks followed and `..` collapsed,
/// and must land inside one of the roots.
#[derive(Debug, Clone)]
pub struct PathGuard {
    data_dir: PathBuf,
    output_dir: PathBuf,
    data_root: PathBuf,
    run_root: PathBuf,
}

impl PathGuard {
    /// Both directories must exist.
    pub fn new(data_dir: &Path, output_dir: &Path, run_dir: &Path) -> std::io::Result<Self> {
        Ok(PathGuard {
            data_dir: data_dir.to_path_buf(),
            output_dir: output_dir.to_path_buf(),
            data_root: data_dir.canonicalize()?,
            run_root: run_dir.canonicalize()?,
        })
    }

    pub fn data_root(&self) -> &Path {
        &self.data_root
    }

    pub fn run_root(&self) -> &Path {
        &self.run_root
    }

    fn map_virtual(&self, candidate: &str) -> Option<PathBuf> {
        let p = Path::new(candidate);
        if p.is_absolute() {
            return Some(p.to_path_buf());
        }
        let mut comps = p.components().filter(|c| !matches!(c, Component::CurDir));
        let base = match comps.next()? {
            Component::Normal(first) if first == "data" => &self.data_dir,
            Component::Normal(first) if first == "output" => &self.output_dir,
            _ => return None,
        };
        let mut out = base.clone();
        out.extend(comps);
        Some(out)
    }

    pub fn check(&self, candidate: &str) -> PathVerdict {
        let denied = |reason: &str| PathVerdict::Denied {
            path: candidate.to_string(),
            reason: reason.to_string(),
        };
        if candidate.contains('\0') {
            return denied("path contains a NUL byte");
        }
        let Some(mapped) = self.map_virtual(candidate.trim()) else {
            return denied("only data/ and this run's output directory are accessible");
        };
        let Some(resolved) = canonicalize_lenient(&mapped) else {
            return denied("path cannot be resolved");
        };
        if resolved.starts_with(&self.data_root) || resolved.starts_with(&self.run_root) {
            PathVerdict::Allowed { resolved }
        } else {
            denied("path resolves outside data/ and this run's output directory")
        }
    }
}

/// Resolves `path` one component at a time: existing prefixes are
/// canonicalized (following symlinks), missing components are appended
/// lexically and `..` pops the resolved parent.
pub fn canonicalize_lenient(path: &Path) -> Option<PathBuf> {
    let absolute = std::path::absolute(path).ok()?;
    let mut out = PathBuf::new();
    for c in absolute.components() {
        match c {
            Component::Prefix(_) | Component::RootDir => out.push(c.as_os_str()),
            Component::CurDir => {}
            Component::ParentDir => {
                out.pop();
            }
            Component::Normal(n) => {
                out.push(n);
                if out.symlink_metadata().is_ok() {
                    out = out.canonicalize().ok()?;
                }
            }
        }
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixture {
        _tmp: tempfile::TempDir,
        guard: PathGuard,
        root: PathBuf,
    }

    fn fixture() -> Fixture {
        let tmp = tempfile::tempdir().unwrap();
        let root = tmp.path().canonicalize().unwrap();
        for d in ["data", "output/r1", "output/r2"] {
            std::fs::create_dir_all(root.join(d)).unwrap();
        }
        std::fs::write(root.join("data/85332ENG.csv"), "a\n").unwrap();
        std::fs::write(root.join("secrets"), "x").unwrap();
        let guard = PathGuard::new(&root.join("data"), &root.join("output"), &root.join("output/r1")).unwrap();
        Fixture { _tmp: tmp, guard, root }
    }

    #[test]
    fn allows_data_and_own_run() {
        let f = fixture();
        for p in ["data/85332ENG.csv", "./data/85332ENG.csv", "data/", "output/r1/plot.png", "output/r1/new/dir/x"] {
            assert!(f.guard.check(p).is_allowed(), "{p}");
        }
        let abs = f.root.join("data/85332ENG.csv");
        assert!(f.guard.check(abs.to_str().unwrap()).is_allowed());
    }

    #[test]
    fn denies_escapes() {
        let f = fixture();
        for p in [
            "../secrets",
            "data/../secrets",
            "data/../../etc/passwd",
            "output/r2/plot.png",
            "output/",
            "output/r1/../r2/x",
            "/etc/passwd",
            "secrets",
            "",
        ] {
            match f.guard.check(p) {
                PathVerdict::Denied { path, .. } => assert_eq!(path, p),
                other => panic!("{p} -> {other:?}"),
            }
        }
    }

    #[cfg(unix)]
    #[test]
    fn symlink_out_of_data_is_denied() {
        let f = fixture();
        std::os::unix::fs::symlink(f.root.join("secrets"), f.root.join("data/link")).unwrap();
        std::os::unix::fs::symlink(f.root.join("output/r2"), f.root.join("output/r1/peek")).unwrap();
        assert!(!f.guard.check("data/link").is_allowed());
        assert!(!f.guard.check("output/r1/peek/plot.png").is_allowed());
        // a missing component followed by `..` must not skip symlink resolution
        assert!(!f.guard.check("data/missing/../link").is_allowed());
        assert!(!f.guard.check("output/r1/nope/../peek/x").is_allowed());
    }
}
