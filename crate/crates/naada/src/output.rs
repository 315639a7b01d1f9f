//! The `--out` directory of a run and the list of files it produced.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use naada_core::GrayImage;

use crate::io::{write_image, BitDepth};

pub const MANIFEST_FILE: &str = "MANIFEST";

#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    files: BTreeSet<PathBuf>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            files: BTreeSet::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Absolute location of `rel`, creating its parent directory and
    /// recording it as an output.
    pub fn claim(&mut self, rel: impl AsRef<Path>) -> Result<PathBuf> {
        let rel = rel.as_ref();
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        self.files.insert(rel.to_path_buf());
        Ok(path)
    }

    pub fn write(&mut self, rel: impl AsRef<Path>, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
        let path = self.claim(rel)?;
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn image(&mut self, rel: impl AsRef<Path>, img: &GrayImage, depth: BitDepth) -> Result<PathBuf> {
        let path = self.claim(rel)?;
        write_image(&path, img, depth)?;
        Ok(path)
    }

    pub fn csv(&mut self, rel: impl AsRef<Path>) -> Result<csv::Writer<fs::File>> {
        let path = self.claim(rel)?;
        csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))
    }

    pub fn files(&self) -> impl Iterator<Item = &Path> {
        self.files.iter().map(PathBuf::as_path)
    }

    /// Writes the resolved config snapshot and the `MANIFEST` listing every
    /// recorded output (the snapshot included), one relative path per line.
    pub fn finish(mut self, snapshot: &str) -> Result<()> {
        self.write(crate::config::SNAPSHOT_FILE, snapshot)?;
        let mut listing = String::new();
        for f in &self.files {
            listing.push_str(&f.to_string_lossy().replace('\\', "/"));
            listing.push('\n');
        }
        let path = self.root.join(MANIFEST_FILE);
        fs::write(&path, listing).with_context(|| format!("writing {}", path.display()))
    }
}
