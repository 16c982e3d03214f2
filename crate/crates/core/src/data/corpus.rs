use std::path::{Path, PathBuf};

use super::image::{load_gray, GrayImage};
use crate::{Error, Result};

/// An image and a short name for it (the file stem when loaded from disk).
#[derive(Clone, Debug, PartialEq)]
pub struct NamedImage {
    pub id: String,
    pub image: GrayImage,
}

/// Parses a manifest: one image path per line, blank lines ignored, `#`
/// starts a comment. Relative paths resolve against the manifest's directory.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).at_path(path))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let entries: Vec<PathBuf> = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(|l| base.join(l))
        .collect();
    if entries.is_empty() {
        return Err(Error::Empty(format!("manifest {} lists no images", path.display())));
    }
    Ok(entries)
}

pub fn load_corpus(manifest: impl AsRef<Path>) -> Result<Vec<NamedImage>> {
    load_manifest(manifest)?
        .into_iter()
        .map(|p| {
            Ok(NamedImage {
                id: image_id(&p),
                image: load_gray(&p)?,
            })
        })
        .collect()
}

pub fn image_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}
