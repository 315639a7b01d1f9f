//! Grayscale image files and directory listings.
//!
//! 8- and 16-bit PNG and PGM are read into the `[0, 255]` domain; colour
//! images are converted to luma first. Written images are 16-bit unless
//! stated otherwise, so unit-domain results keep their precision.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use image::{DynamicImage, ImageBuffer, Luma};
use naada_core::{Domain, GrayImage};

pub const IMAGE_EXTENSIONS: [&str; 3] = ["png", "pgm", "pnm"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

fn gray(height: usize, width: usize, values: Vec<f64>) -> Result<GrayImage> {
    Ok(GrayImage::new(height, width, values, Domain::Gray255)?)
}

/// Reads an image as gray levels in `[0, 255]`.
pub fn read_gray(path: &Path) -> Result<GrayImage> {
    let img = image::open(path).with_context(|| format!("reading {}", path.display()))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageLuma8(buf) => gray(h, w, buf.into_raw().into_iter().map(f64::from).collect()),
        DynamicImage::ImageLuma16(buf) => gray(h, w, from_u16(buf.into_raw())),
        other => {
            log::debug!("{}: converting {:?} to luma", path.display(), other.color());
            gray(h, w, from_u16(other.to_luma16().into_raw()))
        }
    }
    .with_context(|| format!("decoding {}", path.display()))
}

fn from_u16(raw: Vec<u16>) -> Vec<f64> {
    raw.into_iter().map(|v| f64::from(v) * 255.0 / 65535.0).collect()
}

/// Reads an image and rescales it to `[0, 1]`.
pub fn read_unit(path: &Path) -> Result<GrayImage> {
    Ok(read_gray(path)?.to_domain(Domain::Unit))
}

fn quantize(img: &GrayImage, levels: f64) -> impl Iterator<Item = f64> + '_ {
    let max = img.domain().max();
    img.values().iter().map(move |v| (v / max * levels).round())
}

/// Encodes `img` at the given depth; the format follows the extension.
pub fn write_image(path: &Path, img: &GrayImage, depth: BitDepth) -> Result<()> {
    let (w, h) = (img.width() as u32, img.height() as u32);
    let res = match depth {
        BitDepth::Eight => {
            let raw: Vec<u8> = quantize(img, 255.0).map(|v| v as u8).collect();
            ImageBuffer::<Luma<u8>, _>::from_raw(w, h, raw)
                .expect("buffer size")
                .save(path)
        }
        BitDepth::Sixteen => {
            let raw: Vec<u16> = quantize(img, 65535.0).map(|v| v as u16).collect();
            ImageBuffer::<Luma<u16>, _>::from_raw(w, h, raw)
                .expect("buffer size")
                .save(path)
        }
    };
    res.with_context(|| format!("writing {}", path.display()))
}

pub fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

/// Image files directly inside `dir`, sorted by file name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        if path.is_file() && is_image(&path) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// Expands a mix of files and directories into a sorted image list.
pub fn collect_images(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            out.extend(list_images(p)?);
        } else if p.is_file() {
            out.push(p.clone());
        } else {
            bail!("no such file or directory: {}", p.display());
        }
    }
    Ok(out)
}

pub fn stem(path: &Path) -> Result<String> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_owned)
        .with_context(|| format!("unusable file name {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp() -> GrayImage {
        GrayImage::new(3, 4, (0..12).map(|i| i as f64 * 20.0).collect(), Domain::Gray255).unwrap()
    }

    #[test]
    fn eight_bit_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        for ext in ["png", "pgm"] {
            let p = dir.path().join(format!("a.{ext}"));
            write_image(&p, &ramp(), BitDepth::Eight).unwrap();
            assert_eq!(read_gray(&p).unwrap(), ramp());
        }
    }

    #[test]
    fn sixteen_bit_keeps_unit_precision() {
        let dir = tempfile::tempdir().unwrap();
        let img = GrayImage::new(2, 3, vec![0.0, 0.1, 0.25, 0.5, 0.999, 1.0], Domain::Unit).unwrap();
        for ext in ["png", "pgm"] {
            let p = dir.path().join(format!("u.{ext}"));
            write_image(&p, &img, BitDepth::Sixteen).unwrap();
            let back = read_unit(&p).unwrap();
            for (a, b) in back.values().iter().zip(img.values()) {
                assert!((a - b).abs() <= 0.5 / 65535.0 + 1e-12, "{ext}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn listing_is_sorted_and_filtered() {
        let dir = tempfile::tempdir().unwrap();
        for name in ["b.png", "a.PGM", "notes.txt"] {
            fs::write(dir.path().join(name), b"").unwrap();
        }
        let names: Vec<_> = list_images(dir.path())
            .unwrap()
            .iter()
            .map(|p| p.file_name().unwrap().to_str().unwrap().to_owned())
            .collect();
        assert_eq!(names, ["a.PGM", "b.png"]);
        assert!(read_gray(&dir.path().join("b.png")).is_err());
    }
}
