//! Dataset manifest: one tab-separated record per line with the fields
//! `path split mirror seed sigma_g`.
//!
//! `mirror` is `0` or `1`; `sigma_g` is `-` until noise has been drawn.
//! Materialized images are named after the source stem, with `_m` appended
//! for mirrors.

use std::path::Path;

use anyhow::{anyhow, Context, Result};
use naada_core::dataset::{ManifestRecord, Split};

pub const HEADER: &str = "# path\tsplit\tmirror\tseed\tsigma_g";

pub fn render(records: &[ManifestRecord]) -> String {
    let mut out = String::from(HEADER);
    out.push('\n');
    for r in records {
        let sigma = r.sigma_g.map_or_else(|| "-".to_string(), |s| s.to_string());
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            r.path,
            r.split,
            u8::from(r.mirror),
            r.seed,
            sigma
        ));
    }
    out
}

pub fn parse(text: &str) -> Result<Vec<ManifestRecord>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let at = |what: &str| anyhow!("manifest line {}: {what}", i + 1);
        let fields: Vec<&str> = line.split('\t').collect();
        let [path, split, mirror, seed, sigma] = fields[..] else {
            return Err(at(&format!("expected 5 tab-separated fields, found {}", fields.len())));
        };
        out.push(ManifestRecord {
            path: path.to_string(),
            split: split
                .parse::<Split>()
                .map_err(|_| at(&format!("unknown split {split:?}")))?,
            mirror: match mirror {
                "0" => false,
                "1" => true,
                _ => return Err(at(&format!("mirror flag must be 0 or 1, found {mirror:?}"))),
            },
            seed: seed.parse().map_err(|_| at(&format!("bad seed {seed:?}")))?,
            sigma_g: match sigma {
                "-" => None,
                s => Some(s.parse().map_err(|_| at(&format!("bad sigma_g {s:?}")))?),
            },
        });
    }
    Ok(out)
}

pub fn read(path: &Path) -> Result<Vec<ManifestRecord>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
    parse(&text).with_context(|| format!("parsing {}", path.display()))
}

/// File stem of the materialized clean and noisy images of `r`.
pub fn record_name(r: &ManifestRecord) -> Result<String> {
    let stem = crate::io::stem(Path::new(&r.path))?;
    Ok(if r.mirror { format!("{stem}_m") } else { stem })
}
