//! Binary checkpoint container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "NAADACKP"  u32 version
//! u32 len, UTF-8 header of `key=value` lines (the network spec)
//! u32 count, then per entry:
//!     u32 len, UTF-8 name   u32 ndim   u64 dims[ndim]   f64 data[prod(dims)]
//! ```
//!
//! Entries are `<layer>.weight`, `<layer>.bias`, `<bn>.running_mean`,
//! `<bn>.running_var` and `attn.gamma`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::network::{NetworkSpec, NetworkState};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"NAADACKP";
pub const VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len());
    out.extend_from_slice(s.as_bytes());
}

fn put_entry(out: &mut Vec<u8>, name: &str, shape: &[usize], data: &[f64]) {
    put_str(out, name);
    put_u32(out, shape.len());
    for &d in shape {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Serializes weights, running statistics and the spec.
pub fn encode(state: &NetworkState) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let header: String = state
        .spec
        .to_pairs()
        .iter()
        .map(|(k, v)| format!("{k}={v}\n"))
        .collect();
    put_str(&mut out, &header);

    let layers = state.layers();
    let count = 1 + layers
        .iter()
        .map(|(_, l)| if l.running.is_some() { 4 } else { 2 })
        .sum::<usize>();
    put_u32(&mut out, count);
    for (name, l) in &layers {
        put_entry(&mut out, &format!("{name}.weight"), l.weight.shape(), l.weight.data());
        put_entry(&mut out, &format!("{name}.bias"), l.bias.shape(), l.bias.data());
        if let Some(r) = &l.running {
            put_entry(&mut out, &format!("{name}.running_mean"), &[r.mean.len()], &r.mean);
            put_entry(&mut out, &format!("{name}.running_var"), &[r.var.len()], &r.var);
        }
    }
    let g = &state.attention.gamma;
    put_entry(&mut out, "attn.gamma", g.shape(), g.data());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn str(&mut self) -> Result<&'a str> {
        let n = self.u32()?;
        core::str::from_utf8(self.take(n)?).map_err(|_| Error::Checkpoint("invalid UTF-8".into()))
    }
}

struct Entry {
    shape: Vec<usize>,
    data: Vec<f64>,
}

/// Parses a checkpoint back into a network in eval mode.
pub fn decode(bytes: &[u8]) -> Result<NetworkState> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != VERSION as usize {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let mut spec = NetworkSpec::default();
    for line in r.str()?.lines().filter(|l| !l.trim().is_empty()) {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Checkpoint(format!("bad header line {line:?}")))?;
        spec.set(k.trim(), v.trim())?;
    }

    let mut entries = BTreeMap::new();
    for _ in 0..r.u32()? {
        let name = String::from(r.str()?);
        let ndim = r.u32()?;
        let shape = (0..ndim)
            .map(|_| r.u64().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let n = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
        let n = n
            .filter(|&n| n <= bytes.len() / 8)
            .ok_or_else(|| Error::Checkpoint(format!("{name}: implausible shape")))?;
        let data = r
            .take(n * 8)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        if entries.insert(name.clone(), Entry { shape, data }).is_some() {
            return Err(Error::Checkpoint(format!("duplicate entry {name}")));
        }
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
    }

    let mut state = NetworkState::new(spec, 0)?;
    let mut take = |name: String, expect: &[usize]| -> Result<Vec<f64>> {
        let e = entries
            .remove(&name)
            .ok_or_else(|| Error::Checkpoint(format!("missing entry {name}")))?;
        if e.shape != expect {
            return Err(Error::Checkpoint(format!(
                "{name} has shape {:?}, expected {expect:?}",
                e.shape
            )));
        }
        Ok(e.data)
    };
    for (name, l) in state.layers_mut() {
        l.weight = Tensor::parameter(take(format!("{name}.weight"), l.weight.shape())?, l.weight.shape())?;
        l.bias = Tensor::parameter(take(format!("{name}.bias"), l.bias.shape())?, l.bias.shape())?;
        if let Some(run) = &mut l.running {
            run.mean = take(format!("{name}.running_mean"), &[run.mean.len()])?;
            run.var = take(format!("{name}.running_var"), &[run.var.len()])?;
        }
    }
    let g = state.attention.gamma.shape().to_vec();
    state.attention.gamma = Tensor::parameter(take("attn.gamma".into(), &g)?, &g)?;
    if let Some(extra) = entries.keys().next() {
        return Err(Error::Checkpoint(format!("unexpected entry {extra}")));
    }
    state.training = false;
    Ok(state)
}
