//! VCKP checkpoints: parameters, Adam moments and the step counter.
//!
//! Layout (little-endian): `"VCKP" | u32 version=1 | u32 count | entries |
//! u32 count | moment entries | u64 step`. An entry is `u32 name length,
//! UTF-8 name, u32 rank, rank × u32 dims, values as f64`. Moments are
//! written per parameter as `<name>.m` then `<name>.v`.

use std::collections::BTreeSet;
use std::path::Path;

use hiercap_core::train::AdamState;
use hiercap_core::{ParamRegistry, Tensor};

use crate::bytes::Reader;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"VCKP";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ParamRegistry,
    pub adam: AdamState,
}

fn put_entry(out: &mut Vec<u8>, name: &str, shape: &[usize], values: &[f64]) {
    out.extend_from_slice(&(name.len() as u32).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
    for &d in shape {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &x in values {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

pub fn encode(params: &ParamRegistry, adam: &AdamState) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (_, name, t) in params.iter() {
        put_entry(&mut out, name, t.shape(), t.data());
    }
    out.extend_from_slice(&(2 * params.len() as u32).to_le_bytes());
    for (id, name, t) in params.iter() {
        put_entry(&mut out, &format!("{name}.m"), t.shape(), &adam.m[id.index()]);
        put_entry(&mut out, &format!("{name}.v"), t.shape(), &adam.v[id.index()]);
    }
    out.extend_from_slice(&adam.step.to_le_bytes());
    out
}

struct Entry {
    offset: usize,
    name: String,
    shape: Vec<usize>,
    values: Vec<f64>,
}

fn entry(r: &mut Reader<'_>) -> Result<Entry> {
    let offset = r.pos();
    let len = r.u32("name length")? as usize;
    let raw = r.take(len, "name")?;
    let name = std::str::from_utf8(raw)
        .map_err(|_| Error::format("name is not UTF-8", offset + 4))?
        .to_string();
    let rank_at = r.pos();
    let rank = r.u32("rank")? as usize;
    if rank == 0 || rank > 8 {
        return Err(Error::format(format!("`{name}`: unsupported rank {rank}"), rank_at));
    }
    let mut shape = Vec::with_capacity(rank);
    for _ in 0..rank {
        shape.push(r.u32("dim")? as usize);
    }
    let count = shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .filter(|&c| c > 0 && c.checked_mul(8).is_some_and(|b| b <= r.remaining()))
        .ok_or_else(|| {
            Error::format(format!("`{name}`: shape {shape:?} does not fit the file"), rank_at)
        })?;
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        values.push(r.f64("value")?);
    }
    Ok(Entry {
        offset,
        name,
        shape,
        values,
    })
}

fn block(r: &mut Reader<'_>, what: &str) -> Result<Vec<Entry>> {
    let n = r.u32(what)? as usize;
    let mut seen = BTreeSet::new();
    let mut entries = Vec::new();
    for _ in 0..n {
        let e = entry(r)?;
        if !seen.insert(e.name.clone()) {
            return Err(Error::format(format!("duplicate name `{}`", e.name), e.offset));
        }
        entries.push(e);
    }
    Ok(entries)
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader::new(bytes);
    r.magic(MAGIC)?;
    r.version(VERSION)?;
    let entries = block(&mut r, "parameter count")?;
    let mut params = ParamRegistry::new();
    for e in entries {
        let t = Tensor::new(e.shape, e.values)?;
        params
            .insert(&e.name, t)
            .map_err(|_| Error::format(format!("duplicate name `{}`", e.name), e.offset))?;
    }
    let count_at = r.pos();
    let moments = block(&mut r, "moment count")?;
    if moments.len() != 2 * params.len() {
        return Err(Error::format(
            format!("{} moment entries for {} parameters", moments.len(), params.len()),
            count_at,
        ));
    }
    let mut adam = AdamState::for_registry(&params);
    for e in moments {
        let (base, slot) = match e.name.rsplit_once('.') {
            Some((b, "m")) => (b, 0),
            Some((b, "v")) => (b, 1),
            _ => {
                return Err(Error::format(
                    format!("moment `{}` lacks a .m/.v suffix", e.name),
                    e.offset,
                ))
            }
        };
        let id = params.id(base).ok_or_else(|| {
            Error::format(format!("moment `{}` has no parameter", e.name), e.offset)
        })?;
        if params.get(id).shape() != e.shape.as_slice() {
            return Err(Error::format(
                format!("moment `{}` shape {:?} differs from its parameter", e.name, e.shape),
                e.offset,
            ));
        }
        let target = if slot == 0 { &mut adam.m } else { &mut adam.v };
        target[id.index()] = e.values;
    }
    adam.step = r.u64("step counter")?;
    r.finish()?;
    Ok(Checkpoint { params, adam })
}

pub fn save(path: &Path, params: &ParamRegistry, adam: &AdamState) -> Result<()> {
    std::fs::write(path, encode(params, adam)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|e| match e {
        Error::Format { what, offset } => Error::Format {
            what: format!("{}: {what}", path.display()),
            offset,
        },
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> (ParamRegistry, AdamState) {
        let mut p = ParamRegistry::new();
        p.insert("a.w", Tensor::new(vec![2, 3], vec![0.1, -0.2, 0.3, 1e-300, 5.0, -0.0]).unwrap())
            .unwrap();
        p.insert("b", Tensor::vector(vec![f64::MIN_POSITIVE, 7.5])).unwrap();
        let mut adam = AdamState::for_registry(&p);
        adam.m[0][1] = 0.25;
        adam.v[1][0] = 3e-9;
        adam.step = 42;
        (p, adam)
    }

    #[test]
    fn round_trip_is_bitwise() {
        let (p, a) = sample();
        let bytes = encode(&p, &a);
        let back = decode(&bytes).unwrap();
        assert_eq!(encode(&back.params, &back.adam), bytes);
        assert_eq!(back.adam.step, 42);
    }

    #[test]
    fn corrupt_files_are_rejected_with_position() {
        let (p, a) = sample();
        let good = encode(&p, &a);
        let mut bad = good.clone();
        bad[1] = b'Z';
        assert!(matches!(decode(&bad), Err(Error::Format { offset: 0, .. })));
        let mut v = good.clone();
        v[4] = 9;
        assert!(matches!(decode(&v), Err(Error::Format { offset: 4, .. })));
        let cut = &good[..good.len() - 4];
        assert!(matches!(decode(cut), Err(Error::Format { .. })));
        let mut trailing = good.clone();
        trailing.push(0);
        assert!(decode(&trailing).is_err());
    }

    #[test]
    fn duplicate_names_are_rejected() {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&2u32.to_le_bytes());
        put_entry(&mut out, "x", &[1], &[1.0]);
        let second = out.len();
        put_entry(&mut out, "x", &[1], &[2.0]);
        match decode(&out) {
            Err(Error::Format { offset, what }) => {
                assert_eq!(offset, second);
                assert!(what.contains("duplicate"));
            }
            other => panic!("{other:?}"),
        }
    }
}
