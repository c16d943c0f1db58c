//! Binary columnar trajectory dumps.
//!
//! Layout, all little-endian:
//!
//! | offset | size | field                                  |
//! |--------|------|----------------------------------------|
//! | 0      | 8    | magic `OMKTRAJ1`                       |
//! | 8      | 8    | `dt` (f64, seconds)                    |
//! | 16     | 8    | seed (u64)                             |
//! | 24     | 32   | SHA-256 parameter hash                 |
//! | 56     | 8    | column count (u64)                     |
//! | 64     | 8    | row count (u64)                        |
//! | 72     | 8·c  | column names, 8 ASCII bytes, NUL-padded |
//!
//! followed by each column's `rows` f64 values in turn.

use std::io::{Read, Write};

use super::Records;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"OMKTRAJ1";

pub fn write_records(w: &mut impl Write, rec: &Records) -> Result<()> {
    if rec.x.len() != rec.y.len() {
        return Err(Error::invalid("records", "x and y differ in length"));
    }
    w.write_all(MAGIC)?;
    w.write_all(&rec.dt.to_le_bytes())?;
    w.write_all(&rec.seed.to_le_bytes())?;
    w.write_all(&rec.params_hash)?;
    w.write_all(&2u64.to_le_bytes())?;
    w.write_all(&(rec.x.len() as u64).to_le_bytes())?;
    w.write_all(b"x\0\0\0\0\0\0\0")?;
    w.write_all(b"y_hom\0\0\0")?;
    let mut buf = Vec::with_capacity(8 * rec.x.len());
    for col in [&rec.x, &rec.y] {
        buf.clear();
        col.iter().for_each(|v| buf.extend_from_slice(&v.to_le_bytes()));
        w.write_all(&buf)?;
    }
    Ok(())
}

fn take<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)?;
    Ok(b)
}

pub fn read_records(r: &mut impl Read) -> Result<Records> {
    if &take::<8>(r)? != MAGIC {
        return Err(Error::Config("not a trajectory dump (bad magic)".into()));
    }
    let dt = f64::from_le_bytes(take(r)?);
    let seed = u64::from_le_bytes(take(r)?);
    let params_hash = take::<32>(r)?;
    let cols = u64::from_le_bytes(take(r)?) as usize;
    let rows = u64::from_le_bytes(take(r)?) as usize;
    let mut names = Vec::with_capacity(cols);
    for _ in 0..cols {
        let raw = take::<8>(r)?;
        let end = raw.iter().position(|&b| b == 0).unwrap_or(8);
        names.push(String::from_utf8_lossy(&raw[..end]).into_owned());
    }
    let mut data = Vec::with_capacity(cols);
    let mut bytes = vec![0u8; 8 * rows];
    for _ in 0..cols {
        r.read_exact(&mut bytes)?;
        data.push(
            bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect::<Vec<f64>>(),
        );
    }
    let column = |name: &str| -> Result<Vec<f64>> {
        names
            .iter()
            .position(|n| n == name)
            .map(|i| data[i].clone())
            .ok_or_else(|| Error::Config(format!("dump has no `{name}` column")))
    };
    Ok(Records {
        dt,
        seed,
        params_hash,
        x: column("x")?,
        y: column("y_hom")?,
    })
}
