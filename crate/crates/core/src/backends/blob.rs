//! Vector blob format shared by precomputed embeddings and persisted indexes.
//!
//! A blob is a concatenation of records, each a little-endian `u32` length
//! followed by that many little-endian `f32` values.

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};

pub fn write_vectors<W: Write>(mut w: W, vectors: &[Vec<f64>]) -> Result<()> {
    for v in vectors {
        let len = u32::try_from(v.len())
            .map_err(|_| Error::Input(format!("vector of length {} too long", v.len())))?;
        w.write_u32::<LittleEndian>(len)?;
        for &x in v {
            w.write_f32::<LittleEndian>(x as f32)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_vectors<R: Read>(mut r: R) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::new();
    loop {
        let len = match r.read_u32::<LittleEndian>() {
            Ok(n) => n as usize,
            Err(e) if e.kind() == ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        };
        let mut v = Vec::with_capacity(len);
        for _ in 0..len {
            let x = r.read_f32::<LittleEndian>().map_err(|e| {
                if e.kind() == ErrorKind::UnexpectedEof {
                    Error::Input(format!("truncated vector blob (record {})", out.len()))
                } else {
                    e.into()
                }
            })?;
            v.push(f64::from(x));
        }
        out.push(v);
    }
    Ok(out)
}

pub fn write_file(path: &Path, vectors: &[Vec<f64>]) -> Result<()> {
    write_vectors(BufWriter::new(File::create(path)?), vectors)
}

pub fn read_file(path: &Path) -> Result<Vec<Vec<f64>>> {
    let f = File::open(path)
        .map_err(|e| Error::Input(format!("cannot open vector blob {}: {e}", path.display())))?;
    read_vectors(BufReader::new(f))
}
