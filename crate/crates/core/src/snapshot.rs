//! `CPLF1` field snapshots.
//!
//! Layout: one ASCII line `CPLF1 <nx> <ny> <lx> <ly>\n` followed by
//! `nx · ny` little-endian `f64` values in row-major cell order.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};

pub const MAGIC: &str = "CPLF1";

pub fn encode(field: &ScalarField) -> Vec<u8> {
    let g = field.grid();
    let header = format!("{MAGIC} {} {} {} {}\n", g.nx, g.ny, g.lx, g.ly);
    let mut out = Vec::with_capacity(header.len() + 8 * g.len());
    out.extend_from_slice(header.as_bytes());
    for v in field.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<ScalarField> {
    let err = |message: String| Error::Snapshot {
        path: path.to_path_buf(),
        message,
    };
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| err("missing header line".into()))?;
    let header =
        std::str::from_utf8(&bytes[..nl]).map_err(|_| err("header is not ASCII".into()))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 5 || parts[0] != MAGIC {
        return Err(err(format!("bad header `{header}`")));
    }
    let parse_usize = |s: &str, what: &str| {
        s.parse::<usize>()
            .map_err(|_| err(format!("bad {what} `{s}`")))
    };
    let parse_f64 = |s: &str, what: &str| {
        s.parse::<f64>()
            .map_err(|_| err(format!("bad {what} `{s}`")))
    };
    let nx = parse_usize(parts[1], "nx")?;
    let ny = parse_usize(parts[2], "ny")?;
    let lx = parse_f64(parts[3], "lx")?;
    let ly = parse_f64(parts[4], "ly")?;
    let grid = Grid::new(nx, ny, lx, ly).map_err(|e| err(e.to_string()))?;
    let body = &bytes[nl + 1..];
    if body.len() != 8 * grid.len() {
        return Err(err(format!(
            "expected {} payload bytes, found {}",
            8 * grid.len(),
            body.len()
        )));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    ScalarField::from_vec(grid, values)
}

pub fn write(path: &Path, field: &ScalarField) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&encode(field))
        .map_err(|e| Error::io(path, e))?;
    f.sync_all().map_err(|e| Error::io(path, e))
}

pub fn read(path: &Path) -> Result<ScalarField> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let g = Grid::new(3, 4, 1.0, 0.5).unwrap();
        let f = ScalarField::from_fn(g, |x, y| x - y);
        let bytes = encode(&f);
        assert!(bytes.starts_with(b"CPLF1 3 4 1 0.5\n"));
        assert_eq!(bytes.len(), "CPLF1 3 4 1 0.5\n".len() + 12 * 8);
        let first = f64::from_le_bytes(bytes[16..24].try_into().unwrap());
        assert_eq!(first, f.values()[0]);
    }

    #[test]
    fn rejects_corrupt_input() {
        let p = Path::new("x");
        assert!(decode(b"CPLF2 3 3 1 1\n", p).is_err());
        assert!(decode(b"CPLF1 3 3 1 1\n\0\0", p).is_err());
        assert!(decode(b"no newline", p).is_err());
        assert!(decode(b"CPLF1 2 3 1 1\n", p).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(nx in 3usize..9, ny in 3usize..9, lx in 0.1f64..10.0, seed in any::<u64>()) {
            let g = Grid::new(nx, ny, lx, 1.0).unwrap();
            let f = ScalarField::from_fn(g, |x, y| (x * seed as f64).sin() * 1e10 + y);
            let back = decode(&encode(&f), Path::new("mem")).unwrap();
            prop_assert_eq!(back, f);
        }
    }
}
