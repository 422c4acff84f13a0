//! Binary field snapshot format.
//!
//! Layout (all little-endian):
//!
//! ```text
//! "NLSQ" | version: u32 | geometry: u8 (0 cartesian, 1 cylindrical)
//! | axis count: u8 | per axis: half-extent f64, count u32
//! | u samples | v samples       (each sample: re f64, im f64, row-major)
//! ```
//!
//! The format carries no transverse-dimension metadata; cylindrical readers
//! take it as a parameter (default 2).

use num_complex::Complex64;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::field::FieldPair;
use crate::grid::{make_grid, AxisSpec, Geometry, GridSpec};
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"NLSQ";
pub const VERSION: u32 = 1;

pub fn encode(pair: &FieldPair) -> Vec<u8> {
    let grid = &pair.grid;
    let mut buf = Vec::with_capacity(16 + grid.len() * 32);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.push(match grid.geometry {
        Geometry::Cartesian => 0,
        Geometry::Cylindrical => 1,
    });
    buf.push(grid.axes.len() as u8);
    for a in &grid.axes {
        buf.extend_from_slice(&a.spec.half_extent.to_le_bytes());
        buf.extend_from_slice(&(a.spec.count as u32).to_le_bytes());
    }
    for arr in [&pair.u, &pair.v] {
        for c in arr {
            buf.extend_from_slice(&c.re.to_le_bytes());
            buf.extend_from_slice(&c.im.to_le_bytes());
        }
    }
    buf
}

pub fn decode(bytes: &[u8], radial_dim: Option<usize>) -> Result<FieldPair> {
    let mut pos = 0usize;
    let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
        if *pos + n > bytes.len() {
            return Err(Error::Snapshot("truncated snapshot".into()));
        }
        let s = &bytes[*pos..*pos + n];
        *pos += n;
        Ok(s)
    };
    if take(&mut pos, 4)? != MAGIC {
        return Err(Error::Snapshot("bad magic".into()));
    }
    let version = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap());
    if version != VERSION {
        return Err(Error::Snapshot(format!("unsupported version {version}")));
    }
    let geom = match take(&mut pos, 1)?[0] {
        0 => Geometry::Cartesian,
        1 => Geometry::Cylindrical,
        g => return Err(Error::Snapshot(format!("unknown geometry tag {g}"))),
    };
    let n_axes = take(&mut pos, 1)?[0] as usize;
    let mut specs = Vec::with_capacity(n_axes);
    for i in 0..n_axes {
        let l = f64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap());
        let m = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
        let spec = match (geom, i) {
            (Geometry::Cylindrical, 0) => AxisSpec::radial(l, m, radial_dim.unwrap_or(2)),
            (Geometry::Cylindrical, _) => AxisSpec::periodic("xn", l, m),
            (Geometry::Cartesian, _) => {
                let name = if i + 1 == n_axes { "xn".to_string() } else { format!("x{}", i + 1) };
                AxisSpec::periodic(&name, l, m)
            }
        };
        specs.push(spec);
    }
    let grid = Arc::new(make_grid(geom, specs, None)?);
    let total = grid.len();
    let read_component = |pos: &mut usize| -> Result<Vec<Complex64>> {
        let mut out = Vec::with_capacity(total);
        for _ in 0..total {
            let re = f64::from_le_bytes(take(pos, 8)?.try_into().unwrap());
            let im = f64::from_le_bytes(take(pos, 8)?.try_into().unwrap());
            out.push(Complex64::new(re, im));
        }
        Ok(out)
    };
    let u = read_component(&mut pos)?;
    let v = read_component(&mut pos)?;
    if pos != bytes.len() {
        return Err(Error::Snapshot("trailing bytes".into()));
    }
    FieldPair::new(grid, u, v)
}

pub fn write_snapshot(path: &Path, pair: &FieldPair) -> Result<()> {
    // Atomic write: temp file in the same directory, then rename.
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
    ));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(&encode(pair))?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_snapshot(path: &Path, radial_dim: Option<usize>) -> Result<FieldPair> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes, radial_dim)
}

/// Store an oscillator-basis eigenvector as a field snapshot with zero v.
pub fn basis_mode_pair(grid: &Arc<GridSpec>, mode: &[f64]) -> Result<FieldPair> {
    if grid.ndim() != 1 || mode.len() != grid.len() {
        return Err(Error::Snapshot("basis snapshots use the 1D transverse grid".into()));
    }
    let u: Vec<Complex64> = mode.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let v = vec![Complex64::default(); mode.len()];
    FieldPair::new(grid.clone(), u, v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_bit_exact() {
        let grid = Arc::new(
            make_grid(
                Geometry::Cylindrical,
                vec![AxisSpec::radial(9.5, 32, 3), AxisSpec::periodic("xn", 7.0, 16)],
                None,
            )
            .unwrap(),
        );
        let pair = FieldPair::from_fn(
            grid.clone(),
            |x| Complex64::new((-x[0]).exp() * x[1], 0.25 * x[1]),
            |x| Complex64::new(x[0] * x[1], -1.0),
        );
        let bytes = encode(&pair);
        assert_eq!(&bytes[..4], MAGIC);
        assert_eq!(bytes[8], 1); // geometry tag
        assert_eq!(bytes[9], 2); // axis count
        let back = decode(&bytes, Some(3)).unwrap();
        assert_eq!(back.u, pair.u);
        assert_eq!(back.v, pair.v);
        assert_eq!(encode(&back), bytes);
    }

    #[test]
    fn rejects_corrupt_input() {
        let grid = Arc::new(
            make_grid(Geometry::Cartesian, vec![AxisSpec::periodic("xn", 4.0, 8)], None).unwrap(),
        );
        let pair = FieldPair::zeros(grid);
        let mut bytes = encode(&pair);
        bytes[0] = b'X';
        assert!(matches!(decode(&bytes, None), Err(Error::Snapshot(_))));
        let bytes = encode(&pair);
        assert!(matches!(decode(&bytes[..bytes.len() - 1], None), Err(Error::Snapshot(_))));
    }
}
