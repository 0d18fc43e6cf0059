//! Binary ("QCTW") and CSV serialization of phase-space grids.
//!
//! Binary layout, all little endian:
//! `b"QCTW"`, version `u32 = 1`, `n_x: u32`, `n_p: u32`,
//! `x_min, dx, p_min, dp: f64`, then `n_x·n_p` `f64` values row-major in x.

use std::io::{Read, Write};

use super::WignerGrid;
use crate::error::{Error, Result};

pub const QCTW_MAGIC: [u8; 4] = *b"QCTW";
pub const QCTW_VERSION: u32 = 1;

pub fn write_qctw<W: Write>(grid: &WignerGrid, mut out: W) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(48 + 8 * grid.values.len());
    buf.extend_from_slice(&QCTW_MAGIC);
    buf.extend_from_slice(&QCTW_VERSION.to_le_bytes());
    buf.extend_from_slice(&(grid.n_x as u32).to_le_bytes());
    buf.extend_from_slice(&(grid.n_p as u32).to_le_bytes());
    for v in [grid.x_min, grid.dx, grid.p_min, grid.dp] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for v in &grid.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)
}

pub fn read_qctw<R: Read>(mut input: R) -> Result<WignerGrid> {
    let mut bytes = Vec::new();
    input
        .read_to_end(&mut bytes)
        .map_err(|e| Error::Format(e.to_string()))?;
    if bytes.len() < 44 {
        return Err(Error::Format(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if bytes[..4] != QCTW_MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32_at(4);
    if version != QCTW_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let n_x = u32_at(8) as usize;
    let n_p = u32_at(12) as usize;
    let (x_min, dx, p_min, dp) = (f64_at(16), f64_at(24), f64_at(32), f64_at(40));
    let expected = 48 + 8 * n_x * n_p;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "expected {expected} bytes for a {n_x}x{n_p} grid, found {}",
            bytes.len()
        )));
    }
    let values = bytes[48..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(WignerGrid {
        n_x,
        n_p,
        x_min,
        dx,
        p_min,
        dp,
        values,
    })
}

/// `x,p,w` rows in the same order as the binary dump.
pub fn write_wigner_csv<W: Write>(grid: &WignerGrid, out: W) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(out);
    writeln!(out, "x,p,w")?;
    for i in 0..grid.n_x {
        let x = grid.x(i);
        for j in 0..grid.n_p {
            writeln!(out, "{},{},{}", x, grid.p(j), grid.at(i, j))?;
        }
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid_strategy() -> impl Strategy<Value = WignerGrid> {
        (1usize..6, 1usize..6, -10.0f64..10.0, 1e-3f64..1.0, -10.0f64..10.0, 1e-3f64..1.0)
            .prop_flat_map(|(nx, np, x0, dx, p0, dp)| {
                proptest::collection::vec(proptest::num::f64::ANY, nx * np).prop_map(move |values| {
                    WignerGrid {
                        n_x: nx,
                        n_p: np,
                        x_min: x0,
                        dx,
                        p_min: p0,
                        dp,
                        values,
                    }
                })
            })
    }

    proptest! {
        #[test]
        fn binary_round_trip_is_bit_exact(grid in grid_strategy()) {
            let mut bytes = Vec::new();
            write_qctw(&grid, &mut bytes).unwrap();
            prop_assert_eq!(bytes.len(), 48 + 8 * grid.values.len());
            let back = read_qctw(&bytes[..]).unwrap();
            let mut again = Vec::new();
            write_qctw(&back, &mut again).unwrap();
            prop_assert_eq!(bytes, again);
        }
    }

    #[test]
    fn header_layout() {
        let g = WignerGrid {
            n_x: 2,
            n_p: 1,
            x_min: -1.0,
            dx: 0.5,
            p_min: -2.0,
            dp: 0.25,
            values: vec![1.5, -0.5],
        };
        let mut bytes = Vec::new();
        write_qctw(&g, &mut bytes).unwrap();
        assert_eq!(&bytes[..4], b"QCTW");
        assert_eq!(&bytes[4..8], &[1, 0, 0, 0]);
        assert_eq!(&bytes[8..12], &[2, 0, 0, 0]);
        assert_eq!(&bytes[12..16], &[1, 0, 0, 0]);
        assert_eq!(&bytes[16..24], &(-1.0f64).to_le_bytes());
        assert_eq!(&bytes[56..64], &(-0.5f64).to_le_bytes());
    }

    #[test]
    fn rejects_corrupt_dumps() {
        let g = WignerGrid::zeros(2, 2, 0.0, 1.0, 0.0, 1.0);
        let mut bytes = Vec::new();
        write_qctw(&g, &mut bytes).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(read_qctw(&bad[..]), Err(Error::Format(_))));
        let mut bad = bytes.clone();
        bad[4] = 2;
        assert!(matches!(read_qctw(&bad[..]), Err(Error::Format(_))));
        assert!(matches!(read_qctw(&bytes[..bytes.len() - 1]), Err(Error::Format(_))));
    }

    #[test]
    fn csv_header_and_rows() {
        let g = WignerGrid {
            n_x: 1,
            n_p: 2,
            x_min: 0.5,
            dx: 1.0,
            p_min: -1.0,
            dp: 2.0,
            values: vec![0.25, 0.75],
        };
        let mut out = Vec::new();
        write_wigner_csv(&g, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "x,p,w\n0.5,-1,0.25\n0.5,1,0.75\n");
    }
}
