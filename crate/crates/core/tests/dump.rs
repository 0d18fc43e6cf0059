use qct_core::compare::{density_distance, negativity};
use qct_core::qstate::{coherent_state, read_qctw, wigner, write_qctw, PositionGrid, WaveFunction};
use num_complex::Complex64;

/// Bytes laid out by hand: magic, version, sizes, axes, row-major values.
fn handmade(n_x: u32, n_p: u32, axes: [f64; 4], values: &[f64]) -> Vec<u8> {
    let mut b = b"QCTW".to_vec();
    for v in [1u32, n_x, n_p] {
        b.extend_from_slice(&v.to_le_bytes());
    }
    for v in axes.iter().chain(values) {
        b.extend_from_slice(&v.to_le_bytes());
    }
    b
}

#[test]
fn reader_follows_the_documented_layout() {
    let values: Vec<f64> = (0..6).map(|i| i as f64 * 0.25 - 0.5).collect();
    let bytes = handmade(2, 3, [-1.0, 0.5, -3.0, 2.0], &values);
    let g = read_qctw(bytes.as_slice()).unwrap();
    assert_eq!((g.n_x, g.n_p), (2, 3));
    assert_eq!((g.x_min, g.dx, g.p_min, g.dp), (-1.0, 0.5, -3.0, 2.0));
    assert_eq!(g.at(1, 0), values[3]);
    assert_eq!(g.at(0, 2), values[2]);
    let mut out = Vec::new();
    write_qctw(&g, &mut out).unwrap();
    assert_eq!(out, bytes);
}

#[test]
fn truncated_or_foreign_dumps_are_rejected() {
    let bytes = handmade(2, 2, [0.0, 1.0, 0.0, 1.0], &[0.0; 4]);
    assert!(read_qctw(&bytes[..bytes.len() - 1]).is_err());
    let mut wrong = bytes.clone();
    wrong[0] = b'X';
    assert!(read_qctw(wrong.as_slice()).is_err());
    let mut version = bytes;
    version[4] = 2;
    assert!(read_qctw(version.as_slice()).is_err());
}

#[test]
fn evolved_grids_survive_a_round_trip() {
    let grid = PositionGrid::new(128, -6.0, 6.0).unwrap();
    let psi = coherent_state(&grid, 1.0, -2.0, 0.2).unwrap();
    let w = wigner(&psi, 256).unwrap();
    let mut bytes = Vec::new();
    write_qctw(&w, &mut bytes).unwrap();
    assert_eq!(bytes.len(), 4 + 12 + 32 + 8 * 128 * 256);
    let back = read_qctw(bytes.as_slice()).unwrap();
    assert_eq!(back, w);
    assert_eq!(density_distance(&back, &w, 8).unwrap(), 0.0);
}

#[test]
fn superposition_is_negative_where_a_packet_is_not() {
    let hbar = 0.1;
    let grid = PositionGrid::new(512, -6.0, 6.0).unwrap();
    let a = coherent_state(&grid, -2.0, 0.0, hbar).unwrap();
    let b = coherent_state(&grid, 2.0, 0.0, hbar).unwrap();
    let cat: Vec<Complex64> = a.amplitudes.iter().zip(&b.amplitudes).map(|(x, y)| x + y).collect();
    let cat = WaveFunction::new(grid, cat, hbar).unwrap();
    assert!(negativity(&wigner(&a, 512).unwrap()) < 1e-6);
    let n = negativity(&wigner(&cat, 512).unwrap());
    assert!(n > 0.1, "{n}");
}
