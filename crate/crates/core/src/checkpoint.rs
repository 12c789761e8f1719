//! Spectral-state persistence in the `KSPEC1` checkpoint format.
//!
//! Layout: one ASCII header line `KSPEC1 dim=<N> M=<M> L=<L> t=<time>`
//! terminated by `\n`, then little-endian IEEE-754 float64 pairs (re, im)
//! in axis-major lattice order — the θ̂ array first, then each û component.
//! Float header fields use the shortest round-tripping decimal form, so a
//! write/read cycle reproduces the state bit for bit.

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::grid::{Grid, GridError, SpectralState};
use crate::C64;

/// Failures while persisting or restoring a checkpoint.
#[derive(Debug, Error)]
pub enum CheckpointError {
    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] io::Error),
    /// The header describes an invalid lattice.
    #[error(transparent)]
    Grid(#[from] GridError),
    /// The header line is not of the `KSPEC1` form.
    #[error("malformed checkpoint header: {0:?}")]
    BadHeader(String),
    /// The binary payload ended early.
    #[error("checkpoint payload truncated: expected {expected} float64 values, got {got}")]
    Truncated {
        /// Values the header implies.
        expected: usize,
        /// Values actually present.
        got: usize,
    },
    /// Extra bytes follow the payload.
    #[error("trailing bytes after checkpoint payload")]
    TrailingBytes,
}

/// Serialize a state into any writer.
pub fn write_to<W: Write>(mut w: W, state: &SpectralState) -> io::Result<()> {
    let grid = &state.grid;
    writeln!(
        w,
        "KSPEC1 dim={} M={} L={} t={}",
        grid.dim(),
        grid.modes(),
        grid.box_length(),
        state.time
    )?;
    write_field(&mut w, &state.theta_hat)?;
    for comp in &state.u_hat {
        write_field(&mut w, comp)?;
    }
    Ok(())
}

fn write_field<W: Write>(w: &mut W, field: &[C64]) -> io::Result<()> {
    for z in field {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    Ok(())
}

/// Write a checkpoint file at `path`.
pub fn write_checkpoint(path: &Path, state: &SpectralState) -> Result<(), CheckpointError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_to(&mut w, state)?;
    w.flush()?;
    Ok(())
}

fn parse_kv<'a>(tok: &'a str, key: &str) -> Option<&'a str> {
    tok.strip_prefix(key)?.strip_prefix('=')
}

fn parse_header(line: &str) -> Result<(usize, usize, f64, f64), CheckpointError> {
    let bad = || CheckpointError::BadHeader(line.to_string());
    let toks: Vec<&str> = line.split_whitespace().collect();
    if toks.len() != 5 || toks[0] != "KSPEC1" {
        return Err(bad());
    }
    let dim = parse_kv(toks[1], "dim")
        .and_then(|v| v.parse().ok())
        .ok_or_else(bad)?;
    let modes = parse_kv(toks[2], "M")
        .and_then(|v| v.parse().ok())
        .ok_or_else(bad)?;
    let length = parse_kv(toks[3], "L")
        .and_then(|v| v.parse().ok())
        .ok_or_else(bad)?;
    let time = parse_kv(toks[4], "t")
        .and_then(|v| v.parse().ok())
        .ok_or_else(bad)?;
    Ok((dim, modes, length, time))
}

/// Restore a state from any reader.
pub fn read_from<R: Read>(mut r: R) -> Result<SpectralState, CheckpointError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| CheckpointError::BadHeader("missing header line".into()))?;
    let header = std::str::from_utf8(&bytes[..newline])
        .map_err(|_| CheckpointError::BadHeader("non-UTF-8 header".into()))?;
    let (dim, modes, length, time) = parse_header(header)?;
    let grid = Grid::new(dim, modes, length)?;
    let n = grid.total();
    let payload = &bytes[newline + 1..];
    let expected = n * 2 * (1 + dim);
    let got = payload.len() / 8;
    if payload.len() % 8 != 0 || got < expected {
        return Err(CheckpointError::Truncated { expected, got });
    }
    if got > expected {
        return Err(CheckpointError::TrailingBytes);
    }
    let mut offset = 0;
    let mut next_field = || {
        let field: Vec<C64> = (0..n)
            .map(|i| {
                let b = offset + 16 * i;
                let re = f64::from_le_bytes(payload[b..b + 8].try_into().unwrap());
                let im = f64::from_le_bytes(payload[b + 8..b + 16].try_into().unwrap());
                C64::new(re, im)
            })
            .collect();
        offset += 16 * n;
        field
    };
    let theta_hat = next_field();
    let u_hat: Vec<Vec<C64>> = (0..dim).map(|_| next_field()).collect();
    Ok(SpectralState::from_parts(&grid, time, theta_hat, u_hat)?)
}

/// Read a checkpoint file from `path`.
pub fn read_checkpoint(path: &Path) -> Result<SpectralState, CheckpointError> {
    read_from(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn rng(seed: u64) -> impl FnMut() -> f64 {
        let mut state = seed.max(1);
        move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state as f64 / u64::MAX as f64 - 0.5
        }
    }

    fn random_state(dim: usize, modes: usize, length: f64, time: f64) -> SpectralState {
        let grid = Grid::new(dim, modes, length).unwrap();
        let mut rnd = rng(41);
        let n = grid.total();
        let field = |rnd: &mut dyn FnMut() -> f64| -> Vec<C64> {
            (0..n).map(|_| C64::new(rnd(), rnd())).collect()
        };
        let theta_hat = field(&mut rnd);
        let u_hat: Vec<Vec<C64>> = (0..dim).map(|_| field(&mut rnd)).collect();
        let mut st = SpectralState::from_parts(&grid, time, theta_hat, u_hat).unwrap();
        st.time = time;
        st
    }

    fn serialized(state: &SpectralState) -> Vec<u8> {
        let mut buf = Vec::new();
        write_to(&mut buf, state).unwrap();
        buf
    }

    #[test]
    fn round_trip_is_bitwise() {
        let state = random_state(3, 8, 2.5, 1.75);
        let back = read_from(serialized(&state).as_slice()).unwrap();
        assert_eq!(back.grid.dim(), 3);
        assert_eq!(back.grid.modes(), 8);
        assert_eq!(back.grid.box_length().to_bits(), 2.5f64.to_bits());
        assert_eq!(back.time.to_bits(), 1.75f64.to_bits());
        assert_eq!(back.theta_hat, state.theta_hat);
        assert_eq!(back.u_hat, state.u_hat);
    }

    #[test]
    fn round_trip_survives_awkward_floats() {
        // Shortest-round-trip decimal headers must reproduce L and t exactly.
        let state = random_state(2, 6, 2.0 * std::f64::consts::PI, 0.1 + 0.2);
        let back = read_from(serialized(&state).as_slice()).unwrap();
        assert_eq!(
            back.grid.box_length().to_bits(),
            state.grid.box_length().to_bits()
        );
        assert_eq!(back.time.to_bits(), state.time.to_bits());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.kspec");
        let state = random_state(2, 8, 5.0, 3.0);
        write_checkpoint(&path, &state).unwrap();
        let back = read_checkpoint(&path).unwrap();
        assert_eq!(back.theta_hat, state.theta_hat);
        assert_eq!(back.u_hat, state.u_hat);
        assert_eq!(back.time, state.time);
    }

    #[test]
    fn header_is_one_ascii_line() {
        let state = random_state(2, 8, 2.5, 1.5);
        let bytes = serialized(&state);
        let newline = bytes.iter().position(|&b| b == b'\n').unwrap();
        let header = std::str::from_utf8(&bytes[..newline]).unwrap();
        assert_eq!(header, "KSPEC1 dim=2 M=8 L=2.5 t=1.5");
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let state = random_state(1, 8, 1.0, 0.0);
        let mut bytes = serialized(&state);
        bytes.truncate(bytes.len() - 8);
        match read_from(bytes.as_slice()) {
            Err(CheckpointError::Truncated { expected, got }) => {
                assert_eq!(expected, 8 * 2 * 2);
                assert_eq!(got, expected - 1);
            }
            other => panic!("unexpected result {other:?}"),
        }
        // A ragged (non multiple of 8) payload is also truncation.
        let mut ragged = serialized(&state);
        ragged.pop();
        assert!(matches!(
            read_from(ragged.as_slice()),
            Err(CheckpointError::Truncated { .. })
        ));
    }

    #[test]
    fn trailing_bytes_are_rejected() {
        let state = random_state(1, 8, 1.0, 0.0);
        let mut bytes = serialized(&state);
        bytes.extend_from_slice(&[0u8; 8]);
        assert!(matches!(
            read_from(bytes.as_slice()),
            Err(CheckpointError::TrailingBytes)
        ));
    }

    #[test]
    fn malformed_headers_are_rejected() {
        for header in [
            "KSPEC2 dim=2 M=8 L=1 t=0",
            "KSPEC1 dim=2 M=8 L=1",
            "KSPEC1 dim=x M=8 L=1 t=0",
            "KSPEC1 M=8 dim=2 L=1 t=0",
            "not a header at all",
        ] {
            let mut bytes = header.as_bytes().to_vec();
            bytes.push(b'\n');
            assert!(
                matches!(read_from(bytes.as_slice()), Err(CheckpointError::BadHeader(_))),
                "header {header:?} was accepted"
            );
        }
        assert!(matches!(
            read_from(b"KSPEC1 dim=2 M=8 L=1 t=0".as_slice()),
            Err(CheckpointError::BadHeader(_))
        ));
    }

    #[test]
    fn invalid_lattice_header_propagates_grid_error() {
        let bytes = b"KSPEC1 dim=5 M=8 L=1 t=0\n".to_vec();
        assert!(matches!(
            read_from(bytes.as_slice()),
            Err(CheckpointError::Grid(GridError::UnsupportedDim(5)))
        ));
    }

    #[test]
    fn grid_is_reconstructed_shareable() {
        let state = random_state(2, 8, 4.0, 0.5);
        let back = read_from(serialized(&state).as_slice()).unwrap();
        let grid: &Arc<Grid> = &back.grid;
        assert!(grid.same_layout(&state.grid));
    }
}
