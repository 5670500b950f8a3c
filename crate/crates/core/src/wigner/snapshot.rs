//! Snapshot files: a magic line, one JSON header line, then the grid values
//! as little-endian `f64` in q-major order.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{PhaseSpaceGrid, WignerState};
use crate::error::{Error, Result};
use crate::units::DimensionlessParams;

const MAGIC: &str = "autoresonance-wigner 1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    n_q: usize,
    n_j: usize,
    q_half: f64,
    j_half: f64,
    tau: f64,
    gamma: f64,
    beta: f64,
    epsilon: f64,
    alpha_tilde: f64,
    layout: String,
}

const LAYOUT: &str = "f64-le, q-major: value(iq, ij) at index iq * n_j + ij";

/// A state read back from disk with the model constants stored beside it.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub state: WignerState,
    pub beta: f64,
    pub epsilon: f64,
    pub alpha_tilde: f64,
}

pub fn export_snapshot(
    state: &WignerState,
    model: &DimensionlessParams,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let g = &state.grid;
    let header = Header {
        n_q: g.n_q,
        n_j: g.n_j,
        q_half: g.q_half,
        j_half: g.j_half,
        tau: state.tau,
        gamma: state.gamma,
        beta: model.beta,
        epsilon: model.epsilon,
        alpha_tilde: model.alpha_tilde,
        layout: LAYOUT.into(),
    };
    let write = || -> std::io::Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "{MAGIC}")?;
        serde_json::to_writer(&mut w, &header)?;
        writeln!(w)?;
        for v in &state.f {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

pub fn import_snapshot(path: impl AsRef<Path>) -> Result<Snapshot> {
    let path = path.as_ref();
    let bad = |reason: String| Error::Snapshot {
        path: path.to_path_buf(),
        reason,
    };
    let mut r = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    let mut line = String::new();
    r.read_line(&mut line).map_err(|e| Error::io(path, e))?;
    if line.trim_end() != MAGIC {
        return Err(bad(format!("missing '{MAGIC}' marker")));
    }
    line.clear();
    r.read_line(&mut line).map_err(|e| Error::io(path, e))?;
    let h: Header = serde_json::from_str(&line).map_err(|e| bad(format!("header: {e}")))?;
    if h.layout != LAYOUT {
        return Err(bad(format!("unknown layout '{}'", h.layout)));
    }
    let grid = PhaseSpaceGrid::new(h.n_q, h.n_j, h.q_half, h.j_half)
        .map_err(|e| bad(e.to_string()))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    if bytes.len() != grid.len() * 8 {
        return Err(bad(format!(
            "expected {} data bytes, found {}",
            grid.len() * 8,
            bytes.len()
        )));
    }
    let f = bytes
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    Ok(Snapshot {
        state: WignerState {
            grid,
            f,
            tau: h.tau,
            gamma: h.gamma,
        },
        beta: h.beta,
        epsilon: h.epsilon,
        alpha_tilde: h.alpha_tilde,
    })
}

/// Plot-ready `q,j,f` rows, every `stride`-th point along each axis.
pub fn write_csv(state: &WignerState, stride: usize, mut w: impl Write) -> std::io::Result<()> {
    let g = &state.grid;
    let stride = stride.max(1);
    writeln!(w, "q,j,f")?;
    for iq in (0..g.n_q).step_by(stride) {
        for ij in (0..g.n_j).step_by(stride) {
            writeln!(w, "{:e},{:e},{:e}", g.q(iq), g.j(ij), state.at(iq, ij))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wigner::{coherent_state, ground_state};

    #[test]
    fn round_trip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let g = PhaseSpaceGrid::new(64, 128, 8.0, 9.0).unwrap();
        let s = coherent_state(g, 0.7, (1.0, -2.0), 12.5).unwrap();
        let dp = DimensionlessParams::reference(7);
        let (a, b) = (dir.path().join("a.bin"), dir.path().join("b.bin"));
        export_snapshot(&s, &dp, &a).unwrap();
        let back = import_snapshot(&a).unwrap();
        assert_eq!(back.state, s);
        assert_eq!(back.beta, dp.beta);
        export_snapshot(&back.state, &dp, &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn vacuum_survives_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = PhaseSpaceGrid::new(64, 64, 8.0, 8.0).unwrap();
        let p = dir.path().join("v.bin");
        export_snapshot(&ground_state(g, 2.0, 0.0).unwrap(), &DimensionlessParams::reference(5), &p)
            .unwrap();
        assert!((import_snapshot(&p).unwrap().state.norm() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn corrupt_files_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.bin");
        std::fs::write(&p, "not a snapshot\n").unwrap();
        assert!(matches!(import_snapshot(&p), Err(Error::Snapshot { .. })));
        let missing = dir.path().join("missing.bin");
        match import_snapshot(&missing) {
            Err(Error::Io { path, .. }) => assert_eq!(path, missing),
            other => panic!("{other:?}"),
        }
        let g = PhaseSpaceGrid::new(64, 64, 8.0, 8.0).unwrap();
        let p = dir.path().join("short.bin");
        export_snapshot(&ground_state(g, 2.0, 0.0).unwrap(), &DimensionlessParams::reference(5), &p)
            .unwrap();
        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..bytes.len() - 8]).unwrap();
        assert!(matches!(import_snapshot(&p), Err(Error::Snapshot { .. })));
    }

    #[test]
    fn csv_rows() {
        let g = PhaseSpaceGrid::new(64, 64, 8.0, 8.0).unwrap();
        let s = ground_state(g, 2.0, 0.0).unwrap();
        let mut buf = Vec::new();
        write_csv(&s, 4, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("q,j,f\n"));
        assert_eq!(text.lines().count(), 1 + 16 * 16);
    }
}
