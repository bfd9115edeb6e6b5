//! Field snapshot container and trajectory directories.
//!
//! A snapshot file is `LPNSFLD1`, a little-endian `u32` header length, a JSON
//! header `{dim, n, components, representation, time, viscosity}` and then the
//! row-major little-endian `f64` payload: real samples, or interleaved
//! `(re, im)` coefficients for spectral data.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, Representation};
use crate::grid::Grid;
use crate::solver::{Snapshot, SolverConfig, Trajectory};

pub const MAGIC: &[u8; 8] = b"LPNSFLD1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub dim: usize,
    pub n: usize,
    pub components: usize,
    pub representation: Representation,
    pub time: f64,
    pub viscosity: f64,
}

pub fn encode(field: &Field, time: f64, viscosity: f64) -> Vec<u8> {
    let grid = field.grid();
    let header = SnapshotHeader {
        dim: grid.dim(),
        n: grid.n(),
        components: field.components(),
        representation: field.representation(),
        time,
        viscosity,
    };
    let json = serde_json::to_vec(&header).expect("header serialises");
    let mut out = Vec::with_capacity(12 + json.len() + 16 * grid.len() * field.components());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    match field.representation() {
        Representation::Physical => {
            for c in field.physical_data().expect("physical") {
                for x in c {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
        }
        Representation::Spectral => {
            for c in field.spectral_data().expect("spectral") {
                for z in c {
                    out.extend_from_slice(&z.re.to_le_bytes());
                    out.extend_from_slice(&z.im.to_le_bytes());
                }
            }
        }
    }
    out
}

pub fn decode(bytes: &[u8], origin: &Path) -> Result<(Field, SnapshotHeader)> {
    let fail = |reason: String| Error::Snapshot { path: origin.to_path_buf(), reason };
    if bytes.len() < 12 || &bytes[..8] != MAGIC {
        return Err(fail("missing magic bytes".into()));
    }
    let hlen = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let body = bytes.get(12..12 + hlen).ok_or_else(|| fail("truncated header".into()))?;
    let header: SnapshotHeader =
        serde_json::from_slice(body).map_err(|e| fail(format!("bad header: {e}")))?;
    let grid = Grid::new(header.dim, header.n).map_err(|e| fail(e.to_string()))?;
    if header.components != 1 && header.components != header.dim {
        return Err(fail(format!("unsupported component count {}", header.components)));
    }
    let payload = &bytes[12 + hlen..];
    let per = match header.representation {
        Representation::Physical => 8,
        Representation::Spectral => 16,
    };
    let want = per * grid.len() * header.components;
    if payload.len() != want {
        return Err(fail(format!("payload has {} bytes, expected {want}", payload.len())));
    }
    let mut values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let field = match header.representation {
        Representation::Physical => {
            let comps = (0..header.components)
                .map(|_| values.by_ref().take(grid.len()).collect())
                .collect();
            Field::from_physical(grid, comps)?
        }
        Representation::Spectral => {
            let comps = (0..header.components)
                .map(|_| {
                    (0..grid.len())
                        .map(|_| {
                            let re = values.next().expect("length checked");
                            let im = values.next().expect("length checked");
                            Complex64::new(re, im)
                        })
                        .collect()
                })
                .collect();
            Field::from_spectral(grid, comps)?
        }
    };
    Ok((field, header))
}

pub fn write_snapshot(path: &Path, field: &Field, time: f64, viscosity: f64) -> Result<()> {
    fs::write(path, encode(field, time, viscosity))?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<(Field, SnapshotHeader)> {
    let bytes = fs::read(path).map_err(|e| Error::Snapshot {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    decode(&bytes, path)
}

/// Index file stored next to the snapshots of a trajectory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryIndex {
    pub config: SolverConfig,
    pub times: Vec<f64>,
    pub dissipation: Vec<f64>,
    pub files: Vec<String>,
}

pub const INDEX_FILE: &str = "trajectory.json";

/// Writes `snap_NNNNNN.fld` files plus `trajectory.json`; returns every path written.
pub fn save_trajectory(dir: &Path, traj: &Trajectory) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut files = Vec::new();
    for (i, s) in traj.snapshots.iter().enumerate() {
        let name = format!("snap_{i:06}.fld");
        let path = dir.join(&name);
        write_snapshot(&path, &s.velocity, s.time, traj.config.viscosity)?;
        files.push(name);
        written.push(path);
    }
    let index = TrajectoryIndex {
        config: traj.config.clone(),
        times: traj.times(),
        dissipation: traj.dissipation.clone(),
        files,
    };
    let path = dir.join(INDEX_FILE);
    fs::write(&path, serde_json::to_string_pretty(&index)?)?;
    written.push(path);
    Ok(written)
}

pub fn load_trajectory(dir: &Path) -> Result<Trajectory> {
    let path = dir.join(INDEX_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::Snapshot {
        path: path.clone(),
        reason: e.to_string(),
    })?;
    let index: TrajectoryIndex = serde_json::from_str(&text)?;
    if index.files.len() != index.times.len() || index.dissipation.len() != index.times.len() {
        return Err(Error::Snapshot { path, reason: "index lists are of different lengths".into() });
    }
    let mut snapshots = Vec::with_capacity(index.files.len());
    for (name, &time) in index.files.iter().zip(&index.times) {
        let (velocity, header) = read_snapshot(&dir.join(name))?;
        if header.time != time {
            return Err(Error::Snapshot {
                path: dir.join(name),
                reason: format!("time {} disagrees with index time {time}", header.time),
            });
        }
        snapshots.push(Snapshot { time, velocity });
    }
    Ok(Trajectory { config: index.config, snapshots, dissipation: index.dissipation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random;

    #[test]
    fn round_trip_both_representations() {
        let g = Grid::new(2, 16).unwrap();
        let f = random::band_limited(g, &mut random::rng(1), 5.0, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        for field in [f.clone(), f.to_physical()] {
            let path = dir.path().join("f.fld");
            write_snapshot(&path, &field, 0.25, 0.1).unwrap();
            let (back, header) = read_snapshot(&path).unwrap();
            assert_eq!(back, field);
            assert_eq!(header.time, 0.25);
            assert_eq!(header.components, 2);
        }
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let g = Grid::new(2, 8).unwrap();
        let f = Field::scalar_fn(g, |x| x[0].sin());
        let mut bytes = encode(&f, 0.0, 1.0);
        bytes.pop();
        assert!(decode(&bytes, Path::new("x")).is_err());
        bytes[0] = b'X';
        assert!(decode(&bytes, Path::new("x")).is_err());
    }
}
