//! Mesh files (raw little-endian f64 plus a JSON sidecar) and CSV tables.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::GridConfig;
use crate::diagnostics::DecayCurve;
use crate::error::{Error, Result};
use crate::mesh::MeshFunction;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshHeader {
    pub grid: GridConfig,
    pub cells: usize,
    pub dtype: String,
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn grid_config(f: &MeshFunction) -> Result<GridConfig> {
    let g = f.grid();
    if !g.is_standard() && g.seed().is_none() {
        return Err(Error::Unsupported("grids with hand-picked shifts cannot be saved".into()));
    }
    Ok(GridConfig { n: g.n(), l: g.fine_level(), m: g.window_exp(), seed: g.seed() })
}

/// Writes `path` and `path.json`.
pub fn write_mesh(path: impl AsRef<Path>, f: &MeshFunction) -> Result<()> {
    let path = path.as_ref();
    let header = MeshHeader { grid: grid_config(f)?, cells: f.len(), dtype: "f64-le".into() };
    let bytes: Vec<u8> = f.values().iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(path, bytes)?;
    fs::write(sidecar(path), serde_json::to_string_pretty(&header)? + "\n")?;
    Ok(())
}

pub fn read_mesh(path: impl AsRef<Path>) -> Result<MeshFunction> {
    let path = path.as_ref();
    let header: MeshHeader = serde_json::from_str(&fs::read_to_string(sidecar(path))?)?;
    if header.dtype != "f64-le" {
        return Err(Error::config(format!("unknown mesh dtype {}", header.dtype)));
    }
    let grid = header.grid.build()?;
    let bytes = fs::read(path)?;
    if bytes.len() != 8 * grid.num_cells() || header.cells != grid.num_cells() {
        return Err(Error::config(format!("{} holds {} bytes, expected {} cells", path.display(), bytes.len(), grid.num_cells())));
    }
    let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    MeshFunction::from_values(&grid, values)
}

/// One row per cell: centre coordinates and value.
pub fn mesh_csv(f: &MeshFunction) -> String {
    let n = f.grid().n();
    let mut out = String::from(if n == 1 { "x,value\n" } else { "x,y,value\n" });
    for (i, v) in f.values().iter().enumerate() {
        let c = f.cell_center(i);
        for x in &c[..n] {
            write!(out, "{x},").unwrap();
        }
        writeln!(out, "{v}").unwrap();
    }
    out
}

pub fn curves_csv(curves: &[(&str, &DecayCurve)]) -> String {
    let mut out = String::from("curve,abscissa,value,envelope\n");
    for (name, c) in curves {
        for ((x, v), e) in c.abscissa.iter().zip(&c.values).zip(&c.envelope) {
            writeln!(out, "{name},{x},{v},{e}").unwrap();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn mesh_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        for seed in [None, Some(7)] {
            let g = make_grid(2, 1, 1, seed).unwrap();
            let f = MeshFunction::from_fn(&g, |x| x[0] - 3.0 * x[1] + 0.1);
            let p = dir.path().join("f.bin");
            write_mesh(&p, &f).unwrap();
            let back = read_mesh(&p).unwrap();
            assert_eq!(back.values(), f.values());
            assert!(back.grid().same_mesh(f.grid()));
        }
        fs::write(dir.path().join("f.bin"), [0u8; 5]).unwrap();
        assert!(read_mesh(dir.path().join("f.bin")).is_err());
    }

    #[test]
    fn csv_layout() {
        let g = make_grid(1, 0, 1, None).unwrap();
        let f = MeshFunction::from_values(&g, vec![0.5, -2.0, 0.0, 1e-20]).unwrap();
        assert_eq!(mesh_csv(&f), "x,value\n-1.5,0.5\n-0.5,-2\n0.5,0\n1.5,0.00000000000000000001\n");
        let c = DecayCurve::new("t", vec![0.0, 1.0], vec![2.0, 1.0], 4, 0);
        assert_eq!(curves_csv(&[("t", &c)]), "curve,abscissa,value,envelope\nt,0,2,2\nt,1,1,1\n");
    }
}
