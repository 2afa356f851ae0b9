//! On-disk formats: binary matrix containers, legacy VTK, CSV traces.
//!
//! Matrix containers are an 8-byte magic, little-endian `u64` rows and
//! columns, column-major `f64` data, and a JSON footer running to the end of
//! the file. The basis variant inserts a `u64` count and that many singular
//! values between the data and the footer.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fom::FomState;
use crate::mesh::Discretization;

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"PODSNAP1";
pub const BASIS_MAGIC: &[u8; 8] = b"PODBASE1";

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest.iter() {
        write!(s, "{b:02x}").unwrap();
    }
    s
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

/// Write through a sibling temporary file and rename, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(match path.extension() {
        Some(e) => format!("{}.tmp", e.to_string_lossy()),
        None => "tmp".to_string(),
    });
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// A decoded matrix container.
#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub matrix: DMatrix<f64>,
    pub singular_values: Option<Vec<f64>>,
    pub footer: Value,
}

pub fn encode_container(magic: &[u8; 8], matrix: &DMatrix<f64>, singular_values: Option<&[f64]>, footer: &Value) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + 8 * matrix.len());
    out.extend_from_slice(magic);
    out.extend_from_slice(&(matrix.nrows() as u64).to_le_bytes());
    out.extend_from_slice(&(matrix.ncols() as u64).to_le_bytes());
    for v in matrix.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    if let Some(sv) = singular_values {
        out.extend_from_slice(&(sv.len() as u64).to_le_bytes());
        for v in sv {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.extend_from_slice(serde_json::to_string(footer).expect("footer serializes").as_bytes());
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Format(format!("truncated container at byte {}", self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u64(&mut self) -> Result<usize> {
        let b = self.take(8)?;
        Ok(u64::from_le_bytes(b.try_into().unwrap()) as usize)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::Format("size overflow".into()))?)?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

pub fn decode_container(bytes: &[u8]) -> Result<Container> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.take(8)?;
    let with_sv = match magic {
        m if m == SNAPSHOT_MAGIC => false,
        m if m == BASIS_MAGIC => true,
        m => return Err(Error::Format(format!("unknown magic {:?}", String::from_utf8_lossy(m)))),
    };
    let rows = cur.u64()?;
    let cols = cur.u64()?;
    let data = cur.f64s(rows.checked_mul(cols).ok_or_else(|| Error::Format("size overflow".into()))?)?;
    let singular_values = if with_sv {
        let n = cur.u64()?;
        Some(cur.f64s(n)?)
    } else {
        None
    };
    let footer = serde_json::from_slice(&bytes[cur.pos..])?;
    Ok(Container { matrix: DMatrix::from_vec(rows, cols, data), singular_values, footer })
}

pub fn write_container(
    path: &Path,
    magic: &[u8; 8],
    matrix: &DMatrix<f64>,
    singular_values: Option<&[f64]>,
    footer: &Value,
) -> Result<()> {
    write_atomic(path, &encode_container(magic, matrix, singular_values, footer))
}

pub fn read_container(path: &Path) -> Result<Container> {
    decode_container(&fs::read(path)?)
}

/// Legacy ASCII VTK unstructured grid with the potential and the vertex
/// values of the displacement.
pub fn vtk_string(disc: &Discretization, state: &FomState) -> String {
    let (mesh, layout) = (&disc.mesh, &disc.layout);
    let nv = mesh.vertices.len();
    let nt = mesh.triangles.len();
    let mut s = String::new();
    writeln!(s, "# vtk DataFile Version 3.0").unwrap();
    writeln!(s, "gel state T={}", state.t).unwrap();
    writeln!(s, "ASCII\nDATASET UNSTRUCTURED_GRID").unwrap();
    writeln!(s, "POINTS {nv} double").unwrap();
    for p in &mesh.vertices {
        writeln!(s, "{} {} 0", p[0], p[1]).unwrap();
    }
    writeln!(s, "CELLS {nt} {}", 4 * nt).unwrap();
    for t in &mesh.triangles {
        writeln!(s, "3 {} {} {}", t[0], t[1], t[2]).unwrap();
    }
    writeln!(s, "CELL_TYPES {nt}").unwrap();
    for _ in 0..nt {
        writeln!(s, "5").unwrap();
    }
    writeln!(s, "POINT_DATA {nv}").unwrap();
    writeln!(s, "SCALARS mu double 1\nLOOKUP_TABLE default").unwrap();
    for v in 0..nv {
        writeln!(s, "{}", state.mu[layout.vertex_mu_dof[v]]).unwrap();
    }
    writeln!(s, "VECTORS u double").unwrap();
    for v in 0..nv {
        let node = layout.vertex_node[v];
        writeln!(s, "{} {} 0", state.u[2 * node], state.u[2 * node + 1]).unwrap();
    }
    s
}

/// Render rows as CSV with full round-trip precision.
pub fn csv_string(header: &[String], rows: &[Vec<f64>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

/// Probe traces with one row per (time, point).
pub fn probe_csv(times: &[f64], values: &[Vec<crate::fom::ProbeValue>]) -> String {
    let mut s = String::from("T,point_id,mu,ux,uy\n");
    for (t, row) in times.iter().zip(values) {
        for (i, v) in row.iter().enumerate() {
            writeln!(s, "{t:?},{i},{:?},{:?},{:?}", v.mu, v.u[0], v.u[1]).unwrap();
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::ScenarioSpec;
    use serde_json::json;

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn container_round_trip() {
        let m = DMatrix::from_fn(3, 2, |i, j| i as f64 - 0.5 * j as f64 + 1e-17);
        let footer = json!({"fields": [{"name": "u", "rows": 3}]});
        let bytes = encode_container(SNAPSHOT_MAGIC, &m, None, &footer);
        assert_eq!(&bytes[..8], b"PODSNAP1");
        assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 3);
        // column-major: second value is entry (1, 0)
        assert_eq!(f64::from_le_bytes(bytes[32..40].try_into().unwrap()), m[(1, 0)]);
        let back = decode_container(&bytes).unwrap();
        assert_eq!(back.matrix, m);
        assert_eq!(back.footer, footer);
        assert!(back.singular_values.is_none());

        let sv = [3.0, 1.0];
        let back = decode_container(&encode_container(BASIS_MAGIC, &m, Some(&sv), &json!({}))).unwrap();
        assert_eq!(back.singular_values.unwrap(), sv);
    }

    #[test]
    fn truncated_or_foreign_files_are_rejected() {
        let m = DMatrix::from_element(2, 2, 1.0);
        let bytes = encode_container(SNAPSHOT_MAGIC, &m, None, &json!({}));
        assert!(matches!(decode_container(&bytes[..30]), Err(Error::Format(_))));
        assert!(decode_container(b"NOTMAGIC").is_err());
    }

    #[test]
    fn vtk_has_expected_blocks() {
        let disc = Discretization::new(&ScenarioSpec::square(1)).unwrap();
        let st = FomState { u: vec![0.0; disc.layout.n_u], mu: vec![-0.3; 4], t: 0.0 };
        let s = vtk_string(&disc, &st);
        assert!(s.contains("POINTS 4 double"));
        assert!(s.contains("CELLS 2 8"));
        assert!(s.contains("SCALARS mu"));
        assert!(s.contains("VECTORS u"));
        assert_eq!(s.lines().filter(|l| *l == "5").count(), 2);
    }

    #[test]
    fn atomic_write_leaves_no_temporary() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.json");
        write_atomic(&p, b"{}").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"{}");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
