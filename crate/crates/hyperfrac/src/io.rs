//! File formats: CSV with 17 significant digits, mesh JSON, atomic writes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::{Discretization, DnMatrix, Mesh, Potential, Region};

/// Round-trippable decimal: 17 significant digits.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `bytes` to a sibling temporary file, syncs it and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::Io(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        use std::io::Write;
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

/// A CSV table with named columns. Integer-valued columns are written without exponent.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Index(usize),
    Value(f64),
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            for (k, c) in row.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                match c {
                    Cell::Index(i) => write!(out, "{i}").expect("string write"),
                    Cell::Value(v) => out.push_str(&format_f64(*v)),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv().as_bytes())
    }
}

/// DN matrix row-major: one row per test function j, columns `test,data_0,data_1,…`.
pub fn dn_table(dn: &DnMatrix) -> Table {
    let m = &dn.values;
    let names: Vec<String> = std::iter::once("test".to_string())
        .chain((0..m.ncols()).map(|i| format!("data_{i}")))
        .collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut t = Table::new(&refs);
    for j in 0..m.nrows() {
        let mut row = vec![Cell::Index(j)];
        row.extend((0..m.ncols()).map(|i| Cell::Value(m[(j, i)])));
        t.push(row);
    }
    t
}

/// Cellwise potential keyed by mesh cell index: `cell,radius,q`.
pub fn potential_table(disc: &dyn Discretization, q: &Potential) -> Table {
    let mut t = Table::new(&["cell", "radius", "q"]);
    for (c, v) in disc.omega_cells().iter().zip(&q.values) {
        let r = crate::geometry::point_to_polar(&c.centroid).r;
        t.push(vec![Cell::Index(c.cell), Cell::Value(r), Cell::Value(*v)]);
    }
    t
}

/// Parses a CSV produced by [`Table::to_csv`] into its header and numeric rows.
pub fn read_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Io("empty CSV".into()))?
        .split(',')
        .map(str::to_string)
        .collect::<Vec<_>>();
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.split(',')
                .map(|v| v.parse::<f64>().map_err(|e| Error::Io(format!("bad CSV value {v:?}: {e}"))))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((header, rows))
}

/// Serialized mesh: hyperboloid coordinates, vertex lists, region tags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshJson {
    pub vertices: Vec<Vec<f64>>,
    pub cells: Vec<Vec<usize>>,
    pub tags: Vec<Region>,
}

impl From<&Mesh> for MeshJson {
    fn from(m: &Mesh) -> Self {
        Self {
            vertices: m.vertices.iter().map(|v| v.coords().to_vec()).collect(),
            cells: m.cells.clone(),
            tags: m.tags.clone(),
        }
    }
}

pub fn to_json_pretty<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    write_atomic(path, to_json_pretty(v)?.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_roundtrip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            let s = format_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(format_f64(0.1), "1.0000000000000001e-1");
    }

    #[test]
    fn csv_roundtrip() {
        let mut t = Table::new(&["i", "v"]);
        t.push(vec![Cell::Index(3), Cell::Value(0.1)]);
        t.push(vec![Cell::Index(4), Cell::Value(-1e-20)]);
        let (h, rows) = read_csv(&t.to_csv()).unwrap();
        assert_eq!(h, vec!["i", "v"]);
        assert_eq!(rows, vec![vec![3.0, 0.1], vec![4.0, -1e-20]]);
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub").join("a.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "two");
        let leftovers: Vec<_> = fs::read_dir(p.parent().unwrap()).unwrap().collect();
        assert_eq!(leftovers.len(), 1);
    }
}
