//! CSV and JSON serialization of fields, grids and report tables.
//!
//! Floats are written with 17 significant digits so that every value
//! round-trips exactly. All writers go through [`write_atomic`].

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::comparison::ThresholdScan;
use crate::discretization::{DomainGrid, NodeKind};
use crate::error::{Error, Result};
use crate::geometry::SampledProfile;
use crate::moving_plane::MovingPlaneReport;
use crate::nonlinearity::TableFunction;
use crate::solver::SolutionField;

/// Version tag stored as `"schema"` in every JSON document.
pub const SCHEMA_VERSION: u32 = 1;

/// Formats `x` with 17 significant digits in scientific notation.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

/// Writes `bytes` to a sibling temporary file, syncs it and renames it over
/// `path`, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.{}.tmp",
        name.to_string_lossy(),
        std::process::id()
    ));
    let result = (|| {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

/// In-memory CSV table with a header row.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        CsvTable {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn push_floats(&mut self, row: &[f64]) {
        self.push(row.iter().map(|&v| fmt_f64(v)).collect());
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let header = r.headers()?.iter().map(str::to_string).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|r| r.iter().map(str::to_string).collect()))
            .collect::<std::result::Result<_, _>>()?;
        Ok(CsvTable { header, rows })
    }

    /// Column `name` parsed as floats.
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let k = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::invalid(format!("missing column '{name}'")))?;
        self.rows
            .iter()
            .map(|r| {
                r[k].trim().parse::<f64>().map_err(|_| {
                    Error::invalid(format!("column '{name}': not a number: '{}'", r[k]))
                })
            })
            .collect()
    }
}

fn axis_names(n: usize) -> Vec<String> {
    (1..=n).map(|a| format!("x{a}")).collect()
}

/// One row per interior node: `x1..xN, u`.
pub fn field_table(u: &SolutionField) -> CsvTable {
    let n = u.grid().dimension();
    let mut t = CsvTable::new(axis_names(n).into_iter().chain(["u".to_string()]));
    for (node, v) in u.grid().interior().iter().zip(u.values()) {
        let mut row = node.position.clone();
        row.push(*v);
        t.push_floats(&row);
    }
    t
}

/// One row per lattice node: `x1..xN, kind` with kind in
/// `interior | face | exterior`.
pub fn grid_table(grid: &DomainGrid) -> CsvTable {
    let n = grid.dimension();
    let mut t = CsvTable::new(axis_names(n).into_iter().chain(["kind".to_string()]));
    for idx in 0..grid.lattice_len() {
        let mut row: Vec<String> = grid.position(idx).into_iter().map(fmt_f64).collect();
        row.push(
            match grid.kind(idx) {
                NodeKind::Interior(_) => "interior",
                NodeKind::Face => "face",
                NodeKind::Exterior => "exterior",
            }
            .to_string(),
        );
        t.push(row);
    }
    t
}

pub fn cap_table(report: &MovingPlaneReport) -> CsvTable {
    let mut t = CsvTable::new(["lambda", "cap_min_diff", "cap_nodes", "interpolation_bound"]);
    for k in 0..report.lambda_grid.len() {
        t.push(vec![
            fmt_f64(report.lambda_grid[k]),
            fmt_f64(report.cap_min_diff[k]),
            report.cap_nodes[k].to_string(),
            fmt_f64(report.interpolation_bounds[k]),
        ]);
    }
    t
}

pub fn scan_table(scan: &ThresholdScan) -> CsvTable {
    let mut t = CsvTable::new(["width", "h", "lambda1", "unstable"]);
    for r in &scan.rows {
        t.push(vec![
            fmt_f64(r.width),
            fmt_f64(r.h),
            fmt_f64(r.lambda1),
            r.unstable.to_string(),
        ]);
    }
    t
}

/// Reads a boundary profile from columns `x, g` (one variable) or
/// `x1, x2, g` on a full rectilinear lattice (two variables).
pub fn read_profile_csv(path: &Path) -> Result<SampledProfile> {
    let t = CsvTable::read(path)?;
    let g = t.column("g")?;
    if t.header.iter().any(|h| h == "x") {
        let x = t.column("x")?;
        return SampledProfile::from_pairs(x.into_iter().zip(g).collect());
    }
    let x1 = t.column("x1")?;
    let x2 = t.column("x2")?;
    let uniq = |v: &[f64]| {
        let mut u = v.to_vec();
        u.sort_by(f64::total_cmp);
        u.dedup();
        u
    };
    let (a1, a2) = (uniq(&x1), uniq(&x2));
    if a1.len() * a2.len() != g.len() {
        return Err(Error::invalid(
            "two-variable profile must cover a full lattice",
        ));
    }
    let mut values = vec![f64::NAN; g.len()];
    for ((p, q), v) in x1.iter().zip(&x2).zip(&g) {
        let i = a1.partition_point(|&a| a < *p);
        let j = a2.partition_point(|&a| a < *q);
        values[i + a1.len() * j] = *v;
    }
    SampledProfile::new(vec![a1, a2], values)
}

/// Reads a tabulated nonlinearity from columns `t, f`.
pub fn read_table_csv(path: &Path) -> Result<TableFunction> {
    let t = CsvTable::read(path)?;
    TableFunction::new(t.column("t")?.into_iter().zip(t.column("f")?).collect())
}

/// Serializes `value` (which must be a JSON object) with a leading
/// `"schema"` field.
pub fn with_schema<T: Serialize>(value: &T) -> Result<Value> {
    let body = serde_json::to_value(value)?;
    let Value::Object(fields) = body else {
        return Err(Error::invalid("JSON documents must be objects"));
    };
    let mut out = Map::new();
    out.insert("schema".into(), Value::from(SCHEMA_VERSION));
    out.extend(fields.into_iter().filter(|(k, _)| k != "schema"));
    Ok(Value::Object(out))
}

/// Pretty JSON with the schema tag, written atomically.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(&with_schema(value)?)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}
