//! CSV and binary serialization of grid paths and lifts.
//!
//! CSV columns: `t, x_1..x_m` for paths, followed by `A_11..A_mm` (row-major anchored area) for lifts.
//! Binary container, little-endian:
//!
//! ```text
//! "RSTB" | version u16 | kind u8 (0 path, 1 lift) | 0u8 | dim u32 | n u64
//! | n × f64 times | n·dim × f64 values | (lift only) n·dim² × f64 areas
//! ```

use std::io::{Read, Write};

use super::path::{GridPath, RoughPathGrid};
use crate::error::{Error, Result};

pub const BINARY_MAGIC: &[u8; 4] = b"RSTB";
pub const BINARY_VERSION: u16 = 1;

/// Either a plain path or a lift, as read from a file.
#[derive(Debug, Clone, PartialEq)]
pub enum PathData {
    Path(GridPath),
    Lift(RoughPathGrid),
}

impl PathData {
    pub fn path(&self) -> &GridPath {
        match self {
            PathData::Path(p) => p,
            PathData::Lift(rp) => rp.path(),
        }
    }
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse {
            line,
            msg: format!("{other:?}"),
        },
    }
}

fn write_rows<W: Write>(out: W, header: Vec<String>, rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row.iter().map(|v| format!("{v:?}"))).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `t, <prefix>_1..<prefix>_d`.
pub fn write_path_csv<W: Write>(out: W, path: &GridPath, prefix: &str) -> Result<()> {
    let d = path.dim();
    let mut header = vec!["t".to_string()];
    header.extend((1..=d).map(|i| format!("{prefix}_{i}")));
    write_rows(
        out,
        header,
        (0..path.len()).map(|k| {
            let mut r = vec![path.time(k)];
            r.extend_from_slice(path.value(k));
            r
        }),
    )
}

/// Writes `t, x_1..x_m, A_11..A_mm`.
pub fn write_lift_csv<W: Write>(out: W, rp: &RoughPathGrid) -> Result<()> {
    let m = rp.dim();
    let mut header = vec!["t".to_string()];
    header.extend((1..=m).map(|i| format!("x_{i}")));
    for i in 1..=m {
        for j in 1..=m {
            header.push(format!("A_{i}{j}"));
        }
    }
    write_rows(
        out,
        header,
        (0..rp.len()).map(|k| {
            let mut r = vec![rp.path().time(k)];
            r.extend_from_slice(rp.path().value(k));
            r.extend_from_slice(rp.anchored_area(k));
            r
        }),
    )
}

/// Reads a path or lift CSV; columns named `A_*` mark a lift.
pub fn read_csv<R: Read>(input: R) -> Result<PathData> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.is_empty() || &header[0] != "t" {
        return Err(Error::Parse {
            line: 1,
            msg: "first column must be `t`".into(),
        });
    }
    let n_area = header.iter().filter(|h| h.starts_with("A_")).count();
    let n_val = header.len() - 1 - n_area;
    if n_val == 0 {
        return Err(Error::Parse {
            line: 1,
            msg: "no value columns".into(),
        });
    }
    if n_area != 0 && n_area != n_val * n_val {
        return Err(Error::Parse {
            line: 1,
            msg: format!("{n_area} area columns do not match dimension {n_val}"),
        });
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut areas = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() != header.len() {
            return Err(Error::Parse {
                line,
                msg: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        for (i, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("`{field}` is not a number"),
            })?;
            if i == 0 {
                times.push(v);
            } else if i <= n_val {
                values.push(v);
            } else {
                areas.push(v);
            }
        }
    }
    let base = GridPath::new(times, values, n_val).map_err(|e| Error::Parse {
        line: 0,
        msg: e.to_string(),
    })?;
    if n_area == 0 {
        Ok(PathData::Path(base))
    } else {
        Ok(PathData::Lift(RoughPathGrid::new(base, areas).map_err(|e| {
            Error::Parse {
                line: 0,
                msg: e.to_string(),
            }
        })?))
    }
}

fn write_f64s<W: Write>(out: &mut W, xs: &[f64]) -> Result<()> {
    for x in xs {
        out.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn write_header<W: Write>(out: &mut W, kind: u8, dim: usize, n: usize) -> Result<()> {
    out.write_all(BINARY_MAGIC)?;
    out.write_all(&BINARY_VERSION.to_le_bytes())?;
    out.write_all(&[kind, 0])?;
    out.write_all(&(dim as u32).to_le_bytes())?;
    out.write_all(&(n as u64).to_le_bytes())?;
    Ok(())
}

pub fn write_path_binary<W: Write>(mut out: W, path: &GridPath) -> Result<()> {
    write_header(&mut out, 0, path.dim(), path.len())?;
    write_f64s(&mut out, path.times())?;
    write_f64s(&mut out, path.values())?;
    Ok(())
}

pub fn write_lift_binary<W: Write>(mut out: W, rp: &RoughPathGrid) -> Result<()> {
    write_header(&mut out, 1, rp.dim(), rp.len())?;
    write_f64s(&mut out, rp.path().times())?;
    write_f64s(&mut out, rp.path().values())?;
    write_f64s(&mut out, rp.anchored_areas())?;
    Ok(())
}

fn read_f64s<R: Read>(input: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut buf = [0u8; 8];
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        input.read_exact(&mut buf)?;
        out.push(f64::from_le_bytes(buf));
    }
    Ok(out)
}

pub fn read_binary<R: Read>(mut input: R) -> Result<PathData> {
    let mut head = [0u8; 20];
    input.read_exact(&mut head)?;
    if &head[0..4] != BINARY_MAGIC {
        return Err(Error::Parse {
            line: 0,
            msg: "not an rstab binary container".into(),
        });
    }
    let version = u16::from_le_bytes([head[4], head[5]]);
    if version != BINARY_VERSION {
        return Err(Error::Parse {
            line: 0,
            msg: format!("unsupported container version {version}"),
        });
    }
    let kind = head[6];
    let dim = u32::from_le_bytes(head[8..12].try_into().expect("4 bytes")) as usize;
    let n = u64::from_le_bytes(head[12..20].try_into().expect("8 bytes")) as usize;
    let times = read_f64s(&mut input, n)?;
    let values = read_f64s(&mut input, n * dim)?;
    let base = GridPath::new(times, values, dim)?;
    match kind {
        0 => Ok(PathData::Path(base)),
        1 => {
            let areas = read_f64s(&mut input, n * dim * dim)?;
            Ok(PathData::Lift(RoughPathGrid::new(base, areas)?))
        }
        k => Err(Error::Parse {
            line: 0,
            msg: format!("unknown container kind {k}"),
        }),
    }
}
