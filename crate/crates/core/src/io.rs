//! CSV persistence of grid fields and solver output.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridField, WaveState};
use crate::nonlinear_solver::{BreakdownInfo, NormRow};
use crate::scalar::{lit, to_f64, Real};

/// Writes `x1,x2,<name>...` with one column per field.
pub fn write_fields_csv<T: Real, W: Write>(out: W, columns: &[(&str, &GridField<T>)]) -> Result<()> {
    let Some((_, first)) = columns.first() else {
        return Err(Error::EmptySample("no fields to write".into()));
    };
    let g = *first.grid();
    for (_, f) in &columns[1..] {
        first.check_same_grid(f)?;
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["x1".to_string(), "x2".to_string()];
    header.extend(columns.iter().map(|(n, _)| n.to_string()));
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(header.len());
    for k in 0..g.len() {
        let (x, y) = g.coords(k);
        row.clear();
        row.push(format!("{:e}", to_f64(x)));
        row.push(format!("{:e}", to_f64(y)));
        for (_, f) in columns {
            row.push(format!("{:e}", to_f64(f[k])));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_state_csv<T: Real>(path: &Path, state: &WaveState<T>) -> Result<()> {
    write_fields_csv(BufWriter::new(File::create(path)?), &[("u", &state.u), ("p", &state.p)])
}

/// Reads the column `name` (or the third column when `name` is absent) of
/// a CSV with `x1,x2` leading columns, rebuilding the uniform grid from the
/// coordinates.
pub fn read_field_csv<T: Real, R: Read>(input: R, name: Option<&str>) -> Result<GridField<T>> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    let find = |n: &str| headers.iter().position(|h| h.trim() == n);
    let (ix, iy) = match (find("x1"), find("x2")) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::Parse("expected x1 and x2 columns".into())),
    };
    let iv = match name {
        Some(n) => find(n).ok_or_else(|| Error::Parse(format!("no column named {n}")))?,
        None => (0..headers.len()).find(|c| *c != ix && *c != iy).ok_or_else(|| Error::Parse("no value column".into()))?,
    };
    let mut pts = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let num = |c: usize| -> Result<f64> {
            rec.get(c).unwrap_or("").trim().parse::<f64>().map_err(|e| Error::Parse(format!("line {:?}: {e}", rec.position())))
        };
        pts.push((num(ix)?, num(iy)?, num(iv)?));
    }
    if pts.is_empty() {
        return Err(Error::EmptySample("CSV has no rows".into()));
    }
    let axis = |sel: fn(&(f64, f64, f64)) -> f64| {
        let mut v: Vec<f64> = pts.iter().map(sel).collect();
        v.sort_by(f64::total_cmp);
        v.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * (1.0 + b.abs()));
        v
    };
    let xs = axis(|p| p.0);
    let ys = axis(|p| p.1);
    if xs.len() * ys.len() != pts.len() || xs.len() < 2 {
        return Err(Error::Parse(format!("{} rows do not form a {}x{} grid", pts.len(), xs.len(), ys.len())));
    }
    let h = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
    let uniform = |v: &[f64]| v.iter().enumerate().all(|(i, x)| (x - (v[0] + i as f64 * h)).abs() <= 1e-6 * h);
    if !uniform(&xs) || !uniform(&ys) {
        return Err(Error::Parse("coordinates are not on a uniform grid with equal spacing".into()));
    }
    let g = Grid::new(xs.len(), ys.len(), lit::<T>(h), (lit(xs[0]), lit(ys[0])))?;
    let mut vals = vec![T::zero(); g.len()];
    for (x, y, v) in pts {
        let i = ((x - xs[0]) / h).round() as usize;
        let j = ((y - ys[0]) / h).round() as usize;
        vals[j * g.nx + i] = lit(v);
    }
    GridField::from_values(g, vals)
}

pub fn write_norms_csv(path: &Path, rows: &[NormRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<S: serde::Serialize>(path: &Path, value: &S) -> Result<()> {
    let s = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(path, s + "\n")?;
    Ok(())
}

pub fn write_breakdown_json(path: &Path, info: &BreakdownInfo) -> Result<()> {
    write_json(path, info)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_round_trip() {
        let g = Grid::<f64>::square(1.5, 7).unwrap();
        let u = GridField::from_fn(g, |x, y| x * x - 0.25 * y);
        let p = u.scaled(-2.0);
        let mut buf = Vec::new();
        write_fields_csv(&mut buf, &[("u", &u), ("p", &p)]).unwrap();
        let back: GridField<f64> = read_field_csv(&buf[..], Some("p")).unwrap();
        assert!(back.grid().matches(&g));
        assert!(back.zip_with(&p, |a, b| a - b).unwrap().max_abs() < 1e-14);
        let first: GridField<f64> = read_field_csv(&buf[..], None).unwrap();
        assert!(first.zip_with(&u, |a, b| a - b).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn ragged_input_is_rejected() {
        let csv = "x1,x2,u\n0,0,1\n1,0,1\n0,1,1\n";
        assert!(read_field_csv::<f64, _>(csv.as_bytes(), None).is_err());
        assert!(read_field_csv::<f64, _>("x1,x2,u\n".as_bytes(), None).is_err());
    }
}
