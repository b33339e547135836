//! Signal and coefficient files.
//!
//! Every data file `x.csv` (or raw `x.bin`) has a metadata sidecar `x.csv.json`.
//! Raw binary is little-endian f64 pairs (re, im) in grid order.

use crate::error::{Error, Result};
use crate::transform::{Coefficients, FreqGrid, PhaseGrid, Transform};
use crate::warpcore::Warp;
use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn is_binary(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "bin")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn csv_err(e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            _ => unreachable!(),
        }
    } else {
        Error::Format(e.to_string())
    }
}

/// Writes a header and rows of already formatted fields.
pub fn write_csv<I>(path: &Path, header: &[String], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(&r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let row = rec
            .iter()
            .map(|s| s.trim().parse::<f64>().map_err(|_| Error::Format(format!("{}: row {}: '{s}' is not a number", path.display(), i + 1))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

fn axis_names(prefix: &str, d: usize) -> Vec<String> {
    (1..=d).map(|i| format!("{prefix}_{i}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalMeta {
    pub kind: String,
    pub grid: FreqGrid,
    pub samples: usize,
}

/// Writes f̂ on `grid`; CSV rows are `xi_1..xi_d,re,im`.
pub fn write_signal(path: &Path, grid: &FreqGrid, f: &[Complex64]) -> Result<()> {
    if f.len() != grid.len() {
        return Err(Error::IncompatibleSampling(format!("{} samples for a grid of {}", f.len(), grid.len())));
    }
    if is_binary(path) {
        let mut bytes = Vec::with_capacity(16 * f.len());
        for v in f {
            bytes.extend_from_slice(&v.re.to_le_bytes());
            bytes.extend_from_slice(&v.im.to_le_bytes());
        }
        std::fs::write(path, bytes)?;
    } else {
        let mut header = axis_names("xi", grid.dim());
        header.extend(["re".to_string(), "im".to_string()]);
        let rows = f.iter().enumerate().map(|(j, v)| {
            let mut r: Vec<String> = grid.point(j).iter().map(f64::to_string).collect();
            r.push(v.re.to_string());
            r.push(v.im.to_string());
            r
        });
        write_csv(path, &header, rows)?;
    }
    write_json(&sidecar(path), &SignalMeta { kind: "signal".into(), grid: grid.clone(), samples: f.len() })
}

/// Grid recovered from CSV coordinates: distinct sorted values per axis.
fn infer_grid(coords: &[Vec<f64>], d: usize) -> Result<FreqGrid> {
    let mut lo = Vec::with_capacity(d);
    let mut hi = Vec::with_capacity(d);
    let mut shape = Vec::with_capacity(d);
    for i in 0..d {
        let mut v: Vec<f64> = coords.iter().map(|c| c[i]).collect();
        v.sort_by(f64::total_cmp);
        let span = (v[v.len() - 1] - v[0]).abs().max(1.0);
        v.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * span);
        lo.push(v[0]);
        hi.push(v[v.len() - 1]);
        shape.push(v.len());
    }
    FreqGrid::new(lo, hi, shape)
}

/// Reads a signal. The grid comes from the sidecar, else from `hint` (raw
/// binary) or the coordinate columns (CSV).
pub fn read_signal(path: &Path, hint: Option<&FreqGrid>) -> Result<(FreqGrid, Vec<Complex64>)> {
    let meta_path = sidecar(path);
    let meta: Option<SignalMeta> = if meta_path.is_file() { Some(read_json(&meta_path)?) } else { None };
    let binary = is_binary(path);
    let known = meta.map(|m| m.grid).or_else(|| if binary { hint.cloned() } else { None });
    if binary {
        let grid = known.ok_or_else(|| Error::Format(format!("{}: raw signal needs a grid (sidecar or --box/--n)", path.display())))?;
        let bytes = std::fs::read(path)?;
        if bytes.len() != 16 * grid.len() {
            return Err(Error::IncompatibleSampling(format!("{} bytes for a grid of {} samples", bytes.len(), grid.len())));
        }
        let f = bytes
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
                let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
                Complex64::new(re, im)
            })
            .collect();
        return Ok((grid, f));
    }
    let (header, rows) = read_csv(path)?;
    if header.len() < 3 || header[header.len() - 2] != "re" || header[header.len() - 1] != "im" {
        return Err(Error::Format(format!("{}: expected columns xi_1..xi_d,re,im", path.display())));
    }
    let d = header.len() - 2;
    if rows.is_empty() {
        return Err(Error::Format(format!("{}: no samples", path.display())));
    }
    if let Some(bad) = rows.iter().position(|r| r.len() != d + 2) {
        return Err(Error::Format(format!("{}: row {} has {} fields", path.display(), bad + 1, rows[bad].len())));
    }
    let coords: Vec<Vec<f64>> = rows.iter().map(|r| r[..d].to_vec()).collect();
    let grid = match known {
        Some(g) => g,
        None => infer_grid(&coords, d)?,
    };
    if grid.dim() != d {
        return Err(Error::DimensionMismatch { expected: grid.dim(), got: d });
    }
    if rows.len() != grid.len() {
        return Err(Error::IncompatibleSampling(format!("{} rows for a grid of {} samples", rows.len(), grid.len())));
    }
    let h = grid.spacing();
    for (j, c) in coords.iter().enumerate() {
        let p = grid.point(j);
        if p.iter().zip(c).zip(&h).any(|((a, b), s)| (a - b).abs() > 1e-6 * s.max(1e-300)) {
            return Err(Error::IncompatibleSampling(format!("row {} at {c:?} is not grid point {p:?}", j + 1)));
        }
    }
    Ok((grid, rows.iter().map(|r| Complex64::new(r[d], r[d + 1])).collect()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoeffMeta {
    pub kind: String,
    pub warp: Warp,
    pub theta: String,
    pub delta: f64,
    pub grid: FreqGrid,
    pub channels: usize,
    pub coefficients: usize,
}

impl CoeffMeta {
    pub fn of(t: &Transform) -> Self {
        Self {
            kind: "coefficients".into(),
            warp: t.warp.clone(),
            theta: t.theta.name(),
            delta: t.phase.delta,
            grid: t.phase.grid.clone(),
            channels: t.phase.channels.len(),
            coefficients: t.phase.total_coefficients(),
        }
    }

    /// Rebuilds the transform these coefficients belong to.
    pub fn transform(&self) -> Result<Transform> {
        self.warp.validate()?;
        let theta = crate::transform::Prototype::parse(&self.theta, self.warp.dim())?;
        Transform::build(&self.warp, &theta, self.grid.clone(), self.delta)
    }
}

/// Rows `channel,k_1..,ell_1..,y_1..,re,im` with the channel index into the
/// phase grid, its integer frequency index and the time lattice point.
pub fn write_coefficients(path: &Path, t: &Transform, c: &Coefficients) -> Result<()> {
    let pg = &t.phase;
    if !c.matches(pg) {
        return Err(Error::IndexMismatch("coefficients do not match the phase grid".into()));
    }
    let d = pg.grid.dim();
    let mut header = vec!["channel".to_string()];
    header.extend(axis_names("k", d));
    header.extend(axis_names("ell", d));
    header.extend(axis_names("y", d));
    header.extend(["re".to_string(), "im".to_string()]);
    let rows = pg.channels.iter().enumerate().flat_map(|(i, ch)| {
        let vals = &c.channels[i];
        (0..ch.coeff_len()).map(move |p| {
            let mut r = vec![i.to_string()];
            r.extend(ch.k.iter().map(i64::to_string));
            r.extend(ch.ell(p).iter().map(i64::to_string));
            r.extend(ch.time_point(p).iter().map(f64::to_string));
            r.push(vals[p].re.to_string());
            r.push(vals[p].im.to_string());
            r
        })
    });
    write_csv(path, &header, rows)?;
    write_json(&sidecar(path), &CoeffMeta::of(t))
}

pub fn read_coefficient_meta(path: &Path) -> Result<CoeffMeta> {
    let m: CoeffMeta = read_json(&sidecar(path))?;
    if m.kind != "coefficients" {
        return Err(Error::Format(format!("{}: metadata kind is '{}'", path.display(), m.kind)));
    }
    Ok(m)
}

/// Reads coefficient rows into the layout of `pg`. Missing rows are zero.
pub fn read_coefficients(path: &Path, pg: &PhaseGrid) -> Result<Coefficients> {
    let (header, rows) = read_csv(path)?;
    let d = pg.grid.dim();
    if header.len() != 3 + 3 * d {
        return Err(Error::Format(format!("{}: expected {} columns for d={d}", path.display(), 3 + 3 * d)));
    }
    let mut c = Coefficients::zeros(pg);
    for (n, r) in rows.iter().enumerate() {
        if r.len() != header.len() {
            return Err(Error::Format(format!("{}: row {} has {} fields", path.display(), n + 1, r.len())));
        }
        let as_int = |x: f64| -> Result<i64> {
            if x.fract() == 0.0 && x.abs() < 9e15 {
                Ok(x as i64)
            } else {
                Err(Error::Format(format!("row {}: {x} is not an index", n + 1)))
            }
        };
        let i = as_int(r[0])?;
        let ch = usize::try_from(i).ok().and_then(|i| pg.channels.get(i)).ok_or_else(|| Error::IndexMismatch(format!("row {}: no channel {i}", n + 1)))?;
        let k = r[1..1 + d].iter().map(|&x| as_int(x)).collect::<Result<Vec<i64>>>()?;
        if k != ch.k {
            return Err(Error::IndexMismatch(format!("row {}: channel {i} has index {:?}, file says {k:?}", n + 1, ch.k)));
        }
        let ell = r[1 + d..1 + 2 * d].iter().map(|&x| as_int(x)).collect::<Result<Vec<i64>>>()?;
        let p = ch.position(&ell);
        if ch.ell(p) != ell {
            return Err(Error::IndexMismatch(format!("row {}: time index {ell:?} outside the lattice", n + 1)));
        }
        c.channels[i as usize][p] = Complex64::new(r[3 * d + 1], r[3 * d + 2]);
    }
    Ok(c)
}
