//! File formats. CSV is the source of truth for every array; the 16-bit PGM
//! graymaps are for looking at only.
//!
//! - image CSV: `M` lines of `M` values, row-major from the top-left pixel, no
//!   header. Values are written in shortest round-trip form, so
//!   write-then-read is lossless.
//! - PGM: binary `P5`, maxval 65535, big-endian. A value `v` is stored as
//!   `round(65535 (v - lo) / (hi - lo))` after clamping to `[lo, hi]`, so a
//!   round trip is exact up to `(hi - lo) / 131070`.
//! - sinogram CSV: header `s,omega,value`, angle-major.
//! - scan CSV: header `offset,value`, offsets signed and ascending.
//! - boundary CSV: header `set_index,x,y`, outermost set first.
//! - history CSV: header `k,objective,r,s,beta,mb_proportion,delta_a,delta_f`.

use std::fs;
use std::path::Path;

use atrt_core::singularity::{DerivativeScan, RecoveredSet};
use atrt_core::solver::HistoryRow;
use atrt_core::{Image, PixelGrid, ProjectionGeometry, Sinogram};

use crate::error::{CliError, CliResult};

/// Writes `bytes`, creating missing parent directories.
pub fn write_bytes(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    write_bytes(path, text.as_bytes())
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

// Headers are always written explicitly, never derived from field names.
fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new())
}

fn into_string(w: csv::Writer<Vec<u8>>) -> String {
    let bytes = w.into_inner().expect("writing to memory cannot fail");
    String::from_utf8(bytes).expect("csv output is utf-8")
}

fn parse_f64(field: &str, what: &str) -> CliResult<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| CliError::Validation(format!("{what}: '{field}' is not a number")))
}

pub fn image_csv(image: &Image) -> String {
    let m = image.grid().size();
    let mut w = writer();
    for row in image.values().chunks(m) {
        w.serialize(row).expect("writing to memory cannot fail");
    }
    into_string(w)
}

pub fn parse_image_csv(text: &str, side: f64) -> CliResult<Image> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes());
    let mut values = Vec::new();
    let mut rows = 0;
    for rec in r.records() {
        let rec = rec?;
        for field in rec.iter() {
            values.push(parse_f64(field, "image")?);
        }
        rows += 1;
    }
    if rows == 0 || values.len() != rows * rows {
        return Err(CliError::Validation(format!(
            "image must be square: {rows} rows, {} values",
            values.len()
        )));
    }
    Ok(Image::new(PixelGrid::spanning(rows, side)?, values)?)
}

pub fn write_image_csv(path: &Path, image: &Image) -> CliResult<()> {
    write_text(path, &image_csv(image))
}

pub fn read_image_csv(path: &Path, side: f64) -> CliResult<Image> {
    parse_image_csv(&read_text(path)?, side)
}

pub fn pgm_bytes(image: &Image, lo: f64, hi: f64) -> CliResult<Vec<u8>> {
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(CliError::Validation("graymap range needs lo < hi".into()));
    }
    let m = image.grid().size();
    let mut out = format!("P5\n{m} {m}\n65535\n").into_bytes();
    for &v in image.values() {
        let q = ((v.clamp(lo, hi) - lo) / (hi - lo) * 65535.0).round() as u16;
        out.extend_from_slice(&q.to_be_bytes());
    }
    Ok(out)
}

pub fn write_pgm(path: &Path, image: &Image, lo: f64, hi: f64) -> CliResult<()> {
    write_bytes(path, &pgm_bytes(image, lo, hi)?)
}

/// Inverse of [`pgm_bytes`] for the same `[lo, hi]`.
pub fn parse_pgm(bytes: &[u8], side: f64, lo: f64, hi: f64) -> CliResult<Image> {
    let bad = |msg: &str| CliError::Validation(format!("pgm: {msg}"));
    // Header: magic, width, height, maxval, then exactly one whitespace byte.
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("header is not text"))?);
    }
    pos += 1;
    if fields[0] != "P5" || fields[3] != "65535" {
        return Err(bad("expected a 16-bit P5 graymap"));
    }
    let w: usize = fields[1].parse().map_err(|_| bad("bad width"))?;
    let h: usize = fields[2].parse().map_err(|_| bad("bad height"))?;
    if w != h || w == 0 {
        return Err(bad("graymap must be square"));
    }
    let data = bytes.get(pos..).ok_or_else(|| bad("missing pixel data"))?;
    if data.len() != 2 * w * h {
        return Err(bad("pixel data has the wrong length"));
    }
    let values = data
        .chunks(2)
        .map(|b| lo + (hi - lo) * f64::from(u16::from_be_bytes([b[0], b[1]])) / 65535.0)
        .collect();
    Ok(Image::new(PixelGrid::spanning(w, side)?, values)?)
}

pub fn read_pgm(path: &Path, side: f64, lo: f64, hi: f64) -> CliResult<Image> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    parse_pgm(&bytes, side, lo, hi)
}

pub fn sinogram_csv(d: &Sinogram) -> String {
    let mut w = writer();
    w.write_record(["s", "omega", "value"]).expect("in memory");
    for (ray, v) in d.geometry().rays().zip(d.values()) {
        w.serialize((ray.s, ray.omega, v)).expect("in memory");
    }
    into_string(w)
}

/// Rebuilds the geometry from the rows: the offsets are those of the first
/// angle, and every angle must repeat them in the same order.
pub fn parse_sinogram_csv(text: &str) -> CliResult<Sinogram> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != ["s", "omega", "value"] {
        return Err(CliError::Validation("sinogram header must be s,omega,value".into()));
    }
    let mut rows: Vec<(f64, f64, f64)> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 3 {
            return Err(CliError::Validation("sinogram rows need three fields".into()));
        }
        rows.push((
            parse_f64(&rec[0], "sinogram s")?,
            parse_f64(&rec[1], "sinogram omega")?,
            parse_f64(&rec[2], "sinogram value")?,
        ));
    }
    let Some(&(_, first_omega, _)) = rows.first() else {
        return Err(CliError::Validation("sinogram is empty".into()));
    };
    let offsets: Vec<f64> = rows.iter().take_while(|r| r.1 == first_omega).map(|r| r.0).collect();
    let n = offsets.len();
    if rows.len() % n != 0 {
        return Err(CliError::Validation("sinogram rows do not form a full angle x offset table".into()));
    }
    let mut angles = Vec::new();
    for chunk in rows.chunks(n) {
        let omega = chunk[0].1;
        if chunk.iter().zip(&offsets).any(|(r, &s)| r.1 != omega || r.0 != s) {
            return Err(CliError::Validation("sinogram rows do not form a full angle x offset table".into()));
        }
        angles.push(omega);
    }
    let values = rows.iter().map(|r| r.2).collect();
    Ok(Sinogram::new(ProjectionGeometry::new(angles, offsets)?, values)?)
}

pub fn write_sinogram_csv(path: &Path, d: &Sinogram) -> CliResult<()> {
    write_text(path, &sinogram_csv(d))
}

pub fn read_sinogram_csv(path: &Path) -> CliResult<Sinogram> {
    parse_sinogram_csv(&read_text(path)?)
}

/// Both sides of a scan, minus side first, as signed offsets.
pub fn scan_csv(scan: &DerivativeScan) -> String {
    let mut pairs: Vec<(f64, f64)> = scan.offsets.iter().copied().zip(scan.values.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut w = writer();
    w.write_record(["offset", "value"]).expect("in memory");
    for p in pairs {
        w.serialize(p).expect("in memory");
    }
    into_string(w)
}

pub fn boundary_csv(sets: &[RecoveredSet]) -> String {
    let mut w = writer();
    w.write_record(["set_index", "x", "y"]).expect("in memory");
    for (i, set) in sets.iter().enumerate() {
        for p in &set.points {
            w.serialize((i, p.x, p.y)).expect("in memory");
        }
    }
    into_string(w)
}

pub fn history_csv(rows: &[HistoryRow]) -> String {
    let mut w = writer();
    w.write_record(["k", "objective", "r", "s", "beta", "mb_proportion", "delta_a", "delta_f"])
        .expect("in memory");
    for h in rows {
        w.serialize((h.k, h.objective, h.r, h.s, h.beta, h.mb_proportion, h.delta_a, h.delta_f))
            .expect("in memory");
    }
    into_string(w)
}

/// Generic two-or-more column table with a header.
pub fn table_csv<R: serde::Serialize>(header: &[&str], rows: &[R]) -> String {
    let mut w = writer();
    w.write_record(header).expect("in memory");
    for r in rows {
        w.serialize(r).expect("in memory");
    }
    into_string(w)
}
