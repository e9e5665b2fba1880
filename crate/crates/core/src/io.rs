//! Netpbm and CSV readers and writers for fields and pixel sets.
//!
//! PGM gray levels map to `level / maxval`. PBM stores members as 1 (black);
//! whether the exterior belongs to the set is recorded in a header comment
//! `# background=1`, absent meaning 0. Row `j` of an image is grid row `j`.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{GridDomain, PixelSet, ScalarField};

fn parse_err(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

fn domain_for(width: usize, height: usize, spacing: f64) -> Result<GridDomain> {
    if height == 1 {
        GridDomain::line(width, spacing)
    } else {
        GridDomain::plane(width, height, spacing)
    }
}

/// Header tokens of a netpbm file plus the offset where the raster starts.
struct Header {
    magic: [u8; 2],
    fields: Vec<usize>,
    background: bool,
    data_start: usize,
}

fn read_header(bytes: &[u8], wanted: usize) -> Result<Header> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(parse_err("missing netpbm magic number"));
    }
    let magic = [bytes[0], bytes[1]];
    let mut pos = 2;
    let mut fields = Vec::new();
    let mut background = false;
    while fields.len() < wanted {
        match bytes.get(pos) {
            None => return Err(parse_err("truncated header")),
            Some(b'#') => {
                let end = bytes[pos..].iter().position(|&b| b == b'\n').map_or(bytes.len(), |e| pos + e);
                let comment = String::from_utf8_lossy(&bytes[pos + 1..end]);
                if let Some(v) = comment.trim().strip_prefix("background=") {
                    background = match v.trim() {
                        "0" => false,
                        "1" => true,
                        other => return Err(parse_err(format!("bad background flag `{other}`"))),
                    };
                }
                pos = end;
            }
            Some(b) if b.is_ascii_whitespace() => pos += 1,
            Some(b) if b.is_ascii_digit() => {
                let start = pos;
                while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
                    pos += 1;
                }
                let tok = std::str::from_utf8(&bytes[start..pos]).expect("ascii digits");
                fields.push(tok.parse().map_err(|_| parse_err(format!("bad header number `{tok}`")))?);
            }
            Some(&b) => return Err(parse_err(format!("unexpected byte {b:#04x} in header"))),
        }
    }
    // Exactly one whitespace byte separates the header from a binary raster.
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) && pos < bytes.len() {
        return Err(parse_err("header not terminated by whitespace"));
    }
    Ok(Header { magic, fields, background, data_start: pos + 1 })
}

fn ascii_values(bytes: &[u8], count: usize) -> Result<Vec<u32>> {
    let text = String::from_utf8_lossy(bytes);
    let mut out = Vec::with_capacity(count);
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("");
        for tok in line.split_ascii_whitespace() {
            out.push(tok.parse().map_err(|_| parse_err(format!("bad sample `{tok}`")))?);
        }
    }
    if out.len() < count {
        return Err(parse_err(format!("expected {count} samples, found {}", out.len())));
    }
    out.truncate(count);
    Ok(out)
}

/// Reads an ASCII (P2) or binary (P5) graymap.
pub fn read_pgm(path: impl AsRef<Path>, spacing: f64) -> Result<ScalarField> {
    let bytes = fs::read(path)?;
    let h = read_header(&bytes, 3)?;
    let (w, ht, maxval) = (h.fields[0], h.fields[1], h.fields[2]);
    if maxval == 0 || maxval > 65535 {
        return Err(parse_err(format!("maxval {maxval} out of range")));
    }
    let n = w * ht;
    let raw: Vec<u32> = match &h.magic {
        b"P2" => ascii_values(bytes.get(h.data_start..).unwrap_or(&[]), n)?,
        b"P5" => {
            let data = bytes.get(h.data_start..).unwrap_or(&[]);
            let wide = maxval > 255;
            let need = if wide { 2 * n } else { n };
            if data.len() < need {
                return Err(parse_err("truncated raster"));
            }
            if wide {
                data[..need].chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as u32).collect()
            } else {
                data[..n].iter().map(|&b| b as u32).collect()
            }
        }
        m => return Err(parse_err(format!("not a graymap: P{}", m[1] as char))),
    };
    if let Some(v) = raw.iter().find(|&&v| v > maxval as u32) {
        return Err(parse_err(format!("sample {v} exceeds maxval {maxval}")));
    }
    let values = raw.iter().map(|&v| v as f64 / maxval as f64).collect();
    ScalarField::new(domain_for(w, ht, spacing)?, values)
}

/// Writes a binary 8-bit graymap; values are clamped to `[0, 1]` and rounded.
pub fn write_pgm(field: &ScalarField, path: impl AsRef<Path>) -> Result<()> {
    let [w, h] = field.domain().shape();
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend(field.values().iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    fs::write(path, out)?;
    Ok(())
}

/// Reads an ASCII (P1) or binary (P4) bitmap.
pub fn read_pbm(path: impl AsRef<Path>, spacing: f64) -> Result<PixelSet> {
    let bytes = fs::read(path)?;
    let h = read_header(&bytes, 2)?;
    let (w, ht) = (h.fields[0], h.fields[1]);
    let n = w * ht;
    let mask: Vec<bool> = match &h.magic {
        b"P1" => {
            // Samples may be packed without separators.
            let data = bytes.get(h.data_start.saturating_sub(1)..).unwrap_or(&[]);
            let mut bits = Vec::with_capacity(n);
            let mut comment = false;
            for &b in data {
                match b {
                    b'#' => comment = true,
                    b'\n' => comment = false,
                    b'0' | b'1' if !comment => bits.push(b == b'1'),
                    _ if comment || b.is_ascii_whitespace() => {}
                    _ => return Err(parse_err(format!("unexpected byte {b:#04x} in bitmap"))),
                }
                if bits.len() == n {
                    break;
                }
            }
            if bits.len() < n {
                return Err(parse_err(format!("expected {n} bits, found {}", bits.len())));
            }
            bits
        }
        b"P4" => {
            let stride = w.div_ceil(8);
            let data = bytes.get(h.data_start..).unwrap_or(&[]);
            if data.len() < stride * ht {
                return Err(parse_err("truncated raster"));
            }
            (0..n)
                .map(|idx| {
                    let (i, j) = (idx % w, idx / w);
                    data[j * stride + i / 8] >> (7 - i % 8) & 1 == 1
                })
                .collect()
        }
        m => return Err(parse_err(format!("not a bitmap: P{}", m[1] as char))),
    };
    PixelSet::from_mask(domain_for(w, ht, spacing)?, mask, h.background)
}

/// Writes a binary bitmap with the background header comment.
pub fn write_pbm(set: &PixelSet, path: impl AsRef<Path>) -> Result<()> {
    let [w, h] = set.domain().shape();
    let mut out =
        format!("P4\n# background={}\n{w} {h}\n", u8::from(set.background())).into_bytes();
    let stride = w.div_ceil(8);
    let mut row = vec![0u8; stride];
    for j in 0..h {
        row.fill(0);
        for i in 0..w {
            if set.contains(set.domain().index(i, j)) {
                row[i / 8] |= 0x80 >> (i % 8);
            }
        }
        out.extend_from_slice(&row);
    }
    fs::write(path, out)?;
    Ok(())
}

/// One grid row per CSV record, no header.
pub fn read_csv_field(path: impl AsRef<Path>, spacing: f64) -> Result<ScalarField> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut values = Vec::new();
    let mut width = None;
    let mut height = 0;
    for rec in rdr.records() {
        let rec = rec?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        match width {
            None => width = Some(rec.len()),
            Some(w) if w != rec.len() => {
                return Err(parse_err(format!("row {height} has {} values, expected {w}", rec.len())))
            }
            _ => {}
        }
        for tok in rec.iter() {
            values.push(tok.parse::<f64>().map_err(|_| parse_err(format!("bad number `{tok}`")))?);
        }
        height += 1;
    }
    let width = width.ok_or_else(|| parse_err("empty CSV"))?;
    ScalarField::new(domain_for(width, height, spacing)?, values)
}

pub fn write_csv_field(field: &ScalarField, path: impl AsRef<Path>) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    let w = field.domain().width();
    for row in field.values().chunks(w) {
        wtr.write_record(row.iter().map(|v| format!("{v}")))?;
    }
    wtr.flush()?;
    Ok(())
}

fn extension(path: &Path) -> String {
    path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase()
}

/// Loads a field from `.pgm`, `.csv`, or `.pbm` (as an indicator).
pub fn load_field(path: impl AsRef<Path>, spacing: f64) -> Result<ScalarField> {
    let path = path.as_ref();
    match extension(path).as_str() {
        "pgm" => read_pgm(path, spacing),
        "csv" | "txt" => read_csv_field(path, spacing),
        "pbm" => ScalarField::indicator(&read_pbm(path, spacing)?, 1.0),
        e => Err(parse_err(format!("unsupported field format `.{e}`"))),
    }
}

/// Loads a set from `.pbm`, or from a field as `{f > 1/2}`.
pub fn load_set(path: impl AsRef<Path>, spacing: f64) -> Result<PixelSet> {
    let path = path.as_ref();
    match extension(path).as_str() {
        "pbm" => read_pbm(path, spacing),
        _ => Ok(crate::grid::level_set(&load_field(path, spacing)?, 0.5, true)),
    }
}

pub fn save_field(field: &ScalarField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    match extension(path).as_str() {
        "pgm" => write_pgm(field, path),
        _ => write_csv_field(field, path),
    }
}

pub fn write_json<T: serde::Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let mut f = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}
