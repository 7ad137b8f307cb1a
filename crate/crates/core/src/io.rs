//! On-disk formats: FRAME (count frames), TOMO (per-pixel density
//! matrices) and geometry-tagged CSV (real images).
//!
//! FRAME is text:
//!
//! ```text
//! FRAME 1
//! width 3
//! height 2
//! signal H
//! idler D
//! exposures 2000
//! seed 42
//! pixel_pitch 0.000013
//! magnification 4
//! 0 5 2
//! 1 0 7
//! ```
//!
//! `pixel_pitch` and `magnification` are optional on input. Counts are
//! row-major and whitespace separated.
//!
//! TOMO is a text header terminated by a `data` line, followed by one
//! binary record per pixel in row-major order: the 16 real numbers listed
//! on the `order` line as little-endian `f64`, then one status byte
//! (0 converged, 1 iteration limit, 2 no counts).

use std::io::{BufRead, Write};

use nalgebra::Matrix4;

use crate::error::{Error, Result};
use crate::frames::{CountFrame, Setting};
use crate::grid::{GridGeometry, RealImage};
use crate::qstate::{c, DensityMatrix};
use crate::tomography::{PixelTomographyResult, TomographyMap, TomographyStatus};

pub const FRAME_MAGIC: &str = "FRAME 1";
pub const TOMO_MAGIC: &str = "TOMO 1";
/// Entry order of a TOMO record.
pub const TOMO_ORDER: [&str; 16] = [
    "re00", "re11", "re22", "re33", "re01", "im01", "re02", "im02", "re03", "im03", "re12", "im12",
    "re13", "im13", "re23", "im23",
];
const TOMO_RECORD: usize = 16 * 8 + 1;

/// Upper-triangle positions matching [`TOMO_ORDER`] after the diagonal.
const OFF_DIAGONAL: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// Ordered `key value` header lines.
struct Header {
    format: &'static str,
    fields: Vec<(String, String)>,
}

impl Header {
    fn get(&self, key: &str) -> Option<&str> {
        self.fields
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::format(self.format, format!("missing header field `{key}`")))
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.require(key)?;
        raw.parse()
            .map_err(|_| Error::format(self.format, format!("bad value `{raw}` for `{key}`")))
    }

    fn parse_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.get(key) {
            Some(_) => self.parse(key),
            None => Ok(default),
        }
    }

    fn grid(&self) -> Result<GridGeometry> {
        GridGeometry::new(
            self.parse("width")?,
            self.parse("height")?,
            self.parse_or("pixel_pitch", crate::field::DEFAULT_PIXEL_PITCH)?,
            self.parse_or("magnification", 1.0)?,
        )
        .map_err(|e| Error::format(self.format, e.to_string()))
    }
}

fn expect_magic<R: BufRead>(r: &mut R, magic: &'static str, format: &'static str) -> Result<()> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    if line.trim_end() != magic {
        return Err(Error::format(
            format,
            format!(
                "expected `{magic}` on the first line, found `{}`",
                line.trim_end()
            ),
        ));
    }
    Ok(())
}

pub fn write_frame<W: Write>(w: &mut W, frame: &CountFrame) -> Result<()> {
    let g = &frame.grid;
    writeln!(w, "{FRAME_MAGIC}")?;
    writeln!(w, "width {}", g.width)?;
    writeln!(w, "height {}", g.height)?;
    writeln!(w, "signal {}", frame.setting.signal)?;
    writeln!(w, "idler {}", frame.setting.idler)?;
    writeln!(w, "exposures {}", frame.exposures)?;
    writeln!(w, "seed {}", frame.seed)?;
    writeln!(w, "pixel_pitch {}", g.pixel_pitch)?;
    writeln!(w, "magnification {}", g.magnification)?;
    let mut line = String::new();
    for row in frame.counts.chunks(g.width) {
        line.clear();
        for (k, c) in row.iter().enumerate() {
            if k > 0 {
                line.push(' ');
            }
            line.push_str(&c.to_string());
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn read_frame<R: BufRead>(r: &mut R) -> Result<CountFrame> {
    const F: &str = "FRAME";
    expect_magic(r, FRAME_MAGIC, F)?;
    let mut fields = Vec::new();
    let mut counts: Vec<u64> = Vec::new();
    let mut in_data = false;
    for line in r.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let starts_alpha = line.starts_with(|c: char| c.is_ascii_alphabetic());
        if !in_data && starts_alpha {
            let (k, v) = line
                .split_once(char::is_whitespace)
                .ok_or_else(|| Error::format(F, format!("header line `{line}` has no value")))?;
            fields.push((k.to_string(), v.trim().to_string()));
            continue;
        }
        in_data = true;
        for tok in line.split_whitespace() {
            counts.push(tok.parse().map_err(|_| {
                Error::format(F, format!("`{tok}` is not a nonnegative integer count"))
            })?);
        }
    }
    let header = Header { format: F, fields };
    let grid = header.grid()?;
    let setting = Setting::new(header.parse("signal")?, header.parse("idler")?);
    if counts.len() != grid.len() {
        return Err(Error::format(
            F,
            format!(
                "{} counts for a {}x{} grid",
                counts.len(),
                grid.width,
                grid.height
            ),
        ));
    }
    CountFrame::new(
        setting,
        grid,
        counts,
        header.parse("exposures")?,
        header.parse("seed")?,
    )
    .map_err(|e| Error::format(F, e.to_string()))
}

pub fn write_tomo<W: Write>(w: &mut W, map: &TomographyMap) -> Result<()> {
    let g = &map.grid;
    writeln!(w, "{TOMO_MAGIC}")?;
    writeln!(w, "width {}", g.width)?;
    writeln!(w, "height {}", g.height)?;
    writeln!(w, "pixel_pitch {}", g.pixel_pitch)?;
    writeln!(w, "magnification {}", g.magnification)?;
    writeln!(w, "order {} status", TOMO_ORDER.join(" "))?;
    writeln!(w, "data")?;
    let mut buf = Vec::with_capacity(map.pixels.len() * TOMO_RECORD);
    for px in &map.pixels {
        let m = px.rho.matrix();
        for d in 0..4 {
            buf.extend_from_slice(&m[(d, d)].re.to_le_bytes());
        }
        for &(i, j) in &OFF_DIAGONAL {
            buf.extend_from_slice(&m[(i, j)].re.to_le_bytes());
            buf.extend_from_slice(&m[(i, j)].im.to_le_bytes());
        }
        buf.push(px.status.code());
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Reads a TOMO file. Only `rho` and `status` are stored; the other
/// result fields come back zeroed.
pub fn read_tomo<R: BufRead>(r: &mut R) -> Result<TomographyMap> {
    const F: &str = "TOMO";
    expect_magic(r, TOMO_MAGIC, F)?;
    let mut fields = Vec::new();
    loop {
        let mut line = String::new();
        if r.read_line(&mut line)? == 0 {
            return Err(Error::format(F, "header ends without a `data` line"));
        }
        let line = line.trim();
        if line == "data" {
            break;
        }
        let (k, v) = line
            .split_once(char::is_whitespace)
            .ok_or_else(|| Error::format(F, format!("header line `{line}` has no value")))?;
        fields.push((k.to_string(), v.trim().to_string()));
    }
    let header = Header { format: F, fields };
    let grid = header.grid()?;
    let order: Vec<&str> = header.require("order")?.split_whitespace().collect();
    if order[..] != [&TOMO_ORDER[..], &["status"]].concat()[..] {
        return Err(Error::format(F, "unsupported record order"));
    }

    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    if body.len() != grid.len() * TOMO_RECORD {
        return Err(Error::format(
            F,
            format!(
                "{} data bytes, expected {} records of {TOMO_RECORD}",
                body.len(),
                grid.len()
            ),
        ));
    }
    let pixels = body
        .chunks_exact(TOMO_RECORD)
        .enumerate()
        .map(|(k, rec)| {
            let v: [f64; 16] = std::array::from_fn(|n| {
                f64::from_le_bytes(rec[8 * n..8 * n + 8].try_into().unwrap())
            });
            let status = TomographyStatus::from_code(rec[128]).ok_or_else(|| {
                Error::format(F, format!("pixel {k}: bad status byte {}", rec[128]))
            })?;
            let mut m = Matrix4::zeros();
            for d in 0..4 {
                m[(d, d)] = c(v[d], 0.0);
            }
            for (n, &(i, j)) in OFF_DIAGONAL.iter().enumerate() {
                m[(i, j)] = c(v[4 + 2 * n], v[5 + 2 * n]);
                m[(j, i)] = m[(i, j)].conj();
            }
            let rho =
                DensityMatrix::new(m).map_err(|e| Error::format(F, format!("pixel {k}: {e}")))?;
            Ok(PixelTomographyResult {
                rho,
                nll: 0.0,
                iterations: 0,
                flux_estimate: 0.0,
                status,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    TomographyMap::new(grid, pixels)
}

/// CSV with a `# width=..,height=..,pixel_pitch=..,magnification=..` line
/// followed by one comma-separated row per image row.
pub fn write_csv<W: Write>(w: &mut W, img: &RealImage) -> Result<()> {
    let g = &img.grid;
    writeln!(
        w,
        "# width={},height={},pixel_pitch={},magnification={}",
        g.width, g.height, g.pixel_pitch, g.magnification
    )?;
    let mut line = String::new();
    for row in img.data.chunks(g.width) {
        line.clear();
        for (k, v) in row.iter().enumerate() {
            if k > 0 {
                line.push(',');
            }
            line.push_str(&v.to_string());
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn read_csv<R: BufRead>(r: &mut R) -> Result<RealImage> {
    const F: &str = "CSV";
    let mut lines = r.lines();
    let first = lines.next().transpose()?.unwrap_or_default();
    let spec = first
        .strip_prefix('#')
        .ok_or_else(|| Error::format(F, "missing `# width=..,height=..` geometry line"))?;
    let mut fields = Vec::new();
    for part in spec.split(',') {
        let (k, v) = part
            .trim()
            .split_once('=')
            .ok_or_else(|| Error::format(F, format!("bad geometry field `{part}`")))?;
        fields.push((k.to_string(), v.to_string()));
    }
    let header = Header { format: F, fields };
    let grid = header.grid()?;
    let mut data = Vec::with_capacity(grid.len());
    for (row, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let before = data.len();
        for tok in line.split(',') {
            let tok = tok.trim();
            data.push(
                tok.parse::<f64>()
                    .map_err(|_| Error::format(F, format!("row {row}: `{tok}` is not a number")))?,
            );
        }
        if data.len() - before != grid.width {
            return Err(Error::format(
                F,
                format!(
                    "row {row} has {} values, expected {}",
                    data.len() - before,
                    grid.width
                ),
            ));
        }
    }
    RealImage::new(grid, data).map_err(|e| Error::format(F, e.to_string()))
}
