//! File formats.
//!
//! Complex matrices use a little-endian container: an 8-byte magic, `rows`
//! and `cols` as `u32`, then `rows * cols` entries in row-major order, each
//! an `f64` real part followed by an `f64` imaginary part. Echoes are stored
//! `Nr x Na` under [`ECHO_MAGIC`]; a cached restricted dictionary is stored
//! `M x N` under [`CACHE_MAGIC`].

use crate::baseline::IntensityImage;
use crate::echo::EchoMatrix;
use crate::radar::ExtendedGrid;
use crate::recovery::{Diagnostics, SparseProfile};
use crate::{Complex64, Error, Result};
use std::fmt::Write as _;
use std::io::{Read, Write};

pub const ECHO_MAGIC: [u8; 8] = *b"SARECHO\0";
pub const CACHE_MAGIC: [u8; 8] = *b"SARDICT\0";
pub const HEADER_LEN: usize = 16;

fn write_matrix<W: Write>(w: &mut W, magic: [u8; 8], rows: usize, cols: usize, at: impl Fn(usize, usize) -> Complex64) -> Result<()> {
    let dim = |v: usize, what: &str| u32::try_from(v).map_err(|_| Error::Format(format!("{what} {v} exceeds u32")));
    let mut buf = Vec::with_capacity(HEADER_LEN + 16 * rows * cols);
    buf.extend_from_slice(&magic);
    buf.extend_from_slice(&dim(rows, "rows")?.to_le_bytes());
    buf.extend_from_slice(&dim(cols, "cols")?.to_le_bytes());
    for i in 0..rows {
        for j in 0..cols {
            let z = at(i, j);
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Reads a container, returning `(rows, cols, row-major entries)`.
fn read_matrix<R: Read>(r: &mut R, magic: [u8; 8]) -> Result<(usize, usize, Vec<Complex64>)> {
    let mut header = [0u8; HEADER_LEN];
    r.read_exact(&mut header)
        .map_err(|e| Error::Format(format!("truncated header: {e}")))?;
    if header[..8] != magic {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&header[..8]),
            String::from_utf8_lossy(&magic)
        )));
    }
    let rows = u32::from_le_bytes(header[8..12].try_into().expect("4 bytes")) as usize;
    let cols = u32::from_le_bytes(header[12..16].try_into().expect("4 bytes")) as usize;
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(16))
        .ok_or_else(|| Error::Format("header dimensions overflow".into()))?;
    if body.len() != expected {
        return Err(Error::Format(format!(
            "{} payload bytes for a {rows} x {cols} matrix, expected {expected}",
            body.len()
        )));
    }
    let f = |b: &[u8]| f64::from_le_bytes(b.try_into().expect("8 bytes"));
    let data = body
        .chunks_exact(16)
        .map(|c| Complex64::new(f(&c[..8]), f(&c[8..])))
        .collect();
    Ok((rows, cols, data))
}

pub fn write_echo<W: Write>(w: &mut W, echo: &EchoMatrix) -> Result<()> {
    write_matrix(w, ECHO_MAGIC, echo.range_samples(), echo.azimuth_samples(), |m, n| echo.get(m, n))
}

pub fn read_echo<R: Read>(r: &mut R) -> Result<EchoMatrix> {
    let (nr, na, data) = read_matrix(r, ECHO_MAGIC)?;
    let mut samples = vec![Complex64::new(0.0, 0.0); data.len()];
    for m in 0..nr {
        for n in 0..na {
            samples[m + nr * n] = data[m * na + n];
        }
    }
    EchoMatrix::from_vec(nr, na, samples)
}

/// Stores an atom-major restricted dictionary (`atom g` at `g*M..(g+1)*M`)
/// as an `M x N` container.
pub fn write_cache<W: Write>(w: &mut W, rows: usize, atom_major: &[Complex64]) -> Result<()> {
    if rows == 0 || atom_major.len() % rows != 0 {
        return Err(Error::DimensionMismatch(format!(
            "{} entries do not form {rows}-row columns",
            atom_major.len()
        )));
    }
    let cols = atom_major.len() / rows;
    write_matrix(w, CACHE_MAGIC, rows, cols, |i, g| atom_major[g * rows + i])
}

/// Reads a cache container back into `(M, N, atom-major entries)`.
pub fn read_cache<R: Read>(r: &mut R) -> Result<(usize, usize, Vec<Complex64>)> {
    let (rows, cols, data) = read_matrix(r, CACHE_MAGIC)?;
    let mut out = vec![Complex64::new(0.0, 0.0); data.len()];
    for i in 0..rows {
        for g in 0..cols {
            out[g * rows + i] = data[i * cols + g];
        }
    }
    Ok((rows, cols, out))
}

/// Echo magnitudes, one line per range sample, `Na` values per line.
pub fn echo_magnitude_csv(echo: &EchoMatrix) -> String {
    let mut out = String::new();
    for m in 0..echo.range_samples() {
        let line: Vec<String> = (0..echo.azimuth_samples())
            .map(|n| echo.get(m, n).norm().to_string())
            .collect();
        let _ = writeln!(out, "{}", line.join(","));
    }
    out
}

/// Profile as CSV with columns `flat_index,n1,n2,p,q,re,im`, plus
/// `x,y,vx,vy` before `re` when `physical` is set.
pub fn profile_csv(profile: &SparseProfile, physical: bool) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["flat_index", "n1", "n2", "p", "q"];
    if physical {
        header.extend(["x", "y", "vx", "vy"]);
    }
    header.extend(["re", "im"]);
    w.write_record(&header).map_err(csv_err)?;
    let g = profile.grid();
    for (c, a) in profile.entries() {
        let mut rec = vec![
            g.flat_index(*c)?.to_string(),
            c.n1.to_string(),
            c.n2.to_string(),
            c.p.to_string(),
            c.q.to_string(),
        ];
        if physical {
            let k = g.to_physical(*c)?;
            rec.extend([k.x, k.y, k.vx, k.vy].map(|v| v.to_string()));
        }
        rec.extend([a.re.to_string(), a.im.to_string()]);
        w.write_record(&rec).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

/// Parses a profile written by [`profile_csv`] (either variant). Cells are
/// taken from `n1,n2,p,q`; `flat_index` must agree with them.
pub fn read_profile_csv<R: Read>(r: R, grid: ExtendedGrid) -> Result<SparseProfile> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Format(format!("profile CSV lacks column {name:?}")))
    };
    let [fi, n1, n2, p, q, re, im] = ["flat_index", "n1", "n2", "p", "q", "re", "im"].map(col);
    let (fi, n1, n2, p, q, re, im) = (fi?, n1?, n2?, p?, q?, re?, im?);
    let mut entries = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let field = |i: usize| rec.get(i).map(str::trim).unwrap_or("");
        let int = |i: usize| {
            field(i)
                .parse::<usize>()
                .map_err(|e| Error::Format(format!("row {}: {e}", line + 2)))
        };
        let num = |i: usize| {
            field(i)
                .parse::<f64>()
                .map_err(|e| Error::Format(format!("row {}: {e}", line + 2)))
        };
        let c = crate::radar::GridCoord::new(int(n1)?, int(n2)?, int(p)?, int(q)?);
        if grid.flat_index(c)? != int(fi)? {
            return Err(Error::Format(format!("row {}: flat_index disagrees with (n1, n2, p, q)", line + 2)));
        }
        entries.push((c, Complex64::new(num(re)?, num(im)?)));
    }
    SparseProfile::new(grid, entries)
}

/// Per-iteration residual and support, one line per iteration, then comment
/// lines with the halt reason, final residual and dropped columns.
pub fn diagnostics_csv(d: &Diagnostics) -> String {
    let mut out = String::from("iteration,residual_norm,support_size,support\n");
    let join = |v: &[usize]| v.iter().map(|g| g.to_string()).collect::<Vec<_>>().join(" ");
    for it in &d.iterations {
        let _ = writeln!(out, "{},{},{},{}", it.iteration, it.residual_norm, it.support.len(), join(&it.support));
    }
    let _ = writeln!(out, "# halt_reason={}", d.halt_reason.as_str());
    let _ = writeln!(out, "# final_residual_norm={}", d.final_residual_norm);
    let _ = writeln!(out, "# threshold={}", d.threshold);
    let _ = writeln!(out, "# dropped_columns={}", join(&d.dropped_columns));
    out
}

/// Binary 8-bit graymap, one row per range bin, scaled so the peak is 255.
pub fn pgm(image: &IntensityImage) -> Vec<u8> {
    let peak = image.max();
    let mut out = format!("P5\n{} {}\n255\n", image.cols(), image.rows()).into_bytes();
    out.extend(image.pixels().iter().map(|&v| {
        if peak > 0.0 {
            (255.0 * v / peak).round().clamp(0.0, 255.0) as u8
        } else {
            0
        }
    }));
    out
}

/// Linear pixel magnitudes, one line per range bin.
pub fn image_csv(image: &IntensityImage) -> String {
    let mut out = String::new();
    for n1 in 0..image.rows() {
        let line: Vec<String> = (0..image.cols()).map(|n2| image.get(n1, n2).to_string()).collect();
        let _ = writeln!(out, "{}", line.join(","));
    }
    out
}
