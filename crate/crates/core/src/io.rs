//! Plain-text artifacts: vectors, image grids, spectra and PGM previews.
//!
//! Floats are written with `{:.16e}` so that a write/read cycle is exact and
//! identical inputs give identical bytes.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::analysis::{PicardData, SpectrumData, VisibleMask};
use crate::error::{Error, Result};
use crate::grid::Image;

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn parse_f64(tok: &str, path: &Path, line: usize) -> Result<f64> {
    tok.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("{}:{line}: bad number {tok:?}", path.display())))
}

/// One value per line.
pub fn write_vector(path: &Path, v: &[f64]) -> Result<()> {
    let mut w = create(path)?;
    for x in v {
        writeln!(w, "{x:.16e}")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads one value per line, skipping blank and `#` lines.
pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (k, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        out.push(parse_f64(t, path, k + 1)?);
    }
    Ok(out)
}

/// `n` comma-separated rows; row `j` holds `y_j`, columns run over `x_i`.
pub fn write_image(path: &Path, img: &Image) -> Result<()> {
    let mut w = create(path)?;
    for row in img.values().chunks_exact(img.n()) {
        let line: Vec<String> = row.iter().map(|x| format!("{x:.16e}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_image(path: &Path) -> Result<Image> {
    let r = BufReader::new(File::open(path)?);
    let mut values = Vec::new();
    let mut rows = 0;
    let mut width = None;
    for (k, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let row = t
            .split(',')
            .map(|tok| parse_f64(tok, path, k + 1))
            .collect::<Result<Vec<_>>>()?;
        if *width.get_or_insert(row.len()) != row.len() {
            return Err(Error::Parse(format!(
                "{}:{}: ragged row",
                path.display(),
                k + 1
            )));
        }
        values.extend(row);
        rows += 1;
    }
    if width != Some(rows) {
        return Err(Error::Parse(format!(
            "{}: image is not square",
            path.display()
        )));
    }
    Image::square(rows, values)
}

/// Plain (P2) greyscale, min–max scaled to 0–255; the top row is the
/// largest `y`.
pub fn write_pgm(path: &Path, img: &Image) -> Result<()> {
    let n = img.n();
    let v = img.values();
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let mut w = create(path)?;
    writeln!(w, "P2\n{n} {n}\n255")?;
    for row in v.chunks_exact(n).rev() {
        let line: Vec<String> = row
            .iter()
            .map(|x| {
                let g = if span > 0.0 {
                    (x - lo) / span * 255.0
                } else {
                    0.0
                };
                (g.round() as u8).to_string()
            })
            .collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    w.flush()?;
    Ok(())
}

/// `i,sigma` with 1-based `i`, then `#` lines with κ and the tolerance.
pub fn write_spectrum(path: &Path, s: &SpectrumData) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "i,sigma")?;
    for (k, x) in s.singular_values.iter().enumerate() {
        writeln!(w, "{},{x:.16e}", k + 1)?;
    }
    if s.kappa.is_finite() {
        writeln!(w, "# kappa={:.16e}", s.kappa)?;
    } else {
        writeln!(w, "# kappa=inf")?;
    }
    writeln!(w, "# rank_tolerance={:.16e}", s.rank_tolerance)?;
    w.flush()?;
    Ok(())
}

/// `i,sigma,coef,solcoef`
pub fn write_picard(path: &Path, p: &PicardData) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "i,sigma,coef,solcoef")?;
    for (k, t) in p.triples.iter().enumerate() {
        writeln!(
            w,
            "{},{:.16e},{:.16e},{:.16e}",
            k + 1,
            t.sigma,
            t.coef,
            t.solcoef
        )?;
    }
    w.flush()?;
    Ok(())
}

/// 0/1 grid in the same layout as [`write_image`].
pub fn write_mask(path: &Path, m: &VisibleMask) -> Result<()> {
    let mut w = create(path)?;
    for row in m.visible().chunks_exact(m.n()) {
        let line: Vec<&str> = row.iter().map(|&v| if v { "1" } else { "0" }).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}
