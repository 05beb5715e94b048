//! Plain-text array format: a header line `nx ny nz` followed by one value
//! per line in x-fastest order. Values are written with Rust's shortest
//! round-trip float formatting, so reading back is exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{GridSpec, RelPermTable, ScalarField};
use crate::error::{Error, Result};

pub fn format_field(field: &ScalarField) -> String {
    let g = &field.grid;
    let mut out = String::with_capacity(field.values.len() * 20 + 16);
    let _ = writeln!(out, "{} {} {}", g.nx, g.ny, g.nz);
    for v in &field.values {
        let _ = writeln!(out, "{v}");
    }
    out
}

pub fn write_field(path: &Path, field: &ScalarField) -> Result<()> {
    fs::write(path, format_field(field)).map_err(|e| Error::io(path, e))
}

/// Parse a field. The cell sizes are taken from `template`; the header must
/// match its dimensions.
pub fn parse_field(text: &str, template: &GridSpec) -> Result<ScalarField> {
    let mut tokens = text.split_whitespace();
    let mut header = [0usize; 3];
    for slot in header.iter_mut() {
        *slot = tokens
            .next()
            .ok_or_else(|| Error::Format("truncated field header".into()))?
            .parse()
            .map_err(|e| Error::Format(format!("bad field header: {e}")))?;
    }
    if header != [template.nx, template.ny, template.nz] {
        return Err(Error::Dimension(format!(
            "field header {header:?} does not match grid {}x{}x{}",
            template.nx, template.ny, template.nz
        )));
    }
    let values = tokens
        .map(|t| t.parse::<f64>().map_err(|e| Error::Format(format!("bad value {t:?}: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    ScalarField::new(*template, values)
}

pub fn read_field(path: &Path, template: &GridSpec) -> Result<ScalarField> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_field(&text, template)
}

/// Three-column CSV `sw,krw,kro` with a header row.
pub fn read_relperm_csv(path: &Path, swc: f64, sor: f64) -> Result<RelPermTable> {
    let mut reader = csv::Reader::from_path(path)?;
    let (mut sw, mut krw, mut kro) = (Vec::new(), Vec::new(), Vec::new());
    for record in reader.deserialize() {
        let (s, w, o): (f64, f64, f64) = record?;
        sw.push(s);
        krw.push(w);
        kro.push(o);
    }
    RelPermTable::new(sw, krw, kro, swc, sor)
}

pub fn write_relperm_csv(path: &Path, table: &RelPermTable) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["sw", "krw", "kro"])?;
    for (s, w, o) in table.points() {
        writer.write_record([s.to_string(), w.to_string(), o.to_string()])?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}
