//! CSV and text ingestion of databases.
//!
//! A CSV schema lists one entry per column. A column with `m` categories
//! occupies `ceil(log2 m)` bits; the first column takes the lowest bits.
//! Categories are given either as an explicit `values` list (matched as
//! strings, code = position) or as a `cardinality` (integer codes
//! `0..cardinality`). Codes past the last category are never produced by
//! ingestion but remain legal mechanism outputs.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DataUniverse, Database, MAX_BITS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnSchema {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub values: Option<Vec<String>>,
    #[serde(default)]
    pub cardinality: Option<usize>,
}

impl ColumnSchema {
    pub fn categories(&self) -> Result<usize> {
        match (&self.values, self.cardinality) {
            (Some(v), None) if !v.is_empty() => Ok(v.len()),
            (None, Some(m)) if m >= 1 => Ok(m),
            _ => Err(Error::Config(format!(
                "column {:?} needs exactly one of a nonempty `values` list or `cardinality` >= 1",
                self.name.as_deref().unwrap_or("?")
            ))),
        }
    }

    /// `ceil(log2 m)`.
    pub fn bits(&self) -> Result<u32> {
        let m = self.categories()?;
        Ok(usize::BITS - (m - 1).leading_zeros())
    }

    fn code(&self, field: &str, line: usize) -> Result<u32> {
        let field = field.trim();
        match &self.values {
            Some(values) => values
                .iter()
                .position(|v| v == field)
                .map(|p| p as u32)
                .ok_or_else(|| Error::parse(line, format!("unknown category {field:?}"))),
            None => {
                let m = self.categories()?;
                let v: usize = field
                    .parse()
                    .map_err(|_| Error::parse(line, format!("not an integer code: {field:?}")))?;
                if v >= m {
                    return Err(Error::parse(line, format!("code {v} outside cardinality {m}")));
                }
                Ok(v as u32)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSchema {
    pub columns: Vec<ColumnSchema>,
    /// Declared universe dimension; defaults to the total column bits.
    #[serde(default)]
    pub l: Option<u32>,
    /// Whether the first line is a header.
    #[serde(default)]
    pub header: bool,
}

impl CsvSchema {
    /// Bit offset and width of each column.
    pub fn layout(&self) -> Result<Vec<(u32, u32)>> {
        if self.columns.is_empty() {
            return Err(Error::Config("schema has no columns".into()));
        }
        let mut offset = 0u32;
        let mut out = Vec::with_capacity(self.columns.len());
        for c in &self.columns {
            let bits = c.bits()?;
            out.push((offset, bits));
            offset += bits;
        }
        Ok(out)
    }

    pub fn universe(&self) -> Result<DataUniverse> {
        let total: u32 = self.layout()?.iter().map(|(_, b)| b).sum();
        let l = match self.l {
            Some(l) if l < total => {
                return Err(Error::Config(format!(
                    "columns need {total} bits but the schema declares l = {l}"
                )))
            }
            Some(l) => l,
            None => total.max(1),
        };
        if l > MAX_BITS {
            return Err(Error::Config(format!("columns need l = {l} > {MAX_BITS} bits")));
        }
        DataUniverse::new(l)
    }
}

pub fn ingest_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Database> {
    ingest_reader(File::open(path)?, schema)
}

pub fn ingest_reader<R: Read>(reader: R, schema: &CsvSchema) -> Result<Database> {
    let layout = schema.layout()?;
    let universe = schema.universe()?;
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut rows = Vec::new();
    let mut saw_header = false;
    for (idx, record) in csv.records().enumerate() {
        let line = idx + 1;
        let record = record.map_err(|e| Error::parse(line, e.to_string()))?;
        if idx == 0 && schema.header {
            saw_header = true;
            continue;
        }
        if record.len() == 1 && record.get(0).is_none_or(|f| f.trim().is_empty()) {
            continue;
        }
        if record.len() != schema.columns.len() {
            return Err(Error::parse(
                line,
                format!("expected {} fields, found {}", schema.columns.len(), record.len()),
            ));
        }
        let mut code = 0u32;
        for ((column, &(offset, _)), field) in schema.columns.iter().zip(&layout).zip(record.iter()) {
            code |= column.code(field, line)? << offset;
        }
        rows.push(code);
    }
    if rows.is_empty() {
        let msg = if saw_header { "file has a header but no data rows" } else { "file is empty" };
        return Err(Error::parse(0, msg));
    }
    Database::new(universe, rows)
}

const DATABASE_MAGIC: &str = "# dpsynth database";

/// Text form of a database: a header line `# dpsynth database l=<l> n=<n>`
/// followed by one row code per line.
pub fn write_database<W: Write>(mut w: W, x: &Database) -> Result<()> {
    writeln!(w, "{DATABASE_MAGIC} l={} n={}", x.universe().bits(), x.len())?;
    for r in x.rows() {
        writeln!(w, "{r}")?;
    }
    Ok(())
}

pub fn read_database<R: Read>(reader: R) -> Result<Database> {
    let mut lines = BufReader::new(reader).lines();
    let header = lines.next().ok_or_else(|| Error::parse(1, "empty database file"))??;
    let rest = header
        .strip_prefix(DATABASE_MAGIC)
        .ok_or_else(|| Error::parse(1, format!("expected header `{DATABASE_MAGIC} l=<l> n=<n>`")))?;
    let mut l = None;
    let mut n = None;
    for tok in rest.split_whitespace() {
        let (key, value) = tok
            .split_once('=')
            .ok_or_else(|| Error::parse(1, format!("malformed header field {tok:?}")))?;
        let parsed: usize = value
            .parse()
            .map_err(|_| Error::parse(1, format!("malformed header value {tok:?}")))?;
        match key {
            "l" => l = Some(parsed),
            "n" => n = Some(parsed),
            _ => return Err(Error::parse(1, format!("unknown header field {key:?}"))),
        }
    }
    let (l, n) = match (l, n) {
        (Some(l), Some(n)) => (l, n),
        _ => return Err(Error::parse(1, "header must give l and n")),
    };
    let universe = DataUniverse::new(l as u32).map_err(|e| Error::parse(1, e.to_string()))?;
    let mut rows = Vec::with_capacity(n);
    for (idx, line) in lines.enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let v: u32 = t
            .parse()
            .map_err(|_| Error::parse(idx + 2, format!("not a row code: {t:?}")))?;
        if !universe.contains(v) {
            return Err(Error::parse(idx + 2, format!("row code {v} outside l = {l}")));
        }
        rows.push(v);
    }
    if rows.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "header says n = {n} but the file has {} rows",
            rows.len()
        )));
    }
    Database::new(universe, rows)
}
