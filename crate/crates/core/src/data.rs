//! Monthly commodity series: CSV loading, validation and export.
//!
//! Schema (header must match exactly):
//! `month,breeding_herd,production_kg,imports_kg,exports_kg,price_p_per_kg`.
//! Months are `YYYY-MM`, unique and contiguous; empty cells are missing.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HEADER: [&str; 6] = ["month", "breeding_herd", "production_kg", "imports_kg", "exports_kg", "price_p_per_kg"];

const PRICE_RANGE: (f64, f64) = (50.0, 300.0);
const HERD_RANGE: (f64, f64) = (1e5, 1e6);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct YearMonth {
    pub year: i32,
    /// 1 to 12.
    pub month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::Usage(format!("month {month} outside 1..=12")));
        }
        Ok(Self { year, month })
    }

    fn ordinal(self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    pub fn offset(self, months: usize) -> Self {
        let o = self.ordinal() + months as i64;
        Self { year: o.div_euclid(12) as i32, month: (o.rem_euclid(12) + 1) as u32 }
    }

    /// Months from `earlier` to `self`.
    pub fn months_since(self, earlier: Self) -> i64 {
        self.ordinal() - earlier.ordinal()
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let bad = || format!("'{s}' is not a YYYY-MM month");
        let (y, m) = s.split_once('-').ok_or_else(bad)?;
        if y.len() != 4 || m.len() != 2 || !y.bytes().chain(m.bytes()).all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let year: i32 = y.parse().map_err(|_| bad())?;
        let month: u32 = m.parse().map_err(|_| bad())?;
        Self::new(year, month).map_err(|_| bad())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    Herd,
    NewSupplies,
    Price,
    Production,
    Imports,
    Exports,
}

impl SeriesKind {
    pub const ALL: [Self; 6] = [Self::Herd, Self::NewSupplies, Self::Price, Self::Production, Self::Imports, Self::Exports];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Herd => "herd",
            Self::NewSupplies => "new_supplies",
            Self::Price => "price",
            Self::Production => "production",
            Self::Imports => "imports",
            Self::Exports => "exports",
        }
    }
}

impl fmt::Display for SeriesKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SeriesKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Usage(format!("unknown series '{s}'")))
    }
}

/// Monthly observations indexed from `start`. Each series has one cell per
/// month; `None` marks a missing cell. New supplies are derived as
/// production + imports - exports where all three are present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    start: YearMonth,
    herd: Vec<Option<f64>>,
    production: Vec<Option<f64>>,
    imports: Vec<Option<f64>>,
    exports: Vec<Option<f64>>,
    price: Vec<Option<f64>>,
    new_supplies: Vec<Option<f64>>,
}

impl Dataset {
    pub fn new(
        start: YearMonth,
        herd: Vec<Option<f64>>,
        production: Vec<Option<f64>>,
        imports: Vec<Option<f64>>,
        exports: Vec<Option<f64>>,
        price: Vec<Option<f64>>,
    ) -> Result<Self> {
        let n = herd.len();
        if [&production, &imports, &exports, &price].iter().any(|s| s.len() != n) {
            return Err(Error::InvalidData("all series must cover the same months".into()));
        }
        let new_supplies = (0..n)
            .map(|i| match (production[i], imports[i], exports[i]) {
                (Some(p), Some(im), Some(ex)) => Some(p + im - ex),
                _ => None,
            })
            .collect();
        Ok(Self { start, herd, production, imports, exports, price, new_supplies })
    }

    pub fn start(&self) -> YearMonth {
        self.start
    }

    pub fn len(&self) -> usize {
        self.herd.len()
    }

    pub fn is_empty(&self) -> bool {
        self.herd.is_empty()
    }

    pub fn month(&self, index: usize) -> YearMonth {
        self.start.offset(index)
    }

    pub fn series(&self, kind: SeriesKind) -> &[Option<f64>] {
        match kind {
            SeriesKind::Herd => &self.herd,
            SeriesKind::NewSupplies => &self.new_supplies,
            SeriesKind::Price => &self.price,
            SeriesKind::Production => &self.production,
            SeriesKind::Imports => &self.imports,
            SeriesKind::Exports => &self.exports,
        }
    }

    pub fn observed_count(&self, kind: SeriesKind) -> usize {
        self.series(kind).iter().flatten().count()
    }

    pub fn total_observed(&self) -> usize {
        SeriesKind::ALL.iter().map(|k| self.observed_count(*k)).sum()
    }

    /// Series with at least one observation, in [`SeriesKind::ALL`] order.
    pub fn observed_series(&self) -> Vec<SeriesKind> {
        SeriesKind::ALL.into_iter().filter(|k| self.observed_count(*k) > 0).collect()
    }

    /// Copy with every cell of `kind` marked missing. Only that series
    /// changes; derived new supplies are kept as they were.
    pub fn without(&self, kind: SeriesKind) -> Self {
        let mut out = self.clone();
        let blank = vec![None; self.len()];
        match kind {
            SeriesKind::Herd => out.herd = blank,
            SeriesKind::Price => out.price = blank,
            SeriesKind::NewSupplies => out.new_supplies = blank,
            SeriesKind::Production => out.production = blank,
            SeriesKind::Imports => out.imports = blank,
            SeriesKind::Exports => out.exports = blank,
        }
        out
    }
}

fn parse_cell(raw: &str, row: usize, column: &str) -> Result<Option<f64>> {
    let cell = raw.trim();
    if cell.is_empty() {
        return Ok(None);
    }
    let load_err = |message: String| Error::Load { row, column: column.to_string(), message };
    let value: f64 = cell.parse().map_err(|_| load_err(format!("'{cell}' is not a number")))?;
    if !value.is_finite() {
        return Err(load_err(format!("'{cell}' is not finite")));
    }
    if value < 0.0 {
        return Err(load_err(format!("negative value {value}")));
    }
    Ok(Some(value))
}

/// Reads a dataset from CSV text. Rows may appear in any order; they are
/// sorted by month and must then be contiguous. Row numbers in errors count
/// the header as row 1.
pub fn read_csv<R: Read>(input: R) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(input);
    let mut records = reader.records();
    let header = match records.next() {
        Some(h) => h?,
        None => {
            return Err(Error::Load { row: 1, column: "header".into(), message: "file is empty".into() });
        }
    };
    let got: Vec<&str> = header.iter().map(str::trim).collect();
    if got != HEADER {
        return Err(Error::Load {
            row: 1,
            column: "header".into(),
            message: format!("expected '{}', found '{}'", HEADER.join(","), got.join(",")),
        });
    }

    let mut rows: Vec<(YearMonth, usize, [Option<f64>; 5])> = Vec::new();
    for (i, rec) in records.enumerate() {
        let row = i + 2;
        let rec = rec?;
        if rec.len() != HEADER.len() {
            return Err(Error::Load {
                row,
                column: "row".into(),
                message: format!("expected {} fields, found {}", HEADER.len(), rec.len()),
            });
        }
        let month: YearMonth = rec[0]
            .trim()
            .parse()
            .map_err(|message| Error::Load { row, column: HEADER[0].into(), message })?;
        let mut values = [None; 5];
        for (j, v) in values.iter_mut().enumerate() {
            *v = parse_cell(&rec[j + 1], row, HEADER[j + 1])?;
        }
        rows.push((month, row, values));
    }
    rows.sort_by_key(|r| r.0);
    for pair in rows.windows(2) {
        let (prev, next) = (&pair[0], &pair[1]);
        let step = next.0.months_since(prev.0);
        if step == 0 {
            return Err(Error::Load {
                row: next.1.max(prev.1),
                column: HEADER[0].into(),
                message: format!("duplicate month {}", next.0),
            });
        }
        if step != 1 {
            return Err(Error::Load {
                row: next.1,
                column: HEADER[0].into(),
                message: format!("months not contiguous: {} follows {}", next.0, prev.0),
            });
        }
    }

    let start = rows.first().map(|r| r.0).unwrap_or(YearMonth { year: 2015, month: 1 });
    let column = |j: usize| rows.iter().map(|r| r.2[j]).collect::<Vec<_>>();
    Dataset::new(start, column(0), column(1), column(2), column(3), column(4))
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    read_csv(std::fs::File::open(path)?)
}

/// Writes the raw schema columns; [`read_csv`] restores an equal dataset.
pub fn write_csv<W: Write>(data: &Dataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for i in 0..data.len() {
        w.write_record([
            data.month(i).to_string(),
            cell(data.herd[i]),
            cell(data.production[i]),
            cell(data.imports[i]),
            cell(data.exports[i]),
            cell(data.price[i]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Info,
    Warning,
    Fatal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub severity: Severity,
    pub series: Option<SeriesKind>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesReport {
    pub series: SeriesKind,
    pub observed: usize,
    pub missing: usize,
    /// Runs of missing months as inclusive `(first, last)` indices.
    pub gaps: Vec<(usize, usize)>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    /// Every observed value is strictly positive.
    pub positive: bool,
    pub non_positive_months: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub start: YearMonth,
    pub months: usize,
    pub series: Vec<SeriesReport>,
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_fatal(&self) -> bool {
        self.findings.iter().any(|f| f.severity == Severity::Fatal)
    }
}

fn gaps(cells: &[Option<f64>]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut open = None;
    for (i, c) in cells.iter().enumerate() {
        match (c, open) {
            (None, None) => open = Some(i),
            (Some(_), Some(s)) => {
                out.push((s, i - 1));
                open = None;
            }
            _ => {}
        }
    }
    if let Some(s) = open {
        out.push((s, cells.len() - 1));
    }
    out
}

fn only_survey_months(data: &Dataset, cells: &[Option<f64>]) -> bool {
    cells
        .iter()
        .enumerate()
        .filter(|(_, c)| c.is_some())
        .all(|(i, _)| matches!(data.month(i).month, 6 | 12))
}

pub fn validate(data: &Dataset) -> ValidationReport {
    let mut findings = Vec::new();
    let mut series = Vec::new();
    for kind in SeriesKind::ALL {
        let cells = data.series(kind);
        let observed: Vec<f64> = cells.iter().flatten().copied().collect();
        let non_positive_months: Vec<usize> = cells
            .iter()
            .enumerate()
            .filter(|(_, c)| c.is_some_and(|v| v <= 0.0))
            .map(|(i, _)| i)
            .collect();
        let report = SeriesReport {
            series: kind,
            observed: observed.len(),
            missing: cells.len() - observed.len(),
            gaps: gaps(cells),
            min: observed.iter().copied().reduce(f64::min),
            max: observed.iter().copied().reduce(f64::max),
            positive: non_positive_months.is_empty(),
            non_positive_months,
        };

        if !report.positive {
            findings.push(Finding {
                severity: Severity::Warning,
                series: Some(kind),
                message: format!(
                    "non-positive values at months {:?}; these cells violate the lognormal support",
                    report.non_positive_months
                ),
            });
        }
        if report.observed > 0 && !report.gaps.is_empty() {
            let survey = kind == SeriesKind::Herd && only_survey_months(data, cells);
            findings.push(Finding {
                severity: Severity::Info,
                series: Some(kind),
                message: if survey {
                    "observed only in June and December survey months".to_string()
                } else {
                    format!("{} missing months in {} gaps", report.missing, report.gaps.len())
                },
            });
        }
        let range = match kind {
            SeriesKind::Price => Some(PRICE_RANGE),
            SeriesKind::Herd => Some(HERD_RANGE),
            _ => None,
        };
        if let Some((lo, hi)) = range {
            let outside = observed.iter().filter(|v| **v < lo || **v > hi).count();
            if outside > 0 {
                findings.push(Finding {
                    severity: Severity::Warning,
                    series: Some(kind),
                    message: format!("{outside} values outside the plausible range [{lo}, {hi}]; check units"),
                });
            }
        }
        series.push(report);
    }
    if data.total_observed() == 0 {
        findings.push(Finding { severity: Severity::Fatal, series: None, message: "no observed series".into() });
    }
    ValidationReport { start: data.start(), months: data.len(), series, findings }
}

const UK_SNAPSHOT: &str = include_str!("../data/uk_pork_2015_2019.csv");

/// Bundled 2015-01 to 2019-12 snapshot in the documented schema. See the
/// README for how it was produced.
pub fn bundled_uk_snapshot() -> Dataset {
    read_csv(UK_SNAPSHOT.as_bytes()).expect("bundled snapshot is valid")
}
