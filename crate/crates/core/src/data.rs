//! Validation datasets and every file format the simulator reads or writes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ActiveCellTable, StateVector};
use crate::stats::Comparison;
use crate::trajectory::Trajectory;

pub const ACTIVE_TABLE_HEADER: &str = "age_years,active_per_mm3";
pub const TRAJECTORY_HEADER: &str = "t_years,naive_thymus,naive_prolif,memory,total_naive";
pub const REPLICATE_HEADER: &str = "replicate,t_years,naive_thymus,naive_prolif,memory,total_naive";
pub const DATASET_HEADER: &str = "age_low,age_high,mean_log10_trec,n_individuals";
pub const REPORT_HEADER: &str = "scenario,quantity,u_statistic,p_value,method,rms,max_abs";

/// The shipped stand-in for the activated CD4 lookup table.
pub const PLACEHOLDER_ACTIVE_CSV: &str = include_str!("../data/active_cells_placeholder.csv");

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrecRow {
    pub age_low: f64,
    pub age_high: f64,
    /// Mean log10 TREC per 10⁶ PBMC.
    pub mean_log10_trec: f64,
    pub n_individuals: u32,
}

impl TrecRow {
    pub fn midpoint(&self) -> f64 {
        (self.age_low + self.age_high) / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrecDataset {
    pub source: String,
    pub rows: Vec<TrecRow>,
}

impl TrecDataset {
    pub fn new(source: impl Into<String>, rows: Vec<TrecRow>) -> Result<Self> {
        for (i, r) in rows.iter().enumerate() {
            if r.n_individuals == 0 {
                return Err(Error::invalid(format!("row {i}: no individuals")));
            }
            if r.age_high < r.age_low {
                return Err(Error::invalid(format!("row {i}: inverted age range")));
            }
            if i > 0 && r.age_low <= rows[i - 1].age_high {
                return Err(Error::invalid(format!("row {i}: age ranges overlap or are out of order")));
            }
        }
        Ok(TrecDataset {
            source: source.into(),
            rows,
        })
    }
}

/// Dataset selector accepted by the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetId {
    Murray,
    Lorenzi,
}

impl std::str::FromStr for DatasetId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "murray" => Ok(DatasetId::Murray),
            "lorenzi" => Ok(DatasetId::Lorenzi),
            other => Err(Error::invalid(format!(
                "unknown dataset '{other}'; expected murray or lorenzi"
            ))),
        }
    }
}

const AGE_RANGES: [(f64, f64); 12] = [
    (0.0, 0.0),
    (1.0, 4.0),
    (5.0, 9.0),
    (10.0, 14.0),
    (15.0, 19.0),
    (20.0, 24.0),
    (25.0, 29.0),
    (30.0, 34.0),
    (35.0, 39.0),
    (40.0, 44.0),
    (45.0, 49.0),
    (50.0, 54.0),
];

const MURRAY: [(f64, u32); 12] = [
    (5.03, 48),
    (4.93, 53),
    (4.86, 19),
    (4.86, 19),
    (4.56, 33),
    (3.88, 26),
    (3.75, 47),
    (3.61, 65),
    (3.54, 73),
    (3.52, 52),
    (3.37, 55),
    (3.17, 16),
];

const LORENZI: [(f64, u32); 12] = [
    (4.85, 2),
    (5.29, 30),
    (5.05, 33),
    (4.99, 15),
    (4.56, 5),
    (4.55, 12),
    (4.55, 9),
    (4.44, 20),
    (4.23, 15),
    (4.16, 9),
    (3.82, 16),
    (4.21, 21),
];

fn table(source: &str, values: &[(f64, u32); 12]) -> TrecDataset {
    let rows = AGE_RANGES
        .iter()
        .zip(values)
        .map(|(&(age_low, age_high), &(mean_log10_trec, n_individuals))| TrecRow {
            age_low,
            age_high,
            mean_log10_trec,
            n_individuals,
        })
        .collect();
    TrecDataset::new(source, rows).expect("built-in dataset is valid")
}

/// The two published TREC validation tables: Murray/Cossarizza, then Lorenzi.
pub fn builtin_datasets() -> (TrecDataset, TrecDataset) {
    (
        table("Murray et al. 2003; Cossarizza et al. 1996", &MURRAY),
        table("Lorenzi et al. 2008", &LORENZI),
    )
}

pub fn builtin_dataset(id: DatasetId) -> TrecDataset {
    let (murray, lorenzi) = builtin_datasets();
    match id {
        DatasetId::Murray => murray,
        DatasetId::Lorenzi => lorenzi,
    }
}

/// `(age midpoint, percent of the age-0 value)` after undoing the log10.
pub fn to_percentage(dataset: &TrecDataset) -> Result<Vec<(f64, f64)>> {
    let baseline = dataset
        .rows
        .iter()
        .find(|r| r.age_low == 0.0 && r.age_high == 0.0)
        .ok_or_else(|| Error::invalid(format!("dataset '{}' has no age-0 row", dataset.source)))?
        .mean_log10_trec;
    Ok(dataset
        .rows
        .iter()
        .map(|r| (r.midpoint(), 100.0 * 10f64.powf(r.mean_log10_trec - baseline)))
        .collect())
}

pub fn format_dataset(dataset: &TrecDataset) -> String {
    let mut out = format!("# source: {}\n{DATASET_HEADER}\n", dataset.source);
    for r in &dataset.rows {
        writeln!(out, "{},{},{},{}", r.age_low, r.age_high, r.mean_log10_trec, r.n_individuals).unwrap();
    }
    out
}

pub fn parse_dataset(text: &str) -> Result<TrecDataset> {
    let source = text
        .lines()
        .find_map(|l| l.strip_prefix("# source:"))
        .map(|s| s.trim().to_string())
        .unwrap_or_default();
    let rows = read_csv_rows(text, DATASET_HEADER, Path::new("<dataset>"))?
        .into_iter()
        .map(|(line, f)| {
            let num = |i: usize| parse_field(&f[i], line, Path::new("<dataset>"));
            Ok(TrecRow {
                age_low: num(0)?,
                age_high: num(1)?,
                mean_log10_trec: num(2)?,
                n_individuals: f[3].trim().parse().map_err(|e| Error::Load {
                    path: "<dataset>".into(),
                    line,
                    detail: format!("bad individual count '{}': {e}", f[3]),
                })?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    TrecDataset::new(source, rows)
}

/// CSV records after the header as `(line number, fields)`. Lines starting
/// with `#` are comments.
fn read_csv_rows(text: &str, header: &str, path: &Path) -> Result<Vec<(usize, Vec<String>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let expected: Vec<&str> = header.split(',').collect();
    let found = reader.headers().map_err(|e| Error::Load {
        path: path.into(),
        line: 1,
        detail: e.to_string(),
    })?;
    if found.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Load {
            path: path.into(),
            line: found.position().map_or(1, |p| p.line() as usize),
            detail: format!("expected header '{header}'"),
        });
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Load {
            path: path.into(),
            line: e.position().map_or(0, |p| p.line() as usize),
            detail: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        rows.push((line, rec.iter().map(str::to_string).collect()));
    }
    Ok(rows)
}

fn parse_field(s: &str, line: usize, path: &Path) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Load {
            path: path.into(),
            line,
            detail: format!("'{s}' is not a finite number"),
        })
}

/// Parses active-cell table text. A comment mentioning "placeholder" marks
/// the table as stand-in data.
pub fn parse_active_table(text: &str, path: &Path) -> Result<ActiveCellTable> {
    let placeholder = text
        .lines()
        .filter(|l| l.trim_start().starts_with('#'))
        .any(|l| l.to_ascii_lowercase().contains("placeholder"));
    let mut points: Vec<(f64, f64)> = Vec::new();
    for (line, f) in read_csv_rows(text, ACTIVE_TABLE_HEADER, path)? {
        let age = parse_field(&f[0], line, path)?;
        let count = parse_field(&f[1], line, path)?;
        let load_err = |detail: String| Error::Load {
            path: path.into(),
            line,
            detail,
        };
        if age < 0.0 {
            return Err(load_err(format!("negative age {age}")));
        }
        if count < 0.0 {
            return Err(load_err(format!("negative active count {count}")));
        }
        if let Some(&(prev, _)) = points.last() {
            if age <= prev {
                return Err(load_err(format!("age {age} does not increase on previous age {prev}")));
            }
        }
        points.push((age, count));
    }
    if points.is_empty() {
        return Err(Error::Load {
            path: path.into(),
            line: 0,
            detail: "table has no rows".into(),
        });
    }
    Ok(ActiveCellTable::new(points)?.with_placeholder(placeholder))
}

pub fn load_active_table(path: &Path) -> Result<ActiveCellTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_active_table(&text, path)
}

pub fn placeholder_active_table() -> ActiveCellTable {
    parse_active_table(PLACEHOLDER_ACTIVE_CSV, Path::new("<builtin placeholder>"))
        .expect("shipped placeholder table parses")
}

pub fn format_active_table(table: &ActiveCellTable) -> String {
    let mut out = String::new();
    if table.is_placeholder() {
        out.push_str("# placeholder data\n");
    }
    out.push_str(ACTIVE_TABLE_HEADER);
    out.push('\n');
    for (age, count) in table.points() {
        writeln!(out, "{age},{count}").unwrap();
    }
    out
}

fn state_row(out: &mut String, s: &StateVector) {
    // Display for f64 is the shortest exact representation, so files re-parse bit-for-bit
    writeln!(out, "{},{},{},{},{}", s.t, s.n, s.np, s.m, s.total_naive()).unwrap();
}

pub fn format_trajectory(traj: &Trajectory) -> String {
    let mut out = String::with_capacity(64 * traj.len());
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for s in traj.samples() {
        state_row(&mut out, s);
    }
    out
}

pub fn parse_trajectory(text: &str) -> Result<Trajectory> {
    let path = Path::new("<trajectory>");
    let samples = read_csv_rows(text, TRAJECTORY_HEADER, path)?
        .into_iter()
        .map(|(line, f)| {
            let v = |i: usize| parse_field(&f[i], line, path);
            Ok(StateVector::new(v(0)?, v(1)?, v(2)?, v(3)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Trajectory::from_samples(samples)
}

pub fn format_replicates(trajectories: &[Trajectory]) -> String {
    let mut out = String::new();
    out.push_str(REPLICATE_HEADER);
    out.push('\n');
    for (r, traj) in trajectories.iter().enumerate() {
        for s in traj.samples() {
            write!(out, "{r},").unwrap();
            state_row(&mut out, s);
        }
    }
    out
}

pub fn parse_replicates(text: &str) -> Result<Vec<Trajectory>> {
    let path = Path::new("<replicates>");
    let mut groups: Vec<Vec<StateVector>> = Vec::new();
    for (line, f) in read_csv_rows(text, REPLICATE_HEADER, path)? {
        let r: usize = f[0].parse().map_err(|_| Error::Load {
            path: path.into(),
            line,
            detail: format!("bad replicate index '{}'", f[0]),
        })?;
        if r > groups.len() {
            return Err(Error::Load {
                path: path.into(),
                line,
                detail: format!("replicate {r} appears before replicate {}", groups.len()),
            });
        }
        if r == groups.len() {
            groups.push(Vec::new());
        }
        let v = |i: usize| parse_field(&f[i], line, path);
        groups[r].push(StateVector::new(v(1)?, v(2)?, v(3)?, v(4)?));
    }
    groups.into_iter().map(Trajectory::from_samples).collect()
}

/// Comparison rows keyed by scenario id.
pub fn format_report_csv(rows: &[(u8, Comparison)]) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for (id, c) in rows {
        writeln!(
            out,
            "{id},{},{},{},{},{},{}",
            c.quantity.name(),
            c.rank_sum.u_statistic,
            c.rank_sum.p_value,
            c.rank_sum.method,
            c.rms,
            c.max_abs
        )
        .unwrap();
    }
    out
}

/// One parsed line of a comparison report CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub scenario: u8,
    pub quantity: String,
    pub u_statistic: f64,
    pub p_value: f64,
    pub method: String,
    pub rms: f64,
    pub max_abs: f64,
}

pub fn parse_report_csv(text: &str) -> Result<Vec<ReportRow>> {
    let path = Path::new("<report>");
    read_csv_rows(text, REPORT_HEADER, path)?
        .into_iter()
        .map(|(line, f)| {
            let v = |i: usize| parse_field(&f[i], line, path);
            Ok(ReportRow {
                scenario: f[0].parse().map_err(|_| Error::Load {
                    path: path.into(),
                    line,
                    detail: format!("bad scenario '{}'", f[0]),
                })?,
                quantity: f[1].clone(),
                u_statistic: v(2)?,
                p_value: v(3)?,
                method: f[4].clone(),
                rms: v(5)?,
                max_abs: v(6)?,
            })
        })
        .collect()
}

pub fn format_report_text(rows: &[(u8, Comparison)]) -> String {
    let mut out = String::from("Paradigm comparison: stock-and-flow vs agent-based mean (two-sided Wilcoxon rank-sum, annual samples)\n\n");
    writeln!(
        out,
        "{:>8}  {:<13} {:>10} {:>8} {:<7} {:>12} {:>12}  {}",
        "scenario", "quantity", "U", "p", "method", "rms", "max_abs", "verdict"
    )
    .unwrap();
    for (id, c) in rows {
        let verdict = if c.rank_sum.p_value > 0.05 {
            "not different at 5%"
        } else {
            "DIFFERENT at 5%"
        };
        writeln!(
            out,
            "{id:>8}  {:<13} {:>10.1} {:>8.4} {:<7} {:>12.3} {:>12.3}  {verdict}",
            c.quantity.name(),
            c.rank_sum.u_statistic,
            c.rank_sum.p_value,
            c.rank_sum.method.to_string(),
            c.rms,
            c.max_abs
        )
        .unwrap();
    }
    out
}

/// Ordered `key=value` run description.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets `key`, replacing an earlier value. Newlines in values are flattened.
    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        let value = value.to_string().replace(['\n', '\r'], " ");
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut m = Manifest::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Load {
                path: "<manifest>".into(),
                line: i + 1,
                detail: format!("expected key=value, got '{line}'"),
            })?;
            m.set(k.trim(), v);
        }
        Ok(m)
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}
