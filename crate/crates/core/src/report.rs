//! Convergence-study tables and their CSV / markdown rendering.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("row has {got} values, report has {expected} columns")]
    RowWidth { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyKind {
    Spatial,
    Temporal,
    Projection,
    Acoustic,
}

impl StudyKind {
    pub fn name(&self) -> &'static str {
        match self {
            StudyKind::Spatial => "spatial",
            StudyKind::Temporal => "temporal",
            StudyKind::Projection => "projection",
            StudyKind::Acoustic => "acoustic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

impl TableFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            TableFormat::Csv => "csv",
            TableFormat::Markdown => "md",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    /// Inverse step, e.g. `h^-1` or `k^-1`.
    pub resolution: usize,
    pub step: f64,
    pub values: Vec<f64>,
}

/// Per-resolution values with pairwise rates `log(E1/E2) / log(h1/h2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyReport {
    pub kind: StudyKind,
    pub resolution_label: String,
    pub columns: Vec<String>,
    rows: Vec<StudyRow>,
    /// Values at or below this are treated as exact; rates involving them
    /// are reported as saturated.
    pub saturation: f64,
    pub metadata: Vec<(String, String)>,
    pub notes: Vec<String>,
}

pub fn pairwise_rate(e1: f64, e2: f64, h1: f64, h2: f64) -> f64 {
    (e1 / e2).ln() / (h1 / h2).ln()
}

/// Least-squares slope of `log e` against `log h`.
pub fn least_squares_slope(h: &[f64], e: &[f64]) -> Option<f64> {
    if h.len() < 2 || h.len() != e.len() {
        return None;
    }
    let xs: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// `3.5162(-2)` style, 5 significant digits.
pub fn format_paper(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let s = format!("{x:.4e}");
    let (mant, exp) = s.split_once('e').expect("exponent form");
    format!("{mant}({exp})")
}

impl StudyReport {
    pub fn new(kind: StudyKind, resolution_label: impl Into<String>, columns: Vec<String>) -> Self {
        Self {
            kind,
            resolution_label: resolution_label.into(),
            columns,
            rows: Vec::new(),
            saturation: 1e-11,
            metadata: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn with_meta(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.push_meta(key, value);
        self
    }

    pub fn push_meta(&mut self, key: impl Into<String>, value: impl ToString) {
        self.metadata.push((key.into(), value.to_string()));
    }

    /// Inserts a row keeping rows sorted by resolution (coarse first).
    pub fn push_row(&mut self, row: StudyRow) -> Result<(), ReportError> {
        if row.values.len() != self.columns.len() {
            return Err(ReportError::RowWidth {
                expected: self.columns.len(),
                got: row.values.len(),
            });
        }
        let pos = self.rows.partition_point(|r| r.resolution <= row.resolution);
        self.rows.insert(pos, row);
        Ok(())
    }

    pub fn rows(&self) -> &[StudyRow] {
        &self.rows
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.values[col]).collect()
    }

    /// Rate between rows `i` and `i+1`; `None` when saturated.
    pub fn rates(&self, col: usize) -> Vec<Option<f64>> {
        self.rows
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0].values[col], w[1].values[col]);
                if a <= self.saturation || b <= self.saturation {
                    None
                } else {
                    Some(pairwise_rate(a, b, w[0].step, w[1].step))
                }
            })
            .collect()
    }

    /// Least-squares slope over all rows, `None` if any value is saturated.
    pub fn slope(&self, col: usize) -> Option<f64> {
        let e = self.column(col);
        if e.iter().any(|&v| v <= self.saturation) {
            return None;
        }
        let h: Vec<f64> = self.rows.iter().map(|r| r.step).collect();
        least_squares_slope(&h, &e)
    }

    pub fn is_saturated(&self, col: usize) -> bool {
        self.column(col).iter().all(|&v| v <= self.saturation)
    }

    fn header_lines(&self, prefix: &str, suffix: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{prefix}study = {}{suffix}", self.kind.name());
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "{prefix}{k} = {v}{suffix}");
        }
        for n in &self.notes {
            let _ = writeln!(out, "{prefix}note: {n}{suffix}");
        }
        out
    }

    fn footer_lines(&self, prefix: &str, suffix: &str, fmt: impl Fn(f64) -> String) -> String {
        let mut out = String::new();
        if self.rows.len() < 2 {
            return out;
        }
        for (c, name) in self.columns.iter().enumerate() {
            let s = self.slope(c).map_or_else(|| "saturated".to_string(), &fmt);
            let _ = writeln!(out, "{prefix}slope {name} = {s}{suffix}");
        }
        out
    }

    pub fn to_csv(&self) -> Result<String, ReportError> {
        let mut out = self.header_lines("# ", "");
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![self.resolution_label.clone(), "step".to_string()];
        for c in &self.columns {
            header.push(c.clone());
            header.push(format!("rate {c}"));
        }
        w.write_record(&header)?;
        let rates: Vec<Vec<Option<f64>>> = (0..self.columns.len()).map(|c| self.rates(c)).collect();
        for (i, row) in self.rows.iter().enumerate() {
            let mut rec = vec![row.resolution.to_string(), format!("{:e}", row.step)];
            for (c, v) in row.values.iter().enumerate() {
                rec.push(format!("{v:e}"));
                rec.push(match i.checked_sub(1).map(|j| rates[c][j]) {
                    Some(Some(r)) => format!("{r:e}"),
                    Some(None) => "saturated".to_string(),
                    None => String::new(),
                });
            }
            w.write_record(&rec)?;
        }
        let body = w.into_inner().map_err(|e| ReportError::Io {
            path: PathBuf::from("<memory>"),
            source: e.into_error(),
        })?;
        out.push_str(&String::from_utf8(body).expect("csv output is utf-8"));
        out.push_str(&self.footer_lines("# ", "", |v| format!("{v:e}")));
        Ok(out)
    }

    pub fn to_markdown(&self) -> String {
        let mut out = self.header_lines("<!-- ", " -->");
        out.push('\n');
        let mut header = format!("| {} |", self.resolution_label);
        let mut rule = String::from("|---|");
        for c in &self.columns {
            let _ = write!(header, " {c} | Rate |");
            rule.push_str("---|---|");
        }
        let _ = writeln!(out, "{header}\n{rule}");
        let rates: Vec<Vec<Option<f64>>> = (0..self.columns.len()).map(|c| self.rates(c)).collect();
        for (i, row) in self.rows.iter().enumerate() {
            let _ = write!(out, "| {} |", row.resolution);
            for (c, v) in row.values.iter().enumerate() {
                let rate = match i.checked_sub(1).map(|j| rates[c][j]) {
                    Some(Some(r)) => format!("{r:.2}"),
                    Some(None) => "sat.".to_string(),
                    None => "-".to_string(),
                };
                let _ = write!(out, " {} | {} |", format_paper(*v), rate);
            }
            out.push('\n');
        }
        let footer = self.footer_lines("", "", |v| format!("{v:.2}"));
        if !footer.is_empty() {
            out.push('\n');
            for line in footer.lines() {
                let _ = writeln!(out, "- {line}");
            }
        }
        out
    }

    pub fn render(&self, format: TableFormat) -> Result<String, ReportError> {
        match format {
            TableFormat::Csv => self.to_csv(),
            TableFormat::Markdown => Ok(self.to_markdown()),
        }
    }

    /// Writes `<dir>/<stem>.<ext>`, creating `dir` if needed.
    pub fn emit(&self, dir: &Path, stem: &str, format: TableFormat) -> Result<PathBuf, ReportError> {
        let path = dir.join(format!("{stem}.{}", format.extension()));
        let io = |source| ReportError::Io {
            path: path.clone(),
            source,
        };
        std::fs::create_dir_all(dir).map_err(io)?;
        std::fs::write(&path, self.render(format)?).map_err(io)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> StudyReport {
        let mut r = StudyReport::new(StudyKind::Spatial, "h^-1", vec!["E(1)".into()]).with_meta("delta", 0.0);
        for (n, e) in [(20, 1.0e-2), (10, 4.0e-2), (40, 2.5e-3)] {
            r.push_row(StudyRow {
                resolution: n,
                step: 1.0 / n as f64,
                values: vec![e],
            })
            .unwrap();
        }
        r
    }

    #[test]
    fn paper_number_format() {
        assert_eq!(format_paper(3.51623e-2), "3.5162(-2)");
        assert_eq!(format_paper(1.0), "1.0000(0)");
        assert_eq!(format_paper(7.18394e-1), "7.1839(-1)");
    }

    #[test]
    fn rows_sorted_and_rates_pairwise() {
        let r = table();
        let res: Vec<usize> = r.rows().iter().map(|x| x.resolution).collect();
        assert_eq!(res, vec![10, 20, 40]);
        for rate in r.rates(0) {
            assert!((rate.unwrap() - 2.0).abs() < 1e-12);
        }
        assert!((r.slope(0).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn saturated_values_have_no_rate() {
        let mut r = StudyReport::new(StudyKind::Projection, "h^-1", vec!["L2".into()]);
        for n in [2, 4] {
            r.push_row(StudyRow { resolution: n, step: 0.5 / n as f64, values: vec![1e-15] }).unwrap();
        }
        assert_eq!(r.rates(0), vec![None]);
        assert!(r.is_saturated(0) && r.slope(0).is_none());
        assert!(r.to_markdown().contains("sat."));
    }

    #[test]
    fn empty_report_is_header_only() {
        let r = StudyReport::new(StudyKind::Temporal, "k^-1", vec!["E*(1)".into()]);
        let csv = r.to_csv().unwrap();
        let data: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data, vec!["k^-1,step,E*(1),rate E*(1)"]);
        let md = r.to_markdown();
        assert_eq!(md.lines().filter(|l| l.starts_with('|')).count(), 2);
    }

    #[test]
    fn csv_and_markdown_agree() {
        let r = table();
        let csv = r.to_csv().unwrap();
        let md = r.to_markdown();
        let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(csv.as_bytes());
        let csv_vals: Vec<f64> = rd.records().map(|rec| rec.unwrap()[2].parse().unwrap()).collect();
        let md_vals: Vec<String> = md
            .lines()
            .filter(|l| l.starts_with("| ") && !l.contains("h^-1"))
            .map(|l| l.split('|').nth(2).unwrap().trim().to_string())
            .collect();
        assert_eq!(csv_vals.len(), md_vals.len());
        for (v, s) in csv_vals.iter().zip(&md_vals) {
            assert_eq!(&format_paper(*v), s);
        }
    }

    #[test]
    fn rendering_is_deterministic() {
        assert_eq!(table().to_csv().unwrap(), table().to_csv().unwrap());
        assert_eq!(table().to_markdown(), table().to_markdown());
    }

    #[test]
    fn emit_writes_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = table().emit(dir.path(), "t", TableFormat::Markdown).unwrap();
        assert!(std::fs::read_to_string(p).unwrap().contains("4.0000(-2)"));
    }
}
