//! Result tables rendered as CSV and aligned plain text.

use serde::Serialize;

pub fn stars(p: f64) -> &'static str {
    if !p.is_finite() {
        ""
    } else if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.1 {
        "*"
    } else {
        ""
    }
}

pub fn coef_cell(value: f64, p: f64) -> String {
    format!("{value:.4}{}", stars(p))
}

pub fn se_cell(se: f64) -> String {
    if se.is_finite() {
        format!("({se:.4})")
    } else {
        "(n/a)".to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<(String, Vec<String>)>,
    pub notes: Vec<String>,
}

impl Table {
    pub fn new(title: impl Into<String>, columns: Vec<String>) -> Self {
        Self { title: title.into(), columns, rows: Vec::new(), notes: Vec::new() }
    }

    pub fn row(&mut self, label: impl Into<String>, cells: Vec<String>) {
        self.rows.push((label.into(), cells));
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    pub fn cell(&self, label: &str, column: usize) -> Option<&str> {
        self.rows.iter().find(|(l, _)| l == label).and_then(|(_, c)| c.get(column)).map(String::as_str)
    }

    /// Header `variable,<columns...>`, one record per row; notes are not included.
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let mut header = vec!["variable".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header).expect("in-memory write");
        for (label, cells) in &self.rows {
            let mut rec = vec![label.clone()];
            rec.extend(cells.iter().cloned());
            rec.resize(header.len(), String::new());
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }

    pub fn to_text(&self) -> String {
        let ncols = self.columns.len();
        let mut label_w = self.rows.iter().map(|(l, _)| l.chars().count()).max().unwrap_or(0);
        label_w = label_w.max(8);
        let mut col_w: Vec<usize> = self.columns.iter().map(|c| c.chars().count()).collect();
        for (_, cells) in &self.rows {
            for (j, c) in cells.iter().enumerate().take(ncols) {
                col_w[j] = col_w[j].max(c.chars().count());
            }
        }
        let total = label_w + col_w.iter().map(|w| w + 2).sum::<usize>();
        let rule = "-".repeat(total);
        let mut out = String::new();
        out.push_str(&self.title);
        out.push('\n');
        out.push_str(&rule);
        out.push('\n');
        out.push_str(&format!("{:label_w$}", ""));
        for (c, w) in self.columns.iter().zip(&col_w) {
            out.push_str(&format!("  {c:>w$}"));
        }
        out.push('\n');
        out.push_str(&rule);
        out.push('\n');
        for (label, cells) in &self.rows {
            out.push_str(&format!("{label:label_w$}"));
            for (j, w) in col_w.iter().enumerate() {
                let c = cells.get(j).map(String::as_str).unwrap_or("");
                out.push_str(&format!("  {c:>w$}"));
            }
            out.push('\n');
        }
        out.push_str(&rule);
        out.push('\n');
        for n in &self.notes {
            out.push_str(n);
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn star_thresholds() {
        assert_eq!(stars(0.009), "***");
        assert_eq!(stars(0.01), "**");
        assert_eq!(stars(0.049), "**");
        assert_eq!(stars(0.05), "*");
        assert_eq!(stars(0.099), "*");
        assert_eq!(stars(0.1), "");
        assert_eq!(stars(f64::NAN), "");
        assert_eq!(coef_cell(-0.44221, 0.001), "-0.4422***");
    }

    #[test]
    fn renders_csv_and_text() {
        let mut t = Table::new("Example", vec!["(1)".into(), "(2)".into()]);
        t.row("round", vec![coef_cell(-0.02, 0.001), coef_cell(-0.01, 0.2)]);
        t.row("", vec![se_cell(0.005), se_cell(f64::NAN)]);
        t.note("N = 10");
        let csv = t.to_csv();
        assert_eq!(csv.lines().next().unwrap(), "variable,(1),(2)");
        assert!(csv.contains("round,-0.0200***,-0.0100\n"));
        let text = t.to_text();
        assert!(text.starts_with("Example\n"));
        assert!(text.contains("(n/a)"));
        assert!(text.ends_with("N = 10\n"));
        assert_eq!(t.cell("round", 1), Some("-0.0100"));
    }
}
