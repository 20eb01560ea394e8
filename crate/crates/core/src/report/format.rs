use std::fmt::Write as _;

use crate::{Error, Result};

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn fixed_sig(x: f64, sig: i32) -> String {
    let mag = x.abs().log10().floor() as i32;
    let decimals = (sig - 1 - mag).max(0) as usize;
    let s = format!("{x:.decimals$}");
    trim_zeros(&s).to_string()
}

fn scientific(x: f64, sig: usize) -> String {
    let s = format!("{:.*e}", sig - 1, x);
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
}

/// A p-value to 4 significant figures, in scientific notation below 1e-4.
/// `NaN` prints as `NA`.
pub fn format_p(p: f64) -> String {
    if p.is_nan() {
        "NA".into()
    } else if p == 0.0 {
        "0".into()
    } else if p < 1e-4 {
        scientific(p, 4)
    } else {
        fixed_sig(p, 4)
    }
}

/// As [`format_p`] with a trailing `*` when `p < alpha`.
pub fn format_p_star(p: f64, alpha: f64) -> String {
    let mut s = format_p(p);
    if p < alpha {
        s.push('*');
    }
    s
}

/// Any other table number: 7 significant figures, scientific outside [1e-4, 1e9).
pub fn format_num(x: f64) -> String {
    if x.is_nan() {
        "NA".into()
    } else if x.is_infinite() {
        if x > 0.0 { "Inf" } else { "-Inf" }.into()
    } else if x == 0.0 {
        "0".into()
    } else if x.abs() < 1e-4 || x.abs() >= 1e9 {
        scientific(x, 7)
    } else {
        fixed_sig(x, 7)
    }
}

/// A rectangular table of already formatted cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// File stem, e.g. `t4_proportions`.
    pub name: String,
    pub title: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, title: &str, header: &[&str]) -> Self {
        Table {
            name: name.into(),
            title: title.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len(), "row width in {}", self.name);
        self.rows.push(row);
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.header)?;
        for r in &self.rows {
            out.write_record(r)?;
        }
        out.flush().map_err(|e| Error::io(format!("{}.csv", self.name), e))
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    /// GitHub-flavoured Markdown with the title as a heading.
    pub fn to_markdown(&self) -> String {
        let esc = |s: &str| s.replace('|', "\\|");
        let mut md = String::new();
        let _ = writeln!(md, "### {}\n", self.title);
        let _ = writeln!(md, "| {} |", self.header.iter().map(|h| esc(h)).collect::<Vec<_>>().join(" | "));
        let _ = writeln!(md, "|{}", "---|".repeat(self.header.len()));
        for r in &self.rows {
            let _ = writeln!(md, "| {} |", r.iter().map(|c| esc(c)).collect::<Vec<_>>().join(" | "));
        }
        md
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p_value_styles() {
        assert_eq!(format_p(0.0083), "0.0083");
        assert_eq!(format_p(0.61634), "0.6163");
        assert_eq!(format_p(9.1971e-6), "9.197e-06");
        assert_eq!(format_p(6.51e-10), "6.51e-10");
        assert_eq!(format_p(1.0), "1");
        assert_eq!(format_p(0.0001), "0.0001");
        assert_eq!(format_p(0.05684), "0.05684");
        assert_eq!(format_p(f64::NAN), "NA");
        assert_eq!(format_p_star(0.0035, 0.1), "0.0035*");
        assert_eq!(format_p_star(0.1, 0.1), "0.1");
    }

    #[test]
    fn numbers() {
        assert_eq!(format_num(1050.1694), "1050.169");
        assert_eq!(format_num(-0.06056931), "-0.06056931");
        assert_eq!(format_num(2.0), "2");
        assert_eq!(format_num(1.234e-7), "1.234e-07");
        assert_eq!(format_num(9.9999999), "10");
    }

    #[test]
    fn markdown_escapes_pipes() {
        let mut t = Table::new("x", "X", &["a", "b"]);
        t.push(vec!["1|2".into(), "3".into()]);
        let md = t.to_markdown();
        assert!(md.contains("| 1\\|2 | 3 |"));
        assert!(md.contains("|---|---|"));
    }
}
