//! Table-I style rendering: `value ± error` with the error rounded to its
//! leading digit (two digits when that digit is 1), then the significance.

use serde::{Deserialize, Serialize};

use crate::bellstats::BellResult;

/// Significant digits to show for an error.
fn error_digits(err: f64) -> (i32, f64) {
    let exp = err.abs().log10().floor() as i32;
    let lead = err / 10f64.powi(exp);
    let digits = if lead < 2.0 { 2 } else { 1 };
    // Place of the last shown digit.
    let place = exp - (digits - 1);
    let rounded = (err / 10f64.powi(place)).round() * 10f64.powi(place);
    // Rounding up can add a digit: 0.096 becomes 0.10, shown to 0.01.
    if rounded >= 10f64.powi(exp + 1) {
        return (exp, rounded);
    }
    (place, rounded)
}

fn decimals_for(place: i32) -> usize {
    if place < 0 {
        (-place) as usize
    } else {
        0
    }
}

/// `value ± err` at the precision of `err`; small values share an exponent.
pub fn format_value(value: f64, err: f64) -> String {
    if !(err > 0.0 && err.is_finite()) {
        return format!("{value:.4}");
    }
    let mag = value.abs().max(err);
    if mag < 1e-2 {
        let exp = mag.log10().floor() as i32;
        let scale = 10f64.powi(exp);
        let (place, e) = error_digits(err / scale);
        let d = decimals_for(place);
        return format!("({:.d$} ± {:.d$})e{exp}", value / scale, e);
    }
    let (place, e) = error_digits(err);
    let d = decimals_for(place);
    format!("{value:.d$} ± {e:.d$}")
}

/// One decimal below 20, whole numbers above.
pub fn format_sigma(sigma: f64) -> String {
    if sigma.abs() < 20.0 {
        format!("{sigma:.1}σ")
    } else {
        format!("{sigma:.0}σ")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub label: String,
    pub inequality: String,
    pub result: BellResult,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
}

impl ReportRow {
    pub fn new(label: impl Into<String>, inequality: impl Into<String>, result: BellResult) -> Self {
        Self {
            label: label.into(),
            inequality: inequality.into(),
            result,
            trials: None,
        }
    }

    pub fn cells(&self) -> [String; 4] {
        let r = &self.result;
        [
            self.label.clone(),
            self.inequality.clone(),
            format_value(r.value, r.stderr),
            r.sigma.map_or_else(|| "-".to_string(), format_sigma),
        ]
    }
}

/// Fixed-width table with a header.
pub fn render_table(rows: &[ReportRow]) -> String {
    let head = ["Lab", "Inequality", "Result", "Stat. Sig."];
    let body: Vec<[String; 4]> = rows.iter().map(ReportRow::cells).collect();
    let mut width = head.map(|h| h.chars().count());
    for r in &body {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: [&str; 4]| {
        let mut s = String::new();
        for (i, c) in cells.iter().enumerate() {
            let pad = width[i] - c.chars().count();
            s.push_str(c);
            if i + 1 < cells.len() {
                s.push_str(&" ".repeat(pad + 2));
            }
        }
        s.push('\n');
        s
    };
    let mut out = line(head);
    for r in &body {
        out.push_str(&line([&r[0], &r[1], &r[2], &r[3]]));
    }
    out
}

pub fn render_json_lines(rows: &[ReportRow]) -> String {
    rows.iter()
        .map(|r| serde_json::to_string(r).expect("rows serialize") + "\n")
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bellstats::Violation;

    #[test]
    fn values() {
        assert_eq!(format_value(1.699e-4, 1.8e-5), "(1.70 ± 0.18)e-4");
        assert_eq!(format_value(2.6388, 0.0061), "2.639 ± 0.006");
        assert_eq!(format_value(0.965, 0.008), "0.965 ± 0.008");
        assert_eq!(format_value(2.55, 0.07), "2.55 ± 0.07");
        assert_eq!(format_value(0.0, 0.0), "0.0000");
        assert_eq!(format_value(1.2, 0.14), "1.20 ± 0.14");
        assert_eq!(format_value(1.0, 0.096), "1.00 ± 0.10");
    }

    #[test]
    fn sigmas() {
        assert_eq!(format_sigma(56.75), "57σ");
        assert_eq!(format_sigma(7.857), "7.9σ");
        assert_eq!(format_sigma(11.2), "11.2σ");
    }

    #[test]
    fn table_layout() {
        let rows = vec![ReportRow::new("a", "chsh", BellResult::new(2.5, 2.0, 0.1, Violation::Above))];
        let t = render_table(&rows);
        assert_eq!(t.lines().count(), 2);
        assert!(t.contains("2.50 ± 0.10") && t.contains("5.0σ"));
        assert!(render_json_lines(&rows).ends_with("}\n"));
    }
}
