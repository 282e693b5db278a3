//! CSV and JSON Lines rendering of sweep tables.

use std::io::{self, Write};
use std::time::{SystemTime, UNIX_EPOCH};

use demonsim_core::{CoarseVariant, WorkReport};
use serde_json::{Map, Value};

use crate::config::OutputFormat;
use crate::sweep::{SweepRow, SweepTable};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Num(f64),
    Bool(bool),
    Empty,
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

pub const POINT_COLUMNS: [&str; 4] = ["theta_c", "beta", "temperature", "epsilon"];

pub const EXACT_COLUMNS: [&str; 17] = [
    "w_out",
    "w_ext",
    "delta_f",
    "delta_f_coarse",
    "mean_sigma_cond",
    "mean_sigma_uncond",
    "mean_sigma_info",
    "ft_cond",
    "ft_uncond",
    "ft_info",
    "support_deficit_cond",
    "support_deficit_info",
    "eta_out",
    "eta_ext",
    "eta_max",
    "coarse_violated",
    "coarse_margin",
];

pub const MC_QUANTITIES: [&str; 7] = [
    "w_out",
    "mean_sigma_cond",
    "mean_sigma_uncond",
    "mean_sigma_info",
    "ft_cond",
    "ft_uncond",
    "ft_info",
];

/// Column names for a table, in output order.
pub fn columns(table: &SweepTable) -> Vec<String> {
    let mut cols: Vec<String> = POINT_COLUMNS.iter().map(|s| s.to_string()).collect();
    if table.config.engine.exact() {
        cols.extend(EXACT_COLUMNS.iter().map(|s| s.to_string()));
    }
    if table.config.engine.monte_carlo() {
        for q in MC_QUANTITIES {
            cols.push(format!("{q}_mc"));
            cols.push(format!("{q}_stderr"));
        }
    }
    cols
}

fn exact_cells(r: &WorkReport, variant: CoarseVariant) -> [Cell; 17] {
    let coarse = r.coarse_check(variant);
    [
        Cell::Num(r.w_out),
        Cell::Num(r.w_ext),
        Cell::Num(r.delta_f),
        Cell::Num(coarse.delta_f),
        Cell::Num(r.mean_sigma_cond),
        Cell::Num(r.mean_sigma_uncond),
        Cell::Num(r.mean_sigma_info),
        Cell::Num(r.ft_cond.value),
        Cell::Num(r.ft_uncond.value),
        Cell::Num(r.ft_info.value),
        Cell::Num(r.support_deficit_cond),
        Cell::Num(r.support_deficit_info),
        r.eta_out.into(),
        r.eta_ext.into(),
        r.eta_max.into(),
        Cell::Bool(coarse.violated),
        Cell::Num(coarse.margin),
    ]
}

/// Cells of one row, aligned with [`columns`].
pub fn cells(table: &SweepTable, row: &SweepRow) -> Vec<Cell> {
    let mut out = vec![
        Cell::Num(row.theta_c),
        Cell::Num(row.beta),
        Cell::Num(row.temperature),
        Cell::Num(row.epsilon),
    ];
    if table.config.engine.exact() {
        match &row.exact {
            Some(r) => out.extend(exact_cells(r, table.config.coarse_variant)),
            None => out.extend([Cell::Empty; 17]),
        }
    }
    if table.config.engine.monte_carlo() {
        match &row.mc {
            Some(mc) => {
                for (_, e) in mc.named() {
                    out.push(Cell::Num(e.mean));
                    out.push(Cell::Num(e.stderr));
                }
            }
            None => out.extend([Cell::Empty; 14]),
        }
    }
    out
}

/// `%.12g`-style formatting; NaN prints as an empty string.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        return String::new();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    const SIG: usize = 12;
    let sci = format!("{:.*e}", SIG - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= SIG as i32 {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (SIG as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn render_cell(c: Cell) -> String {
    match c {
        Cell::Num(x) => format_number(x),
        Cell::Bool(b) => b.to_string(),
        Cell::Empty => String::new(),
    }
}

fn margin_units(variant: CoarseVariant) -> &'static str {
    match variant {
        CoarseVariant::Marginal => "energy, T<sigma_X>",
        CoarseVariant::CycleImproper => "nats, -beta*w_out",
        CoarseVariant::PartialAverage => "energy, delta_f_coarse - w_out",
    }
}

/// `#`-prefixed metadata lines written above the CSV header.
pub fn metadata(table: &SweepTable, timestamp: bool) -> Vec<String> {
    let c = &table.config;
    let mut lines = vec!["# demonsim sweep".to_string()];
    if timestamp {
        let secs = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        lines.push(format!("# generated_unix: {secs}"));
    }
    lines.push(format!("# protocol: {}", c.protocol.name.as_str()));
    lines.push(format!("# reconstruction: {}", table.reconstruction));
    lines.push(format!("# engine: {}", c.engine.as_str()));
    lines.push(format!(
        "# coarse_variant: {} (coarse_margin in {})",
        c.coarse_variant.name(),
        margin_units(c.coarse_variant)
    ));
    lines.push("# units: k_B = 1, energies in units of the qubit gap, entropies in nats".into());
    lines.push(
        "# empty cells: undefined values (eta_* when the free-energy budget vanishes)".into(),
    );
    for line in c.to_config_text().lines() {
        lines.push(format!("# config: {line}"));
    }
    lines
}

pub fn write_csv<W: Write>(table: &SweepTable, mut w: W, timestamp: bool) -> io::Result<()> {
    for line in metadata(table, timestamp) {
        writeln!(w, "{line}")?;
    }
    writeln!(w, "{}", columns(table).join(","))?;
    for row in &table.rows {
        let rendered: Vec<String> = cells(table, row).into_iter().map(render_cell).collect();
        writeln!(w, "{}", rendered.join(","))?;
    }
    Ok(())
}

fn json_cell(c: Cell) -> Value {
    match c {
        Cell::Num(x) if x.is_finite() => Value::from(x),
        Cell::Num(x) if x.is_infinite() => Value::from(if x > 0.0 { "inf" } else { "-inf" }),
        Cell::Bool(b) => Value::Bool(b),
        _ => Value::Null,
    }
}

/// One JSON object per row, keyed by the CSV column names.
pub fn write_json_lines<W: Write>(table: &SweepTable, mut w: W) -> io::Result<()> {
    let cols = columns(table);
    for row in &table.rows {
        let map: Map<String, Value> = cols
            .iter()
            .cloned()
            .zip(cells(table, row).into_iter().map(json_cell))
            .collect();
        serde_json::to_writer(&mut w, &map)?;
        writeln!(w)?;
    }
    Ok(())
}

pub fn write_table<W: Write>(table: &SweepTable, w: W) -> io::Result<()> {
    match table.config.format {
        OutputFormat::Csv => write_csv(table, w, table.config.timestamp),
        OutputFormat::Json => write_json_lines(table, w),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_formatting() {
        assert_eq!(format_number(0.25), "0.25");
        assert_eq!(format_number(0.0), "0");
        assert_eq!(format_number(-0.0), "0");
        assert_eq!(format_number(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_number(1e-7), "1e-07");
        assert_eq!(format_number(-2.5e-12), "-2.5e-12");
        assert_eq!(format_number(123456.0), "123456");
        assert_eq!(format_number(1e15), "1e+15");
        assert_eq!(format_number(f64::INFINITY), "inf");
        assert_eq!(format_number(f64::NAN), "");
        assert_eq!(format_number(0.99999999999999), "1");
        assert_eq!(format_number(0.0001234), "0.0001234");
    }

    #[test]
    fn formatting_keeps_twelve_digits() {
        for x in [
            std::f64::consts::PI,
            1.0 / 7.0,
            2.0f64.sqrt() * 1e-3,
            6.02214076e23,
        ] {
            let back: f64 = format_number(x).parse().unwrap();
            assert!(((back - x) / x).abs() < 1e-11, "{x}");
        }
    }
}
