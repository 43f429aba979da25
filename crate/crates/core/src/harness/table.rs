use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{Column, MonteCarloSummary};

/// Metric rows of the simulation tables, in display order.
pub const METRICS: [&str; 4] = ["SE", "ESE", "RE", "RMSE"];

/// Rendered blocks of a simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryTable {
    pub blocks: Vec<TableBlock>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableBlock {
    pub name: String,
    pub caption: String,
    pub columns: Vec<Column>,
    /// `rows[m][c]` is metric `METRICS[m]` of `columns[c]`.
    pub rows: Vec<Vec<f64>>,
}

/// Six significant digits.
pub fn format_sig(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let decimals = (5 - v.abs().log10().floor() as i32).max(0) as usize;
    format!("{v:.decimals$}")
}

pub fn summarize_to_table(summaries: &[MonteCarloSummary]) -> SummaryTable {
    let blocks = summaries
        .iter()
        .map(|s| {
            let c = &s.config;
            let caption = format!(
                "p = ({}, {}, {}), p_M = {}, p_ML = {}, q = {}, N = {}, n = {}, K = {}",
                c.p[0], c.p[1], c.p[2], c.p_match, c.p_best_match, c.q, c.population_size,
                c.sample_size, s.replicates
            );
            let columns: Vec<Column> = s.estimators.iter().map(|e| e.column).collect();
            let rows = if columns.is_empty() {
                Vec::new()
            } else {
                vec![
                    s.estimators.iter().map(|e| e.se).collect(),
                    s.estimators.iter().map(|e| e.ese).collect(),
                    s.estimators.iter().map(|e| e.re).collect(),
                    s.estimators.iter().map(|e| e.rmse).collect(),
                ]
            };
            TableBlock {
                name: c.name.clone(),
                caption,
                columns,
                rows,
            }
        })
        .collect();
    SummaryTable { blocks }
}

impl TableBlock {
    /// `metric,estimator,value` at full precision.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,estimator,value\n");
        for (m, row) in self.rows.iter().enumerate() {
            for (c, v) in self.columns.iter().zip(row) {
                let _ = writeln!(out, "{},{},{}", METRICS[m], c.label(), v);
            }
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("[{}] {}\n", self.name, self.caption);
        if self.columns.is_empty() {
            return out;
        }
        let cells: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| r.iter().map(|&v| format_sig(v)).collect())
            .collect();
        let widths: Vec<usize> = self
            .columns
            .iter()
            .enumerate()
            .map(|(c, col)| cells.iter().map(|r| r[c].len()).max().unwrap_or(0).max(col.label().len()))
            .collect();
        let _ = write!(out, "{:<5}", "");
        for (col, w) in self.columns.iter().zip(&widths) {
            let _ = write!(out, " {:>w$}", col.label());
        }
        out.push('\n');
        for (m, row) in cells.iter().enumerate() {
            let _ = write!(out, "{:<5}", METRICS[m]);
            for (cell, w) in row.iter().zip(&widths) {
                let _ = write!(out, " {cell:>w$}");
            }
            out.push('\n');
        }
        out
    }
}

impl SummaryTable {
    pub fn to_text(&self) -> String {
        self.blocks.iter().map(TableBlock::to_text).collect::<Vec<_>>().join("\n")
    }
}

/// Spread of SE(HT) and SE(Ideal) across blocks sharing `(N, n, σ, γ, target)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftLine {
    pub group: String,
    pub column: Column,
    pub blocks: usize,
    pub min_se: f64,
    pub max_se: f64,
}

impl DriftLine {
    /// `(max - min) / mean of min and max`.
    pub fn relative_spread(&self) -> f64 {
        (self.max_se - self.min_se) / ((self.max_se + self.min_se) / 2.0)
    }
}

impl std::fmt::Display for DriftLine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "drift {} {}: SE in [{}, {}] over {} blocks, relative spread {}",
            self.group,
            self.column,
            format_sig(self.min_se),
            format_sig(self.max_se),
            self.blocks,
            format_sig(self.relative_spread())
        )
    }
}

pub fn drift_diagnostic(summaries: &[MonteCarloSummary]) -> Vec<DriftLine> {
    let mut groups: BTreeMap<String, Vec<&MonteCarloSummary>> = BTreeMap::new();
    for s in summaries {
        let c = &s.config;
        let key = format!(
            "N={} n={} sigma={} gamma={} target={:?}",
            c.population_size, c.sample_size, c.sigma, c.gamma, c.target
        );
        groups.entry(key).or_default().push(s);
    }
    let mut lines = Vec::new();
    for (group, members) in groups {
        for column in [Column::Ht, Column::Ideal] {
            let ses: Vec<f64> = members
                .iter()
                .filter_map(|s| s.get(column).map(|e| e.se))
                .collect();
            if ses.len() < 2 {
                continue;
            }
            lines.push(DriftLine {
                group: group.clone(),
                column,
                blocks: ses.len(),
                min_se: ses.iter().copied().fold(f64::INFINITY, f64::min),
                max_se: ses.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            });
        }
    }
    lines
}
