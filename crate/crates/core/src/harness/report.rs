//! Plain-text and CSV rendering of experiment results.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::acceptance::CriterionResult;
use super::experiment::{CltExperiment, LlnExperiment, ModeComparison};
use crate::error::Result;

/// A named table; it becomes `<name>.csv` and a block of the text report.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub caption: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, caption: String, header: &[&str]) -> Self {
        Self { name: name.into(), caption, header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Columns padded to their widest cell.
    pub fn render(&self) -> String {
        let mut widths: Vec<usize> = self.header.iter().map(|h| h.chars().count()).collect();
        for row in &self.rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let line = |cells: &[String]| {
            let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, &w)| format!("{c:>w$}")).collect();
            padded.join("  ").trim_end().to_string() + "\n"
        };
        let mut out = format!("{}\n", self.caption);
        out += &line(&self.header);
        for row in &self.rows {
            out += &line(row);
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub title: String,
    pub tables: Vec<Table>,
    pub criteria: Vec<CriterionResult>,
}

impl Report {
    pub fn render(&self) -> String {
        let mut out = format!("{}\n\n", self.title);
        for t in &self.tables {
            out += &t.render();
            out.push('\n');
        }
        if !self.criteria.is_empty() {
            for c in &self.criteria {
                out += &c.line();
                out.push('\n');
            }
            let passed = self.criteria.iter().filter(|c| c.passed).count();
            out += &format!("{passed}/{} criteria passed\n", self.criteria.len());
        }
        out
    }

    /// `report.txt`, one CSV per table and `criteria.csv` in `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.txt"), self.render())?;
        for t in &self.tables {
            t.write_csv(BufWriter::new(File::create(dir.join(format!("{}.csv", t.name)))?))?;
        }
        if !self.criteria.is_empty() {
            criteria_table(&self.criteria).write_csv(BufWriter::new(File::create(dir.join("criteria.csv"))?))?;
        }
        Ok(())
    }

    pub fn all_passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }
}

pub fn lln_table(e: &LlnExperiment) -> Table {
    let mut t = Table::new(
        "lln_errors",
        format!("Sup-grid error against the limit, log-log slope {:.4}", e.slope),
        &["N", "replicas", "mean_sup_error", "standard_error", "sup_S", "sup_I", "sup_R", "sup_F"],
    );
    for r in &e.rows {
        let mut row = vec![r.population.to_string(), r.replicas.to_string()];
        row.push(format!("{:.6e}", r.mean_error));
        row.push(format!("{:.6e}", r.standard_error));
        row.extend(r.components.iter().map(|c| format!("{c:.6e}")));
        t.push(row);
    }
    t
}

pub fn clt_table(e: &CltExperiment) -> Table {
    let mut t = Table::new(
        "clt_variances",
        format!(
            "Fluctuation variances: N={} with {} replicas against {} limit paths; Var S(0) = {}",
            e.population, e.replicas, e.paths, e.initial_variance
        ),
        &["t", "var_S_sim", "var_S_clt", "var_I_sim", "var_I_clt", "var_R_sim", "var_R_clt"],
    );
    for r in &e.rows {
        let mut row = vec![format!("{}", r.time)];
        for k in 0..3 {
            row.push(format!("{:.6e}", r.simulated[k]));
            row.push(format!("{:.6e}", r.predicted[k]));
        }
        t.push(row);
    }
    t
}

pub fn mode_table(c: &ModeComparison) -> Table {
    let mut t = Table::new(
        "mode_comparison",
        format!("Mean infected fraction, scheduled vs hazard recoveries; worst score {:.3}", c.worst_score()),
        &["t", "scheduled", "hazard", "standard_error"],
    );
    for k in 0..c.times.len() {
        t.push(vec![
            format!("{}", c.times[k]),
            format!("{:.6e}", c.scheduled[k]),
            format!("{:.6e}", c.hazard[k]),
            format!("{:.6e}", c.standard_error[k]),
        ]);
    }
    t
}

/// Timings are left out so equal seeds give equal files.
pub fn criteria_table(results: &[CriterionResult]) -> Table {
    let mut t = Table::new("criteria", "Acceptance criteria".into(), &["id", "name", "passed", "observed", "tolerance"]);
    for c in results {
        t.push(vec![
            c.id.to_string(),
            c.name.to_string(),
            c.passed.to_string(),
            c.observed.clone(),
            c.tolerance.clone(),
        ]);
    }
    t
}
