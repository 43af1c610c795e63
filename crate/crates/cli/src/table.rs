use std::path::Path;

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub level: usize,
    pub h: f64,
    pub quantity: String,
    pub value: f64,
    pub error: Option<f64>,
    /// `log2(err_prev / err)` against the previous level.
    pub order: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    /// Appends a row, filling the order from the previous row when both
    /// errors are known and positive.
    pub fn push(&mut self, level: usize, h: f64, quantity: &str, value: f64, error: Option<f64>) {
        let order = match (self.rows.last().and_then(|r| r.error), error) {
            (Some(prev), Some(err)) if prev > 0.0 && err > 0.0 => Some((prev / err).log2()),
            _ => None,
        };
        self.rows.push(ConvergenceRow {
            level,
            h,
            quantity: quantity.to_string(),
            value,
            error,
            order,
        });
    }

    pub fn write_csv(&self, path: &Path) -> anyhow::Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}
