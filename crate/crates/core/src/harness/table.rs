use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::runner::CellRecord;
use crate::losses::LossVariant;
use crate::metrics::rela_imp;
use crate::models::Interaction;
use crate::{Error, Result};

/// Median with min–max spread over seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

impl Spread {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::data("spread of an empty set"));
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 {
            v[n / 2]
        } else {
            (v[n / 2 - 1] + v[n / 2]) / 2.0
        };
        Ok(Self {
            median,
            min: v[0],
            max: v[n - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub model: Interaction,
    pub loss: LossVariant,
    pub seeds: Vec<u64>,
    pub logloss: Spread,
    pub auc: Spread,
    /// Median AUC against the same model's plain median AUC, in percent.
    pub relaimp: Option<f64>,
    /// Run-record files the row was computed from.
    pub sources: Vec<String>,
}

/// Test-set results aggregated over seeds, one row per (model, loss).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<TableRow>,
}

impl ComparisonTable {
    /// Builds the table from `(file name, record)` pairs. Row order is
    /// fixed by model and loss kind, so input order never matters.
    pub fn from_records(records: &[(String, CellRecord)]) -> Result<Self> {
        type Runs<'a> = Vec<(u64, &'a str, &'a CellRecord)>;
        let mut groups: BTreeMap<(Interaction, LossVariant), Runs> = BTreeMap::new();
        for (name, r) in records {
            groups
                .entry((r.cell.model, r.cell.loss))
                .or_default()
                .push((r.cell.seed, name, r));
        }
        let mut rows = Vec::new();
        for ((model, loss), mut runs) in groups {
            runs.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(b.1)));
            let logloss: Vec<f64> = runs.iter().map(|r| r.2.test.logloss).collect();
            let auc: Vec<f64> = runs.iter().map(|r| r.2.test.auc).collect();
            rows.push(TableRow {
                model,
                loss,
                seeds: runs.iter().map(|r| r.0).collect(),
                logloss: Spread::of(&logloss)?,
                auc: Spread::of(&auc)?,
                relaimp: None,
                sources: runs.iter().map(|r| r.1.to_string()).collect(),
            });
        }
        let baselines: BTreeMap<Interaction, f64> = rows
            .iter()
            .filter(|r| r.loss == LossVariant::Plain)
            .map(|r| (r.model, r.auc.median))
            .collect();
        for row in &mut rows {
            row.relaimp = baselines
                .get(&row.model)
                .and_then(|&base| rela_imp(base, row.auc.median).ok());
        }
        Ok(Self { rows })
    }

    pub fn row(&self, model: Interaction, loss: LossVariant) -> Option<&TableRow> {
        self.rows.iter().find(|r| r.model == model && r.loss == loss)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<8} {:<11} {:>5}  {:>8} {:<18}  {:>8} {:<18}  {:>8}",
            "model", "loss", "seeds", "logloss", "[min, max]", "auc", "[min, max]", "relaimp"
        );
        for r in &self.rows {
            let relaimp = r.relaimp.map_or_else(|| "n/a".to_string(), |v| format!("{v:.2}%"));
            let _ = writeln!(
                out,
                "{:<8} {:<11} {:>5}  {:>8.4} {:<18}  {:>8.4} {:<18}  {:>8}",
                r.model.model_name(),
                r.loss.name(),
                r.seeds.len(),
                r.logloss.median,
                format!("[{:.4}, {:.4}]", r.logloss.min, r.logloss.max),
                r.auc.median,
                format!("[{:.4}, {:.4}]", r.auc.min, r.auc.max),
                relaimp
            );
        }
        out.push_str("\nsources:\n");
        for r in &self.rows {
            let _ = writeln!(out, "  {}/{}: {}", r.model.model_name(), r.loss.name(), r.sources.join(", "));
        }
        out
    }

    /// Machine-readable form; floats use shortest round-trip formatting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "model,loss,seeds,logloss_median,logloss_min,logloss_max,auc_median,auc_min,auc_max,relaimp_pct,sources\n",
        );
        for r in &self.rows {
            let seeds: Vec<String> = r.seeds.iter().map(u64::to_string).collect();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.model.model_name(),
                r.loss.name(),
                seeds.join(";"),
                r.logloss.median,
                r.logloss.min,
                r.logloss.max,
                r.auc.median,
                r.auc.min,
                r.auc.max,
                r.relaimp.map_or_else(String::new, |v| v.to_string()),
                r.sources.join(";")
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spread_median() {
        assert_eq!(Spread::of(&[3.0, 1.0, 2.0]).unwrap().median, 2.0);
        let s = Spread::of(&[4.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!((s.median, s.min, s.max), (2.5, 1.0, 4.0));
        assert!(Spread::of(&[]).is_err());
    }
}
