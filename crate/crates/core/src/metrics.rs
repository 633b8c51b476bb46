//! Append-only metrics stream with a fixed CSV schema and JSON export.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fixed column order of the metrics CSV.
pub const CSV_HEADER: &str = "step,env_steps,env_trials,loss_pred,loss_dyn,loss_rep,loss_logic_elbo,loss_s2,r1,r2,r3,r4,r5,r6,r7,r8,r9,r10,r11,r12,r13,r14,eval_return_mean,eval_return_std,consistency_mean,consistency_std";

/// One row: training rows fill the loss columns, evaluation rows fill the
/// return/consistency columns; absent values serialize as empty fields.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsRow {
    pub step: u64,
    pub env_steps: u64,
    pub env_trials: u64,
    pub loss_pred: Option<f64>,
    pub loss_dyn: Option<f64>,
    pub loss_rep: Option<f64>,
    pub loss_logic_elbo: Option<f64>,
    pub loss_s2: Option<f64>,
    pub rules: Option<[f64; 14]>,
    pub eval_return_mean: Option<f64>,
    pub eval_return_std: Option<f64>,
    pub consistency_mean: Option<f64>,
    pub consistency_std: Option<f64>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn parse_opt(s: &str, what: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<f64>()
        .map(Some)
        .map_err(|_| Error::Corrupt(format!("bad {what} value `{s}`")))
}

impl MetricsRow {
    pub fn to_csv(&self) -> String {
        let mut fields = vec![
            self.step.to_string(),
            self.env_steps.to_string(),
            self.env_trials.to_string(),
            fmt_opt(self.loss_pred),
            fmt_opt(self.loss_dyn),
            fmt_opt(self.loss_rep),
            fmt_opt(self.loss_logic_elbo),
            fmt_opt(self.loss_s2),
        ];
        match &self.rules {
            Some(rules) => fields.extend(rules.iter().map(|r| r.to_string())),
            None => fields.extend(std::iter::repeat(String::new()).take(14)),
        }
        fields.push(fmt_opt(self.eval_return_mean));
        fields.push(fmt_opt(self.eval_return_std));
        fields.push(fmt_opt(self.consistency_mean));
        fields.push(fmt_opt(self.consistency_std));
        fields.join(",")
    }

    pub fn from_csv(line: &str) -> Result<MetricsRow> {
        let fields: Vec<&str> = line.split(',').collect();
        let expected = CSV_HEADER.split(',').count();
        if fields.len() != expected {
            return Err(Error::Corrupt(format!(
                "metrics row has {} fields, expected {expected}",
                fields.len()
            )));
        }
        let int = |s: &str, what: &str| -> Result<u64> {
            s.parse::<u64>()
                .map_err(|_| Error::Corrupt(format!("bad {what} value `{s}`")))
        };
        let mut rules = [0.0f64; 14];
        let mut have_rules = false;
        for (i, f) in fields[8..22].iter().enumerate() {
            if let Some(v) = parse_opt(f, "rule")? {
                rules[i] = v;
                have_rules = true;
            }
        }
        Ok(MetricsRow {
            step: int(fields[0], "step")?,
            env_steps: int(fields[1], "env_steps")?,
            env_trials: int(fields[2], "env_trials")?,
            loss_pred: parse_opt(fields[3], "loss_pred")?,
            loss_dyn: parse_opt(fields[4], "loss_dyn")?,
            loss_rep: parse_opt(fields[5], "loss_rep")?,
            loss_logic_elbo: parse_opt(fields[6], "loss_logic_elbo")?,
            loss_s2: parse_opt(fields[7], "loss_s2")?,
            rules: have_rules.then_some(rules),
            eval_return_mean: parse_opt(fields[22], "eval_return_mean")?,
            eval_return_std: parse_opt(fields[23], "eval_return_std")?,
            consistency_mean: parse_opt(fields[24], "consistency_mean")?,
            consistency_std: parse_opt(fields[25], "consistency_std")?,
        })
    }
}

/// Streaming CSV writer; the header goes out on creation.
pub struct MetricsWriter {
    out: BufWriter<File>,
    rows: u64,
}

impl MetricsWriter {
    pub fn create(path: &Path) -> Result<MetricsWriter> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{CSV_HEADER}")?;
        Ok(MetricsWriter { out, rows: 0 })
    }

    pub fn append(&mut self, row: &MetricsRow) -> Result<()> {
        writeln!(self.out, "{}", row.to_csv())?;
        self.rows += 1;
        Ok(())
    }

    pub fn rows_written(&self) -> u64 {
        self.rows
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

/// Read a metrics CSV back into rows, validating the header.
pub fn read_rows(path: &Path) -> Result<Vec<MetricsRow>> {
    let reader = BufReader::new(File::open(path)?);
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if i == 0 {
            if line != CSV_HEADER {
                return Err(Error::Corrupt("metrics header does not match schema".into()));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        rows.push(MetricsRow::from_csv(&line)?);
    }
    Ok(rows)
}

/// Export a metrics CSV as CSV (copy) or JSON (array of row objects).
pub fn export(src: &Path, dst: &Path, format: &str) -> Result<()> {
    let rows = read_rows(src)?;
    match format {
        "csv" => {
            let mut w = MetricsWriter::create(dst)?;
            for r in &rows {
                w.append(r)?;
            }
            w.flush()?;
        }
        "json" => {
            let f = BufWriter::new(File::create(dst)?);
            serde_json::to_writer_pretty(f, &rows)?;
        }
        other => {
            return Err(Error::Config(format!("unknown export format `{other}` (use csv|json)")))
        }
    }
    Ok(())
}
