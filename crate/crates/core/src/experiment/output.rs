use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{ResolvedConfig, RunSummary};
use crate::analysis::{error_power_csv, psd_csv, FrequencyStats};
use crate::losses::LossReport;
use crate::{Error, Result};

pub const RUN_CSV_HEADER: &str =
    "iteration,physics,compatibility,initial,boundary,fourier,total,rel_l2,grid_size,lambda_physics,lambda_boundary,lambda_fourier";
pub const TIMING_CSV_HEADER: &str = "iteration,wall_seconds";

/// One logged optimizer step. Losses are those of the parameters before the
/// step's update; `rel_l2` is present on evaluation steps.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub iteration: usize,
    pub report: LossReport,
    pub rel_l2: Option<f64>,
    /// Fourier mesh size (`n` or `nx x ny`) or sample count of the step.
    pub grid_size: String,
    pub lambda: [f64; 3],
}

impl RunRecord {
    pub fn csv_row(&self) -> String {
        let r = &self.report;
        let l2 = self.rel_l2.map(|v| format!("{v:.9e}")).unwrap_or_default();
        format!(
            "{},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{l2},{},{:.9e},{:.9e},{:.9e}",
            self.iteration,
            r.physics,
            r.compatibility,
            r.initial,
            r.boundary,
            r.fourier,
            r.total,
            self.grid_size,
            self.lambda[0],
            self.lambda[1],
            self.lambda[2]
        )
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// `run.csv` and `timing.csv`; headers only for an empty stream.
pub(crate) fn write_records(dir: &Path, records: &[RunRecord], timing: &[(usize, f64)]) -> Result<()> {
    let mut run = format!("{RUN_CSV_HEADER}\n");
    for r in records {
        run.push_str(&r.csv_row());
        run.push('\n');
    }
    write(&dir.join("run.csv"), &run)?;
    let mut t = format!("{TIMING_CSV_HEADER}\n");
    for (i, s) in timing {
        writeln!(t, "{i},{s:.6}").expect("string write");
    }
    write(&dir.join("timing.csv"), &t)
}

/// Every run file: `run.csv`, `timing.csv`, `psd.csv`, `stats.csv`,
/// `error_power.csv`, `field.*` and `config.resolved.json`.
pub fn write_outputs(dir: &Path, resolved: &ResolvedConfig, run: &RunSummary) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_records(dir, &run.records, &run.timing)?;
    write(&dir.join("psd.csv"), &psd_csv(&run.psd))?;
    write(
        &dir.join("stats.csv"),
        &format!("{}\n{}\n", FrequencyStats::CSV_HEADER, run.stats.csv_row()),
    )?;
    write(&dir.join("error_power.csv"), &error_power_csv(&run.error_power))?;
    run.prediction.save(dir, "field")?;
    let json = serde_json::to_string_pretty(resolved).map_err(|e| Error::Serde(e.to_string()))?;
    write(&dir.join("config.resolved.json"), &json)
}
