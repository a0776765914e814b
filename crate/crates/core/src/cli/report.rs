use std::path::Path;

use serde::Serialize;

use super::config::ExperimentConfig;
use super::{write_file, Failure};
use crate::pattern::HStarProfile;
use crate::sensitivity::SensitivityReport;
use crate::systems::System;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub(crate) enum Unit {
    Nats,
    Bits,
}

impl Unit {
    pub(crate) fn of(self, nats: f64) -> f64 {
        match self {
            Unit::Nats => nats,
            Unit::Bits => nats / std::f64::consts::LN_2,
        }
    }

    fn suffix(self) -> &'static str {
        match self {
            Unit::Nats => "nats",
            Unit::Bits => "bits",
        }
    }
}

/// How far the numbers in a result block can be trusted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub(crate) enum Exactness {
    /// Computed from exact measures, complete search.
    Exact,
    /// Measures estimated by counting, or sampled orbits.
    Estimated,
    /// A search stopped at its node budget; values are lower bounds.
    EstimatedWithBudget,
}

impl Exactness {
    pub(crate) fn of_system(sys: &System) -> Self {
        if sys.is_exact() {
            Exactness::Exact
        } else {
            Exactness::Estimated
        }
    }

    pub(crate) fn of_search(sys: &System, complete: bool) -> Self {
        if complete {
            Self::of_system(sys)
        } else {
            Exactness::EstimatedWithBudget
        }
    }
}

#[derive(Serialize)]
struct Report<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    unit: Unit,
    /// The effective configuration, flag overrides included.
    config: &'a ExperimentConfig,
    /// Same configuration as a file that `--config` accepts.
    config_toml: &'a str,
    results: &'a serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_clock_seconds: Option<f64>,
}

/// Everything a command emits, written in one go at the end of the run.
pub(crate) struct Output {
    command: &'static str,
    pub(crate) unit: Unit,
    config: ExperimentConfig,
    results: serde_json::Value,
    pub(crate) wall_clock_seconds: Option<f64>,
    tables: Vec<(String, Vec<Vec<String>>)>,
}

impl Output {
    pub(crate) fn new(command: &'static str, unit: Unit, config: &ExperimentConfig) -> Self {
        Output {
            command,
            unit,
            config: config.clone(),
            results: serde_json::Value::Null,
            wall_clock_seconds: None,
            tables: Vec::new(),
        }
    }

    pub(crate) fn set_results(&mut self, r: &impl Serialize) -> Result<(), Failure> {
        self.results = serde_json::to_value(r).map_err(|e| Failure::internal(format!("serializing results: {e}")))?;
        Ok(())
    }

    fn table(&mut self, name: &str, header: &[&str]) -> &mut Vec<Vec<String>> {
        let i = match self.tables.iter().position(|(n, _)| n == name) {
            Some(i) => i,
            None => {
                let head = header.iter().map(|h| h.to_string()).collect();
                self.tables.push((name.to_string(), vec![head]));
                self.tables.len() - 1
            }
        };
        &mut self.tables[i].1
    }

    /// Columns `k, p_star_<unit>, p_star_over_k, exact_flag`.
    pub(crate) fn hstar_csv(&mut self, name: &str, p: &HStarProfile) -> Result<(), Failure> {
        let u = self.unit;
        let col = format!("p_star_{}", u.suffix());
        let rows = self.table(name, &["k", &col, "p_star_over_k", "exact_flag"]);
        for r in &p.per_k {
            rows.push(vec![
                r.k.to_string(),
                u.of(r.p_star).to_string(),
                u.of(r.p_star_over_k).to_string(),
                r.exact.to_string(),
            ]);
        }
        Ok(())
    }

    /// Columns `set, trial, window_N, count, density`.
    pub(crate) fn density_rows(&mut self, set: usize, r: &SensitivityReport) {
        let rows = self.table("densities.csv", &["set", "trial", "window_N", "count", "density"]);
        for (t, rec) in r.trials.iter().enumerate() {
            for &(n, d) in &rec.density.window_densities {
                rows.push(vec![
                    set.to_string(),
                    t.to_string(),
                    n.to_string(),
                    rec.separation_set.count_below(n).to_string(),
                    d.to_string(),
                ]);
            }
        }
    }

    /// Columns `set, trial, checkpoint_N, cesaro_value`.
    pub(crate) fn cesaro_rows(&mut self, set: usize, r: &SensitivityReport) {
        let rows = self.table("cesaro.csv", &["set", "trial", "checkpoint_N", "cesaro_value"]);
        for (t, rec) in r.mean_trials.iter().enumerate() {
            for &(n, v) in &rec.profile {
                rows.push(vec![set.to_string(), t.to_string(), n.to_string(), v.to_string()]);
            }
        }
    }

    pub(crate) fn write(&self, dir: &Path) -> Result<(), Failure> {
        std::fs::create_dir_all(dir)
            .map_err(|e| Failure::internal(format!("cannot create {}: {e}", dir.display())))?;
        let config_toml =
            toml::to_string(&self.config).map_err(|e| Failure::internal(format!("echoing config: {e}")))?;
        let report = Report {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            unit: self.unit,
            config: &self.config,
            config_toml: &config_toml,
            results: &self.results,
            wall_clock_seconds: self.wall_clock_seconds,
        };
        let mut json =
            serde_json::to_vec_pretty(&report).map_err(|e| Failure::internal(format!("serializing report: {e}")))?;
        json.push(b'\n');
        write_file(&dir.join("report.json"), &json)?;
        for (name, rows) in &self.tables {
            let mut w = csv::Writer::from_writer(Vec::new());
            for row in rows {
                w.write_record(row)
                    .map_err(|e| Failure::internal(format!("writing {name}: {e}")))?;
            }
            let bytes = w
                .into_inner()
                .map_err(|e| Failure::internal(format!("writing {name}: {e}")))?;
            write_file(&dir.join(name), &bytes)?;
        }
        Ok(())
    }
}
