//! Scenario × policy × seed sweeps and the policy comparison summary.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel;
use crate::metrics::{export_csv, format_sig6, MetricsLedger, Scope};
use crate::policy::PolicyKind;
use crate::runner::scenario::ScenarioSpec;
use crate::traffic::DEFAULT_QUEUE_CAPACITY;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellFailure {
    pub scenario_id: String,
    pub policy: PolicyKind,
    pub seed: u64,
    pub error: String,
}

/// Seed-averaged metrics of both policies for one scenario and scope.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub scenario_id: String,
    pub scope: Scope,
    pub edca: MetricMeans,
    pub qcaaae: MetricMeans,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct MetricMeans {
    pub normalized_throughput: Option<f64>,
    pub mean_delay_s: Option<f64>,
    pub retx_per_frame: Option<f64>,
}

fn delta(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    Some(b? - a?)
}

impl SummaryRow {
    /// QCAAAE minus EDCA.
    pub fn throughput_delta(&self) -> Option<f64> {
        delta(
            self.edca.normalized_throughput,
            self.qcaaae.normalized_throughput,
        )
    }

    pub fn delay_delta(&self) -> Option<f64> {
        delta(self.edca.mean_delay_s, self.qcaaae.mean_delay_s)
    }

    pub fn retx_delta(&self) -> Option<f64> {
        delta(self.edca.retx_per_frame, self.qcaaae.retx_per_frame)
    }
}

pub const SUMMARY_HEADER: &str = "scenario_id,scope,edca_normalized_throughput,qcaaae_normalized_throughput,delta_normalized_throughput,edca_mean_delay_s,qcaaae_mean_delay_s,delta_mean_delay_s,edca_retx_per_frame,qcaaae_retx_per_frame,delta_retx_per_frame";

#[derive(Debug)]
pub struct SweepReport {
    /// Completed runs in (grid, policy, seed) order.
    pub ledgers: Vec<MetricsLedger>,
    pub failures: Vec<CellFailure>,
    pub summary: Vec<SummaryRow>,
    pub scenarios: Vec<ScenarioSpec>,
    pub policies: Vec<PolicyKind>,
    pub seeds: Vec<u64>,
}

impl SweepReport {
    pub fn is_success(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn write_results_csv<W: Write>(&self, out: W) -> Result<()> {
        export_csv(&self.ledgers, out)
    }

    pub fn write_summary_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let cell = |v: Option<f64>| v.map(format_sig6).unwrap_or_default();
        writeln!(out, "{SUMMARY_HEADER}")?;
        for row in &self.summary {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                row.scenario_id,
                row.scope,
                cell(row.edca.normalized_throughput),
                cell(row.qcaaae.normalized_throughput),
                cell(row.throughput_delta()),
                cell(row.edca.mean_delay_s),
                cell(row.qcaaae.mean_delay_s),
                cell(row.delay_delta()),
                cell(row.edca.retx_per_frame),
                cell(row.qcaaae.retx_per_frame),
                cell(row.retx_delta()),
            )?;
        }
        out.flush()?;
        Ok(())
    }

    /// Run metadata: per-scenario timing plus any failed cells.
    pub fn metadata_json(&self) -> String {
        #[derive(Serialize)]
        struct ScenarioMeta<'a> {
            scenario_id: &'a str,
            duration_s: f64,
            warmup_s: f64,
            beacon_interval_s: f64,
            retry_limit: u32,
            stations: u64,
        }
        #[derive(Serialize)]
        struct Meta<'a> {
            runs: usize,
            policies: &'a [PolicyKind],
            seeds: &'a [u64],
            default_queue_capacity: usize,
            scenarios: Vec<ScenarioMeta<'a>>,
            failures: &'a [CellFailure],
        }
        let meta = Meta {
            runs: self.ledgers.len(),
            policies: &self.policies,
            seeds: &self.seeds,
            default_queue_capacity: DEFAULT_QUEUE_CAPACITY,
            scenarios: self
                .scenarios
                .iter()
                .map(|s| ScenarioMeta {
                    scenario_id: &s.scenario_id,
                    duration_s: s.duration,
                    warmup_s: s.warmup,
                    beacon_interval_s: s.beacon_interval,
                    retry_limit: s.retry_limit,
                    stations: s.total_stations(),
                })
                .collect(),
            failures: &self.failures,
        };
        serde_json::to_string_pretty(&meta).expect("metadata serializes")
    }

    /// Writes `results.csv`, `summary.csv` and `metadata.json` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        self.write_results_csv(BufWriter::new(File::create(dir.join("results.csv"))?))?;
        self.write_summary_csv(BufWriter::new(File::create(dir.join("summary.csv"))?))?;
        fs::write(dir.join("metadata.json"), self.metadata_json() + "\n")?;
        Ok(())
    }
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let vals: Vec<f64> = values.flatten().collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

fn means(ledgers: &[&MetricsLedger], scope: Scope) -> MetricMeans {
    MetricMeans {
        normalized_throughput: mean(ledgers.iter().map(|l| l.normalized_throughput(scope).ok())),
        mean_delay_s: mean(ledgers.iter().map(|l| l.mean_access_delay(scope).ok())),
        retx_per_frame: mean(
            ledgers
                .iter()
                .map(|l| l.retransmission_attempts(scope).ok()),
        ),
    }
}

/// Per scenario and scope, seed-averaged metrics of both policies.
pub fn summarize(grid: &[ScenarioSpec], ledgers: &[MetricsLedger]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for spec in grid {
        let of = |policy: PolicyKind| -> Vec<&MetricsLedger> {
            ledgers
                .iter()
                .filter(|l| l.info.scenario_id == spec.scenario_id && l.info.policy == policy)
                .collect()
        };
        let (edca, qcaaae) = (of(PolicyKind::Edca), of(PolicyKind::Qcaaae));
        let Some(first) = edca.first().or(qcaaae.first()) else {
            continue;
        };
        for scope in first.scopes() {
            rows.push(SummaryRow {
                scenario_id: spec.scenario_id.clone(),
                scope,
                edca: means(&edca, scope),
                qcaaae: means(&qcaaae, scope),
            });
        }
    }
    rows
}

/// Runs every (scenario, policy, seed) cell in parallel. A failing cell is
/// recorded and the rest still run; results come back in a fixed order.
pub fn sweep(grid: &[ScenarioSpec], policies: &[PolicyKind], seeds: &[u64]) -> Result<SweepReport> {
    if grid.is_empty() || policies.is_empty() || seeds.is_empty() {
        return Err(Error::Config(
            "sweep needs at least one scenario, policy and seed".into(),
        ));
    }
    let cells: Vec<(&ScenarioSpec, PolicyKind, u64)> = grid
        .iter()
        .flat_map(|spec| {
            policies
                .iter()
                .flat_map(move |&p| seeds.iter().map(move |&s| (spec, p, s)))
        })
        .collect();
    let results: Vec<_> = cells
        .par_iter()
        .map(|&(spec, policy, seed)| kernel::run(spec, policy, seed))
        .collect();

    let mut ledgers = Vec::new();
    let mut failures = Vec::new();
    for ((spec, policy, seed), result) in cells.into_iter().zip(results) {
        match result {
            Ok(ledger) if ledger.is_consistent() => ledgers.push(ledger),
            Ok(_) => failures.push(CellFailure {
                scenario_id: spec.scenario_id.clone(),
                policy,
                seed,
                error: "frame conservation violated".into(),
            }),
            Err(e) => failures.push(CellFailure {
                scenario_id: spec.scenario_id.clone(),
                policy,
                seed,
                error: e.to_string(),
            }),
        }
    }
    let summary = summarize(grid, &ledgers);
    Ok(SweepReport {
        ledgers,
        failures,
        summary,
        scenarios: grid.to_vec(),
        policies: policies.to_vec(),
        seeds: seeds.to_vec(),
    })
}
