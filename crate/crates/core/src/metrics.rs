//! Run statistics: per-category and global tallies, derived metrics and CSV
//! export.
//!
//! Only frames that arrive at the MAC after the warm-up period are counted,
//! and each such frame is counted exactly once when it leaves the MAC
//! (delivered or dropped) or, at the end of the run, as still queued. This
//! keeps `generated = delivered + dropped + queued` exact.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{AccessCategory, PolicyKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Scope {
    Global,
    Ac(AccessCategory),
}

impl Scope {
    pub fn label(&self) -> &'static str {
        match self {
            Scope::Global => "global",
            Scope::Ac(ac) => ac.as_str(),
        }
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Counters for one scope.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub generated_frames: u64,
    pub delivered_frames: u64,
    pub dropped_frames: u64,
    /// Frames still in a queue (or in flight) when the run ended.
    pub queued_frames: u64,
    pub delivered_bits: u64,
    pub offered_bits: u64,
    pub sum_access_delay_us: u64,
    pub sum_retransmissions: u64,
    /// Globally: number of collided channel accesses. Per category: number
    /// of that category's transmissions that collided.
    pub collision_events: u64,
}

impl Tally {
    pub fn is_conserved(&self) -> bool {
        self.generated_frames == self.delivered_frames + self.dropped_frames + self.queued_frames
    }

    pub fn sum_access_delay_secs(&self) -> f64 {
        self.sum_access_delay_us as f64 * 1e-6
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub scenario_id: String,
    pub policy: PolicyKind,
    pub seed: u64,
    pub duration_s: f64,
    pub warmup_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsLedger {
    pub info: RunInfo,
    global: Tally,
    per_ac: BTreeMap<AccessCategory, Tally>,
}

impl MetricsLedger {
    /// An empty ledger with a tally for each category in `categories`.
    pub fn new(info: RunInfo, categories: impl IntoIterator<Item = AccessCategory>) -> Self {
        Self {
            info,
            global: Tally::default(),
            per_ac: categories
                .into_iter()
                .map(|ac| (ac, Tally::default()))
                .collect(),
        }
    }

    pub fn global(&self) -> &Tally {
        &self.global
    }

    pub fn ac(&self, ac: AccessCategory) -> Option<&Tally> {
        self.per_ac.get(&ac)
    }

    pub fn tally(&self, scope: Scope) -> Option<&Tally> {
        match scope {
            Scope::Global => Some(&self.global),
            Scope::Ac(ac) => self.ac(ac),
        }
    }

    /// Global first, then each category present in the run.
    pub fn scopes(&self) -> Vec<Scope> {
        std::iter::once(Scope::Global)
            .chain(self.per_ac.keys().map(|&ac| Scope::Ac(ac)))
            .collect()
    }

    fn both(&mut self, ac: AccessCategory, f: impl Fn(&mut Tally)) {
        f(&mut self.global);
        f(self.per_ac.entry(ac).or_default());
    }

    pub fn record_generated(&mut self, ac: AccessCategory, payload_bits: u64) {
        self.both(ac, |t| {
            t.generated_frames += 1;
            t.offered_bits += payload_bits;
        });
    }

    pub fn record_delivery(
        &mut self,
        ac: AccessCategory,
        payload_bits: u64,
        delay_us: u64,
        retransmissions: u64,
    ) {
        self.both(ac, |t| {
            t.delivered_frames += 1;
            t.delivered_bits += payload_bits;
            t.sum_access_delay_us += delay_us;
            t.sum_retransmissions += retransmissions;
        });
    }

    pub fn record_drop(&mut self, ac: AccessCategory, retransmissions: u64) {
        self.both(ac, |t| {
            t.dropped_frames += 1;
            t.sum_retransmissions += retransmissions;
        });
    }

    pub fn record_queued(&mut self, ac: AccessCategory, frames: u64) {
        self.both(ac, |t| t.queued_frames += frames);
    }

    /// One collided channel access among the given participants.
    pub fn record_collision(&mut self, participants: impl IntoIterator<Item = AccessCategory>) {
        self.global.collision_events += 1;
        for ac in participants {
            self.per_ac.entry(ac).or_default().collision_events += 1;
        }
    }

    /// Conservation holds for every scope, and the global frame and bit
    /// counters equal the sum over categories.
    pub fn is_consistent(&self) -> bool {
        let summed = self.per_ac.values().fold(Tally::default(), |mut acc, t| {
            acc.generated_frames += t.generated_frames;
            acc.delivered_frames += t.delivered_frames;
            acc.dropped_frames += t.dropped_frames;
            acc.queued_frames += t.queued_frames;
            acc.delivered_bits += t.delivered_bits;
            acc.offered_bits += t.offered_bits;
            acc.sum_access_delay_us += t.sum_access_delay_us;
            acc.sum_retransmissions += t.sum_retransmissions;
            acc
        });
        let g = &self.global;
        self.global.is_conserved()
            && self.per_ac.values().all(Tally::is_conserved)
            && summed.generated_frames == g.generated_frames
            && summed.delivered_frames == g.delivered_frames
            && summed.dropped_frames == g.dropped_frames
            && summed.queued_frames == g.queued_frames
            && summed.delivered_bits == g.delivered_bits
            && summed.offered_bits == g.offered_bits
            && summed.sum_access_delay_us == g.sum_access_delay_us
            && summed.sum_retransmissions == g.sum_retransmissions
    }

    fn scoped(&self, scope: Scope) -> Result<&Tally> {
        self.tally(scope).ok_or_else(|| Error::Undefined {
            metric: "any",
            scope: scope.to_string(),
            reason: "category not present in this run",
        })
    }

    /// Delivered bits over offered bits.
    pub fn normalized_throughput(&self, scope: Scope) -> Result<f64> {
        let t = self.scoped(scope)?;
        if t.offered_bits == 0 {
            return Err(Error::Undefined {
                metric: "normalized_throughput",
                scope: scope.to_string(),
                reason: "no offered load",
            });
        }
        Ok(t.delivered_bits as f64 / t.offered_bits as f64)
    }

    /// Mean time from arrival at the MAC queue to ACK completion, seconds.
    pub fn mean_access_delay(&self, scope: Scope) -> Result<f64> {
        let t = self.scoped(scope)?;
        if t.delivered_frames == 0 {
            return Err(Error::Undefined {
                metric: "mean_access_delay",
                scope: scope.to_string(),
                reason: "no delivered frames",
            });
        }
        Ok(t.sum_access_delay_secs() / t.delivered_frames as f64)
    }

    /// Mean retransmissions per frame that left the MAC (delivered or dropped).
    pub fn retransmission_attempts(&self, scope: Scope) -> Result<f64> {
        let t = self.scoped(scope)?;
        let completed = t.delivered_frames + t.dropped_frames;
        if completed == 0 {
            return Err(Error::Undefined {
                metric: "retransmission_attempts",
                scope: scope.to_string(),
                reason: "no frame completed service",
            });
        }
        Ok(t.sum_retransmissions as f64 / completed as f64)
    }
}

pub const CSV_HEADER: &str = "scenario_id,policy,seed,scope,normalized_throughput,mean_delay_s,retx_per_frame,generated,delivered,dropped,collisions";

/// Renders `x` with six significant digits, trailing zeros removed.
pub fn format_sig6(x: f64) -> String {
    if !x.is_finite() {
        return String::new();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{x:.5e}");
    let rounded: f64 = sci.parse().expect("formatted float parses");
    let exp = rounded.abs().log10().floor() as i32;
    if !(-5..=15).contains(&exp) {
        return sci;
    }
    let x = rounded;
    let decimals = (5 - exp).max(0) as usize;
    let mut s = format!("{x:.decimals$}");
    if s.contains('.') {
        let trimmed = s.trim_end_matches('0').trim_end_matches('.').len();
        s.truncate(trimmed);
    }
    s
}

fn metric_cell(v: Result<f64>) -> String {
    v.map(format_sig6).unwrap_or_default()
}

/// Writes one row per (ledger, scope), sorted by scenario, policy, seed and
/// scope label. Undefined metrics are written as empty cells.
pub fn export_csv<W: Write>(ledgers: &[MetricsLedger], mut out: W) -> Result<()> {
    let mut rows: Vec<(&str, &str, u64, &str, String)> = Vec::new();
    for ledger in ledgers {
        let info = &ledger.info;
        for scope in ledger.scopes() {
            let t = ledger.tally(scope).expect("listed scope");
            let line = format!(
                "{},{},{},{},{},{},{},{},{},{},{}",
                info.scenario_id,
                info.policy,
                info.seed,
                scope,
                metric_cell(ledger.normalized_throughput(scope)),
                metric_cell(ledger.mean_access_delay(scope)),
                metric_cell(ledger.retransmission_attempts(scope)),
                t.generated_frames,
                t.delivered_frames,
                t.dropped_frames,
                t.collision_events,
            );
            rows.push((
                &info.scenario_id,
                info.policy.as_str(),
                info.seed,
                scope.label(),
                line,
            ));
        }
    }
    rows.sort_by(|a, b| (a.0, a.1, a.2, a.3).cmp(&(b.0, b.1, b.2, b.3)));
    writeln!(out, "{CSV_HEADER}")?;
    for row in rows {
        writeln!(out, "{}", row.4)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_csv_file(ledgers: &[MetricsLedger], path: &Path) -> Result<()> {
    let file = File::create(path)?;
    export_csv(ledgers, BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ledger(id: &str, policy: PolicyKind, seed: u64) -> MetricsLedger {
        MetricsLedger::new(
            RunInfo {
                scenario_id: id.into(),
                policy,
                seed,
                duration_s: 10.0,
                warmup_s: 1.0,
            },
            [AccessCategory::Be],
        )
    }

    fn csv(ledgers: &[MetricsLedger]) -> String {
        let mut buf = Vec::new();
        export_csv(ledgers, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn lossless_run_is_fully_normalized() {
        let mut l = ledger("a", PolicyKind::Edca, 1);
        for _ in 0..10 {
            l.record_generated(AccessCategory::Be, 800);
            l.record_delivery(AccessCategory::Be, 800, 1000, 0);
        }
        assert_eq!(l.normalized_throughput(Scope::Global).unwrap(), 1.0);
        assert_eq!(l.retransmission_attempts(Scope::Global).unwrap(), 0.0);
        assert!(l.is_consistent());
    }

    #[test]
    fn single_sample_delay() {
        let mut l = ledger("a", PolicyKind::Edca, 1);
        l.record_generated(AccessCategory::Be, 800);
        l.record_delivery(AccessCategory::Be, 800, 2000, 0);
        let d = l.mean_access_delay(Scope::Ac(AccessCategory::Be)).unwrap();
        assert!((d - 0.002).abs() < 1e-12);
    }

    #[test]
    fn retransmissions_per_completed_frame() {
        let mut l = ledger("a", PolicyKind::Edca, 1);
        l.record_generated(AccessCategory::Be, 800);
        l.record_delivery(AccessCategory::Be, 800, 10, 0);
        l.record_generated(AccessCategory::Be, 800);
        l.record_delivery(AccessCategory::Be, 800, 10, 2);
        assert_eq!(l.retransmission_attempts(Scope::Global).unwrap(), 1.0);
    }

    #[test]
    fn undefined_metrics() {
        let l = ledger("a", PolicyKind::Edca, 1);
        assert!(matches!(
            l.normalized_throughput(Scope::Global),
            Err(Error::Undefined { .. })
        ));
        assert!(l.mean_access_delay(Scope::Global).is_err());
        assert!(l.retransmission_attempts(Scope::Global).is_err());
        assert!(l
            .normalized_throughput(Scope::Ac(AccessCategory::Vo))
            .is_err());
    }

    #[test]
    fn conservation_detects_missing_frames() {
        let mut l = ledger("a", PolicyKind::Edca, 1);
        l.record_generated(AccessCategory::Be, 800);
        assert!(!l.is_consistent());
        l.record_queued(AccessCategory::Be, 1);
        assert!(l.is_consistent());
    }

    #[test]
    fn sig6_formatting() {
        assert_eq!(format_sig6(0.0), "0");
        assert_eq!(format_sig6(1.0), "1");
        assert_eq!(format_sig6(0.828831234), "0.828831");
        assert_eq!(format_sig6(12.5640001), "12.564");
        assert_eq!(format_sig6(0.0043731234), "0.00437312");
        assert_eq!(format_sig6(123456789.0), "123457000");
        assert_eq!(format_sig6(9.9999996), "10");
        assert_eq!(format_sig6(1.5e-9), "1.50000e-9");
        assert_eq!(format_sig6(f64::NAN), "");
    }

    #[test]
    fn csv_rows_and_order() {
        let mut a = ledger("b", PolicyKind::Qcaaae, 2);
        a.record_generated(AccessCategory::Be, 800);
        a.record_delivery(AccessCategory::Be, 800, 500, 1);
        let b = ledger("a", PolicyKind::Edca, 1);
        let text = csv(&[a.clone(), b.clone()]);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1], "a,edca,1,BE,,,,0,0,0,0");
        assert_eq!(lines[2], "a,edca,1,global,,,,0,0,0,0");
        assert_eq!(lines[3], "b,qcaaae,2,BE,1,0.0005,1,1,1,0,0");
        assert_eq!(text, csv(&[b, a]));
    }

    #[test]
    fn empty_export_is_header_only() {
        assert_eq!(csv(&[]), format!("{CSV_HEADER}\n"));
    }
}
