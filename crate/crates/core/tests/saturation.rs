//! Saturated best-effort cells against a fixed-point saturation model with a
//! finite retry limit.

use edca_core::kernel;
use edca_core::metrics::Scope;
use edca_core::policy::{compute_cw, default_params, AccessCategory, PolicyKind};
use edca_core::runner::{ScenarioSpec, StationGroup};

const RETRY_LIMIT: i32 = 7;

/// Attempt probability per slot for a station whose window sequence starts
/// at `cw_min` and grows as `2cw + 1` up to `cw_max`, given the conditional
/// collision probability `p`.
fn attempt_probability(p: f64, cw_min: u16, cw_max: u16) -> f64 {
    let mut cw = cw_min as f64;
    let (mut attempts, mut slots) = (0.0, 0.0);
    for stage in 0..=RETRY_LIMIT {
        let reach = p.powi(stage);
        attempts += reach;
        slots += reach * (cw + 2.0) / 2.0;
        cw = (2.0 * cw + 1.0).min(cw_max as f64);
    }
    attempts / slots
}

/// Conditional collision probability solving the fixed point for `n`
/// stations.
fn collision_probability(n: u32, cw_min: u16, cw_max: u16) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let p = 0.5 * (lo + hi);
        let tau = attempt_probability(p, cw_min, cw_max);
        if p - (1.0 - (1.0 - tau).powi(n as i32 - 1)) > 0.0 {
            hi = p;
        } else {
            lo = p;
        }
    }
    0.5 * (lo + hi)
}

fn simulated_throughput(n: u32, policy: PolicyKind) -> f64 {
    let spec = ScenarioSpec::new(
        format!("{n}BE"),
        vec![StationGroup::saturated(AccessCategory::Be, n).unwrap()],
    )
    .with_duration(4.0, 1.0);
    let runs: Vec<f64> = (1..=2)
        .map(|seed| {
            kernel::run(&spec, policy, seed)
                .unwrap()
                .normalized_throughput(Scope::Global)
                .unwrap()
        })
        .collect();
    runs.iter().sum::<f64>() / runs.len() as f64
}

fn check(n: u32, policy: PolicyKind) {
    let (cw_min, cw_max) = match policy {
        PolicyKind::Edca => {
            let d = default_params(AccessCategory::Be);
            (d.cw_min, d.cw_max)
        }
        PolicyKind::Qcaaae => compute_cw(n as u64).unwrap(),
    };
    let p = collision_probability(n, cw_min, cw_max);
    let predicted = 1.0 - p.powi(RETRY_LIMIT + 1);
    let simulated = simulated_throughput(n, policy);
    assert!(
        (simulated - predicted).abs() < 0.02,
        "{n} stations under {policy}: simulated {simulated:.4}, model {predicted:.4} (p = {p:.3})"
    );
}

#[test]
fn static_windows_match_model() {
    for n in [32, 128, 256] {
        check(n, PolicyKind::Edca);
    }
}

#[test]
fn adapted_windows_match_model() {
    for n in [32, 128, 256] {
        check(n, PolicyKind::Qcaaae);
    }
}

#[test]
fn model_sanity() {
    // A fixed unit window attempts in 2 of every 3 slots, so the other
    // station is transmitting with that same probability.
    assert!((collision_probability(2, 1, 1) - 2.0 / 3.0).abs() < 1e-9);
    assert!(collision_probability(512, 15, 1023) > collision_probability(64, 15, 1023));
}
