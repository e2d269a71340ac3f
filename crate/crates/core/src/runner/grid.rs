use crate::policy::AccessCategory;
use crate::runner::scenario::{ScenarioSpec, StationGroup};

/// Best-effort population sizes of the comparison grid.
pub const GRID_BE_COUNTS: [u32; 5] = [32, 64, 128, 256, 512];

/// Voice/video mixes added to every best-effort population, as
/// `(voice stations, video stations)`.
pub const GRID_MIXES: [(u32, u32); 8] = [
    (0, 0),
    (5, 0),
    (15, 0),
    (30, 0),
    (0, 5),
    (0, 15),
    (0, 30),
    (15, 15),
];

/// Scenario id for a grid cell, named by its unscaled population.
pub fn grid_id(be: u32, vo: u32, vi: u32, scale: u32) -> String {
    let mut id = format!("{be}BE");
    if vo > 0 {
        id.push_str(&format!("+{vo}VO"));
    }
    if vi > 0 {
        id.push_str(&format!("+{vi}VI"));
    }
    if scale > 1 {
        id.push_str(&format!("/{scale}"));
    }
    id
}

/// The 40-cell comparison grid, mixes outermost. Every population is divided
/// by `scale` (at least one station per present category); all stations
/// are saturated with their category's default payload.
pub fn paper_grid(scale: u32) -> Vec<ScenarioSpec> {
    let scale = scale.max(1);
    let shrink = |n: u32| if n == 0 { 0 } else { (n / scale).max(1) };
    let mut grid = Vec::with_capacity(GRID_MIXES.len() * GRID_BE_COUNTS.len());
    for &(vo, vi) in &GRID_MIXES {
        for &be in &GRID_BE_COUNTS {
            let mut groups =
                vec![StationGroup::saturated(AccessCategory::Be, shrink(be))
                    .expect("BE is supported")];
            if vo > 0 {
                groups.push(
                    StationGroup::saturated(AccessCategory::Vo, shrink(vo))
                        .expect("VO is supported"),
                );
            }
            if vi > 0 {
                groups.push(
                    StationGroup::saturated(AccessCategory::Vi, shrink(vi))
                        .expect("VI is supported"),
                );
            }
            grid.push(ScenarioSpec::new(grid_id(be, vo, vi, scale), groups));
        }
    }
    grid
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn count(spec: &ScenarioSpec, ac: AccessCategory) -> u32 {
        spec.station_groups
            .iter()
            .filter(|g| g.ac == ac)
            .map(|g| g.count)
            .sum()
    }

    #[test]
    fn full_grid() {
        let grid = paper_grid(1);
        assert_eq!(grid.len(), 40);
        let ids: BTreeSet<_> = grid.iter().map(|s| s.scenario_id.clone()).collect();
        assert_eq!(ids.len(), 40);
        let largest = grid.iter().max_by_key(|s| s.total_stations()).unwrap();
        assert_eq!(largest.scenario_id, "512BE+15VO+15VI");
        assert_eq!(largest.total_stations(), 542);
        assert!(grid.iter().all(|s| s.validate().is_ok()));
        assert_eq!(grid[0].duration, 10.0);
        assert_eq!(grid[0].warmup, 1.0);
    }

    #[test]
    fn grid_covers_listed_combinations() {
        let combos: BTreeSet<(u32, u32, u32)> = paper_grid(1)
            .iter()
            .map(|s| {
                (
                    count(s, AccessCategory::Be),
                    count(s, AccessCategory::Vo),
                    count(s, AccessCategory::Vi),
                )
            })
            .collect();
        let mut expected = BTreeSet::new();
        for be in [32, 64, 128, 256, 512] {
            for (vo, vi) in [
                (0, 0),
                (5, 0),
                (15, 0),
                (30, 0),
                (0, 5),
                (0, 15),
                (0, 30),
                (15, 15),
            ] {
                expected.insert((be, vo, vi));
            }
        }
        assert_eq!(combos, expected);
    }

    #[test]
    fn scaled_grid() {
        let grid = paper_grid(16);
        let be: BTreeSet<u32> = grid.iter().map(|s| count(s, AccessCategory::Be)).collect();
        assert_eq!(be, BTreeSet::from([2, 4, 8, 16, 32]));
        assert!(grid
            .iter()
            .all(|s| s.station_groups.iter().all(|g| g.count >= 1)));
        let ids: BTreeSet<_> = grid.iter().map(|s| s.scenario_id.clone()).collect();
        assert_eq!(ids.len(), 40);
    }
}
