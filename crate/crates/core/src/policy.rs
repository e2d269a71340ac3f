//! EDCA parameter policies.
//!
//! Two policies produce the per-category `(AIFSN, CWmin, CWmax)` triples that
//! the access point advertises in its beacons:
//!
//! * [`StaticEdca`] always returns the fixed default table.
//! * [`Qcaaae`] tracks how many associated stations requested each access
//!   category, reassigns AIFSN according to which categories are active and
//!   sizes each contention window from its station count.
//!
//! All arithmetic on contention windows is exact integer arithmetic.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest contention window the PHY allows.
pub const PHY_CW_MAX: u16 = 1023;

/// EDCA access category. Ordering follows priority: `Vo > Vi > Be > Bk`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AccessCategory {
    #[serde(rename = "BK")]
    Bk,
    #[serde(rename = "BE")]
    Be,
    #[serde(rename = "VI")]
    Vi,
    #[serde(rename = "VO")]
    Vo,
}

impl AccessCategory {
    /// All categories, highest priority first.
    pub const ALL: [AccessCategory; 4] = [Self::Vo, Self::Vi, Self::Be, Self::Bk];

    /// Dense index used for per-category arrays (`Vo = 0` .. `Bk = 3`).
    pub const fn index(self) -> usize {
        match self {
            Self::Vo => 0,
            Self::Vi => 1,
            Self::Be => 2,
            Self::Bk => 3,
        }
    }

    pub const fn as_str(self) -> &'static str {
        match self {
            Self::Vo => "VO",
            Self::Vi => "VI",
            Self::Be => "BE",
            Self::Bk => "BK",
        }
    }
}

impl fmt::Display for AccessCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AccessCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "VO" => Ok(Self::Vo),
            "VI" => Ok(Self::Vi),
            "BE" => Ok(Self::Be),
            "BK" => Ok(Self::Bk),
            _ => Err(Error::Config(format!("unknown access category `{s}`"))),
        }
    }
}

/// AC flags of the QoS capability field a station sends in its
/// (re)association request.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QosCapabilityFlags {
    pub vo: bool,
    pub vi: bool,
    pub be: bool,
    pub bk: bool,
}

impl QosCapabilityFlags {
    const VO_BIT: u8 = 1 << 0;
    const VI_BIT: u8 = 1 << 1;
    const BK_BIT: u8 = 1 << 2;
    const BE_BIT: u8 = 1 << 3;

    /// Flags for a station carrying a single traffic class.
    pub fn for_category(ac: AccessCategory) -> Self {
        let mut flags = Self::default();
        flags.set(ac, true);
        flags
    }

    /// Decodes bits B0..B3 of a non-AP station's QoS info octet
    /// (B0 = VO, B1 = VI, B2 = BK, B3 = BE). Upper bits are ignored.
    pub fn from_qos_info(octet: u8) -> Self {
        Self {
            vo: octet & Self::VO_BIT != 0,
            vi: octet & Self::VI_BIT != 0,
            bk: octet & Self::BK_BIT != 0,
            be: octet & Self::BE_BIT != 0,
        }
    }

    pub fn to_qos_info(self) -> u8 {
        let mut octet = 0;
        if self.vo {
            octet |= Self::VO_BIT;
        }
        if self.vi {
            octet |= Self::VI_BIT;
        }
        if self.bk {
            octet |= Self::BK_BIT;
        }
        if self.be {
            octet |= Self::BE_BIT;
        }
        octet
    }

    pub fn get(self, ac: AccessCategory) -> bool {
        match ac {
            AccessCategory::Vo => self.vo,
            AccessCategory::Vi => self.vi,
            AccessCategory::Be => self.be,
            AccessCategory::Bk => self.bk,
        }
    }

    pub fn set(&mut self, ac: AccessCategory, value: bool) {
        match ac {
            AccessCategory::Vo => self.vo = value,
            AccessCategory::Vi => self.vi = value,
            AccessCategory::Be => self.be = value,
            AccessCategory::Bk => self.bk = value,
        }
    }

    pub fn any(self) -> bool {
        self.vo || self.vi || self.be || self.bk
    }
}

/// Number of associated stations per adapted category.
///
/// BK is never counted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AcCounters {
    pub n_vo: u32,
    pub n_vi: u32,
    pub n_be: u32,
}

impl AcCounters {
    pub const fn new(n_vo: u32, n_vi: u32, n_be: u32) -> Self {
        Self { n_vo, n_vi, n_be }
    }

    /// Station count for `ac`; always 0 for BK.
    pub fn count(&self, ac: AccessCategory) -> u32 {
        match ac {
            AccessCategory::Vo => self.n_vo,
            AccessCategory::Vi => self.n_vi,
            AccessCategory::Be => self.n_be,
            AccessCategory::Bk => 0,
        }
    }

    fn slot_mut(&mut self, ac: AccessCategory) -> Option<&mut u32> {
        match ac {
            AccessCategory::Vo => Some(&mut self.n_vo),
            AccessCategory::Vi => Some(&mut self.n_vi),
            AccessCategory::Be => Some(&mut self.n_be),
            AccessCategory::Bk => None,
        }
    }

    /// Counts a (re)association request: every set flag increments its counter.
    pub fn register_association(mut self, flags: QosCapabilityFlags) -> Self {
        for ac in AccessCategory::ALL {
            if flags.get(ac) {
                if let Some(n) = self.slot_mut(ac) {
                    *n += 1;
                }
            }
        }
        self
    }

    /// Counts a disassociation: every set flag decrements its counter.
    ///
    /// Fails without modifying anything if any flagged counter is already 0.
    pub fn register_disassociation(self, flags: QosCapabilityFlags) -> Result<Self> {
        let mut next = self;
        for ac in AccessCategory::ALL {
            if !flags.get(ac) {
                continue;
            }
            if let Some(n) = next.slot_mut(ac) {
                *n = n.checked_sub(1).ok_or(Error::Underflow(ac))?;
            }
        }
        Ok(next)
    }

    pub fn activity_status(&self) -> ActivityStatus {
        ActivityStatus {
            vo: self.n_vo > 0,
            vi: self.n_vi > 0,
            be: self.n_be > 0,
        }
    }
}

/// Which adapted categories currently have at least one associated station.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActivityStatus {
    pub vo: bool,
    pub vi: bool,
    pub be: bool,
}

impl ActivityStatus {
    pub const fn new(vo: bool, vi: bool, be: bool) -> Self {
        Self { vo, vi, be }
    }

    pub fn is_active(&self, ac: AccessCategory) -> bool {
        match ac {
            AccessCategory::Vo => self.vo,
            AccessCategory::Vi => self.vi,
            AccessCategory::Be => self.be,
            AccessCategory::Bk => false,
        }
    }
}

/// Contention parameters of a single access category.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AcParams {
    pub aifsn: u8,
    pub cw_min: u16,
    pub cw_max: u16,
}

impl AcParams {
    pub const fn new(aifsn: u8, cw_min: u16, cw_max: u16) -> Self {
        Self {
            aifsn,
            cw_min,
            cw_max,
        }
    }

    /// Checks `aifsn >= 2`, `1 <= cw_min <= cw_max <= 1023` and that both
    /// windows have the form `2^k - 1`.
    pub fn is_valid(&self) -> bool {
        let pow2_minus_one = |cw: u16| (cw as u32 + 1).is_power_of_two();
        self.aifsn >= 2
            && self.cw_min >= 1
            && self.cw_min <= self.cw_max
            && self.cw_max <= PHY_CW_MAX
            && pow2_minus_one(self.cw_min)
            && pow2_minus_one(self.cw_max)
    }

    /// Clamps a contention window into `[cw_min, cw_max]`.
    pub fn clamp_cw(&self, cw: u16) -> u16 {
        cw.clamp(self.cw_min, self.cw_max)
    }
}

/// Default per-category parameters.
pub const fn default_params(ac: AccessCategory) -> AcParams {
    match ac {
        AccessCategory::Vo => AcParams::new(2, 3, 7),
        AccessCategory::Vi => AcParams::new(2, 7, 15),
        AccessCategory::Be => AcParams::new(3, 15, 1023),
        AccessCategory::Bk => AcParams::new(7, 15, 1023),
    }
}

/// The parameter set an access point advertises, one entry per category,
/// tagged with a revision number that grows whenever any entry changes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EdcaParamSet {
    params: [AcParams; 4],
    pub epoch: u64,
}

impl EdcaParamSet {
    pub fn get(&self, ac: AccessCategory) -> AcParams {
        self.params[ac.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (AccessCategory, AcParams)> + '_ {
        AccessCategory::ALL.into_iter().map(|ac| (ac, self.get(ac)))
    }

    /// True when both sets carry identical per-category parameters,
    /// regardless of epoch.
    pub fn same_params(&self, other: &EdcaParamSet) -> bool {
        self.params == other.params
    }
}

/// The fixed default parameter table, epoch 0.
pub fn static_edca_params() -> EdcaParamSet {
    EdcaParamSet {
        params: AccessCategory::ALL.map(default_params),
        epoch: 0,
    }
}

/// Smallest `k >= 0` with `2^k >= x`, i.e. `ceil(log2(x))` for `x >= 1`.
fn ceil_log2(x: u64) -> u32 {
    debug_assert!(x >= 1);
    x.next_power_of_two().trailing_zeros()
}

/// Contention window bounds for an access category with `n_ac` stations.
///
/// `cw_min = 2^ceil(log2(n/2)) - 1`, raised to at least 1, and
/// `cw_max = min(2^ceil(log2(2n)) - 1, 1023)`.
pub fn compute_cw(n_ac: u64) -> Result<(u16, u16)> {
    if n_ac == 0 {
        return Err(Error::Domain(n_ac));
    }
    // 2^ceil(log2(n/2)) for n >= 2 equals 2^ceil(log2(ceil(n/2))); for n = 1
    // the raw formula is negative and the clamp below takes over.
    let half_up = n_ac.div_ceil(2);
    let cw_min = (1u64 << ceil_log2(half_up)).saturating_sub(1).max(1);
    let cw_max = ((1u64 << ceil_log2(2 * n_ac)) - 1).min(PHY_CW_MAX as u64);
    let cw_min = cw_min.min(cw_max);
    Ok((cw_min as u16, cw_max as u16))
}

/// AIFSN for each active category, chosen by which categories are active.
///
/// Higher-priority categories keep the smaller AIFSN; an absent category
/// hands its value down to the next active one. All-inactive yields an
/// empty map.
pub fn compute_aifsn(active: ActivityStatus) -> BTreeMap<AccessCategory, u8> {
    let mut out = BTreeMap::new();
    let mut next = 2u8;
    for ac in [AccessCategory::Vo, AccessCategory::Vi, AccessCategory::Be] {
        if active.is_active(ac) {
            out.insert(ac, next);
            next += 1;
        }
    }
    out
}

/// Rebuilds the advertised parameter set from the current station counts.
///
/// Active categories get adapted AIFSN and windows; inactive ones and BK
/// keep their defaults. The epoch advances only if some entry changed.
pub fn build_param_set(counters: &AcCounters, previous: &EdcaParamSet) -> EdcaParamSet {
    let aifsn = compute_aifsn(counters.activity_status());
    let params = AccessCategory::ALL.map(|ac| match aifsn.get(&ac) {
        Some(&a) => {
            // Active implies a non-zero count.
            let (cw_min, cw_max) =
                compute_cw(counters.count(ac) as u64).expect("active category has stations");
            AcParams::new(a, cw_min, cw_max)
        }
        None => default_params(ac),
    });
    let epoch = if params == previous.params {
        previous.epoch
    } else {
        previous.epoch + 1
    };
    EdcaParamSet { params, epoch }
}

/// Which parameter policy an access point runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Edca,
    Qcaaae,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 2] = [PolicyKind::Edca, PolicyKind::Qcaaae];

    pub const fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Edca => "edca",
            PolicyKind::Qcaaae => "qcaaae",
        }
    }

    pub fn policy(self) -> &'static dyn EdcaPolicy {
        match self {
            PolicyKind::Edca => &StaticEdca,
            PolicyKind::Qcaaae => &Qcaaae,
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "edca" | "static" => Ok(PolicyKind::Edca),
            "qcaaae" => Ok(PolicyKind::Qcaaae),
            _ => Err(Error::Config(format!("unknown policy `{s}`"))),
        }
    }
}

/// Computes the parameter set the access point should advertise next.
pub trait EdcaPolicy: Send + Sync {
    fn kind(&self) -> PolicyKind;

    fn param_set(&self, counters: &AcCounters, previous: &EdcaParamSet) -> EdcaParamSet;
}

/// Fixed default parameters regardless of membership.
#[derive(Clone, Copy, Debug, Default)]
pub struct StaticEdca;

impl EdcaPolicy for StaticEdca {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Edca
    }

    fn param_set(&self, _counters: &AcCounters, _previous: &EdcaParamSet) -> EdcaParamSet {
        static_edca_params()
    }
}

/// Station-count and activity-aware adaptation.
#[derive(Clone, Copy, Debug, Default)]
pub struct Qcaaae;

impl EdcaPolicy for Qcaaae {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Qcaaae
    }

    fn param_set(&self, counters: &AcCounters, previous: &EdcaParamSet) -> EdcaParamSet {
        build_param_set(counters, previous)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn flags(vo: bool, vi: bool, be: bool) -> QosCapabilityFlags {
        QosCapabilityFlags {
            vo,
            vi,
            be,
            bk: false,
        }
    }

    /// Reference evaluation via the smallest `k >= -1` with `2^k >= x / 2`,
    /// compared as `2^(k+1) >= x` to stay in integers.
    fn reference_cw(n: u64) -> (u16, u16) {
        let pow_at_least_half = |x: u64| -> i64 {
            let mut k: i64 = -1;
            while (1u128 << (k + 1)) < x as u128 {
                k += 1;
            }
            if k < 0 {
                0 // 2^-1 - 1 is negative
            } else {
                (1i64 << k) - 1
            }
        };
        let cw_max = pow_at_least_half(4 * n).min(1023);
        let cw_min = pow_at_least_half(n).clamp(1, cw_max);
        (cw_min as u16, cw_max as u16)
    }

    #[test]
    fn association_increments_flagged_counters() {
        let c = AcCounters::default().register_association(flags(true, false, true));
        assert_eq!(c, AcCounters::new(1, 0, 1));

        let c = AcCounters::new(5, 2, 9).register_association(QosCapabilityFlags::default());
        assert_eq!(c, AcCounters::new(5, 2, 9));

        let mut c = AcCounters::default();
        for _ in 0..30 {
            c = c.register_association(QosCapabilityFlags::for_category(AccessCategory::Vo));
        }
        assert_eq!(c.n_vo, 30);
    }

    #[test]
    fn bk_flag_is_ignored() {
        let c = AcCounters::new(1, 1, 1)
            .register_association(QosCapabilityFlags::for_category(AccessCategory::Bk));
        assert_eq!(c, AcCounters::new(1, 1, 1));
        let c = AcCounters::default()
            .register_disassociation(QosCapabilityFlags::for_category(AccessCategory::Bk))
            .unwrap();
        assert_eq!(c, AcCounters::default());
    }

    #[test]
    fn disassociation() {
        let c = AcCounters::new(1, 0, 1)
            .register_disassociation(flags(true, false, true))
            .unwrap();
        assert_eq!(c, AcCounters::default());

        let c = AcCounters::new(3, 3, 3)
            .register_disassociation(flags(false, true, false))
            .unwrap();
        assert_eq!(c, AcCounters::new(3, 2, 3));

        let err = AcCounters::default()
            .register_disassociation(flags(true, false, false))
            .unwrap_err();
        assert!(matches!(err, Error::Underflow(AccessCategory::Vo)));
    }

    #[test]
    fn failed_disassociation_leaves_counters_untouched() {
        let before = AcCounters::new(2, 0, 0);
        assert!(before
            .register_disassociation(flags(true, true, false))
            .is_err());
        assert_eq!(before, AcCounters::new(2, 0, 0));
    }

    #[test]
    fn qos_info_bit_layout() {
        let f = QosCapabilityFlags::from_qos_info(0b0000_1001);
        assert_eq!(f, flags(true, false, true));
        let f = QosCapabilityFlags::from_qos_info(0b1111_0100);
        assert!(f.bk && !f.vo && !f.vi && !f.be);
        for octet in 0u8..16 {
            assert_eq!(
                QosCapabilityFlags::from_qos_info(octet).to_qos_info(),
                octet
            );
        }
    }

    #[test]
    fn activity() {
        assert_eq!(
            AcCounters::default().activity_status(),
            ActivityStatus::new(false, false, false)
        );
        assert_eq!(
            AcCounters::new(1, 0, 512).activity_status(),
            ActivityStatus::new(true, false, true)
        );
        assert_eq!(
            AcCounters::new(15, 15, 128).activity_status(),
            ActivityStatus::new(true, true, true)
        );
    }

    #[test]
    fn aifsn_examples() {
        let m = compute_aifsn(ActivityStatus::new(true, true, true));
        assert_eq!(
            m,
            BTreeMap::from([
                (AccessCategory::Vo, 2),
                (AccessCategory::Vi, 3),
                (AccessCategory::Be, 4)
            ])
        );
        let m = compute_aifsn(ActivityStatus::new(false, false, true));
        assert_eq!(m, BTreeMap::from([(AccessCategory::Be, 2)]));
        let m = compute_aifsn(ActivityStatus::new(true, false, true));
        assert_eq!(
            m,
            BTreeMap::from([(AccessCategory::Vo, 2), (AccessCategory::Be, 3)])
        );
        assert!(compute_aifsn(ActivityStatus::default()).is_empty());
    }

    #[test]
    fn cw_examples() {
        assert_eq!(compute_cw(30).unwrap(), (15, 63));
        assert_eq!(compute_cw(512).unwrap(), (255, 1023));
        assert_eq!(compute_cw(2).unwrap(), (1, 3));
        assert_eq!(compute_cw(1).unwrap(), (1, 1));
        assert!(matches!(compute_cw(0), Err(Error::Domain(0))));
    }

    #[test]
    fn cw_matches_reference_on_small_range() {
        for n in 1..5000 {
            assert_eq!(compute_cw(n).unwrap(), reference_cw(n), "n = {n}");
        }
    }

    #[test]
    fn static_table() {
        let p = static_edca_params();
        assert_eq!(p.epoch, 0);
        assert_eq!(p.get(AccessCategory::Vo), AcParams::new(2, 3, 7));
        assert_eq!(p.get(AccessCategory::Vi), AcParams::new(2, 7, 15));
        assert_eq!(p.get(AccessCategory::Be), AcParams::new(3, 15, 1023));
        assert_eq!(p.get(AccessCategory::Bk), AcParams::new(7, 15, 1023));
        assert!(p.iter().all(|(_, a)| a.is_valid()));
    }

    #[test]
    fn param_set_examples() {
        let base = static_edca_params();
        let p = build_param_set(&AcCounters::new(30, 0, 512), &base);
        assert_eq!(p.get(AccessCategory::Vo), AcParams::new(2, 15, 63));
        assert_eq!(p.get(AccessCategory::Be), AcParams::new(3, 255, 1023));
        assert_eq!(p.get(AccessCategory::Vi), AcParams::new(2, 7, 15));
        assert_eq!(
            p.get(AccessCategory::Bk),
            default_params(AccessCategory::Bk)
        );
        assert_eq!(p.epoch, 1);

        let idle = build_param_set(&AcCounters::default(), &base);
        assert_eq!(idle, base);

        let p = build_param_set(&AcCounters::new(15, 15, 128), &base);
        assert_eq!(p.get(AccessCategory::Vo).aifsn, 2);
        assert_eq!(p.get(AccessCategory::Vi).aifsn, 3);
        assert_eq!(p.get(AccessCategory::Be).aifsn, 4);
    }

    #[test]
    fn departure_of_last_station_restores_default() {
        let base = static_edca_params();
        let with_vi = build_param_set(&AcCounters::new(0, 3, 10), &base);
        assert_ne!(
            with_vi.get(AccessCategory::Vi),
            default_params(AccessCategory::Vi)
        );
        let without = build_param_set(&AcCounters::new(0, 0, 10), &with_vi);
        assert_eq!(
            without.get(AccessCategory::Vi),
            default_params(AccessCategory::Vi)
        );
        assert_eq!(without.epoch, with_vi.epoch + 1);
    }

    #[test]
    fn policy_names_round_trip() {
        for kind in PolicyKind::ALL {
            assert_eq!(kind.as_str().parse::<PolicyKind>().unwrap(), kind);
            assert_eq!(kind.policy().kind(), kind);
        }
        assert!("hcca".parse::<PolicyKind>().is_err());
    }

    proptest! {
        #[test]
        fn cw_shape(n in 1u64..=1_000_000) {
            let (lo, hi) = compute_cw(n).unwrap();
            prop_assert!((lo as u32 + 1).is_power_of_two());
            prop_assert!((hi as u32 + 1).is_power_of_two());
            prop_assert!(1 <= lo && lo <= hi && hi <= PHY_CW_MAX);
            prop_assert!(AcParams::new(2, lo, hi).is_valid());
        }

        #[test]
        fn cw_monotone(a in 1u64..=1_000_000, b in 1u64..=1_000_000) {
            let (n1, n2) = (a.min(b), a.max(b));
            let (lo1, hi1) = compute_cw(n1).unwrap();
            let (lo2, hi2) = compute_cw(n2).unwrap();
            prop_assert!(lo1 <= lo2 && hi1 <= hi2);
        }

        #[test]
        fn rebuild_is_idempotent(vo in 0u32..600, vi in 0u32..600, be in 0u32..600) {
            let c = AcCounters::new(vo, vi, be);
            let first = build_param_set(&c, &static_edca_params());
            let second = build_param_set(&c, &first);
            prop_assert_eq!(first, second);
        }

        #[test]
        fn equal_counts_preserve_priority(n in 1u32..2000) {
            let p = build_param_set(&AcCounters::new(n, n, n), &static_edca_params());
            let a = |ac| p.get(ac).aifsn;
            prop_assert!(a(AccessCategory::Vo) < a(AccessCategory::Vi));
            prop_assert!(a(AccessCategory::Vi) < a(AccessCategory::Be));
        }

        #[test]
        fn epoch_advances_iff_params_change(
            before in (0u32..50, 0u32..50, 0u32..50),
            after in (0u32..50, 0u32..50, 0u32..50),
        ) {
            let prev = build_param_set(
                &AcCounters::new(before.0, before.1, before.2),
                &static_edca_params(),
            );
            let next = build_param_set(&AcCounters::new(after.0, after.1, after.2), &prev);
            if next.same_params(&prev) {
                prop_assert_eq!(next.epoch, prev.epoch);
            } else {
                prop_assert_eq!(next.epoch, prev.epoch + 1);
            }
        }
    }
}
