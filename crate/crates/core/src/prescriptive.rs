//! Prescriptive analytics: turn anomalies and AP health into advisory actions.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::descriptive::ApStats;
use crate::detection::Z_EPSILON;
use crate::domain::{
    Action, AnomalyEvent, AnomalyType, ApId, BaselineProfile, DailyAggregate, Metric, RecTarget,
    Recommendation, Severity, Target,
};

/// How the latency and loss bounds combine when flagging an AP.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlagRule {
    /// Both bounds exceeded.
    #[default]
    All,
    /// Either bound exceeded.
    Any,
}

impl std::str::FromStr for FlagRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "all" | "and" => Ok(FlagRule::All),
            "any" | "or" => Ok(FlagRule::Any),
            other => Err(format!("unknown flag rule '{other}' (expected all or any)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrescriptiveConfig {
    pub latency_bound_ms: f64,
    pub loss_bound_pct: f64,
    pub flag_rule: FlagRule,
    /// Band half-width for the overload-day count.
    pub k: f64,
    /// Overloaded days needed before capacity expansion is advised.
    pub capacity_days: usize,
    /// How many of the most-overloaded APs a capacity recommendation names.
    pub capacity_top_aps: usize,
}

impl Default for PrescriptiveConfig {
    fn default() -> Self {
        PrescriptiveConfig {
            latency_bound_ms: 40.0,
            loss_bound_pct: 1.5,
            flag_rule: FlagRule::All,
            k: 3.0,
            capacity_days: 3,
            capacity_top_aps: 3,
        }
    }
}

/// APs whose mean latency and loss exceed the bounds (strictly), combined per
/// `rule`. APs without health samples are never flagged. Sorted by id.
pub fn flag_aps(
    stats: &[ApStats],
    latency_bound_ms: f64,
    loss_bound_pct: f64,
    rule: FlagRule,
) -> Vec<ApId> {
    let mut out: Vec<ApId> = stats
        .iter()
        .filter(|s| {
            let (Some(lat), Some(loss)) = (s.mean_latency_ms, s.mean_loss_pct) else {
                return false;
            };
            let (hot, lossy) = (lat > latency_bound_ms, loss > loss_bound_pct);
            match rule {
                FlagRule::All => hot && lossy,
                FlagRule::Any => hot || lossy,
            }
        })
        .map(|s| s.ap.clone())
        .collect();
    out.sort();
    out.dedup();
    out
}

/// Days whose network overload percentage sits more than `k` standard
/// deviations above its weekday baseline.
pub fn overloaded_days(aggregates: &[DailyAggregate], baseline: &BaselineProfile, k: f64) -> usize {
    aggregates
        .iter()
        .filter(|a| {
            baseline
                .stats(a.day, Metric::OverloadPct)
                .is_some_and(|s| (a.overload_pct - s.mean) / s.std.max(Z_EPSILON) > k)
        })
        .count()
}

/// Network-level load context for capacity planning.
#[derive(Debug, Clone, Copy)]
pub struct LoadContext<'a> {
    pub aggregates: &'a [DailyAggregate],
    pub baseline: &'a BaselineProfile,
}

/// Rule table:
///
/// | trigger | action | target |
/// |---|---|---|
/// | AP over the health bounds | `ChannelReassign`, `LoadRedistribution` | the AP |
/// | `AuthBurst` of severity Medium or more | `AuthPolicyReview` | network |
/// | `DnsAnomaly` or `SimultaneousConnections` | `Segmentation` | network |
/// | `capacity_days` or more overloaded days | `CapacityExpansion` | most-overloaded APs |
///
/// Output is deduplicated by `(target, action)` with linked event ids merged,
/// and sorted by target then action.
pub fn recommend(
    anomalies: &[AnomalyEvent],
    ap_stats: &[ApStats],
    load: Option<LoadContext<'_>>,
    cfg: &PrescriptiveConfig,
) -> Vec<Recommendation> {
    let mut recs: BTreeMap<(RecTarget, Action), (String, BTreeSet<String>)> = BTreeMap::new();
    let mut add = |target: RecTarget,
                   action: Action,
                   rationale: String,
                   links: &mut dyn Iterator<Item = &str>| {
        let entry = recs
            .entry((target, action))
            .or_insert_with(|| (rationale, BTreeSet::new()));
        entry.1.extend(links.map(str::to_string));
    };

    for ap in flag_aps(
        ap_stats,
        cfg.latency_bound_ms,
        cfg.loss_bound_pct,
        cfg.flag_rule,
    ) {
        let s = ap_stats
            .iter()
            .find(|s| s.ap == ap)
            .expect("flagged AP has stats");
        let why = format!(
            "mean latency {:.1} ms and loss {:.2} % against bounds of {} ms and {} %",
            s.mean_latency_ms.unwrap_or_default(),
            s.mean_loss_pct.unwrap_or_default(),
            cfg.latency_bound_ms,
            cfg.loss_bound_pct
        );
        let on_ap = || {
            anomalies
                .iter()
                .filter(|e| e.target == Some(Target::Ap(ap.clone())))
                .map(|e| e.id.as_str())
        };
        add(
            RecTarget::Ap(ap.clone()),
            Action::ChannelReassign,
            why.clone(),
            &mut on_ap(),
        );
        add(
            RecTarget::Ap(ap.clone()),
            Action::LoadRedistribution,
            why,
            &mut on_ap(),
        );
    }

    let auth: Vec<&AnomalyEvent> = anomalies
        .iter()
        .filter(|e| e.kind == AnomalyType::AuthBurst && e.severity >= Severity::Medium)
        .collect();
    if !auth.is_empty() {
        add(
            RecTarget::Network,
            Action::AuthPolicyReview,
            "authentication failure bursts; review lockout and captive-portal policy".into(),
            &mut auth.iter().map(|e| e.id.as_str()),
        );
    }

    let seg: Vec<&AnomalyEvent> = anomalies
        .iter()
        .filter(|e| {
            matches!(
                e.kind,
                AnomalyType::DnsAnomaly | AnomalyType::SimultaneousConnections
            )
        })
        .collect();
    if !seg.is_empty() {
        add(
            RecTarget::Network,
            Action::Segmentation,
            "unusual DNS volume or devices holding many sessions; isolate guest and device segments".into(),
            &mut seg.iter().map(|e| e.id.as_str()),
        );
    }

    if let Some(ctx) = load {
        let days = overloaded_days(ctx.aggregates, ctx.baseline, cfg.k);
        if days >= cfg.capacity_days {
            let overload_ids: Vec<&str> = anomalies
                .iter()
                .filter(|e| e.kind == AnomalyType::ApOverload)
                .map(|e| e.id.as_str())
                .collect();
            let why = format!("overload above baseline on {days} days");
            let mut top: Vec<&ApStats> =
                ap_stats.iter().filter(|s| s.overloaded_days > 0).collect();
            top.sort_by(|a, b| {
                b.overloaded_days
                    .cmp(&a.overloaded_days)
                    .then(a.ap.cmp(&b.ap))
            });
            top.truncate(cfg.capacity_top_aps);
            if top.is_empty() {
                add(
                    RecTarget::Network,
                    Action::CapacityExpansion,
                    why.clone(),
                    &mut overload_ids.iter().copied(),
                );
            }
            for s in top {
                add(
                    RecTarget::Ap(s.ap.clone()),
                    Action::CapacityExpansion,
                    format!("{why}; AP overloaded on {} days", s.overloaded_days),
                    &mut overload_ids.iter().copied(),
                );
            }
        }
    }

    recs.into_iter()
        .map(|((target, action), (rationale, links))| Recommendation {
            target,
            action,
            rationale,
            linked_events: links.into_iter().collect(),
        })
        .collect()
}
