//! The forgetting engine: periodic retention sweeps, pending-forget
//! transitions, soft deletion, compression, and edge weakening.
//!
//! A sweep never hard-deletes anything and never moves a unit toward a more
//! active state; re-activation happens only through retrieval access (or
//! explicit restore). Units tagged "pinned" are exempt.

use serde::{Deserialize, Serialize};

use crate::activation::{classify_state, ActivationParams, ActivationState};
use crate::config::ForgettingConfig;
use crate::error::Result;
use crate::graphstore::{EdgeValidity, Space};
use crate::types::{EdgeId, LifecycleState, Timestamp, UnitId};

/// Outcome of one sweep.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ForgetReport {
    pub to_pending: Vec<UnitId>,
    pub to_soft_deleted: Vec<UnitId>,
    pub to_compressed: Vec<UnitId>,
    pub edges_weakened: Vec<EdgeId>,
    pub edges_failed: Vec<EdgeId>,
}

impl ForgetReport {
    pub fn is_noop(&self) -> bool {
        self.to_pending.is_empty()
            && self.to_soft_deleted.is_empty()
            && self.to_compressed.is_empty()
            && self.edges_weakened.is_empty()
            && self.edges_failed.is_empty()
    }
}

/// One retention sweep over a space at `now`.
///
/// Active units whose retention falls below the forget threshold enter
/// pending-forget. Pending units older than `grace` either compress (when
/// corroborated by provenance or emotionally salient) or soft-delete. Edges
/// whose source units have all left Active are halved in strength
/// (weakened) and fail below the configured floor.
pub fn sweep(
    space: &mut Space,
    now: Timestamp,
    params: &ActivationParams,
    config: &ForgettingConfig,
) -> Result<ForgetReport> {
    let mut report = ForgetReport::default();

    // Pass 1: Active -> PendingForget on low retention.
    let active: Vec<UnitId> = space
        .units()
        .filter(|u| u.state == LifecycleState::Active && !u.is_pinned())
        .map(|u| u.id)
        .collect();
    for id in active {
        let unit = space.unit(id).expect("listed above");
        let r = unit.trace.retention(now, params);
        if classify_state(r, params) == ActivationState::PendingForget {
            space.unit_mut(id).expect("exists").state = LifecycleState::PendingForget;
            space.set_pending(id, now);
            report.to_pending.push(id);
        }
    }

    // Pass 2: retire pending units past the grace period. Units that
    // entered pending in pass 1 start their grace now.
    let pending: Vec<UnitId> = space
        .units()
        .filter(|u| u.state == LifecycleState::PendingForget && !u.is_pinned())
        .map(|u| u.id)
        .collect();
    for id in pending {
        let since = space.pending_since(id).unwrap_or(now);
        if now.since(since) <= config.grace_secs {
            continue;
        }
        let (corroborated, key, created) = {
            let unit = space.unit(id).expect("listed above");
            (
                unit.provenance.len() > 1 || unit.emotion_weight >= 0.5,
                unit.fact.as_ref().map(|f| f.key.clone()),
                unit.created_at,
            )
        };
        if corroborated {
            space.retire_unit(id, LifecycleState::Compressed);
            let unit = space.unit_mut(id).expect("exists");
            let key = key.unwrap_or_else(|| {
                unit.content
                    .split_whitespace()
                    .take(2)
                    .collect::<Vec<_>>()
                    .join(" ")
            });
            unit.content = format!("{key} @{created}");
            report.to_compressed.push(id);
        } else {
            space.retire_unit(id, LifecycleState::SoftDeleted);
            report.to_soft_deleted.push(id);
        }
    }

    // Pass 3: weaken edges whose source units all left Active.
    let edge_ids: Vec<EdgeId> = space
        .edges()
        .filter(|e| e.is_traversable())
        .filter(|e| {
            e.source_units.iter().all(|u| {
                space
                    .unit(*u)
                    .map(|unit| unit.state != LifecycleState::Active)
                    .unwrap_or(true)
            })
        })
        .map(|e| e.id)
        .collect();
    for id in edge_ids {
        let edge = space.edge_mut(id).expect("listed above");
        edge.strength *= 0.5;
        if edge.strength < config.edge_fail_strength {
            edge.fail();
            report.edges_failed.push(id);
        } else {
            edge.validity = EdgeValidity::Weakened;
            report.edges_weakened.push(id);
        }
    }

    Ok(report)
}

/// Elapsed time at which a once-created, never-accessed unit crosses the
/// forget threshold: the closed-form inversion of the retention curve with
/// unit accumulated strength.
pub fn virgin_forget_time(params: &ActivationParams) -> f64 {
    ((1.0 - params.offset) / (params.forget_threshold - params.offset)).ln() / params.lambda
}
