use crate::env::Snapshot;
use crate::trainer::{ComponentStats, Trajectory};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub step: usize,
    #[serde(flatten)]
    pub snapshot: Snapshot,
}

/// What a critic sees of one rollout: API-observable snapshots at every step
/// and the outcome. Reward values are deliberately absent; only the
/// aggregate statistics block is included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutTranscript {
    pub task: String,
    pub seed: u64,
    /// One record per pre-step state, then the final state at index `length`.
    pub records: Vec<TranscriptRecord>,
    pub success: bool,
    pub length: usize,
    pub stats: ComponentStats,
}

fn fmt_point(p: [f64; 2]) -> String {
    format!("({:.3}, {:.3})", p[0], p[1])
}

impl RolloutTranscript {
    pub fn from_trajectory(task: &str, traj: &Trajectory, stats: &ComponentStats) -> Self {
        let mut records: Vec<TranscriptRecord> = traj
            .steps
            .iter()
            .enumerate()
            .map(|(i, s)| TranscriptRecord { step: i, snapshot: s.snapshot.clone() })
            .collect();
        records.push(TranscriptRecord { step: traj.length, snapshot: traj.final_snapshot.clone() });
        Self {
            task: task.to_string(),
            seed: traj.seed,
            records,
            success: traj.success,
            length: traj.length,
            stats: stats.clone(),
        }
    }

    pub fn first(&self) -> &Snapshot {
        &self.records[0].snapshot
    }

    pub fn last(&self) -> &Snapshot {
        &self.records[self.records.len() - 1].snapshot
    }

    pub fn furthest_stage(&self) -> usize {
        self.records.iter().map(|r| r.snapshot.stage).max().unwrap_or(0)
    }

    /// Line-per-step text for prompts.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let outcome = if self.success { "success" } else { "failure" };
        let _ = writeln!(out, "Rollout seed {}: {outcome} after {} steps", self.seed, self.length);
        for r in &self.records {
            let s = &r.snapshot;
            let _ = write!(out, "  t={:<3} stage={} ee={}", r.step, s.stage, fmt_point(s.ee));
            for (name, p) in &s.objects {
                let _ = write!(out, " {name}={}", fmt_point(*p));
            }
            for (name, v) in &s.joints {
                let _ = write!(out, " {name}={v:.3}");
            }
            for (name, g) in &s.grasped {
                if *g {
                    let _ = write!(out, " holding={name}");
                }
            }
            let _ = writeln!(out, " goal_distance={:.3}", s.goal_distance);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Hinge1d;
    use crate::trainer::{collect_stats, rollout, Policy};

    #[test]
    fn transcript_follows_trajectory_without_rewards() {
        let env = Hinge1d::new();
        let p = Policy::with_params(&env, vec![0.0, 1.0]).unwrap();
        let t = rollout(&p, &env, None, 3, 40).unwrap();
        let stats = collect_stats(std::slice::from_ref(&t)).unwrap();
        let tr = RolloutTranscript::from_trajectory("open_lid", &t, &stats);
        assert_eq!(tr.records.len(), t.length + 1);
        assert_eq!(tr.records.last().unwrap().step, 8);
        assert_eq!(tr.last(), &t.final_snapshot);
        assert!(tr.success);
        assert_eq!(tr, RolloutTranscript::from_trajectory("open_lid", &t, &stats));
        let json = serde_json::to_string(&tr).unwrap();
        assert!(!json.contains("reward") && !json.contains("total"));
        assert!(tr.render().starts_with("Rollout seed 3: success after 8 steps"));
    }
}
