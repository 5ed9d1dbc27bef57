use serde::{Deserialize, Serialize};

/// Sign with `sign(0) = 0`.
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Normalized team HP at a step and its recent changes, in team-slot order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HpSnapshot {
    pub h_hat: [f64; 4],
    pub dh: [f64; 4],
    pub dh_prev: [f64; 4],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepReward {
    pub r_safety: bool,
    pub r_healing: bool,
    pub r_hp: f64,
    pub r_dmg: f64,
    pub r_t: f64,
}

/// Per-step reward. `r_safety` holds when every component of
/// `h_hat + dh_prev` is non-negative; `r_healing` when any component of `dh`
/// is negative. With either flag set the HP term rewards the signed change,
/// otherwise it rewards distance from half health. The four components are
/// averaged.
pub fn step_reward(snap: &HpSnapshot, d_hat: f64) -> StepReward {
    let eps_sign: [f64; 4] = std::array::from_fn(|i| sign(snap.h_hat[i] + snap.dh_prev[i]));
    let r_safety = eps_sign.iter().all(|s| *s >= 0.0);
    let r_healing = snap.dh.iter().any(|d| sign(*d) < 0.0);
    let total: f64 = if r_safety || r_healing {
        // -s * (-s * dh) collapses to |s| * dh
        (0..4).map(|i| eps_sign[i].abs() * snap.dh[i]).sum()
    } else {
        (0..4).map(|i| -eps_sign[i] * (snap.h_hat[i] - 0.5)).sum()
    };
    let r_hp = total / 4.0;
    StepReward {
        r_safety,
        r_healing,
        r_hp,
        r_dmg: d_hat,
        r_t: 0.5 * r_hp + 0.5 * d_hat,
    }
}

/// Damage normalized into [0, 1].
pub fn normalized_damage(damage: f64, dmg_ref: f64) -> f64 {
    if dmg_ref <= 0.0 || !damage.is_finite() {
        return 0.0;
    }
    (damage / dmg_ref).clamp(0.0, 1.0)
}

/// Maps a raw episode total onto 0..=100 between the calibration bounds.
pub fn episode_reward(total: f64, r_min: f64, r_max: f64) -> f64 {
    if r_max <= r_min {
        return if total >= r_max { 100.0 } else { 0.0 };
    }
    100.0 * ((total - r_min) / (r_max - r_min)).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardRecord {
    pub t: u32,
    pub r_hp: f64,
    pub r_dmg: f64,
    pub r_t: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardTrace {
    pub records: Vec<RewardRecord>,
}

impl RewardTrace {
    pub fn total(&self) -> f64 {
        self.records.iter().map(|r| r.r_t).sum()
    }

    pub fn scaled(&self, r_min: f64, r_max: f64) -> f64 {
        episode_reward(self.total(), r_min, r_max)
    }
}

/// Builds snapshots from successive HP vectors and accumulates the trace.
///
/// The first vector seen is the baseline; `Δĥ` of the step before the first
/// is taken as zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardAccumulator {
    prev_h: [f64; 4],
    prev_dh: [f64; 4],
    dmg_ref: f64,
    trace: RewardTrace,
}

impl RewardAccumulator {
    pub fn new(initial_h: [f64; 4], dmg_ref: f64) -> Self {
        RewardAccumulator {
            prev_h: initial_h,
            prev_dh: [0.0; 4],
            dmg_ref,
            trace: RewardTrace::default(),
        }
    }

    /// Records step `t` given the HP vector after it and the damage it dealt.
    pub fn push(&mut self, h_now: [f64; 4], damage: f64) -> (HpSnapshot, RewardRecord) {
        let mut dh = [0.0; 4];
        for i in 0..4 {
            dh[i] = h_now[i] - self.prev_h[i];
        }
        let snap = HpSnapshot {
            h_hat: h_now,
            dh,
            dh_prev: self.prev_dh,
        };
        let r = step_reward(&snap, normalized_damage(damage, self.dmg_ref));
        let record = RewardRecord {
            t: self.trace.records.len() as u32 + 1,
            r_hp: r.r_hp,
            r_dmg: r.r_dmg,
            r_t: r.r_t,
        };
        self.trace.records.push(record);
        self.prev_h = h_now;
        self.prev_dh = dh;
        (snap, record)
    }

    pub fn trace(&self) -> &RewardTrace {
        &self.trace
    }

    pub fn into_trace(self) -> RewardTrace {
        self.trace
    }
}
