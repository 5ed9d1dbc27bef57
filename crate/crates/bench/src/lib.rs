//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use turnbench::engine::{builtin_task, Battle, TaskSpec};
use turnbench::metrics::HpSnapshot;

pub fn task(task_id: u8) -> Arc<TaskSpec> {
    Arc::new(builtin_task(task_id).expect("shipped task"))
}

/// A battle advanced by `depth` uniformly random legal actions, stopping
/// early if it ends.
pub fn midgame(task_id: u8, seed: u64, depth: usize) -> Battle {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut battle = Battle::new(task(task_id), seed).expect("battle");
    battle.advance().expect("advance");
    for _ in 0..depth {
        let legal = battle.current_legal_actions();
        if legal.is_empty() {
            break;
        }
        let action = legal[rng.gen_range(0..legal.len())];
        battle.apply_action(action).expect("legal action");
        battle.advance().expect("advance");
    }
    battle
}

/// Random reward inputs drawn from the step-reward test grid.
pub fn snapshots(n: usize, seed: u64) -> Vec<(HpSnapshot, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = [0.1, 0.5, 1.0];
    let d = [-0.2, 0.0, 0.2];
    (0..n)
        .map(|_| {
            let snap = HpSnapshot {
                h_hat: std::array::from_fn(|_| h[rng.gen_range(0..3)]),
                dh: std::array::from_fn(|_| d[rng.gen_range(0..3)]),
                dh_prev: std::array::from_fn(|_| d[rng.gen_range(0..3)]),
            };
            (snap, rng.gen())
        })
        .collect()
}
