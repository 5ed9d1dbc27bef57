use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Ask opportunities per evaluation.
pub const DEFAULT_ASK_OPPORTUNITIES: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AskRecord {
    pub task_id: u8,
    /// 1-based position of the episode within its task.
    pub k: u32,
    pub asked: bool,
    /// Task score `S`; higher is better.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AskLedger {
    pub records: Vec<AskRecord>,
    pub opportunities: u32,
}

impl Default for AskLedger {
    fn default() -> Self {
        AskLedger {
            records: Vec::new(),
            opportunities: DEFAULT_ASK_OPPORTUNITIES,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AskMetrics {
    /// Ask rate in percent.
    pub ar: f64,
    pub effect: f64,
    pub efficiency: f64,
    pub n: u32,
    pub m: u32,
    /// False when no asked episode had a predecessor; `effect` is then 0.
    pub effect_defined: bool,
}

/// `effect / (T * AR / 100)`, or 0 when nobody asked.
pub fn efficiency(ar: f64, effect: f64, opportunities: u32) -> f64 {
    if ar == 0.0 {
        return 0.0;
    }
    effect / (f64::from(opportunities) * ar / 100.0)
}

pub fn ask_metrics(ledger: &AskLedger) -> AskMetrics {
    let n = ledger.records.len() as u32;
    let asks = ledger.records.iter().filter(|r| r.asked).count() as f64;
    let ar = if n == 0 {
        0.0
    } else {
        100.0 * asks / f64::from(n)
    };

    let mut by_task: BTreeMap<u8, BTreeMap<u32, &AskRecord>> = BTreeMap::new();
    for r in &ledger.records {
        by_task.entry(r.task_id).or_default().insert(r.k, r);
    }
    let mut deltas = Vec::new();
    for episodes in by_task.values() {
        for (k, r) in episodes {
            if !r.asked || *k <= 1 {
                continue;
            }
            if let Some(prev) = episodes.get(&(k - 1)) {
                deltas.push(r.score - prev.score);
            }
        }
    }
    let m = deltas.len() as u32;
    let effect = if m == 0 {
        0.0
    } else {
        deltas.iter().sum::<f64>() / f64::from(m)
    };
    AskMetrics {
        ar,
        effect,
        efficiency: efficiency(ar, effect, ledger.opportunities),
        n,
        m,
        effect_defined: m > 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(task_id: u8, k: u32, asked: bool, score: f64) -> AskRecord {
        AskRecord {
            task_id,
            k,
            asked,
            score,
        }
    }

    #[test]
    fn hand_computed_ledger() {
        let ledger = AskLedger {
            records: vec![
                rec(1, 1, true, -60.0),
                rec(1, 2, false, -50.0),
                rec(1, 3, true, -40.0),
                rec(2, 1, false, 100.0),
                rec(2, 2, true, 400.0),
            ],
            opportunities: 8,
        };
        let m = ask_metrics(&ledger);
        assert_eq!(m.n, 5);
        assert_eq!(m.ar, 60.0);
        // asked with a predecessor: (1,3): +10, (2,2): +300
        assert_eq!(m.m, 2);
        assert_eq!(m.effect, 155.0);
        assert!((m.efficiency - 155.0 / (8.0 * 0.6)).abs() < 1e-12);
    }

    #[test]
    fn zero_ask_rate_zeroes_efficiency() {
        let ledger = AskLedger {
            records: vec![rec(1, 1, false, 1.0), rec(1, 2, false, 2.0)],
            opportunities: 8,
        };
        let m = ask_metrics(&ledger);
        assert_eq!((m.ar, m.efficiency, m.effect_defined), (0.0, 0.0, false));
    }

    #[test]
    fn only_first_episode_asked() {
        let ledger = AskLedger {
            records: vec![rec(1, 1, true, 1.0), rec(1, 2, false, 2.0)],
            opportunities: 8,
        };
        let m = ask_metrics(&ledger);
        assert_eq!(m.ar, 50.0);
        assert_eq!(m.m, 0);
        assert!(!m.effect_defined);
        assert_eq!(m.effect, 0.0);
    }

    #[test]
    fn insertion_order_does_not_matter() {
        let a = vec![
            rec(1, 1, false, 3.0),
            rec(1, 2, true, 7.0),
            rec(3, 1, false, 0.0),
            rec(3, 2, true, -2.0),
        ];
        let mut b = a.clone();
        b.reverse();
        let ma = ask_metrics(&AskLedger {
            records: a,
            opportunities: 8,
        });
        let mb = ask_metrics(&AskLedger {
            records: b,
            opportunities: 8,
        });
        assert_eq!(ma, mb);
        assert_eq!(ma.effect, 1.0);
    }
}
