use serde::{Deserialize, Serialize};

/// Weights of coverage, time cost and global critic loss in the system cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostWeights {
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self { mu1: 2.0, mu2: 4.0, mu3: 10.0 }
    }
}

/// Per-UAV energy above the even per-slot share `e_max / slots`, floored at zero.
pub fn energy_penalty(per_slot_energy: &[f64], e_max: f64, slots: usize) -> Vec<f64> {
    let budget = e_max / slots as f64;
    per_slot_energy.iter().map(|e| (e - budget).max(0.0)).collect()
}

pub fn system_cost(coverage_sum: f64, time_cost: f64, global_disc_loss: f64, w: &CostWeights) -> f64 {
    -w.mu1 * coverage_sum + w.mu2 * time_cost + w.mu3 * global_disc_loss
}

pub fn reward(cost: f64, penalties: &[f64], penalty_coeff: f64) -> f64 {
    -(cost + penalty_coeff * penalties.iter().map(|p| p.abs()).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(energy_penalty(&[1200.0, 800.0, 1000.0], 50_000.0, 50), vec![200.0, 0.0, 0.0]);
        let c = system_cost(15.0, 0.05, 0.5, &CostWeights::default());
        assert!((c - -24.8).abs() < 1e-12);
        assert_eq!(system_cost(0.0, 0.0, 0.0, &CostWeights::default()), 0.0);
        assert!((reward(10.0, &[150.0, 50.0], 0.01) - -12.0).abs() < 1e-12);
        assert_eq!(reward(0.0, &[0.0, 0.0], 0.01), 0.0);
    }

    proptest! {
        #[test]
        fn reward_decomposes(cost in -100.0f64..100.0, pens in proptest::collection::vec(0.0f64..1e4, 1..6), eta in 0.0f64..1.0) {
            let r = reward(cost, &pens, eta);
            let l1: f64 = pens.iter().sum();
            prop_assert!((r + cost + eta * l1).abs() <= 1e-9 * (1.0 + cost.abs() + eta * l1));
        }

        #[test]
        fn monotone_pieces(cov in 0.0f64..20.0, d in 0.01f64..5.0, tc in 0.0f64..1.0, ld in -5.0f64..5.0, p in 0.0f64..100.0) {
            let w = CostWeights::default();
            prop_assert!(system_cost(cov + d, tc, ld, &w) < system_cost(cov, tc, ld, &w));
            prop_assert!(reward(1.0, &[p + d], 0.01) <= reward(1.0, &[p], 0.01));
        }
    }
}
