//! Per-head TD(lambda) targets and aggregated generalized advantages.
//!
//! Each value head gets its own lambda-return target from its own reward
//! column; the policy advantage is the head sum, which by linearity equals
//! scalar GAE run on the summed reward/value streams.

use ndarray::{Array1, Array2};

use super::buffer::RolloutBuffer;

pub struct Targets {
    /// Per-head lambda-return regression targets, (T*E) x K.
    pub per_head: Array2<f64>,
    /// Aggregated advantages, length T*E.
    pub advantages: Array1<f64>,
}

/// Backward recursion over each environment lane. Terminal transitions zero
/// the bootstrap.
pub fn value_targets(buffer: &RolloutBuffer, gamma: f64, lam: f64) -> Targets {
    let (t_max, n_envs, k) = (buffer.horizon, buffer.n_envs, buffer.k);
    assert!(buffer.is_full(), "buffer must be complete with bootstrap values");
    let mut per_head = Array2::zeros((t_max * n_envs, k));
    let mut advantages = Array1::zeros(t_max * n_envs);
    let mut adv_next = vec![0.0; k];
    let mut v_next = vec![0.0; k];
    for e in 0..n_envs {
        for h in 0..k {
            adv_next[h] = 0.0;
            v_next[h] = buffer.bootstrap[(e, h)];
        }
        for t in (0..t_max).rev() {
            let idx = t * n_envs + e;
            let mask = if buffer.dones[idx] { 0.0 } else { 1.0 };
            let mut total_adv = 0.0;
            for h in 0..k {
                let delta =
                    buffer.rewards[(idx, h)] + gamma * v_next[h] * mask - buffer.values[(idx, h)];
                let adv = delta + gamma * lam * mask * adv_next[h];
                per_head[(idx, h)] = adv + buffer.values[(idx, h)];
                adv_next[h] = adv;
                total_adv += adv;
            }
            advantages[idx] = total_adv;
            for h in 0..k {
                v_next[h] = buffer.values[(idx, h)];
            }
        }
    }
    Targets {
        per_head,
        advantages,
    }
}

#[cfg(test)]
pub(crate) mod oracle {
    //! Independent scalar-GAE reference used by tests.

    /// Classic scalar GAE over one lane: returns (advantages, targets).
    pub fn scalar_gae(
        rewards: &[f64],
        values: &[f64],
        dones: &[bool],
        bootstrap: f64,
        gamma: f64,
        lam: f64,
    ) -> (Vec<f64>, Vec<f64>) {
        let t_max = rewards.len();
        let mut adv = vec![0.0; t_max];
        let mut tgt = vec![0.0; t_max];
        let mut adv_next = 0.0;
        let mut v_next = bootstrap;
        for t in (0..t_max).rev() {
            let mask = if dones[t] { 0.0 } else { 1.0 };
            let delta = rewards[t] + gamma * v_next * mask - values[t];
            let a = delta + gamma * lam * mask * adv_next;
            adv[t] = a;
            tgt[t] = a + values[t];
            adv_next = a;
            v_next = values[t];
        }
        (adv, tgt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_buffer(k: usize, t_max: usize, n_envs: usize, seed: u64) -> RolloutBuffer {
        let mut rng = crate::rng::stream(seed, 0);
        let mut buf = RolloutBuffer::new(t_max, n_envs, k, 1, 1, 1);
        for t in 0..t_max {
            for e in 0..n_envs {
                let rewards: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let values: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let done = rng.gen_bool(0.1);
                buf.push(t, e, &[0.0], &[0.0], &[0.0], 0.0, &rewards, &values, done);
            }
        }
        for e in 0..n_envs {
            for h in 0..k {
                buf.bootstrap[(e, h)] = rng.gen_range(-1.0..1.0);
            }
        }
        buf
    }

    #[test]
    fn single_head_reduction_is_bitwise_scalar_gae() {
        let buf = random_buffer(1, 16, 3, 5);
        let out = value_targets(&buf, 0.99, 0.95);
        for e in 0..3 {
            let rewards: Vec<f64> = (0..16).map(|t| buf.rewards[(t * 3 + e, 0)]).collect();
            let values: Vec<f64> = (0..16).map(|t| buf.values[(t * 3 + e, 0)]).collect();
            let dones: Vec<bool> = (0..16).map(|t| buf.dones[t * 3 + e]).collect();
            let (adv, tgt) =
                oracle::scalar_gae(&rewards, &values, &dones, buf.bootstrap[(e, 0)], 0.99, 0.95);
            for t in 0..16 {
                let idx = t * 3 + e;
                assert_eq!(out.advantages[idx], adv[t], "advantage t={t} e={e}");
                assert_eq!(out.per_head[(idx, 0)], tgt[t], "target t={t} e={e}");
            }
        }
    }

    #[test]
    fn per_transition_head_sum_identity_is_exact() {
        let buf = random_buffer(5, 8, 2, 6);
        let gamma = 0.99;
        // sum_i (r_i + gamma V_i(s')) == (sum_i r_i) + gamma V_total(s')
        for idx in 0..buf.capacity() {
            let lhs: f64 = (0..5)
                .map(|h| buf.rewards[(idx, h)] + gamma * buf.values[(idx, h)])
                .sum();
            let r_total: f64 = (0..5).map(|h| buf.rewards[(idx, h)]).sum();
            let v_total: f64 = (0..5).map(|h| buf.values[(idx, h)]).sum();
            let rhs = r_total + gamma * v_total;
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn aggregated_advantage_matches_scalar_oracle_on_summed_streams() {
        let buf = random_buffer(5, 24, 4, 7);
        let out = value_targets(&buf, 0.99, 0.95);
        for e in 0..4 {
            let rewards: Vec<f64> = (0..24)
                .map(|t| (0..5).map(|h| buf.rewards[(t * 4 + e, h)]).sum())
                .collect();
            let values: Vec<f64> = (0..24)
                .map(|t| (0..5).map(|h| buf.values[(t * 4 + e, h)]).sum())
                .collect();
            let dones: Vec<bool> = (0..24).map(|t| buf.dones[t * 4 + e]).collect();
            let boot: f64 = (0..5).map(|h| buf.bootstrap[(e, h)]).sum();
            let (adv, _) = oracle::scalar_gae(&rewards, &values, &dones, boot, 0.99, 0.95);
            for t in 0..24 {
                assert!(
                    (out.advantages[t * 4 + e] - adv[t]).abs() < 1e-10,
                    "t={t} e={e}: {} vs {}",
                    out.advantages[t * 4 + e],
                    adv[t]
                );
            }
        }
    }

    #[test]
    fn scaling_term_and_inverse_weight_leaves_advantages_unchanged() {
        let mut buf = random_buffer(4, 12, 2, 8);
        let base = value_targets(&buf, 0.99, 0.95);
        // Scale reward column 2 by c and its value column by c (a value net
        // fitted to the scaled head would scale likewise); weight 1/c on the
        // summed stream restores the original total advantage.
        let c = 8.0;
        for idx in 0..buf.capacity() {
            buf.rewards[(idx, 2)] *= c;
            buf.values[(idx, 2)] *= c;
        }
        for e in 0..2 {
            buf.bootstrap[(e, 2)] *= c;
        }
        let scaled = value_targets(&buf, 0.99, 0.95);
        for idx in 0..buf.capacity() {
            // Reconstruct the weighted sum: all heads weight 1 except head 2
            // at 1/c. Per-head advantages are linear in the head streams.
            let head2 = scaled.per_head[(idx, 2)] - buf.values[(idx, 2)];
            let others: f64 = (0..4)
                .filter(|h| *h != 2)
                .map(|h| scaled.per_head[(idx, h)] - buf.values[(idx, h)])
                .sum();
            let reweighted = others + head2 / c;
            assert!(
                (reweighted - base.advantages[idx]).abs() < 1e-12,
                "idx {idx}: {reweighted} vs {}",
                base.advantages[idx]
            );
        }
    }
}
