//! Per-episode domain randomization: pushes, action delay, PD gain scales,
//! friction, link masses, payload, base CoM offset, torque noise, and the
//! multiplicative action noise scale.

use nalgebra::Vector3;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::RobotModel;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RandomizationConfig {
    /// Master switch; individual draws can also be toggled.
    pub enabled: bool,
    pub pushes: bool,
    /// Mean inter-arrival time of pushes (s), exponential.
    pub push_interval_mean: f64,
    /// Push linear velocity delta support (m/s, per horizontal axis).
    pub push_max_v: f64,
    /// Push angular velocity delta support (rad/s, per axis).
    pub push_max_w: f64,
    pub action_delay: bool,
    /// Action delay support (ms).
    pub delay_ms: (f64, f64),
    pub gain_scale: bool,
    /// P and D gain scale support.
    pub gain_range: (f64, f64),
    pub friction: bool,
    pub friction_range: (f64, f64),
    pub link_mass: bool,
    pub link_mass_range: (f64, f64),
    pub load_mass: bool,
    /// Payload support (kg), added to the base link.
    pub load_range: (f64, f64),
    pub com_offset: bool,
    /// Base CoM offset support (m, per axis).
    pub com_max: f64,
    pub torque_rfi: bool,
    /// Per-episode RFI scale support.
    pub rfi_scale_range: (f64, f64),
    /// Per-step RFI amplitude as a fraction of the torque limit.
    pub rfi_step: f64,
    /// Multiplicative action noise scale.
    pub action_noise_sigma: f64,
}

impl Default for RandomizationConfig {
    fn default() -> Self {
        RandomizationConfig {
            enabled: true,
            pushes: true,
            push_interval_mean: 6.0,
            push_max_v: 0.6,
            push_max_w: 0.8,
            action_delay: true,
            delay_ms: (4.0, 20.0),
            gain_scale: true,
            gain_range: (0.8, 1.2),
            friction: true,
            friction_range: (0.1, 2.0),
            link_mass: true,
            link_mass_range: (0.8, 1.2),
            load_mass: true,
            load_range: (-1.0, 3.0),
            com_offset: true,
            com_max: 0.1,
            torque_rfi: true,
            rfi_scale_range: (0.5, 1.5),
            rfi_step: 0.1,
            action_noise_sigma: 0.03,
        }
    }
}

impl RandomizationConfig {
    /// Everything off; nominal model, no pushes, no noise.
    pub fn disabled() -> Self {
        RandomizationConfig {
            enabled: false,
            ..Default::default()
        }
    }
}

/// The per-episode draw. Constant within an episode (torque RFI redraws per
/// physics step from `tau_rfi`).
#[derive(Debug, Clone)]
pub struct RandomizationDraw {
    pub kp_scale: Vec<f64>,
    pub kd_scale: Vec<f64>,
    pub friction: f64,
    pub link_mass_scale: Vec<f64>,
    pub load_mass: f64,
    pub com_offset: Vector3<f64>,
    /// Action delay (s).
    pub delay: f64,
    pub tau_rfi: f64,
    pub sigma_an: f64,
}

impl RandomizationDraw {
    pub fn nominal(model: &RobotModel) -> RandomizationDraw {
        RandomizationDraw {
            kp_scale: vec![1.0; model.n_dof()],
            kd_scale: vec![1.0; model.n_dof()],
            friction: 1.0,
            link_mass_scale: vec![1.0; model.n_links()],
            load_mass: 0.0,
            com_offset: Vector3::zeros(),
            delay: 0.0,
            tau_rfi: 0.0,
            sigma_an: 0.0,
        }
    }

    pub fn sample(
        cfg: &RandomizationConfig,
        model: &RobotModel,
        rng: &mut impl Rng,
    ) -> RandomizationDraw {
        if !cfg.enabled {
            return RandomizationDraw::nominal(model);
        }
        let n = model.n_dof();
        let kp_scale = if cfg.gain_scale {
            (0..n).map(|_| rng.gen_range(cfg.gain_range.0..cfg.gain_range.1)).collect()
        } else {
            vec![1.0; n]
        };
        let kd_scale = if cfg.gain_scale {
            (0..n).map(|_| rng.gen_range(cfg.gain_range.0..cfg.gain_range.1)).collect()
        } else {
            vec![1.0; n]
        };
        let friction = if cfg.friction {
            rng.gen_range(cfg.friction_range.0..cfg.friction_range.1)
        } else {
            1.0
        };
        let link_mass_scale = if cfg.link_mass {
            (0..model.n_links())
                .map(|_| rng.gen_range(cfg.link_mass_range.0..cfg.link_mass_range.1))
                .collect()
        } else {
            vec![1.0; model.n_links()]
        };
        let load_mass = if cfg.load_mass {
            rng.gen_range(cfg.load_range.0..cfg.load_range.1)
        } else {
            0.0
        };
        let com_offset = if cfg.com_offset {
            Vector3::new(
                rng.gen_range(-cfg.com_max..cfg.com_max),
                rng.gen_range(-cfg.com_max..cfg.com_max),
                rng.gen_range(-cfg.com_max..cfg.com_max),
            )
        } else {
            Vector3::zeros()
        };
        let delay = if cfg.action_delay {
            rng.gen_range(cfg.delay_ms.0..cfg.delay_ms.1) * 1e-3
        } else {
            0.0
        };
        let tau_rfi = if cfg.torque_rfi {
            rng.gen_range(cfg.rfi_scale_range.0..cfg.rfi_scale_range.1)
        } else {
            0.0
        };
        RandomizationDraw {
            kp_scale,
            kd_scale,
            friction,
            link_mass_scale,
            load_mass,
            com_offset,
            delay,
            tau_rfi,
            sigma_an: cfg.action_noise_sigma,
        }
    }

    /// Randomized copy of the model: scaled link masses (inertia scales
    /// with mass), payload and CoM offset on the base link.
    pub fn apply_to_model(&self, model: &RobotModel) -> RobotModel {
        let mut m = model.clone();
        for (link, scale) in m.links.iter_mut().zip(&self.link_mass_scale) {
            link.mass *= scale;
            link.inertia *= *scale;
        }
        // Payload never drives the base mass non-positive.
        let base = &mut m.links[0];
        base.mass = (base.mass + self.load_mass).max(0.5);
        base.com += self.com_offset;
        m
    }

    /// Per-step torque rapid-force-injection noise for joint `j`.
    pub fn rfi_torque(
        &self,
        cfg: &RandomizationConfig,
        torque_limit: f64,
        rng: &mut impl Rng,
    ) -> f64 {
        if self.tau_rfi == 0.0 {
            return 0.0;
        }
        rng.gen_range(-cfg.rfi_step..cfg.rfi_step) * self.tau_rfi * torque_limit
    }
}

/// Multiplicative action noise: `a' = a (1 + sigma * eps)`, `eps ~ N(0, I)`,
/// fresh per control step.
pub fn apply_action_noise(action: &[f64], sigma: f64, rng: &mut impl Rng) -> Vec<f64> {
    debug_assert!(sigma >= 0.0);
    if sigma == 0.0 {
        return action.to_vec();
    }
    use rand_distr::{Distribution, StandardNormal};
    action
        .iter()
        .map(|a| {
            let eps: f64 = StandardNormal.sample(rng);
            a * (1.0 + sigma * eps)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::model::builtin;

    #[test]
    fn draws_stay_in_table_supports() {
        let cfg = RandomizationConfig::default();
        let model = builtin::biped10();
        let mut rng = crate::rng::stream(11, 0);
        for _ in 0..2000 {
            let d = RandomizationDraw::sample(&cfg, &model, &mut rng);
            for s in d.kp_scale.iter().chain(&d.kd_scale) {
                assert!((0.8..1.2).contains(s));
            }
            assert!((0.1..2.0).contains(&d.friction));
            for s in &d.link_mass_scale {
                assert!((0.8..1.2).contains(s));
            }
            assert!((-1.0..3.0).contains(&d.load_mass));
            assert!(d.com_offset.amax() <= 0.1);
            assert!((4e-3..20e-3).contains(&d.delay));
            assert!((0.5..1.5).contains(&d.tau_rfi));
            assert_eq!(d.sigma_an, 0.03);
        }
    }

    #[test]
    fn disabled_config_is_nominal() {
        let model = builtin::biped10();
        let mut rng = crate::rng::stream(11, 1);
        let d = RandomizationDraw::sample(&RandomizationConfig::disabled(), &model, &mut rng);
        assert_eq!(d.friction, 1.0);
        assert_eq!(d.load_mass, 0.0);
        assert_eq!(d.delay, 0.0);
        assert!(d.kp_scale.iter().all(|s| *s == 1.0));
    }

    #[test]
    fn randomized_model_keeps_total_mass_positive_and_changes_base_com() {
        let cfg = RandomizationConfig::default();
        let model = builtin::biped10();
        let mut rng = crate::rng::stream(12, 0);
        for _ in 0..100 {
            let d = RandomizationDraw::sample(&cfg, &model, &mut rng);
            let m = d.apply_to_model(&model);
            assert!(m.total_mass() > 0.0);
            assert_eq!(m.links[0].com, model.links[0].com + d.com_offset);
        }
    }

    #[test]
    fn zero_sigma_noise_is_identity_and_zero_actions_stay_zero() {
        let mut rng = crate::rng::stream(13, 0);
        let a = vec![0.3, -0.7, 0.0, 1.2];
        assert_eq!(apply_action_noise(&a, 0.0, &mut rng), a);
        let noisy = apply_action_noise(&[0.0, 0.0], 0.5, &mut rng);
        assert_eq!(noisy, vec![0.0, 0.0]);
    }

    #[test]
    fn action_noise_std_matches_sigma() {
        let mut rng = crate::rng::stream(14, 0);
        let n = 1_000_000;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for _ in 0..n {
            let v = apply_action_noise(&[1.0], 0.03, &mut rng)[0];
            sum += v;
            sum2 += v * v;
        }
        let mean = sum / n as f64;
        let std = (sum2 / n as f64 - mean * mean).sqrt();
        assert!((std - 0.03).abs() / 0.03 < 0.01, "std {std}");
    }
}
