//! Scenario configuration: a validated TOML schema with explicit units in
//! key names, plus the two shipped scenario families.

use serde::{Deserialize, Serialize};

use crate::attacks::{DosConfig, FdiConfig, FdiLinearization, LossSemantics};
use crate::dynamics::{
    ExciterParams, FaultKind, FaultWindow, GeneratorParams, GovernorParams, SmibParams, TruthScenario,
};
use crate::error::{Error, Result};
use crate::measurement::NoiseModel;
use crate::seed::derive_seed;
use crate::TimeWindow;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Master seed; every stochastic stage derives its own sub-seed from it.
    pub seed: u64,
    pub sim: SimConfig,
    pub machine: MachineConfig,
    pub governor: GovernorConfig,
    pub exciter: ExciterConfig,
    pub network: NetworkConfig,
    pub noise: NoiseConfig,
    pub filter: FilterConfig,
    pub attack: AttackConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub duration_s: f64,
    pub dt_s: f64,
    pub sample_rate_hz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineConfig {
    pub t_j_s: f64,
    pub d_pu: f64,
    pub t_d0p_s: f64,
    pub t_q0p_s: f64,
    pub x_d_pu: f64,
    pub x_dp_pu: f64,
    pub x_q_pu: f64,
    pub x_qp_pu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GovernorConfig {
    pub omega_ref_pu: f64,
    pub r_inv_pu: f64,
    pub t_max_pu: f64,
    pub t_s_s: f64,
    pub t_c_s: f64,
    #[serde(default)]
    pub t_3_s: f64,
    #[serde(default)]
    pub t_4_s: f64,
    #[serde(default)]
    pub t_5_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExciterConfig {
    pub k_a: f64,
    pub t_a_s: f64,
    #[serde(default)]
    pub k_g: f64,
    #[serde(default)]
    pub v_b_pu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_ref_pu: Option<f64>,
    pub e_f_min_pu: f64,
    pub e_f_max_pu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub v_inf_pu: f64,
    pub x_e_pu: f64,
    /// Pre-fault terminal active power (pu).
    pub p0_pu: f64,
    /// Pre-fault terminal voltage magnitude (pu).
    pub u0_pu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault: Option<FaultConfig>,
}

// No deny_unknown_fields here: serde cannot combine it with flatten.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultConfig {
    pub t_on_s: f64,
    pub t_off_s: f64,
    #[serde(flatten)]
    pub kind: FaultKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub sigma_delta_deg: f64,
    pub sigma_omega_pu: f64,
    pub sigma_u_frac: f64,
    pub sigma_phi_deg: f64,
    /// Assumed-covariance rotor-angle std; falls back to `sigma_delta_deg`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_sigma_delta_deg: Option<f64>,
    /// Assumed-covariance rotor-speed std; falls back to `sigma_omega_pu`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_sigma_omega_pu: Option<f64>,
    pub r_sigma_u_frac: f64,
    pub r_sigma_phi_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    pub q_diag: [f64; 4],
    pub p0_diag: [f64; 4],
    pub huber_c: f64,
    /// Widening factor applied to the calibrated identification threshold.
    pub dj_safety: f64,
    /// Startup samples excluded from threshold calibration and from flag
    /// evaluation; the estimator's own convergence transient is not normal
    /// tracking.
    #[serde(default = "default_dj_warmup")]
    pub dj_warmup_samples: usize,
    /// Fixed identification threshold; calibrated from a paired clean run
    /// when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dj: Option<f64>,
}

fn default_dj_warmup() -> usize {
    100
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AttackConfig {
    None,
    Fdi {
        sigma_c: f64,
        b_j: f64,
        window: TimeWindow,
        #[serde(default)]
        linearization: FdiLinearization,
    },
    Dos {
        rho: f64,
        #[serde(default = "default_dos_depth")]
        d: usize,
        window: TimeWindow,
        #[serde(default)]
        semantics: LossSemantics,
        #[serde(default)]
        limit_consecutive: bool,
    },
}

fn default_dos_depth() -> usize {
    1
}

impl AttackConfig {
    pub fn is_none(&self) -> bool {
        matches!(self, AttackConfig::None)
    }

    pub fn window(&self) -> Option<TimeWindow> {
        match self {
            AttackConfig::None => None,
            AttackConfig::Fdi { window, .. } | AttackConfig::Dos { window, .. } => Some(*window),
        }
    }

    pub fn kind_str(&self) -> &'static str {
        match self {
            AttackConfig::None => "none",
            AttackConfig::Fdi { .. } => "fdi",
            AttackConfig::Dos { .. } => "dos",
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ScenarioConfig =
            toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::ConfigParse(e.to_string()))
    }

    pub fn generator(&self) -> GeneratorParams {
        GeneratorParams {
            t_j: self.machine.t_j_s,
            d: self.machine.d_pu,
            t_d0p: self.machine.t_d0p_s,
            t_q0p: self.machine.t_q0p_s,
            x_d: self.machine.x_d_pu,
            x_dp: self.machine.x_dp_pu,
            x_q: self.machine.x_q_pu,
            x_qp: self.machine.x_qp_pu,
        }
    }

    pub fn governor(&self) -> GovernorParams {
        GovernorParams {
            omega_ref: self.governor.omega_ref_pu,
            r_inv: self.governor.r_inv_pu,
            t_max: self.governor.t_max_pu,
            t_s: self.governor.t_s_s,
            t_c: self.governor.t_c_s,
            t_3: self.governor.t_3_s,
            t_4: self.governor.t_4_s,
            t_5: self.governor.t_5_s,
        }
    }

    pub fn exciter(&self) -> ExciterParams {
        ExciterParams {
            k_a: self.exciter.k_a,
            t_a: self.exciter.t_a_s,
            k_g: self.exciter.k_g,
            v_b: self.exciter.v_b_pu,
            v_ref: self.exciter.v_ref_pu,
            e_f_min: self.exciter.e_f_min_pu,
            e_f_max: self.exciter.e_f_max_pu,
        }
    }

    pub fn smib(&self) -> SmibParams {
        SmibParams {
            v_inf: self.network.v_inf_pu,
            x_e: self.network.x_e_pu,
            fault: self.network.fault.map(|f| FaultWindow {
                t_on: f.t_on_s,
                t_off: f.t_off_s,
                kind: f.kind,
            }),
        }
    }

    pub fn truth_scenario(&self) -> TruthScenario {
        TruthScenario {
            generator: self.generator(),
            governor: self.governor(),
            exciter: self.exciter(),
            smib: self.smib(),
            p0: self.network.p0_pu,
            u0: self.network.u0_pu,
            duration_s: self.sim.duration_s,
            dt_s: self.sim.dt_s,
        }
    }

    /// Noise model with the measurement-noise sub-seed resolved.
    pub fn noise_model(&self) -> NoiseModel {
        NoiseModel {
            sigma_delta: self.noise.sigma_delta_deg.to_radians(),
            sigma_omega: self.noise.sigma_omega_pu,
            sigma_u_frac: self.noise.sigma_u_frac,
            sigma_phi: self.noise.sigma_phi_deg.to_radians(),
            r_sigma_delta: self
                .noise
                .r_sigma_delta_deg
                .unwrap_or(self.noise.sigma_delta_deg)
                .to_radians(),
            r_sigma_omega: self.noise.r_sigma_omega_pu.unwrap_or(self.noise.sigma_omega_pu),
            r_sigma_u_frac: self.noise.r_sigma_u_frac,
            r_sigma_phi: self.noise.r_sigma_phi_deg.to_radians(),
            seed: derive_seed(self.seed, "measurement-noise"),
        }
    }

    /// FDI settings with the attack sub-seed resolved; `None` for other kinds.
    pub fn fdi_config(&self) -> Option<FdiConfig> {
        match self.attack {
            AttackConfig::Fdi {
                sigma_c,
                b_j,
                window,
                linearization,
            } => Some(FdiConfig {
                sigma_c,
                window,
                b_j,
                linearization,
                seed: derive_seed(self.seed, "fdi"),
            }),
            _ => None,
        }
    }

    /// DoS settings with the attack sub-seed resolved; `None` for other kinds.
    pub fn dos_config(&self) -> Option<DosConfig> {
        match self.attack {
            AttackConfig::Dos {
                rho,
                d,
                window,
                semantics,
                limit_consecutive,
            } => Some(DosConfig {
                rho,
                d,
                window,
                semantics,
                limit_consecutive,
                seed: derive_seed(self.seed, "dos"),
            }),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.generator().validate()?;
        self.governor().validate()?;
        self.exciter().validate()?;
        self.smib().validate()?;
        if !(self.sim.duration_s > 0.0 && self.sim.dt_s > 0.0 && self.sim.sample_rate_hz > 0.0) {
            return Err(Error::Invalid(
                "sim durations and rates must be positive".into(),
            ));
        }
        let n = self.sim.duration_s / self.sim.dt_s;
        if (n - n.round()).abs() > 1e-9 {
            return Err(Error::Invalid(
                "duration_s must be an integer multiple of dt_s".into(),
            ));
        }
        let stride = 1.0 / (self.sim.sample_rate_hz * self.sim.dt_s);
        if stride < 1.0 - 1e-9 || (stride - stride.round()).abs() > 1e-9 {
            return Err(Error::Invalid(
                "sample_rate_hz must sample every k-th simulation step".into(),
            ));
        }
        self.noise_model().validate()?;
        if self.filter.q_diag.iter().any(|q| !(*q > 0.0))
            || self.filter.p0_diag.iter().any(|p| !(*p > 0.0))
        {
            return Err(Error::Invalid(
                "filter q_diag and p0_diag entries must be positive".into(),
            ));
        }
        if !(self.filter.huber_c > 0.0) {
            return Err(Error::Invalid("filter huber_c must be positive".into()));
        }
        if !(self.filter.dj_safety > 0.0) {
            return Err(Error::Invalid("filter dj_safety must be positive".into()));
        }
        match &self.attack {
            AttackConfig::None => {}
            AttackConfig::Fdi {
                sigma_c,
                b_j,
                window,
                ..
            } => {
                if !sigma_c.is_finite() || *sigma_c < 0.0 {
                    return Err(Error::Invalid("FDI sigma_c must be finite and >= 0".into()));
                }
                if !(*b_j > 0.0) {
                    return Err(Error::Invalid("FDI b_j must be positive".into()));
                }
                self.check_window(window)?;
            }
            AttackConfig::Dos { rho, d, window, .. } => {
                if !(*rho > 0.0 && *rho <= 1.0) {
                    return Err(Error::Invalid("DoS rho must be in (0, 1]".into()));
                }
                if *d < 1 {
                    return Err(Error::Invalid("DoS d must be >= 1".into()));
                }
                self.check_window(window)?;
            }
        }
        Ok(())
    }

    fn check_window(&self, window: &TimeWindow) -> Result<()> {
        TimeWindow::new(window.t_start_s, window.t_end_s)?;
        if window.t_start_s < 0.0 || window.t_end_s > self.sim.duration_s {
            return Err(Error::Invalid(format!(
                "attack window [{}, {}] must lie within the run [0, {}]",
                window.t_start_s, window.t_end_s, self.sim.duration_s
            )));
        }
        Ok(())
    }

    /// Base scenario patterned after a small three-machine test case: 20 s
    /// horizon, three-phase fault at the sending bus on [1.2, 1.5] s.
    pub fn preset_ninebus() -> Self {
        Self {
            seed: 0,
            sim: SimConfig {
                duration_s: 20.0,
                dt_s: 0.02,
                sample_rate_hz: 50.0,
            },
            machine: MachineConfig {
                t_j_s: 4.0,
                d_pu: 2.0,
                t_d0p_s: 6.0,
                t_q0p_s: 0.8,
                x_d_pu: 1.6,
                x_dp_pu: 0.3,
                x_q_pu: 0.7,
                x_qp_pu: 0.5,
            },
            governor: GovernorConfig {
                omega_ref_pu: 1.0,
                r_inv_pu: 25.0,
                t_max_pu: 1.2,
                t_s_s: 0.1,
                t_c_s: 0.3,
                t_3_s: 0.0,
                t_4_s: 0.0,
                t_5_s: 0.0,
            },
            exciter: ExciterConfig {
                k_a: 50.0,
                t_a_s: 0.1,
                k_g: 0.0,
                v_b_pu: 0.0,
                v_ref_pu: None,
                e_f_min_pu: 0.0,
                e_f_max_pu: 5.0,
            },
            network: NetworkConfig {
                v_inf_pu: 1.0,
                x_e_pu: 0.3,
                p0_pu: 0.8,
                u0_pu: 1.0,
                fault: Some(FaultConfig {
                    t_on_s: 1.2,
                    t_off_s: 1.5,
                    kind: FaultKind::BusVoltageDip { factor: 0.4 },
                }),
            },
            noise: NoiseConfig {
                sigma_delta_deg: 2.0,
                sigma_omega_pu: 0.001,
                sigma_u_frac: 0.001,
                sigma_phi_deg: 0.1,
                r_sigma_delta_deg: None,
                r_sigma_omega_pu: None,
                r_sigma_u_frac: 0.002,
                r_sigma_phi_deg: 0.2,
            },
            filter: FilterConfig {
                q_diag: [1e-8; 4],
                p0_diag: [1e-4; 4],
                huber_c: 1.5,
                dj_safety: 1.0,
                dj_warmup_samples: 100,
                dj: None,
            },
            attack: AttackConfig::None,
        }
    }

    /// Base scenario patterned after a larger multi-machine test case: 10 s
    /// horizon, fault on [1.0, 1.2] s, tighter detection threshold.
    pub fn preset_sixtyeightbus() -> Self {
        let mut config = Self::preset_ninebus();
        config.sim.duration_s = 10.0;
        config.network.fault = Some(FaultConfig {
            t_on_s: 1.0,
            t_off_s: 1.2,
            kind: FaultKind::BusVoltageDip { factor: 0.4 },
        });
        config
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_attack(mut self, attack: AttackConfig) -> Self {
        self.attack = attack;
        self
    }
}

/// The attack-scenario family of the small test case: clean baseline, three
/// FDI severities, four DoS loss rates, all on the window [4, 12] s with
/// detection threshold 2.1.
pub fn ninebus_family() -> Vec<(String, ScenarioConfig)> {
    let base = ScenarioConfig::preset_ninebus();
    let window = TimeWindow {
        t_start_s: 4.0,
        t_end_s: 12.0,
    };
    family(base, window, 2.1, &[1e-4, 1e-3, 1e-2], &[1.0, 0.95, 0.85, 0.75])
}

/// The attack-scenario family of the larger test case: window [4, 8] s,
/// detection threshold 1.6, much stronger FDI severities.
pub fn sixtyeightbus_family() -> Vec<(String, ScenarioConfig)> {
    let base = ScenarioConfig::preset_sixtyeightbus();
    let window = TimeWindow {
        t_start_s: 4.0,
        t_end_s: 8.0,
    };
    family(base, window, 1.6, &[0.01, 0.1, 1.0], &[1.0, 0.95, 0.85, 0.75])
}

fn family(
    base: ScenarioConfig,
    window: TimeWindow,
    b_j: f64,
    fdi_sigmas: &[f64],
    dos_rhos: &[f64],
) -> Vec<(String, ScenarioConfig)> {
    let mut out = vec![("clean".to_string(), base.clone())];
    for (i, &sigma_c) in fdi_sigmas.iter().enumerate() {
        out.push((
            format!("fdi-{}", i + 1),
            base.clone().with_attack(AttackConfig::Fdi {
                sigma_c,
                b_j,
                window,
                linearization: FdiLinearization::PerSample,
            }),
        ));
    }
    for (i, &rho) in dos_rhos.iter().enumerate() {
        out.push((
            format!("dos-{}", i + 1),
            base.clone().with_attack(AttackConfig::Dos {
                rho,
                d: 1,
                window,
                semantics: LossSemantics::Zeroed,
                limit_consecutive: false,
            }),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_round_trip_through_toml() {
        for config in [ScenarioConfig::preset_ninebus(), ScenarioConfig::preset_sixtyeightbus()] {
            config.validate().unwrap();
            let text = config.to_toml_string().unwrap();
            let back = ScenarioConfig::from_toml_str(&text).unwrap();
            assert_eq!(config, back);
        }
    }

    #[test]
    fn attack_variants_round_trip() {
        for (_, config) in ninebus_family().iter().chain(sixtyeightbus_family().iter()) {
            config.validate().unwrap();
            let text = config.to_toml_string().unwrap();
            let back = ScenarioConfig::from_toml_str(&text).unwrap();
            assert_eq!(config, &back);
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut text = ScenarioConfig::preset_ninebus().to_toml_string().unwrap();
        text.push_str("\n[extra]\nkey = 1\n");
        assert!(ScenarioConfig::from_toml_str(&text).is_err());
    }

    #[test]
    fn out_of_range_window_is_rejected() {
        let config = ScenarioConfig::preset_ninebus().with_attack(AttackConfig::Dos {
            rho: 1.0,
            d: 1,
            window: TimeWindow {
                t_start_s: 4.0,
                t_end_s: 25.0,
            },
            semantics: LossSemantics::Zeroed,
            limit_consecutive: false,
        });
        assert!(config.validate().is_err());
    }

    #[test]
    fn families_have_expected_scenarios() {
        let nine = ninebus_family();
        assert_eq!(nine.len(), 8);
        assert_eq!(nine[0].0, "clean");
        let sixty_eight = sixtyeightbus_family();
        assert_eq!(sixty_eight.len(), 8);
        assert!(matches!(
            sixty_eight[3].1.attack,
            AttackConfig::Fdi { sigma_c, .. } if (sigma_c - 1.0).abs() < 1e-15
        ));
    }

    #[test]
    fn seed_derivation_is_stable_across_attack_toggles() {
        let clean = ScenarioConfig::preset_ninebus().with_seed(7);
        let attacked = clean.clone().with_attack(AttackConfig::Dos {
            rho: 1.0,
            d: 1,
            window: TimeWindow {
                t_start_s: 4.0,
                t_end_s: 12.0,
            },
            semantics: LossSemantics::Zeroed,
            limit_consecutive: false,
        });
        assert_eq!(clean.noise_model(), attacked.noise_model());
    }
}
