use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trap::{simulate_trajectory, Condition, ConditionSchedule, TrapMarkovModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiffusionMode {
    Frozen,
    OuPlusJumps,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapJumps {
    #[serde(default)]
    pub model: TrapMarkovModel,
    pub condition: Condition,
}

/// Spectral wandering of the optical line: Ornstein–Uhlenbeck drift plus optional trap jumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiffusionModel {
    pub mode: DiffusionMode,
    pub ou_sigma_mhz: f64,
    pub ou_tau_ms: f64,
    pub jumps: Option<TrapJumps>,
}

impl Default for DiffusionModel {
    fn default() -> Self {
        Self::frozen()
    }
}

impl DiffusionModel {
    pub fn frozen() -> Self {
        Self {
            mode: DiffusionMode::Frozen,
            ou_sigma_mhz: 0.0,
            ou_tau_ms: 1.0,
            jumps: None,
        }
    }

    pub fn ou(sigma_mhz: f64, tau_ms: f64) -> Self {
        Self {
            mode: DiffusionMode::OuPlusJumps,
            ou_sigma_mhz: sigma_mhz,
            ou_tau_ms: tau_ms,
            jumps: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ou_sigma_mhz >= 0.0 && self.ou_sigma_mhz.is_finite()) {
            return Err(Error::validation("diffusion.ou_sigma_mhz", "must be >= 0"));
        }
        if !(self.ou_tau_ms > 0.0 && self.ou_tau_ms.is_finite()) {
            return Err(Error::validation("diffusion.ou_tau_ms", "must be > 0"));
        }
        if let Some(j) = &self.jumps {
            j.model.validate()?;
            j.model.generator(j.condition)?;
        }
        Ok(())
    }

    /// OU standard deviation in effect; zero when frozen.
    pub fn effective_sigma_mhz(&self) -> f64 {
        match self.mode {
            DiffusionMode::Frozen => 0.0,
            DiffusionMode::OuPlusJumps => self.ou_sigma_mhz,
        }
    }

    /// Line offsets (MHz) at `n` instants spaced by `spacing_ms`, starting in the steady state.
    pub fn sample_offsets<R: Rng>(
        &self,
        n: usize,
        spacing_ms: f64,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        self.validate()?;
        if !(spacing_ms > 0.0 && spacing_ms.is_finite()) {
            return Err(Error::domain("event spacing must be > 0 ms"));
        }
        let sigma = self.effective_sigma_mhz();
        let mut out = vec![0.0; n];
        if sigma > 0.0 {
            let a = (-spacing_ms / self.ou_tau_ms).exp();
            let s = sigma * (1.0 - a * a).sqrt();
            let z0: f64 = StandardNormal.sample(rng);
            let mut x = sigma * z0;
            for v in out.iter_mut() {
                *v = x;
                let z: f64 = StandardNormal.sample(rng);
                x = a * x + s * z;
            }
        }
        if let (DiffusionMode::OuPlusJumps, Some(j)) = (self.mode, &self.jumps) {
            if n > 0 {
                let shifts = j.model.line_shifts_mhz();
                let tr = simulate_trajectory(
                    &j.model,
                    &ConditionSchedule::constant(j.condition),
                    n as f64 * spacing_ms,
                    None,
                    rng,
                )?;
                for (k, v) in out.iter_mut().enumerate() {
                    *v += shifts[tr.state_at(k as f64 * spacing_ms)];
                }
            }
        }
        Ok(out)
    }
}
