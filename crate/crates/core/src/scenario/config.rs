use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::junction::{
    DefectSite, DepletionSearch, MeshSpec, SolverOptions, DEFAULT_THRESHOLD_CM3,
};
use crate::optics::{DefectOpticalModel, PleScanSettings};
use crate::photoion::{IonizationSettings, TwoPhotonModel};
use crate::physics::MaterialStack;
use crate::readout::{CrcSettings, DiffusionModel, SsrSettings};
use crate::trap::{Condition, TransientProtocol, TrapMarkovModel, TrapScanSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    SolveJunction,
    DepletionMap,
    IvCurve,
    PleSweep,
    TrapSim,
    Ionization,
    Crc,
    Ssr,
    Coherence,
}

impl Command {
    pub const ALL: [Command; 9] = [
        Command::SolveJunction,
        Command::DepletionMap,
        Command::IvCurve,
        Command::PleSweep,
        Command::TrapSim,
        Command::Ionization,
        Command::Crc,
        Command::Ssr,
        Command::Coherence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::SolveJunction => "solve-junction",
            Command::DepletionMap => "depletion-map",
            Command::IvCurve => "iv-curve",
            Command::PleSweep => "ple-sweep",
            Command::TrapSim => "trap-sim",
            Command::Ionization => "ionization",
            Command::Crc => "crc",
            Command::Ssr => "ssr",
            Command::Coherence => "coherence",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Evenly spaced values, both ends included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearRange {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl LinearRange {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.points - 1) as f64;
        (0..self.points)
            .map(|i| self.start + i as f64 * step)
            .collect()
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        if !(self.start.is_finite() && self.stop.is_finite()) {
            return Err(Error::validation(path, "range ends must be finite"));
        }
        if self.points == 0 {
            return Err(Error::validation(format!("{path}.points"), "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct JunctionBlock {
    pub temperature_k: f64,
    pub bias_v: f64,
    /// Grid for solve-junction / depletion-map; the scalar value when empty.
    pub temperatures_k: Vec<f64>,
    pub biases_v: Vec<f64>,
    pub site: DefectSite,
    pub threshold_cm3: f64,
    /// Lateral site distances for depletion-map.
    pub distances_um: Vec<f64>,
    /// Bisect the depletion voltage of every depletion-map site.
    pub depletion_voltages: bool,
    pub search: DepletionSearch,
    pub write_density: bool,
}

impl Default for JunctionBlock {
    fn default() -> Self {
        Self {
            temperature_k: 15.0,
            bias_v: 0.0,
            temperatures_k: Vec::new(),
            biases_v: Vec::new(),
            site: DefectSite::new(11.2, 2.0),
            threshold_cm3: DEFAULT_THRESHOLD_CM3,
            distances_um: Vec::new(),
            depletion_voltages: false,
            search: DepletionSearch::default(),
            write_density: false,
        }
    }
}

impl JunctionBlock {
    pub fn temperatures(&self) -> Vec<f64> {
        if self.temperatures_k.is_empty() {
            vec![self.temperature_k]
        } else {
            self.temperatures_k.clone()
        }
    }

    pub fn biases(&self) -> Vec<f64> {
        if self.biases_v.is_empty() {
            vec![self.bias_v]
        } else {
            self.biases_v.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IvBlock {
    pub temperatures_k: Vec<f64>,
    pub ideality: f64,
    pub voltages: LinearRange,
    pub forward_current_a: f64,
}

impl Default for IvBlock {
    fn default() -> Self {
        Self {
            temperatures_k: vec![300.0, 200.0, 100.0, 50.0, 15.0],
            ideality: 1.0,
            voltages: LinearRange {
                start: -5.0,
                stop: 25.0,
                points: 121,
            },
            forward_current_a: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PleBlock {
    pub settings: PleScanSettings,
    /// Scan half-width around the predicted line centre.
    pub half_span_mhz: f64,
    pub points: usize,
}

impl Default for PleBlock {
    fn default() -> Self {
        Self {
            settings: PleScanSettings::default(),
            half_span_mhz: 1000.0,
            points: 201,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrapBlock {
    pub model: TrapMarkovModel,
    pub scan: TrapScanSettings,
    pub scan_conditions: Vec<Condition>,
    pub transients: Vec<TransientProtocol>,
    pub write_trajectories: bool,
}

impl Default for TrapBlock {
    fn default() -> Self {
        Self {
            model: TrapMarkovModel::default(),
            scan: TrapScanSettings::default(),
            scan_conditions: vec![Condition::Dark, Condition::Repump, Condition::Depleted],
            transients: Vec::new(),
            write_trajectories: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TwoPhotonBlock {
    pub model: TwoPhotonModel,
    pub resonant_powers_nw: Vec<f64>,
    pub second_powers_uw: Vec<f64>,
    pub second_wavelength_nm: f64,
}

impl Default for TwoPhotonBlock {
    fn default() -> Self {
        Self {
            model: TwoPhotonModel::default(),
            resonant_powers_nw: vec![1.0, 3.0, 10.0],
            second_powers_uw: vec![0.0, 1.0, 2.0, 5.0, 10.0],
            second_wavelength_nm: 950.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IonizationBlock {
    pub settings: IonizationSettings,
    /// `energy_meV,S_k` table replacing `settings.modes.modes`.
    pub modes_csv: Option<String>,
    /// `energy_eV,sigma_cm2` table replacing `settings.sigma_el`.
    pub cross_section_csv: Option<String>,
    pub wavelengths_nm: LinearRange,
    pub fit_threshold: bool,
    pub two_photon: Option<TwoPhotonBlock>,
}

impl Default for IonizationBlock {
    fn default() -> Self {
        Self {
            settings: IonizationSettings::default(),
            modes_csv: None,
            cross_section_csv: None,
            wavelengths_nm: LinearRange {
                start: 700.0,
                stop: 1200.0,
                points: 101,
            },
            fit_threshold: true,
            two_photon: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrcCase {
    pub label: String,
    #[serde(default)]
    pub diffusion: DiffusionModel,
    /// Replace the OU σ by the value giving this success rate at the HWHM threshold.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibrate_success: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CrcBlock {
    pub settings: CrcSettings,
    pub cases: Vec<CrcCase>,
    /// Thresholds 0..=max are scanned.
    pub threshold_max: u64,
}

impl Default for CrcBlock {
    fn default() -> Self {
        Self {
            settings: CrcSettings::default(),
            cases: vec![
                CrcCase {
                    label: "depleted".into(),
                    diffusion: DiffusionModel::ou(6.0, 2.0),
                    calibrate_success: None,
                },
                CrcCase {
                    label: "undepleted".into(),
                    diffusion: DiffusionModel::ou(20.0, 2.0),
                    calibrate_success: None,
                },
            ],
            threshold_max: 80,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SsrCase {
    pub label: String,
    #[serde(default)]
    pub settings: SsrSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SsrBlock {
    pub cases: Vec<SsrCase>,
}

impl Default for SsrBlock {
    fn default() -> Self {
        Self {
            cases: vec![
                SsrCase {
                    label: "depleted".into(),
                    settings: SsrSettings::default(),
                },
                SsrCase {
                    label: "undepleted".into(),
                    settings: SsrSettings {
                        detuning_sigma_mhz: 20.0,
                        ..Default::default()
                    },
                },
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoherenceCase {
    pub label: String,
    /// Hahn-echo T2 (N = 1).
    pub t2_ms: f64,
    pub beta: f64,
    pub dd_exponent: f64,
    pub orders: Vec<u32>,
    pub points: usize,
    /// Delays span 0..span_t2·T2(N).
    pub span_t2: f64,
    pub noise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoherenceBlock {
    pub cases: Vec<CoherenceCase>,
}

impl Default for CoherenceBlock {
    fn default() -> Self {
        let case = |label: &str, t2_ms: f64| CoherenceCase {
            label: label.into(),
            t2_ms,
            beta: 1.5,
            dd_exponent: 2.0 / 3.0,
            orders: vec![1, 2, 4, 8, 16, 32],
            points: 30,
            span_t2: 3.0,
            noise: 0.03,
        };
        Self {
            cases: vec![case("electron", 0.4), case("nuclear", 70.0)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    /// Dotted path into the scenario, e.g. `junction.bias_v`.
    pub parameter: String,
    pub values: Vec<toml::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub material: MaterialStack,
    #[serde(default)]
    pub mesh: MeshSpec,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub optics: DefectOpticalModel,
    #[serde(default)]
    pub junction: JunctionBlock,
    #[serde(default)]
    pub iv: IvBlock,
    #[serde(default)]
    pub ple: PleBlock,
    #[serde(default)]
    pub trap: TrapBlock,
    #[serde(default)]
    pub ionization: IonizationBlock,
    #[serde(default)]
    pub crc: CrcBlock,
    #[serde(default)]
    pub ssr: SsrBlock,
    #[serde(default)]
    pub coherence: CoherenceBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
}

fn parse_error(e: impl fmt::Display) -> Error {
    Error::Parse {
        what: "scenario".into(),
        message: e.to_string().trim_end().to_string(),
    }
}

/// Rewrites a library validation path (`crc.window_ms`) under a scenario prefix.
pub(crate) fn rebase(e: Error, prefix: &str) -> Error {
    match e {
        Error::Validation { path, message } => {
            let tail = path.split_once('.').map(|(_, t)| t).unwrap_or(&path);
            Error::Validation {
                path: format!("{prefix}.{tail}"),
                message,
            }
        }
        other => other,
    }
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let value: toml::Table = toml::from_str(text).map_err(parse_error)?;
        if let Some(cmd) = value.get("command") {
            match cmd.as_str() {
                Some(s) if Command::from_name(s).is_some() => {}
                Some(s) => return Err(Error::UnknownCommand(s.to_string())),
                None => return Err(Error::validation("command", "must be a string")),
            }
        }
        toml::from_str(text).map_err(parse_error)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Numerical(format!("scenario serialization: {e}")))
    }

    pub fn is_stochastic(&self) -> bool {
        match self.command {
            Command::PleSweep => self.ple.settings.noise,
            Command::TrapSim | Command::Crc | Command::Ssr => true,
            Command::Coherence => self.coherence.cases.iter().any(|c| c.noise > 0.0),
            _ => false,
        }
    }

    /// The scenario with `path` (dotted) set to `value`.
    pub fn with_parameter(&self, path: &str, value: &toml::Value) -> Result<Self> {
        let mut root = toml::Value::try_from(self).map_err(parse_error)?;
        let mut node = &mut root;
        for key in path.split('.') {
            node = node
                .get_mut(key)
                .ok_or_else(|| Error::validation(path, "no such parameter in the scenario"))?;
        }
        *node = value.clone();
        let s: Scenario = root
            .try_into()
            .map_err(|e| Error::validation(path, format!("value {value} rejected: {e}")))?;
        Ok(s)
    }

    /// Input files are resolved against `base`.
    pub fn resolve(&self, base: &Path, file: &str) -> PathBuf {
        let p = Path::new(file);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    }

    /// Checks everything the command will read, without running it.
    pub fn validate(&self, base: &Path) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::validation("name", "must not be empty"));
        }
        if self.is_stochastic() && self.seed.is_none() {
            return Err(Error::validation(
                "seed",
                "required for a stochastic command",
            ));
        }
        if let Some(sw) = &self.sweep {
            if sw.values.is_empty() {
                return Err(Error::validation("sweep.values", "must not be empty"));
            }
            for v in &sw.values {
                self.with_parameter(&sw.parameter, v)?;
            }
        }
        let j = &self.junction;
        let finite = |path: &str, v: &[f64]| -> Result<()> {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::validation(path, "values must be finite"));
            }
            Ok(())
        };
        match self.command {
            Command::SolveJunction | Command::DepletionMap | Command::PleSweep => {
                self.material.validate()?;
                self.mesh.validate()?;
                self.solver.validate()?;
                if j.temperatures()
                    .iter()
                    .any(|&t| !(t > 0.0 && t.is_finite()))
                {
                    return Err(Error::validation("junction.temperatures_k", "must be > 0"));
                }
                finite("junction.biases_v", &j.biases())?;
                if !(j.threshold_cm3 > 0.0) {
                    return Err(Error::validation("junction.threshold_cm3", "must be > 0"));
                }
                if self.command != Command::DepletionMap {
                    j.site
                        .validate(self.material.epi_thickness_um)
                        .map_err(|e| rebase(e, "junction.site"))?;
                }
                if self.command == Command::DepletionMap {
                    if j.distances_um.is_empty() {
                        return Err(Error::validation(
                            "junction.distances_um",
                            "must not be empty",
                        ));
                    }
                    finite("junction.distances_um", &j.distances_um)?;
                    j.site
                        .validate(self.material.epi_thickness_um)
                        .map_err(|e| rebase(e, "junction.site"))?;
                    if j.depletion_voltages {
                        j.search
                            .validate()
                            .map_err(|e| rebase(e, "junction.search"))?;
                    }
                }
                if self.command != Command::SolveJunction {
                    self.optics.validate()?;
                    self.ple
                        .settings
                        .validate()
                        .map_err(|e| rebase(e, "ple.settings"))?;
                }
                if self.command == Command::PleSweep {
                    if !(self.ple.half_span_mhz > 0.0) {
                        return Err(Error::validation("ple.half_span_mhz", "must be > 0"));
                    }
                    if self.ple.points < 8 {
                        return Err(Error::validation("ple.points", "need at least 8 points"));
                    }
                }
            }
            Command::IvCurve => {
                self.material.validate()?;
                let iv = &self.iv;
                if iv.temperatures_k.is_empty() || iv.temperatures_k.iter().any(|&t| !(t > 0.0)) {
                    return Err(Error::validation(
                        "iv.temperatures_k",
                        "need temperatures > 0",
                    ));
                }
                if !(iv.ideality >= 1.0 && iv.ideality.is_finite()) {
                    return Err(Error::validation("iv.ideality", "must be >= 1"));
                }
                iv.voltages.validate("iv.voltages")?;
                if !(iv.forward_current_a > 0.0) {
                    return Err(Error::validation("iv.forward_current_a", "must be > 0"));
                }
            }
            Command::TrapSim => {
                self.optics.validate()?;
                self.trap
                    .model
                    .validate()
                    .map_err(|e| rebase(e, "trap.model"))?;
                for c in &self.trap.scan_conditions {
                    self.trap
                        .model
                        .generator(*c)
                        .map_err(|e| rebase(e, "trap.model"))?;
                }
                self.trap
                    .scan
                    .grid
                    .validate()
                    .map_err(|e| rebase(e, "trap.scan.grid"))?;
                self.trap
                    .scan
                    .ple
                    .validate()
                    .map_err(|e| rebase(e, "trap.scan.ple"))?;
                for (k, t) in self.trap.transients.iter().enumerate() {
                    let p = format!("trap.transients[{k}]");
                    if !(t.max_duration_ms > 0.0) {
                        return Err(Error::validation(
                            format!("{p}.max_duration_ms"),
                            "must be > 0",
                        ));
                    }
                    if t.probe_state >= self.trap.model.n_states() {
                        return Err(Error::validation(
                            format!("{p}.probe_state"),
                            "no such state",
                        ));
                    }
                    if t.ensemble == 0 {
                        return Err(Error::validation(format!("{p}.ensemble"), "must be >= 1"));
                    }
                }
            }
            Command::Ionization => {
                let io = &self.ionization;
                io.wavelengths_nm.validate("ionization.wavelengths_nm")?;
                if io.wavelengths_nm.values().iter().any(|&l| !(l > 0.0)) {
                    return Err(Error::validation(
                        "ionization.wavelengths_nm",
                        "must be > 0",
                    ));
                }
                for (key, f) in [
                    ("modes_csv", &io.modes_csv),
                    ("cross_section_csv", &io.cross_section_csv),
                ] {
                    if let Some(f) = f {
                        if !self.resolve(base, f).is_file() {
                            return Err(Error::validation(
                                format!("ionization.{key}"),
                                format!("file `{f}` does not exist"),
                            ));
                        }
                    }
                }
                io.settings
                    .modes
                    .validate()
                    .map_err(|e| rebase(e, "ionization.settings.modes"))?;
                io.settings
                    .sigma_el
                    .validate()
                    .map_err(|e| rebase(e, "ionization.settings.sigma_el"))?;
                if let Some(tp) = &io.two_photon {
                    tp.model
                        .validate()
                        .map_err(|e| rebase(e, "ionization.two_photon.model"))?;
                    if tp
                        .resonant_powers_nw
                        .iter()
                        .chain(&tp.second_powers_uw)
                        .any(|&p| !(p >= 0.0))
                    {
                        return Err(Error::validation(
                            "ionization.two_photon",
                            "powers must be >= 0",
                        ));
                    }
                    if !(tp.second_wavelength_nm > 0.0) {
                        return Err(Error::validation(
                            "ionization.two_photon.second_wavelength_nm",
                            "must be > 0",
                        ));
                    }
                }
            }
            Command::Crc => {
                self.optics.validate()?;
                self.crc
                    .settings
                    .validate()
                    .map_err(|e| rebase(e, "crc.settings"))?;
                if self.crc.cases.is_empty() {
                    return Err(Error::validation("crc.cases", "need at least one case"));
                }
                for (k, c) in self.crc.cases.iter().enumerate() {
                    c.diffusion
                        .validate()
                        .map_err(|e| rebase(e, &format!("crc.cases[{k}].diffusion")))?;
                    if let Some(t) = c.calibrate_success {
                        if !(0.0 < t && t < 1.0) {
                            return Err(Error::validation(
                                format!("crc.cases[{k}].calibrate_success"),
                                "must lie in (0, 1)",
                            ));
                        }
                    }
                }
            }
            Command::Ssr => {
                if self.ssr.cases.is_empty() {
                    return Err(Error::validation("ssr.cases", "need at least one case"));
                }
                for (k, c) in self.ssr.cases.iter().enumerate() {
                    c.settings
                        .validate()
                        .map_err(|e| rebase(e, &format!("ssr.cases[{k}].settings")))?;
                }
            }
            Command::Coherence => {
                if self.coherence.cases.is_empty() {
                    return Err(Error::validation(
                        "coherence.cases",
                        "need at least one case",
                    ));
                }
                for (k, c) in self.coherence.cases.iter().enumerate() {
                    let p = format!("coherence.cases[{k}]");
                    if !(c.t2_ms > 0.0 && c.t2_ms.is_finite()) {
                        return Err(Error::validation(format!("{p}.t2_ms"), "must be > 0"));
                    }
                    if !(c.beta > 0.0 && c.beta <= 3.0) {
                        return Err(Error::validation(format!("{p}.beta"), "must lie in (0, 3]"));
                    }
                    if c.orders.is_empty() || c.orders.contains(&0) {
                        return Err(Error::validation(
                            format!("{p}.orders"),
                            "orders must be >= 1",
                        ));
                    }
                    if c.points < 5 {
                        return Err(Error::validation(format!("{p}.points"), "need at least 5"));
                    }
                    if !(c.span_t2 > 0.0 && c.noise >= 0.0 && c.dd_exponent.is_finite()) {
                        return Err(Error::validation(p, "span_t2 > 0, noise >= 0 required"));
                    }
                }
            }
        }
        Ok(())
    }
}
