use serde::{Deserialize, Serialize};

use super::spectral::{SpectralFunction, VibrationalModeSet};
use crate::error::{Error, Result};

/// Purely electronic photoionization cross section σ_el(ε) in cm².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ElectronicCrossSection {
    /// σ₀·sqrt((ε − ε_th)/ε_scale) above threshold.
    SqrtOnset {
        threshold_ev: f64,
        sigma0_cm2: f64,
        scale_ev: f64,
    },
    /// Linear interpolation in a table; zero below the first entry.
    Table {
        energies_ev: Vec<f64>,
        sigma_cm2: Vec<f64>,
    },
}

impl Default for ElectronicCrossSection {
    fn default() -> Self {
        ElectronicCrossSection::SqrtOnset {
            threshold_ev: 1.31,
            sigma0_cm2: 3e-16,
            scale_ev: 0.1,
        }
    }
}

impl ElectronicCrossSection {
    pub fn validate(&self) -> Result<()> {
        match self {
            ElectronicCrossSection::SqrtOnset {
                threshold_ev,
                sigma0_cm2,
                scale_ev,
            } => {
                if !(*threshold_ev > 0.0 && threshold_ev.is_finite()) {
                    return Err(Error::validation("sigma_el.threshold_ev", "must be > 0"));
                }
                if !(*sigma0_cm2 >= 0.0 && sigma0_cm2.is_finite()) {
                    return Err(Error::validation("sigma_el.sigma0_cm2", "must be >= 0"));
                }
                if !(*scale_ev > 0.0 && scale_ev.is_finite()) {
                    return Err(Error::validation("sigma_el.scale_ev", "must be > 0"));
                }
            }
            ElectronicCrossSection::Table {
                energies_ev,
                sigma_cm2,
            } => {
                if energies_ev.len() != sigma_cm2.len() || energies_ev.len() < 2 {
                    return Err(Error::validation(
                        "sigma_el",
                        "table needs at least two (energy, sigma) rows",
                    ));
                }
                if energies_ev[0] <= 0.0 || energies_ev.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::validation(
                        "sigma_el.energies_ev",
                        "energies must be positive and strictly increasing",
                    ));
                }
                if sigma_cm2.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
                    return Err(Error::validation(
                        "sigma_el.sigma_cm2",
                        "must be finite and >= 0",
                    ));
                }
            }
        }
        Ok(())
    }

    /// Lowest photon energy with non-zero σ_el.
    pub fn threshold_ev(&self) -> f64 {
        match self {
            ElectronicCrossSection::SqrtOnset { threshold_ev, .. } => *threshold_ev,
            ElectronicCrossSection::Table {
                energies_ev,
                sigma_cm2,
            } => match sigma_cm2.iter().position(|&s| s > 0.0) {
                Some(0) => energies_ev[0],
                Some(i) => energies_ev[i - 1],
                None => f64::INFINITY,
            },
        }
    }

    /// Upper end of the tabulated support.
    pub fn max_energy_ev(&self) -> f64 {
        match self {
            ElectronicCrossSection::SqrtOnset { .. } => f64::INFINITY,
            ElectronicCrossSection::Table { energies_ev, .. } => *energies_ev.last().unwrap(),
        }
    }

    pub fn eval(&self, e: f64) -> f64 {
        match self {
            ElectronicCrossSection::SqrtOnset {
                threshold_ev,
                sigma0_cm2,
                scale_ev,
            } => {
                if e <= *threshold_ev {
                    0.0
                } else {
                    sigma0_cm2 * ((e - threshold_ev) / scale_ev).sqrt()
                }
            }
            ElectronicCrossSection::Table {
                energies_ev: x,
                sigma_cm2: y,
            } => {
                if e < x[0] || e > x[x.len() - 1] {
                    return 0.0;
                }
                let i = x.partition_point(|&v| v <= e).clamp(1, x.len() - 1);
                let t = (e - x[i - 1]) / (x[i] - x[i - 1]);
                y[i - 1] + t * (y[i] - y[i - 1])
            }
        }
    }
}

fn parse_error(what: &str, message: impl Into<String>) -> Error {
    Error::Parse {
        what: what.into(),
        message: message.into(),
    }
}

fn parse_two_columns(text: &str, what: &str, header: [&str; 2]) -> Result<Vec<(f64, f64)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let h = rdr
        .headers()
        .map_err(|e| parse_error(what, e.to_string()))?
        .clone();
    if h.len() != 2 || h.get(0) != Some(header[0]) || h.get(1) != Some(header[1]) {
        return Err(parse_error(
            what,
            format!("expected header `{},{}`", header[0], header[1]),
        ));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| parse_error(what, e.to_string()))?;
        if rec.len() != 2 {
            return Err(parse_error(
                what,
                format!("row {}: expected 2 fields", i + 2),
            ));
        }
        let a: f64 = rec[0]
            .parse()
            .map_err(|_| parse_error(what, format!("row {}: bad number `{}`", i + 2, &rec[0])))?;
        let b: f64 = rec[1]
            .parse()
            .map_err(|_| parse_error(what, format!("row {}: bad number `{}`", i + 2, &rec[1])))?;
        if !(a.is_finite() && b.is_finite()) {
            return Err(parse_error(
                what,
                format!("row {}: non-finite value", i + 2),
            ));
        }
        out.push((a, b));
    }
    if out.is_empty() {
        return Err(parse_error(what, "no data rows"));
    }
    Ok(out)
}

/// Parses `energy_meV,S_k` rows; the broadening is supplied separately.
pub fn parse_mode_csv(text: &str, broadening_mev: f64) -> Result<VibrationalModeSet> {
    let modes = parse_two_columns(text, "mode table", ["energy_meV", "S_k"])?;
    let set = VibrationalModeSet {
        modes,
        broadening_mev,
    };
    set.validate()
        .map_err(|e| parse_error("mode table", e.to_string()))?;
    Ok(set)
}

/// Parses `energy_eV,sigma_cm2` rows.
pub fn parse_cross_section_csv(text: &str) -> Result<ElectronicCrossSection> {
    let rows = parse_two_columns(text, "cross-section table", ["energy_eV", "sigma_cm2"])?;
    let (energies_ev, sigma_cm2) = rows.into_iter().unzip();
    let t = ElectronicCrossSection::Table {
        energies_ev,
        sigma_cm2,
    };
    t.validate()
        .map_err(|e| parse_error("cross-section table", e.to_string()))?;
    Ok(t)
}

/// σ_PI(ε) = ε ∫ σ_el(ε′)/ε′ · A(ε − ε′) dε′ at each photon energy (cm²).
///
/// Trapezoid rule on the A grid mapped to ε′, merged with the breakpoints of σ_el.
pub fn convolve_cross_section(
    sigma_el: &ElectronicCrossSection,
    a: &SpectralFunction,
    photon_energies_ev: &[f64],
) -> Result<Vec<f64>> {
    sigma_el.validate()?;
    let x = &a.energies_ev;
    let n = x.len();
    let emax = sigma_el.max_energy_ev();
    let amax = a.values.iter().cloned().fold(0.0, f64::max);
    let breaks: Vec<f64> = match sigma_el {
        ElectronicCrossSection::SqrtOnset { threshold_ev, .. } => vec![*threshold_ev],
        ElectronicCrossSection::Table { energies_ev, .. } => energies_ev.clone(),
    };
    let mut out = Vec::with_capacity(photon_energies_ev.len());
    let mut nodes = Vec::with_capacity(n + breaks.len());
    for &e in photon_energies_ev {
        if !(e > 0.0 && e.is_finite()) {
            return Err(Error::domain(format!(
                "photon energy must be > 0 (got {e})"
            )));
        }
        nodes.clear();
        nodes.extend(x.iter().rev().map(|u| e - u));
        let (lo, hi) = (e - x[n - 1], e - x[0]);
        nodes.extend(breaks.iter().copied().filter(|&b| b > lo && b < hi));
        nodes.sort_by(|p, q| p.partial_cmp(q).unwrap());
        nodes.dedup_by(|p, q| (*p - *q).abs() <= 1e-15 * q.abs().max(1.0));
        let mut acc = 0.0;
        let mut prev: Option<(f64, f64)> = None;
        for &ep in nodes.iter() {
            let av = a.eval(e - ep);
            if ep > emax && av > 1e-9 * amax {
                return Err(Error::domain(format!(
                    "cross-section table ends at {emax} eV but {ep:.4} eV is needed for ε = {e} eV"
                )));
            }
            let g = if ep > 0.0 {
                sigma_el.eval(ep) / ep * av
            } else {
                0.0
            };
            if let Some((p, gp)) = prev {
                acc += 0.5 * (ep - p) * (g + gp);
            }
            prev = Some((ep, g));
        }
        out.push((e * acc).max(0.0));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_tables() {
        let m = parse_mode_csv("energy_meV,S_k\n30,1.0\n# c\n 45 , 0.5\n", 2.0).unwrap();
        assert_eq!(m.modes, vec![(30.0, 1.0), (45.0, 0.5)]);
        let s =
            parse_cross_section_csv("energy_eV,sigma_cm2\n1.3,0\n1.4,1e-16\n1.5,2e-16\n").unwrap();
        assert!((s.threshold_ev() - 1.3).abs() < 1e-12);
        assert!((s.eval(1.45) - 1.5e-16).abs() < 1e-28);
        assert_eq!(s.eval(1.0), 0.0);
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(parse_mode_csv("energy,S\n1,1\n", 1.0).is_err());
        assert!(parse_mode_csv("energy_meV,S_k\n", 1.0).is_err());
        assert!(parse_mode_csv("energy_meV,S_k\n-3,1\n", 1.0).is_err());
        assert!(parse_mode_csv("energy_meV,S_k\n3,x\n", 1.0).is_err());
        assert!(parse_cross_section_csv("energy_eV,sigma_cm2\n1.5,0\n1.4,1\n").is_err());
        assert!(parse_cross_section_csv("energy_eV,sigma_cm2\n1.4,1,2\n").is_err());
        assert!(parse_cross_section_csv("energy_eV,sigma_cm2\n1.4,NaN\n1.5,1\n").is_err());
    }

    #[test]
    fn zero_cross_section_gives_zero() {
        let a =
            SpectralFunction::from_samples(vec![-0.01, 0.0, 0.01], vec![0.0, 1.0, 0.0]).unwrap();
        let s = ElectronicCrossSection::SqrtOnset {
            threshold_ev: 1.31,
            sigma0_cm2: 0.0,
            scale_ev: 0.1,
        };
        let r = convolve_cross_section(&s, &a, &[1.2, 1.4, 1.6]).unwrap();
        assert!(r.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn table_support_mismatch() {
        let a =
            SpectralFunction::from_samples(vec![-0.01, 0.0, 0.01], vec![0.0, 1.0, 0.0]).unwrap();
        let s = parse_cross_section_csv("energy_eV,sigma_cm2\n1.3,0\n1.4,1e-16\n").unwrap();
        assert!(convolve_cross_section(&s, &a, &[1.35]).is_ok());
        assert!(convolve_cross_section(&s, &a, &[1.6]).is_err());
    }
}
