use std::path::Path;

use jjosc::{Junction, Resonator};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JunctionSection {
    pub ic_a: f64,
    pub cs_f: f64,
    pub rs_ohm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonatorSection {
    pub l1_h: f64,
    pub c1_f: f64,
    pub r1_ohm: f64,
    #[serde(default)]
    pub lp_h: f64,
    /// Defaults to `qe` (no internal loss).
    pub qt: Option<f64>,
    /// Defaults to `sqrt(l1/c1)/r1`.
    pub qe: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSection {
    #[serde(default)]
    pub temperature_k: f64,
    /// One-sided PSD of low-frequency bias-line current noise (A²/Hz).
    pub bias_noise_psd_a2_per_hz: Option<f64>,
    #[serde(default = "default_corner")]
    pub bias_noise_corner_hz: f64,
}

fn default_corner() -> f64 {
    1e6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceConfig {
    pub junction: JunctionSection,
    pub resonator: ResonatorSection,
    #[serde(default)]
    pub environment: EnvironmentSection,
}

fn field(path: &str, ok: bool, reason: &str) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(format!("{path}: {reason}")))
    }
}

fn positive(path: &str, v: f64) -> Result<(), CliError> {
    field(path, v > 0.0 && v.is_finite(), "must be a finite number > 0")
}

fn non_negative(path: &str, v: f64) -> Result<(), CliError> {
    field(path, v >= 0.0 && v.is_finite(), "must be a finite number >= 0")
}

impl DeviceConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: DeviceConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<(Self, String), CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let cfg = Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        Ok((cfg, text))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let j = &self.junction;
        positive("junction.ic_a", j.ic_a)?;
        positive("junction.cs_f", j.cs_f)?;
        positive("junction.rs_ohm", j.rs_ohm)?;
        let r = &self.resonator;
        positive("resonator.l1_h", r.l1_h)?;
        positive("resonator.c1_f", r.c1_f)?;
        positive("resonator.r1_ohm", r.r1_ohm)?;
        non_negative("resonator.lp_h", r.lp_h)?;
        if let Some(q) = r.qe {
            positive("resonator.qe", q)?;
        }
        if let Some(q) = r.qt {
            positive("resonator.qt", q)?;
        }
        let (qt, qe) = self.quality_factors();
        field("resonator.qt", qt <= qe, "must not exceed resonator.qe")?;
        let e = &self.environment;
        non_negative("environment.temperature_k", e.temperature_k)?;
        if let Some(p) = e.bias_noise_psd_a2_per_hz {
            non_negative("environment.bias_noise_psd_a2_per_hz", p)?;
        }
        positive("environment.bias_noise_corner_hz", e.bias_noise_corner_hz)?;
        Ok(())
    }

    fn quality_factors(&self) -> (f64, f64) {
        let r = &self.resonator;
        let qe = r.qe.unwrap_or_else(|| (r.l1_h / r.c1_f).sqrt() / r.r1_ohm);
        (r.qt.unwrap_or(qe), qe)
    }

    pub fn junction(&self) -> Junction {
        Junction { ic: self.junction.ic_a, cs: self.junction.cs_f, rs: self.junction.rs_ohm }
    }

    pub fn resonator(&self) -> Resonator {
        let (qt, qe) = self.quality_factors();
        let r = &self.resonator;
        Resonator { l1: r.l1_h, c1: r.c1_f, r1: r.r1_ohm, lp: r.lp_h, qt, qe }
    }
}

/// `start:stop:step`, inclusive of `stop` up to rounding; a step of the form
/// `xF` multiplies by `F` instead of adding.
pub fn parse_sweep(flag: &str, text: &str) -> Result<Vec<f64>, CliError> {
    let bad = |why: &str| CliError::Config(format!("--{flag} `{text}`: {why}"));
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() == 1 {
        let v: f64 = parts[0].trim().parse().map_err(|_| bad("not a number"))?;
        return if v.is_finite() { Ok(vec![v]) } else { Err(bad("not finite")) };
    }
    if parts.len() != 3 {
        return Err(bad("expected start:stop:step"));
    }
    let num = |s: &str| -> Result<f64, CliError> {
        let v: f64 = s.trim().parse().map_err(|_| bad(&format!("`{s}` is not a number")))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(bad("values must be finite"))
        }
    };
    let start = num(parts[0])?;
    let stop = num(parts[1])?;
    let step = parts[2].trim();
    let mut out = Vec::new();
    if let Some(factor) = step.strip_prefix('x') {
        let factor = num(factor)?;
        if !(factor > 1.0) || !(start > 0.0) {
            return Err(bad("multiplicative sweeps need start > 0 and factor > 1"));
        }
        let n = ((stop / start).ln() / factor.ln() + 1e-9).floor();
        if !(n >= 0.0) {
            return Err(bad("empty range"));
        }
        for k in 0..=(n as usize) {
            out.push(start * factor.powi(k as i32));
        }
    } else {
        let step = num(step)?;
        if !(step > 0.0) {
            return Err(bad("step must be > 0"));
        }
        let n = ((stop - start) / step + 1e-9).floor();
        if !(n >= 0.0) {
            return Err(bad("empty range"));
        }
        if n > 1e7 {
            return Err(bad("more than 1e7 points"));
        }
        for k in 0..=(n as usize) {
            out.push(start + step * k as f64);
        }
    }
    Ok(out)
}
