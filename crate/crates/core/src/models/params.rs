//! Parameter registries and their flat `key = value` text form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Measured device constants.
///
/// Frequencies, rates and couplings are ordinary frequencies in MHz (the
/// "ω/2π" convention); lifetimes are in µs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemParams {
    pub f_a: f64,
    pub f_a0: f64,
    pub f_b: f64,
    pub f_b0: f64,
    pub f_p: f64,
    pub f_q: f64,
    pub f_r: f64,
    /// Buffer drive frequency; defaults to `f_b`.
    pub f_d: f64,
    #[serde(rename = "T1_a")]
    pub t1_a: f64,
    #[serde(rename = "T1_q")]
    pub t1_q: f64,
    #[serde(rename = "T2_q")]
    pub t2_q: f64,
    pub kappa_a: f64,
    pub kappa_b: f64,
    pub kappa_r: f64,
    pub chi_aa: f64,
    pub chi_bb: f64,
    pub chi_ba: f64,
    pub chi_qa: f64,
    pub chi_qq: f64,
    pub g2: f64,
    pub n_th: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            f_a: 8038.05,
            f_a0: 8038.9,
            f_b: 4833.6,
            f_b0: 4886.0,
            f_p: 11242.5,
            f_q: 4415.6,
            f_r: 6459.8,
            f_d: 4833.6,
            t1_a: 3.0,
            t1_q: 5.0,
            t2_q: 8.0,
            kappa_a: 0.053,
            kappa_b: 13.0,
            kappa_r: 1.47,
            chi_aa: -0.007,
            chi_bb: -32.0,
            chi_ba: 0.79,
            chi_qa: 0.72,
            chi_qq: 180.0,
            g2: 0.36,
            n_th: 0.01,
        }
    }
}

macro_rules! key_access {
    ($ty:ident { $($field:ident => $key:literal),* $(,)? }) => {
        impl $ty {
            /// Accepted keys, in registry order.
            pub const KEYS: &'static [&'static str] = &[$($key),*];

            pub fn get(&self, key: &str) -> Result<f64> {
                match key {
                    $($key => Ok(self.$field),)*
                    other => Err(Error::UnknownKey(other.to_string())),
                }
            }

            pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
                if !value.is_finite() {
                    return Err(Error::InvalidParameter(format!("{key} must be finite")));
                }
                match key {
                    $($key => self.$field = value,)*
                    other => return Err(Error::UnknownKey(other.to_string())),
                }
                Ok(())
            }

            /// Defaults overridden by every `key = value` line of `text`.
            pub fn from_kv(text: &str) -> Result<Self> {
                let mut p = Self::default();
                for (k, v) in parse_kv(text)? {
                    p.set(&k, v)?;
                }
                p.validate()?;
                Ok(p)
            }

            pub fn to_kv(&self) -> String {
                let mut out = String::new();
                for k in Self::KEYS {
                    out.push_str(&format!("{k} = {}\n", self.get(k).expect("registered key")));
                }
                out
            }
        }
    };
}

key_access!(SystemParams {
    f_a => "f_a", f_a0 => "f_a0", f_b => "f_b", f_b0 => "f_b0", f_p => "f_p", f_q => "f_q",
    f_r => "f_r", f_d => "f_d", t1_a => "T1_a", t1_q => "T1_q", t2_q => "T2_q",
    kappa_a => "kappa_a", kappa_b => "kappa_b", kappa_r => "kappa_r",
    chi_aa => "chi_aa", chi_bb => "chi_bb", chi_ba => "chi_ba", chi_qa => "chi_qa", chi_qq => "chi_qq",
    g2 => "g2", n_th => "n_th",
});

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("T1_a", self.t1_a), ("T1_q", self.t1_q), ("T2_q", self.t2_q)] {
            if !(v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive")));
            }
        }
        for (name, v) in [("kappa_a", self.kappa_a), ("kappa_b", self.kappa_b), ("kappa_r", self.kappa_r)] {
            if !(v >= 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be non-negative")));
            }
        }
        if !(self.n_th >= 0.0) {
            return Err(Error::InvalidParameter("n_th must be non-negative".into()));
        }
        Ok(())
    }

    /// Relative mismatch between `kappa_a` and 1/(2π T1_a).
    pub fn t1_mismatch(&self) -> f64 {
        let from_t1 = 1.0 / (2.0 * std::f64::consts::PI * self.t1_a);
        (self.kappa_a - from_t1).abs() / from_t1
    }

    /// Fails when `kappa_a` and `T1_a` disagree by more than 5%.
    pub fn check_t1_consistency(&self) -> Result<()> {
        let m = self.t1_mismatch();
        if m > 0.05 {
            return Err(Error::InvalidParameter(format!(
                "kappa_a = {} MHz and T1_a = {} us disagree by {:.1}%",
                self.kappa_a,
                self.t1_a,
                100.0 * m
            )));
        }
        Ok(())
    }

    /// Every rate and coupling multiplied by `s` and every lifetime divided
    /// by it; carrier frequencies are left alone.
    pub fn rescaled(&self, s: f64) -> Self {
        Self {
            t1_a: self.t1_a / s,
            t1_q: self.t1_q / s,
            t2_q: self.t2_q / s,
            kappa_a: self.kappa_a * s,
            kappa_b: self.kappa_b * s,
            kappa_r: self.kappa_r * s,
            chi_aa: self.chi_aa * s,
            chi_bb: self.chi_bb * s,
            chi_ba: self.chi_ba * s,
            chi_qa: self.chi_qa * s,
            chi_qq: self.chi_qq * s,
            g2: self.g2 * s,
            ..self.clone()
        }
    }
}

/// Circuit energies in GHz (E/h) plus the dimensionless phases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CircuitParams {
    #[serde(rename = "E_J")]
    pub e_j: f64,
    #[serde(rename = "dE_J")]
    pub de_j: f64,
    #[serde(rename = "E_Lb")]
    pub e_lb: f64,
    /// Josephson energy of each of the five array junctions.
    #[serde(rename = "E_JL")]
    pub e_jl: f64,
    #[serde(rename = "E_Ca")]
    pub e_ca: f64,
    #[serde(rename = "E_Cb")]
    pub e_cb: f64,
    #[serde(rename = "E_Cc")]
    pub e_cc: f64,
    #[serde(rename = "E_La")]
    pub e_la: f64,
    /// Zero-point phase of the cat mode across the ATS.
    pub phi_a: f64,
    /// Zero-point phase of the buffer across the ATS.
    pub phi_b: f64,
    /// Pump amplitude in the sum flux (rad).
    pub eps0: f64,
}

impl Default for CircuitParams {
    fn default() -> Self {
        // phi_a, phi_b and eps0 are not measured; these values give g2 = 0.36 MHz.
        Self {
            e_j: 90.0,
            de_j: 0.0,
            e_lb: 45.0,
            e_jl: 225.0,
            e_ca: 0.0927,
            e_cb: 0.0735,
            e_cc: 0.72,
            e_la: 96.6,
            phi_a: 0.02,
            phi_b: 0.4,
            eps0: 0.05,
        }
    }
}

key_access!(CircuitParams {
    e_j => "E_J", de_j => "dE_J", e_lb => "E_Lb", e_jl => "E_JL", e_ca => "E_Ca", e_cb => "E_Cb",
    e_cc => "E_Cc", e_la => "E_La", phi_a => "phi_a", phi_b => "phi_b", eps0 => "eps0",
});

impl CircuitParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.e_j > 0.0) {
            return Err(Error::InvalidParameter("E_J must be positive".into()));
        }
        Ok(())
    }

    /// Relative mismatch of `E_JL` against 5·`E_Lb`.
    pub fn array_mismatch(&self) -> f64 {
        (self.e_jl - 5.0 * self.e_lb).abs() / (5.0 * self.e_lb)
    }
}

/// Parses `key = value` lines. `#` starts a comment; blank lines are skipped.
pub fn parse_kv(text: &str) -> Result<Vec<(String, f64)>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected `key = value`", lineno + 1)))?;
        let value: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("line {}: `{}` is not a number", lineno + 1, v.trim())))?;
        out.push((k.trim().to_string(), value));
    }
    Ok(out)
}
