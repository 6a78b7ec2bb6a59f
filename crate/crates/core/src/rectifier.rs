//! Behavioral model of the multi-stage charge-pump rectifier.
//!
//! Efficiency is a parametric surface over input power and load resistance.
//! The default calibration pins the surface peak (60 % at -20 dBm) and the
//! operating range (-20 dBm to -4 dBm); the roll-off widths are model
//! choices, not measured values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interface::power_transfer_factor;
use crate::quantities::{dbm_to_watts, ComplexImpedance, PowerDbm};

/// How efficiency decays away from the peak along one log10 axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Rolloff {
    /// `exp(-(x / w)^2)`: quadratic in log-efficiency, never reaches zero.
    #[default]
    Quadratic,
    /// `(1 + cos(pi x / w)) / 2` for `|x| < w`, zero beyond.
    RaisedCosine,
}

impl Rolloff {
    fn factor(self, x: f64, width: f64) -> f64 {
        let u = x / width;
        match self {
            Rolloff::Quadratic => (-u * u).exp(),
            Rolloff::RaisedCosine => {
                if u.abs() >= 1.0 {
                    0.0
                } else {
                    0.5 * (1.0 + (std::f64::consts::PI * u).cos())
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PceSurface {
    pub peak_pce: f64,
    /// Input power at the peak, W.
    pub p_opt: f64,
    /// Load at the peak, ohms.
    pub r_opt: f64,
    /// Roll-off widths in decades.
    pub power_width: f64,
    pub load_width: f64,
    #[serde(default)]
    pub rolloff: Rolloff,
    /// Calibrated input-power range, W.
    pub p_min: f64,
    pub p_max: f64,
}

impl Default for PceSurface {
    fn default() -> Self {
        PceSurface {
            peak_pce: 0.60,
            p_opt: dbm_to_watts(PowerDbm(-20.0)).value(),
            r_opt: 820e3,
            power_width: 1.5,
            load_width: 1.0,
            rolloff: Rolloff::Quadratic,
            p_min: dbm_to_watts(PowerDbm(-20.0)).value(),
            p_max: dbm_to_watts(PowerDbm(-4.0)).value(),
        }
    }
}

/// Relative slack on the power-range edges so that values produced by a
/// dBm conversion land inside the range they name.
const RANGE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PceValue {
    pub pce: f64,
    pub in_range: bool,
}

impl PceSurface {
    pub fn validate(&self) -> Result<()> {
        if !(self.peak_pce > 0.0 && self.peak_pce <= 1.0) {
            return Err(Error::config("peak_pce", "must lie in (0, 1]"));
        }
        for (name, v) in [
            ("p_opt", self.p_opt),
            ("r_opt", self.r_opt),
            ("power_width", self.power_width),
            ("load_width", self.load_width),
            ("p_min", self.p_min),
            ("p_max", self.p_max),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(name, format!("must be > 0, got {v}")));
            }
        }
        if self.p_min > self.p_max {
            return Err(Error::config("p_min", "must not exceed p_max"));
        }
        Ok(())
    }

    pub fn pce(&self, p_in: f64, r_l: f64) -> Result<PceValue> {
        if !(p_in > 0.0) || !(r_l > 0.0) {
            return Err(Error::domain(format!(
                "input power and load must be > 0, got P_in={p_in}, R_L={r_l}"
            )));
        }
        let in_range =
            p_in >= self.p_min * (1.0 - RANGE_SLACK) && p_in <= self.p_max * (1.0 + RANGE_SLACK);
        if !in_range {
            return Ok(PceValue { pce: 0.0, in_range });
        }
        let xp = (p_in / self.p_opt).log10();
        let xr = (r_l / self.r_opt).log10();
        let pce = self.peak_pce
            * self.rolloff.factor(xp, self.power_width)
            * self.rolloff.factor(xr, self.load_width);
        Ok(PceValue { pce, in_range })
    }
}

/// Passive component values of one rectifier stage. Carried for
/// documentation and config fidelity; the behavioral model does not use them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StageComponents {
    pub c_c: f64,
    pub c_r1: f64,
    pub c_r2: f64,
    pub c_dc: f64,
    pub r_dc: f64,
    pub switch_width: f64,
    pub switch_length: f64,
}

impl Default for StageComponents {
    fn default() -> Self {
        StageComponents {
            c_c: 9e-12,
            c_r1: 9.7e-12,
            c_r2: 9.7e-12,
            c_dc: 90e-15,
            r_dc: 350e3,
            switch_width: 750e-6,
            switch_length: 0.2e-6,
        }
    }
}

/// Optional source/load pair describing input-impedance drift. When set, the
/// power reaching the rectifier is the available power scaled by the
/// conjugate-mismatch factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputMismatch {
    pub source: ComplexImpedance,
    pub load: ComplexImpedance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RectifierModel {
    pub n_stages: u32,
    pub surface: PceSurface,
    /// Rectifier input capacitance, F.
    pub c_rt: f64,
    #[serde(default)]
    pub components: StageComponents,
    #[serde(default)]
    pub mismatch: Option<InputMismatch>,
}

impl Default for RectifierModel {
    fn default() -> Self {
        RectifierModel {
            n_stages: 5,
            surface: PceSurface::default(),
            c_rt: 17e-12,
            components: StageComponents::default(),
            mismatch: None,
        }
    }
}

impl RectifierModel {
    pub fn validate(&self) -> Result<()> {
        if self.n_stages < 1 {
            return Err(Error::config("n_stages", "must be >= 1"));
        }
        if !(self.c_rt > 0.0) {
            return Err(Error::config("c_rt", "must be > 0"));
        }
        self.surface.validate().map_err(|e| e.within("surface"))
    }

    pub fn pce(&self, p_in: f64, r_l: f64) -> Result<PceValue> {
        self.surface.pce(p_in, r_l)
    }

    /// DC output voltage from the energy balance `V^2 / R_L = pce * P_in`.
    pub fn output_voltage(&self, p_in: f64, r_l: f64) -> Result<f64> {
        let v = self.pce(p_in, r_l)?;
        Ok((v.pce * p_in * r_l).sqrt())
    }

    /// Power reaching the rectifier input when `p_av` is available at the
    /// antenna, after the configured mismatch (if any).
    pub fn input_power(&self, p_av: f64) -> Result<f64> {
        match &self.mismatch {
            None => Ok(p_av),
            Some(m) => Ok(p_av * power_transfer_factor(m.source, m.load)?),
        }
    }

    /// DC power delivered to `r_l` with `p_in` at the rectifier input.
    pub fn delivered_power(&self, p_in: f64, r_l: f64) -> Result<f64> {
        Ok(self.pce(p_in, r_l)?.pce * p_in)
    }
}

/// Efficiency of the same delivered power against three input-power
/// accountings: theoretical (from antenna EMF), measured at the antenna, and
/// estimated at the rectifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PceAccounting {
    pub pce_theoretical: f64,
    pub pce_antenna: f64,
    pub pce_circuit: f64,
}

/// `V_A^2 / (2 Re{Z_A})` for a peak EMF `v_a`.
pub fn theoretical_input_power(v_a: f64, z_a: ComplexImpedance) -> Result<f64> {
    if !(z_a.resistance > 0.0) {
        return Err(Error::domain("Re{Z_A} must be > 0"));
    }
    Ok(v_a * v_a / (2.0 * z_a.resistance))
}

pub fn pce_accounting(
    delivered: f64,
    v_a: f64,
    z_a: ComplexImpedance,
    p_antenna: f64,
    p_circuit: f64,
) -> Result<PceAccounting> {
    let p_theor = theoretical_input_power(v_a, z_a)?;
    pce_accounting_from_powers(delivered, p_theor, p_antenna, p_circuit)
}

pub fn pce_accounting_from_powers(
    delivered: f64,
    p_theoretical: f64,
    p_antenna: f64,
    p_circuit: f64,
) -> Result<PceAccounting> {
    if !(delivered > 0.0 && p_theoretical > 0.0 && p_antenna > 0.0 && p_circuit > 0.0) {
        return Err(Error::domain("all powers must be > 0"));
    }
    let tol = 1e-12;
    if p_circuit > p_antenna * (1.0 + tol) || p_antenna > p_theoretical * (1.0 + tol) {
        return Err(Error::Inconsistent(format!(
            "expected P_circuit <= P_antenna <= P_theoretical, got {p_circuit:e}, {p_antenna:e}, {p_theoretical:e}"
        )));
    }
    Ok(PceAccounting {
        pce_theoretical: delivered / p_theoretical,
        pce_antenna: delivered / p_antenna,
        pce_circuit: delivered / p_circuit,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HarvestPoint {
    pub p_in: f64,
    pub r_l: f64,
    pub pce: f64,
    pub v_out: f64,
    pub in_range: bool,
}

/// Evaluates the model on the cartesian grid `powers x loads`.
pub fn harvest_sweep(
    model: &RectifierModel,
    powers: &[f64],
    loads: &[f64],
) -> Result<Vec<HarvestPoint>> {
    let mut out = Vec::with_capacity(powers.len() * loads.len());
    for &p_in in powers {
        for &r_l in loads {
            let v = model.pce(p_in, r_l)?;
            out.push(HarvestPoint {
                p_in,
                r_l,
                pce: v.pce,
                v_out: (v.pce * p_in * r_l).sqrt(),
                in_range: v.in_range,
            });
        }
    }
    Ok(out)
}
