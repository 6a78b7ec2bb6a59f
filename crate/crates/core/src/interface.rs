//! Antenna-electronics interface: conjugate matching, passive voltage boost
//! and the boosting-network resonance.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantities::ComplexImpedance;

/// Default ratio `X_A / R_A` above which the high-Q boost approximation is
/// considered valid.
pub const DEFAULT_Q_THRESHOLD: f64 = 10.0;

/// Antenna seen as a Thevenin source: series `R_A + j X_A` and the power it
/// makes available to a conjugate-matched load.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AntennaPort {
    pub r_a: f64,
    pub x_a: f64,
    pub p_av: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoostedVoltage {
    /// Peak load voltage in volts.
    pub volts: f64,
    /// `false` when `X_A / R_A` is below the configured threshold and the
    /// high-Q approximation should not be trusted.
    pub approximation_valid: bool,
}

fn check_port(port: &AntennaPort) -> Result<()> {
    if !(port.r_a > 0.0) {
        return Err(Error::domain(format!("R_A must be > 0, got {}", port.r_a)));
    }
    if !(port.p_av >= 0.0) {
        return Err(Error::domain(format!(
            "P_av must be >= 0, got {}",
            port.p_av
        )));
    }
    Ok(())
}

/// High-Q approximation of the load voltage under conjugate match:
/// `sqrt(2 P_av) * X_A / sqrt(R_A)`.
pub fn boosted_load_voltage(port: &AntennaPort) -> Result<BoostedVoltage> {
    boosted_load_voltage_with(port, DEFAULT_Q_THRESHOLD)
}

pub fn boosted_load_voltage_with(port: &AntennaPort, q_threshold: f64) -> Result<BoostedVoltage> {
    check_port(port)?;
    Ok(BoostedVoltage {
        volts: (2.0 * port.p_av).sqrt() * port.x_a.abs() / port.r_a.sqrt(),
        approximation_valid: port.x_a.abs() >= q_threshold * port.r_a,
    })
}

/// Exact peak load voltage of the series divider formed by the antenna
/// source and its conjugate load `R_A - j X_A`, with the source EMF chosen so
/// that `P_av` is available. Keeps the `R_A^2` term the high-Q form drops.
pub fn matched_divider_voltage(port: &AntennaPort) -> Result<f64> {
    check_port(port)?;
    let z_src = Complex64::new(port.r_a, port.x_a);
    let z_load = z_src.conj();
    // P_av = |V_s|^2 / (8 R_A) for a peak-amplitude source.
    let v_s = (8.0 * port.r_a * port.p_av).sqrt();
    let v_load = v_s * z_load / (z_src + z_load);
    Ok(v_load.norm())
}

/// Resonant boosting network between the loop antenna and the rectifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoostNetwork {
    /// Antenna self-inductance.
    pub l_a: f64,
    /// Antenna series resistance.
    pub r_a: f64,
    /// On-chip tuning capacitors.
    pub c_d: f64,
    pub c_b: f64,
    /// Rectifier input capacitance.
    pub c_rt: f64,
    /// Off-chip choke. Provides the DC path only; it does not enter the
    /// resonance.
    pub l_c: f64,
}

impl BoostNetwork {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("l_a", self.l_a),
            ("r_a", self.r_a),
            ("c_d", self.c_d),
            ("c_b", self.c_b),
            ("c_rt", self.c_rt),
            ("l_c", self.l_c),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(name, format!("must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Total tuning capacitance `C_D + C_B + C_RT`.
    pub fn c_vt(&self) -> f64 {
        self.c_d + self.c_b + self.c_rt
    }

    pub fn resonance(&self) -> Result<f64> {
        self.validate()?;
        Ok(resonance_frequency(self.l_a, self.c_vt()))
    }

    /// Loaded quality factor of the series resonator, `w0 L_A / R_A`.
    pub fn quality_factor(&self) -> Result<f64> {
        let f0 = self.resonance()?;
        Ok(2.0 * PI * f0 * self.l_a / self.r_a)
    }
}

pub fn resonance_frequency(l: f64, c: f64) -> f64 {
    1.0 / (2.0 * PI * (l * c).sqrt())
}

/// Inductance that resonates with `c_vt` at `f0`.
pub fn required_inductance(f0: f64, c_vt: f64) -> Result<f64> {
    if !(f0 > 0.0) || !(c_vt > 0.0) {
        return Err(Error::domain("f0 and C_VT must be > 0"));
    }
    let w0 = 2.0 * PI * f0;
    Ok(1.0 / (w0 * w0 * c_vt))
}

/// Fraction of the available source power delivered to the load,
/// `4 R_s R_l / |Z_s + Z_l|^2`.
pub fn power_transfer_factor(z_src: ComplexImpedance, z_load: ComplexImpedance) -> Result<f64> {
    if !(z_src.resistance > 0.0) {
        return Err(Error::domain(format!(
            "source resistance must be > 0, got {}",
            z_src.resistance
        )));
    }
    if !(z_load.resistance >= 0.0) {
        return Err(Error::domain(format!(
            "load resistance must be >= 0, got {}",
            z_load.resistance
        )));
    }
    let sum = z_src.to_complex() + z_load.to_complex();
    Ok(4.0 * z_src.resistance * z_load.resistance / sum.norm_sqr())
}
