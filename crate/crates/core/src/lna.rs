//! Noise figure of an inductively degenerated cascode LNA as a function of
//! the antenna/LNA interface impedance.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DESIGN_FREQUENCY: f64 = 900e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LnaParams {
    pub g_m: f64,
    /// Gate resistance.
    pub r_g: f64,
    /// Equivalent noise resistance of the load.
    pub r_l: f64,
    /// Channel thermal-noise coefficient.
    pub gamma: f64,
    /// Induced gate-noise coefficient. Classical long-channel value is 4.
    pub delta: f64,
    pub c_gs: f64,
    pub c_ext: f64,
    pub l_deg: f64,
}

impl Default for LnaParams {
    fn default() -> Self {
        LnaParams {
            g_m: 366e-6,
            r_g: 18.0,
            r_l: 10e3,
            gamma: 1.1,
            delta: 0.0,
            c_gs: 0.0,
            c_ext: 0.0,
            l_deg: 0.0,
        }
    }
}

impl LnaParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.g_m > 0.0 && self.g_m.is_finite()) {
            return Err(Error::config(
                "g_m",
                format!("must be > 0, got {}", self.g_m),
            ));
        }
        if !(self.r_l > 0.0) {
            return Err(Error::config(
                "r_l",
                format!("must be > 0, got {}", self.r_l),
            ));
        }
        for (name, v) in [
            ("r_g", self.r_g),
            ("gamma", self.gamma),
            ("delta", self.delta),
            ("c_gs", self.c_gs),
            ("c_ext", self.c_ext),
            ("l_deg", self.l_deg),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(name, format!("must be >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// `gamma` lies in the range usually reported for short-channel devices.
    pub fn gamma_in_typical_band(&self) -> bool {
        (2.0 / 3.0..=2.0).contains(&self.gamma)
    }

    /// `gamma / g_m + 4 / (g_m^2 R_L)`, in ohms.
    pub fn lna_term(&self) -> f64 {
        self.gamma / self.g_m + 4.0 / (self.g_m * self.g_m * self.r_l)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterfaceImpedance {
    pub r_a: f64,
    pub x_a: f64,
}

impl InterfaceImpedance {
    /// Series inductance that produces `x_a` at `f`.
    pub fn inductance(&self, f: f64) -> f64 {
        self.x_a / (2.0 * PI * f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseFigure {
    pub factor: f64,
    pub nf_db: f64,
    /// `R_A / X_A^2`, set by the antenna and the interface.
    pub codesign_term: f64,
    /// `gamma / g_m + 4 / (g_m^2 R_L)`, set by the amplifier.
    pub lna_term: f64,
    /// `delta R_g / R_A`.
    pub gate_term: f64,
}

pub fn min_noise_factor(p: &LnaParams, z: &InterfaceImpedance) -> Result<NoiseFigure> {
    if !(z.r_a > 0.0) {
        return Err(Error::domain(format!("R_A must be > 0, got {}", z.r_a)));
    }
    if z.x_a == 0.0 || !z.x_a.is_finite() {
        return Err(Error::domain(format!(
            "X_A must be finite and non-zero, got {}",
            z.x_a
        )));
    }
    p.validate()?;
    let codesign_term = z.r_a / (z.x_a * z.x_a);
    let lna_term = p.lna_term();
    let gate_term = p.delta * p.r_g / z.r_a;
    let factor = 1.0 + gate_term + codesign_term * lna_term;
    Ok(NoiseFigure {
        factor,
        nf_db: 10.0 * factor.log10(),
        codesign_term,
        lna_term,
        gate_term,
    })
}

/// Transconductance that reaches `target_factor` at interface `z`, or
/// `None` if the gate-noise term alone already exceeds the target.
pub fn required_gm(
    p: &LnaParams,
    z: &InterfaceImpedance,
    target_factor: f64,
) -> Result<Option<f64>> {
    if !(z.r_a > 0.0) || z.x_a == 0.0 {
        return Err(Error::domain("need R_A > 0 and X_A != 0"));
    }
    let budget = target_factor - 1.0 - p.delta * p.r_g / z.r_a;
    if !(budget > 0.0) {
        return Ok(None);
    }
    // (R_A / X_A^2)(gamma u + 4 u^2 / R_L) = budget, with u = 1 / g_m
    let e = budget * z.x_a * z.x_a / z.r_a;
    let a = 4.0 / p.r_l;
    let u = 2.0 * e / (p.gamma + (p.gamma * p.gamma + 4.0 * a * e).sqrt());
    Ok(Some(1.0 / u))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSettings {
    pub frequency: f64,
    /// Antenna share of the interface inductance; the rest is `L_deg`.
    pub antenna_inductance: f64,
    /// Degeneration inductance at or above this is flagged impractical.
    pub l_deg_ceiling: f64,
    /// Points with a lower `R_A` are flagged (radiation efficiency too low).
    pub r_a_floor: f64,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            frequency: DESIGN_FREQUENCY,
            antenna_inductance: 0.0,
            l_deg_ceiling: 50e-9,
            r_a_floor: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub r_a: f64,
    pub x_a: f64,
    pub l_deg: f64,
    pub nf_db: f64,
    pub factor: f64,
    pub practical: bool,
    pub below_r_a_floor: bool,
}

/// Noise figure over the cartesian grid `r_a x x_a`.
pub fn nf_sweep(
    p: &LnaParams,
    settings: &SweepSettings,
    r_a: &[f64],
    x_a: &[f64],
) -> Result<Vec<SweepPoint>> {
    let mut out = Vec::with_capacity(r_a.len() * x_a.len());
    for &r in r_a {
        for &x in x_a {
            let z = InterfaceImpedance { r_a: r, x_a: x };
            let nf = min_noise_factor(p, &z)?;
            let l_deg = z.inductance(settings.frequency) - settings.antenna_inductance;
            out.push(SweepPoint {
                r_a: r,
                x_a: x,
                l_deg,
                nf_db: nf.nf_db,
                factor: nf.factor,
                practical: l_deg < settings.l_deg_ceiling,
                below_r_a_floor: r < settings.r_a_floor,
            });
        }
    }
    Ok(out)
}

/// Grid value of `R_A` that minimizes the noise factor at fixed `X_A`.
pub fn best_r_a(p: &LnaParams, x_a: f64, r_a_grid: &[f64]) -> Result<f64> {
    let mut best = (f64::NAN, f64::INFINITY);
    for &r in r_a_grid {
        let f = min_noise_factor(p, &InterfaceImpedance { r_a: r, x_a })?.factor;
        if f < best.1 {
            best = (r, f);
        }
    }
    if best.0.is_nan() {
        return Err(Error::domain("empty R_A grid"));
    }
    Ok(best.0)
}

/// `n` points spaced evenly between `lo` and `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn design() -> LnaParams {
        LnaParams::default()
    }

    #[test]
    fn design_point() {
        let z = InterfaceImpedance {
            r_a: 10.0,
            x_a: 282.7,
        };
        let nf = min_noise_factor(&design(), &z).unwrap();
        // terms recomputed by hand: 1.1 / 366e-6 and 4 / (366e-6^2 * 1e4)
        assert_relative_eq!(1.1 / 366e-6, 3005.464480874, max_relative = 1e-12);
        assert!((nf.lna_term - 5991.5).abs() < 0.05);
        assert!((nf.factor - 1.7495).abs() < 5e-4);
        assert!((nf.nf_db - 2.43).abs() < 0.01);
        assert_relative_eq!(z.inductance(900e6), 50e-9, max_relative = 1e-3);
    }

    #[test]
    fn infinite_reactance_limit() {
        let nf = min_noise_factor(
            &design(),
            &InterfaceImpedance {
                r_a: 10.0,
                x_a: 1e12,
            },
        )
        .unwrap();
        assert!(nf.nf_db < 1e-15);
    }

    #[test]
    fn doubling_reactance_quarters_codesign_term() {
        let a = min_noise_factor(
            &design(),
            &InterfaceImpedance {
                r_a: 7.0,
                x_a: 150.0,
            },
        )
        .unwrap();
        let b = min_noise_factor(
            &design(),
            &InterfaceImpedance {
                r_a: 7.0,
                x_a: 300.0,
            },
        )
        .unwrap();
        assert_relative_eq!(a.codesign_term / b.codesign_term, 4.0, max_relative = 1e-14);
    }

    #[test]
    fn domain_errors() {
        assert!(min_noise_factor(&design(), &InterfaceImpedance { r_a: 0.0, x_a: 1.0 }).is_err());
        assert!(min_noise_factor(&design(), &InterfaceImpedance { r_a: 1.0, x_a: 0.0 }).is_err());
    }

    #[test]
    fn sweep_flags_impractical_degeneration() {
        let pts = nf_sweep(
            &design(),
            &SweepSettings::default(),
            &[10.0],
            &[100.0, 2.0 * PI * 900e6 * 50e-9, 400.0],
        )
        .unwrap();
        assert!(pts[0].practical);
        assert!(!pts[1].practical, "50 nH is at the ceiling");
        assert!(!pts[2].practical);
        assert!(pts.windows(2).all(|w| w[1].nf_db < w[0].nf_db));
    }

    #[test]
    fn interior_minimum_with_gate_noise() {
        let p = LnaParams {
            delta: 4.0,
            ..design()
        };
        let x_a = 250.0;
        let coarse = linspace(1.0, 100.0, 100);
        let found = best_r_a(&p, x_a, &coarse).unwrap();
        assert!(found > 1.0 && found < 100.0, "minimum is interior");
        let dense = linspace(1.0, 100.0, 100_000);
        let brute = best_r_a(&p, x_a, &dense).unwrap();
        assert!((found - brute).abs() <= coarse[1] - coarse[0]);
        // analytic optimum sqrt(delta R_g X_A^2 / lna_term)
        let r_star = (p.delta * p.r_g * x_a * x_a / p.lna_term()).sqrt();
        assert!((brute - r_star).abs() < 1e-2);
    }

    #[test]
    fn required_gm_inverts_formula() {
        let p = design();
        let z = InterfaceImpedance {
            r_a: 10.0,
            x_a: 282.7,
        };
        let g = required_gm(&p, &z, 1.7495).unwrap().unwrap();
        let back = min_noise_factor(&LnaParams { g_m: g, ..p }, &z)
            .unwrap()
            .factor;
        assert_relative_eq!(back, 1.7495, max_relative = 1e-12);
        assert!((g - 366e-6).abs() < 0.1e-6);
        assert_eq!(
            required_gm(
                &LnaParams { delta: 4.0, ..p },
                &InterfaceImpedance {
                    r_a: 1.0,
                    x_a: 300.0
                },
                1.5
            )
            .unwrap(),
            None
        );
    }

    /// Bisection on `g_m`, independent of the closed-form inversion.
    fn bisect_gm(p: &LnaParams, z: &InterfaceImpedance, target: f64) -> f64 {
        let (mut lo, mut hi) = (1e-9f64, 10.0f64);
        for _ in 0..200 {
            let mid = (lo * hi).sqrt();
            let f = min_noise_factor(&LnaParams { g_m: mid, ..*p }, z)
                .unwrap()
                .factor;
            if f > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    proptest! {
        #[test]
        fn factor_at_least_one(r in 0.01f64..1e3, x in 0.1f64..1e4, d in 0.0f64..5.0) {
            let nf = min_noise_factor(&LnaParams { delta: d, ..design() }, &InterfaceImpedance { r_a: r, x_a: x }).unwrap();
            prop_assert!(nf.factor >= 1.0 && nf.nf_db >= 0.0);
        }

        #[test]
        fn partial_derivative_signs(r in 0.1f64..100.0, x in 10.0f64..1e3) {
            let f = |r, x| min_noise_factor(&design(), &InterfaceImpedance { r_a: r, x_a: x }).unwrap().factor;
            prop_assert!(f(r, x * 1.01) < f(r, x));
            prop_assert!(f(r * 1.01, x) > f(r, x));
        }

        #[test]
        fn required_gm_falls_with_boost(r in 1.0f64..50.0, x in 50.0f64..500.0, k in 1.05f64..4.0) {
            let p = design();
            let z = InterfaceImpedance { r_a: r, x_a: x };
            let target = 1.5;
            let g1 = bisect_gm(&p, &z, target);
            let g2 = bisect_gm(&p, &InterfaceImpedance { r_a: r, x_a: x * k.sqrt() }, target);
            prop_assert!(g2 < g1);
            let closed = required_gm(&p, &z, target).unwrap().unwrap();
            prop_assert!((closed / g1 - 1.0).abs() < 1e-9);
        }
    }
}
