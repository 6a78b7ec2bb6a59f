//! Free-space path loss plus a single ground reflection between two antennas
//! at the same height.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantities::{Spectrum, PSD_FLOOR_DBM};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkGeometry {
    /// Horizontal separation, m.
    pub d: f64,
    /// Height of both antennas above ground, m.
    pub h: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

fn default_gamma() -> f64 {
    -1.0
}

impl LinkGeometry {
    pub fn new(d: f64, h: f64) -> Result<Self> {
        let g = LinkGeometry { d, h, gamma: -1.0 };
        g.validate()?;
        Ok(g)
    }

    pub fn with_gamma(self, gamma: f64) -> Result<Self> {
        let g = LinkGeometry { gamma, ..self };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d > 0.0 && self.d.is_finite()) {
            return Err(Error::config("d", format!("must be > 0, got {}", self.d)));
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::config("h", format!("must be > 0, got {}", self.h)));
        }
        if !(self.gamma.abs() <= 1.0) {
            return Err(Error::config(
                "gamma",
                format!("|gamma| must be <= 1, got {}", self.gamma),
            ));
        }
        Ok(())
    }

    pub fn direct_path(&self) -> f64 {
        self.d
    }

    pub fn reflected_path(&self) -> f64 {
        self.d.hypot(2.0 * self.h)
    }
}

fn wavelength(f: f64) -> Result<f64> {
    if !(f > 0.0 && f.is_finite()) {
        return Err(Error::domain(format!("frequency must be > 0, got {f}")));
    }
    Ok(SPEED_OF_LIGHT / f)
}

/// Free-space power gain `(lambda / 4 pi d)^2` between isotropic antennas.
pub fn friis_gain(d: f64, f: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::domain("distance must be > 0"));
    }
    Ok((wavelength(f)? / (4.0 * PI * d)).powi(2))
}

/// Complex field ratio of the direct plus reflected rays.
pub fn two_ray_field(geom: &LinkGeometry, f: f64) -> Result<Complex64> {
    let lambda = wavelength(f)?;
    let k = 2.0 * PI / lambda;
    let (r1, r2) = (geom.direct_path(), geom.reflected_path());
    let ray = |r: f64| Complex64::from_polar(1.0 / r, -k * r);
    Ok(lambda / (4.0 * PI) * (ray(r1) + geom.gamma * ray(r2)))
}

pub fn two_ray_gain(geom: &LinkGeometry, f: f64) -> Result<f64> {
    Ok(two_ray_field(geom, f)?.norm_sqr())
}

/// Largest gain the two rays can reach at `f`, when they arrive in phase.
pub fn two_ray_bound(geom: &LinkGeometry, f: f64) -> Result<f64> {
    let lambda = wavelength(f)?;
    let amp =
        lambda / (4.0 * PI) * (1.0 / geom.direct_path() + geom.gamma.abs() / geom.reflected_path());
    Ok(amp * amp)
}

/// Transmitted PSD seen at the receiver. `matching` is an optional per-bin
/// linear power factor on the same grid as `tx`.
pub fn received_psd(
    tx: &Spectrum,
    geom: &LinkGeometry,
    matching: Option<&Spectrum>,
) -> Result<Spectrum> {
    geom.validate()?;
    if let Some(m) = matching {
        if !tx.same_grid(m) {
            return Err(Error::GridMismatch(format!(
                "tx has {} bins at {} Hz, matching has {} bins at {} Hz",
                tx.bins.len(),
                tx.df,
                m.bins.len(),
                m.df
            )));
        }
    }
    if tx.bins.iter().any(|b| !b.is_finite()) {
        return Err(Error::NonFinite(
            "transmit PSD contains non-finite bins".into(),
        ));
    }
    let mut bins = Vec::with_capacity(tx.bins.len());
    for (k, (f, &level)) in tx.frequencies().zip(&tx.bins).enumerate() {
        let mut gain = if f > 0.0 { two_ray_gain(geom, f)? } else { 0.0 };
        if let Some(m) = matching {
            gain *= m.bins[k];
        }
        bins.push(if gain > 0.0 {
            (level + 10.0 * gain.log10()).max(PSD_FLOOR_DBM)
        } else {
            PSD_FLOOR_DBM
        });
    }
    Spectrum::new(tx.df, bins, tx.ref_bw)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkStudy {
    pub distances: Vec<f64>,
    pub heights: Vec<f64>,
    pub gamma: f64,
}

impl Default for LinkStudy {
    fn default() -> Self {
        LinkStudy {
            distances: vec![0.1, 1.0, 10.0],
            heights: vec![0.1, 10.0],
            gamma: -1.0,
        }
    }
}

impl LinkStudy {
    pub fn validate(&self) -> Result<()> {
        if self.distances.is_empty() || self.heights.is_empty() {
            return Err(Error::config(
                "distances",
                "need at least one distance and one height",
            ));
        }
        for (i, &d) in self.distances.iter().enumerate() {
            LinkGeometry {
                d,
                h: 1.0,
                gamma: self.gamma,
            }
            .validate()
            .map_err(|_| {
                Error::config(format!("distances[{i}]"), format!("must be > 0, got {d}"))
            })?;
        }
        for (i, &h) in self.heights.iter().enumerate() {
            LinkGeometry {
                d: 1.0,
                h,
                gamma: self.gamma,
            }
            .validate()
            .map_err(|_| Error::config(format!("heights[{i}]"), format!("must be > 0, got {h}")))?;
        }
        LinkGeometry {
            d: 1.0,
            h: 1.0,
            gamma: self.gamma,
        }
        .validate()
    }

    pub fn geometries(&self) -> Vec<LinkGeometry> {
        self.heights
            .iter()
            .flat_map(|&h| {
                self.distances.iter().map(move |&d| LinkGeometry {
                    d,
                    h,
                    gamma: self.gamma,
                })
            })
            .collect()
    }
}

/// Received PSD for every geometry of the study, in height-major order.
pub fn link_study(tx: &Spectrum, study: &LinkStudy) -> Result<Vec<(LinkGeometry, Spectrum)>> {
    study.validate()?;
    study
        .geometries()
        .into_iter()
        .map(|g| Ok((g, received_psd(tx, &g, None)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn geom(d: f64, h: f64) -> LinkGeometry {
        LinkGeometry::new(d, h).unwrap()
    }

    #[test]
    fn no_reflection_is_friis() {
        for (d, f) in [(0.1, 1e8), (1.0, 5e8), (10.0, 9.15e8), (37.0, 2.4e9)] {
            let g = geom(d, 1.5).with_gamma(0.0).unwrap();
            assert_relative_eq!(
                two_ray_gain(&g, f).unwrap(),
                friis_gain(d, f).unwrap(),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn half_wave_path_difference_adds_fields() {
        let g = geom(2.0, 0.75);
        let lambda = 2.0 * (g.reflected_path() - g.direct_path());
        let f = SPEED_OF_LIGHT / lambda;
        let expect = two_ray_bound(&g, f).unwrap();
        assert_relative_eq!(two_ray_gain(&g, f).unwrap(), expect, max_relative = 1e-9);
    }

    #[test]
    fn grazing_rays_cancel() {
        let f = 5e8;
        let free = friis_gain(3.0, f).unwrap();
        let mut prev = f64::INFINITY;
        for h in [1e-1, 1e-2, 1e-3, 1e-4] {
            let g = two_ray_gain(&geom(3.0, h), f).unwrap();
            assert!(g < prev);
            prev = g;
        }
        assert!(prev < 1e-6 * free);
    }

    #[test]
    fn geometry_validation() {
        assert!(LinkGeometry::new(0.0, 1.0).is_err());
        assert!(LinkGeometry::new(1.0, -1.0).is_err());
        assert!(geom(1.0, 1.0).with_gamma(-1.2).is_err());
        assert!(two_ray_gain(&geom(1.0, 1.0), 0.0).is_err());
    }

    #[test]
    fn zero_gain_goes_to_floor() {
        let tx = Spectrum::new(1e6, vec![-50.0; 11], 1e6).unwrap();
        let m = Spectrum::new(1e6, vec![0.0; 11], 1e6).unwrap();
        let rx = received_psd(&tx, &geom(1.0, 1.0), Some(&m)).unwrap();
        assert!(rx.bins.iter().all(|&b| b == PSD_FLOOR_DBM));
        assert!(rx.same_grid(&tx));
    }

    #[test]
    fn matching_grid_checked() {
        let tx = Spectrum::new(1e6, vec![-50.0; 11], 1e6).unwrap();
        let m = Spectrum::new(2e6, vec![1.0; 11], 1e6).unwrap();
        assert!(matches!(
            received_psd(&tx, &geom(1.0, 1.0), Some(&m)),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn received_bins_follow_gain() {
        let tx = Spectrum::new(10e6, vec![-40.0; 101], 1e6).unwrap();
        let g = geom(1.0, 0.5);
        let rx = received_psd(&tx, &g, None).unwrap();
        assert_eq!(rx.bins[0], PSD_FLOOR_DBM);
        for k in [1, 37, 100] {
            let f = tx.frequency(k);
            let expect = -40.0 + 10.0 * two_ray_gain(&g, f).unwrap().log10();
            assert_relative_eq!(rx.bins[k], expect.max(PSD_FLOOR_DBM), max_relative = 1e-12);
        }
    }

    proptest! {
        #[test]
        fn gain_never_exceeds_in_phase_sum(
            d in 0.01f64..100.0,
            h in 0.01f64..20.0,
            gamma in -1.0f64..=1.0,
            f in 1e6f64..1e10,
        ) {
            let g = LinkGeometry::new(d, h).unwrap().with_gamma(gamma).unwrap();
            prop_assert!(two_ray_gain(&g, f).unwrap() <= two_ray_bound(&g, f).unwrap() * (1.0 + 1e-12));
        }
    }
}
