//! Shared physical quantities: power units, impedances, rational transfer
//! functions, sampled waveforms and power spectra.

use std::f64::consts::PI;
use std::ops::{Add, Mul};

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reference bandwidth used for spectral-mask work (1 MHz).
pub const DEFAULT_REF_BW: f64 = 1e6;
/// Load across which waveform voltages are converted to power.
pub const DEFAULT_LOAD_OHMS: f64 = 50.0;
/// Bins below this level are clamped so spectra stay finite.
pub const PSD_FLOOR_DBM: f64 = -200.0;

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct PowerDbm(pub f64);

/// Power in watts. Always non-negative.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct PowerWatts(f64);

impl PowerWatts {
    pub fn new(watts: f64) -> Result<Self> {
        if !(watts >= 0.0) || !watts.is_finite() {
            return Err(Error::domain(format!(
                "power must be finite and >= 0, got {watts}"
            )));
        }
        Ok(PowerWatts(watts))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

pub fn dbm_to_watts(p: PowerDbm) -> PowerWatts {
    PowerWatts(1e-3 * 10f64.powf(p.0 / 10.0))
}

/// Zero watts maps to negative infinity.
pub fn watts_to_dbm(p: PowerWatts) -> PowerDbm {
    PowerDbm(10.0 * (p.0 / 1e-3).log10())
}

/// Series impedance `R + jX` in ohms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexImpedance {
    pub resistance: f64,
    pub reactance: f64,
}

impl ComplexImpedance {
    pub const fn new(resistance: f64, reactance: f64) -> Self {
        ComplexImpedance {
            resistance,
            reactance,
        }
    }

    pub fn conj(self) -> Self {
        ComplexImpedance::new(self.resistance, -self.reactance)
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.resistance, self.reactance)
    }

    pub fn magnitude(self) -> f64 {
        self.to_complex().norm()
    }
}

impl From<Complex64> for ComplexImpedance {
    fn from(z: Complex64) -> Self {
        ComplexImpedance::new(z.re, z.im)
    }
}

/// Ratio of two real-coefficient polynomials in the Laplace variable `s`.
///
/// Coefficients are stored in ascending powers: `num[k]` multiplies `s^k`.
/// Construction strips trailing zero coefficients and cancels common factors
/// of `s`, after which the denominator must have a nonzero constant term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalTf {
    num: Vec<f64>,
    den: Vec<f64>,
}

impl RationalTf {
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Result<Self> {
        if num.iter().chain(den.iter()).any(|c| !c.is_finite()) {
            return Err(Error::domain(
                "transfer function coefficients must be finite",
            ));
        }
        let mut num = trim_high(num);
        let mut den = trim_high(den);
        if den.is_empty() {
            return Err(Error::domain("denominator is identically zero"));
        }
        if num.is_empty() {
            return Ok(RationalTf {
                num: vec![0.0],
                den: vec![1.0],
            });
        }
        let shift = leading_zeros(&num).min(leading_zeros(&den));
        num.drain(..shift);
        den.drain(..shift);
        if den[0] == 0.0 {
            return Err(Error::domain("denominator has a pole at s = 0"));
        }
        Ok(RationalTf { num, den })
    }

    pub fn constant(value: f64) -> Self {
        RationalTf {
            num: vec![value],
            den: vec![1.0],
        }
    }

    /// Polynomial `c0 + c1 s + ...` with unit denominator.
    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        RationalTf::new(coeffs, vec![1.0])
    }

    pub fn numerator(&self) -> &[f64] {
        &self.num
    }

    pub fn denominator(&self) -> &[f64] {
        &self.den
    }

    pub fn reciprocal(&self) -> Result<Self> {
        RationalTf::new(self.den.clone(), self.num.clone())
    }

    pub fn scale(&self, k: f64) -> Self {
        RationalTf {
            num: self.num.iter().map(|c| c * k).collect(),
            den: self.den.clone(),
        }
    }

    pub fn eval_s(&self, s: Complex64) -> Result<Complex64> {
        let n = horner(&self.num, s);
        let d = horner(&self.den, s);
        if d == Complex64::new(0.0, 0.0) {
            return Err(Error::NonFinite(format!("pole at s = {s}")));
        }
        let v = n / d;
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(Error::NonFinite(format!("evaluation at s = {s}")));
        }
        Ok(v)
    }

    /// Evaluates at `s = j 2 pi f`.
    pub fn eval(&self, f: f64) -> Result<Complex64> {
        if !(f >= 0.0) {
            return Err(Error::domain(format!("frequency must be >= 0, got {f}")));
        }
        self.eval_s(Complex64::new(0.0, 2.0 * PI * f))
    }

    pub fn try_add(&self, other: &RationalTf) -> Result<RationalTf> {
        let num = poly_add(
            &poly_mul(&self.num, &other.den),
            &poly_mul(&other.num, &self.den),
        );
        RationalTf::new(num, poly_mul(&self.den, &other.den))
    }

    pub fn try_mul(&self, other: &RationalTf) -> Result<RationalTf> {
        RationalTf::new(
            poly_mul(&self.num, &other.num),
            poly_mul(&self.den, &other.den),
        )
    }

    pub fn try_div(&self, other: &RationalTf) -> Result<RationalTf> {
        RationalTf::new(
            poly_mul(&self.num, &other.den),
            poly_mul(&self.den, &other.num),
        )
    }
}

impl Add for &RationalTf {
    type Output = RationalTf;

    /// Panics only if the sum has a pole at the origin, which cannot happen
    /// for two operands that are themselves finite at s = 0.
    fn add(self, rhs: &RationalTf) -> RationalTf {
        self.try_add(rhs)
            .expect("sum of finite-at-DC transfer functions")
    }
}

impl Mul for &RationalTf {
    type Output = RationalTf;

    fn mul(self, rhs: &RationalTf) -> RationalTf {
        self.try_mul(rhs)
            .expect("product of finite-at-DC transfer functions")
    }
}

fn trim_high(mut c: Vec<f64>) -> Vec<f64> {
    while c.last() == Some(&0.0) {
        c.pop();
    }
    c
}

fn leading_zeros(c: &[f64]) -> usize {
    c.iter().take_while(|&&x| x == 0.0).count()
}

fn horner(c: &[f64], s: Complex64) -> Complex64 {
    c.iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &k| acc * s + k)
}

pub(crate) fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

pub(crate) fn poly_add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| a.get(i).copied().unwrap_or(0.0) + b.get(i).copied().unwrap_or(0.0))
        .collect()
}

/// Uniformly sampled signal (volts or amperes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    pub dt: f64,
    pub t0: f64,
    pub samples: Vec<f64>,
}

impl Waveform {
    pub fn new(dt: f64, t0: f64, samples: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::domain(format!(
                "sample period must be > 0, got {dt}"
            )));
        }
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("waveform sample {i}")));
        }
        Ok(Waveform { dt, t0, samples })
    }

    pub fn zeros(dt: f64, n: usize) -> Result<Self> {
        Waveform::new(dt, 0.0, vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 * self.dt
    }

    pub fn sample_rate(&self) -> f64 {
        1.0 / self.dt
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn peak_to_peak(&self) -> f64 {
        let (lo, hi) = self
            .samples
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                (lo.min(x), hi.max(x))
            });
        if self.samples.is_empty() {
            0.0
        } else {
            hi - lo
        }
    }

    pub fn mean_square(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|x| x * x).sum::<f64>() / self.samples.len() as f64
    }

    /// Rectangle-rule integral of `v^2 / load` over the record.
    pub fn energy(&self, load: f64) -> f64 {
        self.samples.iter().map(|x| x * x).sum::<f64>() * self.dt / load
    }
}

/// One-sided power spectrum on a uniform grid `k * df`, in dBm per
/// reference bandwidth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub df: f64,
    pub bins: Vec<f64>,
    pub ref_bw: f64,
}

impl Spectrum {
    pub fn new(df: f64, bins: Vec<f64>, ref_bw: f64) -> Result<Self> {
        if !(df > 0.0) {
            return Err(Error::domain(format!(
                "frequency step must be > 0, got {df}"
            )));
        }
        if !(ref_bw > 0.0) {
            return Err(Error::domain(format!(
                "reference bandwidth must be > 0, got {ref_bw}"
            )));
        }
        if bins.iter().any(|b| b.is_nan()) {
            return Err(Error::NonFinite("spectrum bin".into()));
        }
        Ok(Spectrum { df, bins, ref_bw })
    }

    pub fn frequency(&self, k: usize) -> f64 {
        k as f64 * self.df
    }

    pub fn max_frequency(&self) -> f64 {
        self.frequency(self.bins.len().saturating_sub(1))
    }

    pub fn frequencies(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.bins.len()).map(move |k| self.frequency(k))
    }

    /// Linear interpolation in dB between neighbouring bins. `None` outside
    /// the grid.
    pub fn value_at(&self, f: f64) -> Option<f64> {
        if self.bins.is_empty() || f < 0.0 || f > self.max_frequency() {
            return None;
        }
        let x = f / self.df;
        let k = (x.floor() as usize).min(self.bins.len() - 1);
        if k + 1 >= self.bins.len() {
            return Some(self.bins[k]);
        }
        let w = x - k as f64;
        Some(self.bins[k] * (1.0 - w) + self.bins[k + 1] * w)
    }

    /// Total power in watts: each bin holds power per `ref_bw`, so a bin
    /// contributes `p * df / ref_bw`.
    pub fn integrated_power_w(&self) -> f64 {
        self.bins
            .iter()
            .map(|&b| 1e-3 * 10f64.powf(b / 10.0) * self.df / self.ref_bw)
            .sum()
    }

    /// Integrated power restricted to `[f_lo, f_hi]`.
    pub fn band_power_w(&self, f_lo: f64, f_hi: f64) -> f64 {
        self.frequencies()
            .zip(&self.bins)
            .filter(|(f, _)| *f >= f_lo && *f <= f_hi)
            .map(|(_, &b)| 1e-3 * 10f64.powf(b / 10.0) * self.df / self.ref_bw)
            .sum()
    }

    /// Frequency and level of the strongest bin.
    pub fn peak(&self) -> (f64, f64) {
        let (k, v) =
            self.bins
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |(bk, bv), (k, &v)| {
                    if v > bv {
                        (k, v)
                    } else {
                        (bk, bv)
                    }
                });
        (self.frequency(k), v)
    }

    pub fn same_grid(&self, other: &Spectrum) -> bool {
        self.bins.len() == other.bins.len()
            && (self.df - other.df).abs() <= 1e-12 * self.df
            && (self.ref_bw - other.ref_bw).abs() <= 1e-12 * self.ref_bw
    }
}

pub(crate) fn watts_to_dbm_clamped(w: f64) -> f64 {
    if w > 0.0 {
        (10.0 * (w / 1e-3).log10()).max(PSD_FLOOR_DBM)
    } else {
        PSD_FLOOR_DBM
    }
}

/// Average power spectral density of the periodic train obtained by
/// repeating `w` every `1 / prf` seconds.
///
/// The record is folded modulo one period (so pulse tails longer than the
/// period wrap around exactly as they would in the train) and transformed
/// with a DFT. Harmonic `k` carries line power `P_k`; the density reported in
/// bin `k` spreads that line over the line spacing, giving
/// `P_k * ref_bw / prf` per reference bandwidth. With this convention the
/// integrated spectrum equals the average power of the train.
///
/// The period is rounded to a whole number of samples; the returned
/// frequency step is the exact repetition rate of the folded record.
pub fn psd_estimate(w: &Waveform, prf: f64, ref_bw: f64, load: f64) -> Result<Spectrum> {
    if !(prf > 0.0) {
        return Err(Error::domain(format!("PRF must be > 0, got {prf}")));
    }
    if !(load > 0.0) {
        return Err(Error::domain(format!("load must be > 0, got {load}")));
    }
    let period = 1.0 / prf;
    let n = (period / w.dt).round() as usize;
    if n < 2 || w.len() < n {
        return Err(Error::TooShort {
            span: w.duration(),
            needed: period,
        });
    }
    let mut folded = vec![Complex64::new(0.0, 0.0); n];
    for (i, &x) in w.samples.iter().enumerate() {
        folded[i % n].re += x;
    }
    FftPlanner::new().plan_fft_forward(n).process(&mut folded);

    let df = 1.0 / (n as f64 * w.dt);
    let n_bins = n / 2 + 1;
    let scale = 1.0 / (n as f64 * n as f64 * load);
    let bins = (0..n_bins)
        .map(|k| {
            let mut p = folded[k].norm_sqr() * scale;
            // Fold negative frequencies into the one-sided spectrum, except
            // for DC and (even n) the Nyquist bin.
            if k != 0 && !(n.is_multiple_of(2) && k == n / 2) {
                p *= 2.0;
            }
            watts_to_dbm_clamped(p * ref_bw / df)
        })
        .collect();
    Spectrum::new(df, bins, ref_bw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn dbm_anchor_points() {
        assert_relative_eq!(
            dbm_to_watts(PowerDbm(0.0)).value(),
            1e-3,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            dbm_to_watts(PowerDbm(-20.0)).value(),
            10e-6,
            max_relative = 1e-15
        );
        // 10^(-0.4) mW = 0.3981071705534972 mW
        assert_relative_eq!(
            dbm_to_watts(PowerDbm(-4.0)).value(),
            398.107_170_553_497_2e-6,
            max_relative = 1e-13
        );
    }

    #[test]
    fn negative_power_rejected() {
        assert!(PowerWatts::new(-1e-9).is_err());
        assert!(PowerWatts::new(f64::NAN).is_err());
        assert_eq!(
            watts_to_dbm(PowerWatts::new(0.0).unwrap()).0,
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn constant_tf_is_flat() {
        let tf = RationalTf::constant(5.0);
        for f in [0.0, 1.0, 1e6, 1e9] {
            assert_eq!(tf.eval(f).unwrap(), Complex64::new(5.0, 0.0));
        }
    }

    fn zpg(rs: f64, l: f64, c: f64) -> RationalTf {
        RationalTf::new(vec![rs, l], vec![1.0, rs * c, l * c]).unwrap()
    }

    #[test]
    fn branch_tf_at_dc_is_source_resistance() {
        assert_eq!(
            zpg(5.0, 10e-9, 10e-12).eval(0.0).unwrap(),
            Complex64::new(5.0, 0.0)
        );
    }

    #[test]
    fn branch_tf_matches_direct_complex_arithmetic() {
        let (rs, l, c, f) = (5.0, 10e-9, 10e-12, 100e6);
        let w = 2.0 * PI * f;
        let j = Complex64::i();
        let direct = (rs + j * w * l) / (1.0 - w * w * l * c + j * w * rs * c);
        let v = zpg(rs, l, c).eval(f).unwrap();
        assert_relative_eq!(v.re, direct.re, max_relative = 1e-12);
        assert_relative_eq!(v.im, direct.im, max_relative = 1e-12);
    }

    #[test]
    fn pole_on_axis_is_reported() {
        // 1 / (1 + s^2) has poles at s = +-j, i.e. f = 1 / (2 pi).
        let tf = RationalTf::new(vec![1.0], vec![1.0, 0.0, 1.0]).unwrap();
        let f_pole = 1.0 / (2.0 * PI);
        let r = tf.eval_s(Complex64::new(0.0, 1.0));
        assert!(matches!(r, Err(Error::NonFinite(_))), "{r:?}");
        assert!(tf.eval(f_pole * 1.01).is_ok());
    }

    #[test]
    fn common_s_factors_cancel() {
        let tf = RationalTf::new(vec![0.0, 0.0, 2.0], vec![0.0, 1.0, 3.0]).unwrap();
        assert_eq!(tf.numerator(), &[0.0, 2.0]);
        assert_eq!(tf.denominator(), &[1.0, 3.0]);
        assert!(RationalTf::new(vec![1.0], vec![0.0, 1.0]).is_err());
        assert!(RationalTf::new(vec![1.0], vec![0.0]).is_err());
    }

    #[test]
    fn zero_waveform_psd_is_floor() {
        let w = Waveform::zeros(1e-10, 1000).unwrap();
        let s = psd_estimate(&w, 10e6, DEFAULT_REF_BW, DEFAULT_LOAD_OHMS).unwrap();
        assert!(s.bins.iter().all(|&b| b == PSD_FLOOR_DBM));
    }

    #[test]
    fn short_waveform_rejected() {
        let w = Waveform::zeros(1e-10, 999).unwrap();
        assert!(matches!(
            psd_estimate(&w, 10e6, DEFAULT_REF_BW, DEFAULT_LOAD_OHMS),
            Err(Error::TooShort { .. })
        ));
    }

    #[test]
    fn single_tone_power() {
        // 500 MHz tone sampled at 10 GS/s, PRF 10 MHz -> tone sits on harmonic 50.
        let (a, fs, f0, prf) = (0.3, 10e9, 500e6, 10e6);
        let n = (fs / prf) as usize;
        let samples = (0..n)
            .map(|i| a * (2.0 * PI * f0 * i as f64 / fs).sin())
            .collect();
        let w = Waveform::new(1.0 / fs, 0.0, samples).unwrap();
        let s = psd_estimate(&w, prf, DEFAULT_REF_BW, 50.0).unwrap();
        let (fpk, _) = s.peak();
        assert_relative_eq!(fpk, f0, max_relative = 1e-12);
        let expected = a * a / (2.0 * 50.0);
        let band = s.band_power_w(f0 - 1.0, f0 + 1.0);
        let err_db = 10.0 * (band / expected).log10();
        assert!(err_db.abs() < 0.5, "tone power off by {err_db} dB");
        // every other bin is at the numerical floor of the DFT
        let rest = s.integrated_power_w() - band;
        assert!(rest < 1e-12 * expected);
    }

    #[test]
    fn spectrum_interpolation_and_peak() {
        let s = Spectrum::new(1.0, vec![-10.0, -20.0, -5.0], 1.0).unwrap();
        assert_eq!(s.value_at(0.5), Some(-15.0));
        assert_eq!(s.value_at(2.0), Some(-5.0));
        assert_eq!(s.value_at(2.5), None);
        assert_eq!(s.peak(), (2.0, -5.0));
    }

    proptest! {
        #[test]
        fn dbm_round_trip(p in -60.0f64..30.0) {
            let back = watts_to_dbm(dbm_to_watts(PowerDbm(p))).0;
            prop_assert!((back - p).abs() <= 1e-12 * p.abs().max(1e-300) + 1e-13);
        }

        #[test]
        fn tf_product_evaluates_to_product(
            a in proptest::collection::vec(0.1f64..2.0, 1..4),
            b in proptest::collection::vec(0.1f64..2.0, 2..4),
            c in proptest::collection::vec(0.1f64..2.0, 1..4),
            d in proptest::collection::vec(0.1f64..2.0, 2..4),
            f in 0.0f64..1.0,
        ) {
            // All-positive coefficients of degree <= 3 can still place poles on
            // the axis (e.g. 1 + s^2), so skip those draws.
            let t1 = RationalTf::new(a, b).unwrap();
            let t2 = RationalTf::new(c, d).unwrap();
            let (Ok(v1), Ok(v2)) = (t1.eval(f), t2.eval(f)) else { return Ok(()); };
            let prod = (&t1 * &t2).eval(f).unwrap();
            let want = v1 * v2;
            prop_assume!(want.norm() < 1e6);
            prop_assert!((prod - want).norm() <= 1e-9 * want.norm());
        }

        #[test]
        fn parseval_random_band_limited(
            amps in proptest::collection::vec(-1.0f64..1.0, 1..8),
            phases in proptest::collection::vec(0.0f64..std::f64::consts::TAU, 8),
        ) {
            // sum of harmonics of the PRF, sampled at 8 GS/s over one period
            let (fs, prf) = (8e9, 20e6);
            let n = (fs / prf) as usize;
            let samples: Vec<f64> = (0..n).map(|i| {
                let t = i as f64 / fs;
                amps.iter().enumerate().map(|(h, a)| {
                    a * (2.0 * PI * prf * (3 * h + 1) as f64 * t + phases[h]).cos()
                }).sum()
            }).collect();
            let w = Waveform::new(1.0 / fs, 0.0, samples).unwrap();
            let avg = w.mean_square() / 50.0;
            prop_assume!(avg > 1e-6);
            let s = psd_estimate(&w, prf, DEFAULT_REF_BW, 50.0).unwrap();
            let err_db = 10.0 * (s.integrated_power_w() / avg).log10();
            prop_assert!(err_db.abs() < 0.5, "{}", err_db);
        }
    }
}
