//! Sub-GHz UWB pulse transmitter: a differential T-network whose bridging
//! capacitor cancels the antenna drive at high frequency.
//!
//! Each half of the network is a series `R_S + sL` feeding a shunt `C`; the
//! two halves meet through `C_F`, and the antenna (`R_A || C_A || L_A`) hangs
//! off the positive node through `C_L`. The antenna voltage is available as
//! a single rational transfer function, as a direct nodal solve, and in the
//! time domain through either an inverse FFT or a state-space integrator.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantities::{poly_add, poly_mul, psd_estimate, RationalTf, Spectrum, Waveform};

/// Relative element deviations applied to the negative branch only.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BranchMismatch {
    pub r_s: f64,
    pub l: f64,
    pub c: f64,
}

impl BranchMismatch {
    /// Same relative error on the branch inductor and capacitor.
    pub fn uniform(eps: f64) -> Self {
        BranchMismatch {
            r_s: 0.0,
            l: eps,
            c: eps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LputNetwork {
    pub r_s: f64,
    pub l: f64,
    pub c: f64,
    pub c_f: f64,
    pub c_l: f64,
    pub r_a: f64,
    pub c_a: f64,
    pub l_a: f64,
    pub mismatch: BranchMismatch,
}

impl Default for LputNetwork {
    /// Element set tuned so a 0.15 V, 1 ns edge pair gives a 0.14 V
    /// peak-to-peak pulse concentrated in 0.25-0.75 GHz, with the branch
    /// notch just below 1 GHz.
    fn default() -> Self {
        LputNetwork {
            r_s: 1.68,
            l: 6.9e-9,
            c: 3.85e-12,
            c_f: 3.78e-12,
            c_l: 8.27e-12,
            r_a: 50.0,
            c_a: 2.03e-12,
            l_a: 46.2e-9,
            mismatch: BranchMismatch::default(),
        }
    }
}

/// Series-branch elements of one half of the network.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Branch {
    r_s: f64,
    l: f64,
    c: f64,
}

impl Branch {
    /// `1 + s R_S C + s^2 L C`
    fn d(&self) -> Vec<f64> {
        vec![1.0, self.r_s * self.c, self.l * self.c]
    }

    /// `R_S + s L`
    fn n(&self) -> Vec<f64> {
        vec![self.r_s, self.l]
    }

    fn h(&self, s: Complex64) -> Complex64 {
        1.0 / (1.0 + s * self.r_s * self.c + s * s * self.l * self.c)
    }

    fn z(&self, s: Complex64) -> Complex64 {
        (self.r_s + s * self.l) * self.h(s)
    }
}

/// `Some(z)` for a finite impedance, `None` for an open circuit.
pub type Impedance = Option<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchImpedances {
    pub z_pg_a: Complex64,
    pub z_pg_b: Impedance,
    pub z_pg_c: Impedance,
}

impl LputNetwork {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("r_s", self.r_s),
            ("l", self.l),
            ("c", self.c),
            ("c_f", self.c_f),
            ("c_l", self.c_l),
            ("r_a", self.r_a),
            ("c_a", self.c_a),
            ("l_a", self.l_a),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(name, format!("must be > 0, got {v}")));
            }
        }
        let m = self.mismatch;
        for (name, v) in [
            ("mismatch.r_s", m.r_s),
            ("mismatch.l", m.l),
            ("mismatch.c", m.c),
        ] {
            if !(v > -1.0 && v.is_finite()) {
                return Err(Error::config(name, format!("must be > -1, got {v}")));
            }
        }
        Ok(())
    }

    pub fn with_mismatch(mut self, m: BranchMismatch) -> Self {
        self.mismatch = m;
        self
    }

    fn plus(&self) -> Branch {
        Branch {
            r_s: self.r_s,
            l: self.l,
            c: self.c,
        }
    }

    fn minus(&self) -> Branch {
        Branch {
            r_s: self.r_s * (1.0 + self.mismatch.r_s),
            l: self.l * (1.0 + self.mismatch.l),
            c: self.c * (1.0 + self.mismatch.c),
        }
    }

    /// Antenna impedance `R_A || C_A || L_A`.
    pub fn antenna_impedance(&self, f: f64) -> Complex64 {
        if f == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let s = Complex64::new(0.0, 2.0 * PI * f);
        1.0 / (1.0 / self.r_a + s * self.c_a + 1.0 / (s * self.l_a))
    }

    /// Impedances of the positive half at `f`: the branch `Z_pgA`, the branch
    /// plus bridging capacitor `Z_pgB`, and the antenna leg `Z_pgC`.
    pub fn branch_impedances(&self, f: f64) -> Result<BranchImpedances> {
        if !(f >= 0.0) {
            return Err(Error::domain(format!("frequency must be >= 0, got {f}")));
        }
        let s = Complex64::new(0.0, 2.0 * PI * f);
        let z_pg_a = self.plus().z(s);
        if f == 0.0 {
            return Ok(BranchImpedances {
                z_pg_a,
                z_pg_b: None,
                z_pg_c: None,
            });
        }
        Ok(BranchImpedances {
            z_pg_a,
            z_pg_b: Some(z_pg_a + 1.0 / (s * self.c_f)),
            z_pg_c: Some(self.antenna_impedance(f) + 1.0 / (s * self.c_l)),
        })
    }
}

/// Antenna voltage per volt on each input, as two rational functions.
#[derive(Debug, Clone, PartialEq)]
pub struct AntennaTransfer {
    /// Response to `Vip+` alone.
    pub from_plus: RationalTf,
    /// Response to `Vip-` alone.
    pub from_minus: RationalTf,
    /// Response per volt of differential drive (`Vip- = -Vip+`).
    pub differential: RationalTf,
}

/// Builds the antenna-voltage transfer functions symbolically.
///
/// With `D = 1 + s R_S C + s^2 L C`, `N = R_S + s L`, the antenna polynomial
/// `P = R_A + s L_A + s^2 R_A L_A C_A` and `Q = P + s^2 R_A L_A C_L`, clearing
/// the fractions of the nodal equations gives a common denominator
/// `K1 M2 + s C_F D2 N1 Q` where `K1 = Q D1 + s C_L P N1` and
/// `M2 = D2 + s C_F N2`. The numerators are `s^2 R_A L_A C_L M2` for the
/// positive input and `s^3 R_A L_A C_L C_F N1` for the negative one.
pub fn antenna_transfer(net: &LputNetwork) -> Result<AntennaTransfer> {
    net.validate()?;
    let (b1, b2) = (net.plus(), net.minus());
    let (d1, n1) = (b1.d(), b1.n());
    let (d2, n2) = (b2.d(), b2.n());
    let p = vec![net.r_a, net.l_a, net.r_a * net.l_a * net.c_a];
    let q = vec![net.r_a, net.l_a, net.r_a * net.l_a * (net.c_a + net.c_l)];
    let k1 = poly_add(
        &poly_mul(&q, &d1),
        &poly_mul(&[0.0, net.c_l], &poly_mul(&p, &n1)),
    );
    let m2 = poly_add(&d2, &poly_mul(&[0.0, net.c_f], &n2));
    let den = poly_add(
        &poly_mul(&k1, &m2),
        &poly_mul(&poly_mul(&[0.0, net.c_f], &d2), &poly_mul(&n1, &q)),
    );
    if den.iter().all(|&c| c == 0.0) {
        return Err(Error::domain("network denominator vanishes"));
    }
    let g = net.r_a * net.l_a * net.c_l;
    let num_plus = poly_mul(&[0.0, 0.0, g], &m2);
    let num_minus = poly_mul(&[0.0, 0.0, 0.0, g * net.c_f], &n1);
    let neg_minus: Vec<f64> = num_minus.iter().map(|c| -c).collect();
    let num_diff = poly_add(&num_plus, &neg_minus);
    Ok(AntennaTransfer {
        from_plus: RationalTf::new(num_plus, den.clone())?,
        from_minus: RationalTf::new(num_minus, den.clone())?,
        differential: RationalTf::new(num_diff, den)?,
    })
}

/// Differential-drive transfer function `V_A / Vip+`.
pub fn antenna_voltage_tf(net: &LputNetwork) -> Result<RationalTf> {
    Ok(antenna_transfer(net)?.differential)
}

/// Antenna voltage for differential drive of amplitude `vip` at `f`.
pub fn antenna_voltage(net: &LputNetwork, f: f64, vip: Complex64) -> Result<Complex64> {
    Ok(antenna_voltage_tf(net)?.eval(f)? * vip)
}

/// Closed-form antenna voltage of the matched network, assembled from the
/// branch impedances term by term.
pub fn antenna_voltage_direct(net: &LputNetwork, f: f64, vip: Complex64) -> Result<Complex64> {
    if !(f > 0.0) {
        return Err(Error::domain("direct assembly needs f > 0"));
    }
    let s = Complex64::new(0.0, 2.0 * PI * f);
    let b = net.plus();
    let h = b.h(s);
    let za = b.z(s);
    let z_ant = net.antenna_impedance(f);
    let zf = 1.0 / (s * net.c_f);
    let zc = z_ant + 1.0 / (s * net.c_l);
    Ok(vip * h * zf * z_ant / (zc * zf + 2.0 * za * zc + za * zf + za * za))
}

/// Antenna voltage from a direct two-node solve of the T-network with
/// independent drive on both inputs. Each input branch is reduced to its
/// Thevenin equivalent `H * Vip` behind `Z_pgA`.
pub fn antenna_voltage_nodal(
    net: &LputNetwork,
    f: f64,
    vip_plus: Complex64,
    vip_minus: Complex64,
) -> Result<Complex64> {
    if !(f > 0.0) {
        return Err(Error::domain("nodal solve needs f > 0"));
    }
    let s = Complex64::new(0.0, 2.0 * PI * f);
    let (b1, b2) = (net.plus(), net.minus());
    let (za1, za2) = (b1.z(s), b2.z(s));
    let (vt1, vt2) = (b1.h(s) * vip_plus, b2.h(s) * vip_minus);
    let z_ant = net.antenna_impedance(f);
    let yf = s * net.c_f;
    let yc = 1.0 / (z_ant + 1.0 / (s * net.c_l));
    // [ 1/za1 + yf + yc   -yf        ] [v1]   [vt1/za1]
    // [ -yf               1/za2 + yf ] [v2] = [vt2/za2]
    let a11 = 1.0 / za1 + yf + yc;
    let a12 = -yf;
    let a22 = 1.0 / za2 + yf;
    let det = a11 * a22 - a12 * a12;
    if det.norm() == 0.0 {
        return Err(Error::NonFinite("singular nodal matrix".into()));
    }
    let (r1, r2) = (vt1 / za1, vt2 / za2);
    let v1 = (r1 * a22 - a12 * r2) / det;
    Ok(v1 * yc * z_ant)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StimulusShape {
    /// Ramp from 0 to the amplitude, then hold.
    Edge,
    /// Ramp up, hold for `width`, ramp down.
    Pulse,
}

/// Differential drive: `Vip+ = s(t)` and `Vip- = -s(t - skew)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Stimulus {
    pub shape: StimulusShape,
    pub amplitude: f64,
    pub rise_time: f64,
    /// Flat-top duration of a `Pulse`.
    pub width: f64,
    pub skew: f64,
    /// Start of the first ramp.
    pub delay: f64,
}

impl Default for Stimulus {
    fn default() -> Self {
        Stimulus {
            shape: StimulusShape::Edge,
            amplitude: 0.15,
            rise_time: 1e-9,
            width: 2e-9,
            skew: 0.0,
            delay: 2e-9,
        }
    }
}

impl Stimulus {
    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::config("amplitude", "must be >= 0"));
        }
        if !(self.rise_time > 0.0) {
            return Err(Error::config("rise_time", "must be > 0"));
        }
        if !(self.width >= 0.0) {
            return Err(Error::config("width", "must be >= 0"));
        }
        if !(self.delay >= 0.0) {
            return Err(Error::config("delay", "must be >= 0"));
        }
        Ok(())
    }

    fn ramp(&self, t: f64) -> f64 {
        let x = (t - self.delay) / self.rise_time;
        self.amplitude * x.clamp(0.0, 1.0)
    }

    /// Positive input voltage at time `t`.
    pub fn plus(&self, t: f64) -> f64 {
        match self.shape {
            StimulusShape::Edge => self.ramp(t),
            StimulusShape::Pulse => self.ramp(t) - self.ramp(t - self.rise_time - self.width),
        }
    }

    pub fn minus(&self, t: f64) -> f64 {
        -self.plus(t - self.skew)
    }

    /// Fourier transform of `plus`, excluding the DC impulse of the edge.
    pub fn spectrum_plus(&self, f: f64) -> Complex64 {
        if f == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let w = 2.0 * PI * f;
        let x = PI * f * self.rise_time;
        let sinc = if x == 0.0 { 1.0 } else { x.sin() / x };
        let edge = self.amplitude
            * Complex64::from_polar(1.0, -w * (self.delay + 0.5 * self.rise_time))
            * sinc
            / Complex64::new(0.0, w);
        match self.shape {
            StimulusShape::Edge => edge,
            StimulusShape::Pulse => {
                edge * (1.0 - Complex64::from_polar(1.0, -w * (self.rise_time + self.width)))
            }
        }
    }

    pub fn spectrum_minus(&self, f: f64) -> Complex64 {
        -self.spectrum_plus(f) * Complex64::from_polar(1.0, -2.0 * PI * f * self.skew)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSettings {
    pub sample_rate: f64,
    pub duration: f64,
    /// Highest frequency kept in the inverse transform.
    pub max_frequency: f64,
}

impl Default for SynthSettings {
    fn default() -> Self {
        SynthSettings {
            sample_rate: 20e9,
            duration: 1.0 / DEFAULT_PRF,
            max_frequency: 5e9,
        }
    }
}

pub const DEFAULT_PRF: f64 = 3.3e6;

impl SynthSettings {
    fn check(&self) -> Result<usize> {
        if !(self.sample_rate > 0.0 && self.duration > 0.0 && self.max_frequency > 0.0) {
            return Err(Error::domain(
                "sample rate, duration and max frequency must be > 0",
            ));
        }
        if self.sample_rate < 4.0 * self.max_frequency {
            return Err(Error::Aliasing {
                sample_rate: self.sample_rate,
                max_frequency: self.max_frequency,
            });
        }
        let n = (self.duration * self.sample_rate).round() as usize;
        if n < 4 {
            return Err(Error::TooShort {
                span: self.duration,
                needed: 4.0 / self.sample_rate,
            });
        }
        Ok(n)
    }
}

/// Antenna voltage waveform from the stimulus spectrum times the network
/// response, transformed back to time. The record is treated as one period,
/// so `duration` must cover the ring-down of the pulse.
pub fn synth_pulse(
    net: &LputNetwork,
    stim: &Stimulus,
    settings: &SynthSettings,
) -> Result<Waveform> {
    stim.validate()?;
    let n = settings.check()?;
    let tf = antenna_transfer(net)?;
    let dt = 1.0 / settings.sample_rate;
    let span = n as f64 * dt;
    let mut bins = vec![Complex64::new(0.0, 0.0); n];
    for k in 1..n.div_ceil(2) {
        let f = k as f64 / span;
        if f > settings.max_frequency {
            break;
        }
        let y = tf.from_plus.eval(f)? * stim.spectrum_plus(f)
            + tf.from_minus.eval(f)? * stim.spectrum_minus(f);
        let c = y / span;
        bins[k] = c;
        bins[n - k] = c.conj();
    }
    FftPlanner::new().plan_fft_inverse(n).process(&mut bins);
    Waveform::new(dt, 0.0, bins.into_iter().map(|c| c.re).collect())
}

/// Time-stepping oracle: classical RK4 on the six network states (three
/// inductor currents, three node voltages) with the capacitor coupling
/// solved exactly. Sampled on the same grid as [`synth_pulse`].
pub fn statespace_pulse(
    net: &LputNetwork,
    stim: &Stimulus,
    settings: &SynthSettings,
    max_step: f64,
) -> Result<Waveform> {
    net.validate()?;
    stim.validate()?;
    let n = settings.check()?;
    let dt = 1.0 / settings.sample_rate;
    let sub = (dt / max_step).ceil().max(1.0) as usize;
    let h = dt / sub as f64;
    let (b1, b2) = (net.plus(), net.minus());
    let m = [
        [b1.c + net.c_f + net.c_l, -net.c_f, -net.c_l],
        [-net.c_f, b2.c + net.c_f, 0.0],
        [-net.c_l, 0.0, net.c_a + net.c_l],
    ];
    let m_inv = invert3(&m).ok_or_else(|| Error::Unstable("singular capacitance matrix".into()))?;
    // x = [i1, i2, i_la, v1, v2, va]
    let deriv = |t: f64, x: &[f64; 6]| -> [f64; 6] {
        let inj = [x[0], x[1], -x[5] / net.r_a - x[2]];
        let mut dv = [0.0; 3];
        for (r, row) in m_inv.iter().enumerate() {
            dv[r] = row[0] * inj[0] + row[1] * inj[1] + row[2] * inj[2];
        }
        [
            (stim.plus(t) - b1.r_s * x[0] - x[3]) / b1.l,
            (stim.minus(t) - b2.r_s * x[1] - x[4]) / b2.l,
            x[5] / net.l_a,
            dv[0],
            dv[1],
            dv[2],
        ]
    };
    let axpy = |x: &[f64; 6], k: &[f64; 6], a: f64| -> [f64; 6] {
        std::array::from_fn(|i| x[i] + a * k[i])
    };
    let mut x = [0.0; 6];
    let mut out = Vec::with_capacity(n);
    let mut t = 0.0;
    for i in 0..n {
        out.push(x[5]);
        for j in 0..sub {
            let k1 = deriv(t, &x);
            let k2 = deriv(t + 0.5 * h, &axpy(&x, &k1, 0.5 * h));
            let k3 = deriv(t + 0.5 * h, &axpy(&x, &k2, 0.5 * h));
            let k4 = deriv(t + h, &axpy(&x, &k3, h));
            x = std::array::from_fn(|r| {
                x[r] + h / 6.0 * (k1[r] + 2.0 * k2[r] + 2.0 * k3[r] + k4[r])
            });
            t = i as f64 * dt + (j + 1) as f64 * h;
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Unstable(format!(
                "state diverged at t = {t:e} s; reduce max_step"
            )));
        }
    }
    Waveform::new(dt, 0.0, out)
}

fn invert3(m: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let c = |r: usize, k: usize| {
        let (r1, r2) = ((r + 1) % 3, (r + 2) % 3);
        let (k1, k2) = ((k + 1) % 3, (k + 2) % 3);
        m[r1][k1] * m[r2][k2] - m[r1][k2] * m[r2][k1]
    };
    let det = m[0][0] * c(0, 0) + m[0][1] * c(0, 1) + m[0][2] * c(0, 2);
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    Some(std::array::from_fn(|r| {
        std::array::from_fn(|k| c(k, r) / det)
    }))
}

/// Root-mean-square difference of two equally sampled records, relative to
/// the peak magnitude of `reference`.
pub fn rms_of_peak(candidate: &Waveform, reference: &Waveform) -> f64 {
    let n = candidate.len().min(reference.len());
    let peak = reference.samples.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let ms = (0..n)
        .map(|i| (candidate.samples[i] - reference.samples[i]).powi(2))
        .sum::<f64>()
        / n as f64;
    if peak == 0.0 {
        ms.sqrt()
    } else {
        ms.sqrt() / peak
    }
}

/// Regulatory emission limit as a piecewise-linear function of frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskSpec {
    pub name: String,
    /// `(frequency Hz, limit dBm per reference bandwidth)`, strictly
    /// increasing in frequency.
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Deserialize)]
struct MaskRow {
    frequency_hz: f64,
    limit_dbm: f64,
}

impl MaskSpec {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::domain("a mask needs at least two breakpoints"));
        }
        if points
            .iter()
            .any(|(f, l)| !f.is_finite() || !l.is_finite() || *f < 0.0)
        {
            return Err(Error::domain("mask breakpoints must be finite with f >= 0"));
        }
        if let Some(w) = points.windows(2).find(|w| w[1].0 <= w[0].0) {
            return Err(Error::domain(format!(
                "mask frequencies must increase strictly ({} then {})",
                w[0].0, w[1].0
            )));
        }
        Ok(MaskSpec {
            name: name.into(),
            points,
        })
    }

    /// Parses the mask text format: a CSV table with header
    /// `frequency_hz,limit_dbm`, optionally preceded by `#` comment lines. A
    /// comment of the form `# name: ...` sets the mask name.
    pub fn parse(text: &str) -> Result<Self> {
        let name = text
            .lines()
            .filter_map(|l| l.trim().strip_prefix('#'))
            .find_map(|l| l.trim().strip_prefix("name:"))
            .map(|s| s.trim().to_string())
            .unwrap_or_else(|| "unnamed mask".to_string());
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut points = Vec::new();
        for (i, row) in rdr.deserialize::<MaskRow>().enumerate() {
            let row = row.map_err(|e| Error::domain(format!("mask row {}: {e}", i + 1)))?;
            points.push((row.frequency_hz, row.limit_dbm));
        }
        MaskSpec::new(name, points)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        MaskSpec::parse(&text)
    }

    pub fn span(&self) -> (f64, f64) {
        (self.points[0].0, self.points[self.points.len() - 1].0)
    }

    /// Limit at `f`, or `None` outside the mask span.
    pub fn limit_at(&self, f: f64) -> Option<f64> {
        let (lo, hi) = self.span();
        if f < lo || f > hi {
            return None;
        }
        let i = self
            .points
            .partition_point(|p| p.0 <= f)
            .max(1)
            .min(self.points.len() - 1);
        let (f0, l0) = self.points[i - 1];
        let (f1, l1) = self.points[i];
        Some(l0 + (l1 - l0) * (f - f0) / (f1 - f0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MaskVerdict {
    pub pass: bool,
    /// Smallest `limit - psd` over the checked bins, dB.
    pub worst_margin_db: f64,
    pub worst_frequency: f64,
    pub bins_checked: usize,
}

pub fn mask_check(mask: &MaskSpec, psd: &Spectrum) -> Result<MaskVerdict> {
    let mut worst = (f64::INFINITY, f64::NAN);
    let mut checked = 0;
    for (f, &level) in psd.frequencies().zip(&psd.bins) {
        if let Some(limit) = mask.limit_at(f) {
            checked += 1;
            let margin = limit - level;
            if margin < worst.0 {
                worst = (margin, f);
            }
        }
    }
    if checked == 0 {
        return Err(Error::NoOverlap);
    }
    Ok(MaskVerdict {
        pass: worst.0 >= 0.0,
        worst_margin_db: worst.0,
        worst_frequency: worst.1,
        bins_checked: checked,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rolloff {
    pub drop_db: f64,
    pub db_per_octave: f64,
}

/// Level difference `PSD(f1) - PSD(f2)` and its slope per octave.
pub fn rolloff(psd: &Spectrum, f1: f64, f2: f64) -> Result<Rolloff> {
    if !(f2 > f1 && f1 > 0.0) {
        return Err(Error::domain(format!("need 0 < f1 < f2, got {f1}, {f2}")));
    }
    let (a, b) = match (psd.value_at(f1), psd.value_at(f2)) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::domain("roll-off frequencies outside the spectrum")),
    };
    let drop_db = a - b;
    Ok(Rolloff {
        drop_db,
        db_per_octave: drop_db / (f2 / f1).log2(),
    })
}

/// Drop of `|V_A|` between `f1` and `f2` in dB, independent of the
/// stimulus.
pub fn network_rolloff_db(net: &LputNetwork, f1: f64, f2: f64) -> Result<f64> {
    let tf = antenna_voltage_tf(net)?;
    Ok(20.0 * (tf.eval(f1)?.norm() / tf.eval(f2)?.norm()).log10())
}

pub fn energy_per_pulse(power: f64, prf: f64) -> Result<f64> {
    if !(power >= 0.0 && prf > 0.0) {
        return Err(Error::domain("need power >= 0 and PRF > 0"));
    }
    Ok(power / prf)
}

/// `integral v^2 / R dt` over the first repetition period of `w`.
pub fn pulse_energy(w: &Waveform, prf: f64, load: f64) -> Result<f64> {
    if !(prf > 0.0 && load > 0.0) {
        return Err(Error::domain("need PRF > 0 and load > 0"));
    }
    let n = (1.0 / (prf * w.dt)).round() as usize;
    if n == 0 || n > w.len() {
        return Err(Error::TooShort {
            span: w.duration(),
            needed: 1.0 / prf,
        });
    }
    Ok(w.samples[..n].iter().map(|v| v * v).sum::<f64>() * w.dt / load)
}

/// Pulse synthesis plus spectral metrics in one place.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UwbConfig {
    pub network: LputNetwork,
    pub stimulus: Stimulus,
    pub synth: SynthSettings,
    pub prf: f64,
    /// Resistance the antenna voltage is referred to for power.
    pub load: f64,
    pub band_low: f64,
    pub band_high: f64,
    /// Emission mask to check the PSD against. Relative paths are resolved
    /// against the directory of the config file.
    pub mask: Option<PathBuf>,
}

impl Default for UwbConfig {
    fn default() -> Self {
        UwbConfig {
            network: LputNetwork::default(),
            stimulus: Stimulus::default(),
            synth: SynthSettings::default(),
            prf: DEFAULT_PRF,
            load: 50.0,
            band_low: 0.25e9,
            band_high: 0.75e9,
            mask: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseReport {
    pub waveform: Waveform,
    pub psd: Spectrum,
    pub peak_to_peak: f64,
    pub band_fraction: f64,
    pub peak_frequency: f64,
    pub peak_level_dbm: f64,
    pub average_power: f64,
    pub energy_per_pulse: f64,
}

impl UwbConfig {
    pub fn validate(&self) -> Result<()> {
        self.network.validate().map_err(|e| e.within("network"))?;
        self.stimulus.validate().map_err(|e| e.within("stimulus"))?;
        self.synth.check().map_err(|e| match e {
            Error::Aliasing { .. } => {
                Error::config("synth.sample_rate", "must be at least 4x max_frequency")
            }
            other => Error::config("synth", other.to_string()),
        })?;
        for (name, v) in [("prf", self.prf), ("load", self.load)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(name, format!("must be > 0, got {v}")));
            }
        }
        if !(self.band_low >= 0.0 && self.band_high > self.band_low) {
            return Err(Error::config("band_high", "must exceed band_low >= 0"));
        }
        Ok(())
    }
}

pub fn analyze(cfg: &UwbConfig) -> Result<PulseReport> {
    let waveform = synth_pulse(&cfg.network, &cfg.stimulus, &cfg.synth)?;
    let psd = psd_estimate(
        &waveform,
        cfg.prf,
        crate::quantities::DEFAULT_REF_BW,
        cfg.load,
    )?;
    let total = psd.integrated_power_w();
    let band = psd.band_power_w(cfg.band_low, cfg.band_high);
    let (peak_frequency, peak_level_dbm) = psd.peak();
    Ok(PulseReport {
        peak_to_peak: waveform.peak_to_peak(),
        band_fraction: if total > 0.0 { band / total } else { 0.0 },
        peak_frequency,
        peak_level_dbm,
        average_power: total,
        energy_per_pulse: pulse_energy(&waveform, cfg.prf, cfg.load)?,
        waveform,
        psd,
    })
}

/// Default network with every element scaled by an independent random
/// factor in `[1 - spread, 1 + spread)`.
pub fn perturbed_network<R: rand::Rng>(rng: &mut R, spread: f64) -> LputNetwork {
    let d = LputNetwork::default();
    let mut j = |v: f64| v * rng.random_range(1.0 - spread..1.0 + spread);
    LputNetwork {
        r_s: j(d.r_s),
        l: j(d.l),
        c: j(d.c),
        c_f: j(d.c_f),
        c_l: j(d.c_l),
        r_a: j(d.r_a),
        c_a: j(d.c_a),
        l_a: j(d.l_a),
        mismatch: BranchMismatch::default(),
    }
}

const BUILTIN_MASK: &str = include_str!("../../../config/fcc_subghz_mask.csv");

/// The sub-GHz UWB imaging limit shipped with the toolkit.
pub fn builtin_mask() -> MaskSpec {
    MaskSpec::parse(BUILTIN_MASK).expect("shipped mask parses")
}
