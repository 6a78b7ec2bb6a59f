//! Perturb-and-observe maximum power point tracker.
//!
//! The controller never measures power directly. A differential pair biased
//! from the oscillator current turns a fraction of the rectifier voltage
//! into a current proportional to `V_in * sqrt(I_B)`, which is monotone in
//! the converter input power `V_in^2 * I_B`. One perturbation is made per
//! 4096-clock epoch: sample, step the frequency code, let the rectifier
//! capacitor settle for 32 clocks, sample again and keep or flip direction.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dcdc::{self, ConverterConfig, OutputTarget, PowerMode};
use crate::error::{Error, Result};
use crate::rectifier::RectifierModel;

/// Clocks in one epoch of the 12-bit master counter.
pub const EPOCH_CLOCKS: u16 = 4096;
/// Clocks between the perturbation and the second sample.
pub const SETTLE_CLOCKS: u16 = 32;

const PERTURB_AT: u16 = 1;
const SAMPLE2_AT: u16 = PERTURB_AT + SETTLE_CLOCKS;
const DECIDE_AT: u16 = SAMPLE2_AT + 1;

/// Controller consumption anchors: (frequency, power).
const POWER_AT_MIN_F: (f64, f64) = (20e3, 17.4e-9);
const POWER_AT_MAX_F: (f64, f64) = (1e6, 278.5e-9);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorParams {
    /// Transconductance factor `mu Cox W / (2L)` of the input pair, A/V^2.
    pub k: f64,
    /// Fraction of `V_in` applied across the pair.
    pub divider_ratio: f64,
    /// Tail current per unit of oscillator bias current.
    pub tail_gain: f64,
}

impl Default for EstimatorParams {
    fn default() -> Self {
        EstimatorParams {
            k: 2e-6,
            divider_ratio: 1.0 / 20.0,
            tail_gain: 1.0,
        }
    }
}

impl EstimatorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::config("k", format!("must be > 0, got {}", self.k)));
        }
        if !(self.divider_ratio > 0.0 && self.divider_ratio <= 1.0) {
            return Err(Error::config(
                "divider_ratio",
                format!("must lie in (0, 1], got {}", self.divider_ratio),
            ));
        }
        if !(self.tail_gain > 0.0 && self.tail_gain.is_finite()) {
            return Err(Error::config(
                "tail_gain",
                format!("must be > 0, got {}", self.tail_gain),
            ));
        }
        Ok(())
    }
}

/// Estimator output current `sqrt(2K) * sqrt(I_T) * V_d`, with
/// `V_d = r * V_in` and `I_T = tail_gain * I_B`. Negative inputs are treated
/// as zero.
pub fn power_metric(v_in: f64, i_b: f64, p: &EstimatorParams) -> f64 {
    let v_d = p.divider_ratio * v_in.max(0.0);
    let i_t = p.tail_gain * i_b.max(0.0);
    (2.0 * p.k).sqrt() * i_t.sqrt() * v_d
}

/// Mapping from the up/down counter code to oscillator bias and frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrequencyPlan {
    pub code_min: u32,
    pub code_max: u32,
    /// Oscillator bias added per code step, A.
    pub bias_per_code: f64,
    /// Oscillator gain, Hz per ampere of bias.
    pub hz_per_amp: f64,
}

impl Default for FrequencyPlan {
    fn default() -> Self {
        FrequencyPlan {
            code_min: 1,
            code_max: 50,
            bias_per_code: 2e-9,
            hz_per_amp: 10e3 / 1e-9,
        }
    }
}

impl FrequencyPlan {
    pub fn validate(&self) -> Result<()> {
        if self.code_min < 1 || self.code_min >= self.code_max {
            return Err(Error::config(
                "code_min",
                format!(
                    "need 1 <= code_min < code_max, got {}..{}",
                    self.code_min, self.code_max
                ),
            ));
        }
        if !(self.bias_per_code > 0.0) {
            return Err(Error::config("bias_per_code", "must be > 0"));
        }
        if !(self.hz_per_amp > 0.0) {
            return Err(Error::config("hz_per_amp", "must be > 0"));
        }
        Ok(())
    }

    pub fn span(&self) -> u32 {
        self.code_max - self.code_min
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CodeSetting {
    pub code: u32,
    pub i_b: f64,
    pub f_s: f64,
    /// The requested code was outside the plan and has been clamped.
    pub clamped: bool,
}

pub fn frequency_map(plan: &FrequencyPlan, code: i64) -> CodeSetting {
    let lo = plan.code_min as i64;
    let hi = plan.code_max as i64;
    let c = code.clamp(lo, hi);
    let i_b = plan.bias_per_code * c as f64;
    CodeSetting {
        code: c as u32,
        i_b,
        f_s: plan.hz_per_amp * i_b,
        clamped: c != code,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerPower {
    pub watts: f64,
    pub clamped: bool,
}

/// Tracker consumption, interpolated linearly in frequency between the two
/// known operating points and clamped outside them.
pub fn controller_power(f_s: f64) -> ControllerPower {
    let (f0, p0) = POWER_AT_MIN_F;
    let (f1, p1) = POWER_AT_MAX_F;
    let f = f_s.clamp(f0, f1);
    ControllerPower {
        watts: p0 + (f - f0) / (f1 - f0) * (p1 - p0),
        clamped: f != f_s,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoPhase {
    Idle,
    Sample1,
    Perturb,
    Wait32,
    Sample2,
    Decide,
}

impl PoPhase {
    /// Phase executed on the clock where the master counter reads `counter`.
    pub fn at(counter: u16) -> PoPhase {
        match counter {
            0 => PoPhase::Sample1,
            PERTURB_AT => PoPhase::Perturb,
            c if c < SAMPLE2_AT => PoPhase::Wait32,
            SAMPLE2_AT => PoPhase::Sample2,
            DECIDE_AT => PoPhase::Decide,
            _ => PoPhase::Idle,
        }
    }

    pub fn takes_sample(self) -> bool {
        matches!(self, PoPhase::Sample1 | PoPhase::Sample2)
    }
}

impl fmt::Display for PoPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PoPhase::Idle => "idle",
            PoPhase::Sample1 => "sample1",
            PoPhase::Perturb => "perturb",
            PoPhase::Wait32 => "wait32",
            PoPhase::Sample2 => "sample2",
            PoPhase::Decide => "decide",
        };
        f.write_str(s)
    }
}

/// Tracker configuration. Comparator offset and hold droop default to an
/// ideal comparator and sample-and-hold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MpptConfig {
    pub estimator: EstimatorParams,
    pub plan: FrequencyPlan,
    /// A decrease is only registered when the new sample is lower than the
    /// held one by more than this current, A.
    pub comparator_offset: f64,
    /// Relative loss of the held sample over the settling window.
    pub hold_droop: f64,
}

impl Default for MpptConfig {
    fn default() -> Self {
        MpptConfig {
            estimator: EstimatorParams::default(),
            plan: FrequencyPlan::default(),
            comparator_offset: 0.0,
            hold_droop: 0.0,
        }
    }
}

impl MpptConfig {
    pub fn validate(&self) -> Result<()> {
        self.estimator
            .validate()
            .map_err(|e| e.within("estimator"))?;
        self.plan.validate().map_err(|e| e.within("plan"))?;
        if !(self.comparator_offset >= 0.0) {
            return Err(Error::config("comparator_offset", "must be >= 0"));
        }
        if !(0.0..1.0).contains(&self.hold_droop) {
            return Err(Error::config("hold_droop", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MpptState {
    pub code: u32,
    /// D flip-flop: `true` steps the code up.
    pub direction_up: bool,
    /// Sample-and-hold contents.
    pub held_metric: Option<f64>,
    pub last_metric: Option<f64>,
    /// 12-bit master counter, the clock about to be executed.
    pub counter: u16,
    /// Phase the next clock executes.
    pub phase: PoPhase,
    /// The perturbation of the current epoch hit the end of the code range.
    pub clamped: bool,
    /// Estimator, comparator and sample-and-hold are powered.
    pub analog_on: bool,
    pub perturbations: u64,
    pub epoch: u64,
}

impl MpptState {
    pub fn new(code: u32, direction_up: bool) -> Self {
        MpptState {
            code,
            direction_up,
            held_metric: None,
            last_metric: None,
            counter: 0,
            phase: PoPhase::Sample1,
            clamped: false,
            analog_on: true,
            perturbations: 0,
            epoch: 0,
        }
    }
}

/// Advances the controller by one master clock. `measured` must carry the
/// estimator output exactly on the two sampling clocks and be `None` on all
/// others.
pub fn po_step(cfg: &MpptConfig, state: MpptState, measured: Option<f64>) -> Result<MpptState> {
    let phase = PoPhase::at(state.counter);
    match (phase.takes_sample(), measured) {
        (true, None) => {
            return Err(Error::Protocol {
                expected: format!("a metric sample for {phase}"),
                actual: format!("{phase} clocked without one"),
            })
        }
        (false, Some(_)) => {
            return Err(Error::Protocol {
                expected: "sample1 or sample2".into(),
                actual: phase.to_string(),
            })
        }
        _ => {}
    }
    if !(state.code >= cfg.plan.code_min && state.code <= cfg.plan.code_max) {
        return Err(Error::domain(format!(
            "code {} outside the plan",
            state.code
        )));
    }
    let mut next = state;
    match phase {
        PoPhase::Sample1 => {
            next.held_metric = measured;
            next.last_metric = measured;
            next.clamped = false;
        }
        PoPhase::Perturb => {
            let step: i64 = if state.direction_up { 1 } else { -1 };
            let setting = frequency_map(&cfg.plan, state.code as i64 + step);
            next.code = setting.code;
            next.clamped = setting.clamped;
            next.perturbations += 1;
        }
        PoPhase::Sample2 => {
            next.last_metric = measured;
        }
        PoPhase::Decide => {
            let held = state.held_metric.ok_or_else(|| Error::Protocol {
                expected: "a held sample".into(),
                actual: "decide with an empty sample-and-hold".into(),
            })?;
            let now = state.last_metric.unwrap_or(held);
            let reference = held * (1.0 - cfg.hold_droop) - cfg.comparator_offset;
            // A saturated counter cannot move further this way, so the
            // only useful next step is the other direction.
            if state.clamped || now < reference {
                next.direction_up = !state.direction_up;
            }
        }
        PoPhase::Wait32 | PoPhase::Idle => {}
    }
    next.counter = (state.counter + 1) % EPOCH_CLOCKS;
    if next.counter == 0 {
        next.epoch += 1;
    }
    next.phase = PoPhase::at(next.counter);
    next.analog_on = next.phase != PoPhase::Idle;
    Ok(next)
}

/// Electrical state seen by the controller at one code.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlantPoint {
    /// Rectifier output voltage across C_rec.
    pub v_in: f64,
    /// DC power delivered by the rectifier into the converter.
    pub p_in: f64,
    /// Converter input resistance at this frequency.
    pub r_in: f64,
}

/// What the tracker is connected to.
pub trait Plant {
    fn operating_point(&self, setting: &CodeSetting) -> Result<PlantPoint>;

    /// Energy the converter pushes into storage while the new load settles
    /// for `clocks` converter cycles. `None` when the plant has no converter
    /// model.
    fn settle(
        &self,
        _setting: &CodeSetting,
        _point: &PlantPoint,
        _clocks: u16,
    ) -> Result<Option<f64>> {
        Ok(None)
    }
}

/// Rectifier driving the DCM converter at a fixed ON time.
#[derive(Debug, Clone, PartialEq)]
pub struct HarvesterPlant {
    pub rectifier: RectifierModel,
    pub converter: ConverterConfig,
    /// RF power available at the antenna.
    pub p_available: f64,
    /// Converter ON time; with it the frequency code sets the input
    /// resistance `2L / (T_on^2 f_s)`.
    pub t_on: f64,
    /// Storage voltage the converter discharges into while settling.
    pub v_store: f64,
    pub mode: PowerMode,
}

impl HarvesterPlant {
    pub fn new(
        rectifier: RectifierModel,
        converter: ConverterConfig,
        p_available: f64,
        t_on: f64,
    ) -> Self {
        HarvesterPlant {
            rectifier,
            converter,
            p_available,
            t_on,
            v_store: 1.4,
            mode: PowerMode::LowPower,
        }
    }
}

impl Plant for HarvesterPlant {
    fn operating_point(&self, setting: &CodeSetting) -> Result<PlantPoint> {
        let period = 1.0 / setting.f_s;
        let r_in = dcdc::input_resistance_buckboost(
            self.converter.inductance,
            self.t_on / period,
            period,
        )?;
        let p_rect = self.rectifier.input_power(self.p_available)?;
        let p_in = self.rectifier.delivered_power(p_rect, r_in)?;
        Ok(PlantPoint {
            v_in: (p_in * r_in).sqrt(),
            p_in,
            r_in,
        })
    }

    fn settle(
        &self,
        setting: &CodeSetting,
        point: &PlantPoint,
        clocks: u16,
    ) -> Result<Option<f64>> {
        // C_store barely moves over 32 cycles, so each cycle sees the same
        // storage voltage.
        let cycle = dcdc::cycle_energy(
            &self.converter,
            self.mode,
            OutputTarget::Store,
            point.v_in,
            self.v_store,
            setting.f_s,
            self.t_on,
        )?;
        Ok(Some(cycle.delivered * clocks as f64))
    }
}

/// Synthetic plant with a prescribed converter input power per code.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfilePlant {
    /// Power at `code_min + i`.
    pub powers: Vec<f64>,
    pub code_min: u32,
    /// Input resistance scale: `R_in = r_scale / f_s`.
    pub r_scale: f64,
}

impl ProfilePlant {
    pub fn new(powers: Vec<f64>, code_min: u32) -> Self {
        ProfilePlant {
            powers,
            code_min,
            r_scale: 1e10,
        }
    }

    /// Code with the highest power.
    pub fn optimum(&self) -> u32 {
        let (i, _) =
            self.powers
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &p)| {
                    if p > best.1 {
                        (i, p)
                    } else {
                        best
                    }
                });
        self.code_min + i as u32
    }
}

impl Plant for ProfilePlant {
    fn operating_point(&self, setting: &CodeSetting) -> Result<PlantPoint> {
        let idx = setting
            .code
            .checked_sub(self.code_min)
            .map(|i| i as usize)
            .filter(|&i| i < self.powers.len())
            .ok_or_else(|| {
                Error::domain(format!("profile has no entry for code {}", setting.code))
            })?;
        let p_in = self.powers[idx];
        let r_in = self.r_scale / setting.f_s;
        Ok(PlantPoint {
            v_in: (p_in * r_in).sqrt(),
            p_in,
            r_in,
        })
    }
}

/// One epoch of a closed-loop run, recorded at the second sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: u64,
    pub code: u32,
    pub f_s: f64,
    pub r_in: f64,
    /// Rectifier output power at this code.
    pub delivered_power: f64,
    pub metric: f64,
    pub controller_power: f64,
    /// Average power the converter moved to storage during settling.
    pub stored_power: Option<f64>,
    pub direction_up: bool,
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub records: Vec<EpochRecord>,
    pub final_state: MpptState,
}

impl Trajectory {
    pub fn codes(&self) -> Vec<u32> {
        self.records.iter().map(|r| r.code).collect()
    }

    /// First epoch from which every recorded code stays within `tol` of
    /// `target`.
    pub fn settled_at(&self, target: u32, tol: u32) -> Option<usize> {
        let codes = self.codes();
        let mut first = None;
        for (i, &c) in codes.iter().enumerate() {
            if c.abs_diff(target) <= tol {
                first.get_or_insert(i);
            } else {
                first = None;
            }
        }
        first
    }
}

/// Clocks the controller against `plant` for `epochs` full epochs.
pub fn closed_loop_run<P: Plant + ?Sized>(
    plant: &P,
    cfg: &MpptConfig,
    initial_code: u32,
    direction_up: bool,
    epochs: usize,
) -> Result<Trajectory> {
    cfg.validate()?;
    let start = frequency_map(&cfg.plan, initial_code as i64);
    let mut state = MpptState::new(start.code, direction_up);
    let mut records = Vec::with_capacity(epochs);
    let mut stored = None;
    for _ in 0..epochs {
        for _ in 0..EPOCH_CLOCKS {
            let phase = PoPhase::at(state.counter);
            let setting = frequency_map(&cfg.plan, state.code as i64);
            let measured = if phase.takes_sample() {
                let point = plant.operating_point(&setting)?;
                Some(power_metric(point.v_in, setting.i_b, &cfg.estimator))
            } else {
                None
            };
            if phase == PoPhase::Sample2 {
                let point = plant.operating_point(&setting)?;
                records.push(EpochRecord {
                    epoch: state.epoch,
                    code: setting.code,
                    f_s: setting.f_s,
                    r_in: point.r_in,
                    delivered_power: point.p_in,
                    metric: measured.unwrap_or(0.0),
                    controller_power: controller_power(setting.f_s).watts,
                    stored_power: stored,
                    direction_up: state.direction_up,
                    clamped: state.clamped,
                });
            }
            state = po_step(cfg, state, measured)?;
            if phase == PoPhase::Perturb {
                let setting = frequency_map(&cfg.plan, state.code as i64);
                let point = plant.operating_point(&setting)?;
                stored = plant
                    .settle(&setting, &point, SETTLE_CLOCKS)?
                    .map(|e| e * setting.f_s / SETTLE_CLOCKS as f64);
            }
        }
        if let Some(last) = records.last_mut() {
            last.direction_up = state.direction_up;
            last.stored_power = stored;
        }
    }
    Ok(Trajectory {
        records,
        final_state: state,
    })
}

/// Random strictly unimodal power profile over `n` codes with its peak at
/// index `peak`.
pub fn unimodal_profile<R: rand::Rng>(rng: &mut R, n: usize, peak: usize) -> Vec<f64> {
    let mut p = vec![0.0; n];
    p[peak] = 1.0;
    for i in (0..peak).rev() {
        p[i] = p[i + 1] * rng.random_range(0.5..0.999);
    }
    for i in peak + 1..n {
        p[i] = p[i - 1] * rng.random_range(0.5..0.999);
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn clock(cfg: &MpptConfig, mut s: MpptState, metric: impl Fn(u32) -> f64) -> MpptState {
        for _ in 0..EPOCH_CLOCKS {
            let m = PoPhase::at(s.counter)
                .takes_sample()
                .then(|| metric(s.code));
            s = po_step(cfg, s, m).unwrap();
        }
        s
    }

    #[test]
    fn metric_laws() {
        let p = EstimatorParams::default();
        assert_eq!(power_metric(0.0, 50e-9, &p), 0.0);
        let v_in = 0.6 / p.divider_ratio;
        let r = power_metric(v_in, 100e-9, &p) / power_metric(v_in, 2e-9, &p);
        assert_relative_eq!(r, 50f64.sqrt(), max_relative = 1e-12);
        let a = power_metric(20e-3 / p.divider_ratio, 50e-9, &p);
        let b = power_metric(60e-3 / p.divider_ratio, 50e-9, &p);
        assert_relative_eq!(b, 3.0 * a, max_relative = 1e-12);
    }

    #[test]
    fn frequency_anchors() {
        let plan = FrequencyPlan::default();
        let s = frequency_map(&plan, 1);
        assert_relative_eq!(s.i_b, 2e-9);
        assert_relative_eq!(s.f_s, 20e3, max_relative = 1e-12);
        assert_relative_eq!(frequency_map(&plan, 50).f_s, 1e6, max_relative = 1e-12);
        assert_relative_eq!(frequency_map(&plan, 25).f_s, 500e3, max_relative = 1e-12);
        let s = frequency_map(&plan, 77);
        assert!(s.clamped && s.code == 50);
        assert!(frequency_map(&plan, 0).clamped);
    }

    #[test]
    fn controller_power_anchors() {
        assert_eq!(controller_power(20e3).watts, 17.4e-9);
        assert_eq!(controller_power(1e6).watts, 278.5e-9);
        assert_relative_eq!(
            controller_power(510e3).watts,
            147.95e-9,
            max_relative = 1e-12
        );
        assert!(controller_power(2e6).clamped);
        assert!(!controller_power(2e5).clamped);
    }

    #[test]
    fn protocol_order_enforced() {
        let cfg = MpptConfig::default();
        let s = MpptState::new(10, true);
        assert!(matches!(
            po_step(&cfg, s, None),
            Err(Error::Protocol { .. })
        ));
        let s = po_step(&cfg, s, Some(1.0)).unwrap();
        assert_eq!(s.phase, PoPhase::Perturb);
        assert!(matches!(
            po_step(&cfg, s, Some(1.0)),
            Err(Error::Protocol { .. })
        ));
    }

    #[test]
    fn decision_rule() {
        let cfg = MpptConfig::default();
        let up = |better: f64| {
            clock(&cfg, MpptState::new(10, true), |c| {
                if c == 10 {
                    1.0
                } else {
                    better
                }
            })
        };
        assert!(up(2.0).direction_up);
        assert!(!up(0.5).direction_up);
        assert!(up(1.0).direction_up, "tie keeps direction");
    }

    #[test]
    fn comparator_offset_masks_small_drops() {
        let cfg = MpptConfig {
            comparator_offset: 0.1,
            ..MpptConfig::default()
        };
        let s = clock(&cfg, MpptState::new(10, true), |c| {
            if c == 10 {
                1.0
            } else {
                0.95
            }
        });
        assert!(s.direction_up);
    }

    #[test]
    fn liveness_one_perturbation_per_epoch() {
        let cfg = MpptConfig::default();
        let mut s = MpptState::new(20, true);
        let mut sample_clocks = Vec::new();
        for t in 0..3 * EPOCH_CLOCKS as u64 {
            let phase = PoPhase::at(s.counter);
            if phase.takes_sample() {
                sample_clocks.push(t);
            }
            assert_eq!(s.analog_on, phase != PoPhase::Idle);
            s = po_step(&cfg, s, phase.takes_sample().then_some(1.0)).unwrap();
        }
        assert_eq!(s.perturbations, 3);
        assert_eq!(s.epoch, 3);
        assert_eq!(sample_clocks.len(), 6);
        for pair in sample_clocks.chunks(2) {
            // the perturbation lands one clock after the first sample
            assert_eq!(pair[1] - pair[0], SETTLE_CLOCKS as u64 + 1);
        }
    }

    fn profile_with_peak(peak_code: u32) -> ProfilePlant {
        let mut rng = ChaCha8Rng::seed_from_u64(peak_code as u64);
        ProfilePlant::new(unimodal_profile(&mut rng, 50, peak_code as usize - 1), 1)
    }

    #[test]
    fn converges_from_code_5() {
        let plant = profile_with_peak(30);
        let t = closed_loop_run(&plant, &MpptConfig::default(), 5, true, 60).unwrap();
        let settled = t.settled_at(30, 1).unwrap();
        assert!(settled <= 30);
        assert!(t.codes()[settled..].contains(&30));
    }

    #[test]
    fn limit_cycle_at_optimum() {
        let plant = profile_with_peak(17);
        let t = closed_loop_run(&plant, &MpptConfig::default(), 17, true, 20).unwrap();
        assert_eq!(t.settled_at(17, 1), Some(0));
        let codes = t.codes();
        assert!(codes.contains(&16) && codes.contains(&18));
    }

    #[test]
    fn monotone_profile_rails() {
        let plant = ProfilePlant::new((1..=50).map(|c| c as f64).collect(), 1);
        let t = closed_loop_run(&plant, &MpptConfig::default(), 45, true, 20).unwrap();
        assert!(t.records.iter().any(|r| r.code == 50 && r.clamped));
        assert!(t.settled_at(50, 1).unwrap() <= 5);
    }

    #[test]
    fn harvester_tracks_rectifier_optimum() {
        let plant = HarvesterPlant::new(
            RectifierModel::default(),
            ConverterConfig::default(),
            10e-6,
            40e-9,
        );
        let cfg = MpptConfig::default();
        let best = (1..=50u32)
            .max_by(|&a, &b| {
                let pa = plant
                    .operating_point(&frequency_map(&cfg.plan, a as i64))
                    .unwrap()
                    .p_in;
                let pb = plant
                    .operating_point(&frequency_map(&cfg.plan, b as i64))
                    .unwrap()
                    .p_in;
                pa.total_cmp(&pb)
            })
            .unwrap();
        let t = closed_loop_run(&plant, &cfg, 45, false, 50).unwrap();
        assert!(t.settled_at(best, 1).is_some());
        let last = t.records.last().unwrap();
        assert!(last.stored_power.unwrap() > 0.0);
        assert!(last.stored_power.unwrap() < last.delivered_power);
    }

    #[test]
    fn random_unimodal_profiles_converge() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cfg = MpptConfig::default();
        let span = cfg.plan.span() as usize;
        for _ in 0..20 {
            let peak = rng.random_range(0..50);
            let plant = ProfilePlant::new(unimodal_profile(&mut rng, 50, peak), 1);
            let start = rng.random_range(1..=50);
            let t = closed_loop_run(&plant, &cfg, start, rng.random(), 2 * span + 10).unwrap();
            let settled = t.settled_at(plant.optimum(), 1).expect("never settled");
            assert!(settled <= 2 * span);
        }
    }

    proptest! {
        #[test]
        fn argmax_matches_input_power(vs in prop::collection::vec((0.01f64..2.0, 1e-9f64..1e-7), 2..40)) {
            let p = EstimatorParams::default();
            let by_metric = vs.iter().enumerate()
                .max_by(|a, b| power_metric(a.1.0, a.1.1, &p).total_cmp(&power_metric(b.1.0, b.1.1, &p)))
                .unwrap().0;
            let by_power = vs.iter().enumerate()
                .max_by(|a, b| (a.1.0 * a.1.0 * a.1.1).total_cmp(&(b.1.0 * b.1.0 * b.1.1)))
                .unwrap().0;
            prop_assert_eq!(by_metric, by_power);
        }
    }
}
