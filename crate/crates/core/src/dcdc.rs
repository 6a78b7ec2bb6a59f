//! Buck-boost converter in discontinuous conduction mode (DCM).
//!
//! The closed forms for input resistance and input power live next to a
//! cycle-level simulator that integrates the inductor current analytically
//! through each phase. With every loss set to zero the simulator is exact,
//! which makes it the reference the closed forms are checked against.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gate transitions per switching cycle: S1 and S3 open the charge phase,
/// S2 and the output switch (S4 or S5) open the discharge phase.
pub const SWITCH_EVENTS_PER_CYCLE: f64 = 4.0;

/// Below this argument the loss kernels switch from closed forms to series.
const SERIES_CUTOFF: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PowerMode {
    LowPower,
    HighPower,
}

impl PowerMode {
    pub const ALL: [PowerMode; 2] = [PowerMode::LowPower, PowerMode::HighPower];

    pub fn label(self) -> &'static str {
        match self {
            PowerMode::LowPower => "low-power",
            PowerMode::HighPower => "high-power",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Charge,
    Discharge,
    Idle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputTarget {
    /// Discharge into C_store through S4.
    Store,
    /// Discharge into C_supply through S5.
    Supply,
}

/// On-resistances and gate-drive cost of the five power switches in one
/// sizing mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchSet {
    pub r_s1: f64,
    pub r_s2: f64,
    pub r_s3: f64,
    /// Constant part of the S4 on-resistance.
    pub r_s4: f64,
    /// Overdrive term of S4 in ohm-volts. S4 is driven from the storage
    /// node, so its resistance grows as `r_s4_lv / V_out` when that node
    /// sits low.
    #[serde(default)]
    pub r_s4_lv: f64,
    pub r_s5: f64,
    /// Energy drawn from the supply per gate transition.
    pub drive_energy: f64,
}

impl SwitchSet {
    pub const LOSSLESS: SwitchSet = SwitchSet {
        r_s1: 0.0,
        r_s2: 0.0,
        r_s3: 0.0,
        r_s4: 0.0,
        r_s4_lv: 0.0,
        r_s5: 0.0,
        drive_energy: 0.0,
    };

    /// Shipped low-power calibration (small switches, cheap to drive).
    pub fn default_low_power() -> Self {
        SwitchSet {
            r_s1: 18.880_639_462_168_955,
            r_s2: 29.077_122_479_278_728,
            r_s3: 18.880_639_462_168_955,
            r_s4: 108.184_710_574_257_56,
            r_s4_lv: 11.364_537_458_908_242,
            r_s5: 108.184_710_574_257_56,
            drive_energy: 2.5e-15,
        }
    }

    /// Shipped high-power calibration (wide switches, expensive gates).
    pub fn default_high_power() -> Self {
        SwitchSet {
            r_s1: 0.5,
            r_s2: 16.351_215_821_988_877,
            r_s3: 0.5,
            r_s4: 46.802_940_289_827_134,
            r_s4_lv: 0.480_884_285_149_240_64,
            r_s5: 46.802_940_289_827_134,
            drive_energy: 7.779_686_829_114_145e-12,
        }
    }

    fn named_fields(&self) -> [(&'static str, f64); 7] {
        [
            ("r_s1", self.r_s1),
            ("r_s2", self.r_s2),
            ("r_s3", self.r_s3),
            ("r_s4", self.r_s4),
            ("r_s4_lv", self.r_s4_lv),
            ("r_s5", self.r_s5),
            ("drive_energy", self.drive_energy),
        ]
    }

    /// Effective S4 resistance at the given storage voltage.
    pub fn s4_resistance(&self, v_out: f64) -> f64 {
        if self.r_s4_lv == 0.0 {
            self.r_s4
        } else {
            self.r_s4 + self.r_s4_lv / v_out
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConverterConfig {
    pub inductance: f64,
    /// Series DC resistance of the inductor.
    pub inductor_esr: f64,
    pub c_rec: f64,
    pub c_store: f64,
    pub c_supply: f64,
    pub low_power: SwitchSet,
    pub high_power: SwitchSet,
    /// Controller, oscillator and comparator bias, drawn continuously.
    pub quiescent_power: f64,
    pub v_supply_max: f64,
    pub v_supply_min: f64,
    /// Current at which the zero-current detector ends the discharge.
    pub zcd_offset: f64,
    /// Fraction of the drawn input energy the start-up charge pump moves to
    /// C_supply.
    pub startup_efficiency: f64,
}

impl Default for ConverterConfig {
    fn default() -> Self {
        ConverterConfig {
            inductance: 220e-6,
            inductor_esr: 21.1,
            c_rec: 8.5e-9,
            c_store: 22e-6,
            c_supply: 20e-9,
            low_power: SwitchSet::default_low_power(),
            high_power: SwitchSet::default_high_power(),
            quiescent_power: 1.352_565_007_567_900_5e-7,
            v_supply_max: 1.8,
            v_supply_min: 1.2,
            zcd_offset: 0.0,
            startup_efficiency: 0.1,
        }
    }
}

impl ConverterConfig {
    /// Ideal converter: no resistance, no drive or bias cost.
    pub fn lossless() -> Self {
        ConverterConfig {
            inductor_esr: 0.0,
            low_power: SwitchSet::LOSSLESS,
            high_power: SwitchSet::LOSSLESS,
            quiescent_power: 0.0,
            ..ConverterConfig::default()
        }
    }

    pub fn switches(&self, mode: PowerMode) -> &SwitchSet {
        match mode {
            PowerMode::LowPower => &self.low_power,
            PowerMode::HighPower => &self.high_power,
        }
    }

    /// Checks ranges and the mode ordering. Loss terms may be zero so the
    /// ideal converter stays representable; the ordering is therefore
    /// checked non-strictly.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("inductance", self.inductance),
            ("c_rec", self.c_rec),
            ("c_store", self.c_store),
            ("c_supply", self.c_supply),
            ("v_supply_max", self.v_supply_max),
            ("v_supply_min", self.v_supply_min),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(name, format!("must be > 0, got {v}")));
            }
        }
        let non_negative = [
            ("inductor_esr", self.inductor_esr),
            ("quiescent_power", self.quiescent_power),
            ("zcd_offset", self.zcd_offset),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(name, format!("must be >= 0, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.startup_efficiency) {
            return Err(Error::config(
                "startup_efficiency",
                format!("must lie in [0, 1], got {}", self.startup_efficiency),
            ));
        }
        if self.v_supply_min >= self.v_supply_max {
            return Err(Error::config(
                "v_supply_min",
                format!("must be below v_supply_max ({})", self.v_supply_max),
            ));
        }
        for (mode, set) in [
            ("low_power", &self.low_power),
            ("high_power", &self.high_power),
        ] {
            for (name, v) in set.named_fields() {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::config(
                        format!("{mode}.{name}"),
                        format!("must be >= 0, got {v}"),
                    ));
                }
            }
        }
        let lp = self.low_power.named_fields();
        let hp = self.high_power.named_fields();
        for ((name, lo), (_, hi)) in lp.iter().zip(hp.iter()) {
            if *name == "drive_energy" {
                if lo > hi {
                    return Err(Error::config(
                        "low_power.drive_energy",
                        "low-power mode must not cost more drive energy than high-power mode",
                    ));
                }
            } else if lo < hi {
                return Err(Error::config(
                    format!("low_power.{name}"),
                    "low-power switches must not be stronger than high-power switches",
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConverterState {
    pub inductor_current: f64,
    pub v_in: f64,
    pub v_out: f64,
    pub v_dd: f64,
    pub phase: Phase,
    pub mode: PowerMode,
    pub target: OutputTarget,
    pub startup_active: bool,
}

impl Default for ConverterState {
    fn default() -> Self {
        ConverterState {
            inductor_current: 0.0,
            v_in: 0.38,
            v_out: 1.4,
            v_dd: 1.5,
            phase: Phase::Idle,
            mode: PowerMode::LowPower,
            target: OutputTarget::Store,
            startup_active: false,
        }
    }
}

/// Energy accounting for one switching cycle. All energies in joules.
///
/// `delivered` is the net gain: gross energy pushed into the target
/// capacitor minus the drive and bias energy the converter draws from its
/// own supply. With that convention
/// `input = delivered + conduction + switching + quiescent + startup_loss`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CycleLedger {
    pub cycle: usize,
    pub target: OutputTarget,
    pub i_peak: f64,
    pub t_charge: f64,
    pub t_discharge: f64,
    pub input: f64,
    pub delivered: f64,
    pub conduction: f64,
    pub switching: f64,
    pub quiescent: f64,
    pub startup_loss: f64,
    /// The discharge finished inside the period.
    pub dcm_ok: bool,
}

impl CycleLedger {
    pub fn accounted(&self) -> f64 {
        self.delivered + self.conduction + self.switching + self.quiescent + self.startup_loss
    }

    pub fn gross_output(&self) -> f64 {
        self.delivered + self.switching + self.quiescent
    }

    pub fn efficiency(&self) -> f64 {
        if self.input > 0.0 {
            self.delivered / self.input
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRun {
    pub state: ConverterState,
    pub ledger: Vec<CycleLedger>,
}

impl SimulationRun {
    pub fn total_input(&self) -> f64 {
        self.ledger.iter().map(|c| c.input).sum()
    }

    pub fn total_delivered(&self) -> f64 {
        self.ledger.iter().map(|c| c.delivered).sum()
    }

    /// `V_in^2 / P_in` with `P_in` averaged over all simulated cycles.
    pub fn average_input_resistance(&self, v_in: f64, f_s: f64) -> f64 {
        let p = self.total_input() * f_s / self.ledger.len() as f64;
        v_in * v_in / p
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoostResistance {
    pub ohms: f64,
    /// `V_out == V_in`: the formula sits on its boundary and returns zero.
    pub at_boundary: bool,
}

fn check_duty(l: f64, d: f64, t: f64) -> Result<()> {
    if !(l > 0.0) {
        return Err(Error::domain(format!("inductance must be > 0, got {l}")));
    }
    if !(d > 0.0 && d < 1.0) {
        return Err(Error::domain(format!("duty must lie in (0, 1), got {d}")));
    }
    if !(t > 0.0) {
        return Err(Error::domain(format!("period must be > 0, got {t}")));
    }
    Ok(())
}

/// Average input resistance of the DCM buck-boost converter, `2L / (D^2 T)`.
/// It does not depend on the output voltage.
pub fn input_resistance_buckboost(l: f64, d: f64, t: f64) -> Result<f64> {
    check_duty(l, d, t)?;
    Ok(2.0 * l / (d * d * t))
}

/// Average input resistance of a DCM boost converter,
/// `2L / (D^2 T) * (1 - V_in / V_out)`, which does depend on the output.
pub fn input_resistance_boost(
    l: f64,
    d: f64,
    t: f64,
    v_in: f64,
    v_out: f64,
) -> Result<BoostResistance> {
    check_duty(l, d, t)?;
    if !(v_in > 0.0) {
        return Err(Error::domain(format!("V_in must be > 0, got {v_in}")));
    }
    if v_out < v_in {
        return Err(Error::domain(format!(
            "boost requires V_out >= V_in, got V_out = {v_out}, V_in = {v_in}"
        )));
    }
    let at_boundary = v_out == v_in;
    let ohms = if at_boundary {
        0.0
    } else {
        2.0 * l / (d * d * t) * (1.0 - v_in / v_out)
    };
    Ok(BoostResistance { ohms, at_boundary })
}

/// Average DCM input power `V_in^2 f_s T_on^2 / (2L)`.
pub fn dcm_input_power(v_in: f64, f_s: f64, t_on: f64, l: f64) -> f64 {
    v_in * v_in * f_s * t_on * t_on / (2.0 * l)
}

/// ON time that draws `p_in` at the given input voltage and frequency.
pub fn on_time_for_power(p_in: f64, v_in: f64, f_s: f64, l: f64) -> Result<f64> {
    if !(p_in >= 0.0 && v_in > 0.0 && f_s > 0.0 && l > 0.0) {
        return Err(Error::domain("need P_in >= 0 and positive V_in, f_s, L"));
    }
    Ok((2.0 * l * p_in / (v_in * v_in * f_s)).sqrt())
}

/// `true` when an ideal converter finishes its discharge within the period.
pub fn dcm_check(v_in: f64, v_out: f64, f_s: f64, t_on: f64) -> bool {
    t_on * (1.0 + v_in / v_out) <= 1.0 / f_s
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct ChargePhase {
    i_peak: f64,
    input: f64,
    conduction: f64,
}

/// Inductor charged from `v` through `r` for `t_on`, starting at zero.
fn charge_phase(v: f64, t_on: f64, l: f64, r: f64) -> ChargePhase {
    let scale = v * v * t_on * t_on / l;
    if r == 0.0 {
        return ChargePhase {
            i_peak: v * t_on / l,
            input: 0.5 * scale,
            conduction: 0.0,
        };
    }
    let x = t_on * r / l;
    let g1 = -(-x).exp_m1() / x;
    let (g2, g3) = if x < SERIES_CUTOFF {
        charge_series(x)
    } else {
        let e1 = (-x).exp_m1();
        let e2 = (-2.0 * x).exp_m1();
        ((x + e1) / (x * x), (x + 2.0 * e1 - 0.5 * e2) / (x * x * x))
    };
    ChargePhase {
        i_peak: v * t_on / l * g1,
        input: scale * g2,
        conduction: scale * x * g3,
    }
}

/// Taylor series of the charge-phase energy kernels around `x = 0`.
fn charge_series(x: f64) -> (f64, f64) {
    let mut g2 = 0.0;
    let mut g3 = 0.0;
    let mut fact = 2.0;
    let mut pow = 1.0;
    for n in 2..14u32 {
        if n > 2 {
            fact *= n as f64;
        }
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        g2 += sign * pow / fact;
        if n >= 3 {
            let c = (2f64.powi(n as i32 - 1) - 2.0) / fact;
            g3 += -sign * c * pow / x;
        }
        pow *= x;
    }
    (g2, g3)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct DischargePhase {
    duration: f64,
    output: f64,
    conduction: f64,
}

/// Inductor current `i0` ramped to zero against a fixed output voltage
/// through `r`.
fn discharge_to_zero(i0: f64, v: f64, l: f64, r: f64) -> DischargePhase {
    if i0 == 0.0 {
        return DischargePhase {
            duration: 0.0,
            output: 0.0,
            conduction: 0.0,
        };
    }
    let w = l * i0 * i0;
    if r == 0.0 {
        return DischargePhase {
            duration: l * i0 / v,
            output: 0.5 * w,
            conduction: 0.0,
        };
    }
    let y = i0 * r / v;
    let (h, rest) = if y < SERIES_CUTOFF {
        let mut h = 0.0;
        let mut rest = 0.0;
        let mut pow = 1.0;
        for n in 2..16u32 {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            h += sign * pow / n as f64;
            if n >= 3 {
                rest -= sign * pow / n as f64;
            }
            pow *= y;
        }
        (h, rest)
    } else {
        let h = (y - y.ln_1p()) / (y * y);
        (h, 0.5 - h)
    };
    DischargePhase {
        duration: l / r * y.ln_1p(),
        output: w * h,
        conduction: w * rest,
    }
}

/// Discharge that stops at the ZCD threshold. The trajectory below the
/// threshold is the tail of the full discharge, so the partial phase is the
/// difference of two full ones. Energy left in the inductor when the switch
/// opens is dissipated.
fn discharge_phase(i0: f64, v: f64, l: f64, r: f64, zcd_offset: f64) -> DischargePhase {
    if zcd_offset <= 0.0 {
        return discharge_to_zero(i0, v, l, r);
    }
    if zcd_offset >= i0 {
        return DischargePhase {
            duration: 0.0,
            output: 0.0,
            conduction: 0.5 * l * i0 * i0,
        };
    }
    let full = discharge_to_zero(i0, v, l, r);
    let tail = discharge_to_zero(zcd_offset, v, l, r);
    DischargePhase {
        duration: full.duration - tail.duration,
        output: full.output - tail.output,
        conduction: full.conduction - tail.conduction + 0.5 * l * zcd_offset * zcd_offset,
    }
}

fn charge_capacitor(v: f64, energy: f64, c: f64) -> f64 {
    (v * v + 2.0 * energy / c).max(0.0).sqrt()
}

/// Voltage after adding `energy` to capacitor `c` charged to `v`.
pub fn capacitor_after(v: f64, energy: f64, c: f64) -> f64 {
    charge_capacitor(v, energy, c)
}

/// Energy flows of one converter cycle into a target held at `v_target`.
pub fn cycle_energy(
    cfg: &ConverterConfig,
    mode: PowerMode,
    target: OutputTarget,
    v_in: f64,
    v_target: f64,
    f_s: f64,
    t_on: f64,
) -> Result<CycleLedger> {
    if !(f_s > 0.0) || !(t_on >= 0.0) || t_on * f_s >= 1.0 {
        return Err(Error::domain(format!(
            "need f_s > 0 and 0 <= T_on < 1/f_s, got f_s = {f_s}, T_on = {t_on}"
        )));
    }
    if !(v_in >= 0.0) {
        return Err(Error::domain(format!("V_in must be >= 0, got {v_in}")));
    }
    if !(v_target > 0.0) {
        return Err(Error::Unstable(format!(
            "discharge target at {v_target} V: the inductor current never reaches the ZCD threshold"
        )));
    }
    let sw = cfg.switches(mode);
    let l = cfg.inductance;
    let period = 1.0 / f_s;
    let r_charge = cfg.inductor_esr + sw.r_s1 + sw.r_s3;
    let r_out = match target {
        OutputTarget::Store => sw.s4_resistance(v_target),
        OutputTarget::Supply => sw.r_s5,
    };
    let r_discharge = cfg.inductor_esr + sw.r_s2 + r_out;

    let charge = charge_phase(v_in, t_on, l, r_charge);
    let discharge = discharge_phase(charge.i_peak, v_target, l, r_discharge, cfg.zcd_offset);
    let switching = SWITCH_EVENTS_PER_CYCLE * sw.drive_energy;
    let quiescent = cfg.quiescent_power * period;
    let ledger = CycleLedger {
        cycle: 0,
        target,
        i_peak: charge.i_peak,
        t_charge: t_on,
        t_discharge: discharge.duration,
        input: charge.input,
        delivered: discharge.output - switching - quiescent,
        conduction: charge.conduction + discharge.conduction,
        switching,
        quiescent,
        startup_loss: 0.0,
        dcm_ok: t_on + discharge.duration <= period,
    };
    let values = [
        ledger.i_peak,
        ledger.t_discharge,
        ledger.input,
        ledger.delivered,
        ledger.conduction,
    ];
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Unstable(format!(
            "non-finite cycle result at V_in = {v_in}, V_target = {v_target}, T_on = {t_on}"
        )));
    }
    Ok(ledger)
}

/// Runs `n_cycles` switching cycles from `state`, updating the capacitor
/// voltages from each cycle's energy ledger and applying the housekeeping
/// rules after every cycle. `V_in` is held by the source.
pub fn cycle_simulate(
    cfg: &ConverterConfig,
    state: ConverterState,
    f_s: f64,
    t_on: f64,
    n_cycles: usize,
) -> Result<SimulationRun> {
    cfg.validate()?;
    let mut state = state;
    let mut ledger = Vec::with_capacity(n_cycles);
    for cycle in 0..n_cycles {
        let mut entry = if state.startup_active {
            startup_cycle(cfg, &state, f_s, t_on)?
        } else {
            let v_target = match state.target {
                OutputTarget::Store => state.v_out,
                OutputTarget::Supply => state.v_dd,
            };
            cycle_energy(
                cfg,
                state.mode,
                state.target,
                state.v_in,
                v_target,
                f_s,
                t_on,
            )?
        };
        entry.cycle = cycle;
        if state.startup_active {
            state.v_dd = charge_capacitor(state.v_dd, entry.delivered, cfg.c_supply);
        } else {
            let overhead = entry.switching + entry.quiescent;
            match state.target {
                OutputTarget::Store => {
                    state.v_out = charge_capacitor(state.v_out, entry.gross_output(), cfg.c_store);
                    state.v_dd = charge_capacitor(state.v_dd, -overhead, cfg.c_supply);
                }
                OutputTarget::Supply => {
                    state.v_dd = charge_capacitor(state.v_dd, entry.delivered, cfg.c_supply);
                }
            }
        }
        state.inductor_current = 0.0;
        state.phase = Phase::Idle;
        ledger.push(entry);
        let reading = MonitorReading {
            v_dd: state.v_dd,
            v_store: state.v_out,
        };
        state = housekeeping_step(cfg, state, reading);
    }
    Ok(SimulationRun { state, ledger })
}

/// While the start-up pump runs the main switches idle. The pump draws the
/// same average input energy as the converter would at this operating point
/// and moves a fixed fraction of it to C_supply.
fn startup_cycle(
    cfg: &ConverterConfig,
    state: &ConverterState,
    f_s: f64,
    t_on: f64,
) -> Result<CycleLedger> {
    let input = charge_phase(state.v_in, t_on, cfg.inductance, cfg.inductor_esr).input;
    let delivered = cfg.startup_efficiency * input;
    if !input.is_finite() || !(f_s > 0.0) {
        return Err(Error::Unstable(
            "start-up cycle produced a non-finite input energy".into(),
        ));
    }
    Ok(CycleLedger {
        cycle: 0,
        target: OutputTarget::Supply,
        i_peak: 0.0,
        t_charge: 0.0,
        t_discharge: 0.0,
        input,
        delivered,
        conduction: 0.0,
        switching: 0.0,
        quiescent: 0.0,
        startup_loss: input - delivered,
        dcm_ok: true,
    })
}

/// Voltage monitor sample fed to [`housekeeping_step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorReading {
    pub v_dd: f64,
    pub v_store: f64,
}

/// Applies the supply-management rules to fresh monitor readings.
///
/// The main converter can run once either capacitor is above the supply
/// floor; until then the start-up pump is on. Reaching `v_supply_max` sends
/// the discharge to C_store through S4, dropping below `v_supply_min` sends
/// it to C_supply through S5, and between the two thresholds the previous
/// routing is kept.
pub fn housekeeping_step(
    cfg: &ConverterConfig,
    state: ConverterState,
    reading: MonitorReading,
) -> ConverterState {
    let mut next = state;
    next.v_dd = reading.v_dd;
    next.v_out = reading.v_store;
    let can_run = reading.v_dd >= cfg.v_supply_min || reading.v_store >= cfg.v_supply_min;
    next.startup_active = !can_run;
    if reading.v_dd >= cfg.v_supply_max {
        next.target = OutputTarget::Store;
    } else if reading.v_dd < cfg.v_supply_min {
        next.target = OutputTarget::Supply;
    }
    next
}

/// One coordinate of the measured efficiency curves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReferencePoint {
    pub p_in: f64,
    /// Converter input voltage at which the curve was taken.
    pub v_in: f64,
    pub v_out: f64,
    /// Efficiency in percent.
    pub efficiency_pct: f64,
}

const REFERENCE_ROWS: [(f64, f64, [f64; 5]); 4] = [
    (1e-6, 0.38, [48.3, 68.8, 73.6, 76.3, 73.2]),
    (10e-6, 0.52, [55.1, 73.3, 78.7, 82.4, 82.9]),
    (100e-6, 0.74, [54.4, 71.7, 78.0, 83.2, 84.9]),
    (1e-3, 1.3, [24.1, 61.3, 79.0, 85.0, 86.3]),
];

const REFERENCE_VOUT: [f64; 5] = [0.2, 0.6, 1.0, 1.4, 1.8];

/// Measured converter efficiency: four input powers by five output
/// voltages.
pub fn efficiency_table() -> Vec<ReferencePoint> {
    REFERENCE_ROWS
        .iter()
        .flat_map(|&(p_in, v_in, row)| {
            row.into_iter()
                .zip(REFERENCE_VOUT)
                .map(move |(eff, v_out)| ReferencePoint {
                    p_in,
                    v_in,
                    v_out,
                    efficiency_pct: eff,
                })
        })
        .collect()
}

/// Looks up a reference point by input power and output voltage.
pub fn reference_efficiency(p_in: f64, v_out: f64) -> Option<f64> {
    efficiency_table()
        .into_iter()
        .find(|p| (p.p_in / p_in - 1.0).abs() < 1e-9 && (p.v_out - v_out).abs() < 1e-9)
        .map(|p| p.efficiency_pct)
}

/// Switching frequency and ON time used for a given power level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OperatingPoint {
    pub f_s: f64,
    pub t_on: f64,
}

/// Frequency at 1 µW and at 1 mW; between them the controller moves
/// log-linearly.
const F_AT_1UW: f64 = 20e3;
const F_AT_1MW: f64 = 1e6;
/// Fraction of the DCM boundary the frequency is allowed to approach.
const DCM_MARGIN: f64 = 0.9;

/// Operating point the efficiency sweep runs at. The frequency follows the
/// tracker's range (20 kHz at 1 µW, 1 MHz at 1 mW, log-linear between) but
/// is capped so the discharge keeps a 10% margin to the period.
pub fn sweep_operating_point(l: f64, p_in: f64, v_in: f64, v_out: f64) -> Result<OperatingPoint> {
    if !(l > 0.0 && p_in > 0.0 && v_in > 0.0 && v_out > 0.0) {
        return Err(Error::domain(
            "operating point needs positive L, P_in, V_in, V_out",
        ));
    }
    let slope = (F_AT_1MW / F_AT_1UW).ln() / 1e3f64.ln();
    let f_track = F_AT_1UW * (p_in / 1e-6).powf(slope);
    let k = DCM_MARGIN * v_in * v_out / (v_in + v_out);
    let f_dcm = k * k / (2.0 * l * p_in);
    let f_s = f_track.min(f_dcm);
    Ok(OperatingPoint {
        f_s,
        t_on: on_time_for_power(p_in, v_in, f_s, l)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EfficiencyPoint {
    pub p_in: f64,
    pub v_in: f64,
    pub v_out: f64,
    pub mode: PowerMode,
    pub f_s: f64,
    pub t_on: f64,
    pub efficiency: f64,
    pub dcm_ok: bool,
}

/// Simulated steady-state efficiency into C_store at a fixed output voltage.
pub fn simulated_efficiency(
    cfg: &ConverterConfig,
    mode: PowerMode,
    p_in: f64,
    v_in: f64,
    v_out: f64,
) -> Result<EfficiencyPoint> {
    let op = sweep_operating_point(cfg.inductance, p_in, v_in, v_out)?;
    let c = cycle_energy(cfg, mode, OutputTarget::Store, v_in, v_out, op.f_s, op.t_on)?;
    Ok(EfficiencyPoint {
        p_in,
        v_in,
        v_out,
        mode,
        f_s: op.f_s,
        t_on: op.t_on,
        efficiency: c.efficiency(),
        dcm_ok: c.dcm_ok,
    })
}

/// Efficiency with the better of the two switch modes, which is what the
/// mode selector picks.
pub fn best_efficiency(
    cfg: &ConverterConfig,
    p_in: f64,
    v_in: f64,
    v_out: f64,
) -> Result<EfficiencyPoint> {
    let lp = simulated_efficiency(cfg, PowerMode::LowPower, p_in, v_in, v_out)?;
    let hp = simulated_efficiency(cfg, PowerMode::HighPower, p_in, v_in, v_out)?;
    Ok(if hp.efficiency > lp.efficiency {
        hp
    } else {
        lp
    })
}
