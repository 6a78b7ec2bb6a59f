//! Release gate: one check per acceptance criterion.
//!
//! Each check returns a [`CriterionResult`] instead of panicking so the same
//! code backs the test suite and the `selftest` command. Randomized checks
//! draw from a ChaCha stream seeded from the scenario seed, which makes a
//! failing run reproducible.

use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::ScenarioConfig;
use crate::dcdc::{
    best_efficiency, cycle_simulate, dcm_check, efficiency_table, input_resistance_boost,
    input_resistance_buckboost, ConverterConfig, ConverterState,
};
use crate::error::Result;
use crate::interface::{boosted_load_voltage, required_inductance, AntennaPort, BoostNetwork};
use crate::lcadc::{
    backscatter_envelope, demodulate, pdm_encode, random_event_stream, CrossingEvent, Direction,
    PdmConfig,
};
use crate::link::{friis_gain, link_study, two_ray_gain, LinkGeometry, LinkStudy};
use crate::lna::{min_noise_factor, InterfaceImpedance, LnaParams};
use crate::mppt::{
    closed_loop_run, controller_power, power_metric, unimodal_profile, EstimatorParams, MpptConfig,
    ProfilePlant,
};
use crate::output::{format_number, Table};
use crate::quantities::{dbm_to_watts, ComplexImpedance, PowerDbm};
use crate::rectifier::{pce_accounting, RectifierModel};
use crate::uwb::{
    analyze, antenna_transfer, antenna_voltage_nodal, builtin_mask, energy_per_pulse, mask_check,
    network_rolloff_db, perturbed_network, rms_of_peak, rolloff, statespace_pulse, synth_pulse,
    MaskSpec, Stimulus, StimulusShape, SynthSettings, UwbConfig,
};

/// Wall-clock budget for the full suite.
pub const SELFTEST_BUDGET: Duration = Duration::from_secs(300);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "[{}] {:>2} {} ({:.2} s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.seconds,
            self.detail
        )
    }
}

/// Accumulates sub-checks of one criterion; the criterion passes only if
/// every sub-check does.
struct Checks {
    ok: bool,
    notes: Vec<String>,
}

impl Checks {
    fn new() -> Self {
        Checks {
            ok: true,
            notes: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, note: impl Into<String>) {
        let note = note.into();
        self.ok &= ok;
        self.notes
            .push(if ok { note } else { format!("FAILED {note}") });
    }
}

fn timed(id: u8, name: &'static str, f: impl FnOnce(&mut Checks) -> Result<()>) -> CriterionResult {
    let start = Instant::now();
    let mut c = Checks::new();
    if let Err(e) = f(&mut c) {
        c.check(false, format!("error: {e}"));
    }
    CriterionResult {
        id,
        name,
        passed: c.ok,
        detail: c.notes.join("; "),
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn rng_for(seed: u64, id: u8) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (u64::from(id) << 56))
}

/// Input energy of one ON phase by explicit time stepping of
/// `L di/dt = V_in`, independent of the analytic kernels.
fn stepped_input_energy(v_in: f64, l: f64, t_on: f64) -> f64 {
    let steps = 4000;
    let dt = t_on / steps as f64;
    let mut i = 0.0;
    let mut e = 0.0;
    for _ in 0..steps {
        let i_next = i + v_in / l * dt;
        e += v_in * 0.5 * (i + i_next) * dt;
        i = i_next;
    }
    e
}

/// Check 1: Closed-form DCM input resistance against the cycle simulator and a
/// time-stepped integration, lossless converter.
pub fn dcm_closed_form(seed: u64) -> CriterionResult {
    timed(
        1,
        "DCM input resistance: closed form vs cycle simulation",
        |c| {
            let start = Instant::now();
            let mut rng = rng_for(seed, 1);
            let cfg = ConverterConfig::lossless();
            let (mut worst_sim, mut worst_step) = (0.0f64, 0.0f64);
            let mut dcm_points = 0;
            for _ in 0..100 {
                let l = 10f64.powf(rng.random_range(-5.0..-3.0));
                let v_in = rng.random_range(0.1..1.5);
                let v_out = rng.random_range(0.2..1.8);
                let f_s = 10f64.powf(rng.random_range(3.0..6.0));
                let d = rng.random_range(0.01..0.9 / (1.0 + v_in / v_out));
                let t_on = d / f_s;
                dcm_points += usize::from(dcm_check(v_in, v_out, f_s, t_on));
                let cfg = ConverterConfig {
                    inductance: l,
                    ..cfg.clone()
                };
                let state = ConverterState {
                    v_in,
                    v_out,
                    v_dd: 1.5,
                    ..ConverterState::default()
                };
                let run = cycle_simulate(&cfg, state, f_s, t_on, 8)?;
                let r_eq = input_resistance_buckboost(l, d, 1.0 / f_s)?;
                let r_sim = run.average_input_resistance(v_in, f_s);
                let r_step = v_in * v_in / (stepped_input_energy(v_in, l, t_on) * f_s);
                worst_sim = worst_sim.max((r_eq / r_sim - 1.0).abs());
                worst_step = worst_step.max((r_eq / r_step - 1.0).abs());
            }
            let secs = start.elapsed().as_secs_f64();
            c.check(dcm_points == 100, format!("{dcm_points}/100 points in DCM"));
            c.check(
                worst_sim < 0.01,
                format!("worst |R_eq/R_sim - 1| = {worst_sim:.2e}"),
            );
            c.check(
                worst_step < 0.01,
                format!("worst vs time-stepped = {worst_step:.2e}"),
            );
            c.check(secs < 10.0, format!("{secs:.2} s"));
            Ok(())
        },
    )
}

/// Check 2: Buck-boost input resistance does not move with V_out; the boost
/// formula does.
pub fn buckboost_independence(cfg: &ConverterConfig) -> CriterionResult {
    timed(2, "Buck-boost R_in independent of V_out", |c| {
        let (v_in, f_s, t_on) = (0.38, 20e3, 390.3e-9);
        let mut r = Vec::new();
        for k in 0..=16 {
            let v_out = 0.2 + 0.1 * k as f64;
            let state = ConverterState {
                v_in,
                v_out,
                v_dd: 1.5,
                ..ConverterState::default()
            };
            let run = cycle_simulate(cfg, state, f_s, t_on, 8)?;
            r.push(run.average_input_resistance(v_in, f_s));
        }
        let (lo, hi) = r
            .iter()
            .fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
        c.check(
            hi / lo - 1.0 < 0.01,
            format!("simulated R_in spread {:.3e}", hi / lo - 1.0),
        );
        let d = t_on * f_s;
        let boost_lo = input_resistance_boost(cfg.inductance, d, 1.0 / f_s, 0.15, 0.2)?.ohms;
        let boost_hi = input_resistance_boost(cfg.inductance, d, 1.0 / f_s, 0.15, 1.8)?.ohms;
        let spread = boost_hi / boost_lo;
        c.check(
            spread >= 2.0,
            format!("boost R_in spread x{spread:.2} at V_in = 0.15 V"),
        );
        Ok(())
    })
}

/// Check 3: Reference efficiency data round-trips through CSV exactly and the
/// calibrated model stays within 3 points of every entry.
pub fn efficiency_reference(cfg: &ConverterConfig) -> CriterionResult {
    timed(3, "DC-DC efficiency reference data", |c| {
        let table = efficiency_table();
        c.check(
            table.len() == 20,
            format!("{} reference points", table.len()),
        );
        let mut t = Table::new(["p_in_w", "v_out_v", "efficiency"]);
        for p in &table {
            t.push(vec![
                p.p_in.into(),
                p.v_out.into(),
                (p.efficiency_pct / 100.0).into(),
            ])?;
        }
        let text = t.to_csv_string()?;
        let exact = text.lines().skip(1).zip(&table).all(|(line, p)| {
            let f: Vec<f64> = line
                .split(',')
                .map(|x| x.parse().unwrap_or(f64::NAN))
                .collect();
            f == [p.p_in, p.v_out, p.efficiency_pct / 100.0]
        });
        c.check(exact, "CSV values exact");
        let anchor = format!(
            "{},{},{}",
            format_number(1e-6),
            format_number(1.4),
            format_number(0.763)
        );
        c.check(
            text.lines().any(|l| l == anchor),
            format!("row {anchor} present"),
        );
        let mut worst = 0.0f64;
        for p in &table {
            let e = best_efficiency(cfg, p.p_in, p.v_in, p.v_out)?;
            worst = worst.max((e.efficiency * 100.0 - p.efficiency_pct).abs());
        }
        c.check(worst <= 3.0, format!("worst model error {worst:.2} points"));
        Ok(())
    })
}

/// Check 4: P&O convergence on random unimodal profiles plus the controller
/// power anchors.
pub fn mppt_convergence(cfg: &MpptConfig, seed: u64) -> CriterionResult {
    timed(4, "MPPT convergence", |c| {
        let mut rng = rng_for(seed, 4);
        let plan = &cfg.plan;
        let span = plan.span() as usize;
        let n = span + 1;
        let mut ok = 0;
        let mut worst = 0;
        for _ in 0..50 {
            let peak = rng.random_range(0..n);
            let plant = ProfilePlant::new(unimodal_profile(&mut rng, n, peak), plan.code_min);
            let start = rng.random_range(plan.code_min..=plan.code_max);
            let t = closed_loop_run(&plant, cfg, start, rng.random(), 2 * span + 10)?;
            match t.settled_at(plant.optimum(), 1) {
                Some(e) if e <= 2 * span => {
                    ok += 1;
                    worst = worst.max(e);
                }
                _ => {}
            }
        }
        c.check(
            ok == 50,
            format!(
                "{ok}/50 settled, slowest after {worst} epochs (limit {})",
                2 * span
            ),
        );
        let lo = controller_power(20e3).watts;
        let hi = controller_power(1e6).watts;
        c.check(
            lo == 17.4e-9 && hi == 278.5e-9,
            format!("controller power {lo:e} W, {hi:e} W"),
        );
        Ok(())
    })
}

/// Check 5: Power-estimator scaling laws and argmax equivalence.
pub fn estimator_laws(p: &EstimatorParams, seed: u64) -> CriterionResult {
    timed(5, "Power estimator laws", |c| {
        let v = 0.5 / p.divider_ratio;
        let ratio = power_metric(v, 100e-9, p) / power_metric(v, 2e-9, p);
        c.check(
            (ratio / 50f64.sqrt() - 1.0).abs() <= 1e-9,
            format!("I_B ratio {ratio:.12} vs sqrt(50)"),
        );
        let a = power_metric(0.2, 50e-9, p);
        let b = power_metric(0.7, 50e-9, p);
        c.check(
            ((b / a) / 3.5 - 1.0).abs() <= 1e-9,
            "linear in divided voltage",
        );
        let mut rng = rng_for(seed, 5);
        let mut mismatches = 0;
        for _ in 0..1000 {
            let n = rng.random_range(2..60);
            let pts: Vec<(f64, f64)> = (0..n)
                .map(|_| (rng.random_range(0.01..2.0), rng.random_range(1e-9..1e-7)))
                .collect();
            let arg = |f: &dyn Fn(&(f64, f64)) -> f64| {
                pts.iter()
                    .enumerate()
                    .max_by(|x, y| f(x.1).total_cmp(&f(y.1)))
                    .map(|(i, _)| i)
            };
            let by_metric = arg(&|q| power_metric(q.0, q.1, p));
            let by_power = arg(&|q| q.0 * q.0 * q.1);
            mismatches += usize::from(by_metric != by_power);
        }
        c.check(
            mismatches == 0,
            format!("{mismatches} argmax mismatches in 1000 grids"),
        );
        Ok(())
    })
}

/// Check 6: Rectifier calibration anchor, accounting order and monotone output.
pub fn rectifier_anchors(model: &RectifierModel, seed: u64) -> CriterionResult {
    timed(6, "Rectifier anchors", |c| {
        let pce = model.pce(10e-6, model.surface.r_opt)?.pce;
        c.check(pce == 0.60, format!("PCE(10 uW, R_opt) = {pce}"));
        let mut rng = rng_for(seed, 6);
        let mut violations = 0;
        for _ in 0..1000 {
            let z =
                ComplexImpedance::new(rng.random_range(0.5..50.0), rng.random_range(-300.0..300.0));
            let v_a = rng.random_range(0.01..2.0);
            let p_th = v_a * v_a / (2.0 * z.resistance);
            let p_ant = p_th * rng.random_range(0.05..1.0);
            let p_circ = p_ant * rng.random_range(0.05..1.0);
            let delivered = p_circ * rng.random_range(0.01..1.0);
            let a = pce_accounting(delivered, v_a, z, p_ant, p_circ)?;
            violations += usize::from(
                !(a.pce_theoretical <= a.pce_antenna && a.pce_antenna <= a.pce_circuit),
            );
        }
        c.check(
            violations == 0,
            format!("{violations} accounting order violations"),
        );
        let s = &model.surface;
        let powers: Vec<f64> = (0..=32)
            .map(|k| {
                dbm_to_watts(PowerDbm(-20.0 + 0.5 * k as f64))
                    .value()
                    .clamp(s.p_min, s.p_max)
            })
            .collect();
        let loads: Vec<f64> = (0..=40)
            .map(|k| 110e3 * (820e3f64 / 110e3).powf(k as f64 / 40.0))
            .collect();
        let mut bad = 0;
        for (i, &p) in powers.iter().enumerate() {
            for (j, &r) in loads.iter().enumerate() {
                let v = model.output_voltage(p, r)?;
                if i > 0 && v < model.output_voltage(powers[i - 1], r)? {
                    bad += 1;
                }
                if j > 0 && v < model.output_voltage(p, loads[j - 1])? {
                    bad += 1;
                }
            }
        }
        c.check(bad == 0, format!("{bad} V_out monotonicity violations"));
        Ok(())
    })
}

/// Check 7: Interface closed forms.
pub fn interface_math() -> CriterionResult {
    timed(7, "Interface math", |c| {
        let v = boosted_load_voltage(&AntennaPort {
            r_a: 1.0,
            x_a: 100.0,
            p_av: 10e-6,
        })?
        .volts;
        c.check((v / 0.44721 - 1.0).abs() <= 1e-4, format!("V_L = {v:.6} V"));
        let net = BoostNetwork {
            l_a: 3.3e-6,
            r_a: 1.0,
            c_d: 19.5e-12,
            c_b: 7.5e-12,
            c_rt: 17e-12,
            l_c: 10e-6,
        };
        let back = required_inductance(net.resonance()?, net.c_vt())?;
        c.check((back / net.l_a - 1.0).abs() <= 1e-9, "resonance round trip");
        let l = required_inductance(13.56e6, 44e-12)?;
        c.check(
            (l / 3.13e-6 - 1.0).abs() <= 0.005,
            format!("L_A = {:.4} uH", l * 1e6),
        );
        Ok(())
    })
}

/// Check 8: Noise figure at the design point and its monotonicity.
pub fn noise_figure(p: &LnaParams) -> CriterionResult {
    timed(8, "LNA noise figure", |c| {
        let nf = min_noise_factor(
            p,
            &InterfaceImpedance {
                r_a: 10.0,
                x_a: 282.7,
            },
        )?
        .nf_db;
        c.check((nf - 2.43).abs() <= 0.01, format!("NF = {nf:.4} dB"));
        let p0 = LnaParams { delta: 0.0, ..*p };
        let r: Vec<f64> = (0..50).map(|k| 1.0 + k as f64).collect();
        let x: Vec<f64> = (0..50).map(|k| 50.0 + 7.0 * k as f64).collect();
        let mut bad = 0;
        for i in 0..50 {
            for j in 0..50 {
                let f = min_noise_factor(
                    &p0,
                    &InterfaceImpedance {
                        r_a: r[i],
                        x_a: x[j],
                    },
                )?
                .factor;
                if i > 0
                    && f <= min_noise_factor(
                        &p0,
                        &InterfaceImpedance {
                            r_a: r[i - 1],
                            x_a: x[j],
                        },
                    )?
                    .factor
                {
                    bad += 1;
                }
                if j > 0
                    && f >= min_noise_factor(
                        &p0,
                        &InterfaceImpedance {
                            r_a: r[i],
                            x_a: x[j - 1],
                        },
                    )?
                    .factor
                {
                    bad += 1;
                }
            }
        }
        c.check(bad == 0, format!("{bad} monotonicity violations on 50x50"));
        Ok(())
    })
}

/// Check 9: UWB transmitter: symbolic vs nodal, IFFT vs time stepping, and the
/// spectral targets of the default design.
pub fn uwb_pipeline(cfg: &UwbConfig, mask: &MaskSpec, seed: u64) -> CriterionResult {
    timed(9, "UWB pulse pipeline", |c| {
        let mut rng = rng_for(seed, 9);
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let net = perturbed_network(&mut rng, 0.3);
            let t = antenna_transfer(&net)?;
            for _ in 0..20 {
                let f = 10f64.powf(rng.random_range(6.0..10.5));
                let a = t.differential.eval(f)?;
                let b = antenna_voltage_nodal(
                    &net,
                    f,
                    Complex64::new(1.0, 0.0),
                    Complex64::new(-1.0, 0.0),
                )?;
                worst = worst.max((a - b).norm() / b.norm());
            }
        }
        c.check(worst <= 1e-9, format!("rational vs nodal {worst:.1e}"));

        let settings = SynthSettings {
            duration: 60e-9,
            ..cfg.synth
        };
        let pulse = Stimulus {
            shape: StimulusShape::Pulse,
            ..cfg.stimulus
        };
        let mut worst = 0.0f64;
        let mut nets = vec![cfg.network];
        nets.extend((0..3).map(|_| perturbed_network(&mut rng, 0.3)));
        for net in &nets {
            for stim in [&cfg.stimulus, &pulse] {
                let a = synth_pulse(net, stim, &settings)?;
                let b = statespace_pulse(net, stim, &settings, 1e-12)?;
                worst = worst.max(rms_of_peak(&a, &b));
            }
        }
        c.check(
            worst <= 0.02,
            format!("IFFT vs state space {:.3}% RMS of peak", worst * 100.0),
        );

        let r = analyze(cfg)?;
        c.check(
            r.band_fraction >= 0.5
                && r.peak_frequency >= cfg.band_low
                && r.peak_frequency <= cfg.band_high,
            format!(
                "{:.0}% of power in band, PSD peak {:.1} dBm at {:.0} MHz",
                r.band_fraction * 100.0,
                r.peak_level_dbm,
                r.peak_frequency / 1e6
            ),
        );
        let drop = rolloff(&r.psd, 0.5e9, 1e9)?.drop_db;
        c.check(drop >= 25.0, format!("PSD drop 0.5 to 1 GHz {drop:.1} dB"));
        let net_drop = network_rolloff_db(&cfg.network, 0.5e9, 1e9)?;
        c.check(
            net_drop >= 25.0,
            format!("network |V_A| drop {net_drop:.1} dB"),
        );
        let verdict = mask_check(mask, &r.psd)?;
        c.check(
            verdict.pass,
            format!(
                "mask {} by {:.1} dB",
                if verdict.pass { "pass" } else { "fail" },
                verdict.worst_margin_db
            ),
        );
        let e = energy_per_pulse(0.28e-3, 3.3e6)?;
        c.check(
            (e / 84.85e-12 - 1.0).abs() <= 0.005,
            format!("{:.2} pJ/pulse", e * 1e12),
        );
        Ok(())
    })
}

/// Check 10: Two-ray link: free-space limit and the geometry trends of the
/// received spectrum.
pub fn link_study_trends(cfg: &UwbConfig, seed: u64) -> CriterionResult {
    timed(10, "Two-ray link study", |c| {
        let mut rng = rng_for(seed, 10);
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let d = 10f64.powf(rng.random_range(-1.5..2.0));
            let h = 10f64.powf(rng.random_range(-2.0..1.5));
            let f = 10f64.powf(rng.random_range(7.0..10.0));
            let g = LinkGeometry::new(d, h)?.with_gamma(0.0)?;
            worst = worst.max((two_ray_gain(&g, f)? / friis_gain(d, f)? - 1.0).abs());
        }
        c.check(
            worst <= 1e-12,
            format!("reflection-free vs Friis {worst:.1e}"),
        );
        let tx = analyze(cfg)?.psd;
        let study = LinkStudy {
            distances: vec![0.1, 1.0, 10.0],
            heights: vec![0.1, 10.0],
            gamma: -1.0,
        };
        let rx = link_study(&tx, &study)?;
        let peak = |d: f64, h: f64| {
            rx.iter()
                .find(|(g, _)| g.d == d && g.h == h)
                .map(|(_, s)| s.peak().1)
                .unwrap_or(f64::NAN)
        };
        for h in [0.1, 10.0] {
            let p = [peak(0.1, h), peak(1.0, h), peak(10.0, h)];
            c.check(
                p[0] > p[1] && p[1] > p[2],
                format!("h = {h} m: peaks {:.1}, {:.1}, {:.1} dBm", p[0], p[1], p[2]),
            );
        }
        for d in [1.0, 10.0] {
            let (lo, hi) = (peak(d, 0.1), peak(d, 10.0));
            c.check(
                hi > lo,
                format!("d = {d} m: h 0.1 m {lo:.1} < h 10 m {hi:.1} dBm"),
            );
        }
        Ok(())
    })
}

/// Check 11: Level-crossing encoder round trip and the burst energy ratio.
pub fn lcadc_round_trip(pdm: &PdmConfig, sample_rate: f64, seed: u64) -> CriterionResult {
    timed(11, "LC-ADC encode/decode", |c| {
        let mut rng = rng_for(seed, 11);
        let mut errors = 0;
        for _ in 0..1000 {
            let n = rng.random_range(1..16);
            let events = random_event_stream(&mut rng, pdm, n);
            let pulses = pdm_encode(&events, pdm)?;
            let bs = backscatter_envelope(&pulses, pdm, sample_rate, 0.0)?;
            let want: Vec<Direction> = events.iter().map(|e| e.direction).collect();
            errors += usize::from(demodulate(&bs, pdm) != want);
        }
        c.check(
            errors == 0,
            format!("{errors} decode errors in 1000 streams"),
        );
        let one = |direction| {
            pdm_encode(
                &[CrossingEvent {
                    time: 1e-9,
                    direction,
                    level: 0,
                }],
                pdm,
            )
        };
        let up = one(Direction::Up)?;
        let down = one(Direction::Down)?;
        c.check(
            up[0].width == 40e-9 && down[0].width == 80e-9,
            format!("widths {:e} s, {:e} s", up[0].width, down[0].width),
        );
        let e_up = backscatter_envelope(&up, pdm, sample_rate, 0.0)?.envelope_energy();
        let e_down = backscatter_envelope(&down, pdm, sample_rate, 0.0)?.envelope_energy();
        let ratio = e_down / e_up;
        c.check(
            (ratio - 2.0).abs() <= 1e-6,
            format!("energy ratio {ratio:.9}"),
        );
        Ok(())
    })
}

/// Criteria 1 to 11 on the given scenario. The mask falls back to the
/// shipped one when the scenario does not name a file.
pub fn run_all(cfg: &ScenarioConfig) -> Vec<CriterionResult> {
    let seed = cfg.seed;
    let mask = match &cfg.uwb.mask {
        Some(path) => MaskSpec::load(path),
        None => Ok(builtin_mask()),
    };
    let uwb = match mask {
        Ok(mask) => uwb_pipeline(&cfg.uwb, &mask, seed),
        Err(e) => CriterionResult {
            id: 9,
            name: "UWB pulse pipeline",
            passed: false,
            detail: format!("mask: {e}"),
            seconds: 0.0,
        },
    };
    vec![
        dcm_closed_form(seed),
        buckboost_independence(&cfg.dcdc),
        efficiency_reference(&cfg.dcdc),
        mppt_convergence(&cfg.mppt.controller, seed),
        estimator_laws(&cfg.mppt.controller.estimator, seed),
        rectifier_anchors(&cfg.rectifier.model, seed),
        interface_math(),
        noise_figure(&cfg.lna.params),
        uwb,
        link_study_trends(&cfg.uwb, seed),
        lcadc_round_trip(&cfg.lcadc.pdm, cfg.lcadc.sample_rate, seed),
    ]
}

/// Criterion 12 summary: everything above passed within the time budget.
pub fn suite_verdict(results: &[CriterionResult], elapsed: Duration) -> CriterionResult {
    let failed: Vec<String> = results
        .iter()
        .filter(|r| !r.passed)
        .map(|r| r.id.to_string())
        .collect();
    let mut c = Checks::new();
    c.check(
        failed.is_empty(),
        format!("failed criteria: [{}]", failed.join(", ")),
    );
    c.check(
        elapsed < SELFTEST_BUDGET,
        format!(
            "{:.1} s of {} s budget",
            elapsed.as_secs_f64(),
            SELFTEST_BUDGET.as_secs()
        ),
    );
    CriterionResult {
        id: 12,
        name: "Full suite within budget",
        passed: c.ok,
        detail: c.notes.join("; "),
        seconds: elapsed.as_secs_f64(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checks_fail_on_any_subcheck() {
        let r = timed(0, "t", |c| {
            c.check(true, "a");
            c.check(false, "b");
            Ok(())
        });
        assert!(!r.passed);
        assert!(r.detail.contains("FAILED b"));
        let r = timed(0, "t", |_| Err(crate::Error::domain("boom")));
        assert!(!r.passed && r.detail.contains("boom"));
    }

    #[test]
    fn fast_criteria_pass_on_defaults() {
        assert!(interface_math().passed);
        assert!(noise_figure(&LnaParams::default()).passed);
        assert!(estimator_laws(&EstimatorParams::default(), 3).passed);
    }

    #[test]
    fn verdict_counts_failures_and_time() {
        let ok = CriterionResult {
            id: 1,
            name: "x",
            passed: true,
            detail: String::new(),
            seconds: 0.0,
        };
        let bad = CriterionResult {
            passed: false,
            id: 2,
            ..ok.clone()
        };
        assert!(suite_verdict(std::slice::from_ref(&ok), Duration::from_secs(1)).passed);
        assert!(!suite_verdict(&[ok.clone(), bad], Duration::from_secs(1)).passed);
        assert!(!suite_verdict(&[ok], Duration::from_secs(301)).passed);
    }
}
