use std::path::{Path, PathBuf};
use std::time::Instant;

use rfchain::acceptance::{run_all, suite_verdict};
use rfchain::config::ScenarioConfig;
use rfchain::dcdc::{best_efficiency, efficiency_table};
use rfchain::lcadc::encode_test_signal;
use rfchain::link::link_study;
use rfchain::lna::nf_sweep;
use rfchain::mppt::{closed_loop_run, HarvesterPlant};
use rfchain::output::{emit_csv, format_number, Table};
use rfchain::rectifier::harvest_sweep as sweep_rectifier;
use rfchain::uwb::{analyze, builtin_mask, mask_check, network_rolloff_db, rolloff, MaskSpec};
use rfchain::{watts_to_dbm, Error, PowerWatts, Result};

use crate::EXIT_ACCEPTANCE;

fn write(cfg: &ScenarioConfig, name: &str, table: &Table) -> Result<PathBuf> {
    let path = cfg.output.dir.join(name);
    emit_csv(table, &path)?;
    println!("wrote {} ({} rows)", path.display(), table.rows.len());
    Ok(path)
}

fn dbm(w: f64) -> Result<f64> {
    Ok(watts_to_dbm(PowerWatts::new(w)?).0)
}

pub fn harvest_sweep(cfg: &ScenarioConfig) -> Result<u8> {
    let r = &cfg.rectifier;
    let points = sweep_rectifier(&r.model, &r.power.values(), &r.loads)?;
    let mut t = Table::new([
        "p_in_w", "p_in_dbm", "r_l_ohm", "pce", "v_out_v", "in_range",
    ]);
    for p in &points {
        t.push(vec![
            p.p_in.into(),
            dbm(p.p_in)?.into(),
            p.r_l.into(),
            p.pce.into(),
            p.v_out.into(),
            p.in_range.into(),
        ])?;
    }
    write(cfg, "harvest_sweep.csv", &t)?;
    Ok(0)
}

pub fn dcdc_eff(cfg: &ScenarioConfig) -> Result<u8> {
    let mut t = Table::new([
        "p_in_w",
        "v_in_v",
        "v_out_v",
        "reference_efficiency",
        "model_efficiency",
        "mode",
        "f_s_hz",
        "t_on_s",
        "dcm",
    ]);
    let mut worst = 0.0f64;
    for p in efficiency_table() {
        let e = best_efficiency(&cfg.dcdc, p.p_in, p.v_in, p.v_out)?;
        worst = worst.max((e.efficiency * 100.0 - p.efficiency_pct).abs());
        t.push(vec![
            p.p_in.into(),
            p.v_in.into(),
            p.v_out.into(),
            ((p.efficiency_pct * 10.0).round() / 1000.0).into(),
            e.efficiency.into(),
            e.mode.label().into(),
            e.f_s.into(),
            e.t_on.into(),
            e.dcm_ok.into(),
        ])?;
    }
    write(cfg, "dcdc_efficiency.csv", &t)?;
    println!("worst model deviation: {worst:.2} efficiency points");
    Ok(0)
}

pub fn mppt_run(cfg: &ScenarioConfig) -> Result<u8> {
    let m = &cfg.mppt;
    let plant = HarvesterPlant {
        v_store: m.v_store,
        mode: m.mode,
        ..HarvesterPlant::new(
            cfg.rectifier.model.clone(),
            cfg.dcdc.clone(),
            m.p_available,
            m.t_on,
        )
    };
    let traj = closed_loop_run(
        &plant,
        &m.controller,
        m.initial_code,
        m.direction_up,
        m.epochs,
    )?;
    let mut t = Table::new([
        "epoch",
        "code",
        "f_s_hz",
        "r_in_ohm",
        "delivered_power_w",
        "metric_a",
        "controller_power_w",
        "stored_power_w",
        "direction",
        "clamped",
    ]);
    for r in &traj.records {
        t.push(vec![
            (r.epoch as i64).into(),
            r.code.into(),
            r.f_s.into(),
            r.r_in.into(),
            r.delivered_power.into(),
            r.metric.into(),
            r.controller_power.into(),
            r.stored_power
                .map_or_else(|| "".into(), |p| format_number(p).into()),
            (if r.direction_up { "up" } else { "down" }).into(),
            r.clamped.into(),
        ])?;
    }
    write(cfg, "mppt_trajectory.csv", &t)?;
    println!("final code {}", traj.final_state.code);
    Ok(0)
}

pub fn lna_sweep(cfg: &ScenarioConfig) -> Result<u8> {
    let l = &cfg.lna;
    let points = nf_sweep(&l.params, &l.sweep, &l.r_a.values(), &l.x_a.values())?;
    let mut t = Table::new([
        "r_a_ohm",
        "x_a_ohm",
        "l_deg_h",
        "noise_factor",
        "nf_db",
        "practical",
        "below_r_a_floor",
    ]);
    for p in &points {
        t.push(vec![
            p.r_a.into(),
            p.x_a.into(),
            p.l_deg.into(),
            p.factor.into(),
            p.nf_db.into(),
            p.practical.into(),
            p.below_r_a_floor.into(),
        ])?;
    }
    write(cfg, "lna_nf.csv", &t)?;
    Ok(0)
}

fn load_mask(flag: Option<&Path>, cfg: &ScenarioConfig) -> Result<MaskSpec> {
    match flag.or(cfg.uwb.mask.as_deref()) {
        Some(path) => MaskSpec::load(path).map_err(|e| Error::config("uwb.mask", e.to_string())),
        None => Ok(builtin_mask()),
    }
}

pub fn uwb_pulse(cfg: &ScenarioConfig, mask: Option<&Path>) -> Result<u8> {
    let mask = load_mask(mask, cfg)?;
    let u = &cfg.uwb;
    let report = analyze(u)?;
    let verdict = mask_check(&mask, &report.psd)?;
    let psd_drop = rolloff(&report.psd, 0.5e9, 1e9)?;
    let net_drop = network_rolloff_db(&u.network, 0.5e9, 1e9)?;

    let mut w = Table::new(["time_s", "v_antenna_v"]);
    for (i, &v) in report.waveform.samples.iter().enumerate() {
        w.push(vec![report.waveform.time(i).into(), v.into()])?;
    }
    let mut s = Table::new(["frequency_hz", "psd_dbm_per_mhz", "mask_dbm_per_mhz"]);
    for (f, &p) in report.psd.frequencies().zip(&report.psd.bins) {
        if f > u.synth.max_frequency {
            break;
        }
        let limit = mask.limit_at(f).map_or_else(String::new, format_number);
        s.push(vec![f.into(), p.into(), limit.into()])?;
    }
    let mut m = Table::new(["metric", "value"]);
    let rows: [(&str, String); 10] = [
        ("peak_to_peak_v", format_number(report.peak_to_peak)),
        ("band_energy_fraction", format_number(report.band_fraction)),
        (
            "psd_peak_frequency_hz",
            format_number(report.peak_frequency),
        ),
        ("psd_peak_dbm_per_mhz", format_number(report.peak_level_dbm)),
        ("average_power_w", format_number(report.average_power)),
        ("energy_per_pulse_j", format_number(report.energy_per_pulse)),
        ("psd_rolloff_db", format_number(psd_drop.drop_db)),
        ("network_rolloff_db", format_number(net_drop)),
        (
            "mask_worst_margin_db",
            format_number(verdict.worst_margin_db),
        ),
        (
            "mask_verdict",
            if verdict.pass { "pass" } else { "fail" }.to_string(),
        ),
    ];
    for (k, v) in rows {
        m.push(vec![k.into(), v.into()])?;
    }
    write(cfg, "uwb_waveform.csv", &w)?;
    write(cfg, "uwb_psd.csv", &s)?;
    write(cfg, "uwb_summary.csv", &m)?;
    println!(
        "peak-to-peak {:.4} V, {:.0}% of power in {:.2}-{:.2} GHz",
        report.peak_to_peak,
        report.band_fraction * 100.0,
        u.band_low / 1e9,
        u.band_high / 1e9
    );
    println!(
        "roll-off 0.5 to 1 GHz: PSD {:.1} dB, network {:.1} dB",
        psd_drop.drop_db, net_drop
    );
    println!(
        "mask {}: {} (worst margin {:.1} dB at {:.0} MHz)",
        mask.name,
        if verdict.pass { "pass" } else { "fail" },
        verdict.worst_margin_db,
        verdict.worst_frequency / 1e6
    );
    Ok(0)
}

pub fn link_psd(cfg: &ScenarioConfig) -> Result<u8> {
    let tx = analyze(&cfg.uwb)?.psd;
    let results = link_study(&tx, &cfg.link)?;
    let mut summary = Table::new(["d_m", "h_m", "peak_frequency_hz", "peak_psd_dbm_per_mhz"]);
    let mut tables = Vec::new();
    for (g, rx) in &results {
        let mut t = Table::new(["frequency_hz", "psd_dbm_per_mhz"]);
        for (f, &p) in rx.frequencies().zip(&rx.bins) {
            if f > cfg.uwb.synth.max_frequency {
                break;
            }
            t.push(vec![f.into(), p.into()])?;
        }
        let (pf, pl) = rx.peak();
        summary.push(vec![g.d.into(), g.h.into(), pf.into(), pl.into()])?;
        tables.push((
            format!(
                "link_psd_d{}_h{}.csv",
                format_number(g.d),
                format_number(g.h)
            ),
            t,
        ));
    }
    for (name, t) in &tables {
        write(cfg, name, t)?;
    }
    write(cfg, "link_summary.csv", &summary)?;
    Ok(0)
}

pub fn lcadc_encode(cfg: &ScenarioConfig) -> Result<u8> {
    let run = encode_test_signal(&cfg.lcadc)?;
    let mut ev = Table::new(["time_s", "direction", "level"]);
    for e in &run.events {
        ev.push(vec![
            e.time.into(),
            e.direction.to_string().into(),
            e.level.into(),
        ])?;
    }
    let mut pu = Table::new(["start_s", "width_s", "direction"]);
    for p in &run.pulses {
        pu.push(vec![
            p.start.into(),
            p.width.into(),
            p.direction.to_string().into(),
        ])?;
    }
    let bs = &run.backscatter;
    let mut wf = Table::new(["time_s", "envelope", "rf"]);
    for (i, (&e, &r)) in bs.envelope.samples.iter().zip(&bs.rf.samples).enumerate() {
        wf.push(vec![bs.envelope.time(i).into(), e.into(), r.into()])?;
    }
    write(cfg, "lcadc_events.csv", &ev)?;
    write(cfg, "lcadc_pulses.csv", &pu)?;
    write(cfg, "lcadc_backscatter.csv", &wf)?;
    let sent: Vec<_> = run.events.iter().map(|e| e.direction).collect();
    println!(
        "{} events, decoded {} ({})",
        run.events.len(),
        run.decoded.len(),
        if run.decoded == sent {
            "match"
        } else {
            "MISMATCH"
        }
    );
    Ok(0)
}

pub fn selftest(cfg: &ScenarioConfig) -> Result<u8> {
    let start = Instant::now();
    let mut results = run_all(cfg);
    results.push(suite_verdict(&results, start.elapsed()));
    for r in &results {
        println!("{}", r.line());
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!(
        "{} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    Ok(if failed == 0 { 0 } else { EXIT_ACCEPTANCE })
}
