//! Level-crossing sampling, pulse-duration encoding of the crossing
//! direction, and the on-off-keyed backscatter burst that carries it.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantities::Waveform;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LevelCrossingConfig {
    /// Spacing between adjacent thresholds, V.
    pub lsb: f64,
    /// Voltage of threshold index 0, V.
    pub origin: f64,
    /// Extra drop below a level before a DOWN crossing registers, V.
    pub hysteresis: f64,
}

impl Default for LevelCrossingConfig {
    fn default() -> Self {
        LevelCrossingConfig {
            lsb: 0.1,
            origin: 0.0,
            hysteresis: 0.0,
        }
    }
}

impl LevelCrossingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lsb > 0.0 && self.lsb.is_finite()) {
            return Err(Error::config(
                "lsb",
                format!("must be > 0, got {}", self.lsb),
            ));
        }
        if !self.origin.is_finite() {
            return Err(Error::config("origin", "must be finite"));
        }
        if !(self.hysteresis >= 0.0 && self.hysteresis < self.lsb) {
            return Err(Error::config(
                "hysteresis",
                format!("must lie in [0, lsb), got {}", self.hysteresis),
            ));
        }
        Ok(())
    }

    pub fn level(&self, index: i64) -> f64 {
        self.origin + index as f64 * self.lsb
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Up => "UP",
            Direction::Down => "DOWN",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossingEvent {
    pub time: f64,
    pub direction: Direction,
    /// Index of the threshold that was crossed.
    pub level: i64,
}

/// Emits one event per threshold crossing, in time order. Crossing times
/// are interpolated linearly between samples, and a single sample step may
/// cross several thresholds.
pub fn lc_sample(input: &Waveform, cfg: &LevelCrossingConfig) -> Result<Vec<CrossingEvent>> {
    cfg.validate()?;
    if input.samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(
            "input waveform contains non-finite samples".into(),
        ));
    }
    let mut events = Vec::new();
    let Some(&first) = input.samples.first() else {
        return Ok(events);
    };
    // `m` is the highest threshold at or below the signal.
    let mut m = ((first - cfg.origin) / cfg.lsb).floor() as i64;
    let mut prev = first;
    for (i, &x) in input.samples.iter().enumerate().skip(1) {
        let t_prev = input.time(i - 1);
        let at = |v: f64| t_prev + input.dt * ((v - prev) / (x - prev)).clamp(0.0, 1.0);
        while x >= cfg.level(m + 1) {
            m += 1;
            events.push(CrossingEvent {
                time: at(cfg.level(m)),
                direction: Direction::Up,
                level: m,
            });
        }
        while x < cfg.level(m) - cfg.hysteresis {
            events.push(CrossingEvent {
                time: at(cfg.level(m) - cfg.hysteresis),
                direction: Direction::Down,
                level: m,
            });
            m -= 1;
        }
        prev = x;
    }
    Ok(events)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PdmConfig {
    /// Pulse width for an UP event, s.
    pub t_up: f64,
    /// Pulse width for a DOWN event, s.
    pub t_down: f64,
    /// Minimum idle time between consecutive pulses, s. The receiver has to
    /// see the carrier drop out to separate two bursts.
    pub min_gap: f64,
    pub carrier: f64,
    /// Backscatter tank inductance, H.
    pub l_s: f64,
    /// Backscatter tank capacitance, F.
    pub c_s: f64,
}

impl Default for PdmConfig {
    fn default() -> Self {
        PdmConfig {
            t_up: 40e-9,
            t_down: 80e-9,
            min_gap: 5e-9,
            carrier: 402e6,
            l_s: 32e-9,
            c_s: 4.9e-12,
        }
    }
}

impl PdmConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("t_up", self.t_up),
            ("t_down", self.t_down),
            ("carrier", self.carrier),
            ("l_s", self.l_s),
            ("c_s", self.c_s),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(name, format!("must be > 0, got {v}")));
            }
        }
        if !(self.min_gap >= 0.0) {
            return Err(Error::config("min_gap", "must be >= 0"));
        }
        if self.t_up == self.t_down {
            return Err(Error::config("t_down", "UP and DOWN widths must differ"));
        }
        Ok(())
    }

    pub fn width(&self, dir: Direction) -> f64 {
        match dir {
            Direction::Up => self.t_up,
            Direction::Down => self.t_down,
        }
    }

    /// Width separating the two symbols.
    pub fn decision_width(&self) -> f64 {
        0.5 * (self.t_up + self.t_down)
    }

    pub fn tank_resonance(&self) -> f64 {
        1.0 / (2.0 * PI * (self.l_s * self.c_s).sqrt())
    }

    pub fn decode(&self, width: f64) -> Direction {
        let long = if self.t_down > self.t_up {
            Direction::Down
        } else {
            Direction::Up
        };
        let short = if long == Direction::Down {
            Direction::Up
        } else {
            Direction::Down
        };
        if width >= self.decision_width() {
            long
        } else {
            short
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Pulse {
    pub start: f64,
    pub width: f64,
    pub direction: Direction,
}

impl Pulse {
    pub fn end(&self) -> f64 {
        self.start + self.width
    }
}

/// One pulse per event, starting at the event time. If a pulse would begin
/// before the previous kept pulse has ended plus the guard gap, it is
/// dropped and the whole stream is rejected with the dropped indices.
pub fn pdm_encode(events: &[CrossingEvent], cfg: &PdmConfig) -> Result<Vec<Pulse>> {
    cfg.validate()?;
    if let Some(i) = (1..events.len()).find(|&i| events[i].time < events[i - 1].time) {
        return Err(Error::domain(format!(
            "events out of time order at index {i}"
        )));
    }
    let mut pulses: Vec<Pulse> = Vec::with_capacity(events.len());
    let mut dropped = Vec::new();
    for (i, e) in events.iter().enumerate() {
        if let Some(last) = pulses.last() {
            if e.time < last.end() + cfg.min_gap {
                dropped.push(i);
                continue;
            }
        }
        pulses.push(Pulse {
            start: e.time,
            width: cfg.width(e.direction),
            direction: e.direction,
        });
    }
    if dropped.is_empty() {
        Ok(pulses)
    } else {
        Err(Error::Overflow { dropped })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Backscatter {
    /// Gate coverage of each sample interval, between 0 and 1.
    pub envelope: Waveform,
    /// Unit carrier gated by the pulses.
    pub rf: Waveform,
}

impl Backscatter {
    /// Integral of the squared gate. The gate only takes the values 0 and
    /// 1, so this equals the integral of the interval-averaged envelope.
    pub fn envelope_energy(&self) -> f64 {
        self.envelope.samples.iter().sum::<f64>() * self.envelope.dt
    }
}

/// Renders the pulse train as an on-off-keyed carrier over `[0, span)`,
/// extended if needed to hold the last pulse.
pub fn backscatter_envelope(
    pulses: &[Pulse],
    cfg: &PdmConfig,
    sample_rate: f64,
    span: f64,
) -> Result<Backscatter> {
    cfg.validate()?;
    if !(sample_rate >= 8.0 * cfg.carrier) {
        return Err(Error::domain(format!(
            "sample rate {sample_rate:e} Hz is below 8x the {:e} Hz carrier",
            cfg.carrier
        )));
    }
    let dt = 1.0 / sample_rate;
    let end = pulses.iter().map(Pulse::end).fold(span.max(0.0), f64::max);
    let n = ((end / dt).ceil() as usize).max(1);
    let mut env = vec![0.0; n];
    let mut rf = vec![0.0; n];
    for p in pulses {
        let (a, b) = (p.start.max(0.0), p.end());
        let first = (a / dt).floor() as usize;
        let last = ((b / dt).ceil() as usize).min(n);
        for i in first..last {
            let (lo, hi) = (i as f64 * dt, (i + 1) as f64 * dt);
            env[i] += (hi.min(b) - lo.max(a)).max(0.0) / dt;
            if lo >= a && lo < b {
                rf[i] = (2.0 * PI * cfg.carrier * lo).sin();
            }
        }
    }
    Ok(Backscatter {
        envelope: Waveform::new(dt, 0.0, env)?,
        rf: Waveform::new(dt, 0.0, rf)?,
    })
}

/// Recovers `(start, width)` bursts from the gated carrier. Samples above
/// a quarter of the peak count as carrier; dropouts shorter than one
/// carrier period are zero crossings inside a burst and are bridged.
pub fn detect_bursts(rf: &Waveform, carrier: f64) -> Vec<(f64, f64)> {
    let peak = rf.samples.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if peak == 0.0 {
        return Vec::new();
    }
    let thr = 0.25 * peak;
    let bridge = 1.0 / carrier;
    let mut bursts: Vec<(f64, f64)> = Vec::new();
    for (i, v) in rf.samples.iter().enumerate() {
        if v.abs() < thr {
            continue;
        }
        let t = rf.time(i);
        match bursts.last_mut() {
            Some((_, last)) if t - *last <= bridge => *last = t,
            _ => bursts.push((t, t)),
        }
    }
    // widths come out short by the sub-threshold part of the first and last
    // half cycles, well under the gap between the two symbol widths
    bursts
        .into_iter()
        .map(|(a, b)| (a, b - a + rf.dt))
        .collect()
}

/// Receiver side: detects bursts and maps their widths back to directions.
pub fn demodulate(bs: &Backscatter, cfg: &PdmConfig) -> Vec<Direction> {
    detect_bursts(&bs.rf, cfg.carrier)
        .into_iter()
        .map(|(_, w)| cfg.decode(w))
        .collect()
}

/// Rising zero crossings of the carrier inside `[t0, t1)`.
pub fn carrier_cycles(rf: &Waveform, t0: f64, t1: f64) -> usize {
    rf.samples
        .windows(2)
        .enumerate()
        .filter(|(i, w)| {
            let t = rf.time(*i + 1);
            t >= t0 && t < t1 && w[0] <= 0.0 && w[1] > 0.0
        })
        .count()
}

/// Sine test input for the encoder, `offset + amplitude sin(2 pi f t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TestSignal {
    pub amplitude: f64,
    pub offset: f64,
    pub frequency: f64,
    pub periods: f64,
    pub sample_rate: f64,
}

impl Default for TestSignal {
    fn default() -> Self {
        TestSignal {
            amplitude: 0.42,
            offset: 0.53,
            frequency: 100e3,
            periods: 2.0,
            sample_rate: 100e6,
        }
    }
}

impl TestSignal {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("frequency", self.frequency),
            ("periods", self.periods),
            ("sample_rate", self.sample_rate),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(name, format!("must be > 0, got {v}")));
            }
        }
        if !(self.amplitude.is_finite() && self.offset.is_finite()) {
            return Err(Error::config(
                "amplitude",
                "amplitude and offset must be finite",
            ));
        }
        Ok(())
    }

    pub fn waveform(&self) -> Result<Waveform> {
        self.validate()?;
        let dt = 1.0 / self.sample_rate;
        let n = (self.periods / self.frequency * self.sample_rate).round() as usize + 1;
        let w = 2.0 * PI * self.frequency;
        Waveform::new(
            dt,
            0.0,
            (0..n)
                .map(|i| self.offset + self.amplitude * (w * i as f64 * dt).sin())
                .collect(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LcAdcConfig {
    pub sampler: LevelCrossingConfig,
    pub pdm: PdmConfig,
    /// Sample rate of the rendered backscatter waveform.
    pub sample_rate: f64,
    pub input: TestSignal,
}

impl Default for LcAdcConfig {
    fn default() -> Self {
        LcAdcConfig {
            sampler: LevelCrossingConfig::default(),
            pdm: PdmConfig::default(),
            sample_rate: 8.04e9,
            input: TestSignal::default(),
        }
    }
}

impl LcAdcConfig {
    pub fn validate(&self) -> Result<()> {
        self.sampler.validate().map_err(|e| e.within("sampler"))?;
        self.pdm.validate().map_err(|e| e.within("pdm"))?;
        self.input.validate().map_err(|e| e.within("input"))?;
        if !(self.sample_rate >= 8.0 * self.pdm.carrier) {
            return Err(Error::config(
                "sample_rate",
                "must be at least 8x the carrier",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodeRun {
    pub events: Vec<CrossingEvent>,
    pub pulses: Vec<Pulse>,
    pub backscatter: Backscatter,
    pub decoded: Vec<Direction>,
}

/// Samples the configured test input, encodes it and decodes the burst
/// train again.
pub fn encode_test_signal(cfg: &LcAdcConfig) -> Result<EncodeRun> {
    cfg.validate()?;
    let input = cfg.input.waveform()?;
    let events = lc_sample(&input, &cfg.sampler)?;
    let pulses = pdm_encode(&events, &cfg.pdm)?;
    let backscatter = backscatter_envelope(&pulses, &cfg.pdm, cfg.sample_rate, input.duration())?;
    let decoded = demodulate(&backscatter, &cfg.pdm);
    Ok(EncodeRun {
        events,
        pulses,
        backscatter,
        decoded,
    })
}

/// Random stream of `n` events spaced so that no pulse overlaps: each gap
/// is the previous pulse width plus the guard plus up to 100 ns of slack.
pub fn random_event_stream<R: rand::Rng>(
    rng: &mut R,
    cfg: &PdmConfig,
    n: usize,
) -> Vec<CrossingEvent> {
    let mut t = rng.random_range(0.0..10e-9);
    (0..n)
        .map(|i| {
            let direction = if rng.random_bool(0.5) {
                Direction::Up
            } else {
                Direction::Down
            };
            let e = CrossingEvent {
                time: t,
                direction,
                level: i as i64,
            };
            t += cfg.width(direction) + cfg.min_gap + rng.random_range(0.0..100e-9);
            e
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sampled(f: impl Fn(f64) -> f64, dt: f64, n: usize) -> Waveform {
        Waveform::new(dt, 0.0, (0..n).map(|i| f(i as f64 * dt)).collect()).unwrap()
    }

    fn ev(time: f64, direction: Direction) -> CrossingEvent {
        CrossingEvent {
            time,
            direction,
            level: 0,
        }
    }

    #[test]
    fn ramp_through_three_levels() {
        let cfg = LevelCrossingConfig::default();
        let w = sampled(|t| 0.05 + t, 1e-3, 301);
        let e = lc_sample(&w, &cfg).unwrap();
        assert_eq!(e.len(), 3);
        assert!(e.iter().all(|e| e.direction == Direction::Up));
        for (k, e) in e.iter().enumerate() {
            assert_relative_eq!(e.time, 0.05 + 0.1 * k as f64, epsilon = 1e-12);
            assert_eq!(e.level, k as i64 + 1);
        }
    }

    #[test]
    fn constant_input_is_silent() {
        let w = sampled(|_| 0.1, 1e-3, 100);
        assert!(lc_sample(&w, &LevelCrossingConfig::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn jump_across_levels_emits_each() {
        let w = Waveform::new(1.0, 0.0, vec![0.0, 0.35, 0.05]).unwrap();
        let e = lc_sample(&w, &LevelCrossingConfig::default()).unwrap();
        let dirs: Vec<_> = e.iter().map(|e| e.direction).collect();
        assert_eq!(dirs, [[Direction::Up; 3], [Direction::Down; 3]].concat());
        assert!(e.windows(2).all(|p| p[0].time <= p[1].time));
    }

    #[test]
    fn hysteresis_suppresses_chatter() {
        let noisy = sampled(|t| 0.1 + 0.004 * (2.0 * PI * 1e3 * t).sin(), 1e-5, 1000);
        let loose = lc_sample(
            &noisy,
            &LevelCrossingConfig {
                origin: 0.0,
                ..Default::default()
            },
        )
        .unwrap();
        let tight = lc_sample(
            &noisy,
            &LevelCrossingConfig {
                hysteresis: 0.01,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(loose.len() > 10);
        assert!(tight.is_empty());
    }

    #[test]
    fn sine_matches_dense_oracle() {
        let cfg = LevelCrossingConfig {
            lsb: 0.07,
            origin: 0.013,
            hysteresis: 0.0,
        };
        let f = |t: f64| 0.5 * (2.0 * PI * t).sin() + 0.1 * (6.0 * PI * t + 0.3).sin();
        let e = lc_sample(&sampled(f, 1e-3, 1001), &cfg).unwrap();
        let ups = e.iter().filter(|e| e.direction == Direction::Up).count();
        assert_eq!(ups, e.len() - ups);
        // oracle: sign changes against every threshold on a 100x denser grid
        let dense: Vec<f64> = (0..=100_000).map(|i| f(i as f64 * 1e-5)).collect();
        let mut count = 0;
        for k in -20..20 {
            let l = cfg.level(k);
            count += dense
                .windows(2)
                .filter(|w| (w[0] >= l) != (w[1] >= l))
                .count();
        }
        assert_eq!(e.len(), count);
    }

    #[test]
    fn lsb_validation() {
        assert!(LevelCrossingConfig {
            lsb: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(LevelCrossingConfig {
            hysteresis: 0.1,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(PdmConfig {
            t_down: 40e-9,
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn pulse_widths() {
        let cfg = PdmConfig::default();
        let p = pdm_encode(&[ev(1e-9, Direction::Up)], &cfg).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].width, 40e-9);
        let p = pdm_encode(&[ev(1e-9, Direction::Down)], &cfg).unwrap();
        assert_eq!(p[0].width, 80e-9);
        assert_relative_eq!(cfg.tank_resonance(), 402e6, max_relative = 1e-3);
    }

    #[test]
    fn overlap_is_overflow() {
        let cfg = PdmConfig::default();
        let r = pdm_encode(
            &[
                ev(0.0, Direction::Down),
                ev(50e-9, Direction::Up),
                ev(90e-9, Direction::Up),
            ],
            &cfg,
        );
        assert_eq!(r, Err(Error::Overflow { dropped: vec![1] }));
        let r = pdm_encode(&[ev(1e-9, Direction::Up), ev(0.0, Direction::Up)], &cfg);
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn empty_burst_train() {
        let bs = backscatter_envelope(&[], &PdmConfig::default(), 8.04e9, 100e-9).unwrap();
        assert!(bs.rf.samples.iter().all(|&v| v == 0.0));
        assert_eq!(bs.envelope_energy(), 0.0);
        assert!(demodulate(&bs, &PdmConfig::default()).is_empty());
    }

    #[test]
    fn up_burst_has_sixteen_cycles() {
        let cfg = PdmConfig::default();
        let p = pdm_encode(&[ev(3.3e-9, Direction::Up)], &cfg).unwrap();
        let bs = backscatter_envelope(&p, &cfg, 10e9, 60e-9).unwrap();
        let n = carrier_cycles(&bs.rf, p[0].start, p[0].end());
        assert!((15..=17).contains(&n), "{n} cycles");
    }

    #[test]
    fn down_up_energy_ratio() {
        let cfg = PdmConfig::default();
        for start in [0.0, 1.37e-9, 7.77e-9] {
            let up = backscatter_envelope(
                &pdm_encode(&[ev(start, Direction::Up)], &cfg).unwrap(),
                &cfg,
                8.04e9,
                0.0,
            )
            .unwrap();
            let down = backscatter_envelope(
                &pdm_encode(&[ev(start, Direction::Down)], &cfg).unwrap(),
                &cfg,
                8.04e9,
                0.0,
            )
            .unwrap();
            assert_relative_eq!(
                down.envelope_energy() / up.envelope_energy(),
                2.0,
                max_relative = 1e-9
            );
        }
    }

    #[test]
    fn sample_rate_guard() {
        assert!(backscatter_envelope(&[], &PdmConfig::default(), 3e9, 1e-8).is_err());
    }

    #[test]
    fn swapped_polarity_round_trips() {
        let cfg = PdmConfig {
            t_up: 80e-9,
            t_down: 40e-9,
            ..Default::default()
        };
        let events = [
            ev(0.0, Direction::Up),
            ev(100e-9, Direction::Down),
            ev(200e-9, Direction::Up),
        ];
        let p = pdm_encode(&events, &cfg).unwrap();
        let bs = backscatter_envelope(&p, &cfg, 8.04e9, 0.0).unwrap();
        assert_eq!(
            demodulate(&bs, &cfg),
            vec![Direction::Up, Direction::Down, Direction::Up]
        );
    }

    #[test]
    fn random_streams_round_trip() {
        let cfg = PdmConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..200 {
            let n = rng.random_range(1..20);
            let events = random_event_stream(&mut rng, &cfg, n);
            let p = pdm_encode(&events, &cfg).unwrap();
            assert!(p.windows(2).all(|w| w[0].end() < w[1].start));
            let bs = backscatter_envelope(&p, &cfg, 8.04e9, 0.0).unwrap();
            let got = demodulate(&bs, &cfg);
            let want: Vec<_> = events.iter().map(|e| e.direction).collect();
            assert_eq!(got, want);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn events_alternate_per_level(seed in any::<u64>()) {
            // a slowly varying random walk: at each threshold, crossings
            // must alternate between UP and DOWN
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut x = 0.0;
            let samples: Vec<f64> = (0..500).map(|_| { x += rng.random_range(-0.05..0.05); x }).collect();
            let w = Waveform::new(1e-6, 0.0, samples).unwrap();
            let e = lc_sample(&w, &LevelCrossingConfig::default()).unwrap();
            let mut last = std::collections::HashMap::new();
            for ev in &e {
                if let Some(prev) = last.insert(ev.level, ev.direction) {
                    prop_assert_ne!(prev, ev.direction);
                }
            }
        }
    }
}
