//! Net-zero CPhase control schedules.
//!
//! The pulsed qubit sits at its upper sweet spot, so a bipolar control
//! waveform `u(t)` (GHz) lowers its frequency by `|u(t)|` regardless of
//! sign; see [`Response`]. The coupler receives unipolar dips.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{BareLabel, Element, SystemParams, PAIRS};

/// Default sampling interval (ns).
pub const DEFAULT_DT: f64 = 0.02;
/// Default slew bound on any frequency trajectory (GHz/ns).
pub const DEFAULT_SLEW_LIMIT: f64 = 10.0;

/// Unit flat-top envelope with Gaussian edges, sampled at `t_k = k dt`.
///
/// Each edge is a half Gaussian of width `sigma` truncated at `2 sigma` and
/// lifted so that the envelope is exactly zero at both ends. If the pulse is
/// shorter than `4 sigma` the edges overlap and the shape is rescaled to a
/// unit peak.
pub fn flattop_envelope(t_p: f64, sigma: f64, dt: f64) -> Vec<f64> {
    let n = steps(t_p, dt);
    if n == 0 {
        return vec![0.0];
    }
    if t_p < 4.0 * sigma {
        log::warn!("pulse of {t_p} ns is shorter than 4 sigma = {} ns", 4.0 * sigma);
    }
    let dt = t_p / n as f64;
    let w = 2.0 * sigma;
    let floor = (-2.0f64).exp();
    let edge = |x: f64| -> f64 {
        // x is the distance from the nearest end.
        if x >= w {
            1.0
        } else {
            let g = (-(x - w).powi(2) / (2.0 * sigma * sigma)).exp();
            ((g - floor) / (1.0 - floor)).max(0.0)
        }
    };
    let mut env: Vec<f64> = (0..=n)
        .map(|k| {
            let t = k as f64 * dt;
            edge(t.min(t_p - t))
        })
        .collect();
    env[0] = 0.0;
    env[n] = 0.0;
    let peak = env.iter().cloned().fold(0.0, f64::max);
    if peak > 0.0 && peak < 1.0 {
        env.iter_mut().for_each(|e| *e /= peak);
    }
    env
}

/// Flat-top pulse of the given amplitude.
pub fn flattop_pulse(amplitude: f64, t_p: f64, sigma: f64, dt: f64) -> Vec<f64> {
    flattop_envelope(t_p, sigma, dt).into_iter().map(|e| amplitude * e).collect()
}

fn steps(duration: f64, dt: f64) -> usize {
    (duration / dt).round() as usize
}

/// Check that `duration` is an integer multiple of `dt`.
fn check_divides(name: &str, duration: f64, dt: f64) -> Result<usize> {
    let n = duration / dt;
    if duration < 0.0 || (n - n.round()).abs() > 1e-6 {
        return Err(Error::invalid(name, format!("{duration} ns is not a multiple of sample_dt = {dt} ns")));
    }
    Ok(n.round() as usize)
}

/// Symmetric-SQUID tuning curve `w(phi) = (w_max + |eta|) sqrt|cos(pi phi)| - |eta|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxMap {
    pub omega_max: f64,
    pub eta: f64,
}

impl FluxMap {
    pub fn frequency(&self, phi: f64) -> f64 {
        let e = self.eta.abs();
        (self.omega_max + e) * (std::f64::consts::PI * phi).cos().abs().sqrt() - e
    }

    /// Non-negative flux giving frequency `omega` (clamped to the tunable range).
    pub fn flux_for(&self, omega: f64) -> f64 {
        let e = self.eta.abs();
        let r = ((omega + e) / (self.omega_max + e)).clamp(0.0, 1.0);
        (r * r).acos() / std::f64::consts::PI
    }
}

/// How the control waveform maps onto the pulsed qubit's frequency.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Response {
    /// `w(t) = w_idle - |u(t)|` with `u` in GHz.
    #[default]
    SweetSpot,
    /// `u(t)` is flux in flux quanta; `w(t) = map(u(t))` with the idle point at zero flux.
    Flux { eta: f64 },
}

/// Parameters of the three-step bipolar CPhase protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateProtocolParams {
    /// Strong pulse duration (ns).
    pub t_p: f64,
    /// Delay after each pulse (ns).
    pub t_d: f64,
    /// Strong-pulse frequency excursion (GHz).
    pub v: f64,
    /// Weak bipolar pulse amplitude (GHz).
    pub a_int: f64,
    /// Gaussian edge width (ns); defaults to `0.075 t_p`.
    #[serde(default)]
    pub sigma: Option<f64>,
    /// Edge width of the coupler dip (ns); defaults to `2 sigma`.
    #[serde(default)]
    pub coupler_sigma: Option<f64>,
    /// Coupler frequency at the bottom of its dip (GHz).
    pub coupler_on_freq: f64,
    /// Time by which the coupler dip starts after, and ends before, each strong pulse (ns).
    #[serde(default)]
    pub coupler_inset: f64,
    #[serde(default = "default_dt")]
    pub sample_dt: f64,
    /// Weak pulse duration (ns); defaults to `t_p`.
    #[serde(default)]
    pub t_weak: Option<f64>,
    /// Individual delays after the three pulses; default all `t_d`.
    #[serde(default)]
    pub delays: Option<[f64; 3]>,
    /// Qubit carrying the control pulses; defaults to the lower-frequency one.
    #[serde(default)]
    pub pulsed: Option<Element>,
    #[serde(default)]
    pub response: Response,
    /// Rescale couplings with the instantaneous frequencies.
    #[serde(default = "default_true")]
    pub modulate_couplings: bool,
    #[serde(default = "default_slew")]
    pub slew_limit: f64,
}

fn default_dt() -> f64 {
    DEFAULT_DT
}
fn default_true() -> bool {
    true
}
fn default_slew() -> f64 {
    DEFAULT_SLEW_LIMIT
}

impl GateProtocolParams {
    /// 20 ns pulses and delays; amplitudes still to be calibrated.
    pub fn standard() -> Self {
        GateProtocolParams {
            t_p: 20.0,
            t_d: 20.0,
            v: 0.0,
            a_int: 0.0,
            sigma: None,
            coupler_sigma: None,
            coupler_on_freq: 7.0,
            coupler_inset: 0.0,
            sample_dt: DEFAULT_DT,
            t_weak: None,
            delays: None,
            pulsed: None,
            response: Response::SweetSpot,
            modulate_couplings: true,
            slew_limit: DEFAULT_SLEW_LIMIT,
        }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma.unwrap_or(0.075 * self.t_p)
    }

    pub fn coupler_sigma(&self) -> f64 {
        self.coupler_sigma.unwrap_or_else(|| 2.0 * self.sigma())
    }

    pub fn t_weak(&self) -> f64 {
        self.t_weak.unwrap_or(self.t_p)
    }

    pub fn delays(&self) -> [f64; 3] {
        self.delays.unwrap_or([self.t_d; 3])
    }

    pub fn pulsed(&self, sys: &SystemParams) -> Element {
        self.pulsed.unwrap_or_else(|| sys.lower_qubit())
    }

    pub fn total_duration(&self) -> f64 {
        2.0 * self.t_p + self.t_weak() + self.delays().iter().sum::<f64>()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_p > 0.0) {
            return Err(Error::invalid("t_p", "must be positive"));
        }
        if !(self.sigma() > 0.0) {
            return Err(Error::invalid("sigma", "must be positive"));
        }
        if !(self.coupler_sigma() > 0.0) {
            return Err(Error::invalid("coupler_sigma", "must be positive"));
        }
        if !(self.sample_dt > 0.0) {
            return Err(Error::invalid("sample_dt", "must be positive"));
        }
        if !(self.coupler_on_freq > 0.0) {
            return Err(Error::invalid("coupler_on_freq", "must be positive"));
        }
        if !self.v.is_finite() || !self.a_int.is_finite() {
            return Err(Error::invalid("v", "amplitudes must be finite"));
        }
        check_divides("t_p", self.t_p, self.sample_dt)?;
        check_divides("coupler_inset", self.coupler_inset, self.sample_dt)?;
        if 2.0 * self.coupler_inset >= self.t_p {
            return Err(Error::invalid("coupler_inset", "the coupler dip must fit inside the strong pulse"));
        }
        let tw = self.t_weak();
        check_divides("t_weak", tw, self.sample_dt)?;
        check_divides("t_weak/2", tw / 2.0, self.sample_dt)?;
        for d in self.delays() {
            check_divides("t_d", d, self.sample_dt)?;
        }
        Ok(())
    }

    /// Level that |101> exchanges with: the doubly excited non-pulsed qubit.
    pub fn exchange_partner(&self, sys: &SystemParams) -> BareLabel {
        match self.pulsed(sys) {
            Element::Q1 => BareLabel::new(0, 0, 2),
            _ => BareLabel::new(2, 0, 0),
        }
    }
}

/// A contiguous piece of a schedule, in sample-interval indices `[start, end)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Segment {
    pub name: String,
    pub start: usize,
    pub end: usize,
}

/// Sampled trajectories on the uniform grid `t_k = k dt`, `k = 0..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub dt: f64,
    /// Frequencies of q1, coupler, q2 (GHz).
    pub omega: [Vec<f64>; 3],
    /// Couplings g_1c, g_2c, g_12 (GHz).
    pub coupling: [Vec<f64>; 3],
    /// Control waveform applied to `pulsed` (GHz, or flux quanta for [`Response::Flux`]).
    pub control: Vec<f64>,
    pub pulsed: Element,
    /// Idle frequencies the schedule starts and ends at.
    pub idle: [f64; 3],
    pub segments: Vec<Segment>,
    /// Sample indices where trajectories may have kinks (always includes both ends).
    /// Interpolation never reaches across a break.
    pub breaks: Vec<usize>,
    pub net_zero: bool,
}

impl Schedule {
    /// All elements parked at the parameters' frequencies for `duration`.
    pub fn constant(sys: &SystemParams, duration: f64, dt: f64) -> Self {
        let n = steps(duration, dt).max(1);
        let dt = duration / n as f64;
        let omega = sys.frequencies().map(|w| vec![w; n + 1]);
        let coupling = sys.couplings().map(|g| vec![g; n + 1]);
        Schedule {
            dt,
            omega,
            coupling,
            control: vec![0.0; n + 1],
            pulsed: sys.lower_qubit(),
            idle: sys.frequencies(),
            segments: vec![Segment { name: "idle".into(), start: 0, end: n }],
            breaks: vec![0, n],
            net_zero: true,
        }
    }

    /// Number of sample intervals.
    pub fn intervals(&self) -> usize {
        self.control.len() - 1
    }

    pub fn duration(&self) -> f64 {
        self.intervals() as f64 * self.dt
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn segment(&self, name: &str) -> Option<&Segment> {
        self.segments.iter().find(|s| s.name == name)
    }

    /// Frequencies and couplings at sample `k`.
    pub fn sample(&self, k: usize) -> ([f64; 3], [f64; 3]) {
        (
            [self.omega[0][k], self.omega[1][k], self.omega[2][k]],
            [self.coupling[0][k], self.coupling[1][k], self.coupling[2][k]],
        )
    }

    /// Sub-schedule covering intervals `[start, end)`.
    pub fn window(&self, start: usize, end: usize) -> Schedule {
        assert!(start < end && end <= self.intervals(), "window out of range");
        let cut = |v: &Vec<f64>| v[start..=end].to_vec();
        Schedule {
            dt: self.dt,
            omega: [cut(&self.omega[0]), cut(&self.omega[1]), cut(&self.omega[2])],
            coupling: [cut(&self.coupling[0]), cut(&self.coupling[1]), cut(&self.coupling[2])],
            control: cut(&self.control),
            pulsed: self.pulsed,
            idle: self.idle,
            segments: self
                .segments
                .iter()
                .filter(|s| s.end > start && s.start < end)
                .map(|s| Segment { name: s.name.clone(), start: s.start.max(start) - start, end: s.end.min(end) - start })
                .collect(),
            breaks: std::iter::once(0)
                .chain(self.breaks.iter().filter(|&&b| b > start && b < end).map(|&b| b - start))
                .chain(std::iter::once(end - start))
                .collect(),
            net_zero: false,
        }
    }

    /// Trapezoidal integral of the control waveform (GHz ns).
    pub fn control_integral(&self) -> f64 {
        let n = self.intervals();
        let inner: f64 = self.control[1..n].iter().sum();
        self.dt * (inner + 0.5 * (self.control[0] + self.control[n]))
    }

    /// Fails with [`Error::NetZeroViolation`] if a net-zero schedule's control integral exceeds 1e-9.
    pub fn check_net_zero(&self) -> Result<()> {
        let integral = self.control_integral();
        if self.net_zero && integral.abs() > 1e-9 {
            return Err(Error::NetZeroViolation { integral });
        }
        Ok(())
    }

    /// Largest sample-to-sample rate of change over all frequency trajectories.
    pub fn max_slew(&self) -> (f64, f64) {
        let mut worst = (0.0, 0.0);
        for w in &self.omega {
            for k in 0..w.len() - 1 {
                let s = (w[k + 1] - w[k]).abs() / self.dt;
                if s > worst.0 {
                    worst = (s, self.time(k));
                }
            }
        }
        worst
    }

    pub fn check_slew(&self, limit: f64) -> Result<()> {
        let (slew, t) = self.max_slew();
        if slew > limit {
            return Err(Error::SlewViolation { t, slew, limit });
        }
        Ok(())
    }

    /// Copy with a constant added to every frequency trajectory.
    pub fn offset_frequencies(&self, delta: f64) -> Schedule {
        let mut s = self.clone();
        for w in s.omega.iter_mut() {
            w.iter_mut().for_each(|x| *x += delta);
        }
        s.idle = s.idle.map(|x| x + delta);
        s
    }

    /// CSV with columns t_ns, omega_q1, omega_c, omega_q2, g_1c, g_2c, g_12.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(SCHEDULE_COLUMNS)?;
        for k in 0..=self.intervals() {
            let (om, g) = self.sample(k);
            w.write_record([self.time(k), om[0], om[1], om[2], g[0], g[1], g[2]].map(|x| format!("{x:.12e}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

pub const SCHEDULE_COLUMNS: [&str; 7] = ["t_ns", "omega_q1", "omega_c", "omega_q2", "g_1c", "g_2c", "g_12"];

/// Coupler dip profile (0 idle, 1 fully on) over one strong pulse.
pub fn coupler_dip_envelope(gp: &GateProtocolParams) -> Vec<f64> {
    let dt = gp.sample_dt;
    let inset = steps(gp.coupler_inset, dt);
    if inset == 0 {
        return flattop_envelope(gp.t_p, gp.coupler_sigma(), dt);
    }
    let inner_t = gp.t_p - 2.0 * gp.coupler_inset;
    let inner = flattop_envelope(inner_t, gp.coupler_sigma().min(inner_t / 4.0), dt);
    let mut d = vec![0.0; inset];
    d.extend_from_slice(&inner);
    d.extend(std::iter::repeat_n(0.0, inset));
    d
}

/// Builds the strong(+) / delay / weak(+-) / delay / strong(-) / delay schedule.
///
/// Couplings are left at their static values; see [`modulate_couplings`].
pub fn make_cphase_schedule(sys: &SystemParams, gp: &GateProtocolParams) -> Result<Schedule> {
    sys.validate()?;
    gp.validate()?;
    let dt = gp.sample_dt;
    let sigma = gp.sigma();
    let pulsed = gp.pulsed(sys);
    if pulsed == Element::Coupler {
        return Err(Error::invalid("pulsed", "the control pulse must target a qubit"));
    }
    let [d1, d2, d3] = gp.delays();
    let tw = gp.t_weak();

    let env = flattop_envelope(gp.t_p, sigma, dt);
    let inset = steps(gp.coupler_inset, dt);
    let dip_env = coupler_dip_envelope(gp);
    let lobe = if tw > 0.0 { flattop_envelope(tw / 2.0, sigma, dt) } else { vec![0.0] };

    // Control waveform and coupler dip profile, built segment by segment.
    let mut control: Vec<f64> = vec![0.0];
    let mut dip: Vec<f64> = vec![0.0];
    let mut segments = Vec::new();
    let mut push = |name: &str, ctrl: &[f64], cdip: &[f64], control: &mut Vec<f64>, dip: &mut Vec<f64>| {
        let start = control.len() - 1;
        control.extend_from_slice(&ctrl[1..]);
        dip.extend_from_slice(&cdip[1..]);
        let end = control.len() - 1;
        if end > start {
            segments.push(Segment { name: name.to_string(), start, end });
        }
    };
    let zeros = |n: usize| vec![0.0; n + 1];

    let plus: Vec<f64> = env.iter().map(|e| gp.v * e).collect();
    let minus: Vec<f64> = plus.iter().map(|x| -x).collect();
    push("strong_plus", &plus, &dip_env, &mut control, &mut dip);
    push("delay_1", &zeros(steps(d1, dt)), &zeros(steps(d1, dt)), &mut control, &mut dip);
    if tw > 0.0 {
        let m = lobe.len() - 1;
        let mut weak = Vec::with_capacity(2 * m + 1);
        weak.extend(lobe.iter().map(|e| gp.a_int * e));
        weak.extend(lobe[1..].iter().map(|e| -gp.a_int * e));
        push("weak", &weak, &zeros(2 * m), &mut control, &mut dip);
    }
    push("delay_2", &zeros(steps(d2, dt)), &zeros(steps(d2, dt)), &mut control, &mut dip);
    push("strong_minus", &minus, &dip_env, &mut control, &mut dip);
    push("delay_3", &zeros(steps(d3, dt)), &zeros(steps(d3, dt)), &mut control, &mut dip);

    let idle = sys.frequencies();
    let w_idle = sys.frequency(pulsed);
    let (control, qubit): (Vec<f64>, Vec<f64>) = match gp.response {
        Response::SweetSpot => {
            let q = control.iter().map(|u| w_idle - u.abs()).collect();
            (control, q)
        }
        Response::Flux { eta } => {
            let map = FluxMap { omega_max: w_idle, eta };
            // Convert each lobe's peak excursion to a flux amplitude, keeping the envelope linear in flux.
            let scale = |a: f64| if a == 0.0 { 0.0 } else { map.flux_for(w_idle - a.abs()) / a.abs() };
            let (sv, sa) = (scale(gp.v), scale(gp.a_int));
            let weak_seg = segments.iter().find(|s| s.name == "weak").map(|s| (s.start, s.end));
            let flux: Vec<f64> = control
                .iter()
                .enumerate()
                .map(|(k, u)| match weak_seg {
                    Some((a, b)) if k > a && k < b => u * sa,
                    _ => u * sv,
                })
                .collect();
            let q = flux.iter().map(|&phi| map.frequency(phi)).collect();
            (flux, q)
        }
    };
    let coupler: Vec<f64> = dip.iter().map(|e| sys.omega_c - (sys.omega_c - gp.coupler_on_freq) * e).collect();
    let n = control.len();
    let mut breaks: Vec<usize> = segments.iter().flat_map(|s| [s.start, s.end]).collect();
    if let Some(w) = segments.iter().find(|s| s.name == "weak") {
        breaks.push((w.start + w.end) / 2);
    }
    if inset > 0 {
        for s in segments.iter().filter(|s| s.name.starts_with("strong")) {
            breaks.extend([s.start + inset, s.end - inset]);
        }
    }
    breaks.sort_unstable();
    breaks.dedup();
    let mut omega = [vec![idle[0]; n], coupler, vec![idle[2]; n]];
    omega[pulsed.slot()] = qubit;
    let schedule = Schedule {
        dt,
        omega,
        coupling: sys.couplings().map(|g| vec![g; n]),
        control,
        pulsed,
        idle,
        segments,
        breaks,
        net_zero: true,
    };
    schedule.check_slew(gp.slew_limit)?;
    schedule.check_net_zero()?;
    Ok(schedule)
}

/// Rescales every coupling with `sqrt(w_i(t) w_j(t) / (w_i,ref w_j,ref))`,
/// taking the parameters' own frequencies as the reference.
pub fn modulate_couplings(sys: &SystemParams, schedule: &Schedule) -> Schedule {
    let mut s = schedule.clone();
    let reference = sys.frequencies();
    let g_ref = sys.couplings();
    for (p, (a, b)) in PAIRS.iter().enumerate() {
        let (i, j) = (a.slot(), b.slot());
        let norm = reference[i] * reference[j];
        for k in 0..s.control.len() {
            s.coupling[p][k] = g_ref[p] * (s.omega[i][k] * s.omega[j][k] / norm).sqrt();
        }
    }
    s
}

/// Static parameters at frequencies `freqs` with couplings rescaled by the
/// same square-root law as [`modulate_couplings`].
pub fn modulated_params(sys: &SystemParams, freqs: [f64; 3]) -> SystemParams {
    let reference = sys.frequencies();
    let g = sys.couplings();
    let scale = |p: usize| {
        let (a, b) = PAIRS[p];
        let (i, j) = (a.slot(), b.slot());
        g[p] * (freqs[i] * freqs[j] / (reference[i] * reference[j])).sqrt()
    };
    SystemParams {
        omega_q1: freqs[0],
        omega_c: freqs[1],
        omega_q2: freqs[2],
        g_1c: scale(0),
        g_2c: scale(1),
        g_12: scale(2),
        ..*sys
    }
}

/// Schedule ready for simulation: built, then coupling-modulated if requested.
pub fn gate_schedule(sys: &SystemParams, gp: &GateProtocolParams) -> Result<Schedule> {
    let s = make_cphase_schedule(sys, gp)?;
    Ok(if gp.modulate_couplings { modulate_couplings(sys, &s) } else { s })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn gp() -> GateProtocolParams {
        GateProtocolParams { v: 0.2, a_int: 0.03, coupler_on_freq: 7.0, ..GateProtocolParams::standard() }
    }

    #[test]
    fn zero_amplitude_pulse() {
        assert!(flattop_pulse(0.0, 20.0, 2.5, 0.005).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn envelope_endpoints_and_peak() {
        for (tp, sigma) in [(20.0, 2.5), (10.0, 2.5), (7.0, 2.5), (40.0, 1.0)] {
            let p = flattop_pulse(0.3, tp, sigma, 0.005);
            let max = p.iter().cloned().fold(f64::MIN, f64::max);
            assert_relative_eq!(max, 0.3, max_relative = 1e-6);
            assert!(p[0].abs() < 1e-6 * 0.3 && p[p.len() - 1].abs() < 1e-6 * 0.3);
        }
    }

    #[test]
    fn schedule_structure() {
        let sys = SystemParams::device_2q();
        let s = make_cphase_schedule(&sys, &gp()).unwrap();
        assert_relative_eq!(s.duration(), 120.0, epsilon = 1e-9);
        assert!(s.control_integral().abs() < 1e-9);
        let names: Vec<_> = s.segments.iter().map(|x| x.name.as_str()).collect();
        assert_eq!(names, ["strong_plus", "delay_1", "weak", "delay_2", "strong_minus", "delay_3"]);
        let a = s.segment("strong_plus").unwrap();
        let b = s.segment("strong_minus").unwrap();
        assert_eq!(a.end - a.start, b.end - b.start);
        for k in 0..=(a.end - a.start) {
            assert_eq!(s.control[a.start + k], -s.control[b.start + k]);
        }
        // Coupler only ever dips below its idle point.
        assert!(s.omega[1].iter().all(|&w| w <= sys.omega_c && w >= 7.0 - 1e-12));
        // The pulsed qubit never goes above idle.
        assert!(s.omega[0].iter().all(|&w| w <= sys.omega_q1));
        assert!(s.omega[2].iter().all(|&w| w == sys.omega_q2));
    }

    #[test]
    fn idle_schedule() {
        let sys = SystemParams::device_2q();
        let g = GateProtocolParams { v: 0.0, a_int: 0.0, coupler_on_freq: sys.omega_c, ..gp() };
        let s = make_cphase_schedule(&sys, &g).unwrap();
        for e in 0..3 {
            assert!(s.omega[e].iter().all(|&w| w == sys.frequencies()[e]));
        }
    }

    #[test]
    fn bad_grid_rejected() {
        let sys = SystemParams::device_2q();
        let g = GateProtocolParams { t_p: 20.0025, ..gp() };
        assert!(matches!(make_cphase_schedule(&sys, &g), Err(Error::InvalidParameter { .. })));
    }

    #[test]
    fn slew_violation() {
        let sys = SystemParams::device_2q();
        let g = GateProtocolParams { slew_limit: 0.5, coupler_on_freq: 5.0, ..gp() };
        assert!(matches!(make_cphase_schedule(&sys, &g), Err(Error::SlewViolation { .. })));
    }

    #[test]
    fn coupling_modulation_square_root_law() {
        let sys = SystemParams::device_2q();
        let s = Schedule::constant(&sys, 1.0, 0.1);
        let m = modulate_couplings(&sys, &s);
        assert_eq!(m.coupling, s.coupling);
        let mut half = s.clone();
        half.omega[0].iter_mut().for_each(|w| *w *= 0.5);
        let m = modulate_couplings(&sys, &half);
        assert_relative_eq!(m.coupling[0][3], sys.g_1c / 2f64.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(m.coupling[2][3], sys.g_12 / 2f64.sqrt(), max_relative = 1e-14);
        assert_eq!(m.coupling[1][3], sys.g_2c);
    }

    #[test]
    fn flux_map_roundtrip() {
        let m = FluxMap { omega_max: 4.65, eta: -0.211 };
        assert_relative_eq!(m.frequency(0.0), 4.65, epsilon = 1e-12);
        let phi = m.flux_for(4.45);
        assert_relative_eq!(m.frequency(phi), 4.45, epsilon = 1e-12);
        assert_relative_eq!(m.frequency(-phi), 4.45, epsilon = 1e-12);
    }

    #[test]
    fn flux_response_is_net_zero_in_flux() {
        let sys = SystemParams::device_2q();
        let g = GateProtocolParams { response: Response::Flux { eta: -0.211 }, ..gp() };
        let s = make_cphase_schedule(&sys, &g).unwrap();
        assert!(s.control_integral().abs() < 1e-9);
        let min = s.omega[0].iter().cloned().fold(f64::MAX, f64::min);
        assert_relative_eq!(min, sys.omega_q1 - 0.2, epsilon = 1e-9);
    }

    #[test]
    fn csv_export() {
        let sys = SystemParams::device_2q();
        let s = Schedule::constant(&sys, 0.02, 0.01);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "t_ns,omega_q1,omega_c,omega_q2,g_1c,g_2c,g_12");
        assert_eq!(lines.len(), 4);
    }
}
