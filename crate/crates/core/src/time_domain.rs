//! Brute-force oracle: time integration of the full nonlinear circuit
//! (junction, shunt capacitor, choked shunt resistor, series resonator,
//! DC bias, optional injection tone and Johnson noise of the shunt).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::circuit_model::{non_negative, positive, shapiro_voltage, JunctionParams};
use crate::constants::{PhysicalConstants, BOLTZMANN};
use crate::error::{Error, Result};
use crate::ode::{dopri5, rk4_additive, Dopri5Options, Observer, OdeSystem};
use crate::sigproc::{hann_window, parabolic_peak, power_spectrum_bins};
use crate::steady_state::{OperatingPoint, ResonatorParams};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;
/// phi, v, i_res, q_res, i_shunt and the bias-line noise current.
const STATES: usize = 6;

/// Instantaneous circuit state. `i_shunt` is the current through the
/// (choked) shunt resistor.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CircuitState {
    pub phi: f64,
    pub v: f64,
    pub i_res: f64,
    pub q_res: f64,
    pub i_shunt: f64,
}

impl CircuitState {
    fn to_array(self) -> [f64; STATES] {
        [self.phi, self.v, self.i_res, self.q_res, self.i_shunt, 0.0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InjectionTone {
    /// Current amplitude injected into the junction node (A).
    pub amplitude: f64,
    pub frequency: f64,
}

/// Low-frequency current noise on the bias line: an Ornstein–Uhlenbeck
/// process with one-sided PSD `psd / (1 + (f/corner)^2)` (single-pole filter).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasNoise {
    /// Low-frequency one-sided PSD (A²/Hz).
    pub psd: f64,
    /// -3 dB corner of the bias-line filter (Hz).
    pub corner: f64,
}

impl BiasNoise {
    pub fn rms(&self) -> f64 {
        (self.psd * std::f64::consts::FRAC_PI_2 * self.corner).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InitialCondition {
    /// All state variables zero.
    Zero,
    /// Junction at the Shapiro voltage of the bare resonance, resonator empty.
    ShapiroBare,
    /// Resonator current `i1 sin(omega t)` and junction phase
    /// `omega t + phic + x sin(omega t)` of a predicted limit cycle.
    Predicted { omega: f64, i1: f64, phic: f64 },
    State(CircuitState),
}

/// Linear bias ramp from `from` to the target bias over `duration`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasRamp {
    pub from: f64,
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub duration: f64,
    pub output_dt: f64,
    pub rtol: f64,
    /// Absolute tolerance relative to the natural scale of each variable.
    pub atol: f64,
    /// Johnson-noise temperature of the shunt resistor (K); 0 disables noise.
    pub noise_temperature: f64,
    pub bias_noise: Option<BiasNoise>,
    pub seed: u64,
    pub injection: Option<InjectionTone>,
    /// Series inductance of the DC shunt branch; 0 connects `rs` directly.
    pub shunt_inductance: f64,
    pub initial: InitialCondition,
    pub ramp: Option<BiasRamp>,
    /// Fraction of the trace treated as transient by the analysis routines.
    pub transient_fraction: f64,
    /// Fixed steps per period of the bare resonance for noisy runs.
    pub noise_steps_per_period: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            duration: 2e-6,
            output_dt: 10e-12,
            rtol: 1e-8,
            atol: 1e-8,
            noise_temperature: 0.0,
            bias_noise: None,
            seed: 0,
            injection: None,
            shunt_inductance: 1e-9,
            initial: InitialCondition::ShapiroBare,
            ramp: None,
            transient_fraction: 0.5,
            noise_steps_per_period: 200,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::invalid("duration", "must be > 0"));
        }
        if !(self.output_dt > 0.0 && self.output_dt < self.duration) {
            return Err(Error::invalid("output_dt", "must be in (0, duration)"));
        }
        for (name, v) in [("rtol", self.rtol), ("atol", self.atol)] {
            if !(1e-12..=1e-6).contains(&v) {
                return Err(Error::invalid(name, "must lie in [1e-12, 1e-6]"));
            }
        }
        if !(self.noise_temperature >= 0.0 && self.noise_temperature.is_finite()) {
            return Err(Error::invalid("noise_temperature", "must be >= 0"));
        }
        if !(self.shunt_inductance >= 0.0) {
            return Err(Error::invalid("shunt_inductance", "must be >= 0"));
        }
        if !(0.0..1.0).contains(&self.transient_fraction) {
            return Err(Error::invalid("transient_fraction", "must lie in [0, 1)"));
        }
        if let Some(b) = &self.bias_noise {
            if !(b.psd >= 0.0 && b.corner > 0.0 && b.psd.is_finite() && b.corner.is_finite()) {
                return Err(Error::invalid("bias_noise", "psd >= 0 and corner > 0 required"));
            }
        }
        if let Some(inj) = &self.injection {
            if !(inj.amplitude >= 0.0 && inj.frequency > 0.0) {
                return Err(Error::invalid("injection", "amplitude >= 0 and frequency > 0 required"));
            }
        }
        if self.noise_steps_per_period < 20 {
            return Err(Error::invalid("noise_steps_per_period", "must be >= 20"));
        }
        Ok(())
    }
}

/// Uniformly sampled trace plus the inputs that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeTrace {
    pub t0: f64,
    pub dt: f64,
    pub samples: Vec<CircuitState>,
    pub junction: JunctionParams<f64>,
    pub resonator: ResonatorParams<f64>,
    pub ib: f64,
    pub config: SimConfig,
}

impl TimeTrace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + self.dt * k as f64
    }

    pub fn sample_rate(&self) -> f64 {
        1.0 / self.dt
    }

    /// Index of the first sample after the transient.
    pub fn steady_start(&self) -> usize {
        ((self.samples.len() as f64) * self.config.transient_fraction).floor() as usize
    }

    pub fn voltage(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.v).collect()
    }

    pub fn resonator_current(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.i_res).collect()
    }

    pub fn final_state(&self) -> Option<CircuitState> {
        self.samples.last().copied()
    }
}

struct Circuit {
    ic: f64,
    cs: f64,
    rs: f64,
    ls: f64,
    l: f64,
    c1: f64,
    r1: f64,
    ib: f64,
    ramp: Option<BiasRamp>,
    injection: Option<InjectionTone>,
    noise_rate: f64,
    two_pi_over_phi0: f64,
}

impl Circuit {
    #[inline]
    fn bias(&self, t: f64) -> f64 {
        match self.ramp {
            Some(r) if t < r.duration => r.from + (self.ib - r.from) * (t / r.duration),
            _ => self.ib,
        }
    }
}

impl OdeSystem<f64, STATES> for Circuit {
    #[inline]
    fn rhs(&self, t: f64, y: &[f64; STATES], dy: &mut [f64; STATES]) {
        let [phi, v, i_res, q, i_s, i_n] = *y;
        let mut i_node = self.bias(t) + i_n - self.ic * phi.sin() - i_res;
        if let Some(inj) = self.injection {
            i_node += inj.amplitude * (TWO_PI * inj.frequency * t).sin();
        }
        if self.ls > 0.0 {
            i_node -= i_s;
            dy[4] = (v - self.rs * i_s) / self.ls;
        } else {
            i_node -= v / self.rs;
            dy[4] = 0.0;
        }
        dy[0] = self.two_pi_over_phi0 * v;
        dy[1] = i_node / self.cs;
        dy[2] = (v - q / self.c1 - self.r1 * i_res) / self.l;
        dy[3] = i_res;
        dy[5] = -self.noise_rate * i_n;
    }
}

/// Wraps the integrated phase into (-pi, pi] after each step and records
/// samples with the unwrapped phase.
struct Recorder {
    turns: f64,
    samples: Vec<CircuitState>,
    direct_shunt: Option<f64>,
}

impl Recorder {
    fn push(&mut self, y: &[f64; STATES]) {
        let i_shunt = match self.direct_shunt {
            Some(rs) => y[1] / rs,
            None => y[4],
        };
        self.samples.push(CircuitState {
            phi: y[0] + TWO_PI * self.turns,
            v: y[1],
            i_res: y[2],
            q_res: y[3],
            i_shunt,
        });
    }
}

impl Observer<f64, STATES> for Recorder {
    fn sample(&mut self, _t: f64, y: &[f64; STATES]) {
        self.push(y);
    }

    fn after_step(&mut self, _t: f64, y: &mut [f64; STATES]) {
        if y[0].abs() > std::f64::consts::PI {
            let n = (y[0] / TWO_PI).round();
            y[0] -= n * TWO_PI;
            self.turns += n;
        }
    }
}

fn initial_state(j: &JunctionParams<f64>, r: &ResonatorParams<f64>, cfg: &SimConfig) -> CircuitState {
    let direct = cfg.shunt_inductance == 0.0;
    let with_shunt = |mut s: CircuitState| {
        if direct {
            s.i_shunt = s.v / j.rs;
        }
        s
    };
    match cfg.initial {
        InitialCondition::Zero => CircuitState::default(),
        InitialCondition::ShapiroBare => {
            let v = shapiro_voltage(r.bare_omega());
            with_shunt(CircuitState {
                v,
                i_shunt: v / j.rs,
                ..Default::default()
            })
        }
        InitialCondition::Predicted { omega, i1, phic } => {
            // The node capacitor carries the loop current, so the junction
            // voltage ripple is I1 cos(wt)/(w Cs) on top of the Shapiro voltage.
            let v_dc = shapiro_voltage(omega);
            with_shunt(CircuitState {
                phi: phic,
                v: v_dc + i1 / (omega * j.cs),
                i_res: 0.0,
                q_res: -i1 / omega,
                i_shunt: v_dc / j.rs,
            })
        }
        InitialCondition::State(s) => with_shunt(s),
    }
}

/// Integrates the circuit for `cfg.duration` seconds.
///
/// Deterministic runs use adaptive Dormand–Prince with dense output on the
/// uniform output grid; noisy runs use fixed-step RK4 with additive Wiener
/// increments for the shunt's Johnson noise (one-sided PSD `4 kB T / rs`).
pub fn simulate(
    j: &JunctionParams<f64>,
    r: &ResonatorParams<f64>,
    ib: f64,
    cfg: &SimConfig,
) -> Result<TimeTrace> {
    // ic = 0 is allowed here: the circuit is then linear
    non_negative("ic", j.ic)?;
    positive("cs", j.cs)?;
    positive("rs", j.rs)?;
    r.validate()?;
    cfg.validate()?;
    let consts = PhysicalConstants::<f64>::codata2018();
    let circuit = Circuit {
        ic: j.ic,
        cs: j.cs,
        rs: j.rs,
        ls: cfg.shunt_inductance,
        l: r.total_inductance(),
        c1: r.c1,
        r1: r.r1,
        ib,
        ramp: cfg.ramp,
        injection: cfg.injection,
        noise_rate: cfg.bias_noise.map_or(0.0, |b| TWO_PI * b.corner),
        two_pi_over_phi0: TWO_PI / consts.phi0,
    };
    let s0 = initial_state(j, r, cfg);
    let mut y0 = s0.to_array();
    let turns = (y0[0] / TWO_PI).round();
    y0[0] -= turns * TWO_PI;
    let n_out = (cfg.duration / cfg.output_dt).floor() as usize + 1;
    let mut rec = Recorder {
        turns,
        samples: Vec::with_capacity(n_out),
        direct_shunt: (cfg.shunt_inductance == 0.0).then_some(j.rs),
    };

    let w0 = r.bare_omega();
    let i_scale = j.ic.max(1e-12);
    let v_scale = shapiro_voltage(w0).max(consts.phi0 * w0 / TWO_PI);
    let scales = [1.0, v_scale, i_scale, i_scale / w0, i_scale, i_scale];
    let bias_noise = cfg.bias_noise.filter(|b| b.psd > 0.0);

    if cfg.noise_temperature > 0.0 || bias_noise.is_some() {
        let period = TWO_PI / w0;
        let steps_per_sample = ((cfg.output_dt / period) * cfg.noise_steps_per_period as f64).ceil().max(1.0) as usize;
        let dt = cfg.output_dt / steps_per_sample as f64;
        let steps = (n_out - 1) * steps_per_sample;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let kt = BOLTZMANN * cfg.noise_temperature;
        let ls = cfg.shunt_inductance;
        let (idx, sigma_rate) = if ls > 0.0 {
            // series noise EMF with two-sided PSD 2 kB T rs in the shunt branch
            (4usize, (2.0 * kt * j.rs).sqrt() / ls)
        } else {
            // parallel noise current with two-sided PSD 2 kB T / rs
            (1usize, (2.0 * kt / j.rs).sqrt() / j.cs)
        };
        let sigma = sigma_rate * dt.sqrt();
        // OU increment std for low-frequency one-sided PSD S: gamma sqrt(S dt / 2)
        let sigma_bias = bias_noise.map_or(0.0, |b| TWO_PI * b.corner * (b.psd * dt / 2.0).sqrt());
        rk4_additive(
            &circuit,
            0.0,
            y0,
            dt,
            steps,
            steps_per_sample,
            |_, _| {
                let mut dw = [0.0; STATES];
                if sigma > 0.0 {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    dw[idx] = sigma * z;
                }
                if sigma_bias > 0.0 {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    dw[5] = sigma_bias * z;
                }
                dw
            },
            &mut rec,
        );
    } else {
        let mut atol = [0.0; STATES];
        for (a, s) in atol.iter_mut().zip(scales) {
            *a = cfg.atol * s;
        }
        let opts = Dopri5Options {
            rtol: cfg.rtol,
            atol,
            absolute_only: [true, false, false, false, false, false],
            h_init: 1e-3 / w0,
            h_min: 1e-9 / w0,
            h_max: cfg.output_dt.max(0.5 / w0),
            max_steps: usize::MAX,
        };
        dopri5(&circuit, 0.0, y0, cfg.output_dt * (n_out - 1) as f64, 0.0, cfg.output_dt, &opts, &mut rec)?;
    }

    Ok(TimeTrace {
        t0: 0.0,
        dt: cfg.output_dt,
        samples: rec.samples,
        junction: *j,
        resonator: *r,
        ib,
        config: cfg.clone(),
    })
}

/// Steady-state observables of a trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyMetrics {
    pub v_dc: f64,
    pub f_emit: f64,
    /// Amplitude of the resonator current at `f_emit`.
    pub i1: f64,
    /// Peak height above the median spectral power (dB).
    pub peak_prominence_db: f64,
}

/// Minimum prominence of the emission line above the median of the spectrum.
pub const PEAK_THRESHOLD_DB: f64 = 10.0;

/// Mean voltage, dominant frequency of `v(t)`, and resonator current amplitude
/// after discarding the configured transient.
pub fn steady_state_metrics(trace: &TimeTrace) -> Result<SteadyMetrics> {
    let start = trace.steady_start();
    let tail = &trace.samples[start..];
    if tail.len() < 64 {
        return Err(Error::TooShort {
            needed: 64,
            available: tail.len(),
        });
    }
    let n = tail.len() as f64;
    let v_dc = tail.iter().map(|s| s.v).sum::<f64>() / n;
    let v: Vec<f64> = tail.iter().map(|s| s.v - v_dc).collect();
    let window = hann_window(v.len());
    let power = power_spectrum_bins(&v, &window);
    let mut sorted: Vec<f64> = power[1..].to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let median = sorted[sorted.len() / 2].max(f64::MIN_POSITIVE);
    let (k, peak) = power
        .iter()
        .enumerate()
        .skip(1)
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, p)| (k, *p))
        .unwrap_or((0, 0.0));
    let prominence_db = 10.0 * (peak / median).log10();
    if !(prominence_db >= PEAK_THRESHOLD_DB) || peak <= 0.0 {
        return Err(Error::NoPeak {
            threshold_db: PEAK_THRESHOLD_DB,
        });
    }
    let bin = parabolic_peak(&power, k);
    let fft_len = v.len();
    let f_emit = bin / (fft_len as f64 * trace.dt);
    let i_res: Vec<f64> = tail.iter().map(|s| s.i_res).collect();
    let i1 = tone_amplitude(&i_res, trace.dt, f_emit, &window);
    Ok(SteadyMetrics {
        v_dc,
        f_emit,
        i1,
        peak_prominence_db: prominence_db,
    })
}

/// Windowed quadrature projection of `x` onto a tone at `f`.
pub fn tone_amplitude(x: &[f64], dt: f64, f: f64, window: &[f64]) -> f64 {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let (mut c, mut s, mut wsum) = (0.0, 0.0, 0.0);
    let w = TWO_PI * f * dt;
    for (k, (&xk, &wk)) in x.iter().zip(window).enumerate() {
        let ph = w * k as f64;
        c += wk * (xk - mean) * ph.cos();
        s += wk * (xk - mean) * ph.sin();
        wsum += wk;
    }
    2.0 * (c * c + s * s).sqrt() / wsum
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IvPoint {
    pub ib: f64,
    pub v_mean: f64,
    /// Relative change of the mean voltage between the two halves of the
    /// analysed window.
    pub drift: f64,
    pub flag: Option<String>,
}

/// Quasi-static IV sweep: each bias point starts from the final state of the
/// previous one (the first from rest) with a linear bias ramp over the first
/// `ramp_fraction` of the run, and reports the time-averaged voltage after
/// the configured transient.
pub fn iv_curve(
    j: &JunctionParams<f64>,
    r: &ResonatorParams<f64>,
    ib_grid: &[f64],
    cfg: &SimConfig,
    ramp_fraction: f64,
) -> Result<Vec<IvPoint>> {
    cfg.validate()?;
    let mut out = Vec::with_capacity(ib_grid.len());
    let mut state = CircuitState::default();
    let mut prev_ib = ib_grid.first().copied().unwrap_or(0.0);
    for &ib in ib_grid {
        let mut c = cfg.clone();
        c.initial = InitialCondition::State(state);
        c.ramp = (ramp_fraction > 0.0).then_some(BiasRamp {
            from: prev_ib,
            duration: ramp_fraction * cfg.duration,
        });
        match simulate(j, r, ib, &c) {
            Ok(trace) => {
                let start = trace.steady_start();
                let tail = &trace.samples[start..];
                let half = tail.len() / 2;
                let mean = |s: &[CircuitState]| s.iter().map(|x| x.v).sum::<f64>() / s.len().max(1) as f64;
                let v_mean = mean(tail);
                let (a, b) = (mean(&tail[..half]), mean(&tail[half..]));
                let drift = if v_mean.abs() > 0.0 { ((b - a) / v_mean).abs() } else { 0.0 };
                state = trace.final_state().unwrap_or_default();
                out.push(IvPoint {
                    ib,
                    v_mean,
                    drift,
                    flag: None,
                });
            }
            Err(e) => out.push(IvPoint {
                ib,
                v_mean: f64::NAN,
                drift: f64::NAN,
                flag: Some(e.to_string()),
            }),
        }
        prev_ib = ib;
    }
    Ok(out)
}

/// Initial condition placing the resonator on the limit cycle predicted by
/// the analytic operating point.
pub fn predicted_start(op: &OperatingPoint<f64>) -> InitialCondition {
    InitialCondition::Predicted {
        omega: op.omega,
        i1: op.i1,
        phic: op.phic,
    }
}
