//! Spectral estimation, peak fitting and heterodyne IQ analysis.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time_domain::TimeTrace;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Symmetric-periodic Hann window (the DFT-even form used for spectra).
pub fn hann_window(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| 0.5 - 0.5 * (TWO_PI * k as f64 / n as f64).cos())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Window {
    #[default]
    Hann,
    Rectangular,
}

impl Window {
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Hann => hann_window(n),
            Window::Rectangular => vec![1.0; n],
        }
    }
}

fn forward_fft(n: usize) -> Arc<dyn Fft<f64>> {
    FftPlanner::new().plan_fft_forward(n)
}

/// `|X_k|^2` of the windowed signal for `k = 0..=n/2`.
pub fn power_spectrum_bins(x: &[f64], window: &[f64]) -> Vec<f64> {
    let fft = forward_fft(x.len());
    let mut buf: Vec<Complex64> = x.iter().zip(window).map(|(a, w)| Complex64::new(a * w, 0.0)).collect();
    fft.process(&mut buf);
    buf[..x.len() / 2 + 1].iter().map(|c| c.norm_sqr()).collect()
}

/// Fractional bin of a local maximum, from a parabola through the log-power
/// of the three bins around `k`.
pub fn parabolic_peak(power: &[f64], k: usize) -> f64 {
    if k == 0 || k + 1 >= power.len() {
        return k as f64;
    }
    let tiny = f64::MIN_POSITIVE;
    let (a, b, c) = (
        power[k - 1].max(tiny).ln(),
        power[k].max(tiny).ln(),
        power[k + 1].max(tiny).ln(),
    );
    let den = a - 2.0 * b + c;
    if den >= 0.0 {
        return k as f64;
    }
    k as f64 + 0.5 * (a - c) / den
}

/// One-sided power spectral density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub f: Vec<f64>,
    pub psd: Vec<f64>,
    /// Equivalent noise bandwidth of the window (Hz).
    pub rbw: f64,
    pub segments: usize,
}

impl Spectrum {
    pub fn df(&self) -> f64 {
        if self.f.len() > 1 {
            self.f[1] - self.f[0]
        } else {
            0.0
        }
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        for p in &mut self.psd {
            *p *= factor;
        }
        self
    }

    /// Index of the largest PSD value.
    pub fn peak_index(&self) -> usize {
        self.psd
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| k)
            .unwrap_or(0)
    }

    pub fn median(&self) -> f64 {
        let mut v = self.psd.clone();
        v.sort_by(|a, b| a.total_cmp(b));
        v.get(v.len() / 2).copied().unwrap_or(0.0)
    }

    /// Interpolated frequency of the largest peak.
    pub fn peak_frequency(&self) -> f64 {
        let k = self.peak_index();
        let b = parabolic_peak(&self.psd, k);
        self.f[0] + b * self.df()
    }
}

/// Welch-averaged one-sided PSD with 50% overlapping segments of length
/// `segment_len`; each segment has its mean removed before windowing.
pub fn power_spectral_density(x: &[f64], sample_rate: f64, segment_len: usize, window: Window) -> Result<Spectrum> {
    if segment_len < 8 || segment_len > x.len() {
        return Err(Error::TooShort {
            needed: segment_len.max(8),
            available: x.len(),
        });
    }
    if !(sample_rate > 0.0) {
        return Err(Error::invalid("sample_rate", "must be > 0"));
    }
    let w = window.coefficients(segment_len);
    let s1: f64 = w.iter().sum();
    let s2: f64 = w.iter().map(|v| v * v).sum();
    let fft = forward_fft(segment_len);
    let hop = (segment_len / 2).max(1);
    let nbins = segment_len / 2 + 1;
    let mut acc = vec![0.0; nbins];
    let mut buf = vec![Complex64::new(0.0, 0.0); segment_len];
    let mut segments = 0usize;
    let mut start = 0;
    while start + segment_len <= x.len() {
        let seg = &x[start..start + segment_len];
        let mean = seg.iter().sum::<f64>() / segment_len as f64;
        for ((b, &v), &wk) in buf.iter_mut().zip(seg).zip(&w) {
            *b = Complex64::new((v - mean) * wk, 0.0);
        }
        fft.process(&mut buf);
        for (a, c) in acc.iter_mut().zip(&buf) {
            *a += c.norm_sqr();
        }
        segments += 1;
        start += hop;
    }
    let norm = 1.0 / (sample_rate * s2 * segments as f64);
    let last = nbins - 1;
    let even = segment_len % 2 == 0;
    let psd = acc
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let one_sided = if k == 0 || (even && k == last) { 1.0 } else { 2.0 };
            p * norm * one_sided
        })
        .collect();
    let df = sample_rate / segment_len as f64;
    Ok(Spectrum {
        f: (0..nbins).map(|k| k as f64 * df).collect(),
        psd,
        rbw: sample_rate * s2 / (s1 * s1),
        segments,
    })
}

/// Which trace quantity a spectrum is computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TraceSignal {
    /// Junction voltage (V²/Hz).
    Voltage,
    /// Resonator current (A²/Hz).
    ResonatorCurrent,
    /// Power delivered to the external load, `(qt/qe)·r1·i_res²` (W/Hz).
    OutputPower,
}

/// PSD of the post-transient part of a trace.
pub fn trace_spectrum(trace: &TimeTrace, signal: TraceSignal, segment_len: usize, window: Window) -> Result<Spectrum> {
    let tail = &trace.samples[trace.steady_start()..];
    let x: Vec<f64> = match signal {
        TraceSignal::Voltage => tail.iter().map(|s| s.v).collect(),
        _ => tail.iter().map(|s| s.i_res).collect(),
    };
    let s = power_spectral_density(&x, trace.sample_rate(), segment_len, window)?;
    Ok(match signal {
        TraceSignal::OutputPower => {
            let r = &trace.resonator;
            s.scaled(r.r1 * r.qt / r.qe)
        }
        _ => s,
    })
}

/// Trapezoidal integral of the PSD over `[lo, hi]`, with linear
/// interpolation at the band edges.
pub fn integrate_power(s: &Spectrum, lo: f64, hi: f64) -> Result<f64> {
    let (fmin, fmax) = match (s.f.first(), s.f.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(Error::EmptyBand { lo, hi }),
    };
    if !(lo <= hi) || lo < fmin || hi > fmax {
        return Err(Error::EmptyBand { lo, hi });
    }
    if lo == hi {
        return Ok(0.0);
    }
    let interp = |x: f64| -> f64 {
        let k = s.f.partition_point(|&f| f <= x).clamp(1, s.f.len() - 1);
        let (f0, f1) = (s.f[k - 1], s.f[k]);
        let t = if f1 > f0 { (x - f0) / (f1 - f0) } else { 0.0 };
        s.psd[k - 1] + t * (s.psd[k] - s.psd[k - 1])
    };
    let mut pts = vec![(lo, interp(lo))];
    for (&f, &p) in s.f.iter().zip(&s.psd) {
        if f > lo && f < hi {
            pts.push((f, p));
        }
    }
    pts.push((hi, interp(hi)));
    Ok(pts.windows(2).map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0)).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum LineShape {
    #[default]
    Gaussian,
    Lorentzian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakFit {
    pub center: f64,
    pub fwhm: f64,
    pub area: f64,
    pub amplitude: f64,
    pub baseline: f64,
    pub center_sigma: f64,
    pub fwhm_sigma: f64,
    pub reduced_chi2: f64,
    pub shape: LineShape,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakFitOptions {
    pub shape: LineShape,
    /// Minimum height of the peak above the median PSD.
    pub threshold_db: f64,
    /// Points are fitted while they stay above this fraction of the peak
    /// height over the baseline.
    pub support_fraction: f64,
    /// Relative uncertainty of each PSD point; by default `1/sqrt(segments)`.
    pub relative_sigma: Option<f64>,
    pub max_reduced_chi2: f64,
}

impl Default for PeakFitOptions {
    fn default() -> Self {
        Self {
            shape: LineShape::Gaussian,
            threshold_db: 10.0,
            support_fraction: 0.01,
            relative_sigma: None,
            max_reduced_chi2: 10.0,
        }
    }
}

pub fn fit_gaussian_peak(s: &Spectrum) -> Result<PeakFit> {
    fit_peak(s, &PeakFitOptions::default())
}

/// Least-squares fit of a single line on the linear PSD, after subtracting
/// the median as the baseline.
pub fn fit_peak(s: &Spectrum, opts: &PeakFitOptions) -> Result<PeakFit> {
    if s.psd.len() < 5 {
        return Err(Error::TooShort {
            needed: 5,
            available: s.psd.len(),
        });
    }
    let baseline = s.median();
    let k0 = s.peak_index();
    let peak = s.psd[k0];
    let prominence = if baseline > 0.0 { 10.0 * (peak / baseline).log10() } else { f64::INFINITY };
    if !(peak > 0.0) || prominence < opts.threshold_db {
        return Err(Error::NoPeak {
            threshold_db: opts.threshold_db,
        });
    }
    let height = peak - baseline;
    let cut = baseline + opts.support_fraction * height;
    let mut lo = k0;
    while lo > 0 && s.psd[lo - 1] >= cut {
        lo -= 1;
    }
    let mut hi = k0;
    while hi + 1 < s.psd.len() && s.psd[hi + 1] >= cut {
        hi += 1;
    }
    // one extra point on each side pins the tails
    lo = lo.saturating_sub(1);
    hi = (hi + 1).min(s.psd.len() - 1);
    let xs: Vec<f64> = s.f[lo..=hi].to_vec();
    let ys: Vec<f64> = s.psd[lo..=hi].iter().map(|p| p - baseline).collect();
    let rel = opts
        .relative_sigma
        .unwrap_or(1.0 / (s.segments.max(1) as f64).sqrt());
    let floor = (baseline * rel).max(height * 1e-3);
    let sig: Vec<f64> = ys.iter().map(|y| (rel * y.abs()).max(floor)).collect();

    let df = s.df().max(f64::MIN_POSITIVE);
    let center0 = s.f[0] + parabolic_peak(&s.psd, k0) * df;
    let half = ys[k0 - lo] * 0.5;
    let above = ys.iter().filter(|&&y| y >= half).count() as f64;
    let width0 = (above * df).max(0.5 * s.rbw).max(df);
    let shape = opts.shape;
    let model = move |p: &[f64; 3], x: f64| -> (f64, [f64; 3]) {
        let (a, c, w) = (p[0], p[1], p[2]);
        let d = x - c;
        match shape {
            LineShape::Gaussian => {
                let k = 4.0 * std::f64::consts::LN_2;
                let e = (-k * d * d / (w * w)).exp();
                let v = a * e;
                (v, [e, v * 2.0 * k * d / (w * w), v * 2.0 * k * d * d / (w * w * w)])
            }
            LineShape::Lorentzian => {
                let g = 0.5 * w;
                let den = d * d + g * g;
                let v = a * g * g / den;
                let dv_dg = a * 2.0 * g * d * d / (den * den);
                (v, [g * g / den, a * g * g * 2.0 * d / (den * den), 0.5 * dv_dg])
            }
        }
    };
    let p0 = [ys[k0 - lo].max(f64::MIN_POSITIVE), center0, width0];
    let (p, cov, chi2) = levenberg_marquardt(&xs, &ys, &sig, p0, model)?;
    let dof = (xs.len() as f64 - 3.0).max(1.0);
    let red = chi2 / dof;
    if red > opts.max_reduced_chi2 {
        return Err(Error::PoorFit { reduced_chi2: red });
    }
    let fwhm = p[2].abs();
    let area = match shape {
        LineShape::Gaussian => p[0] * fwhm * (std::f64::consts::PI / (4.0 * std::f64::consts::LN_2)).sqrt(),
        LineShape::Lorentzian => p[0] * std::f64::consts::PI * 0.5 * fwhm,
    };
    let scale = red.max(1.0);
    Ok(PeakFit {
        center: p[1],
        fwhm,
        area,
        amplitude: p[0],
        baseline,
        center_sigma: (cov[1][1] * scale).sqrt(),
        fwhm_sigma: (cov[2][2] * scale).sqrt(),
        reduced_chi2: red,
        shape,
    })
}

type Cov3 = [[f64; 3]; 3];

fn solve3(a: Cov3, b: [f64; 3]) -> Option<[f64; 3]> {
    let inv = invert3(a)?;
    let mut x = [0.0; 3];
    for i in 0..3 {
        x[i] = (0..3).map(|j| inv[i][j] * b[j]).sum();
    }
    Some(x)
}

fn invert3(m: Cov3) -> Option<Cov3> {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    if !det.is_finite() || det == 0.0 {
        return None;
    }
    let mut r = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let (i1, i2) = ((j + 1) % 3, (j + 2) % 3);
            let (j1, j2) = ((i + 1) % 3, (i + 2) % 3);
            r[i][j] = (m[i1][j1] * m[i2][j2] - m[i1][j2] * m[i2][j1]) / det;
        }
    }
    Some(r)
}

fn levenberg_marquardt<F>(xs: &[f64], ys: &[f64], sig: &[f64], p0: [f64; 3], model: F) -> Result<([f64; 3], Cov3, f64)>
where
    F: Fn(&[f64; 3], f64) -> (f64, [f64; 3]),
{
    // parameters are scaled to O(1) so the damping acts evenly
    let scale = [p0[0].abs().max(f64::MIN_POSITIVE), p0[2].abs(), p0[2].abs()];
    let offset = [0.0, p0[1], 0.0];
    let unscale = |q: &[f64; 3]| [q[0] * scale[0], offset[1] + q[1] * scale[1], q[2] * scale[2]];
    let eval = |q: &[f64; 3]| -> (f64, Cov3, [f64; 3]) {
        let p = unscale(q);
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        let mut chi2 = 0.0;
        for ((&x, &y), &s) in xs.iter().zip(ys).zip(sig) {
            let (m, g) = model(&p, x);
            let r = (y - m) / s;
            let g = [g[0] * scale[0] / s, g[1] * scale[1] / s, g[2] * scale[2] / s];
            chi2 += r * r;
            for i in 0..3 {
                jtr[i] += g[i] * r;
                for k in 0..3 {
                    jtj[i][k] += g[i] * g[k];
                }
            }
        }
        (chi2, jtj, jtr)
    };
    let mut q = [1.0, 0.0, 1.0];
    let (mut chi2, mut jtj, mut jtr) = eval(&q);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    for it in 0..500 {
        iterations = it;
        let mut a = jtj;
        for (i, row) in a.iter_mut().enumerate() {
            row[i] *= 1.0 + lambda;
        }
        let Some(step) = solve3(a, jtr) else {
            lambda *= 10.0;
            continue;
        };
        let trial = [q[0] + step[0], q[1] + step[1], (q[2] + step[2]).abs().max(1e-6)];
        let (c2, j2, r2) = eval(&trial);
        if c2.is_finite() && c2 <= chi2 {
            let done = (chi2 - c2) <= 1e-12 * chi2.max(1e-300) && step.iter().all(|s| s.abs() < 1e-9);
            q = trial;
            chi2 = c2;
            jtj = j2;
            jtr = r2;
            lambda = (lambda * 0.3).max(1e-12);
            if done {
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
        }
    }
    let inv = invert3(jtj).ok_or(Error::NonConvergence {
        iterations,
        residual: chi2,
    })?;
    let mut cov = [[0.0; 3]; 3];
    for i in 0..3 {
        for k in 0..3 {
            cov[i][k] = inv[i][k] * scale[i] * scale[k];
        }
    }
    Ok((unscale(&q), cov, chi2))
}

/// Complex baseband samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IqCloud {
    pub i: Vec<f64>,
    pub q: Vec<f64>,
    pub sample_rate: f64,
    pub f_lo: f64,
}

impl IqCloud {
    pub fn len(&self) -> usize {
        self.i.len()
    }

    pub fn is_empty(&self) -> bool {
        self.i.is_empty()
    }

    pub fn radii(&self) -> Vec<f64> {
        self.i.iter().zip(&self.q).map(|(a, b)| a.hypot(*b)).collect()
    }

    /// Unwrapped phase of each sample.
    pub fn phase(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.i.len());
        let mut prev = 0.0;
        let mut turns = 0.0;
        for (k, (a, b)) in self.i.iter().zip(&self.q).enumerate() {
            let p = b.atan2(*a);
            if k > 0 {
                let d = p - prev;
                if d > std::f64::consts::PI {
                    turns -= TWO_PI;
                } else if d < -std::f64::consts::PI {
                    turns += TWO_PI;
                }
            }
            prev = p;
            out.push(p + turns);
        }
        out
    }

    /// Removes a residual rotation at `f_res` (digital down-conversion).
    pub fn derotate(&self, f_res: f64) -> IqCloud {
        let mut out = self.clone();
        for (k, (a, b)) in out.i.iter_mut().zip(out.q.iter_mut()).enumerate() {
            let ph = -TWO_PI * f_res * k as f64 / self.sample_rate;
            let (s, c) = ph.sin_cos();
            let (x, y) = (*a, *b);
            *a = x * c - y * s;
            *b = x * s + y * c;
        }
        out.f_lo += f_res;
        out
    }
}

#[derive(Debug, Clone, Copy)]
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
    z: [f64; 2],
}

impl Biquad {
    #[inline]
    fn run(&mut self, x: f64) -> f64 {
        let y = self.b[0] * x + self.z[0];
        self.z[0] = self.b[1] * x - self.a[0] * y + self.z[1];
        self.z[1] = self.b[2] * x - self.a[1] * y;
        y
    }
}

/// Digital Butterworth low-pass (bilinear transform with pre-warping) as
/// second-order sections; odd orders end in a first-order section.
fn butterworth_lowpass(order: usize, cutoff: f64, fs: f64) -> Vec<Biquad> {
    let k = (std::f64::consts::PI * cutoff / fs).tan();
    let mut out = Vec::new();
    for m in 0..order / 2 {
        let theta = std::f64::consts::PI * (2 * m + 1) as f64 / (2 * order) as f64;
        let q2 = 2.0 * theta.sin();
        let norm = 1.0 + q2 * k + k * k;
        let b0 = k * k / norm;
        out.push(Biquad {
            b: [b0, 2.0 * b0, b0],
            a: [2.0 * (k * k - 1.0) / norm, (1.0 - q2 * k + k * k) / norm],
            z: [0.0; 2],
        });
    }
    if order % 2 == 1 {
        let norm = 1.0 + k;
        out.push(Biquad {
            b: [k / norm, k / norm, 0.0],
            a: [(k - 1.0) / norm, 0.0],
            z: [0.0; 2],
        });
    }
    out
}

pub const DEMOD_FILTER_ORDER: usize = 5;

/// Mixes `x` with quadrature references at `f_lo`, low-pass filters
/// (5th-order Butterworth at 0.4x the decimated Nyquist frequency) and keeps
/// every `decimation`-th sample after the filter has settled.
///
/// The dominant input tone is located first; `AliasRisk` is returned when
/// the decimated rate is below twice its offset from `f_lo`.
pub fn heterodyne_demodulate(x: &[f64], sample_rate: f64, f_lo: f64, decimation: usize) -> Result<IqCloud> {
    if !(f_lo > 0.0 && f_lo < 0.5 * sample_rate) {
        return Err(Error::invalid("f_lo", "must lie in (0, Nyquist)"));
    }
    if decimation == 0 {
        return Err(Error::invalid("decimation", "must be >= 1"));
    }
    if x.len() < 16 * decimation {
        return Err(Error::TooShort {
            needed: 16 * decimation,
            available: x.len(),
        });
    }
    let rate = sample_rate / decimation as f64;
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    if var > 0.0 {
        let w = hann_window(n);
        let centred: Vec<f64> = x.iter().map(|v| v - mean).collect();
        let p = power_spectrum_bins(&centred, &w);
        let k = p
            .iter()
            .enumerate()
            .skip(1)
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| k)
            .unwrap_or(0);
        let f_peak = parabolic_peak(&p, k) * sample_rate / n as f64;
        let detuning = (f_peak - f_lo).abs();
        if rate < 2.0 * detuning {
            return Err(Error::AliasRisk { rate, detuning });
        }
    }
    let cutoff = 0.4 * 0.5 * rate;
    let mut fi = butterworth_lowpass(DEMOD_FILTER_ORDER, cutoff, sample_rate);
    let mut fq = fi.clone();
    let settle = ((4.0 * DEMOD_FILTER_ORDER as f64 / cutoff) * sample_rate).ceil() as usize;
    let settle = settle.min(n / 2);
    let mut out_i = Vec::with_capacity(n / decimation);
    let mut out_q = Vec::with_capacity(n / decimation);
    let w = TWO_PI * f_lo / sample_rate;
    for (k, &v) in x.iter().enumerate() {
        let (s, c) = (w * k as f64).sin_cos();
        let mut a = 2.0 * v * c;
        let mut b = -2.0 * v * s;
        for f in fi.iter_mut() {
            a = f.run(a);
        }
        for f in fq.iter_mut() {
            b = f.run(b);
        }
        if k >= settle && (k - settle) % decimation == 0 {
            out_i.push(a);
            out_q.push(b);
        }
    }
    Ok(IqCloud {
        i: out_i,
        q: out_q,
        sample_rate: rate,
        f_lo,
    })
}

/// Square 2-D occupancy histogram centred on the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IqHistogram {
    pub bins: usize,
    /// Half-width of the square extent.
    pub extent: f64,
    /// Row-major counts; row index follows `q`, column index follows `i`.
    pub counts: Vec<u64>,
}

impl IqHistogram {
    pub fn bin_width(&self) -> f64 {
        2.0 * self.extent / self.bins as f64
    }

    pub fn count(&self, row: usize, col: usize) -> u64 {
        self.counts[row * self.bins + col]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

pub fn iq_histogram(cloud: &IqCloud, bins: usize) -> Result<IqHistogram> {
    if bins < 10 {
        return Err(Error::invalid("bins", "must be >= 10"));
    }
    let m = cloud
        .i
        .iter()
        .chain(&cloud.q)
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    let extent = if m > 0.0 { 1.05 * m } else { 1.0 };
    let width = 2.0 * extent / bins as f64;
    let mut counts = vec![0u64; bins * bins];
    for (a, b) in cloud.i.iter().zip(&cloud.q) {
        let col = (((a + extent) / width) as usize).min(bins - 1);
        let row = (((b + extent) / width) as usize).min(bins - 1);
        counts[row * bins + col] += 1;
    }
    Ok(IqHistogram { bins, extent, counts })
}

/// Probability density of the radius, from the histogram marginalised over
/// angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub radius: Vec<f64>,
    pub density: Vec<f64>,
}

impl RadialProfile {
    pub fn mean(&self) -> f64 {
        let dr = self.dr();
        self.radius.iter().zip(&self.density).map(|(r, p)| r * p * dr).sum()
    }

    pub fn std_dev(&self) -> f64 {
        let dr = self.dr();
        let m = self.mean();
        self.radius
            .iter()
            .zip(&self.density)
            .map(|(r, p)| (r - m) * (r - m) * p * dr)
            .sum::<f64>()
            .sqrt()
    }

    fn dr(&self) -> f64 {
        if self.radius.len() > 1 {
            self.radius[1] - self.radius[0]
        } else {
            0.0
        }
    }
}

pub fn radial_profile(h: &IqHistogram) -> RadialProfile {
    let nr = h.bins / 2;
    let dr = h.extent / nr as f64;
    let w = h.bin_width();
    let mut mass = vec![0.0; nr];
    let mut pixels = vec![0usize; nr];
    for row in 0..h.bins {
        let y = -h.extent + (row as f64 + 0.5) * w;
        for col in 0..h.bins {
            let x = -h.extent + (col as f64 + 0.5) * w;
            let k = (x.hypot(y) / dr) as usize;
            if k < nr {
                mass[k] += h.count(row, col) as f64;
                pixels[k] += 1;
            }
        }
    }
    let total = (h.total() as f64).max(1.0);
    let radius: Vec<f64> = (0..nr).map(|k| (k as f64 + 0.5) * dr).collect();
    // mean areal density of each annulus times its circumference; this
    // corrects for the uneven number of pixel centres per annulus
    let density = radius
        .iter()
        .zip(mass.iter().zip(&pixels))
        .map(|(r, (m, &np))| {
            if np == 0 {
                0.0
            } else {
                std::f64::consts::TAU * r * m / (np as f64 * w * w * total)
            }
        })
        .collect();
    RadialProfile { radius, density }
}

/// Lorentzian FWHM implied by phase diffusion: `var(phi(t+lag) - phi(t)) / (2 pi lag)`,
/// after removing the mean drift.
pub fn phase_diffusion_linewidth(cloud: &IqCloud, lag: usize) -> Result<f64> {
    if lag == 0 || cloud.len() < lag + 16 {
        return Err(Error::TooShort {
            needed: lag + 16,
            available: cloud.len(),
        });
    }
    let ph = cloud.phase();
    let d: Vec<f64> = ph.windows(lag + 1).map(|w| w[lag] - w[0]).collect();
    let m = d.iter().sum::<f64>() / d.len() as f64;
    let var = d.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (d.len() - 1) as f64;
    let tau = lag as f64 / cloud.sample_rate;
    Ok(var / (TWO_PI * tau))
}
