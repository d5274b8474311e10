//! Qubit-operation infidelity from oscillator phase noise.
//!
//! `X(tau) = (1/2 pi) ∫ 10^(L(f)/10) Σ_l G_zl(f, tau) df` and
//! `F_av = (1 + exp(-X)) / 2`, with first-order toggling-frame filter
//! functions `G_zl = 2 pi (2 pi f)^2 |∫_0^tau R_zl(t) exp(i 2 pi f t) dt|^2`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Single-sideband phase noise `L(f)` in dBc/Hz, piecewise linear in
/// `(log f, L)` between anchors and flat outside them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseNoiseModel<T> {
    pub anchors: Vec<(T, T)>,
    /// Offsets above this frequency carry no noise (amplifier floor removed).
    pub clip_above: Option<T>,
}

impl<T: Real> PhaseNoiseModel<T> {
    pub fn from_points(points: &[(T, T)]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyInput);
        }
        for (k, &(f, l)) in points.iter().enumerate() {
            if !(f > T::zero() && f.is_finite()) || (k > 0 && !(f > points[k - 1].0)) {
                return Err(Error::NonMonotoneFrequencies { index: k });
            }
            if !l.is_finite() {
                return Err(Error::invalid("points", format!("L at index {k} is not finite")));
            }
        }
        Ok(Self { anchors: points.to_vec(), clip_above: None })
    }

    pub fn with_clip_above(mut self, f: T) -> Self {
        self.clip_above = Some(f);
        self
    }

    /// Every anchor raised by `db`.
    pub fn shifted(&self, db: T) -> Self {
        Self {
            anchors: self.anchors.iter().map(|&(f, l)| (f, l + db)).collect(),
            clip_above: self.clip_above,
        }
    }

    /// `L(f)` in dBc/Hz.
    pub fn level_dbc(&self, f: T) -> T {
        let a = &self.anchors;
        if f <= a[0].0 {
            return a[0].1;
        }
        let last = a[a.len() - 1];
        if f >= last.0 {
            return last.1;
        }
        let k = a.partition_point(|p| p.0 <= f);
        let (f0, l0) = a[k - 1];
        let (f1, l1) = a[k];
        let t = (f / f0).ln() / (f1 / f0).ln();
        l0 + t * (l1 - l0)
    }

    /// Linear density `10^(L/10)` (1/Hz).
    pub fn density(&self, f: T) -> T {
        if let Some(c) = self.clip_above {
            if f > c {
                return T::zero();
            }
        }
        T::lit(10.0).powf(self.level_dbc(f) / T::lit(10.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QubitOperation {
    Ramsey,
    HahnEcho,
    /// Constant-amplitude pi pulse about x lasting `tau`.
    NotGate,
}

impl QubitOperation {
    pub const ALL: [QubitOperation; 3] = [QubitOperation::Ramsey, QubitOperation::HahnEcho, QubitOperation::NotGate];

    pub fn label(self) -> &'static str {
        match self {
            QubitOperation::Ramsey => "ramsey",
            QubitOperation::HahnEcho => "hahn_echo",
            QubitOperation::NotGate => "not_gate",
        }
    }

    /// Average of `Σ G` over one oscillation period for `f tau >> 1`.
    fn period_average<T: Real>(self, f: T, tau: T) -> T {
        let pi = T::PI();
        match self {
            QubitOperation::Ramsey => T::lit(4.0) * pi,
            QubitOperation::HahnEcho => T::lit(12.0) * pi,
            QubitOperation::NotGate => {
                // 4 pi w^2 (w^2 + W^2) / (w^2 - W^2)^2 with r = (W/w)^2
                let ratio = T::one() / (T::lit(2.0) * f * tau);
                let r = ratio * ratio;
                T::lit(4.0) * pi * (T::one() + r) / ((T::one() - r) * (T::one() - r))
            }
        }
    }
}

/// `sin(x)/x` with the removable singularity filled in.
fn sinc<T: Real>(x: T) -> T {
    if x.abs() < T::lit(1e-4) {
        T::one() - x * x / T::lit(6.0)
    } else {
        x.sin() / x
    }
}

/// `|c_z|^2` and `|c_y|^2` of the NOT gate, where
/// `c_z = ∫ cos(Omega t) e^{i w t} dt`, `c_y = ∫ sin(Omega t) e^{i w t} dt`
/// over `[0, tau]` and `Omega = pi / tau`.
pub fn not_gate_components<T: Real>(f: T, tau: T) -> (T, T) {
    let w = T::lit(2.0) * T::PI() * f;
    let om = T::PI() / tau;
    let s = sinc((w - om) * tau / T::lit(2.0));
    let common = tau * tau * s * s / ((w + om) * (w + om));
    (common * w * w, common * om * om)
}

/// `Σ_l G_zl(f, tau)`.
pub fn filter_function<T: Real>(op: QubitOperation, f: T, tau: T) -> T {
    let pi = T::PI();
    match op {
        QubitOperation::Ramsey => {
            let s = (pi * f * tau).sin();
            T::lit(8.0) * pi * s * s
        }
        QubitOperation::HahnEcho => {
            let s = (pi * f * tau / T::lit(2.0)).sin();
            let s2 = s * s;
            T::lit(32.0) * pi * s2 * s2
        }
        QubitOperation::NotGate => {
            let w = T::lit(2.0) * pi * f;
            let (cz, cy) = not_gate_components(f, tau);
            T::lit(2.0) * pi * w * w * (cz + cy)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationOptions<T> {
    pub f_min: T,
    pub f_max: T,
    /// Relative change allowed between successive refinements.
    pub rel_tol: T,
    /// Number of oscillation periods resolved exactly before switching to the
    /// period-averaged filter function.
    pub resolved_periods: usize,
    /// Logarithmic subintervals per decade.
    pub per_decade: usize,
    pub max_refinements: usize,
}

impl<T: Real> Default for IntegrationOptions<T> {
    fn default() -> Self {
        Self {
            f_min: T::lit(0.1),
            f_max: T::lit(1e9),
            rel_tol: T::lit(0.005),
            resolved_periods: 100,
            per_decade: 10,
            max_refinements: 4,
        }
    }
}

const GL_ORDER: usize = 8;

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration on `P_n`.
fn gauss_legendre<T: Real>(n: usize) -> Vec<(T, T)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((T::lit(x), T::lit(2.0 / ((1.0 - x * x) * dp * dp))));
    }
    out
}

fn integrate_segments<T: Real, F: Fn(T) -> T>(edges: &[T], nodes: &[(T, T)], f: F) -> T {
    let half = T::lit(0.5);
    edges
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            if !(b > a) {
                return T::zero();
            }
            let c = half * (a + b);
            let h = half * (b - a);
            nodes.iter().fold(T::zero(), |acc, &(x, wt)| acc + wt * f(c + h * x)) * h
        })
        .fold(T::zero(), |a, b| a + b)
}

fn log_grid<T: Real>(lo: T, hi: T, per_decade: usize, out: &mut Vec<T>) {
    if !(hi > lo) {
        return;
    }
    let decades = (hi / lo).log10();
    let n = (decades * T::from_usize_lossy(per_decade)).ceil().to_usize().unwrap_or(1).max(1);
    for k in 0..=n {
        out.push(lo * (hi / lo).powf(T::from_usize_lossy(k) / T::from_usize_lossy(n)));
    }
}

fn dephasing_at_level<T: Real>(
    model: &PhaseNoiseModel<T>,
    op: QubitOperation,
    tau: T,
    opts: &IntegrationOptions<T>,
    periods: usize,
    per_decade: usize,
    nodes: &[(T, T)],
) -> T {
    let (lo, hi) = (opts.f_min, opts.f_max);
    // exact filter function up to f_c, period average above
    let half_period = T::lit(0.5) / tau;
    let f_c = (T::from_usize_lossy(periods) / tau).min(hi).max(lo);
    let mut extra: Vec<T> = model.anchors.iter().map(|a| a.0).collect();
    if let Some(c) = model.clip_above {
        extra.push(c);
    }
    let within = |x: &T, a: T, b: T| *x > a && *x < b;

    let mut low = Vec::new();
    log_grid(lo, f_c, per_decade, &mut low);
    let first = (lo / half_period).floor().to_usize().unwrap_or(0) + 1;
    let last = (f_c / half_period).ceil().to_usize().unwrap_or(0);
    for k in first..=last {
        low.push(half_period * T::from_usize_lossy(k));
    }
    low.extend(extra.iter().copied().filter(|x| within(x, lo, f_c)));
    low.retain(|x| *x >= lo && *x <= f_c);
    low.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    low.dedup();
    let exact = integrate_segments(&low, nodes, |f| model.density(f) * filter_function(op, f, tau));

    let mut high = Vec::new();
    log_grid(f_c, hi, per_decade, &mut high);
    high.extend(extra.iter().copied().filter(|x| within(x, f_c, hi)));
    high.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    high.dedup();
    let tail = integrate_segments(&high, nodes, |f| model.density(f) * op.period_average(f, tau));

    (exact + tail) / (T::lit(2.0) * T::PI())
}

/// `X(tau)`, refined until two successive grids agree within `rel_tol`.
pub fn dephasing_integral<T: Real>(
    model: &PhaseNoiseModel<T>,
    op: QubitOperation,
    tau: T,
    opts: &IntegrationOptions<T>,
) -> Result<T> {
    if !(tau > T::zero() && tau.is_finite()) {
        return Err(Error::invalid("tau", "must be > 0"));
    }
    if !(opts.f_min > T::zero() && opts.f_max > opts.f_min) {
        return Err(Error::invalid("f_min/f_max", "need 0 < f_min < f_max"));
    }
    let nodes = gauss_legendre::<T>(GL_ORDER);
    let mut periods = opts.resolved_periods.max(4);
    let mut per_decade = opts.per_decade.max(2);
    let mut prev = dephasing_at_level(model, op, tau, opts, periods, per_decade, &nodes);
    let mut change = T::infinity();
    for _ in 0..opts.max_refinements.max(1) {
        periods *= 2;
        per_decade *= 2;
        let next = dephasing_at_level(model, op, tau, opts, periods, per_decade, &nodes);
        change = if next == T::zero() { (next - prev).abs() } else { ((next - prev) / next).abs() };
        prev = next;
        if change <= opts.rel_tol {
            return Ok(next);
        }
    }
    Err(Error::NonConvergent { relative_change: change.as_f64() })
}

/// `(1 + exp(-X)) / 2`.
pub fn average_fidelity<T: Real>(x: T) -> T {
    (T::one() + (-x).exp()) / T::lit(2.0)
}

/// `1 - F_av = (1 - exp(-X)) / 2`, computed without cancellation.
pub fn infidelity<T: Real>(x: T) -> T {
    -(-x).exp_m1() / T::lit(2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfidelityPoint<T> {
    pub tau: T,
    pub op: QubitOperation,
    pub x: T,
    pub infidelity: T,
}

pub fn infidelity_curve<T: Real>(
    model: &PhaseNoiseModel<T>,
    op: QubitOperation,
    taus: &[T],
    opts: &IntegrationOptions<T>,
) -> Result<Vec<InfidelityPoint<T>>> {
    taus.par_iter()
        .map(|&tau| {
            let x = dephasing_integral(model, op, tau, opts)?;
            Ok(InfidelityPoint { tau, op, x, infidelity: infidelity(x) })
        })
        .collect()
}

/// Anchors of the measured source: -95 dBc/Hz at 10 kHz, -116 dBc/Hz at
/// 1 MHz, saturating at -120 dBc/Hz from 5 MHz.
pub fn measured_anchor_points<T: Real>() -> Vec<(T, T)> {
    vec![(T::lit(1e4), T::lit(-95.0)), (T::lit(1e6), T::lit(-116.0)), (T::lit(5e6), T::lit(-120.0))]
}

/// Noise falling at `slope_db_per_decade` from `l_ref` at `f_ref` over the
/// whole band `[f_lo, f_hi]`.
pub fn power_law_model<T: Real>(f_ref: T, l_ref: T, slope_db_per_decade: T, f_lo: T, f_hi: T) -> Result<PhaseNoiseModel<T>> {
    let at = |f: T| l_ref + slope_db_per_decade * (f / f_ref).log10();
    PhaseNoiseModel::from_points(&[(f_lo, at(f_lo)), (f_hi, at(f_hi))])
}
