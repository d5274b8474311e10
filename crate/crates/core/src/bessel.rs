//! Bessel functions of the first kind, integer order.
//!
//! Small arguments use the ascending power series; everything else uses
//! Miller's downward recurrence normalized with `J0 + 2 sum J_2k = 1`.

use crate::roots::{brent, RootOptions};
use crate::scalar::Real;

const SERIES_LIMIT: f64 = 1.0;

/// `J_n(x)`.
pub fn bessel_j<T: Real>(n: u32, x: T) -> T {
    let sign = if x < T::zero() && n % 2 == 1 { -T::one() } else { T::one() };
    let ax = x.abs();
    if ax == T::zero() {
        return if n == 0 { T::one() } else { T::zero() };
    }
    let v = if ax <= T::lit(SERIES_LIMIT) {
        series(n, ax)
    } else {
        miller(n, ax, n)[n as usize]
    };
    sign * v
}

/// `(J0(x), J1(x), J2(x))` from a single recurrence pass.
pub fn bessel_j012<T: Real>(x: T) -> (T, T, T) {
    let ax = x.abs();
    if ax == T::zero() {
        return (T::one(), T::zero(), T::zero());
    }
    let (j0, j1, j2) = if ax <= T::lit(SERIES_LIMIT) {
        (series(0, ax), series(1, ax), series(2, ax))
    } else {
        let v = miller(2, ax, 2);
        (v[0], v[1], v[2])
    };
    if x < T::zero() {
        (j0, -j1, j2)
    } else {
        (j0, j1, j2)
    }
}

fn series<T: Real>(n: u32, x: T) -> T {
    let half = x / T::lit(2.0);
    let mut term = T::one();
    for k in 1..=n {
        term = term * half / T::from_usize_lossy(k as usize);
    }
    let q = -(half * half);
    let mut sum = term;
    let mut k = 0usize;
    loop {
        k += 1;
        term = term * q / (T::from_usize_lossy(k) * T::from_usize_lossy(k + n as usize));
        sum = sum + term;
        if term.abs() <= T::epsilon() * sum.abs() || k > 200 {
            return sum;
        }
    }
}

/// Downward recurrence returning `J_0 .. J_keep` (inclusive) for `x > 0`.
fn miller<T: Real>(n: u32, x: T, keep: u32) -> Vec<T> {
    let big = x.to_f64().unwrap_or(0.0).max(n as f64);
    let mut start = (big + 16.0 + (60.0 * big).sqrt()) as u32;
    start += start % 2;
    let start = start.max(keep + 2);

    let rescale_at = T::max_value().sqrt().sqrt();
    let two_over_x = T::lit(2.0) / x;
    let mut out = vec![T::zero(); keep as usize + 1];
    let mut j_next = T::zero(); // J_{k+1}
    let mut j_k = T::min_positive_value().sqrt(); // J_start, arbitrary seed
    let mut norm = T::zero();
    let mut k = start;
    loop {
        if k <= keep {
            out[k as usize] = j_k;
        }
        if k % 2 == 0 && k > 0 {
            norm = norm + j_k + j_k;
        }
        if k == 0 {
            norm = norm + j_k;
            break;
        }
        let j_prev = T::from_usize_lossy(k as usize) * two_over_x * j_k - j_next;
        j_next = j_k;
        j_k = j_prev;
        k -= 1;
        if j_k.abs() > rescale_at {
            let s = T::one() / rescale_at;
            j_k = j_k * s;
            j_next = j_next * s;
            norm = norm * s;
            for v in out.iter_mut() {
                *v = *v * s;
            }
        }
    }
    for v in out.iter_mut() {
        *v = *v / norm;
    }
    out
}

/// Location and value of the global maximum of `|J1|`, i.e. the first
/// stationary point of `J1` (where `x J0(x) = J1(x)`).
pub fn j1_max<T: Real>() -> (T, T) {
    let x = brent(
        |x: T| {
            let (j0, j1, _) = bessel_j012(x);
            x * j0 - j1
        },
        T::lit(1.5),
        T::lit(2.2),
        RootOptions::default(),
    )
    .expect("first stationary point of J1 lies in [1.5, 2.2]");
    (x, bessel_j(1, x))
}
