//! Closed real intervals with outward rounding.
//!
//! Addition, subtraction, multiplication, division and square root use
//! error-free transformations to round each bound in the correct direction,
//! so exactly representable results stay exact (`[-1, 2]^2` is `[0, 4]`).
//! Library transcendentals are widened by a few ulps.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::EvalError;

/// A closed interval `[lo, hi]` with `lo <= hi`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

const TRANSCENDENTAL_ULPS: u32 = 2;

#[allow(clippy::should_implement_trait)]
impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "inverted interval [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn point(v: f64) -> Self {
        Interval { lo: v, hi: v }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    /// Largest absolute value in the interval.
    pub fn mag(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn is_subset_of(&self, other: &Interval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval::new(self.lo.min(other.lo), self.hi.max(other.hi))
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    fn checked(lo: f64, hi: f64) -> Result<Interval, EvalError> {
        if lo.is_nan() || hi.is_nan() {
            Err(EvalError::NotANumber)
        } else {
            Ok(Interval { lo, hi })
        }
    }

    pub fn add(self, rhs: Interval) -> Interval {
        Interval {
            lo: add_down(self.lo, rhs.lo),
            hi: add_up(self.hi, rhs.hi),
        }
    }

    pub fn sub(self, rhs: Interval) -> Interval {
        Interval {
            lo: add_down(self.lo, -rhs.hi),
            hi: add_up(self.hi, -rhs.lo),
        }
    }

    pub fn neg(self) -> Interval {
        Interval {
            lo: -self.hi,
            hi: -self.lo,
        }
    }

    pub fn mul(self, rhs: Interval) -> Interval {
        let pairs = [
            (self.lo, rhs.lo),
            (self.lo, rhs.hi),
            (self.hi, rhs.lo),
            (self.hi, rhs.hi),
        ];
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (a, b) in pairs {
            lo = lo.min(mul_down(a, b));
            hi = hi.max(mul_up(a, b));
        }
        Interval { lo, hi }
    }

    pub fn div(self, rhs: Interval) -> Result<Interval, EvalError> {
        if rhs.contains(0.0) {
            return Err(EvalError::DivisionByZero);
        }
        let pairs = [
            (self.lo, rhs.lo),
            (self.lo, rhs.hi),
            (self.hi, rhs.lo),
            (self.hi, rhs.hi),
        ];
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (a, b) in pairs {
            lo = lo.min(div_down(a, b));
            hi = hi.max(div_up(a, b));
        }
        Interval::checked(lo, hi)
    }

    /// Exact image of `x^k` over the interval (up to rounding).
    pub fn powi(self, k: i32) -> Result<Interval, EvalError> {
        if k == 0 {
            return Ok(Interval::point(1.0));
        }
        if k < 0 {
            let base = self.powi(-k)?;
            return Interval::point(1.0).div(base);
        }
        let k = k as u32;
        if k % 2 == 1 {
            return Ok(Interval {
                lo: odd_pow_down(self.lo, k),
                hi: odd_pow_up(self.hi, k),
            });
        }
        let (small, large) = if self.lo >= 0.0 {
            (self.lo, self.hi)
        } else if self.hi <= 0.0 {
            (-self.hi, -self.lo)
        } else {
            (0.0, self.mag())
        };
        Ok(Interval {
            lo: pow_nonneg_down(small, k),
            hi: pow_nonneg_up(large, k),
        })
    }

    pub fn sqrt(self) -> Result<Interval, EvalError> {
        if self.lo < 0.0 {
            return Err(EvalError::SqrtDomain);
        }
        Ok(Interval {
            lo: sqrt_down(self.lo),
            hi: sqrt_up(self.hi),
        })
    }

    pub fn exp(self) -> Interval {
        Interval {
            lo: widen_down(self.lo.exp(), TRANSCENDENTAL_ULPS).max(0.0),
            hi: widen_up(self.hi.exp(), TRANSCENDENTAL_ULPS),
        }
    }

    pub fn ln(self) -> Result<Interval, EvalError> {
        if self.lo <= 0.0 {
            return Err(EvalError::LogDomain);
        }
        Ok(Interval {
            lo: widen_down(self.lo.ln(), TRANSCENDENTAL_ULPS),
            hi: widen_up(self.hi.ln(), TRANSCENDENTAL_ULPS),
        })
    }

    pub fn sin(self) -> Interval {
        // sin(x) = cos(x - pi/2); the shift is widened so the enclosure stays sound.
        let shifted = Interval {
            lo: widen_down(self.lo - FRAC_PI_2, 1),
            hi: widen_up(self.hi - FRAC_PI_2, 1),
        };
        shifted.cos()
    }

    /// Monotone-piece enclosure of cosine.
    pub fn cos(self) -> Interval {
        if !(self.lo.is_finite() && self.hi.is_finite()) || self.width() >= 2.0 * PI {
            return Interval::new(-1.0, 1.0);
        }
        let c_lo = self.lo.cos();
        let c_hi = self.hi.cos();
        let mut lo = widen_down(c_lo.min(c_hi), TRANSCENDENTAL_ULPS);
        let mut hi = widen_up(c_lo.max(c_hi), TRANSCENDENTAL_ULPS);
        // Maxima of cos sit at 2k*pi, minima at (2k+1)*pi. The comparison is
        // made conservatively: a critical point within one ulp of an endpoint
        // counts as inside.
        let first_max = (self.lo / (2.0 * PI)).floor() - 1.0;
        let mut k = first_max;
        while 2.0 * PI * k <= self.hi + 1e-12 {
            let crest = 2.0 * PI * k;
            if crest >= self.lo - 1e-12 && crest <= self.hi + 1e-12 {
                hi = 1.0;
            }
            let trough = crest + PI;
            if trough >= self.lo - 1e-12 && trough <= self.hi + 1e-12 {
                lo = -1.0;
            }
            k += 1.0;
        }
        Interval {
            lo: lo.max(-1.0),
            hi: hi.min(1.0),
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

fn widen_down(v: f64, ulps: u32) -> f64 {
    (0..ulps).fold(v, |acc, _| acc.next_down())
}

fn widen_up(v: f64, ulps: u32) -> f64 {
    (0..ulps).fold(v, |acc, _| acc.next_up())
}

/// Rounding error of `a + b` via TwoSum.
fn add_err(a: f64, b: f64, s: f64) -> f64 {
    let bb = s - a;
    (a - (s - bb)) + (b - bb)
}

pub(crate) fn add_down(a: f64, b: f64) -> f64 {
    let s = a + b;
    if !s.is_finite() {
        return s;
    }
    if add_err(a, b, s) < 0.0 {
        s.next_down()
    } else {
        s
    }
}

pub(crate) fn add_up(a: f64, b: f64) -> f64 {
    let s = a + b;
    if !s.is_finite() {
        return s;
    }
    if add_err(a, b, s) > 0.0 {
        s.next_up()
    } else {
        s
    }
}

pub(crate) fn mul_down(a: f64, b: f64) -> f64 {
    let p = a * b;
    if !p.is_finite() || p == 0.0 && (a == 0.0 || b == 0.0) {
        return p;
    }
    if a.mul_add(b, -p) < 0.0 || p == 0.0 {
        p.next_down()
    } else {
        p
    }
}

pub(crate) fn mul_up(a: f64, b: f64) -> f64 {
    let p = a * b;
    if !p.is_finite() || p == 0.0 && (a == 0.0 || b == 0.0) {
        return p;
    }
    if a.mul_add(b, -p) > 0.0 || p == 0.0 {
        p.next_up()
    } else {
        p
    }
}

fn div_down(a: f64, b: f64) -> f64 {
    let q = a / b;
    if !q.is_finite() || a == 0.0 {
        return q;
    }
    // residual r = a - q*b; the true quotient is q + r/b
    let r = (-q).mul_add(b, a);
    if r / b < 0.0 || q == 0.0 {
        q.next_down()
    } else {
        q
    }
}

fn div_up(a: f64, b: f64) -> f64 {
    let q = a / b;
    if !q.is_finite() || a == 0.0 {
        return q;
    }
    let r = (-q).mul_add(b, a);
    if r / b > 0.0 || q == 0.0 {
        q.next_up()
    } else {
        q
    }
}

fn sqrt_down(x: f64) -> f64 {
    let s = x.sqrt();
    if (-s).mul_add(s, x) < 0.0 {
        s.next_down().max(0.0)
    } else {
        s
    }
}

fn sqrt_up(x: f64) -> f64 {
    let s = x.sqrt();
    if (-s).mul_add(s, x) > 0.0 {
        s.next_up()
    } else {
        s
    }
}

fn pow_nonneg_down(x: f64, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, _| mul_down(acc, x))
}

fn pow_nonneg_up(x: f64, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, _| mul_up(acc, x))
}

fn odd_pow_down(x: f64, k: u32) -> f64 {
    if x >= 0.0 {
        pow_nonneg_down(x, k)
    } else {
        -pow_nonneg_up(-x, k)
    }
}

fn odd_pow_up(x: f64, k: u32) -> f64 {
    if x >= 0.0 {
        pow_nonneg_up(x, k)
    } else {
        -pow_nonneg_down(-x, k)
    }
}
