//! Outward-rounded interval arithmetic.
//!
//! IEEE-754 binary operations and `sqrt` round to nearest, so the true result
//! of any single operation lies within one ulp of the computed one. Every
//! operation here therefore widens its endpoint computations by one ulp in
//! each direction, which makes enclosures rigorous without touching the FPU
//! rounding mode. Inputs are treated as exact.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo.is_finite() && hi.is_finite() && lo <= hi);
        Interval { lo, hi }
    }

    /// The degenerate interval `[x, x]`; `x` is taken as exact.
    pub fn point(x: f64) -> Self {
        debug_assert!(x.is_finite());
        Interval { lo: x, hi: x }
    }

    pub fn zero() -> Self {
        Interval { lo: 0.0, hi: 0.0 }
    }

    pub fn lower(&self) -> f64 {
        self.lo
    }

    pub fn upper(&self) -> f64 {
        self.hi
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn is_exact_zero(&self) -> bool {
        self.lo == 0.0 && self.hi == 0.0
    }

    fn widened(lo: f64, hi: f64) -> Self {
        Interval {
            lo: lo.next_down(),
            hi: hi.next_up(),
        }
    }

    /// Tight square: non-negative even when the interval straddles zero.
    pub fn square(&self) -> Self {
        if self.is_exact_zero() {
            return Interval::zero();
        }
        let a = self.lo * self.lo;
        let b = self.hi * self.hi;
        if self.lo <= 0.0 && self.hi >= 0.0 {
            Interval {
                lo: 0.0,
                hi: a.max(b).next_up(),
            }
        } else {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            Interval {
                lo: lo.next_down().max(0.0),
                hi: hi.next_up(),
            }
        }
    }

    /// Enclosure of the square root; requires a non-negative lower bound.
    pub fn sqrt(&self) -> Self {
        debug_assert!(self.lo >= 0.0);
        Interval {
            lo: self.lo.sqrt().next_down().max(0.0),
            hi: self.hi.sqrt().next_up(),
        }
    }

    /// Reciprocal of an interval that does not contain zero.
    pub fn recip(&self) -> Self {
        assert!(
            self.lo > 0.0 || self.hi < 0.0,
            "reciprocal of an interval containing zero"
        );
        Interval::widened(1.0 / self.hi, 1.0 / self.lo)
    }

    pub fn abs(&self) -> Self {
        if self.lo >= 0.0 {
            *self
        } else if self.hi <= 0.0 {
            -*self
        } else {
            Interval {
                lo: 0.0,
                hi: self.hi.max(-self.lo),
            }
        }
    }
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, rhs: Interval) -> Interval {
        // Adding an exact zero is exact; skipping the widening keeps unit
        // vectors and sparse states tight.
        if self.is_exact_zero() {
            return rhs;
        }
        if rhs.is_exact_zero() {
            return self;
        }
        Interval::widened(self.lo + rhs.lo, self.hi + rhs.hi)
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, rhs: Interval) -> Interval {
        if rhs.is_exact_zero() {
            return self;
        }
        if self.is_exact_zero() {
            return -rhs;
        }
        Interval::widened(self.lo - rhs.hi, self.hi - rhs.lo)
    }
}

impl Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        // Sign flip is exact.
        Interval {
            lo: -self.hi,
            hi: -self.lo,
        }
    }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, rhs: Interval) -> Interval {
        if self.is_exact_zero() || rhs.is_exact_zero() {
            return Interval::zero();
        }
        let p = [
            self.lo * rhs.lo,
            self.lo * rhs.hi,
            self.hi * rhs.lo,
            self.hi * rhs.hi,
        ];
        let lo = p.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Interval::widened(lo, hi)
    }
}

impl Div for Interval {
    type Output = Interval;
    fn div(self, rhs: Interval) -> Interval {
        self * rhs.recip()
    }
}

/// Rectangular complex interval: independent enclosures of the real and
/// imaginary parts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComplexInterval {
    pub re: Interval,
    pub im: Interval,
}

impl ComplexInterval {
    pub fn point(re: f64, im: f64) -> Self {
        ComplexInterval {
            re: Interval::point(re),
            im: Interval::point(im),
        }
    }

    pub fn zero() -> Self {
        ComplexInterval {
            re: Interval::zero(),
            im: Interval::zero(),
        }
    }

    pub fn real(r: Interval) -> Self {
        ComplexInterval {
            re: r,
            im: Interval::zero(),
        }
    }

    pub fn conj(&self) -> Self {
        ComplexInterval {
            re: self.re,
            im: -self.im,
        }
    }

    /// Enclosure of `|z|^2`.
    pub fn norm_sqr(&self) -> Interval {
        self.re.square() + self.im.square()
    }

    pub fn is_exact_zero(&self) -> bool {
        self.re == Interval::zero() && self.im == Interval::zero()
    }
}

impl Add for ComplexInterval {
    type Output = ComplexInterval;
    fn add(self, rhs: ComplexInterval) -> ComplexInterval {
        ComplexInterval {
            re: self.re + rhs.re,
            im: self.im + rhs.im,
        }
    }
}

impl Mul for ComplexInterval {
    type Output = ComplexInterval;
    fn mul(self, rhs: ComplexInterval) -> ComplexInterval {
        ComplexInterval {
            re: self.re * rhs.re - self.im * rhs.im,
            im: self.re * rhs.im + self.im * rhs.re,
        }
    }
}
