//! Exact phases `e^{2πi·num/den}` kept as reduced fractions in `[0, 1)`.

use num_complex::Complex64;
use std::fmt;
use std::ops::{Add, Neg, Sub};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RationalPhase {
    num: u64,
    den: u64,
}

pub(crate) fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

pub(crate) fn lcm(a: u64, b: u64) -> u64 {
    if a == 0 || b == 0 {
        return 0;
    }
    a / gcd(a, b) * b
}

impl RationalPhase {
    pub const ZERO: RationalPhase = RationalPhase { num: 0, den: 1 };

    /// Phase `num/den mod 1`; `den` must be positive.
    pub fn new(num: i128, den: u64) -> Self {
        assert!(den > 0, "phase denominator must be positive");
        let d = den as i128;
        let n = num.rem_euclid(d) as u64;
        let g = gcd(n, den);
        RationalPhase { num: n / g, den: den / g }
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    /// Value as a fraction of a full turn, in `[0, 1)`.
    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn to_complex(&self) -> Complex64 {
        Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * self.as_f64())
    }

    pub fn scale(&self, k: i128) -> Self {
        RationalPhase::new(self.num as i128 * k, self.den)
    }

    /// Snap a unit-modulus complex number to the nearest multiple of `1/den`.
    /// Returns `None` if the modulus or the snapping residual exceeds `tol`.
    pub fn from_complex(z: Complex64, den: u64, tol: f64) -> Option<Self> {
        if (z.norm() - 1.0).abs() > tol {
            return None;
        }
        let turns = z.arg() / (2.0 * std::f64::consts::PI);
        let k = (turns * den as f64).round();
        let p = RationalPhase::new(k as i128, den);
        if (p.to_complex() - z).norm() > tol {
            return None;
        }
        Some(p)
    }
}

impl Add for RationalPhase {
    type Output = RationalPhase;
    fn add(self, o: RationalPhase) -> RationalPhase {
        let den = lcm(self.den, o.den);
        let a = self.num as i128 * (den / self.den) as i128;
        let b = o.num as i128 * (den / o.den) as i128;
        RationalPhase::new(a + b, den)
    }
}

impl Neg for RationalPhase {
    type Output = RationalPhase;
    fn neg(self) -> RationalPhase {
        RationalPhase::new(-(self.num as i128), self.den)
    }
}

impl Sub for RationalPhase {
    type Output = RationalPhase;
    fn sub(self, o: RationalPhase) -> RationalPhase {
        self + (-o)
    }
}

impl std::iter::Sum for RationalPhase {
    fn sum<I: Iterator<Item = RationalPhase>>(iter: I) -> Self {
        iter.fold(RationalPhase::ZERO, |a, b| a + b)
    }
}

impl fmt::Display for RationalPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}
