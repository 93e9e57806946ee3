//! Exact coefficients: rationals, and rational functions in the field
//! generator `t` stored as coprime numerator/denominator with a monic
//! denominator.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Dense univariate polynomial in `t` over the rationals, lowest degree first.
/// The coefficient vector never has trailing zeros; the zero polynomial is empty.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct UniPoly(Vec<BigRational>);

impl UniPoly {
    pub fn zero() -> Self {
        UniPoly(Vec::new())
    }

    pub fn constant(c: BigRational) -> Self {
        let mut p = UniPoly(vec![c]);
        p.trim();
        p
    }

    /// The generator `t`.
    pub fn t() -> Self {
        UniPoly(vec![BigRational::zero(), BigRational::one()])
    }

    pub fn from_coeffs(coeffs: Vec<BigRational>) -> Self {
        let mut p = UniPoly(coeffs);
        p.trim();
        p
    }

    fn trim(&mut self) {
        while self.0.last().is_some_and(|c| c.is_zero()) {
            self.0.pop();
        }
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    /// Degree, with the zero polynomial reported as degree 0.
    pub fn degree(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn is_constant(&self) -> bool {
        self.0.len() <= 1
    }

    pub fn constant_term(&self) -> BigRational {
        self.0.first().cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn leading(&self) -> BigRational {
        self.0.last().cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        if c.is_zero() {
            return UniPoly::zero();
        }
        UniPoly(self.0.iter().map(|a| a * c).collect())
    }

    pub fn derivative(&self) -> Self {
        let coeffs = self
            .0
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, c)| c * BigRational::from_integer(BigInt::from(i)))
            .collect();
        UniPoly::from_coeffs(coeffs)
    }

    pub fn eval(&self, at: &BigRational) -> BigRational {
        let mut acc = BigRational::zero();
        for c in self.0.iter().rev() {
            acc = acc * at + c;
        }
        acc
    }

    /// Quotient and remainder; panics on division by zero.
    pub fn div_rem(&self, d: &UniPoly) -> (UniPoly, UniPoly) {
        assert!(!d.is_zero(), "division by the zero polynomial");
        let mut rem = self.0.clone();
        let dd = d.degree();
        let lead = d.leading();
        if rem.len() < d.0.len() {
            return (UniPoly::zero(), self.clone());
        }
        let mut quot = vec![BigRational::zero(); rem.len() - dd];
        for pos in (0..quot.len()).rev() {
            let c = &rem[pos + dd] / &lead;
            if !c.is_zero() {
                for (j, dc) in d.0.iter().enumerate() {
                    rem[pos + j] = &rem[pos + j] - &c * dc;
                }
            }
            quot[pos] = c;
        }
        (UniPoly::from_coeffs(quot), UniPoly::from_coeffs(rem))
    }

    pub fn monic(&self) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        let inv = self.leading().recip();
        self.scale(&inv)
    }

    /// Monic greatest common divisor (zero if both are zero).
    pub fn gcd(a: &UniPoly, b: &UniPoly) -> UniPoly {
        let (mut x, mut y) = (a.clone(), b.clone());
        while !y.is_zero() {
            let (_, r) = x.div_rem(&y);
            x = y;
            y = r;
        }
        x.monic()
    }
}

impl Add for &UniPoly {
    type Output = UniPoly;
    fn add(self, rhs: &UniPoly) -> UniPoly {
        let n = self.0.len().max(rhs.0.len());
        let zero = BigRational::zero();
        let coeffs = (0..n)
            .map(|i| self.0.get(i).unwrap_or(&zero) + rhs.0.get(i).unwrap_or(&zero))
            .collect();
        UniPoly::from_coeffs(coeffs)
    }
}

impl Sub for &UniPoly {
    type Output = UniPoly;
    fn sub(self, rhs: &UniPoly) -> UniPoly {
        let n = self.0.len().max(rhs.0.len());
        let zero = BigRational::zero();
        let coeffs = (0..n)
            .map(|i| self.0.get(i).unwrap_or(&zero) - rhs.0.get(i).unwrap_or(&zero))
            .collect();
        UniPoly::from_coeffs(coeffs)
    }
}

impl Mul for &UniPoly {
    type Output = UniPoly;
    fn mul(self, rhs: &UniPoly) -> UniPoly {
        if self.is_zero() || rhs.is_zero() {
            return UniPoly::zero();
        }
        let mut out = vec![BigRational::zero(); self.0.len() + rhs.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in rhs.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        UniPoly::from_coeffs(out)
    }
}

/// A rational function `num/den` in `t`, kept coprime with monic `den`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RatFunc {
    num: UniPoly,
    den: UniPoly,
}

impl RatFunc {
    pub fn new(num: UniPoly, den: UniPoly) -> Self {
        assert!(!den.is_zero(), "zero denominator");
        if num.is_zero() {
            return RatFunc {
                num,
                den: UniPoly::constant(BigRational::one()),
            };
        }
        let g = UniPoly::gcd(&num, &den);
        let (num, _) = num.div_rem(&g);
        let (den, _) = den.div_rem(&g);
        let lc = den.leading().recip();
        RatFunc {
            num: num.scale(&lc),
            den: den.scale(&lc),
        }
    }

    pub fn from_poly(num: UniPoly) -> Self {
        RatFunc {
            num,
            den: UniPoly::constant(BigRational::one()),
        }
    }

    pub fn numer(&self) -> &UniPoly {
        &self.num
    }

    pub fn denom(&self) -> &UniPoly {
        &self.den
    }

    pub fn is_polynomial(&self) -> bool {
        self.den.is_constant()
    }
}

/// A coefficient in ℚ or ℚ(t). Constant rational functions are always
/// normalized to the `Rational` variant so equality stays structural.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Coeff {
    Rational(BigRational),
    Function(RatFunc),
}

impl Coeff {
    pub fn zero() -> Self {
        Coeff::Rational(BigRational::zero())
    }

    pub fn one() -> Self {
        Coeff::Rational(BigRational::one())
    }

    pub fn from_i64(v: i64) -> Self {
        Coeff::Rational(BigRational::from_integer(BigInt::from(v)))
    }

    pub fn t() -> Self {
        Coeff::Function(RatFunc::from_poly(UniPoly::t()))
    }

    pub fn from_poly(p: UniPoly) -> Self {
        Coeff::from_ratfunc(RatFunc::from_poly(p))
    }

    fn from_ratfunc(f: RatFunc) -> Self {
        if f.num.is_constant() && f.den.is_constant() {
            Coeff::Rational(f.num.constant_term())
        } else {
            Coeff::Function(f)
        }
    }

    fn as_ratfunc(&self) -> RatFunc {
        match self {
            Coeff::Rational(q) => RatFunc::from_poly(UniPoly::constant(q.clone())),
            Coeff::Function(f) => f.clone(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Coeff::Rational(q) if q.is_zero())
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Coeff::Rational(q) if q.is_one())
    }

    pub fn is_rational(&self) -> bool {
        matches!(self, Coeff::Rational(_))
    }

    pub fn as_rational(&self) -> Option<&BigRational> {
        match self {
            Coeff::Rational(q) => Some(q),
            Coeff::Function(_) => None,
        }
    }

    /// True when the coefficient prints with a leading minus sign.
    pub fn is_negative(&self) -> bool {
        match self {
            Coeff::Rational(q) => q.is_negative(),
            Coeff::Function(f) => f.num.leading().is_negative(),
        }
    }

    /// Degree in `t` of numerator plus denominator; 0 for rationals.
    pub fn t_degree(&self) -> usize {
        match self {
            Coeff::Rational(_) => 0,
            Coeff::Function(f) => f.num.degree() + f.den.degree(),
        }
    }

    /// The field derivation: d/dt, which is zero on rationals.
    pub fn derivative(&self) -> Coeff {
        match self {
            Coeff::Rational(_) => Coeff::zero(),
            Coeff::Function(f) => {
                // (n/d)' = (n'd - nd')/d^2
                let top = &(&f.num.derivative() * &f.den) - &(&f.num * &f.den.derivative());
                Coeff::from_ratfunc(RatFunc::new(top, &f.den * &f.den))
            }
        }
    }

    pub fn inv(&self) -> Coeff {
        match self {
            Coeff::Rational(q) => {
                assert!(!q.is_zero(), "inverse of zero coefficient");
                Coeff::Rational(q.recip())
            }
            Coeff::Function(f) => Coeff::from_ratfunc(RatFunc::new(f.den.clone(), f.num.clone())),
        }
    }

    pub fn div(&self, rhs: &Coeff) -> Coeff {
        match (self, rhs) {
            (Coeff::Rational(a), Coeff::Rational(b)) => Coeff::Rational(a / b),
            _ => self * &rhs.inv(),
        }
    }

    /// Value at `t = at`; `None` on a pole.
    pub fn eval(&self, at: Option<&BigRational>) -> Option<BigRational> {
        match self {
            Coeff::Rational(q) => Some(q.clone()),
            Coeff::Function(f) => {
                let at = at?;
                let d = f.den.eval(at);
                if d.is_zero() {
                    None
                } else {
                    Some(f.num.eval(at) / d)
                }
            }
        }
    }
}

impl Add for &Coeff {
    type Output = Coeff;
    fn add(self, rhs: &Coeff) -> Coeff {
        match (self, rhs) {
            (Coeff::Rational(a), Coeff::Rational(b)) => Coeff::Rational(a + b),
            _ => {
                let (a, b) = (self.as_ratfunc(), rhs.as_ratfunc());
                if a.den == b.den {
                    return Coeff::from_ratfunc(RatFunc::new(&a.num + &b.num, a.den));
                }
                let num = &(&a.num * &b.den) + &(&b.num * &a.den);
                Coeff::from_ratfunc(RatFunc::new(num, &a.den * &b.den))
            }
        }
    }
}

impl Sub for &Coeff {
    type Output = Coeff;
    fn sub(self, rhs: &Coeff) -> Coeff {
        self + &(-rhs)
    }
}

impl Mul for &Coeff {
    type Output = Coeff;
    fn mul(self, rhs: &Coeff) -> Coeff {
        match (self, rhs) {
            (Coeff::Rational(a), Coeff::Rational(b)) => Coeff::Rational(a * b),
            (Coeff::Rational(a), Coeff::Function(f)) | (Coeff::Function(f), Coeff::Rational(a)) => {
                if a.is_zero() {
                    return Coeff::zero();
                }
                Coeff::Function(RatFunc {
                    num: f.num.scale(a),
                    den: f.den.clone(),
                })
            }
            (Coeff::Function(a), Coeff::Function(b)) => {
                Coeff::from_ratfunc(RatFunc::new(&a.num * &b.num, &a.den * &b.den))
            }
        }
    }
}

impl Neg for &Coeff {
    type Output = Coeff;
    fn neg(self) -> Coeff {
        match self {
            Coeff::Rational(q) => Coeff::Rational(-q),
            Coeff::Function(f) => Coeff::Function(RatFunc {
                num: f.num.scale(&-BigRational::one()),
                den: f.den.clone(),
            }),
        }
    }
}

pub(crate) fn fmt_rational(q: &BigRational, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if q.denom().is_one() {
        write!(f, "{}", q.numer())
    } else {
        write!(f, "{}/{}", q.numer(), q.denom())
    }
}

impl fmt::Display for UniPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, c) in self.0.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let neg = c.is_negative();
            let mag = c.abs();
            if first {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { "-" } else { "+" })?;
            }
            first = false;
            match i {
                0 => fmt_rational(&mag, f)?,
                _ => {
                    if !mag.is_one() {
                        fmt_rational(&mag, f)?;
                        write!(f, "*")?;
                    }
                    if i == 1 {
                        write!(f, "t")?;
                    } else {
                        write!(f, "t^{i}")?;
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn poly(c: &[i64]) -> UniPoly {
        UniPoly::from_coeffs(c.iter().map(|&v| q(v, 1)).collect())
    }

    #[test]
    fn gcd_is_monic() {
        // (t-1)(t+2) and (t-1)(t+5)
        let a = &poly(&[-1, 1]) * &poly(&[2, 1]);
        let b = &poly(&[-1, 1]) * &poly(&[5, 1]);
        assert_eq!(UniPoly::gcd(&a.scale(&q(3, 1)), &b), poly(&[-1, 1]));
    }

    #[test]
    fn ratfunc_normalizes() {
        let num = &poly(&[-1, 1]) * &poly(&[0, 2]);
        let den = &poly(&[-1, 1]) * &poly(&[4]);
        let f = RatFunc::new(num, den);
        assert_eq!(f.numer(), &UniPoly::from_coeffs(vec![q(0, 1), q(1, 2)]));
        assert_eq!(f.denom(), &poly(&[1]));
    }

    #[test]
    fn constant_functions_collapse() {
        let t = Coeff::t();
        let diff = &t - &t;
        assert!(diff.is_zero());
        let ratio = t.div(&t);
        assert!(ratio.is_one());
        assert_eq!(t.derivative(), Coeff::one());
    }

    #[test]
    fn quotient_rule() {
        // d/dt (1/t) = -1/t^2
        let inv = Coeff::t().inv();
        let d = inv.derivative();
        let expected = -&(&inv * &inv);
        assert_eq!(d, expected);
    }
}
