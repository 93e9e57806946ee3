//! Sparse differential polynomials in jet variables.
//!
//! A [`DiffPoly`] is a map from canonical monomials to nonzero [`Coeff`]s.
//! Monomials are ordered lexicographically with the smaller jet variable
//! (declared index, then derivative order) as the more significant one, which
//! is a multiplicative order suitable for long division.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, RwLock};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use smallvec::SmallVec;

use crate::coeff::Coeff;

/// Index of a variable in a system's alphabet.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub u32);

/// The `deriv`-th derivative of a variable.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct JetVar {
    pub var: VarId,
    pub deriv: u32,
}

impl JetVar {
    pub fn new(var: VarId, deriv: u32) -> Self {
        JetVar { var, deriv }
    }

    pub fn shifted(self, by: u32) -> Self {
        JetVar {
            var: self.var,
            deriv: self.deriv + by,
        }
    }
}

/// A power product of jet variables, sorted ascending by variable with
/// positive exponents.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Monomial(SmallVec<[(JetVar, u32); 4]>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(SmallVec::new())
    }

    pub fn var(v: JetVar) -> Self {
        let mut s = SmallVec::new();
        s.push((v, 1));
        Monomial(s)
    }

    /// Builds a canonical monomial from arbitrary factors.
    pub fn from_factors(factors: impl IntoIterator<Item = (JetVar, u32)>) -> Self {
        let mut map: BTreeMap<JetVar, u32> = BTreeMap::new();
        for (v, e) in factors {
            if e > 0 {
                *map.entry(v).or_insert(0) += e;
            }
        }
        Monomial(map.into_iter().collect())
    }

    pub fn factors(&self) -> &[(JetVar, u32)] {
        &self.0
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|(_, e)| e).sum()
    }

    pub fn exponent(&self, v: JetVar) -> u32 {
        self.0
            .binary_search_by(|(w, _)| w.cmp(&v))
            .map(|i| self.0[i].1)
            .unwrap_or(0)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let (a, b) = (&self.0, &other.0);
        let mut out = SmallVec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((a[i].0, a[i].1 + b[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Monomial(out)
    }

    /// `self / other` when `other` divides `self`.
    pub fn div(&self, other: &Monomial) -> Option<Monomial> {
        let mut out = SmallVec::new();
        let mut j = 0;
        for &(v, e) in &self.0 {
            if j < other.0.len() && other.0[j].0 == v {
                let d = other.0[j].1;
                if d > e {
                    return None;
                }
                if e > d {
                    out.push((v, e - d));
                }
                j += 1;
            } else if j < other.0.len() && other.0[j].0 < v {
                return None;
            } else {
                out.push((v, e));
            }
        }
        if j < other.0.len() {
            return None;
        }
        Some(Monomial(out))
    }

    /// The monomial with one power of `v` removed, with the old exponent.
    fn without_one(&self, v: JetVar) -> Option<(Monomial, u32)> {
        let idx = self.0.binary_search_by(|(w, _)| w.cmp(&v)).ok()?;
        let e = self.0[idx].1;
        let mut out = self.0.clone();
        if e == 1 {
            out.remove(idx);
        } else {
            out[idx].1 -= 1;
        }
        Some((Monomial(out), e))
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        for (a, b) in self.0.iter().zip(other.0.iter()) {
            match a.0.cmp(&b.0) {
                // `self` holds a more significant variable that `other` lacks.
                Ordering::Less => return Ordering::Greater,
                Ordering::Greater => return Ordering::Less,
                Ordering::Equal => match a.1.cmp(&b.1) {
                    Ordering::Equal => {}
                    ord => return ord,
                },
            }
        }
        self.0.len().cmp(&other.0.len())
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Exact values for jet variables and the field generator.
#[derive(Clone, Debug, Default)]
pub struct Assignment {
    pub values: HashMap<JetVar, BigRational>,
    pub t: Option<BigRational>,
}

impl Assignment {
    pub fn get(&self, v: JetVar) -> Option<&BigRational> {
        self.values.get(&v)
    }

    pub fn set(&mut self, v: JetVar, value: BigRational) {
        self.values.insert(v, value);
    }
}

/// Why a polynomial could not be evaluated.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EvalError {
    Uncovered(JetVar),
    Pole,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct DiffPoly {
    terms: BTreeMap<Monomial, Coeff>,
}

impl DiffPoly {
    pub fn zero() -> Self {
        DiffPoly::default()
    }

    pub fn one() -> Self {
        DiffPoly::constant(Coeff::one())
    }

    pub fn constant(c: Coeff) -> Self {
        DiffPoly::term(c, Monomial::one())
    }

    pub fn from_i64(v: i64) -> Self {
        DiffPoly::constant(Coeff::from_i64(v))
    }

    pub fn var(v: JetVar) -> Self {
        DiffPoly::term(Coeff::one(), Monomial::var(v))
    }

    pub fn term(c: Coeff, m: Monomial) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        DiffPoly { terms }
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Monomial, Coeff)>) -> Self {
        let mut p = DiffPoly::zero();
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    fn add_term(&mut self, m: Monomial, c: Coeff) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(slot) => {
                slot.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut slot) => {
                let sum = slot.get() + &c;
                if sum.is_zero() {
                    slot.remove();
                } else {
                    *slot.get_mut() = sum;
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(Monomial::is_one)
    }

    /// The constant value if the polynomial has no variables.
    pub fn as_constant(&self) -> Option<Coeff> {
        match self.terms.len() {
            0 => Some(Coeff::zero()),
            1 => self.terms.get(&Monomial::one()).cloned(),
            _ => None,
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms in ascending monomial order.
    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial, &Coeff)> {
        self.terms.iter()
    }

    pub fn coeff(&self, m: &Monomial) -> Coeff {
        self.terms.get(m).cloned().unwrap_or_else(Coeff::zero)
    }

    pub fn leading(&self) -> Option<(&Monomial, &Coeff)> {
        self.terms.iter().next_back()
    }

    pub fn scale(&self, c: &Coeff) -> DiffPoly {
        if c.is_zero() {
            return DiffPoly::zero();
        }
        DiffPoly {
            terms: self.terms.iter().map(|(m, a)| (m.clone(), a * c)).collect(),
        }
    }

    pub fn mul_term(&self, c: &Coeff, mono: &Monomial) -> DiffPoly {
        if c.is_zero() {
            return DiffPoly::zero();
        }
        // Multiplying by a monomial preserves the order, so the map can be rebuilt in sequence.
        DiffPoly {
            terms: self
                .terms
                .iter()
                .map(|(m, a)| (m.mul(mono), a * c))
                .collect(),
        }
    }

    pub fn pow(&self, e: u32) -> DiffPoly {
        let mut acc = DiffPoly::one();
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    /// Total degree in the jet variables (0 for the zero polynomial).
    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    /// Largest degree in `t` over the coefficients.
    pub fn t_degree(&self) -> usize {
        self.terms.values().map(Coeff::t_degree).max().unwrap_or(0)
    }

    pub fn vars(&self) -> BTreeSet<JetVar> {
        self.terms
            .keys()
            .flat_map(|m| m.factors().iter().map(|(v, _)| *v))
            .collect()
    }

    /// Highest derivative order of any variable accepted by `filter`.
    pub fn order_where(&self, filter: impl Fn(VarId) -> bool) -> Option<u32> {
        self.terms
            .keys()
            .flat_map(|m| m.factors().iter())
            .filter(|(v, _)| filter(v.var))
            .map(|(v, _)| v.deriv)
            .max()
    }

    /// Highest derivative order, of `base` only when given; `None` means absent.
    pub fn order_of(&self, base: Option<VarId>) -> Option<u32> {
        self.order_where(|v| base.is_none_or(|b| b == v))
    }

    pub fn partial(&self, v: JetVar) -> DiffPoly {
        let mut out = DiffPoly::zero();
        for (m, c) in &self.terms {
            if let Some((rest, e)) = m.without_one(v) {
                out.add_term(rest, c * &Coeff::from_i64(e as i64));
            }
        }
        out
    }

    /// δ(p) + Σ ∂p/∂Z^(i) · Z^(i+1), with δ = d/dt on coefficients.
    pub fn total_derivative(&self) -> DiffPoly {
        let mut out = DiffPoly::zero();
        for (m, c) in &self.terms {
            let dc = c.derivative();
            if !dc.is_zero() {
                out.add_term(m.clone(), dc);
            }
            for &(v, _) in m.factors() {
                let (rest, e) = m.without_one(v).expect("factor present");
                let mono = rest.mul(&Monomial::var(v.shifted(1)));
                out.add_term(mono, c * &Coeff::from_i64(e as i64));
            }
        }
        out
    }

    pub fn iterated_derivative(&self, l: u32) -> DiffPoly {
        let mut p = self.clone();
        for _ in 0..l {
            p = p.total_derivative();
        }
        p
    }

    /// Renames every jet variable; the map need not preserve order.
    pub fn map_vars(&self, f: impl Fn(JetVar) -> JetVar) -> DiffPoly {
        DiffPoly::from_terms(self.terms.iter().map(|(m, c)| {
            (
                Monomial::from_factors(m.factors().iter().map(|&(v, e)| (f(v), e))),
                c.clone(),
            )
        }))
    }

    /// Replaces each variable for which `sub` returns a polynomial.
    pub fn substitute(&self, sub: impl Fn(JetVar) -> Option<DiffPoly>) -> DiffPoly {
        let mut out = DiffPoly::zero();
        let mut cache: HashMap<JetVar, Option<DiffPoly>> = HashMap::new();
        for (m, c) in &self.terms {
            let mut kept = Vec::new();
            let mut factor = DiffPoly::constant(c.clone());
            for &(v, e) in m.factors() {
                let s = cache.entry(v).or_insert_with(|| sub(v));
                match s {
                    Some(p) => factor = &factor * &p.pow(e),
                    None => kept.push((v, e)),
                }
            }
            let mono = Monomial::from_factors(kept);
            for (fm, fc) in factor.terms {
                out.add_term(fm.mul(&mono), fc);
            }
        }
        out
    }

    /// Exact evaluation; coefficients in ℚ(t) use `pt.t`.
    pub fn eval(&self, pt: &Assignment) -> Result<BigRational, EvalError> {
        self.eval_with(|v| pt.get(v), pt.t.as_ref())
    }

    pub fn eval_with<'a>(
        &self,
        lookup: impl Fn(JetVar) -> Option<&'a BigRational>,
        t: Option<&BigRational>,
    ) -> Result<BigRational, EvalError> {
        let mut acc = BigRational::zero();
        for (m, c) in &self.terms {
            let mut term = c.eval(t).ok_or(EvalError::Pole)?;
            if term.is_zero() {
                continue;
            }
            for &(v, e) in m.factors() {
                let x = lookup(v).ok_or(EvalError::Uncovered(v))?;
                term *= num_traits::pow(x.clone(), e as usize);
            }
            acc += term;
        }
        Ok(acc)
    }

    /// Exact quotient by `d`, or `None` when `d` does not divide `self`.
    pub fn div_exact(&self, d: &DiffPoly) -> Option<DiffPoly> {
        let (dm, dc) = d.leading()?;
        let (dm, dc_inv) = (dm.clone(), dc.inv());
        if let Some(c) = d.as_constant() {
            return Some(self.scale(&c.inv()));
        }
        let mut rem = self.clone();
        let mut quot = DiffPoly::zero();
        while let Some((rm, rc)) = rem.leading() {
            let qm = rm.div(&dm)?;
            let qc = rc * &dc_inv;
            rem = &rem - &d.mul_term(&qc, &qm);
            quot.add_term(qm, qc);
        }
        Some(quot)
    }

    /// Largest absolute numerator/denominator bit size over rational coefficients.
    pub fn coeff_bits(&self) -> u64 {
        self.terms
            .values()
            .filter_map(Coeff::as_rational)
            .map(|q| q.numer().bits().max(q.denom().bits()))
            .max()
            .unwrap_or(0)
    }
}

impl Add for &DiffPoly {
    type Output = DiffPoly;
    fn add(self, rhs: &DiffPoly) -> DiffPoly {
        let (big, small) = if self.len() >= rhs.len() {
            (self, rhs)
        } else {
            (rhs, self)
        };
        let mut out = big.clone();
        for (m, c) in &small.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }
}

impl Sub for &DiffPoly {
    type Output = DiffPoly;
    fn sub(self, rhs: &DiffPoly) -> DiffPoly {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), -c);
        }
        out
    }
}

impl Mul for &DiffPoly {
    type Output = DiffPoly;
    fn mul(self, rhs: &DiffPoly) -> DiffPoly {
        let mut out = DiffPoly::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &rhs.terms {
                out.add_term(m1.mul(m2), c1 * c2);
            }
        }
        out
    }
}

impl Neg for &DiffPoly {
    type Output = DiffPoly;
    fn neg(self) -> DiffPoly {
        DiffPoly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }
}

impl From<BigInt> for DiffPoly {
    fn from(v: BigInt) -> Self {
        DiffPoly::constant(Coeff::Rational(BigRational::from_integer(v)))
    }
}

/// Memoized iterated total derivatives of one polynomial. Reads are shared;
/// extension takes the write lock.
#[derive(Debug)]
pub struct DerivativeTower {
    levels: RwLock<Vec<Arc<DiffPoly>>>,
}

impl DerivativeTower {
    pub fn new(p: DiffPoly) -> Self {
        DerivativeTower {
            levels: RwLock::new(vec![Arc::new(p)]),
        }
    }

    pub fn base(&self) -> Arc<DiffPoly> {
        self.get(0)
    }

    /// The `l`-th total derivative.
    pub fn get(&self, l: u32) -> Arc<DiffPoly> {
        let l = l as usize;
        {
            let levels = self.levels.read().expect("tower lock");
            if let Some(p) = levels.get(l) {
                return Arc::clone(p);
            }
        }
        let mut levels = self.levels.write().expect("tower lock");
        while levels.len() <= l {
            let next = levels.last().expect("nonempty tower").total_derivative();
            levels.push(Arc::new(next));
        }
        Arc::clone(&levels[l])
    }
}

impl Clone for DerivativeTower {
    fn clone(&self) -> Self {
        DerivativeTower {
            levels: RwLock::new(self.levels.read().expect("tower lock").clone()),
        }
    }
}

/// Shorthand constructor for tests and transforms.
pub fn jet(var: u32, deriv: u32) -> JetVar {
    JetVar::new(VarId(var), deriv)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(var: u32, d: u32) -> DiffPoly {
        DiffPoly::var(jet(var, d))
    }

    #[test]
    fn monomial_order_is_multiplicative() {
        let a = Monomial::from_factors([(jet(0, 0), 1)]);
        let b = Monomial::from_factors([(jet(1, 0), 3)]);
        let c = Monomial::from_factors([(jet(0, 1), 1)]);
        assert!(a > b);
        assert!(a.mul(&c) > b.mul(&c));
        assert!(a > Monomial::one());
    }

    #[test]
    fn leibniz_on_pendulum_row() {
        // u1'' + u1*u3 differentiated once
        let g = &v(0, 2) + &(&v(0, 0) * &v(2, 0));
        let expected = &(&v(0, 3) + &(&v(0, 1) * &v(2, 0))) + &(&v(0, 0) * &v(2, 1));
        assert_eq!(g.total_derivative(), expected);
        assert_eq!(g.partial(jet(2, 0)), v(0, 0));
        assert!(g.partial(jet(1, 0)).is_zero());
        assert_eq!(g.order_of(Some(VarId(0))), Some(2));
        assert_eq!(g.order_of(Some(VarId(1))), None);
    }

    #[test]
    fn t_coefficient_is_differentiated() {
        let p = DiffPoly::term(Coeff::t(), Monomial::var(jet(0, 0)));
        let expected = &v(0, 0) + &DiffPoly::term(Coeff::t(), Monomial::var(jet(0, 1)));
        assert_eq!(p.total_derivative(), expected);
    }

    #[test]
    fn constraint_second_derivative_row() {
        let g = &(&v(0, 0).pow(2) + &v(1, 0).pow(2)) - &DiffPoly::one();
        let g2 = g.iterated_derivative(2);
        assert_eq!(g2.partial(jet(0, 1)), v(0, 1).scale(&Coeff::from_i64(4)));
        // The 6·u1' entry of the constraint row belongs to the third derivative.
        let g3 = g.iterated_derivative(3);
        assert_eq!(g3.partial(jet(0, 2)), v(0, 1).scale(&Coeff::from_i64(6)));
    }

    #[test]
    fn exact_division() {
        let a = &v(0, 0) + &v(1, 1);
        let b = &v(2, 0) - &DiffPoly::from_i64(3);
        let prod = &a * &b;
        assert_eq!(prod.div_exact(&a), Some(b.clone()));
        assert_eq!(prod.div_exact(&b), Some(a));
        assert_eq!((&prod + &DiffPoly::one()).div_exact(&b), None);
    }

    #[test]
    fn tower_memoizes() {
        let tower = DerivativeTower::new(&v(0, 0) * &v(0, 0));
        let d3 = tower.get(3);
        assert_eq!(*d3, (&v(0, 0) * &v(0, 0)).iterated_derivative(3));
        assert!(Arc::ptr_eq(&d3, &tower.get(3)));
    }

    #[test]
    fn substitution_and_evaluation() {
        let p = &v(0, 1) * &v(1, 0);
        let q = p.substitute(|j| (j == jet(0, 1)).then(|| &v(0, 0) + &DiffPoly::one()));
        let mut pt = Assignment::default();
        let rational = |v: i64| BigRational::from_integer(BigInt::from(v));
        pt.set(jet(0, 0), rational(2));
        pt.set(jet(1, 0), rational(5));
        assert_eq!(q.eval(&pt).unwrap(), rational(15));
        assert_eq!(p.eval(&pt), Err(EvalError::Uncovered(jet(0, 1))));
    }
}
