//! Implicit relations by interpolation on sampled points of the variety.
//!
//! Points of `{F^[L] = 0, G^[L] = 0}` are produced parametrically: X, U and
//! parameter jets are drawn at random, X-jets follow the differential
//! equations and each `Y_j^(l)` is set to the value of `g_j^(l)`. A relation
//! among chosen coordinates is a kernel vector of the matrix of monomial
//! values at enough such points.

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeff::{Coeff, UniPoly};
use crate::diffpoly::{Assignment, DiffPoly, EvalError, JetVar, Monomial};
use crate::error::{Error, Result};
use crate::parse::jet_name;
use crate::ranklab::trial_rng;
use crate::sysmodel::{DaeSystem, Output, Role};

/// Which projection the degree bound refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundFlavor {
    /// Prolongations up to σ: `d^((σ+1)(n+r))`.
    V1,
    /// Prolongations up to σ − 1: `d^(σ(n+r))`.
    V0,
}

pub fn degree_bound(d: u32, sigma: u32, n: usize, r: usize, flavor: BoundFlavor) -> BigUint {
    let levels = match flavor {
        BoundFlavor::V1 => sigma + 1,
        BoundFlavor::V0 => sigma,
    };
    num_traits::pow(BigUint::from(d), levels as usize * (n + r))
}

/// Coordinates are drawn from `[-SAMPLE_BOUND, SAMPLE_BOUND]`.
const SAMPLE_BOUND: i128 = 1 << 20;
/// Extra points beyond the monomial count.
const OVERSAMPLE: usize = 10;
/// Fresh points used to re-verify a relation.
pub const VERIFY_POINTS: usize = 20;
/// Largest admissible number of monomials.
const MAX_MONOMIALS: usize = 3000;

fn draw(rng: &mut impl Rng) -> BigRational {
    BigRational::from_integer(rng.random_range(-SAMPLE_BOUND..=SAMPLE_BOUND).into())
}

/// A point on the variety with all jets of order ≤ `level + e` and Y-jets of order ≤ `level`.
pub fn sample_variety_point(
    sys: &DaeSystem,
    level: u32,
    rng: &mut impl Rng,
) -> std::result::Result<Assignment, EvalError> {
    let top = level + sys.e();
    let mut pt = Assignment::default();
    if sys.field().has_t() {
        pt.t = Some(draw(rng));
    }
    let rates: Vec<(usize, crate::diffpoly::VarId)> = sys
        .outputs()
        .iter()
        .enumerate()
        .filter_map(|(j, o)| match o {
            Output::Rate(x) => Some((j, *x)),
            Output::Symbol(_) => None,
        })
        .collect();
    for &x in sys.x() {
        pt.set(JetVar::new(x, 0), draw(rng));
    }
    for &v in sys.u() {
        for l in 0..=top {
            pt.set(JetVar::new(v, l), draw(rng));
        }
    }
    for &p in sys.params() {
        let rate = rates.iter().any(|&(_, x)| x == p);
        let upto = if rate { 0 } else { top };
        for l in 0..=upto {
            pt.set(JetVar::new(p, l), draw(rng));
        }
    }
    for s in 1..=top {
        for (i, &x) in sys.x().iter().enumerate() {
            let v = sys.f_prolonged(i, s - 1).eval(&pt)?;
            pt.set(JetVar::new(x, s), v);
        }
        for &(j, x) in &rates {
            let v = sys.g_prolonged(j, s - 1).eval(&pt)?;
            pt.set(JetVar::new(x, s), v);
        }
    }
    for (j, o) in sys.outputs().iter().enumerate() {
        if let Output::Symbol(y) = o {
            for l in 0..=level {
                let v = sys.g_prolonged(j, l).eval(&pt)?;
                pt.set(JetVar::new(*y, l), v);
            }
        }
    }
    Ok(pt)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelationQuery {
    pub target: JetVar,
    pub basis: Vec<JetVar>,
    pub y_jets: Vec<JetVar>,
    pub max_degree: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub enum RelationOutcome {
    Found {
        relation: DiffPoly,
        degree: u32,
        monomials: usize,
        verified_points: usize,
    },
    NoneUpTo(u32),
}

/// Interpolation column: a power of t times a monomial in the coordinates.
type Column = (u32, Monomial);

/// Columns of total degree ≤ `degree`; t counts as a coordinate over ℚ(t).
fn columns_up_to(coords: &[JetVar], degree: u32, with_t: bool) -> Vec<Column> {
    let mut out = Vec::new();
    for m in monomials_up_to(coords, degree) {
        let room = if with_t { degree - m.degree() } else { 0 };
        for a in 0..=room {
            out.push((a, m.clone()));
        }
    }
    out
}

fn t_power_times(a: u32, c: BigRational) -> Coeff {
    let mut v = vec![BigRational::zero(); a as usize];
    v.push(c);
    Coeff::from_poly(UniPoly::from_coeffs(v))
}

/// Rational factor that makes the leading t-coefficient of `c` equal to 1.
fn leading_rational(c: &Coeff) -> BigRational {
    match c {
        Coeff::Rational(q) => q.clone(),
        Coeff::Function(f) => f.numer().leading() / f.denom().leading(),
    }
}

fn monomials_up_to(coords: &[JetVar], degree: u32) -> Vec<Monomial> {
    let mut out = vec![Monomial::one()];
    // Extend by one coordinate at a time with every admissible exponent.
    for &c in coords {
        let mut next = Vec::new();
        for m in &out {
            let room = degree - m.degree();
            for e in 0..=room {
                next.push(m.mul(&Monomial::from_factors([(c, e)])));
            }
        }
        out = next;
    }
    out.sort();
    out
}

/// Kernel basis of a rational matrix; the vector for each free column has a 1
/// there and support only on earlier pivot columns.
pub fn nullspace(mut a: Vec<Vec<BigRational>>, cols: usize) -> Vec<Vec<BigRational>> {
    let rows = a.len();
    let mut pivots: Vec<usize> = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !a[i][c].is_zero()) else {
            continue;
        };
        a.swap(r, p);
        let inv = a[r][c].recip();
        for v in a[r].iter_mut() {
            *v *= &inv;
        }
        let pivot_row = a[r].clone();
        for (i, row) in a.iter_mut().enumerate() {
            if i != r && !row[c].is_zero() {
                let f = row[c].clone();
                for (x, y) in row.iter_mut().zip(&pivot_row) {
                    if !y.is_zero() {
                        *x -= &f * y;
                    }
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    let mut basis = Vec::new();
    for free in (0..cols).filter(|c| !pivots.contains(c)) {
        let mut v = vec![BigRational::zero(); cols];
        v[free] = BigRational::one();
        for (row, &pc) in pivots.iter().enumerate() {
            v[pc] = -a[row][free].clone();
        }
        basis.push(v);
    }
    basis
}

fn validate_query(sys: &DaeSystem, q: &RelationQuery) -> Result<()> {
    if q.max_degree == 0 {
        return Err(Error::Precondition(
            "the maximal degree must be at least 1".into(),
        ));
    }
    if q.basis.contains(&q.target) || q.y_jets.contains(&q.target) {
        return Err(Error::Precondition(
            "the target must not be a basis coordinate".into(),
        ));
    }
    for &v in std::iter::once(&q.target).chain(&q.basis) {
        if !matches!(sys.role(v.var), Role::State | Role::Input | Role::Param) {
            return Err(Error::Precondition(format!(
                "`{}` is not an unknown or parameter jet",
                jet_name(v, sys.names())
            )));
        }
    }
    for &y in &q.y_jets {
        if sys.role(y.var) != Role::Output {
            return Err(Error::Precondition(format!(
                "`{}` is not an output jet",
                jet_name(y, sys.names())
            )));
        }
    }
    Ok(())
}

fn coordinate_values(pt: &Assignment, coords: &[JetVar]) -> Vec<BigRational> {
    coords
        .iter()
        .map(|&c| pt.get(c).cloned().expect("sample covers every coordinate"))
        .collect()
}

fn monomial_value(m: &Monomial, coords: &[JetVar], vals: &[BigRational]) -> BigRational {
    let mut acc = BigRational::one();
    for &(v, e) in m.factors() {
        let k = coords
            .iter()
            .position(|&c| c == v)
            .expect("monomial over coordinates");
        acc *= num_traits::pow(vals[k].clone(), e as usize);
    }
    acc
}

/// Draws points until `count` succeed; poles of ℚ(t) coefficients are skipped.
fn sample_points(
    sys: &DaeSystem,
    level: u32,
    seed: u64,
    label: &str,
    count: usize,
) -> Result<Vec<Assignment>> {
    (0..count)
        .into_par_iter()
        .map(|k| {
            let mut rng = trial_rng(seed, label, k as u32);
            for _ in 0..4 {
                if let Ok(pt) = sample_variety_point(sys, level, &mut rng) {
                    return Ok(pt);
                }
            }
            Err(Error::RankFailure(
                "could not sample the variety away from poles".into(),
            ))
        })
        .collect()
}

/// Minimal-degree relation between the target and the basis and Y coordinates.
pub fn implicit_relation(sys: &DaeSystem, q: &RelationQuery, seed: u64) -> Result<RelationOutcome> {
    validate_query(sys, q)?;
    let mut coords = vec![q.target];
    for &c in q.basis.iter().chain(&q.y_jets) {
        if !coords.contains(&c) {
            coords.push(c);
        }
    }
    let level = coords.iter().map(|c| c.deriv).max().unwrap_or(0);
    for degree in 1..=q.max_degree {
        let monos = columns_up_to(&coords, degree, sys.field().has_t());
        if monos.len() > MAX_MONOMIALS {
            return Err(Error::ResourceCap(format!(
                "{} monomials of degree ≤ {degree} exceed the cap of {MAX_MONOMIALS}",
                monos.len()
            )));
        }
        for attempt in 0..3u32 {
            let label = format!("relfind/{degree}/{attempt}");
            let pts = sample_points(
                sys,
                level,
                seed,
                &label,
                monos.len() + OVERSAMPLE * (attempt as usize + 1),
            )?;
            let rows: Vec<Vec<BigRational>> = pts
                .par_iter()
                .map(|pt| {
                    let vals = coordinate_values(pt, &coords);
                    let t = pt.t.clone().unwrap_or_else(BigRational::one);
                    monos
                        .iter()
                        .map(|(a, m)| {
                            num_traits::pow(t.clone(), *a as usize)
                                * monomial_value(m, &coords, &vals)
                        })
                        .collect()
                })
                .collect();
            let kernel = nullspace(rows, monos.len());
            let fresh = sample_points(sys, level, seed, &format!("{label}/verify"), VERIFY_POINTS)?;
            let mut candidate = None;
            for v in kernel {
                let p = DiffPoly::from_terms(
                    monos
                        .iter()
                        .zip(v)
                        .filter(|(_, c)| !c.is_zero())
                        .map(|((a, m), c)| (m.clone(), t_power_times(*a, c))),
                );
                let dp = p.partial(q.target);
                // Separability witness: ∂P/∂target is nonzero at a point.
                if fresh
                    .iter()
                    .any(|pt| dp.eval(pt).map(|x| !x.is_zero()).unwrap_or(false))
                {
                    candidate = Some(p);
                    break;
                }
            }
            let Some(p) = candidate else {
                break;
            };
            let lead = p
                .leading()
                .map(|(_, c)| leading_rational(c))
                .expect("nonzero relation");
            let p = p.scale(&Coeff::Rational(BigRational::one() / lead));
            let vanishes = fresh
                .iter()
                .all(|pt| p.eval(pt).map(|x| x.is_zero()).unwrap_or(false));
            if vanishes {
                return Ok(RelationOutcome::Found {
                    degree: p.total_degree(),
                    monomials: monos.len(),
                    relation: p,
                    verified_points: fresh.len(),
                });
            }
        }
    }
    Ok(RelationOutcome::NoneUpTo(q.max_degree))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::{parse_expression, parse_system_text};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn chain4() -> DaeSystem {
        parse_system_text(
            "Q",
            &[],
            &["u1", "u2", "u3", "u4"],
            &[],
            &["u1 + u4'", "u2 + u1'", "u3 + u2'"],
        )
        .unwrap()
    }

    #[test]
    fn bounds() {
        assert_eq!(
            degree_bound(2, 2, 0, 3, BoundFlavor::V1),
            BigUint::from(512u32)
        );
        assert_eq!(degree_bound(1, 7, 3, 3, BoundFlavor::V1), BigUint::one());
        assert_eq!(degree_bound(5, 0, 3, 3, BoundFlavor::V0), BigUint::one());
    }

    #[test]
    fn variety_points_satisfy_the_equations() {
        let s = chain4();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let pt = sample_variety_point(&s, 1, &mut rng).unwrap();
        let names = s.names().to_vec();
        let lhs = parse_expression("u1 + u4'", &names, s.field())
            .unwrap()
            .eval(&pt)
            .unwrap();
        let y1 = pt.get(JetVar::new(s.lookup("y1").unwrap(), 0)).unwrap();
        assert_eq!(&lhs, y1);
    }

    #[test]
    fn nullspace_shape() {
        let q = |v: i64| BigRational::from_integer(v.into());
        let a = vec![vec![q(1), q(2), q(3)], vec![q(2), q(4), q(6)]];
        let k = nullspace(a, 3);
        assert_eq!(k.len(), 2);
        assert_eq!(k[0], vec![q(-2), q(1), q(0)]);
    }

    #[test]
    fn no_relation_among_free_jets() {
        let s = chain4();
        let u3 = JetVar::new(s.lookup("u3").unwrap(), 0);
        let u4 = JetVar::new(s.lookup("u4").unwrap(), 0);
        let q = RelationQuery {
            target: u3,
            basis: vec![u4],
            y_jets: vec![],
            max_degree: 1,
        };
        assert_eq!(
            implicit_relation(&s, &q, 0).unwrap(),
            RelationOutcome::NoneUpTo(1)
        );
    }
}
