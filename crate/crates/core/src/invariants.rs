//! Hilbert–Kolchin data and the Greenspan, Ritt and Jacobi order bounds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::indexcore::MuSequence;
use crate::sysmodel::DaeSystem;

/// `ord = e(n+r) − μ_σ`.
pub fn ideal_order(sys: &DaeSystem, mu: &MuSequence) -> Result<u64> {
    let mu_sigma = mu
        .mu_sigma()
        .ok_or_else(|| Error::Precondition("σ has not been computed".into()))?;
    let total = sys.e() as u64 * sys.block_rows() as u64;
    total
        .checked_sub(mu_sigma as u64)
        .ok_or_else(|| Error::RankFailure(format!("μ_σ = {mu_sigma} exceeds e(n+r) = {total}")))
}

/// `H(T) = slope·(T+1) + constant`, with the regularity bound `e − 1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HilbertKolchin {
    pub slope: i64,
    pub constant: u64,
    pub regularity_bound: u32,
    pub mu_sigma: u32,
    /// Set when e = 1: the function equals the polynomial at every i.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl HilbertKolchin {
    pub fn at(&self, i: u64) -> i64 {
        self.slope * (i as i64 + 1) + self.constant as i64
    }
}

pub fn hilbert_kolchin(sys: &DaeSystem, mu: &MuSequence) -> Result<HilbertKolchin> {
    let constant = ideal_order(sys, mu)?;
    Ok(HilbertKolchin {
        slope: sys.m() as i64 - sys.r() as i64,
        constant,
        regularity_bound: sys.e() - 1,
        mu_sigma: mu.mu_sigma().expect("checked by ideal_order"),
        note: (sys.e() == 1).then(|| "function equals polynomial for all i".to_string()),
    })
}

/// `n + Σ_j e_j`.
pub fn greenspan_bound(sys: &DaeSystem) -> u64 {
    sys.n() as u64 + sys.e_j().iter().map(|&e| e as u64).sum::<u64>()
}

/// `n + Σ_i ε_i`, absent variables contributing nothing.
pub fn ritt_bound(sys: &DaeSystem) -> u64 {
    sys.n() as u64 + sys.eps().iter().flatten().map(|&e| e as u64).sum::<u64>()
}

/// `e_{ij}` = order of `U_i` in `g_j`, indexed `[i][j]`.
pub fn order_matrix(sys: &DaeSystem) -> Vec<Vec<Option<u32>>> {
    sys.u()
        .iter()
        .map(|&ui| sys.g().iter().map(|gj| gj.order_of(Some(ui))).collect())
        .collect()
}

/// Maximum-weight perfect assignment on a square matrix; `None` entries are
/// forbidden. Returns the weight and `row → column`, or `None` when every
/// permutation meets a forbidden entry.
pub fn max_weight_assignment(w: &[Vec<Option<i64>>]) -> Option<(i64, Vec<usize>)> {
    let n = w.len();
    if n == 0 {
        return Some((0, Vec::new()));
    }
    assert!(
        w.iter().all(|r| r.len() == n),
        "assignment matrix must be square"
    );
    let finite = w.iter().flatten().flatten();
    let (lo, hi) = finite.fold((0i64, 0i64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    // A forbidden entry costs more than any spread of finite costs.
    let forbidden = (hi - lo + 1) * (n as i64 + 1);
    let cost = |i: usize, j: usize| match w[i][j] {
        Some(v) => hi - v,
        None => forbidden + (hi - lo),
    };
    // Shortest augmenting path Hungarian algorithm, 1-indexed potentials.
    let inf = i64::MAX / 4;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0usize; n];
    for j in 1..=n {
        assign[p[j] - 1] = j - 1;
    }
    let mut total = 0;
    for (i, &j) in assign.iter().enumerate() {
        total += w[i][j]?;
    }
    Some((total, assign))
}

/// `n + max_τ Σ_j e_{τ(j) j}`; `Ok(None)` when no permutation is finite.
pub fn jacobi_bound(sys: &DaeSystem) -> Result<Option<u64>> {
    if sys.m() != sys.r() {
        return Err(Error::Precondition(format!(
            "the Jacobi bound needs m = r (here m = {}, r = {})",
            sys.m(),
            sys.r()
        )));
    }
    let w: Vec<Vec<Option<i64>>> = order_matrix(sys)
        .into_iter()
        .map(|row| row.into_iter().map(|e| e.map(i64::from)).collect())
        .collect();
    Ok(max_weight_assignment(&w).map(|(total, _)| sys.n() as u64 + total as u64))
}

/// The order compared against each applicable bound.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub ord: u64,
    pub greenspan: u64,
    pub ritt: u64,
    /// `None` when the bound does not apply or is vacuous.
    pub jacobi: Option<u64>,
    /// The Jacobi bound is proved for n = 0 only; otherwise it is reported
    /// but not asserted.
    pub jacobi_proved: bool,
    /// Names of the bounds attained by `ord`.
    pub tight: Vec<String>,
    pub holds: bool,
}

pub fn check_order_bounds(sys: &DaeSystem, ord: u64) -> BoundCheck {
    let greenspan = greenspan_bound(sys);
    let ritt = ritt_bound(sys);
    let jacobi = jacobi_bound(sys).ok().flatten();
    let jacobi_proved = sys.n() == 0;
    let mut tight = Vec::new();
    let mut holds = ord <= greenspan && ord <= ritt;
    if ord == greenspan {
        tight.push("greenspan".to_string());
    }
    if ord == ritt {
        tight.push("ritt".to_string());
    }
    if let Some(j) = jacobi {
        if jacobi_proved {
            holds &= ord <= j;
        }
        if ord == j {
            tight.push("jacobi".to_string());
        }
    }
    BoundCheck {
        ord,
        greenspan,
        ritt,
        jacobi,
        jacobi_proved,
        tight,
        holds,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_system_text;

    #[test]
    fn pendulum_bounds() {
        let s = parse_system_text(
            "Q",
            &[],
            &["u1", "u2", "u3"],
            &[],
            &["u1'' + u1*u3", "u2'' + u2*u3", "u1^2 + u2^2 - 1"],
        )
        .unwrap();
        assert_eq!(greenspan_bound(&s), 4);
        assert_eq!(ritt_bound(&s), 4);
        assert_eq!(
            order_matrix(&s),
            vec![
                vec![Some(2), None, Some(0)],
                vec![None, Some(2), Some(0)],
                vec![Some(0), Some(0), None]
            ]
        );
        assert_eq!(jacobi_bound(&s).unwrap(), Some(2));
    }

    #[test]
    fn infeasible_and_diagonal_assignments() {
        let w = vec![vec![Some(3), None], vec![Some(1), None]];
        assert_eq!(max_weight_assignment(&w), None);
        let d = vec![
            vec![Some(2), None, None],
            vec![None, Some(0), None],
            vec![None, None, Some(5)],
        ];
        assert_eq!(max_weight_assignment(&d), Some((7, vec![0, 1, 2])));
        let neg = vec![vec![Some(-1), Some(-5)], vec![Some(-5), Some(-1)]];
        assert_eq!(max_weight_assignment(&neg).unwrap().0, -2);
    }

    #[test]
    fn jacobi_needs_square_system() {
        let s = parse_system_text("Q", &[], &["u1", "u2"], &[], &["u1 + u2'"]).unwrap();
        assert!(jacobi_bound(&s).is_err());
    }
}
