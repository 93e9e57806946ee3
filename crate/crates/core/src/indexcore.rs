//! The μ-sequence and the indices σ, σ̃ and σ̂.

use serde::{Deserialize, Serialize};

use crate::diffpoly::DiffPoly;
use crate::error::{Error, Result};
use crate::prolong::{build_window, entry_degree_bound, JacobianWindow, Reducer};
use crate::ranklab::{ExactCap, RankEngine, RankMode, RankQuery, SystemPoints};
use crate::sysmodel::DaeSystem;

/// μ_0, μ_1, … with the stabilization point and per-k bounds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MuSequence {
    pub values: Vec<u32>,
    /// First k with μ_k = μ_{k+1}, when reached.
    pub sigma: Option<u32>,
    /// Window offset used (always e − 1 for index computations).
    pub i: u32,
    /// `(lower, upper)` a-priori bounds for each μ_k.
    pub bounds: Vec<(u64, u64)>,
}

impl MuSequence {
    /// μ at the stabilization point.
    pub fn mu_sigma(&self) -> Option<u32> {
        self.sigma.map(|s| self.values[s as usize])
    }
}

/// A-priori bounds `n·min{k,e−1} + Σ_j min{k, e−e_j} ≤ μ_k ≤ min{k,e}·(n+r)`.
pub fn mu_bounds(sys: &DaeSystem, k: u32) -> (u64, u64) {
    let e = sys.e();
    let n = sys.n() as u64;
    let lower = n * k.min(e - 1) as u64
        + sys
            .e_j()
            .iter()
            .map(|&ej| k.min(e - ej) as u64)
            .sum::<u64>();
    let upper = k.min(e) as u64 * sys.block_rows() as u64;
    (lower, upper)
}

/// Termination cap `min{e(n+r), e + n + Σ_j e_j}` for the search of σ.
pub fn search_cap(sys: &DaeSystem) -> u32 {
    let e = sys.e();
    let a = e * sys.block_rows() as u32;
    let b = e + sys.n() as u32 + sys.e_j().iter().sum::<u32>();
    a.min(b)
}

/// Term cap for symbolic reduction matching the engine's exact-rank cap.
fn reducer_cap(engine: &RankEngine) -> usize {
    match engine.mode {
        RankMode::Exact => ExactCap::FORCED.max_terms,
        _ => ExactCap::CONFIRM.max_terms,
    }
}

/// Rank of an arbitrary polynomial matrix over 𝕂 of `sys`, sampling jets up to `max_jet`.
pub fn matrix_rank(
    sys: &DaeSystem,
    engine: &RankEngine,
    label: String,
    entries: &[Vec<DiffPoly>],
    max_jet: u32,
) -> Result<usize> {
    let source = SystemPoints { sys, max_jet };
    let cap = reducer_cap(engine);
    let reduce = |m: &[Vec<DiffPoly>]| Reducer::new(sys, cap).reduce_matrix(m);
    engine.rank(&RankQuery {
        label,
        entries,
        source: &source,
        degree: entry_degree_bound(sys.degree_bound(), max_jet),
        reduce: &reduce,
    })
}

/// Rank of a Jacobian window.
pub fn window_rank(
    sys: &DaeSystem,
    engine: &RankEngine,
    tag: &str,
    w: &JacobianWindow,
) -> Result<usize> {
    matrix_rank(
        sys,
        engine,
        format!("{tag}/J[{},{}]", w.k, w.i),
        &w.entries,
        w.max_jet(),
    )
}

/// `μ_{k,i} = k(n+r) − rank 𝔍_{k,i}`.
pub fn mu_at(sys: &DaeSystem, engine: &RankEngine, tag: &str, k: u32, i: u32) -> Result<u32> {
    if k == 0 {
        return Ok(0);
    }
    let w = build_window(sys, k, i)?;
    let rank = window_rank(sys, engine, tag, &w)?;
    Ok((k as usize * sys.block_rows() - rank) as u32)
}

fn check_value(sys: &DaeSystem, k: u32, mu: u32, prev: u32, mode: RankMode) -> Result<()> {
    let (lo, hi) = mu_bounds(sys, k);
    if (mu as u64) < lo || (mu as u64) > hi {
        return Err(Error::RankFailure(format!(
            "μ_{k} = {mu} lies outside the a-priori bounds [{lo}, {hi}] ({} ranks)",
            mode.name()
        )));
    }
    if mu < prev {
        return Err(Error::RankFailure(format!(
            "μ decreased from {prev} to {mu} at k = {k} ({} ranks)",
            mode.name()
        )));
    }
    Ok(())
}

/// μ_0..μ_kmax at `i = e − 1`, with shape and bound checks.
pub fn mu_sequence(
    sys: &DaeSystem,
    kmax: u32,
    engine: &RankEngine,
    tag: &str,
) -> Result<MuSequence> {
    let i = sys.e() - 1;
    let full = build_window(sys, kmax.max(1), i)?;
    let mut values = vec![0u32];
    let mut sigma = None;
    for k in 1..=kmax {
        let rank = window_rank(sys, engine, tag, &full.leading(k))?;
        let mu = (k as usize * sys.block_rows() - rank) as u32;
        let prev = *values.last().expect("μ_0 present");
        check_value(sys, k, mu, prev, engine.mode)?;
        if let Some(s) = sigma {
            if mu != values[s as usize] {
                return Err(Error::RankFailure(format!(
                    "μ changed after stabilizing at σ = {s} (μ_{k} = {mu}); sequence must be strictly increasing then constant"
                )));
            }
        } else if mu == prev {
            sigma = Some(k - 1);
        }
        values.push(mu);
    }
    Ok(MuSequence {
        bounds: (0..=kmax).map(|k| mu_bounds(sys, k)).collect(),
        values,
        sigma,
        i,
    })
}

/// σ = min{k : μ_k = μ_{k+1}}, searched up to the termination cap (or `kmax`).
pub fn differentiation_index(
    sys: &DaeSystem,
    engine: &RankEngine,
    tag: &str,
    kmax: Option<u32>,
) -> Result<MuSequence> {
    let cap = kmax.unwrap_or_else(|| search_cap(sys));
    let i = sys.e() - 1;
    let full = build_window(sys, cap + 1, i)?;
    let mut values = vec![0u32];
    for k in 1..=cap + 1 {
        let rank = window_rank(sys, engine, tag, &full.leading(k))?;
        let mu = (k as usize * sys.block_rows() - rank) as u32;
        let prev = *values.last().expect("μ_0 present");
        check_value(sys, k, mu, prev, engine.mode)?;
        values.push(mu);
        if mu == prev {
            let sigma = k - 1;
            return Ok(MuSequence {
                bounds: (0..=k).map(|kk| mu_bounds(sys, kk)).collect(),
                values,
                sigma: Some(sigma),
                i,
            });
        }
    }
    Err(Error::NotStabilized {
        cap,
        mode: engine.mode.name().into(),
        mu: values,
    })
}

/// σ̃: the index of the system with `U_i = Z_i^(e − ε_i)`.
pub fn modified_index(
    sys: &DaeSystem,
    engine: &RankEngine,
    kmax: Option<u32>,
) -> Result<MuSequence> {
    let tilde = sys.tilde_transform()?;
    differentiation_index(&tilde, engine, "tilde", kmax)
}

/// σ̂: the index of the first-order form.
pub fn hat_index(sys: &DaeSystem, engine: &RankEngine, kmax: Option<u32>) -> Result<MuSequence> {
    let reduced = sys.first_order_form();
    differentiation_index(&reduced, engine, "hat", kmax)
}
