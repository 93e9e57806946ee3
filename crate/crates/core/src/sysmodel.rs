//! DAE systems `Ẋ = f(X, U)`, `g(X, U) = Y` and their transformations.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::diffpoly::{DerivativeTower, DiffPoly, JetVar, VarId};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Field {
    #[serde(rename = "Q")]
    Rationals,
    #[serde(rename = "Q(t)")]
    RationalFunctions,
}

impl Field {
    pub fn has_t(self) -> bool {
        self == Field::RationalFunctions
    }

    pub fn tag(self) -> &'static str {
        match self {
            Field::Rationals => "Q",
            Field::RationalFunctions => "Q(t)",
        }
    }
}

/// What a `g` equation is equal to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Output {
    /// A generic output symbol `Y_j`.
    Symbol(VarId),
    /// The first derivative of a state that was localized into a parameter.
    Rate(VarId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    State,
    Input,
    Param,
    Output,
    Unused,
}

#[derive(Clone, Debug)]
pub struct DaeSystem {
    field: Field,
    names: Vec<String>,
    x: Vec<VarId>,
    u: Vec<VarId>,
    params: Vec<VarId>,
    f: Vec<DiffPoly>,
    g: Vec<DiffPoly>,
    outputs: Vec<Output>,
    e_j: Vec<u32>,
    eps: Vec<Option<u32>>,
    e: u32,
    warnings: Vec<String>,
    f_towers: Arc<Vec<DerivativeTower>>,
    g_towers: Arc<Vec<DerivativeTower>>,
}

impl PartialEq for DaeSystem {
    fn eq(&self, other: &Self) -> bool {
        self.field == other.field
            && self.names == other.names
            && self.x == other.x
            && self.u == other.u
            && self.params == other.params
            && self.f == other.f
            && self.g == other.g
            && self.outputs == other.outputs
    }
}

/// Raw ingredients of a system before validation.
#[derive(Clone, Debug)]
pub struct SystemParts {
    pub field: Field,
    pub names: Vec<String>,
    pub x: Vec<VarId>,
    pub u: Vec<VarId>,
    pub params: Vec<VarId>,
    pub f: Vec<DiffPoly>,
    pub g: Vec<DiffPoly>,
    pub outputs: Vec<Output>,
}

/// Picks `base`, or `base` with trailing underscores, avoiding `taken`.
pub(crate) fn fresh_name(base: String, taken: &BTreeSet<String>) -> String {
    let mut name = base;
    while taken.contains(&name) {
        name.push('_');
    }
    name
}

impl DaeSystem {
    /// Validates the parts and computes the derived structure.
    pub fn new(parts: SystemParts) -> Result<Self> {
        let SystemParts {
            field,
            names,
            x,
            u,
            mut params,
            f,
            g,
            outputs,
        } = parts;
        if u.is_empty() {
            return Err(Error::Shape("the list of U variables is empty".into()));
        }
        if x.len() != f.len() {
            return Err(Error::Shape(format!(
                "{} X variables but {} f equations",
                x.len(),
                f.len()
            )));
        }
        if g.len() != outputs.len() {
            return Err(Error::Shape("one output per g equation is required".into()));
        }
        let mut seen = BTreeSet::new();
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(Error::Shape(format!("duplicate name `{name}`")));
            }
        }
        let mut ids = BTreeSet::new();
        for v in x.iter().chain(&u).chain(&params) {
            if v.0 as usize >= names.len() || !ids.insert(*v) {
                return Err(Error::Shape(format!(
                    "variable id {} reused or undeclared",
                    v.0
                )));
            }
        }
        params.sort();

        let role_of = |v: VarId| {
            if x.contains(&v) {
                Role::State
            } else if u.contains(&v) {
                Role::Input
            } else if params.contains(&v) {
                Role::Param
            } else {
                Role::Output
            }
        };
        for (i, fi) in f.iter().enumerate() {
            if let Some(bad) = fi.vars().into_iter().find(|j| j.deriv > 0) {
                return Err(Error::Shape(format!(
                    "derivative in f: f[{i}] contains `{}` of order {}",
                    names[bad.var.0 as usize], bad.deriv
                )));
            }
        }
        for (j, poly) in f.iter().chain(&g).enumerate() {
            if let Some(bad) = poly
                .vars()
                .into_iter()
                .find(|v| role_of(v.var) == Role::Output)
            {
                return Err(Error::Shape(format!(
                    "equation {j} mentions output or unknown symbol `{}`",
                    names[bad.var.0 as usize]
                )));
            }
        }

        let e_j: Vec<u32> = g
            .iter()
            .map(|gj| gj.order_where(|v| u.contains(&v)).unwrap_or(0))
            .collect();
        let eps: Vec<Option<u32>> = u
            .iter()
            .map(|&ui| g.iter().filter_map(|gj| gj.order_of(Some(ui))).max())
            .collect();
        let e = e_j.iter().copied().max().unwrap_or(0).max(1);

        let mut warnings = Vec::new();
        for &ui in &u {
            let used = f.iter().chain(&g).any(|p| p.order_of(Some(ui)).is_some());
            if !used {
                warnings.push(format!(
                    "U variable `{}` occurs in no equation and is trivially free",
                    names[ui.0 as usize]
                ));
            }
        }
        if g.iter()
            .any(|gj| gj.order_where(|v| role_of(v) != Role::Param).is_none())
        {
            warnings.push("some g equation involves no unknown".into());
        }

        let f_towers = Arc::new(f.iter().cloned().map(DerivativeTower::new).collect());
        let g_towers = Arc::new(g.iter().cloned().map(DerivativeTower::new).collect());
        Ok(DaeSystem {
            field,
            names,
            x,
            u,
            params,
            f,
            g,
            outputs,
            e_j,
            eps,
            e,
            warnings,
            f_towers,
            g_towers,
        })
    }

    pub fn field(&self) -> Field {
        self.field
    }
    pub fn names(&self) -> &[String] {
        &self.names
    }
    pub fn name(&self, v: VarId) -> &str {
        &self.names[v.0 as usize]
    }
    pub fn lookup(&self, name: &str) -> Option<VarId> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| VarId(i as u32))
    }
    pub fn x(&self) -> &[VarId] {
        &self.x
    }
    pub fn u(&self) -> &[VarId] {
        &self.u
    }
    pub fn params(&self) -> &[VarId] {
        &self.params
    }
    pub fn f(&self) -> &[DiffPoly] {
        &self.f
    }
    pub fn g(&self) -> &[DiffPoly] {
        &self.g
    }
    pub fn outputs(&self) -> &[Output] {
        &self.outputs
    }
    pub fn n(&self) -> usize {
        self.x.len()
    }
    pub fn m(&self) -> usize {
        self.u.len()
    }
    pub fn r(&self) -> usize {
        self.g.len()
    }
    pub fn e(&self) -> u32 {
        self.e
    }
    /// Order of each `g_j` in the U variables (0 when none occurs).
    pub fn e_j(&self) -> &[u32] {
        &self.e_j
    }
    /// Maximal order of each `U_i` over the `g`s; `None` when absent.
    pub fn eps(&self) -> &[Option<u32>] {
        &self.eps
    }
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn role(&self, v: VarId) -> Role {
        if self.x.contains(&v) {
            Role::State
        } else if self.u.contains(&v) {
            Role::Input
        } else if self.params.contains(&v) {
            Role::Param
        } else if self.outputs.contains(&Output::Symbol(v)) {
            Role::Output
        } else {
            Role::Unused
        }
    }

    /// X variables followed by U variables, the column order of every block.
    pub fn unknowns(&self) -> Vec<VarId> {
        self.x.iter().chain(&self.u).copied().collect()
    }

    /// `Y` symbols of the `g` block, skipping localized rates.
    pub fn output_symbols(&self) -> Vec<VarId> {
        self.outputs
            .iter()
            .filter_map(|o| match o {
                Output::Symbol(v) => Some(*v),
                Output::Rate(_) => None,
            })
            .collect()
    }

    /// `l`-th total derivative of `f_i` (formal, X-jets kept).
    pub fn f_prolonged(&self, i: usize, l: u32) -> Arc<DiffPoly> {
        self.f_towers[i].get(l)
    }

    pub fn g_prolonged(&self, j: usize, l: u32) -> Arc<DiffPoly> {
        self.g_towers[j].get(l)
    }

    /// Number of rows of one block: `n + r`.
    pub fn block_rows(&self) -> usize {
        self.n() + self.r()
    }

    /// Number of columns of one block: `n + m`.
    pub fn block_cols(&self) -> usize {
        self.n() + self.m()
    }

    /// Partial derivative of row `row` of `(F, G)^(l)` by `v`, where
    /// `F_i^(l) = f_i^(l) − X_i^(l+1)` and `G_j^(l) = g_j^(l) − Y_j^(l)`.
    pub fn h_partial(&self, row: usize, l: u32, v: JetVar) -> DiffPoly {
        if row < self.n() {
            let mut p = self.f_prolonged(row, l).partial(v);
            if v == JetVar::new(self.x[row], l + 1) {
                p = &p - &DiffPoly::one();
            }
            p
        } else {
            self.g_prolonged(row - self.n(), l).partial(v)
        }
    }

    /// Formal order of `(F, G)` row `row` in the unknowns at prolongation 0.
    pub fn row_order(&self, row: usize) -> u32 {
        if row < self.n() {
            1
        } else {
            self.e_j[row - self.n()]
        }
    }

    /// Largest total degree of an input equation (t counts), at least 1.
    pub fn degree_bound(&self) -> u32 {
        self.f
            .iter()
            .chain(&self.g)
            .map(|p| {
                p.terms()
                    .map(|(m, c)| m.degree() + c.t_degree() as u32)
                    .max()
                    .unwrap_or(0)
            })
            .max()
            .unwrap_or(0)
            .max(1)
    }

    fn parts(&self) -> SystemParts {
        SystemParts {
            field: self.field,
            names: self.names.clone(),
            x: self.x.clone(),
            u: self.u.clone(),
            params: self.params.clone(),
            f: self.f.clone(),
            g: self.g.clone(),
            outputs: self.outputs.clone(),
        }
    }

    /// Substitutes `U_i = Z_i^(e − ε_i)`, for `n = 0` and `r = m`.
    pub fn tilde_transform(&self) -> Result<DaeSystem> {
        if self.n() != 0 || self.r() != self.m() {
            return Err(Error::Precondition(format!(
                "the modified index needs n = 0 and r = m (here n = {}, r = {}, m = {})",
                self.n(),
                self.r(),
                self.m()
            )));
        }
        let mut shift = std::collections::HashMap::new();
        for (&ui, eps) in self.u.iter().zip(&self.eps) {
            let eps = eps.ok_or_else(|| {
                Error::Precondition(format!(
                    "U variable `{}` is absent from every g",
                    self.name(ui)
                ))
            })?;
            shift.insert(ui, self.e - eps);
        }
        let mut parts = self.parts();
        let taken: BTreeSet<String> = self.names.iter().cloned().collect();
        let fallback = self
            .u
            .iter()
            .enumerate()
            .any(|(k, _)| taken.contains(&format!("z{}", k + 1)));
        for (k, &ui) in self.u.iter().enumerate() {
            let name = if fallback {
                fresh_name(format!("z_{}", self.name(ui)), &taken)
            } else {
                format!("z{}", k + 1)
            };
            parts.names[ui.0 as usize] = name;
        }
        parts.g = self
            .g
            .iter()
            .map(|gj| gj.map_vars(|v| v.shifted(shift.get(&v.var).copied().unwrap_or(0))))
            .collect();
        DaeSystem::new(parts)
    }

    /// Replaces each `U_i` by states `U_{i,ℓ}` (ℓ < ε_i) linked by
    /// `U̇_{i,ℓ} = U_{i,ℓ+1}` and an input `U_{i,ε_i}`; the `g`s become order 0.
    pub fn reduce_to_first_order(&self) -> DaeSystem {
        self.reduce_orders(|eps| eps)
    }

    /// The first-order form keeping each top derivative: states `U_{i,ℓ}`
    /// for ℓ < ε_i − 1 and an input `U_{i,ε_i−1}` whose derivative stands
    /// for `U_i^(ε_i)`. First-order systems only change names.
    pub fn first_order_form(&self) -> DaeSystem {
        self.reduce_orders(|eps| eps.saturating_sub(1))
    }

    /// `top(ε_i)` is the number of states introduced for `U_i`.
    fn reduce_orders(&self, top: impl Fn(u32) -> u32) -> DaeSystem {
        let mut taken: BTreeSet<String> = self.names.iter().cloned().collect();
        let mut names: Vec<String> = Vec::new();
        let push = |names: &mut Vec<String>, name: String| {
            names.push(name);
            VarId(names.len() as u32 - 1)
        };
        let new_x_old: Vec<VarId> = self
            .x
            .iter()
            .map(|&v| push(&mut names, self.name(v).to_string()))
            .collect();
        // copies[i][ℓ] is the new variable standing for U_i^(ℓ).
        let mut copies: Vec<Vec<VarId>> = Vec::new();
        let mut link_states = Vec::new();
        let tops: Vec<u32> = self.eps.iter().map(|e| top(e.unwrap_or(0))).collect();
        for (i, &ui) in self.u.iter().enumerate() {
            let top = tops[i];
            let mut row = Vec::new();
            for l in 0..top {
                let name = fresh_name(format!("{}_{}", self.name(ui), l), &taken);
                taken.insert(name.clone());
                let id = push(&mut names, name);
                row.push(id);
                link_states.push(id);
            }
            copies.push(row);
        }
        let mut new_u = Vec::new();
        for (i, &ui) in self.u.iter().enumerate() {
            let top = tops[i];
            let name = fresh_name(format!("{}_{}", self.name(ui), top), &taken);
            taken.insert(name.clone());
            let id = push(&mut names, name);
            copies[i].push(id);
            new_u.push(id);
        }
        let mut remap = std::collections::HashMap::new();
        for &p in &self.params {
            remap.insert(p, push(&mut names, self.name(p).to_string()));
        }
        let mut outputs = Vec::new();
        for o in &self.outputs {
            outputs.push(match o {
                Output::Symbol(y) => {
                    let id = push(&mut names, self.name(*y).to_string());
                    remap.insert(*y, id);
                    Output::Symbol(id)
                }
                Output::Rate(x) => Output::Rate(*x),
            });
        }
        for (k, &xv) in self.x.iter().enumerate() {
            remap.insert(xv, new_x_old[k]);
        }
        let outputs = outputs
            .into_iter()
            .map(|o| match o {
                Output::Rate(x) => Output::Rate(remap[&x]),
                other => other,
            })
            .collect();
        let u_index: std::collections::HashMap<VarId, usize> =
            self.u.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let rename = |v: JetVar| -> JetVar {
            if let Some(&i) = u_index.get(&v.var) {
                let t = tops[i];
                if v.deriv <= t {
                    JetVar::new(copies[i][v.deriv as usize], 0)
                } else {
                    JetVar::new(copies[i][t as usize], v.deriv - t)
                }
            } else {
                JetVar::new(remap[&v.var], v.deriv)
            }
        };
        let mut f: Vec<DiffPoly> = self.f.iter().map(|p| p.map_vars(rename)).collect();
        let mut x = new_x_old;
        for row in &copies {
            for w in row.windows(2) {
                x.push(w[0]);
                f.push(DiffPoly::var(JetVar::new(w[1], 0)));
            }
        }
        debug_assert_eq!(x.len(), self.n() + link_states.len());
        let g = self.g.iter().map(|p| p.map_vars(rename)).collect();
        let params = self.params.iter().map(|p| remap[p]).collect();
        DaeSystem::new(SystemParts {
            field: self.field,
            names,
            x,
            u: new_u,
            params,
            f,
            g,
            outputs,
        })
        .expect("first-order reduction of a valid system is valid")
    }

    /// Turns the unknowns in `w` into transcendental parameters. A localized
    /// state's equation `Ẋ = f` moves to the `g` block with output `Ẋ`.
    pub fn localize(&self, w: &[VarId]) -> Result<DaeSystem> {
        for v in w {
            if !self.x.contains(v) && !self.u.contains(v) {
                return Err(Error::Precondition(format!(
                    "`{}` is not an unknown of the system",
                    self.names
                        .get(v.0 as usize)
                        .map(String::as_str)
                        .unwrap_or("?")
                )));
            }
        }
        if self.u.iter().all(|v| w.contains(v)) {
            return Err(Error::Precondition(
                "localization must leave at least one U variable".into(),
            ));
        }
        let mut parts = self.parts();
        parts.x.clear();
        parts.f.clear();
        let mut moved: Vec<(VarId, DiffPoly)> = Vec::new();
        for (k, &xv) in self.x.iter().enumerate() {
            if w.contains(&xv) {
                moved.push((xv, self.f[k].clone()));
            } else {
                parts.x.push(xv);
                parts.f.push(self.f[k].clone());
            }
        }
        parts.u.retain(|v| !w.contains(v));
        parts.params.extend(w.iter().copied());
        // Moved equations stay sorted by state so that localizations compose.
        let mut rates: Vec<(VarId, DiffPoly)> = Vec::new();
        let mut kept_g = Vec::new();
        let mut kept_out = Vec::new();
        for (gj, o) in self.g.iter().zip(&self.outputs) {
            match o {
                Output::Rate(x) => rates.push((*x, gj.clone())),
                Output::Symbol(_) => {
                    kept_g.push(gj.clone());
                    kept_out.push(*o);
                }
            }
        }
        rates.extend(moved);
        rates.sort_by_key(|(x, _)| *x);
        for (x, p) in rates {
            kept_g.push(p);
            kept_out.push(Output::Rate(x));
        }
        parts.g = kept_g;
        parts.outputs = kept_out;
        DaeSystem::new(parts)
    }
}

/// Builds a system from names, assigning ids in the order X, U, Y.
pub fn assemble(
    field: Field,
    x_names: &[String],
    u_names: &[String],
    f: Vec<DiffPoly>,
    g: Vec<DiffPoly>,
) -> Result<DaeSystem> {
    let mut names: Vec<String> = x_names.iter().chain(u_names).cloned().collect();
    let x = (0..x_names.len()).map(|i| VarId(i as u32)).collect();
    let u = (x_names.len()..names.len())
        .map(|i| VarId(i as u32))
        .collect();
    let mut taken: BTreeSet<String> = names.iter().cloned().collect();
    let mut outputs = Vec::new();
    for j in 0..g.len() {
        let name = fresh_name(format!("y{}", j + 1), &taken);
        taken.insert(name.clone());
        names.push(name);
        outputs.push(Output::Symbol(VarId(names.len() as u32 - 1)));
    }
    DaeSystem::new(SystemParts {
        field,
        names,
        x,
        u,
        params: Vec::new(),
        f,
        g,
        outputs,
    })
}
