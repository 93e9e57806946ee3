//! Command-line front end: argument handling, report assembly and rendering.

use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::diffpoly::{JetVar, VarId};
use crate::error::{Error, Result};
use crate::indexcore::{differentiation_index, hat_index, modified_index, search_cap, MuSequence};
use crate::invariants::{check_order_bounds, hilbert_kolchin, ideal_order, jacobi_bound};
use crate::parse::{jet_name, parse_jet, serialize, SystemDocument};
use crate::ranklab::{RankEngine, RankMode};
use crate::relfind::{
    degree_bound, implicit_relation, BoundFlavor, RelationOutcome, RelationQuery,
};
use crate::report::{
    emit_report, AnalysisReport, Avail, BasisSection, BoundsSection, IndexSection, RankSettings,
    RelationSection, SystemEcho,
};
use crate::sysmodel::DaeSystem;
use crate::transbasis::{differential_transcendence_basis, verify_order_preservation};

#[derive(Parser, Debug)]
#[command(
    name = "daeindex",
    version,
    about = "Differentiation index and order invariants of polynomial DAE systems"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Seed for every randomized rank test.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Failure probability per rank query, as `2^-k` or a decimal.
    #[arg(long, global = true, default_value = "2^-40", value_parser = parse_epsilon)]
    epsilon: f64,
    /// Compute every rank symbolically.
    #[arg(long, global = true)]
    exact: bool,
    /// Record every rank query in the report.
    #[arg(long, global = true)]
    audit: bool,
    /// Print the report as JSON.
    #[arg(long, global = true)]
    json: bool,
    /// Override the search cap for σ (experiments only).
    #[arg(long, global = true)]
    kmax: Option<u32>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Index, invariants, bounds and transcendence basis.
    Analyze(FileArg),
    /// μ-sequence and the indices σ, σ̃, σ̂.
    Index(FileArg),
    /// Ideal order, Hilbert-Kolchin polynomial and order bounds.
    Bounds(FileArg),
    /// Order-preserving differential transcendence basis.
    Basis(FileArg),
    /// Search for an implicit polynomial relation.
    Relation(RelationArgs),
}

#[derive(Args, Debug)]
struct FileArg {
    file: PathBuf,
}

#[derive(Args, Debug)]
struct RelationArgs {
    file: PathBuf,
    /// Target jet, e.g. `u1` or `u4''`.
    #[arg(long)]
    target: String,
    /// Basis jets, comma separated.
    #[arg(long, value_delimiter = ',')]
    basis: Vec<String>,
    /// Output jets, comma separated.
    #[arg(long = "y-jets", value_delimiter = ',')]
    y_jets: Vec<String>,
    /// Include every output jet of order at most this level.
    #[arg(long = "y-level")]
    y_level: Option<u32>,
    #[arg(long = "max-degree", default_value_t = 3)]
    max_degree: u32,
    /// Unknowns to move into the base field first, comma separated.
    #[arg(long, value_delimiter = ',')]
    localize: Vec<String>,
}

fn parse_epsilon(s: &str) -> std::result::Result<f64, String> {
    let t = s.trim();
    let v = if let Some(exp) = t.strip_prefix("2^") {
        let exp = exp.trim_start_matches('(').trim_end_matches(')');
        let k: i32 = exp.parse().map_err(|_| format!("bad exponent in `{s}`"))?;
        2f64.powi(k)
    } else {
        t.parse::<f64>()
            .map_err(|_| format!("`{s}` is neither 2^-k nor a decimal"))?
    };
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("epsilon must lie in (0, 1), got {s}"))
    }
}

fn epsilon_text(eps: f64) -> String {
    let k = eps.log2();
    if k.fract() == 0.0 {
        format!("2^{k}")
    } else {
        format!("{eps:e}")
    }
}

struct Loaded {
    name: Option<String>,
    sys: DaeSystem,
}

fn load(path: &PathBuf) -> Result<Loaded> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })?;
    let doc = SystemDocument::from_json(&text)?;
    let sys = doc.build()?;
    Ok(Loaded {
        name: doc.name,
        sys,
    })
}

fn index_section(
    sys: &DaeSystem,
    engine: &RankEngine,
    kmax: Option<u32>,
    full: bool,
) -> Result<IndexSection> {
    let mu = differentiation_index(sys, engine, "sigma", kmax)?;
    let sigma = mu.sigma.expect("stabilized");
    let mut sec = IndexSection {
        sigma,
        search_cap: kmax.unwrap_or_else(|| search_cap(sys)),
        mu,
        sigma_tilde: None,
        mu_tilde: None,
        sigma_tilde_note: None,
        sigma_hat: None,
        mu_hat: None,
    };
    if full {
        match modified_index(sys, engine, kmax) {
            Ok(t) => {
                sec.sigma_tilde = Some(Avail::Value(t.sigma.expect("stabilized")));
                sec.mu_tilde = Some(t.values);
            }
            Err(Error::Precondition(msg)) => {
                sec.sigma_tilde = Some(Avail::na());
                sec.sigma_tilde_note = Some(msg);
            }
            Err(e) => return Err(e),
        }
        let hat = hat_index(sys, engine, kmax)?;
        sec.sigma_hat = Some(hat.sigma.expect("stabilized"));
        sec.mu_hat = Some(hat.values);
    }
    Ok(sec)
}

fn bounds_section(sys: &DaeSystem, mu: &MuSequence, cap: u32) -> Result<BoundsSection> {
    let ord = ideal_order(sys, mu)?;
    let check = check_order_bounds(sys, ord);
    let jacobi_note = match jacobi_bound(sys) {
        Err(Error::Precondition(msg)) => Some(msg),
        Err(e) => return Err(e),
        Ok(None) => Some("vacuous: every permutation meets an absent order".into()),
        Ok(Some(_)) if !check.jacobi_proved => {
            Some("conjectural for n > 0: reported, not asserted".into())
        }
        Ok(Some(_)) => None,
    };
    let mu_bounds_hold = mu
        .values
        .iter()
        .zip(&mu.bounds)
        .all(|(&v, &(lo, hi))| lo <= v as u64 && v as u64 <= hi);
    Ok(BoundsSection {
        ord,
        hilbert_kolchin: hilbert_kolchin(sys, mu)?,
        greenspan: check.greenspan,
        ritt: check.ritt,
        jacobi: check.jacobi.into(),
        jacobi_note,
        tight: check.tight,
        order_bounds_hold: check.holds,
        mu_bounds_hold,
        sigma_within_cap: mu.sigma.is_some_and(|s| s <= cap),
    })
}

/// Basis on the system itself when e = 1, otherwise on its first-order reduction.
fn basis_section(sys: &DaeSystem, engine: &RankEngine, kmax: Option<u32>) -> Result<BasisSection> {
    let reduced = sys.e() != 1;
    let target = if reduced {
        sys.reduce_to_first_order()
    } else {
        sys.clone()
    };
    let mu = differentiation_index(&target, engine, if reduced { "hat" } else { "sigma" }, kmax)?;
    let sigma = mu.sigma.expect("stabilized");
    let basis = differential_transcendence_basis(&target, engine, sigma)?;
    let w: Vec<VarId> = basis
        .w
        .iter()
        .map(|n| target.lookup(n).expect("basis names come from the system"))
        .collect();
    let order_preservation = if target.u().iter().all(|u| w.contains(u)) {
        Avail::na()
    } else {
        Avail::Value(verify_order_preservation(&target, engine, &w)?)
    };
    Ok(BasisSection {
        reduced,
        note: reduced.then(|| {
            format!(
                "e = {}: basis computed on the first-order reduction, in its variables",
                sys.e()
            )
        }),
        sigma,
        basis,
        order_preservation,
    })
}

fn lookup_all(sys: &DaeSystem, names: &[String]) -> Result<Vec<VarId>> {
    names
        .iter()
        .map(|n| {
            sys.lookup(n.trim())
                .ok_or_else(|| Error::Precondition(format!("unknown variable `{n}`")))
        })
        .collect()
}

fn jets(sys: &DaeSystem, texts: &[String]) -> Result<Vec<JetVar>> {
    let names = sys.names().to_vec();
    texts
        .iter()
        .filter(|t| !t.trim().is_empty())
        .map(|t| parse_jet(t.trim(), &names).map_err(Error::from))
        .collect()
}

fn relation_section(
    sys: &DaeSystem,
    engine: &RankEngine,
    args: &RelationArgs,
    kmax: Option<u32>,
) -> Result<RelationSection> {
    let w = lookup_all(sys, &args.localize)?;
    let local = if w.is_empty() {
        sys.clone()
    } else {
        sys.localize(&w)?
    };
    let target = jets(&local, std::slice::from_ref(&args.target))?[0];
    let basis = jets(&local, &args.basis)?;
    let mut y_jets = jets(&local, &args.y_jets)?;
    if let Some(level) = args.y_level {
        for y in local.output_symbols() {
            for l in 0..=level {
                let j = JetVar::new(y, l);
                if !y_jets.contains(&j) {
                    y_jets.push(j);
                }
            }
        }
    }
    let sigma = differentiation_index(&local, engine, "sigma", kmax)?
        .sigma
        .expect("stabilized");
    let query = RelationQuery {
        target,
        basis,
        y_jets,
        max_degree: args.max_degree,
    };
    let outcome = implicit_relation(&local, &query, engine.seed)?;
    let names = local.names();
    let d = local.degree_bound();
    let (relation, degree, verified_points) = match outcome {
        RelationOutcome::Found {
            relation,
            degree,
            verified_points,
            ..
        } => (
            Avail::Value(serialize(&relation, names)),
            Some(degree),
            Some(verified_points),
        ),
        RelationOutcome::NoneUpTo(_) => (Avail::na(), None, None),
    };
    Ok(RelationSection {
        target: jet_name(query.target, names),
        basis: query.basis.iter().map(|&j| jet_name(j, names)).collect(),
        y_jets: query.y_jets.iter().map(|&j| jet_name(j, names)).collect(),
        max_degree: query.max_degree,
        localized: w.iter().map(|&v| local.name(v).to_string()).collect(),
        relation,
        degree,
        verified_points,
        degree_bound_v1: degree_bound(d, sigma, local.n(), local.r(), BoundFlavor::V1).to_string(),
        degree_bound_v0: degree_bound(d, sigma, local.n(), local.r(), BoundFlavor::V0).to_string(),
        note: "output jets are kept symbolic; specializing them to constants is left to the caller"
            .into(),
    })
}

impl Cli {
    fn engine(&self) -> RankEngine {
        let mode = if self.exact {
            RankMode::Exact
        } else {
            RankMode::Default
        };
        RankEngine::new(mode, self.epsilon, self.seed)
    }

    /// Computes the report for the parsed command line.
    pub fn report(&self) -> Result<AnalysisReport> {
        let engine = self.engine();
        let settings = RankSettings {
            mode: engine.mode,
            epsilon: engine.epsilon,
            seed: engine.seed,
        };
        let (verb, file) = match &self.command {
            Command::Analyze(f) => ("analyze", &f.file),
            Command::Index(f) => ("index", &f.file),
            Command::Bounds(f) => ("bounds", &f.file),
            Command::Basis(f) => ("basis", &f.file),
            Command::Relation(a) => ("relation", &a.file),
        };
        let loaded = load(file)?;
        let sys = &loaded.sys;
        let mut rep = AnalysisReport::empty(verb, settings);
        rep.system = Some(SystemEcho::of(sys, loaded.name.clone()));
        match &self.command {
            Command::Analyze(_) | Command::Index(_) | Command::Bounds(_) => {
                let full = !matches!(self.command, Command::Bounds(_));
                let idx = index_section(sys, &engine, self.kmax, full)?;
                if !matches!(self.command, Command::Index(_)) {
                    rep.bounds = Some(bounds_section(sys, &idx.mu, idx.search_cap)?);
                }
                rep.index = Some(idx);
                if matches!(self.command, Command::Analyze(_)) {
                    match basis_section(sys, &engine, self.kmax) {
                        Ok(b) => rep.basis = Some(Avail::Value(b)),
                        Err(Error::Precondition(msg)) => {
                            rep.basis = Some(Avail::na());
                            rep.basis_note = Some(msg);
                        }
                        Err(e) => return Err(e),
                    }
                }
            }
            Command::Basis(_) => {
                rep.basis = Some(Avail::Value(basis_section(sys, &engine, self.kmax)?))
            }
            Command::Relation(args) => {
                rep.relation = Some(relation_section(sys, &engine, args, self.kmax)?)
            }
        }
        if self.audit {
            rep.audit = Some(engine.audit());
        }
        Ok(rep)
    }

    pub fn json(&self) -> bool {
        self.json
    }
}

fn tuple<T: std::fmt::Display>(v: &[T]) -> String {
    let parts: Vec<String> = v.iter().map(T::to_string).collect();
    format!("({})", parts.join(", "))
}

fn set(v: &[String]) -> String {
    format!("{{{}}}", v.join(", "))
}

fn avail<T: std::fmt::Display>(a: &Avail<T>) -> String {
    a.value().map_or_else(|| "n/a".to_string(), T::to_string)
}

/// Plain-text rendering with the μ table as its centrepiece.
pub fn render_text(r: &AnalysisReport) -> String {
    let mut s = String::new();
    if let Some(sys) = &r.system {
        let eps: Vec<String> = sys
            .eps
            .iter()
            .map(|e| e.map_or_else(|| "-".to_string(), |v| v.to_string()))
            .collect();
        let _ = writeln!(
            s,
            "system {}  over {}  n = {}  m = {}  r = {}  e = {}",
            sys.name.as_deref().unwrap_or("(unnamed)"),
            sys.field.tag(),
            sys.n,
            sys.m,
            sys.r,
            sys.e
        );
        let _ = writeln!(s, "  e_j = {}  eps = {}", tuple(&sys.e_j), tuple(&eps));
        for w in &sys.warnings {
            let _ = writeln!(s, "  warning: {w}");
        }
    }
    let _ = writeln!(
        s,
        "ranks: {} mode, epsilon {}, seed {}",
        r.ranks.mode.name(),
        epsilon_text(r.ranks.epsilon),
        r.ranks.seed
    );
    if let Some(idx) = &r.index {
        let _ = writeln!(s);
        let _ = writeln!(s, "{:>4} {:>6} {:>7} {:>7}", "k", "mu_k", "lower", "upper");
        for (k, (&mu, &(lo, hi))) in idx.mu.values.iter().zip(&idx.mu.bounds).enumerate() {
            let _ = writeln!(s, "{k:>4} {mu:>6} {lo:>7} {hi:>7}");
        }
        let _ = writeln!(s, "sigma = {}  (search cap {})", idx.sigma, idx.search_cap);
        if let Some(t) = &idx.sigma_tilde {
            let mu = idx
                .mu_tilde
                .as_deref()
                .map(|m| format!("  {}", tuple(m)))
                .unwrap_or_default();
            let _ = writeln!(s, "sigma_tilde = {}{mu}", avail(t));
            if let Some(note) = &idx.sigma_tilde_note {
                let _ = writeln!(s, "  ({note})");
            }
        }
        if let Some(h) = idx.sigma_hat {
            let mu = idx
                .mu_hat
                .as_deref()
                .map(|m| format!("  {}", tuple(m)))
                .unwrap_or_default();
            let _ = writeln!(s, "sigma_hat = {h}{mu}");
        }
    }
    if let Some(b) = &r.bounds {
        let hk = &b.hilbert_kolchin;
        let _ = writeln!(s);
        let _ = writeln!(s, "ord = {}", b.ord);
        let _ = writeln!(
            s,
            "Hilbert-Kolchin polynomial: {}(T+1) + {}  (regularity from i >= {})",
            hk.slope, hk.constant, hk.regularity_bound
        );
        let _ = writeln!(
            s,
            "bounds: greenspan {}  ritt {}  jacobi {}{}",
            b.greenspan,
            b.ritt,
            avail(&b.jacobi),
            b.jacobi_note
                .as_deref()
                .map(|n| format!(" ({n})"))
                .unwrap_or_default()
        );
        let tight = if b.tight.is_empty() {
            "none".to_string()
        } else {
            b.tight.join(", ")
        };
        let _ = writeln!(
            s,
            "tight: {tight}  order bounds hold: {}  mu bounds hold: {}  sigma within cap: {}",
            b.order_bounds_hold, b.mu_bounds_hold, b.sigma_within_cap
        );
    }
    match &r.basis {
        Some(Avail::Value(b)) => {
            let _ = writeln!(s);
            if let Some(note) = &b.note {
                let _ = writeln!(s, "{note}");
            }
            let _ = writeln!(
                s,
                "basis: W = {}  xi = {}  eta = {}",
                set(&b.basis.w),
                set(&b.basis.xi),
                set(&b.basis.eta)
            );
            match &b.order_preservation {
                Avail::Value(op) => {
                    let _ = writeln!(
                        s,
                        "order preserved: {} (ord {} -> {})",
                        op.preserved, op.ord, op.ord_localized
                    );
                }
                Avail::Na(_) => {
                    let _ = writeln!(s, "order preserved: n/a (W contains every U)");
                }
            }
        }
        Some(Avail::Na(_)) => {
            let _ = writeln!(s);
            let _ = writeln!(s, "basis: n/a ({})", r.basis_note.as_deref().unwrap_or(""));
        }
        None => {}
    }
    if let Some(rel) = &r.relation {
        let _ = writeln!(s);
        if !rel.localized.is_empty() {
            let _ = writeln!(s, "localized at {}", set(&rel.localized));
        }
        let _ = writeln!(
            s,
            "target {}  basis {}  output jets {}  max degree {}",
            rel.target,
            set(&rel.basis),
            set(&rel.y_jets),
            rel.max_degree
        );
        match (&rel.relation, rel.degree) {
            (Avail::Value(p), Some(d)) => {
                let _ = writeln!(
                    s,
                    "relation (degree {d}, verified on {} fresh points): {p} = 0",
                    rel.verified_points.unwrap_or(0)
                );
            }
            _ => {
                let _ = writeln!(s, "no relation up to degree {}", rel.max_degree);
            }
        }
        let _ = writeln!(
            s,
            "degree bounds: {} (sigma + 1 levels), {} (sigma levels)",
            rel.degree_bound_v1, rel.degree_bound_v0
        );
    }
    if let Some(audit) = &r.audit {
        let _ = writeln!(s);
        let _ = writeln!(s, "rank audit ({} queries)", audit.len());
        for a in audit {
            let _ = writeln!(
                s,
                "  {:<28} {:>3}x{:<3} rank {:>3}  {}  trials {}  B {}  D {}",
                a.label, a.rows, a.cols, a.rank, a.method, a.trials, a.bound, a.degree
            );
        }
    }
    s
}

/// Runs the tool on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            if code == 0 {
                let _ = out.write_all(text.as_bytes());
            } else {
                let _ = err.write_all(text.as_bytes());
            }
            return code;
        }
    };
    match cli.report() {
        Ok(rep) => {
            let text = if cli.json() {
                emit_report(&rep)
            } else {
                render_text(&rep)
            };
            let _ = out.write_all(text.as_bytes());
            0
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
