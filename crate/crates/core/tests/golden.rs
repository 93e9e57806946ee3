mod common;

use common::*;
use dae_index::diffpoly::{DiffPoly, JetVar};
use dae_index::indexcore::{differentiation_index, hat_index, modified_index, mu_at, MuSequence};
use dae_index::invariants::{
    greenspan_bound, hilbert_kolchin, ideal_order, jacobi_bound, ritt_bound,
};
use dae_index::parse::parse_expression;
use dae_index::ranklab::RankMode;
use dae_index::relfind::{implicit_relation, RelationOutcome, RelationQuery};
use dae_index::sysmodel::DaeSystem;
use dae_index::transbasis::{
    differential_transcendence_basis, is_algebraically_independent, verify_order_preservation,
};
use dae_index::Error;
use itertools::Itertools;

/// Expected values per golden system: name, σ, σ̃ (None when not
/// applicable), σ̂, ord, Greenspan, Ritt and Jacobi (None when not applicable).
type Expected = (
    &'static str,
    u32,
    Option<u32>,
    u32,
    u64,
    u64,
    u64,
    Option<u64>,
);

const EXPECTED: &[Expected] = &[
    ("chain3", 0, None, 0, 2, 2, 2, None),
    ("chain4", 0, None, 0, 3, 3, 3, None),
    ("chain5", 0, None, 0, 4, 4, 4, None),
    ("jacobi4", 4, Some(3), 4, 0, 3, 3, Some(0)),
    ("jacobi5", 5, Some(4), 5, 0, 4, 4, Some(0)),
    ("ode_forced", 0, None, 0, 2, 2, 2, None),
    ("ode_observed", 2, None, 2, 1, 2, 2, None),
    ("ode_timevarying", 1, None, 1, 1, 1, 1, None),
    ("pendulum", 4, Some(2), 3, 2, 4, 4, Some(2)),
    ("toy_second_order", 0, None, 0, 2, 2, 2, None),
    ("toy_single", 1, Some(0), 1, 0, 0, 0, Some(0)),
];

fn index(sys: &DaeSystem, mode: RankMode) -> MuSequence {
    differentiation_index(sys, &engine(mode, 0), "sigma", None).expect("index computes")
}

fn tilde(sys: &DaeSystem, mode: RankMode) -> Option<u32> {
    match modified_index(sys, &engine(mode, 0), None) {
        Ok(mu) => mu.sigma,
        Err(Error::Precondition(_)) => None,
        Err(e) => panic!("σ̃: {e}"),
    }
}

#[test]
fn golden_table_covers_every_system() {
    let names: Vec<String> = golden_all().into_iter().map(|(n, _)| n).collect();
    let table: Vec<&str> = EXPECTED.iter().map(|e| e.0).collect();
    assert_eq!(names, table);
}

#[test]
fn golden_values_match_in_every_rank_mode() {
    for &(name, sigma, sigma_tilde, sigma_hat, ord, greenspan, ritt, jacobi) in EXPECTED {
        let sys = golden(name);
        for mode in [RankMode::Default, RankMode::Exact, RankMode::Probabilistic] {
            let mu = index(&sys, mode);
            let ctx = format!("{name} ({mode:?})");
            assert_eq!(mu.sigma, Some(sigma), "σ {ctx}");
            assert_eq!(tilde(&sys, mode), sigma_tilde, "σ̃ {ctx}");
            let hat = hat_index(&sys, &engine(mode, 0), None).expect("σ̂ computes");
            assert_eq!(hat.sigma, Some(sigma_hat), "σ̂ {ctx}");
            assert_eq!(ideal_order(&sys, &mu).unwrap(), ord, "ord {ctx}");
        }
        assert_eq!(greenspan_bound(&sys), greenspan, "greenspan {name}");
        assert_eq!(ritt_bound(&sys), ritt, "ritt {name}");
        assert_eq!(jacobi_bound(&sys).ok().flatten(), jacobi, "jacobi {name}");
    }
}

#[test]
fn mu_is_independent_of_the_window_offset() {
    let eng = engine(RankMode::Exact, 0);
    for (name, sys) in golden_all() {
        let i0 = sys.e() - 1;
        for k in 0..=4 {
            let values: Vec<u32> = (i0..=i0 + 2)
                .map(|i| mu_at(&sys, &eng, "offset", k, i).unwrap())
                .collect();
            assert!(
                values.iter().all_equal(),
                "{name}: μ_{k} over i = {i0}.. is {values:?}"
            );
        }
    }
}

#[test]
fn hilbert_kolchin_function_matches_polynomial_when_e_is_one() {
    let eng = engine(RankMode::Exact, 0);
    for (name, sys) in golden_all().into_iter().filter(|(_, s)| s.e() == 1) {
        let mu = index(&sys, RankMode::Exact);
        let hk = hilbert_kolchin(&sys, &mu).unwrap();
        let sigma = mu.sigma.unwrap();
        let base = (sys.n() + sys.r()) as i64;
        for i in 0..=2u32 {
            let mu_i = mu_at(&sys, &eng, "hk", sigma, i).unwrap() as i64;
            let h = (sys.m() as i64 - sys.r() as i64) * (i as i64 + 1) + base - mu_i;
            assert_eq!(h, hk.at(i as u64), "{name} at i = {i}");
        }
    }
}

#[test]
fn first_order_reduction_keeps_the_slope() {
    let eng = engine(RankMode::Default, 0);
    for (name, sys) in golden_all() {
        let reduced = sys.reduce_to_first_order();
        assert_eq!(reduced.e(), 1, "{name}");
        let mu = index(&sys, RankMode::Default);
        let mu_r = differentiation_index(&reduced, &eng, "reduced", None).unwrap();
        let (hk, hk_r) = (
            hilbert_kolchin(&sys, &mu).unwrap(),
            hilbert_kolchin(&reduced, &mu_r).unwrap(),
        );
        assert_eq!(hk.slope, hk_r.slope, "{name}");
        assert!(
            hk.constant <= hk_r.constant,
            "{name}: ord {} > reduced {}",
            hk.constant,
            hk_r.constant
        );
    }
}

fn same_system(a: &DaeSystem, b: &DaeSystem) -> bool {
    let sorted = |s: &DaeSystem| s.params().iter().copied().sorted().collect::<Vec<_>>();
    a.x() == b.x()
        && a.u() == b.u()
        && sorted(a) == sorted(b)
        && a.f() == b.f()
        && a.g() == b.g()
        && a.outputs() == b.outputs()
}

#[test]
fn localizations_compose() {
    for name in ["chain4", "ode_forced", "ode_observed", "ode_timevarying"] {
        let sys = golden(name);
        let unknowns = sys.unknowns();
        for (a, b) in unknowns.iter().tuple_combinations() {
            let (w, w2) = (vec![*a], vec![*b]);
            let Ok(both) = sys.localize(&[*a, *b]) else {
                continue;
            };
            let stepwise = sys.localize(&w).unwrap().localize(&w2).unwrap();
            assert!(
                same_system(&stepwise, &both),
                "{name}: {} then {}",
                sys.name(*a),
                sys.name(*b)
            );
        }
    }
}

#[test]
fn transcendence_bases_partition_the_unknowns() {
    for (name, sys) in golden_all().into_iter().filter(|(_, s)| s.e() == 1) {
        let eng = engine(RankMode::Default, 3);
        let mu = index(&sys, RankMode::Default);
        let sigma = mu.sigma.unwrap();
        let ord = ideal_order(&sys, &mu).unwrap() as usize;
        let basis = differential_transcendence_basis(&sys, &eng, sigma).unwrap();
        let again =
            differential_transcendence_basis(&sys, &engine(RankMode::Default, 3), sigma).unwrap();
        assert_eq!(basis, again, "{name}: greedy is deterministic");

        let all: Vec<&str> = basis
            .w
            .iter()
            .chain(&basis.xi)
            .chain(&basis.eta)
            .map(String::as_str)
            .sorted()
            .collect();
        let unknowns: Vec<&str> = sys
            .unknowns()
            .iter()
            .map(|&v| sys.name(v))
            .sorted()
            .collect();
        assert_eq!(all, unknowns, "{name}: partition");
        assert_eq!(basis.w.len(), sys.m() - sys.r(), "{name}: |W|");
        assert_eq!(basis.xi.len(), ord, "{name}: |ξ|");
        assert_eq!(basis.level0.len(), sys.m() - sys.r() + ord, "{name}: |𝓑_0|");

        // Every subset of an independent set is independent.
        let level0: Vec<JetVar> = basis.level0.iter().map(|v| jet(&sys, v, 0)).collect();
        for size in 0..level0.len() {
            for subset in level0.iter().copied().combinations(size) {
                assert!(
                    is_algebraically_independent(&sys, &eng, sigma, &subset, 0).unwrap(),
                    "{name}: {subset:?}"
                );
            }
        }

        let w: Vec<_> = basis.w.iter().map(|v| sys.lookup(v).unwrap()).collect();
        if !w.is_empty() && sys.u().iter().any(|u| !w.contains(u)) {
            let op = verify_order_preservation(&sys, &eng, &w).unwrap();
            assert!(
                op.preserved,
                "{name}: ord {} vs localized {}",
                op.ord, op.ord_localized
            );
        }
    }
}

fn relation(
    sys: &DaeSystem,
    target: JetVar,
    basis: Vec<JetVar>,
    y_jets: Vec<JetVar>,
    max_degree: u32,
) -> DiffPoly {
    let q = RelationQuery {
        target,
        basis,
        y_jets,
        max_degree,
    };
    match implicit_relation(sys, &q, 0).unwrap() {
        RelationOutcome::Found { relation, .. } => relation,
        RelationOutcome::NoneUpTo(d) => panic!("no relation up to degree {d}"),
    }
}

fn equal_up_to_sign(p: &DiffPoly, q: &DiffPoly) -> bool {
    p == q || *p == -q
}

#[test]
fn zero_dimensional_system_has_linear_relations() {
    let sys = golden("jacobi4");
    let sigma = index(&sys, RankMode::Exact).sigma.unwrap();
    let y_jets: Vec<JetVar> = ["y1", "y2", "y3", "y4"]
        .iter()
        .flat_map(|y| (0..=sigma).map(|d| jet(&sys, y, d)))
        .collect();
    let p = relation(&sys, jet(&sys, "u4", 1), vec![], y_jets, 2);
    let expected = parse_expression(
        "u4' - y4' + y3'' - y2''' + y1''''",
        &sys.names().to_vec(),
        sys.field(),
    )
    .unwrap();
    assert!(equal_up_to_sign(&p, &expected), "{p:?}");
}

#[test]
fn pendulum_constraint_is_recovered() {
    let sys = golden("pendulum");
    let p = relation(
        &sys,
        jet(&sys, "u1", 0),
        vec![jet(&sys, "u2", 0)],
        vec![jet(&sys, "y3", 0)],
        3,
    );
    let expected =
        parse_expression("u1^2 + u2^2 - 1 - y3", &sys.names().to_vec(), sys.field()).unwrap();
    assert!(equal_up_to_sign(&p, &expected), "{p:?}");
}
