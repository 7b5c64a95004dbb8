//! Independent reference implementations used by the integration tests.
//!
//! Everything here is written straight from the definitions with explicit
//! sets and divisions, sharing no code with the library beyond the instance
//! accessors, so that a bug in one side shows up as a disagreement.

#![allow(dead_code)]

use std::collections::BTreeSet;

use manna_core::gen::{GenConfig, Mix};
use manna_core::scalar::Rational;
use manna_core::{Allocation, Instance};
use num_traits::{Signed, Zero};

pub type Bundle = BTreeSet<usize>;

pub fn bundles(a: &Allocation) -> Vec<Bundle> {
    let mut out = vec![Bundle::new(); a.agents()];
    for (j, &o) in a.owners().iter().enumerate() {
        out[o].insert(j);
    }
    out
}

pub fn value(inst: &Instance<Rational>, i: usize, b: &Bundle) -> Rational {
    b.iter().map(|&t| inst.value(i, t).clone()).sum()
}

fn without(b: &Bundle, t: usize) -> Bundle {
    let mut c = b.clone();
    c.remove(&t);
    c
}

fn with(b: &Bundle, t: usize) -> Bundle {
    let mut c = b.clone();
    c.insert(t);
    c
}

/// `v_i(X) / w_i` against `v_i(Y) / w_j`, by division.
fn less(inst: &Instance<Rational>, i: usize, j: usize, x: &Bundle, y: &Bundle) -> bool {
    value(inst, i, x) / inst.weight(i) < value(inst, i, y) / inst.weight(j)
}

pub fn envies(inst: &Instance<Rational>, a: &Allocation, i: usize, j: usize) -> bool {
    let b = bundles(a);
    i != j && less(inst, i, j, &b[i], &b[j])
}

pub fn ef1_envies(inst: &Instance<Rational>, a: &Allocation, i: usize, j: usize) -> bool {
    let b = bundles(a);
    envies(inst, a, i, j)
        && b[i]
            .iter()
            .all(|&t| less(inst, i, j, &without(&b[i], t), &b[j]))
        && b[j]
            .iter()
            .all(|&t| less(inst, i, j, &b[i], &without(&b[j], t)))
}

/// Transfer reading: the item moves to the other bundle.
pub fn ef1t_envies(inst: &Instance<Rational>, a: &Allocation, i: usize, j: usize) -> bool {
    let b = bundles(a);
    envies(inst, a, i, j)
        && b[i]
            .iter()
            .all(|&t| less(inst, i, j, &without(&b[i], t), &with(&b[j], t)))
        && b[j]
            .iter()
            .all(|&t| less(inst, i, j, &with(&b[i], t), &without(&b[j], t)))
}

fn all_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
}

pub fn is_ef(inst: &Instance<Rational>, a: &Allocation) -> bool {
    all_pairs(inst.n()).all(|(i, j)| !envies(inst, a, i, j))
}

pub fn is_ef1(inst: &Instance<Rational>, a: &Allocation) -> bool {
    all_pairs(inst.n()).all(|(i, j)| !ef1_envies(inst, a, i, j))
}

pub fn is_ef1t(inst: &Instance<Rational>, a: &Allocation) -> bool {
    all_pairs(inst.n()).all(|(i, j)| !ef1t_envies(inst, a, i, j))
}

/// Every owner vector in `[0, n)^m`, by recursion.
pub fn all_allocations(n: usize, m: usize) -> Vec<Allocation> {
    fn go(n: usize, m: usize, prefix: &mut Vec<usize>, out: &mut Vec<Allocation>) {
        if prefix.len() == m {
            out.push(Allocation::from_owners(n, prefix.clone()).unwrap());
            return;
        }
        for o in 0..n {
            prefix.push(o);
            go(n, m, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    go(n, m, &mut Vec::new(), &mut out);
    out
}

/// Some integral allocation Pareto-dominating `a`, by brute force.
pub fn pareto_dominator(inst: &Instance<Rational>, a: &Allocation) -> Option<Allocation> {
    let base: Vec<Rational> = bundles(a)
        .iter()
        .enumerate()
        .map(|(i, b)| value(inst, i, b))
        .collect();
    all_allocations(inst.n(), inst.m()).into_iter().find(|x| {
        let vals: Vec<Rational> = bundles(x)
            .iter()
            .enumerate()
            .map(|(i, b)| value(inst, i, b))
            .collect();
        vals.iter().zip(&base).all(|(v, b)| v >= b) && vals.iter().zip(&base).any(|(v, b)| v > b)
    })
}

/// Price-based WEF1 envy, literally: `p(A_i)/w_i < p(A_j)/w_j`, surviving
/// removal of any item from `A_j` and of any item from `A_i`.
pub fn pwef1_envies(
    inst: &Instance<Rational>,
    a: &Allocation,
    prices: &[Rational],
    i: usize,
    j: usize,
) -> bool {
    let b = bundles(a);
    let p = |x: &Bundle| x.iter().map(|&t| prices[t].clone()).sum::<Rational>();
    let lt = |x: &Bundle, y: &Bundle| p(x) / inst.weight(i) < p(y) / inst.weight(j);
    i != j
        && lt(&b[i], &b[j])
        && b[j].iter().all(|&t| lt(&b[i], &without(&b[j], t)))
        && b[i].iter().all(|&t| lt(&without(&b[i], t), &b[j]))
}

/// Equilibrium by the textbook definition: find `alpha_i` from a held
/// non-zero-priced item (or test all candidate ratios when none is held).
pub fn is_equilibrium(inst: &Instance<Rational>, a: &Allocation, prices: &[Rational]) -> bool {
    for j in 0..inst.m() {
        let col: Vec<&Rational> = (0..inst.n()).map(|i| inst.value(i, j)).collect();
        let ok = if col.iter().any(|v| v.is_positive()) {
            prices[j].is_positive()
        } else if col.iter().all(|v| v.is_negative()) {
            prices[j].is_negative()
        } else {
            prices[j].is_zero()
        };
        if !ok {
            return false;
        }
    }
    (0..inst.n()).all(|i| {
        let ratios: Vec<Rational> = (0..inst.m())
            .filter(|&j| !prices[j].is_zero())
            .map(|j| inst.value(i, j).clone() / &prices[j])
            .collect();
        let mut candidates: Vec<Rational> = (0..inst.m())
            .filter(|&j| a.owner(j) == i && !prices[j].is_zero())
            .map(|j| inst.value(i, j).clone() / &prices[j])
            .collect();
        if candidates.is_empty() {
            candidates = ratios.clone();
            candidates.push(Rational::from_integer(1.into()));
            let lo = ratios.iter().cloned().fold(None::<Rational>, |m, r| {
                Some(m.map_or(r.clone(), |m| if r > m { r } else { m }))
            });
            if let Some(lo) = lo {
                candidates.push(lo + Rational::from_integer(1.into()));
            }
        }
        candidates
            .iter()
            .filter(|alpha| alpha.is_positive())
            .any(|alpha| {
                (0..inst.m()).all(|j| {
                    let bound = alpha * &prices[j];
                    let v = inst.value(i, j);
                    if a.owner(j) == i {
                        *v == bound
                    } else {
                        *v <= bound
                    }
                })
            })
    })
}

/// Deterministic stream of instances from the library generator.
pub fn random_instance(
    seed: u64,
    agents: usize,
    items: usize,
    value: (i64, i64),
    weight: (u64, u64),
) -> Instance<Rational> {
    GenConfig {
        agents,
        items,
        seed,
        value_lo: value.0,
        value_hi: value.1,
        denominator: 1,
        weight_lo: weight.0,
        weight_hi: weight.1,
        mix: None,
    }
    .generate()
    .unwrap()
}

/// Items whose sign is shared by all agents (goods, chores, some neutral),
/// magnitudes in `[1, hi]`. One agent tends to win everything under welfare
/// maximisation, which gives the local search real work.
pub fn signed_instance(seed: u64, agents: usize, items: usize, hi: i64) -> Instance<Rational> {
    GenConfig {
        agents,
        items,
        seed,
        value_lo: 1,
        value_hi: hi,
        denominator: 1,
        weight_lo: 1,
        weight_hi: 5,
        mix: Some(Mix {
            goods: 0.5,
            chores: 0.4,
            neutral: 0.1,
        }),
    }
    .generate()
    .unwrap()
}

/// Small deterministic mixer for choosing sizes in sweeps.
pub fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub fn q(n: i64) -> Rational {
    Rational::from_integer(n.into())
}

pub fn frac(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}
