//! Exhaustive enumeration over integral allocations.
//!
//! Owner vectors are enumerated in lexicographic order (item 0 is the most
//! significant digit), so index `k` of the enumeration is `k` written in base
//! `n`. Predicates are evaluated in parallel; results are always reported in
//! enumeration order.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::fairness::{first_violation, is_fair, Notion};
use crate::instance::{Allocation, Instance};
use crate::scalar::{format_rational, ratio, rational_from_i64, Rational, Scalar};

pub const DEFAULT_CAP: u64 = 1 << 24;

/// Environment variable that overrides [`DEFAULT_CAP`].
pub const CAP_ENV: &str = "MANNA_ENUM_CAP";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SearchError {
    #[error("{n}^{m} allocations exceed the enumeration cap {cap}")]
    CapExceeded { n: usize, m: usize, cap: u64 },
    #[error("epsilon {eps} is outside {range}")]
    EpsilonOutOfRange { eps: String, range: &'static str },
}

/// Cap from [`CAP_ENV`] when set to a valid integer, else [`DEFAULT_CAP`].
pub fn cap_from_env() -> u64 {
    std::env::var(CAP_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_CAP)
}

pub fn allocation_count(n: usize, m: usize) -> Option<u64> {
    (n as u64).checked_pow(u32::try_from(m).ok()?)
}

fn checked_total(n: usize, m: usize, cap: u64) -> Result<u64, SearchError> {
    match allocation_count(n, m) {
        Some(total) if total <= cap => Ok(total),
        _ => Err(SearchError::CapExceeded { n, m, cap }),
    }
}

/// The `index`-th owner vector in lexicographic order.
pub fn allocation_at(n: usize, m: usize, mut index: u64) -> Allocation {
    let mut owner = vec![0usize; m];
    for slot in owner.iter_mut().rev() {
        *slot = (index % n as u64) as usize;
        index /= n as u64;
    }
    Allocation::from_owners(n, owner).expect("digits below n")
}

/// Odometer over all `n^m` owner vectors.
pub struct Allocations {
    n: usize,
    next: Option<Vec<usize>>,
}

impl Iterator for Allocations {
    type Item = Allocation;

    fn next(&mut self) -> Option<Allocation> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut carried = true;
        for digit in succ.iter_mut().rev() {
            *digit += 1;
            if *digit < self.n {
                carried = false;
                break;
            }
            *digit = 0;
        }
        if !carried {
            self.next = Some(succ);
        }
        Some(Allocation::from_owners(self.n, current).expect("digits below n"))
    }
}

pub fn enumerate_allocations(n: usize, m: usize, cap: u64) -> Result<Allocations, SearchError> {
    checked_total(n, m, cap)?;
    Ok(Allocations {
        n,
        next: (n > 0 || m == 0).then(|| vec![0; m]),
    })
}

/// An allocation ruled out, with the first envious pair found.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rejection {
    pub owners: Vec<usize>,
    /// Index into [`SearchReport::instances`].
    pub instance: usize,
    pub notion: Notion,
    pub envier: usize,
    pub envied: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SearchReport {
    pub instances: Vec<String>,
    pub notion: Notion,
    pub total: u64,
    /// Owner vectors of satisfying allocations, in enumeration order.
    pub satisfying: Vec<Vec<usize>>,
    pub count: u64,
    pub rejections: Vec<Rejection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchOptions {
    pub cap: u64,
    /// Stop at the first satisfying allocation.
    pub first_only: bool,
    /// Also require integral Pareto optimality.
    pub require_po: bool,
    pub record_rejections: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            cap: DEFAULT_CAP,
            first_only: false,
            require_po: false,
            record_rejections: false,
        }
    }
}

/// All allocations of `inst` satisfying `notion`.
pub fn find_allocations<T: Scalar>(
    inst: &Instance<T>,
    notion: Notion,
    cap: u64,
) -> Result<SearchReport, SearchError> {
    search(
        inst,
        notion,
        &SearchOptions {
            cap,
            ..SearchOptions::default()
        },
    )
}

pub fn search<T: Scalar>(
    inst: &Instance<T>,
    notion: Notion,
    opts: &SearchOptions,
) -> Result<SearchReport, SearchError> {
    let (n, m) = (inst.n(), inst.m());
    let total = checked_total(n, m, opts.cap)?;
    let profile = opts.require_po.then(|| ValueProfile::new(inst));
    let accept = |a: &Allocation| {
        is_fair(inst, a, notion) && profile.as_ref().is_none_or(|p| p.dominator_of(a).is_none())
    };
    let satisfying: Vec<Allocation> = if opts.first_only {
        (0..total)
            .into_par_iter()
            .map(|k| allocation_at(n, m, k))
            .find_first(|a| accept(a))
            .into_iter()
            .collect()
    } else {
        (0..total)
            .into_par_iter()
            .map(|k| allocation_at(n, m, k))
            .filter(|a| accept(a))
            .collect()
    };
    let rejections = if opts.record_rejections {
        (0..total)
            .into_par_iter()
            .filter_map(|k| {
                let a = allocation_at(n, m, k);
                first_violation(inst, &a, notion).map(|(envier, envied)| Rejection {
                    owners: a.owners().to_vec(),
                    instance: 0,
                    notion,
                    envier,
                    envied,
                })
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(SearchReport {
        instances: vec!["instance".into()],
        notion,
        total,
        count: satisfying.len() as u64,
        satisfying: satisfying.iter().map(|a| a.owners().to_vec()).collect(),
        rejections,
    })
}

/// First WEF1 allocation in enumeration order.
pub fn wef1_exists<T: Scalar>(
    inst: &Instance<T>,
    cap: u64,
) -> Result<Option<Allocation>, SearchError> {
    let (n, m) = (inst.n(), inst.m());
    let total = checked_total(n, m, cap)?;
    Ok((0..total)
        .into_par_iter()
        .map(|k| allocation_at(n, m, k))
        .find_first(|a| is_fair(inst, a, Notion::Wef1)))
}

/// Per-agent values of every item, laid out for fast domination checks.
struct ValueProfile<'a, T> {
    inst: &'a Instance<T>,
    total: u64,
}

impl<'a, T: Scalar> ValueProfile<'a, T> {
    fn new(inst: &'a Instance<T>) -> Self {
        ValueProfile {
            inst,
            total: allocation_count(inst.n(), inst.m()).unwrap_or(u64::MAX),
        }
    }

    fn values(&self, a: &Allocation) -> Vec<T> {
        let mut v = vec![T::zero(); self.inst.n()];
        for (j, &o) in a.owners().iter().enumerate() {
            v[o] = v[o].clone() + self.inst.value(o, j).clone();
        }
        v
    }

    fn dominator_of(&self, a: &Allocation) -> Option<Allocation> {
        let base = self.values(a);
        let (n, m) = (self.inst.n(), self.inst.m());
        (0..self.total)
            .into_par_iter()
            .map(|k| allocation_at(n, m, k))
            .find_first(|b| dominates(&self.values(b), &base))
    }
}

/// `x` Pareto-dominates `y`: nobody worse off, somebody strictly better off.
pub fn dominates<T: Scalar>(x: &[T], y: &[T]) -> bool {
    x.iter().zip(y).all(|(a, b)| a >= b) && x.iter().zip(y).any(|(a, b)| a > b)
}

/// First integral allocation (in enumeration order) that Pareto-dominates `a`.
pub fn pareto_dominator<T: Scalar>(
    inst: &Instance<T>,
    a: &Allocation,
    cap: u64,
) -> Result<Option<Allocation>, SearchError> {
    checked_total(inst.n(), inst.m(), cap)?;
    Ok(ValueProfile::new(inst).dominator_of(a))
}

pub fn is_pareto_optimal_integral<T: Scalar>(
    inst: &Instance<T>,
    a: &Allocation,
    cap: u64,
) -> Result<bool, SearchError> {
    Ok(pareto_dominator(inst, a, cap)?.is_none())
}

/// Instance `t` (1..=4) of the four ordinally compatible identical-valuation
/// instances with goods `g1, g2, g3` and chore `c`, equal weights.
pub fn ordinal_instance(t: usize, eps: &Rational) -> Instance<Rational> {
    assert!((1..=4).contains(&t));
    let one = rational_from_i64(1);
    let g3 = if t % 2 == 1 { eps.clone() } else { one.clone() };
    let c = if t <= 2 {
        -eps.clone()
    } else {
        rational_from_i64(-3)
    };
    let row = vec![&one + eps * rational_from_i64(2), &one + eps, g3, c];
    Instance::new(vec![one.clone(), one], vec![row.clone(), row])
        .and_then(|i| i.with_labels(vec!["g1".into(), "g2".into(), "g3".into(), "c".into()]))
        .expect("well formed")
}

fn check_eps(eps: &Rational, upper: &Rational, range: &'static str) -> Result<(), SearchError> {
    if eps > &rational_from_i64(0) && eps < upper {
        Ok(())
    } else {
        Err(SearchError::EpsilonOutOfRange {
            eps: format_rational(eps),
            range,
        })
    }
}

/// Exhaustively confirm that no allocation is WEF1 in all four ordinally
/// compatible instances. Each allocation is rejected with the first instance
/// and the first envious pair that rule it out; `satisfying` holds the
/// allocations WEF1 in all four. The impossibility holds iff it is empty.
pub fn verify_ordinal_impossibility(eps: &Rational) -> Result<SearchReport, SearchError> {
    check_eps(eps, &ratio(1, 4), "(0, 1/4)")?;
    let instances: Vec<Instance<Rational>> = (1..=4).map(|t| ordinal_instance(t, eps)).collect();
    let mut satisfying = Vec::new();
    let mut rejections = Vec::new();
    let mut total = 0;
    for a in enumerate_allocations(2, 4, DEFAULT_CAP)? {
        total += 1;
        let hit = instances
            .iter()
            .enumerate()
            .find_map(|(t, inst)| first_violation(inst, &a, Notion::Wef1).map(|pair| (t, pair)));
        match hit {
            Some((t, (envier, envied))) => rejections.push(Rejection {
                owners: a.owners().to_vec(),
                instance: t,
                notion: Notion::Wef1,
                envier,
                envied,
            }),
            None => satisfying.push(a.owners().to_vec()),
        }
    }
    Ok(SearchReport {
        instances: (1..=4).map(|t| format!("I_{t}")).collect(),
        notion: Notion::Wef1,
        total,
        count: satisfying.len() as u64,
        satisfying,
        rejections,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Completion {
    pub owners: Vec<usize>,
    pub wef1: bool,
    /// First WEF1-envious pair when `wef1` is false.
    pub violation: Option<(usize, usize)>,
}

/// One two-phase counterexample: fixing `fixed_item` to `fixed_owner` is WEF1
/// on its own part, yet no completion is WEF1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TwoPhaseExample {
    pub name: String,
    pub items: Vec<String>,
    pub weights: Vec<String>,
    pub valuations: Vec<Vec<String>>,
    pub fixed_item: usize,
    pub fixed_owner: usize,
    /// The fixed item alone, given to `fixed_owner`, is WEF1 on its part.
    pub first_phase_wef1: bool,
    pub completions: Vec<Completion>,
    /// WEF1 completion when the fixed item goes to the other agent instead.
    pub alternative: Option<Vec<usize>>,
    /// First phase is WEF1 and every completion fails.
    pub confirmed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TwoPhaseReport {
    pub eps: String,
    pub examples: Vec<TwoPhaseExample>,
    pub confirmed: bool,
}

/// Weights (2, 3); chore `c` with disutility `1 - eps` / `1 + eps`; two unit goods.
pub fn chores_first_instance(eps: &Rational) -> Instance<Rational> {
    let one = rational_from_i64(1);
    Instance::new(
        vec![rational_from_i64(2), rational_from_i64(3)],
        vec![
            vec![-(&one - eps), one.clone(), one.clone()],
            vec![-(&one + eps), one.clone(), one.clone()],
        ],
    )
    .and_then(|i| i.with_labels(vec!["c".into(), "g1".into(), "g2".into()]))
    .expect("well formed")
}

/// Weights (2, 3); good `g` worth `1 + eps` / `1 - eps`; two unit chores.
pub fn goods_first_instance(eps: &Rational) -> Instance<Rational> {
    let one = rational_from_i64(1);
    Instance::new(
        vec![rational_from_i64(2), rational_from_i64(3)],
        vec![
            vec![&one + eps, -one.clone(), -one.clone()],
            vec![&one - eps, -one.clone(), -one.clone()],
        ],
    )
    .and_then(|i| i.with_labels(vec!["g".into(), "c1".into(), "c2".into()]))
    .expect("well formed")
}

fn two_phase_example(name: &str, inst: &Instance<Rational>, fixed_owner: usize) -> TwoPhaseExample {
    let fixed_item = 0;
    let part = inst.restrict(&[fixed_item]);
    let first_phase_wef1 = is_fair(
        &part,
        &Allocation::from_owners(2, vec![fixed_owner]).expect("two agents"),
        Notion::Wef1,
    );
    let completions_with = |owner: usize| -> Vec<Completion> {
        enumerate_allocations(2, inst.m() - 1, DEFAULT_CAP)
            .expect("tiny")
            .map(|rest| {
                let mut owners = vec![owner];
                owners.extend_from_slice(rest.owners());
                let a = Allocation::from_owners(2, owners.clone()).expect("two agents");
                let violation = first_violation(inst, &a, Notion::Wef1);
                Completion {
                    owners,
                    wef1: violation.is_none(),
                    violation,
                }
            })
            .collect()
    };
    let completions = completions_with(fixed_owner);
    let alternative = completions_with(1 - fixed_owner)
        .into_iter()
        .find(|c| c.wef1)
        .map(|c| c.owners);
    let confirmed = first_phase_wef1 && completions.iter().all(|c| !c.wef1);
    TwoPhaseExample {
        name: name.into(),
        items: inst.labels().map(<[String]>::to_vec).unwrap_or_default(),
        weights: inst.weights().iter().map(format_rational).collect(),
        valuations: inst
            .valuations()
            .iter()
            .map(|r| r.iter().map(format_rational).collect())
            .collect(),
        fixed_item,
        fixed_owner,
        first_phase_wef1,
        completions,
        alternative,
        confirmed,
    }
}

/// Both two-phase counterexamples: giving the chore (resp. the good) to the
/// heavier agent first can never be completed to a WEF1 allocation.
pub fn verify_two_phase_examples(eps: &Rational) -> Result<TwoPhaseReport, SearchError> {
    check_eps(eps, &rational_from_i64(1), "(0, 1)")?;
    let examples = vec![
        two_phase_example("chores-first", &chores_first_instance(eps), 1),
        two_phase_example("goods-first", &goods_first_instance(eps), 1),
    ];
    Ok(TwoPhaseReport {
        eps: format_rational(eps),
        confirmed: examples.iter().all(|e| e.confirmed),
        examples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rational_from_i64 as q;
    use std::collections::BTreeSet;

    #[test]
    fn enumeration_counts() {
        assert_eq!(
            enumerate_allocations(2, 4, DEFAULT_CAP).unwrap().count(),
            16
        );
        let empty: Vec<_> = enumerate_allocations(2, 0, DEFAULT_CAP).unwrap().collect();
        assert_eq!(empty.len(), 1);
        assert_eq!(empty[0].items(), 0);
        let all: Vec<Vec<usize>> = enumerate_allocations(3, 3, DEFAULT_CAP)
            .unwrap()
            .map(|a| a.owners().to_vec())
            .collect();
        assert_eq!(all.len(), 27);
        assert_eq!(all.iter().collect::<BTreeSet<_>>().len(), 27);
        let mut sorted = all.clone();
        sorted.sort();
        assert_eq!(sorted, all);
        for (k, owners) in all.iter().enumerate() {
            assert_eq!(allocation_at(3, 3, k as u64).owners(), owners.as_slice());
        }
    }

    #[test]
    fn cap_is_enforced() {
        assert_eq!(
            enumerate_allocations(2, 25, DEFAULT_CAP).err(),
            Some(SearchError::CapExceeded {
                n: 2,
                m: 25,
                cap: DEFAULT_CAP
            })
        );
        assert!(enumerate_allocations(2, 24, DEFAULT_CAP).is_ok());
        assert!(enumerate_allocations(10, 100, u64::MAX).is_err());
    }

    #[test]
    fn ordinal_t1_separates_top_goods() {
        let inst = ordinal_instance(1, &ratio(1, 8));
        let report = find_allocations(&inst, Notion::Wef1, DEFAULT_CAP).unwrap();
        assert!(report.count > 0);
        for owners in &report.satisfying {
            assert_ne!(owners[0], owners[1]);
        }
    }

    #[test]
    fn single_agent_search() {
        let inst = Instance::new(vec![q(1)], vec![vec![q(1), q(-2)]]).unwrap();
        let report = find_allocations(&inst, Notion::Wef1, DEFAULT_CAP).unwrap();
        assert_eq!((report.total, report.count), (1, 1));
        assert_eq!(
            wef1_exists(&inst, DEFAULT_CAP).unwrap().unwrap().owners(),
            &[0, 0]
        );
    }

    #[test]
    fn pareto_checks() {
        let inst =
            Instance::new(vec![q(1), q(1)], vec![vec![q(0), q(2)], vec![q(1), q(2)]]).unwrap();
        let bad = Allocation::from_owners(2, vec![0, 1]).unwrap();
        assert!(!is_pareto_optimal_integral(&inst, &bad, DEFAULT_CAP).unwrap());
        let welfare = Allocation::from_owners(2, vec![1, 0]).unwrap();
        assert!(is_pareto_optimal_integral(&inst, &welfare, DEFAULT_CAP).unwrap());
    }

    #[test]
    fn ordinal_impossibility() {
        for eps in [ratio(1, 8), ratio(1, 5)] {
            let r = verify_ordinal_impossibility(&eps).unwrap();
            assert_eq!(r.total, 16);
            // Ties survive: with {g2, g3, c} the chore removal leaves exactly
            // v(g1), which is not envy. Four allocations are WEF1 everywhere.
            assert_eq!(
                r.satisfying,
                vec![
                    vec![0, 1, 0, 0],
                    vec![0, 1, 1, 1],
                    vec![1, 0, 0, 0],
                    vec![1, 0, 1, 1]
                ]
            );
            assert_eq!(r.rejections.len(), 12);
        }
        assert!(matches!(
            verify_ordinal_impossibility(&ratio(1, 2)),
            Err(SearchError::EpsilonOutOfRange { .. })
        ));
    }

    #[test]
    fn fourth_instance_alone_admits_wef1() {
        assert!(wef1_exists(&ordinal_instance(4, &ratio(1, 8)), DEFAULT_CAP)
            .unwrap()
            .is_some());
    }

    #[test]
    fn two_phase_examples() {
        for eps in [ratio(1, 10), ratio(1, 100)] {
            let r = verify_two_phase_examples(&eps).unwrap();
            assert!(r.confirmed);
            for ex in &r.examples {
                assert_eq!(ex.completions.len(), 4);
                assert!(ex.first_phase_wef1);
                assert!(ex.alternative.is_some());
            }
        }
        assert!(verify_two_phase_examples(&q(1)).is_err());
    }
}
