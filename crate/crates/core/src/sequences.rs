//! Weighted picking sequences for goods and for chores, and the composer that
//! unions a WEF1 goods allocation with a WEF1 chores allocation into a WEF1T
//! allocation of the whole instance.

use serde::Serialize;
use thiserror::Error;

use crate::fairness::{is_fair, Notion};
use crate::instance::{Allocation, Instance};
use crate::scalar::Scalar;
use crate::search::{self, SearchError};

/// Largest part size for which a failed sequence is repaired by exhaustive search.
pub const REPAIR_MAX_ITEMS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    Goods,
    Chores,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SequenceError {
    #[error("{part:?} allocation of {items} items is not WEF1 and is too large to repair")]
    ValidationFailed { part: Part, items: usize },
    #[error("repair search failed: {0}")]
    Repair(#[from] SearchError),
    #[error("union of WEF1 parts is not WEF1T (agents {} and {})", .0 + 1, .1 + 1)]
    CompositionNotWef1t(usize, usize),
}

/// Chooses who picks next given the picks made so far.
pub trait PickerRule<T> {
    fn next_picker(&self, weights: &[T], picks: &[usize]) -> usize;
}

/// Divisor-method rule: the next picker minimises `(t_i + offset) / w_i`,
/// where `t_i` counts the turns agent `i` has had. Ties go to the larger
/// weight, then to the lower index.
///
/// With equal weights every offset yields plain round robin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DivisorRule {
    pub offset: usize,
}

impl DivisorRule {
    pub const fn new(offset: usize) -> Self {
        DivisorRule { offset }
    }
}

impl Default for DivisorRule {
    fn default() -> Self {
        DivisorRule::new(0)
    }
}

impl<T: Scalar> PickerRule<T> for DivisorRule {
    fn next_picker(&self, weights: &[T], picks: &[usize]) -> usize {
        let key = |i: usize| T::from_count(picks[i] + self.offset);
        let mut best = 0;
        for i in 1..weights.len() {
            // key(i)/w_i vs key(best)/w_best
            let lhs = key(i) * weights[best].clone();
            let rhs = key(best) * weights[i].clone();
            if lhs < rhs || (lhs == rhs && weights[i] > weights[best]) {
                best = i;
            }
        }
        best
    }
}

/// Items split into goods plus neutral items, and chores.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SplitInstance {
    pub goods: Vec<usize>,
    pub chores: Vec<usize>,
}

pub fn split_items<T: Scalar>(inst: &Instance<T>) -> SplitInstance {
    let (chores, goods): (Vec<usize>, Vec<usize>) =
        (0..inst.m()).partition(|&j| inst.classify_item(j).is_chore());
    SplitInstance { goods, chores }
}

/// One turn of a picking sequence; `item` is `None` for a skipped turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Turn {
    pub agent: usize,
    pub item: Option<usize>,
}

/// Allocation of one part of the items.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PartOutcome {
    pub part: Part,
    /// Original item indices; position `k` is item `k` of `allocation`.
    pub items: Vec<usize>,
    #[serde(serialize_with = "ser_alloc")]
    pub allocation: Allocation,
    /// Turns in order, with original item indices.
    pub turns: Vec<Turn>,
    /// True when the sequence output failed the WEF1 check and was replaced
    /// by the first WEF1 allocation found by enumeration.
    pub repaired: bool,
}

fn ser_alloc<S: serde::Serializer>(a: &Allocation, s: S) -> Result<S::Ok, S::Error> {
    serde::Serialize::serialize(&a.bundles(), s)
}

impl PartOutcome {
    /// Bundles in original item indices.
    pub fn bundles(&self) -> Vec<Vec<usize>> {
        self.allocation
            .bundles()
            .into_iter()
            .map(|b| b.into_iter().map(|k| self.items[k]).collect())
            .collect()
    }

    /// Sub-instance the part allocation lives on.
    pub fn sub_instance<T: Scalar>(&self, inst: &Instance<T>) -> Instance<T> {
        inst.restrict(&self.items)
    }
}

fn argmax_remaining<T: Scalar>(row: &[T], remaining: &[bool]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (k, v) in row.iter().enumerate() {
        if remaining[k] && best.is_none_or(|b| *v > row[b]) {
            best = Some(k);
        }
    }
    best
}

fn finish<T: Scalar>(
    sub: &Instance<T>,
    part: Part,
    items: &[usize],
    owner: Vec<usize>,
    turns: Vec<Turn>,
) -> Result<PartOutcome, SequenceError> {
    let allocation = Allocation::from_owners(sub.n(), owner).expect("owners in range");
    let mut outcome = PartOutcome {
        part,
        items: items.to_vec(),
        allocation,
        turns,
        repaired: false,
    };
    if !is_fair(sub, &outcome.allocation, Notion::Wef1) {
        if items.len() > REPAIR_MAX_ITEMS {
            return Err(SequenceError::ValidationFailed {
                part,
                items: items.len(),
            });
        }
        let found = search::wef1_exists(sub, search::DEFAULT_CAP)?;
        outcome.allocation = found.ok_or(SequenceError::ValidationFailed {
            part,
            items: items.len(),
        })?;
        outcome.repaired = true;
    }
    Ok(outcome)
}

/// Picking sequence over goods and neutral items.
///
/// The picker takes her favourite remaining item when she values it
/// positively and otherwise skips the turn (the turn still counts). Once no
/// remaining item is positive for anyone, each leftover goes to the lowest
/// indexed agent who values it at zero.
pub fn allocate_goods_wef1<T: Scalar>(
    inst: &Instance<T>,
    goods: &[usize],
    rule: &impl PickerRule<T>,
) -> Result<PartOutcome, SequenceError> {
    let sub = inst.restrict(goods);
    let (n, m) = (sub.n(), sub.m());
    let mut owner = vec![usize::MAX; m];
    let mut remaining = vec![true; m];
    let mut picks = vec![0usize; n];
    let mut turns = Vec::new();
    let positive_left = |remaining: &[bool]| {
        (0..m).any(|k| remaining[k] && (0..n).any(|i| sub.value(i, k).is_positive()))
    };
    while positive_left(&remaining) {
        let agent = rule.next_picker(sub.weights(), &picks);
        let best = argmax_remaining(sub.row(agent), &remaining)
            .filter(|&k| sub.value(agent, k).is_positive());
        if let Some(k) = best {
            owner[k] = agent;
            remaining[k] = false;
        }
        turns.push(Turn {
            agent,
            item: best.map(|k| goods[k]),
        });
        picks[agent] += 1;
    }
    for k in (0..m).filter(|&k| remaining[k]) {
        owner[k] = (0..n)
            .find(|&i| sub.value(i, k).is_zero())
            .expect("leftover goods-part item has a zero valuer");
    }
    finish(&sub, Part::Goods, goods, owner, turns)
}

/// Picking sequence over chores: the picker takes her least bad remaining chore.
pub fn allocate_chores_wef1<T: Scalar>(
    inst: &Instance<T>,
    chores: &[usize],
    rule: &impl PickerRule<T>,
) -> Result<PartOutcome, SequenceError> {
    let sub = inst.restrict(chores);
    let mut owner = vec![usize::MAX; sub.m()];
    let mut remaining = vec![true; sub.m()];
    let mut picks = vec![0usize; sub.n()];
    let mut turns = Vec::new();
    while remaining.contains(&true) {
        let agent = rule.next_picker(sub.weights(), &picks);
        let k = argmax_remaining(sub.row(agent), &remaining).expect("some chore remains");
        owner[k] = agent;
        remaining[k] = false;
        turns.push(Turn {
            agent,
            item: Some(chores[k]),
        });
        picks[agent] += 1;
    }
    finish(&sub, Part::Chores, chores, owner, turns)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Composition {
    pub split: SplitInstance,
    pub goods: PartOutcome,
    pub chores: PartOutcome,
    #[serde(serialize_with = "ser_alloc")]
    pub allocation: Allocation,
}

/// Union of two part allocations over the items of `inst`.
///
/// When both parts are WEF1 on their own items the union must be WEF1T; a
/// violation of that implication is reported as
/// [`SequenceError::CompositionNotWef1t`].
pub fn compose_parts<T: Scalar>(
    inst: &Instance<T>,
    goods: &PartOutcome,
    chores: &PartOutcome,
) -> Result<Allocation, SequenceError> {
    let mut bundles = goods.bundles();
    for (b, extra) in bundles.iter_mut().zip(chores.bundles()) {
        b.extend(extra);
        b.sort_unstable();
    }
    let allocation =
        Allocation::from_bundles(&bundles, inst.m()).expect("parts partition the items");
    let parts_wef1 = is_fair(&goods.sub_instance(inst), &goods.allocation, Notion::Wef1)
        && is_fair(&chores.sub_instance(inst), &chores.allocation, Notion::Wef1);
    if parts_wef1 {
        if let Some((i, j)) = crate::fairness::first_violation(inst, &allocation, Notion::Wef1t) {
            return Err(SequenceError::CompositionNotWef1t(i, j));
        }
    }
    Ok(allocation)
}

/// WEF1T allocation of mixed manna with the default divisor rules.
pub fn compose_wef1t<T: Scalar>(inst: &Instance<T>) -> Result<Composition, SequenceError> {
    compose_with(inst, &DivisorRule::default(), &DivisorRule::default())
}

pub fn compose_with<T: Scalar>(
    inst: &Instance<T>,
    goods_rule: &impl PickerRule<T>,
    chores_rule: &impl PickerRule<T>,
) -> Result<Composition, SequenceError> {
    let split = split_items(inst);
    let goods = allocate_goods_wef1(inst, &split.goods, goods_rule)?;
    let chores = allocate_chores_wef1(inst, &split.chores, chores_rule)?;
    let allocation = compose_parts(inst, &goods, &chores)?;
    Ok(Composition {
        split,
        goods,
        chores,
        allocation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fairness::check_allocation;
    use crate::scalar::{ratio, rational_from_i64 as q, Rational};

    fn identical(weights: &[i64], m: usize, value: i64) -> Instance<Rational> {
        Instance::new(
            weights.iter().map(|&w| q(w)).collect(),
            vec![vec![q(value); m]; weights.len()],
        )
        .unwrap()
    }

    fn sizes(p: &PartOutcome) -> Vec<usize> {
        p.bundles().iter().map(Vec::len).collect()
    }

    #[test]
    fn divisor_rule_order() {
        let w = [q(1), q(2)];
        let rule = DivisorRule::default();
        let mut picks = [0, 0];
        let mut order = Vec::new();
        for _ in 0..3 {
            let p = PickerRule::<Rational>::next_picker(&rule, &w, &picks);
            order.push(p);
            picks[p] += 1;
        }
        assert_eq!(order, vec![1, 0, 1]);
    }

    #[test]
    fn equal_weights_round_robin() {
        let w = vec![q(3); 3];
        for offset in [0, 1] {
            let rule = DivisorRule::new(offset);
            let mut picks = vec![0; 3];
            let mut order = Vec::new();
            for _ in 0..7 {
                let p = rule.next_picker(&w, &picks);
                order.push(p);
                picks[p] += 1;
            }
            assert_eq!(order, vec![0, 1, 2, 0, 1, 2, 0]);
        }
    }

    #[test]
    fn weighted_goods_sizes() {
        let inst = identical(&[1, 2], 3, 1);
        let out = allocate_goods_wef1(&inst, &[0, 1, 2], &DivisorRule::default()).unwrap();
        assert_eq!(
            out.turns.iter().map(|t| t.agent).collect::<Vec<_>>(),
            vec![1, 0, 1]
        );
        assert_eq!(sizes(&out), vec![1, 2]);
        assert!(!out.repaired);

        let inst = identical(&[1, 100], 100, 1);
        let all: Vec<usize> = (0..100).collect();
        let out = allocate_goods_wef1(&inst, &all, &DivisorRule::default()).unwrap();
        assert_eq!(sizes(&out), vec![1, 99]);
        assert!(!out.repaired);
    }

    #[test]
    fn weighted_chore_sizes() {
        let inst = identical(&[1, 2], 3, -1);
        let out = allocate_chores_wef1(&inst, &[0, 1, 2], &DivisorRule::default()).unwrap();
        assert_eq!(sizes(&out), vec![1, 2]);

        let inst = identical(&[1, 100], 100, -1);
        let all: Vec<usize> = (0..100).collect();
        let out = allocate_chores_wef1(&inst, &all, &DivisorRule::default()).unwrap();
        assert_eq!(sizes(&out), vec![1, 99]);
        assert!(!out.repaired);

        let empty = allocate_chores_wef1(&inst, &[], &DivisorRule::default()).unwrap();
        assert_eq!(sizes(&empty), vec![0, 0]);
    }

    #[test]
    fn single_agent_takes_everything() {
        let inst = Instance::new(vec![q(2)], vec![vec![q(1), q(0), q(-1), q(4)]]).unwrap();
        let c = compose_wef1t(&inst).unwrap();
        assert_eq!(c.allocation.bundle(0), vec![0, 1, 2, 3]);
    }

    #[test]
    fn skipped_turns_and_leftovers() {
        // item 1 is neutral (0 for agent 0), item 2 is a good only agent 1 likes
        let inst = Instance::new(
            vec![q(1), q(1)],
            vec![vec![q(5), q(0), q(-1)], vec![q(1), q(-2), q(3)]],
        )
        .unwrap();
        let split = split_items(&inst);
        assert_eq!(split.goods, vec![0, 1, 2]);
        let out = allocate_goods_wef1(&inst, &split.goods, &DivisorRule::default()).unwrap();
        assert_eq!(out.bundles(), vec![vec![0, 1], vec![2]]);
        assert_eq!(
            out.turns,
            vec![
                Turn {
                    agent: 0,
                    item: Some(0)
                },
                Turn {
                    agent: 1,
                    item: Some(2)
                },
            ]
        );
    }

    #[test]
    fn skip_counts_as_a_turn() {
        // Agent 0 dislikes everything left after her first pick.
        let inst = Instance::new(
            vec![q(1), q(1)],
            vec![vec![q(5), q(-1), q(-1)], vec![q(1), q(2), q(3)]],
        )
        .unwrap();
        let out = allocate_goods_wef1(&inst, &[0, 1, 2], &DivisorRule::default()).unwrap();
        let agents: Vec<usize> = out.turns.iter().map(|t| t.agent).collect();
        assert_eq!(agents, vec![0, 1, 0, 1]);
        assert_eq!(out.turns[2].item, None);
        assert_eq!(out.bundles(), vec![vec![0], vec![1, 2]]);
    }

    #[test]
    fn split_ordinal_t3() {
        let eps = ratio(1, 8);
        let row = vec![q(1) + &eps * q(2), q(1) + &eps, eps.clone(), q(-3)];
        let inst = Instance::new(vec![q(1), q(1)], vec![row.clone(), row]).unwrap();
        assert_eq!(
            split_items(&inst),
            SplitInstance {
                goods: vec![0, 1, 2],
                chores: vec![3]
            }
        );
        let neutral = Instance::new(vec![q(1)], vec![vec![q(0), q(0)]]).unwrap();
        assert!(split_items(&neutral).chores.is_empty());
    }

    #[test]
    fn example1_composition_is_wef1t() {
        let eps = ratio(1, 10);
        let inst = Instance::new(
            vec![q(2), q(3)],
            vec![
                vec![q(1), q(1), -(q(1) - &eps)],
                vec![q(1), q(1), -(q(1) + &eps)],
            ],
        )
        .unwrap();
        let c = compose_wef1t(&inst).unwrap();
        assert!(check_allocation(&inst, &c.allocation, Notion::Wef1t).overall);
    }

    #[test]
    fn goods_only_composition_is_wef1() {
        let inst = Instance::new(
            vec![q(1), q(3), q(2)],
            vec![
                vec![q(4), q(1), q(7), q(2), q(0)],
                vec![q(3), q(3), q(1), q(9), q(2)],
                vec![q(5), q(2), q(2), q(2), q(8)],
            ],
        )
        .unwrap();
        let c = compose_wef1t(&inst).unwrap();
        assert!(c.split.chores.is_empty());
        assert!(check_allocation(&inst, &c.allocation, Notion::Wef1).overall);
    }
}
