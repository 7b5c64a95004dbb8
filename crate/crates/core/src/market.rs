//! Fisher markets for weighted mixed manna.
//!
//! A market pairs an allocation with one price per item. It is an equilibrium
//! when price signs follow item kinds (positive for goods, negative for
//! chores, zero for neutral items) and every agent has a best-bang-per-buck
//! ratio `alpha_i > 0` with `v_i(j) <= alpha_i * p_j` for every item and
//! equality on the items she holds. Equilibria are fractionally Pareto
//! optimal, which is what the two-agent solver relies on.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::fairness::{is_fair, wef1_envies, Notion};
use crate::instance::{Allocation, Instance, ItemKind};
use crate::scalar::{ser, weighted_lt, Scalar};

/// Who holds what: an integral allocation or a fractional share matrix
/// (`shares[i][j]`, each column summing to one).
#[derive(Debug, Clone, PartialEq)]
pub enum Holdings<T> {
    Integral(Allocation),
    Fractional(Vec<Vec<T>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FisherMarket<T> {
    pub holdings: Holdings<T>,
    pub prices: Vec<T>,
}

impl<T: Scalar> FisherMarket<T> {
    pub fn integral(allocation: Allocation, prices: Vec<T>) -> Self {
        FisherMarket {
            holdings: Holdings::Integral(allocation),
            prices,
        }
    }

    pub fn fractional(shares: Vec<Vec<T>>, prices: Vec<T>) -> Self {
        FisherMarket {
            holdings: Holdings::Fractional(shares),
            prices,
        }
    }

    pub fn allocation(&self) -> Option<&Allocation> {
        match &self.holdings {
            Holdings::Integral(a) => Some(a),
            Holdings::Fractional(_) => None,
        }
    }

    /// `x_{i,j} > 0`.
    pub fn holds(&self, i: usize, j: usize) -> bool {
        match &self.holdings {
            Holdings::Integral(a) => a.owner(j) == i,
            Holdings::Fractional(x) => x[i][j].is_positive(),
        }
    }

    /// Agent `i`'s budget `p(x_i)`.
    pub fn budget(&self, i: usize) -> T {
        match &self.holdings {
            Holdings::Integral(a) => a
                .owners()
                .iter()
                .zip(&self.prices)
                .filter(|&(&o, _)| o == i)
                .fold(T::zero(), |acc, (_, p)| acc + p.clone()),
            Holdings::Fractional(x) => x[i]
                .iter()
                .zip(&self.prices)
                .fold(T::zero(), |acc, (s, p)| acc + s.clone() * p.clone()),
        }
    }

    /// Same holdings with every price multiplied by `factor`.
    pub fn scale_prices(&self, factor: &T) -> Self {
        FisherMarket {
            holdings: self.holdings.clone(),
            prices: self
                .prices
                .iter()
                .map(|p| p.clone() * factor.clone())
                .collect(),
        }
    }
}

/// Admissible best-bang-per-buck ratios of one agent:
/// `[lower, upper] ∩ (0, ∞)`, where `lower` is the largest value-to-price
/// ratio over positively priced items and `upper` the smallest over
/// negatively priced items. `None` bounds are unbounded. `pinned` is the
/// single admissible ratio forced by a held good or chore.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "")]
pub struct BangPerBuck<T: Scalar> {
    #[serde(serialize_with = "ser::opt_scalar")]
    pub lower: Option<T>,
    #[serde(serialize_with = "ser::opt_scalar")]
    pub upper: Option<T>,
    #[serde(serialize_with = "ser::opt_scalar")]
    pub pinned: Option<T>,
}

impl<T: Scalar> BangPerBuck<T> {
    pub fn admits(&self, alpha: &T) -> bool {
        alpha.is_positive()
            && self.lower.as_ref().is_none_or(|lo| lo <= alpha)
            && self.upper.as_ref().is_none_or(|hi| alpha <= hi)
    }

    pub fn is_empty(&self) -> bool {
        match (&self.lower, &self.upper) {
            (_, None) => false,
            (None, Some(hi)) => !hi.is_positive(),
            (Some(lo), Some(hi)) => !hi.is_positive() || lo > hi,
        }
    }

    /// The pinned ratio, or any admissible one when the agent holds only
    /// neutral items.
    pub fn representative(&self) -> Option<T> {
        if let Some(p) = &self.pinned {
            return Some(p.clone());
        }
        if self.is_empty() {
            return None;
        }
        match (&self.lower, &self.upper) {
            (Some(lo), _) if lo.is_positive() => Some(lo.clone()),
            (_, Some(hi)) => Some(hi.clone()),
            _ => Some(T::one()),
        }
    }
}

/// Proof that a market is an equilibrium.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "")]
pub struct EquilibriumCertificate<T: Scalar> {
    pub agents: Vec<BangPerBuck<T>>,
    /// Kind of every item; prices carry the matching sign.
    pub kinds: Vec<ItemKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "violation", rename_all = "snake_case", bound = "")]
pub enum Violation<T: Scalar> {
    PriceCount {
        expected: usize,
        found: usize,
    },
    PriceSign {
        item: usize,
        kind: ItemKind,
        #[serde(serialize_with = "ser::scalar")]
        price: T,
    },
    /// A fractional share outside `[0, 1]` or a column not summing to one.
    Shares {
        item: usize,
    },
    EmptyInterval {
        agent: usize,
    },
    /// A held good or chore whose value-to-price ratio is not the agent's
    /// single admissible ratio.
    HeldRatio {
        agent: usize,
        item: usize,
    },
    /// A held zero-priced item the holder does not value at zero.
    HeldZeroPrice {
        agent: usize,
        item: usize,
    },
}

impl<T: Scalar> fmt::Display for Violation<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::PriceCount { expected, found } => {
                write!(f, "expected {expected} prices, found {found}")
            }
            Violation::PriceSign { item, kind, price } => {
                write!(f, "item {} is a {kind} but has price {price}", item + 1)
            }
            Violation::Shares { item } => write!(f, "shares of item {} are invalid", item + 1),
            Violation::EmptyInterval { agent } => {
                write!(f, "agent {} has no admissible bang-per-buck", agent + 1)
            }
            Violation::HeldRatio { agent, item } => write!(
                f,
                "agent {} holds item {} off her bang-per-buck ratio",
                agent + 1,
                item + 1
            ),
            Violation::HeldZeroPrice { agent, item } => write!(
                f,
                "agent {} holds zero-priced item {} with nonzero value",
                agent + 1,
                item + 1
            ),
        }
    }
}

fn sign_matches<T: Scalar>(kind: ItemKind, price: &T) -> bool {
    match kind {
        ItemKind::Good { .. } => price.is_positive(),
        ItemKind::Chore => price.is_negative(),
        ItemKind::Neutral => price.is_zero(),
    }
}

/// Bang-per-buck bounds of agent `i` from the prices alone.
fn price_bounds<T: Scalar>(inst: &Instance<T>, prices: &[T], i: usize) -> BangPerBuck<T> {
    let mut lower: Option<T> = None;
    let mut upper: Option<T> = None;
    for (j, p) in prices.iter().enumerate() {
        if p.is_zero() {
            continue;
        }
        let r = inst.value(i, j).clone() / p.clone();
        if p.is_positive() {
            if lower.as_ref().is_none_or(|lo| &r > lo) {
                lower = Some(r);
            }
        } else if upper.as_ref().is_none_or(|hi| &r < hi) {
            upper = Some(r);
        }
    }
    BangPerBuck {
        lower,
        upper,
        pinned: None,
    }
}

/// Verify the equilibrium conditions, returning either a certificate or every
/// violated condition.
pub fn check_equilibrium<T: Scalar>(
    inst: &Instance<T>,
    market: &FisherMarket<T>,
) -> Result<EquilibriumCertificate<T>, Vec<Violation<T>>> {
    let (n, m) = (inst.n(), inst.m());
    if market.prices.len() != m {
        return Err(vec![Violation::PriceCount {
            expected: m,
            found: market.prices.len(),
        }]);
    }
    let mut violations = Vec::new();
    if let Holdings::Fractional(x) = &market.holdings {
        for j in 0..m {
            let column_ok = x.len() == n
                && x.iter().all(|row| row.len() == m)
                && x.iter()
                    .all(|row| !row[j].is_negative() && row[j] <= T::one())
                && x.iter().fold(T::zero(), |acc, row| acc + row[j].clone()) == T::one();
            if !column_ok {
                violations.push(Violation::Shares { item: j });
            }
        }
        if !violations.is_empty() {
            return Err(violations);
        }
    }
    let kinds = inst.kinds();
    for (j, (kind, price)) in kinds.iter().zip(&market.prices).enumerate() {
        if !sign_matches(*kind, price) {
            violations.push(Violation::PriceSign {
                item: j,
                kind: *kind,
                price: price.clone(),
            });
        }
    }
    let mut agents = Vec::with_capacity(n);
    for i in 0..n {
        let mut bpb = price_bounds(inst, &market.prices, i);
        if bpb.is_empty() {
            violations.push(Violation::EmptyInterval { agent: i });
        }
        for j in (0..m).filter(|&j| market.holds(i, j)) {
            let p = &market.prices[j];
            if p.is_zero() {
                if !inst.value(i, j).is_zero() {
                    violations.push(Violation::HeldZeroPrice { agent: i, item: j });
                }
                continue;
            }
            let r = inst.value(i, j).clone() / p.clone();
            match &bpb.pinned {
                None if bpb.admits(&r) => bpb.pinned = Some(r),
                Some(alpha) if *alpha == r => {}
                _ => violations.push(Violation::HeldRatio { agent: i, item: j }),
            }
        }
        agents.push(bpb);
    }
    if violations.is_empty() {
        Ok(EquilibriumCertificate { agents, kinds })
    } else {
        Err(violations)
    }
}

/// Give every item to the lowest-indexed agent valuing it most and price it
/// at that value. The result is always an equilibrium with `alpha_i = 1`.
pub fn construct_welfare_equilibrium<T: Scalar>(inst: &Instance<T>) -> FisherMarket<T> {
    let mut owner = Vec::with_capacity(inst.m());
    let mut prices = Vec::with_capacity(inst.m());
    for j in 0..inst.m() {
        let mut best = 0;
        for i in 1..inst.n() {
            if inst.value(i, j) > inst.value(best, j) {
                best = i;
            }
        }
        owner.push(best);
        prices.push(inst.value(best, j).clone());
    }
    let allocation = Allocation::from_owners(inst.n(), owner).expect("owners in range");
    FisherMarket::integral(allocation, prices)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MarketError {
    #[error("market is not an equilibrium: {0}")]
    NotAnEquilibrium(String),
    #[error("market is not integral")]
    NotIntegral,
    #[error("item {} is already held by agent {}", .item + 1, .agent + 1)]
    AlreadyHeld { item: usize, agent: usize },
    #[error("item {} has price zero", .0 + 1)]
    ZeroPrice(usize),
}

fn describe<T: Scalar>(violations: &[Violation<T>]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// Transferability of a good or chore `item` to `agent`, from prices alone.
///
/// If the agent holds a good or chore `j`, the item is transferable iff its
/// value-to-price ratio equals that of `j`. If she holds only neutral items,
/// it is transferable iff its ratio lies in
/// `[max_{p_j > 0} v(j)/p_j, min_{p_j < 0} v(j)/p_j] ∩ (0, ∞)`, both extremes
/// taken over all items.
pub fn is_transferable<T: Scalar>(
    inst: &Instance<T>,
    market: &FisherMarket<T>,
    item: usize,
    agent: usize,
) -> Result<bool, MarketError> {
    let alloc = market.allocation().ok_or(MarketError::NotIntegral)?;
    check_equilibrium(inst, market).map_err(|v| MarketError::NotAnEquilibrium(describe(&v)))?;
    transferable_unchecked(inst, alloc, &market.prices, item, agent)
}

fn transferable_unchecked<T: Scalar>(
    inst: &Instance<T>,
    alloc: &Allocation,
    prices: &[T],
    item: usize,
    agent: usize,
) -> Result<bool, MarketError> {
    if alloc.owner(item) == agent {
        return Err(MarketError::AlreadyHeld { item, agent });
    }
    if prices[item].is_zero() {
        return Err(MarketError::ZeroPrice(item));
    }
    let ratio = |j: usize| inst.value(agent, j).clone() / prices[j].clone();
    let target = ratio(item);
    let held = alloc
        .bundle(agent)
        .into_iter()
        .find(|&j| !prices[j].is_zero());
    Ok(match held {
        Some(j) => target == ratio(j),
        None => price_bounds(inst, prices, agent).admits(&target),
    })
}

/// Transferability by definition: moving the item keeps the market an equilibrium.
pub fn transfer_keeps_equilibrium<T: Scalar>(
    inst: &Instance<T>,
    market: &FisherMarket<T>,
    item: usize,
    agent: usize,
) -> Result<bool, MarketError> {
    let alloc = market.allocation().ok_or(MarketError::NotIntegral)?;
    let moved = FisherMarket::integral(alloc.with_transfer(item, agent), market.prices.clone());
    Ok(check_equilibrium(inst, &moved).is_ok())
}

/// Price-based WEF1 envy of `i` towards `j`: budgets `p(A_i)/w_i < p(A_j)/w_j`,
/// and the strict inequality survives removing any one item from `A_j`, and
/// removing any one item from `A_i`.
pub fn pwef1_envies<T: Scalar>(
    alloc: &Allocation,
    prices: &[T],
    weights: &[T],
    i: usize,
    j: usize,
) -> bool {
    if i == j {
        return false;
    }
    let (bi, bj) = (alloc.bundle(i), alloc.bundle(j));
    let price_of = |b: &[usize]| b.iter().fold(T::zero(), |acc, &t| acc + prices[t].clone());
    let (pi, pj) = (price_of(&bi), price_of(&bj));
    let lt = |a: &T, b: &T| weighted_lt(a, &weights[i], b, &weights[j]);
    lt(&pi, &pj)
        && bj
            .iter()
            .all(|&g| lt(&pi, &(pj.clone() - prices[g].clone())))
        && bi
            .iter()
            .all(|&c| lt(&(pi.clone() - prices[c].clone()), &pj))
}

/// Price rescaling applied to the envious agent's bundle.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "")]
pub struct RescaleStep<T: Scalar> {
    /// Largest `(v_l(g)/p_g) / alpha_l` over goods held by the other agent;
    /// `None` stands for an empty maximum (minus infinity).
    #[serde(serialize_with = "ser::opt_scalar")]
    pub beta: Option<T>,
    /// Largest `alpha_b / (v_b(c)/p_c)` over chores held by the envious agent.
    #[serde(serialize_with = "ser::opt_scalar")]
    pub gamma: Option<T>,
    /// `max(beta, gamma)`; prices in `rescaled` are divided by it.
    #[serde(serialize_with = "ser::scalar")]
    pub rho: T,
    pub rescaled: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferKind {
    /// A good moved from the other agent to the envious agent.
    Good,
    /// A chore moved from the envious agent to the other agent.
    Chore,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TransferStep {
    pub item: usize,
    pub from: usize,
    pub to: usize,
    pub kind: TransferKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "")]
pub struct IterationRecord<T: Scalar> {
    /// Agent with the smaller weighted budget.
    pub envier: usize,
    pub other: usize,
    /// `p(A_i)/w_i` at the start of the iteration.
    #[serde(serialize_with = "ser::scalars")]
    pub budgets: Vec<T>,
    pub rescale: Option<RescaleStep<T>>,
    pub transfer: TransferStep,
    /// `|A_envier ∩ chores| + |A_other ∩ goods|` before and after the transfer.
    pub progress: (usize, usize),
    #[serde(serialize_with = "ser::scalars")]
    pub prices: Vec<T>,
    pub owners: Vec<usize>,
    pub certificate: EquilibriumCertificate<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "")]
pub struct SolveTrace<T: Scalar> {
    pub start_owners: Vec<usize>,
    #[serde(serialize_with = "ser::scalars")]
    pub start_prices: Vec<T>,
    pub iterations: Vec<IterationRecord<T>>,
}

impl<T: Scalar> SolveTrace<T> {
    /// Re-check the per-iteration invariants recorded in the trace; returns
    /// a description of each failure.
    pub fn audit(&self, inst: &Instance<T>) -> Vec<String> {
        let mut problems = Vec::new();
        if self.iterations.len() > inst.m() {
            problems.push(format!(
                "{} iterations for {} items",
                self.iterations.len(),
                inst.m()
            ));
        }
        if let Some(first) = self.iterations.first() {
            for (k, it) in self.iterations.iter().enumerate() {
                if (it.envier, it.other) != (first.envier, first.other) {
                    problems.push(format!("iteration {k}: roles changed"));
                }
            }
        }
        for (k, it) in self.iterations.iter().enumerate() {
            if let Some(r) = &it.rescale {
                if !(r.rho.is_positive() && r.rho <= T::one()) {
                    problems.push(format!(
                        "iteration {k}: rescale factor {} outside (0, 1]",
                        r.rho
                    ));
                }
            }
            if it.progress.1 >= it.progress.0 {
                problems.push(format!("iteration {k}: no progress"));
            }
            let market = FisherMarket::integral(
                Allocation::from_owners(inst.n(), it.owners.clone()).expect("owners in range"),
                it.prices.clone(),
            );
            if check_equilibrium(inst, &market).is_err() {
                problems.push(format!("iteration {k}: not an equilibrium"));
            }
        }
        problems
    }
}

/// Runtime invariants of the two-agent solver. Any of them firing means a bug
/// in the implementation, never a property of the input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Invariant {
    /// The agent with the smaller weighted budget WEF1-envies the other.
    EnvierIsWef1Envious,
    /// Weighted budgets differ while the allocation is not WEF1.
    BudgetsDiffer,
    /// Rescale factor lies in `(0, 1]`.
    RescaleFactorInRange,
    /// The market stays an equilibrium after rescaling and after transfers.
    EquilibriumPreserved,
    /// Some good or chore can be transferred after rescaling.
    TransferExists,
    /// The envious agent is the same in every iteration.
    RolesFixed,
    /// The progress measure strictly decreases.
    ProgressMade,
    /// At most `m` iterations.
    IterationBound,
    /// The price-based transferability test agrees with the definition.
    TransferabilityAgrees,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolveError {
    #[error("the two-agent solver needs exactly 2 agents, got {0}")]
    NotTwoAgents(usize),
    #[error("starting market is not integral")]
    StartNotIntegral,
    #[error("starting market is not an equilibrium: {0}")]
    StartNotEquilibrium(String),
    #[error("internal invariant violated ({invariant:?}): {detail}")]
    InternalInvariantViolation {
        invariant: Invariant,
        detail: String,
    },
}

fn violated(invariant: Invariant, detail: impl Into<String>) -> SolveError {
    SolveError::InternalInvariantViolation {
        invariant,
        detail: detail.into(),
    }
}

/// Two-agent WEF1 + fPO solver started from the welfare-maximising equilibrium.
pub fn solve_two_agent<T: Scalar>(
    inst: &Instance<T>,
) -> Result<(FisherMarket<T>, SolveTrace<T>), SolveError> {
    if inst.n() != 2 {
        return Err(SolveError::NotTwoAgents(inst.n()));
    }
    solve_two_agent_from(inst, construct_welfare_equilibrium(inst))
}

/// Two-agent local search from any integral equilibrium.
///
/// While the allocation is not WEF1: let `l` be the agent with the smaller
/// weighted budget and `b` the other. If both hold a good or chore, divide the
/// prices of `l`'s items by `rho = max(beta, gamma)` so that some transfer
/// becomes possible, then move the lowest-indexed transferable good from `b`
/// to `l`, or failing that the lowest-indexed transferable chore from `l` to
/// `b`. Every step keeps the market an equilibrium, so the output is WEF1 and
/// fractionally Pareto optimal.
pub fn solve_two_agent_from<T: Scalar>(
    inst: &Instance<T>,
    start: FisherMarket<T>,
) -> Result<(FisherMarket<T>, SolveTrace<T>), SolveError> {
    if inst.n() != 2 {
        return Err(SolveError::NotTwoAgents(inst.n()));
    }
    let mut alloc = start
        .allocation()
        .ok_or(SolveError::StartNotIntegral)?
        .clone();
    let mut prices = start.prices.clone();
    if alloc.agents() != 2 || alloc.items() != inst.m() {
        return Err(SolveError::StartNotIntegral);
    }
    check_equilibrium(inst, &start).map_err(|v| SolveError::StartNotEquilibrium(describe(&v)))?;
    let kinds = inst.kinds();
    let mut trace = SolveTrace {
        start_owners: alloc.owners().to_vec(),
        start_prices: prices.clone(),
        iterations: Vec::new(),
    };
    let mut roles: Option<(usize, usize)> = None;

    while !is_fair(inst, &alloc, Notion::Wef1) {
        if trace.iterations.len() >= inst.m() {
            return Err(violated(
                Invariant::IterationBound,
                format!("still not WEF1 after {} iterations", inst.m()),
            ));
        }
        let market = FisherMarket::integral(alloc.clone(), prices.clone());
        let budgets: Vec<T> = (0..2)
            .map(|i| market.budget(i) / inst.weight(i).clone())
            .collect();
        let (l, b) = if budgets[0] < budgets[1] {
            (0, 1)
        } else if budgets[1] < budgets[0] {
            (1, 0)
        } else {
            return Err(violated(Invariant::BudgetsDiffer, "equal weighted budgets"));
        };
        if roles.is_some_and(|r| r != (l, b)) {
            return Err(violated(
                Invariant::RolesFixed,
                format!("envier became agent {}", l + 1),
            ));
        }
        roles = Some((l, b));
        if !wef1_envies(inst, &alloc, l, b).envies {
            return Err(violated(
                Invariant::EnvierIsWef1Envious,
                format!("agent {} does not WEF1-envy agent {}", l + 1, b + 1),
            ));
        }
        let progress_before = progress(&alloc, &kinds, l, b);

        let bundle_l = alloc.bundle(l);
        let bundle_b = alloc.bundle(b);
        let non_neutral = |bundle: &[usize]| bundle.iter().any(|&j| !kinds[j].is_neutral());
        let mut rescale = None;
        if non_neutral(&bundle_l) && non_neutral(&bundle_b) {
            let cert = check_equilibrium(inst, &market)
                .map_err(|v| violated(Invariant::EquilibriumPreserved, describe(&v)))?;
            let (alpha_l, alpha_b) = match (&cert.agents[l].pinned, &cert.agents[b].pinned) {
                (Some(x), Some(y)) => (x.clone(), y.clone()),
                _ => {
                    return Err(violated(
                        Invariant::EquilibriumPreserved,
                        "holder of a good or chore without a pinned bang-per-buck",
                    ))
                }
            };
            let beta = max_of(
                bundle_b
                    .iter()
                    .filter(|&&g| kinds[g].is_good())
                    .map(|&g| inst.value(l, g).clone() / prices[g].clone() / alpha_l.clone()),
            );
            let gamma = max_of(
                bundle_l
                    .iter()
                    .filter(|&&c| kinds[c].is_chore())
                    .map(|&c| alpha_b.clone() / (inst.value(b, c).clone() / prices[c].clone())),
            );
            let rho = match (&beta, &gamma) {
                (Some(x), Some(y)) => {
                    if x >= y {
                        x.clone()
                    } else {
                        y.clone()
                    }
                }
                (Some(x), None) | (None, Some(x)) => x.clone(),
                (None, None) => {
                    return Err(violated(
                        Invariant::RescaleFactorInRange,
                        "both maxima are empty",
                    ))
                }
            };
            if !(rho.is_positive() && rho <= T::one()) {
                return Err(violated(
                    Invariant::RescaleFactorInRange,
                    format!("rescale factor {rho}"),
                ));
            }
            for &j in &bundle_l {
                prices[j] = prices[j].clone() / rho.clone();
            }
            rescale = Some(RescaleStep {
                beta,
                gamma,
                rho,
                rescaled: bundle_l.clone(),
            });
        }

        let market = FisherMarket::integral(alloc.clone(), prices.clone());
        check_equilibrium(inst, &market).map_err(|v| {
            violated(
                Invariant::EquilibriumPreserved,
                format!("after rescale: {}", describe(&v)),
            )
        })?;
        let transferable = |item: usize, to: usize| -> Result<bool, SolveError> {
            let by_prices = transferable_unchecked(inst, &alloc, &prices, item, to)
                .map_err(|e| violated(Invariant::TransferabilityAgrees, e.to_string()))?;
            let by_definition = transfer_keeps_equilibrium(inst, &market, item, to)
                .map_err(|e| violated(Invariant::TransferabilityAgrees, e.to_string()))?;
            if by_prices != by_definition {
                return Err(violated(
                    Invariant::TransferabilityAgrees,
                    format!("item {} to agent {}", item + 1, to + 1),
                ));
            }
            Ok(by_prices)
        };
        let mut transfer = None;
        for &g in bundle_b.iter().filter(|&&g| kinds[g].is_good()) {
            if transferable(g, l)? {
                transfer = Some(TransferStep {
                    item: g,
                    from: b,
                    to: l,
                    kind: TransferKind::Good,
                });
                break;
            }
        }
        if transfer.is_none() {
            for &c in bundle_l.iter().filter(|&&c| kinds[c].is_chore()) {
                if transferable(c, b)? {
                    transfer = Some(TransferStep {
                        item: c,
                        from: l,
                        to: b,
                        kind: TransferKind::Chore,
                    });
                    break;
                }
            }
        }
        let transfer = transfer
            .ok_or_else(|| violated(Invariant::TransferExists, "no transferable good or chore"))?;
        alloc = alloc.with_transfer(transfer.item, transfer.to);

        let market = FisherMarket::integral(alloc.clone(), prices.clone());
        let certificate = check_equilibrium(inst, &market).map_err(|v| {
            violated(
                Invariant::EquilibriumPreserved,
                format!("after transfer: {}", describe(&v)),
            )
        })?;
        let progress_after = progress(&alloc, &kinds, l, b);
        if progress_after >= progress_before {
            return Err(violated(
                Invariant::ProgressMade,
                format!("{progress_before} -> {progress_after}"),
            ));
        }
        trace.iterations.push(IterationRecord {
            envier: l,
            other: b,
            budgets,
            rescale,
            transfer,
            progress: (progress_before, progress_after),
            prices: prices.clone(),
            owners: alloc.owners().to_vec(),
            certificate,
        });
    }
    Ok((FisherMarket::integral(alloc, prices), trace))
}

fn max_of<T: Scalar>(values: impl Iterator<Item = T>) -> Option<T> {
    values.fold(None, |best, v| match best {
        Some(b) if b >= v => Some(b),
        _ => Some(v),
    })
}

/// Chores held by `l` plus goods held by `b`.
fn progress(alloc: &Allocation, kinds: &[ItemKind], l: usize, b: usize) -> usize {
    alloc
        .owners()
        .iter()
        .zip(kinds)
        .filter(|&(&o, k)| (o == l && k.is_chore()) || (o == b && k.is_good()))
        .count()
}
