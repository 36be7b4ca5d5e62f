//! The agent's best response to a linear contract `α`.
//!
//! Two independent routes compute it: the greedy demand oracle (exact for
//! gross-substitutes classes) and exhaustive enumeration over all `2^n`
//! subsets. [`VOracle`] dispatches between them and counts queries.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::functions::{ActionSet, Instance, DEFAULT_BRUTE_FORCE_LIMIT};
use crate::numeric::Rational;

fn check_alpha(alpha: &Rational) -> Result<()> {
    if alpha.is_negative() || *alpha > Rational::one() {
        return Err(Error::Domain(format!("contract {alpha} is outside [0, 1]")));
    }
    Ok(())
}

/// Result of the greedy demand oracle: actions in the order they were added.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrderedDemand {
    pub actions: Vec<usize>,
    pub set: ActionSet,
    /// `α·f(S[t] | S^{t-1}) - c(S[t])` for each step `t`.
    pub step_utilities: Vec<Rational>,
}

impl OrderedDemand {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// The first `t` chosen actions, `S^t`.
    pub fn prefix(&self, t: usize) -> ActionSet {
        ActionSet::from_actions(self.actions[..t].iter().copied())
    }
}

/// Greedy demand with principal-favoring tie-breaking.
///
/// Repeatedly adds the action of maximal marginal utility while that maximum
/// is non-negative; zero-utility actions are taken. Ties go to the costlier
/// action, then to the smaller index.
pub fn greedy_demand(inst: &Instance, alpha: &Rational) -> Result<OrderedDemand> {
    if !inst.gs_certified() {
        return Err(Error::UnsupportedClass(format!(
            "greedy demand is not exact for {} functions",
            inst.class()
        )));
    }
    check_alpha(alpha)?;
    Ok(greedy_unchecked(inst, alpha))
}

pub(crate) fn greedy_unchecked(inst: &Instance, alpha: &Rational) -> OrderedDemand {
    let f = inst.function();
    let costs = inst.costs();
    let mut set = ActionSet::EMPTY;
    let mut actions = Vec::new();
    let mut step_utilities = Vec::new();
    let mut current = f.value_unchecked(set);
    loop {
        let mut best: Option<(usize, Rational)> = None;
        for a in (0..inst.n()).filter(|&a| !set.contains(a)) {
            let gain = f.value_unchecked(set.with(a)) - &current;
            let utility = alpha * gain - &costs[a];
            let better = match &best {
                None => true,
                Some((b, u)) => utility > *u || (utility == *u && costs[a] > costs[*b]),
            };
            if better {
                best = Some((a, utility));
            }
        }
        match best {
            Some((a, utility)) if !utility.is_negative() => {
                set = set.with(a);
                current = f.value_unchecked(set);
                actions.push(a);
                step_utilities.push(utility);
            }
            _ => break,
        }
    }
    OrderedDemand { actions, set, step_utilities }
}

/// Every agent-optimal set at `α`, and the principal-favoured ones among them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DemandProfile {
    pub alpha: Rational,
    /// All maximizers of `α·f(S) - c(S)`, in bitmask order.
    pub demand: Vec<ActionSet>,
    /// The maximizers of `f` within `demand`.
    pub best: Vec<ActionSet>,
    pub agent_utility: Rational,
    /// `V(α)`: the common `f` value of the sets in `best`.
    pub value: Rational,
}

/// All `f` and `c` values of an instance, for exhaustive enumeration.
#[derive(Clone, Debug)]
pub struct SubsetTable {
    n: usize,
    values: Vec<Rational>,
    costs: Vec<Rational>,
}

impl SubsetTable {
    /// Tabulates the instance; errors if `n` exceeds `limit`.
    pub fn build(inst: &Instance, limit: usize) -> Result<Self> {
        let n = inst.n();
        if n > limit {
            return Err(Error::Resource(format!(
                "{n} actions exceed the brute-force limit of {limit}"
            )));
        }
        let f = inst.function();
        let values = ActionSet::all(n).map(|s| f.value_unchecked(s)).collect();
        let mut costs = vec![Rational::zero(); 1 << n];
        for bits in 1..(1usize << n) {
            let low = bits.trailing_zeros() as usize;
            costs[bits] = &costs[bits & (bits - 1)] + &inst.costs()[low];
        }
        Ok(SubsetTable { n, values, costs })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn value(&self, set: ActionSet) -> &Rational {
        &self.values[set.bits() as usize]
    }

    pub fn cost(&self, set: ActionSet) -> &Rational {
        &self.costs[set.bits() as usize]
    }

    pub fn sets(&self) -> impl Iterator<Item = ActionSet> {
        ActionSet::all(self.n)
    }

    /// Exhaustive demand at any `α >= 0` (no upper bound is imposed here).
    pub fn demand(&self, alpha: &Rational) -> DemandProfile {
        let mut agent_utility: Option<Rational> = None;
        let mut demand = Vec::new();
        for set in self.sets() {
            let u = alpha * self.value(set) - self.cost(set);
            match &agent_utility {
                Some(best) if u < *best => {}
                Some(best) if u == *best => demand.push(set),
                _ => {
                    agent_utility = Some(u);
                    demand.clear();
                    demand.push(set);
                }
            }
        }
        let value = demand.iter().map(|&s| self.value(s)).max().cloned().unwrap_or_default();
        let best = demand.iter().copied().filter(|&s| *self.value(s) == value).collect();
        DemandProfile {
            alpha: alpha.clone(),
            demand,
            best,
            agent_utility: agent_utility.unwrap_or_default(),
            value,
        }
    }

    /// `V(α)` by enumeration.
    pub fn v(&self, alpha: &Rational) -> Rational {
        self.demand(alpha).value
    }
}

/// Exhaustive best response over all subsets, with the default size limit.
pub fn brute_force_demand(inst: &Instance, alpha: &Rational) -> Result<DemandProfile> {
    brute_force_demand_with_limit(inst, alpha, DEFAULT_BRUTE_FORCE_LIMIT)
}

pub fn brute_force_demand_with_limit(
    inst: &Instance,
    alpha: &Rational,
    limit: usize,
) -> Result<DemandProfile> {
    check_alpha(alpha)?;
    Ok(SubsetTable::build(inst, limit)?.demand(alpha))
}

/// Deterministic representative of `D*`: the member whose sorted action list
/// is lexicographically smallest.
pub fn canonical_best_response(profile: &DemandProfile) -> ActionSet {
    profile
        .best
        .iter()
        .copied()
        .min_by(|a, b| a.iter().cmp(b.iter()))
        .unwrap_or(ActionSet::EMPTY)
}

/// How [`VOracle`] answers queries.
#[derive(Clone, Debug)]
pub enum DemandBackend {
    Greedy,
    BruteForce(SubsetTable),
}

/// Query-counting `V(α)` oracle.
///
/// Each distinct `α` costs one query; repeated questions are answered from
/// memory. `V(0) = 0` is known without a query since costs are positive and
/// `f(∅) = 0`.
#[derive(Clone, Debug)]
pub struct VOracle<'a> {
    inst: &'a Instance,
    backend: DemandBackend,
    queries: u64,
    known: BTreeMap<Rational, Rational>,
}

impl<'a> VOracle<'a> {
    /// Greedy for gross-substitutes classes, enumeration otherwise.
    pub fn new(inst: &'a Instance) -> Result<Self> {
        Self::with_limit(inst, DEFAULT_BRUTE_FORCE_LIMIT)
    }

    pub fn with_limit(inst: &'a Instance, limit: usize) -> Result<Self> {
        if inst.gs_certified() {
            Ok(Self::greedy(inst)?)
        } else {
            Self::brute_force(inst, limit)
        }
    }

    pub fn greedy(inst: &'a Instance) -> Result<Self> {
        if !inst.gs_certified() {
            return Err(Error::UnsupportedClass(format!(
                "greedy demand is not exact for {} functions",
                inst.class()
            )));
        }
        Ok(Self::from_backend(inst, DemandBackend::Greedy))
    }

    pub fn brute_force(inst: &'a Instance, limit: usize) -> Result<Self> {
        Ok(Self::from_backend(inst, DemandBackend::BruteForce(SubsetTable::build(inst, limit)?)))
    }

    fn from_backend(inst: &'a Instance, backend: DemandBackend) -> Self {
        let mut known = BTreeMap::new();
        known.insert(Rational::zero(), Rational::zero());
        VOracle { inst, backend, queries: 0, known }
    }

    pub fn instance(&self) -> &'a Instance {
        self.inst
    }

    pub fn backend(&self) -> &DemandBackend {
        &self.backend
    }

    /// `V(α)` for `α ∈ [0, 1]`.
    pub fn value(&mut self, alpha: &Rational) -> Result<Rational> {
        check_alpha(alpha)?;
        if let Some(v) = self.known.get(alpha) {
            return Ok(v.clone());
        }
        self.queries += 1;
        let v = match &self.backend {
            DemandBackend::Greedy => self.inst.function().value_unchecked(greedy_unchecked(self.inst, alpha).set),
            DemandBackend::BruteForce(table) => table.v(alpha),
        };
        self.known.insert(alpha.clone(), v.clone());
        Ok(v)
    }

    /// Whether `V(α)` is already known, so asking costs nothing.
    pub fn knows(&self, alpha: &Rational) -> bool {
        self.known.contains_key(alpha)
    }

    /// A set in `D*(α)`: the greedy set, or the canonical enumerated one.
    /// Not counted as a query.
    pub fn best_response(&self, alpha: &Rational) -> Result<ActionSet> {
        check_alpha(alpha)?;
        Ok(match &self.backend {
            DemandBackend::Greedy => greedy_unchecked(self.inst, alpha).set,
            DemandBackend::BruteForce(table) => canonical_best_response(&table.demand(alpha)),
        })
    }

    pub fn queries(&self) -> u64 {
        self.queries
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::{example_instance, SuccessFunction};

    fn r(s: &str) -> Rational {
        s.parse().unwrap()
    }

    fn rs(items: &[&str]) -> Vec<Rational> {
        items.iter().map(|s| r(s)).collect()
    }

    fn set(actions: &[usize]) -> ActionSet {
        ActionSet::from_actions(actions.iter().map(|a| a - 1))
    }

    fn additive_pair() -> Instance {
        Instance::new(SuccessFunction::Additive { values: rs(&["1/2", "2/5"]) }, rs(&["1/10", "1/5"])).unwrap()
    }

    #[test]
    fn greedy_takes_zero_utility_actions() {
        let g = greedy_demand(&additive_pair(), &r("1/2")).unwrap();
        assert_eq!(g.actions, vec![0, 1]);
        assert_eq!(g.step_utilities, rs(&["3/20", "0"]));
    }

    #[test]
    fn greedy_empty_when_nothing_pays() {
        let g = greedy_demand(&additive_pair(), &r("1/10")).unwrap();
        assert!(g.is_empty());
    }

    #[test]
    fn greedy_unit_demand() {
        let inst =
            Instance::new(SuccessFunction::UnitDemand { values: rs(&["3/5", "4/5"]) }, rs(&["1/10", "3/10"]))
                .unwrap();
        let g = greedy_demand(&inst, &r("1/2")).unwrap();
        assert_eq!(g.actions, vec![0]);
        assert_eq!(g.step_utilities, rs(&["1/5"]));
    }

    #[test]
    fn greedy_prefers_costlier_on_ties() {
        // Both actions give utility 1/4 - 1/8 = 1/8 and 1/2 - 3/8 = 1/8 at α = 1.
        let inst =
            Instance::new(SuccessFunction::UnitDemand { values: rs(&["1/4", "1/2"]) }, rs(&["1/8", "3/8"]))
                .unwrap();
        let g = greedy_demand(&inst, &r("1")).unwrap();
        assert_eq!(g.actions, vec![1]);
        // Equal cost and equal utility: smallest index wins.
        let inst =
            Instance::new(SuccessFunction::UnitDemand { values: rs(&["1/2", "1/2"]) }, rs(&["1/8", "1/8"]))
                .unwrap();
        assert_eq!(greedy_demand(&inst, &r("1")).unwrap().actions, vec![0]);
    }

    #[test]
    fn greedy_rejects_non_gs_and_bad_alpha() {
        assert!(matches!(greedy_demand(&example_instance(), &r("1/2")), Err(Error::UnsupportedClass(_))));
        assert!(matches!(greedy_demand(&additive_pair(), &r("3/2")), Err(Error::Domain(_))));
    }

    #[test]
    fn brute_force_example_at_one() {
        let p = brute_force_demand(&example_instance(), &r("1")).unwrap();
        assert_eq!(p.demand, vec![set(&[1, 2]), set(&[3])]);
        assert_eq!(p.best, vec![set(&[3])]);
        assert_eq!(p.value, r("3/5"));
        assert_eq!(p.agent_utility, r("3/10"));
        assert_eq!(canonical_best_response(&p), set(&[3]));
    }

    #[test]
    fn brute_force_example_at_half() {
        // {1}, {2} and {1,2} all give the agent 1/20; {1,2} has the larger f.
        let p = brute_force_demand(&example_instance(), &r("1/2")).unwrap();
        for s in [set(&[1]), set(&[2]), set(&[1, 2])] {
            assert!(p.demand.contains(&s));
        }
        assert_eq!(p.agent_utility, r("1/20"));
        assert_eq!(p.best, vec![set(&[1, 2])]);
        assert_eq!(p.value, r("1/2"));
        assert_eq!(canonical_best_response(&p), set(&[1, 2]));
    }

    #[test]
    fn brute_force_at_zero_is_empty() {
        let p = brute_force_demand(&example_instance(), &r("0")).unwrap();
        assert_eq!(p.demand, vec![ActionSet::EMPTY]);
        assert_eq!(p.value, r("0"));
    }

    #[test]
    fn brute_force_limit() {
        let inst = Instance::new(SuccessFunction::Additive { values: vec![r("1/32"); 13] }, vec![r("1/64"); 13])
            .unwrap();
        assert!(matches!(brute_force_demand(&inst, &r("1/2")), Err(Error::Resource(_))));
        assert!(brute_force_demand_with_limit(&inst, &r("1/2"), 13).is_ok());
    }

    #[test]
    fn canonical_is_lexicographic() {
        let profile = DemandProfile {
            alpha: r("1"),
            demand: vec![],
            best: vec![set(&[2]), set(&[1])],
            agent_utility: r("0"),
            value: r("0"),
        };
        assert_eq!(canonical_best_response(&profile), set(&[1]));
        let profile = DemandProfile { best: vec![set(&[2]), set(&[1, 3])], ..profile };
        assert_eq!(canonical_best_response(&profile), set(&[1, 3]));
    }

    #[test]
    fn v_oracle_examples_and_counting() {
        let ex = example_instance();
        let mut oracle = VOracle::new(&ex).unwrap();
        assert_eq!(oracle.value(&r("1")).unwrap(), r("3/5"));
        assert_eq!(oracle.value(&r("1/4")).unwrap(), r("0"));
        assert_eq!(oracle.queries(), 2);
        assert_eq!(oracle.value(&r("1")).unwrap(), r("3/5"));
        assert_eq!(oracle.value(&r("0")).unwrap(), r("0"));
        assert_eq!(oracle.queries(), 2);

        let add = additive_pair();
        let mut oracle = VOracle::new(&add).unwrap();
        assert!(matches!(oracle.backend(), DemandBackend::Greedy));
        assert_eq!(oracle.value(&r("1/2")).unwrap(), r("9/10"));
        assert_eq!(oracle.queries(), 1);
    }

    #[test]
    fn greedy_steps_are_non_increasing() {
        let inst = Instance::new(
            SuccessFunction::MatroidRank {
                matroid: crate::functions::Matroid::Uniform { rank: 2 },
                weights: rs(&["1/4", "1/8", "3/8", "1/16"]),
            },
            rs(&["1/32", "1/16", "1/8", "1/64"]),
        )
        .unwrap();
        for num in 0..=16 {
            let g = greedy_demand(&inst, &Rational::frac(num, 16)).unwrap();
            assert!(g.step_utilities.windows(2).all(|w| w[0] >= w[1]));
            assert!(g.step_utilities.iter().all(|u| !u.is_negative()));
            let bf = brute_force_demand(&inst, &Rational::frac(num, 16)).unwrap();
            assert!(bf.best.contains(&g.set));
        }
    }
}
