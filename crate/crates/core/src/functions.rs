//! Success-probability function classes, action sets and problem instances.

use std::fmt;

use crate::error::{Error, Result};
use crate::numeric::{is_k_valid, BitPrecision, Rational};

/// Hard upper bound on the number of actions of any instance.
pub const MAX_ACTIONS: usize = 24;

/// Default largest `n` for which exhaustive (2^n) enumeration is attempted.
pub const DEFAULT_BRUTE_FORCE_LIMIT: usize = 12;

/// A set of actions, stored as a bitmask. Action `i` (zero-based) is bit `i`.
///
/// Displayed with one-based action labels, e.g. `{1,3}`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct ActionSet(u32);

impl ActionSet {
    pub const EMPTY: ActionSet = ActionSet(0);

    pub fn from_bits(bits: u32) -> Self {
        ActionSet(bits)
    }

    pub fn full(n: usize) -> Self {
        debug_assert!(n <= MAX_ACTIONS);
        ActionSet(((1u64 << n) - 1) as u32)
    }

    pub fn singleton(action: usize) -> Self {
        ActionSet(1 << action)
    }

    pub fn from_actions<I: IntoIterator<Item = usize>>(actions: I) -> Self {
        ActionSet(actions.into_iter().fold(0, |acc, a| acc | (1 << a)))
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn contains(self, action: usize) -> bool {
        self.0 >> action & 1 == 1
    }

    pub fn with(self, action: usize) -> Self {
        ActionSet(self.0 | (1 << action))
    }

    pub fn without(self, action: usize) -> Self {
        ActionSet(self.0 & !(1 << action))
    }

    pub fn union(self, other: ActionSet) -> Self {
        ActionSet(self.0 | other.0)
    }

    pub fn is_subset(self, other: ActionSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    /// Zero-based actions in increasing order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        (0..32).filter(move |&a| self.contains(a))
    }

    pub fn to_vec(self) -> Vec<usize> {
        self.iter().collect()
    }

    /// Iterates over all `2^n` subsets of `{0..n}` in bitmask order.
    pub fn all(n: usize) -> impl Iterator<Item = ActionSet> {
        (0..1u32 << n).map(ActionSet)
    }
}

impl fmt::Display for ActionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, a) in self.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", a + 1)?;
        }
        write!(f, "}}")
    }
}

impl fmt::Debug for ActionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Matroid {
    /// Every set of at most `rank` actions is independent.
    Uniform { rank: usize },
    /// Actions are split into blocks; a set is independent if it takes at
    /// most `capacities[b]` actions from block `b`.
    Partition {
        blocks: Vec<Vec<usize>>,
        capacities: Vec<usize>,
    },
}

/// Class tag of a [`SuccessFunction`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FunctionClass {
    Additive,
    UnitDemand,
    MatroidRank,
    BudgetAdditive,
    Coverage,
    Table,
}

impl FunctionClass {
    pub const ALL: [FunctionClass; 6] = [
        FunctionClass::Additive,
        FunctionClass::UnitDemand,
        FunctionClass::MatroidRank,
        FunctionClass::BudgetAdditive,
        FunctionClass::Coverage,
        FunctionClass::Table,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FunctionClass::Additive => "additive",
            FunctionClass::UnitDemand => "unit-demand",
            FunctionClass::MatroidRank => "matroid-rank",
            FunctionClass::BudgetAdditive => "budget-additive",
            FunctionClass::Coverage => "coverage",
            FunctionClass::Table => "table",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == name)
            .ok_or_else(|| Error::Parse(format!("unknown function class {name:?}")))
    }

    /// Classes for which greedy demand is exact (gross substitutes).
    pub fn gs_certified(self) -> bool {
        matches!(
            self,
            FunctionClass::Additive | FunctionClass::UnitDemand | FunctionClass::MatroidRank
        )
    }
}

impl fmt::Display for FunctionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A monotone set function `f: 2^A -> [0, 1]` with `f(∅) = 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SuccessFunction {
    Additive {
        values: Vec<Rational>,
    },
    UnitDemand {
        values: Vec<Rational>,
    },
    /// Weighted rank of a uniform or partition matroid: the heaviest
    /// independent subset of `S`.
    MatroidRank {
        matroid: Matroid,
        weights: Vec<Rational>,
    },
    BudgetAdditive {
        values: Vec<Rational>,
        budget: Rational,
    },
    /// `f(S)` is the total weight of universe elements covered by some action
    /// of `S`; `covers[a]` lists element indices.
    Coverage {
        weights: Vec<Rational>,
        covers: Vec<Vec<usize>>,
    },
    /// Explicit values indexed by the subset bitmask.
    Table {
        values: Vec<Rational>,
    },
}

impl SuccessFunction {
    pub fn class(&self) -> FunctionClass {
        match self {
            SuccessFunction::Additive { .. } => FunctionClass::Additive,
            SuccessFunction::UnitDemand { .. } => FunctionClass::UnitDemand,
            SuccessFunction::MatroidRank { .. } => FunctionClass::MatroidRank,
            SuccessFunction::BudgetAdditive { .. } => FunctionClass::BudgetAdditive,
            SuccessFunction::Coverage { .. } => FunctionClass::Coverage,
            SuccessFunction::Table { .. } => FunctionClass::Table,
        }
    }

    pub fn gs_certified(&self) -> bool {
        self.class().gs_certified()
    }

    pub fn num_actions(&self) -> usize {
        match self {
            SuccessFunction::Additive { values }
            | SuccessFunction::UnitDemand { values }
            | SuccessFunction::BudgetAdditive { values, .. } => values.len(),
            SuccessFunction::MatroidRank { weights, .. } => weights.len(),
            SuccessFunction::Coverage { covers, .. } => covers.len(),
            SuccessFunction::Table { values } => values.len().trailing_zeros() as usize,
        }
    }

    /// Checks the parameters are well-formed (lengths, index ranges,
    /// non-negativity). Does not check monotonicity of tables.
    fn check_shape(&self) -> Result<()> {
        let neg = |vals: &[Rational], what: &str| -> Result<()> {
            match vals.iter().position(Rational::is_negative) {
                Some(i) => Err(Error::Domain(format!("{what} {} is negative", i + 1))),
                None => Ok(()),
            }
        };
        match self {
            SuccessFunction::Additive { values } | SuccessFunction::UnitDemand { values } => {
                neg(values, "value of action")
            }
            SuccessFunction::BudgetAdditive { values, budget } => {
                neg(values, "value of action")?;
                if budget.is_negative() {
                    return Err(Error::Domain("budget is negative".into()));
                }
                Ok(())
            }
            SuccessFunction::MatroidRank { matroid, weights } => {
                neg(weights, "weight of action")?;
                if let Matroid::Partition { blocks, capacities } = matroid {
                    if blocks.len() != capacities.len() {
                        return Err(Error::Domain("one capacity per block required".into()));
                    }
                    let mut seen = vec![false; weights.len()];
                    for &a in blocks.iter().flatten() {
                        if a >= weights.len() || std::mem::replace(&mut seen[a], true) {
                            return Err(Error::Domain(format!(
                                "partition blocks must cover each action exactly once (action {})",
                                a + 1
                            )));
                        }
                    }
                    if seen.iter().any(|s| !s) {
                        return Err(Error::Domain("partition blocks must cover every action".into()));
                    }
                }
                Ok(())
            }
            SuccessFunction::Coverage { weights, covers } => {
                neg(weights, "weight of element")?;
                if let Some(&j) = covers.iter().flatten().find(|&&j| j >= weights.len()) {
                    return Err(Error::Domain(format!("cover references unknown element {j}")));
                }
                Ok(())
            }
            SuccessFunction::Table { values } => {
                if values.is_empty() || !values.len().is_power_of_two() {
                    return Err(Error::Domain("table length must be a power of two".into()));
                }
                if values.len().trailing_zeros() as usize > MAX_ACTIONS {
                    return Err(Error::Resource(format!("table exceeds {MAX_ACTIONS} actions")));
                }
                Ok(())
            }
        }
    }

    /// `f(S)`.
    pub fn value(&self, set: ActionSet) -> Result<Rational> {
        if !set.is_subset(ActionSet::full(self.num_actions())) {
            return Err(Error::Domain(format!(
                "{set} is not a subset of the {} actions",
                self.num_actions()
            )));
        }
        Ok(self.value_unchecked(set))
    }

    pub(crate) fn value_unchecked(&self, set: ActionSet) -> Rational {
        match self {
            SuccessFunction::Additive { values } => set.iter().map(|a| &values[a]).sum(),
            SuccessFunction::UnitDemand { values } => set
                .iter()
                .map(|a| &values[a])
                .max()
                .cloned()
                .unwrap_or_else(Rational::zero),
            SuccessFunction::MatroidRank { matroid, weights } => {
                let top = |members: &mut Vec<&Rational>, cap: usize| -> Rational {
                    members.sort_by(|a, b| b.cmp(a));
                    members.iter().take(cap).copied().sum()
                };
                match matroid {
                    Matroid::Uniform { rank } => {
                        let mut members: Vec<_> = set.iter().map(|a| &weights[a]).collect();
                        top(&mut members, *rank)
                    }
                    Matroid::Partition { blocks, capacities } => blocks
                        .iter()
                        .zip(capacities)
                        .map(|(block, &cap)| {
                            let mut members: Vec<_> = block
                                .iter()
                                .filter(|&&a| set.contains(a))
                                .map(|&a| &weights[a])
                                .collect();
                            top(&mut members, cap)
                        })
                        .sum(),
                }
            }
            SuccessFunction::BudgetAdditive { values, budget } => {
                let total: Rational = set.iter().map(|a| &values[a]).sum();
                total.min(budget.clone())
            }
            SuccessFunction::Coverage { weights, covers } => {
                let mut covered = vec![false; weights.len()];
                for a in set.iter() {
                    for &j in &covers[a] {
                        covered[j] = true;
                    }
                }
                weights
                    .iter()
                    .zip(covered)
                    .filter(|(_, c)| *c)
                    .map(|(w, _)| w)
                    .sum()
            }
            SuccessFunction::Table { values } => values[set.bits() as usize].clone(),
        }
    }

    /// `f(a | S) = f(S ∪ {a}) - f(S)` for `a ∉ S`.
    pub fn marginal(&self, action: usize, set: ActionSet) -> Result<Rational> {
        if action >= self.num_actions() {
            return Err(Error::Domain(format!("unknown action {}", action + 1)));
        }
        if set.contains(action) {
            return Err(Error::Domain(format!("action {} already in {set}", action + 1)));
        }
        Ok(self.value(set.with(action))? - self.value(set)?)
    }

    /// Marginal value that is zero when the action is already present.
    pub(crate) fn gain(&self, action: usize, set: ActionSet) -> Rational {
        if set.contains(action) {
            Rational::zero()
        } else {
            self.value_unchecked(set.with(action)) - self.value_unchecked(set)
        }
    }

    /// Exports every value as a [`SuccessFunction::Table`].
    pub fn to_table(&self) -> Result<SuccessFunction> {
        let n = self.num_actions();
        if n > MAX_ACTIONS {
            return Err(Error::Resource(format!("{n} actions exceed the table limit {MAX_ACTIONS}")));
        }
        Ok(SuccessFunction::Table {
            values: ActionSet::all(n).map(|s| self.value_unchecked(s)).collect(),
        })
    }

    /// Multiplies every value of the function by `factor >= 0`.
    pub fn scaled(&self, factor: &Rational) -> SuccessFunction {
        let scale = |v: &[Rational]| v.iter().map(|x| x * factor).collect::<Vec<_>>();
        match self {
            SuccessFunction::Additive { values } => SuccessFunction::Additive { values: scale(values) },
            SuccessFunction::UnitDemand { values } => SuccessFunction::UnitDemand { values: scale(values) },
            SuccessFunction::MatroidRank { matroid, weights } => SuccessFunction::MatroidRank {
                matroid: matroid.clone(),
                weights: scale(weights),
            },
            SuccessFunction::BudgetAdditive { values, budget } => SuccessFunction::BudgetAdditive {
                values: scale(values),
                budget: budget * factor,
            },
            SuccessFunction::Coverage { weights, covers } => SuccessFunction::Coverage {
                weights: scale(weights),
                covers: covers.clone(),
            },
            SuccessFunction::Table { values } => SuccessFunction::Table { values: scale(values) },
        }
    }

    /// The numbers that define the function; all of its values are sums,
    /// maxima or minima of these.
    fn parameters(&self) -> Vec<(String, &Rational)> {
        fn list<'v>(vals: &'v [Rational], what: &str) -> Vec<(String, &'v Rational)> {
            vals.iter().enumerate().map(|(i, v)| (format!("{what}[{}]", i + 1), v)).collect()
        }
        match self {
            SuccessFunction::Additive { values } | SuccessFunction::UnitDemand { values } => {
                list(values, "f")
            }
            SuccessFunction::BudgetAdditive { values, budget } => {
                let mut out = list(values, "f");
                out.push(("budget".into(), budget));
                out
            }
            SuccessFunction::MatroidRank { weights, .. } => list(weights, "weight"),
            SuccessFunction::Coverage { weights, .. } => list(weights, "element weight"),
            SuccessFunction::Table { values } => values
                .iter()
                .enumerate()
                .map(|(i, v)| (format!("f{}", ActionSet::from_bits(i as u32)), v))
                .collect(),
        }
    }
}

/// A binary-outcome contracting problem: actions, costs and success function.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    f: SuccessFunction,
    costs: Vec<Rational>,
    k: Option<BitPrecision>,
    scale: Rational,
}

impl Instance {
    /// Checks dimensions and parameter shape; semantic checks (positive costs,
    /// monotonicity, range) are reported by [`Instance::validate`].
    pub fn new(f: SuccessFunction, costs: Vec<Rational>) -> Result<Self> {
        if costs.len() > MAX_ACTIONS {
            return Err(Error::Resource(format!(
                "{} actions exceed the limit of {MAX_ACTIONS}",
                costs.len()
            )));
        }
        if f.num_actions() != costs.len() {
            return Err(Error::Domain(format!(
                "function has {} actions but {} costs were given",
                f.num_actions(),
                costs.len()
            )));
        }
        f.check_shape()?;
        Ok(Instance { f, costs, k: None, scale: Rational::one() })
    }

    /// Declares that all values are multiples of `2^-k`.
    pub fn with_precision(mut self, k: BitPrecision) -> Self {
        self.k = Some(k);
        self
    }

    pub fn without_precision(mut self) -> Self {
        self.k = None;
        self
    }

    /// Declares the maximum admissible function value (1 for probabilities;
    /// larger for unnormalized generator output).
    pub fn with_scale(mut self, scale: Rational) -> Self {
        self.scale = scale;
        self
    }

    pub fn n(&self) -> usize {
        self.costs.len()
    }

    pub fn function(&self) -> &SuccessFunction {
        &self.f
    }

    pub fn costs(&self) -> &[Rational] {
        &self.costs
    }

    pub fn precision(&self) -> Option<BitPrecision> {
        self.k
    }

    pub fn scale(&self) -> &Rational {
        &self.scale
    }

    pub fn class(&self) -> FunctionClass {
        self.f.class()
    }

    pub fn gs_certified(&self) -> bool {
        self.f.gs_certified()
    }

    pub fn full_set(&self) -> ActionSet {
        ActionSet::full(self.n())
    }

    pub fn value(&self, set: ActionSet) -> Result<Rational> {
        self.f.value(set)
    }

    pub fn marginal(&self, action: usize, set: ActionSet) -> Result<Rational> {
        self.f.marginal(action, set)
    }

    /// `c(S) = Σ_{a∈S} c(a)`.
    pub fn cost(&self, set: ActionSet) -> Rational {
        set.iter().filter(|&a| a < self.n()).map(|a| &self.costs[a]).sum()
    }

    /// Replaces the cost vector, keeping the function.
    pub fn with_costs(&self, costs: Vec<Rational>) -> Result<Self> {
        let mut out = Instance::new(self.f.clone(), costs)?.with_scale(self.scale.clone());
        out.k = self.k;
        Ok(out)
    }

    /// Exhaustively checks the instance. Violations are collected, never
    /// thrown.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        for (a, c) in self.costs.iter().enumerate() {
            if !c.is_positive() {
                violations.push(Violation::NonPositiveCost { action: a, cost: c.clone() });
            }
        }
        let n = self.n();
        let exhaustive = matches!(self.f.class(), FunctionClass::Table | FunctionClass::Coverage);
        let empty = self.f.value_unchecked(ActionSet::EMPTY);
        if !empty.is_zero() {
            violations.push(Violation::EmptySetNonZero { value: empty });
        }
        if exhaustive {
            'outer: for set in ActionSet::all(n) {
                let base = self.f.value_unchecked(set);
                if base.is_negative() {
                    violations.push(Violation::OutOfRange { set, value: base.clone() });
                }
                for a in (0..n).filter(|&a| !set.contains(a)) {
                    let bigger = set.with(a);
                    if self.f.value_unchecked(bigger) < base {
                        violations.push(Violation::NonMonotone { subset: set, superset: bigger });
                        // One witness is enough to reject the table.
                        break 'outer;
                    }
                }
            }
        }
        let top = self.f.value_unchecked(self.full_set());
        if top > self.scale {
            violations.push(Violation::OutOfRange { set: self.full_set(), value: top });
        }
        if let Some(k) = self.k {
            for (name, value) in self.f.parameters() {
                if !is_k_valid(value, k) {
                    violations.push(Violation::NotKValid { what: name, value: value.clone(), k });
                }
            }
            for (a, c) in self.costs.iter().enumerate() {
                if !is_k_valid(c, k) {
                    violations.push(Violation::NotKValid {
                        what: format!("c[{}]", a + 1),
                        value: c.clone(),
                        k,
                    });
                }
            }
        }
        ValidationReport { violations }
    }

    /// True iff `k` is declared and every value is a multiple of `2^-k`
    /// within `[0, 1]`.
    pub fn is_k_valid(&self) -> bool {
        self.k.is_some() && self.scale <= Rational::one() && self.validate().is_valid()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    EmptySetNonZero { value: Rational },
    NonMonotone { subset: ActionSet, superset: ActionSet },
    NonPositiveCost { action: usize, cost: Rational },
    OutOfRange { set: ActionSet, value: Rational },
    NotKValid { what: String, value: Rational, k: BitPrecision },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptySetNonZero { value } => write!(f, "f(∅) ≠ 0 (got {value})"),
            Violation::NonMonotone { subset, superset } => {
                write!(f, "non-monotone: f{superset} < f{subset}")
            }
            Violation::NonPositiveCost { action, cost } => {
                write!(f, "non-positive cost c({}) = {cost}", action + 1)
            }
            Violation::OutOfRange { set, value } => {
                write!(f, "value out of range: f{set} = {value}")
            }
            Violation::NotKValid { what, value, k } => {
                write!(f, "{what} = {value} is not a multiple of 2^-{k}")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::Invariant(self.to_string()))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// The instance of the worked three-action example: a submodular, non-GS
/// table with `c = (1/10, 1/10, 3/10)`.
pub fn example_instance() -> Instance {
    let v = |s: &str| s.parse::<Rational>().unwrap();
    let values = vec![
        v("0"),
        v("3/10"),
        v("3/10"),
        v("1/2"),
        v("3/5"),
        v("3/5"),
        v("3/5"),
        v("3/5"),
    ];
    Instance::new(SuccessFunction::Table { values }, vec![v("1/10"), v("1/10"), v("3/10")])
        .expect("example instance is well-formed")
}
