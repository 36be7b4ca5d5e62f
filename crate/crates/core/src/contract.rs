//! Critical values, successor oracles and the optimal-contract iteration.
//!
//! `V(α)` is a right-continuous step function; the values where it jumps form
//! the critical set, and the optimal contract is one of them (or 0). The
//! optimizer walks the critical set with a successor oracle, of which there
//! are three: greedy ratios for gross-substitutes classes ([`GsSuccessor`]),
//! bisection with bounded-fraction recovery
//! ([`crate::approx::SearchSuccessor`]), and exhaustive enumeration
//! ([`BruteSuccessor`]).

use std::collections::BTreeSet;
use std::fmt;

use crate::approx::SearchSuccessor;
use crate::demand::{canonical_best_response, greedy_unchecked, SubsetTable, VOracle};
use crate::error::{Error, Result};
use crate::functions::{ActionSet, Instance, DEFAULT_BRUTE_FORCE_LIMIT};
use crate::numeric::Rational;

/// One jump of `V`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CriticalPoint {
    pub alpha: Rational,
    pub value: Rational,
    /// A set in `D*(alpha)`.
    pub best_response: ActionSet,
}

impl CriticalPoint {
    /// Principal's utility `(1 - α)·V(α)`.
    pub fn principal_utility(&self) -> Rational {
        (Rational::one() - &self.alpha) * &self.value
    }
}

/// The critical set in increasing order of `alpha`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CriticalProfile {
    pub points: Vec<CriticalPoint>,
}

impl CriticalProfile {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn alphas(&self) -> Vec<Rational> {
        self.points.iter().map(|p| p.alpha.clone()).collect()
    }

    pub fn values(&self) -> Vec<Rational> {
        self.points.iter().map(|p| p.value.clone()).collect()
    }

    /// Smallest critical value strictly above `alpha`.
    pub fn successor(&self, alpha: &Rational) -> Option<Rational> {
        self.points.iter().map(|p| &p.alpha).find(|a| *a > alpha).cloned()
    }

    /// Best contract among the critical values and 0; ties go to the
    /// smallest contract.
    pub fn best(&self) -> (Rational, Rational) {
        let mut best = (Rational::zero(), Rational::zero());
        for p in &self.points {
            let u = p.principal_utility();
            if u > best.1 {
                best = (p.alpha.clone(), u);
            }
        }
        best
    }
}

/// Result of an optimal-contract computation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContractSolution {
    pub alpha: Rational,
    /// `(1 - alpha)·V(alpha)`.
    pub utility: Rational,
    pub value: Rational,
    pub incentivized: ActionSet,
    /// Every critical value visited, when the method enumerates them.
    pub profile: Option<CriticalProfile>,
    /// `V` queries spent.
    pub queries: u64,
}

/// Access to `succ(α)` and `V(α)` for one instance.
pub trait Successor {
    fn instance(&self) -> &Instance;

    /// Smallest critical value strictly above `alpha`, or `None`.
    fn successor(&mut self, alpha: &Rational) -> Result<Option<Rational>>;

    fn value(&mut self, alpha: &Rational) -> Result<Rational>;

    /// A set in `D*(alpha)`; free of query cost.
    fn best_response(&self, alpha: &Rational) -> Result<ActionSet>;

    fn queries(&self) -> u64;
}

/// Successor for gross-substitutes instances, from the greedy order.
#[derive(Clone, Debug)]
pub struct GsSuccessor<'a> {
    oracle: VOracle<'a>,
}

impl<'a> GsSuccessor<'a> {
    pub fn new(inst: &'a Instance) -> Result<Self> {
        Ok(GsSuccessor { oracle: VOracle::greedy(inst)? })
    }

    /// The candidate ratios derived from the greedy order at `alpha`,
    /// restricted to `(alpha, 1]`, deduplicated and sorted.
    pub fn candidates(&self, alpha: &Rational) -> Vec<Rational> {
        let inst = self.oracle.instance();
        let f = inst.function();
        let costs = inst.costs();
        let ordered = greedy_unchecked(inst, alpha);
        let one = Rational::one();
        let mut out = BTreeSet::new();
        let mut push = |num: Rational, den: Rational| {
            if den.is_positive() {
                let ratio = num / den;
                if ratio > *alpha && ratio <= one {
                    out.insert(ratio);
                }
            }
        };
        for (i, &chosen) in ordered.actions.iter().enumerate() {
            let prefix = ordered.prefix(i);
            let chosen_gain = f.gain(chosen, prefix);
            for a in 0..inst.n() {
                push(&costs[a] - &costs[chosen], f.gain(a, prefix) - &chosen_gain);
            }
        }
        for a in (0..inst.n()).filter(|&a| !ordered.set.contains(a)) {
            push(costs[a].clone(), f.gain(a, ordered.set));
        }
        out.into_iter().collect()
    }
}

impl Successor for GsSuccessor<'_> {
    fn instance(&self) -> &Instance {
        self.oracle.instance()
    }

    fn successor(&mut self, alpha: &Rational) -> Result<Option<Rational>> {
        let base = self.oracle.value(alpha)?;
        for beta in self.candidates(alpha) {
            if self.oracle.value(&beta)? > base {
                return Ok(Some(beta));
            }
        }
        Ok(None)
    }

    fn value(&mut self, alpha: &Rational) -> Result<Rational> {
        self.oracle.value(alpha)
    }

    fn best_response(&self, alpha: &Rational) -> Result<ActionSet> {
        self.oracle.best_response(alpha)
    }

    fn queries(&self) -> u64 {
        self.oracle.queries()
    }
}

/// `succ(α)` for a gross-substitutes instance.
pub fn succ_gs(inst: &Instance, alpha: &Rational) -> Result<Option<Rational>> {
    GsSuccessor::new(inst)?.successor(alpha)
}

/// Next jump of the upper envelope of the lines `α ↦ α·f(S) - c(S)`.
///
/// With `S` in `D*(α)`, every line steeper than `S` crosses it to the right
/// of `α`; the leftmost such crossing is where `V` next increases.
fn envelope_step(table: &SubsetTable, alpha: &Rational) -> Option<Rational> {
    let profile = table.demand(alpha);
    let current = profile.best[0];
    let (fc, cc) = (table.value(current), table.cost(current));
    table
        .sets()
        .filter(|&s| table.value(s) > fc)
        .map(|s| (table.cost(s) - cc) / (table.value(s) - fc))
        .min()
}

/// Successor by exhaustive enumeration.
#[derive(Clone, Debug)]
pub struct BruteSuccessor<'a> {
    inst: &'a Instance,
    table: SubsetTable,
    queries: u64,
}

impl<'a> BruteSuccessor<'a> {
    pub fn new(inst: &'a Instance) -> Result<Self> {
        Self::with_limit(inst, DEFAULT_BRUTE_FORCE_LIMIT)
    }

    pub fn with_limit(inst: &'a Instance, limit: usize) -> Result<Self> {
        Ok(BruteSuccessor { inst, table: SubsetTable::build(inst, limit)?, queries: 0 })
    }
}

impl Successor for BruteSuccessor<'_> {
    fn instance(&self) -> &Instance {
        self.inst
    }

    fn successor(&mut self, alpha: &Rational) -> Result<Option<Rational>> {
        Ok(envelope_step(&self.table, alpha).filter(|b| *b <= Rational::one()))
    }

    fn value(&mut self, alpha: &Rational) -> Result<Rational> {
        self.queries += 1;
        Ok(self.table.v(alpha))
    }

    fn best_response(&self, alpha: &Rational) -> Result<ActionSet> {
        Ok(canonical_best_response(&self.table.demand(alpha)))
    }

    fn queries(&self) -> u64 {
        self.queries
    }
}

/// Iterates `α ← succ(α)` from 0, keeping the contract that maximizes
/// `(1 - α)·V(α)`. Ties keep the smaller contract.
pub fn optimal_contract<S: Successor + ?Sized>(succ: &mut S) -> Result<ContractSolution> {
    let mut best_alpha = Rational::zero();
    let mut best_utility = succ.value(&best_alpha)?;
    let mut points = Vec::new();
    let mut alpha = succ.successor(&best_alpha)?;
    while let Some(a) = alpha {
        let value = succ.value(&a)?;
        let point = CriticalPoint { alpha: a.clone(), value, best_response: succ.best_response(&a)? };
        let utility = point.principal_utility();
        if utility > best_utility {
            best_utility = utility;
            best_alpha = a.clone();
        }
        points.push(point);
        alpha = succ.successor(&a)?;
    }
    if let Some(w) = points.windows(2).find(|w| w[0].value >= w[1].value) {
        return Err(Error::Invariant(format!(
            "V does not increase between critical values {} and {}",
            w[0].alpha, w[1].alpha
        )));
    }
    let value = succ.value(&best_alpha)?;
    Ok(ContractSolution {
        incentivized: succ.best_response(&best_alpha)?,
        alpha: best_alpha,
        utility: best_utility,
        value,
        profile: Some(CriticalProfile { points }),
        queries: succ.queries(),
    })
}

/// Which successor backend drives [`solve`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SuccessorMethod {
    Gs,
    Search,
    Brute,
}

impl SuccessorMethod {
    pub fn name(self) -> &'static str {
        match self {
            SuccessorMethod::Gs => "gs",
            SuccessorMethod::Search => "search",
            SuccessorMethod::Brute => "brute",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "gs" => Ok(SuccessorMethod::Gs),
            "search" => Ok(SuccessorMethod::Search),
            "brute" => Ok(SuccessorMethod::Brute),
            other => Err(Error::Parse(format!("unknown successor method {other:?}"))),
        }
    }

    /// Greedy ratios when the class allows it, enumeration otherwise.
    pub fn default_for(inst: &Instance) -> Self {
        if inst.gs_certified() {
            SuccessorMethod::Gs
        } else {
            SuccessorMethod::Brute
        }
    }
}

impl fmt::Display for SuccessorMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Builds the requested successor backend.
pub fn successor_for<'a>(
    inst: &'a Instance,
    method: SuccessorMethod,
    limit: usize,
) -> Result<Box<dyn Successor + 'a>> {
    Ok(match method {
        SuccessorMethod::Gs => Box::new(GsSuccessor::new(inst)?),
        SuccessorMethod::Search => Box::new(SearchSuccessor::with_limit(inst, limit)?),
        SuccessorMethod::Brute => Box::new(BruteSuccessor::with_limit(inst, limit)?),
    })
}

/// Optimal contract with the chosen successor backend.
pub fn solve(inst: &Instance, method: SuccessorMethod, limit: usize) -> Result<ContractSolution> {
    let mut succ = successor_for(inst, method, limit)?;
    optimal_contract(succ.as_mut())
}

/// The critical set in `(0, 1]` by exhaustive enumeration.
pub fn brute_force_critical_set(inst: &Instance) -> Result<CriticalProfile> {
    let table = SubsetTable::build(inst, DEFAULT_BRUTE_FORCE_LIMIT)?;
    Ok(critical_profile(&table, Some(&Rational::one())))
}

/// Jumps of `V` in `(0, upper]`, or in `(0, ∞)` when `upper` is `None`,
/// found by walking the upper envelope of all `2^n` lines.
pub fn critical_profile(table: &SubsetTable, upper: Option<&Rational>) -> CriticalProfile {
    let mut points = Vec::new();
    let mut alpha = Rational::zero();
    while let Some(beta) = envelope_step(table, &alpha) {
        if upper.is_some_and(|u| beta > *u) {
            break;
        }
        let profile = table.demand(&beta);
        points.push(CriticalPoint {
            alpha: beta.clone(),
            value: profile.value.clone(),
            best_response: canonical_best_response(&profile),
        });
        alpha = beta;
    }
    CriticalProfile { points }
}

/// Largest `n` accepted by [`critical_set_by_intersections`].
pub const INTERSECTION_LIMIT: usize = 8;

/// Critical set in `(0, upper]` from all pairwise line intersections.
///
/// Every abscissa where two subset lines meet is a candidate; `V` is
/// evaluated at each candidate and at the midpoint to the previous one, and
/// the candidates where it changes are kept. Quadratic in `2^n`, so limited
/// to small instances; it serves as an independent check of the envelope walk.
pub fn critical_set_by_intersections(table: &SubsetTable, upper: &Rational) -> Result<CriticalProfile> {
    if table.n() > INTERSECTION_LIMIT {
        return Err(Error::Resource(format!(
            "{} actions exceed the pairwise-intersection limit of {INTERSECTION_LIMIT}",
            table.n()
        )));
    }
    let sets: Vec<ActionSet> = table.sets().collect();
    let mut candidates = BTreeSet::new();
    for (i, &s) in sets.iter().enumerate() {
        for &t in &sets[i + 1..] {
            let df = table.value(s) - table.value(t);
            if df.is_zero() {
                continue;
            }
            let x = (table.cost(s) - table.cost(t)) / df;
            if x.is_positive() && x <= *upper {
                candidates.insert(x);
            }
        }
    }
    let mut points = Vec::new();
    let mut previous = Rational::zero();
    for beta in candidates {
        let left = table.v(&beta.midpoint(&previous));
        let profile = table.demand(&beta);
        if profile.value != left {
            points.push(CriticalPoint {
                alpha: beta.clone(),
                value: profile.value.clone(),
                best_response: canonical_best_response(&profile),
            });
        }
        previous = beta;
    }
    Ok(CriticalProfile { points })
}
