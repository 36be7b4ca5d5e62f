//! Geometric-grid approximation and the bisection successor.
//!
//! With `k`-bit values every critical value is a fraction `a/b` with
//! `a, b ≤ 2^k`, and two such fractions are at least `2^-2k` apart. Bisecting
//! down to that width isolates one of them, which [`unique_rational_in`] then
//! recovers exactly.

use crate::contract::{ContractSolution, Successor};
use crate::demand::VOracle;
use crate::error::{Error, Result};
use crate::functions::{ActionSet, Instance, DEFAULT_BRUTE_FORCE_LIMIT};
use crate::numeric::{BitPrecision, Rational};

/// The grid `{1 - (1-ε)^i : 1 ≤ i ≤ m}`, with `m` the least integer such
/// that `(1-ε)^m ≤ 2^-k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridSpec {
    epsilon: Rational,
    k: BitPrecision,
    m: u32,
}

impl GridSpec {
    pub fn new(epsilon: Rational, k: BitPrecision) -> Result<Self> {
        if !epsilon.is_positive() || epsilon >= Rational::one() {
            return Err(Error::Domain(format!("epsilon {epsilon} is outside (0, 1)")));
        }
        let ratio = Rational::one() - &epsilon;
        let target = k.unit();
        let mut power = ratio.clone();
        let mut m = 1u32;
        while power > target {
            power = power * &ratio;
            m += 1;
        }
        Ok(GridSpec { epsilon, k, m })
    }

    pub fn epsilon(&self) -> &Rational {
        &self.epsilon
    }

    pub fn precision(&self) -> BitPrecision {
        self.k
    }

    /// Number of grid points.
    pub fn size(&self) -> u32 {
        self.m
    }

    /// Grid points in increasing order.
    pub fn points(&self) -> Vec<Rational> {
        let ratio = Rational::one() - &self.epsilon;
        let mut power = Rational::one();
        (0..self.m)
            .map(|_| {
                power = &power * &ratio;
                Rational::one() - &power
            })
            .collect()
    }
}

fn declared_precision(inst: &Instance) -> Result<BitPrecision> {
    let k = inst
        .precision()
        .ok_or_else(|| Error::Precondition("instance does not declare a bit precision k".into()))?;
    if !inst.is_k_valid() {
        return Err(Error::Precondition(format!("instance values are not {k}-bit valid")));
    }
    Ok(k)
}

/// Best contract on the geometric grid; within a `1 - ε` factor of optimal.
pub fn fptas(inst: &Instance, epsilon: &Rational) -> Result<ContractSolution> {
    fptas_with_limit(inst, epsilon, DEFAULT_BRUTE_FORCE_LIMIT)
}

pub fn fptas_with_limit(inst: &Instance, epsilon: &Rational, limit: usize) -> Result<ContractSolution> {
    let k = declared_precision(inst)?;
    let grid = GridSpec::new(epsilon.clone(), k)?;
    let mut oracle = VOracle::with_limit(inst, limit)?;
    let mut best = (Rational::zero(), Rational::zero(), Rational::zero());
    for alpha in grid.points() {
        let value = oracle.value(&alpha)?;
        let utility = (Rational::one() - &alpha) * &value;
        if utility > best.1 {
            best = (alpha, utility, value);
        }
    }
    let (alpha, utility, value) = best;
    Ok(ContractSolution {
        incentivized: oracle.best_response(&alpha)?,
        alpha,
        utility,
        value,
        profile: None,
        queries: oracle.queries(),
    })
}

/// The simplest fraction in an interval, where either end may be open and
/// `hi = None` means unbounded above.
fn simplest_between(lo: &Rational, lo_closed: bool, hi: Option<&Rational>, hi_closed: bool) -> Rational {
    let floor = Rational::integer(lo.floor());
    let first = if lo_closed && lo.is_integer() { lo.clone() } else { &floor + Rational::one() };
    let fits = match hi {
        None => true,
        Some(h) => first < *h || (hi_closed && first == *h),
    };
    if fits {
        return first;
    }
    let hi = hi.expect("bounded interval");
    // Both ends lie in [floor, floor + 1): continue on the reciprocal of the
    // fractional part, which reverses the interval.
    let y_lo = (hi - &floor).recip().expect("hi above floor");
    let y_hi = if *lo == floor { None } else { Some((lo - &floor).recip().expect("nonzero")) };
    let y = simplest_between(&y_lo, hi_closed, y_hi.as_ref(), lo_closed);
    floor + y.recip().expect("positive")
}

/// The unique `a/b` with `a, b ≤ 2^k` in `(lo, hi]`, for an interval of
/// width at most `2^-2k`.
///
/// The simplest fraction of the interval minimizes numerator and denominator
/// at once, so it is bounded whenever any fraction in the interval is.
pub fn unique_rational_in(lo: &Rational, hi: &Rational, k: BitPrecision) -> Result<Rational> {
    if lo.is_negative() || lo >= hi {
        return Err(Error::Precondition(format!("({lo}, {hi}] is not a nonempty nonnegative interval")));
    }
    let width_bound = k.unit().pow(2);
    if hi - lo > width_bound {
        return Err(Error::Precondition(format!("({lo}, {hi}] is wider than {width_bound}")));
    }
    let q = simplest_between(lo, false, Some(hi), true);
    let bound = k.scale();
    if q.numer() <= &bound && q.denom() <= &bound {
        Ok(q)
    } else {
        Err(Error::NotFound(format!("no fraction with terms at most {bound} in ({lo}, {hi}]")))
    }
}

/// One bisection step: the successor lies in `(lo, hi]` and
/// `V(hi) > V(lo)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchState {
    pub lo: Rational,
    pub hi: Rational,
    /// Queries spent by the call when this state was reached.
    pub queries: u64,
}

/// Result of one [`succ_search`] call.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchOutcome {
    pub successor: Option<Rational>,
    pub queries: u64,
    pub trace: Vec<SearchState>,
}

/// Bisection successor with a persistent, memoizing oracle.
#[derive(Clone, Debug)]
pub struct SearchSuccessor<'a> {
    oracle: VOracle<'a>,
    k: BitPrecision,
    max_call_queries: u64,
    last: Option<SearchOutcome>,
}

impl<'a> SearchSuccessor<'a> {
    pub fn new(inst: &'a Instance) -> Result<Self> {
        Self::with_limit(inst, DEFAULT_BRUTE_FORCE_LIMIT)
    }

    pub fn with_limit(inst: &'a Instance, limit: usize) -> Result<Self> {
        let k = declared_precision(inst)?;
        Ok(SearchSuccessor { oracle: VOracle::with_limit(inst, limit)?, k, max_call_queries: 0, last: None })
    }

    /// Largest number of queries any single successor call has used.
    pub fn max_call_queries(&self) -> u64 {
        self.max_call_queries
    }

    pub fn last_outcome(&self) -> Option<&SearchOutcome> {
        self.last.as_ref()
    }

    /// Runs the bisection from `alpha`, recording the trace.
    pub fn search(&mut self, alpha: &Rational) -> Result<SearchOutcome> {
        let start = self.oracle.queries();
        let spent = |o: &VOracle| o.queries() - start;
        let base = self.oracle.value(alpha)?;
        let one = Rational::one();
        let mut trace = Vec::new();
        let successor = if self.oracle.value(&one)? == base {
            None
        } else {
            let (mut lo, mut hi) = (alpha.clone(), one);
            let width = self.k.unit().pow(2);
            loop {
                trace.push(SearchState { lo: lo.clone(), hi: hi.clone(), queries: spent(&self.oracle) });
                if &hi - &lo <= width {
                    break;
                }
                let mid = lo.midpoint(&hi);
                if self.oracle.value(&mid)? > base {
                    hi = mid;
                } else {
                    lo = mid;
                }
                if self.oracle.value(&hi)? <= self.oracle.value(&lo)? {
                    return Err(Error::Invariant(format!("V does not increase across ({lo}, {hi}]")));
                }
            }
            Some(unique_rational_in(&lo, &hi, self.k)?)
        };
        let outcome = SearchOutcome { successor, queries: spent(&self.oracle), trace };
        self.max_call_queries = self.max_call_queries.max(outcome.queries);
        self.last = Some(outcome.clone());
        Ok(outcome)
    }
}

impl Successor for SearchSuccessor<'_> {
    fn instance(&self) -> &Instance {
        self.oracle.instance()
    }

    fn successor(&mut self, alpha: &Rational) -> Result<Option<Rational>> {
        Ok(self.search(alpha)?.successor)
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

/// `succ(α)` by bisection on a fresh oracle.
///
/// The count includes the query for `V(α)` itself unless `α = 0`.
pub fn succ_search(inst: &Instance, alpha: &Rational) -> Result<SearchOutcome> {
    SearchSuccessor::new(inst)?.search(alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contract::{brute_force_critical_set, solve, SuccessorMethod};
    use crate::functions::SuccessFunction;
    use proptest::prelude::*;

    fn r(s: &str) -> Rational {
        s.parse().unwrap()
    }

    fn rs(items: &[&str]) -> Vec<Rational> {
        items.iter().map(|s| r(s)).collect()
    }

    fn k(bits: u32) -> BitPrecision {
        BitPrecision::new(bits).unwrap()
    }

    fn single(f: &str, c: &str, bits: u32) -> Instance {
        Instance::new(SuccessFunction::Additive { values: rs(&[f]) }, rs(&[c])).unwrap().with_precision(k(bits))
    }

    fn dyadic_example() -> Instance {
        let values = ["0", "19/64", "19/64", "1/2", "19/32", "19/32", "19/32", "19/32"];
        Instance::new(SuccessFunction::Table { values: rs(&values) }, rs(&["3/32", "3/32", "9/32"]))
            .unwrap()
            .with_precision(k(6))
    }

    /// Every `a/b` with `a, b ≤ 2^k` inside `(lo, hi]`.
    fn enumerate(lo: &Rational, hi: &Rational, bits: u32) -> Vec<Rational> {
        let bound = 1i64 << bits;
        let mut out: Vec<Rational> = (1..=bound)
            .flat_map(|b| (0..=bound).map(move |a| Rational::frac(a, b)))
            .filter(|q| q > lo && q <= hi)
            .collect();
        out.sort();
        out.dedup();
        out
    }

    #[test]
    fn grid_examples() {
        let grid = GridSpec::new(r("1/2"), k(4)).unwrap();
        assert_eq!(grid.size(), 4);
        assert_eq!(grid.points(), rs(&["1/2", "3/4", "7/8", "15/16"]));
        assert_eq!(GridSpec::new(r("1/4"), k(4)).unwrap().size(), 10);
        assert!(GridSpec::new(r("0"), k(4)).is_err());
        assert!(GridSpec::new(r("1"), k(4)).is_err());
    }

    #[test]
    fn fptas_single_action() {
        let inst = single("1/2", "1/16", 4);
        let sol = fptas(&inst, &r("1/2")).unwrap();
        assert_eq!((sol.alpha, sol.utility, sol.queries), (r("1/2"), r("1/4"), 4));
        let opt = solve(&inst, SuccessorMethod::Gs, 12).unwrap();
        assert_eq!((opt.alpha, opt.utility), (r("1/8"), r("7/16")));
    }

    #[test]
    fn fptas_hits_grid_optimum() {
        let sol = fptas(&single("1/2", "1/4", 2), &r("1/2")).unwrap();
        assert_eq!((sol.alpha, sol.utility), (r("1/2"), r("1/4")));
    }

    #[test]
    fn fptas_requires_precision() {
        let inst = single("1/2", "1/16", 4).without_precision();
        assert!(matches!(fptas(&inst, &r("1/2")), Err(Error::Precondition(_))));
    }

    #[test]
    fn unique_rational_examples() {
        assert_eq!(unique_rational_in(&r("49/100"), &r("51/100"), k(2)).unwrap(), r("1/2"));
        assert_eq!(unique_rational_in(&r("3/10"), &r("17/50"), k(2)).unwrap(), r("1/3"));
        assert!(matches!(unique_rational_in(&r("0"), &r("1"), k(1)), Err(Error::Precondition(_))));
        assert!(matches!(unique_rational_in(&r("11/40"), &r("23/80"), k(2)), Err(Error::NotFound(_))));
    }

    #[test]
    fn unique_rational_right_end_included() {
        assert_eq!(unique_rational_in(&r("63/128"), &r("1/2"), k(3)).unwrap(), r("1/2"));
        assert!(matches!(unique_rational_in(&r("1"), &r("65/64"), k(3)), Err(Error::NotFound(_))));
    }

    #[test]
    fn unique_rational_matches_enumeration_exhaustively() {
        for bits in 1..=4u32 {
            let width = Rational::dyadic(1, 2 * bits);
            for b in 1..=(1i64 << bits) {
                for a in 0..=(1i64 << bits) {
                    let q = Rational::frac(a, b);
                    for shift in [Rational::zero(), width.clone() / Rational::integer(3), width.clone()] {
                        let lo = &q - &shift;
                        if lo.is_negative() {
                            continue;
                        }
                        let hi = &lo + &width;
                        let expected = enumerate(&lo, &hi, bits);
                        assert!(expected.len() <= 1);
                        match unique_rational_in(&lo, &hi, k(bits)) {
                            Ok(found) => assert_eq!(vec![found], expected),
                            Err(Error::NotFound(_)) => assert!(expected.is_empty()),
                            Err(e) => panic!("{e}"),
                        }
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn unique_rational_matches_enumeration(bits in 1u32..=8, a in 0i64..=256, b in 1i64..=256, num in 0i64..1000) {
            let width = Rational::dyadic(1, 2 * bits);
            let lo = Rational::frac(a, b) - &width * Rational::frac(num, 1000);
            prop_assume!(!lo.is_negative());
            let hi = &lo + &width;
            let expected = enumerate(&lo, &hi, bits);
            match unique_rational_in(&lo, &hi, k(bits)) {
                Ok(found) => prop_assert_eq!(vec![found], expected),
                Err(Error::NotFound(_)) => prop_assert!(expected.is_empty()),
                Err(e) => prop_assert!(false, "{}", e),
            }
        }
    }

    #[test]
    fn succ_search_single_action() {
        let out = succ_search(&single("1/2", "1/4", 2), &r("0")).unwrap();
        assert_eq!(out.successor, Some(r("1/2")));
        assert!(out.queries <= 5);
        assert!(out.trace.last().unwrap().hi.clone() - out.trace.last().unwrap().lo.clone() <= r("1/16"));
    }

    #[test]
    fn succ_search_at_one_is_null() {
        let out = succ_search(&single("1/2", "1/4", 2), &r("1")).unwrap();
        assert_eq!((out.successor, out.queries), (None, 1));
    }

    #[test]
    fn succ_search_dyadic_example_matches_brute_force() {
        let inst = dyadic_example();
        assert!(inst.is_k_valid());
        let profile = brute_force_critical_set(&inst).unwrap();
        let mut succ = SearchSuccessor::new(&inst).unwrap();
        let mut alpha = r("0");
        loop {
            let expected = profile.successor(&alpha);
            let got = succ.search(&alpha).unwrap();
            assert_eq!(got.successor, expected);
            assert!(got.queries <= 13);
            match expected {
                Some(next) => alpha = next,
                None => break,
            }
        }
        assert_eq!(profile.alphas(), rs(&["6/19", "6/13", "1"]));
    }

    #[test]
    fn succ_search_requires_valid_precision() {
        let inst = single("1/2", "1/4", 2).without_precision();
        assert!(matches!(succ_search(&inst, &r("0")), Err(Error::Precondition(_))));
        let coarse = single("1/2", "1/8", 2);
        assert!(matches!(succ_search(&coarse, &r("0")), Err(Error::Precondition(_))));
    }

    #[test]
    fn search_solution_matches_gs() {
        let inst = Instance::new(SuccessFunction::Additive { values: rs(&["1/2", "3/8"]) }, rs(&["1/8", "1/4"]))
            .unwrap()
            .with_precision(k(3));
        let a = solve(&inst, SuccessorMethod::Search, 12).unwrap();
        let b = solve(&inst, SuccessorMethod::Gs, 12).unwrap();
        assert_eq!((a.alpha, a.utility), (b.alpha, b.utility));
    }
}
