//! Instance generators: the subset-sum reduction, the coverage tower with an
//! exponential critical set, cost perturbations and seeded random sampling.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::contract::critical_profile;
use crate::demand::SubsetTable;
use crate::error::{Error, Result};
use crate::functions::{ActionSet, FunctionClass, Instance, Matroid, SuccessFunction};
use crate::numeric::{BitPrecision, Rational};

/// A subset-sum question: is there `S` with `Σ_{i∈S} x_i = Z`?
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubsetSumSpec {
    pub values: Vec<u64>,
    pub target: u64,
}

impl SubsetSumSpec {
    pub fn new(values: Vec<u64>, target: u64) -> Result<Self> {
        let spec = SubsetSumSpec { values, target };
        spec.check()?;
        Ok(spec)
    }

    fn check(&self) -> Result<()> {
        if self.values.is_empty() || self.values.len() > crate::functions::MAX_ACTIONS {
            return Err(Error::Precondition(format!("{} values is out of range", self.values.len())));
        }
        if let Some(x) = self.values.iter().find(|&&x| x == 0 || x >= self.target) {
            return Err(Error::Precondition(format!("value {x} is not in [1, {})", self.target)));
        }
        if self.values.iter().sum::<u64>() < self.target {
            return Err(Error::Precondition(format!("values do not reach the target {}", self.target)));
        }
        Ok(())
    }

    /// A random spec with `n` values and a target in `[3, max_target]`.
    pub fn sample(n: usize, max_target: u64, seed: u64) -> Result<Self> {
        if n < 2 || max_target < 3 {
            return Err(Error::Precondition("need n ≥ 2 and a target of at least 3".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        loop {
            let target = rng.gen_range(3..=max_target);
            let values: Vec<u64> = (0..n).map(|_| rng.gen_range(1..target)).collect();
            if values.iter().sum::<u64>() > target {
                return Ok(SubsetSumSpec { values, target });
            }
        }
    }
}

/// The reduction's instance together with its unnormalized description.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubsetSumInstance {
    /// `f(S) = min(Z, Σx)/Z`, `c(i) = x_i/Z³`.
    pub instance: Instance,
    pub spec: SubsetSumSpec,
    /// `ε = 1/Z²`, the cost per unit of `x` before scaling by `1/Z`.
    pub epsilon: Rational,
    /// The factor `Z` removed from both `f` and `c`.
    pub scale: Rational,
}

impl SubsetSumInstance {
    /// The optimal contract when the spec is a YES instance.
    pub fn yes_contract(&self) -> Rational {
        self.epsilon.clone()
    }
}

/// Budget-additive instance whose optimal contract is `ε` exactly when the
/// subset-sum spec has a solution.
///
/// The unnormalized construction is `f(S) = min(Z, Σx)` with `c(i) = ε·x_i`;
/// dividing both by `Z` leaves every critical value unchanged.
pub fn gen_subset_sum(spec: &SubsetSumSpec) -> Result<SubsetSumInstance> {
    spec.check()?;
    let z = Rational::integer(spec.target);
    let epsilon = (&z * &z).recip()?;
    let values = spec.values.iter().map(|&x| Rational::integer(x) / &z).collect();
    let costs = spec.values.iter().map(|&x| Rational::integer(x) * &epsilon / &z).collect();
    let instance = Instance::new(SuccessFunction::BudgetAdditive { values, budget: Rational::one() }, costs)?;
    Ok(SubsetSumInstance { instance, spec: spec.clone(), epsilon, scale: z })
}

/// Weights of a coverage function keyed by the bitmask of actions that
/// cover the element: `f(S) = Σ_{T ∩ S ≠ ∅} w_T`.
pub type GroupWeights = BTreeMap<u32, Rational>;

/// Coverage instance over `n` actions from group weights.
pub fn coverage_from_weights(weights: &GroupWeights, n: usize) -> SuccessFunction {
    let groups: Vec<(&u32, &Rational)> = weights.iter().filter(|(_, w)| w.is_positive()).collect();
    let covers = (0..n)
        .map(|a| groups.iter().enumerate().filter(|(_, (t, _))| *t & (1 << a) != 0).map(|(j, _)| j).collect())
        .collect();
    SuccessFunction::Coverage { weights: groups.into_iter().map(|(_, w)| w.clone()).collect(), covers }
}

/// Lifts `f` on `n` actions to `g` on `n + 1` actions, where
/// `g(S) = β₁·f(S)` for `S ⊆ A` and `g(S) = β₂·f(A) + f(S ∖ {n+1})` otherwise.
pub fn coverage_lift_weights(weights: &GroupWeights, n: usize, beta1: &Rational, beta2: &Rational) -> Result<GroupWeights> {
    if *beta1 < Rational::one() || beta2 < beta1 {
        return Err(Error::Precondition(format!("need β₂ ≥ β₁ ≥ 1, got β₁ = {beta1}, β₂ = {beta2}")));
    }
    if weights.keys().any(|&t| t == 0 || t >> n != 0) {
        return Err(Error::Precondition(format!("group weights must use nonempty subsets of {n} actions")));
    }
    let total: Rational = weights.values().sum();
    let new = 1u32 << n;
    let mut out = weights.clone();
    let excess = beta1 - Rational::one();
    for (&t, w) in weights {
        out.insert(t | new, &excess * w);
    }
    out.insert(new, (beta2 - beta1 + Rational::one()) * total);
    Ok(out)
}

/// One level of the coverage tower.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TowerLevel {
    /// Unnormalized instance; its `scale` is `f(A)`.
    pub instance: Instance,
    pub weights: GroupWeights,
    /// `(β₁, β₂)` used to build this level from the previous one.
    pub betas: Option<(Rational, Rational)>,
    /// Critical values in `(0, 1]`.
    pub critical: Vec<Rational>,
}

/// The recursive coverage construction with `2^n - 1` critical values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoverageTower {
    pub levels: Vec<TowerLevel>,
}

/// Largest tower height; magnitudes grow doubly exponentially beyond.
pub const MAX_TOWER: usize = 5;

impl CoverageTower {
    pub fn build(n: usize) -> Result<Self> {
        if !(1..=MAX_TOWER).contains(&n) {
            return Err(Error::Precondition(format!("tower height {n} is outside [1, {MAX_TOWER}]")));
        }
        let mut weights = GroupWeights::new();
        weights.insert(1, Rational::integer(2));
        let mut costs = vec![Rational::one()];
        let mut levels = vec![Self::level(weights.clone(), costs.clone(), None)?];
        for size in 1..n {
            let prev = levels.last().expect("base level");
            let (lo, hi) = match (prev.critical.first(), prev.critical.last()) {
                (Some(lo), Some(hi)) => (lo.clone(), hi.clone()),
                _ => return Err(Error::Invariant("tower level has no critical values".into())),
            };
            let beta1 = Rational::integer(10) * &hi / &lo;
            let beta2 = Rational::integer(10) * &beta1;
            costs.push(Rational::integer(20) * &hi * prev.instance.scale());
            weights = coverage_lift_weights(&weights, size, &beta1, &beta2)?;
            levels.push(Self::level(weights.clone(), costs.clone(), Some((beta1, beta2)))?);
        }
        Ok(CoverageTower { levels })
    }

    fn level(weights: GroupWeights, costs: Vec<Rational>, betas: Option<(Rational, Rational)>) -> Result<TowerLevel> {
        let total: Rational = weights.values().sum();
        let f = coverage_from_weights(&weights, costs.len());
        let instance = Instance::new(f, costs)?.with_scale(total);
        let table = SubsetTable::build(&instance, MAX_TOWER)?;
        let critical = critical_profile(&table, Some(&Rational::one())).alphas();
        Ok(TowerLevel { instance, weights, betas, critical })
    }

    pub fn top(&self) -> &TowerLevel {
        self.levels.last().expect("at least one level")
    }
}

/// Unnormalized coverage instance on `n` actions with `2^n - 1` critical
/// values.
pub fn gen_exponential_coverage(n: usize) -> Result<Instance> {
    Ok(CoverageTower::build(n)?.top().instance.clone())
}

/// Divides `f` and `c` jointly by `f(A)`, which leaves every critical value
/// unchanged.
pub fn normalize(inst: &Instance) -> Result<Instance> {
    let total = inst.value(inst.full_set())?;
    if !total.is_positive() {
        return Err(Error::Degenerate("f(A) = 0 cannot be normalized".into()));
    }
    if total == Rational::one() && *inst.scale() == Rational::one() {
        return Ok(inst.clone());
    }
    let factor = total.recip()?;
    let costs = inst.costs().iter().map(|c| c * &factor).collect();
    Instance::new(inst.function().scaled(&factor), costs)
}

/// Default number of bits in a perturbation draw.
pub const PERTURBATION_BITS: u32 = 16;

/// Adds `ε·u/2^16` to every cost, `u` uniform in `[0, 2^16]`.
pub fn perturb_costs(inst: &Instance, epsilon: &Rational, seed: u64) -> Result<Instance> {
    perturb_costs_with_resolution(inst, epsilon, seed, PERTURBATION_BITS)
}

pub fn perturb_costs_with_resolution(inst: &Instance, epsilon: &Rational, seed: u64, bits: u32) -> Result<Instance> {
    if epsilon.is_negative() {
        return Err(Error::Domain(format!("perturbation size {epsilon} is negative")));
    }
    if epsilon.is_zero() {
        return Ok(inst.clone());
    }
    if bits > 62 {
        return Err(Error::Domain(format!("resolution of {bits} bits is too fine")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let steps = 1i64 << bits;
    let unit = epsilon / Rational::integer(steps);
    let costs = inst.costs().iter().map(|c| c + &unit * Rational::integer(rng.gen_range(0..=steps))).collect();
    let out = inst.with_costs(costs)?;
    Ok(if out.is_k_valid() { out } else { out.without_precision() })
}

/// A seeded random `k`-valid instance of the requested class.
pub fn sample_instance(class: FunctionClass, n: usize, k: BitPrecision, seed: u64) -> Result<Instance> {
    if n == 0 || n > crate::functions::MAX_ACTIONS {
        return Err(Error::Precondition(format!("{n} actions is out of range")));
    }
    if k.bits() > 30 || (1u64 << k.bits()) < 2 * n as u64 {
        return Err(Error::Precondition(format!("{k} bits cannot hold {n} random values")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let full = 1i64 << k.bits();
    let unit = k.unit();
    let units = |v: i64| Rational::integer(v) * &unit;
    let draw = |rng: &mut ChaCha8Rng, hi: i64| units(rng.gen_range(1..=hi.max(1)));
    let share = full / n as i64;
    let f = match class {
        FunctionClass::Additive => SuccessFunction::Additive { values: (0..n).map(|_| draw(&mut rng, share)).collect() },
        FunctionClass::UnitDemand => SuccessFunction::UnitDemand { values: (0..n).map(|_| draw(&mut rng, full)).collect() },
        FunctionClass::MatroidRank => {
            let matroid = if rng.gen_bool(0.5) {
                Matroid::Uniform { rank: rng.gen_range(1..=n) }
            } else {
                let count = rng.gen_range(1..=n);
                let mut blocks = vec![Vec::new(); count];
                for a in 0..n {
                    blocks[rng.gen_range(0..count)].push(a);
                }
                blocks.retain(|b| !b.is_empty());
                let capacities = blocks.iter().map(|b| rng.gen_range(1..=b.len())).collect();
                Matroid::Partition { blocks, capacities }
            };
            let room = match &matroid {
                Matroid::Uniform { rank } => *rank,
                Matroid::Partition { capacities, .. } => capacities.iter().sum(),
            };
            let weights = (0..n).map(|_| draw(&mut rng, full / room as i64)).collect();
            SuccessFunction::MatroidRank { matroid, weights }
        }
        FunctionClass::BudgetAdditive => SuccessFunction::BudgetAdditive {
            values: (0..n).map(|_| draw(&mut rng, full / 2)).collect(),
            budget: draw(&mut rng, full),
        },
        FunctionClass::Coverage => {
            let elements = n + 2;
            let weights: Vec<Rational> = (0..elements).map(|_| draw(&mut rng, full / elements as i64)).collect();
            let covers = (0..n)
                .map(|_| {
                    let mut cover: Vec<usize> = (0..elements).filter(|_| rng.gen_bool(0.3)).collect();
                    if cover.is_empty() {
                        cover.push(rng.gen_range(0..elements));
                    }
                    cover
                })
                .collect();
            SuccessFunction::Coverage { weights, covers }
        }
        FunctionClass::Table => {
            let mut values = vec![0i64; 1 << n];
            for mask in 1..values.len() {
                let floor = ActionSet::from_bits(mask as u32)
                    .iter()
                    .map(|a| values[mask & !(1 << a)])
                    .max()
                    .unwrap_or(0);
                values[mask] = (floor + rng.gen_range(0..=share)).min(full);
            }
            SuccessFunction::Table { values: values.into_iter().map(units).collect() }
        }
    };
    let costs = (0..n)
        .map(|a| {
            let single = f.value(ActionSet::singleton(a))? * Rational::integer(full);
            let hi = single.floor().try_into().unwrap_or(full);
            Ok(draw(&mut rng, hi + hi / 2))
        })
        .collect::<Result<Vec<_>>>()?;
    let inst = Instance::new(f, costs)?.with_precision(k);
    inst.validate().into_result()?;
    Ok(inst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contract::{brute_force_critical_set, solve, SuccessorMethod};
    use crate::demand::brute_force_demand;
    use crate::functions::example_instance;

    fn r(s: &str) -> Rational {
        s.parse().unwrap()
    }

    fn rs(items: &[&str]) -> Vec<Rational> {
        items.iter().map(|s| r(s)).collect()
    }

    fn critical(inst: &Instance) -> Vec<Rational> {
        brute_force_critical_set(inst).unwrap().alphas()
    }

    #[test]
    fn subset_sum_yes_instance() {
        let spec = SubsetSumSpec::new(vec![3, 5], 8).unwrap();
        let gen = gen_subset_sum(&spec).unwrap();
        assert_eq!(gen.instance.value(ActionSet::singleton(0)).unwrap(), r("3/8"));
        assert_eq!(gen.instance.value(ActionSet::singleton(1)).unwrap(), r("5/8"));
        assert_eq!(gen.instance.costs(), rs(&["3/512", "5/512"]).as_slice());
        assert_eq!(gen.epsilon, r("1/64"));
        let sol = solve(&gen.instance, SuccessorMethod::Brute, 12).unwrap();
        assert_eq!((sol.alpha, sol.utility), (r("1/64"), r("63/64")));
    }

    #[test]
    fn subset_sum_no_instance_has_two_critical_values() {
        // Z2 = 5, Z1 = 8: criticals ε and ε(Z1 - Z2)/(Z - Z2).
        let gen = gen_subset_sum(&SubsetSumSpec::new(vec![3, 5], 7).unwrap()).unwrap();
        let eps = r("1/49");
        assert_eq!(critical(&gen.instance), vec![eps.clone(), &eps * r("3/2")]);
        let sol = solve(&gen.instance, SuccessorMethod::Brute, 12).unwrap();
        assert_eq!(sol.alpha, eps * r("3/2"));
    }

    #[test]
    fn subset_sum_near_miss_still_separates() {
        let gen = gen_subset_sum(&SubsetSumSpec::new(vec![9, 8], 10).unwrap()).unwrap();
        let sol = solve(&gen.instance, SuccessorMethod::Brute, 12).unwrap();
        assert_ne!(sol.alpha, gen.yes_contract());
    }

    #[test]
    fn subset_sum_spec_checks() {
        assert!(SubsetSumSpec::new(vec![3, 8], 8).is_err());
        assert!(SubsetSumSpec::new(vec![3, 4], 8).is_err());
        assert!(SubsetSumSpec::new(vec![3, 5], 8).is_ok());
        assert!(SubsetSumSpec::new(vec![0, 9], 8).is_err());
        let spec = SubsetSumSpec::sample(6, 40, 3).unwrap();
        assert_eq!(spec, SubsetSumSpec::sample(6, 40, 3).unwrap());
        assert!(spec.check().is_ok());
    }

    #[test]
    fn tower_base_and_second_level() {
        let tower = CoverageTower::build(2).unwrap();
        let base = &tower.levels[0].instance;
        assert_eq!(base.value(ActionSet::singleton(0)).unwrap(), r("2"));
        assert_eq!(critical(base), rs(&["1/2"]));
        let top = &tower.top().instance;
        assert_eq!(top.value(ActionSet::singleton(0)).unwrap(), r("20"));
        assert_eq!(top.value(ActionSet::singleton(1)).unwrap(), r("200"));
        assert_eq!(top.value(ActionSet::full(2)).unwrap(), r("202"));
        assert_eq!(top.costs(), rs(&["1", "20"]).as_slice());
        assert_eq!(tower.top().betas, Some((r("10"), r("100"))));
        assert_eq!(critical(top), rs(&["1/20", "19/180", "1/2"]));
    }

    #[test]
    fn tower_critical_counts() {
        for n in 1..=4 {
            let inst = gen_exponential_coverage(n).unwrap();
            assert_eq!(critical(&inst).len(), (1 << n) - 1, "n = {n}");
        }
        assert!(gen_exponential_coverage(0).is_err());
        assert!(gen_exponential_coverage(6).is_err());
    }

    #[test]
    fn tower_extremes_follow_recursion() {
        let tower = CoverageTower::build(4).unwrap();
        for pair in tower.levels.windows(2) {
            let (beta1, _) = pair[1].betas.clone().unwrap();
            assert_eq!(pair[1].critical[0], &pair[0].critical[0] / &beta1);
            assert_eq!(pair[1].critical.last(), pair[0].critical.last());
        }
    }

    #[test]
    fn lift_weights_base() {
        let mut base = GroupWeights::new();
        base.insert(1, r("2"));
        let lifted = coverage_lift_weights(&base, 1, &r("10"), &r("100")).unwrap();
        let expected: GroupWeights = [(1, r("2")), (3, r("18")), (2, r("182"))].into_iter().collect();
        assert_eq!(lifted, expected);
        let degenerate = coverage_lift_weights(&base, 1, &r("1"), &r("1")).unwrap();
        assert_eq!(degenerate, [(1, r("2")), (3, r("0")), (2, r("2"))].into_iter().collect());
        assert!(coverage_lift_weights(&base, 1, &r("1/2"), &r("1")).is_err());
        assert!(coverage_lift_weights(&base, 1, &r("3"), &r("2")).is_err());
    }

    #[test]
    fn lift_reproduces_defining_formula() {
        let tower = CoverageTower::build(3).unwrap();
        for pair in tower.levels.windows(2) {
            let (f, g) = (&pair[0].instance, &pair[1].instance);
            let (beta1, beta2) = pair[1].betas.clone().unwrap();
            let n = f.n();
            assert!(pair[1].weights.values().all(|w| !w.is_negative()));
            let fa = f.value(f.full_set()).unwrap();
            for s in ActionSet::all(n + 1) {
                let expected = if s.contains(n) {
                    &beta2 * &fa + f.value(s.without(n)).unwrap()
                } else {
                    &beta1 * f.value(s).unwrap()
                };
                assert_eq!(g.value(s).unwrap(), expected, "{s}");
            }
        }
    }

    #[test]
    fn normalize_keeps_critical_set() {
        let top = gen_exponential_coverage(2).unwrap();
        let norm = normalize(&top).unwrap();
        assert_eq!(norm.value(ActionSet::singleton(0)).unwrap(), r("20/202"));
        assert_eq!(norm.value(ActionSet::full(2)).unwrap(), r("1"));
        assert_eq!(norm.costs(), rs(&["1/202", "20/202"]).as_slice());
        assert_eq!(critical(&norm), critical(&top));
        let base = normalize(&gen_exponential_coverage(1).unwrap()).unwrap();
        assert_eq!((base.value(base.full_set()).unwrap(), base.costs()[0].clone()), (r("1"), r("1/2")));
    }

    #[test]
    fn normalize_identity() {
        let inst = Instance::new(SuccessFunction::Additive { values: rs(&["1/4", "3/4"]) }, rs(&["1/8", "1/8"]))
            .unwrap()
            .with_precision(BitPrecision::new(3).unwrap());
        assert_eq!(normalize(&inst).unwrap(), inst);
    }

    #[test]
    fn perturbation_basics() {
        let ex = example_instance();
        assert_eq!(perturb_costs(&ex, &r("0"), 1).unwrap(), ex);
        let a = perturb_costs(&ex, &r("1/1000"), 9).unwrap();
        assert_eq!(a, perturb_costs(&ex, &r("1/1000"), 9).unwrap());
        for (c, p) in ex.costs().iter().zip(a.costs()) {
            assert!(p >= c && p - c <= r("1/1000"));
        }
        assert!(perturb_costs(&ex, &r("-1"), 1).is_err());
    }

    #[test]
    fn perturbation_shrinks_demand() {
        let ex = example_instance();
        let p = perturb_costs(&ex, &r("1/100000"), 4).unwrap();
        for alpha in critical(&ex) {
            let orig = brute_force_demand(&ex, &alpha).unwrap().demand;
            let pert = brute_force_demand(&p, &alpha).unwrap().demand;
            assert!(pert.iter().all(|s| orig.contains(s)), "α = {alpha}");
        }
        assert!(critical(&p).len() >= critical(&ex).len());
    }

    #[test]
    fn sampled_instances_are_valid() {
        let k = |b| BitPrecision::new(b).unwrap();
        let additive = sample_instance(FunctionClass::Additive, 3, k(6), 42).unwrap();
        assert!(additive.is_k_valid() && additive.gs_certified());
        let unit = sample_instance(FunctionClass::UnitDemand, 5, k(8), 7).unwrap();
        assert!(unit.is_k_valid() && unit.gs_certified());
        let budget = sample_instance(FunctionClass::BudgetAdditive, 4, k(6), 1).unwrap();
        assert!(budget.is_k_valid() && !budget.gs_certified());
        for class in FunctionClass::ALL {
            for seed in 0..20 {
                let inst = sample_instance(class, 6, k(8), seed).unwrap();
                assert!(inst.is_k_valid(), "{class} seed {seed}");
                assert_eq!(inst, sample_instance(class, 6, k(8), seed).unwrap());
            }
        }
        assert!(sample_instance(FunctionClass::Additive, 10, k(2), 0).is_err());
    }
}
