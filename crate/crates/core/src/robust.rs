//! Multi-outcome instances, contract linearization and the two-point
//! adversarial evaluation.
//!
//! An action set induces a distribution over finitely many reward levels;
//! the principal only needs its mean `R(S)` to price linear contracts. A
//! general contract pays `t(x)` when reward `x` is observed.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::contract::{solve, ContractSolution, SuccessorMethod};
use crate::error::{Error, Result};
use crate::functions::{ActionSet, Instance, SuccessFunction, DEFAULT_BRUTE_FORCE_LIMIT, MAX_ACTIONS};
use crate::numeric::Rational;

/// How rewards depend on the chosen actions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RewardModel {
    /// `distributions[j][S]` is the probability of outcome `j` under `S`.
    Distributions(Vec<Vec<Rational>>),
    /// Only the expected reward `R(S)` is known.
    Expected(SuccessFunction),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneralInstance {
    costs: Vec<Rational>,
    rewards: Vec<Rational>,
    model: RewardModel,
}

impl GeneralInstance {
    pub fn new(costs: Vec<Rational>, rewards: Vec<Rational>, model: RewardModel) -> Result<Self> {
        let n = costs.len();
        if n > MAX_ACTIONS {
            return Err(Error::Resource(format!("{n} actions exceed the limit of {MAX_ACTIONS}")));
        }
        if let Some((a, c)) = costs.iter().enumerate().find(|(_, c)| !c.is_positive()) {
            return Err(Error::Domain(format!("cost {c} of action {} is not positive", a + 1)));
        }
        if rewards.is_empty() || rewards.iter().any(Rational::is_negative) {
            return Err(Error::Domain("rewards must be a nonempty list of non-negative values".into()));
        }
        match &model {
            RewardModel::Distributions(dists) => {
                if dists.len() != rewards.len() {
                    return Err(Error::Domain(format!(
                        "{} distributions for {} outcomes",
                        dists.len(),
                        rewards.len()
                    )));
                }
                if dists.iter().any(|d| d.len() != 1 << n) {
                    return Err(Error::Domain(format!("every distribution table needs {} entries", 1 << n)));
                }
                for s in ActionSet::all(n) {
                    let column = dists.iter().map(|d| &d[s.bits() as usize]);
                    if column.clone().any(Rational::is_negative) {
                        return Err(Error::Domain(format!("negative probability under {s}")));
                    }
                    if column.sum::<Rational>() != Rational::one() {
                        return Err(Error::Domain(format!("probabilities under {s} do not sum to 1")));
                    }
                }
            }
            RewardModel::Expected(f) => {
                if f.num_actions() != n {
                    return Err(Error::Domain(format!(
                        "reward function has {} actions but {n} costs were given",
                        f.num_actions()
                    )));
                }
            }
        }
        let inst = GeneralInstance { costs, rewards, model };
        let reward = inst.reward_function()?;
        let check = Instance::new(reward, inst.costs.clone())?.with_scale(inst.full_reward());
        check.validate().into_result()?;
        Ok(inst)
    }

    /// Two outcomes with rewards 0 and 1, succeeding with probability `f(S)`.
    pub fn from_binary(inst: &Instance) -> Result<Self> {
        let success: Vec<Rational> = ActionSet::all(inst.n()).map(|s| inst.value(s)).collect::<Result<_>>()?;
        let failure = success.iter().map(|p| Rational::one() - p).collect();
        GeneralInstance::new(
            inst.costs().to_vec(),
            vec![Rational::zero(), Rational::one()],
            RewardModel::Distributions(vec![failure, success]),
        )
    }

    pub fn n(&self) -> usize {
        self.costs.len()
    }

    pub fn m(&self) -> usize {
        self.rewards.len()
    }

    pub fn costs(&self) -> &[Rational] {
        &self.costs
    }

    pub fn rewards(&self) -> &[Rational] {
        &self.rewards
    }

    pub fn model(&self) -> &RewardModel {
        &self.model
    }

    pub fn cost(&self, set: ActionSet) -> Rational {
        set.iter().map(|a| &self.costs[a]).sum()
    }

    /// `R(S)`.
    pub fn expected_reward(&self, set: ActionSet) -> Result<Rational> {
        match &self.model {
            RewardModel::Distributions(dists) => {
                if !set.is_subset(ActionSet::full(self.n())) {
                    return Err(Error::Domain(format!("{set} is not a subset of the {} actions", self.n())));
                }
                Ok(dists.iter().zip(&self.rewards).map(|(d, r)| &d[set.bits() as usize] * r).sum())
            }
            RewardModel::Expected(f) => f.value(set),
        }
    }

    /// `R(A)`.
    pub fn full_reward(&self) -> Rational {
        self.expected_reward(ActionSet::full(self.n())).expect("full set is in range")
    }

    /// `R` as a set function.
    pub fn reward_function(&self) -> Result<SuccessFunction> {
        match &self.model {
            RewardModel::Expected(f) => Ok(f.clone()),
            RewardModel::Distributions(_) => Ok(SuccessFunction::Table {
                values: ActionSet::all(self.n()).map(|s| self.expected_reward(s)).collect::<Result<_>>()?,
            }),
        }
    }

    /// Reward levels a contract may condition on: 0, `R(A)` and every
    /// outcome reward.
    pub fn observable_levels(&self) -> BTreeSet<Rational> {
        let mut levels: BTreeSet<Rational> = self.rewards.iter().cloned().collect();
        levels.insert(Rational::zero());
        levels.insert(self.full_reward());
        levels
    }

    fn positive_full_reward(&self) -> Result<Rational> {
        let ra = self.full_reward();
        if ra.is_positive() {
            Ok(ra)
        } else {
            Err(Error::Degenerate("R(A) = 0".into()))
        }
    }
}

/// Payment rule on observed rewards.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GeneralContract {
    /// `t(x) = α·x`.
    Linear(Rational),
    /// Payment per observable reward level.
    Table(BTreeMap<Rational, Rational>),
}

impl GeneralContract {
    /// Checks the payments against the instance's observable levels.
    pub fn validate(&self, inst: &GeneralInstance) -> Result<()> {
        match self {
            GeneralContract::Linear(alpha) if alpha.is_negative() => {
                Err(Error::Domain(format!("slope {alpha} is negative")))
            }
            GeneralContract::Linear(_) => Ok(()),
            GeneralContract::Table(payments) => {
                let levels = inst.observable_levels();
                if let Some(level) = payments.keys().find(|l| !levels.contains(l)) {
                    return Err(Error::Domain(format!("reward level {level} is not observable")));
                }
                if let Some((level, t)) = payments.iter().find(|(_, t)| t.is_negative()) {
                    return Err(Error::Domain(format!("payment {t} at level {level} is negative")));
                }
                Ok(())
            }
        }
    }

    /// `t(level)`.
    pub fn payment(&self, level: &Rational) -> Result<Rational> {
        match self {
            GeneralContract::Linear(alpha) => Ok(alpha * level),
            GeneralContract::Table(payments) => payments
                .get(level)
                .cloned()
                .ok_or_else(|| Error::Domain(format!("no payment given for reward level {level}"))),
        }
    }
}

/// Best response under agent and principal utility functions; agent ties go
/// to the principal, remaining ties to the smallest bitmask.
fn best_response<F>(n: usize, mut utilities: F) -> Result<(ActionSet, Rational)>
where
    F: FnMut(ActionSet) -> Result<(Rational, Rational)>,
{
    let mut best: Option<(ActionSet, Rational, Rational)> = None;
    for s in ActionSet::all(n) {
        let (agent, principal) = utilities(s)?;
        let better = match &best {
            None => true,
            Some((_, a, p)) => agent > *a || (agent == *a && principal > *p),
        };
        if better {
            best = Some((s, agent, principal));
        }
    }
    let (s, _, p) = best.expect("the empty set is always available");
    Ok((s, p))
}

fn check_enumerable(n: usize) -> Result<()> {
    if n > DEFAULT_BRUTE_FORCE_LIMIT {
        return Err(Error::Resource(format!(
            "{n} actions exceed the brute-force limit of {DEFAULT_BRUTE_FORCE_LIMIT}"
        )));
    }
    Ok(())
}

/// Linear contract that weakly dominates the binary contract paying `t0` on
/// failure and `t1` on success.
///
/// Keeps the expected payment at the agent's original best response `S`:
/// `α = ((1 - f(S))·t0 + f(S)·t1) / f(S)`, clamped to `[0, 1]`.
pub fn reduce_binary_contract(t0: &Rational, t1: &Rational, inst: &Instance) -> Result<Rational> {
    if t0.is_negative() || t1.is_negative() {
        return Err(Error::Domain("payments must be non-negative".into()));
    }
    if t0.is_zero() {
        return Ok(t1.clone().clamp_unit());
    }
    check_enumerable(inst.n())?;
    let (s, _) = best_response(inst.n(), |s| {
        let p = inst.value(s)?;
        let pay = (Rational::one() - &p) * t0 + &p * t1;
        Ok((&pay - inst.cost(s), p - pay))
    })?;
    let p = inst.value(s)?;
    if p.is_zero() {
        return Ok(Rational::zero());
    }
    let pay = (Rational::one() - &p) * t0 + &p * t1;
    Ok((pay / p).clamp_unit())
}

/// The slope `(ℓ₁ - ℓ₀)/R(A)` from the payments `ℓ₀ = t(0)` and
/// `ℓ₁ = t(R(A))`, or 0 when `ℓ₀ > ℓ₁`.
pub fn linearize(t: &GeneralContract, inst: &GeneralInstance) -> Result<Rational> {
    t.validate(inst)?;
    let ra = inst.positive_full_reward()?;
    let l0 = t.payment(&Rational::zero())?;
    let l1 = t.payment(&ra)?;
    if l1 >= l0 {
        Ok((l1 - l0) / ra)
    } else {
        Ok(Rational::zero())
    }
}

/// Principal's utility when every set `S` yields `R(A)` with probability
/// `R(S)/R(A)` and 0 otherwise, together with the agent's choice.
pub fn twopoint_response(t: &GeneralContract, inst: &GeneralInstance) -> Result<(ActionSet, Rational)> {
    t.validate(inst)?;
    check_enumerable(inst.n())?;
    let ra = inst.positive_full_reward()?;
    let l0 = t.payment(&Rational::zero())?;
    let l1 = t.payment(&ra)?;
    best_response(inst.n(), |s| {
        let r = inst.expected_reward(s)?;
        if r > ra || r.is_negative() {
            return Err(Error::Invariant(format!("R({s}) = {r} is outside [0, R(A)]")));
        }
        let p = r / &ra;
        let q = Rational::one() - &p;
        let agent = &p * &l1 + &q * &l0 - inst.cost(s);
        let principal = &p * (&ra - &l1) - &q * &l0;
        Ok((agent, principal))
    })
}

/// Principal's utility against the two-point family.
pub fn worst_case_utility_twopoint(t: &GeneralContract, inst: &GeneralInstance) -> Result<Rational> {
    Ok(twopoint_response(t, inst)?.1)
}

/// A reward distribution family consistent with `R`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    /// Support `{0, R(A)}`.
    TwoPoint,
    /// Support `{0, R(S), R(A)}` with weights
    /// `(1/2 - R(S)/2R(A), 1/2, R(S)/2R(A))`.
    ThreePoint,
    /// The instance's own distributions.
    Actual,
}

fn family_distribution(inst: &GeneralInstance, family: Family, s: ActionSet) -> Result<Vec<(Rational, Rational)>> {
    let ra = inst.positive_full_reward()?;
    let r = inst.expected_reward(s)?;
    let half = Rational::frac(1, 2);
    Ok(match family {
        Family::TwoPoint => {
            let p = r / ra.clone();
            vec![(Rational::zero(), Rational::one() - &p), (ra, p)]
        }
        Family::ThreePoint => {
            let p = &r / &ra * &half;
            vec![(Rational::zero(), &half - &p), (r, half), (ra, p)]
        }
        Family::Actual => match inst.model() {
            RewardModel::Distributions(dists) => inst
                .rewards()
                .iter()
                .zip(dists)
                .map(|(x, d)| (x.clone(), d[s.bits() as usize].clone()))
                .collect(),
            RewardModel::Expected(_) => {
                return Err(Error::Precondition("instance has no explicit distributions".into()))
            }
        },
    })
}

/// Principal's utility for the linear contract `α` when rewards follow
/// `family`.
pub fn linear_utility_under(alpha: &Rational, inst: &GeneralInstance, family: Family) -> Result<Rational> {
    if alpha.is_negative() {
        return Err(Error::Domain(format!("slope {alpha} is negative")));
    }
    check_enumerable(inst.n())?;
    let (_, u) = best_response(inst.n(), |s| {
        let mean: Rational = family_distribution(inst, family, s)?.iter().map(|(x, p)| x * p).sum();
        let pay = alpha * &mean;
        Ok((&pay - inst.cost(s), mean - pay))
    })?;
    Ok(u)
}

/// Optimal linear contract: the binary engine on `(R/R(A), c/R(A))`, mapped
/// back by scaling utility and value by `R(A)`.
pub fn optimal_linear_general(inst: &GeneralInstance) -> Result<ContractSolution> {
    optimal_linear_general_with(inst, None, DEFAULT_BRUTE_FORCE_LIMIT)
}

pub fn optimal_linear_general_with(
    inst: &GeneralInstance,
    method: Option<SuccessorMethod>,
    limit: usize,
) -> Result<ContractSolution> {
    let binary = normalized_binary(inst)?;
    let ra = inst.full_reward();
    let method = method.unwrap_or_else(|| SuccessorMethod::default_for(&binary));
    let mut sol = solve(&binary, method, limit)?;
    sol.utility = sol.utility * &ra;
    sol.value = sol.value * &ra;
    if let Some(profile) = sol.profile.as_mut() {
        for p in &mut profile.points {
            p.value = &p.value * &ra;
        }
    }
    Ok(sol)
}

/// The binary instance `(R/R(A), c/R(A))`.
pub fn normalized_binary(inst: &GeneralInstance) -> Result<Instance> {
    let ra = inst.positive_full_reward()?;
    let factor = ra.recip()?;
    let costs = inst.costs().iter().map(|c| c * &factor).collect();
    Instance::new(inst.reward_function()?.scaled(&factor), costs)
}

/// A random instance with explicit distributions over `m` outcomes.
///
/// Reward 0 is always an outcome. `S` reaches the positive outcomes with a
/// monotone probability `g(S)`, splitting between a low and a high reward
/// mixture with a monotone weight `h(S)`, so `R = g·(h·E_hi + (1-h)·E_lo)`
/// is monotone.
pub fn sample_general_instance(n: usize, m: usize, seed: u64) -> Result<GeneralInstance> {
    if n == 0 || n > DEFAULT_BRUTE_FORCE_LIMIT || m < 2 {
        return Err(Error::Precondition(format!("cannot sample n = {n}, m = {m}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = |v: i64| Rational::frac(v, 64);
    let mut rewards: Vec<Rational> = vec![Rational::zero()];
    rewards.extend((1..m).map(|_| unit(rng.gen_range(1..=64))));
    let monotone = |rng: &mut ChaCha8Rng, least: i64| {
        let mut values = vec![0i64; 1 << n];
        for mask in 1..values.len() {
            let floor = ActionSet::from_bits(mask as u32).iter().map(|a| values[mask & !(1 << a)]).max().unwrap_or(0);
            values[mask] = (floor + rng.gen_range(least..=64 / n as i64)).min(64);
        }
        values
    };
    // Strictly increasing success keeps R(A) > 0.
    let g = monotone(&mut rng, 1);
    let h = monotone(&mut rng, 0);
    // Low and high mixtures over the positive outcomes, ordered by mean.
    let mut mixtures: Vec<Vec<Rational>> = (0..2)
        .map(|_| {
            let weights: Vec<i64> = (1..m).map(|_| rng.gen_range(1..=8)).collect();
            let total: i64 = weights.iter().sum();
            weights.into_iter().map(|w| Rational::frac(w, total)).collect()
        })
        .collect();
    let mean = |mix: &Vec<Rational>| mix.iter().zip(&rewards[1..]).map(|(p, r)| p * r).sum::<Rational>();
    mixtures.sort_by_key(mean);
    let (lo, hi) = (&mixtures[0], &mixtures[1]);
    let mut dists = vec![Vec::with_capacity(1 << n); m];
    for mask in 0..(1usize << n) {
        let gs = unit(g[mask]);
        let hs = unit(h[mask]);
        dists[0].push(Rational::one() - &gs);
        for j in 1..m {
            let mixed = &hs * &hi[j - 1] + (Rational::one() - &hs) * &lo[j - 1];
            dists[j].push(&gs * mixed);
        }
    }
    let costs = (0..n).map(|_| unit(rng.gen_range(1..=16))).collect();
    GeneralInstance::new(costs, rewards, RewardModel::Distributions(dists))
}

/// A random contract paying a non-negative amount at every observable level.
pub fn sample_general_contract(inst: &GeneralInstance, seed: u64) -> GeneralContract {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let top = inst.rewards().iter().max().cloned().unwrap_or_else(Rational::one).max(Rational::one());
    let payments = inst
        .observable_levels()
        .into_iter()
        .map(|level| (level, &top * Rational::frac(rng.gen_range(0..=64), 64)))
        .collect();
    GeneralContract::Table(payments)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::example_instance;

    fn r(s: &str) -> Rational {
        s.parse().unwrap()
    }

    fn rs(items: &[&str]) -> Vec<Rational> {
        items.iter().map(|s| r(s)).collect()
    }

    fn table(pairs: &[(&str, &str)]) -> GeneralContract {
        GeneralContract::Table(pairs.iter().map(|(l, t)| (r(l), r(t))).collect())
    }

    fn single(f: &str, c: &str) -> Instance {
        Instance::new(SuccessFunction::Additive { values: rs(&[f]) }, rs(&[c])).unwrap()
    }

    #[test]
    fn reduce_binary_examples() {
        let inst = single("1/2", "1/16");
        assert_eq!(reduce_binary_contract(&r("0"), &r("2/5"), &inst).unwrap(), r("2/5"));
        assert_eq!(reduce_binary_contract(&r("1/10"), &r("1/2"), &inst).unwrap(), r("3/5"));
        assert_eq!(reduce_binary_contract(&r("0"), &r("0"), &inst).unwrap(), r("0"));
        assert!(reduce_binary_contract(&r("-1"), &r("0"), &inst).is_err());
    }

    #[test]
    fn reduce_binary_nothing_chosen() {
        let inst = single("1/2", "3/4");
        assert_eq!(reduce_binary_contract(&r("1/10"), &r("1/5"), &inst).unwrap(), r("0"));
    }

    #[test]
    fn linearize_examples() {
        let inst = GeneralInstance::from_binary(&single("1", "1/16")).unwrap();
        assert_eq!(linearize(&table(&[("0", "1/10"), ("1", "1/2")]), &inst).unwrap(), r("2/5"));
        assert_eq!(linearize(&table(&[("0", "0"), ("1", "0")]), &inst).unwrap(), r("0"));
        assert_eq!(linearize(&table(&[("0", "1/2"), ("1", "1/10")]), &inst).unwrap(), r("0"));
        assert!(linearize(&table(&[("0", "0"), ("1/3", "0"), ("1", "0")]), &inst).is_err());
        assert!(linearize(&table(&[("0", "0")]), &inst).is_err());
    }

    #[test]
    fn linearize_degenerate() {
        let zero = GeneralInstance::new(
            rs(&["1/4"]),
            rs(&["0", "1"]),
            RewardModel::Expected(SuccessFunction::Additive { values: rs(&["0"]) }),
        )
        .unwrap();
        assert!(matches!(linearize(&GeneralContract::Linear(r("1/2")), &zero), Err(Error::Degenerate(_))));
        assert!(matches!(optimal_linear_general(&zero), Err(Error::Degenerate(_))));
    }

    #[test]
    fn twopoint_linear_matches_binary_utility() {
        let ex = example_instance();
        let general = GeneralInstance::from_binary(&ex).unwrap();
        for alpha in rs(&["0", "1/3", "2/5", "1/2", "3/4", "1"]) {
            let binary = crate::demand::brute_force_demand(&ex, &alpha).unwrap();
            let expected = (Rational::one() - &alpha) * binary.value;
            let t = GeneralContract::Linear(alpha.clone());
            assert_eq!(worst_case_utility_twopoint(&t, &general).unwrap(), expected, "α = {alpha}");
        }
        assert_eq!(worst_case_utility_twopoint(&table(&[("0", "0"), ("3/5", "0"), ("1", "0")]), &general).unwrap(), r("0"));
    }

    #[test]
    fn twopoint_linearization_dominates() {
        for seed in 0..20 {
            let inst = sample_general_instance(3, 3, seed).unwrap();
            for c in 0..5 {
                let t = sample_general_contract(&inst, 100 * seed + c);
                let alpha = linearize(&t, &inst).unwrap();
                let linear = worst_case_utility_twopoint(&GeneralContract::Linear(alpha), &inst).unwrap();
                assert!(linear >= worst_case_utility_twopoint(&t, &inst).unwrap());
            }
        }
    }

    #[test]
    fn linear_utility_family_independent() {
        for seed in 0..10 {
            let inst = sample_general_instance(3, 4, seed).unwrap();
            for alpha in rs(&["0", "1/8", "1/3", "1/2", "9/10"]) {
                let two = linear_utility_under(&alpha, &inst, Family::TwoPoint).unwrap();
                assert_eq!(two, linear_utility_under(&alpha, &inst, Family::ThreePoint).unwrap());
                assert_eq!(two, linear_utility_under(&alpha, &inst, Family::Actual).unwrap());
                let t = GeneralContract::Linear(alpha.clone());
                assert_eq!(two, worst_case_utility_twopoint(&t, &inst).unwrap());
            }
        }
    }

    #[test]
    fn optimal_linear_on_embeddings() {
        let sol = optimal_linear_general(&GeneralInstance::from_binary(&example_instance()).unwrap()).unwrap();
        assert_eq!((sol.alpha, sol.utility), (r("1/2"), r("1/4")));
        let additive = GeneralInstance::new(
            rs(&["1/5", "2/5"]),
            rs(&["0", "2"]),
            RewardModel::Expected(SuccessFunction::Additive { values: rs(&["1", "4/5"]) }),
        )
        .unwrap();
        let sol = optimal_linear_general(&additive).unwrap();
        assert_eq!((sol.alpha, sol.utility), (r("1/2"), r("9/10")));
    }

    #[test]
    fn general_instance_validation() {
        let bad_sum = GeneralInstance::new(
            rs(&["1/4"]),
            rs(&["0", "1"]),
            RewardModel::Distributions(vec![rs(&["1", "1/2"]), rs(&["0", "1/4"])]),
        );
        assert!(bad_sum.is_err());
        let non_monotone = GeneralInstance::new(
            rs(&["1/4"]),
            rs(&["0", "1"]),
            RewardModel::Distributions(vec![rs(&["1/2", "1"]), rs(&["1/2", "0"])]),
        );
        assert!(non_monotone.is_err());
        assert!(GeneralInstance::new(rs(&["0"]), rs(&["0", "1"]), RewardModel::Expected(
            SuccessFunction::Additive { values: rs(&["1/2"]) }
        ))
        .is_err());
    }

    #[test]
    fn sampled_contracts_are_valid() {
        let inst = sample_general_instance(4, 3, 5).unwrap();
        assert_eq!(inst, sample_general_instance(4, 3, 5).unwrap());
        let t = sample_general_contract(&inst, 1);
        assert!(t.validate(&inst).is_ok());
        assert!(GeneralContract::Linear(r("-1")).validate(&inst).is_err());
    }
}
