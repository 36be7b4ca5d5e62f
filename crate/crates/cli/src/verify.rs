//! Exhaustive cross-checks of the fast solvers on one instance.

use std::fmt;

use combicon::approx::{fptas_with_limit, SearchSuccessor};
use combicon::contract::{
    critical_profile, critical_set_by_intersections, solve, CriticalProfile, GsSuccessor, Successor, SuccessorMethod,
    INTERSECTION_LIMIT,
};
use combicon::demand::{greedy_demand, SubsetTable};
use combicon::numeric::in_bounded_set;
use combicon::{Instance, Rational, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    NotApplicable,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "pass",
            Status::Fail => "FAIL",
            Status::NotApplicable => "n/a",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Check {
    pub name: &'static str,
    pub status: Status,
    pub detail: String,
}

impl Check {
    fn judged(name: &'static str, failures: Vec<String>, ok: String) -> Self {
        match failures.first() {
            None => Check { name, status: Status::Pass, detail: ok },
            Some(first) => Check {
                name,
                status: Status::Fail,
                detail: format!("{} failure(s); first: {first}", failures.len()),
            },
        }
    }

    fn skipped(name: &'static str, why: &str) -> Self {
        Check { name, status: Status::NotApplicable, detail: format!("not applicable ({why})") }
    }
}

/// Epsilons for the approximation check.
const FPTAS_EPSILONS: [(i64, i64); 3] = [(1, 2), (1, 4), (1, 8)];

/// Runs every applicable check. Fails with a resource error when `n`
/// exceeds `limit`.
pub fn verify(inst: &Instance, limit: usize) -> Result<Vec<Check>> {
    let table = SubsetTable::build(inst, limit)?;
    let one = Rational::one();
    let profile = critical_profile(&table, Some(&one));
    let probes = probes(&profile);
    let not_gs = "not gs_certified";
    let k_reason = match inst.precision() {
        None => Some("no declared k"),
        Some(_) if !inst.is_k_valid() => Some("not k-valid"),
        Some(_) => None,
    };

    let mut checks = Vec::new();
    checks.push(if inst.gs_certified() {
        greedy_vs_brute(inst, &table, &probes)?
    } else {
        Check::skipped("greedy-demand", not_gs)
    });
    checks.push(if inst.gs_certified() {
        succ_walk("succ-gs", &profile, &mut GsSuccessor::new(inst)?, None)?
    } else {
        Check::skipped("succ-gs", not_gs)
    });
    checks.push(match k_reason {
        None => {
            let bound = 2 * inst.precision().expect("k-valid").bits() as u64 + 1;
            succ_walk("succ-search", &profile, &mut SearchSuccessor::with_limit(inst, limit)?, Some(bound))?
        }
        Some(why) => Check::skipped("succ-search", why),
    });
    checks.push(critical_count(&table, &profile)?);
    checks.push(if inst.gs_certified() {
        let n = inst.n();
        let bound = n * (n + 1) / 2;
        let ok = profile.len() <= bound;
        Check {
            name: "gs-bound",
            status: if ok { Status::Pass } else { Status::Fail },
            detail: format!("{} {} {bound}", profile.len(), if ok { "≤" } else { ">" }),
        }
    } else {
        Check::skipped("gs-bound", not_gs)
    });
    checks.push(match k_reason {
        None => bounded_values(inst, &profile)?,
        Some(why) => Check::skipped("bounded-critical-values", why),
    });
    checks.push(match k_reason {
        None => fptas_guarantee(inst, &profile, limit)?,
        Some(why) => Check::skipped("fptas", why),
    });
    checks.push(backend_agreement(inst, limit, k_reason.is_none())?);
    Ok(checks)
}

/// Zero, one, every critical value and the midpoints between them.
fn probes(profile: &CriticalProfile) -> Vec<Rational> {
    let mut out = vec![Rational::zero()];
    let mut prev = Rational::zero();
    for a in profile.alphas() {
        out.push(prev.midpoint(&a));
        out.push(a.clone());
        prev = a;
    }
    out.push(prev.midpoint(&Rational::one()));
    out.push(Rational::one());
    out
}

fn greedy_vs_brute(inst: &Instance, table: &SubsetTable, probes: &[Rational]) -> Result<Check> {
    let mut failures = Vec::new();
    for alpha in probes {
        let greedy = greedy_demand(inst, alpha)?.set;
        if !table.demand(alpha).best.contains(&greedy) {
            failures.push(format!("greedy {greedy} ∉ D*({alpha})"));
        }
    }
    Ok(Check::judged("greedy-demand", failures, format!("{} contracts", probes.len())))
}

fn succ_walk(name: &'static str, profile: &CriticalProfile, succ: &mut dyn Successor, bound: Option<u64>) -> Result<Check> {
    let mut failures = Vec::new();
    let mut alpha = Rational::zero();
    let (mut calls, mut worst) = (0, 0);
    loop {
        succ.value(&alpha)?;
        let before = succ.queries();
        let got = succ.successor(&alpha)?;
        let spent = succ.queries() - before;
        calls += 1;
        worst = worst.max(spent);
        let want = profile.successor(&alpha);
        if got != want {
            failures.push(format!("succ({alpha}) = {got:?}, envelope gives {want:?}"));
            break;
        }
        if let Some(b) = bound.filter(|&b| spent > b) {
            failures.push(format!("succ({alpha}) used {spent} queries, bound {b}"));
        }
        match got {
            Some(next) => alpha = next,
            None => break,
        }
    }
    let detail = match bound {
        Some(b) => format!("{calls} calls, max {worst} queries per call (bound {b})"),
        None => format!("{calls} calls"),
    };
    Ok(Check::judged(name, failures, detail))
}

fn critical_count(table: &SubsetTable, profile: &CriticalProfile) -> Result<Check> {
    let count = profile.len();
    if table.n() > INTERSECTION_LIMIT {
        return Ok(Check { name: "critical-count", status: Status::Pass, detail: format!("{count}") });
    }
    let pairwise = critical_set_by_intersections(table, &Rational::one())?;
    let failures = if pairwise == *profile {
        Vec::new()
    } else {
        vec![format!("envelope gives {count}, pairwise intersections give {}", pairwise.len())]
    };
    Ok(Check::judged("critical-count", failures, format!("{count}")))
}

fn bounded_values(inst: &Instance, profile: &CriticalProfile) -> Result<Check> {
    let k = inst.precision().expect("k-valid");
    let mut failures = Vec::new();
    for a in profile.alphas() {
        if !in_bounded_set(&a, k)? {
            failures.push(format!("{a} has a term above 2^{}", k.bits()));
        }
    }
    Ok(Check::judged("bounded-critical-values", failures, format!("{} values", profile.len())))
}

fn fptas_guarantee(inst: &Instance, profile: &CriticalProfile, limit: usize) -> Result<Check> {
    let (_, opt) = profile.best();
    let mut failures = Vec::new();
    for (num, den) in FPTAS_EPSILONS {
        let eps = Rational::frac(num, den);
        let sol = fptas_with_limit(inst, &eps, limit)?;
        let bound = (Rational::one() - &eps) * &opt;
        if sol.utility < bound {
            failures.push(format!("ε = {eps}: {} < {bound}", sol.utility));
        }
    }
    Ok(Check::judged("fptas", failures, format!("{} epsilons, optimum {opt}", FPTAS_EPSILONS.len())))
}

fn backend_agreement(inst: &Instance, limit: usize, k_valid: bool) -> Result<Check> {
    let brute = solve(inst, SuccessorMethod::Brute, limit)?;
    let mut methods = Vec::new();
    if inst.gs_certified() {
        methods.push(SuccessorMethod::Gs);
    }
    if k_valid {
        methods.push(SuccessorMethod::Search);
    }
    if methods.is_empty() {
        return Ok(Check::skipped("backend-agreement", "brute force is the only backend"));
    }
    let mut failures = Vec::new();
    for method in &methods {
        let sol = solve(inst, *method, limit)?;
        if (&sol.alpha, &sol.utility) != (&brute.alpha, &brute.utility) {
            failures.push(format!("{method} gives α = {}, u = {}", sol.alpha, sol.utility));
        }
    }
    let names: Vec<&str> = methods.iter().map(|m| m.name()).collect();
    Ok(Check::judged("backend-agreement", failures, format!("brute vs {}", names.join(", "))))
}

/// Number of failed checks.
pub fn failures(checks: &[Check]) -> usize {
    checks.iter().filter(|c| c.status == Status::Fail).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use combicon::functions::example_instance;
    use combicon::generators::{gen_exponential_coverage, sample_instance};
    use combicon::{BitPrecision, Error, FunctionClass};

    fn status(checks: &[Check], name: &str) -> Status {
        checks.iter().find(|c| c.name == name).unwrap().status
    }

    #[test]
    fn gs_instances_pass_everything() {
        for class in [FunctionClass::Additive, FunctionClass::UnitDemand, FunctionClass::MatroidRank] {
            let inst = sample_instance(class, 5, BitPrecision::new(6).unwrap(), 3).unwrap();
            let checks = verify(&inst, 12).unwrap();
            assert!(checks.iter().all(|c| c.status == Status::Pass), "{checks:?}");
        }
    }

    #[test]
    fn tower_reports_seven_and_skips_gs_bound() {
        let checks = verify(&gen_exponential_coverage(3).unwrap(), 12).unwrap();
        let count = checks.iter().find(|c| c.name == "critical-count").unwrap();
        assert_eq!((count.status, count.detail.as_str()), (Status::Pass, "7"));
        let gs = checks.iter().find(|c| c.name == "gs-bound").unwrap();
        assert_eq!(gs.detail, "not applicable (not gs_certified)");
        assert_eq!(failures(&checks), 0);
    }

    #[test]
    fn example_skips_fast_paths() {
        let checks = verify(&example_instance(), 12).unwrap();
        assert_eq!(status(&checks, "succ-gs"), Status::NotApplicable);
        assert_eq!(status(&checks, "succ-search"), Status::NotApplicable);
        assert_eq!(status(&checks, "critical-count"), Status::Pass);
    }

    #[test]
    fn limit_is_a_resource_error() {
        let inst = sample_instance(FunctionClass::Additive, 6, BitPrecision::new(6).unwrap(), 1).unwrap();
        assert!(matches!(verify(&inst, 5), Err(Error::Resource(_))));
    }
}
