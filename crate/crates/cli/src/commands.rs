use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use combicon::approx::{fptas_with_limit, GridSpec, SearchSuccessor};
use combicon::contract::{critical_profile, solve, successor_for, ContractSolution, SuccessorMethod};
use combicon::demand::{greedy_demand, SubsetTable};
use combicon::generators::{gen_subset_sum, normalize, perturb_costs, sample_instance, CoverageTower, SubsetSumSpec};
use combicon::robust::{
    linearize, optimal_linear_general_with, sample_general_instance, worst_case_utility_twopoint, GeneralContract,
    GeneralInstance,
};
use combicon::{BitPrecision, FunctionClass, Instance, Rational};

use crate::error::CliError;
use crate::schema::{parse_payments, parse_rational, InstanceFile, Loaded};
use crate::table::{Format, Table};
use crate::verify::{failures, verify};

#[derive(Debug, Parser)]
#[command(name = "combicon", version, about = "Exact optimal linear contracts for combinatorial actions")]
pub struct Cli {
    /// Output layout.
    #[arg(long, value_enum, default_value_t, global = true)]
    pub format: Format,
    /// Add a column rounded to this many decimal places next to each exact
    /// value.
    #[arg(long, global = true, value_name = "DIGITS")]
    pub decimal: Option<usize>,
    /// Write a JSON run report to this path.
    #[arg(long, global = true, value_name = "PATH")]
    pub report: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Gs,
    Search,
    Brute,
}

impl From<Method> for SuccessorMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Gs => SuccessorMethod::Gs,
            Method::Search => SuccessorMethod::Search,
            Method::Brute => SuccessorMethod::Brute,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimal linear contract.
    Solve {
        /// Successor backend; defaults to gs for gross-substitutes classes
        /// and brute otherwise.
        #[arg(long, value_enum)]
        method: Option<Method>,
        file: PathBuf,
    },
    /// Every critical value with its value and best response.
    CriticalSet {
        /// Include critical values above 1.
        #[arg(long)]
        unbounded: bool,
        file: PathBuf,
    },
    /// The agent's demand at one contract.
    Demand {
        #[arg(long)]
        alpha: String,
        file: PathBuf,
    },
    /// Next critical value above a contract.
    Succ {
        #[arg(long, value_enum, default_value = "gs")]
        method: Method,
        #[arg(long)]
        alpha: String,
        file: PathBuf,
    },
    /// Approximately optimal contract on a geometric grid.
    Fptas {
        #[arg(long)]
        epsilon: String,
        file: PathBuf,
    },
    /// Write a generated instance file.
    Gen {
        #[command(subcommand)]
        what: GenCommand,
        /// Destination; standard output when omitted.
        #[arg(long, short, global = true)]
        output: Option<PathBuf>,
    },
    /// Multi-outcome instances.
    Robust {
        #[command(subcommand)]
        what: RobustCommand,
    },
    /// Cross-check every fast path against exhaustive enumeration.
    Verify { file: PathBuf },
}

#[derive(Debug, Subcommand)]
pub enum GenCommand {
    /// Budget-additive instance encoding a subset-sum question.
    SubsetSum {
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<u64>,
        #[arg(long)]
        target: u64,
    },
    /// Coverage instance with 2^n - 1 critical values.
    CoverageTower {
        #[arg(long)]
        n: usize,
        /// Divide values and costs by f(A).
        #[arg(long)]
        normalize: bool,
    },
    /// Seeded random instance with values on the 2^-k grid.
    Random {
        #[arg(long)]
        class: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Seeded random multi-outcome instance.
    General {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Add a seeded random perturbation of size at most epsilon to every
    /// cost.
    Perturb {
        #[arg(long)]
        epsilon: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        file: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum RobustCommand {
    /// Linear contract from a payment rule, with two-point worst cases.
    Linearize {
        /// Comma-separated `level:payment` pairs.
        #[arg(long)]
        payments: String,
        file: PathBuf,
    },
    /// Optimal linear contract on the expected reward.
    SolveLinear {
        #[arg(long, value_enum)]
        method: Option<Method>,
        file: PathBuf,
    },
}

/// What a command produced.
#[derive(Debug, Default)]
pub struct Output {
    pub tables: Vec<Table>,
    /// Verbatim text written instead of tables.
    pub document: Option<String>,
    pub queries: Option<u64>,
    /// Failed verification checks.
    pub failed: usize,
}

impl Output {
    fn tables(tables: Vec<Table>, queries: Option<u64>) -> Self {
        Output { tables, queries, ..Output::default() }
    }
}

/// Files and limits shared by all commands.
pub struct Context {
    pub limit: usize,
    pub inputs: Vec<(PathBuf, String)>,
}

impl Context {
    fn load(&mut self, path: &PathBuf) -> Result<Loaded, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        let loaded = InstanceFile::from_json(&text)?.load();
        self.inputs.push((path.clone(), text));
        loaded
    }

    fn binary(&mut self, path: &PathBuf) -> Result<Instance, CliError> {
        match self.load(path)? {
            Loaded::Binary(inst) => Ok(inst),
            Loaded::General(_) => {
                Err(CliError::Usage(format!("{} is a general instance; use the robust commands", path.display())))
            }
        }
    }

    fn general(&mut self, path: &PathBuf) -> Result<GeneralInstance, CliError> {
        match self.load(path)? {
            Loaded::Binary(inst) => Ok(GeneralInstance::from_binary(&inst)?),
            Loaded::General(inst) => Ok(inst),
        }
    }
}

pub fn execute(command: &Command, ctx: &mut Context) -> Result<Output, CliError> {
    match command {
        Command::Solve { method, file } => {
            let inst = ctx.binary(file)?;
            let method = method.map(Into::into).unwrap_or_else(|| SuccessorMethod::default_for(&inst));
            let sol = solve(&inst, method, ctx.limit)?;
            Ok(Output::tables(vec![solution_table("solve", method, &sol)], Some(sol.queries)))
        }
        Command::CriticalSet { unbounded, file } => {
            let inst = ctx.binary(file)?;
            let table = SubsetTable::build(&inst, ctx.limit)?;
            let one = Rational::one();
            let profile = critical_profile(&table, if *unbounded { None } else { Some(&one) });
            let mut out = Table::new("critical values", &["alpha", "value", "best_response", "principal_utility"]);
            for p in &profile.points {
                out.row(vec![(&p.alpha).into(), (&p.value).into(), p.best_response.to_string().into(), p.principal_utility().into()]);
            }
            Ok(Output::tables(vec![out], None))
        }
        Command::Demand { alpha, file } => {
            let inst = ctx.binary(file)?;
            let alpha = nonnegative(parse_rational(alpha)?, "alpha")?;
            demand(&inst, &alpha, ctx.limit)
        }
        Command::Succ { method, alpha, file } => {
            let inst = ctx.binary(file)?;
            let alpha = nonnegative(parse_rational(alpha)?, "alpha")?;
            let method = SuccessorMethod::from(*method);
            let (successor, queries) = if method == SuccessorMethod::Search {
                let outcome = SearchSuccessor::with_limit(&inst, ctx.limit)?.search(&alpha)?;
                (outcome.successor, outcome.queries)
            } else {
                let mut succ = successor_for(&inst, method, ctx.limit)?;
                let next = succ.successor(&alpha)?;
                (next, succ.queries())
            };
            let mut out = Table::fields("successor");
            out.field("method", method.name()).field("alpha", alpha);
            match successor {
                Some(s) => out.field("successor", s),
                None => out.field("successor", "none"),
            };
            out.field("queries", queries.to_string());
            Ok(Output::tables(vec![out], Some(queries)))
        }
        Command::Fptas { epsilon, file } => {
            let inst = ctx.binary(file)?;
            let eps = parse_rational(epsilon)?;
            let sol = fptas_with_limit(&inst, &eps, ctx.limit)?;
            let k = inst.precision().expect("the approximation requires a declared k");
            let grid = GridSpec::new(eps.clone(), k)?;
            let mut out = Table::fields("fptas");
            out.field("epsilon", eps).field("grid_size", grid.size().to_string());
            push_solution(&mut out, &sol);
            Ok(Output::tables(vec![out], Some(sol.queries)))
        }
        Command::Gen { what, .. } => generate(what, ctx),
        Command::Robust { what } => robust(what, ctx),
        Command::Verify { file } => {
            let inst = ctx.binary(file)?;
            let checks = verify(&inst, ctx.limit)?;
            let mut out = Table::new("verification", &["check", "status", "detail"]);
            for c in &checks {
                out.row(vec![c.name.into(), c.status.to_string().into(), c.detail.clone().into()]);
            }
            Ok(Output { tables: vec![out], failed: failures(&checks), ..Output::default() })
        }
    }
}

fn nonnegative(r: Rational, what: &str) -> Result<Rational, CliError> {
    if r.is_negative() {
        Err(CliError::Usage(format!("{what} = {r} is negative")))
    } else {
        Ok(r)
    }
}

fn push_solution(out: &mut Table, sol: &ContractSolution) {
    out.field("alpha_star", &sol.alpha)
        .field("utility", &sol.utility)
        .field("value", &sol.value)
        .field("incentivized", sol.incentivized.to_string());
    if let Some(profile) = &sol.profile {
        out.field("critical_values", profile.len().to_string());
    }
    out.field("queries", sol.queries.to_string());
}

fn solution_table(title: &str, method: SuccessorMethod, sol: &ContractSolution) -> Table {
    let mut out = Table::fields(title);
    out.field("method", method.name());
    push_solution(&mut out, sol);
    out
}

fn demand(inst: &Instance, alpha: &Rational, limit: usize) -> Result<Output, CliError> {
    let mut fields = Table::fields("demand");
    fields.field("alpha", alpha);
    let greedy = if inst.gs_certified() { Some(greedy_demand(inst, alpha)?) } else { None };
    if let Some(g) = &greedy {
        let order: Vec<String> = g.actions.iter().map(|a| (a + 1).to_string()).collect();
        fields.field("greedy_order", format!("({})", order.join(",")));
    }
    let table = match SubsetTable::build(inst, limit) {
        Ok(t) => Some(t),
        Err(combicon::Error::Resource(_)) if greedy.is_some() => None,
        Err(e) => return Err(e.into()),
    };
    let Some(table) = table else {
        let g = greedy.expect("greedy demand is available");
        let value = inst.value(g.set)?;
        fields
            .field("best_response", g.set.to_string())
            .field("value", &value)
            .field("agent_utility", alpha * &value - inst.cost(g.set));
        return Ok(Output::tables(vec![fields], None));
    };
    let profile = table.demand(alpha);
    let best = combicon::demand::canonical_best_response(&profile);
    fields
        .field("best_response", best.to_string())
        .field("value", &profile.value)
        .field("agent_utility", &profile.agent_utility);
    let mut sets = Table::new("demand set", &["set", "f", "cost", "in_d_star"]);
    for s in &profile.demand {
        let star = if profile.best.contains(s) { "yes" } else { "no" };
        sets.row(vec![s.to_string().into(), table.value(*s).into(), table.cost(*s).into(), star.into()]);
    }
    Ok(Output::tables(vec![fields, sets], None))
}

fn generate(what: &GenCommand, ctx: &mut Context) -> Result<Output, CliError> {
    let mut summary = Table::fields("generated");
    let file = match what {
        GenCommand::SubsetSum { values, target } => {
            let spec = SubsetSumSpec::new(values.clone(), *target)?;
            let generated = gen_subset_sum(&spec)?;
            summary.field("yes_contract", generated.yes_contract());
            InstanceFile::from_instance(&generated.instance)
        }
        GenCommand::CoverageTower { n, normalize: norm } => {
            let tower = CoverageTower::build(*n)?;
            let top = &tower.top().instance;
            summary.field("critical_values", tower.top().critical.len().to_string());
            InstanceFile::from_instance(&if *norm { normalize(top)? } else { top.clone() })
        }
        GenCommand::Random { class, n, k, seed } => {
            let class = FunctionClass::from_name(class).map_err(|e| CliError::Usage(e.to_string()))?;
            InstanceFile::from_instance(&sample_instance(class, *n, BitPrecision::new(*k)?, *seed)?)
        }
        GenCommand::General { n, m, seed } => InstanceFile::from_general(&sample_general_instance(*n, *m, *seed)?),
        GenCommand::Perturb { epsilon, seed, file } => {
            let inst = ctx.binary(file)?;
            let eps = nonnegative(parse_rational(epsilon)?, "epsilon")?;
            InstanceFile::from_instance(&perturb_costs(&inst, &eps, *seed)?)
        }
    };
    summary.field("n", file.n.to_string());
    Ok(Output { tables: vec![summary], document: Some(file.to_json()), ..Output::default() })
}

fn robust(what: &RobustCommand, ctx: &mut Context) -> Result<Output, CliError> {
    match what {
        RobustCommand::Linearize { payments, file } => {
            let inst = ctx.general(file)?;
            let contract = GeneralContract::Table(parse_payments(payments)?);
            let alpha = linearize(&contract, &inst)?;
            let mut out = Table::fields("linearize");
            out.field("full_reward", inst.full_reward())
                .field("alpha", &alpha)
                .field("worst_case_utility", worst_case_utility_twopoint(&contract, &inst)?)
                .field("linear_worst_case_utility", worst_case_utility_twopoint(&GeneralContract::Linear(alpha), &inst)?);
            Ok(Output::tables(vec![out], None))
        }
        RobustCommand::SolveLinear { method, file } => {
            let inst = ctx.general(file)?;
            let sol = optimal_linear_general_with(&inst, method.map(Into::into), ctx.limit)?;
            let mut out = Table::fields("solve-linear");
            out.field("full_reward", inst.full_reward());
            push_solution(&mut out, &sol);
            Ok(Output::tables(vec![out], Some(sol.queries)))
        }
    }
}
