use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::bail;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::json;

use congestion_tolls::equilibrium::{
    class_path_costs, nash_equilibrium, nash_gap, EquilibriumResult, SolverConfig,
};
use congestion_tolls::game::{FlowProfile, Network, Population};
use congestion_tolls::mechanism::{Mechanism, MechanismSpec};
use congestion_tolls::metrics::{
    optimal_nonperverse_coefficients, pi_instance, poa_closed_form_nonperverse, poa_instance,
    RatioReport,
};
use congestion_tolls::scenarios::scenario_by_id;
use congestion_tolls::Error;

// A closed stdout (e.g. piping into `head`) is not an error worth a panic.
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = write!(std::io::stdout(), $($arg)*);
    }};
}

macro_rules! outln {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

#[derive(Parser)]
#[command(
    name = "ctolls",
    version,
    about = "Nash flows and toll metrics for routing games"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a Nash flow and print path flows, class costs and the gap.
    Solve(SolveArgs),
    /// Price of anarchy and perversity index of one instance.
    Evaluate(EvaluateArgs),
    /// Closed-form price of anarchy of non-perverse tolls over S_L/S_U.
    Sweep(SweepArgs),
    /// Recompute the Nash gap of a flow written by `solve --json`.
    Verify(VerifyArgs),
    /// Write a built-in scenario's network and population as JSON.
    Export(ExportArgs),
}

#[derive(Args)]
struct InstanceArgs {
    /// Built-in scenario id, e.g. example1-hetero or thm1-k0-1.
    #[arg(long, conflicts_with_all = ["network", "population"])]
    scenario: Option<String>,
    #[arg(long, requires = "population")]
    network: Option<PathBuf>,
    #[arg(long, requires = "network")]
    population: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MechanismKind {
    Zero,
    Mc,
    Gmc,
    Fixed,
}

#[derive(Args)]
struct MechanismArgs {
    /// Defaults to the scenario's mechanism, or zero for file input.
    #[arg(long, value_enum)]
    mechanism: Option<MechanismKind>,
    #[arg(long, value_parser = parse_number, allow_hyphen_values = true)]
    kappa1: Option<f64>,
    #[arg(long, value_parser = parse_number, allow_hyphen_values = true)]
    kappa2: Option<f64>,
    /// Per-edge constant tolls for --mechanism fixed, comma separated.
    #[arg(long, value_delimiter = ',', value_parser = parse_number)]
    tolls: Vec<f64>,
    #[arg(long, value_parser = parse_number)]
    kmax: Option<f64>,
}

#[derive(Args)]
struct SolverArgs {
    /// Relative Nash-gap tolerance.
    #[arg(long, default_value_t = 1e-7, value_parser = parse_number)]
    eps: f64,
    #[arg(long, default_value_t = 16)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SolverArgs {
    fn config(&self) -> anyhow::Result<SolverConfig> {
        if !(self.eps > 0.0) {
            bail!(Error::Input(format!(
                "--eps must be positive, got {}",
                self.eps
            )));
        }
        Ok(SolverConfig {
            eps_nash: self.eps,
            restarts: self.restarts,
            seed: self.seed,
            ..SolverConfig::default()
        })
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[command(flatten)]
    mechanism: MechanismArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    json: bool,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[command(flatten)]
    mechanism: MechanismArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Report ratios even when an equilibrium is not certified.
    #[arg(long)]
    force: bool,
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    /// kappa = (kbar - 1/S_U, kbar).
    Gmc,
    /// kappa = (0, 1/S_U).
    Mc,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
    degrees: Vec<u32>,
    /// Uniform S_L/S_U grid on [0, 1] with this many points.
    #[arg(long, default_value_t = 101)]
    points: usize,
    /// Explicit S_L/S_U values; overrides --points.
    #[arg(long, value_delimiter = ',', value_parser = parse_number)]
    ratios: Vec<f64>,
    /// Coefficient cap, in units of 1/S_U.
    #[arg(long, default_value_t = 1.0, value_parser = parse_number)]
    kbar: f64,
    #[arg(long, value_enum, default_value = "gmc")]
    family: Family,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Accepted for symmetry with other commands; sweep output is always CSV.
    #[arg(long)]
    csv: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[command(flatten)]
    mechanism: MechanismArgs,
    /// JSON report written by `solve --json`.
    #[arg(long)]
    flow: PathBuf,
    #[arg(long, default_value_t = 1e-7, value_parser = parse_number)]
    eps: f64,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    scenario: String,
    /// Directory for <id>.network.json and <id>.population.json; the full
    /// scenario goes to stdout when omitted.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn parse_number(text: &str) -> Result<f64, String> {
    let v: f64 = text
        .trim()
        .parse()
        .map_err(|_| format!("'{text}' is not a number"))?;
    if v.is_nan() {
        return Err("NaN is not allowed".into());
    }
    Ok(v)
}

struct Instance {
    id: Option<String>,
    network: Network,
    population: Population,
    default_mechanism: MechanismSpec,
}

fn read(path: &PathBuf) -> anyhow::Result<String> {
    fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())).into())
}

fn load_instance(args: &InstanceArgs) -> anyhow::Result<Instance> {
    if let Some(id) = &args.scenario {
        let s = scenario_by_id(id)?;
        return Ok(Instance {
            id: Some(s.id),
            network: s.network,
            population: s.population,
            default_mechanism: s.mechanism,
        });
    }
    let (Some(net), Some(pop)) = (&args.network, &args.population) else {
        bail!(Error::Input(
            "give --scenario or both --network and --population".into()
        ));
    };
    let network =
        Network::from_json(&read(net)?).map_err(|e| prefix(e, &format!("{}", net.display())))?;
    let population =
        Population::from_json(&read(pop)?).map_err(|e| prefix(e, &format!("{}", pop.display())))?;
    population.check_demand(&network)?;
    Ok(Instance {
        id: None,
        network,
        population,
        default_mechanism: MechanismSpec::zero(),
    })
}

fn prefix(e: Error, file: &str) -> Error {
    match e {
        Error::Input(m) => Error::Input(format!("{file}: {m}")),
        other => other,
    }
}

fn build_mechanism(args: &MechanismArgs, default: &MechanismSpec) -> anyhow::Result<MechanismSpec> {
    let spec = match args.mechanism {
        None => {
            if args.kappa1.is_some() || args.kappa2.is_some() {
                bail!(Error::Input(
                    "--kappa1/--kappa2 need --mechanism gmc".into()
                ));
            }
            default.clone()
        }
        Some(MechanismKind::Zero) => MechanismSpec::zero(),
        Some(MechanismKind::Mc) => MechanismSpec::marginal_cost(),
        Some(MechanismKind::Gmc) => {
            let (Some(k1), Some(k2)) = (args.kappa1, args.kappa2) else {
                bail!(Error::Input(
                    "--mechanism gmc needs --kappa1 and --kappa2".into()
                ));
            };
            MechanismSpec::generalized(k1, k2)?
        }
        Some(MechanismKind::Fixed) => MechanismSpec::fixed(args.tolls.clone())?,
    };
    match args.kmax {
        Some(k) if k != f64::INFINITY => Ok(spec.with_kmax(k)?),
        _ => Ok(spec),
    }
}

fn mechanism_label(m: &MechanismSpec) -> String {
    match &m.mechanism {
        Mechanism::Zero => "zero".into(),
        Mechanism::MarginalCost => "mc".into(),
        Mechanism::Generalized { kappa1, kappa2 } => format!("gmc({kappa1}, {kappa2})"),
        Mechanism::Fixed(q) => format!("fixed{q:?}"),
    }
}

fn emit(text: &str, out: Option<&PathBuf>) -> anyhow::Result<()> {
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| Error::Input(format!("cannot write {}: {e}", path.display())).into()),
        None => {
            out!("{text}");
            Ok(())
        }
    }
}

fn flow_table(network: &Network, costs: &[Vec<f64>], result: &EquilibriumResult) -> String {
    let mut s = String::new();
    for (p, path) in network.paths().iter().enumerate() {
        let edges: Vec<String> = path.iter().map(|e| format!("e{}", e + 1)).collect();
        s.push_str(&format!("  p{} [{}]", p + 1, edges.join(" ")));
        for (c, row) in result.flow.path_flows().iter().enumerate() {
            s.push_str(&format!(
                "  class{c}: flow {:.9} cost {:.9}",
                row[p], costs[c][p]
            ));
        }
        s.push('\n');
    }
    s
}

fn cmd_solve(args: &SolveArgs) -> anyhow::Result<ExitCode> {
    let inst = load_instance(&args.instance)?;
    let mech = build_mechanism(&args.mechanism, &inst.default_mechanism)?;
    let config = args.solver.config()?;
    let result = nash_equilibrium(&inst.network, &mech, &inst.population, &config)?;
    let costs = class_path_costs(&inst.network, &mech, &inst.population, &result.flow)?;
    let text = if args.json {
        let report = json!({
            "scenario": inst.id,
            "mechanism": mech,
            "result": result,
            "class_path_costs": costs,
        });
        format!("{}\n", serde_json::to_string_pretty(&report)?)
    } else {
        let mut s = String::new();
        if let Some(id) = &inst.id {
            s.push_str(&format!("scenario       {id}\n"));
        }
        s.push_str(&format!("mechanism      {}\n", mechanism_label(&mech)));
        s.push_str(&format!("total latency  {:.9}\n", result.total_latency));
        s.push_str(&format!(
            "nash gap       {:.3e} (tolerance {:.3e})\n",
            result.nash_gap, result.tolerance
        ));
        s.push_str(&format!("certified      {}\n", result.certified));
        s.push_str(&flow_table(&inst.network, &costs, &result));
        s
    };
    emit(&text, args.out.as_ref())?;
    Ok(if result.certified {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn cmd_evaluate(args: &EvaluateArgs) -> anyhow::Result<ExitCode> {
    let inst = load_instance(&args.instance)?;
    let mech = build_mechanism(&args.mechanism, &inst.default_mechanism)?;
    let config = args.solver.config()?;
    let tag = |r: RatioReport| match &inst.id {
        Some(id) => r.with_scenario(id.clone()),
        None => r,
    };
    let poa = tag(poa_instance(
        &inst.network,
        &mech,
        &inst.population,
        &config,
        args.force,
    )?);
    let pi = tag(pi_instance(
        &inst.network,
        &mech,
        &inst.population,
        &config,
        args.force,
    )?);
    if args.json {
        let report = json!({ "scenario": inst.id, "mechanism": mech, "poa": poa, "pi": pi });
        outln!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        if let Some(id) = &inst.id {
            outln!("scenario           {id}");
        }
        outln!("mechanism          {}", mechanism_label(&mech));
        outln!("tolled latency     {:.9}", poa.numerator_latency);
        outln!("optimal latency    {:.9}", poa.denominator_latency);
        outln!("untolled latency   {:.9}", pi.denominator_latency);
        outln!("poa                {:.9}", poa.ratio);
        outln!("pi                 {:.9}", pi.ratio);
    }
    Ok(ExitCode::SUCCESS)
}

/// `%.12g`-style formatting.
fn sig12(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let exp = v.abs().log10().floor() as i32;
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let s = format!("{v:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let s = format!("{v:.11e}");
        let (mant, e) = s.split_once('e').expect("scientific format");
        let mant = if mant.contains('.') {
            mant.trim_end_matches('0').trim_end_matches('.')
        } else {
            mant
        };
        format!("{mant}e{e}")
    }
}

fn cmd_sweep(args: &SweepArgs) -> anyhow::Result<ExitCode> {
    let ratios: Vec<f64> = if args.ratios.is_empty() {
        if args.points < 2 {
            bail!(Error::Input("--points must be at least 2".into()));
        }
        (0..args.points)
            .map(|i| i as f64 / (args.points - 1) as f64)
            .collect()
    } else {
        args.ratios.clone()
    };
    if ratios.iter().any(|r| !(0.0..=1.0).contains(r)) {
        bail!(Error::Input("S_L/S_U ratios must lie in [0, 1]".into()));
    }
    if args.degrees.is_empty() {
        bail!(Error::Input("--degrees is empty".into()));
    }
    let grid: Vec<(u32, f64)> = args
        .degrees
        .iter()
        .flat_map(|&d| ratios.iter().map(move |&r| (d, r)))
        .collect();
    let rows = grid
        .par_iter()
        .map(|&(d, ratio)| -> anyhow::Result<String> {
            // S_U = 1, so S_L = ratio and kbar is in units of 1/S_U
            let (k1, k2) = match args.family {
                Family::Gmc => optimal_nonperverse_coefficients(d, 0.0, 1.0, args.kbar)?,
                Family::Mc => (0.0, 1.0),
            };
            let poa = poa_closed_form_nonperverse(d, ratio, 1.0, k1, k2)?;
            Ok(format!(
                "{d},{},{},{},{}\n",
                sig12(ratio),
                sig12(k1),
                sig12(k2),
                sig12(poa)
            ))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let mut csv = String::from("d,sl_over_su,kappa1,kappa2,poa\n");
    rows.iter().for_each(|r| csv.push_str(r));
    emit(&csv, args.out.as_ref())?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(args: &VerifyArgs) -> anyhow::Result<ExitCode> {
    let inst = load_instance(&args.instance)?;
    let report: serde_json::Value = serde_json::from_str(&read(&args.flow)?)
        .map_err(|e| Error::Input(format!("{}: {e}", args.flow.display())))?;
    let default = match report.get("mechanism") {
        Some(m) => serde_json::from_value(m.clone())
            .map_err(|e| Error::Input(format!("mechanism: {e}")))?,
        None => inst.default_mechanism.clone(),
    };
    let mech = build_mechanism(&args.mechanism, &default)?;
    let rows: Vec<Vec<f64>> =
        serde_json::from_value(report["result"]["flow"]["path_flows"].clone())
            .map_err(|e| Error::Input(format!("result.flow.path_flows: {e}")))?;
    let flow = FlowProfile::new(&inst.network, rows)?;
    let gap = nash_gap(&inst.network, &mech, &inst.population, &flow)?;
    let costs = class_path_costs(&inst.network, &mech, &inst.population, &flow)?;
    let min_cost = costs
        .iter()
        .zip(inst.population.classes())
        .filter(|(_, c)| c.mass > 0.0)
        .map(|(row, _)| row.iter().copied().fold(f64::INFINITY, f64::min))
        .fold(f64::INFINITY, f64::min);
    let tolerance = args.eps * (1.0 + min_cost.abs());
    let ok = gap <= tolerance;
    if args.json {
        outln!(
            "{}",
            json!({ "nash_gap": gap, "tolerance": tolerance, "certified": ok })
        );
    } else {
        outln!("nash gap   {gap:.3e}");
        outln!("tolerance  {tolerance:.3e}");
        outln!("certified  {ok}");
    }
    Ok(if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn cmd_export(args: &ExportArgs) -> anyhow::Result<ExitCode> {
    let s = scenario_by_id(&args.scenario)?;
    match &args.out_dir {
        None => outln!("{}", s.to_json()),
        Some(dir) => {
            fs::create_dir_all(dir)
                .map_err(|e| Error::Input(format!("cannot create {}: {e}", dir.display())))?;
            let net = dir.join(format!("{}.network.json", s.id));
            let pop = dir.join(format!("{}.population.json", s.id));
            emit(&s.network.to_json(), Some(&net))?;
            emit(&s.population.to_json(), Some(&pop))?;
            outln!("{}\n{}", net.display(), pop.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Input(_) | Error::Domain(_)) => 1,
        Some(Error::NoConvergence { .. } | Error::Uncertified { .. }) => 2,
        Some(Error::Numerical(_)) => 3,
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Export(a) => cmd_export(a),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
