use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qflow::config::Tolerances;
use qflow::demands::parse_demand_document;
use qflow::pipeline::{
    exit_code, extract, flow_from_solution_document, paths_document, render_document, run_pipeline,
    simulate, simulation_document, solve, solve_document, verify, verify_document, Header, Problem,
    VerifyOptions,
};
use qflow::sim::{Scheduling, SimulationConfig};
use qflow::topology::load_topology_str;
use qflow::zoo::{graph_from_gml, ZooOptions};
use qflow::Error;

/// Rate maximization for entanglement distribution over repeater networks.
#[derive(Parser)]
#[command(name = "qflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the edge LP and write solution.json.
    Solve(Common),
    /// Extract paths from an earlier solution and write paths.json.
    Extract {
        #[command(flatten)]
        common: Common,
        /// Solution document to read (default: <out>/solution.json).
        #[arg(long)]
        solution: Option<PathBuf>,
    },
    /// Check every invariant, including the path-LP oracle, and write verify.json.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        solution: Option<PathBuf>,
        /// Also simulate the extracted paths.
        #[arg(long)]
        simulate: bool,
        #[command(flatten)]
        sim: SimArgs,
        /// Skip the oracle beyond this many candidate paths.
        #[arg(long, default_value_t = 100_000)]
        oracle_cap: usize,
    },
    /// Simulate the prepare-and-swap protocol on the extracted paths.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        solution: Option<PathBuf>,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Write the edge LP as model.lp and the layered graph as layered.json.
    ExportLp(Common),
    /// Solve, extract, simulate and verify in one go.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
    },
    /// Convert a Topology Zoo GML file to a topology document.
    ConvertZoo(ZooArgs),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    topology: PathBuf,
    #[arg(long)]
    demands: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Extraction threshold below which a residual edge counts as empty.
    #[arg(long, default_value_t = Tolerances::default().eps)]
    eps: f64,
    #[arg(long, default_value_t = Tolerances::default().tol_feas)]
    tol_feas: f64,
    #[arg(long, default_value_t = Tolerances::default().tol_obj)]
    tol_obj: f64,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct SimArgs {
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, value_enum, default_value_t = Schedule::Sequential)]
    schedule: Schedule,
}

#[derive(Clone, Copy, ValueEnum)]
enum Schedule {
    Sequential,
    RoundRobin,
}

#[derive(Args)]
struct ZooArgs {
    /// GML input file.
    input: PathBuf,
    /// Output topology document.
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = ZooOptions::default().fidelity)]
    fidelity: f64,
    #[arg(long, default_value_t = ZooOptions::default().swap_success)]
    swap_success: f64,
    #[arg(long, default_value_t = ZooOptions::default().capacity_range.0)]
    capacity_min: f64,
    #[arg(long, default_value_t = ZooOptions::default().capacity_range.1)]
    capacity_max: f64,
    /// Seed for capacities the file does not specify.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl Common {
    fn tolerances(&self) -> Tolerances {
        Tolerances {
            tol_feas: self.tol_feas,
            tol_obj: self.tol_obj,
            eps: self.eps,
        }
    }

    fn header(&self) -> Header {
        Header::new(self.seed, self.tolerances())
    }

    fn problem(&self) -> Result<Problem, Error> {
        let graph = load_topology_str(&read(&self.topology)?)?;
        let demands = parse_demand_document(&read(&self.demands)?)?;
        Problem::new(graph, demands)
    }

    fn write(&self, name: &str, text: &str) -> Result<(), Error> {
        fs::create_dir_all(&self.out)?;
        fs::write(self.out.join(name), text)?;
        Ok(())
    }

    fn solution_path(&self, explicit: &Option<PathBuf>) -> PathBuf {
        explicit
            .clone()
            .unwrap_or_else(|| self.out.join("solution.json"))
    }
}

impl SimArgs {
    fn config(&self, problem: &Problem, seed: u64) -> SimulationConfig {
        SimulationConfig {
            trials: self.trials,
            seed,
            q: problem.q(),
            werner: problem.graph.werner().value(),
            scheduling: match self.schedule {
                Schedule::Sequential => Scheduling::Sequential,
                Schedule::RoundRobin => Scheduling::RoundRobin,
            },
        }
    }
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path)
        .map_err(|e| Error::Document(format!("cannot read {}: {e}", path.display())))
}

fn load_paths(
    common: &Common,
    solution: &Option<PathBuf>,
) -> Result<(Problem, qflow::FlowSolution, qflow::PathAssignment), Error> {
    let problem = common.problem()?;
    let flow = flow_from_solution_document(&problem, &read(&common.solution_path(solution))?)?;
    let pa = extract(&problem, &flow, &common.tolerances())?;
    Ok((problem, flow, pa))
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Solve(c) => {
            let problem = c.problem()?;
            let solved = solve(&problem)?;
            c.write(
                "solution.json",
                &solve_document(&problem, &solved, &c.header()),
            )?;
            for i in problem.demands.infeasible() {
                let d = &problem.demands.demands()[i];
                eprintln!(
                    "demand {i} ({} -> {}) cannot be met at this elementary fidelity",
                    problem.graph.node_id(d.source),
                    problem.graph.node_id(d.destination)
                );
            }
            println!(
                "total rate: {}",
                qflow::pipeline::format_sig(solved.flow.objective_value)
            );
        }
        Command::Extract { common, solution } => {
            let (problem, flow, pa) = load_paths(&common, &solution)?;
            let doc = paths_document(&problem, &pa, flow.objective_value, &common.header());
            common.write("paths.json", &doc)?;
            println!(
                "{} paths, total rate {}",
                pa.paths().count(),
                qflow::pipeline::format_sig(pa.total_rate)
            );
        }
        Command::Verify {
            common,
            solution,
            simulate,
            sim,
            oracle_cap,
        } => {
            let (problem, flow, pa) = load_paths(&common, &solution)?;
            let lp = problem.edge_lp().lp;
            let opts = VerifyOptions {
                oracle_cap,
                simulation: simulate.then(|| sim.config(&problem, common.seed)),
                ..Default::default()
            };
            let tol = common.tolerances();
            let report = verify(
                &problem,
                &flow,
                &pa,
                (lp.num_vars(), lp.num_constraints()),
                &tol,
                &opts,
            );
            common.write("verify.json", &verify_document(&report, &common.header()))?;
            for c in &report.checks {
                println!("{:<20} {:?}: {}", c.name, c.status, c.detail);
            }
            return Ok(match (report.failures(), report.skipped()) {
                (0, _) => 0,
                (_, 0) => 4,
                _ => 5,
            });
        }
        Command::Simulate {
            common,
            solution,
            sim,
        } => {
            let (problem, _, pa) = load_paths(&common, &solution)?;
            let report = simulate(&problem, &pa, &sim.config(&problem, common.seed))?;
            common.write(
                "simulation.json",
                &simulation_document(&report, &common.header()),
            )?;
            common.write("simulation.csv", &report.to_csv())?;
            print!("{}", report.to_csv());
        }
        Command::ExportLp(c) => {
            let problem = c.problem()?;
            let model = problem.edge_lp();
            c.write("model.lp", &qflow::lp::export_lp_text(&model.lp))?;
            let layered = serde_json::to_value(problem.layered.debug_document())?;
            c.write("layered.json", &render_document(&c.header(), layered))?;
            println!(
                "{} variables, {} constraints",
                model.lp.num_vars(),
                model.lp.num_constraints()
            );
        }
        Command::Run { common, trials } => {
            let problem = common.problem()?;
            let out = run_pipeline(&problem, common.seed, trials, &common.tolerances())?;
            for (name, text) in &out.files {
                common.write(name, text)?;
            }
            let failed = out.report.failures();
            println!("{} checks, {failed} failed", out.report.checks.len());
            if failed > 0 {
                return Ok(if out.report.skipped() > 0 { 5 } else { 4 });
            }
        }
        Command::ConvertZoo(z) => {
            let opts = ZooOptions {
                fidelity: z.fidelity,
                swap_success: z.swap_success,
                capacity_range: (z.capacity_min, z.capacity_max),
                seed: z.seed,
            };
            let g = graph_from_gml(&read(&z.input)?, &opts)?;
            if let Some(dir) = z.output.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(&z.output, g.to_json())?;
            println!(
                "{} nodes, {} directed edges",
                g.node_count(),
                g.edge_count()
            );
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("QFLOW_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
    {
        // only fails if a pool already exists, which cannot happen this early
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
