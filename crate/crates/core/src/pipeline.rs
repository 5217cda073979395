//! End-to-end composition: reduce, layer, solve, extract, verify, simulate,
//! plus the JSON documents each stage writes.
//!
//! Every document starts with a header naming the tool version, seed and
//! tolerances. Floating-point values are rounded to 12 significant digits and
//! object keys are sorted, so identical inputs give byte-identical output.

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::Tolerances;
use crate::demands::{reduce_demands, DemandEntry, DemandSet};
use crate::edge_lp::{
    build_edge_lp, check_flow_feasibility, flow_from_rows, flow_from_solution, flow_rows,
    swap_weights, EdgeLp, FlowRow, FlowSolution,
};
use crate::error::{Error, Result};
use crate::extraction::{extract_paths, extract_sub_demand, verify_assignment, PathAssignment};
use crate::fidelity::end_to_end_fidelity;
use crate::layering::{build_layered_graph, decompose_demands, LayeredGraph, SubDemand};
use crate::lp::{solve_lp, LpError, LpSolution};
use crate::oracle::{oracle_solution, OracleError};
use crate::sim::{build_link_schedule, simulate_network, SimulationConfig, SimulationReport};
use crate::topology::NetworkGraph;

pub const TOOL: &str = "qflow";
pub const SIGNIFICANT_DIGITS: usize = 12;

/// Rounds to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .expect("formatted float parses")
}

/// Shortest decimal text of `round_sig(x)`.
pub fn format_sig(x: f64) -> String {
    let r = round_sig(x);
    if r == 0.0 {
        "0".into()
    } else {
        format!("{r}")
    }
}

fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig(n.as_f64().expect("f64 number"));
            *v = serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number);
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Header {
    pub tool: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub tolerances: Tolerances,
}

impl Header {
    pub fn new(seed: u64, tolerances: Tolerances) -> Self {
        Self {
            tool: TOOL,
            version: env!("CARGO_PKG_VERSION"),
            seed,
            tolerances,
        }
    }
}

/// Serializes `body` under `header`, rounding floats, as pretty JSON with a trailing newline.
pub fn render_document(header: &Header, body: Value) -> String {
    let mut doc = json!({ "header": header });
    if let (Value::Object(map), Value::Object(extra)) = (&mut doc, body) {
        map.extend(extra);
    }
    round_floats(&mut doc);
    let mut text = serde_json::to_string_pretty(&doc).expect("json values serialize");
    text.push('\n');
    text
}

/// A reduced instance and its layered expansion.
#[derive(Debug, Clone)]
pub struct Problem {
    pub graph: NetworkGraph,
    pub raw_demands: Vec<DemandEntry>,
    pub demands: DemandSet,
    pub layered: LayeredGraph,
    pub subs: Vec<SubDemand>,
}

impl Problem {
    pub fn new(graph: NetworkGraph, raw_demands: Vec<DemandEntry>) -> Result<Self> {
        let demands = reduce_demands(&raw_demands, &graph)?;
        let layered = build_layered_graph(&graph, &demands);
        let subs = decompose_demands(&demands);
        Ok(Self {
            graph,
            raw_demands,
            demands,
            layered,
            subs,
        })
    }

    pub fn q(&self) -> f64 {
        self.graph.swap_success()
    }

    pub fn edge_lp(&self) -> EdgeLp {
        build_edge_lp(&self.layered, &self.subs, self.q())
    }

    /// Coarse polynomial size bounds `(max variables, max constraints)` in
    /// |V|, |E|, |D|. These assume about |E||V| variables per demand and can
    /// be exceeded when a hop bound is large relative to |V|; see
    /// [`Problem::layered_size_bounds`].
    pub fn size_bounds(&self) -> (usize, usize) {
        let v = self.graph.node_count();
        let e = self.graph.edge_count();
        let d = self.demands.len();
        (d * e * v, v * v * e * d + v * e + v * v * v * d)
    }

    /// Size bounds that always hold: sub-demand `(i, j)` owns at most `j|E|`
    /// variables and `(j-1)|V|` conservation rows, plus one capacity row per
    /// base edge.
    pub fn layered_size_bounds(&self) -> (usize, usize) {
        let v = self.graph.node_count();
        let e = self.graph.edge_count();
        let vars = self.subs.iter().map(|s| s.hops as usize * e).sum();
        let rows = self
            .subs
            .iter()
            .map(|s| (s.hops as usize).saturating_sub(1) * v)
            .sum::<usize>();
        (vars, rows + e)
    }
}

#[derive(Debug, Clone)]
pub struct Solved {
    pub model: EdgeLp,
    pub solution: LpSolution,
    pub flow: FlowSolution,
}

pub fn solve(problem: &Problem) -> Result<Solved> {
    let model = problem.edge_lp();
    let solution = solve_lp(&model.lp)?;
    if !solution.is_optimal() {
        return Err(LpError::NotOptimal(solution.status).into());
    }
    let flow = flow_from_solution(&model, &solution, &problem.layered)?;
    Ok(Solved {
        model,
        solution,
        flow,
    })
}

/// Rate delivered to each demand by a flow: `sum_j q^(j-1) * outflow_j`.
pub fn demand_rates(problem: &Problem, flow: &FlowSolution) -> Vec<f64> {
    let weights = swap_weights(problem.q(), problem.layered.l_max());
    let mut rates = vec![0.0; problem.demands.len()];
    for f in &flow.flows {
        rates[f.sub.demand] +=
            weights[f.sub.hops as usize - 1] * f.source_outflow(&problem.layered);
    }
    rates
}

fn demand_json(problem: &Problem, i: usize) -> Value {
    let g = &problem.graph;
    let d = &problem.demands.demands()[i];
    json!({
        "index": i,
        "source": g.node_id(d.source),
        "destination": g.node_id(d.destination),
        "target_fidelity": d.target_fidelity,
        "length_bound": d.length_bound,
        "feasible": d.is_feasible(),
    })
}

pub fn solve_document(problem: &Problem, solved: &Solved, header: &Header) -> String {
    let rates = demand_rates(problem, &solved.flow);
    let demands: Vec<Value> = (0..problem.demands.len())
        .map(|i| {
            let mut d = demand_json(problem, i);
            d["rate"] = json!(rates[i]);
            d
        })
        .collect();
    render_document(
        header,
        json!({
            "status": "optimal",
            "total_rate": solved.flow.objective_value,
            "swap_success": problem.q(),
            "elementary_fidelity": problem.graph.elementary_fidelity(),
            "l_max": problem.layered.l_max(),
            "lp": {
                "variables": solved.model.lp.num_vars(),
                "constraints": solved.model.lp.num_constraints(),
                "iterations": solved.solution.iterations,
            },
            "demands": demands,
            "flows": flow_rows(&solved.flow, &problem.layered),
        }),
    )
}

/// Reads the flows of a solution document back onto `problem`'s layered graph.
pub fn flow_from_solution_document(problem: &Problem, text: &str) -> Result<FlowSolution> {
    let doc: Value = serde_json::from_str(text)?;
    if doc.pointer("/header/tool").and_then(Value::as_str) != Some(TOOL) {
        return Err(Error::Document(
            "not a solution document (missing header)".into(),
        ));
    }
    let rows = doc
        .get("flows")
        .cloned()
        .ok_or_else(|| Error::Document("solution document has no `flows`".into()))?;
    let rows: Vec<FlowRow> = serde_json::from_value(rows)?;
    flow_from_rows(&rows, &problem.layered, &problem.subs, problem.q())
        .map_err(|e| Error::Document(format!("solution does not match the instance: {e}")))
}

pub fn extract(problem: &Problem, flow: &FlowSolution, tol: &Tolerances) -> Result<PathAssignment> {
    Ok(extract_paths(
        flow,
        &problem.layered,
        problem.demands.len(),
        problem.q(),
        tol,
    )?)
}

pub fn paths_document(
    problem: &Problem,
    pa: &PathAssignment,
    objective: f64,
    header: &Header,
) -> String {
    let g = &problem.graph;
    let w = g.werner();
    let demands: Vec<Value> = pa
        .demands
        .iter()
        .enumerate()
        .map(|(i, dp)| {
            let mut d = demand_json(problem, i);
            d["total_rate"] = json!(dp.total_rate);
            d["paths"] = dp
                .paths
                .iter()
                .map(|p| {
                    json!({
                        "path": p.nodes.iter().map(|&n| g.node_id(n)).collect::<Vec<_>>(),
                        "length": p.len(),
                        "rate": p.rate,
                        "end_to_end_fidelity": end_to_end_fidelity(w, p.len() as u32).ok(),
                        "simple": p.simple,
                    })
                })
                .collect();
            d
        })
        .collect();
    render_document(
        header,
        json!({
            "total_rate": pa.total_rate,
            "lp_objective": objective,
            "demands": demands,
        }),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub status: CheckStatus,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    fn push(&mut self, name: &'static str, ok: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name,
            status: if ok {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            },
            detail: detail.into(),
        });
    }

    pub fn failures(&self) -> usize {
        self.checks
            .iter()
            .filter(|c| c.status == CheckStatus::Fail)
            .count()
    }

    pub fn skipped(&self) -> usize {
        self.checks
            .iter()
            .filter(|c| c.status == CheckStatus::Skipped)
            .count()
    }

    pub fn passed(&self) -> bool {
        self.failures() == 0
    }
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    /// Abort oracle enumeration beyond this many candidate paths.
    pub oracle_cap: usize,
    /// Absolute tolerance for oracle agreement.
    pub oracle_tol: f64,
    /// Also simulate the assignment with this configuration.
    pub simulation: Option<SimulationConfig>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            oracle_cap: 100_000,
            oracle_tol: 1e-6,
            simulation: None,
        }
    }
}

/// Runs every invariant check on a solved instance and its extracted paths.
pub fn verify(
    problem: &Problem,
    flow: &FlowSolution,
    pa: &PathAssignment,
    lp_size: (usize, usize),
    tol: &Tolerances,
    opts: &VerifyOptions,
) -> VerifyReport {
    let lg = &problem.layered;
    let g = &problem.graph;
    let q = problem.q();
    let mut report = VerifyReport { checks: Vec::new() };

    let violations = check_flow_feasibility(flow, lg, tol.tol_feas);
    report.push(
        "flow_feasibility",
        violations.is_empty(),
        format!("{} violated constraints", violations.len()),
    );

    let worst_balance = flow
        .flows
        .iter()
        .map(|f| (f.source_outflow(lg) - f.sink_inflow(lg)).abs())
        .fold(0.0, f64::max);
    report.push(
        "source_sink_balance",
        worst_balance <= tol.tol_feas * (1.0 + lg.edge_count() as f64),
        format!("largest source/sink mismatch {worst_balance:e}"),
    );

    let mut worst_negative = 0.0_f64;
    let mut worst_imbalance = 0.0_f64;
    let mut steps = 0usize;
    let mut breakdown = None;
    for f in &flow.flows {
        let initial = crate::extraction::ResidualFlow::new(f).max_imbalance(lg);
        let outcome = extract_sub_demand(f, lg, q, tol, &mut |r| {
            steps += 1;
            worst_negative = worst_negative.min(r.min_value());
            worst_imbalance = worst_imbalance.max(r.max_imbalance(lg) - initial);
        });
        if let Err(e) = outcome {
            breakdown.get_or_insert(e.to_string());
        }
    }
    report.push(
        "residual_invariants",
        breakdown.is_none() && worst_negative >= 0.0 && worst_imbalance <= tol.tol_feas,
        breakdown.unwrap_or_else(|| {
            format!("{steps} steps, min residual {worst_negative:e}, imbalance drift {worst_imbalance:e}")
        }),
    );

    let violations = verify_assignment(pa, g, &problem.demands, q, flow.objective_value, tol);
    report.push(
        "assignment",
        violations.is_empty(),
        if violations.is_empty() {
            format!("{} paths", pa.paths().count())
        } else {
            format!("{violations:?}")
        },
    );

    let w = g.werner();
    let low = pa
        .paths()
        .filter(|p| {
            let target = problem.demands.demands()[p.demand].target_fidelity;
            let got = end_to_end_fidelity(w, p.len() as u32).unwrap_or(0.0);
            target.is_some_and(|t| got < t - 1e-12)
        })
        .count();
    report.push(
        "path_fidelity",
        low == 0,
        format!("{low} paths below target"),
    );

    let (max_vars, max_rows) = problem.layered_size_bounds();
    let (coarse_vars, coarse_rows) = problem.size_bounds();
    report.push(
        "size_bounds",
        lp_size.0 <= max_vars && lp_size.1 <= max_rows,
        format!(
            "{} variables (bound {max_vars}, coarse {coarse_vars}), {} constraints (bound {max_rows}, coarse {coarse_rows})",
            lp_size.0, lp_size.1
        ),
    );

    match build_link_schedule(pa, g, q, tol.tol_feas) {
        Ok(s) => {
            let busiest = s.edges.iter().map(|e| e.total_share).fold(0.0, f64::max);
            report.push(
                "link_schedule",
                true,
                format!("busiest link share {busiest}"),
            );
        }
        Err(e) => report.push("link_schedule", false, e.to_string()),
    }

    match oracle_solution(g, &problem.demands, q, opts.oracle_cap) {
        Ok(o) => {
            let gap = (o.objective - flow.objective_value).abs();
            report.push(
                "oracle",
                gap <= opts.oracle_tol,
                format!(
                    "path LP {} vs edge LP {} (gap {gap:e})",
                    o.objective, flow.objective_value
                ),
            );
        }
        Err(OracleError::TooManyPaths { cap }) => report.checks.push(Check {
            name: "oracle",
            status: CheckStatus::Skipped,
            detail: format!("more than {cap} candidate paths"),
        }),
        Err(e) => report.push("oracle", false, e.to_string()),
    }

    if let Some(cfg) = opts.simulation {
        match simulate_network(pa, g, &cfg) {
            Ok(sim) => {
                let off = sim
                    .paths
                    .iter()
                    .filter(|p| {
                        (p.empirical_rate - p.analytic_rate).abs() > 5.0 * p.std_error + 1e-9
                    })
                    .count();
                report.push(
                    "simulation",
                    off == 0,
                    format!(
                        "{off} of {} paths outside 5 standard errors",
                        sim.paths.len()
                    ),
                );
            }
            Err(e) => report.push("simulation", false, e.to_string()),
        }
    }
    report
}

pub fn verify_document(report: &VerifyReport, header: &Header) -> String {
    render_document(
        header,
        json!({
            "passed": report.passed(),
            "checks": report.checks,
        }),
    )
}

pub fn simulate(
    problem: &Problem,
    pa: &PathAssignment,
    cfg: &SimulationConfig,
) -> Result<SimulationReport> {
    Ok(simulate_network(pa, &problem.graph, cfg)?)
}

pub fn simulation_document(report: &SimulationReport, header: &Header) -> String {
    render_document(
        header,
        json!({
            "config": report.config,
            "paths": report.paths,
        }),
    )
}

/// Output of a full in-process run, keyed by file name.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub files: Vec<(&'static str, String)>,
    pub report: VerifyReport,
}

/// Runs every stage and renders every document.
pub fn run_pipeline(
    problem: &Problem,
    seed: u64,
    trials: u64,
    tol: &Tolerances,
) -> Result<PipelineOutput> {
    let header = Header::new(seed, *tol);
    let solved = solve(problem)?;
    let pa = extract(problem, &solved.flow, tol)?;
    let cfg = SimulationConfig {
        trials,
        seed,
        q: problem.q(),
        werner: problem.graph.werner().value(),
        scheduling: Default::default(),
    };
    let sim = simulate(problem, &pa, &cfg)?;
    let report = verify(
        problem,
        &solved.flow,
        &pa,
        (
            solved.model.lp.num_vars(),
            solved.model.lp.num_constraints(),
        ),
        tol,
        &VerifyOptions::default(),
    );
    Ok(PipelineOutput {
        files: vec![
            ("solution.json", solve_document(problem, &solved, &header)),
            ("model.lp", crate::lp::export_lp_text(&solved.model.lp)),
            (
                "paths.json",
                paths_document(problem, &pa, solved.flow.objective_value, &header),
            ),
            ("verify.json", verify_document(&report, &header)),
            ("simulation.json", simulation_document(&sim, &header)),
            ("simulation.csv", sim.to_csv()),
        ],
        report,
    })
}

/// Maps an error to the command-line exit code contract.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Lp(LpError::NotOptimal(_)) => 3,
        Error::Lp(_) | Error::Extraction(_) | Error::Oracle(_) | Error::Simulation(_) => 4,
        Error::Topology(_)
        | Error::Fidelity(_)
        | Error::Demand(_)
        | Error::Document(_)
        | Error::Io(_)
        | Error::Json(_) => 2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{chain_instance, shared_link_instance};

    #[test]
    fn significant_digits() {
        assert_eq!(round_sig(0.1 + 0.2), 0.3);
        assert_eq!(format_sig(2.0 / 3.0), "0.666666666667");
        assert_eq!(format_sig(123456789012345.0), "123456789012000");
        assert_eq!(format_sig(0.0), "0");
        assert_eq!(round_sig(-1.23456789012345e-20), -1.23456789012e-20);
    }

    #[test]
    fn documents_carry_header_and_round() {
        let inst = chain_instance(&[4.0, 4.0], 0.5);
        let problem = Problem::new(inst.graph, inst.demands).unwrap();
        let out = run_pipeline(&problem, 3, 200, &Tolerances::default()).unwrap();
        assert!(out.report.passed(), "{:?}", out.report);
        let solution: Value = serde_json::from_str(&out.files[0].1).unwrap();
        assert_eq!(solution["header"]["tool"], "qflow");
        assert_eq!(solution["header"]["seed"], 3);
        assert_eq!(solution["total_rate"], 2.0);
    }

    #[test]
    fn solution_document_reloads() {
        let inst = shared_link_instance();
        let problem = Problem::new(inst.graph, inst.demands).unwrap();
        let solved = solve(&problem).unwrap();
        let text = solve_document(&problem, &solved, &Header::new(0, Tolerances::default()));
        let back = flow_from_solution_document(&problem, &text).unwrap();
        assert_eq!(back.objective_value, solved.flow.objective_value);
        assert!(matches!(
            flow_from_solution_document(&problem, "{}"),
            Err(Error::Document(_))
        ));
    }

    #[test]
    fn shared_link_rates() {
        let inst = shared_link_instance();
        let problem = Problem::new(inst.graph, inst.demands).unwrap();
        let solved = solve(&problem).unwrap();
        assert_eq!(demand_rates(&problem, &solved.flow), vec![0.25, 5.0]);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(
            exit_code(&Error::Lp(LpError::NotOptimal(
                crate::lp::LpStatus::Infeasible
            ))),
            3
        );
        assert_eq!(exit_code(&Error::Lp(LpError::IterationLimit(5))), 4);
        assert_eq!(exit_code(&Error::Document("x".into())), 2);
    }
}
