//! Command-line front end. Every subcommand prints a JSON summary on stdout
//! and, when `--output-dir` is given, writes it as `summary.json` next to its
//! CSV tables. Failures print `{"error": {"kind", "message"}}` on stderr and
//! exit nonzero.

pub mod hamiltonian;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{QiteError, Result};
use crate::evolve::{evolve, EvolutionConfig, EvolutionResult, Method, NormalizationMode};
use crate::fast::SiteOrder;
use crate::ledger::{scaling_fit, CostLedger};
use crate::oracle::{self, Spectrum};
use crate::pauli::{Pauli, PauliString, WeightedPauliSum};
use crate::sampler::{estimate_diagonal_at, ProjectionMode};
use crate::standard::DomainPolicy;
use crate::state::StateVector;
use crate::thermal::{self, ChainConfig, Proposal, WeightSource};

use self::hamiltonian::{load_hamiltonian, HamiltonianFile};

#[derive(Debug, Parser)]
#[command(name = "qite", version, about = "Standard and Fast quantum imaginary time evolution")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Imaginary-time evolution exp(t H)|psi> with per-step diagnostics.
    Evolve(EvolveArgs),
    /// Diagonal element <i|exp(t H)|i> from the projection probability.
    SampleDiag(SampleArgs),
    /// Thermal average of an observable by Metropolis sampling.
    Thermal(ThermalArgs),
    /// Cost-ledger sweep over qubit count or term weight.
    Benchmark(BenchmarkArgs),
    /// Standard, fast and oracle evolutions side by side.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormalizationArg {
    FirstOrder,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SiteOrderArg {
    Ascending,
    Descending,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimatorArg {
    Eigenbasis,
    Metts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProposalArg {
    Bitflip,
    Collapse,
}

#[derive(Debug, Clone, Args)]
#[group(id = "step_size", required = true, multiple = false)]
pub struct StepArgs {
    /// Trotter sweeps per unit of time.
    #[arg(long, group = "step_size")]
    pub steps: Option<usize>,
    /// Step size; 1/tau must be an integer.
    #[arg(long, group = "step_size")]
    pub tau: Option<f64>,
}

impl StepArgs {
    pub fn steps_per_unit(&self) -> Result<usize> {
        match (self.steps, self.tau) {
            (Some(s), None) if s > 0 => Ok(s),
            (Some(_), None) => Err(QiteError::Config("--steps must be at least 1".into())),
            (None, Some(tau)) => {
                if !(tau > 0.0) || !tau.is_finite() {
                    return Err(QiteError::Config(format!("--tau must be positive, got {tau}")));
                }
                let inv = 1.0 / tau;
                if (inv - inv.round()).abs() > 1e-9 * inv.max(1.0) || inv.round() < 1.0 {
                    return Err(QiteError::Config(format!("1/tau must be an integer, got 1/{tau} = {inv}")));
                }
                Ok(inv.round() as usize)
            }
            _ => Err(QiteError::Config("give exactly one of --steps and --tau".into())),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct EngineArgs {
    /// Operator domain for standard QITE: full, klocal:R or custom:XI,ZZ,...
    #[arg(long, default_value = "full")]
    pub domain: String,
    #[arg(long, value_enum, default_value = "first-order")]
    pub normalization: NormalizationArg,
    #[arg(long, value_enum, default_value = "ascending")]
    pub site_order: SiteOrderArg,
    /// Relative eigenvalue cutoff of the pseudo-inverse.
    #[arg(long, default_value_t = crate::standard::DEFAULT_CUTOFF)]
    pub svd_cutoff: f64,
    /// Largest qubit count handed to the dense oracle.
    #[arg(long, default_value_t = oracle::DEFAULT_ORACLE_CAP)]
    pub oracle_cap: usize,
    /// Record fidelity against the dense oracle after every sweep.
    #[arg(long, value_enum, default_value = "off")]
    pub oracle_check: Switch,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl EngineArgs {
    pub fn config(&self, qubits: usize) -> Result<EvolutionConfig> {
        if !(self.svd_cutoff >= 0.0) {
            return Err(QiteError::Config(format!("--svd-cutoff must be non-negative, got {}", self.svd_cutoff)));
        }
        Ok(EvolutionConfig {
            domain: parse_domain(&self.domain, qubits)?,
            normalization: match self.normalization {
                NormalizationArg::FirstOrder => NormalizationMode::FirstOrder,
                NormalizationArg::Exact => NormalizationMode::Exact,
            },
            site_order: match self.site_order {
                SiteOrderArg::Ascending => SiteOrder::Ascending,
                SiteOrderArg::Descending => SiteOrder::Descending,
            },
            svd_cutoff: self.svd_cutoff,
            seed: self.seed,
            oracle_check: self.oracle_check == Switch::On,
            oracle_cap: self.oracle_cap,
            ..EvolutionConfig::default()
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct StateArgs {
    /// Computational basis index of the initial state (qubit 0 = lowest bit).
    #[arg(long, default_value_t = 0)]
    pub basis_index: usize,
    /// Start from a Haar-like random state drawn from --seed instead.
    #[arg(long)]
    pub random_state: bool,
}

impl StateArgs {
    fn build(&self, qubits: usize, seed: u64) -> Result<(StateVector, String)> {
        if self.random_state {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok((StateVector::random(qubits, &mut rng)?, "random".into()))
        } else {
            Ok((StateVector::basis(qubits, self.basis_index)?, format!("basis:{}", self.basis_index)))
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct EvolveArgs {
    #[arg(long)]
    pub hamiltonian: PathBuf,
    #[arg(long, default_value = "fast", value_parser = parse_method)]
    pub method: Method,
    #[command(flatten)]
    pub step: StepArgs,
    /// Total imaginary time t in exp(t H); negative values decay.
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub time: f64,
    #[command(flatten)]
    pub state: StateArgs,
    #[command(flatten)]
    pub engine: EngineArgs,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub hamiltonian: PathBuf,
    #[arg(long, default_value = "fast", value_parser = parse_method)]
    pub method: Method,
    #[command(flatten)]
    pub step: StepArgs,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub time: f64,
    #[command(flatten)]
    pub state: StateArgs,
    /// Estimate the projection probability from this many shots.
    #[arg(long)]
    pub shots: Option<u64>,
    #[command(flatten)]
    pub engine: EngineArgs,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ThermalArgs {
    #[arg(long)]
    pub hamiltonian: PathBuf,
    /// Engine for the weights; `oracle` uses exact dense weights.
    #[arg(long, default_value = "fast", value_parser = parse_method)]
    pub method: Method,
    #[command(flatten)]
    pub step: StepArgs,
    #[arg(long)]
    pub beta: f64,
    /// Observable file in the Hamiltonian format; defaults to H itself.
    #[arg(long)]
    pub observable: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "metts")]
    pub estimator: EstimatorArg,
    #[arg(long, value_enum, default_value = "bitflip")]
    pub proposal: ProposalArg,
    #[arg(long, default_value_t = 20_000)]
    pub chain_steps: usize,
    #[arg(long, default_value_t = 1)]
    pub chains: usize,
    /// Defaults to max(10% of the chain, 100).
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long, default_value_t = 20)]
    pub batches: usize,
    #[command(flatten)]
    pub engine: EngineArgs,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
#[group(id = "sweep", required = true, multiple = false)]
pub struct SweepArgs {
    /// Half-open qubit range a:b over transverse-field Ising chains.
    #[arg(long, group = "sweep", value_parser = parse_range)]
    pub sweep_n: Option<(usize, usize)>,
    /// Half-open term-weight range a:b for a single XYZ-patterned term.
    #[arg(long, group = "sweep", value_parser = parse_range)]
    pub sweep_k: Option<(usize, usize)>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchmarkArgs {
    #[arg(long, default_value = "standard", value_parser = parse_method)]
    pub method: Method,
    #[command(flatten)]
    pub sweep: SweepArgs,
    /// Qubit count for a weight sweep; defaults to the largest weight.
    #[arg(long)]
    pub qubits: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub steps: usize,
    #[arg(long, default_value_t = 0.1)]
    pub time: f64,
    #[command(flatten)]
    pub engine: EngineArgs,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub hamiltonian: PathBuf,
    #[command(flatten)]
    pub step: StepArgs,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub time: f64,
    #[command(flatten)]
    pub state: StateArgs,
    #[command(flatten)]
    pub engine: EngineArgs,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse::<Method>().map_err(|e| e.to_string())
}

fn parse_range(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected a:b, got {s:?}"))?;
    let a: usize = a.trim().parse().map_err(|_| format!("bad range start in {s:?}"))?;
    let b: usize = b.trim().parse().map_err(|_| format!("bad range end in {s:?}"))?;
    if b <= a || a == 0 {
        return Err(format!("range {s:?} must satisfy 1 <= a < b"));
    }
    Ok((a, b))
}

/// `full`, `klocal:R` or `custom:XI,ZZ`.
pub fn parse_domain(s: &str, qubits: usize) -> Result<DomainPolicy> {
    match s.split_once(':') {
        None if s == "full" => Ok(DomainPolicy::FullMinusIdentity),
        Some(("klocal", r)) => r
            .parse()
            .map(|radius| DomainPolicy::KLocalSupport { radius })
            .map_err(|_| QiteError::Config(format!("bad klocal radius {r:?}"))),
        Some(("custom", list)) => {
            let strings = list
                .split(',')
                .map(|p| {
                    let p: PauliString = p.trim().parse()?;
                    if p.qubit_count() != qubits {
                        return Err(QiteError::Dimension { expected: qubits, found: p.qubit_count() });
                    }
                    Ok(p)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(DomainPolicy::Custom(strings))
        }
        _ => Err(QiteError::Config(format!("unknown domain {s:?}; use full, klocal:R or custom:P1,P2"))),
    }
}

fn csv_error(e: csv::Error) -> QiteError {
    QiteError::Io(std::io::Error::other(e))
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    for row in rows {
        w.serialize(row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn prepare_dir(dir: &Option<PathBuf>) -> Result<Option<&Path>> {
    match dir {
        Some(d) => {
            fs::create_dir_all(d)?;
            Ok(Some(d.as_path()))
        }
        None => Ok(None),
    }
}

fn write_summary(dir: Option<&Path>, summary: &Value) -> Result<()> {
    if let Some(d) = dir {
        fs::write(d.join("summary.json"), render_json(summary))?;
    }
    Ok(())
}

pub fn render_json(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("JSON values always serialize");
    s.push('\n');
    s
}

fn oracle_spectrum(h: &WeightedPauliSum, cap: usize) -> Result<Option<Spectrum>> {
    if h.qubit_count() > cap {
        return Ok(None);
    }
    Ok(Some(oracle::to_dense(h, cap)?.spectrum()?))
}

fn relative_error(estimate: f64, exact: f64) -> f64 {
    (estimate - exact).abs() / exact.abs()
}

fn hamiltonian_json(file: &HamiltonianFile, path: &Path) -> Value {
    json!({
        "path": path.display().to_string(),
        "name": file.name,
        "qubits": file.hamiltonian.qubit_count(),
        "terms": file.hamiltonian.terms().len(),
    })
}

#[derive(Serialize)]
struct StepRow {
    step: usize,
    sweep: usize,
    term_index: usize,
    term: String,
    residual: f64,
    solve_residual: f64,
    c_a: f64,
    c_total: f64,
    fidelity: Option<f64>,
    x: String,
}

#[derive(Serialize)]
struct ReductionRow {
    step: usize,
    term: String,
    site: usize,
    target: char,
    e_site: f64,
    x_x: f64,
    x_y: f64,
    x_z: f64,
    residual: f64,
    coefficient_out: f64,
    c_factor: f64,
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(";")
}

fn write_evolution_tables(dir: &Path, run: &EvolutionResult) -> Result<()> {
    let steps: Vec<StepRow> = run
        .steps
        .iter()
        .map(|s| StepRow {
            step: s.step_index,
            sweep: s.sweep,
            term_index: s.term_index,
            term: s.term_label.clone(),
            residual: s.residual,
            solve_residual: s.solve_residual,
            c_a: s.c_a,
            c_total: s.c_total,
            fidelity: s.fidelity,
            x: join(&s.x),
        })
        .collect();
    write_csv(&dir.join("steps.csv"), &steps)?;
    if !run.reductions.is_empty() {
        let rows: Vec<ReductionRow> = run
            .reductions
            .iter()
            .flat_map(|step| {
                step.reductions.iter().map(move |r| ReductionRow {
                    step: step.step_index,
                    term: step.term_label.clone(),
                    site: r.site,
                    target: r.target.as_char(),
                    e_site: r.expectation_used,
                    x_x: r.x_site[0],
                    x_y: r.x_site[1],
                    x_z: r.x_site[2],
                    residual: r.residual,
                    coefficient_out: r.coefficient_out,
                    c_factor: r.c_factor,
                })
            })
            .collect();
        write_csv(&dir.join("reductions.csv"), &rows)?;
    }
    fs::write(dir.join("final_state.csv"), run.final_state.to_csv())?;
    Ok(())
}

fn run_evolve(args: &EvolveArgs) -> Result<Value> {
    let file = load_hamiltonian(&args.hamiltonian)?;
    let h = &file.hamiltonian;
    let n = h.qubit_count();
    let steps = args.step.steps_per_unit()?;
    let config = args.engine.config(n)?;
    let (psi0, initial) = args.state.build(n, args.engine.seed)?;
    let run = evolve(args.method, &psi0, h, args.time, steps, &config)?;

    let (fidelity, c_exact) = match oracle_spectrum(h, config.oracle_cap)? {
        Some(sp) => {
            let (exact, c) = sp.exp_apply(&psi0, args.time)?;
            (Some(run.final_state.overlap(&exact)?.norm()), Some(c))
        }
        None => (None, None),
    };
    let max_residual = run.steps.iter().map(|s| s.residual).fold(0.0, f64::max);
    let summary = json!({
        "command": "evolve",
        "hamiltonian": hamiltonian_json(&file, &args.hamiltonian),
        "method": args.method.as_str(),
        "time": args.time,
        "steps_per_unit": steps,
        "tau": run.tau,
        "sweeps": run.sweeps,
        "seed": args.engine.seed,
        "initial_state": initial,
        "c_total": run.c_total,
        "c_exact": c_exact,
        "c_relative_error": c_exact.map(|c| relative_error(run.c_total, c)),
        "fidelity": fidelity,
        "max_step_residual": max_residual,
        "truncated_steps": run.reductions.iter().filter(|r| r.truncated).count(),
        "ledger": run.ledger,
    });
    if let Some(dir) = prepare_dir(&args.output_dir)? {
        write_evolution_tables(dir, &run)?;
        write_summary(Some(dir), &summary)?;
    }
    Ok(summary)
}

fn run_sample(args: &SampleArgs) -> Result<Value> {
    let file = load_hamiltonian(&args.hamiltonian)?;
    let h = &file.hamiltonian;
    let n = h.qubit_count();
    let steps = args.step.steps_per_unit()?;
    let config = args.engine.config(n)?;
    let (psi, initial) = args.state.build(n, args.engine.seed)?;
    let mode = match args.shots {
        Some(shots) => ProjectionMode::ShotSampled { shots, seed: args.engine.seed },
        None => ProjectionMode::ExactOverlap,
    };
    let est = estimate_diagonal_at(h, &psi, args.time, steps, args.method, mode, &config)?;
    let oracle_value = match oracle_spectrum(h, config.oracle_cap)? {
        Some(sp) => Some(sp.exp_apply(&psi, args.time / 2.0)?.1),
        None => None,
    };
    let mut summary = json!({
        "command": "sample-diag",
        "hamiltonian": hamiltonian_json(&file, &args.hamiltonian),
        "initial_state": initial,
        "time": args.time,
        "value": est.value,
        "c_total": est.c_total,
        "p": est.projection_probability,
        "method": args.method.as_str(),
        "steps": steps,
        "zero_floor": est.zero_floor,
        "oracle_value": oracle_value,
        "relative_error": oracle_value.map(|v| relative_error(est.value, v)),
        "ledger": est.ledger,
    });
    if let Some(shots) = args.shots {
        summary["shots"] = json!(shots);
        summary["seed"] = json!(args.engine.seed);
    }
    write_summary(prepare_dir(&args.output_dir)?, &summary)?;
    Ok(summary)
}

fn run_thermal(args: &ThermalArgs) -> Result<Value> {
    let file = load_hamiltonian(&args.hamiltonian)?;
    let h = &file.hamiltonian;
    let n = h.qubit_count();
    let config = args.engine.config(n)?;
    let source = match args.method {
        Method::Oracle => WeightSource::Oracle { cap: config.oracle_cap },
        method => WeightSource::Qite { method, steps_per_unit: args.step.steps_per_unit()?, config: config.clone() },
    };
    let observable = match &args.observable {
        Some(path) => load_hamiltonian(path)?.hamiltonian,
        None => h.clone(),
    };
    let dir = prepare_dir(&args.output_dir)?;
    let chain = ChainConfig {
        steps: args.chain_steps,
        burn_in: args.burn_in,
        batches: args.batches,
        chains: args.chains,
        seed: args.engine.seed,
        proposal: match args.proposal {
            ProposalArg::Bitflip => Proposal::BitFlip,
            ProposalArg::Collapse => Proposal::MettsCollapse,
        },
        record_trace: dir.is_some(),
    };
    let run = match args.estimator {
        EstimatorArg::Eigenbasis => {
            let values = thermal::diagonal_eigenvalues(&observable)?;
            thermal::eigenbasis_thermal(h, &values, args.beta, &source, &chain)?
        }
        EstimatorArg::Metts => thermal::metts_ratio_thermal(h, &observable, args.beta, &source, &chain)?,
    };
    let exact = if n <= config.oracle_cap {
        Some(oracle::exact_thermal_average(h, &observable, args.beta, config.oracle_cap)?)
    } else {
        None
    };
    let est = &run.estimate;
    let summary = json!({
        "command": "thermal",
        "hamiltonian": hamiltonian_json(&file, &args.hamiltonian),
        "method": args.method.as_str(),
        "beta": args.beta,
        "mean": est.mean,
        "stderr": est.stderr,
        "acceptance_rate": est.acceptance_rate,
        "samples": est.samples,
        "burn_in": est.burn_in,
        "chains": est.chains,
        "estimator": est.estimator,
        "seed": est.seed,
        "nonpositive_weights": est.nonpositive_weights,
        "consistency_anomalies": est.consistency_anomalies,
        "exact": exact,
        "z_score": exact.map(|e| if est.stderr > 0.0 { (est.mean - e) / est.stderr } else { 0.0 }),
        "ledger": run.ledger,
    });
    if let Some(d) = dir {
        write_csv(&d.join("trace.csv"), &run.trace)?;
        write_summary(Some(d), &summary)?;
    }
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkRow {
    pub n: usize,
    pub k: usize,
    pub method: String,
    pub terms: usize,
    pub trotter_steps: u64,
    pub rotations: u64,
    pub expectations: u64,
    pub distinct_expectations: u64,
    pub max_solve_dim: usize,
    pub solve_dims: String,
    pub rotations_per_step: f64,
    pub expectations_per_step: f64,
    pub distinct_per_step: f64,
}

/// A single term of weight `k` on the first `k` of `n` qubits, cycling X, Y, Z.
pub fn patterned_term(n: usize, k: usize) -> Result<WeightedPauliSum> {
    let paulis: Vec<Pauli> = (0..n).map(|q| if q < k { Pauli::NON_IDENTITY[q % 3] } else { Pauli::I }).collect();
    WeightedPauliSum::new(n, [(1.0, PauliString::from_paulis(&paulis)?)])
}

fn benchmark_row(n: usize, k: usize, method: Method, h: &WeightedPauliSum, ledger: &CostLedger) -> BenchmarkRow {
    let mut dims = ledger.linear_solves.clone();
    dims.sort_unstable();
    dims.dedup();
    let per = |v: u64| v as f64 / ledger.trotter_steps.max(1) as f64;
    BenchmarkRow {
        n,
        k,
        method: method.as_str().into(),
        terms: h.terms().len(),
        trotter_steps: ledger.trotter_steps,
        rotations: ledger.rotations,
        expectations: ledger.expectations,
        distinct_expectations: ledger.distinct_expectations,
        max_solve_dim: ledger.max_solve_dim(),
        solve_dims: dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(";"),
        rotations_per_step: per(ledger.rotations),
        expectations_per_step: per(ledger.expectations),
        distinct_per_step: per(ledger.distinct_expectations),
    }
}

fn fit_json(xs: &[f64], ys: &[f64]) -> Value {
    let points: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
    match scaling_fit(&points) {
        Ok(fit) => json!(fit),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

fn run_benchmark(args: &BenchmarkArgs) -> Result<Value> {
    if args.method == Method::Oracle {
        return Err(QiteError::Config("benchmark needs --method standard or fast".into()));
    }
    if args.steps == 0 {
        return Err(QiteError::Config("--steps must be at least 1".into()));
    }
    let cases: Vec<(usize, usize, WeightedPauliSum)> = match (args.sweep.sweep_n, args.sweep.sweep_k) {
        (Some((a, b)), None) => (a.max(2)..b)
            .map(|n| Ok((n, 2, WeightedPauliSum::transverse_ising(n, 1.0, 0.5)?)))
            .collect::<Result<_>>()?,
        (None, Some((a, b))) => {
            let n = args.qubits.unwrap_or(b - 1);
            if n < b - 1 {
                return Err(QiteError::Config(format!("--qubits {n} is smaller than the largest weight {}", b - 1)));
            }
            (a..b).map(|k| Ok((n, k, patterned_term(n, k)?))).collect::<Result<_>>()?
        }
        _ => return Err(QiteError::Config("give exactly one of --sweep-n and --sweep-k".into())),
    };
    let mut rows = Vec::with_capacity(cases.len());
    for (n, k, h) in &cases {
        let config = args.engine.config(*n)?;
        let mut rng = ChaCha8Rng::seed_from_u64(args.engine.seed);
        let psi = StateVector::random(*n, &mut rng)?;
        let run = evolve(args.method, &psi, h, args.time, args.steps, &config)?;
        rows.push(benchmark_row(*n, *k, args.method, h, &run.ledger));
    }
    let xs: Vec<f64> = rows.iter().map(|r| if args.sweep.sweep_n.is_some() { r.n } else { r.k } as f64).collect();
    let col = |f: fn(&BenchmarkRow) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    let summary = json!({
        "command": "benchmark",
        "method": args.method.as_str(),
        "variable": if args.sweep.sweep_n.is_some() { "n" } else { "k" },
        "steps_per_unit": args.steps,
        "time": args.time,
        "seed": args.engine.seed,
        "rows": rows,
        "fits": {
            "rotations_per_step": fit_json(&xs, &col(|r| r.rotations_per_step)),
            "expectations_per_step": fit_json(&xs, &col(|r| r.expectations_per_step)),
            "distinct_expectations_per_step": fit_json(&xs, &col(|r| r.distinct_per_step)),
        },
    });
    if let Some(d) = prepare_dir(&args.output_dir)? {
        write_csv(&d.join("ledger.csv"), &rows)?;
        write_summary(Some(d), &summary)?;
    }
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
struct CompareRow {
    method: String,
    fidelity: f64,
    c_total: f64,
    c_relative_error: f64,
    rotations: u64,
    expectations: u64,
    distinct_expectations: u64,
    max_solve_dim: usize,
}

fn run_compare(args: &CompareArgs) -> Result<Value> {
    let file = load_hamiltonian(&args.hamiltonian)?;
    let h = &file.hamiltonian;
    let n = h.qubit_count();
    let steps = args.step.steps_per_unit()?;
    let config = args.engine.config(n)?;
    let (psi0, initial) = args.state.build(n, args.engine.seed)?;
    let sp = oracle_spectrum(h, config.oracle_cap)?
        .ok_or(QiteError::OracleCap { qubits: n, cap: config.oracle_cap })?;
    let (exact, c_exact) = sp.exp_apply(&psi0, args.time)?;
    let mut rows = Vec::new();
    for method in [Method::Standard, Method::Fast, Method::Oracle] {
        let run = evolve(method, &psi0, h, args.time, steps, &config)?;
        rows.push(CompareRow {
            method: method.as_str().into(),
            fidelity: run.final_state.overlap(&exact)?.norm(),
            c_total: run.c_total,
            c_relative_error: relative_error(run.c_total, c_exact),
            rotations: run.ledger.rotations,
            expectations: run.ledger.expectations,
            distinct_expectations: run.ledger.distinct_expectations,
            max_solve_dim: run.ledger.max_solve_dim(),
        });
    }
    let summary = json!({
        "command": "compare",
        "hamiltonian": hamiltonian_json(&file, &args.hamiltonian),
        "time": args.time,
        "steps_per_unit": steps,
        "seed": args.engine.seed,
        "initial_state": initial,
        "c_exact": c_exact,
        "rows": rows,
    });
    if let Some(d) = prepare_dir(&args.output_dir)? {
        write_csv(&d.join("compare.csv"), &rows)?;
        write_summary(Some(d), &summary)?;
    }
    Ok(summary)
}

pub fn run(cli: &Cli) -> Result<Value> {
    match &cli.command {
        Command::Evolve(a) => run_evolve(a),
        Command::SampleDiag(a) => run_sample(a),
        Command::Thermal(a) => run_thermal(a),
        Command::Benchmark(a) => run_benchmark(a),
        Command::Compare(a) => run_compare(a),
    }
}

fn error_json(kind: &str, message: &str) -> String {
    render_json(&json!({ "error": { "kind": kind, "message": message } }))
}

/// Parses the process arguments, runs the subcommand and maps the outcome to
/// an exit code: 0 on success, 1 on a run error, 2 on a usage error.
pub fn main_entry() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            eprint!("{}", error_json("usage", &e.to_string()));
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(summary) => {
            print!("{}", render_json(&summary));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprint!("{}", error_json(e.kind(), &e.to_string()));
            ExitCode::from(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn domain_flags() {
        assert_eq!(parse_domain("full", 2).unwrap(), DomainPolicy::FullMinusIdentity);
        assert_eq!(parse_domain("klocal:1", 2).unwrap(), DomainPolicy::KLocalSupport { radius: 1 });
        assert!(matches!(parse_domain("custom:XI,ZZ", 2).unwrap(), DomainPolicy::Custom(v) if v.len() == 2));
        assert!(parse_domain("custom:XIZ", 2).is_err());
        assert!(parse_domain("klocal:x", 2).is_err());
        assert!(parse_domain("everything", 2).is_err());
    }

    #[test]
    fn step_flags() {
        let s = |steps, tau| StepArgs { steps, tau };
        assert_eq!(s(Some(100), None).steps_per_unit().unwrap(), 100);
        assert_eq!(s(None, Some(0.01)).steps_per_unit().unwrap(), 100);
        assert!(s(None, Some(0.3)).steps_per_unit().is_err());
        assert!(s(Some(0), None).steps_per_unit().is_err());
        assert!(s(None, None).steps_per_unit().is_err());
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_range("2:6").unwrap(), (2, 6));
        assert!(parse_range("6:2").is_err());
        assert!(parse_range("0:3").is_err());
        assert!(parse_range("3").is_err());
    }

    #[test]
    fn patterned_terms_have_requested_weight() {
        for k in 1..=5 {
            let h = patterned_term(6, k).unwrap();
            assert_eq!(h.terms()[0].string.weight(), k);
        }
        assert_eq!(patterned_term(4, 4).unwrap().terms()[0].string.to_string(), "XYZX");
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
