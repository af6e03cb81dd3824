mod output;
mod selftest;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use pskhad::detection::{build_confusion, ConfusionKind, Splitting};
use pskhad::grid::{log_grid, DEFAULT_EMAX, DEFAULT_EMIN, DEFAULT_POINTS_PER_DECADE};
use pskhad::rates::{default_lengths, delta_curve, receiver_curve, separable_curve};
use pskhad::simulator::{simulate, Scenario, SimConfig};
use pskhad::spectra::{classical_capacity, optimal_rate};
use pskhad::{CodeParams, QuadratureConfig};

use output::{emit, num, GridSpec, Manifest, QuadSpec, Table};

#[derive(Parser, Debug)]
#[command(name = "pskhad", version, about = "Rates of Hadamard-coded PSK over the pure-loss bosonic channel")]
struct Cli {
    /// Output file; a `<out>.manifest` sidecar is written next to it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Relative tolerance of adaptive quadrature.
    #[arg(long, global = true, default_value_t = 1e-9)]
    quad_rtol: f64,
    /// Absolute tolerance of adaptive quadrature.
    #[arg(long, global = true, default_value_t = 1e-12)]
    quad_atol: f64,
    /// Worker threads for grid sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Optimal joint-detection rate and capacity on an energy grid.
    OptimalRate {
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long = "M", default_value_t = 2)]
        phases: usize,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// R_opt/E over a grid of code lengths and phase counts at fixed E.
    Heatmap {
        #[arg(long = "E", visible_alias = "energy")]
        energy: f64,
        #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2, 4, 8, 16, 32, 64])]
        n_list: Vec<usize>,
        #[arg(long = "M-list", value_delimiter = ',', default_values_t = [1usize, 2, 3, 4, 5, 6, 7, 8])]
        m_list: Vec<usize>,
    },
    /// Rate of a practical receiver on an energy grid.
    ReceiverRate {
        #[arg(long, value_enum)]
        kind: ReceiverKind,
        /// Code length (ignored for the separable receiver).
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long = "M", default_value_t = 3)]
        phases: usize,
        #[command(flatten)]
        splitting: SplittingArgs,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Relative gain of the best M-phase code over the best binary code.
    Delta {
        #[arg(long = "M")]
        phases: usize,
        #[arg(long, value_enum, default_value_t = DeltaKind::VpHelstrom)]
        kind: DeltaKind,
        /// Code lengths to optimize over (powers of two).
        #[arg(long, value_delimiter = ',')]
        n_set: Option<Vec<usize>>,
        #[command(flatten)]
        splitting: SplittingArgs,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Monte Carlo confusion table of the splitting receiver.
    Simulate {
        #[arg(long, value_enum)]
        scenario: ScenarioArg,
        #[arg(long = "M")]
        phases: usize,
        /// Pulse energy.
        #[arg(long)]
        energy: f64,
        /// Splitting steps per stage.
        #[arg(long = "N", default_value_t = 100)]
        steps: usize,
        /// Trials per input phase.
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Runs the fast invariant suite.
    Selftest {
        #[arg(long, hide = true, default_value_t = 1.0, allow_negative_numbers = true)]
        tolerance_scale: f64,
    },
}

#[derive(Args, Debug, Clone)]
struct GridArgs {
    /// Single energy instead of a grid.
    #[arg(long, conflicts_with_all = ["emin", "emax", "points_per_decade"])]
    energy: Option<f64>,
    #[arg(long)]
    emin: Option<f64>,
    #[arg(long)]
    emax: Option<f64>,
    #[arg(long)]
    points_per_decade: Option<f64>,
}

impl GridArgs {
    fn resolve(&self) -> Result<(Vec<f64>, GridSpec)> {
        if let Some(e) = self.energy {
            if !(e.is_finite() && e > 0.0) {
                bail!("--energy must be finite and positive, got {e}");
            }
            let spec = GridSpec {
                kind: "single",
                points: 1,
                energy: Some(e),
                emin: None,
                emax: None,
                points_per_decade: None,
            };
            return Ok((vec![e], spec));
        }
        let emin = self.emin.unwrap_or(DEFAULT_EMIN);
        let emax = self.emax.unwrap_or(DEFAULT_EMAX);
        let ppd = self.points_per_decade.unwrap_or(DEFAULT_POINTS_PER_DECADE);
        let grid = log_grid(emin, emax, ppd)?;
        let spec = GridSpec {
            kind: "log",
            points: grid.len(),
            energy: None,
            emin: Some(emin),
            emax: Some(emax),
            points_per_decade: Some(ppd),
        };
        Ok((grid, spec))
    }
}

#[derive(Args, Debug, Clone)]
struct SplittingArgs {
    /// Finite number of splitting steps per stage.
    #[arg(long = "N", conflicts_with = "limit")]
    steps: Option<usize>,
    /// Continuous splitting (the default).
    #[arg(long)]
    limit: bool,
}

impl SplittingArgs {
    fn resolve(&self) -> Result<Splitting> {
        Ok(match self.steps {
            Some(n) => Splitting::finite(n)?,
            None => Splitting::Limit,
        })
    }

    fn describe(&self) -> toml::Value {
        match self.steps {
            Some(n) => toml::Value::Integer(n as i64),
            None => toml::Value::String("limit".into()),
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum ReceiverKind {
    VpHelstrom,
    VpRealistic,
    Separable,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum DeltaKind {
    VpHelstrom,
    VpRealistic,
}

impl DeltaKind {
    fn confusion(self) -> ConfusionKind {
        match self {
            Self::VpHelstrom => ConfusionKind::VpHelstrom,
            Self::VpRealistic => ConfusionKind::VpRealistic,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum ScenarioArg {
    VpHelstromProxy,
    VpRealistic,
    RealisticPskOnly,
}

impl ScenarioArg {
    fn scenario(self) -> Scenario {
        match self {
            Self::VpHelstromProxy => Scenario::VpHelstromProxy,
            Self::VpRealistic => Scenario::VpRealistic,
            Self::RealisticPskOnly => Scenario::RealisticPskOnly,
        }
    }

    /// Analytic table the simulation samples from.
    fn analytic(self) -> ConfusionKind {
        match self {
            Self::VpHelstromProxy => ConfusionKind::VpHelstrom,
            Self::VpRealistic => ConfusionKind::VpRealistic,
            Self::RealisticPskOnly => ConfusionKind::RealisticPsk,
        }
    }
}

fn int(x: usize) -> toml::Value {
    toml::Value::Integer(x as i64)
}

fn list(xs: &[usize]) -> toml::Value {
    toml::Value::Array(xs.iter().map(|&x| int(x)).collect())
}

struct Run {
    table: Table,
    parameters: BTreeMap<String, toml::Value>,
    grid: Option<GridSpec>,
    seed: Option<u64>,
}

impl Run {
    fn new(table: Table) -> Self {
        Self {
            table,
            parameters: BTreeMap::new(),
            grid: None,
            seed: None,
        }
    }

    fn param(mut self, key: &str, value: toml::Value) -> Self {
        self.parameters.insert(key.to_string(), value);
        self
    }
}

fn optimal_rate_cmd(n: usize, phases: usize, grid: &GridArgs) -> Result<Run> {
    let (energies, spec) = grid.resolve()?;
    CodeParams::new(n, phases, energies[0])?;
    let rows = pskhad::rates::sweep(&energies, |e| {
        let r = optimal_rate(&CodeParams::new(n, phases, e)?)?;
        Ok((r, classical_capacity(e)))
    })?;
    let mut table = Table::new(&["E", "R_opt", "C", "R_opt/E", "C/E"]);
    table.comment(format!("optimal rate, n = {n}, M = {phases}; rates in bits per mode"));
    for (&e, (r, c)) in energies.iter().zip(rows) {
        table.push(vec![num(e), num(r), num(c), num(r / e), num(c / e)]);
    }
    let mut run = Run::new(table).param("n", int(n)).param("M", int(phases));
    run.grid = Some(spec);
    Ok(run)
}

fn heatmap_cmd(energy: f64, n_list: &[usize], m_list: &[usize]) -> Result<Run> {
    if !(energy.is_finite() && energy > 0.0) {
        bail!("--E must be finite and positive, got {energy}");
    }
    let mut table = Table::new(&["n", "M", "R_opt/E"]);
    table.comment(format!("optimal rate per photon at E = {}", num(energy)));
    for &n in n_list {
        for &m in m_list {
            let r = optimal_rate(&CodeParams::new(n, m, energy)?)?;
            table.push(vec![n.to_string(), m.to_string(), num(r / energy)]);
        }
    }
    Ok(Run::new(table)
        .param("E", toml::Value::Float(energy))
        .param("n_list", list(n_list))
        .param("M_list", list(m_list)))
}

fn receiver_rate_cmd(
    kind: ReceiverKind,
    n: usize,
    phases: usize,
    splitting: &SplittingArgs,
    grid: &GridArgs,
    quad: &QuadratureConfig,
) -> Result<Run> {
    let (energies, spec) = grid.resolve()?;
    let curve = match kind {
        ReceiverKind::Separable => separable_curve(phases, &energies)?,
        ReceiverKind::VpHelstrom => receiver_curve(ConfusionKind::VpHelstrom, n, phases, splitting.resolve()?, &energies, quad)?,
        ReceiverKind::VpRealistic => receiver_curve(ConfusionKind::VpRealistic, n, phases, splitting.resolve()?, &energies, quad)?,
    };
    let mut table = Table::new(&["E", "rate"]);
    let label = kind.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default();
    table.comment(format!("{label} rate, M = {phases}; bits per mode"));
    for &(e, r) in curve.samples() {
        table.push(vec![num(e), num(r)]);
    }
    let mut run = Run::new(table).param("kind", toml::Value::String(label)).param("M", int(phases));
    if !matches!(kind, ReceiverKind::Separable) {
        run = run.param("n", int(n)).param("N", splitting.describe());
    }
    run.grid = Some(spec);
    Ok(run)
}

fn delta_cmd(
    phases: usize,
    kind: DeltaKind,
    n_set: Option<&[usize]>,
    splitting: &SplittingArgs,
    grid: &GridArgs,
    quad: &QuadratureConfig,
) -> Result<Run> {
    let (energies, spec) = grid.resolve()?;
    let lengths = n_set.map_or_else(default_lengths, <[usize]>::to_vec);
    let curve = delta_curve(kind.confusion(), &lengths, phases, splitting.resolve()?, &energies, quad)?;
    let mut table = Table::new(&["E", "delta"]);
    table.comment(format!(
        "relative gain of the best M = {phases} code over the best M = 2 code ({})",
        kind.confusion()
    ));
    for &(e, d) in curve.samples() {
        table.push(vec![num(e), num(d)]);
    }
    let mut run = Run::new(table)
        .param("M", int(phases))
        .param("kind", toml::Value::String(kind.confusion().to_string()))
        .param("n_set", list(&lengths))
        .param("N", splitting.describe());
    run.grid = Some(spec);
    Ok(run)
}

fn simulate_cmd(scenario: ScenarioArg, phases: usize, energy: f64, steps: usize, trials: u64, seed: u64, quad: &QuadratureConfig) -> Result<Run> {
    let config = SimConfig {
        phases,
        pulse_energy: energy,
        steps,
        trials,
        seed,
        scenario: scenario.scenario(),
    };
    let empirical = simulate(&config)?;
    let analytic = build_confusion(scenario.analytic(), phases, energy, Splitting::finite(steps)?, quad)?;
    let fit = empirical.compare(&analytic)?;
    let mut table = Table::new(&["sent", "outcome", "count", "probability", "std_error", "analytic"]);
    table.comment(format!(
        "{} simulation, M = {phases}, pulse energy {}, N = {steps}, {trials} trials per phase, seed {seed}",
        config.scenario,
        num(energy)
    ));
    table.comment(format!(
        "vs analytic table: chi2 = {:.4} (dof {}), p = {:.4}, max |z| = {:.3}, cells beyond 3 sigma = {}",
        fit.chi2, fit.dof, fit.p_value, fit.max_sigma, fit.cells_beyond_3sigma
    ));
    let (probs, errors) = (empirical.probs(), empirical.std_errors());
    let cols = phases + 1;
    for sent in 0..phases {
        for col in 0..cols {
            let outcome = if col == phases { "vacuum".to_string() } else { col.to_string() };
            let i = sent * cols + col;
            table.push(vec![
                sent.to_string(),
                outcome,
                empirical.count(sent, col).to_string(),
                num(probs[i]),
                num(errors[i]),
                num(analytic.get(sent, col)),
            ]);
        }
    }
    let mut run = Run::new(table)
        .param("scenario", toml::Value::String(config.scenario.to_string()))
        .param("M", int(phases))
        .param("energy", toml::Value::Float(energy))
        .param("N", int(steps))
        .param("trials", toml::Value::Integer(i64::try_from(trials).context("trial count too large")?));
    run.seed = Some(seed);
    Ok(run)
}

fn selftest_cmd(scale: f64, quad: &QuadratureConfig) -> bool {
    let mut all = true;
    for p in selftest::run(quad) {
        let pass = p.passes(scale);
        all &= pass;
        println!(
            "{} {}: measured {:.3e}, tolerance {:.3e}",
            if pass { "PASS" } else { "FAIL" },
            p.name,
            p.measured,
            p.tolerance * scale
        );
    }
    all
}

fn execute(cli: &Cli) -> Result<bool> {
    let start = Instant::now();
    let quad = QuadratureConfig::new(cli.quad_rtol, cli.quad_atol, QuadratureConfig::default().max_depth)?;
    let (name, run) = match &cli.command {
        Command::OptimalRate { n, phases, grid } => ("optimal-rate", optimal_rate_cmd(*n, *phases, grid)?),
        Command::Heatmap { energy, n_list, m_list } => ("heatmap", heatmap_cmd(*energy, n_list, m_list)?),
        Command::ReceiverRate {
            kind,
            n,
            phases,
            splitting,
            grid,
        } => ("receiver-rate", receiver_rate_cmd(*kind, *n, *phases, splitting, grid, &quad)?),
        Command::Delta {
            phases,
            kind,
            n_set,
            splitting,
            grid,
        } => ("delta", delta_cmd(*phases, *kind, n_set.as_deref(), splitting, grid, &quad)?),
        Command::Simulate {
            scenario,
            phases,
            energy,
            steps,
            trials,
            seed,
        } => ("simulate", simulate_cmd(*scenario, *phases, *energy, *steps, *trials, *seed, &quad)?),
        Command::Selftest { tolerance_scale } => return Ok(selftest_cmd(*tolerance_scale, &quad)),
    };
    let mut table = run.table;
    table.comment(format!("pskhad {} {name}", env!("CARGO_PKG_VERSION")));
    let mut manifest = Manifest {
        tool: "pskhad",
        version: env!("CARGO_PKG_VERSION"),
        command: name.to_string(),
        command_line: std::env::args().collect(),
        seed: run.seed,
        threads: cli.threads,
        duration_seconds: 0.0,
        parameters: run.parameters,
        grid: run.grid,
        quadrature: QuadSpec {
            rel_tol: quad.rel_tol,
            abs_tol: quad.abs_tol,
            max_depth: quad.max_depth,
        },
    };
    manifest.set_duration(start.elapsed());
    emit(&table, cli.out.as_deref(), &manifest)?;
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
