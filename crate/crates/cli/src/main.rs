mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use coevolve::abm::InfectionMode;
use coevolve::{Directionality, InfluenceGraph};

use config::{AbmBlock, Axis, ExperimentConfig, HeteroBlock, NodeValues, SweepBlock};
use error::CliError;

/// Behaviour/epidemic coevolution: regimes, mean-field runs, agent-based runs.
#[derive(Parser, Debug)]
#[command(name = "coevolve", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Classify the parameter regime and print the inequality ledger.
    Regime(Common),
    /// Closed-form equilibria with existence conditions and stability.
    Equilibria(Common),
    /// Integrate the planar mean-field system.
    MfSim {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Integrate the per-node mean-field system on an influence graph.
    MfHetero {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        hetero: HeteroArgs,
    },
    /// One seeded agent-based run.
    AbmSim {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        abm: AbmArgs,
    },
    /// Integrate, then look for a limit cycle on a Poincaré section.
    Cycle {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        cycle: CycleArgs,
    },
    /// Regime labels (and optionally cycle verdicts) over a 1-D or 2-D grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sweep: SweepArgs,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        cycle: CycleArgs,
    },
    /// Agent-based ensemble mean against the planar ODE.
    Compare {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        abm: AbmArgs,
    },
    /// Vector field, trajectories and equilibria for a phase portrait.
    Portrait {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        portrait: PortraitArgs,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory [default: $COEVOLVE_OUT, else ./coevolve-out].
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    zeta: Option<f64>,
    #[arg(long, value_enum)]
    directionality: Option<DirectionalityArg>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DirectionalityArg {
    Bidirectional,
    ActivatorInfects,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    x0: Option<f64>,
    #[arg(long)]
    y0: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    /// Sampling interval of the output grid.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    rtol: Option<f64>,
    #[arg(long)]
    atol: Option<f64>,
    #[arg(long)]
    max_step: Option<f64>,
    /// Integrator step budget.
    #[arg(long)]
    max_steps: Option<usize>,
}

#[derive(Args, Debug)]
struct GraphArgs {
    /// Complete influence graph on N agents.
    #[arg(long)]
    n: Option<usize>,
    /// Ring lattice instead, K neighbours on each side (needs --n).
    #[arg(long, requires = "n")]
    ring: Option<usize>,
}

#[derive(Args, Debug)]
struct HeteroArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long)]
    px0: Option<f64>,
    #[arg(long)]
    py0: Option<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Contact,
    Aggregated,
}

#[derive(Args, Debug)]
struct AbmArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long)]
    seed: Option<u64>,
    /// Refuse to run without an explicit seed.
    #[arg(long)]
    strict: bool,
    /// Replicates (compare only).
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Write the event log (default: on for at most 1000 agents).
    #[arg(long, overrides_with = "no_log")]
    log: bool,
    #[arg(long, overrides_with = "log")]
    no_log: bool,
    /// Recompute all rates after every event and compare.
    #[arg(long)]
    debug_checks: bool,
}

#[derive(Args, Debug)]
struct CycleArgs {
    #[arg(long)]
    tol_cycle: Option<f64>,
    #[arg(long)]
    period_rtol: Option<f64>,
    /// Fraction of the horizon discarded as transient.
    #[arg(long)]
    transient: Option<f64>,
    #[arg(long)]
    min_crossings: Option<usize>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// `name=min:max:steps`; give once or twice.
    #[arg(long, value_parser = Axis::parse)]
    axis: Vec<Axis>,
    /// Also run the cycle detector at every grid point.
    #[arg(long)]
    cycles: bool,
}

#[derive(Args, Debug)]
struct PortraitArgs {
    /// Field samples per axis.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    trajectories: Option<usize>,
    #[arg(long)]
    radius: Option<f64>,
    /// Circle centre of the initial conditions, `x,y`.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    center: Option<Vec<f64>>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if self.out.is_some() {
            cfg.out = self.out.clone();
        }
        let p = &mut cfg.params;
        for (name, v) in
            [("alpha", self.alpha), ("lambda", self.lambda), ("mu", self.mu), ("c", self.c), ("zeta", self.zeta)]
        {
            if let Some(v) = v {
                p.set(name, v)?;
            }
        }
        if let Some(d) = self.directionality {
            p.directionality = Some(match d {
                DirectionalityArg::Bidirectional => Directionality::Bidirectional,
                DirectionalityArg::ActivatorInfects => Directionality::ActivatorInfects,
            });
        }
        Ok(cfg)
    }
}

impl RunArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if self.x0.is_some() || self.y0.is_some() {
            let init = cfg.initial.get_or_insert_with(Default::default);
            init.x0 = self.x0.unwrap_or(init.x0);
            init.y0 = self.y0.unwrap_or(init.y0);
        }
        cfg.horizon = self.horizon.or(cfg.horizon);
        cfg.sample_dt = self.dt.or(cfg.sample_dt);
        if self.rtol.is_some() || self.atol.is_some() || self.max_step.is_some() || self.max_steps.is_some() {
            let tol = cfg.tolerances.get_or_insert_with(Default::default);
            tol.rtol = self.rtol.unwrap_or(tol.rtol);
            tol.atol = self.atol.unwrap_or(tol.atol);
            tol.max_step = self.max_step.or(tol.max_step);
            tol.max_steps = self.max_steps.or(tol.max_steps);
        }
    }
}

impl GraphArgs {
    fn graph(&self) -> Result<Option<InfluenceGraph>, CliError> {
        let Some(n) = self.n else { return Ok(None) };
        let g = match self.ring {
            Some(k) => InfluenceGraph::ring(n, k),
            None => InfluenceGraph::complete(n),
        };
        g.map(Some).map_err(|e| CliError::Config(format!("invalid graph: {e}")))
    }
}

impl HeteroArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) -> Result<(), CliError> {
        let graph = self.graph.graph()?;
        if graph.is_none() && self.px0.is_none() && self.py0.is_none() {
            return Ok(());
        }
        let block = match cfg.hetero.as_mut() {
            Some(b) => b,
            None => cfg.hetero.insert(HeteroBlock {
                graph: config::complete(100)?,
                activities: None,
                p_x0: None,
                p_y0: None,
            }),
        };
        if let Some(g) = graph {
            block.graph = g;
        }
        if let Some(v) = self.px0 {
            block.p_x0 = Some(NodeValues::Uniform(v));
        }
        if let Some(v) = self.py0 {
            block.p_y0 = Some(NodeValues::Uniform(v));
        }
        Ok(())
    }
}

impl AbmArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) -> Result<bool, CliError> {
        cfg.seed = self.seed.or(cfg.seed);
        let block = match cfg.abm.as_mut() {
            Some(b) => b,
            None => cfg.abm.insert(AbmBlock {
                graph: config::complete(1000)?,
                activities: None,
                mode: InfectionMode::default(),
                runs: 20,
                record_log: None,
                debug_checks: false,
            }),
        };
        if let Some(g) = self.graph.graph()? {
            block.graph = g;
        }
        if let Some(r) = self.runs {
            block.runs = r;
        }
        if let Some(m) = self.mode {
            block.mode = match m {
                ModeArg::Contact => InfectionMode::ContactEvents,
                ModeArg::Aggregated => InfectionMode::AggregatedRate,
            };
        }
        if self.log {
            block.record_log = Some(true);
        }
        if self.no_log {
            block.record_log = Some(false);
        }
        block.debug_checks |= self.debug_checks;
        Ok(self.strict)
    }
}

impl CycleArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if self.tol_cycle.is_none()
            && self.period_rtol.is_none()
            && self.transient.is_none()
            && self.min_crossings.is_none()
        {
            return;
        }
        let o = cfg.cycle.get_or_insert_with(Default::default);
        o.tol_cycle = self.tol_cycle.unwrap_or(o.tol_cycle);
        o.period_rtol = self.period_rtol.unwrap_or(o.period_rtol);
        o.transient_fraction = self.transient.unwrap_or(o.transient_fraction);
        o.min_crossings = self.min_crossings.unwrap_or(o.min_crossings);
    }
}

impl SweepArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if !self.axis.is_empty() {
            let cycles = cfg.sweep.as_ref().is_some_and(|s| s.cycles);
            cfg.sweep = Some(SweepBlock { axes: self.axis.clone(), cycles });
        }
        if self.cycles {
            if let Some(s) = cfg.sweep.as_mut() {
                s.cycles = true;
            }
        }
    }
}

impl PortraitArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        let p = cfg.portrait.get_or_insert_with(Default::default);
        p.grid = self.grid.unwrap_or(p.grid);
        p.trajectories = self.trajectories.unwrap_or(p.trajectories);
        p.radius = self.radius.unwrap_or(p.radius);
        if let Some(c) = &self.center {
            p.center = [c[0], c[1]];
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut strict = false;
    let (name, mut cfg) = match &cli.command {
        Command::Regime(common) => ("regime", common.load()?),
        Command::Equilibria(common) => ("equilibria", common.load()?),
        Command::MfSim { common, run } => {
            let mut cfg = common.load()?;
            run.apply(&mut cfg);
            ("mf-sim", cfg)
        }
        Command::MfHetero { common, run, hetero } => {
            let mut cfg = common.load()?;
            run.apply(&mut cfg);
            hetero.apply(&mut cfg)?;
            ("mf-hetero", cfg)
        }
        Command::AbmSim { common, run, abm } => {
            let mut cfg = common.load()?;
            run.apply(&mut cfg);
            strict = abm.apply(&mut cfg)?;
            ("abm-sim", cfg)
        }
        Command::Cycle { common, run, cycle } => {
            let mut cfg = common.load()?;
            run.apply(&mut cfg);
            cycle.apply(&mut cfg);
            ("cycle", cfg)
        }
        Command::Sweep { common, sweep, run, cycle } => {
            let mut cfg = common.load()?;
            sweep.apply(&mut cfg);
            run.apply(&mut cfg);
            cycle.apply(&mut cfg);
            ("sweep", cfg)
        }
        Command::Compare { common, run, abm } => {
            let mut cfg = common.load()?;
            run.apply(&mut cfg);
            strict = abm.apply(&mut cfg)?;
            ("compare", cfg)
        }
        Command::Portrait { common, run, portrait } => {
            let mut cfg = common.load()?;
            run.apply(&mut cfg);
            portrait.apply(&mut cfg);
            ("portrait", cfg)
        }
    };
    cfg.fill_defaults(name, strict)?;
    commands::execute(name, &cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
