use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use coevolve::abm::{ensemble, simulate, AbmConfig, InitialCondition};
use coevolve::cycles::{detect_cycle_with, CycleVerdict};
use coevolve::equilibria::{classify_regime, find_equilibria, EquilibriumError, RegimeReport, CONDITION_IDS};
use coevolve::meanfield::{integrate_hetero, integrate_planar_with, planar_rhs, ProbabilityState, Trajectory};
use coevolve::{MacroState, ModelParams};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, NodeValues, SIDECAR};
use crate::error::CliError;

/// `println!` that treats a closed stdout (`| head`) as done rather than a panic.
macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

struct Out {
    dir: PathBuf,
}

impl Out {
    fn create(dir: PathBuf) -> Result<Self, CliError> {
        fs::create_dir_all(&dir).map_err(|source| CliError::Output { path: dir.clone(), source })?;
        Ok(Self { dir })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Opens `name`, hands a buffered writer to `f`, flushes.
    fn write(&self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), CliError> {
        let path = self.path(name);
        let io = |source| CliError::Output { path: path.clone(), source };
        let mut w = BufWriter::new(File::create(&path).map_err(io)?);
        f(&mut w).map_err(io)?;
        w.flush().map_err(io)
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)
        })
    }
}

pub fn execute(command: &str, cfg: &ExperimentConfig) -> Result<(), CliError> {
    let out = Out::create(cfg.out_dir())?;
    out.json(SIDECAR, cfg)?;
    match command {
        "regime" => regime(cfg, &out),
        "equilibria" => equilibria(cfg, &out),
        "mf-sim" => mf_sim(cfg, &out),
        "mf-hetero" => mf_hetero(cfg, &out),
        "abm-sim" => abm_sim(cfg, &out),
        "cycle" => cycle(cfg, &out),
        "sweep" => sweep(cfg, &out),
        "compare" => compare(cfg, &out),
        "portrait" => portrait(cfg, &out),
        other => Err(CliError::Config(format!("unknown command `{other}`"))),
    }
}

fn regime(cfg: &ExperimentConfig, out: &Out) -> Result<(), CliError> {
    let report = classify_regime(&cfg.params()?);
    print_ledger(&report);
    out.json("regime.json", &report)
}

fn print_ledger(r: &RegimeReport) {
    say!("regime: {}", r.label);
    say!("{:<26} {:>14} {:>14}  {:<5}  source", "condition", "lhs", "rhs", "ok");
    for c in &r.conditions {
        say!("{:<26} {:>14.6} {:>14.6}  {:<5}  {}", c.name, c.lhs, c.rhs, c.satisfied, c.source);
    }
    if r.global_claim {
        say!("global: the label holds for every interior initial condition");
    }
}

fn equilibria(cfg: &ExperimentConfig, out: &Out) -> Result<(), CliError> {
    let reports = find_equilibria(&cfg.params()?).map_err(eq_err)?;
    let text = serde_json::to_string_pretty(&reports).map_err(|e| CliError::Numerical(e.to_string()))?;
    say!("{text}");
    out.json("equilibria.json", &reports)
}

fn eq_err(e: EquilibriumError) -> CliError {
    CliError::Config(e.to_string())
}

fn planar(cfg: &ExperimentConfig, p: &ModelParams, s0: MacroState) -> Result<Trajectory, CliError> {
    Ok(integrate_planar_with(s0, p, cfg.horizon()?, &cfg.ode_options()?)?)
}

fn start(cfg: &ExperimentConfig) -> MacroState {
    let i = cfg.initial();
    MacroState::new(i.x0, i.y0)
}

fn mf_sim(cfg: &ExperimentConfig, out: &Out) -> Result<(), CliError> {
    let traj = planar(cfg, &cfg.params()?, start(cfg))?;
    out.write("trajectory.csv", |w| traj.write_csv(w))
}

fn mf_hetero(cfg: &ExperimentConfig, out: &Out) -> Result<(), CliError> {
    let p = cfg.params()?;
    let block = cfg.hetero.as_ref().ok_or_else(|| CliError::Config("missing hetero block".into()))?;
    let n = block.graph.order();
    let init = cfg.initial();
    let expand = |v: &Option<NodeValues>, fallback: f64, what: &str| match v {
        Some(v) => v.expand(n, what),
        None => Ok(vec![fallback; n]),
    };
    let activities = expand(&block.activities, p.alpha(), "activities")?;
    let ps0 =
        ProbabilityState { p_x: expand(&block.p_x0, init.x0, "p_x0")?, p_y: expand(&block.p_y0, init.y0, "p_y0")? };
    let sol = integrate_hetero(&ps0, &block.graph, &activities, &p, cfg.horizon()?, &cfg.ode_options()?)?;
    out.write("nodes.csv", |w| sol.write_node_csv(w))?;
    out.write("trajectory.csv", |w| sol.macro_trajectory.write_csv(w))
}

fn abm_config(cfg: &ExperimentConfig) -> Result<(AbmConfig, usize), CliError> {
    let block = cfg.abm.as_ref().ok_or_else(|| CliError::Config("missing abm block".into()))?;
    let init = cfg.initial();
    let c = AbmConfig {
        params: cfg.params()?,
        graph: block.graph.clone(),
        activities: block.activities.clone(),
        initial: InitialCondition::Fractions { x0: init.x0, y0: init.y0 },
        horizon: cfg.horizon()?,
        sample_dt: cfg.sample_dt()?,
        seed: cfg.seed(),
        infection_mode: block.mode,
        record_log: block.record_log,
        debug_checks: block.debug_checks,
    };
    c.validate()?;
    Ok((c, block.runs))
}

#[derive(Serialize)]
struct AbmSummary {
    seed: u64,
    events: u64,
    extinction_time: Option<f64>,
    final_state: MacroState,
}

fn abm_sim(cfg: &ExperimentConfig, out: &Out) -> Result<(), CliError> {
    let (c, _) = abm_config(cfg)?;
    let run = simulate(&c)?;
    out.write("trajectory.csv", |w| run.trajectory.write_csv(w))?;
    if let Some(log) = &run.log {
        out.write("events.csv", |w| log.write_csv(w))?;
    }
    let summary = AbmSummary {
        seed: c.seed,
        events: run.events,
        extinction_time: run.extinction_time,
        final_state: run.trajectory.final_state(),
    };
    out.json("summary.json", &summary)
}

fn cycle(cfg: &ExperimentConfig, out: &Out) -> Result<(), CliError> {
    let p = cfg.params()?;
    let traj = planar(cfg, &p, start(cfg))?;
    let report = detect_cycle_with(&traj, &p, &cfg.cycle.unwrap_or_default())?;
    match &report.verdict {
        CycleVerdict::LimitCycle { period, amplitude_x, amplitude_y, .. } => {
            say!("LimitCycle period {period:.6} amplitude ({amplitude_x:.6}, {amplitude_y:.6})")
        }
        CycleVerdict::ConvergedToPoint { point } => say!("ConvergedToPoint ({:.6}, {:.6})", point.x, point.y),
        CycleVerdict::Undecided => say!("Undecided"),
    }
    out.write("trajectory.csv", |w| traj.write_csv(w))?;
    out.write("crossings.csv", |w| report.write_crossings_csv(w))?;
    out.json("cycle.json", &report)
}

fn sweep(cfg: &ExperimentConfig, out: &Out) -> Result<(), CliError> {
    let block = cfg.sweep.as_ref().ok_or_else(|| CliError::Config("missing sweep block".into()))?;
    let axes = &block.axes;
    let grid: Vec<Vec<f64>> = match axes.as_slice() {
        [a] => a.values().into_iter().map(|v| vec![v]).collect(),
        [a, b] => {
            let bs = b.values();
            a.values().into_iter().flat_map(|u| bs.iter().map(move |&v| vec![u, v])).collect()
        }
        _ => return Err(CliError::Config(format!("sweep takes 1 or 2 axes (got {})", axes.len()))),
    };
    let points = grid
        .iter()
        .map(|vals| {
            let mut pb = cfg.params.clone();
            for (a, &v) in axes.iter().zip(vals) {
                pb.set(&a.param, v)?;
            }
            pb.build()
        })
        .collect::<Result<Vec<_>, _>>()?;

    let rows = points
        .par_iter()
        .zip(&grid)
        .map(|(p, vals)| sweep_row(cfg, p, vals, block.cycles))
        .collect::<Result<Vec<_>, _>>()?;

    let mut header: Vec<String> = axes.iter().map(|a| a.param.clone()).collect();
    header.push("label".into());
    for id in CONDITION_IDS {
        header.extend([format!("{id}_lhs"), format!("{id}_rhs"), format!("{id}_ok")]);
    }
    if block.cycles {
        header.extend(["cycle_verdict".into(), "cycle_period".into()]);
    }
    out.write("sweep.csv", |w| {
        writeln!(w, "{}", header.join(","))?;
        for r in &rows {
            writeln!(w, "{r}")?;
        }
        Ok(())
    })?;
    say!("{} grid points written to {}", rows.len(), out.path("sweep.csv").display());
    Ok(())
}

fn sweep_row(cfg: &ExperimentConfig, p: &ModelParams, vals: &[f64], cycles: bool) -> Result<String, CliError> {
    let r = classify_regime(p);
    let mut fields: Vec<String> = vals.iter().map(|v| v.to_string()).collect();
    fields.push(r.label.to_string());
    for id in CONDITION_IDS {
        let c = r.condition(id).ok_or_else(|| CliError::Numerical(format!("condition {id} missing")))?;
        fields.extend([c.lhs.to_string(), c.rhs.to_string(), c.satisfied.to_string()]);
    }
    if cycles {
        let (verdict, period) = if p.above_threshold() {
            let traj = planar(cfg, p, start(cfg))?;
            match detect_cycle_with(&traj, p, &cfg.cycle.unwrap_or_default())?.verdict {
                CycleVerdict::LimitCycle { period, .. } => ("LimitCycle", period.to_string()),
                CycleVerdict::ConvergedToPoint { .. } => ("ConvergedToPoint", String::new()),
                CycleVerdict::Undecided => ("Undecided", String::new()),
            }
        } else {
            ("BelowThreshold", String::new())
        };
        fields.extend([verdict.to_string(), period]);
    }
    Ok(fields.join(","))
}

#[derive(Serialize)]
struct CompareSummary {
    runs: usize,
    first_seed: u64,
    sup_gap: f64,
    total_events: u64,
}

fn compare(cfg: &ExperimentConfig, out: &Out) -> Result<(), CliError> {
    let (c, runs) = abm_config(cfg)?;
    let ens = ensemble(&c, runs)?;
    let ode = planar(cfg, &c.params, start(cfg))?;
    let mean = ens.mean_trajectory(&c);
    let sup_gap = mean.sup_gap(&ode)?;
    out.write("mean.csv", |w| mean.write_csv(w))?;
    let std = Trajectory { states: ens.std.clone(), ..mean.clone() };
    out.write("std.csv", |w| std.write_csv(w))?;
    out.write("ode.csv", |w| ode.write_csv(w))?;
    out.write("gap.csv", |w| {
        writeln!(w, "t,gap_x,gap_y,gap")?;
        for ((t, a), b) in mean.iter().zip(&ode.states) {
            let (gx, gy) = ((a.x - b.x).abs(), (a.y - b.y).abs());
            writeln!(w, "{},{},{},{}", t, gx, gy, gx.max(gy))?;
        }
        Ok(())
    })?;
    say!("sup-norm gap {sup_gap:.6} over {runs} runs");
    out.json(
        "summary.json",
        &CompareSummary { runs, first_seed: c.seed, sup_gap, total_events: ens.events.iter().sum() },
    )
}

fn portrait(cfg: &ExperimentConfig, out: &Out) -> Result<(), CliError> {
    let p = cfg.params()?;
    let spec = cfg.portrait.clone().unwrap_or_default();
    if spec.grid < 2 || spec.trajectories == 0 || !(spec.radius.is_finite() && spec.radius >= 0.0) {
        return Err(CliError::Config(format!(
            "portrait needs grid >= 2, trajectories >= 1, radius >= 0 (got {}, {}, {})",
            spec.grid, spec.trajectories, spec.radius
        )));
    }
    let g = spec.grid;
    out.write("field.csv", |w| {
        writeln!(w, "x,y,dx,dy")?;
        for i in 0..g {
            for j in 0..g {
                let s = MacroState::new(i as f64 / (g - 1) as f64, j as f64 / (g - 1) as f64);
                let (dx, dy) = planar_rhs(s, &p);
                // adding 0 turns -0 on the invariant edges into 0
                writeln!(w, "{},{},{},{}", s.x, s.y, dx + 0.0, dy + 0.0)?;
            }
        }
        Ok(())
    })?;

    let m = spec.trajectories;
    let trajs = (0..m)
        .into_par_iter()
        .map(|k| {
            let th = std::f64::consts::TAU * k as f64 / m as f64;
            let s0 = MacroState::new(
                (spec.center[0] + spec.radius * th.cos()).clamp(0.0, 1.0),
                (spec.center[1] + spec.radius * th.sin()).clamp(0.0, 1.0),
            );
            planar(cfg, &p, s0)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let width = (m - 1).to_string().len();
    for (k, t) in trajs.iter().enumerate() {
        out.write(&format!("trajectory_{k:0width$}.csv"), |w| t.write_csv(w))?;
    }

    let eq = find_equilibria(&p).map_err(eq_err)?;
    out.write("equilibria.csv", |w| {
        writeln!(w, "kind,x,y,stability,marker")?;
        for e in eq.iter().filter(|e| e.exists) {
            let (Some(s), Some(st)) = (e.point, e.stability) else { continue };
            let kind = serde_json::to_value(e.kind).map_err(std::io::Error::other)?;
            let stab = serde_json::to_value(st).map_err(std::io::Error::other)?;
            writeln!(
                w,
                "{},{},{},{},{}",
                kind.as_str().unwrap_or(""),
                s.x,
                s.y,
                stab.as_str().unwrap_or(""),
                st.marker()
            )?;
        }
        Ok(())
    })
}
