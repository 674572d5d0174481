use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use super::population::{reference_rates, Population};
use super::sumtree::SumTree;
use super::{AbmConfig, AbmError, Event, EventKind, EventLog, InfectionMode, InitialCondition};
use crate::graph::InfluenceGraph;
use crate::meanfield::Trajectory;
use crate::model::{Directionality, ModelParams};
use crate::ode::StepStats;

#[derive(Debug, Clone)]
pub struct AbmRun {
    /// `(x, y)` at `k * sample_dt` below the horizon, plus the horizon itself.
    pub trajectory: Trajectory,
    pub log: Option<EventLog>,
    pub events: u64,
    /// First time the last infected agent recovered, if that happened.
    pub extinction_time: Option<f64>,
    pub final_population: Population,
}

/// Runs one realisation.
///
/// Event selection order is fixed: recovery, behaviour switch, then infection
/// (or contact). Per event the generator yields one draw for the waiting time,
/// one for the event and, for contacts, one for the partner and one for
/// transmission when the pair qualifies. Contacts are not generated while
/// nobody is infected since they cannot change the state.
pub fn simulate(cfg: &AbmConfig) -> Result<AbmRun, AbmError> {
    cfg.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let pop = initial_population(cfg, &mut rng)?;
    let mut eng = Engine::new(cfg, pop, rng)?;
    eng.run()
}

pub(crate) fn initial_population(cfg: &AbmConfig, rng: &mut impl Rng) -> Result<Population, AbmError> {
    let n = cfg.n();
    let activities = cfg.activities.clone().unwrap_or_else(|| vec![cfg.params.alpha(); n]);
    let (protected, infected) = match &cfg.initial {
        InitialCondition::Fractions { x0, y0 } => {
            let mut prot = Vec::with_capacity(n);
            let mut inf = Vec::with_capacity(n);
            for _ in 0..n {
                prot.push(rng.gen::<f64>() < *x0);
                inf.push(rng.gen::<f64>() < *y0);
            }
            (prot, inf)
        }
        InitialCondition::Explicit { protected, infected } => (protected.clone(), infected.clone()),
    };
    Population::new(protected, infected, activities)
}

enum SwitchBook {
    /// Closed-form rates on the implicit complete graph; leaves are `[1 - x_i, x_i]`.
    Complete,
    /// Leaves are `[base_i, coef_i]` with rate `base_i + zeta y coef_i`.
    Graph {
        /// Number of protected neighbours of each node.
        adopting: Vec<usize>,
        incoming: Vec<Vec<usize>>,
        stamp: Vec<u64>,
        epoch: u64,
    },
}

struct Engine<'a> {
    cfg: &'a AbmConfig,
    p: ModelParams,
    pop: Population,
    rng: ChaCha12Rng,
    n: usize,
    /// `[y_i, a_i y_i]`.
    recovery: SumTree<2>,
    switch: SumTree<2>,
    book: SwitchBook,
    /// `[a_i e_i, e_i]` with `e_i` = susceptible and unprotected (aggregated mode).
    infection: Option<SumTree<2>>,
    /// Cumulative activities (contact mode).
    activity_cdf: Vec<f64>,
    t: f64,
    events: u64,
    log: Option<Vec<Event>>,
    extinction_time: Option<f64>,
}

impl<'a> Engine<'a> {
    fn new(cfg: &'a AbmConfig, pop: Population, rng: ChaCha12Rng) -> Result<Self, AbmError> {
        let n = pop.len();
        if cfg.graph.order() != n {
            return Err(AbmError::Config(format!("graph has {} nodes, population {n}", cfg.graph.order())));
        }
        let book = match &cfg.graph {
            InfluenceGraph::Complete { .. } => SwitchBook::Complete,
            g => SwitchBook::Graph {
                adopting: (0..n).map(|i| g.neighbours(i).filter(|&j| pop.is_protected(j)).count()).collect(),
                incoming: g.reverse(),
                stamp: vec![0; n],
                epoch: 0,
            },
        };
        let mut eng = Self {
            cfg,
            p: cfg.params,
            rng,
            n,
            recovery: SumTree::new(n),
            switch: SumTree::new(n),
            book,
            infection: None,
            activity_cdf: Vec::new(),
            t: 0.0,
            events: 0,
            log: cfg.logs_events().then(Vec::new),
            extinction_time: None,
            pop,
        };
        let rec: Vec<[f64; 2]> = (0..n).map(|i| eng.recovery_leaf(i)).collect();
        eng.recovery = SumTree::from_leaves(&rec);
        let sw: Vec<[f64; 2]> = (0..n).map(|i| eng.switch_leaf(i)).collect();
        eng.switch = SumTree::from_leaves(&sw);
        match cfg.infection_mode {
            InfectionMode::AggregatedRate => {
                let inf: Vec<[f64; 2]> = (0..n).map(|i| eng.infection_leaf(i)).collect();
                eng.infection = Some(SumTree::from_leaves(&inf));
            }
            InfectionMode::ContactEvents => {
                let mut acc = 0.0;
                eng.activity_cdf = eng
                    .pop
                    .activities()
                    .iter()
                    .map(|a| {
                        acc += a;
                        acc
                    })
                    .collect();
            }
        }
        Ok(eng)
    }

    fn recovery_leaf(&self, i: usize) -> [f64; 2] {
        if self.pop.is_infected(i) {
            [1.0, self.pop.activity(i)]
        } else {
            [0.0, 0.0]
        }
    }

    fn infection_leaf(&self, i: usize) -> [f64; 2] {
        if self.pop.exposed(i) {
            [self.pop.activity(i), 1.0]
        } else {
            [0.0, 0.0]
        }
    }

    fn switch_leaf(&self, i: usize) -> [f64; 2] {
        match &self.book {
            SwitchBook::Complete => {
                if self.pop.is_protected(i) {
                    [0.0, 1.0]
                } else {
                    [1.0, 0.0]
                }
            }
            SwitchBook::Graph { adopting, .. } => {
                let g = &self.cfg.graph;
                let d = g.degree(i) as f64;
                if self.pop.is_protected(i) {
                    // sum over unprotected neighbours of their pi0 minus c
                    let mut s = 0.0;
                    for j in g.neighbours(i).filter(|&j| !self.pop.is_protected(j)) {
                        s += 1.0 - adopting[j] as f64 / g.degree(j) as f64;
                    }
                    let unprotected = d - adopting[i] as f64;
                    [(s + self.p.c() * unprotected) / d, 0.0]
                } else {
                    let mut s = 0.0;
                    for j in g.neighbours(i).filter(|&j| self.pop.is_protected(j)) {
                        s += adopting[j] as f64 / g.degree(j) as f64;
                    }
                    [s / d, adopting[i] as f64 / d]
                }
            }
        }
    }

    fn switch_functional(&self) -> [f64; 2] {
        let y = self.pop.macro_state().y;
        match self.book {
            SwitchBook::Complete => {
                let x = self.pop.macro_state().x;
                [x * (x + self.p.zeta() * y), (1.0 - x) * (1.0 - x + self.p.c())]
            }
            SwitchBook::Graph { .. } => [1.0, self.p.zeta() * y],
        }
    }

    fn infection_functional(&self) -> [f64; 2] {
        let k = self.p.lambda() / (self.n as f64 - 1.0);
        let own = match self.p.directionality() {
            Directionality::Bidirectional => k * self.pop.infected_count() as f64,
            Directionality::ActivatorInfects => 0.0,
        };
        [own, k * self.recovery.total()[1]]
    }

    fn check_rate(&self, what: &str, value: f64) -> Result<f64, AbmError> {
        if value.is_finite() && value >= 0.0 {
            Ok(value)
        } else {
            Err(AbmError::Rate { what: what.to_string(), value, t: self.t })
        }
    }

    /// Category totals `(recovery, switch, infection or contact)`.
    fn totals(&self) -> Result<[f64; 3], AbmError> {
        let rec = self.check_rate("recovery", self.p.mu() * self.recovery.total()[0])?;
        let sw = self.check_rate("behaviour switching", self.switch.weight(&self.switch_functional()))?;
        let inf = if self.pop.infected_count() == 0 {
            0.0
        } else {
            match &self.infection {
                Some(tree) => self.check_rate("infection", tree.weight(&self.infection_functional()))?,
                None => self.check_rate("contact", *self.activity_cdf.last().unwrap_or(&0.0))?,
            }
        };
        Ok([rec, sw, inf])
    }

    fn push(&mut self, kind: EventKind, actor: usize, counterpart: Option<usize>) {
        if let Some(log) = self.log.as_mut() {
            log.push(Event { t: self.t, kind, actor, counterpart });
        }
    }

    fn set_infected(&mut self, i: usize, value: bool) {
        self.pop.set_infected(i, value);
        self.recovery.set(i, self.recovery_leaf(i));
        let leaf = self.infection_leaf(i);
        if let Some(tree) = self.infection.as_mut() {
            tree.set(i, leaf);
        }
        if !value && self.pop.infected_count() == 0 && self.extinction_time.is_none() {
            self.extinction_time = Some(self.t);
        }
    }

    fn flip_behaviour(&mut self, k: usize) {
        let now = !self.pop.is_protected(k);
        self.pop.set_protected(k, now);
        let leaf = self.infection_leaf(k);
        if let Some(tree) = self.infection.as_mut() {
            tree.set(k, leaf);
        }
        let dirty: Vec<usize> = match &mut self.book {
            SwitchBook::Complete => vec![k],
            SwitchBook::Graph { adopting, incoming, stamp, epoch } => {
                // k's behaviour enters A_j for j in in(k), and A_j enters the
                // leaves of in(j); k's own leaf changes type
                *epoch += 1;
                let mut dirty = Vec::new();
                let mut mark = |i: usize, dirty: &mut Vec<usize>| {
                    if stamp[i] != *epoch {
                        stamp[i] = *epoch;
                        dirty.push(i);
                    }
                };
                mark(k, &mut dirty);
                for &j in &incoming[k] {
                    if now {
                        adopting[j] += 1;
                    } else {
                        adopting[j] -= 1;
                    }
                    mark(j, &mut dirty);
                    for &i in &incoming[j] {
                        mark(i, &mut dirty);
                    }
                }
                dirty
            }
        };
        for i in dirty {
            let leaf = self.switch_leaf(i);
            self.switch.set(i, leaf);
        }
    }

    /// Per-agent rates from the incremental structures, in the layout of
    /// [`reference_rates`].
    fn incremental_rates(&self) -> [Vec<f64>; 3] {
        let fsw = self.switch_functional();
        let finf = self.infection_functional();
        let dot = |w: &[f64; 2], v: [f64; 2]| w[0] * v[0] + w[1] * v[1];
        let rec = (0..self.n).map(|i| self.p.mu() * self.recovery.leaf(i)[0]).collect();
        let sw = (0..self.n).map(|i| dot(&fsw, self.switch.leaf(i))).collect();
        let inf = (0..self.n)
            .map(|i| match &self.infection {
                Some(tree) => dot(&finf, tree.leaf(i)),
                // contact mode: the same aggregate, assembled from scratch
                None => super::population::infection_rate(&self.pop, i, &self.p),
            })
            .collect();
        [rec, sw, inf]
    }

    fn debug_check(&self) -> Result<(), AbmError> {
        let reference = reference_rates(&self.cfg.graph, &self.pop, &self.p)?;
        let got = self.incremental_rates();
        for (name, a, b) in [
            ("recovery", &got[0], &reference.recovery),
            ("switch", &got[1], &reference.switch),
            ("infection", &got[2], &reference.infection),
        ] {
            for (i, (x, y)) in a.iter().zip(b).enumerate() {
                if (x - y).abs() > 1e-9 * x.abs().max(y.abs()).max(1.0) {
                    return Err(AbmError::Inconsistent(format!(
                        "{name} rate of agent {i}: incremental {x} vs recomputed {y} at t = {}",
                        self.t
                    )));
                }
            }
        }
        Ok(())
    }

    fn step(&mut self, totals: [f64; 3]) -> Result<(), AbmError> {
        let total: f64 = totals.iter().sum();
        let mut v = self.rng.gen::<f64>() * total;
        // rounding can push v past the last non-empty category; it then takes the draw
        let last = totals.iter().rposition(|&r| r > 0.0).expect("positive total");
        let mut cat = 0;
        while cat < last && v >= totals[cat] {
            v -= totals[cat];
            cat += 1;
        }
        let v = v.min(totals[cat]);
        if cat == 0 {
            let i = self.recovery.sample(&[1.0, 0.0], v / self.p.mu());
            self.set_infected(i, false);
            self.push(EventKind::Recovery, i, None);
            return Ok(());
        }
        if cat == 1 {
            let i = self.switch.sample(&self.switch_functional(), v);
            let kind = if self.pop.is_protected(i) { EventKind::Drop } else { EventKind::Adopt };
            self.flip_behaviour(i);
            self.push(kind, i, None);
            return Ok(());
        }
        match &self.infection {
            Some(tree) => {
                let i = tree.sample(&self.infection_functional(), v);
                if !self.pop.exposed(i) {
                    return Err(AbmError::Inconsistent(format!("selected agent {i} cannot be infected")));
                }
                self.set_infected(i, true);
                self.push(EventKind::Infection, i, None);
            }
            None => {
                let i = self.activity_cdf.partition_point(|&c| c <= v).min(self.n - 1);
                let k = ((self.rng.gen::<f64>() * (self.n - 1) as f64) as usize).min(self.n - 2);
                let j = if k >= i { k + 1 } else { k };
                self.push(EventKind::Contact, i, Some(j));
                let target = match self.p.directionality() {
                    _ if self.pop.is_infected(i) && self.pop.exposed(j) => Some((j, i)),
                    Directionality::Bidirectional if self.pop.exposed(i) && self.pop.is_infected(j) => Some((i, j)),
                    _ => None,
                };
                if let Some((s, src)) = target {
                    if self.rng.gen::<f64>() < self.p.lambda() {
                        self.set_infected(s, true);
                        self.push(EventKind::Infection, s, Some(src));
                    }
                }
            }
        }
        Ok(())
    }

    fn run(&mut self) -> Result<AbmRun, AbmError> {
        let horizon = self.cfg.horizon;
        let dt = self.cfg.sample_dt;
        let mut times = Vec::new();
        let mut states = Vec::new();
        let mut next_sample = 0usize;
        let sample_time = |k: usize| {
            let ts = dt * k as f64;
            if ts < horizon {
                Some(ts)
            } else {
                None
            }
        };
        if self.pop.infected_count() == 0 {
            self.extinction_time = Some(0.0);
        }
        if self.cfg.debug_checks {
            self.debug_check()?;
        }
        loop {
            let totals = self.totals()?;
            let total: f64 = totals.iter().sum();
            let t_next = if total > 0.0 {
                let u = self.rng.gen::<f64>();
                self.t + -(1.0 - u).ln() / total
            } else {
                f64::INFINITY
            };
            while let Some(ts) = sample_time(next_sample) {
                if ts >= t_next {
                    break;
                }
                self.pop.check_counters()?;
                times.push(ts);
                states.push(self.pop.macro_state());
                next_sample += 1;
            }
            if t_next >= horizon {
                break;
            }
            self.t = t_next;
            self.step(totals)?;
            self.events += 1;
            if self.cfg.debug_checks {
                self.debug_check()?;
            }
        }
        self.pop.check_counters()?;
        times.push(horizon);
        states.push(self.pop.macro_state());
        let trajectory = Trajectory {
            times,
            states,
            params: self.p,
            meta: StepStats { accepted: self.events as usize, ..StepStats::default() },
        };
        Ok(AbmRun {
            trajectory,
            log: self.log.take().map(|events| EventLog { events }),
            events: self.events,
            extinction_time: self.extinction_time,
            final_population: self.pop.clone(),
        })
    }
}
