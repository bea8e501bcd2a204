//! Time-slotted simulation of one network and the strategy comparison sweep.
//!
//! Randomness is drawn from ChaCha8 generators seeded with the trial seed.
//! User placement uses stream 0 and the session workload uses stream 1, so
//! for a given seed every strategy sees the same users and the same session
//! arrivals, destinations and durations. Trial `k` of a sweep uses seed
//! `base_seed + k`.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Geometric;
use rayon::prelude::*;
use thiserror::Error;

use crate::hexgeom::{CellId, GeomError, HexGrid, Point, RelayId};
use crate::netmodel::{
    choose_among, Choice, MobileUser, MuId, PowerModel, RelayStation, Route, Session, SessionId,
    Strategy,
};

/// Every slot is one time unit.
pub const DT: f64 = 1.0;

const PLACEMENT_STREAM: u64 = 0;
const WORKLOAD_STREAM: u64 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Geometry(#[from] GeomError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_cells: usize,
    pub n_mus: usize,
    /// Placement weight of the central cell; every other cell weighs 1.
    pub hot_cell_weight: f64,
    /// Chance per slot that an idle user opens a session.
    pub session_start_prob: f64,
    /// Mean of the geometric session length, in slots.
    pub mean_session_len: f64,
    /// Data units per slot per flowing session.
    pub rate: f64,
    pub horizon: u64,
    pub strategy: Strategy,
    pub seed: u64,
    pub eps: f64,
    pub p_idle: f64,
    pub p_session: f64,
    pub initial_energy: f64,
    pub capacity: u32,
    /// Cell circumradius. Only scales coordinates.
    pub radius: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_cells: 20,
            n_mus: 400,
            hot_cell_weight: 5.0,
            session_start_prob: 0.05,
            mean_session_len: 20.0,
            rate: 1.0,
            horizon: 2000,
            strategy: Strategy::EbByMu,
            seed: 42,
            eps: crate::predictor::DEFAULT_EPS,
            p_idle: 0.1,
            p_session: 1.0,
            initial_energy: 16_000.0,
            capacity: 8,
            radius: 1.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidArgument(msg));
        if self.n_cells == 0 {
            return bad("n_cells must be at least 1".into());
        }
        if !(self.hot_cell_weight >= 1.0 && self.hot_cell_weight.is_finite()) {
            return bad(format!("hot_cell_weight must be >= 1, got {}", self.hot_cell_weight));
        }
        if !(0.0..=1.0).contains(&self.session_start_prob) {
            return bad(format!(
                "session_start_prob must be in [0, 1], got {}",
                self.session_start_prob
            ));
        }
        if !(self.mean_session_len >= 1.0 && self.mean_session_len.is_finite()) {
            return bad(format!(
                "mean_session_len must be >= 1, got {}",
                self.mean_session_len
            ));
        }
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return bad(format!("rate must be positive, got {}", self.rate));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return bad(format!("eps must be positive, got {}", self.eps));
        }
        if !(self.p_idle >= 0.0 && self.p_idle.is_finite()) {
            return bad(format!("p_idle must be >= 0, got {}", self.p_idle));
        }
        if !(self.p_session >= 0.0 && self.p_session.is_finite()) {
            return bad(format!("p_session must be >= 0, got {}", self.p_session));
        }
        if !(self.initial_energy > 0.0 && self.initial_energy.is_finite()) {
            return bad(format!(
                "initial_energy must be positive, got {}",
                self.initial_energy
            ));
        }
        if self.capacity == 0 {
            return bad("capacity must be at least 1".into());
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return bad(format!("radius must be positive, got {}", self.radius));
        }
        Ok(())
    }

    pub fn power(&self) -> PowerModel {
        PowerModel {
            p_idle: self.p_idle,
            p_session: self.p_session,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    /// Delivered data units per slot over the whole horizon.
    pub aggregate_throughput: f64,
    /// Death slot per relay, or the horizon for survivors.
    pub relay_lifetimes: Vec<u64>,
    pub avg_lifetime: f64,
    /// Sessions blocked for at least one slot.
    pub blocked_sessions: u64,
    pub delivered: f64,
    pub sessions_started: u64,
}

/// Uniform point strictly inside `cell`'s hexagon, by rejection from its
/// bounding box.
pub fn sample_in_cell<R: Rng + ?Sized>(grid: &HexGrid, cell: CellId, rng: &mut R) -> Point {
    let c = grid.cell(cell);
    let (lo, hi) = c.bounding_box();
    loop {
        let p = Point::new(
            rng.random_range(lo.x..hi.x),
            rng.random_range(lo.y..hi.y),
        );
        if c.contains_strictly(p) {
            return p;
        }
    }
}

/// Scatters `n_mus` users: a cell is drawn with weight `hot_cell_weight` for
/// the central cell (id 0) and 1 for the rest, then a uniform position
/// inside it.
pub fn place_users<R: Rng + ?Sized>(
    grid: &HexGrid,
    n_mus: usize,
    hot_cell_weight: f64,
    rng: &mut R,
) -> Vec<MobileUser> {
    let weights: Vec<f64> = (0..grid.cells.len())
        .map(|i| if i == 0 { hot_cell_weight } else { 1.0 })
        .collect();
    let pick = WeightedIndex::new(&weights).expect("weights are positive");
    (0..n_mus)
        .map(|i| {
            let cell = CellId(pick.sample(rng));
            MobileUser {
                id: MuId(i),
                position: sample_in_cell(grid, cell, rng),
                cell_id: cell,
            }
        })
        .collect()
}

/// Mutable state of one trial.
#[derive(Debug, Clone)]
pub struct World {
    pub config: SimConfig,
    pub grid: HexGrid,
    pub relays: Vec<RelayStation>,
    pub users: Vec<MobileUser>,
    pub sessions: Vec<Session>,
    /// Slots completed so far.
    pub slot: u64,
    busy: Vec<bool>,
    rng: ChaCha8Rng,
    duration: Geometric,
    next_session: u64,
    power: PowerModel,
    delivered: f64,
    completed_delivered: f64,
    blocked_sessions: u64,
    sessions_started: u64,
}

impl World {
    /// Builds the grid and relays and places users from the config's seed.
    pub fn new(config: SimConfig) -> Result<World, SimError> {
        config.validate()?;
        let grid = HexGrid::build(config.n_cells, config.radius)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(PLACEMENT_STREAM);
        let users = place_users(&grid, config.n_mus, config.hot_cell_weight, &mut rng);
        Self::assemble(config, grid, users)
    }

    /// Like [`World::new`] but with caller-supplied users. `config.n_mus`
    /// is overwritten with their count.
    pub fn with_users(mut config: SimConfig, users: Vec<MobileUser>) -> Result<World, SimError> {
        config.n_mus = users.len();
        config.validate()?;
        let grid = HexGrid::build(config.n_cells, config.radius)?;
        for (i, u) in users.iter().enumerate() {
            if u.id != MuId(i) {
                return Err(SimError::InvalidArgument(format!(
                    "user at index {i} has id {}",
                    u.id
                )));
            }
            if grid.cell_of(u.position) != Some(u.cell_id)
                || !grid.cell(u.cell_id).contains_strictly(u.position)
            {
                return Err(SimError::InvalidArgument(format!(
                    "user {} is not strictly inside cell {}",
                    u.id, u.cell_id
                )));
            }
        }
        Self::assemble(config, grid, users)
    }

    fn assemble(config: SimConfig, grid: HexGrid, users: Vec<MobileUser>) -> Result<World, SimError> {
        let relays = grid
            .edges
            .iter()
            .map(|e| {
                RelayStation::new(e.relay_id, e.id, config.initial_energy, config.capacity, config.eps)
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(WORKLOAD_STREAM);
        let duration = Geometric::new(1.0 / config.mean_session_len)
            .map_err(|e| SimError::InvalidArgument(format!("mean_session_len: {e}")))?;
        Ok(World {
            busy: vec![false; users.len()],
            power: config.power(),
            config,
            grid,
            relays,
            users,
            sessions: Vec::new(),
            slot: 0,
            rng,
            duration,
            next_session: 0,
            delivered: 0.0,
            completed_delivered: 0.0,
            blocked_sessions: 0,
            sessions_started: 0,
        })
    }

    /// Opens a session from `src` to `dst` lasting `slots` slots, bypassing
    /// the random workload. Relay selection happens on the next slot.
    pub fn open_session(&mut self, src: MuId, dst: MuId, slots: u32) -> Result<SessionId, SimError> {
        if src == dst || src.0 >= self.users.len() || dst.0 >= self.users.len() {
            return Err(SimError::InvalidArgument(format!(
                "bad session endpoints {src} -> {dst}"
            )));
        }
        if slots == 0 {
            return Err(SimError::InvalidArgument("session must last at least one slot".into()));
        }
        Ok(self.push_session(src, dst, slots))
    }

    fn push_session(&mut self, src: MuId, dst: MuId, slots: u32) -> SessionId {
        let (a, b) = (&self.users[src.0], &self.users[dst.0]);
        let route = if a.cell_id == b.cell_id {
            Route::SameCell
        } else {
            match self.grid.candidate_relays(a.position, b.position) {
                Ok(c) => Route::Relayed(c),
                Err(GeomError::SameCell(_)) => Route::SameCell,
                Err(e) => panic!("users are inside the grid: {e}"),
            }
        };
        let id = SessionId(self.next_session);
        self.next_session += 1;
        self.sessions_started += 1;
        self.busy[src.0] = true;
        self.sessions.push(Session {
            id,
            src_mu: src,
            dst_mu: dst,
            route,
            relay_id: None,
            rate: self.config.rate,
            remaining_slots: slots,
            blocked: false,
            ever_blocked: false,
            delivered: 0.0,
        });
        id
    }

    fn spawn_sessions(&mut self) {
        let n = self.users.len();
        let p = self.config.session_start_prob;
        for i in 0..n {
            // One draw per user per slot keeps the stream independent of
            // which users happen to be busy.
            let start = self.rng.random_bool(p);
            if !start || self.busy[i] || n < 2 {
                continue;
            }
            let mut j = self.rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            let slots = 1 + self.duration.sample(&mut self.rng).min(u64::from(u32::MAX - 1)) as u32;
            self.push_session(MuId(i), MuId(j), slots);
        }
    }

    /// Tries to attach every relayed session that currently has no relay.
    fn assign_pending(&mut self) {
        let strategy = self.config.strategy;
        for s in self.sessions.iter_mut() {
            let Route::Relayed(cands) = s.route else {
                continue;
            };
            if s.relay_id.is_some() {
                continue;
            }
            let admitted = match choose_among(strategy, &cands, &self.relays, DT) {
                Choice::Relay(r) => self.relays[r.0].admit().then_some(r),
                Choice::Blocked | Choice::SameCell => None,
            };
            s.relay_id = admitted;
            s.blocked = admitted.is_none();
            if s.blocked && !s.ever_blocked {
                s.ever_blocked = true;
                self.blocked_sessions += 1;
            }
        }
    }

    /// Advances the world by one slot.
    pub fn run_slot(&mut self) {
        let slot = self.slot + 1;

        self.spawn_sessions();
        self.assign_pending();

        for s in self.sessions.iter_mut() {
            if s.is_flowing() {
                s.delivered += s.rate * DT;
                self.delivered += s.rate * DT;
            }
        }

        let mut any_died = false;
        for r in self.relays.iter_mut() {
            any_died |= r.drain(&self.power, DT, slot).died;
        }
        if any_died {
            for s in self.sessions.iter_mut() {
                if let Some(r) = s.relay_id {
                    if !self.relays[r.0].is_alive() {
                        s.relay_id = None;
                    }
                }
            }
        }

        for r in self.relays.iter_mut() {
            r.observe_energy(DT);
        }

        let mut i = 0;
        while i < self.sessions.len() {
            let s = &mut self.sessions[i];
            s.remaining_slots -= 1;
            if s.remaining_slots == 0 {
                let s = self.sessions.swap_remove(i);
                if let Some(r) = s.relay_id {
                    self.relays[r.0].release();
                }
                self.busy[s.src_mu.0] = false;
                self.completed_delivered += s.delivered;
            } else {
                i += 1;
            }
        }

        if any_died {
            self.assign_pending();
        }

        self.slot = slot;
    }

    /// Runs the remaining slots up to the horizon.
    pub fn run(&mut self) -> MetricsRecord {
        while self.slot < self.config.horizon {
            self.run_slot();
        }
        self.metrics()
    }

    pub fn metrics(&self) -> MetricsRecord {
        let horizon = self.config.horizon;
        let relay_lifetimes: Vec<u64> = self.relays.iter().map(|r| r.lifetime(horizon)).collect();
        let avg_lifetime = if relay_lifetimes.is_empty() {
            0.0
        } else {
            relay_lifetimes.iter().sum::<u64>() as f64 / relay_lifetimes.len() as f64
        };
        MetricsRecord {
            aggregate_throughput: if horizon == 0 {
                0.0
            } else {
                self.delivered / horizon as f64
            },
            relay_lifetimes,
            avg_lifetime,
            blocked_sessions: self.blocked_sessions,
            delivered: self.delivered,
            sessions_started: self.sessions_started,
        }
    }

    /// Data delivered so far, from the per-slot counter.
    pub fn delivered(&self) -> f64 {
        self.delivered
    }

    /// Data delivered so far, summed from finished and live sessions.
    pub fn delivered_by_sessions(&self) -> f64 {
        self.completed_delivered + self.sessions.iter().map(|s| s.delivered).sum::<f64>()
    }

    pub fn relay(&self, id: RelayId) -> &RelayStation {
        &self.relays[id.0]
    }
}

/// Runs one trial from scratch. Deterministic in `config`.
pub fn run_trial(config: &SimConfig) -> Result<MetricsRecord, SimError> {
    Ok(World::new(config.clone())?.run())
}

/// Which points a sweep visits.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub mu_counts: Vec<usize>,
    pub strategies: Vec<Strategy>,
    pub trials: u32,
}

impl Default for SweepPlan {
    /// 200 to 800 users in steps of 50, all three strategies, 10 trials.
    fn default() -> Self {
        SweepPlan {
            mu_counts: (200..=800).step_by(50).collect(),
            strategies: Strategy::ALL.to_vec(),
            trials: 10,
        }
    }
}

impl SweepPlan {
    pub fn runs(&self) -> usize {
        self.mu_counts.len() * self.strategies.len() * self.trials as usize
    }
}

/// Averages for one (user count, strategy) point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n_mus: usize,
    pub strategy: Strategy,
    pub trials: u32,
    pub throughput_mean: f64,
    pub throughput_std: f64,
    pub lifetime_mean: f64,
    pub lifetime_std: f64,
    pub blocked_mean: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn row(&self, n_mus: usize, strategy: Strategy) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.n_mus == n_mus && r.strategy == strategy)
    }

    /// Distinct user counts in ascending order.
    pub fn mu_counts(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.rows.iter().map(|r| r.n_mus).collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// Mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs every (user count, strategy, trial) of `plan` on top of `base` and
/// averages per point. Trials run in parallel; the table does not depend on
/// scheduling.
pub fn run_sweep(base: &SimConfig, plan: &SweepPlan) -> Result<SweepTable, SimError> {
    base.validate()?;
    let jobs: Vec<(usize, Strategy, u32)> = plan
        .mu_counts
        .iter()
        .flat_map(|&n| {
            plan.strategies
                .iter()
                .flat_map(move |&s| (0..plan.trials).map(move |t| (n, s, t)))
        })
        .collect();
    let results: Vec<MetricsRecord> = jobs
        .par_iter()
        .map(|&(n, s, t)| {
            let cfg = SimConfig {
                n_mus: n,
                strategy: s,
                seed: base.seed.wrapping_add(u64::from(t)),
                ..base.clone()
            };
            run_trial(&cfg)
        })
        .collect::<Result<_, _>>()?;

    let per_point = plan.trials.max(1) as usize;
    let mut rows = Vec::new();
    if plan.trials > 0 {
        for (chunk, job) in results.chunks(per_point).zip(jobs.chunks(per_point)) {
            let (n_mus, strategy, _) = job[0];
            let tp: Vec<f64> = chunk.iter().map(|m| m.aggregate_throughput).collect();
            let lt: Vec<f64> = chunk.iter().map(|m| m.avg_lifetime).collect();
            let bl: Vec<f64> = chunk.iter().map(|m| m.blocked_sessions as f64).collect();
            let (throughput_mean, throughput_std) = mean_std(&tp);
            let (lifetime_mean, lifetime_std) = mean_std(&lt);
            rows.push(SweepRow {
                n_mus,
                strategy,
                trials: plan.trials,
                throughput_mean,
                throughput_std,
                lifetime_mean,
                lifetime_std,
                blocked_mean: mean_std(&bl).0,
            });
        }
    }
    Ok(SweepTable { rows })
}

/// The full strategy comparison: [`SweepPlan::default`] over `base`.
pub fn run_experiment(base: &SimConfig) -> Result<SweepTable, SimError> {
    run_sweep(base, &SweepPlan::default())
}
