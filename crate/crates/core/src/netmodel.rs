//! Relay stations, mobile users and sessions, plus the
//! detection / prediction / selection handover protocol.
//!
//! A mobile user about to talk to a user in another cell detects the three
//! relays around the point where the straight line to the receiver leaves
//! its own cell, asks each for its potential energy and hands over to the
//! one promising the most. Two baselines share the same entry point:
//! always using the crossed-edge relay, and picking by current residual
//! energy without any trend.

use std::fmt;
use std::str::FromStr;

use crate::hexgeom::{Candidates, CellId, EdgeId, GeomError, HexGrid, Point, RelayId};
use crate::predictor::{self, PredictorState};

/// Energy at or below `initial_energy * DEATH_TOL` counts as exhausted.
const DEATH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MuId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SessionId(pub u64);

impl fmt::Display for MuId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "m{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    /// Always the relay on the crossed edge.
    NoEb,
    /// Highest current residual energy among the candidates.
    EbByBs,
    /// Highest predicted (potential) energy among the candidates.
    EbByMu,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::NoEb, Strategy::EbByBs, Strategy::EbByMu];

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::NoEb => "no-eb",
            Strategy::EbByBs => "eb-bs",
            Strategy::EbByMu => "eb-mu",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "no-eb" => Ok(Strategy::NoEb),
            "eb-bs" => Ok(Strategy::EbByBs),
            "eb-mu" => Ok(Strategy::EbByMu),
            other => Err(format!(
                "unknown strategy '{other}' (expected no-eb, eb-bs or eb-mu)"
            )),
        }
    }
}

/// Linear relay power draw: `p_idle + p_session · n` per unit time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerModel {
    pub p_idle: f64,
    pub p_session: f64,
}

impl Default for PowerModel {
    fn default() -> Self {
        PowerModel {
            p_idle: 0.1,
            p_session: 1.0,
        }
    }
}

impl PowerModel {
    pub fn draw(&self, sessions: u32) -> f64 {
        self.p_idle + self.p_session * f64::from(sessions)
    }
}

#[derive(Debug, Clone)]
pub struct RelayStation {
    pub id: RelayId,
    pub edge_id: EdgeId,
    pub energy: f64,
    pub initial_energy: f64,
    pub predictor: PredictorState,
    pub active_sessions: u32,
    pub capacity: u32,
    pub death_slot: Option<u64>,
    /// Total energy removed so far.
    pub drained: f64,
}

/// What happened during one call to [`RelayStation::drain`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrainOutcome {
    pub consumed: f64,
    pub died: bool,
    /// Sessions that lost their relay because it died.
    pub dropped_sessions: u32,
}

impl RelayStation {
    /// A full relay whose predictor has already seen its initial energy.
    pub fn new(id: RelayId, edge_id: EdgeId, initial_energy: f64, capacity: u32, eps: f64) -> Self {
        RelayStation {
            id,
            edge_id,
            energy: initial_energy,
            initial_energy,
            predictor: PredictorState::primed(eps, initial_energy)
                .expect("eps validated by the caller"),
            active_sessions: 0,
            capacity,
            death_slot: None,
            drained: 0.0,
        }
    }

    pub fn is_alive(&self) -> bool {
        self.death_slot.is_none()
    }

    pub fn has_room(&self) -> bool {
        self.is_alive() && self.active_sessions < self.capacity
    }

    /// Takes one more session if alive and below capacity.
    pub fn admit(&mut self) -> bool {
        if self.has_room() {
            self.active_sessions += 1;
            true
        } else {
            false
        }
    }

    pub fn release(&mut self) {
        debug_assert!(self.active_sessions > 0 || !self.is_alive());
        self.active_sessions = self.active_sessions.saturating_sub(1);
    }

    /// Removes one time step's worth of energy. Reaching zero records `slot`
    /// as the death slot and drops every session on the relay.
    pub fn drain(&mut self, power: &PowerModel, dt: f64, slot: u64) -> DrainOutcome {
        if !self.is_alive() {
            return DrainOutcome {
                consumed: 0.0,
                died: false,
                dropped_sessions: 0,
            };
        }
        let want = power.draw(self.active_sessions) * dt;
        let mut after = self.energy - want;
        if after <= self.initial_energy * DEATH_TOL {
            after = 0.0;
        }
        let consumed = self.energy - after;
        self.energy = after;
        self.drained += consumed;
        if after == 0.0 {
            self.death_slot = Some(slot);
            let dropped = self.active_sessions;
            self.active_sessions = 0;
            DrainOutcome {
                consumed,
                died: true,
                dropped_sessions: dropped,
            }
        } else {
            DrainOutcome {
                consumed,
                died: false,
                dropped_sessions: 0,
            }
        }
    }

    /// Advances the relay's own predictor with its current energy.
    pub fn observe_energy(&mut self, dt: f64) {
        if self.is_alive() {
            self.predictor
                .observe(self.energy, dt)
                .expect("dt validated by the caller");
        }
    }

    /// Lifetime within a run of `horizon` slots.
    pub fn lifetime(&self, horizon: u64) -> u64 {
        self.death_slot.map_or(horizon, |d| d.min(horizon))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobileUser {
    pub id: MuId,
    pub position: Point,
    pub cell_id: CellId,
}

/// How a session's traffic travels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    /// Both ends share a cell: handled by the base station, no relay.
    SameCell,
    /// Relayed through one of the detected candidates.
    Relayed(Candidates),
}

#[derive(Debug, Clone)]
pub struct Session {
    pub id: SessionId,
    pub src_mu: MuId,
    pub dst_mu: MuId,
    pub route: Route,
    pub relay_id: Option<RelayId>,
    /// Data units per slot.
    pub rate: f64,
    pub remaining_slots: u32,
    pub blocked: bool,
    /// Set once the session has been blocked for at least one slot.
    pub ever_blocked: bool,
    pub delivered: f64,
}

impl Session {
    /// Whether the session moves data this slot.
    pub fn is_flowing(&self) -> bool {
        match self.route {
            Route::SameCell => true,
            Route::Relayed(_) => self.relay_id.is_some(),
        }
    }

    pub fn needs_relay(&self) -> bool {
        matches!(self.route, Route::Relayed(_)) && self.relay_id.is_none()
    }
}

/// Outcome of relay selection for one session.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Choice {
    Relay(RelayId),
    Blocked,
    SameCell,
}

/// Detection phase: the three relays an initiator contacts for a session
/// towards `dst`. Same-cell pairs yield [`GeomError::SameCell`].
pub fn detection(mu: &MobileUser, dst: &MobileUser, grid: &HexGrid) -> Result<[RelayId; 3], GeomError> {
    if mu.cell_id == dst.cell_id {
        return Err(GeomError::SameCell(mu.cell_id));
    }
    grid.candidate_relays(mu.position, dst.position)
        .map(|c| c.relays)
}

/// Prediction phase: a relay's potential energy. Does not advance the
/// relay's filter; dead relays report zero.
pub fn prediction(rs: &RelayStation, dt: f64) -> f64 {
    if !rs.is_alive() {
        return 0.0;
    }
    predictor::predict_energy(rs.energy, rs.predictor.a_hat, dt).unwrap_or(0.0)
}

/// Selection phase: the candidate with the highest energy, lowest id on
/// ties. `None` means blocked (empty list, or nothing above zero).
pub fn selection(candidates: &[(RelayId, f64)]) -> Option<RelayId> {
    let mut best: Option<(RelayId, f64)> = None;
    for &(id, e) in candidates {
        if !(e > 0.0) {
            continue;
        }
        best = match best {
            Some((bid, be)) if be > e || (be == e && bid < id) => Some((bid, be)),
            _ => Some((id, e)),
        };
    }
    best.map(|(id, _)| id)
}

/// Applies `strategy` to an already detected candidate set.
pub fn choose_among(
    strategy: Strategy,
    candidates: &Candidates,
    relays: &[RelayStation],
    dt: f64,
) -> Choice {
    let pick = match strategy {
        Strategy::NoEb => {
            let r = candidates.crossed_relay();
            relays[r.0].is_alive().then_some(r)
        }
        Strategy::EbByBs => {
            let offers: Vec<(RelayId, f64)> = candidates
                .relays
                .iter()
                .map(|&r| {
                    let rs = &relays[r.0];
                    (r, if rs.is_alive() { rs.energy } else { 0.0 })
                })
                .collect();
            selection(&offers)
        }
        Strategy::EbByMu => {
            let offers: Vec<(RelayId, f64)> = candidates
                .relays
                .iter()
                .map(|&r| (r, prediction(&relays[r.0], dt)))
                .collect();
            selection(&offers)
        }
    };
    pick.map_or(Choice::Blocked, Choice::Relay)
}

/// Full handover decision for a session from `mu` to `dst`.
pub fn select_relay(
    strategy: Strategy,
    mu: &MobileUser,
    dst: &MobileUser,
    grid: &HexGrid,
    relays: &[RelayStation],
    dt: f64,
) -> Result<Choice, GeomError> {
    if mu.cell_id == dst.cell_id {
        return Ok(Choice::SameCell);
    }
    match grid.candidate_relays(mu.position, dst.position) {
        Ok(c) => Ok(choose_among(strategy, &c, relays, dt)),
        Err(GeomError::SameCell(_)) => Ok(Choice::SameCell),
        Err(e) => Err(e),
    }
}
