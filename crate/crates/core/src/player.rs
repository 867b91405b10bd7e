//! Headless player: interaction states driven by scripted user events and
//! clock ticks, with process progress and data-bound behaviors.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataConfig, DataEngine, DataError, DisplayPayload};
use crate::process::{check_scenario, Condition, ProcessModel};
use crate::scenario::{
    split_ref, tags_intersect, Diagnostic, InteractionKind, InteractionState, LoadedScenario, DISCONNECTED,
};

#[derive(Debug, Error)]
pub enum PlayerError {
    #[error("session refused: {} outstanding diagnostic(s): {}", .0.len(), summarize(.0))]
    Diagnostics(Vec<Diagnostic>),
    #[error("unknown interaction `{0}`")]
    UnknownInteraction(String),
    #[error("`{interaction}` has no state `{state}`")]
    InvalidState { interaction: String, state: String },
    #[error("`{0}` is not a {1}")]
    WrongKind(String, &'static str),
    #[error("`{a}` and `{b}` share no snap tags")]
    IncompatibleTags { a: String, b: String },
    #[error("unknown channel `{0}`")]
    UnknownChannel(String),
    #[error("channel `{0}` has no value yet")]
    NoValue(String),
    #[error("tick of {0} s: ticks must be positive")]
    BadTick(f64),
    #[error("script line {line}: {message}")]
    Script { line: usize, message: String },
    #[error(transparent)]
    Data(#[from] DataError),
}

fn summarize(d: &[Diagnostic]) -> String {
    d.iter().map(|d| format!("{} [{}] {}", d.path, d.code, d.message)).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum UserEvent {
    SetState { interaction: String, state: String },
    Connect { connector: String, peer: String },
    Press { button: String },
    RecordReading { channels: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompletedStep {
    pub id: String,
    pub at: f64,
    /// Condition already held when the step became eligible.
    pub pre_satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reading {
    pub time: f64,
    pub values: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogEntry {
    pub time: f64,
    pub event: UserEvent,
    pub completed: Vec<String>,
}

pub struct Session {
    scenario: LoadedScenario,
    process: ProcessModel,
    states: BTreeMap<String, InteractionState>,
    completed: BTreeSet<String>,
    completions: Vec<CompletedStep>,
    /// Clock time at which each eligible step was entered.
    entered: BTreeMap<String, f64>,
    clock: f64,
    data: DataEngine,
    log: Vec<LogEntry>,
    readings: Vec<Reading>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProgressReport {
    pub scenario: String,
    pub clock: f64,
    pub done: bool,
    pub current: Option<String>,
    pub eligible: Vec<String>,
    pub completed: Vec<CompletedStep>,
    /// Incomplete instructions, eligible ones first.
    pub pending: Vec<String>,
    pub states: BTreeMap<String, InteractionState>,
    pub readings: Vec<Reading>,
    pub channels: BTreeMap<String, Option<f64>>,
    pub events: usize,
}

/// Starts a session at the entry step with default states. Refuses while
/// the scenario or the process has diagnostics.
pub fn create_session(scenario: LoadedScenario, process: ProcessModel) -> Result<Session, PlayerError> {
    let data_config = scenario.scenario.data.clone();
    create_session_with_data(scenario, process, &data_config)
}

pub fn create_session_with_data(
    scenario: LoadedScenario,
    process: ProcessModel,
    data: &DataConfig,
) -> Result<Session, PlayerError> {
    let mut diags = scenario.validate();
    diags.extend(check_scenario(&process, &scenario));
    if !diags.is_empty() {
        return Err(PlayerError::Diagnostics(diags));
    }
    let engine = DataEngine::from_config(data, &scenario.base_dir)?;
    let states = scenario
        .scenario
        .interactions()
        .into_iter()
        .map(|(r, x)| (r, InteractionState::initial(&x.kind)))
        .collect();
    let mut s = Session {
        scenario,
        process,
        states,
        completed: BTreeSet::new(),
        completions: Vec::new(),
        entered: BTreeMap::new(),
        clock: 0.0,
        data: engine,
        log: Vec::new(),
        readings: Vec::new(),
    };
    s.data.tick(0.0)?;
    s.refresh_displays();
    s.advance(false);
    Ok(s)
}

impl Session {
    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn state(&self, reference: &str) -> Option<&InteractionState> {
        self.states.get(reference)
    }

    pub fn data(&self) -> &DataEngine {
        &self.data
    }

    pub fn process(&self) -> &ProcessModel {
        &self.process
    }

    pub fn completed(&self) -> &BTreeSet<String> {
        &self.completed
    }

    pub fn readings(&self) -> &[Reading] {
        &self.readings
    }

    pub fn eligible(&self) -> Vec<String> {
        self.process.eligible(&self.completed)
    }

    /// First eligible instruction.
    pub fn current(&self) -> Option<String> {
        self.eligible().into_iter().next()
    }

    pub fn is_done(&self) -> bool {
        self.eligible().is_empty()
    }

    fn kind(&self, reference: &str) -> Result<&InteractionKind, PlayerError> {
        self.scenario
            .scenario
            .interaction(reference)
            .map(|(_, x)| &x.kind)
            .ok_or_else(|| PlayerError::UnknownInteraction(reference.to_string()))
    }

    /// Applies one event. Errors leave the session unchanged.
    pub fn apply_event(&mut self, event: UserEvent) -> Result<Vec<String>, PlayerError> {
        match &event {
            UserEvent::SetState { interaction, state } => {
                let space = self
                    .kind(interaction)?
                    .state_space()
                    .ok_or(PlayerError::WrongKind(interaction.clone(), "button or dial"))?;
                if !space.contains(state) {
                    return Err(PlayerError::InvalidState {
                        interaction: interaction.clone(),
                        state: state.clone(),
                    });
                }
                self.states.insert(interaction.clone(), InteractionState::Named { state: state.clone() });
            }
            UserEvent::Press { button } => {
                let kind = self.kind(button)?;
                if !matches!(kind, InteractionKind::Button { .. }) {
                    return Err(PlayerError::WrongKind(button.clone(), "button"));
                }
                let space = kind.state_space().unwrap_or_default();
                let cur = match self.states.get(button) {
                    Some(InteractionState::Named { state }) => space.iter().position(|s| s == state).unwrap_or(0),
                    _ => 0,
                };
                let next = space[(cur + 1) % space.len()].clone();
                self.states.insert(button.clone(), InteractionState::Named { state: next });
            }
            UserEvent::Connect { connector, peer } => {
                let a = self.kind(connector)?.tags().ok_or(PlayerError::WrongKind(connector.clone(), "snap connector"))?;
                let b = self.kind(peer)?.tags().ok_or(PlayerError::WrongKind(peer.clone(), "snap connector"))?;
                if connector == peer || !tags_intersect(a, b) {
                    return Err(PlayerError::IncompatibleTags {
                        a: connector.clone(),
                        b: peer.clone(),
                    });
                }
                for (x, y) in [(connector, peer), (peer, connector)] {
                    if let Some(InteractionState::Connection { peers }) = self.states.get_mut(x) {
                        if !peers.contains(y) {
                            peers.push(y.clone());
                            peers.sort();
                        }
                    }
                }
            }
            UserEvent::RecordReading { channels } => {
                let mut values = BTreeMap::new();
                for c in channels {
                    if !self.data.has_name(c) {
                        return Err(PlayerError::UnknownChannel(c.clone()));
                    }
                    let v = self.data.value(c).ok_or_else(|| PlayerError::NoValue(c.clone()))?;
                    values.insert(c.clone(), v);
                }
                self.readings.push(Reading {
                    time: self.clock,
                    values,
                });
            }
        }
        let completed = self.advance(true);
        self.log.push(LogEntry {
            time: self.clock,
            event,
            completed: completed.clone(),
        });
        Ok(completed)
    }

    /// Advances the clock, releases due data, turns rotations and completes
    /// elapsed waits.
    pub fn tick(&mut self, dt: f64) -> Result<Vec<String>, PlayerError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(PlayerError::BadTick(dt));
        }
        self.clock += dt;
        self.data.tick(self.clock)?;
        let rotations: Vec<(String, f64)> = self
            .scenario
            .scenario
            .interactions()
            .into_iter()
            .filter_map(|(r, x)| match &x.kind {
                InteractionKind::Rotation {
                    speed_deg_s,
                    speed_channel,
                    ..
                } => {
                    let speed = speed_deg_s.or_else(|| speed_channel.as_deref().and_then(|c| self.data.value(c)));
                    Some((r, speed.unwrap_or(0.0)))
                }
                _ => None,
            })
            .collect();
        for (r, speed) in rotations {
            if let Some(InteractionState::Angle { degrees }) = self.states.get_mut(&r) {
                *degrees = (*degrees + speed * dt).rem_euclid(360.0);
            }
        }
        self.refresh_displays();
        Ok(self.advance(true))
    }

    /// Ticks up to absolute time `t` (no-op if already there).
    pub fn advance_to(&mut self, t: f64) -> Result<Vec<String>, PlayerError> {
        if t > self.clock {
            self.tick(t - self.clock)
        } else {
            Ok(Vec::new())
        }
    }

    fn refresh_displays(&mut self) {
        let refs: Vec<(String, InteractionKind)> = self
            .scenario
            .scenario
            .interactions()
            .into_iter()
            .map(|(r, x)| (r, x.kind.clone()))
            .collect();
        for (r, kind) in refs {
            let Some(spec) = kind.display_spec() else { continue };
            let value = match self.data.payload(&spec) {
                DisplayPayload::Text { text } => Some(text),
                DisplayPayload::Image { path } => Some(path),
                DisplayPayload::DynamicText { value, unit, .. } => {
                    value.map(|v| if unit.is_empty() { format!("{v}") } else { format!("{v} {unit}") })
                }
                DisplayPayload::Graph { series, .. } => {
                    Some(series.iter().map(|s| format!("{}: {} points", s.channel, s.points.len())).collect::<Vec<_>>().join(", "))
                }
            };
            self.states.insert(r, InteractionState::Displayed { value });
        }
    }

    fn satisfied(&self, id: &str) -> bool {
        let Some(ins) = self.process.instruction(id) else { return false };
        match &ins.completion {
            Condition::Wait { seconds } => self.entered.get(id).is_some_and(|t| self.clock - t >= *seconds - 1e-9),
            Condition::StateConjunction { terms } => terms.iter().all(|t| match self.states.get(&t.interaction) {
                Some(InteractionState::Named { state }) => *state == t.state,
                Some(InteractionState::Connection { peers }) => {
                    if t.state == DISCONNECTED {
                        peers.is_empty()
                    } else {
                        peers.contains(&t.state)
                    }
                }
                _ => false,
            }),
        }
    }

    /// Completes satisfied eligible steps until nothing changes. Steps that
    /// become eligible already satisfied complete at once and are flagged.
    fn advance(&mut self, after_change: bool) -> Vec<String> {
        let mut done = Vec::new();
        let mut first_round = after_change;
        loop {
            let eligible = self.eligible();
            let mut progressed = false;
            for id in &eligible {
                let fresh = !self.entered.contains_key(id);
                if fresh {
                    self.entered.insert(id.clone(), self.clock);
                }
                if self.satisfied(id) {
                    self.completed.insert(id.clone());
                    self.completions.push(CompletedStep {
                        id: id.clone(),
                        at: self.clock,
                        pre_satisfied: fresh || !first_round,
                    });
                    done.push(id.clone());
                    progressed = true;
                }
            }
            first_round = false;
            if !progressed {
                return done;
            }
        }
    }

    pub fn progress_report(&self) -> ProgressReport {
        let eligible = self.eligible();
        let mut pending = eligible.clone();
        for i in self.process.instructions() {
            if !self.completed.contains(&i.id) && !pending.contains(&i.id) {
                pending.push(i.id.clone());
            }
        }
        ProgressReport {
            scenario: self.scenario.scenario.name.clone(),
            clock: self.clock,
            done: eligible.is_empty(),
            current: eligible.first().cloned(),
            eligible,
            completed: self.completions.clone(),
            pending,
            states: self.states.clone(),
            readings: self.readings.clone(),
            channels: self.data.snapshot(),
            events: self.log.len(),
        }
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptLine {
    pub at: f64,
    #[serde(default)]
    pub event: Option<UserEvent>,
}

/// Reads a JSON-lines script. Blank lines and lines starting with `#` or
/// `//` are skipped; times must not decrease.
pub fn read_script(reader: impl BufRead) -> Result<Vec<ScriptLine>, PlayerError> {
    let mut out: Vec<ScriptLine> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| PlayerError::Script {
            line: i + 1,
            message: e.to_string(),
        })?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') || t.starts_with("//") {
            continue;
        }
        let s: ScriptLine = serde_json::from_str(t).map_err(|e| PlayerError::Script {
            line: i + 1,
            message: e.to_string(),
        })?;
        if !s.at.is_finite() || out.last().is_some_and(|p| s.at < p.at) {
            return Err(PlayerError::Script {
                line: i + 1,
                message: format!("time {} goes backwards", s.at),
            });
        }
        out.push(s);
    }
    Ok(out)
}

/// Ticks to each line's time, then applies its event.
pub fn run_script(session: &mut Session, script: &[ScriptLine]) -> Result<(), PlayerError> {
    for (k, line) in script.iter().enumerate() {
        let wrap = |e: PlayerError| PlayerError::Script {
            line: k + 1,
            message: e.to_string(),
        };
        if line.at < session.clock() {
            return Err(wrap(PlayerError::Script {
                line: k + 1,
                message: "time goes backwards".into(),
            }));
        }
        session.advance_to(line.at).map_err(wrap)?;
        if let Some(ev) = &line.event {
            session.apply_event(ev.clone()).map_err(wrap)?;
        }
    }
    Ok(())
}

/// True when `reference` names an interaction of the session's scenario.
pub fn is_interaction_ref(session: &Session, reference: &str) -> bool {
    split_ref(reference).is_some() && session.states.contains_key(reference)
}
