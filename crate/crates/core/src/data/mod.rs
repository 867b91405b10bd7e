//! Data channels fed by time-series, tabular and sensor sources, derived
//! channels defined by expressions, and display payloads.

mod expr;
mod sources;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use expr::{evaluate_expression, BinOp, EvalError, Expr, ExprError, ParseError};
pub use sources::{
    parse_sensor_replay, parse_tabular, parse_timeseries_csv, DropCounters, SensorReplay, Slot, TabularRows,
    TimeSeries, Update,
};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("line {line}: time {time} does not increase")]
    NonMonotoneTime { line: usize, time: f64 },
    #[error("schedule must be positive, got {0}")]
    Schedule(f64),
    #[error("derived channel `{channel}`: {error}")]
    Expression { channel: String, error: ParseError },
    #[error("derived channel `{channel}` references unknown name `{name}`")]
    Unresolved { channel: String, name: String },
    #[error("name `{0}` is defined more than once")]
    DuplicateName(String),
    #[error("dependency cycle among derived channels: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("clock moved backwards from {from} to {to}")]
    ClockBackwards { from: f64, to: f64 },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub name: String,
    #[serde(default)]
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedSpec {
    pub name: String,
    pub expr: String,
    #[serde(default)]
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceSpec {
    /// Each value column becomes a channel of the same name.
    TimeSeriesCsv {
        id: String,
        path: String,
        time_column: String,
        value_columns: Vec<String>,
        schedule_s: f64,
    },
    /// Row `i` is released at `start_s + i * interval_s`.
    Tabular {
        id: String,
        path: String,
        columns: Vec<String>,
        interval_s: f64,
        #[serde(default)]
        start_s: f64,
    },
    /// Replay file of `timestamp,sensor_id,value` lines.
    SensorStream {
        id: String,
        path: String,
        channel_map: BTreeMap<String, String>,
    },
}

impl SourceSpec {
    pub fn id(&self) -> &str {
        match self {
            SourceSpec::TimeSeriesCsv { id, .. } | SourceSpec::Tabular { id, .. } | SourceSpec::SensorStream { id, .. } => {
                id
            }
        }
    }

    /// Channels this source writes.
    pub fn channels(&self) -> Vec<String> {
        match self {
            SourceSpec::TimeSeriesCsv { value_columns, .. } => value_columns.clone(),
            SourceSpec::Tabular { columns, .. } => columns.clone(),
            SourceSpec::SensorStream { channel_map, .. } => {
                channel_map.values().cloned().collect::<BTreeSet<_>>().into_iter().collect()
            }
        }
    }
}

/// The data registry stored in a scenario.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DataConfig {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub channels: Vec<ChannelSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub constants: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sources: Vec<SourceSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub derived: Vec<DerivedSpec>,
}

impl DataConfig {
    /// Every channel and constant name the configuration defines.
    pub fn names(&self) -> BTreeSet<String> {
        let mut out: BTreeSet<String> = self.channels.iter().map(|c| c.name.clone()).collect();
        out.extend(self.constants.keys().cloned());
        out.extend(self.sources.iter().flat_map(|s| s.channels()));
        out.extend(self.derived.iter().map(|d| d.name.clone()));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Channel {
    pub name: String,
    pub unit: String,
    pub value: Option<f64>,
    /// (time, value) with strictly increasing times.
    pub history: Vec<(f64, f64)>,
}

impl Channel {
    fn new(name: &str, unit: &str) -> Self {
        Self {
            name: name.to_string(),
            unit: unit.to_string(),
            value: None,
            history: Vec::new(),
        }
    }

    fn record(&mut self, time: f64, value: f64) -> bool {
        match self.history.last_mut() {
            Some(last) if time < last.0 => return false,
            Some(last) if time == last.0 => last.1 = value,
            _ => self.history.push((time, value)),
        }
        self.value = Some(value);
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    Line,
    Bar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DisplaySpec {
    Text { text: String },
    DynamicText { channel: String },
    Image { path: String },
    Graph { channels: Vec<String>, graph: GraphKind },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Series {
    pub channel: String,
    pub unit: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DisplayPayload {
    Text { text: String },
    DynamicText { channel: String, value: Option<f64>, unit: String },
    Image { path: String },
    Graph { graph: GraphKind, series: Vec<Series> },
}

#[derive(Debug, Clone)]
struct Derived {
    name: String,
    expr: Expr,
    inputs: BTreeSet<String>,
    computed: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct TickReport {
    pub released: usize,
    pub changed: Vec<String>,
}

/// Channel store. Source data is queued with release times; `tick` releases
/// what is due and recomputes derived channels whose inputs changed.
#[derive(Debug, Clone, Default)]
pub struct DataEngine {
    clock: f64,
    channels: BTreeMap<String, Channel>,
    constants: BTreeMap<String, f64>,
    derived: Vec<Derived>,
    /// (release time, insertion order, update), sorted.
    pending: Vec<(f64, usize, Update)>,
    next_pending: usize,
    dirty: BTreeSet<String>,
    pub diagnostics: Vec<String>,
    pub dropped: DropCounters,
}

impl DataEngine {
    pub fn new() -> Self {
        Self::default()
    }

    /// Loads every source (paths relative to `base_dir`) and binds derived
    /// channels.
    pub fn from_config(config: &DataConfig, base_dir: &Path) -> Result<Self, DataError> {
        let mut e = DataEngine::new();
        for (name, v) in &config.constants {
            e.set_constant(name, *v)?;
        }
        for c in &config.channels {
            e.declare_channel(&c.name, &c.unit);
        }
        let read = |p: &str| {
            let path = base_dir.join(p);
            fs::read_to_string(&path).map_err(|source| DataError::Io {
                path: path.display().to_string(),
                source,
            })
        };
        for src in &config.sources {
            match src {
                SourceSpec::TimeSeriesCsv {
                    id,
                    path,
                    time_column,
                    value_columns,
                    schedule_s,
                } => {
                    let text = read(path)?;
                    let ts = parse_timeseries_csv(text.as_bytes(), time_column, value_columns, *schedule_s)?;
                    e.diagnostics.extend(ts.diagnostics.iter().map(|d| format!("{id}: {d}")));
                    for c in value_columns {
                        e.declare_channel(c, "");
                    }
                    for slot in ts.slots {
                        for u in slot.updates {
                            e.schedule(slot.start, u);
                        }
                    }
                }
                SourceSpec::Tabular {
                    id,
                    path,
                    columns,
                    interval_s,
                    start_s,
                } => {
                    if !(*interval_s > 0.0) {
                        return Err(DataError::Schedule(*interval_s));
                    }
                    let text = read(path)?;
                    for c in columns {
                        e.declare_channel(c, "");
                    }
                    for (i, row) in parse_tabular(text.as_bytes(), columns)?.enumerate() {
                        let at = start_s + i as f64 * interval_s;
                        for (c, cell) in columns.iter().zip(row?) {
                            match cell.parse::<f64>() {
                                Ok(v) if v.is_finite() => e.schedule(
                                    at,
                                    Update {
                                        time: at,
                                        channel: c.clone(),
                                        value: v,
                                    },
                                ),
                                _ => e.diagnostics.push(format!("{id}: row {}: `{c}` is not numeric", i + 1)),
                            }
                        }
                    }
                }
                SourceSpec::SensorStream { path, channel_map, .. } => {
                    let replay = parse_sensor_replay(&read(path)?, channel_map);
                    for c in channel_map.values() {
                        e.declare_channel(c, "");
                    }
                    e.dropped.malformed += replay.dropped.malformed;
                    e.dropped.unmapped += replay.dropped.unmapped;
                    e.dropped.non_monotone += replay.dropped.non_monotone;
                    for p in replay.points {
                        e.schedule(p.time, p);
                    }
                }
            }
        }
        e.bind_derived(&config.derived)?;
        Ok(e)
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn declare_channel(&mut self, name: &str, unit: &str) {
        let ch = self.channels.entry(name.to_string()).or_insert_with(|| Channel::new(name, unit));
        if ch.unit.is_empty() {
            ch.unit = unit.to_string();
        }
    }

    pub fn set_constant(&mut self, name: &str, value: f64) -> Result<(), DataError> {
        if self.channels.contains_key(name) {
            return Err(DataError::DuplicateName(name.to_string()));
        }
        self.constants.insert(name.to_string(), value);
        self.dirty.insert(name.to_string());
        Ok(())
    }

    /// Queues `update` for release once the clock reaches `at`.
    pub fn schedule(&mut self, at: f64, update: Update) {
        self.declare_channel(&update.channel, "");
        let seq = self.pending.len();
        let pos = self.pending[self.next_pending..].partition_point(|(t, _, _)| *t <= at) + self.next_pending;
        self.pending.insert(pos, (at, seq, update));
    }

    /// Applies a live point immediately; the next tick recomputes dependants.
    /// Returns false (and counts a drop) if its time does not increase.
    pub fn ingest(&mut self, update: Update) -> bool {
        self.declare_channel(&update.channel, "");
        let ch = self.channels.get_mut(&update.channel).expect("declared");
        if ch.history.last().is_some_and(|l| update.time <= l.0) {
            self.dropped.non_monotone += 1;
            return false;
        }
        ch.record(update.time, update.value);
        self.dirty.insert(update.channel);
        true
    }

    /// Parses and orders derived channels; fails on unknown names or cycles.
    pub fn bind_derived(&mut self, specs: &[DerivedSpec]) -> Result<(), DataError> {
        let mut parsed = BTreeMap::new();
        for s in specs {
            if self.constants.contains_key(&s.name)
                || self.channels.contains_key(&s.name)
                || parsed.contains_key(&s.name)
            {
                return Err(DataError::DuplicateName(s.name.clone()));
            }
            let expr = Expr::parse(&s.expr).map_err(|error| DataError::Expression {
                channel: s.name.clone(),
                error,
            })?;
            parsed.insert(s.name.clone(), (expr, s.unit.clone()));
        }
        for (name, (expr, _)) in &parsed {
            for id in expr.identifiers() {
                if !self.constants.contains_key(&id) && !self.channels.contains_key(&id) && !parsed.contains_key(&id) {
                    return Err(DataError::Unresolved {
                        channel: name.clone(),
                        name: id,
                    });
                }
            }
        }
        // depth-first topological order; a grey node seen again closes a cycle
        let mut order = Vec::new();
        let mut state: BTreeMap<&str, u8> = BTreeMap::new();
        fn visit<'a>(
            n: &'a str,
            parsed: &'a BTreeMap<String, (Expr, String)>,
            state: &mut BTreeMap<&'a str, u8>,
            stack: &mut Vec<&'a str>,
            order: &mut Vec<String>,
        ) -> Result<(), DataError> {
            match state.get(n) {
                Some(2) => return Ok(()),
                Some(1) => {
                    let from = stack.iter().position(|s| *s == n).unwrap_or(0);
                    let mut cycle: Vec<String> = stack[from..].iter().map(|s| s.to_string()).collect();
                    cycle.push(n.to_string());
                    return Err(DataError::Cycle(cycle));
                }
                _ => {}
            }
            state.insert(n, 1);
            stack.push(n);
            for id in parsed[n].0.identifiers() {
                if let Some((key, _)) = parsed.get_key_value(&id) {
                    visit(key, parsed, state, stack, order)?;
                }
            }
            stack.pop();
            state.insert(n, 2);
            order.push(n.to_string());
            Ok(())
        }
        for name in parsed.keys() {
            visit(name, &parsed, &mut state, &mut Vec::new(), &mut order)?;
        }
        for name in order {
            let (expr, unit) = parsed[&name].clone();
            self.declare_channel(&name, &unit);
            self.derived.push(Derived {
                inputs: expr.identifiers(),
                name,
                expr,
                computed: false,
            });
        }
        Ok(())
    }

    /// Advances the clock to `now`, releases due source data and recomputes
    /// derived channels in dependency order. A second tick at the same time
    /// with no new data changes nothing.
    pub fn tick(&mut self, now: f64) -> Result<TickReport, DataError> {
        if now < self.clock {
            return Err(DataError::ClockBackwards { from: self.clock, to: now });
        }
        self.clock = now;
        let mut report = TickReport::default();
        let mut changed = std::mem::take(&mut self.dirty);
        while let Some((at, _, u)) = self.pending.get(self.next_pending) {
            if *at > now {
                break;
            }
            let ch = self.channels.get_mut(&u.channel).expect("scheduled channels are declared");
            if ch.record(u.time, u.value) {
                changed.insert(u.channel.clone());
            } else {
                self.dropped.non_monotone += 1;
            }
            report.released += 1;
            self.next_pending += 1;
        }
        for i in 0..self.derived.len() {
            let d = &self.derived[i];
            if d.computed && d.inputs.is_disjoint(&changed) {
                continue;
            }
            let value = {
                let lookup = |n: &str| self.value(n);
                d.expr.eval(&lookup)
            };
            let name = d.name.clone();
            match value {
                Ok(v) => {
                    self.derived[i].computed = true;
                    let ch = self.channels.get_mut(&name).expect("derived channels are declared");
                    if ch.value != Some(v) || ch.history.is_empty() {
                        ch.record(now, v);
                    }
                    changed.insert(name);
                }
                Err(EvalError::Unbound(_)) => {}
                Err(e) => self.diagnostics.push(format!("t={now}: `{name}`: {e}")),
            }
        }
        report.changed = changed.into_iter().filter(|c| self.channels.contains_key(c)).collect();
        Ok(report)
    }

    /// Current value of a channel or constant.
    pub fn value(&self, name: &str) -> Option<f64> {
        self.constants
            .get(name)
            .copied()
            .or_else(|| self.channels.get(name).and_then(|c| c.value))
    }

    pub fn channel(&self, name: &str) -> Option<&Channel> {
        self.channels.get(name)
    }

    pub fn channels(&self) -> impl Iterator<Item = &Channel> {
        self.channels.values()
    }

    pub fn constants(&self) -> &BTreeMap<String, f64> {
        &self.constants
    }

    pub fn has_name(&self, name: &str) -> bool {
        self.constants.contains_key(name) || self.channels.contains_key(name)
    }

    /// Every channel's current value.
    pub fn snapshot(&self) -> BTreeMap<String, Option<f64>> {
        self.channels.iter().map(|(k, c)| (k.clone(), c.value)).collect()
    }

    pub fn pending(&self) -> usize {
        self.pending.len() - self.next_pending
    }

    pub fn payload(&self, spec: &DisplaySpec) -> DisplayPayload {
        match spec {
            DisplaySpec::Text { text } => DisplayPayload::Text { text: text.clone() },
            DisplaySpec::DynamicText { channel } => DisplayPayload::DynamicText {
                channel: channel.clone(),
                value: self.value(channel),
                unit: self.channels.get(channel).map(|c| c.unit.clone()).unwrap_or_default(),
            },
            DisplaySpec::Image { path } => DisplayPayload::Image { path: path.clone() },
            DisplaySpec::Graph { channels, graph } => DisplayPayload::Graph {
                graph: *graph,
                series: channels
                    .iter()
                    .map(|c| {
                        let ch = self.channels.get(c);
                        Series {
                            channel: c.clone(),
                            unit: ch.map(|c| c.unit.clone()).unwrap_or_default(),
                            points: ch.map(|c| c.history.clone()).unwrap_or_default(),
                        }
                    })
                    .collect(),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn upd(t: f64, c: &str, v: f64) -> Update {
        Update {
            time: t,
            channel: c.into(),
            value: v,
        }
    }

    fn derived(name: &str, expr: &str) -> DerivedSpec {
        DerivedSpec {
            name: name.into(),
            expr: expr.into(),
            unit: String::new(),
        }
    }

    #[test]
    fn derived_force_follows_speed() {
        let mut e = DataEngine::new();
        e.set_constant("density", 1.0).unwrap();
        e.declare_channel("speed", "m/s");
        e.bind_derived(&[derived("force", "density * speed^2")]).unwrap();
        e.schedule(1.0, upd(1.0, "speed", 2.0));
        e.schedule(2.0, upd(2.0, "speed", 3.0));
        e.tick(1.0).unwrap();
        assert_eq!(e.value("force"), Some(4.0));
        let r = e.tick(2.0).unwrap();
        assert_eq!(e.value("force"), Some(9.0));
        assert!(r.changed.contains(&"force".to_string()));
        let again = e.tick(2.0).unwrap();
        assert_eq!(again, TickReport::default());
        assert_eq!(e.channel("force").unwrap().history, vec![(1.0, 4.0), (2.0, 9.0)]);
    }

    #[test]
    fn cycle_detected_at_bind() {
        let mut e = DataEngine::new();
        let err = e.bind_derived(&[derived("a", "b + 1"), derived("b", "a + 1")]).unwrap_err();
        match err {
            DataError::Cycle(c) => assert_eq!(c, vec!["a", "b", "a"]),
            other => panic!("{other}"),
        }
        assert!(matches!(
            DataEngine::new().bind_derived(&[derived("a", "ghost * 2")]),
            Err(DataError::Unresolved { .. })
        ));
    }

    #[test]
    fn chained_derived_in_dependency_order() {
        let mut e = DataEngine::new();
        e.declare_channel("x", "");
        e.bind_derived(&[derived("z", "y * 2"), derived("y", "x + 1")]).unwrap();
        e.schedule(0.0, upd(0.0, "x", 1.0));
        e.tick(0.0).unwrap();
        assert_eq!(e.value("z"), Some(4.0));
    }

    #[test]
    fn division_by_zero_is_diagnosed() {
        let mut e = DataEngine::new();
        e.declare_channel("x", "");
        e.bind_derived(&[derived("inv", "1 / x")]).unwrap();
        e.schedule(0.0, upd(0.0, "x", 0.0));
        e.tick(0.0).unwrap();
        assert_eq!(e.value("inv"), None);
        assert_eq!(e.diagnostics.len(), 1);
    }

    #[test]
    fn ingest_and_backwards_clock() {
        let mut e = DataEngine::new();
        assert!(e.ingest(upd(1.0, "s", 1.0)));
        assert!(!e.ingest(upd(1.0, "s", 2.0)));
        assert_eq!(e.dropped.non_monotone, 1);
        e.tick(5.0).unwrap();
        assert!(matches!(e.tick(4.0), Err(DataError::ClockBackwards { .. })));
    }

    #[test]
    fn graph_payload() {
        let mut e = DataEngine::new();
        for i in 0..8 {
            e.schedule(i as f64, upd(i as f64, "voltage", 5.0 * (i + 1) as f64));
        }
        e.tick(10.0).unwrap();
        let p = e.payload(&DisplaySpec::Graph {
            channels: vec!["voltage".into()],
            graph: GraphKind::Line,
        });
        match p {
            DisplayPayload::Graph { series, .. } => assert_eq!(series[0].points.len(), 8),
            _ => unreachable!(),
        }
    }
}
