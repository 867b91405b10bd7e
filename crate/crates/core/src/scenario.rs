//! Scenario definitions: model instances linked to manifests, interactions
//! attached to instances or their parts, the data registry and a process
//! reference. Linked geometry is never rewritten.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataConfig, DisplaySpec, GraphKind};
use crate::mesh::{load_model, Model, Transform};

pub const SCENARIO_SCHEMA_VERSION: u32 = 1;

/// A finding from a static check. `path` locates the offending element,
/// `code` is a stable machine-readable kind.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Diagnostic {
    pub path: String,
    pub code: String,
    pub message: String,
}

impl Diagnostic {
    pub fn new(path: impl Into<String>, code: &str, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            code: code.to_string(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("scenario schema violation: {0}")]
    Schema(String),
    #[error("unsupported scenario schema version {0}")]
    Version(u32),
    #[error("unresolved model link for instance `{instance}` ({path}): {reason}")]
    UnresolvedModel {
        instance: String,
        path: String,
        reason: String,
    },
    #[error("instance id `{0}` is already used")]
    DuplicateId(String),
    #[error("unknown owner `{0}`")]
    UnknownOwner(String),
    #[error("interaction `{id}`: {}", .problems.join("; "))]
    InvalidInteraction { id: String, problems: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    /// Manifest of the surrounding environment model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub environment: Option<String>,
    pub instances: Vec<ModelInstance>,
    #[serde(default)]
    pub data: DataConfig,
    /// Process document path.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub process: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInstance {
    pub id: String,
    /// Manifest path relative to the scenario file.
    pub model: String,
    #[serde(default)]
    pub transform: Transform,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub part_overrides: Vec<PartOverride>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub interactions: Vec<Interaction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartOverride {
    pub part: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<Transform>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub hidden: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub id: String,
    /// Part of the owning instance; `None` attaches to the instance itself.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub part: Option<String>,
    #[serde(default)]
    pub transform: Transform,
    #[serde(flatten)]
    pub kind: InteractionKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub data_bindings: Vec<String>,
}

/// Type-specific parameters. Everything is optional at the schema level so
/// that incomplete parameters surface as diagnostics instead of parse errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InteractionKind {
    Button {
        #[serde(default)]
        states: Vec<String>,
    },
    Dial {
        #[serde(default)]
        states: Vec<String>,
    },
    SnapConnector {
        #[serde(default)]
        tags: Vec<String>,
    },
    TextDisplay {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        text: Option<String>,
    },
    DynamicTextDisplay {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        channel: Option<String>,
    },
    ImageDisplay {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        path: Option<String>,
    },
    GraphDisplay {
        #[serde(default)]
        channels: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        graph: Option<GraphKind>,
    },
    Rotation {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        axis: Option<[f64; 3]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        speed_deg_s: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        speed_channel: Option<String>,
    },
}

/// States a button cycles through when none are declared.
pub const DEFAULT_BUTTON_STATES: [&str; 2] = ["released", "pressed"];

impl InteractionKind {
    pub fn type_name(&self) -> &'static str {
        match self {
            InteractionKind::Button { .. } => "button",
            InteractionKind::Dial { .. } => "dial",
            InteractionKind::SnapConnector { .. } => "snap_connector",
            InteractionKind::TextDisplay { .. } => "text_display",
            InteractionKind::DynamicTextDisplay { .. } => "dynamic_text_display",
            InteractionKind::ImageDisplay { .. } => "image_display",
            InteractionKind::GraphDisplay { .. } => "graph_display",
            InteractionKind::Rotation { .. } => "rotation",
        }
    }

    /// Named states for buttons and dials.
    pub fn state_space(&self) -> Option<Vec<String>> {
        match self {
            InteractionKind::Button { states } if states.is_empty() => {
                Some(DEFAULT_BUTTON_STATES.iter().map(|s| s.to_string()).collect())
            }
            InteractionKind::Button { states } | InteractionKind::Dial { states } => Some(states.clone()),
            _ => None,
        }
    }

    pub fn tags(&self) -> Option<&[String]> {
        match self {
            InteractionKind::SnapConnector { tags } => Some(tags),
            _ => None,
        }
    }

    pub fn display_spec(&self) -> Option<DisplaySpec> {
        match self {
            InteractionKind::TextDisplay { text } => Some(DisplaySpec::Text {
                text: text.clone().unwrap_or_default(),
            }),
            InteractionKind::DynamicTextDisplay { channel } => Some(DisplaySpec::DynamicText {
                channel: channel.clone().unwrap_or_default(),
            }),
            InteractionKind::ImageDisplay { path } => Some(DisplaySpec::Image {
                path: path.clone().unwrap_or_default(),
            }),
            InteractionKind::GraphDisplay { channels, graph } => Some(DisplaySpec::Graph {
                channels: channels.clone(),
                graph: graph.unwrap_or(GraphKind::Line),
            }),
            _ => None,
        }
    }

    /// Channels the interaction reads.
    pub fn channels(&self) -> Vec<String> {
        match self {
            InteractionKind::DynamicTextDisplay { channel: Some(c) } => vec![c.clone()],
            InteractionKind::GraphDisplay { channels, .. } => channels.clone(),
            InteractionKind::Rotation {
                speed_channel: Some(c), ..
            } => vec![c.clone()],
            _ => Vec::new(),
        }
    }

    /// Missing or invalid type parameters, as (code, message).
    pub fn problems(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let unique = |xs: &[String]| xs.iter().collect::<HashSet<_>>().len() == xs.len();
        match self {
            InteractionKind::Button { states } => {
                if !unique(states) {
                    out.push(("invalid_parameter", "button states must be distinct".into()));
                }
            }
            InteractionKind::Dial { states } => {
                if states.len() < 2 {
                    out.push(("missing_parameter", format!("dial needs at least 2 states, has {}", states.len())));
                } else if !unique(states) {
                    out.push(("invalid_parameter", "dial states must be distinct".into()));
                }
            }
            InteractionKind::SnapConnector { tags } => {
                if tags.is_empty() {
                    out.push(("missing_parameter", "snap connector needs at least one tag".into()));
                }
            }
            InteractionKind::TextDisplay { text } => {
                if text.is_none() {
                    out.push(("missing_parameter", "text display needs `text`".into()));
                }
            }
            InteractionKind::DynamicTextDisplay { channel } => {
                if channel.is_none() {
                    out.push(("missing_parameter", "dynamic text display needs `channel`".into()));
                }
            }
            InteractionKind::ImageDisplay { path } => {
                if path.is_none() {
                    out.push(("missing_parameter", "image display needs `path`".into()));
                }
            }
            InteractionKind::GraphDisplay { channels, .. } => {
                if channels.is_empty() {
                    out.push(("missing_parameter", "graph display needs at least one channel".into()));
                }
            }
            InteractionKind::Rotation {
                axis,
                speed_deg_s,
                speed_channel,
            } => {
                match axis {
                    None => out.push(("missing_parameter", "rotation needs `axis`".into())),
                    Some(a) => {
                        let n = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
                        if !((n - 1.0).abs() <= 1e-6) {
                            out.push(("invalid_parameter", format!("rotation axis must be a unit vector (norm {n})")));
                        }
                    }
                }
                match (speed_deg_s, speed_channel) {
                    (None, None) => out.push((
                        "missing_parameter",
                        "rotation needs `speed_deg_s` or `speed_channel`".into(),
                    )),
                    (Some(_), Some(_)) => out.push((
                        "invalid_parameter",
                        "rotation takes either `speed_deg_s` or `speed_channel`, not both".into(),
                    )),
                    (Some(s), None) if !s.is_finite() => {
                        out.push(("invalid_parameter", "rotation speed must be finite".into()))
                    }
                    _ => {}
                }
            }
        }
        out
    }
}

/// Runtime state of one interaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InteractionState {
    Named { state: String },
    Connection { peers: Vec<String> },
    Angle { degrees: f64 },
    Displayed { value: Option<String> },
}

impl InteractionState {
    /// Dials and buttons start in their first state, connectors
    /// disconnected, rotations at 0°.
    pub fn initial(kind: &InteractionKind) -> Self {
        match kind {
            InteractionKind::Button { .. } | InteractionKind::Dial { .. } => InteractionState::Named {
                state: kind.state_space().and_then(|s| s.first().cloned()).unwrap_or_default(),
            },
            InteractionKind::SnapConnector { .. } => InteractionState::Connection { peers: Vec::new() },
            InteractionKind::Rotation { .. } => InteractionState::Angle { degrees: 0.0 },
            _ => InteractionState::Displayed { value: None },
        }
    }
}

/// Connector state name that means "no peers".
pub const DISCONNECTED: &str = "disconnected";

/// Snap connectors connect iff their tag sets intersect.
pub fn tags_intersect(a: &[String], b: &[String]) -> bool {
    a.iter().any(|t| b.contains(t))
}

/// Splits `instance.interaction`.
pub fn split_ref(r: &str) -> Option<(&str, &str)> {
    let (i, x) = r.split_once('.')?;
    (!i.is_empty() && !x.is_empty() && !x.contains('.')).then_some((i, x))
}

/// Splits `instance` or `instance/part`.
pub fn split_owner(path: &str) -> (&str, Option<&str>) {
    match path.split_once('/') {
        Some((i, p)) => (i, Some(p)),
        None => (path, None),
    }
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && !id.contains(['.', '/']) && !id.chars().any(char::is_whitespace)
}

impl Scenario {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            schema_version: SCENARIO_SCHEMA_VERSION,
            name: name.into(),
            environment: None,
            instances: Vec::new(),
            data: DataConfig::default(),
            process: None,
        }
    }

    pub fn instance(&self, id: &str) -> Option<&ModelInstance> {
        self.instances.iter().find(|i| i.id == id)
    }

    /// Looks up `instance.interaction`.
    pub fn interaction(&self, r: &str) -> Option<(&ModelInstance, &Interaction)> {
        let (inst, id) = split_ref(r)?;
        let instance = self.instance(inst)?;
        instance.interactions.iter().find(|x| x.id == id).map(|x| (instance, x))
    }

    /// Every interaction with its `instance.interaction` reference, in
    /// document order.
    pub fn interactions(&self) -> Vec<(String, &Interaction)> {
        self.instances
            .iter()
            .flat_map(|i| i.interactions.iter().map(move |x| (format!("{}.{}", i.id, x.id), x)))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        #[derive(Deserialize)]
        struct Header {
            schema_version: u32,
        }
        let h: Header = serde_json::from_str(text).map_err(|e| ScenarioError::Schema(e.to_string()))?;
        if h.schema_version != SCENARIO_SCHEMA_VERSION {
            return Err(ScenarioError::Version(h.schema_version));
        }
        serde_json::from_str(text).map_err(|e| ScenarioError::Schema(e.to_string()))
    }
}

/// A scenario together with the models its instances link to.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    /// Directory that relative paths resolve against.
    pub base_dir: PathBuf,
    /// Keyed by manifest path as written in the scenario.
    pub models: BTreeMap<String, Arc<Model>>,
}

pub fn load_scenario(path: &Path) -> Result<LoadedScenario, ScenarioError> {
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let scenario = Scenario::from_json(&text)?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    LoadedScenario::resolve(scenario, base_dir)
}

pub fn save_scenario(scenario: &Scenario, path: &Path) -> Result<(), ScenarioError> {
    fs::write(path, scenario.to_json()).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })
}

impl LoadedScenario {
    /// Loads every linked manifest once.
    pub fn resolve(scenario: Scenario, base_dir: PathBuf) -> Result<Self, ScenarioError> {
        let mut loaded = LoadedScenario {
            scenario,
            base_dir,
            models: BTreeMap::new(),
        };
        let mut links: Vec<(String, String)> = loaded
            .scenario
            .instances
            .iter()
            .map(|i| (i.id.clone(), i.model.clone()))
            .collect();
        if let Some(env) = &loaded.scenario.environment {
            links.insert(0, ("environment".into(), env.clone()));
        }
        for (instance, path) in links {
            loaded.ensure_model(&instance, &path)?;
        }
        Ok(loaded)
    }

    fn ensure_model(&mut self, instance: &str, path: &str) -> Result<Arc<Model>, ScenarioError> {
        if let Some(m) = self.models.get(path) {
            return Ok(m.clone());
        }
        let model = load_model(&self.base_dir.join(path)).map_err(|e| ScenarioError::UnresolvedModel {
            instance: instance.to_string(),
            path: path.to_string(),
            reason: e.to_string(),
        })?;
        let model = Arc::new(model);
        self.models.insert(path.to_string(), model.clone());
        Ok(model)
    }

    pub fn model_of(&self, instance: &str) -> Option<&Model> {
        let inst = self.scenario.instance(instance)?;
        self.models.get(&inst.model).map(|m| &**m)
    }

    /// True for `instance` or `instance/part` naming an existing part.
    pub fn resolves_equipment(&self, path: &str) -> bool {
        let (inst, part) = split_owner(path);
        match (self.scenario.instance(inst), part) {
            (None, _) => false,
            (Some(_), None) => true,
            (Some(_), Some(p)) => self.model_of(inst).is_some_and(|m| m.find_part(p).is_some()),
        }
    }

    pub fn instantiate_model(&mut self, manifest: &str, id: &str, transform: Transform) -> Result<(), ScenarioError> {
        if self.scenario.instance(id).is_some() {
            return Err(ScenarioError::DuplicateId(id.to_string()));
        }
        self.ensure_model(id, manifest)?;
        self.scenario.instances.push(ModelInstance {
            id: id.to_string(),
            model: manifest.to_string(),
            transform,
            part_overrides: Vec::new(),
            interactions: Vec::new(),
        });
        Ok(())
    }

    /// Attaches `interaction` to `owner` (`instance` or `instance/part`).
    pub fn add_interaction(&mut self, owner: &str, mut interaction: Interaction) -> Result<(), ScenarioError> {
        if !self.resolves_equipment(owner) {
            return Err(ScenarioError::UnknownOwner(owner.to_string()));
        }
        let mut problems: Vec<String> = interaction.kind.problems().into_iter().map(|(_, m)| m).collect();
        if !valid_id(&interaction.id) {
            problems.push(format!("`{}` is not a valid id", interaction.id));
        }
        let (inst, part) = split_owner(owner);
        let instance = self.scenario.instances.iter_mut().find(|i| i.id == inst).expect("owner resolved");
        if instance.interactions.iter().any(|x| x.id == interaction.id) {
            problems.push(format!("id `{}` already used on `{inst}`", interaction.id));
        }
        if !problems.is_empty() {
            return Err(ScenarioError::InvalidInteraction {
                id: interaction.id,
                problems,
            });
        }
        interaction.part = part.map(str::to_string);
        instance.interactions.push(interaction);
        Ok(())
    }

    /// Structural diagnostics; empty iff links resolve, ids are unique and
    /// interaction parameters are complete.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let s = &self.scenario;
        let names = s.data.names();
        let mut seen = HashSet::new();
        for inst in &s.instances {
            let ip = inst.id.as_str();
            if !valid_id(ip) {
                out.push(Diagnostic::new(ip, "invalid_id", format!("`{ip}` is not a valid instance id")));
            }
            if !seen.insert(ip) {
                out.push(Diagnostic::new(ip, "duplicate_id", format!("instance id `{ip}` is used more than once")));
            }
            if !inst.transform.is_valid() {
                out.push(Diagnostic::new(ip, "invalid_transform", "instance transform is not finite or has zero scale"));
            }
            let model = self.models.get(&inst.model);
            if model.is_none() {
                out.push(Diagnostic::new(
                    ip,
                    "unresolved_model",
                    format!("model link `{}` is not loaded", inst.model),
                ));
            }
            for o in &inst.part_overrides {
                if model.is_some_and(|m| m.find_part(&o.part).is_none()) {
                    out.push(Diagnostic::new(
                        format!("{ip}/{}", o.part),
                        "unknown_part",
                        format!("override targets part `{}` which `{}` does not contain", o.part, inst.model),
                    ));
                }
                if o.transform.is_some_and(|t| !t.is_valid()) {
                    out.push(Diagnostic::new(format!("{ip}/{}", o.part), "invalid_transform", "override transform is invalid"));
                }
            }
            let mut ids = HashSet::new();
            for x in &inst.interactions {
                let xp = format!("{ip}.{}", x.id);
                if !valid_id(&x.id) {
                    out.push(Diagnostic::new(&xp, "invalid_id", format!("`{}` is not a valid interaction id", x.id)));
                }
                if !ids.insert(x.id.as_str()) {
                    out.push(Diagnostic::new(&xp, "duplicate_interaction", format!("interaction id `{}` is used more than once on `{ip}`", x.id)));
                }
                if let Some(p) = &x.part {
                    if model.is_some_and(|m| m.find_part(p).is_none()) {
                        out.push(Diagnostic::new(format!("{ip}/{p}"), "unknown_owner", format!("interaction `{}` is attached to missing part `{p}`", x.id)));
                    }
                }
                if !x.transform.is_valid() {
                    out.push(Diagnostic::new(&xp, "invalid_transform", "interaction transform is invalid"));
                }
                for (code, msg) in x.kind.problems() {
                    out.push(Diagnostic::new(&xp, code, msg));
                }
                for c in x.kind.channels().iter().chain(&x.data_bindings) {
                    if !names.contains(c) {
                        out.push(Diagnostic::new(&xp, "unknown_channel", format!("channel `{c}` is not defined")));
                    }
                }
            }
        }
        let mut data_names = BTreeSet::new();
        for d in &s.data.derived {
            if !data_names.insert(&d.name) || s.data.constants.contains_key(&d.name) {
                out.push(Diagnostic::new(format!("data/{}", d.name), "duplicate_id", format!("`{}` is defined more than once", d.name)));
            }
            match crate::data::Expr::parse(&d.expr) {
                Ok(e) => {
                    for id in e.identifiers() {
                        if !names.contains(&id) {
                            out.push(Diagnostic::new(format!("data/{}", d.name), "unknown_channel", format!("`{id}` is not defined")));
                        }
                    }
                }
                Err(e) => out.push(Diagnostic::new(format!("data/{}", d.name), "expression_syntax", e.to_string())),
            }
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), ScenarioError> {
        save_scenario(&self.scenario, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::mesh::save_model;

    fn setup() -> (tempfile::TempDir, LoadedScenario) {
        let dir = tempfile::tempdir().unwrap();
        let model = fixtures::duplicate_model(3, 2);
        save_model(&model, &dir.path().join("widget.json")).unwrap();
        let mut s = Scenario::new("test");
        s.instances.push(ModelInstance {
            id: "w1".into(),
            model: "widget.json".into(),
            transform: Transform::translation(1.0, 2.0, 3.0),
            part_overrides: vec![],
            interactions: vec![],
        });
        let loaded = LoadedScenario::resolve(s, dir.path().to_path_buf()).unwrap();
        (dir, loaded)
    }

    fn dial(id: &str, states: &[&str]) -> Interaction {
        Interaction {
            id: id.into(),
            part: None,
            transform: Transform::IDENTITY,
            kind: InteractionKind::Dial {
                states: states.iter().map(|s| s.to_string()).collect(),
            },
            data_bindings: vec![],
        }
    }

    #[test]
    fn add_and_validate() {
        let (_d, mut l) = setup();
        l.add_interaction("w1", dial("power", &["off", "on"])).unwrap();
        l.add_interaction("w1/part001", dial("knob", &["a", "b", "c"])).unwrap();
        assert!(l.validate().is_empty(), "{:?}", l.validate());
        assert!(matches!(
            l.add_interaction("w1", dial("single", &["only"])),
            Err(ScenarioError::InvalidInteraction { .. })
        ));
        assert!(matches!(
            l.add_interaction("w9", dial("x", &["a", "b"])),
            Err(ScenarioError::UnknownOwner(_))
        ));
        assert!(matches!(
            l.add_interaction("w1/nope", dial("x", &["a", "b"])),
            Err(ScenarioError::UnknownOwner(_))
        ));
        let rot = Interaction {
            id: "spin".into(),
            part: None,
            transform: Transform::IDENTITY,
            kind: InteractionKind::Rotation {
                axis: Some([0.0, 0.0, 1.0]),
                speed_deg_s: None,
                speed_channel: Some("speed".into()),
            },
            data_bindings: vec![],
        };
        l.add_interaction("w1", rot).unwrap();
        let diags = l.validate();
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].code, "unknown_channel");
    }

    #[test]
    fn diagnostics_for_defects() {
        let (_d, mut l) = setup();
        l.scenario.instances[0].part_overrides.push(PartOverride {
            part: "ghost".into(),
            transform: None,
            hidden: true,
        });
        l.scenario.instances[0].interactions.push(dial("a", &["x", "y"]));
        l.scenario.instances[0].interactions.push(dial("a", &["x", "y"]));
        let diags = l.validate();
        let codes: Vec<_> = diags.iter().map(|d| d.code.as_str()).collect();
        assert_eq!(codes, vec!["unknown_part", "duplicate_interaction"]);
        assert_eq!(diags[0].path, "w1/ghost");
    }

    #[test]
    fn instantiate_shares_manifest() {
        let (_d, mut l) = setup();
        l.instantiate_model("widget.json", "w2", Transform::new([0.0; 3], [0.0, 90.0, 0.0], [2.0; 3]))
            .unwrap();
        assert_eq!(l.models.len(), 1);
        assert_eq!(l.scenario.instances[1].transform.scale, [2.0; 3]);
        assert!(matches!(
            l.instantiate_model("widget.json", "w2", Transform::IDENTITY),
            Err(ScenarioError::DuplicateId(_))
        ));
        assert!(matches!(
            l.instantiate_model("missing.json", "w3", Transform::IDENTITY),
            Err(ScenarioError::UnresolvedModel { .. })
        ));
    }

    #[test]
    fn round_trip() {
        let (d, mut l) = setup();
        l.add_interaction("w1", dial("power", &["off", "on"])).unwrap();
        let path = d.path().join("scene.json");
        l.save(&path).unwrap();
        let back = load_scenario(&path).unwrap();
        assert_eq!(back.scenario, l.scenario);
    }

    #[test]
    fn missing_manifest_names_instance() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = Scenario::new("broken");
        s.instances.push(ModelInstance {
            id: "motor".into(),
            model: "nowhere.json".into(),
            transform: Transform::IDENTITY,
            part_overrides: vec![],
            interactions: vec![],
        });
        let err = LoadedScenario::resolve(s, dir.path().to_path_buf()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("unresolved model link") && msg.contains("motor"), "{msg}");
    }

    #[test]
    fn schema_errors() {
        assert!(matches!(Scenario::from_json("{}"), Err(ScenarioError::Schema(_))));
        assert!(matches!(
            Scenario::from_json(r#"{"schema_version": 9, "name": "x", "instances": []}"#),
            Err(ScenarioError::Version(9))
        ));
        let incomplete = r#"{"schema_version": 1, "name": "x", "instances": [
            {"id": "a", "model": "m.json", "interactions": [{"id": "d", "type": "dial"}]}]}"#;
        let s = Scenario::from_json(incomplete).unwrap();
        assert_eq!(s.instances[0].interactions[0].kind.problems().len(), 1);
    }
}
