//! The electrical lab fixture (Ohm's law practical) and a seeded corpus of
//! single-defect mutations over it.

use std::collections::BTreeSet;
use std::error::Error;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::process::{parse_process, Condition, ProcessModel, Step};
use crate::scenario::{load_scenario, split_owner, split_ref, LoadedScenario};

pub fn dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/case_study")
}

pub fn scenario_path() -> PathBuf {
    dir().join("scenario.json")
}

pub fn process_path() -> PathBuf {
    dir().join("process.proc")
}

pub fn script_path() -> PathBuf {
    dir().join("script.jsonl")
}

pub fn load() -> Result<(LoadedScenario, ProcessModel), Box<dyn Error + Send + Sync>> {
    let scenario = load_scenario(&scenario_path())?;
    let process = parse_process(&std::fs::read_to_string(process_path())?)?;
    Ok((scenario, process))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Mutation {
    /// Removes an interaction the process refers to.
    DeleteInteraction { reference: String },
    /// Renames a scenario instance the process refers to.
    RenameEquipment { from: String, to: String },
    /// Replaces the required state of one condition term.
    InvalidateState { step: String, term: usize, state: String },
}

impl Mutation {
    /// Name every diagnostic caused by this mutation must mention.
    pub fn key(&self) -> &str {
        match self {
            Mutation::DeleteInteraction { reference } => reference,
            Mutation::RenameEquipment { from, .. } => from,
            Mutation::InvalidateState { state, .. } => state,
        }
    }

    pub fn apply(&self, scenario: &LoadedScenario, process: &ProcessModel) -> (LoadedScenario, ProcessModel) {
        let mut s = scenario.clone();
        let mut p = process.clone();
        match self {
            Mutation::DeleteInteraction { reference } => {
                let (inst, id) = split_ref(reference).expect("interaction reference");
                if let Some(i) = s.scenario.instances.iter_mut().find(|i| i.id == inst) {
                    i.interactions.retain(|x| x.id != id);
                }
            }
            Mutation::RenameEquipment { from, to } => {
                if let Some(i) = s.scenario.instances.iter_mut().find(|i| i.id == *from) {
                    i.id = to.clone();
                }
            }
            Mutation::InvalidateState { step, term, state } => {
                fn walk(steps: &mut [Step], id: &str, k: usize, state: &str) {
                    for st in steps {
                        match st {
                            Step::Procedure(pr) => walk(&mut pr.children, id, k, state),
                            Step::Instruction(i) if i.id == id => {
                                if let Condition::StateConjunction { terms } = &mut i.completion {
                                    terms[k].state = state.to_string();
                                }
                            }
                            Step::Instruction(_) => {}
                        }
                    }
                }
                walk(&mut p.steps, step, *term, state);
            }
        }
        (s, p)
    }
}

/// `per_kind` mutations of each kind, drawn without replacement from the
/// candidates the process offers.
pub fn mutation_corpus(scenario: &LoadedScenario, process: &ProcessModel, per_kind: usize, seed: u64) -> Vec<Mutation> {
    let mut interactions = BTreeSet::new();
    let mut equipment = BTreeSet::new();
    let mut terms = Vec::new();
    for i in process.instructions() {
        for o in [&i.action_object, &i.target_object, &i.target_object2].into_iter().flatten() {
            equipment.insert(split_owner(o).0.to_string());
        }
        if let Condition::StateConjunction { terms: ts } = &i.completion {
            for (k, t) in ts.iter().enumerate() {
                interactions.insert(t.interaction.clone());
                if scenario.scenario.interaction(&t.state).is_some() {
                    interactions.insert(t.state.clone());
                }
                terms.push((i.id.clone(), k, t.state.clone()));
            }
        }
    }
    for r in &interactions {
        if let Some((inst, _)) = split_ref(r) {
            equipment.insert(inst.to_string());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pick = |mut v: Vec<Mutation>| {
        v.shuffle(&mut rng);
        v.truncate(per_kind);
        v
    };
    let mut out = pick(
        interactions
            .into_iter()
            .map(|reference| Mutation::DeleteInteraction { reference })
            .collect(),
    );
    out.extend(pick(
        equipment
            .into_iter()
            .map(|from| Mutation::RenameEquipment {
                to: format!("{from}_renamed"),
                from,
            })
            .collect(),
    ));
    out.extend(pick(
        terms
            .into_iter()
            .map(|(step, term, state)| Mutation::InvalidateState {
                state: format!("{}_invalid", state.replace('.', "_")),
                step,
                term,
            })
            .collect(),
    ));
    out
}
