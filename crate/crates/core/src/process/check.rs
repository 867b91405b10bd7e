use std::collections::{HashMap, HashSet};

use super::{Condition, ProcessModel, Step};
use crate::scenario::{tags_intersect, Diagnostic, InteractionKind, LoadedScenario, DISCONNECTED};

/// Static check of a process against a scenario. Empty iff every equipment
/// and interaction reference resolves, every required state is legal for
/// its interaction, and next-links are sound.
pub fn check_scenario(process: &ProcessModel, scenario: &LoadedScenario) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let steps = process.all_steps();
    let mut ids: HashMap<&str, usize> = HashMap::new();
    for s in &steps {
        *ids.entry(s.id()).or_default() += 1;
    }
    for s in &steps {
        if ids[s.id()] > 1 && !out.iter().any(|d: &Diagnostic| d.code == "duplicate_id" && d.path == s.id()) {
            out.push(Diagnostic::new(s.id(), "duplicate_id", format!("step id `{}` is used more than once", s.id())));
        }
    }

    match &process.entry {
        Some(e) if !ids.contains_key(e.as_str()) => {
            out.push(Diagnostic::new("entry", "dangling_next", format!("entry step `{e}` does not exist")));
        }
        None if !process.steps.is_empty() => {
            out.push(Diagnostic::new("entry", "dangling_next", "process has steps but no entry"));
        }
        _ => {}
    }

    for s in &steps {
        let path = s.id();
        if let Some(n) = s.next() {
            if !ids.contains_key(n) {
                out.push(Diagnostic::new(path, "dangling_next", format!("next step `{n}` does not exist")));
            }
        }
        match s {
            Step::Procedure(p) => {
                if p.children.is_empty() {
                    out.push(Diagnostic::new(path, "empty_procedure", "procedure has no steps"));
                }
            }
            Step::Instruction(i) => {
                for (field, obj) in [
                    ("action", &i.action_object),
                    ("target", &i.target_object),
                    ("target2", &i.target_object2),
                ] {
                    if let Some(o) = obj {
                        if !scenario.resolves_equipment(o) {
                            out.push(Diagnostic::new(
                                format!("{path}/{field}"),
                                "unresolved_reference",
                                format!("equipment `{o}` is not in the scenario"),
                            ));
                        }
                    }
                }
                match &i.completion {
                    Condition::Wait { seconds } => {
                        if !(seconds.is_finite() && *seconds > 0.0) {
                            out.push(Diagnostic::new(path, "invalid_condition", format!("wait of {seconds} s is not positive")));
                        }
                    }
                    Condition::StateConjunction { terms } => {
                        if terms.is_empty() {
                            out.push(Diagnostic::new(path, "invalid_condition", "empty condition"));
                        }
                        for (k, t) in terms.iter().enumerate() {
                            let tp = format!("{path}/complete/{k}");
                            let Some((_, x)) = scenario.scenario.interaction(&t.interaction) else {
                                out.push(Diagnostic::new(
                                    tp,
                                    "unresolved_reference",
                                    format!("interaction `{}` is not in the scenario", t.interaction),
                                ));
                                continue;
                            };
                            if let Some(problem) = state_problem(scenario, &t.interaction, &x.kind, &t.state) {
                                out.push(Diagnostic::new(tp, "invalid_state", problem));
                            }
                        }
                    }
                }
            }
        }
    }

    // Cycles along next-chains.
    let by_id: HashMap<&str, &Step> = steps.iter().map(|s| (s.id(), *s)).collect();
    let mut reported = HashSet::new();
    for s in &steps {
        let mut seen = HashSet::new();
        let mut cur = Some(s.id());
        while let Some(id) = cur {
            if !seen.insert(id) {
                if reported.insert(id) {
                    out.push(Diagnostic::new(id, "next_cycle", format!("next-links starting at `{}` loop back to `{id}`", s.id())));
                }
                break;
            }
            cur = by_id.get(id).and_then(|st| st.next());
        }
    }
    out
}

fn state_problem(scenario: &LoadedScenario, reference: &str, kind: &InteractionKind, state: &str) -> Option<String> {
    if let Some(space) = kind.state_space() {
        return (!space.iter().any(|s| s == state))
            .then(|| format!("`{state}` is not a state of `{reference}` (states: {})", space.join(", ")));
    }
    if let Some(tags) = kind.tags() {
        if state == DISCONNECTED {
            return None;
        }
        if state == reference {
            return Some(format!("`{reference}` cannot connect to itself"));
        }
        return match scenario.scenario.interaction(state) {
            None => Some(format!("`{state}` is neither `{DISCONNECTED}` nor a connector in the scenario")),
            Some((_, peer)) => match peer.kind.tags() {
                None => Some(format!("`{state}` is not a snap connector")),
                Some(pt) if !tags_intersect(tags, pt) => {
                    Some(format!("`{reference}` and `{state}` share no snap tags"))
                }
                Some(_) => None,
            },
        };
    }
    Some(format!("`{reference}` is a {} and has no states", kind.type_name()))
}
