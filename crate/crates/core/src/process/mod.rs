//! Process model: procedures and instructions parsed from a structured text
//! form, checked against a scenario and walked step by step.

mod check;
mod parse;

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use check::check_scenario;
pub use parse::{parse_process, print_process};

use crate::scenario::split_ref;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProcessError {
    #[error("line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("line {line}, column {column}: unknown keyword `{keyword}`")]
    UnknownKeyword { line: usize, column: usize, keyword: String },
    #[error("line {line}: duplicate step id `{id}`")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: instruction `{id}` is missing completion")]
    MissingCompletion { line: usize, id: String },
    #[error("unknown step `{0}`")]
    UnknownStep(String),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ProcessModel {
    pub steps: Vec<Step>,
    pub entry: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Step {
    Procedure(Procedure),
    Instruction(Instruction),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Procedure {
    pub id: String,
    pub description: String,
    pub ordered: bool,
    pub children: Vec<Step>,
    pub next: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instruction {
    pub id: String,
    pub description: String,
    /// Wait-only instructions may have no action object.
    pub action_object: Option<String>,
    pub target_object: Option<String>,
    pub target_object2: Option<String>,
    /// Interactions whose state the completion condition reads.
    pub monitored: Vec<Monitored>,
    pub completion: Condition,
    pub next: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Monitored {
    pub equipment: String,
    pub interaction: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Condition {
    StateConjunction { terms: Vec<StateTerm> },
    Wait { seconds: f64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateTerm {
    /// `instance.interaction`
    pub interaction: String,
    pub state: String,
}

impl Condition {
    pub fn monitored(&self) -> Vec<Monitored> {
        let mut out: Vec<Monitored> = Vec::new();
        if let Condition::StateConjunction { terms } = self {
            for t in terms {
                if let Some((e, i)) = split_ref(&t.interaction) {
                    let m = Monitored {
                        equipment: e.to_string(),
                        interaction: i.to_string(),
                    };
                    if !out.contains(&m) {
                        out.push(m);
                    }
                }
            }
        }
        out
    }
}

impl Step {
    pub fn id(&self) -> &str {
        match self {
            Step::Procedure(p) => &p.id,
            Step::Instruction(i) => &i.id,
        }
    }

    pub fn description(&self) -> &str {
        match self {
            Step::Procedure(p) => &p.description,
            Step::Instruction(i) => &i.description,
        }
    }

    pub fn next(&self) -> Option<&str> {
        match self {
            Step::Procedure(p) => p.next.as_deref(),
            Step::Instruction(i) => i.next.as_deref(),
        }
    }

    fn set_next(&mut self, next: Option<String>) {
        match self {
            Step::Procedure(p) => p.next = next,
            Step::Instruction(i) => i.next = next,
        }
    }

    pub fn children(&self) -> &[Step] {
        match self {
            Step::Procedure(p) => &p.children,
            Step::Instruction(_) => &[],
        }
    }
}

/// Outcome of [`next_step`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NextStep {
    Step(String),
    Done,
}

impl ProcessModel {
    /// Depth-first, document order.
    pub fn all_steps(&self) -> Vec<&Step> {
        fn walk<'a>(steps: &'a [Step], out: &mut Vec<&'a Step>) {
            for s in steps {
                out.push(s);
                walk(s.children(), out);
            }
        }
        let mut out = Vec::new();
        walk(&self.steps, &mut out);
        out
    }

    pub fn instructions(&self) -> Vec<&Instruction> {
        self.all_steps()
            .into_iter()
            .filter_map(|s| match s {
                Step::Instruction(i) => Some(i),
                _ => None,
            })
            .collect()
    }

    pub fn find(&self, id: &str) -> Option<&Step> {
        self.all_steps().into_iter().find(|s| s.id() == id)
    }

    pub fn instruction(&self, id: &str) -> Option<&Instruction> {
        match self.find(id)? {
            Step::Instruction(i) => Some(i),
            _ => None,
        }
    }

    /// Recomputes next-links: root steps and children of ordered procedures
    /// chain in textual order; children of unordered procedures get none.
    pub fn link(&mut self) {
        fn chain(steps: &mut [Step], ordered: bool) {
            let ids: Vec<String> = steps.iter().map(|s| s.id().to_string()).collect();
            for (k, s) in steps.iter_mut().enumerate() {
                s.set_next(if ordered { ids.get(k + 1).cloned() } else { None });
                if let Step::Procedure(p) = s {
                    chain(&mut p.children, p.ordered);
                }
            }
        }
        chain(&mut self.steps, true);
        self.entry = self.steps.first().map(|s| s.id().to_string());
    }

    pub fn is_complete(&self, step: &Step, completed: &BTreeSet<String>) -> bool {
        completed.contains(step.id())
            || match step {
                Step::Procedure(p) => p.children.iter().all(|c| self.is_complete(c, completed)),
                Step::Instruction(_) => false,
            }
    }

    /// Instructions that may be worked on now, in document order. Ordered
    /// containers expose their first incomplete step along the next-chain,
    /// unordered ones every incomplete child.
    pub fn eligible(&self, completed: &BTreeSet<String>) -> Vec<String> {
        let mut out = Vec::new();
        self.eligible_in(&self.steps, self.entry.as_deref(), true, completed, &mut out);
        out
    }

    fn eligible_in(
        &self,
        steps: &[Step],
        entry: Option<&str>,
        ordered: bool,
        completed: &BTreeSet<String>,
        out: &mut Vec<String>,
    ) {
        if ordered {
            let mut seen = HashSet::new();
            let mut cur = entry.and_then(|id| steps.iter().find(|s| s.id() == id));
            while let Some(s) = cur {
                if !seen.insert(s.id()) {
                    return;
                }
                if !self.is_complete(s, completed) {
                    self.expand(s, completed, out);
                    return;
                }
                cur = s.next().and_then(|id| steps.iter().find(|s| s.id() == id));
            }
        } else {
            for s in steps.iter().filter(|s| !self.is_complete(s, completed)) {
                self.expand(s, completed, out);
            }
        }
    }

    fn expand(&self, step: &Step, completed: &BTreeSet<String>, out: &mut Vec<String>) {
        match step {
            Step::Instruction(i) => out.push(i.id.clone()),
            Step::Procedure(p) => {
                let entry = p.children.first().map(|c| c.id());
                self.eligible_in(&p.children, entry, p.ordered, completed, out);
            }
        }
    }
}

/// Next step to work on once `current` is complete, given the steps already
/// completed. Descends into procedures down to an instruction.
pub fn next_step(process: &ProcessModel, current: &str, completed: &BTreeSet<String>) -> Result<NextStep, ProcessError> {
    if process.find(current).is_none() {
        return Err(ProcessError::UnknownStep(current.to_string()));
    }
    let mut done = completed.clone();
    done.insert(current.to_string());
    Ok(match process.eligible(&done).into_iter().next() {
        Some(id) => NextStep::Step(id),
        None => NextStep::Done,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(ids: &[&str]) -> BTreeSet<String> {
        ids.iter().map(|s| s.to_string()).collect()
    }

    const DOC: &str = r#"
PROCEDURE 1 "Chain" ORDERED
  INSTRUCTION 1.1 "first"
    COMPLETE AFTER 1 SECONDS
  INSTRUCTION 1.2 "second"
    COMPLETE AFTER 1 SECONDS
  INSTRUCTION 1.3 "third"
    COMPLETE AFTER 1 SECONDS
PROCEDURE 2 "Any order" UNORDERED
  INSTRUCTION A "a"
    COMPLETE AFTER 1 SECONDS
  INSTRUCTION B "b"
    COMPLETE AFTER 1 SECONDS
"#;

    #[test]
    fn chain_and_unordered() {
        let p = parse_process(DOC).unwrap();
        assert_eq!(p.entry.as_deref(), Some("1"));
        assert_eq!(next_step(&p, "1.1", &set(&[])).unwrap(), NextStep::Step("1.2".into()));
        assert_eq!(p.eligible(&set(&["1.1", "1.2", "1.3"])), vec!["A", "B"]);
        assert_eq!(
            next_step(&p, "A", &set(&["1.1", "1.2", "1.3", "A"])).unwrap(),
            NextStep::Step("B".into())
        );
        assert_eq!(
            next_step(&p, "B", &set(&["1.1", "1.2", "1.3", "A"])).unwrap(),
            NextStep::Done
        );
        assert!(matches!(next_step(&p, "9", &set(&[])), Err(ProcessError::UnknownStep(_))));
    }

    #[test]
    fn empty_process_is_done() {
        let p = parse_process("# nothing\n").unwrap();
        assert!(p.eligible(&set(&[])).is_empty());
        assert_eq!(p.entry, None);
    }
}
