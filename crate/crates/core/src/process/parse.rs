//! Line-oriented process document reader and canonical printer.
//!
//! ```text
//! PROCEDURE <id> "<desc>" [ORDERED|UNORDERED]
//!   INSTRUCTION <id> "<desc>"
//!     ACTION <equipment-path>
//!     TARGET <equipment-path>
//!     TARGET2 <equipment-path>
//!     COMPLETE WHEN <instance>.<interaction> = <state> (AND ...)*
//!     COMPLETE AFTER <n> SECONDS
//! ```
//!
//! Nesting is by 2-space indentation; `#` starts a comment.

use std::collections::HashSet;
use std::fmt::Write as _;

use super::{Condition, Instruction, ProcessError, ProcessModel, Procedure, StateTerm, Step};
use crate::scenario::split_ref;

const KEYWORDS: [&str; 6] = ["PROCEDURE", "INSTRUCTION", "ACTION", "TARGET", "TARGET2", "COMPLETE"];

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Str(String),
    Eq,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    col: usize,
    end: usize,
}

#[derive(Debug)]
struct Line {
    no: usize,
    level: usize,
    tokens: Vec<Token>,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> ProcessError {
    ProcessError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn lex_line(no: usize, text: &str) -> Result<Option<Line>, ProcessError> {
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() && chars[i] == ' ' {
        i += 1;
    }
    if chars.get(i) == Some(&'\t') {
        return Err(syntax(no, i + 1, "tabs are not allowed in indentation"));
    }
    let indent = i;
    let mut tokens = Vec::new();
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c == '#' {
            break;
        } else if c == '=' {
            tokens.push(Token { tok: Tok::Eq, col, end: col + 1 });
            i += 1;
        } else if c == '"' {
            let mut s = String::new();
            i += 1;
            loop {
                match chars.get(i) {
                    None => return Err(syntax(no, col, "unterminated string")),
                    Some('"') => break,
                    Some('\\') => {
                        let e = match chars.get(i + 1) {
                            Some('n') => '\n',
                            Some('t') => '\t',
                            Some(&e @ ('"' | '\\')) => e,
                            _ => return Err(syntax(no, i + 1, "invalid escape")),
                        };
                        s.push(e);
                        i += 2;
                    }
                    Some(&ch) => {
                        s.push(ch);
                        i += 1;
                    }
                }
            }
            i += 1;
            tokens.push(Token { tok: Tok::Str(s), col, end: i + 1 });
        } else {
            let start = i;
            while i < chars.len() && !chars[i].is_whitespace() && !matches!(chars[i], '"' | '=' | '#') {
                i += 1;
            }
            tokens.push(Token {
                tok: Tok::Word(chars[start..i].iter().collect()),
                col,
                end: i + 1,
            });
        }
    }
    if tokens.is_empty() {
        return Ok(None);
    }
    if indent % 2 != 0 {
        return Err(syntax(no, 1, "indentation must be a multiple of 2 spaces"));
    }
    Ok(Some(Line {
        no,
        level: indent / 2,
        tokens,
    }))
}

struct Cursor<'a> {
    line: &'a Line,
    k: usize,
}

impl<'a> Cursor<'a> {
    fn new(line: &'a Line) -> Self {
        Self { line, k: 1 }
    }

    fn end_col(&self) -> usize {
        self.line.tokens.last().map_or(1, |t| t.end)
    }

    fn peek(&self) -> Option<&'a Token> {
        self.line.tokens.get(self.k)
    }

    fn err_here(&self, message: &str) -> ProcessError {
        let col = self.peek().map_or(self.end_col(), |t| t.col);
        syntax(self.line.no, col, message)
    }

    fn word(&mut self, what: &str) -> Result<(&'a str, usize), ProcessError> {
        match self.peek() {
            Some(Token {
                tok: Tok::Word(w), col, ..
            }) => {
                self.k += 1;
                Ok((w, *col))
            }
            _ => Err(self.err_here(&format!("expected {what}"))),
        }
    }

    fn string(&mut self, what: &str) -> Result<&'a str, ProcessError> {
        match self.peek() {
            Some(Token { tok: Tok::Str(s), .. }) => {
                self.k += 1;
                Ok(s)
            }
            _ => Err(self.err_here(&format!("expected {what}"))),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ProcessError> {
        match self.peek() {
            Some(Token { tok: Tok::Word(w), .. }) if w == kw => {
                self.k += 1;
                Ok(())
            }
            _ => Err(self.err_here(&format!("expected `{kw}`"))),
        }
    }

    fn finish(&self) -> Result<(), ProcessError> {
        match self.peek() {
            None => Ok(()),
            Some(t) => Err(syntax(self.line.no, t.col, format!("unexpected {}", describe(&t.tok)))),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Word(w) => format!("`{w}`"),
        Tok::Str(_) => "string".into(),
        Tok::Eq => "`=`".into(),
    }
}

struct Parser {
    lines: Vec<Line>,
    pos: usize,
    ids: HashSet<String>,
}

impl Parser {
    fn steps(&mut self, level: usize) -> Result<Vec<Step>, ProcessError> {
        let mut out = Vec::new();
        while let Some(line) = self.lines.get(self.pos) {
            if line.level < level {
                break;
            }
            if line.level > level {
                return Err(syntax(line.no, line.level * 2 + 1, "unexpected indentation"));
            }
            out.push(self.step(level)?);
        }
        Ok(out)
    }

    fn id(&mut self, c: &mut Cursor) -> Result<String, ProcessError> {
        let (id, _) = c.word("a step id")?;
        if !self.ids.insert(id.to_string()) {
            return Err(ProcessError::DuplicateId {
                line: c.line.no,
                id: id.to_string(),
            });
        }
        Ok(id.to_string())
    }

    fn step(&mut self, level: usize) -> Result<Step, ProcessError> {
        let line = &self.lines[self.pos];
        let head = &line.tokens[0];
        let kw = match &head.tok {
            Tok::Word(w) => w.as_str(),
            t => return Err(syntax(line.no, head.col, format!("expected a keyword, found {}", describe(t)))),
        };
        match kw {
            "PROCEDURE" => self.procedure(level),
            "INSTRUCTION" => self.instruction(level),
            k if KEYWORDS.contains(&k) => Err(syntax(line.no, head.col, format!("`{k}` must belong to an instruction"))),
            k => Err(ProcessError::UnknownKeyword {
                line: line.no,
                column: head.col,
                keyword: k.to_string(),
            }),
        }
    }

    fn procedure(&mut self, level: usize) -> Result<Step, ProcessError> {
        let lines = std::mem::take(&mut self.lines);
        let line = &lines[self.pos];
        let mut c = Cursor::new(line);
        let header = (|| {
            let id = self.id(&mut c)?;
            let description = c.string("a quoted description")?.to_string();
            let ordered = match c.peek() {
                None => true,
                Some(Token { tok: Tok::Word(w), .. }) if w == "ORDERED" => {
                    c.k += 1;
                    true
                }
                Some(Token { tok: Tok::Word(w), .. }) if w == "UNORDERED" => {
                    c.k += 1;
                    false
                }
                _ => return Err(c.err_here("expected `ORDERED` or `UNORDERED`")),
            };
            c.finish()?;
            Ok((id, description, ordered))
        })();
        let (no, col) = (line.no, line.level * 2 + 1);
        self.lines = lines;
        let (id, description, ordered) = header?;
        self.pos += 1;
        let children = self.steps(level + 1)?;
        if children.is_empty() {
            return Err(syntax(no, col, format!("procedure `{id}` has no steps")));
        }
        Ok(Step::Procedure(Procedure {
            id,
            description,
            ordered,
            children,
            next: None,
        }))
    }

    fn instruction(&mut self, level: usize) -> Result<Step, ProcessError> {
        let lines = std::mem::take(&mut self.lines);
        let result = self.instruction_in(&lines, level);
        self.lines = lines;
        result
    }

    fn instruction_in(&mut self, lines: &[Line], level: usize) -> Result<Step, ProcessError> {
        let line = &lines[self.pos];
        let mut c = Cursor::new(line);
        let id = self.id(&mut c)?;
        let description = c.string("a quoted description")?.to_string();
        c.finish()?;
        self.pos += 1;

        let mut objects: [Option<String>; 3] = [None, None, None];
        let mut completion = None;
        while let Some(attr) = lines.get(self.pos) {
            if attr.level <= level {
                break;
            }
            if attr.level > level + 1 {
                return Err(syntax(attr.no, attr.level * 2 + 1, "unexpected indentation"));
            }
            let head = &attr.tokens[0];
            let kw = match &head.tok {
                Tok::Word(w) => w.as_str(),
                t => return Err(syntax(attr.no, head.col, format!("expected a keyword, found {}", describe(t)))),
            };
            let mut c = Cursor::new(attr);
            match kw {
                "ACTION" | "TARGET" | "TARGET2" => {
                    let slot = match kw {
                        "ACTION" => 0,
                        "TARGET" => 1,
                        _ => 2,
                    };
                    if objects[slot].is_some() {
                        return Err(syntax(attr.no, head.col, format!("duplicate `{kw}`")));
                    }
                    let (path, col) = c.word("an equipment path")?;
                    if path.contains('.') || path.starts_with('/') || path.ends_with('/') {
                        return Err(syntax(attr.no, col, format!("`{path}` is not an equipment path")));
                    }
                    c.finish()?;
                    objects[slot] = Some(path.to_string());
                }
                "COMPLETE" => {
                    if completion.is_some() {
                        return Err(syntax(attr.no, head.col, "duplicate `COMPLETE`"));
                    }
                    completion = Some(condition(&mut c)?);
                }
                "PROCEDURE" | "INSTRUCTION" => {
                    return Err(syntax(attr.no, head.col, "instructions cannot contain steps"));
                }
                k => {
                    return Err(ProcessError::UnknownKeyword {
                        line: attr.no,
                        column: head.col,
                        keyword: k.to_string(),
                    })
                }
            }
            self.pos += 1;
        }
        let completion = completion.ok_or(ProcessError::MissingCompletion {
            line: line.no,
            id: id.clone(),
        })?;
        let [action_object, target_object, target_object2] = objects;
        Ok(Step::Instruction(Instruction {
            id,
            description,
            action_object,
            target_object,
            target_object2,
            monitored: completion.monitored(),
            completion,
            next: None,
        }))
    }
}

fn condition(c: &mut Cursor) -> Result<Condition, ProcessError> {
    let (mode, col) = c.word("`WHEN` or `AFTER`")?;
    match mode {
        "WHEN" => {
            let mut terms = Vec::new();
            loop {
                let (r, col) = c.word("`<instance>.<interaction>`")?;
                if split_ref(r).is_none() {
                    return Err(syntax(c.line.no, col, format!("`{r}` is not an `<instance>.<interaction>` reference")));
                }
                match c.peek() {
                    Some(Token { tok: Tok::Eq, .. }) => c.k += 1,
                    _ => return Err(c.err_here("expected `=`")),
                }
                let state = match c.peek() {
                    Some(Token {
                        tok: Tok::Word(w) | Tok::Str(w),
                        ..
                    }) => {
                        c.k += 1;
                        w.clone()
                    }
                    _ => return Err(c.err_here("expected a state")),
                };
                terms.push(StateTerm {
                    interaction: r.to_string(),
                    state,
                });
                if c.peek().is_none() {
                    break;
                }
                c.keyword("AND")?;
            }
            Ok(Condition::StateConjunction { terms })
        }
        "AFTER" => {
            let (n, col) = c.word("a number of seconds")?;
            let seconds: f64 = n
                .parse()
                .ok()
                .filter(|s: &f64| s.is_finite() && *s > 0.0)
                .ok_or_else(|| syntax(c.line.no, col, format!("`{n}` is not a positive number of seconds")))?;
            c.keyword("SECONDS")?;
            c.finish()?;
            Ok(Condition::Wait { seconds })
        }
        _ => Err(syntax(c.line.no, col, "expected `WHEN` or `AFTER`")),
    }
}

/// Parses a process document. Ordered containers (and the document root)
/// get next-links in textual order.
pub fn parse_process(document: &str) -> Result<ProcessModel, ProcessError> {
    let mut lines = Vec::new();
    for (i, text) in document.lines().enumerate() {
        if let Some(l) = lex_line(i + 1, text)? {
            lines.push(l);
        }
    }
    let mut p = Parser {
        lines,
        pos: 0,
        ids: HashSet::new(),
    };
    let steps = p.steps(0)?;
    let mut model = ProcessModel { steps, entry: None };
    model.link();
    Ok(model)
}

fn is_bare(s: &str) -> bool {
    !s.is_empty()
        && !s.chars().any(|c| c.is_whitespace() || matches!(c, '"' | '=' | '#' | '\\'))
        && !KEYWORDS.contains(&s)
        && s != "AND"
}

fn quote(s: &str) -> String {
    let mut out = String::from("\"");
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Canonical text form; `parse_process(&print_process(m))` gives back `m`.
pub fn print_process(model: &ProcessModel) -> String {
    fn step(s: &Step, level: usize, out: &mut String) {
        let pad = "  ".repeat(level);
        match s {
            Step::Procedure(p) => {
                let order = if p.ordered { "ORDERED" } else { "UNORDERED" };
                let _ = writeln!(out, "{pad}PROCEDURE {} {} {order}", p.id, quote(&p.description));
                for c in &p.children {
                    step(c, level + 1, out);
                }
            }
            Step::Instruction(i) => {
                let _ = writeln!(out, "{pad}INSTRUCTION {} {}", i.id, quote(&i.description));
                for (kw, obj) in [
                    ("ACTION", &i.action_object),
                    ("TARGET", &i.target_object),
                    ("TARGET2", &i.target_object2),
                ] {
                    if let Some(o) = obj {
                        let _ = writeln!(out, "{pad}  {kw} {o}");
                    }
                }
                match &i.completion {
                    Condition::Wait { seconds } => {
                        let _ = writeln!(out, "{pad}  COMPLETE AFTER {seconds} SECONDS");
                    }
                    Condition::StateConjunction { terms } => {
                        let terms: Vec<String> = terms
                            .iter()
                            .map(|t| {
                                let st = if is_bare(&t.state) { t.state.clone() } else { quote(&t.state) };
                                format!("{} = {st}", t.interaction)
                            })
                            .collect();
                        let _ = writeln!(out, "{pad}  COMPLETE WHEN {}", terms.join(" AND "));
                    }
                }
            }
        }
    }
    let mut out = String::new();
    for s in &model.steps {
        step(s, 0, &mut out);
    }
    out
}
