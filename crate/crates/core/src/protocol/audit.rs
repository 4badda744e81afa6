//! Event logs and the locality audit.
//!
//! Log layout: the initial tree (`n=<N>` plus `u v` lines), a line `events`,
//! then per round `round <r>`, `msg <from> <to> <kind>` and
//! `commit <op log line>` lines in the order they happened.

use std::fmt;

use thiserror::Error;

use super::{MessageKind, Payload, ProtocolMessage};
use crate::ops::LoggedOp;
use crate::tree::{canonical, parse_edge_line, parse_header, LabeledTree, TreeError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Event {
    Round(usize),
    Message(ProtocolMessage),
    Commit(LoggedOp),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunTrace {
    pub initial: LabeledTree,
    pub events: Vec<Event>,
    /// Source line of each event when the trace was parsed from text.
    pub lines: Vec<usize>,
}

impl RunTrace {
    pub fn new(initial: LabeledTree) -> Self {
        RunTrace {
            initial,
            events: Vec::new(),
            lines: Vec::new(),
        }
    }

    /// Line number of event `i` in the text form.
    pub fn line_of(&self, i: usize) -> usize {
        match self.lines.get(i) {
            Some(&l) => l,
            // header, edges and the `events` marker come first
            None => self.initial.n() + 2 + i,
        }
    }
}

impl fmt::Display for RunTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.initial)?;
        writeln!(f, "events")?;
        for event in &self.events {
            match event {
                Event::Round(r) => writeln!(f, "round {r}")?,
                Event::Message(m) => writeln!(f, "msg {} {} {}", m.from, m.to, m.kind.name())?,
                Event::Commit(op) => writeln!(
                    f,
                    "commit {}",
                    crate::ops::format_log_line(&op.op, &op.edges_removed, &op.edges_added)
                )?,
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum LogParseError {
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
}

impl RunTrace {
    pub fn parse(text: &str) -> Result<RunTrace, LogParseError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (_, n) = parse_header(&mut lines)?;
        let mut edges = Vec::new();
        let mut in_events = false;
        let mut trace_events = Vec::new();
        let mut trace_lines = Vec::new();
        let mut round = 0;
        for (line, text) in lines {
            if !in_events {
                if text == "events" {
                    in_events = true;
                } else {
                    edges.push(parse_edge_line(line, text)?);
                }
                continue;
            }
            let syntax = |reason: String| LogParseError::Syntax { line, reason };
            let (head, rest) = text.split_once(' ').unwrap_or((text, ""));
            let event = match head {
                "round" => {
                    round = rest
                        .trim()
                        .parse()
                        .map_err(|_| syntax(format!("bad round index `{rest}`")))?;
                    Event::Round(round)
                }
                "msg" => {
                    let parts: Vec<&str> = rest.split_whitespace().collect();
                    if parts.len() != 3 {
                        return Err(syntax("expected `msg <from> <to> <kind>`".into()));
                    }
                    let from = parts[0].parse().map_err(|_| syntax(format!("bad node `{}`", parts[0])))?;
                    let to = parts[1].parse().map_err(|_| syntax(format!("bad node `{}`", parts[1])))?;
                    let kind: MessageKind = parts[2].parse().map_err(syntax)?;
                    Event::Message(ProtocolMessage {
                        round,
                        from,
                        to,
                        kind,
                        payload: Payload::None,
                    })
                }
                "commit" => Event::Commit(rest.parse().map_err(|e: crate::ops::OpParseError| syntax(e.to_string()))?),
                other => return Err(syntax(format!("unknown event `{other}`"))),
            };
            trace_events.push(event);
            trace_lines.push(line);
        }
        Ok(RunTrace {
            initial: LabeledTree::new(n, edges)?,
            events: trace_events,
            lines: trace_lines,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditViolation {
    pub event: usize,
    pub line: usize,
    pub reason: String,
}

impl fmt::Display for AuditViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.reason)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AuditReport {
    pub messages: usize,
    pub commits: usize,
    pub violations: Vec<AuditViolation>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Replays the trace, checking that every message crosses one live link and
/// every committed rewire joins nodes at most two hops apart.
pub fn audit_trace(trace: &RunTrace) -> AuditReport {
    let mut report = AuditReport::default();
    let mut tree = trace.initial.clone();
    for (i, event) in trace.events.iter().enumerate() {
        let problem = match event {
            Event::Round(_) => None,
            Event::Message(m) => {
                report.messages += 1;
                check_message(&tree, m)
            }
            Event::Commit(op) => {
                report.commits += 1;
                match check_commit(&tree, op) {
                    Ok(next) => {
                        tree = next;
                        None
                    }
                    Err(reason) => Some(reason),
                }
            }
        };
        if let Some(reason) = problem {
            report.violations.push(AuditViolation {
                event: i,
                line: trace.line_of(i),
                reason,
            });
        }
    }
    report
}

pub fn locality_audit(trace: &RunTrace) -> bool {
    audit_trace(trace).is_clean()
}

fn check_message(tree: &LabeledTree, m: &ProtocolMessage) -> Option<String> {
    if !tree.contains_node(m.from) || !tree.contains_node(m.to) {
        return Some(format!("message {} -> {} names an unknown node", m.from, m.to));
    }
    if tree.has_edge(m.from, m.to) {
        return None;
    }
    let hops = tree.hop_distance(m.from, m.to).unwrap_or(0);
    Some(format!(
        "{} message {} -> {} travels {hops} hops",
        m.kind.name(),
        m.from,
        m.to
    ))
}

fn check_commit(tree: &LabeledTree, op: &LoggedOp) -> Result<LabeledTree, String> {
    let mut edges = tree.edge_set().clone();
    for &(u, v) in &op.edges_removed {
        if !edges.remove(&canonical(u, v)) {
            return Err(format!("`{}` removes missing edge {u}-{v}", op.op));
        }
    }
    for &(u, v) in &op.edges_added {
        if !tree.contains_node(u) || !tree.contains_node(v) {
            return Err(format!("`{}` adds edge {u}-{v} with an unknown node", op.op));
        }
        let hops = tree.hop_distance(u, v).expect("nodes checked");
        if hops > 2 {
            return Err(format!("`{}` adds edge {u}-{v} spanning {hops} hops", op.op));
        }
        edges.insert(canonical(u, v));
    }
    LabeledTree::new(tree.n(), edges).map_err(|e| format!("`{}` breaks the tree: {e}", op.op))
}
