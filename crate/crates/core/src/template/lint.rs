//! Static checks on a template against the variables a context declares.

use serde::Serialize;

use super::ast::{Command, Expr, Node, Pos, TemplateProgram, Text};
use super::render::constant_truth;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    UnboundVariable,
    UnreachableBranch,
    NonTerminationRisk,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub line: usize,
    pub col: usize,
    pub message: String,
}

struct Linter<'a> {
    schema: &'a [&'a str],
    out: Vec<Diagnostic>,
}

impl Linter<'_> {
    fn push(&mut self, kind: DiagnosticKind, pos: Pos, message: String) {
        self.out.push(Diagnostic {
            kind,
            line: pos.line,
            col: pos.col,
            message,
        });
    }

    fn names(&mut self, vars: Vec<(String, Pos)>) {
        for (name, pos) in vars {
            if !self.schema.contains(&name.as_str()) {
                self.push(DiagnosticKind::UnboundVariable, pos, format!("`{name}` is not a known variable"));
            }
        }
    }

    fn expr(&mut self, e: &Expr) {
        let mut vars = Vec::new();
        e.variables(&mut vars);
        self.names(vars);
    }

    fn text(&mut self, t: &Text) {
        let mut vars = Vec::new();
        t.variables(&mut vars);
        self.names(vars);
    }

    fn nodes(&mut self, nodes: &[Node]) {
        for node in nodes {
            match node {
                Node::Comment(_) => {}
                Node::Command(Command { hex, wait, name, .. }) => {
                    self.text(hex);
                    self.text(wait);
                    self.text(name);
                }
                Node::AbsWait { time, label, .. } => {
                    self.expr(time);
                    if let Some(label) = label {
                        self.text(label);
                    }
                }
                Node::If { branches, otherwise, pos } => {
                    let mut decided = false;
                    for (i, (cond, body)) in branches.iter().enumerate() {
                        self.expr(cond);
                        let truth = constant_truth(cond);
                        if decided {
                            self.push(
                                DiagnosticKind::UnreachableBranch,
                                *pos,
                                format!("branch {} follows an always-true condition", i + 1),
                            );
                        } else if truth == Some(false) {
                            self.push(
                                DiagnosticKind::UnreachableBranch,
                                *pos,
                                format!("condition `{cond}` is always false"),
                            );
                        }
                        decided |= truth == Some(true);
                        self.nodes(body);
                    }
                    if let Some(body) = otherwise {
                        if decided {
                            self.push(DiagnosticKind::UnreachableBranch, *pos, "#else is never taken".into());
                        }
                        self.nodes(body);
                    }
                }
                Node::While { cond, body, pos } => {
                    self.expr(cond);
                    let mut vars = Vec::new();
                    cond.variables(&mut vars);
                    if !vars.iter().any(|(n, _)| n == "addr_count" || n == "t_cursor") {
                        self.push(
                            DiagnosticKind::NonTerminationRisk,
                            *pos,
                            format!("loop condition `{cond}` reads neither addr_count nor t_cursor"),
                        );
                    }
                    if constant_truth(cond) == Some(false) {
                        self.push(DiagnosticKind::UnreachableBranch, *pos, "loop body never runs".into());
                    }
                    self.nodes(body);
                }
            }
        }
    }
}

/// Diagnostics in source order; an empty list means the template is clean.
pub fn lint_template(program: &TemplateProgram, schema: &[&str]) -> Vec<Diagnostic> {
    let mut linter = Linter { schema, out: Vec::new() };
    linter.nodes(&program.nodes);
    linter.out
}
