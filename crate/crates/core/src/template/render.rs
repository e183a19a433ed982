//! Template evaluation against a session context with a virtual time cursor.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ast::{ArithOp, CmpOp, Command, Expr, Node, Pos, Segment, TemplateProgram, Text};
use super::TemplateError;
use crate::time::Epoch;

pub const LOOP_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum Value {
    Num(f64),
    Time(Epoch),
    Str(String),
    Bool(bool),
}

impl Value {
    fn type_name(&self) -> &'static str {
        match self {
            Value::Num(_) => "number",
            Value::Time(_) => "time",
            Value::Str(_) => "string",
            Value::Bool(_) => "boolean",
        }
    }

    fn truthy(&self, pos: Pos) -> Result<bool, TemplateError> {
        match self {
            Value::Bool(b) => Ok(*b),
            Value::Num(n) => Ok(*n != 0.0),
            other => Err(TemplateError::TypeMismatch {
                line: pos.line,
                message: format!("a {} cannot be used as a condition", other.type_name()),
            }),
        }
    }
}

/// Numbers print with up to six decimals and no trailing zeros.
pub fn format_number(v: f64) -> String {
    let text = format!("{v:.6}");
    let text = text.trim_end_matches('0').trim_end_matches('.');
    if text == "-0" {
        "0".to_string()
    } else {
        text.to_string()
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(v) => f.write_str(&format_number(*v)),
            Value::Time(t) => f.write_str(&t.iso_seconds()),
            Value::Str(s) => f.write_str(s),
            Value::Bool(b) => f.write_str(if *b { "1" } else { "0" }),
        }
    }
}

/// Variable bindings for one session plus the playback address queue.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionContext {
    pub bindings: BTreeMap<String, Value>,
    pub queue: VecDeque<String>,
}

impl SessionContext {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, name: &str, value: Value) -> &mut Self {
        self.bindings.insert(name.to_string(), value);
        self
    }

    pub fn time(&mut self, name: &str, t: Epoch) -> &mut Self {
        self.set(name, Value::Time(t))
    }

    pub fn num(&mut self, name: &str, v: f64) -> &mut Self {
        self.set(name, Value::Num(v))
    }

    pub fn text(&mut self, name: &str, s: &str) -> &mut Self {
        self.set(name, Value::Str(s.to_string()))
    }

    pub fn with_queue<I: IntoIterator<Item = String>>(mut self, addresses: I) -> Self {
        self.queue = addresses.into_iter().collect();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderOutput {
    pub lines: Vec<String>,
    /// `None` when the program never set an absolute time.
    pub cursor: Option<Epoch>,
    /// Target of the first `#waitabs`.
    pub first_wait: Option<Epoch>,
    pub popped: Vec<String>,
    pub remaining_queue: Vec<String>,
}

struct Renderer<'a> {
    ctx: &'a SessionContext,
    queue: VecDeque<String>,
    popped: Vec<String>,
    cursor: Option<Epoch>,
    first_wait: Option<Epoch>,
    lines: Vec<String>,
    /// Start time of the most recently emitted command.
    last_start: Option<Epoch>,
}

fn mismatch(pos: Pos, message: impl Into<String>) -> TemplateError {
    TemplateError::TypeMismatch {
        line: pos.line,
        message: message.into(),
    }
}

impl<'a> Renderer<'a> {
    fn lookup(&self, name: &str, pos: Pos) -> Result<Value, TemplateError> {
        match name {
            "t_cursor" => self.cursor.map(Value::Time).ok_or(TemplateError::UnboundVariable {
                line: pos.line,
                col: pos.col,
                name: "t_cursor (no #waitabs yet)".into(),
            }),
            "addr_count" => Ok(Value::Num(self.queue.len() as f64)),
            _ => self.ctx.bindings.get(name).cloned().ok_or_else(|| TemplateError::UnboundVariable {
                line: pos.line,
                col: pos.col,
                name: name.to_string(),
            }),
        }
    }

    fn eval(&mut self, e: &Expr, pos: Pos) -> Result<Value, TemplateError> {
        Ok(match e {
            Expr::Num(v) => Value::Num(*v),
            Expr::Str(s) => Value::Str(s.clone()),
            Expr::Var(name, p) => self.lookup(name, *p)?,
            Expr::Subst { name, offset, pos: p } => {
                if name == "next_addr" {
                    if *offset != 0 {
                        return Err(mismatch(*p, "next_addr takes no offset"));
                    }
                    let addr = self.queue.pop_front().ok_or(TemplateError::EmptyQueuePop { line: p.line })?;
                    self.popped.push(addr.clone());
                    Value::Str(addr)
                } else {
                    match (self.lookup(name, *p)?, offset) {
                        (v, 0) => v,
                        (Value::Time(t), o) => Value::Time(t.add_millis(o * 1000)),
                        (Value::Num(n), o) => Value::Num(n + *o as f64),
                        (other, _) => {
                            return Err(mismatch(*p, format!("cannot offset the {} `{name}`", other.type_name())))
                        }
                    }
                }
            }
            Expr::Braced(inner) => self.eval(inner, pos)?,
            Expr::Neg(inner) => match self.eval(inner, pos)? {
                Value::Num(n) => Value::Num(-n),
                other => return Err(mismatch(pos, format!("cannot negate a {}", other.type_name()))),
            },
            Expr::Not(inner) => Value::Bool(!self.eval(inner, pos)?.truthy(pos)?),
            Expr::And(a, b) => Value::Bool(self.eval(a, pos)?.truthy(pos)? && self.eval(b, pos)?.truthy(pos)?),
            Expr::Or(a, b) => Value::Bool(self.eval(a, pos)?.truthy(pos)? || self.eval(b, pos)?.truthy(pos)?),
            Expr::Cmp(op, a, b) => {
                let (a, b) = (self.eval(a, pos)?, self.eval(b, pos)?);
                let ord = match (&a, &b) {
                    (Value::Num(x), Value::Num(y)) => x.partial_cmp(y),
                    (Value::Time(x), Value::Time(y)) => Some(x.cmp(y)),
                    (Value::Str(x), Value::Str(y)) if matches!(op, CmpOp::Eq | CmpOp::Ne) => Some(x.cmp(y)),
                    (Value::Bool(x), Value::Bool(y)) if matches!(op, CmpOp::Eq | CmpOp::Ne) => Some(x.cmp(y)),
                    _ => {
                        return Err(mismatch(
                            pos,
                            format!("cannot compare {} {} {}", a.type_name(), op.symbol(), b.type_name()),
                        ))
                    }
                };
                let Some(ord) = ord else {
                    return Ok(Value::Bool(matches!(op, CmpOp::Ne)));
                };
                Value::Bool(match op {
                    CmpOp::Lt => ord.is_lt(),
                    CmpOp::Le => ord.is_le(),
                    CmpOp::Gt => ord.is_gt(),
                    CmpOp::Ge => ord.is_ge(),
                    CmpOp::Eq => ord.is_eq(),
                    CmpOp::Ne => ord.is_ne(),
                })
            }
            Expr::Arith(op, a, b) => {
                let (a, b) = (self.eval(a, pos)?, self.eval(b, pos)?);
                match (op, &a, &b) {
                    (ArithOp::Add, Value::Num(x), Value::Num(y)) => Value::Num(x + y),
                    (ArithOp::Sub, Value::Num(x), Value::Num(y)) => Value::Num(x - y),
                    (ArithOp::Mul, Value::Num(x), Value::Num(y)) => Value::Num(x * y),
                    (ArithOp::Div, Value::Num(x), Value::Num(y)) => Value::Num(x / y),
                    (ArithOp::Sub, Value::Time(x), Value::Time(y)) => Value::Num(x.seconds_since(*y)),
                    (_, Value::Time(_), Value::Num(_)) | (_, Value::Num(_), Value::Time(_)) => {
                        return Err(mismatch(pos, "time arithmetic needs the `{name+N}` / `{name-N}` form"))
                    }
                    _ => {
                        return Err(mismatch(
                            pos,
                            format!("cannot apply `{}` to {} and {}", op.symbol(), a.type_name(), b.type_name()),
                        ))
                    }
                }
            }
        })
    }

    fn text(&mut self, t: &Text, pos: Pos) -> Result<String, TemplateError> {
        let mut out = String::new();
        for seg in &t.0 {
            match seg {
                Segment::Lit(s) => out.push_str(s),
                Segment::Sub(e) => out.push_str(&self.eval(e, pos)?.to_string()),
            }
        }
        Ok(out)
    }

    fn command(&mut self, c: &Command) -> Result<(), TemplateError> {
        let invalid = |message: String| TemplateError::InvalidCommand { line: c.pos.line, message };
        let hex = self.text(&c.hex, c.pos)?;
        if !((2..=16).contains(&hex.len()) && hex.bytes().all(|b| b.is_ascii_hexdigit())) {
            return Err(invalid(format!("command code `{hex}` is not 2-16 hex digits")));
        }
        let wait_text = self.text(&c.wait, c.pos)?;
        let wait: u64 = wait_text
            .parse()
            .map_err(|_| invalid(format!("wait `{wait_text}` is not whole seconds >= 0")))?;
        let name = self.text(&c.name, c.pos)?;
        let start = self.cursor.ok_or(TemplateError::MissingAbsoluteWait { line: c.pos.line })?;
        self.lines.push(format!("{} {} ; {}", hex.to_ascii_uppercase(), wait, name));
        self.last_start = Some(start);
        self.cursor = Some(start.add_millis(wait as i64 * 1000));
        Ok(())
    }

    fn nodes(&mut self, nodes: &[Node]) -> Result<(), TemplateError> {
        for node in nodes {
            match node {
                Node::Comment(text) => self.lines.push(format!("//{text}")),
                Node::Command(c) => self.command(c)?,
                Node::AbsWait { time, label, pos } => {
                    let t = match self.eval(time, *pos)? {
                        Value::Time(t) => t,
                        other => return Err(mismatch(*pos, format!("#waitabs needs a time, got a {}", other.type_name()))),
                    };
                    if let Some(current) = self.cursor {
                        if t < current {
                            return Err(TemplateError::TimeCursorRegression {
                                line: pos.line,
                                cursor: current,
                                target: t,
                            });
                        }
                    }
                    let label = match label {
                        Some(l) => self.text(l, *pos)?,
                        None => match time {
                            Expr::Subst { name, .. } => name.clone(),
                            _ => "absolute time".to_string(),
                        },
                    };
                    self.lines.push(format!("WAITABS {} ; {}", t.iso_seconds(), label));
                    self.first_wait.get_or_insert(t);
                    self.cursor = Some(t);
                }
                Node::If { branches, otherwise, pos } => {
                    let mut taken = false;
                    for (cond, body) in branches {
                        if self.eval(cond, *pos)?.truthy(*pos)? {
                            self.nodes(body)?;
                            taken = true;
                            break;
                        }
                    }
                    if let (false, Some(body)) = (taken, otherwise) {
                        self.nodes(body)?;
                    }
                }
                Node::While { cond, body, pos } => self.while_loop(cond, body, *pos)?,
            }
        }
        Ok(())
    }

    /// Iterations are all-or-nothing: an iteration is kept only if the loop
    /// condition, re-evaluated at the start time of the iteration's last
    /// command, still holds. So `t_cursor < T` bounds every emitted command.
    fn while_loop(&mut self, cond: &Expr, body: &[Node], pos: Pos) -> Result<(), TemplateError> {
        for _ in 0..LOOP_CAP {
            if !self.eval(cond, pos)?.truthy(pos)? {
                return Ok(());
            }
            let saved = (self.queue.clone(), self.popped.len(), self.cursor, self.lines.len(), self.last_start);
            self.last_start = None;
            self.nodes(body)?;
            // Queue state as of the iteration start, cursor at its last command.
            let after = (std::mem::replace(&mut self.queue, saved.0.clone()), self.cursor);
            self.cursor = self.last_start.or(saved.2);
            if self.eval(cond, pos)?.truthy(pos)? {
                self.queue = after.0;
                self.cursor = after.1;
            } else {
                self.queue = saved.0;
                self.popped.truncate(saved.1);
                self.cursor = saved.2;
                self.lines.truncate(saved.3);
                self.last_start = saved.4;
                return Ok(());
            }
        }
        Err(TemplateError::LoopCapExceeded { line: pos.line, cap: LOOP_CAP })
    }
}

/// Evaluates `program` against `ctx`, starting from `cursor` (if any).
pub fn render_session(
    program: &TemplateProgram,
    ctx: &SessionContext,
    cursor: Option<Epoch>,
) -> Result<RenderOutput, TemplateError> {
    let mut r = Renderer {
        ctx,
        queue: ctx.queue.clone(),
        popped: Vec::new(),
        cursor,
        first_wait: None,
        lines: Vec::new(),
        last_start: None,
    };
    r.nodes(&program.nodes)?;
    Ok(RenderOutput {
        lines: r.lines,
        cursor: r.cursor,
        first_wait: r.first_wait,
        popped: r.popped,
        remaining_queue: r.queue.into_iter().collect(),
    })
}

/// Truth value of a condition that reads no variables, if it has one.
pub(crate) fn constant_truth(cond: &Expr) -> Option<bool> {
    let mut vars = Vec::new();
    cond.variables(&mut vars);
    if !vars.is_empty() {
        return None;
    }
    let ctx = SessionContext::default();
    let mut r = Renderer {
        ctx: &ctx,
        queue: VecDeque::new(),
        popped: Vec::new(),
        cursor: None,
        first_wait: None,
        lines: Vec::new(),
        last_start: None,
    };
    r.eval(cond, Pos::default()).ok()?.truthy(Pos::default()).ok()
}
