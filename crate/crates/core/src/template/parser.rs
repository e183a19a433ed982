//! Line-oriented template parser.

use super::ast::{ArithOp, CmpOp, Command, Expr, Node, Pos, Segment, TemplateProgram, Text};
use super::TemplateError;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Str(String),
    Ident(String),
    Op(&'static str),
    LParen,
    RParen,
    /// Raw text between matching braces, with the column of its first character.
    Brace(String, usize),
}

struct Lexer {
    chars: Vec<char>,
    i: usize,
    line: usize,
    /// Column of `chars[0]` in the source line.
    base_col: usize,
}

impl Lexer {
    fn new(src: &str, line: usize, base_col: usize) -> Self {
        Lexer {
            chars: src.chars().collect(),
            i: 0,
            line,
            base_col,
        }
    }

    fn err(&self, col: usize, message: impl Into<String>) -> TemplateError {
        TemplateError::SyntaxError {
            line: self.line,
            col: self.base_col + col,
            message: message.into(),
        }
    }

    fn tokens(mut self) -> Result<Vec<(Tok, usize)>, TemplateError> {
        let mut out = Vec::new();
        while self.i < self.chars.len() {
            let c = self.chars[self.i];
            let start = self.i;
            if c.is_whitespace() {
                self.i += 1;
                continue;
            }
            let tok = if c.is_ascii_digit() || (c == '.' && self.peek_digit(1)) {
                while self.i < self.chars.len() && (self.chars[self.i].is_ascii_digit() || self.chars[self.i] == '.') {
                    self.i += 1;
                }
                let text: String = self.chars[start..self.i].iter().collect();
                Tok::Num(text.parse().map_err(|_| self.err(start, format!("bad number `{text}`")))?)
            } else if c.is_alphabetic() || c == '_' {
                while self.i < self.chars.len() && (self.chars[self.i].is_alphanumeric() || self.chars[self.i] == '_') {
                    self.i += 1;
                }
                Tok::Ident(self.chars[start..self.i].iter().collect())
            } else if c == '"' {
                self.i += 1;
                let mut s = String::new();
                loop {
                    match self.chars.get(self.i) {
                        None => return Err(self.err(start, "unterminated string")),
                        Some('"') => {
                            self.i += 1;
                            break;
                        }
                        Some('\\') => {
                            let next = *self.chars.get(self.i + 1).ok_or_else(|| self.err(self.i, "dangling escape"))?;
                            s.push(next);
                            self.i += 2;
                        }
                        Some(&ch) => {
                            s.push(ch);
                            self.i += 1;
                        }
                    }
                }
                Tok::Str(s)
            } else if c == '{' {
                let close = self.chars[self.i..]
                    .iter()
                    .position(|&ch| ch == '}')
                    .ok_or_else(|| self.err(start, "unclosed `{`"))?;
                let inner: String = self.chars[self.i + 1..self.i + close].iter().collect();
                self.i += close + 1;
                Tok::Brace(inner, self.base_col + start + 1)
            } else if c == '(' {
                self.i += 1;
                Tok::LParen
            } else if c == ')' {
                self.i += 1;
                Tok::RParen
            } else {
                let two: String = self.chars[self.i..(self.i + 2).min(self.chars.len())].iter().collect();
                let op = ["<=", ">=", "==", "!="].into_iter().find(|op| *op == two);
                match op {
                    Some(op) => {
                        self.i += 2;
                        Tok::Op(op)
                    }
                    None => {
                        let op = ["<", ">", "+", "-", "*", "/"]
                            .into_iter()
                            .find(|op| op.starts_with(c))
                            .ok_or_else(|| self.err(start, format!("unexpected character `{c}`")))?;
                        self.i += 1;
                        Tok::Op(op)
                    }
                }
            };
            out.push((tok, self.base_col + start));
        }
        Ok(out)
    }

    fn peek_digit(&self, ahead: usize) -> bool {
        self.chars.get(self.i + ahead).is_some_and(|c| c.is_ascii_digit())
    }
}

struct ExprParser {
    toks: Vec<(Tok, usize)>,
    i: usize,
    line: usize,
    end_col: usize,
}

impl ExprParser {
    fn err(&self, message: impl Into<String>) -> TemplateError {
        let col = self.toks.get(self.i).map_or(self.end_col, |t| t.1);
        TemplateError::SyntaxError {
            line: self.line,
            col,
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.i).map(|t| &t.0)
    }

    fn keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    fn or(&mut self) -> Result<Expr, TemplateError> {
        let mut left = self.and()?;
        while self.keyword("or") {
            self.i += 1;
            left = Expr::Or(Box::new(left), Box::new(self.and()?));
        }
        Ok(left)
    }

    fn and(&mut self) -> Result<Expr, TemplateError> {
        let mut left = self.not()?;
        while self.keyword("and") {
            self.i += 1;
            left = Expr::And(Box::new(left), Box::new(self.not()?));
        }
        Ok(left)
    }

    fn not(&mut self) -> Result<Expr, TemplateError> {
        if self.keyword("not") {
            self.i += 1;
            return Ok(Expr::Not(Box::new(self.not()?)));
        }
        self.cmp()
    }

    fn cmp(&mut self) -> Result<Expr, TemplateError> {
        let left = self.sum()?;
        let op = match self.peek() {
            Some(Tok::Op("<")) => CmpOp::Lt,
            Some(Tok::Op("<=")) => CmpOp::Le,
            Some(Tok::Op(">")) => CmpOp::Gt,
            Some(Tok::Op(">=")) => CmpOp::Ge,
            Some(Tok::Op("==")) => CmpOp::Eq,
            Some(Tok::Op("!=")) => CmpOp::Ne,
            _ => return Ok(left),
        };
        self.i += 1;
        let right = self.sum()?;
        Ok(Expr::Cmp(op, Box::new(left), Box::new(right)))
    }

    fn sum(&mut self) -> Result<Expr, TemplateError> {
        let mut left = self.product()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Op("+")) => ArithOp::Add,
                Some(Tok::Op("-")) => ArithOp::Sub,
                _ => return Ok(left),
            };
            self.i += 1;
            left = Expr::Arith(op, Box::new(left), Box::new(self.product()?));
        }
    }

    fn product(&mut self) -> Result<Expr, TemplateError> {
        let mut left = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Op("*")) => ArithOp::Mul,
                Some(Tok::Op("/")) => ArithOp::Div,
                _ => return Ok(left),
            };
            self.i += 1;
            left = Expr::Arith(op, Box::new(left), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Expr, TemplateError> {
        if matches!(self.peek(), Some(Tok::Op("-"))) {
            self.i += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr, TemplateError> {
        let Some((tok, col)) = self.toks.get(self.i).cloned() else {
            return Err(self.err("expected a value"));
        };
        self.i += 1;
        match tok {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::Str(s) => Ok(Expr::Str(s)),
            Tok::Ident(name) if matches!(name.as_str(), "and" | "or" | "not") => {
                self.i -= 1;
                Err(self.err(format!("unexpected `{name}`")))
            }
            Tok::Ident(name) => Ok(Expr::Var(name, Pos { line: self.line, col })),
            Tok::LParen => {
                let inner = self.or()?;
                if self.peek() != Some(&Tok::RParen) {
                    return Err(self.err("expected `)`"));
                }
                self.i += 1;
                Ok(inner)
            }
            Tok::Brace(inner, inner_col) => parse_brace(&inner, self.line, inner_col),
            other => {
                self.i -= 1;
                Err(self.err(format!("unexpected {other:?}")))
            }
        }
    }
}

/// Parses a complete expression starting at column `col` of `line`.
pub fn parse_expr(src: &str, line: usize, col: usize) -> Result<Expr, TemplateError> {
    let toks = Lexer::new(src, line, col).tokens()?;
    let mut p = ExprParser {
        toks,
        i: 0,
        line,
        end_col: col + src.chars().count(),
    };
    let e = p.or()?;
    if p.i != p.toks.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(e)
}

/// Contents of `{...}`: the `name`, `name+N`, `name-N` forms, or a general expression.
fn parse_brace(inner: &str, line: usize, col: usize) -> Result<Expr, TemplateError> {
    let trimmed = inner.trim();
    let lead = inner.len() - inner.trim_start().len();
    let ident_end = trimmed
        .char_indices()
        .find(|(_, c)| !(c.is_alphanumeric() || *c == '_'))
        .map_or(trimmed.len(), |(i, _)| i);
    let (name, rest) = trimmed.split_at(ident_end);
    let starts_ident = name.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_');
    if starts_ident {
        let rest = rest.trim();
        let offset = if rest.is_empty() {
            Some(0)
        } else {
            let (sign, digits) = rest.split_at(1);
            let digits = digits.trim();
            let sign = match sign {
                "+" => Some(1),
                "-" => Some(-1),
                _ => None,
            };
            match (sign, digits.parse::<i64>()) {
                (Some(s), Ok(n)) if !digits.starts_with(['+', '-']) => Some(s * n),
                _ => None,
            }
        };
        if let Some(offset) = offset {
            return Ok(Expr::Subst {
                name: name.to_string(),
                offset,
                pos: Pos { line, col: col + lead },
            });
        }
    }
    if trimmed.is_empty() {
        return Err(TemplateError::SyntaxError {
            line,
            col,
            message: "empty `{}`".into(),
        });
    }
    Ok(Expr::Braced(Box::new(parse_expr(inner, line, col)?)))
}

/// Splits literal text and `{...}` substitutions.
fn parse_text(src: &str, line: usize, col: usize) -> Result<Text, TemplateError> {
    let mut segments = Vec::new();
    let mut rest = src;
    let mut offset = 0;
    while let Some(open) = rest.find('{') {
        if open > 0 {
            segments.push(Segment::Lit(rest[..open].to_string()));
        }
        let close = rest[open..].find('}').ok_or(TemplateError::SyntaxError {
            line,
            col: col + offset + open,
            message: "unclosed `{`".into(),
        })?;
        let inner = &rest[open + 1..open + close];
        segments.push(Segment::Sub(parse_brace(inner, line, col + offset + open + 1)?));
        offset += open + close + 1;
        rest = &rest[open + close + 1..];
    }
    if rest.contains('}') {
        return Err(TemplateError::SyntaxError {
            line,
            col: col + offset + rest.find('}').unwrap_or(0),
            message: "unmatched `}`".into(),
        });
    }
    if !rest.is_empty() {
        segments.push(Segment::Lit(rest.to_string()));
    }
    Ok(Text(segments))
}

fn is_hex_literal(s: &str) -> bool {
    (2..=16).contains(&s.len()) && s.bytes().all(|b| b.is_ascii_hexdigit())
}

/// Splits `src` at whitespace that is outside braces.
fn split_fields(src: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut start = None;
    for (i, c) in src.char_indices() {
        match c {
            '{' => depth += 1,
            '}' => depth = depth.saturating_sub(1),
            _ => {}
        }
        if c.is_whitespace() && depth == 0 {
            if let Some(s) = start.take() {
                out.push((s, &src[s..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((s, &src[s..]));
    }
    out
}

fn parse_command(raw: &str, line: usize, indent: usize) -> Result<Command, TemplateError> {
    let syntax = |col: usize, message: &str| TemplateError::SyntaxError {
        line,
        col,
        message: message.to_string(),
    };
    let semi = raw.find(';').ok_or_else(|| syntax(indent + 1, "command needs `<HEX> <WAIT> ; <NAME>`"))?;
    let head = &raw[..semi];
    let fields = split_fields(head);
    let [(hex_at, hex), (wait_at, wait)] = fields.as_slice() else {
        return Err(syntax(indent + 1, "expected a hex code and a wait before `;`"));
    };
    let hex_col = indent + hex_at + 1;
    let wait_col = indent + wait_at + 1;
    if !hex.contains('{') && !is_hex_literal(hex) {
        return Err(syntax(hex_col, "command code must be 2-16 hex digits"));
    }
    if !wait.contains('{') && wait.parse::<u64>().is_err() {
        return Err(syntax(wait_col, "wait must be whole seconds >= 0"));
    }
    let name_raw = &raw[semi + 1..];
    let name_lead = name_raw.len() - name_raw.trim_start().len();
    let name = name_raw.trim();
    if name.is_empty() {
        return Err(syntax(indent + semi + 2, "command name missing after `;`"));
    }
    Ok(Command {
        hex: parse_text(hex, line, hex_col)?,
        wait: parse_text(wait, line, wait_col)?,
        name: parse_text(name, line, indent + semi + 2 + name_lead)?,
        pos: Pos { line, col: indent + 1 },
    })
}

enum Frame {
    If {
        branches: Vec<(Expr, Vec<Node>)>,
        otherwise: Option<Vec<Node>>,
        pos: Pos,
    },
    While {
        cond: Expr,
        body: Vec<Node>,
        pos: Pos,
    },
}

impl Frame {
    fn body(&mut self) -> &mut Vec<Node> {
        match self {
            Frame::If { otherwise: Some(b), .. } => b,
            Frame::If { branches, .. } => &mut branches.last_mut().expect("if has a branch").1,
            Frame::While { body, .. } => body,
        }
    }
}

pub fn parse_template(text: &str) -> Result<TemplateProgram, TemplateError> {
    let mut root: Vec<Node> = Vec::new();
    let mut stack: Vec<Frame> = Vec::new();

    for (index, raw_line) in text.lines().enumerate() {
        let line = index + 1;
        let raw_line = raw_line.strip_suffix('\r').unwrap_or(raw_line);
        let content = raw_line.trim_end();
        let trimmed = content.trim_start();
        if trimmed.is_empty() {
            continue;
        }
        let indent = content.len() - trimmed.len();
        let pos = Pos { line, col: indent + 1 };
        let target = |stack: &mut Vec<Frame>, root: &mut Vec<Node>, node: Node| match stack.last_mut() {
            Some(frame) => frame.body().push(node),
            None => root.push(node),
        };

        if let Some(comment) = trimmed.strip_prefix("//") {
            target(&mut stack, &mut root, Node::Comment(comment.to_string()));
            continue;
        }
        let Some(directive) = trimmed.strip_prefix('#') else {
            let cmd = parse_command(trimmed, line, indent)?;
            target(&mut stack, &mut root, Node::Command(cmd));
            continue;
        };
        let word_end = directive.find(char::is_whitespace).unwrap_or(directive.len());
        let (word, rest) = directive.split_at(word_end);
        let arg_col = indent + 1 + 1 + word_end + (rest.len() - rest.trim_start().len());
        let arg = rest.trim();
        let need_arg = |what: &str| {
            if arg.is_empty() {
                Err(TemplateError::SyntaxError {
                    line,
                    col: indent + 2 + word_end,
                    message: format!("#{word} needs {what}"),
                })
            } else {
                Ok(())
            }
        };
        let no_arg = || {
            if arg.is_empty() {
                Ok(())
            } else {
                Err(TemplateError::SyntaxError {
                    line,
                    col: arg_col,
                    message: format!("#{word} takes no argument"),
                })
            }
        };
        match word {
            "waitabs" => {
                need_arg("a `{time}` argument")?;
                let (time_src, label_src) = match arg.find(';') {
                    Some(i) => (arg[..i].trim_end(), Some(&arg[i + 1..])),
                    None => (arg, None),
                };
                if !(time_src.starts_with('{') && time_src.ends_with('}')) {
                    return Err(TemplateError::SyntaxError {
                        line,
                        col: arg_col,
                        message: "#waitabs argument must be written `{...}`".into(),
                    });
                }
                let time = parse_brace(&time_src[1..time_src.len() - 1], line, arg_col + 1)?;
                let label = match label_src {
                    Some(l) if !l.trim().is_empty() => {
                        let label_col = arg_col + arg.find(';').unwrap_or(0) + 1 + (l.len() - l.trim_start().len());
                        Some(parse_text(l.trim(), line, label_col)?)
                    }
                    _ => None,
                };
                target(&mut stack, &mut root, Node::AbsWait { time, label, pos });
            }
            "if" => {
                need_arg("a condition")?;
                let cond = parse_expr(arg, line, arg_col)?;
                stack.push(Frame::If {
                    branches: vec![(cond, Vec::new())],
                    otherwise: None,
                    pos,
                });
            }
            "elif" => {
                need_arg("a condition")?;
                let cond = parse_expr(arg, line, arg_col)?;
                match stack.last_mut() {
                    Some(Frame::If { branches, otherwise: None, .. }) => branches.push((cond, Vec::new())),
                    _ => {
                        return Err(TemplateError::SyntaxError {
                            line,
                            col: indent + 1,
                            message: "#elif without an open #if".into(),
                        })
                    }
                }
            }
            "else" => {
                no_arg()?;
                match stack.last_mut() {
                    Some(Frame::If { otherwise: o @ None, .. }) => *o = Some(Vec::new()),
                    _ => {
                        return Err(TemplateError::SyntaxError {
                            line,
                            col: indent + 1,
                            message: "#else without an open #if".into(),
                        })
                    }
                }
            }
            "endif" => {
                no_arg()?;
                match stack.pop() {
                    Some(Frame::If { branches, otherwise, pos }) => {
                        target(&mut stack, &mut root, Node::If { branches, otherwise, pos })
                    }
                    other => {
                        return Err(TemplateError::SyntaxError {
                            line,
                            col: indent + 1,
                            message: match other {
                                Some(_) => "#endif closes a #while".into(),
                                None => "#endif without an open #if".into(),
                            },
                        })
                    }
                }
            }
            "while" => {
                need_arg("a condition")?;
                let cond = parse_expr(arg, line, arg_col)?;
                stack.push(Frame::While {
                    cond,
                    body: Vec::new(),
                    pos,
                });
            }
            "endwhile" => {
                no_arg()?;
                match stack.pop() {
                    Some(Frame::While { cond, body, pos }) => target(&mut stack, &mut root, Node::While { cond, body, pos }),
                    other => {
                        return Err(TemplateError::SyntaxError {
                            line,
                            col: indent + 1,
                            message: match other {
                                Some(_) => "#endwhile closes an #if".into(),
                                None => "#endwhile without an open #while".into(),
                            },
                        })
                    }
                }
            }
            other => {
                return Err(TemplateError::UnknownDirective {
                    line,
                    directive: other.to_string(),
                })
            }
        }
    }
    if let Some(frame) = stack.pop() {
        let (directive, pos) = match frame {
            Frame::If { pos, .. } => ("#if", pos),
            Frame::While { pos, .. } => ("#while", pos),
        };
        return Err(TemplateError::UnclosedBlock {
            line: pos.line,
            directive: directive.to_string(),
        });
    }
    Ok(TemplateProgram { nodes: root })
}
