use std::fmt;

/// Source position. Compares equal to every other position so that programs
/// parsed from differently laid out text can be compared structurally.
#[derive(Debug, Clone, Copy, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl PartialEq for Pos {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl ArithOp {
    pub fn symbol(self) -> char {
        match self {
            ArithOp::Add => '+',
            ArithOp::Sub => '-',
            ArithOp::Mul => '*',
            ArithOp::Div => '/',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Str(String),
    Var(String, Pos),
    /// `{name}` or `{name+N}` / `{name-N}`: N whole seconds on time values.
    Subst { name: String, offset: i64, pos: Pos },
    /// `{expr}` that is not a plain substitution.
    Braced(Box<Expr>),
    Neg(Box<Expr>),
    Not(Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Cmp(CmpOp, Box<Expr>, Box<Expr>),
    Arith(ArithOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    /// Every variable the expression reads, with its position.
    pub fn variables(&self, out: &mut Vec<(String, Pos)>) {
        match self {
            Expr::Num(_) | Expr::Str(_) => {}
            Expr::Var(name, pos) | Expr::Subst { name, pos, .. } => out.push((name.clone(), *pos)),
            Expr::Braced(e) | Expr::Neg(e) | Expr::Not(e) => e.variables(out),
            Expr::And(a, b) | Expr::Or(a, b) | Expr::Cmp(_, a, b) | Expr::Arith(_, a, b) => {
                a.variables(out);
                b.variables(out);
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Or(..) => 1,
            Expr::And(..) => 2,
            Expr::Not(_) => 3,
            Expr::Cmp(..) => 4,
            Expr::Arith(ArithOp::Add | ArithOp::Sub, ..) => 5,
            Expr::Arith(..) => 6,
            Expr::Neg(_) => 7,
            _ => 8,
        }
    }
}

fn write_num(f: &mut fmt::Formatter<'_>, v: f64) -> fmt::Result {
    f.write_str(&super::render::format_number(v))
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let child = |f: &mut fmt::Formatter<'_>, e: &Expr, min: u8| {
            if e.precedence() < min {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        };
        match self {
            Expr::Num(v) => write_num(f, *v),
            Expr::Str(s) => write!(f, "\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\"")),
            Expr::Var(name, _) => f.write_str(name),
            Expr::Subst { name, offset, .. } => match offset {
                0 => write!(f, "{{{name}}}"),
                o if *o > 0 => write!(f, "{{{name}+{o}}}"),
                o => write!(f, "{{{name}{o}}}"),
            },
            Expr::Braced(e) => write!(f, "{{{e}}}"),
            Expr::Neg(e) => {
                f.write_str("-")?;
                child(f, e, 7)
            }
            Expr::Not(e) => {
                f.write_str("not ")?;
                child(f, e, 3)
            }
            Expr::And(a, b) => {
                child(f, a, 2)?;
                f.write_str(" and ")?;
                child(f, b, 3)
            }
            Expr::Or(a, b) => {
                child(f, a, 1)?;
                f.write_str(" or ")?;
                child(f, b, 2)
            }
            Expr::Cmp(op, a, b) => {
                child(f, a, 5)?;
                write!(f, " {} ", op.symbol())?;
                child(f, b, 5)
            }
            Expr::Arith(op, a, b) => {
                let level = if matches!(op, ArithOp::Add | ArithOp::Sub) { 5 } else { 6 };
                child(f, a, level)?;
                write!(f, " {} ", op.symbol())?;
                child(f, b, level + 1)
            }
        }
    }
}

/// Literal text interleaved with `{...}` substitutions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Text(pub Vec<Segment>);

#[derive(Debug, Clone, PartialEq)]
pub enum Segment {
    Lit(String),
    Sub(Expr),
}

impl Text {
    pub fn literal(s: &str) -> Self {
        Text(vec![Segment::Lit(s.to_string())])
    }

    pub fn variables(&self, out: &mut Vec<(String, Pos)>) {
        for seg in &self.0 {
            if let Segment::Sub(e) = seg {
                e.variables(out);
            }
        }
    }
}

impl fmt::Display for Text {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for seg in &self.0 {
            match seg {
                Segment::Lit(s) => f.write_str(s)?,
                // Substitutions and braced expressions already print their braces.
                Segment::Sub(e @ (Expr::Subst { .. } | Expr::Braced(_))) => write!(f, "{e}")?,
                Segment::Sub(e) => write!(f, "{{{e}}}")?,
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Command {
    pub hex: Text,
    pub wait: Text,
    pub name: Text,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Comment(String),
    Command(Command),
    AbsWait { time: Expr, label: Option<Text>, pos: Pos },
    If {
        branches: Vec<(Expr, Vec<Node>)>,
        otherwise: Option<Vec<Node>>,
        pos: Pos,
    },
    While { cond: Expr, body: Vec<Node>, pos: Pos },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TemplateProgram {
    pub nodes: Vec<Node>,
}

fn write_nodes(f: &mut fmt::Formatter<'_>, nodes: &[Node], depth: usize) -> fmt::Result {
    let indent = "    ".repeat(depth);
    for node in nodes {
        match node {
            Node::Comment(text) => writeln!(f, "{indent}//{text}")?,
            Node::Command(c) => writeln!(f, "{indent}{} {} ; {}", c.hex, c.wait, c.name)?,
            Node::AbsWait { time, label, .. } => {
                let time = match time {
                    e @ (Expr::Subst { .. } | Expr::Braced(_)) => e.to_string(),
                    e => format!("{{{e}}}"),
                };
                match label {
                    Some(l) => writeln!(f, "{indent}#waitabs {time} ; {l}")?,
                    None => writeln!(f, "{indent}#waitabs {time}")?,
                }
            }
            Node::If { branches, otherwise, .. } => {
                for (i, (cond, body)) in branches.iter().enumerate() {
                    let kw = if i == 0 { "#if" } else { "#elif" };
                    writeln!(f, "{indent}{kw} {cond}")?;
                    write_nodes(f, body, depth + 1)?;
                }
                if let Some(body) = otherwise {
                    writeln!(f, "{indent}#else")?;
                    write_nodes(f, body, depth + 1)?;
                }
                writeln!(f, "{indent}#endif")?;
            }
            Node::While { cond, body, .. } => {
                writeln!(f, "{indent}#while {cond}")?;
                write_nodes(f, body, depth + 1)?;
                writeln!(f, "{indent}#endwhile")?;
            }
        }
    }
    Ok(())
}

/// Canonical source form; parsing it yields a structurally equal program.
impl fmt::Display for TemplateProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_nodes(f, &self.nodes, 0)
    }
}
