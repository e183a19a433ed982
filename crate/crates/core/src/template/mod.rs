//! Command templates: a small line-oriented language that expands into the
//! intermediate CMD file uplinked during a pass.
//!
//! ```text
//! // power on the attitude sensors
//! #waitabs {ses_t_start_utc} ; session start
//! 1A03 5 ; STT_ON
//! #if orb_sun_deg > 0
//! 2B10 2 ; SUN_SENSOR_ON
//! #endif
//! #while addr_count > 0 and t_cursor < {loc_t_los5_utc}
//! 60{next_addr} 30 ; PLAYBACK
//! #endwhile
//! ```

pub mod ast;
pub mod cmdfile;
pub mod lint;
pub mod parser;
pub mod render;
pub mod shipped;

pub use ast::{Expr, Node, TemplateProgram};
pub use cmdfile::{generate_cmd_file, section_header, CmdFile, CmdSection, PlaybackItem, SessionJob};
pub use lint::{lint_template, Diagnostic, DiagnosticKind};
pub use parser::{parse_expr, parse_template};
pub use render::{format_number, render_session, RenderOutput, SessionContext, Value, LOOP_CAP};
pub use shipped::{context_schema, shipped_source, shipped_template, TemplateSet, BUILTINS, CONTEXT_VARIABLES};

use crate::error::{Coded, ErrorClass};
use crate::time::Epoch;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TemplateError {
    #[error("line {line}, column {col}: {message}")]
    SyntaxError { line: usize, col: usize, message: String },
    #[error("line {line}: `{directive}` is never closed")]
    UnclosedBlock { line: usize, directive: String },
    #[error("line {line}: unknown directive `{directive}`")]
    UnknownDirective { line: usize, directive: String },
    #[error("line {line}, column {col}: `{name}` is not bound")]
    UnboundVariable { line: usize, col: usize, name: String },
    #[error("line {line}: absolute wait to {target} would move the time cursor back from {cursor}")]
    TimeCursorRegression { line: usize, cursor: Epoch, target: Epoch },
    #[error("line {line}: the playback queue is empty")]
    EmptyQueuePop { line: usize },
    #[error("line {line}: loop exceeded {cap} iterations")]
    LoopCapExceeded { line: usize, cap: usize },
    #[error("line {line}: {message}")]
    TypeMismatch { line: usize, message: String },
    #[error("line {line}: {message}")]
    InvalidCommand { line: usize, message: String },
    #[error("line {line}: command before the first absolute wait")]
    MissingAbsoluteWait { line: usize },
    #[error("session {session}: starts at {start}, before the previous section ends at {previous_end}")]
    OverlappingSessions { session: String, start: Epoch, previous_end: Epoch },
    #[error("session {session}: {source}")]
    InSession {
        session: String,
        #[source]
        source: Box<TemplateError>,
    },
}

impl TemplateError {
    /// The innermost error, unwrapping session context.
    pub fn root(&self) -> &TemplateError {
        match self {
            TemplateError::InSession { source, .. } => source.root(),
            other => other,
        }
    }
}

impl Coded for TemplateError {
    fn code(&self) -> &'static str {
        match self {
            TemplateError::SyntaxError { .. } => "TEMPLATE_SYNTAX",
            TemplateError::UnclosedBlock { .. } => "TEMPLATE_UNCLOSED_BLOCK",
            TemplateError::UnknownDirective { .. } => "TEMPLATE_UNKNOWN_DIRECTIVE",
            TemplateError::UnboundVariable { .. } => "UNBOUND_VARIABLE",
            TemplateError::TimeCursorRegression { .. } => "TIME_CURSOR_REGRESSION",
            TemplateError::EmptyQueuePop { .. } => "EMPTY_QUEUE_POP",
            TemplateError::LoopCapExceeded { .. } => "LOOP_CAP_EXCEEDED",
            TemplateError::TypeMismatch { .. } => "TYPE_MISMATCH",
            TemplateError::InvalidCommand { .. } => "INVALID_COMMAND",
            TemplateError::MissingAbsoluteWait { .. } => "MISSING_ABSOLUTE_WAIT",
            TemplateError::OverlappingSessions { .. } => "OVERLAPPING_SESSIONS",
            TemplateError::InSession { source, .. } => source.code(),
        }
    }

    fn class(&self) -> ErrorClass {
        match self {
            TemplateError::SyntaxError { .. }
            | TemplateError::UnclosedBlock { .. }
            | TemplateError::UnknownDirective { .. } => ErrorClass::Validation,
            TemplateError::InSession { source, .. } => source.class(),
            _ => ErrorClass::Unprocessable,
        }
    }
}
