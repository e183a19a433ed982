//! Merging rendered session sections into one CMD file.

use serde::Serialize;

use super::render::{render_session, SessionContext};
use super::shipped::TemplateSet;
use super::TemplateError;
use crate::model::TemplateKind;
use crate::time::Epoch;

/// One session to be rendered into the file.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionJob {
    pub session_id: String,
    pub kind: TemplateKind,
    pub t_start: Epoch,
    pub ctx: SessionContext,
    /// Take the playback queue from the shared pool instead of `ctx.queue`.
    pub draws_playback: bool,
}

/// A memory address waiting for downlink, playable once `ready_at` has passed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PlaybackItem {
    pub address: String,
    pub ready_at: Epoch,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CmdSection {
    pub session_id: String,
    pub kind: TemplateKind,
    pub t_start: Epoch,
    pub t_end: Epoch,
    pub lines: Vec<String>,
    /// Addresses consumed through `{next_addr}`: written by a capture, read by a download.
    pub addresses: Vec<String>,
    pub playback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CmdFile {
    pub sections: Vec<CmdSection>,
}

impl CmdFile {
    pub fn lines(&self) -> impl Iterator<Item = &str> {
        self.sections.iter().flat_map(|s| s.lines.iter().map(String::as_str))
    }

    /// From the first absolute wait to the final cursor.
    pub fn total_duration_s(&self) -> f64 {
        match (self.sections.first(), self.sections.last()) {
            (Some(first), Some(last)) => last.t_end.seconds_since(first.t_start),
            _ => 0.0,
        }
    }

    pub fn played_back(&self) -> impl Iterator<Item = &str> {
        self.sections
            .iter()
            .filter(|s| s.playback)
            .flat_map(|s| s.addresses.iter().map(String::as_str))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for line in self.lines() {
            out.push_str(line);
            out.push('\n');
        }
        out
    }
}

pub fn section_header(session_id: &str, kind: TemplateKind, t_start: Epoch) -> String {
    format!("// === {session_id} {kind} {} ===", t_start.iso_seconds())
}

/// Renders every job in start order. Playback sections consume addresses
/// from `pool` (oldest first) that were ready before the section starts.
pub fn generate_cmd_file(
    jobs: &[SessionJob],
    templates: &TemplateSet,
    pool: &[PlaybackItem],
) -> Result<CmdFile, TemplateError> {
    let mut order: Vec<&SessionJob> = jobs.iter().collect();
    order.sort_by(|a, b| (a.t_start, &a.session_id).cmp(&(b.t_start, &b.session_id)));
    let mut pool: Vec<&PlaybackItem> = pool.iter().collect();
    pool.sort_by(|a, b| (a.ready_at, &a.address).cmp(&(b.ready_at, &b.address)));

    let mut sections = Vec::with_capacity(order.len());
    let mut previous_end: Option<Epoch> = None;
    for job in order {
        let in_session = |e: TemplateError| TemplateError::InSession {
            session: job.session_id.clone(),
            source: Box::new(e),
        };
        let mut ctx = job.ctx.clone();
        if job.draws_playback {
            ctx.queue = pool
                .iter()
                .filter(|p| p.ready_at <= job.t_start)
                .map(|p| p.address.clone())
                .collect();
        }
        let out = render_session(templates.get(job.kind), &ctx, None).map_err(in_session)?;
        let start = out.first_wait.ok_or_else(|| {
            in_session(TemplateError::MissingAbsoluteWait { line: 0 })
        })?;
        if let Some(previous_end) = previous_end {
            if start < previous_end {
                return Err(TemplateError::OverlappingSessions {
                    session: job.session_id.clone(),
                    start,
                    previous_end,
                });
            }
        }
        let end = out.cursor.unwrap_or(start);
        if job.draws_playback {
            pool.retain(|p| !out.popped.contains(&p.address));
        }
        let mut lines = Vec::with_capacity(out.lines.len() + 1);
        lines.push(section_header(&job.session_id, job.kind, job.t_start));
        lines.extend(out.lines);
        sections.push(CmdSection {
            session_id: job.session_id.clone(),
            kind: job.kind,
            t_start: start,
            t_end: end,
            lines,
            addresses: out.popped,
            playback: job.draws_playback,
        });
        previous_end = Some(end);
    }
    Ok(CmdFile { sections })
}
