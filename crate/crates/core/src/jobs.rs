//! Periodic work: daily session registration, the two-day planning reminder
//! and expiry of stale requests. Each job records the period it completed in
//! the store, so a restart within the same period does nothing.

use serde::Serialize;

use crate::model::JobRun;
use crate::store::{
    auto_register_comm_sessions, expire_stale, ExpiryReport, RegistrationOptions, RegistrationReport, Store,
    StoreError,
};
use crate::time::Epoch;

pub const REGISTRATION_JOB: &str = "registration";
pub const REMINDER_JOB: &str = "planning-reminder";
pub const REMINDER_INTERVAL_S: i64 = 2 * 86_400;

#[derive(Debug, Clone, Default, Serialize)]
pub struct JobReport {
    pub at: Option<Epoch>,
    /// `None` when today's registration already ran.
    pub registration: Option<RegistrationReport>,
    pub reminders: Vec<String>,
    pub expiry: ExpiryReport,
}

fn utc_date(t: Epoch) -> String {
    t.iso_seconds()[..10].to_string()
}

/// Runs whatever is due at `now`.
pub fn run_due_jobs(store: &Store, now: Epoch, options: &RegistrationOptions) -> Result<JobReport, StoreError> {
    let mut report = JobReport {
        at: Some(now),
        ..Default::default()
    };

    let today = utc_date(now);
    let done = store.read(|db| db.job_runs.get(REGISTRATION_JOB) == Some(&today));
    if !done {
        let reg = auto_register_comm_sessions(store, now, options);
        if reg.errors.is_empty() {
            // A batch with failures is retried at the next tick.
            store.transaction(|db| {
                db.job_runs.insert(REGISTRATION_JOB.into(), today.clone());
                db.job_history.push(JobRun {
                    job: REGISTRATION_JOB.into(),
                    period: today.clone(),
                    at: now,
                    summary: format!(
                        "created {} updated {} unchanged {} removed {}",
                        reg.created, reg.updated, reg.unchanged, reg.removed
                    ),
                });
                Ok::<_, StoreError>(())
            })?;
        } else {
            for (sat, message) in &reg.errors {
                tracing::warn!(satellite = %sat, "registration failed: {message}");
            }
        }
        report.registration = Some(reg);
    }

    report.reminders = store.transaction(|db| {
        let mut sent = Vec::new();
        let names: Vec<String> = db.satellites.values().filter(|s| s.active).map(|s| s.name.clone()).collect();
        for name in names {
            let key = format!("{REMINDER_JOB}:{name}");
            let due = match db.job_runs.get(&key).map(|s| Epoch::parse(s)) {
                Some(Ok(last)) => now.millis_since(last) >= REMINDER_INTERVAL_S * 1000,
                _ => true,
            };
            if due {
                db.notify(
                    now,
                    &name,
                    format!("{name}: register and adjust sessions, then generate the CMD file"),
                );
                db.job_runs.insert(key, now.iso_millis());
                db.job_history.push(JobRun {
                    job: REMINDER_JOB.into(),
                    period: name.clone(),
                    at: now,
                    summary: String::new(),
                });
                sent.push(name);
            }
        }
        Ok::<_, StoreError>(sent)
    })?;

    report.expiry = expire_stale(store, now)?;
    Ok(report)
}

/// Ticks a simulated clock from `from` to `to` (inclusive) every `tick_s`.
pub fn simulate_jobs(
    store: &Store,
    from: Epoch,
    to: Epoch,
    tick_s: i64,
    options: &RegistrationOptions,
) -> Result<Vec<JobReport>, StoreError> {
    let mut reports = Vec::new();
    let mut now = from;
    while now <= to {
        reports.push(run_due_jobs(store, now, options)?);
        now = now.add_millis(tick_s.max(1) * 1000);
    }
    Ok(reports)
}
