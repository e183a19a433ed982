//! Station-level conflict resolution.

use std::cmp::Ordering;

use crate::model::CommSession;

pub const DEFAULT_SETUP_S: i64 = 60;
pub const DEFAULT_TEARDOWN_S: i64 = 60;

/// Total order on sessions competing for one antenna; the greatest wins.
pub fn precedence(a: &CommSession, b: &CommSession) -> Ordering {
    a.priority
        .cmp(&b.priority)
        .then(a.max_elevation.total_cmp(&b.max_elevation))
        .then(b.t_aos.cmp(&a.t_aos))
        .then(b.id.cmp(&a.id))
}

/// Marks every session that loses its conflict group as interfering.
///
/// Sessions conflict when their padded intervals `[t_aos - setup, t_los + teardown]`
/// intersect; a group is a connected component of that relation. All sessions
/// must belong to one station. Returns the number of flags that changed.
pub fn resolve_interference(sessions: &mut [CommSession], setup_s: i64, teardown_s: i64) -> usize {
    let padded = |s: &CommSession| {
        (
            s.t_aos.add_millis(-setup_s * 1000),
            s.t_los.add_millis(teardown_s * 1000),
        )
    };
    let mut order: Vec<usize> = (0..sessions.len()).collect();
    order.sort_by(|&i, &j| padded(&sessions[i]).0.cmp(&padded(&sessions[j]).0).then(sessions[i].id.cmp(&sessions[j].id)));

    let mut changed = 0;
    let mut start = 0;
    while start < order.len() {
        let mut reach = padded(&sessions[order[start]]).1;
        let mut end = start + 1;
        while end < order.len() && padded(&sessions[order[end]]).0 <= reach {
            reach = reach.max(padded(&sessions[order[end]]).1);
            end += 1;
        }
        let group = &order[start..end];
        let winner = *group
            .iter()
            .max_by(|&&i, &&j| precedence(&sessions[i], &sessions[j]))
            .expect("group is non-empty");
        for &i in group {
            let interfering = i != winner;
            if sessions[i].interference != interfering {
                sessions[i].interference = interfering;
                sessions[i].revision += 1;
                changed += 1;
            }
        }
        start = end;
    }
    changed
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SessionState;
    use crate::time::Epoch;

    fn session(id: &str, aos_min: i64, los_min: i64, priority: i32, mel: f64) -> CommSession {
        let t0 = Epoch::ymd_hms(2021, 5, 11, 0, 0, 0);
        CommSession {
            id: id.into(),
            sat_name: "SAT".into(),
            station_name: "SENDAI".into(),
            link_name: "SCMD".into(),
            max_elevation: mel,
            sunlit: true,
            interference: false,
            enabled: true,
            t_aos: t0.add_seconds(aos_min as f64 * 60.0),
            t_mel: t0.add_seconds((aos_min + los_min) as f64 * 30.0),
            t_los: t0.add_seconds(los_min as f64 * 60.0),
            t_los5: None,
            priority,
            beam_label: "SCMD".into(),
            state: SessionState::Confirmed,
            revision: 0,
        }
    }

    fn losers(sessions: &[CommSession]) -> Vec<&str> {
        sessions.iter().filter(|s| s.interference).map(|s| s.id.as_str()).collect()
    }

    #[test]
    fn priority_beats_elevation() {
        let mut s = vec![session("A", 0, 10, 2, 20.0), session("B", 5, 15, 1, 80.0)];
        resolve_interference(&mut s, 60, 60);
        assert_eq!(losers(&s), ["B"]);
    }

    #[test]
    fn elevation_breaks_priority_ties() {
        let mut s = vec![session("A", 0, 10, 1, 40.0), session("B", 5, 15, 1, 80.0)];
        resolve_interference(&mut s, 60, 60);
        assert_eq!(losers(&s), ["A"]);
    }

    #[test]
    fn padding_creates_conflicts() {
        let mut s = vec![session("A", 0, 10, 1, 40.0), session("B", 11, 20, 1, 30.0)];
        resolve_interference(&mut s, 0, 0);
        assert!(losers(&s).is_empty());
        resolve_interference(&mut s, 30, 30);
        assert_eq!(losers(&s), ["B"]);
    }

    #[test]
    fn chained_group_has_single_winner() {
        let mut s = vec![
            session("A", 0, 10, 1, 30.0),
            session("B", 9, 20, 1, 60.0),
            session("C", 19, 30, 1, 30.0),
        ];
        assert_eq!(resolve_interference(&mut s, 0, 0), 2);
        assert_eq!(losers(&s), ["A", "C"]);
        assert_eq!(resolve_interference(&mut s, 0, 0), 0);
    }
}
