//! Append-only run log: every state change of an optimization run as one
//! JSON line, so a run can be audited, reported on, and resumed.
//!
//! Timestamps are logical — the number of trajectories evaluated when the
//! event was written — never wall-clock, so a resumed run reproduces the
//! original byte stream exactly.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::archive::SubAgentSpec;
use crate::bandit::{ArmId, ArmStats, SelectionResult};
use crate::config::RunConfig;
use crate::credit::CreditReport;
use crate::error::{Error, Result};
use crate::evaluation::{OrchestratorPlan, Trajectory};
use crate::simenv::Role;

/// Schema version stamped into `run_start`.
pub const LOG_VERSION: &str = "1";

/// What happened. `round` and ordering context live on [`RunEvent`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventBody {
    /// First event of every log.
    RunStart { version: String, config: RunConfig },
    /// A new arm entered the archive (bootstrap arms appear as round-0
    /// expansions). `skills` is the simulated backend's ability table for
    /// the arm; live runs leave it out.
    Expansion {
        arm: SubAgentSpec,
        #[serde(skip_serializing_if = "Option::is_none")]
        skills: Option<BTreeMap<Role, f64>>,
        warmup_rounds: u32,
    },
    /// One warm-up episode of a fresh arm.
    WarmupUpdate {
        arm_id: ArmId,
        warmup_round: u32,
        instance_id: String,
        applied: Vec<String>,
        skipped: Vec<String>,
    },
    /// The bandit's pick for a round.
    Selection(SelectionResult),
    /// The plan the round ran under.
    PlanBuilt { plan: OrchestratorPlan },
    /// One finished evaluation episode.
    TrajectoryDone { trajectory: Trajectory },
    /// Hindsight labels for the round.
    #[serde(rename = "credit_report")]
    Credit(CreditReport),
    /// Running totals for every arm, in creation order, after folding the
    /// round's labels in. Authoritative for resume.
    StatsUpdate { stats: Vec<ArmStats> },
    /// Last event of a completed run.
    RunEnd { rounds_completed: u64 },
}

impl EventBody {
    /// The `kind` tag this body serializes under.
    pub fn kind(&self) -> &'static str {
        match self {
            EventBody::RunStart { .. } => "run_start",
            EventBody::Expansion { .. } => "expansion",
            EventBody::WarmupUpdate { .. } => "warmup_update",
            EventBody::Selection(_) => "selection",
            EventBody::PlanBuilt { .. } => "plan_built",
            EventBody::TrajectoryDone { .. } => "trajectory_done",
            EventBody::Credit(_) => "credit_report",
            EventBody::StatsUpdate { .. } => "stats_update",
            EventBody::RunEnd { .. } => "run_end",
        }
    }
}

/// One log line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEvent {
    /// 1-based, contiguous.
    pub seq: u64,
    /// Optimization round the event belongs to (0 = bootstrap phase).
    pub round: u64,
    /// Logical clock: trajectories evaluated so far.
    pub tick: u64,
    #[serde(flatten)]
    pub body: EventBody,
}

/// A read-back event together with the byte offset just past its line,
/// so callers can truncate a log right after any event.
#[derive(Debug, Clone)]
pub struct LoggedEvent {
    pub event: RunEvent,
    pub end_offset: u64,
}

/// Appending writer with the run's logical clocks.
pub struct EventLog {
    writer: BufWriter<File>,
    next_seq: u64,
    tick: u64,
}

impl EventLog {
    /// Start a fresh log; refuses to touch an existing file.
    pub fn create(path: &Path) -> Result<EventLog> {
        let file = OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(path)
            .map_err(|e| {
                Error::invalid(format!("cannot create run log {}: {e}", path.display()))
            })?;
        Ok(EventLog {
            writer: BufWriter::new(file),
            next_seq: 1,
            tick: 0,
        })
    }

    /// Continue an existing log from known clock positions. The caller is
    /// responsible for having truncated the file to a consistent prefix.
    pub fn reopen(path: &Path, next_seq: u64, tick: u64) -> Result<EventLog> {
        if next_seq == 0 {
            return Err(Error::invalid("next_seq is 1-based"));
        }
        let file = OpenOptions::new().append(true).open(path)?;
        Ok(EventLog {
            writer: BufWriter::new(file),
            next_seq,
            tick,
        })
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    /// Advance the logical clock by one evaluated trajectory.
    pub fn bump_tick(&mut self) {
        self.tick += 1;
    }

    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    /// Stamp, serialize, write, and flush one event.
    pub fn emit(&mut self, round: u64, body: EventBody) -> Result<RunEvent> {
        let event = RunEvent {
            seq: self.next_seq,
            round,
            tick: self.tick,
            body,
        };
        let line = serde_json::to_string(&event)?;
        self.writer.write_all(line.as_bytes())?;
        self.writer.write_all(b"\n")?;
        self.writer.flush()?;
        self.next_seq += 1;
        Ok(event)
    }
}

/// Read and validate a whole log: every line parses, sequence numbers are
/// contiguous from 1, and the first event is `run_start`. A violation
/// reports the last sequence number that was still good.
pub fn read_log(path: &Path) -> Result<Vec<LoggedEvent>> {
    let file = File::open(path)
        .map_err(|e| Error::invalid(format!("cannot open run log {}: {e}", path.display())))?;
    let mut reader = BufReader::new(file);
    let mut events: Vec<LoggedEvent> = Vec::new();
    let mut offset = 0u64;
    let mut line = String::new();
    loop {
        line.clear();
        let read = reader.read_line(&mut line)?;
        if read == 0 {
            break;
        }
        let last_valid_seq = events.last().map(|e| e.event.seq).unwrap_or(0);
        if !line.ends_with('\n') {
            return Err(Error::CorruptLog {
                detail: "truncated final line".to_owned(),
                last_valid_seq,
            });
        }
        let event: RunEvent = serde_json::from_str(line.trim_end()).map_err(|e| {
            Error::CorruptLog {
                detail: format!("line {}: {e}", events.len() + 1),
                last_valid_seq,
            }
        })?;
        if event.seq != last_valid_seq + 1 {
            return Err(Error::CorruptLog {
                detail: format!(
                    "sequence jumped from {last_valid_seq} to {}",
                    event.seq
                ),
                last_valid_seq,
            });
        }
        offset += read as u64;
        events.push(LoggedEvent { event, end_offset: offset });
    }
    if events.is_empty() {
        return Err(Error::CorruptLog {
            detail: "empty log".to_owned(),
            last_valid_seq: 0,
        });
    }
    if !matches!(events[0].event.body, EventBody::RunStart { .. }) {
        return Err(Error::CorruptLog {
            detail: "first event is not run_start".to_owned(),
            last_valid_seq: 0,
        });
    }
    Ok(events)
}
