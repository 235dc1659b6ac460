//! Fault plans (scheduled node failures and exits) and recovery reports.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::environment::EnvironmentSpec;
use crate::geometry::Point2;
use crate::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultAction {
    Fail,
    Exit,
}

impl fmt::Display for FaultAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FaultAction::Fail => "fail",
            FaultAction::Exit => "exit",
        })
    }
}

impl FromStr for FaultAction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fail" => Ok(FaultAction::Fail),
            "exit" => Ok(FaultAction::Exit),
            other => Err(format!("unknown action `{other}`")),
        }
    }
}

/// Applied just before the step that produces tick `tick + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultEvent {
    pub tick: u64,
    pub action: FaultAction,
    pub node: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("fault plan line {line}: {reason}")]
pub struct FaultPlanError {
    pub line: usize,
    pub reason: String,
}

/// Parses lines of `tick=<int> action=<fail|exit> node=<id>`. Blank lines
/// and `#` comments are skipped; keys may come in any order.
pub fn parse_fault_plan(text: &str) -> Result<Vec<FaultEvent>, FaultPlanError> {
    let mut events = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let err = |reason: String| FaultPlanError { line, reason };
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (mut tick, mut action, mut node) = (None, None, None);
        for token in body.split_whitespace() {
            let (key, value) =
                token.split_once('=').ok_or_else(|| err(format!("expected key=value, got `{token}`")))?;
            match key {
                "tick" => tick = Some(value.parse::<u64>().map_err(|e| err(format!("tick `{value}`: {e}")))?),
                "action" => action = Some(value.parse::<FaultAction>().map_err(err)?),
                "node" => node = Some(value.parse::<NodeId>().map_err(|e| err(format!("node `{value}`: {e}")))?),
                other => return Err(err(format!("unknown key `{other}`"))),
            }
        }
        events.push(FaultEvent {
            tick: tick.ok_or_else(|| err("missing tick".into()))?,
            action: action.ok_or_else(|| err("missing action".into()))?,
            node: node.ok_or_else(|| err("missing node".into()))?,
        });
    }
    events.sort_by_key(|e| e.tick);
    Ok(events)
}

/// Position class of a node relative to the room walls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeClass {
    Interior,
    Side,
    Corner,
}

impl fmt::Display for NodeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NodeClass::Interior => "interior",
            NodeClass::Side => "side",
            NodeClass::Corner => "corner",
        })
    }
}

/// Interior, side or corner by how many room walls lie within `r_s`.
pub fn classify_node(position: Point2, env: &EnvironmentSpec, r_s: f64) -> NodeClass {
    let near_x = position.x <= r_s || env.width - position.x <= r_s;
    let near_y = position.y <= r_s || env.height - position.y <= r_s;
    match (near_x, near_y) {
        (true, true) => NodeClass::Corner,
        (false, false) => NodeClass::Interior,
        _ => NodeClass::Side,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultReport {
    pub tick: u64,
    pub action: FaultAction,
    pub node: NodeId,
    pub class: NodeClass,
    /// PAC recorded at the fault tick, before the node was removed.
    pub pac_before: f64,
    /// PAC right after removal, before anyone moved.
    pub pac_at_fault: f64,
    /// Lowest PAC between the fault and the next fault (or the end).
    pub pac_min: f64,
    /// Ticks until PAC is back within 1% of `pac_before`.
    pub ticks_to_recover: Option<u64>,
    /// CDT accumulated between the fault and the next fault (or the end).
    pub recovery_cdt: f64,
    pub exit_path: Option<Vec<Point2>>,
}
