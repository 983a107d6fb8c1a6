//! Intersection topology presets.
//!
//! Every preset is described in compass terms for a canonical orientation.
//! Approaches are named by the arm traffic arrives from, so a `North`
//! approach carries southbound vehicles. Phases list only signal-controlled
//! movements; right turns are handled separately (see [`super::Movement`]).
//!
//! | preset | arms | lanes per approach                         | phases |
//! |--------|------|--------------------------------------------|--------|
//! | A      | 4    | 3: left, straight, right                   | NS-straight, EW-straight, NS-left, EW-left |
//! | B      | 4    | E/W: 3 (left, straight, right); N/S: 2 (left, straight+right) | as A |
//! | C      | 3    | T-junction, stem to the south, 2 lanes     | EW-straight, westbound straight+left, stem |
//! | D      | 4    | 1 shared left+straight+right lane          | one phase per approach: N, E, S, W |

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{RoadnetError, TurnKind};

/// Intersection topology tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Topology {
    A,
    B,
    C,
    D,
}

impl Topology {
    pub const ALL: [Topology; 4] = [Topology::A, Topology::B, Topology::C, Topology::D];
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Topology::A => "A",
            Topology::B => "B",
            Topology::C => "C",
            Topology::D => "D",
        };
        f.write_str(s)
    }
}

impl FromStr for Topology {
    type Err = RoadnetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Topology::A),
            "B" => Ok(Topology::B),
            "C" => Ok(Topology::C),
            "D" => Ok(Topology::D),
            _ => Err(RoadnetError::UnknownPreset(s.to_string())),
        }
    }
}

/// Compass arm of an intersection, in clockwise order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Arm {
    North,
    East,
    South,
    West,
}

impl Arm {
    pub const ALL: [Arm; 4] = [Arm::North, Arm::East, Arm::South, Arm::West];

    fn index(self) -> usize {
        match self {
            Arm::North => 0,
            Arm::East => 1,
            Arm::South => 2,
            Arm::West => 3,
        }
    }

    fn from_index(i: usize) -> Arm {
        Arm::ALL[i % 4]
    }

    /// Rotate clockwise by `quarter_turns` × 90°.
    pub fn rotate(self, quarter_turns: usize) -> Arm {
        Arm::from_index(self.index() + quarter_turns)
    }

    pub fn opposite(self) -> Arm {
        self.rotate(2)
    }

    /// Arm through which a vehicle arriving from `self` leaves after a turn
    /// of the given kind (right-hand traffic).
    pub fn exit_for(self, kind: TurnKind) -> Arm {
        match kind {
            TurnKind::Straight => self.rotate(2),
            TurnKind::Left => self.rotate(1),
            TurnKind::Right => self.rotate(3),
        }
    }

    /// Unit offset in the plane (x east, y north).
    pub fn offset(self) -> [f64; 2] {
        match self {
            Arm::North => [0.0, 1.0],
            Arm::East => [1.0, 0.0],
            Arm::South => [0.0, -1.0],
            Arm::West => [-1.0, 0.0],
        }
    }

    pub fn letter(self) -> char {
        match self {
            Arm::North => 'n',
            Arm::East => 'e',
            Arm::South => 's',
            Arm::West => 'w',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApproachTemplate {
    pub arm: Arm,
    /// Movement kinds of each lane, ordered by position index.
    pub lanes: Vec<Vec<TurnKind>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MovementTemplate {
    pub approach: Arm,
    pub kind: TurnKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTemplate {
    pub movements: Vec<MovementTemplate>,
}

/// A preset's arms, lane layout and ordered phase list.
#[derive(Debug, Clone, PartialEq)]
pub struct PresetTable {
    pub topology: Topology,
    pub arms: Vec<Arm>,
    pub approaches: Vec<ApproachTemplate>,
    pub phases: Vec<PhaseTemplate>,
}

impl PresetTable {
    /// The same table rotated clockwise by `quarter_turns` × 90°. Turn kinds
    /// and phase order are unchanged.
    pub fn rotated(&self, quarter_turns: usize) -> PresetTable {
        PresetTable {
            topology: self.topology,
            arms: self.arms.iter().map(|a| a.rotate(quarter_turns)).collect(),
            approaches: self
                .approaches
                .iter()
                .map(|ap| ApproachTemplate { arm: ap.arm.rotate(quarter_turns), lanes: ap.lanes.clone() })
                .collect(),
            phases: self
                .phases
                .iter()
                .map(|p| PhaseTemplate {
                    movements: p
                        .movements
                        .iter()
                        .map(|m| MovementTemplate { approach: m.approach.rotate(quarter_turns), kind: m.kind })
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn approach(&self, arm: Arm) -> Option<&ApproachTemplate> {
        self.approaches.iter().find(|a| a.arm == arm)
    }

    /// Every movement the lane layout supports, including right turns.
    pub fn movements(&self) -> Vec<MovementTemplate> {
        let mut out = Vec::new();
        for ap in &self.approaches {
            for kind in [TurnKind::Left, TurnKind::Straight, TurnKind::Right] {
                if ap.lanes.iter().any(|l| l.contains(&kind)) {
                    out.push(MovementTemplate { approach: ap.arm, kind });
                }
            }
        }
        out
    }
}

fn mv(approach: Arm, kind: TurnKind) -> MovementTemplate {
    MovementTemplate { approach, kind }
}

fn phase(movements: &[MovementTemplate]) -> PhaseTemplate {
    PhaseTemplate { movements: movements.to_vec() }
}

/// Fixed phase table of a topology preset in canonical orientation.
pub fn preset_phase_table(topology: Topology) -> PresetTable {
    use Arm::*;
    use TurnKind::*;
    let four_phase = || {
        vec![
            phase(&[mv(North, Straight), mv(South, Straight)]),
            phase(&[mv(East, Straight), mv(West, Straight)]),
            phase(&[mv(North, Left), mv(South, Left)]),
            phase(&[mv(East, Left), mv(West, Left)]),
        ]
    };
    match topology {
        Topology::A => PresetTable {
            topology,
            arms: Arm::ALL.to_vec(),
            approaches: Arm::ALL
                .iter()
                .map(|&arm| ApproachTemplate { arm, lanes: vec![vec![Left], vec![Straight], vec![Right]] })
                .collect(),
            phases: four_phase(),
        },
        Topology::B => PresetTable {
            topology,
            arms: Arm::ALL.to_vec(),
            approaches: Arm::ALL
                .iter()
                .map(|&arm| {
                    let lanes = match arm {
                        East | West => vec![vec![Left], vec![Straight], vec![Right]],
                        North | South => vec![vec![Left], vec![Straight, Right]],
                    };
                    ApproachTemplate { arm, lanes }
                })
                .collect(),
            phases: four_phase(),
        },
        Topology::C => PresetTable {
            topology,
            arms: vec![East, South, West],
            approaches: vec![
                ApproachTemplate { arm: East, lanes: vec![vec![Left], vec![Straight]] },
                ApproachTemplate { arm: South, lanes: vec![vec![Left], vec![Right]] },
                ApproachTemplate { arm: West, lanes: vec![vec![Straight], vec![Right]] },
            ],
            phases: vec![
                phase(&[mv(East, Straight), mv(West, Straight)]),
                phase(&[mv(East, Straight), mv(East, Left)]),
                phase(&[mv(South, Left)]),
            ],
        },
        Topology::D => PresetTable {
            topology,
            arms: Arm::ALL.to_vec(),
            approaches: Arm::ALL
                .iter()
                .map(|&arm| ApproachTemplate { arm, lanes: vec![vec![Left, Straight, Right]] })
                .collect(),
            phases: Arm::ALL
                .iter()
                .map(|&arm| phase(&[mv(arm, Left), mv(arm, Straight)]))
                .collect(),
        },
    }
}
