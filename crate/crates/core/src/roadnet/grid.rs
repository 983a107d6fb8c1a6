//! Rectangular grid generator.
//!
//! Intersection `(r, c)` sits at `x = c * ew_length`, `y = -r * ns_length`
//! (row 0 is the northern edge). Every arm that points out of the grid gets a
//! boundary entry road and a boundary exit road of the same length as the
//! internal roads along that axis.
//!
//! Preset C has only three arms, so its orientation alternates to keep the
//! lattice connected: with two or more columns the missing arm is north when
//! `r + c` is even and south otherwise; a single column drops east/west arms
//! instead.

use super::io::{IntersectionDoc, LaneDoc, MovementDoc, PhaseDoc, RoadDoc, SCHEMA_VERSION};
use super::preset::{preset_phase_table, Arm, PresetTable};
use super::{Network, RoadnetDoc, RoadnetError, Topology, TurnKind};

fn node_id(r: usize, c: usize) -> String {
    format!("x_{r}_{c}")
}

fn out_road_id(r: usize, c: usize, arm: Arm) -> String {
    format!("r_{r}_{c}_{}", arm.letter())
}

fn entry_road_id(r: usize, c: usize, arm: Arm) -> String {
    format!("in_{r}_{c}_{}", arm.letter())
}

/// Quarter turns applied to the canonical preset at grid cell `(r, c)`.
fn orientation(topology: Topology, rows: usize, cols: usize, r: usize, c: usize) -> usize {
    if topology != Topology::C {
        return 0;
    }
    if cols >= 2 || rows == 1 {
        // Canonical C misses north; rotating by two misses south.
        if (r + c).is_multiple_of(2) {
            0
        } else {
            2
        }
    } else if r.is_multiple_of(2) {
        // Missing east.
        1
    } else {
        // Missing west.
        3
    }
}

pub fn build_grid(
    rows: usize,
    cols: usize,
    preset: Topology,
    ew_length: f64,
    ns_length: f64,
) -> Result<Network, RoadnetError> {
    build_grid_with(rows, cols, preset, ew_length, ns_length, false)
}

/// As [`build_grid`], optionally putting right turns under signal control.
/// Signalized right turns join every phase that serves their approach.
pub fn build_grid_with(
    rows: usize,
    cols: usize,
    preset: Topology,
    ew_length: f64,
    ns_length: f64,
    right_turns_signalized: bool,
) -> Result<Network, RoadnetError> {
    if rows == 0 || cols == 0 {
        return Err(RoadnetError::Schema("grid needs at least one row and one column".into()));
    }
    if !(ew_length > 0.0 && ns_length > 0.0 && ew_length.is_finite() && ns_length.is_finite()) {
        return Err(RoadnetError::Schema("road lengths must be positive".into()));
    }
    let canonical = preset_phase_table(preset);
    let tables: Vec<Vec<PresetTable>> = (0..rows)
        .map(|r| (0..cols).map(|c| canonical.rotated(orientation(preset, rows, cols, r, c))).collect())
        .collect();
    let pos = |r: usize, c: usize| [c as f64 * ew_length, -(r as f64) * ns_length];
    let axis_len = |arm: Arm| match arm {
        Arm::East | Arm::West => ew_length,
        Arm::North | Arm::South => ns_length,
    };
    let neighbour = |r: usize, c: usize, arm: Arm| -> Option<(usize, usize)> {
        let (nr, nc) = match arm {
            Arm::North => (r.checked_sub(1)?, c),
            Arm::South => (r + 1, c),
            Arm::East => (r, c + 1),
            Arm::West => (r, c.checked_sub(1)?),
        };
        (nr < rows && nc < cols).then_some((nr, nc))
    };
    let has_arm = |r: usize, c: usize, arm: Arm| tables[r][c].arms.contains(&arm);
    // Internal link through `arm` of (r, c), when both ends carry the arm.
    let link = |r: usize, c: usize, arm: Arm| -> Option<(usize, usize)> {
        let (nr, nc) = neighbour(r, c, arm)?;
        (has_arm(r, c, arm) && has_arm(nr, nc, arm.opposite())).then_some((nr, nc))
    };

    let mut doc = RoadnetDoc {
        version: SCHEMA_VERSION,
        right_turns_signalized,
        intersections: Vec::new(),
        roads: Vec::new(),
        lanes: Vec::new(),
        phases: Vec::new(),
    };

    let push_lanes = |doc: &mut RoadnetDoc, road: &str, length: f64, layout: &[Vec<TurnKind>]| {
        for (i, kinds) in layout.iter().enumerate() {
            doc.lanes.push(LaneDoc {
                id: format!("{road}_{i}"),
                road: road.to_string(),
                index: i,
                length,
                movements: kinds.clone(),
            });
        }
    };
    let exit_layout = vec![vec![TurnKind::Straight]];

    for r in 0..rows {
        for c in 0..cols {
            let here = pos(r, c);
            for &arm in &tables[r][c].arms {
                let len = axis_len(arm);
                let off = arm.offset();
                let far = [here[0] + off[0] * len, here[1] + off[1] * len];
                match neighbour(r, c, arm) {
                    Some((nr, nc)) => {
                        if link(r, c, arm).is_none() {
                            continue;
                        }
                        let id = out_road_id(r, c, arm);
                        doc.roads.push(RoadDoc {
                            id: id.clone(),
                            from: Some(node_id(r, c)),
                            to: Some(node_id(nr, nc)),
                            start: here,
                            end: far,
                            length: len,
                        });
                        let layout = &tables[nr][nc].approach(arm.opposite()).expect("approach exists").lanes;
                        push_lanes(&mut doc, &id, len, layout);
                    }
                    None => {
                        let out = out_road_id(r, c, arm);
                        doc.roads.push(RoadDoc {
                            id: out.clone(),
                            from: Some(node_id(r, c)),
                            to: None,
                            start: here,
                            end: far,
                            length: len,
                        });
                        push_lanes(&mut doc, &out, len, &exit_layout);
                        let inn = entry_road_id(r, c, arm);
                        doc.roads.push(RoadDoc {
                            id: inn.clone(),
                            from: None,
                            to: Some(node_id(r, c)),
                            start: far,
                            end: here,
                            length: len,
                        });
                        let layout = &tables[r][c].approach(arm).expect("approach exists").lanes;
                        push_lanes(&mut doc, &inn, len, layout);
                    }
                }
            }
        }
    }

    for r in 0..rows {
        for c in 0..cols {
            let table = &tables[r][c];
            let incoming = |arm: Arm| -> String {
                match neighbour(r, c, arm) {
                    Some((nr, nc)) => out_road_id(nr, nc, arm.opposite()),
                    None => entry_road_id(r, c, arm),
                }
            };
            let mut movements = Vec::new();
            let mut keys = Vec::new();
            for m in table.movements() {
                let from_road = incoming(m.approach);
                let layout = &table.approach(m.approach).expect("approach exists").lanes;
                let from_lanes = layout
                    .iter()
                    .enumerate()
                    .filter(|(_, kinds)| kinds.contains(&m.kind))
                    .map(|(i, _)| format!("{from_road}_{i}"))
                    .collect();
                movements.push(MovementDoc {
                    from_road,
                    from_lanes,
                    to_road: out_road_id(r, c, m.approach.exit_for(m.kind)),
                    kind: m.kind,
                });
                keys.push(m);
            }
            for (pi, p) in table.phases.iter().enumerate() {
                let mut idx: Vec<usize> =
                    p.movements.iter().map(|m| keys.iter().position(|k| k == m).expect("phase movement")).collect();
                if right_turns_signalized {
                    for (ki, k) in keys.iter().enumerate() {
                        if k.kind == TurnKind::Right && p.movements.iter().any(|m| m.approach == k.approach) {
                            idx.push(ki);
                        }
                    }
                }
                idx.sort_unstable();
                doc.phases.push(PhaseDoc { intersection: node_id(r, c), index: pi, movements: idx });
            }
            doc.intersections.push(IntersectionDoc {
                id: node_id(r, c),
                point: pos(r, c),
                topology: preset,
                movements,
            });
        }
    }

    Network::from_doc(&doc)
}
