//! Road network model: lanes, roads, intersections and their phase tables.
//!
//! A [`Network`] is always built from a [`RoadnetDoc`] (the on-disk schema),
//! either parsed from a file or produced by [`build_grid`]. All structural
//! checks live in [`Network::from_doc`], so every network in memory has passed
//! the same validation.

pub mod geometry;
pub mod grid;
pub mod io;
pub mod preset;

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use grid::{build_grid, build_grid_with};
pub use io::{parse_roadnet, serialize_roadnet, RoadnetDoc};
pub use preset::{preset_phase_table, Arm, PresetTable, Topology};

use geometry::{bearing, chords_conflict, MovementChord};
use io::{IntersectionDoc, LaneDoc, MovementDoc, PhaseDoc, RoadDoc};

#[derive(Debug, Error, PartialEq)]
pub enum RoadnetError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("topology error: {0}")]
    Topology(String),
    #[error("unknown topology preset `{0}`")]
    UnknownPreset(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TurnKind {
    Left,
    Straight,
    Right,
}

impl TurnKind {
    pub const ALL: [TurnKind; 3] = [TurnKind::Left, TurnKind::Straight, TurnKind::Right];

    pub fn index(self) -> usize {
        match self {
            TurnKind::Left => 0,
            TurnKind::Straight => 1,
            TurnKind::Right => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lane {
    pub id: String,
    pub road: usize,
    pub position_index: usize,
    /// Meters.
    pub length: f64,
    pub movement_kinds: Vec<TurnKind>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Road {
    pub id: String,
    /// Upstream intersection, `None` for a boundary entry road.
    pub from: Option<usize>,
    /// Downstream intersection, `None` for a boundary exit road.
    pub to: Option<usize>,
    pub start: [f64; 2],
    pub end: [f64; 2],
    pub length: f64,
    /// Lane indices ordered by position index.
    pub lanes: Vec<usize>,
}

impl Road {
    pub fn is_entry(&self) -> bool {
        self.from.is_none()
    }

    pub fn is_exit(&self) -> bool {
        self.to.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Movement {
    pub from_road: usize,
    pub from_lanes: Vec<usize>,
    pub to_road: usize,
    pub kind: TurnKind,
    /// Served regardless of the displayed phase (unsignalized right turn).
    pub always_permitted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phase {
    pub index: usize,
    /// Indices into the owning intersection's movement list.
    pub movements: Vec<usize>,
    /// Union of the movements' `from_lanes`, sorted.
    pub participating_lanes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Intersection {
    pub id: String,
    pub position: [f64; 2],
    pub topology: Topology,
    pub incoming_roads: Vec<usize>,
    pub outgoing_roads: Vec<usize>,
    pub incoming_lanes: Vec<usize>,
    pub outgoing_lanes: Vec<usize>,
    pub movements: Vec<Movement>,
    pub phases: Vec<Phase>,
}

impl Intersection {
    pub fn phase_count(&self) -> usize {
        self.phases.len()
    }

    /// Movement taking traffic from `from_road` onto `to_road`, if any.
    pub fn movement_between(&self, from_road: usize, to_road: usize) -> Option<usize> {
        self.movements.iter().position(|m| m.from_road == from_road && m.to_road == to_road)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub intersections: Vec<Intersection>,
    pub roads: Vec<Road>,
    pub lanes: Vec<Lane>,
    pub right_turns_signalized: bool,
    road_index: HashMap<String, usize>,
    lane_index: HashMap<String, usize>,
}

impl Network {
    pub fn road_by_id(&self, id: &str) -> Option<usize> {
        self.road_index.get(id).copied()
    }

    pub fn lane_by_id(&self, id: &str) -> Option<usize> {
        self.lane_index.get(id).copied()
    }

    pub fn entry_roads(&self) -> impl Iterator<Item = usize> + '_ {
        self.roads.iter().enumerate().filter(|(_, r)| r.is_entry()).map(|(i, _)| i)
    }

    pub fn exit_roads(&self) -> impl Iterator<Item = usize> + '_ {
        self.roads.iter().enumerate().filter(|(_, r)| r.is_exit()).map(|(i, _)| i)
    }

    /// Builds and validates a network from its document form.
    pub fn from_doc(doc: &RoadnetDoc) -> Result<Network, RoadnetError> {
        build_network(doc)
    }

    /// Document form; `Network::from_doc(&n.to_doc()) == n`.
    pub fn to_doc(&self) -> RoadnetDoc {
        let name = |i: Option<usize>| i.map(|i| self.intersections[i].id.clone());
        RoadnetDoc {
            version: io::SCHEMA_VERSION,
            right_turns_signalized: self.right_turns_signalized,
            intersections: self
                .intersections
                .iter()
                .map(|x| IntersectionDoc {
                    id: x.id.clone(),
                    point: x.position,
                    topology: x.topology,
                    movements: x
                        .movements
                        .iter()
                        .map(|m| MovementDoc {
                            from_road: self.roads[m.from_road].id.clone(),
                            from_lanes: m.from_lanes.iter().map(|&l| self.lanes[l].id.clone()).collect(),
                            to_road: self.roads[m.to_road].id.clone(),
                            kind: m.kind,
                        })
                        .collect(),
                })
                .collect(),
            roads: self
                .roads
                .iter()
                .map(|r| RoadDoc {
                    id: r.id.clone(),
                    from: name(r.from),
                    to: name(r.to),
                    start: r.start,
                    end: r.end,
                    length: r.length,
                })
                .collect(),
            lanes: self
                .lanes
                .iter()
                .map(|l| LaneDoc {
                    id: l.id.clone(),
                    road: self.roads[l.road].id.clone(),
                    index: l.position_index,
                    length: l.length,
                    movements: l.movement_kinds.clone(),
                })
                .collect(),
            phases: self
                .intersections
                .iter()
                .flat_map(|x| {
                    x.phases.iter().map(move |p| PhaseDoc {
                        intersection: x.id.clone(),
                        index: p.index,
                        movements: p.movements.clone(),
                    })
                })
                .collect(),
        }
    }

    /// Geometric chord of movement `m` at intersection `node`.
    pub fn movement_chord(&self, node: usize, m: usize) -> MovementChord {
        let x = &self.intersections[node];
        let mv = &x.movements[m];
        let in_b = bearing(x.position, self.roads[mv.from_road].start);
        let out_b = bearing(x.position, self.roads[mv.to_road].end);
        MovementChord::from_bearings(in_b, out_b)
    }

    /// Whether two movements of one intersection may not share a green.
    /// Right turns never conflict unless right turns are signalized.
    pub fn movements_conflict(&self, node: usize, a: usize, b: usize) -> bool {
        let x = &self.intersections[node];
        if x.movements[a].kind == TurnKind::Right || x.movements[b].kind == TurnKind::Right {
            return false;
        }
        chords_conflict(self.movement_chord(node, a), self.movement_chord(node, b))
    }
}

fn schema(msg: impl Into<String>) -> RoadnetError {
    RoadnetError::Schema(msg.into())
}

fn topo(msg: impl Into<String>) -> RoadnetError {
    RoadnetError::Topology(msg.into())
}

fn index_ids<'a>(kind: &str, ids: impl Iterator<Item = &'a str>) -> Result<HashMap<String, usize>, RoadnetError> {
    let mut map = HashMap::new();
    for (i, id) in ids.enumerate() {
        if id.is_empty() {
            return Err(schema(format!("{kind} with empty id")));
        }
        if map.insert(id.to_string(), i).is_some() {
            return Err(schema(format!("duplicate {kind} id `{id}`")));
        }
    }
    Ok(map)
}

fn build_network(doc: &RoadnetDoc) -> Result<Network, RoadnetError> {
    if doc.version != io::SCHEMA_VERSION {
        return Err(schema(format!("unsupported schema version {}", doc.version)));
    }
    if doc.intersections.is_empty() {
        return Err(schema("network has no intersections"));
    }
    let node_index = index_ids("intersection", doc.intersections.iter().map(|x| x.id.as_str()))?;
    let road_index = index_ids("road", doc.roads.iter().map(|r| r.id.as_str()))?;
    let lane_index = index_ids("lane", doc.lanes.iter().map(|l| l.id.as_str()))?;

    let lookup_node = |id: &Option<String>, road: &str| -> Result<Option<usize>, RoadnetError> {
        match id {
            None => Ok(None),
            Some(n) => node_index
                .get(n)
                .copied()
                .map(Some)
                .ok_or_else(|| topo(format!("road `{road}` references unknown intersection `{n}`"))),
        }
    };

    let mut roads = Vec::with_capacity(doc.roads.len());
    for r in &doc.roads {
        if !(r.length > 0.0 && r.length.is_finite()) {
            return Err(schema(format!("road `{}` has non-positive length", r.id)));
        }
        let from = lookup_node(&r.from, &r.id)?;
        let to = lookup_node(&r.to, &r.id)?;
        match (from, to) {
            (None, None) => return Err(topo(format!("road `{}` touches no intersection", r.id))),
            (Some(a), Some(b)) if a == b => return Err(topo(format!("road `{}` is a self-loop", r.id))),
            _ => {}
        }
        roads.push(Road { id: r.id.clone(), from, to, start: r.start, end: r.end, length: r.length, lanes: Vec::new() });
    }

    let mut lanes = Vec::with_capacity(doc.lanes.len());
    let mut road_lanes: BTreeMap<usize, BTreeMap<usize, usize>> = BTreeMap::new();
    for (i, l) in doc.lanes.iter().enumerate() {
        let road = *road_index
            .get(&l.road)
            .ok_or_else(|| topo(format!("lane `{}` belongs to unknown road `{}`", l.id, l.road)))?;
        if !(l.length > 0.0 && l.length.is_finite()) {
            return Err(schema(format!("lane `{}` has non-positive length", l.id)));
        }
        if l.movements.is_empty() {
            return Err(schema(format!("lane `{}` has no movement kinds", l.id)));
        }
        let mut kinds = l.movements.clone();
        kinds.sort();
        kinds.dedup();
        if road_lanes.entry(road).or_default().insert(l.index, i).is_some() {
            return Err(schema(format!("road `{}` has duplicate lane index {}", l.road, l.index)));
        }
        lanes.push(Lane { id: l.id.clone(), road, position_index: l.index, length: l.length, movement_kinds: kinds });
    }
    for (ri, road) in roads.iter_mut().enumerate() {
        let by_pos = road_lanes.remove(&ri).unwrap_or_default();
        if by_pos.is_empty() {
            return Err(topo(format!("road `{}` has no lanes", road.id)));
        }
        if by_pos.keys().copied().ne(0..by_pos.len()) {
            return Err(schema(format!("lane indices of road `{}` are not contiguous from 0", road.id)));
        }
        road.lanes = by_pos.into_values().collect();
    }

    let mut intersections = Vec::with_capacity(doc.intersections.len());
    for (ni, x) in doc.intersections.iter().enumerate() {
        let incoming_roads: Vec<usize> = (0..roads.len()).filter(|&r| roads[r].to == Some(ni)).collect();
        let outgoing_roads: Vec<usize> = (0..roads.len()).filter(|&r| roads[r].from == Some(ni)).collect();
        let incoming_lanes = incoming_roads.iter().flat_map(|&r| roads[r].lanes.iter().copied()).collect();
        let outgoing_lanes = outgoing_roads.iter().flat_map(|&r| roads[r].lanes.iter().copied()).collect();

        let mut movements = Vec::with_capacity(x.movements.len());
        for m in &x.movements {
            let from_road = *road_index
                .get(&m.from_road)
                .ok_or_else(|| topo(format!("{}: unknown road `{}`", x.id, m.from_road)))?;
            let to_road = *road_index
                .get(&m.to_road)
                .ok_or_else(|| topo(format!("{}: unknown road `{}`", x.id, m.to_road)))?;
            if roads[from_road].to != Some(ni) {
                return Err(topo(format!("{}: road `{}` does not enter the intersection", x.id, m.from_road)));
            }
            if roads[to_road].from != Some(ni) {
                return Err(topo(format!("{}: road `{}` does not leave the intersection", x.id, m.to_road)));
            }
            if m.from_lanes.is_empty() {
                return Err(topo(format!("{}: movement without lanes", x.id)));
            }
            let mut from_lanes = Vec::with_capacity(m.from_lanes.len());
            for lid in &m.from_lanes {
                let l = *lane_index.get(lid).ok_or_else(|| topo(format!("{}: dangling lane `{lid}`", x.id)))?;
                if lanes[l].road != from_road {
                    return Err(topo(format!("{}: lane `{lid}` is not on road `{}`", x.id, m.from_road)));
                }
                if !lanes[l].movement_kinds.contains(&m.kind) {
                    return Err(topo(format!("{}: lane `{lid}` does not feed a {:?} movement", x.id, m.kind)));
                }
                from_lanes.push(l);
            }
            from_lanes.sort_unstable();
            from_lanes.dedup();
            let always_permitted = m.kind == TurnKind::Right && !doc.right_turns_signalized;
            movements.push(Movement { from_road, from_lanes, to_road, kind: m.kind, always_permitted });
        }
        intersections.push(Intersection {
            id: x.id.clone(),
            position: x.point,
            topology: x.topology,
            incoming_roads,
            outgoing_roads,
            incoming_lanes,
            outgoing_lanes,
            movements,
            phases: Vec::new(),
        });
    }

    let mut phase_docs: Vec<BTreeMap<usize, &PhaseDoc>> = vec![BTreeMap::new(); intersections.len()];
    for p in &doc.phases {
        let ni = *node_index
            .get(&p.intersection)
            .ok_or_else(|| topo(format!("phase references unknown intersection `{}`", p.intersection)))?;
        if phase_docs[ni].insert(p.index, p).is_some() {
            return Err(schema(format!("{}: duplicate phase index {}", p.intersection, p.index)));
        }
    }
    for (ni, docs) in phase_docs.into_iter().enumerate() {
        let x = &mut intersections[ni];
        if docs.len() < 2 {
            return Err(schema(format!("{}: at least two phases are required", x.id)));
        }
        if docs.keys().copied().ne(0..docs.len()) {
            return Err(schema(format!("{}: phase indices are not contiguous from 0", x.id)));
        }
        for (index, p) in docs {
            let mut mvs = p.movements.clone();
            mvs.sort_unstable();
            mvs.dedup();
            if mvs.is_empty() {
                return Err(topo(format!("{}: phase {index} has no movements", x.id)));
            }
            if let Some(bad) = mvs.iter().find(|&&m| m >= x.movements.len()) {
                return Err(topo(format!("{}: phase {index} references movement {bad}", x.id)));
            }
            let lanes: BTreeSet<usize> =
                mvs.iter().flat_map(|&m| x.movements[m].from_lanes.iter().copied()).collect();
            x.phases.push(Phase { index, movements: mvs, participating_lanes: lanes.into_iter().collect() });
        }
        for (mi, m) in x.movements.iter().enumerate() {
            if !m.always_permitted && !x.phases.iter().any(|p| p.movements.contains(&mi)) {
                return Err(topo(format!("{}: movement {mi} ({:?}) is never served", x.id, m.kind)));
            }
        }
    }

    let network = Network {
        intersections,
        roads,
        lanes,
        right_turns_signalized: doc.right_turns_signalized,
        road_index,
        lane_index,
    };

    for (ni, x) in network.intersections.iter().enumerate() {
        for p in &x.phases {
            for (i, &a) in p.movements.iter().enumerate() {
                for &b in &p.movements[i + 1..] {
                    if network.movements_conflict(ni, a, b) {
                        return Err(topo(format!(
                            "{}: phase {} combines conflicting movements {a} and {b}",
                            x.id, p.index
                        )));
                    }
                }
            }
        }
    }
    check_connected(&network)?;
    Ok(network)
}

fn check_connected(net: &Network) -> Result<(), RoadnetError> {
    let n = net.intersections.len();
    let mut adj = vec![Vec::new(); n];
    for r in &net.roads {
        if let (Some(a), Some(b)) = (r.from, r.to) {
            adj[a].push(b);
            adj[b].push(a);
        }
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    match seen.iter().position(|s| !s) {
        Some(i) => Err(topo(format!("intersection `{}` is disconnected", net.intersections[i].id))),
        None => Ok(()),
    }
}
