//! JSON road-network file format.
//!
//! ```text
//! {
//!   "version": 1,
//!   "right_turns_signalized": false,          // optional, default false
//!   "intersections": [{ "id", "point": [x, y], "topology": "A"|"B"|"C"|"D",
//!                       "movements": [{ "from_road", "from_lanes": [lane ids],
//!                                       "to_road", "kind": "left"|"straight"|"right" }] }],
//!   "roads":  [{ "id", "from": intersection id | null, "to": intersection id | null,
//!                "start": [x, y], "end": [x, y], "length": meters }],
//!   "lanes":  [{ "id", "road", "index": position within road, "length": meters,
//!                "movements": [turn kinds fed at the downstream end] }],
//!   "phases": [{ "intersection", "index", "movements": [indices into the
//!                intersection's movement list] }]
//! }
//! ```
//!
//! Coordinates are meters with x pointing east and y pointing north. A road
//! with `from: null` is a boundary entry road, `to: null` a boundary exit road.

use serde::{Deserialize, Serialize};

use super::{Network, RoadnetError, Topology, TurnKind};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoadnetDoc {
    pub version: u32,
    #[serde(default)]
    pub right_turns_signalized: bool,
    pub intersections: Vec<IntersectionDoc>,
    pub roads: Vec<RoadDoc>,
    pub lanes: Vec<LaneDoc>,
    pub phases: Vec<PhaseDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntersectionDoc {
    pub id: String,
    pub point: [f64; 2],
    pub topology: Topology,
    pub movements: Vec<MovementDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MovementDoc {
    pub from_road: String,
    pub from_lanes: Vec<String>,
    pub to_road: String,
    pub kind: TurnKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoadDoc {
    pub id: String,
    pub from: Option<String>,
    pub to: Option<String>,
    pub start: [f64; 2],
    pub end: [f64; 2],
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaneDoc {
    pub id: String,
    pub road: String,
    pub index: usize,
    pub length: f64,
    pub movements: Vec<TurnKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseDoc {
    pub intersection: String,
    pub index: usize,
    pub movements: Vec<usize>,
}

pub fn parse_roadnet(text: &str) -> Result<Network, RoadnetError> {
    let doc: RoadnetDoc = serde_json::from_str(text).map_err(|e| RoadnetError::Schema(e.to_string()))?;
    Network::from_doc(&doc)
}

/// Pretty-printed JSON; parsing the output reproduces the network exactly.
pub fn serialize_roadnet(net: &Network) -> String {
    let mut s = serde_json::to_string_pretty(&net.to_doc()).expect("roadnet document serializes");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roadnet::build_grid;

    /// One preset-A intersection written out by hand.
    pub(crate) fn single_a() -> String {
        let mut roads = Vec::new();
        let mut lanes = Vec::new();
        let arms = [("n", [0.0, 300.0]), ("e", [300.0, 0.0]), ("s", [0.0, -300.0]), ("w", [-300.0, 0.0])];
        for (a, p) in arms {
            roads.push(format!(
                r#"{{"id":"in_{a}","from":null,"to":"x","start":[{},{}],"end":[0,0],"length":300}}"#,
                p[0], p[1]
            ));
            roads.push(format!(
                r#"{{"id":"out_{a}","from":"x","to":null,"start":[0,0],"end":[{},{}],"length":300}}"#,
                p[0], p[1]
            ));
            for (i, k) in ["left", "straight", "right"].iter().enumerate() {
                lanes.push(format!(
                    r#"{{"id":"in_{a}_{i}","road":"in_{a}","index":{i},"length":300,"movements":["{k}"]}}"#
                ));
            }
            lanes.push(format!(r#"{{"id":"out_{a}_0","road":"out_{a}","index":0,"length":300,"movements":["straight"]}}"#));
        }
        // Approach from arm a: straight -> opposite, left -> clockwise next, right -> counter-clockwise next.
        let order = ["n", "e", "s", "w"];
        let mut movements = Vec::new();
        for (i, a) in order.iter().enumerate() {
            let left = order[(i + 1) % 4];
            let straight = order[(i + 2) % 4];
            let right = order[(i + 3) % 4];
            movements.push(format!(r#"{{"from_road":"in_{a}","from_lanes":["in_{a}_0"],"to_road":"out_{left}","kind":"left"}}"#));
            movements.push(format!(r#"{{"from_road":"in_{a}","from_lanes":["in_{a}_1"],"to_road":"out_{straight}","kind":"straight"}}"#));
            movements.push(format!(r#"{{"from_road":"in_{a}","from_lanes":["in_{a}_2"],"to_road":"out_{right}","kind":"right"}}"#));
        }
        // movement index = 3 * approach + kind (left 0, straight 1, right 2); approaches n, e, s, w.
        let phases = [
            r#"{"intersection":"x","index":0,"movements":[1,7]}"#,
            r#"{"intersection":"x","index":1,"movements":[4,10]}"#,
            r#"{"intersection":"x","index":2,"movements":[0,6]}"#,
            r#"{"intersection":"x","index":3,"movements":[3,9]}"#,
        ];
        format!(
            r#"{{"version":1,"intersections":[{{"id":"x","point":[0,0],"topology":"A","movements":[{}]}}],"roads":[{}],"lanes":[{}],"phases":[{}]}}"#,
            movements.join(","),
            roads.join(","),
            lanes.join(","),
            phases.join(",")
        )
    }

    #[test]
    fn minimal_document_parses() {
        let net = parse_roadnet(&single_a()).unwrap();
        assert_eq!(net.intersections.len(), 1);
        assert_eq!(net.intersections[0].phases.len(), 4);
        assert_eq!(net.intersections[0].incoming_lanes.len(), 12);
        assert_eq!(net.intersections[0].phases[0].participating_lanes.len(), 2);
    }

    #[test]
    fn crossing_movements_in_one_phase_are_rejected() {
        // N-straight (1) with E-straight (4).
        let text = single_a().replace(r#""index":0,"movements":[1,7]"#, r#""index":0,"movements":[1,4,7]"#);
        assert!(matches!(parse_roadnet(&text), Err(RoadnetError::Topology(_))));
    }

    #[test]
    fn empty_network_is_a_schema_error() {
        let text = r#"{"version":1,"intersections":[],"roads":[],"lanes":[],"phases":[]}"#;
        assert!(matches!(parse_roadnet(text), Err(RoadnetError::Schema(_))));
    }

    #[test]
    fn malformed_field_is_a_schema_error() {
        let text = single_a().replace(r#""topology":"A""#, r#""topology":"Q""#);
        assert!(matches!(parse_roadnet(&text), Err(RoadnetError::Schema(_))));
        let text = single_a().replace(r#""version":1"#, r#""version":"one""#);
        assert!(matches!(parse_roadnet(&text), Err(RoadnetError::Schema(_))));
    }

    #[test]
    fn dangling_lane_is_a_topology_error() {
        let text = single_a().replace(r#""from_lanes":["in_n_0"]"#, r#""from_lanes":["nowhere"]"#);
        assert!(matches!(parse_roadnet(&text), Err(RoadnetError::Topology(_))));
    }

    #[test]
    fn single_phase_is_rejected() {
        let doc: RoadnetDoc = serde_json::from_str(&single_a()).unwrap();
        let mut doc = doc;
        doc.phases.truncate(1);
        assert!(Network::from_doc(&doc).is_err());
    }

    #[test]
    fn unserved_movement_is_rejected() {
        let mut doc: RoadnetDoc = serde_json::from_str(&single_a()).unwrap();
        doc.phases[3].movements = vec![3];
        assert!(matches!(Network::from_doc(&doc), Err(RoadnetError::Topology(_))));
    }

    #[test]
    fn disconnected_network_is_rejected() {
        let a = build_grid(1, 1, Topology::A, 300.0, 300.0).unwrap().to_doc();
        let mut b = a.clone();
        let rename = |s: &str| format!("copy_{s}");
        for x in &mut b.intersections {
            x.id = rename(&x.id);
            x.point[0] += 5000.0;
            for m in &mut x.movements {
                m.from_road = rename(&m.from_road);
                m.to_road = rename(&m.to_road);
                m.from_lanes = m.from_lanes.iter().map(|l| rename(l)).collect();
            }
        }
        for r in &mut b.roads {
            r.id = rename(&r.id);
            r.from = r.from.as_deref().map(rename);
            r.to = r.to.as_deref().map(rename);
            r.start[0] += 5000.0;
            r.end[0] += 5000.0;
        }
        for l in &mut b.lanes {
            l.id = rename(&l.id);
            l.road = rename(&l.road);
        }
        for p in &mut b.phases {
            p.intersection = rename(&p.intersection);
        }
        let mut doc = a;
        doc.intersections.extend(b.intersections);
        doc.roads.extend(b.roads);
        doc.lanes.extend(b.lanes);
        doc.phases.extend(b.phases);
        let err = Network::from_doc(&doc).unwrap_err();
        assert!(matches!(err, RoadnetError::Topology(ref m) if m.contains("disconnected")), "{err}");
    }

    #[test]
    fn grid_output_round_trips_byte_for_byte() {
        let net = build_grid(2, 3, Topology::B, 400.0, 300.0).unwrap();
        let text = serialize_roadnet(&net);
        let back = parse_roadnet(&text).unwrap();
        assert_eq!(back, net);
        assert_eq!(serialize_roadnet(&back), text);
    }
}
