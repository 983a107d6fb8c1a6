use proptest::prelude::*;
use tsc_core::roadnet::*;

/// Compass side of `point` relative to `centre`: 0 north, 1 east, 2 south,
/// 3 west.
fn side(centre: [f64; 2], point: [f64; 2]) -> usize {
    let (dx, dy) = (point[0] - centre[0], point[1] - centre[1]);
    if dy.abs() >= dx.abs() {
        if dy > 0.0 {
            0
        } else {
            2
        }
    } else if dx > 0.0 {
        1
    } else {
        3
    }
}

/// Textbook conflict table for right-hand traffic with right turns left
/// out: two signalized movements may share a green only when they come
/// from the same approach, or from opposite approaches with the same turn.
fn table_conflict(net: &Network, node: usize, a: usize, b: usize) -> bool {
    let x = &net.intersections[node];
    let (ma, mb) = (&x.movements[a], &x.movements[b]);
    if ma.kind == TurnKind::Right || mb.kind == TurnKind::Right {
        return false;
    }
    let sa = side(x.position, net.roads[ma.from_road].start);
    let sb = side(x.position, net.roads[mb.from_road].start);
    let compatible = sa == sb || ((sa + 2) % 4 == sb && ma.kind == mb.kind);
    !compatible
}

fn all_grids() -> Vec<Network> {
    let mut v = Vec::new();
    for t in Topology::ALL {
        for (r, c) in [(1, 1), (2, 3), (3, 4)] {
            v.push(build_grid(r, c, t, 400.0, 800.0).unwrap());
        }
    }
    v
}

#[test]
fn geometric_conflicts_match_the_table() {
    for net in all_grids() {
        for (node, x) in net.intersections.iter().enumerate() {
            for a in 0..x.movements.len() {
                for b in 0..x.movements.len() {
                    if a != b {
                        assert_eq!(
                            net.movements_conflict(node, a, b),
                            table_conflict(&net, node, a, b),
                            "{} movements {a} {b}",
                            x.id
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn phases_are_conflict_free_and_cover_every_movement() {
    for net in all_grids() {
        for (node, x) in net.intersections.iter().enumerate() {
            assert!(x.phases.len() >= 2);
            for (i, p) in x.phases.iter().enumerate() {
                assert_eq!(p.index, i);
                assert!(!p.participating_lanes.is_empty());
                for &a in &p.movements {
                    for &b in &p.movements {
                        assert!(a == b || !table_conflict(&net, node, a, b));
                    }
                }
                let mut lanes: Vec<usize> =
                    p.movements.iter().flat_map(|&m| x.movements[m].from_lanes.clone()).collect();
                lanes.sort_unstable();
                lanes.dedup();
                assert_eq!(lanes, p.participating_lanes);
            }
            for (m, mv) in x.movements.iter().enumerate() {
                if mv.kind != TurnKind::Right {
                    assert!(x.phases.iter().any(|p| p.movements.contains(&m)), "{} movement {m} unserved", x.id);
                }
            }
        }
    }
}

#[test]
fn preset_shapes() {
    let phase_counts: Vec<usize> = Topology::ALL.iter().map(|&t| preset_phase_table(t).phases.len()).collect();
    assert_eq!(phase_counts, [4, 4, 3, 4]);
    let single = |t| build_grid(1, 1, t, 400.0, 400.0).unwrap();
    let a = single(Topology::A);
    assert_eq!(a.intersections[0].incoming_lanes.len(), 12);
    let c = single(Topology::C);
    assert_eq!(c.intersections.len(), 1);
    assert_eq!(c.intersections[0].phase_count(), 3);
    let d = single(Topology::D);
    assert_eq!(d.intersections[0].incoming_lanes.len(), 4);
    assert!(d.lanes.iter().filter(|l| d.roads[l.road].to.is_some()).all(|l| l.movement_kinds.len() == 3));
    assert_eq!("e".parse::<Topology>(), Err(RoadnetError::UnknownPreset("e".into())));
}

#[test]
fn grid_sizes() {
    assert_eq!(build_grid(3, 4, Topology::A, 400.0, 800.0).unwrap().intersections.len(), 12);
    assert_eq!(build_grid(4, 4, Topology::A, 800.0, 600.0).unwrap().intersections.len(), 16);
}

#[test]
fn crossing_phase_document_is_rejected() {
    let net = build_grid(1, 1, Topology::A, 300.0, 300.0).unwrap();
    let mut doc = net.to_doc();
    let x = &net.intersections[0];
    let straight_from = |arm: usize| {
        x.movements
            .iter()
            .position(|m| m.kind == TurnKind::Straight && side(x.position, net.roads[m.from_road].start) == arm)
            .unwrap()
    };
    doc.phases[0].movements = vec![straight_from(0), straight_from(1)];
    assert!(matches!(Network::from_doc(&doc), Err(RoadnetError::Topology(_))));
    let mut empty = net.to_doc();
    empty.intersections.clear();
    empty.roads.clear();
    empty.lanes.clear();
    empty.phases.clear();
    assert!(matches!(Network::from_doc(&empty), Err(RoadnetError::Schema(_))));
}

fn lattice_roads(r: usize, c: usize) -> usize {
    2 * (r * (c + 1) + c * (r + 1))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn grid_round_trips_and_counts(
        r in 1usize..5,
        c in 1usize..5,
        t in 0usize..4,
        ew in 50.0f64..900.0,
        ns in 50.0f64..900.0,
        signalized in any::<bool>(),
    ) {
        let net = build_grid_with(r, c, Topology::ALL[t], ew, ns, signalized).unwrap();
        prop_assert_eq!(net.intersections.len(), r * c);
        if Topology::ALL[t] != Topology::C {
            prop_assert_eq!(net.roads.len(), lattice_roads(r, c));
        }
        let text = serialize_roadnet(&net);
        let back = parse_roadnet(&text).unwrap();
        prop_assert_eq!(&back, &net);
        prop_assert_eq!(serialize_roadnet(&back), text);
        for x in &net.intersections {
            for p in &x.phases {
                for &l in &p.participating_lanes {
                    prop_assert!(l < net.lanes.len());
                }
            }
        }
        for (i, lane) in net.lanes.iter().enumerate() {
            prop_assert!(lane.length > 0.0);
            prop_assert!(!lane.movement_kinds.is_empty());
            prop_assert_eq!(net.roads[lane.road].lanes.iter().filter(|&&l| l == i).count(), 1);
        }
    }
}
