//! Movement conflict test derived from intersection geometry.
//!
//! Each arm of an intersection is a point on a unit circle at the arm's
//! bearing. Inbound traffic uses a point slightly counter-clockwise of the
//! bearing and outbound traffic a point slightly clockwise (right-hand
//! traffic). A movement is the chord from its inbound point to its outbound
//! point; two movements conflict when their chords cross or when they merge
//! into the same outbound point.

use std::f64::consts::TAU;

const SIDE_OFFSET: f64 = 0.05;

/// Chord endpoints of one movement, as angles in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MovementChord {
    pub entry: f64,
    pub exit: f64,
}

impl MovementChord {
    /// `in_bearing` is the bearing from the intersection towards the origin of
    /// the approach road, `out_bearing` towards the end of the exit road.
    pub fn from_bearings(in_bearing: f64, out_bearing: f64) -> Self {
        MovementChord { entry: normalize(in_bearing + SIDE_OFFSET), exit: normalize(out_bearing - SIDE_OFFSET) }
    }
}

/// Bearing (radians, counter-clockwise from east) of `to` as seen from `from`.
pub fn bearing(from: [f64; 2], to: [f64; 2]) -> f64 {
    normalize((to[1] - from[1]).atan2(to[0] - from[0]))
}

fn normalize(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

fn same_point(a: f64, b: f64) -> bool {
    let d = (a - b).abs();
    d < 1e-9 || (TAU - d) < 1e-9
}

/// Strictly inside the counter-clockwise arc from `start` to `end`.
fn inside_arc(start: f64, end: f64, x: f64) -> bool {
    let span = (end - start).rem_euclid(TAU);
    let off = (x - start).rem_euclid(TAU);
    off > 1e-9 && off < span - 1e-9
}

pub fn chords_conflict(a: MovementChord, b: MovementChord) -> bool {
    if same_point(a.exit, b.exit) {
        return true;
    }
    if same_point(a.entry, b.entry) {
        return false;
    }
    let shared = [b.entry, b.exit].iter().any(|&p| same_point(p, a.entry) || same_point(p, a.exit));
    if shared {
        // One chord ends where the other begins: the paths touch only at the rim.
        return false;
    }
    inside_arc(a.entry, a.exit, b.entry) != inside_arc(a.entry, a.exit, b.exit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roadnet::preset::Arm;
    use crate::roadnet::TurnKind;

    fn arm_bearing(arm: Arm) -> f64 {
        let o = arm.offset();
        bearing([0.0, 0.0], o)
    }

    fn chord(approach: Arm, kind: TurnKind) -> MovementChord {
        MovementChord::from_bearings(arm_bearing(approach), arm_bearing(approach.exit_for(kind)))
    }

    #[test]
    fn opposing_through_movements_are_compatible() {
        use TurnKind::*;
        assert!(!chords_conflict(chord(Arm::North, Straight), chord(Arm::South, Straight)));
        assert!(!chords_conflict(chord(Arm::North, Left), chord(Arm::South, Left)));
    }

    #[test]
    fn crossing_movements_conflict() {
        use TurnKind::*;
        assert!(chords_conflict(chord(Arm::North, Straight), chord(Arm::East, Straight)));
        assert!(chords_conflict(chord(Arm::North, Left), chord(Arm::South, Straight)));
        assert!(chords_conflict(chord(Arm::East, Left), chord(Arm::West, Straight)));
    }

    #[test]
    fn merging_movements_conflict() {
        use TurnKind::*;
        // Both end up eastbound.
        assert!(chords_conflict(chord(Arm::North, Left), chord(Arm::West, Straight)));
    }

    #[test]
    fn same_approach_movements_are_compatible() {
        use TurnKind::*;
        assert!(!chords_conflict(chord(Arm::East, Left), chord(Arm::East, Straight)));
    }

    #[test]
    fn conflict_is_symmetric() {
        use TurnKind::*;
        let kinds = [Left, Straight, Right];
        for a in Arm::ALL {
            for b in Arm::ALL {
                for ka in kinds {
                    for kb in kinds {
                        let (x, y) = (chord(a, ka), chord(b, kb));
                        assert_eq!(chords_conflict(x, y), chords_conflict(y, x), "{a:?}{ka:?} {b:?}{kb:?}");
                    }
                }
            }
        }
    }
}
