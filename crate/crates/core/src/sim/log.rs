use std::fmt::Write as _;
use std::io::{self, Write};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VehicleRecord {
    pub id: String,
    pub enter_time: u32,
    pub exit_time: Option<u32>,
}

impl VehicleRecord {
    pub fn travel_time(&self) -> Option<u32> {
        self.exit_time.map(|e| e - self.enter_time)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecisionRecord {
    pub time: u32,
    pub intersection: usize,
    pub phase: usize,
    /// Green seconds, excluding any yellow.
    pub duration: u32,
    /// A yellow interval precedes the green.
    pub yellow: bool,
}

/// Everything one episode produced.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EpisodeLog {
    pub horizon: u32,
    /// Clock value when the episode stopped.
    pub end_time: u32,
    pub intersections: Vec<String>,
    /// Injected vehicles in injection order.
    pub vehicles: Vec<VehicleRecord>,
    pub decisions: Vec<DecisionRecord>,
    /// `queue_totals[k][i]`: stopped vehicles on the incoming lanes of
    /// intersection `i` after step `k` (clock `k + 1`).
    pub queue_totals: Vec<Vec<u32>>,
}

impl EpisodeLog {
    pub fn finished(&self) -> usize {
        self.vehicles.iter().filter(|v| v.exit_time.is_some()).count()
    }

    pub fn unfinished(&self) -> usize {
        self.vehicles.len() - self.finished()
    }

    /// Line-delimited text form:
    ///
    /// ```text
    /// # episode-log v1
    /// meta,<horizon>,<end_time>
    /// intersections,<id>,<id>,...
    /// vehicle,<id>,<enter_time>,<exit_time or empty>
    /// decision,<time>,<intersection id>,<phase>,<green seconds>,<yellow 0|1>
    /// queue,<time>,<stopped vehicles per intersection, in header order>...
    /// ```
    ///
    /// Vehicles appear in injection order, decisions in time order (ties by
    /// intersection), queue rows once per step.
    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# episode-log v1")?;
        writeln!(w, "meta,{},{}", self.horizon, self.end_time)?;
        writeln!(w, "intersections,{}", self.intersections.join(","))?;
        for v in &self.vehicles {
            match v.exit_time {
                Some(e) => writeln!(w, "vehicle,{},{},{}", v.id, v.enter_time, e)?,
                None => writeln!(w, "vehicle,{},{},", v.id, v.enter_time)?,
            }
        }
        for d in &self.decisions {
            writeln!(
                w,
                "decision,{},{},{},{},{}",
                d.time,
                self.intersections[d.intersection],
                d.phase,
                d.duration,
                u8::from(d.yellow)
            )?;
        }
        let mut line = String::new();
        for (k, row) in self.queue_totals.iter().enumerate() {
            line.clear();
            write!(line, "queue,{}", k + 1).expect("string write");
            for q in row {
                write!(line, ",{q}").expect("string write");
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("utf-8 log")
    }
}
