//! Vehicle demand: flow files and synthetic flow generation.
//!
//! Flow file format (JSON array, sorted by `start_time` then `id`):
//!
//! ```text
//! [{ "id": "veh_0000001", "start_time": 12, "route": ["in_0_0_w", "r_0_0_e", ...] }, ...]
//! ```

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::roadnet::{Network, TurnKind};

#[derive(Debug, Error, PartialEq)]
pub enum FlowError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("route error: {0}")]
    Route(String),
    #[error("invalid turn ratios: {0}")]
    Ratios(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleSpec {
    pub id: String,
    /// Seconds.
    pub start_time: u32,
    /// Road ids, entry road first.
    pub route: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurnRatios {
    pub left: f64,
    pub straight: f64,
    pub right: f64,
}

impl TurnRatios {
    pub fn new(left: f64, straight: f64, right: f64) -> Result<Self, FlowError> {
        let r = TurnRatios { left, straight, right };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<(), FlowError> {
        let v = [self.left, self.straight, self.right];
        if v.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(FlowError::Ratios(format!("{v:?} has a negative entry")));
        }
        if (v.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(FlowError::Ratios(format!("{v:?} does not sum to 1")));
        }
        Ok(())
    }

    pub fn weight(&self, kind: TurnKind) -> f64 {
        match kind {
            TurnKind::Left => self.left,
            TurnKind::Straight => self.straight,
            TurnKind::Right => self.right,
        }
    }
}

impl Default for TurnRatios {
    fn default() -> Self {
        TurnRatios { left: 0.1, straight: 0.6, right: 0.3 }
    }
}

/// Vehicles sorted by start time, ids unique.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FlowSet {
    vehicles: Vec<VehicleSpec>,
}

impl FlowSet {
    /// Sorts by `(start_time, id)` and checks ids and routes against `net`.
    pub fn new(mut vehicles: Vec<VehicleSpec>, net: &Network) -> Result<FlowSet, FlowError> {
        let mut ids = HashSet::with_capacity(vehicles.len());
        for v in &vehicles {
            if !ids.insert(v.id.as_str()) {
                return Err(FlowError::Schema(format!("duplicate vehicle id `{}`", v.id)));
            }
            validate_route(net, v)?;
        }
        vehicles.sort_by(|a, b| a.start_time.cmp(&b.start_time).then_with(|| a.id.cmp(&b.id)));
        Ok(FlowSet { vehicles })
    }

    pub fn vehicles(&self) -> &[VehicleSpec] {
        &self.vehicles
    }

    pub fn len(&self) -> usize {
        self.vehicles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vehicles.is_empty()
    }
}

/// Route road indices resolved against the network.
pub fn resolve_route(net: &Network, v: &VehicleSpec) -> Result<Vec<usize>, FlowError> {
    v.route
        .iter()
        .map(|id| net.road_by_id(id).ok_or_else(|| FlowError::Route(format!("{}: unknown road `{id}`", v.id))))
        .collect()
}

fn validate_route(net: &Network, v: &VehicleSpec) -> Result<(), FlowError> {
    if v.route.is_empty() {
        return Err(FlowError::Route(format!("{}: empty route", v.id)));
    }
    let roads = resolve_route(net, v)?;
    if !net.roads[roads[0]].is_entry() {
        return Err(FlowError::Route(format!("{}: route does not start on a boundary entry road", v.id)));
    }
    if !net.roads[*roads.last().expect("non-empty")].is_exit() {
        return Err(FlowError::Route(format!("{}: route does not end on a boundary exit road", v.id)));
    }
    for w in roads.windows(2) {
        let joined = net.roads[w[0]]
            .to
            .filter(|&node| net.roads[w[1]].from == Some(node))
            .and_then(|node| net.intersections[node].movement_between(w[0], w[1]));
        if joined.is_none() {
            return Err(FlowError::Route(format!(
                "{}: roads `{}` and `{}` are not connected by a movement",
                v.id, net.roads[w[0]].id, net.roads[w[1]].id
            )));
        }
    }
    Ok(())
}

pub fn parse_flow(text: &str, net: &Network) -> Result<FlowSet, FlowError> {
    let vehicles: Vec<VehicleSpec> = serde_json::from_str(text).map_err(|e| FlowError::Schema(e.to_string()))?;
    FlowSet::new(vehicles, net)
}

/// One record per line inside a JSON array, in flow order.
pub fn serialize_flow(flow: &FlowSet) -> String {
    let mut out = String::from("[\n");
    for (i, v) in flow.vehicles.iter().enumerate() {
        out.push_str("  ");
        out.push_str(&serde_json::to_string(v).expect("vehicle serializes"));
        if i + 1 < flow.vehicles.len() {
            out.push(',');
        }
        out.push('\n');
    }
    out.push_str("]\n");
    out
}

/// Arrival instants (seconds, continuous) of a homogeneous Poisson process on
/// `[0, horizon)`.
pub fn poisson_arrivals<R: Rng + ?Sized>(rate: f64, horizon: f64, rng: &mut R) -> Vec<f64> {
    if rate <= 0.0 || horizon <= 0.0 {
        return Vec::new();
    }
    let gap = Exp::new(rate).expect("positive rate");
    let mut t = 0.0;
    let mut out = Vec::new();
    loop {
        t += gap.sample(rng);
        if t >= horizon {
            return out;
        }
        out.push(t);
    }
}

const MAX_ROUTE_ATTEMPTS: usize = 1000;

/// Turn kind sampled at each intersection of a generated route, in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RouteSample {
    pub roads: Vec<usize>,
    pub turns: Vec<TurnKind>,
}

/// Samples one route from `entry`, choosing each turn with `ratios` restricted
/// to the turns that exist and do not revisit an intersection. Dead ends
/// restart the walk.
pub fn sample_route<R: Rng + ?Sized>(net: &Network, entry: usize, ratios: &TurnRatios, rng: &mut R) -> RouteSample {
    'attempt: for _ in 0..MAX_ROUTE_ATTEMPTS {
        let mut roads = vec![entry];
        let mut turns = Vec::new();
        let mut visited = HashSet::new();
        let mut current = entry;
        while let Some(node) = net.roads[current].to {
            visited.insert(node);
            let x = &net.intersections[node];
            let options: Vec<(TurnKind, usize)> = x
                .movements
                .iter()
                .filter(|m| m.from_road == current)
                .filter(|m| net.roads[m.to_road].to.is_none_or(|next| !visited.contains(&next)))
                .map(|m| (m.kind, m.to_road))
                .collect();
            let total: f64 = options.iter().map(|(k, _)| ratios.weight(*k)).sum();
            if options.is_empty() || total <= 0.0 {
                continue 'attempt;
            }
            let mut pick = rng.random::<f64>() * total;
            let mut chosen = options[options.len() - 1];
            for &opt in &options {
                let w = ratios.weight(opt.0);
                if pick < w {
                    chosen = opt;
                    break;
                }
                pick -= w;
            }
            turns.push(chosen.0);
            roads.push(chosen.1);
            current = chosen.1;
        }
        return RouteSample { roads, turns };
    }
    panic!("no route from road `{}` after {MAX_ROUTE_ATTEMPTS} attempts", net.roads[entry].id);
}

/// Poisson arrivals on every boundary entry road with hop-by-hop turn
/// sampling. Start times are arrival instants floored to whole seconds.
pub fn generate_flow(net: &Network, arrival_rate: f64, ratios: &TurnRatios, horizon: u32, seed: u64) -> FlowSet {
    generate_flow_with_turns(net, arrival_rate, ratios, horizon, seed).0
}

/// [`generate_flow`] plus the turn kinds drawn for every route.
pub fn generate_flow_with_turns(
    net: &Network,
    arrival_rate: f64,
    ratios: &TurnRatios,
    horizon: u32,
    seed: u64,
) -> (FlowSet, Vec<Vec<TurnKind>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // (start, entry road, sequence, route)
    let mut raw: Vec<(u32, usize, usize, RouteSample)> = Vec::new();
    for entry in net.entry_roads().collect::<Vec<_>>() {
        for (seq, t) in poisson_arrivals(arrival_rate, horizon as f64, &mut rng).into_iter().enumerate() {
            let route = sample_route(net, entry, ratios, &mut rng);
            raw.push((t.floor() as u32, entry, seq, route));
        }
    }
    raw.sort_by_key(|(t, e, s, _)| (*t, *e, *s));
    let width = raw.len().to_string().len().max(7);
    let mut turns = Vec::with_capacity(raw.len());
    let vehicles = raw
        .into_iter()
        .enumerate()
        .map(|(i, (t, _, _, route))| {
            turns.push(route.turns);
            VehicleSpec {
                id: format!("veh_{i:0width$}"),
                start_time: t,
                route: route.roads.iter().map(|&r| net.roads[r].id.clone()).collect(),
            }
        })
        .collect();
    (FlowSet { vehicles }, turns)
}
