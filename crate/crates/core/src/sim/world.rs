use std::collections::VecDeque;

use crate::flow::{resolve_route, FlowSet};
use crate::roadnet::Network;

use super::{SimConfig, SimError};

/// Width of one observation band, meters from the stop line.
pub const SEGMENT_LENGTH: f64 = 100.0;
pub const SEGMENTS: usize = 4;

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VehicleMode {
    Moving,
    Queued,
    /// Crossed an intersection during the current step and sits at the
    /// upstream end of its new lane.
    Crossing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleState {
    /// Index into the flow's vehicle list.
    pub spec: usize,
    /// Position in the route (index of the current road).
    pub leg: usize,
    pub lane: usize,
    pub distance_to_stopline: f64,
    pub mode: VehicleMode,
    pub enter_time: u32,
    pub exit_time: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignalDisplay {
    pub green_phase: usize,
    pub yellow_remaining: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LaneObservation {
    pub lane: usize,
    /// Stopped vehicles.
    pub queue: u32,
    /// Vehicles per 100 m band from the stop line.
    pub segments: [u32; SEGMENTS],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VehicleCounts {
    pub injected: usize,
    pub in_network: usize,
    pub exited: usize,
    pub not_yet_injected: usize,
}

#[derive(Debug, Clone, Default)]
struct LaneState {
    /// Vehicle indices, front (nearest the stop line) first.
    queue: VecDeque<usize>,
    last_discharge: Option<u32>,
}

/// One simulated world: a network, a demand and the vehicles currently in it.
#[derive(Debug, Clone)]
pub struct World<'a> {
    net: &'a Network,
    flow: &'a FlowSet,
    cfg: SimConfig,
    routes: Vec<Vec<usize>>,
    clock: u32,
    injection_cutoff: u32,
    next_spawn: usize,
    vehicles: Vec<VehicleState>,
    lanes: Vec<LaneState>,
    signals: Vec<SignalDisplay>,
    /// served[node][phase][movement]
    served: Vec<Vec<Vec<bool>>>,
    /// Vehicles waiting to enter an entry road (only with lane capacity on).
    entry_wait: Vec<VecDeque<usize>>,
    exited: usize,
}

impl<'a> World<'a> {
    /// Clock starts at 0; vehicles with `start_time == 0` are already inside.
    /// Vehicles starting at or after `injection_cutoff` never enter.
    pub fn new(net: &'a Network, flow: &'a FlowSet, cfg: SimConfig, injection_cutoff: u32) -> Result<Self, SimError> {
        cfg.validate()?;
        let routes = flow
            .vehicles()
            .iter()
            .map(|v| resolve_route(net, v))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| SimError::Flow(e.to_string()))?;
        let served = net
            .intersections
            .iter()
            .map(|x| {
                x.phases
                    .iter()
                    .map(|p| (0..x.movements.len()).map(|m| p.movements.contains(&m)).collect())
                    .collect()
            })
            .collect();
        let mut world = World {
            net,
            flow,
            cfg,
            routes,
            clock: 0,
            injection_cutoff,
            next_spawn: 0,
            vehicles: Vec::new(),
            lanes: vec![LaneState::default(); net.lanes.len()],
            signals: vec![SignalDisplay { green_phase: 0, yellow_remaining: 0 }; net.intersections.len()],
            served,
            entry_wait: vec![VecDeque::new(); net.roads.len()],
            exited: 0,
        };
        world.inject();
        Ok(world)
    }

    pub fn network(&self) -> &'a Network {
        self.net
    }

    pub fn flow(&self) -> &'a FlowSet {
        self.flow
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn clock(&self) -> u32 {
        self.clock
    }

    pub fn vehicles(&self) -> &[VehicleState] {
        &self.vehicles
    }

    pub fn signal(&self, node: usize) -> SignalDisplay {
        self.signals[node]
    }

    pub fn counts(&self) -> VehicleCounts {
        let waiting = self.flow.vehicles()[self.next_spawn..]
            .iter()
            .take_while(|v| v.start_time < self.injection_cutoff)
            .count();
        VehicleCounts {
            injected: self.vehicles.len(),
            in_network: self.vehicles.len() - self.exited,
            exited: self.exited,
            not_yet_injected: waiting,
        }
    }

    /// No vehicle inside and none left to inject.
    pub fn is_drained(&self) -> bool {
        let c = self.counts();
        c.in_network == 0 && c.not_yet_injected == 0
    }

    /// Shows `phase` after a yellow interval if it differs from the current
    /// green; re-selecting the current green keeps it without yellow. Returns
    /// whether a yellow interval was inserted.
    pub fn set_phase(&mut self, node: usize, phase: usize) -> Result<bool, SimError> {
        let x = self.net.intersections.get(node).ok_or(SimError::InvalidIntersection(node))?;
        if phase >= x.phases.len() {
            return Err(SimError::InvalidPhase { intersection: x.id.clone(), phase, phases: x.phases.len() });
        }
        let s = &mut self.signals[node];
        if s.green_phase == phase {
            return Ok(false);
        }
        s.green_phase = phase;
        s.yellow_remaining = self.cfg.yellow;
        Ok(self.cfg.yellow > 0)
    }

    pub fn lane_queue(&self, lane: usize) -> u32 {
        self.lanes[lane]
            .queue
            .iter()
            .filter(|&&v| self.vehicles[v].mode == VehicleMode::Queued)
            .count() as u32
    }

    pub fn lane_vehicle_count(&self, lane: usize) -> usize {
        self.lanes[lane].queue.len()
    }

    /// Queue length and band counts for every incoming lane of `node`, in
    /// the intersection's `incoming_lanes` order.
    pub fn observe(&self, node: usize) -> Vec<LaneObservation> {
        self.net.intersections[node].incoming_lanes.iter().map(|&l| self.observe_lane(l)).collect()
    }

    pub fn observe_lane(&self, lane: usize) -> LaneObservation {
        let length = self.net.lanes[lane].length;
        // Bands that start beyond the lane's end stay empty.
        let last_band = (((length / SEGMENT_LENGTH).ceil() as usize).max(1) - 1).min(SEGMENTS);
        let mut segments = [0u32; SEGMENTS];
        let mut queue = 0;
        for &v in &self.lanes[lane].queue {
            let st = &self.vehicles[v];
            if st.mode == VehicleMode::Queued {
                queue += 1;
            }
            let band = ((st.distance_to_stopline / SEGMENT_LENGTH).floor() as usize).min(last_band);
            if band < SEGMENTS {
                segments[band] += 1;
            }
        }
        LaneObservation { lane, queue, segments }
    }

    /// Total stopped vehicles on the incoming lanes of `node`.
    pub fn intersection_queue(&self, node: usize) -> u32 {
        self.net.intersections[node].incoming_lanes.iter().map(|&l| self.lane_queue(l)).sum()
    }

    fn movement_served(&self, node: usize, movement: usize) -> bool {
        let m = &self.net.intersections[node].movements[movement];
        if m.always_permitted {
            return true;
        }
        let s = self.signals[node];
        s.yellow_remaining == 0 && self.served[node][s.green_phase][movement]
    }

    fn lane_capacity(&self, lane: usize) -> usize {
        ((self.net.lanes[lane].length / self.cfg.spacing).floor() as usize).max(1)
    }

    fn lane_has_room(&self, lane: usize) -> bool {
        !self.cfg.lane_capacity || self.lanes[lane].queue.len() < self.lane_capacity(lane)
    }

    /// Lane of `road` a vehicle about to follow `route[leg..]` should use:
    /// a lane feeding its next movement, fewest occupants first, then the
    /// lowest position index.
    fn choose_lane(&self, route: &[usize], leg: usize) -> usize {
        let road = &self.net.roads[route[leg]];
        let candidates: &[usize] = match (road.to, route.get(leg + 1)) {
            (Some(node), Some(&next)) => {
                let x = &self.net.intersections[node];
                let m = x.movement_between(route[leg], next).expect("validated route");
                &x.movements[m].from_lanes
            }
            _ => &road.lanes,
        };
        *candidates
            .iter()
            .min_by_key(|&&l| (self.lanes[l].queue.len(), self.net.lanes[l].position_index))
            .expect("movement has lanes")
    }

    fn place(&mut self, v: usize, lane: usize) {
        self.vehicles[v].lane = lane;
        self.vehicles[v].distance_to_stopline = self.net.lanes[lane].length;
        self.lanes[lane].queue.push_back(v);
    }

    fn inject(&mut self) {
        for road in 0..self.entry_wait.len() {
            while let Some(&v) = self.entry_wait[road].front() {
                let lane = self.choose_lane(&self.routes[self.vehicles[v].spec], 0);
                if !self.lane_has_room(lane) {
                    break;
                }
                self.entry_wait[road].pop_front();
                self.place(v, lane);
            }
        }
        let specs = self.flow.vehicles();
        while self.next_spawn < specs.len() {
            let spec = &specs[self.next_spawn];
            if spec.start_time > self.clock || spec.start_time >= self.injection_cutoff {
                break;
            }
            let idx = self.vehicles.len();
            let route = &self.routes[self.next_spawn];
            let lane = self.choose_lane(route, 0);
            self.vehicles.push(VehicleState {
                spec: self.next_spawn,
                leg: 0,
                lane,
                distance_to_stopline: self.net.lanes[lane].length,
                mode: VehicleMode::Moving,
                enter_time: spec.start_time,
                exit_time: None,
            });
            let entry = route[0];
            if self.entry_wait[entry].is_empty() && self.lane_has_room(lane) {
                self.lanes[lane].queue.push_back(idx);
            } else {
                self.entry_wait[entry].push_back(idx);
            }
            self.next_spawn += 1;
        }
    }

    /// Advances the world by one second.
    pub fn step(&mut self) {
        let now = self.clock + 1;
        let vmax = self.cfg.max_speed;
        let spacing = self.cfg.spacing;

        for lane in 0..self.lanes.len() {
            let length = self.net.lanes[lane].length;
            let mut limit = 0.0;
            let mut leader_queued = true;
            for &v in &self.lanes[lane].queue {
                let st = &mut self.vehicles[v];
                let free = st.distance_to_stopline - vmax;
                let pos = free.max(limit);
                let blocked = free <= limit + EPS;
                st.distance_to_stopline = pos.min(length);
                let queued = blocked && leader_queued;
                st.mode = if queued { VehicleMode::Queued } else { VehicleMode::Moving };
                leader_queued = queued;
                limit = pos + spacing;
            }
        }

        for lane in 0..self.lanes.len() {
            let Some(&v) = self.lanes[lane].queue.front() else { continue };
            if self.vehicles[v].distance_to_stopline > EPS {
                continue;
            }
            let road_idx = self.net.lanes[lane].road;
            let road = &self.net.roads[road_idx];
            let Some(node) = road.to else {
                self.lanes[lane].queue.pop_front();
                self.vehicles[v].exit_time = Some(now);
                self.exited += 1;
                continue;
            };
            if let Some(last) = self.lanes[lane].last_discharge {
                if ((now - last) as f64) < self.cfg.headway - EPS {
                    continue;
                }
            }
            let spec = self.vehicles[v].spec;
            let leg = self.vehicles[v].leg;
            let next = self.routes[spec][leg + 1];
            let movement =
                self.net.intersections[node].movement_between(road_idx, next).expect("validated route");
            if !self.movement_served(node, movement) {
                continue;
            }
            let target = self.choose_lane(&self.routes[spec], leg + 1);
            if !self.lane_has_room(target) {
                continue;
            }
            self.lanes[lane].queue.pop_front();
            self.lanes[lane].last_discharge = Some(now);
            self.vehicles[v].leg += 1;
            self.vehicles[v].mode = VehicleMode::Crossing;
            self.place(v, target);
        }

        for s in &mut self.signals {
            s.yellow_remaining = s.yellow_remaining.saturating_sub(1);
        }
        self.clock = now;
        self.inject();
    }
}
