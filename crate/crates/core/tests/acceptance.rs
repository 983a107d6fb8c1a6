//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tsc_core::agent::*;
use tsc_core::flow::{generate_flow, FlowSet, TurnRatios, VehicleSpec};
use tsc_core::metrics::aatt;
use tsc_core::nn::{Adam, Graph, Matrix, ParamStore};
use tsc_core::policy::{
    argmax, efficient_pressure_phase, max_queue_phase, FixedTimeController, PhaseRule, QueueMap, RuleController,
};
use tsc_core::roadnet::{build_grid, build_grid_with, Network, Phase, Topology};
use tsc_core::sim::{run_episode, Controller, Decision, EpisodeLog, EpisodeOptions, SimConfig, World};

type Outcome = Result<String, String>;
type Criterion = (usize, &'static str, fn() -> Outcome);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Keeps one phase green for the whole run.
struct Hold(usize);

impl Controller for Hold {
    fn decide(&mut self, _: &World<'_>, _: usize) -> Decision {
        Decision { phase: self.0, duration: 3600 }
    }
}

fn spec(id: &str, t: u32, route: &[&str]) -> VehicleSpec {
    VehicleSpec { id: id.into(), start_time: t, route: route.iter().map(|s| s.to_string()).collect() }
}

fn free_flow() -> Outcome {
    let mut times = Vec::new();
    for (route_len, expect) in [(500.0, 50i64), (400.0, 40), (300.0, 30)] {
        let half = route_len / 2.0;
        let net = build_grid(1, 1, Topology::A, half, half).map_err(|e| e.to_string())?;
        let flow = FlowSet::new(vec![spec("v", 0, &["in_0_0_n", "r_0_0_s"])], &net).map_err(|e| e.to_string())?;
        let log = run_episode(&net, &flow, &mut Hold(0), &EpisodeOptions::new(200, true)).map_err(|e| e.to_string())?;
        let t = log.vehicles[0].travel_time().ok_or("vehicle did not finish")? as i64;
        times.push((t, expect));
    }
    let ok = times.iter().all(|(t, e)| (t - e).abs() <= 1);
    check(ok, format!("travel times {:?} s", times.iter().map(|p| p.0).collect::<Vec<_>>()))
}

fn lite_budget() -> Outcome {
    let model = QModel::new(ModelConfig::lite());
    let total = model.zeros().count_params();
    let specs = model.specs();
    let part = |prefix: &str| -> usize {
        specs.iter().filter(|s| s.name.starts_with(prefix)).map(|s| s.rows * s.cols).sum()
    };
    let (first, last) = (part("embed"), part("out"));
    check(total == 19 && (first, last) == (5, 14), format!("{total} parameters = {first} + {last}"))
}

fn random_state(rng: &mut ChaCha8Rng, topology: Topology, signalized: bool) -> DurationState {
    let net = build_grid_with(1, 1, topology, 300.0, 300.0, signalized).unwrap();
    let x = &net.intersections[0];
    let phase_lanes = phase_lane_table(x);
    let segments = (0..x.incoming_lanes.len()).map(|_| std::array::from_fn(|_| rng.random_range(0..6) as f64)).collect();
    let phase = rng.random_range(0..phase_lanes.len());
    DurationState { segments, phase_lanes, phase }
}

/// Worst relative error between backprop and central differences of a
/// random linear functional of the output.
fn gradient_error(model: &QModel, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = model.init(seed);
    let state = random_state(&mut rng, Topology::A, true);
    let mut g = Graph::new(&params);
    let out = model.forward(&mut g, &state);
    let (r, c) = g.shape(out);
    let coef = Matrix::new(r, c, (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    let grads = g.backward(out, &coef);
    drop(g);
    let f = |p: &ParamStore| {
        let mut g = Graph::new(p);
        let out = model.forward(&mut g, &state);
        g.value(out).data().iter().zip(coef.data()).map(|(a, b)| a * b).sum::<f64>()
    };
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..params.len() {
        for k in 0..params.value(i).len() {
            let orig = params.value(i).data()[k];
            params.value_mut(i).data_mut()[k] = orig + h;
            let up = f(&params);
            params.value_mut(i).data_mut()[k] = orig - h;
            let down = f(&params);
            params.value_mut(i).data_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * h);
            let analytic = grads.value(i).data()[k];
            worst = worst.max((analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-4));
        }
    }
    worst
}

fn gradients() -> Outcome {
    let mut configs = vec![ModelConfig::lite()];
    for network in [NetworkVariant::One, NetworkVariant::Two, NetworkVariant::Three] {
        for fusion in [Fusion::AttentionMean, Fusion::MeanAttention, Fusion::Concat, Fusion::Sum] {
            configs.push(ModelConfig::full_with(network, fusion));
        }
    }
    let mut worst: f64 = 0.0;
    for (i, cfg) in configs.iter().enumerate() {
        worst = worst.max(gradient_error(&QModel::new(*cfg), 200 + i as u64));
    }
    check(worst <= 1e-4, format!("{} models, max relative error {worst:.2e}", configs.len()))
}

fn permutation_invariance() -> Outcome {
    let model = QModel::new(ModelConfig::full());
    let p = model.init(3);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let s = random_state(&mut rng, Topology::A, true);
        let mut table = (*s.phase_lanes).clone();
        for lanes in table.iter_mut() {
            let k = rng.random_range(0..lanes.len());
            lanes.reverse();
            lanes.rotate_left(k);
        }
        let shuffled = DurationState { phase_lanes: Arc::new(table), ..s.clone() };
        for (a, b) in model.q_values(&p, &s).iter().zip(model.q_values(&p, &shuffled)) {
            worst = worst.max((a - b).abs());
        }
    }
    check(worst <= 1e-10, format!("100 states, max deviation {worst:.1e}"))
}

/// Counts steps that break vehicle conservation.
struct Audit<C> {
    inner: C,
    total: usize,
    violations: usize,
    steps: usize,
}

impl<C: Controller> Controller for Audit<C> {
    fn decide(&mut self, world: &World<'_>, node: usize) -> Decision {
        self.inner.decide(world, node)
    }

    fn after_step(&mut self, world: &World<'_>) {
        let c = world.counts();
        let on_lanes: usize = (0..world.network().lanes.len()).map(|l| world.lane_vehicle_count(l)).sum();
        if c.injected != c.exited + c.in_network || c.injected + c.not_yet_injected != self.total || on_lanes != c.in_network
        {
            self.violations += 1;
        }
        self.steps += 1;
    }
}

fn conservation() -> Outcome {
    let net = build_grid(3, 4, Topology::A, 400.0, 800.0).map_err(|e| e.to_string())?;
    let flow = generate_flow(&net, 0.1, &TurnRatios::default(), 3600, 21);
    let run = || {
        let mut audit =
            Audit { inner: RuleController::new(PhaseRule::MaxQueue, 15), total: flow.len(), violations: 0, steps: 0 };
        let log = run_episode(&net, &flow, &mut audit, &EpisodeOptions::new(3600, false)).unwrap();
        (audit.violations, audit.steps, log.to_text())
    };
    let (v1, steps, a) = run();
    let (v2, _, b) = run();
    check(
        v1 + v2 == 0 && steps == 3600 && a == b,
        format!("{steps} steps, {} violations, logs identical: {}", v1 + v2, a == b),
    )
}

/// First phase not beaten by any other on exact integer scores.
fn brute_force(scores: &[i64]) -> usize {
    (0..scores.len())
        .find(|&p| scores.iter().all(|&s| scores[p] >= s) && scores[..p].iter().all(|&s| scores[p] > s))
        .unwrap()
}

fn policy_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mismatches = [0usize; 2];
    for _ in 0..1000 {
        let lanes = rng.random_range(1..=12);
        let phases: Vec<Phase> = (0..rng.random_range(2..=4))
            .map(|index| {
                let mut part: Vec<usize> = (0..lanes).filter(|_| rng.random_bool(0.4)).collect();
                if part.is_empty() {
                    part.push(rng.random_range(0..lanes));
                }
                Phase { index, movements: vec![index], participating_lanes: part }
            })
            .collect();
        let q: Vec<i64> = (0..lanes).map(|_| rng.random_range(0..6)).collect();
        let map: QueueMap = q.iter().enumerate().map(|(l, &v)| (l, v as f64)).collect();
        let scores: Vec<i64> = phases.iter().map(|p| p.participating_lanes.iter().map(|&l| q[l]).sum()).collect();
        if max_queue_phase(&map, &phases).unwrap() != brute_force(&scores) {
            mismatches[0] += 1;
        }
    }
    let nets: Vec<Network> = Topology::ALL
        .iter()
        .flat_map(|&t| [build_grid(2, 2, t, 300.0, 300.0).unwrap(), build_grid_with(1, 2, t, 300.0, 300.0, true).unwrap()])
        .collect();
    for i in 0..1000 {
        let net = &nets[i % nets.len()];
        let node = rng.random_range(0..net.intersections.len());
        let q: Vec<i64> = (0..net.lanes.len()).map(|_| rng.random_range(0..5)).collect();
        let map: QueueMap = q.iter().enumerate().map(|(l, &v)| (l, v as f64)).collect();
        let x = &net.intersections[node];
        // Road lane counts divide 6, so six times the pressure is an integer.
        let scores: Vec<i64> = x
            .phases
            .iter()
            .map(|p| {
                p.movements
                    .iter()
                    .map(|&m| {
                        let mv = &x.movements[m];
                        let out = &net.roads[mv.to_road].lanes;
                        let up: i64 = mv.from_lanes.iter().map(|&l| q[l]).sum();
                        let down: i64 = out.iter().map(|&l| q[l]).sum();
                        up * (6 / mv.from_lanes.len() as i64) - down * (6 / out.len() as i64)
                    })
                    .sum()
            })
            .collect();
        if efficient_pressure_phase(&map, net, node).unwrap() != brute_force(&scores) {
            mismatches[1] += 1;
        }
    }
    check(mismatches == [0, 0], format!("mismatches: max-queue {}, efficient pressure {}", mismatches[0], mismatches[1]))
}

fn tiny_mdp() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut busy = random_state(&mut rng, Topology::A, false);
    busy.segments.iter_mut().for_each(|r| *r = [6.0, 4.0, 2.0, 1.0]);
    let mut empty = busy.clone();
    empty.segments.iter_mut().for_each(|r| *r = [0.0; 4]);
    let states = [busy, empty];
    let next = [[0usize, 0, 0, 0, 1, 1, 1], [1, 1, 0, 0, 0, 0, 0]];
    let reward = [[-1.0, -1.2, -1.4, -1.6, -2.0, -2.2, -2.4], [-0.5, -0.4, -1.5, -1.8, -2.1, -2.4, -2.7]];
    let gamma = 0.8;

    let mut q_star = [[0.0f64; 7]; 2];
    for _ in 0..2000 {
        let v = [0, 1].map(|s| q_star[s].iter().cloned().fold(f64::NEG_INFINITY, f64::max));
        for s in 0..2 {
            for a in 0..7 {
                q_star[s][a] = reward[s][a] + gamma * v[next[s][a]];
            }
        }
    }
    let optimum = [0, 1].map(|s| argmax(&q_star[s]));

    let model = QModel::new(ModelConfig::full());
    let mut p = model.init(7);
    let mut buf = ReplayBuffer::new(1000);
    for _ in 0..20 {
        for s in 0..2 {
            for a in 0..7 {
                buf.push(Transition {
                    node: 0,
                    state: states[s].clone(),
                    action: a,
                    reward: reward[s][a],
                    next_state: states[next[s][a]].clone(),
                    terminal: false,
                });
            }
        }
    }
    let hp = Hyperparams { gamma, lr: 0.001, ..Hyperparams::default() };
    let mut opt = Adam::new(&p, hp.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..300 {
        train_round(&buf, &model, &mut p, &mut opt, &hp, &mut rng).map_err(|e| e.to_string())?;
    }
    let greedy = [0, 1].map(|s| argmax(&model.q_values(&p, &states[s])));
    check(greedy == optimum, format!("greedy {greedy:?}, value iteration {optimum:?}"))
}

const HORIZON: u32 = 3600;
const RATE: f64 = 0.15;
const SEEDS: [u64; 3] = [1, 2, 3];

fn scenario_net(topology: Topology) -> Network {
    build_grid(3, 4, topology, 400.0, 400.0).unwrap()
}

fn log_aatt(log: &EpisodeLog) -> Result<f64, String> {
    if log.unfinished() > 0 {
        return Err(format!("{} vehicles never left", log.unfinished()));
    }
    aatt(log).map_err(|e| e.to_string())
}

fn agent_aatt(net: &Network, flow: &FlowSet, model: ModelConfig, params: &ParamStore, control: &ControlSettings) -> Result<f64, String> {
    let log = evaluate(net, flow, &QModel::new(model), params, control, SimConfig::default(), HORIZON).map_err(|e| e.to_string())?;
    log_aatt(&log)
}

fn train(net: &Network, flow: &FlowSet, model: ModelConfig, seed: u64) -> Result<ParamStore, String> {
    let cfg = TrainingConfig::new(model, ControlSettings::max_queue(), seed);
    Ok(run_training(net, flow, &cfg).map_err(|e| e.to_string())?.params)
}

/// Results on the shared congested scenario, one entry per seed.
struct Desk {
    fixed: Vec<f64>,
    mql: Vec<f64>,
    full: Vec<f64>,
    lite: Vec<f64>,
    full_params: Vec<ParamStore>,
}

fn desk_scale() -> Result<Desk, String> {
    let net = scenario_net(Topology::A);
    let opts = EpisodeOptions::new(HORIZON, true);
    let mut d = Desk { fixed: vec![], mql: vec![], full: vec![], lite: vec![], full_params: vec![] };
    for seed in SEEDS {
        let flow = generate_flow(&net, RATE, &TurnRatios::default(), HORIZON, seed);
        let run = |ctl: &mut dyn Controller| -> Result<f64, String> {
            log_aatt(&run_episode(&net, &flow, ctl, &opts).map_err(|e| e.to_string())?)
        };
        d.fixed.push(run(&mut FixedTimeController::uniform(30))?);
        d.mql.push(run(&mut RuleController::new(PhaseRule::MaxQueue, 15))?);
        let full = train(&net, &flow, ModelConfig::full(), seed)?;
        d.full.push(agent_aatt(&net, &flow, ModelConfig::full(), &full, &ControlSettings::max_queue())?);
        d.full_params.push(full);
        let lite = train(&net, &flow, ModelConfig::lite(), seed)?;
        d.lite.push(agent_aatt(&net, &flow, ModelConfig::lite(), &lite, &ControlSettings::max_queue())?);
    }
    Ok(d)
}

fn ordering(d: &Desk) -> Outcome {
    let (ft, mq, full) = (median(d.fixed.clone()), median(d.mql.clone()), median(d.full.clone()));
    let gap = (mq - full) / mq * 100.0;
    check(
        full < mq && mq < ft && gap >= 2.0,
        format!("median AATT full {full:.1} < M-QL {mq:.1} < FixedTime {ft:.1}; full is {gap:.1}% below M-QL"),
    )
}

fn lite_competitive(d: &Desk) -> Outcome {
    let (ft, full, lite) = (median(d.fixed.clone()), median(d.full.clone()), median(d.lite.clone()));
    let rel = (lite - full).abs() / full * 100.0;
    check(lite < ft && rel <= 10.0, format!("median AATT Lite {lite:.1} vs FixedTime {ft:.1}, {rel:.1}% from full {full:.1}"))
}

fn cycle(d: &Desk) -> Outcome {
    let net = scenario_net(Topology::A);
    let control = ControlSettings::new(PhasePolicy::Rule(PhaseRule::Cyclic), RewardKind::Queue);
    let model = QModel::new(ModelConfig::full());
    let mut ratios = Vec::new();
    let mut cyclic = true;
    for (k, seed) in SEEDS.into_iter().enumerate() {
        let flow = generate_flow(&net, RATE, &TurnRatios::default(), HORIZON, seed);
        let log = evaluate(&net, &flow, &model, &d.full_params[k], &control, SimConfig::default(), HORIZON)
            .map_err(|e| e.to_string())?;
        ratios.push(log_aatt(&log)? / d.fixed[k]);
        for (node, x) in net.intersections.iter().enumerate() {
            let phases = log.decisions.iter().filter(|r| r.intersection == node).map(|r| r.phase);
            cyclic &= phases.enumerate().all(|(i, p)| p == i % x.phase_count());
        }
    }
    let worst = ratios.iter().cloned().fold(0.0, f64::max);
    check(worst <= 0.8 && cyclic, format!("AATT / FixedTime per seed {ratios:.3?}, exactly cyclic: {cyclic}"))
}

fn transfer(d: &Desk) -> Outcome {
    let weights = &d.full_params[0];
    let seed = SEEDS[0];
    let mut parts = Vec::new();
    let mut ok = true;
    for topology in Topology::ALL {
        let net = scenario_net(topology);
        let flow = generate_flow(&net, RATE, &TurnRatios::default(), HORIZON, seed);
        let control = ControlSettings::max_queue();
        let t_transfer = agent_aatt(&net, &flow, ModelConfig::full(), weights, &control)?;
        let t_train = if topology == Topology::A {
            agent_aatt(&net, &flow, ModelConfig::full(), weights, &control)?
        } else {
            let direct = train(&net, &flow, ModelConfig::full(), seed)?;
            agent_aatt(&net, &flow, ModelConfig::full(), &direct, &control)?
        };
        let ratio = tsc_core::metrics::transfer_ratio(t_transfer, t_train).map_err(|e| e.to_string())?;
        ok &= ratio.is_finite() && (topology != Topology::A || ratio == 1.0);
        parts.push(format!("A->{topology} {ratio:.3}"));
    }
    check(ok, parts.join(", "))
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |n: usize, name: &str, start: Instant, outcome: Outcome| {
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS [{n}] {name}: {detail} ({secs:.1} s)"),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{n}] {name}: {detail} ({secs:.1} s)");
            }
        }
    };
    let simple: [Criterion; 7] = [
        (1, "free-flow travel times", free_flow),
        (2, "Lite parameter budget", lite_budget),
        (3, "gradient correctness", gradients),
        (4, "lane permutation invariance", permutation_invariance),
        (5, "conservation and determinism", conservation),
        (6, "policy oracles", policy_oracles),
        (7, "tiny MDP learning", tiny_mdp),
    ];
    for (n, name, f) in simple {
        let t = Instant::now();
        report(n, name, t, f());
    }
    let t = Instant::now();
    match desk_scale() {
        Ok(d) => {
            report(8, "desk-scale ordering", t, ordering(&d));
            report(11, "Lite competitiveness", t, lite_competitive(&d));
            let t = Instant::now();
            report(9, "cycle ordering", t, cycle(&d));
            let t = Instant::now();
            report(10, "transfer smoke", t, transfer(&d));
        }
        Err(e) => {
            for (n, name) in [(8, "desk-scale ordering"), (11, "Lite competitiveness"), (9, "cycle ordering"), (10, "transfer smoke")] {
                report(n, name, t, Err(format!("scenario failed: {e}")));
            }
        }
    }
    println!("{} of 11 criteria passed", 11 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
