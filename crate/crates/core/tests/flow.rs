use std::collections::HashSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tsc_core::flow::*;
use tsc_core::roadnet::{build_grid, Topology, TurnKind};

#[test]
fn turn_frequencies_follow_the_ratios() {
    let net = build_grid(3, 4, Topology::A, 400.0, 800.0).unwrap();
    let ratios = TurnRatios::new(0.1, 0.6, 0.3).unwrap();
    let (flow, turns) = generate_flow_with_turns(&net, 0.1, &ratios, 3600, 7);
    assert_eq!(flow.len(), turns.len());
    let mut counts = [0usize; 3];
    for t in turns.iter().flatten() {
        counts[t.index()] += 1;
    }
    let hops: usize = counts.iter().sum();
    assert!(hops >= 5000, "{hops}");
    for (kind, want) in TurnKind::ALL.iter().zip([0.1, 0.6, 0.3]) {
        let got = counts[kind.index()] as f64 / hops as f64;
        assert!((got - want).abs() <= 0.03, "{kind:?}: {got}");
    }
}

/// Two-sided one-sample Kolmogorov-Smirnov statistic against
/// Exponential(rate).
fn ks_exponential(mut xs: Vec<f64>, rate: f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = 1.0 - (-rate * x).exp();
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn inter_arrival_gaps_are_exponential() {
    for (seed, rate) in [(1u64, 0.1), (2, 0.5), (3, 2.0)] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let horizon = 12_000.0 / rate;
        let times = poisson_arrivals(rate, horizon, &mut rng);
        let gaps: Vec<f64> = std::iter::once(times[0]).chain(times.windows(2).map(|w| w[1] - w[0])).collect();
        assert!(gaps.len() >= 10_000);
        let n = gaps.len() as f64;
        let d = ks_exponential(gaps, rate);
        // Asymptotic critical value at significance 0.01.
        assert!(d < 1.628 / n.sqrt(), "rate {rate}: D = {d}");
    }
}

#[test]
fn per_road_arrival_counts_match_the_rate() {
    let net = build_grid(2, 2, Topology::B, 300.0, 300.0).unwrap();
    let flow = generate_flow(&net, 0.2, &TurnRatios::default(), 20_000, 4);
    let entries: Vec<String> = net.entry_roads().map(|r| net.roads[r].id.clone()).collect();
    for e in &entries {
        let n = flow.vehicles().iter().filter(|v| &v.route[0] == e).count() as f64;
        // Poisson count with mean 4000: five standard deviations is about 316.
        assert!((n - 4000.0).abs() < 316.0, "{e}: {n}");
    }
}

#[test]
fn generated_routes_are_valid() {
    for topology in Topology::ALL {
        let net = build_grid(2, 3, topology, 300.0, 300.0).unwrap();
        let flow = generate_flow(&net, 0.1, &TurnRatios::default(), 1800, 11);
        assert!(!flow.is_empty());
        let mut ids = HashSet::new();
        let mut last = 0;
        for v in flow.vehicles() {
            assert!(ids.insert(v.id.clone()));
            assert!(v.start_time >= last && v.start_time < 1800);
            last = v.start_time;
            let route = resolve_route(&net, v).unwrap();
            assert!(net.roads[route[0]].is_entry());
            assert!(net.roads[*route.last().unwrap()].is_exit());
            let nodes: Vec<usize> = route.iter().filter_map(|&r| net.roads[r].to).collect();
            let unique: HashSet<_> = nodes.iter().collect();
            assert_eq!(unique.len(), nodes.len(), "{} revisits an intersection", v.id);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generation_is_pure_and_round_trips(seed in any::<u64>(), rate in 0.0f64..0.3, t in 0usize..4) {
        let net = build_grid(2, 2, Topology::ALL[t], 300.0, 300.0).unwrap();
        let a = generate_flow(&net, rate, &TurnRatios::default(), 600, seed);
        let b = generate_flow(&net, rate, &TurnRatios::default(), 600, seed);
        prop_assert_eq!(&a, &b);
        let text = serialize_flow(&a);
        prop_assert_eq!(serialize_flow(&b), text.clone());
        let back = parse_flow(&text, &net).unwrap();
        prop_assert_eq!(back, a);
    }
}
