use coalitions::graph::Graph;
use coalitions::lse::{run_lse, LseConfig, StartStrategy};
use coalitions::stability::{validate_structure, CommunityStructure};
use coalitions::weights::{exact_modular_weights, WeightMatrix};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use std::time::Instant;

fn seeded_growth(g: &Graph, w: &WeightMatrix, n_c: usize, seed: u64) -> Vec<Vec<usize>> {
    let n = g.node_count();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(g.degree(i)));
    let mut seeds: Vec<usize> = Vec::new();
    for &i in &order {
        if seeds.len() == n_c { break; }
        if seeds.iter().all(|&s| !g.has_edge(s, i)) { seeds.push(i); }
    }
    for &i in &order {
        if seeds.len() == n_c { break; }
        if !seeds.contains(&i) { seeds.push(i); }
    }
    let mut assign: Vec<usize> = vec![usize::MAX; n];
    for (k, &s) in seeds.iter().enumerate() { assign[s] = k; }
    let mut rng = StdRng::seed_from_u64(seed);
    let mut rest: Vec<usize> = (0..n).filter(|&i| assign[i] == usize::MAX).collect();
    rest.shuffle(&mut rng);
    for &i in &rest {
        let mut best = 0usize;
        let mut best_w = f64::NEG_INFINITY;
        for k in 0..n_c {
            let tot: f64 = (0..n).filter(|&j| assign[j] == k).map(|j| w.get(i, j)).sum();
            if tot > best_w { best_w = tot; best = k; }
        }
        assign[i] = best;
    }
    // every node relocates to its strongest community; empty slots die
    let mut sweep_order: Vec<usize> = (0..n).collect();
    for _ in 0..50 {
        sweep_order.shuffle(&mut rng);
        let mut changed = false;
        for &i in &sweep_order {
            let cur = assign[i];
            let mut best = cur;
            let mut best_w = f64::NEG_INFINITY;
            for k in 0..n_c {
                let tot: f64 = (0..n).filter(|&j| j != i && assign[j] == k).map(|j| w.get(i, j)).sum();
                if tot > best_w { best_w = tot; best = k; }
            }
            if best != cur { assign[i] = best; changed = true; }
        }
        if !changed { break; }
    }
    let mut comms = vec![Vec::new(); n_c];
    for (i, &k) in assign.iter().enumerate() { comms[k].push(i); }
    comms.retain(|c| !c.is_empty());
    comms
}

fn main() {
    let text = std::fs::read_to_string("/tmp/n500/g.edges").unwrap();
    let g = Graph::from_edge_list_text(&text).unwrap();
    let w = exact_modular_weights(&g).unwrap();
    for seed in 0..3u64 {
        let t0 = Instant::now();
        let comms = seeded_growth(&g, &w, 25, seed);
        let k = comms.len();
        let pi = CommunityStructure::new(g.node_count(), 25, 2, comms).unwrap();
        let pre = validate_structure(&w, &pi).len();
        println!("seed {}: {} communities, {} violations, built in {:.1}s", seed, k, pre, t0.elapsed().as_secs_f64());
        let mut cfg = LseConfig::new(1, 0).unwrap();
        cfg.start_strategy = StartStrategy::Provided(pi);
        let t0 = Instant::now();
        match run_lse(&w, &g, 25, 2, &cfg) {
            Ok(res) => println!(
                "  CONVERGED obj={:.3} in {:.1}s ({} iterations, {} bootstrap)",
                res.objective, t0.elapsed().as_secs_f64(),
                res.reports[0].iterations, res.reports[0].bootstrap_moves
            ),
            Err(e) => println!("  FAILED in {:.1}s: {}", t0.elapsed().as_secs_f64(), e.to_string().lines().next().unwrap_or("")),
        }
    }
}
