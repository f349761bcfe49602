use coalitions::lse::{run_lse, LseConfig, StartOutcome};
use coalitions::weights::{approx_modular_weights, exact_modular_weights, raw_weights};
use coalitions::Graph;
use std::collections::BTreeMap;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let which = args.get(1).map(String::as_str).unwrap_or("wstar3");
    let limit: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let base: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(0);

    let text = std::fs::read_to_string("/root/crate/data/zachary_karate.edges").unwrap();
    let g = Graph::from_edge_list_text(&text).unwrap();
    let raw = raw_weights(&g);

    let (w, n_c, p, target) = match which {
        "wstar3" => (exact_modular_weights(&g).unwrap(), 3usize, 2usize, 157.652f64),
        "wstar4" => (exact_modular_weights(&g).unwrap(), 4, 2, 162.469),
        "wprime3" => (approx_modular_weights(&g, &raw).unwrap(), 3, 2, 122.578),
        "wprime4" => (approx_modular_weights(&g, &raw).unwrap(), 4, 2, 129.39),
        other => panic!("unknown mode {}", other),
    };

    eprintln!(
        "mode {} n_c={} p={} target={} starts={} base={}",
        which, n_c, p, target, limit, base
    );
    let t0 = std::time::Instant::now();
    let cfg = LseConfig::new(limit, base).unwrap();
    let res = match run_lse(&w, &g, n_c, p, &cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("all starts failed: {}", e);
            return;
        }
    };
    eprintln!("elapsed {:?}; best objective {}", t0.elapsed(), res.objective);

    let mut histogram: BTreeMap<i64, usize> = BTreeMap::new();
    let mut failed = 0usize;
    let mut hits: Vec<u64> = Vec::new();
    for r in &res.reports {
        match (r.outcome, r.end_objective) {
            (StartOutcome::Converged, Some(v)) => {
                *histogram.entry((v * 1000.0).round() as i64).or_insert(0) += 1;
                if (v - target).abs() <= 0.01 {
                    hits.push(r.seed);
                }
            }
            _ => failed += 1,
        }
    }
    eprintln!("{} failed starts / {}", failed, limit);
    eprintln!("top objective buckets:");
    for (k, v) in histogram.iter().rev().take(15) {
        eprintln!("  {:.3} -> {}", *k as f64 / 1000.0, v);
    }
    eprintln!("hit seeds (first 20): {:?}", hits.iter().take(20).collect::<Vec<_>>());
    if let Some(&s) = hits.first() {
        let cfg = LseConfig::new(10, s).unwrap();
        if let Ok(r) = run_lse(&w, &g, n_c, p, &cfg) {
            eprintln!("confirm base {} t_max=10 -> {}", s, r.objective);
        }
    }
}
