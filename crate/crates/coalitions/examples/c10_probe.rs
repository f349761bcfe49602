use coalitions::graph::Graph;
use coalitions::milp::{brute_force_optimum, build_f_sh_mod, BruteObjective};
use coalitions::weights::exact_modular_weights;

fn main() {
    let g = Graph::from_edges(4, [(0, 1), (1, 2), (2, 3)]).unwrap();
    let w = exact_modular_weights(&g).unwrap();
    let (best, value) = brute_force_optimum(&w, 2, 1, BruteObjective::PairOnce).unwrap();
    println!("optimum {:?} value {}", best.communities(), value);
    let model = build_f_sh_mod(&w, 2, 1).unwrap();
    for v in model.variables() {
        println!("var {}", v.name);
    }
}
