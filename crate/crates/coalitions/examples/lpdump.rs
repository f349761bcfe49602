fn main() {
    let g = coalitions::graph::Graph::from_edges(3, [(0usize, 1usize), (1, 2)]).unwrap();
    let m = coalitions::milp::build_f_sh_jk(&coalitions::weights::raw_weights(&g), 2).unwrap();
    print!("{}", coalitions::milp::export_lp(&m));
}
