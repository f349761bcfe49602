//! Simple undirected graphs with dense 0-based node ids.
//!
//! External node labels are remapped to `0..n` in first-appearance order at
//! load time; the mapping is kept so results can be reported in the caller's
//! labels. Graphs are immutable after construction.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

pub type NodeId = usize;

#[derive(Debug, Clone)]
pub struct Graph {
    labels: Vec<u64>,
    neighbours: Vec<Vec<NodeId>>,
    edges: Vec<(NodeId, NodeId)>,
}

impl Graph {
    /// Builds a graph over nodes `0..n` from an edge iterator. Duplicate and
    /// reversed duplicate edges collapse; self-loops are rejected.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Graph>
    where
        I: IntoIterator<Item = (NodeId, NodeId)>,
    {
        if n == 0 {
            return Err(Error::Domain("graph must have at least one node".into()));
        }
        let mut sorted: Vec<(NodeId, NodeId)> = Vec::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::Validation(format!("self-loop at node {}", a)));
            }
            if a >= n || b >= n {
                return Err(Error::NodeIndex { node: a.max(b), n });
            }
            sorted.push((a.min(b), a.max(b)));
        }
        sorted.sort_unstable();
        sorted.dedup();
        let mut neighbours = vec![Vec::new(); n];
        for &(a, b) in &sorted {
            neighbours[a].push(b);
            neighbours[b].push(a);
        }
        for list in &mut neighbours {
            list.sort_unstable();
        }
        Ok(Graph { labels: (0..n as u64).collect(), neighbours, edges: sorted })
    }

    /// Parses whitespace-separated label pairs, one edge per line. Lines
    /// starting with `#` are comments. A line with a single label declares an
    /// isolated node. Labels are arbitrary non-negative integers.
    pub fn from_edge_list_text(text: &str) -> Result<Graph> {
        let mut ids: HashMap<u64, NodeId> = HashMap::new();
        let mut labels: Vec<u64> = Vec::new();
        let mut intern = |label: u64, labels: &mut Vec<u64>| -> NodeId {
            *ids.entry(label).or_insert_with(|| {
                labels.push(label);
                labels.len() - 1
            })
        };
        let mut edges: Vec<(NodeId, NodeId)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split_whitespace();
            let a = parse_label(fields.next().unwrap(), line_no)?;
            let Some(second) = fields.next() else {
                intern(a, &mut labels);
                continue;
            };
            let b = parse_label(second, line_no)?;
            if let Some(extra) = fields.next() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected 2 fields per edge, found extra '{}'", extra),
                });
            }
            if a == b {
                return Err(Error::Validation(format!(
                    "self-loop '{} {}' on line {}",
                    a, b, line_no
                )));
            }
            let ia = intern(a, &mut labels);
            let ib = intern(b, &mut labels);
            edges.push((ia, ib));
        }
        if labels.is_empty() {
            return Err(Error::Parse { line: 1, msg: "edge list is empty".into() });
        }
        let n = labels.len();
        let mut g = Graph::from_edges(n, edges)?;
        g.labels = labels;
        Ok(g)
    }

    /// Serializes to the edge-list text format (`label label` per line,
    /// isolated nodes as single-label lines).
    pub fn to_edge_list_text(&self) -> String {
        let mut out = String::new();
        for &(a, b) in &self.edges {
            let _ = writeln!(out, "{} {}", self.labels[a], self.labels[b]);
        }
        for i in 0..self.node_count() {
            if self.neighbours[i].is_empty() {
                let _ = writeln!(out, "{}", self.labels[i]);
            }
        }
        out
    }

    pub fn node_count(&self) -> usize {
        self.neighbours.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn degree(&self, i: NodeId) -> usize {
        self.neighbours[i].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbours.iter().map(Vec::len).collect()
    }

    pub fn neighbours(&self, i: NodeId) -> &[NodeId] {
        &self.neighbours[i]
    }

    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn has_edge(&self, i: NodeId, j: NodeId) -> bool {
        self.neighbours[i].binary_search(&j).is_ok()
    }

    /// Original label of internal node id `i`.
    pub fn label(&self, i: NodeId) -> u64 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u64] {
        &self.labels
    }

    /// Internal id for an original label, if present.
    pub fn node_of_label(&self, label: u64) -> Option<NodeId> {
        self.labels.iter().position(|&l| l == label)
    }

    fn check_node(&self, i: NodeId) -> Result<()> {
        if i < self.node_count() {
            Ok(())
        } else {
            Err(Error::NodeIndex { node: i, n: self.node_count() })
        }
    }

    /// |N(i) ∩ N(j)|, excluding i and j themselves.
    pub fn common_neighbours(&self, i: NodeId, j: NodeId) -> Result<usize> {
        self.check_node(i)?;
        self.check_node(j)?;
        if i == j {
            return Err(Error::Domain("common_neighbours requires i != j".into()));
        }
        let (mut a, mut b) = (self.neighbours[i].iter(), self.neighbours[j].iter());
        let (mut x, mut y) = (a.next(), b.next());
        let mut count = 0;
        while let (Some(&u), Some(&v)) = (x, y) {
            match u.cmp(&v) {
                std::cmp::Ordering::Less => x = a.next(),
                std::cmp::Ordering::Greater => y = b.next(),
                std::cmp::Ordering::Equal => {
                    if u != i && u != j {
                        count += 1;
                    }
                    x = a.next();
                    y = b.next();
                }
            }
        }
        Ok(count)
    }

    /// Stable content hash over node count, labels, and the sorted edge set.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Fnv1a::new();
        h.write_u64(self.node_count() as u64);
        for &l in &self.labels {
            h.write_u64(l);
        }
        for &(a, b) in &self.edges {
            h.write_u64(a as u64);
            h.write_u64(b as u64);
        }
        h.finish()
    }
}

fn parse_label(field: &str, line_no: usize) -> Result<u64> {
    field.parse::<u64>().map_err(|_| Error::Parse {
        line: line_no,
        msg: format!("expected non-negative integer label, found '{}'", field),
    })
}

/// FNV-1a, fixed offset/prime so fingerprints are stable across runs.
struct Fnv1a(u64);

impl Fnv1a {
    fn new() -> Fnv1a {
        Fnv1a(0xcbf2_9ce4_8422_2325)
    }

    fn write_u64(&mut self, v: u64) {
        for byte in v.to_le_bytes() {
            self.0 ^= u64::from(byte);
            self.0 = self.0.wrapping_mul(0x100_0000_01b3);
        }
    }

    fn finish(&self) -> u64 {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_graph_loads() {
        let g = Graph::from_edge_list_text("0 1\n1 2").unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.degrees(), vec![1, 2, 1]);
    }

    #[test]
    fn duplicates_collapse() {
        let g = Graph::from_edge_list_text("0 1\n1 0\n0 1").unwrap();
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn self_loop_rejected() {
        assert!(matches!(
            Graph::from_edge_list_text("0 0"),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn malformed_line_reports_number() {
        match Graph::from_edge_list_text("0 1\nx 2") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {:?}", other),
        }
    }

    #[test]
    fn labels_remap_in_first_appearance_order() {
        let g = Graph::from_edge_list_text("7 9\n5 7").unwrap();
        assert_eq!(g.labels(), &[7, 9, 5]);
        assert!(g.has_edge(0, 1));
        assert!(g.has_edge(0, 2));
    }

    #[test]
    fn degree_sum_is_twice_edge_count() {
        let g = Graph::from_edge_list_text("0 1\n1 2\n2 0\n3 1").unwrap();
        let total: usize = g.degrees().iter().sum();
        assert_eq!(total, 2 * g.edge_count());
    }

    #[test]
    fn common_neighbours_matches_hand_counts() {
        let k3 = Graph::from_edge_list_text("0 1\n1 2\n2 0").unwrap();
        assert_eq!(k3.common_neighbours(0, 1).unwrap(), 1);
        let path = Graph::from_edge_list_text("0 1\n1 2").unwrap();
        assert_eq!(path.common_neighbours(0, 2).unwrap(), 1);
        assert_eq!(path.common_neighbours(0, 1).unwrap(), 0);
    }

    #[test]
    fn isolated_node_round_trips() {
        let g = Graph::from_edge_list_text("0 1\n5").unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.degree(2), 0);
        let again = Graph::from_edge_list_text(&g.to_edge_list_text()).unwrap();
        assert_eq!(again.node_count(), 3);
        assert_eq!(again.edge_count(), 1);
    }
}
