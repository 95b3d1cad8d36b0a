use serde::Serialize;

use super::{sig2, RankResult};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphNode {
    pub label: String,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphEdge {
    pub from: usize,
    pub to: usize,
    /// ρ / ρ_m
    pub weight: f64,
}

/// Thresholded response graph with its Markov-Conley chain members.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResponseGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
    pub edge_threshold: f64,
    /// Nodes lying in some sink strongly connected component, ascending.
    pub mcc_members: Vec<usize>,
    pub sink_components: Vec<Vec<usize>>,
}

/// Keeps deviation `i → j` iff `ρ / (1/m) > edge_threshold`.
pub fn response_graph(result: &RankResult, m: usize, edge_threshold: f64) -> ResponseGraph {
    let neutral = 1.0 / m as f64;
    let nodes: Vec<GraphNode> =
        result.labels.iter().zip(&result.pi).map(|(l, &mass)| GraphNode { label: l.clone(), mass }).collect();
    let mut edges: Vec<GraphEdge> = result
        .deviations
        .iter()
        .filter(|d| d.rho / neutral > edge_threshold)
        .map(|d| GraphEdge { from: d.from, to: d.to, weight: d.rho / neutral })
        .collect();
    edges.sort_by_key(|e| (e.from, e.to));
    let mut adjacency = vec![Vec::new(); nodes.len()];
    for e in &edges {
        adjacency[e.from].push(e.to);
    }
    let sinks = sink_components(&adjacency);
    let mut mcc_members: Vec<usize> = sinks.iter().flatten().copied().collect();
    mcc_members.sort_unstable();
    ResponseGraph { nodes, edges, edge_threshold, mcc_members, sink_components: sinks }
}

/// Tarjan's algorithm with an explicit stack. Components come out in
/// reverse topological order, each sorted ascending.
pub fn strongly_connected_components(adjacency: &[Vec<usize>]) -> Vec<Vec<usize>> {
    const UNSEEN: usize = usize::MAX;
    let n = adjacency.len();
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut components = Vec::new();
    let mut counter = 0;
    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        let mut frames: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut next)) = frames.last_mut() {
            if let Some(&w) = adjacency[v].get(*next) {
                *next += 1;
                if index[w] == UNSEEN {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    frames.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            frames.pop();
            if let Some(&(parent, _)) = frames.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("v is on the stack");
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort_unstable();
                components.push(comp);
            }
        }
    }
    components
}

/// Components with no edge leaving them, ordered by smallest member.
pub fn sink_components(adjacency: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let comps = strongly_connected_components(adjacency);
    let mut which = vec![0; adjacency.len()];
    for (c, members) in comps.iter().enumerate() {
        for &v in members {
            which[v] = c;
        }
    }
    let mut sinks: Vec<Vec<usize>> = comps
        .iter()
        .enumerate()
        .filter(|(c, members)| members.iter().all(|&v| adjacency[v].iter().all(|&w| which[w] == *c)))
        .map(|(_, members)| members.clone())
        .collect();
    sinks.sort_by_key(|c| c[0]);
    sinks
}

impl ResponseGraph {
    /// Graphviz rendering: node fill saturation scales with mass, edges are
    /// labeled with ρ/ρ_m and MCC members get a double border.
    pub fn to_dot(&self) -> String {
        let max_mass = self.nodes.iter().map(|n| n.mass).fold(0.0, f64::max);
        let mut out = String::from("digraph response_graph {\n  node [shape=box, style=filled];\n");
        for (i, node) in self.nodes.iter().enumerate() {
            let shade = if max_mass > 0.0 { node.mass / max_mass } else { 0.0 };
            let font = if shade > 0.6 { "white" } else { "black" };
            let periph = if self.mcc_members.binary_search(&i).is_ok() { 2 } else { 1 };
            out.push_str(&format!(
                "  n{i} [label=\"{}\\n{:.4}\", fillcolor=\"0.600 {shade:.3} 0.900\", fontcolor={font}, peripheries={periph}];\n",
                escape(&node.label),
                node.mass
            ));
        }
        for e in &self.edges {
            out.push_str(&format!("  n{} -> n{} [label=\"{}\"];\n", e.from, e.to, sig2(e.weight)));
        }
        out.push_str("}\n");
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cycle_is_one_sink() {
        let adj = vec![vec![1], vec![2], vec![0]];
        assert_eq!(sink_components(&adj), vec![vec![0, 1, 2]]);
    }

    #[test]
    fn chain_into_singleton_sink() {
        let adj = vec![vec![1], vec![2], vec![], vec![2]];
        assert_eq!(sink_components(&adj), vec![vec![2]]);
        assert_eq!(strongly_connected_components(&adj).len(), 4);
    }

    #[test]
    fn two_sinks_and_isolated_node() {
        let adj = vec![vec![1, 3], vec![0], vec![], vec![4], vec![3], vec![]];
        assert_eq!(sink_components(&adj), vec![vec![2], vec![3, 4], vec![5]]);
    }

    #[test]
    fn deep_path_does_not_recurse() {
        let n = 200_000;
        let adj: Vec<Vec<usize>> = (0..n).map(|i| if i + 1 < n { vec![i + 1] } else { vec![] }).collect();
        assert_eq!(sink_components(&adj), vec![vec![n - 1]]);
    }
}
