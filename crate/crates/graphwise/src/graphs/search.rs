use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{Edge, EdgeSet, EdgeWeights, Graph, GraphError, Result};

/// Target substructures for [`greedy_structure_search`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Structure {
    Cycle,
    Triangle,
    /// A self-avoiding path with `m + 1` edges.
    PathLongerThan(usize),
    /// A vertex with `s0 + 1` neighbours; the witness is that star.
    DegreeAbove(usize),
}

impl Structure {
    pub fn min_vertices(self) -> usize {
        match self {
            Structure::Cycle | Structure::Triangle => 3,
            Structure::PathLongerThan(m) => m + 2,
            Structure::DegreeAbove(s0) => s0 + 2,
        }
    }
}

/// Inserts the edges of the complete graph heaviest first (ties broken
/// lexicographically) and returns the edge set of the first occurrence of
/// `target`.
///
/// When one insertion completes several candidates, the one whose vertex
/// sequence is lexicographically smallest wins. Every candidate contains the
/// inserted edge, since none existed before it.
pub fn greedy_structure_search(w: &EdgeWeights, target: Structure) -> Result<EdgeSet> {
    let d = w.d();
    if d < target.min_vertices() {
        return Err(GraphError::TooFewVertices { needed: target.min_vertices(), d });
    }
    let mut g = Graph::empty(d);
    for e in w.insertion_order() {
        let found = match target {
            Structure::Cycle => forest_path(&g, e.lo(), e.hi()).map(|mut path| {
                path.insert(e);
                path
            }),
            Structure::Triangle => g
                .neighbors(e.lo())
                .iter()
                .find(|&&c| g.has_edge(Edge::new(e.hi(), c).expect("distinct")))
                .map(|&c| pairs_to_set(&[e.lo(), c, e.hi()], true)),
            Structure::PathLongerThan(m) => {
                g.add_edge(e)?;
                let path = best_path_through(&g, e, m + 1);
                g.remove_edge(e);
                path.map(|p| pairs_to_set(&p, false))
            }
            Structure::DegreeAbove(s0) => {
                g.add_edge(e)?;
                let star = e.endpoints().into_iter().find(|&v| g.degree(v) > s0).map(|center| {
                    g.neighbors(center).iter().map(|&leaf| Edge::new(center, leaf).expect("distinct")).collect()
                });
                g.remove_edge(e);
                star
            }
        };
        if let Some(found) = found {
            return Ok(found);
        }
        g.add_edge(e)?;
    }
    Err(GraphError::StructureNotFound(target))
}

fn pairs_to_set(seq: &[usize], closed: bool) -> EdgeSet {
    let mut s: EdgeSet = seq.windows(2).map(|p| Edge::new(p[0], p[1]).expect("distinct")).collect();
    if closed {
        s.insert(Edge::new(seq[0], seq[seq.len() - 1]).expect("distinct"));
    }
    s
}

/// The unique path between `a` and `b` in a forest, if they are connected.
fn forest_path(g: &Graph, a: usize, b: usize) -> Option<EdgeSet> {
    let mut parent = vec![0usize; g.d() + 1];
    parent[a] = a;
    let mut queue = VecDeque::from([a]);
    while let Some(x) = queue.pop_front() {
        if x == b {
            break;
        }
        for &y in g.neighbors(x) {
            if parent[y] == 0 {
                parent[y] = x;
                queue.push_back(y);
            }
        }
    }
    if parent[b] == 0 {
        return None;
    }
    let mut path = EdgeSet::new();
    let mut v = b;
    while v != a {
        path.insert(Edge::new(v, parent[v]).expect("distinct"));
        v = parent[v];
    }
    Some(path)
}

/// Lexicographically smallest canonical vertex sequence of a simple path
/// with exactly `len` edges that uses `e`.
fn best_path_through(g: &Graph, e: Edge, len: usize) -> Option<Vec<usize>> {
    let (a, b) = (e.lo(), e.hi());
    let mut best: Option<Vec<usize>> = None;
    let mut seen = vec![false; g.d() + 1];
    seen[a] = true;
    seen[b] = true;
    // left arm grows from a (away from b), right arm from b
    let mut left = vec![a];
    for left_len in 0..len {
        collect_arms(g, &mut left, left_len, &mut seen, &mut |left, seen| {
            let mut right = vec![b];
            collect_arms(g, &mut right, len - 1 - left_len, seen, &mut |right, _| {
                let mut seq: Vec<usize> = left.iter().rev().copied().collect();
                seq.extend_from_slice(right);
                let rev: Vec<usize> = seq.iter().rev().copied().collect();
                let canon = if rev < seq { rev } else { seq };
                if best.as_ref().is_none_or(|cur| canon < *cur) {
                    best = Some(canon);
                }
            });
        });
    }
    best
}

/// Calls `visit` for every simple extension of `arm` by exactly `steps` edges
/// avoiding vertices marked in `seen`.
fn collect_arms(
    g: &Graph,
    arm: &mut Vec<usize>,
    steps: usize,
    seen: &mut Vec<bool>,
    visit: &mut dyn FnMut(&[usize], &mut Vec<bool>),
) {
    if steps == 0 {
        visit(arm, seen);
        return;
    }
    let tip = *arm.last().expect("arm is never empty");
    for &next in g.neighbors(tip) {
        if seen[next] {
            continue;
        }
        seen[next] = true;
        arm.push(next);
        collect_arms(g, arm, steps - 1, seen, visit);
        arm.pop();
        seen[next] = false;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::edge;

    fn weights(d: usize, list: &[((usize, usize), f64)]) -> EdgeWeights {
        EdgeWeights::from_fn(d, |e| {
            list.iter().find(|(p, _)| edge(p.0, p.1) == e).map_or(0.0, |&(_, x)| x)
        })
        .unwrap()
    }

    #[test]
    fn triangle_is_the_only_cycle_on_three_vertices() {
        let w = weights(3, &[((1, 2), 0.9), ((2, 3), 0.8), ((1, 3), 0.5)]);
        let all = EdgeSet::from_pairs(&[(1, 2), (2, 3), (1, 3)]).unwrap();
        assert_eq!(greedy_structure_search(&w, Structure::Cycle).unwrap(), all);
        assert_eq!(greedy_structure_search(&w, Structure::Triangle).unwrap(), all);
    }

    #[test]
    fn first_degree_two_vertex() {
        let w = weights(4, &[((1, 2), 0.9), ((1, 3), 0.8), ((3, 4), 0.1)]);
        let star = greedy_structure_search(&w, Structure::DegreeAbove(1)).unwrap();
        assert_eq!(star, EdgeSet::from_pairs(&[(1, 2), (1, 3)]).unwrap());
    }

    #[test]
    fn cycle_skips_forest_edges() {
        // square 1-2-3-4 closes before any triangle
        let w = weights(4, &[((1, 2), 0.9), ((2, 3), 0.8), ((3, 4), 0.7), ((1, 4), 0.6), ((1, 3), 0.1)]);
        let cycle = greedy_structure_search(&w, Structure::Cycle).unwrap();
        assert_eq!(cycle, EdgeSet::from_pairs(&[(1, 2), (2, 3), (3, 4), (1, 4)]).unwrap());
        let tri = greedy_structure_search(&w, Structure::Triangle).unwrap();
        assert_eq!(tri, EdgeSet::from_pairs(&[(1, 2), (2, 3), (1, 3)]).unwrap());
    }

    #[test]
    fn path_prefers_smallest_sequence() {
        // star 1-{2,3} then (3,4): paths of 3 edges through (3,4) are 2-1-3-4
        let w = weights(5, &[((1, 2), 0.9), ((1, 3), 0.8), ((3, 4), 0.7)]);
        let p = greedy_structure_search(&w, Structure::PathLongerThan(2)).unwrap();
        assert_eq!(p, EdgeSet::from_pairs(&[(1, 2), (1, 3), (3, 4)]).unwrap());
    }

    #[test]
    fn too_few_vertices() {
        let w = EdgeWeights::from_fn(2, |_| 1.0).unwrap();
        assert!(matches!(
            greedy_structure_search(&w, Structure::Triangle),
            Err(GraphError::TooFewVertices { needed: 3, d: 2 })
        ));
        let w = EdgeWeights::from_fn(4, |_| 1.0).unwrap();
        assert!(greedy_structure_search(&w, Structure::PathLongerThan(3)).is_err());
    }
}
