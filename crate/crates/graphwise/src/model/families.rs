//! Base graphs and dividers of the example constructions.

use serde::{Deserialize, Serialize};

use super::{ModelError, Result};
use crate::graphs::{edge, Edge, EdgeSet, Graph};
use crate::lowerbound::{BufferRule, Divider, DividerMode, SubsetShape};

/// Named example constructions. Each variant documents its minimum size.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FamilyKind {
    /// Two cycles on `1..=⌊d/2⌋` and the rest, bridged by rungs `(j, ⌊d/2⌋ + j)`. `d ≥ 6`.
    Connectivity,
    /// `m + 1` vs `m` components with `m ≥ √d`: path on `1..=d-m`, links
    /// `(j, j+1)` for `j ≥ d - m` as the divider. `m ≤ d - 1`.
    Components { m: usize },
    /// Path `1..=d` with chords `(j, j+2 mod d)`. `d ≥ 5`.
    Cycle,
    /// The `d`-cycle with the same chords; each chord closes a triangle. `d ≥ 5`.
    TriangleFree,
    /// Longest path `m` vs `m + 1` with `m < √d`: blocks of `m + 2` vertices,
    /// each a path on its first `m + 1` vertices. `(m + 2) | d`.
    PathLength { m: usize },
    /// Deletion divider for `m < √d`: the path `(j, j+1)`, `j ≤ d - m`, with every edge deletable.
    ComponentsDeletion { m: usize },
    /// Deletion divider for `m ≥ √d`: the path `(j, j+1)`, `j ≤ m + 1`.
    PathLengthDeletion { m: usize },
    /// `s0`-stars in blocks of `s1 + 1` vertices; each set completes one star to degree `s1`.
    MaxDegreeBounded { s0: usize, s1: usize },
    /// `s0`-stars inside `1..=⌊√d⌋`; each set joins one center to `s1 - s0` vertices above `⌊√d⌋`.
    MaxDegreeSplit { s0: usize, s1: usize },
    /// All `s`-cliques over the empty base.
    Cliques { s: usize },
    /// All `s`-cycles (vertices joined in increasing order) over the empty base.
    Cycles { s: usize },
}

#[derive(Clone, Debug)]
pub struct Family {
    pub kind: FamilyKind,
    pub divider: Divider,
}

impl Family {
    pub fn base(&self) -> &Graph {
        self.divider.base()
    }
}

fn require(kind: FamilyKind, ok: bool, requirement: impl Into<String>) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(ModelError::FamilyRequirement { kind, requirement: requirement.into() })
    }
}

fn isqrt(d: usize) -> usize {
    let mut r = (d as f64).sqrt() as usize;
    while r * r > d {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= d {
        r += 1;
    }
    r
}

fn path_edges(from: usize, to_exclusive: usize) -> impl Iterator<Item = Edge> {
    (from..to_exclusive).map(|j| edge(j, j + 1))
}

fn build(kind: FamilyKind, d: usize, base: Vec<Edge>, sets: Vec<EdgeSet>, mode: DividerMode) -> Result<Family> {
    let base = Graph::from_edges(d, base)?;
    let divider = Divider::new(base, sets, mode)
        .map_err(|e| ModelError::FamilyRequirement { kind, requirement: e.to_string() })?;
    Ok(Family { kind, divider })
}

fn singletons<I: IntoIterator<Item = Edge>>(edges: I) -> Vec<EdgeSet> {
    edges.into_iter().map(|e| std::iter::once(e).collect()).collect()
}

/// Builds the base graph and divider of an example construction.
pub fn build_family(kind: FamilyKind, d: usize) -> Result<Family> {
    use FamilyKind::*;
    match kind {
        Connectivity => {
            require(kind, d >= 6, "d >= 6")?;
            let h = d / 2;
            let mut base: Vec<Edge> = path_edges(1, h).collect();
            base.push(edge(h, 1));
            base.extend(path_edges(h + 1, d));
            base.push(edge(h + 1, d));
            let rungs = (1..=h).map(|j| edge(j, h + j));
            build(kind, d, base, singletons(rungs), DividerMode::Add)
        }
        Components { m } => {
            require(kind, m >= 1 && m * m >= d && m < d, "sqrt(d) <= m <= d - 1")?;
            let base = path_edges(1, d - m).collect();
            let links = path_edges(d - m, d);
            build(kind, d, base, singletons(links), DividerMode::Add)
        }
        Cycle | TriangleFree => {
            require(kind, d >= 5, "d >= 5")?;
            let mut base: Vec<Edge> = path_edges(1, d).collect();
            if kind == TriangleFree {
                base.push(edge(1, d));
            }
            let chords = (1..=d).map(|j| edge(j, (j + 1) % d + 1));
            build(kind, d, base, singletons(chords), DividerMode::Add)
        }
        PathLength { m } => {
            let b = m + 2;
            require(kind, m >= 1 && m * m < d && d.is_multiple_of(b), "1 <= m < sqrt(d) and (m + 2) divides d")?;
            let base = (1..d).filter(|j| j % b != 0 && (j + 1) % b != 0).map(|j| edge(j, j + 1)).collect();
            let links = (1..=d / b).map(|j| edge(j * b - 1, j * b));
            build(kind, d, base, singletons(links), DividerMode::Add)
        }
        ComponentsDeletion { m } => {
            require(kind, m >= 1 && m * m < d, "1 <= m < sqrt(d)")?;
            let path: Vec<Edge> = path_edges(1, d - m + 1).collect();
            build(kind, d, path.clone(), singletons(path), DividerMode::Delete)
        }
        PathLengthDeletion { m } => {
            require(kind, m * m >= d && m + 2 <= d, "sqrt(d) <= m <= d - 2")?;
            let path: Vec<Edge> = path_edges(1, m + 2).collect();
            build(kind, d, path.clone(), singletons(path), DividerMode::Delete)
        }
        MaxDegreeBounded { s0, s1 } => {
            require(kind, s0 < s1 && s1 < d, "s0 < s1 < d")?;
            let centers: Vec<usize> = (0..d / (s1 + 1)).map(|j| (s1 + 1) * j + 1).collect();
            let base = centers.iter().flat_map(|&c| (1..=s0).map(move |k| edge(c, c + k))).collect();
            let sets = centers.iter().map(|&c| (s0 + 1..=s1).map(|k| edge(c, c + k)).collect()).collect();
            build(kind, d, base, sets, DividerMode::Add)
        }
        MaxDegreeSplit { s0, s1 } => {
            let r = isqrt(d);
            let centers: Vec<usize> = (0..r / (s0 + 1)).map(|j| (s0 + 1) * j + 1).collect();
            require(kind, s0 < s1, "s0 < s1")?;
            require(kind, !centers.is_empty(), "s0 + 1 <= floor(sqrt(d)) so one star fits")?;
            let width = s1 - s0;
            let pool: Vec<usize> = (r + 1..=d).collect();
            require(kind, width <= pool.len(), "s1 - s0 <= d - floor(sqrt(d))")?;
            let total = crate::lowerbound::binomial(pool.len(), width).unwrap_or(u128::MAX) * centers.len() as u128;
            require(kind, total <= 2_000_000, "at most 2e6 divider sets")?;
            let base = centers.iter().flat_map(|&c| (1..=s0).map(move |k| edge(c, c + k))).collect();
            let mut sets = Vec::with_capacity(total as usize);
            let count = crate::lowerbound::binomial(pool.len(), width).expect("checked above");
            for &c in &centers {
                for rank in 0..count {
                    let leaves = crate::lowerbound::unrank_subset(rank, pool.len(), width);
                    sets.push(leaves.iter().map(|&i| edge(c, pool[i - 1])).collect());
                }
            }
            let mut fam = build(kind, d, base, sets, DividerMode::Add)?;
            fam.divider = fam.divider.with_buffer_rule(BufferRule::SupportIntersection);
            Ok(fam)
        }
        Cliques { s } | Cycles { s } => {
            let shape = if matches!(kind, Cliques { .. }) { SubsetShape::Clique } else { SubsetShape::Cycle };
            let divider = Divider::all_subsets(d, s, shape)
                .map_err(|e| ModelError::FamilyRequirement { kind, requirement: e.to_string() })?;
            Ok(Family { kind, divider })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sets_of(f: &Family) -> Vec<EdgeSet> {
        f.divider.sets().map(|s| s.into_owned()).collect()
    }

    #[test]
    fn connectivity_d10() {
        let f = build_family(FamilyKind::Connectivity, 10).unwrap();
        let expected = Graph::from_pairs(
            10,
            &[(1, 2), (2, 3), (3, 4), (4, 5), (1, 5), (6, 7), (7, 8), (8, 9), (9, 10), (6, 10)],
        )
        .unwrap();
        assert_eq!(f.base(), &expected);
        let rungs: Vec<EdgeSet> = (1..=5).map(|j| EdgeSet::from_pairs(&[(j, 5 + j)]).unwrap()).collect();
        assert_eq!(sets_of(&f), rungs);
    }

    #[test]
    fn cycle_d7() {
        let f = build_family(FamilyKind::Cycle, 7).unwrap();
        assert_eq!(f.base(), &Graph::chain(7));
        let chords = EdgeSet::from_pairs(&[(1, 3), (2, 4), (3, 5), (4, 6), (5, 7), (6, 1), (7, 2)]).unwrap();
        let got: EdgeSet = sets_of(&f).iter().flat_map(|s| s.iter()).collect();
        assert_eq!(f.divider.len(), 7);
        assert_eq!(got, chords);
    }

    #[test]
    fn bounded_stars_d18() {
        let f = build_family(FamilyKind::MaxDegreeBounded { s0: 3, s1: 5 }, 18).unwrap();
        let expected = vec![
            EdgeSet::from_pairs(&[(1, 5), (1, 6)]).unwrap(),
            EdgeSet::from_pairs(&[(7, 11), (7, 12)]).unwrap(),
            EdgeSet::from_pairs(&[(13, 17), (13, 18)]).unwrap(),
        ];
        assert_eq!(sets_of(&f), expected);
        assert_eq!(f.base().max_degree(), 3);
    }

    #[test]
    fn split_stars_d100() {
        let f = build_family(FamilyKind::MaxDegreeSplit { s0: 2, s1: 4 }, 100).unwrap();
        // centers 1, 4, 7; leaf pool 11..=100
        assert_eq!(f.divider.len(), 3 * 4005);
        assert_eq!(f.base().edge_count(), 6);
        assert_eq!(*f.divider.set(0), EdgeSet::from_pairs(&[(1, 11), (1, 12)]).unwrap());
        assert_eq!(f.divider.buffer_rule(), BufferRule::SupportIntersection);
        assert!(build_family(FamilyKind::MaxDegreeSplit { s0: 3, s1: 4 }, 9).is_err());
    }

    #[test]
    fn path_blocks() {
        let f = build_family(FamilyKind::PathLength { m: 3 }, 15).unwrap();
        assert_eq!(f.base().edge_count(), 15 * 3 / 5);
        let links: Vec<EdgeSet> =
            [(4, 5), (9, 10), (14, 15)].iter().map(|&p| EdgeSet::from_pairs(&[p]).unwrap()).collect();
        assert_eq!(sets_of(&f), links);
    }

    #[test]
    fn minimum_sizes_enforced() {
        assert!(build_family(FamilyKind::Connectivity, 5).is_err());
        assert!(build_family(FamilyKind::Cycle, 4).is_err());
        assert!(build_family(FamilyKind::Components { m: 2 }, 9).is_err());
        assert!(build_family(FamilyKind::PathLength { m: 3 }, 16).is_err());
        assert!(build_family(FamilyKind::ComponentsDeletion { m: 3 }, 9).is_err());
        assert!(build_family(FamilyKind::Cliques { s: 5 }, 4).is_err());
    }
}
