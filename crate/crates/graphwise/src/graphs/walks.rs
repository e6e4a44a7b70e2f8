use super::{EdgeSet, Graph, GraphError, Result};

/// Nonnegative integer adjacency matrix. Entries above one appear when edge
/// sets are summed, e.g. `A0 + A_S + A_S'` with `S ∩ S'` nonempty.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WalkMatrix {
    d: usize,
    entries: Vec<u128>,
}

impl WalkMatrix {
    pub fn zeros(d: usize) -> Self {
        WalkMatrix { d, entries: vec![0; d * d] }
    }

    pub fn from_graph(g: &Graph) -> Self {
        let mut m = WalkMatrix::zeros(g.d());
        m.add_edges(g.edges());
        m
    }

    /// Adds one unit of weight for each edge of `s`.
    pub fn add_edges(&mut self, s: &EdgeSet) {
        for e in s {
            let (i, j) = (e.lo() - 1, e.hi() - 1);
            self.entries[i * self.d + j] += 1;
            self.entries[j * self.d + i] += 1;
        }
    }

    pub fn with_edges(&self, s: &EdgeSet) -> Self {
        let mut m = self.clone();
        m.add_edges(s);
        m
    }

    pub fn get(&self, i: usize, j: usize) -> u128 {
        self.entries[(i - 1) * self.d + (j - 1)]
    }

    /// `trace(M^k)`: the number of closed walks of length `k`, counted with
    /// edge multiplicities. Exact; overflow is reported, never wrapped.
    pub fn closed_walks(&self, k: usize) -> Result<u128> {
        if k == 0 {
            return Err(GraphError::ZeroWalkLength);
        }
        let d = self.d;
        let overflow = || GraphError::WalkCountOverflow { k };
        // sparse row lists of the base matrix
        let rows: Vec<Vec<(usize, u128)>> = (0..d)
            .map(|i| {
                (0..d)
                    .filter_map(|j| {
                        let w = self.entries[i * d + j];
                        (w > 0).then_some((j, w))
                    })
                    .collect()
            })
            .collect();
        let mut power = self.entries.clone();
        let mut next = vec![0u128; d * d];
        for _ in 1..k {
            for i in 0..d {
                for j in 0..d {
                    let mut acc: u128 = 0;
                    for &(l, w) in &rows[j] {
                        let term = power[i * d + l].checked_mul(w).ok_or_else(overflow)?;
                        acc = acc.checked_add(term).ok_or_else(overflow)?;
                    }
                    next[i * d + j] = acc;
                }
            }
            std::mem::swap(&mut power, &mut next);
        }
        (0..d).try_fold(0u128, |acc, i| acc.checked_add(power[i * d + i]).ok_or_else(overflow))
    }
}
