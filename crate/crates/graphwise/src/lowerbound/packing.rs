use serde::Serialize;

use super::{Divider, LowerBoundError, Result};

/// Largest divider solved exactly.
pub const EXACT_PACKING_LIMIT: usize = 20;
/// Largest divider handled by the greedy fallback.
pub const GREEDY_PACKING_LIMIT: usize = 20_000;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Packing {
    /// Natural log of the packing size.
    pub entropy: f64,
    /// Indices of the packed sets, ascending.
    pub members: Vec<usize>,
    /// `false` when the greedy fallback ran; the entropy is then a lower bound.
    pub exact: bool,
}

/// Largest subfamily whose pairwise base-graph predistances are all `>= r`.
///
/// This is a maximum independent set in the conflict graph joining sets
/// closer than `r`: branch and bound up to [`EXACT_PACKING_LIMIT`] sets,
/// minimum-degree greedy beyond.
pub fn packing_entropy(c: &Divider, r: f64) -> Result<Packing> {
    let len = c.len();
    if len == 0 {
        return Err(LowerBoundError::EmptyDivider);
    }
    if len > GREEDY_PACKING_LIMIT {
        return Err(LowerBoundError::TooLarge { what: "packing", len, limit: GREEDY_PACKING_LIMIT });
    }
    let conflicts = conflict_graph(c, r);
    let (members, exact) = if len <= EXACT_PACKING_LIMIT {
        (exact_independent_set(&conflicts), true)
    } else {
        (greedy_independent_set(&conflicts), false)
    };
    Ok(Packing { entropy: (members.len() as f64).ln(), members, exact })
}

/// Minimum-degree greedy packing regardless of size; a lower bound on
/// [`packing_entropy`].
pub fn greedy_packing(c: &Divider, r: f64) -> Result<Packing> {
    let len = c.len();
    if len == 0 {
        return Err(LowerBoundError::EmptyDivider);
    }
    if len > GREEDY_PACKING_LIMIT {
        return Err(LowerBoundError::TooLarge { what: "packing", len, limit: GREEDY_PACKING_LIMIT });
    }
    let members = greedy_independent_set(&conflict_graph(c, r));
    Ok(Packing { entropy: (members.len() as f64).ln(), members, exact: false })
}

fn conflict_graph(c: &Divider, r: f64) -> Vec<Vec<usize>> {
    let table = c.base().distance_table();
    let sets: Vec<_> = c.sets().collect();
    let mut adj = vec![Vec::new(); sets.len()];
    for i in 0..sets.len() {
        for j in i + 1..sets.len() {
            if !table.edgeset_predistance(&sets[i], &sets[j]).at_least(r) {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    adj
}

fn exact_independent_set(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let masks: Vec<u32> = adj.iter().map(|nb| nb.iter().fold(0u32, |m, &j| m | (1 << j))).collect();
    let all = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    let mut best = 0u32;
    branch(all, 0, &masks, &mut best);
    (0..n).filter(|&i| best & (1 << i) != 0).collect()
}

fn branch(candidates: u32, chosen: u32, masks: &[u32], best: &mut u32) {
    if chosen.count_ones() + candidates.count_ones() <= best.count_ones() {
        return;
    }
    if candidates == 0 {
        *best = chosen;
        return;
    }
    // branch on the candidate with the most conflicts among candidates
    let v = (0..masks.len())
        .filter(|&i| candidates & (1 << i) != 0)
        .max_by_key(|&i| ((masks[i] & candidates).count_ones(), std::cmp::Reverse(i)))
        .expect("candidates nonempty");
    let bit = 1u32 << v;
    branch(candidates & !bit & !masks[v], chosen | bit, masks, best);
    if masks[v] & candidates != 0 {
        branch(candidates & !bit, chosen, masks, best);
    }
}

fn greedy_independent_set(adj: &[Vec<usize>]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..adj.len()).collect();
    order.sort_by_key(|&i| (adj[i].len(), i));
    let mut blocked = vec![false; adj.len()];
    let mut members = Vec::new();
    for i in order {
        if blocked[i] {
            continue;
        }
        members.push(i);
        for &j in &adj[i] {
            blocked[j] = true;
        }
    }
    members.sort_unstable();
    members
}
