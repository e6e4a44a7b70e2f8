//! Two-stage witness tests: find the strongest candidate structure on one
//! half of the data, then certify every one of its edges on the other half.

mod clique;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimation::{clime, empirical_covariance, ClimeConfig, EstimationError, PrecisionEstimate};
use crate::graphs::{
    greedy_structure_search, max_spanning_forest, max_spanning_tree, EdgeSet, EdgeWeights, Graph, GraphError,
    Structure,
};
use crate::inference::{step_down, BootstrapConfig, InferenceError, TestOutcome};
use crate::model::{Dataset, ModelError};
use crate::seeds;

pub use clique::{clique_detection_test, clique_threshold, CliqueTest, MAX_CLIQUE_SUBSETS};

#[derive(Debug, Error)]
pub enum WitnessError {
    #[error("need at least 4 observations to split, got {0}")]
    TooFewObservations(usize),
    #[error("invalid property {property}: {reason}")]
    InvalidProperty { property: String, reason: String },
    #[error("splitting data: {0}")]
    Split(#[source] ModelError),
    #[error("estimating on the {half} half: {source}")]
    Estimation { half: &'static str, source: EstimationError },
    #[error("searching for a witness: {0}")]
    Search(#[source] GraphError),
    #[error("certifying the witness: {0}")]
    Certification(#[source] InferenceError),
    #[error("{count} vertex subsets exceed the cap of {cap}")]
    TooManySubsets { count: u128, cap: u128 },
    #[error("symmetric eigenvalue solver failed")]
    Eigen,
}

pub type Result<T> = std::result::Result<T, WitnessError>;

/// Graph properties with a witness search.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum WitnessProperty {
    Connectivity,
    /// At most `m` connected components.
    Components { m: usize },
    Cycle,
    Triangle,
    /// A self-avoiding path with more than `m` edges.
    PathLength { m: usize },
    /// Some vertex of degree above `s0`.
    MaxDegree { s0: usize },
    /// A clique on `s` vertices.
    Clique { s: usize },
    /// Connectivity where every tree edge must exceed `mu` in magnitude.
    ConnectivityAtLevel { mu: f64 },
}

impl WitnessProperty {
    pub fn name(&self) -> String {
        match *self {
            WitnessProperty::Connectivity => "connectivity".into(),
            WitnessProperty::Components { m } => format!("components({m})"),
            WitnessProperty::Cycle => "cycle".into(),
            WitnessProperty::Triangle => "triangle".into(),
            WitnessProperty::PathLength { m } => format!("path_length({m})"),
            WitnessProperty::MaxDegree { s0 } => format!("max_degree({s0})"),
            WitnessProperty::Clique { s } => format!("clique({s})"),
            WitnessProperty::ConnectivityAtLevel { mu } => format!("connectivity_at_level({mu})"),
        }
    }

    /// Shift applied in the rejection rule.
    pub fn mu(&self) -> f64 {
        match *self {
            WitnessProperty::ConnectivityAtLevel { mu } => mu,
            _ => 0.0,
        }
    }

    /// Whether `g` has the alternative property.
    pub fn holds(&self, g: &Graph) -> bool {
        match *self {
            WitnessProperty::Connectivity | WitnessProperty::ConnectivityAtLevel { .. } => g.is_connected(),
            WitnessProperty::Components { m } => g.component_count() <= m,
            WitnessProperty::Cycle => g.has_cycle(),
            WitnessProperty::Triangle => g.has_triangle(),
            WitnessProperty::PathLength { m } => g.has_path_with_edges(m + 1),
            WitnessProperty::MaxDegree { s0 } => g.max_degree() > s0,
            WitnessProperty::Clique { s } => g.has_clique(s),
        }
    }

    /// Range checks for a test on `d` variables.
    pub fn validate(&self, d: usize) -> Result<()> {
        let fail = |reason: String| Err(WitnessError::InvalidProperty { property: self.name(), reason });
        match *self {
            WitnessProperty::Components { m } if m == 0 || m >= d => fail(format!("m must lie in 1..={}", d.saturating_sub(1))),
            WitnessProperty::MaxDegree { s0 } if s0 >= d => fail(format!("s0 must be below {d}")),
            WitnessProperty::Clique { s } if s < 2 || s > d => fail(format!("s must lie in 2..={d}")),
            WitnessProperty::ConnectivityAtLevel { mu } if !(mu.is_finite() && mu >= 0.0) => {
                fail("mu must be finite and nonnegative".into())
            }
            _ => Ok(()),
        }
    }
}

impl std::str::FromStr for WitnessProperty {
    type Err = String;

    /// Parses `connectivity`, `components:M`, `cycle`, `triangle`,
    /// `path_length:M`, `max_degree:S0`, `clique:S`, `connectivity_at_level:MU`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        let int = || -> std::result::Result<usize, String> {
            arg.ok_or_else(|| format!("{head} needs an integer argument"))?
                .parse()
                .map_err(|e| format!("{head}: {e}"))
        };
        Ok(match head {
            "connectivity" => WitnessProperty::Connectivity,
            "components" => WitnessProperty::Components { m: int()? },
            "cycle" => WitnessProperty::Cycle,
            "triangle" => WitnessProperty::Triangle,
            "path_length" | "sap" => WitnessProperty::PathLength { m: int()? },
            "max_degree" => WitnessProperty::MaxDegree { s0: int()? },
            "clique" => WitnessProperty::Clique { s: int()? },
            "connectivity_at_level" => WitnessProperty::ConnectivityAtLevel {
                mu: arg
                    .ok_or("connectivity_at_level needs a level")?
                    .parse()
                    .map_err(|e| format!("connectivity_at_level: {e}"))?,
            },
            other => return Err(format!("unknown property {other:?}")),
        })
    }
}

/// How rows are assigned to the two halves.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitMode {
    /// First `⌊n/2⌋` rows, then the rest.
    Sequential,
    /// Seeded row permutation before the sequential split.
    Shuffled { seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessTestSpec {
    pub property: WitnessProperty,
    pub clime: ClimeConfig,
    pub bootstrap: BootstrapConfig,
    pub split: SplitMode,
}

pub fn split(x: &Dataset, mode: SplitMode) -> Result<(Dataset, Dataset)> {
    let n = x.n();
    if n < 4 {
        return Err(WitnessError::TooFewObservations(n));
    }
    let half = n / 2;
    let shuffled;
    let x = match mode {
        SplitMode::Sequential => x,
        SplitMode::Shuffled { seed } => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut seeds::rng(seed));
            shuffled = x.select_rows(&order).map_err(WitnessError::Split)?;
            &shuffled
        }
    };
    let first = x.rows(0..half).map_err(WitnessError::Split)?;
    let second = x.rows(half..n).map_err(WitnessError::Split)?;
    Ok((first, second))
}

/// Edge set maximizing the smallest `|Θ̂_e|` among structures with the
/// property. `Components { m: d }` yields the empty set.
pub fn find_witness(estimate: &PrecisionEstimate, property: WitnessProperty) -> Result<EdgeSet> {
    let w = EdgeWeights::from_abs_matrix(&estimate.matrix).map_err(WitnessError::Search)?;
    let search = |target| greedy_structure_search(&w, target).map_err(WitnessError::Search);
    match property {
        WitnessProperty::Connectivity | WitnessProperty::ConnectivityAtLevel { .. } => {
            max_spanning_tree(&w).map_err(WitnessError::Search)
        }
        WitnessProperty::Components { m: 1 } => max_spanning_tree(&w).map_err(WitnessError::Search),
        WitnessProperty::Components { m } => max_spanning_forest(&w, m).map_err(WitnessError::Search),
        WitnessProperty::Cycle => search(Structure::Cycle),
        WitnessProperty::Triangle => search(Structure::Triangle),
        WitnessProperty::PathLength { m } => search(Structure::PathLongerThan(m)),
        WitnessProperty::MaxDegree { s0 } => search(Structure::DegreeAbove(s0)),
        WitnessProperty::Clique { s } => clique::greedy_clique(&w, s).map_err(WitnessError::Search),
    }
}

/// Witness search on the first half and step-down certification on the
/// second; the decision is to reject iff every witness edge is rejected.
pub fn run_witness_test(x: &Dataset, spec: &WitnessTestSpec) -> Result<TestOutcome> {
    spec.property.validate(x.d())?;
    let (first, second) = split(x, spec.split)?;
    let fit = |data: &Dataset, half| {
        clime(&empirical_covariance(data), &spec.clime).map_err(|source| WitnessError::Estimation { half, source })
    };
    let est1 = fit(&first, "first")?;
    let witness = find_witness(&est1, spec.property)?;
    let (alpha, mu) = (spec.bootstrap.alpha, spec.property.mu());
    let mut outcome = if witness.is_empty() {
        TestOutcome::empty_witness("", alpha, mu)
    } else {
        let est2 = fit(&second, "second")?;
        step_down(&second, &est2.matrix, &witness, &spec.bootstrap, mu).map_err(WitnessError::Certification)?
    };
    outcome.property = spec.property.name();
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use nalgebra::DMatrix;

    use super::*;
    use crate::estimation::{ClimeDiagnostics, ClimeSolver};

    pub(super) fn estimate(matrix: DMatrix<f64>) -> PrecisionEstimate {
        PrecisionEstimate {
            columns: matrix.clone(),
            matrix,
            lambda: 0.1,
            diagnostics: ClimeDiagnostics {
                column_residual: 0.0,
                symmetric_residual: 0.0,
                max_column_iterations: 0,
                total_iterations: 0,
                solver: ClimeSolver::Simplex,
            },
        }
    }

    fn weights3() -> PrecisionEstimate {
        estimate(DMatrix::from_row_slice(3, 3, &[1.0, 0.9, -0.5, 0.9, 1.0, 0.8, -0.5, 0.8, 1.0]))
    }

    #[test]
    fn split_sizes() {
        let x = Dataset::new(DMatrix::from_fn(7, 2, |i, j| (i * 2 + j) as f64)).unwrap();
        let (a, b) = split(&x, SplitMode::Sequential).unwrap();
        assert_eq!((a.n(), b.n()), (3, 4));
        assert_eq!(a.matrix()[(0, 0)], 0.0);
        assert_eq!(b.matrix()[(0, 0)], 6.0);
        let (c, _) = split(&x, SplitMode::Shuffled { seed: 5 }).unwrap();
        let (c2, _) = split(&x, SplitMode::Shuffled { seed: 5 }).unwrap();
        assert_eq!(c, c2);
        let tiny = Dataset::new(DMatrix::zeros(3, 2)).unwrap();
        assert!(matches!(split(&tiny, SplitMode::Sequential), Err(WitnessError::TooFewObservations(3))));
    }

    #[test]
    fn spanning_tree_witness() {
        let w = find_witness(&weights3(), WitnessProperty::Connectivity).unwrap();
        assert_eq!(w, EdgeSet::from_pairs(&[(1, 2), (2, 3)]).unwrap());
        assert_eq!(find_witness(&weights3(), WitnessProperty::Components { m: 1 }).unwrap(), w);
        assert_eq!(
            find_witness(&weights3(), WitnessProperty::Components { m: 2 }).unwrap(),
            EdgeSet::from_pairs(&[(1, 2)]).unwrap()
        );
        assert!(find_witness(&weights3(), WitnessProperty::Components { m: 3 }).unwrap().is_empty());
    }

    #[test]
    fn witnesses_have_their_property() {
        let m = DMatrix::from_fn(8, 8, |i, j| if i == j { 1.0 } else { ((i * 7 + j * 7 + i * j) % 11) as f64 / 11.0 });
        let est = estimate(m);
        let graph = |p: WitnessProperty| {
            let g = Graph::from_edges(8, find_witness(&est, p).unwrap().iter()).unwrap();
            assert!(p.holds(&g), "{p:?}");
            g
        };
        assert!(graph(WitnessProperty::Connectivity).is_connected());
        assert_eq!(graph(WitnessProperty::Connectivity).edge_count(), 7);
        assert!(graph(WitnessProperty::Cycle).has_cycle());
        assert!(graph(WitnessProperty::Triangle).has_triangle());
        assert!(graph(WitnessProperty::PathLength { m: 3 }).has_path_with_edges(4));
        assert!(graph(WitnessProperty::MaxDegree { s0: 3 }).max_degree() > 3);
        assert!(graph(WitnessProperty::Clique { s: 4 }).has_clique(4));
        assert!(graph(WitnessProperty::Components { m: 3 }).component_count() <= 3);
    }

    #[test]
    fn property_parsing_and_ranges() {
        assert_eq!("components:3".parse::<WitnessProperty>().unwrap(), WitnessProperty::Components { m: 3 });
        assert_eq!("sap:4".parse::<WitnessProperty>().unwrap(), WitnessProperty::PathLength { m: 4 });
        assert_eq!(
            "connectivity_at_level:0.25".parse::<WitnessProperty>().unwrap(),
            WitnessProperty::ConnectivityAtLevel { mu: 0.25 }
        );
        assert!("clique".parse::<WitnessProperty>().is_err());
        assert!("bogus".parse::<WitnessProperty>().is_err());
        assert!(WitnessProperty::Components { m: 5 }.validate(5).is_err());
        assert!(WitnessProperty::MaxDegree { s0: 5 }.validate(5).is_err());
        assert!(WitnessProperty::MaxDegree { s0: 4 }.validate(5).is_ok());
        assert!(WitnessProperty::Clique { s: 6 }.validate(5).is_err());
    }
}
