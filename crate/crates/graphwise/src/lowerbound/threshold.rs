use serde::{Deserialize, Serialize};

use super::stats::{one_norm, spectral_radius};
use super::{
    buffer_entropy, divider_stats, packing_entropy, BufferMethod, BufferRule, Divider, DividerMode, LowerBoundError,
    Result,
};
use crate::model::ModelClassParams;

/// Which signal-strength threshold to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Theorem {
    /// Single-edge divider with a null base: `κ√(M/n) ∧ ((1 - 1/C) ∧ e^{-1/2}) / (√2(D + 2))`.
    SingleEdge,
    /// Single-edge deletion divider: `κ√(M/n) ∧ (1 - 1/C) / (√2 D)`.
    SingleEdgeDeletion,
    /// Multi-edge packing threshold:
    /// `κ√(M/(nU)) ∧ κ/(U(‖A0‖₂ + 2U)) ∧ (1 - 1/C)/(4(‖A0‖₁ + 2U))`.
    MultiEdgePacking,
    /// Buffer threshold: `√(M_B/(4nR)) ∧ √(R/B) ∧ (1 - 1/C)/(2√2 Γ)`.
    Buffer,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThresholdTerm {
    pub label: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThresholdReport {
    pub theorem: Theorem,
    /// Packing entropy at radius `log|C|`, or the buffer entropy (`None` if infinite).
    pub entropy: Option<f64>,
    /// `false` if the entropy is a greedy lower bound or a Monte Carlo estimate.
    pub entropy_exact: bool,
    /// Entropy term first, then the constant caps.
    pub terms: Vec<ThresholdTerm>,
    /// Minimum over `terms`.
    pub threshold: f64,
    /// Label of the term attaining the minimum.
    pub binding: String,
}

/// Picks the theorem from the divider: deletion → [`Theorem::SingleEdgeDeletion`],
/// single edge → [`Theorem::SingleEdge`], multi-edge with support-intersection
/// buffers → [`Theorem::Buffer`], other multi-edge → [`Theorem::MultiEdgePacking`].
pub fn threshold_report(c: &Divider, n: usize, params: &ModelClassParams, kappa: f64) -> Result<ThresholdReport> {
    let theorem = match (c.mode(), c.is_single_edge(), c.buffer_rule()) {
        (DividerMode::Delete, _, _) => Theorem::SingleEdgeDeletion,
        (DividerMode::Add, true, _) => Theorem::SingleEdge,
        (DividerMode::Add, false, BufferRule::SupportIntersection) => Theorem::Buffer,
        (DividerMode::Add, false, BufferRule::Standard) => Theorem::MultiEdgePacking,
    };
    threshold_report_for(c, theorem, n, params, kappa)
}

pub fn threshold_report_for(
    c: &Divider,
    theorem: Theorem,
    n: usize,
    params: &ModelClassParams,
    kappa: f64,
) -> Result<ThresholdReport> {
    if n == 0 {
        return Err(LowerBoundError::InvalidArgument("n must be positive".into()));
    }
    if !(kappa.is_finite() && kappa > 0.0) {
        return Err(LowerBoundError::InvalidArgument(format!("kappa must be positive, got {kappa}")));
    }
    if c.is_empty() {
        return Err(LowerBoundError::EmptyDivider);
    }
    let wrong = |what: &str| Err(LowerBoundError::InvalidArgument(format!("{theorem:?} needs {what}")));
    match theorem {
        Theorem::SingleEdge if c.mode() != DividerMode::Add || !c.is_single_edge() => {
            return wrong("a single-edge divider with a null base")
        }
        Theorem::SingleEdgeDeletion if c.mode() != DividerMode::Delete || !c.is_single_edge() => {
            return wrong("a single-edge deletion divider")
        }
        Theorem::MultiEdgePacking | Theorem::Buffer if c.mode() != DividerMode::Add => {
            return wrong("a divider with a null base")
        }
        _ => {}
    }

    let nf = n as f64;
    let gap = 1.0 - 1.0 / params.c;
    let term = |label: &str, value: f64| ThresholdTerm { label: label.to_string(), value };
    let radius = (c.len() as f64).ln();
    let (entropy, entropy_exact, terms) = match theorem {
        Theorem::SingleEdge | Theorem::SingleEdgeDeletion => {
            let p = packing_entropy(c, radius)?;
            let degree = c.base().max_degree() as f64;
            let cap = if theorem == Theorem::SingleEdge {
                term("eigenvalue cap", gap.min((-0.5f64).exp()) / (2f64.sqrt() * (degree + 2.0)))
            } else {
                term("eigenvalue cap", gap / (2f64.sqrt() * degree))
            };
            (Some(p.entropy), p.exact, vec![term("kappa * packing entropy", kappa * (p.entropy / nf).sqrt()), cap])
        }
        Theorem::MultiEdgePacking => {
            let p = packing_entropy(c, radius)?;
            let a0 = c.base().adjacency_matrix();
            let u = c.max_set_size() as f64;
            let terms = vec![
                term("kappa * packing entropy", kappa * (p.entropy / (nf * u)).sqrt()),
                term("kappa * spectral cap", kappa / (u * (spectral_radius(&a0)? + 2.0 * u))),
                term("degree cap", gap / (4.0 * (one_norm(&a0) + 2.0 * u))),
            ];
            (Some(p.entropy), p.exact, terms)
        }
        Theorem::Buffer => {
            let b = buffer_entropy(c, BufferMethod::Auto)?;
            let st = divider_stats(c)?;
            let r = st.edge_node_ratio;
            let entropy_term = b.entropy.map_or(f64::INFINITY, |m| (m / (4.0 * nf * r)).sqrt());
            let terms = vec![
                term("buffer entropy", entropy_term),
                term("ratio cap", (r / st.b).sqrt()),
                term("degree cap", gap / (2.0 * 2f64.sqrt() * st.gamma)),
            ];
            (b.entropy, b.standard_error.is_none() && st.exact, terms)
        }
    };
    let binding = terms
        .iter()
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .expect("at least two terms");
    Ok(ThresholdReport {
        theorem,
        entropy,
        entropy_exact,
        threshold: binding.value,
        binding: binding.label.clone(),
        terms,
    })
}
