//! Solution-space evaluation: edge concordance against a reference tree,
//! union summaries with per-edge occurrence counts, and representative-tree
//! selection.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::enumerate::SolutionSet;
use crate::model::{CloneTree, Vertex};
use crate::rational::{to_f64, Rational};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("empty solution set")]
    EmptySolutionSet,
}

/// Fraction of the reference tree's edges recovered by a solution.
/// Vertices missing from the solution simply count as unrecovered edges.
pub fn concordance(t_true: &CloneTree, t_sol: &CloneTree) -> Rational {
    let true_edges = t_true.edges();
    if true_edges.is_empty() {
        return Rational::from_integer(1.into());
    }
    let sol_edges = t_sol.edges();
    let shared = true_edges.iter().filter(|e| sol_edges.contains(e)).count();
    Rational::new((shared as i64).into(), (true_edges.len() as i64).into())
}

/// Union graph over all solutions with per-edge occurrence counts.
#[derive(Debug, Clone)]
pub struct SolutionSummary {
    pub counts: BTreeMap<(Vertex, Vertex), usize>,
    pub total: usize,
}

pub fn summarize(solutions: &SolutionSet) -> Result<SolutionSummary, MetricsError> {
    if solutions.is_empty() {
        return Err(MetricsError::EmptySolutionSet);
    }
    let mut counts = BTreeMap::new();
    for sol in &solutions.solutions {
        for e in sol.tree.edges() {
            *counts.entry(e).or_insert(0usize) += 1;
        }
    }
    Ok(SolutionSummary { counts, total: solutions.len() })
}

impl SolutionSummary {
    /// DOT rendering: edges labeled by occurrence count; edges of the
    /// optional reference tree drawn red.
    pub fn to_dot(&self, reference: Option<&CloneTree>) -> String {
        let mut vertices: Vec<Vertex> = Vec::new();
        for (a, b) in self.counts.keys() {
            for v in [a, b] {
                if !vertices.contains(v) {
                    vertices.push(*v);
                }
            }
        }
        vertices.sort();
        let ref_edges = reference.map(|t| t.edges());
        let mut s = String::from("digraph solutions {\n  rankdir=TB;\n");
        let idx = |v: &Vertex| vertices.iter().position(|x| x == v).unwrap();
        for v in &vertices {
            s.push_str(&format!("  v{} [label=\"{v}\"];\n", idx(v)));
        }
        for ((a, b), count) in &self.counts {
            let mut attrs = format!("label=\"{count}\"");
            if let Some(re) = &ref_edges {
                if re.contains(&(*a, *b)) {
                    attrs.push_str(", color=red");
                }
            }
            s.push_str(&format!("  v{} -> v{} [{attrs}];\n", idx(a), idx(b)));
        }
        s.push_str("}\n");
        s
    }
}

/// The solution sharing the largest number of edges with the other
/// solutions: maximizes Σ over its edges of (occurrence − 1), ties broken
/// by canonical edge-set order.
pub fn representative(solutions: &SolutionSet) -> Result<&CloneTree, MetricsError> {
    let summary = summarize(solutions)?;
    let mut best: Option<(usize, &CloneTree)> = None;
    for sol in &solutions.solutions {
        let score: usize = sol
            .tree
            .edges()
            .iter()
            .map(|e| summary.counts[e] - 1)
            .sum();
        best = match best {
            None => Some((score, &sol.tree)),
            Some((bs, bt)) => {
                if score > bs || (score == bs && sol.tree.edges() < bt.edges()) {
                    Some((score, &sol.tree))
                } else {
                    Some((bs, bt))
                }
            }
        };
    }
    Ok(best.expect("nonempty").1)
}

/// Plot-ready TSV of per-solution concordances against a reference tree.
pub fn concordance_tsv(t_true: &CloneTree, solutions: &SolutionSet) -> String {
    let mut out = String::from("solution\tconcordance\tconcordance_exact\n");
    for (i, sol) in solutions.solutions.iter().enumerate() {
        let c = concordance(t_true, &sol.tree);
        out.push_str(&format!(
            "{i}\t{:.6}\t{}\n",
            to_f64(&c),
            crate::rational::format_exact(&c)
        ));
    }
    out
}
