//! The usage equation: recover mixing proportions from a tensor and a tree,
//! test generation, and mix usages forward into a tensor.

use std::collections::BTreeMap;

use num_traits::{One, Zero};

use crate::model::{
    CharStatePair, CloneTree, FrequencyTensor, ModelError, StateTreeSet, UsageMatrix, Vertex,
};
use crate::rational::Rational;

/// Usage of every tree vertex in every sample:
/// `u_{p,(c,i)} = f⁺_p(D_(c,i)) − Σ_{(d,j) ∈ δ(c,i)} f⁺_p(D_(d,j))`.
///
/// Entries may be negative when `t` does not generate `f`; no clamping is
/// applied so callers can distinguish "not a generator" from bad input.
pub fn compute_usage(
    f: &FrequencyTensor,
    t: &CloneTree,
    s: &StateTreeSet,
) -> Result<UsageMatrix, ModelError> {
    t.check_consistent(s)?;
    let vertices = t.vertices();
    let m = f.sample_count();

    // Cache f⁺ per vertex per sample with one pass.
    let mut fplus: Vec<Vec<Rational>> = Vec::with_capacity(m);
    for p in 0..m {
        let mut row = Vec::with_capacity(vertices.len());
        for v in &vertices {
            let val = match v {
                Vertex::Root => Rational::one(),
                Vertex::Pair(pair) => {
                    let d = s.tree(pair.character)?.descendant_set(pair.state)?;
                    f.cumulative(p, &d)?
                }
            };
            row.push(val);
        }
        fplus.push(row);
    }

    let index: BTreeMap<Vertex, usize> = vertices.iter().copied().zip(0..).collect();
    let mut rows = Vec::with_capacity(m);
    for p in 0..m {
        let mut row = fplus[p].clone();
        for (vi, v) in vertices.iter().enumerate() {
            for child in t.children(*v) {
                let ci = index[&child];
                let sub = fplus[p][ci].clone();
                row[vi] -= sub;
            }
        }
        rows.push(row);
    }
    UsageMatrix::new(vertices, rows)
}

/// `t` generates `f` iff every entry of the usage matrix is nonnegative
/// (unit row sums then follow automatically).
pub fn generates(
    f: &FrequencyTensor,
    t: &CloneTree,
    s: &StateTreeSet,
) -> Result<bool, ModelError> {
    Ok(compute_usage(f, t, s)?.all_nonnegative())
}

/// Mix tree vertices according to `u`: the frequency of `(c, i)` is the
/// usage mass of the vertices whose state vector has state `i` for `c`.
///
/// The per-character state structure is implied by the tree itself, so a
/// complete consistent tree reproduces its instance's state counts.
pub fn mix(t: &CloneTree, u: &UsageMatrix) -> Result<FrequencyTensor, ModelError> {
    u.validate()?;
    let vertices = t.vertices();
    if u.vertices() != vertices.as_slice() {
        return Err(ModelError::InvalidUsage(
            "usage columns do not match the tree's vertices".into(),
        ));
    }
    let index: BTreeMap<Vertex, usize> = vertices.iter().copied().zip(0..).collect();

    // Character layout implied by the tree: states 1..k_c must be present.
    let n = vertices
        .iter()
        .filter_map(|v| v.pair())
        .map(|p| p.character + 1)
        .max()
        .unwrap_or(0);
    let mut state_counts = vec![1usize; n];
    for v in &vertices {
        if let Some(p) = v.pair() {
            state_counts[p.character] = state_counts[p.character].max(p.state + 1);
        }
    }
    for (c, &k) in state_counts.iter().enumerate() {
        let present = t.states_of(c);
        if present.len() != k - 1 {
            return Err(ModelError::UnknownState { character: c, state: k });
        }
    }

    let m = u.sample_count();
    let mut out = vec![vec![Vec::new(); n]; m];
    for p in 0..m {
        // Subtree mass below each vertex (inclusive), bottom-up.
        let mut mass: Vec<Rational> = u.rows()[p].clone();
        // Vertices sorted by depth descending so children accumulate first.
        let mut by_depth: Vec<(usize, Vertex)> = vertices
            .iter()
            .map(|v| {
                let mut d = 0usize;
                let mut cur = *v;
                while let Vertex::Pair(q) = cur {
                    cur = t.parent_of(q).unwrap();
                    d += 1;
                }
                (d, *v)
            })
            .collect();
        by_depth.sort_by(|a, b| b.0.cmp(&a.0));
        for (_, v) in &by_depth {
            if let Vertex::Pair(q) = v {
                let par = t.parent_of(*q).unwrap();
                let add = mass[index[v]].clone();
                mass[index[&par]] += add;
            }
        }

        for (c, &k) in state_counts.iter().enumerate() {
            let mut row = vec![Rational::zero(); k];
            for i in 1..k {
                let v = Vertex::new(c, i);
                let mut val = mass[index[&v]].clone();
                for j in 1..k {
                    if j != i && t.implied_state_parent(CharStatePair::new(c, j)) == i {
                        val -= &mass[index[&Vertex::new(c, j)]];
                    }
                }
                row[i] = val;
            }
            let mut zero_mass = Rational::one();
            for j in 1..k {
                if t.implied_state_parent(CharStatePair::new(c, j)) == 0 {
                    zero_mass -= &mass[index[&Vertex::new(c, j)]];
                }
            }
            row[0] = zero_mass;
            out[p][c] = row;
        }
    }
    FrequencyTensor::new(state_counts, out)
}
