//! Shared domain model: character-state pairs, frequency tensors, state
//! trees, clone trees and usage matrices.
//!
//! Conventions used throughout the crate:
//!
//! * state `0` of every character is the root state, and all `(c, 0)` pairs
//!   alias one distinguished root vertex;
//! * state counts may differ per character (`k_c`); a character's states are
//!   always the compact range `0..k_c`;
//! * vertices sort by `(character, state)` with the root first, and every
//!   iteration follows that order so outputs are reproducible.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::rational::{format_exact, Rational};
use num_traits::{One, Signed, Zero};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("negative entry f[{sample}][{character}][{state}]")]
    NegativeEntry { sample: usize, character: usize, state: usize },
    #[error("frequencies of sample {sample}, character {character} sum to {sum}, expected 1")]
    RowSumMismatch { sample: usize, character: usize, sum: String },
    #[error("state {state} unknown for character {character}")]
    UnknownState { character: usize, state: usize },
    #[error("character {0} out of range")]
    UnknownCharacter(usize),
    #[error("malformed state tree: {0}")]
    MalformedStateTree(String),
    #[error("malformed clone tree: {0}")]
    MalformedTree(String),
    #[error("clone tree is not complete")]
    IncompleteTree,
    #[error("clone tree is inconsistent with the state trees: {0}")]
    InconsistentTree(String),
    #[error("invalid usage matrix: {0}")]
    InvalidUsage(String),
    #[error("empty interval for f[{sample}][{character}][{state}]")]
    EmptyInterval { sample: usize, character: usize, state: usize },
    #[error("interval tensor requires upper bound 1 for state 0 (sample {sample}, character {character})")]
    RootUpperNotOne { sample: usize, character: usize },
}

/// A `(character, state)` pair. State 0 aliases the root vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CharStatePair {
    pub character: usize,
    pub state: usize,
}

impl CharStatePair {
    pub fn new(character: usize, state: usize) -> Self {
        CharStatePair { character, state }
    }
}

impl fmt::Display for CharStatePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.character, self.state)
    }
}

/// A clone-tree vertex: the merged root or a non-root character-state pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Vertex {
    Root,
    Pair(CharStatePair),
}

impl Vertex {
    /// Normalizing constructor: `(c, 0)` becomes the root for every `c`.
    pub fn new(character: usize, state: usize) -> Self {
        if state == 0 {
            Vertex::Root
        } else {
            Vertex::Pair(CharStatePair::new(character, state))
        }
    }

    pub fn pair(&self) -> Option<CharStatePair> {
        match self {
            Vertex::Root => None,
            Vertex::Pair(p) => Some(*p),
        }
    }

    pub fn is_root(&self) -> bool {
        matches!(self, Vertex::Root)
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Vertex::Root => write!(f, "*"),
            Vertex::Pair(p) => write!(f, "{p}"),
        }
    }
}

/// Rooted tree over one character's states. States are `0..k`, rooted at 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateTree {
    character: usize,
    parent: Vec<Option<usize>>,
}

impl StateTree {
    /// `parent[i]` is the parent state of state `i`; `parent[0]` must be `None`.
    pub fn new(character: usize, parent: Vec<Option<usize>>) -> Result<Self, ModelError> {
        let k = parent.len();
        if k == 0 {
            return Err(ModelError::MalformedStateTree("no states".into()));
        }
        if parent[0].is_some() {
            return Err(ModelError::MalformedStateTree("state 0 must be the root".into()));
        }
        for (i, p) in parent.iter().enumerate().skip(1) {
            match p {
                None => {
                    return Err(ModelError::MalformedStateTree(format!(
                        "state {i} has no parent"
                    )))
                }
                Some(p) if *p >= k => {
                    return Err(ModelError::MalformedStateTree(format!(
                        "state {i} has out-of-range parent {p}"
                    )))
                }
                _ => {}
            }
        }
        // Walking up from every state must reach the root without revisits.
        for start in 1..k {
            let mut seen = vec![false; k];
            let mut cur = start;
            while let Some(p) = parent[cur] {
                if seen[cur] {
                    return Err(ModelError::MalformedStateTree(format!(
                        "cycle through state {start}"
                    )));
                }
                seen[cur] = true;
                cur = p;
            }
            if cur != 0 {
                return Err(ModelError::MalformedStateTree(format!(
                    "state {start} is not connected to the root"
                )));
            }
        }
        Ok(StateTree { character, parent })
    }

    /// Chain 0 → 1 → … → k−1.
    pub fn chain(character: usize, k: usize) -> Self {
        let parent = (0..k).map(|i| if i == 0 { None } else { Some(i - 1) }).collect();
        StateTree::new(character, parent).expect("chain is well formed")
    }

    pub fn character(&self) -> usize {
        self.character
    }

    pub fn state_count(&self) -> usize {
        self.parent.len()
    }

    pub fn states(&self) -> impl Iterator<Item = usize> {
        0..self.parent.len()
    }

    pub fn parent_of(&self, state: usize) -> Result<Option<usize>, ModelError> {
        self.parent
            .get(state)
            .copied()
            .ok_or(ModelError::UnknownState { character: self.character, state })
    }

    pub fn parent_slice(&self) -> &[Option<usize>] {
        &self.parent
    }

    /// States at or below `state`, computed by traversal.
    pub fn descendant_set(&self, state: usize) -> Result<DescendantSet, ModelError> {
        if state >= self.parent.len() {
            return Err(ModelError::UnknownState { character: self.character, state });
        }
        let k = self.parent.len();
        let mut below = BTreeSet::new();
        below.insert(state);
        // Repeatedly sweep: a state joins once its parent is in. k is tiny.
        let mut changed = true;
        while changed {
            changed = false;
            for i in 0..k {
                if !below.contains(&i) {
                    if let Some(p) = self.parent[i] {
                        if below.contains(&p) {
                            below.insert(i);
                            changed = true;
                        }
                    }
                }
            }
        }
        Ok(DescendantSet { character: self.character, anchor: state, states: below })
    }

    /// Children of `state` in this state tree.
    pub fn children_of(&self, state: usize) -> Vec<usize> {
        (0..self.parent.len()).filter(|&i| self.parent[i] == Some(state)).collect()
    }
}

/// The set of states of one character at or below some anchor state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DescendantSet {
    pub character: usize,
    pub anchor: usize,
    pub states: BTreeSet<usize>,
}

impl fmt::Display for DescendantSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let body: Vec<String> = self.states.iter().map(|s| s.to_string()).collect();
        write!(f, "{{{}}}", body.join(","))
    }
}

/// One state tree per character.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateTreeSet {
    trees: Vec<StateTree>,
}

impl StateTreeSet {
    pub fn new(trees: Vec<StateTree>) -> Result<Self, ModelError> {
        for (c, t) in trees.iter().enumerate() {
            if t.character() != c {
                return Err(ModelError::MalformedStateTree(format!(
                    "state tree at position {c} is labeled for character {}",
                    t.character()
                )));
            }
        }
        Ok(StateTreeSet { trees })
    }

    pub fn character_count(&self) -> usize {
        self.trees.len()
    }

    pub fn tree(&self, character: usize) -> Result<&StateTree, ModelError> {
        self.trees.get(character).ok_or(ModelError::UnknownCharacter(character))
    }

    pub fn trees(&self) -> &[StateTree] {
        &self.trees
    }

    pub fn state_counts(&self) -> Vec<usize> {
        self.trees.iter().map(|t| t.state_count()).collect()
    }

    /// Total number of clone-tree vertices: one root plus every non-root pair.
    pub fn vertex_count(&self) -> usize {
        1 + self.trees.iter().map(|t| t.state_count() - 1).sum::<usize>()
    }
}

/// Per-sample, per-character, per-state observed mixture proportions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyTensor {
    state_counts: Vec<usize>,
    /// `f[p][c][i]`
    f: Vec<Vec<Vec<Rational>>>,
}

impl FrequencyTensor {
    pub fn new(state_counts: Vec<usize>, f: Vec<Vec<Vec<Rational>>>) -> Result<Self, ModelError> {
        for row in &f {
            if row.len() != state_counts.len() {
                return Err(ModelError::MalformedTree(
                    "tensor sample has wrong character count".into(),
                ));
            }
            for (c, states) in row.iter().enumerate() {
                if states.len() != state_counts[c] {
                    return Err(ModelError::UnknownState { character: c, state: states.len() });
                }
            }
        }
        Ok(FrequencyTensor { state_counts, f })
    }

    pub fn sample_count(&self) -> usize {
        self.f.len()
    }

    pub fn character_count(&self) -> usize {
        self.state_counts.len()
    }

    pub fn state_counts(&self) -> &[usize] {
        &self.state_counts
    }

    pub fn get(&self, sample: usize, character: usize, state: usize) -> &Rational {
        &self.f[sample][character][state]
    }

    pub fn rows(&self) -> &[Vec<Vec<Rational>>] {
        &self.f
    }

    /// Both frequency-tensor invariants: nonnegativity and unit row sums.
    pub fn validate(&self) -> Result<(), ModelError> {
        for (p, row) in self.f.iter().enumerate() {
            for (c, states) in row.iter().enumerate() {
                let mut sum = Rational::zero();
                for (i, v) in states.iter().enumerate() {
                    if v.is_negative() {
                        return Err(ModelError::NegativeEntry { sample: p, character: c, state: i });
                    }
                    sum += v;
                }
                if !sum.is_one() {
                    return Err(ModelError::RowSumMismatch {
                        sample: p,
                        character: c,
                        sum: format_exact(&sum),
                    });
                }
            }
        }
        Ok(())
    }

    /// Cumulative frequency `f⁺_p(D)`: the exact sum over a descendant set.
    pub fn cumulative(&self, sample: usize, dset: &DescendantSet) -> Result<Rational, ModelError> {
        let c = dset.character;
        let states = self
            .f
            .get(sample)
            .and_then(|row| row.get(c))
            .ok_or(ModelError::UnknownCharacter(c))?;
        let mut sum = Rational::zero();
        for &s in &dset.states {
            sum += states.get(s).ok_or(ModelError::UnknownState { character: c, state: s })?;
        }
        Ok(sum)
    }
}

/// Entrywise interval bounds on an unobserved frequency tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyIntervalTensor {
    state_counts: Vec<usize>,
    lower: Vec<Vec<Vec<Rational>>>,
    upper: Vec<Vec<Vec<Rational>>>,
}

impl FrequencyIntervalTensor {
    pub fn new(
        state_counts: Vec<usize>,
        lower: Vec<Vec<Vec<Rational>>>,
        upper: Vec<Vec<Vec<Rational>>>,
    ) -> Result<Self, ModelError> {
        let lo = FrequencyTensor::new(state_counts.clone(), lower)?;
        let hi = FrequencyTensor::new(state_counts.clone(), upper)?;
        let (lower, upper) = (lo.f, hi.f);
        let t = FrequencyIntervalTensor { state_counts, lower, upper };
        t.validate()?;
        Ok(t)
    }

    pub fn sample_count(&self) -> usize {
        self.lower.len()
    }

    pub fn character_count(&self) -> usize {
        self.state_counts.len()
    }

    pub fn state_counts(&self) -> &[usize] {
        &self.state_counts
    }

    pub fn lower(&self, sample: usize, character: usize, state: usize) -> &Rational {
        &self.lower[sample][character][state]
    }

    pub fn upper(&self, sample: usize, character: usize, state: usize) -> &Rational {
        &self.upper[sample][character][state]
    }

    pub fn lower_rows(&self) -> &[Vec<Vec<Rational>>] {
        &self.lower
    }

    pub fn upper_rows(&self) -> &[Vec<Vec<Rational>>] {
        &self.upper
    }

    fn validate(&self) -> Result<(), ModelError> {
        let one = Rational::one();
        for (p, (lrow, urow)) in self.lower.iter().zip(&self.upper).enumerate() {
            for (c, (ls, us)) in lrow.iter().zip(urow).enumerate() {
                for (i, (l, u)) in ls.iter().zip(us).enumerate() {
                    if l.is_negative() {
                        return Err(ModelError::NegativeEntry { sample: p, character: c, state: i });
                    }
                    if l > u || u > &one {
                        return Err(ModelError::EmptyInterval { sample: p, character: c, state: i });
                    }
                }
            }
        }
        Ok(())
    }

    /// The noisy enumeration additionally requires `u[p][c][0] = 1`.
    pub fn validate_for_noisy(&self) -> Result<(), ModelError> {
        for (p, urow) in self.upper.iter().enumerate() {
            for (c, us) in urow.iter().enumerate() {
                if !us[0].is_one() {
                    return Err(ModelError::RootUpperNotOne { sample: p, character: c });
                }
            }
        }
        Ok(())
    }

    /// Point intervals around an exact tensor, with the state-0 upper bound
    /// lifted to 1 as the noisy algorithm requires.
    pub fn from_point(f: &FrequencyTensor) -> Self {
        let lower = f.f.clone();
        let mut upper = f.f.clone();
        for row in &mut upper {
            for states in row.iter_mut() {
                states[0] = Rational::one();
            }
        }
        FrequencyIntervalTensor { state_counts: f.state_counts.clone(), lower, upper }
    }
}

/// Rooted clone tree: non-root vertices are character-state pairs, each
/// mapped to its parent vertex.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CloneTree {
    parent: BTreeMap<CharStatePair, Vertex>,
}

impl CloneTree {
    pub fn root_only() -> Self {
        CloneTree { parent: BTreeMap::new() }
    }

    pub fn from_parent_map(parent: BTreeMap<CharStatePair, Vertex>) -> Result<Self, ModelError> {
        for (child, par) in &parent {
            if child.state == 0 {
                return Err(ModelError::MalformedTree(format!(
                    "state-0 pair {child} cannot be a non-root vertex"
                )));
            }
            if let Vertex::Pair(p) = par {
                if !parent.contains_key(p) {
                    return Err(ModelError::MalformedTree(format!(
                        "vertex {child} hangs from absent vertex {p}"
                    )));
                }
                if p == child {
                    return Err(ModelError::MalformedTree(format!("self-loop at {child}")));
                }
            }
        }
        let tree = CloneTree { parent };
        // Every vertex must reach the root.
        for child in tree.parent.keys() {
            let mut steps = 0usize;
            let mut cur = Vertex::Pair(*child);
            while let Vertex::Pair(p) = cur {
                cur = tree.parent[&p];
                steps += 1;
                if steps > tree.parent.len() {
                    return Err(ModelError::MalformedTree(format!("cycle through {child}")));
                }
            }
        }
        Ok(tree)
    }

    pub fn from_edges(edges: impl IntoIterator<Item = (Vertex, Vertex)>) -> Result<Self, ModelError> {
        let mut parent = BTreeMap::new();
        for (par, child) in edges {
            let child = match child {
                Vertex::Root => {
                    return Err(ModelError::MalformedTree("edge into the root".into()))
                }
                Vertex::Pair(p) => p,
            };
            if parent.insert(child, par).is_some() {
                return Err(ModelError::MalformedTree(format!("vertex {child} has two parents")));
            }
        }
        CloneTree::from_parent_map(parent)
    }

    pub fn vertex_count(&self) -> usize {
        self.parent.len() + 1
    }

    pub fn contains(&self, v: Vertex) -> bool {
        match v {
            Vertex::Root => true,
            Vertex::Pair(p) => self.parent.contains_key(&p),
        }
    }

    pub fn parent_of(&self, p: CharStatePair) -> Option<Vertex> {
        self.parent.get(&p).copied()
    }

    /// Non-root vertices in canonical order.
    pub fn pairs(&self) -> impl Iterator<Item = CharStatePair> + '_ {
        self.parent.keys().copied()
    }

    /// All vertices, root first, in canonical order.
    pub fn vertices(&self) -> Vec<Vertex> {
        let mut vs = vec![Vertex::Root];
        vs.extend(self.parent.keys().map(|p| Vertex::Pair(*p)));
        vs
    }

    /// Edges sorted by child pair (children are unique, so this is canonical).
    pub fn edges(&self) -> Vec<(Vertex, Vertex)> {
        self.parent.iter().map(|(c, p)| (*p, Vertex::Pair(*c))).collect()
    }

    pub fn children(&self, v: Vertex) -> Vec<Vertex> {
        self.parent
            .iter()
            .filter(|(_, p)| **p == v)
            .map(|(c, _)| Vertex::Pair(*c))
            .collect()
    }

    /// Present states of `character`, excluding state 0.
    pub fn states_of(&self, character: usize) -> BTreeSet<usize> {
        self.parent
            .keys()
            .filter(|p| p.character == character)
            .map(|p| p.state)
            .collect()
    }

    /// The state of `character` at the nearest vertex labeled by it on the
    /// path from `v` (inclusive) up to the root; 0 when only the root is.
    pub fn nearest_state_above(&self, v: Vertex, character: usize) -> usize {
        let mut cur = v;
        loop {
            match cur {
                Vertex::Root => return 0,
                Vertex::Pair(p) => {
                    if p.character == character {
                        return p.state;
                    }
                    cur = self.parent[&p];
                }
            }
        }
    }

    /// Contains every non-root pair of every state tree.
    pub fn is_complete(&self, s: &StateTreeSet) -> bool {
        if s.vertex_count() != self.vertex_count() {
            return false;
        }
        for t in s.trees() {
            for state in 1..t.state_count() {
                if !self.parent.contains_key(&CharStatePair::new(t.character(), state)) {
                    return false;
                }
            }
        }
        true
    }

    /// Consistency with the state trees: for every vertex `(c, i)` the
    /// nearest `c`-labeled strict ancestor carries state `π(i)`.
    pub fn check_consistent(&self, s: &StateTreeSet) -> Result<(), ModelError> {
        for (child, par) in &self.parent {
            let t = s.tree(child.character)?;
            let expected = t
                .parent_of(child.state)?
                .ok_or_else(|| ModelError::InconsistentTree(format!("{child} labels the root state")))?;
            let actual = self.nearest_state_above(*par, child.character);
            if actual != expected {
                return Err(ModelError::InconsistentTree(format!(
                    "nearest {}-ancestor of {child} has state {actual}, expected {expected}",
                    child.character
                )));
            }
        }
        Ok(())
    }

    /// Whether `anc` is an ancestor of `desc` (reflexive).
    pub fn is_ancestor(&self, anc: Vertex, desc: Vertex) -> bool {
        let mut cur = desc;
        loop {
            if cur == anc {
                return true;
            }
            match cur {
                Vertex::Root => return false,
                Vertex::Pair(p) => cur = self.parent[&p],
            }
        }
    }

    /// True when every edge of `self` also appears in `other`.
    pub fn is_subtree_of(&self, other: &CloneTree) -> bool {
        self.parent.iter().all(|(c, p)| other.parent.get(c) == Some(p))
    }

    /// Reconstruct the state-tree parent of each present state from the tree
    /// structure (for a consistent tree this recovers the state trees).
    pub fn implied_state_parent(&self, p: CharStatePair) -> usize {
        self.nearest_state_above(self.parent[&p], p.character)
    }
}

/// Per-sample mixing proportions over clone-tree vertices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageMatrix {
    vertices: Vec<Vertex>,
    /// `u[p][column]` in the order of `vertices`.
    u: Vec<Vec<Rational>>,
}

impl UsageMatrix {
    pub fn new(vertices: Vec<Vertex>, u: Vec<Vec<Rational>>) -> Result<Self, ModelError> {
        for row in &u {
            if row.len() != vertices.len() {
                return Err(ModelError::InvalidUsage("row length mismatch".into()));
            }
        }
        if vertices.first() != Some(&Vertex::Root) {
            return Err(ModelError::InvalidUsage("first column must be the root".into()));
        }
        Ok(UsageMatrix { vertices, u })
    }

    pub fn sample_count(&self) -> usize {
        self.u.len()
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn rows(&self) -> &[Vec<Rational>] {
        &self.u
    }

    pub fn get(&self, sample: usize, v: Vertex) -> Option<&Rational> {
        let col = self.vertices.iter().position(|x| *x == v)?;
        self.u.get(sample).map(|row| &row[col])
    }

    /// Nonnegative entries and unit row sums.
    pub fn validate(&self) -> Result<(), ModelError> {
        for (p, row) in self.u.iter().enumerate() {
            let mut sum = Rational::zero();
            for (v, x) in self.vertices.iter().zip(row) {
                if x.is_negative() {
                    return Err(ModelError::InvalidUsage(format!(
                        "negative usage of {v} in sample {p}"
                    )));
                }
                sum += x;
            }
            if !sum.is_one() {
                return Err(ModelError::InvalidUsage(format!(
                    "sample {p} usages sum to {}",
                    format_exact(&sum)
                )));
            }
        }
        Ok(())
    }

    pub fn all_nonnegative(&self) -> bool {
        self.u.iter().all(|row| row.iter().all(|x| !x.is_negative()))
    }

    /// TSV rendering: one row per sample, columns in canonical vertex order.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("sample");
        for v in &self.vertices {
            out.push('\t');
            out.push_str(&v.to_string());
        }
        out.push('\n');
        for (p, row) in self.u.iter().enumerate() {
            out.push_str(&p.to_string());
            for x in row {
                out.push('\t');
                out.push_str(&format_exact(x));
            }
            out.push('\n');
        }
        out
    }
}

/// Dense vertex indexing for one instance: id 0 is the root, pair `(c, i)`
/// (with `i ≥ 1`) gets a contiguous id. Iteration order over ids equals the
/// canonical `(character, state)` order.
#[derive(Debug, Clone)]
pub struct VertexSpace {
    state_counts: Vec<usize>,
    offsets: Vec<usize>,
    total: usize,
}

impl VertexSpace {
    pub fn new(state_counts: Vec<usize>) -> Self {
        let mut offsets = Vec::with_capacity(state_counts.len());
        let mut next = 1usize;
        for &k in &state_counts {
            offsets.push(next);
            next += k.saturating_sub(1);
        }
        VertexSpace { state_counts, offsets, total: next }
    }

    pub fn from_state_trees(s: &StateTreeSet) -> Self {
        VertexSpace::new(s.state_counts())
    }

    pub fn vertex_count(&self) -> usize {
        self.total
    }

    pub fn character_count(&self) -> usize {
        self.state_counts.len()
    }

    pub fn state_counts(&self) -> &[usize] {
        &self.state_counts
    }

    pub const ROOT: usize = 0;

    pub fn id_of(&self, v: Vertex) -> usize {
        match v {
            Vertex::Root => 0,
            Vertex::Pair(p) => {
                debug_assert!(p.state >= 1 && p.state < self.state_counts[p.character]);
                self.offsets[p.character] + p.state - 1
            }
        }
    }

    pub fn vertex_of(&self, id: usize) -> Vertex {
        if id == 0 {
            return Vertex::Root;
        }
        // Characters are few; a linear scan keeps this allocation free.
        for (c, &off) in self.offsets.iter().enumerate() {
            let span = self.state_counts[c] - 1;
            if id >= off && id < off + span {
                return Vertex::Pair(CharStatePair::new(c, id - off + 1));
            }
        }
        panic!("vertex id {id} out of range");
    }

    pub fn ids(&self) -> impl Iterator<Item = usize> {
        0..self.total
    }
}

/// State-vector matrix of a complete clone tree: one row per vertex, the
/// root row all zeros, and each other row equal to its parent's row with the
/// vertex's own character set to its state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateMatrix {
    pub vertices: Vec<Vertex>,
    /// `rows[v][c]` is the state of character `c` at vertex `vertices[v]`.
    pub rows: Vec<Vec<usize>>,
}

impl StateMatrix {
    /// Binary expansion `[A_0 … A_{k-1}]` generalized to per-character state
    /// counts: one 0/1 column per `(character, state)` pair.
    pub fn binary_expansion(&self, state_counts: &[usize]) -> Vec<Vec<u8>> {
        let width: usize = state_counts.iter().sum();
        self.rows
            .iter()
            .map(|row| {
                let mut out = vec![0u8; width];
                let mut col = 0usize;
                for (c, &k) in state_counts.iter().enumerate() {
                    out[col + row[c]] = 1;
                    col += k;
                }
                out
            })
            .collect()
    }
}

/// Map a complete clone tree to its state-vector matrix.
pub fn tree_to_matrix(t: &CloneTree, s: &StateTreeSet) -> Result<StateMatrix, ModelError> {
    if !t.is_complete(s) {
        return Err(ModelError::IncompleteTree);
    }
    let n = s.character_count();
    let vertices = t.vertices();
    let index: BTreeMap<Vertex, usize> = vertices.iter().copied().zip(0..).collect();
    let mut rows: Vec<Option<Vec<usize>>> = vec![None; vertices.len()];
    rows[0] = Some(vec![0; n]);
    // Vertices in BFS order from the root so parents are filled first.
    let mut queue = vec![Vertex::Root];
    while let Some(v) = queue.pop() {
        let row = rows[index[&v]].clone().expect("parent row filled");
        for child in t.children(v) {
            let p = child.pair().expect("children are pairs");
            let mut crow = row.clone();
            crow[p.character] = p.state;
            rows[index[&child]] = Some(crow);
            queue.push(child);
        }
    }
    let rows = rows.into_iter().map(|r| r.expect("tree is connected")).collect();
    Ok(StateMatrix { vertices, rows })
}
