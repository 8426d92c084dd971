//! Solution enumeration: exact spanning-tree search and the noisy-interval
//! variant, both Gabow–Myers style backtracking over the ancestry graph.
//!
//! The frontier is a LIFO stack of candidate edges. Every mutation made
//! while an edge is committed (frontier pushes, removals, slack or f-hat
//! updates) is journaled and undone when the edge is retracted, so the
//! frontier and tree state before and after each recursive call are
//! identical. Popped edges stay excluded for the remainder of their frame,
//! which partitions the search space the same way the original algorithm
//! does.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::ancestry::AncestryGraph;
use crate::model::{
    CharStatePair, CloneTree, FrequencyIntervalTensor, FrequencyTensor, ModelError, StateTreeSet,
    UsageMatrix, Vertex,
};
use crate::rational::Rational;

/// One enumerated tree together with its certificate.
#[derive(Debug, Clone)]
pub struct Solution {
    pub tree: CloneTree,
    pub payload: SolutionPayload,
}

#[derive(Debug, Clone)]
pub enum SolutionPayload {
    /// Exact mode: the unique usage matrix.
    Usage(UsageMatrix),
    /// Noisy mode: a witness tensor inside the intervals that the tree
    /// generates.
    Witness(FrequencyTensor),
}

impl Solution {
    pub fn usage(&self) -> Option<&UsageMatrix> {
        match &self.payload {
            SolutionPayload::Usage(u) => Some(u),
            _ => None,
        }
    }

    pub fn witness(&self) -> Option<&FrequencyTensor> {
        match &self.payload {
            SolutionPayload::Witness(w) => Some(w),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SolutionSet {
    pub solutions: Vec<Solution>,
    /// Set when enumeration stopped at the generation limit; more solutions
    /// may exist.
    pub truncated: bool,
}

impl SolutionSet {
    pub fn len(&self) -> usize {
        self.solutions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }

    pub fn contains_tree(&self, t: &CloneTree) -> bool {
        self.solutions.iter().any(|s| &s.tree == t)
    }
}

/// Enumerate every complete clone tree that generates `f` and is consistent
/// with `s` — the threaded spanning trees of the cladistic ancestry graph
/// satisfying the sum condition. An empty result is a valid outcome.
pub fn enumerate(
    g: &AncestryGraph,
    f: &FrequencyTensor,
    s: &StateTreeSet,
    limit: Option<usize>,
) -> Result<SolutionSet, ModelError> {
    if g.is_noisy() {
        return Err(ModelError::MalformedTree(
            "exact enumeration requires a graph built from an exact tensor".into(),
        ));
    }
    if g.space().state_counts() != s.state_counts().as_slice() {
        return Err(ModelError::MalformedTree("graph and state trees disagree".into()));
    }
    if limit == Some(0) {
        return Ok(SolutionSet { solutions: Vec::new(), truncated: true });
    }
    let mut engine = ExactEngine::new(g, limit);
    engine.seed_frontier();
    engine.recurse();
    #[cfg(debug_assertions)]
    engine.verify_emissions(f, s);
    #[cfg(not(debug_assertions))]
    let _ = f;
    Ok(SolutionSet { solutions: engine.out, truncated: engine.truncated })
}

struct ExactEngine<'a> {
    g: &'a AncestryGraph,
    in_tree: Vec<bool>,
    parent: Vec<usize>,
    tree_size: usize,
    /// MSSC slack per in-tree vertex and sample; exactly the usage numerator.
    slack: Vec<Vec<BigInt>>,
    frontier: Vec<(usize, usize)>,
    out: Vec<Solution>,
    limit: Option<usize>,
    truncated: bool,
}

struct FrontierUndo {
    pushed: usize,
    /// `(index, edge)` in ascending index order.
    removed: Vec<(usize, (usize, usize))>,
}

impl<'a> ExactEngine<'a> {
    fn new(g: &'a AncestryGraph, limit: Option<usize>) -> Self {
        let n = g.vertex_count();
        let m = g.sample_count();
        let mut in_tree = vec![false; n];
        in_tree[0] = true;
        let mut slack = vec![vec![BigInt::zero(); m]; n];
        slack[0] = vec![g.denom().clone(); m];
        ExactEngine {
            g,
            in_tree,
            parent: vec![0; n],
            tree_size: 1,
            slack,
            frontier: Vec::new(),
            out: Vec::new(),
            limit,
            truncated: false,
        }
    }

    fn seed_frontier(&mut self) {
        for &x in self.g.out_edges(0) {
            if self.admissible(0, x) {
                self.frontier.push((0, x));
            }
        }
    }

    fn first_char_ok(&self, tail: usize, head: usize) -> bool {
        first_char_ok(self.g, &self.parent, tail, head)
    }

    /// Line-8 admissibility: head outside the tree, the nearest same-character
    /// ancestor of the tail is the head's state-tree parent, and the tail has
    /// enough slack for the head's cumulative frequency in every sample.
    fn admissible(&self, tail: usize, head: usize) -> bool {
        if self.in_tree[head] || !self.first_char_ok(tail, head) {
            return false;
        }
        let fp = &self.g.fplus()[head];
        (0..self.g.sample_count()).all(|p| self.slack[tail][p] >= fp[p])
    }

    fn add_edge(&mut self, tail: usize, head: usize) {
        for p in 0..self.g.sample_count() {
            let sub = self.g.fplus()[head][p].clone();
            self.slack[tail][p] -= &sub;
            self.slack[head][p] = sub;
        }
        self.in_tree[head] = true;
        self.parent[head] = tail;
        self.tree_size += 1;
    }

    fn remove_edge(&mut self, tail: usize, head: usize) {
        for p in 0..self.g.sample_count() {
            let add = self.g.fplus()[head][p].clone();
            self.slack[tail][p] += add;
        }
        self.in_tree[head] = false;
        self.tree_size -= 1;
    }

    /// Restore Invariant 2 after committing `(tail, head)`: drop frontier
    /// edges that now close a cycle or would overdraw the tail's slack, then
    /// push the admissible extensions out of the new head.
    fn update_frontier(&mut self, tail: usize, head: usize) -> FrontierUndo {
        let m = self.g.sample_count();
        let mut removed = Vec::new();
        for (idx, &(t, y)) in self.frontier.iter().enumerate() {
            let cycle = y == head;
            let broke = t == tail
                && (0..m).any(|p| self.slack[tail][p] < self.g.fplus()[y][p]);
            if cycle || broke {
                removed.push((idx, (t, y)));
            }
        }
        for &(idx, _) in removed.iter().rev() {
            self.frontier.remove(idx);
        }
        let before = self.frontier.len();
        for &x in self.g.out_edges(head) {
            if self.admissible(head, x) {
                self.frontier.push((head, x));
            }
        }
        FrontierUndo { pushed: self.frontier.len() - before, removed }
    }

    fn undo_frontier(&mut self, undo: FrontierUndo) {
        self.frontier.truncate(self.frontier.len() - undo.pushed);
        for (idx, edge) in undo.removed {
            self.frontier.insert(idx, edge);
        }
    }

    fn recurse(&mut self) {
        #[cfg(debug_assertions)]
        self.assert_invariants();
        if self.frontier.is_empty() {
            if self.tree_size == self.g.vertex_count() {
                self.emit();
            }
            return;
        }
        let mut popped = Vec::new();
        while let Some((tail, head)) = self.frontier.pop() {
            if !self.truncated {
                self.add_edge(tail, head);
                let undo = self.update_frontier(tail, head);
                self.recurse();
                self.undo_frontier(undo);
                self.remove_edge(tail, head);
            }
            popped.push((tail, head));
        }
        while let Some(e) = popped.pop() {
            self.frontier.push(e);
        }
    }

    fn emit(&mut self) {
        if self.truncated {
            return;
        }
        let tree = tree_from_arrays(self.g, &self.in_tree, &self.parent);
        let vertices: Vec<Vertex> =
            self.g.space().ids().map(|id| self.g.space().vertex_of(id)).collect();
        let rows: Vec<Vec<Rational>> = (0..self.g.sample_count())
            .map(|p| {
                self.g
                    .space()
                    .ids()
                    .map(|id| Rational::new(self.slack[id][p].clone(), self.g.denom().clone()))
                    .collect()
            })
            .collect();
        let usage = UsageMatrix::new(vertices, rows).expect("slacks form a usage matrix");
        self.out.push(Solution { tree, payload: SolutionPayload::Usage(usage) });
        if Some(self.out.len()) == self.limit {
            self.truncated = true;
        }
    }

    #[cfg(debug_assertions)]
    fn assert_invariants(&self) {
        let m = self.g.sample_count();
        for v in 1..self.g.vertex_count() {
            if self.in_tree[v] {
                // Invariant 1(1): nearest same-character ancestor.
                assert!(
                    self.first_char_ok_committed(v),
                    "invariant 1 violated at vertex {v}"
                );
                // Invariant 1(2): MSSC slack nonnegative.
                for p in 0..m {
                    assert!(self.slack[v][p] >= BigInt::zero(), "negative slack at {v}");
                }
            }
        }
        for &(t, y) in &self.frontier {
            assert!(self.in_tree[t] && !self.in_tree[y], "invariant 2 tail/head");
            assert!(self.admissible(t, y), "invariant 2 extension validity");
        }
    }

    #[cfg(debug_assertions)]
    fn first_char_ok_committed(&self, v: usize) -> bool {
        first_char_ok(self.g, &self.parent, self.parent[v], v)
    }

    #[cfg(debug_assertions)]
    fn verify_emissions(&self, f: &FrequencyTensor, s: &StateTreeSet) {
        // Post-hoc re-verification through the independent predicates.
        for sol in &self.out {
            assert!(sol.tree.is_complete(s));
            assert!(crate::ancestry::check_mssc(f, &sol.tree, s).unwrap());
            for (par, child) in sol.tree.edges() {
                assert!(self.g.has_edge(par, child));
            }
        }
    }
}

fn first_char_ok(g: &AncestryGraph, parent: &[usize], tail: usize, head: usize) -> bool {
    let hp = g.space().vertex_of(head).pair().expect("heads are pairs");
    let want = g.state_parent_id(head);
    let mut cur = tail;
    loop {
        if cur == 0 {
            return want == 0;
        }
        let cp = g.space().vertex_of(cur).pair().unwrap();
        if cp.character == hp.character {
            return cur == want;
        }
        cur = parent[cur];
    }
}

fn tree_from_arrays(g: &AncestryGraph, in_tree: &[bool], parent: &[usize]) -> CloneTree {
    let mut map = BTreeMap::new();
    for v in 1..g.vertex_count() {
        if in_tree[v] {
            let pair = g.space().vertex_of(v).pair().unwrap();
            map.insert(pair, g.space().vertex_of(parent[v]));
        }
    }
    CloneTree::from_parent_map(map).expect("search state is a tree")
}

/// The smallest per-vertex frequencies that let a tree absorb its children:
/// leaves take their lower bounds, internal vertices take
/// `max(lower bound, Σ_child f̂⁺(D_child) − Σ_{j ∈ D\{i}} f̂_{(c,j)})`,
/// evaluated bottom-up. States absent from the tree contribute their lower
/// bounds.
pub fn compute_fhat(
    t: &CloneTree,
    intervals: &FrequencyIntervalTensor,
    s: &StateTreeSet,
) -> Result<BTreeMap<CharStatePair, Vec<Rational>>, ModelError> {
    t.check_consistent(s)?;
    let m = intervals.sample_count();
    let mut fhat: BTreeMap<CharStatePair, Vec<Rational>> = BTreeMap::new();

    // Bottom-up: order vertices by depth, deepest first.
    let mut by_depth: Vec<(usize, CharStatePair)> = t
        .pairs()
        .map(|pair| {
            let mut d = 0usize;
            let mut cur = Vertex::Pair(pair);
            while let Vertex::Pair(q) = cur {
                cur = t.parent_of(q).unwrap();
                d += 1;
            }
            (d, pair)
        })
        .collect();
    by_depth.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));

    let value = |fhat: &BTreeMap<CharStatePair, Vec<Rational>>, c: usize, st: usize, p: usize| {
        match fhat.get(&CharStatePair::new(c, st)) {
            Some(v) => v[p].clone(),
            None => intervals.lower(p, c, st).clone(),
        }
    };

    for (_, pair) in by_depth {
        let tree = s.tree(pair.character)?;
        let dset = tree.descendant_set(pair.state)?;
        let children = t.children(Vertex::Pair(pair));
        let mut per_sample = Vec::with_capacity(m);
        for p in 0..m {
            let lower = intervals.lower(p, pair.character, pair.state).clone();
            let mut need = Rational::zero();
            for child in &children {
                let cp = child.pair().unwrap();
                let cd = s.tree(cp.character)?.descendant_set(cp.state)?;
                for &st in &cd.states {
                    need += value(&fhat, cp.character, st, p);
                }
            }
            for &st in &dset.states {
                if st != pair.state {
                    need -= value(&fhat, pair.character, st, p);
                }
            }
            per_sample.push(if need > lower { need } else { lower });
        }
        fhat.insert(pair, per_sample);
    }
    Ok(fhat)
}

/// Validity test for a tree against interval bounds. Returns the witness
/// tensor when the tree is valid: f̂ within the upper bounds at every tree
/// vertex, the root's children absorbable within total mass 1, and every
/// character's non-root mass at most 1 so state 0 can take the remainder.
pub fn is_valid_tree(
    t: &CloneTree,
    intervals: &FrequencyIntervalTensor,
    s: &StateTreeSet,
) -> Result<Option<FrequencyTensor>, ModelError> {
    intervals.validate_for_noisy()?;
    let fhat = compute_fhat(t, intervals, s)?;
    let m = intervals.sample_count();
    let one = Rational::one();

    let value = |c: usize, st: usize, p: usize| match fhat.get(&CharStatePair::new(c, st)) {
        Some(v) => v[p].clone(),
        None => intervals.lower(p, c, st).clone(),
    };

    for (pair, vals) in &fhat {
        for p in 0..m {
            if &vals[p] > intervals.upper(p, pair.character, pair.state) {
                return Ok(None);
            }
        }
    }
    for p in 0..m {
        // Root sum condition: the witness root usage must be nonnegative.
        let mut root_children_mass = Rational::zero();
        for child in t.children(Vertex::Root) {
            let cp = child.pair().unwrap();
            let cd = s.tree(cp.character)?.descendant_set(cp.state)?;
            for &st in &cd.states {
                root_children_mass += value(cp.character, st, p);
            }
        }
        if root_children_mass > one {
            return Ok(None);
        }
        // Witness state-0 entries must be nonnegative per character.
        for (c, tree) in s.trees().iter().enumerate() {
            let mut mass = Rational::zero();
            for st in 1..tree.state_count() {
                mass += value(c, st, p);
            }
            if mass > one {
                return Ok(None);
            }
        }
    }

    // Assemble the witness: f̂ (or the lower bound for absent states) for
    // non-root states, the remainder at state 0.
    let mut rows = Vec::with_capacity(m);
    for p in 0..m {
        let mut row = Vec::with_capacity(s.character_count());
        for (c, tree) in s.trees().iter().enumerate() {
            let k = tree.state_count();
            let mut states = vec![Rational::zero(); k];
            let mut mass = Rational::zero();
            for st in 1..k {
                let v = value(c, st, p);
                mass += &v;
                states[st] = v;
            }
            states[0] = &one - mass;
            row.push(states);
        }
        rows.push(row);
    }
    let witness = FrequencyTensor::new(s.state_counts(), rows)?;
    debug_assert!(witness.validate().is_ok());
    Ok(Some(witness))
}

/// Enumerate the maximal valid trees of an interval instance, post-processed
/// to state-complete subtrees and deduplicated. No reported tree is a strict
/// subtree of another and none admits a single-edge valid extension.
pub fn noisy_enumerate(
    g: &AncestryGraph,
    intervals: &FrequencyIntervalTensor,
    s: &StateTreeSet,
    limit: Option<usize>,
) -> Result<SolutionSet, ModelError> {
    if !g.is_noisy() {
        return Err(ModelError::MalformedTree(
            "noisy enumeration requires a graph built from interval bounds".into(),
        ));
    }
    if g.space().state_counts() != s.state_counts().as_slice() {
        return Err(ModelError::MalformedTree("graph and state trees disagree".into()));
    }
    intervals.validate_for_noisy()?;
    if limit == Some(0) {
        return Ok(SolutionSet { solutions: Vec::new(), truncated: true });
    }

    let mut engine = NoisyEngine::new(g, s, limit);
    engine.seed_frontier();
    engine.recurse();

    // State-complete truncation, dedup (first hit in DFS order wins), then
    // drop trees strictly contained in another reported tree.
    let mut seen: BTreeMap<CloneTree, usize> = BTreeMap::new();
    let mut processed: Vec<Solution> = Vec::new();
    for sol in engine.out {
        let reported = state_complete_subtree(&sol.tree, s);
        if !seen.contains_key(&reported) {
            seen.insert(reported.clone(), processed.len());
            processed.push(Solution { tree: reported, payload: sol.payload });
        }
    }
    let keep: Vec<bool> = processed
        .iter()
        .map(|a| {
            !processed.iter().any(|b| {
                b.tree.vertex_count() > a.tree.vertex_count() && a.tree.is_subtree_of(&b.tree)
            })
        })
        .collect();
    let solutions =
        processed.into_iter().zip(keep).filter(|(_, k)| *k).map(|(s, _)| s).collect();
    Ok(SolutionSet { solutions, truncated: engine.truncated })
}

/// Drop every vertex whose character is missing one of its states, then keep
/// the component containing the root.
fn state_complete_subtree(t: &CloneTree, s: &StateTreeSet) -> CloneTree {
    let mut keep_char = vec![true; s.character_count()];
    for (c, tree) in s.trees().iter().enumerate() {
        let present = t.states_of(c);
        keep_char[c] = present.len() == tree.state_count() - 1;
    }
    let mut map = BTreeMap::new();
    // Walk from the root; include a vertex when its character is kept and
    // its parent is included.
    let mut frontier = vec![Vertex::Root];
    while let Some(v) = frontier.pop() {
        for child in t.children(v) {
            let p = child.pair().unwrap();
            if keep_char[p.character] {
                map.insert(p, v);
                frontier.push(child);
            }
        }
    }
    CloneTree::from_parent_map(map).expect("component of a tree is a tree")
}

struct NoisyEngine<'a> {
    g: &'a AncestryGraph,
    s: &'a StateTreeSet,
    in_tree: Vec<bool>,
    parent: Vec<usize>,
    children: Vec<Vec<usize>>,
    tree_size: usize,
    /// Scaled f̂ per in-tree vertex and sample.
    fhat: Vec<Vec<BigInt>>,
    frontier: Vec<(usize, usize)>,
    out: Vec<Solution>,
    limit: Option<usize>,
    truncated: bool,
}

type FhatUndo = Vec<(usize, Vec<BigInt>)>;

impl<'a> NoisyEngine<'a> {
    fn new(g: &'a AncestryGraph, s: &'a StateTreeSet, limit: Option<usize>) -> Self {
        let n = g.vertex_count();
        let m = g.sample_count();
        let mut in_tree = vec![false; n];
        in_tree[0] = true;
        NoisyEngine {
            g,
            s,
            in_tree,
            parent: vec![0; n],
            children: vec![Vec::new(); n],
            tree_size: 1,
            fhat: vec![vec![BigInt::zero(); m]; n],
            frontier: Vec::new(),
            out: Vec::new(),
            limit,
            truncated: false,
        }
    }

    fn seed_frontier(&mut self) {
        for &x in self.g.out_edges(0) {
            if self.admissible(0, x) {
                self.frontier.push((0, x));
            }
        }
    }

    /// f̂ of a state: the maintained value for in-tree vertices, the lower
    /// bound otherwise.
    fn value(&self, c: usize, st: usize, p: usize) -> BigInt {
        let id = self.g.space().id_of(Vertex::new(c, st));
        if self.in_tree[id] {
            self.fhat[id][p].clone()
        } else {
            self.g.lb()[id][p].clone()
        }
    }

    /// Scaled cumulative f̂ over a vertex's descendant set.
    fn fhat_plus(&self, v: usize, p: usize) -> BigInt {
        let d = self.g.descendant_set(v).expect("non-root vertex");
        let c = d.character;
        let mut sum = BigInt::zero();
        for &st in &d.states {
            sum += self.value(c, st, p);
        }
        sum
    }

    fn need(&self, v: usize, p: usize) -> BigInt {
        let d = self.g.descendant_set(v).expect("non-root vertex");
        let mut need = BigInt::zero();
        for &child in &self.children[v] {
            need += self.fhat_plus(child, p);
        }
        let vp = self.g.space().vertex_of(v).pair().unwrap();
        for &st in &d.states {
            if st != vp.state {
                need -= self.value(d.character, st, p);
            }
        }
        need
    }

    /// Attach `head` under `tail`, recomputing f̂ along the whole root path.
    /// Same-character subtractions can lower an ancestor even when an
    /// intermediate vertex is unchanged, so no early exit is taken.
    fn add_edge(&mut self, tail: usize, head: usize) -> FhatUndo {
        let m = self.g.sample_count();
        self.in_tree[head] = true;
        self.parent[head] = tail;
        self.children[tail].push(head);
        self.tree_size += 1;
        self.fhat[head] = self.g.lb()[head].to_vec();

        let mut undo = Vec::new();
        let mut v = tail;
        while v != 0 {
            let fresh: Vec<BigInt> = (0..m)
                .map(|p| {
                    let need = self.need(v, p);
                    let lb = &self.g.lb()[v][p];
                    if need > *lb {
                        need
                    } else {
                        lb.clone()
                    }
                })
                .collect();
            if fresh != self.fhat[v] {
                undo.push((v, std::mem::replace(&mut self.fhat[v], fresh)));
            }
            v = self.parent[v];
        }
        undo
    }

    fn remove_edge(&mut self, tail: usize, head: usize, undo: FhatUndo) {
        for (v, old) in undo.into_iter().rev() {
            self.fhat[v] = old;
        }
        let popped = self.children[tail].pop();
        debug_assert_eq!(popped, Some(head));
        self.in_tree[head] = false;
        self.tree_size -= 1;
    }

    /// Validity of the current tree: f̂ within upper bounds, root children
    /// absorbable, and per-character non-root mass at most 1.
    fn valid(&self) -> bool {
        let m = self.g.sample_count();
        for v in 1..self.g.vertex_count() {
            if self.in_tree[v] {
                for p in 0..m {
                    if self.fhat[v][p] > self.g.ub()[v][p] {
                        return false;
                    }
                }
            }
        }
        for p in 0..m {
            let mut mass = BigInt::zero();
            for &child in &self.children[0] {
                mass += self.fhat_plus(child, p);
            }
            if mass > *self.g.denom() {
                return false;
            }
            for c in 0..self.s.character_count() {
                let mut sum = self.g.lb_char_sum()[c][p].clone();
                for st in 1..self.s.tree(c).unwrap().state_count() {
                    let id = self.g.space().id_of(Vertex::new(c, st));
                    if self.in_tree[id] {
                        sum += &self.fhat[id][p] - &self.g.lb()[id][p];
                    }
                }
                if sum > *self.g.denom() {
                    return false;
                }
            }
        }
        true
    }

    fn try_add(&mut self, tail: usize, head: usize) -> bool {
        let undo = self.add_edge(tail, head);
        let ok = self.valid();
        self.remove_edge(tail, head, undo);
        ok
    }

    fn admissible(&mut self, tail: usize, head: usize) -> bool {
        !self.in_tree[head]
            && first_char_ok(self.g, &self.parent, tail, head)
            && self.try_add(tail, head)
    }

    /// After committing an edge, rescan the whole frontier: f̂ updates can
    /// invalidate edges anywhere in the tree, not only at the tail.
    fn update_frontier(&mut self, head: usize) -> FrontierUndo {
        let mut removed = Vec::new();
        for idx in 0..self.frontier.len() {
            let (t, y) = self.frontier[idx];
            if y == head || !self.try_add(t, y) {
                removed.push((idx, (t, y)));
            }
        }
        for &(idx, _) in removed.iter().rev() {
            self.frontier.remove(idx);
        }
        let before = self.frontier.len();
        let heads: Vec<usize> = self.g.out_edges(head).to_vec();
        for x in heads {
            if self.admissible(head, x) {
                self.frontier.push((head, x));
            }
        }
        FrontierUndo { pushed: self.frontier.len() - before, removed }
    }

    fn undo_frontier(&mut self, undo: FrontierUndo) {
        self.frontier.truncate(self.frontier.len() - undo.pushed);
        for (idx, edge) in undo.removed {
            self.frontier.insert(idx, edge);
        }
    }

    fn recurse(&mut self) {
        if self.frontier.is_empty() {
            self.emit_if_maximal();
            return;
        }
        let mut popped = Vec::new();
        while let Some((tail, head)) = self.frontier.pop() {
            if !self.truncated {
                let fhat_undo = self.add_edge(tail, head);
                debug_assert!(self.valid(), "frontier edge broke validity");
                let undo = self.update_frontier(head);
                self.recurse();
                self.undo_frontier(undo);
                self.remove_edge(tail, head, fhat_undo);
            }
            popped.push((tail, head));
        }
        while let Some(e) = popped.pop() {
            self.frontier.push(e);
        }
    }

    /// An empty frontier means no non-excluded extension is valid; edges
    /// excluded by earlier pops may still extend the tree, so genuine
    /// maximality is re-checked against the whole graph before emitting.
    fn emit_if_maximal(&mut self) {
        if self.truncated {
            return;
        }
        for t in 0..self.g.vertex_count() {
            if !self.in_tree[t] {
                continue;
            }
            let heads: Vec<usize> = self.g.out_edges(t).to_vec();
            for y in heads {
                if self.admissible(t, y) {
                    return;
                }
            }
        }
        let tree = tree_from_arrays(self.g, &self.in_tree, &self.parent);
        let witness = self.witness();
        #[cfg(debug_assertions)]
        self.check_emission(&tree, &witness);
        self.out.push(Solution { tree, payload: SolutionPayload::Witness(witness) });
        if Some(self.out.len()) == self.limit {
            self.truncated = true;
        }
    }

    fn witness(&self) -> FrequencyTensor {
        let m = self.g.sample_count();
        let denom = self.g.denom();
        let mut rows = Vec::with_capacity(m);
        for p in 0..m {
            let mut row = Vec::with_capacity(self.s.character_count());
            for (c, tree) in self.s.trees().iter().enumerate() {
                let k = tree.state_count();
                let mut states = vec![Rational::zero(); k];
                let mut mass = Rational::zero();
                for st in 1..k {
                    let v = Rational::new(self.value(c, st, p), denom.clone());
                    mass += &v;
                    states[st] = v;
                }
                states[0] = Rational::one() - mass;
                row.push(states);
            }
            rows.push(row);
        }
        FrequencyTensor::new(self.s.state_counts(), rows).expect("witness shape")
    }

    #[cfg(debug_assertions)]
    fn check_emission(&self, tree: &CloneTree, witness: &FrequencyTensor) {
        witness.validate().expect("witness is a frequency tensor");
        tree.check_consistent(self.s).expect("emitted tree consistent");
        assert!(crate::ancestry::check_mssc(witness, tree, self.s).unwrap());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ancestry::AncestryGraph;
    use crate::model::{StateTree, StateTreeSet};
    use crate::rational::parse_exact;

    fn rat(s: &str) -> Rational {
        parse_exact(s).unwrap()
    }

    fn chain3() -> (FrequencyTensor, StateTreeSet) {
        let s = StateTreeSet::new(vec![StateTree::chain(0, 3)]).unwrap();
        let f = FrequencyTensor::new(
            vec![3],
            vec![vec![vec![rat("0.5"), rat("0.3"), rat("0.2")]]],
        )
        .unwrap();
        (f, s)
    }

    #[test]
    fn single_chain_has_exactly_one_solution() {
        let (f, s) = chain3();
        let g = AncestryGraph::cladistic(&f, &s).unwrap();
        let sols = enumerate(&g, &f, &s, None).unwrap();
        assert_eq!(sols.len(), 1);
        assert!(!sols.truncated);
        let expected = CloneTree::from_edges([
            (Vertex::Root, Vertex::new(0, 1)),
            (Vertex::new(0, 1), Vertex::new(0, 2)),
        ])
        .unwrap();
        assert_eq!(sols.solutions[0].tree, expected);
        let u = sols.solutions[0].usage().unwrap();
        assert_eq!(u.get(0, Vertex::Root).unwrap(), &rat("0.5"));
        u.validate().unwrap();
    }

    fn all_root_mass(n: usize) -> (FrequencyTensor, StateTreeSet) {
        let s = StateTreeSet::new((0..n).map(|c| StateTree::chain(c, 2)).collect()).unwrap();
        let f = FrequencyTensor::new(
            vec![2; n],
            vec![(0..n).map(|_| vec![rat("1"), rat("0")]).collect()],
        )
        .unwrap();
        (f, s)
    }

    #[test]
    fn all_root_mass_counts_equal_spanning_trees() {
        // With f[p][c][0] = 1 everywhere and binary characters, every
        // spanning tree of the ancestry graph is a solution. For n = 2 the
        // graph is the complete digraph on {root, a, b} rooted at root:
        // 3 spanning arborescences.
        let (f, s) = all_root_mass(2);
        let g = AncestryGraph::cladistic(&f, &s).unwrap();
        let sols = enumerate(&g, &f, &s, None).unwrap();
        assert_eq!(sols.len(), 3);
        // Matrix-tree cross-check.
        assert_eq!(
            crate::oracle::count_arborescences(&g),
            num_bigint::BigInt::from(3)
        );
        let (f, s) = all_root_mass(3);
        let g = AncestryGraph::cladistic(&f, &s).unwrap();
        let sols = enumerate(&g, &f, &s, None).unwrap();
        assert_eq!(
            num_bigint::BigInt::from(sols.len()),
            crate::oracle::count_arborescences(&g)
        );
    }

    #[test]
    fn limit_truncates_and_flags() {
        let (f, s) = all_root_mass(3);
        let g = AncestryGraph::cladistic(&f, &s).unwrap();
        let sols = enumerate(&g, &f, &s, Some(2)).unwrap();
        assert_eq!(sols.len(), 2);
        assert!(sols.truncated);
        let none = enumerate(&g, &f, &s, Some(0)).unwrap();
        assert!(none.is_empty() && none.truncated);
        // A limit above the solution count leaves the flag unset.
        let all = enumerate(&g, &f, &s, Some(1000)).unwrap();
        assert!(!all.truncated);
    }

    #[test]
    fn no_duplicate_solutions() {
        let (f, s) = all_root_mass(4);
        let g = AncestryGraph::cladistic(&f, &s).unwrap();
        let sols = enumerate(&g, &f, &s, None).unwrap();
        let mut keys: Vec<_> = sols.solutions.iter().map(|x| x.tree.clone()).collect();
        let before = keys.len();
        keys.sort();
        keys.dedup();
        assert_eq!(before, keys.len());
    }

    #[test]
    fn fhat_chain_hand_evaluation() {
        // root → (0,1) → (1,1); lower bounds 0.3 and 0.5; singleton D-sets.
        let s = StateTreeSet::new(vec![StateTree::chain(0, 2), StateTree::chain(1, 2)]).unwrap();
        let t = CloneTree::from_edges([
            (Vertex::Root, Vertex::new(0, 1)),
            (Vertex::new(0, 1), Vertex::new(1, 1)),
        ])
        .unwrap();
        let i = FrequencyIntervalTensor::new(
            vec![2, 2],
            vec![vec![vec![rat("0"), rat("0.3")], vec![rat("0"), rat("0.5")]]],
            vec![vec![vec![rat("1"), rat("1")], vec![rat("1"), rat("1")]]],
        )
        .unwrap();
        let fhat = compute_fhat(&t, &i, &s).unwrap();
        assert_eq!(fhat[&CharStatePair::new(1, 1)][0], rat("0.5"));
        assert_eq!(fhat[&CharStatePair::new(0, 1)][0], rat("0.5"));
    }

    #[test]
    fn fhat_all_zero_lower_bounds() {
        let s = StateTreeSet::new(vec![StateTree::chain(0, 2), StateTree::chain(1, 2)]).unwrap();
        let t = CloneTree::from_edges([
            (Vertex::Root, Vertex::new(0, 1)),
            (Vertex::new(0, 1), Vertex::new(1, 1)),
        ])
        .unwrap();
        let i = FrequencyIntervalTensor::new(
            vec![2, 2],
            vec![vec![vec![rat("0"), rat("0")], vec![rat("0"), rat("0")]]],
            vec![vec![vec![rat("1"), rat("1")], vec![rat("1"), rat("1")]]],
        )
        .unwrap();
        let fhat = compute_fhat(&t, &i, &s).unwrap();
        for vals in fhat.values() {
            assert_eq!(vals[0], Rational::zero());
        }
    }

    #[test]
    fn validity_examples() {
        let s = StateTreeSet::new(vec![StateTree::chain(0, 2), StateTree::chain(1, 2)]).unwrap();
        let t = CloneTree::from_edges([
            (Vertex::Root, Vertex::new(0, 1)),
            (Vertex::new(0, 1), Vertex::new(1, 1)),
        ])
        .unwrap();
        // Point intervals around a tensor generated by t.
        let f = FrequencyTensor::new(
            vec![2, 2],
            vec![vec![vec![rat("0.4"), rat("0.6")], vec![rat("0.5"), rat("0.5")]]],
        )
        .unwrap();
        assert!(crate::ancestry::check_mssc(&f, &t, &s).unwrap());
        let i = FrequencyIntervalTensor::from_point(&f);
        let witness = is_valid_tree(&t, &i, &s).unwrap().expect("valid");
        assert_eq!(witness, f);
        // A leaf lower bound above its parent's upper bound is invalid.
        let bad = FrequencyIntervalTensor::new(
            vec![2, 2],
            vec![vec![vec![rat("0"), rat("0")], vec![rat("0"), rat("0.8")]]],
            vec![vec![vec![rat("1"), rat("0.5")], vec![rat("1"), rat("0.9")]]],
        )
        .unwrap();
        assert!(is_valid_tree(&t, &bad, &s).unwrap().is_none());
        // All-[0,1] intervals admit every consistent tree.
        let free = FrequencyIntervalTensor::new(
            vec![2, 2],
            vec![vec![vec![rat("0"), rat("0")], vec![rat("0"), rat("0")]]],
            vec![vec![vec![rat("1"), rat("1")], vec![rat("1"), rat("1")]]],
        )
        .unwrap();
        assert!(is_valid_tree(&t, &free, &s).unwrap().is_some());
    }

    #[test]
    fn star_with_heavy_lower_bounds_is_invalid() {
        // Two root children with lower bounds summing past 1 can never both
        // hang from the root.
        let s = StateTreeSet::new(vec![StateTree::chain(0, 2), StateTree::chain(1, 2)]).unwrap();
        let star = CloneTree::from_edges([
            (Vertex::Root, Vertex::new(0, 1)),
            (Vertex::Root, Vertex::new(1, 1)),
        ])
        .unwrap();
        let i = FrequencyIntervalTensor::new(
            vec![2, 2],
            vec![vec![vec![rat("0"), rat("0.9")], vec![rat("0"), rat("0.9")]]],
            vec![vec![vec![rat("1"), rat("1")], vec![rat("1"), rat("1")]]],
        )
        .unwrap();
        assert!(is_valid_tree(&star, &i, &s).unwrap().is_none());
        // The chain arrangement is fine.
        let chain = CloneTree::from_edges([
            (Vertex::Root, Vertex::new(0, 1)),
            (Vertex::new(0, 1), Vertex::new(1, 1)),
        ])
        .unwrap();
        assert!(is_valid_tree(&chain, &i, &s).unwrap().is_some());
    }

    #[test]
    fn noisy_all_unit_intervals_yields_spanning_trees() {
        // With [0,1] intervals every consistent tree is valid, so the
        // maximal ones are exactly the spanning trees.
        let n = 2;
        let s = StateTreeSet::new((0..n).map(|c| StateTree::chain(c, 2)).collect()).unwrap();
        let i = FrequencyIntervalTensor::new(
            vec![2; n],
            vec![(0..n).map(|_| vec![rat("0"), rat("0")]).collect()],
            vec![(0..n).map(|_| vec![rat("1"), rat("1")]).collect()],
        )
        .unwrap();
        let g = AncestryGraph::noisy(&i, &s).unwrap();
        let sols = noisy_enumerate(&g, &i, &s, None).unwrap();
        assert_eq!(sols.len(), 3);
        for sol in &sols.solutions {
            assert_eq!(sol.tree.vertex_count(), 3);
            sol.witness().unwrap().validate().unwrap();
        }
    }

    #[test]
    fn interleaved_three_state_instance() {
        // Two samples, two three-state chain characters mixed through an
        // interleaved tree: root → (0,1) → (1,1) → (0,2) → (1,2). The mixed
        // tensor must put exactly this tree in the solution set, with every
        // tree edge present in the ancestry graph, and the brute-force
        // oracle must agree on the whole set.
        let s =
            StateTreeSet::new(vec![StateTree::chain(0, 3), StateTree::chain(1, 3)]).unwrap();
        let t = CloneTree::from_edges([
            (Vertex::Root, Vertex::new(0, 1)),
            (Vertex::new(0, 1), Vertex::new(1, 1)),
            (Vertex::new(1, 1), Vertex::new(0, 2)),
            (Vertex::new(0, 2), Vertex::new(1, 2)),
        ])
        .unwrap();
        let u = crate::model::UsageMatrix::new(
            t.vertices(),
            vec![
                vec![rat("0.1"), rat("0.2"), rat("0.3"), rat("0.25"), rat("0.15")],
                vec![rat("0.4"), rat("0.3"), rat("0.1"), rat("0.1"), rat("0.1")],
            ],
        )
        .unwrap();
        let f = crate::usage::mix(&t, &u).unwrap();
        f.validate().unwrap();
        let g = AncestryGraph::cladistic(&f, &s).unwrap();
        for (a, b) in t.edges() {
            assert!(g.has_edge(a, b), "tree edge {a}->{b} missing from the graph");
        }
        let sols = enumerate(&g, &f, &s, None).unwrap();
        assert!(sols.contains_tree(&t));
        let brute = crate::oracle::brute_enumerate(&f, &s, None).unwrap();
        let fast: std::collections::BTreeSet<_> =
            sols.solutions.iter().map(|x| &x.tree).collect();
        let slow: std::collections::BTreeSet<_> =
            brute.solutions.iter().map(|x| &x.tree).collect();
        assert_eq!(fast, slow);
    }

    #[test]
    fn noisy_point_intervals_cover_exact_solutions() {
        let (f, s) = all_root_mass(3);
        let g = AncestryGraph::cladistic(&f, &s).unwrap();
        let exact = enumerate(&g, &f, &s, None).unwrap();
        let i = FrequencyIntervalTensor::from_point(&f);
        let gn = AncestryGraph::noisy(&i, &s).unwrap();
        let noisy = noisy_enumerate(&gn, &i, &s, None).unwrap();
        for sol in &exact.solutions {
            assert!(
                noisy.solutions.iter().any(|n| sol.tree.is_subtree_of(&n.tree)),
                "exact solution missing from noisy output"
            );
        }
    }

    #[test]
    fn noisy_output_is_maximal_and_deduplicated() {
        let s = StateTreeSet::new(vec![StateTree::chain(0, 2), StateTree::chain(1, 2)]).unwrap();
        let i = FrequencyIntervalTensor::new(
            vec![2, 2],
            vec![vec![vec![rat("0"), rat("0.2")], vec![rat("0"), rat("0.3")]]],
            vec![vec![vec![rat("1"), rat("0.6")], vec![rat("1"), rat("0.7")]]],
        )
        .unwrap();
        let g = AncestryGraph::noisy(&i, &s).unwrap();
        let sols = noisy_enumerate(&g, &i, &s, None).unwrap();
        assert!(!sols.is_empty());
        for a in &sols.solutions {
            for b in &sols.solutions {
                if !std::ptr::eq(a, b) {
                    assert!(!a.tree.is_subtree_of(&b.tree), "emitted a strict subtree");
                }
            }
            // No single-edge valid extension exists.
            for (tail, head) in g.edges() {
                if a.tree.contains(tail) && !a.tree.contains(head) {
                    let mut extended: Vec<(Vertex, Vertex)> = a.tree.edges();
                    extended.push((tail, head));
                    if let Ok(t2) = CloneTree::from_edges(extended) {
                        if t2.check_consistent(&s).is_ok() {
                            assert!(is_valid_tree(&t2, &i, &s).unwrap().is_none());
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn engine_fhat_matches_standalone_recursion() {
        // Build a partial tree by hand through the engine path and compare
        // against compute_fhat.
        let s = StateTreeSet::new(vec![StateTree::chain(0, 3), StateTree::chain(1, 2)]).unwrap();
        let i = FrequencyIntervalTensor::new(
            vec![3, 2],
            vec![vec![
                vec![rat("0"), rat("0.1"), rat("0.2")],
                vec![rat("0"), rat("0.4")],
            ]],
            vec![vec![
                vec![rat("1"), rat("0.7"), rat("0.6")],
                vec![rat("1"), rat("0.9")],
            ]],
        )
        .unwrap();
        let g = AncestryGraph::noisy(&i, &s).unwrap();
        let mut engine = NoisyEngine::new(&g, &s, None);
        let id = |c: usize, st: usize| g.space().id_of(Vertex::new(c, st));
        engine.add_edge(0, id(0, 1));
        engine.add_edge(id(0, 1), id(1, 1));
        engine.add_edge(id(1, 1), id(0, 2));
        let t = tree_from_arrays(&g, &engine.in_tree, &engine.parent);
        let reference = compute_fhat(&t, &i, &s).unwrap();
        for (pair, vals) in &reference {
            let vid = g.space().id_of(Vertex::Pair(*pair));
            for p in 0..1 {
                assert_eq!(
                    Rational::new(engine.fhat[vid][p].clone(), g.denom().clone()),
                    vals[p]
                );
            }
        }
    }
}
