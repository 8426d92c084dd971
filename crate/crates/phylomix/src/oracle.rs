//! Independent brute-force checkers and hard-instance generators.
//!
//! Nothing here touches the ancestry graph or the backtracking engines: the
//! brute-force enumerator walks raw parent functions and filters by the
//! usage equation, so it exercises a disjoint code path from `enumerate`.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::ancestry::AncestryGraph;
use crate::enumerate::{Solution, SolutionPayload, SolutionSet};
use crate::model::{
    CloneTree, FrequencyTensor, ModelError, StateTree, StateTreeSet, Vertex, VertexSpace,
};
use crate::rational::Rational;
use crate::usage::compute_usage;
use std::collections::BTreeMap;

pub const DEFAULT_CANDIDATE_CAP: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("instance too large for brute force: {candidates} candidates exceed cap {cap}")]
    InstanceTooLarge { candidates: usize, cap: usize },
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Exhaustively generate every complete clone tree consistent with `s` by
/// assigning each non-root vertex a parent, then keep the trees whose usage
/// matrix is nonnegative. `cap` bounds the number of complete candidate
/// trees inspected (default [`DEFAULT_CANDIDATE_CAP`]).
pub fn brute_enumerate(
    f: &FrequencyTensor,
    s: &StateTreeSet,
    cap: Option<usize>,
) -> Result<SolutionSet, OracleError> {
    f.validate()?;
    let cap = cap.unwrap_or(DEFAULT_CANDIDATE_CAP);
    let space = VertexSpace::from_state_trees(s);
    let n = space.vertex_count();

    // Local structural facts per non-root vertex: its character and the id
    // of its state-tree parent (0 when the parent state is the root state).
    let mut char_of = vec![0usize; n];
    let mut state_parent = vec![0usize; n];
    for id in 1..n {
        let pair = space.vertex_of(id).pair().unwrap();
        char_of[id] = pair.character;
        let pi = s
            .tree(pair.character)?
            .parent_of(pair.state)?
            .expect("non-root state");
        state_parent[id] = space.id_of(Vertex::new(pair.character, pi));
    }

    struct Search<'a> {
        n: usize,
        char_of: &'a [usize],
        state_parent: &'a [usize],
        parent: Vec<usize>,
        assigned: Vec<bool>,
        candidates: usize,
        cap: usize,
        overflow: bool,
        /// `fplus[v][p]`, scaled to a common denominator; `fplus[0] = 1`.
        fplus: Vec<Vec<BigInt>>,
        passing: Vec<Vec<usize>>,
    }

    impl Search<'_> {
        fn creates_cycle(&self, child: usize, par: usize) -> bool {
            let mut cur = par;
            while cur != 0 {
                if cur == child {
                    return true;
                }
                if !self.assigned[cur] {
                    return false;
                }
                cur = self.parent[cur];
            }
            false
        }

        /// Partial consistency check: walking the assigned ancestors of
        /// `par`, the first vertex sharing `child`'s character must be its
        /// state-tree parent. Undecidable (and accepted for now) when an
        /// unassigned vertex is reached first; the complete assignment is
        /// re-checked in full.
        fn breaks_consistency(&self, child: usize, par: usize) -> bool {
            let c = self.char_of[child];
            let want = self.state_parent[child];
            let mut cur = par;
            while cur != 0 {
                if self.char_of[cur] == c {
                    return cur != want;
                }
                if !self.assigned[cur] {
                    return false;
                }
                cur = self.parent[cur];
            }
            // Reached the root: the nearest same-character vertex is the
            // root's state 0.
            want != 0
        }

        /// Full consistency of a complete assignment (covers the checks the
        /// partial prune had to defer).
        fn consistent(&self) -> bool {
            for v in 1..self.n {
                let mut cur = self.parent[v];
                loop {
                    if cur == 0 {
                        if self.state_parent[v] != 0 {
                            return false;
                        }
                        break;
                    }
                    if self.char_of[cur] == self.char_of[v] {
                        if cur != self.state_parent[v] {
                            return false;
                        }
                        break;
                    }
                    cur = self.parent[cur];
                }
            }
            true
        }

        /// Sum condition on the raw arrays: every vertex's cumulative
        /// frequency covers its children's.
        fn mssc(&self) -> bool {
            let m = self.fplus[0].len();
            let mut child_sum = vec![vec![BigInt::zero(); m]; self.n];
            for v in 1..self.n {
                for p in 0..m {
                    let add = self.fplus[v][p].clone();
                    child_sum[self.parent[v]][p] += add;
                }
            }
            (0..self.n).all(|v| (0..m).all(|p| self.fplus[v][p] >= child_sum[v][p]))
        }

        fn assign(&mut self, v: usize) {
            if self.overflow {
                return;
            }
            if v == self.n {
                self.candidates += 1;
                if self.candidates > self.cap {
                    self.overflow = true;
                    return;
                }
                if self.consistent() && self.mssc() {
                    self.passing.push(self.parent.clone());
                }
                return;
            }
            for par in 0..self.n {
                if par == v {
                    continue;
                }
                // Same-character parents must be the state-tree parent; the
                // root is the alias of every character's state 0.
                let same_char = par == 0 || self.char_of[par] == self.char_of[v];
                if same_char && par != self.state_parent[v] {
                    continue;
                }
                if self.creates_cycle(v, par) || self.breaks_consistency(v, par) {
                    continue;
                }
                self.parent[v] = par;
                self.assigned[v] = true;
                self.assign(v + 1);
                self.assigned[v] = false;
                if self.overflow {
                    return;
                }
            }
        }
    }

    let denom = crate::rational::common_denominator(f.rows().iter().flatten().flatten());
    let m = f.sample_count();
    let mut fplus = vec![vec![BigInt::zero(); m]; n];
    fplus[0] = vec![denom.clone(); m];
    for id in 1..n {
        let pair = space.vertex_of(id).pair().unwrap();
        let d = s.tree(pair.character)?.descendant_set(pair.state)?;
        for p in 0..m {
            fplus[id][p] = crate::rational::scale_to(&f.cumulative(p, &d)?, &denom);
        }
    }

    let mut search = Search {
        n,
        char_of: &char_of,
        state_parent: &state_parent,
        parent: vec![0; n],
        assigned: vec![false; n],
        candidates: 0,
        cap,
        overflow: false,
        fplus,
        passing: Vec::new(),
    };
    if n > 1 {
        search.assign(1);
    }
    if search.overflow {
        return Err(OracleError::InstanceTooLarge { candidates: search.candidates, cap });
    }

    let mut solutions = Vec::new();
    for parents in search.passing {
        let mut map = BTreeMap::new();
        for v in 1..n {
            map.insert(space.vertex_of(v).pair().unwrap(), space.vertex_of(parents[v]));
        }
        let tree = CloneTree::from_parent_map(map)?;
        tree.check_consistent(s)?;
        let usage = compute_usage(f, &tree, s)?;
        debug_assert!(usage.all_nonnegative());
        solutions.push(Solution { tree, payload: SolutionPayload::Usage(usage) });
    }
    Ok(SolutionSet { solutions, truncated: false })
}

/// Build the two-sample, two-state hard instance from a SUBSET SUM input:
/// characters `d`, `e−d`, `b_1 … b_t` with sample-one frequencies
/// `(d, e−d, b_1 … b_t)/e` and an ε-tilted second sample.
///
/// Values must be distinct positive integers (equal values would let one
/// b-vertex nest under another, which breaks the spanning-partition
/// argument), and `0 < d < Σb` so that ε stays positive. Under those
/// preconditions a spanning solution exists iff some subset sums to `d`:
/// the root's children are forced to be exactly the `d` and `e−d` vertices,
/// every b-vertex hangs directly below one of them, and both sum
/// constraints are tight.
pub fn subset_sum_instance(
    b: &[u64],
    d: u64,
) -> Result<(FrequencyTensor, StateTreeSet), OracleError> {
    if b.is_empty() {
        return Err(OracleError::PreconditionViolated("empty value set".into()));
    }
    if d == 0 {
        return Err(OracleError::PreconditionViolated("d must be positive".into()));
    }
    let mut sorted = b.to_vec();
    sorted.sort_unstable();
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            return Err(OracleError::PreconditionViolated(format!(
                "duplicate value {}",
                w[0]
            )));
        }
    }
    if sorted[0] == 0 {
        return Err(OracleError::PreconditionViolated("values must be positive".into()));
    }
    let e: u64 = sorted.iter().sum();
    if d >= e {
        return Err(OracleError::PreconditionViolated(
            "d must be smaller than the total sum".into(),
        ));
    }

    let t = sorted.len();
    let e_rat = Rational::from_integer(BigInt::from(e));
    let int = |x: u64| Rational::from_integer(BigInt::from(x));
    // ε keeps the tilted entries strictly below d/e and (e−d)/e in sample 2.
    let eps = int(d.min(e - d)) / (&e_rat * int((t + 1) as u64));

    let mut one_freqs: Vec<Vec<Rational>> = vec![Vec::new(), Vec::new()];
    one_freqs[0].push(int(d) / &e_rat);
    one_freqs[0].push(int(e - d) / &e_rat);
    one_freqs[1].push(int(e - d) / &e_rat);
    one_freqs[1].push(int(d) / &e_rat);
    for (idx, &val) in sorted.iter().enumerate() {
        one_freqs[0].push(int(val) / &e_rat);
        one_freqs[1].push(int((t - idx) as u64) * &eps / &e_rat);
    }

    let n = t + 2;
    let rows: Vec<Vec<Vec<Rational>>> = (0..2)
        .map(|p| {
            (0..n)
                .map(|c| {
                    let f1 = one_freqs[p][c].clone();
                    vec![Rational::one() - &f1, f1]
                })
                .collect()
        })
        .collect();
    let tensor = FrequencyTensor::new(vec![2; n], rows)?;
    tensor.validate()?;
    let trees = StateTreeSet::new((0..n).map(|c| StateTree::chain(c, 2)).collect())?;
    Ok((tensor, trees))
}

/// Dynamic-programming SUBSET SUM feasibility, the independent cross-check
/// for the instance generator above.
pub fn subset_sum_feasible(b: &[u64], d: u64) -> bool {
    let d = d as usize;
    let mut reach = vec![false; d + 1];
    reach[0] = true;
    for &val in b {
        let val = val as usize;
        if val > d {
            continue;
        }
        for sum in (val..=d).rev() {
            if reach[sum - val] {
                reach[sum] = true;
            }
        }
    }
    reach[d]
}

/// Verify that the binary state-vector matrix of a complete tree has full
/// row rank, by exact Gaussian elimination.
pub fn rank_check(t: &CloneTree, s: &StateTreeSet) -> Result<bool, ModelError> {
    let matrix = crate::model::tree_to_matrix(t, s)?;
    let rows = matrix.binary_expansion(s.state_counts().as_slice());
    let nrows = rows.len();
    let mut m: Vec<Vec<Rational>> = rows
        .into_iter()
        .map(|r| r.into_iter().map(|x| Rational::from_integer((x as i64).into())).collect())
        .collect();
    let ncols = m.first().map(|r| r.len()).unwrap_or(0);
    let mut rank = 0usize;
    let mut row = 0usize;
    for col in 0..ncols {
        if row == nrows {
            break;
        }
        if let Some(p) = (row..nrows).find(|&i| !m[i][col].is_zero()) {
            m.swap(row, p);
            let pivot = m[row][col].clone();
            for x in m[row].iter_mut() {
                *x /= &pivot;
            }
            for i in 0..nrows {
                if i != row && !m[i][col].is_zero() {
                    let factor = m[i][col].clone();
                    for j in 0..ncols {
                        let delta = &factor * &m[row][j];
                        m[i][j] -= delta;
                    }
                }
            }
            row += 1;
            rank += 1;
        }
    }
    Ok(rank == nrows)
}

/// Number of spanning arborescences of the ancestry graph rooted at the
/// root vertex, by the matrix-tree theorem (exact integer determinant of
/// the in-degree Laplacian minor). Verification utility for the all-root-
/// mass family.
pub fn count_arborescences(g: &AncestryGraph) -> BigInt {
    let n = g.vertex_count();
    if n <= 1 {
        return BigInt::one();
    }
    // Laplacian over non-root vertices: L[v][v] = indeg(v), L[u][v] = -1 per
    // edge u→v.
    let dim = n - 1;
    let mut l = vec![vec![BigInt::zero(); dim]; dim];
    for tail in 0..n {
        for &head in g.out_edges(tail) {
            l[head - 1][head - 1] += 1;
            if tail != 0 {
                l[tail - 1][head - 1] -= 1;
            }
        }
    }
    // Bareiss fraction-free elimination.
    let mut denom = BigInt::one();
    let mut sign = BigInt::one();
    for k in 0..dim {
        if l[k][k].is_zero() {
            match (k + 1..dim).find(|&i| !l[i][k].is_zero()) {
                Some(swap) => {
                    l.swap(k, swap);
                    sign = -sign;
                }
                None => return BigInt::zero(),
            }
        }
        for i in k + 1..dim {
            for j in k + 1..dim {
                let v = (&l[i][j] * &l[k][k] - &l[i][k] * &l[k][j]) / &denom;
                l[i][j] = v;
            }
            l[i][k] = BigInt::zero();
        }
        denom = l[k][k].clone();
    }
    let det = l[dim - 1][dim - 1].clone() * sign;
    debug_assert!(!det.is_negative());
    det
}
