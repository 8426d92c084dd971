//! Copy-number-aware cancer model: the ten (maternal, paternal, mutated)
//! states, the thirteen allowed state trees, VAF/frequency conversions,
//! compatibility tests and instance construction from measurements.
//!
//! A genomic locus is a character whose states are copy-number triples
//! `(x, y, z)`. A locus undergoes one SNV event and at most one CN-LOH,
//! single-copy deletion or single-copy amplification event, which yields a
//! fixed catalog of thirteen rooted state trees. Given a state tree, the
//! class proportions µ and the VAF pin every state frequency through a
//! linear system; `derive_frequencies` solves that system exactly rather
//! than hardcoding its solutions, and the golden tests pin the closed
//! forms row by row.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::model::{
    FrequencyIntervalTensor, FrequencyTensor, ModelError, StateTree, StateTreeSet,
};
use crate::rational::{format_exact, parse_exact, Rational};

#[derive(Debug, Error)]
pub enum CnaError {
    #[error("proportions incompatible with state tree {tree}: {reason}")]
    IncompatibleProportions { tree: usize, reason: String },
    #[error("VAF interval does not intersect the admissible interval of tree {tree}")]
    EmptyIntersection { tree: usize },
    #[error("zero copy-number denominator")]
    ZeroDenominator,
    #[error("state {0} is not one of the ten copy-number states")]
    UnsupportedState(usize),
    #[error("malformed measurement: {0}")]
    BadMeasurement(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Maternal copies, paternal copies, mutated copies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CopyNumberState {
    pub x: u8,
    pub y: u8,
    pub z: u8,
}

impl CopyNumberState {
    pub fn total(&self) -> u8 {
        self.x + self.y
    }
}

/// The ten states, in the fixed global order used everywhere.
pub const STATES: [CopyNumberState; 10] = [
    CopyNumberState { x: 1, y: 1, z: 0 }, // 0: diploid, no SNV
    CopyNumberState { x: 1, y: 1, z: 1 }, // 1: diploid with SNV
    CopyNumberState { x: 2, y: 0, z: 0 }, // 2: CN-LOH without SNV
    CopyNumberState { x: 2, y: 0, z: 1 }, // 3: CN-LOH prior to SNV
    CopyNumberState { x: 2, y: 0, z: 2 }, // 4: CN-LOH retaining SNV
    CopyNumberState { x: 1, y: 0, z: 0 }, // 5: SCD without SNV
    CopyNumberState { x: 1, y: 0, z: 1 }, // 6: SCD retaining SNV
    CopyNumberState { x: 2, y: 1, z: 0 }, // 7: SCA without SNV
    CopyNumberState { x: 2, y: 1, z: 1 }, // 8: SCA prior to SNV
    CopyNumberState { x: 2, y: 1, z: 2 }, // 9: SCA of SNV
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    Snv,
    CnLoh,
    Scd,
    Sca,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum CnaClass {
    Neutral,
    Loh,
    Scd,
    Sca,
}

/// CNA class of a global state index.
pub fn class_of_state(global: usize) -> Result<CnaClass, CnaError> {
    match global {
        0 | 1 => Ok(CnaClass::Neutral),
        2..=4 => Ok(CnaClass::Loh),
        5 | 6 => Ok(CnaClass::Scd),
        7..=9 => Ok(CnaClass::Sca),
        other => Err(CnaError::UnsupportedState(other)),
    }
}

/// One of the thirteen allowed state trees, over compact states `0..k`
/// mapped to global copy-number states.
#[derive(Debug, Clone)]
pub struct CatalogTree {
    pub id: usize,
    /// Global state index per compact state; `global[0] == 0`.
    pub global: Vec<usize>,
    /// Compact parent per compact state.
    pub parent: Vec<Option<usize>>,
    /// Kind of the edge into each compact state.
    pub kind: Vec<Option<EdgeKind>>,
    /// CNA class of the tree's single CNA edge (`Neutral` for the SNV-only tree).
    pub class: CnaClass,
}

impl CatalogTree {
    pub fn state_count(&self) -> usize {
        self.global.len()
    }

    pub fn copy_number(&self, compact: usize) -> CopyNumberState {
        STATES[self.global[compact]]
    }

    pub fn to_state_tree(&self, character: usize) -> StateTree {
        StateTree::new(character, self.parent.clone()).expect("catalog trees are well formed")
    }

    /// Project a global 10-vector onto this tree's compact states.
    pub fn compact<T: Clone>(&self, global: &[T; 10]) -> Vec<T> {
        self.global.iter().map(|&g| global[g].clone()).collect()
    }
}

fn tree(
    id: usize,
    global: Vec<usize>,
    parent: Vec<Option<usize>>,
    kind: Vec<Option<EdgeKind>>,
    class: CnaClass,
) -> CatalogTree {
    CatalogTree { id, global, parent, kind, class }
}

/// The fixed catalog S⁰…S¹². Within the pairs that share a state set and
/// therefore a frequency row (S²/S³ and S⁵/S⁶), the branching tree carries
/// the lower index.
pub fn catalog() -> &'static [CatalogTree; 13] {
    static CATALOG: OnceLock<[CatalogTree; 13]> = OnceLock::new();
    CATALOG.get_or_init(|| {
        let snv = Some(EdgeKind::Snv);
        let loh = Some(EdgeKind::CnLoh);
        let scd = Some(EdgeKind::Scd);
        let sca = Some(EdgeKind::Sca);
        [
            // S0: single SNV.
            tree(0, vec![0, 1], vec![None, Some(0)], vec![None, snv], CnaClass::Neutral),
            // S1: CN-LOH, then SNV on the duplicated run: (1,1,0)→(2,0,0)→(2,0,1).
            tree(1, vec![0, 2, 3], vec![None, Some(0), Some(1)], vec![None, loh, snv], CnaClass::Loh),
            // S2: SNV and CN-LOH on separate branches.
            tree(2, vec![0, 1, 2], vec![None, Some(0), Some(0)], vec![None, snv, loh], CnaClass::Loh),
            // S3: SNV, then CN-LOH losing the mutated copy: (1,1,1)→(2,0,0).
            tree(3, vec![0, 1, 2], vec![None, Some(0), Some(1)], vec![None, snv, loh], CnaClass::Loh),
            // S4: SNV, then CN-LOH duplicating the mutated copy: (1,1,1)→(2,0,2).
            tree(4, vec![0, 1, 4], vec![None, Some(0), Some(1)], vec![None, snv, loh], CnaClass::Loh),
            // S5: SNV and SCD on separate branches.
            tree(5, vec![0, 1, 5], vec![None, Some(0), Some(0)], vec![None, snv, scd], CnaClass::Scd),
            // S6: SNV, then SCD deleting the mutated copy: (1,1,1)→(1,0,0).
            tree(6, vec![0, 1, 5], vec![None, Some(0), Some(1)], vec![None, snv, scd], CnaClass::Scd),
            // S7: SNV, then SCD retaining the mutated copy: (1,1,1)→(1,0,1).
            tree(7, vec![0, 1, 6], vec![None, Some(0), Some(1)], vec![None, snv, scd], CnaClass::Scd),
            // S8: SCD, then SNV: (1,0,0)→(1,0,1).
            tree(8, vec![0, 5, 6], vec![None, Some(0), Some(1)], vec![None, scd, snv], CnaClass::Scd),
            // S9: SNV, then SCA of the mutated copy: (1,1,1)→(2,1,2).
            tree(9, vec![0, 1, 9], vec![None, Some(0), Some(1)], vec![None, snv, sca], CnaClass::Sca),
            // S10: SNV and SCA on separate branches.
            tree(10, vec![0, 1, 7], vec![None, Some(0), Some(0)], vec![None, snv, sca], CnaClass::Sca),
            // S11: SNV, then SCA of an unmutated copy: (1,1,1)→(2,1,1).
            tree(11, vec![0, 1, 8], vec![None, Some(0), Some(1)], vec![None, snv, sca], CnaClass::Sca),
            // S12: SCA, then SNV: (2,1,0)→(2,1,1).
            tree(12, vec![0, 7, 8], vec![None, Some(0), Some(1)], vec![None, sca, snv], CnaClass::Sca),
        ]
    })
}

/// CNA-class proportions of one (sample, locus) pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Proportions {
    pub mu0: Rational,
    pub loh: Rational,
    pub scd: Rational,
    pub sca: Rational,
}

impl Proportions {
    pub fn neutral() -> Self {
        Proportions {
            mu0: Rational::one(),
            loh: Rational::zero(),
            scd: Rational::zero(),
            sca: Rational::zero(),
        }
    }

    pub fn class(&self, class: CnaClass) -> &Rational {
        match class {
            CnaClass::Neutral => &self.mu0,
            CnaClass::Loh => &self.loh,
            CnaClass::Scd => &self.scd,
            CnaClass::Sca => &self.sca,
        }
    }

    pub fn sums_to_one(&self) -> bool {
        (&self.mu0 + &self.loh + &self.scd + &self.sca).is_one()
    }

    fn check_for_tree(&self, t: &CatalogTree) -> Result<(), CnaError> {
        if !self.sums_to_one() {
            return Err(CnaError::IncompatibleProportions {
                tree: t.id,
                reason: "proportions do not sum to 1".into(),
            });
        }
        for class in [CnaClass::Loh, CnaClass::Scd, CnaClass::Sca] {
            let touched = t
                .global
                .iter()
                .any(|&g| class_of_state(g).expect("catalog state") == class);
            if !touched && !self.class(class).is_zero() {
                return Err(CnaError::IncompatibleProportions {
                    tree: t.id,
                    reason: format!("nonzero {class:?} proportion for a tree without that class"),
                });
            }
        }
        Ok(())
    }
}

/// Solve the defining linear system of state tree `tree_id` for the state
/// frequencies: class sums reproduce µ and the VAF relation holds. Returns
/// the global 10-vector with absent states at 0; entries may be negative,
/// which is exactly what compatibility testing inspects.
pub fn derive_frequencies(
    tree_id: usize,
    h: &Rational,
    mu: &Proportions,
) -> Result<[Rational; 10], CnaError> {
    let t = &catalog()[tree_id];
    mu.check_for_tree(t)?;
    let k = t.state_count();

    // Unknowns: compact state frequencies. Rows: one per touched class,
    // then the linearized VAF relation Σ (z_i − h·(x_i+y_i)) f_i = 0.
    let mut touched: Vec<CnaClass> = t
        .global
        .iter()
        .map(|&g| class_of_state(g).expect("catalog state"))
        .collect::<Vec<_>>();
    touched.sort();
    touched.dedup();

    let mut rows: Vec<Vec<Rational>> = Vec::new();
    for class in &touched {
        let mut row = vec![Rational::zero(); k + 1];
        for (i, &g) in t.global.iter().enumerate() {
            if class_of_state(g).unwrap() == *class {
                row[i] = Rational::one();
            }
        }
        row[k] = mu.class(*class).clone();
        rows.push(row);
    }
    {
        let mut row = vec![Rational::zero(); k + 1];
        for (i, &g) in t.global.iter().enumerate() {
            let st = STATES[g];
            row[i] = Rational::from_integer((st.z as i64).into())
                - h * Rational::from_integer((st.total() as i64).into());
        }
        rows.push(row);
    }
    debug_assert_eq!(rows.len(), k);

    // Exact Gaussian elimination on the k×(k+1) augmented system.
    let mut solution = vec![Rational::zero(); k];
    let mut r = 0usize;
    let mut pivots = Vec::new();
    for col in 0..k {
        if let Some(p) = (r..rows.len()).find(|&i| !rows[i][col].is_zero()) {
            rows.swap(r, p);
            let pivot = rows[r][col].clone();
            for x in rows[r].iter_mut() {
                *x /= &pivot;
            }
            for i in 0..rows.len() {
                if i != r && !rows[i][col].is_zero() {
                    let factor = rows[i][col].clone();
                    for j in 0..=k {
                        let delta = &factor * &rows[r][j];
                        rows[i][j] -= delta;
                    }
                }
            }
            pivots.push((r, col));
            r += 1;
        }
    }
    if pivots.len() != k {
        return Err(CnaError::IncompatibleProportions {
            tree: tree_id,
            reason: "singular frequency system".into(),
        });
    }
    for (row, col) in pivots {
        solution[col] = rows[row][k].clone();
    }

    let mut out: [Rational; 10] = std::array::from_fn(|_| Rational::zero());
    for (i, &g) in t.global.iter().enumerate() {
        out[g] = solution[i].clone();
    }
    Ok(out)
}

/// Admissible VAF interval `[h̲, h̄]` of a state tree given proportions.
pub fn vaf_interval(tree_id: usize, mu: &Proportions) -> Result<(Rational, Rational), CnaError> {
    let t = &catalog()[tree_id];
    mu.check_for_tree(t)?;
    let zero = Rational::zero();
    let one = Rational::one();
    let two = Rational::from_integer(2.into());
    let half = &one / &two;
    let pair = match tree_id {
        0 => (zero, half),
        1 => (zero, &mu.loh / &two),
        2 | 3 => (zero, &mu.mu0 / &two),
        4 => (mu.loh.clone(), (&one + &mu.loh) / &two),
        5 | 6 => (zero, &mu.mu0 / (&one + &mu.mu0)),
        7 => (&mu.scd / (&one + &mu.mu0), &one / (&one + &mu.mu0)),
        8 => (zero, &mu.scd / (&one + &mu.mu0)),
        9 => (
            (&two * &mu.sca) / (&two + &mu.sca),
            (&one + &mu.sca) / (&two + &mu.sca),
        ),
        10 => (zero, &mu.mu0 / (&two + &mu.sca)),
        11 => (&mu.sca / (&two + &mu.sca), &one / (&two + &mu.sca)),
        12 => (zero, &mu.sca / (&two + &mu.sca)),
        other => return Err(CnaError::UnsupportedState(other)),
    };
    Ok(pair)
}

/// Eq. relating a VAF to state frequencies: Σ z_i f_i / Σ (x_i + y_i) f_i.
pub fn vaf_from_frequencies(f: &[Rational; 10]) -> Result<Rational, CnaError> {
    let mut num = Rational::zero();
    let mut den = Rational::zero();
    for (i, st) in STATES.iter().enumerate() {
        num += Rational::from_integer((st.z as i64).into()) * &f[i];
        den += Rational::from_integer((st.total() as i64).into()) * &f[i];
    }
    if den.is_zero() {
        return Err(CnaError::ZeroDenominator);
    }
    Ok(num / den)
}

/// Observables of a compact frequency vector under a catalog tree: the VAF
/// and the class proportions recovered from class sums.
pub fn observables(t: &CatalogTree, compact: &[Rational]) -> Result<(Rational, Proportions), CnaError> {
    if compact.len() != t.state_count() {
        return Err(CnaError::UnsupportedState(compact.len()));
    }
    let mut global: [Rational; 10] = std::array::from_fn(|_| Rational::zero());
    for (i, &g) in t.global.iter().enumerate() {
        global[g] = compact[i].clone();
    }
    let h = vaf_from_frequencies(&global)?;
    let mut mu = Proportions {
        mu0: Rational::zero(),
        loh: Rational::zero(),
        scd: Rational::zero(),
        sca: Rational::zero(),
    };
    for (g, f) in global.iter().enumerate() {
        match class_of_state(g)? {
            CnaClass::Neutral => mu.mu0 += f,
            CnaClass::Loh => mu.loh += f,
            CnaClass::Scd => mu.scd += f,
            CnaClass::Sca => mu.sca += f,
        }
    }
    Ok((h, mu))
}

/// Raw observables of one (sample, locus) pair.
#[derive(Debug, Clone)]
pub struct SampleMeasurement {
    pub vaf: Rational,
    pub vaf_lb: Rational,
    pub vaf_ub: Rational,
    pub mu: Proportions,
}

/// All samples of one locus.
#[derive(Debug, Clone)]
pub struct LocusMeasurement {
    pub locus: String,
    pub samples: Vec<SampleMeasurement>,
}

impl LocusMeasurement {
    pub fn validate(&self) -> Result<(), CnaError> {
        let mut nonzero = [false; 3];
        for (p, s) in self.samples.iter().enumerate() {
            if !s.mu.sums_to_one() {
                return Err(CnaError::BadMeasurement(format!(
                    "{} sample {p}: proportions do not sum to 1",
                    self.locus
                )));
            }
            if s.vaf_lb > s.vaf || s.vaf > s.vaf_ub {
                return Err(CnaError::BadMeasurement(format!(
                    "{} sample {p}: VAF outside its interval",
                    self.locus
                )));
            }
            if s.vaf_lb.is_negative() || s.vaf_ub > Rational::one() {
                return Err(CnaError::BadMeasurement(format!(
                    "{} sample {p}: VAF interval outside [0,1]",
                    self.locus
                )));
            }
            for (slot, v) in [&s.mu.loh, &s.mu.scd, &s.mu.sca].into_iter().enumerate() {
                if !v.is_zero() {
                    nonzero[slot] = true;
                }
            }
        }
        if nonzero.iter().filter(|&&x| x).count() > 1 {
            return Err(CnaError::BadMeasurement(format!(
                "{}: more than one CNA class across samples",
                self.locus
            )));
        }
        Ok(())
    }
}

/// A state tree is compatible with a locus when its derived frequencies are
/// nonnegative in every sample.
pub fn is_compatible(tree_id: usize, samples: &[SampleMeasurement]) -> bool {
    samples.iter().all(|s| match derive_frequencies(tree_id, &s.vaf, &s.mu) {
        Ok(f) => f.iter().all(|x| !x.is_negative()),
        Err(_) => false,
    })
}

/// Noisy compatibility: the VAF interval intersects the admissible interval
/// in every sample.
pub fn is_compatible_noisy(tree_id: usize, samples: &[SampleMeasurement]) -> bool {
    samples.iter().all(|s| match vaf_interval(tree_id, &s.mu) {
        Ok((lo, hi)) => {
            let l = if s.vaf_lb > lo { s.vaf_lb.clone() } else { lo };
            let u = if s.vaf_ub < hi { s.vaf_ub.clone() } else { hi };
            l <= u
        }
        Err(_) => false,
    })
}

/// Interval version of `derive_frequencies`: the VAF interval is clamped to
/// the admissible interval, the affine per-state formulas are evaluated at
/// both endpoints, and the state-0 upper bound is lifted to 1 for the noisy
/// algorithm's precondition.
pub fn derive_frequency_intervals(
    tree_id: usize,
    h_interval: (&Rational, &Rational),
    mu: &Proportions,
) -> Result<([Rational; 10], [Rational; 10]), CnaError> {
    let (alo, ahi) = vaf_interval(tree_id, mu)?;
    let lo = if *h_interval.0 > alo { h_interval.0.clone() } else { alo };
    let hi = if *h_interval.1 < ahi { h_interval.1.clone() } else { ahi };
    if lo > hi {
        return Err(CnaError::EmptyIntersection { tree: tree_id });
    }
    let at_lo = derive_frequencies(tree_id, &lo, mu)?;
    let at_hi = derive_frequencies(tree_id, &hi, mu)?;
    let mut lower: [Rational; 10] = std::array::from_fn(|_| Rational::zero());
    let mut upper: [Rational; 10] = std::array::from_fn(|_| Rational::zero());
    for i in 0..10 {
        // Every state frequency is affine in h, so extremes sit at endpoints.
        let (a, b) = (&at_lo[i], &at_hi[i]);
        lower[i] = if a < b { a.clone() } else { b.clone() };
        upper[i] = if a > b { a.clone() } else { b.clone() };
    }
    upper[0] = Rational::one();
    Ok((lower, upper))
}

/// One enumeration instance over the kept characters of a measurement set.
#[derive(Debug, Clone)]
pub struct CnaInstance {
    /// Catalog tree id per kept character.
    pub combination: Vec<usize>,
    /// Locus names of the kept characters, in order.
    pub characters: Vec<String>,
    pub state_trees: StateTreeSet,
    pub data: CnaInstanceData,
}

#[derive(Debug, Clone)]
pub enum CnaInstanceData {
    Exact(FrequencyTensor),
    Noisy(FrequencyIntervalTensor),
}

/// Enumerate the Cartesian product of each character's compatible state
/// trees, one instance per combination. Characters compatible with no tree
/// are dropped and reported in the second return value.
pub fn combinations(
    loci: &[LocusMeasurement],
    noisy: bool,
) -> Result<(Vec<CnaInstance>, Vec<String>), CnaError> {
    for l in loci {
        l.validate()?;
    }
    let m = loci.first().map(|l| l.samples.len()).unwrap_or(0);
    for l in loci {
        if l.samples.len() != m {
            return Err(CnaError::BadMeasurement(format!(
                "{} has {} samples, expected {m}",
                l.locus,
                l.samples.len()
            )));
        }
    }

    let mut kept: Vec<(usize, Vec<usize>)> = Vec::new();
    let mut dropped = Vec::new();
    for (c, l) in loci.iter().enumerate() {
        let compat: Vec<usize> = (0..13)
            .filter(|&id| {
                if noisy {
                    is_compatible_noisy(id, &l.samples)
                } else {
                    is_compatible(id, &l.samples)
                }
            })
            .collect();
        if compat.is_empty() {
            dropped.push(l.locus.clone());
        } else {
            kept.push((c, compat));
        }
    }

    let mut instances = Vec::new();
    if kept.is_empty() {
        return Ok((instances, dropped));
    }
    let mut cursor = vec![0usize; kept.len()];
    loop {
        let combination: Vec<usize> =
            kept.iter().zip(&cursor).map(|((_, opts), &i)| opts[i]).collect();
        instances.push(build_instance(loci, &kept, &combination, m, noisy)?);
        // Odometer increment.
        let mut pos = kept.len();
        loop {
            if pos == 0 {
                return Ok((instances, dropped));
            }
            pos -= 1;
            cursor[pos] += 1;
            if cursor[pos] < kept[pos].1.len() {
                break;
            }
            cursor[pos] = 0;
        }
    }
}

fn build_instance(
    loci: &[LocusMeasurement],
    kept: &[(usize, Vec<usize>)],
    combination: &[usize],
    m: usize,
    noisy: bool,
) -> Result<CnaInstance, CnaError> {
    let trees: Vec<&CatalogTree> = combination.iter().map(|&id| &catalog()[id]).collect();
    let state_trees = StateTreeSet::new(
        trees.iter().enumerate().map(|(c, t)| t.to_state_tree(c)).collect(),
    )?;
    let characters: Vec<String> =
        kept.iter().map(|&(orig, _)| loci[orig].locus.clone()).collect();
    let counts: Vec<usize> = trees.iter().map(|t| t.state_count()).collect();

    let data = if noisy {
        let mut lower = vec![vec![Vec::new(); trees.len()]; m];
        let mut upper = vec![vec![Vec::new(); trees.len()]; m];
        for (c, (&(orig, _), t)) in kept.iter().zip(&trees).enumerate() {
            for p in 0..m {
                let s = &loci[orig].samples[p];
                let (lo, hi) =
                    derive_frequency_intervals(t.id, (&s.vaf_lb, &s.vaf_ub), &s.mu)?;
                lower[p][c] = t.compact(&lo);
                upper[p][c] = t.compact(&hi);
            }
        }
        CnaInstanceData::Noisy(FrequencyIntervalTensor::new(counts, lower, upper)?)
    } else {
        let mut rows = vec![vec![Vec::new(); trees.len()]; m];
        for (c, (&(orig, _), t)) in kept.iter().zip(&trees).enumerate() {
            for p in 0..m {
                let s = &loci[orig].samples[p];
                let f = derive_frequencies(t.id, &s.vaf, &s.mu)?;
                rows[p][c] = t.compact(&f);
            }
        }
        let tensor = FrequencyTensor::new(counts, rows)?;
        tensor.validate()?;
        CnaInstanceData::Exact(tensor)
    };
    Ok(CnaInstance { combination: combination.to_vec(), characters, state_trees, data })
}

pub const MEASUREMENT_HEADER: &str =
    "sample_id\tlocus_id\tvaf\tvaf_lb\tvaf_ub\tmu0\tmuLOH\tmuSCD\tmuSCA";

/// Render measurements as TSV, locus-major, one row per (sample, locus).
pub fn write_measurements_tsv(loci: &[LocusMeasurement], sample_names: &[String]) -> String {
    let mut out = String::from(MEASUREMENT_HEADER);
    out.push('\n');
    for l in loci {
        for (p, s) in l.samples.iter().enumerate() {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                sample_names[p],
                l.locus,
                format_exact(&s.vaf),
                format_exact(&s.vaf_lb),
                format_exact(&s.vaf_ub),
                format_exact(&s.mu.mu0),
                format_exact(&s.mu.loh),
                format_exact(&s.mu.scd),
                format_exact(&s.mu.sca),
            ));
        }
    }
    out
}

/// Parse the measurement TSV. Loci and samples keep first-appearance order;
/// the table must be rectangular.
pub fn parse_measurements_tsv(text: &str) -> Result<(Vec<LocusMeasurement>, Vec<String>), CnaError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| CnaError::BadMeasurement("empty file".into()))?;
    if header.trim() != MEASUREMENT_HEADER.trim() {
        return Err(CnaError::BadMeasurement(format!("unexpected header `{header}`")));
    }
    let mut sample_names: Vec<String> = Vec::new();
    let mut locus_order: Vec<String> = Vec::new();
    let mut cells: BTreeMap<(String, String), SampleMeasurement> = BTreeMap::new();
    for (lineno, line) in lines.enumerate() {
        let parts: Vec<&str> = line.split('\t').collect();
        if parts.len() != 9 {
            return Err(CnaError::BadMeasurement(format!(
                "line {}: expected 9 columns, found {}",
                lineno + 2,
                parts.len()
            )));
        }
        let parse = |s: &str| {
            parse_exact(s).map_err(|e| CnaError::BadMeasurement(format!(
                "line {}: {e}",
                lineno + 2
            )))
        };
        let sample = parts[0].to_string();
        let locus = parts[1].to_string();
        if !sample_names.contains(&sample) {
            sample_names.push(sample.clone());
        }
        if !locus_order.contains(&locus) {
            locus_order.push(locus.clone());
        }
        let meas = SampleMeasurement {
            vaf: parse(parts[2])?,
            vaf_lb: parse(parts[3])?,
            vaf_ub: parse(parts[4])?,
            mu: Proportions {
                mu0: parse(parts[5])?,
                loh: parse(parts[6])?,
                scd: parse(parts[7])?,
                sca: parse(parts[8])?,
            },
        };
        if cells.insert((locus.clone(), sample.clone()), meas).is_some() {
            return Err(CnaError::BadMeasurement(format!(
                "duplicate row for sample {sample}, locus {locus}"
            )));
        }
    }
    let mut loci = Vec::new();
    for locus in locus_order {
        let mut samples = Vec::new();
        for sample in &sample_names {
            let key = (locus.clone(), sample.clone());
            match cells.remove(&key) {
                Some(m) => samples.push(m),
                None => {
                    return Err(CnaError::BadMeasurement(format!(
                        "missing row for sample {sample}, locus {locus}"
                    )))
                }
            }
        }
        loci.push(LocusMeasurement { locus, samples });
    }
    Ok((loci, sample_names))
}
