//! Ground-truth instance generation: random catalog state trees, random
//! consistent clone trees, flat-simplex usage rows, forward mixing, and
//! read-count noise with beta-posterior confidence intervals.

use num_bigint::BigInt;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use statrs::distribution::{Beta, ContinuousCDF};
use thiserror::Error;

use crate::cna::{
    self, catalog, CnaError, LocusMeasurement, Proportions, SampleMeasurement,
};
use crate::model::{
    CharStatePair, CloneTree, FrequencyTensor, ModelError, StateTreeSet, UsageMatrix, Vertex,
};
use crate::rational::{from_f64, to_f64, Rational};
use num_traits::{One, Zero};
use std::collections::BTreeMap;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("bad simulation config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Cna(#[from] CnaError),
}

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub n: usize,
    pub m: usize,
    /// Expected reads per locus; `None` simulates error-free data.
    pub coverage: Option<f64>,
    pub seed: u64,
    /// Confidence level of the VAF intervals.
    pub confidence: f64,
}

impl SimulationConfig {
    pub fn new(n: usize, m: usize, seed: u64) -> Result<Self, SimError> {
        if n == 0 || m == 0 {
            return Err(SimError::BadConfig("n and m must be at least 1".into()));
        }
        Ok(SimulationConfig { n, m, coverage: None, seed, confidence: 0.95 })
    }

    pub fn with_coverage(mut self, coverage: f64) -> Result<Self, SimError> {
        if !coverage.is_finite() || coverage <= 0.0 {
            return Err(SimError::BadConfig("coverage must be positive".into()));
        }
        self.coverage = Some(coverage);
        Ok(self)
    }

    pub fn with_confidence(mut self, confidence: f64) -> Result<Self, SimError> {
        if !(0.0 < confidence && confidence < 1.0) {
            return Err(SimError::BadConfig("confidence must be in (0,1)".into()));
        }
        self.confidence = confidence;
        Ok(self)
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedInstance {
    pub config: SimulationConfig,
    /// Catalog tree id per character.
    pub catalog_ids: Vec<usize>,
    pub state_trees: StateTreeSet,
    pub tree: CloneTree,
    pub usage: UsageMatrix,
    pub tensor: FrequencyTensor,
}

/// Draw one instance: a catalog state tree per character, a uniformly random
/// consistent complete clone tree, flat-simplex usage rows, and the mixed
/// tensor. Identical seeds reproduce identical instances bit for bit.
pub fn simulate_instance(cfg: &SimulationConfig) -> Result<SimulatedInstance, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let catalog_ids: Vec<usize> = (0..cfg.n).map(|_| rng.random_range(0..13)).collect();
    let state_trees = StateTreeSet::new(
        catalog_ids
            .iter()
            .enumerate()
            .map(|(c, &id)| catalog()[id].to_state_tree(c))
            .collect(),
    )?;

    let tree = random_consistent_tree(&state_trees, &mut rng)?;
    let usage = random_usage(&tree, cfg.m, &mut rng)?;
    let tensor = crate::usage::mix(&tree, &usage)?;
    debug_assert!(crate::usage::generates(&tensor, &tree, &state_trees).unwrap());

    Ok(SimulatedInstance {
        config: cfg.clone(),
        catalog_ids,
        state_trees,
        tree,
        usage,
        tensor,
    })
}

/// Sequential insertion in random vertex order; each vertex attaches
/// uniformly among the positions that keep the tree consistent (the nearest
/// same-character vertex at or above the attachment point must carry the
/// state-tree parent). Every consistent tree is reachable this way.
fn random_consistent_tree(
    s: &StateTreeSet,
    rng: &mut ChaCha8Rng,
) -> Result<CloneTree, SimError> {
    let mut pending: Vec<CharStatePair> = Vec::new();
    for t in s.trees() {
        for st in 1..t.state_count() {
            pending.push(CharStatePair::new(t.character(), st));
        }
    }
    let mut parent: BTreeMap<CharStatePair, Vertex> = BTreeMap::new();

    let placed = |parent: &BTreeMap<CharStatePair, Vertex>, p: CharStatePair| {
        p.state == 0 || parent.contains_key(&p)
    };
    while !pending.is_empty() {
        let eligible: Vec<usize> = (0..pending.len())
            .filter(|&i| {
                let p = pending[i];
                let pi = s.tree(p.character).unwrap().parent_of(p.state).unwrap().unwrap();
                placed(&parent, CharStatePair::new(p.character, pi))
            })
            .collect();
        let pick = eligible[rng.random_range(0..eligible.len())];
        let pair = pending.remove(pick);
        let want = s.tree(pair.character)?.parent_of(pair.state)?.unwrap();

        // Candidate attachment points: the nearest pair.character-state at
        // or above the point must be `want`.
        let partial = CloneTree::from_parent_map(parent.clone()).expect("partial tree");
        let mut spots: Vec<Vertex> = Vec::new();
        for v in partial.vertices() {
            if partial.nearest_state_above(v, pair.character) == want {
                spots.push(v);
            }
        }
        let spot = spots[rng.random_range(0..spots.len())];
        parent.insert(pair, spot);
    }
    Ok(CloneTree::from_parent_map(parent)?)
}

/// Flat simplex row per sample via sorted integer gaps on a dyadic grid.
fn random_usage(
    t: &CloneTree,
    m: usize,
    rng: &mut ChaCha8Rng,
) -> Result<UsageMatrix, SimError> {
    const GRID: u64 = 1 << 32;
    let vertices = t.vertices();
    let v = vertices.len();
    let mut rows = Vec::with_capacity(m);
    for _ in 0..m {
        let mut cuts: Vec<u64> = (0..v - 1).map(|_| rng.random_range(0..=GRID)).collect();
        cuts.sort_unstable();
        let mut gaps = Vec::with_capacity(v);
        let mut prev = 0u64;
        for &c in &cuts {
            gaps.push(c - prev);
            prev = c;
        }
        gaps.push(GRID - prev);
        rows.push(
            gaps.into_iter()
                .map(|g| Rational::new(BigInt::from(g), BigInt::from(GRID)))
                .collect(),
        );
    }
    Ok(UsageMatrix::new(vertices, rows)?)
}

/// Per-character, per-sample observables (VAF and class proportions) of a
/// tensor supported on the given catalog trees; `[character][sample]`.
pub fn to_observables(
    f: &FrequencyTensor,
    catalog_ids: &[usize],
) -> Result<Vec<Vec<(Rational, Proportions)>>, CnaError> {
    let mut out = Vec::with_capacity(catalog_ids.len());
    for (c, &id) in catalog_ids.iter().enumerate() {
        let t = &catalog()[id];
        if f.state_counts()[c] != t.state_count() {
            return Err(CnaError::UnsupportedState(f.state_counts()[c]));
        }
        let mut per_sample = Vec::with_capacity(f.sample_count());
        for p in 0..f.sample_count() {
            let compact: Vec<Rational> =
                (0..t.state_count()).map(|i| f.get(p, c, i).clone()).collect();
            per_sample.push(cna::observables(t, &compact)?);
        }
        out.push(per_sample);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct ReadCounts {
    pub total: u64,
    pub variant: u64,
    pub lb: Rational,
    pub ub: Rational,
}

/// Sequencing noise for one (sample, locus) VAF: total reads from a Poisson
/// at the target coverage, variant reads from a binomial, and a central
/// confidence interval from the Beta(variant+1, total−variant+1) posterior.
/// Zero observed variants clamp the lower bound to 0, all-variant reads
/// clamp the upper bound to 1, and zero total reads give the uninformative
/// interval [0, 1].
pub fn add_read_noise(
    h: &Rational,
    coverage: f64,
    confidence: f64,
    rng: &mut ChaCha8Rng,
) -> ReadCounts {
    let total = Poisson::new(coverage).expect("positive coverage").sample(rng) as u64;
    if total == 0 {
        return ReadCounts { total: 0, variant: 0, lb: Rational::zero(), ub: Rational::one() };
    }
    let p = to_f64(h).clamp(0.0, 1.0);
    let variant = Binomial::new(total, p).expect("valid probability").sample(rng);
    let alpha = (1.0 - confidence) / 2.0;
    let posterior = Beta::new((variant + 1) as f64, (total - variant + 1) as f64)
        .expect("valid beta parameters");
    let lb = if variant == 0 {
        Rational::zero()
    } else {
        clamp_unit(from_f64(posterior.inverse_cdf(alpha)).unwrap_or_else(Rational::zero))
    };
    let ub = if variant == total {
        Rational::one()
    } else {
        clamp_unit(from_f64(posterior.inverse_cdf(1.0 - alpha)).unwrap_or_else(Rational::one))
    };
    ReadCounts { total, variant, lb, ub }
}

fn clamp_unit(r: Rational) -> Rational {
    if r < Rational::zero() {
        Rational::zero()
    } else if r > Rational::one() {
        Rational::one()
    } else {
        r
    }
}

/// Measurement rows for an instance: exact point intervals without coverage,
/// read-count noise with it. The noise stream is derived from the instance
/// seed, independent of the structure stream.
pub fn measurements(inst: &SimulatedInstance) -> Result<Vec<LocusMeasurement>, SimError> {
    let obs = to_observables(&inst.tensor, &inst.catalog_ids)?;
    let mut rng = ChaCha8Rng::seed_from_u64(inst.config.seed);
    rng.set_stream(1);
    let mut loci = Vec::with_capacity(inst.catalog_ids.len());
    for (c, per_sample) in obs.iter().enumerate() {
        let mut samples = Vec::with_capacity(per_sample.len());
        for (h, mu) in per_sample {
            let sm = match inst.config.coverage {
                None => SampleMeasurement {
                    vaf: h.clone(),
                    vaf_lb: h.clone(),
                    vaf_ub: h.clone(),
                    mu: mu.clone(),
                },
                Some(cov) => {
                    let counts = add_read_noise(h, cov, inst.config.confidence, &mut rng);
                    let vaf = if counts.total == 0 {
                        Rational::zero()
                    } else {
                        Rational::new(counts.variant.into(), counts.total.into())
                    };
                    // The observed VAF estimate is kept inside its interval.
                    let vaf = clamp_interval(vaf, &counts.lb, &counts.ub);
                    SampleMeasurement { vaf, vaf_lb: counts.lb, vaf_ub: counts.ub, mu: mu.clone() }
                }
            };
            samples.push(sm);
        }
        loci.push(LocusMeasurement { locus: format!("c{c}"), samples });
    }
    Ok(loci)
}

fn clamp_interval(v: Rational, lb: &Rational, ub: &Rational) -> Rational {
    if v < *lb {
        lb.clone()
    } else if v > *ub {
        ub.clone()
    } else {
        v
    }
}

pub fn sample_names(m: usize) -> Vec<String> {
    (0..m).map(|p| format!("s{p}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ancestry::AncestryGraph;
    use crate::enumerate::enumerate;

    #[test]
    fn determinism_bit_for_bit() {
        let cfg = SimulationConfig::new(4, 3, 1234).unwrap();
        let a = simulate_instance(&cfg).unwrap();
        let b = simulate_instance(&cfg).unwrap();
        assert_eq!(a.tree, b.tree);
        assert_eq!(a.usage.rows(), b.usage.rows());
        assert_eq!(a.tensor, b.tensor);
        let cfg2 = SimulationConfig::new(4, 3, 1235).unwrap();
        let c = simulate_instance(&cfg2).unwrap();
        assert!(a.tree != c.tree || a.usage.rows() != c.usage.rows());
    }

    #[test]
    fn simulated_instances_generate_their_tensors() {
        for seed in 0..20 {
            let cfg = SimulationConfig::new(3, 2, seed).unwrap();
            let inst = simulate_instance(&cfg).unwrap();
            assert!(inst.tree.is_complete(&inst.state_trees));
            inst.tree.check_consistent(&inst.state_trees).unwrap();
            inst.tensor.validate().unwrap();
            assert!(crate::usage::generates(&inst.tensor, &inst.tree, &inst.state_trees)
                .unwrap());
        }
    }

    #[test]
    fn enumeration_recovers_simulated_tree() {
        for seed in 0..10 {
            let cfg = SimulationConfig::new(3, 3, seed).unwrap();
            let inst = simulate_instance(&cfg).unwrap();
            let g = AncestryGraph::cladistic(&inst.tensor, &inst.state_trees).unwrap();
            let sols = enumerate(&g, &inst.tensor, &inst.state_trees, None).unwrap();
            assert!(sols.contains_tree(&inst.tree), "seed {seed} lost the truth");
        }
    }

    #[test]
    fn observables_of_all_root_mass() {
        // All usage at the root: µ0 = 1 and VAF 0 for every locus.
        let tree = CloneTree::from_edges([
            (Vertex::Root, Vertex::new(0, 1)), // S0 chain for one character
        ])
        .unwrap();
        let usage = UsageMatrix::new(
            tree.vertices(),
            vec![vec![Rational::one(), Rational::zero()]],
        )
        .unwrap();
        let f = crate::usage::mix(&tree, &usage).unwrap();
        let obs = to_observables(&f, &[0]).unwrap();
        let (h, mu) = &obs[0][0];
        assert!(h.is_zero());
        assert!(mu.mu0.is_one());
    }

    #[test]
    fn observables_round_trip_through_derivation() {
        let cfg = SimulationConfig::new(4, 2, 99).unwrap();
        let inst = simulate_instance(&cfg).unwrap();
        let obs = to_observables(&inst.tensor, &inst.catalog_ids).unwrap();
        for (c, per_sample) in obs.iter().enumerate() {
            let t = &catalog()[inst.catalog_ids[c]];
            for (p, (h, mu)) in per_sample.iter().enumerate() {
                let f = cna::derive_frequencies(t.id, h, mu).unwrap();
                let compact = t.compact(&f);
                for (i, v) in compact.iter().enumerate() {
                    assert_eq!(v, inst.tensor.get(p, c, i), "c{c} s{p} state {i}");
                }
            }
        }
    }

    #[test]
    fn noise_basics() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        // h = 0 never produces variant reads and keeps the lower bound at 0.
        let counts = add_read_noise(&Rational::zero(), 100.0, 0.95, &mut rng);
        assert_eq!(counts.variant, 0);
        assert!(counts.lb.is_zero());
        // Zero total reads give the uninformative interval [0, 1].
        let empty = add_read_noise(&Rational::new(1.into(), 2.into()), 1e-12, 0.95, &mut rng);
        assert_eq!(empty.total, 0);
        assert!(empty.lb.is_zero());
        assert!(empty.ub.is_one());
        // Very high coverage pins the interval near the truth.
        let h = Rational::new(3.into(), 10.into());
        let mut widths = Vec::new();
        for _ in 0..20 {
            let c = add_read_noise(&h, 1e6, 0.95, &mut rng);
            widths.push(&c.ub - &c.lb);
        }
        for w in widths {
            assert!(to_f64(&w) < 0.01);
        }
    }

    #[test]
    fn ci_calibration() {
        // True VAF inside the 95% interval at least ~93% of the time.
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let h = Rational::new(1.into(), 4.into());
        let draws = 400;
        let mut hits = 0;
        for _ in 0..draws {
            let c = add_read_noise(&h, 60.0, 0.95, &mut rng);
            if c.lb <= h && h <= c.ub {
                hits += 1;
            }
        }
        assert!(hits as f64 / draws as f64 >= 0.93, "hit rate {hits}/{draws}");
    }

    #[test]
    fn measurements_shape_and_point_intervals() {
        let cfg = SimulationConfig::new(3, 2, 5).unwrap();
        let inst = simulate_instance(&cfg).unwrap();
        let loci = measurements(&inst).unwrap();
        assert_eq!(loci.len(), 3);
        for l in &loci {
            l.validate().unwrap();
            for s in &l.samples {
                assert_eq!(s.vaf_lb, s.vaf);
                assert_eq!(s.vaf_ub, s.vaf);
            }
        }
        let noisy_cfg = SimulationConfig::new(3, 2, 5)
            .unwrap()
            .with_coverage(500.0)
            .unwrap();
        let noisy_inst = simulate_instance(&noisy_cfg).unwrap();
        // Same structure stream regardless of coverage.
        assert_eq!(noisy_inst.tree, inst.tree);
        let noisy = measurements(&noisy_inst).unwrap();
        for l in &noisy {
            l.validate().unwrap();
        }
    }
}
