//! Born-rule sampling from lattices by monitored ancilla evolution.
//!
//! The exact sampler carries a pure frontier state over the cut ancilla
//! legs; at each site it applies the isometry, samples the physical index
//! from its marginal, projects and renormalizes. On `W`-perturbed lattices,
//! unequal outcomes (01 or 10) on a monitored pair project the corresponding
//! outgoing ancilla onto a basis state, severing the bond: the
//! reset-accelerated sampler exploits this by keeping the frontier as a
//! product of independent factors and splitting factors at every reset, so
//! each connected component of unsevered bonds is simulated on its own.
//! Samples whose largest component exceeds a cutoff `s_th` are rejected;
//! conditioned on acceptance the output distribution is identical to the
//! exact sampler's.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::Caps;
use crate::frontier::{ket_bond, ket_phys, site_ket_tensor, unit_frontier};
use crate::lattice::{IsoTnsLattice, Role, Site};
use rand::Rng;
use crate::rng::stream_rng;
use crate::tensor::{contract, C64, DenseTensor, ONE, ZERO};

/// One sampled trajectory: the physical outcome at every site in causal scan
/// order, the conditional probability of each outcome, and the reset events
/// observed on monitored bonds.
#[derive(Clone, Debug, Serialize)]
pub struct TrajectoryRecord {
    pub outcomes: Vec<usize>,
    pub probabilities: Vec<f64>,
    pub reset_events: Vec<(Site, char)>,
    pub seed: u64,
    pub stream: u64,
}

impl TrajectoryRecord {
    /// Joint probability of the outcome string (product of conditionals).
    pub fn joint_probability(&self) -> f64 {
        self.probabilities.iter().product()
    }

    pub fn log_probability(&self) -> f64 {
        self.probabilities.iter().map(|p| p.ln()).sum()
    }

    /// One base-36 symbol per site.
    pub fn outcome_string(&self) -> String {
        self.outcomes
            .iter()
            .map(|&o| char::from_digit(o as u32, 36).expect("site dimension fits base 36"))
            .collect()
    }

    /// Row-major fused index of the outcome (matches `BornDistribution`).
    pub fn outcome_index(&self, dims: &[usize]) -> usize {
        self.outcomes
            .iter()
            .zip(dims)
            .fold(0usize, |acc, (&o, &d)| acc * d + o)
    }
}

/// Bonds severed by reset events, with the induced connected components of
/// the remaining (unsevered) bond graph.
#[derive(Clone, Debug)]
pub struct BondBreakMap {
    nx: usize,
    ny: usize,
    severed: Vec<(Site, char)>,
    component: Vec<usize>,
    sizes: Vec<usize>,
}

impl BondBreakMap {
    /// Reconstruct reset events and components from an outcome string: on a
    /// `W`-perturbed site, outcome pair 01 or 10 on a monitored branch severs
    /// the corresponding outgoing bond.
    pub fn from_outcomes(lattice: &IsoTnsLattice, outcomes: &[usize]) -> Result<Self> {
        let order = lattice.scan_order();
        if outcomes.len() != order.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} outcomes for {} sites",
                outcomes.len(),
                order.len()
            )));
        }
        let mut severed = Vec::new();
        for (&site, &outcome) in order.iter().zip(outcomes) {
            for (dir, pair) in [('r', outcome / 4), ('u', outcome % 4)] {
                if reset_pair(lattice, site, dir, pair) {
                    severed.push((site, dir));
                }
            }
        }
        Ok(Self::from_severed(lattice, severed))
    }

    fn from_severed(lattice: &IsoTnsLattice, severed: Vec<(Site, char)>) -> Self {
        let (nx, ny) = (lattice.nx(), lattice.ny());
        let mut uf = UnionFind::new(nx * ny);
        let idx = |s: Site| s.y * nx + s.x;
        for y in 0..ny {
            for x in 0..nx {
                let site = Site::new(x, y);
                let t = lattice.site(site);
                if x + 1 < nx && t.dr() > 1 && !severed.contains(&(site, 'r')) {
                    uf.union(idx(site), idx(Site::new(x + 1, y)));
                }
                if y + 1 < ny && t.du() > 1 && !severed.contains(&(site, 'u')) {
                    uf.union(idx(site), idx(Site::new(x, y + 1)));
                }
            }
        }
        let component: Vec<usize> = (0..nx * ny).map(|i| uf.find(i)).collect();
        let mut size_by_root: BTreeMap<usize, usize> = BTreeMap::new();
        for &root in &component {
            *size_by_root.entry(root).or_default() += 1;
        }
        let sizes = size_by_root.into_values().collect();
        Self { nx, ny, severed, component, sizes }
    }

    pub fn severed_bonds(&self) -> &[(Site, char)] {
        &self.severed
    }

    pub fn is_severed(&self, site: Site, dir: char) -> bool {
        self.severed.contains(&(site, dir))
    }

    /// Component label of each site (row-major).
    pub fn component_of(&self, site: Site) -> usize {
        self.component[site.y * self.nx + site.x]
    }

    pub fn component_sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn max_component(&self) -> usize {
        self.sizes.iter().copied().max().unwrap_or(0)
    }

    pub fn ny(&self) -> usize {
        self.ny
    }
}

/// Is `pair` a reset outcome (01 or 10) for the monitored branch of `site`
/// in direction `dir`?
fn reset_pair(lattice: &IsoTnsLattice, site: Site, dir: char, pair: usize) -> bool {
    let t = lattice.site(site);
    if t.role() != Role::WPerturbed {
        return false;
    }
    let live = match dir {
        'r' => t.dr() > 1,
        _ => t.du() > 1,
    };
    live && (pair == 1 || pair == 2)
}

struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), size: vec![1; n] }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
    }
}

/// Frontier kept as a product of independent pure factors plus classically
/// determined bond values from reset projections.
struct FactorFrontier {
    factors: Vec<Option<DenseTensor>>,
    classical: BTreeMap<String, usize>,
}

impl FactorFrontier {
    fn new() -> Self {
        Self { factors: Vec::new(), classical: BTreeMap::new() }
    }

    fn factor_holding(&self, label: &str) -> Option<usize> {
        self.factors.iter().position(|f| {
            f.as_ref().is_some_and(|t| t.leg_position(label).is_ok())
        })
    }

    /// Gather (merging if needed) the factor carrying the given legs.
    fn merged_factor(&mut self, labels: &[String]) -> Result<DenseTensor> {
        let mut acc = unit_frontier();
        let mut taken: Vec<usize> = Vec::new();
        for label in labels {
            if let Some(idx) = self.factor_holding(label) {
                if !taken.contains(&idx) {
                    taken.push(idx);
                }
            }
        }
        for idx in taken {
            let f = self.factors[idx].take().expect("factor present");
            acc = contract(&acc, &[], &f, &[])?;
        }
        Ok(acc)
    }

    fn push(&mut self, factor: DenseTensor) {
        if let Some(slot) = self.factors.iter_mut().find(|f| f.is_none()) {
            *slot = Some(factor);
        } else {
            self.factors.push(Some(factor));
        }
    }
}

/// Sample one trajectory. `split_resets` switches the reset-accelerated
/// factorized frontier on; the sampled distribution is identical either way.
fn sample_trajectory(
    lattice: &IsoTnsLattice,
    seed: u64,
    stream: u64,
    caps: &Caps,
    split_resets: bool,
) -> Result<TrajectoryRecord> {
    let mut rng = stream_rng(seed, stream);
    let mut frontier = FactorFrontier::new();
    let mut outcomes = Vec::with_capacity(lattice.n_sites());
    let mut probabilities = Vec::with_capacity(lattice.n_sites());
    let mut reset_events = Vec::new();

    for site in lattice.scan_order() {
        let tensor = lattice.site(site);
        let mut v = site_ket_tensor(site, tensor);
        // feed classically determined bonds straight into the site tensor
        for (label, value) in frontier.classical.clone() {
            if v.leg_position(&label).is_ok() {
                let dim = v.leg_dim(&label)?;
                let mut ket = vec![ZERO; dim];
                ket[value] = ONE;
                let basis = DenseTensor::new([label.clone()], vec![dim], ket)?;
                v = contract(&v, &[label.as_str()], &basis, &[label.as_str()])?;
                frontier.classical.remove(&label);
            }
        }
        // incoming legs are the bond legs named after other (producing) sites
        let own_r = ket_bond(site, 'r');
        let own_u = ket_bond(site, 'u');
        let in_labels: Vec<String> = v
            .labels()
            .iter()
            .filter(|l| l.starts_with("k:") && **l != own_r && **l != own_u)
            .cloned()
            .collect();
        let factor = frontier.merged_factor(&in_labels)?;
        let shared: Vec<&str> = in_labels
            .iter()
            .map(String::as_str)
            .filter(|l| factor.leg_position(l).is_ok())
            .collect();
        if factor.len().saturating_mul(v.len()) > caps.max_statevector.saturating_mul(4) {
            return Err(Error::CapExceeded(format!(
                "sampling frontier would reach {} entries",
                factor.len() * v.len()
            )));
        }
        let mut state = contract(&factor, &shared, &v, &shared)?;
        if state.len() > caps.max_statevector {
            return Err(Error::CapExceeded(format!(
                "sampling frontier holds {} entries, cap {}",
                state.len(),
                caps.max_statevector
            )));
        }

        // sample the physical index from its marginal
        let phys = ket_phys(site);
        let rest: Vec<&str> = state
            .labels()
            .iter()
            .map(String::as_str)
            .filter(|l| *l != phys.as_str())
            .collect();
        let flat = state.flatten(&[phys.as_str()], &rest)?;
        let d = tensor.d();
        let cols = flat.cols();
        let probs: Vec<f64> = (0..d)
            .map(|i| (0..cols).map(|j| flat.get(i, j).norm_sqr()).sum())
            .collect();
        let total: f64 = probs.iter().sum();
        let outcome = loop {
            let x: f64 = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = d - 1;
            for (i, &p) in probs.iter().enumerate() {
                acc += p;
                if x < acc {
                    chosen = i;
                    break;
                }
            }
            // branches below the renormalization threshold are redrawn
            if probs[chosen] / total >= 1e-14 {
                break chosen;
            }
        };
        let p = probs[outcome] / total;
        outcomes.push(outcome);
        probabilities.push(p);

        // project and renormalize
        let scale = C64::new(1.0 / probs[outcome].sqrt(), 0.0);
        let row: Vec<C64> = (0..cols).map(|j| flat.get(outcome, j) * scale).collect();
        let rest_dims: Vec<(&str, usize)> =
            rest.iter().map(|l| (*l, state.leg_dim(l).unwrap())).collect();
        state = DenseTensor::new(
            rest_dims.iter().map(|&(l, _)| l).collect::<Vec<_>>(),
            rest_dims.iter().map(|&(_, d)| d).collect(),
            row,
        )?;

        // reset handling on monitored branches
        for (dir, pair) in [('r', outcome / 4), ('u', outcome % 4)] {
            if !reset_pair(lattice, site, dir, pair) {
                continue;
            }
            reset_events.push((site, dir));
            if !split_resets {
                continue;
            }
            let label = ket_bond(site, dir);
            if state.leg_position(&label).is_err() {
                continue;
            }
            // outcome 01 projects the ancilla to |1>, outcome 10 to |0>
            let value = if pair == 1 { 1 } else { 0 };
            let dim = state.leg_dim(&label)?;
            let mut bra = vec![ZERO; dim];
            bra[value] = ONE;
            let basis = DenseTensor::new([format!("{label}#")], vec![dim], bra)?;
            let projected = contract(&state, &[label.as_str()], &basis, &[&format!("{label}#")])?;
            let norm2: f64 = projected.data().iter().map(|z| z.norm_sqr()).sum();
            if (norm2 - 1.0).abs() > 1e-9 {
                return Err(Error::Geometry(format!(
                    "reset projection left weight {norm2}, the bond did not factorize"
                )));
            }
            state = projected.scale(C64::new(1.0 / norm2.sqrt(), 0.0));
            frontier.classical.insert(label, value);
        }

        if state.rank() > 0 {
            frontier.push(state);
        }
    }

    Ok(TrajectoryRecord { outcomes, probabilities, reset_events, seed, stream })
}

/// Draw one exact Born-rule sample by sequential monitored evolution.
pub fn sample_exact(
    lattice: &IsoTnsLattice,
    seed: u64,
    stream: u64,
    caps: &Caps,
) -> Result<TrajectoryRecord> {
    sample_trajectory(lattice, seed, stream, caps, false)
}

/// Many exact samples with counter-derived independent streams, in parallel.
pub fn sample_exact_many(
    lattice: &IsoTnsLattice,
    seed: u64,
    n: u64,
    caps: &Caps,
) -> Result<Vec<TrajectoryRecord>> {
    (0..n)
        .into_par_iter()
        .map(|i| sample_exact(lattice, seed, i, caps))
        .collect()
}

/// Result of one reset-accelerated sampling attempt.
#[derive(Clone, Debug, Serialize)]
pub enum ResetSample {
    Accepted { record: TrajectoryRecord, max_component: usize },
    Rejected { record: TrajectoryRecord, max_component: usize },
}

impl ResetSample {
    pub fn record(&self) -> &TrajectoryRecord {
        match self {
            Self::Accepted { record, .. } | Self::Rejected { record, .. } => record,
        }
    }

    pub fn is_accepted(&self) -> bool {
        matches!(self, Self::Accepted { .. })
    }

    pub fn max_component(&self) -> usize {
        match self {
            Self::Accepted { max_component, .. } | Self::Rejected { max_component, .. } => {
                *max_component
            }
        }
    }
}

/// Sample a `W`-perturbed lattice with the factorized frontier; the sample is
/// rejected when any connected component of unsevered bonds exceeds `s_th`.
/// Conditioned on acceptance, the output distribution equals the exact
/// sampler's conditioned on the same event.
pub fn sample_with_resets(
    lattice: &IsoTnsLattice,
    s_th: Option<usize>,
    seed: u64,
    stream: u64,
    caps: &Caps,
) -> Result<ResetSample> {
    let record = sample_trajectory(lattice, seed, stream, caps, true)?;
    let breaks = BondBreakMap::from_outcomes(lattice, &record.outcomes)?;
    let max_component = breaks.max_component();
    let accepted = s_th.is_none_or(|cut| max_component <= cut);
    Ok(if accepted {
        ResetSample::Accepted { record, max_component }
    } else {
        ResetSample::Rejected { record, max_component }
    })
}

/// One row of the rejection-fraction sweep over the injectivity parameter.
#[derive(Clone, Debug, Serialize)]
pub struct RejectionRow {
    pub delta: f64,
    pub delta_sq: f64,
    pub s_th: usize,
    pub rejection_fraction: f64,
    pub mean_max_component: f64,
    pub largest_component_seen: usize,
    pub n_samples: u64,
}

/// Sweep the reset-accelerated sampler over a grid of `delta` values on an
/// `nx x ny` monitored lattice, reporting the fraction of samples whose
/// largest bond-percolation component exceeds `s_th`.
pub fn rejection_curve(
    nx: usize,
    ny: usize,
    unitaries: crate::lattice::WLatticeUnitaries,
    deltas: &[f64],
    s_th: usize,
    n_samples: u64,
    seed: u64,
    caps: &Caps,
) -> Result<Vec<RejectionRow>> {
    let mut rows = Vec::with_capacity(deltas.len());
    for (idx, &delta) in deltas.iter().enumerate() {
        let lattice = crate::lattice::w_perturbed_lattice(nx, ny, delta, unitaries)?;
        let samples: Vec<ResetSample> = (0..n_samples)
            .into_par_iter()
            .map(|i| {
                sample_with_resets(&lattice, Some(s_th), seed, (idx as u64) * n_samples + i, caps)
            })
            .collect::<Result<_>>()?;
        let rejected = samples.iter().filter(|s| !s.is_accepted()).count();
        let total_max: usize = samples.iter().map(|s| s.max_component()).sum();
        let largest = samples.iter().map(|s| s.max_component()).max().unwrap_or(0);
        rows.push(RejectionRow {
            delta,
            delta_sq: delta * delta,
            s_th,
            rejection_fraction: rejected as f64 / n_samples as f64,
            mean_max_component: total_max as f64 / n_samples as f64,
            largest_component_seen: largest,
            n_samples,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::born_distribution;
    use crate::lattice::{identity_lattice, random_lattice, w_perturbed_lattice, WLatticeUnitaries};

    fn caps() -> Caps {
        Caps::default()
    }

    #[test]
    fn identity_lattice_samples_all_zeros() {
        let l = identity_lattice(3, 3);
        let rec = sample_exact(&l, 7, 0, &caps()).unwrap();
        assert!(rec.outcomes.iter().all(|&o| o == 0));
        assert!((rec.joint_probability() - 1.0).abs() < 1e-12);
        assert_eq!(rec.outcome_string(), "000000000");
    }

    #[test]
    fn chain_rule_matches_born_probability() {
        let l = random_lattice(2, 2, 4, 2, 91).unwrap();
        let dist = born_distribution(&l, &caps()).unwrap();
        let dims: Vec<usize> = dist.site_dims.iter().map(|&(_, d)| d).collect();
        for stream in 0..20 {
            let rec = sample_exact(&l, 3, stream, &caps()).unwrap();
            let idx = rec.outcome_index(&dims);
            let p_chain = rec.joint_probability();
            let p_born = dist.probabilities[idx];
            assert!(
                (p_chain - p_born).abs() <= 1e-8 * p_born.max(1e-12),
                "stream {stream}: chain {p_chain} vs born {p_born}"
            );
        }
    }

    #[test]
    fn empirical_distribution_approaches_born() {
        let l = random_lattice(2, 1, 4, 2, 17).unwrap();
        let dist = born_distribution(&l, &caps()).unwrap();
        let dims: Vec<usize> = dist.site_dims.iter().map(|&(_, d)| d).collect();
        let n = 20_000u64;
        let mut counts = vec![0u64; dist.probabilities.len()];
        for rec in sample_exact_many(&l, 5, n, &caps()).unwrap() {
            counts[rec.outcome_index(&dims)] += 1;
        }
        let tv: f64 = counts
            .iter()
            .zip(&dist.probabilities)
            .map(|(&c, &p)| (c as f64 / n as f64 - p).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.03, "TV distance {tv}");
    }

    #[test]
    fn reset_events_follow_outcomes() {
        let l = w_perturbed_lattice(3, 3, 0.5, WLatticeUnitaries::Random { seed: 4 }).unwrap();
        for stream in 0..10 {
            let rec = sample_exact(&l, 11, stream, &caps()).unwrap();
            let breaks = BondBreakMap::from_outcomes(&l, &rec.outcomes).unwrap();
            assert_eq!(breaks.severed_bonds(), rec.reset_events.as_slice());
        }
    }

    #[test]
    fn no_resets_at_delta_zero_means_one_component() {
        let l = w_perturbed_lattice(3, 3, 0.0, WLatticeUnitaries::Identity).unwrap();
        let sample = sample_with_resets(&l, Some(8), 1, 0, &caps()).unwrap();
        // a 3x3 lattice is one 9-site component without resets
        assert!(!sample.is_accepted());
        assert_eq!(sample.max_component(), 9);
        assert!(sample.record().reset_events.is_empty());
    }

    #[test]
    fn full_monitoring_resets_fragment_the_lattice() {
        let delta = std::f64::consts::FRAC_1_SQRT_2;
        let l = w_perturbed_lattice(4, 4, delta, WLatticeUnitaries::Random { seed: 6 }).unwrap();
        let mut any_reset = false;
        for stream in 0..20 {
            let s = sample_with_resets(&l, None, 2, stream, &caps()).unwrap();
            any_reset |= !s.record().reset_events.is_empty();
        }
        assert!(any_reset);
    }

    #[test]
    fn reset_sampler_matches_exact_distribution() {
        // with no cutoff the two samplers draw from the same distribution;
        // identical streams even yield identical outcomes because the
        // factorized frontier preserves every conditional probability
        let l = w_perturbed_lattice(2, 2, 0.6, WLatticeUnitaries::Identity).unwrap();
        for stream in 0..50 {
            let a = sample_exact(&l, 21, stream, &caps()).unwrap();
            let b = sample_with_resets(&l, None, 21, stream, &caps()).unwrap();
            assert_eq!(a.outcomes, b.record().outcomes, "stream {stream}");
            let pa = a.joint_probability();
            let pb = b.record().joint_probability();
            assert!((pa - pb).abs() <= 1e-10 * pa.max(1e-300));
        }
    }

    #[test]
    fn reset_probability_is_input_independent() {
        let delta = 0.5f64;
        let l = w_perturbed_lattice(2, 2, delta, WLatticeUnitaries::Random { seed: 9 }).unwrap();
        // count unequal outcomes on the monitored (non-terminal) branches
        let mut events = 0u64;
        let mut trials = 0u64;
        for stream in 0..2000 {
            let rec = sample_exact(&l, 13, stream, &caps()).unwrap();
            for (&site, &o) in l.scan_order().iter().zip(&rec.outcomes) {
                let t = l.site(site);
                if t.role() != Role::WPerturbed {
                    continue;
                }
                if t.dr() > 1 {
                    trials += 1;
                    if matches!(o / 4, 1 | 2) {
                        events += 1;
                    }
                }
                if t.du() > 1 {
                    trials += 1;
                    if matches!(o % 4, 1 | 2) {
                        events += 1;
                    }
                }
            }
        }
        let rate = events as f64 / trials as f64;
        let expect = delta * delta;
        let sigma = (expect * (1.0 - expect) / trials as f64).sqrt();
        assert!(
            (rate - expect).abs() < 4.0 * sigma,
            "rate {rate} vs {expect} (sigma {sigma})"
        );
    }

    #[test]
    fn rejection_curve_shows_crossover_on_small_lattice() {
        let rows = rejection_curve(
            4,
            4,
            WLatticeUnitaries::Identity,
            &[0.1, std::f64::consts::FRAC_1_SQRT_2],
            6,
            300,
            31,
            &caps(),
        )
        .unwrap();
        assert!(rows[0].rejection_fraction > rows[1].rejection_fraction);
        assert!(rows[0].rejection_fraction > 0.9);
    }
}
