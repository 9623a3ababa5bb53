//! Percolation Monte Carlo estimator for local expectation values in
//! injective lattices.
//!
//! Each site's channel is split into a depolarizing part of strength `eta`
//! and the residual channel `E_1`. A sample assigns every site independently
//! either the depolarizing channel (empty, probability `eta`) or `E_1`
//! (occupied, probability `1 - eta`); the conditional expectation value of
//! that assignment only involves the cluster of occupied sites connected to
//! the observable site within its past light cone, with all other inputs
//! entering as maximally mixed states. Accepting only samples whose cluster
//! stays below a cutoff `s_th` keeps every contraction small at the price of
//! an exponentially small bias.
//!
//! The observable site itself always counts as part of the cluster (its
//! isometry hosts the observable and is never split), which keeps the
//! estimator exactly unbiased when no cutoff is applied.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{depolarizing_split, DepolarizingSplit};
use crate::error::{Error, Result};
use crate::exact::{Caps, Observable};
use crate::frontier::{
    bra_bond, bra_phys, contract_shared, ket_bond, ket_phys, site_bra_tensor, site_ket_tensor,
    squeeze, trace_exiting, unit_frontier,
};
use crate::lattice::{IsoTnsLattice, Site, SiteTensor};
use crate::rng::stream_rng;
use crate::tensor::{contract, C64, DenseTensor, Matrix};

/// One random channel assignment: `true` marks an occupied site (residual
/// channel `E_1`), `false` an empty one (depolarizing).
#[derive(Clone, Debug)]
pub struct OccupancyMap {
    nx: usize,
    ny: usize,
    occupied: Vec<bool>,
    pub seed: u64,
}

impl OccupancyMap {
    pub fn from_grid(nx: usize, ny: usize, occupied: Vec<bool>, seed: u64) -> Result<Self> {
        if occupied.len() != nx * ny {
            return Err(Error::Geometry(format!(
                "{}x{} occupancy map needs {} entries, got {}",
                nx,
                ny,
                nx * ny,
                occupied.len()
            )));
        }
        Ok(Self { nx, ny, occupied, seed })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn is_occupied(&self, s: Site) -> bool {
        self.occupied[s.y * self.nx + s.x]
    }

    pub fn empty_fraction(&self) -> f64 {
        let empty = self.occupied.iter().filter(|&&o| !o).count();
        empty as f64 / self.occupied.len() as f64
    }
}

/// Draw an occupancy map: each site is empty with probability `eta`,
/// independently, in row-major site order.
pub fn assign_occupancy(
    nx: usize,
    ny: usize,
    eta: f64,
    rng: &mut impl Rng,
    seed: u64,
) -> Result<OccupancyMap> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidParameter(format!("eta must lie in [0, 1], got {eta}")));
    }
    let occupied = (0..nx * ny).map(|_| rng.gen::<f64>() >= eta).collect();
    OccupancyMap::from_grid(nx, ny, occupied, seed)
}

/// The occupied cluster connected to an observable site within its past
/// light cone. The seed site is always a member, whatever its own occupancy
/// bit, since the observable's isometry is applied there unconditionally.
#[derive(Clone, Debug)]
pub struct Cluster {
    sites: Vec<Site>,
    seed_site: Site,
    seed_occupied: bool,
    bbox: (Site, Site),
    max_open_legs: usize,
}

impl Cluster {
    /// Member sites in causal scan order.
    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn seed_site(&self) -> Site {
        self.seed_site
    }

    /// Whether the observable site itself was occupied in the map.
    pub fn seed_occupied(&self) -> bool {
        self.seed_occupied
    }

    /// `(lower-left, upper-right)` corners.
    pub fn bounding_box(&self) -> (Site, Site) {
        self.bbox
    }

    /// Peak number of simultaneously open cluster bonds during a causal
    /// sweep; the contraction frontier holds at most `2^this` states per
    /// side for qubit bonds.
    pub fn max_open_legs(&self) -> usize {
        self.max_open_legs
    }

    pub fn contains(&self, s: Site) -> bool {
        self.sites.binary_search(&s).is_ok()
    }

    /// Whether the cluster reaches the light-cone boundary lines `x = 0` or
    /// `y = 0`.
    pub fn touches_far_boundary(&self) -> bool {
        self.sites.iter().any(|s| s.x == 0 || s.y == 0)
    }
}

/// Breadth-first search for the occupied cluster around `seed`, restricted to
/// the past light cone `{(k, l): k <= seed.x, l <= seed.y}` under 4-neighbour
/// adjacency.
pub fn find_cluster(map: &OccupancyMap, seed: Site) -> Cluster {
    let in_cone = |s: Site| s.x <= seed.x && s.y <= seed.y;
    let mut visited: BTreeSet<Site> = BTreeSet::new();
    let mut queue = VecDeque::new();
    visited.insert(seed);
    queue.push_back(seed);
    while let Some(s) = queue.pop_front() {
        let mut neighbours = Vec::with_capacity(4);
        if s.x > 0 {
            neighbours.push(Site::new(s.x - 1, s.y));
        }
        if s.y > 0 {
            neighbours.push(Site::new(s.x, s.y - 1));
        }
        neighbours.push(Site::new(s.x + 1, s.y));
        neighbours.push(Site::new(s.x, s.y + 1));
        for n in neighbours {
            if n.x >= map.nx() || n.y >= map.ny() || !in_cone(n) {
                continue;
            }
            if map.is_occupied(n) && !visited.contains(&n) {
                visited.insert(n);
                queue.push_back(n);
            }
        }
    }
    let sites: Vec<Site> = visited.into_iter().collect();
    let bbox = (
        Site::new(sites.iter().map(|s| s.x).min().unwrap(), sites.iter().map(|s| s.y).min().unwrap()),
        Site::new(sites.iter().map(|s| s.x).max().unwrap(), sites.iter().map(|s| s.y).max().unwrap()),
    );
    // peak count of open internal bonds along the causal sweep
    let members: BTreeSet<Site> = sites.iter().copied().collect();
    let mut open = 0usize;
    let mut max_open = 0usize;
    for s in &sites {
        if s.x > 0 && members.contains(&Site::new(s.x - 1, s.y)) {
            open -= 1;
        }
        if s.y > 0 && members.contains(&Site::new(s.x, s.y - 1)) {
            open -= 1;
        }
        if members.contains(&Site::new(s.x + 1, s.y)) {
            open += 1;
        }
        if members.contains(&Site::new(s.x, s.y + 1)) {
            open += 1;
        }
        max_open = max_open.max(open);
    }
    Cluster {
        seed_site: seed,
        seed_occupied: map.is_occupied(seed),
        sites,
        bbox,
        max_open_legs: max_open,
    }
}

/// Maximally mixed ket/bra leg pair for the bond produced by `site` in
/// direction `dir`.
fn mixed_leg(site: Site, dir: char, dim: usize) -> DenseTensor {
    let id = Matrix::identity(dim).scale(C64::new(1.0 / dim as f64, 0.0));
    DenseTensor::new([ket_bond(site, dir), bra_bond(site, dir)], vec![dim, dim], id.into_data())
        .expect("mixed pair")
}

fn attach_missing_inputs(
    mut rho: DenseTensor,
    lattice: &IsoTnsLattice,
    site: Site,
    cluster: &Cluster,
) -> Result<DenseTensor> {
    let tensor = lattice.site(site);
    let inputs = [
        (site.x > 0, Site::new(site.x.wrapping_sub(1), site.y), 'r', tensor.dl()),
        (site.y > 0, Site::new(site.x, site.y.wrapping_sub(1)), 'u', tensor.dd()),
    ];
    for (exists, src, dir, dim) in inputs {
        if !exists || dim == 1 || cluster.contains(src) {
            continue;
        }
        rho = contract(&rho, &[], &mixed_leg(src, dir, dim), &[])?;
    }
    Ok(rho)
}

fn kraus_pair(site: Site, tensor: &SiteTensor, k: &Matrix) -> Result<(DenseTensor, DenseTensor)> {
    let base = DenseTensor::unflatten(
        k,
        &[("r", tensor.dr()), ("u", tensor.du())],
        &[("l", tensor.dl()), ("d", tensor.dd())],
    )?;
    let ket = base.relabeled(|l| match l {
        "l" => ket_bond(Site::new(site.x.wrapping_sub(1), site.y), 'r'),
        "d" => ket_bond(Site::new(site.x, site.y.wrapping_sub(1)), 'u'),
        "r" => ket_bond(site, 'r'),
        "u" => ket_bond(site, 'u'),
        other => other.to_string(),
    })?;
    let bra = base.conj().relabeled(|l| match l {
        "l" => bra_bond(Site::new(site.x.wrapping_sub(1), site.y), 'r'),
        "d" => bra_bond(Site::new(site.x, site.y.wrapping_sub(1)), 'u'),
        "r" => bra_bond(site, 'r'),
        "u" => bra_bond(site, 'u'),
        other => other.to_string(),
    })?;
    Ok((squeeze(&ket), squeeze(&bra)))
}

fn check_frontier_cap(rho: &DenseTensor, cap: usize) -> Result<()> {
    if rho.len() > cap.saturating_mul(cap) {
        return Err(Error::CapExceeded(format!(
            "cluster frontier holds {} entries, cap is {cap} per side",
            rho.len()
        )));
    }
    Ok(())
}

/// Conditional expectation value of one occupancy assignment: contract the
/// cluster in causal order, applying the normalized residual channel at
/// occupied member sites and feeding maximally mixed states on every leg
/// entering from outside, then evaluate `tr(V rho V^dag O)` at the seed.
pub fn contract_cluster(
    lattice: &IsoTnsLattice,
    splits: &BTreeMap<Site, DepolarizingSplit>,
    cluster: &Cluster,
    obs: &Observable,
    caps: &Caps,
) -> Result<f64> {
    let seed = cluster.seed_site();
    if seed != obs.site {
        return Err(Error::InvalidParameter("cluster is not seeded at the observable site".into()));
    }
    if *cluster.sites().last().expect("cluster contains its seed") != seed {
        return Err(Error::InvalidParameter(
            "observable site is not the causal maximum of the cluster".into(),
        ));
    }
    let mut rho = unit_frontier();
    for &site in cluster.sites() {
        rho = attach_missing_inputs(rho, lattice, site, cluster)?;
        let tensor = lattice.site(site);
        if site == seed {
            let vt = site_ket_tensor(site, tensor);
            let vb = site_bra_tensor(site, tensor);
            rho = contract_shared(&contract_shared(&rho, &vt)?, &vb)?;
        } else {
            let split = splits
                .get(&site)
                .ok_or_else(|| Error::InvalidParameter(format!("no split for site {site}")))?;
            let scale = 1.0 - split.eta;
            if scale <= 0.0 {
                return Err(Error::InvalidParameter(
                    "the residual channel is undefined at eta = 1".into(),
                ));
            }
            let norm = C64::new(1.0 / scale.sqrt(), 0.0);
            let mut acc: Option<DenseTensor> = None;
            for k in split.e1.kraus() {
                if k.max_abs_entry() <= 1e-14 {
                    continue;
                }
                let (kt, kb) = kraus_pair(site, tensor, &k.scale(norm))?;
                let term = contract_shared(&contract_shared(&rho, &kt)?, &kb)?;
                acc = Some(match acc {
                    None => term,
                    Some(a) => a.add(&term)?,
                });
            }
            rho = acc.ok_or_else(|| {
                Error::InvalidParameter("residual channel has no nonzero Kraus operator".into())
            })?;
        }
        rho = trace_exiting(&rho, lattice, site, |s| cluster.contains(s))?;
        check_frontier_cap(&rho, caps.max_frontier)?;
    }
    // rho now carries only the seed's physical ket/bra pair
    let o = DenseTensor::new(
        ["oi", "oj"],
        vec![obs.matrix.rows(), obs.matrix.cols()],
        obs.matrix.data().to_vec(),
    )?;
    let p = ket_phys(seed);
    let q = bra_phys(seed);
    let value = contract(&rho, &[p.as_str(), q.as_str()], &o, &["oj", "oi"])?;
    Ok(value.scalar_value()?.re)
}

/// Outcome of one Monte Carlo estimation run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateResult {
    /// Average over accepted samples only.
    pub mean: f64,
    /// Sample standard deviation of accepted values over `sqrt(n_accepted)`.
    pub standard_error: f64,
    pub n_accepted: u64,
    pub n_rejected_size: u64,
    pub n_rejected_frontier: u64,
    /// Cluster-size cutoff (`None` = unlimited).
    pub s_th: Option<usize>,
    pub eta: f64,
    pub seed: u64,
    /// Cluster size of every drawn sample, accepted or not.
    pub cluster_size_histogram: BTreeMap<usize, u64>,
}

/// Precompute the per-site depolarizing splits needed to estimate `obs` at
/// strength `eta` (every light-cone site except the observable's own).
pub fn splits_for(
    lattice: &IsoTnsLattice,
    obs_site: Site,
    eta: f64,
) -> Result<BTreeMap<Site, DepolarizingSplit>> {
    let mut splits = BTreeMap::new();
    for site in lattice.lightcone(obs_site) {
        if site == obs_site {
            continue;
        }
        splits.insert(site, depolarizing_split(lattice.site(site), eta)?);
    }
    Ok(splits)
}

enum SampleOutcome {
    Accepted { value: f64, size: usize },
    RejectedSize { size: usize },
    RejectedFrontier { size: usize },
}

/// Monte Carlo estimate of a local expectation value by percolation
/// sampling. Deterministic for a fixed `seed` and independent of the number
/// of worker threads.
pub fn estimate(
    lattice: &IsoTnsLattice,
    obs: &Observable,
    eta: f64,
    s_th: Option<usize>,
    n_samples: u64,
    seed: u64,
    caps: &Caps,
) -> Result<EstimateResult> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be positive".into()));
    }
    let splits = splits_for(lattice, obs.site, eta)?;
    let outcomes: Vec<Result<SampleOutcome>> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i);
            let map = assign_occupancy(lattice.nx(), lattice.ny(), eta, &mut rng, seed)?;
            let cluster = find_cluster(&map, obs.site);
            let size = cluster.len();
            if let Some(cut) = s_th {
                if size > cut {
                    return Ok(SampleOutcome::RejectedSize { size });
                }
            }
            match contract_cluster(lattice, &splits, &cluster, obs, caps) {
                Ok(value) => Ok(SampleOutcome::Accepted { value, size }),
                Err(Error::CapExceeded(_)) => Ok(SampleOutcome::RejectedFrontier { size }),
                Err(e) => Err(e),
            }
        })
        .collect();

    let mut histogram: BTreeMap<usize, u64> = BTreeMap::new();
    let mut values: Vec<f64> = Vec::new();
    let (mut n_rejected_size, mut n_rejected_frontier) = (0u64, 0u64);
    for outcome in outcomes {
        match outcome? {
            SampleOutcome::Accepted { value, size } => {
                *histogram.entry(size).or_default() += 1;
                values.push(value);
            }
            SampleOutcome::RejectedSize { size } => {
                *histogram.entry(size).or_default() += 1;
                n_rejected_size += 1;
            }
            SampleOutcome::RejectedFrontier { size } => {
                *histogram.entry(size).or_default() += 1;
                n_rejected_frontier += 1;
            }
        }
    }
    if values.is_empty() {
        return Err(Error::AllSamplesRejected);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let standard_error = if values.len() < 2 {
        0.0
    } else {
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    };
    Ok(EstimateResult {
        mean,
        standard_error,
        n_accepted: values.len() as u64,
        n_rejected_size,
        n_rejected_frontier,
        s_th,
        eta,
        seed,
        cluster_size_histogram: histogram,
    })
}

/// One row of a percolation survey.
#[derive(Clone, Debug, Serialize)]
pub struct SurveyRow {
    pub eta: f64,
    pub mean_cluster_size: f64,
    /// Fraction of maps whose seed cluster reaches the far light-cone
    /// boundary (`x = 0` or `y = 0`).
    pub boundary_fraction: f64,
    pub histogram: BTreeMap<usize, u64>,
    pub n_samples: u64,
}

impl SurveyRow {
    /// Empirical survival function `Prob(S >= s)` of the cluster size.
    pub fn survival(&self) -> Vec<(usize, f64)> {
        let total: u64 = self.histogram.values().sum();
        let mut remaining = total;
        let mut out = Vec::with_capacity(self.histogram.len());
        for (&size, &count) in &self.histogram {
            out.push((size, remaining as f64 / total as f64));
            remaining -= count;
        }
        out
    }
}

/// Sample the cluster-size distribution of the top-right corner site over a
/// grid of `eta` values (pure percolation, no contraction).
pub fn cluster_survey(
    nx: usize,
    ny: usize,
    etas: &[f64],
    n_samples: u64,
    seed: u64,
) -> Result<Vec<SurveyRow>> {
    let corner = Site::new(nx - 1, ny - 1);
    let mut rows = Vec::with_capacity(etas.len());
    for (idx, &eta) in etas.iter().enumerate() {
        let stats: Vec<(usize, bool)> = (0..n_samples)
            .into_par_iter()
            .map(|i| {
                let stream = (idx as u64) * n_samples + i;
                let mut rng = stream_rng(seed, stream);
                let map = assign_occupancy(nx, ny, eta, &mut rng, seed)?;
                let cluster = find_cluster(&map, corner);
                Ok((cluster.len(), cluster.touches_far_boundary()))
            })
            .collect::<Result<_>>()?;
        let mut histogram: BTreeMap<usize, u64> = BTreeMap::new();
        let mut touching = 0u64;
        let mut total = 0usize;
        for &(size, touches) in &stats {
            *histogram.entry(size).or_default() += 1;
            total += size;
            if touches {
                touching += 1;
            }
        }
        rows.push(SurveyRow {
            eta,
            mean_cluster_size: total as f64 / n_samples as f64,
            boundary_fraction: touching as f64 / n_samples as f64,
            histogram,
            n_samples,
        });
    }
    Ok(rows)
}
