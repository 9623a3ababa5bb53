//! Brute-force oracles: full statevector construction, exact local
//! expectation values by channel evolution of the ancilla density matrix,
//! Born distributions, postselected evaluation and the 1D MPS special case.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::frontier::{
    bra_bond, bra_phys, contract_shared, ket_bond, ket_phys, site_bra_tensor, site_ket_tensor,
    squeeze, trace_exiting, unit_frontier,
};
use crate::lattice::{IsoTnsLattice, Site, SiteTensor};
use crate::tensor::{contract, C64, DenseTensor, Matrix, ZERO};

/// Size guards for the brute-force engines.
#[derive(Clone, Copy, Debug)]
pub struct Caps {
    /// Maximum number of statevector amplitudes.
    pub max_statevector: usize,
    /// Maximum per-side dimension of the frontier during channel sweeps.
    pub max_frontier: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Self { max_statevector: 1 << 20, max_frontier: 1 << 12 }
    }
}

fn capped_contract(a: &DenseTensor, b: &DenseTensor, cap: usize, what: &str) -> Result<DenseTensor> {
    let shared: usize = a
        .labels()
        .iter()
        .zip(a.shape())
        .filter(|(l, _)| b.labels().contains(l))
        .map(|(_, &d)| d)
        .product();
    let predicted = (a.len() / shared).saturating_mul(b.len() / shared);
    if predicted > cap {
        return Err(Error::CapExceeded(format!("{what}: {predicted} entries exceed cap {cap}")));
    }
    contract_shared(a, b)
}

/// The global state of a lattice: amplitudes over the physical qudits in
/// causal scan order, with any dangling (open-boundary) ancilla legs kept as
/// a trailing factor.
#[derive(Clone, Debug)]
pub struct StateVector {
    site_dims: Vec<(Site, usize)>,
    dangling_dim: usize,
    amplitudes: Vec<C64>,
}

impl StateVector {
    pub fn site_dims(&self) -> &[(Site, usize)] {
        &self.site_dims
    }

    pub fn n_qudits(&self) -> usize {
        self.site_dims.len()
    }

    pub fn physical_dim(&self) -> usize {
        self.site_dims.iter().map(|&(_, d)| d).product()
    }

    /// Dimension of the trailing dangling-ancilla factor (1 when closed).
    pub fn dangling_dim(&self) -> usize {
        self.dangling_dim
    }

    /// Amplitudes, physical index major, dangling index minor.
    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Born probabilities of the physical outcomes (dangling legs traced).
    pub fn physical_probabilities(&self) -> Vec<f64> {
        self.amplitudes
            .chunks(self.dangling_dim)
            .map(|chunk| chunk.iter().map(|z| z.norm_sqr()).sum())
            .collect()
    }

    /// `<psi| O_site |psi>` evaluated directly on the amplitudes.
    pub fn expectation(&self, obs: &Observable) -> Result<f64> {
        let pos = self
            .site_dims
            .iter()
            .position(|&(s, _)| s == obs.site)
            .ok_or_else(|| Error::Geometry(format!("observable site {} not in state", obs.site)))?;
        let d = self.site_dims[pos].1;
        if obs.matrix.rows() != d {
            return Err(Error::DimensionMismatch(format!(
                "observable is {}x{}, site dimension is {d}",
                obs.matrix.rows(),
                obs.matrix.cols()
            )));
        }
        let mut stride = self.dangling_dim;
        for &(_, dim) in self.site_dims.iter().skip(pos + 1) {
            stride *= dim;
        }
        let block = stride * d;
        let mut acc = ZERO;
        for outer in 0..self.amplitudes.len() / block {
            for i in 0..d {
                for j in 0..d {
                    let o = obs.matrix.get(i, j);
                    if o == ZERO {
                        continue;
                    }
                    for inner in 0..stride {
                        let a = self.amplitudes[outer * block + i * stride + inner];
                        let b = self.amplitudes[outer * block + j * stride + inner];
                        acc += a.conj() * o * b;
                    }
                }
            }
        }
        Ok(acc.re)
    }
}

/// A local observable: a Hermitian matrix on one site's physical space.
#[derive(Clone, Debug)]
pub struct Observable {
    pub site: Site,
    pub matrix: Matrix,
}

impl Observable {
    pub fn new(site: Site, matrix: Matrix) -> Result<Self> {
        if matrix.rows() != matrix.cols() {
            return Err(Error::DimensionMismatch("observables are square".into()));
        }
        let dev = matrix.hermiticity_deviation();
        if dev > 1e-10 * matrix.max_abs_entry().max(1.0) {
            return Err(Error::NotHermitian(dev));
        }
        Ok(Self { site, matrix })
    }

    /// Spectral norm (largest singular value).
    pub fn spectral_norm(&self) -> f64 {
        crate::tensor::singular_values(&self.matrix).map(|s| s[0]).unwrap_or(f64::NAN)
    }
}

/// Build the global state by applying the site isometries in causal order to
/// the trivial boundary state.
pub fn full_state(lattice: &IsoTnsLattice, caps: &Caps) -> Result<StateVector> {
    let mut frontier = unit_frontier();
    for site in lattice.scan_order() {
        let v = site_ket_tensor(site, lattice.site(site));
        frontier = capped_contract(&frontier, &v, caps.max_statevector, "statevector")?;
    }
    // physical legs in scan order, dangling bonds after them
    let phys_labels: Vec<String> = lattice.scan_order().iter().map(|&s| ket_phys(s)).collect();
    let mut dangling: Vec<String> =
        frontier.labels().iter().filter(|l| l.starts_with("k:")).cloned().collect();
    dangling.sort();
    let order: Vec<&str> = phys_labels
        .iter()
        .map(String::as_str)
        .chain(dangling.iter().map(String::as_str))
        .collect();
    let frontier = frontier.permuted(&order)?;

    let site_dims: Vec<(Site, usize)> =
        lattice.scan_order().iter().map(|&s| (s, lattice.site(s).d())).collect();
    let dangling_dim: usize = dangling.iter().map(|l| frontier.leg_dim(l).unwrap()).product();
    let sv = StateVector { site_dims, dangling_dim, amplitudes: frontier.data().to_vec() };
    let norm = sv.norm();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::Geometry(format!("global state norm {norm} deviates from 1")));
    }
    Ok(sv)
}

/// How a site is treated during a density-matrix sweep.
enum SiteMode<'a> {
    /// Apply the site channel (trace the physical leg).
    Channel,
    /// Apply the isometry and keep the physical ket/bra legs.
    Keep,
    /// Apply the isometry and project the physical leg onto a ket.
    Project(&'a [C64]),
}

fn kraus_tensor(site: Site, tensor: &SiteTensor, k: &Matrix, bra: bool) -> Result<DenseTensor> {
    let m = if bra { k.conj() } else { k.clone() };
    let name = |s: Site, dir: char| if bra { bra_bond(s, dir) } else { ket_bond(s, dir) };
    let t = DenseTensor::unflatten(
        &m,
        &[("r", tensor.dr()), ("u", tensor.du())],
        &[("l", tensor.dl()), ("d", tensor.dd())],
    )?
    .relabeled(|l| match l {
        "l" => name(Site::new(site.x.wrapping_sub(1), site.y), 'r'),
        "d" => name(Site::new(site.x, site.y.wrapping_sub(1)), 'u'),
        "r" => name(site, 'r'),
        "u" => name(site, 'u'),
        other => other.to_string(),
    })?;
    Ok(squeeze(&t))
}

/// One site step of a density-matrix sweep.
fn density_step(
    rho: DenseTensor,
    lattice: &IsoTnsLattice,
    site: Site,
    mode: &SiteMode,
    caps: &Caps,
    keep: impl Fn(Site) -> bool,
) -> Result<DenseTensor> {
    let tensor = lattice.site(site);
    let base_cap = caps.max_frontier.saturating_mul(caps.max_frontier);
    let out = match mode {
        SiteMode::Channel => {
            let mut acc: Option<DenseTensor> = None;
            for i in 0..tensor.d() {
                let k = tensor.physical_slice(i);
                if k.max_abs_entry() <= 1e-14 {
                    continue;
                }
                let kt = kraus_tensor(site, tensor, &k, false)?;
                let kb = kraus_tensor(site, tensor, &k, true)?;
                let term =
                    capped_contract(&capped_contract(&rho, &kt, base_cap, "frontier")?, &kb, base_cap, "frontier")?;
                acc = Some(match acc {
                    None => term,
                    Some(a) => a.add(&term)?,
                });
            }
            acc.expect("site channel has a nonzero Kraus operator")
        }
        SiteMode::Keep => {
            let cap = base_cap.saturating_mul(tensor.d() * tensor.d());
            let vt = site_ket_tensor(site, tensor);
            let vb = site_bra_tensor(site, tensor);
            capped_contract(&capped_contract(&rho, &vt, cap, "frontier")?, &vb, cap, "frontier")?
        }
        SiteMode::Project(ket) => {
            if ket.len() != tensor.d() {
                return Err(Error::DimensionMismatch(format!(
                    "postselection ket has {} entries, site dimension is {}",
                    ket.len(),
                    tensor.d()
                )));
            }
            let bra = DenseTensor::new(
                [ket_phys(site)],
                vec![ket.len()],
                ket.iter().map(|z| z.conj()).collect(),
            )?;
            let vt = contract_shared(&site_ket_tensor(site, tensor), &bra)?;
            let ketv = DenseTensor::new([bra_phys(site)], vec![ket.len()], ket.to_vec())?;
            let vb = contract_shared(&site_bra_tensor(site, tensor), &ketv)?;
            capped_contract(&capped_contract(&rho, &vt, base_cap, "frontier")?, &vb, base_cap, "frontier")?
        }
    };
    trace_exiting(&out, lattice, site, keep)
}

/// Trace of the kept physical density tensor at `site` against an observable:
/// `tr(rho O) = sum_ij rho[i, j] O[j, i]`.
fn evaluate_kept(rho: &DenseTensor, site: Site, obs: &Matrix) -> Result<C64> {
    let o = DenseTensor::new(["oi", "oj"], vec![obs.rows(), obs.cols()], obs.data().to_vec())?;
    let p = ket_phys(site);
    let q = bra_phys(site);
    let res = contract(rho, &[p.as_str(), q.as_str()], &o, &["oj", "oi"])?;
    res.scalar_value()
}

/// Exact local expectation value: evolve the ancilla density matrix through
/// the channels of every site in the past light cone, then evaluate
/// `tr(V rho V^dag O)` at the observable site.
pub fn expectation_exact(lattice: &IsoTnsLattice, obs: &Observable, caps: &Caps) -> Result<f64> {
    if !lattice.contains(obs.site) {
        return Err(Error::Geometry(format!("observable site {} outside lattice", obs.site)));
    }
    if obs.matrix.rows() != lattice.site(obs.site).d() {
        return Err(Error::DimensionMismatch(format!(
            "observable dimension {} does not match site dimension {}",
            obs.matrix.rows(),
            lattice.site(obs.site).d()
        )));
    }
    let cone: BTreeSet<Site> = lattice.lightcone(obs.site).into_iter().collect();
    let mut rho = unit_frontier();
    for &site in &cone {
        let mode = if site == obs.site { SiteMode::Keep } else { SiteMode::Channel };
        rho = density_step(rho, lattice, site, &mode, caps, |s| cone.contains(&s))?;
    }
    Ok(evaluate_kept(&rho, obs.site, &obs.matrix)?.re)
}

/// Joint reduced density matrix of the physical qudits on `sites` (row and
/// column indices fuse the sites in the order given).
pub fn physical_marginal(lattice: &IsoTnsLattice, sites: &[Site], caps: &Caps) -> Result<Matrix> {
    let keep: BTreeSet<Site> = sites.iter().copied().collect();
    if keep.len() != sites.len() {
        return Err(Error::InvalidParameter("duplicate sites in marginal".into()));
    }
    let mut rho = unit_frontier();
    for site in lattice.scan_order() {
        let mode = if keep.contains(&site) { SiteMode::Keep } else { SiteMode::Channel };
        rho = density_step(rho, lattice, site, &mode, caps, |_| true)?;
    }
    let kets: Vec<String> = sites.iter().map(|&s| ket_phys(s)).collect();
    let bras: Vec<String> = sites.iter().map(|&s| bra_phys(s)).collect();
    let order: Vec<&str> = kets.iter().chain(bras.iter()).map(String::as_str).collect();
    let rho = rho.permuted(&order)?;
    let dim: usize = sites.iter().map(|&s| lattice.site(s).d()).product();
    Matrix::new(dim, dim, rho.data().to_vec())
}

/// Born distribution over the physical computational basis, in causal scan
/// order with row-major index fusion.
#[derive(Clone, Debug)]
pub struct BornDistribution {
    pub site_dims: Vec<(Site, usize)>,
    pub probabilities: Vec<f64>,
}

pub fn born_distribution(lattice: &IsoTnsLattice, caps: &Caps) -> Result<BornDistribution> {
    let sv = full_state(lattice, caps)?;
    Ok(BornDistribution {
        site_dims: sv.site_dims().to_vec(),
        probabilities: sv.physical_probabilities(),
    })
}

/// Expectation value on the renormalized state obtained by projecting the
/// given sites onto physical kets.
pub fn postselected_expectation(
    lattice: &IsoTnsLattice,
    postselect: &BTreeMap<Site, Vec<C64>>,
    obs: &Observable,
    caps: &Caps,
) -> Result<f64> {
    if postselect.contains_key(&obs.site) {
        return Err(Error::InvalidParameter(
            "the observable site cannot itself be postselected".into(),
        ));
    }
    for site in postselect.keys() {
        if !lattice.contains(*site) {
            return Err(Error::Geometry(format!("postselected site {site} outside lattice")));
        }
    }
    let mut rho = unit_frontier();
    for site in lattice.scan_order() {
        let mode = if site == obs.site {
            SiteMode::Keep
        } else if let Some(ket) = postselect.get(&site) {
            SiteMode::Project(ket)
        } else {
            SiteMode::Channel
        };
        rho = density_step(rho, lattice, site, &mode, caps, |_| true)?;
    }
    let numerator = evaluate_kept(&rho, obs.site, &obs.matrix)?;
    let denominator = evaluate_kept(&rho, obs.site, &Matrix::identity(obs.matrix.rows()))?;
    if denominator.re <= 1e-12 {
        return Err(Error::ZeroProbabilityPostselection);
    }
    Ok(numerator.re / denominator.re)
}

/// Expectation value `<psi_MPS| O_n |psi_MPS>` for a chain of MPS isometries
/// with legs `(p, l, r)` and a trivial leftmost bond: evolve the ancilla
/// density matrix through the site channels, then `tr(V rho V^dag (O (x) 1))`.
pub fn mps_expectation(tensors: &[DenseTensor], n: usize, obs: &Matrix) -> Result<f64> {
    if tensors.is_empty() || n >= tensors.len() {
        return Err(Error::InvalidParameter(format!(
            "site {n} out of range for an MPS of {} tensors",
            tensors.len()
        )));
    }
    let mut bond = 1usize;
    let mut slices: Vec<Vec<Matrix>> = Vec::with_capacity(tensors.len());
    for (i, t) in tensors.iter().enumerate() {
        if t.labels() != ["p", "l", "r"] {
            return Err(Error::Geometry("MPS tensors carry legs (p, l, r)".into()));
        }
        let (d, dl, dr) = (t.shape()[0], t.shape()[1], t.shape()[2]);
        if dl != bond {
            return Err(Error::DimensionMismatch(format!(
                "MPS tensor {i} expects a bond of dimension {bond}, has {dl}"
            )));
        }
        let flat = t.flatten(&["p", "r"], &["l"])?;
        let check = crate::tensor::check_isometry(&flat, 1e-10)?;
        if !check.is_isometry {
            return Err(Error::NotIsometry(format!(
                "MPS tensor {i} deviates by {:.3e}",
                check.max_deviation
            )));
        }
        let data = t.data();
        slices.push(
            (0..d)
                .map(|p| Matrix::from_fn(dr, dl, |r, l| data[(p * dl + l) * dr + r]))
                .collect(),
        );
        bond = dr;
    }
    let d = tensors[n].shape()[0];
    if obs.rows() != d || obs.cols() != d {
        return Err(Error::DimensionMismatch(format!(
            "observable is {}x{}, site dimension is {d}",
            obs.rows(),
            obs.cols()
        )));
    }
    let dev = obs.hermiticity_deviation();
    if dev > 1e-10 * obs.max_abs_entry().max(1.0) {
        return Err(Error::NotHermitian(dev));
    }

    let mut rho = Matrix::identity(1);
    for site_slices in slices.iter().take(n) {
        let dim_out = site_slices[0].rows();
        let mut next = Matrix::zeros(dim_out, dim_out);
        for k in site_slices {
            next = next.add(&k.mul(&rho)?.mul(&k.adjoint())?)?;
        }
        rho = next;
    }
    // tr(V rho V^dag (O (x) 1)) = sum_{p p'} O[p', p] tr(K_p rho K_p'^dag)
    let mut acc = ZERO;
    for p in 0..d {
        for p2 in 0..d {
            let o = obs.get(p2, p);
            if o == ZERO {
                continue;
            }
            let m = slices[n][p].mul(&rho)?.mul(&slices[n][p2].adjoint())?;
            acc += o * m.trace();
        }
    }
    Ok(acc.re)
}
