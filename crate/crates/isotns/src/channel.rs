//! CPTP channels from site isometries, Choi-matrix machinery, injectivity
//! analysis of PEPS projectors, and the depolarizing decomposition of
//! injective site channels.
//!
//! Tracing the physical leg of a site isometry leaves a channel on the
//! virtual (ancilla) space, with one Kraus operator per physical index.
//! For an injective site, inserting the resolution of the identity
//! `1 = (1 - eta M) + eta M` with `M = P^{-1 dag} P^{-1} / D_out^2` inside
//! that trace splits the channel into a depolarizing part of strength `eta`
//! and a residual channel `E_1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::SiteTensor;
use crate::tensor::{eigh, svd, C64, Matrix, ZERO};

/// A completely positive map given by Kraus operators. `trace_scale` is 1 for
/// a proper channel; the residual channel of a depolarizing split is stored
/// unnormalized with `trace_scale = 1 - eta`, meaning
/// `sum_i K_i^dag K_i = (1 - eta) 1`.
#[derive(Clone, Debug)]
pub struct QuantumChannel {
    dim_in: usize,
    dim_out: usize,
    kraus: Vec<Matrix>,
    trace_scale: f64,
}

impl QuantumChannel {
    pub fn new(kraus: Vec<Matrix>, trace_scale: f64) -> Result<Self> {
        let first = kraus.first().ok_or_else(|| {
            Error::InvalidParameter("a channel needs at least one Kraus operator".into())
        })?;
        let (dim_out, dim_in) = (first.rows(), first.cols());
        for k in &kraus {
            if k.rows() != dim_out || k.cols() != dim_in {
                return Err(Error::DimensionMismatch("Kraus operators differ in shape".into()));
            }
        }
        let mut sum = Matrix::zeros(dim_in, dim_in);
        for k in &kraus {
            sum = sum.add(&k.adjoint().mul(k)?)?;
        }
        let target = Matrix::identity(dim_in).scale(C64::new(trace_scale, 0.0));
        let dev = sum.max_abs_diff(&target);
        if dev > 1e-9 {
            return Err(Error::NotTracePreserving(dev));
        }
        Ok(Self { dim_in, dim_out, kraus, trace_scale })
    }

    pub fn from_kraus(kraus: Vec<Matrix>) -> Result<Self> {
        Self::new(kraus, 1.0)
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn kraus(&self) -> &[Matrix] {
        &self.kraus
    }

    pub fn trace_scale(&self) -> f64 {
        self.trace_scale
    }

    /// Apply the channel to a density matrix: `rho -> sum_i K_i rho K_i^dag`.
    pub fn apply(&self, rho: &Matrix) -> Result<Matrix> {
        if rho.rows() != self.dim_in || rho.cols() != self.dim_in {
            return Err(Error::DimensionMismatch(format!(
                "channel input is {}-dimensional, state is {}x{}",
                self.dim_in,
                rho.rows(),
                rho.cols()
            )));
        }
        let herm = rho.hermiticity_deviation();
        if herm > 1e-10 * rho.max_abs_entry().max(1.0) {
            return Err(Error::NotHermitian(herm));
        }
        let mut out = Matrix::zeros(self.dim_out, self.dim_out);
        for k in &self.kraus {
            out = out.add(&k.mul(rho)?.mul(&k.adjoint())?)?;
        }
        Ok(out)
    }

    /// Unnormalized Choi matrix `sum_k (1 (x) K_k) |Omega><Omega| (1 (x) K_k^dag)`
    /// with `|Omega> = sum_i |ii>`: entry `((i, m), (j, n)) = sum_k K_k[m, i]
    /// conj(K_k[n, j])`. For a CPTP channel the partial trace over the output
    /// factor is the identity on the input factor.
    pub fn choi(&self) -> Matrix {
        let (di, do_) = (self.dim_in, self.dim_out);
        let n = di * do_;
        let mut c = Matrix::zeros(n, n);
        for k in &self.kraus {
            for i in 0..di {
                for m in 0..do_ {
                    let a = k.get(m, i);
                    if a == ZERO {
                        continue;
                    }
                    for j in 0..di {
                        for nn in 0..do_ {
                            let row = i * do_ + m;
                            let col = j * do_ + nn;
                            c.set(row, col, c.get(row, col) + a * k.get(nn, j).conj());
                        }
                    }
                }
            }
        }
        c
    }

    /// Partial trace of the Choi matrix over the output factor (a
    /// `dim_in x dim_in` matrix; the identity for CPTP channels).
    pub fn choi_input_marginal(&self) -> Matrix {
        let choi = self.choi();
        let (di, do_) = (self.dim_in, self.dim_out);
        Matrix::from_fn(di, di, |i, j| {
            (0..do_).map(|m| choi.get(i * do_ + m, j * do_ + m)).sum()
        })
    }
}

/// The channel on the virtual space obtained by tracing the physical leg of
/// a site isometry: one Kraus operator per physical index, zero slices
/// pruned.
pub fn channel_from_isometry(site: &SiteTensor) -> Result<QuantumChannel> {
    let check = crate::tensor::check_isometry(&site.isometry_matrix(), 1e-10)?;
    if !check.is_isometry {
        return Err(Error::NotIsometry(format!(
            "site tensor deviates from isometry by {:.3e}",
            check.max_deviation
        )));
    }
    let mut kraus: Vec<Matrix> = (0..site.d())
        .map(|i| site.physical_slice(i))
        .filter(|k| k.max_abs_entry() > 1e-14)
        .collect();
    if kraus.is_empty() {
        kraus.push(Matrix::zeros(site.dim_out(), site.dim_in()));
    }
    QuantumChannel::from_kraus(kraus)
}

/// The completely depolarizing channel `rho -> tr(rho) 1 / dim`.
pub fn depolarizing_channel(dim: usize) -> QuantumChannel {
    depolarizing_map(dim, dim)
}

/// Depolarizing map with distinct input/output dimensions, used as the
/// depolarizing component of a split on sites with unequal virtual spaces.
pub fn depolarizing_map(dim_in: usize, dim_out: usize) -> QuantumChannel {
    let f = C64::new(1.0 / (dim_out as f64).sqrt(), 0.0);
    let mut kraus = Vec::with_capacity(dim_in * dim_out);
    for m in 0..dim_out {
        for n in 0..dim_in {
            let mut k = Matrix::zeros(dim_out, dim_in);
            k.set(m, n, f);
            kraus.push(k);
        }
    }
    QuantumChannel::from_kraus(kraus).expect("depolarizing map is CPTP")
}

/// Injectivity analysis of a site tensor's PEPS projector.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct InjectivityReport {
    /// Smallest singular value of `P` over the full virtual dimension
    /// (zero when the physical dimension is too small for injectivity).
    pub delta: f64,
    /// Guaranteed depolarizing rate `delta^2 * D_out^2`.
    pub eta: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// Largest single-bond dimension.
    pub bond_dim: usize,
    /// Product of the outgoing virtual dimensions (`D^2` for uniform bonds).
    pub dim_out_virtual: usize,
    /// Product of all four virtual dimensions.
    pub dim_virtual: usize,
    /// Physical dimension.
    pub physical_dim: usize,
}

impl InjectivityReport {
    /// The largest admissible depolarizing strength for this site.
    pub fn max_eta(&self) -> f64 {
        self.eta
    }

    /// Structured-text record with the keys used by the `verify` subcommand.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "delta": self.delta,
            "eta": self.eta,
            "sigma_min": self.sigma_min,
            "sigma_max": self.sigma_max,
            "D": self.bond_dim,
            "d": self.physical_dim,
        })
    }
}

/// Compute the injectivity parameter `delta` of a site: the smallest singular
/// value of the PEPS projector flattened to a `d x (virtual)` matrix, padded
/// with zeros when `d` is smaller than the virtual dimension.
pub fn injectivity_delta(site: &SiteTensor) -> Result<InjectivityReport> {
    let p = site.peps_matrix();
    let sv = crate::tensor::singular_values(&p)?;
    let dim_virtual = p.cols();
    let d = p.rows();
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    let mut sigma_min = if d < dim_virtual { 0.0 } else { sv.last().copied().unwrap_or(0.0) };
    if sigma_min < 1e-14 {
        sigma_min = 0.0;
    }
    let dim_out_virtual = site.dim_out();
    let delta = sigma_min;
    Ok(InjectivityReport {
        delta,
        eta: (delta * delta * dim_out_virtual as f64).min(1.0),
        sigma_min,
        sigma_max,
        bond_dim: site.dl().max(site.dd()).max(site.dr()).max(site.du()),
        dim_out_virtual,
        dim_virtual,
        physical_dim: d,
    })
}

/// An injective site channel split into a depolarizing part of strength
/// `eta` and the residual channel `E_1`.
#[derive(Clone, Debug)]
pub struct DepolarizingSplit {
    pub eta: f64,
    /// Residual channel, stored with its `(1 - eta)` normalization:
    /// `sum K^dag K = (1 - eta) 1`.
    pub e1: QuantumChannel,
    pub original: QuantumChannel,
    pub report: InjectivityReport,
}

impl DepolarizingSplit {
    /// Max-entry distance between the Choi matrix of the original channel and
    /// of `E_1 + eta * depolarizing` (the reconstruction identity).
    pub fn reconstruction_error(&self) -> f64 {
        let depol = depolarizing_map(self.original.dim_in(), self.original.dim_out());
        let mut rec = self.e1.choi();
        let dc = depol.choi().scale(C64::new(self.eta, 0.0));
        rec = rec.add(&dc).expect("matching Choi dimensions");
        rec.max_abs_diff(&self.original.choi())
    }
}

/// Split the channel of an injective site into depolarizing noise of strength
/// `eta` and the residual channel `E_1` with Kraus operators
/// `K_i = sqrt(lambda_i) <i| U V` from diagonalizing `1 - eta M`.
pub fn depolarizing_split(site: &SiteTensor, eta: f64) -> Result<DepolarizingSplit> {
    let report = injectivity_delta(site)?;
    if report.delta <= 0.0 {
        return Err(Error::NonInjective);
    }
    let max_eta = report.max_eta();
    if eta < 0.0 || eta > max_eta + 1e-9 {
        return Err(Error::EtaTooLarge { eta, max: max_eta });
    }
    let p = site.peps_matrix();
    let dec = svd(&p)?;
    let d = site.d();
    let dim_out = site.dim_out();
    let dim_virtual = report.dim_virtual;

    // M = P^{-1 dag} P^{-1} / D_out^2 is diagonal in the left singular basis
    // of P with eigenvalues 1 / (sigma_i^2 D_out^2). Physical directions
    // outside the range of P never overlap V, so their Kraus operators
    // vanish and only the thin left singular basis is needed.
    let n_dirs = dim_virtual.min(d);
    let mut lambdas = vec![1.0f64; n_dirs];
    for (i, lam) in lambdas.iter_mut().enumerate() {
        let sigma = dec.sigma[i];
        let m_eig = 1.0 / (sigma * sigma * dim_out as f64);
        let mut l = 1.0 - eta * m_eig;
        // rounding can push the smallest eigenvalue slightly negative at the
        // admissible maximum eta
        if l < 0.0 {
            if l < -1e-10 {
                return Err(Error::EtaTooLarge { eta, max: max_eta });
            }
            l = 0.0;
        }
        *lam = l;
    }

    // K_i = sqrt(lambda_i) <u_i| V with <u_i| the i-th left singular vector
    let v = site.isometry_matrix(); // (d * dim_out) x dim_in
    let dim_in = site.dim_in();
    let mut kraus = Vec::with_capacity(n_dirs);
    for i in 0..n_dirs {
        let root = lambdas[i].sqrt();
        let mut k = Matrix::zeros(dim_out, dim_in);
        for out in 0..dim_out {
            for inn in 0..dim_in {
                let mut acc = ZERO;
                for phys in 0..d {
                    acc += dec.u.get(phys, i).conj() * v.get(phys * dim_out + out, inn);
                }
                k.set(out, inn, acc * C64::new(root, 0.0));
            }
        }
        kraus.push(k);
    }
    let e1 = QuantumChannel::new(kraus, 1.0 - eta)?;
    let original = channel_from_isometry(site)?;
    Ok(DepolarizingSplit { eta, e1, original, report })
}

/// Minimum eigenvalue of a Hermitian matrix, for positivity checks.
pub fn min_eigenvalue(m: &Matrix, tol: f64) -> Result<f64> {
    let dec = eigh(m, tol)?;
    Ok(dec.values.last().copied().unwrap_or(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{
        depolarized_restart_kraus, depolarized_unitary_kraus, gate_tensor, identity_tensor,
        maximally_injective_swap_projector, postselect_gate_projector, stinespring_site, swap4,
        swap_tensor,
    };
    use crate::rng::{random_density, random_unitary, stream_rng};
    use crate::tensor::ONE;

    #[test]
    fn identity_tensor_channel_is_swap_conjugation() {
        let ch = channel_from_isometry(&identity_tensor()).unwrap();
        assert_eq!(ch.kraus().len(), 1, "pure physical output leaves one Kraus operator");
        assert!(ch.kraus()[0].max_abs_diff(&swap4()) < 1e-15);
    }

    #[test]
    fn gate_tensor_channel_conjugates_by_u() {
        let mut rng = stream_rng(31, 0);
        let u = random_unitary(4, &mut rng);
        let ch = channel_from_isometry(&gate_tensor(&u).unwrap()).unwrap();
        let rho = random_density(4, &mut rng);
        let out = ch.apply(&rho).unwrap();
        let expect = u.mul(&rho).unwrap().mul(&u.adjoint()).unwrap();
        assert!(out.max_abs_diff(&expect) < 1e-12);
    }

    #[test]
    fn swap_tensor_channel_traces_to_scalar() {
        let ch = channel_from_isometry(&swap_tensor()).unwrap();
        assert_eq!(ch.dim_out(), 1);
        let mut rng = stream_rng(32, 0);
        let rho = random_density(4, &mut rng);
        let out = ch.apply(&rho).unwrap();
        assert!((out.get(0, 0) - ONE).norm() < 1e-12);
    }

    #[test]
    fn apply_depolarizing_fixed_point_and_unitary_flip() {
        let dep = depolarizing_channel(2);
        let mixed = Matrix::identity(2).scale(C64::new(0.5, 0.0));
        assert!(dep.apply(&mixed).unwrap().max_abs_diff(&mixed) < 1e-12);

        let x = crate::lattice::paulis_1q()[1].clone();
        let flip = QuantumChannel::from_kraus(vec![x]).unwrap();
        let mut ket0 = Matrix::zeros(2, 2);
        ket0.set(0, 0, ONE);
        let mut ket1 = Matrix::zeros(2, 2);
        ket1.set(1, 1, ONE);
        assert!(flip.apply(&ket0).unwrap().max_abs_diff(&ket1) < 1e-15);
    }

    #[test]
    fn apply_preserves_trace_on_random_channels() {
        let mut rng = stream_rng(33, 0);
        // random CPTP channel from a Stinespring site
        let u = random_unitary(4, &mut rng);
        let site = stinespring_site(&depolarized_unitary_kraus(&u, 0.3).unwrap()).unwrap();
        let ch = channel_from_isometry(&site).unwrap();
        let rho = random_density(4, &mut rng);
        let out = ch.apply(&rho).unwrap();
        assert!((out.trace() - rho.trace()).norm() < 1e-12);
    }

    #[test]
    fn choi_of_identity_and_depolarizing() {
        let id = QuantumChannel::from_kraus(vec![Matrix::identity(2)]).unwrap();
        let c = id.choi();
        for (i, j, expect) in
            [(0, 0, 1.0), (0, 3, 1.0), (3, 0, 1.0), (3, 3, 1.0), (1, 1, 0.0), (2, 2, 0.0)]
        {
            assert!((c.get(i, j) - C64::new(expect, 0.0)).norm() < 1e-15);
        }

        let dep = depolarizing_channel(2);
        let c = dep.choi();
        assert!(c.max_abs_diff(&Matrix::identity(4).scale(C64::new(0.5, 0.0))) < 1e-12);
        assert!(dep.choi_input_marginal().max_abs_diff(&Matrix::identity(2)) < 1e-12);
    }

    #[test]
    fn choi_invariant_under_kraus_mixing() {
        let mut rng = stream_rng(34, 0);
        let u = random_unitary(4, &mut rng);
        let site = stinespring_site(&depolarized_unitary_kraus(&u, 0.2).unwrap()).unwrap();
        let ch = channel_from_isometry(&site).unwrap();
        let w = random_unitary(ch.kraus().len(), &mut rng);
        let mixed: Vec<Matrix> = (0..ch.kraus().len())
            .map(|i| {
                let mut m = Matrix::zeros(ch.dim_out(), ch.dim_in());
                for (j, k) in ch.kraus().iter().enumerate() {
                    m = m.add(&k.scale(w.get(i, j))).unwrap();
                }
                m
            })
            .collect();
        let ch2 = QuantumChannel::from_kraus(mixed).unwrap();
        assert!(ch.choi().max_abs_diff(&ch2.choi()) < 1e-12);
    }

    #[test]
    fn injectivity_of_postselect_tensor_saturates() {
        let mut rng = stream_rng(35, 0);
        let u = random_unitary(4, &mut rng);
        let report = injectivity_delta(&postselect_gate_projector(&u).unwrap()).unwrap();
        assert!((report.delta - 0.5).abs() < 1e-10);
        assert!((report.sigma_max - 0.5).abs() < 1e-10);
        assert!((report.eta - 1.0).abs() < 1e-9);

        let report = injectivity_delta(&maximally_injective_swap_projector()).unwrap();
        assert!((report.delta - 0.5).abs() < 1e-10);
    }

    #[test]
    fn injectivity_of_stinespring_unitary_site() {
        let mut rng = stream_rng(36, 0);
        let u = random_unitary(4, &mut rng);
        let site = stinespring_site(&depolarized_unitary_kraus(&u, 0.04).unwrap()).unwrap();
        let report = injectivity_delta(&site).unwrap();
        assert!((report.delta - 0.1).abs() < 1e-10, "delta = {}", report.delta);
        // sigma_max saturates the spectral upper bound sqrt(D^2 - delta^2 (D^4 - 1))
        let bound = (4.0 - report.delta.powi(2) * 15.0).sqrt();
        assert!((report.sigma_max - bound).abs() < 1e-9);
    }

    #[test]
    fn injectivity_of_restart_site() {
        let site = stinespring_site(&depolarized_restart_kraus(0.04).unwrap()).unwrap();
        let report = injectivity_delta(&site).unwrap();
        // sigma_min = sqrt(p / k^2) with k = 2 qubit levels per factor
        assert!((report.delta - 0.1).abs() < 1e-10, "delta = {}", report.delta);
    }

    #[test]
    fn gate_tensor_is_not_injective() {
        let report = injectivity_delta(&gate_tensor(&swap4()).unwrap()).unwrap();
        assert_eq!(report.delta, 0.0);
        assert_eq!(report.eta, 0.0);
    }

    #[test]
    fn degenerate_stinespring_reports_zero_delta() {
        // identity padded with zero operators: trace preserving but not
        // linearly independent
        let mut kraus = vec![Matrix::identity(4)];
        kraus.extend((0..15).map(|_| Matrix::zeros(4, 4)));
        let site = stinespring_site(&kraus).unwrap();
        assert_eq!(injectivity_delta(&site).unwrap().delta, 0.0);
    }

    #[test]
    fn split_at_zero_eta_reproduces_original() {
        let mut rng = stream_rng(37, 0);
        let u = random_unitary(4, &mut rng);
        let site = stinespring_site(&depolarized_unitary_kraus(&u, 0.1).unwrap()).unwrap();
        let split = depolarizing_split(&site, 0.0).unwrap();
        assert!(split.e1.choi().max_abs_diff(&split.original.choi()) < 1e-12);
    }

    #[test]
    fn split_of_maximally_injective_site_at_eta_one() {
        let mut rng = stream_rng(38, 0);
        let u = random_unitary(4, &mut rng);
        let site = postselect_gate_projector(&u).unwrap();
        let split = depolarizing_split(&site, 1.0).unwrap();
        assert!(split.reconstruction_error() < 1e-9);
        // the original channel itself is completely depolarizing
        let depol = depolarizing_channel(4);
        assert!(split.original.choi().max_abs_diff(&depol.choi()) < 1e-10);
    }

    #[test]
    fn split_reconstruction_at_max_eta() {
        let mut rng = stream_rng(39, 0);
        let u = random_unitary(4, &mut rng);
        let site = stinespring_site(&depolarized_unitary_kraus(&u, 0.04).unwrap()).unwrap();
        let report = injectivity_delta(&site).unwrap();
        assert!((report.eta - 0.04).abs() < 1e-10);
        let split = depolarizing_split(&site, report.eta).unwrap();
        assert!(split.reconstruction_error() < 1e-9);
        // E1 trace behaviour: sum K^dag K = (1 - eta) identity
        let mut sum = Matrix::zeros(4, 4);
        for k in split.e1.kraus() {
            sum = sum.add(&k.adjoint().mul(k).unwrap()).unwrap();
        }
        let target = Matrix::identity(4).scale(C64::new(1.0 - split.eta, 0.0));
        assert!(sum.max_abs_diff(&target) < 1e-9);
    }

    #[test]
    fn split_rejects_excessive_eta_and_non_injective() {
        let mut rng = stream_rng(40, 0);
        let u = random_unitary(4, &mut rng);
        let site = stinespring_site(&depolarized_unitary_kraus(&u, 0.04).unwrap()).unwrap();
        assert!(matches!(depolarizing_split(&site, 0.2), Err(Error::EtaTooLarge { .. })));
        let gate = gate_tensor(&u).unwrap();
        assert!(matches!(depolarizing_split(&gate, 0.01), Err(Error::NonInjective)));
    }

    #[test]
    fn split_e1_choi_is_positive() {
        let mut rng = stream_rng(41, 0);
        let u = random_unitary(4, &mut rng);
        let site = stinespring_site(&depolarized_unitary_kraus(&u, 0.3).unwrap()).unwrap();
        let split = depolarizing_split(&site, 0.2).unwrap();
        let choi = split.e1.choi();
        let min = min_eigenvalue(&choi, 1e-8).unwrap();
        assert!(min >= -1e-10, "min eigenvalue {min}");
    }
}
