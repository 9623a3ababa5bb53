//! Site tensors on the square lattice, the lattice state itself, and the
//! constructors for the tensor families used throughout: gate / swap /
//! identity tensors, Stinespring dilations of depolarized channels, the
//! monitored `W` isometry, and the maximally injective postselection tensors.
//!
//! Leg convention, fixed repository-wide: a site tensor has legs
//! `(p, l, d, r, u)` = (physical, left-in, down-in, right-out, up-out).
//! Ancillas flow left-to-right along rows and bottom-to-top along columns;
//! a site's isometry maps the two incoming ancillas to the physical qudit
//! plus the two outgoing ancillas. Flattened as a `(d * D_r * D_u) x
//! (D_l * D_d)` matrix it must satisfy the isometry condition.

pub mod embed;

use std::fmt;

use crate::error::{Error, Result};
use crate::rng::{random_isometry, stream_rng};
use crate::tensor::{check_isometry, C64, DenseTensor, Matrix, ONE, ZERO};

/// Lattice coordinates: `x` counts columns (left bond direction), `y` counts
/// rows (down bond direction).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Site {
    pub x: usize,
    pub y: usize,
}

impl Site {
    pub fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }

    /// Anti-diagonal index; sites with equal `diag` are causally independent.
    pub fn diag(&self) -> usize {
        self.x + self.y
    }
}

impl PartialOrd for Site {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Causal scan order: anti-diagonals first, left-to-right within a diagonal.
impl Ord for Site {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.diag().cmp(&other.diag()).then(self.x.cmp(&other.x))
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// What family a site tensor was built from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Gate,
    Swap,
    Identity,
    Stinespring,
    WPerturbed,
    Postselect,
    Custom,
}

/// An isometric site tensor with legs `(p, l, d, r, u)`.
#[derive(Clone, Debug)]
pub struct SiteTensor {
    tensor: DenseTensor,
    role: Role,
}

pub const LEGS: [&str; 5] = ["p", "l", "d", "r", "u"];

impl SiteTensor {
    /// Wrap a `(p, l, d, r, u)` tensor, verifying the isometry condition at
    /// tolerance `1e-10`.
    pub fn new(tensor: DenseTensor, role: Role) -> Result<Self> {
        if tensor.labels() != LEGS {
            return Err(Error::Geometry(format!(
                "site tensor must carry legs {:?}, got {:?}",
                LEGS,
                tensor.labels()
            )));
        }
        let flat = tensor.flatten(&["p", "r", "u"], &["l", "d"])?;
        let check = check_isometry(&flat, 1e-10)?;
        if !check.is_isometry {
            return Err(Error::NotIsometry(format!(
                "site tensor deviates from isometry by {:.3e}",
                check.max_deviation
            )));
        }
        Ok(Self { tensor, role })
    }

    pub fn tensor(&self) -> &DenseTensor {
        &self.tensor
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn d(&self) -> usize {
        self.tensor.shape()[0]
    }

    pub fn dl(&self) -> usize {
        self.tensor.shape()[1]
    }

    pub fn dd(&self) -> usize {
        self.tensor.shape()[2]
    }

    pub fn dr(&self) -> usize {
        self.tensor.shape()[3]
    }

    pub fn du(&self) -> usize {
        self.tensor.shape()[4]
    }

    pub fn dim_in(&self) -> usize {
        self.dl() * self.dd()
    }

    pub fn dim_out(&self) -> usize {
        self.dr() * self.du()
    }

    /// The isometry `V` as a `(d*D_r*D_u) x (D_l*D_d)` matrix.
    pub fn isometry_matrix(&self) -> Matrix {
        self.tensor.flatten(&["p", "r", "u"], &["l", "d"]).expect("site legs present")
    }

    /// The PEPS projector view `P`: the same tensor as a map from all four
    /// virtual legs (ordered `r, u, l, d`, i.e. out pair then in pair) to the
    /// physical index, as a `d x (D_r*D_u*D_l*D_d)` matrix.
    pub fn peps_matrix(&self) -> Matrix {
        self.tensor.flatten(&["p"], &["r", "u", "l", "d"]).expect("site legs present")
    }

    /// Physical slice `V^i` as a `(D_r*D_u) x (D_l*D_d)` matrix.
    pub fn physical_slice(&self, i: usize) -> Matrix {
        let (d, dl, dd, dr, du) = (self.d(), self.dl(), self.dd(), self.dr(), self.du());
        assert!(i < d);
        let data = self.tensor.data();
        Matrix::from_fn(dr * du, dl * dd, |out, inn| {
            let (r, u) = (out / du, out % du);
            let (l, dn) = (inn / dd, inn % dd);
            data[((((i * dl + l) * dd + dn) * dr + r) * du) + u]
        })
    }
}

fn site_tensor_from_entries(
    d: usize,
    dl: usize,
    dd: usize,
    dr: usize,
    du: usize,
    role: Role,
    entry: impl Fn(usize, usize, usize, usize, usize) -> C64,
) -> Result<SiteTensor> {
    let mut data = Vec::with_capacity(d * dl * dd * dr * du);
    for p in 0..d {
        for l in 0..dl {
            for dn in 0..dd {
                for r in 0..dr {
                    for u in 0..du {
                        data.push(entry(p, l, dn, r, u));
                    }
                }
            }
        }
    }
    SiteTensor::new(DenseTensor::new(LEGS, vec![d, dl, dd, dr, du], data)?, role)
}

/// Site tensor `|phys> (x) M` where `M` maps the incoming virtual pair
/// `(l, d)` to the outgoing `(r, u)`.
pub fn product_site(
    phys: &[C64],
    m: &Matrix,
    dl: usize,
    dd: usize,
    dr: usize,
    du: usize,
    role: Role,
) -> Result<SiteTensor> {
    if m.rows() != dr * du || m.cols() != dl * dd {
        return Err(Error::DimensionMismatch(format!(
            "virtual map is {}x{}, dims ask {}x{}",
            m.rows(),
            m.cols(),
            dr * du,
            dl * dd
        )));
    }
    site_tensor_from_entries(phys.len(), dl, dd, dr, du, role, |p, l, dn, r, u| {
        phys[p] * m.get(r * du + u, l * dd + dn)
    })
}

/// Two-qubit SWAP as a 4x4 matrix.
pub fn swap4() -> Matrix {
    Matrix::from_fn(4, 4, |i, j| {
        let (a, b) = (i / 2, i % 2);
        if j == b * 2 + a {
            ONE
        } else {
            ZERO
        }
    })
}

fn ket00_4() -> Vec<C64> {
    let mut v = vec![ZERO; 4];
    v[0] = ONE;
    v
}

pub fn assert_unitary(u: &Matrix, n: usize) -> Result<()> {
    if u.rows() != n || u.cols() != n {
        return Err(Error::DimensionMismatch(format!(
            "expected a {n}x{n} matrix, got {}x{}",
            u.rows(),
            u.cols()
        )));
    }
    let dev = u.adjoint().mul(u)?.max_abs_diff(&Matrix::identity(n));
    if dev > 1e-10 {
        return Err(Error::NotUnitary(dev));
    }
    Ok(())
}

/// Gate tensor `G = |00>_P (x) U_V`: the physical pair is created in `|00>`
/// and `u` acts on the two-ancilla space, `(l, d) -> (r, u)`.
pub fn gate_tensor(u: &Matrix) -> Result<SiteTensor> {
    assert_unitary(u, 4)?;
    product_site(&ket00_4(), u, 2, 2, 2, 2, Role::Gate)
}

/// Identity tensor `I = |00>_P (x) SWAP_V`: hands each incoming ancilla state
/// to the crossing worldline (left content exits up, down content exits
/// right).
pub fn identity_tensor() -> SiteTensor {
    product_site(&ket00_4(), &swap4(), 2, 2, 2, 2, Role::Identity).expect("static tensor")
}

/// Swap tensor `S`: moves both incoming ancillas into the physical pair;
/// outgoing virtual legs have dimension 1.
pub fn swap_tensor() -> SiteTensor {
    general_swap_tensor(2, 2).expect("static tensor")
}

/// Swap tensor for arbitrary incoming qubit dimensions; a missing input reads
/// as `|0>` on the corresponding physical qubit.
pub fn general_swap_tensor(dl: usize, dd: usize) -> Result<SiteTensor> {
    if !(1..=2).contains(&dl) || !(1..=2).contains(&dd) {
        return Err(Error::Geometry("swap tensor supports qubit bonds".into()));
    }
    site_tensor_from_entries(4, dl, dd, 1, 1, Role::Swap, |p, l, dn, _r, _u| {
        let (i, j) = (p / 2, p % 2);
        if i == l && j == dn {
            ONE
        } else {
            ZERO
        }
    })
}

/// Pure-routing site: the identity tensor generalized to the bond dimensions
/// at hand. With `create_up` / `create_right` the corresponding outgoing leg
/// is a freshly prepared `|0>` qubit instead of a routed input; this is the
/// state-preparation specialization used on lattice boundaries.
pub fn routing_site(dl: usize, dd: usize, create_right: bool, create_up: bool) -> Result<SiteTensor> {
    if create_right && dd != 1 {
        return Err(Error::Geometry("can only create a right leg when the down leg is trivial".into()));
    }
    if create_up && dl != 1 {
        return Err(Error::Geometry("can only create an up leg when the left leg is trivial".into()));
    }
    let dr = if create_right { 2 } else { dd };
    let du = if create_up { 2 } else { dl };
    site_tensor_from_entries(4, dl, dd, dr, du, Role::Identity, |p, l, dn, r, u| {
        let route_r = if create_right { r == 0 } else { r == dn };
        let route_u = if create_up { u == 0 } else { u == l };
        if p == 0 && route_r && route_u {
            ONE
        } else {
            ZERO
        }
    })
}

/// Stinespring dilation `V = sum_i A^i (x) |i>` of a 16-element Kraus set on
/// the two-ancilla space (D = 2, d = 16).
pub fn stinespring_site(kraus: &[Matrix]) -> Result<SiteTensor> {
    if kraus.len() != 16 {
        return Err(Error::InvalidParameter(format!(
            "Stinespring site needs 16 Kraus operators, got {}",
            kraus.len()
        )));
    }
    for k in kraus {
        if k.rows() != 4 || k.cols() != 4 {
            return Err(Error::DimensionMismatch("Kraus operators must be 4x4".into()));
        }
    }
    let mut sum = Matrix::zeros(4, 4);
    for k in kraus {
        sum = sum.add(&k.adjoint().mul(k)?)?;
    }
    let dev = sum.max_abs_diff(&Matrix::identity(4));
    if dev > 1e-10 {
        return Err(Error::NotTracePreserving(dev));
    }
    site_tensor_from_entries(16, 2, 2, 2, 2, Role::Stinespring, |p, l, dn, r, u| {
        kraus[p].get(r * 2 + u, l * 2 + dn)
    })
}

/// Kraus operators of the depolarized unitary channel
/// `rho -> (1-p) U rho U^dag + p tr(rho) 1/4` on the two-ancilla space,
/// as 16 linearly independent operators indexed by `(alpha, beta)`:
/// `A^{aa} = gamma0 U + sqrt(p/4) |a><a| U` and
/// `A^{ab} = sqrt(p/4) |a><b| U` for `a != b`.
pub fn depolarized_unitary_kraus(u: &Matrix, p: f64) -> Result<Vec<Matrix>> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!("p must lie in (0, 1), got {p}")));
    }
    assert_unitary(u, 4)?;
    let k = 4.0f64;
    let s = (p / k).sqrt();
    // gamma0 solves k g^2 + 2 g s = 1 - p, so the diagonal family reproduces
    // the (1-p) U rho U^dag part exactly
    let gamma0 = (-s + (p / k + k * (1.0 - p)).sqrt()) / k;
    let mut ops = Vec::with_capacity(16);
    for alpha in 0..4 {
        for beta in 0..4 {
            // |alpha><beta| U: row alpha holds row beta of U
            let mut a = Matrix::zeros(4, 4);
            for j in 0..4 {
                a.set(alpha, j, u.get(beta, j) * C64::new(s, 0.0));
            }
            if alpha == beta {
                a = a.add(&u.scale(C64::new(gamma0, 0.0)))?;
            }
            ops.push(a);
        }
    }
    Ok(ops)
}

/// Kraus operators of the depolarized restart channel
/// `rho -> (1-p) |0><0| (x) tr_1(rho) + p tr(rho) 1/4` on two ancilla qubits.
///
/// The 16 operators are mutually orthogonal in the Hilbert-Schmidt inner
/// product: `A^{a1,a2;b} = c |a1><a2| (x) sigma_b` with `sigma_b` the
/// normalized one-qubit Pauli basis (`sigma_0 = 1/sqrt(2)`, the rest
/// traceless), `c = sqrt(p/4)` except for the `(a1, b) = (0, 0)` operators
/// which absorb the reset part in quadrature, `c = sqrt(2(1-p) + p/4)`.
pub fn depolarized_restart_kraus(p: f64) -> Result<Vec<Matrix>> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!("p must lie in (0, 1), got {p}")));
    }
    let sigmas = normalized_paulis_1q();
    let depol = (p / 4.0).sqrt();
    let reset = (2.0 * (1.0 - p) + p / 4.0).sqrt();
    let mut ops = Vec::with_capacity(16);
    for a1 in 0..2 {
        for a2 in 0..2 {
            for b in 0..4 {
                let c = if a1 == 0 && b == 0 { reset } else { depol };
                let mut first = Matrix::zeros(2, 2);
                first.set(a1, a2, C64::new(c, 0.0));
                ops.push(first.kron(&sigmas[b]));
            }
        }
    }
    Ok(ops)
}

/// One-qubit Pauli matrices `{1, X, Y, Z}`.
pub fn paulis_1q() -> [Matrix; 4] {
    let i = C64::new(0.0, 1.0);
    [
        Matrix::identity(2),
        Matrix::new(2, 2, vec![ZERO, ONE, ONE, ZERO]).unwrap(),
        Matrix::new(2, 2, vec![ZERO, -i, i, ZERO]).unwrap(),
        Matrix::new(2, 2, vec![ONE, ZERO, ZERO, -ONE]).unwrap(),
    ]
}

fn normalized_paulis_1q() -> [Matrix; 4] {
    let f = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    paulis_1q().map(|m| m.scale(f))
}

/// The sixteen two-qubit Pauli operators in lexicographic order
/// (`sigma_{4a+b} = tau_a (x) tau_b`, `sigma_0 = 1`).
pub fn paulis_2q() -> Vec<Matrix> {
    let tau = paulis_1q();
    let mut out = Vec::with_capacity(16);
    for a in 0..4 {
        for b in 0..4 {
            out.push(tau[a].kron(&tau[b]));
        }
    }
    out
}

/// Kraus operators `K_ij` of the monitored `W` isometry, indexed by the
/// two-qubit measurement outcome: order `00, 01, 10, 11`.
pub fn w_kraus(delta: f64) -> Result<[Matrix; 4]> {
    if !(0.0..=std::f64::consts::FRAC_1_SQRT_2 + 1e-12).contains(&delta) {
        return Err(Error::InvalidParameter(format!(
            "w isometry needs delta^2 <= 1/2, got delta = {delta}"
        )));
    }
    let s = C64::new((0.5 - delta * delta).max(0.0).sqrt(), 0.0);
    let id = C64::new(0.0, delta);
    let mut k00 = Matrix::identity(2).scale(s);
    k00.set(1, 1, k00.get(1, 1) + id);
    let mut k11 = Matrix::identity(2).scale(s);
    k11.set(0, 0, k11.get(0, 0) + id);
    let mut k01 = Matrix::zeros(2, 2);
    k01.set(1, 0, id);
    let mut k10 = Matrix::zeros(2, 2);
    k10.set(0, 1, id);
    Ok([k00, k01, k10, k11])
}

/// The monitored `W` isometry mapping one ancilla qubit to itself plus two
/// physical qubits: `W = sum_ij |ij> K_ij`. Measuring the physical pair gives
/// unequal outcomes (01 or 10) with probability `delta^2` independent of the
/// input, and those outcomes project the ancilla to `|1>` / `|0>`.
///
/// Legs: `p0`, `p1` (the measured pair), `aout`, `ain`.
pub fn w_isometry(delta: f64) -> Result<DenseTensor> {
    let kraus = w_kraus(delta)?;
    let mut data = Vec::with_capacity(16);
    for p0 in 0..2 {
        for p1 in 0..2 {
            let k = &kraus[p0 * 2 + p1];
            for aout in 0..2 {
                for ain in 0..2 {
                    data.push(k.get(aout, ain));
                }
            }
        }
    }
    DenseTensor::new(["p0", "p1", "aout", "ain"], vec![2, 2, 2, 2], data)
}

/// One output branch of a `W`-perturbed site: either a genuine `W` (two
/// monitored physical qubits plus the continuing ancilla) or the terminal
/// variant that copies the departing ancilla into the physical pair
/// (`|i> -> |i, 0>_P`, trivial ancilla out).
fn w_branch(delta: f64, terminal: bool) -> Result<Vec<Matrix>> {
    if terminal {
        let mut ops = Vec::with_capacity(4);
        for p0 in 0..2 {
            for p1 in 0..2 {
                let mut m = Matrix::zeros(1, 2);
                if p1 == 0 {
                    m.set(0, p0, ONE);
                }
                ops.push(m);
            }
        }
        Ok(ops)
    } else {
        Ok(w_kraus(delta)?.to_vec())
    }
}

/// A `W`-perturbed gate site `V = (W (x) W) U` with `d = 16`: four physical
/// qubits, the right-branch pair (monitoring the right bond) followed by the
/// up-branch pair.
///
/// `terminal_r` / `terminal_u` switch the corresponding branch to the
/// terminal copy variant (for lattice edges); `dl` / `dd` of 1 feed `|0>`
/// into the matching input of `u`.
pub fn w_perturbed_site(
    u: &Matrix,
    delta: f64,
    dl: usize,
    dd: usize,
    terminal_r: bool,
    terminal_u: bool,
) -> Result<SiteTensor> {
    assert_unitary(u, 4)?;
    if !(1..=2).contains(&dl) || !(1..=2).contains(&dd) {
        return Err(Error::Geometry("w site bonds are qubits".into()));
    }
    let br = w_branch(delta, terminal_r)?;
    let bu = w_branch(delta, terminal_u)?;
    let dr = br[0].rows();
    let du = bu[0].rows();
    site_tensor_from_entries(16, dl, dd, dr, du, Role::WPerturbed, |p, l, dn, r, uu| {
        let pr = p / 4; // right-branch pair outcome
        let pu = p % 4; // up-branch pair outcome
        let mut acc = ZERO;
        for o1 in 0..2 {
            for o2 in 0..2 {
                acc += br[pr].get(r, o1) * bu[pu].get(uu, o2) * u.get(o1 * 2 + o2, l * 2 + dn);
            }
        }
        acc
    })
}

/// Perturbed gate tensor of the monitored family, `V = (W (x) W) U` with all
/// four bonds of dimension 2. The site's PEPS flattening has minimum singular
/// value `delta^2` (each branch contributes a factor `delta`).
pub fn perturbed_gate_tensor(u: &Matrix, delta: f64) -> Result<SiteTensor> {
    w_perturbed_site(u, delta, 2, 2, false, false)
}

/// Maximally injective postselection tensor `P^k_U = U sigma_k / 4`
/// (D = 2, d = 16): postselecting the physical qudit on `|0>` applies `U` to
/// the ancilla pair, and all sixteen singular values equal 1/2.
pub fn postselect_gate_projector(u: &Matrix) -> Result<SiteTensor> {
    assert_unitary(u, 4)?;
    let sigmas = paulis_2q();
    let quarter = C64::new(0.25, 0.0);
    let ops: Vec<Matrix> = sigmas.iter().map(|s| u.mul(s).unwrap().scale(quarter)).collect();
    site_tensor_from_entries(16, 2, 2, 2, 2, Role::Postselect, |p, l, dn, r, uu| {
        ops[p].get(r * 2 + uu, l * 2 + dn)
    })
}

/// Maximally injective swap projector `P^k = |k0 k1><k2 k3| / 2`: the
/// physical outcome reveals the incoming ancilla pair and sets the outgoing
/// one.
pub fn maximally_injective_swap_projector() -> SiteTensor {
    let half = C64::new(0.5, 0.0);
    site_tensor_from_entries(16, 2, 2, 2, 2, Role::Postselect, |p, l, dn, r, uu| {
        let k0 = (p >> 3) & 1;
        let k1 = (p >> 2) & 1;
        let k2 = (p >> 1) & 1;
        let k3 = p & 1;
        if r == k0 && uu == k1 && l == k2 && dn == k3 {
            half
        } else {
            ZERO
        }
    })
    .expect("static tensor")
}

/// An `N_x x N_y` grid of site tensors with consistent bond dimensions.
///
/// Incoming boundary legs (left edge, bottom edge) always have dimension 1.
/// Outgoing boundary legs (right edge, top edge) have dimension 1 for closed
/// lattices; lattices built with open top-right boundaries keep dangling
/// ancilla legs there, which every engine in this crate treats as traced out.
#[derive(Clone, Debug)]
pub struct IsoTnsLattice {
    nx: usize,
    ny: usize,
    sites: Vec<SiteTensor>,
    open: bool,
}

impl IsoTnsLattice {
    pub fn new(nx: usize, ny: usize, sites: Vec<SiteTensor>) -> Result<Self> {
        Self::build(nx, ny, sites, false)
    }

    /// Like [`new`](Self::new) but allowing dangling (traced) ancilla legs on
    /// the top and right edges.
    pub fn new_open(nx: usize, ny: usize, sites: Vec<SiteTensor>) -> Result<Self> {
        Self::build(nx, ny, sites, true)
    }

    fn build(nx: usize, ny: usize, sites: Vec<SiteTensor>, open: bool) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::Geometry("lattice dimensions must be positive".into()));
        }
        if sites.len() != nx * ny {
            return Err(Error::Geometry(format!(
                "{}x{} lattice needs {} sites, got {}",
                nx,
                ny,
                nx * ny,
                sites.len()
            )));
        }
        let lattice = Self { nx, ny, sites, open };
        for y in 0..ny {
            for x in 0..nx {
                let s = lattice.site(Site::new(x, y));
                let expect_dl = if x == 0 { 1 } else { lattice.site(Site::new(x - 1, y)).dr() };
                let expect_dd = if y == 0 { 1 } else { lattice.site(Site::new(x, y - 1)).du() };
                if s.dl() != expect_dl || s.dd() != expect_dd {
                    return Err(Error::Geometry(format!(
                        "site ({x}, {y}) has in-dims ({}, {}), neighbours supply ({}, {})",
                        s.dl(),
                        s.dd(),
                        expect_dl,
                        expect_dd
                    )));
                }
                if !open {
                    if x == nx - 1 && s.dr() != 1 {
                        return Err(Error::Geometry(format!(
                            "site ({x}, {y}) on the right edge must have a trivial right leg"
                        )));
                    }
                    if y == ny - 1 && s.du() != 1 {
                        return Err(Error::Geometry(format!(
                            "site ({x}, {y}) on the top edge must have a trivial up leg"
                        )));
                    }
                }
            }
        }
        Ok(lattice)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn n_sites(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_open(&self) -> bool {
        self.open
    }

    pub fn site(&self, s: Site) -> &SiteTensor {
        assert!(s.x < self.nx && s.y < self.ny, "site {s} out of bounds");
        &self.sites[s.y * self.nx + s.x]
    }

    pub fn contains(&self, s: Site) -> bool {
        s.x < self.nx && s.y < self.ny
    }

    /// All sites in causal scan order.
    pub fn scan_order(&self) -> Vec<Site> {
        let mut order = Vec::with_capacity(self.n_sites());
        for c in 0..=(self.nx - 1 + self.ny - 1) {
            let x_min = c.saturating_sub(self.ny - 1);
            for x in x_min..=c.min(self.nx - 1) {
                order.push(Site::new(x, c - x));
            }
        }
        order
    }

    /// Sites in the past light cone of `s` (inclusive), in scan order.
    pub fn lightcone(&self, s: Site) -> Vec<Site> {
        self.scan_order().into_iter().filter(|t| t.x <= s.x && t.y <= s.y).collect()
    }

    /// Product of physical dimensions over all sites, saturating.
    pub fn physical_dim(&self) -> usize {
        let mut dim = 1usize;
        for s in &self.sites {
            dim = dim.saturating_mul(s.d());
        }
        dim
    }
}

/// Open lattice of identity tensors (D = 2 on interior bonds, boundary
/// inputs fed `|0>`); the physical state is `|0...0>`.
pub fn identity_lattice(nx: usize, ny: usize) -> IsoTnsLattice {
    let full = identity_tensor();
    let mut sites = Vec::with_capacity(nx * ny);
    for y in 0..ny {
        for x in 0..nx {
            let dl = if x == 0 { 1 } else { 2 };
            let dd = if y == 0 { 1 } else { 2 };
            sites.push(sliced_inputs(&full, dl, dd).expect("identity slice"));
        }
    }
    IsoTnsLattice::new_open(nx, ny, sites).expect("identity lattice is consistent")
}

fn interior_bond_dims(nx: usize, ny: usize, x: usize, y: usize, bond: usize) -> (usize, usize, usize, usize) {
    let dl = if x == 0 { 1 } else { bond };
    let dd = if y == 0 { 1 } else { bond };
    let dr = if x == nx - 1 { 1 } else { bond };
    let du = if y == ny - 1 { 1 } else { bond };
    (dl, dd, dr, du)
}

/// Random closed lattice: every site is a Haar-random isometry with physical
/// dimension `d`, interior bonds of dimension `bond`, boundary legs trivial.
pub fn random_lattice(nx: usize, ny: usize, d: usize, bond: usize, seed: u64) -> Result<IsoTnsLattice> {
    let mut sites = Vec::with_capacity(nx * ny);
    for y in 0..ny {
        for x in 0..nx {
            let (dl, dd, dr, du) = interior_bond_dims(nx, ny, x, y, bond);
            let mut rng = stream_rng(seed, (y * nx + x) as u64);
            let v = random_isometry(d * dr * du, dl * dd, &mut rng);
            let tensor = DenseTensor::unflatten(
                &v,
                &[("p", d), ("r", dr), ("u", du)],
                &[("l", dl), ("d", dd)],
            )?
            .permuted(&LEGS)?;
            sites.push(SiteTensor::new(tensor, Role::Custom)?);
        }
    }
    IsoTnsLattice::new(nx, ny, sites)
}

/// Restrict a full-bond site tensor to `|0>` on trivialized input legs.
pub fn sliced_inputs(site: &SiteTensor, dl: usize, dd: usize) -> Result<SiteTensor> {
    let data = site.tensor().data();
    let (d, dr, du) = (site.d(), site.dr(), site.du());
    let (full_dl, full_dd) = (site.dl(), site.dd());
    site_tensor_from_entries(d, dl, dd, dr, du, site.role(), |p, l, dn, r, u| {
        data[((((p * full_dl + l) * full_dd + dn) * dr + r) * du) + u]
    })
}

/// Which Kraus family backs an injective (Stinespring) lattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StinespringKind {
    /// Depolarized random two-qubit unitaries.
    Unitary,
    /// Depolarized restart (one ancilla qubit reset to `|0>`).
    Restart,
}

/// Open lattice of injective Stinespring sites with depolarization strength
/// `p`; per-site unitaries are drawn from `seed`. Left/bottom boundary
/// inputs are fed `|0>`; top/right ancillas dangle (traced).
pub fn stinespring_lattice(
    nx: usize,
    ny: usize,
    kind: StinespringKind,
    p: f64,
    seed: u64,
) -> Result<IsoTnsLattice> {
    let mut sites = Vec::with_capacity(nx * ny);
    for y in 0..ny {
        for x in 0..nx {
            let kraus = match kind {
                StinespringKind::Unitary => {
                    let mut rng = stream_rng(seed, (y * nx + x) as u64);
                    let u = crate::rng::random_unitary(4, &mut rng);
                    depolarized_unitary_kraus(&u, p)?
                }
                StinespringKind::Restart => depolarized_restart_kraus(p)?,
            };
            let full = stinespring_site(&kraus)?;
            let dl = if x == 0 { 1 } else { 2 };
            let dd = if y == 0 { 1 } else { 2 };
            sites.push(sliced_inputs(&full, dl, dd)?);
        }
    }
    IsoTnsLattice::new_open(nx, ny, sites)
}

/// Open lattice of maximally injective postselection tensors around random
/// unitaries.
pub fn postselect_lattice(nx: usize, ny: usize, seed: u64) -> Result<IsoTnsLattice> {
    let mut sites = Vec::with_capacity(nx * ny);
    for y in 0..ny {
        for x in 0..nx {
            let mut rng = stream_rng(seed, (y * nx + x) as u64);
            let u = crate::rng::random_unitary(4, &mut rng);
            let full = postselect_gate_projector(&u)?;
            let dl = if x == 0 { 1 } else { 2 };
            let dd = if y == 0 { 1 } else { 2 };
            sites.push(sliced_inputs(&full, dl, dd)?);
        }
    }
    IsoTnsLattice::new_open(nx, ny, sites)
}

/// How the unitaries of a `W`-perturbed lattice are chosen.
#[derive(Clone, Copy, Debug)]
pub enum WLatticeUnitaries {
    Identity,
    Random { seed: u64 },
}

/// Closed lattice of `W`-perturbed gate sites: every site applies a two-qubit
/// unitary followed by a monitored `W` on each outgoing ancilla. Top/right
/// edges use the terminal variant that copies the departing ancilla into the
/// physical pair, so all boundary legs stay trivial.
pub fn w_perturbed_lattice(
    nx: usize,
    ny: usize,
    delta: f64,
    unitaries: WLatticeUnitaries,
) -> Result<IsoTnsLattice> {
    let mut sites = Vec::with_capacity(nx * ny);
    for y in 0..ny {
        for x in 0..nx {
            let u = match unitaries {
                WLatticeUnitaries::Identity => Matrix::identity(4),
                WLatticeUnitaries::Random { seed } => {
                    let mut rng = stream_rng(seed, (y * nx + x) as u64);
                    crate::rng::random_unitary(4, &mut rng)
                }
            };
            let dl = if x == 0 { 1 } else { 2 };
            let dd = if y == 0 { 1 } else { 2 };
            sites.push(w_perturbed_site(&u, delta, dl, dd, x == nx - 1, y == ny - 1)?);
        }
    }
    IsoTnsLattice::new(nx, ny, sites)
}
