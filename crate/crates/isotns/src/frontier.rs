//! Internal frontier-contraction helpers shared by the exact engine, the
//! percolation estimator and the samplers.
//!
//! Bond legs are named after the site that produces them (`k:x,y,r` /
//! `k:x,y,u` on the ket side, `b:...` on the bra side), physical legs after
//! their site (`P:x,y` ket, `Q:x,y` bra). Trivial (dimension-1) legs are
//! squeezed away everywhere, so a frontier tensor only ever carries live
//! bonds.

use crate::error::Result;
use crate::lattice::{IsoTnsLattice, Site, SiteTensor};
use crate::tensor::{contract, DenseTensor, Matrix, ONE};

pub(crate) fn ket_bond(site: Site, dir: char) -> String {
    format!("k:{},{},{}", site.x, site.y, dir)
}

pub(crate) fn bra_bond(site: Site, dir: char) -> String {
    format!("b:{},{},{}", site.x, site.y, dir)
}

pub(crate) fn ket_phys(site: Site) -> String {
    format!("P:{},{}", site.x, site.y)
}

pub(crate) fn bra_phys(site: Site) -> String {
    format!("Q:{},{}", site.x, site.y)
}

/// Remove all dimension-1 legs (pure reshape).
pub(crate) fn squeeze(t: &DenseTensor) -> DenseTensor {
    let keep: Vec<(String, usize)> = t
        .labels()
        .iter()
        .zip(t.shape())
        .filter(|&(_, &d)| d > 1)
        .map(|(l, &d)| (l.clone(), d))
        .collect();
    DenseTensor::new(
        keep.iter().map(|(l, _)| l.clone()).collect::<Vec<_>>(),
        keep.iter().map(|&(_, d)| d).collect(),
        t.data().to_vec(),
    )
    .expect("squeeze preserves entry count")
}

/// The site isometry as a squeezed tensor with frontier leg names
/// (ket side). Incoming legs are named after the producing neighbours.
pub(crate) fn site_ket_tensor(site: Site, tensor: &SiteTensor) -> DenseTensor {
    let named = tensor
        .tensor()
        .relabeled(|l| match l {
            "p" => ket_phys(site),
            "l" => ket_bond(Site::new(site.x.wrapping_sub(1), site.y), 'r'),
            "d" => ket_bond(Site::new(site.x, site.y.wrapping_sub(1)), 'u'),
            "r" => ket_bond(site, 'r'),
            "u" => ket_bond(site, 'u'),
            other => other.to_string(),
        })
        .expect("unique frontier labels");
    squeeze(&named)
}

/// Conjugate tensor with bra-side leg names.
pub(crate) fn site_bra_tensor(site: Site, tensor: &SiteTensor) -> DenseTensor {
    let named = tensor
        .tensor()
        .conj()
        .relabeled(|l| match l {
            "p" => bra_phys(site),
            "l" => bra_bond(Site::new(site.x.wrapping_sub(1), site.y), 'r'),
            "d" => bra_bond(Site::new(site.x, site.y.wrapping_sub(1)), 'u'),
            "r" => bra_bond(site, 'r'),
            "u" => bra_bond(site, 'u'),
            other => other.to_string(),
        })
        .expect("unique frontier labels");
    squeeze(&named)
}

/// Contract `t` against `other` over every label the two share.
pub(crate) fn contract_shared(t: &DenseTensor, other: &DenseTensor) -> Result<DenseTensor> {
    let shared: Vec<&str> = t
        .labels()
        .iter()
        .map(String::as_str)
        .filter(|l| other.labels().iter().any(|m| m == l))
        .collect();
    contract(t, &shared, other, &shared)
}

/// Partial trace over a ket/bra leg pair of equal dimension:
/// contracting both legs against a delta sums the diagonal.
pub(crate) fn trace_pair(t: &DenseTensor, ket: &str, bra: &str) -> Result<DenseTensor> {
    let dim = t.leg_dim(ket)?;
    let delta = DenseTensor::new(
        [format!("{ket}#"), format!("{bra}#")],
        vec![dim, dim],
        Matrix::identity(dim).into_data(),
    )?;
    contract(t, &[ket, bra], &delta, &[&format!("{ket}#"), &format!("{bra}#")])
}

/// Trace away, on both sides, every out-leg of `site` whose consumer is not
/// accepted by `keep`.
pub(crate) fn trace_exiting(
    t: &DenseTensor,
    lattice: &IsoTnsLattice,
    site: Site,
    keep: impl Fn(Site) -> bool,
) -> Result<DenseTensor> {
    let mut out = t.clone();
    for (dir, consumer) in [
        ('r', Site::new(site.x + 1, site.y)),
        ('u', Site::new(site.x, site.y + 1)),
    ] {
        let ket = ket_bond(site, dir);
        if out.leg_position(&ket).is_err() {
            continue; // trivial leg, already squeezed
        }
        let exits = !lattice.contains(consumer) || !keep(consumer);
        if exits {
            out = trace_pair(&out, &ket, &bra_bond(site, dir))?;
        }
    }
    Ok(out)
}

/// Scalar starting frontier.
pub(crate) fn unit_frontier() -> DenseTensor {
    DenseTensor::scalar(ONE)
}

