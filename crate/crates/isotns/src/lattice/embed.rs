//! Embedding one-dimensional brickwork circuits into the square lattice.
//!
//! Logical qubits ride the ancilla worldlines: through an identity tensor the
//! content entering from the left exits up and the content entering from
//! below exits right, so a register of `n` qubits zigzags along the main
//! diagonal. Adjacent register positions meet pairwise at alternating
//! anti-diagonals; a circuit layer is placed on the first anti-diagonal where
//! all of its pairs meet, the final layer of swap tensors on the first
//! anti-diagonal after the last gate where the pairs `(0,1), (2,3), ...`
//! line up. Boundary sites with trivial incoming legs are specialized to
//! state-preparation tensors that inject the register qubits as `|0>`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    gate_tensor, general_swap_tensor, routing_site, swap4, IsoTnsLattice, Site, SiteTensor,
};
use crate::error::{Error, Result};
use crate::tensor::{C64, Matrix};

/// A brickwork circuit: layers of disjoint nearest-neighbour two-qubit gates.
#[derive(Clone, Debug)]
pub struct BrickworkCircuit {
    n_qubits: usize,
    layers: Vec<Vec<(usize, Matrix)>>,
}

impl BrickworkCircuit {
    /// `layers[t]` lists `(q, u)` pairs: `u` acts on qubits `(q, q+1)` with
    /// `q` the more significant tensor factor.
    pub fn new(n_qubits: usize, layers: Vec<Vec<(usize, Matrix)>>) -> Result<Self> {
        if n_qubits == 0 || !n_qubits.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "brickwork circuits use an even positive qubit count, got {n_qubits}"
            )));
        }
        let mut sorted_layers = Vec::with_capacity(layers.len());
        for (t, mut layer) in layers.into_iter().enumerate() {
            layer.sort_by_key(|&(q, _)| q);
            for (i, (q, u)) in layer.iter().enumerate() {
                if q + 1 >= n_qubits {
                    return Err(Error::InvalidParameter(format!(
                        "layer {t}: gate on ({q}, {}) exceeds {n_qubits} qubits",
                        q + 1
                    )));
                }
                super::assert_unitary(u, 4)?;
                if i > 0 && layer[i - 1].0 + 1 >= *q {
                    return Err(Error::InvalidParameter(format!(
                        "layer {t}: overlapping gates at qubits {} and {q}",
                        layer[i - 1].0
                    )));
                }
            }
            sorted_layers.push(layer);
        }
        Ok(Self { n_qubits, layers: sorted_layers })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn layers(&self) -> &[Vec<(usize, Matrix)>] {
        &self.layers
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn to_record(&self) -> CircuitRecord {
        CircuitRecord {
            version: 1,
            n_qubits: self.n_qubits,
            layers: self
                .layers
                .iter()
                .map(|layer| {
                    layer
                        .iter()
                        .map(|(q, u)| GateRecord {
                            pair: [*q, q + 1],
                            unitary: (0..4)
                                .map(|i| (0..4).map(|j| [u.get(i, j).re, u.get(i, j).im]).collect())
                                .collect(),
                        })
                        .collect()
                })
                .collect(),
        }
    }

    pub fn from_record(record: &CircuitRecord) -> Result<Self> {
        if record.version != 1 {
            return Err(Error::InvalidParameter(format!(
                "unsupported circuit record version {}",
                record.version
            )));
        }
        let layers = record
            .layers
            .iter()
            .map(|layer| {
                layer
                    .iter()
                    .map(|g| {
                        if g.pair[1] != g.pair[0] + 1 {
                            return Err(Error::InvalidParameter(format!(
                                "gate pair [{}, {}] is not nearest-neighbour",
                                g.pair[0], g.pair[1]
                            )));
                        }
                        if g.unitary.len() != 4 || g.unitary.iter().any(|row| row.len() != 4) {
                            return Err(Error::DimensionMismatch("gate unitary must be 4x4".into()));
                        }
                        let m = Matrix::from_fn(4, 4, |i, j| {
                            C64::new(g.unitary[i][j][0], g.unitary[i][j][1])
                        });
                        Ok((g.pair[0], m))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(record.n_qubits, layers)
    }
}

/// Serialized circuit: structured-text list of layers.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CircuitRecord {
    pub version: u32,
    pub n_qubits: usize,
    pub layers: Vec<Vec<GateRecord>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GateRecord {
    pub pair: [usize; 2],
    pub unitary: Vec<Vec<[f64; 2]>>,
}

/// Result of embedding a circuit: the lattice plus the location of the
/// register on the swap-tensor diagonal.
#[derive(Clone, Debug)]
pub struct EmbeddedCircuit {
    pub lattice: IsoTnsLattice,
    /// Swap sites in register order; site `j` holds logical qubits
    /// `(2j, 2j+1)` as its two physical qubits.
    pub swap_sites: Vec<Site>,
    pub n_qubits: usize,
}

impl EmbeddedCircuit {
    /// Physical location of each logical qubit as `(site, slot)` where slot 0
    /// is the more significant qubit of the site's physical pair.
    pub fn register(&self) -> Vec<(Site, usize)> {
        let mut out = Vec::with_capacity(self.n_qubits);
        for (j, &site) in self.swap_sites.iter().enumerate() {
            out.push((site, 0));
            out.push((site, 1));
            debug_assert!(2 * j + 1 < self.n_qubits);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Dir {
    Up,
    Right,
}

#[derive(Clone, Copy, Debug)]
struct Leg {
    from: Site,
    dir: Dir,
}

impl Leg {
    fn consumer(&self) -> Site {
        match self.dir {
            Dir::Up => Site::new(self.from.x, self.from.y + 1),
            Dir::Right => Site::new(self.from.x + 1, self.from.y),
        }
    }
}

#[derive(Clone, Debug)]
enum Planned {
    PrepCorner,
    PrepTop,
    PrepBottom,
    Route,
    Gate(Matrix),
    Swap,
}

/// Embed a brickwork circuit into an isoTNS square lattice. The reduced state
/// of the physical qudits on the returned swap sites is the circuit output on
/// `|0...0>`.
pub fn embed_brickwork(circuit: &BrickworkCircuit) -> Result<EmbeddedCircuit> {
    let n = circuit.n_qubits();
    let mut plan: BTreeMap<(usize, usize), Planned> = BTreeMap::new();
    plan.insert((0, 0), Planned::PrepCorner);
    let mut legs = vec![
        Leg { from: Site::new(0, 0), dir: Dir::Up },
        Leg { from: Site::new(0, 0), dir: Dir::Right },
    ];

    let mut pending: std::collections::VecDeque<Vec<(usize, Matrix)>> =
        circuit.layers().iter().cloned().collect();
    // drop empty layers up front; they cost nothing
    pending.retain(|l| !l.is_empty());

    let total_gates: usize = pending.iter().map(Vec::len).sum();
    let max_diag = n / 2 + 2 * total_gates + 2 * pending.len() + n + 8;

    let mut swap_sites: Vec<Site> = Vec::new();
    let mut diag = 0usize;
    while swap_sites.is_empty() {
        diag += 1;
        if diag > max_diag {
            return Err(Error::Embedding(format!(
                "layout did not terminate within {max_diag} diagonals"
            )));
        }
        let injecting = legs.len() < n;

        // group consecutive legs by consumer site
        let consumers: Vec<Site> = legs.iter().map(Leg::consumer).collect();
        let mut groups: Vec<(Site, Vec<usize>)> = Vec::new();
        for (i, &c) in consumers.iter().enumerate() {
            match groups.last_mut() {
                Some((site, positions)) if *site == c => positions.push(i),
                _ => groups.push((c, vec![i])),
            }
        }
        for w in groups.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::Embedding("non-contiguous register meeting".into()));
            }
        }

        let mut new_legs: Vec<Leg> = Vec::with_capacity(n);
        if injecting {
            // fresh top qubit enters at (0, diag)
            let site = Site::new(0, diag);
            plan.insert((site.x, site.y), Planned::PrepTop);
            new_legs.push(Leg { from: site, dir: Dir::Up });
        }

        let mut placed_here: Vec<usize> = Vec::new();
        for (site, positions) in &groups {
            match positions.as_slice() {
                [p] => {
                    let planned = if injecting && site.x == 0 {
                        // the old top track routes through the prep site
                        Planned::PrepTop
                    } else if injecting && site.y == 0 {
                        Planned::PrepBottom
                    } else {
                        Planned::Route
                    };
                    if !matches!(plan.get(&(site.x, site.y)), Some(Planned::PrepTop | Planned::PrepBottom)) {
                        plan.insert((site.x, site.y), planned);
                    }
                    match legs[*p].dir {
                        // entered from below, exits right
                        Dir::Up => new_legs.push(Leg { from: *site, dir: Dir::Right }),
                        // entered from the left, exits up
                        Dir::Right => new_legs.push(Leg { from: *site, dir: Dir::Up }),
                    }
                }
                [p, q] => {
                    debug_assert_eq!(*q, p + 1);
                    debug_assert_eq!(legs[*p].dir, Dir::Right, "upper position enters from the left");
                    debug_assert_eq!(legs[*q].dir, Dir::Up, "lower position enters from below");
                    // gates wait until the whole register is injected, since
                    // earlier diagonals still shift register positions
                    let gate = if injecting {
                        None
                    } else {
                        pending
                            .front()
                            .and_then(|layer| layer.iter().find(|(g, _)| g == p))
                            .map(|(_, u)| u.clone())
                    };
                    if let Some(u) = gate {
                        // wire positions are preserved in the rotated frame:
                        // the leg-ordered (r, u) map is SWAP * U
                        plan.insert((site.x, site.y), Planned::Gate(swap4().mul(&u)?));
                        placed_here.push(*p);
                    } else {
                        plan.insert((site.x, site.y), Planned::Route);
                    }
                    new_legs.push(Leg { from: *site, dir: Dir::Up });
                    new_legs.push(Leg { from: *site, dir: Dir::Right });
                }
                _ => return Err(Error::Embedding("more than two legs met at one site".into())),
            }
        }
        if injecting {
            let site = Site::new(diag, 0);
            plan.insert((site.x, site.y), Planned::PrepBottom);
            new_legs.push(Leg { from: site, dir: Dir::Right });
        }

        if let Some(layer) = pending.front_mut() {
            layer.retain(|(q, _)| !placed_here.contains(q));
            if layer.is_empty() {
                pending.pop_front();
            }
        }

        legs = new_legs;

        // after the last gate, the first diagonal where the pairs
        // (0,1), (2,3), ... all meet carries the swap layer
        if !injecting && pending.is_empty() {
            let meetings: Vec<(Site, usize)> = {
                let consumers: Vec<Site> = legs.iter().map(Leg::consumer).collect();
                let mut m = Vec::new();
                let mut i = 0;
                while i < consumers.len() {
                    if i + 1 < consumers.len() && consumers[i] == consumers[i + 1] {
                        m.push((consumers[i], i));
                        i += 2;
                    } else {
                        i += 1;
                    }
                }
                m
            };
            if meetings.len() == n / 2 && meetings.iter().all(|&(_, p)| p % 2 == 0) {
                for &(site, _) in &meetings {
                    plan.insert((site.x, site.y), Planned::Swap);
                    swap_sites.push(site);
                }
            }
        }
    }

    // lattice size covers every planned site; everything else is trivial
    let extent = plan.keys().map(|&(x, y)| x.max(y)).max().unwrap_or(0);
    let size = extent + 1;

    let mut sites: Vec<SiteTensor> = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let dl = if x == 0 { 1 } else { sites[y * size + (x - 1)].dr() };
            let dd = if y == 0 { 1 } else { sites[(y - 1) * size + x].du() };
            let tensor = match plan.get(&(x, y)) {
                Some(Planned::PrepCorner) => routing_site(1, 1, true, true)?,
                Some(Planned::PrepTop) => routing_site(1, dd, false, true)?,
                Some(Planned::PrepBottom) => routing_site(dl, 1, true, false)?,
                Some(Planned::Gate(m)) => {
                    debug_assert_eq!((dl, dd), (2, 2));
                    gate_tensor(m)?
                }
                Some(Planned::Swap) => general_swap_tensor(dl, dd)?,
                Some(Planned::Route) | None => routing_site(dl, dd, false, false)?,
            };
            sites.push(tensor);
        }
    }
    let lattice = IsoTnsLattice::new(size, size, sites)?;
    Ok(EmbeddedCircuit { lattice, swap_sites, n_qubits: n })
}
