// index loops read better than iterator chains in dense-matrix kernels
#![allow(clippy::needless_range_loop, clippy::too_many_arguments)]

//! Isometric tensor network states (isoTNS) on 2D square lattices, viewed as
//! 1+1D circuits of quantum channels acting on a chain of ancillas.
//!
//! The crate provides:
//!
//! - dense complex tensors with labeled legs and the usual contraction /
//!   flattening / SVD toolbox ([`tensor`]);
//! - CPTP channels built from site isometries, injectivity analysis and the
//!   depolarizing decomposition of injective site channels ([`channel`]);
//! - the site-tensor zoo (gate / swap / identity tensors, Stinespring
//!   dilations of depolarized channels, monitored `W` isometries,
//!   postselection tensors) and brickwork-circuit embedding ([`lattice`]);
//! - brute-force oracles: full statevector, exact local expectation values by
//!   ancilla channel evolution, Born distributions and postselection
//!   ([`exact`]);
//! - a percolation Monte Carlo estimator for local observables in injective
//!   lattices ([`percolation`]);
//! - Born-rule sampling by monitored ancilla evolution, including the
//!   reset-accelerated sampler for `W`-perturbed lattices ([`sampler`]).
//!
//! ```
//! use isotns::exact::{expectation_exact, Caps, Observable};
//! use isotns::lattice::embed::{embed_brickwork, BrickworkCircuit};
//! use isotns::lattice::paulis_1q;
//! use isotns::tensor::{C64, Matrix, ONE};
//!
//! // CNOT * (H (x) 1) prepares a Bell pair from |00>
//! let s = std::f64::consts::FRAC_1_SQRT_2;
//! let h1 = Matrix::from_real(2, 2, &[1.0, 1.0, 1.0, -1.0])?
//!     .scale(C64::new(s, 0.0))
//!     .kron(&Matrix::identity(2));
//! let mut cnot = Matrix::zeros(4, 4);
//! for (i, j) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
//!     cnot.set(i, j, ONE);
//! }
//! let circuit = BrickworkCircuit::new(2, vec![vec![(0, cnot.mul(&h1)?)]])?;
//!
//! // embed into a lattice; the swap site holds the circuit output
//! let embedded = embed_brickwork(&circuit)?;
//! let swap = embedded.swap_sites[0];
//! let zz = paulis_1q()[3].kron(&paulis_1q()[3]);
//! let value = expectation_exact(
//!     &embedded.lattice,
//!     &Observable::new(swap, zz)?,
//!     &Caps::default(),
//! )?;
//! assert!((value - 1.0).abs() < 1e-10);
//! # Ok::<(), isotns::Error>(())
//! ```

pub mod channel;
pub mod error;
pub mod exact;
pub mod lattice;
pub(crate) mod frontier;
pub mod percolation;
pub mod rng;
pub mod sampler;
pub mod tensor;

pub use error::{Error, Result};
