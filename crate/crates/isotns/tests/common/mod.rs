//! Shared test oracles, independent of the library code paths they check.

#![allow(dead_code)]

use isotns::lattice::embed::BrickworkCircuit;
use isotns::tensor::{C64, Matrix, ONE, ZERO};

/// Direct statevector simulation of a brickwork circuit on `|0...0>`.
/// Qubit 0 is the most significant bit of the state index.
pub fn simulate_brickwork(circuit: &BrickworkCircuit) -> Vec<C64> {
    let n = circuit.n_qubits();
    let mut state = vec![ZERO; 1 << n];
    state[0] = ONE;
    for layer in circuit.layers() {
        for (q, u) in layer {
            apply_two_qubit(&mut state, n, *q, u);
        }
    }
    state
}

fn apply_two_qubit(state: &mut [C64], n: usize, q: usize, u: &Matrix) {
    let hi = n - 1 - q; // bit of qubit q
    let lo = n - 2 - q; // bit of qubit q+1
    for idx in 0..state.len() {
        // visit each 4-block once, via its 00 representative
        if (idx >> hi) & 1 != 0 || (idx >> lo) & 1 != 0 {
            continue;
        }
        let addr = |b1: usize, b2: usize| idx | (b1 << hi) | (b2 << lo);
        let old = [
            state[addr(0, 0)],
            state[addr(0, 1)],
            state[addr(1, 0)],
            state[addr(1, 1)],
        ];
        for b1 in 0..2 {
            for b2 in 0..2 {
                let row = b1 * 2 + b2;
                let mut acc = ZERO;
                for (col, &amp) in old.iter().enumerate() {
                    acc += u.get(row, col) * amp;
                }
                state[addr(b1, b2)] = acc;
            }
        }
    }
}

/// Eigenvalues of a Hermitian matrix by cyclic complex Jacobi rotations,
/// descending. A deliberately simple independent check for the SVD path.
pub fn jacobi_eigenvalues(m: &Matrix) -> Vec<f64> {
    let n = m.rows();
    assert_eq!(n, m.cols());
    let mut a: Vec<Vec<C64>> = (0..n).map(|i| (0..n).map(|j| m.get(i, j)).collect()).collect();
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(a[p][q].norm());
            }
        }
        if off < 1e-13 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p][q];
                let b = apq.norm();
                if b < 1e-300 {
                    continue;
                }
                let phase = apq / b;
                let app = a[p][p].re;
                let aqq = a[q][q].re;
                let theta = 0.5 * (2.0 * b).atan2(app - aqq);
                let (c, s) = (theta.cos(), theta.sin());
                // unitary rotation J: J[p][p] = c, J[p][q] = -s * phase,
                // J[q][p] = s * conj(phase), J[q][q] = c; apply A <- J^dag A J
                let jp = C64::new(c, 0.0);
                let jpq = -phase * s;
                let jqp = phase.conj() * s;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = akp * jp + akq * jqp;
                    a[k][q] = akp * jpq + akq * jp;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = jp.conj() * apk + jqp.conj() * aqk;
                    a[q][k] = jpq.conj() * apk + jp.conj() * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[i][i].re).collect();
    eig.sort_by(|x, y| y.total_cmp(x));
    eig
}

/// Total variation distance between two distributions on the same support.
pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len());
    p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Trace distance `(1/2) ||rho - sigma||_1` of two density matrices.
pub fn trace_distance(rho: &Matrix, sigma: &Matrix) -> f64 {
    let diff = rho.sub(sigma).expect("matching dimensions");
    let sv = isotns::tensor::singular_values(&diff).expect("finite entries");
    sv.iter().sum::<f64>() / 2.0
}

/// Hermitian observable acting as `Z` on one qubit of a multi-qubit site.
pub fn z_on_qubit(n_qubits: usize, which: usize) -> Matrix {
    let z = isotns::lattice::paulis_1q()[3].clone();
    let id = Matrix::identity(2);
    let mut out = Matrix::identity(1);
    for q in 0..n_qubits {
        out = out.kron(if q == which { &z } else { &id });
    }
    out
}
