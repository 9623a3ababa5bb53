//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! (run with `--nocapture` to see the lines for passing tests).
//!
//! Criteria are asserted exactly as stated, at their stated tolerances;
//! the suite takes a global lock so each criterion's runtime budget is
//! measured without contention from sibling tests.

mod common;

use std::collections::BTreeMap;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use isotns::channel::{depolarizing_split, injectivity_delta, QuantumChannel};
use isotns::exact::{born_distribution, expectation_exact, physical_marginal, Caps, Observable};
use isotns::lattice::embed::{embed_brickwork, BrickworkCircuit};
use isotns::lattice::{
    depolarized_restart_kraus, depolarized_unitary_kraus, maximally_injective_swap_projector,
    postselect_gate_projector, random_lattice, stinespring_site, w_kraus, w_perturbed_lattice,
    Site, StinespringKind, WLatticeUnitaries, LEGS,
};
use isotns::percolation::{cluster_survey, estimate, find_cluster, splits_for, OccupancyMap};
use isotns::rng::{random_hermitian, random_isometry, random_state, random_unitary, stream_rng};
use isotns::sampler::{rejection_curve, sample_exact_many, sample_with_resets, BondBreakMap};
use isotns::tensor::{singular_values, C64, DenseTensor, Matrix, ONE, ZERO};
use rand::Rng;

use common::{fit_slope, simulate_brickwork, trace_distance, tv_distance};

static SERIAL: Mutex<()> = Mutex::new(());

fn caps() -> Caps {
    Caps::default()
}

fn budget(name: &str, elapsed: Duration, limit: Duration) {
    println!("  runtime: {elapsed:?} (budget {limit:?})");
    assert!(elapsed < limit, "{name} exceeded its runtime budget: {elapsed:?} > {limit:?}");
}

#[test]
fn criterion_01_appendix_sigma_min_reproduction() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let ps = [0.01, 0.04, 0.25];
    for (i, seed) in (0..10).enumerate() {
        let mut rng = stream_rng(1100 + seed, 0);
        let u = random_unitary(4, &mut rng);
        for &p in &ps {
            let site = stinespring_site(&depolarized_unitary_kraus(&u, p).unwrap()).unwrap();
            let delta = injectivity_delta(&site).unwrap().delta;
            let expect = p.sqrt() / 2.0;
            assert!(
                (delta - expect).abs() < 1e-8,
                "unitary construction {i}, p = {p}: delta {delta} vs sqrt(p)/2 = {expect}"
            );
        }
    }
    // restart construction: sigma_min = sqrt(p / k^2) with k = 2 levels per
    // reset factor, evaluated symbolically from the closed form
    let k = 2.0f64;
    for &p in &ps {
        let site = stinespring_site(&depolarized_restart_kraus(p).unwrap()).unwrap();
        let delta = injectivity_delta(&site).unwrap().delta;
        let expect = (p / (k * k)).sqrt();
        assert!(
            (delta - expect).abs() < 1e-8,
            "restart construction, p = {p}: delta {delta} vs sqrt(p/k^2) = {expect}"
        );
    }
    println!("criterion 1: PASS - Stinespring sigma_min matches the closed forms");
    budget("criterion 1", start.elapsed(), Duration::from_secs(10));
}

#[test]
fn criterion_02_maximal_injectivity_saturation() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut rng = stream_rng(1200, 0);
    let u = random_unitary(4, &mut rng);
    for (name, site) in [
        ("postselect gate projector", postselect_gate_projector(&u).unwrap()),
        ("maximally injective swap projector", maximally_injective_swap_projector()),
    ] {
        let sv = singular_values(&site.peps_matrix()).unwrap();
        assert_eq!(sv.len(), 16);
        for (k, v) in sv.iter().enumerate() {
            assert!((v - 0.5).abs() < 1e-10, "{name}: singular value {k} = {v}");
        }
        let report = injectivity_delta(&site).unwrap();
        assert!((report.delta - 0.5).abs() < 1e-10, "{name}: delta = {}", report.delta);
    }
    println!("criterion 2: PASS - all sixteen singular values equal 1/2 (delta = 1/D)");
    budget("criterion 2", start.elapsed(), Duration::from_secs(1));
}

#[test]
fn criterion_03_depolarizing_split_reconstruction() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut worst_choi = 0.0f64;
    let mut worst_tp = 0.0f64;
    for seed in 0..100u64 {
        let mut rng = stream_rng(1300 + seed, 0);
        let v = random_isometry(64, 4, &mut rng);
        let t = DenseTensor::unflatten(&v, &[("p", 16), ("r", 2), ("u", 2)], &[("l", 2), ("d", 2)])
            .unwrap()
            .permuted(&LEGS)
            .unwrap();
        let site = isotns::lattice::SiteTensor::new(t, isotns::lattice::Role::Custom).unwrap();
        let report = injectivity_delta(&site).unwrap();
        assert!(report.delta > 0.0, "random d = 16 sites are injective");
        let eta = report.eta; // D^2 delta^2
        let split = depolarizing_split(&site, eta).unwrap();
        worst_choi = worst_choi.max(split.reconstruction_error());
        let mut sum = Matrix::zeros(4, 4);
        for kr in split.e1.kraus() {
            sum = sum.add(&kr.adjoint().mul(kr).unwrap()).unwrap();
        }
        let target = Matrix::identity(4).scale(C64::new(1.0 - eta, 0.0));
        worst_tp = worst_tp.max(sum.max_abs_diff(&target));
    }
    assert!(worst_choi < 1e-9, "worst Choi reconstruction error {worst_choi}");
    assert!(worst_tp < 1e-9, "worst trace-preservation deviation {worst_tp}");
    println!(
        "criterion 3: PASS - 100 splits at eta = D^2 delta^2, worst Choi error {worst_choi:.2e}, worst trace deviation {worst_tp:.2e}"
    );
    budget("criterion 3", start.elapsed(), Duration::from_secs(60));
}

fn bell_gate() -> Matrix {
    let h = Matrix::from_real(2, 2, &[1.0, 1.0, 1.0, -1.0])
        .unwrap()
        .scale(C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0));
    let h1 = h.kron(&Matrix::identity(2));
    let mut cnot = Matrix::zeros(4, 4);
    cnot.set(0, 0, ONE);
    cnot.set(1, 1, ONE);
    cnot.set(2, 3, ONE);
    cnot.set(3, 2, ONE);
    cnot.mul(&h1).unwrap()
}

fn brickwork_4q_depth3(seed: u64) -> BrickworkCircuit {
    let mut rng = stream_rng(seed, 0);
    let layers = vec![
        vec![(0, random_unitary(4, &mut rng)), (2, random_unitary(4, &mut rng))],
        vec![(1, random_unitary(4, &mut rng))],
        vec![(0, random_unitary(4, &mut rng)), (2, random_unitary(4, &mut rng))],
    ];
    BrickworkCircuit::new(4, layers).unwrap()
}

#[test]
fn criterion_04_embedding_correctness() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut circuits = vec![BrickworkCircuit::new(2, vec![vec![(0, bell_gate())]]).unwrap()];
    circuits.extend((0..5).map(|i| brickwork_4q_depth3(1400 + i)));
    let mut worst = 0.0f64;
    for (i, circuit) in circuits.iter().enumerate() {
        let embedded = embed_brickwork(circuit).unwrap();
        let marginal = physical_marginal(&embedded.lattice, &embedded.swap_sites, &caps()).unwrap();
        let state = simulate_brickwork(circuit);
        let oracle = Matrix::from_fn(state.len(), state.len(), |a, b| state[a] * state[b].conj());
        let dist = trace_distance(&marginal, &oracle);
        assert!(dist < 1e-10, "circuit {i}: trace distance {dist}");
        worst = worst.max(dist);
    }
    println!(
        "criterion 4: PASS - Bell + 5 random depth-3 embeddings, worst trace distance {worst:.2e}"
    );
    budget("criterion 4", start.elapsed(), Duration::from_secs(30));
}

#[test]
fn criterion_05_percolation_unbiasedness_exhaustive() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let lattice = isotns::lattice::stinespring_lattice(3, 3, StinespringKind::Unitary, 0.6, 1500)
        .unwrap();
    let obs_site = Site::new(2, 2);
    let mut rng = stream_rng(1501, 0);
    let obs = Observable::new(obs_site, random_hermitian(16, &mut rng)).unwrap();
    let eta = 0.4;
    let splits = splits_for(&lattice, obs_site, eta).unwrap();
    let exact = expectation_exact(&lattice, &obs, &caps()).unwrap();
    let mut total = 0.0;
    for mask in 0..(1u32 << 9) {
        let occupied: Vec<bool> = (0..9).map(|b| mask >> b & 1 == 1).collect();
        let prob: f64 = occupied.iter().map(|&o| if o { 1.0 - eta } else { eta }).product();
        let map = OccupancyMap::from_grid(3, 3, occupied, 0).unwrap();
        let cluster = find_cluster(&map, obs_site);
        total += prob * isotns::percolation::contract_cluster(&lattice, &splits, &cluster, &obs, &caps()).unwrap();
    }
    let dev = (total - exact).abs();
    assert!(dev < 1e-8, "pattern sum {total} vs exact {exact} (deviation {dev})");
    println!("criterion 5: PASS - 512-pattern sum matches the exact value within {dev:.2e}");
    budget("criterion 5", start.elapsed(), Duration::from_secs(300));
}

#[test]
fn criterion_06_percolation_monte_carlo() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let lattice = isotns::lattice::stinespring_lattice(4, 4, StinespringKind::Unitary, 0.6, 606)
        .unwrap();
    let mut rng = stream_rng(607, 0);
    let obs = Observable::new(Site::new(3, 3), random_hermitian(16, &mut rng)).unwrap();
    let exact = expectation_exact(&lattice, &obs, &caps()).unwrap();
    let norm = obs.spectral_norm();

    let unlimited = estimate(&lattice, &obs, 0.5, None, 100_000, 1, &caps()).unwrap();
    let dev = (unlimited.mean - exact).abs();
    assert!(
        dev < 3.0 * unlimited.standard_error,
        "unlimited: |{} - {exact}| = {dev} vs 3 sigma = {}",
        unlimited.mean,
        3.0 * unlimited.standard_error
    );

    let cut = estimate(&lattice, &obs, 0.5, Some(12), 100_000, 2, &caps()).unwrap();
    let bias = (cut.mean - exact).abs();
    let allowance = 3.0 * cut.standard_error + 0.02 * norm;
    assert!(
        bias < allowance,
        "s_th = 12: |{} - {exact}| = {bias} vs allowance {allowance}",
        cut.mean
    );
    println!(
        "criterion 6: PASS - unlimited dev {:.2}sigma; s_th=12 bias {bias:.2e} < {:.2e} ({} size rejections)",
        dev / unlimited.standard_error,
        allowance,
        cut.n_rejected_size
    );
    budget("criterion 6", start.elapsed(), Duration::from_secs(600));
}

#[test]
fn criterion_07a_subcritical_tail_slope() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let rows = cluster_survey(32, 32, &[0.45], 100_000, 7).unwrap();
    let points: Vec<(f64, f64)> = rows[0]
        .survival()
        .into_iter()
        .filter(|&(s, p)| (5..=25).contains(&s) && p > 0.0)
        .map(|(s, p)| (s as f64, p.ln()))
        .collect();
    let slope = fit_slope(&points);
    println!(
        "criterion 7a: measured log-survival slope {slope:.4} over s in [5, 25] at eta = 0.45 \
         (mean cluster size {:.1})",
        rows[0].mean_cluster_size
    );
    // At eta = 0.45 the occupied fraction is 0.55, just below the site
    // percolation threshold 0.5927; the measured tail over this window is
    // exponential only with rate about 0.04. The stated -0.05 bound is not
    // attainable for honest sampling at these parameters; the assertion is
    // kept as written.
    assert!(
        slope < -0.05,
        "criterion 7a: FAIL - fitted slope {slope:.4} does not reach the stated -0.05; \
         occupancy 1 - eta = 0.55 sits too close to the percolation threshold 0.5927 \
         for the [5, 25] window to decay that fast on a 32x32 lattice"
    );
    println!("criterion 7a: PASS - slope {slope:.4} < -0.05");
}

#[test]
fn criterion_07b_supercritical_boundary_fraction() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let rows = cluster_survey(32, 32, &[0.30], 20_000, 7).unwrap();
    let fraction = rows[0].boundary_fraction;
    assert!(fraction > 0.5, "boundary-touching fraction {fraction} at eta = 0.30");
    println!("criterion 7b: PASS - boundary-touching fraction {fraction:.3} > 0.5 at eta = 0.30");
}

#[test]
fn criterion_08_w_isometry_reset_statistics() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let deltas = [0.3, 0.5, 0.7 * std::f64::consts::FRAC_1_SQRT_2];
    let n = 10_000u64;
    let mut stream = 0u64;
    for (di, &delta) in deltas.iter().enumerate() {
        let ks = w_kraus(delta).unwrap();
        let mut rng_state = stream_rng(1800, 99 + di as u64);
        let states: [Vec<C64>; 3] = [
            vec![ONE, ZERO],
            vec![
                C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
                C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
            ],
            random_state(2, &mut rng_state),
        ];
        for (si, state) in states.iter().enumerate() {
            let probs: Vec<f64> = ks
                .iter()
                .map(|k| k.mul_vec(state).unwrap().iter().map(|z| z.norm_sqr()).sum())
                .collect();
            let mut rng = stream_rng(1801, stream);
            stream += 1;
            let mut unequal = 0u64;
            for _ in 0..n {
                let x: f64 = rng.gen();
                let mut acc = 0.0;
                let mut outcome = 3;
                for (o, &p) in probs.iter().enumerate() {
                    acc += p;
                    if x < acc {
                        outcome = o;
                        break;
                    }
                }
                if outcome == 1 || outcome == 2 {
                    unequal += 1;
                }
            }
            let rate = unequal as f64 / n as f64;
            let expect = delta * delta;
            let sigma = (expect * (1.0 - expect) / n as f64).sqrt();
            assert!(
                (rate - expect).abs() < 3.0 * sigma,
                "delta {delta}, state {si}: rate {rate} vs delta^2 {expect} (sigma {sigma})"
            );
        }
    }
    println!(
        "criterion 8: PASS - unequal-outcome rates within 3 sigma of delta^2 for 3 states and 3 deltas"
    );
}

#[test]
fn criterion_09_sampler_fidelity() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let n = 100_000u64;

    // 2x2 random lattice against its Born distribution
    let l = random_lattice(2, 2, 4, 2, 909).unwrap();
    let dist = born_distribution(&l, &caps()).unwrap();
    let dims: Vec<usize> = dist.site_dims.iter().map(|&(_, d)| d).collect();
    let mut counts = vec![0u64; dist.probabilities.len()];
    for rec in sample_exact_many(&l, 910, n, &caps()).unwrap() {
        counts[rec.outcome_index(&dims)] += 1;
    }
    let empirical: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
    let tv_2x2 = tv_distance(&empirical, &dist.probabilities);
    assert!(tv_2x2 < 0.02, "2x2 TV distance {tv_2x2}");

    // 3x3 Bell-embedded lattice
    let embedded = embed_brickwork(&BrickworkCircuit::new(2, vec![vec![(0, bell_gate())]]).unwrap())
        .unwrap();
    assert_eq!(embedded.lattice.nx(), 3);
    let dist = born_distribution(&embedded.lattice, &caps()).unwrap();
    let dims: Vec<usize> = dist.site_dims.iter().map(|&(_, d)| d).collect();
    let mut counts = vec![0u64; dist.probabilities.len()];
    for rec in sample_exact_many(&embedded.lattice, 911, n, &caps()).unwrap() {
        counts[rec.outcome_index(&dims)] += 1;
    }
    let empirical: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
    let tv_3x3 = tv_distance(&empirical, &dist.probabilities);
    assert!(tv_3x3 < 0.02, "3x3 TV distance {tv_3x3}");

    // reset-accelerated sampler conditioned on acceptance vs. the exactly
    // conditioned Born distribution
    let w = w_perturbed_lattice(2, 2, std::f64::consts::FRAC_1_SQRT_2, WLatticeUnitaries::Identity)
        .unwrap();
    let s_th = 2usize;
    let dist = born_distribution(&w, &caps()).unwrap();
    let dims: Vec<usize> = dist.site_dims.iter().map(|&(_, d)| d).collect();
    let mut conditioned = vec![0.0f64; dist.probabilities.len()];
    let mut norm = 0.0;
    for (idx, &p) in dist.probabilities.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        let mut rem = idx;
        let mut outcomes = vec![0usize; dims.len()];
        for (k, &d) in dims.iter().enumerate().rev() {
            outcomes[k] = rem % d;
            rem /= d;
        }
        let breaks = BondBreakMap::from_outcomes(&w, &outcomes).unwrap();
        if breaks.max_component() <= s_th {
            conditioned[idx] = p;
            norm += p;
        }
    }
    assert!(norm > 0.0);
    for p in conditioned.iter_mut() {
        *p /= norm;
    }
    let mut counts = vec![0u64; conditioned.len()];
    let mut accepted = 0u64;
    for stream in 0..n {
        let sample = sample_with_resets(&w, Some(s_th), 912, stream, &caps()).unwrap();
        if sample.is_accepted() {
            counts[sample.record().outcome_index(&dims)] += 1;
            accepted += 1;
        }
    }
    let empirical: Vec<f64> = counts.iter().map(|&c| c as f64 / accepted as f64).collect();
    let tv_reset = tv_distance(&empirical, &conditioned);
    assert!(tv_reset < 0.03, "conditioned reset-sampler TV distance {tv_reset}");

    println!(
        "criterion 9: PASS - TV 2x2 {tv_2x2:.4}, 3x3 {tv_3x3:.4}, conditioned reset {tv_reset:.4} \
         (acceptance {:.2})",
        accepted as f64 / n as f64
    );
}

#[test]
fn criterion_10a_mipt_hard_phase_rejection() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let s_th = (4.0 * 64f64.ln()).floor() as usize; // 4 log N, N = 64 sites
    let delta = 0.1f64.sqrt(); // delta^2 = 0.1
    let rows = rejection_curve(
        8,
        8,
        WLatticeUnitaries::Random { seed: 11 },
        &[delta],
        s_th,
        500,
        13,
        &caps(),
    )
    .unwrap();
    let fraction = rows[0].rejection_fraction;
    assert!(fraction > 0.9, "rejection fraction {fraction} at delta^2 = 0.1");
    println!(
        "criterion 10a: PASS - rejection fraction {fraction:.3} > 0.9 at delta^2 = 0.1 (s_th = {s_th})"
    );
}

#[test]
fn criterion_10b_mipt_easy_phase_rejection() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let s_th = (4.0 * 64f64.ln()).floor() as usize;
    // The criterion asks for delta^2 = 0.7. The monitored W isometry only
    // exists for delta^2 <= 1/2 (the jump operators require
    // sqrt(1/2 - delta^2)), so the requested point cannot be built; measure
    // the family's extreme point for the record, then assert the criterion
    // as stated.
    let extreme = rejection_curve(
        8,
        8,
        WLatticeUnitaries::Random { seed: 11 },
        &[std::f64::consts::FRAC_1_SQRT_2],
        s_th,
        500,
        13,
        &caps(),
    )
    .unwrap();
    println!(
        "criterion 10b: at the family's maximum delta^2 = 0.5 the rejection fraction is {:.3}",
        extreme[0].rejection_fraction
    );
    let delta = 0.7f64.sqrt(); // delta^2 = 0.7, outside the W family
    let requested = rejection_curve(
        8,
        8,
        WLatticeUnitaries::Random { seed: 11 },
        &[delta],
        s_th,
        500,
        13,
        &caps(),
    );
    match requested {
        Ok(rows) => {
            let fraction = rows[0].rejection_fraction;
            assert!(
                fraction < 0.1,
                "criterion 10b: FAIL - rejection fraction {fraction} at delta^2 = 0.7"
            );
            println!("criterion 10b: PASS - rejection fraction {fraction:.3} < 0.1");
        }
        Err(e) => {
            panic!(
                "criterion 10b: FAIL - delta^2 = 0.7 is not constructible in the W family \
                 (delta^2 <= 1/2 is required; bond resets occur with probability delta^2, so the \
                 severed-bond fraction can never exceed 1/2, the square-lattice bond percolation \
                 threshold, and at the extreme delta^2 = 0.5 the measured rejection fraction is \
                 {:.3}, far above 0.1): {e}",
                extreme[0].rejection_fraction
            );
        }
    }
}

#[test]
fn criterion_11_determinism_across_thread_counts() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let lattice = isotns::lattice::stinespring_lattice(3, 3, StinespringKind::Unitary, 0.6, 1500)
        .unwrap();
    let mut rng = stream_rng(1501, 0);
    let obs = Observable::new(Site::new(2, 2), random_hermitian(16, &mut rng)).unwrap();

    let run_estimate = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            serde_json::to_string(&estimate(&lattice, &obs, 0.4, Some(6), 5_000, 77, &caps()).unwrap())
                .unwrap()
        })
    };
    let one = run_estimate(1);
    let four = run_estimate(4);
    assert_eq!(one.as_bytes(), four.as_bytes(), "estimate output depends on thread count");

    let run_survey = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            serde_json::to_string(&cluster_survey(16, 16, &[0.4, 0.6], 3_000, 5).unwrap()).unwrap()
        })
    };
    assert_eq!(run_survey(1).as_bytes(), run_survey(3).as_bytes());

    let w = w_perturbed_lattice(4, 4, 0.5, WLatticeUnitaries::Random { seed: 3 }).unwrap();
    let run_curve = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            serde_json::to_string(
                &rejection_curve(4, 4, WLatticeUnitaries::Random { seed: 3 }, &[0.4], 5, 500, 21, &caps())
                    .unwrap(),
            )
            .unwrap()
        })
    };
    assert_eq!(run_curve(1).as_bytes(), run_curve(4).as_bytes());

    let run_samples = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            sample_exact_many(&w, 9, 300, &caps())
                .unwrap()
                .iter()
                .map(|r| r.outcome_string())
                .collect::<Vec<_>>()
                .join("\n")
        })
    };
    assert_eq!(run_samples(2), run_samples(1));

    println!("criterion 11: PASS - byte-identical outputs with 1 vs several worker threads");
}

/// Not a numbered criterion: cross-check that the channel built from an
/// isometry and the statevector agree on the observable used in criterion 6,
/// guarding the exact reference value itself.
#[test]
fn exact_reference_cross_check() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let lattice = isotns::lattice::stinespring_lattice(2, 2, StinespringKind::Unitary, 0.6, 606)
        .unwrap();
    let mut rng = stream_rng(607, 0);
    let obs = Observable::new(Site::new(1, 1), random_hermitian(16, &mut rng)).unwrap();
    let via_channels = expectation_exact(&lattice, &obs, &caps()).unwrap();
    let sv = isotns::exact::full_state(&lattice, &caps()).unwrap();
    let via_state = sv.expectation(&obs).unwrap();
    assert!((via_channels - via_state).abs() < 1e-8);

    // and the trivially flagged channel: QuantumChannel rejects scaled sums
    let bad = QuantumChannel::new(vec![Matrix::identity(2).scale(C64::new(0.5, 0.0))], 1.0);
    assert!(bad.is_err());
    let _ = BTreeMap::<Site, ()>::new();
}
