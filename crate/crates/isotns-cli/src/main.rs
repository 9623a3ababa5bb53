//! Experiment runner for the isotns library.
//!
//! Subcommands: `verify`, `expect`, `sample`, `scan`, `embed`. Every run is
//! driven by a versioned JSON config plus a mandatory seed; outputs are CSV
//! tables or JSON reports and are byte-identical for identical configs,
//! independent of `--threads`.
//!
//! Exit codes: 0 success, 2 config error, 3 invariant failure, 4 cap
//! exceeded.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Deserialize;

use isotns::channel::{depolarizing_split, injectivity_delta};
use isotns::error::Error as LibError;
use isotns::exact::{expectation_exact, Caps, Observable};
use isotns::lattice::embed::{embed_brickwork, BrickworkCircuit, CircuitRecord};
use isotns::lattice::{
    identity_lattice, postselect_lattice, random_lattice, stinespring_lattice,
    w_perturbed_lattice, IsoTnsLattice, Site, StinespringKind, WLatticeUnitaries,
};
use isotns::percolation::{cluster_survey, estimate};
use isotns::rng::{random_hermitian, stream_rng};
use isotns::sampler::{rejection_curve, sample_exact, sample_with_resets};
use isotns::tensor::{check_isometry, Matrix};

#[derive(Parser)]
#[command(name = "isotns", about = "isoTNS experiment runner", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Path to the JSON experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the config's root seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Also compute the exact value where supported.
    #[arg(long, global = true)]
    exact: bool,
    /// Size of the worker pool (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Isometry, injectivity and split-reconstruction report for a lattice.
    Verify,
    /// Percolation Monte Carlo estimate of a local observable.
    Expect,
    /// Draw Born-rule samples (reset-accelerated when s_th is set).
    Sample,
    /// Sweep eta or delta grids.
    Scan,
    /// Embed a brickwork circuit and emit the lattice serialization.
    Embed,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Config {
    version: u32,
    #[serde(default)]
    lattice: Option<LatticeSpec>,
    #[serde(default)]
    observable: Option<ObservableSpec>,
    #[serde(default)]
    eta: Option<f64>,
    #[serde(default)]
    s_th: Option<usize>,
    #[serde(default)]
    n_samples: Option<u64>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    etas: Option<Vec<f64>>,
    #[serde(default)]
    deltas: Option<Vec<f64>>,
    /// Scan flavour: "estimate" (eta grid of Monte Carlo runs),
    /// "survey" (pure percolation statistics), "rejection" (delta grid).
    #[serde(default)]
    scan: Option<String>,
    #[serde(default)]
    circuit_file: Option<String>,
    #[serde(default)]
    max_statevector: Option<usize>,
    #[serde(default)]
    max_frontier: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LatticeSpec {
    dims: [usize; 2],
    family: FamilySpec,
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum FamilySpec {
    Identity,
    Random { d: usize, bond: usize, seed: u64 },
    StinespringUnitary { p: f64, seed: u64 },
    StinespringRestart { p: f64 },
    Postselect { seed: u64 },
    WPerturbed { delta: f64, unitary_seed: Option<u64> },
    Circuit { path: String },
}

#[derive(Deserialize)]
struct ObservableSpec {
    site: [usize; 2],
    #[serde(flatten)]
    kind: ObservableKind,
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ObservableKind {
    Identity,
    /// Pauli Z on one qubit of a power-of-two site.
    Z { qubit: usize },
    /// Z (x) Z on a two-qubit (d = 4) site.
    Zz,
    Random { obs_seed: u64 },
}

enum CliError {
    Config(String),
    Lib(LibError),
    Io(std::io::Error),
}

impl From<LibError> for CliError {
    fn from(e: LibError) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

fn exit_code(e: &CliError) -> u8 {
    match e {
        CliError::Config(_) | CliError::Io(_) => 2,
        CliError::Lib(LibError::CapExceeded(_)) => 4,
        CliError::Lib(LibError::InvalidParameter(_)) | CliError::Lib(LibError::Geometry(_)) => 2,
        CliError::Lib(_) => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(output) => {
            match &cli.out {
                Some(path) => {
                    if let Err(e) = std::fs::write(path, output) {
                        eprintln!("error: failed to write {}: {e}", path.display());
                        return ExitCode::from(2);
                    }
                }
                None => print!("{output}"),
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: &Cli) -> Result<String, CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config PATH is required".into()))?;
    let raw = std::fs::read_to_string(path)?;
    let config: Config =
        serde_json::from_str(&raw).map_err(|e| CliError::Config(e.to_string()))?;
    if config.version != 1 {
        return Err(CliError::Config(format!("unsupported config version {}", config.version)));
    }
    match cli.command {
        Command::Verify => run_verify(&config),
        Command::Expect => run_expect(cli, &config),
        Command::Sample => run_sample(cli, &config),
        Command::Scan => run_scan(cli, &config),
        Command::Embed => run_embed(&config),
    }
}

fn caps(config: &Config) -> Caps {
    let mut caps = Caps::default();
    if let Some(c) = config.max_statevector {
        caps.max_statevector = c;
    }
    if let Some(c) = config.max_frontier {
        caps.max_frontier = c;
    }
    caps
}

fn seed_of(cli: &Cli, config: &Config) -> Result<u64, CliError> {
    cli.seed
        .or(config.seed)
        .ok_or_else(|| CliError::Config("a seed is mandatory (config `seed` or --seed)".into()))
}

fn build_lattice(spec: &LatticeSpec) -> Result<(IsoTnsLattice, Option<Vec<Site>>), CliError> {
    let [nx, ny] = spec.dims;
    if nx == 0 || ny == 0 {
        return Err(CliError::Config("lattice dims must be positive".into()));
    }
    let lattice = match &spec.family {
        FamilySpec::Identity => identity_lattice(nx, ny),
        FamilySpec::Random { d, bond, seed } => random_lattice(nx, ny, *d, *bond, *seed)?,
        FamilySpec::StinespringUnitary { p, seed } => {
            stinespring_lattice(nx, ny, StinespringKind::Unitary, *p, *seed)?
        }
        FamilySpec::StinespringRestart { p } => {
            stinespring_lattice(nx, ny, StinespringKind::Restart, *p, 0)?
        }
        FamilySpec::Postselect { seed } => postselect_lattice(nx, ny, *seed)?,
        FamilySpec::WPerturbed { delta, unitary_seed } => {
            let unitaries = match unitary_seed {
                Some(seed) => WLatticeUnitaries::Random { seed: *seed },
                None => WLatticeUnitaries::Identity,
            };
            w_perturbed_lattice(nx, ny, *delta, unitaries)?
        }
        FamilySpec::Circuit { path } => {
            let raw = std::fs::read_to_string(path)?;
            let record: CircuitRecord =
                serde_json::from_str(&raw).map_err(|e| CliError::Config(e.to_string()))?;
            let circuit = BrickworkCircuit::from_record(&record)?;
            let embedded = embed_brickwork(&circuit)?;
            return Ok((embedded.lattice, Some(embedded.swap_sites)));
        }
    };
    Ok((lattice, None))
}

fn build_observable(
    lattice: &IsoTnsLattice,
    spec: &ObservableSpec,
) -> Result<Observable, CliError> {
    let site = Site::new(spec.site[0], spec.site[1]);
    if !lattice.contains(site) {
        return Err(CliError::Config(format!("observable site {site} outside the lattice")));
    }
    let d = lattice.site(site).d();
    let matrix = match &spec.kind {
        ObservableKind::Identity => Matrix::identity(d),
        ObservableKind::Z { qubit } => {
            let n_qubits = d.trailing_zeros() as usize;
            if !d.is_power_of_two() || *qubit >= n_qubits {
                return Err(CliError::Config(format!(
                    "z observable needs a power-of-two site with qubit < {n_qubits}"
                )));
            }
            let z = isotns::lattice::paulis_1q()[3].clone();
            let id = Matrix::identity(2);
            let mut m = Matrix::identity(1);
            for q in 0..n_qubits {
                m = m.kron(if q == *qubit { &z } else { &id });
            }
            m
        }
        ObservableKind::Zz => {
            if d != 4 {
                return Err(CliError::Config("zz observable needs a d = 4 site".into()));
            }
            let z = isotns::lattice::paulis_1q()[3].clone();
            z.kron(&isotns::lattice::paulis_1q()[3])
        }
        ObservableKind::Random { obs_seed } => {
            let mut rng = stream_rng(*obs_seed, 0);
            random_hermitian(d, &mut rng)
        }
    };
    Ok(Observable::new(site, matrix)?)
}

fn require_lattice(config: &Config) -> Result<&LatticeSpec, CliError> {
    config.lattice.as_ref().ok_or_else(|| CliError::Config("missing `lattice` section".into()))
}

fn run_verify(config: &Config) -> Result<String, CliError> {
    let (lattice, _) = build_lattice(require_lattice(config)?)?;
    let mut sites = Vec::new();
    let mut failures = 0usize;
    for site in lattice.scan_order() {
        let tensor = lattice.site(site);
        let iso = check_isometry(&tensor.isometry_matrix(), 1e-10)?;
        let report = injectivity_delta(tensor)?;
        let mut entry = serde_json::json!({
            "site": [site.x, site.y],
            "isometry_deviation": iso.max_deviation,
            "isometry_ok": iso.is_isometry,
        });
        for (key, value) in report.to_json().as_object().unwrap() {
            entry[key] = value.clone();
        }
        if !iso.is_isometry {
            failures += 1;
        }
        if report.delta > 0.0 {
            let target = config.eta.unwrap_or(report.eta).min(report.eta);
            let split = depolarizing_split(tensor, target)?;
            let err = split.reconstruction_error();
            entry["split_eta"] = serde_json::json!(target);
            entry["split_reconstruction_error"] = serde_json::json!(err);
            if err > 1e-9 {
                failures += 1;
            }
        }
        sites.push(entry);
    }
    let report = serde_json::json!({
        "version": 1,
        "nx": lattice.nx(),
        "ny": lattice.ny(),
        "open_boundary": lattice.is_open(),
        "invariant_failures": failures,
        "sites": sites,
    });
    let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    if failures > 0 {
        // emit the report on stderr so the failure is inspectable, then
        // surface it through the exit code
        eprint!("{text}");
        return Err(CliError::Lib(LibError::NotIsometry(format!(
            "{failures} invariant failure(s), see report"
        ))));
    }
    Ok(text)
}

fn run_expect(cli: &Cli, config: &Config) -> Result<String, CliError> {
    let (lattice, _) = build_lattice(require_lattice(config)?)?;
    let obs_spec = config
        .observable
        .as_ref()
        .ok_or_else(|| CliError::Config("missing `observable` section".into()))?;
    let obs = build_observable(&lattice, obs_spec)?;
    let caps = caps(config);
    let want_exact = cli.exact || config.eta.is_none();

    let exact = if want_exact { Some(expectation_exact(&lattice, &obs, &caps)?) } else { None };

    let mut out = String::new();
    match config.eta {
        Some(eta) => {
            let seed = seed_of(cli, config)?;
            let n =
                config.n_samples.ok_or_else(|| CliError::Config("missing `n_samples`".into()))?;
            let result = estimate(&lattice, &obs, eta, config.s_th, n, seed, &caps)?;
            let max_cluster = result.cluster_size_histogram.keys().max().copied().unwrap_or(0);
            if let Some(exact) = exact {
                out.push_str(
                    "eta,mean,stderr,n_accepted,n_rejected_size,n_rejected_frontier,max_cluster,exact,abs_diff\n",
                );
                writeln!(
                    out,
                    "{eta},{},{},{},{},{},{max_cluster},{exact},{}",
                    result.mean,
                    result.standard_error,
                    result.n_accepted,
                    result.n_rejected_size,
                    result.n_rejected_frontier,
                    (result.mean - exact).abs()
                )
                .unwrap();
            } else {
                out.push_str(
                    "eta,mean,stderr,n_accepted,n_rejected_size,n_rejected_frontier,max_cluster\n",
                );
                writeln!(
                    out,
                    "{eta},{},{},{},{},{},{max_cluster}",
                    result.mean,
                    result.standard_error,
                    result.n_accepted,
                    result.n_rejected_size,
                    result.n_rejected_frontier,
                )
                .unwrap();
            }
        }
        None => {
            // no eta given: exact evaluation only
            out.push_str("exact\n");
            writeln!(out, "{}", exact.expect("exact computed")).unwrap();
        }
    }
    Ok(out)
}

fn run_sample(cli: &Cli, config: &Config) -> Result<String, CliError> {
    let (lattice, _) = build_lattice(require_lattice(config)?)?;
    let seed = seed_of(cli, config)?;
    let n = config.n_samples.ok_or_else(|| CliError::Config("missing `n_samples`".into()))?;
    let caps = caps(config);
    let mut out = String::new();
    out.push_str("outcome,log_probability,n_resets,accepted\n");
    for stream in 0..n {
        let (record, accepted) = match config.s_th {
            Some(s_th) => {
                let s = sample_with_resets(&lattice, Some(s_th), seed, stream, &caps)?;
                (s.record().clone(), s.is_accepted())
            }
            None => (sample_exact(&lattice, seed, stream, &caps)?, true),
        };
        writeln!(
            out,
            "{},{},{},{}",
            record.outcome_string(),
            record.log_probability(),
            record.reset_events.len(),
            accepted
        )
        .unwrap();
    }
    Ok(out)
}

fn run_scan(cli: &Cli, config: &Config) -> Result<String, CliError> {
    let seed = seed_of(cli, config)?;
    let caps = caps(config);
    let kind = config.scan.as_deref().unwrap_or("estimate");
    let mut out = String::new();
    match kind {
        "estimate" => {
            let (lattice, _) = build_lattice(require_lattice(config)?)?;
            let obs_spec = config
                .observable
                .as_ref()
                .ok_or_else(|| CliError::Config("missing `observable` section".into()))?;
            let obs = build_observable(&lattice, obs_spec)?;
            let etas =
                config.etas.as_ref().ok_or_else(|| CliError::Config("missing `etas` grid".into()))?;
            let n =
                config.n_samples.ok_or_else(|| CliError::Config("missing `n_samples`".into()))?;
            out.push_str(
                "eta,mean,stderr,n_accepted,n_rejected_size,n_rejected_frontier,max_cluster\n",
            );
            let mut histograms = BTreeMap::new();
            for (i, &eta) in etas.iter().enumerate() {
                let result = estimate(
                    &lattice,
                    &obs,
                    eta,
                    config.s_th,
                    n,
                    seed.wrapping_add(i as u64),
                    &caps,
                )?;
                let max_cluster = result.cluster_size_histogram.keys().max().copied().unwrap_or(0);
                writeln!(
                    out,
                    "{eta},{},{},{},{},{},{max_cluster}",
                    result.mean,
                    result.standard_error,
                    result.n_accepted,
                    result.n_rejected_size,
                    result.n_rejected_frontier,
                )
                .unwrap();
                histograms.insert(format!("{eta}"), result.cluster_size_histogram);
            }
            out.push_str("# histogram ");
            out.push_str(&serde_json::to_string(&histograms).expect("histograms serialize"));
            out.push('\n');
        }
        "survey" => {
            let spec = require_lattice(config)?;
            let etas =
                config.etas.as_ref().ok_or_else(|| CliError::Config("missing `etas` grid".into()))?;
            let n =
                config.n_samples.ok_or_else(|| CliError::Config("missing `n_samples`".into()))?;
            let rows = cluster_survey(spec.dims[0], spec.dims[1], etas, n, seed)?;
            out.push_str("eta,mean_cluster_size,boundary_fraction\n");
            for row in &rows {
                writeln!(out, "{},{},{}", row.eta, row.mean_cluster_size, row.boundary_fraction)
                    .unwrap();
            }
            let histograms: BTreeMap<String, _> =
                rows.iter().map(|r| (format!("{}", r.eta), &r.histogram)).collect();
            out.push_str("# histogram ");
            out.push_str(&serde_json::to_string(&histograms).expect("histograms serialize"));
            out.push('\n');
        }
        "rejection" => {
            let spec = require_lattice(config)?;
            let deltas = config
                .deltas
                .as_ref()
                .ok_or_else(|| CliError::Config("missing `deltas` grid".into()))?;
            let n =
                config.n_samples.ok_or_else(|| CliError::Config("missing `n_samples`".into()))?;
            let s_th = config
                .s_th
                .ok_or_else(|| CliError::Config("missing `s_th` for a rejection scan".into()))?;
            let unitaries = match &spec.family {
                FamilySpec::WPerturbed { unitary_seed: Some(s), .. } => {
                    WLatticeUnitaries::Random { seed: *s }
                }
                _ => WLatticeUnitaries::Identity,
            };
            let rows = rejection_curve(
                spec.dims[0],
                spec.dims[1],
                unitaries,
                deltas,
                s_th,
                n,
                seed,
                &caps,
            )?;
            out.push_str("delta,delta_sq,rejection_fraction,mean_max_component,largest_component\n");
            for row in &rows {
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    row.delta,
                    row.delta_sq,
                    row.rejection_fraction,
                    row.mean_max_component,
                    row.largest_component_seen
                )
                .unwrap();
            }
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown scan kind `{other}` (use estimate, survey or rejection)"
            )));
        }
    }
    let _ = cli;
    Ok(out)
}

fn run_embed(config: &Config) -> Result<String, CliError> {
    let path = config
        .circuit_file
        .as_ref()
        .ok_or_else(|| CliError::Config("missing `circuit_file`".into()))?;
    let raw = std::fs::read_to_string(path)?;
    let record: CircuitRecord =
        serde_json::from_str(&raw).map_err(|e| CliError::Config(e.to_string()))?;
    let circuit = BrickworkCircuit::from_record(&record)?;
    let embedded = embed_brickwork(&circuit)?;
    let lattice = &embedded.lattice;
    let sites: Vec<_> = lattice
        .scan_order()
        .iter()
        .map(|&s| {
            serde_json::json!({
                "site": [s.x, s.y],
                "tensor": lattice.site(s).tensor().to_record(),
            })
        })
        .collect();
    let doc = serde_json::json!({
        "version": 1,
        "nx": lattice.nx(),
        "ny": lattice.ny(),
        "n_qubits": embedded.n_qubits,
        "swap_sites": embedded.swap_sites.iter().map(|s| [s.x, s.y]).collect::<Vec<_>>(),
        "register": embedded
            .register()
            .iter()
            .map(|(s, slot)| serde_json::json!({"site": [s.x, s.y], "slot": slot}))
            .collect::<Vec<_>>(),
        "sites": sites,
    });
    Ok(serde_json::to_string_pretty(&doc).expect("document serializes") + "\n")
}
