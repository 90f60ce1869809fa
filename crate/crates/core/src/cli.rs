//! Command-line runners. Every run writes `provenance.json` next to its
//! outputs, embeds the same record in every JSON artefact, and removes
//! whatever it wrote if it fails before completing.

use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{parse_config, resolve, ResolvedScenario};
use crate::constellation::{
    encode_constellation, estimate_ser_for_means, min_distance, sample_cloud, union_bound, QUADRATURE_SIGMA,
};
use crate::error::Error;
use crate::physics::ConverterDesign;
use crate::qstate::CoherentState;
use crate::sideband::{truncation_for_depth, width_sweep};
use crate::verify::{coherence_checks, half_width_for, matrix_checks, ode_checks, Check, CoherenceCheck, OdeCheck};

pub const SEED_ENV: &str = "QEOSIM_SEED";

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_TOLERANCE: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Optimum geometry and modulation depths.
    Design,
    /// Sideband powers versus element width.
    WidthSweep,
    /// Sideband-matrix identities, unitarity and closed-form agreement.
    MatrixVerify,
    /// Fock-amplitude ODE versus closed-form phase.
    OdeVerify,
    /// Sampled quadrature clouds for every symbol.
    Encode,
    /// Monte Carlo symbol error rate.
    Ser,
    /// Everything above plus a pass/fail summary.
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Design => "design",
            Command::WidthSweep => "width-sweep",
            Command::MatrixVerify => "matrix-verify",
            Command::OdeVerify => "ode-verify",
            Command::Encode => "encode",
            Command::Ser => "ser",
            Command::Report => "report",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    /// `--seed`, overriding the environment and the config.
    pub seed: Option<u64>,
    /// Value of `QEOSIM_SEED`, if set.
    pub env_seed: Option<String>,
    /// `--n`: trials for `ser`, samples per symbol for `encode`.
    pub count: Option<u64>,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Validation(Error),
    #[error("{0}")]
    Tolerance(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Validation(_) => EXIT_VALIDATION,
            RunError::Tolerance(_) => EXIT_TOLERANCE,
            RunError::Io { .. } => EXIT_IO,
        }
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e {
            Error::Refinement { .. } => RunError::Tolerance(e.to_string()),
            other => RunError::Validation(other),
        }
    }
}

type RunResult<T> = std::result::Result<T, RunError>;

/// Files written by a run, and whether every tolerance check passed.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    pub failed_checks: Vec<String>,
}

impl RunSummary {
    pub fn exit_code(&self) -> i32 {
        if self.failed_checks.is_empty() {
            EXIT_OK
        } else {
            EXIT_TOLERANCE
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config_sha256: String,
    pub seed: u64,
    pub seed_source: &'static str,
    pub resolved: Value,
}

/// `--seed`, then `QEOSIM_SEED`, then the config value.
pub fn resolve_seed(cli: Option<u64>, env: Option<&str>, config: u64) -> Result<(u64, &'static str), Error> {
    if let Some(s) = cli {
        return Ok((s, "cli"));
    }
    if let Some(text) = env {
        return text.trim().parse().map(|s| (s, "env")).map_err(|_| Error::Config {
            field: SEED_ENV.into(),
            constraint: format!("must be an unsigned 64-bit integer, got \"{text}\""),
        });
    }
    Ok((config, "config"))
}

/// Loads the config, runs `command` and writes its outputs into `out_dir`.
///
/// Tolerance failures still leave complete verification reports behind and
/// are reported through [`RunSummary::failed_checks`]; any error removes the
/// files this run had written.
pub fn run(command: Command, config_path: &Path, out_dir: &Path, opts: &RunOptions) -> RunResult<RunSummary> {
    let raw = fs::read(config_path).map_err(|source| RunError::Io {
        context: format!("reading {}", config_path.display()),
        source,
    })?;
    let text = String::from_utf8(raw.clone()).map_err(|_| {
        RunError::Validation(Error::Config {
            field: "<document>".into(),
            constraint: "must be UTF-8".into(),
        })
    })?;
    let mut scenario = resolve(&parse_config(&text)?)?;
    let (seed, seed_source) = resolve_seed(opts.seed, opts.env_seed.as_deref(), scenario.seed)?;
    scenario.seed = seed;
    if let Some(n) = opts.count {
        apply_count(command, &mut scenario, n)?;
    }

    fs::create_dir_all(out_dir).map_err(|source| RunError::Io {
        context: format!("creating {}", out_dir.display()),
        source,
    })?;
    let provenance = Provenance {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: command.name(),
        config_sha256: hex::encode(Sha256::digest(&raw)),
        seed,
        seed_source,
        resolved: resolved_echo(&scenario),
    };
    let mut out = Outputs::new(out_dir, &provenance);
    match execute(command, &scenario, &mut out) {
        Ok(failed_checks) => Ok(RunSummary {
            files: out.written,
            failed_checks,
        }),
        Err(e) => {
            out.remove_all();
            Err(e)
        }
    }
}

fn apply_count(command: Command, scenario: &mut ResolvedScenario, n: u64) -> RunResult<()> {
    let invalid = |constraint: String| {
        RunError::Validation(Error::Config {
            field: "--n".into(),
            constraint,
        })
    };
    match command {
        Command::Ser | Command::Report if n < crate::constellation::MIN_SER_TRIALS => {
            return Err(invalid(format!(
                "must be >= {} trials",
                crate::constellation::MIN_SER_TRIALS
            )));
        }
        _ if n == 0 => return Err(invalid("must be >= 1".into())),
        _ => {}
    }
    match command {
        Command::Ser => scenario.n_trials = n,
        Command::Encode => scenario.n_samples = n as usize,
        Command::Report => {
            scenario.n_trials = n;
            scenario.n_samples = n as usize;
        }
        _ => log::warn!("--n has no effect on {}", command.name()),
    }
    Ok(())
}

fn execute(command: Command, s: &ResolvedScenario, out: &mut Outputs) -> RunResult<Vec<String>> {
    out.write_json("provenance.json", json!({}))?;
    let mut failed = Vec::new();
    match command {
        Command::Design => design(s, out)?,
        Command::WidthSweep => sweep(s, out)?,
        Command::MatrixVerify => failed.extend(matrix_verify(s, out)?),
        Command::OdeVerify => failed.extend(ode_verify(s, out)?),
        Command::Encode => encode(s, out)?,
        Command::Ser => ser(s, out)?,
        Command::Report => {
            design(s, out)?;
            sweep(s, out)?;
            failed.extend(matrix_verify(s, out)?);
            failed.extend(ode_verify(s, out)?);
            encode(s, out)?;
            ser(s, out)?;
            out.write_json(
                "report.json",
                json!({
                    "pass": failed.is_empty(),
                    "failed_checks": failed,
                    "files": out.written.iter().filter_map(|p| p.file_name()).map(|n| n.to_string_lossy().into_owned()).collect::<Vec<_>>(),
                }),
            )?;
        }
    }
    Ok(failed)
}

fn resolved_echo(s: &ResolvedScenario) -> Value {
    json!({
        "material": { "eps_op": s.material.eps_op(), "n_op": s.material.n_op(), "r33_m_per_v": s.material.r33() },
        "carriers": {
            "f_w_hz": s.carriers.f_w(),
            "lambda_op_m": s.carriers.lambda_op(),
            "carrier_ratio": s.carriers.carrier_ratio(),
        },
        "geometry": {
            "W_m": s.width,
            "D_m": s.period,
            "W_o_m": s.optimum_width(),
            "D_o_m": s.optimum_period(),
            "N": s.counts,
            "gamma": s.gamma,
        },
        "drive": { "E_w_v_per_m": s.drive.field(), "constellation_deg": s.constellation_deg },
        "state": { "n_ph": s.photon_numbers },
        "mc": { "n_samples": s.n_samples, "n_trials": s.n_trials, "seed": s.seed, "sigma": QUADRATURE_SIGMA },
        "numerics": {
            "S": s.half_width,
            "K": s.fock_cutoff,
            "steps_per_period": s.steps_per_period,
            "sweep_points": s.sweep_points,
            "tolerances": s.tolerances,
        },
    })
}

fn design(s: &ResolvedScenario, out: &mut Outputs) -> RunResult<()> {
    let w_o = s.optimum_width();
    let d_o = s.optimum_period();
    let designs = s
        .designs()?
        .iter()
        .map(|d| {
            let depth = d.depth();
            let at_optimum =
                ConverterDesign::optimum(d.material, d.carriers, d.geometry.count(), d.geometry.gamma(), d.drive)
                    .map(|o| o.depth().delta_theta_n);
            at_optimum.map(|dn_o| {
                json!({
                    "N": d.geometry.count(),
                    "W_m": d.geometry.width(),
                    "D_m": d.geometry.period(),
                    "G_m": d.geometry.gap(),
                    "is_optimum": d.is_optimum(1e-12),
                    "delta_theta_rad": depth.delta_theta,
                    "phi_rad": depth.phi,
                    "delta_theta_N_rad": depth.delta_theta_n,
                    "phi_N_rad": depth.phi_n,
                    "delta_theta_No_rad": dn_o,
                    "chi_rad": depth.chi,
                    "k_op_per_m": d.k_op(),
                    "default_S": truncation_for_depth(depth.delta_theta_n),
                })
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    out.write_json(
        "design.json",
        json!({
            "W_o_m": w_o,
            "D_o_m": d_o,
            "omega_w_rad_per_s": s.carriers.omega_w(),
            "omega_op_rad_per_s": s.carriers.omega_op(),
            "designs": designs,
        }),
    )
}

fn sweep(s: &ResolvedScenario, out: &mut Outputs) -> RunResult<()> {
    let d = s.design(1)?;
    let w_max = 2.0 * s.optimum_width();
    let last = (s.sweep_points - 1) as f64;
    let grid: Vec<f64> = (0..s.sweep_points).map(|i| w_max * i as f64 / last).collect();
    let half_width = s
        .half_width
        .unwrap_or_else(|| truncation_for_depth(d.section_depth(s.optimum_width())));
    let rows = width_sweep(&d, &grid, half_width)?;
    let mut csv = Csv::new(&["w_m", "P0", "P1", "P2", "tail"]);
    for r in &rows {
        csv.row(&[r.w_m, r.p0, r.p1, r.p2, r.tail])?;
    }
    out.write_text("width_sweep.csv", csv.finish())
}

fn matrix_verify(s: &ResolvedScenario, out: &mut Outputs) -> RunResult<Vec<String>> {
    let mut checks: Vec<Check> = Vec::new();
    let mut truncations = Vec::new();
    for d in s.designs()? {
        let hw = half_width_for(&d, s.half_width);
        truncations.push(json!({ "N": d.geometry.count(), "S": hw }));
        checks.extend(matrix_checks(&d, hw, &s.tolerances)?);
    }
    let failed = failed_names(
        checks
            .iter()
            .map(|c| (c.pass, format!("{}[N={},t={:e}]", c.name, c.count, c.t_s))),
    );
    out.write_json(
        "matrix_verify.json",
        json!({ "pass": failed.is_empty(), "truncation": truncations, "checks": checks }),
    )?;
    Ok(failed)
}

fn ode_verify(s: &ResolvedScenario, out: &mut Outputs) -> RunResult<Vec<String>> {
    let mut checks: Vec<OdeCheck> = Vec::new();
    let mut coherence: Vec<CoherenceCheck> = Vec::new();
    for d in s.designs()? {
        checks.extend(ode_checks(&d, s.steps_per_period, &s.tolerances)?);
        for &n_ph in &s.photon_numbers {
            coherence.extend(coherence_checks(&d, n_ph, s.fock_cutoff, &s.tolerances)?);
        }
    }
    let mut failed = failed_names(checks.iter().map(|c| {
        (
            c.pass,
            format!("ode[N={},t0={:e},k={}]", c.count, c.t0_s, c.photon_number),
        )
    }));
    failed.extend(failed_names(coherence.iter().map(|c| {
        (
            c.pass,
            format!("coherence[N={},n_ph={},t={:e}]", c.count, c.n_ph, c.t_s),
        )
    })));
    out.write_json(
        "ode_verify.json",
        json!({ "pass": failed.is_empty(), "checks": checks, "coherence": coherence }),
    )?;
    Ok(failed)
}

fn failed_names(checks: impl Iterator<Item = (bool, String)>) -> Vec<String> {
    checks.filter(|(pass, _)| !pass).map(|(_, name)| name).collect()
}

fn encode(s: &ResolvedScenario, out: &mut Outputs) -> RunResult<()> {
    for d in s.designs()? {
        let n = d.geometry.count();
        for &n_ph in &s.photon_numbers {
            let alpha = CoherentState::with_photon_number(n_ph)?.alpha;
            let enc = encode_constellation(&s.constellation, alpha, &d);
            let mut csv = Csv::new(&["symbol_index", "b_deg", "theta_rad", "mean_x", "mean_p", "x", "p"]);
            for (i, sym) in enc.symbols.iter().enumerate() {
                let seed = derive_seed(s.seed, &[n as u64, n_ph.to_bits(), i as u64]);
                let cloud = sample_cloud(sym, s.n_samples, seed)?;
                let b_deg = s.constellation_deg[i];
                for pt in &cloud.samples {
                    csv.labelled_row(i, &[b_deg, sym.theta, sym.mean_x, sym.mean_p, pt.x, pt.p])?;
                }
            }
            out.write_text(&format!("encode_N{n}_nph{n_ph}.csv"), csv.finish())?;
        }
    }
    Ok(())
}

fn ser(s: &ResolvedScenario, out: &mut Outputs) -> RunResult<()> {
    for d in s.designs()? {
        let n = d.geometry.count();
        for &n_ph in &s.photon_numbers {
            let alpha = CoherentState::with_photon_number(n_ph)?.alpha;
            let enc = encode_constellation(&s.constellation, alpha, &d);
            let means = enc.means();
            let est = estimate_ser_for_means(&means, QUADRATURE_SIGMA, s.n_trials, s.seed)?;
            let d_min = if means.len() >= 2 {
                Some(min_distance(&means)?.0)
            } else {
                None
            };
            out.write_json(
                &format!("ser_N{n}_nph{n_ph}.json"),
                json!({
                    "ser": est.ser,
                    "ci95": est.ci95,
                    "n_trials": est.n_trials,
                    "per_symbol_errors": est.per_symbol_errors,
                    "per_symbol_trials": est.per_symbol_trials,
                    "N": n,
                    "n_ph": n_ph,
                    "sigma": QUADRATURE_SIGMA,
                    "min_distance": d_min,
                    "union_bound": union_bound(&means, QUADRATURE_SIGMA),
                    "degenerate_pairs": enc.degenerate,
                    "means": means,
                }),
            )?;
        }
    }
    Ok(())
}

/// SplitMix64 over the seed and a list of tags.
fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    tags.iter().fold(mix(seed), |acc, &t| mix(acc ^ t))
}

/// CSV table whose numeric fields must be finite; floats use shortest round-trip
/// exponent notation so repeated runs are byte-identical.
struct Csv {
    writer: csv::Writer<Vec<u8>>,
    columns: Vec<&'static str>,
}

impl Csv {
    fn new(columns: &[&'static str]) -> Self {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(columns).expect("writing to memory");
        Self {
            writer,
            columns: columns.to_vec(),
        }
    }

    fn row(&mut self, values: &[f64]) -> RunResult<()> {
        self.write_row(None, values)
    }

    /// A row whose first column is an integer label.
    fn labelled_row(&mut self, label: usize, values: &[f64]) -> RunResult<()> {
        self.write_row(Some(label), values)
    }

    fn write_row(&mut self, label: Option<usize>, values: &[f64]) -> RunResult<()> {
        let numeric = &self.columns[usize::from(label.is_some())..];
        let mut fields = Vec::with_capacity(self.columns.len());
        fields.extend(label.map(|l| l.to_string()));
        for (col, &v) in numeric.iter().zip(values) {
            if !v.is_finite() {
                return Err(RunError::Tolerance(format!("non-finite value {v} in column {col}")));
            }
            fields.push(format!("{v:e}"));
        }
        self.writer.write_record(&fields).expect("writing to memory");
        Ok(())
    }

    fn finish(self) -> String {
        let bytes = self.writer.into_inner().expect("flushing to memory");
        String::from_utf8(bytes).expect("CSV fields are ASCII")
    }
}

struct Outputs<'a> {
    dir: PathBuf,
    provenance: &'a Provenance,
    written: Vec<PathBuf>,
}

impl<'a> Outputs<'a> {
    fn new(dir: &Path, provenance: &'a Provenance) -> Self {
        Self {
            dir: dir.to_path_buf(),
            provenance,
            written: Vec::new(),
        }
    }

    /// Writes `{"provenance": ..., <payload fields>}`; `provenance.json` holds the record alone.
    fn write_json(&mut self, name: &str, payload: Value) -> RunResult<()> {
        let prov = serde_json::to_value(self.provenance).expect("provenance serialises");
        let doc = if name == "provenance.json" {
            prov
        } else {
            let mut map = serde_json::Map::new();
            map.insert("provenance".into(), prov);
            if let Value::Object(fields) = payload {
                map.extend(fields);
            }
            Value::Object(map)
        };
        check_finite_json(name, &doc)?;
        let mut text = serde_json::to_string_pretty(&doc).expect("JSON serialises");
        text.push('\n');
        self.write_text(name, text)
    }

    fn write_text(&mut self, name: &str, text: String) -> RunResult<()> {
        let path = self.dir.join(name);
        fs::write(&path, text).map_err(|source| RunError::Io {
            context: format!("writing {}", path.display()),
            source,
        })?;
        log::info!("wrote {}", path.display());
        self.written.push(path);
        Ok(())
    }

    fn remove_all(&mut self) {
        for path in self.written.drain(..) {
            if let Err(e) = fs::remove_file(&path) {
                log::warn!("could not remove {}: {e}", path.display());
            }
        }
    }
}

// serde_json writes non-finite floats as null; refuse them instead.
fn check_finite_json(name: &str, v: &Value) -> RunResult<()> {
    fn walk(v: &Value) -> bool {
        match v {
            Value::Null => false,
            Value::Array(a) => a.iter().all(walk),
            Value::Object(o) => o.iter().all(|(k, v)| nullable(k) || walk(v)),
            _ => true,
        }
    }
    // Keys whose null means "not set" rather than "not finite".
    fn nullable(key: &str) -> bool {
        matches!(key, "S" | "K" | "min_distance")
    }
    if walk(v) {
        Ok(())
    } else {
        Err(RunError::Tolerance(format!("non-finite value in {name}")))
    }
}
