//! Command-line front end for the `mdiew` library.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use mdiew::linalg::hermitian_eigen;
use mdiew::{
    critical_xi_plus, decompose_witness, ew_bound, expectation, ghz_witness, mdi_bound,
    mdi_bound_dark, mdi_bound_lossy, mdi_value, noisy_ghz, partial_transpose, run_mdi,
    sweep_surface, tetrahedral_basis, werner, werner_witness, CountMode, Decomposition,
    Efficiencies, Error, Observable, StandardEfficiencies, State,
};

/// Directory used for output files when `--output` is absent or relative.
pub const OUTPUT_DIR_ENV: &str = "MDIEW_OUTPUT_DIR";
pub const DEFAULT_SEED: u64 = 20_201_016;

#[derive(Debug, Parser)]
#[command(
    name = "mdiew",
    version,
    about = "MDI entanglement witnesses under detector inefficiency"
)]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,

    /// Output format.
    #[arg(long, value_enum, global = true)]
    pub format: Option<Format>,

    /// Write the artifact here instead of stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Two-qubit Werner state with singlet weight `p`.
    Werner,
    /// Three-qubit noisy GHZ state with GHZ weight `q`.
    Ghz,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    PaperExact,
    Stochastic,
}

impl From<Mode> for CountMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::PaperExact => CountMode::PaperExact,
            Mode::Stochastic => CountMode::Stochastic,
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct StateArgs {
    #[arg(long, value_enum, default_value = "werner")]
    pub state: Family,
    /// Werner singlet weight.
    #[arg(long)]
    pub p: Option<f64>,
    /// GHZ weight.
    #[arg(long)]
    pub q: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// MDI value, normalised witness expectation, and PPT check of a state.
    Evaluate(StateArgs),
    /// Coefficients of a witness over tetrahedral input states.
    Decompose {
        #[arg(long, value_enum, default_value = "werner")]
        state: Family,
    },
    /// Certification thresholds for the given efficiencies.
    Bound {
        #[arg(long, default_value_t = 1.0)]
        trw: f64,
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        xi_minus: f64,
        #[arg(long, default_value_t = 1.0)]
        xi_plus: f64,
    },
    /// Count-level simulation of the MDI protocol.
    Simulate {
        #[command(flatten)]
        state: StateArgs,
        #[arg(long, default_value_t = 100_000)]
        n_per_setting: u64,
        #[arg(long, default_value_t = 1.0)]
        xi_minus: f64,
        #[arg(long, default_value_t = 1.0)]
        xi_plus: f64,
        #[arg(long, value_enum, default_value = "paper-exact")]
        mode: Mode,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Bound surface over a uniform efficiency grid.
    Sweep {
        #[arg(long, default_value_t = 1.0)]
        trw: f64,
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 51)]
        grid: usize,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Evaluate(_) => "evaluate",
            Command::Decompose { .. } => "decompose",
            Command::Bound { .. } => "bound",
            Command::Simulate { .. } => "simulate",
            Command::Sweep { .. } => "sweep",
        }
    }

    fn default_format(&self) -> Format {
        match self {
            Command::Sweep { .. } => Format::Csv,
            _ => Format::Json,
        }
    }
}

/// Failure with its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub kind: String,
    pub message: String,
}

impl CliError {
    fn invalid(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            kind: "invalid_config".into(),
            message: message.into(),
        }
    }

    pub fn to_json(&self) -> String {
        json!({ "error": { "kind": self.kind, "message": self.message, "exit_code": self.code } })
            .to_string()
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::ParameterOutOfRange { .. }
            | Error::DimensionMismatch(_)
            | Error::NotQubit(_)
            | Error::EmptyKeep => 2,
            Error::Unphysical { .. } | Error::BinUnderflow { .. } => 4,
            _ => 3,
        };
        Self {
            code,
            kind: e.kind().into(),
            message: e.to_string(),
        }
    }
}

/// Rendered command output.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub text: String,
    pub extension: &'static str,
}

/// Execute one command and render its artifact.
pub fn run(config: &RunConfig) -> Result<Artifact, CliError> {
    let format = config
        .format
        .unwrap_or_else(|| config.command.default_format());
    match &config.command {
        Command::Evaluate(args) => {
            let (rho, w, param) = build_state(args)?;
            render_record(evaluate(&rho, &w, args.state, param)?, format)
        }
        Command::Decompose { state } => {
            let w = witness_for(*state);
            let d = decompose(&w)?;
            Ok(render_decomposition(&d, format))
        }
        Command::Bound {
            trw,
            n,
            xi_minus,
            xi_plus,
        } => render_record(bounds(*trw, *n, *xi_minus, *xi_plus)?, format),
        Command::Simulate {
            state,
            n_per_setting,
            xi_minus,
            xi_plus,
            mode,
            seed,
        } => {
            let (rho, w, _) = build_state(state)?;
            let d = decompose(&w)?;
            let eff = Efficiencies::new(*xi_minus, *xi_plus, rho.dims().len())?;
            let result = run_mdi(&rho, &d, *n_per_setting, &eff, (*mode).into(), *seed)?;
            render_record(serde_json::to_value(result).expect("serialisable"), format)
        }
        Command::Sweep { trw, n, grid } => {
            let rows = sweep_surface(*trw, *n, *grid)?;
            Ok(match format {
                Format::Csv => {
                    let mut out = String::from("xi_minus,xi_plus,bound,flag\n");
                    for r in &rows {
                        writeln!(
                            out,
                            "{},{},{},{}",
                            num(r.xi_minus),
                            num(r.xi_plus),
                            num(r.bound),
                            r.flag.as_str()
                        )
                        .expect("string write");
                    }
                    Artifact {
                        text: out,
                        extension: "csv",
                    }
                }
                Format::Json => json_artifact(&serde_json::to_value(rows).expect("serialisable")),
            })
        }
    }
}

/// Run and write the artifact to its destination; returns where it went.
pub fn execute(config: &RunConfig, env_dir: Option<&Path>) -> Result<Option<PathBuf>, CliError> {
    let artifact = run(config)?;
    let target = match (&config.output, env_dir) {
        (Some(p), Some(dir)) if p.is_relative() => Some(dir.join(p)),
        (Some(p), _) => Some(p.clone()),
        (None, Some(dir)) => {
            Some(dir.join(format!("{}.{}", config.command.name(), artifact.extension)))
        }
        (None, None) => None,
    };
    match &target {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(io_error)?;
            }
            std::fs::write(path, &artifact.text).map_err(io_error)?;
        }
        None => print!("{}", artifact.text),
    }
    Ok(target)
}

fn io_error(e: std::io::Error) -> CliError {
    CliError::invalid(format!("cannot write output: {e}"))
}

/// CSV number: 17 significant digits, `.` decimal.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn witness_for(family: Family) -> Observable {
    match family {
        Family::Werner => werner_witness(),
        Family::Ghz => ghz_witness(),
    }
}

fn build_state(args: &StateArgs) -> Result<(State, Observable, f64), CliError> {
    match args.state {
        Family::Werner => {
            let p = args
                .p
                .ok_or_else(|| CliError::invalid("--p is required for --state werner"))?;
            Ok((werner(p)?, werner_witness(), p))
        }
        Family::Ghz => {
            let q = args
                .q
                .ok_or_else(|| CliError::invalid("--q is required for --state ghz"))?;
            Ok((noisy_ghz(q)?, ghz_witness(), q))
        }
    }
}

fn decompose(w: &Observable) -> Result<Decomposition, CliError> {
    let bases = vec![tetrahedral_basis::<f64>(); w.dims().len()];
    Ok(decompose_witness(w, &bases)?)
}

fn evaluate(rho: &State, w: &Observable, family: Family, param: f64) -> Result<Value, CliError> {
    let d = decompose(w)?;
    let i_true = mdi_value(rho, &d)?;
    let normalised = expectation(w, rho)? / rho.dim() as f64;
    // smallest partial-transpose eigenvalue over single-party cuts
    let pt_min = (0..rho.dims().len())
        .map(|k| {
            let pt = partial_transpose(rho.matrix(), rho.dims(), k)?;
            Ok(hermitian_eigen(&pt)?.min())
        })
        .collect::<Result<Vec<f64>, Error>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    Ok(json!({
        "state": family,
        "parameter": param,
        "i_true": i_true,
        "witness_over_dim": normalised,
        "pt_min_eigenvalue": pt_min,
        "entangled": i_true < -mdiew::witness::CERTIFY_TOL,
    }))
}

fn bounds(trw: f64, n: usize, xi_minus: f64, xi_plus: f64) -> Result<Value, CliError> {
    let eff = Efficiencies::new(xi_minus, xi_plus, n)?;
    let general = mdi_bound(trw, &eff)?;
    let c0 = trw / (1u64 << n) as f64;
    let std_eff = StandardEfficiencies::new(xi_minus, xi_plus)?;
    Ok(json!({
        "trw": trw,
        "n_parties": n,
        "xi_minus": xi_minus,
        "xi_plus": xi_plus,
        "bound": general,
        "mdi": {
            "losses_only": mdi_bound_lossy(trw, xi_minus, n)?,
            "dark_counts_only": mdi_bound_dark(trw, xi_plus, n)?,
            "general": general,
            "critical_xi_plus": critical_xi_plus(xi_minus)?,
        },
        "standard": {
            "c0": c0,
            "losses_only": ew_bound(c0, &StandardEfficiencies::new(xi_minus, 1.0)?)?,
            "dark_counts_only": ew_bound(c0, &StandardEfficiencies::new(1.0, xi_plus)?)?,
            "general": ew_bound(c0, &std_eff)?,
        },
    }))
}

fn json_artifact(v: &Value) -> Artifact {
    let mut text = serde_json::to_string_pretty(v).expect("serialisable");
    text.push('\n');
    Artifact {
        text,
        extension: "json",
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(map) => {
            for (k, inner) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, inner, out);
            }
        }
        Value::Number(x) => out.push((prefix.to_string(), num(x.as_f64().unwrap_or(f64::NAN)))),
        Value::Null => out.push((prefix.to_string(), String::new())),
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

fn render_record(v: Value, format: Format) -> Result<Artifact, CliError> {
    Ok(match format {
        Format::Json => json_artifact(&v),
        Format::Csv => {
            let mut pairs = Vec::new();
            flatten("", &v, &mut pairs);
            let mut text = String::from("key,value\n");
            for (k, val) in pairs {
                writeln!(text, "{k},{val}").expect("string write");
            }
            Artifact {
                text,
                extension: "csv",
            }
        }
    })
}

fn render_decomposition(d: &Decomposition, format: Format) -> Artifact {
    let settings = mdiew::mdi::settings(&d.shape);
    match format {
        Format::Json => json_artifact(&json!({
            "shape": d.shape,
            "beta": settings.iter().zip(&d.beta).map(|(idx, b)| json!({ "index": idx, "beta": b })).collect::<Vec<_>>(),
            "beta_sum": d.beta_sum(),
            "residual": d.residual,
        })),
        Format::Csv => {
            let parties = ["r", "s", "u", "v", "w"];
            let header: Vec<&str> = (0..d.shape.len())
                .map(|k| parties.get(k).copied().unwrap_or("x"))
                .collect();
            let mut text = format!("{},beta\n", header.join(","));
            for (idx, b) in settings.iter().zip(&d.beta) {
                let cols: Vec<String> = idx.iter().map(usize::to_string).collect();
                writeln!(text, "{},{}", cols.join(","), num(*b)).expect("string write");
            }
            Artifact {
                text,
                extension: "csv",
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_numbers_keep_seventeen_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(-0.25), "-2.5000000000000000e-1");
        assert_eq!(num(0.1).parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn records_flatten_to_key_value_rows() {
        let v = json!({ "a": 1.5, "b": { "c": true, "d": null }, "e": "x" });
        let art = render_record(v, Format::Csv).unwrap();
        assert_eq!(
            art.text,
            "key,value\na,1.5000000000000000e0\nb.c,true\nb.d,\ne,x\n"
        );
        assert_eq!(art.extension, "csv");
    }

    #[test]
    fn module_errors_map_to_exit_codes() {
        let out_of_range = Error::ParameterOutOfRange {
            name: "p",
            value: 2.0,
            domain: "[0, 1]",
        };
        assert_eq!(CliError::from(out_of_range).code, 2);
        assert_eq!(
            CliError::from(Error::Unphysical { denominator: 0.0 }).code,
            4
        );
        assert_eq!(
            CliError::from(Error::InconsistentSystem { residual: 1.0 }).code,
            3
        );
    }

    #[test]
    fn state_parameter_must_match_family() {
        let args = StateArgs {
            state: Family::Ghz,
            p: Some(0.5),
            q: None,
        };
        assert_eq!(build_state(&args).unwrap_err().code, 2);
    }
}
