//! `senskit rdp` — individual Rényi-DP accounting for an expression at
//! a point.
//!
//! Evaluates the gradient norm ‖∇f‖ at `--at`, computes the individual
//! RDP epsilon `α·L²·‖∇f‖²/(2σ²)` for the Gaussian mechanism, bounds
//! the global sensitivity sup‖∇f‖ over the declared ranges, and prints
//! one JSON object to stdout:
//!
//! ```text
//! { grad_norm, alpha, epsilon, sigma, global_sensitivity,
//!   sigma_to_sensitivity_ratio }
//! ```
//!
//! A point outside the declared ranges is allowed (the accounting is
//! still well defined) but draws a warning on stderr. An undefined
//! gradient norm at the point is a numerical failure (exit 4).

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use senskit::{
    bundle, compile, global_sensitivity, individual_rdp, parse_expression, BoxDomain, ExprGraph,
    MaximizeConfig, MechanismParams,
};

use crate::common::{self, CliError};

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Expression text.
    #[arg(long)]
    expr: Option<String>,
    /// Range NAME=LO:HI for one variable; repeat per variable.
    #[arg(long = "range", value_name = "NAME=LO:HI")]
    ranges: Vec<String>,
    /// Evaluation point NAME=VALUE; repeat or comma-separate.
    #[arg(long = "at", value_name = "NAME=VALUE")]
    at: Vec<String>,
    /// Rényi order α (must be > 1).
    #[arg(long)]
    alpha: Option<f64>,
    /// Gaussian mechanism noise standard deviation (must be > 0).
    #[arg(long)]
    sigma: Option<f64>,
    /// Lipschitz constant of the aggregation (default 1).
    #[arg(long)]
    lphi: Option<f64>,
    /// JSON file mirroring these flags; explicit flags win.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    expr: Option<String>,
    ranges: Option<Vec<String>>,
    at: Option<Vec<String>>,
    alpha: Option<f64>,
    sigma: Option<f64>,
    lphi: Option<f64>,
}

#[derive(Serialize)]
struct Report {
    grad_norm: f64,
    alpha: f64,
    epsilon: f64,
    sigma: f64,
    global_sensitivity: f64,
    sigma_to_sensitivity_ratio: f64,
}

pub fn run(args: Args) -> Result<(), CliError> {
    let cfg: FileConfig = common::load_config(&args.config)?;
    let expr = args
        .expr
        .or(cfg.expr)
        .ok_or_else(|| CliError::usage("--expr is required (flag or config)"))?;
    let range_specs = if args.ranges.is_empty() {
        cfg.ranges.unwrap_or_default()
    } else {
        args.ranges
    };
    let at_specs = if args.at.is_empty() { cfg.at.unwrap_or_default() } else { args.at };
    let alpha = args
        .alpha
        .or(cfg.alpha)
        .ok_or_else(|| CliError::usage("--alpha is required (flag or config)"))?;
    let sigma = args
        .sigma
        .or(cfg.sigma)
        .ok_or_else(|| CliError::usage("--sigma is required (flag or config)"))?;
    let lphi = args.lphi.or(cfg.lphi).unwrap_or(1.0);

    if !(alpha > 1.0) {
        return Err(CliError::usage(format!("--alpha must be > 1, got {alpha}")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(CliError::usage(format!("--sigma must be positive and finite, got {sigma}")));
    }
    if !(lphi >= 0.0 && lphi.is_finite()) {
        return Err(CliError::usage(format!("--lphi must be ≥ 0 and finite, got {lphi}")));
    }

    let mut g = ExprGraph::new();
    let parsed = parse_expression(&mut g, &expr)
        .map_err(|e| CliError::usage(format!("cannot parse --expr: {e}")))?;
    let vars = parsed.variables;
    if vars.is_empty() {
        return Err(CliError::usage("the expression has no variables"));
    }
    let ranges = common::parse_ranges(&range_specs, &vars)?;
    let point = common::parse_point(&at_specs, &vars)?;
    let domain = BoxDomain::new(&ranges).map_err(|e| CliError::usage(e.to_string()))?;
    if !domain.contains(&point) {
        eprintln!(
            "warning: --at point lies outside the declared ranges; \
             accounting continues at the given point"
        );
    }

    let b = bundle(&mut g, parsed.root, &vars).map_err(|e| CliError::usage(e.to_string()))?;
    let phi_program =
        compile(&g, &[b.grad_norm], &vars).map_err(|e| CliError::usage(e.to_string()))?;
    let out = phi_program
        .evaluate(&point)
        .map_err(|e| CliError::numeric(e.to_string()))?;
    if !out.defined[0] {
        return Err(CliError::numeric(format!(
            "gradient norm is undefined at the requested point {point:?}"
        )));
    }
    let grad_norm = out.values[0];

    let max = global_sensitivity(&mut g, parsed.root, &vars, &domain, &MaximizeConfig::default())
        .map_err(|e| CliError::numeric(e.to_string()))?;
    if !max.value.is_finite() {
        return Err(CliError::numeric(format!(
            "global sensitivity is not finite over the declared ranges (got {})",
            max.value
        )));
    }

    let params = MechanismParams { sigma, lipschitz_agg: lphi, seed: 0 };
    let rdp = individual_rdp(alpha, &params, grad_norm)
        .map_err(|e| CliError::numeric(e.to_string()))?;

    let report = Report {
        grad_norm,
        alpha,
        epsilon: rdp.epsilon,
        sigma,
        global_sensitivity: max.value,
        sigma_to_sensitivity_ratio: sigma / max.value,
    };
    let mut text = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::io(e.to_string()))?;
    text.push('\n');
    print!("{text}");
    Ok(())
}
