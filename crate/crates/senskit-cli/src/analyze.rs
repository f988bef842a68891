//! `senskit analyze` — sample an expression's gradient norm and partial
//! sensitivities over a box and bound its global L2 sensitivity.
//!
//! Writes two artifacts into `--out`:
//!
//! * `analysis.json` — the multistart maximization result (the global
//!   sensitivity bound sup‖∇f‖ with its argmax) plus the resolved
//!   request;
//! * `surface.csv` — the full `grid^d` lattice with one row per point:
//!   variable values, `grad_norm`, one `ps_<var>` column per variable in
//!   the chosen variant, and a 0/1 `defined` flag (1 only when the norm
//!   and every component are defined). Rows are ordered with the first
//!   variable slowest, matching the maximizer's lattice.
//!
//! `--grid` controls only the surface sampling; the maximizer uses its
//! own documented defaults.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::json;

use senskit::{
    bundle, compile, global_sensitivity, parse_expression, to_text, BoxDomain, ExprGraph,
    MaxResult, MaximizeConfig,
};

use crate::common::{self, CliError, VariantArg};

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Expression text, e.g. "a^2 + exp(2*b - a)".
    #[arg(long)]
    expr: Option<String>,
    /// Range NAME=LO:HI for one variable; repeat per variable.
    #[arg(long = "range", value_name = "NAME=LO:HI")]
    ranges: Vec<String>,
    /// Lattice points per dimension for surface.csv (default 100).
    #[arg(long)]
    grid: Option<usize>,
    /// Partial-sensitivity variant for the ps_* columns.
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    /// Output directory (default ".").
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON file mirroring these flags; explicit flags win.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    expr: Option<String>,
    ranges: Option<Vec<String>>,
    grid: Option<usize>,
    variant: Option<VariantArg>,
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct RangeOut {
    var: String,
    lo: f64,
    hi: f64,
}

#[derive(Serialize)]
struct Analysis {
    expression: String,
    canonical: String,
    variables: Vec<String>,
    ranges: Vec<RangeOut>,
    grid_per_dim: usize,
    variant: VariantArg,
    /// sup‖∇f‖ over the box with its maximizer diagnostics.
    global_sensitivity: MaxResult,
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
    let grid = args.grid.or(cfg.grid).unwrap_or(100);
    let variant = args.variant.or(cfg.variant).unwrap_or(VariantArg::Fractional);
    let out_dir = args.out.or(cfg.out).unwrap_or_else(|| PathBuf::from("."));

    let mut g = ExprGraph::new();
    let parsed = parse_expression(&mut g, &expr)
        .map_err(|e| CliError::usage(format!("cannot parse --expr: {e}")))?;
    let vars = parsed.variables;
    if vars.is_empty() {
        return Err(CliError::usage("the expression has no variables to analyze"));
    }
    if grid < 2 {
        return Err(CliError::usage("--grid must be at least 2"));
    }
    let ranges = common::parse_ranges(&range_specs, &vars)?;
    let domain = BoxDomain::new(&ranges).map_err(|e| CliError::usage(e.to_string()))?;

    let b = bundle(&mut g, parsed.root, &vars).map_err(|e| CliError::usage(e.to_string()))?;
    let max = global_sensitivity(&mut g, parsed.root, &vars, &domain, &MaximizeConfig::default())
        .map_err(|e| CliError::numeric(e.to_string()))?;

    // Surface program: grad_norm plus the chosen variant's components.
    let ps = match variant {
        VariantArg::Fractional => b.ps_fractional.partials(),
        VariantArg::Gradient => b.ps_gradient.partials(),
    };
    let mut outputs = vec![b.grad_norm];
    outputs.extend_from_slice(ps);
    let program =
        compile(&g, &outputs, &vars).map_err(|e| CliError::usage(e.to_string()))?;

    let d = vars.len();
    let total = grid
        .checked_pow(d as u32)
        .ok_or_else(|| CliError::usage("grid^dimensions overflows"))?;
    let mut rows = Vec::with_capacity(total);
    for flat in 0..total {
        let mut point = vec![0.0; d];
        let mut rem = flat;
        for dim in (0..d).rev() {
            point[dim] = domain.lattice_coord(dim, rem % grid, grid);
            rem /= grid;
        }
        rows.push(point);
    }
    let outs = program
        .evaluate_batch(&rows)
        .map_err(|e| CliError::numeric(e.to_string()))?;

    let mut csv = String::new();
    for var in &vars {
        csv.push_str(var);
        csv.push(',');
    }
    csv.push_str("grad_norm");
    for var in &vars {
        csv.push_str(",ps_");
        csv.push_str(var);
    }
    csv.push_str(",defined\n");
    for (row, out) in rows.iter().zip(&outs) {
        for v in row {
            csv.push_str(&common::fmt_f64(*v));
            csv.push(',');
        }
        for (i, v) in out.values.iter().enumerate() {
            if i > 0 {
                csv.push(',');
            }
            csv.push_str(&common::fmt_f64(*v));
        }
        let defined = out.defined.iter().all(|&ok| ok);
        csv.push_str(if defined { ",1\n" } else { ",0\n" });
    }

    common::ensure_dir(&out_dir)?;
    common::write_text(&out_dir.join("surface.csv"), &csv)?;

    let analysis = Analysis {
        expression: expr.clone(),
        canonical: to_text(&g, parsed.root),
        variables: vars.clone(),
        ranges: ranges
            .iter()
            .map(|(var, lo, hi)| RangeOut { var: var.clone(), lo: *lo, hi: *hi })
            .collect(),
        grid_per_dim: grid,
        variant,
        global_sensitivity: max,
    };
    common::write_json(&out_dir.join("analysis.json"), &analysis)?;

    let resolved = json!({
        "expr": expr,
        "ranges": ranges.iter().map(|(v, lo, hi)| format!("{v}={lo}:{hi}")).collect::<Vec<_>>(),
        "grid": grid,
        "variant": variant,
        "out": out_dir.display().to_string(),
    });
    common::write_metadata(
        &out_dir,
        "analysis.meta.json",
        "analyze",
        Default::default(),
        resolved,
    )
}
