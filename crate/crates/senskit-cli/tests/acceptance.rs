//! Acceptance suite: eleven numbered end-to-end criteria covering the
//! symbolic engine, the privacy layer, the synthetic-image lab, and the
//! CLI binary. Run with `cargo test -p senskit-cli --test acceptance --
//! --nocapture` to see one `criterion N: PASS/FAIL — …` line per test.
//!
//! Every criterion asserts both its property and its runtime cap. The
//! trained networks (plain SGD and DP-SGD at the pinned seeds 7/42/99)
//! are shared fixtures: training wall time is measured once, inside
//! fixture initialization, and charged to the criteria whose caps cover
//! it (criterion 8 for SGD, criterion 10 for DP-SGD). Criteria that
//! merely reuse a trained net force the fixture *before* starting their
//! own timers, so their caps measure only the checks they add.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::sync::LazyLock;
use std::time::Instant;

use tempfile::tempdir;

use senskit::nnlab::{
    build_mlp, dispersion_stats, gen_synthetic, ps_report, train_dpsgd, train_sgd, CompiledModel,
    DataSpec, PsVariant, SyntheticData, TrainConfig, TrainOutcome, PIXELS,
};
use senskit::testkit::{
    central_diff, close_rel, dense_grid_max, naive_eval_ordered, ExprGen, ExprGenConfig,
};
use senskit::{
    bundle, clip_l2, compile, global_sensitivity, individual_rdp, parse_expression, BoxDomain,
    CounterRng, ExprGraph, MaximizeConfig, MechanismParams, NodeId, Program,
};

/// The reference query analyzed throughout: f(a,b) = a² + e^{2b−a} on
/// a ∈ [1,2], b ∈ [0.5,3].
const QUERY: &str = "a^2 + exp(2*b - a)";
const QUERY_BOX: [(f64, f64); 2] = [(1.0, 2.0), (0.5, 3.0)];
/// Published reference value for sup‖∇f‖ on the query box, printed
/// alongside the computed value by criterion 4.
const PUBLISHED_SENSITIVITY: f64 = 66.19;

const DATA_SEED: u64 = 7;
const INIT_SEED: u64 = 42;
const DP_SEED: u64 = 99;

const CENTER_ROW: [usize; 5] = [10, 11, 12, 13, 14];
const CENTER_COL: [usize; 5] = [2, 7, 12, 17, 22];

fn report(n: u32, pass: bool, detail: &str) {
    println!("criterion {n}: {} — {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {n} failed — {detail}");
}

struct Lab {
    data: SyntheticData,
    compiled: CompiledModel,
}

static LAB: LazyLock<Lab> = LazyLock::new(|| {
    let data = gen_synthetic(&DataSpec { seed: DATA_SEED, ..DataSpec::default() });
    let compiled = build_mlp(ExprGraph::new())
        .expect("model graph builds")
        .compile()
        .expect("model programs compile");
    Lab { data, compiled }
});

struct Trained {
    outcome: TrainOutcome,
    train_secs: f64,
}

static SGD: LazyLock<Trained> = LazyLock::new(|| {
    let lab = &*LAB;
    let cfg = TrainConfig::sgd(INIT_SEED);
    let t = Instant::now();
    let outcome = train_sgd(&lab.compiled, &lab.data, &cfg).expect("SGD training succeeds");
    Trained { outcome, train_secs: t.elapsed().as_secs_f64() }
});

static DPSGD: LazyLock<Trained> = LazyLock::new(|| {
    let lab = &*LAB;
    let cfg = TrainConfig::dpsgd(INIT_SEED, DP_SEED, lab.data.train.len());
    let t = Instant::now();
    let outcome = train_dpsgd(&lab.compiled, &lab.data, &cfg).expect("DP-SGD training succeeds");
    Trained { outcome, train_secs: t.elapsed().as_secs_f64() }
});

/// Parses the reference query into a fresh graph.
fn query_graph() -> (ExprGraph, NodeId, Vec<String>) {
    let mut g = ExprGraph::new();
    let parsed = parse_expression(&mut g, QUERY).expect("reference query parses");
    (g, parsed.root, parsed.variables)
}

/// Closure view of a single-output program, `None` when undefined.
fn scalar_fn(p: &Program) -> impl Fn(&[f64]) -> Option<f64> + '_ {
    move |x: &[f64]| {
        let out = p.evaluate(x).expect("binding arity");
        out.defined[0].then_some(out.values[0])
    }
}

#[test]
fn criterion_01_symbolic_gradient_matches_finite_differences() {
    let mut cases: Vec<(ExprGraph, NodeId, Vec<String>, [(f64, f64); 2])> = Vec::new();
    let (g, root, vars) = query_graph();
    cases.push((g, root, vars, QUERY_BOX));
    for k in 0..5 {
        let mut g = ExprGraph::new();
        let mut gen = ExprGen::new(1000 + k, ExprGenConfig::default());
        let root = gen.gen(&mut g);
        let vars = vec!["a".to_string(), "b".to_string()];
        cases.push((g, root, vars, [(0.25, 2.0), (0.25, 2.0)]));
    }

    let t = Instant::now();
    let mut rng = CounterRng::new(0xACC).substream("criterion-1");
    let mut checked = 0usize;
    let mut worst = 0.0f64;
    let mut failures = 0usize;
    for (mut g, root, vars, case_box) in cases {
        let b = bundle(&mut g, root, &vars).expect("bundle builds");
        let f_prog = compile(&g, &[root], &vars).expect("function compiles");
        let grad_prog = compile(&g, b.grad.partials(), &vars).expect("gradient compiles");
        let f = scalar_fn(&f_prog);

        let mut accepted = 0usize;
        let mut attempts = 0usize;
        while accepted < 100 {
            attempts += 1;
            assert!(attempts <= 20_000, "could not find 100 usable sample points");
            let x: Vec<f64> =
                case_box.iter().map(|&(lo, hi)| rng.next_range(lo, hi)).collect();
            let sym = grad_prog.evaluate(&x).expect("binding arity");
            if !sym.defined.iter().all(|&d| d) {
                continue;
            }
            let fd: Option<Vec<f64>> =
                (0..vars.len()).map(|i| central_diff(&f, &x, i, 1e-5)).collect();
            let Some(fd) = fd else { continue };
            if fd.iter().any(|v| !v.is_finite()) {
                continue;
            }
            for i in 0..vars.len() {
                let (s, d) = (sym.values[i], fd[i]);
                if !close_rel(s, d, 1e-5, 1e-7) {
                    failures += 1;
                }
                let denom = s.abs().max(d.abs()).max(1e-12);
                worst = worst.max((s - d).abs() / denom);
                checked += 1;
            }
            accepted += 1;
        }
    }
    let secs = t.elapsed().as_secs_f64();
    report(
        1,
        failures == 0 && secs < 5.0,
        &format!(
            "symbolic gradients match central differences (h=1e-5, rel 1e-5) on the \
             reference query and 5 generated expressions, 100 points each \
             ({checked} partials checked, {failures} failures, worst rel dev {worst:.2e}); \
             {secs:.2}s (cap 5s)"
        ),
    );
}

#[test]
fn criterion_02_fractional_ps_vector_has_unit_norm() {
    let lab = &*LAB;
    let weights = &SGD.outcome.final_weights; // force training outside the timer

    let t = Instant::now();
    let mut failures = 0usize;
    let mut worst = 0.0f64;

    // Part 1: the reference query at 10⁴ random in-box points.
    let (mut g, root, vars) = query_graph();
    let b = bundle(&mut g, root, &vars).expect("bundle builds");
    let mut outputs = vec![b.grad_norm];
    outputs.extend_from_slice(b.ps_fractional.partials());
    let prog = compile(&g, &outputs, &vars).expect("program compiles");
    let mut rng = CounterRng::new(0xACC).substream("criterion-2");
    let rows: Vec<[f64; 2]> = (0..10_000)
        .map(|_| {
            [rng.next_range(QUERY_BOX[0].0, QUERY_BOX[0].1),
             rng.next_range(QUERY_BOX[1].0, QUERY_BOX[1].1)]
        })
        .collect();
    let mut query_checked = 0usize;
    for out in prog.evaluate_batch(&rows).expect("batch eval") {
        if !out.defined.iter().all(|&d| d) || out.values[0] <= 1e-8 {
            continue;
        }
        let norm = out.values[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
        worst = worst.max((norm - 1.0).abs());
        if (norm - 1.0).abs() > 1e-9 {
            failures += 1;
        }
        query_checked += 1;
    }

    // Part 2: the trained MLP loss at 10⁴ random pixel bindings.
    let prog = &lab.compiled.ps_fractional;
    let rows: Vec<Vec<f64>> = (0..10_000)
        .map(|_| {
            let mut pixels = [0.0; PIXELS];
            for p in pixels.iter_mut() {
                *p = rng.next_f64();
            }
            let label = u8::from(rng.next_f64() < 0.5);
            lab.compiled.binding_row(weights, &pixels, label)
        })
        .collect();
    let mut mlp_checked = 0usize;
    for out in prog.evaluate_batch(&rows).expect("batch eval") {
        if !out.defined.iter().all(|&d| d) || out.values[0] <= 1e-8 {
            continue;
        }
        let norm = out.values[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
        worst = worst.max((norm - 1.0).abs());
        if (norm - 1.0).abs() > 1e-9 {
            failures += 1;
        }
        mlp_checked += 1;
    }

    let secs = t.elapsed().as_secs_f64();
    // Guard against a vacuous pass should the filter reject everything.
    let enough = query_checked >= 1_000 && mlp_checked >= 1_000;
    report(
        2,
        failures == 0 && enough && secs < 30.0,
        &format!(
            "fractional PS vector norm within 1e-9 of 1 where grad norm > 1e-8 \
             (query: {query_checked}/10000 points, trained MLP loss: {mlp_checked}/10000 \
             points, {failures} failures, worst |norm−1| {worst:.2e}); {secs:.2}s (cap 30s)"
        ),
    );
}

#[test]
fn criterion_03_gradient_variant_matches_grad_norm_differences() {
    let (mut g, root, vars) = query_graph();
    let b = bundle(&mut g, root, &vars).expect("bundle builds");
    let phi_prog = compile(&g, &[b.grad_norm], &vars).expect("grad norm compiles");
    let psg_prog = compile(&g, b.ps_gradient.partials(), &vars).expect("ps_gradient compiles");
    let phi = scalar_fn(&phi_prog);

    let t = Instant::now();
    let mut rng = CounterRng::new(0xACC).substream("criterion-3");
    let mut accepted = 0usize;
    let mut attempts = 0usize;
    let mut failures = 0usize;
    let mut worst = 0.0f64;
    while accepted < 100 {
        attempts += 1;
        assert!(attempts <= 20_000, "could not find 100 points with grad norm > 1e-3");
        let x = [
            rng.next_range(QUERY_BOX[0].0, QUERY_BOX[0].1),
            rng.next_range(QUERY_BOX[1].0, QUERY_BOX[1].1),
        ];
        match phi(&x) {
            Some(v) if v > 1e-3 => {}
            _ => continue,
        }
        let sym = psg_prog.evaluate(&x).expect("binding arity");
        if !sym.defined.iter().all(|&d| d) {
            continue;
        }
        for i in 0..vars.len() {
            let fd = central_diff(&phi, &x, i, 1e-6)
                .expect("grad norm defined near in-box points");
            let s = sym.values[i];
            if !close_rel(s, fd, 1e-4, 1e-7) {
                failures += 1;
            }
            let denom = s.abs().max(fd.abs()).max(1e-12);
            worst = worst.max((s - fd).abs() / denom);
        }
        accepted += 1;
    }
    let secs = t.elapsed().as_secs_f64();
    report(
        3,
        failures == 0 && secs < 10.0,
        &format!(
            "gradient-variant PS matches central differences of the gradient norm \
             (h=1e-6, rel 1e-4) at 100 points with grad norm > 1e-3 \
             ({failures} failures, worst rel dev {worst:.2e}); {secs:.2}s (cap 10s)"
        ),
    );
}

#[test]
fn criterion_04_global_sensitivity_matches_dense_grid_oracle() {
    let (mut g, root, vars) = query_graph();
    let domain = BoxDomain::new(&[
        ("a", QUERY_BOX[0].0, QUERY_BOX[0].1),
        ("b", QUERY_BOX[1].0, QUERY_BOX[1].1),
    ])
    .expect("valid box");

    let t = Instant::now();
    let max = global_sensitivity(&mut g, root, &vars, &domain, &MaximizeConfig::default())
        .expect("maximization succeeds");

    let b = bundle(&mut g, root, &vars).expect("bundle builds");
    let phi_prog = compile(&g, &[b.grad_norm], &vars).expect("grad norm compiles");
    let (oracle_point, oracle_value) = dense_grid_max(&phi_prog, &QUERY_BOX, 2001);

    let rel = (max.value - oracle_value).abs() / oracle_value.abs();
    let secs = t.elapsed().as_secs_f64();
    report(
        4,
        rel <= 1e-3 && secs < 60.0,
        &format!(
            "global sensitivity sup‖∇f‖ = {:.6} at ({:.4}, {:.4}); dense 2001×2001 \
             oracle {:.6} at ({:.4}, {:.4}); rel dev {rel:.2e} (tol 1e-3); published \
             reference value {PUBLISHED_SENSITIVITY} shown for comparison — the oracle \
             gates this test; {secs:.2}s (cap 60s)",
            max.value, max.argmax[0], max.argmax[1], oracle_value, oracle_point[0],
            oracle_point[1]
        ),
    );
}

#[test]
fn criterion_05_rdp_point_value_and_monotonicity() {
    let t = Instant::now();

    let params = MechanismParams { sigma: 1.0, lipschitz_agg: 1.0, seed: 0 };
    let eps = individual_rdp(2.0, &params, 5f64.sqrt()).expect("valid rdp point").epsilon;
    // (√5)² carries one ulp of squaring error, hence the 1e-12 band
    // rather than literal equality with 5.0.
    let point_ok = (eps - 5.0).abs() <= 1e-12;

    let mut rng = CounterRng::new(0xACC).substream("criterion-5");
    let mut violations = 0usize;
    for _ in 0..1_000 {
        let alpha = rng.next_range(1.0 + 1e-6, 100.0);
        let sigma = rng.next_range(0.1, 10.0);
        let l = rng.next_range(0.0, 5.0);
        let gn = rng.next_range(0.0, 20.0);
        let p = MechanismParams { sigma, lipschitz_agg: l, seed: 0 };
        let base = individual_rdp(alpha, &p, gn).expect("valid draw").epsilon;
        let more_alpha = individual_rdp(alpha * 1.5, &p, gn).expect("valid draw").epsilon;
        let more_gn = individual_rdp(alpha, &p, gn * 2.0).expect("valid draw").epsilon;
        let wider = MechanismParams { sigma: sigma * 2.0, ..p };
        let more_sigma = individual_rdp(alpha, &wider, gn).expect("valid draw").epsilon;
        if more_alpha < base || more_gn < base || more_sigma > base {
            violations += 1;
        }
    }

    let secs = t.elapsed().as_secs_f64();
    report(
        5,
        point_ok && violations == 0 && secs < 1.0,
        &format!(
            "individual_rdp(2, L=1, √5, σ=1) = {eps:.17} (|ε−5| = {:.2e} ≤ 1e-12); \
             monotone in α, grad norm, and 1/σ over 1000 draws ({violations} violations); \
             {secs:.3}s (cap 1s)",
            (eps - 5.0).abs()
        ),
    );
}

#[test]
fn criterion_06_clipping_bounds_norms_and_preserves_small_vectors() {
    let t = Instant::now();
    let c = 0.1;
    let mut rng = CounterRng::new(0xACC).substream("criterion-6");
    let mut bound_failures = 0usize;
    let mut identity_failures = 0usize;
    let mut sub_bound_seen = 0usize;

    for k in 0..10_000 {
        let dim = 1 + rng.next_index(50);
        // Log-uniform scale over the full finite range, with pinned
        // extreme cases mixed in.
        let v: Vec<f64> = match k {
            0 => vec![0.0; 8],
            1 => vec![1e308; 4],
            2 => vec![5e-324; 16],
            3 => vec![1e300, -1e300, 1e-300, -1e-300],
            4 => vec![f64::MAX, f64::MIN],
            _ => {
                let scale = 10f64.powf(rng.next_range(-300.0, 300.0));
                (0..dim).map(|_| rng.next_gaussian() * scale).collect()
            }
        };
        let clipped = clip_l2(&v, c);
        // The clipped vector's components are ≤ c in magnitude, so its
        // norm cannot overflow and needs no rescaling trick.
        let norm: f64 = clipped.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm <= c + 1e-12) {
            bound_failures += 1;
        }

        // Rescale to a strictly sub-bound copy and demand bit identity.
        if norm > 0.0 {
            let shrink: Vec<f64> =
                clipped.iter().map(|x| x * (0.5 * c / norm)).collect();
            let kept = clip_l2(&shrink, c);
            sub_bound_seen += 1;
            if shrink.iter().zip(&kept).any(|(a, b)| a.to_bits() != b.to_bits()) {
                identity_failures += 1;
            }
        }
    }

    let secs = t.elapsed().as_secs_f64();
    report(
        6,
        bound_failures == 0 && identity_failures == 0 && sub_bound_seen > 5_000 && secs < 1.0,
        &format!(
            "‖clip_l2(v, 0.1)‖ ≤ 0.1+1e-12 over 10000 vectors spanning 1e-324..1e308 \
             ({bound_failures} bound failures); {sub_bound_seen} sub-bound vectors \
             returned bit-identically ({identity_failures} failures); {secs:.3}s (cap 1s)"
        ),
    );
}

#[test]
fn criterion_07_tape_evaluation_equals_naive_interpretation() {
    let t = Instant::now();
    let mut rng = CounterRng::new(0xACC).substream("criterion-7");
    let cfg = ExprGenConfig { allow_unsafe: true, ..ExprGenConfig::default() };
    let vars = vec!["a".to_string(), "b".to_string()];
    let mut mismatches = 0usize;
    let mut undefined_seen = 0usize;
    for k in 0..1_000 {
        let mut g = ExprGraph::new();
        let mut gen = ExprGen::new(7_000 + k, cfg.clone());
        let root = gen.gen(&mut g);
        let prog = compile(&g, &[root], &vars).expect("program compiles");
        for _ in 0..3 {
            let x = [rng.next_range(-3.0, 3.0), rng.next_range(-3.0, 3.0)];
            let (naive_value, naive_defined) = naive_eval_ordered(&g, root, &vars, &x);
            let out = prog.evaluate(&x).expect("binding arity");
            if out.defined[0] != naive_defined
                || out.values[0].to_bits() != naive_value.to_bits()
            {
                mismatches += 1;
            }
            if !naive_defined {
                undefined_seen += 1;
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    report(
        7,
        mismatches == 0 && undefined_seen > 0 && secs < 10.0,
        &format!(
            "tape evaluation equals naive recursive interpretation bit-for-bit on 1000 \
             generated expressions × 3 bindings ({mismatches} mismatches; \
             {undefined_seen} bindings exercised undefined paths); {secs:.2}s (cap 10s)"
        ),
    );
}

#[test]
fn criterion_08_sgd_training_reaches_accuracy() {
    let lab = &*LAB;
    let sgd = &*SGD;
    let out = &sgd.outcome;
    let first = out.log.first().expect("log has the initial row");
    let last = out.log.last().expect("log has a final row");

    let sizes_ok = lab.data.train.len() == 2_000 && lab.data.test.len() == 200;
    let pass = sizes_ok
        && last.test_accuracy >= 0.95
        && last.train_loss < first.train_loss
        && out.updates_applied <= 5_000
        && sgd.train_secs < 300.0;
    report(
        8,
        pass,
        &format!(
            "full-batch SGD (2000 train images, η=0.1, seeds {DATA_SEED}/{INIT_SEED}): \
             test accuracy {:.4} on 200 images (≥ 0.95), train loss {:.6} → {:.6}, \
             {} epochs (≤ 5000, converged: {}); training {:.1}s (cap 300s)",
            last.test_accuracy, first.train_loss, last.train_loss, out.updates_applied,
            out.converged, sgd.train_secs
        ),
    );
}

/// Mean of `map` over `inside`, and over the complementary pixels.
fn split_means(map: &[f64; PIXELS], inside: &[usize]) -> (f64, f64) {
    let mut in_sum = 0.0;
    let mut out_sum = 0.0;
    for (i, &v) in map.iter().enumerate() {
        if inside.contains(&i) {
            in_sum += v;
        } else {
            out_sum += v;
        }
    }
    (in_sum / inside.len() as f64, out_sum / (PIXELS - inside.len()) as f64)
}

#[test]
fn criterion_09_max_ps_concentrates_on_cross_class_bar() {
    let lab = &*LAB;
    let weights = &SGD.outcome.final_weights; // training charged to criterion 8

    let t = Instant::now();
    let rep = ps_report(&lab.compiled, weights, &lab.data.test, PsVariant::Fractional, 50)
        .expect("report builds");
    let undefined: usize = rep.undefined_counts.iter().sum();

    // Vertical-bar images (class 0) are most sensitive along the center
    // row — the pixels that would turn them into the other class — and
    // horizontal-bar images (class 1) along the center column.
    let (v_in, v_out) = split_means(&rep.max_abs_map[0], &CENTER_ROW);
    let (h_in, h_out) = split_means(&rep.max_abs_map[1], &CENTER_COL);

    let secs = t.elapsed().as_secs_f64();
    report(
        9,
        v_in > v_out && h_in > h_out && undefined == 0 && secs < 60.0,
        &format!(
            "fractional max-|PS| on the test split concentrates on the cross-class bar: \
             vertical class center-row mean {v_in:.4} > rest {v_out:.4}; horizontal class \
             center-column mean {h_in:.4} > rest {h_out:.4}; {undefined} undefined \
             entries; {secs:.2}s after training (cap 60s)"
        ),
    );
}

#[test]
fn criterion_10_dp_training_shrinks_and_disperses_ps() {
    let lab = &*LAB;
    let sgd_weights = &SGD.outcome.final_weights; // charged to criterion 8
    let dp = &*DPSGD; // DP-SGD training charged here, via dp.train_secs

    let t = Instant::now();
    let stats = |weights: &[f64], split, variant| {
        dispersion_stats(
            &ps_report(&lab.compiled, weights, split, variant, 50).expect("report builds"),
        )
    };
    let frac = PsVariant::Fractional;
    let sgd_test = stats(sgd_weights, &lab.data.test, frac);
    let dp_test = stats(&dp.outcome.final_weights, &lab.data.test, frac);
    let sgd_train = stats(sgd_weights, &lab.data.train, frac);
    let dp_train = stats(&dp.outcome.final_weights, &lab.data.train, frac);
    // The gradient variant moves the other way at these seeds; printed
    // for contrast, not gated.
    let sgd_g = stats(sgd_weights, &lab.data.test, PsVariant::Gradient);
    let dp_g = stats(&dp.outcome.final_weights, &lab.data.test, PsVariant::Gradient);

    let direction = |s: &senskit::nnlab::DispersionStats, d: &senskit::nnlab::DispersionStats| {
        d.pooled_mean_abs < s.pooled_mean_abs && d.mean_normalized_std > s.mean_normalized_std
    };
    let secs = dp.train_secs + t.elapsed().as_secs_f64();

    let mut detail = String::new();
    let _ = write!(
        detail,
        "fractional PS under DP-SGD (C=0.1, multiplier 5.0, seeds \
         {DATA_SEED}/{INIT_SEED}/{DP_SEED}) vs SGD — test split: pooled |PS| mean \
         {:.6} < {:.6} and normalized dispersion {:.4} > {:.4}; train split: {:.6} < \
         {:.6} and {:.4} > {:.4} (all strict); gradient variant for contrast (test): \
         mean {:.6} vs {:.6}, dispersion {:.4} vs {:.4}; {secs:.1}s including DP-SGD \
         training (cap 600s)",
        dp_test.pooled_mean_abs, sgd_test.pooled_mean_abs,
        dp_test.mean_normalized_std, sgd_test.mean_normalized_std,
        dp_train.pooled_mean_abs, sgd_train.pooled_mean_abs,
        dp_train.mean_normalized_std, sgd_train.mean_normalized_std,
        dp_g.pooled_mean_abs, sgd_g.pooled_mean_abs,
        dp_g.mean_normalized_std, sgd_g.mean_normalized_std,
    );
    report(
        10,
        direction(&sgd_test, &dp_test) && direction(&sgd_train, &dp_train) && secs < 600.0,
        &detail,
    );
}

/// Runs the full CLI pipeline into `dir` and returns the rdp stdout.
fn run_pipeline(dir: &Path) -> Vec<u8> {
    let bin = env!("CARGO_BIN_EXE_senskit");
    let out = dir.to_str().unwrap();
    let run = |args: &[&str]| {
        let o = Command::new(bin).args(args).output().expect("binary spawns");
        assert!(
            o.status.success(),
            "`senskit {}` failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&o.stderr)
        );
        o.stdout
    };
    run(&["gen", "--out", out]);
    let data = format!("{out}/dataset.json");
    run(&["train", "--data", &data, "--max-epochs", "200", "--out", out]);
    let weights = format!("{out}/weights.json");
    run(&[
        "ps-report", "--data", &data, "--weights", &weights, "--split", "test", "--out", out,
    ]);
    run(&[
        "analyze", "--expr", QUERY, "--range", "a=1:2", "--range", "b=0.5:3", "--grid", "50",
        "--out", out,
    ]);
    run(&[
        "rdp", "--expr", QUERY, "--range", "a=1:2", "--range", "b=0.5:3", "--at", "a=1,b=0.5",
        "--alpha", "2", "--sigma", "1",
    ])
}

#[test]
fn criterion_11_cli_pipeline_is_deterministic() {
    let t = Instant::now();
    let dir_a = tempdir().expect("temp dir");
    let dir_b = tempdir().expect("temp dir");
    let rdp_a = run_pipeline(dir_a.path());
    let rdp_b = run_pipeline(dir_b.path());

    const PAYLOADS: [&str; 8] = [
        "dataset.json",
        "weights.json",
        "training_log.csv",
        "maxmap.csv",
        "hist.csv",
        "undefined_counts.csv",
        "surface.csv",
        "analysis.json",
    ];
    let mut differing = Vec::new();
    for name in PAYLOADS {
        let a = fs::read(dir_a.path().join(name)).expect("payload exists");
        let b = fs::read(dir_b.path().join(name)).expect("payload exists");
        if a != b {
            differing.push(name);
        }
    }
    if rdp_a != rdp_b {
        differing.push("rdp stdout");
    }
    // Metadata sidecars are the only timestamped files and are excluded;
    // assert they exist so the exclusion stays meaningful.
    for name in ["dataset.meta.json", "train.meta.json", "ps_report.meta.json", "analysis.meta.json"]
    {
        assert!(dir_a.path().join(name).exists(), "missing metadata sidecar {name}");
    }

    let secs = t.elapsed().as_secs_f64();
    report(
        11,
        differing.is_empty(),
        &format!(
            "two identical-seed CLI pipeline runs (gen → train 200 epochs → ps-report → \
             analyze → rdp) produced byte-identical payloads ({} files + rdp stdout; \
             differing: {differing:?}; *.meta.json excluded); {secs:.1}s for both runs",
            PAYLOADS.len()
        ),
    );
}
