//! Cross-cutting semantic properties of the expression layer.
//!
//! The headline property: construction-time simplification never changes
//! the value of a defined expression. Two generators with the same seed
//! build the same random tree into a simplifying and a non-simplifying
//! graph; the unsimplified tree is evaluated with the naive recursive
//! interpreter and the simplified one through the compiled tape, so the
//! check also spans both evaluation paths.
//!
//! Simplification may make *more* points defined (`x − x → 0` erases a
//! division that might have blown up), never fewer; that direction is
//! asserted too.

use std::collections::HashMap;

use senskit::testkit::{close_rel, naive_eval, ExprGen, ExprGenConfig};
use senskit::{compile, CounterRng, ExprGraph};

#[test]
fn simplification_preserves_defined_values() {
    let vars: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
    let mut rng = CounterRng::new(0x51319).substream("simplify-bindings");
    let mut checked = 0usize;
    let mut simplified_saved = 0usize;

    for case in 0..1000u64 {
        let cfg = ExprGenConfig { max_depth: 6, vars: vars.clone(), allow_unsafe: false };
        let mut gen_plain = ExprGen::new(case, cfg.clone());
        let mut gen_simpl = ExprGen::new(case, cfg);

        let mut plain = ExprGraph::without_simplification();
        let mut simpl = ExprGraph::new();
        let root_plain = gen_plain.gen(&mut plain);
        let root_simpl = gen_simpl.gen(&mut simpl);

        let program = compile(&simpl, &[root_simpl], &vars).unwrap();

        for _ in 0..5 {
            let point: Vec<f64> = (0..vars.len()).map(|_| rng.next_range(0.1, 3.0)).collect();
            let bindings: HashMap<String, f64> = vars
                .iter()
                .cloned()
                .zip(point.iter().copied())
                .collect();
            let (v_plain, def_plain) = naive_eval(&plain, root_plain, &bindings);
            let out = program.evaluate(&point).unwrap();
            let (v_simpl, def_simpl) = (out.values[0], out.defined[0]);

            if def_plain {
                assert!(
                    def_simpl,
                    "case {case}: simplification lost definedness at {point:?}"
                );
                assert!(
                    close_rel(v_plain, v_simpl, 1e-12, 1e-12),
                    "case {case}: {v_plain} vs {v_simpl} at {point:?}"
                );
                checked += 1;
            } else if def_simpl {
                // Allowed direction: a rewrite erased the violating
                // subexpression (e.g. x − x → 0).
                simplified_saved += 1;
            }
        }
    }
    assert!(checked > 4000, "only {checked} defined comparisons");
    // The safe generator rarely hits domain violations, so don't demand
    // the asymmetric cases — just record that the loop saw real work.
    let _ = simplified_saved;
}

#[test]
fn simplified_graphs_are_never_larger() {
    let vars: Vec<String> = ["a", "b"].iter().map(|s| s.to_string()).collect();
    for case in 0..200u64 {
        let cfg = ExprGenConfig { max_depth: 5, vars: vars.clone(), allow_unsafe: false };
        let mut gen_plain = ExprGen::new(case, cfg.clone());
        let mut gen_simpl = ExprGen::new(case, cfg);
        let mut plain = ExprGraph::without_simplification();
        let mut simpl = ExprGraph::new();
        gen_plain.gen(&mut plain);
        gen_simpl.gen(&mut simpl);
        assert!(
            simpl.len() <= plain.len(),
            "case {case}: simplified {} > plain {}",
            simpl.len(),
            plain.len()
        );
    }
}
