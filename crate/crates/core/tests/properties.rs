mod common;

use codesign::morphology::{
    default_design, parse_design, serialize_design, validate_design, DesignBounds, DesignParams,
    ParamId,
};
use codesign::reward::{eval_reward_step, parse_reward, Expr};
use common::{close, oracle_eval, random_expr, random_record};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Default design with every parameter scaled by `1 + f`, kept in bounds.
fn design_from(fracs: &[f64]) -> DesignParams {
    let b = DesignBounds::default();
    let mut d = default_design();
    for (id, f) in ParamId::all().zip(fracs) {
        d.set(id, b.interval(id).clamp(d.get(id) * (1.0 + f)));
    }
    d
}

fn expr_from_seed(seed: u64, depth: usize) -> Expr {
    random_expr(&mut ChaCha8Rng::seed_from_u64(seed), depth)
}

proptest! {
    #[test]
    fn design_xml_round_trips(fracs in prop::collection::vec(-0.3f64..=0.3, 19)) {
        let d = design_from(&fracs);
        prop_assume!(validate_design(&d, &DesignBounds::default()).is_ok());
        let text = serialize_design(&d);
        let back = parse_design(&text).unwrap();
        prop_assert_eq!(back, d);
        prop_assert_eq!(serialize_design(&back), text);
    }

    #[test]
    fn printed_programs_reparse_to_the_same_tree(seed in any::<u64>(), depth in 0usize..6) {
        let e = expr_from_seed(seed, depth);
        let text = e.to_string();
        let p = parse_reward(&text).unwrap();
        prop_assert_eq!(&p.ast, &e, "{}", text);
        prop_assert_eq!(p.ast.to_string(), text);
    }

    #[test]
    fn evaluator_matches_tree_walk(seed in any::<u64>(), depth in 0usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = random_expr(&mut rng, depth);
        let p = parse_reward(&e.to_string()).unwrap();
        for _ in 0..10 {
            let rec = random_record(&mut rng);
            let fast = eval_reward_step(&p, &rec).unwrap_or_else(|err| err.0);
            prop_assert!(close(fast, oracle_eval(&e, &rec), 1e-12));
        }
    }
}

#[test]
fn most_perturbed_designs_are_feasible() {
    use rand::Rng;
    let b = DesignBounds::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let ok = (0..200)
        .filter(|_| {
            let fracs: Vec<f64> = (0..19).map(|_| rng.random_range(-0.3..=0.3)).collect();
            validate_design(&design_from(&fracs), &b).is_ok()
        })
        .count();
    assert!(ok > 100, "{ok} of 200 feasible");
}
