mod common;

use common::Shape;
use sddip_core::clock::FrozenClock;
use sddip_core::extform::{solve_extensive_form, DEFAULT_NODE_CAP};
use sddip_core::mip::MipLimits;
use sddip_core::nested::{run_nested_benders, NestedConfig};
use sddip_core::sddip::{estimate_gap, run, BackwardMode, CutFamily, SddipConfig, Termination};

fn shape() -> Shape {
    Shape { stages: 3, bits: 4, rows: 3, scens: 2, int_locals: 1, state_hi: 1 }
}

#[test]
fn lower_bound_is_monotone_and_below_the_optimum() {
    for seed in 0..4 {
        let m = common::covering_model(&mut common::rng(seed), shape());
        let opt = solve_extensive_form(&m, DEFAULT_NODE_CAP, &MipLimits::default()).unwrap().objective;
        for family in [CutFamily::IntegerL, CutFamily::Lagrangian] {
            let cfg = SddipConfig { cut_family: family, delta: 0.0, iteration_limit: 25, seed, ..SddipConfig::default() };
            let res = run(&m, &cfg, &FrozenClock).unwrap();
            for w in res.records.windows(2) {
                assert!(w[1].lb >= w[0].lb);
            }
            assert!(res.lower_bound() <= opt + 1e-6 * (1.0 + opt.abs()));
        }
    }
}

#[test]
fn seeds_reproduce_runs() {
    let m = common::covering_model(&mut common::rng(11), shape());
    let cfg = SddipConfig { iteration_limit: 10, seed: 3, ..SddipConfig::default() };
    let a = run(&m, &cfg, &FrozenClock).unwrap();
    let b = run(&m, &cfg, &FrozenClock).unwrap();
    assert_eq!(a, b);
    let other = run(&m, &SddipConfig { seed: 4, ..cfg }, &FrozenClock).unwrap();
    assert_ne!(a.records.iter().map(|r| r.costs.clone()).collect::<Vec<_>>(),
               other.records.iter().map(|r| r.costs.clone()).collect::<Vec<_>>());
}

#[test]
fn exhaustive_gap_uses_the_exact_policy_cost() {
    let m = common::covering_model(&mut common::rng(5), shape());
    let cfg = SddipConfig { iteration_limit: 40, ..SddipConfig::default() };
    let res = run(&m, &cfg, &FrozenClock).unwrap();
    let gap = estimate_gap(&m, &res.pools, res.lower_bound(), &cfg).unwrap();
    assert!(gap.exhaustive);
    assert_eq!(gap.paths, 4);
    assert_eq!(gap.right_end, gap.mean);
    let opt = solve_extensive_form(&m, DEFAULT_NODE_CAP, &MipLimits::default()).unwrap().objective;
    // a policy never beats the optimum
    assert!(gap.mean >= opt - 1e-6 * (1.0 + opt.abs()));
}

#[test]
fn nested_benders_matches_the_extensive_form() {
    for seed in 0..4 {
        let m = common::covering_model(&mut common::rng(100 + seed), shape());
        let opt = solve_extensive_form(&m, DEFAULT_NODE_CAP, &MipLimits::default()).unwrap().objective;
        for backward in [BackwardMode::Default, BackwardMode::Alternating] {
            let cfg = NestedConfig { backward, gap_threshold: 1e-6, ..NestedConfig::default() };
            let res = run_nested_benders(&m, &cfg, &FrozenClock).unwrap();
            assert_eq!(res.termination, Termination::Converged);
            assert!((res.lower_bound() - opt).abs() <= 1e-5 * (1.0 + opt.abs()), "{} vs {opt}", res.lower_bound());
        }
    }
}
