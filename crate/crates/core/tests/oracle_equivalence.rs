mod common;

use std::time::Instant;

use mce_core::oracle::{exact_posterior, ground_network};
use mce_core::{parse_kb, parse_query, run_query, validate_kb, Factor, Policy, RunConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn engine_agrees_with_enumeration_on_random_kbs() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let start = Instant::now();
    for case in 0..200 {
        let g = common::random_kb(&mut rng, 6);
        let kb = parse_kb(&g.text).unwrap_or_else(|e| panic!("case {case}: {e}\n{}", g.text));
        assert!(validate_kb(&kb).is_empty(), "case {case}: {:?}", validate_kb(&kb));
        let q = parse_query(&g.query, &kb).unwrap();
        let exact: Factor<f64> = exact_posterior(&ground_network(&kb, &q).unwrap(), &q).unwrap();
        for policy in [Policy::Default, Policy::ConstructionFirst, Policy::Random(case)] {
            let got = run_query::<f64>(&kb, &q, &RunConfig { policy: policy.clone(), ..RunConfig::default() })
                .unwrap_or_else(|e| panic!("case {case} {policy:?}: {e}\n{}{}", g.text, g.query));
            let diff = got.posterior.unwrap().max_abs_diff(&exact).unwrap();
            assert!(diff < 1e-9, "case {case} {policy:?}: off by {diff}\n{}{}", g.text, g.query);
        }
    }
    assert!(start.elapsed().as_secs() < 60);
}

#[test]
fn rational_engine_is_exact() {
    use num_rational::Rational64;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..30 {
        let g = common::random_kb(&mut rng, 4);
        let kb = parse_kb(&g.text).unwrap();
        let q = parse_query(&g.query, &kb).unwrap();
        let exact: Factor<Rational64> = exact_posterior(&ground_network(&kb, &q).unwrap(), &q).unwrap();
        let got = run_query::<Rational64>(&kb, &q, &RunConfig::default()).unwrap().posterior.unwrap();
        assert_eq!(got, exact, "{}{}", g.text, g.query);
    }
}
