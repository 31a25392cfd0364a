use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed};

use sqlab::discrimination::{random_density_operator, schatten1_diff};
use sqlab::instances::{haar_unit_vector, Field};
use sqlab::seed::rng_for;
use sqlab::stats::chi_square_gof;
use sqlab::vector_io::{format_dense_vector, parse_dense_vector};
use sqlab::{Complex64, ImplicitKind, ImplicitVector, SqHandle};

fn config(cases: u32) -> Config {
    Config { cases, rng_seed: RngSeed::Fixed(0x5151), failure_persistence: None, ..Config::default() }
}

fn complex_entries(max_qubits: u32) -> impl Strategy<Value = Vec<Complex64>> {
    (0..=max_qubits).prop_flat_map(|n| {
        prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3).prop_map(|(re, im)| Complex64::new(re, im)), 1 << n)
    })
}

fn implicit_kind(n: u32) -> impl Strategy<Value = ImplicitKind> {
    let len = 1u64 << n;
    prop_oneof![
        Just(ImplicitKind::AllPlus),
        (1..=len).prop_map(ImplicitKind::MinusAt),
        (0..len).prop_map(ImplicitKind::SignPattern),
    ]
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn schatten_triangle_inequality(seed in any::<u64>(), dim in 2usize..=8) {
        let mut rng = rng_for(seed, &[]);
        let a = random_density_operator(dim, dim, &mut rng).unwrap();
        let b = random_density_operator(dim, 1, &mut rng).unwrap();
        let c = random_density_operator(dim, 2, &mut rng).unwrap();
        let (ab, bc, ac) = (schatten1_diff(&a, &b).unwrap(), schatten1_diff(&b, &c).unwrap(), schatten1_diff(&a, &c).unwrap());
        prop_assert!(ac <= ab + bc + 1e-12);
        prop_assert!((0.0..=2.0 + 1e-12).contains(&ab));
        prop_assert!((ab - schatten1_diff(&b, &a).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn query_is_bit_exact(v in complex_entries(6)) {
        prop_assume!(v.iter().any(|z| z.norm_sqr() > 0.0));
        let h = SqHandle::build_dense(v.clone()).unwrap();
        for (i, z) in v.iter().enumerate() {
            let q = h.query(i as u64 + 1).unwrap();
            prop_assert_eq!(q.re.to_bits(), z.re.to_bits());
            prop_assert_eq!(q.im.to_bits(), z.im.to_bits());
        }
        prop_assert_eq!(h.stats().query_calls, v.len() as u64);
    }

    #[test]
    fn dense_text_round_trip(v in complex_entries(5)) {
        prop_assert_eq!(parse_dense_vector(&format_dense_vector(&v)).unwrap(), v);
    }

    #[test]
    fn dense_and_implicit_backings_agree(
        (n, kind) in (1u32..=6).prop_flat_map(|n| (Just(n), implicit_kind(n))),
        scale in 0.01f64..10.0,
    ) {
        let spec = ImplicitVector::new(kind, n, scale).unwrap();
        let implicit = SqHandle::build_implicit(spec).unwrap();
        let dense = SqHandle::from_dense(spec.materialize().unwrap()).unwrap();
        for i in 1..=(1u64 << n) {
            prop_assert_eq!(implicit.query(i).unwrap(), dense.query(i).unwrap());
        }
        let (a, b) = (implicit.query_norm().unwrap(), dense.query_norm().unwrap());
        prop_assert!((a - b).abs() <= 1e-12 * a);
        let (p, q) = (implicit.sampling_distribution().unwrap(), dense.sampling_distribution().unwrap());
        prop_assert!(p.iter().zip(&q).all(|(a, b)| (a - b).abs() <= 1e-15));
    }
}

proptest! {
    #![proptest_config(config(12))]

    #[test]
    fn sampling_passes_chi_square(seed in any::<u64>(), n in 1u32..=6) {
        let mut rng = rng_for(seed, &[]);
        let x = haar_unit_vector(1 << n, Field::Complex, &mut rng).unwrap().vector;
        let h = SqHandle::build_dense(x).unwrap();
        let probs = h.sampling_distribution().unwrap();
        let mut counts = vec![0u64; probs.len()];
        for _ in 0..20_000 {
            counts[(h.sample(&mut rng).unwrap() - 1) as usize] += 1;
        }
        let gof = chi_square_gof(&counts, &probs).unwrap();
        prop_assert!(gof.passes(1e-4), "p = {}", gof.p_value);
        prop_assert_eq!(h.stats().sample_calls, 20_000);
    }

    #[test]
    fn implicit_sampling_is_uniform(seed in any::<u64>(), n in 1u32..=5, kind_bits in any::<u64>()) {
        let len = 1u64 << n;
        let spec = ImplicitVector::new(ImplicitKind::SignPattern(kind_bits % len), n, 1.0).unwrap();
        let h = SqHandle::build_implicit(spec).unwrap();
        let mut rng = rng_for(seed, &[]);
        let mut counts = vec![0u64; len as usize];
        for _ in 0..20_000 {
            counts[(h.sample(&mut rng).unwrap() - 1) as usize] += 1;
        }
        let gof = chi_square_gof(&counts, &vec![1.0 / len as f64; len as usize]).unwrap();
        prop_assert!(gof.passes(1e-4), "p = {}", gof.p_value);
    }
}
