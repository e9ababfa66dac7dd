//! Property tests of cross-module invariants.

use proptest::prelude::*;

use crate::estimator::{
    delta_terms, estimate, u_statistic_brute, u_statistic_ordered, u_statistic_symmetric,
    u_statistic_triples, DeltaKernel, JointTable, ProtocolConfig, Scheme, Shots,
};
use crate::observables::{o_corr, o_plus};
use crate::parallel::Execution;
use crate::permgroup::{Group, Permutation};
use crate::qstate::{self, random_mixed};
use crate::rng::RandomSource;
use crate::sweep::{parse_counts, prefix_estimates};
use crate::weingarten::{permutation_matrix, WeingartenTable};

fn perm(t: usize) -> impl Strategy<Value = Permutation> {
    Just((0..t).collect::<Vec<usize>>())
        .prop_shuffle()
        .prop_map(|m| Permutation::new(m).unwrap())
}

fn shots(alphabet: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0..alphabet, 3..12)
}

fn histogram(shots: &[usize], alphabet: usize) -> Vec<u64> {
    let mut c = vec![0u64; alphabet];
    for &s in shots {
        c[s] += 1;
    }
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn composition_is_associative_with_inverses(p in perm(5), q in perm(5), r in perm(5)) {
        prop_assert_eq!(p.compose(&q).compose(&r), p.compose(&q.compose(&r)));
        prop_assert!(p.compose(&p.inverse()).is_identity());
        let cycles: usize = p.cycles().iter().map(Vec::len).sum();
        prop_assert_eq!(cycles, 5);
    }

    #[test]
    fn classes_are_conjugation_invariant(p in perm(4), g in perm(4)) {
        let grp = Group::cached(4).unwrap();
        let conj = g.compose(&p).compose(&g.inverse());
        prop_assert_eq!(grp.class_of(grp.index_of(&p)), grp.class_of(grp.index_of(&conj)));
    }

    #[test]
    fn permutation_matrices_compose_in_reverse(p in perm(3), q in perm(3), d in 2usize..4) {
        // W_p |c> = |c o p>, so W_p W_q = W_{q o p}
        let lhs = permutation_matrix(&q.compose(&p), d);
        let rhs = permutation_matrix(&p, d) * permutation_matrix(&q, d);
        prop_assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn twirl_fixes_permutations_and_is_idempotent(p in perm(3), d in 2usize..5, seed in any::<u64>()) {
        let tab = WeingartenTable::build(3, d).unwrap();
        let w = permutation_matrix(&p, d);
        prop_assert!((tab.twirl_dense(&w, 4096).unwrap() - &w).norm() < 1e-9);
        let mut rng = RandomSource::new(seed);
        let x = qstate::random_mixed(d * d, d, 2, &mut rng).unwrap().data().clone();
        let once = tab.twirl_dense(&x, 4096).unwrap();
        let twice = tab.twirl_dense(&once, 4096).unwrap();
        prop_assert!((once - twice).norm() < 1e-9);
    }

    #[test]
    fn symmetric_ustat_matches_brute(s in shots(4), d in 4usize..7) {
        let o = o_plus(d).unwrap();
        let counts = histogram(&s, d);
        let w = [o.coefficient(&[0, 1, 2]), o.coefficient(&[0, 0, 1]), o.coefficient(&[0, 0, 0])];
        let fast = u_statistic_symmetric(&counts, w).unwrap();
        let brute = u_statistic_brute(&s, |t| o.coefficient(t)).unwrap();
        prop_assert!((fast - brute).abs() < 1e-9 * brute.abs().max(1.0));
        let via = u_statistic_triples(&counts, |t| o.coefficient(t), true).unwrap();
        prop_assert!((via - brute).abs() < 1e-9 * brute.abs().max(1.0));
    }

    #[test]
    fn ordered_ustat_matches_brute(s in shots(3), w in prop::collection::vec(-2.0f64..2.0, 27)) {
        let f = |x: usize, y: usize, z: usize| w[9 * x + 3 * y + z];
        let counts = histogram(&s, 3);
        let fast = u_statistic_ordered(&counts, f).unwrap();
        let brute = u_statistic_brute(&s, |t| f(t[0], t[1], t[2])).unwrap();
        prop_assert!((fast - brute).abs() < 1e-9);
    }

    #[test]
    fn delta_kernel_matches_brute(s in prop::collection::vec(0usize..6, 3..10)) {
        let (oa, ob) = o_corr(2, 3).unwrap();
        let kernel = DeltaKernel::product(&delta_terms(&oa), &delta_terms(&ob));
        let counts = histogram(&s, 6);
        let fast = kernel.u_statistic(&JointTable::from_counts(&counts, 2, 3).unwrap()).unwrap();
        let brute = u_statistic_brute(&s, |t| {
            kernel.evaluate([t[0] / 3, t[1] / 3, t[2] / 3], [t[0] % 3, t[1] % 3, t[2] % 3])
        })
        .unwrap();
        prop_assert!((fast - brute).abs() < 1e-9 * brute.abs().max(1.0));
    }

    #[test]
    fn random_states_are_valid(seed in any::<u64>(), rank in 1usize..5) {
        let mut rng = RandomSource::new(seed);
        let rho = random_mixed(2, 2, rank, &mut rng).unwrap();
        prop_assert!((rho.data().trace().re - 1.0).abs() < 1e-12);
        prop_assert!(rho.data().clone().symmetric_eigen().eigenvalues.iter().all(|&l| l > -1e-12));
        // the partial transpose preserves the purity
        let p2 = qstate::pt_moment(&rho, 2).unwrap();
        prop_assert!((p2 - qstate::moment(&rho, 2)).abs() < 1e-12);
        prop_assert!(qstate::moment(&rho, 3) <= 1.0 + 1e-12);
    }

    #[test]
    fn schmidt_and_dense_paths_agree(seed in any::<u64>(), a in perm(3), b in perm(3)) {
        let mut rng = RandomSource::new(seed);
        let rho = qstate::haar_pure(4, &mut rng).unwrap().with_bipartition(2, 2).unwrap();
        let x = qstate::permutation_expectation(&rho, &a, &b).unwrap();
        let y = qstate::permutation_expectation_dense(&rho, &a, &b).unwrap();
        prop_assert!((x - y).norm() < 1e-10);
    }

    #[test]
    fn geometric_grids_are_increasing(start in 1u64..50, factor in 2u64..5, span in 1u64..400) {
        let v = parse_counts("k", &format!("{start}..{}x{factor}", start + span)).unwrap();
        prop_assert_eq!(v[0], start);
        prop_assert!(v.windows(2).all(|w| w[1] == w[0] * factor));
        prop_assert!(*v.last().unwrap() <= start + span);
    }

    #[test]
    fn longest_prefix_is_the_full_mean(xs in prop::collection::vec(-5.0f64..5.0, 2..40), w in -2.0f64..2.0) {
        let n = xs.len() as u64;
        let est = prefix_estimates(&[(w, xs.clone())], &[1, n]);
        prop_assert!((est[1] - w * xs.iter().sum::<f64>() / n as f64).abs() < 1e-12);
        prop_assert!((est[0] - w * xs[0]).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn estimates_are_schedule_independent(seed in any::<u64>(), n_m in prop_oneof![Just(Shots::Exact), (3u64..12).prop_map(Shots::Finite)]) {
        let rho = qstate::noisy_bell(2, 0.4).unwrap();
        let cfg = ProtocolConfig::new(Scheme::Neg, 2, 2, 12, n_m, seed).with_aux(9, n_m);
        let a = estimate(&rho, &cfg).unwrap();
        let b = estimate(&rho, &cfg.clone().with_execution(Execution::Sequential)).unwrap();
        prop_assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        prop_assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
    }
}
