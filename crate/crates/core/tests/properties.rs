//! Seed-driven properties of the exact layer and the flow.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use harnad_core::connection::{iso_search, ConnectionS, DEFAULT_ISO_ATTEMPTS};
use harnad_core::criteria::is_irreducible_s;
use harnad_core::dual::{hd, ihd, mc_alpha};
use harnad_core::flow::{Flow, FlowOptions, Path};
use harnad_core::hobject::{h_intertwiner, h_intertwines, is_irreducible_h, is_stable, phi};
use harnad_core::kappa::kappa;
use harnad_core::linalg::{mat_kernel, rank};
use harnad_core::moment::moment_map_check;
use harnad_core::random::*;
use harnad_core::series::gauge_series;
use harnad_core::suite::schlesinger_flow_case;
use harnad_core::family::SingularityFamily;
use harnad_core::theta_xi::{schlesinger_closed_forms, theta_build, xi_build, DualConnection, d_t};
use harnad_core::{Matrix, Qi};
use num_traits::Zero;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

    #[test]
    fn connection_json_round_trip(seed in any::<u64>()) {
        let a = random_connection(&mut rng(seed), 4, 3, 3);
        let text = serde_json::to_string(&a).unwrap();
        let back: ConnectionS<Qi> = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(serde_json::to_string(&back).unwrap(), text);
        prop_assert_eq!(back, a);
    }

    #[test]
    fn direct_sum_is_associative_up_to_iso(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (a, b, c) = (random_connection(&mut r, 2, 2, 2), random_connection(&mut r, 2, 2, 2), random_connection(&mut r, 2, 2, 2));
        let left = a.direct_sum(&b).direct_sum(&c);
        let right = a.direct_sum(&b.direct_sum(&c));
        let out = iso_search(&left, &right, DEFAULT_ISO_ATTEMPTS, seed);
        let w = out.witness().expect("witness");
        prop_assert!(left.intertwines(&right, w));
    }

    #[test]
    fn gauge_action_composes(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(1..=4);
        let k = r.gen_range(1..=3);
        let coeffs: Vec<Matrix<Qi>> = (0..k).map(|_| random_matrix(&mut r, n, n)).collect();
        let conn = ConnectionS::new(n, Matrix::zeros(n, n), vec![harnad_core::connection::Pole { position: Qi::int(0), coeffs }]).unwrap();
        let prec = 4;
        let series = conn.laurent_expand(&Qi::int(0), prec + 2);
        let g = random_jet(&mut r, n, 2);
        let h = random_jet(&mut r, n, 3);
        let two_step = gauge_series(&gauge_series(&series, &h, prec).unwrap(), &g, prec).unwrap();
        let one_step = gauge_series(&series, &g.compose(&h), prec).unwrap();
        prop_assert!(two_step.agrees_with(&one_step, prec));
    }

    #[test]
    fn iso_search_witness_intertwines(seed in any::<u64>()) {
        let mut r = rng(seed);
        let a = random_connection(&mut r, 3, 3, 2);
        let g = random_invertible(&mut r, a.dim());
        let b = a.conjugate(&g).unwrap();
        let w = iso_search(&a, &b, DEFAULT_ISO_ATTEMPTS, seed).witness().cloned().expect("witness");
        prop_assert!(a.intertwines(&b, &w));
    }

    #[test]
    fn kappa_is_a_stable_section(seed in any::<u64>()) {
        let a = random_connection(&mut rng(seed), 5, 3, 3);
        let h = kappa(&a).unwrap();
        prop_assert!(is_stable(&h));
        prop_assert_eq!(phi(&h).unwrap(), a.clone());
        prop_assert_eq!(is_irreducible_h(&h), is_irreducible_s(&a));
    }

    #[test]
    fn equal_phi_gives_unique_witness(seed in any::<u64>()) {
        let mut r = rng(seed);
        let a = random_connection(&mut r, 3, 3, 2);
        let h = kappa(&a).unwrap();
        // (Q g⁻¹, g P) for g in the centralizer of T
        let g = random_centralizer(&mut r, &h).expect("invertible element");
        let gi = harnad_core::linalg::inverse(&g).unwrap();
        let h2 = h.with_qp(&h.q_matrix().mul_mat(&gi), &g.mul_mat(&h.p_matrix())).unwrap();
        prop_assert_eq!(phi(&h2).unwrap(), a);
        let f = h_intertwiner(&h, &h2, seed).witness().cloned().expect("witness");
        prop_assert!(h_intertwines(&h, &h2, &f));
    }

    #[test]
    fn kappa_of_sum_matches_sum_of_kappas(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (a, b) = (random_connection(&mut r, 2, 2, 2), random_connection(&mut r, 2, 2, 2));
        let left = kappa(&a.direct_sum(&b)).unwrap();
        let right = kappa(&a).unwrap().direct_sum(&kappa(&b).unwrap()).unwrap();
        prop_assert!(is_stable(&left) && is_stable(&right));
        prop_assert_eq!(phi(&left).unwrap(), phi(&right).unwrap());
        let f = h_intertwiner(&left, &right, seed).witness().cloned().expect("witness");
        prop_assert!(h_intertwines(&left, &right, &f));
    }

    #[test]
    fn moment_identity(seed in any::<u64>()) {
        let mut r = rng(seed);
        let h = kappa(&random_connection(&mut r, 3, 2, 3)).unwrap();
        let x = random_gtilde_algebra(&mut r, &h);
        let dq = random_int_matrix(&mut r, h.dim_v(), h.dim_w(), 2);
        let dp = random_int_matrix(&mut r, h.dim_w(), h.dim_v(), 2);
        prop_assert!(moment_map_check(&h, &x, &dq, &dp).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn duality_inverts(seed in any::<u64>()) {
        let a = random_irreducible(&mut rng(seed), 3, 3, 2);
        let d = hd(&a).unwrap();
        prop_assert!(is_irreducible_s(&d));
        let back = ihd(&d).unwrap();
        let w = iso_search(&a, &back, DEFAULT_ISO_ATTEMPTS, seed).witness().cloned().expect("witness");
        prop_assert!(a.intertwines(&back, &w));
    }

    #[test]
    fn mc_dimension(seed in any::<u64>(), num in -9i64..9, den in prop::sample::select(vec![2i64, 3, 5])) {
        prop_assume!(num % den != 0);
        let mut r = rng(seed);
        let (a, h, pq) = invertible_pq_instance(&mut r);
        let w = h.dim_w();
        let alpha = Qi::frac(num, den);
        let kernel = w - rank(&pq.add_mat(&Matrix::scalar(w, alpha.clone())));
        prop_assert_eq!(mc_alpha(&a, &alpha).unwrap().connection.dim(), w - kernel);
    }

    #[test]
    fn theta_xi_identities(seed in any::<u64>()) {
        let mut r = rng(seed);
        let f = random_family(&mut r, false);
        let pt = f.base_point::<Qi>();
        let h = seeded_state(&f, &pt, Some(seed)).unwrap();
        let theta = theta_build(&f, &pt, &h).unwrap();
        let xi = xi_build(&f, &pt, &h, &theta).unwrap();
        let dt = d_t(&f, &pt, &h).unwrap();
        prop_assert!(DualConnection::new(&h, &dt, &theta, &xi).unwrap().algebraic_defects().exact);
        // Ξ carries no component along Ker ad_T
        let t = h.t_matrix();
        let w = h.dim_w();
        let ad = t.kron(&Matrix::identity(w)).sub_mat(&Matrix::identity(w).kron(&t.transpose()));
        for k in mat_kernel(&ad) {
            let km = Matrix::from_vec(w, w, k).unwrap();
            for x in xi.values() {
                prop_assert!(km.hermitian_dot(x).is_zero());
            }
        }
    }

    #[test]
    fn schlesinger_forms_match_builders(seed in any::<u64>()) {
        let f = random_family(&mut rng(seed), true);
        let pt = f.base_point::<Qi>();
        let h = seeded_state(&f, &pt, Some(seed)).unwrap();
        let theta = theta_build(&f, &pt, &h).unwrap();
        let xi = xi_build(&f, &pt, &h, &theta).unwrap();
        let (ct, cx) = schlesinger_closed_forms(&f, &pt, &h).unwrap();
        prop_assert!(ct == theta && cx == xi);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 4, ..ProptestConfig::default() })]

    // short Schlesinger runs from random starting gauges
    #[test]
    fn flow_conserves_exponents_and_stability(seed in any::<u64>()) {
        let (spec, waypoints) = schlesinger_flow_case();
        let f = SingularityFamily::new(spec).unwrap();
        let flow = Flow::new(&f, FlowOptions { report_every: 50, ..FlowOptions::default() }).unwrap();
        let start = flow.initial_state(Some(seed)).unwrap();
        let path = Path::from_overrides(&f, &waypoints).unwrap();
        let s = flow.integrate(&start, &path, 200).unwrap().summary;
        prop_assert!(s.stable_throughout);
        prop_assert!(s.max_exponent_drift < 1e-8);
        prop_assert!(s.max_residuals.primal_max() < 1e-5 && s.max_residuals.dual_max() < 1e-5);
    }
}
