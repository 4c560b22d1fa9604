use icechain::chain::Glauber;
use icechain::configuration::{is_valid_on, Configuration};
use icechain::coupling::coupled_step;
use icechain::decomposition::{decompose, Convention};
use icechain::exactness::{check_stationarity, enumerate_omega, exact_mu, transition_matrix, Caps};
use icechain::graph::gen_random_coherent;
use icechain::Rational;
use num::{One, Zero};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn model(seed: u64, vertices: usize, b: Rational) -> Option<Glauber> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = gen_random_coherent(vertices, &mut rng, 200)?;
    let d = decompose(&g).ok()?;
    if !d.self_intersection_free() {
        return None;
    }
    Glauber::for_instance(&d, Convention::default(), b).ok()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn circuits_partition_the_edges(seed in any::<u64>(), vertices in 1usize..9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = gen_random_coherent(vertices, &mut rng, 200);
        prop_assume!(g.is_some());
        {
            let g = g.unwrap();
            let d = decompose(&g).unwrap();
            let mut seen: Vec<usize> = d.circuits.iter().flat_map(|c| c.edge_ids()).collect();
            seen.sort_unstable();
            let all: Vec<usize> = (0..g.edges.len()).collect();
            prop_assert_eq!(seen, all);
        }
    }

    #[test]
    fn steps_stay_valid_and_move_one_circuit(seed in any::<u64>(), vertices in 2usize..8, u in 0.0f64..1.0, bits in any::<u64>()) {
        let m = model(seed, vertices, Rational::new(1.into(), 3.into()));
        prop_assume!(m.is_some());
        let m = m.unwrap();
        let n = m.n();
        let mut x = Configuration::zeros(n);
        for i in 0..n {
            if bits >> (i % 64) & 1 == 1 && m.graph().neighbors(i).iter().all(|&j| !x.get(j)) {
                x.set(i, true);
            }
        }
        let y = Configuration::zeros(n);
        for circuit in 0..n {
            let draw = icechain::chain::MoveDraw { circuit, u };
            let (x2, y2) = coupled_step(&m, &x, &y, draw);
            prop_assert!(is_valid_on(&x2, m.graph()) && is_valid_on(&y2, m.graph()));
            prop_assert!(x.hamming(&x2) <= 1 && y.hamming(&y2) <= 1);
            let (a, b) = coupled_step(&m, &x, &x, draw);
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn mu_is_stationary(seed in any::<u64>(), vertices in 2usize..6, num in 1i64..4, den in 1i64..6) {
        let m = model(seed, vertices, Rational::new(num.into(), den.into()));
        prop_assume!(m.is_some());
        let m = m.unwrap();
        let space = enumerate_omega(m.graph(), Caps::default()).unwrap();
        let mu = exact_mu(&space, m.graph(), m.b());
        prop_assert_eq!(mu.iter().sum::<Rational>(), Rational::one());
        let p = transition_matrix(&space, &m);
        for i in 0..space.len() {
            prop_assert_eq!(p.row_sum(i), Rational::one());
        }
        prop_assert_eq!(check_stationarity(&p, &mu), Rational::zero());
    }
}
