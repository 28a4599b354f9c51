use gridgap::chain::{
    audit, build_metropolis, build_metropolis_log, dirichlet_form, variance, ChainJson, Grid,
    GridChain,
};
use gridgap::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_weights(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| (rng.random::<f64>() * 6.0 - 3.0).exp())
        .collect()
}

/// Metropolis kernel straight from the acceptance rule.
fn brute_kernel(grid: &Grid, f: &[f64]) -> Vec<Vec<f64>> {
    let n = grid.len();
    let p = 1.0 / (2 * grid.dim()) as f64;
    let mut m = vec![vec![0.0; n]; n];
    for x in 0..n {
        for y in 0..n {
            let cx = grid.coords(x);
            let cy = grid.coords(y);
            let dist: i64 = cx.iter().zip(&cy).map(|(a, b)| (a - b).abs()).sum();
            if dist == 1 {
                m[x][y] = p * (f[y] / f[x]).min(1.0);
            }
        }
        let out: f64 = m[x].iter().sum();
        m[x][x] = 1.0 - out;
    }
    m
}

fn brute_energy(chain: &GridChain, u: &[f64], v: &[f64]) -> f64 {
    let pi = chain.pi();
    let mut s = 0.0;
    for x in 0..chain.len() {
        for y in 0..chain.len() {
            s += (u[x] - u[y]) * (v[x] - v[y]) * pi[x] * chain.transition(x, y);
        }
    }
    0.5 * s
}

fn brute_variance(chain: &GridChain, u: &[f64]) -> f64 {
    let pi = chain.pi();
    let mut s = 0.0;
    for x in 0..chain.len() {
        for y in 0..chain.len() {
            s += (u[x] - u[y]).powi(2) * pi[x] * pi[y];
        }
    }
    0.5 * s
}

#[test]
fn two_state_kernels() {
    let g = Grid::interval(1, 2).unwrap();
    let c = build_metropolis(&g, &[1.0, 1.0]).unwrap();
    for (x, y) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
        assert_eq!(c.transition(x, y), 0.5);
    }
    assert_eq!(c.conductance(0), 0.25);

    let c = build_metropolis(&g, &[1.0, 2.0]).unwrap();
    assert!((c.transition(0, 1) - 0.5).abs() < 1e-15);
    assert!((c.transition(0, 0) - 0.5).abs() < 1e-15);
    assert!((c.transition(1, 0) - 0.25).abs() < 1e-15);
    assert!((c.transition(1, 1) - 0.75).abs() < 1e-15);
    assert!((c.conductance(0) - 1.0 / 6.0).abs() < 1e-15);
}

#[test]
fn corner_states_of_the_smallest_square() {
    let g = Grid::cube(2, 2).unwrap();
    let c = build_metropolis(&g, &[1.0; 4]).unwrap();
    for x in 0..4 {
        assert_eq!(c.holding(x), 0.5);
        let moves: Vec<f64> = (0..4)
            .filter(|&y| y != x && c.transition(x, y) > 0.0)
            .map(|y| c.transition(x, y))
            .collect();
        assert_eq!(moves, vec![0.25, 0.25]);
    }
}

#[test]
fn kernel_matches_acceptance_rule() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for ranges in [
        vec![(-3, 4)],
        vec![(1, 3), (1, 4)],
        vec![(0, 2), (-1, 1), (0, 1)],
    ] {
        let g = Grid::new(&ranges).unwrap();
        let f = random_weights(&mut rng, g.len());
        let c = build_metropolis(&g, &f).unwrap();
        let m = brute_kernel(&g, &f);
        let dense = c.transition_dense();
        for x in 0..g.len() {
            for y in 0..g.len() {
                assert!((c.transition(x, y) - m[x][y]).abs() < 1e-15, "{x} {y}");
                assert!((dense[(x, y)] - m[x][y]).abs() < 1e-15);
            }
        }
        let a = audit(&c);
        assert!(a.passed(1e-14), "{a:?}");
    }
}

#[test]
fn enumeration_is_row_major() {
    let g = Grid::new(&[(1, 3), (-1, 2)]).unwrap();
    assert_eq!(g.len(), 12);
    assert_eq!(g.coords(0), vec![1, -1]);
    assert_eq!(g.coords(1), vec![1, 0]);
    assert_eq!(g.coords(4), vec![2, -1]);
    assert_eq!(g.index(&[3, 2]), Some(11));
    assert_eq!(g.index(&[4, 0]), None);
    for s in 0..g.len() {
        assert_eq!(g.index(&g.coords(s)), Some(s));
    }
    assert_eq!(
        Grid::centered(3, 2).unwrap().ranges(),
        vec![(-2, 3), (-2, 3)]
    );
}

#[test]
fn dirichlet_form_and_variance_match_double_sums() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for ranges in [vec![(-4, 5)], vec![(1, 4), (1, 5)]] {
        let g = Grid::new(&ranges).unwrap();
        let c = build_metropolis(&g, &random_weights(&mut rng, g.len())).unwrap();
        for _ in 0..100 {
            let u: Vec<f64> = (0..g.len()).map(|_| rng.random::<f64>() - 0.5).collect();
            let v: Vec<f64> = (0..g.len()).map(|_| rng.random::<f64>() - 0.5).collect();
            let e = dirichlet_form(&c, &u, &u).unwrap();
            let want = brute_energy(&c, &u, &u);
            assert!((e - want).abs() <= 1e-10 * want, "{e} vs {want}");
            let uv = dirichlet_form(&c, &u, &v).unwrap();
            assert!((uv - dirichlet_form(&c, &v, &u).unwrap()).abs() < 1e-15);
            assert!((uv - brute_energy(&c, &u, &v)).abs() <= 1e-10 * want.max(1e-300));
            let var = variance(&c, &u).unwrap();
            let want = brute_variance(&c, &u);
            assert!((var - want).abs() <= 1e-10 * want);
        }
    }
}

#[test]
fn quadratic_form_examples() {
    let g = Grid::interval(1, 2).unwrap();
    let c = build_metropolis(&g, &[1.0, 1.0]).unwrap();
    let u = [0.0, 1.0];
    // One term per unoriented edge: Q(e) |du|^2 = 1/4.
    assert!((dirichlet_form(&c, &u, &u).unwrap() - 0.25).abs() < 1e-15);
    assert!((variance(&c, &u).unwrap() - 0.25).abs() < 1e-15);
    assert_eq!(dirichlet_form(&c, &[3.0, 3.0], &[3.0, 3.0]).unwrap(), 0.0);
    assert_eq!(variance(&c, &[3.0, 3.0]).unwrap(), 0.0);
}

#[test]
fn variance_is_the_least_mean_square() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = Grid::new(&[(1, 5), (1, 3)]).unwrap();
    let c = build_metropolis(&g, &random_weights(&mut rng, g.len())).unwrap();
    let u: Vec<f64> = (0..g.len()).map(|_| rng.random::<f64>()).collect();
    let msq = |xi: f64| -> f64 {
        u.iter()
            .zip(c.pi())
            .map(|(v, p)| (v - xi).powi(2) * p)
            .sum()
    };
    let mean = c.target().expectation(&u);
    let var = variance(&c, &u).unwrap();
    assert!((msq(mean) - var).abs() < 1e-14);
    let best = (0..=2000)
        .map(|i| i as f64 / 2000.0)
        .map(msq)
        .fold(f64::INFINITY, f64::min);
    assert!(var <= best + 1e-15);
    assert!(best - var < 1e-6);
}

#[test]
fn steep_targets_keep_positive_mass() {
    let g = Grid::cube(48, 2).unwrap();
    let lw: Vec<f64> = (0..g.len())
        .map(|s| 6.0 * (g.coord(s, 0) + g.coord(s, 1)) as f64)
        .collect();
    let c = build_metropolis_log(&g, lw).unwrap();
    assert!(c.target().pi_min() > 0.0);
    assert!(c.target().log_pi_min() < -500.0);
    let total: f64 = c.pi().iter().sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert!(audit(&c).passed(1e-12));
}

#[test]
fn bad_inputs_are_rejected() {
    let g = Grid::interval(1, 4).unwrap();
    assert!(matches!(
        build_metropolis(&g, &[1.0, 2.0, 0.0, 1.0]),
        Err(Error::NonPositiveWeight { state: 2, .. })
    ));
    assert!(matches!(
        build_metropolis(&g, &[1.0, -1.0, 1.0, 1.0]),
        Err(Error::NonPositiveWeight { state: 1, .. })
    ));
    assert!(matches!(
        build_metropolis(&g, &[1.0; 3]),
        Err(Error::DimensionMismatch {
            expected: 4,
            got: 3
        })
    ));
    assert!(matches!(Grid::new(&[]), Err(Error::BadGrid(_))));
    assert!(matches!(Grid::interval(3, 2), Err(Error::BadGrid(_))));
    let c = build_metropolis(&g, &[1.0; 4]).unwrap();
    assert!(matches!(
        dirichlet_form(&c, &[0.0; 4], &[0.0; 5]),
        Err(Error::DimensionMismatch { .. })
    ));
    assert!(variance(&c, &[0.0, f64::NAN, 0.0, 0.0]).is_err());
}

#[test]
fn json_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let g = Grid::new(&[(0, 3), (1, 3)]).unwrap();
    let c = build_metropolis(&g, &random_weights(&mut rng, g.len())).unwrap();
    let text = serde_json::to_string(&c.to_json(true)).unwrap();
    let back: ChainJson = serde_json::from_str(&text).unwrap();
    let d = back.into_chain().unwrap();
    assert_eq!(d.grid(), c.grid());
    for (a, b) in c.conductances().iter().zip(d.conductances()) {
        assert!((a - b).abs() <= 1e-15 * a.abs(), "{a:e} {b:e}");
    }
    let mut tampered = c.to_json(true);
    tampered.edges.as_mut().unwrap()[0].conductance *= 2.0;
    assert!(matches!(tampered.into_chain(), Err(Error::Serde(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn chains_satisfy_identities(
        w in 1usize..6,
        h in 1usize..6,
        log_f in proptest::collection::vec(-30.0f64..30.0, 36),
    ) {
        let g = Grid::new(&[(1, w as i64), (1, h as i64)]).unwrap();
        let c = build_metropolis_log(&g, log_f[..g.len()].to_vec()).unwrap();
        let a = audit(&c);
        prop_assert!(a.passed(1e-12), "{:?}", a);
        let ones = vec![1.0; g.len()];
        for v in c.apply_kernel(&ones) {
            prop_assert!((v - 1.0).abs() < 1e-14);
        }
        let u: Vec<f64> = log_f[..g.len()].iter().map(|v| v.sin()).collect();
        prop_assert!(dirichlet_form(&c, &u, &u).unwrap() >= 0.0);
    }
}
