use gridgap::chain::audit;
use gridgap::families::{
    applicable_cases, check_falloff_class, check_flat_class, discretization_error, test_function,
    DensityFamily, FalloffShape, FlatShape, ValleyLine,
};
use gridgap::spectral::{rayleigh_upper_bound, spectral_gap, SolverMode};
use gridgap::Error;

fn asym1(l: f64, r: f64, n: usize) -> DensityFamily {
    DensityFamily::OneDAsym1 {
        left_exponent: l,
        right_exponent: r,
        n,
    }
}

fn valley(exponent: f64, line: ValleyLine, n: usize) -> DensityFamily {
    DensityFamily::Valley {
        exponent,
        scale: n as f64,
        line,
        eps: 0.5,
        n,
    }
}

fn flat(quartic: bool, n: usize) -> DensityFamily {
    DensityFamily::FlatClass {
        shape: if quartic {
            FlatShape::Quartic {
                scale: 6.0,
                power: 0.5,
            }
        } else {
            FlatShape::Power {
                scale: 8.0,
                power: 1.0,
            }
        },
        dim: 2,
        n,
        lipschitz: None,
        segment_const: None,
        mass_ratio: None,
    }
}

fn falloff(shape: FalloffShape, n: usize) -> DensityFamily {
    DensityFamily::ExpFalloff {
        shape,
        rate: n as f64,
        lipschitz: None,
        ratio_bound: 2.0,
        eps: 0.5,
        n,
    }
}

fn catalog() -> Vec<DensityFamily> {
    vec![
        asym1(0.0, 0.0, 6),
        asym1(0.5, 1.0, 10),
        asym1(1.0, 2.0, 10),
        asym1(2.0, 3.0, 10),
        DensityFamily::OneDAsym2 {
            left_exponent: 1.0,
            right_exponent: 1.0,
            left_len: 5,
            right_len: 12,
        },
        DensityFamily::OneDAsym2 {
            left_exponent: 2.0,
            right_exponent: 1.0,
            left_len: 9,
            right_len: 4,
        },
        DensityFamily::ExpLinear {
            slope_x: 6.0,
            slope_y: 6.0,
            n: 6,
        },
        falloff(FalloffShape::Cone { center: [0.5, 0.5] }, 8),
        falloff(FalloffShape::Wedge { quarter_turns: 1 }, 8),
        flat(false, 8),
        flat(true, 8),
        valley(1.0, ValleyLine::Diagonal, 5),
        valley(2.0, ValleyLine::Normal { a: 2.0, b: -1.0 }, 5),
    ]
}

#[test]
fn flat_exponent_gives_uniform_weights() {
    let (grid, lw) = asym1(0.0, 0.0, 3).discretize().unwrap();
    assert_eq!(grid.ranges(), vec![(-3, 3)]);
    assert!(lw.iter().all(|&v| v == 0.0));
}

#[test]
fn exp_linear_weights_factor_over_axes() {
    let (a, b, n) = (4.0, 4.0, 4usize);
    let f = DensityFamily::ExpLinear {
        slope_x: a,
        slope_y: b,
        n,
    };
    let chain = f.build_chain().unwrap();
    let g = chain.grid();
    let nf = n as f64;
    let axis_norm = |s: f64| -> f64 { (1..=n).map(|j| (s * j as f64 / nf).exp()).sum() };
    for s in 0..g.len() {
        let (x, y) = (g.coord(s, 0) as f64, g.coord(s, 1) as f64);
        let want = (a * x / nf).exp() / axis_norm(a) * (b * y / nf).exp() / axis_norm(b);
        assert!((chain.pi()[s] - want).abs() < 1e-14 * want, "{s}");
    }
    // Weights at cell centers, (k - 1/2) / n.
    let lw = chain.target().log_weights();
    let at = |x: i64, y: i64| lw[g.index(&[x, y]).unwrap()];
    assert!((at(1, 1) - (a + b) / (2.0 * nf)).abs() < 1e-15);
    assert!((at(4, 2) - (a * 3.5 + b * 1.5) / nf).abs() < 1e-15);
}

#[test]
fn valley_lattice_profile() {
    let f = valley(2.0, ValleyLine::Diagonal, 5);
    let (g, lw) = f.discretize().unwrap();
    assert_eq!(g.ranges(), vec![(-4, 5), (-4, 5)]);
    let at = |x: i64, y: i64| lw[g.index(&[x, y]).unwrap()].exp();
    assert!((at(1, 0) - 1.0).abs() < 1e-14);
    assert!((at(5, 5) - 100.0).abs() < 1e-12);
    assert!((at(-4, -4) - 100.0).abs() < 1e-12);
    assert!((at(3, 0) - 9.0).abs() < 1e-13);
}

#[test]
fn every_catalog_chain_is_valid() {
    for f in catalog() {
        let c = f.build_chain().unwrap();
        assert!(c.target().pi_min() > 0.0, "{}", f.describe());
        assert!(audit(&c).passed(1e-12), "{}", f.describe());
    }
}

#[test]
fn parameter_violations_are_named() {
    let bad = [
        asym1(2.0, 1.0, 8),
        DensityFamily::ExpLinear {
            slope_x: 9.0,
            slope_y: 1.0,
            n: 8,
        },
        DensityFamily::ExpFalloff {
            shape: FalloffShape::Cone { center: [0.5, 0.5] },
            rate: 8.0,
            lipschitz: None,
            ratio_bound: 2.0,
            eps: 0.5,
            n: 32,
        },
        valley(1.0, ValleyLine::Normal { a: 1.0, b: 2.0 }, 8),
        DensityFamily::FlatClass {
            shape: FlatShape::Quartic {
                scale: 6.0,
                power: 0.5,
            },
            dim: 3,
            n: 8,
            lipschitz: None,
            segment_const: None,
            mass_ratio: None,
        },
    ];
    for f in bad {
        match f.build_chain() {
            Err(Error::InvalidParameter { family, reason }) => {
                assert_eq!(family, f.tag());
                assert!(!reason.is_empty());
            }
            other => panic!("{}: {:?}", f.describe(), other.map(|c| c.len())),
        }
    }
}

#[test]
fn discretization_error_checks() {
    assert!(discretization_error(&asym1(0.0, 0.0, 5), 4).unwrap() < 1e-14);
    assert!(matches!(
        discretization_error(&asym1(0.0, 0.0, 5), 1),
        Err(Error::QuadratureTooCoarse(1))
    ));

    for n in [4usize, 8, 16] {
        let f = DensityFamily::ExpLinear {
            slope_x: n as f64,
            slope_y: n as f64,
            n,
        };
        let e = discretization_error(&f, 4).unwrap();
        assert!(e <= 2.0 * 2f64.exp(), "{e}");
    }

    let fixed = |n: usize| DensityFamily::ExpLinear {
        slope_x: 4.0,
        slope_y: -3.0,
        n,
    };
    let (e8, e16) = (
        discretization_error(&fixed(8), 4).unwrap(),
        discretization_error(&fixed(16), 4).unwrap(),
    );
    assert!(e16 < e8, "{e8} {e16}");
    let (c8, c16) = (
        discretization_error(&flat(true, 8), 4).unwrap(),
        discretization_error(&flat(true, 16), 4).unwrap(),
    );
    assert!(c16 < c8, "{c8} {c16}");

    // Doubling the nodes barely moves the error; the kink along the line
    // keeps the cells it crosses from converging faster.
    let v = valley(1.0, ValleyLine::Diagonal, 16);
    let coarse = discretization_error(&v, 4).unwrap();
    let fine = discretization_error(&v, 8).unwrap();
    assert!((coarse - fine).abs() < 1e-2 * fine, "{coarse} {fine}");
    assert!(fine > 0.0 && fine < 1.0);
}

#[test]
fn class_checks_accept_members_and_flag_false_constants() {
    for f in [
        falloff(FalloffShape::Cone { center: [0.5, 0.5] }, 16),
        falloff(FalloffShape::Cone { center: [0.2, 0.9] }, 16),
    ] {
        let r = check_falloff_class(&f, 1).unwrap();
        assert!(r.passed(), "{}: {:?}", f.describe(), r.violations);
        assert!(r.samples >= 200);
    }
    // The wedge is flat beyond the line u + v = 1, so radial growth fails
    // there and the checker must say so.
    for turns in 0..4 {
        let r = check_falloff_class(
            &falloff(
                FalloffShape::Wedge {
                    quarter_turns: turns,
                },
                16,
            ),
            1,
        )
        .unwrap();
        assert!(!r.passed());
        assert!(r.violations.iter().all(|v| v.starts_with("growth")));
    }
    for f in [flat(false, 16), flat(true, 16)] {
        let r = check_flat_class(&f, 1).unwrap();
        assert!(r.passed(), "{}: {:?}", f.describe(), r.violations);
    }

    let understated = DensityFamily::FlatClass {
        shape: FlatShape::Power {
            scale: 8.0,
            power: 1.0,
        },
        dim: 2,
        n: 16,
        lipschitz: Some(2.0),
        segment_const: None,
        mass_ratio: None,
    };
    assert!(!check_flat_class(&understated, 1).unwrap().passed());
    assert!(check_flat_class(&asym1(1.0, 1.0, 4), 1).is_err());
}

#[test]
fn test_functions_are_centered_upper_bounds() {
    for f in catalog() {
        let c = f.build_chain().unwrap();
        let gap = spectral_gap(&c, SolverMode::Dense).unwrap().gap;
        for case in applicable_cases(&f) {
            let tf = test_function(&f, case).unwrap();
            let mean = c.target().expectation(&tf.values);
            let norm: f64 = tf
                .values
                .iter()
                .zip(c.pi())
                .map(|(v, p)| p * v * v)
                .sum::<f64>()
                .sqrt();
            assert!(mean.abs() <= 1e-10 * norm, "{case}");
            let rq = rayleigh_upper_bound(&c, &tf.values).unwrap();
            assert!(
                rq >= gap * (1.0 - 1e-12),
                "{}: {case} {rq} < {gap}",
                f.describe()
            );
        }
    }
}

#[test]
fn step_function_splits_at_zero() {
    let f = asym1(2.0, 3.0, 8);
    let c = f.build_chain().unwrap();
    let g = c.grid();
    let xi: f64 = (0..g.len())
        .filter(|&s| g.coord(s, 0) <= 0)
        .map(|s| c.pi()[s])
        .sum();
    let tf = test_function(&f, "asymvalley:a>1").unwrap();
    for s in 0..g.len() {
        let want = if g.coord(s, 0) <= 0 { 1.0 - xi } else { -xi };
        assert!((tf.values[s] - want).abs() < 1e-14);
    }

    // Uniform weights: the Rayleigh quotient is the two-block cut.
    let f = asym1(0.0, 0.0, 6);
    let c = f.build_chain().unwrap();
    let tf = test_function(&f, "asymvalley:step").unwrap();
    let xi = 7.0 / 13.0;
    let cut = c.conductance(c.grid().edge_id(6, 0)) / (xi * (1.0 - xi));
    let rq = rayleigh_upper_bound(&c, &tf.values).unwrap();
    assert!((rq - cut).abs() < 1e-14 * cut, "{rq} {cut}");
}

#[test]
fn valley_test_function_is_antisymmetric() {
    let f = valley(1.0, ValleyLine::Diagonal, 32);
    let c = f.build_chain().unwrap();
    let g = c.grid();
    let tf = test_function(&f, "valley:antisym").unwrap();
    for s in 0..g.len() {
        let (x, y) = (g.coord(s, 0), g.coord(s, 1));
        let mirror = g.index(&[1 - y, 1 - x]).unwrap();
        assert!((tf.values[s] + tf.values[mirror]).abs() < 1e-12);
        if x + y == 1 {
            assert_eq!(tf.values[s], 0.0);
        }
    }
    let gap = spectral_gap(&c, SolverMode::Auto).unwrap().gap;
    let rq = rayleigh_upper_bound(&c, &tf.values).unwrap();
    assert!(rq >= gap && rq <= 10.0 * gap, "{rq} vs {gap}");
}

#[test]
fn case_errors() {
    let f = asym1(2.0, 3.0, 8);
    assert!(matches!(
        test_function(&f, "no-such-case"),
        Err(Error::UnknownCase(_))
    ));
    assert!(matches!(
        test_function(&f, "asymvalley:a<1"),
        Err(Error::RegimeMismatch { .. })
    ));
    let e = DensityFamily::ExpLinear {
        slope_x: 2.0,
        slope_y: 2.0,
        n: 4,
    };
    assert!(matches!(
        test_function(&e, "valley:antisym"),
        Err(Error::RegimeMismatch { .. })
    ));
}

#[test]
fn families_round_trip_through_json() {
    for f in catalog() {
        let text = serde_json::to_string(&f).unwrap();
        let back: DensityFamily = serde_json::from_str(&text).unwrap();
        assert_eq!(back, f);
    }
    let f: DensityFamily = serde_json::from_str(
        r#"{"family":"valley","exponent":1,"scale":8,"line":{"kind":"diagonal"},"n":8}"#,
    )
    .unwrap();
    assert!(matches!(f, DensityFamily::Valley { eps, .. } if eps == 0.5));
}
