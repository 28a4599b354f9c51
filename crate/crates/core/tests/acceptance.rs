//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Details for each criterion follow its line, indented.

use std::process::ExitCode;
use std::time::Instant;

use gridgap::bench::{
    best_upper, fit_exponent, predicted_order, run_sweep, write_csv, Law, SweepConfig,
};
use gridgap::chain::{audit, build_metropolis, Grid, GridChain};
use gridgap::families::{DensityFamily, FalloffShape, FlatShape, ValleyLine};
use gridgap::mixing::{mixing_times_with, MixingOptions, DEFAULT_MIX_CAP};
use gridgap::pathbound::{certify, BoundOptions};
use gridgap::spectral::{
    direct_eigenvalues, spectral_gap, spectral_gap_with, SolverMode, SpectralOptions,
};

struct Cell {
    label: String,
    family: DensityFamily,
    chain: GridChain,
    lambda: f64,
}

struct Outcome {
    pass: bool,
    details: Vec<String>,
}

fn asym1(l: f64, r: f64, n: usize) -> DensityFamily {
    DensityFamily::OneDAsym1 {
        left_exponent: l,
        right_exponent: r,
        n,
    }
}

fn asym2(l: f64, r: f64, nm: usize, np: usize) -> DensityFamily {
    DensityFamily::OneDAsym2 {
        left_exponent: l,
        right_exponent: r,
        left_len: nm,
        right_len: np,
    }
}

fn exp_linear(n: usize) -> DensityFamily {
    DensityFamily::ExpLinear {
        slope_x: n as f64,
        slope_y: n as f64,
        n,
    }
}

fn cone(n: usize) -> DensityFamily {
    DensityFamily::ExpFalloff {
        shape: FalloffShape::Cone { center: [0.5, 0.5] },
        rate: n as f64,
        lipschitz: None,
        ratio_bound: 2.0,
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

fn valley(exponent: f64, tilted: bool, n: usize) -> DensityFamily {
    DensityFamily::Valley {
        exponent,
        scale: n as f64,
        line: if tilted {
            ValleyLine::Normal { a: 2.0, b: -1.0 }
        } else {
            ValleyLine::Diagonal
        },
        eps: 0.5,
        n,
    }
}

/// Parameter points for the two-sided interval, three per regime, as
/// functions of the long side.
fn lem2_points() -> Vec<(&'static str, Vec<(f64, f64, fn(usize) -> usize)>)> {
    fn same(n: usize) -> usize {
        n
    }
    fn half(n: usize) -> usize {
        n / 2
    }
    fn quarter(n: usize) -> usize {
        n / 4
    }
    fn double(n: usize) -> usize {
        2 * n
    }
    fn quadruple(n: usize) -> usize {
        4 * n
    }
    fn log_scaled(n: usize) -> usize {
        let d = (n as f64).ln().sqrt().ceil() as usize;
        n / d
    }
    vec![
        (
            "both_steep",
            vec![(2.0, 3.0, same), (2.0, 2.0, half), (3.0, 2.0, double)],
        ),
        (
            "one_shallow",
            vec![(0.5, 2.0, same), (0.5, 0.5, quarter), (2.0, 0.3, double)],
        ),
        (
            "both_critical",
            vec![
                (1.0, 1.0, same),
                (1.0, 1.0, log_scaled),
                (1.0, 1.0, quarter),
            ],
        ),
        (
            "critical_steep",
            vec![(1.0, 2.0, same), (1.0, 3.0, quadruple), (2.0, 1.0, half)],
        ),
    ]
}

fn gap(chain: &GridChain) -> f64 {
    spectral_gap(chain, SolverMode::Auto).unwrap().gap
}

fn make(label: String, family: DensityFamily) -> Cell {
    let chain = family.build_chain().unwrap();
    let lambda = gap(&chain);
    Cell {
        label,
        family,
        chain,
        lambda,
    }
}

fn matrix() -> Vec<Cell> {
    let mut cells = Vec::new();
    for (l, r) in [(0.0, 0.0), (0.5, 1.0), (1.0, 2.0), (2.0, 3.0)] {
        for n in [8, 32, 128, 512] {
            cells.push(make(format!("asym1 ({l},{r}) N={n}"), asym1(l, r, n)));
        }
    }
    for (name, pts) in lem2_points() {
        let (l, r, minus) = pts[0];
        for n in [16, 64, 256] {
            cells.push(make(
                format!("lem2 {name} N+={n}"),
                asym2(l, r, minus(n), n),
            ));
        }
    }
    for n in [8, 16, 32, 48] {
        cells.push(make(format!("exp_linear N={n}"), exp_linear(n)));
        cells.push(make(format!("cone N={n}"), cone(n)));
        cells.push(make(format!("flat power N={n}"), flat(false, n)));
        cells.push(make(format!("flat quartic N={n}"), flat(true, n)));
    }
    for tilted in [false, true] {
        for a in [0.5, 1.0, 2.0] {
            for n in [8, 12, 16] {
                let line = if tilted { "slope2" } else { "diag" };
                cells.push(make(
                    format!("valley {line} a={a} N={n}"),
                    valley(a, tilted, n),
                ));
            }
        }
    }
    cells
}

fn spread(v: &[f64]) -> f64 {
    let hi = v.iter().copied().fold(f64::MIN, f64::max);
    let lo = v.iter().copied().fold(f64::MAX, f64::min);
    hi / lo
}

fn criterion_1(cells: &[Cell]) -> Outcome {
    let mut details = Vec::new();
    let mut ok = 0;
    for c in cells {
        let b = certify(&c.chain, &c.family, "auto", &BoundOptions::default());
        let up = best_upper(&c.chain, &c.family, None);
        match (b, up) {
            (Ok(b), Ok((upper, case))) => {
                let good = b.lower_bound <= c.lambda && c.lambda <= upper;
                if good {
                    ok += 1;
                } else {
                    details.push(format!(
                        "violation {}: lower {:.6e} lambda {:.6e} upper {:.6e} ({case})",
                        c.label, b.lower_bound, c.lambda, upper
                    ));
                }
            }
            (b, u) => details.push(format!(
                "error {}: {:?} {:?}",
                c.label,
                b.err().map(|e| e.to_string()),
                u.err().map(|e| e.to_string())
            )),
        }
    }
    details.insert(0, format!("{ok}/{} cells certified", cells.len()));
    Outcome {
        pass: ok == cells.len(),
        details,
    }
}

fn fit_line(label: &str, sizes: &[usize], gaps: &[f64], law: &Law) -> (bool, String) {
    let pts: Vec<(f64, f64)> = sizes
        .iter()
        .map(|&n| n as f64)
        .zip(gaps.iter().copied())
        .collect();
    let f = fit_exponent(&pts, law).unwrap();
    (
        f.pass,
        format!(
            "{label}: s = {:.4} (law {}), ratio {:.3}, residual {:.2e}",
            f.exponent_at_law,
            law.describe(),
            f.ratio,
            f.residual_at_law
        ),
    )
}

fn criterion_2() -> Outcome {
    let sizes = [16, 32, 64, 128, 256];
    let mut pass = true;
    let mut details = Vec::new();
    for (l, r, law) in [
        (0.5, 1.0, Law::new(-2.0, 0)),
        (2.0, 3.0, Law::new(-3.0, 0)),
        (1.0, 2.0, Law::new(-2.0, -1)),
    ] {
        let gaps: Vec<f64> = sizes
            .iter()
            .map(|&n| gap(&asym1(l, r, n).build_chain().unwrap()))
            .collect();
        let (ok, line) = if law.log_power == 0 {
            fit_line(&format!("a- = {l}"), &sizes, &gaps, &law)
        } else {
            // Only the compensated ratio is required for the log law.
            let comp: Vec<f64> = sizes
                .iter()
                .zip(&gaps)
                .map(|(&n, g)| g * (n * n) as f64 * (n as f64).ln())
                .collect();
            let ratio = spread(&comp);
            (
                ratio <= 4.0,
                format!("a- = {l}: max/min of lambda N^2 log N = {ratio:.3}"),
            )
        };
        pass &= ok;
        details.push(line);
    }
    Outcome { pass, details }
}

fn criterion_3() -> Outcome {
    let sizes = [16, 32, 64, 128, 256];
    let mut pass = true;
    let mut details = Vec::new();
    for (name, pts) in lem2_points() {
        for (l, r, minus) in pts {
            let ratios: Vec<f64> = sizes
                .iter()
                .map(|&n| {
                    let f = asym2(l, r, minus(n), n);
                    gap(&f.build_chain().unwrap()) / predicted_order(&f)
                })
                .collect();
            let s = spread(&ratios);
            pass &= s <= 8.0;
            details.push(format!(
                "{name} ({l}, {r}, N- = {}..{}): max/min of lambda/order = {s:.3}",
                minus(sizes[0]),
                minus(sizes[sizes.len() - 1])
            ));
        }
    }
    Outcome { pass, details }
}

fn criterion_4() -> Outcome {
    let sizes = [8, 12, 16, 24, 32, 48];
    let mut pass = true;
    let mut details = Vec::new();
    for (name, make) in [
        ("exp_linear a=b=N", exp_linear as fn(usize) -> DensityFamily),
        ("cone", cone),
    ] {
        let mut gaps = Vec::new();
        let mut lowers = Vec::new();
        for &n in &sizes {
            let f = make(n);
            let c = f.build_chain().unwrap();
            gaps.push(gap(&c));
            lowers.push(
                certify(&c, &f, "auto", &BoundOptions::default())
                    .unwrap()
                    .lower_bound,
            );
        }
        let (sg, sl) = (spread(&gaps), spread(&lowers));
        pass &= sg <= 3.0 && sl <= 10.0;
        details.push(format!(
            "{name}: lambda in [{:.4}, {:.4}] spread {sg:.3}; lower bound spread {sl:.3}",
            gaps.iter().copied().fold(f64::MAX, f64::min),
            gaps.iter().copied().fold(f64::MIN, f64::max)
        ));
    }
    Outcome { pass, details }
}

fn criterion_5() -> Outcome {
    let sizes = [8, 12, 16, 24, 32, 48];
    let mut pass = true;
    let mut details = Vec::new();
    for quartic in [false, true] {
        let mut scaled_gap = Vec::new();
        let mut scaled_lower = Vec::new();
        for &n in &sizes {
            let f = flat(quartic, n);
            let c = f.build_chain().unwrap();
            let n2 = (n * n) as f64;
            scaled_gap.push(gap(&c) * n2);
            scaled_lower.push(
                certify(&c, &f, "auto", &BoundOptions::default())
                    .unwrap()
                    .lower_bound
                    * n2,
            );
        }
        let min_gap = scaled_gap.iter().copied().fold(f64::MAX, f64::min);
        let min_lower = scaled_lower.iter().copied().fold(f64::MAX, f64::min);
        // Bounded below: the scaled values must not decay across the range.
        let last_gap =
            scaled_gap[sizes.len() - 1] / scaled_gap.iter().copied().fold(f64::MIN, f64::max);
        let last_lower =
            scaled_lower[sizes.len() - 1] / scaled_lower.iter().copied().fold(f64::MIN, f64::max);
        let ok = min_gap > 0.0 && min_lower > 0.0 && last_gap >= 0.25 && last_lower >= 0.25;
        pass &= ok;
        details.push(format!(
            "{}: min lambda N^2 = {min_gap:.4} (largest N at {:.2} of max); c' = min (2/W) N^2 = {min_lower:.4e} (largest N at {:.2} of max)",
            if quartic { "quartic" } else { "power" },
            last_gap,
            last_lower
        ));
    }
    Outcome { pass, details }
}

fn criterion_6() -> Outcome {
    let sizes = [8, 12, 16, 24, 32];
    let mut pass = true;
    let mut details = Vec::new();
    for tilted in [false, true] {
        for (a, law) in [
            (0.5, Law::new(-2.0, 0)),
            (1.0, Law::new(-2.0, -1)),
            (
                2.0,
                Law {
                    tolerance: 0.25,
                    ..Law::new(-3.0, 0)
                },
            ),
        ] {
            let mut gaps = Vec::new();
            let mut certified = true;
            for &n in &sizes {
                let f = valley(a, tilted, n);
                let c = f.build_chain().unwrap();
                let g = gap(&c);
                let b = certify(&c, &f, "auto", &BoundOptions::default()).unwrap();
                certified &= b.lower_bound <= g;
                gaps.push(g);
            }
            let line = if tilted { "slope 2" } else { "diagonal" };
            let (ok, text) = if law.log_power == 0 {
                fit_line(&format!("{line} a = {a}"), &sizes, &gaps, &law)
            } else {
                let comp: Vec<f64> = sizes
                    .iter()
                    .zip(&gaps)
                    .map(|(&n, g)| g * (n * n) as f64 * (n as f64).ln())
                    .collect();
                let ratio = spread(&comp);
                (
                    ratio <= 4.0,
                    format!("{line} a = {a}: max/min of lambda N^2 log N = {ratio:.3}"),
                )
            };
            pass &= ok && certified;
            details.push(format!("{text}; certificates hold: {certified}"));
        }
    }
    Outcome { pass, details }
}

fn criterion_7(cells: &[Cell]) -> Outcome {
    let mut pass = true;
    let mut details = Vec::new();
    let mut checked = 0;
    let opts = MixingOptions::default();
    for c in cells.iter().filter(|c| c.chain.len() <= DEFAULT_MIX_CAP) {
        match mixing_times_with(&c.chain, c.lambda, &opts) {
            Ok(m) => {
                checked += 1;
                if !m.sandwich_holds(1e-6) {
                    pass = false;
                    details.push(format!(
                        "violation {}: 1/lambda {:.6e} T_TV {:.6e} T_sup {:.6e} bound {:.6e}",
                        c.label, m.relaxation, m.t_tv, m.t_sup, m.upper_bound
                    ));
                }
            }
            Err(e) => {
                pass = false;
                details.push(format!("error {}: {e}", c.label));
            }
        }
    }
    details.insert(
        0,
        format!("sandwich holds on {checked} chains with at most {DEFAULT_MIX_CAP} states"),
    );
    let sizes = [8, 12, 16, 24, 32];
    let per_n: Vec<f64> = sizes
        .iter()
        .map(|&n| {
            let c = exp_linear(n).build_chain().unwrap();
            let m = mixing_times_with(&c, gap(&c), &opts).unwrap();
            m.t_tv / n as f64
        })
        .collect();
    let s = spread(&per_n);
    pass &= s <= 3.0;
    details.push(format!(
        "exp_linear T_TV / N over N = 8..32: {:?}, spread {s:.3}",
        per_n.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>()
    ));
    Outcome { pass, details }
}

fn criterion_8(cells: &[Cell]) -> Outcome {
    let mut pass = true;
    let mut details = Vec::new();
    let mut worst_solver: f64 = 0.0;
    let mut worst_direct: f64 = 0.0;
    let mut compared = 0;
    for c in cells.iter().filter(|c| c.chain.len() <= 400) {
        let dense = spectral_gap(&c.chain, SolverMode::Dense).unwrap().gap;
        let iter = spectral_gap_with(
            &c.chain,
            &SpectralOptions {
                mode: SolverMode::Iterative,
                ..SpectralOptions::default()
            },
        )
        .unwrap()
        .gap;
        let auto = c.lambda;
        let err = ((iter - dense).abs() / dense).max((auto - dense).abs() / dense);
        worst_solver = worst_solver.max(err);
        let direct = direct_eigenvalues(&c.chain).unwrap();
        worst_direct = worst_direct.max(((1.0 - direct[1]) - dense).abs() / dense);
        compared += 1;
    }
    pass &= worst_solver <= 1e-8 && worst_direct <= 1e-8;
    details.push(format!(
        "{compared} chains: worst relative gap difference between solvers {worst_solver:.2e}, against the unsymmetrized kernel {worst_direct:.2e}"
    ));

    let mut worst_uniform: f64 = 0.0;
    for n in 2..=64usize {
        let g = Grid::interval(1, n as i64).unwrap();
        let c = build_metropolis(&g, &vec![1.0; n]).unwrap();
        let want = 1.0 - (std::f64::consts::PI / n as f64).cos();
        for mode in [SolverMode::Auto, SolverMode::Dense] {
            let got = spectral_gap(&c, mode).unwrap().gap;
            worst_uniform = worst_uniform.max((got - want).abs());
        }
    }
    pass &= worst_uniform <= 1e-10;
    details.push(format!(
        "uniform interval, N = 2..64: worst |gap - (1 - cos(pi/N))| = {worst_uniform:.2e}"
    ));

    let mut worst = (0.0f64, 0.0f64, 0.0f64, f64::INFINITY);
    for c in cells {
        let a = audit(&c.chain);
        worst = (
            worst.0.max(a.reversibility),
            worst.1.max(a.row_sum),
            worst.2.max(a.metropolis_conductance),
            worst.3.min(a.min_entry),
        );
        pass &= a.passed(1e-12);
    }
    details.push(format!(
        "identities over {} chains: reversibility {:.1e}, row sums {:.1e}, conductance formula {:.1e}, min entry {:.3e}",
        cells.len(),
        worst.0,
        worst.1,
        worst.2,
        worst.3
    ));
    Outcome { pass, details }
}

const DETERMINISM_CONFIG: &str = r#"
[settings]
seed = 5

[[cell]]
name = "asym"
family = "one_d_asym1"
sizes = [32, 64, 128]
mixing = true
left_exponent = 1
right_exponent = 2
n = "N"

[[cell]]
name = "lem2"
family = "one_d_asym2"
sizes = [16, 64]
left_exponent = 1
right_exponent = 1
left_len = "N/ceil(sqrt(log N))"
right_len = "N"

[[cell]]
name = "valley"
family = "valley"
sizes = [8, 12]
exponent = 1
scale = "N"
n = "N"
line = { kind = "normal", a = 2, b = -1 }

[[cell]]
name = "flat"
family = "flat_class"
sizes = [16, 24]
mixing = true
n = "N"
shape = { kind = "quartic", scale = 6, power = 0.5 }

[[cell]]
name = "cone"
family = "exp_falloff"
sizes = [16]
rate = "N"
n = "N"
shape = { kind = "cone", center = [0.5, 0.5] }
"#;

fn criterion_9() -> Outcome {
    let cfg = SweepConfig::from_toml(DETERMINISM_CONFIG).unwrap();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| {
            let recs = run_sweep(&cfg).unwrap();
            let mut out = Vec::new();
            write_csv(&recs, &mut out).unwrap();
            out
        })
    };
    let a = run(1);
    let b = run(4);
    let c = run(1);
    let rows = a.iter().filter(|&&b| b == b'\n').count() - 1;
    let pass = a == b && a == c && rows == 10;
    Outcome {
        pass,
        details: vec![format!(
            "{rows} records, {} bytes; identical across runs: {}, across 1 and 4 threads: {}",
            a.len(),
            a == c,
            a == b
        )],
    }
}

fn main() -> ExitCode {
    let start = Instant::now();
    let cells = matrix();
    let names = [
        "certificate soundness over the test matrix",
        "asymmetric interval exponents",
        "two-sided interval regimes",
        "bounded gaps for exponential densities",
        "flat-class floor",
        "valley exponents and certificates",
        "mixing-time sandwich",
        "solver oracles and chain identities",
        "determinism",
    ];
    let mut all = true;
    for (i, name) in names.iter().enumerate() {
        let t = Instant::now();
        let out = match i {
            0 => criterion_1(&cells),
            1 => criterion_2(),
            2 => criterion_3(),
            3 => criterion_4(),
            4 => criterion_5(),
            5 => criterion_6(),
            6 => criterion_7(&cells),
            7 => criterion_8(&cells),
            _ => criterion_9(),
        };
        all &= out.pass;
        println!(
            "{} {}: {name} ({:.1} s)",
            if out.pass { "PASS" } else { "FAIL" },
            i + 1,
            t.elapsed().as_secs_f64()
        );
        for d in out.details {
            println!("    {d}");
        }
    }
    println!("total {:.1} s", start.elapsed().as_secs_f64());
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
