//! End-to-end acceptance checks. Runs as a plain binary so that every
//! criterion reports one line and the expensive reference-scale matrices are
//! built once.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use isw_tomo::analysis::{masked_relative_error, picard_data, spectrum_from_gram, visible_mask};
use isw_tomo::linalg::{assemble, gram, MemoryBudget};
use isw_tomo::model::{
    add_noise, make_phantom, relative_error, NoiseSpec, PhantomKind, PhantomSpec, SupportBox,
};
use isw_tomo::operator::{dot, norm};
use isw_tomo::solvers::{
    edge_preserving_reconstruct, fista_l1, igmrf_weights, lsqr, soft_threshold, solve_ls_direct,
    solve_normal_equations, DifferenceOperators, EdgePreservingConfig, FistaConfig, LambdaSchedule,
    LsqrConfig,
};
use isw_tomo::{
    DetectorMask, ForwardModel, GridSpec, Image, LinearOperator, RaySystem, WavePropagator,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn desk_grid() -> GridSpec {
    GridSpec::new(9, 7.0, 2.0, 6).unwrap()
}

fn dots(support: f64, count: usize, seed: u64) -> PhantomSpec {
    PhantomSpec {
        kind: PhantomKind::Dots,
        count,
        support: SupportBox::square(support),
        amplitude: 1.0,
        seed,
    }
}

/// Phantom, noisy data and noise for a model.
fn simulate(
    model: &ForwardModel,
    phantom: &PhantomSpec,
    level: f64,
    seed: u64,
) -> (Image, Vec<f64>, Vec<f64>) {
    let f = make_phantom(phantom, model.spec()).unwrap();
    let clean = model.forward_apply(&f).unwrap();
    let (b, e) = add_noise(&clean, &NoiseSpec { level, seed }).unwrap();
    (f, b, e)
}

fn model_for(label: &str) -> ForwardModel {
    let g = GridSpec::reference();
    ForwardModel::new(g, &DetectorMask::from_label(&g, label).unwrap())
}

fn c1_adjoint() -> Outcome {
    let g = desk_grid();
    let start = Instant::now();
    let model = ForwardModel::new(g, &DetectorMask::full(&g));
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let f: Vec<f64> = (0..model.ncols())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let b: Vec<f64> = (0..model.nrows())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let af = model.apply(&f);
        let atb = model.apply_adjoint(&b);
        let gap = (dot(&af, &b) - dot(&f, &atb)).abs() / (norm(&af) * norm(&b));
        worst = worst.max(gap);
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst < 1e-12 && secs < 5.0,
        format!(
            "max relative gap {worst:.2e} (< 1e-12), {secs:.3} s (< 5 s), m = {}",
            model.nrows()
        ),
    )
}

/// Dense `S` from the recursion on an explicitly assembled `T`.
fn dense_solution_matrix(g: &GridSpec) -> Mat<f64> {
    let n = g.n();
    let nn = n * n;
    let s2 = g.courant() * g.courant();
    let t = Mat::from_fn(nn, nn, |a, b| {
        let (ia, ja) = (a % n, a / n);
        let (ib, jb) = (b % n, b / n);
        let d = ia.abs_diff(ib) + ja.abs_diff(jb);
        match d {
            0 => 1.0 - 2.0 * s2,
            1 => 0.5 * s2,
            _ => 0.0,
        }
    });
    let mut prev = Mat::<f64>::identity(nn, nn);
    let mut cur = t.clone();
    let mut s = Mat::zeros(nn * g.n_slices(), nn);
    for tau in 1..=g.n_slices() {
        if tau > 1 {
            let next = &t * &cur * 2.0 - &prev;
            prev = cur;
            cur = next;
        }
        for r in 0..nn {
            for c in 0..nn {
                s[((tau - 1) * nn + r, c)] = 0.5 * (prev[(r, c)] + cur[(r, c)]);
            }
        }
    }
    s
}

fn c2_oracle_equivalence() -> Outcome {
    let g = desk_grid();
    let prop = WavePropagator::new(g);
    let dense = dense_solution_matrix(&g);
    let nn = g.node_count();
    let nv = g.voxel_count();
    let mut worst_fwd = 0.0f64;
    for j in 0..nn {
        let mut e = vec![0.0; nn];
        e[j] = 1.0;
        let col = prop.apply(&e);
        for r in 0..nv {
            worst_fwd = worst_fwd.max((col[r] - dense[(r, j)]).abs());
        }
    }
    let mut worst_adj = 0.0f64;
    for r in 0..nv {
        let mut e = vec![0.0; nv];
        e[r] = 1.0;
        let row = prop.apply_adjoint(&e);
        for j in 0..nn {
            worst_adj = worst_adj.max((row[j] - dense[(r, j)]).abs());
        }
    }
    outcome(
        worst_fwd < 1e-12 && worst_adj < 1e-12,
        format!(
            "max |S - S_dense| = {worst_fwd:.2e}, max |Sᵀ - S_denseᵀ| = {worst_adj:.2e} (< 1e-12)"
        ),
    )
}

fn c3_row_sums() -> Outcome {
    let g = GridSpec::reference();
    let sys = RaySystem::new(&g, &DetectorMask::full(&g));
    let mut interior = 0;
    let mut good = 0;
    for (r, ray) in sys.rays().iter().enumerate() {
        if ray.is_interior(&g) {
            interior += 1;
            if (sys.matrix().row_sum(r) - 2.0).abs() <= 1e-12 {
                good += 1;
            }
        }
    }
    outcome(
        interior > 0 && good == interior,
        format!("{good}/{interior} fully-interior rays have row sum 2.0 ± 1e-12"),
    )
}

fn c4_table_counts() -> Outcome {
    let g = GridSpec::reference();
    let expected = [
        ("full", 103_384usize),
        ("21x21", 21_168),
        ("7x7", 2_352),
        ("3x3", 432),
    ];
    let mut counts = Vec::new();
    let mut within = true;
    for (label, want) in expected {
        let m = RaySystem::new(&g, &DetectorMask::from_label(&g, label).unwrap()).m();
        within &= (m as f64 - want as f64).abs() <= 0.15 * want as f64;
        counts.push(m);
    }
    let monotone = counts.windows(2).all(|w| w[0] > w[1]);
    outcome(
        within && monotone,
        format!(
            "m = {counts:?} vs [103384, 21168, 2352, 432] (±15%), strictly decreasing: {monotone}"
        ),
    )
}

struct FullData {
    model: ForwardModel,
    gram: Mat<f64>,
    gram_secs: f64,
}

fn c5_conditioning(full: &FullData) -> Outcome {
    let start = Instant::now();
    let s = spectrum_from_gram(&full.gram, full.model.nrows(), 1e-12).unwrap();
    let full_secs = full.gram_secs + start.elapsed().as_secs_f64();
    let mut parts = vec![format!("full κ = {:.4} (< 1e3)", s.kappa)];
    let mut pass = s.kappa < 1e3 && full_secs < 300.0;
    for (label, bound) in [("21x21", Some(1e4)), ("7x7", None), ("3x3", None)] {
        let model = model_for(label);
        let g = gram(&model, MemoryBudget::default()).unwrap();
        let sp = spectrum_from_gram(&g, model.nrows(), 1e-12).unwrap();
        match bound {
            Some(b) => {
                pass &= sp.kappa < b;
                parts.push(format!(
                    "{label} κ = {:.4e} (< {b:e}, rank {})",
                    sp.kappa,
                    sp.numerical_rank()
                ));
            }
            None => {
                pass &= sp.kappa.is_infinite();
                parts.push(format!("{label} κ = {} (∞ expected)", sp.kappa));
            }
        }
    }
    parts.push(format!("full Gram + eigen {full_secs:.1} s (< 300 s)"));
    outcome(pass, parts.join("; "))
}

const PARTIAL_LSQR_ITERS: usize = 500;

fn c6_semiconvergence() -> Outcome {
    let model = model_for("7x7");
    let (f, b, _) = simulate(&model, &dots(3.0, 20, 1), 0.02, 2);
    let cfg = LsqrConfig {
        max_iters: PARTIAL_LSQR_ITERS,
        keep_iterates: false,
    };
    let h = lsqr(&model, &b, &cfg, Some(f.values())).unwrap();
    let errs = h.error_norms.as_ref().unwrap();
    let best = h.best_index.unwrap();
    let last = errs.len() - 1;
    let growth = errs[last] / errs[best];
    outcome(
        best < last && growth >= 1.1,
        format!(
            "best iterate {} of {}, error {:.4} -> final {:.4} (growth {:.2}x, >= 1.10x)",
            best + 1,
            last + 1,
            errs[best],
            errs[last],
            growth
        ),
    )
}

fn c7_full_quality(full: &FullData) -> Outcome {
    let (f, b, _) = simulate(&full.model, &dots(3.0, 20, 1), 0.02, 2);
    let ls = solve_normal_equations(&full.gram, &full.model.apply_adjoint(&b)).unwrap();
    let ls_err = relative_error(&ls.solution, f.values()).unwrap();
    let cfg = LsqrConfig {
        max_iters: 100,
        keep_iterates: false,
    };
    let h = lsqr(&full.model, &b, &cfg, Some(f.values())).unwrap();
    let lsqr_err = *h.error_norms.as_ref().unwrap().last().unwrap();
    outcome(
        ls_err < 0.2 && lsqr_err < 0.2,
        format!("LS error {ls_err:.4e}, LSQR(100) error {lsqr_err:.4e} (< 0.2)"),
    )
}

/// Largest violation of the optimality conditions of `‖Af−b‖² + λ‖f‖₁`.
fn lasso_kkt(a: &Mat<f64>, b: &[f64], f: &[f64], lambda: f64) -> f64 {
    let mut r = a.apply(f);
    r.iter_mut().zip(b).for_each(|(x, y)| *x -= y);
    let grad: Vec<f64> = a.apply_adjoint(&r).iter().map(|g| 2.0 * g).collect();
    grad.iter()
        .zip(f)
        .map(|(&g, &x)| {
            if x != 0.0 {
                (g + lambda * x.signum()).abs()
            } else {
                (g.abs() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

fn c8_fista() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut worst_kkt = 0.0f64;
    let mut nonzero = 0;
    for _ in 0..10 {
        let a = Mat::from_fn(15, 8, |_, _| rng.random_range(-1.0..1.0));
        let b: Vec<f64> = (0..15).map(|_| rng.random_range(-1.0..1.0)).collect();
        let atb = a.apply_adjoint(&b);
        let lmax = 2.0 * atb.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let lambda = lmax * rng.random_range(0.05..0.5);
        let cfg = FistaConfig {
            lambda,
            max_iters: 5000,
            keep_iterates: false,
        };
        let h = fista_l1(&a, &b, &cfg, None).unwrap();
        nonzero += h.solution.iter().filter(|x| **x != 0.0).count();
        worst_kkt = worst_kkt.max(lasso_kkt(&a, &b, &h.solution, lambda) / lambda);
    }
    let mut worst_closed = 0.0f64;
    for _ in 0..10 {
        let n = 6;
        let a = Mat::<f64>::identity(n, n);
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let lambda = rng.random_range(0.1..2.0);
        let cfg = FistaConfig {
            lambda,
            max_iters: 5000,
            keep_iterates: false,
        };
        let h = fista_l1(&a, &b, &cfg, None).unwrap();
        for (x, bi) in h.solution.iter().zip(&b) {
            worst_closed = worst_closed.max((x - soft_threshold(*bi, lambda / 2.0)).abs());
        }
    }
    outcome(
        worst_kkt < 1e-5 && worst_closed < 1e-10,
        format!(
            "max KKT residual {worst_kkt:.2e}·λ (< 1e-5·λ, {nonzero} active of 80); identity closed form max diff {worst_closed:.2e} (< 1e-10)"
        ),
    )
}

/// `D_sᵀD_s + D_tᵀD_t` from Kronecker products of the 1D matrix.
fn dense_first_precision(n: usize) -> Mat<f64> {
    let d = DifferenceOperators::new(n).matrix();
    let eye = Mat::<f64>::identity(n, n);
    let kron = |a: &Mat<f64>, b: &Mat<f64>| {
        Mat::from_fn(n * n, n * n, |r, c| a[(r / n, c / n)] * b[(r % n, c % n)])
    };
    let ds = kron(&eye, &d);
    let dt = kron(&d, &eye);
    ds.transpose() * &ds + dt.transpose() * &dt
}

fn c9_igmrf() -> Outcome {
    let beta = 1e-3;
    let w = igmrf_weights(
        &Image::square(7, vec![0.0; 49]).unwrap(),
        beta,
        &DifferenceOperators::new(7),
    )
    .unwrap();
    let target = 1.0 / beta.sqrt();
    let weights_ok = w.iter().all(|v| (v - target).abs() <= 1e-12 * target);

    let g = desk_grid();
    let model = ForwardModel::new(g, &DetectorMask::full(&g));
    let (_, b, _) = simulate(&model, &dots(3.0, 5, 9), 0.02, 10);
    let lambda = 1.0f64.exp();
    let a = assemble(&model, MemoryBudget::default()).unwrap();
    let lhs = a.transpose() * &a + dense_first_precision(g.n()) * lambda;
    let rhs = a.transpose() * Mat::from_fn(b.len(), 1, |i, _| b[i]);
    let direct = lhs.llt(Side::Lower).unwrap().solve(&rhs);
    let cfg = EdgePreservingConfig {
        outer_iters: 1,
        schedule: LambdaSchedule::Exponential,
        beta,
        cg_max: 1000,
        cg_tol: 1e-14,
        keep_iterates: false,
    };
    let k1 = edge_preserving_reconstruct(&model, &b, &cfg, None).unwrap();
    let direct_vec: Vec<f64> = direct.col(0).iter().copied().collect();
    let diff: Vec<f64> = k1
        .history
        .solution
        .iter()
        .zip(&direct_vec)
        .map(|(x, y)| x - y)
        .collect();
    let k1_gap = norm(&diff) / norm(&direct_vec);

    let model = model_for("7x7");
    let (f, b, _) = simulate(&model, &dots(3.0, 20, 1), 0.02, 2);
    let paper = edge_preserving_reconstruct(
        &model,
        &b,
        &EdgePreservingConfig::default(),
        Some(f.values()),
    )
    .unwrap();
    let igmrf_err = *paper.history.error_norms.as_ref().unwrap().last().unwrap();
    let lcfg = LsqrConfig {
        max_iters: PARTIAL_LSQR_ITERS,
        keep_iterates: false,
    };
    let h = lsqr(&model, &b, &lcfg, Some(f.values())).unwrap();
    let lsqr_err = *h.error_norms.as_ref().unwrap().last().unwrap();
    outcome(
        weights_ok && k1_gap < 1e-8 && igmrf_err < lsqr_err,
        format!(
            "zero-image weights = 1/√β: {weights_ok}; K=1 vs direct Tikhonov rel diff {k1_gap:.2e} (< 1e-8); \
             7x7 IGMRF final error {igmrf_err:.4} vs LSQR({PARTIAL_LSQR_ITERS}) final error {lsqr_err:.4} (must be smaller)"
        ),
    )
}

/// Nodes `x` with `| |x − d| − t_final | ≤ dx/2` for an active `d`, by
/// direct distance evaluation.
fn brute_force_visible(g: &GridSpec, mask: &DetectorMask) -> Vec<bool> {
    let tol = g.dx() / 2.0;
    let detectors: Vec<[f64; 2]> = (0..g.node_count())
        .filter(|&d| mask.is_active(d))
        .map(|d| g.position(d))
        .collect();
    (0..g.node_count())
        .map(|x| {
            let p = g.position(x);
            detectors
                .iter()
                .any(|d| ((p[0] - d[0]).hypot(p[1] - d[1]) - g.t_final()).abs() <= tol)
        })
        .collect()
}

fn c10_visible_set() -> Outcome {
    let g = GridSpec::reference();
    let mask = DetectorMask::from_label(&g, "7x7").unwrap();
    let model = ForwardModel::new(g, &mask);
    let (f, b, _) = simulate(&model, &dots(7.0, 60, 5), 0.02, 6);
    let vm = visible_mask(&g, &mask, g.dx() / 2.0).unwrap();

    let ls = solve_ls_direct(&model, &b, MemoryBudget::default())
        .unwrap()
        .solution;
    let lsqr_sol = lsqr(
        &model,
        &b,
        &LsqrConfig {
            max_iters: PARTIAL_LSQR_ITERS,
            keep_iterates: false,
        },
        None,
    )
    .unwrap()
    .solution;
    let fista_sol = fista_l1(
        &model,
        &b,
        &FistaConfig {
            lambda: 6.6e-5,
            max_iters: 500,
            keep_iterates: false,
        },
        None,
    )
    .unwrap()
    .solution;
    let igmrf_sol = edge_preserving_reconstruct(&model, &b, &EdgePreservingConfig::default(), None)
        .unwrap()
        .history
        .solution;

    let mut pass = true;
    let mut parts = Vec::new();
    for (name, sol) in [
        ("ls", &ls),
        ("lsqr", &lsqr_sol),
        ("fista", &fista_sol),
        ("igmrf", &igmrf_sol),
    ] {
        let (inside, outside) = masked_relative_error(sol, f.values(), &vm).unwrap();
        let (i, o) = (inside.unwrap(), outside.unwrap());
        pass &= i < o;
        parts.push(format!("{name} {i:.4}<{o:.4}:{}", i < o));
    }

    let mut grids = 0;
    let mut mismatches = 0;
    for n in 3..=51 {
        let g = GridSpec::new(n, 7.0, 2.0, 40).unwrap();
        let mut masks = vec![DetectorMask::full(&g)];
        if n % 2 == 1 {
            for k in [1, 3, 7, 21] {
                if k <= n {
                    masks.push(DetectorMask::centered(&g, k).unwrap());
                }
            }
        }
        for m in &masks {
            grids += 1;
            let v = visible_mask(&g, m, g.dx() / 2.0).unwrap();
            if v.visible() != brute_force_visible(&g, m).as_slice() {
                mismatches += 1;
            }
        }
    }
    pass &= mismatches == 0;
    outcome(
        pass,
        format!(
            "err_inside < err_outside on 7x7 domain-wide dots: [{}]; visible mask vs brute force: {mismatches} mismatches over {grids} grid/mask pairs (n = 3..=51)",
            parts.join(", ")
        ),
    )
}

fn c11_picard() -> Outcome {
    let model = model_for("7x7");
    let (_, b, e) = simulate(&model, &dots(3.0, 20, 1), 1e-4, 2);
    let a = assemble(&model, MemoryBudget::default()).unwrap();
    let p = picard_data(&a, &b).unwrap();
    let count = p.triples.len();
    let decile = count.div_ceil(10);
    let mut coefs: Vec<f64> = p.triples[count - decile..].iter().map(|t| t.coef).collect();
    coefs.sort_by(f64::total_cmp);
    let median = coefs[coefs.len() / 2];
    let floor = norm(&e) / (b.len() as f64).sqrt();
    let ratio = median / floor;
    outcome(
        ratio <= 3.0 && ratio >= 1.0 / 3.0,
        format!("median |uᵢᵀb| over smallest-σ decile {median:.3e}, ‖e‖/√m = {floor:.3e}, ratio {ratio:.3} (within [1/3, 3])"),
    )
}

fn run_cli(dir: &Path, config: &Path, threads: &str, args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_isw-tomo"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(dir)
        .env("RAYON_NUM_THREADS", threads)
        .env("OMP_NUM_THREADS", threads)
        .env("RUST_LOG", "error")
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "isw-tomo {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn c12_determinism() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let config = root.path().join("exp.cfg");
    std::fs::write(
        &config,
        "n = 21\nmask = 7x7\nphantom_count = 8\nnoise_level = 0.02\nphantom_seed = 4\nnoise_seed = 5\n\
         method = igmrf\ncg_max = 30\nwrite_ray_matrix = true\n",
    )
    .unwrap();
    let runs: Vec<_> = ["1", "4"]
        .iter()
        .map(|threads| {
            let dir = root.path().join(format!("run{threads}"));
            for cmd in [
                &["simulate"][..],
                &["reconstruct"],
                &["spectrum"],
                &["picard"],
                &["visible"],
            ] {
                run_cli(&dir, &config, threads, cmd);
            }
            dir
        })
        .collect();
    let files = [
        "f_true.csv",
        "b.csv",
        "noise.txt",
        "ray_matrix.csv",
        "fhat.csv",
        "fhat.pgm",
        "history.csv",
        "spectrum.csv",
        "picard.csv",
        "visible.csv",
    ];
    let mut differing = Vec::new();
    for name in files {
        let a = std::fs::read(runs[0].join(name)).unwrap();
        let b = std::fs::read(runs[1].join(name)).unwrap();
        if a != b {
            differing.push(name);
        }
    }
    outcome(
        differing.is_empty(),
        format!("{} output files compared across two runs (1 and 4 threads requested), differing: {differing:?}", files.len()),
    )
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut report = |id: usize, name: &'static str, run: &dyn Fn() -> Outcome| {
        let start = Instant::now();
        let o = run();
        println!(
            "[C{id:02}] {} {name}: {} [{:.1} s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
        results.push((id, name, o));
    };

    report(1, "adjoint exactness", &c1_adjoint);
    report(
        2,
        "matrix-free vs assembled solution operator",
        &c2_oracle_equivalence,
    );
    report(3, "ray row-sum law", &c3_row_sums);
    report(4, "observation counts", &c4_table_counts);

    let start = Instant::now();
    let model = model_for("full");
    let gm = gram(&model, MemoryBudget::default()).unwrap();
    let full = FullData {
        model,
        gram: gm,
        gram_secs: start.elapsed().as_secs_f64(),
    };
    report(5, "conditioning regimes", &|| c5_conditioning(&full));
    report(6, "semiconvergence", &c6_semiconvergence);
    report(7, "full-data reconstruction quality", &|| {
        c7_full_quality(&full)
    });
    report(8, "FISTA optimality", &c8_fista);
    report(9, "IGMRF correctness", &c9_igmrf);
    report(10, "visible-set consistency", &c10_visible_set);
    report(11, "Picard noise floor", &c11_picard);
    report(12, "determinism", &c12_determinism);

    let failed: Vec<String> = results
        .iter()
        .filter(|(_, _, o)| !o.pass)
        .map(|(id, name, _)| format!("C{id:02} {name}"))
        .collect();
    println!(
        "acceptance: {} passed, {} failed",
        results.len() - failed.len(),
        failed.len()
    );
    if !failed.is_empty() {
        println!("failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}
