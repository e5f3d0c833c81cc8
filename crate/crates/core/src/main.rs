use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use isw_tomo::analysis::{masked_relative_error, operator_spectrum, picard_data, visible_mask};
use isw_tomo::config::{ExperimentConfig, Method};
use isw_tomo::linalg::assemble;
use isw_tomo::model::{add_noise, make_phantom, relative_error};
use isw_tomo::solvers::{
    edge_preserving_reconstruct, fista_l1, lsqr, solve_ls_direct, EdgePreservingConfig,
    FistaConfig, HistoryRecorder, LsqrConfig, SolveHistory,
};
use isw_tomo::{io, Error, ForwardModel, Image, LinearOperator, Result};

#[derive(Parser)]
#[command(
    name = "isw-tomo",
    version,
    about = "Light-ray tomography of a 2D wave field"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration file (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `out_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed override: the phantom uses N, the noise N+1.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a phantom, simulate and perturb its data.
    Simulate,
    /// Reconstruct from data with the configured method.
    Reconstruct {
        /// Data vector; defaults to `<out>/b.csv`.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Reference image, enables error histories.
        #[arg(long)]
        ftrue: Option<PathBuf>,
    },
    /// Singular spectrum and condition number of the forward matrix.
    Spectrum,
    /// SVD coefficients of the data.
    Picard {
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Nodes reached by some detected null ray.
    Visible,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::Cfl { .. }
        | Error::InvalidGrid(_)
        | Error::InvalidArgument(_) => 2,
        Error::Numerical(_) | Error::NotSymmetric(_) | Error::BudgetExceeded { .. } => 3,
        Error::SizeMismatch { .. } | Error::Parse(_) | Error::Io(_) => 1,
    }
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = common.seed {
        cfg.phantom.seed = seed;
        cfg.noise.seed = seed.wrapping_add(1);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn build_model(cfg: &ExperimentConfig) -> Result<ForwardModel> {
    let grid = cfg.grid()?;
    let mask = cfg.detector_mask(&grid)?;
    let model = ForwardModel::new(grid, &mask);
    log::info!("model: {} rays, {} unknowns", model.nrows(), model.ncols());
    Ok(model)
}

fn simulate(cfg: &ExperimentConfig) -> Result<()> {
    let model = build_model(cfg)?;
    let ftrue = make_phantom(&cfg.phantom, model.spec())?;
    let clean = model.forward_apply(&ftrue)?;
    let (b, e) = add_noise(&clean, &cfg.noise)?;
    let out = &cfg.out_dir;
    io::write_image(&out.join("f_true.csv"), &ftrue)?;
    io::write_vector(&out.join("b.csv"), &b)?;
    let e_norm = isw_tomo::operator::norm(&e);
    let clean_norm = isw_tomo::operator::norm(&clean);
    std::fs::write(
        out.join("noise.txt"),
        format!(
            "m = {}\nnoise_level = {}\nnoise_seed = {}\ne_norm = {e_norm:.16e}\nb_clean_norm = {clean_norm:.16e}\n",
            b.len(),
            cfg.noise.level,
            cfg.noise.seed
        ),
    )?;
    if cfg.write_ray_matrix {
        let f = std::fs::File::create(out.join("ray_matrix.csv"))?;
        model
            .rays()
            .matrix()
            .write_triples(std::io::BufWriter::new(f))?;
    }
    std::fs::write(out.join("config.txt"), cfg.to_text())?;
    println!("m = {}", b.len());
    println!("e_norm = {e_norm:.6e}");
    Ok(())
}

fn data_path(cfg: &ExperimentConfig, data: &Option<PathBuf>) -> PathBuf {
    data.clone().unwrap_or_else(|| cfg.out_dir.join("b.csv"))
}

fn read_image_for(model: &ForwardModel, path: &Path) -> Result<Image> {
    let img = io::read_image(path)?;
    if img.n() != model.spec().n() {
        return Err(Error::SizeMismatch {
            expected: model.spec().node_count(),
            got: img.values().len(),
        });
    }
    Ok(img)
}

fn reconstruct(
    cfg: &ExperimentConfig,
    data: &Option<PathBuf>,
    ftrue: &Option<PathBuf>,
) -> Result<()> {
    let model = build_model(cfg)?;
    let b = io::read_vector(&data_path(cfg, data))?;
    if b.len() != model.nrows() {
        return Err(Error::SizeMismatch {
            expected: model.nrows(),
            got: b.len(),
        });
    }
    let ftrue = ftrue
        .as_ref()
        .map(|p| read_image_for(&model, p))
        .transpose()?;
    let ft = ftrue.as_ref().map(|f| f.values());
    let s = &cfg.solver;
    let history: SolveHistory = match s.method {
        Method::Ls => {
            let sol = solve_ls_direct(&model, &b, cfg.budget())?;
            log::info!("direct LS via {:?}, rank {}", sol.method, sol.rank);
            let mut r = model.apply(&sol.solution);
            r.iter_mut().zip(&b).for_each(|(x, y)| *x -= y);
            let mut rec = HistoryRecorder::new(&b, ft, cfg.keep_iterates);
            rec.record(&sol.solution, isw_tomo::operator::norm(&r));
            rec.finish(sol.solution)
        }
        Method::Lsqr => lsqr(
            &model,
            &b,
            &LsqrConfig {
                max_iters: s.max_iters,
                keep_iterates: cfg.keep_iterates,
            },
            ft,
        )?,
        Method::Fista => fista_l1(
            &model,
            &b,
            &FistaConfig {
                lambda: s.lambda,
                max_iters: s.max_iters,
                keep_iterates: cfg.keep_iterates,
            },
            ft,
        )?,
        Method::Igmrf => {
            let res = edge_preserving_reconstruct(
                &model,
                &b,
                &EdgePreservingConfig {
                    outer_iters: s.outer_iters,
                    schedule: s.lambda_schedule.clone(),
                    beta: s.beta,
                    cg_max: s.cg_max,
                    cg_tol: s.tol,
                    keep_iterates: cfg.keep_iterates,
                },
                ft,
            )?;
            for (k, o) in res.outer.iter().enumerate() {
                log::info!(
                    "outer {}: lambda={:e} cg_iterations={} converged={}",
                    k + 1,
                    o.lambda,
                    o.cg_iterations,
                    o.converged
                );
            }
            res.history
        }
    };
    let out = &cfg.out_dir;
    let fhat = Image::from_values(model.spec(), history.solution.clone())?;
    io::write_image(&out.join("fhat.csv"), &fhat)?;
    io::write_pgm(&out.join("fhat.pgm"), &fhat)?;
    let f = std::fs::File::create(out.join("history.csv"))?;
    history.write_csv(std::io::BufWriter::new(f))?;
    if let Some(ft) = &ftrue {
        let err = relative_error(fhat.values(), ft.values())?;
        let vmask = visible_mask(
            model.spec(),
            &cfg.detector_mask(model.spec())?,
            model.spec().dx() / 2.0,
        )?;
        let (inside, outside) = masked_relative_error(fhat.values(), ft.values(), &vmask)?;
        println!("relative_error = {err:.6e}");
        let show = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.6e}"));
        println!("visible_error = {}", show(inside));
        println!("invisible_error = {}", show(outside));
    }
    if let Some(r) = history.residual_norms.last() {
        println!("residual = {r:.6e}");
    }
    Ok(())
}

fn spectrum(cfg: &ExperimentConfig) -> Result<()> {
    let model = build_model(cfg)?;
    let s = operator_spectrum(&model, cfg.budget())?;
    io::write_spectrum(&cfg.out_dir.join("spectrum.csv"), &s)?;
    if s.kappa.is_finite() {
        println!("kappa = {:.6e}", s.kappa);
    } else {
        println!("kappa = inf");
    }
    println!("rank = {}", s.numerical_rank());
    Ok(())
}

fn picard(cfg: &ExperimentConfig, data: &Option<PathBuf>) -> Result<()> {
    let model = build_model(cfg)?;
    let b = io::read_vector(&data_path(cfg, data))?;
    let a = assemble(&model, cfg.budget())?;
    let p = picard_data(&a, &b)?;
    io::write_picard(&cfg.out_dir.join("picard.csv"), &p)?;
    println!("components = {}", p.triples.len());
    Ok(())
}

fn visible(cfg: &ExperimentConfig) -> Result<()> {
    let grid = cfg.grid()?;
    let mask = cfg.detector_mask(&grid)?;
    let v = visible_mask(&grid, &mask, grid.dx() / 2.0)?;
    io::write_mask(&cfg.out_dir.join("visible.csv"), &v)?;
    println!("visible = {} of {}", v.count(), grid.node_count());
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load_config(&cli.common)?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    match &cli.command {
        Command::Simulate => simulate(&cfg),
        Command::Reconstruct { data, ftrue } => reconstruct(&cfg, data, ftrue),
        Command::Spectrum => spectrum(&cfg),
        Command::Picard { data } => picard(&cfg, data),
        Command::Visible => visible(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
