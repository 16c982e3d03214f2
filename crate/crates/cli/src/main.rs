use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use win_core::data::{add_awgn, load_corpus, load_gray, save_gray, GrayImage};
use win_core::metrics::{hist_distance, histogram, psnr, ssim};
use win_core::models::Checkpoint;
use win_core::trainer::{behavior_curve, curve_csv, denoise_image, eval_noise_seed, evaluate, TrainConfig, Trainer};
use win_core::{derive_seed, Error};

/// Wide-inference-network denoising: corrupt, train, denoise and score
/// grayscale images.
#[derive(Parser)]
#[command(name = "win", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Add seeded Gaussian noise to every image of a manifest.
    Noise {
        /// Manifest listing the input images.
        #[arg(long = "in", value_name = "MANIFEST")]
        input: PathBuf,
        /// Noise standard deviation on the 0-255 scale.
        #[arg(long)]
        sigma: f32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory; files are named `<stem>_s<sigma>.<ext>`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model from a JSON config.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides `out_dir` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Continue the run saved in this checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Denoise one image with a trained checkpoint.
    Denoise {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long = "in", value_name = "IMAGE")]
        input: PathBuf,
        /// Output image; `.png` writes PNG, anything else PGM.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a checkpoint on a test manifest and write a CSV report.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Comma-separated noise levels.
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        sigmas: Vec<f32>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Method label in the report (default: the model variant).
        #[arg(long)]
        method: Option<String>,
        /// Also write the `sigma,psnr_db` curve here.
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Histogram distance between the noisy versions of two images.
    Hist {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        sigmas: Vec<f32>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Side-by-side panel: clean, noisy, then one column per checkpoint.
    Panel {
        #[arg(long)]
        clean: PathBuf,
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        ckpts: Vec<PathBuf>,
        #[arg(long)]
        sigma: f32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Panel image; scores go to the same path with a `.txt` extension.
        #[arg(long)]
        out: PathBuf,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e.root() {
            Error::Config(_) => 1,
            Error::Diverged { .. } | Error::NonFiniteGradient { .. } | Error::MissingCache(_) => 3,
            _ => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn check_sigmas(sigmas: &[f32]) -> CmdResult {
    match sigmas.iter().find(|s| !(**s >= 0.0) || !s.is_finite()) {
        Some(s) => Err(Failure::usage(format!("noise level must be >= 0, got {s}"))),
        None => Ok(()),
    }
}

fn write_text(path: &Path, text: &str) -> CmdResult {
    std::fs::write(path, text).map_err(|e| Failure {
        code: 2,
        message: format!("{}: {e}", path.display()),
    })
}

fn create_dir(path: &Path) -> CmdResult {
    std::fs::create_dir_all(path).map_err(|e| Failure {
        code: 2,
        message: format!("{}: {e}", path.display()),
    })
}

fn noise(input: &Path, sigma: f32, seed: u64, out: &Path) -> CmdResult {
    check_sigmas(&[sigma])?;
    let manifest = win_core::data::load_manifest(input)?;
    let images = load_corpus(input)?;
    create_dir(out)?;
    for (i, (path, im)) in manifest.iter().zip(&images).enumerate() {
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("pgm");
        let noisy = add_awgn(&im.image, sigma, derive_seed(seed, &[sigma.to_bits() as u64, i as u64]))?.noisy;
        save_gray(&noisy, out.join(format!("{}_s{sigma}.{ext}", im.id)))?;
    }
    println!("wrote {} images to {}", images.len(), out.display());
    Ok(())
}

fn train(config: &Path, out: Option<PathBuf>, resume: Option<PathBuf>) -> CmdResult {
    let mut cfg = TrainConfig::load(config)?;
    if let Some(out) = out {
        cfg.out_dir = Some(out);
    }
    let out_dir = cfg
        .out_dir
        .clone()
        .ok_or_else(|| Failure::usage("no output directory: set out_dir in the config or pass --out"))?;
    let manifest = cfg
        .train_manifest
        .clone()
        .ok_or_else(|| Failure::usage("config has no train_manifest"))?;
    let corpus: Vec<GrayImage> = load_corpus(&manifest)?.into_iter().map(|n| n.image).collect();
    let eval = match &cfg.eval_manifest {
        Some(m) => load_corpus(m)?,
        None => Vec::new(),
    };
    create_dir(&out_dir)?;

    let mut trainer = match resume {
        Some(path) => Trainer::resume(cfg, &corpus, Checkpoint::load(path)?)?,
        None => Trainer::new(cfg, &corpus)?,
    };
    let result = trainer.run(&eval, |ckpt| ckpt.save(out_dir.join(format!("epoch_{}.winckpt", ckpt.meta.epoch))));
    if let Err(e) = result {
        if let Error::Diverged { last_good, .. } = &e {
            let path = out_dir.join("last_good.winckpt");
            if last_good.save(&path).is_ok() {
                eprintln!("saved last good state to {}", path.display());
            }
        }
        let _ = trainer.log().save_csv(out_dir.join("train_log.csv"));
        return Err(e.into());
    }
    let (ckpt, log) = trainer.finish();
    ckpt.save(out_dir.join("model.winckpt"))?;
    log.save_csv(out_dir.join("train_log.csv"))?;
    let last = log.steps.last().map(|s| s.loss).unwrap_or(f64::NAN);
    println!(
        "trained {} steps in {:.1}s, final loss {last:.6}; wrote {}",
        ckpt.meta.step,
        log.wall_seconds,
        out_dir.join("model.winckpt").display()
    );
    Ok(())
}

fn denoise(ckpt: &Path, input: &Path, out: &Path) -> CmdResult {
    let ckpt = Checkpoint::load(ckpt)?;
    let noisy = load_gray(input)?;
    let restored = denoise_image(&ckpt.model, &noisy)?.clipped();
    save_gray(&restored, out)?;
    Ok(())
}

fn eval(
    ckpt: &Path,
    manifest: &Path,
    sigmas: &[f32],
    seed: u64,
    out: &Path,
    method: Option<String>,
    curve: Option<PathBuf>,
) -> CmdResult {
    check_sigmas(sigmas)?;
    let ckpt = Checkpoint::load(ckpt)?;
    let images = load_corpus(manifest)?;
    let label = method.unwrap_or_else(|| ckpt.model.config().variant.label().to_string());
    let report = evaluate(&ckpt.model, &images, sigmas, seed, &label)?;
    report.save_csv(out)?;
    if let Some(path) = curve {
        write_text(&path, &curve_csv(&behavior_curve(&report)?))?;
    }
    for a in report.aggregates() {
        println!("{} sigma {}: {:.2} dB / {:.4}", a.method, a.sigma, a.psnr_db, a.ssim);
    }
    Ok(())
}

fn hist(a: &Path, b: &Path, sigmas: &[f32], seed: u64, out: &Path) -> CmdResult {
    check_sigmas(sigmas)?;
    let (img_a, img_b) = (load_gray(a)?, load_gray(b)?);
    let mut csv = String::from("sigma,distance\n");
    for &sigma in sigmas {
        let s = derive_seed(seed, &[sigma.to_bits() as u64]);
        let ha = histogram(&add_awgn(&img_a, sigma, s)?.noisy);
        let hb = histogram(&add_awgn(&img_b, sigma, s)?.noisy);
        let _ = writeln!(csv, "{sigma},{}", hist_distance(&ha, &hb)?);
    }
    write_text(out, &csv)?;
    print!("{csv}");
    Ok(())
}

fn panel(clean: &Path, ckpts: &[PathBuf], sigma: f32, seed: u64, out: &Path) -> CmdResult {
    check_sigmas(&[sigma])?;
    let clean_img = load_gray(clean)?;
    let noisy = add_awgn(&clean_img, sigma, eval_noise_seed(seed, sigma, 0))?.noisy;
    let mut panels = vec![("clean".to_string(), clean_img.clone()), ("noisy".to_string(), noisy.clipped())];
    for path in ckpts {
        let ckpt = Checkpoint::load(path)?;
        let name = path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
        panels.push((name, denoise_image(&ckpt.model, &noisy)?.clipped()));
    }
    let mut sidecar = String::from("panel,psnr_db,ssim\n");
    for (name, img) in &panels {
        let _ = writeln!(sidecar, "{name},{},{}", psnr(&clean_img, img)?, ssim(&clean_img, img)?);
    }
    let refs: Vec<&GrayImage> = panels.iter().map(|(_, img)| img).collect();
    save_gray(&GrayImage::hconcat(&refs)?, out)?;
    write_text(&out.with_extension("txt"), &sidecar)?;
    print!("{sidecar}");
    Ok(())
}

fn configure_threads() -> CmdResult {
    let Ok(value) = std::env::var("WIN_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::usage(format!("WIN_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure {
            code: 3,
            message: e.to_string(),
        })
}

fn run(cli: Cli) -> CmdResult {
    configure_threads()?;
    match cli.command {
        Command::Noise { input, sigma, seed, out } => noise(&input, sigma, seed, &out),
        Command::Train { config, out, resume } => train(&config, out, resume),
        Command::Denoise { ckpt, input, out } => denoise(&ckpt, &input, &out),
        Command::Eval {
            ckpt,
            manifest,
            sigmas,
            seed,
            out,
            method,
            curve,
        } => eval(&ckpt, &manifest, &sigmas, seed, &out, method, curve),
        Command::Hist { a, b, sigmas, seed, out } => hist(&a, &b, &sigmas, seed, &out),
        Command::Panel {
            clean,
            ckpts,
            sigma,
            seed,
            out,
        } => panel(&clean, &ckpts, sigma, seed, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
