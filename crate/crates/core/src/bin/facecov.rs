use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use facecov::bof::CODEBOOK_SIZES;
use facecov::covpool::pool_regions;
use facecov::meshgeom::{
    estimate_curvatures, preprocess, render_curvature_map, render_depth_map, MapImage, PreprocessParams,
};
use facecov::pipeline::{
    evaluate, format_fold, format_report, format_sweep, generate_synthetic, load_trained, run_cv, save_trained,
    shallow_spd_descriptors, sweep_codebooks, train_full, write_summary, RunConfig, SynthParams,
};
use facecov::spdnet::{save_chain, SpdChain, SpdChainConfig, SpdMatrix};
use facecov::tensorio::{read_fmap, read_manifest, read_mesh, write_fmap, FeatureTensor};
use facecov::{Error, Result, SymMatrix};

/// Covariance-descriptor 3D facial expression recognition.
#[derive(Parser)]
#[command(name = "facecov", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

/// Run settings. A `--config` file supplies the base values and any flag
/// given here overrides it.
#[derive(Args)]
struct Global {
    /// key=value run configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Fused streams, comma separated (`shallow` or a manifest tensor name)
    #[arg(long, global = true)]
    streams: Option<String>,
    /// Pyramid levels for deep pooling, e.g. 1,2
    #[arg(long, global = true)]
    regions: Option<String>,
    /// SPD schedule, e.g. 512,250,100,50, or `auto`
    #[arg(long, global = true)]
    spd_dims: Option<String>,
    #[arg(long, global = true)]
    spd_eps: Option<f64>,
    /// Seeds folds, BiMap weights, the SVM and synthetic data
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    codebook_size: Option<usize>,
    #[arg(long, global = true)]
    kmeans_seed: Option<u64>,
    #[arg(long, global = true)]
    kmeans_restarts: Option<usize>,
    #[arg(long, global = true)]
    svm_c: Option<f64>,
    #[arg(long, global = true)]
    folds: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a labelled synthetic dataset (meshes, tensors, manifest)
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 30)]
        subjects: usize,
        #[arg(long, default_value_t = 6)]
        classes: usize,
    },
    /// Patch covariances of one scan as FMAP [40, 6, 6]; optionally the
    /// depth and curvature maps as FMAP [1, 224, 224] (or PGM by extension)
    ExtractShallow {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        depth_map: Option<PathBuf>,
        #[arg(long)]
        curvature_map: Option<PathBuf>,
    },
    /// Region covariances of a [c, h, w] tensor as FMAP [n, c, c]
    Pool {
        #[arg(long)]
        tensor: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// BiMap/ReEig/LogEig reduction of FMAP [n, c, c] to [n, d, d]
    Reduce {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the layer weights and schedule sidecar here
        #[arg(long)]
        save_weights: Option<PathBuf>,
    },
    /// Train codebooks and the classifier on a whole manifest
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Held-out evaluation with --model, otherwise k-fold cross-validation
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Machine-readable summary (cross-validation only)
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Cross-validated accuracy for each codebook size
    Sweep {
        #[arg(long)]
        manifest: PathBuf,
        /// Comma separated; defaults to every supported size
        #[arg(long)]
        sizes: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}

fn parse_list(text: &str, what: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| usage(format!("{what}: expected comma separated integers, got {text:?}")))
}

fn run_config(g: &Global) -> Result<RunConfig> {
    let mut cfg = match &g.config {
        Some(path) => RunConfig::read(path)?,
        None => RunConfig::default(),
    };
    if let Some(s) = &g.streams {
        cfg.streams = s.split(',').map(|x| x.trim().to_string()).collect();
    }
    if let Some(r) = &g.regions {
        cfg.regions = r
            .parse()
            .map_err(|_| usage(format!("--regions: bad level list {r:?}")))?;
    }
    if let Some(d) = &g.spd_dims {
        cfg.spd_dims = if d == "auto" {
            None
        } else {
            Some(parse_list(d, "--spd-dims")?)
        };
    }
    if let Some(e) = g.spd_eps {
        cfg.spd_epsilon = e;
    }
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(k) = g.codebook_size {
        cfg.codebook_size = k;
    }
    if let Some(s) = g.kmeans_seed {
        cfg.kmeans_seed = s;
    }
    if let Some(r) = g.kmeans_restarts {
        cfg.kmeans_restarts = r;
    }
    if let Some(c) = g.svm_c {
        cfg.svm_c = c;
    }
    if let Some(f) = g.folds {
        cfg.folds = f;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn row_major(m: &SymMatrix) -> Vec<f64> {
    let d = m.dim();
    let a = m.as_matrix();
    (0..d).flat_map(|i| (0..d).map(move |j| a[(i, j)])).collect()
}

fn write_stack(mats: &[SymMatrix], path: &Path) -> Result<()> {
    let d = mats.first().map(SymMatrix::dim).unwrap_or(0);
    let data: Vec<f64> = mats.iter().flat_map(row_major).collect();
    let tensor = FeatureTensor::from_f64(vec![mats.len(), d, d], &data)?;
    write_fmap(&tensor, path)?;
    Ok(())
}

fn read_stack(path: &Path) -> Result<Vec<SpdMatrix>> {
    let t = read_fmap(path)?;
    let (n, d) = match t.dims() {
        [n, a, b] if a == b => (*n, *a),
        dims => return Err(usage(format!("{}: expected [n, d, d], found {dims:?}", path.display()))),
    };
    (0..n)
        .map(|k| {
            let block = &t.data()[k * d * d..(k + 1) * d * d];
            let m = nalgebra::DMatrix::from_fn(d, d, |i, j| block[i * d + j] as f64);
            // f32 storage can leave a last-bit asymmetry
            let sym = (&m + m.transpose()) * 0.5;
            Ok(SpdMatrix::new(sym)?)
        })
        .collect()
}

fn write_map(map: &MapImage, path: &Path) -> Result<()> {
    if path.extension().is_some_and(|e| e == "pgm") {
        map.write_pgm(path)?;
    } else {
        write_fmap(&map.to_tensor(), path)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { out, subjects, classes } => {
            let params = SynthParams {
                seed: cli.global.seed.unwrap_or(0),
                subjects,
                classes,
            };
            let manifest = generate_synthetic(&out, &params)?;
            println!(
                "wrote {} samples to {}",
                manifest.len(),
                out.join("manifest.tsv").display()
            );
        }
        Command::ExtractShallow {
            mesh,
            out,
            depth_map,
            curvature_map,
        } => {
            let raw = read_mesh(&mesh)?;
            let covs = shallow_spd_descriptors(&raw)?;
            let syms: Vec<SymMatrix> = covs.iter().map(|c| c.as_sym().clone()).collect();
            write_stack(&syms, &out)?;
            if depth_map.is_some() || curvature_map.is_some() {
                let cleaned = preprocess(&raw, &PreprocessParams::default())?;
                if let Some(p) = depth_map {
                    write_map(&render_depth_map(&cleaned)?, &p)?;
                }
                if let Some(p) = curvature_map {
                    write_map(&render_curvature_map(&estimate_curvatures(&cleaned)?)?, &p)?;
                }
            }
            println!("{} patch covariances -> {}", syms.len(), out.display());
        }
        Command::Pool { tensor, out } => {
            let cfg = run_config(&cli.global)?;
            let pooled = pool_regions(&read_fmap(&tensor)?, &cfg.regions)?;
            let syms: Vec<SymMatrix> = pooled.iter().map(|c| c.as_sym().clone()).collect();
            write_stack(&syms, &out)?;
            println!("{} region covariances -> {}", syms.len(), out.display());
        }
        Command::Reduce {
            input,
            out,
            save_weights,
        } => {
            let cfg = run_config(&cli.global)?;
            let mats = read_stack(&input)?;
            let c = mats.first().ok_or_else(|| usage("input holds no matrices"))?.dim();
            let schedule: SpdChainConfig = cfg.spd_schedule(c)?;
            let chain = SpdChain::seeded(schedule, cfg.seed)?;
            let reduced = mats.iter().map(|m| chain.reduce(m)).collect::<Result<Vec<_>, _>>()?;
            write_stack(&reduced, &out)?;
            if let Some(dir) = save_weights {
                save_chain(&chain, &dir, "chain")?;
            }
            let d = chain.config.output_dim();
            println!("{} matrices reduced to {d}x{d} -> {}", reduced.len(), out.display());
        }
        Command::Train { manifest, out } => {
            let cfg = run_config(&cli.global)?;
            let m = read_manifest(&manifest)?;
            let model = train_full(&m, &cfg)?;
            save_trained(&model, &out)?;
            println!("trained on {} samples -> {}", m.len(), out.display());
        }
        Command::Eval {
            manifest,
            model,
            summary,
        } => {
            let m = read_manifest(&manifest)?;
            match model {
                Some(dir) => {
                    if summary.is_some() {
                        return Err(usage("--summary applies to cross-validation, not --model"));
                    }
                    let model = load_trained(&dir)?;
                    print!("{}", format_fold(&evaluate(&model, &m)?));
                }
                None => {
                    let cfg = run_config(&cli.global)?;
                    let result = run_cv(&m, &cfg)?;
                    print!("{}", format_report(&result));
                    if let Some(path) = summary {
                        write_summary(&result, &path)?;
                    }
                }
            }
        }
        Command::Sweep { manifest, sizes, out } => {
            let cfg = run_config(&cli.global)?;
            let sizes = match sizes {
                Some(s) => parse_list(&s, "--sizes")?,
                None => CODEBOOK_SIZES.to_vec(),
            };
            let rows = sweep_codebooks(&read_manifest(&manifest)?, &cfg, &sizes)?;
            let table = format_sweep(&rows);
            print!("{table}");
            if let Some(path) = out {
                std::fs::write(&path, table).map_err(|e| facecov::tensorio::FormatError::io(&path, e))?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("facecov: {e}");
            let mut shown = e.to_string();
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                let text = s.to_string();
                if !shown.contains(&text) {
                    eprintln!("  caused by: {text}");
                    shown.push_str(&text);
                }
                source = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
