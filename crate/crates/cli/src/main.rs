//! `dpeh` command line: embed, extract and the benchmark harness.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dpeh::codec::{self, EmbedConfig, Scheme, DEFAULT_AUX_COST};
use dpeh::image::{decode_pgm, encode_pgm, GrayImage};
use dpeh::optimizer::Objective;
use dpeh::predictors::PredictorPair;
use dpeh::reference::{self, Method};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EXIT_CAPACITY: u8 = 3;
const EXIT_CORRUPTION: u8 = 4;
const EXIT_IO: u8 = 5;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "dpeh", version, about = "Reversible data hiding in 8-bit grayscale PGM images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Hide a payload in a cover image.
    Embed(EmbedArgs),
    /// Recover the payload and the exact cover from a stego image.
    Extract(ExtractArgs),
    /// Embed and extract over a set of images and write a PSNR table.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Cpee,
    Mhm,
    Dpeh,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Cpee => Scheme::Cpee,
            SchemeArg::Mhm => Scheme::Mhm,
            SchemeArg::Dpeh => Scheme::Dpeh,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PairArg {
    /// Rhombus mean with the median edge detector.
    Med,
    /// Rhombus mean with the nonlinear rhombus predictor.
    Nonlinear,
    /// Rhombus mean twice (reduces to MHM).
    Rhombus,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Total,
    PerBit,
}

#[derive(Args, Clone)]
struct Tuning {
    /// Number of complexity classes.
    #[arg(long, default_value_t = 16)]
    classes: usize,
    /// Minimum mass of a histogram line before it may expand.
    #[arg(long, default_value_t = 20)]
    min_line_mass: u32,
    /// Capacity slack of the bin optimizer.
    #[arg(long, default_value_t = 2000)]
    delta: usize,
    /// Second predictor of the dpeh scheme.
    #[arg(long, value_enum, default_value = "nonlinear")]
    pair: PairArg,
    /// How the optimizer picks among capacities at or above the payload size.
    #[arg(long, value_enum, default_value = "total")]
    objective: ObjectiveArg,
    /// Distortion charged per estimated side-information bit of an active line.
    #[arg(long, default_value_t = DEFAULT_AUX_COST)]
    aux_cost: u64,
}

impl Tuning {
    fn config(&self) -> EmbedConfig {
        EmbedConfig {
            classes: self.classes,
            min_line_mass: self.min_line_mass,
            delta: self.delta,
            pair: match self.pair {
                PairArg::Med => PredictorPair::RhombusMed,
                PairArg::Nonlinear => PredictorPair::RhombusNonlinear,
                PairArg::Rhombus => PredictorPair::RhombusRhombus,
            },
            objective: match self.objective {
                ObjectiveArg::Total => Objective::TotalDistortion,
                ObjectiveArg::PerBit => Objective::DistortionPerBit,
            },
            aux_cost: self.aux_cost,
        }
    }
}

#[derive(Args)]
struct EmbedArgs {
    /// Cover image (binary PGM, maxval 255).
    #[arg(long)]
    cover: PathBuf,
    /// Payload file; every byte contributes eight bits, MSB first.
    #[arg(long, conflicts_with = "random_bits", required_unless_present = "random_bits")]
    payload: Option<PathBuf>,
    /// Embed this many seeded pseudo-random bits instead of a file.
    #[arg(long)]
    random_bits: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value = "dpeh")]
    scheme: SchemeArg,
    #[command(flatten)]
    tuning: Tuning,
    /// Output stego image.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    stego: PathBuf,
    /// Where to write the recovered cover.
    #[arg(long)]
    out_cover: PathBuf,
    /// Where to write the payload, packed MSB first with a zero-filled last byte.
    #[arg(long)]
    out_payload: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Directory holding `<name>.pgm` for every image.
    #[arg(long, env = "DPEH_IMAGE_DIR")]
    images: PathBuf,
    /// Image names; defaults to the six standard test images.
    #[arg(long, value_delimiter = ',')]
    names: Option<Vec<String>>,
    /// Comma-separated schemes; an empty list writes only the CSV header.
    #[arg(long, default_value = "cpee,mhm,dpeh")]
    schemes: String,
    #[arg(long, value_delimiter = ',', default_value = "10000,20000")]
    capacities: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    tuning: Tuning,
    /// CSV output path.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; 0 uses every available core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<dpeh::Error> for Failure {
    fn from(e: dpeh::Error) -> Self {
        use dpeh::Error::*;
        let code = match &e {
            Capacity { .. } | AuxOverflow { .. } => EXIT_CAPACITY,
            Corruption(_) | Deserialization { .. } => EXIT_CORRUPTION,
            Decode { .. } => EXIT_IO,
            Dimension(_) | Argument(_) => EXIT_USAGE,
            Serialization(_) => 1,
        };
        Failure { code, message: e.to_string() }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure { code: EXIT_IO, message: format!("{}: {e}", path.display()) }
}

fn read_pgm(path: &Path) -> Result<GrayImage, Failure> {
    let bytes = fs::read(path).map_err(|e| io_failure(path, e))?;
    decode_pgm(&bytes).map_err(|e| {
        let mut f = Failure::from(e);
        f.message = format!("{}: {}", path.display(), f.message);
        f
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| io_failure(path, e))
}

/// Seeded uniform payload shared by `embed --random-bits` and `bench`.
fn random_bits(count: usize, seed: u64) -> Vec<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.gen()).collect()
}

fn bytes_to_bits(bytes: &[u8]) -> Vec<bool> {
    bytes.iter().flat_map(|&b| (0..8).rev().map(move |k| b >> k & 1 == 1)).collect()
}

fn bits_to_bytes(bits: &[bool]) -> Vec<u8> {
    bits.chunks(8)
        .map(|c| c.iter().enumerate().fold(0u8, |acc, (i, &b)| acc | (u8::from(b) << (7 - i))))
        .collect()
}

fn cmd_embed(args: &EmbedArgs) -> Result<(), Failure> {
    let cover = read_pgm(&args.cover)?;
    let payload = match (&args.payload, args.random_bits) {
        (Some(path), _) => bytes_to_bits(&fs::read(path).map_err(|e| io_failure(path, e))?),
        (None, Some(n)) => random_bits(n, args.seed),
        (None, None) => unreachable!("clap requires one payload source"),
    };
    let stego = codec::embed_scheme(&cover, &payload, args.scheme.into(), &args.tuning.config())?;
    write_file(&args.out, &encode_pgm(&stego.image))?;
    let r = &stego.report;
    println!("scheme={}", r.scheme.name());
    println!("payload_bits={}", r.payload_bits);
    println!("realized_ec={}", r.realized_ec());
    println!("psnr={:.4}", codec::psnr(&cover, &stego.image)?);
    println!("ed_star={:.1}", r.ed_star());
    println!("aux_bits={}", r.aux_bits);
    println!("n_end={},{}", r.layers[0].pass.n_end, r.layers[1].pass.n_end);
    Ok(())
}

fn cmd_extract(args: &ExtractArgs) -> Result<(), Failure> {
    let stego = read_pgm(&args.stego)?;
    let out = codec::extract(&stego)?;
    write_file(&args.out_cover, &encode_pgm(&out.cover))?;
    write_file(&args.out_payload, &bits_to_bytes(&out.payload))?;
    println!("payload_bits={}", out.payload.len());
    Ok(())
}

struct Job {
    image: usize,
    scheme: Scheme,
    capacity: usize,
}

struct Row {
    realized_ec: usize,
    psnr: f64,
    aux_bits: usize,
    ms_embed: u128,
    ms_extract: u128,
}

fn run_job(cover: &GrayImage, job: &Job, seed: u64, cfg: &EmbedConfig) -> Result<Row, Failure> {
    let payload = random_bits(job.capacity, seed);
    let t0 = Instant::now();
    let stego = codec::embed_scheme(cover, &payload, job.scheme, cfg)?;
    let ms_embed = t0.elapsed().as_millis();
    let t1 = Instant::now();
    let out = codec::extract(&stego.image)?;
    let ms_extract = t1.elapsed().as_millis();
    if out.payload != payload || &out.cover != cover {
        return Err(Failure { code: EXIT_CORRUPTION, message: "round trip mismatch".into() });
    }
    Ok(Row {
        realized_ec: stego.report.realized_ec(),
        psnr: codec::psnr(cover, &stego.image)?,
        aux_bits: stego.report.aux_bits,
        ms_embed,
        ms_extract,
    })
}

fn reference_method(scheme: Scheme) -> Method {
    match scheme {
        Scheme::Cpee => Method::Cpee,
        Scheme::Mhm => Method::Mhm,
        Scheme::Dpeh => Method::Proposed,
    }
}

fn cmd_bench(args: &BenchArgs) -> Result<(), Failure> {
    let names: Vec<String> = args
        .names
        .clone()
        .unwrap_or_else(|| reference::IMAGES.iter().map(|s| s.to_string()).collect());
    let schemes = args
        .schemes
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<Scheme>())
        .collect::<Result<Vec<_>, _>>()?;
    let mut covers = Vec::with_capacity(names.len());
    for name in &names {
        covers.push(read_pgm(&args.images.join(format!("{name}.pgm")))?);
    }
    let jobs: Vec<Job> = (0..names.len())
        .flat_map(|image| {
            let schemes = &schemes;
            args.capacities
                .iter()
                .flat_map(move |&capacity| schemes.iter().map(move |&scheme| Job { image, scheme, capacity }))
        })
        .collect();

    let cfg = args.tuning.config();
    let results: Vec<Mutex<Option<Result<Row, Failure>>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = match args.jobs {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        n => n,
    }
    .min(jobs.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(k) else { break };
                let row = run_job(&covers[job.image], job, args.seed, &cfg);
                *results[k].lock().unwrap() = Some(row);
            });
        }
    });

    let mut csv = String::from("image,scheme,capacity_bits,realized_ec,psnr_db,aux_bits,ms_embed,ms_extract\n");
    let mut failures = Vec::new();
    for (job, slot) in jobs.iter().zip(results) {
        let name = &names[job.image];
        match slot.into_inner().unwrap().expect("every job ran") {
            Ok(row) => {
                csv.push_str(&format!(
                    "{name},{},{},{},{:.4},{},{},{}\n",
                    job.scheme.name(),
                    job.capacity,
                    row.realized_ec,
                    row.psnr,
                    row.aux_bits,
                    row.ms_embed,
                    row.ms_extract
                ));
                let method = reference_method(job.scheme);
                if let (Some(want), Some(tol)) =
                    (reference::psnr_db(name, method, job.capacity), reference::tolerance_db(method))
                {
                    let verdict = if (row.psnr - want).abs() <= tol { "pass" } else { "warn" };
                    println!(
                        "{verdict} {name} {} {}: {:.2} dB vs reference {want:.2} (+/-{tol})",
                        job.scheme.name(),
                        job.capacity,
                        row.psnr
                    );
                } else {
                    println!("run  {name} {} {}: {:.2} dB", job.scheme.name(), job.capacity, row.psnr);
                }
            }
            Err(f) => {
                eprintln!("{name} {} {}: {}", job.scheme.name(), job.capacity, f.message);
                failures.push(f);
            }
        }
    }
    write_file(&args.out, csv.as_bytes())?;
    match failures.into_iter().next() {
        Some(first) => Err(first),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Embed(a) => cmd_embed(a),
        Command::Extract(a) => cmd_extract(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("dpeh: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
