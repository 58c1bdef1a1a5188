//! Command line front end: `simulate`, `keydemo`, `bench` and `metrics`.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::avnet::{masked_base, KeySetup};
use crate::config::ScenarioConfig;
use crate::dlog::DlogAlgorithm;
use crate::fl::{write_rounds_csv, Mode, Simulation};
use crate::group::GroupParams;
use crate::metrics::{elements_from_uncompressed_bytes, overhead_report, ConfusionTotals, Mask};
use crate::model::ModelVector;
use crate::orbit::write_windows_csv;
use crate::secure_agg::{aggregate_recover, encrypt_model, quantize, round_id, QuantizationScheme};
use crate::Error;

#[derive(Debug, Parser)]
#[command(
    name = "fedsecure",
    version,
    about = "Secure federated learning over LEO constellations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a full simulation and write rounds.csv, windows.csv and overhead.txt.
    Simulate(SimulateArgs),
    /// Walk through the key setup and verify the aggregation key.
    Keydemo(KeydemoArgs),
    /// Time encryption and recovery and print the overhead report.
    Bench(BenchArgs),
    /// Per-class IoU and Dice between two mask files.
    Metrics(MetricsArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Scenario file; the shipped default scenario when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    max_rounds: Option<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed_crypto: Option<u64>,
    #[arg(long)]
    seed_train: Option<u64>,
}

#[derive(Debug, Args)]
struct KeydemoArgs {
    #[arg(long, default_value_t = 4)]
    parties: usize,
    #[arg(long, default_value_t = 64)]
    bits: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Entries per model vector.
    #[arg(long, short = 'e', default_value_t = 10_000)]
    elements: u64,
    #[arg(long, default_value_t = 2048)]
    bits: u64,
    #[arg(long, default_value_t = 4)]
    parties: usize,
    #[arg(long, default_value_t = 3)]
    samples: usize,
    #[arg(long, default_value_t = DlogAlgorithm::Bsgs)]
    dlog: DlogAlgorithm,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Debug, Args)]
struct MetricsArgs {
    pred: PathBuf,
    truth: PathBuf,
    /// Number of classes; one more than the largest id seen when omitted.
    #[arg(long)]
    classes: Option<usize>,
}

/// Parses `argv` (program name first) and runs the command. Returns the exit code.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    run_with_output(argv, &mut out)
}

/// Like [`run_command`] with the command's report written to `out`.
/// Usage and error messages still go to stderr.
pub fn run_with_output<I, T>(argv: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a, out),
        Command::Keydemo(a) => keydemo(a, out),
        Command::Bench(a) => bench(a, out),
        Command::Metrics(a) => metrics(a, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn simulate(a: SimulateArgs, out: &mut dyn Write) -> Result<(), Error> {
    let mut cfg = match &a.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default_scenario(),
    };
    if let Some(m) = a.mode {
        cfg.run.mode = m;
    }
    if let Some(n) = a.max_rounds {
        cfg.run.max_rounds = n;
    }
    if let Some(s) = a.seed_crypto {
        cfg.seeds.crypto = s;
    }
    if let Some(s) = a.seed_train {
        cfg.seeds.train = s;
    }
    cfg.validate()?;
    let wall_clock = cfg.run.wall_clock_timing;

    let mut sim = Simulation::new(cfg)?;
    let report = sim.run()?;
    fs::create_dir_all(&a.out)?;

    let mut f = BufWriter::new(File::create(a.out.join("rounds.csv"))?);
    write_rounds_csv(&mut f, &sim.trace_meta(), &report.traces, wall_clock)?;
    f.flush()?;
    let mut f = BufWriter::new(File::create(a.out.join("windows.csv"))?);
    write_windows_csv(&sim.windows(), &mut f)?;
    f.flush()?;
    write_overhead(&a.out.join("overhead.txt"), &sim, &report.traces)?;

    writeln!(out, "mode: {}", sim.mode())?;
    for t in &report.traces {
        writeln!(
            out,
            "round {}: {:.1} s -> {:.1} s ({:.2} h), loss {:.6}",
            t.round,
            t.start_s,
            t.end_s,
            t.end_s / 3600.0,
            t.train_loss
        )?;
    }
    writeln!(out, "stopped: {:?}", report.stop)?;
    writeln!(out, "wrote {}", a.out.display())?;
    Ok(())
}

fn write_overhead(path: &Path, sim: &Simulation, traces: &[crate::fl::RoundTrace]) -> Result<(), Error> {
    let e = sim.global_model().len() as u64;
    let bits = sim.group().modulus_bits();
    let r = overhead_report(e, bits, &[]);
    let mut f = BufWriter::new(File::create(path)?);
    writeln!(f, "mode = {}", sim.mode())?;
    writeln!(f, "model_parameters = {e}")?;
    writeln!(f, "group_bits = {bits}")?;
    writeln!(f, "key_setup_bytes = {}", sim.setup_bytes())?;
    writeln!(f, "rounds = {}", traces.len())?;
    writeln!(
        f,
        "uplink_bytes_total = {}",
        traces.iter().map(|t| t.uplink_bytes).sum::<u64>()
    )?;
    writeln!(
        f,
        "downlink_bytes_total = {}",
        traces.iter().map(|t| t.downlink_bytes).sum::<u64>()
    )?;
    writeln!(
        f,
        "clamped_entries_total = {}",
        traces.iter().map(|t| t.clamped_entries).sum::<usize>()
    )?;
    writeln!(f, "point_bytes_uncompressed = {}", r.bytes_uncompressed)?;
    writeln!(f, "point_bytes_compressed = {}", r.bytes_compressed)?;
    writeln!(f, "compression_ratio = {:.4}", r.compression_ratio())?;
    f.flush()?;
    Ok(())
}

fn keydemo(a: KeydemoArgs, out: &mut dyn Write) -> Result<(), Error> {
    let params = GroupParams::generate(a.bits, a.seed)?;
    writeln!(
        out,
        "group: p = {}, q = {}, g = {}",
        params.p(),
        params.q(),
        params.generator()
    )?;
    let setup = KeySetup::run(&params, a.parties, |i| crate::seed::derive_seed(a.seed, &[i as u64]));
    let mut cancel = params.scalar_u64(0);
    for (i, s) in setup.secrets.iter().enumerate() {
        let masked = masked_base(&params, &setup.board, s.index())?;
        // y_i = sum of x_z before i minus sum after i
        let y = setup
            .secrets
            .iter()
            .enumerate()
            .fold(params.scalar_u64(0), |acc, (z, o)| {
                if z < i {
                    params.scalar_add(&acc, o.x())
                } else if z > i {
                    params.scalar_add(&acc, &params.scalar_neg(o.x()))
                } else {
                    acc
                }
            });
        cancel = params.scalar_add(&cancel, &params.scalar_mul(s.x(), &y));
        writeln!(out, "party {}:", s.index())?;
        writeln!(out, "  g^x = {}", s.commitment(&params))?;
        writeln!(out, "  g^y = {masked}")?;
        writeln!(out, "  S   = {}", setup.subset_keys[i].0)?;
    }
    let expected = setup.expected_key(&params);
    writeln!(out, "AK = {}", setup.aggregation_key.value())?;
    writeln!(out, "g^Σs = {expected}")?;
    writeln!(out, "Σ x·y mod q = 0: {}", cancel.is_zero())?;
    writeln!(out, "AK == g^Σs: {}", *setup.aggregation_key.value() == expected)?;
    Ok(())
}

fn bench(a: BenchArgs, out: &mut dyn Write) -> Result<(), Error> {
    let t0 = Instant::now();
    let params = GroupParams::generate(a.bits, a.seed)?;
    writeln!(
        out,
        "group: {} bits, generated in {:.1} ms",
        params.modulus_bits(),
        ms(t0.elapsed())
    )?;
    let scheme = QuantizationScheme::with_defaults(a.parties)?;
    scheme.check_group(&params)?;
    let setup = KeySetup::run(&params, a.parties, |i| crate::seed::derive_seed(a.seed, &[i as u64]));

    let mut rng = ChaCha20Rng::seed_from_u64(a.seed);
    let models: Vec<ModelVector> = (0..a.parties)
        .map(|_| {
            (0..a.elements)
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect::<Vec<f64>>()
                .into()
        })
        .collect();
    let quantized: Vec<_> = models.iter().map(|m| quantize(m, &scheme)).collect();

    let single = quantize(&ModelVector::new(vec![0.5]), &scheme);
    let t0 = Instant::now();
    let _ = encrypt_model(&single, setup.secrets[0].s(), &round_id(0), &params);
    let single_ms = ms(t0.elapsed());

    let mut samples = Vec::new();
    let mut ciphers = Vec::new();
    for round in 1..=a.samples.max(1) as u64 {
        let rid = round_id(round);
        ciphers.clear();
        for (q, s) in quantized.iter().zip(&setup.secrets) {
            let t0 = Instant::now();
            ciphers.push(encrypt_model(q, s.s(), &rid, &params));
            samples.push(t0.elapsed());
        }
    }
    let last = round_id(a.samples.max(1) as u64);
    let t0 = Instant::now();
    let sum = aggregate_recover(
        &ciphers,
        &setup.aggregation_key,
        &last,
        &scheme,
        &params,
        a.dlog,
        a.seed,
    )?;
    let recover_ms = ms(t0.elapsed());
    let expected = crate::secure_agg::plaintext_sum(&quantized)?;

    let r = overhead_report(a.elements, params.modulus_bits(), &samples);
    writeln!(out, "elements: {}", a.elements)?;
    writeln!(out, "encrypt one entry: {single_ms:.3} ms")?;
    writeln!(
        out,
        "encrypt one vector: {:.3} ms (mean of {})",
        r.encrypt_ms_per_vector.unwrap_or(0.0),
        samples.len()
    )?;
    writeln!(out, "recover {} parties ({}): {recover_ms:.3} ms", a.parties, a.dlog)?;
    writeln!(out, "recovered sum matches plaintext: {}", sum == expected)?;
    writeln!(out, "ciphertext bytes per vector: {}", ciphers[0].wire_len(&params))?;
    writeln!(out, "point bytes uncompressed: {}", r.bytes_uncompressed)?;
    writeln!(out, "point bytes compressed: {}", r.bytes_compressed)?;
    writeln!(out, "compression ratio: {:.4}", r.compression_ratio())?;

    let e = elements_from_uncompressed_bytes(992_000_000, 160);
    let at160 = overhead_report(e, 160, &[]);
    writeln!(
        out,
        "at 160 bits, 992 MB uncompressed means e = {e}; compressed size {:.1} MB",
        at160.bytes_compressed as f64 / 1e6
    )?;
    Ok(())
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn metrics(a: MetricsArgs, out: &mut dyn Write) -> Result<(), Error> {
    let pred = Mask::parse(&fs::read_to_string(&a.pred)?)?;
    let truth = Mask::parse(&fs::read_to_string(&a.truth)?)?;
    let classes = match a.classes {
        Some(c) => c,
        None => {
            let max = pred.classes().iter().chain(truth.classes()).copied().max().unwrap_or(0);
            max as usize + 1
        }
    };
    let totals = ConfusionTotals::from_masks(&[pred], &[truth], classes)?;
    let ious = totals.ious();
    let dices = totals.dices();
    writeln!(out, "class,iou,dice")?;
    for (c, (iou, dice)) in ious.iter().zip(&dices).enumerate() {
        writeln!(out, "{c},{iou:.6},{dice:.6}")?;
    }
    let miou = ious.iter().sum::<f64>() / ious.len() as f64;
    let mdice = dices.iter().sum::<f64>() / dices.len() as f64;
    writeln!(out, "mean,{miou:.6},{mdice:.6}")?;
    Ok(())
}
