//! Command-line front end for the EM side-channel toolkit.
//!
//! Exit status: 0 success; 1 usage error; 2 data/format error; 3 the attack
//! (or key completion) ran but did not reach a confident result.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use emsca::bfa::{complete_key, BfaOutcome, KnownPair, PartialKey};
use emsca::cema::{attack_key, correlation_surface, success_rate, AttackOptions, KeyPattern};
use emsca::cipher::{decrypt, encrypt, Block64, Key80};
use emsca::dsp::{
    band_filter, fft_magnitude, spectrogram, spectrogram_csv, spectrum_csv, BandMode, BandSpec,
};
use emsca::emts::{read_trace_set_path, write_trace_set_path};
use emsca::leakage::{hypothesis_matrix, ByteIndex};
use emsca::synth::{bench_interferers, synthesize_idle_set, synthesize_set, Interferer, SynthConfig};
use emsca::trace::TraceSet;
use emsca::{Error, Result};

#[derive(Parser)]
#[command(
    name = "emsca",
    version,
    about = "EM side-channel analysis toolkit for PRESENT-80",
    long_about = "Synthesize EM trace sets, inspect them in time and frequency domain, \
recover the first eight key bytes by correlation, and complete the last two by \
exhaustive search.\n\nExit status: 0 success, 1 usage error, 2 data/format error, \
3 attack completed without a confident recovery."
)]
struct Cli {
    /// Worker threads for the numeric engines (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize an EM trace set and write it to an EMTS file.
    Gen(GenArgs),
    /// Recover the eight round-1 key bytes from a trace file by correlation.
    Attack(AttackArgs),
    /// Compare RMS emission of an active trace set against an idle one.
    Sema(SemaArgs),
    /// Frequency-domain view of a trace file: spectrum or spectrogram.
    Semfa(SemfaArgs),
    /// Apply band filters to a trace file and write the filtered set.
    Filter(FilterArgs),
    /// Success-rate sweep: repeated synthesize-and-attack rounds.
    Sr(SrArgs),
    /// Complete the last two key bytes by exhaustive 16-bit search.
    Bfa(BfaArgs),
    /// Encrypt one 64-bit block.
    Encrypt(EncryptArgs),
    /// Decrypt one 64-bit block.
    Decrypt(DecryptArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Number of traces to synthesize.
    #[arg(long, default_value_t = 256)]
    traces: usize,
    /// Encryption key: 20 hex chars, leftmost byte first. Omit with --idle.
    #[arg(long, required_unless_present = "idle")]
    key: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output EMTS file.
    #[arg(long)]
    out: PathBuf,
    /// White-noise standard deviation.
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    /// Emission volts per active bit line.
    #[arg(long, default_value_t = 1.0)]
    gain: f64,
    /// Samples per trace.
    #[arg(long, default_value_t = 4096)]
    samples: usize,
    /// "paper" (the built-in bench tones, optionally "paper:AMPLITUDE") or
    /// FREQ_HZ:AMPLITUDE[,FREQ_HZ:AMPLITUDE...]. Frequencies in Hz;
    /// scientific notation accepted.
    #[arg(long)]
    interferers: Option<String>,
    /// Record the device idling instead of encrypting.
    #[arg(long)]
    idle: bool,
}

#[derive(Args)]
struct AttackArgs {
    /// Input EMTS file.
    #[arg(long = "in")]
    input: PathBuf,
    /// Band applied before correlating: LO:HI in Hz, or a bare center
    /// frequency widened by --half-width. Prefix with notch: to remove the
    /// band instead of keeping it. Repeat or comma-separate for several.
    #[arg(long = "filter", value_delimiter = ',')]
    filters: Vec<String>,
    /// Half-width in Hz applied to single-frequency --filter values.
    #[arg(long, default_value_t = 1e6)]
    half_width: f64,
    /// Ranked candidates kept per byte in the report.
    #[arg(long = "top", default_value_t = 5)]
    top: usize,
    /// Directory for per-byte correlation surfaces (one CSV per key byte:
    /// candidate value followed by rho at every sample).
    #[arg(long)]
    surfaces: Option<PathBuf>,
    /// Emit JSON (the default).
    #[arg(long)]
    json: bool,
    /// Emit CSV instead of JSON.
    #[arg(long, conflicts_with = "json")]
    csv: bool,
}

#[derive(Args)]
struct SemaArgs {
    /// EMTS file captured while the device encrypts.
    #[arg(long)]
    active: PathBuf,
    /// EMTS file captured while the device idles.
    #[arg(long)]
    idle: PathBuf,
    #[arg(long)]
    json: bool,
    #[arg(long, conflicts_with = "json")]
    csv: bool,
}

#[derive(Args)]
struct SemfaArgs {
    /// Input EMTS file.
    #[arg(long = "in")]
    input: PathBuf,
    /// Trace index to transform.
    #[arg(long, default_value_t = 0, conflicts_with = "mean")]
    trace: usize,
    /// Transform the per-sample mean over all traces instead of one trace.
    #[arg(long)]
    mean: bool,
    /// Short-time mode: window length in samples.
    #[arg(long)]
    window: Option<usize>,
    /// Overlap in samples for --window mode (default: half the window).
    #[arg(long, requires = "window")]
    overlap: Option<usize>,
    #[arg(long)]
    json: bool,
    #[arg(long, conflicts_with = "json")]
    csv: bool,
}

#[derive(Args)]
struct FilterArgs {
    /// Input EMTS file.
    #[arg(long = "in")]
    input: PathBuf,
    /// Output EMTS file.
    #[arg(long)]
    out: PathBuf,
    /// Bands to apply in order, same syntax as attack --filter.
    #[arg(long = "filter", value_delimiter = ',', required = true)]
    filters: Vec<String>,
    /// Half-width in Hz applied to single-frequency --filter values.
    #[arg(long, default_value_t = 1e6)]
    half_width: f64,
}

#[derive(Args)]
struct SrArgs {
    /// Key fill pattern: 00, 55, aa, ff (or their 8-bit binary forms).
    #[arg(long)]
    pattern: String,
    #[arg(long, default_value_t = 20)]
    runs: usize,
    /// Traces per run.
    #[arg(long, default_value_t = 256)]
    traces: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// White-noise standard deviation.
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    /// Emission volts per active bit line.
    #[arg(long, default_value_t = 1.0)]
    gain: f64,
    #[arg(long)]
    json: bool,
    #[arg(long, conflicts_with = "json")]
    csv: bool,
}

#[derive(Args)]
struct BfaArgs {
    /// The eight recovered key bytes as 16 hex chars.
    #[arg(long)]
    partial: String,
    /// Known plaintext/ciphertext pair as PT_HEX16:CT_HEX16. Repeatable.
    #[arg(long = "pair", required = true)]
    pairs: Vec<String>,
    #[arg(long)]
    json: bool,
    #[arg(long, conflicts_with = "json")]
    csv: bool,
}

#[derive(Args)]
struct EncryptArgs {
    /// 20 hex chars, leftmost byte first.
    #[arg(long)]
    key: String,
    /// Plaintext block: 16 hex chars.
    #[arg(long)]
    pt: String,
    /// Emit a JSON object instead of the bare ciphertext.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct DecryptArgs {
    /// 20 hex chars, leftmost byte first.
    #[arg(long)]
    key: String,
    /// Ciphertext block: 16 hex chars.
    #[arg(long)]
    ct: String,
    /// Emit a JSON object instead of the bare plaintext.
    #[arg(long)]
    json: bool,
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = cli.threads {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    match dispatch(cli.command) {
        Ok(code) => code,
        // the reader closed the pipe; not an error worth reporting
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Input(_) => 1,
                _ => 2,
            }
        }
    }
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Gen(args) => cmd_gen(args),
        Command::Attack(args) => cmd_attack(args),
        Command::Sema(args) => cmd_sema(args),
        Command::Semfa(args) => cmd_semfa(args),
        Command::Filter(args) => cmd_filter(args),
        Command::Sr(args) => cmd_sr(args),
        Command::Bfa(args) => cmd_bfa(args),
        Command::Encrypt(args) => cmd_encrypt(args),
        Command::Decrypt(args) => cmd_decrypt(args),
    }
}

fn print_out(s: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(s.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn emit_json<T: Serialize>(value: &T) -> Result<()> {
    let s = serde_json::to_string_pretty(value).map_err(|e| Error::Data(e.to_string()))?;
    print_out(&format!("{s}\n"))
}

fn flag_err(flag: &str, e: Error) -> Error {
    let msg = match e {
        Error::Input(m) => m,
        other => other.to_string(),
    };
    Error::Input(format!("{flag}: {msg}"))
}

fn parse_key(flag: &str, hex: &str) -> Result<Key80> {
    Key80::from_hex(hex).map_err(|e| flag_err(flag, e))
}

fn parse_block(flag: &str, hex: &str) -> Result<Block64> {
    Block64::from_hex(hex).map_err(|e| flag_err(flag, e))
}

fn parse_interferers(spec: &str) -> Result<Vec<Interferer>> {
    if spec == "paper" {
        return Ok(bench_interferers(1.0));
    }
    if let Some(amp) = spec.strip_prefix("paper:") {
        let amplitude: f64 = amp.trim().parse().map_err(|_| {
            Error::Input(format!("--interferers: {amp:?} is not an amplitude"))
        })?;
        return Ok(bench_interferers(amplitude));
    }
    spec.split(',')
        .map(|tone| {
            let (freq, amp) = tone.split_once(':').ok_or_else(|| {
                Error::Input(format!(
                    "--interferers: expected FREQ_HZ:AMPLITUDE, got {tone:?}"
                ))
            })?;
            let freq_hz: f64 = freq.trim().parse().map_err(|_| {
                Error::Input(format!("--interferers: {freq:?} is not a frequency in Hz"))
            })?;
            let amplitude: f64 = amp.trim().parse().map_err(|_| {
                Error::Input(format!("--interferers: {amp:?} is not an amplitude"))
            })?;
            Ok(Interferer { freq_hz, amplitude })
        })
        .collect()
}

fn parse_band(spec: &str, half_width: f64) -> Result<BandSpec> {
    let (mode, rest) = if let Some(r) = spec.strip_prefix("notch:") {
        (BandMode::Notch, r)
    } else if let Some(r) = spec.strip_prefix("pass:") {
        (BandMode::Pass, r)
    } else {
        (BandMode::Pass, spec)
    };
    let parse_hz = |s: &str| -> Result<f64> {
        s.trim()
            .parse()
            .map_err(|_| Error::Input(format!("--filter: {s:?} is not a frequency in Hz")))
    };
    match rest.split_once(':') {
        Some((lo, hi)) => Ok(BandSpec {
            low_hz: parse_hz(lo)?,
            high_hz: parse_hz(hi)?,
            mode,
        }),
        None => {
            let center = parse_hz(rest)?;
            Ok(BandSpec {
                low_hz: (center - half_width).max(0.0),
                high_hz: center + half_width,
                mode,
            })
        }
    }
}

fn parse_bands(specs: &[String], half_width: f64) -> Result<Vec<BandSpec>> {
    specs.iter().map(|s| parse_band(s, half_width)).collect()
}

fn apply_filters(set: TraceSet, bands: &[BandSpec]) -> Result<TraceSet> {
    let mut working = set;
    for band in bands {
        working = band_filter(&working, band)?;
    }
    Ok(working)
}

fn cmd_gen(args: GenArgs) -> Result<i32> {
    let mut cfg = SynthConfig {
        noise_sigma: args.noise,
        gain: args.gain,
        samples_per_trace: args.samples,
        seed: args.seed,
        ..SynthConfig::default()
    };
    if let Some(spec) = &args.interferers {
        cfg.interferers = parse_interferers(spec)?;
    }
    let set = if args.idle {
        synthesize_idle_set(args.traces, &cfg)?
    } else {
        let key = parse_key("--key", args.key.as_deref().unwrap_or_default())?;
        synthesize_set(args.traces, key, &cfg)?
    };
    let bytes_written = write_trace_set_path(&set, &args.out)?;
    #[derive(Serialize)]
    struct GenSummary<'a> {
        path: String,
        traces: usize,
        samples_per_trace: usize,
        idle: bool,
        bytes_written: u64,
        config: &'a SynthConfig,
    }
    emit_json(&GenSummary {
        path: args.out.display().to_string(),
        traces: set.len(),
        samples_per_trace: set.samples_per_trace(),
        idle: args.idle,
        bytes_written,
        config: &cfg,
    })?;
    Ok(0)
}

fn export_surfaces(set: &TraceSet, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let plaintexts = set.plaintexts();
    for idx in ByteIndex::all() {
        let m = hypothesis_matrix(&plaintexts, idx);
        let surface = correlation_surface(&m, set)?;
        let file = fs::File::create(dir.join(format!("surface_byte_{}.csv", idx.get())))?;
        let mut w = BufWriter::new(file);
        for candidate in 0..=255u8 {
            write!(w, "{candidate}")?;
            for &rho in surface.row(candidate) {
                write!(w, ",{rho:e}")?;
            }
            writeln!(w)?;
        }
        w.flush()?;
    }
    Ok(())
}

fn cmd_attack(args: AttackArgs) -> Result<i32> {
    let set = read_trace_set_path(&args.input)?;
    let bands = parse_bands(&args.filters, args.half_width)?;
    let report = attack_key(
        &set,
        &AttackOptions {
            filters: bands.clone(),
            top_k: args.top,
        },
    )?;
    if let Some(dir) = &args.surfaces {
        let working = apply_filters(set, &bands)?;
        export_surfaces(&working, dir)?;
    }
    if args.csv {
        let mut s = String::from("byte_index,recovered,peak_abs_rho,peak_sample,margin,confident,correct\n");
        for b in &report.bytes {
            s += &format!(
                "{},{:02X},{:e},{},{},{},{}\n",
                b.byte_index,
                b.recovered,
                b.peak_abs_rho,
                b.peak_sample,
                b.margin.map_or(String::new(), |m| format!("{m:e}")),
                b.confident,
                b.correct.map_or(String::new(), |c| c.to_string()),
            );
        }
        print_out(&s)?;
    } else {
        emit_json(&report)?;
    }
    Ok(if report.all_bytes_confident { 0 } else { 3 })
}

fn cmd_sema(args: SemaArgs) -> Result<i32> {
    let active = read_trace_set_path(&args.active)?;
    let idle = read_trace_set_path(&args.idle)?;
    let report = emsca::sema::compare_sets(&active, &idle)?;
    if args.csv {
        print_out(&format!(
            "field,value\ntraces_active,{}\ntraces_idle,{}\nrms_active,{:e}\nrms_idle,{:e}\nratio_rms,{:e}\npeak_active,{:e}\npeak_idle,{:e}\n",
            report.traces_active,
            report.traces_idle,
            report.rms_active,
            report.rms_idle,
            report.ratio_rms,
            report.peak_active,
            report.peak_idle,
        ))?;
    } else {
        emit_json(&report)?;
    }
    Ok(0)
}

fn cmd_semfa(args: SemfaArgs) -> Result<i32> {
    let set = read_trace_set_path(&args.input)?;
    let samples: Vec<f32> = if args.mean {
        let n = set.len() as f64;
        let mut acc = vec![0.0f64; set.samples_per_trace()];
        for trace in set.traces() {
            for (slot, &v) in acc.iter_mut().zip(&trace.samples) {
                *slot += f64::from(v);
            }
        }
        acc.into_iter().map(|v| (v / n) as f32).collect()
    } else {
        set.traces()
            .get(args.trace)
            .ok_or_else(|| {
                Error::Input(format!(
                    "--trace {} out of range: the file holds {} traces",
                    args.trace,
                    set.len()
                ))
            })?
            .samples
            .clone()
    };
    let mut stdout = std::io::stdout().lock();
    match args.window {
        Some(window) => {
            let overlap = args.overlap.unwrap_or(window / 2);
            let sg = spectrogram(&samples, set.sample_rate_hz(), window, overlap)?;
            if args.csv {
                spectrogram_csv(&sg, &mut stdout)?;
            } else {
                drop(stdout);
                emit_json(&sg)?;
            }
        }
        None => {
            let spectrum = fft_magnitude(&samples, set.sample_rate_hz())?;
            if args.csv {
                spectrum_csv(&spectrum, &mut stdout)?;
            } else {
                drop(stdout);
                emit_json(&spectrum)?;
            }
        }
    }
    Ok(0)
}

fn cmd_filter(args: FilterArgs) -> Result<i32> {
    let set = read_trace_set_path(&args.input)?;
    let bands = parse_bands(&args.filters, args.half_width)?;
    let filtered = apply_filters(set, &bands)?;
    let bytes_written = write_trace_set_path(&filtered, &args.out)?;
    emit_json(&json!({
        "input": args.input.display().to_string(),
        "output": args.out.display().to_string(),
        "bands": bands,
        "traces": filtered.len(),
        "bytes_written": bytes_written,
    }))?;
    Ok(0)
}

fn cmd_sr(args: SrArgs) -> Result<i32> {
    let pattern: KeyPattern = args.pattern.parse().map_err(|e| flag_err("--pattern", e))?;
    let cfg = SynthConfig {
        noise_sigma: args.noise,
        gain: args.gain,
        seed: args.seed,
        ..SynthConfig::default()
    };
    let report = success_rate(pattern, args.runs, args.traces, &cfg)?;
    if args.csv {
        let mut s = String::from("byte,success_rate\n");
        for (i, p) in report.per_byte_success.iter().enumerate() {
            s += &format!("{},{p:e}\n", i + 1);
        }
        s += &format!("full_key,{:e}\n", report.full_key_success);
        print_out(&s)?;
    } else {
        emit_json(&report)?;
    }
    Ok(0)
}

fn cmd_bfa(args: BfaArgs) -> Result<i32> {
    let partial = PartialKey::from_hex(&args.partial).map_err(|e| flag_err("--partial", e))?;
    let pairs: Vec<KnownPair> = args
        .pairs
        .iter()
        .map(|spec| {
            let (pt, ct) = spec.split_once(':').ok_or_else(|| {
                Error::Input(format!("--pair: expected PT_HEX:CT_HEX, got {spec:?}"))
            })?;
            Ok(KnownPair {
                plaintext: parse_block("--pair", pt)?,
                ciphertext: parse_block("--pair", ct)?,
            })
        })
        .collect::<Result<_>>()?;
    let report = complete_key(partial, &pairs)?;
    let code = match report.outcome {
        BfaOutcome::Found(_) => 0,
        _ => 3,
    };
    if args.csv {
        let (kind, keys) = match &report.outcome {
            BfaOutcome::Found(k) => ("found", k.to_hex()),
            BfaOutcome::Ambiguous(ks) => (
                "ambiguous",
                ks.iter().map(|k| k.to_hex()).collect::<Vec<_>>().join(";"),
            ),
            BfaOutcome::NotFound => ("not_found", String::new()),
        };
        print_out(&format!("outcome,trials,keys\n{kind},{},{keys}\n", report.trials))?;
    } else {
        emit_json(&report)?;
    }
    Ok(code)
}

fn cmd_encrypt(args: EncryptArgs) -> Result<i32> {
    let key = parse_key("--key", &args.key)?;
    let pt = parse_block("--pt", &args.pt)?;
    let ct = encrypt(pt, key);
    if args.json {
        emit_json(&json!({ "plaintext": pt, "key": key, "ciphertext": ct }))?;
    } else {
        print_out(&format!("{ct}\n"))?;
    }
    Ok(0)
}

fn cmd_decrypt(args: DecryptArgs) -> Result<i32> {
    let key = parse_key("--key", &args.key)?;
    let ct = parse_block("--ct", &args.ct)?;
    let pt = decrypt(ct, key);
    if args.json {
        emit_json(&json!({ "ciphertext": ct, "key": key, "plaintext": pt }))?;
    } else {
        print_out(&format!("{pt}\n"))?;
    }
    Ok(0)
}
