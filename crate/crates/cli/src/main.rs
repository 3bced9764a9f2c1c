use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use lofamo::registers::{
    decode_dnp_wd, decode_host_wd, decode_remote_fault, parse_dump, register_name, temp_decode, DNP_WD_ADDR,
    HOST_WD_ADDR, REMOTE_FAULT_ADDR, TEMPERATURE_ADDR,
};
use lofamo::sim::{self, summarize, write_matrix, Scenario, SimError, Trace, World};
use lofamo::NodeCoord;

const DEFAULT_TRACE_BUFFER: usize = 64 * 1024;

#[derive(Parser)]
#[command(name = "lofamo", version, about = "LO|FA|MO fault-awareness simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario, writing trace.tsv and health.txt into the output directory.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Reject register writes with bits outside the mask (true/false).
        #[arg(long, value_name = "BOOL")]
        strict_masks: Option<bool>,
    },
    /// Check a scenario and list its violations.
    Validate { scenario: PathBuf },
    /// Decode one register word, or every watchdog register of a dump file.
    Decode {
        #[arg(required_unless_present = "dump")]
        register: Option<RegisterKind>,
        #[arg(required_unless_present = "dump")]
        hex: Option<String>,
        #[arg(long, conflicts_with_all = ["register", "hex"])]
        dump: Option<PathBuf>,
    },
    /// Run a scenario and dump one node's register file at the end.
    DumpRegisters {
        scenario: PathBuf,
        #[arg(long, value_parser = parse_node)]
        node: NodeCoord,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write the bundled fault-matrix scenarios into a directory.
    Matrix {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Per-fault awareness latency and path from a trace file.
    Summarize { trace: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum RegisterKind {
    DnpWd,
    HostWd,
    RemoteFault,
    Temp,
}

fn parse_node(s: &str) -> Result<NodeCoord, String> {
    s.parse()
}

/// Failure of one invocation, mapped onto the exit code convention.
enum Failure {
    Io(String),
    Domain(String),
}

impl Failure {
    fn io(path: &Path, e: io::Error) -> Self {
        Failure::Io(format!("{}: {e}", path.display()))
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        Failure::Domain(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::io(path, e))
}

fn load_scenario(path: &Path, seed: Option<u64>) -> Result<Scenario, Failure> {
    let mut sc = Scenario::from_toml_str(&read(path)?)?;
    if let Some(seed) = seed {
        sc.seed = seed;
    }
    Ok(sc)
}

fn trace_buffer() -> usize {
    std::env::var("LOFAMO_TRACE_BUFFER")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|n| *n > 0)
        .unwrap_or(DEFAULT_TRACE_BUFFER)
}

fn cmd_run(path: &Path, seed: Option<u64>, out: &Path, strict: Option<bool>) -> CmdResult {
    let mut sc = load_scenario(path, seed)?;
    if let Some(strict) = strict {
        sc.protocol.strict_masks = strict;
    }
    let result = sim::run(&sc)?;
    fs::create_dir_all(out).map_err(|e| Failure::io(out, e))?;
    let trace_path = out.join("trace.tsv");
    let file = File::create(&trace_path).map_err(|e| Failure::io(&trace_path, e))?;
    result
        .trace
        .write_tsv(BufWriter::with_capacity(trace_buffer(), file))
        .map_err(|e| Failure::io(&trace_path, e))?;
    let health_path = out.join("health.txt");
    fs::write(&health_path, result.report.to_string()).map_err(|e| Failure::io(&health_path, e))?;
    let verdict = if result.report.is_all_healthy() {
        "all-healthy"
    } else {
        "degraded"
    };
    println!(
        "{} events, {verdict}; wrote {} and {}",
        result.stats.events,
        trace_path.display(),
        health_path.display()
    );
    Ok(())
}

fn cmd_validate(path: &Path) -> CmdResult {
    let sc = load_scenario(path, None)?;
    let violations = sc.validate();
    if violations.is_empty() {
        println!("ok");
        return Ok(());
    }
    for v in &violations {
        println!("{v}");
    }
    Err(Failure::Domain(format!("{} violations", violations.len())))
}

fn parse_hex(s: &str) -> Result<u32, Failure> {
    let digits = s.trim_start_matches("0x").trim_start_matches("0X");
    u32::from_str_radix(digits, 16).map_err(|_| Failure::Domain(format!("not a hex word: {s}")))
}

fn decode_word(kind: RegisterKind, word: u32) -> Result<String, Failure> {
    let domain = |e: lofamo::RegisterError| Failure::Domain(e.to_string());
    Ok(match kind {
        RegisterKind::DnpWd => decode_dnp_wd(word).map_err(domain)?.to_string(),
        RegisterKind::HostWd => decode_host_wd(word).map_err(domain)?.to_string(),
        RegisterKind::RemoteFault => decode_remote_fault(word).map_err(domain)?.to_string(),
        RegisterKind::Temp => {
            let raw =
                u8::try_from(word).map_err(|_| Failure::Domain(format!("temperature {word:#x} exceeds one byte")))?;
            format!("{} C", temp_decode(raw))
        }
    })
}

fn cmd_decode(kind: Option<RegisterKind>, hex: Option<&str>, dump: Option<&Path>) -> CmdResult {
    if let Some(path) = dump {
        let entries = parse_dump(&read(path)?).map_err(|e| Failure::Domain(e.to_string()))?;
        let mut bad = 0;
        for (addr, word) in entries {
            let kind = match addr {
                DNP_WD_ADDR => Some(RegisterKind::DnpWd),
                HOST_WD_ADDR => Some(RegisterKind::HostWd),
                REMOTE_FAULT_ADDR => Some(RegisterKind::RemoteFault),
                TEMPERATURE_ADDR => Some(RegisterKind::Temp),
                _ => None,
            };
            let name = register_name(addr).unwrap_or("unmapped");
            match kind.map(|k| decode_word(k, word)) {
                Some(Ok(text)) => println!("{addr:08x} {name}: {text}"),
                Some(Err(Failure::Domain(e) | Failure::Io(e))) => {
                    bad += 1;
                    println!("{addr:08x} {name}: error: {e}");
                }
                None => println!("{addr:08x} {name}: {word:08x}"),
            }
        }
        return if bad == 0 {
            Ok(())
        } else {
            Err(Failure::Domain(format!("{bad} registers failed to decode")))
        };
    }
    let (kind, hex) = kind.zip(hex).expect("clap enforces register and hex");
    println!("{}", decode_word(kind, parse_hex(hex)?)?);
    Ok(())
}

fn cmd_dump_registers(path: &Path, node: NodeCoord, seed: Option<u64>) -> CmdResult {
    let sc = load_scenario(path, seed)?;
    if !sc.dims.contains(node) {
        return Err(Failure::Domain(format!("node {node} outside {}", sc.dims)));
    }
    let mut world = World::new(&sc)?;
    world.run_until(sc.duration);
    print!("# dnp {node} t={}\n{}", sc.duration, world.dnp(node).regfile.dump());
    Ok(())
}

fn cmd_matrix(out: &Path, seed: u64) -> CmdResult {
    let paths = write_matrix(out, seed).map_err(|e| Failure::io(out, e))?;
    for p in paths {
        println!("{}", p.display());
    }
    Ok(())
}

fn cmd_summarize(path: &Path) -> CmdResult {
    let trace = Trace::parse(&read(path)?).map_err(|e| Failure::Domain(format!("{}: {e}", path.display())))?;
    let summary = summarize(&trace).map_err(|e| Failure::Domain(e.to_string()))?;
    print!("{summary}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run {
            scenario,
            seed,
            out,
            strict_masks,
        } => cmd_run(scenario, *seed, out, *strict_masks),
        Command::Validate { scenario } => cmd_validate(scenario),
        Command::Decode { register, hex, dump } => cmd_decode(*register, hex.as_deref(), dump.as_deref()),
        Command::DumpRegisters { scenario, node, seed } => cmd_dump_registers(scenario, *node, *seed),
        Command::Matrix { out, seed } => cmd_matrix(out, *seed),
        Command::Summarize { trace } => cmd_summarize(trace),
    };
    let _ = io::stdout().flush();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Domain(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
