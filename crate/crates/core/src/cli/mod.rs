//! `ozmac` command line: encode, simulate, profile and the PPA model.
//!
//! Exit codes: 0 success, 2 input or validation error, 3 missing calibration.

pub mod output;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::encoder::oz_encode;
use crate::error::{Error, Result};
use crate::macsim::{self, DotProduct, Unit};
use crate::ppamodel::{self, CalibrationTable, ComparisonRow, CurvePoint, IsoLatencyRow};
use crate::profiler::{self, ModelReport, TensorFile};
use crate::types::{BitWidth, Operand, PrecisionConfig, Role, Signedness};

pub use output::Format;
use output::{fixed, opt_fixed, Rendered, Table};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_CALIBRATION: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "ozmac",
    version,
    about = "Zero-skipping MAC simulator, bit-sparsity profiler and PPA model"
)]
pub struct Cli {
    /// Output format; defaults to `table` on a terminal and `csv` otherwise
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Write output to PATH instead of stdout
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// Calibration JSON; defaults to the embedded TSMC N5 measurements
    #[arg(long, global = true, value_name = "PATH")]
    pub calib: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Oz-encode one value and list its one-hot terms
    Encode {
        #[arg(long)]
        bits: u32,
        #[arg(long, allow_hyphen_values = true)]
        value: i64,
        /// Treat the value as unsigned
        #[arg(long)]
        unsigned: bool,
    },
    /// Dot product of two OZTD tensors on the OzMAC and/or bMAC
    Simulate(SimulateArgs),
    /// Bit-sparsity report of OZTD weight tensors (files or directories)
    Profile {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Calibrated power/area/energy model
    Ppa {
        #[command(subcommand)]
        command: PpaCommand,
    },
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub weights: PathBuf,
    #[arg(long)]
    pub activations: PathBuf,
    #[arg(long, value_enum, default_value_t = UnitArg::Both)]
    pub unit: UnitArg,
    /// Expected precision `WxA`; must match the tensor dtypes
    #[arg(long)]
    pub config: Option<PrecisionConfig>,
    /// Write the per-cycle OzMAC (or bMAC) trace as JSON lines
    #[arg(long, value_name = "PATH")]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum UnitArg {
    Ozmac,
    Bmac,
    Both,
}

impl UnitArg {
    fn units(self) -> Vec<Unit> {
        match self {
            UnitArg::Ozmac => vec![Unit::Ozmac],
            UnitArg::Bmac => vec![Unit::Bmac],
            UnitArg::Both => vec![Unit::Ozmac, Unit::Bmac],
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum PpaCommand {
    /// bMAC vs OzMAC rows with % improvements (precision and frequency sweeps)
    Table {
        /// Precision `WxA`; repeatable. Defaults to all calibrated configurations
        #[arg(long)]
        config: Vec<PrecisionConfig>,
        /// Clock frequency in GHz; repeatable
        #[arg(long, default_values_t = [ppamodel::BASE_FREQ_GHZ])]
        freq: Vec<f64>,
    },
    /// Energy per MAC of both units against bit sparsity
    Curve {
        #[arg(long, default_value = "8x8")]
        config: PrecisionConfig,
        #[arg(long, default_value_t = ppamodel::BASE_FREQ_GHZ)]
        freq: f64,
        /// Grid step; 0.01 gives 101 points from 0 to 1
        #[arg(long, default_value_t = 0.01)]
        step: f64,
    },
    /// OzMAC clocked to match the bMAC's per-MAC latency
    Iso {
        /// Precision `WxA`; repeatable. Defaults to 4x4, 4x8, 8x8, 8x16
        #[arg(long)]
        config: Vec<PrecisionConfig>,
    },
}

/// Parses `args` (including the program name), runs the command and writes
/// to `stdout` unless `--out` is given. Returns the process exit code.
pub fn run<I, S>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write, is_terminal: bool) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let format = cli.format.unwrap_or(if is_terminal && cli.out.is_none() {
        Format::Table
    } else {
        Format::Csv
    });

    let rendered = match execute(&cli) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return if e.is_missing_calibration() {
                EXIT_CALIBRATION
            } else {
                EXIT_INPUT
            };
        }
    };

    let written = match &cli.out {
        Some(path) => File::create(path).and_then(|f| {
            let mut w = BufWriter::new(f);
            rendered.write(format, &mut w)?;
            w.flush()
        }),
        None => rendered.write(format, &mut *stdout),
    };
    match written {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: writing output: {e}");
            EXIT_INPUT
        }
    }
}

fn execute(cli: &Cli) -> Result<Rendered> {
    match &cli.command {
        Command::Encode {
            bits,
            value,
            unsigned,
        } => cmd_encode(*value, *bits, *unsigned),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Profile { paths } => cmd_profile(paths),
        Command::Ppa { command } => {
            let calib = match &cli.calib {
                Some(p) => CalibrationTable::load(p)?,
                None => CalibrationTable::embedded(),
            };
            cmd_ppa(command, &calib)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodeOutput {
    pub value: i64,
    pub bits: u32,
    pub signedness: Signedness,
    pub negative: bool,
    pub cycles: u32,
    pub terms: Vec<EncodedTerm>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedTerm {
    pub cycle: u32,
    pub position: u8,
    pub mask: String,
}

pub fn cmd_encode(value: i64, bits: u32, unsigned: bool) -> Result<Rendered> {
    let signedness = if unsigned {
        Signedness::Unsigned
    } else {
        Signedness::TwosComplement
    };
    let width = BitWidth::try_from(bits)?;
    let op = Operand::weight(value, width, signedness)?;
    let stream = oz_encode(&op);
    let terms: Vec<EncodedTerm> = stream
        .terms
        .iter()
        .enumerate()
        .map(|(i, t)| EncodedTerm {
            cycle: i as u32,
            position: t.position,
            mask: t.to_binary(bits as usize),
        })
        .collect();

    let mut table = Table::new(["cycle", "position", "mask"]);
    for t in &terms {
        table.push(vec![
            t.cycle.to_string(),
            t.position.to_string(),
            t.mask.clone(),
        ]);
    }
    let masks = terms
        .iter()
        .map(|t| t.mask.as_str())
        .collect::<Vec<_>>()
        .join(",");
    let cycles = stream.cycles();
    let plural = if cycles == 1 { "cycle" } else { "cycles" };
    let sign = if stream.negative { ", negative" } else { "" };
    let text = if masks.is_empty() {
        format!("({cycles} {plural}{sign})")
    } else {
        format!("{masks} ({cycles} {plural}{sign})")
    };

    let out = EncodeOutput {
        value,
        bits,
        signedness,
        negative: stream.negative,
        cycles,
        terms,
    };
    Ok(Rendered::new(table, &out).with_text(text))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateRow {
    pub unit: Unit,
    pub config: String,
    pub pairs: usize,
    pub result: i64,
    pub total_cycles: u64,
    pub avg_cycles_per_mac: f64,
}

impl SimulateRow {
    fn new(unit: Unit, cfg: &PrecisionConfig, d: &DotProduct) -> Self {
        Self {
            unit,
            config: cfg.label(),
            pairs: d.pairs,
            result: d.result,
            total_cycles: d.total_cycles,
            avg_cycles_per_mac: d.avg_cycles(),
        }
    }
}

fn tensor_operands(t: &TensorFile, role: Role) -> Result<Vec<Operand>> {
    t.values
        .iter()
        .map(|&v| Operand::new(v, t.dtype_bits, t.signedness, role))
        .collect()
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<Rendered> {
    let w = profiler::load_tensor(&args.weights)?;
    let a = profiler::load_tensor(&args.activations)?;
    if w.signedness != a.signedness {
        return Err(Error::BadHeader(format!(
            "weights are {} but activations are {}",
            w.signedness, a.signedness
        )));
    }
    let cfg = PrecisionConfig {
        weight_bits: w.dtype_bits,
        activation_bits: a.dtype_bits,
        signedness: w.signedness,
    };
    if let Some(expected) = args.config {
        if (expected.weight_bits, expected.activation_bits)
            != (cfg.weight_bits, cfg.activation_bits)
        {
            return Err(Error::BadHeader(format!(
                "tensors are {} but --config is {}",
                cfg.label(),
                expected.label()
            )));
        }
    }
    let wops = tensor_operands(&w, Role::Weight)?;
    let aops = tensor_operands(&a, Role::Activation)?;

    let units = args.unit.units();
    let mut rows = Vec::new();
    for (i, &unit) in units.iter().enumerate() {
        // trace the first requested unit only
        let d = match (&args.trace, i) {
            (Some(path), 0) => {
                let (d, events) = macsim::dot_product_traced(&wops, &aops, &cfg, unit)?;
                write_trace(path, &events)?;
                d
            }
            _ => macsim::dot_product(&wops, &aops, &cfg, unit)?,
        };
        rows.push(SimulateRow::new(unit, &cfg, &d));
    }

    let mut table = Table::new([
        "unit",
        "config",
        "pairs",
        "result",
        "total_cycles",
        "avg_cycles_per_mac",
    ]);
    for r in &rows {
        table.push(vec![
            r.unit.to_string(),
            r.config.clone(),
            r.pairs.to_string(),
            r.result.to_string(),
            r.total_cycles.to_string(),
            fixed(r.avg_cycles_per_mac, 3),
        ]);
    }
    Ok(Rendered::new(table, &rows))
}

fn write_trace(path: &Path, events: &[macsim::MacEvent]) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    let res: io::Result<()> = events.iter().try_for_each(|e| {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")
    });
    res.and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn cmd_profile(paths: &[PathBuf]) -> Result<Rendered> {
    let mut layers = Vec::new();
    for p in paths {
        if p.is_dir() {
            layers.extend(profiler::layers_in_dir(p)?);
        } else {
            layers.push((profiler::layer_name(p), p.clone()));
        }
    }
    let report: ModelReport = profiler::model_report(&layers)?;

    let mut table = Table::new(["name", "count", "avg_ones", "bit_sparsity_pct"]);
    for r in report
        .layers
        .iter()
        .chain(std::iter::once(&report.aggregate))
    {
        table.push(vec![
            r.name.clone(),
            r.count.to_string(),
            fixed(r.avg_ones, 3),
            fixed(r.bit_sparsity_pct, 2),
        ]);
    }
    Ok(Rendered::new(table, &report))
}

pub fn cmd_ppa(cmd: &PpaCommand, calib: &CalibrationTable) -> Result<Rendered> {
    match cmd {
        PpaCommand::Table { config, freq } => {
            let configs = if config.is_empty() {
                ppamodel::sweep_default_configs()
            } else {
                config.clone()
            };
            let mut rows = Vec::new();
            for c in &configs {
                rows.extend(ppamodel::frequency_sweep(calib, c, freq)?);
            }
            Ok(Rendered::new(comparison_table(&rows), &rows))
        }
        PpaCommand::Curve { config, freq, step } => {
            if !(*step > 0.0 && *step <= 1.0) {
                return Err(Error::BadHeader(format!("step {step} outside (0, 1]")));
            }
            let steps = (1.0 / step).round() as u32;
            let points = ppamodel::energy_vs_sparsity(
                calib,
                config,
                *freq,
                &ppamodel::sparsity_grid(steps),
            )?;
            let out = CurveOutput::new(calib, config, *freq, points)?;
            Ok(Rendered::new(curve_table(&out.points), &out))
        }
        PpaCommand::Iso { config } => {
            let configs = if config.is_empty() {
                ppamodel::iso_default_configs()
            } else {
                config.clone()
            };
            let rows = ppamodel::iso_latency_sweep(calib, &configs)?;
            Ok(Rendered::new(iso_table(&rows), &rows))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveOutput {
    pub config: String,
    pub freq_ghz: f64,
    /// Closed-form crossover from the two calibrated powers.
    pub crossover_sparsity: f64,
    /// Where the sampled curves meet, interpolated between grid points.
    pub curve_crossing: Option<f64>,
    pub points: Vec<CurvePoint>,
}

impl CurveOutput {
    fn new(
        calib: &CalibrationTable,
        cfg: &PrecisionConfig,
        freq: f64,
        points: Vec<CurvePoint>,
    ) -> Result<Self> {
        let base = ppamodel::BASE_FREQ_GHZ;
        let pb = calib.record(Unit::Bmac, cfg, base)?.power_mw;
        let po = calib.record(Unit::Ozmac, cfg, base)?.power_mw;
        Ok(Self {
            config: cfg.label(),
            freq_ghz: freq,
            crossover_sparsity: ppamodel::crossover_sparsity(pb, po, cfg.encoded_bits().bits())?,
            curve_crossing: ppamodel::curve_crossing(&points),
            points,
        })
    }
}

fn comparison_table(rows: &[ComparisonRow]) -> Table {
    let mut t = Table::new([
        "config",
        "freq_ghz",
        "source",
        "bmac_area_um2",
        "ozmac_area_um2",
        "bmac_power_mw",
        "ozmac_power_mw",
        "bmac_latency_ns",
        "ozmac_latency_ns",
        "bmac_energy_pj",
        "ozmac_energy_pj",
        "ozmac_avg_cycles",
        "area_improvement_pct",
        "power_improvement_pct",
        "energy_improvement_pct",
        "measured_bmac_power_mw",
        "measured_ozmac_power_mw",
    ]);
    for r in rows {
        t.push(vec![
            r.config.clone(),
            fixed(r.freq_ghz, 2),
            r.source.clone(),
            opt_fixed(r.bmac_area_um2, 3),
            opt_fixed(r.ozmac_area_um2, 3),
            fixed(r.bmac_power_mw, 3),
            fixed(r.ozmac_power_mw, 3),
            fixed(r.bmac_latency_ns, 3),
            fixed(r.ozmac_latency_ns, 3),
            fixed(r.bmac_energy_pj, 3),
            fixed(r.ozmac_energy_pj, 3),
            fixed(r.ozmac_avg_cycles, 3),
            opt_fixed(r.area_improvement_pct, 1),
            fixed(r.power_improvement_pct, 1),
            fixed(r.energy_improvement_pct, 1),
            opt_fixed(r.measured_bmac_power_mw, 3),
            opt_fixed(r.measured_ozmac_power_mw, 3),
        ]);
    }
    t
}

fn curve_table(points: &[CurvePoint]) -> Table {
    let mut t = Table::new(["sparsity", "e_ozmac_pj", "e_bmac_pj", "crossover"]);
    for p in points {
        t.push(vec![
            fixed(p.sparsity, 2),
            fixed(p.e_ozmac_pj, 4),
            fixed(p.e_bmac_pj, 4),
            (p.crossover as u8).to_string(),
        ]);
    }
    t
}

fn iso_table(rows: &[IsoLatencyRow]) -> Table {
    let mut t = Table::new([
        "config",
        "bmac_freq_ghz",
        "bmac_power_mw",
        "bmac_latency_ns",
        "bmac_energy_pj",
        "ozmac_avg_cycles",
        "ozmac_freq_ghz",
        "ozmac_power_mw",
        "ozmac_latency_ns",
        "ozmac_energy_pj",
        "power_improvement_pct",
        "energy_improvement_pct",
    ]);
    for r in rows {
        t.push(vec![
            r.config.clone(),
            fixed(r.bmac_freq_ghz, 2),
            fixed(r.bmac_power_mw, 3),
            fixed(r.bmac_latency_ns, 3),
            fixed(r.bmac_energy_pj, 3),
            fixed(r.ozmac_avg_cycles, 3),
            fixed(r.ozmac_freq_ghz, 2),
            fixed(r.ozmac_power_mw, 3),
            fixed(r.ozmac_latency_ns, 3),
            fixed(r.ozmac_energy_pj, 3),
            fixed(r.power_improvement_pct, 1),
            fixed(r.energy_improvement_pct, 1),
        ]);
    }
    t
}
