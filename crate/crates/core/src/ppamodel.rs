//! Analytical power/performance/area/energy model.
//!
//! Area and average power come from measured calibration records. Energy per
//! MAC is `power × cycles × clock period`; the bMAC always takes one cycle,
//! the OzMAC takes as many cycles as the encoded operand has set bits. Power
//! is a single fused (dynamic + leakage) average per design and frequency and
//! does not depend on sparsity. Under frequency scaling, power is linear in
//! frequency and energy is unchanged.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::macsim::Unit;
use crate::par;
use crate::types::PrecisionConfig;

/// Frequency at which the precision sweep was measured.
pub const BASE_FREQ_GHZ: f64 = 0.5;

const FREQ_EPS: f64 = 1e-9;

static EMBEDDED_CALIBRATION: &str = include_str!("../data/calibration_tsmc_n5.json");

/// The five precision configurations of the calibration sweep.
pub const SWEEP_CONFIGS: [(u32, u32); 5] = [(4, 4), (4, 8), (8, 8), (8, 16), (16, 16)];

/// Configurations evaluated at throughput-matching frequency by default.
/// 16x16 is left out: its latency overhead is too large to be worth matching.
pub const ISO_CONFIGS: [(u32, u32); 4] = [(4, 4), (4, 8), (8, 8), (8, 16)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpaRecord {
    pub unit: Unit,
    pub weight_bits: u32,
    pub activation_bits: u32,
    pub freq_ghz: f64,
    pub area_um2: Option<f64>,
    pub power_mw: f64,
    pub latency_ns: f64,
    pub energy_pj: f64,
    pub provenance: String,
}

impl PpaRecord {
    pub fn period_ns(&self) -> f64 {
        1.0 / self.freq_ghz
    }

    /// Mean cycles per MAC: 1 for the bMAC, `latency × frequency` for the OzMAC.
    pub fn avg_cycles(&self) -> f64 {
        match self.unit {
            Unit::Bmac => 1.0,
            Unit::Ozmac => self.latency_ns * self.freq_ghz,
        }
    }

    /// `power × latency`, the model energy of this record.
    pub fn model_energy_pj(&self) -> f64 {
        self.power_mw * self.latency_ns
    }

    /// Relative gap between the recorded energy and `power × latency`.
    pub fn consistency_error(&self) -> f64 {
        (self.energy_pj - self.model_energy_pj()).abs() / self.energy_pj
    }

    pub fn config_label(&self) -> String {
        format!("{}x{}", self.weight_bits, self.activation_bits)
    }

    fn matches(&self, unit: Unit, cfg: &PrecisionConfig, freq_ghz: f64) -> bool {
        self.unit == unit
            && self.weight_bits == cfg.weight_bits.bits()
            && self.activation_bits == cfg.activation_bits.bits()
            && (self.freq_ghz - freq_ghz).abs() < FREQ_EPS
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CalibrationTable {
    pub records: Vec<PpaRecord>,
}

impl CalibrationTable {
    /// Measured TSMC N5 numbers shipped with the crate.
    pub fn embedded() -> Self {
        Self::from_json(EMBEDDED_CALIBRATION).expect("embedded calibration parses")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let table: Self =
            serde_json::from_str(text).map_err(|e| Error::Calibration(e.to_string()))?;
        table.validate_records()?;
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("records serialize")
    }

    fn validate_records(&self) -> Result<()> {
        for r in &self.records {
            PrecisionConfig::new(r.weight_bits, r.activation_bits, Default::default())
                .map_err(|e| Error::Calibration(format!("{}: {e}", r.provenance)))?;
            let positive = r.freq_ghz > 0.0 && r.power_mw > 0.0 && r.latency_ns > 0.0;
            if !positive || r.energy_pj < 0.0 || r.area_um2.is_some_and(|a| a < 0.0) {
                return Err(Error::Calibration(format!(
                    "{} {} @ {} GHz has non-positive entries",
                    r.unit,
                    r.config_label(),
                    r.freq_ghz
                )));
            }
        }
        Ok(())
    }

    pub fn find(&self, unit: Unit, cfg: &PrecisionConfig, freq_ghz: f64) -> Option<&PpaRecord> {
        self.records.iter().find(|r| r.matches(unit, cfg, freq_ghz))
    }

    pub fn record(&self, unit: Unit, cfg: &PrecisionConfig, freq_ghz: f64) -> Result<&PpaRecord> {
        self.find(unit, cfg, freq_ghz)
            .ok_or_else(|| Error::MissingRecord(format!("{unit} {} @ {freq_ghz} GHz", cfg.label())))
    }

    /// Both units at every sweep configuration plus 8x8 at 0.5, 1.0 and 1.5 GHz.
    pub fn check_coverage(&self) -> Result<()> {
        let mut needed: Vec<(PrecisionConfig, f64)> = SWEEP_CONFIGS
            .iter()
            .map(|&(w, a)| (sweep_config(w, a), BASE_FREQ_GHZ))
            .collect();
        needed.extend([1.0, 1.5].map(|f| (sweep_config(8, 8), f)));
        for (cfg, f) in needed {
            for unit in Unit::ALL {
                self.record(unit, &cfg, f)?;
            }
        }
        Ok(())
    }
}

impl Default for CalibrationTable {
    fn default() -> Self {
        Self::embedded()
    }
}

fn sweep_config(w: u32, a: u32) -> PrecisionConfig {
    PrecisionConfig::new(w, a, Default::default()).expect("sweep widths are valid")
}

pub fn energy_per_mac(power_mw: f64, cycles: f64, period_ns: f64) -> Result<f64> {
    if power_mw < 0.0 {
        return Err(Error::NegativeInput("power_mw"));
    }
    if cycles < 0.0 {
        return Err(Error::NegativeInput("cycles"));
    }
    if period_ns < 0.0 {
        return Err(Error::NegativeInput("period_ns"));
    }
    Ok(power_mw * cycles * period_ns)
}

/// Smallest bit sparsity at which the OzMAC spends no more energy per MAC
/// than the bMAC: `1 - (P_bmac / P_ozmac) / bits`, clamped to `[0, 1]`.
pub fn crossover_sparsity(p_bmac_mw: f64, p_ozmac_mw: f64, bits: u32) -> Result<f64> {
    if p_ozmac_mw <= 0.0 || p_bmac_mw <= 0.0 {
        return Err(Error::NonPositivePower);
    }
    if bits == 0 {
        return Err(Error::NonPositiveInput("bits"));
    }
    Ok((1.0 - (p_bmac_mw / p_ozmac_mw) / bits as f64).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub sparsity: f64,
    pub e_ozmac_pj: f64,
    pub e_bmac_pj: f64,
    /// Set on the first grid point where the OzMAC is no worse than the bMAC.
    pub crossover: bool,
}

/// `0.00, 0.01, ..., 1.00` (or any other `steps`).
pub fn sparsity_grid(steps: u32) -> Vec<f64> {
    let steps = steps.max(1);
    (0..=steps).map(|i| i as f64 / steps as f64).collect()
}

/// Energy per MAC of both units across bit sparsity.
///
/// The OzMAC takes `bits × (1 - s)` cycles where `bits` is the width of the
/// encoded (narrower) operand.
pub fn energy_vs_sparsity(
    calib: &CalibrationTable,
    cfg: &PrecisionConfig,
    freq_ghz: f64,
    sparsity_grid: &[f64],
) -> Result<Vec<CurvePoint>> {
    if freq_ghz <= 0.0 {
        return Err(Error::NonPositiveFrequency(freq_ghz));
    }
    if let Some(&s) = sparsity_grid.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(Error::SparsityOutOfRange(s));
    }
    let oz = resolve(calib, Unit::Ozmac, cfg, freq_ghz)?;
    let b = resolve(calib, Unit::Bmac, cfg, freq_ghz)?;
    let period = 1.0 / freq_ghz;
    let bits = cfg.encoded_bits().bits() as f64;
    let e_bmac = energy_per_mac(b.power_mw, 1.0, period)?;

    let mut points = par::map(sparsity_grid, |&s| {
        let cycles = bits * (1.0 - s);
        CurvePoint {
            sparsity: s,
            e_ozmac_pj: oz.power_mw * cycles * period,
            e_bmac_pj: e_bmac,
            crossover: false,
        }
    });
    // relative slack so an exact tie survives float rounding
    if let Some(p) = points
        .iter_mut()
        .find(|p| p.e_ozmac_pj <= p.e_bmac_pj * (1.0 + 1e-12))
    {
        p.crossover = true;
    }
    Ok(points)
}

/// Sparsity where the two curves meet, by linear interpolation between the
/// bracketing grid points. `None` if they never meet on the grid.
pub fn curve_crossing(points: &[CurvePoint]) -> Option<f64> {
    let gap = |p: &CurvePoint| p.e_ozmac_pj - p.e_bmac_pj;
    if let Some(p) = points.iter().find(|p| gap(p) == 0.0) {
        return Some(p.sparsity);
    }
    points.windows(2).find_map(|w| {
        let (g0, g1) = (gap(&w[0]), gap(&w[1]));
        (g0.signum() != g1.signum())
            .then(|| w[0].sparsity + (w[1].sparsity - w[0].sparsity) * g0 / (g0 - g1))
    })
}

/// Retimes a record to `new_freq_ghz`: power scales with frequency, latency
/// inversely, area and energy are carried over unchanged.
pub fn scale_frequency(record: &PpaRecord, new_freq_ghz: f64) -> Result<PpaRecord> {
    if new_freq_ghz <= 0.0 || !new_freq_ghz.is_finite() {
        return Err(Error::NonPositiveFrequency(new_freq_ghz));
    }
    if (new_freq_ghz - record.freq_ghz).abs() < FREQ_EPS {
        return Ok(record.clone());
    }
    let ratio = new_freq_ghz / record.freq_ghz;
    Ok(PpaRecord {
        freq_ghz: new_freq_ghz,
        power_mw: record.power_mw * ratio,
        latency_ns: record.latency_ns / ratio,
        provenance: format!(
            "frequency-scaled {} -> {} GHz from: {}",
            record.freq_ghz, new_freq_ghz, record.provenance
        ),
        ..record.clone()
    })
}

/// Clock frequency at which `avg_cycles` take `target_latency_ns`.
pub fn iso_latency_frequency(avg_cycles: f64, target_latency_ns: f64) -> Result<f64> {
    if avg_cycles <= 0.0 {
        return Err(Error::NonPositiveInput("avg_cycles"));
    }
    if target_latency_ns <= 0.0 {
        return Err(Error::NonPositiveInput("target_latency_ns"));
    }
    Ok(avg_cycles / target_latency_ns)
}

/// `100 × (baseline - candidate) / baseline`; negative when the candidate is worse.
pub fn improvement_pct(baseline: f64, candidate: f64) -> Result<f64> {
    if baseline <= 0.0 {
        return Err(Error::NonPositiveBaseline(baseline));
    }
    Ok(100.0 * (baseline - candidate) / baseline)
}

/// A calibrated record at `freq_ghz`, or the base-frequency record scaled to it.
fn resolve(
    calib: &CalibrationTable,
    unit: Unit,
    cfg: &PrecisionConfig,
    freq_ghz: f64,
) -> Result<PpaRecord> {
    match calib.find(unit, cfg, freq_ghz) {
        Some(r) => Ok(r.clone()),
        None => scale_frequency(calib.record(unit, cfg, BASE_FREQ_GHZ)?, freq_ghz),
    }
}

/// bMAC vs OzMAC at one configuration and frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub config: String,
    pub freq_ghz: f64,
    /// `calibrated` when both records were measured at this frequency,
    /// `scaled` when retimed from the base frequency.
    pub source: String,
    pub bmac_area_um2: Option<f64>,
    pub ozmac_area_um2: Option<f64>,
    pub bmac_power_mw: f64,
    pub ozmac_power_mw: f64,
    pub bmac_latency_ns: f64,
    pub ozmac_latency_ns: f64,
    pub bmac_energy_pj: f64,
    pub ozmac_energy_pj: f64,
    pub ozmac_avg_cycles: f64,
    pub area_improvement_pct: Option<f64>,
    pub power_improvement_pct: f64,
    pub energy_improvement_pct: f64,
    /// Measured powers at this frequency when the calibration has them and
    /// the row itself was scaled.
    pub measured_bmac_power_mw: Option<f64>,
    pub measured_ozmac_power_mw: Option<f64>,
}

fn compare(
    b: &PpaRecord,
    oz: &PpaRecord,
    source: &str,
    measured: Option<(f64, f64)>,
) -> Result<ComparisonRow> {
    let area_improvement_pct = match (b.area_um2, oz.area_um2) {
        (Some(ba), Some(oa)) => Some(improvement_pct(ba, oa)?),
        _ => None,
    };
    Ok(ComparisonRow {
        config: b.config_label(),
        freq_ghz: b.freq_ghz,
        source: source.to_string(),
        bmac_area_um2: b.area_um2,
        ozmac_area_um2: oz.area_um2,
        bmac_power_mw: b.power_mw,
        ozmac_power_mw: oz.power_mw,
        bmac_latency_ns: b.latency_ns,
        ozmac_latency_ns: oz.latency_ns,
        bmac_energy_pj: b.energy_pj,
        ozmac_energy_pj: oz.energy_pj,
        ozmac_avg_cycles: oz.avg_cycles(),
        area_improvement_pct,
        power_improvement_pct: improvement_pct(b.power_mw, oz.power_mw)?,
        energy_improvement_pct: improvement_pct(b.energy_pj, oz.energy_pj)?,
        measured_bmac_power_mw: measured.map(|m| m.0),
        measured_ozmac_power_mw: measured.map(|m| m.1),
    })
}

/// Comparison at `freq_ghz`. At the base frequency the calibrated records are
/// used as-is; elsewhere both base records are frequency-scaled and any
/// measured power at that frequency is reported alongside.
pub fn comparison(
    calib: &CalibrationTable,
    cfg: &PrecisionConfig,
    freq_ghz: f64,
) -> Result<ComparisonRow> {
    let b0 = calib.record(Unit::Bmac, cfg, BASE_FREQ_GHZ)?;
    let oz0 = calib.record(Unit::Ozmac, cfg, BASE_FREQ_GHZ)?;
    if (freq_ghz - BASE_FREQ_GHZ).abs() < FREQ_EPS {
        return compare(b0, oz0, "calibrated", None);
    }
    let b = scale_frequency(b0, freq_ghz)?;
    let oz = scale_frequency(oz0, freq_ghz)?;
    let measured = calib
        .find(Unit::Bmac, cfg, freq_ghz)
        .zip(calib.find(Unit::Ozmac, cfg, freq_ghz))
        .map(|(mb, mo)| (mb.power_mw, mo.power_mw));
    compare(&b, &oz, "scaled", measured)
}

/// One point of the area/power-vs-precision series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionPoint {
    pub config: String,
    /// weight bits × activation bits
    pub bit_product: u32,
    pub bmac_area_um2: Option<f64>,
    pub ozmac_area_um2: Option<f64>,
    pub bmac_power_mw: f64,
    pub ozmac_power_mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionSweep {
    pub rows: Vec<ComparisonRow>,
    pub series: Vec<PrecisionPoint>,
}

/// Base-frequency comparison over every sweep configuration, ordered by
/// increasing weight × activation bits.
pub fn precision_sweep(calib: &CalibrationTable) -> Result<PrecisionSweep> {
    let rows = SWEEP_CONFIGS
        .iter()
        .map(|&(w, a)| comparison(calib, &sweep_config(w, a), BASE_FREQ_GHZ))
        .collect::<Result<Vec<_>>>()?;
    let series = SWEEP_CONFIGS
        .iter()
        .zip(&rows)
        .map(|(&(w, a), r)| PrecisionPoint {
            config: r.config.clone(),
            bit_product: w * a,
            bmac_area_um2: r.bmac_area_um2,
            ozmac_area_um2: r.ozmac_area_um2,
            bmac_power_mw: r.bmac_power_mw,
            ozmac_power_mw: r.ozmac_power_mw,
        })
        .collect();
    Ok(PrecisionSweep { rows, series })
}

/// Comparison of one configuration at several frequencies.
pub fn frequency_sweep(
    calib: &CalibrationTable,
    cfg: &PrecisionConfig,
    freqs: &[f64],
) -> Result<Vec<ComparisonRow>> {
    freqs.iter().map(|&f| comparison(calib, cfg, f)).collect()
}

/// bMAC at the base frequency against an OzMAC clocked so that its average
/// operation takes exactly one bMAC cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsoLatencyRow {
    pub config: String,
    pub bmac_freq_ghz: f64,
    pub bmac_power_mw: f64,
    pub bmac_latency_ns: f64,
    pub bmac_energy_pj: f64,
    pub ozmac_avg_cycles: f64,
    pub ozmac_freq_ghz: f64,
    pub ozmac_power_mw: f64,
    pub ozmac_latency_ns: f64,
    pub ozmac_energy_pj: f64,
    pub power_improvement_pct: f64,
    pub energy_improvement_pct: f64,
}

pub fn iso_latency(calib: &CalibrationTable, cfg: &PrecisionConfig) -> Result<IsoLatencyRow> {
    let b = calib.record(Unit::Bmac, cfg, BASE_FREQ_GHZ)?;
    let oz0 = calib.record(Unit::Ozmac, cfg, BASE_FREQ_GHZ)?;
    let avg_cycles = oz0.avg_cycles();
    let f = iso_latency_frequency(avg_cycles, b.latency_ns)?;
    let oz = scale_frequency(oz0, f)?;
    Ok(IsoLatencyRow {
        config: cfg.label(),
        bmac_freq_ghz: b.freq_ghz,
        bmac_power_mw: b.power_mw,
        bmac_latency_ns: b.latency_ns,
        bmac_energy_pj: b.energy_pj,
        ozmac_avg_cycles: avg_cycles,
        ozmac_freq_ghz: f,
        ozmac_power_mw: oz.power_mw,
        ozmac_latency_ns: oz.latency_ns,
        ozmac_energy_pj: oz.energy_pj,
        power_improvement_pct: improvement_pct(b.power_mw, oz.power_mw)?,
        energy_improvement_pct: improvement_pct(b.energy_pj, oz.energy_pj)?,
    })
}

pub fn iso_latency_sweep(
    calib: &CalibrationTable,
    configs: &[PrecisionConfig],
) -> Result<Vec<IsoLatencyRow>> {
    configs.iter().map(|c| iso_latency(calib, c)).collect()
}

pub fn iso_default_configs() -> Vec<PrecisionConfig> {
    ISO_CONFIGS
        .iter()
        .map(|&(w, a)| sweep_config(w, a))
        .collect()
}

pub fn sweep_default_configs() -> Vec<PrecisionConfig> {
    SWEEP_CONFIGS
        .iter()
        .map(|&(w, a)| sweep_config(w, a))
        .collect()
}
