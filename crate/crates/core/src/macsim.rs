//! Cycle-level behavioral models of the two MAC units.
//!
//! `ozmac_compute` walks the Oz-encoded operand one set bit per cycle,
//! shifting the other operand and adding it into the accumulator.
//! `bmac_compute` is the single-cycle combinational baseline.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::encoder::OzEncoder;
use crate::error::{Error, Result};
use crate::par;
use crate::types::{AccumulatorState, Operand, PrecisionConfig, Role};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    Ozmac,
    Bmac,
}

impl Unit {
    pub const ALL: [Unit; 2] = [Unit::Bmac, Unit::Ozmac];

    pub fn name(self) -> &'static str {
        match self {
            Unit::Ozmac => "ozmac",
            Unit::Bmac => "bmac",
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Unit {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "ozmac" => Ok(Unit::Ozmac),
            "bmac" => Ok(Unit::Bmac),
            other => Err(format!("unknown unit `{other}`")),
        }
    }
}

/// One clock cycle of a MAC unit. `term_position` is `None` for the bMAC,
/// which adds the full product at once.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MacEvent {
    pub cycle_index: u32,
    #[serde(rename = "position")]
    pub term_position: Option<u8>,
    pub addend: i64,
    pub accumulator_after: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacTrace {
    pub result: i64,
    pub cycles: u32,
    pub events: Vec<MacEvent>,
    pub config: PrecisionConfig,
}

impl MacTrace {
    /// Folds the events from `acc_in`; equals `result` for a well-formed trace.
    pub fn replay(&self, acc_in: i64) -> i64 {
        self.events.iter().fold(acc_in, |acc, e| acc + e.addend)
    }

    /// Writes one JSON object per event.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

fn check_operand(op: &Operand, role: Role, cfg: &PrecisionConfig) -> Result<()> {
    let expected = cfg.width_of(role);
    if op.bits != expected {
        return Err(Error::WidthMismatch {
            role,
            expected: expected.bits(),
            actual: op.bits.bits(),
        });
    }
    let (lo, hi) = expected.range(cfg.signedness);
    if op.value < lo || op.value > hi {
        return Err(Error::OutOfRange {
            value: op.value,
            bits: expected.bits(),
            signedness: cfg.signedness,
        });
    }
    Ok(())
}

fn check_pair(weight: &Operand, activation: &Operand, cfg: &PrecisionConfig) -> Result<()> {
    check_operand(weight, Role::Weight, cfg)?;
    check_operand(activation, Role::Activation, cfg)
}

fn check_acc(acc_in: AccumulatorState, cfg: &PrecisionConfig) -> Result<AccumulatorState> {
    // Callers may hand in a state built for another config; re-derive the width.
    AccumulatorState::new(acc_in.value, cfg)
}

pub fn ozmac_compute(
    weight: &Operand,
    activation: &Operand,
    acc_in: AccumulatorState,
    cfg: &PrecisionConfig,
) -> Result<MacTrace> {
    check_pair(weight, activation, cfg)?;
    let (encoded, shifted) = match cfg.encoded_side() {
        Role::Weight => (weight, activation),
        Role::Activation => (activation, weight),
    };

    let mut acc = check_acc(acc_in, cfg)?;
    let mut events = Vec::with_capacity(encoded.magnitude().count_ones() as usize);
    for (cycle, term) in OzEncoder::new(encoded.magnitude()).enumerate() {
        let partial = shifted.value << term.position;
        let addend = if encoded.is_negative() {
            -partial
        } else {
            partial
        };
        acc = acc.checked_add(addend)?;
        events.push(MacEvent {
            cycle_index: cycle as u32,
            term_position: Some(term.position),
            addend,
            accumulator_after: acc.value,
        });
    }

    Ok(MacTrace {
        result: acc.value,
        cycles: events.len() as u32,
        events,
        config: *cfg,
    })
}

pub fn bmac_compute(
    weight: &Operand,
    activation: &Operand,
    acc_in: AccumulatorState,
    cfg: &PrecisionConfig,
) -> Result<MacTrace> {
    check_pair(weight, activation, cfg)?;
    let addend = weight.value * activation.value;
    let acc = check_acc(acc_in, cfg)?.checked_add(addend)?;
    Ok(MacTrace {
        result: acc.value,
        cycles: 1,
        events: vec![MacEvent {
            cycle_index: 0,
            term_position: None,
            addend,
            accumulator_after: acc.value,
        }],
        config: *cfg,
    })
}

pub fn mac_compute(
    unit: Unit,
    weight: &Operand,
    activation: &Operand,
    acc_in: AccumulatorState,
    cfg: &PrecisionConfig,
) -> Result<MacTrace> {
    match unit {
        Unit::Ozmac => ozmac_compute(weight, activation, acc_in, cfg),
        Unit::Bmac => bmac_compute(weight, activation, acc_in, cfg),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DotProduct {
    pub result: i64,
    pub total_cycles: u64,
    pub pairs: usize,
}

impl DotProduct {
    pub fn avg_cycles(&self) -> f64 {
        if self.pairs == 0 {
            0.0
        } else {
            self.total_cycles as f64 / self.pairs as f64
        }
    }
}

/// Sequential dot product on a single unit; the accumulator threads through
/// every pair in order.
pub fn dot_product(
    weights: &[Operand],
    activations: &[Operand],
    cfg: &PrecisionConfig,
    unit: Unit,
) -> Result<DotProduct> {
    run_dot_product(weights, activations, cfg, unit, None)
}

/// Like [`dot_product`], also returning every cycle's event. Cycle indices
/// run across the whole sequence.
pub fn dot_product_traced(
    weights: &[Operand],
    activations: &[Operand],
    cfg: &PrecisionConfig,
    unit: Unit,
) -> Result<(DotProduct, Vec<MacEvent>)> {
    let mut events = Vec::new();
    let d = run_dot_product(weights, activations, cfg, unit, Some(&mut events))?;
    Ok((d, events))
}

fn run_dot_product(
    weights: &[Operand],
    activations: &[Operand],
    cfg: &PrecisionConfig,
    unit: Unit,
    mut sink: Option<&mut Vec<MacEvent>>,
) -> Result<DotProduct> {
    if weights.len() != activations.len() {
        return Err(Error::LengthMismatch {
            weights: weights.len(),
            activations: activations.len(),
        });
    }
    if weights.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut acc = AccumulatorState::zero(cfg);
    let mut total_cycles = 0u64;
    for (w, a) in weights.iter().zip(activations) {
        let trace = mac_compute(unit, w, a, acc, cfg)?;
        if let Some(sink) = sink.as_deref_mut() {
            sink.extend(trace.events.iter().map(|e| MacEvent {
                cycle_index: e.cycle_index + total_cycles as u32,
                ..*e
            }));
        }
        total_cycles += trace.cycles as u64;
        acc.value = trace.result;
    }
    Ok(DotProduct {
        result: acc.value,
        total_cycles,
        pairs: weights.len(),
    })
}

/// Runs independent dot products, one per `(weights, activations)` pair.
pub fn batch_dot_products(
    batch: &[(Vec<Operand>, Vec<Operand>)],
    cfg: &PrecisionConfig,
    unit: Unit,
) -> Result<Vec<DotProduct>> {
    par::map(batch, |(w, a)| dot_product(w, a, cfg, unit))
        .into_iter()
        .collect()
}

/// Mean popcount of the weights' magnitudes.
pub fn average_cycles(weights: &[Operand]) -> Result<f64> {
    if weights.is_empty() {
        return Err(Error::EmptyInput);
    }
    let ones: u64 = weights
        .iter()
        .map(|w| w.magnitude().count_ones() as u64)
        .sum();
    Ok(ones as f64 / weights.len() as f64)
}

/// Outcome of comparing both units against the native product.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub pairs: u64,
    pub result_mismatches: u64,
    pub cycle_mismatches: u64,
    pub errors: u64,
}

impl EquivalenceReport {
    pub fn is_clean(&self) -> bool {
        self.result_mismatches == 0 && self.cycle_mismatches == 0 && self.errors == 0
    }

    fn merge(self, o: Self) -> Self {
        Self {
            pairs: self.pairs + o.pairs,
            result_mismatches: self.result_mismatches + o.result_mismatches,
            cycle_mismatches: self.cycle_mismatches + o.cycle_mismatches,
            errors: self.errors + o.errors,
        }
    }
}

fn check_equivalence(w: i64, a: i64, cfg: &PrecisionConfig) -> EquivalenceReport {
    let mut r = EquivalenceReport {
        pairs: 1,
        ..Default::default()
    };
    let ops = Operand::weight(w, cfg.weight_bits, cfg.signedness)
        .and_then(|w| Operand::activation(a, cfg.activation_bits, cfg.signedness).map(|a| (w, a)));
    let Ok((wo, ao)) = ops else {
        r.errors = 1;
        return r;
    };
    let acc = AccumulatorState::zero(cfg);
    match (
        ozmac_compute(&wo, &ao, acc, cfg),
        bmac_compute(&wo, &ao, acc, cfg),
    ) {
        (Ok(oz), Ok(b)) => {
            let exact = w * a;
            if oz.result != exact || b.result != exact || oz.replay(0) != exact {
                r.result_mismatches = 1;
            }
            let encoded = match cfg.encoded_side() {
                Role::Weight => w,
                Role::Activation => a,
            };
            if oz.cycles != encoded.unsigned_abs().count_ones() || b.cycles != 1 {
                r.cycle_mismatches = 1;
            }
        }
        _ => r.errors = 1,
    }
    r
}

/// Every (weight, activation) pair representable under `cfg`.
/// 4x4 is 256 pairs, 8x8 is 65,536, 8x16 is ~16.8M.
pub fn exhaustive_equivalence(cfg: &PrecisionConfig) -> EquivalenceReport {
    let (wlo, whi) = cfg.weight_bits.range(cfg.signedness);
    let (alo, ahi) = cfg.activation_bits.range(cfg.signedness);
    let wn = (whi - wlo + 1) as u64;
    let an = (ahi - alo + 1) as u64;
    par::map_reduce_range(
        wn,
        EquivalenceReport::default(),
        |wi| {
            let w = wlo + wi as i64;
            (0..an)
                .map(|ai| check_equivalence(w, alo + ai as i64, cfg))
                .fold(EquivalenceReport::default(), EquivalenceReport::merge)
        },
        EquivalenceReport::merge,
    )
}

/// Same check over caller-chosen pairs (random samples, range corners).
pub fn sampled_equivalence(pairs: &[(i64, i64)], cfg: &PrecisionConfig) -> EquivalenceReport {
    par::fold_chunks(
        pairs,
        4096,
        EquivalenceReport::default(),
        |acc, &(w, a)| acc.merge(check_equivalence(w, a, cfg)),
        EquivalenceReport::merge,
    )
}

/// Range corners of a configuration: (min, min), (min, max), (max, min), (max, max).
pub fn range_corners(cfg: &PrecisionConfig) -> [(i64, i64); 4] {
    let (wlo, whi) = cfg.weight_bits.range(cfg.signedness);
    let (alo, ahi) = cfg.activation_bits.range(cfg.signedness);
    [(wlo, alo), (wlo, ahi), (whi, alo), (whi, ahi)]
}

/// Convenience for building operand vectors from raw integers.
pub fn operands(values: &[i64], role: Role, cfg: &PrecisionConfig) -> Result<Vec<Operand>> {
    let bits = cfg.width_of(role);
    values
        .iter()
        .map(|&v| Operand::new(v, bits, cfg.signedness, role))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{BitWidth, Signedness};

    fn cfg(s: &str) -> PrecisionConfig {
        s.parse().unwrap()
    }

    fn pair(w: i64, a: i64, c: &PrecisionConfig) -> (Operand, Operand) {
        (
            Operand::weight(w, c.weight_bits, c.signedness).unwrap(),
            Operand::activation(a, c.activation_bits, c.signedness).unwrap(),
        )
    }

    #[test]
    fn ozmac_follows_the_shift_add_example() {
        let c = cfg("4x4");
        let (w, a) = pair(5, 3, &c);
        let t = ozmac_compute(&w, &a, AccumulatorState::zero(&c), &c).unwrap();
        assert_eq!(t.result, 15);
        assert_eq!(t.cycles, 2);
        assert_eq!(
            t.events,
            vec![
                MacEvent {
                    cycle_index: 0,
                    term_position: Some(2),
                    addend: 12,
                    accumulator_after: 12
                },
                MacEvent {
                    cycle_index: 1,
                    term_position: Some(0),
                    addend: 3,
                    accumulator_after: 15
                },
            ]
        );
    }

    #[test]
    fn zero_weight_costs_no_cycles() {
        let c = cfg("8x8");
        let (w, a) = pair(0, 77, &c);
        let acc = AccumulatorState::new(7, &c).unwrap();
        let t = ozmac_compute(&w, &a, acc, &c).unwrap();
        assert_eq!((t.result, t.cycles), (7, 0));
        assert!(t.events.is_empty());
    }

    #[test]
    fn negative_weight_subtracts() {
        let c = cfg("4x4");
        let (w, a) = pair(-5, 3, &c);
        let t = ozmac_compute(&w, &a, AccumulatorState::zero(&c), &c).unwrap();
        assert_eq!((t.result, t.cycles), (-15, 2));
        assert!(t.events.iter().all(|e| e.addend < 0));
    }

    #[test]
    fn mixed_precision_encodes_narrow_side() {
        let c = PrecisionConfig::new(4, 8, Signedness::TwosComplement).unwrap();
        let w = Operand::weight(3, BitWidth::W4, Signedness::TwosComplement).unwrap();
        let a = Operand::activation(200, BitWidth::W8, Signedness::Unsigned).unwrap();
        // 200 is out of range for signed 8-bit activations.
        assert!(ozmac_compute(&w, &a, AccumulatorState::zero(&c), &c).is_err());

        let c = PrecisionConfig::new(4, 8, Signedness::Unsigned).unwrap();
        let w = Operand::weight(3, BitWidth::W4, Signedness::Unsigned).unwrap();
        let t = ozmac_compute(&w, &a, AccumulatorState::zero(&c), &c).unwrap();
        assert_eq!((t.result, t.cycles), (600, 2));

        // 16x8: the activation is narrower and gets encoded.
        let c = cfg("16x8");
        let (w, a) = pair(-1, 0b0100_0001, &c);
        let t = ozmac_compute(&w, &a, AccumulatorState::zero(&c), &c).unwrap();
        assert_eq!((t.result, t.cycles), (-65, 2));
    }

    #[test]
    fn bmac_is_single_cycle() {
        let c = cfg("8x8");
        for (w, a, want) in [(5, 3, 15), (-128, 127, -16256), (0, 0, 0)] {
            let (wo, ao) = pair(w, a, &c);
            let t = bmac_compute(&wo, &ao, AccumulatorState::zero(&c), &c).unwrap();
            assert_eq!((t.result, t.cycles, t.events.len()), (want, 1, 1));
        }
    }

    #[test]
    fn width_mismatch_is_rejected() {
        let c = cfg("8x8");
        let w = Operand::weight(1, BitWidth::W4, Signedness::TwosComplement).unwrap();
        let a = Operand::activation(1, BitWidth::W8, Signedness::TwosComplement).unwrap();
        assert!(matches!(
            ozmac_compute(&w, &a, AccumulatorState::zero(&c), &c),
            Err(Error::WidthMismatch {
                role: Role::Weight,
                ..
            })
        ));
    }

    #[test]
    fn overflow_surfaces_as_error() {
        let c = cfg("4x4");
        let (w, a) = pair(-8, -8, &c);
        let acc = AccumulatorState::new((1 << 23) - 10, &c).unwrap();
        assert!(matches!(
            ozmac_compute(&w, &a, acc, &c),
            Err(Error::AccumulatorOverflow { .. })
        ));
        assert!(matches!(
            bmac_compute(&w, &a, acc, &c),
            Err(Error::AccumulatorOverflow { .. })
        ));
    }

    #[test]
    fn dot_product_examples() {
        let c = cfg("8x8");
        let w = operands(&[1, 2], Role::Weight, &c).unwrap();
        let a = operands(&[3, 4], Role::Activation, &c).unwrap();
        let d = dot_product(&w, &a, &c, Unit::Ozmac).unwrap();
        assert_eq!((d.result, d.total_cycles), (11, 2));
        let d = dot_product(&w, &a, &c, Unit::Bmac).unwrap();
        assert_eq!((d.result, d.total_cycles), (11, 2));

        let w = operands(&[0, 0, 0], Role::Weight, &c).unwrap();
        let a = operands(&[9, 9, 9], Role::Activation, &c).unwrap();
        let d = dot_product(&w, &a, &c, Unit::Ozmac).unwrap();
        assert_eq!((d.result, d.total_cycles), (0, 0));
        assert_eq!(dot_product(&w, &a, &c, Unit::Bmac).unwrap().total_cycles, 3);

        assert!(matches!(
            dot_product(&w, &a[..2], &c, Unit::Ozmac),
            Err(Error::LengthMismatch {
                weights: 3,
                activations: 2
            })
        ));
        assert_eq!(
            dot_product(&[], &[], &c, Unit::Ozmac),
            Err(Error::EmptyInput)
        );
    }

    #[test]
    fn average_cycles_examples() {
        let c = cfg("8x8");
        let two_bits = operands(&[3, 5, 6, 9, -3, 96], Role::Weight, &c).unwrap();
        assert_eq!(average_cycles(&two_bits).unwrap(), 2.0);
        let zeros = operands(&[0; 10], Role::Weight, &c).unwrap();
        assert_eq!(average_cycles(&zeros).unwrap(), 0.0);
        assert_eq!(average_cycles(&[]), Err(Error::EmptyInput));
    }

    #[test]
    fn exhaustive_4x4_is_clean() {
        let r = exhaustive_equivalence(&cfg("4x4"));
        assert_eq!(r.pairs, 256);
        assert!(r.is_clean(), "{r:?}");
    }

    #[test]
    fn trace_jsonl_has_one_line_per_event() {
        let c = cfg("8x8");
        let (w, a) = pair(0b0110_0001, -3, &c);
        let t = ozmac_compute(&w, &a, AccumulatorState::zero(&c), &c).unwrap();
        let mut buf = Vec::new();
        t.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "{\"cycle_index\":0,\"position\":6,\"addend\":-192,\"accumulator_after\":-192}\n\
             {\"cycle_index\":1,\"position\":5,\"addend\":-96,\"accumulator_after\":-288}\n\
             {\"cycle_index\":2,\"position\":0,\"addend\":-3,\"accumulator_after\":-291}\n"
        );
    }
}
