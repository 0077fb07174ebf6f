//! Domain types shared by the encoder, simulator, profiler and PPA model.
//!
//! Everything here is an immutable value object once constructed.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Extra accumulator bits beyond the full product width.
pub const GUARD_BITS: u32 = 16;

/// Operand bit width. Only 4, 8 and 16 bit operands are modeled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum BitWidth {
    W4,
    W8,
    W16,
}

impl BitWidth {
    pub const ALL: [BitWidth; 3] = [BitWidth::W4, BitWidth::W8, BitWidth::W16];

    pub const fn bits(self) -> u32 {
        match self {
            BitWidth::W4 => 4,
            BitWidth::W8 => 8,
            BitWidth::W16 => 16,
        }
    }

    /// Bytes per element in the OZTD payload.
    pub const fn storage_bytes(self) -> usize {
        (self.bits() as usize).div_ceil(8)
    }

    /// Inclusive representable range under `signedness`.
    pub const fn range(self, signedness: Signedness) -> (i64, i64) {
        let bits = self.bits();
        match signedness {
            Signedness::Unsigned => (0, (1i64 << bits) - 1),
            Signedness::TwosComplement => (-(1i64 << (bits - 1)), (1i64 << (bits - 1)) - 1),
        }
    }
}

impl TryFrom<u32> for BitWidth {
    type Error = Error;

    fn try_from(bits: u32) -> Result<Self> {
        match bits {
            4 => Ok(BitWidth::W4),
            8 => Ok(BitWidth::W8),
            16 => Ok(BitWidth::W16),
            other => Err(Error::UnsupportedWidth(other)),
        }
    }
}

impl From<BitWidth> for u32 {
    fn from(w: BitWidth) -> u32 {
        w.bits()
    }
}

impl fmt::Display for BitWidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.bits())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Signedness {
    Unsigned,
    #[default]
    TwosComplement,
}

impl Signedness {
    pub(crate) fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(Signedness::Unsigned),
            1 => Some(Signedness::TwosComplement),
            _ => None,
        }
    }

    pub(crate) fn to_byte(self) -> u8 {
        match self {
            Signedness::Unsigned => 0,
            Signedness::TwosComplement => 1,
        }
    }
}

impl fmt::Display for Signedness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Signedness::Unsigned => "unsigned",
            Signedness::TwosComplement => "twos_complement",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Weight,
    Activation,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Weight => "weight",
            Role::Activation => "activation",
        })
    }
}

/// Weight/activation precision pair of a MAC unit.
///
/// The operand with fewer bits is the one fed through the Oz-encoder; on a
/// tie the weight is encoded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PrecisionConfig {
    pub weight_bits: BitWidth,
    pub activation_bits: BitWidth,
    pub signedness: Signedness,
}

impl PrecisionConfig {
    pub fn new(weight_bits: u32, activation_bits: u32, signedness: Signedness) -> Result<Self> {
        Ok(Self {
            weight_bits: BitWidth::try_from(weight_bits)?,
            activation_bits: BitWidth::try_from(activation_bits)?,
            signedness,
        })
    }

    pub fn signed(weight_bits: BitWidth, activation_bits: BitWidth) -> Self {
        Self {
            weight_bits,
            activation_bits,
            signedness: Signedness::TwosComplement,
        }
    }

    pub fn encoded_side(&self) -> Role {
        if self.activation_bits < self.weight_bits {
            Role::Activation
        } else {
            Role::Weight
        }
    }

    /// Width of the operand that is Oz-encoded.
    pub fn encoded_bits(&self) -> BitWidth {
        self.weight_bits.min(self.activation_bits)
    }

    pub fn width_of(&self, role: Role) -> BitWidth {
        match role {
            Role::Weight => self.weight_bits,
            Role::Activation => self.activation_bits,
        }
    }

    pub fn accumulator_width(&self) -> u32 {
        self.weight_bits.bits() + self.activation_bits.bits() + GUARD_BITS
    }

    /// Short `WxA` label, e.g. `8x16`.
    pub fn label(&self) -> String {
        format!("{}x{}", self.weight_bits, self.activation_bits)
    }
}

impl FromStr for PrecisionConfig {
    type Err = Error;

    /// Parses `WxA` (e.g. `4x8`) as a two's-complement configuration.
    fn from_str(s: &str) -> Result<Self> {
        let (w, a) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| Error::BadHeader(format!("precision `{s}` is not of the form WxA")))?;
        let parse = |t: &str| {
            t.trim()
                .parse::<u32>()
                .map_err(|_| Error::BadHeader(format!("precision `{s}` is not of the form WxA")))
        };
        PrecisionConfig::new(parse(w)?, parse(a)?, Signedness::TwosComplement)
    }
}

impl fmt::Display for PrecisionConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// A range-checked MAC input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Operand {
    pub value: i64,
    pub bits: BitWidth,
    pub role: Role,
}

impl Operand {
    pub fn new(value: i64, bits: BitWidth, signedness: Signedness, role: Role) -> Result<Self> {
        let (lo, hi) = bits.range(signedness);
        if value < lo || value > hi {
            return Err(Error::OutOfRange {
                value,
                bits: bits.bits(),
                signedness,
            });
        }
        Ok(Self { value, bits, role })
    }

    pub fn weight(value: i64, bits: BitWidth, signedness: Signedness) -> Result<Self> {
        Self::new(value, bits, signedness, Role::Weight)
    }

    pub fn activation(value: i64, bits: BitWidth, signedness: Signedness) -> Result<Self> {
        Self::new(value, bits, signedness, Role::Activation)
    }

    pub fn with_role(self, role: Role) -> Self {
        Self { role, ..self }
    }

    /// Magnitude of the value. `-2^(bits-1)` widens to `2^(bits-1)`.
    pub fn magnitude(&self) -> u32 {
        self.value.unsigned_abs() as u32
    }

    pub fn is_negative(&self) -> bool {
        self.value < 0
    }
}

/// Validates a raw integer as a weight operand of width `bits`.
pub fn validate_operand(value: i64, bits: u32, signedness: Signedness) -> Result<Operand> {
    Operand::weight(value, BitWidth::try_from(bits)?, signedness)
}

/// Running accumulator of a MAC unit, `weight_bits + activation_bits + 16`
/// bits wide. Overflow is an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AccumulatorState {
    pub value: i64,
    pub width: u32,
}

impl AccumulatorState {
    pub fn zero(cfg: &PrecisionConfig) -> Self {
        Self {
            value: 0,
            width: cfg.accumulator_width(),
        }
    }

    pub fn new(value: i64, cfg: &PrecisionConfig) -> Result<Self> {
        Self::zero(cfg).checked(value as i128)
    }

    pub fn bounds(&self) -> (i128, i128) {
        let half = 1i128 << (self.width - 1);
        (-half, half - 1)
    }

    /// Adds `addend`, failing instead of wrapping.
    pub fn checked_add(self, addend: i64) -> Result<Self> {
        self.checked(self.value as i128 + addend as i128)
    }

    fn checked(self, value: i128) -> Result<Self> {
        let (lo, hi) = self.bounds();
        if value < lo || value > hi {
            return Err(Error::AccumulatorOverflow {
                value,
                width: self.width,
            });
        }
        Ok(Self {
            value: value as i64,
            width: self.width,
        })
    }
}
