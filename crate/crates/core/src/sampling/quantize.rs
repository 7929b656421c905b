//! Color binning.

use crate::model::{ColorBin, ColoredPoint};

/// Channel sum (in 8-bit units) below which a color counts as achromatic
/// under chromaticity binning.
pub const ACHROMATIC_SUM: u32 = 3;

/// Maps a unit-range color to its stratum.
///
/// The base bin is `floor(255 c)` per channel. With `chromaticity` the base
/// bin is normalized by its channel sum, `floor(255 b / (r + g + b))`, which
/// merges brightness variants of one hue; near-black colors go to
/// [`ColorBin::ACHROMATIC`]. Finally `quant_bits` low bits are dropped from
/// each channel.
#[inline]
pub fn quantize_color(color: [f64; 3], quant_bits: u8, chromaticity: bool) -> ColorBin {
    let base = color.map(|c| (255.0 * c).floor().clamp(0.0, 255.0) as u32);
    let channels = if chromaticity {
        let sum: u32 = base.iter().sum();
        if sum < ACHROMATIC_SUM {
            return ColorBin::ACHROMATIC;
        }
        base.map(|b| 255 * b / sum)
    } else {
        base
    };
    let [r, g, b] = channels.map(|c| (c >> quant_bits) as u8);
    ColorBin::rgb(r, g, b)
}

/// Binning parameters bundled for repeated use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Quantizer {
    pub quant_bits: u8,
    pub chromaticity: bool,
}

impl Quantizer {
    /// Exact 8-bit binning.
    pub const EXACT: Quantizer = Quantizer {
        quant_bits: 0,
        chromaticity: false,
    };

    pub fn new(quant_bits: u8, chromaticity: bool) -> Self {
        Self {
            quant_bits,
            chromaticity,
        }
    }

    #[inline]
    pub fn bin(&self, p: &ColoredPoint) -> ColorBin {
        quantize_color(p.color(), self.quant_bits, self.chromaticity)
    }
}
