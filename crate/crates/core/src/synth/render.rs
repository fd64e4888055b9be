use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::font::{glyph, GLYPH_HEIGHT, GLYPH_WIDTH};

pub type Rgb = [f64; 3];

/// Row-major RGB canvas with channel values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Canvas {
    height: usize,
    width: usize,
    pixels: Vec<Rgb>,
}

impl Canvas {
    pub fn new(height: usize, width: usize, fill: Rgb) -> Self {
        Canvas {
            height,
            width,
            pixels: vec![fill; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixel(&self, y: usize, x: usize) -> Rgb {
        self.pixels[y * self.width + x]
    }

    /// Fill the half-open box `[y0, y1) × [x0, x1)`, clipped to the canvas.
    pub fn fill_rect(&mut self, y0: i64, y1: i64, x0: i64, x1: i64, color: Rgb) {
        let (ya, yb) = (clip(y0, self.height), clip(y1, self.height));
        let (xa, xb) = (clip(x0, self.width), clip(x1, self.width));
        for y in ya..yb {
            self.pixels[y * self.width + xa..y * self.width + xb].fill(color);
        }
    }

    /// Trapezoid centred on column `cx`, interpolating its half-width from
    /// `top_half` at row `y0` to `bottom_half` at row `y1 - 1`.
    pub fn fill_trapezoid(&mut self, y0: i64, y1: i64, cx: f64, top_half: f64, bottom_half: f64, color: Rgb) {
        let rows = (y1 - y0).max(1) as f64;
        for y in y0..y1 {
            let t = if rows > 1.0 { (y - y0) as f64 / (rows - 1.0) } else { 1.0 };
            let half = top_half + (bottom_half - top_half) * t;
            let x0 = (cx - half).round() as i64;
            let x1 = (cx + half).round() as i64;
            self.fill_rect(y, y + 1, x0, x1, color);
        }
    }

    /// Draw `text` with the 5×7 font, each font pixel becoming an
    /// `sx × sy` block. Unknown symbols are skipped but still advance.
    #[allow(clippy::too_many_arguments)]
    pub fn draw_text(&mut self, text: &str, top: i64, left: i64, sx: i64, sy: i64, gap: i64, color: Rgb) {
        let advance = GLYPH_WIDTH as i64 * sx + gap;
        for (i, c) in text.chars().enumerate() {
            let Some(rows) = glyph(c) else { continue };
            let x_base = left + i as i64 * advance;
            for (r, bits) in rows.iter().enumerate().take(GLYPH_HEIGHT) {
                for col in 0..GLYPH_WIDTH {
                    if bits & (1 << (GLYPH_WIDTH - 1 - col)) != 0 {
                        let y = top + r as i64 * sy;
                        let x = x_base + col as i64 * sx;
                        self.fill_rect(y, y + sy, x, x + sx, color);
                    }
                }
            }
        }
    }

    /// Apply a brightness factor and additive Gaussian noise, then quantize
    /// to interleaved 8-bit RGB.
    pub fn to_rgb8(&self, illumination: f64, noise_std: f64, rng: &mut impl Rng) -> Vec<u8> {
        let noise = (noise_std > 0.0).then(|| Normal::new(0.0, noise_std).expect("finite std"));
        let mut out = Vec::with_capacity(self.pixels.len() * 3);
        for px in &self.pixels {
            for &v in px {
                let mut v = v * illumination;
                if let Some(n) = &noise {
                    v += n.sample(rng);
                }
                out.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
            }
        }
        out
    }
}

fn clip(v: i64, limit: usize) -> usize {
    v.clamp(0, limit as i64) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rects_are_clipped() {
        let mut c = Canvas::new(4, 4, [0.0; 3]);
        c.fill_rect(-3, 2, 3, 10, [1.0; 3]);
        let lit: usize = (0..4)
            .flat_map(|y| (0..4).map(move |x| (y, x)))
            .filter(|&(y, x)| c.pixel(y, x)[0] == 1.0)
            .count();
        assert_eq!(lit, 2);
        assert_eq!(c.pixel(1, 3), [1.0; 3]);
    }

    #[test]
    fn text_draws_glyph_bits() {
        let mut c = Canvas::new(7, 5, [0.0; 3]);
        c.draw_text("1", 0, 0, 1, 1, 0, [1.0; 3]);
        // '1' has a 3-wide base on the last row
        let base: Vec<f64> = (0..5).map(|x| c.pixel(6, x)[0]).collect();
        assert_eq!(base, vec![0.0, 1.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn quantization_without_noise_is_exact() {
        let c = Canvas::new(1, 2, [0.5, 1.0, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(c.to_rgb8(1.0, 0.0, &mut rng), vec![128, 255, 0, 128, 255, 0]);
        // brightening saturates
        assert_eq!(c.to_rgb8(3.0, 0.0, &mut rng)[..3], [255, 255, 0]);
    }
}
