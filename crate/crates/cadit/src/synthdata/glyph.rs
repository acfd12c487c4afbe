//! Procedural 16x16 digit glyphs: ten fixed stroke templates rendered
//! under a style (stroke width, shear, noise, inversion) with per-sample
//! jitter.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{jitter_px, DataError, DataResult};

/// Rendering style of one domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlyphStyle {
    /// Stroke thickness in pixels (>= 1); widths above 1 dilate the glyph.
    pub stroke_width: u32,
    /// Flip ink and background intensities.
    pub invert: bool,
    /// Per-pixel Gaussian noise standard deviation (>= 0).
    pub noise_sd: f64,
    /// Horizontal shear per row, relative to the vertical center.
    pub shear: f64,
}

impl Default for GlyphStyle {
    fn default() -> Self {
        GlyphStyle { stroke_width: 1, invert: false, noise_sd: 0.0, shear: 0.0 }
    }
}

impl GlyphStyle {
    pub fn with_invert(mut self, invert: bool) -> Self {
        self.invert = invert;
        self
    }

    pub(crate) fn validate(&self) -> DataResult<()> {
        if self.stroke_width < 1 {
            return Err(DataError::BadInput("glyph style: stroke_width must be >= 1".into()));
        }
        if self.noise_sd < 0.0 {
            return Err(DataError::BadInput("glyph style: negative noise_sd".into()));
        }
        Ok(())
    }
}

/// 8x10 single-pixel stroke templates for the digits 0-9.
const TEMPLATES: [[&str; 10]; 10] = [
    [
        "..####..", ".#....#.", ".#....#.", ".#....#.", ".#....#.", ".#....#.", ".#....#.",
        ".#....#.", ".#....#.", "..####..",
    ],
    [
        "....#...", "...##...", "..#.#...", "....#...", "....#...", "....#...", "....#...",
        "....#...", "....#...", "..#####.",
    ],
    [
        ".#####..", "#.....#.", "......#.", "......#.", ".....#..", "....#...", "...#....",
        "..#.....", ".#......", "#######.",
    ],
    [
        ".#####..", "#.....#.", "......#.", "......#.", "..####..", "......#.", "......#.",
        "......#.", "#.....#.", ".#####..",
    ],
    [
        "....##..", "...#.#..", "..#..#..", ".#...#..", "#....#..", "#######.", ".....#..",
        ".....#..", ".....#..", ".....#..",
    ],
    [
        "#######.", "#.......", "#.......", "#####...", ".....#..", "......#.", "......#.",
        "......#.", "#.....#.", ".#####..",
    ],
    [
        "..####..", ".#......", "#.......", "#.......", "#####...", "#....#..", "#.....#.",
        "#.....#.", ".#....#.", "..####..",
    ],
    [
        "#######.", "......#.", ".....#..", ".....#..", "....#...", "....#...", "...#....",
        "...#....", "..#.....", "..#.....",
    ],
    [
        ".#####..", "#.....#.", "#.....#.", "#.....#.", ".#####..", "#.....#.", "#.....#.",
        "#.....#.", "#.....#.", ".#####..",
    ],
    [
        ".#####..", "#.....#.", "#.....#.", "#.....#.", ".######.", "......#.", "......#.",
        ".....#..", "....#...", ".####...",
    ],
];

const SIDE: usize = 16;
/// Template placement inside the 16x16 canvas.
const OFF_X: i32 = 4;
const OFF_Y: i32 = 3;
/// Per-sample shear jitter half-width.
const SHEAR_JITTER: f64 = 0.06;

/// Render one digit under `style` with per-sample jitter. Background is
/// -1, ink +1 (swapped when inverted); output is clamped to [-1, 1].
pub(crate) fn render(digit: usize, style: &GlyphStyle, rng: &mut ChaCha8Rng) -> [f64; SIDE * SIDE] {
    debug_assert!(digit < 10);
    let dx = jitter_px(rng);
    let dy = jitter_px(rng);
    let shear = style.shear + rng.random_range(-SHEAR_JITTER..=SHEAR_JITTER);

    let mut ink = [false; SIDE * SIDE];
    for (r, row) in TEMPLATES[digit].iter().enumerate() {
        for (c, ch) in row.bytes().enumerate() {
            if ch != b'#' {
                continue;
            }
            let y = r as i32 + OFF_Y + dy;
            let x = c as i32 + OFF_X + dx + (shear * (y as f64 - SIDE as f64 / 2.0)).round() as i32;
            if (0..SIDE as i32).contains(&y) && (0..SIDE as i32).contains(&x) {
                ink[y as usize * SIDE + x as usize] = true;
            }
        }
    }

    // 4-neighborhood dilation per extra stroke pixel.
    for _ in 1..style.stroke_width {
        let prev = ink;
        for y in 0..SIDE {
            for x in 0..SIDE {
                if prev[y * SIDE + x] {
                    continue;
                }
                let hit = (y > 0 && prev[(y - 1) * SIDE + x])
                    || (y + 1 < SIDE && prev[(y + 1) * SIDE + x])
                    || (x > 0 && prev[y * SIDE + x - 1])
                    || (x + 1 < SIDE && prev[y * SIDE + x + 1]);
                if hit {
                    ink[y * SIDE + x] = true;
                }
            }
        }
    }

    let mut out = [0.0f64; SIDE * SIDE];
    let noise = Normal::new(0.0, style.noise_sd.max(f64::MIN_POSITIVE)).unwrap();
    for (o, &on) in out.iter_mut().zip(&ink) {
        let mut v = if on { 1.0 } else { -1.0 };
        if style.noise_sd > 0.0 {
            v += noise.sample(rng);
        }
        if style.invert {
            v = -v;
        }
        *o = v.clamp(-1.0, 1.0);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn templates_are_all_distinct_and_nonempty() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let clean = GlyphStyle::default();
        let imgs: Vec<_> = (0..10).map(|d| render(d, &clean, &mut rng)).collect();
        for (i, a) in imgs.iter().enumerate() {
            assert!(a.iter().filter(|&&v| v > 0.0).count() >= 8, "digit {i} too sparse");
            for b in imgs.iter().skip(i + 1) {
                assert_ne!(a.as_slice(), b.as_slice());
            }
        }
    }

    #[test]
    fn stroke_width_two_adds_ink() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let thin = render(3, &GlyphStyle::default(), &mut rng);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let thick = render(3, &GlyphStyle { stroke_width: 2, ..GlyphStyle::default() }, &mut rng);
        let count = |img: &[f64]| img.iter().filter(|&&v| v > 0.0).count();
        assert!(count(&thick) > count(&thin));
    }
}
