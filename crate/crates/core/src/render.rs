//! Deterministic 64x64 RGB rasterizer for factor assignments.
//!
//! The renderer is a stylized stand-in with the same factor semantics as the
//! source datasets, not a pixel-exact replica: dSprites panels draw one of
//! {square, ellipse, heart} at (pos_x, pos_y) with the object color on a
//! uniform gray background; 3dshapes panels draw a wall band, a floor band,
//! and one of {cube, cylinder, sphere, capsule} silhouettes whose size follows
//! scale and whose horizontal placement/skew follows azimuth. No
//! anti-aliasing: every pixel is a hard coverage test, so output is
//! bit-identical across platforms.

use crate::error::{Error, Result};
use crate::factor::{FactorAssignment, FactorSpace};
use std::path::Path;

pub const PANEL_SIZE: usize = 64;

/// 8-bit RGB image, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize, fill: [u8; 3]) -> Self {
        let mut pixels = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            pixels.extend_from_slice(&fill);
        }
        Image {
            width,
            height,
            pixels,
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    /// Copy `src` into this image with its top-left corner at (x0, y0).
    pub fn blit(&mut self, src: &Image, x0: usize, y0: usize) {
        for y in 0..src.height {
            let dst_i = ((y0 + y) * self.width + x0) * 3;
            let src_i = y * src.width * 3;
            self.pixels[dst_i..dst_i + src.width * 3]
                .copy_from_slice(&src.pixels[src_i..src_i + src.width * 3]);
        }
    }

    /// Write as 8-bit RGB PNG, no alpha.
    pub fn save_png<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        image::save_buffer(
            path.as_ref(),
            &self.pixels,
            self.width as u32,
            self.height as u32,
            image::ColorType::Rgb8,
        )
        .map_err(|e| Error::Io(std::io::Error::new(std::io::ErrorKind::Other, e)))
    }
}

/// Plain HSL -> RGB at 8-bit depth. Hue in degrees.
pub fn hsl_to_rgb(h: f64, s: f64, l: f64) -> [u8; 3] {
    let h = h.rem_euclid(360.0);
    let c = (1.0 - (2.0 * l - 1.0).abs()) * s;
    let x = c * (1.0 - ((h / 60.0) % 2.0 - 1.0).abs());
    let m = l - c / 2.0;
    let (r, g, b) = match (h / 60.0) as usize {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    [
        ((r + m) * 255.0).round() as u8,
        ((g + m) * 255.0).round() as u8,
        ((b + m) * 255.0).round() as u8,
    ]
}

const OBJ_SATURATION: f64 = 0.9;
const OBJ_LIGHTNESS: f64 = 0.55;

fn gray(intensity: f64) -> [u8; 3] {
    let v = (intensity * 255.0).round() as u8;
    [v, v, v]
}

/// dSprites object half-extent in pixels at scale label 1.0.
const DSPRITES_UNIT_HALF_EXTENT: f64 = 12.0;

#[derive(Clone, Copy)]
enum SpriteShape {
    Square,
    Ellipse,
    Heart,
}

impl SpriteShape {
    /// Coverage test in object-local coordinates (u, v) in [-1, 1], v down.
    fn contains(&self, u: f64, v: f64) -> bool {
        match self {
            SpriteShape::Square => u.abs() <= 1.0 && v.abs() <= 1.0,
            SpriteShape::Ellipse => u * u + (v / 0.62) * (v / 0.62) <= 1.0,
            SpriteShape::Heart => {
                // Implicit heart curve (x^2 + y^2 - 1)^3 - x^2 y^3 <= 0,
                // scaled to the bounding box; y up, lobes at the top.
                let x = 1.14 * u;
                let y = 0.15 - 1.15 * v;
                let a = x * x + y * y - 1.0;
                a * a * a - x * x * y * y * y <= 0.0
            }
        }
    }
}

fn render_dsprites(space: &FactorSpace, a: &FactorAssignment) -> Image {
    let label = |k: usize| space.factors()[k].value_labels[a.values[k] as usize];
    let shape = match a.values[0] {
        0 => SpriteShape::Square,
        1 => SpriteShape::Ellipse,
        _ => SpriteShape::Heart,
    };
    let half = label(1) * DSPRITES_UNIT_HALF_EXTENT;
    // Positions map to [12, 52] so the largest object never clips.
    let cx = 12.0 + label(2) * 40.0;
    let cy = 12.0 + label(3) * 40.0;
    let bg = gray(label(4));
    let fg = hsl_to_rgb(label(5), OBJ_SATURATION, OBJ_LIGHTNESS);

    let mut img = Image::new(PANEL_SIZE, PANEL_SIZE, bg);
    for y in 0..PANEL_SIZE {
        let v = (y as f64 + 0.5 - cy) / half;
        for x in 0..PANEL_SIZE {
            let u = (x as f64 + 0.5 - cx) / half;
            if shape.contains(u, v) {
                img.set(x, y, fg);
            }
        }
    }
    img
}

/// Row where the wall band meets the floor band.
const HORIZON_Y: usize = 42;
/// Row the object silhouette stands on.
const BASE_Y: f64 = 54.0;
/// Object half-width in pixels at scale label 1.0.
const SHAPES3D_UNIT_HALF_WIDTH: f64 = 11.0;

#[derive(Clone, Copy)]
enum SolidShape {
    Cube,
    Cylinder,
    Sphere,
    Capsule,
}

impl SolidShape {
    /// Coverage test in pixel coordinates for an object of half-width `w`
    /// centered at `cx`, standing on `BASE_Y`, with azimuth skew `skew`.
    fn contains(&self, px: f64, py: f64, cx: f64, w: f64, skew: f64) -> bool {
        let above = BASE_Y - py; // height above the base line
        if above < 0.0 {
            return false;
        }
        match self {
            SolidShape::Cube => above <= 2.0 * w && (px - cx - skew * above).abs() <= w,
            SolidShape::Cylinder => {
                let body = above <= 2.0 * w && (px - cx).abs() <= 0.8 * w;
                let du = (px - cx) / (0.8 * w);
                let dv = (py - (BASE_Y - 2.0 * w)) / (0.3 * w);
                body || du * du + dv * dv <= 1.0
            }
            SolidShape::Sphere => {
                let dx = px - cx;
                let dy = py - (BASE_Y - w);
                dx * dx + dy * dy <= w * w
            }
            SolidShape::Capsule => {
                let r = 0.62 * w;
                let top = BASE_Y - 2.1 * w + r;
                let bottom = BASE_Y - r;
                let dx = px - cx;
                if py >= top && py <= bottom {
                    dx.abs() <= r
                } else {
                    let dy = if py < top { py - top } else { py - bottom };
                    dx * dx + dy * dy <= r * r
                }
            }
        }
    }
}

fn render_shapes3d(space: &FactorSpace, a: &FactorAssignment) -> Image {
    let label = |k: usize| space.factors()[k].value_labels[a.values[k] as usize];
    let floor = hsl_to_rgb(label(0), 0.55, 0.45);
    let wall = hsl_to_rgb(label(1), 0.55, 0.60);
    let fg = hsl_to_rgb(label(2), OBJ_SATURATION, 0.50);
    let w = label(3) * SHAPES3D_UNIT_HALF_WIDTH;
    let shape = match a.values[4] {
        0 => SolidShape::Cube,
        1 => SolidShape::Cylinder,
        2 => SolidShape::Sphere,
        _ => SolidShape::Capsule,
    };
    let azimuth = label(5);
    let cx = 32.0 + azimuth * 0.55;
    let skew = azimuth / 300.0;

    let mut img = Image::new(PANEL_SIZE, PANEL_SIZE, wall);
    for y in HORIZON_Y..PANEL_SIZE {
        for x in 0..PANEL_SIZE {
            img.set(x, y, floor);
        }
    }
    for y in 0..PANEL_SIZE {
        let py = y as f64 + 0.5;
        for x in 0..PANEL_SIZE {
            let px = x as f64 + 0.5;
            if shape.contains(px, py, cx, w, skew) {
                img.set(x, y, fg);
            }
        }
    }
    img
}

/// Rasterize one panel. Deterministic in (space, assignment).
pub fn render_panel(space: &FactorSpace, a: &FactorAssignment) -> Result<Image> {
    space.validate(a)?;
    Ok(if space.id().is_dsprites() {
        render_dsprites(space, a)
    } else {
        render_shapes3d(space, a)
    })
}

const SHEET_MARGIN: usize = 4;
const SHEET_GAP: usize = 4;
const SHEET_SEPARATOR: usize = 12;

/// Task-sheet canvas: 3x3 context grid with a blank bottom-right cell and a
/// row of the 6 answer panels below.
pub fn compose_task_sheet(context: &[Image], answers: &[Image]) -> Result<Image> {
    if context.len() != 8 {
        return Err(Error::PanelCount {
            expected: 8,
            actual: context.len(),
        });
    }
    if answers.len() != 6 {
        return Err(Error::PanelCount {
            expected: 6,
            actual: answers.len(),
        });
    }
    let cell = PANEL_SIZE;
    let width = 2 * SHEET_MARGIN + 6 * cell + 5 * SHEET_GAP;
    let grid_side = 3 * cell + 2 * SHEET_GAP;
    let height = 2 * SHEET_MARGIN + grid_side + SHEET_SEPARATOR + cell;
    let mut sheet = Image::new(width, height, [255, 255, 255]);

    let grid_x0 = (width - grid_side) / 2;
    let grid_y0 = SHEET_MARGIN;
    for (i, panel) in context.iter().enumerate() {
        let (row, col) = (i / 3, i % 3);
        sheet.blit(
            panel,
            grid_x0 + col * (cell + SHEET_GAP),
            grid_y0 + row * (cell + SHEET_GAP),
        );
    }
    let ans_y = grid_y0 + grid_side + SHEET_SEPARATOR;
    for (j, panel) in answers.iter().enumerate() {
        sheet.blit(panel, SHEET_MARGIN + j * (cell + SHEET_GAP), ans_y);
    }
    Ok(sheet)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor::{make_space, FactorAssignment, SpaceId};
    use std::collections::HashSet;

    fn dsprites() -> FactorSpace {
        make_space(SpaceId::DspritesReasoning)
    }

    fn object_pixel_count(img: &Image, bg: [u8; 3]) -> usize {
        (0..img.height)
            .flat_map(|y| (0..img.width).map(move |x| (x, y)))
            .filter(|&(x, y)| img.get(x, y) != bg)
            .count()
    }

    #[test]
    fn dsprites_background_is_pure() {
        let s = dsprites();
        let a = FactorAssignment::new(vec![1, 1, 2, 1, 2, 3]);
        let img = render_panel(&s, &a).unwrap();
        let bg = gray(0.5);
        let fg = hsl_to_rgb(180.0, OBJ_SATURATION, OBJ_LIGHTNESS);
        let mut colors = HashSet::new();
        for y in 0..64 {
            for x in 0..64 {
                colors.insert(img.get(x, y));
            }
        }
        assert_eq!(colors, HashSet::from([bg, fg]));
        assert!(object_pixel_count(&img, bg) > 0);
    }

    #[test]
    fn object_pixel_count_increases_with_scale() {
        let s = dsprites();
        for shape in 0..3u16 {
            for px in 0..4u16 {
                for py in 0..4u16 {
                    let counts: Vec<usize> = (0..3u16)
                        .map(|sc| {
                            let a = FactorAssignment::new(vec![shape, sc, px, py, 0, 0]);
                            let img = render_panel(&s, &a).unwrap();
                            object_pixel_count(&img, gray(0.9))
                        })
                        .collect();
                    assert!(
                        counts[0] < counts[1] && counts[1] < counts[2],
                        "shape {shape} pos ({px},{py}): {counts:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn rendering_is_deterministic() {
        let s = make_space(SpaceId::Shapes3dReasoning);
        let a = FactorAssignment::new(vec![3, 7, 1, 2, 3, 1]);
        assert_eq!(render_panel(&s, &a).unwrap(), render_panel(&s, &a).unwrap());
    }

    #[test]
    fn mismatched_assignment_is_rejected() {
        let s = dsprites();
        let a = FactorAssignment::new(vec![0, 0, 0]);
        assert!(render_panel(&s, &a).is_err());
    }

    #[test]
    fn distinct_assignments_render_distinct_images() {
        // Semantic injectivity, exhaustive over dsprites_reasoning.
        let s = dsprites();
        let mut seen = HashSet::new();
        for a in s.iter_assignments() {
            let img = render_panel(&s, &a).unwrap();
            assert!(seen.insert(img.pixels), "duplicate image for {:?}", a);
        }
        assert_eq!(seen.len(), 4320);
    }

    #[test]
    fn shapes3d_factors_all_move_pixels() {
        let s = make_space(SpaceId::Shapes3dReasoning);
        let base = FactorAssignment::new(vec![0, 0, 0, 1, 0, 1]);
        let base_img = render_panel(&s, &base).unwrap();
        for k in 0..6 {
            let mut other = base.clone();
            other.values[k] += 1;
            let img = render_panel(&s, &other).unwrap();
            assert_ne!(img, base_img, "factor {k} did not change the render");
        }
    }

    #[test]
    fn sheet_layout_copies_panels() {
        let s = dsprites();
        let panels: Vec<Image> = (0..14)
            .map(|i| {
                let a = crate::factor::assignment_at(&s, 17 * i + 3).unwrap();
                render_panel(&s, &a).unwrap()
            })
            .collect();
        let (ctx, ans) = panels.split_at(8);
        let sheet = compose_task_sheet(ctx, ans).unwrap();
        assert_eq!((sheet.width, sheet.height), (412, 284));
        // answer strip cell j equals answer panel j
        for (j, panel) in ans.iter().enumerate() {
            let x0 = SHEET_MARGIN + j * (PANEL_SIZE + SHEET_GAP);
            for y in 0..PANEL_SIZE {
                for x in 0..PANEL_SIZE {
                    assert_eq!(sheet.get(x0 + x, 216 + y), panel.get(x, y));
                }
            }
        }
        // context cells present, bottom-right blank
        let grid_x0 = (412 - (3 * PANEL_SIZE + 2 * SHEET_GAP)) / 2;
        for (i, panel) in ctx.iter().enumerate() {
            let (row, col) = (i / 3, i % 3);
            let (x0, y0) = (
                grid_x0 + col * (PANEL_SIZE + SHEET_GAP),
                SHEET_MARGIN + row * (PANEL_SIZE + SHEET_GAP),
            );
            assert_eq!(sheet.get(x0, y0), panel.get(0, 0));
            assert_eq!(sheet.get(x0 + 63, y0 + 63), panel.get(63, 63));
        }
        let blank_x = grid_x0 + 2 * (PANEL_SIZE + SHEET_GAP);
        let blank_y = SHEET_MARGIN + 2 * (PANEL_SIZE + SHEET_GAP);
        for y in 0..PANEL_SIZE {
            for x in 0..PANEL_SIZE {
                assert_eq!(sheet.get(blank_x + x, blank_y + y), [255, 255, 255]);
            }
        }
        // determinism across a full re-render
        let again: Vec<Image> = (0..14)
            .map(|i| {
                let a = crate::factor::assignment_at(&s, 17 * i + 3).unwrap();
                render_panel(&s, &a).unwrap()
            })
            .collect();
        let sheet2 = compose_task_sheet(&again[..8], &again[8..]).unwrap();
        assert_eq!(sheet, sheet2);
    }

    #[test]
    fn sheet_rejects_wrong_panel_counts() {
        let s = dsprites();
        let img = render_panel(&s, &crate::factor::assignment_at(&s, 0).unwrap()).unwrap();
        let seven = vec![img.clone(); 7];
        let six = vec![img.clone(); 6];
        assert!(compose_task_sheet(&seven, &six).is_err());
    }
}
