//! Slice planning: thumbnail + best-grid decomposition of a high-resolution
//! image, and the token accounting that follows from it.
//!
//! Geometry only — no pixels are decoded here. Each grid cell is stretched
//! anisotropically onto one square view of `view_px^2`, and slice rectangles
//! are expressed on the resized canvas `(cols*view_px) x (rows*view_px)`,
//! which they tile exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::TokenGrid;

/// Input image dimensions in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageSpec {
    pub width: u32,
    pub height: u32,
}

impl ImageSpec {
    pub fn new(width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Config(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        Ok(Self { width, height })
    }

    pub fn aspect(&self) -> f64 {
        self.width as f64 / self.height as f64
    }
}

/// Slice layout in grid cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceGrid {
    pub rows: u32,
    pub cols: u32,
}

impl SliceGrid {
    pub fn count(&self) -> u32 {
        self.rows * self.cols
    }

    pub fn aspect(&self) -> f64 {
        self.cols as f64 / self.rows as f64
    }
}

/// What a view represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewRole {
    Thumbnail,
    Slice,
    /// Degenerate global-encoding mode: the whole image as one view.
    Global,
}

/// Source rectangle on the resized canvas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

/// One encoder view: where it comes from and its token grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewSpec {
    pub role: ViewRole,
    pub src_rect: Rect,
    pub view_px: u32,
    pub token_rows: u32,
    pub token_cols: u32,
}

impl ViewSpec {
    pub fn token_grid(&self) -> TokenGrid {
        TokenGrid::new(self.token_rows as usize, self.token_cols as usize)
    }

    pub fn tokens(&self) -> usize {
        self.token_grid().tokens()
    }
}

/// Thumbnail plus slices, with the grid that produced them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlicePlan {
    pub image: ImageSpec,
    pub max_slices: u32,
    pub grid: SliceGrid,
    pub thumbnail: ViewSpec,
    pub slices: Vec<ViewSpec>,
    pub total_tokens: usize,
}

impl SlicePlan {
    /// Views in encoder order: thumbnail first, slices row-major.
    pub fn views(&self) -> Vec<ViewSpec> {
        let mut v = Vec::with_capacity(1 + self.slices.len());
        v.push(self.thumbnail);
        v.extend_from_slice(&self.slices);
        v
    }

    pub fn view_count(&self) -> usize {
        1 + self.slices.len()
    }

    pub fn token_grids(&self) -> Vec<TokenGrid> {
        self.views().iter().map(ViewSpec::token_grid).collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "width": self.image.width,
            "height": self.image.height,
            "max_slices": self.max_slices,
            "grid": { "rows": self.grid.rows, "cols": self.grid.cols },
            "views": self.views(),
        })
    }
}

/// All grids `(r, c)` with `r*c <= max_slices`, sorted lexicographically.
pub fn enumerate_grids(max_slices: u32) -> Vec<SliceGrid> {
    let mut grids = Vec::new();
    for rows in 1..=max_slices {
        for cols in 1..=max_slices / rows {
            grids.push(SliceGrid { rows, cols });
        }
    }
    grids
}

/// Aspect mismatch score: `|log(grid_aspect / image_aspect)|`.
pub fn grid_score(grid: SliceGrid, image: ImageSpec) -> f64 {
    (grid.aspect() / image.aspect()).ln().abs()
}

/// Best grid under the aspect score; ties prefer more slices, then fewer
/// rows.
pub fn select_grid(image: ImageSpec, max_slices: u32) -> SliceGrid {
    let mut best = SliceGrid { rows: 1, cols: 1 };
    let mut best_score = grid_score(best, image);
    for grid in enumerate_grids(max_slices) {
        let score = grid_score(grid, image);
        let better = score < best_score
            || (score == best_score
                && (grid.count() > best.count()
                    || (grid.count() == best.count() && grid.rows < best.rows)));
        if better {
            best = grid;
            best_score = score;
        }
    }
    best
}

fn check_view_divisibility(view_px: u32, patch_px: u32) -> Result<u32> {
    if patch_px == 0 || view_px == 0 {
        return Err(Error::Config("view_px and patch_px must be positive".into()));
    }
    if view_px % patch_px != 0 {
        return Err(Error::Config(format!(
            "view_px {view_px} not divisible by patch_px {patch_px}"
        )));
    }
    let t = view_px / patch_px;
    // Two 2x pixel-unshuffle stages (intra-ViT then connector) need t % 4.
    if t % 4 != 0 {
        return Err(Error::Config(format!(
            "tokens per view side {t} must be divisible by 4"
        )));
    }
    Ok(t)
}

/// Slice-based plan: thumbnail + best-grid slices, all views `view_px^2`.
pub fn build_plan(
    image: ImageSpec,
    max_slices: u32,
    view_px: u32,
    patch_px: u32,
) -> Result<SlicePlan> {
    if max_slices == 0 {
        return Err(Error::Config("max_slices must be >= 1".into()));
    }
    let t = check_view_divisibility(view_px, patch_px)?;
    let grid = select_grid(image, max_slices);
    let canvas_w = grid.cols * view_px;
    let canvas_h = grid.rows * view_px;

    let thumbnail = ViewSpec {
        role: ViewRole::Thumbnail,
        src_rect: Rect {
            x: 0,
            y: 0,
            w: canvas_w,
            h: canvas_h,
        },
        view_px,
        token_rows: t,
        token_cols: t,
    };
    let mut slices = Vec::with_capacity(grid.count() as usize);
    for r in 0..grid.rows {
        for c in 0..grid.cols {
            slices.push(ViewSpec {
                role: ViewRole::Slice,
                src_rect: Rect {
                    x: c * view_px,
                    y: r * view_px,
                    w: view_px,
                    h: view_px,
                },
                view_px,
                token_rows: t,
                token_cols: t,
            });
        }
    }
    let total_tokens = (1 + grid.count() as usize) * (t as usize) * (t as usize);
    Ok(SlicePlan {
        image,
        max_slices,
        grid,
        thumbnail,
        slices,
        total_tokens,
    })
}

/// Degenerate global-encoding plan: one square view holding the whole image,
/// token grid capped so its pixel footprint stays within `budget_px`.
pub fn global_plan(image: ImageSpec, budget_px: u64, patch_px: u32) -> Result<SlicePlan> {
    if patch_px == 0 {
        return Err(Error::Config("patch_px must be positive".into()));
    }
    if budget_px < (2 * patch_px as u64) * (2 * patch_px as u64) {
        return Err(Error::Config(format!(
            "pixel budget {budget_px} below one 2x2 token window"
        )));
    }
    let native = image.width as u64 * image.height as u64;
    let side_px = (budget_px.min(native) as f64).sqrt() as u64;
    // Floor to an even token count per side; 2x2 windows need even grids.
    let mut t = (side_px / patch_px as u64) as u32;
    t -= t % 2;
    let t = t.max(2);
    let view_px = t * patch_px;
    let view = ViewSpec {
        role: ViewRole::Global,
        src_rect: Rect {
            x: 0,
            y: 0,
            w: view_px,
            h: view_px,
        },
        view_px,
        token_rows: t,
        token_cols: t,
    };
    Ok(SlicePlan {
        image,
        max_slices: 1,
        grid: SliceGrid { rows: 1, cols: 1 },
        thumbnail: view,
        slices: Vec::new(),
        total_tokens: (t as usize) * (t as usize),
    })
}

/// Final token count after compressing by `ratio`.
pub fn token_budget(plan: &SlicePlan, ratio: u32) -> Result<usize> {
    if !matches!(ratio, 1 | 4 | 16) {
        return Err(Error::Budget(format!(
            "compression ratio must be 1, 4, or 16, got {ratio}"
        )));
    }
    for view in plan.views() {
        if view.tokens() % ratio as usize != 0 {
            return Err(Error::Budget(format!(
                "view with {} tokens not divisible by ratio {ratio}",
                view.tokens()
            )));
        }
    }
    Ok(plan.total_tokens / ratio as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumerate_smallest_budget() {
        assert_eq!(enumerate_grids(1), vec![SliceGrid { rows: 1, cols: 1 }]);
    }

    #[test]
    fn enumerate_budget_four() {
        let got = enumerate_grids(4);
        let expect = [(1, 1), (1, 2), (1, 3), (1, 4), (2, 1), (2, 2), (3, 1), (4, 1)];
        assert_eq!(got.len(), expect.len());
        for (g, (r, c)) in got.iter().zip(expect) {
            assert_eq!((g.rows, g.cols), (r, c));
        }
    }

    #[test]
    fn enumerate_count_is_divisor_sum() {
        // sum_{r=1..9} floor(9/r) = 23
        assert_eq!(enumerate_grids(9).len(), 23);
    }

    #[test]
    fn square_image_prefers_largest_square_grid() {
        let img = ImageSpec::new(448, 448).unwrap();
        let g = select_grid(img, 9);
        assert_eq!((g.rows, g.cols), (3, 3));
    }

    #[test]
    fn wide_image_matches_exact_aspect() {
        let img = ImageSpec::new(1344, 448).unwrap();
        let g = select_grid(img, 9);
        assert_eq!((g.rows, g.cols), (1, 3));
    }

    #[test]
    fn tall_image_matches_exact_aspect() {
        let img = ImageSpec::new(800, 1200).unwrap();
        let g = select_grid(img, 6);
        assert_eq!((g.rows, g.cols), (3, 2));
    }

    #[test]
    fn plan_448_single_slice() {
        let plan = build_plan(ImageSpec::new(448, 448).unwrap(), 1, 448, 14).unwrap();
        assert_eq!(plan.view_count(), 2);
        assert_eq!(plan.total_tokens, 2048);
        assert_eq!(plan.thumbnail.token_rows, 32);
    }

    #[test]
    fn plan_view_count_is_one_plus_grid() {
        let plan = build_plan(ImageSpec::new(1344, 448).unwrap(), 9, 448, 14).unwrap();
        assert_eq!(plan.grid.count(), 3);
        assert_eq!(plan.view_count(), 4);
        assert_eq!(
            plan.total_tokens,
            plan.view_count() * 32 * 32
        );
    }

    #[test]
    fn toy_plan_dimensions() {
        let plan = build_plan(ImageSpec::new(64, 64).unwrap(), 1, 64, 16).unwrap();
        for v in plan.views() {
            assert_eq!((v.token_rows, v.token_cols), (4, 4));
            assert_eq!(v.tokens(), 16);
        }
    }

    #[test]
    fn plan_rejects_bad_divisibility() {
        assert!(build_plan(ImageSpec::new(64, 64).unwrap(), 1, 64, 15).is_err());
        // view/patch = 2 is divisible by 2 but not by 4.
        assert!(build_plan(ImageSpec::new(64, 64).unwrap(), 1, 32, 16).is_err());
    }

    #[test]
    fn slices_tile_canvas_exactly() {
        let plan = build_plan(ImageSpec::new(1000, 900).unwrap(), 6, 448, 14).unwrap();
        let canvas_w = plan.grid.cols * 448;
        let canvas_h = plan.grid.rows * 448;
        let mut covered = vec![false; (canvas_w * canvas_h) as usize];
        for s in &plan.slices {
            for y in s.src_rect.y..s.src_rect.y + s.src_rect.h {
                for x in s.src_rect.x..s.src_rect.x + s.src_rect.w {
                    let idx = (y * canvas_w + x) as usize;
                    assert!(!covered[idx], "overlap at ({x},{y})");
                    covered[idx] = true;
                }
            }
        }
        assert!(covered.iter().all(|&c| c), "coverage gap");
    }

    #[test]
    fn token_budget_ratios() {
        let plan = build_plan(ImageSpec::new(448, 448).unwrap(), 1, 448, 14).unwrap();
        assert_eq!(token_budget(&plan, 1).unwrap(), 2048);
        assert_eq!(token_budget(&plan, 4).unwrap(), 512);
        assert_eq!(token_budget(&plan, 16).unwrap(), 128);
        assert!(token_budget(&plan, 8).is_err());
    }

    #[test]
    fn global_plan_caps_pixels() {
        let img = ImageSpec::new(896, 896).unwrap();
        let plan = global_plan(img, 4 * 448 * 448, 14).unwrap();
        assert_eq!(plan.view_count(), 1);
        assert_eq!(plan.total_tokens, 64 * 64);
        assert_eq!(plan.thumbnail.role, ViewRole::Global);
        let px = plan.thumbnail.view_px as u64;
        assert!(px * px <= 4 * 448 * 448);
    }

    #[test]
    fn plan_json_schema_fields() {
        let plan = build_plan(ImageSpec::new(448, 448).unwrap(), 1, 448, 14).unwrap();
        let v = plan.to_json();
        assert_eq!(v["width"], 448);
        assert_eq!(v["height"], 448);
        assert_eq!(v["max_slices"], 1);
        assert_eq!(v["grid"]["rows"], 1);
        assert_eq!(v["grid"]["cols"], 1);
        let views = v["views"].as_array().unwrap();
        assert_eq!(views.len(), 2);
        assert_eq!(views[0]["role"], "thumbnail");
        assert_eq!(views[1]["role"], "slice");
        for view in views {
            assert!(view["src_rect"]["x"].is_number());
            assert!(view["view_px"].is_number());
            assert!(view["token_rows"].is_number());
            assert!(view["token_cols"].is_number());
        }
    }
}
