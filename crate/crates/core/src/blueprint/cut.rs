use crate::image::{connected_components, GrayImage};

use super::{BlueprintError, BoundingBox, Facing, LabelKind, ViewLabel, ViewSet, ViewSetDescriptor, ViewDescriptor, SourceSize};

/// Pixels at or above this intensity count as paper (blueprints are dark on light).
pub const DEFAULT_BLANK_THRESHOLD: f32 = 0.98;

#[derive(Clone, Copy, Debug)]
struct Region {
    x0: usize,
    y0: usize,
    x1: usize,
    y1: usize,
}

#[derive(Clone, Copy, Debug)]
struct Run {
    vertical: bool,
    start: usize,
    end: usize,
}

fn row_blank(img: &GrayImage, y: usize, x0: usize, x1: usize, t: f32) -> bool {
    (x0..x1).all(|x| img.get(x, y) >= t)
}

fn col_blank(img: &GrayImage, x: usize, y0: usize, y1: usize, t: f32) -> bool {
    (y0..y1).all(|y| img.get(x, y) >= t)
}

/// Shrinks the region to its non-blank content; `None` when it is entirely blank.
fn trim(img: &GrayImage, r: Region, t: f32) -> Option<Region> {
    let mut r = r;
    while r.y0 < r.y1 && row_blank(img, r.y0, r.x0, r.x1, t) {
        r.y0 += 1;
    }
    while r.y1 > r.y0 && row_blank(img, r.y1 - 1, r.x0, r.x1, t) {
        r.y1 -= 1;
    }
    if r.y0 == r.y1 {
        return None;
    }
    while r.x0 < r.x1 && col_blank(img, r.x0, r.y0, r.y1, t) {
        r.x0 += 1;
    }
    while r.x1 > r.x0 && col_blank(img, r.x1 - 1, r.y0, r.y1, t) {
        r.x1 -= 1;
    }
    Some(r)
}

/// Widest interior run of blank rows or columns inside a trimmed region.
fn widest_run(img: &GrayImage, r: Region, t: f32) -> Option<Run> {
    let mut best: Option<Run> = None;
    let mut consider = |run: Run| {
        if best.is_none_or(|b| run.end - run.start > b.end - b.start) {
            best = Some(run);
        }
    };
    for vertical in [true, false] {
        let (lo, hi) = if vertical { (r.x0, r.x1) } else { (r.y0, r.y1) };
        let mut start = None;
        for i in lo..hi {
            let blank = if vertical { col_blank(img, i, r.y0, r.y1, t) } else { row_blank(img, i, r.x0, r.x1, t) };
            match (blank, start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    consider(Run { vertical, start: s, end: i });
                    start = None;
                }
                _ => {}
            }
        }
    }
    best
}

/// Recursively splits the sheet along its widest blank row or column runs until
/// `expected` content regions exist; returns their tight boxes in reading order.
pub fn line_cut(img: &GrayImage, expected: usize, blank_threshold: f32) -> Result<Vec<BoundingBox>, BlueprintError> {
    let whole = Region { x0: 0, y0: 0, x1: img.width(), y1: img.height() };
    let mut regions: Vec<Region> = trim(img, whole, blank_threshold).into_iter().collect();
    while regions.len() < expected {
        let candidate = regions
            .iter()
            .enumerate()
            .filter_map(|(i, r)| widest_run(img, *r, blank_threshold).map(|run| (i, run)))
            .max_by(|a, b| (a.1.end - a.1.start).cmp(&(b.1.end - b.1.start)).then(b.0.cmp(&a.0)));
        let Some((i, run)) = candidate else { break };
        let r = regions.remove(i);
        let (a, b) = if run.vertical {
            (Region { x1: run.start, ..r }, Region { x0: run.end, ..r })
        } else {
            (Region { y1: run.start, ..r }, Region { y0: run.end, ..r })
        };
        regions.extend(trim(img, a, blank_threshold));
        regions.extend(trim(img, b, blank_threshold));
    }
    if regions.len() != expected {
        return Err(BlueprintError::CutFailed { found: regions.len(), expected });
    }
    regions.sort_by_key(|r| (r.y0, r.x0));
    Ok(regions.iter().map(|r| BoundingBox::new(r.x0, r.y0, r.x1 - r.x0, r.y1 - r.y0)).collect())
}

/// Paper pixels reachable from the image border through 4-connected paper pixels.
fn exterior_paper(img: &GrayImage, blank_threshold: f32) -> Vec<bool> {
    let (w, h) = (img.width(), img.height());
    if w == 0 || h == 0 {
        return Vec::new();
    }
    let ink = |i: usize| img.data()[i] < blank_threshold;
    let mut exterior = vec![false; w * h];
    let mut stack: Vec<usize> = Vec::new();
    for x in 0..w {
        stack.push(x);
        stack.push((h - 1) * w + x);
    }
    for y in 0..h {
        stack.push(y * w);
        stack.push(y * w + w - 1);
    }
    while let Some(i) = stack.pop() {
        if exterior[i] || ink(i) {
            continue;
        }
        exterior[i] = true;
        let (x, y) = (i % w, i / w);
        if x > 0 {
            stack.push(i - 1);
        }
        if x + 1 < w {
            stack.push(i + 1);
        }
        if y > 0 {
            stack.push(i - w);
        }
        if y + 1 < h {
            stack.push(i + w);
        }
    }
    exterior
}

/// Silhouette of a line drawing: 1 for ink and every region the ink encloses,
/// 0 for paper connected to the border.
pub fn silhouette_mask(img: &GrayImage, blank_threshold: f32) -> GrayImage {
    let exterior = exterior_paper(img, blank_threshold);
    GrayImage::from_fn(img.width(), img.height(), |x, y| if exterior[y * img.width() + x] { 0.0 } else { 1.0 })
}

/// Boxes of the outer contours of dark content: ink plus every hole it encloses,
/// split into 8-connected components. Sorted by descending filled area; components
/// smaller than `min_area` pixels are dropped.
pub fn contour_cut(img: &GrayImage, min_area: usize, blank_threshold: f32) -> Vec<BoundingBox> {
    let labels = connected_components(&silhouette_mask(img, blank_threshold), 0.5);
    labels
        .bounds()
        .into_iter()
        .enumerate()
        .filter(|(i, _)| labels.area(*i as u32 + 1) >= min_area)
        .map(|(_, (x0, y0, x1, y1))| BoundingBox::new(x0, y0, x1 - x0, y1 - y0))
        .collect()
}

/// A box with its (partial) classification.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LabeledBox {
    pub bbox: BoundingBox,
    pub label: ViewLabel,
}

/// Keeps the four largest boxes and labels the two widest: the taller of those is
/// Top, the other Side. The remaining two stay Unresolved (front or back is the
/// user's call), and no facing is assumed.
pub fn identify_views(boxes: &[BoundingBox]) -> Result<Vec<LabeledBox>, BlueprintError> {
    if boxes.len() < 4 {
        return Err(BlueprintError::IdentificationFailed { found: boxes.len() });
    }
    let mut sorted = boxes.to_vec();
    sorted.sort_by(|a, b| {
        b.area().cmp(&a.area()).then(b.w.cmp(&a.w)).then(b.h.cmp(&a.h)).then(a.y.cmp(&b.y)).then(a.x.cmp(&b.x))
    });
    let mut four: Vec<BoundingBox> = sorted[..4].to_vec();
    four.sort_by(|a, b| b.w.cmp(&a.w).then(a.y.cmp(&b.y)).then(a.x.cmp(&b.x)));
    let ambiguous = four[1].w == four[2].w || four[0].h == four[1].h;
    if ambiguous {
        return Err(BlueprintError::TieUnresolved { candidates: four });
    }
    let (top, side) = if four[0].h > four[1].h { (four[0], four[1]) } else { (four[1], four[0]) };
    let labeled = |bbox, kind| LabeledBox { bbox, label: ViewLabel { kind, facing: Facing::Unknown } };
    Ok(vec![
        labeled(top, LabelKind::Top),
        labeled(side, LabelKind::Side),
        labeled(four[2], LabelKind::Unresolved),
        labeled(four[3], LabelKind::Unresolved),
    ])
}

/// Line cutting first, contour cutting when that does not yield exactly
/// `expected` regions, then partial identification.
pub fn extract_views(img: &GrayImage, expected: usize) -> Result<ViewSet, BlueprintError> {
    let boxes = match line_cut(img, expected, DEFAULT_BLANK_THRESHOLD) {
        Ok(b) => b,
        Err(_) => {
            let min_area = (img.width() * img.height() / 2000).max(16);
            contour_cut(img, min_area, DEFAULT_BLANK_THRESHOLD)
        }
    };
    let labeled = match identify_views(&boxes) {
        Ok(l) => l,
        Err(BlueprintError::IdentificationFailed { found }) => {
            return Err(BlueprintError::ManualRequired {
                reason: format!("found {found} view candidates"),
            })
        }
        Err(e) => return Err(e),
    };
    let desc = ViewSetDescriptor {
        source_size: SourceSize { width: img.width(), height: img.height() },
        views: labeled
            .iter()
            .map(|l| ViewDescriptor { bbox: l.bbox, kind: l.label.kind, facing: l.label.facing })
            .collect(),
    };
    ViewSet::from_descriptor(img, &desc)
}
