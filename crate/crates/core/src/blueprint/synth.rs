use serde::{Deserialize, Serialize};

use crate::geometry::{render_view, GeometryError, OrthoView, Render, TriangleMesh, ViewKind};
use crate::image::{sobel_magnitude, GrayImage};

use super::{BlueprintError, BoundingBox, SourceSize, View, ViewLabel, ViewSet};

/// Rendering and layout settings for synthetic blueprints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthOptions {
    /// Pixels per model unit; a normalized mesh's side view is this many pixels wide.
    pub resolution: f64,
    /// Blank pixels between views and around the sheet.
    pub gap: usize,
    /// Normal-gradient strength (after Sobel normalization) at which a crease is
    /// drawn at half intensity.
    pub crease_threshold: f32,
    /// Depth jump, in pixels along the view axis, counted as an occlusion edge.
    pub depth_jump_px: f64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self { resolution: 64.0, gap: 16, crease_threshold: 0.15, depth_jump_px: 3.0 }
    }
}

/// A synthetic four-view drawing.
#[derive(Clone, Debug)]
pub struct SynthBlueprint {
    /// Assembled single-image blueprint.
    pub sheet: GrayImage,
    /// Same sheet drawn without glass/window face groups, when the mesh has any.
    pub interior_sheet: Option<GrayImage>,
    /// Views in Front, Back, Side, Top order with canonical labels and sheet boxes.
    pub views: ViewSet,
}

const RENDER_MARGIN: usize = 2;

fn is_glass(name: &str) -> bool {
    let n = name.to_ascii_lowercase();
    n.contains("glass") || n.contains("window")
}

/// Line strength per pixel in `[0, 1]`: silhouette ring, normal creases, occlusion
/// edges and part boundaries, restricted to covered pixels.
fn line_image(render: &Render, mesh: &TriangleMesh, view: &OrthoView, opts: &SynthOptions) -> Result<GrayImage, BlueprintError> {
    let (w, h) = (render.width(), render.height());
    let sobel = sobel_magnitude(&render.normal)?;
    let jump = opts.depth_jump_px / view.resolution[0].min(view.resolution[1]);
    let group = |i: usize| render.triangle[i].map(|t| if mesh.has_groups() { mesh.groups[t as usize] } else { 0 });
    let mut lines = GrayImage::new(w, h);
    let soft = |e: f32| ((e - opts.crease_threshold) / (2.0 * opts.crease_threshold) + 0.5).clamp(0.0, 1.0);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if render.triangle[i].is_none() {
                continue;
            }
            let mut strength = soft(sobel.get(x, y));
            let neighbors = [
                (x > 0).then(|| i - 1),
                (x + 1 < w).then(|| i + 1),
                (y > 0).then(|| i - w),
                (y + 1 < h).then(|| i + w),
            ];
            for n in neighbors {
                let Some(n) = n else {
                    strength = 1.0;
                    continue;
                };
                match render.triangle[n] {
                    None => strength = 1.0,
                    Some(_) => {
                        if render.raw_depth[n] - render.raw_depth[i] > jump {
                            strength = 1.0;
                        }
                        if group(i) < group(n) {
                            strength = 1.0;
                        }
                    }
                }
            }
            lines.set(x, y, strength);
        }
    }
    Ok(lines)
}

fn covered_bounds(render: &Render) -> Option<BoundingBox> {
    let (w, h) = (render.width(), render.height());
    let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
    for y in 0..h {
        for x in 0..w {
            if render.covered(x, y) {
                x0 = x0.min(x);
                y0 = y0.min(y);
                x1 = x1.max(x + 1);
                y1 = y1.max(y + 1);
            }
        }
    }
    (x0 < x1).then(|| BoundingBox::new(x0, y0, x1 - x0, y1 - y0))
}

fn without_glass(mesh: &TriangleMesh) -> Option<TriangleMesh> {
    if !mesh.has_groups() || !mesh.group_names.iter().any(|n| is_glass(n)) {
        return None;
    }
    let keep: Vec<usize> = (0..mesh.triangles.len()).filter(|&t| !is_glass(&mesh.group_names[mesh.groups[t] as usize])).collect();
    Some(TriangleMesh {
        vertices: mesh.vertices.clone(),
        triangles: keep.iter().map(|&t| mesh.triangles[t]).collect(),
        groups: keep.iter().map(|&t| mesh.groups[t]).collect(),
        group_names: mesh.group_names.clone(),
    })
}

/// Places the four views on one sheet: Side above Top in the left column, Front
/// above Back in the right column, `gap` pixels between views and around the edge.
/// `images` are in [`ViewKind::ALL`] order; returns the sheet and each view's box.
pub fn assemble_sheet(images: [&GrayImage; 4], gap: usize) -> (GrayImage, [BoundingBox; 4]) {
    let [front, back, side, top] = images;
    let left_w = side.width().max(top.width());
    let right_w = front.width().max(back.width());
    let left_h = side.height() + gap + top.height();
    let right_h = front.height() + gap + back.height();
    let width = gap + left_w + gap + right_w + gap;
    let height = gap + left_h.max(right_h) + gap;
    let right_x = gap + left_w + gap;
    let boxes = [
        BoundingBox::new(right_x, gap, front.width(), front.height()),
        BoundingBox::new(right_x, gap + front.height() + gap, back.width(), back.height()),
        BoundingBox::new(gap, gap, side.width(), side.height()),
        BoundingBox::new(gap, gap + side.height() + gap, top.width(), top.height()),
    ];
    let mut sheet = GrayImage::filled(width, height, 1.0);
    for (img, b) in images.iter().zip(&boxes) {
        sheet.paste(img, b.x, b.y);
    }
    (sheet, boxes)
}

/// Draws the four canonical views of a normalized mesh as dark lines on white.
pub fn synth_blueprint(mesh: &TriangleMesh, opts: &SynthOptions) -> Result<SynthBlueprint, BlueprintError> {
    if mesh.is_empty() {
        return Err(GeometryError::EmptyMesh.into());
    }
    mesh.validate()?;
    let bounds = mesh.bounds().ok_or(GeometryError::EmptyMesh)?;
    let interior_mesh = without_glass(mesh);
    let mut crops = Vec::with_capacity(4);
    let mut interior_crops = Vec::with_capacity(4);
    for kind in ViewKind::ALL {
        let view = OrthoView::canonical(kind, &bounds, opts.resolution, RENDER_MARGIN);
        let render = render_view(mesh, &view)?;
        let bbox = covered_bounds(&render).ok_or(GeometryError::EmptyMesh)?;
        let drawing = line_image(&render, mesh, &view, opts)?.invert();
        crops.push(drawing.crop(bbox.x, bbox.y, bbox.w, bbox.h));
        if let Some(inner) = &interior_mesh {
            let drawing = if inner.is_empty() {
                GrayImage::filled(render.width(), render.height(), 1.0)
            } else {
                let r = render_view(inner, &view)?;
                line_image(&r, inner, &view, opts)?.invert()
            };
            interior_crops.push(drawing.crop(bbox.x, bbox.y, bbox.w, bbox.h));
        }
    }
    let (sheet, boxes) = assemble_sheet([&crops[0], &crops[1], &crops[2], &crops[3]], opts.gap);
    let interior_sheet = (!interior_crops.is_empty())
        .then(|| assemble_sheet([&interior_crops[0], &interior_crops[1], &interior_crops[2], &interior_crops[3]], opts.gap).0);
    let views = ViewKind::ALL
        .iter()
        .enumerate()
        .map(|(i, &kind)| View {
            image: crops[i].clone(),
            bbox: boxes[i],
            label: ViewLabel::canonical(kind),
            interior: interior_crops.get(i).cloned(),
        })
        .collect();
    Ok(SynthBlueprint {
        views: ViewSet { source_size: SourceSize { width: sheet.width(), height: sheet.height() }, views },
        sheet,
        interior_sheet,
    })
}
