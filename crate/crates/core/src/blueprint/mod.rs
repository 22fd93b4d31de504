//! Four-view blueprint handling: cutting a sheet into views, partial identification,
//! augmentation and synthetic blueprint generation from meshes.

mod augment;
mod cut;
mod synth;

pub use augment::{augment, AugmentConfig};
pub use cut::{contour_cut, extract_views, identify_views, line_cut, silhouette_mask, LabeledBox, DEFAULT_BLANK_THRESHOLD};
pub use synth::{assemble_sheet, synth_blueprint, SynthBlueprint, SynthOptions};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Aabb, GeometryError, OrthoView, Vec3, ViewKind};
use crate::image::{GrayImage, ImageError};

#[derive(Debug, Error)]
pub enum BlueprintError {
    #[error("line cutting found {found} regions, expected {expected}")]
    CutFailed { found: usize, expected: usize },
    #[error("need at least 4 view candidates, found {found}")]
    IdentificationFailed { found: usize },
    #[error("top/side identification is ambiguous; the user has to label the views")]
    TieUnresolved { candidates: Vec<BoundingBox> },
    #[error("automatic view extraction failed ({reason}); boxes must be drawn manually")]
    ManualRequired { reason: String },
    #[error("invalid view set: {}", .0.iter().map(|e| format!("{}: {}", e.field, e.message)).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<FieldError>),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Image(#[from] ImageError),
}

/// A validation failure tied to a JSON field path such as `views[2].box`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

/// Pixel rectangle with top-left origin.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl BoundingBox {
    pub fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        Self { x, y, w, h }
    }

    pub fn area(&self) -> usize {
        self.w * self.h
    }

    pub fn right(&self) -> usize {
        self.x + self.w
    }

    pub fn bottom(&self) -> usize {
        self.y + self.h
    }

    pub fn fits_in(&self, width: usize, height: usize) -> bool {
        self.w > 0 && self.h > 0 && self.right() <= width && self.bottom() <= height
    }

    /// Largest absolute difference between corresponding edges.
    pub fn edge_error(&self, other: &BoundingBox) -> usize {
        [
            self.x.abs_diff(other.x),
            self.y.abs_diff(other.y),
            self.right().abs_diff(other.right()),
            self.bottom().abs_diff(other.bottom()),
        ]
        .into_iter()
        .max()
        .unwrap()
    }
}

/// View classification; `Unresolved` marks front/back candidates awaiting the user.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LabelKind {
    Front,
    Back,
    Side,
    Top,
    Unresolved,
}

impl LabelKind {
    pub fn view_kind(self) -> Option<ViewKind> {
        match self {
            LabelKind::Front => Some(ViewKind::Front),
            LabelKind::Back => Some(ViewKind::Back),
            LabelKind::Side => Some(ViewKind::Side),
            LabelKind::Top => Some(ViewKind::Top),
            LabelKind::Unresolved => None,
        }
    }
}

impl From<ViewKind> for LabelKind {
    fn from(k: ViewKind) -> Self {
        match k {
            ViewKind::Front => LabelKind::Front,
            ViewKind::Back => LabelKind::Back,
            ViewKind::Side => LabelKind::Side,
            ViewKind::Top => LabelKind::Top,
        }
    }
}

/// Drawing direction relative to the canonical camera. `PositiveAxis` means the view
/// is drawn exactly as the canonical camera sees it (vehicle front on the image left
/// for Side and Top); `NegativeAxis` means it is mirrored horizontally.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Facing {
    PositiveAxis,
    NegativeAxis,
    Unknown,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewLabel {
    pub kind: LabelKind,
    pub facing: Facing,
}

impl ViewLabel {
    pub fn unresolved() -> Self {
        Self { kind: LabelKind::Unresolved, facing: Facing::Unknown }
    }

    pub fn canonical(kind: ViewKind) -> Self {
        Self { kind: kind.into(), facing: Facing::PositiveAxis }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceSize {
    pub width: usize,
    pub height: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewDescriptor {
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    pub kind: LabelKind,
    pub facing: Facing,
}

/// JSON contract shared with the service and the web UI.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewSetDescriptor {
    pub source_size: SourceSize,
    pub views: Vec<ViewDescriptor>,
}

impl ViewSetDescriptor {
    /// Checks the rules a user-finalized set must satisfy; returns every violation.
    pub fn validate_finalized(&self) -> Result<(), Vec<FieldError>> {
        let mut errors = Vec::new();
        let err = |errors: &mut Vec<FieldError>, field: String, message: &str| {
            errors.push(FieldError { field, message: message.to_string() })
        };
        let SourceSize { width, height } = self.source_size;
        if self.views.len() != 4 {
            err(&mut errors, "views".into(), "exactly four views are required");
        }
        let mut seen = std::collections::HashMap::new();
        for (i, v) in self.views.iter().enumerate() {
            if !v.bbox.fits_in(width, height) {
                err(&mut errors, format!("views[{i}].box"), "box must be non-empty and inside the image");
            }
            match v.kind.view_kind() {
                None => err(&mut errors, format!("views[{i}].kind"), "view is not classified"),
                Some(k) => {
                    if let Some(first) = seen.insert(k, i) {
                        err(&mut errors, format!("views[{i}].kind"), &format!("duplicate {k:?} label (also views[{first}])"));
                    }
                    if matches!(k, ViewKind::Side | ViewKind::Top) && v.facing == Facing::Unknown {
                        err(&mut errors, format!("views[{i}].facing"), "facing direction is required for side and top views");
                    }
                }
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }

    pub fn is_finalized(&self) -> bool {
        self.validate_finalized().is_ok()
    }
}

/// One cut-out view.
#[derive(Clone, Debug, PartialEq)]
pub struct View {
    pub image: GrayImage,
    pub bbox: BoundingBox,
    pub label: ViewLabel,
    /// Windows-removed variant showing the interior, when the source provides one.
    pub interior: Option<GrayImage>,
}

/// Four views cut from one blueprint sheet.
#[derive(Clone, Debug, PartialEq)]
pub struct ViewSet {
    pub source_size: SourceSize,
    pub views: Vec<View>,
}

impl ViewSet {
    /// Crops every described box out of `sheet`.
    pub fn from_descriptor(sheet: &GrayImage, desc: &ViewSetDescriptor) -> Result<Self, BlueprintError> {
        let mut views = Vec::with_capacity(desc.views.len());
        for (i, v) in desc.views.iter().enumerate() {
            if !v.bbox.fits_in(sheet.width(), sheet.height()) {
                return Err(BlueprintError::Invalid(vec![FieldError {
                    field: format!("views[{i}].box"),
                    message: "box must be non-empty and inside the image".into(),
                }]));
            }
            views.push(View {
                image: sheet.crop(v.bbox.x, v.bbox.y, v.bbox.w, v.bbox.h),
                bbox: v.bbox,
                label: ViewLabel { kind: v.kind, facing: v.facing },
                interior: None,
            });
        }
        Ok(Self { source_size: SourceSize { width: sheet.width(), height: sheet.height() }, views })
    }

    pub fn descriptor(&self) -> ViewSetDescriptor {
        ViewSetDescriptor {
            source_size: self.source_size,
            views: self
                .views
                .iter()
                .map(|v| ViewDescriptor { bbox: v.bbox, kind: v.label.kind, facing: v.label.facing })
                .collect(),
        }
    }

    pub fn is_finalized(&self) -> bool {
        self.descriptor().is_finalized()
    }

    pub fn get(&self, kind: ViewKind) -> Option<&View> {
        self.views.iter().find(|v| v.label.kind.view_kind() == Some(kind))
    }

    /// View image in canonical orientation: mirrored back when drawn `NegativeAxis`.
    pub fn oriented(&self, kind: ViewKind) -> Option<GrayImage> {
        let v = self.get(kind)?;
        Some(match v.label.facing {
            Facing::NegativeAxis => v.image.flip_horizontal(),
            _ => v.image.clone(),
        })
    }

    /// Model box and per-view cameras implied by the view sizes: the side view
    /// spans length 1 along X, its aspect gives the height and the top view's aspect
    /// gives the width. Every camera maps its model rectangle exactly onto its image.
    pub fn geometry(&self) -> Result<ViewGeometry, BlueprintError> {
        let mut images = Vec::with_capacity(4);
        let mut missing = Vec::new();
        for kind in ViewKind::ALL {
            match self.oriented(kind) {
                Some(img) if !img.is_empty() => images.push(img),
                _ => missing.push(FieldError { field: "views".into(), message: format!("no {kind:?} view") }),
            }
        }
        if !missing.is_empty() {
            return Err(BlueprintError::Invalid(missing));
        }
        let (side, top) = (&images[ViewKind::Side.index()], &images[ViewKind::Top.index()]);
        let height = side.height() as f64 / side.width() as f64;
        let width = top.height() as f64 / top.width() as f64;
        let half = Vec3::new(0.5, width / 2.0, height / 2.0);
        let bounds = Aabb::new(-half, half);
        let views = ViewKind::ALL.map(|k| {
            let img = &images[k.index()];
            OrthoView::fitted(k, &bounds, img.width(), img.height())
        });
        let images: [GrayImage; 4] = images.try_into().expect("four views");
        Ok(ViewGeometry { bounds, views, images })
    }
}

/// Cameras and canonically oriented images of a finalized view set, in
/// [`ViewKind::ALL`] order.
#[derive(Clone, Debug)]
pub struct ViewGeometry {
    pub bounds: Aabb,
    pub views: [OrthoView; 4],
    pub images: [GrayImage; 4],
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desc() -> ViewSetDescriptor {
        let v = |x, kind, facing| ViewDescriptor { bbox: BoundingBox::new(x, 0, 10, 10), kind, facing };
        ViewSetDescriptor {
            source_size: SourceSize { width: 100, height: 20 },
            views: vec![
                v(0, LabelKind::Front, Facing::PositiveAxis),
                v(20, LabelKind::Back, Facing::PositiveAxis),
                v(40, LabelKind::Side, Facing::NegativeAxis),
                v(60, LabelKind::Top, Facing::PositiveAxis),
            ],
        }
    }

    #[test]
    fn json_shape() {
        let json = serde_json::to_value(desc()).unwrap();
        assert_eq!(json["source_size"]["width"], 100);
        assert_eq!(json["views"][2]["box"]["x"], 40);
        assert_eq!(json["views"][2]["kind"], "Side");
        assert_eq!(json["views"][2]["facing"], "NegativeAxis");
        let back: ViewSetDescriptor = serde_json::from_value(json).unwrap();
        assert_eq!(back, desc());
    }

    #[test]
    fn finalized_validation_reports_fields() {
        assert!(desc().validate_finalized().is_ok());
        let mut d = desc();
        d.views[1].kind = LabelKind::Front;
        d.views[3].bbox = BoundingBox::new(95, 0, 10, 10);
        d.views[2].facing = Facing::Unknown;
        let errs = d.validate_finalized().unwrap_err();
        let fields: Vec<&str> = errs.iter().map(|e| e.field.as_str()).collect();
        assert_eq!(fields, vec!["views[1].kind", "views[2].facing", "views[3].box"]);
    }

    #[test]
    fn oriented_view_mirrors_negative_facing() {
        let sheet = GrayImage::from_fn(100, 20, |x, _| x as f32 / 100.0);
        let set = ViewSet::from_descriptor(&sheet, &desc()).unwrap();
        let side = set.oriented(ViewKind::Side).unwrap();
        assert_eq!(side.get(0, 0), sheet.get(49, 0));
        assert_eq!(set.oriented(ViewKind::Top).unwrap().get(0, 0), sheet.get(60, 0));
    }

    #[test]
    fn geometry_from_view_sizes() {
        let sheet = GrayImage::filled(300, 100, 1.0);
        let mut d = desc();
        d.views[0].bbox = BoundingBox::new(0, 0, 40, 30);
        d.views[1].bbox = BoundingBox::new(50, 0, 40, 30);
        d.views[2].bbox = BoundingBox::new(100, 0, 100, 30);
        d.views[3].bbox = BoundingBox::new(100, 40, 100, 40);
        let g = ViewSet::from_descriptor(&sheet, &d).unwrap().geometry().unwrap();
        assert!((g.bounds.extent() - Vec3::new(1.0, 0.4, 0.3)).norm() < 1e-12);
        for (v, img) in g.views.iter().zip(&g.images) {
            assert_eq!(v.image_size(), (img.width(), img.height()));
        }
        let mut partial = d.clone();
        partial.views[0].kind = LabelKind::Unresolved;
        let set = ViewSet::from_descriptor(&sheet, &partial).unwrap();
        assert!(matches!(set.geometry(), Err(BlueprintError::Invalid(_))));
    }
}
