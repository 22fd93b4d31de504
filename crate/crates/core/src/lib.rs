//! Reconstruction of closed vehicle meshes from four-view orthographic blueprints.
//!
//! The crate covers the whole offline pipeline: raster utilities ([`image`]),
//! meshes and cameras ([`geometry`]), blueprint view handling ([`blueprint`]),
//! adaptive signed-distance sampling ([`sampling`]), the pixel-aligned implicit
//! field with its training loop ([`field`]) and grid evaluation plus surface
//! extraction ([`reconstruct`]).

pub mod blueprint;
pub mod field;
pub mod geometry;
pub mod image;
pub mod reconstruct;
pub mod sampling;
