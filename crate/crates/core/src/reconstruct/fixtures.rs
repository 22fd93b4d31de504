//! Hand-built grids with known extraction behaviour.

use crate::geometry::Vec3;

use super::ScalarGrid;

/// Value of the solid nodes in [`detached_wing_grid`].
pub const WING_SOLID: f32 = 0.9;
/// Value of the struts joining wing and body in [`detached_wing_grid`]: below 0.5,
/// above 0.45.
pub const WING_BRIDGE: f32 = 0.47;
/// Lowest node layer of the wing slab.
pub const WING_LAYER: usize = 14;

/// A car-like body block with a rear wing floating above it, attached only by two
/// struts valued [`WING_BRIDGE`]. Extracting at 0.5 yields two components; at 0.45
/// the struts join them into one. Node spacing is 1/39 from the origin.
pub fn detached_wing_grid() -> ScalarGrid {
    let dims = [40, 20, 20];
    let mut g = ScalarGrid::from_fn(dims, Vec3::zeros(), 1.0 / 39.0, |_| 0.0);
    let mut fill = |i: std::ops::RangeInclusive<usize>, j: std::ops::RangeInclusive<usize>, k: std::ops::RangeInclusive<usize>, v: f32| {
        for kk in k {
            for jj in j.clone() {
                for ii in i.clone() {
                    let n = g.index(ii, jj, kk);
                    g.values[n] = v;
                }
            }
        }
    };
    fill(4..=30, 4..=15, 3..=10, WING_SOLID);
    fill(25..=30, 2..=17, WING_LAYER..=WING_LAYER + 1, WING_SOLID);
    for j in [6..=7, 12..=13] {
        fill(27..=28, j, 11..=WING_LAYER - 1, WING_BRIDGE);
    }
    g
}
