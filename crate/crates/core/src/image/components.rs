use super::GrayImage;

/// Per-pixel component labels; 0 is background, components are `1..=count`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelImage {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    areas: Vec<usize>,
}

impl LabelImage {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Number of foreground components.
    pub fn count(&self) -> usize {
        self.areas.len()
    }

    /// Pixel area of component `label` (1-based).
    pub fn area(&self, label: u32) -> usize {
        self.areas[label as usize - 1]
    }

    /// Inclusive-exclusive bounds `(x0, y0, x1, y1)` of every component, indexed by label - 1.
    pub fn bounds(&self) -> Vec<(usize, usize, usize, usize)> {
        let mut b = vec![(usize::MAX, usize::MAX, 0, 0); self.count()];
        for y in 0..self.height {
            for x in 0..self.width {
                let l = self.get(x, y);
                if l > 0 {
                    let e = &mut b[l as usize - 1];
                    e.0 = e.0.min(x);
                    e.1 = e.1.min(y);
                    e.2 = e.2.max(x + 1);
                    e.3 = e.3.max(y + 1);
                }
            }
        }
        b
    }
}

/// 8-connected labeling of pixels with value above `threshold`. Labels are ordered by
/// descending component area; equal areas keep scan order of their first pixel.
pub fn connected_components(img: &GrayImage, threshold: f32) -> LabelImage {
    let (w, h) = (img.width(), img.height());
    let mut raw = vec![0u32; w * h];
    let mut areas = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if raw[start] != 0 || img.data()[start] <= threshold {
            continue;
        }
        let label = areas.len() as u32 + 1;
        raw[start] = label;
        stack.push(start);
        let mut area = 0usize;
        while let Some(idx) = stack.pop() {
            area += 1;
            let (x, y) = ((idx % w) as isize, (idx / w) as isize);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let n = ny as usize * w + nx as usize;
                    if raw[n] == 0 && img.data()[n] > threshold {
                        raw[n] = label;
                        stack.push(n);
                    }
                }
            }
        }
        areas.push(area);
    }

    let mut order: Vec<usize> = (0..areas.len()).collect();
    order.sort_by(|&a, &b| areas[b].cmp(&areas[a]).then(a.cmp(&b)));
    let mut remap = vec![0u32; areas.len() + 1];
    for (new, &old) in order.iter().enumerate() {
        remap[old + 1] = new as u32 + 1;
    }
    LabelImage {
        width: w,
        height: h,
        labels: raw.into_iter().map(|l| remap[l as usize]).collect(),
        areas: order.iter().map(|&i| areas[i]).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn flood_fill_count(mask: &[bool], w: usize, h: usize) -> usize {
        fn fill(mask: &[bool], seen: &mut [bool], w: usize, h: usize, x: isize, y: isize) {
            if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
                return;
            }
            let i = y as usize * w + x as usize;
            if seen[i] || !mask[i] {
                return;
            }
            seen[i] = true;
            for dy in -1..=1 {
                for dx in -1..=1 {
                    if dx != 0 || dy != 0 {
                        fill(mask, seen, w, h, x + dx, y + dy);
                    }
                }
            }
        }
        let mut seen = vec![false; mask.len()];
        let mut count = 0;
        for y in 0..h {
            for x in 0..w {
                if mask[y * w + x] && !seen[y * w + x] {
                    count += 1;
                    fill(mask, &mut seen, w, h, x as isize, y as isize);
                }
            }
        }
        count
    }

    #[test]
    fn blank_has_no_components() {
        assert_eq!(connected_components(&GrayImage::new(10, 10), 0.5).count(), 0);
    }

    #[test]
    fn two_rectangles_larger_first() {
        let img = GrayImage::from_fn(20, 10, |x, y| {
            let small = (1..4).contains(&x) && (1..4).contains(&y);
            let big = (8..18).contains(&x) && (2..9).contains(&y);
            if small || big { 1.0 } else { 0.0 }
        });
        let labels = connected_components(&img, 0.5);
        assert_eq!(labels.count(), 2);
        assert_eq!(labels.get(10, 5), 1);
        assert_eq!(labels.get(2, 2), 2);
        assert_eq!(labels.area(1), 70);
        assert_eq!(labels.bounds()[0], (8, 2, 18, 9));
    }

    #[test]
    fn diagonal_pixels_connect() {
        let img = GrayImage::from_fn(4, 4, |x, y| if x == y { 1.0 } else { 0.0 });
        assert_eq!(connected_components(&img, 0.5).count(), 1);
    }

    #[test]
    fn random_blobs_match_flood_fill_and_transpose() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let (w, h) = (rng.random_range(5..40), rng.random_range(5..40));
            let img = GrayImage::from_fn(w, h, |_, _| if rng.random_bool(0.35) { 1.0 } else { 0.0 });
            let mask: Vec<bool> = img.data().iter().map(|&v| v > 0.5).collect();
            let labels = connected_components(&img, 0.5);
            assert_eq!(labels.count(), flood_fill_count(&mask, w, h));
            assert_eq!(connected_components(&img.transpose(), 0.5).count(), labels.count());
            let areas: Vec<usize> = (1..=labels.count() as u32).map(|l| labels.area(l)).collect();
            assert!(areas.windows(2).all(|p| p[0] >= p[1]));
        }
    }
}
