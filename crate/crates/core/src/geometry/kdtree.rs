use super::mesh::Vec3;
use super::GeometryError;

const LEAF_SIZE: usize = 8;

#[derive(Clone, Debug)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { left: usize, right: usize },
}

/// Exact 3D nearest-neighbor index built by median splits along the axis of widest
/// spread. Every node keeps the tight bounding box of its points so that cells are
/// pruned by their true distance to the query. Queries return the lowest point
/// index among equidistant candidates.
#[derive(Clone, Debug)]
pub struct KdTree {
    points: Vec<Vec3>,
    order: Vec<usize>,
    nodes: Vec<Node>,
    boxes: Vec<(Vec3, Vec3)>,
}

impl KdTree {
    pub fn build(points: &[Vec3]) -> Result<Self, GeometryError> {
        if points.is_empty() {
            return Err(GeometryError::EmptyCloud);
        }
        let mut tree =
            Self { points: points.to_vec(), order: (0..points.len()).collect(), nodes: Vec::new(), boxes: Vec::new() };
        tree.build_node(0, points.len());
        Ok(tree)
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for &i in &self.order[start..end] {
            lo = lo.inf(&self.points[i]);
            hi = hi.sup(&self.points[i]);
        }
        self.boxes.push((lo, hi));
        let spread = hi - lo;
        let axis = spread.imax();
        if end - start <= LEAF_SIZE || spread[axis] == 0.0 {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.order[start..end]
            .select_nth_unstable_by(mid - start, |&a, &b| points[a][axis].total_cmp(&points[b][axis]));
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id] = Node::Split { left, right };
        id
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    /// Index of and Euclidean distance to the nearest stored point.
    pub fn nearest(&self, q: &Vec3) -> (usize, f64) {
        self.nearest_where(q, |_| true).expect("tree is non-empty")
    }

    /// Nearest stored point among those accepted by `keep`, if any.
    pub fn nearest_where(&self, q: &Vec3, keep: impl Fn(usize) -> bool) -> Option<(usize, f64)> {
        self.nearest_within(q, f64::INFINITY, keep)
    }

    /// Like [`KdTree::nearest_where`] but only considers points at distance at most
    /// `max_dist`; cells farther away are never visited.
    pub fn nearest_within(&self, q: &Vec3, max_dist: f64, keep: impl Fn(usize) -> bool) -> Option<(usize, f64)> {
        let mut best = (usize::MAX, max_dist * max_dist);
        if self.box_dist(0, q) <= best.1 {
            self.search(0, q, &keep, &mut best);
        }
        (best.0 != usize::MAX).then(|| (best.0, best.1.sqrt()))
    }

    fn box_dist(&self, node: usize, q: &Vec3) -> f64 {
        let (lo, hi) = &self.boxes[node];
        (0..3).map(|a| (lo[a] - q[a]).max(q[a] - hi[a]).max(0.0).powi(2)).sum()
    }

    fn search(&self, node: usize, q: &Vec3, keep: &impl Fn(usize) -> bool, best: &mut (usize, f64)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d = (self.points[i] - q).norm_squared();
                    if (d < best.1 || (d == best.1 && i < best.0)) && keep(i) {
                        *best = (i, d);
                    }
                }
            }
            Node::Split { left, right } => {
                let dl = self.box_dist(left, q);
                let dr = self.box_dist(right, q);
                let ((near, dn), (far, df)) = if dr < dl { ((right, dr), (left, dl)) } else { ((left, dl), (right, dr)) };
                if dn <= best.1 {
                    self.search(near, q, keep, best);
                }
                if df <= best.1 {
                    self.search(far, q, keep, best);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(points: &[Vec3], q: &Vec3) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for (i, p) in points.iter().enumerate() {
            let d = (p - q).norm_squared();
            if d < best.1 {
                best = (i, d);
            }
        }
        (best.0, best.1.sqrt())
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut rand_point = || Vec3::new(rng.random(), rng.random(), rng.random());
        let points: Vec<Vec3> = (0..1000).map(|_| rand_point()).collect();
        let tree = KdTree::build(&points).unwrap();
        for _ in 0..1000 {
            let q = rand_point();
            assert_eq!(tree.nearest(&q), brute(&points, &q));
        }
    }

    #[test]
    fn bounded_search_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut rand_point = || Vec3::new(rng.random(), rng.random(), 0.3 * rng.random::<f64>());
        let points: Vec<Vec3> = (0..500).map(|_| rand_point()).collect();
        let tree = KdTree::build(&points).unwrap();
        for _ in 0..500 {
            let q = rand_point();
            let exact = brute(&points, &q);
            assert_eq!(tree.nearest_within(&q, 0.05, |_| true), (exact.1 <= 0.05).then_some(exact));
            assert_eq!(tree.nearest_within(&q, f64::INFINITY, |_| true), Some(exact));
        }
    }

    #[test]
    fn stored_point_has_zero_distance() {
        let points = vec![Vec3::new(0.1, 0.2, 0.3), Vec3::new(1.0, 0.0, 0.0)];
        let tree = KdTree::build(&points).unwrap();
        assert_eq!(tree.nearest(&points[1]), (1, 0.0));
    }

    #[test]
    fn ties_prefer_lower_index() {
        let points = vec![Vec3::new(1.0, 0.0, 0.0), Vec3::new(-1.0, 0.0, 0.0)];
        let tree = KdTree::build(&points).unwrap();
        assert_eq!(tree.nearest(&Vec3::zeros()).0, 0);
        let many: Vec<Vec3> = (0..50).map(|i| if i % 2 == 0 { points[1] } else { points[0] }).collect();
        assert_eq!(KdTree::build(&many).unwrap().nearest(&Vec3::zeros()).0, 0);
    }

    #[test]
    fn filtered_search_matches_filtered_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let points: Vec<Vec3> = (0..500).map(|_| Vec3::new(rng.random(), rng.random(), rng.random())).collect();
        let tree = KdTree::build(&points).unwrap();
        for _ in 0..200 {
            let q = Vec3::new(rng.random(), rng.random(), rng.random());
            let got = tree.nearest_where(&q, |i| i % 3 == 0).unwrap();
            let expected = points
                .iter()
                .enumerate()
                .filter(|(i, _)| i % 3 == 0)
                .map(|(i, p)| (i, (p - q).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            assert_eq!(got, expected);
        }
        assert!(tree.nearest_where(&Vec3::zeros(), |_| false).is_none());
    }

    #[test]
    fn empty_cloud_is_an_error() {
        assert!(matches!(KdTree::build(&[]), Err(GeometryError::EmptyCloud)));
    }
}
