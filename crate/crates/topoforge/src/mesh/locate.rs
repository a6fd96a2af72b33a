//! Axis-aligned bounding-box tree for point location and proximity queries.

use super::{geom, Mesh};
use crate::Point;

#[derive(Clone, Copy, Debug)]
pub(crate) struct Aabb {
    pub min: Point,
    pub max: Point,
}

impl Aabb {
    pub fn of_points(pts: &[Point]) -> Aabb {
        let mut b = Aabb { min: [f64::INFINITY; 2], max: [f64::NEG_INFINITY; 2] };
        for p in pts {
            b.min = [b.min[0].min(p[0]), b.min[1].min(p[1])];
            b.max = [b.max[0].max(p[0]), b.max[1].max(p[1])];
        }
        b
    }

    pub fn inflate(self, r: f64) -> Aabb {
        Aabb { min: [self.min[0] - r, self.min[1] - r], max: [self.max[0] + r, self.max[1] + r] }
    }

    fn union(self, o: Aabb) -> Aabb {
        Aabb {
            min: [self.min[0].min(o.min[0]), self.min[1].min(o.min[1])],
            max: [self.max[0].max(o.max[0]), self.max[1].max(o.max[1])],
        }
    }

    #[inline]
    pub fn overlaps(&self, o: &Aabb) -> bool {
        self.min[0] <= o.max[0] && o.min[0] <= self.max[0] && self.min[1] <= o.max[1] && o.min[1] <= self.max[1]
    }
}

#[derive(Debug)]
enum Node {
    Leaf { bbox: Aabb, start: usize, end: usize },
    Inner { bbox: Aabb, left: usize, right: usize },
}

impl Node {
    fn bbox(&self) -> &Aabb {
        match self {
            Node::Leaf { bbox, .. } | Node::Inner { bbox, .. } => bbox,
        }
    }
}

#[derive(Debug)]
pub(crate) struct BoxTree {
    nodes: Vec<Node>,
    items: Vec<usize>,
    boxes: Vec<Aabb>,
}

const LEAF_SIZE: usize = 8;

impl BoxTree {
    pub fn new(boxes: Vec<Aabb>) -> BoxTree {
        let mut tree = BoxTree { nodes: Vec::new(), items: (0..boxes.len()).collect(), boxes };
        if !tree.boxes.is_empty() {
            let n = tree.items.len();
            tree.build(0, n);
        }
        tree
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let bbox = self.items[start..end].iter().map(|&i| self.boxes[i]).reduce(Aabb::union).unwrap();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { bbox, start, end });
            return self.nodes.len() - 1;
        }
        let axis = if bbox.max[0] - bbox.min[0] >= bbox.max[1] - bbox.min[1] { 0 } else { 1 };
        let boxes = &self.boxes;
        let mid = (start + end) / 2;
        self.items[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            let ca = boxes[a].min[axis] + boxes[a].max[axis];
            let cb = boxes[b].min[axis] + boxes[b].max[axis];
            ca.total_cmp(&cb)
        });
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf { bbox, start, end });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[slot] = Node::Inner { bbox, left, right };
        slot
    }

    /// Visit every item whose box overlaps `query`.
    pub fn query(&self, query: &Aabb, mut visit: impl FnMut(usize)) {
        if self.nodes.is_empty() {
            return;
        }
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            if !node.bbox().overlaps(query) {
                continue;
            }
            match node {
                Node::Leaf { start, end, .. } => {
                    for &i in &self.items[*start..*end] {
                        if self.boxes[i].overlaps(query) {
                            visit(i);
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    stack.push(*right);
                    stack.push(*left);
                }
            }
        }
    }
}

/// Point location over the triangles of a mesh.
#[derive(Debug)]
pub(crate) struct Locator {
    tree: BoxTree,
    tol: f64,
}

impl Locator {
    pub fn new(mesh: &Mesh) -> Locator {
        let boxes = (0..mesh.num_triangles()).map(|t| Aabb::of_points(&mesh.triangle_points(t))).collect();
        let all = Aabb::of_points(&mesh.vertices);
        let scale = (all.max[0] - all.min[0]).max(all.max[1] - all.min[1]);
        Locator { tree: BoxTree::new(boxes), tol: 1e-12 * scale }
    }

    pub fn locate(&self, mesh: &Mesh, x: Point) -> Vec<(usize, [f64; 3])> {
        let mut found = Vec::new();
        let q = Aabb { min: x, max: x }.inflate(self.tol);
        self.tree.query(&q, |t| {
            let [a, b, c] = mesh.triangle_points(t);
            let area2 = geom::orient(a, b, c);
            let l0 = geom::orient(x, b, c) / area2;
            let l1 = geom::orient(a, x, c) / area2;
            let l2 = 1.0 - l0 - l1;
            // Relative tolerance in barycentric units.
            let eps = 1e-10;
            if l0 >= -eps && l1 >= -eps && l2 >= -eps {
                found.push((t, [l0, l1, l2]));
            }
        });
        found.sort_by_key(|(t, _)| *t);
        found
    }
}
