//! Exact nearest-neighbor queries over 3D points with a bucketed k-d tree.

const LEAF_SIZE: usize = 12;

#[derive(Debug, Clone, Copy)]
enum Node {
    Leaf {
        start: u32,
        end: u32,
    },
    Split {
        dim: u8,
        value: f64,
        left: u32,
        right: u32,
    },
}

/// Immutable k-d tree. Queries return the exact Euclidean minimum; among
/// equidistant points the reported index is deterministic but unspecified.
#[derive(Debug, Clone)]
pub struct NnIndex {
    points: Vec<[f64; 3]>,
    ids: Vec<u32>,
    nodes: Vec<Node>,
}

#[inline]
pub(crate) fn squared_distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

impl NnIndex {
    pub fn new(points: &[[f64; 3]]) -> Self {
        assert!(
            points.len() < u32::MAX as usize,
            "index holds at most 2^32 - 1 points"
        );
        let mut entries: Vec<([f64; 3], u32)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| (*p, i as u32))
            .collect();
        let mut nodes = Vec::with_capacity(2 * points.len() / LEAF_SIZE + 1);
        if !entries.is_empty() {
            build(&mut entries, 0, &mut nodes);
        }
        let (points, ids) = entries.into_iter().unzip();
        Self { points, ids, nodes }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Nearest indexed point to `query` as `(index, distance)`; `None` when
    /// the index is empty.
    pub fn nearest(&self, query: &[f64; 3]) -> Option<(usize, f64)> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best = (u32::MAX, f64::INFINITY);
        self.nearest_in(0, query, &mut best);
        Some((best.0 as usize, best.1.sqrt()))
    }

    fn nearest_in(&self, node: usize, q: &[f64; 3], best: &mut (u32, f64)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for i in start as usize..end as usize {
                    let d = squared_distance(q, &self.points[i]);
                    if d < best.1 {
                        *best = (self.ids[i], d);
                    }
                }
            }
            Node::Split {
                dim,
                value,
                left,
                right,
            } => {
                let diff = q[dim as usize] - value;
                let (near, far) = if diff < 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.nearest_in(near as usize, q, best);
                if diff * diff < best.1 {
                    self.nearest_in(far as usize, q, best);
                }
            }
        }
    }

    /// The `k` nearest indexed points, closest first, as `(index, distance)`.
    pub fn k_nearest(&self, query: &[f64; 3], k: usize) -> Vec<(usize, f64)> {
        if k == 0 || self.nodes.is_empty() {
            return Vec::new();
        }
        let mut found: Vec<(f64, u32)> = Vec::with_capacity(k + 1);
        self.k_nearest_in(0, query, k, &mut found);
        found
            .into_iter()
            .map(|(d, i)| (i as usize, d.sqrt()))
            .collect()
    }

    fn k_nearest_in(&self, node: usize, q: &[f64; 3], k: usize, found: &mut Vec<(f64, u32)>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for i in start as usize..end as usize {
                    let d = squared_distance(q, &self.points[i]);
                    if found.len() == k && d >= found[k - 1].0 {
                        continue;
                    }
                    let at = found.partition_point(|e| e.0 <= d);
                    found.insert(at, (d, self.ids[i]));
                    found.truncate(k);
                }
            }
            Node::Split {
                dim,
                value,
                left,
                right,
            } => {
                let diff = q[dim as usize] - value;
                let (near, far) = if diff < 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.k_nearest_in(near as usize, q, k, found);
                if found.len() < k || diff * diff < found[k - 1].0 {
                    self.k_nearest_in(far as usize, q, k, found);
                }
            }
        }
    }
}

fn build(entries: &mut [([f64; 3], u32)], offset: usize, nodes: &mut Vec<Node>) -> u32 {
    let id = nodes.len() as u32;
    if entries.len() <= LEAF_SIZE {
        nodes.push(Node::Leaf {
            start: offset as u32,
            end: (offset + entries.len()) as u32,
        });
        return id;
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for (p, _) in entries.iter() {
        for d in 0..3 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    let dim = (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
        .unwrap();
    if hi[dim] - lo[dim] == 0.0 {
        // all coincident
        nodes.push(Node::Leaf {
            start: offset as u32,
            end: (offset + entries.len()) as u32,
        });
        return id;
    }
    let mid = entries.len() / 2;
    entries.select_nth_unstable_by(mid, |a, b| a.0[dim].total_cmp(&b.0[dim]));
    let value = entries[mid].0[dim];
    nodes.push(Node::Leaf { start: 0, end: 0 });
    let (left_entries, right_entries) = entries.split_at_mut(mid);
    let left = build(left_entries, offset, nodes);
    let right = build(right_entries, offset + mid, nodes);
    nodes[id as usize] = Node::Split {
        dim: dim as u8,
        value,
        left,
        right,
    };
    id
}
