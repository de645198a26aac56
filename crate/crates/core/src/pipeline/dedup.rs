//! Page-level near-duplicate detection over 64-bit perceptual hashes.

use std::path::Path;

use image::imageops::FilterType;

pub fn hamming(a: u64, b: u64) -> u32 {
    (a ^ b).count_ones()
}

/// Burkhard-Keller tree under Hamming distance. Radius queries are exact.
#[derive(Debug, Default, Clone)]
pub struct BkTree {
    nodes: Vec<BkNode>,
}

#[derive(Debug, Clone)]
struct BkNode {
    hash: u64,
    // (edge distance, node index); at most 65 distinct distances
    children: Vec<(u32, usize)>,
}

impl BkTree {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn insert(&mut self, hash: u64) {
        let new_idx = self.nodes.len();
        if self.nodes.is_empty() {
            self.nodes.push(BkNode { hash, children: Vec::new() });
            return;
        }
        let mut cur = 0;
        loop {
            let d = hamming(self.nodes[cur].hash, hash);
            if d == 0 {
                return;
            }
            match self.nodes[cur].children.iter().find(|(e, _)| *e == d) {
                Some(&(_, next)) => cur = next,
                None => {
                    self.nodes[cur].children.push((d, new_idx));
                    self.nodes.push(BkNode { hash, children: Vec::new() });
                    return;
                }
            }
        }
    }

    /// Closest stored hash within `radius` (inclusive), with its distance.
    pub fn nearest_within(&self, hash: u64, radius: u32) -> Option<(u64, u32)> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best: Option<(u64, u32)> = None;
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            let node = &self.nodes[i];
            let d = hamming(node.hash, hash);
            if d <= radius && best.is_none_or(|(h, bd)| (d, node.hash) < (bd, h)) {
                best = Some((node.hash, d));
            }
            let lo = d.saturating_sub(radius);
            let hi = d + radius;
            stack.extend(
                node.children
                    .iter()
                    .filter(|(e, _)| (lo..=hi).contains(e))
                    .map(|&(_, c)| c),
            );
        }
        best
    }
}

/// First-seen-wins acceptance set for page hashes.
#[derive(Debug, Clone)]
pub struct PageDeduper {
    tree: BkTree,
    radius: u32,
}

impl PageDeduper {
    pub fn new(radius: u32) -> Self {
        Self {
            tree: BkTree::new(),
            radius,
        }
    }

    /// Accepts `hash` unless an accepted hash lies within the radius; returns
    /// the conflicting hash and its distance when rejected.
    pub fn check_and_insert(&mut self, hash: u64) -> Result<(), (u64, u32)> {
        match self.tree.nearest_within(hash, self.radius) {
            Some(hit) => Err(hit),
            None => {
                self.tree.insert(hash);
                Ok(())
            }
        }
    }

    pub fn accepted(&self) -> usize {
        self.tree.len()
    }
}

/// 64-bit difference hash: grayscale, resize to 9x8, one bit per horizontal
/// neighbour pair (`left > right`), row-major, most significant bit first.
pub fn dhash(img: &image::DynamicImage) -> u64 {
    let small = img.to_luma8();
    let small = image::imageops::resize(&small, 9, 8, FilterType::Triangle);
    let mut h = 0u64;
    for y in 0..8 {
        for x in 0..8 {
            let l = small.get_pixel(x, y)[0];
            let r = small.get_pixel(x + 1, y)[0];
            h = (h << 1) | u64::from(l > r);
        }
    }
    h
}

pub fn dhash_file(path: impl AsRef<Path>) -> Result<u64, image::ImageError> {
    Ok(dhash(&image::open(path)?))
}
