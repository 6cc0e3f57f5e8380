//! SLIC superpixels: k-means over (L, a, b, x, y) with a grid
//! initialisation, followed by connectivity enforcement.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::image::RasterImage;
use super::ExplainError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlicParams {
    pub target_segments: usize,
    /// Weight of the spatial term relative to colour distance.
    pub compactness: f64,
    pub iterations: usize,
}

impl Default for SlicParams {
    fn default() -> Self {
        Self {
            target_segments: 50,
            compactness: 10.0,
            iterations: 10,
        }
    }
}

/// Per-pixel segment ids in `[0, segment_count)`, row-major. Ids are
/// numbered by first appearance in raster order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentMap {
    width: u32,
    height: u32,
    labels: Vec<u32>,
    segment_count: usize,
}

impl SegmentMap {
    /// Builds a map from arbitrary labels, renumbering them by first
    /// appearance. Does not check connectivity.
    pub fn from_labels(width: u32, height: u32, raw: &[u32]) -> Result<Self, ExplainError> {
        let expected = width as usize * height as usize;
        if raw.len() != expected || expected == 0 {
            return Err(ExplainError::LengthMismatch {
                expected,
                found: raw.len(),
            });
        }
        let mut remap = std::collections::HashMap::new();
        let labels = raw
            .iter()
            .map(|&l| {
                let next = remap.len() as u32;
                *remap.entry(l).or_insert(next)
            })
            .collect();
        Ok(Self {
            width,
            height,
            labels,
            segment_count: remap.len(),
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn segment_count(&self) -> usize {
        self.segment_count
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i] as usize
    }

    pub fn pixel_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.segment_count];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }

    /// True when `i` has a 4-neighbour in a different segment.
    pub fn is_boundary(&self, i: usize) -> bool {
        let (w, h) = (self.width as usize, self.height as usize);
        let (x, y) = (i % w, i / w);
        let l = self.labels[i];
        (x > 0 && self.labels[i - 1] != l)
            || (x + 1 < w && self.labels[i + 1] != l)
            || (y > 0 && self.labels[i - w] != l)
            || (y + 1 < h && self.labels[i + w] != l)
    }

    /// Number of 4-connected components of each segment.
    pub fn components_per_segment(&self) -> Vec<usize> {
        let comp = connected_components(self.width as usize, self.height as usize, &self.labels);
        let mut counts = vec![0; self.segment_count];
        for c in &comp.members {
            counts[self.labels[c[0]] as usize] += 1;
        }
        counts
    }
}

pub fn slic_segment(image: &RasterImage, params: &SlicParams) -> Result<SegmentMap, ExplainError> {
    let (w, h) = (image.width() as usize, image.height() as usize);
    let n = w * h;
    let k = params.target_segments;
    if k == 0
        || params.iterations == 0
        || !(params.compactness > 0.0)
        || !params.compactness.is_finite()
    {
        return Err(ExplainError::InvalidParameter(format!(
            "segmentation needs target_segments >= 1, iterations >= 1 and compactness > 0 (got {}, {}, {})",
            k, params.iterations, params.compactness
        )));
    }
    if k > n {
        return Err(ExplainError::TooManySegments {
            requested: k,
            pixels: n,
        });
    }
    if k == 1 {
        return SegmentMap::from_labels(w as u32, h as u32, &vec![0; n]);
    }

    let lab: Vec<[f64; 3]> = image.pixels().map(srgb_to_lab).collect();

    // grid of nx * ny seeds, nx * ny <= 1.5 k
    let nx = ((k as f64 * w as f64 / h as f64).sqrt().round() as usize).clamp(1, w.min(k));
    let ny = ((k as f64 / nx as f64).round() as usize).clamp(1, h);
    let step = (n as f64 / k as f64).sqrt();
    let mut centers: Vec<Center> = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let x = ((i as f64 + 0.5) * w as f64 / nx as f64).floor() as usize;
            let y = ((j as f64 + 0.5) * h as f64 / ny as f64).floor() as usize;
            let p = y * w + x;
            centers.push(Center {
                lab: lab[p],
                x: x as f64,
                y: y as f64,
            });
        }
    }
    let rx = (w as f64 / nx as f64).max(step).ceil() as isize;
    let ry = (h as f64 / ny as f64).max(step).ceil() as isize;
    let spatial = (params.compactness / step).powi(2);

    let mut labels = vec![u32::MAX; n];
    let mut dist = vec![f64::INFINITY; n];
    for _ in 0..params.iterations {
        labels.fill(u32::MAX);
        dist.fill(f64::INFINITY);
        for (ci, c) in centers.iter().enumerate() {
            let (cx, cy) = (c.x.round() as isize, c.y.round() as isize);
            let x0 = (cx - rx).max(0) as usize;
            let x1 = ((cx + rx) as usize).min(w - 1);
            let y0 = (cy - ry).max(0) as usize;
            let y1 = ((cy + ry) as usize).min(h - 1);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let p = y * w + x;
                    let d = c.distance(&lab[p], x, y, spatial);
                    if d < dist[p] {
                        dist[p] = d;
                        labels[p] = ci as u32;
                    }
                }
            }
        }
        // pixels outside every window go to the nearest centre overall
        for p in 0..n {
            if labels[p] == u32::MAX {
                let (x, y) = (p % w, p / w);
                let mut best = (f64::INFINITY, 0u32);
                for (ci, c) in centers.iter().enumerate() {
                    let d = c.distance(&lab[p], x, y, spatial);
                    if d < best.0 {
                        best = (d, ci as u32);
                    }
                }
                labels[p] = best.1;
            }
        }
        let mut sums = vec![[0.0f64; 6]; centers.len()];
        for p in 0..n {
            let s = &mut sums[labels[p] as usize];
            s[0] += lab[p][0];
            s[1] += lab[p][1];
            s[2] += lab[p][2];
            s[3] += (p % w) as f64;
            s[4] += (p / w) as f64;
            s[5] += 1.0;
        }
        for (c, s) in centers.iter_mut().zip(&sums) {
            if s[5] > 0.0 {
                *c = Center {
                    lab: [s[0] / s[5], s[1] / s[5], s[2] / s[5]],
                    x: s[3] / s[5],
                    y: s[4] / s[5],
                };
            }
        }
    }

    let min_size = (n / (nx * ny) / 4).max(1);
    let merged = enforce_connectivity(w, h, &labels, &lab, min_size);
    SegmentMap::from_labels(w as u32, h as u32, &merged)
}

#[derive(Debug, Clone, Copy)]
struct Center {
    lab: [f64; 3],
    x: f64,
    y: f64,
}

impl Center {
    fn distance(&self, lab: &[f64; 3], x: usize, y: usize, spatial: f64) -> f64 {
        let dc = (self.lab[0] - lab[0]).powi(2)
            + (self.lab[1] - lab[1]).powi(2)
            + (self.lab[2] - lab[2]).powi(2);
        let ds = (self.x - x as f64).powi(2) + (self.y - y as f64).powi(2);
        dc + ds * spatial
    }
}

struct Components {
    /// Component id per pixel.
    id: Vec<usize>,
    /// Pixel indices per component, first entry is the first pixel in
    /// raster order.
    members: Vec<Vec<usize>>,
}

fn connected_components(w: usize, h: usize, labels: &[u32]) -> Components {
    let n = w * h;
    let mut id = vec![usize::MAX; n];
    let mut members = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..n {
        if id[start] != usize::MAX {
            continue;
        }
        let cid = members.len();
        let l = labels[start];
        let mut pix = vec![start];
        id[start] = cid;
        queue.push_back(start);
        while let Some(p) = queue.pop_front() {
            let (x, y) = (p % w, p / w);
            let mut visit = |q: usize| {
                if id[q] == usize::MAX && labels[q] == l {
                    id[q] = cid;
                    pix.push(q);
                    queue.push_back(q);
                }
            };
            if x > 0 {
                visit(p - 1);
            }
            if x + 1 < w {
                visit(p + 1);
            }
            if y > 0 {
                visit(p - w);
            }
            if y + 1 < h {
                visit(p + w);
            }
        }
        members.push(pix);
    }
    Components { id, members }
}

/// Relabels so every segment is one 4-connected region. The largest
/// component of each k-means cluster keeps its identity; smaller fragments,
/// and any region below `min_size`, are merged (smallest first) into the
/// adjacent region with the closest mean colour.
fn enforce_connectivity(
    w: usize,
    h: usize,
    labels: &[u32],
    lab: &[[f64; 3]],
    min_size: usize,
) -> Vec<u32> {
    let comps = connected_components(w, h, labels);
    let m = comps.members.len();

    let mut anchor = vec![false; m];
    let mut best: std::collections::HashMap<u32, usize> = Default::default();
    for (c, pix) in comps.members.iter().enumerate() {
        let l = labels[pix[0]];
        let e = best.entry(l).or_insert(c);
        if comps.members[*e].len() < pix.len() {
            *e = c;
        }
    }
    for &c in best.values() {
        anchor[c] = true;
    }

    let mut size: Vec<usize> = comps.members.iter().map(Vec::len).collect();
    let mut color: Vec<[f64; 3]> = comps
        .members
        .iter()
        .map(|pix| {
            let mut s = [0.0; 3];
            for &p in pix {
                for (a, b) in s.iter_mut().zip(lab[p]) {
                    *a += b;
                }
            }
            s
        })
        .collect();
    let mut adjacent: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); m];
    for p in 0..w * h {
        let (x, y) = (p % w, p / w);
        let a = comps.id[p];
        if x + 1 < w && comps.id[p + 1] != a {
            adjacent[a].insert(comps.id[p + 1]);
            adjacent[comps.id[p + 1]].insert(a);
        }
        if y + 1 < h && comps.id[p + w] != a {
            adjacent[a].insert(comps.id[p + w]);
            adjacent[comps.id[p + w]].insert(a);
        }
    }

    let mut parent: Vec<usize> = (0..m).collect();
    let is_orphan = |c: usize, size: &[usize], anchor: &[bool]| !anchor[c] || size[c] < min_size;
    let mut queue: BTreeSet<(usize, usize)> = (0..m)
        .filter(|&c| is_orphan(c, &size, &anchor))
        .map(|c| (size[c], c))
        .collect();

    while let Some((_, c)) = queue.pop_first() {
        if parent[c] != c || !is_orphan(c, &size, &anchor) {
            continue;
        }
        let mean =
            |g: usize, color: &[[f64; 3]], size: &[usize]| color[g].map(|v| v / size[g] as f64);
        let here = mean(c, &color, &size);
        let target = adjacent[c]
            .iter()
            .map(|&g| {
                let there = mean(g, &color, &size);
                let d: f64 = here.iter().zip(there).map(|(a, b)| (a - b).powi(2)).sum();
                (d, g)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let Some((_, g)) = target else {
            continue; // single region covering the image
        };
        // fold c into g
        parent[c] = g;
        queue.remove(&(size[g], g));
        size[g] += size[c];
        for i in 0..3 {
            color[g][i] += color[c][i];
        }
        anchor[g] |= anchor[c];
        let moved = std::mem::take(&mut adjacent[c]);
        for &o in &moved {
            adjacent[o].remove(&c);
            if o != g {
                adjacent[o].insert(g);
                adjacent[g].insert(o);
            }
        }
        adjacent[g].remove(&g);
        if is_orphan(g, &size, &anchor) {
            queue.insert((size[g], g));
        }
    }

    let root = |mut c: usize| {
        while parent[c] != c {
            c = parent[c];
        }
        c
    };
    (0..w * h).map(|p| root(comps.id[p]) as u32).collect()
}

/// sRGB (D65) to CIE L*a*b*.
fn srgb_to_lab(rgb: [u8; 3]) -> [f64; 3] {
    let lin = |c: u8| {
        let c = c as f64 / 255.0;
        if c <= 0.04045 {
            c / 12.92
        } else {
            ((c + 0.055) / 1.055).powf(2.4)
        }
    };
    let (r, g, b) = (lin(rgb[0]), lin(rgb[1]), lin(rgb[2]));
    let x = (0.4124564 * r + 0.3575761 * g + 0.1804375 * b) / 0.95047;
    let y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
    let z = (0.0193339 * r + 0.1191920 * g + 0.9503041 * b) / 1.08883;
    let f = |t: f64| {
        if t > 216.0 / 24389.0 {
            t.cbrt()
        } else {
            (24389.0 / 27.0 * t + 16.0) / 116.0
        }
    };
    let (fx, fy, fz) = (f(x), f(y), f(z));
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}
