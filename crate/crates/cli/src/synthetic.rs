//! Deterministic synthetic datasets.

use std::f64::consts::PI;

use eqvit::group::{GroupElement, GroupSpec};
use eqvit::layers::spatial_transform_array;
use eqvit::tensor::NdArray;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{Degradation, Orientation, SyntheticTaskSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn stream(self) -> u64 {
        match self {
            Split::Train => 0,
            Split::Test => 1,
        }
    }

    fn orientation(self, spec: &SyntheticTaskSpec) -> Orientation {
        match self {
            Split::Train => spec.train_orientation,
            Split::Test => spec.test_orientation,
        }
    }

    fn size(self, spec: &SyntheticTaskSpec) -> usize {
        match self {
            Split::Train => spec.train_size,
            Split::Test => spec.test_size,
        }
    }
}

fn rng_for(spec: &SyntheticTaskSpec, split: Split) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(split.stream());
    rng
}

/// Glyphs as `(row, col)` cells. None is a rotation of another one, and none
/// is rotation-symmetric, so each orientation is visually distinct.
pub const GLYPHS: [&[(usize, usize)]; 4] = [
    // L-tetromino
    &[(0, 0), (1, 0), (2, 0), (2, 1)],
    // T-tetromino
    &[(0, 0), (0, 1), (0, 2), (1, 1)],
    // S-tetromino
    &[(0, 1), (0, 2), (1, 0), (1, 1)],
    // corner wedge
    &[(0, 0), (1, 0), (1, 1), (2, 0), (2, 1), (2, 2)],
];

/// Labelled single-channel images `[side, side, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    pub images: Vec<NdArray<f64>>,
    pub labels: Vec<usize>,
}

impl LabeledSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Applies `g` to every image.
    pub fn transformed(&self, spec: &GroupSpec, g: GroupElement) -> Self {
        LabeledSet {
            images: self.images.iter().map(|x| spatial_transform_array(spec, g, x).expect("square image")).collect(),
            labels: self.labels.clone(),
        }
    }

    /// Little-endian bytes of every pixel and label, for reproducibility checks.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for (x, &y) in self.images.iter().zip(&self.labels) {
            out.extend((y as u64).to_le_bytes());
            out.extend(x.data().iter().flat_map(|v| v.to_le_bytes()));
        }
        out
    }
}

/// Rotation applied to sample `i` under `policy`: none for canonical sets,
/// the four quarter turns in turn otherwise.
pub fn orientation_of(policy: Orientation, i: usize) -> GroupElement {
    match policy {
        Orientation::CanonicalOnly => GroupElement::IDENTITY,
        Orientation::AllOrientations => GroupElement::new(i % 4, 0),
    }
}

fn draw_glyph(side: usize, class: usize, noise: f64, rng: &mut ChaCha8Rng) -> NdArray<f64> {
    let cell = (side / 8).max(1);
    let glyph = GLYPHS[class % GLYPHS.len()];
    let rows = glyph.iter().map(|c| c.0).max().unwrap() + 1;
    let cols = glyph.iter().map(|c| c.1).max().unwrap() + 1;
    let oi = rng.random_range(0..=side - rows * cell);
    let oj = rng.random_range(0..=side - cols * cell);
    let mut img = NdArray::zeros(vec![side, side, 1]);
    for &(r, c) in glyph {
        for a in 0..cell {
            for b in 0..cell {
                img.set(&[oi + r * cell + a, oj + c * cell + b, 0], 1.0);
            }
        }
    }
    for v in img.data_mut() {
        *v += rng.random_range(-noise..=noise);
    }
    img
}

/// Rotated-shape classification data. Labels cycle through the classes, so
/// class counts differ by at most one. Sample `i` of a split is the same
/// canonical glyph whatever the orientation policy; the policy only rotates
/// the finished image.
pub fn gen_shapes(spec: &SyntheticTaskSpec, split: Split) -> LabeledSet {
    assert!(spec.image_side >= 16, "shape images need a side of at least 16");
    let mut rng = rng_for(spec, split);
    let c4 = GroupSpec::c4();
    let policy = split.orientation(spec);
    let classes = spec.num_classes.min(GLYPHS.len());
    let mut set = LabeledSet { images: Vec::new(), labels: Vec::new() };
    for i in 0..split.size(spec) {
        let label = i % classes;
        let img = draw_glyph(spec.image_side, label, spec.noise, &mut rng);
        set.images.push(spatial_transform_array(&c4, orientation_of(policy, i), &img).expect("square image"));
        set.labels.push(label);
    }
    set
}

/// Low/high resolution image pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSet {
    pub inputs: Vec<NdArray<f64>>,
    pub targets: Vec<NdArray<f64>>,
}

impl PairSet {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn transformed(&self, spec: &GroupSpec, g: GroupElement) -> Self {
        let map = |v: &Vec<NdArray<f64>>| -> Vec<NdArray<f64>> {
            v.iter().map(|x| spatial_transform_array(spec, g, x).expect("square image")).collect()
        };
        PairSet { inputs: map(&self.inputs), targets: map(&self.targets) }
    }
}

/// Sum of three sinusoidal gratings scaled into `[0, 1]`. Canonical
/// textures keep wave vectors within 20° of the vertical axis, giving
/// mostly horizontal stripes.
fn texture(side: usize, policy: Orientation, rng: &mut ChaCha8Rng) -> NdArray<f64> {
    let waves: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| {
            let theta = match policy {
                Orientation::CanonicalOnly => rng.random_range(-20.0..20.0f64).to_radians(),
                Orientation::AllOrientations => rng.random_range(0.0..PI),
            };
            let freq = rng.random_range(0.08..0.3) * 2.0 * PI;
            (theta, freq, rng.random_range(0.0..2.0 * PI))
        })
        .collect();
    let mut img = NdArray::zeros(vec![side, side, 1]);
    for i in 0..side {
        for j in 0..side {
            let v: f64 =
                waves.iter().map(|&(th, f, ph)| (f * (i as f64 * th.cos() + j as f64 * th.sin()) + ph).sin()).sum();
            img.set(&[i, j, 0], 0.5 + v / 6.0);
        }
    }
    img
}

fn box_average(hr: &NdArray<f64>, r: usize) -> NdArray<f64> {
    let side = hr.shape()[0] / r;
    NdArray::from_fn(vec![side, side, 1], |idx| {
        let (i, j) = (idx / side, idx % side);
        let mut acc = 0.0;
        for a in 0..r {
            for b in 0..r {
                acc += hr.get(&[i * r + a, j * r + b, 0]);
            }
        }
        acc / (r * r) as f64
    })
}

fn nearest_up(lr: &NdArray<f64>, r: usize) -> NdArray<f64> {
    let side = lr.shape()[0] * r;
    NdArray::from_fn(vec![side, side, 1], |idx| lr.get(&[(idx / side) / r, (idx % side) / r, 0]))
}

/// Toy super-resolution pairs: `[s, s, 1]` inputs and `[s·r, s·r, 1]` targets.
pub fn gen_sr(spec: &SyntheticTaskSpec, split: Split) -> PairSet {
    let mut rng = rng_for(spec, split);
    let policy = split.orientation(spec);
    let r = spec.scale;
    let mut set = PairSet { inputs: Vec::new(), targets: Vec::new() };
    for _ in 0..split.size(spec) {
        let hr = texture(spec.image_side * r, policy, &mut rng);
        let lr = box_average(&hr, r);
        let target = match spec.degradation {
            Degradation::Average => hr,
            Degradation::Nearest => nearest_up(&lr, r),
        };
        set.inputs.push(lr);
        set.targets.push(target);
    }
    set
}
