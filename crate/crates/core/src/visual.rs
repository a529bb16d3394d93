//! Image input from precomputed CNN feature grids.
//!
//! File layout (little-endian):
//!
//! ```text
//! b"FGRD"  u32 height  u32 width  u32 channels  f32 × (height·width·channels)
//! ```
//!
//! Values are stored row-major over `(row, col, channel)`.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::Rng;

use crate::autodiff::{Graph, Var};
use crate::dropout::Dropout;
use crate::error::{Error, Result};
use crate::fusion::{FactSequence, FusionLayer};
use crate::params::{init_weights, Init, ParamId, ParamKind, ParamSet};

pub const MAGIC: &[u8; 4] = b"FGRD";
const HEADER_LEN: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureGrid {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    values: Vec<f32>,
}

impl FeatureGrid {
    pub fn new(height: usize, width: usize, channels: usize, values: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::Format(format!(
                "grid dimensions must be positive, got {height}x{width}x{channels}"
            )));
        }
        let expected = height * width * channels;
        if values.len() != expected {
            return Err(Error::Format(format!(
                "size mismatch: header declares {height}x{width}x{channels} = {expected} values, payload has {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Format(format!("non-finite value at offset {i}")));
        }
        Ok(FeatureGrid {
            height,
            width,
            channels,
            values,
        })
    }

    /// Feature vector of the patch at `(row, col)`.
    pub fn patch(&self, row: usize, col: usize) -> &[f32] {
        let start = (row * self.width + col) * self.channels;
        &self.values[start..start + self.channels]
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Format(format!(
                "truncated header: {} bytes, need {HEADER_LEN}",
                bytes.len()
            )));
        }
        if &bytes[..4] != MAGIC {
            return Err(Error::Format(format!("bad magic {:?}", &bytes[..4])));
        }
        let dim = |i: usize| {
            let b = &bytes[4 + 4 * i..8 + 4 * i];
            u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize
        };
        let (h, w, c) = (dim(0), dim(1), dim(2));
        let payload = &bytes[HEADER_LEN..];
        if payload.len() % 4 != 0 {
            return Err(Error::Format(format!(
                "payload of {} bytes is not a whole number of f32 values",
                payload.len()
            )));
        }
        let values = payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        FeatureGrid::new(h, w, c, values)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.values.len());
        out.extend_from_slice(MAGIC);
        for d in [self.height, self.width, self.channels] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_bytes()).map_err(|e| Error::io(path, e))
    }
}

pub fn load_feature_grid(path: impl AsRef<Path>) -> Result<FeatureGrid> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    FeatureGrid::from_bytes(&bytes)
}

/// Boustrophedon order: even rows left to right, odd rows right to left.
pub fn snake_order(height: usize, width: usize) -> Vec<(usize, usize)> {
    (0..height)
        .flat_map(|r| {
            let cols: Box<dyn Iterator<Item = usize>> = if r % 2 == 0 {
                Box::new(0..width)
            } else {
                Box::new((0..width).rev())
            };
            cols.map(move |c| (r, c))
        })
        .collect()
}

/// `tanh(W_p v + b_p)`, mapping `C`-channel patches into the text space.
#[derive(Clone, Debug)]
pub struct VisualProjection {
    pub w: ParamId,
    pub b: ParamId,
    pub channels: usize,
    pub dim: usize,
}

impl VisualProjection {
    pub fn new<R: Rng + ?Sized>(
        params: &mut ParamSet,
        prefix: &str,
        channels: usize,
        dim: usize,
        rng: &mut R,
    ) -> Self {
        VisualProjection {
            w: params.add(
                format!("{prefix}.w"),
                ParamKind::Weight,
                init_weights(Init::XavierUniform, &[dim, channels], rng),
            ),
            b: params.add(format!("{prefix}.b"), ParamKind::Bias, init_weights(Init::Zeros, &[dim], rng)),
            channels,
            dim,
        }
    }
}

/// Projected patch vectors in snake order. Dropout applies to the raw patch
/// features, before projection.
pub fn project_patches(
    g: &mut Graph<'_>,
    grid: &FeatureGrid,
    proj: &VisualProjection,
    dropout: &mut Dropout<'_>,
) -> Result<Vec<Var>> {
    if grid.channels != proj.channels {
        return Err(Error::dim(
            "project_patches",
            &[grid.height, grid.width, grid.channels],
            &[proj.dim, proj.channels],
        ));
    }
    let w = g.param(proj.w);
    let b = g.param(proj.b);
    let mut out = Vec::with_capacity(grid.height * grid.width);
    let mut buf = vec![0.0; grid.channels];
    for (r, c) in snake_order(grid.height, grid.width) {
        for (dst, &src) in buf.iter_mut().zip(grid.patch(r, c)) {
            *dst = f64::from(src);
        }
        let v = g.vector(&buf);
        let v = dropout.apply(g, v)?;
        let wv = g.matvec(w, v)?;
        let pre = g.add(wv, b)?;
        out.push(g.tanh(pre));
    }
    Ok(out)
}

pub fn visual_facts(
    g: &mut Graph<'_>,
    grid: &FeatureGrid,
    proj: &VisualProjection,
    fusion: &FusionLayer,
    dropout: &mut Dropout<'_>,
) -> Result<FactSequence> {
    let patches = project_patches(g, grid, proj, dropout)?;
    fusion.fuse(g, &patches)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid(h: usize, w: usize, c: usize, seed: u64) -> FeatureGrid {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..h * w * c).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
        FeatureGrid::new(h, w, c, values).unwrap()
    }

    #[test]
    fn snake_order_examples() {
        assert_eq!(snake_order(2, 2), vec![(0, 0), (0, 1), (1, 1), (1, 0)]);
        assert_eq!(snake_order(1, 3), vec![(0, 0), (0, 1), (0, 2)]);
        assert_eq!(
            snake_order(3, 3),
            vec![(0, 0), (0, 1), (0, 2), (1, 2), (1, 1), (1, 0), (2, 0), (2, 1), (2, 2)]
        );
    }

    #[test]
    fn snake_order_is_an_adjacent_tour() {
        for h in 1..7 {
            for w in 1..7 {
                let order = snake_order(h, w);
                assert_eq!(order.len(), h * w);
                let mut seen = vec![false; h * w];
                for &(r, c) in &order {
                    assert!(!seen[r * w + c]);
                    seen[r * w + c] = true;
                }
                for pair in order.windows(2) {
                    let (a, b) = (pair[0], pair[1]);
                    assert_eq!(a.0.abs_diff(b.0) + a.1.abs_diff(b.1), 1);
                }
            }
        }
    }

    #[test]
    fn file_round_trip() {
        let g = grid(2, 2, 3, 0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.fgrd");
        g.save(&path).unwrap();
        let back = load_feature_grid(&path).unwrap();
        assert_eq!(back, g);
        assert_eq!(snake_order(back.height, back.width).len(), 4);
    }

    #[test]
    fn malformed_files_are_rejected() {
        let g = grid(2, 2, 3, 0);
        let bytes = g.to_bytes();
        // truncated
        assert!(matches!(FeatureGrid::from_bytes(&bytes[..10]), Err(Error::Format(_))));
        assert!(matches!(FeatureGrid::from_bytes(&bytes[..bytes.len() - 4]), Err(Error::Format(_))));
        // bad magic
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(FeatureGrid::from_bytes(&bad), Err(Error::Format(_))));
        // non-finite
        let mut nan = bytes.clone();
        nan[16..20].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(FeatureGrid::from_bytes(&nan), Err(Error::Format(_))));
    }

    #[test]
    fn header_payload_size_mismatch() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(MAGIC);
        for d in [14u32, 14, 512] {
            bytes.extend_from_slice(&d.to_le_bytes());
        }
        bytes.resize(16 + 14 * 14 * 511 * 4, 0);
        let err = FeatureGrid::from_bytes(&bytes).unwrap_err();
        assert!(err.to_string().contains("size mismatch"), "{err}");
    }

    fn setup(c: usize, d: usize, h: usize) -> (ParamSet, VisualProjection, FusionLayer) {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut ps = ParamSet::new();
        let proj = VisualProjection::new(&mut ps, "visual", c, d, &mut rng);
        let fusion = FusionLayer::new(&mut ps, "fusion", d, h, &mut rng);
        (ps, proj, fusion)
    }

    #[test]
    fn zero_projection_maps_to_zero() {
        let (mut ps, proj, _) = setup(3, 2, 2);
        ps.zero_all();
        let gr = grid(2, 2, 3, 1);
        let mut g = Graph::with_params(&ps);
        for p in project_patches(&mut g, &gr, &proj, &mut Dropout::off()).unwrap() {
            assert_eq!(g.value(p), &[0.0, 0.0]);
        }
    }

    #[test]
    fn identity_projection_is_near_identity_for_small_inputs() {
        let (mut ps, proj, _) = setup(3, 3, 2);
        *ps.value_mut(proj.w) = crate::Tensor::identity(3);
        ps.value_mut(proj.b).data_mut().fill(0.0);
        let values: Vec<f32> = (0..12).map(|i| 1e-3 * i as f32).collect();
        let gr = FeatureGrid::new(2, 2, 3, values).unwrap();
        let mut g = Graph::with_params(&ps);
        let out = project_patches(&mut g, &gr, &proj, &mut Dropout::off()).unwrap();
        for ((r, c), v) in snake_order(2, 2).into_iter().zip(out) {
            for (a, &b) in g.value(v).iter().zip(gr.patch(r, c)) {
                assert!((a - f64::from(b)).abs() <= f64::from(b).abs().powi(3));
            }
        }
    }

    #[test]
    fn projection_is_bounded() {
        let (mut ps, proj, _) = setup(4, 3, 2);
        ps.value_mut(proj.w).data_mut().iter_mut().for_each(|v| *v *= 5.0);
        let values: Vec<f32> = (0..3 * 3 * 4).map(|i| (i as f32 - 18.0) * 3.0).collect();
        let gr = FeatureGrid::new(3, 3, 4, values).unwrap();
        let mut g = Graph::with_params(&ps);
        for p in project_patches(&mut g, &gr, &proj, &mut Dropout::off()).unwrap() {
            assert!(g.value(p).iter().all(|v| v.abs() <= 1.0));
        }
    }

    #[test]
    fn channel_mismatch_is_an_error() {
        let (ps, proj, _) = setup(4, 3, 2);
        let gr = grid(2, 2, 3, 0);
        let mut g = Graph::with_params(&ps);
        assert!(matches!(
            project_patches(&mut g, &gr, &proj, &mut Dropout::off()),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn visual_fact_counts() {
        let (ps, proj, fusion) = setup(3, 2, 2);
        let mut g = Graph::with_params(&ps);
        let one = visual_facts(&mut g, &grid(1, 1, 3, 0), &proj, &fusion, &mut Dropout::off()).unwrap();
        assert_eq!(one.len(), 1);
        let four = visual_facts(&mut g, &grid(2, 2, 3, 0), &proj, &fusion, &mut Dropout::off()).unwrap();
        assert_eq!(four.len(), 4);
    }

    #[test]
    fn perturbing_one_patch_reaches_distant_facts() {
        let (ps, proj, fusion) = setup(3, 4, 4);
        let base = grid(3, 3, 3, 5);
        let mut vals = base.values().to_vec();
        // patch (0,0) is first in snake order; the last is (2,2)
        vals[0] += 0.5;
        let moved = FeatureGrid::new(3, 3, 3, vals).unwrap();
        let mut g = Graph::with_params(&ps);
        let a = visual_facts(&mut g, &base, &proj, &fusion, &mut Dropout::off()).unwrap();
        let b = visual_facts(&mut g, &moved, &proj, &fusion, &mut Dropout::off()).unwrap();
        assert_ne!(g.value(a.facts[8]), g.value(b.facts[8]));
    }
}
