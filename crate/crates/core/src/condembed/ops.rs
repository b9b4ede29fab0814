use nalgebra::DMatrix;

use super::layers::Activation;
use super::tensor::{FeatureMap, LatentTensor, TokenMatrix};
use super::weights::{AttentionWeights, Guider, RefFeatures, ToyWeights};
use crate::geometry::PointCloud;
use crate::raster::{LayerStack, RenderTarget, LAYER_COUNT};
use crate::{Error, Result};

/// Patch size and stride of the token convolutions.
pub const TOKEN_STRIDE: usize = 16;
pub const GEOMETRY_POINT_COUNT: usize = 2048;
const GUIDER_FACTOR: usize = 8;

/// Channel cascade of a layer stack: 13 encoded normals (3 channels each,
/// in layer order) followed by 13 confidences.
pub fn mlo_feature_map(stack: &LayerStack) -> FeatureMap {
    let c = LAYER_COUNT * 4;
    let mut map = FeatureMap::zeros(stack.height, stack.width, c);
    for p in 0..stack.width * stack.height {
        let px = &mut map.data[p * c..(p + 1) * c];
        for (l, layer) in stack.layers.iter().enumerate() {
            px[3 * l..3 * l + 3].copy_from_slice(&layer.normal_map[p]);
            px[3 * LAYER_COUNT + l] = stack.confidence[l][p];
        }
    }
    map
}

fn guided_residual(guider: &Guider, act: Activation, inputs: &[FeatureMap], z: &LatentTensor) -> Result<LatentTensor> {
    if inputs.len() != z.b * z.t {
        return Err(Error::shape(format!("{} guider inputs for a latent with b·t = {}", inputs.len(), z.b * z.t)));
    }
    let mut out = z.clone();
    for (i, input) in inputs.iter().enumerate() {
        if input.h % GUIDER_FACTOR != 0 || input.w % GUIDER_FACTOR != 0 {
            return Err(Error::shape(format!("guider input {}×{} is not divisible by 8", input.h, input.w)));
        }
        if input.c != guider.input_channels() {
            return Err(Error::shape(format!("guider expects {} channels, got {}", guider.input_channels(), input.c)));
        }
        let g = guider.forward(input, act)?;
        if (g.h, g.w, g.c) != (z.h, z.w, z.c) {
            return Err(Error::shape(format!(
                "guider output {}×{}×{} does not match latent {}×{}×{}",
                g.h, g.w, g.c, z.h, z.w, z.c
            )));
        }
        let n = z.frame_len();
        for (dst, src) in out.data[i * n..(i + 1) * n].iter_mut().zip(&g.data) {
            *dst += src;
        }
    }
    Ok(out)
}

/// `z' = z + G([H, D])`, one input map per `(b, t)` frame in row-major order.
pub fn pose_guider(inputs: &[FeatureMap], weights: &ToyWeights, z: &LatentTensor) -> Result<LatentTensor> {
    guided_residual(&weights.guider, weights.activation, inputs, z)
}

/// `z'' = z + G1(S)` with the skeleton guider.
pub fn skeleton_guider(inputs: &[FeatureMap], weights: &ToyWeights, z: &LatentTensor) -> Result<LatentTensor> {
    guided_residual(&weights.skeleton_guider, weights.activation, inputs, z)
}

fn check_token_grid(map: &FeatureMap) -> Result<()> {
    if !map.h.is_multiple_of(TOKEN_STRIDE) || !map.w.is_multiple_of(TOKEN_STRIDE) || map.h == 0 || map.w == 0 {
        return Err(Error::shape(format!("{}×{} map is not a multiple of the 16-pixel token grid", map.h, map.w)));
    }
    Ok(())
}

/// `E_F = MLP(Conv[H, D])` on a 52-channel cascade: one token per 16×16
/// cell, row-major over the cell grid.
pub fn mlo_embedding_map(map: &FeatureMap, weights: &ToyWeights) -> Result<TokenMatrix> {
    check_token_grid(map)?;
    let grid = weights.mlo_conv.forward(map)?;
    weights.mlo_mlp.forward_tokens(&grid.to_tokens(), weights.activation)
}

pub fn mlo_embedding(stack: &LayerStack, weights: &ToyWeights) -> Result<TokenMatrix> {
    mlo_embedding_map(&mlo_feature_map(stack), weights)
}

fn project(x: &TokenMatrix, w: &DMatrix<f64>, b: &nalgebra::DVector<f64>) -> Result<DMatrix<f64>> {
    if x.cols() != w.nrows() {
        return Err(Error::shape(format!("tokens have {} columns, projection expects {}", x.cols(), w.nrows())));
    }
    let mut y = &x.0 * w;
    for mut row in y.row_iter_mut() {
        row += b.transpose();
    }
    Ok(y)
}

fn softmax_rows(mut s: DMatrix<f64>) -> DMatrix<f64> {
    for mut row in s.row_iter_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.iter_mut().for_each(|v| *v = (*v - max).exp());
        let sum: f64 = row.iter().sum();
        row /= sum;
    }
    s
}

/// `softmax(Q·Kᵀ/√d)` with row-wise max subtraction.
pub fn attention_probabilities(z: &TokenMatrix, e: &TokenMatrix, attn: &AttentionWeights) -> Result<DMatrix<f64>> {
    let q = project(z, &attn.w_q, &attn.b_q)?;
    let k = project(e, &attn.w_k, &attn.b_k)?;
    Ok(softmax_rows(q * k.transpose() / (attn.dim() as f64).sqrt()))
}

/// `softmax(Q·Kᵀ/√d)·V` with `Q = z·W^Q`, `K = e·W^K`, `V = e·W^V`.
pub fn cross_attention(z: &TokenMatrix, e: &TokenMatrix, attn: &AttentionWeights) -> Result<TokenMatrix> {
    let p = attention_probabilities(z, e, attn)?;
    let v = project(e, &attn.w_v, &attn.b_v)?;
    Ok(TokenMatrix(p * v))
}

/// Gradient of `⟨upstream, cross_attention(z, e)⟩` with respect to `z`.
pub fn cross_attention_grad(
    z: &TokenMatrix,
    e: &TokenMatrix,
    attn: &AttentionWeights,
    upstream: &TokenMatrix,
) -> Result<TokenMatrix> {
    let p = attention_probabilities(z, e, attn)?;
    let k = project(e, &attn.w_k, &attn.b_k)?;
    let v = project(e, &attn.w_v, &attn.b_v)?;
    if upstream.rows() != z.rows() || upstream.cols() != v.ncols() {
        return Err(Error::shape(format!(
            "upstream is {}×{}, output is {}×{}",
            upstream.rows(),
            upstream.cols(),
            z.rows(),
            v.ncols()
        )));
    }
    let dp = &upstream.0 * v.transpose();
    let inner: Vec<f64> = (0..p.nrows()).map(|r| dp.row(r).dot(&p.row(r))).collect();
    let ds = DMatrix::from_fn(p.nrows(), p.ncols(), |r, c| p[(r, c)] * (dp[(r, c)] - inner[r]));
    let dq = ds * k / (attn.dim() as f64).sqrt();
    Ok(TokenMatrix(dq * attn.w_q.transpose()))
}

/// `[f0 | f_1 | ... | f_K]` along width, each reference repeated over `t`.
pub fn width_concat(f0: &LatentTensor, refs: &RefFeatures) -> Result<LatentTensor> {
    refs.validate_against(f0)?;
    let slots = 1 + refs.maps.len();
    let (w, c) = (f0.w, f0.c);
    let mut out = LatentTensor::zeros(f0.b, f0.t, f0.h, slots * w, c);
    for b in 0..f0.b {
        let sources: Vec<FeatureMap> = refs.maps.iter().map(|m| m.frame(b, 0)).collect();
        for t in 0..f0.t {
            let base = f0.frame(b, t);
            let mut wide = FeatureMap::zeros(f0.h, slots * w, c);
            for y in 0..f0.h {
                for s in 0..slots {
                    let src = if s == 0 { &base } else { &sources[s - 1] };
                    let row = &src.data[y * w * c..(y + 1) * w * c];
                    let at = wide.index(y, s * w, 0);
                    wide.data[at..at + w * c].copy_from_slice(row);
                }
            }
            out.set_frame(b, t, &wide);
        }
    }
    Ok(out)
}

/// Width-concatenates the references onto `f0` and reduces back to `f0`'s
/// shape with the stride-`(1+K)` reducer.
pub fn reference_concat(f0: &LatentTensor, refs: &RefFeatures, weights: &ToyWeights) -> Result<LatentTensor> {
    let reducer = weights.reducer(refs.maps.len())?;
    if reducer.conv.cin != f0.c {
        return Err(Error::shape(format!("reducer expects {} channels, got {}", reducer.conv.cin, f0.c)));
    }
    let wide = width_concat(f0, refs)?;
    let slots = 1 + refs.maps.len();
    let (w, c) = (f0.w, f0.c);
    let mut out = LatentTensor::zeros(f0.b, f0.t, f0.h, w, c);
    for b in 0..f0.b {
        for t in 0..f0.t {
            let blocks = wide.frame(b, t);
            let mut inter = FeatureMap::zeros(f0.h, slots * w, c);
            for y in 0..f0.h {
                for s in 0..slots {
                    for j in 0..w {
                        let from = blocks.index(y, s * w + j, 0);
                        let to = inter.index(y, j * slots + s, 0);
                        inter.data[to..to + c].copy_from_slice(&blocks.data[from..from + c]);
                    }
                }
            }
            out.set_frame(b, t, &reducer.conv.forward(&inter)?);
        }
    }
    Ok(out)
}

/// `E_N`: conv tokens of every normal-map frame, in frame order, followed
/// by one point-cloud token (shared per-point MLP, coordinate-wise max-pool,
/// then a 2-layer MLP).
pub fn geometry_embedding_maps(frames: &[FeatureMap], points: &[[f64; 3]], weights: &ToyWeights) -> Result<TokenMatrix> {
    if points.len() != GEOMETRY_POINT_COUNT {
        return Err(Error::shape(format!("point cloud has {} points, expected {GEOMETRY_POINT_COUNT}", points.len())));
    }
    let act = weights.activation;
    let mut blocks = Vec::with_capacity(frames.len() + 1);
    for frame in frames {
        check_token_grid(frame)?;
        let grid = weights.geo_conv.forward(frame)?;
        blocks.push(weights.geo_mlp.forward(&grid.to_tokens().0, act)?);
    }
    let flat: Vec<f64> = points.iter().flatten().copied().collect();
    let per_point = weights.point_mlp.forward(&DMatrix::from_row_slice(points.len(), 3, &flat), act)?.map(|v| act.apply(v));
    let pooled = DMatrix::from_fn(1, per_point.ncols(), |_, c| per_point.column(c).iter().copied().fold(f64::NEG_INFINITY, f64::max));
    blocks.push(weights.point_head.forward(&pooled, act)?);
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks[0].ncols();
    let mut out = DMatrix::zeros(rows, cols);
    let mut r = 0;
    for b in &blocks {
        out.rows_mut(r, b.nrows()).copy_from(b);
        r += b.nrows();
    }
    Ok(TokenMatrix(out))
}

pub fn geometry_embedding(frames: &[RenderTarget], cloud: &PointCloud, weights: &ToyWeights) -> Result<TokenMatrix> {
    let maps: Vec<FeatureMap> = frames
        .iter()
        .map(|t| FeatureMap::new(t.height, t.width, 3, t.normal_map.iter().flatten().copied().collect()))
        .collect::<Result<_>>()?;
    let points: Vec<[f64; 3]> = cloud.points.iter().map(|p| [p.x, p.y, p.z]).collect();
    geometry_embedding_maps(&maps, &points, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::condembed::{ToyConfig, RefReducer};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_map(seed: u64, h: usize, w: usize, c: usize) -> FeatureMap {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        FeatureMap::new(h, w, c, (0..h * w * c).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    fn random_latent(seed: u64, shape: [usize; 5]) -> LatentTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = shape.iter().product();
        let [b, t, h, w, c] = shape;
        LatentTensor::new(b, t, h, w, c, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn zero_guider_is_identity() {
        let w = ToyWeights::zeros(ToyConfig::default());
        let z = random_latent(1, [1, 2, 4, 4, 4]);
        let inputs = vec![random_map(2, 32, 32, 52), random_map(3, 32, 32, 52)];
        assert_eq!(pose_guider(&inputs, &w, &z).unwrap(), z);
    }

    #[test]
    fn guider_is_linear_in_identity_mode() {
        let w = ToyWeights::new(4).with_activation(Activation::Identity);
        let z = LatentTensor::zeros(1, 1, 4, 4, 4);
        let h = random_map(5, 32, 32, 52);
        let g1 = pose_guider(&[h.clone()], &w, &z).unwrap();
        let g3 = pose_guider(&[h.scaled(3.0)], &w, &z).unwrap();
        for (a, b) in g1.data.iter().zip(&g3.data) {
            assert!((3.0 * a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn guider_shape_mismatch() {
        let w = ToyWeights::new(0);
        let z = LatentTensor::zeros(1, 1, 4, 4, 4);
        assert!(pose_guider(&[random_map(0, 36, 36, 52)], &w, &z).is_err());
        assert!(pose_guider(&[random_map(0, 32, 32, 51)], &w, &z).is_err());
        assert!(pose_guider(&[], &w, &z).is_err());
    }

    #[test]
    fn mlo_tokens_are_local() {
        let w = ToyWeights::new(7);
        let map = random_map(8, 64, 64, 52);
        let base = mlo_embedding_map(&map, &w).unwrap();
        assert_eq!((base.rows(), base.cols()), (16, 32));
        // swap two pixels inside cell (row 1, col 2)
        let mut swapped = map.clone();
        let (a, b) = (swapped.index(17, 33, 0), swapped.index(30, 44, 0));
        for ch in 0..52 {
            swapped.data.swap(a + ch, b + ch);
        }
        let changed = mlo_embedding_map(&swapped, &w).unwrap();
        for r in 0..16 {
            let same = base.row(r) == changed.row(r);
            assert_eq!(same, r != 4 + 2, "token {r}");
        }
    }

    #[test]
    fn single_key_returns_value_row() {
        let attn = AttentionWeights::random(3, 5, 6, 4, 0.5);
        let z = TokenMatrix(DMatrix::from_fn(3, 5, |r, c| (r * 5 + c) as f64 * 0.1));
        let e = TokenMatrix(DMatrix::from_fn(1, 6, |_, c| c as f64 - 2.0));
        let out = cross_attention(&z, &e, &attn).unwrap();
        let v = &e.0 * &attn.w_v;
        for r in 0..3 {
            for c in 0..4 {
                assert!((out.0[(r, c)] - v[(0, c)]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn identical_keys_average_values() {
        let attn = AttentionWeights::random(4, 3, 3, 3, 0.5);
        let mut e = DMatrix::from_fn(5, 3, |r, c| (r as f64 + 1.0) * (c as f64 - 1.0));
        // identical keys need identical K rows; zero W^K gives that for any e
        let attn = AttentionWeights { w_k: DMatrix::zeros(3, 3), ..attn };
        e[(0, 0)] = 4.0;
        let e = TokenMatrix(e);
        let z = TokenMatrix(DMatrix::from_fn(2, 3, |r, c| (r + c) as f64));
        let out = cross_attention(&z, &e, &attn).unwrap();
        let v = &e.0 * &attn.w_v;
        for c in 0..3 {
            let mean = v.column(c).mean();
            assert!((out.0[(0, c)] - mean).abs() < 1e-14 && (out.0[(1, c)] - mean).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_upstream_zero_gradient() {
        let attn = AttentionWeights::random(1, 4, 4, 4, 0.5);
        let z = TokenMatrix(DMatrix::from_fn(3, 4, |r, c| (r * c) as f64 * 0.3));
        let e = TokenMatrix(DMatrix::from_fn(5, 4, |r, c| (r + 2 * c) as f64 * 0.1));
        let g = cross_attention_grad(&z, &e, &attn, &TokenMatrix::zeros(3, 4)).unwrap();
        assert!(g.is_zero());
    }

    #[test]
    fn width_concat_and_identity_reducer() {
        let f0 = random_latent(10, [1, 4, 2, 16, 8]);
        let refs = RefFeatures { maps: (0..7).map(|i| random_latent(20 + i, [1, 1, 2, 16, 8])).collect() };
        assert_eq!(width_concat(&f0, &refs).unwrap().w, 128);
        let mut w = ToyWeights::new(1);
        w.reducer7 = RefReducer::identity(7, 8);
        w.reducer8 = RefReducer::identity(8, 8);
        assert_eq!(reference_concat(&f0, &refs, &w).unwrap(), f0);
        let refs8 = RefFeatures { maps: (0..8).map(|i| random_latent(40 + i, [1, 1, 2, 16, 8])).collect() };
        assert_eq!(reference_concat(&f0, &refs8, &w).unwrap(), f0);
        let refs6 = RefFeatures { maps: refs8.maps[..6].to_vec() };
        assert!(reference_concat(&f0, &refs6, &w).is_err());
    }

    #[test]
    fn reducer_slot_reads_its_block() {
        // a kernel that reads only slot 3 returns the third reference
        let f0 = random_latent(1, [1, 2, 2, 4, 8]);
        let refs = RefFeatures { maps: (0..7).map(|i| random_latent(2 + i, [1, 1, 2, 4, 8])).collect() };
        let mut w = ToyWeights::new(1);
        let mut r = RefReducer::zeros(7, 8);
        for c in 0..8 {
            let i = r.conv.weight_index(c, 0, 3, c);
            r.conv.weight[i] = 1.0;
        }
        w.reducer7 = r;
        let out = reference_concat(&f0, &refs, &w).unwrap();
        for t in 0..2 {
            assert_eq!(out.frame(0, t), refs.maps[2].frame(0, 0));
        }
    }

    #[test]
    fn point_token_is_permutation_invariant() {
        let w = ToyWeights::new(3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut pts: Vec<[f64; 3]> = (0..GEOMETRY_POINT_COUNT).map(|_| std::array::from_fn(|_| rng.random_range(-0.1..0.1))).collect();
        let frame = random_map(5, 32, 32, 3);
        let a = geometry_embedding_maps(&[frame.clone()], &pts, &w).unwrap();
        pts.reverse();
        pts.swap(3, 1000);
        let b = geometry_embedding_maps(&[frame], &pts, &w).unwrap();
        assert_eq!(a.rows(), 5);
        assert_eq!(a, b);
        assert!(geometry_embedding_maps(&[], &pts[..100], &w).is_err());
    }
}
