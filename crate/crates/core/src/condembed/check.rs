//! Self-check of the embedding operators against independent oracles.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layers::Activation;
use super::ops::{
    attention_probabilities, cross_attention, cross_attention_grad, geometry_embedding_maps, mlo_embedding_map,
    pose_guider, reference_concat, skeleton_guider, width_concat, GEOMETRY_POINT_COUNT,
};
use super::tensor::{FeatureMap, LatentTensor, TokenMatrix};
use super::weights::{AttentionWeights, RefFeatures, RefReducer, ToyConfig, ToyWeights};

/// Dense attention written with plain loops over row vectors, sharing no
/// code with [`cross_attention`].
pub fn dense_attention_oracle(z: &[Vec<f64>], e: &[Vec<f64>], attn: &AttentionWeights) -> Vec<Vec<f64>> {
    let d = attn.w_q.ncols();
    let proj = |x: &[f64], w: &DMatrix<f64>, b: &DVector<f64>| -> Vec<f64> {
        (0..w.ncols()).map(|j| b[j] + (0..x.len()).map(|i| x[i] * w[(i, j)]).sum::<f64>()).collect()
    };
    let keys: Vec<Vec<f64>> = e.iter().map(|r| proj(r, &attn.w_k, &attn.b_k)).collect();
    let values: Vec<Vec<f64>> = e.iter().map(|r| proj(r, &attn.w_v, &attn.b_v)).collect();
    z.iter()
        .map(|row| {
            let q = proj(row, &attn.w_q, &attn.b_q);
            let logits: Vec<f64> =
                keys.iter().map(|k| q.iter().zip(k).map(|(a, b)| a * b).sum::<f64>() / (d as f64).sqrt()).collect();
            let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let ex: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
            let total: f64 = ex.iter().sum();
            (0..values[0].len()).map(|c| ex.iter().zip(&values).map(|(p, v)| p / total * v[c]).sum()).collect()
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckRow {
    pub name: &'static str,
    pub measured: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbedCheckReport {
    pub seed: u64,
    pub rows: Vec<CheckRow>,
}

impl EmbedCheckReport {
    pub fn all_passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("embed-check seed {}\n", self.seed);
        s += &format!("{:<38} {:>12} {:>12}  {}\n", "check", "measured", "tolerance", "status");
        for r in &self.rows {
            s += &format!(
                "{:<38} {:>12.3e} {:>12.1e}  {}\n",
                r.name,
                r.measured,
                r.tolerance,
                if r.pass { "PASS" } else { "FAIL" }
            );
        }
        let failed = self.rows.iter().filter(|r| !r.pass).count();
        s += &if failed == 0 { "all checks passed\n".to_string() } else { format!("{failed} checks failed\n") };
        s
    }
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

fn random_map(rng: &mut ChaCha8Rng, h: usize, w: usize, c: usize) -> FeatureMap {
    FeatureMap { h, w, c, data: (0..h * w * c).map(|_| rng.random_range(-1.0..1.0)).collect() }
}

fn random_latent(rng: &mut ChaCha8Rng, shape: [usize; 5]) -> LatentTensor {
    let [b, t, h, w, c] = shape;
    LatentTensor { b, t, h, w, c, data: (0..b * t * h * w * c).map(|_| rng.random_range(-1.0..1.0)).collect() }
}

fn with_biases(mut a: AttentionWeights, rng: &mut ChaCha8Rng) -> AttentionWeights {
    let d = a.dim();
    a.b_q = DVector::from_fn(d, |_, _| rng.random_range(-0.5..0.5));
    a.b_k = DVector::from_fn(d, |_, _| rng.random_range(-0.5..0.5));
    a.b_v = DVector::from_fn(d, |_, _| rng.random_range(-0.5..0.5));
    a
}

fn max_abs(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Finite-difference check of the attention gradient; returns the relative
/// error `‖g_fd − g‖ / ‖g‖`.
fn gradient_relative_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let attn = with_biases(AttentionWeights::random(seed.wrapping_add(1000), 8, 6, 5, 0.6), &mut rng);
    let z = TokenMatrix(random_matrix(&mut rng, 4, 8));
    let e = TokenMatrix(random_matrix(&mut rng, 6, 6));
    let up = TokenMatrix(random_matrix(&mut rng, 4, 5));
    let analytic = cross_attention_grad(&z, &e, &attn, &up).expect("consistent shapes");
    let loss = |zz: &TokenMatrix| cross_attention(zz, &e, &attn).expect("consistent shapes").0.component_mul(&up.0).sum();
    let h = 1e-5;
    let mut fd = DMatrix::zeros(z.rows(), z.cols());
    for r in 0..z.rows() {
        for c in 0..z.cols() {
            let mut plus = z.clone();
            plus.0[(r, c)] += h;
            let mut minus = z.clone();
            minus.0[(r, c)] -= h;
            fd[(r, c)] = (loss(&plus) - loss(&minus)) / (2.0 * h);
        }
    }
    (fd - &analytic.0).norm() / analytic.0.norm()
}

pub const GRADIENT_SEEDS: u64 = 20;

/// Runs every embedding invariant for one seed. The heavy guider and token
/// checks run once at the full 512×512 resolution.
pub fn run_embed_check(seed: u64) -> EmbedCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut push = |name, measured: f64, tolerance: f64| {
        rows.push(CheckRow { name, measured, tolerance, pass: measured <= tolerance });
    };

    // attention oracle, row sums, shift invariance
    let attn = with_biases(AttentionWeights::random(seed, 32, 32, 32, 0.3), &mut rng);
    let z = TokenMatrix(random_matrix(&mut rng, 4, 32));
    let e = TokenMatrix(random_matrix(&mut rng, 6, 32));
    let out = cross_attention(&z, &e, &attn).expect("consistent shapes");
    let rows_of = |m: &DMatrix<f64>| (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect::<Vec<Vec<f64>>>();
    let oracle = dense_attention_oracle(&rows_of(&z.0), &rows_of(&e.0), &attn);
    let oracle = DMatrix::from_fn(4, 32, |r, c| oracle[r][c]);
    push("attention_oracle_max_abs", max_abs(&out.0, &oracle), 1e-12);
    let p = attention_probabilities(&z, &e, &attn).expect("consistent shapes");
    let row_err = (0..p.nrows()).map(|r| (p.row(r).sum() - 1.0).abs()).fold(0.0, f64::max);
    push("attention_row_sum_error", row_err, 1e-12);
    let mut shifted = attn.clone();
    shifted.b_k += DVector::from_fn(32, |_, _| rng.random_range(-2.0..2.0));
    let out_shifted = cross_attention(&z, &e, &shifted).expect("consistent shapes");
    push("softmax_shift_invariance", max_abs(&out.0, &out_shifted.0), 1e-12);
    let one_key = TokenMatrix(random_matrix(&mut rng, 1, 32));
    let single = cross_attention(&z, &one_key, &attn).expect("consistent shapes");
    let v = &one_key.0 * &attn.w_v + attn.b_v.transpose();
    let single_err = (0..4).map(|r| (single.0.row(r) - v.row(0)).abs().max()).fold(0.0, f64::max);
    push("single_key_returns_value", single_err, 1e-14);

    // gradient
    let grad_err = (0..GRADIENT_SEEDS).map(|s| gradient_relative_error(seed.wrapping_mul(31).wrapping_add(s))).fold(0.0, f64::max);
    push("attention_grad_fd_rel_error", grad_err, 1e-6);
    let z1 = TokenMatrix(random_matrix(&mut rng, 1, 32));
    let g1 = cross_attention_grad(&z1, &one_key, &attn, &TokenMatrix(random_matrix(&mut rng, 1, 32))).expect("consistent shapes");
    push("single_pair_grad_is_zero", g1.0.abs().max(), 0.0);

    // guiders: zero weights at full resolution, 8× reduction, linearity
    let config = ToyConfig::default();
    let zero = ToyWeights::zeros(config.clone());
    let z512 = random_latent(&mut rng, [1, 1, 64, 64, config.latent_channels]);
    let mlo512 = random_map(&mut rng, 512, 512, config.mlo_channels);
    let skel512 = random_map(&mut rng, 512, 512, config.skeleton_channels);
    let zp = pose_guider(std::slice::from_ref(&mlo512), &zero, &z512);
    push("pose_guider_zero_weight_identity", zp.as_ref().map_or(f64::INFINITY, |r| r.max_abs_diff(&z512)), 0.0);
    let zs = skeleton_guider(std::slice::from_ref(&skel512), &zero, &z512);
    push("skeleton_guider_zero_weight_identity", zs.as_ref().map_or(f64::INFINITY, |r| r.max_abs_diff(&z512)), 0.0);
    let weights = ToyWeights::new(seed);
    let g_shape = weights.skeleton_guider.forward(&skel512, weights.activation).map_or((0, 0), |g| (g.h, g.w));
    push("guider_512_to_64_mismatch", ((g_shape.0 as f64) - 64.0).abs() + ((g_shape.1 as f64) - 64.0).abs(), 0.0);

    let linear = ToyWeights::new(seed).with_activation(Activation::Identity);
    let zl = LatentTensor::zeros(1, 1, 8, 8, config.latent_channels);
    let hl = random_map(&mut rng, 64, 64, config.mlo_channels);
    let a = 2.5;
    let g = pose_guider(std::slice::from_ref(&hl), &linear, &zl).expect("consistent shapes");
    let ga = pose_guider(&[hl.scaled(a)], &linear, &zl).expect("consistent shapes");
    let lin_err = g.data.iter().zip(&ga.data).map(|(x, y)| (a * x - y).abs() / (1.0 + y.abs())).fold(0.0, f64::max);
    push("guider_linearity_rel_error", lin_err, 1e-12);

    let zr = random_latent(&mut rng, [1, 1, 8, 8, config.latent_channels]);
    let sl = random_map(&mut rng, 64, 64, config.skeleton_channels);
    let seq = skeleton_guider(std::slice::from_ref(&sl), &weights, &pose_guider(std::slice::from_ref(&hl), &weights, &zr).expect("shapes"))
        .expect("consistent shapes");
    let zt = LatentTensor::zeros(1, 1, 8, 8, config.latent_channels);
    let gh = pose_guider(std::slice::from_ref(&hl), &weights, &zt).expect("consistent shapes");
    let gs = skeleton_guider(std::slice::from_ref(&sl), &weights, &zt).expect("consistent shapes");
    let add_err = (0..zr.data.len()).map(|i| (seq.data[i] - (zr.data[i] + gh.data[i] + gs.data[i])).abs()).fold(0.0, f64::max);
    push("guider_residual_additivity", add_err, 0.0);

    // token embeddings
    let tokens = mlo_embedding_map(&mlo512, &weights).map_or(0, |t| t.rows());
    push("mlo_tokens_512_mismatch", (tokens as f64 - 1024.0).abs(), 0.0);
    let mut points: Vec<[f64; 3]> =
        (0..GEOMETRY_POINT_COUNT).map(|_| std::array::from_fn(|_| rng.random_range(-0.1..0.1))).collect();
    let normals = random_map(&mut rng, 512, 512, config.geometry_channels);
    let geo = geometry_embedding_maps(std::slice::from_ref(&normals), &points, &weights).expect("consistent shapes");
    push("geometry_tokens_512_mismatch", (geo.rows() as f64 - 1025.0).abs(), 0.0);
    for i in (1..points.len()).rev() {
        let j = rng.random_range(0..=i);
        points.swap(i, j);
    }
    let small = FeatureMap::zeros(16, 16, config.geometry_channels);
    let p1 = geometry_embedding_maps(std::slice::from_ref(&small), &points, &weights).expect("consistent shapes");
    let last = geo.rows() - 1;
    let perm_err = (0..geo.cols()).map(|c| (geo.0[(last, c)] - p1.0[(1, c)]).abs()).fold(0.0, f64::max);
    push("point_token_permutation_diff", perm_err, 0.0);

    // reference concatenation
    let c = config.ref_channels;
    let f0 = random_latent(&mut rng, [1, 4, 4, 16, c]);
    let refs7 = RefFeatures { maps: (0..7).map(|_| random_latent(&mut rng, [1, 1, 4, 16, c])).collect() };
    let refs8 = RefFeatures { maps: (0..8).map(|_| random_latent(&mut rng, [1, 1, 4, 16, c])).collect() };
    let wide = width_concat(&f0, &refs7).map_or(0, |t| t.w);
    push("ref_concat_width_128_mismatch", (wide as f64 - 128.0).abs(), 0.0);
    let mut ident = weights.clone();
    ident.reducer7 = RefReducer::identity(7, c);
    ident.reducer8 = RefReducer::identity(8, c);
    let id7 = reference_concat(&f0, &refs7, &ident).map_or(f64::INFINITY, |r| r.max_abs_diff(&f0));
    let id8 = reference_concat(&f0, &refs8, &ident).map_or(f64::INFINITY, |r| r.max_abs_diff(&f0));
    push("ref_concat_identity_k7", id7, 0.0);
    push("ref_concat_identity_k8", id8, 0.0);
    let shaped = reference_concat(&f0, &refs8, &weights).is_ok_and(|r| r.shape() == f0.shape());
    push("ref_concat_shape_mismatch", if shaped { 0.0 } else { 1.0 }, 0.0);

    EmbedCheckReport { seed, rows }
}
