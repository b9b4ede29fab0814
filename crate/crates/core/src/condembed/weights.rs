use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

use super::layers::{Activation, Conv2d, Dense, Mlp};
use super::tensor::{FeatureMap, LatentTensor};
use crate::{Error, Result};

/// Standard deviation of every initialized weight; biases start at zero.
pub const INIT_SCALE: f64 = 0.02;

#[derive(Clone, Debug, PartialEq)]
pub struct ToyConfig {
    pub latent_channels: usize,
    /// output channels of the first three guider convolutions
    pub guider_plan: [usize; 3],
    pub mlo_channels: usize,
    pub skeleton_channels: usize,
    pub geometry_channels: usize,
    pub hidden: usize,
    /// width of condition tokens and of latent query tokens
    pub embed_dim: usize,
    /// attention projection width `d`
    pub attn_dim: usize,
    pub ref_channels: usize,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            latent_channels: 4,
            guider_plan: [16, 32, 64],
            mlo_channels: 13 * 3 + 13,
            skeleton_channels: 3,
            geometry_channels: 3,
            hidden: 32,
            embed_dim: 32,
            attn_dim: 32,
            ref_channels: 8,
        }
    }
}

/// Four 3×3 convolutions with strides 2, 2, 2, 1 and padding 1, giving an
/// 8× spatial reduction. There is no activation after the last layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Guider {
    pub convs: Vec<Conv2d>,
}

const GUIDER_STRIDES: [usize; 4] = [2, 2, 2, 1];

impl Guider {
    fn build(cin: usize, plan: [usize; 3], cout: usize, mut make: impl FnMut(usize, usize, usize) -> Conv2d) -> Self {
        let chans = [cin, plan[0], plan[1], plan[2], cout];
        Guider { convs: (0..4).map(|i| make(chans[i], chans[i + 1], GUIDER_STRIDES[i])).collect() }
    }

    pub fn zeros(cin: usize, plan: [usize; 3], cout: usize) -> Self {
        Self::build(cin, plan, cout, |a, b, s| Conv2d::zeros(a, b, (3, 3), (s, s), (1, 1)))
    }

    pub fn random<R: Rng>(rng: &mut R, dist: &Normal<f64>, cin: usize, plan: [usize; 3], cout: usize) -> Self {
        Self::build(cin, plan, cout, |a, b, s| Conv2d::random(rng, dist, a, b, (3, 3), (s, s), (1, 1)))
    }

    pub fn input_channels(&self) -> usize {
        self.convs[0].cin
    }

    pub fn forward(&self, input: &FeatureMap, act: Activation) -> Result<FeatureMap> {
        let mut x = self.convs[0].forward(input)?;
        for conv in &self.convs[1..] {
            x.data.iter_mut().for_each(|v| *v = act.apply(*v));
            x = conv.forward(&x)?;
        }
        Ok(x)
    }
}

/// Width reduction for `K` reference maps: a `1 × (1+K)` kernel with
/// horizontal stride `1+K`, applied to the interleaved view of the
/// width-concatenated features in which column `j` of every block
/// `[f0, f_1, ..., f_K]` is adjacent. Kernel column `s` reads block `s`.
#[derive(Clone, Debug, PartialEq)]
pub struct RefReducer {
    pub k: usize,
    pub conv: Conv2d,
}

impl RefReducer {
    fn shape(k: usize) -> ((usize, usize), (usize, usize)) {
        ((1, 1 + k), (1, 1 + k))
    }

    pub fn random<R: Rng>(rng: &mut R, dist: &Normal<f64>, k: usize, channels: usize) -> Self {
        let (kernel, stride) = Self::shape(k);
        RefReducer { k, conv: Conv2d::random(rng, dist, channels, channels, kernel, stride, (0, 0)) }
    }

    pub fn zeros(k: usize, channels: usize) -> Self {
        let (kernel, stride) = Self::shape(k);
        RefReducer { k, conv: Conv2d::zeros(channels, channels, kernel, stride, (0, 0)) }
    }

    /// Kernel that copies the `f0` slot and ignores every reference.
    pub fn identity(k: usize, channels: usize) -> Self {
        let mut r = Self::zeros(k, channels);
        for c in 0..channels {
            let i = r.conv.weight_index(c, 0, 0, c);
            r.conv.weight[i] = 1.0;
        }
        r
    }
}

/// Projections `W^Q (d_z × d)`, `W^K`, `W^V (d_e × d)` and their biases.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionWeights {
    pub w_q: DMatrix<f64>,
    pub w_k: DMatrix<f64>,
    pub w_v: DMatrix<f64>,
    pub b_q: DVector<f64>,
    pub b_k: DVector<f64>,
    pub b_v: DVector<f64>,
}

impl AttentionWeights {
    pub fn zeros(dz: usize, de: usize, d: usize) -> Self {
        AttentionWeights {
            w_q: DMatrix::zeros(dz, d),
            w_k: DMatrix::zeros(de, d),
            w_v: DMatrix::zeros(de, d),
            b_q: DVector::zeros(d),
            b_k: DVector::zeros(d),
            b_v: DVector::zeros(d),
        }
    }

    fn sample<R: Rng>(rng: &mut R, dist: &Normal<f64>, dz: usize, de: usize, d: usize) -> Self {
        AttentionWeights {
            w_q: DMatrix::from_fn(dz, d, |_, _| rng.sample(dist)),
            w_k: DMatrix::from_fn(de, d, |_, _| rng.sample(dist)),
            w_v: DMatrix::from_fn(de, d, |_, _| rng.sample(dist)),
            b_q: DVector::zeros(d),
            b_k: DVector::zeros(d),
            b_v: DVector::zeros(d),
        }
    }

    /// Independent seeded projections with the given standard deviation.
    pub fn random(seed: u64, dz: usize, de: usize, d: usize, scale: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::sample(&mut rng, &Normal::new(0.0, scale).expect("positive scale"), dz, de, d)
    }

    pub fn dim(&self) -> usize {
        self.w_q.ncols()
    }
}

/// A set of `K ∈ {7, 8}` single-frame reference maps, each `(b, 1, h, w, c)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RefFeatures {
    pub maps: Vec<LatentTensor>,
}

impl RefFeatures {
    pub fn validate_against(&self, f0: &LatentTensor) -> Result<()> {
        let k = self.maps.len();
        if k != 7 && k != 8 {
            return Err(Error::invalid("reference features", format!("K = {k}, expected 7 or 8")));
        }
        for (i, m) in self.maps.iter().enumerate() {
            if m.t != 1 || (m.b, m.h, m.w, m.c) != (f0.b, f0.h, f0.w, f0.c) {
                return Err(Error::shape(format!(
                    "reference {i} has shape {:?}, expected ({}, 1, {}, {}, {})",
                    m.shape(),
                    f0.b,
                    f0.h,
                    f0.w,
                    f0.c
                )));
            }
        }
        Ok(())
    }
}

/// All toy-scale parameters, drawn in a fixed order from one seed.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyWeights {
    pub config: ToyConfig,
    pub activation: Activation,
    pub guider: Guider,
    pub skeleton_guider: Guider,
    pub mlo_conv: Conv2d,
    pub mlo_mlp: Mlp,
    pub geo_conv: Conv2d,
    pub geo_mlp: Mlp,
    pub point_mlp: Mlp,
    pub point_head: Mlp,
    pub reducer7: RefReducer,
    pub reducer8: RefReducer,
    pub attn: AttentionWeights,
}

impl ToyWeights {
    pub fn new(seed: u64) -> Self {
        Self::with_config(seed, ToyConfig::default())
    }

    pub fn with_config(seed: u64, config: ToyConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = Normal::new(0.0, INIT_SCALE).expect("positive scale");
        let c = &config;
        let stride = (super::ops::TOKEN_STRIDE, super::ops::TOKEN_STRIDE);
        let kernel = stride;
        let mlp = |rng: &mut ChaCha8Rng, a: usize, b: usize, o: usize| Mlp {
            first: Dense::random(rng, &n, a, b),
            second: Dense::random(rng, &n, b, o),
        };
        let guider = Guider::random(&mut rng, &n, c.mlo_channels, c.guider_plan, c.latent_channels);
        let skeleton_guider = Guider::random(&mut rng, &n, c.skeleton_channels, c.guider_plan, c.latent_channels);
        let mlo_conv = Conv2d::random(&mut rng, &n, c.mlo_channels, c.hidden, kernel, stride, (0, 0));
        let mlo_mlp = mlp(&mut rng, c.hidden, c.hidden, c.embed_dim);
        let geo_conv = Conv2d::random(&mut rng, &n, c.geometry_channels, c.hidden, kernel, stride, (0, 0));
        let geo_mlp = mlp(&mut rng, c.hidden, c.hidden, c.embed_dim);
        let point_mlp = mlp(&mut rng, 3, c.hidden, c.hidden);
        let point_head = mlp(&mut rng, c.hidden, c.hidden, c.embed_dim);
        let reducer7 = RefReducer::random(&mut rng, &n, 7, c.ref_channels);
        let reducer8 = RefReducer::random(&mut rng, &n, 8, c.ref_channels);
        let attn = AttentionWeights::sample(&mut rng, &n, c.embed_dim, c.embed_dim, c.attn_dim);
        ToyWeights {
            activation: Activation::Silu,
            guider,
            skeleton_guider,
            mlo_conv,
            mlo_mlp,
            geo_conv,
            geo_mlp,
            point_mlp,
            point_head,
            reducer7,
            reducer8,
            attn,
            config,
        }
    }

    /// Every weight and bias zero.
    pub fn zeros(config: ToyConfig) -> Self {
        let c = &config;
        let stride = (super::ops::TOKEN_STRIDE, super::ops::TOKEN_STRIDE);
        let mlp = |a: usize, b: usize, o: usize| Mlp { first: Dense::zeros(a, b), second: Dense::zeros(b, o) };
        ToyWeights {
            activation: Activation::Silu,
            guider: Guider::zeros(c.mlo_channels, c.guider_plan, c.latent_channels),
            skeleton_guider: Guider::zeros(c.skeleton_channels, c.guider_plan, c.latent_channels),
            mlo_conv: Conv2d::zeros(c.mlo_channels, c.hidden, stride, stride, (0, 0)),
            mlo_mlp: mlp(c.hidden, c.hidden, c.embed_dim),
            geo_conv: Conv2d::zeros(c.geometry_channels, c.hidden, stride, stride, (0, 0)),
            geo_mlp: mlp(c.hidden, c.hidden, c.embed_dim),
            point_mlp: mlp(3, c.hidden, c.hidden),
            point_head: mlp(c.hidden, c.hidden, c.embed_dim),
            reducer7: RefReducer::zeros(7, c.ref_channels),
            reducer8: RefReducer::zeros(8, c.ref_channels),
            attn: AttentionWeights::zeros(c.embed_dim, c.embed_dim, c.attn_dim),
            config,
        }
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    pub fn reducer(&self, k: usize) -> Result<&RefReducer> {
        match k {
            7 => Ok(&self.reducer7),
            8 => Ok(&self.reducer8),
            _ => Err(Error::invalid("reference features", format!("K = {k}, expected 7 or 8"))),
        }
    }

    pub fn all_finite(&self) -> bool {
        let convs = self.guider.convs.iter().chain(&self.skeleton_guider.convs).chain([
            &self.mlo_conv,
            &self.geo_conv,
            &self.reducer7.conv,
            &self.reducer8.conv,
        ]);
        let conv_ok = convs.into_iter().all(|c| c.weight.iter().chain(&c.bias).all(|v| v.is_finite()));
        let mlps = [&self.mlo_mlp, &self.geo_mlp, &self.point_mlp, &self.point_head];
        let mlp_ok = mlps.iter().all(|m| {
            [&m.first, &m.second].iter().all(|d| d.weight.iter().chain(d.bias.iter()).all(|v| v.is_finite()))
        });
        let a = &self.attn;
        let attn_ok = [&a.w_q, &a.w_k, &a.w_v].iter().all(|m| m.iter().all(|v| v.is_finite()));
        conv_ok && mlp_ok && attn_ok
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_weights_are_reproducible() {
        let a = ToyWeights::new(5);
        assert_eq!(a, ToyWeights::new(5));
        assert_ne!(a.attn.w_q, ToyWeights::new(6).attn.w_q);
        assert!(a.all_finite());
        assert!(a.guider.convs.iter().all(|c| c.bias.iter().all(|&b| b == 0.0)));
    }

    #[test]
    fn guider_channel_plan() {
        let w = ToyWeights::new(0);
        let plan: Vec<_> = w.guider.convs.iter().map(|c| (c.cin, c.cout, c.stride.0)).collect();
        assert_eq!(plan, vec![(52, 16, 2), (16, 32, 2), (32, 64, 2), (64, 4, 1)]);
    }
}
