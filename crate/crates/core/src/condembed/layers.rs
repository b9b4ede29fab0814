use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::Normal;
use rayon::prelude::*;

use super::tensor::{FeatureMap, TokenMatrix};
use crate::{Error, Result};

/// Nonlinearity between layers. `Identity` is the slope-1 leaky-linear
/// verification mode; `Silu` is `x·σ(x)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Silu,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Silu => x / (1.0 + (-x).exp()),
        }
    }
}

/// 2D convolution over channel-last maps. Weights are laid out
/// `[cout][kh][kw][cin]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv2d {
    pub cin: usize,
    pub cout: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: (usize, usize),
    pub pad: (usize, usize),
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv2d {
    pub fn zeros(cin: usize, cout: usize, kernel: (usize, usize), stride: (usize, usize), pad: (usize, usize)) -> Self {
        Conv2d {
            cin,
            cout,
            kh: kernel.0,
            kw: kernel.1,
            stride,
            pad,
            weight: vec![0.0; cout * kernel.0 * kernel.1 * cin],
            bias: vec![0.0; cout],
        }
    }

    pub fn random<R: Rng>(
        rng: &mut R,
        dist: &Normal<f64>,
        cin: usize,
        cout: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        pad: (usize, usize),
    ) -> Self {
        let mut c = Self::zeros(cin, cout, kernel, stride, pad);
        c.weight.iter_mut().for_each(|w| *w = rng.sample(dist));
        c
    }

    pub fn weight_index(&self, co: usize, ky: usize, kx: usize, ci: usize) -> usize {
        ((co * self.kh + ky) * self.kw + kx) * self.cin + ci
    }

    pub fn output_size(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let (ph, pw) = self.pad;
        if h + 2 * ph < self.kh || w + 2 * pw < self.kw {
            return Err(Error::shape(format!("{h}×{w} input is smaller than the {}×{} kernel", self.kh, self.kw)));
        }
        Ok(((h + 2 * ph - self.kh) / self.stride.0 + 1, (w + 2 * pw - self.kw) / self.stride.1 + 1))
    }

    /// Output rows are computed in parallel; each output value is a fixed
    /// serial sum, so results do not depend on scheduling.
    pub fn forward(&self, input: &FeatureMap) -> Result<FeatureMap> {
        if input.c != self.cin {
            return Err(Error::shape(format!("conv expects {} channels, got {}", self.cin, input.c)));
        }
        let (oh, ow) = self.output_size(input.h, input.w)?;
        let mut out = vec![0.0; oh * ow * self.cout];
        out.par_chunks_mut(ow * self.cout).enumerate().for_each(|(oy, row)| {
            for ox in 0..ow {
                let acc = &mut row[ox * self.cout..(ox + 1) * self.cout];
                acc.copy_from_slice(&self.bias);
                for ky in 0..self.kh {
                    let iy = (oy * self.stride.0 + ky) as isize - self.pad.0 as isize;
                    if iy < 0 || iy >= input.h as isize {
                        continue;
                    }
                    for kx in 0..self.kw {
                        let ix = (ox * self.stride.1 + kx) as isize - self.pad.1 as isize;
                        if ix < 0 || ix >= input.w as isize {
                            continue;
                        }
                        let px = input.pixel(iy as usize, ix as usize);
                        for (co, a) in acc.iter_mut().enumerate() {
                            let wi = self.weight_index(co, ky, kx, 0);
                            let w = &self.weight[wi..wi + self.cin];
                            *a += px.iter().zip(w).map(|(x, w)| x * w).sum::<f64>();
                        }
                    }
                }
            }
        });
        Ok(FeatureMap { h: oh, w: ow, c: self.cout, data: out })
    }
}

/// Affine map on token rows: `X·W + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weight: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl Dense {
    pub fn zeros(din: usize, dout: usize) -> Self {
        Dense { weight: DMatrix::zeros(din, dout), bias: DVector::zeros(dout) }
    }

    pub fn random<R: Rng>(rng: &mut R, dist: &Normal<f64>, din: usize, dout: usize) -> Self {
        Dense { weight: DMatrix::from_fn(din, dout, |_, _| rng.sample(dist)), bias: DVector::zeros(dout) }
    }

    pub fn forward(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.weight.nrows() {
            return Err(Error::shape(format!("dense expects {} columns, got {}", self.weight.nrows(), x.ncols())));
        }
        let mut y = x * &self.weight;
        for mut row in y.row_iter_mut() {
            row += self.bias.transpose();
        }
        Ok(y)
    }
}

/// Two dense layers with an activation between them.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub first: Dense,
    pub second: Dense,
}

impl Mlp {
    pub fn forward(&self, x: &DMatrix<f64>, act: Activation) -> Result<DMatrix<f64>> {
        let h = self.first.forward(x)?.map(|v| act.apply(v));
        self.second.forward(&h)
    }

    pub fn forward_tokens(&self, x: &TokenMatrix, act: Activation) -> Result<TokenMatrix> {
        Ok(TokenMatrix(self.forward(&x.0, act)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conv_matches_direct_sum() {
        let mut c = Conv2d::zeros(2, 1, (3, 3), (2, 2), (1, 1));
        for (i, w) in c.weight.iter_mut().enumerate() {
            *w = i as f64;
        }
        c.bias[0] = 0.5;
        let input = FeatureMap::new(4, 4, 2, (0..32).map(|v| v as f64 * 0.1).collect()).unwrap();
        let out = c.forward(&input).unwrap();
        assert_eq!((out.h, out.w, out.c), (2, 2, 1));
        // output (1, 0) reads input rows 1..=3, cols -1..=1
        let mut expect = 0.5;
        for ky in 0..3 {
            for kx in 0..3 {
                let (iy, ix) = (1 + ky as isize, kx as isize - 1);
                if ix < 0 || iy > 3 {
                    continue;
                }
                for ci in 0..2 {
                    expect += input.at(iy as usize, ix as usize, ci) * c.weight[c.weight_index(0, ky, kx, ci)];
                }
            }
        }
        assert!((out.at(1, 0, 0) - expect).abs() < 1e-12);
    }

    #[test]
    fn silu_values() {
        assert_eq!(Activation::Silu.apply(0.0), 0.0);
        assert!((Activation::Silu.apply(1.0) - 0.731_058_578_630_004_9).abs() < 1e-15);
    }
}
