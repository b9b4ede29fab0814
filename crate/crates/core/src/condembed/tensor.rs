use nalgebra::DMatrix;

use crate::{Error, Result};

/// Single image-like map, `h × w × c`, channel-last.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    pub h: usize,
    pub w: usize,
    pub c: usize,
    pub data: Vec<f64>,
}

impl FeatureMap {
    pub fn zeros(h: usize, w: usize, c: usize) -> Self {
        FeatureMap { h, w, c, data: vec![0.0; h * w * c] }
    }

    pub fn new(h: usize, w: usize, c: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != h * w * c {
            return Err(Error::shape(format!("feature map {h}×{w}×{c} given {} values", data.len())));
        }
        Ok(FeatureMap { h, w, c, data })
    }

    pub fn index(&self, y: usize, x: usize, ch: usize) -> usize {
        (y * self.w + x) * self.c + ch
    }

    pub fn at(&self, y: usize, x: usize, ch: usize) -> f64 {
        self.data[self.index(y, x, ch)]
    }

    pub fn pixel(&self, y: usize, x: usize) -> &[f64] {
        let i = self.index(y, x, 0);
        &self.data[i..i + self.c]
    }

    pub fn scaled(&self, a: f64) -> FeatureMap {
        FeatureMap { data: self.data.iter().map(|v| v * a).collect(), ..self.clone() }
    }

    /// Spatial positions as token rows.
    pub fn to_tokens(&self) -> TokenMatrix {
        TokenMatrix(DMatrix::from_row_slice(self.h * self.w, self.c, &self.data))
    }
}

/// Latent or feature tensor indexed `(b, t, h, w, c)`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentTensor {
    pub b: usize,
    pub t: usize,
    pub h: usize,
    pub w: usize,
    pub c: usize,
    pub data: Vec<f64>,
}

impl LatentTensor {
    pub fn zeros(b: usize, t: usize, h: usize, w: usize, c: usize) -> Self {
        LatentTensor { b, t, h, w, c, data: vec![0.0; b * t * h * w * c] }
    }

    pub fn new(b: usize, t: usize, h: usize, w: usize, c: usize, data: Vec<f64>) -> Result<Self> {
        if [b, t, h, w, c].contains(&0) {
            return Err(Error::shape("latent dimensions must be at least 1"));
        }
        if data.len() != b * t * h * w * c {
            return Err(Error::shape(format!("latent {b}×{t}×{h}×{w}×{c} given {} values", data.len())));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("latent", "non-finite value"));
        }
        Ok(LatentTensor { b, t, h, w, c, data })
    }

    pub fn shape(&self) -> [usize; 5] {
        [self.b, self.t, self.h, self.w, self.c]
    }

    pub fn frame_len(&self) -> usize {
        self.h * self.w * self.c
    }

    pub fn frame(&self, b: usize, t: usize) -> FeatureMap {
        let n = self.frame_len();
        let start = (b * self.t + t) * n;
        FeatureMap { h: self.h, w: self.w, c: self.c, data: self.data[start..start + n].to_vec() }
    }

    pub fn set_frame(&mut self, b: usize, t: usize, map: &FeatureMap) {
        let n = self.frame_len();
        let start = (b * self.t + t) * n;
        self.data[start..start + n].copy_from_slice(&map.data);
    }

    pub fn max_abs_diff(&self, other: &LatentTensor) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Token rows by embedding columns.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenMatrix(pub DMatrix<f64>);

impl TokenMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        TokenMatrix(DMatrix::zeros(rows, cols))
    }

    pub fn from_row_slice(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(format!("token matrix {rows}×{cols} given {} values", data.len())));
        }
        Ok(TokenMatrix(DMatrix::from_row_slice(rows, cols, data)))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn row(&self, r: usize) -> Vec<f64> {
        self.0.row(r).iter().copied().collect()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }
}
