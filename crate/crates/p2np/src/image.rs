//! Flat complex images with an attached grid shape.

use num_complex::Complex64;

/// A complex image stored row-major with `ix` fastest: `data[iy * nx + ix]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexImage {
    pub nx: usize,
    pub ny: usize,
    pub data: Vec<Complex64>,
}

impl ComplexImage {
    pub fn zeros(nx: usize, ny: usize) -> Self {
        Self { nx, ny, data: vec![Complex64::ZERO; nx * ny] }
    }

    /// Wraps a flat vector; `data.len()` must equal `nx * ny`.
    pub fn from_vec(nx: usize, ny: usize, data: Vec<Complex64>) -> Self {
        assert_eq!(data.len(), nx * ny, "image buffer does not match {nx}x{ny} grid");
        Self { nx, ny, data }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn at(&self, ix: usize, iy: usize) -> Complex64 {
        self.data[iy * self.nx + ix]
    }

    pub fn norm(&self) -> f64 {
        crate::operator::vec_norm(&self.data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Elementwise `self - other`; shapes must match.
    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.shape(), other.shape(), "image shape mismatch");
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Self { nx: self.nx, ny: self.ny, data }
    }

    pub fn dist(&self, other: &Self) -> f64 {
        assert_eq!(self.shape(), other.shape(), "image shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        let data = self.data.iter().map(|z| z * factor).collect();
        Self { nx: self.nx, ny: self.ny, data }
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.norm()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sub_and_dist_agree() {
        let a = ComplexImage::from_vec(2, 1, vec![Complex64::new(3.0, 0.0), Complex64::new(0.0, 4.0)]);
        let b = ComplexImage::zeros(2, 1);
        assert_eq!(a.sub(&b).data, a.data);
        assert!((a.dist(&b) - 5.0).abs() < 1e-15);
    }

    #[test]
    #[should_panic]
    fn from_vec_rejects_wrong_length() {
        let _ = ComplexImage::from_vec(2, 2, vec![Complex64::ZERO; 3]);
    }
}
