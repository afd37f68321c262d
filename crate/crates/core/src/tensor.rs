//! Dense complex rank-3 tensor with row-major `(k, p, n)` layout (last axis fastest).

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CTensor3 {
    dims: [usize; 3],
    data: Vec<Complex64>,
}

impl CTensor3 {
    pub fn zeros(dims: [usize; 3]) -> Self {
        Self {
            dims,
            data: vec![Complex64::new(0.0, 0.0); dims[0] * dims[1] * dims[2]],
        }
    }

    pub fn from_vec(dims: [usize; 3], data: Vec<Complex64>) -> Result<Self> {
        let len = dims[0] * dims[1] * dims[2];
        if data.len() != len {
            return Err(Error::Shape(format!(
                "{} elements do not fill a {:?} tensor",
                data.len(),
                dims
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for k in 0..dims[0] {
            for p in 0..dims[1] {
                for n in 0..dims[2] {
                    data.push(f(k, p, n));
                }
            }
        }
        Self { dims, data }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    #[inline]
    pub fn offset(&self, k: usize, p: usize, n: usize) -> usize {
        (k * self.dims[1] + p) * self.dims[2] + n
    }

    #[inline]
    pub fn get(&self, k: usize, p: usize, n: usize) -> Complex64 {
        self.data[self.offset(k, p, n)]
    }

    #[inline]
    pub fn set(&mut self, k: usize, p: usize, n: usize, v: Complex64) {
        let i = self.offset(k, p, n);
        self.data[i] = v;
    }

    /// Contiguous slice along the last axis at `(k, p)`.
    #[inline]
    pub fn fiber(&self, k: usize, p: usize) -> &[Complex64] {
        let start = self.offset(k, p, 0);
        &self.data[start..start + self.dims[2]]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    /// Swap the first two axes.
    pub fn transpose01(&self) -> Self {
        let [a, b, c] = self.dims;
        Self::from_fn([b, a, c], |k, p, n| self.get(p, k, n))
    }

    pub fn scale(&mut self, s: Complex64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

impl std::ops::Add for &CTensor3 {
    type Output = CTensor3;

    fn add(self, rhs: &CTensor3) -> CTensor3 {
        assert_eq!(self.dims, rhs.dims, "tensor add with mismatched dims");
        CTensor3 {
            dims: self.dims,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_last_axis_fastest() {
        let t = CTensor3::from_fn([2, 3, 4], |k, p, n| {
            Complex64::new((k * 100 + p * 10 + n) as f64, 0.0)
        });
        assert_eq!(t.as_slice()[1].re, 1.0);
        assert_eq!(t.as_slice()[4].re, 10.0);
        assert_eq!(t.get(1, 2, 3).re, 123.0);
        assert_eq!(t.fiber(1, 1)[2].re, 112.0);
    }

    #[test]
    fn transpose_swaps_leading_axes() {
        let t = CTensor3::from_fn([2, 3, 2], |k, p, n| {
            Complex64::new(k as f64, (p * 2 + n) as f64)
        });
        let tt = t.transpose01();
        assert_eq!(tt.dims(), [3, 2, 2]);
        for k in 0..2 {
            for p in 0..3 {
                for n in 0..2 {
                    assert_eq!(t.get(k, p, n), tt.get(p, k, n));
                }
            }
        }
        assert_eq!(tt.transpose01(), t);
    }

    #[test]
    fn from_vec_checks_length() {
        assert!(CTensor3::from_vec([2, 2, 2], vec![Complex64::new(0.0, 0.0); 7]).is_err());
    }
}
