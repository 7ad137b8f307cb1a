//! Pixel grid geometry and real-valued per-pixel maps.

use crate::error::{Error, Result};

/// Detector pixel grid.
///
/// Pixel `(i, j)` has column `i` (x) and row `j` (y) and is stored at
/// `j * width + i`. Its center in the detector plane is
/// `((i + 0.5) * pitch, (j + 0.5) * pitch)`; multiplying by `magnification`
/// gives the corresponding coordinate in the prism (field) plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridGeometry {
    pub width: usize,
    pub height: usize,
    /// Detector pixel pitch in metres.
    pub pixel_pitch: f64,
    /// Scale factor from detector-plane to prism-plane coordinates.
    pub magnification: f64,
}

impl GridGeometry {
    pub fn new(width: usize, height: usize, pixel_pitch: f64, magnification: f64) -> Result<Self> {
        let g = GridGeometry {
            width,
            height,
            pixel_pitch,
            magnification,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::param("width/height", "grid must be at least 1x1"));
        }
        if !(self.pixel_pitch > 0.0 && self.pixel_pitch.is_finite()) {
            return Err(Error::param("pixel_pitch", "must be positive and finite"));
        }
        if !(self.magnification > 0.0 && self.magnification.is_finite()) {
            return Err(Error::param("magnification", "must be positive and finite"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.width + i
    }

    #[inline]
    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index % self.width, index / self.width)
    }

    /// Pixel center in the prism (field) plane, metres.
    #[inline]
    pub fn pixel_center(&self, i: usize, j: usize) -> (f64, f64) {
        let s = self.pixel_pitch * self.magnification;
        ((i as f64 + 0.5) * s, (j as f64 + 0.5) * s)
    }

    /// Center of the whole grid in the field plane.
    pub fn field_center(&self) -> (f64, f64) {
        let s = self.pixel_pitch * self.magnification;
        (self.width as f64 * 0.5 * s, self.height as f64 * 0.5 * s)
    }

    /// Converts a field-plane length to the detector plane.
    pub fn to_detector(&self, field_length: f64) -> f64 {
        field_length / self.magnification
    }

    pub fn same_shape(&self, other: &GridGeometry) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// Real-valued image on a grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RealImage {
    pub grid: GridGeometry,
    pub data: Vec<f64>,
}

impl RealImage {
    pub fn new(grid: GridGeometry, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::GeometryMismatch(format!(
                "{} values for a {}x{} grid",
                data.len(),
                grid.width,
                grid.height
            )));
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::param(
                "image",
                format!("non-finite value at pixel {bad}"),
            ));
        }
        Ok(RealImage { grid, data })
    }

    pub fn zeros(grid: GridGeometry) -> Self {
        RealImage {
            data: vec![0.0; grid.len()],
            grid,
        }
    }

    pub fn width(&self) -> usize {
        self.grid.width
    }

    pub fn height(&self) -> usize {
        self.grid.height
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.grid.index(i, j)]
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.data.len() as f64
    }

    pub fn transpose(&self) -> RealImage {
        let g = GridGeometry {
            width: self.grid.height,
            height: self.grid.width,
            ..self.grid
        };
        let mut data = vec![0.0; g.len()];
        for j in 0..self.grid.height {
            for i in 0..self.grid.width {
                data[g.index(j, i)] = self.get(i, j);
            }
        }
        RealImage { grid: g, data }
    }
}
