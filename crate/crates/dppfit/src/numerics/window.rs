//! Rectangular observation windows and small point helpers.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Planar point. Kept as a bare array so hot loops stay allocation-free.
pub type Point = [f64; 2];

#[inline]
pub fn dist(a: Point, b: Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    (dx * dx + dy * dy).sqrt()
}

#[derive(Debug, Error, PartialEq)]
pub enum WindowError {
    #[error("window must satisfy x1 > x0 and y1 > y0, got [{x0}, {x1}] x [{y0}, {y1}]")]
    Degenerate { x0: f64, x1: f64, y0: f64, y1: f64 },
}

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]` with positive area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Window {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Window, WindowError> {
        if !(x1 > x0 && y1 > y0) || !(x0.is_finite() && y0.is_finite() && x1.is_finite() && y1.is_finite()) {
            return Err(WindowError::Degenerate { x0, x1, y0, y1 });
        }
        Ok(Window { x0, y0, x1, y1 })
    }

    /// The unit square `[0,1]^2`.
    pub fn unit() -> Window {
        Window { x0: 0.0, y0: 0.0, x1: 1.0, y1: 1.0 }
    }

    #[inline]
    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    #[inline]
    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    #[inline]
    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    #[inline]
    pub fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }

    #[inline]
    pub fn contains(&self, p: Point) -> bool {
        p[0] >= self.x0 && p[0] <= self.x1 && p[1] >= self.y0 && p[1] <= self.y1
    }

    pub fn corners(&self) -> [Point; 4] {
        [
            [self.x0, self.y0],
            [self.x1, self.y0],
            [self.x0, self.y1],
            [self.x1, self.y1],
        ]
    }

    /// Grow the rectangle by `margin` on every side.
    pub fn enlarged(&self, margin: f64) -> Window {
        Window {
            x0: self.x0 - margin,
            y0: self.y0 - margin,
            x1: self.x1 + margin,
            y1: self.y1 + margin,
        }
    }
}
