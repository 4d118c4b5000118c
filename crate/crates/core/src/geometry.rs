//! Small planar vector type shared by the grid and the continuous oracle.

use core::ops::{Add, Mul, Neg, Sub};

use crate::math::{cos, sin, sqrt};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    /// Unit vector at angle `omega` measured anticlockwise from the x-axis.
    pub fn unit(omega: f64) -> Self {
        Point2::new(cos(omega), sin(omega))
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3-D cross product.
    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        sqrt(self.dot(self))
    }

    /// Rotation by +pi/2.
    pub fn perp(self) -> Self {
        Point2::new(-self.y, self.x)
    }

    pub fn rotated(self, angle: f64) -> Self {
        let (c, s) = (cos(angle), sin(angle));
        Point2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    /// Mirror image across the x-axis.
    pub fn mirrored(self) -> Self {
        Point2::new(self.x, -self.y)
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self - other).norm()
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, k: f64) -> Point2 {
        Point2::new(self.x * k, self.y * k)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}
