use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2) + (self.z - other.z).powi(2))
            .sqrt()
    }

    pub fn plan_distance(&self, x: f64, y: f64) -> f64 {
        (self.x - x).hypot(self.y - y)
    }
}

/// Plan-view distance from `(x, y)` to the segment `a`-`b`.
pub fn segment_distance(x: f64, y: f64, a: &Point, b: &Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return a.plan_distance(x, y);
    }
    let t = (((x - a.x) * dx + (y - a.y) * dy) / len2).clamp(0.0, 1.0);
    (a.x + t * dx - x).hypot(a.y + t * dy - y)
}

/// Extra path length of the detour `a -> (x, y) -> b` over the direct path,
/// in plan view. Points with excess below a margin form an ellipse with foci
/// `a` and `b`.
pub fn ellipse_excess(x: f64, y: f64, a: &Point, b: &Point) -> f64 {
    a.plan_distance(x, y) + b.plan_distance(x, y) - a.plan_distance(b.x, b.y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distances() {
        let a = Point::new(0.0, 0.0, 0.0);
        let b = Point::new(4.0, 0.0, 3.0);
        assert_eq!(a.distance(&b), 5.0);
        assert_eq!(segment_distance(2.0, 1.0, &a, &b), 1.0);
        assert_eq!(segment_distance(-3.0, 4.0, &a, &b), 5.0);
        assert!(ellipse_excess(2.0, 0.0, &a, &b).abs() < 1e-12);
        assert!((ellipse_excess(2.0, 1.5, &a, &b) - 1.0).abs() < 1e-12);
    }
}
