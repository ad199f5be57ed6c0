//! The fixed catalog of primitive object classes.

use serde::{Deserialize, Serialize};

/// Upright primitive shape; all lengths in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    /// Rectangular block; `length` along the local x axis.
    Box { length: f64, width: f64, height: f64 },
    Cylinder { diameter: f64, height: f64 },
}

impl Shape {
    pub fn height(&self) -> f64 {
        match *self {
            Shape::Box { height, .. } | Shape::Cylinder { height, .. } => height,
        }
    }

    /// (long side, short side, height); cylinders report the diameter twice.
    pub fn dimensions(&self) -> [f64; 3] {
        match *self {
            Shape::Box {
                length,
                width,
                height,
            } => [length.max(width), length.min(width), height],
            Shape::Cylinder { diameter, height } => [diameter, diameter, height],
        }
    }

    /// Radius of the footprint's circumscribed circle.
    pub fn footprint_radius(&self) -> f64 {
        match *self {
            Shape::Box { length, width, .. } => 0.5 * length.hypot(width),
            Shape::Cylinder { diameter, .. } => 0.5 * diameter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub class_id: usize,
    pub shape: Shape,
    /// Metadata only; nothing is rendered in color.
    pub color: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    specs: Vec<ObjectSpec>,
}

pub const MIN_DIMENSION: f64 = 0.02;
pub const MAX_DIMENSION: f64 = 0.30;

// (kind, long, short, height, color); kind 'b' = box, 'c' = cylinder (long = diameter).
const DEFAULT_TABLE: [(char, f64, f64, f64, &str); 27] = [
    ('b', 0.16, 0.06, 0.05, "red"),
    ('b', 0.12, 0.08, 0.04, "orange"),
    ('b', 0.09, 0.09, 0.06, "yellow"),
    ('c', 0.07, 0.07, 0.08, "green"),
    ('b', 0.20, 0.05, 0.03, "blue"),
    ('b', 0.06, 0.04, 0.07, "purple"),
    ('c', 0.10, 0.10, 0.04, "white"),
    ('b', 0.14, 0.10, 0.025, "black"),
    ('b', 0.05, 0.05, 0.05, "brown"),
    ('c', 0.05, 0.05, 0.06, "pink"),
    ('b', 0.18, 0.08, 0.06, "grey"),
    ('b', 0.10, 0.03, 0.03, "teal"),
    ('c', 0.12, 0.12, 0.03, "navy"),
    ('b', 0.08, 0.06, 0.08, "olive"),
    ('b', 0.13, 0.13, 0.02, "maroon"),
    ('c', 0.04, 0.04, 0.07, "lime"),
    ('b', 0.11, 0.05, 0.045, "cyan"),
    ('b', 0.07, 0.07, 0.035, "magenta"),
    ('c', 0.09, 0.09, 0.055, "gold"),
    ('b', 0.15, 0.04, 0.04, "silver"),
    ('b', 0.04, 0.03, 0.06, "beige"),
    ('c', 0.14, 0.14, 0.025, "coral"),
    ('b', 0.17, 0.12, 0.035, "indigo"),
    ('b', 0.09, 0.04, 0.075, "khaki"),
    ('c', 0.06, 0.06, 0.045, "salmon"),
    ('b', 0.12, 0.12, 0.05, "violet"),
    ('b', 0.06, 0.06, 0.02, "tan"),
];

impl Default for Catalog {
    fn default() -> Self {
        Self::standard()
    }
}

impl Catalog {
    /// 27 classes with pairwise-distinct dimensions.
    pub fn standard() -> Self {
        let specs = DEFAULT_TABLE
            .iter()
            .enumerate()
            .map(|(class_id, &(kind, long, short, height, color))| ObjectSpec {
                class_id,
                shape: match kind {
                    'c' => Shape::Cylinder {
                        diameter: long,
                        height,
                    },
                    _ => Shape::Box {
                        length: long,
                        width: short,
                        height,
                    },
                },
                color: color.to_string(),
            })
            .collect();
        Self { specs }
    }

    pub fn new(specs: Vec<ObjectSpec>) -> Self {
        Self { specs }
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    pub fn get(&self, class_id: usize) -> Option<&ObjectSpec> {
        self.specs.get(class_id)
    }

    pub fn specs(&self) -> &[ObjectSpec] {
        &self.specs
    }

    /// The `k` classes closest to `class_id` in (long, short, height) space,
    /// nearest first; ties resolved by lower class id.
    pub fn nearest_classes(&self, class_id: usize, k: usize) -> Vec<usize> {
        let Some(me) = self.get(class_id) else {
            return Vec::new();
        };
        let d0 = me.shape.dimensions();
        let mut others: Vec<(f64, usize)> = self
            .specs
            .iter()
            .filter(|s| s.class_id != class_id)
            .map(|s| {
                let d = s.shape.dimensions();
                let dist = (0..3).map(|a| (d[a] - d0[a]).powi(2)).sum::<f64>();
                (dist, s.class_id)
            })
            .collect();
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        others.into_iter().take(k).map(|(_, c)| c).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_catalog_is_valid() {
        let cat = Catalog::standard();
        assert_eq!(cat.len(), 27);
        for (idx, spec) in cat.specs().iter().enumerate() {
            assert_eq!(spec.class_id, idx);
            for d in spec.shape.dimensions() {
                assert!((MIN_DIMENSION..=MAX_DIMENSION).contains(&d), "{spec:?}");
            }
        }
        for a in cat.specs() {
            for b in cat.specs() {
                if a.class_id < b.class_id {
                    assert_ne!(
                        (a.shape.dimensions(), matches!(a.shape, Shape::Box { .. })),
                        (b.shape.dimensions(), matches!(b.shape, Shape::Box { .. }))
                    );
                }
            }
        }
    }

    #[test]
    fn nearest_classes_are_sorted_and_exclude_self() {
        let cat = Catalog::standard();
        for c in 0..cat.len() {
            let near = cat.nearest_classes(c, 3);
            assert_eq!(near.len(), 3);
            assert!(!near.contains(&c));
        }
        // 0.05 cube: closest are the 0.05/0.06 cylinders and small boxes.
        let near = cat.nearest_classes(8, 3);
        assert!(near.contains(&9), "{near:?}");
    }
}
