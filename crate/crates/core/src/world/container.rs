use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::Rect;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ContainerId(pub String);

impl ContainerId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ContainerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ContainerId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContainerKind {
    Tote,
    StorageCompartment,
    ShippingBox,
}

/// An open-topped container standing on a scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Container {
    pub id: ContainerId,
    pub kind: ContainerKind,
    /// Interior floor corner in the workspace frame (m).
    pub origin_m: [f64; 3],
    /// Interior length and width (mm).
    pub interior_mm: [f64; 2],
    pub wall_height_mm: f64,
}

impl Container {
    pub fn interior(&self) -> Rect {
        Rect::new(
            [self.origin_m[0], self.origin_m[1]],
            [
                self.origin_m[0] + self.interior_mm[0] / 1000.0,
                self.origin_m[1] + self.interior_mm[1] / 1000.0,
            ],
        )
    }

    pub fn floor_z(&self) -> f64 {
        self.origin_m[2]
    }

    pub fn wall_height_m(&self) -> f64 {
        self.wall_height_mm / 1000.0
    }

    pub fn top_z(&self) -> f64 {
        self.floor_z() + self.wall_height_m()
    }

    pub fn volume_m3(&self) -> f64 {
        self.interior().area() * self.wall_height_m()
    }

    pub fn is_imageable(&self) -> bool {
        self.kind != ContainerKind::ShippingBox
    }
}

pub const TOTE: &str = "tote";
pub const STORAGE_A: &str = "storage_a";
pub const STORAGE_B: &str = "storage_b";

/// Default cell layout inside the 1.0 x 1.0 m gantry footprint: two
/// tote-sized storage compartments side by side, the tote behind the first,
/// and three shipping boxes behind the second.
///
/// Each storage compartment has the footprint of a tote.
pub fn default_layout() -> Vec<Container> {
    let storage = |id: &str, x: f64| Container {
        id: ContainerId::new(id),
        kind: ContainerKind::StorageCompartment,
        origin_m: [x, 0.02, 0.0],
        interior_mm: [460.0, 600.0],
        wall_height_mm: 250.0,
    };
    let shipping = |i: u32, x: f64| Container {
        id: ContainerId::new(format!("box_{i}")),
        kind: ContainerKind::ShippingBox,
        origin_m: [x, 0.66, 0.0],
        interior_mm: [140.0, 320.0],
        wall_height_mm: 150.0,
    };
    vec![
        storage(STORAGE_A, 0.02),
        storage(STORAGE_B, 0.52),
        Container {
            id: ContainerId::new(TOTE),
            kind: ContainerKind::Tote,
            origin_m: [0.02, 0.66, 0.0],
            interior_mm: [460.0, 320.0],
            wall_height_mm: 250.0,
        },
        shipping(1, 0.52),
        shipping(2, 0.675),
        shipping(3, 0.83),
    ]
}
