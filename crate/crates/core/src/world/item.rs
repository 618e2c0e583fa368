use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::{Pose, Rect};
use crate::grasp::Strategy;

use super::ContainerId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rigidity {
    Rigid,
    SemiRigid,
    Deformable,
    Hinged,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VisualClass {
    Opaque,
    PartiallyTransparent,
    Transparent,
    Reflective,
    IrAbsorbing,
}

impl VisualClass {
    /// Classes for which the depth camera returns nothing usable.
    pub fn depth_blind(self) -> bool {
        matches!(self, VisualClass::Transparent | VisualClass::IrAbsorbing)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tool {
    Suction,
    Gripper,
}

impl fmt::Display for Tool {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tool::Suction => "suction",
            Tool::Gripper => "gripper",
        })
    }
}

/// Catalog entry: physical and visual properties of one item type.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItemSpec {
    pub id: String,
    pub mass_g: f64,
    /// Bounding box as lying in its resting pose: x, y footprint and z height.
    pub bbox_mm: [f64; 3],
    pub rigidity: Rigidity,
    pub visual_class: VisualClass,
    pub suckable: bool,
    pub grippable: bool,
    pub preferred_tool: Tool,
    pub tool_success_prob: BTreeMap<Tool, f64>,
    #[serde(default)]
    pub forced_strategy: Option<Strategy>,
    /// Per-item override of the probability of dropping after a good grasp.
    #[serde(default)]
    pub drop_prob: Option<f64>,
}

impl ItemSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.id.is_empty() {
            return Err("item id is empty".into());
        }
        if !(self.mass_g > 0.0) {
            return Err(format!("{}: mass must be positive", self.id));
        }
        if self.bbox_mm.iter().any(|d| !(*d > 0.0)) {
            return Err(format!("{}: bbox dimensions must be positive", self.id));
        }
        if !self.suckable && !self.grippable {
            return Err(format!("{}: item must be suckable or grippable", self.id));
        }
        for (tool, p) in &self.tool_success_prob {
            if !(0.0..=1.0).contains(p) {
                return Err(format!("{}: {tool} success probability {p} outside [0, 1]", self.id));
            }
        }
        if let Some(p) = self.drop_prob {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{}: drop probability {p} outside [0, 1]", self.id));
            }
        }
        let usable = match self.preferred_tool {
            Tool::Suction => self.suckable,
            Tool::Gripper => self.grippable,
        };
        if !usable {
            return Err(format!("{}: preferred tool {} cannot handle the item", self.id, self.preferred_tool));
        }
        Ok(())
    }

    /// Base per-probe success probability for a tool, zero when the tool
    /// cannot handle the item at all.
    pub fn success_prob(&self, tool: Tool) -> f64 {
        let capable = match tool {
            Tool::Suction => self.suckable,
            Tool::Gripper => self.grippable,
        };
        if capable {
            self.tool_success_prob.get(&tool).copied().unwrap_or(0.0)
        } else {
            0.0
        }
    }

    pub fn extent_m(&self) -> [f64; 3] {
        [
            self.bbox_mm[0] / 1000.0,
            self.bbox_mm[1] / 1000.0,
            self.bbox_mm[2] / 1000.0,
        ]
    }

    pub fn volume_m3(&self) -> f64 {
        self.extent_m().iter().product()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Catalog {
    pub schema_version: u32,
    #[serde(rename = "item")]
    pub items: Vec<ItemSpec>,
}

impl Catalog {
    pub fn get(&self, id: &str) -> Option<&ItemSpec> {
        self.items.iter().find(|i| i.id == id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.items.iter().map(|i| i.id.as_str())
    }

    pub fn validate(&self) -> Vec<String> {
        let mut problems: Vec<String> = self.items.iter().filter_map(|i| i.validate().err()).collect();
        let mut seen = std::collections::BTreeSet::new();
        for item in &self.items {
            if !seen.insert(item.id.as_str()) {
                problems.push(format!("duplicate catalog id {}", item.id));
            }
        }
        problems
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InstanceId(pub u32);

impl fmt::Display for InstanceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    Container(ContainerId),
    Gripper,
    /// Dropped outside every container; only a human can recover it.
    Outside,
}

impl Location {
    pub fn container(&self) -> Option<&ContainerId> {
        match self {
            Location::Container(c) => Some(c),
            _ => None,
        }
    }
}

/// A posed item. `pose.position` is the centre of the bounding box's bottom
/// face in the workspace frame.
#[derive(Clone, Debug, PartialEq)]
pub struct ItemInstance {
    pub id: InstanceId,
    pub spec_id: String,
    pub pose: Pose,
    /// Oriented extent (x, y, height), metres.
    pub extent: [f64; 3],
    pub location: Location,
    /// Height of the top face above the container floor (m).
    pub top_height: f64,
    pub occluded_by: std::collections::BTreeSet<InstanceId>,
    pub protruding: bool,
}

impl ItemInstance {
    pub fn footprint(&self) -> Rect {
        Rect::centered(
            [self.pose.position[0], self.pose.position[1]],
            [self.extent[0], self.extent[1]],
        )
    }

    pub fn bottom_z(&self) -> f64 {
        self.pose.position[2]
    }

    pub fn top_z(&self) -> f64 {
        self.pose.position[2] + self.extent[2]
    }
}
