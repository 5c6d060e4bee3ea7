//! The 18-class Occ3D-nuScenes label space.

use crate::{Error, Result};

/// Number of classes, including the empty class.
pub const NUM_CLASSES: usize = 18;

/// Index of the empty (free space) class.
pub const EMPTY_LABEL: u8 = 17;

/// Default class names, indexed by label.
pub const DEFAULT_NAMES: [&str; NUM_CLASSES] = [
    "others",
    "barrier",
    "bicycle",
    "bus",
    "car",
    "construction_vehicle",
    "motorcycle",
    "pedestrian",
    "traffic_cone",
    "trailer",
    "truck",
    "driveable_surface",
    "other_flat",
    "sidewalk",
    "terrain",
    "manmade",
    "vegetation",
    "empty",
];

/// Vehicle and pedestrian classes; barrier and traffic cone count as static.
pub const DEFAULT_DYNAMIC: [u8; 8] = [2, 3, 4, 5, 6, 7, 9, 10];

/// Classes left out of the 15-class average reported next to mIoU:
/// "others" and "other_flat".
pub const UNNAMED_CLASSES: [u8; 2] = [0, 12];

/// Class names plus the set of movable classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSpace {
    names: [&'static str; NUM_CLASSES],
    dynamic: [bool; NUM_CLASSES],
}

impl Default for LabelSpace {
    fn default() -> Self {
        Self::with_dynamic(&DEFAULT_DYNAMIC).expect("default dynamic set is valid")
    }
}

impl LabelSpace {
    /// Default names with a custom dynamic set. Rejects 17 and out-of-range labels.
    pub fn with_dynamic(dynamic_classes: &[u8]) -> Result<Self> {
        let mut dynamic = [false; NUM_CLASSES];
        for &c in dynamic_classes {
            if c >= EMPTY_LABEL {
                return Err(Error::invalid(
                    "dynamic set",
                    alloc::format!("class {c} cannot be dynamic"),
                ));
            }
            dynamic[c as usize] = true;
        }
        Ok(LabelSpace {
            names: DEFAULT_NAMES,
            dynamic,
        })
    }

    /// Name of class `label`.
    pub fn name(&self, label: u8) -> &'static str {
        self.names[label as usize]
    }

    /// Looks a class up by name.
    pub fn index_of(&self, name: &str) -> Option<u8> {
        self.names.iter().position(|n| *n == name).map(|i| i as u8)
    }

    /// Always [`EMPTY_LABEL`].
    pub fn empty_index(&self) -> u8 {
        EMPTY_LABEL
    }

    /// Whether `label` belongs to the dynamic set.
    #[inline]
    pub fn is_dynamic(&self, label: u8) -> bool {
        self.dynamic.get(label as usize).copied().unwrap_or(false)
    }

    /// The dynamic classes in ascending order.
    pub fn dynamic_classes(&self) -> impl Iterator<Item = u8> + '_ {
        (0..NUM_CLASSES as u8).filter(|&c| self.dynamic[c as usize])
    }
}
