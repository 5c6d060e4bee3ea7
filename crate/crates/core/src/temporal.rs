//! Temporal densification: the current sample's cloud plus the static part
//! of up to 13 previous clouds, expressed in the current ego frame.

use alloc::collections::VecDeque;
use alloc::string::String;

use crate::geometry::RigidTransform;
use crate::labels::LabelSpace;
use crate::pointcloud::SemanticPointCloud;

/// Longest history the pipeline aggregates.
pub const MAX_HISTORY: usize = 13;

/// Drops every point whose class is in the dynamic set, keeping order.
pub fn filter_dynamic(cloud: &SemanticPointCloud, space: &LabelSpace) -> SemanticPointCloud {
    cloud.filtered(|_, label, _| !space.is_dynamic(label))
}

/// Unions `current` with the static points of every `history` cloud and maps
/// the result into the current ego frame.
///
/// The current sample keeps its dynamic points. Stamps are carried through
/// unchanged, so callers stamp history entries beforehand (see
/// [`SequenceContext`]).
pub fn densify<'a, I>(
    current: &SemanticPointCloud,
    history: I,
    space: &LabelSpace,
    global_to_ego: &RigidTransform,
) -> SemanticPointCloud
where
    I: IntoIterator<Item = &'a SemanticPointCloud>,
{
    let mut union = current.clone();
    for past in history {
        union.extend_from(&filter_dynamic(past, space));
    }
    union.transformed(global_to_ego)
}

/// Rolling window of past global-frame clouds for one sequence.
///
/// The context owns temporal offsets: the most recent stored cloud is
/// stamped `-1`, the one before it `-2`, and so on.
#[derive(Debug, Clone)]
pub struct SequenceContext {
    max_history: usize,
    // newest at the front
    entries: VecDeque<(String, SemanticPointCloud)>,
}

impl Default for SequenceContext {
    fn default() -> Self {
        Self::new(MAX_HISTORY)
    }
}

impl SequenceContext {
    /// Keeps at most `max_history` past samples.
    pub fn new(max_history: usize) -> Self {
        SequenceContext {
            max_history,
            entries: VecDeque::with_capacity(max_history + 1),
        }
    }

    #[allow(missing_docs)]
    pub fn max_history(&self) -> usize {
        self.max_history
    }

    /// Number of stored past samples.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    #[allow(missing_docs)]
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Stored sample ids, newest first.
    pub fn sample_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(id, _)| id.as_str())
    }

    /// The `history` most recent past clouds (capped at what is stored),
    /// newest first, each stamped with its offset `-Δ`.
    pub fn stamped_history(&self, history: usize) -> impl Iterator<Item = SemanticPointCloud> + '_ {
        self.entries
            .iter()
            .take(history.min(self.max_history))
            .enumerate()
            .map(|(i, (_, cloud))| cloud.clone().with_stamp(-(i as i32 + 1)))
    }

    /// Densifies `current` (global frame) with the last `history` stored samples.
    pub fn densify(
        &self,
        current: &SemanticPointCloud,
        history: usize,
        space: &LabelSpace,
        global_to_ego: &RigidTransform,
    ) -> SemanticPointCloud {
        let past: alloc::vec::Vec<_> = self.stamped_history(history).collect();
        densify(&current.clone().with_stamp(0), &past, space, global_to_ego)
    }

    /// Records `cloud` (global frame) as the newest past sample, evicting the
    /// oldest beyond `max_history`.
    pub fn push(&mut self, sample_id: impl Into<String>, cloud: SemanticPointCloud) {
        if self.max_history == 0 {
            return;
        }
        self.entries.push_front((sample_id.into(), cloud));
        self.entries.truncate(self.max_history);
    }
}
