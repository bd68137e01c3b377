use serde::{Deserialize, Serialize};

use super::agent::{Action, Pose};

/// Executed agent behavior: `poses[0]` is the start and `poses[i + 1]` the
/// pose after `actions[i]`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub poses: Vec<Pose>,
    pub actions: Vec<Action>,
    pub collided: Vec<bool>,
    /// Subroutine active for each action, when one was.
    pub subroutine: Vec<Option<u8>>,
}

impl Trajectory {
    pub fn start(pose: Pose) -> Self {
        Trajectory {
            poses: vec![pose],
            ..Default::default()
        }
    }

    pub fn push(&mut self, action: Action, pose: Pose, collided: bool, subroutine: Option<u8>) {
        self.actions.push(action);
        self.poses.push(pose);
        self.collided.push(collided);
        self.subroutine.push(subroutine);
    }

    pub fn last_pose(&self) -> Pose {
        *self.poses.last().expect("a trajectory always has its start pose")
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Appends `other`, which must start where `self` ends.
    pub fn extend(&mut self, other: &Trajectory) {
        debug_assert_eq!(other.poses[0], self.last_pose());
        self.poses.extend_from_slice(&other.poses[1..]);
        self.actions.extend_from_slice(&other.actions);
        self.collided.extend_from_slice(&other.collided);
        self.subroutine.extend_from_slice(&other.subroutine);
    }
}
