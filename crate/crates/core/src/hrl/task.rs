//! Goal-reaching tasks on a fixed map: PointGoal (reach a coordinate) and
//! AreaGoal (reach any cell of a target room).

use std::f64::consts::TAU;
use std::sync::Arc;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_from, tag};
use crate::sim::{geodesic_field, step, Action, AgentConfig, Cell, DistanceField, MazeMap, Pose, RoomLabel};

/// Goal distance range in agent steps for PointGoal.
pub const POINT_GOAL_STEPS: (usize, usize) = (10, 17);
/// Start distance range in agent steps from the nearest target cell for AreaGoal.
pub const AREA_GOAL_STEPS: (usize, usize) = (10, 23);
pub const POINT_GOAL_RADIUS: f64 = 0.5;
const MAX_SAMPLE_ATTEMPTS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    PointGoal,
    AreaGoal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    Sparse,
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub kind: TaskKind,
    pub reward: RewardMode,
    pub map_id: u64,
    /// Seed of the per-episode start/goal sampler.
    pub seed: u64,
    pub max_steps: usize,
}

impl TaskSpec {
    pub fn new(kind: TaskKind, reward: RewardMode, map_id: u64, seed: u64) -> Self {
        TaskSpec {
            kind,
            reward,
            map_id,
            seed,
            max_steps: 60,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Goal {
    Point { x: f64, y: f64 },
    Area,
}

#[derive(Debug, Clone)]
pub struct EpisodeSetup {
    pub start: Pose,
    pub goal: Goal,
    /// Geodesic distance to the goal.
    pub field: Arc<DistanceField>,
}

#[derive(Debug, Clone)]
pub struct Task {
    pub spec: TaskSpec,
    pub agent: AgentConfig,
    map: MazeMap,
    clear: Vec<Cell>,
    /// AreaGoal only: distance to the nearest target cell and the valid starts.
    area: Option<(Arc<DistanceField>, Vec<Cell>)>,
}

pub fn make_task(spec: TaskSpec, map: MazeMap, agent: &AgentConfig) -> Result<Task> {
    agent.validate()?;
    if spec.max_steps == 0 {
        return Err(Error::InvalidArgument("max_steps must be positive".into()));
    }
    let clear = map.clear_cells(agent.body_radius);
    if clear.is_empty() {
        return Err(Error::InvalidArgument("task map has no clear cells".into()));
    }
    let area = match spec.kind {
        TaskKind::PointGoal => None,
        TaskKind::AreaGoal => {
            let targets = map.target_cells();
            if targets.is_empty() {
                return Err(Error::InvalidArgument("AreaGoal needs a map with a target room".into()));
            }
            let field = geodesic_field(&map, &targets)?;
            let (lo, hi) = range_m(AREA_GOAL_STEPS, agent);
            let starts: Vec<Cell> = clear
                .iter()
                .copied()
                .filter(|&c| (lo..=hi).contains(&field.get(c)))
                .collect();
            if starts.is_empty() {
                return Err(Error::Generation {
                    attempts: 1,
                    reason: format!("no AreaGoal start {lo:.1}-{hi:.1} m from the target room"),
                });
            }
            Some((Arc::new(field), starts))
        }
    };
    Ok(Task {
        spec,
        agent: *agent,
        map,
        clear,
        area,
    })
}

fn range_m(steps: (usize, usize), agent: &AgentConfig) -> (f64, f64) {
    (steps.0 as f64 * agent.step_size, steps.1 as f64 * agent.step_size)
}

impl Task {
    pub fn map(&self) -> &MazeMap {
        &self.map
    }

    /// Start and goal of episode `index`, drawn from its own stream.
    pub fn sample_episode(&self, index: u64) -> Result<EpisodeSetup> {
        let mut rng = rng_from(self.spec.seed, &[tag("episode"), index]);
        let heading = |rng: &mut crate::rng::Rng| rng.random_range(0.0..TAU);
        match &self.area {
            Some((field, starts)) => {
                let c = starts[rng.random_range(0..starts.len())];
                let (x, y) = self.map.cell_center(c);
                Ok(EpisodeSetup {
                    start: Pose::new(x, y, heading(&mut rng)),
                    goal: Goal::Area,
                    field: Arc::clone(field),
                })
            }
            None => {
                let (lo, hi) = range_m(POINT_GOAL_STEPS, &self.agent);
                for _ in 0..MAX_SAMPLE_ATTEMPTS {
                    let s = self.clear[rng.random_range(0..self.clear.len())];
                    let from_start = geodesic_field(&self.map, &[s])?;
                    let goals: Vec<Cell> = self
                        .clear
                        .iter()
                        .copied()
                        .filter(|&c| (lo..=hi).contains(&from_start.get(c)))
                        .collect();
                    if goals.is_empty() {
                        continue;
                    }
                    let g = goals[rng.random_range(0..goals.len())];
                    let (x, y) = self.map.cell_center(s);
                    let (gx, gy) = self.map.cell_center(g);
                    return Ok(EpisodeSetup {
                        start: Pose::new(x, y, heading(&mut rng)),
                        goal: Goal::Point { x: gx, y: gy },
                        field: Arc::new(geodesic_field(&self.map, &[g])?),
                    });
                }
                Err(Error::Generation {
                    attempts: MAX_SAMPLE_ATTEMPTS,
                    reason: format!("no PointGoal pair {lo:.1}-{hi:.1} m apart"),
                })
            }
        }
    }

    pub fn start_episode(&self, setup: EpisodeSetup) -> Result<Episode> {
        Episode::new(self, setup)
    }
}

/// Summary of a finished episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub reward: f64,
    pub success: bool,
    pub steps: usize,
    /// Sum of the per-step progress terms, whether or not they were paid out.
    pub shaping_sum: f64,
    pub initial_distance: f64,
    pub final_distance: f64,
}

impl EpisodeLog {
    /// `|Σ shaping − (d_0 − d_final)|`.
    pub fn telescoping_error(&self) -> f64 {
        (self.shaping_sum - (self.initial_distance - self.final_distance)).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub reward: f64,
    pub shaping: f64,
    pub collided: bool,
    pub done: bool,
}

#[derive(Debug, Clone)]
pub struct Episode {
    setup: EpisodeSetup,
    pub pose: Pose,
    pub steps: usize,
    pub done: bool,
    pub success: bool,
    reward_sum: f64,
    shaping_sum: f64,
    initial_distance: f64,
    distance: f64,
}

impl Episode {
    /// An episode that starts at its goal is over immediately with reward 1.
    pub fn new(task: &Task, setup: EpisodeSetup) -> Result<Self> {
        if !setup.start.is_valid(&task.map) {
            return Err(Error::Contract("episode start is not in free space".into()));
        }
        let d = distance(task, &setup, setup.start)?;
        let mut ep = Episode {
            pose: setup.start,
            setup,
            steps: 0,
            done: false,
            success: false,
            reward_sum: 0.0,
            shaping_sum: 0.0,
            initial_distance: d,
            distance: d,
        };
        if ep.at_goal(task) {
            ep.done = true;
            ep.success = true;
            ep.reward_sum = 1.0;
        }
        Ok(ep)
    }

    pub fn goal(&self) -> Goal {
        self.setup.goal
    }

    fn at_goal(&self, task: &Task) -> bool {
        match self.setup.goal {
            Goal::Point { x, y } => self.pose.distance_to(x, y) <= POINT_GOAL_RADIUS,
            Goal::Area => task
                .map
                .cell_at(self.pose.x, self.pose.y)
                .is_some_and(|c| task.map.label(c) == RoomLabel::Target),
        }
    }

    /// Distance in meters and bearing (sin, cos) relative to the heading;
    /// zeros for AreaGoal.
    pub fn goal_features(&self) -> [f64; 3] {
        match self.setup.goal {
            Goal::Point { x, y } => {
                let bearing = (y - self.pose.y).atan2(x - self.pose.x) - self.pose.heading;
                [self.pose.distance_to(x, y), bearing.sin(), bearing.cos()]
            }
            Goal::Area => [0.0; 3],
        }
    }

    pub fn step(&mut self, task: &Task, action: Action) -> Result<Transition> {
        if self.done {
            return Err(Error::Contract("step on a finished episode".into()));
        }
        let out = step(self.pose, action, &task.agent, &task.map)?;
        self.pose = out.pose;
        self.steps += 1;
        let d = distance(task, &self.setup, self.pose)?;
        let shaping = self.distance - d;
        self.distance = d;
        self.shaping_sum += shaping;
        let mut reward = match task.spec.reward {
            RewardMode::Sparse => 0.0,
            RewardMode::Dense => shaping,
        };
        if self.at_goal(task) {
            self.success = true;
            self.done = true;
            reward += 1.0;
        } else if self.steps >= task.spec.max_steps {
            self.done = true;
        }
        self.reward_sum += reward;
        Ok(Transition {
            reward,
            shaping,
            collided: out.collided,
            done: self.done,
        })
    }

    pub fn log(&self) -> EpisodeLog {
        EpisodeLog {
            reward: self.reward_sum,
            success: self.success,
            steps: self.steps,
            shaping_sum: self.shaping_sum,
            initial_distance: self.initial_distance,
            final_distance: self.distance,
        }
    }
}

fn distance(task: &Task, setup: &EpisodeSetup, pose: Pose) -> Result<f64> {
    let d = setup.field.at_point(&task.map, pose.x, pose.y);
    if d.is_finite() {
        Ok(d)
    } else {
        Err(Error::Numerical(format!(
            "goal unreachable from ({:.2}, {:.2})",
            pose.x, pose.y
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{generate_maze, MazeSpec};
    use proptest::prelude::*;

    fn task(kind: TaskKind, reward: RewardMode) -> Task {
        // AreaGoal starts need room to lie 4 m or more from the target room.
        let (size, rooms) = match kind {
            TaskKind::PointGoal => (40, 3),
            TaskKind::AreaGoal => (60, 4),
        };
        let spec = MazeSpec {
            width: size,
            height: size,
            room_count: rooms,
            target_room_count: 1,
            ..MazeSpec::default()
        };
        let map = generate_maze(3, &spec).unwrap();
        make_task(TaskSpec::new(kind, reward, map.seed(), 11), map, &AgentConfig::default()).unwrap()
    }

    #[test]
    fn point_goals_lie_in_the_step_range() {
        let t = task(TaskKind::PointGoal, RewardMode::Sparse);
        for i in 0..20 {
            let s = t.sample_episode(i).unwrap();
            let d = s.field.at_point(t.map(), s.start.x, s.start.y);
            assert!((4.0 - 1e-9..=6.8 + 1e-9).contains(&d), "{d}");
        }
    }

    #[test]
    fn area_starts_lie_in_the_step_range() {
        let t = task(TaskKind::AreaGoal, RewardMode::Sparse);
        for i in 0..20 {
            let s = t.sample_episode(i).unwrap();
            let d = s.field.at_point(t.map(), s.start.x, s.start.y);
            assert!((4.0 - 1e-9..=9.2 + 1e-9).contains(&d), "{d}");
            assert_eq!(Episode::new(&t, s).unwrap().goal_features(), [0.0; 3]);
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let t = task(TaskKind::PointGoal, RewardMode::Sparse);
        let (a, b) = (t.sample_episode(5).unwrap(), t.sample_episode(5).unwrap());
        assert_eq!(a.start, b.start);
        assert_eq!(a.goal, b.goal);
    }

    #[test]
    fn starting_at_the_goal_ends_with_reward_one() {
        let t = task(TaskKind::PointGoal, RewardMode::Sparse);
        let mut s = t.sample_episode(0).unwrap();
        s.goal = Goal::Point { x: s.start.x, y: s.start.y };
        let ep = Episode::new(&t, s).unwrap();
        assert!(ep.done && ep.success);
        assert_eq!(ep.steps, 0);
        assert_eq!(ep.log().reward, 1.0);
    }

    #[test]
    fn episodes_stop_at_the_step_cap() {
        let t = task(TaskKind::PointGoal, RewardMode::Sparse);
        let mut ep = t.start_episode(t.sample_episode(1).unwrap()).unwrap();
        let mut n = 0;
        while !ep.done {
            let tr = ep.step(&t, Action::RotateLeft).unwrap();
            assert_eq!(tr.reward, 0.0);
            n += 1;
        }
        assert_eq!(n, 60);
        assert!(!ep.success);
        assert!(ep.step(&t, Action::Stay).is_err());
    }

    #[test]
    fn bearing_points_at_the_goal() {
        let t = task(TaskKind::PointGoal, RewardMode::Sparse);
        let ep = t.start_episode(t.sample_episode(2).unwrap()).unwrap();
        let [d, s, c] = ep.goal_features();
        let Goal::Point { x, y } = ep.goal() else { unreachable!() };
        let a = ep.pose.heading + s.atan2(c);
        assert!((ep.pose.x + d * a.cos() - x).abs() < 1e-9);
        assert!((ep.pose.y + d * a.sin() - y).abs() < 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn dense_shaping_telescopes(episode in 0u64..1000, actions in prop::collection::vec(0usize..4, 1..80)) {
            let t = task(TaskKind::PointGoal, RewardMode::Dense);
            let mut ep = t.start_episode(t.sample_episode(episode).unwrap()).unwrap();
            let mut paid = 0.0;
            for a in actions {
                if ep.done {
                    break;
                }
                let tr = ep.step(&t, Action::ALL[a]).unwrap();
                paid += tr.reward;
            }
            let log = ep.log();
            prop_assert!(log.telescoping_error() < 1e-9);
            let bonus = if log.success { 1.0 } else { 0.0 };
            prop_assert!((paid - bonus - (log.initial_distance - log.final_distance)).abs() < 1e-9);
        }
    }
}
