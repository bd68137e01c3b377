//! Fixtures shared by the benchmarks.

use rand::Rng as _;
use vmsr_core::pipeline::subroutines::PreparedClip;
use vmsr_core::pipeline::PseudoLabeledClip;
use vmsr_core::rng::rng_from;
use vmsr_core::sim::{generate_maze, MazeMap, MazeSpec};
use vmsr_core::{Action, Observation, SubroutineArch};

/// A default-size generated layout.
pub fn default_map(seed: u64) -> MazeMap {
    generate_maze(seed, &MazeSpec::default()).expect("default maze spec is valid")
}

/// A clip with random depths and actions for the given architecture.
pub fn random_clip(arch: &SubroutineArch, seed: u64) -> PreparedClip {
    let mut rng = rng_from(seed, &[]);
    let clip = PseudoLabeledClip {
        video_id: 0,
        observations: (0..arch.horizon)
            .map(|_| Observation {
                depths: (0..arch.ray_count).map(|_| rng.random_range(0.0..1.0)).collect(),
            })
            .collect(),
        pseudo_actions: (1..arch.horizon).map(|_| Action::ALL[rng.random_range(0..4)]).collect(),
    };
    PreparedClip::new(arch, &clip).expect("clip matches arch")
}
