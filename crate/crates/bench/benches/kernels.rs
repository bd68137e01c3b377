use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use vmsr_bench::{default_map, random_clip};
use vmsr_core::eval::metrics::compute_adt;
use vmsr_core::nn::gumbel::gumbel_noise;
use vmsr_core::nn::params::Grads;
use vmsr_core::nn::{GruSpec, MlpSpec, ParamStore};
use vmsr_core::pipeline::subroutines::clip_loss;
use vmsr_core::rng::rng_from;
use vmsr_core::sim::{generate_maze, geodesic_field, observe, AgentConfig, MazeSpec, Pose, Trajectory};
use vmsr_core::SubroutineArch;

fn bench_sim(c: &mut Criterion) {
    let map = default_map(1);
    let agent = AgentConfig::default();
    let start = map.clear_cells(agent.body_radius)[0];
    let (x, y) = map.cell_center(start);
    let pose = Pose::new(x, y, 0.3);

    c.bench_function("generate_maze 200x200", |b| b.iter(|| generate_maze(black_box(7), &MazeSpec::default()).unwrap()));
    c.bench_function("observe", |b| b.iter(|| observe(black_box(&pose), &agent, &map)));
    c.bench_function("geodesic_field 200x200", |b| b.iter(|| geodesic_field(&map, black_box(&[start])).unwrap()));
    let traj = Trajectory::start(pose);
    c.bench_function("compute_adt", |b| b.iter(|| compute_adt(&map, black_box(&traj)).unwrap()));
}

fn bench_nn(c: &mut Criterion) {
    let mut rng = rng_from(0, &[]);
    let mlp = MlpSpec::new(vec![32, 64, 64, 4]).unwrap();
    let gru = GruSpec::new(36, 64).unwrap();
    let mut store = ParamStore::new();
    mlp.init(&mut store, "m", &mut rng);
    gru.init(&mut store, "g", &mut rng);
    let x = vec![0.5; 32];
    let h = vec![0.0; 64];
    let gx = vec![0.25; 36];

    c.bench_function("mlp forward+backward", |b| {
        b.iter(|| {
            let (y, cache) = mlp.forward(&store, "m", black_box(&x)).unwrap();
            let mut grads = Grads::new();
            mlp.backward(&store, "m", &cache, &y, &mut grads).unwrap()
        })
    });
    c.bench_function("gru step", |b| b.iter(|| gru.step(&store, "g", black_box(&gx), &h).unwrap()));

    let arch = SubroutineArch::new(AgentConfig::default().ray_count, 4, 10);
    let params = arch.init(0).unwrap();
    let clip = random_clip(&arch, 1);
    let noise = gumbel_noise(4, &mut rng);
    c.bench_function("clip_loss with gradient", |b| {
        b.iter(|| {
            let mut grads = Grads::new();
            clip_loss(&arch, &params, black_box(&clip), &noise, 0.7, 1.0, None, Some(&mut grads)).unwrap()
        })
    });
}

criterion_group!(sim, bench_sim);
criterion_group!(nn, bench_nn);
criterion_main!(sim, nn);
