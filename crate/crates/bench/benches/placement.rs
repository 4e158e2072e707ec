use std::collections::BTreeMap;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use xrlayout_core::designspace::EntityRef;
use xrlayout_core::frames::SceneState;
use xrlayout_core::geometry::{in_fov, FovSpec, Pose, Rotation, Vec3};
use xrlayout_core::placement::{BodyFixedConfig, IntermediaryMap, PlacementParams, Placer, Strategy, StrategyConfig};

fn config() -> StrategyConfig {
    let ids = ["sports", "food", "movies"];
    StrategyConfig {
        intermediaries: Some(IntermediaryMap(
            ids.iter().map(|id| (id.to_string(), EntityRef::entity(*id))).collect(),
        )),
        body_fixed: Some(BodyFixedConfig(BTreeMap::from([
            ("sports".to_string(), 0.0),
            ("food".to_string(), 90.0),
            ("movies".to_string(), -90.0),
        ]))),
        ..StrategyConfig::default()
    }
}

fn state() -> SceneState {
    SceneState::new(0.0)
        .with(
            EntityRef::UserBody,
            Pose::from_parts(Vec3::new(0.3, 0.0, 0.2), Rotation::from_heading(0.4)),
        )
        .with(EntityRef::entity("sports"), Pose::translation(0.0, 1.6, -3.0))
        .with(EntityRef::entity("food"), Pose::translation(-3.0, 1.6, 0.0))
        .with(EntityRef::entity("movies"), Pose::translation(3.0, 1.6, 0.0))
}

fn placement(c: &mut Criterion) {
    let cfg = config();
    let params = PlacementParams::default();
    let state = state();
    for strategy in [Strategy::EnvironmentReferenced, Strategy::BodyFixed] {
        let mut placer = Placer::new(strategy, &cfg, &params).unwrap();
        c.bench_function(&format!("place three panels ({})", strategy.short_name()), |b| {
            b.iter(|| placer.place(black_box(&state)).unwrap().len())
        });
    }
    let head = Pose::from_parts(Vec3::new(0.0, 1.6, 0.0), Rotation::from_heading(0.2));
    let fov = FovSpec::hololens2();
    c.bench_function("in_fov", |b| {
        b.iter(|| in_fov(black_box(&head), black_box(Vec3::new(0.5, 1.5, -1.2)), &fov).unwrap())
    });
}

criterion_group!(benches, placement);
criterion_main!(benches);
