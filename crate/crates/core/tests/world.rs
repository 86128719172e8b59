use kgagent::graph::CrossModalGraph;
use kgagent::perception::{partition_observations, PerceptionConfig, RangeEstimate};
use kgagent::sim::{FixedEntity, RecipeTable, ScenarioConfig, Simulator};
use kgagent::skills::{agent_library, ActionDecision};

fn single(entity: &str, x: f64, z: f64) -> Simulator {
    let mut s = ScenarioConfig::plains_default();
    s.surface.clear();
    s.fixed = vec![FixedEntity {
        entity: entity.into(),
        x,
        z,
        level: 0,
    }];
    Simulator::reset(1, s, RecipeTable::builtin()).unwrap()
}

// Whatever perception calls "within" and aligned must be mineable in the world.
#[test]
fn perceived_reach_agrees_with_world() {
    let g = CrossModalGraph::load(kgagent::assets::MINECRAFT_KG).unwrap();
    let lib = agent_library();
    let mut checked = 0;
    for i in 0..400 {
        let z = 2.0 + f64::from(i) * 0.02;
        let mut sim = single("trunk", 0.0, z);
        let look = |sim: &Simulator| {
            partition_observations(&sim.observe(0), &g, &PerceptionConfig::default()).unwrap()
        };
        let Some(t) = look(&sim).env.get("trunk").cloned() else {
            continue;
        };
        lib.execute(
            &ActionDecision::new("turn", vec![i64::from(t.x - 960), i64::from(t.y - 540)]),
            &mut sim,
        )
        .unwrap();
        let Some(t) = look(&sim).env.get("trunk").cloned() else {
            continue;
        };
        let aligned = f64::from(t.x - 960).hypot(f64::from(t.y - 540)) <= 40.0;
        if t.range == RangeEstimate::Within && aligned {
            lib.execute(&ActionDecision::new("mine_log", vec![1200]), &mut sim)
                .unwrap();
            assert_eq!(sim.world.count("log"), 1, "trunk at z={z} reported {t:?}");
            checked += 1;
        }
    }
    assert!(checked > 10);
}

#[test]
fn milestones_only_grow() {
    let mut sim = single("trunk", 0.0, 3.0);
    let lib = agent_library();
    let mut seen = sim.milestones();
    assert!(seen.is_empty());
    for a in [
        ActionDecision::new("turn", vec![0, 60]),
        ActionDecision::new("mine_log", vec![1200]),
        ActionDecision::new("craft_plank", vec![960, 1040]),
        ActionDecision::new("turn", vec![100, 0]),
    ] {
        let _ = lib.execute(&a, &mut sim);
        let now = sim.milestones();
        assert!(seen.is_subset(&now));
        seen = now;
    }
    assert!(seen.contains("obtain_log"));
}
