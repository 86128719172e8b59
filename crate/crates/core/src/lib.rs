//! Knowledge-graph-grounded agent for a voxel sandbox game.
//!
//! Perception frames are embedded into a cross-modal graph, pooled down to a
//! task-relevant subgraph, rendered into a prompt, and answered by a policy
//! whose reply is parsed into a skill call and expanded into input events.

pub mod agent;
pub mod graph;
pub mod harness;
pub mod memory;
pub mod perception;
pub mod policy;
pub mod retrieval;
pub mod sim;
pub mod skills;

pub mod assets {
    //! Data files compiled into the library.
    pub const MINECRAFT_KG: &str = include_str!("../assets/minecraft.kg");
    pub const PLAINS_DEFAULT: &str = include_str!("../assets/plains_default.json");
    pub const RECIPES: &str = include_str!("../assets/recipes.json");
    pub const TASKS: &str = include_str!("../assets/tasks.json");
    /// Retrieval benchmark cases as (file name, JSON).
    pub const BENCH_CASES: [(&str, &str); 4] = [
        (
            "01_diamond_chain.json",
            include_str!("../assets/bench/01_diamond_chain.json"),
        ),
        (
            "02_log_exact.json",
            include_str!("../assets/bench/02_log_exact.json"),
        ),
        (
            "03_empty_oracle.json",
            include_str!("../assets/bench/03_empty_oracle.json"),
        ),
        (
            "04_sparse_prompt.json",
            include_str!("../assets/bench/04_sparse_prompt.json"),
        ),
    ];
}
