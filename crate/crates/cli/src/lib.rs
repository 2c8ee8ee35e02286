//! Scenario runner: parses a TOML scenario, runs its tasks against
//! `iterlab-core` and writes a canonical JSON report with CSV side files.

pub mod config;
pub mod report;
pub mod run;

pub use config::{parse_config, ConfigError, ConfigErrors, Scenario, Task, TaskKind, OPS};
pub use report::{summary, write_outputs};
pub use run::{run_scenario, Report, TaskResult, TaskStatus, Timings};

/// Command-line overrides applied on top of a parsed scenario.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub radii: Option<usize>,
    pub directions: Option<usize>,
    pub alpha_max: Option<u32>,
    pub snap_den: Option<u64>,
}

impl Overrides {
    pub fn apply(&self, s: &mut Scenario) {
        if let Some(seed) = self.seed {
            s.seed = seed;
            s.plan.seed = seed;
        }
        if let Some(r) = self.radii {
            s.plan.radii = r;
        }
        if let Some(d) = self.directions {
            s.plan.directions = d;
        }
        if let Some(d) = self.snap_den {
            s.plan.snap_den = d;
        }
        if let Some(a) = self.alpha_max {
            for t in &mut s.tasks {
                match &mut t.kind {
                    TaskKind::EstimateGamma { alpha_max, .. } | TaskKind::Compare { alpha_max, .. } => {
                        *alpha_max = Some(a)
                    }
                    _ => {}
                }
            }
        }
    }
}
