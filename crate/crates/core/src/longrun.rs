//! Long-term test: stow and pick tasks alternate on one simulated clock
//! until a time budget runs out.

use crate::config::LongrunShape;
use crate::log::RunLog;
use crate::orchestrator::{run_task, RunParams};
use crate::task::{TaskSpec, PICK_TIME_LIMIT_S, STOW_TIME_LIMIT_S};
use crate::world::{Catalog, WorldError, WorldState};

#[derive(Clone, Debug, PartialEq)]
pub struct LongrunOutput {
    pub log: RunLog,
    pub stow_tasks: usize,
    pub pick_tasks: usize,
}

/// Seed of the `index`-th task of a long run.
pub fn task_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_mul(1_000_003).wrapping_add(index as u64)
}

/// Alternates stow and pick tasks drawn from `catalog`, starting with a
/// stow, until `shape.sim_hours` of simulated time have elapsed. The last
/// task is cut off at the budget.
pub fn run_longrun(catalog: &Catalog, shape: &LongrunShape, params: &RunParams, seed: u64) -> Result<LongrunOutput, WorldError> {
    let budget = shape.sim_hours * 3600.0;
    let mut out = LongrunOutput {
        log: RunLog::default(),
        stow_tasks: 0,
        pick_tasks: 0,
    };
    let mut clock = 0.0;
    let mut index = 0;
    while clock < budget {
        let s = task_seed(seed, index);
        let stow = index % 2 == 0;
        let mut task = if stow {
            TaskSpec::random_stow(catalog, shape.stow_items, s)
        } else {
            TaskSpec::random_pick(catalog, shape.pick_storage_items, shape.pick_order_items, s)
        };
        let limit = if stow { STOW_TIME_LIMIT_S } else { PICK_TIME_LIMIT_S };
        task.time_limit_s = limit.min(budget - clock);
        let mut world = WorldState::spawn(&task, catalog, &params.world, s)?;
        world.clock = clock;
        let log = run_task(&mut world, &task, params, s);
        out.log.events.extend(log.events);
        clock = world.clock.max(clock);
        if stow {
            out.stow_tasks += 1;
        } else {
            out.pick_tasks += 1;
        }
        index += 1;
    }
    Ok(out)
}
