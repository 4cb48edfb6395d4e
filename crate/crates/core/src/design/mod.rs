//! Sequential design: candidate generation, the design loop and stopping.

mod designer;
mod lhs;
mod stop;

pub use designer::{
    run, Design, DesignRecord, Designer, DesignerConfig, FitSettings, GridClassification, InitialDesign, KernelChoice,
    LhsAllocation, MetricsGrid, NoiseMode, RefitSchedule, RunReport, TraceRow,
};
pub use lhs::{candidate_set, lattice_grid, lhs_candidates, regular_grid, snap_to_lattice};
pub use stop::{stop_rule, STOP_PATIENCE, STOP_WINDOW};
