//! Per-robot controllers and the action-selection rules they share.

mod baseline;
mod controller;
mod location;
mod selection;

pub use baseline::{delivery_point, BaselineController, BaselineKind, BaselineSettings};
pub use controller::{
    Action, AgreementRecord, ControllerSettings, Explorer, Mode, Observation, Outcome,
    RendezvousController, Route, Status,
};
pub use location::{farthest_points, frontier_center, knn_centroids, synchronize, update_location};
pub use selection::{
    assign_exhaustive, assign_greedy, select_joint, select_single, utility, utility_from,
    utility_matrix, welfare, TeamMember, UtilityParams,
};
