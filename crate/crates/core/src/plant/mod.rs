//! Two-node PWR core, CVCS delay line, Mode A rod controller and turbine.

mod dynamics;
mod equilibrium;
mod params;
mod profile;
mod state;

pub use dynamics::{
    axial_offset, axial_shape, criticality_closure, reactivity, refresh_algebraic, rod_controller, step, N_MAX,
};
pub use equilibrium::{equilibrium, equilibrium_imbalances};
pub use params::{Burnup, PlantParams, PRESET_VERSION};
pub use profile::{move_toward, turbine_profile_eval, PowerProfile, ProfileSegment, PROFILE_GRID_S};
pub use state::{node_powers, ControlInput, CoreState, CvcsQueue};

pub(crate) use dynamics::poison_rates;
