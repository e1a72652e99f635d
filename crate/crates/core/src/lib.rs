//! Coverage path planning for fields worked as a headland loop plus parallel
//! interior lanes.
//!
//! The library plans full-field coverage routes for three lane-visit patterns
//! (meander, skip-and-fill, and skip-and-fill with merged headland coverage),
//! routes depot returns over the network of already-established wheel traces,
//! and simulates missions under a finite tank capacity.
//!
//! Pipeline:
//!
//! 1. [`field`] — parse-level field description, headland generation by inward
//!    contour offset, lane slicing, and normalisation into a frame where lanes
//!    are vertical and the entrance sits in a canonical region.
//! 2. [`graph`] — the transition graph over headland and lanes, trace
//!    admissibility, and shortest-path queries.
//! 3. [`plan`] — the three pattern planners and geometric realisation with
//!    turn fillets.
//! 4. [`sim`] — capacity-limited mission execution with depot returns and
//!    work resumption.
//! 5. [`oracle`] — closed-form route-length expressions for rectangular
//!    fields, used as an independent check of the graph machinery.

pub mod field;
pub mod fixtures;
pub mod geom;
pub mod graph;
pub mod oracle;
pub mod plan;
pub mod sim;

pub use field::{EntranceClass, FieldError, FieldSpec, NormalizedField, Skeleton, TransformChain};
pub use geom::Point2;
pub use graph::{GraphError, Heading, NetPos, RoutePath, RouteStep, TransitionGraph};
pub use plan::{CoveragePlan, Pattern, PlanError, PlanMove};
pub use sim::{MissionLog, RatePredictor, SimError, SimPolicy, TankState, TriggerMode};
