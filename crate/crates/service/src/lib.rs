//! HTTP/JSON session service for the load-following advisor.
//!
//! Each session owns a simulated plant and an advisory engine. A per-session
//! owner task advances the plant in fixed steps at `speedup` times wall-clock
//! speed and replans at every 10-minute simulated boundary; handlers read
//! from a published snapshot and never wait for plant stepping.
//!
//! Routes:
//!
//! | method | path | |
//! |---|---|---|
//! | POST | `/sessions` | create (scenario JSON; empty body uses the default) |
//! | DELETE | `/sessions/{id}` | drop a session |
//! | POST | `/sessions/{id}/profile` | replace the turbine schedule |
//! | POST | `/sessions/{id}/strategy` | switch strategy |
//! | POST | `/sessions/{id}/clock` | run / pause, speedup |
//! | GET | `/sessions/{id}/state?since=` | sample history after `since` |
//! | GET | `/sessions/{id}/recommendation` | latest recommendation (204 before the first) |

pub mod session;

mod api;
mod registry;

pub use api::{router, ApiError, ClockCommand, ClockMode, Created, StatePage};
pub use registry::{AppState, Clock, SessionHandle, TICK};
pub use session::{EditAck, History, LiveSession, RecommendationPayload, SessionError, HISTORY_CAPACITY, MAX_PREDICTION_POINTS};

/// Bind `addr` and serve until the process is stopped.
pub async fn serve(state: AppState, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
