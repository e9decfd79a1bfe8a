use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock, Weak};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use pwr_advisor::scenario::{Sample, ScenarioConfig};

use crate::session::{History, LiveSession, RecommendationPayload};

/// Wall-clock period of the owner task.
pub const TICK: Duration = Duration::from_millis(50);
/// Most plant steps taken per tick, so edits are never starved.
const MAX_STEPS_PER_TICK: usize = 360;

/// Simulation clock of a session.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Clock {
    pub running: bool,
    /// Simulated seconds per wall second; 0 behaves like a pause.
    pub speedup: f64,
}

impl Default for Clock {
    fn default() -> Self {
        Clock {
            running: false,
            speedup: 1.0,
        }
    }
}

impl Clock {
    pub fn advancing(&self) -> bool {
        self.running && self.speedup > 0.0
    }
}

/// Read-side snapshot, replaced by the owner after every batch of steps.
#[derive(Debug, Default)]
pub(crate) struct Published {
    pub history: History,
    pub recommendation: Option<Arc<RecommendationPayload>>,
    pub now: f64,
    /// Incremented on every publication.
    pub version: u64,
    /// Last plant or engine failure; the clock is paused when it occurs.
    pub error: Option<String>,
}

/// One session: the live simulation (owned by its task and by edit
/// handlers, one at a time), the published snapshot, and the clock.
#[derive(Debug)]
pub struct SessionHandle {
    pub id: String,
    pub(crate) live: Arc<Mutex<LiveSession>>,
    pub(crate) published: RwLock<Published>,
    clock: Mutex<Clock>,
    /// Simulated seconds owed to the plant by the wall clock.
    owed: Mutex<f64>,
}

impl SessionHandle {
    fn new(id: String, live: LiveSession) -> Self {
        let mut history = History::default();
        history.push(live.sample());
        SessionHandle {
            id,
            published: RwLock::new(Published {
                history,
                recommendation: None,
                now: live.now(),
                version: 0,
                error: None,
            }),
            live: Arc::new(Mutex::new(live)),
            clock: Mutex::new(Clock::default()),
            owed: Mutex::new(0.0),
        }
    }

    pub fn clock(&self) -> Clock {
        *self.clock.lock().expect("clock lock")
    }

    pub fn set_clock(&self, clock: Clock) {
        *self.clock.lock().expect("clock lock") = clock;
        if !clock.advancing() {
            *self.owed.lock().expect("owed lock") = 0.0;
        }
    }

    /// Current simulated time.
    pub fn now(&self) -> f64 {
        self.published.read().expect("snapshot lock").now
    }

    pub fn version(&self) -> u64 {
        self.published.read().expect("snapshot lock").version
    }

    pub fn samples_since(&self, since: f64) -> Vec<Sample> {
        self.published.read().expect("snapshot lock").history.since(since)
    }

    pub fn recommendation(&self) -> Option<Arc<RecommendationPayload>> {
        self.published.read().expect("snapshot lock").recommendation.clone()
    }

    pub fn last_error(&self) -> Option<String> {
        self.published.read().expect("snapshot lock").error.clone()
    }

    /// Run `f` on the live session and publish the result. Blocks while the
    /// owner is stepping; call from a blocking context.
    pub fn with_live<R>(&self, f: impl FnOnce(&mut LiveSession) -> R) -> R {
        let mut live = self.live.lock().expect("session lock");
        let out = f(&mut live);
        self.publish(&live, Vec::new(), None);
        out
    }

    fn publish(&self, live: &LiveSession, samples: Vec<Sample>, error: Option<String>) {
        let payload = live.payload().map(Arc::new);
        let mut p = self.published.write().expect("snapshot lock");
        for s in samples {
            p.history.push(s);
        }
        let changed = match (&p.recommendation, &payload) {
            (Some(a), Some(b)) => a.recommendation.issued_at != b.recommendation.issued_at || a.strategy != b.strategy,
            (None, None) => false,
            _ => true,
        };
        if changed {
            p.recommendation = payload;
        }
        p.now = live.now();
        p.version += 1;
        if error.is_some() {
            p.error = error;
        }
    }

    /// Take up to `max` plant steps and publish them. Stops (and pauses the
    /// clock) on the first failure.
    pub fn advance(&self, steps: usize) -> Result<(), String> {
        let mut live = self.live.lock().expect("session lock");
        let mut samples = Vec::with_capacity(steps);
        let mut error = None;
        for _ in 0..steps {
            match live.step() {
                Ok(s) => samples.push(s),
                Err(e) => {
                    error = Some(format!("t = {} s: {e}", live.now()));
                    break;
                }
            }
        }
        self.publish(&live, samples, error.clone());
        match error {
            Some(e) => {
                self.set_clock(Clock {
                    running: false,
                    ..self.clock()
                });
                Err(e)
            }
            None => Ok(()),
        }
    }

    /// Credit `wall` of elapsed time and return the number of whole plant
    /// steps now due.
    fn due_steps(&self, wall: Duration, plant_step: f64) -> usize {
        let clock = self.clock();
        let mut owed = self.owed.lock().expect("owed lock");
        if !clock.advancing() {
            *owed = 0.0;
            return 0;
        }
        *owed += clock.speedup * wall.as_secs_f64();
        let steps = (*owed / plant_step).floor();
        let take = steps.min(MAX_STEPS_PER_TICK as f64);
        *owed -= take * plant_step;
        take as usize
    }
}

/// Owner loop: advance the plant in step with the wall clock until the
/// session is dropped.
async fn own(handle: Weak<SessionHandle>, plant_step: f64) {
    let mut last = Instant::now();
    loop {
        tokio::time::sleep(TICK).await;
        let Some(h) = handle.upgrade() else { return };
        let now = Instant::now();
        let steps = h.due_steps(now - last, plant_step);
        last = now;
        if steps > 0 {
            let h2 = Arc::clone(&h);
            let result = tokio::task::spawn_blocking(move || h2.advance(steps)).await;
            if let Ok(Err(e)) = result {
                tracing::warn!(session = %h.id, "plant stopped: {e}");
            }
        }
    }
}

/// All sessions of a server.
#[derive(Debug, Clone)]
pub struct AppState {
    inner: Arc<Registry>,
}

#[derive(Debug)]
struct Registry {
    sessions: RwLock<HashMap<String, Arc<SessionHandle>>>,
    next_id: AtomicU64,
    default_scenario: ScenarioConfig,
}

impl AppState {
    /// `default_scenario` is used when a create request has no body.
    pub fn new(default_scenario: ScenarioConfig) -> Self {
        AppState {
            inner: Arc::new(Registry {
                sessions: RwLock::new(HashMap::new()),
                next_id: AtomicU64::new(1),
                default_scenario,
            }),
        }
    }

    pub fn default_scenario(&self) -> &ScenarioConfig {
        &self.inner.default_scenario
    }

    /// Create a session at the scenario's initial equilibrium, clock paused,
    /// and start its owner task. Must be called inside a Tokio runtime.
    pub fn create(&self, config: ScenarioConfig) -> Result<Arc<SessionHandle>, pwr_advisor::ScenarioError> {
        let plant_step = config.plant_step;
        let live = LiveSession::new(config)?;
        let id = format!("s{}", self.inner.next_id.fetch_add(1, Ordering::Relaxed));
        let handle = Arc::new(SessionHandle::new(id.clone(), live));
        self.inner
            .sessions
            .write()
            .expect("registry lock")
            .insert(id, Arc::clone(&handle));
        tokio::spawn(own(Arc::downgrade(&handle), plant_step));
        Ok(handle)
    }

    pub fn get(&self, id: &str) -> Option<Arc<SessionHandle>> {
        self.inner.sessions.read().expect("registry lock").get(id).cloned()
    }

    pub fn remove(&self, id: &str) -> bool {
        self.inner.sessions.write().expect("registry lock").remove(id).is_some()
    }

    pub fn len(&self) -> usize {
        self.inner.sessions.read().expect("registry lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
