use std::collections::HashMap;
use std::sync::{Arc, Mutex as StdMutex};
use std::time::{Duration, Instant};

use predint_core::complexity::CompressorSpec;
use predint_core::maze::{evaluate, max_oracle, Action, MazeAgent, MazeWorld, Step};
use predint_core::measure::{measure, Baseline, UmweltBreakdown, DEFAULT_ALPHA};
use predint_core::{MeasurementResult, UmweltRecord};
use serde::Serialize;
use tokio::sync::{watch, Mutex};
use uuid::Uuid;

use crate::api::{ActionView, ApiError, EventKind, SessionEvent, StateView};

pub const DEFAULT_IDLE: Duration = Duration::from_secs(30 * 60);

#[derive(Clone, Debug, Serialize)]
pub struct Measurement {
    pub result: MeasurementResult,
    pub umwelts: Vec<UmweltBreakdown>,
    /// Intelligence over the same scope with the best possible predictions.
    pub max_intelligence: f64,
}

pub struct Session {
    pub id: Uuid,
    pub world: MazeWorld,
    pub agent: MazeAgent,
    log: Vec<SessionEvent>,
    notify: watch::Sender<u64>,
    cache: Option<(Vec<String>, Measurement)>,
}

impl Session {
    fn new(id: Uuid, world: MazeWorld, learning: bool) -> Self {
        let mut agent = MazeAgent::new(&world);
        agent.learning = learning;
        Self {
            id,
            world,
            agent,
            log: Vec::new(),
            notify: watch::channel(0).0,
            cache: None,
        }
    }

    pub fn view(&self) -> StateView {
        StateView::new(self)
    }

    pub fn last_seq(&self) -> u64 {
        self.log.last().map_or(0, |e| e.seq)
    }

    pub fn events_after(&self, seq: u64) -> Vec<SessionEvent> {
        let start = self.log.partition_point(|e| e.seq <= seq);
        self.log[start..].to_vec()
    }

    pub fn subscribe(&self) -> watch::Receiver<u64> {
        self.notify.subscribe()
    }

    fn emit(&mut self, kind: EventKind, data: serde_json::Value) -> u64 {
        let seq = self.last_seq() + 1;
        self.log.push(SessionEvent::new(seq, kind, data));
        self.notify.send_replace(seq);
        seq
    }

    pub fn act(&mut self, action: Action) -> Result<(Step, u64), ApiError> {
        let step = self
            .agent
            .step(&self.world, action)
            .map_err(ApiError::internal)?;
        if self.agent.learning {
            self.cache = None;
        }
        let view = ActionView::new(&step, self.last_seq() + 1);
        let seq = self.emit(
            EventKind::Action,
            serde_json::to_value(view).expect("serializable"),
        );
        Ok((step, seq))
    }

    /// Returns whether the flag changed.
    pub fn set_learning(&mut self, on: bool) -> bool {
        if self.agent.learning == on {
            return false;
        }
        self.agent.learning = on;
        self.emit(EventKind::Learning, serde_json::json!({ "learning": on }));
        true
    }

    /// Full evaluation of the session maze plus any `others`, reusing the
    /// previous result until the transition table changes.
    pub fn intelligence(
        &mut self,
        others: &[MazeWorld],
        compressor: &CompressorSpec,
    ) -> Result<Measurement, ApiError> {
        let mut scope: Vec<&MazeWorld> = vec![&self.world];
        for w in others {
            if scope.iter().all(|s| s.name() != w.name()) {
                scope.push(w);
            }
        }
        let key: Vec<String> = scope.iter().map(|w| w.name().to_owned()).collect();
        if let Some((k, m)) = &self.cache {
            if *k == key {
                return Ok(m.clone());
            }
        }
        let run = |records: Vec<UmweltRecord>| {
            measure(&records, compressor, &Baseline::Uniform, DEFAULT_ALPHA)
                .map_err(ApiError::internal)
        };
        let records = scope
            .iter()
            .map(|w| evaluate(w, &self.agent.table))
            .collect::<Result<Vec<_>, _>>()
            .map_err(ApiError::internal)?;
        let best = scope
            .iter()
            .map(|w| max_oracle(w))
            .collect::<Result<Vec<_>, _>>()
            .map_err(ApiError::internal)?;
        let (result, umwelts) = run(records)?;
        let measurement = Measurement {
            result,
            umwelts,
            max_intelligence: run(best)?.0.intelligence,
        };
        self.emit(
            EventKind::Intelligence,
            serde_json::json!({
                "scope": key,
                "intelligence": measurement.result.intelligence,
                "pm_total": measurement.result.pm_total,
                "pm_per_umwelt": measurement.result.pm_per_umwelt,
            }),
        );
        self.cache = Some((key, measurement.clone()));
        Ok(measurement)
    }
}

pub struct SessionHandle {
    pub session: Mutex<Session>,
    last_used: StdMutex<Instant>,
}

impl SessionHandle {
    fn touch(&self) {
        *self.last_used.lock().expect("clock lock") = Instant::now();
    }

    fn idle_since(&self) -> Instant {
        *self.last_used.lock().expect("clock lock")
    }
}

/// All live sessions plus the mazes that may be named in requests.
pub struct Registry {
    sessions: StdMutex<HashMap<Uuid, Arc<SessionHandle>>>,
    library: Vec<MazeWorld>,
    idle: Duration,
    pub compressor: CompressorSpec,
}

impl Registry {
    pub fn new(library: Vec<MazeWorld>, idle: Duration) -> Self {
        Self {
            sessions: StdMutex::default(),
            library,
            idle,
            compressor: CompressorSpec::default(),
        }
    }

    pub fn library(&self) -> &[MazeWorld] {
        &self.library
    }

    pub fn maze(&self, name: &str) -> Option<&MazeWorld> {
        self.library.iter().find(|w| w.name() == name)
    }

    pub fn create(&self, world: MazeWorld, learning: bool) -> Arc<SessionHandle> {
        let id = Uuid::new_v4();
        let handle = Arc::new(SessionHandle {
            session: Mutex::new(Session::new(id, world, learning)),
            last_used: StdMutex::new(Instant::now()),
        });
        self.sessions
            .lock()
            .expect("registry lock")
            .insert(id, handle.clone());
        handle
    }

    pub fn get(&self, id: &str) -> Result<Arc<SessionHandle>, ApiError> {
        let unknown = || ApiError::not_found(format!("no session `{id}`"));
        let id: Uuid = id.parse().map_err(|_| unknown())?;
        let handle = self
            .sessions
            .lock()
            .expect("registry lock")
            .get(&id)
            .cloned()
            .ok_or_else(unknown)?;
        handle.touch();
        Ok(handle)
    }

    pub fn len(&self) -> usize {
        self.sessions.lock().expect("registry lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&self) {
        self.sessions.lock().expect("registry lock").clear();
    }

    /// Drops sessions unused for longer than the idle limit as of `now`.
    /// Open event streams on a dropped session end.
    pub fn expire_idle(&self, now: Instant) -> usize {
        let mut sessions = self.sessions.lock().expect("registry lock");
        let before = sessions.len();
        sessions.retain(|_, h| now.saturating_duration_since(h.idle_since()) <= self.idle);
        before - sessions.len()
    }
}
