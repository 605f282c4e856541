//! The simulation thread. One thread owns the [`Simulation`]; HTTP handlers
//! send it jobs over a channel and await the result, so every query and
//! mutation is serialized and every response is a consistent snapshot.

use std::sync::mpsc::{self, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use tbo_foc::sim::Simulation;
use tokio::sync::oneshot;

/// How often the thread advances simulated time while running.
const TICK: Duration = Duration::from_millis(50);

/// Maps wall-clock time to simulated time.
#[derive(Debug, Clone)]
pub struct Clock {
    paused: bool,
    speed: f64,
    sim_anchor_ms: i64,
    wall_anchor: Instant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClockState {
    pub now_ms: i64,
    pub paused: bool,
    pub speed: f64,
    pub finished: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockAction {
    Pause,
    Resume,
    Speed,
}

impl Clock {
    pub fn new(start_ms: i64, speed: f64, paused: bool) -> Self {
        Clock {
            paused,
            speed,
            sim_anchor_ms: start_ms,
            wall_anchor: Instant::now(),
        }
    }

    /// Simulated time the clock shows at `wall`.
    pub fn target_ms(&self, wall: Instant) -> i64 {
        if self.paused {
            return self.sim_anchor_ms;
        }
        let elapsed = wall.saturating_duration_since(self.wall_anchor).as_secs_f64();
        self.sim_anchor_ms + (elapsed * self.speed * 1000.0) as i64
    }

    fn reanchor(&mut self, wall: Instant) {
        self.sim_anchor_ms = self.target_ms(wall);
        self.wall_anchor = wall;
    }

    pub fn pause(&mut self) {
        self.reanchor(Instant::now());
        self.paused = true;
    }

    pub fn resume(&mut self) {
        self.wall_anchor = Instant::now();
        self.paused = false;
    }

    /// Change the multiplier; `speed` must be positive and finite.
    pub fn set_speed(&mut self, speed: f64) -> Result<(), String> {
        if !(speed.is_finite() && speed > 0.0) {
            return Err(format!("speed must be a positive number, got {speed}"));
        }
        self.reanchor(Instant::now());
        self.speed = speed;
        Ok(())
    }

    pub fn is_paused(&self) -> bool {
        self.paused
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    /// Never show a time behind the simulation (after a manual advance).
    fn catch_up(&mut self, sim_now_ms: i64) {
        if self.target_ms(Instant::now()) < sim_now_ms {
            self.sim_anchor_ms = sim_now_ms;
            self.wall_anchor = Instant::now();
        }
    }
}

/// What the simulation thread owns.
pub struct Engine {
    pub sim: Simulation,
    pub clock: Clock,
    /// Set when the simulation failed; the clock is then paused for good.
    pub fault: Option<String>,
}

impl Engine {
    pub fn clock_state(&self) -> ClockState {
        ClockState {
            now_ms: self.sim.now_ms(),
            paused: self.clock.is_paused(),
            speed: self.clock.speed(),
            finished: self.sim.is_finished(),
        }
    }

    /// Run the simulation up to `t_ms` regardless of the clock.
    pub fn advance_to(&mut self, t_ms: i64) {
        if self.fault.is_some() {
            return;
        }
        if let Err(e) = self.sim.run_until(t_ms) {
            self.fault = Some(e.to_string());
            self.clock.pause();
        }
        self.clock.catch_up(self.sim.now_ms());
    }

    fn tick(&mut self) {
        if !self.clock.is_paused() && self.fault.is_none() {
            let target = self.clock.target_ms(Instant::now());
            if target > self.sim.now_ms() {
                self.advance_to(target);
            }
        }
    }
}

type Job = Box<dyn FnOnce(&mut Engine) + Send>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EngineGone;

impl std::fmt::Display for EngineGone {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("simulation thread has stopped")
    }
}

/// Cloneable handle to the simulation thread.
#[derive(Clone)]
pub struct SimHandle {
    tx: mpsc::Sender<Job>,
}

impl SimHandle {
    /// Start the thread. The clock starts at the first scheduled event.
    pub fn spawn(sim: Simulation, speed: f64, paused: bool) -> SimHandle {
        let start = sim.next_event_ms().unwrap_or(sim.now_ms());
        let mut engine = Engine {
            sim,
            clock: Clock::new(start, speed, paused),
            fault: None,
        };
        engine.advance_to(start);
        let (tx, rx) = mpsc::channel::<Job>();
        thread::Builder::new()
            .name("simulation".into())
            .spawn(move || loop {
                engine.tick();
                match rx.recv_timeout(TICK) {
                    Ok(job) => job(&mut engine),
                    Err(RecvTimeoutError::Timeout) => {}
                    Err(RecvTimeoutError::Disconnected) => break,
                }
            })
            .expect("spawn simulation thread");
        SimHandle { tx }
    }

    /// Run `f` on the simulation thread and return its result.
    pub async fn call<R, F>(&self, f: F) -> Result<R, EngineGone>
    where
        R: Send + 'static,
        F: FnOnce(&mut Engine) -> R + Send + 'static,
    {
        let (tx, rx) = oneshot::channel();
        let job: Job = Box::new(move |e| {
            let _ = tx.send(f(e));
        });
        self.tx.send(job).map_err(|_| EngineGone)?;
        rx.await.map_err(|_| EngineGone)
    }
}
