//! Discrete-event execution of render tasks. Every resource serves its
//! queue first come first served; a task becomes ready at its enqueue time
//! once its dependency has finished.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, VecDeque};
use std::io::Write;

use crate::task::{RenderTask, Resource, TaskKind};
use crate::RuntimeError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimelineEvent {
    pub task_id: usize,
    pub kind: TaskKind,
    pub resource: Resource,
    pub frame: Option<usize>,
    pub depends_on: Option<usize>,
    pub start_ps: u64,
    pub end_ps: u64,
    pub energy_nj: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameRecord {
    pub frame: usize,
    pub task_id: usize,
    pub kind: TaskKind,
    pub arrival_ps: u64,
    pub finish_ps: u64,
    pub energy_nj: f64,
}

impl FrameRecord {
    pub fn latency_ps(&self) -> u64 {
        self.finish_ps - self.arrival_ps
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Timeline {
    /// Ordered by start time, then task id.
    pub events: Vec<TimelineEvent>,
    pub frames: Vec<FrameRecord>,
}

#[derive(Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Event {
    // finishes sort before arrivals at the same instant
    Finish { id: usize },
    Arrive { id: usize },
}

pub fn simulate(tasks: &[RenderTask]) -> Result<Timeline, RuntimeError> {
    let index: HashMap<usize, usize> = tasks.iter().enumerate().map(|(i, t)| (t.id, i)).collect();
    if index.len() != tasks.len() {
        return Err(RuntimeError::Schedule("duplicate task id".into()));
    }
    for t in tasks {
        if let Some(d) = t.depends_on {
            if !index.contains_key(&d) {
                return Err(RuntimeError::Schedule(format!("task {} depends on unknown task {d}", t.id)));
            }
        }
    }
    let mut heap: BinaryHeap<Reverse<(u64, Event)>> = tasks.iter().map(|t| Reverse((t.enqueue_ps, Event::Arrive { id: t.id }))).collect();
    let mut queues: HashMap<Resource, VecDeque<usize>> = HashMap::new();
    let mut busy: HashMap<Resource, bool> = HashMap::new();
    let mut done: HashMap<usize, u64> = HashMap::new();
    let mut started: HashMap<usize, u64> = HashMap::new();

    while let Some(Reverse((now, ev))) = heap.pop() {
        match ev {
            Event::Arrive { id } => {
                queues.entry(tasks[index[&id]].resource).or_default().push_back(id);
            }
            Event::Finish { id } => {
                done.insert(id, now);
                busy.insert(tasks[index[&id]].resource, false);
            }
        }
        // start every head-of-queue task that can run now
        for r in Resource::ALL {
            if busy.get(&r).copied().unwrap_or(false) {
                continue;
            }
            let Some(q) = queues.get_mut(&r) else { continue };
            let Some(&id) = q.front() else { continue };
            let t = &tasks[index[&id]];
            if t.depends_on.is_some_and(|d| !done.contains_key(&d)) {
                continue;
            }
            q.pop_front();
            busy.insert(r, true);
            started.insert(id, now);
            heap.push(Reverse((now + t.duration_ps, Event::Finish { id })));
        }
    }

    if done.len() != tasks.len() {
        return Err(RuntimeError::Schedule("dependency cycle or head-of-line deadlock".into()));
    }
    let mut events: Vec<TimelineEvent> = tasks
        .iter()
        .map(|t| TimelineEvent {
            task_id: t.id,
            kind: t.kind,
            resource: t.resource,
            frame: t.frame,
            depends_on: t.depends_on,
            start_ps: started[&t.id],
            end_ps: done[&t.id],
            energy_nj: t.energy_nj,
        })
        .collect();
    events.sort_by_key(|e| (e.start_ps, e.task_id));
    let mut frames: Vec<FrameRecord> = tasks
        .iter()
        .filter_map(|t| {
            t.frame.map(|f| FrameRecord {
                frame: f,
                task_id: t.id,
                kind: t.kind,
                arrival_ps: t.enqueue_ps,
                finish_ps: done[&t.id],
                energy_nj: t.energy_nj,
            })
        })
        .collect();
    frames.sort_by_key(|f| f.frame);
    Ok(Timeline { events, frames })
}

impl Timeline {
    pub fn event(&self, task_id: usize) -> Option<&TimelineEvent> {
        self.events.iter().find(|e| e.task_id == task_id)
    }

    pub fn makespan_ps(&self) -> u64 {
        self.events.iter().map(|e| e.end_ps).max().unwrap_or(0)
    }

    pub fn total_energy_nj(&self) -> f64 {
        self.events.iter().map(|e| e.energy_nj).sum()
    }

    /// Energy of tasks that run on the device.
    pub fn device_energy_nj(&self) -> f64 {
        self.events.iter().filter(|e| e.resource != Resource::RemoteRenderer).map(|e| e.energy_nj).sum()
    }

    pub fn count(&self, kind: TaskKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    /// Tasks that started before their dependency finished.
    pub fn dependency_violations(&self) -> Vec<usize> {
        let end: HashMap<usize, u64> = self.events.iter().map(|e| (e.task_id, e.end_ps)).collect();
        self.events.iter().filter(|e| e.depends_on.is_some_and(|d| e.start_ps < end[&d])).map(|e| e.task_id).collect()
    }

    /// Pairs of tasks overlapping on one resource.
    pub fn exclusivity_violations(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for r in Resource::ALL {
            let mut on: Vec<&TimelineEvent> = self.events.iter().filter(|e| e.resource == r).collect();
            on.sort_by_key(|e| (e.start_ps, e.end_ps));
            for w in on.windows(2) {
                if w[1].start_ps < w[0].end_ps {
                    out.push((w[0].task_id, w[1].task_id));
                }
            }
        }
        out
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["task_id", "kind", "resource", "start", "end", "energy"])?;
        for e in &self.events {
            w.write_record([
                e.task_id.to_string(),
                e.kind.to_string(),
                e.resource.to_string(),
                e.start_ps.to_string(),
                e.end_ps.to_string(),
                format!("{:.3}", e.energy_nj),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Whether two events overlap in time.
pub fn concurrent(a: &TimelineEvent, b: &TimelineEvent) -> bool {
    a.start_ps < b.end_ps && b.start_ps < a.end_ps
}
