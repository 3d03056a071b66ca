use serde::{Deserialize, Serialize};

/// Signed event: `+i` when node `i` (1-based) escapes above the upper
/// threshold, `-i` when it falls back below the lower one.
pub type SignedNode = i32;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopCondition {
    /// Stop when every node is above the upper threshold.
    #[default]
    AllAbove,
    /// Stop at the first event of any sign.
    FirstEvent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EscapeRecord {
    pub realisation: u64,
    pub events: Vec<(f64, SignedNode)>,
    /// Time of each node's first escape.
    pub first_escape_times: Vec<Option<f64>>,
    /// Time at which the stop condition was met.
    pub completion_time: Option<f64>,
    pub completed: bool,
    /// Latest escape that started from the all-below state, as `(time, node)`.
    pub last_departure: Option<(f64, SignedNode)>,
}

impl EscapeRecord {
    pub fn has_return(&self) -> bool {
        self.events.iter().any(|&(_, id)| id < 0)
    }

    pub fn sequence(&self) -> Vec<SignedNode> {
        self.events.iter().map(|&(_, id)| id).collect()
    }
}

/// Per-node two-state automaton with the hysteresis band `[xi_prime, xi]`.
#[derive(Clone, Debug)]
pub struct EventDetector {
    xi: f64,
    xi_prime: f64,
    above: Vec<bool>,
    n_above: usize,
    stop: StopCondition,
    record: EscapeRecord,
}

impl EventDetector {
    /// Nodes start above when they start beyond `xi`.
    pub fn new(
        initial: &[f64],
        xi: f64,
        xi_prime: f64,
        stop: StopCondition,
        realisation: u64,
    ) -> Self {
        let above: Vec<bool> = initial.iter().map(|&x| x > xi).collect();
        let n_above = above.iter().filter(|a| **a).count();
        Self {
            xi,
            xi_prime,
            n_above,
            stop,
            record: EscapeRecord {
                realisation,
                events: Vec::new(),
                first_escape_times: vec![None; initial.len()],
                completion_time: None,
                completed: false,
                last_departure: None,
            },
            above,
        }
    }

    /// Feeds the state at time `t`. Returns `true` once the stop condition holds.
    #[inline]
    pub fn observe(&mut self, t: f64, x: &[f64]) -> bool {
        let mut fired = false;
        for (i, &v) in x.iter().enumerate() {
            if !self.above[i] && v > self.xi {
                if self.n_above == 0 {
                    self.record.last_departure = Some((t, i as i32 + 1));
                }
                self.above[i] = true;
                self.n_above += 1;
                self.record.events.push((t, i as i32 + 1));
                self.record.first_escape_times[i].get_or_insert(t);
                fired = true;
            } else if self.above[i] && v < self.xi_prime {
                self.above[i] = false;
                self.n_above -= 1;
                self.record.events.push((t, -(i as i32 + 1)));
                fired = true;
            }
        }
        let done = match self.stop {
            StopCondition::AllAbove => self.n_above == self.above.len(),
            StopCondition::FirstEvent => fired,
        };
        if done {
            self.record.completed = true;
            self.record.completion_time = Some(t);
        }
        done
    }

    pub fn finish(self) -> EscapeRecord {
        self.record
    }
}

/// Runs the automaton over a sampled trajectory. The first sample sets the
/// initial above/below state.
pub fn detect_events<I, S>(
    trajectory: I,
    xi: f64,
    xi_prime: f64,
    stop: StopCondition,
) -> EscapeRecord
where
    I: IntoIterator<Item = (f64, S)>,
    S: AsRef<[f64]>,
{
    let mut it = trajectory.into_iter();
    let Some((_, x0)) = it.next() else {
        return EscapeRecord {
            realisation: 0,
            events: Vec::new(),
            first_escape_times: Vec::new(),
            completion_time: None,
            completed: false,
            last_departure: None,
        };
    };
    let mut d = EventDetector::new(x0.as_ref(), xi, xi_prime, stop, 0);
    for (t, x) in it {
        if d.observe(t, x.as_ref()) {
            break;
        }
    }
    d.finish()
}

/// Order of escape after cancelling each return against the escape of the
/// same node that preceded it.
pub fn final_order(sequence: &[SignedNode]) -> Vec<SignedNode> {
    let mut out: Vec<SignedNode> = Vec::with_capacity(sequence.len());
    for &id in sequence {
        if id > 0 {
            out.push(id);
        } else if let Some(pos) = out.iter().rposition(|&e| e == -id) {
            out.remove(pos);
        }
    }
    out
}
