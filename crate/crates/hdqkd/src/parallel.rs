//! Frame-parallel Monte Carlo and order-preserving parallel map.

use std::io::Write;
use std::time::Instant;

use hdqkd_core::montecarlo::{SimCounts, SimReport, Simulator, TrialConfig};
use serde::{Deserialize, Serialize};

use crate::AppError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub workers: usize,
    pub wall_clock_s: f64,
    pub states_per_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutput {
    pub report: SimReport,
    pub metrics: RunMetrics,
}

/// Contiguous split of `0..total` into `parts` nearly equal ranges.
pub fn partition(total: u64, parts: usize) -> Vec<std::ops::Range<u64>> {
    let parts = parts.max(1) as u64;
    (0..parts)
        .map(|i| (total * i / parts)..(total * (i + 1) / parts))
        .filter(|r| !r.is_empty())
        .collect()
}

/// Runs the simulation on `workers` threads. Totals do not depend on
/// `workers` because every frame owns its random stream.
pub fn run_partitioned(config: &TrialConfig, workers: usize) -> Result<SimOutput, AppError> {
    if workers == 0 {
        return Err(AppError::Config("workers: must be >= 1".into()));
    }
    let sim = Simulator::new(*config)?;
    let start = Instant::now();
    let ranges = partition(config.states_to_send, workers);
    let parts: Vec<SimCounts> = std::thread::scope(|s| {
        let handles: Vec<_> = ranges
            .into_iter()
            .map(|r| {
                let sim = &sim;
                s.spawn(move || {
                    let mut c = SimCounts::default();
                    sim.simulate_range(r, &mut c, |_| {});
                    c
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    });
    let mut counts = SimCounts::default();
    for p in &parts {
        counts.merge(p);
    }
    Ok(finish(config, counts, workers, start))
}

/// Single-threaded run that streams every conclusive click to `log` as one
/// JSON object per line.
pub fn run_with_event_log<W: Write>(
    config: &TrialConfig,
    mut log: W,
) -> Result<SimOutput, AppError> {
    let sim = Simulator::new(*config)?;
    let start = Instant::now();
    let mut counts = SimCounts::default();
    let mut io_err = None;
    sim.simulate_range(0..config.states_to_send, &mut counts, |e| {
        if io_err.is_none() {
            let line = serde_json::to_string(e).expect("event serializes");
            if let Err(err) = writeln!(log, "{line}") {
                io_err = Some(err);
            }
        }
    });
    if let Some(e) = io_err {
        return Err(e.into());
    }
    log.flush()?;
    Ok(finish(config, counts, 1, start))
}

fn finish(config: &TrialConfig, counts: SimCounts, workers: usize, start: Instant) -> SimOutput {
    let wall = start.elapsed().as_secs_f64();
    SimOutput {
        report: SimReport::from_counts(counts, config.bookkeeping),
        metrics: RunMetrics {
            workers,
            wall_clock_s: wall,
            states_per_s: if wall > 0.0 {
                config.states_to_send as f64 / wall
            } else {
                0.0
            },
        },
    }
}

/// Applies `f` to every item on up to `workers` threads, keeping input order.
pub fn map_ordered<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let workers = workers.clamp(1, items.len().max(1));
    if workers == 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(workers);
    std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|c| {
                let f = &f;
                s.spawn(move || c.iter().map(f).collect::<Vec<R>>())
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use hdqkd_core::channel::{IntensitySettings, LinkParams};
    use hdqkd_core::Dimension;

    #[test]
    fn partition_covers_range() {
        for (total, parts) in [(10, 3), (3, 8), (0, 2), (1_000_001, 4)] {
            let r = partition(total, parts);
            assert_eq!(r.iter().map(|r| r.end - r.start).sum::<u64>(), total);
            for w in r.windows(2) {
                assert_eq!(w[0].end, w[1].start);
            }
        }
    }

    #[test]
    fn workers_do_not_change_counts() {
        let s = IntensitySettings {
            mu: 0.5,
            nu: 0.18,
            p_mu: 0.7,
            p_x_alice: 0.5,
        };
        let cfg = TrialConfig::new(
            9,
            40_001,
            s,
            LinkParams::lab(Dimension::Four, 25.0),
            Dimension::Four,
        )
        .unwrap();
        let one = run_partitioned(&cfg, 1).unwrap().report;
        for w in [2, 3, 8] {
            assert_eq!(run_partitioned(&cfg, w).unwrap().report, one);
        }
        let mut log = Vec::new();
        let logged = run_with_event_log(&cfg, &mut log).unwrap().report;
        assert_eq!(logged, one);
        let lines = log.iter().filter(|&&b| b == b'\n').count();
        assert!(lines as u64 >= one.counts.detections.iter().flatten().sum::<u64>());
    }

    #[test]
    fn map_keeps_order() {
        let v: Vec<u32> = (0..37).collect();
        assert_eq!(
            map_ordered(&v, 5, |x| x * 2),
            v.iter().map(|x| x * 2).collect::<Vec<_>>()
        );
    }
}
