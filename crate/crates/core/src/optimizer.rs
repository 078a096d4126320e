//! Parameter search over (mu, nu/mu, p_mu, p_x) for the analytic key rate.
//!
//! A coarse grid seeds a Nelder-Mead simplex that runs in logit coordinates of
//! the box, so every vertex stays feasible. The best point ever evaluated is
//! returned, which makes the result monotone in the evaluation budget.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::channel::{IntensitySettings, LinkParams};
use crate::finite_key::{analytic_key_rate, SecurityParams};
use crate::states::Dimension;
use crate::{Error, Result};

const DIMS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpace {
    pub mu: (f64, f64),
    /// Bounds on nu / mu.
    pub ratio: (f64, f64),
    pub p_mu: (f64, f64),
    pub p_x: (f64, f64),
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            mu: (0.05, 0.9),
            ratio: (0.05, 0.9),
            p_mu: (0.05, 0.95),
            p_x: (0.01, 0.5),
        }
    }
}

impl SearchSpace {
    /// Fixes `p_x` to a single value.
    pub fn with_fixed_p_x(mut self, p_x: f64) -> Self {
        self.p_x = (p_x, p_x);
        self
    }

    fn bounds(&self) -> [(f64, f64); DIMS] {
        [self.mu, self.ratio, self.p_mu, self.p_x]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in ["mu", "ratio", "p_mu", "p_x"].iter().zip(self.bounds()) {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::invalid(alloc::format!(
                    "search bounds for {name} must satisfy lo <= hi"
                )));
            }
        }
        let open_unit = |(lo, hi): (f64, f64)| lo > 0.0 && hi < 1.0;
        if !(self.mu.0 > 0.0
            && open_unit(self.ratio)
            && open_unit(self.p_mu)
            && open_unit(self.p_x))
        {
            return Err(Error::invalid(
                "search space must keep mu > 0 and ratio, p_mu, p_x inside (0, 1)",
            ));
        }
        Ok(())
    }

    pub fn settings(&self, x: &[f64; DIMS]) -> IntensitySettings {
        IntensitySettings {
            mu: x[0],
            nu: x[0] * x[1],
            p_mu: x[2],
            p_x_alice: x[3],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimOptions {
    /// Grid points per coordinate.
    pub grid: usize,
    pub max_iterations: usize,
    /// Relative spread of simplex values at which Nelder-Mead stops.
    pub rel_tol: f64,
}

impl Default for OptimOptions {
    fn default() -> Self {
        OptimOptions {
            grid: 8,
            max_iterations: 200,
            rel_tol: 1e-4,
        }
    }
}

impl OptimOptions {
    pub fn grid_size(&self) -> usize {
        self.grid.pow(DIMS as u32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub evaluation: usize,
    pub settings: IntensitySettings,
    pub skr_bps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimResult {
    pub best: IntensitySettings,
    pub best_skr: f64,
    pub evaluations: usize,
    pub trace: Vec<TracePoint>,
    /// No evaluated point produced a positive key.
    pub zero_rate: bool,
}

/// Analytic secret key rate at one parameter point.
pub fn evaluate(
    settings: &IntensitySettings,
    link: &LinkParams,
    sec: &SecurityParams,
    dim: Dimension,
) -> Result<f64> {
    settings.validate()?;
    analytic_key_rate(settings, link, sec, dim).map(|r| r.skr_bps)
}

struct Search<'a> {
    space: &'a SearchSpace,
    link: &'a LinkParams,
    sec: &'a SecurityParams,
    dim: Dimension,
    budget: usize,
    trace: Vec<TracePoint>,
    best: Option<(f64, [f64; DIMS])>,
}

fn better(a: (f64, &[f64; DIMS]), b: (f64, &[f64; DIMS])) -> bool {
    // higher rate wins, ties go to the lexicographically smaller point
    a.0 > b.0 || (a.0 == b.0 && a.1.partial_cmp(b.1) == Some(core::cmp::Ordering::Less))
}

impl Search<'_> {
    fn exhausted(&self) -> bool {
        self.trace.len() >= self.budget
    }

    fn eval(&mut self, x: [f64; DIMS]) -> Result<f64> {
        let settings = self.space.settings(&x);
        // nearly degenerate intensities score zero inside the search
        let skr = match evaluate(&settings, self.link, self.sec, self.dim) {
            Err(Error::IllConditioned { .. }) => 0.0,
            r => r?,
        };
        self.trace.push(TracePoint {
            evaluation: self.trace.len(),
            settings,
            skr_bps: skr,
        });
        let replace = match &self.best {
            None => true,
            Some((f, p)) => better((skr, &x), (*f, p)),
        };
        if replace {
            self.best = Some((skr, x));
        }
        Ok(skr)
    }

    fn to_box(&self, z: &[f64; DIMS]) -> [f64; DIMS] {
        let b = self.space.bounds();
        core::array::from_fn(|i| {
            let (lo, hi) = b[i];
            lo + (hi - lo) / (1.0 + libm::exp(-z[i]))
        })
    }

    fn to_logit(&self, x: &[f64; DIMS]) -> [f64; DIMS] {
        let b = self.space.bounds();
        core::array::from_fn(|i| {
            let (lo, hi) = b[i];
            if hi <= lo {
                return 0.0;
            }
            let t = ((x[i] - lo) / (hi - lo)).clamp(1e-9, 1.0 - 1e-9);
            libm::log(t / (1.0 - t))
        })
    }

    fn nelder_mead(&mut self, start: [f64; DIMS], opts: &OptimOptions) -> Result<()> {
        let z0 = self.to_logit(&start);
        let mut simplex: Vec<([f64; DIMS], f64)> = Vec::with_capacity(DIMS + 1);
        let f0 = self.eval(self.to_box(&z0))?;
        simplex.push((z0, f0));
        for i in 0..DIMS {
            if self.exhausted() {
                return Ok(());
            }
            let mut z = z0;
            z[i] += 0.5;
            let f = self.eval(self.to_box(&z))?;
            simplex.push((z, f));
        }
        for _ in 0..opts.max_iterations {
            // sorted by descending rate (we maximize)
            simplex.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(core::cmp::Ordering::Equal));
            let (fb, fw) = (simplex[0].1, simplex[DIMS].1);
            if fb <= 0.0 || (fb - fw).abs() <= opts.rel_tol * fb.abs() || self.exhausted() {
                break;
            }
            let centroid: [f64; DIMS] = core::array::from_fn(|i| {
                simplex[..DIMS].iter().map(|v| v.0[i]).sum::<f64>() / DIMS as f64
            });
            let worst = simplex[DIMS].0;
            let along = |t: f64| -> [f64; DIMS] {
                core::array::from_fn(|i| centroid[i] + t * (worst[i] - centroid[i]))
            };
            let xr = along(-1.0);
            let fr = self.eval(self.to_box(&xr))?;
            if fr > simplex[0].1 {
                if self.exhausted() {
                    simplex[DIMS] = (xr, fr);
                    break;
                }
                let xe = along(-2.0);
                let fe = self.eval(self.to_box(&xe))?;
                simplex[DIMS] = if fe > fr { (xe, fe) } else { (xr, fr) };
            } else if fr > simplex[DIMS - 1].1 {
                simplex[DIMS] = (xr, fr);
            } else {
                if self.exhausted() {
                    break;
                }
                let t = if fr > fw { -0.5 } else { 0.5 };
                let xc = along(t);
                let fc = self.eval(self.to_box(&xc))?;
                if fc > fw.max(fr) {
                    simplex[DIMS] = (xc, fc);
                } else {
                    let best = simplex[0].0;
                    for v in simplex.iter_mut().skip(1) {
                        if self.exhausted() {
                            return Ok(());
                        }
                        let z: [f64; DIMS] =
                            core::array::from_fn(|i| best[i] + 0.5 * (v.0[i] - best[i]));
                        let f = self.eval(self.to_box(&z))?;
                        *v = (z, f);
                    }
                }
            }
        }
        Ok(())
    }
}

/// Grid search followed by Nelder-Mead from the best grid point.
///
/// `budget` caps the number of rate evaluations and must cover the grid.
pub fn optimize(
    space: &SearchSpace,
    link: &LinkParams,
    sec: &SecurityParams,
    dim: Dimension,
    budget: usize,
    opts: &OptimOptions,
) -> Result<OptimResult> {
    space.validate()?;
    link.validate()?;
    sec.validate()?;
    if opts.grid == 0 {
        return Err(Error::invalid(
            "grid must have at least one point per coordinate",
        ));
    }
    if budget < opts.grid_size() {
        return Err(Error::invalid(alloc::format!(
            "budget {budget} is smaller than the grid size {}",
            opts.grid_size()
        )));
    }
    let mut s = Search {
        space,
        link,
        sec,
        dim,
        budget,
        trace: Vec::with_capacity(budget),
        best: None,
    };
    let b = space.bounds();
    let g = opts.grid;
    for idx in 0..opts.grid_size() {
        let mut rest = idx;
        let x: [f64; DIMS] = core::array::from_fn(|i| {
            let j = rest % g;
            rest /= g;
            let (lo, hi) = b[i];
            lo + (hi - lo) * (j as f64 + 0.5) / g as f64
        });
        s.eval(x)?;
    }
    let (_, start) = s.best.expect("grid is non-empty");
    if !s.exhausted() {
        s.nelder_mead(start, opts)?;
    }
    let (best_skr, x) = s.best.expect("at least one evaluation");
    Ok(OptimResult {
        best: space.settings(&x),
        best_skr,
        evaluations: s.trace.len(),
        zero_rate: best_skr <= 0.0,
        trace: s.trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> OptimOptions {
        OptimOptions {
            grid: 3,
            max_iterations: 60,
            rel_tol: 1e-4,
        }
    }

    fn table_point() -> IntensitySettings {
        IntensitySettings {
            mu: 0.50,
            nu: 0.18,
            p_mu: 0.78,
            p_x_alice: 0.1,
        }
    }

    #[test]
    fn evaluate_edge_cases() {
        let link = LinkParams::lab(Dimension::Four, 200.0);
        let sec = SecurityParams::default();
        assert!(evaluate(&table_point(), &link, &sec, Dimension::Four).unwrap() > 0.0);
        let mut starved = table_point();
        starved.p_x_alice = 1e-12;
        assert_eq!(
            evaluate(&starved, &link, &sec, Dimension::Four).unwrap(),
            0.0
        );
        let mut flat = table_point();
        flat.nu = flat.mu * (1.0 - 1e-9);
        assert!(matches!(
            evaluate(&flat, &link, &sec, Dimension::Four),
            Err(Error::IllConditioned { .. })
        ));
    }

    #[test]
    fn optimum_beats_table_point() {
        let link = LinkParams::lab(Dimension::Four, 200.0);
        let sec = SecurityParams::default();
        let r = optimize(
            &SearchSpace::default(),
            &link,
            &sec,
            Dimension::Four,
            5000,
            &OptimOptions::default(),
        )
        .unwrap();
        assert!(r.best_skr >= evaluate(&table_point(), &link, &sec, Dimension::Four).unwrap());
    }

    #[test]
    fn rate_falls_with_distance() {
        let sec = SecurityParams::default();
        let mut prev = f64::INFINITY;
        for l in [0.0, 50.0, 100.0, 150.0, 200.0, 250.0] {
            let link = LinkParams::lab(Dimension::Four, l);
            let r = optimize(
                &SearchSpace::default(),
                &link,
                &sec,
                Dimension::Four,
                5000,
                &OptimOptions::default(),
            )
            .unwrap();
            assert!(r.best_skr <= prev);
            prev = r.best_skr;
        }
    }

    #[test]
    fn best_dominates_trace() {
        let link = LinkParams::lab(Dimension::Four, 100.0);
        let r = optimize(
            &SearchSpace::default(),
            &link,
            &SecurityParams::default(),
            Dimension::Four,
            300,
            &small(),
        )
        .unwrap();
        assert!(r.evaluations <= 300);
        assert!(r.trace.iter().all(|t| t.skr_bps <= r.best_skr));
        assert!(r.best_skr > 0.0);
        assert!(!r.zero_rate);
    }

    #[test]
    fn budget_monotone() {
        let link = LinkParams::lab(Dimension::Two, 50.0);
        let sec = SecurityParams::default();
        let mut prev = 0.0;
        for budget in [81, 120, 200, 400] {
            let r = optimize(
                &SearchSpace::default(),
                &link,
                &sec,
                Dimension::Two,
                budget,
                &small(),
            )
            .unwrap();
            assert!(r.best_skr >= prev);
            prev = r.best_skr;
        }
    }

    #[test]
    fn small_budget_rejected() {
        let link = LinkParams::lab(Dimension::Four, 10.0);
        let e = optimize(
            &SearchSpace::default(),
            &link,
            &SecurityParams::default(),
            Dimension::Four,
            10,
            &small(),
        );
        assert!(e.is_err());
    }

    #[test]
    fn far_link_flags_zero_rate() {
        let link = LinkParams::lab(Dimension::Four, 600.0);
        let r = optimize(
            &SearchSpace::default(),
            &link,
            &SecurityParams::default(),
            Dimension::Four,
            81,
            &small(),
        )
        .unwrap();
        assert!(r.zero_rate);
        assert_eq!(r.best_skr, 0.0);
    }
}
