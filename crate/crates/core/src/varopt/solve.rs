use log::{debug, warn};

use super::{
    fixed_point_image, free_energy_bound, BoundGradients, Frame, RenormalizationState,
    SiteFraction,
};
use crate::error::{Error, Result};
use crate::model::{BathSpec, SiteNetwork};

/// Where a fixed-point iteration begins.
#[derive(Clone, Debug, PartialEq)]
pub enum StartPoint {
    /// B = 1, R = 0.
    Weak,
    /// F = 1 values of B and R.
    Polaron,
    Custom(RenormalizationState),
}

impl StartPoint {
    pub fn label(&self) -> &'static str {
        match self {
            StartPoint::Weak => "weak",
            StartPoint::Polaron => "polaron",
            StartPoint::Custom(_) => "custom",
        }
    }

    fn state(&self, baths: &BathSpec) -> Result<RenormalizationState> {
        match self {
            StartPoint::Weak => Ok(RenormalizationState::weak(baths.n_sites())),
            StartPoint::Polaron => RenormalizationState::polaron(baths),
            StartPoint::Custom(s) => {
                if s.n_sites() != baths.n_sites() {
                    return Err(Error::InvalidInput(format!(
                        "start state has {} sites, bath has {}",
                        s.n_sites(),
                        baths.n_sites()
                    )));
                }
                Ok(s.clone())
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    /// Sup-norm residual over {B_n, R_n / lambda_n}.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub mixing: f64,
    pub starts: Vec<StartPoint>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tolerance: 1e-8,
            max_iterations: 500,
            mixing: 0.5,
            starts: vec![StartPoint::Weak, StartPoint::Polaron],
        }
    }
}

const MIN_MIXING: f64 = 1.0 / 1024.0;

/// Outcome of one start.
#[derive(Clone, Debug)]
pub struct Candidate {
    pub start: &'static str,
    pub converged: bool,
    pub state: RenormalizationState,
    /// Bound at `state`, cm^-1.
    pub bound: f64,
    pub residual: f64,
    pub residual_trace: Vec<f64>,
    /// Set when the iteration aborted, e.g. on a singular fraction.
    pub failure: Option<String>,
}

#[derive(Clone, Debug)]
pub struct VariationalSolution {
    /// Image of the last iterate, so B and R are exactly the integrals of `fractions`.
    pub state: RenormalizationState,
    /// Gradients at the last iterate; they define `fractions`.
    pub gradients: BoundGradients,
    pub fractions: Vec<SiteFraction>,
    /// System part of A_B, cm^-1.
    pub bound: f64,
    pub residual: f64,
    pub iterations: usize,
    pub beta: f64,
    pub candidates: Vec<Candidate>,
    /// Sites whose gradients do not guarantee 0 <= F <= 1.
    pub unbounded_sites: Vec<usize>,
}

impl VariationalSolution {
    /// F_n(omega) for omega in cm^-1.
    pub fn fraction(&self, site: usize, omega: f64) -> f64 {
        self.fractions[site].value(omega)
    }

    pub fn n_sites(&self) -> usize {
        self.state.n_sites()
    }

    pub fn frame(&self) -> Frame {
        Frame {
            state: self.state.clone(),
            fractions: self.fractions.clone(),
            beta: self.beta,
        }
    }
}

struct Run {
    candidate: Candidate,
    iterations: usize,
    /// Gradients and fractions whose image is the converged state.
    source: Option<(BoundGradients, Vec<SiteFraction>)>,
}

fn iterate(
    net: &SiteNetwork,
    baths: &BathSpec,
    lambdas: &[f64],
    start: &StartPoint,
    opts: &SolveOptions,
) -> Result<Run> {
    let beta = baths.beta();
    let mut state = start.state(baths)?;
    let mut trace = Vec::new();
    let mut mixing = opts.mixing;
    let mut prev = f64::INFINITY;
    let fail = |state: RenormalizationState, trace: Vec<f64>, msg: String| Run {
        candidate: Candidate {
            start: start.label(),
            converged: false,
            bound: free_energy_bound(net, &state, beta),
            residual: trace.last().copied().unwrap_or(f64::INFINITY),
            state,
            residual_trace: trace,
            failure: Some(msg),
        },
        iterations: 0,
        source: None,
    };
    for it in 0..opts.max_iterations {
        let out = match fixed_point_image(net, baths, &state) {
            Ok(out) => out,
            Err(e @ Error::SingularFraction { .. }) => return Ok(fail(state, trace, e.to_string())),
            Err(e) => return Err(e),
        };
        let image = out.image;
        let res = state.distance(&image, lambdas);
        trace.push(res);
        debug!("{} start, iteration {it}: residual {res:.3e}", start.label());
        if !res.is_finite() {
            return Ok(fail(state, trace, "non-finite residual".into()));
        }
        if res <= opts.tolerance {
            // hand back the image so B and R are exactly the integrals of the returned F
            let state = image;
            let bound = free_energy_bound(net, &state, beta);
            return Ok(Run {
                candidate: Candidate {
                    start: start.label(),
                    converged: true,
                    state,
                    bound,
                    residual: res,
                    residual_trace: trace,
                    failure: None,
                },
                iterations: it + 1,
                source: Some((out.gradients, out.fractions)),
            });
        }
        // first step is undamped so a one-step map lands on its fixed point
        let alpha = if it == 0 {
            1.0
        } else {
            if res > prev {
                mixing = (0.5 * mixing).max(MIN_MIXING);
            }
            mixing
        };
        prev = res;
        state = state.mix_towards(&image, alpha);
    }
    let bound = free_energy_bound(net, &state, beta);
    Ok(Run {
        candidate: Candidate {
            start: start.label(),
            converged: false,
            bound,
            residual: trace.last().copied().unwrap_or(f64::INFINITY),
            state,
            residual_trace: trace,
            failure: None,
        },
        iterations: opts.max_iterations,
        source: None,
    })
}

/// Multi-start fixed-point solve; the converged candidate with the lowest bound wins.
pub fn solve_variational(
    net: &SiteNetwork,
    baths: &BathSpec,
    opts: &SolveOptions,
) -> Result<VariationalSolution> {
    baths.check_matches(net.n_sites())?;
    if opts.starts.is_empty() {
        return Err(Error::InvalidInput("no start points given".into()));
    }
    if !(opts.mixing > 0.0 && opts.mixing <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "mixing must lie in (0, 1], got {}",
            opts.mixing
        )));
    }
    if !(opts.tolerance > 0.0) || opts.max_iterations == 0 {
        return Err(Error::InvalidInput(
            "tolerance and iteration limit must be positive".into(),
        ));
    }
    baths.check_infrared()?;
    let lambdas = baths.reorganization_energies()?;
    let beta = baths.beta();

    let mut candidates = Vec::with_capacity(opts.starts.len());
    let mut best: Option<(usize, usize, (BoundGradients, Vec<SiteFraction>))> = None;
    for start in &opts.starts {
        let run = iterate(net, baths, &lambdas, start, opts)?;
        let idx = candidates.len();
        if run.candidate.converged {
            let better = match best {
                None => true,
                Some((b, ..)) => {
                    let current: &Candidate = &candidates[b];
                    run.candidate.bound < current.bound
                }
            };
            if better {
                best = Some((idx, run.iterations, run.source.expect("converged run")));
            }
        }
        candidates.push(run.candidate);
    }

    let Some((idx, iterations, (gradients, fractions))) = best else {
        let closest = candidates
            .iter()
            .min_by(|a, b| a.residual.total_cmp(&b.residual))
            .expect("at least one candidate");
        return Err(Error::NoConvergence {
            best_residual: closest.residual,
            residual_trace: closest.residual_trace.clone(),
        });
    };
    let winner = &candidates[idx];
    let state = winner.state.clone();
    let unbounded_sites: Vec<usize> = fractions
        .iter()
        .enumerate()
        .filter(|(_, f)| !f.is_bounded())
        .map(|(n, _)| n)
        .collect();
    for &n in &unbounded_sites {
        warn!(
            "site {}: gradients do not keep the displacement fraction within [0, 1]",
            n + 1
        );
    }
    Ok(VariationalSolution {
        bound: winner.bound,
        residual: winner.residual,
        state,
        gradients,
        fractions,
        iterations,
        beta,
        candidates,
        unbounded_sites,
    })
}
