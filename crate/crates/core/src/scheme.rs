//! Time steppers on the uniform grid `t_k = kT/N`.
//!
//! The stopped scheme advances a Galerkin state `y ∈ span{e_1..e_n}` by
//!
//! ```text
//! y' = e^{ΔtA} ( y + 1{‖P_n F(y)‖ + ‖P_n B(y)‖_HS ≤ (N/T)^θ} (Δt P_n F(y) + P_n B(y) P_m ΔW) )
//! ```
//!
//! i.e. whenever the coefficients are too large for the step size the step
//! degenerates to the exact linear flow. The untamed baseline forces the
//! indicator to one; the integrated counterpart integrates the frozen
//! coefficients exactly against the semigroup.

use std::io::Write;

use crate::error::{Error, Result};
use crate::model::{taming_threshold, Evaluator, HsNorm, ModelSpec};
use crate::noise::BrownianPath;
use crate::spectral::{phi1_weight, OperatorSpectrum, SpectralField};
use crate::transform::GridPlan;

/// Discretisation `(N, n, m, θ)` over the horizon `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeParams {
    steps: usize,
    modes: usize,
    noise_modes: usize,
    theta: f64,
    horizon: f64,
    plan: GridPlan,
    hs_tail: usize,
}

impl SchemeParams {
    /// Uses the smallest dealiasing grid and an HS truncation of `4n` noise
    /// modes.
    pub fn new(steps: usize, modes: usize, noise_modes: usize, theta: f64, horizon: f64) -> Result<Self> {
        let plan = GridPlan::for_modes(modes.max(noise_modes));
        let params = Self {
            steps,
            modes,
            noise_modes,
            theta,
            horizon,
            plan,
            hs_tail: 4 * modes,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_plan(mut self, plan: GridPlan) -> Result<Self> {
        self.plan = plan;
        self.validate()?;
        Ok(self)
    }

    pub fn with_hs_tail(mut self, hs_tail: usize) -> Result<Self> {
        self.hs_tail = hs_tail;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.modes == 0 || self.noise_modes == 0 {
            return Err(Error::config(format!(
                "steps, modes and noise modes must be positive (got N={}, n={}, m={})",
                self.steps, self.modes, self.noise_modes
            )));
        }
        taming_threshold(self.steps, self.horizon, self.theta)?;
        self.plan.require_dealiased(self.modes.max(self.noise_modes))?;
        if self.hs_tail < self.modes {
            return Err(Error::config(format!(
                "HS truncation {} below the mode count {}",
                self.hs_tail, self.modes
            )));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn noise_modes(&self) -> usize {
        self.noise_modes
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn plan(&self) -> &GridPlan {
        &self.plan
    }

    pub fn hs_tail(&self) -> usize {
        self.hs_tail
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// `t_k = kT/N`.
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.horizon / self.steps as f64
    }

    pub fn threshold(&self) -> f64 {
        taming_threshold(self.steps, self.horizon, self.theta).expect("validated at construction")
    }

    fn check_model(&self, spec: &ModelSpec) -> Result<()> {
        if spec.horizon != self.horizon {
            return Err(Error::config(format!(
                "scheme horizon {} differs from model horizon {}",
                self.horizon, spec.horizon
            )));
        }
        Ok(())
    }

    fn check_path(&self, path: &BrownianPath, substeps: usize) -> Result<()> {
        let level = self.steps * substeps;
        if path.fine_steps() % level != 0 {
            return Err(Error::config(format!(
                "{level} steps do not divide the path's {} fine steps",
                path.fine_steps()
            )));
        }
        if self.noise_modes > path.modes() {
            return Err(Error::config(format!(
                "scheme uses {} noise modes, path carries {}",
                self.noise_modes,
                path.modes()
            )));
        }
        if path.horizon() != self.horizon {
            return Err(Error::config("path and scheme horizons differ"));
        }
        Ok(())
    }
}

/// Value of the stopping indicator together with the norms it compares.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Indicator {
    /// `true` when the nonlinear terms are applied.
    pub open: bool,
    pub drift_norm: f64,
    pub hs: HsNorm,
    pub threshold: f64,
}

impl Indicator {
    pub fn sum(&self) -> f64 {
        self.drift_norm + self.hs.value
    }

    /// Whether the HS truncation could have flipped the decision.
    pub fn ambiguous(&self) -> bool {
        let upper = self.drift_norm + self.hs.upper();
        self.open && upper > self.threshold
    }
}

/// A simulated path on the grid `t_k = kT/N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub steps: usize,
    pub modes: usize,
    pub noise_modes: usize,
    pub horizon: f64,
    /// Seed of the Brownian path that drove this run.
    pub path_seed: u64,
    /// States at `t_0..=t_N`.
    pub states: Vec<SpectralField>,
    /// `frozen[k]` is set when step `k → k+1` ran with the indicator at zero.
    pub frozen: Vec<bool>,
    /// First state index holding a non-finite coefficient.
    pub diverged_at: Option<usize>,
    /// Steps whose indicator the HS truncation could have flipped.
    pub ambiguous_steps: usize,
}

impl Trajectory {
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.horizon / self.steps as f64
    }

    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }

    pub fn frozen_count(&self) -> usize {
        self.frozen.iter().filter(|&&f| f).count()
    }

    pub fn last(&self) -> &SpectralField {
        self.states.last().expect("trajectory holds the initial state")
    }

    /// Writes `k, t, c_1..c_n, h_norm, h_eta_norm, frozen`. `frozen` refers to
    /// the step leaving `t_k` and is empty on the final row. Lines starting
    /// with `#` are provenance comments.
    pub fn write_csv<W: Write>(
        &self,
        mut w: W,
        spectrum: &OperatorSpectrum,
        eta: f64,
        comment: &str,
    ) -> Result<()> {
        for line in comment.lines() {
            writeln!(w, "# {line}")?;
        }
        write!(w, "k,t")?;
        for k in 1..=self.modes {
            write!(w, ",c{k}")?;
        }
        writeln!(w, ",h_norm,h_eta_norm,frozen")?;
        for (k, state) in self.states.iter().enumerate() {
            write!(w, "{},{}", k, self.time(k))?;
            for c in state.coeffs() {
                write!(w, ",{c}")?;
            }
            write!(
                w,
                ",{},{},",
                state.norm(),
                spectrum.fractional_norm(state, eta)
            )?;
            if let Some(&f) = self.frozen.get(k) {
                write!(w, "{}", u8::from(f))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Reusable evaluator for one `(model, params)` pair; owns all scratch space.
pub struct Stepper<'a> {
    params: &'a SchemeParams,
    eval: Evaluator<'a>,
    spectrum: OperatorSpectrum,
    decay: Vec<f64>,
    threshold: f64,
    drift: Vec<f64>,
    diffusion: Vec<f64>,
}

impl<'a> Stepper<'a> {
    pub fn new(spec: &'a ModelSpec, params: &'a SchemeParams) -> Result<Self> {
        params.check_model(spec)?;
        let spectrum = spec.spectrum()?;
        let n = params.modes;
        let eval = Evaluator::new(spec, &params.plan, n, n, params.noise_modes, params.hs_tail)?;
        Ok(Self {
            params,
            eval,
            decay: spectrum.semigroup_factors(n, params.dt()),
            spectrum,
            threshold: params.threshold(),
            drift: vec![0.0; n],
            diffusion: vec![0.0; n],
        })
    }

    pub fn spectrum(&self) -> &OperatorSpectrum {
        &self.spectrum
    }

    /// Evaluates the indicator at `y` and makes `y` the state whose drift and
    /// diffusion the following calls use.
    pub fn indicator(&mut self, y: &[f64]) -> Indicator {
        self.eval.load(y);
        self.eval.drift(&mut self.drift);
        let drift_norm = self.drift.iter().map(|c| c * c).sum::<f64>().sqrt();
        let hs = self.eval.hs();
        let sum = drift_norm + hs.value;
        Indicator {
            // NaN compares false, so a diverged state never passes the gate
            open: sum <= self.threshold,
            drift_norm,
            hs,
            threshold: self.threshold,
        }
    }

    /// `P_n B(y) P_m dW` into the diffusion buffer, for the state of the
    /// preceding [`Stepper::indicator`] call.
    fn diffusion_at_loaded(&mut self, dw: &[f64]) {
        self.eval.diffusion(dw, &mut self.diffusion);
    }

    /// Advances `y` in place by one step; returns the indicator that was
    /// used. With `tamed = false` the nonlinear terms are always applied.
    pub fn step(&mut self, y: &mut [f64], dw: &[f64], tamed: bool) -> Indicator {
        debug_assert_eq!(dw.len(), self.params.noise_modes);
        let mut gate = self.indicator(y);
        if !tamed {
            gate.open = true;
        }
        if gate.open {
            self.diffusion_at_loaded(dw);
            let dt = self.params.dt();
            for i in 0..y.len() {
                y[i] = self.decay[i] * (y[i] + (dt * self.drift[i] + self.diffusion[i]));
            }
        } else {
            for (c, e) in y.iter_mut().zip(&self.decay) {
                *c *= e;
            }
        }
        gate
    }
}

/// Indicator of the stopped scheme at `y`.
pub fn indicator(y: &SpectralField, params: &SchemeParams, spec: &ModelSpec) -> Result<Indicator> {
    check_state(y, params)?;
    let mut stepper = Stepper::new(spec, params)?;
    Ok(stepper.indicator(y.coeffs()))
}

/// One step of the stopped scheme; the flag is `true` when the step froze.
pub fn stopped_euler_step(
    y: &SpectralField,
    dw: &[f64],
    params: &SchemeParams,
    spec: &ModelSpec,
) -> Result<(SpectralField, bool)> {
    check_state(y, params)?;
    if dw.len() != params.noise_modes {
        return Err(Error::argument(format!(
            "expected {} noise increments, got {}",
            params.noise_modes,
            dw.len()
        )));
    }
    let mut stepper = Stepper::new(spec, params)?;
    let mut next = y.coeffs().to_vec();
    let gate = stepper.step(&mut next, dw, true);
    Ok((SpectralField::new(next)?, !gate.open))
}

fn check_state(y: &SpectralField, params: &SchemeParams) -> Result<()> {
    if y.modes() != params.modes {
        return Err(Error::argument(format!(
            "state has {} modes, scheme expects {}",
            y.modes(),
            params.modes
        )));
    }
    Ok(())
}

fn run(params: &SchemeParams, spec: &ModelSpec, path: &BrownianPath, tamed: bool) -> Result<Trajectory> {
    params.check_path(path, 1)?;
    let table = path.level(params.steps, params.noise_modes)?;
    let mut stepper = Stepper::new(spec, params)?;
    let mut y = spec.initial_field(params.modes).into_coeffs();
    let mut traj = Trajectory {
        steps: params.steps,
        modes: params.modes,
        noise_modes: params.noise_modes,
        horizon: params.horizon,
        path_seed: path.seed(),
        states: Vec::with_capacity(params.steps + 1),
        frozen: Vec::with_capacity(params.steps),
        diverged_at: None,
        ambiguous_steps: 0,
    };
    traj.states.push(SpectralField::new(y.clone())?);
    for k in 0..params.steps {
        let gate = stepper.step(&mut y, table.row(k), tamed);
        traj.frozen.push(!gate.open);
        if tamed && gate.ambiguous() {
            traj.ambiguous_steps += 1;
        }
        if traj.diverged_at.is_none() && y.iter().any(|c| !c.is_finite()) {
            traj.diverged_at = Some(k + 1);
        }
        traj.states.push(SpectralField::new(y.clone())?);
    }
    Ok(traj)
}

/// Stopped exponential Euler driven by `path`.
pub fn simulate(params: &SchemeParams, spec: &ModelSpec, path: &BrownianPath) -> Result<Trajectory> {
    run(params, spec, path, true)
}

/// Exponential Euler with the indicator forced to one.
pub fn simulate_untamed(params: &SchemeParams, spec: &ModelSpec, path: &BrownianPath) -> Result<Trajectory> {
    run(params, spec, path, false)
}

/// The stopped scheme together with its integrated counterparts.
#[derive(Debug, Clone, PartialEq)]
pub struct CounterpartRun {
    pub scheme: Trajectory,
    /// Frozen coefficients integrated without the indicator.
    pub counterpart: Trajectory,
    /// Same, with the scheme's indicator multiplying both integrals.
    pub counterpart_stopped: Trajectory,
}

impl CounterpartRun {
    /// `max_k ‖Y_{t_k} − Ȳ_{t_k}‖_H` for both counterpart variants.
    pub fn gaps(&self) -> (f64, f64) {
        let gap = |other: &Trajectory| {
            self.scheme
                .states
                .iter()
                .zip(&other.states)
                .map(|(a, b)| a.distance(b))
                .fold(0.0, f64::max)
        };
        (gap(&self.counterpart), gap(&self.counterpart_stopped))
    }
}

/// Integrated counterpart `Ȳ` of the stopped scheme: the drift `P_n F(Y_k)`
/// is integrated exactly per mode, the stochastic integral of
/// `e^{(t_{k+1}−s)A} P_n B(Y_k)` is summed over `substeps` fine sub-intervals
/// (left endpoints).
pub fn simulate_counterpart(
    params: &SchemeParams,
    spec: &ModelSpec,
    path: &BrownianPath,
    substeps: usize,
) -> Result<CounterpartRun> {
    if substeps == 0 {
        return Err(Error::argument("need at least one substep"));
    }
    params.check_path(path, substeps)?;
    let fine = path.level(params.steps * substeps, params.noise_modes)?;
    let coarse = path.level(params.steps, params.noise_modes)?;
    let mut stepper = Stepper::new(spec, params)?;
    let n = params.modes;
    let dt = params.dt();
    let sub_dt = dt / substeps as f64;
    let spectrum = spec.spectrum()?;
    let phi: Vec<f64> = (1..=n).map(|k| phi1_weight(spectrum.eigenvalue(k), dt)).collect();
    // factors e^{(Δt − iδ)A} for sub-interval i
    let sub_decay: Vec<Vec<f64>> = (0..substeps)
        .map(|i| spectrum.semigroup_factors(n, dt - i as f64 * sub_dt))
        .collect();

    let y0 = spec.initial_field(n).into_coeffs();
    let mut y = y0.clone();
    let mut bar = y0.clone();
    let mut bar_stopped = y0.clone();
    let new_traj = |states: Vec<SpectralField>| Trajectory {
        steps: params.steps,
        modes: n,
        noise_modes: params.noise_modes,
        horizon: params.horizon,
        path_seed: path.seed(),
        states,
        frozen: Vec::with_capacity(params.steps),
        diverged_at: None,
        ambiguous_steps: 0,
    };
    let first = SpectralField::new(y0)?;
    let mut scheme = new_traj(vec![first.clone()]);
    let mut counterpart = new_traj(vec![first.clone()]);
    let mut counterpart_stopped = new_traj(vec![first]);
    let mut stochastic = vec![0.0; n];

    for k in 0..params.steps {
        // counterpart increments use the scheme state Y_k
        let gate = stepper.indicator(&y);
        let drift = stepper.drift.clone();
        stochastic.fill(0.0);
        for (i, decay) in sub_decay.iter().enumerate() {
            stepper.diffusion_at_loaded(fine.row(k * substeps + i));
            for ((s, d), e) in stochastic.iter_mut().zip(&stepper.diffusion).zip(decay) {
                *s += e * d;
            }
        }
        let open = if gate.open { 1.0 } else { 0.0 };
        for i in 0..n {
            let inc = phi[i] * drift[i] + stochastic[i];
            let e = stepper.decay[i];
            bar[i] = e * bar[i] + inc;
            bar_stopped[i] = e * bar_stopped[i] + open * inc;
        }
        let gate = stepper.step(&mut y, coarse.row(k), true);
        for (traj, state) in [
            (&mut scheme, &y),
            (&mut counterpart, &bar),
            (&mut counterpart_stopped, &bar_stopped),
        ] {
            traj.frozen.push(!gate.open);
            if traj.diverged_at.is_none() && state.iter().any(|c| !c.is_finite()) {
                traj.diverged_at = Some(k + 1);
            }
            traj.states.push(SpectralField::new(state.clone())?);
        }
    }
    Ok(CounterpartRun {
        scheme,
        counterpart,
        counterpart_stopped,
    })
}
