//! Model oracles: manufactured expansions, a Duffing oscillator and an
//! equivalent-circuit battery discharge model.

use nalgebra::{DMatrix, DVector};
use rand::RngExt;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::orthopoly::{BasisSpec, PolyFamily};
use crate::seed::rng_from_seed;

/// Random polynomial expansion with multiplicative measurement noise.
#[derive(Debug, Clone, PartialEq)]
pub struct ManufacturedModel {
    pub coefficients: DVector<f64>,
    /// Relative noise level: observations are `u (1 + noise_rel * eta)`.
    pub noise_rel: f64,
    pub seed: u64,
}

impl ManufacturedModel {
    /// Draws `p` coefficients from a standard normal.
    pub fn random(p: usize, noise_rel: f64, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let coefficients = DVector::from_iterator(p, (0..p).map(|_| rng.sample::<f64, _>(StandardNormal)));
        Self {
            coefficients,
            noise_rel,
            seed,
        }
    }

    pub fn with_coefficients(coefficients: DVector<f64>, noise_rel: f64) -> Self {
        Self {
            coefficients,
            noise_rel,
            seed: 0,
        }
    }

    /// Noise-free value at `xi`.
    pub fn exact(&self, spec: &BasisSpec<f64>, xi: &[f64]) -> f64 {
        spec.eval_basis_row(xi).dot(&self.coefficients)
    }

    /// Noisy observation at `xi`.
    pub fn eval(&self, spec: &BasisSpec<f64>, xi: &[f64], noise_seed: u64) -> f64 {
        let u = self.exact(spec, xi);
        let eta: f64 = rng_from_seed(noise_seed).sample(StandardNormal);
        u * (1.0 + self.noise_rel * eta)
    }

    /// Noise-free values for every row of a measurement matrix.
    pub fn exact_rows(&self, psi: &DMatrix<f64>) -> DVector<f64> {
        psi * &self.coefficients
    }

    /// Noisy values for every row of a measurement matrix, one noise draw per row.
    pub fn eval_rows(&self, psi: &DMatrix<f64>, noise_seed: u64) -> DVector<f64> {
        let mut rng = rng_from_seed(noise_seed);
        let mut u = self.exact_rows(psi);
        for v in u.iter_mut() {
            let eta: f64 = rng.sample(StandardNormal);
            *v *= 1.0 + self.noise_rel * eta;
        }
        u
    }
}

/// Default Duffing integration step, seconds.
pub const DUFFING_DT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DuffingParams {
    pub omega1: f64,
    pub omega2: f64,
    pub omega3: f64,
}

impl DuffingParams {
    pub fn from_xi(xi: &[f64]) -> Self {
        Self {
            omega1: 2.0 * std::f64::consts::PI * (1.0 + 0.2 * xi[0]),
            omega2: 0.05 * (1.0 + 0.05 * xi[1]),
            omega3: -0.5 * (1.0 + 0.5 * xi[2]),
        }
    }

    fn rhs(&self, s: [f64; 2]) -> [f64; 2] {
        let [u, v] = s;
        let w1 = self.omega1;
        [v, -2.0 * w1 * self.omega2 * v - w1 * w1 * (u + self.omega3 * u * u * u)]
    }

    fn rk4(&self, s: [f64; 2], h: f64) -> [f64; 2] {
        let add = |a: [f64; 2], b: [f64; 2], c: f64| [a[0] + c * b[0], a[1] + c * b[1]];
        let k1 = self.rhs(s);
        let k2 = self.rhs(add(s, k1, h / 2.0));
        let k3 = self.rhs(add(s, k2, h / 2.0));
        let k4 = self.rhs(add(s, k3, h));
        [
            s[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            s[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ]
    }
}

/// Displacements `u(xi, t)` at each of `times` (any order, all `>= 0`).
pub fn duffing_trajectory(xi: &[f64], times: &[f64], dt: f64) -> Result<Vec<f64>> {
    if xi.len() != 3 {
        return Err(Error::DimensionMismatch { expected: 3, got: xi.len() });
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    if let Some(t) = times.iter().find(|t| !(**t >= 0.0) || !t.is_finite()) {
        return Err(Error::InvalidArgument(format!("evaluation time must be finite and >= 0, got {t}")));
    }
    let params = DuffingParams::from_xi(xi);
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    let mut out = vec![0.0; times.len()];
    let mut state = [1.0, 0.0];
    let mut step = 0u64;
    for idx in order {
        let target = times[idx];
        // whole steps on the fixed grid t_k = k dt, then a partial step to the target
        let whole = (target / dt * (1.0 + 1e-12)).floor() as u64;
        while step < whole {
            state = params.rk4(state, dt);
            step += 1;
        }
        let rest = target - step as f64 * dt;
        out[idx] = if rest > 1e-12 * dt.max(target) {
            params.rk4(state, rest)[0]
        } else {
            state[0]
        };
    }
    Ok(out)
}

/// Displacement `u(xi, t)` from `u(0) = 1`, `u'(0) = 0`.
pub fn duffing_solve(xi: &[f64], t: f64, dt: f64) -> Result<f64> {
    Ok(duffing_trajectory(xi, &[t], dt)?[0])
}

/// Equivalent-circuit constants of the cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryParams {
    pub r_sp0: f64,
    pub r_sp1: f64,
    pub r_sp2: f64,
    pub r_s: f64,
    pub r_p: f64,
    pub c_b: [f64; 4],
    pub c_s: f64,
    pub c_sp: f64,
    pub q_max: f64,
    pub c_max: f64,
}

impl Default for BatteryParams {
    fn default() -> Self {
        Self {
            r_sp0: 0.0272,
            r_sp1: 1.087e-16,
            r_sp2: 34.64,
            r_s: 0.0067,
            r_p: 10000.0,
            c_b: [19.8, 1745.0, -1.5, -200.2],
            c_s: 115.28,
            c_sp: 316.69,
            q_max: 31100.0,
            c_max: 30807.0,
        }
    }
}

impl BatteryParams {
    pub fn soc(&self, q_b: f64) -> f64 {
        1.0 - (self.q_max - q_b) / self.c_max
    }

    pub fn r_sp(&self, soc: f64) -> f64 {
        self.r_sp0 + self.r_sp1 * (self.r_sp2 * (1.0 - soc)).exp()
    }

    pub fn c_b(&self, soc: f64) -> f64 {
        let [c0, c1, c2, c3] = self.c_b;
        c0 + soc * (c1 + soc * (c2 + soc * c3))
    }
}

/// Charges held by the bulk, surface-polarization and Ohmic capacitances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryState {
    pub q_b: f64,
    pub q_sp: f64,
    pub q_s: f64,
}

/// Physical inputs of one battery realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryInputs {
    pub current: f64,
    pub state: BatteryState,
    /// Constant process-noise currents added to the three charge equations.
    pub noise: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct RulResult {
    pub end_of_life: f64,
    pub rul: f64,
    /// `(t, V)` samples, when requested.
    pub trajectory: Option<Vec<(f64, f64)>>,
}

/// Discharge model with the random-input conventions used for prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct BatteryModel {
    pub params: BatteryParams,
    pub v_cutoff: f64,
    /// Integration step, seconds.
    pub dt: f64,
    /// Longest simulated discharge after `t_p`, seconds.
    pub horizon: f64,
    /// Current range: `I = low + (high - low) Y` with `Y` Beta distributed.
    pub current_low: f64,
    pub current_high: f64,
    pub beta_alpha: f64,
    pub beta_beta: f64,
    /// Coefficient of variation of the state estimates.
    pub state_cov: f64,
    /// Standard deviation used when a nominal state is zero.
    pub zero_state_sd: f64,
    pub noise_sd: [f64; 3],
}

impl Default for BatteryModel {
    fn default() -> Self {
        Self {
            params: BatteryParams::default(),
            v_cutoff: 16.0,
            dt: 0.5,
            horizon: 1e5,
            current_low: 0.0,
            current_high: 40.0,
            beta_alpha: 21.2,
            beta_beta: 31.8,
            state_cov: 0.1,
            zero_state_sd: 0.1,
            noise_sd: [0.1f64.sqrt(), 1e-2, 1e-3],
        }
    }
}

impl BatteryModel {
    /// Fully charged cell with relaxed capacitors.
    pub fn full_charge(&self) -> BatteryState {
        BatteryState {
            q_b: self.params.q_max,
            q_sp: 0.0,
            q_s: 0.0,
        }
    }

    /// Terminal voltage `V_b - V_sp - V_s`.
    pub fn voltage(&self, s: &BatteryState) -> f64 {
        let p = &self.params;
        s.q_b / p.c_b(p.soc(s.q_b)) - s.q_sp / p.c_sp - s.q_s / p.c_s
    }

    fn rhs(&self, s: &BatteryState, current: f64, noise: &[f64; 3]) -> BatteryState {
        let p = &self.params;
        let soc = p.soc(s.q_b);
        let v_b = s.q_b / p.c_b(soc);
        let v_sp = s.q_sp / p.c_sp;
        let v_s = s.q_s / p.c_s;
        let i_p = (v_b - v_sp - v_s) / p.r_p;
        let i_b = i_p + current;
        BatteryState {
            q_b: -i_b + noise[0],
            q_sp: i_b - v_sp / p.r_sp(soc) + noise[1],
            q_s: i_b - v_s / p.r_s + noise[2],
        }
    }

    /// One classical Runge–Kutta step of length `h`.
    pub fn step(&self, s: &BatteryState, current: f64, noise: &[f64; 3], h: f64) -> BatteryState {
        let at = |k: &BatteryState, c: f64| BatteryState {
            q_b: s.q_b + c * k.q_b,
            q_sp: s.q_sp + c * k.q_sp,
            q_s: s.q_s + c * k.q_s,
        };
        let k1 = self.rhs(s, current, noise);
        let k2 = self.rhs(&at(&k1, h / 2.0), current, noise);
        let k3 = self.rhs(&at(&k2, h / 2.0), current, noise);
        let k4 = self.rhs(&at(&k3, h), current, noise);
        let comb = |a: f64, b: f64, c: f64, d: f64| h / 6.0 * (a + 2.0 * b + 2.0 * c + d);
        BatteryState {
            q_b: s.q_b + comb(k1.q_b, k2.q_b, k3.q_b, k4.q_b),
            q_sp: s.q_sp + comb(k1.q_sp, k2.q_sp, k3.q_sp, k4.q_sp),
            q_s: s.q_s + comb(k1.q_s, k2.q_s, k3.q_s, k4.q_s),
        }
    }

    /// Mean of the Beta-distributed current.
    pub fn mean_current(&self) -> f64 {
        let y = self.beta_alpha / (self.beta_alpha + self.beta_beta);
        self.current_low + (self.current_high - self.current_low) * y
    }

    /// Noise-free state at `t_p` when discharging from full charge at the mean current.
    pub fn nominal_state(&self, t_p: f64) -> BatteryState {
        let mut s = self.full_charge();
        let i = self.mean_current();
        let steps = (t_p / self.dt).floor() as u64;
        for _ in 0..steps {
            s = self.step(&s, i, &[0.0; 3], self.dt);
        }
        let rest = t_p - steps as f64 * self.dt;
        if rest > 0.0 {
            s = self.step(&s, i, &[0.0; 3], rest);
        }
        s
    }

    /// Orthogonality families of the seven standardized inputs.
    pub fn families(&self) -> Result<Vec<PolyFamily<f64>>> {
        let mut f = vec![PolyFamily::from_beta(self.beta_alpha, self.beta_beta)?];
        f.extend(std::iter::repeat_n(PolyFamily::HermiteProbabilists, 6));
        Ok(f)
    }

    /// Maps standardized inputs (Beta coordinate on `[-1, 1]`, six standard
    /// normals) to current, perturbed states and process noise.
    pub fn input_map(&self, xi: &[f64], nominal: &BatteryState) -> Result<BatteryInputs> {
        if xi.len() != 7 {
            return Err(Error::DimensionMismatch { expected: 7, got: xi.len() });
        }
        let y = (xi[0] + 1.0) / 2.0;
        let current = self.current_low + (self.current_high - self.current_low) * y;
        let perturb = |nom: f64, z: f64| {
            if nom != 0.0 {
                nom * (1.0 + self.state_cov * z)
            } else {
                self.zero_state_sd * z
            }
        };
        Ok(BatteryInputs {
            current,
            state: BatteryState {
                q_b: perturb(nominal.q_b, xi[1]),
                q_sp: perturb(nominal.q_sp, xi[2]),
                q_s: perturb(nominal.q_s, xi[3]),
            },
            noise: [
                self.noise_sd[0] * xi[4],
                self.noise_sd[1] * xi[5],
                self.noise_sd[2] * xi[6],
            ],
        })
    }

    /// Integrates from the inputs at `t_p` until the voltage drops below the
    /// cut-off; the crossing is located by linear interpolation.
    pub fn simulate(&self, inputs: &BatteryInputs, t_p: f64, keep_trajectory: bool) -> Result<RulResult> {
        if !(self.dt > 0.0) {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {}", self.dt)));
        }
        let mut s = inputs.state;
        let mut v = self.voltage(&s);
        let mut t = t_p;
        let mut traj = keep_trajectory.then(|| vec![(t, v)]);
        if v < self.v_cutoff {
            return Ok(RulResult {
                end_of_life: t_p,
                rul: 0.0,
                trajectory: traj,
            });
        }
        let max_steps = (self.horizon / self.dt).ceil() as u64;
        for k in 1..=max_steps {
            let next = self.step(&s, inputs.current, &inputs.noise, self.dt);
            let v_next = self.voltage(&next);
            let t_next = t_p + k as f64 * self.dt;
            if let Some(tr) = traj.as_mut() {
                tr.push((t_next, v_next));
            }
            if !v_next.is_finite() {
                return Err(Error::Numerical(format!("battery voltage became non-finite at t = {t_next}")));
            }
            if v_next < self.v_cutoff {
                let frac = (v - self.v_cutoff) / (v - v_next);
                let end = t + frac * self.dt;
                return Ok(RulResult {
                    end_of_life: end,
                    rul: end - t_p,
                    trajectory: traj,
                });
            }
            s = next;
            v = v_next;
            t = t_next;
        }
        Err(Error::HorizonExceeded { horizon: self.horizon })
    }

    /// Remaining useful life at `t_p` for standardized inputs `xi`.
    pub fn rul(&self, xi: &[f64], t_p: f64) -> Result<RulResult> {
        let nominal = self.nominal_state(t_p);
        self.rul_with_nominal(xi, t_p, &nominal)
    }

    /// As [`BatteryModel::rul`] with a precomputed nominal state.
    pub fn rul_with_nominal(&self, xi: &[f64], t_p: f64, nominal: &BatteryState) -> Result<RulResult> {
        let inputs = self.input_map(xi, nominal)?;
        self.simulate(&inputs, t_p, false)
    }
}

/// Input mode of the standardized battery variables: Beta coordinate at its
/// mean, normals at zero.
pub fn battery_mean_input(model: &BatteryModel) -> [f64; 7] {
    let y = model.beta_alpha / (model.beta_alpha + model.beta_beta);
    [2.0 * y - 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn duffing_initial_condition_and_linear_case() {
        assert_eq!(duffing_solve(&[0.3, -0.2, 0.9], 0.0, DUFFING_DT).unwrap(), 1.0);
        let t = 4.0;
        let w1 = 2.0 * std::f64::consts::PI;
        let zeta: f64 = 0.05;
        let wd = w1 * (1.0 - zeta * zeta).sqrt();
        let exact = (-zeta * w1 * t).exp() * ((wd * t).cos() + zeta * w1 / wd * (wd * t).sin());
        let u = duffing_solve(&[0.0, 0.0, -2.0], t, DUFFING_DT).unwrap();
        assert!((u - exact).abs() < 1e-6, "{u} vs {exact}");
    }

    #[test]
    fn duffing_step_halving() {
        let a = duffing_solve(&[0.0; 3], 4.0, DUFFING_DT).unwrap();
        let b = duffing_solve(&[0.0; 3], 4.0, DUFFING_DT / 2.0).unwrap();
        assert!((a - b).abs() < 1e-8);
    }

    #[test]
    fn duffing_trajectory_matches_single_solves() {
        let xi = [0.4, -0.7, 0.1];
        let times = [3.0, 1.0, 2.5005, 4.0];
        let traj = duffing_trajectory(&xi, &times, DUFFING_DT).unwrap();
        for (t, u) in times.iter().zip(&traj) {
            assert_relative_eq!(*u, duffing_solve(&xi, *t, DUFFING_DT).unwrap(), epsilon = 1e-14);
        }
        assert!(duffing_solve(&xi, -1.0, DUFFING_DT).is_err());
        assert!(duffing_solve(&xi, 1.0, 0.0).is_err());
    }

    #[test]
    fn battery_full_charge_values() {
        let m = BatteryModel::default();
        let s = m.full_charge();
        assert_eq!(m.params.soc(s.q_b), 1.0);
        assert_relative_eq!(m.voltage(&s), 31100.0 / 1563.1, epsilon = 1e-12);
        assert!((m.params.r_sp(1.0) - 0.0272).abs() < 5e-7);
    }

    #[test]
    fn zero_nominal_state_gets_absolute_spread() {
        let m = BatteryModel::default();
        let nominal = m.full_charge();
        let inp = m.input_map(&[0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0], &nominal).unwrap();
        assert_relative_eq!(inp.state.q_sp, 0.1);
        assert_eq!(inp.state.q_b, m.params.q_max);
        let mode = m.input_map(&battery_mean_input(&m), &nominal).unwrap();
        assert_relative_eq!(mode.current, m.mean_current(), epsilon = 1e-12);
        assert_eq!(mode.noise, [0.0; 3]);
    }

    #[test]
    fn larger_current_shortens_life() {
        let m = BatteryModel::default();
        let s = m.full_charge();
        let run = |i: f64| {
            m.simulate(
                &BatteryInputs {
                    current: i,
                    state: s,
                    noise: [0.0; 3],
                },
                0.0,
                false,
            )
            .unwrap()
            .rul
        };
        assert!(run(24.0) < run(16.0));
    }

    #[test]
    fn no_crossing_reports_horizon() {
        let m = BatteryModel {
            horizon: 100.0,
            ..BatteryModel::default()
        };
        let inputs = BatteryInputs {
            current: 1.0,
            state: m.full_charge(),
            noise: [0.0; 3],
        };
        assert_eq!(m.simulate(&inputs, 0.0, false), Err(Error::HorizonExceeded { horizon: 100.0 }));
    }

    #[test]
    fn manufactured_without_noise_is_exact() {
        let spec = BasisSpec::isotropic(PolyFamily::Legendre, 2, 2).unwrap();
        let m = ManufacturedModel::random(spec.len(), 0.0, 4);
        let xi = [0.2, -0.5];
        assert_eq!(m.eval(&spec, &xi, 1), m.exact(&spec, &xi));
        let mut c = DVector::zeros(spec.len());
        c[0] = 1.0;
        let m = ManufacturedModel::with_coefficients(c, 0.03);
        let v = m.eval(&spec, &[0.9, 0.9], 2);
        assert!((v - 1.0).abs() < 0.2);
    }
}
