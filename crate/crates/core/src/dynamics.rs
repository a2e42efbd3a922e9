//! Euler-Lagrange gaze dynamics and their fixed-step integration.
//!
//! The particle moves under four forces: an elastic wall keeping it on the
//! retina, attraction toward squared-gradient detail (alternating between the
//! sharp and the blurred stimulus), a velocity-dependent brightness-invariance
//! term, and an optional top-down attraction. For static stimuli the
//! brightness-invariance potential is bounded by `2 g_b(x) |v|^2`; expanding
//! its Euler-Lagrange terms gives
//!
//! ```text
//! (m - 4 lambda g_b) a = 4 lambda (grad g_b . v) v - 2 lambda |v|^2 grad g_b
//!                        - grad V + eta grad C + gamma grad M
//! ```

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::field::FieldSet;
use crate::geom::Vec2;
use crate::params::EymolParams;

/// Lower clamp on the effective mass, as a fraction of `m`.
pub const MIN_EFFECTIVE_MASS_FRAC: f64 = 0.05;

/// Fields the force law needs at a continuous point.
pub trait PotentialField {
    /// Retina extent `(l1, l2)`.
    fn retina(&self) -> (f64, f64);
    /// Squared brightness-gradient magnitude `g_b`.
    fn g_b(&self, x: Vec2) -> f64;
    fn grad_g_b(&self, x: Vec2) -> Vec2;
    /// Gradient of the squared gradient magnitude of the blurred stimulus.
    fn grad_g_p(&self, x: Vec2) -> Vec2;
    /// Gradient of the top-down map, if one is loaded.
    fn grad_topdown(&self, x: Vec2) -> Option<Vec2>;
}

impl PotentialField for FieldSet {
    fn retina(&self) -> (f64, f64) {
        FieldSet::retina(self)
    }

    fn g_b(&self, x: Vec2) -> f64 {
        FieldSet::g_b(self).sample(x)
    }

    fn grad_g_b(&self, x: Vec2) -> Vec2 {
        FieldSet::grad_g_b(self).sample(x)
    }

    fn grad_g_p(&self, x: Vec2) -> Vec2 {
        FieldSet::grad_g_p(self).sample(x)
    }

    fn grad_topdown(&self, x: Vec2) -> Option<Vec2> {
        FieldSet::grad_topdown(self).map(|g| g.sample(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub x: Vec2,
    pub v: Vec2,
}

impl SimState {
    pub fn new(t: f64, x: Vec2, v: Vec2) -> Self {
        Self { t, x, v }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.x.is_finite() && self.v.is_finite()
    }
}

/// Elastic retina potential: quadratic outside `[0,l1] x [0,l2]`, zero inside.
pub fn retina_potential(x: Vec2, (l1, l2): (f64, f64), k: f64) -> f64 {
    let axis = |xi: f64, li: f64| {
        if xi > li {
            (li - xi).powi(2)
        } else if xi < 0.0 {
            xi * xi
        } else {
            0.0
        }
    };
    k * (axis(x.x, l1) + axis(x.y, l2))
}

/// `-grad V` of the retina potential.
pub fn retina_force(x: Vec2, (l1, l2): (f64, f64), k: f64) -> Vec2 {
    let axis = |xi: f64, li: f64| {
        if xi > li {
            -2.0 * k * (xi - li)
        } else if xi < 0.0 {
            -2.0 * k * xi
        } else {
            0.0
        }
    };
    Vec2::new(axis(x.x, l1), axis(x.y, l2))
}

/// `eta * grad C(t, x)` with `C = g_b cos^2(wt) + g_p sin^2(wt)`.
pub fn curiosity_force<F: PotentialField + ?Sized>(
    x: Vec2,
    t: f64,
    fields: &F,
    eta: f64,
    omega: f64,
) -> Vec2 {
    let (s, c) = (omega * t).sin_cos();
    eta * (c * c * fields.grad_g_b(x) + s * s * fields.grad_g_p(x))
}

/// `gamma * grad M(x)`, or zero without a top-down map.
pub fn topdown_force<F: PotentialField + ?Sized>(x: Vec2, fields: &F, gamma: f64) -> Vec2 {
    if gamma == 0.0 {
        return Vec2::ZERO;
    }
    fields
        .grad_topdown(x)
        .map_or(Vec2::ZERO, |g| gamma * g)
}

/// Acceleration from the expanded motion equations.
pub fn acceleration<F: PotentialField + ?Sized>(s: &SimState, fields: &F, p: &EymolParams) -> Vec2 {
    let x = s.x;
    let v = s.v;
    let mut force = retina_force(x, fields.retina(), p.k);
    if p.eta != 0.0 {
        force += curiosity_force(x, s.t, fields, p.eta, p.omega);
    }
    let mut m_eff = p.m;
    if p.lambda != 0.0 {
        let g = fields.g_b(x);
        let grad = fields.grad_g_b(x);
        force += (4.0 * p.lambda * grad.dot(v)) * v;
        force += (-2.0 * p.lambda * v.norm_sq()) * grad;
        m_eff = (p.m - 4.0 * p.lambda * g).max(MIN_EFFECTIVE_MASS_FRAC * p.m);
    }
    // skipped entirely when inactive so bottom-up runs are bit-identical
    // with or without a loaded map
    if p.gamma != 0.0 {
        if let Some(g) = fields.grad_topdown(x) {
            force += p.gamma * g;
        }
    }
    (1.0 / m_eff) * force
}

/// One classical Runge-Kutta step of size `p.dt`.
pub fn rk4_step<F: PotentialField + ?Sized>(
    s: &SimState,
    fields: &F,
    p: &EymolParams,
) -> Result<SimState> {
    let h = p.dt;
    let half = 0.5 * h;
    let a1 = acceleration(s, fields, p);
    let k1x = s.v;

    let s2 = SimState::new(s.t + half, s.x + half * k1x, s.v + half * a1);
    let a2 = acceleration(&s2, fields, p);
    let k2x = s2.v;

    let s3 = SimState::new(s.t + half, s.x + half * k2x, s.v + half * a2);
    let a3 = acceleration(&s3, fields, p);
    let k3x = s3.v;

    let s4 = SimState::new(s.t + h, s.x + h * k3x, s.v + h * a3);
    let a4 = acceleration(&s4, fields, p);
    let k4x = s4.v;

    let sixth = h / 6.0;
    let x = s.x + sixth * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
    let v = s.v + sixth * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
    let next = SimState::new(s.t + h, x, v);
    if !next.is_finite() {
        return Err(Error::Divergence {
            t: s.t,
            x: s.x.x,
            y: s.x.y,
        });
    }
    Ok(next)
}

/// Dense, uniformly sampled path of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<SimState>,
    pub width: usize,
    pub height: usize,
    pub dt: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `(t, x, y)` triples for fixation detection.
    pub fn points(&self) -> impl Iterator<Item = (f64, Vec2)> + '_ {
        self.samples.iter().map(|s| (s.t, s.x))
    }

    /// Writes `t,x,y,vx,vy` rows with 9 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,x,y,vx,vy")?;
        for s in &self.samples {
            writeln!(
                w,
                "{:.8e},{:.8e},{:.8e},{:.8e},{:.8e}",
                s.t, s.x.x, s.x.y, s.v.x, s.v.y
            )?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(f);
        self.write_csv(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    /// Reads a trajectory CSV; `dt` is taken from the first two rows.
    pub fn load_csv(path: &Path, width: usize, height: usize) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut samples = Vec::new();
        for (i, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if i == 0 || line.trim().is_empty() {
                continue;
            }
            let vals: std::result::Result<Vec<f64>, _> =
                line.split(',').map(|c| c.trim().parse::<f64>()).collect();
            let vals = vals.ok().filter(|v| v.len() == 5).ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                reason: format!("expected 5 numeric columns, got '{line}'"),
            })?;
            samples.push(SimState::new(
                vals[0],
                Vec2::new(vals[1], vals[2]),
                Vec2::new(vals[3], vals[4]),
            ));
        }
        let dt = match samples.as_slice() {
            [a, b, ..] => b.t - a.t,
            _ => 0.0,
        };
        Ok(Self {
            samples,
            width,
            height,
            dt,
        })
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for run `run_index`, independent of the order runs are executed in.
pub fn run_seed(seed: u64, run_index: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ run_index.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

/// Random initial condition near the image center.
pub fn initial_state(dims: (usize, usize), retina: (f64, f64), p: &EymolParams, run_index: u64) -> SimState {
    let mut rng = ChaCha8Rng::seed_from_u64(run_seed(p.seed, run_index));
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    let center = Vec2::new((dims.0 as f64 - 1.0) / 2.0, (dims.1 as f64 - 1.0) / 2.0);
    let x = Vec2::new(
        (center.x + p.init_pos_sigma * normal()).clamp(0.0, retina.0),
        (center.y + p.init_pos_sigma * normal()).clamp(0.0, retina.1),
    );
    let v = Vec2::new(p.init_vel_sigma * normal(), p.init_vel_sigma * normal());
    SimState::new(0.0, x, v)
}

/// Integrates from `start` for `p.sample_count() - 1` steps.
pub fn integrate<F: PotentialField + ?Sized>(
    fields: &F,
    p: &EymolParams,
    start: SimState,
    dims: (usize, usize),
) -> Result<Trajectory> {
    let n = p.sample_count();
    let mut samples = Vec::with_capacity(n);
    let mut s = start;
    samples.push(s);
    for i in 1..n {
        s = rk4_step(&s, fields, p)?;
        // keep the grid exact instead of accumulating dt
        s.t = start.t + i as f64 * p.dt;
        samples.push(s);
    }
    Ok(Trajectory {
        samples,
        width: dims.0,
        height: dims.1,
        dt: p.dt,
    })
}

/// One seeded virtual observation over the stimulus.
pub fn simulate_run(fields: &FieldSet, p: &EymolParams, run_index: u64) -> Result<Trajectory> {
    p.validate()?;
    p.check_stability(fields)?;
    let start = initial_state(fields.dims(), fields.retina(), p, run_index);
    integrate(fields, p, start, fields.dims())
}

pub fn kinetic_energy(s: &SimState, p: &EymolParams) -> f64 {
    0.5 * p.m * s.v.norm_sq()
}
