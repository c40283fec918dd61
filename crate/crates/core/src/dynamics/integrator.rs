//! Explicit Runge–Kutta integration of order 8 with embedded 5th/3rd order
//! error estimation and 7th order dense output (Dormand–Prince 8(5,3)).

// tableau coefficients are kept as published
#![allow(clippy::excessive_precision)]

use nalgebra::DVector;

use super::model::{check_dims, MechanicalModel, State};
use super::{energy, solve_mass};
use crate::error::{Error, Result};

pub const DEFAULT_SAMPLES: usize = 512;

/// Tolerances and limits of the adaptive step-size control.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub h_max: f64,
}

/// Defaults are rtol = atol = 1e-11. At 1e-10 the dense-output energy drift
/// of the one-segment arm reaches 2e-8 and shooting residuals on the rigid
/// chain stall near 1e-7.
impl Default for StepControl {
    fn default() -> Self {
        Self {
            rtol: 1e-11,
            atol: 1e-11,
            max_steps: 2_000_000,
            h_max: f64::INFINITY,
        }
    }
}

/// Uniformly sampled solution of the equations of motion.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub energy_samples: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_state(&self) -> &State {
        self.states.last().expect("trajectory is never empty")
    }

    /// Largest `|E(t) − E(0)| / max(E(0), 1e-12)` over the samples.
    pub fn relative_energy_drift(&self) -> f64 {
        let e0 = self.energy_samples[0];
        let scale = e0.abs().max(1e-12);
        self.energy_samples
            .iter()
            .map(|e| (e - e0).abs() / scale)
            .fold(0.0, f64::max)
    }
}

/// Final state of a propagation together with the accepted step sequence.
#[derive(Debug, Clone)]
pub struct Propagation {
    pub state: State,
    pub acceleration: DVector<f64>,
    pub steps: Vec<f64>,
}

/// First-order form `ẏ = (q̇, q̈)` of the model's equations of motion.
pub(crate) fn rhs<M: MechanicalModel + ?Sized>(
    model: &M,
) -> impl Fn(&[f64], &mut [f64]) -> Result<()> + '_ {
    move |y, dy| {
        let n = y.len() / 2;
        let q = DVector::from_column_slice(&y[..n]);
        let qd = DVector::from_column_slice(&y[n..]);
        let (m, f) = model.dynamics_terms(&q, &qd);
        let acc = solve_mass(m, f)?;
        dy[..n].copy_from_slice(&y[n..]);
        for i in 0..n {
            dy[n + i] = -acc[i];
        }
        Ok(())
    }
}

/// Integrates from `initial` over `[0, duration]` and returns the final state.
pub fn propagate<M: MechanicalModel + ?Sized>(
    model: &M,
    initial: &State,
    duration: f64,
    control: &StepControl,
) -> Result<Propagation> {
    check_dims(model, initial.q.len())?;
    check_dims(model, initial.qd.len())?;
    check_duration(duration)?;
    let out = run(rhs(model), &initial.to_vec(), duration, Mode::Adaptive(control), &[], |_, _| {})?;
    Ok(out.into_propagation())
}

/// Re-runs a recorded step sequence without error control. The result is a
/// smooth function of the initial state, which is what finite-difference
/// sensitivities need.
pub(crate) fn replay<M: MechanicalModel + ?Sized>(
    model: &M,
    initial: &State,
    steps: &[f64],
) -> Result<Propagation> {
    let duration: f64 = steps.iter().sum();
    let out = run(rhs(model), &initial.to_vec(), duration, Mode::Replay(steps), &[], |_, _| {})?;
    Ok(out.into_propagation())
}

/// Integrates from `initial` over `[0, duration]`, sampling the dense output
/// on `samples` uniformly spaced instants (both ends included).
pub fn integrate<M: MechanicalModel + ?Sized>(
    model: &M,
    initial: &State,
    duration: f64,
    control: &StepControl,
    samples: usize,
) -> Result<Trajectory> {
    check_dims(model, initial.q.len())?;
    check_dims(model, initial.qd.len())?;
    check_duration(duration)?;
    if samples < 2 {
        return Err(Error::Domain("at least two samples are required".into()));
    }
    let dt = duration / (samples - 1) as f64;
    let times: Vec<f64> = (0..samples)
        .map(|k| if k == samples - 1 { duration } else { k as f64 * dt })
        .collect();
    let mut states = vec![initial.clone()];
    states.reserve(samples - 1);
    run(
        rhs(model),
        &initial.to_vec(),
        duration,
        Mode::Adaptive(control),
        &times[1..],
        |_, y| states.push(State::from_slice(y)),
    )?;
    let energy_samples = states
        .iter()
        .map(|s| energy(model, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory {
        times,
        states,
        energy_samples,
    })
}

fn check_duration(duration: f64) -> Result<()> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::Domain(format!("duration must be positive, got {duration}")));
    }
    Ok(())
}

enum Mode<'a> {
    Adaptive(&'a StepControl),
    Replay(&'a [f64]),
}

#[derive(Debug)]
struct RunOutput {
    y: Vec<f64>,
    dy: Vec<f64>,
    steps: Vec<f64>,
}

impl RunOutput {
    fn into_propagation(self) -> Propagation {
        let n = self.y.len() / 2;
        Propagation {
            state: State::from_slice(&self.y),
            acceleration: DVector::from_column_slice(&self.dy[n..]),
            steps: self.steps,
        }
    }
}

/// Core stepping loop. `sample_times` must be increasing in `(0, t_end]`;
/// `emit` receives each of them with the interpolated state.
fn run<F, S>(
    f: F,
    y0: &[f64],
    t_end: f64,
    mode: Mode<'_>,
    sample_times: &[f64],
    mut emit: S,
) -> Result<RunOutput>
where
    F: Fn(&[f64], &mut [f64]) -> Result<()>,
    S: FnMut(f64, &[f64]),
{
    let dim = y0.len();
    let dense = !sample_times.is_empty();
    let mut y = y0.to_vec();
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; dim]; 16];
    let mut ystage = vec![0.0; dim];
    let mut ynew = vec![0.0; dim];
    let mut bsum = vec![0.0; dim];
    let mut cont: Vec<Vec<f64>> = vec![vec![0.0; dim]; 8];
    let mut steps = Vec::new();
    let mut next_sample = 0usize;

    f(&y, &mut k[0])?;
    let mut t = 0.0;

    let (control, replay) = match mode {
        Mode::Adaptive(c) => (Some(c), None),
        Mode::Replay(s) => (None, Some(s)),
    };
    let mut h = match control {
        Some(c) => initial_step(&f, &y, &k[0], t_end, c)?,
        None => 0.0,
    };
    let mut h_step = 0.0;
    let mut rejected = false;
    let mut n_step = 0usize;
    let mut last = false;

    loop {
        if let Some(mesh) = replay {
            if n_step == mesh.len() {
                break;
            }
            h = mesh[n_step];
            last = n_step + 1 == mesh.len();
        } else {
            let c = control.unwrap();
            if n_step >= c.max_steps {
                return Err(Error::StepLimit {
                    t,
                    max_steps: c.max_steps,
                });
            }
            if 0.1 * h.abs() <= f64::EPSILON * t.abs() || h <= 0.0 {
                return Err(Error::StepUnderflow { t });
            }
            if t + 1.01 * h >= t_end {
                h = t_end - t;
                last = true;
            }
        }

        // stages 2..=12
        for s in 1..12 {
            let row = A[s - 1];
            for i in 0..dim {
                let mut acc = 0.0;
                for (j, a) in row.iter().enumerate() {
                    if *a != 0.0 {
                        acc += a * k[j][i];
                    }
                }
                ystage[i] = y[i] + h * acc;
            }
            f(&ystage, &mut k[s])?;
        }
        // 8th order solution
        for i in 0..dim {
            let mut acc = 0.0;
            for (j, b) in B.iter().enumerate() {
                if *b != 0.0 {
                    acc += b * k[j][i];
                }
            }
            bsum[i] = acc;
            ynew[i] = y[i] + h * acc;
        }

        let accept = match control {
            None => true,
            Some(c) => {
                let mut err = 0.0;
                let mut err2 = 0.0;
                for i in 0..dim {
                    let sk = c.atol + c.rtol * y[i].abs().max(ynew[i].abs());
                    let mut e5 = 0.0;
                    for (j, e) in ERR5.iter().enumerate() {
                        if *e != 0.0 {
                            e5 += e * k[j][i];
                        }
                    }
                    let e3 = bsum[i] - BHH[0] * k[0][i] - BHH[1] * k[8][i] - BHH[2] * k[11][i];
                    err += (e5 / sk) * (e5 / sk);
                    err2 += (e3 / sk) * (e3 / sk);
                }
                let mut deno = err + 0.01 * err2;
                if deno <= 0.0 {
                    deno = 1.0;
                }
                let err = h.abs() * err * (1.0 / (deno * dim as f64)).sqrt();
                if !err.is_finite() {
                    return Err(Error::Divergence { t });
                }
                let fac11 = err.powf(0.125);
                if err <= 1.0 {
                    let fac = (1.0 / 6.0f64).max(3.0f64.min(fac11 / 0.9));
                    let mut h_new = (h / fac).min(c.h_max);
                    if rejected {
                        h_new = h_new.min(h);
                    }
                    rejected = false;
                    h_step = h;
                    h = h_new;
                    true
                } else {
                    h /= 3.0f64.min(fac11 / 0.9);
                    rejected = true;
                    last = false;
                    false
                }
            }
        };
        if !accept {
            continue;
        }
        if replay.is_some() {
            h_step = h;
        }
        steps.push(h_step);
        n_step += 1;

        if ynew.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { t });
        }
        // derivative at the new point (first stage of the next step)
        f(&ynew, &mut k[12])?;
        let t_new = if last { t_end } else { t + h_step };

        if dense && next_sample < sample_times.len() && sample_times[next_sample] <= t_new {
            build_dense(&f, &y, &ynew, &mut k, &mut cont, h_step)?;
            while next_sample < sample_times.len() && sample_times[next_sample] <= t_new {
                let ts = sample_times[next_sample];
                if ts >= t_new || (last && next_sample + 1 == sample_times.len()) {
                    emit(ts, &ynew);
                } else {
                    let theta = (ts - t) / h_step;
                    eval_dense(&cont, theta, &mut ystage);
                    emit(ts, &ystage);
                }
                next_sample += 1;
            }
        }

        y.copy_from_slice(&ynew);
        k.swap(0, 12);
        t = t_new;
        if last {
            break;
        }
    }

    let dy = k[0].clone();
    Ok(RunOutput { y, dy, steps })
}

/// Dense-output coefficients of the step just accepted. Uses `k[12]` (the
/// derivative at the new point) and three extra stages stored in `k[13..16]`.
fn build_dense<F>(
    f: &F,
    y: &[f64],
    ynew: &[f64],
    k: &mut [Vec<f64>],
    cont: &mut [Vec<f64>],
    h: f64,
) -> Result<()>
where
    F: Fn(&[f64], &mut [f64]) -> Result<()>,
{
    let dim = y.len();
    let mut ystage = vec![0.0; dim];
    for (s, row) in [(13usize, &A14[..]), (14, &A15[..]), (15, &A16[..])] {
        for i in 0..dim {
            let mut acc = 0.0;
            for (j, a) in row.iter().enumerate() {
                if *a != 0.0 {
                    acc += a * k[j][i];
                }
            }
            ystage[i] = y[i] + h * acc;
        }
        f(&ystage, &mut k[s])?;
    }
    for i in 0..dim {
        let ydiff = ynew[i] - y[i];
        let bspl = h * k[0][i] - ydiff;
        cont[0][i] = y[i];
        cont[1][i] = ydiff;
        cont[2][i] = bspl;
        cont[3][i] = ydiff - h * k[12][i] - bspl;
        for r in 0..4 {
            let mut acc = 0.0;
            for (j, d) in DENSE[r].iter().enumerate() {
                if *d != 0.0 {
                    acc += d * k[j][i];
                }
            }
            cont[4 + r][i] = h * acc;
        }
    }
    Ok(())
}

fn eval_dense(cont: &[Vec<f64>], theta: f64, out: &mut [f64]) {
    let t1 = 1.0 - theta;
    for i in 0..out.len() {
        let conpar = cont[4][i] + theta * (cont[5][i] + t1 * (cont[6][i] + theta * cont[7][i]));
        out[i] = cont[0][i]
            + theta * (cont[1][i] + t1 * (cont[2][i] + theta * (cont[3][i] + t1 * conpar)));
    }
}

fn initial_step<F>(f: &F, y: &[f64], f0: &[f64], t_end: f64, c: &StepControl) -> Result<f64>
where
    F: Fn(&[f64], &mut [f64]) -> Result<()>,
{
    let dim = y.len();
    let sk: Vec<f64> = y.iter().map(|v| c.atol + c.rtol * v.abs()).collect();
    let dnf: f64 = (0..dim).map(|i| (f0[i] / sk[i]).powi(2)).sum();
    let dny: f64 = (0..dim).map(|i| (y[i] / sk[i]).powi(2)).sum();
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
        1e-6
    } else {
        0.01 * (dny / dnf).sqrt()
    };
    h = h.min(c.h_max).min(t_end);
    let y1: Vec<f64> = (0..dim).map(|i| y[i] + h * f0[i]).collect();
    let mut f1 = vec![0.0; dim];
    f(&y1, &mut f1)?;
    let der2 = (0..dim)
        .map(|i| ((f1[i] - f0[i]) / sk[i]).powi(2))
        .sum::<f64>()
        .sqrt()
        / h;
    let der12 = der2.abs().max(dnf.sqrt());
    let h1 = if der12 <= 1e-15 {
        (1e-6f64).max(h * 1e-3)
    } else {
        (0.01 / der12).powf(0.125)
    };
    Ok((100.0 * h).min(h1).min(c.h_max))
}

// Dormand–Prince 8(5,3) coefficients (Hairer, Nørsett & Wanner).
// Stage indices below are zero based: k[0] = k1, ..., k[11] = k12, k[12] is
// the derivative at the new point, k[13..16] the dense-output stages.

// Nodes are not needed to step an autonomous system; kept to check the tables.
#[cfg(test)]
const C: [f64; 16] = [
    0.0,
    0.526001519587677318785587544488E-01,
    0.789002279381515978178381316732E-01,
    0.118350341907227396726757197510E+00,
    0.281649658092772603273242802490E+00,
    0.333333333333333333333333333333E+00,
    0.25E+00,
    0.307692307692307692307692307692E+00,
    0.651282051282051282051282051282E+00,
    0.6E+00,
    0.857142857142857142857142857142E+00,
    1.0,
    1.0,
    0.1E+00,
    0.2E+00,
    0.777777777777777777777777777778E+00,
];

const A: [&[f64]; 11] = [
    &[5.26001519587677318785587544488E-2],
    &[1.97250569845378994544595329183E-2, 5.91751709536136983633785987549E-2],
    &[2.95875854768068491816892993775E-2, 0.0, 8.87627564304205475450678981324E-2],
    &[
        2.41365134159266685502369798665E-1,
        0.0,
        -8.84549479328286085344864962717E-1,
        9.24834003261792003115737966543E-1,
    ],
    &[
        3.7037037037037037037037037037E-2,
        0.0,
        0.0,
        1.70828608729473871279604482173E-1,
        1.25467687566822425016691814123E-1,
    ],
    &[
        3.7109375E-2,
        0.0,
        0.0,
        1.70252211019544039314978060272E-1,
        6.02165389804559606850219397283E-2,
        -1.7578125E-2,
    ],
    &[
        3.70920001185047927108779319836E-2,
        0.0,
        0.0,
        1.70383925712239993810214054705E-1,
        1.07262030446373284651809199168E-1,
        -1.53194377486244017527936158236E-2,
        8.27378916381402288758473766002E-3,
    ],
    &[
        6.24110958716075717114429577812E-1,
        0.0,
        0.0,
        -3.36089262944694129406857109825E0,
        -8.68219346841726006818189891453E-1,
        2.75920996994467083049415600797E1,
        2.01540675504778934086186788979E1,
        -4.34898841810699588477366255144E1,
    ],
    &[
        4.77662536438264365890433908527E-1,
        0.0,
        0.0,
        -2.48811461997166764192642586468E0,
        -5.90290826836842996371446475743E-1,
        2.12300514481811942347288949897E1,
        1.52792336328824235832596922938E1,
        -3.32882109689848629194453265587E1,
        -2.03312017085086261358222928593E-2,
    ],
    &[
        -9.3714243008598732571704021658E-1,
        0.0,
        0.0,
        5.18637242884406370830023853209E0,
        1.09143734899672957818500254654E0,
        -8.14978701074692612513997267357E0,
        -1.85200656599969598641566180701E1,
        2.27394870993505042818970056734E1,
        2.49360555267965238987089396762E0,
        -3.0467644718982195003823669022E0,
    ],
    &[
        2.27331014751653820792359768449E0,
        0.0,
        0.0,
        -1.05344954667372501984066689879E1,
        -2.00087205822486249909675718444E0,
        -1.79589318631187989172765950534E1,
        2.79488845294199600508499808837E1,
        -2.85899827713502369474065508674E0,
        -8.87285693353062954433549289258E0,
        1.23605671757943030647266201528E1,
        6.43392746015763530355970484046E-1,
    ],
];

const B: [f64; 12] = [
    5.42937341165687622380535766363E-2,
    0.0,
    0.0,
    0.0,
    0.0,
    4.45031289275240888144113950566E0,
    1.89151789931450038304281599044E0,
    -5.8012039600105847814672114227E0,
    3.1116436695781989440891606237E-1,
    -1.52160949662516078556178806805E-1,
    2.01365400804030348374776537501E-1,
    4.47106157277725905176885569043E-2,
];

const BHH: [f64; 3] = [
    0.244094488188976377952755905512E+00,
    0.733846688281611857341361741547E+00,
    0.220588235294117647058823529412E-01,
];

const ERR5: [f64; 12] = [
    0.1312004499419488073250102996E-01,
    0.0,
    0.0,
    0.0,
    0.0,
    -0.1225156446376204440720569753E+01,
    -0.4957589496572501915214079952E+00,
    0.1664377182454986536961530415E+01,
    -0.3503288487499736816886487290E+00,
    0.3341791187130174790297318841E+00,
    0.8192320648511571246570742613E-01,
    -0.2235530786388629525884427845E-01,
];

const A14: [f64; 13] = [
    5.61675022830479523392909219681E-2,
    0.0,
    0.0,
    0.0,
    0.0,
    0.0,
    2.53500210216624811088794765333E-1,
    -2.46239037470802489917441475441E-1,
    -1.24191423263816360469010140626E-1,
    1.5329179827876569731206322685E-1,
    8.20105229563468988491666602057E-3,
    7.56789766054569976138603589584E-3,
    -8.298E-3,
];

const A15: [f64; 14] = [
    3.18346481635021405060768473261E-2,
    0.0,
    0.0,
    0.0,
    0.0,
    2.83009096723667755288322961402E-2,
    5.35419883074385676223797384372E-2,
    -5.49237485713909884646569340306E-2,
    0.0,
    0.0,
    -1.08347328697249322858509316994E-4,
    3.82571090835658412954920192323E-4,
    -3.40465008687404560802977114492E-4,
    1.41312443674632500278074618366E-1,
];

const A16: [f64; 15] = [
    -4.28896301583791923408573538692E-1,
    0.0,
    0.0,
    0.0,
    0.0,
    -4.69762141536116384314449447206E0,
    7.68342119606259904184240953878E0,
    4.06898981839711007970213554331E0,
    3.56727187455281109270669543021E-1,
    0.0,
    0.0,
    0.0,
    -1.39902416515901462129418009734E-3,
    2.9475147891527723389556272149E0,
    -9.15095847217987001081870187138E0,
];

const DENSE: [[f64; 16]; 4] = [
    [
        -0.84289382761090128651353491142E+01,
        0.0,
        0.0,
        0.0,
        0.0,
        0.56671495351937776962531783590E+00,
        -0.30689499459498916912797304727E+01,
        0.23846676565120698287728149680E+01,
        0.21170345824450282767155149946E+01,
        -0.87139158377797299206789907490E+00,
        0.22404374302607882758541771650E+01,
        0.63157877876946881815570249290E+00,
        -0.88990336451333310820698117400E-01,
        0.18148505520854727256656404962E+02,
        -0.91946323924783554000451984436E+01,
        -0.44360363875948939664310572000E+01,
    ],
    [
        0.10427508642579134603413151009E+02,
        0.0,
        0.0,
        0.0,
        0.0,
        0.24228349177525818288430175319E+03,
        0.16520045171727028198505394887E+03,
        -0.37454675472269020279518312152E+03,
        -0.22113666853125306036270938578E+02,
        0.77334326684722638389603898808E+01,
        -0.30674084731089398182061213626E+02,
        -0.93321305264302278729567221706E+01,
        0.15697238121770843886131091075E+02,
        -0.31139403219565177677282850411E+02,
        -0.93529243588444783865713862664E+01,
        0.35816841486394083752465898540E+02,
    ],
    [
        0.19985053242002433820987653617E+02,
        0.0,
        0.0,
        0.0,
        0.0,
        -0.38703730874935176555105901742E+03,
        -0.18917813819516756882830838328E+03,
        0.52780815920542364900561016686E+03,
        -0.11573902539959630126141871134E+02,
        0.68812326946963000169666922661E+01,
        -0.10006050966910838403183860980E+01,
        0.77771377980534432092869265740E+00,
        -0.27782057523535084065932004339E+01,
        -0.60196695231264120758267380846E+02,
        0.84320405506677161018159903784E+02,
        0.11992291136182789328035130030E+02,
    ],
    [
        -0.25693933462703749003312586129E+02,
        0.0,
        0.0,
        0.0,
        0.0,
        -0.15418974869023643374053993627E+03,
        -0.23152937917604549567536039109E+03,
        0.35763911791061412378285349910E+03,
        0.93405324183624310003907691704E+02,
        -0.37458323136451633156875139351E+02,
        0.10409964950896230045147246184E+03,
        0.29840293426660503123344363579E+02,
        -0.43533456590011143754432175058E+02,
        0.96324553959188282948394950600E+02,
        -0.39177261675615439165231486172E+02,
        -0.14972683625798562581422125276E+03,
    ],
];
