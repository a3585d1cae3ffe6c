//! Time-dependent scattering of a pulse off the atom.
//!
//! Once a single photon has left the system every factor but the atom is back
//! in its ground state, so `∫ L_j ρ L_k† dt` over the fiber outputs gives the
//! exact conditional atomic map for a detection in any rail superposition.

use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};

use super::assembly::{build_system, build_system_with_source, Input, ModelAssembly, A_OUT, B_OUT};
use super::envelope::PulseShape;
use super::params::SystemParams;
use super::qubit::{flip_frame, AtomicQubit, PhotonicQubit};
use crate::error::{Error, Result};
use crate::qdyn::lindblad::{propagate, LindbladKernel};
use crate::qdyn::{evolve_master, DensityMatrix, MasterOptions, C64};

/// Collapse index of each rail, in `(↓z, ↑z)` order.
const RAIL_CHANNEL: [usize; 2] = [B_OUT, A_OUT];

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PhotonSource {
    Single,
    Coherent { mean_photons: f64 },
}

#[derive(Clone, Debug)]
pub struct ChannelOptions {
    pub step_tol: f64,
    /// Integration time after the pulse ends; derived from the slowest decay
    /// rate when `None`.
    pub settle_ns: Option<f64>,
    /// Fock truncation for coherent input.
    pub n_max: usize,
}

impl Default for ChannelOptions {
    fn default() -> Self {
        Self {
            step_tol: 1e-10,
            settle_ns: None,
            n_max: 2,
        }
    }
}

/// Per-photon outcome statistics of one pulse.
#[derive(Clone, Debug)]
pub struct ChannelOutcome {
    /// Detection probability per output rail `(↓z, ↑z)`.
    pub p_rail: [f64; 2],
    pub p_loss: f64,
    /// Normalized logical atomic state conditioned on each rail.
    pub atom_given_rail: [Matrix2<C64>; 2],
    pub atom_given_loss: Matrix2<C64>,
    /// Logical atomic state averaged over all outcomes.
    pub atom_out: Matrix2<C64>,
    /// Rail density matrix of the outgoing photon, conditioned on it
    /// reaching the fiber.
    pub photon_out: Matrix2<C64>,
}

fn settle_time(params: &SystemParams) -> f64 {
    let r = params.rates();
    let atom = r.gamma_1d() + r.gamma;
    let slowest = if atom > 0.0 { atom.min(r.kappa()) } else { r.kappa() };
    20.0 / slowest
}

fn normalize(m: &Matrix2<C64>) -> Matrix2<C64> {
    let tr = m.trace().re;
    if tr > 0.0 {
        m / C64::new(tr, 0.0)
    } else {
        Matrix2::zeros()
    }
}

fn rail_monitors() -> Vec<(usize, usize)> {
    let mut v = Vec::new();
    for r1 in 0..2 {
        for r2 in 0..2 {
            v.push((RAIL_CHANNEL[r1], RAIL_CHANNEL[r2]));
        }
    }
    // loss channels
    for k in 2..6 {
        v.push((k, k));
    }
    v
}

/// Runs one pulse of light in the photonic state `photon` against an atom in
/// the logical state `atom`.
pub fn sprint_channel(
    params: &SystemParams,
    atom: &AtomicQubit,
    photon: &PhotonicQubit,
    shape: &PulseShape,
    source: PhotonSource,
    opts: &ChannelOptions,
) -> Result<ChannelOutcome> {
    let (ca, cb) = photon.mode_amplitudes();
    let (model, input, source_full, photons) = match source {
        PhotonSource::Single => (
            build_system_with_source(params, 1)?,
            Input::SinglePhoton {
                a: ca,
                b: cb,
                shape: *shape,
                t0: 0.0,
            },
            true,
            1.0,
        ),
        PhotonSource::Coherent { mean_photons } => {
            if !(mean_photons > 0.0) {
                return Err(Error::InvalidParams("coherent pulse needs a positive mean photon number".into()));
            }
            (
                build_system(params, opts.n_max)?,
                Input::CoherentPulse {
                    a: ca,
                    b: cb,
                    mean_photons,
                    shape: *shape,
                    t0: 0.0,
                },
                false,
                mean_photons,
            )
        }
    };
    let (h, cols) = model.driven(&input)?;
    let rho_atom = flip_frame(&atom.density());
    let rho0 = DensityMatrix::new(model.space(), model.lift_ground(&rho_atom, source_full))?;
    let t_end = shape.duration + opts.settle_ns.unwrap_or_else(|| settle_time(params));
    let mopts = MasterOptions {
        step_tol: opts.step_tol,
        monitors: rail_monitors(),
        breakpoints: input.breakpoints(),
        truncation_guards: if source_full { Vec::new() } else { model.truncation_guards()? },
        ..Default::default()
    };
    let sol = evolve_master(&rho0, &h, &cols, &[0.0, t_end], &mopts)?;
    let reduce = |m| flip_frame(&model.reduce_ground(m));
    let mut joint = [[Matrix2::zeros(); 2]; 2];
    let mut photon_out = Matrix2::zeros();
    for r1 in 0..2 {
        for r2 in 0..2 {
            let m = &sol.monitors[2 * r1 + r2];
            joint[r1][r2] = reduce(m);
            photon_out[(r1, r2)] = m.trace();
        }
    }
    let mut loss = Matrix2::zeros();
    for m in &sol.monitors[4..] {
        loss += reduce(m);
    }
    let atom_out = normalize(&(joint[0][0] + joint[1][1] + loss));
    let emitted = sol.emission.last().expect("final output");
    let p_rail = [emitted[RAIL_CHANNEL[0]] / photons, emitted[RAIL_CHANNEL[1]] / photons];
    let p_loss = emitted[2..].iter().sum::<f64>() / photons;
    Ok(ChannelOutcome {
        p_rail,
        p_loss,
        atom_given_rail: [normalize(&joint[0][0]), normalize(&joint[1][1])],
        atom_given_loss: normalize(&loss),
        atom_out,
        photon_out: normalize(&photon_out),
    })
}

fn vec2(m: &Matrix2<C64>) -> Vector4<C64> {
    Vector4::new(m[(0, 0)], m[(1, 0)], m[(0, 1)], m[(1, 1)])
}

fn unvec2(v: &Vector4<C64>) -> Matrix2<C64> {
    Matrix2::new(v[0], v[2], v[1], v[3])
}

/// Linear maps from the logical atomic state before one photon to the
/// unnormalized atomic state after it, per outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct Instrument {
    /// `rail[r1][r2]` maps ρ to `∫ L_{r1} ρ L_{r2}†`, rails in `(↓z, ↑z)` order.
    pub rail: [[Matrix4<C64>; 2]; 2],
    pub loss: Matrix4<C64>,
}

impl Instrument {
    /// Builds the instrument for one photon in mode amplitudes `(a, b)` with
    /// the given temporal shape.
    pub fn build(params: &SystemParams, a: C64, b: C64, shape: &PulseShape, step_tol: f64) -> Result<Self> {
        let model: ModelAssembly = build_system_with_source(params, 1)?;
        let input = Input::SinglePhoton { a, b, shape: *shape, t0: 0.0 };
        let (h, cols) = model.driven(&input)?;
        let kernel = LindbladKernel::new(&h, &cols)?;
        let t_end = shape.duration + settle_time(params);
        let opts = MasterOptions {
            step_tol,
            monitors: rail_monitors(),
            breakpoints: input.breakpoints(),
            ..Default::default()
        };
        let mut rail = [[Matrix4::zeros(); 2]; 2];
        let mut loss = Matrix4::zeros();
        for col in 0..4 {
            let mut basis = Matrix2::<C64>::zeros();
            basis[(col % 2, col / 2)] = C64::new(1.0, 0.0);
            let rho0 = model.lift_ground(&flip_frame(&basis), true);
            let sol = propagate(&kernel, &rho0, &[0.0, t_end], &opts, |_, _| Ok(()))?;
            let reduce = |m| vec2(&flip_frame(&model.reduce_ground(m)));
            for r1 in 0..2 {
                for r2 in 0..2 {
                    rail[r1][r2].set_column(col, &reduce(&sol.monitors[2 * r1 + r2]));
                }
            }
            let mut l = Vector4::zeros();
            for m in &sol.monitors[4..] {
                l += reduce(m);
            }
            loss.set_column(col, &l);
        }
        Ok(Self { rail, loss })
    }

    /// Unnormalized atomic state after the photon is found in rail state `m`.
    pub fn detect(&self, rho: &Matrix2<C64>, m: &Vector2<C64>) -> Matrix2<C64> {
        let v = vec2(rho);
        let mut acc = Vector4::zeros();
        for r1 in 0..2 {
            for r2 in 0..2 {
                let w = m[r1].conj() * m[r2];
                if w != C64::new(0.0, 0.0) {
                    acc += self.rail[r1][r2] * v * w;
                }
            }
        }
        unvec2(&acc)
    }

    pub fn lose(&self, rho: &Matrix2<C64>) -> Matrix2<C64> {
        unvec2(&(self.loss * vec2(rho)))
    }

    /// Sum over all outcomes; trace-preserving up to integration error.
    pub fn total(&self, rho: &Matrix2<C64>) -> Matrix2<C64> {
        let v = vec2(rho);
        unvec2(&(self.rail[0][0] * v + self.rail[1][1] * v + self.loss * v))
    }
}
