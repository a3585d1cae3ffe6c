//! Hamiltonian and collapse operators of the Λ-atom coupled to the two
//! counter-propagating resonator modes.
//!
//! Factor order is `atom ⊗ mode a ⊗ mode b`, with an optional two-level
//! source factor appended when a single-photon input is cascaded in. Atom
//! levels are `0 = ↓z (m_F = −1)`, `1 = ↑z (m_F = +1)`, `2 = e`.

use nalgebra::DMatrix;

use super::envelope::PulseShape;
use super::params::{Rates, SystemParams};
use crate::error::{Error, Result};
use crate::qdyn::{destroy, embed, make_space, transition, Coefficient, HilbertSpace, Operator, TdOperator, C64};

pub const ATOM: usize = 0;
pub const MODE_A: usize = 1;
pub const MODE_B: usize = 2;
pub const SOURCE: usize = 3;

pub const DOWN: usize = 0;
pub const UP: usize = 1;
pub const EXCITED: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ChannelTag {
    AOut,
    BOut,
    IntrinsicLoss,
    FreeSpace,
}

/// Collapse index of each output, fixed for every assembly.
pub const A_OUT: usize = 0;
pub const B_OUT: usize = 1;

#[derive(Clone, Debug)]
pub struct ModelAssembly {
    pub params: SystemParams,
    pub rates: Rates,
    pub n_max: usize,
    space: HilbertSpace,
    a: Operator,
    b: Operator,
    source: Option<Operator>,
    hamiltonian: Operator,
    collapses: Vec<(ChannelTag, Operator)>,
}

/// How light enters the two fiber-coupled modes.
#[derive(Clone, Debug)]
pub enum Input {
    None,
    /// Constant coherent field: photon flux amplitudes (per √ns) in modes a and b.
    Continuous { a: C64, b: C64 },
    /// Coherent pulse of the given mean photon number split over the modes
    /// with amplitudes `(a, b)`, starting at `t0`.
    CoherentPulse {
        a: C64,
        b: C64,
        mean_photons: f64,
        shape: PulseShape,
        t0: f64,
    },
    /// Exactly one photon in the pulse's temporal mode; needs a source factor.
    SinglePhoton { a: C64, b: C64, shape: PulseShape, t0: f64 },
}

impl Input {
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Input::CoherentPulse { shape, t0, .. } | Input::SinglePhoton { shape, t0, .. } => {
                shape.breakpoints().into_iter().map(|b| b + t0).collect()
            }
            _ => Vec::new(),
        }
    }
}

fn build(params: &SystemParams, n_max: usize, with_source: bool) -> Result<ModelAssembly> {
    params.validate()?;
    if n_max < 1 {
        return Err(Error::InvalidParams("n_max must be at least 1".into()));
    }
    let d = n_max + 1;
    let dims: Vec<usize> = if with_source { vec![3, d, d, 2] } else { vec![3, d, d] };
    let space = make_space(&dims)?;
    let r = params.rates();
    let a = embed(&destroy(d), MODE_A, &space)?;
    let b = embed(&destroy(d), MODE_B, &space)?;
    let sig = |i: usize, j: usize| embed(&transition(3, i, j), ATOM, &space);
    // |e⟩⟨↓| and |e⟩⟨↑|
    let e_down = sig(EXCITED, DOWN)?;
    let e_up = sig(EXCITED, UP)?;
    let main = C64::new(r.g * (1.0 - params.epsilon).sqrt(), 0.0);
    let cross = C64::new(r.g * params.epsilon.sqrt(), 0.0);
    let coupling = a
        .compose(&e_down)?
        .scale(main)
        .plus(&b.compose(&e_up)?.scale(main))?
        .plus(&b.compose(&e_down)?.scale(cross))?
        .plus(&a.compose(&e_up)?.scale(cross))?;
    let mut h = coupling.plus(&coupling.dagger())?;
    if r.delta != 0.0 {
        let n = a
            .dagger()
            .compose(&a)?
            .plus(&b.dagger().compose(&b)?)?
            .plus(&sig(EXCITED, EXCITED)?)?;
        h = h.plus(&n.scale(C64::new(r.delta, 0.0)))?;
    }
    let sq = |x: f64| C64::new(x.sqrt(), 0.0);
    let collapses = vec![
        (ChannelTag::AOut, a.scale(sq(2.0 * r.kappa_ex))),
        (ChannelTag::BOut, b.scale(sq(2.0 * r.kappa_ex))),
        (ChannelTag::IntrinsicLoss, a.scale(sq(2.0 * r.kappa_i))),
        (ChannelTag::IntrinsicLoss, b.scale(sq(2.0 * r.kappa_i))),
        // amplitude rate γ per branch, 2γ population decay in total
        (ChannelTag::FreeSpace, sig(DOWN, EXCITED)?.scale(sq(r.gamma))),
        (ChannelTag::FreeSpace, sig(UP, EXCITED)?.scale(sq(r.gamma))),
    ];
    let source = if with_source {
        Some(embed(&destroy(2), SOURCE, &space)?)
    } else {
        None
    };
    Ok(ModelAssembly {
        params: params.clone(),
        rates: r,
        n_max,
        space,
        a,
        b,
        source,
        hamiltonian: h,
        collapses,
    })
}

/// Atom and two modes truncated at `n_max` photons each.
pub fn build_system(params: &SystemParams, n_max: usize) -> Result<ModelAssembly> {
    build(params, n_max, false)
}

/// As [`build_system`] with a two-level source factor that emits one photon.
pub fn build_system_with_source(params: &SystemParams, n_max: usize) -> Result<ModelAssembly> {
    build(params, n_max, true)
}

impl ModelAssembly {
    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn mode_a(&self) -> &Operator {
        &self.a
    }

    pub fn mode_b(&self) -> &Operator {
        &self.b
    }

    pub fn static_hamiltonian(&self) -> &Operator {
        &self.hamiltonian
    }

    pub fn collapses(&self) -> &[(ChannelTag, Operator)] {
        &self.collapses
    }

    pub fn channel_tags(&self) -> Vec<ChannelTag> {
        self.collapses.iter().map(|(t, _)| *t).collect()
    }

    pub fn has_source(&self) -> bool {
        self.source.is_some()
    }

    /// Basis index of an atomic level with both modes empty (and the source
    /// excited when `source_full`).
    pub fn ground_index(&self, atom_level: usize, source_full: bool) -> usize {
        let mut levels = vec![atom_level, 0, 0];
        if self.source.is_some() {
            levels.push(usize::from(source_full));
        }
        self.space.index_of(&levels)
    }

    /// Projectors onto the top Fock level of each mode.
    pub fn truncation_guards(&self) -> Result<Vec<Operator>> {
        let d = self.n_max + 1;
        Ok(vec![
            embed(&transition(d, self.n_max, self.n_max), MODE_A, &self.space)?,
            embed(&transition(d, self.n_max, self.n_max), MODE_B, &self.space)?,
        ])
    }

    /// Time-dependent Hamiltonian and collapse list with the input attached.
    /// The first two collapses are always the fiber outputs `a_out`, `b_out`,
    /// which include the incident field so that their rates are output fluxes.
    pub fn driven(&self, input: &Input) -> Result<(TdOperator, Vec<TdOperator>)> {
        let mut h = TdOperator::constant(self.hamiltonian.clone());
        let mut cols: Vec<TdOperator> = self.collapses.iter().map(|(_, op)| TdOperator::constant(op.clone())).collect();
        let outs = [self.collapses[A_OUT].1.clone(), self.collapses[B_OUT].1.clone()];
        let id = Operator::identity(&self.space);
        let half_i = C64::new(0.0, 0.5);
        match input {
            Input::None => {}
            Input::Continuous { a, b } => {
                for (k, amp) in [*a, *b].into_iter().enumerate() {
                    if amp == C64::new(0.0, 0.0) {
                        continue;
                    }
                    let l = &outs[k];
                    // (i/2)(α* L − α L†)
                    h = h
                        .with_term(l.clone(), Coefficient::Constant(half_i * amp.conj()))?
                        .with_term(l.dagger(), Coefficient::Constant(-half_i * amp))?;
                    cols[k] = cols[k].clone().with_term(id.clone(), Coefficient::Constant(amp))?;
                }
            }
            Input::CoherentPulse {
                a,
                b,
                mean_photons,
                shape,
                t0,
            } => {
                if !(*mean_photons >= 0.0) {
                    return Err(Error::InvalidParams("mean photon number must be >= 0".into()));
                }
                let scale = mean_photons.sqrt();
                for (k, c) in [*a, *b].into_iter().enumerate() {
                    if c == C64::new(0.0, 0.0) || scale == 0.0 {
                        continue;
                    }
                    let (shape, t0) = (*shape, *t0);
                    let alpha = move |t: f64| c * (scale * shape.amplitude(t - t0));
                    let l = &outs[k];
                    h = h
                        .with_term(l.clone(), Coefficient::envelope(move |t| half_i * alpha(t).conj()))?
                        .with_term(l.dagger(), Coefficient::envelope(move |t| -half_i * alpha(t)))?;
                    cols[k] = cols[k].clone().with_term(id.clone(), Coefficient::envelope(alpha))?;
                }
            }
            Input::SinglePhoton { a, b, shape, t0 } => {
                let u = self.source.as_ref().ok_or_else(|| {
                    Error::InvalidParams("single-photon input needs an assembly with a source factor".into())
                })?;
                let norm = (a.norm_sqr() + b.norm_sqr()).sqrt();
                if !(norm > 0.0) {
                    return Err(Error::InvalidParams("single-photon mode amplitudes are zero".into()));
                }
                for (k, c) in [*a / norm, *b / norm].into_iter().enumerate() {
                    if c == C64::new(0.0, 0.0) {
                        continue;
                    }
                    let (shape, t0) = (*shape, *t0);
                    let gu = move |t: f64| shape.source_coupling(t - t0);
                    let l = &outs[k];
                    // (i/2)(c* g u† L − c g L† u)
                    h = h
                        .with_term(u.dagger().compose(l)?, Coefficient::envelope(move |t| half_i * c.conj() * gu(t)))?
                        .with_term(l.dagger().compose(u)?, Coefficient::envelope(move |t| -half_i * c * gu(t)))?;
                    cols[k] = cols[k].clone().with_term(u.clone(), Coefficient::envelope(move |t| c * gu(t)))?;
                }
            }
        }
        Ok((h, cols))
    }

    /// Embeds a 2×2 physical ground-state operator of the atom into the full
    /// space with empty modes (and a full source when present).
    pub fn lift_ground(&self, rho: &nalgebra::Matrix2<C64>, source_full: bool) -> DMatrix<C64> {
        let n = self.space.total_dim();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..2 {
            for j in 0..2 {
                m[(self.ground_index(i, source_full), self.ground_index(j, source_full))] = rho[(i, j)];
            }
        }
        m
    }

    /// Atomic ground-state block of a full-space operator, other factors traced.
    pub fn reduce_ground(&self, m: &DMatrix<C64>) -> nalgebra::Matrix2<C64> {
        let atom = crate::qdyn::state::partial_trace_keep(&self.space, m, &[ATOM]);
        nalgebra::Matrix2::new(atom[(0, 0)], atom[(0, 1)], atom[(1, 0)], atom[(1, 1)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spaces_and_hermiticity() {
        let p = SystemParams::nominal();
        let m = build_system(&p, 2).unwrap();
        assert_eq!(m.space().total_dim(), 27);
        assert!(m.static_hamiltonian().is_hermitian(1e-12));
        assert_eq!(build_system_with_source(&p, 1).unwrap().space().total_dim(), 24);
        assert!(build_system(&p, 0).is_err());
    }

    #[test]
    fn crosstalk_free_selection_rules() {
        let p = SystemParams {
            epsilon: 0.0,
            ..SystemParams::nominal()
        };
        let m = build_system(&p, 1).unwrap();
        let s = m.space();
        let h = m.static_hamiltonian().matrix();
        let e = s.index_of(&[EXCITED, 0, 0]);
        // ↓ couples only through mode a, ↑ only through mode b
        assert!(h[(e, s.index_of(&[DOWN, 1, 0]))].norm() > 0.0);
        assert_eq!(h[(e, s.index_of(&[DOWN, 0, 1]))].norm(), 0.0);
        assert!(h[(e, s.index_of(&[UP, 0, 1]))].norm() > 0.0);
        assert_eq!(h[(e, s.index_of(&[UP, 1, 0]))].norm(), 0.0);
    }

    #[test]
    fn collapse_rates() {
        let p = SystemParams::nominal();
        let r = p.rates();
        let m = build_system(&p, 1).unwrap();
        let s = m.space();
        let from = s.index_of(&[DOWN, 1, 0]);
        let to = s.index_of(&[DOWN, 0, 0]);
        let aout = m.collapses()[A_OUT].1.matrix()[(to, from)].re;
        assert!((aout - (2.0 * r.kappa_ex).sqrt()).abs() < 1e-15);
        let fs: f64 = m
            .collapses()
            .iter()
            .filter(|(t, _)| *t == ChannelTag::FreeSpace)
            .map(|(_, op)| {
                let col = s.index_of(&[EXCITED, 0, 0]);
                (0..s.total_dim()).map(|i| op.matrix()[(i, col)].norm_sqr()).sum::<f64>()
            })
            .sum();
        assert!((fs - 2.0 * r.gamma).abs() < 1e-15);
    }

    #[test]
    fn driven_hamiltonian_is_hermitian() {
        let p = SystemParams::nominal();
        let m = build_system_with_source(&p, 1).unwrap();
        let shape = PulseShape::new(50.0, 2.0).unwrap();
        let (h, _) = m
            .driven(&Input::SinglePhoton {
                a: C64::new(0.6, 0.0),
                b: C64::new(0.0, 0.8),
                shape,
                t0: 0.0,
            })
            .unwrap();
        for t in [1.0, 10.0, 49.5] {
            assert!(h.at(t).is_hermitian(1e-12));
        }
    }
}
