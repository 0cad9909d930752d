//! Low-rank re-solve after a few tuning changes.
//!
//! Changing the tuning of k meta-atoms only moves k diagonal entries of M:
//! `M' = M + U D U^T` with selector columns U and `D = diag(1/alpha' - 1/alpha)`.
//! The Woodbury identity then gives
//!
//! ```text
//! M'^-1 b = M^-1 b - W (I + D C)^-1 D U^T M^-1 b,   W = M^-1 U,  C = U^T W,
//! ```
//!
//! which costs k solves against the retained factorization plus a k x k
//! system instead of a fresh dense factorization. The `(I + D C)^-1 D` form
//! is used rather than `(D^-1 + C)^-1` so that unchanged (delta = 0) entries
//! are harmless.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{system_fingerprint, DipoleSolution, FactoredSystem};
use crate::error::{Error, Result};
use crate::physics::meta_atom_polarizability;
use crate::tuning::TuningState;

impl FactoredSystem {
    /// Re-solve the feed problem after changing the tuning of the listed
    /// meta-atoms, without re-factoring. `base` must be the direct solution
    /// of this factored system. One iterative-refinement pass keeps the
    /// result at fresh-solve accuracy.
    pub fn woodbury_update(
        &self,
        base: &DipoleSolution,
        changes: &[(usize, f64)],
    ) -> Result<DipoleSolution> {
        let sys = &self.system;
        if base.system_fingerprint != sys.fingerprint {
            return Err(Error::FingerprintMismatch(
                "base solution does not belong to this factored system".into(),
            ));
        }
        if changes.is_empty() {
            return Ok(base.clone());
        }

        let mut sorted: Vec<(usize, f64)> = changes.to_vec();
        sorted.sort_by_key(|&(i, _)| i);
        for w in sorted.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::InvalidArgument(format!(
                    "duplicate change index {}",
                    w[0].0
                )));
            }
        }
        for &(index, value) in &sorted {
            if index >= sys.n_meta {
                return Err(Error::NotAMetaAtom {
                    index,
                    n_meta: sys.n_meta,
                });
            }
            if !(0.0..=1.0).contains(&value) || !value.is_finite() {
                return Err(Error::TuningOutOfRange { index, value });
            }
        }

        let n = sys.dim();
        let k = sorted.len();

        // Diagonal shifts: delta_j = 1/alpha(c_j') - 1/alpha(c_j).
        let mut deltas = Vec::with_capacity(k);
        for &(index, value) in &sorted {
            let alpha_new = meta_atom_polarizability(value, &sys.model, sys.frequency)?.value;
            let delta = Complex64::new(1.0, 0.0) / alpha_new - sys.matrix[(index, index)];
            deltas.push(delta);
        }

        // W = M^-1 U (k solves against the retained factorization).
        let mut selectors = DMatrix::<Complex64>::zeros(n, k);
        for (col, &(index, _)) in sorted.iter().enumerate() {
            selectors[(index, col)] = Complex64::new(1.0, 0.0);
        }
        let w = self.solve_matrix(&selectors)?;

        // Capacitance system K = I + D C with C[r][c] = (U^T W)[r][c].
        let mut capacity = DMatrix::<Complex64>::identity(k, k);
        for r in 0..k {
            for c in 0..k {
                capacity[(r, c)] += deltas[r] * w[(sorted[r].0, c)];
            }
        }
        let capacity_lu = capacity.lu();

        let apply_update = |rhs_solution: &DVector<Complex64>| -> Result<DVector<Complex64>> {
            let mut small = DVector::<Complex64>::zeros(k);
            for (r, &(index, _)) in sorted.iter().enumerate() {
                small[r] = deltas[r] * rhs_solution[index];
            }
            let z = capacity_lu.solve(&small).ok_or(Error::DegenerateSystem {
                condition: f64::INFINITY,
                frequency: sys.frequency,
                seed: sys.topology_seed,
            })?;
            Ok(rhs_solution - &w * z)
        };

        let mut p = apply_update(&base.moments)?;

        // Updated-matrix product without forming M': M' x = M x + U D U^T x.
        let updated_mul = |x: &DVector<Complex64>| -> DVector<Complex64> {
            let mut y = &sys.matrix * x;
            for (r, &(index, _)) in sorted.iter().enumerate() {
                y[index] += deltas[r] * x[index];
            }
            y
        };

        // One refinement pass: solve M' d = e - M' p via the same identity.
        let r = &sys.source - updated_mul(&p);
        let r_sol = self.solve(&r)?;
        p += apply_update(&r_sol)?;

        let residual = {
            let y = updated_mul(&p);
            let diff = &y - &sys.source;
            diff.norm() / sys.source.norm()
        };

        // Fingerprint of the system this solution actually solves.
        let mut tuning = sys.tuning.clone();
        for &(index, value) in &sorted {
            tuning.values[index] = value;
        }
        let fingerprint = system_fingerprint(
            &sys.topology_fingerprint,
            &sys.model,
            sys.frequency,
            sys.mode,
            &tuning,
        );

        Ok(DipoleSolution {
            moments: p,
            n_meta: sys.n_meta,
            residual,
            system_fingerprint: fingerprint,
            topology_fingerprint: sys.topology_fingerprint.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::sample_configs;
    use crate::geometry::{generate_topology, PhysicsContext, TopologySpec};
    use crate::physics::LorentzianModel;
    use crate::solver::{assemble, solve_direct, CouplingMode, FactoredSystem};

    fn setup(seed: u64) -> (FactoredSystem, DipoleSolution, TuningState) {
        let ctx = PhysicsContext::x_band();
        let mut spec = TopologySpec::default_at(&ctx);
        spec.n_meta_atoms = 16;
        spec.via_spacing = ctx.wavelength / 3.0;
        spec.rng_seed = seed;
        let t = generate_topology(&spec, &ctx).unwrap();
        let s = sample_configs(seed.wrapping_add(7), 1, 16).remove(0);
        let sys = assemble(&t, &s, &LorentzianModel::default(), CouplingMode::Full).unwrap();
        let f = FactoredSystem::new(sys).unwrap();
        let base = f.solve_source().unwrap();
        (f, base, s)
    }

    fn fresh_solution(
        factored: &FactoredSystem,
        tuning: &TuningState,
        seed: u64,
    ) -> DipoleSolution {
        let ctx = PhysicsContext::x_band();
        let mut spec = TopologySpec::default_at(&ctx);
        spec.n_meta_atoms = 16;
        spec.via_spacing = ctx.wavelength / 3.0;
        spec.rng_seed = seed;
        let t = generate_topology(&spec, &ctx).unwrap();
        let sys = assemble(&t, tuning, &factored.system.model, CouplingMode::Full).unwrap();
        solve_direct(sys).unwrap()
    }

    #[test]
    fn empty_change_set_returns_the_base() {
        let (f, base, _) = setup(1);
        let updated = f.woodbury_update(&base, &[]).unwrap();
        assert_eq!(updated, base);
    }

    #[test]
    fn single_change_matches_fresh_solve() {
        let (f, base, s) = setup(2);
        let mut tuning = s.clone();
        tuning.values[5] = 0.91;
        let updated = f.woodbury_update(&base, &[(5, 0.91)]).unwrap();
        let fresh = fresh_solution(&f, &tuning, 2);
        let err = (&updated.moments - &fresh.moments).norm() / fresh.moments.norm();
        assert!(err < 1e-9, "relative error {err}");
        assert_eq!(updated.system_fingerprint, fresh.system_fingerprint);
    }

    #[test]
    fn eight_simultaneous_changes_match_fresh_solve() {
        let (f, base, s) = setup(3);
        let mut tuning = s.clone();
        let mut changes = Vec::new();
        for (i, idx) in [0usize, 2, 3, 7, 9, 11, 12, 15].iter().enumerate() {
            let v = 0.1 + 0.1 * i as f64;
            tuning.values[*idx] = v;
            changes.push((*idx, v));
        }
        let updated = f.woodbury_update(&base, &changes).unwrap();
        let fresh = fresh_solution(&f, &tuning, 3);
        let err = (&updated.moments - &fresh.moments).norm() / fresh.moments.norm();
        assert!(err < 1e-9, "relative error {err}");
    }

    #[test]
    fn via_index_is_rejected() {
        let (f, base, _) = setup(4);
        let n_meta = f.system.n_meta;
        match f.woodbury_update(&base, &[(n_meta, 0.5)]) {
            Err(Error::NotAMetaAtom { .. }) => {}
            other => panic!("expected NotAMetaAtom, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_and_out_of_range_changes_are_rejected() {
        let (f, base, _) = setup(5);
        assert!(f.woodbury_update(&base, &[(1, 0.2), (1, 0.3)]).is_err());
        assert!(f.woodbury_update(&base, &[(1, 1.2)]).is_err());
    }

    #[test]
    fn foreign_base_solution_is_rejected() {
        let (f, _, _) = setup(6);
        let (_, other_base, _) = setup(7);
        assert!(matches!(
            f.woodbury_update(&other_base, &[(0, 0.4)]),
            Err(Error::FingerprintMismatch(_))
        ));
    }
}
