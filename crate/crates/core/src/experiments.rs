//! Numerical checks of the eigenvalue bound and of the disk perturbation
//! expansion, plus multiplicity reports at optima.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::{assemble, solve_spectrum, FemSpace, SteklovSpectrum};
use crate::geometry::{compute_diameter, BoundaryPolyline, Point};
use crate::mesh::triangulate;
use crate::optimizer::OptimState;

/// Volume of the unit ball in `R^n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(n - 2) * 2.0 * PI / n as f64,
    }
}

/// `j_p = ∫_0^π sin^p t dt`.
pub fn wallis(p: usize) -> f64 {
    match p {
        0 => PI,
        1 => 2.0,
        _ => wallis(p - 2) * (p - 1) as f64 / p as f64,
    }
}

/// Isoperimetric-type constant `C_d = ω_{d−2} / ((d−1) ω_{d−1}^{(d−2)/(d−1)})`.
pub fn perimeter_constant(d: usize) -> f64 {
    assert!(d >= 2, "dimension must be at least 2");
    let e = (d - 2) as f64 / (d - 1) as f64;
    unit_ball_volume(d - 2) / ((d - 1) as f64 * unit_ball_volume(d - 1).powf(e))
}

/// `C(d, k) = [2(k+1)]^{d+1} / (4 C_d)`.
pub fn bound_constant(d: usize, k: usize) -> f64 {
    (2.0 * (k + 1) as f64).powi(d as i32 + 1) / (4.0 * perimeter_constant(d))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundConstant {
    pub k: usize,
    pub c2k: f64,
}

/// The planar constant, `2(k+1)³`.
pub fn derive_bound_constant(k: usize) -> Result<BoundConstant> {
    if k == 0 {
        return Err(Error::InvalidInput("experiments: k must be at least 1".into()));
    }
    Ok(BoundConstant {
        k,
        c2k: bound_constant(2, k),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheck {
    pub k: usize,
    pub sigma_k: f64,
    pub area: f64,
    pub diameter: f64,
    pub bound: f64,
    /// `σ_k / bound`; at most 1 when the bound holds.
    pub margin_ratio: f64,
    pub pass: bool,
}

/// `σ_k <= C(2,k)·|Ω|/D³` from explicit values.
pub fn bound_check_values(k: usize, sigma_k: f64, area: f64, diameter: f64) -> Result<BoundCheck> {
    let c = derive_bound_constant(k)?;
    let bound = c.c2k * area / diameter.powi(3);
    Ok(BoundCheck {
        k,
        sigma_k,
        area,
        diameter,
        bound,
        margin_ratio: sigma_k / bound,
        pass: sigma_k <= bound,
    })
}

pub fn check_bound(b: &BoundaryPolyline, spec: &SteklovSpectrum, k: usize) -> Result<BoundCheck> {
    let sigma = *spec.eigenvalues.get(k).ok_or_else(|| {
        Error::InvalidInput(format!("experiments: spectrum stops before σ_{k}"))
    })?;
    bound_check_values(k, sigma, b.area(), compute_diameter(b)?.diameter)
}

/// Every accepted iterate of an ascent against the bound.
pub fn check_bound_history(state: &OptimState, k: usize) -> Result<Vec<BoundCheck>> {
    state
        .history
        .iter()
        .map(|r| bound_check_values(k, r.sigma_k, r.area, r.diameter))
        .collect()
}

/// The first-order constant `K = ((d−1)π / (2ω_d)) ∏_{p=3}^{d} j_p` as
/// written for the disk expansion `σ_1(B_ε) = 1 − εKa₂ + o(ε)`.
pub fn expansion_constant(d: usize) -> f64 {
    let prod: f64 = (3..=d).map(wallis).product();
    (d - 1) as f64 * PI / (2.0 * unit_ball_volume(d)) * prod
}

/// The planar value of `K` obtained from the lower eigenvalue of the
/// degenerate first-order perturbation of the double eigenvalue σ_1 = σ_2
/// of the unit disk under `V = cos(2φ)X`: its cluster matrix has
/// eigenvalues `±3/2`.
pub const PLANAR_EXPANSION_CONSTANT: f64 = 1.5;

/// `2(a₄ − (K − 1)a₂)`.
pub fn predicted_slope(a2: f64, a4: f64, k_const: f64) -> f64 {
    2.0 * (a4 - (k_const - 1.0) * a2)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationSpec {
    pub a2: f64,
    pub a4: f64,
    pub epsilons: Vec<f64>,
}

impl PerturbationSpec {
    pub fn validate(&self) -> Result<()> {
        let e = &self.epsilons;
        if e.len() < 3 {
            return Err(Error::InvalidInput("experiments: at least 3 epsilons are needed".into()));
        }
        if e.iter().any(|v| !(*v > 0.0 && *v <= 0.05)) || e.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(
                "experiments: epsilons must increase strictly within (0, 0.05]".into(),
            ));
        }
        if !self.a2.is_finite() || !self.a4.is_finite() {
            return Err(Error::InvalidInput("experiments: non-finite amplitude".into()));
        }
        Ok(())
    }
}

/// Discretization of the perturbed disks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiskDiscretization {
    pub n_points: usize,
    pub mesh_h: f64,
    pub fem_order: usize,
    /// Global scale applied to the geometry and the mesh size together.
    pub scale: f64,
}

impl Default for DiskDiscretization {
    fn default() -> Self {
        Self {
            n_points: 200,
            mesh_h: 0.1,
            fem_order: 2,
            scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeReport {
    pub spec: PerturbationSpec,
    /// `D(B_ε)·σ_1(B_ε)` at ε = 0 followed by each requested ε.
    pub epsilons: Vec<f64>,
    pub values: Vec<f64>,
    pub measured_slope: f64,
    /// From `K` as given by the general formula.
    pub predicted_slope: f64,
    /// From the planar perturbation constant 3/2.
    pub corrected_slope: f64,
}

/// `Q_i = (1 + ε(a₂cos2θ_i + a₄cos4θ_i))(cosθ_i, sinθ_i)`.
pub fn perturbed_disk(a2: f64, a4: f64, eps: f64, n: usize, scale: f64) -> Result<BoundaryPolyline> {
    BoundaryPolyline::new(
        (0..n)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / n as f64;
                let r = scale * (1.0 + eps * (a2 * (2.0 * t).cos() + a4 * (4.0 * t).cos()));
                Point::new(r * t.cos(), r * t.sin())
            })
            .collect(),
    )
}

/// `D·σ_1` of a polygon.
pub fn scaled_first_eigenvalue(poly: &BoundaryPolyline, mesh_h: f64, order: usize) -> Result<f64> {
    let space = FemSpace::new(triangulate(poly, mesh_h)?, order)?;
    let (k, b) = assemble(&space);
    let spec = solve_spectrum(&space, &k, &b, 2)?;
    Ok(spec.eigenvalues[1] * compute_diameter(poly)?.diameter)
}

/// Least-squares slope at ε = 0 of `ε ↦ D·σ_1`, fitted with a quadratic
/// through the unperturbed value and the requested ε.
pub fn disk_perturbation_slope(spec: &PerturbationSpec, disc: &DiskDiscretization) -> Result<SlopeReport> {
    spec.validate()?;
    let mut epsilons = vec![0.0];
    epsilons.extend(&spec.epsilons);
    let values = epsilons
        .iter()
        .map(|&e| {
            let poly = perturbed_disk(spec.a2, spec.a4, e, disc.n_points, disc.scale)?;
            scaled_first_eigenvalue(&poly, disc.mesh_h * disc.scale, disc.fem_order)
        })
        .collect::<Result<Vec<f64>>>()?;
    let coeffs = polyfit(&epsilons, &values, 2)?;
    Ok(SlopeReport {
        spec: spec.clone(),
        epsilons,
        values,
        measured_slope: coeffs[1],
        predicted_slope: predicted_slope(spec.a2, spec.a4, expansion_constant(2)),
        corrected_slope: predicted_slope(spec.a2, spec.a4, PLANAR_EXPANSION_CONSTANT),
    })
}

/// Least-squares polynomial coefficients, lowest degree first.
pub fn polyfit(x: &[f64], y: &[f64], degree: usize) -> Result<Vec<f64>> {
    if x.len() != y.len() || x.len() <= degree {
        return Err(Error::InvalidInput("experiments: too few points for the fit".into()));
    }
    let a = DMatrix::from_fn(x.len(), degree + 1, |i, j| x[i].powi(j as i32));
    let sol = a
        .svd(true, true)
        .solve(&DVector::from_column_slice(y), 1e-14)
        .map_err(|e| Error::SolverFailure(format!("least squares: {e}")))?;
    Ok(sol.iter().copied().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MultiplicityReport {
    pub k: usize,
    /// `(σ_{k+1} − σ_k)/σ_k`
    pub upper_gap: f64,
    /// `(σ_k − σ_{k−1})/σ_k`
    pub lower_gap: f64,
}

pub fn multiplicity_from_eigenvalues(eigs: &[f64], k: usize) -> Result<MultiplicityReport> {
    if k == 0 || k + 1 >= eigs.len() {
        return Err(Error::InvalidInput(format!(
            "experiments: σ_{} and σ_{} are needed",
            k.saturating_sub(1),
            k + 1
        )));
    }
    Ok(MultiplicityReport {
        k,
        upper_gap: (eigs[k + 1] - eigs[k]) / eigs[k],
        lower_gap: (eigs[k] - eigs[k - 1]) / eigs[k],
    })
}

pub fn multiplicity_report(state: &OptimState, k: usize) -> Result<MultiplicityReport> {
    multiplicity_from_eigenvalues(&state.eigenvalues, k)
}

/// Serializes any report for the output directory.
pub fn to_json<T: Serialize>(report: &T) -> String {
    serde_json::to_string_pretty(report).expect("reports serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_volumes() {
        assert_eq!(unit_ball_volume(0), 1.0);
        assert_eq!(unit_ball_volume(1), 2.0);
        assert!((unit_ball_volume(2) - PI).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-14);
    }

    #[test]
    fn quadratic_fit_is_exact_on_a_parabola() {
        let x = [0.0, 0.5, 1.0, 2.0];
        let y: Vec<f64> = x.iter().map(|t| 1.0 - 2.0 * t + 0.25 * t * t).collect();
        let c = polyfit(&x, &y, 2).unwrap();
        assert!((c[0] - 1.0).abs() < 1e-12 && (c[1] + 2.0).abs() < 1e-12 && (c[2] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn spec_validation() {
        let ok = PerturbationSpec { a2: 1.0, a4: 1.0, epsilons: vec![0.005, 0.01, 0.02] };
        assert!(ok.validate().is_ok());
        for eps in [vec![0.01, 0.02], vec![0.02, 0.01, 0.03], vec![0.01, 0.02, 0.06]] {
            let bad = PerturbationSpec { epsilons: eps, ..ok.clone() };
            assert!(bad.validate().is_err());
        }
    }
}
