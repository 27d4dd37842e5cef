//! Reaction substep: first-order Arrhenius burning with heat release.

use crate::constitutive::PhysParams;
use crate::error::{Error, Result};
use crate::grid::State;

/// Frozen-temperature exponential update `z <- z exp(-phi(theta) dt)` and
/// the average heat-release rate `lambda (z_before - z_after) / dt` it
/// implies. Diffusion is handled by the species diffusion substep.
pub fn reaction_step(p: &PhysParams, s: &State, dt: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let mut z = Vec::with_capacity(s.z.len());
    let mut heat = Vec::with_capacity(s.z.len());
    for (&z0, &th) in s.z.iter().zip(&s.theta) {
        let z1 = z0 * (-p.phi(th) * dt).exp();
        z.push(z1);
        heat.push(p.lambda_heat * (z0 - z1) / dt);
    }
    Ok((z, heat))
}

/// Coupled reaction substep used inside the splitting.
///
/// The decay factor is evaluated with a midpoint temperature: a half-step
/// predictor burns with `phi(theta_0)`, the released heat gives `theta_h`,
/// and the full step burns with `phi(theta_h)`. The released heat is added
/// to the internal energy at fixed `v`, so `e + lambda z` is conserved to
/// roundoff and `z` stays in `[0, 1]`.
pub(crate) fn reaction_substep(p: &PhysParams, s: &mut State, h: f64) -> Result<()> {
    for i in 0..s.z.len() {
        let z0 = s.z[i];
        if z0 == 0.0 {
            continue;
        }
        let v = s.v[i];
        let th0 = s.theta[i];
        let e0 = p.e(v, th0);
        let zh = z0 * (-0.5 * h * p.phi(th0)).exp();
        let th_h = p
            .temperature_from_energy(v, e0 + p.lambda_heat * (z0 - zh), th0)
            .ok_or(Error::PositivityLoss { stage: "reaction", index: i })?;
        let z1 = z0 * (-h * p.phi(th_h)).exp();
        let e1 = e0 + p.lambda_heat * (z0 - z1);
        s.theta[i] = p
            .temperature_from_energy(v, e1, th_h)
            .ok_or(Error::PositivityLoss { stage: "reaction", index: i })?;
        s.z[i] = z1;
    }
    Ok(())
}
