use std::f64::consts::FRAC_PI_2;

use nkfeedback::dynamics::{evolve_numeric, EvolutionSpec, FeedbackChannel};
use nkfeedback::estimation::qfi_eta_closed;
use nkfeedback::fisher::{qfi_2d, FnFamily};
use nkfeedback::qubit::DensityMatrix;
use nkfeedback::trajectories::ensemble_stats;

#[test]
fn qfi_of_integrated_states_matches_closed_form() {
    let (lambda, t) = (0.8, 1.2);
    let fam = FnFamily::new(["eta"], vec![0.4], |x: &[f64]| {
        let ch = FeedbackChannel::dephasing(x[0], lambda, FRAC_PI_2, 0.0)?;
        let spec = EvolutionSpec::new(ch, DensityMatrix::plus(), t, 1e-3)?;
        Ok(*evolve_numeric(&spec)?.last())
    })
    .unwrap();
    let numeric = qfi_2d(&fam, 0).unwrap();
    let closed = qfi_eta_closed(0.4, lambda, FRAC_PI_2, t).unwrap();
    assert!((numeric - closed).abs() < 1e-6 * closed, "{numeric} vs {closed}");
}

#[test]
fn ensemble_is_reproducible_and_tracks_master_equation() {
    let ch = FeedbackChannel::dephasing(0.3, 0.6, FRAC_PI_2, 2.0).unwrap();
    let plus = DensityMatrix::plus();
    let a = ensemble_stats(&ch, &plus, 0.5, 1e-3, 400, 11).unwrap();
    let b = ensemble_stats(&ch, &plus, 0.5, 1e-3, 400, 11).unwrap();
    assert_eq!(a, b);

    let exact = evolve_numeric(&EvolutionSpec::new(ch, plus, 0.5, 1e-3).unwrap()).unwrap();
    let target = exact.last().to_bloch();
    let mean = a.mean.last().unwrap();
    let se = a.std_err.last().unwrap();
    assert!((mean.x - target.x).abs() < 4.0 * se[0] + 1e-9);
    assert!((mean.y - target.y).abs() < 4.0 * se[1] + 1e-9);
}
