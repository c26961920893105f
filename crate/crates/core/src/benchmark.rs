//! Lateral aircraft dynamics benchmark.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::plant::{ChannelForm, ContinuousPlant, DisturbanceSignal, Segment};

pub const SAMPLING_PERIOD: f64 = 0.01;
pub const ALPHA: f64 = 0.97;
pub const BETA: f64 = 3.0;
pub const HORIZON: f64 = 20.0;
pub const NOISE_HALF_WIDTH: f64 = 0.005;
/// Time at which the disturbance switches on.
pub const DISTURBANCE_ONSET: f64 = 10.0;
/// Start of the sinusoidal disturbance segment.
pub const SINUSOID_ONSET: f64 = 5.0 * PI;

pub fn aircraft_plant() -> ContinuousPlant {
    #[rustfmt::skip]
    let a = DMatrix::from_row_slice(4, 4, &[
        -3.79, 0.04, -52.0, 0.0,
        -0.14, -0.36, 4.24, 0.0,
         0.06, -1.0, -0.27, 0.05,
         1.0,  0.06,  0.0,  0.0,
    ]);
    #[rustfmt::skip]
    let b = DMatrix::from_row_slice(4, 2, &[
        25.0, 9.83,
        1.42, -4.2,
        0.01, 0.05,
        0.0,  0.0,
    ]);
    #[rustfmt::skip]
    let c = DMatrix::from_row_slice(3, 4, &[
        1.0, 0.0, 0.0, 0.0,
        0.0, 1.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 1.0,
    ]);
    ContinuousPlant::new(a, b, c).expect("benchmark matrices are consistent")
}

/// Switching-function gain placing the assignable sliding eigenvalue at −2.
pub fn aircraft_h() -> DMatrix<f64> {
    #[rustfmt::skip]
    let h = DMatrix::from_row_slice(2, 3, &[
        0.035306,  0.082634, 0.076550,
        0.011937, -0.210157, 0.008324,
    ]);
    h
}

/// `aircraft_h` with the sign of its first entry flipped: the assignable
/// sliding eigenvalue moves to about +2.62, so the reduced-order motion is
/// unstable.
pub fn destabilized_h() -> DMatrix<f64> {
    let mut h = aircraft_h();
    h[(0, 0)] = -h[(0, 0)];
    h
}

pub fn initial_state() -> DVector<f64> {
    DVector::from_vec(vec![-1.0, 2.0, 1.0, -2.0])
}

/// Zero on `[0, 10)`, `[2, −0.5]` on `[10, 5π)`, and
/// `[1 + sin(0.5t), 0.5·cos(t)]` from `5π` on.
pub fn aircraft_disturbance() -> DisturbanceSignal {
    let segments = vec![
        Segment::new(0.0, DISTURBANCE_ONSET, vec![ChannelForm::Zero, ChannelForm::Zero]),
        Segment::new(DISTURBANCE_ONSET, SINUSOID_ONSET, vec![ChannelForm::Constant(2.0), ChannelForm::Constant(-0.5)]),
        Segment::new(
            SINUSOID_ONSET,
            f64::INFINITY,
            vec![
                ChannelForm::Sine { offset: 1.0, amplitude: 1.0, omega: 0.5, phase: 0.0 },
                ChannelForm::Cosine { offset: 0.0, amplitude: 0.5, omega: 1.0, phase: 0.0 },
            ],
        ),
    ];
    DisturbanceSignal::new(2, segments).expect("benchmark profile is well formed")
}

/// Default steady-state window: the final 20% of the constant segment.
pub fn constant_steady_window() -> (f64, f64) {
    let len = SINUSOID_ONSET - DISTURBANCE_ONSET;
    (DISTURBANCE_ONSET + 0.8 * len, SINUSOID_ONSET)
}
