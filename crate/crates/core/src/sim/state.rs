use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::population::DynamicState;

/// Dynamic fields appended to the selected features: four season slots,
/// scaled months since the last test and the peer norm.
pub const STATE_EXTRA: usize = 6;

/// State vector of one agent: selected features, season one-hot
/// (Winter, Spring, Summer, Autumn), `months_since_last_test / 12`,
/// `peer_norm`.
pub fn encode_state(features: ArrayView1<f64>, dynamic: &DynamicState) -> Vec<f64> {
    let k = features.len();
    let mut s = vec![0.0; k + STATE_EXTRA];
    s[..k].iter_mut().zip(features.iter()).for_each(|(d, v)| *d = *v);
    s[k + dynamic.season_index()] = 1.0;
    s[k + 4] = dynamic.months_since_last_test as f64 / 12.0;
    s[k + 5] = dynamic.peer_norm;
    s
}

pub fn encode_states(features: ArrayView2<f64>, dynamic: &[DynamicState]) -> Array2<f64> {
    assert_eq!(features.nrows(), dynamic.len(), "one dynamic state per agent");
    let k = features.ncols();
    let mut out = Array2::zeros((dynamic.len(), k + STATE_EXTRA));
    for (i, (mut row, d)) in out.rows_mut().into_iter().zip(dynamic).enumerate() {
        row.slice_mut(ndarray::s![..k]).assign(&features.row(i));
        row[k + d.season_index()] = 1.0;
        row[k + 4] = d.months_since_last_test as f64 / 12.0;
        row[k + 5] = d.peer_norm;
    }
    out
}

/// Advance every agent by one month.
///
/// The calendar wraps December to January, the test counter resets on a
/// test and otherwise grows, and each testing agent raises every other
/// agent's peer norm by `peer_delta` (clamped to [0, 1]).
pub fn advance_dynamics(dynamic: &mut [DynamicState], tested: &[bool], peer_delta: f64) {
    assert_eq!(dynamic.len(), tested.len(), "one test flag per agent");
    let total = tested.iter().filter(|t| **t).count() as f64;
    for (d, &t) in dynamic.iter_mut().zip(tested) {
        let others = total - t as u8 as f64;
        d.peer_norm = (d.peer_norm + peer_delta * others).clamp(0.0, 1.0);
        d.month = d.month % 12 + 1;
        d.months_since_last_test = if t { 0 } else { d.months_since_last_test + 1 };
    }
}
