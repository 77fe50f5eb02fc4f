//! Shared setups for the criterion benches; see `benches/`.

use nvcharge::spectrum::FrequencyGrid;
use nvcharge::synth::EnsembleSimConfig;

pub fn s1_grid() -> FrequencyGrid {
    FrequencyGrid::new(2858.0, 2882.0, 481).expect("valid grid")
}

pub fn desk_scale_config(n_charge: usize, n_spin: usize) -> EnsembleSimConfig {
    EnsembleSimConfig {
        n_charge_realizations: n_charge,
        n_spin_realizations: n_spin,
        gamma: 1.16,
        ..Default::default()
    }
}
