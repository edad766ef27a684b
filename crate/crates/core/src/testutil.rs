//! Shared fixtures for the crate's unit tests: one small trained surrogate
//! (built once per test binary) and a matching scenario template.

use std::sync::OnceLock;

use crate::firegrid::{generate_pairs, FireMap, Weather};
use crate::model::{CovarianceModel, DroneSpec, MeanModel, Scenario, ServiceModel};
use crate::predictor::{train, IcnnModel, PredictorKind, TrainConfig};

/// Grid side length used by all shared fixtures.
pub(crate) const GRID: usize = 5;

/// A small but genuinely trained spread+quench surrogate.
pub(crate) fn small_sq_model() -> &'static IcnnModel {
    static MODEL: OnceLock<IcnnModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        let pairs = generate_pairs(10, GRID, 4, true, 99);
        train(
            &pairs,
            PredictorKind::SpreadQuench,
            &TrainConfig {
                hidden_layers: 2,
                hidden_width: 12,
                epochs: 8,
                batch_size: 16,
                ..Default::default()
            },
            7,
        )
        .unwrap()
    })
}

/// A two-base, two-drone scenario on the shared 5x5 grid.
pub(crate) fn small_scenario() -> Scenario {
    Scenario {
        name: "test".into(),
        grid_width: GRID,
        grid_height: GRID,
        barren: vec![],
        initial_fires: vec![],
        weather: Weather::calm(),
        bases: vec![(-1.0, 2.0), (5.0, 2.0)],
        drones: vec![
            DroneSpec { home_base: 0, range: 30.0 },
            DroneSpec { home_base: 1, range: 30.0 },
        ],
        drone_speed: 2.0,
        weight_burn: 1.0,
        weight_base: 0.3,
        weight_travel: 0.05,
        period_length: 8.0,
        safe_distance: 0.5,
        reserve_threshold: 0.2,
        risk_level: 0.05,
        big_m: 1000.0,
        service: ServiceModel {
            mean: MeanModel::Uniform { value: 0.8 },
            covariance: CovarianceModel::Kernel {
                variance: 0.09,
                length: 1.5,
                nugget: 0.01,
            },
        },
    }
}

/// A map on the shared grid with the given `(x, y, intensity)` fires lit.
pub(crate) fn small_map(fires: &[(usize, usize, f64)]) -> FireMap {
    let mut map = FireMap::new(GRID, GRID).unwrap();
    for &(x, y, g) in fires {
        map.ignite(x, y, g).unwrap();
    }
    map
}
