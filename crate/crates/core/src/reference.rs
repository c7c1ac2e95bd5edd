//! The reference configuration: an X-band airborne system imaging a
//! 15 m x 15 m scene at 30 km slant range, three test targets, and the
//! 31 x 31 x 11 x 11 extended target space.

use crate::radar::{ExtendedGrid, GridCoord, RadarParams, Scene, Target, SPEED_OF_LIGHT};
use crate::Complex64;

pub const SCENE_CENTER_RANGE: f64 = 30_000.0;
pub const SCENE_SIZE: f64 = 15.0;

/// 31 x 31 spatial cells of 0.5 m, 11 x 11 velocity cells of 2 m/s
/// spanning -10..=10 m/s. The scene's near edge is at 30 km - 7.5 m and
/// its azimuth extent starts at the zero-Doppler line.
pub fn scene_grid() -> ExtendedGrid {
    ExtendedGrid {
        x_origin: SCENE_CENTER_RANGE - SCENE_SIZE / 2.0,
        y_origin: 0.0,
        vx_origin: -10.0,
        vy_origin: -10.0,
        bin_x: 0.5,
        bin_y: 0.5,
        bin_vx: 2.0,
        bin_vy: 2.0,
        nx: 31,
        ny: 31,
        nvx: 11,
        nvy: 11,
    }
}

/// 250 m/s platform, 9.375 GHz carrier, 100 MHz / 10 us chirp sampled at
/// 120 MHz, 300 Hz PRF, 1213 x 595 samples. The fast-time window opens at
/// the two-way delay of the grid's near edge.
pub fn radar_params() -> RadarParams {
    let grid = scene_grid();
    RadarParams::new(
        250.0,
        9.375e9,
        100e6,
        10e-6,
        120e6,
        300.0,
        1213,
        595,
        RadarParams::window_start_for(&grid, SPEED_OF_LIGHT),
        SPEED_OF_LIGHT,
    )
    .expect("reference parameters are valid")
}

/// Grid cells of the three test targets: a static scatterer at local
/// (4, 2.5) m, a 10 m/s range mover at (7.5, 10) m and a (4, 4) m/s mover
/// at (11.5, 8) m.
pub fn three_target_coords() -> [GridCoord; 3] {
    [
        GridCoord::new(8, 5, 5, 5),
        GridCoord::new(15, 20, 10, 5),
        GridCoord::new(23, 16, 7, 7),
    ]
}

/// The three test targets with unit reflectivity.
pub fn three_target_scene() -> Scene {
    let grid = scene_grid();
    Scene::new(
        three_target_coords()
            .iter()
            .map(|&c| {
                let k = grid.to_physical(c).expect("on grid");
                Target::new(k.x, k.y, k.vx, k.vy, Complex64::new(1.0, 0.0))
            })
            .collect(),
    )
}
