use crate::error::{Error, Result};
use crate::imaging::{SceneConfig, ShapeSpec};

pub const PRESETS: [&str; 3] = ["moving-squares", "fast-crossing", "static"];

/// Named synthetic scenes.
pub fn preset(name: &str, seed: u64) -> Result<SceneConfig> {
    match name {
        // a few linear movers with mild motion blur
        "moving-squares" => Ok(SceneConfig {
            side: 128,
            n_frames: 30,
            random_shapes: 3,
            random_shape_side: 12,
            random_max_speed: 2.0,
            background: 20,
            exposure: 0.5,
            seed,
            ..SceneConfig::default()
        }),
        // two slow squares plus one fast object that is on screen for less
        // than a frame interval and is smeared in the captured frame
        "fast-crossing" => {
            let fast = ShapeSpec {
                intensity: 240,
                visible: Some((5.4, 6.3)),
                ..ShapeSpec::square(8.0 - 12.0 * 5.4, 40.0, 8, 12.0, 0.0)
            };
            Ok(SceneConfig {
                side: 64,
                n_frames: 12,
                shapes: vec![
                    ShapeSpec { intensity: 200, ..ShapeSpec::square(4.0, 6.0, 8, 1.0, 0.0) },
                    ShapeSpec { intensity: 160, ..ShapeSpec::square(48.0, 4.0, 8, 0.0, 1.0) },
                    fast,
                ],
                background: 20,
                exposure: 1.0,
                seed,
                ..SceneConfig::default()
            })
        }
        "static" => Ok(SceneConfig {
            side: 32,
            n_frames: 5,
            shapes: vec![ShapeSpec { intensity: 200, ..ShapeSpec::square(8.0, 8.0, 8, 0.0, 0.0) }],
            seed,
            ..SceneConfig::default()
        }),
        other => Err(Error::InvalidArgument(format!("unknown preset `{other}`; expected one of {PRESETS:?}"))),
    }
}
