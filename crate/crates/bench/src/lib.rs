//! Scenario fixtures shared by the criterion benches.

use rdsim_core::scenario::{build_exp1, build_exp2, build_exp3, ScenarioConfig, StreamKind};

pub fn fixtures() -> Vec<(&'static str, ScenarioConfig)> {
    vec![
        ("exp1_audio_marked", build_exp1(true, StreamKind::Audio)),
        ("exp2_cheating", build_exp2(true)),
        (
            "exp3_video_m5",
            build_exp3(StreamKind::Video, 5).expect("in range"),
        ),
    ]
}
