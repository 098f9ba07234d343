use super::scene::{ArticleSpec, SceneSpec, TokenLogit};
use crate::error::{Error, Result};

pub const PRESET_NAMES: [&str; 3] = ["default", "no-decay", "strong-decay"];

fn tl(pairs: &[(&str, f64)]) -> Vec<TokenLogit> {
    pairs.iter().map(|&(t, l)| TokenLogit { token: t.into(), logit: l }).collect()
}

fn default_scene() -> SceneSpec {
    let article = |token: &str, logit, hal_bias| ArticleSpec { token: token.into(), logit, hal_bias };
    SceneSpec {
        name: "default".into(),
        // The > In > A > a at the first step. Nouns after "The" lean toward
        // grounded objects, nouns after "A"/"a" toward hallucinations.
        articles: vec![
            article("The", 3.0, -0.8),
            article("In", 1.9, 0.0),
            article("A", 1.6, 0.6),
            article("a", 0.8, 0.6),
        ],
        // A few strongly grounded objects and a long tail (mean 1.0).
        gt_objects: tl(&[
            ("dog", 2.6),
            ("frisbee", 2.1),
            ("grass", 1.7),
            ("tree", 1.3),
            ("person", 0.9),
            ("park", 0.5),
            ("ball", 0.1),
            ("bench", -1.2),
        ]),
        // Flat language-prior objects (mean -1.0).
        hal_objects: tl(&[
            ("cat", -0.8),
            ("car", -0.9),
            ("kite", -0.95),
            ("bicycle", -1.0),
            ("umbrella", -1.0),
            ("bird", -1.05),
            ("fence", -1.1),
            ("sky", -1.2),
        ]),
        cognition_objects: ["cat", "kite", "bicycle", "bird"].map(String::from).to_vec(),
        connectives: tl(&[(".", 1.0), ("and", 0.8), ("with", 0.6), ("near", 0.4)]),
        eos: TokenLogit { token: "</s>".into(), logit: -1.5 },
        fillers: [
            "is", "are", "on", "of", "in", "at", "to", "playing", "sitting", "standing", "green", "white", "large",
            "small", "two", "some", "there", "it", "its", "while", "looking", "running", "holding",
        ]
        .map(String::from)
        .to_vec(),
        filler_logit: -1.0,
        inadmissible_penalty: 10.0,
        decay_kappa: 0.05,
        decay_depth: 2.0,
        noise_sigma: 0.3,
    }
}

/// Built-in calibration scenes: `default`, `no-decay` (decay disabled) and
/// `strong-decay`.
pub fn preset(name: &str) -> Result<SceneSpec> {
    let mut spec = default_scene();
    match name {
        "default" => {}
        "no-decay" => spec.decay_depth = 0.0,
        "strong-decay" => {
            spec.decay_depth = 3.0;
            spec.decay_kappa = 0.1;
        }
        other => {
            return Err(Error::config(
                "scene",
                format!("unknown preset {other:?}; expected one of {}", PRESET_NAMES.join(", ")),
            ))
        }
    }
    spec.name = name.to_string();
    Ok(spec)
}
