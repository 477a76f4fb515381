//! Line-based `key = value` run configuration with `[section]` headers.
//!
//! ```text
//! seed = 7
//! horizon = 30
//!
//! [scene]
//! preset = translating_rectangle
//!
//! [sprite]            # repeatable; replaces the preset's sprites
//! shape = disk
//! radius = 6
//! center = 20.5, 30.5
//! velocity = 1, 0
//!
//! [estimator]
//! patch = 2
//! ```
//!
//! Sections: top level (`seed`, `horizon`, `output_dir`), `[scene]`,
//! `[sprite]`, `[estimator]`, `[bgc]`, `[noise]`. `#` starts a comment.
//! Unknown sections and keys are errors.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::consistency::BgcParams;
use crate::error::{Error, Result};
use crate::estimator::EstimatorParams;
use crate::harness::noise::{NoiseKind, NoiseModel, VarianceLaw};
use crate::synth::{default_scene, shipped_scenes, SceneSpec, Shape, Sprite};

/// Environment variable that replaces the default seed of 0.
pub const SEED_ENV: &str = "EULERFLOW_SEED";

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub scene: SceneSpec,
    pub estimator: EstimatorParams,
    pub bgc: BgcParams,
    pub noise: NoiseModel,
    /// Frames per sequence.
    pub horizon: usize,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scene: default_scene(),
            estimator: EstimatorParams::default(),
            bgc: BgcParams::default(),
            noise: NoiseModel::default(),
            horizon: 100,
            output_dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

impl RunConfig {
    /// Defaults with the seed taken from [`SEED_ENV`] when set.
    pub fn from_env() -> Result<Self> {
        let mut cfg = Self::default();
        if let Ok(v) = std::env::var(SEED_ENV) {
            cfg.seed = v
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("{SEED_ENV} must be an unsigned integer, got {v:?}")))?;
        }
        Ok(cfg)
    }

    pub fn validated(self) -> Result<Self> {
        if self.horizon < 2 {
            return Err(Error::invalid("horizon must be >= 2"));
        }
        self.scene.validate()?;
        self.estimator.validated()?;
        self.bgc.validated()?;
        self.noise.clone().validated()?;
        Ok(self)
    }

    /// Noise model carrying the run seed.
    pub fn seeded_noise(&self) -> NoiseModel {
        NoiseModel {
            seed: self.seed,
            ..self.noise.clone()
        }
    }

    /// Applies `text` on top of `self`.
    pub fn apply(mut self, text: &str) -> Result<Self> {
        let mut section = String::new();
        let mut section_line = 0;
        let mut sprites: Option<Vec<Sprite>> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| cfg_err(line, "unterminated section header"))?
                    .trim();
                if !["scene", "sprite", "estimator", "bgc", "noise"].contains(&name) {
                    return Err(cfg_err(line, format!("unknown section [{name}]")));
                }
                section = name.to_string();
                section_line = line;
                if name == "sprite" {
                    let list = sprites.get_or_insert_with(Vec::new);
                    let depth = list.len() as u32;
                    list.push(Sprite {
                        shape: Shape::Rectangle {
                            half_width: 4.0,
                            half_height: 4.0,
                        },
                        texture_seed: depth as u64 + 1,
                        center: (0.0, 0.0),
                        velocity: (0.0, 0.0),
                        angular_velocity: 0.0,
                        depth,
                    });
                }
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| cfg_err(line, "expected `key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            let v = Value { line, key, raw: value };
            match section.as_str() {
                "" => match key {
                    "seed" => self.seed = v.parse()?,
                    "horizon" => self.horizon = v.parse()?,
                    "output_dir" => self.output_dir = PathBuf::from(value),
                    _ => return Err(v.unknown()),
                },
                "scene" => match key {
                    "preset" => {
                        let sc = &mut self.scene;
                        *sc = shipped_scenes()
                            .into_iter()
                            .find(|(n, _)| *n == value)
                            .map(|(_, s)| s)
                            .ok_or_else(|| cfg_err(line, format!("unknown scene preset {value:?}")))?;
                    }
                    "width" => self.scene.width = v.parse()?,
                    "height" => self.scene.height = v.parse()?,
                    "channels" => self.scene.channels = v.parse()?,
                    "background_seed" => self.scene.background_seed = v.parse()?,
                    "background_velocity" => self.scene.background_velocity = v.pair()?,
                    "texture_scale" => self.scene.texture_scale = v.parse()?,
                    _ => return Err(v.unknown()),
                },
                "sprite" => {
                    let s = sprites
                        .as_mut()
                        .and_then(|l| l.last_mut())
                        .ok_or_else(|| cfg_err(section_line, "sprite section without sprite"))?;
                    match key {
                        "shape" => {
                            s.shape = match value {
                                "rectangle" => Shape::Rectangle {
                                    half_width: 4.0,
                                    half_height: 4.0,
                                },
                                "disk" => Shape::Disk { radius: 4.0 },
                                _ => return Err(cfg_err(line, format!("unknown shape {value:?}"))),
                            }
                        }
                        "half_size" => {
                            let (a, b) = v.pair()?;
                            match &mut s.shape {
                                Shape::Rectangle {
                                    half_width,
                                    half_height,
                                } => (*half_width, *half_height) = (a, b),
                                Shape::Disk { .. } => return Err(cfg_err(line, "half_size needs shape = rectangle")),
                            }
                        }
                        "radius" => match &mut s.shape {
                            Shape::Disk { radius } => *radius = v.parse()?,
                            Shape::Rectangle { .. } => return Err(cfg_err(line, "radius needs shape = disk")),
                        },
                        "texture_seed" => s.texture_seed = v.parse()?,
                        "center" => s.center = v.pair()?,
                        "velocity" => s.velocity = v.pair()?,
                        "angular_velocity" => s.angular_velocity = v.parse()?,
                        "depth" => s.depth = v.parse()?,
                        _ => return Err(v.unknown()),
                    }
                }
                "estimator" => match key {
                    "levels" => self.estimator.levels = v.parse()?,
                    "patch" => self.estimator.patch = v.parse()?,
                    "search" => self.estimator.search = v.parse()?,
                    "subpixel_refine" => self.estimator.subpixel_refine = v.parse()?,
                    "shiftable_windows" => self.estimator.shiftable_windows = v.parse()?,
                    _ => return Err(v.unknown()),
                },
                "bgc" => match key {
                    "alpha1" => self.bgc.alpha1 = v.parse()?,
                    "alpha2" => self.bgc.alpha2 = v.parse()?,
                    "epsilon" => self.bgc.epsilon = v.parse()?,
                    "lambda_geo" => self.bgc.lambda_geo = v.parse()?,
                    _ => return Err(v.unknown()),
                },
                "noise" => match key {
                    "kind" => self.noise.kind = parse_kind(value).ok_or_else(|| v.invalid())?,
                    "sigma" => self.noise.sigma = v.parse()?,
                    "variance_law" => self.noise.variance_law = parse_law(value).ok_or_else(|| v.invalid())?,
                    "kurtosis" => self.noise.kurtosis_target = Some(v.parse()?),
                    "pixel_sigma" => self.noise.pixel_sigma = v.parse()?,
                    _ => return Err(v.unknown()),
                },
                _ => unreachable!("sections are checked when opened"),
            }
        }
        if let Some(list) = sprites {
            self.scene.sprites = list;
        }
        Ok(self)
    }
}

pub fn parse_kind(s: &str) -> Option<NoiseKind> {
    match s {
        "gaussian" => Some(NoiseKind::Gaussian),
        "student_t" => Some(NoiseKind::StudentT),
        "uniform_disk" => Some(NoiseKind::UniformDisk),
        _ => None,
    }
}

pub fn parse_law(s: &str) -> Option<VarianceLaw> {
    match s {
        "constant" => Some(VarianceLaw::Constant),
        "linear_in_t" => Some(VarianceLaw::LinearInT),
        _ => None,
    }
}

fn cfg_err(line: usize, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        message: message.into(),
    }
}

struct Value<'a> {
    line: usize,
    key: &'a str,
    raw: &'a str,
}

impl Value<'_> {
    fn parse<T: FromStr>(&self) -> Result<T> {
        self.raw.parse().map_err(|_| self.invalid())
    }

    fn pair(&self) -> Result<(f64, f64)> {
        let (a, b) = self.raw.split_once(',').ok_or_else(|| self.invalid())?;
        let a = a.trim().parse().map_err(|_| self.invalid())?;
        let b = b.trim().parse().map_err(|_| self.invalid())?;
        Ok((a, b))
    }

    fn invalid(&self) -> Error {
        cfg_err(self.line, format!("invalid value {:?} for {}", self.raw, self.key))
    }

    fn unknown(&self) -> Error {
        cfg_err(self.line, format!("unknown key {:?}", self.key))
    }
}

/// Reads `path` on top of [`RunConfig::from_env`].
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    RunConfig::from_env()?.apply(&text)?.validated()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::rotating_disk;

    #[test]
    fn sections_and_overrides() {
        let text = "
            seed = 9   # trailing comment
            horizon = 12
            [scene]
            preset = rotating_disk
            texture_scale = 2.5
            [bgc]
            alpha1 = 0.05
            [noise]
            kind = student_t
            kurtosis = 3
            variance_law = linear_in_t
            [estimator]
            shiftable_windows = false
        ";
        let cfg = RunConfig::default().apply(text).unwrap().validated().unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.horizon, 12);
        assert_eq!(cfg.scene.sprites, rotating_disk().sprites);
        assert_eq!(cfg.scene.texture_scale, 2.5);
        assert_eq!(cfg.bgc.alpha1, 0.05);
        assert_eq!(cfg.bgc.alpha2, 0.5);
        assert_eq!(cfg.noise.kind, NoiseKind::StudentT);
        assert_eq!(cfg.noise.kurtosis_target, Some(3.0));
        assert!(!cfg.estimator.shiftable_windows);
    }

    #[test]
    fn repeated_sprites_replace_the_preset() {
        let text = "
            [sprite]
            shape = disk
            radius = 5
            center = 10.5, 10.5
            [sprite]
            shape = rectangle
            half_size = 3, 2
            center = 30.5, 30.5
            velocity = 1, -1
            depth = 7
        ";
        let cfg = RunConfig::default().apply(text).unwrap().validated().unwrap();
        assert_eq!(cfg.scene.sprites.len(), 2);
        assert_eq!(cfg.scene.sprites[0].shape, Shape::Disk { radius: 5.0 });
        assert_eq!(cfg.scene.sprites[1].velocity, (1.0, -1.0));
        assert_eq!(cfg.scene.sprites[1].depth, 7);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = [
            ("x = 1", 1),
            ("\n[nope]", 2),
            ("[bgc]\nalpha1 = lots", 2),
            ("[scene]\n\npreset = moon", 3),
            ("horizon 5", 1),
            ("[sprite]\nradius = 3", 2),
        ];
        for (text, expect) in bad {
            match RunConfig::default().apply(text) {
                Err(Error::Config { line, .. }) => assert_eq!(line, expect, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
        assert!(RunConfig::default().apply("horizon = 1").unwrap().validated().is_err());
    }
}
