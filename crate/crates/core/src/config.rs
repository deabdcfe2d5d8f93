//! Flat `key = value` run configuration.

use std::path::Path;

use crate::error::{Error, Result};
use crate::imaging::PyramidParams;

/// Settings shared by training, detection and evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub c_reg: f64,
    pub k: usize,
    pub epsilon: f64,
    pub max_iters: usize,
    pub scale_step: f64,
    pub n_levels: usize,
    pub cell_size: usize,
    pub nms_iou: f64,
    /// Over-segmentation smoothing constant (colour distance units, RGB in [0, 1]).
    pub seg_k: f64,
    pub seg_min_size: usize,
    pub freeze_hop: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            c_reg: 25.0,
            k: 4,
            epsilon: 1e-3,
            max_iters: 200,
            scale_step: 2f64.powf(-0.25),
            n_levels: 11,
            cell_size: 8,
            nms_iou: 0.5,
            seg_k: 1.0,
            seg_min_size: 20,
            freeze_hop: false,
        }
    }
}

pub const KEYS: [&str; 11] = [
    "c_reg",
    "k",
    "epsilon",
    "max_iters",
    "scale_step",
    "n_levels",
    "cell_size",
    "nms_iou",
    "seg_k",
    "seg_min_size",
    "freeze_hop",
];

impl RunConfig {
    pub fn pyramid(&self) -> PyramidParams {
        PyramidParams {
            scale_step: self.scale_step,
            n_levels: self.n_levels,
            cell_size: self.cell_size,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Parse {
            file: path.to_path_buf(),
            line: 0,
            message: e.to_string(),
        })?;
        Self::parse(&text, path)
    }

    /// Parses `key = value` lines; `#` starts a comment. Unknown keys and
    /// out-of-range values are errors naming the line.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse {
                file: origin.to_path_buf(),
                line: n + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key = value, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            cfg.set(key, value).map_err(err)?;
        }
        Ok(cfg)
    }

    /// Sets one key from its text value, validating its range.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<V: std::str::FromStr>(key: &str, value: &str) -> std::result::Result<V, String>
        where
            V::Err: std::fmt::Display,
        {
            value.parse::<V>().map_err(|e| format!("{key}: cannot parse {value:?}: {e}"))
        }
        let check = |ok: bool, range: &str| if ok { Ok(()) } else { Err(format!("{key} = {value} outside {range}")) };
        match key {
            "c_reg" => {
                self.c_reg = num(key, value)?;
                check(self.c_reg > 0.0 && self.c_reg.is_finite(), "(0, inf)")
            }
            "k" => {
                self.k = num(key, value)?;
                check((2..=64).contains(&self.k), "[2, 64]")
            }
            "epsilon" => {
                self.epsilon = num(key, value)?;
                check(self.epsilon > 0.0 && self.epsilon < 1.0, "(0, 1)")
            }
            "max_iters" => {
                self.max_iters = num(key, value)?;
                Ok(())
            }
            "scale_step" => {
                self.scale_step = num(key, value)?;
                check(self.scale_step > 0.0 && self.scale_step < 1.0, "(0, 1)")
            }
            "n_levels" => {
                self.n_levels = num(key, value)?;
                check(self.n_levels >= 1, "[1, inf)")
            }
            "cell_size" => {
                self.cell_size = num(key, value)?;
                check((2..=64).contains(&self.cell_size), "[2, 64]")
            }
            "nms_iou" => {
                self.nms_iou = num(key, value)?;
                check(self.nms_iou > 0.0 && self.nms_iou < 1.0, "(0, 1)")
            }
            "seg_k" => {
                self.seg_k = num(key, value)?;
                check(self.seg_k > 0.0 && self.seg_k.is_finite(), "(0, inf)")
            }
            "seg_min_size" => {
                self.seg_min_size = num(key, value)?;
                check(self.seg_min_size >= 1, "[1, inf)")
            }
            "freeze_hop" => {
                self.freeze_hop = num(key, value)?;
                Ok(())
            }
            _ => Err(format!("unknown key {key:?} (known: {})", KEYS.join(", "))),
        }
    }

    /// Text form accepted by [`RunConfig::parse`].
    pub fn to_text(&self) -> String {
        format!(
            "c_reg = {}\nk = {}\nepsilon = {}\nmax_iters = {}\nscale_step = {}\nn_levels = {}\ncell_size = {}\nnms_iou = {}\nseg_k = {}\nseg_min_size = {}\nfreeze_hop = {}\n",
            self.c_reg,
            self.k,
            self.epsilon,
            self.max_iters,
            self.scale_step,
            self.n_levels,
            self.cell_size,
            self.nms_iou,
            self.seg_k,
            self.seg_min_size,
            self.freeze_hop
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig> {
        RunConfig::parse(text, Path::new("run.cfg"))
    }

    #[test]
    fn defaults_and_overrides() {
        let c = parse("# comment\nc_reg = 10\n\nk=6  # trailing\n").unwrap();
        assert_eq!(c.c_reg, 10.0);
        assert_eq!(c.k, 6);
        assert_eq!(c.n_levels, 11);
        assert_eq!(parse(&RunConfig::default().to_text()).unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_and_out_of_range_keys_are_rejected() {
        match parse("c_reg = 1\nbogus = 3\n") {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("bogus"));
            }
            other => panic!("{other:?}"),
        }
        assert!(parse("nms_iou = 1.5").is_err());
        assert!(parse("k = 1").is_err());
        assert!(parse("scale_step = 1").is_err());
        assert!(parse("cell_size = eight").is_err());
        assert!(parse("just words").is_err());
    }
}
