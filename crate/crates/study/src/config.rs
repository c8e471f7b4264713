//! Experiment configuration: a flat key-value file with `[section]`
//! headers and `#` comments.
//!
//! ```text
//! [experiment]
//! name = smooth
//! n = 128
//! n_ref = 256
//! t_end = 1.0
//! alphas = 0.0625, 0.03125, 0.015625
//! p_list = 1, 2, 4
//! seed = 42
//! output_dir = out/smooth
//!
//! [datum]
//! kind = smooth
//! slope = 2
//! k_max = 8
//! amplitude = 2
//! ```

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use aeul_core::bounds::BoundParams;
use aeul_core::initial_data::{self, Family, FractalGenerator};
use aeul_core::{Grid, PhysicalField, SpectralField};
use ini::Ini;

use crate::error::{Result, StudyError};

/// Initial-vorticity generator with its parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum DatumSpec {
    /// Random phases, `|q̂_k| ∝ |k|^{-slope}` up to `k_max`; rescaled so
    /// that `‖q₀‖_{L∞} = amplitude` when an amplitude is given.
    Smooth {
        slope: f64,
        k_max: usize,
        amplitude: Option<f64>,
    },
    Disc {
        center: [f64; 2],
        radius: f64,
        amplitude: f64,
        mollified: bool,
    },
    Fractal {
        depth: u32,
        amplitude: f64,
    },
    /// `amplitude·cos x₁`, a steady state for every α.
    Shear {
        amplitude: f64,
    },
}

impl DatumSpec {
    pub fn build(&self, grid: Grid, seed: u64) -> Result<SpectralField> {
        Ok(match *self {
            DatumSpec::Smooth {
                slope,
                k_max,
                amplitude,
            } => {
                let q = initial_data::smooth_random(seed, slope, k_max, grid)?;
                match amplitude {
                    Some(a) => {
                        let m = q.to_physical().max_abs();
                        q.scaled(a / m)
                    }
                    None => q,
                }
            }
            DatumSpec::Disc {
                center,
                radius,
                amplitude,
                mollified: false,
            } => initial_data::disc_patch(center, radius, amplitude, grid)?,
            DatumSpec::Disc {
                center,
                radius,
                amplitude,
                mollified: true,
            } => initial_data::disc_patch_mollified(center, radius, amplitude, grid)?,
            DatumSpec::Fractal { depth, amplitude } => {
                initial_data::fractal_patch(FractalGenerator::KochLike, depth, amplitude, grid)?.field
            }
            DatumSpec::Shear { amplitude } => PhysicalField::from_fn(grid, |x1, _| amplitude * x1.cos())
                .to_spectral()
                .without_mean(),
        })
    }

    pub fn describe(&self) -> String {
        match self {
            DatumSpec::Smooth {
                slope,
                k_max,
                amplitude,
            } => match amplitude {
                Some(a) => format!("smooth(slope={slope}, k_max={k_max}, amplitude={a})"),
                None => format!("smooth(slope={slope}, k_max={k_max})"),
            },
            DatumSpec::Disc {
                center,
                radius,
                amplitude,
                mollified,
            } => format!(
                "{}(center=({}, {}), radius={radius}, amplitude={amplitude})",
                if *mollified { "disc_mollified" } else { "disc" },
                center[0],
                center[1]
            ),
            DatumSpec::Fractal { depth, amplitude } => format!("fractal(depth={depth}, amplitude={amplitude})"),
            DatumSpec::Shear { amplitude } => format!("shear(amplitude={amplitude})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub datum: DatumSpec,
    /// Strictly decreasing, positive.
    pub alphas: Vec<f64>,
    pub n: usize,
    pub n_ref: usize,
    pub t_end: f64,
    pub p_list: Vec<f64>,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub cfl: f64,
    /// Spacing of the error samples in time.
    pub sample_interval: f64,
    /// Track particle flows and δ during sweeps.
    pub flows: bool,
    /// RK4 particle substeps per solver step.
    pub substeps: usize,
    pub family: Family,
    pub monitor_every: usize,
    /// Checkpoint every this many samples in `simulate`.
    pub checkpoint_every: Option<usize>,
    /// Constants for the bound overlays; `m` and `gamma0` are measured.
    pub bounds: BoundParams,
}

impl ExperimentConfig {
    /// Defaults around a datum, `n` and the α list; used by tests and as
    /// the base that file values override.
    pub fn new(datum: DatumSpec, n: usize, alphas: Vec<f64>) -> Self {
        ExperimentConfig {
            name: "experiment".into(),
            datum,
            alphas,
            n,
            n_ref: 2 * n,
            t_end: 1.0,
            p_list: vec![1.0, 2.0, 4.0],
            seed: 0,
            output_dir: PathBuf::from("out"),
            cfl: 0.5,
            sample_interval: 0.125,
            flows: false,
            substeps: 2,
            family: Family::Identity,
            monitor_every: 1,
            checkpoint_every: None,
            bounds: BoundParams::default(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| StudyError::config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| StudyError::config(e.to_string()))?;
        let mut sections: BTreeMap<String, Section> = BTreeMap::new();
        for (name, props) in ini.iter() {
            let name = name.unwrap_or("").to_string();
            let sec = sections.entry(name.clone()).or_insert_with(|| Section::new(&name));
            for (k, v) in props.iter() {
                sec.values.insert(k.to_string(), v.trim().to_string());
            }
        }
        for name in sections.keys() {
            if !matches!(name.as_str(), "" | "experiment" | "datum" | "bounds") {
                return Err(StudyError::config(format!("unknown section [{name}]")));
            }
        }
        if sections.get("").is_some_and(|s| !s.values.is_empty()) {
            return Err(StudyError::config("keys must appear inside a [section]"));
        }
        let mut exp = sections.remove("experiment").unwrap_or_else(|| Section::new("experiment"));
        let mut dat = sections.remove("datum").unwrap_or_else(|| Section::new("datum"));
        let mut bnd = sections.remove("bounds").unwrap_or_else(|| Section::new("bounds"));

        let datum = parse_datum(&mut dat)?;
        let n = exp.take_parse("n")?.ok_or_else(|| StudyError::config("[experiment] n is required"))?;
        let alphas = exp
            .take_list("alphas")?
            .ok_or_else(|| StudyError::config("[experiment] alphas is required"))?;
        let mut cfg = ExperimentConfig::new(datum, n, alphas);
        if let Some(v) = exp.take("name") {
            cfg.name = v;
        }
        if let Some(v) = exp.take_parse("n_ref")? {
            cfg.n_ref = v;
        }
        if let Some(v) = exp.take_parse("t_end")? {
            cfg.t_end = v;
            cfg.sample_interval = v / 8.0;
        }
        if let Some(v) = exp.take_list("p_list")? {
            cfg.p_list = v;
        }
        if let Some(v) = exp.take_parse("seed")? {
            cfg.seed = v;
        }
        if let Some(v) = exp.take("output_dir") {
            cfg.output_dir = PathBuf::from(v);
        }
        if let Some(v) = exp.take_parse("cfl")? {
            cfg.cfl = v;
        }
        if let Some(v) = exp.take_parse("sample_interval")? {
            cfg.sample_interval = v;
        }
        if let Some(v) = exp.take_parse("flows")? {
            cfg.flows = v;
        }
        if let Some(v) = exp.take_parse("substeps")? {
            cfg.substeps = v;
        }
        if let Some(v) = exp.take("family") {
            cfg.family = match v.as_str() {
                "identity" => Family::Identity,
                "mollified" => Family::Mollified,
                other => return Err(StudyError::config(format!("unknown family '{other}'"))),
            };
        }
        if let Some(v) = exp.take_parse("monitor_every")? {
            cfg.monitor_every = v;
        }
        if let Some(v) = exp.take_parse("checkpoint_every")? {
            cfg.checkpoint_every = Some(v);
        }
        for (key, slot) in [("c1", &mut cfg.bounds.c1), ("c2", &mut cfg.bounds.c2), ("c", &mut cfg.bounds.c)] {
            if let Some(v) = bnd.take_parse(key)? {
                *slot = v;
            }
        }
        exp.finish()?;
        dat.finish()?;
        bnd.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(StudyError::Config(m));
        if Grid::new(self.n).is_err() {
            return bad(format!("n = {} must be a power of two >= 8", self.n));
        }
        if Grid::new(self.n_ref).is_err() || self.n_ref < self.n {
            return bad(format!("n_ref = {} must be a power of two >= n", self.n_ref));
        }
        if self.alphas.is_empty() {
            return bad("alphas must not be empty".into());
        }
        if self.alphas.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return bad("alphas must be positive and finite".into());
        }
        if self.alphas.windows(2).any(|w| w[1] >= w[0]) {
            return bad("alphas must be strictly decreasing".into());
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be positive, got {}", self.t_end));
        }
        if !(self.sample_interval > 0.0 && self.sample_interval <= self.t_end) {
            return bad(format!("sample_interval must lie in (0, t_end], got {}", self.sample_interval));
        }
        if self.p_list.is_empty() || self.p_list.iter().any(|&p| !(p >= 1.0 && p.is_finite())) {
            return bad("p_list entries must be finite and >= 1".into());
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad(format!("cfl must lie in (0, 1], got {}", self.cfl));
        }
        if self.substeps == 0 || self.monitor_every == 0 || self.checkpoint_every == Some(0) {
            return bad("substeps, monitor_every and checkpoint_every must be positive".into());
        }
        if self.bounds.validate().is_err() {
            return bad("bound constants must be positive".into());
        }
        match self.datum {
            DatumSpec::Smooth { k_max, amplitude, .. } => {
                if k_max == 0 || 3 * k_max >= self.n {
                    return bad(format!("k_max = {k_max} must lie in 1..n/3"));
                }
                if amplitude.is_some_and(|a| !(a > 0.0 && a.is_finite())) {
                    return bad("amplitude must be positive".into());
                }
            }
            DatumSpec::Disc { radius, .. } => {
                if !(radius > 0.0 && radius < PI) {
                    return bad(format!("radius must lie in (0, pi), got {radius}"));
                }
            }
            DatumSpec::Fractal { depth, .. } => {
                if 4usize.pow(depth) > self.n {
                    return bad(format!("fractal depth {depth} unresolvable at n = {}", self.n));
                }
            }
            DatumSpec::Shear { .. } => {}
        }
        Ok(())
    }

    pub fn grid(&self) -> Grid {
        Grid::new(self.n).expect("validated")
    }

    pub fn ref_grid(&self) -> Grid {
        Grid::new(self.n_ref).expect("validated")
    }

    /// The datum generated on the reference grid and spectrally restricted
    /// to `n`, so both resolutions start from the same coefficients.
    pub fn datum_pair(&self) -> Result<(SpectralField, SpectralField)> {
        let fine = self.datum.build(self.ref_grid(), self.seed)?;
        let coarse = fine.restrict(self.grid())?.without_mean();
        Ok((coarse, fine))
    }
}

fn parse_datum(sec: &mut Section) -> Result<DatumSpec> {
    let kind = sec.take("kind").unwrap_or_else(|| "smooth".into());
    let amplitude = sec.take_parse::<f64>("amplitude")?;
    let datum = match kind.as_str() {
        "smooth" => DatumSpec::Smooth {
            slope: sec.take_parse("slope")?.unwrap_or(2.0),
            k_max: sec.take_parse("k_max")?.unwrap_or(8),
            amplitude,
        },
        "disc" | "disc_mollified" => {
            let center = match sec.take_list("center")? {
                None => [PI, PI],
                Some(v) if v.len() == 2 => [v[0], v[1]],
                Some(v) => return Err(StudyError::config(format!("center needs 2 values, got {}", v.len()))),
            };
            DatumSpec::Disc {
                center,
                radius: sec.take_parse("radius")?.unwrap_or(1.0),
                amplitude: amplitude.unwrap_or(1.0),
                mollified: kind == "disc_mollified",
            }
        }
        "fractal" => DatumSpec::Fractal {
            depth: sec.take_parse("depth")?.unwrap_or(3),
            amplitude: amplitude.unwrap_or(1.0),
        },
        "shear" => DatumSpec::Shear {
            amplitude: amplitude.unwrap_or(1.0),
        },
        other => return Err(StudyError::config(format!("unknown datum kind '{other}'"))),
    };
    Ok(datum)
}

struct Section {
    name: String,
    values: BTreeMap<String, String>,
}

impl Section {
    fn new(name: &str) -> Self {
        Section {
            name: name.to_string(),
            values: BTreeMap::new(),
        }
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.values.remove(key)
    }

    fn take_parse<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.values.remove(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| StudyError::config(format!("[{}] {key}: cannot parse '{v}'", self.name))),
        }
    }

    fn take_list(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.values.remove(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| StudyError::config(format!("[{}] {key}: cannot parse '{s}'", self.name)))
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
        }
    }

    fn finish(self) -> Result<()> {
        match self.values.keys().next() {
            Some(k) => Err(StudyError::config(format!("unknown key [{}] {k}", self.name))),
            None => Ok(()),
        }
    }
}
