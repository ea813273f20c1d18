//! Flat `key = value` pipeline configuration.
//!
//! Lines are `section.key = value`; `#` starts a comment. Relative paths
//! resolve against the config file's directory. Unknown keys are
//! rejected so typos surface immediately.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use walkgrid_core::components::ComponentKind;
use walkgrid_core::error::{Error, Result};
use walkgrid_core::graph::IsochroneParams;
use walkgrid_core::grid::GridSpec;
use walkgrid_core::smooth::{DecayParams, IndexWeights};

/// All input files of a run, keyed by their config names.
#[derive(Debug, Clone)]
pub struct InputPaths {
    pub nodes: PathBuf,
    pub edges: PathBuf,
    pub ndvi: PathBuf,
    pub dem: PathBuf,
    pub corine: PathBuf,
    pub pop: PathBuf,
    pub urbanization: PathBuf,
    pub green_polygons: PathBuf,
    pub transit_stops: PathBuf,
    pub admin_polygons: PathBuf,
}

impl InputPaths {
    /// `(config key, path)` pairs, for validation and staleness checks.
    pub fn entries(&self) -> Vec<(&'static str, &Path)> {
        vec![
            ("input.nodes", &self.nodes),
            ("input.edges", &self.edges),
            ("input.ndvi", &self.ndvi),
            ("input.dem", &self.dem),
            ("input.corine", &self.corine),
            ("input.pop", &self.pop),
            ("input.urbanization", &self.urbanization),
            ("input.green_polygons", &self.green_polygons),
            ("input.transit_stops", &self.transit_stops),
            ("input.admin_polygons", &self.admin_polygons),
        ]
    }
}

/// Standardization domain: the whole study area or a mask raster (cells
/// with value > 0 are in the domain).
#[derive(Debug, Clone, PartialEq)]
pub enum ZscoreDomain {
    All,
    MaskFile(PathBuf),
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub inputs: InputPaths,
    pub grid: GridSpec,
    pub decay: DecayParams,
    pub iso: IsochroneParams,
    pub weights: IndexWeights,
    pub lum_window_radius: usize,
    pub gs_supersample: usize,
    pub per_capita: bool,
    pub zscore_domain: ZscoreDomain,
    /// 0 = use available parallelism.
    pub threads: usize,
    pub output_dir: PathBuf,
    pub config_path: PathBuf,
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

struct RawConfig {
    entries: BTreeMap<String, (String, usize)>,
    consumed: std::cell::RefCell<std::collections::BTreeSet<String>>,
    base_dir: PathBuf,
}

impl RawConfig {
    fn get(&self, key: &str) -> Option<&str> {
        self.consumed.borrow_mut().insert(key.to_string());
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| cfg_err(format!("missing required key `{key}`")))
    }

    fn path(&self, key: &str) -> Result<PathBuf> {
        let raw = self.require(key)?;
        let p = PathBuf::from(raw);
        Ok(if p.is_absolute() { p } else { self.base_dir.join(p) })
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse::<f64>()
                .map_err(|_| cfg_err(format!("key `{key}`: bad number `{v}`"))),
        }
    }

    fn f64_req(&self, key: &str) -> Result<f64> {
        let v = self.require(key)?;
        v.parse::<f64>()
            .map_err(|_| cfg_err(format!("key `{key}`: bad number `{v}`")))
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse::<usize>()
                .map_err(|_| cfg_err(format!("key `{key}`: bad count `{v}`"))),
        }
    }

    fn u32_req(&self, key: &str) -> Result<u32> {
        let v = self.require(key)?;
        v.parse::<u32>()
            .map_err(|_| cfg_err(format!("key `{key}`: bad count `{v}`")))
    }

    fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.get(key) {
            None => Ok(default),
            Some("true") | Some("1") | Some("yes") => Ok(true),
            Some("false") | Some("0") | Some("no") => Ok(false),
            Some(v) => Err(cfg_err(format!("key `{key}`: bad boolean `{v}`"))),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<PipelineConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut entries: BTreeMap<String, (String, usize)> = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let stripped = match line.find('#') {
                Some(pos) => &line[..pos],
                None => line,
            };
            let stripped = stripped.trim();
            if stripped.is_empty() {
                continue;
            }
            let (key, value) = stripped
                .split_once('=')
                .ok_or_else(|| Error::parse(path, line_no, format!("expected `key = value`, got `{stripped}`")))?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                return Err(Error::parse(path, line_no, "empty key".to_string()));
            }
            if let Some((_, first)) = entries.get(&key) {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!("duplicate key `{key}` (first at line {first})"),
                ));
            }
            entries.insert(key, (value, line_no));
        }

        let base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        let raw = RawConfig {
            entries,
            consumed: Default::default(),
            base_dir,
        };

        let inputs = InputPaths {
            nodes: raw.path("input.nodes")?,
            edges: raw.path("input.edges")?,
            ndvi: raw.path("input.ndvi")?,
            dem: raw.path("input.dem")?,
            corine: raw.path("input.corine")?,
            pop: raw.path("input.pop")?,
            urbanization: raw.path("input.urbanization")?,
            green_polygons: raw.path("input.green_polygons")?,
            transit_stops: raw.path("input.transit_stops")?,
            admin_polygons: raw.path("input.admin_polygons")?,
        };

        let grid = GridSpec::new(
            raw.f64_req("grid.origin_x")?,
            raw.f64_req("grid.origin_y")?,
            raw.f64_or("grid.cell_size", 100.0)?,
            raw.u32_req("grid.rows")?,
            raw.u32_req("grid.cols")?,
        )?;

        let decay = DecayParams {
            sigma_m: raw.f64_or("decay.sigma_m", DecayParams::default().sigma_m)?,
        };
        decay.validate()?;

        let iso_defaults = IsochroneParams::default();
        let iso = IsochroneParams {
            budget_s: raw.f64_or("iso.budget_s", iso_defaults.budget_s)?,
            speed_m_s: raw.f64_or("iso.speed_m_s", iso_defaults.speed_m_s)?,
            snap_radius_m: raw.f64_or("iso.snap_radius_m", iso_defaults.snap_radius_m)?,
        };
        iso.validate()?;

        let mut weights = IndexWeights::default();
        for kind in ComponentKind::ALL {
            let key = format!("index.weights.{}", kind.file_stem());
            if let Some(v) = raw.get(&key) {
                let w = v
                    .parse::<f64>()
                    .map_err(|_| cfg_err(format!("key `{key}`: bad number `{v}`")))?;
                weights.set(kind, w);
            }
        }
        weights.validate()?;

        let lum_window_radius = raw.usize_or("lum.window_radius", 2)?;
        let gs_supersample = raw.usize_or("gs.supersample", 10)?;
        if gs_supersample == 0 {
            return Err(cfg_err("gs.supersample must be >= 1"));
        }
        match raw.get("slope.method") {
            None | Some("horn") => {}
            Some(other) => return Err(cfg_err(format!("slope.method `{other}` unsupported (only `horn`)"))),
        }
        let per_capita = raw.bool_or("per_capita.enabled", false)?;
        let zscore_domain = match raw.get("zscore.domain") {
            None | Some("all") => ZscoreDomain::All,
            Some(_) => ZscoreDomain::MaskFile(raw.path("zscore.domain")?),
        };
        let threads = raw.usize_or("threads", 0)?;
        let output_dir = raw.path("output.dir")?;

        // Reject unknown keys.
        let consumed = raw.consumed.borrow();
        for (key, (_, line)) in &raw.entries {
            if !consumed.contains(key) {
                return Err(Error::parse(path, *line, format!("unknown key `{key}`")));
            }
        }

        let config = PipelineConfig {
            inputs,
            grid,
            decay,
            iso,
            weights,
            lum_window_radius,
            gs_supersample,
            per_capita,
            zscore_domain,
            threads,
            output_dir,
            config_path: path.to_path_buf(),
        };
        config.validate_files()?;
        Ok(config)
    }

    /// Every referenced input must exist; errors name the config key.
    fn validate_files(&self) -> Result<()> {
        for (key, path) in self.inputs.entries() {
            if !path.is_file() {
                return Err(cfg_err(format!("key `{key}`: file not found: {}", path.display())));
            }
        }
        if let ZscoreDomain::MaskFile(p) = &self.zscore_domain {
            if !p.is_file() {
                return Err(cfg_err(format!("key `zscore.domain`: file not found: {}", p.display())));
            }
        }
        Ok(())
    }

    pub fn out_path(&self, name: &str) -> PathBuf {
        self.output_dir.join(name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn minimal_config(dir: &Path, extra: &str) -> PathBuf {
        for f in [
            "nodes.csv",
            "edges.csv",
            "ndvi.asc",
            "dem.asc",
            "corine.asc",
            "pop.asc",
            "urb.asc",
            "green.geojson",
            "stops.csv",
            "admin.geojson",
        ] {
            fs::write(dir.join(f), "placeholder").unwrap();
        }
        let text = format!(
            "# test config\n\
             input.nodes = nodes.csv\n\
             input.edges = edges.csv\n\
             input.ndvi = ndvi.asc\n\
             input.dem = dem.asc\n\
             input.corine = corine.asc\n\
             input.pop = pop.asc\n\
             input.urbanization = urb.asc\n\
             input.green_polygons = green.geojson\n\
             input.transit_stops = stops.csv\n\
             input.admin_polygons = admin.geojson\n\
             grid.origin_x = 0\n\
             grid.origin_y = 0\n\
             grid.rows = 20\n\
             grid.cols = 30\n\
             output.dir = out\n\
             {extra}"
        );
        let p = dir.join("walkgrid.cfg");
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn defaults_applied() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = PipelineConfig::load(minimal_config(dir.path(), "")).unwrap();
        assert_eq!(cfg.grid.cell_size, 100.0);
        assert_eq!(cfg.decay.sigma_m, 637.5);
        assert_eq!(cfg.iso.max_distance_m(), 1275.0);
        assert_eq!(cfg.lum_window_radius, 2);
        assert_eq!(cfg.gs_supersample, 10);
        assert!(!cfg.per_capita);
        assert_eq!(cfg.zscore_domain, ZscoreDomain::All);
        assert_eq!(cfg.weights.get(ComponentKind::Slope), -1.0);
    }

    #[test]
    fn missing_input_names_key() {
        let dir = tempfile::tempdir().unwrap();
        let p = minimal_config(dir.path(), "");
        fs::remove_file(dir.path().join("dem.asc")).unwrap();
        let err = PipelineConfig::load(p).unwrap_err();
        assert!(err.to_string().contains("input.dem"), "{err}");
    }

    #[test]
    fn unknown_key_rejected_with_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = minimal_config(dir.path(), "decay.sigmas = 5\n");
        match PipelineConfig::load(p) {
            Err(Error::Parse { message, .. }) => assert!(message.contains("decay.sigmas"), "{message}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn weight_overrides_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let p = minimal_config(dir.path(), "index.weights.pt = 2.5\n");
        let cfg = PipelineConfig::load(p).unwrap();
        assert_eq!(cfg.weights.get(ComponentKind::Pt), 2.5);

        let dir2 = tempfile::tempdir().unwrap();
        let p2 = minimal_config(dir2.path(), "index.weights.slope = 1.0\n");
        assert!(PipelineConfig::load(p2).is_err(), "positive slope weight must fail");
    }

    #[test]
    fn duplicate_key_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = minimal_config(dir.path(), "threads = 2\nthreads = 4\n");
        assert!(matches!(PipelineConfig::load(p), Err(Error::Parse { .. })));
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let dir = tempfile::tempdir().unwrap();
        let p = minimal_config(dir.path(), "\n# trailing comment\nthreads = 3 # inline\n");
        let cfg = PipelineConfig::load(p).unwrap();
        assert_eq!(cfg.threads, 3);
    }
}
