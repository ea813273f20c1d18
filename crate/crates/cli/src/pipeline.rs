//! Stage implementations behind the CLI subcommands. Stage outputs live
//! on disk so long runs are resumable and inspectable; a stage is skipped
//! when its outputs are newer than all of its inputs (unless forced).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime};

use walkgrid_core::components::{
    green_fraction_field, lum_field, ndvi_field, per_capita, pt_field, slope_field, ComponentField,
    ComponentKind,
};
use walkgrid_core::error::{Error, Result};
use walkgrid_core::graph::{
    build_graph, clip_walk_length, count_intersections, iso_area_field, IsochroneEngine, Isochrones,
    PedestrianGraph,
};
use walkgrid_core::grid::Contiguity;
use walkgrid_core::io::{
    fmt_g17, read_ascii_grid, read_edges_csv, read_nodes_csv, read_points_csv, read_polygons_geojson,
    render_decile_map, write_ascii_grid,
};
use walkgrid_core::raster::{same_grid, RasterLayer};
use walkgrid_core::smooth::{
    compose_index, deciles, smooth_component, zscore, CellMask, DecileField, IndexField, NormStats,
    SmoothedField, ZScoreField,
};
use walkgrid_core::stats::{
    aggregate_polygons, build_spatial_weights, corr_matrix, morans_i, pop_weighted_cdf,
    stratify_by_urbanization,
};

use crate::config::{PipelineConfig, ZscoreDomain};

#[derive(Debug, Clone)]
pub struct StageOutcome {
    pub name: &'static str,
    pub skipped: bool,
    pub seconds: f64,
}

fn raw_name(kind: ComponentKind) -> String {
    format!("raw_{}.asc", kind.file_stem())
}

fn smooth_name(kind: ComponentKind) -> String {
    format!("smooth_{}.asc", kind.file_stem())
}

fn z_name(kind: ComponentKind) -> String {
    format!("z_{}.asc", kind.file_stem())
}

/// Data outputs per stage (the run manifest is reported separately).
pub fn stage_outputs(cfg: &PipelineConfig, stage: &str) -> Vec<PathBuf> {
    match stage {
        "components" => ComponentKind::ALL.iter().map(|&k| cfg.out_path(&raw_name(k))).collect(),
        "index" => {
            let mut v: Vec<PathBuf> = ComponentKind::ALL.iter().map(|&k| cfg.out_path(&smooth_name(k))).collect();
            v.extend(ComponentKind::ALL.iter().map(|&k| cfg.out_path(&z_name(k))));
            v.push(cfg.out_path("index.asc"));
            v.push(cfg.out_path("deciles.asc"));
            v.push(cfg.out_path("norm_stats.csv"));
            v
        }
        // corr.csv is conditional (needs >= 3 units), so it does not
        // gate staleness.
        "aggregate" => vec![
            cfg.out_path("aggregates.csv"),
            cfg.out_path("strata.csv"),
            cfg.out_path("cdf.csv"),
        ],
        "moran" => vec![cfg.out_path("moran.csv")],
        "render" => vec![cfg.out_path("deciles.ppm")],
        other => panic!("unknown stage {other}"),
    }
}

fn stage_inputs(cfg: &PipelineConfig, stage: &str) -> Vec<PathBuf> {
    let mut v = vec![cfg.config_path.clone()];
    match stage {
        "components" => {
            v.push(cfg.inputs.nodes.clone());
            v.push(cfg.inputs.edges.clone());
            v.push(cfg.inputs.ndvi.clone());
            v.push(cfg.inputs.dem.clone());
            v.push(cfg.inputs.corine.clone());
            v.push(cfg.inputs.green_polygons.clone());
            v.push(cfg.inputs.transit_stops.clone());
            if cfg.per_capita {
                v.push(cfg.inputs.pop.clone());
            }
        }
        "index" => {
            v.extend(ComponentKind::ALL.iter().map(|&k| cfg.out_path(&raw_name(k))));
            // Isochrones are recomputed from the network, not stored.
            v.push(cfg.inputs.nodes.clone());
            v.push(cfg.inputs.edges.clone());
            if let ZscoreDomain::MaskFile(p) = &cfg.zscore_domain {
                v.push(p.clone());
            }
        }
        "aggregate" => {
            v.extend(ComponentKind::ALL.iter().map(|&k| cfg.out_path(&smooth_name(k))));
            v.push(cfg.out_path("index.asc"));
            v.push(cfg.out_path("deciles.asc"));
            v.push(cfg.inputs.pop.clone());
            v.push(cfg.inputs.urbanization.clone());
            v.push(cfg.inputs.admin_polygons.clone());
        }
        "moran" => {
            v.push(cfg.out_path("index.asc"));
            v.push(cfg.inputs.admin_polygons.clone());
        }
        "render" => {
            v.push(cfg.out_path("deciles.asc"));
        }
        other => panic!("unknown stage {other}"),
    }
    v
}

fn mtime(path: &Path) -> Option<SystemTime> {
    std::fs::metadata(path).and_then(|m| m.modified()).ok()
}

/// A stage runs when forced, when any output is missing, or when any
/// input is strictly newer than the oldest output.
fn needs_run(cfg: &PipelineConfig, stage: &str, force: bool) -> bool {
    if force {
        return true;
    }
    let mut oldest_output: Option<SystemTime> = None;
    for out in stage_outputs(cfg, stage) {
        match mtime(&out) {
            None => return true,
            Some(t) => {
                if oldest_output.map_or(true, |cur| t < cur) {
                    oldest_output = Some(t);
                }
            }
        }
    }
    let oldest = oldest_output.expect("stages have outputs");
    for input in stage_inputs(cfg, stage) {
        match mtime(&input) {
            None => return true, // missing input: let the stage fail loudly
            Some(t) => {
                if t > oldest {
                    return true;
                }
            }
        }
    }
    false
}

fn ensure_output_dir(cfg: &PipelineConfig) -> Result<()> {
    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_g17).unwrap_or_default()
}

fn load_graph(cfg: &PipelineConfig) -> Result<PedestrianGraph> {
    let nodes = read_nodes_csv(&cfg.inputs.nodes)?;
    let edges = read_edges_csv(&cfg.inputs.edges, Some(&nodes))?;
    build_graph(&nodes, &edges)
}

/// Read a raster input that must sit exactly on the analysis grid.
fn load_grid_raster(cfg: &PipelineConfig, path: &Path, key: &str) -> Result<RasterLayer> {
    let layer = read_ascii_grid(path)?;
    if !same_grid(layer.grid(), &cfg.grid) {
        return Err(Error::Misaligned(format!(
            "`{key}` raster {} is not on the analysis grid ({}x{} at {} m)",
            path.display(),
            cfg.grid.n_rows,
            cfg.grid.n_cols,
            cfg.grid.cell_size
        )));
    }
    Ok(layer)
}

fn compute_isochrones(cfg: &PipelineConfig, graph: &PedestrianGraph) -> Result<Isochrones> {
    Ok(IsochroneEngine::new(graph, &cfg.grid, cfg.iso.clone())?.all_isochrones())
}

pub fn cmd_components(cfg: &PipelineConfig, force: bool) -> Result<StageOutcome> {
    let started = Instant::now();
    if !needs_run(cfg, "components", force) {
        return Ok(StageOutcome {
            name: "components",
            skipped: true,
            seconds: 0.0,
        });
    }
    ensure_output_dir(cfg)?;

    let graph = load_graph(cfg)?;
    let swl = clip_walk_length(&graph, &cfg.grid)?;
    let si = count_intersections(&graph, &cfg.grid)?;
    let isochrones = compute_isochrones(cfg, &graph)?;
    let iso = iso_area_field(&cfg.grid, &isochrones)?;

    let ndvi = ndvi_field(&read_ascii_grid(&cfg.inputs.ndvi)?, &cfg.grid)?;
    let slope = slope_field(&read_ascii_grid(&cfg.inputs.dem)?, &cfg.grid)?;
    let stops = read_points_csv(&cfg.inputs.transit_stops)?;
    let pt = pt_field(&stops, &cfg.grid)?;
    let green = read_polygons_geojson(&cfg.inputs.green_polygons)?;
    let gs = green_fraction_field(&green, &cfg.grid, cfg.gs_supersample)?;
    let corine = load_grid_raster(cfg, &cfg.inputs.corine, "input.corine")?;
    let lum = lum_field(&corine, &cfg.grid, cfg.lum_window_radius)?;

    let mut fields: BTreeMap<ComponentKind, ComponentField> = BTreeMap::new();
    for f in [swl, si, gs, ndvi, slope, pt, lum, iso] {
        fields.insert(f.kind(), f);
    }
    if cfg.per_capita {
        let pop = load_grid_raster(cfg, &cfg.inputs.pop, "input.pop")?;
        for kind in [ComponentKind::Swl, ComponentKind::Si, ComponentKind::Gs, ComponentKind::Pt] {
            let pc = per_capita(&fields[&kind], &pop)?;
            fields.insert(kind, pc);
        }
    }
    for (kind, field) in &fields {
        write_ascii_grid(field.raster(), cfg.out_path(&raw_name(*kind)))?;
    }
    Ok(StageOutcome {
        name: "components",
        skipped: false,
        seconds: started.elapsed().as_secs_f64(),
    })
}

fn load_raw_component(cfg: &PipelineConfig, kind: ComponentKind) -> Result<ComponentField> {
    let path = cfg.out_path(&raw_name(kind));
    let layer = load_grid_raster(cfg, &path, &raw_name(kind))?;
    let pc = cfg.per_capita
        && matches!(
            kind,
            ComponentKind::Swl | ComponentKind::Si | ComponentKind::Gs | ComponentKind::Pt
        );
    ComponentField::new_flagged(kind, layer, pc)
}

pub fn cmd_index(cfg: &PipelineConfig, force: bool, allow_degenerate: bool) -> Result<StageOutcome> {
    let started = Instant::now();
    if !needs_run(cfg, "index", force) {
        return Ok(StageOutcome {
            name: "index",
            skipped: true,
            seconds: 0.0,
        });
    }
    ensure_output_dir(cfg)?;

    let graph = load_graph(cfg)?;
    let isochrones = compute_isochrones(cfg, &graph)?;

    let mask = match &cfg.zscore_domain {
        ZscoreDomain::All => None,
        ZscoreDomain::MaskFile(p) => {
            let layer = load_grid_raster(cfg, p, "zscore.domain")?;
            Some(CellMask::from_raster(&layer))
        }
    };

    let mut z_fields: BTreeMap<ComponentKind, ZScoreField> = BTreeMap::new();
    let mut stats: Vec<(NormStats, bool)> = Vec::new();
    for kind in ComponentKind::ALL {
        let raw = load_raw_component(cfg, kind)?;
        let smoothed = smooth_component(&raw, &isochrones, &cfg.decay)?;
        write_ascii_grid(smoothed.raster(), cfg.out_path(&smooth_name(kind)))?;

        let (z, s, degenerate) = match zscore(&smoothed, mask.as_ref()) {
            Ok((z, s)) => (z, s, false),
            Err(Error::Degenerate(msg)) if allow_degenerate => {
                // Documented fallback: constant components standardize
                // to all-zero over their data cells.
                eprintln!("warning: {msg}; mapping z_{} to zeros", kind.file_stem());
                let grid = smoothed.grid().clone();
                let mut layer = RasterLayer::nodata_filled(grid.clone(), smoothed.raster().nodata());
                for i in 0..grid.n_cells() {
                    let in_domain = mask.as_ref().map_or(true, |m| m.contains_linear(i));
                    if in_domain && smoothed.raster().value_at_linear(i).is_some() {
                        layer.set(grid.from_linear(i), 0.0);
                    }
                }
                let mean = smoothed
                    .raster()
                    .value_at_linear(
                        (0..grid.n_cells())
                            .find(|&i| smoothed.raster().value_at_linear(i).is_some())
                            .unwrap_or(0),
                    )
                    .unwrap_or(0.0);
                (
                    ZScoreField::from_raster(kind, layer),
                    NormStats {
                        kind,
                        mean,
                        std: 0.0,
                    },
                    true,
                )
            }
            Err(e) => return Err(e),
        };
        write_ascii_grid(z.raster(), cfg.out_path(&z_name(kind)))?;
        z_fields.insert(kind, z);
        stats.push((s, degenerate));
    }

    let mut csv = String::from("kind,mean,std,degenerate\n");
    for (s, degenerate) in &stats {
        writeln!(csv, "{},{},{},{}", s.kind, fmt_g17(s.mean), fmt_g17(s.std), degenerate).unwrap();
    }
    write_text(&cfg.out_path("norm_stats.csv"), &csv)?;

    let index = compose_index(&z_fields, &cfg.weights)?;
    write_ascii_grid(index.raster(), cfg.out_path("index.asc"))?;
    let decile_field = deciles(&index)?;
    write_ascii_grid(decile_field.raster(), cfg.out_path("deciles.asc"))?;

    Ok(StageOutcome {
        name: "index",
        skipped: false,
        seconds: started.elapsed().as_secs_f64(),
    })
}

pub fn cmd_aggregate(cfg: &PipelineConfig, force: bool) -> Result<StageOutcome> {
    let started = Instant::now();
    if !needs_run(cfg, "aggregate", force) {
        return Ok(StageOutcome {
            name: "aggregate",
            skipped: true,
            seconds: 0.0,
        });
    }
    ensure_output_dir(cfg)?;

    let smoothed: Vec<SmoothedField> = ComponentKind::ALL
        .into_iter()
        .map(|kind| {
            load_grid_raster(cfg, &cfg.out_path(&smooth_name(kind)), &smooth_name(kind))
                .map(|layer| SmoothedField::from_raster(kind, layer))
        })
        .collect::<Result<_>>()?;
    let index = IndexField::from_raster(load_grid_raster(cfg, &cfg.out_path("index.asc"), "index.asc")?);
    let decile_field = DecileField::from_raster(load_grid_raster(cfg, &cfg.out_path("deciles.asc"), "deciles.asc")?)?;
    let pop = load_grid_raster(cfg, &cfg.inputs.pop, "input.pop")?;
    let urb = load_grid_raster(cfg, &cfg.inputs.urbanization, "input.urbanization")?;
    let polygons = read_polygons_geojson(&cfg.inputs.admin_polygons)?;

    let (records, skipped) = aggregate_polygons(&smoothed, &index, &pop, &polygons, &cfg.grid)?;
    for unit in &skipped {
        eprintln!("warning: unit `{unit}` contains no cell centroid; omitted from aggregates");
    }

    let mut csv = String::from("unit_id");
    for kind in ComponentKind::ALL {
        write!(csv, ",{}", kind.name()).unwrap();
    }
    csv.push_str(",index_pw_mean,population,cell_count\n");
    for r in &records {
        write!(csv, "{}", r.unit_id).unwrap();
        for kind in ComponentKind::ALL {
            write!(csv, ",{}", fmt_opt(r.component_means[&kind])).unwrap();
        }
        writeln!(
            csv,
            ",{},{},{}",
            fmt_opt(r.index_pw_mean),
            fmt_g17(r.population),
            r.cell_count
        )
        .unwrap();
    }
    write_text(&cfg.out_path("aggregates.csv"), &csv)?;

    if records.len() >= 3 {
        let m = corr_matrix(&records)?;
        let mut csv = String::new();
        for name in &m.names {
            write!(csv, ",{name}").unwrap();
        }
        csv.push('\n');
        for (i, name) in m.names.iter().enumerate() {
            write!(csv, "{name}").unwrap();
            for j in 0..m.names.len() {
                write!(csv, ",{}", fmt_opt(m.values[i][j])).unwrap();
            }
            csv.push('\n');
        }
        write_text(&cfg.out_path("corr.csv"), &csv)?;
    } else {
        eprintln!(
            "warning: correlation matrix needs >= 3 aggregation units, found {}; corr.csv not written",
            records.len()
        );
    }

    let strata = stratify_by_urbanization(&index, &decile_field, &pop, &urb)?;
    let mut csv = String::from("class,label,pw_mean,pop_share");
    for d in 1..=10 {
        write!(csv, ",decile_{d}").unwrap();
    }
    csv.push('\n');
    for s in &strata {
        write!(
            csv,
            "{},{},{},{}",
            s.class.code(),
            s.class.label(),
            fmt_opt(s.pw_mean),
            fmt_g17(s.pop_share)
        )
        .unwrap();
        for d in 0..10 {
            write!(csv, ",{}", fmt_g17(s.decile_pop[d])).unwrap();
        }
        csv.push('\n');
    }
    write_text(&cfg.out_path("strata.csv"), &csv)?;

    let cells: Vec<_> = (0..cfg.grid.n_cells()).map(|i| cfg.grid.from_linear(i)).collect();
    let mut csv = String::from("value,cum_pop_share\n");
    if let Some(curve) = pop_weighted_cdf(index.raster(), &pop, &cells) {
        for (v, share) in curve {
            writeln!(csv, "{},{}", fmt_g17(v), fmt_g17(share)).unwrap();
        }
    } else {
        eprintln!("warning: zero usable population; cdf.csv has no data rows");
    }
    write_text(&cfg.out_path("cdf.csv"), &csv)?;

    Ok(StageOutcome {
        name: "aggregate",
        skipped: false,
        seconds: started.elapsed().as_secs_f64(),
    })
}

pub fn cmd_moran(cfg: &PipelineConfig, force: bool) -> Result<StageOutcome> {
    let started = Instant::now();
    if !needs_run(cfg, "moran", force) {
        return Ok(StageOutcome {
            name: "moran",
            skipped: true,
            seconds: 0.0,
        });
    }
    ensure_output_dir(cfg)?;

    let index = IndexField::from_raster(load_grid_raster(cfg, &cfg.out_path("index.asc"), "index.asc")?);
    let polygons = read_polygons_geojson(&cfg.inputs.admin_polygons)?;

    let mut unit_cells: BTreeMap<String, Vec<walkgrid_core::grid::CellId>> = BTreeMap::new();
    for poly in &polygons {
        unit_cells
            .entry(poly.id().to_string())
            .or_default()
            .extend(cfg.grid.cells_in_polygon(poly)?);
    }

    let mut csv = String::from("unit_id,I,N,W\n");
    for (unit, mut cells) in unit_cells {
        cells.sort();
        cells.dedup();
        if cells.is_empty() {
            eprintln!("warning: unit `{unit}` contains no cell centroid; omitted from moran.csv");
            continue;
        }
        let n_data = cells.iter().filter(|&&c| index.value(c).is_some()).count();
        match build_spatial_weights(&cells, &cfg.grid, Contiguity::Queen) {
            Ok(weights) => match morans_i(&index, &weights) {
                Ok(m) => writeln!(csv, "{unit},{},{},{}", fmt_g17(m.i), m.n, fmt_g17(m.w)).unwrap(),
                Err(Error::Degenerate(msg)) | Err(Error::InsufficientData(msg)) => {
                    eprintln!("warning: unit `{unit}`: {msg}; I left missing");
                    writeln!(csv, "{unit},,{n_data},").unwrap();
                }
                Err(e) => return Err(e),
            },
            Err(Error::Degenerate(msg)) => {
                eprintln!("warning: unit `{unit}`: {msg}; I left missing");
                writeln!(csv, "{unit},,{n_data},{}", fmt_g17(0.0)).unwrap();
            }
            Err(e) => return Err(e),
        }
    }
    write_text(&cfg.out_path("moran.csv"), &csv)?;

    Ok(StageOutcome {
        name: "moran",
        skipped: false,
        seconds: started.elapsed().as_secs_f64(),
    })
}

pub fn cmd_render(cfg: &PipelineConfig, force: bool) -> Result<StageOutcome> {
    let started = Instant::now();
    if !needs_run(cfg, "render", force) {
        return Ok(StageOutcome {
            name: "render",
            skipped: true,
            seconds: 0.0,
        });
    }
    ensure_output_dir(cfg)?;
    let decile_field = DecileField::from_raster(load_grid_raster(cfg, &cfg.out_path("deciles.asc"), "deciles.asc")?)?;
    render_decile_map(&decile_field, cfg.out_path("deciles.ppm"))?;
    Ok(StageOutcome {
        name: "render",
        skipped: false,
        seconds: started.elapsed().as_secs_f64(),
    })
}

/// All stages in dependency order, then the run manifest.
pub fn cmd_pipeline(cfg: &PipelineConfig, force: bool, allow_degenerate: bool) -> Result<Vec<StageOutcome>> {
    let mut outcomes = Vec::new();
    outcomes.push(cmd_components(cfg, force)?);
    outcomes.push(cmd_index(cfg, force, allow_degenerate)?);
    outcomes.push(cmd_aggregate(cfg, force)?);
    outcomes.push(cmd_moran(cfg, force)?);
    outcomes.push(cmd_render(cfg, force)?);
    write_manifest(cfg, &outcomes)?;
    Ok(outcomes)
}

fn sha256_hex(path: &Path) -> Result<(String, u64)> {
    use sha2::{Digest, Sha256};
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let digest = Sha256::digest(&bytes);
    Ok((format!("{digest:x}"), bytes.len() as u64))
}

/// Run report: config hash, stage timings and a content hash per output
/// file. Timings make this file run-dependent; every other output is
/// byte-deterministic.
fn write_manifest(cfg: &PipelineConfig, outcomes: &[StageOutcome]) -> Result<()> {
    let (config_hash, _) = sha256_hex(&cfg.config_path)?;
    let mut text = String::from("# walkgrid run manifest\n");
    writeln!(text, "config = {}", cfg.config_path.display()).unwrap();
    writeln!(text, "config_sha256 = {config_hash}").unwrap();
    writeln!(
        text,
        "grid = {} rows x {} cols ({} cells)",
        cfg.grid.n_rows,
        cfg.grid.n_cols,
        cfg.grid.n_cells()
    )
    .unwrap();
    for o in outcomes {
        if o.skipped {
            writeln!(text, "stage {} = skipped (outputs newer than inputs)", o.name).unwrap();
        } else {
            writeln!(text, "stage {} = ran in {:.3} s", o.name, o.seconds).unwrap();
        }
    }
    for stage in ["components", "index", "aggregate", "moran", "render"] {
        let mut outputs = stage_outputs(cfg, stage);
        if stage == "aggregate" {
            outputs.push(cfg.out_path("corr.csv"));
        }
        for out in outputs {
            if out.is_file() {
                let (hash, bytes) = sha256_hex(&out)?;
                let name = out.file_name().unwrap_or_default().to_string_lossy().to_string();
                writeln!(text, "output {name} sha256={hash} bytes={bytes}").unwrap();
            }
        }
    }
    write_text(&cfg.out_path("run_manifest.txt"), &text)
}
