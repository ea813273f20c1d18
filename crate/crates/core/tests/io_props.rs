//! Round-trip property for the ASCII-grid format on random rasters.

mod common;

use proptest::prelude::*;

use walkgrid_core::grid::GridSpec;
use walkgrid_core::io::{read_ascii_grid, write_ascii_grid};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn ascii_grid_round_trip_exact(
        rows in 1u32..12,
        cols in 1u32..12,
        origin_x in -1e6f64..1e6,
        origin_y in -1e6f64..1e6,
        cell_size in prop::sample::select(vec![1.0, 2.5, 30.0, 100.0, 12.825]),
        seed in any::<u64>(),
    ) {
        let grid = GridSpec::new(origin_x, origin_y, cell_size, rows, cols).unwrap();
        let mut r = common::rng(seed);
        let layer = common::random_raster(&grid, &mut r, 0.15, -1e4, 1e4);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("grid.asc");
        write_ascii_grid(&layer, &path).unwrap();
        let back = read_ascii_grid(&path).unwrap();

        prop_assert_eq!(back.grid(), layer.grid());
        prop_assert_eq!(back.nodata().to_bits(), layer.nodata().to_bits());
        for (a, b) in layer.values().iter().zip(back.values()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }

        // Writing the re-read layer reproduces the file byte for byte.
        let path2 = dir.path().join("grid2.asc");
        write_ascii_grid(&back, &path2).unwrap();
        prop_assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }
}
