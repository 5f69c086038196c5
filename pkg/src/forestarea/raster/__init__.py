from .extract import extract_plot_predictors
from .grid import GridSpec, ImageStack, RasterGrid, read_grid, read_stack, write_grid, write_stack
from .mapping import class_areas, mapped_area_by_stratum, predict_map, synthetic_area
from .ops import bilinear_resample, composite_stacks, medoid_composite, nearest_resample, ndvi

__all__ = [
    "extract_plot_predictors", "GridSpec", "ImageStack", "RasterGrid", "read_grid", "read_stack",
    "write_grid", "write_stack", "class_areas", "mapped_area_by_stratum", "predict_map", "synthetic_area",
    "bilinear_resample", "composite_stacks", "medoid_composite", "nearest_resample", "ndvi",
]
