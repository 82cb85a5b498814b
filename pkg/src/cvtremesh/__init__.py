"""CVT-based isotropic surface remeshing with curvature-adaptive facet clipping.

The pipeline samples sites on a triangle surface, relaxes them with Lloyd
iterations over clipped 3D Voronoi cells (each cell cut by one to three
original facet planes chosen from local normal variation), and extracts the
output mesh as the dual of the restricted Voronoi diagram.
"""

__version__ = "0.1.0"

from .mesh import (MeshError, SiteSet, TriangleMesh, load_mesh,
                   point_triangle_closest, sample_uniform, save_mesh)
from .knn import PointIndex, build_index, knn
from .cell import (CellError, ConvexCell, HalfSpace, bisector, box_cell,
                   clip_halfspace, compute_voronoi_cell, extract_face_on_plane,
                   init_bounding_cell)
from .clipper import (ClipDecision, ClippedFacets, NeighborFacetSet,
                      build_fnear, clip_cell_by_facets_cell, curvature_level,
                      select_second_facet, select_third_facet)
from .engine import (Config, ConfigError, IterationStats, PipelineError,
                     RemeshResult, centroid_of_clipped, lloyd_iterate,
                     project_to_surface, run_remesh)
from .extract import (RestrictedVoronoiDiagram, compute_rvd, dual_triangulate,
                      edge_manifold_violations, site_adjacency)
from .quality import (QualityReport, angle_stats, quality_improvement,
                      quality_report, surface_distance, triangle_quality)

__all__ = [
    "__version__",
    "TriangleMesh", "SiteSet", "MeshError", "load_mesh", "save_mesh",
    "sample_uniform", "point_triangle_closest",
    "PointIndex", "build_index", "knn",
    "ConvexCell", "HalfSpace", "CellError", "box_cell", "init_bounding_cell",
    "bisector", "clip_halfspace", "compute_voronoi_cell", "extract_face_on_plane",
    "NeighborFacetSet", "ClipDecision", "ClippedFacets", "build_fnear",
    "curvature_level", "select_second_facet", "select_third_facet",
    "clip_cell_by_facets_cell",
    "Config", "ConfigError", "PipelineError", "IterationStats", "RemeshResult",
    "run_remesh", "lloyd_iterate", "centroid_of_clipped", "project_to_surface",
    "RestrictedVoronoiDiagram", "compute_rvd", "dual_triangulate",
    "site_adjacency", "edge_manifold_violations",
    "QualityReport", "quality_report", "triangle_quality", "angle_stats",
    "surface_distance", "quality_improvement",
]
