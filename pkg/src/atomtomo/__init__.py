"""Grid-free atomic-resolution tomography from a few projections."""

from .energy import LJ_TABLE, LJParams
from .forward import DetectorGeometry, Sinogram, project_config
from .grid_recon import GridImage, GridSpec

__all__ = ["LJ_TABLE", "LJParams", "DetectorGeometry", "Sinogram", "project_config", "GridImage", "GridSpec"]
__version__ = "0.1.0"
