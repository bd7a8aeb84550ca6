"""nepcurate: build, curate, and iteratively improve training datasets for
machine-learned interatomic potentials."""

from .frames import (
    Dataset,
    ExtendedXyzError,
    Frame,
    ParitySeries,
    read_dataset,
    read_parity,
    write_dataset,
    write_parity,
)
from .geometry import (
    BondReport,
    RadiiTable,
    bond_report,
    is_physical,
    min_image_distance,
    neighbor_list,
)
from .descriptor import DescriptorSpec, atomic_descriptor, structure_descriptor
from .surrogate import SurrogateModel, predict, rmse, site_energy
from .training import LossWeights, train
from .sampling import (
    Projection2D,
    SelectionResult,
    farthest_point_sample,
    max_error_select,
    pca_project,
)
from .perturb import PerturbSpec, generate_set, perturb_structure
from .mdrun import MdParams, run_md
from .calculators import ExternalCommand, LabelReport, LennardJones, label
from .workflow import JobConfig, init_workspace, run_loop
from .service import CurationService, serve

__version__ = "0.1.0"

__all__ = [
    "Dataset", "ExtendedXyzError", "Frame", "ParitySeries",
    "read_dataset", "read_parity", "write_dataset", "write_parity",
    "BondReport", "RadiiTable", "bond_report", "is_physical",
    "min_image_distance", "neighbor_list",
    "DescriptorSpec", "atomic_descriptor", "structure_descriptor",
    "SurrogateModel", "predict", "rmse", "site_energy",
    "LossWeights", "train",
    "Projection2D", "SelectionResult", "farthest_point_sample",
    "max_error_select", "pca_project",
    "PerturbSpec", "generate_set", "perturb_structure",
    "MdParams", "run_md",
    "ExternalCommand", "LabelReport", "LennardJones", "label",
    "JobConfig", "init_workspace", "run_loop",
    "CurationService", "serve",
]
