"""Set-boundary reachability analysis for safety verification of feedforward networks."""

from .geometry import SafeSet, contained_in_safe, faces, parse_box, parse_safe, partition_box, partition_faces
from .interval import Box, Interval, ibp_forward, interval_det, interval_jacobian
from .model import Activation, Layer, Network, example_network, forward, load_network, read_network, slice_network
from .oracle import falsify, mc_reach, point_jacobian
from .topology import check_homeomorphism, check_open_map, classify_cells, find_open_suffix, matrix_rank
from .verify import (
    Engine,
    Method,
    Outcome,
    Report,
    VerifyConfig,
    compare,
    reach,
    verify,
    verify_entire,
    verify_invertible,
    verify_noninvertible,
    verify_openmap,
)
from .zonotope import Zonotope, zono_forward

__version__ = "0.1.0"
