"""latscope: lattice counting under dilations and wavelet-system diagnostics."""

__version__ = "0.1.0"

from .errors import LatscopeError
from .spectral import Dilation, classify_dilation, ef_split, eigen_decompose, lyapunov_form
from .lattice import Lattice, count_in_dilated_ball, count_in_ellipsoid, dual, preset
