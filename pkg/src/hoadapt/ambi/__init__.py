"""Spherical-harmonics core: SH evaluation, encoders, truncation, decoding."""

from .encoding import (
    SourceSignal,
    StaticTrajectory,
    encode_capsules,
    encode_plane_wave,
    plane_wave_pressures,
    trajectory_angles,
)
from .frames import (
    AmbisonicFrame,
    OrderError,
    ShapeError,
    high_order_residual,
    truncate_order,
    zero_pad,
    zeros,
)
from .grids import (
    CapsuleArray,
    LoudspeakerLayout,
    builtin_capsule_array,
    builtin_layout,
    decode_loudspeakers,
    fibonacci_directions,
    gauss_grid,
    load_capsule_array,
    load_layout,
    quadrature_gram,
    spherical_design,
)
from .sh import (
    Direction,
    acn_index,
    acn_to_nm,
    associated_legendre,
    channel_count,
    directions_sh,
    elevation_to_colatitude,
    legendre_table,
    sh_eval,
    sh_matrix,
)
