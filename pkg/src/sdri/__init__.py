"""Sharp-interface 2D energy minimizer over polygonal free crystals."""

from .anisotropy import (
    AdhesionField,
    AnisotropyField,
    Crystalline,
    Elliptic,
    Isotropic,
    Modulated,
    PNorm,
    make_anisotropy,
    phi_eval,
    polygon_surface_energy,
    validate_hypotheses,
    wulff_shape,
)
from .elasticity import (
    ElasticState,
    ElasticTensor,
    MismatchSpec,
    elastic_energy,
    solve_elastic,
)
from .energy import EnergyBreakdown, surface_energy
from .geometry import (
    ArcClass,
    ClassifiedArc,
    Domain,
    FreeCrystal,
    PolygonWithHoles,
    Slit,
    area,
    boundary_length,
    build_domain,
    classify_boundary,
    component_count,
    hausdorff_gap,
    load_geometry,
    save_geometry,
    sdist,
)
from .meshing import Mesh, triangulate, uniform_refine
from .optimizer import (
    Move,
    OptimState,
    Problem,
    Schedule,
    minimize,
    penalized_energy,
    project_m,
    sweep,
)
from .presets import droplet_on_substrate, make_preset, thin_film_adhesion
from .probes import (
    ProbeReport,
    lambda_probe,
    lsc_probe,
    m_probe,
    measure_contact_angles,
    run_suite,
    wulff_gap_probe,
    young_angle_oracle,
    young_angle_probe,
)

__version__ = "0.1.0"
