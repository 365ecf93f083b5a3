"""Numerical laboratory for pseudo-Riemannian foliations.

The package builds explicit foliated pseudo-Riemannian manifolds (products,
a warped negative control and the mapping torus of an Anosov toral
automorphism), checks the geometric criteria that characterize
pseudo-Riemannian foliations, computes leaf holonomy and the transfer of
horizontal curves, and constructs the graph (holonomy groupoid) of the
foliation together with its induced metric.
"""
from .criteria import (CheckReport, check_lewis, check_orthogonal_transport,
                       check_projectability, check_totally_geodesic,
                       check_transversal_completeness, cross_validate_criteria)
from .errors import *  # noqa: F401,F403
from .geometry import (Box, MetricField, christoffel, integrate_geodesic, integrate_geodesics,
                       signature)
from .graph import (GraphPoint, check_graph_foliation, check_prs_axioms, compose,
                    decompose_tangent, graph_point, induced_metric_d, inverse, leaf_structure,
                    make_graph, project, unit)
from .holonomy import (HolonomyMap, holonomy_along, holonomy_group, m_holonomy_action,
                       transfer)
from .models import (FoliationModel, SuspensionModel, make_product, make_suspension,
                     make_warped_counterexample)

__version__ = "0.1.0"
