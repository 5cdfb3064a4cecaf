"""Instance generators for activation interpolation and polynomial-kernel GCNs."""

from .activation import (
    ActivationSpec,
    PiecewisePoly,
    activation_blackbox,
    activation_loss,
    build_activation_landscape,
    dual_loss_activation,
)
from .gcn import (
    GcnInstance,
    gcn_classification_loss,
    gcn_dual_loss,
    gcn_forward,
    gcn_regression_loss,
    normalized_adjacency,
    random_gcn_instance,
)
