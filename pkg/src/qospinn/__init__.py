"""Separable physics-informed networks with orthogonal circuit layers."""

from .estimators import McDropoutBaseline, QoSpinnSolver, QoSpinnUncertainty
from .jets import Jet2, jet_binary, jet_unary
from .layers import (
    DenseLayer,
    PyramidLayer,
    angles_to_matrix,
    first_layer_encode,
    layer_backward,
    layer_forward,
    preprocess_input,
)
from .lipschitz import (
    BoundReport,
    empirical_lipschitz_check,
    estimate_bound_ingredients,
    model_bound_report,
    spectral_norm,
    stacking_bounds,
    theorem_bounds,
)
from .model import (
    FieldBatch,
    QoMlp,
    SpinnModel,
    build_spinn,
    cp_combine,
    model_predict,
    subnet_forward_jet,
)
from .pde import (
    PdeProblem,
    ad_reference,
    ad_residual,
    bessel_i,
    burgers_fd_oracle,
    burgers_reference,
    make_problem,
    sinegordon_kink,
    sinegordon_residual,
)
from .training import AdamState, ParamEstimate, TrainConfig, adam_step, assemble_loss, train
from .unary import (
    GateSpec,
    TomographyResult,
    UnaryState,
    apply_rbs,
    encode_angles,
    load_state,
    pyramid_gate_sequence,
    tomography,
)
from .uq import (
    DropoutSpinn,
    GpHead,
    ResBlock,
    UqSpinn,
    UqTrainConfig,
    concat_forward,
    eac,
    gp_posterior,
    gp_predict,
    mc_dropout_predict,
    rff_features,
    train_uq,
)

__version__ = "0.1.0"
