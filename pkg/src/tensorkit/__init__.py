"""Multilinear data toolkit: tensors, decompositions, fusion, tensor classifiers
and tensor-normal models."""
from .core import (Mode, StateRecord, Tensor, as_array, default_modes, fold, frobenius_norm,
                   hadamard, inner, khatri_rao, kronecker, mode_n_product, tensor_new, unfold,
                   vectorise)
from .decompositions import (CPD, HOOI, HOSVD, TTSVD, DecompositionResult, RandomizedCPD,
                             cpd_als, cpd_randomized, hooi, hosvd, tt_svd)
from .exceptions import (ArgumentError, DataError, DimensionError, FormatError, FormError,
                         ModeIndexError, NumericError, StateError, TensorkitError,
                         ValidationError, VersionError)
from .forms import (TensorCPD, TensorTKD, TensorTT, cpd_to_tkd, normalise_factors, reconstruct,
                    rel_error)
from .fusion import (CMTF, PARAFAC2, CmtfResult, CoupledData, Parafac2Data, Parafac2Result,
                     cmtf, parafac2)
from .gaussian import (DofCount, FlipFlopResult, TensorGaussian, TensorNormal,
                       classify_conditional, dof_ratio, flip_flop, logpdf, sample)
from .gaussian import fit as fit_tensor_normal
from .learning import (LSSTM, LSSVM, TEL, DecompositionSpec, LsstmModel, TelModel,
                       TensorDataset, lsstm_predict, lsstm_train, majority_vote, tel_predict,
                       tel_train)
from .validation import FitOptions

__version__ = "0.1.0"
