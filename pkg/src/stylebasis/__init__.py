"""Controllable style decomposition for CNN feature maps.

Style feature maps are decomposed into editable bases by spectrum transforms
or latent-variable factorizations, edited in latent space (keep, rescale,
mix across styles), projected back, and fed to an iterative Gram-matching
image optimizer. An analysis suite embeds and clusters style spectra.
"""

from .atlas import (
    ClusteringStandard,
    StandardReport,
    StylePoint,
    build_atlas,
    check_standard,
    find_cmax,
    isomap_embed,
    kmeans,
    spectrum_vectors,
    summary_vector,
)
from .control import (
    ControlParams,
    ControlSpec,
    Intervene,
    Mix,
    SingleBasis,
    StyleBank,
    apply_control,
    channel_subset,
    decompose,
    interpolate,
    intervene,
    mix,
    project_back,
    region_intervene,
    single_basis,
)
from .latent import (
    BasisSplit,
    IcaRep,
    PcaRep,
    ica_decompose,
    ica_project_back,
    pca_decompose,
    pca_project_back,
    split_basis,
)
from .network import Extractor, builtin_extractor, load_weights, save_weights
from .pipeline import (
    parse_control_spec,
    run_interpolate_transfer,
    run_mix_transfer,
    run_transfer,
)
from .spectral import (
    FrequencyMask,
    SpectrumRep,
    apply_mask,
    dct_forward,
    dct_inverse,
    fft_forward,
    fft_inverse,
    symmetrize,
)
from .tensors import (
    FeatureMap,
    ImageTensor,
    load_image,
    read_array,
    read_image_tensor,
    read_tensor,
    save_image,
    write_array,
    write_tensor,
)
from .transfer import (
    LossConfig,
    OptOptions,
    binarize,
    content_loss,
    gram,
    gram_targets_for_image,
    objective_and_grad,
    otsu_threshold,
    style_loss,
    transfer,
)

__version__ = "0.1.0"
