from dataclasses import dataclass, field
from typing import Any, Dict, List, Literal, Optional, Tuple, TypeAlias

from .core.tensor import Tensor
from .errors import GeometryError

ConvKind: TypeAlias = Literal["nc", "standard"]
NormKind: TypeAlias = Literal["none", "gn"]
ShortcutKind: TypeAlias = Literal["standard", "nc"]
ActivationKind: TypeAlias = Literal["relu", "elu", "selu", "none"]
LayerKind: TypeAlias = Literal["conv", "gn", "act", "avgpool", "gap", "flatten", "linear", "block"]


@dataclass(frozen=True)
class ConvGeometry:
    in_channels: int
    out_channels: int
    kernel: Tuple[int, int]
    stride: Tuple[int, int] = (1, 1)
    padding: Tuple[int, int] = (0, 0)
    input_size: Tuple[int, int] = (1, 1)

    @property
    def patch_size(self) -> int:
        return self.in_channels * self.kernel[0] * self.kernel[1]

    @property
    def output_size(self) -> Tuple[int, int]:
        (h, w), (kh, kw) = self.input_size, self.kernel
        (sh, sw), (ph, pw) = self.stride, self.padding
        return (h + 2 * ph - kh) // sh + 1, (w + 2 * pw - kw) // sw + 1

    @property
    def num_columns(self) -> int:
        h_out, w_out = self.output_size
        return h_out * w_out

    def validate(self) -> None:
        extents = (self.in_channels, self.out_channels, *self.kernel, *self.stride, *self.input_size)
        if min(extents) < 1 or min(self.padding) < 0:
            raise GeometryError(f"invalid geometry {self}")
        h_out, w_out = self.output_size
        if h_out < 1 or w_out < 1:
            raise GeometryError(f"output size {h_out}x{w_out} < 1 for {self}")


@dataclass
class Im2ColMatrix:
    data: Tensor
    geometry: ConvGeometry


@dataclass
class PatchStats:
    mu: Tensor
    sigma: Tensor
    denom: Tensor


@dataclass
class ConvCache:
    input_shape: Tuple[int, ...]
    columns: Tensor
    xhat: Optional[Tensor]
    stats: Optional[PatchStats]
    pre_affine: Tensor


@dataclass
class NcLayerState:
    weights: Tensor
    gamma: Tensor
    beta: Tensor
    epsilon: float = 1e-5
    cache: Optional[ConvCache] = None


@dataclass
class GroupNormCache:
    xhat: Tensor
    inv_std: Tensor


@dataclass
class GroupNormState:
    num_groups: int
    gamma: Tensor
    beta: Tensor
    epsilon: float = 1e-5
    cache: Optional[GroupNormCache] = None


@dataclass
class LayerSpec:
    kind: LayerKind
    out_channels: int = 0
    kernel: int = 3
    stride: int = 1
    padding: int = 1
    conv: ConvKind = "nc"
    norm: NormKind = "none"
    activation: ActivationKind = "relu"
    num_groups: int = 0
    shortcut: ShortcutKind = "standard"
    out_features: int = 0


@dataclass
class ModelSpec:
    name: str
    layers: List[LayerSpec] = field(default_factory=list)
    input_shape: Tuple[int, int, int] = (3, 32, 32)


@dataclass
class AugmentFlags:
    hflip: bool = False
    shift_frac: float = 0.0


@dataclass
class TrainConfig:
    batch_size: int = 2
    lr: float = 0.01
    lr_decay_factor: float = 0.1
    lr_decay_every: int = 30
    epochs: int = 50
    momentum: float = 0.0
    weight_decay: float = 0.0
    seed: int = 0
    augment: AugmentFlags = field(default_factory=AugmentFlags)
    resume: bool = False


@dataclass
class MetricsRecord:
    epoch: int
    step: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_top1: float
    val_top5: float
    mean_grad_norm: float
    wall_ms: float

    @property
    def val_top1_error(self) -> float:
        return 1.0 - self.val_top1

    @property
    def val_top5_error(self) -> float:
        return 1.0 - self.val_top5


@dataclass
class StepRecord:
    epoch: int
    step: int
    loss: float
    lr: float
    grad_norm: float


@dataclass
class Dataset:
    images: Tensor
    labels: Tensor
    class_count: int
    name: str
    channel_mean: Tuple[float, ...] = ()
    channel_std: Tuple[float, ...] = ()

    def __len__(self) -> int:
        return int(self.labels.shape[0])


@dataclass
class IdentityReport:
    name: str
    lhs: float
    rhs: float
    relative_gap: float
    tolerance: float
    passed: bool
    instance: Dict[str, Any]
    extras: Dict[str, float] = field(default_factory=dict)


@dataclass
class NormalityReport:
    patch_size: int
    n_patches: int
    distribution: str
    mean: float
    variance: float
    skewness: float
    excess_kurtosis: float
    normaltest_pvalue: float
    mean_bound: float
    mean_ok: bool
    variance_ok: bool
    degenerate: bool


@dataclass
class GradNormTrace:
    labels: Tuple[str, str]
    rows: List[Dict[str, float]] = field(default_factory=list)


@dataclass
class ModelSection:
    name: str = "resnet8"
    conv: ConvKind = "nc"
    norm: NormKind = "none"
    activation: ActivationKind = "relu"
    num_classes: int = 10
    widths: List[int] = field(default_factory=lambda: [16, 32, 64])
    epsilon: float = 1e-5
    # 0: 32 when it divides the channel count, else the largest divisor <= 32; -1: one group per channel
    num_groups: int = 0
    # projection shortcut of residual blocks whose shape changes: 1x1 standard or 1x1 NC conv
    shortcut: ShortcutKind = "standard"


@dataclass
class DataSection:
    dataset: Literal["cifar10", "mnist", "synth"] = "cifar10"
    path: str = ""
    train_per_class: int = 500
    val_per_class: int = 100
    normalize_inputs: bool = True
    synth_shape: List[int] = field(default_factory=lambda: [3, 8, 8])
    synth_train: int = 64
    synth_val: int = 32
    synth_separable: bool = True


@dataclass
class GradcheckSection:
    cases: int = 24
    step: float = 1e-5
    tolerance: float = 1e-6
    perturb_gradient: bool = False


@dataclass
class TheorySection:
    instances: int = 100
    sizes: List[int] = field(default_factory=lambda: [4, 9, 27])
    tolerance: float = 1e-10
    normality_patches: int = 100000
    normality_kernel: int = 3
    normality_channels: int = 3
    trace_steps: int = 200
    trace_pair: Literal["standard", "gn"] = "standard"


@dataclass
class BenchSection:
    repeats: int = 5
    batch: int = 2
    geometries: List[List[int]] = field(default_factory=lambda: [
        # in_channels, out_channels, kernel, stride, padding, size
        [3, 16, 3, 1, 1, 16],
        [16, 32, 3, 2, 1, 16],
        [32, 32, 1, 1, 0, 8],
    ])
    tolerance: float = 1e-4


@dataclass
class EvalSection:
    checkpoint: str = ""


@dataclass
class CompareSection:
    # run directories written by `train`, one per seed
    nc_runs: List[str] = field(default_factory=list)
    gn_runs: List[str] = field(default_factory=list)


@dataclass
class RunConfig:
    seed: int = 0
    dtype: Literal["float32", "float64"] = "float32"
    threads: int = 1
    deterministic: bool = True
    output_dir: str = "runs/default"
    log_level: str = "INFO"
    model: ModelSection = field(default_factory=ModelSection)
    train: TrainConfig = field(default_factory=TrainConfig)
    data: DataSection = field(default_factory=DataSection)
    gradcheck: GradcheckSection = field(default_factory=GradcheckSection)
    theory: TheorySection = field(default_factory=TheorySection)
    bench: BenchSection = field(default_factory=BenchSection)
    eval: EvalSection = field(default_factory=EvalSection)
    compare: CompareSection = field(default_factory=CompareSection)
