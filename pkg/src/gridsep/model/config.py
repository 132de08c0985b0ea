from dataclasses import asdict, dataclass
import json
import math

__all__ = ['ModelConfig', 'padded_length', 'unfolded_length']

UNFOLD_ORDERS = ('LNUnfold', 'UnfoldLN')
INPUT_MODES = ('mixture_only', 'mixture+dnn1+mfwf')


def padded_length(n, kernel, stride):
    """Zero-padded length ``ceil((n - I)/J) * J + I`` (at least ``I``)."""
    return max(math.ceil((n - kernel) / stride) * stride + kernel, kernel)


def unfolded_length(n, kernel, stride):
    return (padded_length(n, kernel, stride) - kernel) // stride + 1


@dataclass(frozen=True)
class ModelConfig:
    """TF-GridNet hyper-parameters.

    D: embedding dim, B: blocks, I/J: unfold kernel/stride, H: BLSTM units
    per direction, L: attention heads, E: query/key channels per head,
    C: sources, P: microphones, F: frequency bins.
    """
    D: int = 64
    B: int = 6
    I: int = 4
    J: int = 1
    H: int = 256
    L: int = 4
    E: int = 4
    C: int = 2
    P: int = 1
    F: int = 129
    unfold_order: str = 'LNUnfold'
    inputs: str = 'mixture_only'
    attention: bool = True

    def __post_init__(self):
        for name in 'DBIJHLECPF':
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ValueError(f'{name} must be a positive integer')
        if self.attention and self.D % self.L:
            raise ValueError(f'D={self.D} is not divisible by L={self.L}')
        if self.J > self.I:
            raise ValueError('Need I >= J')
        if self.unfold_order not in UNFOLD_ORDERS:
            raise ValueError(f'unfold_order must be one of {UNFOLD_ORDERS}')
        if self.inputs not in INPUT_MODES:
            raise ValueError(f'inputs must be one of {INPUT_MODES}')

    @property
    def input_channels(self):
        """Real input channels of each embedding branch (RI stacked)."""
        if self.inputs == 'mixture_only':
            return (2 * self.P,)
        return (2 * self.P, 2 * self.C, 2 * self.C)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ValueError(f'Unknown model config keys: {sorted(extra)}')
        return cls(**d)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))
