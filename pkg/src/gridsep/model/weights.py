"""Named weight tensors, their naming scheme, and the on-disk manifest.

Naming scheme (``b`` = block, ``m`` in {``intra``, ``sub``}, ``d`` in
{``fwd``, ``bwd``}, ``k`` = embedding branch, ``l`` = attention head)::

    embed{k}.conv.weight        (D, C_in_k, 3, 3)   Conv2D, out x in x kt x kf
    embed{k}.conv.bias          (D,)
    embed{k}.norm.gain/bias     (D,)                gLN affine
    block{b}.{m}.norm.gain/bias (D,) for LNUnfold, (I*D,) for UnfoldLN
    block{b}.{m}.blstm.{d}.w_ih (4H, I*D)           gates ordered i, f, g, o
    block{b}.{m}.blstm.{d}.w_hh (4H, H)
    block{b}.{m}.blstm.{d}.b_ih (4H,)
    block{b}.{m}.blstm.{d}.b_hh (4H,)
    block{b}.{m}.deconv.weight  (2H, D, I)          Deconv1D, in x out x k
    block{b}.{m}.deconv.bias    (D,)
    block{b}.attn.head{l}.{query,key,value}.weight  (C_o, D)
    block{b}.attn.head{l}.{query,key,value}.bias    (C_o,)
    block{b}.attn.head{l}.{query,key,value}.prelu   (C_o,)
    block{b}.attn.head{l}.{query,key,value}.norm.gain/bias (C_o, F)
    block{b}.attn.proj.weight (D, D), .bias/.prelu (D,), .norm.gain/bias (D, F)
    head.weight                 (D, 2C, 3, 3)       Deconv2D, in x out x kt x kf
    head.bias                   (2C,)

``C_o`` is E for query/key and D/L for value. The unfolded feature index is
``channel * I + kernel_offset``. LSTM states start at zero.

On disk a store is a text index plus one raw little-endian float32 blob::

    # gridsep weight manifest v1
    blob <file name, relative to the index>
    total_bytes <n>
    <name> <comma-separated shape> f32 <byte offset>
"""
from collections import OrderedDict
from collections.abc import Mapping
import os

import numpy as np

__all__ = ['WeightStore', 'weight_shapes', 'init_weights',
           'zero_final_projection', 'MANIFEST_HEADER']

MANIFEST_HEADER = '# gridsep weight manifest v1'


def _grid_shapes(cfg, prefix):
    norm = cfg.D if cfg.unfold_order == 'LNUnfold' else cfg.I * cfg.D
    shapes = [(f'{prefix}.norm.gain', (norm,)),
              (f'{prefix}.norm.bias', (norm,))]
    for d in ('fwd', 'bwd'):
        p = f'{prefix}.blstm.{d}'
        shapes += [(f'{p}.w_ih', (4 * cfg.H, cfg.I * cfg.D)),
                   (f'{p}.w_hh', (4 * cfg.H, cfg.H)),
                   (f'{p}.b_ih', (4 * cfg.H,)),
                   (f'{p}.b_hh', (4 * cfg.H,))]
    shapes += [(f'{prefix}.deconv.weight', (2 * cfg.H, cfg.D, cfg.I)),
               (f'{prefix}.deconv.bias', (cfg.D,))]
    return shapes


def _pointwise_shapes(prefix, c_out, c_in, n_freq):
    return [(f'{prefix}.weight', (c_out, c_in)),
            (f'{prefix}.bias', (c_out,)),
            (f'{prefix}.prelu', (c_out,)),
            (f'{prefix}.norm.gain', (c_out, n_freq)),
            (f'{prefix}.norm.bias', (c_out, n_freq))]


def weight_shapes(cfg):
    """Ordered mapping name -> shape of every tensor ``cfg`` requires."""
    shapes = []
    for k, c_in in enumerate(cfg.input_channels):
        shapes += [(f'embed{k}.conv.weight', (cfg.D, c_in, 3, 3)),
                   (f'embed{k}.conv.bias', (cfg.D,)),
                   (f'embed{k}.norm.gain', (cfg.D,)),
                   (f'embed{k}.norm.bias', (cfg.D,))]
    for b in range(cfg.B):
        shapes += _grid_shapes(cfg, f'block{b}.intra')
        shapes += _grid_shapes(cfg, f'block{b}.sub')
        if cfg.attention:
            dv = cfg.D // cfg.L
            for l in range(cfg.L):
                p = f'block{b}.attn.head{l}'
                shapes += _pointwise_shapes(f'{p}.query', cfg.E, cfg.D, cfg.F)
                shapes += _pointwise_shapes(f'{p}.key', cfg.E, cfg.D, cfg.F)
                shapes += _pointwise_shapes(f'{p}.value', dv, cfg.D, cfg.F)
            shapes += _pointwise_shapes(f'block{b}.attn.proj', cfg.D, cfg.D,
                                        cfg.F)
    shapes += [('head.weight', (cfg.D, 2 * cfg.C, 3, 3)),
               ('head.bias', (2 * cfg.C,))]
    return OrderedDict(shapes)


class WeightStore(Mapping):
    """Immutable name -> float64 array mapping validated against a config."""

    def __init__(self, tensors, cfg=None):
        self._tensors = OrderedDict()
        for name, value in tensors.items():
            arr = np.array(value, dtype=np.float64)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f'Non-finite values in {name}')
            arr.setflags(write=False)
            self._tensors[name] = arr
        if cfg is not None:
            self.validate(cfg)

    def __getitem__(self, name):
        try:
            return self._tensors[name]
        except KeyError:
            raise KeyError(f'Missing weight tensor {name!r}') from None

    def __iter__(self):
        return iter(self._tensors)

    def __len__(self):
        return len(self._tensors)

    def validate(self, cfg):
        expected = weight_shapes(cfg)
        missing = [n for n in expected if n not in self._tensors]
        if missing:
            raise ValueError(f'Missing weight tensors: {missing[:5]}')
        extra = [n for n in self._tensors if n not in expected]
        if extra:
            raise ValueError(f'Unexpected weight tensors: {extra[:5]}')
        for name, shape in expected.items():
            if self._tensors[name].shape != shape:
                raise ValueError(
                    f'{name}: shape {self._tensors[name].shape}, '
                    f'expected {shape}')

    @property
    def n_params(self):
        return sum(a.size for a in self._tensors.values())

    def updated(self, mapping):
        """Copy with the tensors in ``mapping`` replaced or added."""
        new = OrderedDict(self._tensors)
        new.update(mapping)
        return WeightStore(new)

    def save(self, index_path, blob_name=None):
        """Write the text index to ``index_path`` and the blob beside it."""
        if blob_name is None:
            blob_name = os.path.splitext(os.path.basename(index_path))[0]
            blob_name += '.bin'
        lines = [MANIFEST_HEADER, f'blob {blob_name}']
        entries = []
        offset = 0
        chunks = []
        for name, arr in self._tensors.items():
            data = arr.astype('<f4').tobytes()
            shape = ','.join(str(s) for s in arr.shape)
            entries.append(f'{name} {shape} f32 {offset}')
            chunks.append(data)
            offset += len(data)
        lines.append(f'total_bytes {offset}')
        lines += entries
        folder = os.path.dirname(os.path.abspath(index_path))
        with open(os.path.join(folder, blob_name), 'wb') as fh:
            fh.write(b''.join(chunks))
        with open(index_path, 'w') as fh:
            fh.write('\n'.join(lines) + '\n')

    @classmethod
    def load(cls, index_path, cfg=None):
        with open(index_path) as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
        if not lines or lines[0] != MANIFEST_HEADER:
            raise ValueError(f'{index_path}: not a gridsep weight manifest')
        header = {}
        body = []
        for ln in lines[1:]:
            parts = ln.split()
            if parts[0] in ('blob', 'total_bytes') and len(parts) == 2:
                header[parts[0]] = parts[1]
            else:
                body.append(parts)
        if 'blob' not in header or 'total_bytes' not in header:
            raise ValueError(f'{index_path}: missing blob/total_bytes')
        folder = os.path.dirname(os.path.abspath(index_path))
        with open(os.path.join(folder, header['blob']), 'rb') as fh:
            blob = fh.read()
        total = int(header['total_bytes'])
        if len(blob) != total:
            raise ValueError(
                f'Blob has {len(blob)} bytes, manifest says {total}')
        tensors = OrderedDict()
        for parts in body:
            if len(parts) != 4 or parts[2] != 'f32':
                raise ValueError(f'Malformed manifest line: {" ".join(parts)}')
            name, shape_s, _, off_s = parts
            shape = tuple(int(s) for s in shape_s.split(',') if s)
            off = int(off_s)
            nbytes = 4 * int(np.prod(shape, dtype=np.int64))
            if off < 0 or off + nbytes > total:
                raise ValueError(f'{name}: tensor out of blob bounds')
            if name in tensors:
                raise ValueError(f'Duplicate tensor {name}')
            tensors[name] = np.frombuffer(
                blob, dtype='<f4', count=nbytes // 4, offset=off).reshape(shape)
        return cls(tensors, cfg)


def init_weights(cfg, seed=0):
    """Synthetic weights from ``numpy.random.default_rng(seed)`` (PCG64).

    Tensors are drawn in :func:`weight_shapes` order: matrices/kernels
    uniform in +-1/sqrt(fan_in), biases uniform in +-0.1, normalization
    gains 1 + 0.1*N(0,1), normalization biases 0.1*N(0,1), PReLU slopes
    0.25. Values are rounded to float32 so a save/load round trip is exact.
    """
    rng = np.random.default_rng(seed)
    tensors = OrderedDict()
    for name, shape in weight_shapes(cfg).items():
        if name.endswith('.prelu'):
            arr = np.full(shape, 0.25)
        elif name.endswith('norm.gain'):
            arr = 1.0 + 0.1 * rng.standard_normal(shape)
        elif name.endswith('norm.bias'):
            arr = 0.1 * rng.standard_normal(shape)
        elif len(shape) == 1:
            arr = rng.uniform(-0.1, 0.1, shape)
        else:
            fan_in = int(np.prod(shape[1:]))
            s = 1.0 / np.sqrt(fan_in)
            arr = rng.uniform(-s, s, shape)
        tensors[name] = arr.astype(np.float32).astype(np.float64)
    return WeightStore(tensors, cfg)


def zero_final_projection(weights, block, module):
    """Zero the last affine map of one module so it becomes the identity.

    ``module`` is ``'intra'``, ``'sub'`` (Deconv1D weight and bias) or
    ``'attn'`` (cfLN gain and bias after the output projection).
    """
    if module in ('intra', 'sub'):
        names = [f'block{block}.{module}.deconv.weight',
                 f'block{block}.{module}.deconv.bias']
    elif module == 'attn':
        names = [f'block{block}.attn.proj.norm.gain',
                 f'block{block}.attn.proj.norm.bias']
    else:
        raise ValueError(f'Unknown module {module!r}')
    return weights.updated({n: np.zeros_like(weights[n]) for n in names})
