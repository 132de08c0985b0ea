from .config import ModelConfig, padded_length, unfolded_length
from .cost import count_params, estimate_macs, gmacs_per_second, mac_breakdown
from .gridnet import (ModelError, attention_module, embed_inputs, forward,
                      gridnet_block, intra_frame_module, stack_ri,
                      subband_module, unstack_ri)
from .weights import (WeightStore, init_weights, weight_shapes,
                      zero_final_projection)
