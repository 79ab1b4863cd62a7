from .config import ModelConfig
from .network import (NetworkParams, ForwardTrace, build_network, fusion_forward, encoder_forward, dac_forward,
                      rmp_forward, decoder_forward, forward, backward, parameter_count, decayed_names,
                      network_gradcheck)
from .checkpoint import save_checkpoint, load_checkpoint, import_weights
