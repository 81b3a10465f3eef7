"""LTI tree codes, sequential decoding and networked control over noisy channels."""
from .channel import (ChannelModel, ExponentResult, capacity, certification_bound, critical_rate,
                      cutoff_rate, e0, e0_array, gallager_exponent, jelinek_constant, jelinek_exponent,
                      make_bec, make_bsc, output_marginal, pareto_exponent, simulate)
from .control import (ControlTrace, DeadbeatObserver, LoopConfig, PlantModel, QuantizerConfig,
                      cart_stick_plant, control_input, dequantize, lqr_cost, plant_step, quantize,
                      reconstruct_state, run_closed_loop, sample_truncated_gaussian)
from .seqdec import (BUDGET_EXHAUSTED, COMPLETED, FRONTIER_OVERFLOW, DecodeResult, DecoderLimits,
                     MetricConfig, branch_metric, fano_decode, first_error_delay,
                     ml_decode_bruteforce, stack_decode)
from .treecode import (EncoderState, LtiCode, branch_extend, dumps, encode_prefix, encode_step,
                       loads, sample_lti, subblock_expand)

__version__ = "0.1.0"
