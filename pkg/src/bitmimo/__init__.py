"""Bit-limited MIMO radar receiver simulation.

End-to-end pipeline: frequency-domain signal model on a delay-angle grid,
task-based hybrid analog/digital acquisition design under ADC resolution
constraints, dithered uniform quantization, sparse target recovery, and a
deterministic Monte Carlo benchmarking harness with a CLI.
"""

__version__ = "0.1.0"

from .adc import QuantizerSpec, bits_per_pri, levels_from_budget, quantize_complex_vector, quantize_real
from .combiner import (AcquisitionDesign, BlockDesign, analog_filter_response,
                       design_block, design_monotone, design_multitone,
                       emse_of_combiner, equalizing_unitary, load_design,
                       save_design, support_gamma, theoretical_emse, waterfill)
from .dictionary import (SteeringDictionary, apply_fbar, apply_fbar_adjoint,
                         build_dictionary, coherence, eval_c_direct,
                         load_dictionary, save_dictionary)
from .harness import (METHODS, ExperimentResult, ExperimentSpec, PointResult,
                      TrialMetrics, run_bilimo_trial, run_noquan_dr_trial,
                      run_noquan_lmmse_trial, run_sweep,
                      run_task_ignorant_trial, write_csv)
from .model import (RadarConfig, TargetScene, load_config, make_random_array_config,
                    make_ula_config, sample_scene, scene_from_sparse_vector,
                    scene_to_sparse_vector, snr_db_to_linear, snr_to_noise_variance)
from .recovery import (RecoveryBound, RecoverySpec, estimate_support, fista,
                       hit_rate, recovery_error_bound, relative_mse,
                       soft_threshold)
from .statistics import (CompressionMatrix, SignalStatistics,
                         build_compression_matrix, build_covariances,
                         lmmse_error, lmmse_transform)
