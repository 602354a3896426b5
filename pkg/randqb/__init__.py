import typing

_exports = {
    # Decorators
    'CLI': ('._cli', 'Decorator'),
    'Log': ('._log', 'Decorator'),
    'Cache': ('._cache', 'Decorator'),
    # Errors
    'Error': ('._errors', 'Error'),
    'InvalidArgument': ('._errors', 'InvalidArgument'),
    'ShapeMismatch': ('._errors', 'ShapeMismatch'),
    'NonFiniteInput': ('._errors', 'NonFiniteInput'),
    'MatrixMarketError': ('._errors', 'MatrixMarketError'),
    'NumericalError': ('._errors', 'NumericalError'),
    'RankDeficient': ('._errors', 'RankDeficient'),
    'NearSingular': ('._errors', 'NearSingular'),
    'NotConverged': ('._errors', 'NotConverged'),
    # Dense kernels
    'matmul': ('._dense', 'matmul'),
    'frobenius_norm': ('._dense', 'frobenius_norm'),
    'spectral_norm_est': ('._dense', 'spectral_norm_est'),
    'householder_qr': ('._dense', 'householder_qr'),
    'pivoted_qr': ('._dense', 'pivoted_qr'),
    'orth': ('._dense', 'orth'),
    'jacobi_svd': ('._dense', 'jacobi_svd'),
    'back_substitute': ('._dense', 'back_substitute'),
    'phase_clock': ('._dense', 'phase_clock'),
    # Random streams
    'RngStream': ('._rng', 'RngStream'),
    'gaussian_matrix': ('._rng', 'gaussian_matrix'),
    'sparse_uniform_vector': ('._rng', 'sparse_uniform_vector'),
    'split_stream': ('._rng', 'split_stream'),
    # QB
    'QBFactors': ('._qb', 'QBFactors'),
    'ReorthMode': ('._qb', 'ReorthMode'),
    'StopCriterion': ('._qb', 'StopCriterion'),
    'StoppedBy': ('._qb', 'StoppedBy'),
    'rand_qb': ('._qb', 'rand_qb'),
    'rand_qb_b': ('._qb', 'rand_qb_b'),
    'rand_qb_p': ('._qb', 'rand_qb_p'),
    'rand_qb_pb': ('._qb', 'rand_qb_pb'),
    'reproject': ('._qb', 'reproject'),
    # Post-processing
    'CURFactors': ('._postprocess', 'CURFactors'),
    'FixedRank': ('._postprocess', 'FixedRank'),
    'IDFactors': ('._postprocess', 'IDFactors'),
    'PivotedQRFactors': ('._postprocess', 'PivotedQRFactors'),
    'SVDFactors': ('._postprocess', 'SVDFactors'),
    'TailTolerance': ('._postprocess', 'TailTolerance'),
    'export_factors': ('._postprocess', 'export_factors'),
    'qb_to_cur': ('._postprocess', 'qb_to_cur'),
    'qb_to_id': ('._postprocess', 'qb_to_id'),
    'qb_to_qr': ('._postprocess', 'qb_to_qr'),
    'qb_to_svd': ('._postprocess', 'qb_to_svd'),
    'read_factors_binary': ('._postprocess', 'read_factors_binary'),
    # Baselines
    'cpqr_partial': ('._baselines', 'cpqr_partial'),
    'greedy_rand_single': ('._baselines', 'greedy_rand_single'),
    'truncated_svd_oracle': ('._baselines', 'truncated_svd_oracle'),
    # Test matrices
    'Family': ('._matrices', 'Family'),
    'TestMatrixSpec': ('._matrices', 'TestMatrixSpec'),
    'gen_test_matrix': ('._matrices', 'gen_test_matrix'),
    'load_matrix_market': ('._matrices', 'load_matrix_market'),
    'optimal_errors': ('._matrices', 'optimal_errors'),
    'save_matrix_market': ('._matrices', 'save_matrix_market'),
    # Harness
    'AlgorithmSpec': ('._harness', 'AlgorithmSpec'),
    'ErrorRecord': ('._harness', 'ErrorRecord'),
    'ExperimentConfig': ('._harness', 'ExperimentConfig'),
    'config_defaults': ('._harness', 'config_defaults'),
    'cost_model_predict': ('._harness', 'cost_model_predict'),
    'run_accuracy_sweep': ('._harness', 'run_accuracy_sweep'),
    'run_experiment': ('._harness', 'run_experiment'),
    'run_skip_reorth': ('._harness', 'run_skip_reorth'),
    'run_speed_bench': ('._harness', 'run_speed_bench'),
    'run_stats': ('._harness', 'run_stats'),
    'write_records': ('._harness', 'write_records'),
}


def __getattr__(attr: str) -> typing.Any:
    if (export := _exports.get(attr)) is None:
        raise AttributeError(f"Module 'randqb' has no attribute '{attr}'")

    import importlib

    module, name = export
    return getattr(importlib.import_module(module, __name__), name)


__all__ = [*_exports]


def __dir__():
    return __all__
