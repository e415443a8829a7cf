"""Generalized sampling with data-driven reconstruction spaces.

Reconstruct a function in a fine wavelet space from a few coarse
measurements (Fourier or pixel averages) by restricting the solve to the
leading principal components of a training set.
"""
from .bases import (BasisMatrix, BasisSpec, analyze, assemble_cross_gram, build_basis,
                    cross_gram, cross_gram_fft, synthesize)
from .fpca import (EigenModel, TrainingSet, explained_variance, fit_eigenmodel,
                   load_eigenmodel, sample_stats, save_eigenmodel, sparse_top_eigs, top_eigs)
from .grid import FieldSample, Grid, field, inner, make_grid, norm
from .gs import (IllPosedError, MeasurementSet, SolverConfig, real_stack, sigma_min,
                 solve_l1, solve_ls, solve_ridge, subspace_cos, subspace_sin, truncate)
from .gsfpca import (ReconstructionResult, reconstruct, reconstruct_gs, reduced_system,
                     regularized_sigma_min, relative_error)
from .simulate import (GenerativeModel1D, NoiseSpec, PhantomGenerator, draw_1d,
                       gaussian_model_1d, make_training_set, measure, perturb_ellipses,
                       phantom, rng_stream)

__version__ = "0.1.0"
