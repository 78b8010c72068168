"""Deformable butterfly factorization with numpy and scipy."""

from .butterfly import (BracketingTree, ClrReport, FactorizationResult, balanced_permutation, balanced_tree,
                        bound_constants, butterfly_factorize, butterfly_product, clr_check, factorize_any,
                        hierarchical_factorize, identity_permutation, permutation_to_tree,
                        random_butterfly, random_permutation, reverse_permutation, split_error,
                        split_errors, tree_to_permutation)
from .kfactor import (KroneckerSparseFactor, apply_chain, dense_product, is_left_r_unitary,
                      is_right_r_unitary, multiply, multiply_chain)
from .pattern import (Architecture, ArchitectureError, MergeTrace, NotChainableError, Pattern,
                      RedundantArchitectureError, architecture_from_size, chain_rank,
                      enumerate_architectures, is_chainable, is_redundant, is_redundant_pair, low_rank,
                      monarch, product_pattern, rank_vector, remove_redundancy, square_dyadic, star)
from .support import BlockPartition, block_partition, support_matrix, support_product_check
from .twofactor import OutsideSupportWarning, TwoFactorResult, fsmf, fsmf_error_only, pseudo_orthonormalize

__version__ = "0.1.0"
