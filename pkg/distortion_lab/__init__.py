"""distortion-lab: numerical experiments on dilatation functionals of space mappings."""
from .construct import (CertifiedGood, MappingSequence, affine_stretch, cantor_sequence, collapse_sequence,
                        counterexample_for, laminate_sequence, left_jump_sequence, stock_sequences)
from .errors import DistortionLabError
from .field import DilatationField, GridMapping, dilatation_field, outer_dilatation
from .functional import FunctionalSpec, Weight, functional_value, semicontinuity_experiment
from .growth import GrowthFunction, Piece
from .growth_spec import growth_from_dict, load_growth

__version__ = "0.1.0"
