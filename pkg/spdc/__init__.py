"""
Spontaneous parametric down-conversion biphoton simulator.
"""
from .errors import *
from .crystal_optics import *
from .spectral_model import *
from .correlation import *
from .interferometry import *
from .montecarlo_detection import *
from .tuning_curve import *
from .config import *
from .io import *
