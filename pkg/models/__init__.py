from .dho import *
from .two_level import *
from .qbm import *
from .qlbe import *
