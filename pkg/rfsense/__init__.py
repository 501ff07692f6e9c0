from . import errors
from . import geometry
from . import diffraction
from . import prior
from . import nn
from . import cvae
from . import channel
from . import localization
from . import csv
from . import config
from . import storage
from . import bench
from . import experiment
from . import cli

__all__ = [
    'errors',
    'geometry',
    'diffraction',
    'prior',
    'nn',
    'cvae',
    'channel',
    'localization',
    'csv',
    'config',
    'storage',
    'bench',
    'experiment',
    'cli'
]
