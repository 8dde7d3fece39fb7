from ._adaptive import *
from ._arrangement import *
from ._bench import *
from ._config import *
from ._data import *
from ._dbn import *
from ._io import *
from ._rbm import *
from ._util import *

__version__ = "0.1.0"
