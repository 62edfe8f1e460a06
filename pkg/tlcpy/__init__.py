from .exceptions import *  # noqa: F401 F403
from .settings import *  # noqa: F401 F403
from .unset import ABSENT  # noqa: F401

from .trellis import *  # noqa: F401 F403
from .transfer import *  # noqa: F401 F403
from .permutation import *  # noqa: F401 F403
from .graph import *  # noqa: F401 F403
from .code import *  # noqa: F401 F403
from .decoder import *  # noqa: F401 F403
from .density import *  # noqa: F401 F403
from .simulation import *  # noqa: F401 F403
from .config import *  # noqa: F401 F403

__version__ = "0.1.0"
