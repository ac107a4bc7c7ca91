from ._kinlab import *  # noqa: F401,F403
from ._kinlab import __doc__  # noqa: F401
