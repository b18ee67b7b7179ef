# flake8: noqa: F401

from ._registry import Algorithm as Algorithm
from ._registry import EmbedConfig as EmbedConfig
from ._registry import Payload as Payload
from ._registry import DEFAULT_COX_STRENGTH as DEFAULT_COX_STRENGTH
from ._registry import DEFAULT_DSSS_TARGET_SNR_DB as DEFAULT_DSSS_TARGET_SNR_DB
from ._registry import MATCH_LADDER as MATCH_LADDER
from ._registry import REPLACE_LADDER as REPLACE_LADDER
from ._registry import capacity_bits as capacity_bits
from ._registry import embed as embed
from ._registry import extract as extract
from ._registry import gen_payload as gen_payload

from . import cox
from . import dsss
from . import lsb
