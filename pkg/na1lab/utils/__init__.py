"""
工具模块
"""

from na1lab.utils.datastructure import ReportMap, canonical_dumps, to_plain
from na1lab.utils.digest import DigestFactory, canonical_json, config_digest, digest_text
from na1lab.utils.linalg import psd_sqrt, check_psd, symmetric_eigh

__all__ = [
    "ReportMap",
    "canonical_dumps",
    "to_plain",
    "DigestFactory",
    "canonical_json",
    "config_digest",
    "digest_text",
    "psd_sqrt",
    "check_psd",
    "symmetric_eigh",
]
