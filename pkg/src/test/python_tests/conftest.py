"""
Test configuration: puts the tool modules on `sys.path`.
"""
import os
import sys

from .ewt_test_client.constants import TOOL_ROOT

if os.fspath(TOOL_ROOT) not in sys.path:
    sys.path.insert(0, os.fspath(TOOL_ROOT))
