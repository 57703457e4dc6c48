import os
import sys

import pytest

# tests reference corpus files by repository-relative path
os.chdir(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
