# Copyright 2026 The promptforge authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Python bindings for promptforge.

Request and response objects are plain dicts and lists shaped like the
JSON bodies of the HTTP API. Library errors raise `Error`, whose `kind`
names the failure and whose `info` holds the structured error body.
"""

from ._core import (
    CorpusIndex,
    Error,
    Workspace,
    aggregate,
    effective_pair_size,
    pack,
    rank_classify,
    render,
    scan,
    template_id,
)

__all__ = [
    "CorpusIndex",
    "Error",
    "Workspace",
    "aggregate",
    "effective_pair_size",
    "pack",
    "rank_classify",
    "render",
    "scan",
    "template_id",
]
