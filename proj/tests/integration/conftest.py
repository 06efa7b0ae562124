# Copyright 2026 The gradnas Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.


import pytest


def pytest_addoption(parser):
    parser.addoption("--gradnas", required=True, help="path to the gradnas binary")
    parser.addoption("--repo", required=True, help="source tree root")


@pytest.fixture(scope="session")
def gradnas(request):
    return request.config.getoption("--gradnas")


@pytest.fixture(scope="session")
def repo(request):
    return request.config.getoption("--repo")
