// Copyright 2026 The mmdalert Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mmd/decompose.hpp"

namespace mmd {

std::string_view to_string(Decomposer d) {
  return d == Decomposer::MMD ? "mmd" : "classical";
}

Decomposer parse_decomposer(std::string_view text) {
  if (text == "mmd" || text == "MMD") return Decomposer::MMD;
  if (text == "classical") return Decomposer::Classical;
  throw InputError("unknown decomposer '" + std::string(text) + "'");
}

}  // namespace mmd
