// Copyright 2026 The promptcomp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PROMPTCOMP_CSV_H_
#define PROMPTCOMP_CSV_H_

#include <string>
#include <string_view>
#include <vector>

namespace promptcomp::csv {

// Quotes a field when it contains a comma, quote or newline.
std::string Escape(std::string_view field);

// Splits one RFC 4180 line (no embedded newlines).
std::vector<std::string> SplitLine(std::string_view line);

}  // namespace promptcomp::csv

#endif  // PROMPTCOMP_CSV_H_
