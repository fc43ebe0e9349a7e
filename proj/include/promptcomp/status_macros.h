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

#ifndef PROMPTCOMP_STATUS_MACROS_H_
#define PROMPTCOMP_STATUS_MACROS_H_

#include "absl/status/status.h"
#include "absl/status/statusor.h"

#define PC_STATUS_CONCAT_INNER(a, b) a##b
#define PC_STATUS_CONCAT(a, b) PC_STATUS_CONCAT_INNER(a, b)

// Returns early with the status of `expr` if it is not OK.
#define RETURN_IF_ERROR(expr)                  \
  do {                                         \
    const absl::Status _pc_status = (expr);    \
    if (!_pc_status.ok()) return _pc_status;   \
  } while (0)

#define PC_ASSIGN_OR_RETURN_IMPL(tmp, lhs, rexpr) \
  auto tmp = (rexpr);                             \
  if (!tmp.ok()) return tmp.status();             \
  lhs = std::move(tmp).value()

// Evaluates a StatusOr expression, returning its status on failure and
// otherwise moving the value into `lhs`.
#define ASSIGN_OR_RETURN(lhs, rexpr) \
  PC_ASSIGN_OR_RETURN_IMPL(PC_STATUS_CONCAT(_pc_statusor_, __LINE__), lhs, rexpr)

#endif  // PROMPTCOMP_STATUS_MACROS_H_
