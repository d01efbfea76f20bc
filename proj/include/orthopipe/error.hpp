// Copyright (c) 2026 The orthopipe Authors. All rights reserved.
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

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace orthopipe
{

enum class ErrorKind
{
  InvalidConfig,
  MalformedWorldfile,
  SingularTransform,
  IoFailure,
  OutOfBounds,
  BackendUnavailable,
  ProtocolViolation,
  Timeout,
  MalformedRLE,
  DegenerateFit,
  NonConvergence,
  NoDetections,
  EmptyGroundTruth,
  InfeasiblePlacement,
};

std::string_view to_string(ErrorKind kind);

/// Process exit code for an error kind: 2 config/data, 3 backend, 4 io.
int exit_code(ErrorKind kind);

class Error : public std::runtime_error
{
public:
  Error(ErrorKind kind, const std::string & message)
  : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind)
  {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

}  // namespace orthopipe
