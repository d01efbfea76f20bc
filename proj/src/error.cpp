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

#include "orthopipe/error.hpp"

namespace orthopipe
{

std::string_view to_string(ErrorKind kind)
{
  switch (kind) {
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::MalformedWorldfile: return "MalformedWorldfile";
    case ErrorKind::SingularTransform: return "SingularTransform";
    case ErrorKind::IoFailure: return "IoFailure";
    case ErrorKind::OutOfBounds: return "OutOfBounds";
    case ErrorKind::BackendUnavailable: return "BackendUnavailable";
    case ErrorKind::ProtocolViolation: return "ProtocolViolation";
    case ErrorKind::Timeout: return "Timeout";
    case ErrorKind::MalformedRLE: return "MalformedRLE";
    case ErrorKind::DegenerateFit: return "DegenerateFit";
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::NoDetections: return "NoDetections";
    case ErrorKind::EmptyGroundTruth: return "EmptyGroundTruth";
    case ErrorKind::InfeasiblePlacement: return "InfeasiblePlacement";
  }
  return "Unknown";
}

int exit_code(ErrorKind kind)
{
  switch (kind) {
    case ErrorKind::BackendUnavailable:
    case ErrorKind::ProtocolViolation:
    case ErrorKind::Timeout:
      return 3;
    case ErrorKind::MalformedWorldfile:
    case ErrorKind::SingularTransform:
    case ErrorKind::IoFailure:
    case ErrorKind::OutOfBounds:
    case ErrorKind::MalformedRLE:
      return 4;
    case ErrorKind::InvalidConfig:
    case ErrorKind::DegenerateFit:
    case ErrorKind::NonConvergence:
    case ErrorKind::NoDetections:
    case ErrorKind::EmptyGroundTruth:
    case ErrorKind::InfeasiblePlacement:
      return 2;
  }
  return 1;
}

}  // namespace orthopipe
