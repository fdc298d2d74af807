// Copyright 2026 The vmfosr Authors
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

namespace vmfosr {

/// Base class for every failure raised by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed configuration or invalid argument combinations.
struct ConfigError : Error {
  using Error::Error;
};

/// Numerical failures: degenerate norms, empty inputs, non-finite losses.
struct NumericError : Error {
  using Error::Error;
};

/// A finite-difference verification block exceeded its tolerance.
struct GradCheckError : Error {
  using Error::Error;
};

/// File or serialization problems.
struct IoError : Error {
  using Error::Error;
};

}  // namespace vmfosr
