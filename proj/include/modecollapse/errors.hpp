// Copyright 2026 The modecollapse Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MODECOLLAPSE_ERRORS_HPP
#define MODECOLLAPSE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace modecollapse {

/// Invalid user-facing parameter (out of range, unparsable, inconsistent).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A computation produced a non-finite value or failed to converge.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the mathematical domain of a function.
class DomainError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Bisection bracket does not straddle the transition.
class BracketError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// A file or child process could not be read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace modecollapse

#endif  // MODECOLLAPSE_ERRORS_HPP
