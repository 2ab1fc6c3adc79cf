// Copyright 2026 The SNV Authors.
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

#ifndef SNV_ERROR_HPP
#define SNV_ERROR_HPP

#include <stdexcept>
#include <string>

namespace snv {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller violated a documented precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// The request exceeds what an exact routine is willing to enumerate.
class CapacityRefused : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed, missing or out-of-range data (labels, files, splits).
class DataError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A metric is not defined for the given input (e.g. BWT with one task).
class UndefinedMetric : public Error {
 public:
  using Error::Error;
};

/// Raised when a game's value function throws; carries the coalition.
class GameEvaluationError : public Error {
 public:
  GameEvaluationError(const std::string& coalition, const std::string& what)
      : Error("value function failed on coalition " + coalition + ": " + what),
        coalition_(coalition) {}

  const std::string& coalition() const noexcept { return coalition_; }

 private:
  std::string coalition_;
};

namespace detail {

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw PreconditionError(msg);
}

}  // namespace detail
}  // namespace snv

#endif  // SNV_ERROR_HPP
