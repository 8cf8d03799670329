// Copyright 2026 The crisk Authors.
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

#ifndef CRISK_ERROR_H_
#define CRISK_ERROR_H_

#include <stdexcept>
#include <string>

namespace crisk {

// Base of every exception thrown by the library. The category maps onto the
// CLI exit codes (1 usage, 2 data, 3 numerical).
class Error : public std::runtime_error {
 public:
  enum class Category { kUsage = 1, kData = 2, kNumerical = 3 };

  Error(Category category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  Category category() const { return category_; }
  int exit_code() const { return static_cast<int>(category_); }

 private:
  Category category_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what)
      : Error(Category::kUsage, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(Category::kData, what) {}
};

// A value fell outside a discretization or a documented domain.
class RangeError : public DataError {
 public:
  explicit RangeError(const std::string& what) : DataError(what) {}
};

// Vehicles cannot be placed on the road without negative gaps.
class PlacementError : public DataError {
 public:
  explicit PlacementError(const std::string& what) : DataError(what) {}
};

// A proposal assigns zero probability where the nominal model does not.
class SupportError : public DataError {
 public:
  explicit SupportError(const std::string& what) : DataError(what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what)
      : Error(Category::kNumerical, what) {}
};

// Non-finite state produced during a rollout.
class SimulationError : public NumericalError {
 public:
  SimulationError(const std::string& what, int step)
      : NumericalError(what + " at step " + std::to_string(step)),
        step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

}  // namespace crisk

#endif  // CRISK_ERROR_H_
