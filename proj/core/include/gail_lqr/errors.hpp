/*
 * Copyright 2026 The gail-lqr Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace gail_lqr {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on shapes, symmetry or definiteness was violated.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// A policy that must be stabilizing is not. Carries the closed-loop
/// spectral radius that was observed.
class InstabilityError : public Error {
 public:
  InstabilityError(const std::string& what, double rho)
      : Error(what), rho_(rho) {}

  double rho() const noexcept { return rho_; }

 private:
  double rho_;
};

/// An iterative routine failed to converge or produced a residual above
/// its acceptance bound.
class NumericalFailure : public Error {
 public:
  using Error::Error;
};

/// The Riccati iteration diverged, so (A, B) is treated as not stabilizable.
class NotStabilizableError : public Error {
 public:
  using Error::Error;
};

/// A check needs a modulus or input that was not provided.
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

/// A sampler could not find enough admissible points.
class InsufficientCoverageError : public Error {
 public:
  using Error::Error;
};

/// Too many perturbed policies were rejected as destabilizing.
class MarginTooSmallError : public Error {
 public:
  MarginTooSmallError(const std::string& what, int rejected, int drawn)
      : Error(what), rejected_(rejected), drawn_(drawn) {}

  int rejected() const noexcept { return rejected_; }
  int drawn() const noexcept { return drawn_; }

 private:
  int rejected_;
  int drawn_;
};

}  // namespace gail_lqr
