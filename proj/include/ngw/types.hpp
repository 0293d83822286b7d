// Copyright 2026 The ngw-sim Authors
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

#pragma once

#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace ngw {

template <int D>
using Vec = Eigen::Matrix<double, D, 1>;
template <int D>
using Mat = Eigen::Matrix<double, D, D>;

using Vec2 = Vec<2>;
using Vec4 = Vec<4>;
using Mat2 = Mat<2>;
using Mat4 = Mat<4>;

inline constexpr double kPi = std::numbers::pi;

// Phase-space ordering used throughout: (x_A, p_A, x_B, p_B).
enum class Mode { A = 0, B = 1 };

inline constexpr int x_index(Mode m) { return 2 * static_cast<int>(m); }
inline constexpr int p_index(Mode m) { return 2 * static_cast<int>(m) + 1; }

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Both subtraction weights vanish, so the heralded state has zero norm.
class DegenerateStateError : public Error {
 public:
  using Error::Error;
};

// A parameter lies outside the domain where the operation is defined.
class DomainError : public Error {
 public:
  using Error::Error;
};

class QuadratureError : public Error {
 public:
  QuadratureError(const std::string& what, double achieved)
      : Error(what), achieved_(achieved) {}
  double achieved_tolerance() const { return achieved_; }

 private:
  double achieved_;
};

class FitError : public Error {
 public:
  using Error::Error;
};

}  // namespace ngw
