//
// Copyright 2026 The DPDM Lab Authors
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
//

#ifndef DPDM_TYPES_H_
#define DPDM_TYPES_H_

#include <array>
#include <cmath>

namespace dpdm {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  Point2& operator+=(const Point2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  Point2& operator-=(const Point2& o) {
    x -= o.x;
    y -= o.y;
    return *this;
  }
  Point2& operator*=(double s) {
    x *= s;
    y *= s;
    return *this;
  }
  friend Point2 operator+(Point2 a, const Point2& b) { return a += b; }
  friend Point2 operator-(Point2 a, const Point2& b) { return a -= b; }
  friend Point2 operator*(double s, Point2 a) { return a *= s; }
  friend Point2 operator*(Point2 a, double s) { return a *= s; }
  friend bool operator==(const Point2&, const Point2&) = default;

  double SquaredNorm() const { return x * x + y * y; }
  double Norm() const { return std::sqrt(SquaredNorm()); }
  bool IsFinite() const { return std::isfinite(x) && std::isfinite(y); }
};

// Row-major 2x2 matrix, used for input Jacobians of 2D maps.
struct Mat2 {
  std::array<double, 4> a{};

  double& operator()(int r, int c) { return a[2 * r + c]; }
  double operator()(int r, int c) const { return a[2 * r + c]; }
  double SquaredFrobenius() const {
    return a[0] * a[0] + a[1] * a[1] + a[2] * a[2] + a[3] * a[3];
  }
};

// Label value meaning "no conditioning". Networks map it to a dedicated
// embedding row after the real classes.
inline constexpr int kNullLabel = -1;

struct LabeledSample {
  Point2 point;
  int label = kNullLabel;
};

}  // namespace dpdm

#endif  // DPDM_TYPES_H_
