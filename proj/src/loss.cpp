// Copyright 2026 The Authors.
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

#include "juntaq/loss.hpp"

#include <cmath>
#include <stdexcept>

namespace juntaq {
namespace {

double sign(double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); }

struct NamedKind {
  const char* name;
  LossSpec::Kind kind;
};

constexpr NamedKind kNames[] = {
    {"squared", LossSpec::Kind::kSquared},
    {"abs", LossSpec::Kind::kAbs},
    {"hinge", LossSpec::Kind::kHinge},
    {"exponential", LossSpec::Kind::kExponential},
    {"logistic", LossSpec::Kind::kLogistic},
    {"squared_plus_cubic", LossSpec::Kind::kSquaredPlusCubic},
    {"squared_plus_quartic_half", LossSpec::Kind::kSquaredPlusQuarticHalf},
};

}  // namespace

LossSpec::LossSpec(Kind kind) : kind_(kind) {
  if (kind == Kind::kPolynomial) {
    throw std::invalid_argument("use LossSpec::polynomial for custom losses");
  }
}

LossSpec::LossSpec(Kind kind, std::vector<double> coefficients,
                   PolyArgument arg)
    : kind_(kind), coef_(std::move(coefficients)), arg_(arg) {}

LossSpec LossSpec::polynomial(std::vector<double> coefficients,
                              PolyArgument argument) {
  if (coefficients.empty()) {
    throw std::invalid_argument("polynomial loss needs coefficients");
  }
  return LossSpec(Kind::kPolynomial, std::move(coefficients), argument);
}

LossSpec LossSpec::from_name(const std::string& name) {
  for (const auto& n : kNames) {
    if (name == n.name) return LossSpec(n.kind);
  }
  throw std::invalid_argument("unknown loss '" + name + "'");
}

LossSpec LossSpec::from_json(const nlohmann::json& j) {
  if (j.is_string()) return from_name(j.get<std::string>());
  if (!j.is_object()) throw std::invalid_argument("loss must be a name or object");
  for (const auto& [key, _] : j.items()) {
    if (key != "kind" && key != "coefficients" && key != "argument") {
      throw std::invalid_argument("unknown loss key '" + key + "'");
    }
  }
  const auto kind = j.at("kind").get<std::string>();
  if (kind != "custom_polynomial") {
    if (j.size() != 1) {
      throw std::invalid_argument("only custom_polynomial takes parameters");
    }
    return from_name(kind);
  }
  auto arg = PolyArgument::kResidual;
  if (j.contains("argument")) {
    const auto a = j.at("argument").get<std::string>();
    if (a == "margin") {
      arg = PolyArgument::kMargin;
    } else if (a != "residual") {
      throw std::invalid_argument("polynomial argument must be residual|margin");
    }
  }
  return polynomial(j.at("coefficients").get<std::vector<double>>(), arg);
}

std::string LossSpec::name() const {
  for (const auto& n : kNames) {
    if (n.kind == kind_) return n.name;
  }
  return "custom_polynomial";
}

nlohmann::json LossSpec::to_json() const {
  if (kind_ != Kind::kPolynomial) return name();
  return {{"kind", "custom_polynomial"},
          {"coefficients", coef_},
          {"argument", arg_ == PolyArgument::kMargin ? "margin" : "residual"}};
}

double LossSpec::value(double u, double y) const {
  const double r = u - y;
  switch (kind_) {
    case Kind::kSquared:
      return r * r;
    case Kind::kAbs:
      return std::abs(r);
    case Kind::kHinge:
      return std::max(1.0 - u * y, 0.0);
    case Kind::kExponential:
      return std::exp(-u * y);
    case Kind::kLogistic: {
      const double m = -u * y;
      return m > 0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m));
    }
    case Kind::kSquaredPlusCubic:
      return r * r + std::abs(r) * r * r;
    case Kind::kSquaredPlusQuarticHalf:
      return 0.5 * r * r + 0.25 * r * r * r * r;
    case Kind::kPolynomial: {
      const double t = arg_ == PolyArgument::kMargin ? u * y : r;
      double acc = 0.0;
      for (auto it = coef_.rbegin(); it != coef_.rend(); ++it) acc = acc * t + *it;
      return acc;
    }
  }
  return 0.0;
}

double LossSpec::derivative(double u, double y) const {
  const double r = u - y;
  switch (kind_) {
    case Kind::kSquared:
      return 2.0 * r;
    case Kind::kAbs:
      return sign(r);
    case Kind::kHinge:
      return u * y <= 1.0 ? -y : 0.0;
    case Kind::kExponential:
      return -y * std::exp(-u * y);
    case Kind::kLogistic:
      return -y / (1.0 + std::exp(u * y));
    case Kind::kSquaredPlusCubic:
      return 2.0 * r + 3.0 * r * std::abs(r);
    case Kind::kSquaredPlusQuarticHalf:
      return r + r * r * r;
    case Kind::kPolynomial: {
      const double t = arg_ == PolyArgument::kMargin ? u * y : r;
      double acc = 0.0;
      for (std::size_t k = coef_.size() - 1; k >= 1; --k) {
        acc = acc * t + static_cast<double>(k) * coef_[k];
      }
      return arg_ == PolyArgument::kMargin ? acc * y : acc;
    }
  }
  return 0.0;
}

bool LossSpec::piecewise() const {
  return kind_ == Kind::kAbs || kind_ == Kind::kHinge;
}

std::vector<double> LossSpec::kinks(double y) const {
  if (kind_ == Kind::kAbs) return {y};
  if (kind_ == Kind::kHinge && y != 0.0) return {1.0 / y};
  return {};
}

}  // namespace juntaq
