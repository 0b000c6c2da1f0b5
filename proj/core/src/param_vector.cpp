#include "fpref/core/param_vector.hpp"

#include <cmath>
#include <utility>

#include "fpref/core/error.hpp"

namespace fpref {

ParamVector::ParamVector(std::string layout_id, std::vector<double> values)
    : layout_id_(std::move(layout_id)), values_(std::move(values)) {}

ParamVector ParamVector::zeros(std::string layout_id, std::size_t size) {
  return ParamVector(std::move(layout_id), std::vector<double>(size, 0.0));
}

bool ParamVector::all_finite() const noexcept {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void require_same_layout(const ParamVector& a, const ParamVector& b) {
  if (a.layout_id() != b.layout_id() || a.size() != b.size()) {
    throw LayoutMismatch(a.layout_id() + "[" + std::to_string(a.size()) + "]",
                         b.layout_id() + "[" + std::to_string(b.size()) + "]");
  }
}

void require_finite(const ParamVector& v, const char* where) {
  if (!v.all_finite()) throw NonFiniteResult(where);
}

namespace {

template <typename Fn>
ParamVector map1(const ParamVector& x, const char* where, Fn fn) {
  std::vector<double> out(x.size());
  auto in = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fn(in[i]);
  ParamVector result(x.layout_id(), std::move(out));
  require_finite(result, where);
  return result;
}

template <typename Fn>
ParamVector map2(const ParamVector& x, const ParamVector& y, const char* where,
                 Fn fn) {
  require_same_layout(x, y);
  std::vector<double> out(x.size());
  auto a = x.values();
  auto b = y.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fn(a[i], b[i]);
  ParamVector result(x.layout_id(), std::move(out));
  require_finite(result, where);
  return result;
}

}  // namespace

ParamVector axpy(double a, const ParamVector& x, const ParamVector& y) {
  return map2(x, y, "axpy", [a](double xi, double yi) { return a * xi + yi; });
}

ParamVector scale(double a, const ParamVector& x) {
  return map1(x, "scale", [a](double xi) { return a * xi; });
}

ParamVector add(const ParamVector& x, const ParamVector& y) {
  return map2(x, y, "add", [](double a, double b) { return a + b; });
}

ParamVector subtract(const ParamVector& x, const ParamVector& y) {
  return map2(x, y, "subtract", [](double a, double b) { return a - b; });
}

ParamVector square(const ParamVector& x) {
  return map1(x, "square", [](double v) { return v * v; });
}

ParamVector sign(const ParamVector& x) {
  return map1(x, "sign", [](double v) {
    return static_cast<double>((v > 0.0) - (v < 0.0));
  });
}

ParamVector sqrt(const ParamVector& x) {
  return map1(x, "sqrt", [](double v) { return std::sqrt(v); });
}

ParamVector adaptive_ratio(const ParamVector& x, const ParamVector& v,
                           double tau) {
  return map2(x, v, "adaptive_ratio",
              [tau](double xi, double vi) { return xi / (std::sqrt(vi) + tau); });
}

double dot(const ParamVector& x, const ParamVector& y) {
  require_same_layout(x, y);
  double acc = 0.0;
  auto a = x.values();
  auto b = y.values();
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  if (!std::isfinite(acc)) throw NonFiniteResult("dot");
  return acc;
}

double l2_norm(const ParamVector& x) {
  double acc = 0.0;
  for (double v : x.values()) acc += v * v;
  double norm = std::sqrt(acc);
  if (!std::isfinite(norm)) throw NonFiniteResult("l2_norm");
  return norm;
}

}  // namespace fpref
