#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace fpref {

// A flat vector of float64 parameters tagged with the layout it conforms to.
// Two vectors combine only when their layout ids match.
//
// Every reduction (dot, l2_norm) sums left to right in index order, so results
// are bit-stable for a given input.
class ParamVector {
 public:
  ParamVector() = default;
  ParamVector(std::string layout_id, std::vector<double> values);

  static ParamVector zeros(std::string layout_id, std::size_t size);

  const std::string& layout_id() const noexcept { return layout_id_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  std::span<const double> values() const noexcept { return values_; }
  // In-place access for optimizer hot loops. Callers own the finiteness check.
  std::span<double> mutable_values() noexcept { return values_; }

  double operator[](std::size_t i) const { return values_[i]; }

  bool all_finite() const noexcept;

  bool operator==(const ParamVector&) const = default;

 private:
  std::string layout_id_;
  std::vector<double> values_;
};

void require_same_layout(const ParamVector& a, const ParamVector& b);
// Throws NonFiniteResult naming `where` if any entry is NaN or Inf.
void require_finite(const ParamVector& v, const char* where);

// a*x + y
ParamVector axpy(double a, const ParamVector& x, const ParamVector& y);
ParamVector scale(double a, const ParamVector& x);
ParamVector add(const ParamVector& x, const ParamVector& y);
ParamVector subtract(const ParamVector& x, const ParamVector& y);
ParamVector square(const ParamVector& x);
// Elementwise sign in {-1, 0, +1}.
ParamVector sign(const ParamVector& x);
ParamVector sqrt(const ParamVector& x);
// x / (sqrt(v) + tau), elementwise. The shared shape of every adaptive
// server step.
ParamVector adaptive_ratio(const ParamVector& x, const ParamVector& v, double tau);
double dot(const ParamVector& x, const ParamVector& y);
double l2_norm(const ParamVector& x);

}  // namespace fpref
