#ifndef GSF_TENSOR_HPP
#define GSF_TENSOR_HPP

#include <cassert>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "gsf/expr.hpp"

namespace gsf {

/// Dense multi-index array of expressions, row-major over the declared shape.
class IndexedExpr {
 public:
  IndexedExpr() = default;
  explicit IndexedExpr(std::vector<int> shape)
      : shape_(std::move(shape)),
        entries_(static_cast<size_t>(
                     std::accumulate(shape_.begin(), shape_.end(), 1, std::multiplies<int>())),
                 Expression::zero()) {}

  const std::vector<int>& shape() const { return shape_; }
  size_t size() const { return entries_.size(); }

  Expression& at(std::initializer_list<int> idx) { return entries_[flat(idx)]; }
  const Expression& at(std::initializer_list<int> idx) const { return entries_[flat(idx)]; }
  Expression& flat_at(size_t i) { return entries_[i]; }
  const Expression& flat_at(size_t i) const { return entries_[i]; }

  size_t flat(std::initializer_list<int> idx) const {
    assert(idx.size() == shape_.size());
    size_t f = 0;
    auto s = shape_.begin();
    for (int i : idx) {
      assert(i >= 0 && i < *s);
      f = f * static_cast<size_t>(*s) + static_cast<size_t>(i);
      ++s;
    }
    return f;
  }

  const std::vector<Expression>& entries() const { return entries_; }

 private:
  std::vector<int> shape_;
  std::vector<Expression> entries_;
};

/// Numeric counterpart used per evaluation point.
class NumericTensor {
 public:
  NumericTensor() = default;
  explicit NumericTensor(std::vector<int> shape)
      : shape_(std::move(shape)),
        vals_(static_cast<size_t>(
                  std::accumulate(shape_.begin(), shape_.end(), 1, std::multiplies<int>())),
              0.0) {}

  static NumericTensor evaluate(const IndexedExpr& t, Evaluator& ev) {
    NumericTensor out(t.shape());
    for (size_t i = 0; i < t.size(); ++i) out.vals_[i] = ev.eval(t.flat_at(i));
    return out;
  }

  const std::vector<int>& shape() const { return shape_; }
  double& at(std::initializer_list<int> idx) { return vals_[flat(idx)]; }
  double at(std::initializer_list<int> idx) const { return vals_[flat(idx)]; }
  double flat_at(size_t i) const { return vals_[i]; }
  size_t size() const { return vals_.size(); }

  double max_abs() const {
    double m = 0.0;
    for (double v : vals_) m = std::max(m, std::abs(v));
    return m;
  }

  size_t flat(std::initializer_list<int> idx) const {
    size_t f = 0;
    auto s = shape_.begin();
    for (int i : idx) {
      f = f * static_cast<size_t>(*s) + static_cast<size_t>(i);
      ++s;
    }
    return f;
  }

 private:
  std::vector<int> shape_;
  std::vector<double> vals_;
};

}  // namespace gsf

#endif
