#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "vnegnn/errors.hpp"
#include "vnegnn/rng.hpp"
#include "vnegnn/types.hpp"

namespace vnegnn::diff {

// Reverse-mode autodiff over dense double matrices. A Value is a handle to a
// tape node; building expressions records the tape, backward() replays it in
// reverse topological order. Not shareable across threads while a pass is in
// flight; independent tapes may run concurrently.
class Value {
 public:
  struct Node {
    Mat val;
    Mat grad;  // lazily allocated, same shape as val
    std::vector<Value> parents;
    // Reads this node's grad and accumulates into the parents' grads.
    std::function<void(Node&)> backprop;

    Mat& ensure_grad() {
      if (grad.size() == 0) grad = Mat::Zero(val.rows(), val.cols());
      return grad;
    }
  };

  Value() = default;
  explicit Value(Mat v) : node_(std::make_shared<Node>()) {
    node_->val = std::move(v);
  }

  bool valid() const { return node_ != nullptr; }
  const Mat& val() const { return node_->val; }
  Mat& mutable_val() { return node_->val; }
  Mat& grad() const { return node_->ensure_grad(); }
  void zero_grad() const {
    if (node_->grad.size() != 0) node_->grad.setZero();
  }

  Eigen::Index rows() const { return node_->val.rows(); }
  Eigen::Index cols() const { return node_->val.cols(); }

  Node* node() const { return node_.get(); }

  static Value make(Mat v, std::vector<Value> parents,
                    std::function<void(Node&)> backprop) {
    Value out(std::move(v));
    out.node_->parents = std::move(parents);
    out.node_->backprop = std::move(backprop);
    return out;
  }

 private:
  std::shared_ptr<Node> node_;
};

inline Value constant(Mat v) { return Value(std::move(v)); }
inline Value constant(double x) { return Value(Mat::Constant(1, 1, x)); }

// Populates gradients of every node reachable from `loss` (which must be
// 1x1). Gradients accumulate across calls; zero them explicitly between
// passes.
void backward(const Value& loss);

// --- elementwise / linear algebra ---------------------------------------
Value add(const Value& a, const Value& b);
Value sub(const Value& a, const Value& b);
Value cmul(const Value& a, const Value& b);  // Hadamard
Value scale(const Value& a, double s);
Value add_scalar(const Value& a, double s);
Value vdiv(const Value& a, const Value& b);  // elementwise a / b
Value matmul(const Value& a, const Value& b);
Value vsqrt(const Value& a);                      // sqrt(max(a, tiny))
Value reciprocal_shift(const Value& a, double c);  // 1 / (a + c)
Value silu(const Value& a);
Value sigmoid(const Value& a);
Value huber(const Value& a, double delta);  // elementwise, 0.5x^2 | d(|x|-d/2)
// Numerically stable elementwise binary cross-entropy from logits.
Value bce_with_logits(const Value& logits, const Mat& targets);

// --- broadcast helpers ----------------------------------------------------
Value add_row_broadcast(const Value& a, const Value& row);   // a + 1xD row
Value mul_row_broadcast(const Value& a, const Value& row);   // a .* 1xD row
Value add_col_broadcast(const Value& a, const Value& col, double coeff = 1.0);
Value row_scale(const Value& a, const Value& s);  // row i scaled by s(i,0)

// --- structure ------------------------------------------------------------
Value concat_cols(std::span<const Value> parts);
Value gather_rows(const Value& a, std::vector<int> idx);
Value scatter_sum_rows(const Value& a, std::vector<int> idx, int n_rows);
Value reshape_rowmajor(const Value& a, int rows, int cols);

// --- reductions -----------------------------------------------------------
Value row_sum(const Value& a);   // NxD -> Nx1
Value row_mean(const Value& a);  // NxD -> Nx1
Value sum(const Value& a);       // -> 1x1
Value mean(const Value& a);      // -> 1x1
// Per-row minimum; subgradient routes to the first argmin per row.
Value row_min(const Value& a);  // NxD -> Nx1

// Inverted dropout; identity when !training or rate == 0.
Value dropout(const Value& a, double rate, Rng& rng, bool training);

inline Value operator+(const Value& a, const Value& b) { return add(a, b); }
inline Value operator-(const Value& a, const Value& b) { return sub(a, b); }
inline Value operator*(double s, const Value& a) { return scale(a, s); }

}  // namespace vnegnn::diff
