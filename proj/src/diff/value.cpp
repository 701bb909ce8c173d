#include "vnegnn/diff/value.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

namespace vnegnn::diff {

namespace {

std::string shape_str(const Mat& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

void require_same_shape(const char* op, const Mat& a, const Mat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a) +
                         " vs " + shape_str(b));
  }
}

}  // namespace

void backward(const Value& loss) {
  if (loss.rows() != 1 || loss.cols() != 1) {
    throw ContractError("backward: loss must be 1x1, got " +
                        shape_str(loss.val()));
  }
  // Iterative post-order DFS; reverse visit order is a reverse topological
  // order of the tape, so each node is processed exactly once and only after
  // all its consumers.
  std::vector<Value::Node*> order;
  std::unordered_set<Value::Node*> visited;
  struct Frame {
    Value::Node* node;
    std::size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({loss.node(), 0});
  visited.insert(loss.node());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      Value::Node* p = f.node->parents[f.next_parent++].node();
      if (visited.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  loss.grad()(0, 0) += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Value::Node* n = *it;
    if (n->backprop) {
      n->ensure_grad();
      n->backprop(*n);
    }
  }
}

Value add(const Value& a, const Value& b) {
  require_same_shape("add", a.val(), b.val());
  return Value::make(a.val() + b.val(), {a, b}, [a, b](Value::Node& n) {
    a.grad() += n.grad;
    b.grad() += n.grad;
  });
}

Value sub(const Value& a, const Value& b) {
  require_same_shape("sub", a.val(), b.val());
  return Value::make(a.val() - b.val(), {a, b}, [a, b](Value::Node& n) {
    a.grad() += n.grad;
    b.grad() -= n.grad;
  });
}

Value cmul(const Value& a, const Value& b) {
  require_same_shape("cmul", a.val(), b.val());
  return Value::make(a.val().cwiseProduct(b.val()), {a, b},
                     [a, b](Value::Node& n) {
                       a.grad() += n.grad.cwiseProduct(b.val());
                       b.grad() += n.grad.cwiseProduct(a.val());
                     });
}

Value scale(const Value& a, double s) {
  return Value::make(s * a.val(), {a},
                     [a, s](Value::Node& n) { a.grad() += s * n.grad; });
}

Value add_scalar(const Value& a, double s) {
  return Value::make(a.val().array() + s, {a},
                     [a](Value::Node& n) { a.grad() += n.grad; });
}

Value vdiv(const Value& a, const Value& b) {
  require_same_shape("vdiv", a.val(), b.val());
  return Value::make(a.val().cwiseQuotient(b.val()), {a, b},
                     [a, b](Value::Node& n) {
                       a.grad() += n.grad.cwiseQuotient(b.val());
                       b.grad() -= n.grad.cwiseProduct(a.val()).cwiseQuotient(
                           b.val().cwiseProduct(b.val()));
                     });
}

Value matmul(const Value& a, const Value& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: shape mismatch " + shape_str(a.val()) +
                         " vs " + shape_str(b.val()));
  }
  return Value::make(a.val() * b.val(), {a, b}, [a, b](Value::Node& n) {
    a.grad().noalias() += n.grad * b.val().transpose();
    b.grad().noalias() += a.val().transpose() * n.grad;
  });
}

Value vsqrt(const Value& a) {
  Mat out = a.val().array().max(1e-300).sqrt();
  return Value::make(out, {a}, [a, out](Value::Node& n) {
    a.grad().array() += 0.5 * n.grad.array() / out.array();
  });
}

Value reciprocal_shift(const Value& a, double c) {
  Mat out = (a.val().array() + c).inverse();
  return Value::make(out, {a}, [a, out](Value::Node& n) {
    a.grad().array() -= n.grad.array() * out.array().square();
  });
}

Value silu(const Value& a) {
  Mat sig = ((-a.val().array()).exp() + 1.0).inverse();
  Mat out = a.val().cwiseProduct(sig);
  return Value::make(out, {a}, [a, sig](Value::Node& n) {
    // d/dx x*s(x) = s(x) (1 + x (1 - s(x)))
    a.grad().array() +=
        n.grad.array() * sig.array() *
        (1.0 + a.val().array() * (1.0 - sig.array()));
  });
}

Value sigmoid(const Value& a) {
  Mat out = ((-a.val().array()).exp() + 1.0).inverse();
  return Value::make(out, {a}, [a, out](Value::Node& n) {
    a.grad().array() +=
        n.grad.array() * out.array() * (1.0 - out.array());
  });
}

Value huber(const Value& a, double delta) {
  Mat out = a.val().unaryExpr([delta](double x) {
    double ax = std::abs(x);
    return ax <= delta ? 0.5 * x * x : delta * (ax - 0.5 * delta);
  });
  return Value::make(out, {a}, [a, delta](Value::Node& n) {
    a.grad().array() +=
        n.grad.array() *
        a.val().unaryExpr([delta](double x) {
           return std::abs(x) <= delta ? x : (x > 0 ? delta : -delta);
         }).array();
  });
}

Value bce_with_logits(const Value& logits, const Mat& targets) {
  require_same_shape("bce_with_logits", logits.val(), targets);
  // loss = softplus(l) - y*l, softplus in the overflow-safe form.
  Mat out = logits.val().binaryExpr(targets, [](double l, double y) {
    double sp = l > 0 ? l + std::log1p(std::exp(-l)) : std::log1p(std::exp(l));
    return sp - y * l;
  });
  return Value::make(out, {logits}, [logits, targets](Value::Node& n) {
    Mat sig = ((-logits.val().array()).exp() + 1.0).inverse();
    logits.grad() += n.grad.cwiseProduct(sig - targets);
  });
}

Value add_row_broadcast(const Value& a, const Value& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw DimensionError("add_row_broadcast: shape mismatch " +
                         shape_str(a.val()) + " vs " + shape_str(row.val()));
  }
  Mat out = a.val().rowwise() + row.val().row(0);
  return Value::make(out, {a, row}, [a, row](Value::Node& n) {
    a.grad() += n.grad;
    row.grad() += n.grad.colwise().sum();
  });
}

Value mul_row_broadcast(const Value& a, const Value& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw DimensionError("mul_row_broadcast: shape mismatch " +
                         shape_str(a.val()) + " vs " + shape_str(row.val()));
  }
  Mat out = a.val().array().rowwise() * row.val().row(0).array();
  return Value::make(out, {a, row}, [a, row](Value::Node& n) {
    a.grad().array() += n.grad.array().rowwise() * row.val().row(0).array();
    row.grad() += n.grad.cwiseProduct(a.val()).colwise().sum();
  });
}

Value add_col_broadcast(const Value& a, const Value& col, double coeff) {
  if (col.cols() != 1 || col.rows() != a.rows()) {
    throw DimensionError("add_col_broadcast: shape mismatch " +
                         shape_str(a.val()) + " vs " + shape_str(col.val()));
  }
  Mat out = a.val().colwise() + coeff * col.val().col(0);
  return Value::make(out, {a, col}, [a, col, coeff](Value::Node& n) {
    a.grad() += n.grad;
    col.grad() += coeff * n.grad.rowwise().sum();
  });
}

Value row_scale(const Value& a, const Value& s) {
  if (s.cols() != 1 || s.rows() != a.rows()) {
    throw DimensionError("row_scale: shape mismatch " + shape_str(a.val()) +
                         " vs " + shape_str(s.val()));
  }
  Mat out = a.val().array().colwise() * s.val().col(0).array();
  return Value::make(out, {a, s}, [a, s](Value::Node& n) {
    a.grad().array() += n.grad.array().colwise() * s.val().col(0).array();
    s.grad() += n.grad.cwiseProduct(a.val()).rowwise().sum();
  });
}

Value concat_cols(std::span<const Value> parts) {
  if (parts.empty()) throw ContractError("concat_cols: no parts");
  Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  for (const Value& p : parts) {
    if (p.rows() != rows) {
      throw DimensionError("concat_cols: row mismatch " +
                           shape_str(parts[0].val()) + " vs " +
                           shape_str(p.val()));
    }
    cols += p.cols();
  }
  Mat out(rows, cols);
  Eigen::Index at = 0;
  std::vector<Value> parents(parts.begin(), parts.end());
  for (const Value& p : parts) {
    out.middleCols(at, p.cols()) = p.val();
    at += p.cols();
  }
  return Value::make(std::move(out), parents, [](Value::Node& n) {
    Eigen::Index at = 0;
    for (Value& p : n.parents) {
      p.grad() += n.grad.middleCols(at, p.cols());
      at += p.cols();
    }
  });
}

Value gather_rows(const Value& a, std::vector<int> idx) {
  Mat out(static_cast<Eigen::Index>(idx.size()), a.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) out.row(r) = a.val().row(idx[r]);
  return Value::make(std::move(out), {a},
                     [a, idx = std::move(idx)](Value::Node& n) {
                       Mat& g = a.grad();
                       for (std::size_t r = 0; r < idx.size(); ++r)
                         g.row(idx[r]) += n.grad.row(static_cast<Eigen::Index>(r));
                     });
}

Value scatter_sum_rows(const Value& a, std::vector<int> idx, int n_rows) {
  if (static_cast<Eigen::Index>(idx.size()) != a.rows()) {
    throw DimensionError("scatter_sum_rows: index count " +
                         std::to_string(idx.size()) + " vs rows " +
                         std::to_string(a.rows()));
  }
  Mat out = Mat::Zero(n_rows, a.cols());
  for (std::size_t r = 0; r < idx.size(); ++r)
    out.row(idx[r]) += a.val().row(static_cast<Eigen::Index>(r));
  return Value::make(std::move(out), {a},
                     [a, idx = std::move(idx)](Value::Node& n) {
                       Mat& g = a.grad();
                       for (std::size_t r = 0; r < idx.size(); ++r)
                         g.row(static_cast<Eigen::Index>(r)) += n.grad.row(idx[r]);
                     });
}

Value reshape_rowmajor(const Value& a, int rows, int cols) {
  if (a.rows() * a.cols() != static_cast<Eigen::Index>(rows) * cols) {
    throw DimensionError("reshape_rowmajor: cannot view " +
                         shape_str(a.val()) + " as " + std::to_string(rows) +
                         "x" + std::to_string(cols));
  }
  const Eigen::Index in_cols = a.cols();
  Mat out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) {
      Eigen::Index flat = r * cols + c;
      out(r, c) = a.val()(flat / in_cols, flat % in_cols);
    }
  return Value::make(std::move(out), {a}, [a, cols, in_cols](Value::Node& n) {
    Mat& g = a.grad();
    for (Eigen::Index r = 0; r < n.grad.rows(); ++r)
      for (Eigen::Index c = 0; c < n.grad.cols(); ++c) {
        Eigen::Index flat = r * cols + c;
        g(flat / in_cols, flat % in_cols) += n.grad(r, c);
      }
  });
}

Value row_sum(const Value& a) {
  return Value::make(a.val().rowwise().sum(), {a}, [a](Value::Node& n) {
    a.grad().colwise() += n.grad.col(0);
  });
}

Value row_mean(const Value& a) {
  double inv = 1.0 / static_cast<double>(a.cols());
  return Value::make(inv * a.val().rowwise().sum(), {a},
                     [a, inv](Value::Node& n) {
                       a.grad().colwise() += inv * n.grad.col(0);
                     });
}

Value sum(const Value& a) {
  return Value::make(Mat::Constant(1, 1, a.val().sum()), {a},
                     [a](Value::Node& n) {
                       a.grad().array() += n.grad(0, 0);
                     });
}

Value mean(const Value& a) {
  double inv = 1.0 / static_cast<double>(a.val().size());
  return Value::make(Mat::Constant(1, 1, inv * a.val().sum()), {a},
                     [a, inv](Value::Node& n) {
                       a.grad().array() += inv * n.grad(0, 0);
                     });
}

Value row_min(const Value& a) {
  std::vector<int> argmin(a.rows());
  Mat out(a.rows(), 1);
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    Eigen::Index c;
    out(r, 0) = a.val().row(r).minCoeff(&c);
    argmin[r] = static_cast<int>(c);
  }
  return Value::make(std::move(out), {a},
                     [a, argmin = std::move(argmin)](Value::Node& n) {
                       Mat& g = a.grad();
                       for (Eigen::Index r = 0; r < n.grad.rows(); ++r)
                         g(r, argmin[r]) += n.grad(r, 0);
                     });
}

Value dropout(const Value& a, double rate, Rng& rng, bool training) {
  if (!training || rate <= 0.0) return a;
  if (rate >= 1.0) throw ArgumentError("dropout: rate must be in [0, 1)");
  double keep = 1.0 - rate;
  Mat mask(a.rows(), a.cols());
  for (Eigen::Index c = 0; c < mask.cols(); ++c)
    for (Eigen::Index r = 0; r < mask.rows(); ++r)
      mask(r, c) = rng.uniform() < keep ? 1.0 / keep : 0.0;
  return Value::make(a.val().cwiseProduct(mask), {a},
                     [a, mask = std::move(mask)](Value::Node& n) {
                       a.grad() += n.grad.cwiseProduct(mask);
                     });
}

}  // namespace vnegnn::diff
