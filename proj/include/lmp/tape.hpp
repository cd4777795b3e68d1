#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

namespace lmp::ad {

using Mat = Eigen::MatrixXd;

class Tape;

// Handle to a node on a tape. Cheap to copy; valid as long as the tape lives.
class Var {
 public:
  Var() = default;
  const Mat& val() const;
  const Mat& grad() const;
  Eigen::Index rows() const { return val().rows(); }
  Eigen::Index cols() const { return val().cols(); }
  double scalar() const { return val()(0, 0); }
  bool valid() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  int index() const { return idx_; }

 private:
  friend class Tape;
  Var(Tape* tape, int idx) : tape_(tape), idx_(idx) {}
  Tape* tape_ = nullptr;
  int idx_ = -1;
};

// Reverse-mode tape over dense matrices. One tape records one forward pass;
// backward() accumulates gradients for every node that influenced the loss.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf with gradient tracking (weights, optimized inputs).
  Var leaf(Mat value);
  // Leaf without gradient tracking (data, timestamps, noise).
  Var constant(Mat value);

  // Seeds d(loss)/d(loss) = 1 and runs the recorded closures in reverse.
  // `loss` must be 1x1.
  void backward(const Var& loss);

  std::size_t size() const { return nodes_.size(); }

  const Mat& value_of(const Var& v) const { return nodes_[v.idx_].value; }
  const Mat& value_at(int idx) const { return nodes_[idx].value; }
  const Mat& grad_of(const Var& v) const;
  bool needs_grad(const Var& v) const { return nodes_[v.idx_].needs_grad; }

  // Internal: used by the op implementations. The closure receives the
  // node's own accumulated gradient and pushes contributions to its parents.
  using BackFn = std::function<void(Tape&, const Mat&)>;
  Var record(Mat value, bool needs_grad, BackFn back);
  void accumulate(int idx, const Mat& g);

 private:
  struct Node {
    Mat value;
    Mat grad;  // empty until touched during backward
    BackFn back;
    bool needs_grad = false;
  };
  std::vector<Node> nodes_;
};

// ---- elementwise / arithmetic ----
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var neg(Var a);
Var scale(Var a, double c);
Var add_scalar(Var a, double c);
Var square(Var a);
Var sqrt_(Var a);
Var exp_(Var a);
Var log_(Var a);
Var tanh_(Var a);
Var gelu(Var a);
Var reciprocal(Var a);

// ---- matrix products / shape ----
Var matmul(Var a, Var b);
Var matmul_nt(Var a, Var b);  // a * b^T
Var transpose(Var a);
Var concat_cols(Var a, Var b);
Var concat_rows(Var a, Var b);
Var slice_cols(Var a, Eigen::Index c0, Eigen::Index w);
Var slice_rows(Var a, Eigen::Index r0, Eigen::Index h);

// ---- broadcasts ----
Var row_broadcast_add(Var a, Var row);  // a: n x d, row: 1 x d
Var row_broadcast_mul(Var a, Var row);
Var col_broadcast_mul(Var a, Var col);  // col: n x 1
Var tile_rows(Var row, Eigen::Index n);  // 1 x d -> n x d

// ---- reductions ----
Var sum_all(Var a);    // 1 x 1
Var mean_all(Var a);   // 1 x 1
Var sum_rows(Var a);   // n x 1, sums over columns
Var sum_cols(Var a);   // 1 x d, sums over rows
Var max_cols(Var a);   // 1 x d, columnwise max over rows

// ---- structured ----
Var softmax_rows(Var a);
Var layer_norm_rows(Var a, double eps = 1e-6);
Var gather_rows(Var a, std::vector<Eigen::Index> idx);
Var rowwise_cross(Var a, Var b);  // n x 3 each

// Per-row 3x3 rotations stored column-major in 9 columns:
// cols 0..2 = first matrix column, 3..5 = second, 6..8 = third.
// The first six columns therefore coincide with the 6D representation.
Var rot_compose(Var A, Var B);        // n x 9, n x 9 -> n x 9 (A*B per row)
Var row_rotate(Var R, Var v);         // R: (1|n) x 9, v: (1|n) x 3 -> n x 3, R*v per row

// Batched 6D -> rotation conversion (n x 6 -> n x 9). Composite of the ops
// above; throws DegenerateInput on near-zero or near-collinear rows.
Var gram_schmidt_rows(Var sixd);

// Picks row `row` from each input and stacks them into a len(vars) x cols
// matrix. Used to assemble per-frame point sets from per-point trajectories.
Var stack_row(const std::vector<Var>& vars, Eigen::Index row);

}  // namespace lmp::ad
