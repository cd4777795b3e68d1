#include "lmp/tape.hpp"

#include <cmath>

#include "lmp/error.hpp"

namespace lmp::ad {

const Mat& Var::val() const { return tape_->value_of(*this); }
const Mat& Var::grad() const { return tape_->grad_of(*this); }

Var Tape::leaf(Mat value) { return record(std::move(value), true, nullptr); }
Var Tape::constant(Mat value) { return record(std::move(value), false, nullptr); }

Var Tape::record(Mat value, bool needs_grad, BackFn back) {
  Node node;
  node.value = std::move(value);
  node.needs_grad = needs_grad;
  if (needs_grad) node.back = std::move(back);
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::accumulate(int idx, const Mat& g) {
  Node& node = nodes_[idx];
  if (!node.needs_grad) return;
  if (node.grad.size() == 0) {
    node.grad = g;
  } else {
    node.grad += g;
  }
}

const Mat& Tape::grad_of(const Var& v) const {
  static const Mat empty;
  const Node& node = nodes_[v.idx_];
  return node.grad.size() == 0 ? empty : node.grad;
}

void Tape::backward(const Var& loss) {
  if (loss.rows() != 1 || loss.cols() != 1) {
    raise(ErrorCode::InvalidConfig, "backward expects a 1x1 loss node");
  }
  nodes_[loss.index()].grad = Mat::Ones(1, 1);
  for (int i = loss.index(); i >= 0; --i) {
    Node& node = nodes_[i];
    if (node.back && node.grad.size() != 0) node.back(*this, node.grad);
  }
}

namespace {

Tape& tape_of(const Var& a) { return *a.tape(); }

bool wants(const Var& a) { return tape_of(a).needs_grad(a); }
bool wants(const Var& a, const Var& b) { return wants(a) || wants(b); }

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    raise(ErrorCode::LengthMismatch, std::string(op) + ": shape mismatch");
  }
}

// Maps one 9-wide row to a 3x3 matrix (column-major layout, see tape.hpp).
inline Eigen::Matrix3d unpack3(const Mat& m, Eigen::Index r) {
  Eigen::Matrix3d R;
  R << m(r, 0), m(r, 3), m(r, 6),
       m(r, 1), m(r, 4), m(r, 7),
       m(r, 2), m(r, 5), m(r, 8);
  return R;
}

inline void pack3_add(Mat& m, Eigen::Index r, const Eigen::Matrix3d& R) {
  m(r, 0) += R(0, 0); m(r, 1) += R(1, 0); m(r, 2) += R(2, 0);
  m(r, 3) += R(0, 1); m(r, 4) += R(1, 1); m(r, 5) += R(2, 1);
  m(r, 6) += R(0, 2); m(r, 7) += R(1, 2); m(r, 8) += R(2, 2);
}

}  // namespace

Var add(Var a, Var b) {
  check_same_shape(a, b, "add");
  Tape& t = tape_of(a);
  const int ia = a.index(), ib = b.index();
  return t.record(a.val() + b.val(), wants(a, b), [ia, ib](Tape& t, const Mat& g) {
    t.accumulate(ia, g);
    t.accumulate(ib, g);
  });
}

Var sub(Var a, Var b) {
  check_same_shape(a, b, "sub");
  Tape& t = tape_of(a);
  const int ia = a.index(), ib = b.index();
  return t.record(a.val() - b.val(), wants(a, b), [ia, ib](Tape& t, const Mat& g) {
    t.accumulate(ia, g);
    t.accumulate(ib, -g);
  });
}

Var mul(Var a, Var b) {
  check_same_shape(a, b, "mul");
  Tape& t = tape_of(a);
  const int ia = a.index(), ib = b.index();
  return t.record(a.val().cwiseProduct(b.val()), wants(a, b), [ia, ib](Tape& t, const Mat& g) {
    t.accumulate(ia, g.cwiseProduct(t.value_at(ib)));
    t.accumulate(ib, g.cwiseProduct(t.value_at(ia)));
  });
}

Var div(Var a, Var b) {
  check_same_shape(a, b, "div");
  Tape& t = tape_of(a);
  const int ia = a.index(), ib = b.index();
  return t.record(a.val().cwiseQuotient(b.val()), wants(a, b), [ia, ib](Tape& t, const Mat& g) {
    const Mat& bv = t.value_at(ib);
    t.accumulate(ia, g.cwiseQuotient(bv));
    t.accumulate(ib, -g.cwiseProduct(t.value_at(ia)).cwiseQuotient(bv.cwiseProduct(bv)));
  });
}

Var neg(Var a) { return scale(a, -1.0); }

Var scale(Var a, double c) {
  Tape& t = tape_of(a);
  const int ia = a.index();
  return t.record(a.val() * c, wants(a), [ia, c](Tape& t, const Mat& g) {
    t.accumulate(ia, g * c);
  });
}

Var add_scalar(Var a, double c) {
  Tape& t = tape_of(a);
  const int ia = a.index();
  return t.record(a.val().array() + c, wants(a), [ia](Tape& t, const Mat& g) {
    t.accumulate(ia, g);
  });
}

Var square(Var a) {
  Tape& t = tape_of(a);
  const int ia = a.index();
  return t.record(a.val().array().square(), wants(a), [ia](Tape& t, const Mat& g) {
    t.accumulate(ia, 2.0 * g.cwiseProduct(t.value_at(ia)));
  });
}

Var sqrt_(Var a) {
  Tape& t = tape_of(a);
  Mat out = a.val().array().sqrt();
  const int ia = a.index();
  const int self_hint = static_cast<int>(t.size());
  return t.record(std::move(out), wants(a), [ia, self_hint](Tape& t, const Mat& g) {
    t.accumulate(ia, (g.array() / (2.0 * t.value_at(self_hint).array())).matrix());
  });
}

Var exp_(Var a) {
  Tape& t = tape_of(a);
  Mat out = a.val().array().exp();
  const int ia = a.index();
  const int self_hint = static_cast<int>(t.size());
  return t.record(std::move(out), wants(a), [ia, self_hint](Tape& t, const Mat& g) {
    t.accumulate(ia, g.cwiseProduct(t.value_at(self_hint)));
  });
}

Var log_(Var a) {
  Tape& t = tape_of(a);
  const int ia = a.index();
  return t.record(a.val().array().log(), wants(a), [ia](Tape& t, const Mat& g) {
    t.accumulate(ia, g.cwiseQuotient(t.value_at(ia)));
  });
}

Var tanh_(Var a) {
  Tape& t = tape_of(a);
  Mat out = a.val().array().tanh();
  const int ia = a.index();
  const int self_hint = static_cast<int>(t.size());
  return t.record(std::move(out), wants(a), [ia, self_hint](Tape& t, const Mat& g) {
    const Mat& y = t.value_at(self_hint);
    t.accumulate(ia, (g.array() * (1.0 - y.array().square())).matrix());
  });
}

Var gelu(Var a) {
  Tape& t = tape_of(a);
  const Mat& x = a.val();
  Mat out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double v = x(i);
    out(i) = 0.5 * v * (1.0 + std::erf(v * M_SQRT1_2));
  }
  const int ia = a.index();
  return t.record(std::move(out), wants(a), [ia](Tape& t, const Mat& g) {
    const Mat& x = t.value_at(ia);
    Mat dx(x.rows(), x.cols());
    constexpr double inv_sqrt_2pi = 0.3989422804014327;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double v = x(i);
      const double cdf = 0.5 * (1.0 + std::erf(v * M_SQRT1_2));
      dx(i) = cdf + v * inv_sqrt_2pi * std::exp(-0.5 * v * v);
    }
    t.accumulate(ia, g.cwiseProduct(dx));
  });
}

Var reciprocal(Var a) {
  Tape& t = tape_of(a);
  const int ia = a.index();
  return t.record(a.val().cwiseInverse(), wants(a), [ia](Tape& t, const Mat& g) {
    const Mat& x = t.value_at(ia);
    t.accumulate(ia, -g.cwiseQuotient(x.cwiseProduct(x)));
  });
}

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) raise(ErrorCode::LengthMismatch, "matmul: inner dims differ");
  Tape& t = tape_of(a);
  const int ia = a.index(), ib = b.index();
  return t.record(a.val() * b.val(), wants(a, b), [ia, ib](Tape& t, const Mat& g) {
    t.accumulate(ia, g * t.value_at(ib).transpose());
    t.accumulate(ib, t.value_at(ia).transpose() * g);
  });
}

Var matmul_nt(Var a, Var b) {
  if (a.cols() != b.cols()) raise(ErrorCode::LengthMismatch, "matmul_nt: inner dims differ");
  Tape& t = tape_of(a);
  const int ia = a.index(), ib = b.index();
  return t.record(a.val() * b.val().transpose(), wants(a, b), [ia, ib](Tape& t, const Mat& g) {
    t.accumulate(ia, g * t.value_at(ib));
    t.accumulate(ib, g.transpose() * t.value_at(ia));
  });
}

Var transpose(Var a) {
  Tape& t = tape_of(a);
  const int ia = a.index();
  return t.record(a.val().transpose(), wants(a), [ia](Tape& t, const Mat& g) {
    t.accumulate(ia, g.transpose());
  });
}

Var concat_cols(Var a, Var b) {
  if (a.rows() != b.rows()) raise(ErrorCode::LengthMismatch, "concat_cols: row mismatch");
  Tape& t = tape_of(a);
  Mat out(a.rows(), a.cols() + b.cols());
  out << a.val(), b.val();
  const int ia = a.index(), ib = b.index();
  const Eigen::Index ca = a.cols(), cb = b.cols();
  return t.record(std::move(out), wants(a, b), [ia, ib, ca, cb](Tape& t, const Mat& g) {
    t.accumulate(ia, g.leftCols(ca));
    t.accumulate(ib, g.rightCols(cb));
  });
}

Var concat_rows(Var a, Var b) {
  if (a.cols() != b.cols()) raise(ErrorCode::LengthMismatch, "concat_rows: col mismatch");
  Tape& t = tape_of(a);
  Mat out(a.rows() + b.rows(), a.cols());
  out << a.val(), b.val();
  const int ia = a.index(), ib = b.index();
  const Eigen::Index ra = a.rows(), rb = b.rows();
  return t.record(std::move(out), wants(a, b), [ia, ib, ra, rb](Tape& t, const Mat& g) {
    t.accumulate(ia, g.topRows(ra));
    t.accumulate(ib, g.bottomRows(rb));
  });
}

Var slice_cols(Var a, Eigen::Index c0, Eigen::Index w) {
  Tape& t = tape_of(a);
  const int ia = a.index();
  const Eigen::Index rows = a.rows(), cols = a.cols();
  return t.record(a.val().middleCols(c0, w), wants(a),
                  [ia, c0, w, rows, cols](Tape& t, const Mat& g) {
                    Mat full = Mat::Zero(rows, cols);
                    full.middleCols(c0, w) = g;
                    t.accumulate(ia, full);
                  });
}

Var slice_rows(Var a, Eigen::Index r0, Eigen::Index h) {
  Tape& t = tape_of(a);
  const int ia = a.index();
  const Eigen::Index rows = a.rows(), cols = a.cols();
  return t.record(a.val().middleRows(r0, h), wants(a),
                  [ia, r0, h, rows, cols](Tape& t, const Mat& g) {
                    Mat full = Mat::Zero(rows, cols);
                    full.middleRows(r0, h) = g;
                    t.accumulate(ia, full);
                  });
}

Var row_broadcast_add(Var a, Var row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    raise(ErrorCode::LengthMismatch, "row_broadcast_add: expected 1 x cols(a)");
  }
  Tape& t = tape_of(a);
  Mat out = a.val();
  out.rowwise() += row.val().row(0);
  const int ia = a.index(), ir = row.index();
  return t.record(std::move(out), wants(a, row), [ia, ir](Tape& t, const Mat& g) {
    t.accumulate(ia, g);
    t.accumulate(ir, g.colwise().sum());
  });
}

Var row_broadcast_mul(Var a, Var row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    raise(ErrorCode::LengthMismatch, "row_broadcast_mul: expected 1 x cols(a)");
  }
  Tape& t = tape_of(a);
  Mat out = a.val();
  out.array().rowwise() *= row.val().row(0).array();
  const int ia = a.index(), ir = row.index();
  return t.record(std::move(out), wants(a, row), [ia, ir](Tape& t, const Mat& g) {
    Mat ga = g;
    ga.array().rowwise() *= t.value_at(ir).row(0).array();
    t.accumulate(ia, ga);
    t.accumulate(ir, (g.cwiseProduct(t.value_at(ia))).colwise().sum());
  });
}

Var col_broadcast_mul(Var a, Var col) {
  if (col.cols() != 1 || col.rows() != a.rows()) {
    raise(ErrorCode::LengthMismatch, "col_broadcast_mul: expected rows(a) x 1");
  }
  Tape& t = tape_of(a);
  Mat out = a.val();
  out.array().colwise() *= col.val().col(0).array();
  const int ia = a.index(), ic = col.index();
  return t.record(std::move(out), wants(a, col), [ia, ic](Tape& t, const Mat& g) {
    Mat ga = g;
    ga.array().colwise() *= t.value_at(ic).col(0).array();
    t.accumulate(ia, ga);
    t.accumulate(ic, (g.cwiseProduct(t.value_at(ia))).rowwise().sum());
  });
}

Var tile_rows(Var row, Eigen::Index n) {
  if (row.rows() != 1) raise(ErrorCode::LengthMismatch, "tile_rows: expected a single row");
  Tape& t = tape_of(row);
  Mat out = row.val().replicate(n, 1);
  const int ir = row.index();
  return t.record(std::move(out), wants(row), [ir](Tape& t, const Mat& g) {
    t.accumulate(ir, g.colwise().sum());
  });
}

Var sum_all(Var a) {
  Tape& t = tape_of(a);
  Mat out(1, 1);
  out(0, 0) = a.val().sum();
  const int ia = a.index();
  const Eigen::Index rows = a.rows(), cols = a.cols();
  return t.record(std::move(out), wants(a), [ia, rows, cols](Tape& t, const Mat& g) {
    t.accumulate(ia, Mat::Constant(rows, cols, g(0, 0)));
  });
}

Var mean_all(Var a) { return scale(sum_all(a), 1.0 / static_cast<double>(a.rows() * a.cols())); }

Var sum_rows(Var a) {
  Tape& t = tape_of(a);
  Mat out = a.val().rowwise().sum();
  const int ia = a.index();
  const Eigen::Index cols = a.cols();
  return t.record(std::move(out), wants(a), [ia, cols](Tape& t, const Mat& g) {
    t.accumulate(ia, g.replicate(1, cols));
  });
}

Var sum_cols(Var a) {
  Tape& t = tape_of(a);
  Mat out = a.val().colwise().sum();
  const int ia = a.index();
  const Eigen::Index rows = a.rows();
  return t.record(std::move(out), wants(a), [ia, rows](Tape& t, const Mat& g) {
    t.accumulate(ia, g.replicate(rows, 1));
  });
}

Var max_cols(Var a) {
  Tape& t = tape_of(a);
  const Mat& x = a.val();
  Mat out(1, x.cols());
  std::vector<Eigen::Index> argmax(x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    Eigen::Index r;
    out(0, c) = x.col(c).maxCoeff(&r);
    argmax[c] = r;
  }
  const int ia = a.index();
  const Eigen::Index rows = x.rows(), cols = x.cols();
  return t.record(std::move(out), wants(a),
                  [ia, rows, cols, argmax = std::move(argmax)](Tape& t, const Mat& g) {
                    Mat full = Mat::Zero(rows, cols);
                    for (Eigen::Index c = 0; c < cols; ++c) full(argmax[c], c) = g(0, c);
                    t.accumulate(ia, full);
                  });
}

Var softmax_rows(Var a) {
  Tape& t = tape_of(a);
  Mat out = a.val();
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    Eigen::ArrayXd row = out.row(r).array();
    row -= row.maxCoeff();
    row = row.exp();
    out.row(r) = (row / row.sum()).matrix();
  }
  const int ia = a.index();
  const int self_hint = static_cast<int>(t.size());
  return t.record(std::move(out), wants(a), [ia, self_hint](Tape& t, const Mat& g) {
    const Mat& s = t.value_at(self_hint);
    Mat dx(s.rows(), s.cols());
    for (Eigen::Index r = 0; r < s.rows(); ++r) {
      const double dot = g.row(r).dot(s.row(r));
      dx.row(r) = (s.row(r).array() * (g.row(r).array() - dot)).matrix();
    }
    t.accumulate(ia, dx);
  });
}

Var layer_norm_rows(Var a, double eps) {
  Tape& t = tape_of(a);
  const Mat& x = a.val();
  const Eigen::Index d = x.cols();
  Mat out(x.rows(), d);
  Eigen::VectorXd inv_std(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mu = x.row(r).mean();
    const double var = (x.row(r).array() - mu).square().mean();
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_std(r) = inv;
    out.row(r) = ((x.row(r).array() - mu) * inv).matrix();
  }
  const int ia = a.index();
  const int self_hint = static_cast<int>(t.size());
  return t.record(std::move(out), wants(a),
                  [ia, self_hint, d, inv_std = std::move(inv_std)](Tape& t, const Mat& g) {
                    const Mat& y = t.value_at(self_hint);
                    Mat dx(y.rows(), d);
                    const double dd = static_cast<double>(d);
                    for (Eigen::Index r = 0; r < y.rows(); ++r) {
                      const double sum_g = g.row(r).sum();
                      const double sum_gy = g.row(r).dot(y.row(r));
                      dx.row(r) = ((inv_std(r) / dd) *
                                   (dd * g.row(r).array() - sum_g - y.row(r).array() * sum_gy))
                                      .matrix();
                    }
                    t.accumulate(ia, dx);
                  });
}

Var gather_rows(Var a, std::vector<Eigen::Index> idx) {
  Tape& t = tape_of(a);
  Mat out(static_cast<Eigen::Index>(idx.size()), a.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = a.val().row(idx[i]);
  const int ia = a.index();
  const Eigen::Index rows = a.rows(), cols = a.cols();
  return t.record(std::move(out), wants(a),
                  [ia, rows, cols, idx = std::move(idx)](Tape& t, const Mat& g) {
                    Mat full = Mat::Zero(rows, cols);
                    for (std::size_t i = 0; i < idx.size(); ++i) {
                      full.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
                    }
                    t.accumulate(ia, full);
                  });
}

Var rowwise_cross(Var a, Var b) {
  check_same_shape(a, b, "rowwise_cross");
  if (a.cols() != 3) raise(ErrorCode::LengthMismatch, "rowwise_cross: expected 3 columns");
  Tape& t = tape_of(a);
  const Mat& av = a.val();
  const Mat& bv = b.val();
  Mat out(av.rows(), 3);
  for (Eigen::Index r = 0; r < av.rows(); ++r) {
    out.row(r) = Eigen::Vector3d(av.row(r)).cross(Eigen::Vector3d(bv.row(r))).transpose();
  }
  const int ia = a.index(), ib = b.index();
  return t.record(std::move(out), wants(a, b), [ia, ib](Tape& t, const Mat& g) {
    const Mat& av = t.value_at(ia);
    const Mat& bv = t.value_at(ib);
    Mat da(av.rows(), 3), db(av.rows(), 3);
    for (Eigen::Index r = 0; r < av.rows(); ++r) {
      const Eigen::Vector3d gr = g.row(r);
      da.row(r) = Eigen::Vector3d(bv.row(r)).cross(gr).transpose();
      db.row(r) = gr.cross(Eigen::Vector3d(av.row(r))).transpose();
    }
    t.accumulate(ia, da);
    t.accumulate(ib, db);
  });
}

Var rot_compose(Var A, Var B) {
  if (A.cols() != 9 || B.cols() != 9 || A.rows() != B.rows()) {
    raise(ErrorCode::LengthMismatch, "rot_compose: expected matching n x 9 inputs");
  }
  Tape& t = tape_of(A);
  const Mat& av = A.val();
  const Mat& bv = B.val();
  Mat out(av.rows(), 9);
  out.setZero();
  for (Eigen::Index r = 0; r < av.rows(); ++r) {
    const Eigen::Matrix3d C = unpack3(av, r) * unpack3(bv, r);
    pack3_add(out, r, C);
  }
  const int ia = A.index(), ib = B.index();
  return t.record(std::move(out), wants(A, B), [ia, ib](Tape& t, const Mat& g) {
    const Mat& av = t.value_at(ia);
    const Mat& bv = t.value_at(ib);
    Mat da = Mat::Zero(av.rows(), 9), db = Mat::Zero(av.rows(), 9);
    for (Eigen::Index r = 0; r < av.rows(); ++r) {
      const Eigen::Matrix3d G = unpack3(g, r);
      pack3_add(da, r, G * unpack3(bv, r).transpose());
      pack3_add(db, r, unpack3(av, r).transpose() * G);
    }
    t.accumulate(ia, da);
    t.accumulate(ib, db);
  });
}

Var row_rotate(Var R, Var v) {
  if (R.cols() != 9 || v.cols() != 3) {
    raise(ErrorCode::LengthMismatch, "row_rotate: expected n x 9 and n x 3");
  }
  const Eigen::Index n = std::max(R.rows(), v.rows());
  if ((R.rows() != n && R.rows() != 1) || (v.rows() != n && v.rows() != 1)) {
    raise(ErrorCode::LengthMismatch, "row_rotate: incompatible row counts");
  }
  Tape& t = tape_of(R);
  const Mat& rv = R.val();
  const Mat& vv = v.val();
  Mat out(n, 3);
  for (Eigen::Index r = 0; r < n; ++r) {
    const Eigen::Matrix3d M = unpack3(rv, R.rows() == 1 ? 0 : r);
    const Eigen::Vector3d x = vv.row(v.rows() == 1 ? 0 : r);
    out.row(r) = (M * x).transpose();
  }
  const int ir = R.index(), iv = v.index();
  const Eigen::Index rrows = R.rows(), vrows = v.rows();
  return t.record(std::move(out), wants(R, v), [ir, iv, n, rrows, vrows](Tape& t, const Mat& g) {
    const Mat& rv = t.value_at(ir);
    const Mat& vv = t.value_at(iv);
    Mat dR = Mat::Zero(rrows, 9);
    Mat dv = Mat::Zero(vrows, 3);
    for (Eigen::Index r = 0; r < n; ++r) {
      const Eigen::Index ri = rrows == 1 ? 0 : r;
      const Eigen::Index vi = vrows == 1 ? 0 : r;
      const Eigen::Matrix3d M = unpack3(rv, ri);
      const Eigen::Vector3d x = vv.row(vi);
      const Eigen::Vector3d gr = g.row(r);
      pack3_add(dR, ri, gr * x.transpose());
      dv.row(vi) += (M.transpose() * gr).transpose();
    }
    t.accumulate(ir, dR);
    t.accumulate(iv, dv);
  });
}

Var gram_schmidt_rows(Var sixd) {
  if (sixd.cols() != 6) raise(ErrorCode::LengthMismatch, "gram_schmidt_rows: expected 6 columns");
  Var a = slice_cols(sixd, 0, 3);
  Var b = slice_cols(sixd, 3, 3);
  Var na2 = sum_rows(square(a));
  if (na2.val().minCoeff() < 1e-16) {
    raise(ErrorCode::DegenerateInput, "6D rotation first column has near-zero norm");
  }
  Var c1 = col_broadcast_mul(a, reciprocal(sqrt_(na2)));
  Var proj = sum_rows(mul(c1, b));
  Var resid = sub(b, col_broadcast_mul(c1, proj));
  Var nr2 = sum_rows(square(resid));
  if (nr2.val().minCoeff() < 1e-16) {
    raise(ErrorCode::DegenerateInput, "6D rotation columns are near collinear");
  }
  Var c2 = col_broadcast_mul(resid, reciprocal(sqrt_(nr2)));
  Var c3 = rowwise_cross(c1, c2);
  return concat_cols(concat_cols(c1, c2), c3);
}

Var stack_row(const std::vector<Var>& vars, Eigen::Index row) {
  if (vars.empty()) raise(ErrorCode::EmptyInput, "stack_row: no inputs");
  Tape& t = tape_of(vars[0]);
  const Eigen::Index cols = vars[0].cols();
  Mat out(static_cast<Eigen::Index>(vars.size()), cols);
  bool needs = false;
  std::vector<int> idx(vars.size());
  for (std::size_t i = 0; i < vars.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = vars[i].val().row(row);
    idx[i] = vars[i].index();
    needs = needs || wants(vars[i]);
  }
  const std::vector<Eigen::Index> shapes = {vars[0].rows(), cols};
  return t.record(std::move(out), needs,
                  [idx = std::move(idx), row, shapes](Tape& t, const Mat& g) {
                    for (std::size_t i = 0; i < idx.size(); ++i) {
                      Mat full = Mat::Zero(t.value_at(idx[i]).rows(), shapes[1]);
                      full.row(row) = g.row(static_cast<Eigen::Index>(i));
                      t.accumulate(idx[i], full);
                    }
                  });
}

}  // namespace lmp::ad
