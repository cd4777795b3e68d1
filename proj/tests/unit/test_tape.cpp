#include <doctest.h>

#include "helpers.hpp"
#include "lmp/tape.hpp"

using namespace lmp;
using namespace lmp::ad;
using lmp::testing::grad_check;

namespace {

Mat randm(Rng& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = scale * rng.normal();
  return m;
}

}  // namespace

TEST_CASE("elementwise op gradients") {
  Rng rng(5);
  const Mat a = randm(rng, 3, 4);
  const Mat b = randm(rng, 3, 4);
  const Mat pos = randm(rng, 3, 4).array().abs() + 0.5;

  auto bin = [&](auto op) {
    return grad_check([op](Tape&, const std::vector<Var>& v) { return sum_all(op(v[0], v[1])); },
                      {a, b});
  };
  CHECK(bin([](Var x, Var y) { return add(x, y); }) < 5e-6);
  CHECK(bin([](Var x, Var y) { return sub(x, y); }) < 5e-6);
  CHECK(bin([](Var x, Var y) { return mul(x, y); }) < 5e-6);
  CHECK(grad_check([](Tape&, const std::vector<Var>& v) { return sum_all(div(v[0], v[1])); },
                   {a, pos}) < 1e-5);

  auto un = [&](auto op, Mat input) {
    return grad_check(
        [op](Tape&, const std::vector<Var>& v) { return sum_all(op(v[0])); }, {input});
  };
  CHECK(un([](Var x) { return scale(x, -2.5); }, a) < 5e-6);
  CHECK(un([](Var x) { return add_scalar(x, 3.0); }, a) < 5e-6);
  CHECK(un([](Var x) { return square(x); }, a) < 5e-6);
  CHECK(un([](Var x) { return sqrt_(x); }, pos) < 1e-5);
  CHECK(un([](Var x) { return exp_(x); }, a) < 5e-6);
  CHECK(un([](Var x) { return log_(x); }, pos) < 1e-5);
  CHECK(un([](Var x) { return tanh_(x); }, a) < 5e-6);
  CHECK(un([](Var x) { return gelu(x); }, a) < 5e-6);
  CHECK(un([](Var x) { return reciprocal(x); }, pos) < 1e-5);
}

TEST_CASE("matmul and shape op gradients") {
  Rng rng(6);
  const Mat a = randm(rng, 3, 5);
  const Mat b = randm(rng, 5, 2);
  const Mat c = randm(rng, 4, 5);

  CHECK(grad_check([](Tape&, const std::vector<Var>& v) { return sum_all(matmul(v[0], v[1])); },
                   {a, b}) < 5e-6);
  CHECK(grad_check(
            [](Tape&, const std::vector<Var>& v) { return sum_all(matmul_nt(v[0], v[1])); },
            {a, c}) < 5e-6);
  CHECK(grad_check(
            [](Tape&, const std::vector<Var>& v) { return sum_all(square(transpose(v[0]))); },
            {a}) < 5e-6);
  CHECK(grad_check(
            [](Tape&, const std::vector<Var>& v) {
              return sum_all(square(concat_cols(v[0], v[1])));
            },
            {a, randm(rng, 3, 2)}) < 5e-6);
  CHECK(grad_check(
            [](Tape&, const std::vector<Var>& v) {
              return sum_all(square(concat_rows(v[0], v[1])));
            },
            {a, randm(rng, 2, 5)}) < 5e-6);
  CHECK(grad_check(
            [](Tape&, const std::vector<Var>& v) { return sum_all(square(slice_cols(v[0], 1, 3))); },
            {a}) < 5e-6);
  CHECK(grad_check(
            [](Tape&, const std::vector<Var>& v) { return sum_all(square(slice_rows(v[0], 1, 2))); },
            {a}) < 5e-6);
}

TEST_CASE("broadcast op gradients") {
  Rng rng(7);
  const Mat a = randm(rng, 4, 3);
  const Mat row = randm(rng, 1, 3);
  const Mat col = randm(rng, 4, 1);

  CHECK(grad_check(
            [](Tape&, const std::vector<Var>& v) {
              return sum_all(square(row_broadcast_add(v[0], v[1])));
            },
            {a, row}) < 5e-6);
  CHECK(grad_check(
            [](Tape&, const std::vector<Var>& v) {
              return sum_all(square(row_broadcast_mul(v[0], v[1])));
            },
            {a, row}) < 5e-6);
  CHECK(grad_check(
            [](Tape&, const std::vector<Var>& v) {
              return sum_all(square(col_broadcast_mul(v[0], v[1])));
            },
            {a, col}) < 5e-6);
  CHECK(grad_check(
            [](Tape&, const std::vector<Var>& v) { return sum_all(square(tile_rows(v[0], 5))); },
            {row}) < 5e-6);
}

TEST_CASE("reduction op gradients") {
  Rng rng(8);
  const Mat a = randm(rng, 4, 3);
  CHECK(grad_check([](Tape&, const std::vector<Var>& v) { return square(sum_all(v[0])); }, {a}) <
        1e-6);
  CHECK(grad_check([](Tape&, const std::vector<Var>& v) { return square(mean_all(v[0])); }, {a}) <
        1e-6);
  CHECK(grad_check(
            [](Tape&, const std::vector<Var>& v) { return sum_all(square(sum_rows(v[0]))); },
            {a}) < 5e-6);
  CHECK(grad_check(
            [](Tape&, const std::vector<Var>& v) { return sum_all(square(sum_cols(v[0]))); },
            {a}) < 5e-6);
  CHECK(grad_check(
            [](Tape&, const std::vector<Var>& v) { return sum_all(square(max_cols(v[0]))); },
            {a}) < 5e-6);
}

TEST_CASE("structured op gradients") {
  Rng rng(9);
  const Mat a = randm(rng, 4, 6);
  // project onto a random direction; plain sums of squares are invariants of
  // these ops and would leave nothing to differentiate
  const Mat w = randm(rng, 4, 6);
  CHECK(grad_check(
            [&](Tape& t, const std::vector<Var>& v) {
              return sum_all(mul(softmax_rows(v[0]), t.constant(w)));
            },
            {a}) < 1e-5);
  CHECK(grad_check(
            [&](Tape& t, const std::vector<Var>& v) {
              return sum_all(mul(layer_norm_rows(v[0]), t.constant(w)));
            },
            {a}) < 1e-5);
  CHECK(grad_check(
            [](Tape&, const std::vector<Var>& v) {
              return sum_all(square(gather_rows(v[0], {2, 0, 2, 3})));
            },
            {a}) < 1e-5);
}

TEST_CASE("rotation op gradients") {
  Rng rng(10);
  const Mat u = randm(rng, 5, 3);
  const Mat v3 = randm(rng, 5, 3);
  CHECK(grad_check(
            [](Tape&, const std::vector<Var>& v) {
              return sum_all(square(rowwise_cross(v[0], v[1])));
            },
            {u, v3}) < 5e-6);

  // well-conditioned 6D inputs for gram-schmidt; random projection again,
  // since the squared norm of a rotation matrix is constant
  Mat sixd(4, 6);
  for (int r = 0; r < 4; ++r) {
    const Mat3 R = testing::random_rotation(rng);
    sixd.row(r) << R(0, 0), R(1, 0), R(2, 0), R(0, 1), R(1, 1), R(2, 1);
    sixd.row(r) += 0.05 * randm(rng, 1, 6);
  }
  const Mat w9 = randm(rng, 4, 9);
  CHECK(grad_check(
            [&](Tape& t, const std::vector<Var>& v) {
              return sum_all(mul(gram_schmidt_rows(v[0]), t.constant(w9)));
            },
            {sixd}, 1e-5) < 1e-4);

  // rotation composition / application, all broadcast combinations
  Mat R1(3, 9), R2(3, 9);
  for (int r = 0; r < 3; ++r) {
    Mat3 A = testing::random_rotation(rng);
    Mat3 B = testing::random_rotation(rng);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        R1(r, 3 * j + i) = A(i, j);
        R2(r, 3 * j + i) = B(i, j);
      }
  }
  CHECK(grad_check(
            [](Tape&, const std::vector<Var>& v) {
              return sum_all(square(rot_compose(v[0], v[1])));
            },
            {R1, R2}) < 5e-6);
  const Mat pts = randm(rng, 3, 3);
  CHECK(grad_check(
            [](Tape&, const std::vector<Var>& v) { return sum_all(square(row_rotate(v[0], v[1]))); },
            {R1, pts}) < 5e-6);
  CHECK(grad_check(
            [](Tape&, const std::vector<Var>& v) { return sum_all(square(row_rotate(v[0], v[1]))); },
            {R1.row(0), pts}) < 5e-6);
  CHECK(grad_check(
            [](Tape&, const std::vector<Var>& v) { return sum_all(square(row_rotate(v[0], v[1]))); },
            {R1, pts.row(0)}) < 5e-6);

  std::vector<Mat> stack_inputs = {randm(rng, 4, 3), randm(rng, 4, 3), randm(rng, 4, 3)};
  CHECK(grad_check(
            [](Tape&, const std::vector<Var>& v) {
              return sum_all(square(stack_row({v[0], v[1], v[2]}, 2)));
            },
            stack_inputs) < 5e-6);
}

TEST_CASE("gradients flow through reused nodes") {
  // x used twice: d/dx sum(x*x + 3x) must accumulate both paths
  Rng rng(12);
  const Mat x = randm(rng, 2, 2);
  CHECK(grad_check(
            [](Tape&, const std::vector<Var>& v) {
              return sum_all(add(mul(v[0], v[0]), scale(v[0], 3.0)));
            },
            {x}) < 5e-6);
}

TEST_CASE("constants do not accumulate gradients") {
  Tape tape;
  Var c = tape.constant(Mat::Ones(2, 2));
  Var x = tape.leaf(Mat::Ones(2, 2) * 2.0);
  Var loss = sum_all(mul(c, x));
  tape.backward(loss);
  CHECK(x.grad()(0, 0) == 1.0);
  CHECK(c.grad().size() == 0);
}
