#include <doctest.h>

#include "helpers.hpp"
#include "lmp/rotation.hpp"

using namespace lmp;

TEST_CASE("rot6d_to_matrix canonical cases") {
  CHECK((rot6d_to_matrix({Vec3(1, 0, 0), Vec3(0, 1, 0)}) - Mat3::Identity()).norm() == 0.0);
  // Gram-Schmidt normalizes scale away
  CHECK((rot6d_to_matrix({Vec3(2, 0, 0), Vec3(0, 3, 0)}) - Mat3::Identity()).norm() < 1e-15);

  const Mat3 R = rot6d_to_matrix({Vec3(0, 1, 0), Vec3(1, 0, 0)});
  CHECK((R.col(0) - Vec3(0, 1, 0)).norm() < 1e-15);
  CHECK((R.col(1) - Vec3(1, 0, 0)).norm() < 1e-15);
  CHECK((R.col(2) - Vec3(0, 0, -1)).norm() < 1e-15);
}

TEST_CASE("rot6d_to_matrix rejects degenerate input") {
  CHECK_THROWS_AS(rot6d_to_matrix({Vec3::Zero(), Vec3(0, 1, 0)}), Error);
  CHECK_THROWS_AS(rot6d_to_matrix({Vec3(1, 0, 0), Vec3(2, 0, 0)}), Error);
}

TEST_CASE("matrix_to_rot6d basics") {
  const Rot6D id = matrix_to_rot6d(Mat3::Identity());
  CHECK((id.a - Vec3(1, 0, 0)).norm() == 0.0);
  CHECK((id.b - Vec3(0, 1, 0)).norm() == 0.0);

  Mat3 Rz90;
  Rz90 << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  const Rot6D r = matrix_to_rot6d(Rz90);
  CHECK((r.a - Vec3(0, 1, 0)).norm() < 1e-15);
  CHECK((r.b - Vec3(-1, 0, 0)).norm() < 1e-15);

  Mat3 bad = Mat3::Identity();
  bad(0, 0) = 1.5;
  CHECK_THROWS_AS(matrix_to_rot6d(bad), Error);
}

TEST_CASE("roundtrip and orthonormality over random rotations") {
  Rng rng(41);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Mat3 R = testing::random_rotation(rng);
    const Mat3 back = rot6d_to_matrix(matrix_to_rot6d(R));
    worst = std::max(worst, (back - R).cwiseAbs().maxCoeff());
    CHECK(is_rotation_matrix(back, 1e-6));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("rot6d_to_matrix orthonormalizes arbitrary non-degenerate input") {
  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    Rot6D r{Vec3(rng.normal(), rng.normal(), rng.normal()),
            Vec3(rng.normal(), rng.normal(), rng.normal())};
    if (r.a.norm() < 1e-3 || r.a.cross(r.b).norm() < 1e-3) continue;
    CHECK(is_rotation_matrix(rot6d_to_matrix(r), 1e-6));
  }
}

TEST_CASE("blend_rot6d") {
  const Rot6D r1{Vec3(1, 0, 0), Vec3(0, 1, 0)};
  Mat3 Rz90;
  Rz90 << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  const Rot6D r2 = matrix_to_rot6d(Rz90);

  SUBCASE("weight selects") {
    const Rot6D out = blend_rot6d({1.0, 0.0}, {r1, r2});
    CHECK((out.flat() - r1.flat()).norm() == 0.0);
  }
  SUBCASE("identical rotations are a fixed point") {
    const Rot6D out = blend_rot6d({0.3, 0.7}, {r2, r2});
    CHECK((out.flat() - r2.flat()).norm() < 1e-15);
  }
  SUBCASE("equal weights of identity and 90deg-z give 45deg-z") {
    const Rot6D out = blend_rot6d({0.5, 0.5}, {r1, r2});
    CHECK((out.a - Vec3(0.5, 0.5, 0)).norm() < 1e-15);
    CHECK((out.b - Vec3(-0.5, 0.5, 0)).norm() < 1e-15);
    const Mat3 R = rot6d_to_matrix(out);
    const double c = std::cos(M_PI / 4);
    CHECK(std::abs(R(0, 0) - c) < 1e-12);
    CHECK(std::abs(R(1, 0) - c) < 1e-12);
  }
  SUBCASE("scaling weights uniformly changes nothing") {
    Rng rng(3);
    for (int i = 0; i < 50; ++i) {
      const Rot6D a = matrix_to_rot6d(testing::random_rotation(rng));
      const Rot6D b = matrix_to_rot6d(testing::random_rotation(rng));
      const double w1 = rng.uniform(0.1, 2.0), w2 = rng.uniform(0.1, 2.0);
      const double s = rng.uniform(0.5, 10.0);
      const Rot6D u = blend_rot6d({w1, w2}, {a, b});
      const Rot6D v = blend_rot6d({s * w1, s * w2}, {a, b});
      CHECK((u.flat() - v.flat()).norm() < 1e-12);
    }
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(blend_rot6d({}, {}), Error);
    CHECK_THROWS_AS(blend_rot6d({0.0, 0.0}, {r1, r2}), Error);
  }
}

TEST_CASE("apply_rigid") {
  const Rot6D root{Vec3(0, 0, 1), Vec3(1, 0, 0)};
  const Vec3 g(0.3, -0.2, 0.5);

  SUBCASE("identity is a no-op") {
    auto [r, gamma] = apply_rigid(RigidTransform::identity(), root, g);
    CHECK((r.flat() - root.flat()).norm() < 1e-15);
    CHECK((gamma - g).norm() < 1e-15);
  }
  SUBCASE("pure translation") {
    RigidTransform rho;
    rho.translation = Vec3(1, 2, 3);
    auto [r, gamma] = apply_rigid(rho, root, g);
    CHECK((r.flat() - root.flat()).norm() < 1e-15);
    CHECK((gamma - (g + rho.translation)).norm() < 1e-15);
  }
  SUBCASE("90deg about z rotates gamma") {
    Mat3 Rz90;
    Rz90 << 0, -1, 0, 1, 0, 0, 0, 0, 1;
    RigidTransform rho;
    rho.rotation = matrix_to_rot6d(Rz90);
    auto [r, gamma] = apply_rigid(rho, matrix_to_rot6d(Mat3::Identity()), Vec3(1, 0, 0));
    CHECK((gamma - Vec3(0, 1, 0)).norm() < 1e-12);
    CHECK((rot6d_to_matrix(r) - Rz90).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("composition matches composed transform on gamma") {
    Rng rng(11);
    for (int i = 0; i < 50; ++i) {
      RigidTransform a{matrix_to_rot6d(testing::random_rotation(rng)),
                       Vec3(rng.normal(), rng.normal(), rng.normal())};
      RigidTransform b{matrix_to_rot6d(testing::random_rotation(rng)),
                       Vec3(rng.normal(), rng.normal(), rng.normal())};
      const Vec3 gamma(rng.normal(), rng.normal(), rng.normal());
      const Rot6D theta = matrix_to_rot6d(testing::random_rotation(rng));
      auto [t1, g1] = apply_rigid(a, theta, gamma);
      auto [t2, g2] = apply_rigid(b, t1, g1);
      auto [t3, g3] = apply_rigid(compose_rigid(b, a), theta, gamma);
      CHECK((g2 - g3).norm() < 1e-9);
      CHECK((rot6d_to_matrix(t2) - rot6d_to_matrix(t3)).cwiseAbs().maxCoeff() < 1e-9);
    }
  }
}
