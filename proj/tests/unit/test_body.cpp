#include <doctest.h>

#include <cstdio>

#include "helpers.hpp"
#include "lmp/body_model.hpp"

using namespace lmp;

namespace {

Pose random_pose(Rng& rng, int joints, double spread = 1.0) {
  Pose pose(joints);
  for (int j = 0; j < joints; ++j) {
    const Mat3 R = Eigen::AngleAxisd(spread * rng.uniform(-0.5, 0.5),
                                     Vec3(rng.normal(), rng.normal(), rng.normal()).normalized())
                       .toRotationMatrix();
    pose.theta[j] = matrix_to_rot6d(R);
  }
  return pose;
}

}  // namespace

TEST_CASE("shaped_offsets") {
  const Skeleton skel = default_skeleton();
  SUBCASE("zero shape returns rest offsets") {
    const auto offsets = shaped_offsets(skel, BodyShape{});
    for (int j = 0; j < skel.joints(); ++j) {
      CHECK((offsets[j] - skel.rest_offset[j]).norm() == 0.0);
    }
  }
  SUBCASE("first component scales all bones by 1.05") {
    BodyShape beta;
    beta.beta[0] = 1.0;
    const auto offsets = shaped_offsets(skel, beta);
    for (int j = 1; j < skel.joints(); ++j) {
      // column 0 of the default sensitivity table is 0.05 everywhere
      CHECK((offsets[j] - 1.05 * skel.rest_offset[j]).norm() < 1e-12);
    }
  }
  SUBCASE("zero-sensitivity component leaves offsets unchanged") {
    Skeleton s = skel;
    s.shape_sensitivity.col(5).setZero();
    BodyShape beta;
    beta.beta[5] = 2.0;
    const auto offsets = shaped_offsets(s, beta);
    for (int j = 0; j < s.joints(); ++j) CHECK((offsets[j] - s.rest_offset[j]).norm() == 0.0);
  }
}

TEST_CASE("forward_kinematics basics") {
  const Skeleton skel = default_skeleton();
  Pose identity(skel.joints());

  SUBCASE("identity pose puts joints at cumulative rest offsets") {
    const auto pos = forward_kinematics(identity, Vec3::Zero(), BodyShape{}, skel);
    for (int j = 0; j < skel.joints(); ++j) {
      Vec3 expect = Vec3::Zero();
      int k = j;
      while (k >= 0) {
        expect += skel.rest_offset[k];
        k = skel.parent[k];
      }
      CHECK((pos[j] - expect).norm() < 1e-12);
    }
  }
  SUBCASE("gamma translates everything") {
    const Vec3 g(0, 0, 1);
    const auto p0 = forward_kinematics(identity, Vec3::Zero(), BodyShape{}, skel);
    const auto p1 = forward_kinematics(identity, g, BodyShape{}, skel);
    for (int j = 0; j < skel.joints(); ++j) CHECK((p1[j] - (p0[j] + g)).norm() < 1e-12);
  }
  SUBCASE("two-joint chain with rotated root") {
    Skeleton chain;
    chain.parent = {-1, 0};
    chain.rest_offset = {Vec3::Zero(), Vec3(1, 0, 0)};
    chain.shape_sensitivity = Eigen::MatrixXd::Zero(2, 8);
    chain.names = {"root", "tip"};
    Mat3 Rz90;
    Rz90 << 0, -1, 0, 1, 0, 0, 0, 0, 1;
    Pose pose(2);
    pose.theta[0] = matrix_to_rot6d(Rz90);
    const Vec3 g(0.5, 0.5, 0.5);
    const auto pos = forward_kinematics(pose, g, BodyShape{}, chain);
    CHECK((pos[1] - (g + Vec3(0, 1, 0))).norm() < 1e-12);
  }
}

TEST_CASE("FK is rigid-equivariant and preserves bone lengths") {
  const Skeleton skel = default_skeleton();
  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    Pose pose = random_pose(rng, skel.joints());
    BodyShape beta;
    for (int k = 0; k < 8; ++k) beta.beta[k] = rng.uniform(-1.5, 1.5);
    const Vec3 gamma(rng.normal(), rng.normal(), rng.normal());

    RigidTransform rho{matrix_to_rot6d(testing::random_rotation(rng)),
                       Vec3(rng.normal(), rng.normal(), rng.normal())};
    auto [root2, gamma2] = apply_rigid(rho, pose.theta[0], gamma);
    Pose pose2 = pose;
    pose2.theta[0] = root2;

    const auto p1 = forward_kinematics(pose, gamma, beta, skel);
    const auto p2 = forward_kinematics(pose2, gamma2, beta, skel);
    const Mat3 R = rot6d_to_matrix(rho.rotation);
    for (int j = 0; j < skel.joints(); ++j) {
      CHECK((p2[j] - (R * p1[j] + rho.translation)).norm() < 1e-9);
    }

    const auto offsets = shaped_offsets(skel, beta);
    for (int j = 1; j < skel.joints(); ++j) {
      const double bone = (p1[j] - p1[skel.parent[j]]).norm();
      CHECK(std::abs(bone - offsets[j].norm()) < 1e-9);
    }
  }
}

TEST_CASE("surface_points determinism, count, translation") {
  const Skeleton skel = default_skeleton();
  Rng rng(22);
  const Pose pose = random_pose(rng, skel.joints());
  BodyShape beta;
  beta.beta[1] = 0.7;
  const Vec3 gamma(0.1, 0.9, -0.4);

  const auto pts1 = surface_points(pose, gamma, beta, skel, 1);
  CHECK(pts1.size() == 19);
  const auto again = surface_points(pose, gamma, beta, skel, 1);
  for (std::size_t i = 0; i < pts1.size(); ++i) CHECK((pts1[i] - again[i]).norm() == 0.0);

  const Vec3 t(0.3, -0.1, 2.0);
  const auto shifted = surface_points(pose, gamma + t, beta, skel, 3);
  const auto base = surface_points(pose, gamma, beta, skel, 3);
  CHECK(shifted.size() == 19 * 3);
  for (std::size_t i = 0; i < base.size(); ++i) {
    CHECK((shifted[i] - (base[i] + t)).norm() < 1e-12);
  }
}

TEST_CASE("mpjpe") {
  std::vector<std::vector<Vec3>> a(2, std::vector<Vec3>(20, Vec3::Zero()));
  auto b = a;
  CHECK(mpjpe(a, b) == 0.0);

  for (auto& frame : b)
    for (auto& p : frame) p += Vec3(0.003, 0, 0);
  CHECK(std::abs(mpjpe(a, b) - 3.0) < 1e-12);

  b = a;
  b[0][4] += Vec3(0.003, 0, 0);  // one joint of 20, one frame of 2 -> 3/40
  CHECK(std::abs(mpjpe(a, b) - 0.075) < 1e-12);
  b[1][7] += Vec3(0, 0.003, 0);  // now one joint per frame -> 3/20
  CHECK(std::abs(mpjpe(a, b) - 0.15) < 1e-12);

  CHECK(std::abs(mpjpe(a, b) - mpjpe(b, a)) < 1e-15);
  std::vector<std::vector<Vec3>> c(1, std::vector<Vec3>(20, Vec3::Zero()));
  CHECK_THROWS_AS(mpjpe(a, c), Error);
}

TEST_CASE("tape FK matches plain FK and surface points") {
  const Skeleton skel = default_skeleton();
  Rng rng(23);
  const int n = 4;
  Eigen::MatrixXd theta(n, skel.joints() * 6), gamma(n, 3);
  std::vector<Pose> poses;
  for (int i = 0; i < n; ++i) {
    poses.push_back(random_pose(rng, skel.joints()));
    theta.row(i) = poses.back().flat().transpose();
    gamma.row(i) = Vec3(rng.normal(), rng.normal(), rng.normal()).transpose();
  }
  BodyShape beta;
  for (int k = 0; k < 8; ++k) beta.beta[k] = rng.uniform(-1.0, 1.0);

  ad::Tape tape;
  nn::Graph g(tape);
  ad::Var theta_v = tape.constant(theta);
  ad::Var gamma_v = tape.constant(gamma);
  ad::Var beta_v = tape.constant(beta.beta.transpose());
  const FkVars fk = forward_kinematics_t(g, skel, theta_v, gamma_v, beta_v);
  const auto pts_t = surface_points_t(g, skel, fk, beta_v, 2);

  for (int i = 0; i < n; ++i) {
    const auto pos = forward_kinematics(poses[i], gamma.row(i).transpose(), beta, skel);
    for (int j = 0; j < skel.joints(); ++j) {
      CHECK((fk.joint_pos[j].val().row(i).transpose() - pos[j]).norm() < 1e-9);
    }
    const auto pts = surface_points(poses[i], gamma.row(i).transpose(), beta, skel, 2);
    for (std::size_t p = 0; p < pts.size(); ++p) {
      CHECK((pts_t[p].val().row(i).transpose() - pts[p]).norm() < 1e-9);
    }
  }
}

TEST_CASE("surface point gradients match finite differences") {
  const Skeleton skel = default_skeleton();
  Rng rng(24);
  const int n = 2;
  Eigen::MatrixXd theta(n, skel.joints() * 6), gamma(n, 3);
  for (int i = 0; i < n; ++i) {
    theta.row(i) = random_pose(rng, skel.joints(), 0.6).flat().transpose();
    gamma.row(i) = Vec3(rng.normal(), rng.normal(), rng.normal()).transpose();
  }
  Eigen::MatrixXd beta(1, 8);
  for (int k = 0; k < 8; ++k) beta(0, k) = rng.uniform(-1.0, 1.0);

  // random projection of all sample points; checks d/dtheta, d/dgamma, d/dbeta
  std::vector<Eigen::MatrixXd> weights;
  for (int p = 0; p < 19 * 2; ++p) weights.push_back(Eigen::MatrixXd::Random(n, 3));

  const double err = lmp::testing::grad_check(
      [&](ad::Tape& t, const std::vector<ad::Var>& v) {
        nn::Graph g(t);
        const FkVars fk = forward_kinematics_t(g, skel, v[0], v[1], v[2]);
        const auto pts = surface_points_t(g, skel, fk, v[2], 2);
        ad::Var acc;
        for (std::size_t p = 0; p < pts.size(); ++p) {
          ad::Var term = ad::sum_all(ad::mul(pts[p], t.constant(weights[p])));
          acc = p == 0 ? term : ad::add(acc, term);
        }
        return acc;
      },
      {theta, gamma, beta}, 1e-4);
  CHECK(err < 1e-3);
}

TEST_CASE("skeleton json roundtrip") {
  const Skeleton skel = default_skeleton();
  const std::string path = "test_skeleton.json";
  save_skeleton(skel, path);
  const Skeleton back = load_skeleton(path);
  CHECK(back.joints() == skel.joints());
  CHECK(back.parent == skel.parent);
  CHECK((back.shape_sensitivity - skel.shape_sensitivity).cwiseAbs().maxCoeff() == 0.0);
  for (int j = 0; j < skel.joints(); ++j) {
    CHECK((back.rest_offset[j] - skel.rest_offset[j]).norm() == 0.0);
    CHECK(back.names[j] == skel.names[j]);
  }
  std::remove(path.c_str());
}
