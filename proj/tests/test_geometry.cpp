#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <random>

#include "sim2real/geometry.hpp"

using namespace sim2real;

namespace {

// Oracle: the full 4x4 conversion as an Eigen product of a reflection and a
// vertical translation, applied to the pose's position and heading vector.
Pose oracle_lh_to_rh(const Pose& p, double h_roof) {
  Eigen::Matrix4d reflect = Eigen::Matrix4d::Identity();
  reflect(1, 1) = -1.0;
  Eigen::Matrix4d shift = Eigen::Matrix4d::Identity();
  shift(2, 3) = -h_roof;
  const Eigen::Matrix4d m = shift * reflect;
  const Eigen::Vector4d pos = m * Eigen::Vector4d(p.x, p.y, p.z, 1.0);
  const Eigen::Vector4d dir = m * Eigen::Vector4d(std::cos(p.yaw), std::sin(p.yaw), 0.0, 0.0);
  return {pos.x(), pos.y(), pos.z(), std::atan2(dir.y(), dir.x())};
}

Eigen::Matrix4d eig(const Transform4& t) {
  Eigen::Matrix4d m;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m(r, c) = t(r, c);
  return m;
}

Pose random_pose(std::mt19937_64& g) {
  std::uniform_real_distribution<double> u(-100.0, 100.0), a(-kPi, kPi);
  return make_pose(u(g), u(g), u(g) / 10.0, a(g));
}

}  // namespace

TEST(ConvertPose, WorkedExample) {
  const Pose in{10.0, 3.0, 0.5, 0.5236};
  const Pose out = convert_pose(in, kLhFruWheel, kRhFluRoof, RoofOffset{1.5});
  EXPECT_DOUBLE_EQ(out.x, 10.0);
  EXPECT_DOUBLE_EQ(out.y, -3.0);
  EXPECT_DOUBLE_EQ(out.z, -1.0);
  EXPECT_DOUBLE_EQ(out.yaw, -0.5236);
  const Pose o = oracle_lh_to_rh(in, 1.5);
  EXPECT_NEAR(out.x, o.x, 1e-12);
  EXPECT_NEAR(out.y, o.y, 1e-12);
  EXPECT_NEAR(out.z, o.z, 1e-12);
  EXPECT_NEAR(out.yaw, o.yaw, 1e-12);
}

TEST(ConvertPose, MatchesMatrixOracleOnRandomPoses) {
  std::mt19937_64 g(3);
  for (int i = 0; i < 2000; ++i) {
    const Pose p = random_pose(g);
    const Pose a = convert_pose(p, kLhFruWheel, kRhFluRoof);
    const Pose o = oracle_lh_to_rh(p, 1.5);
    ASSERT_NEAR(a.x, o.x, 1e-9);
    ASSERT_NEAR(a.y, o.y, 1e-9);
    ASSERT_NEAR(a.z, o.z, 1e-9);
    ASSERT_NEAR(normalize_angle(a.yaw - o.yaw), 0.0, 1e-9);
  }
}

TEST(ConvertPose, SameConventionIsIdentity) {
  std::mt19937_64 g(4);
  for (int i = 0; i < 100; ++i) {
    const Pose p = random_pose(g);
    EXPECT_EQ(convert_pose(p, kRhFluRoof, kRhFluRoof), p);
    EXPECT_EQ(convert_pose(p, kLhFruWheel, kLhFruWheel), p);
  }
}

TEST(ConvertPose, InvolutionAndPreservesX) {
  std::mt19937_64 g(5);
  for (int i = 0; i < 10000; ++i) {
    const Pose p = random_pose(g);
    const Pose q = convert_pose(p, kLhFruWheel, kRhFluRoof);
    const Pose back = convert_pose(q, kRhFluRoof, kLhFruWheel);
    ASSERT_EQ(q.x, p.x);
    ASSERT_NEAR(back.x, p.x, 1e-12);
    ASSERT_NEAR(back.y, p.y, 1e-12);
    ASSERT_NEAR(back.z, p.z, 1e-12);
    ASSERT_NEAR(normalize_angle(back.yaw - p.yaw), 0.0, 1e-12);
  }
}

TEST(ConvertPose, FlipPreservesDistances) {
  std::mt19937_64 g(6);
  for (int i = 0; i < 1000; ++i) {
    const Pose a = random_pose(g), b = random_pose(g);
    const Pose ca = convert_pose(a, kLhFruWheel, kRhFluRoof), cb = convert_pose(b, kLhFruWheel, kRhFluRoof);
    const double d0 = std::hypot(a.x - b.x, a.y - b.y, a.z - b.z);
    const double d1 = std::hypot(ca.x - cb.x, ca.y - cb.y, ca.z - cb.z);
    ASSERT_NEAR(d0, d1, 1e-10);
  }
}

TEST(ConvertPose, Errors) {
  Pose bad{std::nan(""), 0, 0, 0};
  EXPECT_THROW(convert_pose(bad, kLhFruWheel, kRhFluRoof), Error);
  try {
    convert_pose(bad, kLhFruWheel, kRhFluRoof);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidPose);
  }
  const FrameConvention odd{Handedness::kRight, LateralAxis::kLeftPositive, OriginRef::kWheelContactPlane};
  EXPECT_THROW(convert_pose(Pose{}, odd, kRhFluRoof), Error);
  EXPECT_THROW(parse_convention("ENU"), Error);
  EXPECT_EQ(parse_convention("RH_FLU_ROOF"), kRhFluRoof);
  EXPECT_EQ(to_string(kLhFruWheel), "LH_FRU_WHEEL");
}

TEST(NormalizeAngle, HalfOpenRange) {
  EXPECT_DOUBLE_EQ(normalize_angle(kPi), kPi);
  EXPECT_DOUBLE_EQ(normalize_angle(-kPi), kPi);
  EXPECT_NEAR(normalize_angle(3 * kPi + 0.1), -kPi + 0.1, 1e-12);
  std::mt19937_64 g(7);
  std::uniform_real_distribution<double> u(-50, 50);
  for (int i = 0; i < 1000; ++i) {
    const double a = normalize_angle(u(g));
    ASSERT_GT(a, -kPi);
    ASSERT_LE(a, kPi);
  }
}

TEST(Compose, Examples) {
  const Transform4 t = compose(Transform4::rotation_z(0.3), Transform4::translation(1, 2, 3));
  EXPECT_EQ(compose(Transform4::identity(), t), t);
  EXPECT_LT(compose(t, invert(t)).max_abs_diff(Transform4::identity()), 1e-12);
  const Transform4 c = compose(Transform4::translation(1, 0, 0), Transform4::translation(0, 2, 0));
  EXPECT_EQ(c, Transform4::translation(1, 2, 0));
  EXPECT_TRUE(c.valid());
}

TEST(Compose, MatchesEigenProduct) {
  std::mt19937_64 g(8);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int i = 0; i < 200; ++i) {
    Transform4 a = Transform4::identity(), b = Transform4::identity();
    for (int k = 0; k < 12; ++k) {
      a.m[static_cast<std::size_t>(k)] = u(g);
      b.m[static_cast<std::size_t>(k)] = u(g);
    }
    const Eigen::Matrix4d want = eig(a) * eig(b);
    const Transform4 got = compose(a, b);
    ASSERT_LT((eig(got) - want).cwiseAbs().maxCoeff(), 1e-12);
    ASSERT_TRUE(got.valid());
  }
}

TEST(Invert, Examples) {
  EXPECT_EQ(invert(Transform4::identity()), Transform4::identity());
  EXPECT_LT(invert(Transform4::translation(1, 2, 3)).max_abs_diff(Transform4::translation(-1, -2, -3)), 1e-15);
  EXPECT_LT(invert(Transform4::rotation_z(kPi / 2)).max_abs_diff(Transform4::rotation_z(-kPi / 2)), 1e-15);
  Transform4 singular = Transform4::identity();
  singular(0, 0) = 0.0;
  try {
    invert(singular);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonInvertible);
  }
}

TEST(Invert, RandomRigid) {
  std::mt19937_64 g(9);
  std::uniform_real_distribution<double> u(-10, 10);
  for (int i = 0; i < 500; ++i) {
    const Transform4 t = compose(Transform4::translation(u(g), u(g), u(g)), Transform4::rotation_z(u(g)));
    ASSERT_LT(compose(t, invert(t)).max_abs_diff(Transform4::identity()), 1e-12);
  }
}

TEST(ImageToEgo, Examples) {
  CameraCalibration c;
  EXPECT_EQ(image_to_ego_matrix(c), Transform4::identity());

  c.fx = c.fy = 2.0;
  c.cx = 3.0;
  c.cy = 4.0;
  Transform4 want = Transform4::identity();
  want(0, 0) = 0.5;
  want(0, 2) = -1.5;
  want(1, 1) = 0.5;
  want(1, 2) = -2.0;
  EXPECT_LT(image_to_ego_matrix(c).max_abs_diff(want), 1e-15);

  CameraCalibration t;
  t.cam_to_ego = Transform4::translation(0.7, -0.2, 1.9);
  const Transform4 m = image_to_ego_matrix(t);
  EXPECT_DOUBLE_EQ(m(0, 3), 0.7);
  EXPECT_DOUBLE_EQ(m(1, 3), -0.2);
  EXPECT_DOUBLE_EQ(m(2, 3), 1.9);
}

TEST(ImageToEgo, RightComposeWithKRecoversExtrinsic) {
  std::mt19937_64 g(10);
  std::uniform_real_distribution<double> f(300, 2000), p(0, 1600), u(-3, 3);
  for (int i = 0; i < 1000; ++i) {
    CameraCalibration c;
    c.fx = f(g);
    c.fy = f(g);
    c.cx = p(g);
    c.cy = p(g) * 0.5;
    c.cam_to_ego = compose(compose(Transform4::translation(u(g), u(g), u(g)), Transform4::rotation_z(u(g))),
                           optical_to_flu());
    const Transform4 back = compose(image_to_ego_matrix(c), intrinsic_hom(c));
    ASSERT_LT(back.max_abs_diff(c.cam_to_ego), 1e-10);
    // Oracle: Eigen inverse of K.
    Eigen::Matrix4d k = eig(intrinsic_hom(c));
    ASSERT_LT((eig(image_to_ego_matrix(c)) - eig(c.cam_to_ego) * k.inverse()).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(ImageToEgo, DegenerateIntrinsics) {
  CameraCalibration c;
  c.fx = 0.0;
  try {
    image_to_ego_matrix(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateIntrinsics);
  }
}

TEST(ConversionMatrix, AgreesWithConvertPose) {
  std::mt19937_64 g(11);
  for (int i = 0; i < 200; ++i) {
    const Pose p = random_pose(g);
    const auto q = conversion_matrix(kLhFruWheel, kRhFluRoof).apply({p.x, p.y, p.z});
    const Pose c = convert_pose(p, kLhFruWheel, kRhFluRoof);
    ASSERT_NEAR(q[0], c.x, 1e-12);
    ASSERT_NEAR(q[1], c.y, 1e-12);
    ASSERT_NEAR(q[2], c.z, 1e-12);
  }
}
