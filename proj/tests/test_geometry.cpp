#include <gtest/gtest.h>

#include <numbers>

#include "pwe/geometry.hpp"
#include "pwe/random.hpp"

using namespace pwe;

namespace {

Vec3 random_unit(Rng& rng) {
  const double z = rng.uniform(-1.0, 1.0);
  const double az = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double r = std::sqrt(1.0 - z * z);
  return {r * std::cos(az), r * std::sin(az), z};
}

Room test_room() {
  return Room({{0, 0, 0}, {8, 6, 3}}, {{{3, 2, 0}, {4, 3, 2}}, {{5, 4, 1}, {6, 5, 2.5}}});
}

}  // namespace

TEST(AngleBetween, OrthogonalIdentityAntipodal) {
  EXPECT_NEAR(angle_between({1, 0, 0}, {0, 1, 0}), std::numbers::pi / 2, 1e-15);
  EXPECT_EQ(angle_between({0, 0, 1}, {0, 0, 1}), 0.0);
  EXPECT_NEAR(angle_between({0, 0, 1}, {0, 0, -1}), std::numbers::pi, 1e-15);
}

TEST(AngleBetween, RejectsNonUnit) {
  try {
    angle_between({2, 0, 0}, {0, 1, 0});
    FAIL() << "expected InvalidVector";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidVector);
  }
}

TEST(AngleBetween, SymmetricAndRotationInvariant) {
  Rng rng(11);
  for (int i = 0; i < 2000; ++i) {
    const Vec3 u = random_unit(rng);
    const Vec3 v = random_unit(rng);
    const Vec3 axis = random_unit(rng);
    const double ang = rng.uniform(-std::numbers::pi, std::numbers::pi);
    const double base = angle_between(u, v);
    EXPECT_DOUBLE_EQ(base, angle_between(v, u));
    const Vec3 ru = normalized(rotate(u, axis, ang));
    const Vec3 rv = normalized(rotate(v, axis, ang));
    EXPECT_NEAR(angle_between(ru, rv), base, 1e-9);
  }
}

TEST(SegmentOccluded, ThroughObstacleCentre) {
  const Room room({{0, 0, 0}, {10, 10, 3}}, {{{4, 4, 0}, {6, 6, 2}}});
  EXPECT_TRUE(segment_occluded({1, 5, 1}, {9, 5, 1}, room));
}

TEST(SegmentOccluded, EmptyRoomNeverBlocks) {
  const Room room({{0, 0, 0}, {10, 10, 3}});
  EXPECT_FALSE(segment_occluded({1, 1, 1}, {9, 9, 2}, room));
}

TEST(SegmentOccluded, GrazingFaceDoesNotBlock) {
  const Room room({{0, 0, 0}, {10, 10, 3}}, {{{4, 4, 0}, {6, 6, 2}}});
  // Runs along the top face z = 2.
  EXPECT_FALSE(segment_occluded({1, 5, 2}, {9, 5, 2}, room));
  // Runs along the side face x = 4.
  EXPECT_FALSE(segment_occluded({4, 1, 1}, {4, 9, 1}, room));
  // Ends on the face without entering.
  EXPECT_FALSE(segment_occluded({1, 5, 1}, {4, 5, 1}, room));
}

TEST(SegmentOccluded, OutOfRoomEndpoint) {
  const Room room({{0, 0, 0}, {10, 10, 3}});
  try {
    segment_occluded({1, 1, 1}, {11, 1, 1}, room);
    FAIL() << "expected OutOfRoom";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::OutOfRoom);
  }
}

TEST(SegmentOccluded, SymmetricInEndpoints) {
  const Room room = test_room();
  Rng rng(5);
  int blocked = 0;
  for (int i = 0; i < 5000; ++i) {
    const Vec3 a{rng.uniform(0, 8), rng.uniform(0, 6), rng.uniform(0, 3)};
    const Vec3 b{rng.uniform(0, 8), rng.uniform(0, 6), rng.uniform(0, 3)};
    const bool ab = segment_occluded(a, b, room);
    EXPECT_EQ(ab, segment_occluded(b, a, room));
    blocked += ab ? 1 : 0;
  }
  EXPECT_GT(blocked, 100);  // the generator actually exercises both outcomes
  EXPECT_LT(blocked, 4900);
}

TEST(Room, RejectsBadBoxes) {
  EXPECT_THROW(Room({{0, 0, 0}, {0, 1, 1}}), Error);
  EXPECT_THROW(Room({{0, 0, 0}, {5, 5, 3}}, {{{4, 4, 0}, {6, 5, 1}}}), Error);
  EXPECT_THROW(Room({{0, 0, 0}, {5, 5, 3}}, {{{2, 2, 2}, {1, 3, 3}}}), Error);
}

TEST(Pose, TriadValidationAndTransforms) {
  EXPECT_THROW(Pose({0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, -1}), Error);  // left-handed
  EXPECT_THROW(Pose({0, 0, 0}, {1, 0, 0}, {0.1, 1, 0}, {0, 0, 1}), Error);
  const Pose p = Pose::looking({1, 2, 3}, {0, 0, 1}, {0, 1, 0});
  const Vec3 w = p.to_world_dir({1, 0, 0});
  EXPECT_NEAR(w.y, 1.0, 1e-12);
  const Vec3 back = p.to_body_dir(w);
  EXPECT_NEAR(back.x, 1.0, 1e-12);
  EXPECT_EQ(p.to_world_point({0, 0, 0}), (Vec3{1, 2, 3}));
}
