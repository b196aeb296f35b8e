#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <string>
#include <vector>

#include "placing/dataset_io.hpp"
#include "placing/error.hpp"
#include "placing/io_util.hpp"
#include "placing/tactile.hpp"

using namespace placing;

namespace {

std::vector<Sample> tiny_dataset(uint64_t seed) {
  const std::vector<ObjectPrimitive> objs = {
      ObjectPrimitive::cylinder("train-cylinder", 0.0225, 0.15, 0.3, 0.5, 0.6),
      ObjectPrimitive::cuboid("train-cuboid", 0.05, 0.05, 0.19, 0.35)};
  return generate_dataset(objs, 3, 2, 2.5, 0.02, seed);
}

std::filesystem::path temp_path(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

// Flips one digit of the first number after `skip` spaces on line 1.
std::string corrupt_token(std::string text, int skip) {
  size_t pos = 0;
  for (int i = 0; i < skip; ++i) pos = text.find(' ', pos) + 1;
  while (!std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
  text[pos] = text[pos] == '9' ? '8' : '9';
  return text;
}

}  // namespace

TEST_CASE("dataset survives a file round trip bit-for-bit") {
  const auto samples = tiny_dataset(3);
  const auto path = temp_path("placing_io_roundtrip.txt");
  write_dataset(path.string(), samples);
  const auto back = read_dataset(path.string());
  std::filesystem::remove(path);

  REQUIRE(back.size() == samples.size());
  for (size_t i = 0; i < samples.size(); ++i) {
    CHECK(back[i].object_id == samples[i].object_id);
    CHECK(back[i].tactile.left == samples[i].tactile.left);
    CHECK(back[i].tactile.right == samples[i].tactile.right);
    CHECK(back[i].wrench.force == samples[i].wrench.force);
    CHECK(back[i].wrench.torque == samples[i].wrench.torque);
    CHECK(back[i].r_world_gripper.matrix() == samples[i].r_world_gripper.matrix());
    CHECK(back[i].r_gripper_placing_gt.matrix() ==
          samples[i].r_gripper_placing_gt.matrix());
    CHECK((back[i].z_gt_world.vec() - samples[i].z_gt_world.vec()).norm() < 1e-15);
    CHECK(back[i].seed == samples[i].seed);
  }
  // Serialization itself is deterministic.
  CHECK(serialize_dataset(samples) == serialize_dataset(tiny_dataset(3)));
}

TEST_CASE("parser rejects malformed records with the line number") {
  const auto samples = tiny_dataset(4);
  const std::string text = serialize_dataset(samples);

  SUBCASE("truncated line") {
    const std::string cut = text.substr(0, text.find('\n') - 40) + "\n";
    CHECK_THROWS_WITH_AS(parse_dataset(cut), doctest::Contains("line 1"), IoError);
  }
  SUBCASE("non-numeric token") {
    std::string bad = text;
    bad.replace(bad.find(' ') + 1, 1, "q");
    CHECK_THROWS_AS(parse_dataset(bad), IoError);
  }
  SUBCASE("tactile cell outside the unit range") {
    auto broken = samples;
    broken[0].tactile.left[10] = 1.75;
    CHECK_THROWS_WITH_AS(parse_dataset(serialize_dataset(broken)),
                         doctest::Contains("tactile"), IoError);
  }
  SUBCASE("rotation drifts off the manifold") {
    // 256 + 256 + 6 + 1 leading tokens put token 520 inside r_world_gripper.
    const std::string bad = corrupt_token(text, 520);
    CHECK_THROWS_AS(parse_dataset(bad), IoError);
  }
  SUBCASE("label inconsistent with the pose") {
    auto broken = samples;
    broken[0].z_gt_world = UnitVector3::from(Eigen::Vector3d(1.0, 0.0, 0.0));
    CHECK_THROWS_WITH_AS(parse_dataset(serialize_dataset(broken)),
                         doctest::Contains("line 1"), IoError);
  }
  SUBCASE("second line is reported as line 2") {
    std::string two = text;
    const size_t first_end = two.find('\n');
    std::string second = two.substr(first_end + 1);
    const size_t second_end = second.find('\n');
    second = second.substr(0, second_end - 30) + "\n";
    two = two.substr(0, first_end + 1) + second;
    CHECK_THROWS_WITH_AS(parse_dataset(two), doctest::Contains("line 2"), IoError);
  }
}

TEST_CASE("missing file raises an io error") {
  CHECK_THROWS_AS(read_dataset("/nonexistent/nowhere.txt"), IoError);
}

TEST_CASE("atomic writes leave no temp file behind") {
  const auto path = temp_path("placing_io_atomic.txt");
  atomic_write_file(path.string(), "hello\n");
  CHECK(read_file(path.string()) == "hello\n");
  CHECK_FALSE(std::filesystem::exists(path.string() + ".tmp"));
  atomic_write_file(path.string(), "replaced\n");
  CHECK(read_file(path.string()) == "replaced\n");
  std::filesystem::remove(path);
}
