#include "placing/dataset_io.hpp"

#include <charconv>
#include <cmath>
#include <string_view>

#include "placing/error.hpp"
#include "placing/io_util.hpp"

namespace placing {
namespace {

constexpr int kTokensPerLine = 1 + 2 * kTaxelCount + 6 + 9 + 9 + 3 + 1;

[[noreturn]] void fail(size_t line_no, const std::string& what) {
  throw IoError("dataset line " + std::to_string(line_no) + ": " + what);
}

class TokenReader {
 public:
  TokenReader(std::string_view line, size_t line_no)
      : line_(line), line_no_(line_no) {}

  std::string_view next() {
    while (pos_ < line_.size() && line_[pos_] == ' ') ++pos_;
    if (pos_ >= line_.size()) fail(line_no_, "too few fields");
    const size_t start = pos_;
    while (pos_ < line_.size() && line_[pos_] != ' ') ++pos_;
    ++count_;
    return line_.substr(start, pos_ - start);
  }

  double next_double() {
    const std::string_view tok = next();
    double v = 0.0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
      fail(line_no_, "bad number '" + std::string(tok) + "'");
    return v;
  }

  uint64_t next_u64() {
    const std::string_view tok = next();
    uint64_t v = 0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
      fail(line_no_, "bad integer '" + std::string(tok) + "'");
    return v;
  }

  void finish() const {
    size_t p = pos_;
    while (p < line_.size() && line_[p] == ' ') ++p;
    if (p != line_.size() || count_ != kTokensPerLine)
      fail(line_no_, "expected " + std::to_string(kTokensPerLine) + " fields");
  }

 private:
  std::string_view line_;
  size_t line_no_;
  size_t pos_ = 0;
  int count_ = 0;
};

Eigen::Matrix3d read_matrix(TokenReader& r) {
  Eigen::Matrix3d m;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m(i, j) = r.next_double();
  return m;
}

void append_matrix(std::string& s, const Eigen::Matrix3d& m) {
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      s.push_back(' ');
      append_double(s, m(i, j));
    }
}

Sample parse_line(std::string_view line, size_t line_no) {
  TokenReader r(line, line_no);
  Sample s;
  s.object_id = std::string(r.next());

  for (double& v : s.tactile.left) v = r.next_double();
  for (double& v : s.tactile.right) v = r.next_double();
  if (!s.tactile.in_unit_range()) fail(line_no, "tactile cell outside [0, 1]");

  for (int i = 0; i < 3; ++i) s.wrench.force[i] = r.next_double();
  for (int i = 0; i < 3; ++i) s.wrench.torque[i] = r.next_double();
  if (!s.wrench.force.allFinite() || !s.wrench.torque.allFinite())
    fail(line_no, "non-finite wrench");

  const Eigen::Matrix3d rwg = read_matrix(r);
  const Eigen::Matrix3d rgp = read_matrix(r);
  Eigen::Vector3d z_gt;
  for (int i = 0; i < 3; ++i) z_gt[i] = r.next_double();
  s.seed = r.next_u64();
  r.finish();

  try {
    s.r_world_gripper = Rotation(rwg);
    s.r_gripper_placing_gt = Rotation(rgp);
  } catch (const DegenerateInputError& e) {
    fail(line_no, std::string("invalid rotation: ") + e.what());
  }
  if (!z_gt.allFinite() || std::abs(z_gt.norm() - 1.0) > kOrthoTol)
    fail(line_no, "z_gt is not a unit vector");
  s.z_gt_world = UnitVector3::from(z_gt);

  const Eigen::Vector3d predicted =
      compose(s.r_world_gripper, s.r_gripper_placing_gt) * Eigen::Vector3d::UnitZ();
  if ((z_gt - predicted).norm() > 1e-9)
    fail(line_no, "z_gt does not match the pose labels");
  return s;
}

}  // namespace

std::string serialize_dataset(const std::vector<Sample>& samples) {
  std::string out;
  out.reserve(samples.size() * 8192);
  for (const Sample& s : samples) {
    if (s.object_id.empty() ||
        s.object_id.find_first_of(" \t\n\r") != std::string::npos)
      throw UsageError("object id must be a non-empty token without whitespace");
    out += s.object_id;
    for (const double v : s.tactile.left) {
      out.push_back(' ');
      append_double(out, v);
    }
    for (const double v : s.tactile.right) {
      out.push_back(' ');
      append_double(out, v);
    }
    for (int i = 0; i < 3; ++i) {
      out.push_back(' ');
      append_double(out, s.wrench.force[i]);
    }
    for (int i = 0; i < 3; ++i) {
      out.push_back(' ');
      append_double(out, s.wrench.torque[i]);
    }
    append_matrix(out, s.r_world_gripper.matrix());
    append_matrix(out, s.r_gripper_placing_gt.matrix());
    for (int i = 0; i < 3; ++i) {
      out.push_back(' ');
      append_double(out, s.z_gt_world.vec()[i]);
    }
    out.push_back(' ');
    append_u64(out, s.seed);
    out.push_back('\n');
  }
  return out;
}

void write_dataset(const std::string& path, const std::vector<Sample>& samples) {
  atomic_write_file(path, serialize_dataset(samples));
}

std::vector<Sample> parse_dataset(const std::string& text) {
  std::vector<Sample> samples;
  size_t line_no = 0;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    ++line_no;
    const std::string_view line(text.data() + pos, end - pos);
    if (!line.empty()) samples.push_back(parse_line(line, line_no));
    pos = end + 1;
  }
  return samples;
}

std::vector<Sample> read_dataset(const std::string& path) {
  return parse_dataset(read_file(path));
}

}  // namespace placing
