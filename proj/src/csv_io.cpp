#include "relnav/csv_io.hpp"

#include <Eigen/Geometry>
#include <fmt/format.h>

#include <fstream>
#include <sstream>

#include "relnav/error.hpp"
#include "relnav/metrics.hpp"

namespace relnav {

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::Io, "cannot open " + path + " for writing");
  return f;
}

void close_out(std::ofstream& f, const std::string& path) {
  f.flush();
  if (!f) throw Error(ErrorKind::Io, "write failed on " + path);
}

// Rows of numbers after a header line that must match `header`.
std::vector<std::vector<double>> read_rows(const std::string& path, const std::string& header, std::size_t ncols) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::Io, "cannot open " + path);
  std::string line;
  if (!std::getline(f, line)) throw Error(ErrorKind::Io, path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header) throw Error(ErrorKind::Io, path + ": expected header '" + header + "', got '" + line + "'");
  std::vector<std::vector<double>> rows;
  int lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw Error(ErrorKind::Io, fmt::format("{}:{}: bad number '{}'", path, lineno, cell));
      }
    }
    if (row.size() != ncols) {
      throw Error(ErrorKind::Io, fmt::format("{}:{}: expected {} columns, got {}", path, lineno, ncols, row.size()));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string num(double x) { return fmt::format("{:.17g}", x); }

std::string state_cols(const RelativeState& s) {
  Eigen::Quaterniond q(s.R);
  q.normalize();
  if (q.w() < 0.0) q.coeffs() *= -1.0;
  return fmt::format("{},{},{},{},{},{},{},{},{},{},{}", num(s.stamp), num(q.w()), num(q.x()), num(q.y()), num(q.z()),
                     num(s.t.x()), num(s.t.y()), num(s.t.z()), num(s.v.x()), num(s.v.y()), num(s.v.z()));
}

const char* kImuHeader = "t,ax,ay,az,gx,gy,gz";
const char* kFramesHeader = "t,feature_id,u,v";
const char* kTruthHeader = "t,qw,qx,qy,qz,tx,ty,tz,vx,vy,vz";
const char* kLandmarkHeader = "feature_id,x,y,z";

}  // namespace

void write_text_file(const std::string& path, const std::string& text) {
  auto f = open_out(path);
  f << text;
  close_out(f, path);
}

void write_imu_csv(const std::string& path, std::span<const ImuSample> samples) {
  auto f = open_out(path);
  f << kImuHeader << '\n';
  for (const ImuSample& s : samples) {
    f << fmt::format("{},{},{},{},{},{},{}\n", num(s.t), num(s.acc.x()), num(s.acc.y()), num(s.acc.z()),
                     num(s.gyro.x()), num(s.gyro.y()), num(s.gyro.z()));
  }
  close_out(f, path);
}

std::vector<ImuSample> read_imu_csv(const std::string& path) {
  std::vector<ImuSample> out;
  for (const auto& r : read_rows(path, kImuHeader, 7)) out.push_back({r[0], Vec3(r[1], r[2], r[3]), Vec3(r[4], r[5], r[6])});
  return out;
}

void write_frames_csv(const std::string& path, const std::vector<Frame>& frames) {
  auto f = open_out(path);
  f << kFramesHeader << '\n';
  for (const Frame& fr : frames) {
    if (fr.observations.empty()) f << num(fr.t) << ",-1,0,0\n";
    for (const FeatureObservation& o : fr.observations) {
      f << fmt::format("{},{},{},{}\n", num(fr.t), o.feature_id, num(o.pixel.x()), num(o.pixel.y()));
    }
  }
  close_out(f, path);
}

std::vector<Frame> read_frames_csv(const std::string& path, double pixel_sigma) {
  std::vector<Frame> out;
  for (const auto& r : read_rows(path, kFramesHeader, 4)) {
    if (out.empty() || r[0] != out.back().t) {
      if (!out.empty() && r[0] < out.back().t) {
        throw Error(ErrorKind::Io, path + ": frame times must be non-decreasing");
      }
      out.push_back(Frame{r[0], {}, false});
    }
    const int id = static_cast<int>(r[1]);
    if (id >= 0) out.back().observations.push_back({id, Vec2(r[2], r[3]), pixel_sigma});
  }
  return out;
}

void write_truth_csv(const std::string& path, std::span<const RelativeState> states) {
  auto f = open_out(path);
  f << kTruthHeader << '\n';
  for (const RelativeState& s : states) f << state_cols(s) << '\n';
  close_out(f, path);
}

std::vector<RelativeState> read_truth_csv(const std::string& path) {
  std::vector<RelativeState> out;
  for (const auto& r : read_rows(path, kTruthHeader, 11)) {
    RelativeState s;
    s.stamp = r[0];
    s.R = Eigen::Quaterniond(r[1], r[2], r[3], r[4]).normalized().toRotationMatrix();
    s.t = Vec3(r[5], r[6], r[7]);
    s.v = Vec3(r[8], r[9], r[10]);
    out.push_back(s);
  }
  return out;
}

void write_landmarks_csv(const std::string& path, const std::map<int, Vec3>& landmarks) {
  auto f = open_out(path);
  f << kLandmarkHeader << '\n';
  for (const auto& [id, p] : landmarks) f << fmt::format("{},{},{},{}\n", id, num(p.x()), num(p.y()), num(p.z()));
  close_out(f, path);
}

std::map<int, Vec3> read_landmarks_csv(const std::string& path) {
  std::map<int, Vec3> out;
  for (const auto& r : read_rows(path, kLandmarkHeader, 4)) out[static_cast<int>(r[0])] = Vec3(r[1], r[2], r[3]);
  return out;
}

void write_estimates_csv(const std::string& path, const std::vector<TrackRecord>& records) {
  auto f = open_out(path);
  f << kTruthHeader << ",bgFx,bgFy,bgFz,baFx,baFy,baFz,bgLx,bgLy,bgLz,baLx,baLy,baLz,sig3_tx,sig3_ty,sig3_tz\n";
  for (const TrackRecord& r : records) {
    const RelativeState& s = r.state;
    const Envelope env = r.cov.rows() >= 9 ? three_sigma(r.cov) : Envelope{};
    f << state_cols(s);
    for (const Vec3* b : {&s.bg_F, &s.ba_F, &s.bg_L, &s.ba_L}) f << fmt::format(",{},{},{}", num(b->x()), num(b->y()), num(b->z()));
    f << fmt::format(",{},{},{}\n", num(env.trans.x()), num(env.trans.y()), num(env.trans.z()));
  }
  close_out(f, path);
}

}  // namespace relnav
