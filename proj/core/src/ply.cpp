#include "beamsplit/ply.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "beamsplit/errors.hpp"

namespace beamsplit {

namespace {

std::uint8_t encode_display(double c) {
  const double v = std::pow(std::clamp(c, 0.0, 1.0), 1.0 / 2.2);
  return static_cast<std::uint8_t>(std::lround(v * 255.0));
}

double decode_display(std::uint8_t v) {
  return std::pow(v / 255.0, 2.2);
}

std::string format_g9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

// Reads header lines until end_header, returning the vertex count and
// property names in order.
struct PlyHeader {
  std::string format;
  std::size_t vertex_count = 0;
  std::vector<std::string> properties;
  std::vector<std::string> comments;
};

PlyHeader read_header(std::istream& in, const std::string& path) {
  PlyHeader h;
  std::string line;
  if (!std::getline(in, line) || line != "ply") {
    throw data_error("not a PLY file: " + path);
  }
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "end_header") return h;
    if (tok == "format") {
      ls >> h.format;
    } else if (tok == "comment") {
      h.comments.push_back(line.substr(8));
    } else if (tok == "element") {
      std::string name;
      ls >> name >> h.vertex_count;
      if (name != "vertex") {
        throw data_error("unsupported PLY element '" + name + "': " + path);
      }
    } else if (tok == "property") {
      std::string type, name;
      ls >> type >> name;
      h.properties.push_back(name);
    }
  }
  throw data_error("truncated PLY header: " + path);
}

}  // namespace

void write_points_ply(const std::string& path, const PointSet& points) {
  if (points.positions.size() != points.colors.size()) {
    throw invalid_parameter_error("write_points_ply: positions/colors size");
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw data_error("cannot open for write: " + path);
  f << "ply\nformat ascii 1.0\n";
  f << "element vertex " << points.size() << "\n";
  f << "property float x\nproperty float y\nproperty float z\n";
  f << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  f << "end_header\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points.positions[i];
    const auto& c = points.colors[i];
    f << format_g9(p.x()) << " " << format_g9(p.y()) << " " << format_g9(p.z())
      << " " << static_cast<int>(encode_display(c.x())) << " "
      << static_cast<int>(encode_display(c.y())) << " "
      << static_cast<int>(encode_display(c.z())) << "\n";
  }
}

PointSet read_points_ply(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw data_error("cannot open: " + path);
  const PlyHeader h = read_header(f, path);
  if (h.format != "ascii") {
    throw data_error("expected ASCII point PLY: " + path);
  }
  const std::vector<std::string> expect = {"x", "y", "z", "red", "green", "blue"};
  if (h.properties != expect) {
    throw data_error("unexpected point PLY properties: " + path);
  }
  PointSet out;
  out.positions.reserve(h.vertex_count);
  out.colors.reserve(h.vertex_count);
  for (std::size_t i = 0; i < h.vertex_count; ++i) {
    double x, y, z;
    int r, g, b;
    if (!(f >> x >> y >> z >> r >> g >> b)) {
      throw data_error("truncated point PLY: " + path);
    }
    out.positions.emplace_back(x, y, z);
    out.colors.emplace_back(decode_display(static_cast<std::uint8_t>(r)),
                            decode_display(static_cast<std::uint8_t>(g)),
                            decode_display(static_cast<std::uint8_t>(b)));
  }
  return out;
}

void write_cloud_ply(const std::string& path, const GaussianCloud& cloud) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw data_error("cannot open for write: " + path);
  const int n_sh = (cloud.sh_degree + 1) * (cloud.sh_degree + 1) * cloud.channels;
  f << "ply\nformat binary_little_endian 1.0\n";
  f << "comment channels " << cloud.channels << "\n";
  f << "comment sh_degree " << cloud.sh_degree << "\n";
  f << "element vertex " << cloud.size() << "\n";
  for (const char* p : {"x", "y", "z", "rot_w", "rot_x", "rot_y", "rot_z",
                        "scale_0", "scale_1", "scale_2", "opacity"}) {
    f << "property double " << p << "\n";
  }
  for (int k = 0; k < n_sh; ++k) f << "property double f_sh_" << k << "\n";
  f << "end_header\n";
  std::vector<double> row(11 + n_sh);
  for (const auto& g : cloud.gaussians) {
    row[0] = g.position.x();
    row[1] = g.position.y();
    row[2] = g.position.z();
    for (int k = 0; k < 4; ++k) row[3 + k] = g.rotation[k];
    for (int k = 0; k < 3; ++k) row[7 + k] = g.log_scale[k];
    row[10] = g.opacity_logit;
    std::copy(g.sh.coeffs.begin(), g.sh.coeffs.end(), row.begin() + 11);
    f.write(reinterpret_cast<const char*>(row.data()),
            static_cast<std::streamsize>(row.size() * sizeof(double)));
  }
  if (!f) throw data_error("write failed: " + path);
}

GaussianCloud read_cloud_ply(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw data_error("cannot open: " + path);
  const PlyHeader h = read_header(f, path);
  if (h.format != "binary_little_endian") {
    throw data_error("expected binary cloud PLY: " + path);
  }
  GaussianCloud cloud;
  for (const auto& c : h.comments) {
    std::istringstream cs(c);
    std::string key;
    cs >> key;
    if (key == "channels") cs >> cloud.channels;
    if (key == "sh_degree") cs >> cloud.sh_degree;
  }
  const int n_sh = (cloud.sh_degree + 1) * (cloud.sh_degree + 1) * cloud.channels;
  if (static_cast<int>(h.properties.size()) != 11 + n_sh) {
    throw data_error("cloud PLY property count mismatch: " + path);
  }
  cloud.gaussians.resize(h.vertex_count);
  std::vector<double> row(11 + n_sh);
  for (auto& g : cloud.gaussians) {
    f.read(reinterpret_cast<char*>(row.data()),
           static_cast<std::streamsize>(row.size() * sizeof(double)));
    if (!f) throw data_error("truncated cloud PLY: " + path);
    g.position = Eigen::Vector3d(row[0], row[1], row[2]);
    for (int k = 0; k < 4; ++k) g.rotation[k] = row[3 + k];
    for (int k = 0; k < 3; ++k) g.log_scale[k] = row[7 + k];
    g.opacity_logit = row[10];
    g.sh = SHCoeffs(cloud.sh_degree, cloud.channels);
    std::copy(row.begin() + 11, row.end(), g.sh.coeffs.begin());
  }
  return cloud;
}

}  // namespace beamsplit
