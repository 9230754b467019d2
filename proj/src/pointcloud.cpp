#include "ergodic/pointcloud.hpp"

#include "ergodic/errors.hpp"
#include "ergodic/kdtree.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <tuple>

namespace ergodic {

PointCloud::PointCloud(std::vector<Vec3> positions, std::optional<std::vector<Rgb>> colors,
                       std::optional<std::vector<double>> target)
    : positions_(std::move(positions)), colors_(std::move(colors)), target_(std::move(target)) {
  if (positions_.empty()) throw DomainError("point cloud is empty");
  for (const Vec3& p : positions_) {
    if (!p.allFinite()) throw DomainError("point cloud has non-finite coordinates");
  }
  if (colors_ && colors_->size() != positions_.size()) {
    throw DomainError("color count does not match point count");
  }
  if (target_) {
    if (target_->size() != positions_.size()) {
      throw DomainError("target count does not match point count");
    }
    double sum = 0.0;
    for (double p : *target_) {
      if (!(p >= 0.0) || !std::isfinite(p)) throw DomainError("target masses must be finite and >= 0");
      sum += p;
    }
    if (!(sum > 0.0)) throw DomainError("target masses sum to zero");
  }
}

PointCloud PointCloud::with_target(std::vector<double> target) const {
  return PointCloud(positions_, colors_, std::move(target));
}

namespace {

std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size() && std::isfinite(out);
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? line.npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t b = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > b) out.push_back(line.substr(b, i - b));
  }
  return out;
}

std::uint8_t to_channel(double v, std::size_t line) {
  if (v < 0.0 || v > 255.0 || v != std::floor(v)) {
    throw ParseError("color channel outside 0..255", line);
  }
  return static_cast<std::uint8_t>(v);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DomainError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

PointCloud parse_csv_cloud(std::string_view text) {
  std::vector<Vec3> pos;
  std::vector<Rgb> rgb;
  std::vector<double> mass;
  std::size_t columns = 0;
  std::size_t line_no = 0;
  bool first_content = true;

  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = trim(text.substr(start, end - start));
    start = end + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') {
      if (end == text.size()) break;
      continue;
    }
    const auto fields = split(line, ',');
    std::vector<double> values(fields.size());
    bool numeric = true;
    for (std::size_t i = 0; i < fields.size(); ++i) numeric = numeric && parse_double(fields[i], values[i]);
    if (!numeric) {
      if (first_content) {  // header
        first_content = false;
        if (end == text.size()) break;
        continue;
      }
      throw ParseError("malformed row '" + std::string(line) + "'", line_no);
    }
    first_content = false;
    const std::size_t n = values.size();
    if (n != 3 && n != 4 && n != 6 && n != 7) {
      throw ParseError("expected 3, 4, 6 or 7 columns, got " + std::to_string(n), line_no);
    }
    if (columns == 0) columns = n;
    if (n != columns) throw ParseError("inconsistent column count", line_no);
    pos.emplace_back(values[0], values[1], values[2]);
    if (n >= 6) rgb.push_back({to_channel(values[3], line_no), to_channel(values[4], line_no),
                               to_channel(values[5], line_no)});
    if (n == 4 || n == 7) {
      if (values[n - 1] < 0.0) throw ParseError("negative target mass", line_no);
      mass.push_back(values[n - 1]);
    }
    if (end == text.size()) break;
  }
  if (pos.empty()) throw DomainError("CSV cloud has no points");
  std::optional<std::vector<Rgb>> colors;
  if (!rgb.empty()) colors = std::move(rgb);
  std::optional<std::vector<double>> target;
  if (!mass.empty()) target = std::move(mass);
  return PointCloud(std::move(pos), std::move(colors), std::move(target));
}

PointCloud parse_ply_cloud(std::string_view text) {
  std::size_t line_no = 0;
  std::size_t start = 0;
  auto next_line = [&]() -> std::optional<std::string_view> {
    if (start >= text.size()) return std::nullopt;
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto line = trim(text.substr(start, end - start));
    start = end + 1;
    ++line_no;
    return line;
  };

  auto magic = next_line();
  if (!magic || *magic != "ply") throw ParseError("missing 'ply' magic", line_no);

  std::size_t vertex_count = 0;
  bool in_vertex = false;
  bool seen_vertex = false;
  std::vector<std::string> props;
  while (true) {
    auto line = next_line();
    if (!line) throw ParseError("unterminated PLY header", line_no);
    const auto tok = split_ws(*line);
    if (tok.empty()) continue;
    if (tok[0] == "format") {
      if (tok.size() < 2 || tok[1] != "ascii") throw ParseError("only ASCII PLY is supported", line_no);
    } else if (tok[0] == "element") {
      if (tok.size() != 3) throw ParseError("malformed element line", line_no);
      in_vertex = tok[1] == "vertex";
      if (in_vertex) {
        if (seen_vertex) throw ParseError("duplicate vertex element", line_no);
        seen_vertex = true;
        double count = 0;
        if (!parse_double(tok[2], count) || count < 0) throw ParseError("bad vertex count", line_no);
        vertex_count = static_cast<std::size_t>(count);
      } else if (!seen_vertex) {
        throw ParseError("vertex element must come first", line_no);
      }
    } else if (tok[0] == "property") {
      if (in_vertex) {
        if (tok.size() < 3 || tok[1] == "list") throw ParseError("unsupported vertex property", line_no);
        props.emplace_back(tok.back());
      }
    } else if (tok[0] == "end_header") {
      break;
    }
  }
  auto index_of = [&](std::string_view name) -> int {
    for (std::size_t i = 0; i < props.size(); ++i) {
      if (props[i] == name) return static_cast<int>(i);
    }
    return -1;
  };
  const int ix = index_of("x"), iy = index_of("y"), iz = index_of("z");
  if (ix < 0 || iy < 0 || iz < 0) throw ParseError("PLY vertex lacks x/y/z", line_no);
  const int ir = index_of("red"), ig = index_of("green"), ib = index_of("blue");
  const bool has_rgb = ir >= 0 && ig >= 0 && ib >= 0;
  const int ip = index_of("p");

  std::vector<Vec3> pos;
  std::vector<Rgb> rgb;
  std::vector<double> mass;
  pos.reserve(vertex_count);
  while (pos.size() < vertex_count) {
    auto line = next_line();
    if (!line) throw ParseError("file ends before all vertices were read", line_no);
    if (line->empty()) continue;
    const auto tok = split_ws(*line);
    if (tok.size() < props.size()) throw ParseError("vertex row has too few values", line_no);
    std::vector<double> v(props.size());
    for (std::size_t i = 0; i < props.size(); ++i) {
      if (!parse_double(tok[i], v[i])) throw ParseError("malformed vertex value", line_no);
    }
    pos.emplace_back(v[ix], v[iy], v[iz]);
    if (has_rgb) rgb.push_back({to_channel(v[ir], line_no), to_channel(v[ig], line_no),
                                to_channel(v[ib], line_no)});
    if (ip >= 0) {
      if (v[ip] < 0.0) throw ParseError("negative target mass", line_no);
      mass.push_back(v[ip]);
    }
  }
  if (pos.empty()) throw DomainError("PLY cloud has no vertices");
  std::optional<std::vector<Rgb>> colors;
  if (has_rgb) colors = std::move(rgb);
  std::optional<std::vector<double>> target;
  if (ip >= 0) target = std::move(mass);
  return PointCloud(std::move(pos), std::move(colors), std::move(target));
}

PointCloud load_cloud(const std::filesystem::path& path, std::optional<CloudFormat> format) {
  if (!format) {
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".ply") {
      format = CloudFormat::kPlyAscii;
    } else if (ext == ".csv") {
      format = CloudFormat::kCsv;
    } else {
      throw DomainError("unknown cloud extension '" + ext + "'");
    }
  }
  const std::string text = read_file(path);
  return *format == CloudFormat::kCsv ? parse_csv_cloud(text) : parse_ply_cloud(text);
}

void save_csv_cloud(const PointCloud& cloud, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DomainError("cannot write " + path.string());
  out.precision(17);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.position(i);
    out << p.x() << ',' << p.y() << ',' << p.z();
    if (cloud.has_colors()) {
      const Rgb& c = cloud.colors()[i];
      out << ',' << int(c[0]) << ',' << int(c[1]) << ',' << int(c[2]);
    }
    if (cloud.has_target()) out << ',' << cloud.target()[i];
    out << '\n';
  }
}

void save_ply_cloud(const PointCloud& cloud, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DomainError("cannot write " + path.string());
  out.precision(17);
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size()
      << "\nproperty double x\nproperty double y\nproperty double z\n";
  if (cloud.has_colors()) out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  if (cloud.has_target()) out << "property double p\n";
  out << "end_header\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.position(i);
    out << p.x() << ' ' << p.y() << ' ' << p.z();
    if (cloud.has_colors()) {
      const Rgb& c = cloud.colors()[i];
      out << ' ' << int(c[0]) << ' ' << int(c[1]) << ' ' << int(c[2]);
    }
    if (cloud.has_target()) out << ' ' << cloud.target()[i];
    out << '\n';
  }
}

PointCloud voxel_downsample(const PointCloud& cloud, double voxel) {
  if (!(voxel > 0.0) || !std::isfinite(voxel)) throw DomainError("voxel size must be positive");
  using Key = std::tuple<std::int64_t, std::int64_t, std::int64_t>;
  struct Cell {
    Vec3 sum = Vec3::Zero();
    Eigen::Vector3d color = Eigen::Vector3d::Zero();
    double mass = 0.0;
    std::size_t count = 0;
  };
  std::map<Key, Cell> cells;  // ordered map: output order is deterministic
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.position(i);
    const Key key{static_cast<std::int64_t>(std::floor(p.x() / voxel)),
                  static_cast<std::int64_t>(std::floor(p.y() / voxel)),
                  static_cast<std::int64_t>(std::floor(p.z() / voxel))};
    Cell& c = cells[key];
    c.sum += p;
    if (cloud.has_colors()) {
      const Rgb& rgb = cloud.colors()[i];
      c.color += Eigen::Vector3d(rgb[0], rgb[1], rgb[2]);
    }
    if (cloud.has_target()) c.mass += cloud.target()[i];
    ++c.count;
  }
  std::vector<Vec3> pos;
  std::vector<Rgb> rgb;
  std::vector<double> mass;
  pos.reserve(cells.size());
  for (const auto& [key, c] : cells) {
    const double n = static_cast<double>(c.count);
    pos.push_back(c.sum / n);
    if (cloud.has_colors()) {
      const Eigen::Vector3d m = (c.color / n).array().round();
      rgb.push_back({static_cast<std::uint8_t>(m[0]), static_cast<std::uint8_t>(m[1]),
                     static_cast<std::uint8_t>(m[2])});
    }
    if (cloud.has_target()) mass.push_back(c.mass);
  }
  std::optional<std::vector<Rgb>> colors;
  if (cloud.has_colors()) colors = std::move(rgb);
  std::optional<std::vector<double>> target;
  if (cloud.has_target()) target = std::move(mass);
  return PointCloud(std::move(pos), std::move(colors), std::move(target));
}

double mean_spacing(const PointCloud& cloud) {
  if (cloud.size() < 2) throw DomainError("mean_spacing needs at least two points");
  const KdTree tree(cloud);
  double sum = 0.0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto nn = tree.knn(cloud.position(i), 2);
    const std::size_t j = nn[0] == i ? nn[1] : nn[0];
    sum += (cloud.position(j) - cloud.position(i)).norm();
  }
  const double h = sum / static_cast<double>(cloud.size());
  if (!(h > 0.0)) throw DomainError("mean_spacing: all points coincide");
  return h;
}

}  // namespace ergodic
