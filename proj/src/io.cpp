#include "embedopt/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "embedopt/errors.hpp"

namespace embedopt {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

std::filesystem::path with_suffix(std::filesystem::path stem, const char* suffix) {
  stem += suffix;
  return stem;
}

}  // namespace

void write_map(const std::filesystem::path& stem, const VoxelMap& map) {
  static_assert(std::endian::native == std::endian::little, "map files are little-endian");
  const MapGrid& g = map.grid;
  require(map.values.size() == g.voxel_count(), "write_map: voxel count mismatch");
  nlohmann::ordered_json header;
  header["shape"] = {g.shape[0], g.shape[1], g.shape[2]};
  header["origin"] = {g.origin[0], g.origin[1], g.origin[2]};
  header["spacing"] = g.spacing;
  header["dtype"] = "float64";
  header["byte_order"] = "little";
  header["order"] = "xyz-row-major";
  std::string bytes(map.values.size() * sizeof(double), '\0');
  std::memcpy(bytes.data(), map.values.data(), bytes.size());
  write_file_atomic(with_suffix(stem, ".bin"), bytes);
  write_file_atomic(with_suffix(stem, ".json"), header.dump(2) + "\n");
}

VoxelMap read_map(const std::filesystem::path& stem) {
  const auto header = nlohmann::json::parse(read_file(with_suffix(stem, ".json")));
  require(header.value("dtype", "") == "float64", "map header: dtype must be float64");
  require(header.value("byte_order", "") == "little", "map header: byte_order must be little");
  VoxelMap map;
  for (std::size_t a = 0; a < 3; ++a) {
    map.grid.shape[a] = header.at("shape").at(a).get<std::size_t>();
    map.grid.origin[a] = header.at("origin").at(a).get<double>();
  }
  map.grid.spacing = header.at("spacing").get<double>();
  const std::string bytes = read_file(with_suffix(stem, ".bin"));
  require(bytes.size() == map.grid.voxel_count() * sizeof(double),
          "map body size does not match header shape");
  map.values.resize(map.grid.voxel_count());
  std::memcpy(map.values.data(), bytes.data(), bytes.size());
  return map;
}

std::string constraints_to_csv(const std::vector<DistanceConstraint>& constraints) {
  std::string out = "i,j,target,delta\n";
  for (const auto& c : constraints)
    out += std::to_string(c.i) + ',' + std::to_string(c.j) + ',' + format_double(c.target) + ',' +
           format_double(c.delta) + '\n';
  return out;
}

std::vector<DistanceConstraint> constraints_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "constraint CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  require(line == "i,j,target,delta", "constraint CSV header must be i,j,target,delta");
  std::vector<DistanceConstraint> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string field[4];
    for (auto& f : field)
      require(static_cast<bool>(std::getline(row, f, ',')),
              "constraint CSV line " + std::to_string(lineno) + " needs four fields");
    try {
      DistanceConstraint c;
      c.i = std::stoul(field[0]);
      c.j = std::stoul(field[1]);
      c.target = std::stod(field[2]);
      c.delta = std::stod(field[3]);
      out.push_back(c);
    } catch (const std::logic_error&) {
      throw InvalidArgument("constraint CSV line " + std::to_string(lineno) + " is malformed");
    }
  }
  return out;
}

}  // namespace embedopt
